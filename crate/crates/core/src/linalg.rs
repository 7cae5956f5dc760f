//! Sparse symmetric matrices on a mesh graph: reverse Cuthill–McKee ordering
//! and a skyline (profile) Cholesky factorization.

use std::collections::VecDeque;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinalgError {
    /// Raised on the first non-positive pivot; the matrix is not positive definite.
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

/// Fill pattern of a symmetric matrix whose off-diagonal nonzeros are the
/// edges of a graph, stored as a lower skyline in RCM order.
#[derive(Debug, Clone)]
pub struct Profile {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `iperm[old] = new`
    iperm: Vec<usize>,
    /// first stored column of each (permuted) row
    first: Vec<usize>,
    /// start of each row in the value array
    offset: Vec<usize>,
}

impl Profile {
    pub fn new(n: usize, edges: &[[usize; 2]]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &[a, b] in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut iperm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for &[a, b] in edges {
            let (i, j) = (iperm[a], iperm[b]);
            let (hi, lo) = if i > j { (i, j) } else { (j, i) };
            first[hi] = first[hi].min(lo);
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut acc = 0;
        offset.push(0);
        for (i, &f) in first.iter().enumerate() {
            acc += i - f + 1;
            offset.push(acc);
        }
        Self {
            n,
            perm,
            iperm,
            first,
            offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries, including fill.
    pub fn stored(&self) -> usize {
        self.offset[self.n]
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j >= self.first[i] && j <= i);
        self.offset[i] + j - self.first[i]
    }
}

fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    while order.len() < n {
        // start each component from a vertex of minimal degree
        let start = (0..n).filter(|&v| !seen[v]).min_by_key(|&v| (adj[v].len(), v)).unwrap();
        let start = pseudo_peripheral(adj, start);
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            nb.sort_unstable_by_key(|&w| (adj[w].len(), w));
            for w in nb {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Far end of a few breadth-first sweeps (George–Liu heuristic).
fn pseudo_peripheral(adj: &[Vec<usize>], start: usize) -> usize {
    let mut v = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let (far, e) = bfs_far(adj, v);
        if e <= ecc {
            break;
        }
        ecc = e;
        v = far;
    }
    v
}

fn bfs_far(adj: &[Vec<usize>], s: usize) -> (usize, usize) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[s] = 0;
    let mut queue = VecDeque::from([s]);
    let mut best = (s, 0);
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d > best.1 || (d == best.1 && adj[v].len() < adj[best.0].len()) {
            best = (v, d);
        }
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = d + 1;
                queue.push_back(w);
            }
        }
    }
    best
}

/// Symmetric matrix assembled on a [`Profile`]; indices are in the caller's
/// (unpermuted) numbering.
#[derive(Debug, Clone)]
pub struct SymMatrix<'p> {
    profile: &'p Profile,
    vals: Vec<f64>,
}

impl<'p> SymMatrix<'p> {
    pub fn zeros(profile: &'p Profile) -> Self {
        Self {
            profile,
            vals: vec![0.0; profile.stored()],
        }
    }

    /// Adds `v` to entries `(a, b)` and `(b, a)` (once when `a == b`).
    pub fn add(&mut self, a: usize, b: usize, v: f64) {
        let (i, j) = (self.profile.iperm[a], self.profile.iperm[b]);
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = self.profile.slot(hi, lo);
        self.vals[k] += v;
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (a, &x) in d.iter().enumerate() {
            self.add(a, a, x);
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let p = self.profile;
        let mut d = vec![0.0; p.n];
        for i in 0..p.n {
            d[p.perm[i]] = self.vals[p.slot(i, i)];
        }
        d
    }

    /// `y = A x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let p = self.profile;
        let xp: Vec<f64> = p.perm.iter().map(|&o| x[o]).collect();
        let mut yp = vec![0.0; p.n];
        for i in 0..p.n {
            let row = &self.vals[p.offset[i]..p.offset[i + 1]];
            let f = p.first[i];
            for (k, &a) in row.iter().enumerate() {
                let j = f + k;
                yp[i] += a * xp[j];
                if j != i {
                    yp[j] += a * xp[i];
                }
            }
        }
        let mut y = vec![0.0; p.n];
        for (i, &o) in p.perm.iter().enumerate() {
            y[o] = yp[i];
        }
        y
    }

    /// In-place skyline Cholesky `A = L Lᵀ`.
    pub fn factor(mut self) -> Result<Cholesky<'p>, LinalgError> {
        let p = self.profile;
        for i in 0..p.n {
            let fi = p.first[i];
            let oi = p.offset[i];
            for j in fi..i {
                let fj = p.first[j];
                let oj = p.offset[j];
                let k0 = fi.max(fj);
                let mut s = self.vals[oi + j - fi];
                let ri = &self.vals[oi + k0 - fi..oi + j - fi];
                let rj = &self.vals[oj + k0 - fj..oj + j - fj];
                s -= dot(ri, rj);
                let ljj = self.vals[oj + j - fj];
                self.vals[oi + j - fi] = s / ljj;
            }
            let row = &self.vals[oi..oi + i - fi];
            let pivot = self.vals[oi + i - fi] - dot(row, row);
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: p.perm[i], pivot });
            }
            self.vals[oi + i - fi] = pivot.sqrt();
        }
        Ok(Cholesky {
            profile: p,
            vals: self.vals,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct Cholesky<'p> {
    profile: &'p Profile,
    vals: Vec<f64>,
}

impl Cholesky<'_> {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = self.profile;
        let mut y: Vec<f64> = p.perm.iter().map(|&o| b[o]).collect();
        // L y = b
        for i in 0..p.n {
            let f = p.first[i];
            let row = &self.vals[p.offset[i]..p.offset[i + 1]];
            let s = dot(&row[..i - f], &y[f..i]);
            y[i] = (y[i] - s) / row[i - f];
        }
        // Lᵀ x = y
        for i in (0..p.n).rev() {
            let f = p.first[i];
            let row = &self.vals[p.offset[i]..p.offset[i + 1]];
            y[i] /= row[i - f];
            let yi = y[i];
            for (k, &l) in row[..i - f].iter().enumerate() {
                y[f + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; p.n];
        for (i, &o) in p.perm.iter().enumerate() {
            x[o] = y[i];
        }
        x
    }
}
