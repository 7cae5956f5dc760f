//! Triangle meshes with boundary loops and an intrinsic background metric.
//!
//! The metric is carried as one length per undirected edge. Positions are
//! optional and only used to derive lengths when none are supplied.

mod background;
mod generate;
mod io;

use std::collections::HashMap;

use thiserror::Error;

pub use background::{build_background, BackgroundMetric};
pub use generate::{
    generate_flat_annulus, generate_pants_domain, generate_pants_domain_with, PantsParams, DEFAULT_PANTS,
};
pub use io::{mesh_from_str, mesh_to_string, read_mesh, write_mesh};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("face {face} is degenerate (edge lengths {lengths:?})")]
    DegenerateFace { face: usize, lengths: [f64; 3] },
    #[error("invalid generator parameters: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Optional vertex coordinates, 2D or 3D (2D stored with `z = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct Positions {
    pub dim: usize,
    pub coords: Vec<[f64; 3]>,
}

/// Where the background edge lengths come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeLengths {
    Explicit(Vec<([usize; 2], f64)>),
    FromPositions,
}

/// Oriented triangle mesh of a compact surface with boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertex_count: usize,
    positions: Option<Positions>,
    faces: Vec<[usize; 3]>,
    loops: Vec<Vec<usize>>,
    edges: Vec<[usize; 2]>,
    lengths: Vec<f64>,
    /// `face_edges[f][k]` is the edge opposite local vertex `k`.
    face_edges: Vec<[usize; 3]>,
    edge_index: HashMap<[usize; 2], usize>,
    loop_of_vertex: Vec<Option<usize>>,
}

fn key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

impl TriMesh {
    /// Builds and validates a mesh. Every invariant violation is collected and
    /// reported together.
    pub fn new(
        vertex_count: usize,
        positions: Option<Positions>,
        faces: Vec<[usize; 3]>,
        loops: Vec<Vec<usize>>,
        lengths: EdgeLengths,
    ) -> Result<Self, MeshError> {
        let mut errs = Vec::new();

        if let Some(p) = &positions {
            if p.coords.len() != vertex_count {
                errs.push(format!(
                    "{} positions given for {} vertices",
                    p.coords.len(),
                    vertex_count
                ));
            }
        }

        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                if v >= vertex_count {
                    errs.push(format!("face {f} references vertex {v} (vertex count {vertex_count})"));
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                errs.push(format!("face {f} repeats a vertex: {face:?}"));
            }
        }
        if faces.is_empty() {
            errs.push("mesh has no faces".into());
        }
        if !errs.is_empty() {
            return Err(MeshError::Invalid(errs));
        }

        // Half-edges and undirected edges.
        let mut half: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut face_edges = Vec::with_capacity(faces.len());
        for (f, face) in faces.iter().enumerate() {
            let mut fe = [0usize; 3];
            for k in 0..3 {
                let a = face[(k + 1) % 3];
                let b = face[(k + 2) % 3];
                if let Some(g) = half.insert((a, b), f) {
                    errs.push(format!(
                        "directed edge ({a}, {b}) appears in faces {g} and {f} (inconsistent orientation or non-manifold)"
                    ));
                }
                let kk = key(a, b);
                let next = edges.len();
                let e = *edge_index.entry(kk).or_insert_with(|| {
                    edges.push(kk);
                    next
                });
                fe[k] = e;
            }
            face_edges.push(fe);
        }

        // Boundary half-edges: present in one direction only.
        let mut boundary_next: HashMap<usize, usize> = HashMap::new();
        let mut boundary_half = 0usize;
        for &(a, b) in half.keys() {
            if !half.contains_key(&(b, a)) {
                boundary_half += 1;
                if let Some(prev) = boundary_next.insert(a, b) {
                    errs.push(format!(
                        "boundary vertex {a} has two outgoing boundary edges (to {prev} and {b})"
                    ));
                }
            }
        }

        let mut used = vec![false; vertex_count];
        for face in &faces {
            for &v in face {
                used[v] = true;
            }
        }
        for (v, &u) in used.iter().enumerate() {
            if !u {
                errs.push(format!("vertex {v} belongs to no face"));
            }
        }

        // Loops: normalise orientation, check coverage.
        let mut loops_out = Vec::with_capacity(loops.len());
        let mut loop_of_vertex = vec![None; vertex_count];
        let mut covered = 0usize;
        if loops.is_empty() {
            errs.push("mesh has no boundary loops".into());
        }
        for (i, lp) in loops.iter().enumerate() {
            if lp.len() < 3 {
                errs.push(format!("loop {i} has fewer than 3 vertices"));
                continue;
            }
            if let Some(&v) = lp.iter().find(|&&v| v >= vertex_count) {
                errs.push(format!("loop {i} references vertex {v} (vertex count {vertex_count})"));
                continue;
            }
            let forward = |l: &[usize]| (0..l.len()).all(|j| boundary_next.get(&l[j]) == Some(&l[(j + 1) % l.len()]));
            let mut l = lp.clone();
            if !forward(&l) {
                l.reverse();
                if !forward(&l) {
                    errs.push(format!("loop {i} does not follow consecutive boundary edges"));
                    continue;
                }
            }
            for &v in &l {
                match loop_of_vertex[v] {
                    Some(j) => errs.push(format!("vertex {v} appears in loops {j} and {i}")),
                    None => loop_of_vertex[v] = Some(i),
                }
            }
            covered += l.len();
            loops_out.push(l);
        }
        if errs.is_empty() && covered != boundary_half {
            errs.push(format!(
                "loops cover {covered} boundary edges but the mesh has {boundary_half}"
            ));
        }

        // Connectivity through shared edges.
        if errs.is_empty() {
            let mut edge_faces: Vec<Vec<usize>> = vec![Vec::new(); edges.len()];
            for (f, fe) in face_edges.iter().enumerate() {
                for &e in fe {
                    edge_faces[e].push(f);
                }
            }
            let mut seen = vec![false; faces.len()];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(f) = stack.pop() {
                for &e in &face_edges[f] {
                    for &g in &edge_faces[e] {
                        if !seen[g] {
                            seen[g] = true;
                            stack.push(g);
                        }
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                errs.push("mesh is not connected".into());
            }
        }

        // Edge lengths.
        let mut len = vec![f64::NAN; edges.len()];
        match lengths {
            EdgeLengths::Explicit(list) => {
                for ([a, b], l) in list {
                    match edge_index.get(&key(a, b)) {
                        Some(&e) => len[e] = l,
                        None => errs.push(format!("edge length given for ({a}, {b}) which is not a mesh edge")),
                    }
                }
            }
            EdgeLengths::FromPositions => match &positions {
                Some(p) if p.coords.len() == vertex_count => {
                    for (e, &[a, b]) in edges.iter().enumerate() {
                        let (pa, pb) = (p.coords[a], p.coords[b]);
                        len[e] = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2) + (pa[2] - pb[2]).powi(2)).sqrt();
                    }
                }
                _ => errs.push("no edge lengths and no vertex positions to derive them from".into()),
            },
        }
        for (e, &l) in len.iter().enumerate() {
            if l.is_nan() {
                errs.push(format!("missing length for edge {:?}", edges[e]));
            } else if !(l > 0.0 && l.is_finite()) {
                errs.push(format!("edge {:?} has non-positive length {l}", edges[e]));
            }
        }
        if errs.is_empty() {
            for (f, fe) in face_edges.iter().enumerate() {
                let [a, b, c] = [len[fe[0]], len[fe[1]], len[fe[2]]];
                if !(a < b + c && b < a + c && c < a + b) {
                    errs.push(format!(
                        "face {f} violates the triangle inequality (lengths {a}, {b}, {c})"
                    ));
                }
            }
        }

        if errs.is_empty() {
            let chi = vertex_count as i64 - edges.len() as i64 + faces.len() as i64;
            let k = loops_out.len() as i64;
            if chi > 0 {
                errs.push(format!("Euler characteristic {chi} > 0: no hyperbolic metric exists"));
            } else if chi == 0 && k != 2 {
                errs.push(format!("Euler characteristic 0 with {k} boundary loops"));
            } else if (2 - k - chi) % 2 != 0 {
                errs.push(format!("inconsistent topology: χ = {chi}, k = {k}"));
            }
        }

        if !errs.is_empty() {
            return Err(MeshError::Invalid(errs));
        }
        Ok(Self {
            vertex_count,
            positions,
            faces,
            loops: loops_out,
            edges,
            lengths: len,
            face_edges,
            edge_index,
            loop_of_vertex,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn edge_length(&self, a: usize, b: usize) -> Option<f64> {
        self.edge_index.get(&key(a, b)).map(|&e| self.lengths[e])
    }

    pub fn face_edges(&self) -> &[[usize; 3]] {
        &self.face_edges
    }

    pub fn loops(&self) -> &[Vec<usize>] {
        &self.loops
    }

    pub fn loop_count(&self) -> usize {
        self.loops.len()
    }

    pub fn loop_of_vertex(&self, v: usize) -> Option<usize> {
        self.loop_of_vertex[v]
    }

    pub fn positions(&self) -> Option<&Positions> {
        self.positions.as_ref()
    }

    /// `χ = V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn genus(&self) -> i64 {
        (2 - self.loops.len() as i64 - self.euler_characteristic()) / 2
    }

    /// Copy with every background edge length multiplied by `factor`, i.e. the
    /// background metric scaled by `factor²`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.clone();
        for l in &mut m.lengths {
            *l *= factor;
        }
        if let Some(p) = &mut m.positions {
            for c in &mut p.coords {
                for x in c.iter_mut() {
                    *x *= factor;
                }
            }
        }
        m
    }

    /// Length of boundary loop `i` in the background metric.
    pub fn loop_length(&self, i: usize) -> f64 {
        let l = &self.loops[i];
        (0..l.len())
            .map(|j| self.edge_length(l[j], l[(j + 1) % l.len()]).unwrap_or(f64::NAN))
            .sum()
    }

    pub fn max_edge_length(&self) -> f64 {
        self.lengths.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_annulus() -> (usize, Vec<[usize; 3]>, Vec<Vec<usize>>) {
        // Outer square 0..4, inner square 4..8, 8 triangles.
        let faces = vec![
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        (8, faces, vec![vec![0, 1, 2, 3], vec![4, 7, 6, 5]])
    }

    fn square_positions() -> Positions {
        let coords = vec![
            [-2.0, -2.0, 0.0],
            [2.0, -2.0, 0.0],
            [2.0, 2.0, 0.0],
            [-2.0, 2.0, 0.0],
            [-1.0, -1.0, 0.0],
            [1.0, -1.0, 0.0],
            [1.0, 1.0, 0.0],
            [-1.0, 1.0, 0.0],
        ];
        Positions { dim: 2, coords }
    }

    #[test]
    fn annulus_from_positions() {
        let (n, faces, loops) = square_annulus();
        let m = TriMesh::new(n, Some(square_positions()), faces, loops, EdgeLengths::FromPositions).unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        assert_eq!(m.loop_count(), 2);
        assert_eq!(m.genus(), 0);
        assert!((m.loop_length(0) - 16.0).abs() < 1e-14);
        assert_eq!(m.loops()[1], vec![4, 7, 6, 5]);
    }

    #[test]
    fn reversed_loop_is_normalised() {
        let (n, faces, _) = square_annulus();
        let loops = vec![vec![3, 2, 1, 0], vec![4, 5, 6, 7]];
        let m = TriMesh::new(n, Some(square_positions()), faces, loops, EdgeLengths::FromPositions).unwrap();
        assert_eq!(m.loops()[0], vec![0, 1, 2, 3]);
        assert_eq!(m.loops()[1], vec![7, 6, 5, 4]);
    }

    #[test]
    fn single_triangle_rejected() {
        let m = TriMesh::new(
            3,
            None,
            vec![[0, 1, 2]],
            vec![vec![0, 1, 2]],
            EdgeLengths::Explicit(vec![([0, 1], 1.0), ([1, 2], 1.0), ([0, 2], 1.0)]),
        );
        match m {
            Err(MeshError::Invalid(v)) => assert!(v.iter().any(|s| s.contains("Euler"))),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn bad_face_index_names_face() {
        let (n, mut faces, loops) = square_annulus();
        faces[3] = [1, 99, 5];
        match TriMesh::new(n, None, faces, loops, EdgeLengths::FromPositions) {
            Err(MeshError::Invalid(v)) => assert!(v[0].contains("face 3"), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn violations_listed_exhaustively() {
        let (n, faces, loops) = square_annulus();
        let mut lens: Vec<([usize; 2], f64)> = Vec::new();
        let m = TriMesh::new(
            n,
            Some(square_positions()),
            faces.clone(),
            loops.clone(),
            EdgeLengths::FromPositions,
        )
        .unwrap();
        for (e, &[a, b]) in m.edges().iter().enumerate() {
            lens.push(([a, b], m.edge_lengths()[e]));
        }
        lens[0].1 = -1.0;
        lens[1].1 = 0.0;
        match TriMesh::new(n, None, faces, loops, EdgeLengths::Explicit(lens)) {
            Err(MeshError::Invalid(v)) => assert_eq!(v.len(), 2, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn triangle_inequality_enforced() {
        let (n, faces, loops) = square_annulus();
        let m = TriMesh::new(
            n,
            Some(square_positions()),
            faces.clone(),
            loops.clone(),
            EdgeLengths::FromPositions,
        )
        .unwrap();
        let lens: Vec<([usize; 2], f64)> = m
            .edges()
            .iter()
            .zip(m.edge_lengths())
            .map(|(&e, &l)| (e, if e == [0, 1] { 100.0 } else { l }))
            .collect();
        assert!(TriMesh::new(n, None, faces, loops, EdgeLengths::Explicit(lens)).is_err());
    }

    #[test]
    fn inconsistent_orientation_rejected() {
        let (n, mut faces, loops) = square_annulus();
        faces[1] = [0, 4, 5];
        assert!(TriMesh::new(n, Some(square_positions()), faces, loops, EdgeLengths::FromPositions).is_err());
    }

    #[test]
    fn incomplete_loops_rejected() {
        let (n, faces, mut loops) = square_annulus();
        loops.pop();
        assert!(TriMesh::new(n, Some(square_positions()), faces, loops, EdgeLengths::FromPositions).is_err());
    }

    #[test]
    fn missing_lengths_without_positions() {
        let (n, faces, loops) = square_annulus();
        assert!(TriMesh::new(n, None, faces, loops, EdgeLengths::FromPositions).is_err());
    }
}
