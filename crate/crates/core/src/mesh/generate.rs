use std::collections::HashMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, HasPosition, Point2, Triangulation};

use super::{EdgeLengths, MeshError, Positions, TriMesh};

/// Regular triangulation of the flat cylinder `[0, T] × S¹` (circumference 2π).
///
/// `n_s` axial intervals, `n_th` angular intervals. Every square in ring `i`
/// is split along the same diagonal, alternating direction between rings, so
/// the mesh is invariant under rotation by one cell and under the reflection
/// `s ↦ T − s` (for even `n_s`). Loop 0 is `s = 0`, loop 1 is `s = T`.
pub fn generate_flat_annulus(t: f64, n_s: usize, n_th: usize) -> Result<TriMesh, MeshError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(MeshError::InvalidParameter(format!(
            "modulus T must be positive, got {t}"
        )));
    }
    if n_s < 2 || n_th < 3 {
        return Err(MeshError::InvalidParameter(format!(
            "need n_s ≥ 2 and n_th ≥ 3, got n_s = {n_s}, n_th = {n_th}"
        )));
    }
    let hs = t / n_s as f64;
    let ht = TAU / n_th as f64;
    let diag = hs.hypot(ht);
    let idx = |i: usize, j: usize| i * n_th + (j % n_th);

    let coords = (0..=n_s)
        .flat_map(|i| {
            (0..n_th).map(move |j| {
                let th = j as f64 * ht;
                [i as f64 * hs, th.cos(), th.sin()]
            })
        })
        .collect();

    let mut faces = Vec::with_capacity(2 * n_s * n_th);
    let mut lengths = Vec::with_capacity(3 * n_s * n_th + n_th);
    for i in 0..n_s {
        for j in 0..n_th {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            if i % 2 == 0 {
                faces.push([v00, v10, v11]);
                faces.push([v00, v11, v01]);
                lengths.push(([v00, v11], diag));
            } else {
                faces.push([v00, v10, v01]);
                faces.push([v10, v11, v01]);
                lengths.push(([v10, v01], diag));
            }
            lengths.push(([v00, v10], hs));
            lengths.push(([v00, v01], ht));
        }
    }
    for j in 0..n_th {
        lengths.push(([idx(n_s, j), idx(n_s, j + 1)], ht));
    }

    let bottom: Vec<usize> = (0..n_th).rev().map(|j| idx(0, j)).collect();
    let top: Vec<usize> = (0..n_th).map(|j| idx(n_s, j)).collect();
    TriMesh::new(
        (n_s + 1) * n_th,
        Some(Positions { dim: 3, coords }),
        faces,
        vec![bottom, top],
        EdgeLengths::Explicit(lengths),
    )
}

/// Parameters of the planar pair-of-pants domain: the disk of radius
/// `outer_radius` minus two disks centred at `(∓hole_offset, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PantsParams {
    pub outer_radius: f64,
    pub hole_radii: [f64; 2],
    pub hole_offset: f64,
    /// Number of vertices on the outer circle; sets the target edge length.
    pub resolution: usize,
}

/// Default `(R, r, a, n)`.
pub const DEFAULT_PANTS: (f64, f64, f64, usize) = (3.0, 0.8, 1.4, 96);

const MIN_HOLE_POINTS: usize = 24;

impl PantsParams {
    fn validate(&self) -> Result<(), MeshError> {
        let PantsParams {
            outer_radius: big_r,
            hole_radii,
            hole_offset: a,
            resolution,
        } = *self;
        let bad = |m: String| Err(MeshError::InvalidParameter(m));
        if !(big_r > 0.0 && a > 0.0 && hole_radii.iter().all(|&r| r > 0.0)) {
            return bad(format!("radii and offset must be positive: {self:?}"));
        }
        for &r in &hole_radii {
            if a + r >= big_r {
                return bad(format!(
                    "hole of radius {r} at offset {a} leaves the outer disk of radius {big_r}"
                ));
            }
            if r >= a {
                return bad(format!("hole radius {r} must be smaller than the offset {a}"));
            }
        }
        if resolution < 16 {
            return bad(format!("resolution must be at least 16, got {resolution}"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Site {
    p: Point2<f64>,
    id: usize,
}

impl HasPosition for Site {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        self.p
    }
}

pub fn generate_pants_domain(r_outer: f64, r_hole: f64, a: f64, n: usize) -> Result<TriMesh, MeshError> {
    generate_pants_domain_with(&PantsParams {
        outer_radius: r_outer,
        hole_radii: [r_hole, r_hole],
        hole_offset: a,
        resolution: n,
    })
}

/// Triangulates the pants domain with Euclidean edge lengths.
///
/// Points are placed on the three boundary circles, on graded rings around
/// them, and on a hexagonal lattice in between; the Delaunay triangulation of
/// these points, constrained to the circle chords, is clipped to the domain. Loop 0 is the outer circle, loops 1
/// and 2 the holes at `−a` and `+a`.
pub fn generate_pants_domain_with(params: &PantsParams) -> Result<TriMesh, MeshError> {
    params.validate()?;
    let big_r = params.outer_radius;
    let n = params.resolution;
    let h = TAU * big_r / n as f64;
    let row = 0.5 * 3f64.sqrt() * h;
    let centres = [(-params.hole_offset, 0.0), (params.hole_offset, 0.0)];

    let mut pts: Vec<[f64; 2]> = Vec::new();
    // 0 = outer circle, 1/2 = holes, usize::MAX = interior
    let mut owner: Vec<usize> = Vec::new();
    let ring =
        |pts: &mut Vec<[f64; 2]>, owner: &mut Vec<usize>, c: (f64, f64), r: f64, m: usize, phase: f64, tag: usize| {
            for k in 0..m {
                let th = TAU * (k as f64 + phase) / m as f64;
                pts.push([c.0 + r * th.cos(), c.1 + r * th.sin()]);
                owner.push(tag);
            }
        };

    // graded rings around each hole, sized first so the outer rings can avoid them
    let mut hole_rings: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut hole_clear = [0.0; 2];
    for (i, (&c, &r)) in centres.iter().zip(&params.hole_radii).enumerate() {
        let m = MIN_HOLE_POINTS.max((TAU * r / h).round() as usize);
        // room before the rings would reach the other boundaries
        let other = (centres[1 - i].0 - c.0).abs() - params.hole_radii[1 - i];
        let room = (big_r - params.hole_offset).min(other) - 1.5 * h;
        let growth = 1.0 + 0.5 * 3f64.sqrt() * TAU / m as f64;
        let mut radii = vec![r];
        let mut rad = r;
        while TAU * rad / (m as f64) < 0.9 * h && rad * growth < room {
            rad *= growth;
            radii.push(rad);
        }
        hole_clear[i] = rad;
        hole_rings.push((m, radii));
    }
    let clear_of_holes = |x: f64, y: f64, margin: f64| {
        centres
            .iter()
            .zip(&hole_clear)
            .all(|(c, &rc)| (x - c.0).hypot(y - c.1) > rc + margin)
    };

    ring(&mut pts, &mut owner, (0.0, 0.0), big_r, n, 0.0, 0);
    let mut outer_clear = big_r;
    for m in 1..=2 {
        outer_clear = big_r - m as f64 * row;
        let start = pts.len();
        ring(
            &mut pts,
            &mut owner,
            (0.0, 0.0),
            outer_clear,
            n,
            0.5 * m as f64,
            usize::MAX,
        );
        let kept: Vec<[f64; 2]> = pts
            .drain(start..)
            .filter(|p| clear_of_holes(p[0], p[1], 0.5 * h))
            .collect();
        owner.truncate(start);
        owner.extend(std::iter::repeat_n(usize::MAX, kept.len()));
        pts.extend(kept);
    }

    for (i, (m, radii)) in hole_rings.iter().enumerate() {
        for (k, &rad) in radii.iter().enumerate() {
            let tag = if k == 0 { i + 1 } else { usize::MAX };
            ring(&mut pts, &mut owner, centres[i], rad, *m, 0.5 * k as f64, tag);
        }
    }

    let margin = 0.75 * h;
    let rows = (big_r / row).ceil() as i64 + 1;
    let cols = (big_r / h).ceil() as i64 + 1;
    for j in -rows..=rows {
        let y = j as f64 * row;
        let shift = if j.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
        for i in -cols..=cols {
            let x = i as f64 * h + shift;
            if x.hypot(y) > outer_clear - margin {
                continue;
            }
            if clear_of_holes(x, y, margin) {
                pts.push([x, y]);
                owner.push(usize::MAX);
            }
        }
    }

    let sites: Vec<Site> = pts
        .iter()
        .enumerate()
        .map(|(id, p)| Site {
            p: Point2::new(p[0], p[1]),
            id,
        })
        .collect();
    // boundary circles enter as constraint edges so they are always recovered
    let mut constraints = Vec::new();
    for tag in 0..3 {
        let ids: Vec<usize> = (0..pts.len()).filter(|&v| owner[v] == tag).collect();
        for k in 0..ids.len() {
            constraints.push([ids[k], ids[(k + 1) % ids.len()]]);
        }
    }
    let tri = ConstrainedDelaunayTriangulation::<Site>::bulk_load_cdt(sites, constraints)
        .map_err(|e| MeshError::InvalidParameter(format!("triangulation failed: {e:?}")))?;
    if tri.num_vertices() != pts.len() {
        return Err(MeshError::InvalidParameter("duplicate sample points".into()));
    }

    let inside = |x: f64, y: f64| {
        x.hypot(y) < big_r
            && centres
                .iter()
                .zip(&params.hole_radii)
                .all(|(c, &r)| (x - c.0).hypot(y - c.1) > r)
    };
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for f in tri.inner_faces() {
        let ids = f.vertices().map(|v| v.data().id);
        let cx = ids.iter().map(|&i| pts[i][0]).sum::<f64>() / 3.0;
        let cy = ids.iter().map(|&i| pts[i][1]).sum::<f64>() / 3.0;
        if inside(cx, cy) {
            faces.push(ids);
        }
    }
    // deterministic face order
    faces.sort_unstable_by_key(|f| {
        let m = f.iter().position(|&v| v == *f.iter().min().unwrap()).unwrap();
        [f[m], f[(m + 1) % 3], f[(m + 2) % 3]]
    });

    let loops = boundary_chains(&faces)
        .into_iter()
        .map(|chain| {
            let tag = owner[chain[0]];
            (tag, chain)
        })
        .collect::<Vec<_>>();
    let mut ordered: Vec<Option<Vec<usize>>> = vec![None, None, None];
    for (tag, chain) in loops {
        let expected = owner.iter().filter(|&&o| o == tag).count();
        if tag > 2 || chain.len() != expected || chain.iter().any(|&v| owner[v] != tag) || ordered[tag].is_some() {
            return Err(MeshError::InvalidParameter(
                "triangulation does not recover the boundary circles; increase the resolution".into(),
            ));
        }
        ordered[tag] = Some(chain);
    }
    let loops: Vec<Vec<usize>> = ordered
        .into_iter()
        .collect::<Option<_>>()
        .ok_or_else(|| MeshError::InvalidParameter("triangulation lost a boundary circle".into()))?;

    let coords = pts.iter().map(|p| [p[0], p[1], 0.0]).collect();
    TriMesh::new(
        pts.len(),
        Some(Positions { dim: 2, coords }),
        faces,
        loops,
        EdgeLengths::FromPositions,
    )
}

/// Boundary half-edges chained into closed loops, each starting at its
/// smallest vertex.
fn boundary_chains(faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut half: HashMap<(usize, usize), ()> = HashMap::new();
    for f in faces {
        for k in 0..3 {
            half.insert((f[k], f[(k + 1) % 3]), ());
        }
    }
    let mut next: HashMap<usize, usize> = HashMap::new();
    for &(a, b) in half.keys() {
        if !half.contains_key(&(b, a)) {
            next.insert(a, b);
        }
    }
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut seen = std::collections::HashSet::new();
    let mut chains = Vec::new();
    for s in starts {
        if seen.contains(&s) {
            continue;
        }
        let mut chain = vec![s];
        seen.insert(s);
        let mut v = next[&s];
        while v != s {
            if !seen.insert(v) {
                break;
            }
            chain.push(v);
            match next.get(&v) {
                Some(&w) => v = w,
                None => break,
            }
        }
        chains.push(chain);
    }
    chains
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn annulus_counts() {
        let m = generate_flat_annulus(PI, 4, 8).unwrap();
        assert_eq!(m.vertex_count(), 40);
        assert_eq!(m.euler_characteristic(), 0);
        assert_eq!(m.loop_count(), 2);
        for i in 0..2 {
            assert!((m.loop_length(i) - TAU).abs() < 1e-12);
            assert_eq!(m.loops()[i].len(), 8);
        }
    }

    #[test]
    fn annulus_refinement_halves_edges() {
        let a = generate_flat_annulus(2.0, 6, 10).unwrap();
        let b = generate_flat_annulus(2.0, 12, 20).unwrap();
        assert!((a.max_edge_length() / b.max_edge_length() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn annulus_rejects_bad_parameters() {
        assert!(generate_flat_annulus(0.0, 4, 8).is_err());
        assert!(generate_flat_annulus(1.0, 1, 8).is_err());
        assert!(generate_flat_annulus(1.0, 4, 2).is_err());
    }

    #[test]
    fn pants_topology() {
        let (r, h, a, n) = DEFAULT_PANTS;
        let m = generate_pants_domain(r, h, a, n).unwrap();
        assert_eq!(m.euler_characteristic(), -1);
        assert_eq!(m.loop_count(), 3);
        assert_eq!(m.genus(), 0);
        assert_eq!(m.loops()[0].len(), n);
    }

    #[test]
    fn pants_deterministic() {
        let a = generate_pants_domain(3.0, 0.8, 1.4, 48).unwrap();
        let b = generate_pants_domain(3.0, 0.8, 1.4, 48).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pants_small_hole() {
        let p = PantsParams {
            outer_radius: 3.0,
            hole_radii: [0.05, 0.8],
            hole_offset: 1.4,
            resolution: 64,
        };
        let m = generate_pants_domain_with(&p).unwrap();
        assert_eq!(m.euler_characteristic(), -1);
        assert!((m.loop_length(1) - TAU * 0.05).abs() < 0.01);
    }

    #[test]
    fn pants_rejects_infeasible() {
        assert!(generate_pants_domain(3.0, 0.8, 2.5, 64).is_err());
        assert!(generate_pants_domain(3.0, 1.5, 1.4, 64).is_err());
    }
}
