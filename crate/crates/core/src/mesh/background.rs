use std::f64::consts::{PI, TAU};

use super::{MeshError, TriMesh};

/// Discrete background metric `g₀` derived from the edge lengths of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundMetric {
    /// Per-edge stiffness weight `½(cot α + cot β)` of the cotan Laplacian.
    pub cotan_weights: Vec<f64>,
    /// Lumped area: one third of the incident face areas.
    pub vertex_area: Vec<f64>,
    /// Lumped boundary length: half of the two incident boundary edges, zero
    /// on interior vertices.
    pub boundary_mass: Vec<f64>,
    /// Angle defect: `2π − Σθ` at interior vertices, `π − Σθ` on the boundary.
    /// Integrated Gaussian plus geodesic curvature of `g₀`.
    pub integrated_curvature: Vec<f64>,
    pub face_areas: Vec<f64>,
}

/// Area of a triangle from its side lengths (Kahan's stable Heron formula).
fn triangle_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if p <= 0.0 {
        0.0
    } else {
        0.25 * p.sqrt()
    }
}

pub fn build_background(mesh: &TriMesh) -> Result<BackgroundMetric, MeshError> {
    let n = mesh.vertex_count();
    let lengths = mesh.edge_lengths();
    let mut cotan_weights = vec![0.0; mesh.edge_count()];
    let mut vertex_area = vec![0.0; n];
    let mut angle_sum = vec![0.0; n];
    let mut face_areas = Vec::with_capacity(mesh.face_count());

    for (f, (face, fe)) in mesh.faces().iter().zip(mesh.face_edges()).enumerate() {
        let l = [lengths[fe[0]], lengths[fe[1]], lengths[fe[2]]];
        let area = triangle_area(l[0], l[1], l[2]);
        if !(area > 0.0) {
            return Err(MeshError::DegenerateFace { face: f, lengths: l });
        }
        for k in 0..3 {
            // angle at local vertex k, opposite edge k
            let (a, b, c) = (l[k], l[(k + 1) % 3], l[(k + 2) % 3]);
            let adj = b * b + c * c - a * a;
            let angle = (4.0 * area).atan2(adj);
            if !(angle > 0.0 && angle < PI) {
                return Err(MeshError::DegenerateFace { face: f, lengths: l });
            }
            angle_sum[face[k]] += angle;
            cotan_weights[fe[k]] += 0.5 * adj / (4.0 * area);
            vertex_area[face[k]] += area / 3.0;
        }
        face_areas.push(area);
    }

    let mut boundary_mass = vec![0.0; n];
    for lp in mesh.loops() {
        for j in 0..lp.len() {
            let (a, b) = (lp[j], lp[(j + 1) % lp.len()]);
            let l = mesh.edge_length(a, b).expect("loop edges are mesh edges");
            boundary_mass[a] += 0.5 * l;
            boundary_mass[b] += 0.5 * l;
        }
    }

    let integrated_curvature = (0..n)
        .map(|v| {
            let full = if mesh.loop_of_vertex(v).is_some() { PI } else { TAU };
            full - angle_sum[v]
        })
        .collect();

    Ok(BackgroundMetric {
        cotan_weights,
        vertex_area,
        boundary_mass,
        integrated_curvature,
        face_areas,
    })
}

impl BackgroundMetric {
    /// `out = L·u` for the cotan stiffness operator (weak form of `−Δ`).
    pub fn apply_stiffness(&self, mesh: &TriMesh, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (&[a, b], &w) in mesh.edges().iter().zip(&self.cotan_weights) {
            let d = w * (u[a] - u[b]);
            out[a] += d;
            out[b] -= d;
        }
    }

    /// `uᵀ L u = Σ_e w_e (u_a − u_b)²`.
    pub fn dirichlet_form(&self, mesh: &TriMesh, u: &[f64]) -> f64 {
        mesh.edges()
            .iter()
            .zip(&self.cotan_weights)
            .map(|(&[a, b], &w)| w * (u[a] - u[b]).powi(2))
            .sum()
    }

    pub fn total_area(&self) -> f64 {
        self.vertex_area.iter().sum()
    }

    /// `Σ_v Ω_v`, equal to `2πχ` by the discrete Gauss–Bonnet theorem.
    pub fn total_curvature(&self) -> f64 {
        self.integrated_curvature.iter().sum()
    }

    /// Sum of the angle defects along boundary loop `i`.
    pub fn loop_curvature(&self, mesh: &TriMesh, i: usize) -> f64 {
        mesh.loops()[i].iter().map(|&v| self.integrated_curvature[v]).sum()
    }
}
