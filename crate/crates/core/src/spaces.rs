//! Discrete fields, projections, interpolation and the Fortin operator.

use crate::error::{FemError, Result};
use crate::mesh::FineMesh;
use crate::quadrature::{LineRule, QuadratureRule};
use crate::Point;

/// Velocity gradient, `g[i][j] = ∂_j u_i`.
pub type Gradient = [[f64; 2]; 2];

pub fn frobenius(g: &Gradient) -> f64 {
    (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]).sqrt()
}

/// Continuous piecewise linear vector field given by nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct P1VectorField {
    pub values: Vec<[f64; 2]>,
    /// Whether homogeneous Dirichlet values are enforced on boundary nodes.
    pub dirichlet: bool,
}

impl P1VectorField {
    pub fn zeros(mesh: &FineMesh) -> Self {
        P1VectorField {
            values: vec![[0.0; 2]; mesh.n_nodes()],
            dirichlet: true,
        }
    }

    /// Nodal interpolant of `f`; boundary nodes are zeroed when `dirichlet`.
    pub fn interpolate(mesh: &FineMesh, f: impl Fn(Point) -> Point, dirichlet: bool) -> Self {
        let values = mesh
            .nodes
            .iter()
            .zip(&mesh.boundary_node)
            .map(|(&p, &b)| if dirichlet && b { [0.0; 2] } else { f(p) })
            .collect();
        P1VectorField { values, dirichlet }
    }

    pub fn apply_dirichlet(&mut self, mesh: &FineMesh) {
        for (v, &b) in self.values.iter_mut().zip(&mesh.boundary_node) {
            if b {
                *v = [0.0; 2];
            }
        }
        self.dirichlet = true;
    }

    pub fn evaluate(&self, mesh: &FineMesh, k: usize, bary: [f64; 3]) -> Point {
        let tri = mesh.elements[k];
        let mut out = [0.0; 2];
        for (a, &lam) in tri.iter().zip(&bary) {
            out[0] += lam * self.values[*a][0];
            out[1] += lam * self.values[*a][1];
        }
        out
    }

    pub fn gradient(&self, mesh: &FineMesh, k: usize) -> Gradient {
        p1_gradient(mesh, k, self)
    }

    pub fn divergence(&self, mesh: &FineMesh, k: usize) -> f64 {
        let g = self.gradient(mesh, k);
        g[0][0] + g[1][1]
    }

    /// `|v|_{1,s,Ω}` with the Frobenius norm of the gradient.
    pub fn seminorm(&self, mesh: &FineMesh, s: f64) -> f64 {
        self.seminorm_pow(mesh, s).powf(1.0 / s)
    }

    /// `|v|_{1,s,Ω}^s`.
    pub fn seminorm_pow(&self, mesh: &FineMesh, s: f64) -> f64 {
        (0..mesh.n_elements())
            .map(|k| mesh.area(k) * frobenius(&self.gradient(mesh, k)).powf(s))
            .sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            v[0] *= factor;
            v[1] *= factor;
        }
    }

    pub fn axpy(&mut self, a: f64, other: &P1VectorField) {
        for (v, w) in self.values.iter_mut().zip(&other.values) {
            v[0] += a * w[0];
            v[1] += a * w[1];
        }
    }
}

/// Exact gradient of the affine restriction of `field` to element `k`.
pub fn p1_gradient(mesh: &FineMesh, k: usize, field: &P1VectorField) -> Gradient {
    let grads = mesh.barycentric_gradients(k);
    let mut g = [[0.0; 2]; 2];
    for (a, gl) in mesh.elements[k].iter().zip(&grads) {
        let u = field.values[*a];
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] += u[i] * gl[j];
            }
        }
    }
    g
}

/// Piecewise constant scalar field, on fine elements or on macro elements.
#[derive(Debug, Clone, PartialEq)]
pub struct P0Field {
    pub values: Vec<f64>,
    pub zero_mean: bool,
}

impl P0Field {
    pub fn zeros(n: usize) -> Self {
        P0Field {
            values: vec![0.0; n],
            zero_mean: true,
        }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        P0Field {
            values,
            zero_mean: false,
        }
    }

    /// Cell averages of `f` on the fine mesh, computed with `rule`.
    pub fn project(mesh: &FineMesh, rule: &QuadratureRule, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..mesh.n_elements())
            .map(|k| {
                rule.points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(b, w)| w * f(mesh.map_point(k, *b)))
                    .sum()
            })
            .collect();
        P0Field::from_values(values)
    }

    /// `∫_Ω q` for a field on the fine mesh.
    pub fn integral(&self, mesh: &FineMesh) -> f64 {
        self.values
            .iter()
            .zip(mesh.areas())
            .map(|(q, a)| q * a)
            .sum()
    }

    /// Subtracts the area-weighted mean and marks the field as zero-mean.
    pub fn remove_mean(&mut self, mesh: &FineMesh) {
        let total: f64 = mesh.areas().iter().sum();
        let mean = self.integral(mesh) / total;
        for q in &mut self.values {
            *q -= mean;
        }
        self.zero_mean = true;
    }

    /// `‖q‖_{0,s,Ω}` on the fine mesh.
    pub fn lp_norm(&self, mesh: &FineMesh, s: f64) -> f64 {
        self.values
            .iter()
            .zip(mesh.areas())
            .map(|(q, a)| a * q.abs().powf(s))
            .sum::<f64>()
            .powf(1.0 / s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `Π_H q`: area-weighted mean of a fine field on every macro element.
pub fn project_pi_big_h(mesh: &FineMesh, q: &P0Field) -> P0Field {
    let values = (0..mesh.macro_mesh.n_elements())
        .map(|m| {
            let (num, den) = mesh.children(m).fold((0.0, 0.0), |(n, d), k| {
                (n + mesh.area(k) * q.values[k], d + mesh.area(k))
            });
            num / den
        })
        .collect();
    P0Field {
        values,
        zero_mean: q.zero_mean,
    }
}

/// Extends a macro-element field to the fine mesh.
pub fn prolong_coarse(mesh: &FineMesh, q_coarse: &P0Field) -> P0Field {
    P0Field {
        values: mesh
            .parent_macro
            .iter()
            .map(|&m| q_coarse.values[m])
            .collect(),
        zero_mean: q_coarse.zero_mean,
    }
}

/// `(χ_M, div v)_Ω` for every macro element `M`.
pub fn coarse_divergence_moments(mesh: &FineMesh, v: &P1VectorField) -> Vec<f64> {
    (0..mesh.macro_mesh.n_elements())
        .map(|m| {
            mesh.children(m)
                .map(|k| mesh.area(k) * v.divergence(mesh, k))
                .sum()
        })
        .collect()
}

/// Outcome of comparing `q - Π_H q` with the jumps inside each macro element.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpBoundReport {
    pub exponent: f64,
    /// `‖q - Π_H q‖_{0,s,M} / (Σ_{F∈F_I(M)} h_F ‖[[q]]‖^s_{0,s,F})^{1/s}`, or
    /// `None` where every interior jump vanishes.
    pub ratios: Vec<Option<f64>>,
    /// Largest finite ratio.
    pub max_ratio: Option<f64>,
    /// Macro elements with no interior jump, where `q` is reproduced exactly.
    pub reproduced: Vec<usize>,
    /// Largest `‖q - Π_H q‖_{0,s,M}` over `reproduced` (zero in exact arithmetic).
    pub reproduced_residual: f64,
}

pub fn jump_seminorm_bound_check(mesh: &FineMesh, q: &P0Field, s: f64) -> JumpBoundReport {
    let coarse = project_pi_big_h(mesh, q);
    let mut ratios = Vec::with_capacity(coarse.values.len());
    let mut reproduced = Vec::new();
    let mut reproduced_residual: f64 = 0.0;
    for (m, qm) in coarse.values.iter().enumerate() {
        let numerator = mesh
            .children(m)
            .map(|k| mesh.area(k) * (q.values[k] - qm).abs().powf(s))
            .sum::<f64>()
            .powf(1.0 / s);
        let denominator = mesh
            .macro_interior_facets(m)
            .iter()
            .map(|&f| {
                let facet = &mesh.facets()[f];
                // h_F ‖[[q]]‖^s_{0,s,F} = h_F · h_F |[[q]]|^s
                facet.length * facet.length * facet.jump(&q.values).abs().powf(s)
            })
            .sum::<f64>()
            .powf(1.0 / s);
        if denominator > 0.0 {
            let ratio = numerator / denominator;
            assert!(ratio.is_finite());
            ratios.push(Some(ratio));
        } else {
            reproduced.push(m);
            reproduced_residual = reproduced_residual.max(numerator);
            ratios.push(None);
        }
    }
    let max_ratio = ratios.iter().flatten().copied().reduce(f64::max);
    JumpBoundReport {
        exponent: s,
        ratios,
        max_ratio,
        reproduced,
        reproduced_residual,
    }
}

/// Quasi-interpolant standing in for Scott-Zhang: nodal interpolation,
/// zero on boundary nodes when `dirichlet`.
pub fn quasi_interpolate(
    mesh: &FineMesh,
    v: impl Fn(Point) -> Point,
    dirichlet: bool,
) -> P1VectorField {
    P1VectorField::interpolate(mesh, v, dirichlet)
}

/// `∫_F̃ (v - S_h v)·n_F̃` over a macro facet, split along its two fine facets.
fn remainder_flux(
    mesh: &FineMesh,
    macro_facet: usize,
    v: &dyn Fn(Point) -> Point,
    s_h: &P1VectorField,
    rule: &LineRule,
) -> f64 {
    let mf = &mesh.macro_facets[macro_facet];
    let n = mf.normal;
    mf.fine_facets
        .iter()
        .map(|&f| {
            let [a, b] = mesh.facets()[f].nodes;
            let (pa, pb) = (mesh.nodes[a], mesh.nodes[b]);
            let (sa, sb) = (s_h.values[a], s_h.values[b]);
            let len = mesh.facets()[f].length;
            len * rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(&t, &w)| {
                    let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                    let vx = v(x);
                    let sx = [sa[0] + t * (sb[0] - sa[0]), sa[1] + t * (sb[1] - sa[1])];
                    w * ((vx[0] - sx[0]) * n[0] + (vx[1] - sx[1]) * n[1])
                })
                .sum::<f64>()
        })
        .sum()
}

fn check_facet_node(mesh: &FineMesh, macro_facet: usize) -> Result<usize> {
    let mf = &mesh.macro_facets[macro_facet];
    let node = mf.midpoint;
    let [a, b] = mf.nodes.map(|i| mesh.nodes[i]);
    let p = mesh.nodes[node];
    let t = [b[0] - a[0], b[1] - a[1]];
    let s = ((p[0] - a[0]) * t[0] + (p[1] - a[1]) * t[1]) / (t[0] * t[0] + t[1] * t[1]);
    if node == mf.nodes[0] || node == mf.nodes[1] || !(s > 0.0 && s < 1.0) {
        return Err(FemError::MissingFacetNode { facet: macro_facet });
    }
    Ok(node)
}

/// Adds the facet correction of one interior macro facet to `out`.
fn add_facet_correction(
    mesh: &FineMesh,
    macro_facet: usize,
    v: &dyn Fn(Point) -> Point,
    s_h: &P1VectorField,
    rule: &LineRule,
    out: &mut P1VectorField,
) -> Result<()> {
    let node = check_facet_node(mesh, macro_facet)?;
    let mf = &mesh.macro_facets[macro_facet];
    // (1, b)_F̃ for the hat at the midpoint: a tent over the whole edge
    let hat_mass = 0.5 * mf.length;
    let coeff = remainder_flux(mesh, macro_facet, v, s_h, rule) / hat_mass;
    out.values[node][0] += coeff * mf.normal[0];
    out.values[node][1] += coeff * mf.normal[1];
    Ok(())
}

/// `ρ_M(v)`: for every interior macro facet of `M`, the hat at the facet
/// midpoint times `n_F̃`, scaled so its flux through the facet equals that
/// of `v`.
pub fn fortin_rho_m(
    mesh: &FineMesh,
    v: &dyn Fn(Point) -> Point,
    m: usize,
    rule: &LineRule,
) -> Result<P1VectorField> {
    let zero = P1VectorField::zeros(mesh);
    let mut out = P1VectorField::zeros(mesh);
    for (i, mf) in mesh.macro_facets.iter().enumerate() {
        if mf.is_boundary() || !mf.macros.contains(&m) {
            continue;
        }
        add_facet_correction(mesh, i, v, &zero, rule, &mut out)?;
    }
    Ok(out)
}

/// Fortin operator `I(v) = S_h v + Σ_F̃ c_F̃ b_F̃ n_F̃`, the facet corrections
/// taken from `v - S_h v`.
///
/// Each interior macro facet receives its correction once. `Σ_M ρ_M` visits
/// every such facet from both neighbouring macro elements, so the operator
/// equals `S_h v + ½ Σ_M ρ_M(v - S_h v)`.
pub fn fortin_interpolate(
    mesh: &FineMesh,
    v: &dyn Fn(Point) -> Point,
    rule: &LineRule,
) -> Result<P1VectorField> {
    let s_h = quasi_interpolate(mesh, v, true);
    let mut out = s_h.clone();
    for (i, mf) in mesh.macro_facets.iter().enumerate() {
        if mf.is_boundary() {
            continue;
        }
        add_facet_correction(mesh, i, v, &s_h, rule, &mut out)?;
    }
    Ok(out)
}

/// `(div v, χ_M)_Ω` for every macro element by element quadrature of an
/// analytic divergence.
pub fn coarse_divergence_moments_exact(
    mesh: &FineMesh,
    div_v: impl Fn(Point) -> f64,
    rule: &QuadratureRule,
) -> Vec<f64> {
    (0..mesh.macro_mesh.n_elements())
        .map(|m| {
            mesh.children(m)
                .map(|k| {
                    mesh.area(k)
                        * rule
                            .points
                            .iter()
                            .zip(&rule.weights)
                            .map(|(b, w)| w * div_v(mesh.map_point(k, *b)))
                            .sum::<f64>()
                })
                .sum()
        })
        .collect()
}
