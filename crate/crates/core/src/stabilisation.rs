//! Pressure-jump stabilisation and the Raviart-Thomas lifting.
//!
//! Both the penalty `s(q, t)` and the lifting `L(v, q)` only see facets in
//! `F_I(M)`, i.e. facets interior to a macro element. Jumps use the facet
//! orientation of [`crate::mesh`], and the RT0 function of a facet has unit
//! flux along the same normal, so `τ_F [[q]] φ_F` does not depend on which
//! way the normal points.

use crate::mesh::{FacetKind, FineMesh};
use crate::params::PowerLawParams;
use crate::quadrature::QuadratureRule;
use crate::spaces::{P0Field, P1VectorField};
use crate::Point;

/// `τ_F = h_F^{α(r)}`.
pub fn tau_f(h_f: f64, params: &PowerLawParams) -> f64 {
    params.tau(h_f)
}

/// Facets that carry stabilisation, i.e. the union of all `F_I(M)`.
pub fn stabilised_facets(mesh: &FineMesh) -> impl Iterator<Item = usize> + '_ {
    mesh.facets()
        .iter()
        .enumerate()
        .filter(|(_, f)| matches!(f.kind, FacetKind::MacroInterior(_)))
        .map(|(i, _)| i)
}

/// `s(q, t) = Σ_M Σ_{F∈F_I(M)} τ_F ([[q]], [[t]])_F`.
pub fn stab_form(mesh: &FineMesh, q: &P0Field, t: &P0Field, params: &PowerLawParams) -> f64 {
    stabilised_facets(mesh)
        .map(|f| {
            let facet = &mesh.facets()[f];
            let tau = params.tau(facet.length);
            tau * facet.length * facet.jump(&q.values) * facet.jump(&t.values)
        })
        .sum()
}

/// Value of the RT0 basis function of facet `f` at `x`, seen from element `k`.
///
/// `φ_F|_K = ±|F|/(2|K|) (x - x_F)` with `x_F` the vertex of `K` opposite `F`,
/// positive on the element the normal points out of; zero off `ω_F`.
pub fn rt0_value(mesh: &FineMesh, f: usize, k: usize, x: Point) -> Point {
    let facet = &mesh.facets()[f];
    let Some(local) = mesh.element_facets(k).iter().position(|&g| g == f) else {
        return [0.0; 2];
    };
    let x_f = mesh.nodes[mesh.elements[k][local]];
    let c = facet.orientation(k) * facet.length / (2.0 * mesh.area(k));
    [c * (x[0] - x_f[0]), c * (x[1] - x_f[1])]
}

/// Constant divergence `±|F|/|K|` of `φ_F` on element `k`.
pub fn rt0_divergence(mesh: &FineMesh, f: usize, k: usize) -> f64 {
    let facet = &mesh.facets()[f];
    if !mesh.element_facets(k).contains(&f) {
        return 0.0;
    }
    facet.orientation(k) * facet.length / mesh.area(k)
}

/// `L(v, q) = v + Σ_F τ_F [[q]] φ_F`, kept as a P1 part plus per-facet
/// RT0 coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    pub p1_part: P1VectorField,
    /// `τ_F [[q]]_F` on facets interior to a macro element, zero elsewhere.
    pub rt_coeffs: Vec<f64>,
}

impl LiftedField {
    /// Evaluates the field on element `k` at barycentric coordinates `bary`.
    pub fn evaluate(&self, mesh: &FineMesh, k: usize, bary: [f64; 3]) -> Point {
        let mut out = self.p1_part.evaluate(mesh, k, bary);
        let x = mesh.map_point(k, bary);
        for f in mesh.element_facets(k) {
            let c = self.rt_coeffs[f];
            if c != 0.0 {
                let phi = rt0_value(mesh, f, k, x);
                out[0] += c * phi[0];
                out[1] += c * phi[1];
            }
        }
        out
    }

    /// `u_nc = L - v`, the RT0 part alone.
    pub fn correction(&self) -> &[f64] {
        &self.rt_coeffs
    }

    /// `‖L‖_{0,s,Ω}` with the given element rule.
    pub fn lp_norm(&self, mesh: &FineMesh, s: f64, rule: &QuadratureRule) -> f64 {
        (0..mesh.n_elements())
            .map(|k| {
                mesh.area(k)
                    * rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(b, w)| {
                            let v = self.evaluate(mesh, k, *b);
                            w * (v[0] * v[0] + v[1] * v[1]).sqrt().powf(s)
                        })
                        .sum::<f64>()
            })
            .sum::<f64>()
            .powf(1.0 / s)
    }
}

pub fn lift(
    mesh: &FineMesh,
    v: &P1VectorField,
    q: &P0Field,
    params: &PowerLawParams,
) -> LiftedField {
    let mut rt_coeffs = vec![0.0; mesh.facets().len()];
    for f in stabilised_facets(mesh) {
        let facet = &mesh.facets()[f];
        rt_coeffs[f] = params.tau(facet.length) * facet.jump(&q.values);
    }
    LiftedField {
        p1_part: v.clone(),
        rt_coeffs,
    }
}

/// Element-wise (constant) divergence of a lifted field.
pub fn lifted_divergence(mesh: &FineMesh, lifted: &LiftedField) -> P0Field {
    let values = (0..mesh.n_elements())
        .map(|k| {
            let rt: f64 = mesh
                .element_facets(k)
                .iter()
                .map(|&f| lifted.rt_coeffs[f] * rt0_divergence(mesh, f, k))
                .sum();
            lifted.p1_part.divergence(mesh, k) + rt
        })
        .collect();
    P0Field::from_values(values)
}

/// Norms entering the continuity estimate of the lifting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftStability {
    /// `‖L‖_{0,2r̃,Ω}`.
    pub lifted_norm: f64,
    /// `|v|_{1,r,Ω}`.
    pub velocity_seminorm: f64,
    /// `s(q, q)^{1/2}`.
    pub stab_sqrt: f64,
}

impl LiftStability {
    /// `‖L‖ / (|v|_{1,r} + s(q,q)^{1/2})`, zero for zero inputs.
    pub fn ratio(&self) -> f64 {
        let den = self.velocity_seminorm + self.stab_sqrt;
        if den == 0.0 {
            0.0
        } else {
            self.lifted_norm / den
        }
    }
}

pub fn lift_stability_report(
    mesh: &FineMesh,
    lifted: &LiftedField,
    params: &PowerLawParams,
) -> LiftStability {
    // s(q, q) = Σ τ_F h_F [[q]]² = Σ h_F c_F² / τ_F with c_F = τ_F [[q]]
    let stab: f64 = stabilised_facets(mesh)
        .map(|f| {
            let h = mesh.facets()[f].length;
            let c = lifted.rt_coeffs[f];
            h * c * c / params.tau(h)
        })
        .sum();
    LiftStability {
        lifted_norm: lifted.lp_norm(mesh, 2.0 * params.r_tilde, &QuadratureRule::accurate()),
        velocity_seminorm: lifted.p1_part.seminorm(mesh, params.r),
        stab_sqrt: stab.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{red_refine, MacroMesh};
    use crate::quadrature::LineRule;
    use crate::spaces::prolong_coarse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh(n: usize) -> FineMesh {
        red_refine(&MacroMesh::unit_square(n).unwrap()).unwrap()
    }

    fn random_p0(m: &FineMesh, seed: u64) -> P0Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        P0Field::from_values(
            (0..m.n_elements())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        )
    }

    /// Flux of `φ_F` through facet `g`, integrated from element `k`.
    fn flux(m: &FineMesh, f: usize, g: usize, k: usize) -> Vec<f64> {
        let facet = &m.facets()[g];
        let rule = LineRule::gauss(2);
        let [a, b] = facet.nodes.map(|i| m.nodes[i]);
        rule.points
            .iter()
            .map(|&t| {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let phi = rt0_value(m, f, k, x);
                phi[0] * facet.normal[0] + phi[1] * facet.normal[1]
            })
            .collect()
    }

    #[test]
    fn rt0_normal_traces_are_kronecker() {
        let m = mesh(2);
        for f in 0..m.facets().len() {
            let facet = &m.facets()[f];
            for k in std::iter::once(facet.plus).chain(facet.minus) {
                for g in m.element_facets(k) {
                    let expected = if g == f { 1.0 } else { 0.0 };
                    for v in flux(&m, f, g, k) {
                        assert!((v - expected).abs() < 1e-13, "f={f} g={g} k={k} v={v}");
                    }
                }
            }
            // zero outside the patch
            let outside = (0..m.n_elements())
                .find(|&k| !m.element_facets(k).contains(&f))
                .unwrap();
            assert_eq!(rt0_value(&m, f, outside, m.centroid(outside)), [0.0, 0.0]);
        }
    }

    #[test]
    fn rt0_divergence_matches_analytic() {
        let m = mesh(1);
        for f in 0..m.facets().len() {
            let facet = &m.facets()[f];
            let k = facet.plus;
            // div(c (x - x_F)) = 2c with c = |F|/(2|K|)
            let c = facet.length / (2.0 * m.area(k));
            assert!((rt0_divergence(&m, f, k) - 2.0 * c).abs() < 1e-14);
            if let Some(km) = facet.minus {
                assert!((rt0_divergence(&m, f, km) + facet.length / m.area(km)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stab_form_vanishes_on_macro_constants() {
        let m = mesh(2);
        let p = PowerLawParams::new(1.5, 2).unwrap();
        let coarse = prolong_coarse(
            &m,
            &P0Field::from_values((0..8).map(|i| (i * i) as f64).collect()),
        );
        for seed in 0..5 {
            let t = random_p0(&m, seed);
            assert_eq!(stab_form(&m, &coarse, &t, &p), 0.0);
            assert_eq!(stab_form(&m, &t, &coarse, &p), 0.0);
        }
    }

    #[test]
    fn stab_form_is_symmetric_and_semidefinite() {
        let m = mesh(3);
        let p = PowerLawParams::new(2.5, 2).unwrap();
        let (q, t) = (random_p0(&m, 1), random_p0(&m, 2));
        assert!((stab_form(&m, &q, &t, &p) - stab_form(&m, &t, &q, &p)).abs() < 1e-15);
        assert!(stab_form(&m, &q, &q, &p) > 0.0);
    }

    #[test]
    fn stab_form_single_macro_checkerboard() {
        // one right triangle with legs 2ℓ: interior facets ℓ, ℓ, √2ℓ
        let l = 0.25;
        let macro_mesh = MacroMesh::new(
            vec![[0.0, 0.0], [2.0 * l, 0.0], [0.0, 2.0 * l]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let m = red_refine(&macro_mesh).unwrap();
        let p = PowerLawParams::new(2.0, 2).unwrap();
        let q = P0Field::from_values(vec![1.0, 1.0, 1.0, -1.0]);
        let s = stab_form(&m, &q, &q, &p);
        let h = [l, l, 2f64.sqrt() * l];
        let expected: f64 = h.iter().map(|hf| hf * hf * 4.0).sum();
        assert!((s - expected).abs() < 1e-15);

        // equilateral macro: all three interior facets have length ℓ, s = 12ℓ²
        let macro_mesh = MacroMesh::new(
            vec![[0.0, 0.0], [2.0 * l, 0.0], [l, 3f64.sqrt() * l]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let m = red_refine(&macro_mesh).unwrap();
        let s = stab_form(&m, &q, &q, &p);
        assert!((s - 12.0 * l * l).abs() < 1e-14);
    }

    #[test]
    fn lift_of_macro_constant_pressure_is_identity() {
        let m = mesh(2);
        let p = PowerLawParams::new(1.5, 2).unwrap();
        let v = P1VectorField::interpolate(&m, |x| [x[1] * (1.0 - x[1]), 0.0], true);
        let q = prolong_coarse(
            &m,
            &P0Field::from_values((0..8).map(|i| i as f64).collect()),
        );
        let l = lift(&m, &v, &q, &p);
        assert!(l.rt_coeffs.iter().all(|&c| c == 0.0));
        assert_eq!(l.p1_part, v);
        assert!(
            lifted_divergence(&m, &lift(&m, &P1VectorField::zeros(&m), &q, &p)).max_abs() == 0.0
        );
    }

    #[test]
    fn lift_flux_through_single_jump() {
        let m = mesh(2);
        let p = PowerLawParams::new(2.0, 2).unwrap();
        let f = m.macro_interior_facets(5)[1];
        let facet = m.facets()[f].clone();
        let mut q = P0Field::zeros(m.n_elements());
        q.values[facet.plus] = 0.75;
        let l = lift(&m, &P1VectorField::zeros(&m), &q, &p);
        let rule = LineRule::gauss(2);
        let [a, b] = facet.nodes.map(|i| m.nodes[i]);
        let flux = rule.integrate_segment(a, b, |x| {
            let v = l.evaluate(&m, facet.plus, m.barycentric(facet.plus, x));
            v[0] * facet.normal[0] + v[1] * facet.normal[1]
        });
        assert!((flux - p.tau(facet.length) * 0.75 * facet.length).abs() < 1e-15);
    }

    #[test]
    fn lift_has_zero_normal_trace_on_boundary() {
        let m = mesh(2);
        let p = PowerLawParams::new(1.5, 2).unwrap();
        let v = P1VectorField::interpolate(&m, |x| [x[0].sin(), x[1].cos()], true);
        let l = lift(&m, &v, &random_p0(&m, 9), &p);
        for facet in m.facets().iter().filter(|f| f.is_boundary()) {
            let [a, b] = facet.nodes.map(|i| m.nodes[i]);
            for t in [0.2, 0.5, 0.9] {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let val = l.evaluate(&m, facet.plus, m.barycentric(facet.plus, x));
                assert!((val[0] * facet.normal[0] + val[1] * facet.normal[1]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lift_is_orientation_covariant() {
        let mut m = mesh(2);
        let p = PowerLawParams::new(1.2, 2).unwrap();
        let v = P1VectorField::interpolate(&m, |x| [x[0] * x[1], -x[0]], true);
        let q = random_p0(&m, 4);
        let before = lift(&m, &v, &q, &p);
        let s_before = stab_form(&m, &q, &q, &p);
        let probe: Vec<Point> = (0..m.n_elements())
            .map(|k| before.evaluate(&m, k, [0.1, 0.3, 0.6]))
            .collect();
        for f in stabilised_facets(&m.clone()).collect::<Vec<_>>() {
            m.flip_normal(f).unwrap();
        }
        let after = lift(&m, &v, &q, &p);
        for k in 0..m.n_elements() {
            let a = after.evaluate(&m, k, [0.1, 0.3, 0.6]);
            assert!((a[0] - probe[k][0]).abs() < 1e-15 && (a[1] - probe[k][1]).abs() < 1e-15);
        }
        assert!((stab_form(&m, &q, &q, &p) - s_before).abs() < 1e-15);
    }

    #[test]
    fn stability_report_examples() {
        let m = mesh(2);
        let p = PowerLawParams::new(1.5, 2).unwrap();
        let zero = lift(
            &m,
            &P1VectorField::zeros(&m),
            &P0Field::zeros(m.n_elements()),
            &p,
        );
        let rep = lift_stability_report(&m, &zero, &p);
        assert_eq!(
            (rep.lifted_norm, rep.velocity_seminorm, rep.stab_sqrt),
            (0.0, 0.0, 0.0)
        );

        let v = P1VectorField::interpolate(&m, |x| [x[1] * (1.0 - x[1]), 0.0], true);
        let q = prolong_coarse(&m, &P0Field::from_values(vec![1.0; 8]));
        let rep = lift_stability_report(&m, &lift(&m, &v, &q, &p), &p);
        let direct = LiftedField {
            p1_part: v.clone(),
            rt_coeffs: vec![0.0; m.facets().len()],
        }
        .lp_norm(&m, 2.0 * p.r_tilde, &QuadratureRule::accurate());
        assert_eq!(rep.lifted_norm, direct);
        assert_eq!(rep.stab_sqrt, 0.0);

        let q = random_p0(&m, 2);
        let rep = lift_stability_report(&m, &lift(&m, &v, &q, &p), &p);
        assert!((rep.stab_sqrt.powi(2) - stab_form(&m, &q, &q, &p)).abs() < 1e-13);
    }
}
