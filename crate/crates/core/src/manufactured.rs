//! Closed-form solutions on the unit square and their forcing.

use crate::error::{FemError, Result};
use crate::mesh::FineMesh;
use crate::params::PowerLawParams;
use crate::quadrature::QuadratureRule;
use crate::spaces::Gradient;
use crate::Point;

use std::f64::consts::PI;

/// Exact velocity and pressure with everything needed to build `f`.
///
/// The velocity vanishes on the boundary and is solenoidal, the pressure has
/// zero mean.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub velocity: fn(Point) -> Point,
    /// `g[i][j] = ∂_j u_i`.
    pub gradient: fn(Point) -> Gradient,
    pub pressure: fn(Point) -> f64,
    pub pressure_gradient: fn(Point) -> Point,
}

// ψ = X(x) X(y) with X(t) = t²(1-t)²
fn x0(t: f64) -> f64 {
    (t * (1.0 - t)).powi(2)
}
fn x1(t: f64) -> f64 {
    2.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
}
fn x2(t: f64) -> f64 {
    2.0 * (1.0 - 6.0 * t + 6.0 * t * t)
}

fn m1_velocity(p: Point) -> Point {
    let [x, y] = p;
    [x0(x) * x1(y), -x1(x) * x0(y)]
}

fn m1_gradient(p: Point) -> Gradient {
    let [x, y] = p;
    [
        [x1(x) * x1(y), x0(x) * x2(y)],
        [-x2(x) * x0(y), -x1(x) * x1(y)],
    ]
}

fn sine_pressure(p: Point) -> f64 {
    (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin()
}

fn sine_pressure_gradient(p: Point) -> Point {
    let (sx, cx) = (2.0 * PI * p[0]).sin_cos();
    let (sy, cy) = (2.0 * PI * p[1]).sin_cos();
    [2.0 * PI * cx * sy, 2.0 * PI * sx * cy]
}

fn zero_velocity(_: Point) -> Point {
    [0.0, 0.0]
}

fn zero_gradient(_: Point) -> Gradient {
    [[0.0; 2]; 2]
}

/// `u = curl ψ`, `ψ = x²(1-x)² y²(1-y)²`, `p = sin 2πx sin 2πy`.
pub fn case_m1() -> ManufacturedCase {
    ManufacturedCase {
        name: "M1",
        velocity: m1_velocity,
        gradient: m1_gradient,
        pressure: sine_pressure,
        pressure_gradient: sine_pressure_gradient,
    }
}

/// `u = 0` with the pressure of [`case_m1`], so that `f = ∇p`.
pub fn case_pressure_only() -> ManufacturedCase {
    ManufacturedCase {
        name: "pressure-only",
        velocity: zero_velocity,
        gradient: zero_gradient,
        pressure: sine_pressure,
        pressure_gradient: sine_pressure_gradient,
    }
}

impl ManufacturedCase {
    /// Looks a case up by its configuration name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "M1" | "m1" => Ok(case_m1()),
            "pressure-only" | "P0" => Ok(case_pressure_only()),
            other => Err(FemError::Config(format!(
                "unknown case '{other}' (expected M1 or pressure-only)"
            ))),
        }
    }

    /// Regularised flux `G = (|∇u|² + ε²)^{(r-2)/2} ∇u`, the same law the
    /// discrete problem uses.
    pub fn flux(&self, x: Point, params: &PowerLawParams) -> Gradient {
        let g = (self.gradient)(x);
        let nu = params.viscosity(crate::spaces::frobenius(&g));
        [[nu * g[0][0], nu * g[0][1]], [nu * g[1][0], nu * g[1][1]]]
    }

    /// `div G` by Richardson-extrapolated central differences with step `delta`.
    pub fn flux_divergence(&self, x: Point, params: &PowerLawParams, delta: f64) -> Point {
        let central = |h: f64| -> Point {
            let gxp = self.flux([x[0] + h, x[1]], params);
            let gxm = self.flux([x[0] - h, x[1]], params);
            let gyp = self.flux([x[0], x[1] + h], params);
            let gym = self.flux([x[0], x[1] - h], params);
            let mut out = [0.0; 2];
            for (i, o) in out.iter_mut().enumerate() {
                *o = (gxp[i][0] - gxm[i][0] + gyp[i][1] - gym[i][1]) / (2.0 * h);
            }
            out
        };
        let coarse = central(delta);
        let fine = central(0.5 * delta);
        [
            (4.0 * fine[0] - coarse[0]) / 3.0,
            (4.0 * fine[1] - coarse[1]) / 3.0,
        ]
    }

    /// `f = -div G + (u·∇)u + ∇p` with the step from `params`.
    pub fn forcing(&self, x: Point, params: &PowerLawParams) -> Point {
        self.forcing_with_step(x, params, params.fd_step)
    }

    pub fn forcing_with_step(&self, x: Point, params: &PowerLawParams, delta: f64) -> Point {
        let u = (self.velocity)(x);
        let g = (self.gradient)(x);
        let gp = (self.pressure_gradient)(x);
        // div(u ⊗ u) = (u·∇)u for solenoidal u
        let conv = [
            g[0][0] * u[0] + g[0][1] * u[1],
            g[1][0] * u[0] + g[1][1] * u[1],
        ];
        let div_flux = if g.iter().flatten().all(|&v| v == 0.0) {
            [0.0, 0.0]
        } else {
            self.flux_divergence(x, params, delta)
        };
        [
            -div_flux[0] + conv[0] + gp[0],
            -div_flux[1] + conv[1] + gp[1],
        ]
    }

    /// Largest nodal residual of the weak form evaluated at the exact
    /// solution, tested against every interior P1 hat function.
    pub fn weak_consistency(&self, mesh: &FineMesh, params: &PowerLawParams) -> f64 {
        let rule = QuadratureRule::accurate();
        let mut res = vec![[0.0; 2]; mesh.n_nodes()];
        for (k, tri) in mesh.elements.iter().enumerate() {
            let grads = mesh.barycentric_gradients(k);
            let area = mesh.area(k);
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let x = mesh.map_point(k, *bary);
                let flux = self.flux(x, params);
                let u = (self.velocity)(x);
                let p = (self.pressure)(x);
                let f = self.forcing(x, params);
                for a in 0..3 {
                    for c in 0..2 {
                        let dphi = grads[a];
                        let term = flux[c][0] * dphi[0] + flux[c][1] * dphi[1]
                            - u[c] * (u[0] * dphi[0] + u[1] * dphi[1])
                            - p * dphi[c]
                            - f[c] * bary[a];
                        res[tri[a]][c] += area * w * term;
                    }
                }
            }
        }
        res.iter()
            .zip(&mesh.boundary_node)
            .filter(|(_, &b)| !b)
            .map(|(r, _)| r[0].abs().max(r[1].abs()))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{red_refine, MacroMesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn x3(t: f64) -> f64 {
        12.0 * (2.0 * t - 1.0)
    }

    fn interior_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| [rng.gen_range(0.01..0.99), rng.gen_range(0.01..0.99)])
            .collect()
    }

    #[test]
    fn m1_centre_and_boundary() {
        let c = case_m1();
        assert_eq!((c.velocity)([0.5, 0.5]), [0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let t: f64 = rng.gen();
            for x in [[t, 0.0], [t, 1.0], [0.0, t], [1.0, t]] {
                let u = (c.velocity)(x);
                assert!(u[0].abs() <= 1e-14 && u[1].abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn m1_is_solenoidal() {
        let c = case_m1();
        for x in interior_points(1000, 2) {
            let g = (c.gradient)(x);
            assert!((g[0][0] + g[1][1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn m1_gradient_matches_finite_differences() {
        let c = case_m1();
        let h = 1e-6;
        for x in interior_points(50, 3) {
            let g = (c.gradient)(x);
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let (up, um) = ((c.velocity)(xp), (c.velocity)(xm));
                for i in 0..2 {
                    assert!((g[i][j] - (up[i] - um[i]) / (2.0 * h)).abs() < 1e-8);
                }
            }
            let gp = (c.pressure_gradient)(x);
            let dpx = ((c.pressure)([x[0] + h, x[1]]) - (c.pressure)([x[0] - h, x[1]])) / (2.0 * h);
            assert!((gp[0] - dpx).abs() < 1e-7);
        }
    }

    #[test]
    fn pressure_has_zero_mean() {
        let m = red_refine(&MacroMesh::unit_square(4).unwrap()).unwrap();
        let rule = QuadratureRule::accurate();
        let c = case_m1();
        let mean: f64 = (0..m.n_elements())
            .map(|k| {
                m.area(k)
                    * rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(b, w)| w * (c.pressure)(m.map_point(k, *b)))
                        .sum::<f64>()
            })
            .sum();
        assert!(mean.abs() <= 1e-10);
    }

    #[test]
    fn newtonian_forcing_matches_analytic_laplacian() {
        let c = case_m1();
        let params = PowerLawParams::new(2.0, 2).unwrap();
        for x in interior_points(100, 4) {
            let f = c.forcing(x, &params);
            let [xx, yy] = x;
            let lap = [
                x2(xx) * x1(yy) + x0(xx) * x3(yy),
                -x3(xx) * x0(yy) - x1(xx) * x2(yy),
            ];
            let u = (c.velocity)(x);
            let g = (c.gradient)(x);
            let gp = (c.pressure_gradient)(x);
            for i in 0..2 {
                let conv = g[i][0] * u[0] + g[i][1] * u[1];
                let exact = -lap[i] + conv + gp[i];
                assert!((f[i] - exact).abs() <= 1e-8, "{} vs {}", f[i], exact);
            }
        }
    }

    #[test]
    fn pressure_only_forcing_is_the_pressure_gradient() {
        let c = case_pressure_only();
        for r in [1.5, 2.0, 3.0] {
            let params = PowerLawParams::new(r, 2).unwrap();
            for x in interior_points(20, 5) {
                assert_eq!(c.forcing(x, &params), (c.pressure_gradient)(x));
            }
        }
    }

    #[test]
    fn halving_the_step_barely_changes_the_forcing() {
        let c = case_m1();
        for r in [1.5, 2.0, 2.5, 3.0] {
            let params = PowerLawParams::new(r, 2).unwrap();
            for x in interior_points(100, 6) {
                let a = c.forcing_with_step(x, &params, 1e-5);
                let b = c.forcing_with_step(x, &params, 5e-6);
                let scale = a[0].abs().max(a[1].abs());
                let diff = (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
                assert!(diff <= 1e-7 * scale, "r={r} x={x:?}: {diff:e} vs {scale:e}");
            }
        }
    }

    #[test]
    fn weak_residual_of_exact_solution_decreases() {
        let c = case_m1();
        for r in [1.5, 2.0, 3.0] {
            let params = PowerLawParams::new(r, 2).unwrap();
            let values: Vec<f64> = [2, 4, 8]
                .iter()
                .map(|&n| {
                    c.weak_consistency(
                        &red_refine(&MacroMesh::unit_square(n).unwrap()).unwrap(),
                        &params,
                    )
                })
                .collect();
            assert!(
                values[2] < values[1] && values[1] < values[0],
                "r={r}: {values:?}"
            );
        }
    }

    #[test]
    fn unknown_case_is_rejected() {
        assert!(ManufacturedCase::by_name("M1").is_ok());
        assert!(ManufacturedCase::by_name("nope").is_err());
    }
}
