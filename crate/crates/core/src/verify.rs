//! Invariant checks and refinement studies.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{assemble_rhs, DofMap};
use crate::error::Result;
use crate::manufactured::ManufacturedCase;
use crate::mesh::{red_refine, FineMesh, MacroMesh};
use crate::params::PowerLawParams;
use crate::quadrature::{LineRule, QuadratureRule};
use crate::solver::{apriori_quantities, picard_solve, AprioriReport, SolutionState, SolverConfig};
use crate::spaces::{
    coarse_divergence_moments, fortin_interpolate, project_pi_big_h, Gradient, P0Field,
};
use crate::stabilisation::{lift, lifted_divergence, rt0_value, stab_form};
use crate::Point;

/// Fine mesh of refinement level `level` built on an `n0 · 2^level` macro grid.
pub fn level_mesh(n0: usize, level: usize) -> Result<FineMesh> {
    red_refine(&MacroMesh::unit_square(n0 << level)?)
}

/// Integral over the mesh of `f(k, bary, x)` with the given element rule.
fn integrate(
    mesh: &FineMesh,
    rule: &QuadratureRule,
    f: impl Fn(usize, [f64; 3], Point) -> f64,
) -> f64 {
    (0..mesh.n_elements())
        .map(|k| {
            mesh.area(k)
                * rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(b, w)| w * f(k, *b, mesh.map_point(k, *b)))
                    .sum::<f64>()
        })
        .sum()
}

/// Errors of a discrete solution against a manufactured one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// `|u - u_h|_{1,r}`.
    pub velocity_w1r: f64,
    /// `‖u - u_h‖_{0,2r̃}`.
    pub velocity_l2rt: f64,
    /// `‖p - p_h‖_{0,r̃}`.
    pub pressure_lrt: f64,
}

impl ErrorNorms {
    pub fn as_array(&self) -> [f64; 3] {
        [self.velocity_w1r, self.velocity_l2rt, self.pressure_lrt]
    }
}

pub fn error_norms(
    mesh: &FineMesh,
    case: &ManufacturedCase,
    state: &SolutionState,
    params: &PowerLawParams,
) -> ErrorNorms {
    let rule = QuadratureRule::accurate();
    let r = params.r;
    let grads: Vec<Gradient> = (0..mesh.n_elements())
        .map(|k| state.u.gradient(mesh, k))
        .collect();
    let w1r = integrate(mesh, &rule, |k, _, x| {
        let g = (case.gradient)(x);
        let gh = grads[k];
        let diff = [
            [g[0][0] - gh[0][0], g[0][1] - gh[0][1]],
            [g[1][0] - gh[1][0], g[1][1] - gh[1][1]],
        ];
        crate::spaces::frobenius(&diff).powf(r)
    })
    .powf(1.0 / r);
    let s = 2.0 * params.r_tilde;
    let l2rt = integrate(mesh, &rule, |k, b, x| {
        let u = (case.velocity)(x);
        let uh = state.u.evaluate(mesh, k, b);
        ((u[0] - uh[0]).powi(2) + (u[1] - uh[1]).powi(2))
            .sqrt()
            .powf(s)
    })
    .powf(1.0 / s);
    let t = params.r_tilde;
    let prt = integrate(mesh, &rule, |k, _, x| {
        ((case.pressure)(x) - state.p.values[k]).abs().powf(t)
    })
    .powf(1.0 / t);
    ErrorNorms {
        velocity_w1r: w1r,
        velocity_l2rt: l2rt,
        pressure_lrt: prt,
    }
}

/// `(L(u_h, p_h) ⊗ u_h, ∇u_h)_Ω`; the integrand is quadratic per element.
pub fn skew_term(mesh: &FineMesh, state: &SolutionState, params: &PowerLawParams) -> f64 {
    let lifted = lift(mesh, &state.u, &state.p, params);
    integrate(mesh, &QuadratureRule::forms(), |k, b, _| {
        let l = lifted.evaluate(mesh, k, b);
        let u = state.u.evaluate(mesh, k, b);
        let g = state.u.gradient(mesh, k);
        (0..2)
            .map(|i| u[i] * (g[i][0] * l[0] + g[i][1] * l[1]))
            .sum::<f64>()
    })
}

/// `|v|²_{1,2}` of a discrete velocity.
fn h1_seminorm_sq(mesh: &FineMesh, state: &SolutionState) -> f64 {
    state.u.seminorm_pow(mesh, 2.0)
}

/// Quantities measured on one converged level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelData {
    pub errors: Option<ErrorNorms>,
    pub s_php: f64,
    /// `max_K |div L(u_h, p_h)|`.
    pub max_div_l: f64,
    /// `max_M |(χ_M, div u_h)|`.
    pub coarse_orthogonality: f64,
    /// `(L ⊗ u_h, ∇u_h)`.
    pub skew: f64,
    pub velocity_w1r: f64,
    pub velocity_h1_sq: f64,
    /// `|u_h|^r_{1,r} + s(p_h, p_h)`.
    pub energy: f64,
    /// `⟨f, u_h⟩`.
    pub work: f64,
    pub apriori: AprioriReport,
    pub iterations: usize,
    pub final_residual: f64,
}

/// One level of a study: either its measurements or the solver failure.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    pub n: usize,
    pub h: f64,
    pub outcome: std::result::Result<LevelData, String>,
}

/// Measures every per-level quantity of a converged state.
pub fn measure_level(
    mesh: &FineMesh,
    state: &SolutionState,
    params: &PowerLawParams,
    f: &dyn Fn(Point) -> Point,
    case: Option<&ManufacturedCase>,
) -> Result<LevelData> {
    let lifted = lift(mesh, &state.u, &state.p, params);
    let dofs = DofMap::new(mesh);
    let rhs = assemble_rhs(mesh, &dofs, f)?;
    let work: f64 = dofs
        .gather(&state.u)
        .iter()
        .zip(&rhs)
        .map(|(a, b)| a * b)
        .sum();
    let s_php = stab_form(mesh, &state.p, &state.p, params);
    Ok(LevelData {
        errors: case.map(|c| error_norms(mesh, c, state, params)),
        s_php,
        max_div_l: lifted_divergence(mesh, &lifted).max_abs(),
        coarse_orthogonality: coarse_divergence_moments(mesh, &state.u)
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max),
        skew: skew_term(mesh, state, params),
        velocity_w1r: state.u.seminorm(mesh, params.r),
        velocity_h1_sq: h1_seminorm_sq(mesh, state),
        energy: state.u.seminorm_pow(mesh, params.r) + s_php,
        work,
        apriori: apriori_quantities(mesh, state, params),
        iterations: state.iterations(),
        final_residual: state.final_residual(),
    })
}

/// Solves the manufactured problem on one level and measures it.
pub fn solve_level(
    case: &ManufacturedCase,
    params: &PowerLawParams,
    n0: usize,
    level: usize,
    config: &SolverConfig,
) -> Result<(FineMesh, SolutionState, LevelData)> {
    let params = config.effective_params(params)?;
    let mesh = level_mesh(n0, level)?;
    let f = |x: Point| case.forcing(x, &params);
    let state = picard_solve(&mesh, &params, &f, config)?;
    let data = measure_level(&mesh, &state, &params, &f, Some(case))?;
    Ok((mesh, state, data))
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub err_u_w1r: f64,
    pub err_u_l2rt: f64,
    pub err_p_lrt: f64,
    pub s_php: f64,
    pub max_div_l: f64,
    /// `log₂` of consecutive error ratios, absent on the first row.
    pub orders: Option<[f64; 3]>,
    pub failure: Option<String>,
}

impl ConvergenceRow {
    pub fn errors(&self) -> [f64; 3] {
        [self.err_u_w1r, self.err_u_l2rt, self.err_p_lrt]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub params: PowerLawParams,
    pub case: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn from_levels(params: PowerLawParams, case: &str, levels: &[LevelReport]) -> Self {
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(levels.len());
        for rep in levels {
            let row = match &rep.outcome {
                Ok(data) => {
                    let e = data.errors.map_or([f64::NAN; 3], |e| e.as_array());
                    ConvergenceRow {
                        level: rep.level,
                        h: rep.h,
                        err_u_w1r: e[0],
                        err_u_l2rt: e[1],
                        err_p_lrt: e[2],
                        s_php: data.s_php,
                        max_div_l: data.max_div_l,
                        orders: None,
                        failure: None,
                    }
                }
                Err(msg) => ConvergenceRow {
                    level: rep.level,
                    h: rep.h,
                    err_u_w1r: f64::NAN,
                    err_u_l2rt: f64::NAN,
                    err_p_lrt: f64::NAN,
                    s_php: f64::NAN,
                    max_div_l: f64::NAN,
                    orders: None,
                    failure: Some(msg.clone()),
                },
            };
            rows.push(row);
        }
        for i in 1..rows.len() {
            let (prev, cur) = (rows[i - 1].errors(), rows[i].errors());
            let ratio = rows[i - 1].h / rows[i].h;
            rows[i].orders = Some(std::array::from_fn(|j| {
                (prev[j] / cur[j]).ln() / ratio.ln()
            }));
        }
        ConvergenceTable {
            params,
            case: case.to_string(),
            rows,
        }
    }

    /// CSV with the parameters as `#` comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# case = {}", self.case);
        for line in self.params.header_lines() {
            let _ = writeln!(out, "{line}");
        }
        out.push_str(
            "level,h,err_u_w1r,err_u_l2rt,err_p_lrt,s_php,max_div_l,order_u_w1r,order_u_l2rt,order_p_lrt,status\n",
        );
        for row in &self.rows {
            let o = row
                .orders
                .map_or([String::new(), String::new(), String::new()], |o| {
                    o.map(|v| format!("{v:.16e}"))
                });
            let status = row.failure.as_deref().map_or("ok".to_string(), |m| {
                format!("\"failed: {}\"", m.replace('"', "'"))
            });
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{},{}",
                row.level,
                row.h,
                row.err_u_w1r,
                row.err_u_l2rt,
                row.err_p_lrt,
                row.s_php,
                row.max_div_l,
                o[0],
                o[1],
                o[2],
                status
            );
        }
        out
    }

    /// Whether every error column is non-increasing from row to row.
    pub fn errors_non_increasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| (0..3).all(|j| w[1].errors()[j] <= w[0].errors()[j]))
    }

    /// Observed order of the `W^{1,r}` velocity error between the two finest rows.
    pub fn finest_velocity_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.orders).map(|o| o[0])
    }
}

/// A whole refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub table: ConvergenceTable,
    pub levels: Vec<LevelReport>,
}

/// Solves `case` on `levels` nested meshes starting from an `n0` macro grid.
///
/// Levels run concurrently; a failed level is kept as a marked row.
pub fn run_convergence_study(
    case: &ManufacturedCase,
    params: &PowerLawParams,
    n0: usize,
    levels: usize,
    config: &SolverConfig,
) -> Result<ConvergenceStudy> {
    let params = config.effective_params(params)?;
    let reports: Vec<LevelReport> = (0..levels)
        .into_par_iter()
        .map(|level| {
            let n = n0 << level;
            let outcome = solve_level(case, &params, n0, level, config)
                .map(|(_, _, data)| data)
                .map_err(|e| e.to_string());
            LevelReport {
                level,
                n,
                // the fine mesh diameter: half the macro cell diagonal
                h: 0.5 * 2f64.sqrt() / n as f64,
                outcome,
            }
        })
        .collect();
    Ok(ConvergenceStudy {
        table: ConvergenceTable::from_levels(params, case.name, &reports),
        levels: reports,
    })
}

/// Outcome of one invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Offending entity or other context when the check fails.
    pub detail: String,
}

impl CheckResult {
    /// A check that passes when `value <= threshold`.
    pub fn at_most(
        name: impl Into<String>,
        value: f64,
        threshold: f64,
        detail: impl Into<String>,
    ) -> Self {
        CheckResult {
            name: name.into(),
            value,
            threshold,
            passed: value <= threshold,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: value {:.3e}, threshold {:.3e}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold,
            if self.detail.is_empty() {
                String::new()
            } else {
                format!(" ({})", self.detail)
            }
        )
    }
}

/// Largest deviation of `φ_F·n_G` from `δ_FG` over all facets `G` of the
/// neighbours of every facet `F`, sampled at two points per facet.
pub fn rt0_dof_deviation(mesh: &FineMesh) -> (f64, Option<usize>) {
    let mut worst = (0.0, None);
    for (f, facet) in mesh.facets().iter().enumerate() {
        for k in std::iter::once(facet.plus).chain(facet.minus) {
            for g in mesh.element_facets(k) {
                let gf = &mesh.facets()[g];
                let [a, b] = gf.nodes.map(|i| mesh.nodes[i]);
                for t in [0.25, 0.75] {
                    let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    let v = rt0_value(mesh, f, k, x);
                    let trace = v[0] * gf.normal[0] + v[1] * gf.normal[1];
                    let expected = if g == f { 1.0 } else { 0.0 };
                    let dev = (trace - expected).abs();
                    if dev > worst.0 {
                        worst = (dev, Some(f));
                    }
                }
            }
        }
    }
    worst
}

/// Random smooth field `x(1-x)y(1-y) (q₁, q₂)` with quadratic `q_i`,
/// returned with its gradient and divergence.
#[derive(Debug, Clone, Copy)]
pub struct BubblePolynomial {
    /// Coefficients of `1, x, y, x², xy, y²` for each component.
    pub coeffs: [[f64; 6]; 2],
}

impl BubblePolynomial {
    pub fn random(rng: &mut impl Rng) -> Self {
        BubblePolynomial {
            coeffs: std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))),
        }
    }

    fn quad(c: &[f64; 6], x: Point) -> (f64, [f64; 2]) {
        let [x, y] = x;
        (
            c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y,
            [
                c[1] + 2.0 * c[3] * x + c[4] * y,
                c[2] + c[4] * x + 2.0 * c[5] * y,
            ],
        )
    }

    fn bubble(x: Point) -> (f64, [f64; 2]) {
        let (bx, by) = (x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]));
        (bx * by, [(1.0 - 2.0 * x[0]) * by, bx * (1.0 - 2.0 * x[1])])
    }

    pub fn value(&self, x: Point) -> Point {
        let b = Self::bubble(x).0;
        [
            b * Self::quad(&self.coeffs[0], x).0,
            b * Self::quad(&self.coeffs[1], x).0,
        ]
    }

    pub fn gradient(&self, x: Point) -> Gradient {
        let (b, db) = Self::bubble(x);
        std::array::from_fn(|i| {
            let (q, dq) = Self::quad(&self.coeffs[i], x);
            [db[0] * q + b * dq[0], db[1] * q + b * dq[1]]
        })
    }

    pub fn divergence(&self, x: Point) -> f64 {
        let g = self.gradient(x);
        g[0][0] + g[1][1]
    }
}

/// `sup_{q_H} |(q_H, div(v - I v))| / (‖q_H‖_{0,2} |v|_{1,2})` for one field.
pub fn fortin_defect(mesh: &FineMesh, v: &BubblePolynomial) -> Result<f64> {
    let rule = QuadratureRule::accurate();
    let iv = fortin_interpolate(mesh, &|x| v.value(x), &LineRule::gauss(4))?;
    let discrete = coarse_divergence_moments(mesh, &iv);
    let exact = crate::spaces::coarse_divergence_moments_exact(mesh, |x| v.divergence(x), &rule);
    // the supremum over q_H is the weighted ℓ² norm of the moments
    let sup: f64 = discrete
        .iter()
        .zip(&exact)
        .enumerate()
        .map(|(m, (d, e))| (d - e).powi(2) / mesh.macro_mesh.area(m))
        .sum::<f64>()
        .sqrt();
    let seminorm = integrate(mesh, &rule, |_, _, x| {
        let g = v.gradient(x);
        crate::spaces::frobenius(&g).powi(2)
    })
    .sqrt();
    Ok(sup / seminorm)
}

/// `‖q - Π_H q‖_{0,2} / (h^{(1-α)/2} s(q, q)^{1/2})`.
pub fn jump_control_ratio(mesh: &FineMesh, q: &P0Field, params: &PowerLawParams) -> f64 {
    let coarse = project_pi_big_h(mesh, q);
    let num: f64 = (0..mesh.n_elements())
        .map(|k| mesh.area(k) * (q.values[k] - coarse.values[mesh.parent_macro[k]]).powi(2))
        .sum::<f64>()
        .sqrt();
    let s = stab_form(mesh, q, q, params);
    num / (mesh.h.powf(0.5 * (1.0 - params.alpha)) * s.sqrt())
}

/// Largest and smallest jump-control ratio over `samples` random fields.
pub fn jump_control_range(
    mesh: &FineMesh,
    params: &PowerLawParams,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut range = (f64::INFINITY, 0.0f64);
    for _ in 0..samples {
        let q = P0Field::from_values(
            (0..mesh.n_elements())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        );
        let ratio = jump_control_ratio(mesh, &q, params);
        range = (range.0.min(ratio), range.1.max(ratio));
    }
    range
}

/// Largest over smallest of positive values.
pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(0.0, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Runs every invariant on `levels` nested meshes for one exponent.
pub fn run_invariant_suite(
    case: &ManufacturedCase,
    params: &PowerLawParams,
    n0: usize,
    levels: usize,
    config: &SolverConfig,
) -> Result<Vec<CheckResult>> {
    let params = config.effective_params(params)?;
    let mut checks = Vec::new();

    let r_conj = params.r / (params.r - 1.0);
    let r_star_half = match params.r_star {
        crate::params::SobolevExponent::Finite(v) => 0.5 * v,
        crate::params::SobolevExponent::Infinite => f64::INFINITY,
    };
    checks.push(CheckResult::at_most(
        "exponent r_tilde = min(r', r*/2)",
        (params.r_tilde - r_conj.min(r_star_half)).abs(),
        1e-12,
        "",
    ));

    let meshes: Vec<FineMesh> = (0..levels)
        .map(|l| level_mesh(n0, l))
        .collect::<Result<_>>()?;
    for (l, mesh) in meshes.iter().enumerate() {
        let (dev, facet) = rt0_dof_deviation(mesh);
        checks.push(CheckResult::at_most(
            format!("level {l}: RT0 normal traces"),
            dev,
            1e-13,
            facet.map_or(String::new(), |f| format!("facet {f}")),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let fields: Vec<BubblePolynomial> = (0..20)
        .map(|_| BubblePolynomial::random(&mut rng))
        .collect();
    for (l, mesh) in meshes.iter().enumerate().take(2) {
        let mut worst = 0.0f64;
        for v in &fields {
            worst = worst.max(fortin_defect(mesh, v)?);
        }
        checks.push(CheckResult::at_most(
            format!("level {l}: Fortin identity"),
            worst,
            1e-10,
            "",
        ));
    }

    let ratios: Vec<f64> = meshes
        .iter()
        .flat_map(|m| {
            let (lo, hi) = jump_control_range(m, &params, 100, 9);
            [lo, hi]
        })
        .collect();
    checks.push(CheckResult::at_most(
        "jump-control ratio spread",
        spread(&ratios),
        2.0,
        "",
    ));

    let study = run_convergence_study(case, &params, n0, levels, config)?;
    let mut s_values = Vec::new();
    let mut apriori = Vec::new();
    for rep in &study.levels {
        let l = rep.level;
        match &rep.outcome {
            Err(msg) => checks.push(CheckResult {
                name: format!("level {l}: solve"),
                value: f64::NAN,
                threshold: config.tolerance,
                passed: false,
                detail: msg.clone(),
            }),
            Ok(d) => {
                let scale = d.velocity_w1r.max(f64::MIN_POSITIVE);
                checks.push(CheckResult::at_most(
                    format!("level {l}: max |div L| / |u_h|_(1,r)"),
                    d.max_div_l / scale,
                    1e-8,
                    "",
                ));
                checks.push(CheckResult::at_most(
                    format!("level {l}: max |(chi_M, div u_h)| / |u_h|_(1,r)"),
                    d.coarse_orthogonality / scale,
                    1e-8,
                    "",
                ));
                checks.push(CheckResult::at_most(
                    format!("level {l}: skew term / |u_h|^2_(1,2)"),
                    d.skew.abs() / d.velocity_h1_sq.max(f64::MIN_POSITIVE),
                    1e-10,
                    "",
                ));
                checks.push(CheckResult::at_most(
                    format!("level {l}: energy identity"),
                    (d.energy - d.work).abs() / d.work.abs().max(f64::MIN_POSITIVE),
                    10.0 * config.tolerance,
                    "",
                ));
                s_values.push(d.s_php);
                apriori.push(d.apriori);
            }
        }
    }
    if s_values.len() == levels {
        let worst_step = s_values.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        checks.push(CheckResult::at_most(
            "s(p_h, p_h) strictly decreasing (largest ratio)",
            worst_step,
            1.0 - f64::EPSILON,
            "",
        ));
        checks.push(CheckResult::at_most(
            "a priori sum max/min across levels",
            apriori_spread(&apriori),
            3.0,
            "",
        ));
    }
    Ok(checks)
}

/// Largest over smallest value of `|u_h|^r_{1,r} + ‖L‖_{0,2r̃} + s(p_h, p_h) + ‖p_h‖_{0,r̃}`
/// across levels, the left-hand side of the a priori bound.
pub fn apriori_spread(reports: &[AprioriReport]) -> f64 {
    if reports.is_empty() {
        return 1.0;
    }
    let sums: Vec<f64> = reports.iter().map(|r| r.as_array().iter().sum()).collect();
    spread(&sums)
}

/// Largest over smallest value of each a priori quantity separately.
pub fn apriori_component_spreads(reports: &[AprioriReport]) -> [f64; 4] {
    std::array::from_fn(|j| spread(&reports.iter().map(|r| r.as_array()[j]).collect::<Vec<_>>()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manufactured::case_m1;

    #[test]
    fn bubble_polynomial_derivatives() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = BubblePolynomial::random(&mut rng);
        let h = 1e-6;
        for x in [[0.3, 0.4], [0.71, 0.12]] {
            let g = v.gradient(x);
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                for i in 0..2 {
                    assert!((g[i][j] - (v.value(xp)[i] - v.value(xm)[i]) / (2.0 * h)).abs() < 1e-8);
                }
            }
        }
        assert_eq!(v.value([0.0, 0.3]), [0.0, 0.0]);
        assert_eq!(v.value([0.3, 1.0]), [0.0, 0.0]);
    }

    #[test]
    fn rt0_pattern_is_exact() {
        let mesh = level_mesh(2, 1).unwrap();
        assert!(rt0_dof_deviation(&mesh).0 <= 1e-13);
    }

    #[test]
    fn fortin_defect_is_round_off() {
        let mesh = level_mesh(2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            assert!(fortin_defect(&mesh, &BubblePolynomial::random(&mut rng)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn jump_ratio_of_single_macro_checkerboard() {
        let mesh = level_mesh(1, 0).unwrap();
        let params = PowerLawParams::new(2.0, 2).unwrap();
        let mut q = P0Field::zeros(mesh.n_elements());
        // only the middle child of macro 0 differs
        q.values[3] = 1.0;
        let ratio = jump_control_ratio(&mesh, &q, &params);
        // ‖q - Π_H q‖² = |K|(1 - 1/4)² + 3|K|/16 = 3|K|/4, s = Σ_{3 facets} h_F² with τ = h_F
        let area = mesh.area(3);
        let s: f64 = mesh
            .element_facets(3)
            .iter()
            .map(|&f| mesh.facets()[f].length.powi(2))
            .sum();
        assert!((ratio - (0.75 * area).sqrt() / s.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn table_orders_and_csv() {
        let params = PowerLawParams::new(2.0, 2).unwrap();
        let mk = |level: usize, e: f64| LevelReport {
            level,
            n: 2 << level,
            h: 1.0 / (1 << level) as f64,
            outcome: Ok(LevelData {
                errors: Some(ErrorNorms {
                    velocity_w1r: e,
                    velocity_l2rt: e * e,
                    pressure_lrt: e,
                }),
                s_php: e,
                max_div_l: 0.0,
                coarse_orthogonality: 0.0,
                skew: 0.0,
                velocity_w1r: 1.0,
                velocity_h1_sq: 1.0,
                energy: 1.0,
                work: 1.0,
                apriori: AprioriReport {
                    velocity_seminorm_pow: 1.0,
                    lifted_norm: 1.0,
                    s_php: e,
                    pressure_norm: 1.0,
                },
                iterations: 1,
                final_residual: 0.0,
            }),
        };
        let levels = vec![mk(0, 0.4), mk(1, 0.2), mk(2, 0.1)];
        let table = ConvergenceTable::from_levels(params, "M1", &levels);
        let o = table.rows[2].orders.unwrap();
        assert!((o[0] - 1.0).abs() < 1e-14 && (o[1] - 2.0).abs() < 1e-14);
        assert!(table.errors_non_increasing());
        let csv = table.to_csv();
        assert!(csv.starts_with("# case = M1\n# d = 2\n"));
        assert!(csv.contains("\nlevel,h,err_u_w1r,err_u_l2rt,err_p_lrt,s_php,max_div_l,"));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4);
    }

    #[test]
    fn apriori_spread_examples() {
        let rep = |a: f64| AprioriReport {
            velocity_seminorm_pow: a,
            lifted_norm: 1.0,
            s_php: 1.0 / a,
            pressure_norm: 1.0,
        };
        // sums 4.0 and 4.5
        assert!((apriori_spread(&[rep(1.0), rep(2.0)]) - 4.5 / 4.0).abs() < 1e-15);
        assert_eq!(
            apriori_component_spreads(&[rep(1.0), rep(2.0)]),
            [2.0, 1.0, 2.0, 1.0]
        );
        assert_eq!(apriori_spread(&[]), 1.0);
    }

    #[test]
    fn small_study_runs() {
        let params = PowerLawParams::new(2.0, 2).unwrap();
        let study =
            run_convergence_study(&case_m1(), &params, 2, 2, &SolverConfig::for_exponent(2.0))
                .unwrap();
        assert_eq!(study.table.rows.len(), 2);
        assert!(study.table.rows.iter().all(|r| r.failure.is_none()));
        assert!(study.table.rows[1].err_p_lrt < study.table.rows[0].err_p_lrt);
    }
}
