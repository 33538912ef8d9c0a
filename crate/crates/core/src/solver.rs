//! Damped Picard iteration for the discrete power-law problem.
//!
//! Each step freezes the viscosity at the current velocity and the
//! advecting field at the current lifting, then solves the resulting
//! linear saddle point problem directly. The first iterate is the Stokes
//! solution.

use std::fmt::Write as _;

use faer::prelude::*;
use faer::Mat;

use crate::assembly::{
    assemble_rhs, assemble_system, nonlinear_residual, spmv, DofMap, SparseMatrix, StabilisedSystem,
};
use crate::error::{FemError, Result};
use crate::mesh::FineMesh;
use crate::params::PowerLawParams;
use crate::quadrature::QuadratureRule;
use crate::spaces::{P0Field, P1VectorField};
use crate::stabilisation::{lift, stab_form};
use crate::Point;

/// Iteration controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative nonlinear residual at which the iteration stops.
    pub tolerance: f64,
    /// Damping `θ`: the next iterate is `θ new + (1 - θ) old`.
    pub damping: f64,
    /// Overrides the default regularisation of the viscosity when set.
    pub epsilon_reg: Option<f64>,
    /// Bound on the relative residual of every linear solve.
    pub linear_tolerance: f64,
}

impl SolverConfig {
    /// Defaults for exponent `r`: undamped for `r >= 2`, `θ = 0.7` below.
    pub fn for_exponent(r: f64) -> Self {
        SolverConfig {
            max_iterations: 200,
            tolerance: 1e-10,
            damping: if r >= 2.0 { 1.0 } else { 0.7 },
            epsilon_reg: None,
            linear_tolerance: 1e-10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(FemError::Config(format!(
                "tolerance must be positive (got {})",
                self.tolerance
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(FemError::Config(format!(
                "damping must lie in (0, 1] (got {})",
                self.damping
            )));
        }
        if !(self.linear_tolerance > 0.0) {
            return Err(FemError::Config(format!(
                "linear tolerance must be positive (got {})",
                self.linear_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(FemError::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

impl SolverConfig {
    /// `params` with the regularisation override applied.
    pub fn effective_params(&self, params: &PowerLawParams) -> Result<PowerLawParams> {
        match self.epsilon_reg {
            Some(eps) => {
                let mut out = PowerLawParams::with_epsilon(params.r, params.d, eps)?;
                out.fd_step = params.fd_step;
                Ok(out)
            }
            None => Ok(*params),
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::for_exponent(2.0)
    }
}

/// One row of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub residual: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    pub s_php: f64,
}

/// Discrete solution together with its iteration history.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub u: P1VectorField,
    pub p: P0Field,
    /// Multiplier of the pressure mean constraint at the last linear solve.
    pub multiplier: f64,
    pub log: Vec<IterationRecord>,
}

impl SolutionState {
    pub fn zero(mesh: &FineMesh) -> Self {
        SolutionState {
            u: P1VectorField::zeros(mesh),
            p: P0Field::zeros(mesh.n_elements()),
            multiplier: 0.0,
            log: Vec::new(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.log.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |r| r.residual)
    }

    /// Iteration log as CSV.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iter,residual,nu_min,nu_max,s_php\n");
        for r in &self.log {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.iter, r.residual, r.nu_min, r.nu_max, r.s_php
            );
        }
        out
    }
}

/// Solver for the bordered saddle point matrix.
pub trait LinearSolver {
    fn solve(&self, matrix: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>>;
}

/// Sparse LU factorisation with a residual check.
#[derive(Debug, Clone, Copy)]
pub struct SparseLu {
    pub tolerance: f64,
}

impl LinearSolver for SparseLu {
    fn solve(&self, matrix: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = matrix
            .sp_lu()
            .map_err(|e| FemError::LinearSolve(format!("sparse LU failed: {e:?}")))?;
        let b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x_mat = lu.solve(&b);
        let x: Vec<f64> = (0..rhs.len()).map(|i| x_mat[(i, 0)]).collect();
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(FemError::LinearSolve(format!(
                "non-finite solution entry {i}, the matrix is numerically singular"
            )));
        }
        let ax = spmv(matrix, &x);
        let res = ax
            .iter()
            .zip(rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = rhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let x_scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let rel = if scale > 0.0 {
            res / scale
        } else {
            res / x_scale.max(1.0)
        };
        if rel > self.tolerance {
            return Err(FemError::LinearSolve(format!(
                "relative residual {rel:.3e} exceeds {:.3e}, the matrix is close to singular",
                self.tolerance
            )));
        }
        Ok(x)
    }
}

/// Solves one linearised system; returns `(u, p, λ)`.
///
/// The factorised matrix is [`StabilisedSystem::pinned_matrix`]; the result
/// is checked against the bordered system with the mean constraint.
pub fn linear_saddle_solve(
    system: &StabilisedSystem,
    n_nodes: usize,
    solver: &dyn LinearSolver,
    tolerance: f64,
) -> Result<(P1VectorField, P0Field, f64)> {
    let nu = system.dofs.n_velocity();
    let np = system.dofs.n_pressure();
    let mut rhs = system.rhs_u.clone();
    rhs.resize(nu + np, 0.0);
    let mut x = solver.solve(&system.pinned_matrix(), &rhs)?;
    let total: f64 = system.mean_row.iter().sum();
    let mean = x[nu..]
        .iter()
        .zip(&system.mean_row)
        .map(|(p, a)| p * a)
        .sum::<f64>()
        / total;
    x[nu..].iter_mut().for_each(|p| *p -= mean);
    // multiplier from the dropped first pressure row
    let row0 = spmv(&system.b, &x[..nu])[0] + spmv(&system.s, &x[nu..])[0];
    let lambda = -row0 / system.mean_row[0];
    x.push(lambda);

    let full = system.apply(&x);
    let b = system.rhs();
    let res = full
        .iter()
        .zip(&b)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let rel = if scale > 0.0 { res / scale } else { res };
    if !(rel <= tolerance) {
        return Err(FemError::LinearSolve(format!(
            "bordered system residual {rel:.3e} exceeds {tolerance:.3e}"
        )));
    }

    let u = system.dofs.scatter(&x[..nu], n_nodes);
    let mut p = P0Field::from_values(x[nu..nu + np].to_vec());
    p.zero_mean = true;
    Ok((u, p, lambda))
}

/// Relative max-norm residual of the nonlinear equations.
pub fn relative_residual(
    mesh: &FineMesh,
    dofs: &DofMap,
    params: &PowerLawParams,
    u: &P1VectorField,
    p: &P0Field,
    rhs_u: &[f64],
) -> Result<f64> {
    let (ru, rp) = nonlinear_residual(mesh, dofs, params, u, p, rhs_u)?;
    let res = ru.iter().chain(&rp).map(|v| v.abs()).fold(0.0, f64::max);
    let scale = rhs_u.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(if scale > 0.0 { res / scale } else { res })
}

/// Runs the damped Picard iteration from the Stokes initial guess.
pub fn picard_solve(
    mesh: &FineMesh,
    params: &PowerLawParams,
    f: &dyn Fn(Point) -> Point,
    config: &SolverConfig,
) -> Result<SolutionState> {
    config.validate()?;
    let params = config.effective_params(params)?;
    let dofs = DofMap::new(mesh);
    let rhs = assemble_rhs(mesh, &dofs, f)?;
    let solver = SparseLu {
        tolerance: config.linear_tolerance,
    };
    let n_nodes = mesh.n_nodes();

    let zero = SolutionState::zero(mesh);
    let (stokes, _) = assemble_system(mesh, &params, &zero.u, &zero.p, rhs.clone(), false, false)?;
    let (mut u, mut p, mut multiplier) =
        linear_saddle_solve(&stokes, n_nodes, &solver, config.linear_tolerance)?;

    let mut log = Vec::new();
    let record = |iter: usize, u: &P1VectorField, p: &P0Field| -> Result<IterationRecord> {
        let residual = relative_residual(mesh, &dofs, &params, u, p, &rhs)?;
        let nu = crate::assembly::element_viscosities(mesh, u, &params)?;
        Ok(IterationRecord {
            iter,
            residual,
            nu_min: nu.iter().copied().fold(f64::INFINITY, f64::min),
            nu_max: nu.iter().copied().fold(0.0, f64::max),
            s_php: stab_form(mesh, p, p, &params),
        })
    };
    log.push(record(1, &u, &p)?);

    while log.last().expect("log is non-empty").residual > config.tolerance {
        if log.len() >= config.max_iterations {
            let last = log.last().expect("log is non-empty").residual;
            return Err(FemError::NotConverged {
                iterations: log.len(),
                last_residual: last,
                tolerance: config.tolerance,
                history: log.iter().map(|r| r.residual).collect(),
            });
        }
        let (system, _) = assemble_system(mesh, &params, &u, &p, rhs.clone(), true, true)?;
        let (u_new, p_new, lambda) =
            linear_saddle_solve(&system, n_nodes, &solver, config.linear_tolerance)?;
        let theta = config.damping;
        u.scale(1.0 - theta);
        u.axpy(theta, &u_new);
        for (old, new) in p.values.iter_mut().zip(&p_new.values) {
            *old = (1.0 - theta) * *old + theta * new;
        }
        multiplier = lambda;
        log.push(record(log.len() + 1, &u, &p)?);
    }

    Ok(SolutionState {
        u,
        p,
        multiplier,
        log,
    })
}

/// Quantities bounded by the a priori estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriReport {
    /// `|u|^r_{1,r}`.
    pub velocity_seminorm_pow: f64,
    /// `‖L(u, p)‖_{0,2r̃}`.
    pub lifted_norm: f64,
    pub s_php: f64,
    /// `‖p‖_{0,r̃}`.
    pub pressure_norm: f64,
}

impl AprioriReport {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.velocity_seminorm_pow,
            self.lifted_norm,
            self.s_php,
            self.pressure_norm,
        ]
    }
}

pub fn apriori_quantities(
    mesh: &FineMesh,
    state: &SolutionState,
    params: &PowerLawParams,
) -> AprioriReport {
    let lifted = lift(mesh, &state.u, &state.p, params);
    AprioriReport {
        velocity_seminorm_pow: state.u.seminorm_pow(mesh, params.r),
        lifted_norm: lifted.lp_norm(mesh, 2.0 * params.r_tilde, &QuadratureRule::accurate()),
        s_php: stab_form(mesh, &state.p, &state.p, params),
        pressure_norm: state.p.lp_norm(mesh, params.r_tilde),
    }
}
