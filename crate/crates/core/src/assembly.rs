//! Sparse blocks of the Picard-linearised discrete problem.
//!
//! With `(u, p)` the unknowns and `λ` a multiplier for the zero pressure
//! mean, the linear system solved at each Picard step is
//!
//! ```text
//!   [ A + N   -Bᵀ   0 ] [u]   [F]
//!   [   B      S    m ] [p] = [0]
//!   [   0      mᵀ   0 ] [λ]   [0]
//! ```
//!
//! where `A` carries the frozen viscosity, `N` the convection by the frozen
//! lifted field, `B[K, j] = ∫_K div φ_j`, `S` the jump penalty and `m` the
//! element areas. Dirichlet nodes are eliminated from the velocity unknowns.

use faer::sparse::{SparseColMat, Triplet};

use crate::error::{FemError, Result};
use crate::mesh::FineMesh;
use crate::params::PowerLawParams;
use crate::quadrature::QuadratureRule;
use crate::spaces::{frobenius, P0Field, P1VectorField};
use crate::stabilisation::{stabilised_facets, LiftedField};
use crate::Point;

pub type SparseMatrix = SparseColMat<usize, f64>;

/// Numbering of the free velocity unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    /// Free index of every node, `None` on the Dirichlet boundary.
    pub node_dof: Vec<Option<usize>>,
    pub free_nodes: Vec<usize>,
    pub n_elements: usize,
}

impl DofMap {
    pub fn new(mesh: &FineMesh) -> Self {
        let mut node_dof = vec![None; mesh.n_nodes()];
        let mut free_nodes = Vec::new();
        for (i, &b) in mesh.boundary_node.iter().enumerate() {
            if !b {
                node_dof[i] = Some(free_nodes.len());
                free_nodes.push(i);
            }
        }
        DofMap {
            node_dof,
            free_nodes,
            n_elements: mesh.n_elements(),
        }
    }

    /// Number of velocity unknowns (two per free node).
    pub fn n_velocity(&self) -> usize {
        2 * self.free_nodes.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.n_elements
    }

    /// Size of the full saddle point system including the multiplier.
    pub fn n_total(&self) -> usize {
        self.n_velocity() + self.n_pressure() + 1
    }

    /// Row of component `c` at node `node`, if free.
    pub fn velocity_dof(&self, node: usize, c: usize) -> Option<usize> {
        self.node_dof[node].map(|i| 2 * i + c)
    }

    pub fn gather(&self, u: &P1VectorField) -> Vec<f64> {
        let mut out = vec![0.0; self.n_velocity()];
        for (i, &node) in self.free_nodes.iter().enumerate() {
            out[2 * i] = u.values[node][0];
            out[2 * i + 1] = u.values[node][1];
        }
        out
    }

    pub fn scatter(&self, x: &[f64], n_nodes: usize) -> P1VectorField {
        let mut values = vec![[0.0; 2]; n_nodes];
        for (i, &node) in self.free_nodes.iter().enumerate() {
            values[node] = [x[2 * i], x[2 * i + 1]];
        }
        P1VectorField {
            values,
            dirichlet: true,
        }
    }
}

fn build(nrows: usize, ncols: usize, triplets: &[Triplet<usize, usize, f64>]) -> SparseMatrix {
    SparseColMat::try_new_from_triplets(nrows, ncols, triplets)
        .expect("assembly produces in-range indices")
}

/// `y = M x`.
pub fn spmv(m: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; m.nrows()];
    let m = m.as_ref();
    let col_ptr = m.symbolic().col_ptr();
    let row_idx = m.symbolic().row_idx();
    let val = m.val();
    for j in 0..m.ncols() {
        for idx in col_ptr[j]..col_ptr[j + 1] {
            y[row_idx[idx]] += val[idx] * x[j];
        }
    }
    y
}

/// `y = Mᵀ x`.
pub fn spmv_transpose(m: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    let m = m.as_ref();
    let col_ptr = m.symbolic().col_ptr();
    let row_idx = m.symbolic().row_idx();
    let val = m.val();
    (0..m.ncols())
        .map(|j| {
            (col_ptr[j]..col_ptr[j + 1])
                .map(|idx| val[idx] * x[row_idx[idx]])
                .sum()
        })
        .collect()
}

/// Iterates `(row, col, value)` over the stored entries.
pub fn entries(m: &SparseMatrix) -> Vec<(usize, usize, f64)> {
    let m = m.as_ref();
    let col_ptr = m.symbolic().col_ptr();
    let row_idx = m.symbolic().row_idx();
    let val = m.val();
    let mut out = Vec::with_capacity(val.len());
    for j in 0..m.ncols() {
        for idx in col_ptr[j]..col_ptr[j + 1] {
            out.push((row_idx[idx], j, val[idx]));
        }
    }
    out
}

/// Range of the frozen viscosity over the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscosityRange {
    pub min: f64,
    pub max: f64,
}

/// Element viscosities `ν_K = (|∇u_K|² + ε²)^{(r-2)/2}`.
pub fn element_viscosities(
    mesh: &FineMesh,
    u: &P1VectorField,
    params: &PowerLawParams,
) -> Result<Vec<f64>> {
    (0..mesh.n_elements())
        .map(|k| {
            let g = frobenius(&u.gradient(mesh, k));
            let nu = params.viscosity(g);
            if nu.is_finite() {
                Ok(nu)
            } else {
                Err(FemError::DegenerateViscosity {
                    element: k,
                    grad_norm: g,
                })
            }
        })
        .collect()
}

/// `∫_K ν_K ∇φ_i : ∇φ_j` with `ν` frozen at `u_k`.
pub fn assemble_viscous(
    mesh: &FineMesh,
    dofs: &DofMap,
    u_k: &P1VectorField,
    params: &PowerLawParams,
) -> Result<(SparseMatrix, ViscosityRange)> {
    let nu = element_viscosities(mesh, u_k, params)?;
    let range = ViscosityRange {
        min: nu.iter().copied().fold(f64::INFINITY, f64::min),
        max: nu.iter().copied().fold(0.0, f64::max),
    };
    Ok((assemble_weighted_laplacian(mesh, dofs, &nu), range))
}

/// Vector Laplacian stiffness weighted by a per-element coefficient.
pub fn assemble_weighted_laplacian(mesh: &FineMesh, dofs: &DofMap, nu: &[f64]) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(18 * mesh.n_elements());
    for (k, tri) in mesh.elements.iter().enumerate() {
        let grads = mesh.barycentric_gradients(k);
        let scale = nu[k] * mesh.area(k);
        for a in 0..3 {
            for b in 0..3 {
                let value = scale * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                for c in 0..2 {
                    if let (Some(i), Some(j)) =
                        (dofs.velocity_dof(tri[a], c), dofs.velocity_dof(tri[b], c))
                    {
                        triplets.push(Triplet::new(i, j, value));
                    }
                }
            }
        }
    }
    let n = dofs.n_velocity();
    build(n, n, &triplets)
}

/// `-∫_K (β·∇φ_i) φ_j`, the convection `-(β ⊗ u, ∇v)` with `β` frozen.
pub fn assemble_convection(mesh: &FineMesh, dofs: &DofMap, beta: &LiftedField) -> SparseMatrix {
    let rule = QuadratureRule::forms();
    let mut triplets = Vec::with_capacity(18 * mesh.n_elements());
    for (k, tri) in mesh.elements.iter().enumerate() {
        let grads = mesh.barycentric_gradients(k);
        let mut local = [[0.0; 3]; 3];
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let b = beta.evaluate(mesh, k, *bary);
            for a in 0..3 {
                let adv = b[0] * grads[a][0] + b[1] * grads[a][1];
                for (c, lam) in bary.iter().enumerate() {
                    local[a][c] -= mesh.area(k) * w * adv * lam;
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..2 {
                    if let (Some(i), Some(j)) =
                        (dofs.velocity_dof(tri[a], c), dofs.velocity_dof(tri[b], c))
                    {
                        triplets.push(Triplet::new(i, j, local[a][b]));
                    }
                }
            }
        }
    }
    let n = dofs.n_velocity();
    build(n, n, &triplets)
}

/// `B[K, j] = ∫_K div φ_j`.
pub fn assemble_div_pressure(mesh: &FineMesh, dofs: &DofMap) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(6 * mesh.n_elements());
    for (k, tri) in mesh.elements.iter().enumerate() {
        let grads = mesh.barycentric_gradients(k);
        for a in 0..3 {
            for c in 0..2 {
                if let Some(j) = dofs.velocity_dof(tri[a], c) {
                    triplets.push(Triplet::new(k, j, mesh.area(k) * grads[a][c]));
                }
            }
        }
    }
    build(dofs.n_pressure(), dofs.n_velocity(), &triplets)
}

/// Matrix of `s(·,·)` on the fine P0 space.
pub fn assemble_stabilisation(mesh: &FineMesh, params: &PowerLawParams) -> SparseMatrix {
    let mut triplets = Vec::new();
    for f in stabilised_facets(mesh) {
        let facet = &mesh.facets()[f];
        let w = params.tau(facet.length) * facet.length;
        let (kp, km) = (facet.plus, facet.minus.expect("interior facet"));
        triplets.push(Triplet::new(kp, kp, w));
        triplets.push(Triplet::new(km, km, w));
        triplets.push(Triplet::new(kp, km, -w));
        triplets.push(Triplet::new(km, kp, -w));
    }
    let n = mesh.n_elements();
    build(n, n, &triplets)
}

/// `⟨f, φ_i⟩` with the degree-7 element rule.
pub fn assemble_rhs(
    mesh: &FineMesh,
    dofs: &DofMap,
    f: &dyn Fn(Point) -> Point,
) -> Result<Vec<f64>> {
    let rule = QuadratureRule::accurate();
    let mut rhs = vec![0.0; dofs.n_velocity()];
    for (k, tri) in mesh.elements.iter().enumerate() {
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let x = mesh.map_point(k, *bary);
            let fx = f(x);
            if !(fx[0].is_finite() && fx[1].is_finite()) {
                return Err(FemError::NonFiniteForcing { x: x[0], y: x[1] });
            }
            for (a, lam) in bary.iter().enumerate() {
                for c in 0..2 {
                    if let Some(i) = dofs.velocity_dof(tri[a], c) {
                        rhs[i] += mesh.area(k) * w * lam * fx[c];
                    }
                }
            }
        }
    }
    Ok(rhs)
}

/// All blocks at one Picard state.
#[derive(Debug, Clone)]
pub struct StabilisedSystem {
    pub dofs: DofMap,
    pub a: SparseMatrix,
    pub n: SparseMatrix,
    pub b: SparseMatrix,
    pub s: SparseMatrix,
    pub rhs_u: Vec<f64>,
    pub mean_row: Vec<f64>,
}

impl StabilisedSystem {
    /// The bordered saddle point matrix.
    pub fn matrix(&self) -> SparseMatrix {
        let nu = self.dofs.n_velocity();
        let np = self.dofs.n_pressure();
        let mut t = Vec::new();
        for (i, j, v) in entries(&self.a).into_iter().chain(entries(&self.n)) {
            t.push(Triplet::new(i, j, v));
        }
        for (k, j, v) in entries(&self.b) {
            t.push(Triplet::new(nu + k, j, v));
            t.push(Triplet::new(j, nu + k, -v));
        }
        for (k, l, v) in entries(&self.s) {
            t.push(Triplet::new(nu + k, nu + l, v));
        }
        for (k, &area) in self.mean_row.iter().enumerate() {
            t.push(Triplet::new(nu + np, nu + k, area));
            t.push(Triplet::new(nu + k, nu + np, area));
        }
        let n = self.dofs.n_total();
        build(n, n, &t)
    }

    /// The same system with the multiplier removed and the first pressure
    /// row replaced by `p_0 = 0`.
    ///
    /// The pressure rows sum to zero for any velocity vanishing on the
    /// boundary, so the dropped row is redundant and the multiplier of a
    /// consistent system is zero. Shifting the pressure to zero mean
    /// afterwards recovers the bordered solution without a dense row, which
    /// keeps sparse factorisations cheap.
    pub fn pinned_matrix(&self) -> SparseMatrix {
        let nu = self.dofs.n_velocity();
        let mut t = Vec::new();
        for (i, j, v) in entries(&self.a).into_iter().chain(entries(&self.n)) {
            t.push(Triplet::new(i, j, v));
        }
        for (k, j, v) in entries(&self.b) {
            if k != 0 {
                t.push(Triplet::new(nu + k, j, v));
            }
            t.push(Triplet::new(j, nu + k, -v));
        }
        for (k, l, v) in entries(&self.s) {
            if k != 0 {
                t.push(Triplet::new(nu + k, nu + l, v));
            }
        }
        t.push(Triplet::new(nu, nu, 1.0));
        let n = nu + self.dofs.n_pressure();
        build(n, n, &t)
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut out = self.rhs_u.clone();
        out.resize(self.dofs.n_total(), 0.0);
        out
    }

    /// `matrix() * x` computed block by block.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let nu = self.dofs.n_velocity();
        let np = self.dofs.n_pressure();
        let (u, rest) = x.split_at(nu);
        let (p, lambda) = rest.split_at(np);
        let mut top = spmv(&self.a, u);
        for (t, v) in top.iter_mut().zip(spmv(&self.n, u)) {
            *t += v;
        }
        for (t, v) in top.iter_mut().zip(spmv_transpose(&self.b, p)) {
            *t -= v;
        }
        let mut mid = spmv(&self.b, u);
        for ((m, v), area) in mid.iter_mut().zip(spmv(&self.s, p)).zip(&self.mean_row) {
            *m += v + area * lambda[0];
        }
        let last: f64 = p.iter().zip(&self.mean_row).map(|(p, a)| p * a).sum();
        top.extend(mid);
        top.push(last);
        top
    }
}

/// Assembles every block around the Picard state `(u_k, p_k)`.
///
/// `linearise_viscosity = false` and `with_convection = false` give the
/// Stokes system used as initial guess.
pub fn assemble_system(
    mesh: &FineMesh,
    params: &PowerLawParams,
    u_k: &P1VectorField,
    p_k: &P0Field,
    rhs_u: Vec<f64>,
    linearise_viscosity: bool,
    with_convection: bool,
) -> Result<(StabilisedSystem, ViscosityRange)> {
    let dofs = DofMap::new(mesh);
    let (a, range) = if linearise_viscosity {
        assemble_viscous(mesh, &dofs, u_k, params)?
    } else {
        (
            assemble_weighted_laplacian(mesh, &dofs, &vec![1.0; mesh.n_elements()]),
            ViscosityRange { min: 1.0, max: 1.0 },
        )
    };
    let n = if with_convection {
        let beta = crate::stabilisation::lift(mesh, u_k, p_k, params);
        assemble_convection(mesh, &dofs, &beta)
    } else {
        build(dofs.n_velocity(), dofs.n_velocity(), &[])
    };
    let b = assemble_div_pressure(mesh, &dofs);
    let s = assemble_stabilisation(mesh, params);
    Ok((
        StabilisedSystem {
            dofs,
            a,
            n,
            b,
            s,
            rhs_u,
            mean_row: mesh.areas().to_vec(),
        },
        range,
    ))
}

/// Residual of the nonlinear discrete equations at `(u, p)`, evaluated
/// element by element without the assembled blocks.
///
/// Velocity rows hold `(ν(u)∇u, ∇φ) - (L(u,p) ⊗ u, ∇φ) - (p, div φ) - ⟨f, φ⟩`
/// and pressure rows `(χ_K, div u) + s(p, χ_K)`.
pub fn nonlinear_residual(
    mesh: &FineMesh,
    dofs: &DofMap,
    params: &PowerLawParams,
    u: &P1VectorField,
    p: &P0Field,
    rhs_u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rule = QuadratureRule::forms();
    let lifted = crate::stabilisation::lift(mesh, u, p, params);
    let nu = element_viscosities(mesh, u, params)?;
    let mut res_u: Vec<f64> = rhs_u.iter().map(|f| -f).collect();
    let mut res_p = vec![0.0; dofs.n_pressure()];
    for (k, tri) in mesh.elements.iter().enumerate() {
        let area = mesh.area(k);
        let grads = mesh.barycentric_gradients(k);
        let g = u.gradient(mesh, k);
        let div = g[0][0] + g[1][1];
        res_p[k] += area * div;
        for a in 0..3 {
            for c in 0..2 {
                let Some(i) = dofs.velocity_dof(tri[a], c) else {
                    continue;
                };
                // ∇φ for φ = λ_a e_c has a single non-zero row c
                let viscous = nu[k] * area * (g[c][0] * grads[a][0] + g[c][1] * grads[a][1]);
                let convective: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(bary, w)| {
                        let b = lifted.evaluate(mesh, k, *bary);
                        let uc = u.evaluate(mesh, k, *bary)[c];
                        w * uc * (b[0] * grads[a][0] + b[1] * grads[a][1])
                    })
                    .sum::<f64>()
                    * area;
                let pressure = p.values[k] * area * grads[a][c];
                res_u[i] += viscous - convective - pressure;
            }
        }
    }
    for f in stabilised_facets(mesh) {
        let facet = &mesh.facets()[f];
        let w = params.tau(facet.length) * facet.length * facet.jump(&p.values);
        res_p[facet.plus] += w;
        res_p[facet.minus.expect("interior facet")] -= w;
    }
    Ok((res_u, res_p))
}
