//! Stabilised P1/P0 finite elements for the stationary incompressible
//! power-law (r-Laplacian) flow problem
//!
//! ```text
//!   -div(|∇u|^{r-2} ∇u) + div(u ⊗ u) + ∇p = f   in Ω
//!                                   div u = 0   in Ω
//!                                       u = 0   on ∂Ω
//! ```
//!
//! Velocities are continuous piecewise linears, pressures are piecewise
//! constants on a mesh obtained by one red refinement of a macro mesh. The
//! missing inf-sup stability is restored by penalising pressure jumps across
//! facets interior to each macro element, and the advecting velocity in the
//! convection term is replaced by a lifting `L(u_h, p_h)` that adds lowest
//! order Raviart-Thomas functions weighted by the same pressure jumps. At a
//! discrete solution this lifting is exactly solenoidal, so the convection
//! term needs no skew-symmetrisation.
//!
//! Module map:
//!
//! - [`params`]: power-law exponents (conjugate, Sobolev, critical, stabilisation).
//! - [`mesh`]: macro meshes, red refinement and facet topology.
//! - [`quadrature`]: Gauss rules on intervals and triangles.
//! - [`spaces`]: P1 / P0 fields, projections, interpolation and the Fortin operator.
//! - [`stabilisation`]: jump penalty, RT0 basis and the lifting operator.
//! - [`assembly`]: sparse blocks of the Picard-linearised saddle point system.
//! - [`solver`]: Picard iteration and the sparse direct saddle point solve.
//! - [`manufactured`]: closed-form solutions and their forcing.
//! - [`verify`]: invariant checks and refinement studies.
//! - [`io`]: run configuration, CSV and VTK output.

pub mod assembly;
pub mod error;
pub mod io;
pub mod manufactured;
pub mod mesh;
pub mod params;
pub mod quadrature;
pub mod solver;
pub mod spaces;
pub mod stabilisation;
pub mod verify;

pub use error::{FemError, Result};
pub use mesh::{FineMesh, MacroMesh};
pub use params::PowerLawParams;
pub use solver::{SolutionState, SolverConfig};
pub use spaces::{P0Field, P1VectorField};

/// A point (or vector) in the plane.
pub type Point = [f64; 2];
