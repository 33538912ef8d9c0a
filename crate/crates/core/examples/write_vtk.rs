//! Solves a shear-thinning case and writes the solution as legacy VTK.
//!
//! Usage: `cargo run --example write_vtk -- [path]`
use powerlaw_fem::io::write_vtk;
use powerlaw_fem::manufactured::case_m1;
use powerlaw_fem::verify::solve_level;
use powerlaw_fem::{PowerLawParams, SolverConfig};

fn main() -> powerlaw_fem::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "solution.vtk".into());
    let r = 1.5;
    let params = PowerLawParams::new(r, 2)?;
    let config = SolverConfig::for_exponent(r);
    let (mesh, state, data) = solve_level(&case_m1(), &params, 4, 0, &config)?;
    write_vtk(&mesh, &state, &config.effective_params(&params)?, &path)?;
    println!("{} iterations, wrote {path}", data.iterations);
    Ok(())
}
