//! Solves the r = 2 problem for the manufactured case and prints the
//! Picard log and the errors.
use powerlaw_fem::manufactured::case_m1;
use powerlaw_fem::solver::picard_solve;
use powerlaw_fem::verify::{error_norms, level_mesh};
use powerlaw_fem::{PowerLawParams, SolverConfig};

fn main() -> powerlaw_fem::Result<()> {
    let params = PowerLawParams::new(2.0, 2)?;
    let case = case_m1();
    let mesh = level_mesh(4, 1)?;
    let state = picard_solve(
        &mesh,
        &params,
        &|x| case.forcing(x, &params),
        &SolverConfig::for_exponent(2.0),
    )?;
    print!("{}", state.log_csv());
    let e = error_norms(&mesh, &case, &state, &params);
    println!(
        "|u-u_h|_1,2 = {:.4e}  ||u-u_h||_0,4 = {:.4e}  ||p-p_h||_0,2 = {:.4e}  lambda = {:.2e}",
        e.velocity_w1r, e.velocity_l2rt, e.pressure_lrt, state.multiplier
    );
    Ok(())
}
