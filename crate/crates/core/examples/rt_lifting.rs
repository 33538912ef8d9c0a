//! Lifts a random velocity/pressure pair and shows how far the lifting is
//! from being divergence free when (u, p) is not a discrete solution, and
//! how close it gets at one.
use powerlaw_fem::manufactured::case_m1;
use powerlaw_fem::stabilisation::{lift, lift_stability_report, lifted_divergence};
use powerlaw_fem::verify::{level_mesh, solve_level};
use powerlaw_fem::{P0Field, P1VectorField, PowerLawParams, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> powerlaw_fem::Result<()> {
    let params = PowerLawParams::new(2.0, 2)?;
    let mesh = level_mesh(2, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut u = P1VectorField::zeros(&mesh);
    for v in &mut u.values {
        *v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    }
    u.apply_dirichlet(&mesh);
    let p = P0Field::from_values(
        (0..mesh.n_elements())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    );
    let lifted = lift(&mesh, &u, &p, &params);
    println!(
        "random pair: max |div L| = {:.3e}",
        lifted_divergence(&mesh, &lifted).max_abs()
    );
    let report = lift_stability_report(&mesh, &lifted, &params);
    println!("  ||L|| / (|u|_1,r + s^1/2) = {:.3}", report.ratio());

    let (mesh, state, _) =
        solve_level(&case_m1(), &params, 2, 1, &SolverConfig::for_exponent(2.0))?;
    let lifted = lift(&mesh, &state.u, &state.p, &params);
    println!(
        "discrete solution: max |div L| = {:.3e}",
        lifted_divergence(&mesh, &lifted).max_abs()
    );
    Ok(())
}
