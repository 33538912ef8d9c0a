//! Refinement study for the manufactured case.
//!
//! Usage: `cargo run --release --example convergence_study -- [r] [levels] [n0]`
use powerlaw_fem::manufactured::case_m1;
use powerlaw_fem::verify::run_convergence_study;
use powerlaw_fem::{PowerLawParams, SolverConfig};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args()
        .nth(i)
        .and_then(|s| s.parse().ok())
        .unwrap_or(default)
}

fn main() -> powerlaw_fem::Result<()> {
    let (r, levels, n0) = (arg(1, 2.0), arg(2, 4), arg(3, 2));
    let params = PowerLawParams::new(r, 2)?;
    let study = run_convergence_study(
        &case_m1(),
        &params,
        n0,
        levels,
        &SolverConfig::for_exponent(r),
    )?;
    print!("{}", study.table.to_csv());
    for l in &study.levels {
        if let Ok(d) = &l.outcome {
            println!(
                "# level {}: {} Picard iterations, s(p_h, p_h) = {:.3e}",
                l.level, d.iterations, d.s_php
            );
        }
    }
    Ok(())
}
