//! Prints the exponents derived from r for a few values in two dimensions.
use powerlaw_fem::params::admissibility_bound;
use powerlaw_fem::PowerLawParams;

fn main() -> powerlaw_fem::Result<()> {
    println!("r must exceed {}", admissibility_bound(2));
    println!(
        "{:>6} {:>8} {:>8} {:>8} {:>8}",
        "r", "r'", "r*", "r~", "alpha"
    );
    for r in [1.2, 1.5, 2.0, 2.5, 3.0, 4.0] {
        let p = PowerLawParams::new(r, 2)?;
        println!(
            "{:>6.2} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            r, p.r_conj, p.r_star, p.r_tilde, p.alpha
        );
    }
    if let Err(e) = PowerLawParams::new(1.0, 2) {
        println!("r = 1: {e}");
    }
    Ok(())
}
