//! Applies the Fortin operator to a random bubble field and checks that it
//! preserves the divergence moments on every macro element.
use powerlaw_fem::verify::{fortin_defect, level_mesh, BubblePolynomial};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> powerlaw_fem::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for level in 0..3 {
        let mesh = level_mesh(2, level)?;
        let v = BubblePolynomial::random(&mut rng);
        println!(
            "n = {:>2}: sup_q (div(v - Iv), q_H) / ||q_H|| = {:.3e}",
            2 << level,
            fortin_defect(&mesh, &v)?
        );
    }
    Ok(())
}
