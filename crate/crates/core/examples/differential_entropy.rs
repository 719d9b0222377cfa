//! EigenScore as a differential-entropy estimate: for isotropic Gaussian
//! embeddings the natural-log score moves with the closed-form entropy of
//! the generating distribution as its scale changes.

use eigenscore::{differential_entropy_gaussian, eigenscore, LogBase};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> eigenscore::Result<()> {
    let (k, d, seeds) = (64, 3, 200);
    println!("{:>6} {:>14} {:>14}", "sigma", "entropy", "mean score");
    for sigma in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let cov = DMatrix::<f64>::identity(d, d) * (sigma * sigma);
        let h = differential_entropy_gaussian(&cov)?;
        let mut total = 0.0;
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = DMatrix::from_fn(k, d, |_, _| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
            total += eigenscore(&z, 1e-3, LogBase::E)?.score;
        }
        println!("{sigma:>6} {h:>14.4} {:>14.4}", total / seeds as f64);
    }
    Ok(())
}
