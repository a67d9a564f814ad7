//! Quantiles and the mean/variance confidence band used for noisy data.

use ecfm::stats::{chi2_quantile, confidence_bounds, normal_quantile, sample_moments, sample_noise, NoiseModel};

fn main() -> ecfm::Result<()> {
    println!("z(0.975) = {:.4}", normal_quantile(0.975)?);
    println!("chi2(0.025, 224) = {:.4}", chi2_quantile(0.025, 224)?);
    println!("chi2(0.975, 224) = {:.4}", chi2_quantile(0.975, 224)?);

    let sigma = 0.05;
    let b = confidence_bounds(sigma, 225, 0.05)?;
    println!("mean in [{:.3e}, {:.3e}], variance in [{:.3e}, {:.3e}]", b.l1, b.l2, b.p1, b.p2);
    let mut inside = 0;
    for seed in 0..200 {
        let e = sample_noise(&NoiseModel { sigma, seed }, 225);
        let (m, v) = sample_moments(&e)?;
        inside += b.contains(m, v) as usize;
    }
    println!("{inside}/200 noise draws fall inside the band");
    Ok(())
}
