use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

use super::matrix::{Column, Domain, FeatureMatrix};

/// Standard deviation each domain contributes to the planted yield (kg/ha).
pub const DOMAIN_SIGNAL_SD: f64 = 300.0;

const BASE_YIELD: f64 = 6000.0;

/// (column, domain, location, scale, binary)
const LAYOUT: [(&str, Domain, f64, f64, bool); 9] = [
    ("NDVI_MS", Domain::RemoteSensing, 0.70, 0.05, false),
    ("CH", Domain::RemoteSensing, 0.80, 0.10, false),
    ("FVC", Domain::RemoteSensing, 0.85, 0.04, false),
    ("SPAD", Domain::Phenotyping, 45.0, 4.0, false),
    ("LAI", Domain::Phenotyping, 4.0, 0.8, false),
    ("weather_t_mean", Domain::Weather, 12.0, 1.5, false),
    ("weather_precip_total", Domain::Weather, 350.0, 60.0, false),
    ("germplasm_HQ", Domain::Germplasm, 0.0, 1.0, true),
    ("germplasm_DR", Domain::Germplasm, 0.0, 1.0, true),
];

/// Noise standard deviation that yields the given population R² for
/// [`planted_benchmark`].
pub fn noise_sd_for_r2(r2: f64) -> Result<f64> {
    if !(r2 > 0.0 && r2 <= 1.0) {
        return Err(Error::invalid(format!("target R² must be in (0, 1], got {r2}")));
    }
    let signal_var = 4.0 * DOMAIN_SIGNAL_SD * DOMAIN_SIGNAL_SD;
    Ok((signal_var * (1.0 - r2) / r2).sqrt())
}

/// Population R² of the planted model at a given noise level.
pub fn theoretical_r2(noise_sd: f64) -> f64 {
    let s = 4.0 * DOMAIN_SIGNAL_SD * DOMAIN_SIGNAL_SD;
    s / (s + noise_sd * noise_sd)
}

/// Synthetic plots whose yield is linear in nine columns spread over the four
/// domains, each domain contributing equal signal variance, plus Gaussian
/// noise.
pub fn planted_benchmark(n: usize, noise_sd: f64, seed: u64) -> Result<FeatureMatrix> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(Error::invalid(format!("noise sd must be >= 0, got {noise_sd}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let per_domain = |d: Domain| LAYOUT.iter().filter(|c| c.1 == d).count() as f64;

    let p = LAYOUT.len();
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut target = BASE_YIELD;
        for &(_, domain, loc, scale, binary) in &LAYOUT {
            // unit-variance latent driving both the column and the yield
            let z = if binary {
                if rng.random_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                std_normal.sample(&mut rng)
            };
            target += DOMAIN_SIGNAL_SD / per_domain(domain).sqrt() * z;
            x.push(if binary { (z + 1.0) / 2.0 } else { loc + scale * z });
        }
        if noise_sd > 0.0 {
            target += noise_sd * std_normal.sample(&mut rng);
        }
        y.push(target);
    }
    let columns = LAYOUT
        .iter()
        .map(|&(name, domain, ..)| Column { name: name.to_string(), domain })
        .collect();
    FeatureMatrix::new(
        (0..n).map(|i| format!("plot_{i:04}")).collect(),
        (0..n).map(|i| format!("line_{:02}", i % 25)).collect(),
        columns,
        x,
        y,
    )
}
