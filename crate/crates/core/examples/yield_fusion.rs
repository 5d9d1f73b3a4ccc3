//! Ridge yield model on a planted four-domain benchmark: cross-validated
//! accuracy and a domain ablation.
//!
//! ```text
//! cargo run --example yield_fusion -- [N] [TARGET_R2]
//! ```

use breedkit::fusion::{fit_ridge, kfold_cv, noise_sd_for_r2, planted_benchmark, theoretical_r2, Domain};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(300);
    let target: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.8);

    let sd = noise_sd_for_r2(target)?;
    let m = planted_benchmark(n, sd, 7)?;
    println!("n = {n}, noise sd {sd:.3}, theoretical R² {:.3}", theoretical_r2(sd));

    let model = fit_ridge(&m, 1.0)?;
    for (name, w) in model.named_weights() {
        println!("  {name:<24}{w:>9.4}");
    }

    let subsets: [(&str, &[Domain]); 4] = [
        ("remote sensing", &[Domain::RemoteSensing]),
        ("+ phenotyping", &[Domain::RemoteSensing, Domain::Phenotyping]),
        ("+ weather", &[Domain::RemoteSensing, Domain::Phenotyping, Domain::Weather]),
        ("all domains", &Domain::ALL),
    ];
    for (label, domains) in subsets {
        let cv = kfold_cv(&m.select_domains(domains)?, 5, 1.0, 7)?;
        println!("{label:<16} 5-fold R² {:.3}  RMSE {:.3}", cv.pooled.r2, cv.pooled.rmse);
    }
    Ok(())
}
