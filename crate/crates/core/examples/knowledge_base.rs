//! Germplasm screening and seed price lookup against the bundled tables.
//!
//! ```text
//! cargo run --example knowledge_base
//! ```

use std::path::PathBuf;

use breedkit::kb::{load_germplasm, load_prices, price_consistent, query_price, screen_germplasm, Predicate, ScreeningDefaults, ScreeningTarget};
use chrono::NaiveDate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/scene");
    let germplasm = load_germplasm(dir.join("germplasm.csv"))?;
    let defaults = ScreeningDefaults::default();

    let target: ScreeningTarget = "HQ".parse()?;
    for r in screen_germplasm(&germplasm, defaults.criteria(target))? {
        println!("high quality: {}", r.variety_name);
    }
    let custom: Vec<Predicate> = vec!["plant_height<=80".parse()?];
    for r in screen_germplasm(&germplasm, &custom)? {
        println!("plant_height<=80: {}", r.variety_name);
    }

    let prices = load_prices(dir.join("prices.csv"))?;
    let date = NaiveDate::from_ymd_opt(2024, 6, 3).ok_or("bad date")?;
    for p in query_price(&prices, "Miyun District", date, None)? {
        println!(
            "{} {} on {}: {:.2} (answer {:.2} consistent: {})",
            p.observation_point,
            p.variety_name,
            p.date,
            p.price,
            p.price * 1.08,
            price_consistent(p.price * 1.08, &p)
        );
    }
    Ok(())
}
