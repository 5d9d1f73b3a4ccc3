//! Scores the bundled benchmark trials and reasoning ballots.
//!
//! ```text
//! cargo run --example benchmark_scoring -- [TRIALS.csv BALLOTS.csv]
//! ```

use std::path::PathBuf;

use breedkit::bench::{build_report, load_ballots, load_trials};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/scene");
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let trials = load_trials(args.next().unwrap_or_else(|| dir.join("trials.csv")))?;
    let ballots = load_ballots(args.next().unwrap_or_else(|| dir.join("ballots.csv")))?;
    let report = build_report(&trials, &ballots)?;

    for row in &report.accuracy {
        let score = match (row.r2, row.rmse, row.proportion) {
            (Some(r2), Some(rmse), _) => format!("R² {r2:.3}, RMSE {rmse:.3}"),
            (_, _, Some(p)) => format!("{:.0}%", 100.0 * p),
            _ => "n/a".into(),
        };
        println!("{:<10}{:<8}{:>4} trials  {score}", row.model_id, row.subtask.to_string(), row.n_trials);
    }
    for row in &report.stability {
        println!("{:<10}{:<8}{:<13}{}/{}", row.model_id, row.subtask.to_string(), format!("{:?}", row.protocol), row.n_pass, row.n_trials);
    }
    for row in report.reasoning.iter().flatten() {
        println!("{:<10}{:<20}{:>3} points, share {:.3}", row.model_id, row.axis, row.total_score, row.proportion);
    }
    Ok(())
}
