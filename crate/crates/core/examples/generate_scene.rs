//! Writes the bundled synthetic scene and refreshes the golden feature CSV.
//!
//! ```text
//! cargo run --example generate_scene -- [DIR]
//! ```
//! `DIR` defaults to the crate's `data/scene`.

use std::path::PathBuf;

use breedkit::pipeline::{run, scene, Command, Override, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/scene"));
    scene::write_scene(&dir)?;
    let out = tempfile::tempdir()?;
    let cfg = PipelineConfig::load(
        Some(&dir.join("scene.toml")),
        &[Override::new("output_dir", out.path().to_string_lossy().into_owned())],
    )?;
    run(Command::Extract, &cfg)?;
    let golden = dir.parent().unwrap_or(&dir).join("golden");
    std::fs::create_dir_all(&golden)?;
    std::fs::copy(out.path().join("features.csv"), golden.join("features.csv"))?;
    println!("scene written to {}", dir.display());
    Ok(())
}
