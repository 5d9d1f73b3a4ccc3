use std::path::Path;

use breedkit::fusion::load_plot_features;
use breedkit::pipeline::scene::{self, ScenePlot, PLOTS};

fn rel_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1.0)
}

fn vis(red: f64, green: f64, nir: f64) -> [f64; 5] {
    let ndvi = (nir - red) / (nir + red);
    [ndvi, 1.5 * (nir - red) / (nir + red + 0.5), (ndvi * ndvi).tanh(), nir * ndvi, (red - green) / nir]
}

/// Every plot feature in closed form from the scene parameters.
fn expected(p: &ScenePlot) -> Vec<(&'static str, f64)> {
    let [_, g, r, _, n] = p.ms;
    let ms = vis(r, g, n);
    // HS channels: 500, 560, 650, 680, 750, 840 nm
    let hs = vis(p.hs[2], p.hs[1], p.hs[5]);
    let psri_hs = (p.hs[3] - p.hs[0]) / p.hs[4];
    let plot_cells = 64.0;
    let ring_cells = 36.0;
    let counts = p.head_counts;
    vec![
        ("NDVI_MS", ms[0]),
        ("SAVI_MS", ms[1]),
        ("kNDVI_MS", ms[2]),
        ("NIRv_MS", ms[3]),
        ("PSRI_MS", ms[4]),
        ("NDVI_HS", hs[0]),
        ("SAVI_HS", hs[1]),
        ("kNDVI_HS", hs[2]),
        ("NIRv_HS", hs[3]),
        ("PSRI_HS", psri_hs),
        // half the cells sit at base + step; the 95th percentile lands there
        ("CH", p.canopy_base + p.canopy_step),
        // 32 cells deviate by `step` from the lowest plane and 64 by step/2
        // from the mean plane, each 0.25 m²
        ("CV", 8.0 * p.canopy_step),
        ("FVC", p.vegetation_cells as f64 / plot_cells),
        ("PL_ratio", p.lodging_cells as f64 / plot_cells),
        ("WL_ratio", p.weed_cells as f64 / (plot_cells + ring_cells)),
        ("WH_density", counts.iter().sum::<f64>() / counts.len() as f64),
        ("SPAD", p.spad),
        ("LAI", p.lai),
        ("measured_CH", p.measured_ch),
    ]
}

#[test]
fn golden_file_matches_closed_forms() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/golden/features.csv");
    let recs = load_plot_features(&golden).unwrap();
    assert_eq!(recs.len(), 3);
    let labels = [("no_lodging", "no_weeds"), ("slight", "slight"), ("severe", "moderate")];
    for ((rec, p), (pl, wl)) in recs.iter().zip(PLOTS.iter()).zip(labels) {
        assert_eq!(rec.plot_id, p.plot_id);
        assert_eq!(rec.germplasm_id, p.germplasm_id);
        assert_eq!(rec.date.to_string(), scene::DATE);
        for (name, want) in expected(p) {
            let got = rec.features[name];
            assert!(rel_close(got, want), "{} {name}: {got} vs {want}", p.plot_id);
        }
        assert_eq!(rec.labels["PL_level"], pl);
        assert_eq!(rec.labels["WL_level"], wl);
        assert_eq!(rec.yield_kg_ha, Some(p.yield_kg_ha));
    }
}

#[test]
fn bundled_scene_is_up_to_date() {
    let dir = tempfile::tempdir().unwrap();
    scene::write_scene(dir.path()).unwrap();
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scene");
    let mut names: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() > 20);
    for n in names {
        let fresh = std::fs::read(dir.path().join(&n)).unwrap();
        let shipped = std::fs::read(bundled.join(&n)).unwrap();
        assert!(fresh == shipped, "{n:?} is stale; rerun the generate_scene example");
    }
}
