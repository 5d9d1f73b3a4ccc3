//! A small synthetic acquisition: three square plots on a 36 × 12 grid of
//! 0.5 m cells, with band values constant inside each plot so every plot
//! feature has a closed form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geodata::{save_point_cloud, save_raster, GridGeometry, Point3, PointCloud, RasterGrid, DEFAULT_NODATA};

pub const CELL_SIZE: f64 = 0.5;
pub const N_COLS: usize = 36;
pub const N_ROWS: usize = 12;
/// Plot side in cells.
pub const PLOT_CELLS: usize = 8;
/// Weed ring used by the scene config, meters from the plot edge.
pub const WEED_RING: (f64, f64) = (0.0, 0.5);
pub const ALTITUDE_M: f64 = 3.0;
/// Field of view giving a 1 m × 1 m footprint at 3 m.
pub const FOV_DEG: f64 = 18.924644416051237;
pub const DATE: &str = "2024-05-20";

/// Multispectral band names with their order in [`ScenePlot::ms`].
pub const MS_ORDER: [&str; 5] = ["blue", "green", "red", "red_edge", "nir"];
/// Hyperspectral channel centers with their order in [`ScenePlot::hs`].
pub const HS_WAVELENGTHS: [f64; 6] = [500.0, 560.0, 650.0, 680.0, 750.0, 840.0];

const SOIL_MS: [f64; 5] = [0.08, 0.12, 0.18, 0.22, 0.25];
const SOIL_HS: [f64; 6] = [0.09, 0.12, 0.18, 0.19, 0.23, 0.26];
const GROUND_Z: f64 = 100.0;
const GROUND_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenePlot {
    pub plot_id: &'static str,
    pub germplasm_id: &'static str,
    pub ms: [f64; 5],
    pub hs: [f64; 6],
    /// Canopy height of even plot columns; odd columns add `canopy_step`.
    pub canopy_base: f64,
    pub canopy_step: f64,
    /// Leading plot cells (row-major from the top) flagged in each mask.
    pub vegetation_cells: usize,
    pub lodging_cells: usize,
    pub weed_cells: usize,
    pub head_counts: &'static [f64],
    pub spad: f64,
    pub lai: f64,
    pub measured_ch: f64,
    pub yield_kg_ha: f64,
}

pub const PLOTS: [ScenePlot; 3] = [
    ScenePlot {
        plot_id: "p01",
        germplasm_id: "Nongda 3486",
        ms: [0.04, 0.08, 0.05, 0.30, 0.50],
        hs: [0.05, 0.09, 0.06, 0.07, 0.42, 0.52],
        canopy_base: 0.80,
        canopy_step: 0.10,
        vegetation_cells: 64,
        lodging_cells: 0,
        weed_cells: 0,
        head_counts: &[48.0, 52.0],
        spad: 52.1,
        lai: 4.6,
        measured_ch: 0.86,
        yield_kg_ha: 7420.0,
    },
    ScenePlot {
        plot_id: "p02",
        germplasm_id: "Jimai 22",
        ms: [0.05, 0.10, 0.08, 0.28, 0.42],
        hs: [0.06, 0.11, 0.09, 0.10, 0.36, 0.44],
        canopy_base: 0.70,
        canopy_step: 0.08,
        vegetation_cells: 48,
        lodging_cells: 16,
        weed_cells: 25,
        head_counts: &[40.0, 44.0, 42.0],
        spad: 47.3,
        lai: 3.8,
        measured_ch: 0.74,
        yield_kg_ha: 6310.0,
    },
    ScenePlot {
        plot_id: "p03",
        germplasm_id: "Zhongmai 578",
        ms: [0.07, 0.12, 0.14, 0.24, 0.30],
        hs: [0.08, 0.13, 0.15, 0.16, 0.27, 0.31],
        canopy_base: 0.55,
        canopy_step: 0.12,
        vegetation_cells: 40,
        lodging_cells: 48,
        weed_cells: 50,
        head_counts: &[30.0],
        spad: 41.0,
        lai: 2.7,
        measured_ch: 0.60,
        yield_kg_ha: 4980.0,
    },
];

pub fn geometry() -> GridGeometry {
    GridGeometry::new(N_COLS, N_ROWS, CELL_SIZE, 0.0, 0.0).expect("valid scene geometry")
}

/// Plot rectangle `(x0, y0, x1, y1)` in meters.
pub fn plot_bounds(i: usize) -> (f64, f64, f64, f64) {
    let x0 = 1.0 + 6.0 * i as f64;
    (x0, 1.0, x0 + 4.0, 5.0)
}

/// `(plot, local index)` of a grid cell, local index row-major from the
/// plot's top-left cell.
fn locate(row: usize, col: usize) -> Option<(usize, usize, usize)> {
    // plot rows 2..=9, plot i columns 2 + 12 i ..= 9 + 12 i
    if !(2..2 + PLOT_CELLS).contains(&row) {
        return None;
    }
    let i = col / 12;
    let c0 = 2 + 12 * i;
    if i >= PLOTS.len() || !(c0..c0 + PLOT_CELLS).contains(&col) {
        return None;
    }
    Some((i, row - 2, col - c0))
}

fn layer(f: impl Fn(usize, usize) -> f64) -> RasterGrid {
    let g = geometry();
    let mut values = Vec::with_capacity(g.len());
    for row in 0..N_ROWS {
        for col in 0..N_COLS {
            values.push(f(row, col));
        }
    }
    RasterGrid::new(g, DEFAULT_NODATA, values).expect("scene layer")
}

fn mask(count: impl Fn(&ScenePlot) -> usize) -> RasterGrid {
    layer(|row, col| match locate(row, col) {
        Some((i, lr, lc)) if lr * PLOT_CELLS + lc < count(&PLOTS[i]) => 1.0,
        _ => 0.0,
    })
}

fn ground(col: usize) -> f64 {
    GROUND_Z + GROUND_SLOPE * col as f64
}

fn cloud(f: impl Fn(usize, usize) -> f64) -> PointCloud {
    let g = geometry();
    let mut pts = Vec::with_capacity(g.len());
    for row in 0..N_ROWS {
        for col in 0..N_COLS {
            let (x, y) = g.cell_center(row, col);
            pts.push(Point3::new(x, y, f(row, col)));
        }
    }
    PointCloud::new(pts)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

const WEATHER_DAYS: [(&str, f64, f64, f64, f64, f64); 6] = [
    ("2024-03-10", 6.5, -3.0, 2.0, 95.0, 2.8),
    ("2024-03-25", 9.8, -1.2, 0.0, 110.0, 3.1),
    ("2024-04-10", 13.4, 2.5, 8.5, 132.0, 2.6),
    ("2024-04-25", 16.9, 5.1, 12.0, 148.0, 2.2),
    ("2024-05-10", 20.2, 8.7, 4.5, 165.0, 2.0),
    ("2024-05-20", 22.1, 10.4, 0.0, 171.0, 1.9),
];

const GERMPLASM: &str = "\
variety_name,origin,crude_protein,lysine,sedimentation_value,stripe_rust,leaf_rust,powdery_mildew,drought,cold,maturity,plant_height,thousand_grain_weight,grain_hardness
Jimai 22,Shandong,13.2,0.38,31,MR,MS,S,2,3,medium_early,72,43.6,hard
Nongda 3486,Beijing,14.6,0.41,46,R,MR,MR,2,2,early,78,41.2,hard
Shi 4185,Hebei,12.8,0.36,28,S,S,MS,3,2,medium,83,39.0,soft
Zhongmai 578,Henan,15.1,0.43,52,MR,R,I,3,3,medium,76,46.5,hard
";

const PRICES: &str = "\
observation_point,variety_name,price,specification,planting_area,date
Miyun District,Jimai 22,120,25,Beijing,2024-06-01
Miyun District,Nongda 3486,150,25,Beijing,2024-06-01
Miyun District,Zhongmai 578,138,25,Beijing,2024-06-01
Miyun District,Nongda 3486,145,25,Beijing,2024-05-01
Shunyi District,Nongda 3486,155,25,Beijing,2024-06-01
";

const DOCS: &str = "\
doc_id,category,title,body,source
c001,cultivation,Winter wheat sowing,Sow winter wheat in early October at 300 seeds per square meter.,extension notes
c002,cultivation,Spring irrigation,Irrigate at jointing when soil moisture drops below 60 percent of field capacity.,extension notes
p001,plant_protection,Stripe rust control,Spray triadimefon at first sign of stripe rust pustules.,plant protection station
p002,plant_protection,Aphid control,Monitor aphids at heading and treat above 500 per 100 tillers.,plant protection station
";

const SFT: &str = "\
{\"prompt\":[0],\"answer\":[2]}
{\"prompt\":[1],\"answer\":[3]}
{\"prompt\":[0],\"answer\":[2]}
";

const PREFERENCES: &str = "\
{\"prompt\":[0],\"chosen\":[2],\"rejected\":[1]}
{\"prompt\":[0],\"chosen\":[2],\"rejected\":[3]}
{\"prompt\":[1],\"chosen\":[3],\"rejected\":[0]}
{\"prompt\":[1],\"chosen\":[3],\"rejected\":[2]}
";

const PROMPTS: &str = "\
{\"prompt\":[0]}
{\"prompt\":[1]}
";

const BALLOTS: &str = "\
test_id,model_id,score,axis
r1,model_a,3,logical_deduction
r1,model_b,2,logical_deduction
r1,model_c,1,logical_deduction
r2,model_a,2,logical_deduction
r2,model_b,3,logical_deduction
r2,model_c,1,logical_deduction
r1,model_a,3,explanation
r1,model_b,1,explanation
r1,model_c,2,explanation
";

fn trials_csv() -> String {
    let mut s = String::from(
        "model_id,task,subtask,question_id,trial_index,answer_numeric,answer_label,judged_correct,reference_value,reference_label,stability_protocol,text_pass\n",
    );
    let models = [("model_a", 1.00), ("model_b", 1.05), ("model_c", 0.80)];
    for (m, (model, scale)) in models.iter().enumerate() {
        for (q, p) in PLOTS.iter().enumerate() {
            let _ = writeln!(
                s,
                "{model},phenotyping_estimation,Yield,y{q},0,{},,,{},,,",
                p.yield_kg_ha * scale,
                p.yield_kg_ha
            );
            let _ = writeln!(
                s,
                "{model},phenotyping_estimation,SPAD,s{q},0,{},,,{},,,",
                p.spad * scale,
                p.spad
            );
        }
        let labels = ["no_weeds", "slight", "moderate"];
        for (q, l) in labels.iter().enumerate() {
            let answer = if (q + m) % 3 == 2 { "severe" } else { l };
            let _ = writeln!(s, "{model},environmental_stress,WL,w{q},0,,{answer},,,{l},,");
        }
        for q in 0..4 {
            let ok = (q + m) % 4 != 3;
            let _ = writeln!(s, "{model},germplasm_screening,HQ,h{q},0,,,{ok},,,,");
        }
        let _ = writeln!(s, "{model},seed_price_query,SP,sp0,0,{},,,150,,,", 150.0 * scale);
        for t in 0..3 {
            let answer = 150.0 * if t == 2 { *scale } else { 1.0 };
            let _ = writeln!(s, "{model},seed_price_query,SP,sp0,{t},{answer},,,150,,consistency,");
            let pass = !(m == 2 && t == 1);
            let _ = writeln!(s, "{model},germplasm_screening,DS,d0,{t},,,,,,robustness,{pass}");
        }
    }
    s
}

fn config_toml() -> String {
    let mut hs = String::new();
    for wl in HS_WAVELENGTHS {
        let _ = write!(hs, "\n  {{ path = \"hs_{wl}.asc\", wavelength_nm = {wl:.1} }},");
    }
    format!(
        r#"output_dir = "out"
seed = 42

[extract]
plots = "plots.csv"
date = {DATE}
ms_bands = {{ blue = "ms_blue.asc", green = "ms_green.asc", red = "ms_red.asc", red_edge = "ms_red_edge.asc", nir = "ms_nir.asc" }}
hs_bands = [{hs}
]
dsm = "dsm.xyz"
dem = "dem.xyz"
vegetation_mask = "vegetation_mask.asc"
lodging_mask = "lodging_mask.asc"
weed_mask = "weed_mask.asc"
weed_ring_inner = {:.1}
weed_ring_outer = {:.1}
head_counts = "head_counts.csv"
altitude_m = {ALTITUDE_M:.1}
fov_h_deg = {FOV_DEG}
fov_v_deg = {FOV_DEG}
ground_truth = "ground_truth.csv"

[fuse]
weather = "weather.csv"
germplasm = "germplasm.csv"
lambda = 1.0
k = 3

[prefopt]
vocab_size = 4
context_length = 1
sft_data = "sft.jsonl"
sft_learning_rate = 1.0
sft_steps = 50
preference_data = "preferences.jsonl"
rm_steps = 200
prompts = "prompts.jsonl"

[prefopt.ppo]
beta = 0.1
iterations = 30
samples_per_prompt = 16

[bench]
trials = "trials.csv"
ballots = "ballots.csv"

[kb]
germplasm = "germplasm.csv"
prices = "prices.csv"
target = "HQ"
observation_point = "Miyun District"
date = 2024-06-03
"#,
        WEED_RING.0, WEED_RING.1
    )
}

/// Writes every input file of the scene plus `scene.toml` into `dir`.
pub fn write_scene(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (k, name) in MS_ORDER.iter().enumerate() {
        let grid = layer(|r, c| locate(r, c).map_or(SOIL_MS[k], |(i, _, _)| PLOTS[i].ms[k]));
        save_raster(&grid, dir.join(format!("ms_{name}.asc")))?;
    }
    for (k, wl) in HS_WAVELENGTHS.iter().enumerate() {
        let grid = layer(|r, c| locate(r, c).map_or(SOIL_HS[k], |(i, _, _)| PLOTS[i].hs[k]));
        save_raster(&grid, dir.join(format!("hs_{wl}.asc")))?;
    }
    save_raster(&mask(|p| p.vegetation_cells), dir.join("vegetation_mask.asc"))?;
    save_raster(&mask(|p| p.lodging_cells), dir.join("lodging_mask.asc"))?;
    save_raster(&mask(|p| p.weed_cells), dir.join("weed_mask.asc"))?;
    save_point_cloud(&cloud(|_, c| ground(c)), dir.join("dem.xyz"))?;
    let canopy = |r: usize, c: usize| match locate(r, c) {
        Some((i, _, lc)) => PLOTS[i].canopy_base + PLOTS[i].canopy_step * (lc % 2) as f64,
        None => 0.0,
    };
    save_point_cloud(&cloud(|r, c| ground(c) + canopy(r, c)), dir.join("dsm.xyz"))?;

    let mut plots = String::from("plot_id,germplasm_id,vertex_index,x,y\n");
    let mut heads = String::from("plot_id,image_id,count\n");
    let mut truth = String::from("plot_id,SPAD,LAI,measured_CH,yield_kg_ha\n");
    for (i, p) in PLOTS.iter().enumerate() {
        let (x0, y0, x1, y1) = plot_bounds(i);
        for (v, (x, y)) in [(x0, y0), (x1, y0), (x1, y1), (x0, y1)].iter().enumerate() {
            let _ = writeln!(plots, "{},{},{v},{x},{y}", p.plot_id, p.germplasm_id);
        }
        for (k, n) in p.head_counts.iter().enumerate() {
            let _ = writeln!(heads, "{},img{k},{n}", p.plot_id);
        }
        let _ = writeln!(truth, "{},{},{},{},{}", p.plot_id, p.spad, p.lai, p.measured_ch, p.yield_kg_ha);
    }
    let mut weather = String::from("site,date,t_mean,dew_point,precip,net_radiation,wind_speed\n");
    for (d, t, dp, pr, nr, ws) in WEATHER_DAYS {
        let _ = writeln!(weather, "{},{d},{t},{dp},{pr},{nr},{ws}", crate::fusion::DEFAULT_SITE);
    }

    let files: [(&str, &str); 13] = [
        ("plots.csv", &plots),
        ("head_counts.csv", &heads),
        ("ground_truth.csv", &truth),
        ("weather.csv", &weather),
        ("germplasm.csv", GERMPLASM),
        ("prices.csv", PRICES),
        ("docs.csv", DOCS),
        ("sft.jsonl", SFT),
        ("preferences.jsonl", PREFERENCES),
        ("prompts.jsonl", PROMPTS),
        ("trials.csv", &trials_csv()),
        ("ballots.csv", BALLOTS),
        ("scene.toml", &config_toml()),
    ];
    for (name, text) in files {
        write(&dir.join(name), text)?;
    }
    Ok(())
}
