//! Command-line orchestration: config loading, subcommand runners and the
//! exit-code contract (0 ok, 1 module error, 2 invalid config).

mod config;
mod extract;
pub mod scene;

pub use config::{
    BenchConfig, ExtractConfig, FuseConfig, HsBandConfig, KbConfig, Override, PipelineConfig,
    PpoConfig, PrefoptConfig,
};
pub use extract::{
    extract_features, load_elevation, read_ground_truth, read_head_counts, Camera, ExtractParams,
    GroundTruth, Scene,
};

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::bench::{build_report, load_ballots, load_trials, write_report};
use crate::error::{Error, Result};
use crate::fusion::{assemble, kfold_cv, load_plot_features, load_weather, metrics_json, write_plot_features, write_scatter_csv, Domain};
use crate::geodata::{load_plots, load_raster, ElevationAggregator};
use crate::kb::{load_germplasm, load_prices, query_price, screen_germplasm, Predicate, ScreeningDefaults, ScreeningTarget, GERMPLASM_FIELDS};
use crate::prefopt::{
    load_jsonl, train_reward_model, train_rlhf, train_sft, validate_preferences,
    write_diagnostics_csv, PreferenceExample, PromptExample, ReferencePolicy, RewardModel,
    RlhfConfig, SftExample, TabularPolicy,
};
use crate::spectral::{Band, BandSet, IndexParams, SensorKind, MS_CENTERS_NM};

/// A config problem, reported with the dotted path of the field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Module(#[from] Error),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Module(_) => 1,
        }
    }

    /// Machine-readable failure line.
    pub fn summary(&self, command: Command) -> Value {
        match self {
            PipelineError::Config(c) => json!({
                "command": command.name(),
                "status": "error",
                "exit_code": 2,
                "error": "InvalidConfig",
                "field": c.field,
                "message": c.message,
            }),
            PipelineError::Module(e) => json!({
                "command": command.name(),
                "status": "error",
                "exit_code": 1,
                "error": e.name(),
                "message": e.to_string(),
            }),
        }
    }
}

impl From<csv::Error> for PipelineError {
    fn from(e: csv::Error) -> Self {
        PipelineError::Module(e.into())
    }
}

type Run<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Extract,
    Fuse,
    Sft,
    Rm,
    Ppo,
    Bench,
    KbScreen,
    KbPrice,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Extract => "extract",
            Command::Fuse => "fuse",
            Command::Sft => "prefopt sft",
            Command::Rm => "prefopt rm",
            Command::Ppo => "prefopt ppo",
            Command::Bench => "bench",
            Command::KbScreen => "kb screen",
            Command::KbPrice => "kb price",
        }
    }
}

/// Runs one subcommand and returns its summary line. Every artifact is
/// written under the configured output directory.
pub fn run(command: Command, cfg: &PipelineConfig) -> Run<Value> {
    let mut summary = match command {
        Command::Extract => run_extract(cfg)?,
        Command::Fuse => run_fuse(cfg)?,
        Command::Sft => run_sft(cfg)?,
        Command::Rm => run_rm(cfg)?,
        Command::Ppo => run_ppo(cfg)?,
        Command::Bench => run_bench(cfg)?,
        Command::KbScreen => run_kb_screen(cfg)?,
        Command::KbPrice => run_kb_price(cfg)?,
    };
    let obj = summary.as_object_mut().expect("summaries are objects");
    obj.insert("command".into(), command.name().into());
    obj.insert("status".into(), "ok".into());
    Ok(summary)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    create_parent(path)?;
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
}

fn write_losses(path: &Path, losses: &[f64]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    wtr.write_record(["step", "loss"])?;
    for (i, l) in losses.iter().enumerate() {
        wtr.write_record([i.to_string(), l.to_string()])?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

/// Output path relative to the output directory, for summaries.
fn rel(cfg: &PipelineConfig, p: &Path) -> String {
    p.strip_prefix(cfg.output_dir())
        .unwrap_or(p)
        .to_string_lossy()
        .replace('\\', "/")
}

fn positive(v: Option<f64>, field: &str) -> Run<f64> {
    match v {
        Some(x) if x.is_finite() && x > 0.0 => Ok(x),
        Some(x) => Err(ConfigError::new(field, format!("must be > 0, got {x}")).into()),
        None => Err(ConfigError::new(field, "is required when head_counts is set").into()),
    }
}

fn aggregator(raw: &str, field: &str) -> Run<ElevationAggregator> {
    raw.parse()
        .map_err(|_| ConfigError::new(field, format!("unknown aggregator `{raw}`")).into())
}

fn run_extract(cfg: &PipelineConfig) -> Run<Value> {
    let ec = &cfg.extract;
    let plots_path = cfg.input(&ec.plots, "extract.plots")?;
    let date = ec.date.ok_or_else(|| ConfigError::new("extract.date", "is required"))?;
    let output = cfg.output(&ec.output, "extract.output")?;
    if ec.ms_bands.is_empty() {
        return Err(ConfigError::new("extract.ms_bands", "is required").into());
    }
    if ec.hs_bands.is_empty() {
        return Err(ConfigError::new("extract.hs_bands", "is required").into());
    }
    let mut ms_paths = BTreeMap::new();
    for (name, p) in &ec.ms_bands {
        let field = format!("extract.ms_bands.{name}");
        let wl = MS_CENTERS_NM
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, wl)| *wl)
            .ok_or_else(|| ConfigError::new(&field, "is not a multispectral band name"))?;
        ms_paths.insert(name.clone(), (cfg.existing(p, &field)?, wl));
    }
    let mut hs_paths = Vec::new();
    for (i, b) in ec.hs_bands.iter().enumerate() {
        hs_paths.push((cfg.existing(&b.path, &format!("extract.hs_bands[{i}].path"))?, b.wavelength_nm));
    }
    let dsm_path = cfg.input(&ec.dsm, "extract.dsm")?;
    let dem_path = cfg.input(&ec.dem, "extract.dem")?;
    let dsm_agg = aggregator(&ec.dsm_aggregator, "extract.dsm_aggregator")?;
    let dem_agg = aggregator(&ec.dem_aggregator, "extract.dem_aggregator")?;
    let veg_path = cfg.input(&ec.vegetation_mask, "extract.vegetation_mask")?;
    let lodging_path = cfg.input(&ec.lodging_mask, "extract.lodging_mask")?;
    let weed_path = cfg.input(&ec.weed_mask, "extract.weed_mask")?;
    let heads_path = ec
        .head_counts
        .as_ref()
        .map(|p| cfg.existing(p, "extract.head_counts"))
        .transpose()?;
    let camera = match heads_path {
        Some(_) => Some(Camera {
            altitude_m: positive(ec.altitude_m, "extract.altitude_m")?,
            fov_h_deg: positive(ec.fov_h_deg, "extract.fov_h_deg")?,
            fov_v_deg: positive(ec.fov_v_deg, "extract.fov_v_deg")?,
        }),
        None => None,
    };
    let truth_path = ec
        .ground_truth
        .as_ref()
        .map(|p| cfg.existing(p, "extract.ground_truth"))
        .transpose()?;

    let mut ms = BTreeMap::new();
    for (name, (p, wl)) in ms_paths {
        ms.insert(name, Band { grid: load_raster(&p)?, wavelength_nm: wl });
    }
    let ms = BandSet::new(SensorKind::Multispectral, ms)?;
    let mut hs = BTreeMap::new();
    for (p, wl) in hs_paths {
        hs.insert(format!("hs_{wl}"), Band { grid: load_raster(&p)?, wavelength_nm: wl });
    }
    let hs = BandSet::new(SensorKind::Hyperspectral, hs)?;
    let geometry = *ms.geometry();
    let open = |p: &PathBuf| std::fs::File::open(p).map_err(|e| Error::io(p, e));
    let scene = Scene {
        plots: load_plots(&plots_path)?,
        dsm: load_elevation(&dsm_path, &geometry, dsm_agg)?,
        dem: load_elevation(&dem_path, &geometry, dem_agg)?,
        vegetation_mask: load_raster(&veg_path)?,
        lodging_mask: load_raster(&lodging_path)?,
        weed_mask: load_raster(&weed_path)?,
        special_plots: ec.special_plots.iter().cloned().collect(),
        head_counts: match &heads_path {
            Some(p) => read_head_counts(open(p)?)?,
            None => BTreeMap::new(),
        },
        ground_truth: match &truth_path {
            Some(p) => read_ground_truth(open(p)?)?,
            None => BTreeMap::new(),
        },
        date,
        site: ec.site.clone(),
        ms,
        hs,
    };
    let params = ExtractParams {
        index: IndexParams {
            savi_l: ec.savi_l,
            kndvi_sigma: ec.kndvi_sigma,
        },
        ch_percentile: ec.ch_percentile,
        noise_floor: ec.noise_floor,
        weed_ring: (ec.weed_ring_inner, ec.weed_ring_outer),
        vi_vegetation_only: ec.vi_vegetation_only,
        camera,
    };
    let records = extract_features(&scene, &params)?;
    let mut w = create(&output)?;
    write_plot_features(&records, &mut w)?;
    w.flush().map_err(|e| Error::io(&output, e))?;
    log::info!("extracted {} plots into {}", records.len(), output.display());
    Ok(json!({
        "outputs": [rel(cfg, &output)],
        "plots": records.len(),
    }))
}

fn run_fuse(cfg: &PipelineConfig) -> Run<Value> {
    let fc = &cfg.fuse;
    let features = match &fc.features {
        Some(p) => cfg.existing(p, "fuse.features")?,
        None => {
            let p = cfg.output(&cfg.extract.output, "extract.output")?;
            if !p.exists() {
                return Err(ConfigError::new(
                    "fuse.features",
                    format!("not set and {} does not exist", p.display()),
                )
                .into());
            }
            p
        }
    };
    let mut domains = Vec::new();
    for d in &fc.domains {
        let d: Domain = d
            .parse()
            .map_err(|_| ConfigError::new("fuse.domains", format!("unknown domain `{d}`")))?;
        if !domains.contains(&d) {
            domains.push(d);
        }
    }
    if domains.is_empty() {
        return Err(ConfigError::new("fuse.domains", "must name at least one domain").into());
    }
    if !(fc.lambda.is_finite() && fc.lambda >= 0.0) {
        return Err(ConfigError::new("fuse.lambda", format!("must be >= 0, got {}", fc.lambda)).into());
    }
    if fc.k < 2 {
        return Err(ConfigError::new("fuse.k", format!("must be >= 2, got {}", fc.k)).into());
    }
    let seed = cfg.seed()?;
    let weather = if domains.contains(&Domain::Weather) {
        load_weather(cfg.input(&fc.weather, "fuse.weather")?)?
    } else {
        Vec::new()
    };
    let germplasm = if domains.contains(&Domain::Germplasm) {
        load_germplasm(cfg.input(&fc.germplasm, "fuse.germplasm")?)?
    } else {
        Vec::new()
    };
    let metrics_path = cfg.output(&fc.metrics_output, "fuse.metrics_output")?;
    let scatter_path = cfg.output(&fc.scatter_output, "fuse.scatter_output")?;

    let records = load_plot_features(&features)?;
    let m = assemble(&records, &weather, &germplasm, &ScreeningDefaults::default(), &domains)?;
    for d in m.dropped() {
        log::warn!("dropped plot {}: {}", d.plot_id, d.reason);
    }
    let report = kfold_cv(&m, fc.k, fc.lambda, seed)?;
    let mut metrics = metrics_json(&report);
    let obj = metrics.as_object_mut().expect("metrics are an object");
    obj.insert("domains".into(), json!(domains.iter().map(|d| d.name()).collect::<Vec<_>>()));
    obj.insert("n_rows".into(), json!(m.n_rows()));
    obj.insert("columns".into(), json!(m.column_names()));
    obj.insert("dropped".into(), json!(m.dropped()));
    write_json(&metrics_path, &metrics)?;
    let mut w = create(&scatter_path)?;
    write_scatter_csv(&report, &mut w)?;
    w.flush().map_err(|e| Error::io(&scatter_path, e))?;
    log::info!("pooled R2 {:?}, RMSE {}", report.pooled.r2, report.pooled.rmse);
    Ok(json!({
        "outputs": [rel(cfg, &metrics_path), rel(cfg, &scatter_path)],
        "n_rows": m.n_rows(),
        "pooled": report.pooled,
    }))
}

fn vocab(cfg: &PipelineConfig) -> Run<usize> {
    match cfg.prefopt.vocab_size {
        Some(v) if v > 0 => Ok(v),
        Some(_) => Err(ConfigError::new("prefopt.vocab_size", "must be > 0").into()),
        None => Err(ConfigError::new("prefopt.vocab_size", "is required").into()),
    }
}

const SFT_POLICY: &str = "policy_sft.json";
const REWARD_MODEL: &str = "reward_model.json";

fn run_sft(cfg: &PipelineConfig) -> Run<Value> {
    let pc = &cfg.prefopt;
    let v = vocab(cfg)?;
    let data_path = cfg.input(&pc.sft_data, "prefopt.sft_data")?;
    if !(pc.sft_learning_rate.is_finite() && pc.sft_learning_rate >= 0.0) {
        return Err(ConfigError::new("prefopt.sft_learning_rate", "must be >= 0").into());
    }
    let data: Vec<SftExample> = load_jsonl(&data_path)?;
    let mut policy = TabularPolicy::uniform(v, pc.context_length)?;
    let losses = train_sft(&mut policy, &data, pc.sft_learning_rate, pc.sft_steps)?;
    let out = cfg.output_dir();
    write_json(&out.join(SFT_POLICY), &policy)?;
    write_losses(&out.join("sft_loss.csv"), &losses)?;
    Ok(json!({
        "outputs": [SFT_POLICY, "sft_loss.csv"],
        "examples": data.len(),
        "final_loss": losses.last(),
    }))
}

fn run_rm(cfg: &PipelineConfig) -> Run<Value> {
    let pc = &cfg.prefopt;
    let v = vocab(cfg)?;
    let data_path = cfg.input(&pc.preference_data, "prefopt.preference_data")?;
    if !(pc.rm_learning_rate.is_finite() && pc.rm_learning_rate >= 0.0) {
        return Err(ConfigError::new("prefopt.rm_learning_rate", "must be >= 0").into());
    }
    let data: Vec<PreferenceExample> = load_jsonl(&data_path)?;
    validate_preferences(&data, v)?;
    let mut rm = RewardModel::zeros(v);
    let losses = train_reward_model(&mut rm, &data, pc.rm_learning_rate, pc.rm_steps)?;
    let out = cfg.output_dir();
    write_json(&out.join(REWARD_MODEL), &rm)?;
    write_losses(&out.join("rm_loss.csv"), &losses)?;
    Ok(json!({
        "outputs": [REWARD_MODEL, "rm_loss.csv"],
        "pairs": data.len(),
        "final_loss": losses.last(),
    }))
}

fn stage_input(cfg: &PipelineConfig, explicit: &Option<PathBuf>, default: &str, field: &str) -> Run<PathBuf> {
    match explicit {
        Some(p) => Ok(cfg.existing(p, field)?),
        None => {
            let p = cfg.output_dir().join(default);
            if p.exists() {
                Ok(p)
            } else {
                Err(ConfigError::new(field, format!("not set and {} does not exist", p.display())).into())
            }
        }
    }
}

fn run_ppo(cfg: &PipelineConfig) -> Run<Value> {
    let pc = &cfg.prefopt;
    let seed = cfg.seed()?;
    let prompts_path = cfg.input(&pc.prompts, "prefopt.prompts")?;
    let policy_path = stage_input(cfg, &pc.policy, SFT_POLICY, "prefopt.policy")?;
    let rm_path = stage_input(cfg, &pc.reward_model, REWARD_MODEL, "prefopt.reward_model")?;
    let p = &pc.ppo;
    let rl = RlhfConfig {
        beta: p.beta,
        learning_rate: p.learning_rate,
        ppo_clip: p.ppo_clip,
        iterations: p.iterations,
        seed,
        answer_length: p.answer_length,
        samples_per_prompt: p.samples_per_prompt,
        minibatches: p.minibatches,
    };
    rl.validate().map_err(|e| ConfigError::new("prefopt.ppo", e.to_string()))?;

    let prompts: Vec<PromptExample> = load_jsonl(&prompts_path)?;
    let prompts: Vec<Vec<u32>> = prompts.into_iter().map(|p| p.prompt).collect();
    let mut policy: TabularPolicy = read_json(&policy_path)?;
    let rm: RewardModel = read_json(&rm_path)?;
    if rm.vocab_size != policy.vocab_size() {
        return Err(Error::invalid(format!(
            "reward model vocabulary {} differs from policy vocabulary {}",
            rm.vocab_size,
            policy.vocab_size()
        ))
        .into());
    }
    let reference = ReferencePolicy::snapshot(&policy);
    let diags = train_rlhf(&mut policy, &reference, &rm, &prompts, &rl)?;
    let out = cfg.output_dir();
    write_json(&out.join("policy_ppo.json"), &policy)?;
    let diag_path = out.join("diagnostics.csv");
    let mut w = create(&diag_path)?;
    write_diagnostics_csv(&diags, &mut w)?;
    w.flush().map_err(|e| Error::io(&diag_path, e))?;
    Ok(json!({
        "outputs": ["policy_ppo.json", "diagnostics.csv"],
        "iterations": diags.len(),
        "final": diags.last(),
    }))
}

fn run_bench(cfg: &PipelineConfig) -> Run<Value> {
    let bc = &cfg.bench;
    let trials_path = cfg.input(&bc.trials, "bench.trials")?;
    let ballots_path = bc
        .ballots
        .as_ref()
        .map(|p| cfg.existing(p, "bench.ballots"))
        .transpose()?;
    let dir = cfg.output(&bc.output, "bench.output")?;
    let trials = load_trials(&trials_path)?;
    let ballots = match &ballots_path {
        Some(p) => load_ballots(p)?,
        None => Vec::new(),
    };
    let report = build_report(&trials, &ballots)?;
    write_report(&report, &dir)?;
    let mut outputs = vec!["report.json", "accuracy.csv", "stability.csv"];
    if report.reasoning.is_some() {
        outputs.push("reasoning.csv");
    }
    let base = rel(cfg, &dir);
    Ok(json!({
        "outputs": outputs.iter().map(|o| format!("{base}/{o}")).collect::<Vec<_>>(),
        "models": report.models,
        "accuracy_rows": report.accuracy.len(),
        "stability_rows": report.stability.len(),
    }))
}

fn run_kb_screen(cfg: &PipelineConfig) -> Run<Value> {
    let kc = &cfg.kb;
    let path = cfg.input(&kc.germplasm, "kb.germplasm")?;
    let out = cfg.output(&kc.screen_output, "kb.screen_output")?;
    let defaults = ScreeningDefaults::default();
    let mut criteria: Vec<Predicate> = Vec::new();
    if let Some(t) = &kc.target {
        let t: ScreeningTarget = t
            .parse()
            .map_err(|_| ConfigError::new("kb.target", format!("unknown target `{t}`")))?;
        criteria.extend(defaults.criteria(t).iter().cloned());
    }
    for (i, p) in kc.predicates.iter().enumerate() {
        criteria.push(
            p.parse()
                .map_err(|e: Error| ConfigError::new(&format!("kb.predicates[{i}]"), e.to_string()))?,
        );
    }
    if criteria.is_empty() {
        return Err(ConfigError::new("kb.target", "set a target or at least one predicate").into());
    }
    let records = load_germplasm(&path)?;
    let hits = screen_germplasm(&records, &criteria)?;
    let mut wtr = csv::Writer::from_writer(create(&out)?);
    wtr.write_record(GERMPLASM_FIELDS)?;
    for r in &hits {
        let row: Vec<String> = GERMPLASM_FIELDS
            .iter()
            .map(|f| Ok(r.field(f)?.map(|v| v.to_string()).unwrap_or_default()))
            .collect::<Result<_>>()?;
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io(&out, e))?;
    let names: BTreeSet<&str> = hits.iter().map(|r| r.variety_name.as_str()).collect();
    Ok(json!({
        "outputs": [rel(cfg, &out)],
        "matches": names,
    }))
}

fn run_kb_price(cfg: &PipelineConfig) -> Run<Value> {
    let kc = &cfg.kb;
    let path = cfg.input(&kc.prices, "kb.prices")?;
    let point = kc
        .observation_point
        .as_deref()
        .ok_or_else(|| ConfigError::new("kb.observation_point", "is required"))?;
    let date = kc.date.ok_or_else(|| ConfigError::new("kb.date", "is required"))?;
    let out = cfg.output(&kc.price_output, "kb.price_output")?;
    let records = load_prices(&path)?;
    let hits = query_price(&records, point, date, kc.variety.as_deref())?;
    let mut wtr = csv::Writer::from_writer(create(&out)?);
    for r in &hits {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io(&out, e))?;
    Ok(json!({
        "outputs": [rel(cfg, &out)],
        "records": hits.len(),
    }))
}
