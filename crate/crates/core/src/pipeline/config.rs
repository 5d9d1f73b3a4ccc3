use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use super::ConfigError;

/// One `key.path = value` override applied on top of the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: toml::Value,
}

impl Override {
    pub fn new(key: &str, value: impl Into<toml::Value>) -> Self {
        Self {
            key: key.to_string(),
            value: value.into(),
        }
    }

    /// Parses `a.b=value`. The value is read as a TOML literal when it is
    /// one (`3`, `0.5`, `true`, `["RS"]`), else kept as a string.
    pub fn parse(spec: &str) -> Result<Self, ConfigError> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::new(spec, "override must look like key.path=value"))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(ConfigError::new(spec, "empty key segment"));
        }
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        Ok(Self {
            key: key.to_string(),
            value,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsBandConfig {
    pub path: PathBuf,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub plots: Option<PathBuf>,
    /// Acquisition date stamped on every record.
    pub date: Option<NaiveDate>,
    pub site: String,
    /// Multispectral band name to `.asc` path.
    pub ms_bands: BTreeMap<String, PathBuf>,
    pub hs_bands: Vec<HsBandConfig>,
    /// Point clouds (`.xyz`/`.csv`) or `.asc` grids.
    pub dsm: Option<PathBuf>,
    pub dem: Option<PathBuf>,
    pub dsm_aggregator: String,
    pub dem_aggregator: String,
    pub vegetation_mask: Option<PathBuf>,
    pub lodging_mask: Option<PathBuf>,
    pub weed_mask: Option<PathBuf>,
    /// Plots marked "no crop or only a few plants".
    pub special_plots: Vec<String>,
    /// `plot_id, image_id, count`.
    pub head_counts: Option<PathBuf>,
    pub altitude_m: Option<f64>,
    pub fov_h_deg: Option<f64>,
    pub fov_v_deg: Option<f64>,
    /// `plot_id` plus any of `SPAD, LAI, measured_CH, yield_kg_ha`.
    pub ground_truth: Option<PathBuf>,
    pub savi_l: f64,
    pub kndvi_sigma: Option<f64>,
    pub ch_percentile: f64,
    pub noise_floor: f64,
    pub weed_ring_inner: f64,
    pub weed_ring_outer: f64,
    /// Average indices over vegetation-mask cells only.
    pub vi_vegetation_only: bool,
    pub output: PathBuf,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            plots: None,
            date: None,
            site: crate::fusion::DEFAULT_SITE.to_string(),
            ms_bands: BTreeMap::new(),
            hs_bands: Vec::new(),
            dsm: None,
            dem: None,
            dsm_aggregator: "max".into(),
            dem_aggregator: "min".into(),
            vegetation_mask: None,
            lodging_mask: None,
            weed_mask: None,
            special_plots: Vec::new(),
            head_counts: None,
            altitude_m: None,
            fov_h_deg: None,
            fov_v_deg: None,
            ground_truth: None,
            savi_l: 0.5,
            kndvi_sigma: None,
            ch_percentile: crate::structural::DEFAULT_HEIGHT_PERCENTILE,
            noise_floor: crate::structural::DEFAULT_NOISE_FLOOR,
            weed_ring_inner: crate::structural::DEFAULT_WEED_RING.0,
            weed_ring_outer: crate::structural::DEFAULT_WEED_RING.1,
            vi_vegetation_only: false,
            output: "features.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseConfig {
    /// Defaults to the extract output inside `output_dir`.
    pub features: Option<PathBuf>,
    pub weather: Option<PathBuf>,
    pub germplasm: Option<PathBuf>,
    pub domains: Vec<String>,
    pub lambda: f64,
    pub k: usize,
    pub metrics_output: PathBuf,
    pub scatter_output: PathBuf,
}

impl Default for FuseConfig {
    fn default() -> Self {
        Self {
            features: None,
            weather: None,
            germplasm: None,
            domains: vec!["RS".into(), "phenotyping".into(), "weather".into(), "germplasm".into()],
            lambda: 1.0,
            k: 5,
            metrics_output: "metrics.json".into(),
            scatter_output: "scatter.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub beta: f64,
    pub learning_rate: f64,
    pub ppo_clip: f64,
    pub iterations: usize,
    pub answer_length: usize,
    pub samples_per_prompt: usize,
    pub minibatches: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        let d = crate::prefopt::RlhfConfig::default();
        Self {
            beta: d.beta,
            learning_rate: d.learning_rate,
            ppo_clip: d.ppo_clip,
            iterations: d.iterations,
            answer_length: d.answer_length,
            samples_per_prompt: d.samples_per_prompt,
            minibatches: d.minibatches,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrefoptConfig {
    pub vocab_size: Option<usize>,
    pub context_length: usize,
    /// JSONL of `{prompt, answer}`.
    pub sft_data: Option<PathBuf>,
    pub sft_learning_rate: f64,
    pub sft_steps: usize,
    /// JSONL of `{prompt, chosen, rejected}`.
    pub preference_data: Option<PathBuf>,
    pub rm_learning_rate: f64,
    pub rm_steps: usize,
    /// JSONL of `{prompt}`.
    pub prompts: Option<PathBuf>,
    /// Starting policy for `ppo`; defaults to the SFT output.
    pub policy: Option<PathBuf>,
    /// Reward model for `ppo`; defaults to the RM output.
    pub reward_model: Option<PathBuf>,
    pub ppo: PpoConfig,
}

impl Default for PrefoptConfig {
    fn default() -> Self {
        Self {
            vocab_size: None,
            context_length: 1,
            sft_data: None,
            sft_learning_rate: 1.0,
            sft_steps: 200,
            preference_data: None,
            rm_learning_rate: 0.5,
            rm_steps: 500,
            prompts: None,
            policy: None,
            reward_model: None,
            ppo: PpoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub trials: Option<PathBuf>,
    pub ballots: Option<PathBuf>,
    /// Report directory inside `output_dir`.
    pub output: PathBuf,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            trials: None,
            ballots: None,
            output: "bench".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KbConfig {
    pub germplasm: Option<PathBuf>,
    pub prices: Option<PathBuf>,
    /// Screening target code (`HQ`, `DS`, `DR`, `MP`, `AM`).
    pub target: Option<String>,
    /// Extra predicates such as `plant_height<=80`.
    pub predicates: Vec<String>,
    pub observation_point: Option<String>,
    pub date: Option<NaiveDate>,
    pub variety: Option<String>,
    pub screen_output: PathBuf,
    pub price_output: PathBuf,
}

impl Default for KbConfig {
    fn default() -> Self {
        Self {
            germplasm: None,
            prices: None,
            target: None,
            predicates: Vec::new(),
            observation_point: None,
            date: None,
            variety: None,
            screen_output: "screen.csv".into(),
            price_output: "price.csv".into(),
        }
    }
}

/// Everything a pipeline run needs. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
    pub extract: ExtractConfig,
    pub fuse: FuseConfig,
    pub prefopt: PrefoptConfig,
    pub bench: BenchConfig,
    pub kb: KbConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            output_dir: "out".into(),
            seed: None,
            extract: ExtractConfig::default(),
            fuse: FuseConfig::default(),
            prefopt: PrefoptConfig::default(),
            bench: BenchConfig::default(),
            kb: KbConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

fn apply(table: &mut toml::Table, ov: &Override) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = ov.key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    let mut path = String::new();
    for p in parts {
        if !path.is_empty() {
            path.push('.');
        }
        path.push_str(p);
        let next = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match next {
            toml::Value::Table(t) => t,
            _ => return Err(ConfigError::new(&path, "is not a table")),
        };
    }
    cur.insert(last.to_string(), ov.value.clone());
    Ok(())
}

impl PipelineConfig {
    /// Reads `path` (if any), applies `overrides` in order and deserializes.
    /// Errors name the offending field.
    pub fn load(path: Option<&Path>, overrides: &[Override]) -> Result<Self, ConfigError> {
        let (mut table, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError::new("config", format!("{}: {e}", p.display())))?;
                let table: toml::Table = toml::from_str(&text)
                    .map_err(|e| ConfigError::new("config", e.message().to_string()))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
                (table, base)
            }
            None => (toml::Table::new(), PathBuf::from(".")),
        };
        for ov in overrides {
            apply(&mut table, ov)?;
        }
        let mut cfg: PipelineConfig = serde_path_to_error::deserialize(toml::Value::Table(table))
            .map_err(|e| {
                let field = e.path().to_string();
                ConfigError::new(&field, e.into_inner().message().to_string())
            })?;
        cfg.base_dir = base_dir;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// `p` resolved and checked to exist.
    pub fn input(&self, p: &Option<PathBuf>, field: &str) -> Result<PathBuf, ConfigError> {
        let p = p.as_ref().ok_or_else(|| ConfigError::new(field, "is required"))?;
        self.existing(p, field)
    }

    pub fn existing(&self, p: &Path, field: &str) -> Result<PathBuf, ConfigError> {
        let full = self.resolve(p);
        if !full.exists() {
            return Err(ConfigError::new(field, format!("{} does not exist", full.display())));
        }
        Ok(full)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// `p` placed under the output directory.
    pub fn output(&self, p: &Path, field: &str) -> Result<PathBuf, ConfigError> {
        if p.is_absolute() || p.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(ConfigError::new(field, "must be a relative path inside output_dir"));
        }
        Ok(self.output_dir().join(p))
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.seed
            .ok_or_else(|| ConfigError::new("seed", "is required for stochastic steps"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_parsing() {
        assert_eq!(Override::parse("fuse.k=3").unwrap().value, toml::Value::Integer(3));
        assert_eq!(Override::parse("seed = 7").unwrap().value, toml::Value::Integer(7));
        assert_eq!(
            Override::parse("extract.plots=data/plots.csv").unwrap().value,
            toml::Value::String("data/plots.csv".into())
        );
        let v = Override::parse("fuse.domains=[\"RS\"]").unwrap().value;
        assert_eq!(v.as_array().unwrap().len(), 1);
        assert!(Override::parse("nokey").is_err());
        assert!(Override::parse("a..b=1").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 1\n[fuse]\nlambda = 2.0\nk = 4\n").unwrap();
        let cfg = PipelineConfig::load(Some(&path), &[Override::new("fuse.k", 10)]).unwrap();
        assert_eq!(cfg.seed, Some(1));
        assert_eq!(cfg.fuse.lambda, 2.0);
        assert_eq!(cfg.fuse.k, 10);
        assert_eq!(cfg.base_dir, dir.path());
    }

    #[test]
    fn errors_name_the_field() {
        let err = PipelineConfig::load(None, &[Override::new("fuse.lambda", "much")]).unwrap_err();
        assert_eq!(err.field, "fuse.lambda");
        let err = PipelineConfig::load(None, &[Override::new("extract.bogus", 1)]).unwrap_err();
        assert!(err.field.starts_with("extract"), "{err:?}");
        let cfg = PipelineConfig::load(None, &[]).unwrap();
        let err = cfg.input(&Some("nope/missing.asc".into()), "extract.dsm").unwrap_err();
        assert_eq!(err.field, "extract.dsm");
        assert_eq!(cfg.seed().unwrap_err().field, "seed");
        assert!(cfg.output(Path::new("../x"), "fuse.metrics_output").is_err());
    }
}
