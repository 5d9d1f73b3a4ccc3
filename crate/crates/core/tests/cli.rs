use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scene_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/scene/scene.toml")
}

fn breedkit(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_breedkit"))
        .arg("--config")
        .arg(scene_config())
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn summary(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stdout);
    let line = text.lines().last().expect("summary line on stdout");
    serde_json::from_str(line).expect("summary is JSON")
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn extract_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = breedkit(&["extract"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&o);
    assert_eq!(s["status"], "ok");
    assert_eq!(s["plots"], 3);
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/golden/features.csv");
    assert_eq!(read(&dir.path().join("features.csv")), read(&golden));
}

#[test]
fn missing_raster_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = breedkit(&["--set", "extract.ms_bands.red=absent.asc", "extract"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let s = summary(&o);
    assert_eq!(s["field"], "extract.ms_bands.red");
    assert_eq!(s["error"], "InvalidConfig");
    assert!(!dir.path().join("features.csv").exists());
}

#[test]
fn bad_value_type_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = breedkit(&["--set", "fuse.lambda=\"lots\"", "fuse"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary(&o)["field"], "fuse.lambda");
}

#[test]
fn missing_seed_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = std::fs::read_to_string(scene_config()).unwrap().replace("seed = 42\n", "");
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/scene");
    let tmp_cfg = dir.path().join("noseed.toml");
    let cfg = cfg.replace("output_dir = \"out\"", &format!("output_dir = {:?}", dir.path().join("out")));
    std::fs::write(&tmp_cfg, cfg).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_breedkit"))
        .arg("--config")
        .arg(&tmp_cfg)
        .args(["--set", &format!("fuse.features={}", path.join("../golden/features.csv").display())])
        .args(["--set", &format!("fuse.weather={}", path.join("weather.csv").display())])
        .args(["--set", &format!("fuse.germplasm={}", path.join("germplasm.csv").display())])
        .arg("fuse")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary(&o)["field"], "seed");
}

#[test]
fn module_error_exits_1_with_error_name() {
    let dir = tempfile::tempdir().unwrap();
    let o = breedkit(&["kb", "price", "--point", "Nowhere"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let s = summary(&o);
    assert_eq!(s["error"], "NotFound");
    assert_eq!(s["exit_code"], 1);
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = breedkit(&["--set", "extract.colour=1", "extract"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(summary(&o)["field"].as_str().unwrap().starts_with("extract"));
}

#[test]
fn kb_queries_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = breedkit(&["kb", "screen", "--target", "HQ", "--where", "plant_height<=77"], dir.path());
    assert!(o.status.success());
    assert_eq!(summary(&o)["matches"], serde_json::json!(["Zhongmai 578"]));
    let text = String::from_utf8(read(&dir.path().join("screen.csv"))).unwrap();
    assert_eq!(text.lines().count(), 2);
    let o = breedkit(&["kb", "price", "--variety", "Nongda 3486", "--date", "2024-05-05"], dir.path());
    assert!(o.status.success());
    let text = String::from_utf8(read(&dir.path().join("price.csv"))).unwrap();
    assert!(text.contains("145"), "{text}");
}

const PIPELINE: [&[&str]; 6] = [
    &["extract"],
    &["fuse"],
    &["prefopt", "sft"],
    &["prefopt", "rm"],
    &["prefopt", "ppo"],
    &["bench"],
];

const ARTIFACTS: [&str; 12] = [
    "features.csv",
    "metrics.json",
    "scatter.csv",
    "policy_sft.json",
    "sft_loss.csv",
    "reward_model.json",
    "rm_loss.csv",
    "policy_ppo.json",
    "diagnostics.csv",
    "bench/report.json",
    "bench/accuracy.csv",
    "bench/stability.csv",
];

fn run_all(out: &Path, threads: &str) -> Vec<serde_json::Value> {
    PIPELINE
        .iter()
        .map(|args| {
            let mut a = vec!["--threads", threads];
            a.extend_from_slice(args);
            let o = breedkit(&a, out);
            assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stdout));
            summary(&o)
        })
        .collect()
}

#[test]
fn outputs_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let sa = run_all(a.path(), "1");
    let sb = run_all(b.path(), "1");
    let sc = run_all(c.path(), "4");
    assert_eq!(sa, sb);
    assert_eq!(sa, sc);
    for f in ARTIFACTS {
        let x = read(&a.path().join(f));
        assert_eq!(x, read(&b.path().join(f)), "{f} differs between runs");
        assert_eq!(x, read(&c.path().join(f)), "{f} differs across thread counts");
    }
}
