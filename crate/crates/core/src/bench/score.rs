use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deviation::within_ten_percent;
use crate::error::{Error, Result};
use crate::fusion::metrics;

use super::records::{ReasoningBallot, StabilityProtocol, TrialRecord};
use super::task::{AnswerKind, Subtask, Task};

/// Accuracy of one model on one subtask. Regression subtasks fill `r2` and
/// `rmse`; every other kind fills `proportion`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyScore {
    pub answer_kind: AnswerKind,
    pub n_trials: usize,
    pub r2: Option<f64>,
    pub rmse: Option<f64>,
    pub proportion: Option<f64>,
}

pub fn score_accuracy(trials: &[TrialRecord]) -> Result<AccuracyScore> {
    let Some(first) = trials.first() else {
        return Err(Error::InvalidTrialSet("no trials to score".into()));
    };
    let kind = first.spec.answer_kind;
    if let Some(t) = trials.iter().find(|t| t.spec.answer_kind != kind) {
        return Err(Error::InvalidTrialSet(format!(
            "mixed answer kinds: {} and {}",
            kind.name(),
            t.spec.answer_kind.name()
        )));
    }
    for t in trials {
        t.check_accuracy_fields()?;
    }
    let n = trials.len();
    let share = |hits: usize| Some(hits as f64 / n as f64);
    let mut score = AccuracyScore { answer_kind: kind, n_trials: n, r2: None, rmse: None, proportion: None };
    match kind {
        AnswerKind::NumericRegression => {
            let truth: Vec<f64> = trials.iter().filter_map(|t| t.reference_value).collect();
            let pred: Vec<f64> = trials.iter().filter_map(|t| t.answer_numeric).collect();
            let m = metrics(&truth, &pred)?;
            score.r2 = Some(m.r2);
            score.rmse = Some(m.rmse);
        }
        AnswerKind::Categorical => {
            score.proportion = share(trials.iter().filter(|t| t.answer_label == t.reference_label).count());
        }
        AnswerKind::JudgedCorrectness => {
            score.proportion = share(trials.iter().filter(|t| t.judged_correct == Some(true)).count());
        }
        AnswerKind::PriceConsistency => {
            score.proportion = share(
                trials
                    .iter()
                    .filter(|t| within_ten_percent(t.answer_numeric.unwrap(), t.reference_value.unwrap()))
                    .count(),
            );
        }
    }
    Ok(score)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedTrial {
    pub model_id: String,
    pub question_id: String,
    pub trial_index: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityScore {
    pub n_trials: usize,
    pub n_pass: usize,
    /// `None` when every trial was excluded.
    pub proportion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub consistency: Option<StabilityScore>,
    pub robustness: Option<StabilityScore>,
    pub excluded: Vec<ExcludedTrial>,
}

impl StabilityReport {
    pub fn get(&self, protocol: StabilityProtocol) -> Option<&StabilityScore> {
        match protocol {
            StabilityProtocol::Consistency => self.consistency.as_ref(),
            StabilityProtocol::Robustness => self.robustness.as_ref(),
        }
    }
}

/// Pass/fail of one stability trial: numeric answers must sit within ±10% of
/// the reference, otherwise the recorded manual text judgment decides.
pub fn stability_pass(trial: &TrialRecord) -> Result<bool> {
    match (trial.answer_numeric, trial.reference_value, trial.text_pass) {
        (Some(a), Some(r), _) => {
            if r == 0.0 {
                return Err(Error::UndefinedDeviation(trial.question_id.clone()));
            }
            Ok(within_ten_percent(a, r))
        }
        (_, _, Some(flag)) => Ok(flag),
        _ => Err(Error::InvalidTrialSet(format!(
            "{} question {} trial {}: stability trial needs a numeric answer and reference or a text_pass flag",
            trial.model_id, trial.question_id, trial.trial_index
        ))),
    }
}

/// Stability proportions split by protocol. Untagged trials are ignored;
/// trials with a zero numeric reference are excluded and listed.
pub fn score_stability(trials: &[TrialRecord]) -> Result<StabilityReport> {
    let mut counts: BTreeMap<StabilityProtocol, (usize, usize)> = BTreeMap::new();
    let mut excluded = Vec::new();
    for t in trials {
        let Some(protocol) = t.stability_protocol else { continue };
        let entry = counts.entry(protocol).or_default();
        match stability_pass(t) {
            Ok(pass) => {
                entry.0 += 1;
                entry.1 += usize::from(pass);
            }
            Err(e @ Error::UndefinedDeviation(_)) => excluded.push(ExcludedTrial {
                model_id: t.model_id.clone(),
                question_id: t.question_id.clone(),
                trial_index: t.trial_index,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let score = |p| {
        counts.get(&p).map(|&(n, pass)| StabilityScore {
            n_trials: n,
            n_pass: pass,
            proportion: (n > 0).then(|| pass as f64 / n as f64),
        })
    };
    Ok(StabilityReport {
        consistency: score(StabilityProtocol::Consistency),
        robustness: score(StabilityProtocol::Robustness),
        excluded,
    })
}

/// Reasoning share of one model over ballots of a single axis:
/// `Σ score / (N · x(x+1)/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningScore {
    pub n_tests: usize,
    pub n_models: usize,
    pub total_score: u64,
    pub proportion: f64,
}

fn check_ballot_set(ballots: &[ReasoningBallot]) -> Result<BTreeSet<&str>> {
    let Some(first) = ballots.first() else {
        return Err(Error::invalid("no ballots"));
    };
    let models: BTreeSet<&str> = first.scores.keys().map(String::as_str).collect();
    for b in ballots {
        b.validate()?;
        if b.axis != first.axis || !b.scores.keys().map(String::as_str).eq(models.iter().copied()) {
            return Err(Error::InvalidBallot(b.test_id.clone()));
        }
    }
    Ok(models)
}

pub fn score_reasoning(ballots: &[ReasoningBallot], model_id: &str) -> Result<ReasoningScore> {
    let models = check_ballot_set(ballots)?;
    if !models.contains(model_id) {
        return Err(Error::invalid(format!("model `{model_id}` is not on the ballots")));
    }
    let x = models.len() as u64;
    let n = ballots.len() as u64;
    let total: u64 = ballots.iter().map(|b| u64::from(b.scores[model_id])).sum();
    Ok(ReasoningScore {
        n_tests: ballots.len(),
        n_models: models.len(),
        total_score: total,
        proportion: total as f64 / (n * x * (x + 1) / 2) as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub model_id: String,
    pub task: Task,
    pub subtask: Subtask,
    pub answer_kind: AnswerKind,
    pub n_trials: usize,
    pub r2: Option<f64>,
    pub rmse: Option<f64>,
    pub proportion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub model_id: String,
    pub task: Task,
    pub subtask: Subtask,
    pub protocol: StabilityProtocol,
    pub n_trials: usize,
    pub n_pass: usize,
    pub proportion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningRow {
    pub model_id: String,
    pub axis: String,
    pub n_tests: usize,
    pub n_models: usize,
    pub total_score: u64,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub models: Vec<String>,
    pub accuracy: Vec<AccuracyRow>,
    pub stability: Vec<StabilityRow>,
    pub stability_excluded: Vec<ExcludedTrial>,
    /// Absent when no ballots were supplied.
    pub reasoning: Option<Vec<ReasoningRow>>,
}

/// Scores every (model, subtask) for accuracy and stability and every
/// (model, axis) for reasoning. Rows are sorted, so the report does not
/// depend on input order.
pub fn build_report(trials: &[TrialRecord], ballots: &[ReasoningBallot]) -> Result<BenchmarkReport> {
    let mut models: BTreeSet<String> = trials.iter().map(|t| t.model_id.clone()).collect();
    models.extend(ballots.iter().flat_map(|b| b.scores.keys().cloned()));
    if models.is_empty() {
        return Err(Error::InvalidTrialSet("no models in trials or ballots".into()));
    }

    let mut groups: BTreeMap<(String, Subtask), Vec<TrialRecord>> = BTreeMap::new();
    for t in trials {
        groups.entry((t.model_id.clone(), t.spec.subtask)).or_default().push(t.clone());
    }
    // canonical trial order inside each group
    for g in groups.values_mut() {
        g.sort_by(|a, b| {
            (&a.question_id, a.stability_protocol, a.trial_index)
                .cmp(&(&b.question_id, b.stability_protocol, b.trial_index))
        });
    }
    let groups: Vec<((String, Subtask), Vec<TrialRecord>)> = groups.into_iter().collect();

    type Scored = (Option<AccuracyRow>, Vec<StabilityRow>, Vec<ExcludedTrial>);
    let scored: Vec<Scored> = groups
        .par_iter()
        .map(|((model, subtask), ts)| -> Result<Scored> {
            let acc_trials: Vec<TrialRecord> =
                ts.iter().filter(|t| t.stability_protocol.is_none()).cloned().collect();
            let accuracy = if acc_trials.is_empty() {
                None
            } else {
                let s = score_accuracy(&acc_trials)?;
                Some(AccuracyRow {
                    model_id: model.clone(),
                    task: subtask.task(),
                    subtask: *subtask,
                    answer_kind: s.answer_kind,
                    n_trials: s.n_trials,
                    r2: s.r2,
                    rmse: s.rmse,
                    proportion: s.proportion,
                })
            };
            let st = score_stability(ts)?;
            let stability = [StabilityProtocol::Consistency, StabilityProtocol::Robustness]
                .into_iter()
                .filter_map(|p| {
                    st.get(p).map(|s| StabilityRow {
                        model_id: model.clone(),
                        task: subtask.task(),
                        subtask: *subtask,
                        protocol: p,
                        n_trials: s.n_trials,
                        n_pass: s.n_pass,
                        proportion: s.proportion,
                    })
                })
                .collect();
            Ok((accuracy, stability, st.excluded))
        })
        .collect::<Result<_>>()?;

    let mut accuracy = Vec::new();
    let mut stability = Vec::new();
    let mut stability_excluded = Vec::new();
    for (a, s, e) in scored {
        accuracy.extend(a);
        stability.extend(s);
        stability_excluded.extend(e);
    }

    let reasoning = if ballots.is_empty() {
        None
    } else {
        let mut by_axis: BTreeMap<&str, Vec<ReasoningBallot>> = BTreeMap::new();
        for b in ballots {
            by_axis.entry(b.axis.as_str()).or_default().push(b.clone());
        }
        let mut rows = Vec::new();
        for (axis, mut set) in by_axis {
            set.sort_by(|a, b| a.test_id.cmp(&b.test_id));
            let on_ballot = check_ballot_set(&set)?;
            for m in on_ballot {
                let s = score_reasoning(&set, m)?;
                rows.push(ReasoningRow {
                    model_id: m.to_string(),
                    axis: axis.to_string(),
                    n_tests: s.n_tests,
                    n_models: s.n_models,
                    total_score: s.total_score,
                    proportion: s.proportion,
                });
            }
        }
        Some(rows)
    };

    Ok(BenchmarkReport {
        models: models.into_iter().collect(),
        accuracy,
        stability,
        stability_excluded,
        reasoning,
    })
}

fn write_table<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(!rows.is_empty())
        .from_path(path)?;
    if rows.is_empty() {
        wtr.write_record(header)?;
    }
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `report.json`, `accuracy.csv`, `stability.csv` and, when reasoning
/// was scored, `reasoning.csv` into `dir`.
pub fn write_report(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    let file = std::fs::File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    serde_json::to_writer_pretty(file, report)?;
    write_table(
        &dir.join("accuracy.csv"),
        &report.accuracy,
        &["model_id", "task", "subtask", "answer_kind", "n_trials", "r2", "rmse", "proportion"],
    )?;
    write_table(
        &dir.join("stability.csv"),
        &report.stability,
        &["model_id", "task", "subtask", "protocol", "n_trials", "n_pass", "proportion"],
    )?;
    if let Some(rows) = &report.reasoning {
        write_table(
            &dir.join("reasoning.csv"),
            rows,
            &["model_id", "axis", "n_tests", "n_models", "total_score", "proportion"],
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn judged(model: &str, i: u32, ok: bool) -> TrialRecord {
        let mut t = TrialRecord::new(model, Subtask::HQ, &format!("q{i}"), 0);
        t.judged_correct = Some(ok);
        t
    }

    fn numeric(model: &str, sub: Subtask, i: u32, answer: f64, reference: f64) -> TrialRecord {
        let mut t = TrialRecord::new(model, sub, &format!("q{i}"), 0);
        t.answer_numeric = Some(answer);
        t.reference_value = Some(reference);
        t
    }

    fn ballots(x: usize, n: usize, seed: u64) -> Vec<ReasoningBallot> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut scores: Vec<u32> = (1..=x as u32).collect();
                scores.shuffle(&mut rng);
                ReasoningBallot {
                    test_id: format!("t{i}"),
                    axis: "explanation".into(),
                    scores: scores.into_iter().enumerate().map(|(m, s)| (format!("m{m}"), s)).collect(),
                }
            })
            .collect()
    }

    #[test]
    fn judged_proportion() {
        let t: Vec<TrialRecord> = (0..10).map(|i| judged("m", i, i != 3)).collect();
        assert_eq!(score_accuracy(&t).unwrap().proportion, Some(0.9));
    }

    #[test]
    fn price_consistency_boundary() {
        let t = vec![numeric("m", Subtask::SP, 0, 105.0, 100.0), numeric("m", Subtask::SP, 1, 111.0, 100.0)];
        assert_eq!(score_accuracy(&t).unwrap().proportion, Some(0.5));
    }

    #[test]
    fn perfect_regression() {
        let t: Vec<TrialRecord> = (0..5).map(|i| numeric("m", Subtask::LAI, i, i as f64, i as f64)).collect();
        let s = score_accuracy(&t).unwrap();
        assert_eq!((s.r2, s.rmse), (Some(1.0), Some(0.0)));
    }

    #[test]
    fn regression_matches_fusion_metrics_bitwise() {
        let refs = [4.1, 3.7, 5.2, 4.8, 3.3];
        let ans = [4.0, 3.9, 5.0, 4.4, 3.6];
        let t: Vec<TrialRecord> = (0..5).map(|i| numeric("m", Subtask::LAI, i as u32, ans[i], refs[i])).collect();
        let s = score_accuracy(&t).unwrap();
        let m = metrics(&refs, &ans).unwrap();
        assert_eq!(s.r2.unwrap().to_bits(), m.r2.to_bits());
        assert_eq!(s.rmse.unwrap().to_bits(), m.rmse.to_bits());
    }

    #[test]
    fn mixed_kinds_rejected() {
        let t = vec![judged("m", 0, true), numeric("m", Subtask::SP, 1, 1.0, 1.0)];
        assert!(matches!(score_accuracy(&t), Err(Error::InvalidTrialSet(_))));
        assert!(score_accuracy(&[]).is_err());
    }

    #[test]
    fn stability_boundaries_and_exclusion() {
        let tag = |mut t: TrialRecord, p| {
            t.stability_protocol = Some(p);
            t
        };
        let c = StabilityProtocol::Consistency;
        let r = StabilityProtocol::Robustness;
        let mut text = TrialRecord::new("m", Subtask::CT, "q9", 0);
        text.text_pass = Some(true);
        let trials = vec![
            tag(numeric("m", Subtask::SPAD, 0, 55.0, 50.0), c),
            tag(numeric("m", Subtask::SPAD, 1, 56.0, 50.0), c),
            tag(numeric("m", Subtask::SPAD, 2, 1.0, 0.0), c),
            tag(text, r),
            numeric("m", Subtask::SPAD, 3, 99.0, 1.0),
        ];
        let s = score_stability(&trials).unwrap();
        let cons = s.consistency.unwrap();
        assert_eq!((cons.n_trials, cons.n_pass), (2, 1));
        assert_eq!(cons.proportion, Some(0.5));
        assert_eq!(s.robustness.unwrap().proportion, Some(1.0));
        assert_eq!(s.excluded.len(), 1);
        assert_eq!(s.excluded[0].question_id, "q2");
        assert!(matches!(
            stability_pass(&trials[2]),
            Err(Error::UndefinedDeviation(q)) if q == "q2"
        ));
    }

    #[test]
    fn reasoning_rank_sums() {
        let x = 5;
        let n = 8;
        let mut b = ballots(x, n, 1);
        for ballot in &mut b {
            let top = ballot.scores["m0"];
            let holder = ballot.scores.iter().find(|(_, s)| **s == 5).unwrap().0.clone();
            ballot.scores.insert(holder, top);
            ballot.scores.insert("m0".into(), 5);
        }
        assert!((score_reasoning(&b, "m0").unwrap().proportion - 1.0 / 3.0).abs() < 1e-15);
        for ballot in &mut b {
            let holder = ballot.scores.iter().find(|(_, s)| **s == 1).unwrap().0.clone();
            let m1 = ballot.scores["m1"];
            ballot.scores.insert(holder, m1);
            ballot.scores.insert("m1".into(), 1);
        }
        assert!((score_reasoning(&b, "m1").unwrap().proportion - 1.0 / 15.0).abs() < 1e-15);
        let mut bad = b.clone();
        bad[0].scores.insert("m0".into(), 9);
        assert!(matches!(score_reasoning(&bad, "m0"), Err(Error::InvalidBallot(_))));
    }

    #[test]
    fn single_model_report_by_hand() {
        let mut trials: Vec<TrialRecord> = (0..4).map(|i| judged("wblm", i, i < 3)).collect();
        trials.push(numeric("wblm", Subtask::SP, 10, 150.0, 150.0));
        trials.push(numeric("wblm", Subtask::SP, 11, 170.0, 150.0));
        let mut st = numeric("wblm", Subtask::SP, 12, 160.0, 150.0);
        st.stability_protocol = Some(StabilityProtocol::Robustness);
        trials.push(st);
        let r = build_report(&trials, &[]).unwrap();
        assert_eq!(r.models, vec!["wblm"]);
        assert_eq!(r.accuracy.len(), 2);
        assert_eq!(r.accuracy[0].subtask, Subtask::HQ);
        assert_eq!(r.accuracy[0].proportion, Some(0.75));
        assert_eq!(r.accuracy[1].subtask, Subtask::SP);
        assert_eq!(r.accuracy[1].n_trials, 2);
        assert_eq!(r.accuracy[1].proportion, Some(0.5));
        assert_eq!(r.stability.len(), 1);
        assert_eq!(r.stability[0].protocol, StabilityProtocol::Robustness);
        assert_eq!(r.stability[0].proportion, Some(1.0));
        assert!(r.reasoning.is_none());
    }

    #[test]
    fn report_files() {
        let trials: Vec<TrialRecord> = (0..4).map(|i| judged("a", i, i % 2 == 0)).collect();
        let r = build_report(&trials, &ballots(2, 3, 4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_report(&r, dir.path()).unwrap();
        for f in ["report.json", "accuracy.csv", "stability.csv", "reasoning.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let acc = std::fs::read_to_string(dir.path().join("accuracy.csv")).unwrap();
        assert!(acc.starts_with("model_id,task,subtask,answer_kind,n_trials,r2,rmse,proportion\na,germplasm_screening,HQ,judged_correctness,4,,,0.5\n"));
        let st = std::fs::read_to_string(dir.path().join("stability.csv")).unwrap();
        assert!(st.starts_with("model_id,task,subtask,protocol"));
        assert_eq!(r.models, vec!["a", "m0", "m1"]);
    }

    proptest! {
        #[test]
        fn reasoning_shares_sum_to_one(x in 2usize..8, n in 1usize..20, seed in 0u64..1000) {
            let b = ballots(x, n, seed);
            let scores: Vec<ReasoningScore> = (0..x).map(|m| score_reasoning(&b, &format!("m{m}")).unwrap()).collect();
            let total: u64 = scores.iter().map(|s| s.total_score).sum();
            prop_assert_eq!(total, (n * x * (x + 1) / 2) as u64);
            let sum: f64 = scores.iter().map(|s| s.proportion).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn judged_accuracy_order_invariant(flags in prop::collection::vec(any::<bool>(), 1..60), seed in 0u64..1000) {
            let mut t: Vec<TrialRecord> = flags.iter().enumerate().map(|(i, &f)| judged("m", i as u32, f)).collect();
            let brute = flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64;
            let a = score_accuracy(&t).unwrap().proportion.unwrap();
            t.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let b = score_accuracy(&t).unwrap().proportion.unwrap();
            prop_assert_eq!(a, brute);
            prop_assert_eq!(b, brute);
        }

        #[test]
        fn stability_scale_invariant(a in -1e4f64..1e4, r in -1e4f64..1e4, k in 0.01f64..100.0) {
            prop_assume!(r != 0.0);
            let mut t = numeric("m", Subtask::SPAD, 0, a, r);
            t.stability_protocol = Some(StabilityProtocol::Consistency);
            let base = stability_pass(&t).unwrap();
            t.answer_numeric = Some(a * k);
            t.reference_value = Some(r * k);
            let margin = (10.0 * (a - r).abs() - r.abs()).abs() / r.abs();
            prop_assume!(margin > 1e-9);
            prop_assert_eq!(stability_pass(&t).unwrap(), base);
        }

        #[test]
        fn report_independent_of_trial_order(seed in 0u64..500) {
            let mut trials: Vec<TrialRecord> = (0..6).map(|i| judged("a", i, i % 3 != 0)).collect();
            trials.extend((0..6).map(|i| numeric("b", Subtask::CH, i, 0.7 + i as f64 * 0.01, 0.72 + (i % 2) as f64 * 0.05)));
            let b = ballots(3, 4, seed);
            let base = build_report(&trials, &b).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            trials.shuffle(&mut rng);
            let mut b2 = b.clone();
            b2.shuffle(&mut rng);
            prop_assert_eq!(build_report(&trials, &b2).unwrap(), base);
        }
    }
}
