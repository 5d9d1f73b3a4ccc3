use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::task::{AnswerKind, Subtask, Task, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityProtocol {
    /// Same question asked with different cross-domain data.
    Consistency,
    /// Same question with small perturbations of the input.
    Robustness,
}

impl StabilityProtocol {
    pub fn name(self) -> &'static str {
        match self {
            StabilityProtocol::Consistency => "consistency",
            StabilityProtocol::Robustness => "robustness",
        }
    }
}

impl fmt::Display for StabilityProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StabilityProtocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consistency" => Ok(StabilityProtocol::Consistency),
            "robustness" => Ok(StabilityProtocol::Robustness),
            _ => Err(Error::invalid(format!("unknown stability protocol `{s}`"))),
        }
    }
}

/// One recorded answer of one model to one question.
///
/// Trials without a `stability_protocol` feed the accuracy scorer; tagged
/// trials feed the stability scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub model_id: String,
    pub spec: TaskSpec,
    pub question_id: String,
    pub trial_index: u32,
    pub answer_numeric: Option<f64>,
    pub answer_label: Option<String>,
    pub judged_correct: Option<bool>,
    pub reference_value: Option<f64>,
    pub reference_label: Option<String>,
    pub stability_protocol: Option<StabilityProtocol>,
    pub text_pass: Option<bool>,
}

impl TrialRecord {
    pub fn new(model_id: &str, subtask: Subtask, question_id: &str, trial_index: u32) -> Self {
        Self {
            model_id: model_id.to_string(),
            spec: TaskSpec::of(subtask),
            question_id: question_id.to_string(),
            trial_index,
            answer_numeric: None,
            answer_label: None,
            judged_correct: None,
            reference_value: None,
            reference_label: None,
            stability_protocol: None,
            text_pass: None,
        }
    }

    /// Fields required by the answer kind, for accuracy trials.
    pub(crate) fn check_accuracy_fields(&self) -> Result<()> {
        let ok = match self.spec.answer_kind {
            AnswerKind::NumericRegression | AnswerKind::PriceConsistency => {
                self.answer_numeric.is_some() && self.reference_value.is_some()
            }
            AnswerKind::Categorical => self.answer_label.is_some() && self.reference_label.is_some(),
            AnswerKind::JudgedCorrectness => self.judged_correct.is_some(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidTrialSet(format!(
                "{} question {} trial {}: fields missing for {}",
                self.model_id,
                self.question_id,
                self.trial_index,
                self.spec.answer_kind.name()
            )))
        }
    }
}

#[derive(Debug, Deserialize)]
struct TrialRow {
    model_id: String,
    task: String,
    subtask: String,
    question_id: String,
    trial_index: u32,
    answer_numeric: Option<f64>,
    answer_label: Option<String>,
    judged_correct: Option<String>,
    reference_value: Option<f64>,
    reference_label: Option<String>,
    stability_protocol: Option<String>,
    text_pass: Option<String>,
}

fn parse_bool(raw: Option<String>, line: usize, field: &str) -> Result<Option<bool>> {
    let Some(raw) = raw.filter(|s| !s.is_empty()) else {
        return Ok(None);
    };
    match raw.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(Some(true)),
        "false" | "0" | "no" => Ok(Some(false)),
        _ => Err(Error::parse(line, format!("{field}: `{raw}` is not a boolean"))),
    }
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.filter(|s| !s.is_empty())
}

/// Reads the trials CSV and checks `(model, question, protocol, trial_index)`
/// uniqueness.
pub fn read_trials<R: Read>(reader: R) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in rdr.deserialize::<TrialRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(line, e.to_string()))?;
        let task: Task = row.task.parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let subtask: Subtask = row.subtask.parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let stability_protocol = match non_empty(row.stability_protocol) {
            Some(p) => Some(p.parse().map_err(|e: Error| Error::parse(line, e.to_string()))?),
            None => None,
        };
        let rec = TrialRecord {
            model_id: row.model_id,
            spec: TaskSpec::new(task, subtask)?,
            question_id: row.question_id,
            trial_index: row.trial_index,
            answer_numeric: row.answer_numeric,
            answer_label: non_empty(row.answer_label),
            judged_correct: parse_bool(row.judged_correct, line, "judged_correct")?,
            reference_value: row.reference_value,
            reference_label: non_empty(row.reference_label),
            stability_protocol,
            text_pass: parse_bool(row.text_pass, line, "text_pass")?,
        };
        let key = (
            rec.model_id.clone(),
            rec.question_id.clone(),
            rec.stability_protocol,
            rec.trial_index,
        );
        if !seen.insert(key) {
            return Err(Error::InvalidTrialSet(format!(
                "line {line}: duplicate trial {} for model {} question {}",
                rec.trial_index, rec.model_id, rec.question_id
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_trials(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trials(file)
}

/// Axis used when the ballots file has no `axis` column.
pub const DEFAULT_AXIS: &str = "overall";

/// Reasoning axes scored by the evaluation team.
pub const REASONING_AXES: [&str; 3] = ["logical_deduction", "inductive_reasoning", "explanation"];

/// One reviewer ranking of every model's answer to one test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningBallot {
    pub test_id: String,
    pub axis: String,
    pub scores: BTreeMap<String, u32>,
}

impl ReasoningBallot {
    /// Scores must be a permutation of `1..=x`.
    pub fn validate(&self) -> Result<()> {
        let x = self.scores.len() as u32;
        let mut got: Vec<u32> = self.scores.values().copied().collect();
        got.sort_unstable();
        if x == 0 || got != (1..=x).collect::<Vec<_>>() {
            return Err(Error::InvalidBallot(self.test_id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct BallotRow {
    test_id: String,
    model_id: String,
    score: u32,
    #[serde(default)]
    axis: Option<String>,
}

/// Reads `test_id, model_id, score[, axis]` rows and groups them into
/// ballots, ordered by (axis, test_id).
pub fn read_ballots<R: Read>(reader: R) -> Result<Vec<ReasoningBallot>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut grouped: BTreeMap<(String, String), BTreeMap<String, u32>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<BallotRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(i + 2, e.to_string()))?;
        let axis = non_empty(row.axis).unwrap_or_else(|| DEFAULT_AXIS.to_string());
        let scores = grouped.entry((axis, row.test_id.clone())).or_default();
        if scores.insert(row.model_id, row.score).is_some() {
            return Err(Error::InvalidBallot(row.test_id));
        }
    }
    let ballots: Vec<ReasoningBallot> = grouped
        .into_iter()
        .map(|((axis, test_id), scores)| ReasoningBallot { test_id, axis, scores })
        .collect();
    for b in &ballots {
        b.validate()?;
    }
    Ok(ballots)
}

pub fn load_ballots(path: impl AsRef<Path>) -> Result<Vec<ReasoningBallot>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ballots(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "model_id,task,subtask,question_id,trial_index,answer_numeric,answer_label,judged_correct,reference_value,reference_label,stability_protocol,text_pass\n";

    #[test]
    fn reads_trials() {
        let text = format!(
            "{HEADER}m1,phenotyping_estimation,SPAD,q1,0,44.5,,,45,,,\n\
             m1,environmental_stress,WL,q2,0,,slight,,,slight,,\n\
             m1,germplasm_screening,HQ,q3,0,,,true,,,,\n\
             m1,seed_price_query,SP,q4,0,150,,,150,,consistency,\n"
        );
        let t = read_trials(text.as_bytes()).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t[0].answer_numeric, Some(44.5));
        assert_eq!(t[1].answer_label.as_deref(), Some("slight"));
        assert_eq!(t[2].judged_correct, Some(true));
        assert_eq!(t[3].stability_protocol, Some(StabilityProtocol::Consistency));
        assert_eq!(t[3].spec.answer_kind, AnswerKind::PriceConsistency);
    }

    #[test]
    fn rejects_wrong_task_and_duplicates() {
        let text = format!("{HEADER}m1,seed_price_query,HQ,q1,0,,,true,,,,\n");
        assert!(matches!(read_trials(text.as_bytes()), Err(Error::InvalidTrialSet(_))));
        let text = format!(
            "{HEADER}m1,germplasm_screening,HQ,q1,0,,,true,,,,\nm1,germplasm_screening,HQ,q1,0,,,false,,,,\n"
        );
        assert!(matches!(read_trials(text.as_bytes()), Err(Error::InvalidTrialSet(_))));
    }

    #[test]
    fn ballots_group_and_validate() {
        let text = "test_id,model_id,score\nt1,a,2\nt1,b,1\nt2,a,1\nt2,b,2\n";
        let b = read_ballots(text.as_bytes()).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].axis, DEFAULT_AXIS);
        assert_eq!(b[0].scores["a"], 2);
        let bad = "test_id,model_id,score\nt1,a,2\nt1,b,2\n";
        assert!(matches!(read_ballots(bad.as_bytes()), Err(Error::InvalidBallot(t)) if t == "t1"));
        let with_axis = "test_id,model_id,score,axis\nt1,a,1,explanation\nt1,b,2,explanation\nt1,a,2,logical_deduction\nt1,b,1,logical_deduction\n";
        let b = read_ballots(with_axis.as_bytes()).unwrap();
        assert_eq!(b.iter().map(|b| b.axis.as_str()).collect::<Vec<_>>(), vec!["explanation", "logical_deduction"]);
    }
}
