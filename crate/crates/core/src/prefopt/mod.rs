//! Toy-scale preference optimization: a tabular autoregressive policy, SFT,
//! a pairwise reward model and PPO against a KL-penalized reward.

mod policy;
mod ppo;
mod reward;

pub use policy::{
    enumerate_answers, gradient_norm, log_softmax, sequence_kl, sft_loss_and_grad, softmax,
    train_sft, Gradient, ReferencePolicy, StateKey, TabularPolicy, EXACT_ENUMERATION_LIMIT,
};
pub use ppo::{
    iterative_rlhf, rlhf_step, train_rlhf, write_diagnostics_csv, IterativeConfig, RlhfConfig,
    StepDiagnostics,
};
pub use reward::{
    combined_reward, pairwise_expand, rm_loss_and_grad, sigmoid, softplus, train_reward_model,
    RewardGradient, RewardModel,
};

use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Token = u32;

pub(crate) fn check_tokens(tokens: &[Token], vocab_size: usize) -> Result<()> {
    match tokens.iter().find(|&&t| t as usize >= vocab_size) {
        Some(&token) => Err(Error::InvalidToken { token, vocab_size }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftExample {
    pub prompt: Vec<Token>,
    pub answer: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceExample {
    pub prompt: Vec<Token>,
    pub chosen: Vec<Token>,
    pub rejected: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExample {
    pub prompt: Vec<Token>,
}

/// Reads line-delimited JSON, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn load_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(std::io::BufReader::new(file))
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut w: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
    }
    Ok(())
}

/// Preference pairs must differ and stay inside the vocabulary.
pub fn validate_preferences(data: &[PreferenceExample], vocab_size: usize) -> Result<()> {
    for (i, ex) in data.iter().enumerate() {
        if ex.chosen == ex.rejected {
            return Err(Error::parse(i + 1, "chosen and rejected answers are identical"));
        }
        for seq in [&ex.prompt, &ex.chosen, &ex.rejected] {
            check_tokens(seq, vocab_size)?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PolicyRow {
    prompt: Vec<Token>,
    prefix: Vec<Token>,
    logits: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    vocab_size: usize,
    context_length: usize,
    rows: Vec<PolicyRow>,
}

impl Serialize for TabularPolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolicyFile {
            vocab_size: self.vocab_size(),
            context_length: self.context_length(),
            rows: self
                .rows()
                .iter()
                .map(|(k, l)| PolicyRow {
                    prompt: k.prompt.clone(),
                    prefix: k.prefix.clone(),
                    logits: l.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TabularPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = PolicyFile::deserialize(d)?;
        let mut p = TabularPolicy::uniform(file.vocab_size, file.context_length).map_err(D::Error::custom)?;
        for row in file.rows {
            p.set_logits(StateKey { prompt: row.prompt, prefix: row.prefix }, row.logits)
                .map_err(D::Error::custom)?;
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let data = vec![
            PreferenceExample { prompt: vec![1, 2], chosen: vec![0], rejected: vec![3] },
            PreferenceExample { prompt: vec![], chosen: vec![2, 2], rejected: vec![1] },
        ];
        let mut buf = Vec::new();
        write_jsonl(&data, &mut buf).unwrap();
        let back: Vec<PreferenceExample> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, data);
        let bad = "{\"prompt\": [1]}\n{\"prompt\": }\n";
        let err = read_jsonl::<PromptExample, _>(bad.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn policy_json_round_trip() {
        let mut p = TabularPolicy::uniform(3, 1).unwrap();
        p.set_logits(StateKey { prompt: vec![0], prefix: vec![2] }, vec![0.1, -2.5, 1e-9]).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: TabularPolicy = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn preference_validation() {
        let same = [PreferenceExample { prompt: vec![0], chosen: vec![1], rejected: vec![1] }];
        assert!(validate_preferences(&same, 4).is_err());
        let oov = [PreferenceExample { prompt: vec![9], chosen: vec![1], rejected: vec![2] }];
        assert!(matches!(validate_preferences(&oov, 4), Err(Error::InvalidToken { token: 9, .. })));
    }
}
