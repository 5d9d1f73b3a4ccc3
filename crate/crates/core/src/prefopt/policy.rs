use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{check_tokens, SftExample, Token};

/// Conditioning state of one generation step: the full prompt plus the last
/// `context_length` answer tokens.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateKey {
    pub prompt: Vec<Token>,
    pub prefix: Vec<Token>,
}

impl StateKey {
    pub fn at(prompt: &[Token], answer: &[Token], t: usize, context_length: usize) -> Self {
        let start = t.saturating_sub(context_length);
        Self {
            prompt: prompt.to_vec(),
            prefix: answer[start..t].to_vec(),
        }
    }
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Sparse parameter-shaped vector: one logit-sized row per touched state.
pub type Gradient = BTreeMap<StateKey, Vec<f64>>;

/// L2 norm of a gradient.
pub fn gradient_norm(g: &Gradient) -> f64 {
    g.values().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Tabular autoregressive policy. States without a stored row have all-zero
/// logits, i.e. a uniform next-token distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    vocab_size: usize,
    context_length: usize,
    rows: BTreeMap<StateKey, Vec<f64>>,
}

impl TabularPolicy {
    pub fn uniform(vocab_size: usize, context_length: usize) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::invalid(format!("vocabulary needs at least 2 tokens, got {vocab_size}")));
        }
        Ok(Self {
            vocab_size,
            context_length,
            rows: BTreeMap::new(),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn context_length(&self) -> usize {
        self.context_length
    }

    pub fn rows(&self) -> &BTreeMap<StateKey, Vec<f64>> {
        &self.rows
    }

    pub fn logits(&self, key: &StateKey) -> Vec<f64> {
        self.rows
            .get(key)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.vocab_size])
    }

    pub fn set_logits(&mut self, key: StateKey, logits: Vec<f64>) -> Result<()> {
        if logits.len() != self.vocab_size {
            return Err(Error::invalid(format!(
                "logit row has {} entries, vocabulary is {}",
                logits.len(),
                self.vocab_size
            )));
        }
        self.rows.insert(key, logits);
        Ok(())
    }

    pub fn key(&self, prompt: &[Token], answer: &[Token], t: usize) -> StateKey {
        StateKey::at(prompt, answer, t, self.context_length)
    }

    /// `θ ← θ + scale · g`.
    pub fn add_scaled(&mut self, g: &Gradient, scale: f64) {
        for (k, row) in g {
            let target = self
                .rows
                .entry(k.clone())
                .or_insert_with(|| vec![0.0; self.vocab_size]);
            for (t, d) in target.iter_mut().zip(row) {
                *t += scale * d;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rows.values().flatten().all(|v| v.is_finite())
    }

    /// Next-token distribution at step `t` of `answer`. Panics if `t > answer.len()`.
    pub fn next_token_probs(&self, prompt: &[Token], answer: &[Token], t: usize) -> Vec<f64> {
        softmax(&self.logits(&self.key(prompt, answer, t)))
    }

    /// Per-step `log π(y_t | x, y_<t)`.
    pub fn step_log_probs(&self, prompt: &[Token], answer: &[Token]) -> Result<Vec<f64>> {
        check_tokens(prompt, self.vocab_size)?;
        check_tokens(answer, self.vocab_size)?;
        Ok((0..answer.len())
            .map(|t| log_softmax(&self.logits(&self.key(prompt, answer, t)))[answer[t] as usize])
            .collect())
    }

    /// `log π(y | x) = Σ_t log π(y_t | x, y_<t)`.
    pub fn answer_log_prob(&self, prompt: &[Token], answer: &[Token]) -> Result<f64> {
        Ok(self.step_log_probs(prompt, answer)?.iter().sum())
    }

    /// Adds `scale · ∇_θ log π(y | x)` into `g`.
    pub fn accumulate_log_prob_grad(&self, prompt: &[Token], answer: &[Token], scale: f64, g: &mut Gradient) {
        for t in 0..answer.len() {
            let key = self.key(prompt, answer, t);
            let p = softmax(&self.logits(&key));
            let row = g.entry(key).or_insert_with(|| vec![0.0; self.vocab_size]);
            for (v, pv) in p.iter().enumerate() {
                let onehot = if v == answer[t] as usize { 1.0 } else { 0.0 };
                row[v] += scale * (onehot - pv);
            }
        }
    }

    pub fn sample_answer<R: Rng + ?Sized>(&self, prompt: &[Token], len: usize, rng: &mut R) -> Vec<Token> {
        let mut answer = Vec::with_capacity(len);
        for t in 0..len {
            let p = self.next_token_probs(prompt, &answer, t);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = p.len() - 1;
            for (v, pv) in p.iter().enumerate() {
                acc += pv;
                if u < acc {
                    pick = v;
                    break;
                }
            }
            answer.push(pick as Token);
        }
        answer
    }

    /// Highest-probability token at every step (ties to the lower id).
    pub fn greedy_answer(&self, prompt: &[Token], len: usize) -> Vec<Token> {
        let mut answer = Vec::with_capacity(len);
        for t in 0..len {
            let l = self.logits(&self.key(prompt, &answer, t));
            let best = (0..l.len()).fold(0, |b, v| if l[v] > l[b] { v } else { b });
            answer.push(best as Token);
        }
        answer
    }
}

/// A frozen snapshot of a policy used as the KL anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePolicy(TabularPolicy);

impl ReferencePolicy {
    pub fn snapshot(policy: &TabularPolicy) -> Self {
        Self(policy.clone())
    }

    pub fn policy(&self) -> &TabularPolicy {
        &self.0
    }
}

/// Negative mean answer log-likelihood and its exact gradient.
pub fn sft_loss_and_grad(policy: &TabularPolicy, data: &[SftExample]) -> Result<(f64, Gradient)> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut g = Gradient::new();
    for ex in data {
        loss -= policy.answer_log_prob(&ex.prompt, &ex.answer)?;
        // descent direction of -log π is -(onehot - softmax)
        policy.accumulate_log_prob_grad(&ex.prompt, &ex.answer, -1.0 / n, &mut g);
    }
    Ok((loss / n, g))
}

/// Plain gradient descent on the SFT loss; returns the loss before each step.
pub fn train_sft(policy: &mut TabularPolicy, data: &[SftExample], lr: f64, steps: usize) -> Result<Vec<f64>> {
    let mut history = Vec::with_capacity(steps);
    for iteration in 0..steps {
        let (loss, g) = sft_loss_and_grad(policy, data)?;
        if !loss.is_finite() || !gradient_norm(&g).is_finite() {
            return Err(Error::Numerical { iteration });
        }
        history.push(loss);
        policy.add_scaled(&g, -lr);
    }
    Ok(history)
}

/// Answers small enough to enumerate exactly.
pub const EXACT_ENUMERATION_LIMIT: usize = 4096;

/// Every token sequence of length `len`, or `None` above the enumeration limit.
pub fn enumerate_answers(vocab_size: usize, len: usize) -> Option<Vec<Vec<Token>>> {
    let total = (vocab_size as u128).checked_pow(len as u32)?;
    if total > EXACT_ENUMERATION_LIMIT as u128 {
        return None;
    }
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|a| {
                (0..vocab_size as Token).map(move |v| {
                    let mut b = a.clone();
                    b.push(v);
                    b
                })
            })
            .collect();
    }
    Some(out)
}

/// Exact sequence-level `KL(π ‖ π_ref)` for one prompt, by enumeration.
pub fn sequence_kl(
    policy: &TabularPolicy,
    reference: &ReferencePolicy,
    prompt: &[Token],
    len: usize,
) -> Result<Option<f64>> {
    let Some(answers) = enumerate_answers(policy.vocab_size(), len) else {
        return Ok(None);
    };
    let mut kl = 0.0;
    for y in answers {
        let lp = policy.answer_log_prob(prompt, &y)?;
        let lr = reference.policy().answer_log_prob(prompt, &y)?;
        kl += lp.exp() * (lp - lr);
    }
    Ok(Some(kl.max(0.0)))
}
