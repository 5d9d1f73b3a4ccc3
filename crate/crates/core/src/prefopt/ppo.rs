use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::policy::{gradient_norm, sequence_kl, Gradient, ReferencePolicy, TabularPolicy};
use super::reward::{combined_from_parts, pairwise_expand, train_reward_model, RewardModel};
use super::{check_tokens, PreferenceExample, Token};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlhfConfig {
    /// KL coefficient.
    pub beta: f64,
    pub learning_rate: f64,
    pub ppo_clip: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Tokens per sampled answer.
    pub answer_length: usize,
    pub samples_per_prompt: usize,
    /// Minibatches per (single-epoch) update.
    pub minibatches: usize,
}

impl Default for RlhfConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            learning_rate: 0.5,
            ppo_clip: 0.2,
            iterations: 100,
            seed: 0,
            answer_length: 1,
            samples_per_prompt: 16,
            minibatches: 4,
        }
    }
}

impl RlhfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.ppo_clip > 0.0 && self.ppo_clip < 1.0) {
            return Err(Error::invalid(format!("ppo_clip must be in (0, 1), got {}", self.ppo_clip)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        if self.answer_length == 0 || self.samples_per_prompt == 0 || self.minibatches == 0 {
            return Err(Error::invalid(
                "answer_length, samples_per_prompt and minibatches must be positive",
            ));
        }
        Ok(())
    }
}

/// Per-iteration training diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub iteration: usize,
    /// Mean combined (KL-penalized) reward of the sampled answers.
    pub mean_reward: f64,
    pub mean_rm_reward: f64,
    /// Mean sequence KL to the reference over prompts; exact when the answer
    /// space is small, otherwise the sampled estimate.
    pub mean_kl: f64,
    pub clip_fraction: f64,
    /// `E[r_φ] - β·KL`.
    pub objective: f64,
}

struct Sample {
    prompt_idx: usize,
    answer: Vec<Token>,
    log_old: f64,
    advantage: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// One PPO iteration: sample answers from the current policy, score them with
/// the KL-penalized reward, normalize advantages over the batch and take one
/// pass of clipped-surrogate ascent split into minibatches.
pub fn rlhf_step(
    policy: &mut TabularPolicy,
    reference: &ReferencePolicy,
    rm: &RewardModel,
    prompts: &[Vec<Token>],
    config: &RlhfConfig,
    iteration: usize,
) -> Result<StepDiagnostics> {
    if prompts.is_empty() {
        return Err(Error::EmptyInput);
    }
    config.validate()?;
    for p in prompts {
        check_tokens(p, policy.vocab_size())?;
    }
    let numerical = || Error::Numerical { iteration };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(iteration as u64));

    let mut samples = Vec::new();
    let mut rewards = Vec::new();
    let mut rm_rewards = Vec::new();
    let mut sample_kl = vec![0.0; prompts.len()];
    for (pi, x) in prompts.iter().enumerate() {
        for _ in 0..config.samples_per_prompt {
            let y = policy.sample_answer(x, config.answer_length, &mut rng);
            let log_old = policy.answer_log_prob(x, &y)?;
            let log_ref = reference.policy().answer_log_prob(x, &y)?;
            let r_phi = rm.score(x, &y)?;
            let r = combined_from_parts(r_phi, log_old, log_ref, config.beta);
            if !r.is_finite() {
                return Err(numerical());
            }
            sample_kl[pi] += (log_old - log_ref) / config.samples_per_prompt as f64;
            rewards.push(r);
            rm_rewards.push(r_phi);
            samples.push(Sample { prompt_idx: pi, answer: y, log_old, advantage: 0.0 });
        }
    }

    let mean_reward = mean(&rewards);
    let sd = (rewards.iter().map(|r| (r - mean_reward).powi(2)).sum::<f64>() / rewards.len() as f64).sqrt();
    for (s, r) in samples.iter_mut().zip(&rewards) {
        s.advantage = if sd > 0.0 { (r - mean_reward) / sd } else { 0.0 };
    }

    let mut clipped = 0usize;
    if config.learning_rate > 0.0 {
        let n = samples.len();
        let mb = config.minibatches.min(n);
        let (base, extra) = (n / mb, n % mb);
        let mut start = 0;
        for b in 0..mb {
            let size = base + usize::from(b < extra);
            let batch = &samples[start..start + size];
            start += size;
            let mut g = Gradient::new();
            for s in batch {
                let x = &prompts[s.prompt_idx];
                let ratio = (policy.answer_log_prob(x, &s.answer)? - s.log_old).exp();
                let a = s.advantage;
                let is_clipped = (a > 0.0 && ratio > 1.0 + config.ppo_clip)
                    || (a < 0.0 && ratio < 1.0 - config.ppo_clip);
                if is_clipped {
                    clipped += 1;
                } else if a != 0.0 {
                    policy.accumulate_log_prob_grad(x, &s.answer, a * ratio / size as f64, &mut g);
                }
            }
            if !gradient_norm(&g).is_finite() {
                return Err(numerical());
            }
            policy.add_scaled(&g, config.learning_rate);
            if !policy.is_finite() {
                return Err(numerical());
            }
        }
    }

    let mut kls = Vec::with_capacity(prompts.len());
    for (pi, x) in prompts.iter().enumerate() {
        let exact = sequence_kl(policy, reference, x, config.answer_length)?;
        kls.push(exact.unwrap_or(sample_kl[pi]));
    }
    let mean_kl = mean(&kls);
    let mean_rm_reward = mean(&rm_rewards);
    let d = StepDiagnostics {
        iteration,
        mean_reward,
        mean_rm_reward,
        mean_kl,
        clip_fraction: clipped as f64 / samples.len() as f64,
        objective: mean_rm_reward - config.beta * mean_kl,
    };
    if ![d.mean_reward, d.mean_kl, d.objective].iter().all(|v| v.is_finite()) {
        return Err(numerical());
    }
    Ok(d)
}

/// Runs `config.iterations` PPO steps.
pub fn train_rlhf(
    policy: &mut TabularPolicy,
    reference: &ReferencePolicy,
    rm: &RewardModel,
    prompts: &[Vec<Token>],
    config: &RlhfConfig,
) -> Result<Vec<StepDiagnostics>> {
    (0..config.iterations)
        .map(|i| rlhf_step(policy, reference, rm, prompts, config, i))
        .collect()
}

/// Settings for the alternating reward-model / policy loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeConfig {
    pub rounds: usize,
    /// Answers drawn per prompt for ranking.
    pub k: usize,
    pub rm_learning_rate: f64,
    pub rm_steps: usize,
}

/// Alternates: draw `k` answers per prompt from the current policy, have
/// `rank` order them best first, retrain the reward model on the expanded
/// pairs, then continue policy optimization.
pub fn iterative_rlhf<F>(
    policy: &mut TabularPolicy,
    reference: &ReferencePolicy,
    rm: &mut RewardModel,
    prompts: &[Vec<Token>],
    config: &RlhfConfig,
    iterative: &IterativeConfig,
    mut rank: F,
) -> Result<Vec<StepDiagnostics>>
where
    F: FnMut(&[Token], &[Vec<Token>]) -> Vec<usize>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut history = Vec::new();
    for round in 0..iterative.rounds {
        let mut pairs: Vec<PreferenceExample> = Vec::new();
        for x in prompts {
            let mut answers: Vec<Vec<Token>> = Vec::new();
            let mut attempts = 0;
            while answers.len() < iterative.k && attempts < 50 * iterative.k {
                let y = policy.sample_answer(x, config.answer_length, &mut rng);
                if !answers.contains(&y) {
                    answers.push(y);
                }
                attempts += 1;
            }
            if answers.len() < 2 {
                continue;
            }
            let order = rank(x, &answers);
            pairs.extend(pairwise_expand(x, &answers, &order)?);
        }
        if !pairs.is_empty() {
            train_reward_model(rm, &pairs, iterative.rm_learning_rate, iterative.rm_steps)?;
        }
        let offset = round * config.iterations;
        for i in 0..config.iterations {
            history.push(rlhf_step(policy, reference, rm, prompts, config, offset + i)?);
        }
    }
    Ok(history)
}

/// `iteration, mean_reward, mean_rm_reward, mean_kl, clip_fraction, objective`.
pub fn write_diagnostics_csv<W: Write>(rows: &[StepDiagnostics], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
