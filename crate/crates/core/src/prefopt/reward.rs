use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::policy::{ReferencePolicy, TabularPolicy};
use super::{check_tokens, PreferenceExample, Token};

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Linear scorer over answer-token frequencies and prompt × answer token
/// co-occurrence frequencies, plus a bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    pub vocab_size: usize,
    /// `V` answer-token weights.
    pub token_weights: Vec<f64>,
    /// `V × V` weights, row = prompt token, column = answer token.
    pub pair_weights: Vec<f64>,
    pub bias: f64,
}

/// Gradient with the same layout as [`RewardModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct RewardGradient {
    pub token_weights: Vec<f64>,
    pub pair_weights: Vec<f64>,
    pub bias: f64,
}

impl RewardModel {
    pub fn zeros(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            token_weights: vec![0.0; vocab_size],
            pair_weights: vec![0.0; vocab_size * vocab_size],
            bias: 0.0,
        }
    }

    /// Scores `+reward` for every occurrence of `token` (as a frequency).
    pub fn token_bonus(vocab_size: usize, token: Token, reward: f64) -> Self {
        let mut rm = Self::zeros(vocab_size);
        rm.token_weights[token as usize] = reward;
        rm
    }

    fn check(&self, prompt: &[Token], answer: &[Token]) -> Result<()> {
        check_tokens(prompt, self.vocab_size)?;
        check_tokens(answer, self.vocab_size)
    }

    /// Adds `scale · ∂score/∂θ` into `g`; the score is linear so this is
    /// just the feature vector.
    fn accumulate_features(&self, prompt: &[Token], answer: &[Token], scale: f64, g: &mut RewardGradient) {
        let v = self.vocab_size;
        let ny = answer.len().max(1) as f64;
        let nx = prompt.len().max(1) as f64;
        for &b in answer {
            g.token_weights[b as usize] += scale / ny;
            for &a in prompt {
                g.pair_weights[a as usize * v + b as usize] += scale / (nx * ny);
            }
        }
        g.bias += scale;
    }

    fn zero_gradient(&self) -> RewardGradient {
        RewardGradient {
            token_weights: vec![0.0; self.vocab_size],
            pair_weights: vec![0.0; self.vocab_size * self.vocab_size],
            bias: 0.0,
        }
    }

    /// `r_φ(x, y)`.
    pub fn score(&self, prompt: &[Token], answer: &[Token]) -> Result<f64> {
        self.check(prompt, answer)?;
        let mut f = self.zero_gradient();
        self.accumulate_features(prompt, answer, 1.0, &mut f);
        let dot = |w: &[f64], x: &[f64]| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        Ok(self.bias
            + dot(&self.token_weights, &f.token_weights)
            + dot(&self.pair_weights, &f.pair_weights))
    }

    pub fn apply(&mut self, g: &RewardGradient, scale: f64) {
        for (w, d) in self.token_weights.iter_mut().zip(&g.token_weights) {
            *w += scale * d;
        }
        for (w, d) in self.pair_weights.iter_mut().zip(&g.pair_weights) {
            *w += scale * d;
        }
        self.bias += scale * g.bias;
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite()
            && self.token_weights.iter().chain(&self.pair_weights).all(|v| v.is_finite())
    }
}

impl RewardGradient {
    pub fn norm(&self) -> f64 {
        (self.token_weights.iter().chain(&self.pair_weights).map(|v| v * v).sum::<f64>()
            + self.bias * self.bias)
            .sqrt()
    }
}

/// `-mean log σ(r(x, y_w) - r(x, y_l))` and its gradient.
pub fn rm_loss_and_grad(rm: &RewardModel, data: &[PreferenceExample]) -> Result<(f64, RewardGradient)> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut g = rm.zero_gradient();
    for ex in data {
        let d = rm.score(&ex.prompt, &ex.chosen)? - rm.score(&ex.prompt, &ex.rejected)?;
        loss += softplus(-d);
        let coef = -sigmoid(-d) / n;
        rm.accumulate_features(&ex.prompt, &ex.chosen, coef, &mut g);
        rm.accumulate_features(&ex.prompt, &ex.rejected, -coef, &mut g);
    }
    Ok((loss / n, g))
}

/// Gradient descent on the pairwise loss; returns the loss before each step.
pub fn train_reward_model(rm: &mut RewardModel, data: &[PreferenceExample], lr: f64, steps: usize) -> Result<Vec<f64>> {
    let mut history = Vec::with_capacity(steps);
    for iteration in 0..steps {
        let (loss, g) = rm_loss_and_grad(rm, data)?;
        if !loss.is_finite() || !g.norm().is_finite() {
            return Err(Error::Numerical { iteration });
        }
        history.push(loss);
        rm.apply(&g, -lr);
    }
    Ok(history)
}

/// `r_φ(x, y) - β (log π(y|x) - log π_ref(y|x))`.
pub fn combined_reward(
    rm: &RewardModel,
    policy: &TabularPolicy,
    reference: &ReferencePolicy,
    prompt: &[Token],
    answer: &[Token],
    beta: f64,
) -> Result<f64> {
    let r = rm.score(prompt, answer)?;
    let lp = policy.answer_log_prob(prompt, answer)?;
    let lr = reference.policy().answer_log_prob(prompt, answer)?;
    Ok(combined_from_parts(r, lp, lr, beta))
}

pub(crate) fn combined_from_parts(rm_score: f64, log_policy: f64, log_reference: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        return rm_score;
    }
    rm_score - beta * (log_policy - log_reference)
}

/// All `K(K-1)/2` (better, worse) pairs from `answers` ranked best first by
/// `ranking` (indices into `answers`).
pub fn pairwise_expand(prompt: &[Token], answers: &[Vec<Token>], ranking: &[usize]) -> Result<Vec<PreferenceExample>> {
    let k = answers.len();
    if k < 2 {
        return Err(Error::InvalidRanking(format!("need at least 2 answers, got {k}")));
    }
    let mut seen = vec![false; k];
    if ranking.len() != k || ranking.iter().any(|&i| i >= k || std::mem::replace(&mut seen[i], true)) {
        return Err(Error::InvalidRanking(format!("{ranking:?} is not a total order of {k} answers")));
    }
    for i in 0..k {
        if answers[..i].contains(&answers[i]) {
            return Err(Error::InvalidRanking(format!("answer {:?} appears twice", answers[i])));
        }
    }
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for (a, &better) in ranking.iter().enumerate() {
        for &worse in &ranking[a + 1..] {
            out.push(PreferenceExample {
                prompt: prompt.to_vec(),
                chosen: answers[better].clone(),
                rejected: answers[worse].clone(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rm(v: usize, seed: u64) -> RewardModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rm = RewardModel::zeros(v);
        for w in rm.token_weights.iter_mut().chain(rm.pair_weights.iter_mut()) {
            *w = rng.random::<f64>() * 2.0 - 1.0;
        }
        rm.bias = rng.random::<f64>();
        rm
    }

    fn param_mut(rm: &mut RewardModel, idx: usize) -> &mut f64 {
        let v = rm.vocab_size;
        if idx < v {
            &mut rm.token_weights[idx]
        } else {
            &mut rm.pair_weights[idx - v]
        }
    }

    fn random_tokens(rng: &mut ChaCha8Rng, v: usize, len: usize) -> Vec<Token> {
        (0..len).map(|_| rng.random_range(0..v as Token)).collect()
    }

    fn random_pairs(v: usize, n: usize, seed: u64) -> Vec<PreferenceExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| PreferenceExample {
                prompt: random_tokens(&mut rng, v, 2),
                chosen: random_tokens(&mut rng, v, 3),
                rejected: random_tokens(&mut rng, v, 2),
            })
            .collect()
    }

    #[test]
    fn equal_scores_cost_ln2() {
        let rm = RewardModel::zeros(3);
        let ex = [PreferenceExample { prompt: vec![0], chosen: vec![1], rejected: vec![2] }];
        let (loss, _) = rm_loss_and_grad(&rm, &ex).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn large_gap_loss_vanishes() {
        let rm = RewardModel::token_bonus(3, 1, 50.0);
        let ex = [PreferenceExample { prompt: vec![0], chosen: vec![1], rejected: vec![2] }];
        let (loss, _) = rm_loss_and_grad(&rm, &ex).unwrap();
        assert!(loss < 1e-20 && loss > 0.0);
    }

    #[test]
    fn combined_reward_cases() {
        assert!((combined_from_parts(1.0, -2.0, -3.0, 0.1) - 0.9).abs() < 1e-15);
        let rm = RewardModel::token_bonus(4, 0, 1.0);
        let mut p = TabularPolicy::uniform(4, 1).unwrap();
        p.set_logits(super::super::StateKey { prompt: vec![1], prefix: vec![] }, vec![1.0, 2.0, 0.0, -1.0]).unwrap();
        let r = ReferencePolicy::snapshot(&p);
        let s = rm.score(&[1], &[0]).unwrap();
        assert_eq!(combined_reward(&rm, &p, &r, &[1], &[0], 0.7).unwrap(), s);
        let other = ReferencePolicy::snapshot(&TabularPolicy::uniform(4, 1).unwrap());
        assert_eq!(combined_reward(&rm, &p, &other, &[1], &[0], 0.0).unwrap(), s);
    }

    #[test]
    fn pairwise_expansion() {
        let answers = vec![vec![0], vec![1], vec![2]];
        let pairs = pairwise_expand(&[9], &answers, &[0, 1, 2]).unwrap();
        let got: Vec<(Token, Token)> = pairs.iter().map(|p| (p.chosen[0], p.rejected[0])).collect();
        assert_eq!(got, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(pairwise_expand(&[9], &answers[..2], &[1, 0]).unwrap().len(), 1);
        let four: Vec<Vec<Token>> = (0..4).map(|i| vec![i]).collect();
        assert_eq!(pairwise_expand(&[9], &four, &[3, 1, 0, 2]).unwrap().len(), 6);
        assert!(matches!(
            pairwise_expand(&[9], &[vec![1], vec![1]], &[0, 1]),
            Err(Error::InvalidRanking(_))
        ));
        assert!(pairwise_expand(&[9], &answers, &[0, 0, 1]).is_err());
        assert!(pairwise_expand(&[9], &answers[..1], &[0]).is_err());
    }

    #[test]
    fn recovers_true_order_on_held_out_pairs() {
        let v = 6;
        let truth = random_rm(v, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let make = |n: usize, rng: &mut ChaCha8Rng| -> Vec<(PreferenceExample, bool)> {
            (0..n)
                .filter_map(|_| {
                    let x = random_tokens(rng, v, 2);
                    let a = random_tokens(rng, v, 3);
                    let b = random_tokens(rng, v, 3);
                    let sa = truth.score(&x, &a).unwrap();
                    let sb = truth.score(&x, &b).unwrap();
                    if (sa - sb).abs() < 0.05 {
                        return None;
                    }
                    let noise = (rng.random::<f64>() - 0.5) * 0.05;
                    let a_wins = sa - sb + noise > 0.0;
                    let (chosen, rejected) = if a_wins { (a, b) } else { (b, a) };
                    Some((PreferenceExample { prompt: x, chosen, rejected }, sa > sb))
                })
                .collect()
        };
        let train: Vec<PreferenceExample> = make(2000, &mut rng).into_iter().map(|p| p.0).collect();
        let held = make(500, &mut rng);
        let mut rm = RewardModel::zeros(v);
        let h = train_reward_model(&mut rm, &train, 2.0, 400).unwrap();
        assert!(h.last().unwrap() < &h[0]);
        let correct = held
            .iter()
            .filter(|(ex, _)| {
                let x = &ex.prompt;
                let pred_order = rm.score(x, &ex.chosen).unwrap() > rm.score(x, &ex.rejected).unwrap();
                let true_order = truth.score(x, &ex.chosen).unwrap() > truth.score(x, &ex.rejected).unwrap();
                pred_order == true_order
            })
            .count();
        let acc = correct as f64 / held.len() as f64;
        assert!(acc >= 0.95, "held-out accuracy {acc}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn rm_gradient_matches_finite_differences(seed in 0u64..10_000) {
            let mut rm = random_rm(3, seed);
            let data = random_pairs(3, 5, seed + 1);
            let (_, g) = rm_loss_and_grad(&rm, &data).unwrap();
            let h = 1e-5;
            let flat_len = 3 + 9;
            for idx in 0..flat_len {
                let orig = *param_mut(&mut rm, idx);
                *param_mut(&mut rm, idx) = orig + h;
                let up = rm_loss_and_grad(&rm, &data).unwrap().0;
                *param_mut(&mut rm, idx) = orig - h;
                let down = rm_loss_and_grad(&rm, &data).unwrap().0;
                *param_mut(&mut rm, idx) = orig;
                let fd = (up - down) / (2.0 * h);
                let an = if idx < 3 { g.token_weights[idx] } else { g.pair_weights[idx - 3] };
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                prop_assert!(rel < 1e-5, "param {idx}: {an} vs {fd}");
            }
            prop_assert_eq!(g.bias, 0.0);
        }

        #[test]
        fn swapping_pair_negates_the_margin(seed in 0u64..10_000) {
            let rm = random_rm(4, seed);
            let ex = random_pairs(4, 1, seed).remove(0);
            let swapped = PreferenceExample { prompt: ex.prompt.clone(), chosen: ex.rejected.clone(), rejected: ex.chosen.clone() };
            let l = rm_loss_and_grad(&rm, std::slice::from_ref(&ex)).unwrap().0;
            let ls = rm_loss_and_grad(&rm, &[swapped]).unwrap().0;
            let expected = -(-(-l).exp()).ln_1p();
            prop_assert!((ls - expected).abs() < 1e-9 * expected.abs().max(1.0));
        }

        #[test]
        fn reward_shift_equivariance(seed in 0u64..10_000, c in -100.0f64..100.0, beta in 0.0f64..2.0) {
            let rm = random_rm(3, seed);
            let mut shifted = rm.clone();
            shifted.bias += c;
            let p = super::super::policy::tests::random_policy(3, 1, seed, &[vec![1]], 2);
            let r = ReferencePolicy::snapshot(&TabularPolicy::uniform(3, 1).unwrap());
            let answers = super::super::policy::enumerate_answers(3, 2).unwrap();
            let base: Vec<f64> = answers.iter().map(|y| combined_reward(&rm, &p, &r, &[1], y, beta).unwrap()).collect();
            let moved: Vec<f64> = answers.iter().map(|y| combined_reward(&shifted, &p, &r, &[1], y, beta).unwrap()).collect();
            for (a, b) in base.iter().zip(&moved) {
                prop_assert!((b - a - c).abs() < 1e-9);
            }
            let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
            prop_assert_eq!(argmax(&base), argmax(&moved));
        }
    }
}
