//! SFT, a pairwise reward model and clipped PPO on a tiny tabular policy.
//!
//! ```text
//! cargo run --example preference_optimization
//! ```

use breedkit::prefopt::{
    train_reward_model, train_rlhf, train_sft, PreferenceExample, ReferencePolicy, RewardModel,
    RlhfConfig, SftExample, TabularPolicy,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = 4;
    let sft = vec![
        SftExample { prompt: vec![0], answer: vec![2] },
        SftExample { prompt: vec![1], answer: vec![3] },
    ];
    let mut policy = TabularPolicy::uniform(vocab, 1)?;
    let losses = train_sft(&mut policy, &sft, 1.0, 20)?;
    println!("SFT loss {:.4} -> {:.4}", losses[0], losses[losses.len() - 1]);

    let prefs = vec![
        PreferenceExample { prompt: vec![0], chosen: vec![2], rejected: vec![1] },
        PreferenceExample { prompt: vec![0], chosen: vec![2], rejected: vec![3] },
        PreferenceExample { prompt: vec![1], chosen: vec![3], rejected: vec![0] },
        PreferenceExample { prompt: vec![1], chosen: vec![1], rejected: vec![3] },
    ];
    let mut rm = RewardModel::zeros(vocab);
    let rm_losses = train_reward_model(&mut rm, &prefs, 0.5, 300)?;
    println!("RM loss {:.4} -> {:.4}", rm_losses[0], rm_losses[rm_losses.len() - 1]);

    let reference = ReferencePolicy::snapshot(&policy);
    let prompts = vec![vec![0], vec![1]];
    // the preferences favour token 1 after prompt 1, SFT taught token 3
    for beta in [0.01, 0.3, 3.0] {
        let mut p = policy.clone();
        let cfg = RlhfConfig { beta, iterations: 200, seed: 1, ..Default::default() };
        let hist = train_rlhf(&mut p, &reference, &rm, &prompts, &cfg)?;
        let last = &hist[hist.len() - 1];
        println!(
            "beta {beta:<5} reward {:.3}  KL {:.4}  clipped {:.2}  P(1|1) {:.3}  P(3|1) {:.3}",
            last.mean_rm_reward,
            last.mean_kl,
            last.clip_fraction,
            p.next_token_probs(&[1], &[], 0)[1],
            p.next_token_probs(&[1], &[], 0)[3]
        );
    }
    Ok(())
}
