//! Monte Carlo oracle for the threshold rule on random permutations.
//!
//! Each trial draws `n` i.i.d. uniform scores (distinct with probability 1,
//! so only ranks matter), rejects the first `alpha_index`, then accepts
//! candidates strictly above the best observed score until the budget is
//! filled, with forced acceptance at the tail. Two success events are
//! recorded per trial:
//!
//! * [`SuccessEvent::RecordChain`]: exactly `R` new running maxima appear
//!   after the observation phase. Writing `i_1` for the global best, `i_2`
//!   for the best before `i_1`, and so on, this says `i_R > α` while the best
//!   before `i_R` lies in `[1, α]`, whose probability is
//!   `α/(N−R+1) · K(R, α)`. This is the event the closed-form probability
//!   approximates.
//! * [`SuccessEvent::TopSet`]: the rule's selected set equals the set of the
//!   `R` globally best candidates. Strictly rarer than the record chain for
//!   `R ≥ 2`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stopping::ProbabilityEstimate;

pub const MIN_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessEvent {
    #[default]
    RecordChain,
    TopSet,
}

/// Outcome of one permutation trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialRecord {
    /// New running maxima strictly after the observation phase.
    pub records_after_alpha: usize,
    pub forced_acceptances: usize,
    /// Selected set equals the global top-`R` set.
    pub top_set: bool,
}

impl TrialRecord {
    pub fn success(&self, event: SuccessEvent, budget: usize) -> bool {
        match event {
            SuccessEvent::RecordChain => self.records_after_alpha == budget,
            SuccessEvent::TopSet => self.top_set,
        }
    }
}

/// Run the threshold rule on one score vector.
pub fn run_trial(scores: &[f64], budget: usize, alpha_index: usize) -> TrialRecord {
    let n = scores.len();
    let threshold = scores[..alpha_index].iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut running = threshold;
    let mut records = 0;
    for &s in &scores[alpha_index..] {
        if s > running {
            running = s;
            records += 1;
        }
    }

    let mut taken = 0;
    let mut forced = 0;
    let mut min_selected = f64::INFINITY;
    for (i, &s) in scores.iter().enumerate().skip(alpha_index) {
        if taken == budget {
            break;
        }
        let remaining = n - i;
        if remaining <= budget - taken {
            forced += 1;
        } else if s <= threshold {
            continue;
        }
        taken += 1;
        min_selected = min_selected.min(s);
    }
    // with distinct scores, the selection is the top set iff exactly R − 1
    // scores beat its weakest member
    let above = scores.iter().filter(|&&s| s > min_selected).count();
    TrialRecord {
        records_after_alpha: records,
        forced_acceptances: forced,
        top_set: taken == budget && above == budget - 1,
    }
}

/// Fraction of random-order trials on which the threshold rule succeeds,
/// using the record-chain event.
pub fn monte_carlo_top_r_probability(
    n: usize,
    budget: usize,
    alpha_index: usize,
    trials: u64,
    seed: u64,
) -> Result<ProbabilityEstimate> {
    monte_carlo_probability(n, budget, alpha_index, trials, seed, SuccessEvent::RecordChain)
}

pub fn monte_carlo_probability(
    n: usize,
    budget: usize,
    alpha_index: usize,
    trials: u64,
    seed: u64,
    event: SuccessEvent,
) -> Result<ProbabilityEstimate> {
    if n == 0 || budget == 0 || budget > n {
        return Err(Error::domain(format!("need 1 ≤ budget ≤ n, got budget {budget}, n {n}")));
    }
    if alpha_index > n - budget {
        return Err(Error::domain(format!(
            "alpha index {alpha_index} leaves fewer than {budget} candidates"
        )));
    }
    if trials < MIN_TRIALS {
        return Err(Error::domain(format!("at least {MIN_TRIALS} trials required, got {trials}")));
    }
    let mut rng = rng::rng_from(seed, &[]);
    let mut scores = vec![0.0f64; n];
    let mut hits = 0u64;
    for _ in 0..trials {
        for s in scores.iter_mut() {
            *s = rng.gen();
        }
        if run_trial(&scores, budget, alpha_index).success(event, budget) {
            hits += 1;
        }
    }
    Ok(ProbabilityEstimate::from_counts(hits, trials))
}
