//! Online accept/reject policies over a stream of probed candidates.
//!
//! Decisions are irrevocable: the selected list only ever grows, and a
//! candidate's verdict is final once emitted.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};
use crate::stopping::BudgetSpec;

/// One arriving client together with its probe result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    /// 1-based position in the arrival stream.
    pub arrival_index: usize,
    pub client_id: String,
    pub probe_accuracy: f64,
}

impl Candidate {
    pub fn new(arrival_index: usize, client_id: impl Into<String>, probe_accuracy: f64) -> Self {
        Self { arrival_index, client_id: client_id.into(), probe_accuracy }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Reject,
    Accept,
    AcceptForced,
    SkipUnprobed,
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        matches!(self, Verdict::Accept | Verdict::AcceptForced)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    /// Inside the observation phase; only updates the threshold.
    Observation,
    BelowThreshold,
    AboveThreshold,
    /// Remaining arrivals equal remaining budget slots.
    ForcedFill,
    BudgetFull,
    RandomDraw,
    OfflineRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub verdict: Verdict,
    pub reason: Reason,
}

impl Decision {
    fn new(verdict: Verdict, reason: Reason) -> Self {
        Self { verdict, reason }
    }

    /// Whether the candidate's accuracy had to be measured for this decision.
    pub fn probed(&self) -> bool {
        self.verdict != Verdict::SkipUnprobed
    }
}

/// Mutable state of one selection pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionState {
    pub spec: BudgetSpec,
    /// Best probe accuracy seen during the observation phase; the threshold.
    pub best_observed_accuracy: f64,
    /// Arrival index of the threshold candidate, 0 if none yet.
    pub best_observed_index: usize,
    selected: Vec<Candidate>,
    pub n_observed: usize,
    pub forced_acceptances: usize,
}

impl SelectionState {
    pub fn new(spec: BudgetSpec) -> Self {
        Self {
            spec,
            best_observed_accuracy: 0.0,
            best_observed_index: 0,
            selected: Vec::new(),
            n_observed: 0,
            forced_acceptances: 0,
        }
    }

    pub fn selected(&self) -> &[Candidate] {
        &self.selected
    }

    pub fn n_selected(&self) -> usize {
        self.selected.len()
    }

    pub fn budget_full(&self) -> bool {
        self.selected.len() >= self.spec.budget
    }

    pub fn is_finished(&self) -> bool {
        self.n_observed >= self.spec.n_candidates
    }

    pub fn into_selected(self) -> Vec<Candidate> {
        self.selected
    }

    fn check_next(&self, arrival_index: usize) -> Result<()> {
        if self.is_finished() {
            return Err(Error::State(format!(
                "all {} candidates have already been observed",
                self.spec.n_candidates
            )));
        }
        let expected = self.n_observed + 1;
        if arrival_index != expected {
            return Err(Error::Sequencing { expected, got: arrival_index });
        }
        Ok(())
    }

    fn check_accuracy(acc: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&acc) {
            return Err(Error::domain(format!("probe accuracy must lie in [0, 1], got {acc}")));
        }
        Ok(())
    }

    fn accept(&mut self, candidate: Candidate, forced: bool) {
        debug_assert!(!self.budget_full());
        if forced {
            self.forced_acceptances += 1;
        }
        self.selected.push(candidate);
    }

    /// Secretary rule with lazy probing: `probe` is only called when the
    /// decision needs the candidate's accuracy. Returns the decision and the
    /// accuracy if one was measured.
    pub fn observe_secretary_with<F>(
        &mut self,
        arrival_index: usize,
        client_id: &str,
        probe: F,
    ) -> Result<(Decision, Option<f64>)>
    where
        F: FnOnce() -> Result<f64>,
    {
        self.check_next(arrival_index)?;
        let spec = &self.spec;
        let decision;
        let mut measured = None;
        if arrival_index <= spec.alpha_star_index {
            let acc = probe()?;
            Self::check_accuracy(acc)?;
            measured = Some(acc);
            // the first observation sets the index even at accuracy 0
            if acc > self.best_observed_accuracy || self.best_observed_index == 0 {
                self.best_observed_accuracy = self.best_observed_accuracy.max(acc);
                self.best_observed_index = arrival_index;
            }
            decision = Decision::new(Verdict::Reject, Reason::Observation);
        } else if self.budget_full() {
            decision = Decision::new(Verdict::SkipUnprobed, Reason::BudgetFull);
        } else {
            let acc = probe()?;
            Self::check_accuracy(acc)?;
            measured = Some(acc);
            let forced = spec.remaining_at(arrival_index) <= spec.budget - self.selected.len();
            let candidate = Candidate::new(arrival_index, client_id, acc);
            if forced {
                self.accept(candidate, true);
                decision = Decision::new(Verdict::AcceptForced, Reason::ForcedFill);
            } else if acc > self.best_observed_accuracy {
                self.accept(candidate, false);
                decision = Decision::new(Verdict::Accept, Reason::AboveThreshold);
            } else {
                decision = Decision::new(Verdict::Reject, Reason::BelowThreshold);
            }
        }
        self.n_observed += 1;
        Ok((decision, measured))
    }
}

/// Secretary rule on an already-probed candidate.
pub fn secretary_observe(state: &mut SelectionState, candidate: &Candidate) -> Result<Decision> {
    let acc = candidate.probe_accuracy;
    state
        .observe_secretary_with(candidate.arrival_index, &candidate.client_id, || Ok(acc))
        .map(|(d, _)| d)
}

/// Online random baseline: sequential sampling that accepts with
/// probability `(R − selected)/(remaining arrivals)`, which fills the
/// budget exactly and makes every size-`R` subset equally likely.
pub fn random_observe(
    state: &mut SelectionState,
    candidate: &Candidate,
    rng: &mut SimRng,
) -> Result<Decision> {
    state.check_next(candidate.arrival_index)?;
    let decision = if state.budget_full() {
        Decision::new(Verdict::SkipUnprobed, Reason::BudgetFull)
    } else {
        let slots = state.spec.budget - state.selected.len();
        let remaining = state.spec.remaining_at(candidate.arrival_index);
        // draw even when forced so the stream consumption is index-aligned
        let u: f64 = rng.gen();
        if u * (remaining as f64) < slots as f64 {
            state.accept(candidate.clone(), false);
            Decision::new(Verdict::Accept, Reason::RandomDraw)
        } else {
            Decision::new(Verdict::Reject, Reason::RandomDraw)
        }
    };
    state.n_observed += 1;
    Ok(decision)
}

/// Offline baseline: the `budget` candidates with the highest probe
/// accuracy, ties going to the earlier arrival. Returned best first.
pub fn offline_best_select(candidates: &[Candidate], budget: usize) -> Result<Vec<Candidate>> {
    if candidates.len() < budget {
        return Err(Error::Size { need: budget, got: candidates.len() });
    }
    let mut order: Vec<&Candidate> = candidates.iter().collect();
    order.sort_by(|a, b| {
        b.probe_accuracy
            .total_cmp(&a.probe_accuracy)
            .then(a.arrival_index.cmp(&b.arrival_index))
    });
    Ok(order.into_iter().take(budget).cloned().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Secretary,
    Random,
    Best,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Secretary, PolicyKind::Random, PolicyKind::Best];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Secretary => "secretary",
            PolicyKind::Random => "random",
            PolicyKind::Best => "best",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "secretary" => Ok(PolicyKind::Secretary),
            "random" => Ok(PolicyKind::Random),
            "best" => Ok(PolicyKind::Best),
            other => Err(Error::Parse(format!("unknown policy {other:?}"))),
        }
    }
}

/// One line of the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub arrival_index: usize,
    pub client_id: String,
    /// `None` when the candidate was never probed.
    pub probe_accuracy: Option<f64>,
    pub verdict: Verdict,
    pub reason: Reason,
    pub n_selected: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionAudit {
    pub policy: PolicyKind,
    pub alpha_index: usize,
    pub entries: Vec<AuditEntry>,
    pub selected: Vec<Candidate>,
    pub forced_acceptances: usize,
}

impl SelectionAudit {
    pub fn probe_count(&self) -> usize {
        self.entries.iter().filter(|e| e.probe_accuracy.is_some()).count()
    }

    pub fn selected_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.selected.iter().map(|c| c.arrival_index).collect();
        v.sort_unstable();
        v
    }
}

/// Drive one policy over a fully probed stream.
pub fn run_stream(
    policy: PolicyKind,
    spec: &BudgetSpec,
    stream: &[Candidate],
    seed: u64,
) -> Result<SelectionAudit> {
    if stream.len() != spec.n_candidates {
        return Err(Error::Size { need: spec.n_candidates, got: stream.len() });
    }
    let mut entries = Vec::with_capacity(stream.len());
    match policy {
        PolicyKind::Best => {
            for c in stream {
                SelectionState::check_accuracy(c.probe_accuracy)?;
            }
            let chosen = offline_best_select(stream, spec.budget)?;
            let mut picked = vec![false; stream.len() + 1];
            for c in &chosen {
                picked[c.arrival_index] = true;
            }
            let mut count = 0;
            for c in stream {
                let verdict = if picked.get(c.arrival_index).copied().unwrap_or(false) {
                    count += 1;
                    Verdict::Accept
                } else {
                    Verdict::Reject
                };
                entries.push(AuditEntry {
                    arrival_index: c.arrival_index,
                    client_id: c.client_id.clone(),
                    probe_accuracy: Some(c.probe_accuracy),
                    verdict,
                    reason: Reason::OfflineRank,
                    n_selected: count,
                    threshold: 0.0,
                });
            }
            Ok(SelectionAudit {
                policy,
                alpha_index: 0,
                entries,
                selected: chosen,
                forced_acceptances: 0,
            })
        }
        PolicyKind::Secretary | PolicyKind::Random => {
            let mut state = SelectionState::new(spec.clone());
            let mut rng = rng::rng_from(seed, &[rng::TAG_RANDOM_POLICY]);
            for c in stream {
                let d = match policy {
                    PolicyKind::Secretary => secretary_observe(&mut state, c)?,
                    _ => random_observe(&mut state, c, &mut rng)?,
                };
                // the random baseline never needs accuracies to decide
                let probed = policy == PolicyKind::Secretary && d.probed();
                entries.push(AuditEntry {
                    arrival_index: c.arrival_index,
                    client_id: c.client_id.clone(),
                    probe_accuracy: probed.then_some(c.probe_accuracy),
                    verdict: d.verdict,
                    reason: d.reason,
                    n_selected: state.n_selected(),
                    threshold: state.best_observed_accuracy,
                });
            }
            let alpha_index = if policy == PolicyKind::Secretary { spec.alpha_star_index } else { 0 };
            let forced_acceptances = state.forced_acceptances;
            Ok(SelectionAudit {
                policy,
                alpha_index,
                entries,
                selected: state.into_selected(),
                forced_acceptances,
            })
        }
    }
}
