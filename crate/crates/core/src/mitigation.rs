//! RIC-style conflict arbitration between xApps.
//!
//! Direct conflicts (two xApps proposing different values for the same
//! control slot) are resolved by a fixed priority order: the winner's value
//! is applied and the losers' values are discarded. Indirect conflicts are
//! caught after the fact: when the proportional-fairness KPI drops by more
//! than `delta` after an action, the RB and power settings are rolled back
//! to the previous snapshot. Handovers are never rolled back.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::write_slot;
use crate::env::{CellularEnv, EnvParams, JointAction, StepOutcome};
use crate::error::{Error, Result};
use crate::nn::HeadRole;

/// A controllable network parameter.
pub type Slot = HeadRole;

/// Head indices proposed by one xApp for the slots it owns.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionProposal {
    pub xapp: String,
    pub choices: BTreeMap<Slot, usize>,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectConflict {
    pub slot: Slot,
    pub winner: String,
    pub losers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigationPolicy {
    /// xApp names, highest priority first.
    pub priority: Vec<String>,
    /// Tolerated PF drop before a rollback fires.
    pub delta: f64,
    /// Monitor the KPI and roll back on deterioration.
    pub rollback: bool,
}

impl Default for MitigationPolicy {
    fn default() -> Self {
        Self {
            priority: vec!["xapp1".into(), "xapp2".into()],
            delta: 0.0,
            rollback: true,
        }
    }
}

impl MitigationPolicy {
    pub fn validate(&self) -> Result<()> {
        let unique: BTreeSet<&String> = self.priority.iter().collect();
        if unique.len() != self.priority.len() {
            return Err(Error::Config("mitigation.priority lists an xApp twice".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::Config("mitigation.delta must be non-negative".into()));
        }
        Ok(())
    }

    pub fn reversed(&self) -> Self {
        let mut p = self.clone();
        p.priority.reverse();
        p
    }
}

/// Slots that two or more xApps propose different values for, in slot order.
pub fn detect_direct(proposals: &[ActionProposal]) -> Vec<Slot> {
    let mut seen: BTreeMap<Slot, BTreeSet<usize>> = BTreeMap::new();
    for p in proposals {
        for (slot, &v) in &p.choices {
            seen.entry(*slot).or_default().insert(v);
        }
    }
    seen.into_iter()
        .filter(|(_, values)| values.len() > 1)
        .map(|(slot, _)| slot)
        .collect()
}

fn rank(priority: &[String], xapp: &str) -> Result<usize> {
    priority
        .iter()
        .position(|p| p == xapp)
        .ok_or_else(|| Error::InvalidArgument(format!("xApp {xapp} missing from priority order")))
}

/// Merge proposals: conflicting slots take the highest-priority proposer's
/// value, other proposed slots their (agreed) value, and unproposed slots
/// keep `current`. Fails when a slot has neither a proposer nor a current
/// setting.
pub fn resolve_direct(
    proposals: &[ActionProposal],
    conflicts: &[Slot],
    priority: &[String],
    current: Option<&JointAction>,
    params: &EnvParams,
) -> Result<(JointAction, Vec<DirectConflict>)> {
    for p in proposals {
        rank(priority, &p.xapp)?;
    }
    let mut ordered: Vec<&ActionProposal> = proposals.iter().collect();
    ordered.sort_by_key(|p| rank(priority, &p.xapp).unwrap_or(usize::MAX));

    let (k, b) = (params.num_users, params.num_bs);
    let mut merged = current.cloned().unwrap_or_else(|| JointAction {
        serving: vec![None; k],
        rb_request: vec![0; k],
        power_dbm: vec![params.default_power_dbm; b],
    });
    let mut covered: BTreeSet<Slot> = BTreeSet::new();
    // Lowest priority first so higher-priority writes land last.
    for p in ordered.iter().rev() {
        for (slot, &v) in &p.choices {
            write_slot(&mut merged, *slot, v, params)?;
            covered.insert(*slot);
        }
    }
    if current.is_none() {
        let all = (0..k)
            .flat_map(|user| [HeadRole::Handover { user }, HeadRole::Rb { user }])
            .chain((0..b).map(|bs| HeadRole::Power { bs }));
        for slot in all {
            if !covered.contains(&slot) {
                return Err(Error::InvalidArgument(format!(
                    "slot {} has no proposer and no current setting",
                    slot.name()
                )));
            }
        }
    }
    let resolved = conflicts
        .iter()
        .filter_map(|slot| {
            let mut proposers = ordered.iter().filter_map(|p| p.choices.get(slot).map(|v| (p, *v)));
            let (winner, value) = proposers.next()?;
            let losers = proposers
                .filter(|(_, v)| *v != value)
                .map(|(p, _)| p.xapp.clone())
                .collect();
            Some(DirectConflict {
                slot: *slot,
                winner: winner.xapp.clone(),
                losers,
            })
        })
        .collect();
    Ok((merged, resolved))
}

/// RB and power settings that a rollback restores.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSnapshot {
    pub rb_request: Vec<u32>,
    pub power_dbm: Vec<f64>,
}

impl ControlSnapshot {
    pub fn of(action: &JointAction) -> Self {
        Self {
            rb_request: action.rb_request.clone(),
            power_dbm: action.power_dbm.clone(),
        }
    }
}

/// Recent PF values and the last applied RB/power settings.
#[derive(Debug, Clone, Default)]
pub struct KpiHistory {
    pf: VecDeque<f64>,
    snapshot: Option<ControlSnapshot>,
}

impl KpiHistory {
    const WINDOW: usize = 16;

    pub fn last(&self) -> Option<f64> {
        self.pf.back().copied()
    }

    pub fn snapshot(&self) -> Option<&ControlSnapshot> {
        self.snapshot.as_ref()
    }

    pub fn record(&mut self, pf: f64, applied: ControlSnapshot) {
        if self.pf.len() == Self::WINDOW {
            self.pf.pop_front();
        }
        self.pf.push_back(pf);
        self.snapshot = Some(applied);
    }

    pub fn clear(&mut self) {
        self.pf.clear();
        self.snapshot = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndirectVerdict {
    Keep,
    Rollback,
}

/// Roll back iff `new_pf < previous_pf - delta`; keep when no PF is known.
pub fn monitor_indirect(history: &KpiHistory, new_pf: f64, delta: f64) -> IndirectVerdict {
    match history.last() {
        Some(prev) if new_pf < prev - delta => IndirectVerdict::Rollback,
        _ => IndirectVerdict::Keep,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterruptCounts {
    /// Slots with a direct conflict.
    pub direct_conflicts: usize,
    /// Proposals discarded while resolving direct conflicts.
    pub losers_discarded: usize,
    pub rollbacks: usize,
}

impl InterruptCounts {
    pub fn total(&self) -> usize {
        self.losers_discarded + self.rollbacks
    }

    pub fn add(&mut self, other: &InterruptCounts) {
        self.direct_conflicts += other.direct_conflicts;
        self.losers_discarded += other.losers_discarded;
        self.rollbacks += other.rollbacks;
    }
}

/// Restore RB and power settings from `snapshot`, keeping handovers.
pub fn rollback(
    settings: &mut JointAction,
    snapshot: Option<&ControlSnapshot>,
    counts: &mut InterruptCounts,
) -> Result<()> {
    let snap = snapshot.ok_or_else(|| Error::InvalidArgument("rollback without a snapshot".into()))?;
    settings.rb_request.clone_from(&snap.rb_request);
    settings.power_dbm.clone_from(&snap.power_dbm);
    counts.rollbacks += 1;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MitigationVerdict {
    pub action: JointAction,
    pub direct_conflicts: Vec<DirectConflict>,
    pub rollback_applied: bool,
    pub interrupts: InterruptCounts,
}

/// One row of the arbitration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrationRecord {
    pub step: usize,
    pub direct_conflicts: usize,
    /// Winners of this step's direct conflicts, `;`-joined; empty if none.
    pub winner: String,
    pub rollback_flag: bool,
    /// PF in effect before the step.
    pub pf_before: Option<f64>,
    /// PF observed right after applying the merged action.
    pub pf_after: f64,
    /// PF in effect after mitigation (differs from `pf_after` on rollback).
    pub pf_final: f64,
}

/// Sequential arbiter: one arbitration per environment step.
#[derive(Debug, Clone)]
pub struct Arbiter {
    policy: MitigationPolicy,
    history: KpiHistory,
    counts: InterruptCounts,
    log: Vec<ArbitrationRecord>,
    keep_log: bool,
}

impl Arbiter {
    pub fn new(policy: MitigationPolicy) -> Self {
        Self {
            policy,
            history: KpiHistory::default(),
            counts: InterruptCounts::default(),
            log: Vec::new(),
            keep_log: true,
        }
    }

    pub fn without_log(mut self) -> Self {
        self.keep_log = false;
        self
    }

    pub fn policy(&self) -> &MitigationPolicy {
        &self.policy
    }

    pub fn history(&self) -> &KpiHistory {
        &self.history
    }

    pub fn counts(&self) -> InterruptCounts {
        self.counts
    }

    pub fn log(&self) -> &[ArbitrationRecord] {
        &self.log
    }

    /// Seed the KPI history from the environment's current state (e.g.
    /// right after an episode reset).
    pub fn reset(&mut self, env: &CellularEnv) {
        self.history.clear();
        self.history.record(env.reward(), ControlSnapshot::of(&env.controls()));
    }

    /// Resolve direct conflicts, apply the merged action, and roll back RB
    /// and power settings if the PF KPI deteriorated beyond `delta`.
    pub fn arbitrate<R: Rng + ?Sized>(
        &mut self,
        proposals: &[ActionProposal],
        env: &mut CellularEnv,
        rng: &mut R,
    ) -> Result<(MitigationVerdict, StepOutcome)> {
        if proposals.is_empty() {
            return Err(Error::InvalidArgument("arbitration needs at least one proposal".into()));
        }
        let current = env.controls();
        let conflicts = detect_direct(proposals);
        let (merged, resolved) =
            resolve_direct(proposals, &conflicts, &self.policy.priority, Some(&current), env.params())?;
        let pf_before = self.history.last();
        let mut outcome = env.step(&merged, rng)?;
        let pf_after = outcome.reward;

        let mut step_counts = InterruptCounts {
            direct_conflicts: resolved.len(),
            losers_discarded: resolved.iter().map(|c| c.losers.len()).sum(),
            rollbacks: 0,
        };
        let mut applied = merged;
        let rollback_applied = self.policy.rollback
            && monitor_indirect(&self.history, pf_after, self.policy.delta) == IndirectVerdict::Rollback;
        if rollback_applied {
            rollback(&mut applied, self.history.snapshot(), &mut step_counts)?;
            outcome = env.reapply(&applied)?;
        }
        self.history.record(outcome.reward, ControlSnapshot::of(&applied));
        self.counts.add(&step_counts);

        if self.keep_log {
            let winners: BTreeSet<&str> = resolved.iter().map(|c| c.winner.as_str()).collect();
            self.log.push(ArbitrationRecord {
                step: outcome.metrics.step,
                direct_conflicts: resolved.len(),
                winner: winners.into_iter().collect::<Vec<_>>().join(";"),
                rollback_flag: rollback_applied,
                pf_before,
                pf_after,
                pf_final: outcome.reward,
            });
        }
        Ok((
            MitigationVerdict {
                action: applied,
                direct_conflicts: resolved,
                rollback_applied,
                interrupts: step_counts,
            },
            outcome,
        ))
    }
}
