use std::collections::BTreeMap;

use super::{full_transition, local_reward, lost_conflict, terminal_reward, CleverAction, FullState, Policy, RewardModel};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, StaticField};
use crate::num::Scalar;

/// Something that picks an action for state `s` at epoch `t`.
pub trait DecisionRule {
    fn decide(&self, t: usize, s: &FullState) -> Option<CleverAction>;
}

impl DecisionRule for Policy {
    fn decide(&self, t: usize, s: &FullState) -> Option<CleverAction> {
        self.decision(t, s)
    }
}

impl<F> DecisionRule for F
where
    F: Fn(usize, &FullState) -> Option<CleverAction>,
{
    fn decide(&self, t: usize, s: &FullState) -> Option<CleverAction> {
        self(t, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    /// Local rewards over epochs `1..T-1` plus the terminal reward.
    pub expected_total_reward: T,
    /// Expected number of decision epochs spent outside the exit.
    pub expected_steps_to_exit: T,
    /// Expected number of steps blocked by a particle that took the target.
    pub expected_lost_conflicts: T,
}

/// Exact expectation of a decision rule from `initial` over `horizon` epochs.
pub fn evaluate_policy<T: Scalar, D: DecisionRule + ?Sized>(
    rule: &D,
    lattice: &Lattice,
    field: &StaticField<T>,
    model: &RewardModel<T>,
    horizon: usize,
    initial: &FullState,
) -> Result<Evaluation<T>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    initial.validate(lattice)?;
    let exit = lattice.exit_cell();
    let mut dist: BTreeMap<FullState, T> = BTreeMap::from([(initial.clone(), T::one())]);
    let mut reward = T::zero();
    let mut steps = T::zero();
    let mut conflicts = T::zero();
    for t in 1..horizon {
        let mut next: BTreeMap<FullState, T> = BTreeMap::new();
        for (s, &p) in &dist {
            let a = rule.decide(t, s).ok_or_else(|| Error::UndefinedPolicy {
                epoch: t,
                state: s.to_string(),
            })?;
            if s.x != exit {
                steps = steps + p;
            }
            for (s_next, q) in full_transition(s, a, lattice, field)? {
                let w = p * q;
                reward = reward + w * local_reward(model, s, a, &s_next, lattice);
                if lost_conflict(s, a, &s_next, lattice) {
                    conflicts = conflicts + w;
                }
                let slot = next.entry(s_next).or_insert_with(T::zero);
                *slot = *slot + w;
            }
        }
        dist = next;
    }
    for (s, &p) in &dist {
        reward = reward + p * terminal_reward(model, s, field);
    }
    Ok(Evaluation {
        expected_total_reward: reward,
        expected_steps_to_exit: steps,
        expected_lost_conflicts: conflicts,
    })
}
