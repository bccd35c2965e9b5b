use super::{full_transition, local_reward, terminal_reward, CleverAction, FullState, RewardModel};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, StaticField};
use crate::num::Scalar;

pub const DEFAULT_NODE_CAP: u128 = 10_000_000;

struct Search<'a, T> {
    lattice: &'a Lattice,
    field: &'a StaticField<T>,
    model: &'a RewardModel<T>,
    horizon: usize,
    nodes: u128,
    cap: u128,
}

impl<T: Scalar> Search<'_, T> {
    fn value(&mut self, t: usize, s: &FullState) -> Result<T> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::Capacity {
                required: self.nodes,
                allowed: self.cap,
            });
        }
        if t == self.horizon {
            return Ok(terminal_reward(self.model, s, self.field));
        }
        let mut best = T::neg_infinity();
        for a in CleverAction::all() {
            let mut q = T::zero();
            for (s_next, p) in full_transition(s, a, self.lattice, self.field)? {
                let r = local_reward(self.model, s, a, &s_next, self.lattice);
                q = q + p * (r + self.value(t + 1, &s_next)?);
            }
            best = best.max(q);
        }
        Ok(best)
    }
}

/// Optimal value of `initial` at epoch 1 by exhaustive expectimax search,
/// without memoization. Gives up with a capacity error after `node_cap`
/// visited nodes.
pub fn brute_force_value<T: Scalar>(
    lattice: &Lattice,
    field: &StaticField<T>,
    model: &RewardModel<T>,
    horizon: usize,
    initial: &FullState,
    node_cap: u128,
) -> Result<T> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    initial.validate(lattice)?;
    Search {
        lattice,
        field,
        model,
        horizon,
        nodes: 0,
        cap: node_cap,
    }
    .value(1, initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GridPos, Metric};

    #[test]
    fn lone_agent_walks_straight() {
        let l = Lattice::open(3, 3, GridPos::new(0, 0), Metric::Chebyshev).unwrap();
        let f = StaticField::<f64>::build(&l);
        let s: FullState = "9".parse().unwrap();
        let v = brute_force_value(&l, &f, &RewardModel::time(), 4, &s, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(v, -2.0);
        let v = brute_force_value(&l, &f, &RewardModel::time(), 2, &s, DEFAULT_NODE_CAP).unwrap();
        assert_eq!(v, -1.0 - 2.0);
    }

    #[test]
    fn node_cap_is_enforced() {
        let l = Lattice::open(3, 3, GridPos::new(0, 0), Metric::Chebyshev).unwrap();
        let f = StaticField::<f64>::build(&l);
        let s: FullState = "9:6".parse().unwrap();
        let err = brute_force_value(&l, &f, &RewardModel::co(), 5, &s, 50).unwrap_err();
        assert!(matches!(err, Error::Capacity { allowed: 50, .. }));
    }
}
