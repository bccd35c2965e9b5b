use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compose, expected_reward, terminal_reward, CleverAction, FullState, RewardKind, RewardModel};
use crate::environment::{crowd_transition, CrowdState};
use crate::error::{Error, Result};
use crate::lattice::{Cell, Lattice, StaticField};
use crate::num::Scalar;

pub const DEFAULT_MAX_STATES: u128 = 5_000_000;

/// States over which backward induction runs.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpace {
    /// The same state set at every epoch.
    Dense(Vec<FullState>),
    /// `layers[t - 1]` holds the states reachable at epoch `t`.
    Layered(Vec<Vec<FullState>>),
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of `(x, z)` pairs with at most `particles` particles.
pub fn dense_state_count(lattice: &Lattice, particles: usize) -> u128 {
    let open = lattice.open_cells().count();
    if open == 0 {
        return 0;
    }
    // With the agent on the exit the crowd may use every other open cell;
    // otherwise the exit is excluded as well.
    let at_exit: u128 = (0..=particles).map(|k| binomial(open - 1, k)).sum();
    let elsewhere: u128 = if open >= 2 {
        (0..=particles).map(|k| binomial(open - 2, k)).sum::<u128>() * (open as u128 - 1)
    } else {
        0
    };
    at_exit + elsewhere
}

fn combinations(pool: &[Cell], max_k: usize, out: &mut Vec<CrowdState>) {
    fn rec(pool: &[Cell], start: usize, left: usize, cur: &mut Vec<Cell>, out: &mut Vec<CrowdState>) {
        out.push(CrowdState::new(cur.iter().copied()).expect("distinct cells"));
        if left == 0 {
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i]);
            rec(pool, i + 1, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(pool, 0, max_k, &mut Vec::new(), out);
}

impl StateSpace {
    /// Every state with at most `particles` particles.
    pub fn dense(lattice: &Lattice, particles: usize, max_states: u128) -> Result<Self> {
        let required = dense_state_count(lattice, particles);
        if required > max_states {
            return Err(Error::Capacity {
                required,
                allowed: max_states,
            });
        }
        let exit = lattice.exit_cell();
        let open: Vec<Cell> = lattice.open_cells().collect();
        let mut states = Vec::with_capacity(required as usize);
        for &x in &open {
            let pool: Vec<Cell> = open.iter().copied().filter(|&c| c != x && c != exit).collect();
            let mut crowds = Vec::new();
            combinations(&pool, particles, &mut crowds);
            states.extend(crowds.into_iter().map(|z| FullState::new(x, z)));
        }
        states.sort();
        Ok(StateSpace::Dense(states))
    }

    /// States reachable from `initial` at each epoch `1..=horizon`.
    pub fn reachable<T: Scalar>(
        lattice: &Lattice,
        field: &StaticField<T>,
        initial: &FullState,
        horizon: usize,
        max_states: u128,
    ) -> Result<Self> {
        initial.validate(lattice)?;
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let mut layers = vec![vec![initial.clone()]];
        for _ in 1..horizon {
            let prev = layers.last().expect("non-empty");
            let mut next = BTreeSet::new();
            for s in prev {
                let crowd = crowd_transition(s.x, &s.z, lattice, field)?;
                for a in CleverAction::all() {
                    next.extend(compose(s.x, a, &crowd, lattice).into_iter().map(|(n, _)| n));
                }
                if next.len() as u128 > max_states {
                    return Err(Error::Capacity {
                        required: next.len() as u128,
                        allowed: max_states,
                    });
                }
            }
            layers.push(next.into_iter().collect());
        }
        Ok(StateSpace::Layered(layers))
    }

    /// Dense when it fits under `max_states`, reachable from `initial`
    /// otherwise.
    pub fn auto<T: Scalar>(
        lattice: &Lattice,
        field: &StaticField<T>,
        particles: usize,
        initial: Option<&FullState>,
        horizon: usize,
        max_states: u128,
    ) -> Result<Self> {
        match (Self::dense(lattice, particles, max_states), initial) {
            (Ok(space), _) => Ok(space),
            (Err(Error::Capacity { .. }), Some(s0)) => Self::reachable(lattice, field, s0, horizon, max_states),
            (Err(e), _) => Err(e),
        }
    }

    pub fn layer(&self, t: usize) -> &[FullState] {
        match self {
            StateSpace::Dense(states) => states,
            StateSpace::Layered(layers) => layers.get(t - 1).map_or(&[], Vec::as_slice),
        }
    }

    pub fn max_layer_len(&self) -> usize {
        match self {
            StateSpace::Dense(states) => states.len(),
            StateSpace::Layered(layers) => layers.iter().map(Vec::len).max().unwrap_or(0),
        }
    }
}

/// `v(t, s)` for `t = 1..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction<T> {
    layers: Vec<HashMap<FullState, T>>,
}

impl<T: Scalar> ValueFunction<T> {
    pub fn horizon(&self) -> usize {
        self.layers.len()
    }

    pub fn get(&self, t: usize, s: &FullState) -> Option<T> {
        self.layers.get(t.checked_sub(1)?)?.get(s).copied()
    }

    pub fn layer(&self, t: usize) -> &HashMap<FullState, T> {
        &self.layers[t - 1]
    }
}

/// Deterministic decisions `d_t(s)` for `t = 1..T-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    horizon: usize,
    layers: Vec<HashMap<FullState, CleverAction>>,
}

impl Policy {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn decision(&self, t: usize, s: &FullState) -> Option<CleverAction> {
        self.layers.get(t.checked_sub(1)?)?.get(s).copied()
    }

    pub fn layer(&self, t: usize) -> &HashMap<FullState, CleverAction> {
        &self.layers[t - 1]
    }

    pub fn num_decisions(&self) -> usize {
        self.layers.iter().map(HashMap::len).sum()
    }

    /// Serializable form, decisions sorted by epoch then state.
    pub fn dump<T: Scalar>(&self, values: &ValueFunction<T>, reward: RewardKind) -> PolicyDump<T> {
        let mut decisions: Vec<PolicyDecision<T>> = self
            .layers
            .iter()
            .enumerate()
            .flat_map(|(i, layer)| {
                let t = i + 1;
                layer.iter().map(move |(s, &a)| PolicyDecision {
                    t,
                    x: s.x,
                    z: s.z.cells().to_vec(),
                    a,
                    v: values.get(t, s).unwrap_or_else(T::nan),
                })
            })
            .collect();
        decisions.sort_by(|p, q| (p.t, p.x, &p.z).cmp(&(q.t, q.x, &q.z)));
        PolicyDump {
            horizon: self.horizon,
            reward,
            decisions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PolicyDecision<T> {
    pub t: usize,
    pub x: Cell,
    pub z: Vec<Cell>,
    pub a: CleverAction,
    pub v: T,
}

/// `{"T", "reward", "decisions": [{"t", "x", "z", "a", "v"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PolicyDump<T> {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub reward: RewardKind,
    pub decisions: Vec<PolicyDecision<T>>,
}

fn lookup<T: Scalar>(next: &HashMap<FullState, T>, s: &FullState, epoch: usize) -> Result<T> {
    next.get(s).copied().ok_or_else(|| {
        Error::InvalidState(format!("successor {s} missing from the state space at epoch {epoch}"))
    })
}

/// All nine action values at `(t, s)` given the layer `t + 1`.
fn action_values<T: Scalar>(
    s: &FullState,
    t: usize,
    next: &HashMap<FullState, T>,
    lattice: &Lattice,
    field: &StaticField<T>,
    model: &RewardModel<T>,
) -> Result<[T; 9]> {
    let crowd = crowd_transition(s.x, &s.z, lattice, field)?;
    let mut q = [T::zero(); 9];
    for (slot, a) in q.iter_mut().zip(CleverAction::all()) {
        let outcomes = compose(s.x, a, &crowd, lattice);
        let mut future = T::zero();
        for (s_next, p) in &outcomes {
            future = future + *p * lookup(next, s_next, t + 1)?;
        }
        *slot = expected_reward(model, s, a, &outcomes, lattice) + future;
    }
    Ok(q)
}

/// Highest value; ties go to the smallest action index.
fn argmax<T: Scalar>(q: &[T; 9]) -> (CleverAction, T) {
    let mut best = 0;
    for i in 1..9 {
        if q[i] > q[best] {
            best = i;
        }
    }
    (CleverAction::new(best as u8 + 1).expect("valid index"), q[best])
}

/// `Q(t, s, a)` against a solved value function.
pub fn q_value<T: Scalar>(
    values: &ValueFunction<T>,
    t: usize,
    s: &FullState,
    a: CleverAction,
    lattice: &Lattice,
    field: &StaticField<T>,
    model: &RewardModel<T>,
) -> Result<T> {
    if t == 0 || t >= values.horizon() {
        return Err(Error::InvalidParameter(format!("no decision epoch {t}")));
    }
    let q = action_values(s, t, values.layer(t + 1), lattice, field, model)?;
    Ok(q[a.get() as usize - 1])
}

/// Backward induction over `space` for epochs `T-1, ..., 1`.
pub fn backward_induction<T: Scalar>(
    lattice: &Lattice,
    field: &StaticField<T>,
    model: &RewardModel<T>,
    horizon: usize,
    space: &StateSpace,
) -> Result<(Policy, ValueFunction<T>)> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if let StateSpace::Layered(layers) = space {
        if layers.len() < horizon {
            return Err(Error::InvalidParameter(format!(
                "state space has {} layers, horizon is {horizon}",
                layers.len()
            )));
        }
    }
    let terminal: HashMap<FullState, T> = space
        .layer(horizon)
        .par_iter()
        .map(|s| (s.clone(), terminal_reward(model, s, field)))
        .collect();

    let mut values = vec![HashMap::new(); horizon];
    let mut decisions = vec![HashMap::new(); horizon - 1];
    values[horizon - 1] = terminal;
    for t in (1..horizon).rev() {
        let next = &values[t];
        let solved: Vec<(FullState, CleverAction, T)> = space
            .layer(t)
            .par_iter()
            .map(|s| {
                let q = action_values(s, t, next, lattice, field, model)?;
                let (a, v) = argmax(&q);
                Ok((s.clone(), a, v))
            })
            .collect::<Result<_>>()?;
        let mut v_t = HashMap::with_capacity(solved.len());
        let mut d_t = HashMap::with_capacity(solved.len());
        for (s, a, v) in solved {
            d_t.insert(s.clone(), a);
            v_t.insert(s, v);
        }
        values[t - 1] = v_t;
        decisions[t - 1] = d_t;
    }
    Ok((
        Policy {
            horizon,
            layers: decisions,
        },
        ValueFunction { layers: values },
    ))
}

/// Largest `|v(t, s) - max_a Q(t, s, a)|` over every stored decision-epoch
/// state.
pub fn bellman_residual<T: Scalar>(
    values: &ValueFunction<T>,
    lattice: &Lattice,
    field: &StaticField<T>,
    model: &RewardModel<T>,
) -> Result<T> {
    let mut worst = T::zero();
    for t in 1..values.horizon() {
        let next = values.layer(t + 1);
        let residuals: Vec<T> = values
            .layer(t)
            .par_iter()
            .map(|(s, &v)| {
                let q = action_values(s, t, next, lattice, field, model)?;
                let best = q.iter().copied().fold(T::neg_infinity(), T::max);
                Ok((v - best).abs())
            })
            .collect::<Result<_>>()?;
        worst = residuals.into_iter().fold(worst, T::max);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GridPos, Metric};

    fn setup(w: usize, h: usize) -> (Lattice, StaticField<f64>) {
        let l = Lattice::open(w, h, GridPos::new(0, 0), Metric::Chebyshev).unwrap();
        let f = StaticField::build(&l);
        (l, f)
    }

    #[test]
    fn dense_count_matches_enumeration() {
        for (w, h, n) in [(3, 3, 1), (4, 4, 2), (3, 2, 3), (1, 1, 2)] {
            let (l, _) = setup(w, h);
            let StateSpace::Dense(states) = StateSpace::dense(&l, n, u128::MAX).unwrap() else {
                unreachable!()
            };
            assert_eq!(states.len() as u128, dense_state_count(&l, n));
            assert!(states.iter().all(|s| s.validate(&l).is_ok()));
        }
        let (l, _) = setup(4, 4);
        assert_eq!(dense_state_count(&l, 2), 1 + 15 + 105 + 15 * (1 + 14 + 91));
    }

    #[test]
    fn capacity_error_reports_sizes() {
        let (l, _) = setup(4, 4);
        match StateSpace::dense(&l, 2, 100) {
            Err(Error::Capacity { required, allowed }) => {
                assert_eq!(required, 1711);
                assert_eq!(allowed, 100);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn horizon_one_is_terminal_only() {
        let (l, f) = setup(3, 3);
        let space = StateSpace::dense(&l, 1, u128::MAX).unwrap();
        let model = RewardModel::time();
        let (policy, values) = backward_induction(&l, &f, &model, 1, &space).unwrap();
        assert_eq!(policy.num_decisions(), 0);
        for s in space.layer(1) {
            assert_eq!(values.get(1, s).unwrap(), terminal_reward(&model, s, &f));
        }
    }

    #[test]
    fn empty_crowd_shortest_path_values() {
        let (l, f) = setup(4, 4);
        let space = StateSpace::dense(&l, 0, u128::MAX).unwrap();
        for horizon in 1..=6 {
            let (_, values) = backward_induction(&l, &f, &RewardModel::time(), horizon, &space).unwrap();
            for s in space.layer(1) {
                let d = l.step_dist(s.x, l.exit_cell()) as f64;
                let k = (horizon - 1) as f64;
                let expected = -d.min(k) - 2.0 * (d - k).max(0.0);
                assert_eq!(values.get(1, s).unwrap(), expected, "T={horizon} {s}");
            }
        }
    }

    #[test]
    fn reachable_layers_grow_from_the_initial_state() {
        let (l, f) = setup(4, 4);
        let s0: FullState = "16:6,11".parse().unwrap();
        let space = StateSpace::reachable(&l, &f, &s0, 4, u128::MAX).unwrap();
        assert_eq!(space.layer(1), std::slice::from_ref(&s0));
        assert!(space.layer(2).len() > 1);
        let dense = StateSpace::dense(&l, 2, u128::MAX).unwrap();
        let model = RewardModel::co();
        let (_, v_reach) = backward_induction(&l, &f, &model, 4, &space).unwrap();
        let (_, v_dense) = backward_induction(&l, &f, &model, 4, &dense).unwrap();
        assert_eq!(v_reach.get(1, &s0), v_dense.get(1, &s0));
        assert!(StateSpace::reachable(&l, &f, &s0, 4, 3).is_err());
    }

    #[test]
    fn auto_falls_back_to_reachable() {
        let (l, f) = setup(4, 4);
        let s0: FullState = "16:6".parse().unwrap();
        let space = StateSpace::auto(&l, &f, 2, Some(&s0), 3, 1000).unwrap();
        assert!(matches!(space, StateSpace::Layered(_)));
        assert!(matches!(StateSpace::auto(&l, &f, 2, None, 3, 1000), Err(Error::Capacity { .. })));
    }

    #[test]
    fn policies_are_deterministic_and_consistent() {
        let (l, f) = setup(3, 3);
        let space = StateSpace::dense(&l, 1, u128::MAX).unwrap();
        let model = RewardModel::co();
        let (p1, v1) = backward_induction(&l, &f, &model, 4, &space).unwrap();
        let (p2, v2) = backward_induction(&l, &f, &model, 4, &space).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(v1, v2);
        assert_eq!(bellman_residual(&v1, &l, &f, &model).unwrap(), 0.0);
        for t in 1..4 {
            for (s, &a) in p1.layer(t) {
                let q = q_value(&v1, t, s, a, &l, &f, &model).unwrap();
                assert_eq!(q, v1.get(t, s).unwrap());
            }
        }
    }

    #[test]
    fn policy_dump_layout() {
        let (l, f) = setup(2, 2);
        let space = StateSpace::dense(&l, 1, u128::MAX).unwrap();
        let (p, v) = backward_induction(&l, &f, &RewardModel::time(), 2, &space).unwrap();
        let dump = p.dump(&v, RewardKind::Time);
        let json = serde_json::to_value(&dump).unwrap();
        assert_eq!(json["T"], 2);
        assert_eq!(json["reward"], "time");
        let first = &json["decisions"][0];
        for key in ["t", "x", "z", "a", "v"] {
            assert!(first.get(key).is_some(), "{key}");
        }
        assert_eq!(dump.decisions.len(), space.layer(1).len());
    }
}
