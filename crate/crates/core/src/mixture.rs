//! Finite-mixture approximation of the crowd decision rule.
//!
//! The probability of an action given the six-sector state is approximated by
//! a convex combination of per-sector tables,
//! `p(a | s) = Σ_y α_y Θ_y(a | s(y))`, where each `Θ_y` only looks at the
//! occupancy of its own sector. Parameters are tracked as Dirichlet
//! pseudo-counts and updated one observation at a time by a quasi-Bayes step
//! with exponential forgetting toward the prior:
//!
//! 1. responsibilities `w_y ∝ (κ_y / Σκ) · Θ̂_y(a | s(y))`, normalized;
//! 2. forgetting `V ← λV + (1-λ)V₀`, `κ ← λκ + (1-λ)κ₀`;
//! 3. `V_y[a][s(y)] += w_y` and `κ_y += w_y`.
//!
//! With `λ = 1` the counts only accumulate. The recursion depends on the
//! order of the observations when `λ < 1`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighborhood::{Observation, SectorState};
use crate::num::Scalar;
use crate::trajectory::{ActionLabel, Sector};

pub const NUM_ACTIONS: usize = 7;
pub const NUM_SECTORS: usize = 6;
pub const DEFAULT_PRIOR_STRENGTH: f64 = 1.0;
pub const DEFAULT_LAMBDA: f64 = 0.99;

/// `[action][occupancy]` pseudo-counts or probabilities.
pub type Table<T> = [[T; 2]; NUM_ACTIONS];

/// Conditional decision table of one sector: `theta[a][v] = Θ(a | s(y) = v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ComponentTable<T> {
    pub theta: Table<T>,
}

impl<T: Scalar> ComponentTable<T> {
    pub fn uniform() -> Self {
        Self {
            theta: [[T::one() / T::lit(NUM_ACTIONS as f64); 2]; NUM_ACTIONS],
        }
    }

    pub fn prob(&self, action: ActionLabel, occupied: usize) -> T {
        self.theta[action.index()][occupied]
    }

    pub fn column(&self, occupied: usize) -> [T; NUM_ACTIONS] {
        std::array::from_fn(|a| self.theta[a][occupied])
    }

    pub fn validate(&self) -> Result<()> {
        for v in 0..2 {
            let col = self.column(v);
            if col.iter().any(|p| !(*p >= T::zero())) {
                return Err(Error::InvalidParameter("negative decision probability".into()));
            }
            let sum: T = col.iter().copied().sum();
            if (sum - T::one()).abs() > T::lit(1e-9) {
                return Err(Error::InvalidParameter(format!("decision column sums to {sum}")));
            }
        }
        Ok(())
    }
}

/// Point estimate of the mixture: weights and per-sector tables.
///
/// Serializes as `{"alpha": [6], "theta": [6][7][2]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MixtureModel<T> {
    pub alpha: [T; NUM_SECTORS],
    pub theta: [Table<T>; NUM_SECTORS],
}

impl<T: Scalar> MixtureModel<T> {
    pub fn uniform() -> Self {
        Self {
            alpha: [T::one() / T::lit(NUM_SECTORS as f64); NUM_SECTORS],
            theta: [ComponentTable::uniform().theta; NUM_SECTORS],
        }
    }

    pub fn new(alpha: [T; NUM_SECTORS], theta: [Table<T>; NUM_SECTORS]) -> Result<Self> {
        let model = Self { alpha, theta };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.iter().any(|a| !(*a >= T::zero())) {
            return Err(Error::InvalidParameter("negative mixture weight".into()));
        }
        let sum: T = self.alpha.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {sum}")));
        }
        Sector::ALL.iter().try_for_each(|&y| self.component(y).validate())
    }

    pub fn component(&self, sector: Sector) -> ComponentTable<T> {
        ComponentTable {
            theta: self.theta[sector.index()],
        }
    }

    pub fn weight(&self, sector: Sector) -> T {
        self.alpha[sector.index()]
    }

    /// Action distribution `Σ_y α_y Θ_y(· | s(y))`, indexed by
    /// [`ActionLabel::index`].
    pub fn predict(&self, state: SectorState) -> [T; NUM_ACTIONS] {
        let mut p = [T::zero(); NUM_ACTIONS];
        for y in Sector::ALL {
            let v = state.value(y);
            let w = self.alpha[y.index()];
            for (a, pa) in p.iter_mut().enumerate() {
                *pa = *pa + w * self.theta[y.index()][a][v];
            }
        }
        p
    }

    /// Sector with the largest weight; ties go to the earlier sector.
    pub fn dominant_sector(&self) -> Sector {
        let mut best = Sector::Forward;
        for y in Sector::ALL {
            if self.alpha[y.index()] > self.alpha[best.index()] {
                best = y;
            }
        }
        best
    }
}

/// Dirichlet pseudo-counts of the recursive estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState<T> {
    counts: [Table<T>; NUM_SECTORS],
    kappa: [T; NUM_SECTORS],
    prior_counts: [Table<T>; NUM_SECTORS],
    prior_kappa: [T; NUM_SECTORS],
    lambda: T,
    updates: u64,
}

impl<T: Scalar> EstimatorState<T> {
    /// Symmetric prior: every table entry `prior_strength / 7`, every
    /// component count `prior_strength`.
    pub fn init_prior(prior_strength: T, lambda: T) -> Result<Self> {
        Self::init_prior_masked(prior_strength, lambda, [true; NUM_SECTORS])
    }

    /// Like [`EstimatorState::init_prior`] with inactive components pinned
    /// at zero weight. Inactive components never receive responsibility.
    pub fn init_prior_masked(prior_strength: T, lambda: T, active: [bool; NUM_SECTORS]) -> Result<Self> {
        if !(prior_strength > T::zero()) || !prior_strength.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "prior strength must be positive, got {prior_strength}"
            )));
        }
        if !(lambda > T::zero() && lambda <= T::one()) {
            return Err(Error::InvalidParameter(format!("forgetting factor must lie in (0, 1], got {lambda}")));
        }
        if !active.iter().any(|&a| a) {
            return Err(Error::InvalidParameter("at least one mixture component must be active".into()));
        }
        let cell = prior_strength / T::lit(NUM_ACTIONS as f64);
        let counts = [[[cell; 2]; NUM_ACTIONS]; NUM_SECTORS];
        let kappa = active.map(|on| if on { prior_strength } else { T::zero() });
        Ok(Self {
            counts,
            kappa,
            prior_counts: counts,
            prior_kappa: kappa,
            lambda,
            updates: 0,
        })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn kappa(&self) -> &[T; NUM_SECTORS] {
        &self.kappa
    }

    pub fn counts(&self) -> &[Table<T>; NUM_SECTORS] {
        &self.counts
    }

    /// Current mean `Θ̂_y(a | v)`.
    pub fn theta_hat(&self, sector: Sector, action: ActionLabel, occupied: usize) -> T {
        let table = &self.counts[sector.index()];
        let total: T = table.iter().map(|row| row[occupied]).sum();
        table[action.index()][occupied] / total
    }

    /// Unnormalized responsibilities `(κ_y / Σκ) · Θ̂_y(a | s(y))`.
    pub fn raw_responsibilities(&self, state: SectorState, action: ActionLabel) -> [T; NUM_SECTORS] {
        let kappa_sum: T = self.kappa.iter().copied().sum();
        Sector::ALL.map(|y| self.kappa[y.index()] / kappa_sum * self.theta_hat(y, action, state.value(y)))
    }

    /// Forget toward the prior, then add the normalized `weights` to the
    /// counts of the observed cells. Returns the normalized weights.
    pub fn apply(&mut self, state: SectorState, action: ActionLabel, weights: [T; NUM_SECTORS]) -> [T; NUM_SECTORS] {
        let total: T = weights.iter().copied().sum();
        let w = if total > T::zero() {
            weights.map(|x| x / total)
        } else {
            [T::zero(); NUM_SECTORS]
        };

        let keep = self.lambda;
        let back = T::one() - keep;
        for y in 0..NUM_SECTORS {
            for a in 0..NUM_ACTIONS {
                for v in 0..2 {
                    self.counts[y][a][v] = keep * self.counts[y][a][v] + back * self.prior_counts[y][a][v];
                }
            }
            self.kappa[y] = keep * self.kappa[y] + back * self.prior_kappa[y];
        }

        let a = action.index();
        for y in Sector::ALL {
            let i = y.index();
            self.counts[i][a][state.value(y)] = self.counts[i][a][state.value(y)] + w[i];
            self.kappa[i] = self.kappa[i] + w[i];
        }
        self.updates += 1;
        w
    }

    /// One quasi-Bayes step. Returns the normalized responsibilities.
    pub fn update(&mut self, state: SectorState, action: ActionLabel) -> [T; NUM_SECTORS] {
        let raw = self.raw_responsibilities(state, action);
        self.apply(state, action, raw)
    }

    pub fn observe(&mut self, obs: &Observation<T>) -> [T; NUM_SECTORS] {
        self.update(obs.state, obs.action)
    }

    pub fn point_estimate(&self) -> MixtureModel<T> {
        let kappa_sum: T = self.kappa.iter().copied().sum();
        let alpha = self.kappa.map(|k| k / kappa_sum);
        let theta = std::array::from_fn(|y| {
            let table = &self.counts[y];
            let totals: [T; 2] = std::array::from_fn(|v| table.iter().map(|row| row[v]).sum());
            std::array::from_fn(|a| std::array::from_fn(|v| table[a][v] / totals[v]))
        });
        MixtureModel { alpha, theta }
    }
}

/// Fold [`EstimatorState::update`] over `observations` in the given order and
/// return the point estimate.
pub fn fit<T: Scalar>(observations: &[Observation<T>], prior_strength: T, lambda: T) -> Result<MixtureModel<T>> {
    if observations.is_empty() {
        return Err(Error::EmptyInput("no observations to fit"));
    }
    let mut state = EstimatorState::init_prior(prior_strength, lambda)?;
    for obs in observations {
        state.observe(obs);
    }
    Ok(state.point_estimate())
}

/// Weights-and-tables report: one column per (sector, occupancy) pair, an
/// `alpha` row, then one row per action.
pub fn write_report_csv<T: Scalar, W: Write>(writer: W, model: &MixtureModel<T>, stamp: Option<&str>) -> Result<()> {
    let mut out = writer;
    if let Some(stamp) = stamp {
        writeln!(out, "# {stamp}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["y".to_string()];
    let mut occupancy = vec!["occupancy".to_string()];
    let mut alpha = vec!["alpha".to_string()];
    for y in Sector::ALL {
        for v in ["empty", "occupied"] {
            header.push(y.name().to_string());
            occupancy.push(v.to_string());
            alpha.push(format!("{:.4}", model.weight(y)));
        }
    }
    w.write_record(&header)?;
    w.write_record(&occupancy)?;
    w.write_record(&alpha)?;
    for a in ActionLabel::ALL {
        let mut row = vec![a.name().to_string()];
        for y in Sector::ALL {
            for v in 0..2 {
                row.push(format!("{:.4}", model.theta[y.index()][a.index()][v]));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_valid(model: &MixtureModel<f64>) {
        let s: f64 = model.alpha.iter().sum();
        assert!((s - 1.0).abs() <= 1e-12);
        for y in Sector::ALL {
            for v in 0..2 {
                let c: f64 = model.component(y).column(v).iter().sum();
                assert!((c - 1.0).abs() <= 1e-12);
            }
        }
        for p in model.theta.iter().flatten().flatten().chain(model.alpha.iter()) {
            assert!((0.0..=1.0).contains(p));
        }
    }

    #[test]
    fn prior_is_uniform() {
        let st = EstimatorState::<f64>::init_prior(1.0, 0.99).unwrap();
        let m = st.point_estimate();
        for a in m.alpha {
            assert!((a - 1.0 / 6.0).abs() < 1e-15);
        }
        for p in m.theta.iter().flatten().flatten() {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn prior_rejects_bad_parameters() {
        assert!(EstimatorState::<f64>::init_prior(0.0, 0.9).is_err());
        assert!(EstimatorState::<f64>::init_prior(-1.0, 0.9).is_err());
        assert!(EstimatorState::<f64>::init_prior(1.0, 0.0).is_err());
        assert!(EstimatorState::<f64>::init_prior(1.0, 1.5).is_err());
        assert!(EstimatorState::<f64>::init_prior_masked(1.0, 1.0, [false; 6]).is_err());
    }

    #[test]
    fn no_forgetting_accumulates() {
        let mut st = EstimatorState::<f64>::init_prior(1.0, 1.0).unwrap();
        for _ in 0..10 {
            st.update(SectorState::EMPTY, ActionLabel::Forward);
        }
        assert_eq!(st.updates(), 10);
        let total: f64 = st.kappa().iter().sum();
        assert!((total - (6.0 + 10.0)).abs() < 1e-12);
    }

    #[test]
    fn single_component_closed_form() {
        let prior = 1.0;
        let mut active = [false; 6];
        active[Sector::Forward.index()] = true;
        let mut st = EstimatorState::<f64>::init_prior_masked(prior, 1.0, active).unwrap();
        let n = 250;
        for _ in 0..n {
            let w = st.update(SectorState::EMPTY, ActionLabel::Forward);
            assert_eq!(w[0], 1.0);
        }
        let m = st.point_estimate();
        let expected = (prior / 7.0 + n as f64) / (prior + n as f64);
        assert!((m.theta[0][ActionLabel::Forward.index()][0] - expected).abs() < 1e-12);
        assert_eq!(m.alpha[0], 1.0);
        assert_valid(&m);
    }

    #[test]
    fn symmetric_state_gives_equal_responsibilities() {
        let mut st = EstimatorState::<f64>::init_prior(1.0, 0.99).unwrap();
        let w = st.update(SectorState::FULL, ActionLabel::Stand);
        for x in w {
            assert!((x - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn first_update_bookkeeping() {
        let lambda = 0.9;
        let mut st = EstimatorState::<f64>::init_prior(2.0, lambda).unwrap();
        let before: f64 = st.kappa().iter().sum();
        let prior_sum = 12.0;
        let state = SectorState::EMPTY.with(Sector::Back);
        let w = st.update(state, ActionLabel::Left);
        let after: f64 = st.kappa().iter().sum();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((after - (lambda * before + (1.0 - lambda) * prior_sum + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn predict_examples() {
        let st = EstimatorState::<f64>::init_prior(1.0, 0.99).unwrap();
        let m = st.point_estimate();
        for s in SectorState::all() {
            for p in m.predict(s) {
                assert!((p - 1.0 / 7.0).abs() < 1e-15);
            }
        }
        let mut theta = [ComponentTable::<f64>::uniform().theta; 6];
        theta[0] = std::array::from_fn(|a| [if a == 1 { 0.4 } else { 0.1 }, if a == 0 { 0.7 } else { 0.05 }]);
        let delta = MixtureModel::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0], theta).unwrap();
        let p = delta.predict(SectorState::EMPTY.with(Sector::Forward).with(Sector::Left));
        assert_eq!(p, delta.component(Sector::Forward).column(1));
        assert_eq!(delta.dominant_sector(), Sector::Forward);
    }

    #[test]
    fn fit_requires_data_and_converges_on_degenerate_input() {
        assert!(fit::<f64>(&[], 1.0, 0.99).is_err());
        let obs = |n: usize| -> Vec<Observation<f64>> {
            (0..n)
                .map(|i| Observation {
                    ped_id: "a".into(),
                    t: i as f64,
                    state: SectorState::EMPTY,
                    action: ActionLabel::Forward,
                })
                .collect()
        };
        let small = fit(&obs(10), 1.0, 1.0).unwrap();
        let large = fit(&obs(5000), 1.0, 1.0).unwrap();
        let dom = |m: &MixtureModel<f64>| m.theta[m.dominant_sector().index()][ActionLabel::Forward.index()][0];
        assert!(dom(&large) > dom(&small));
        assert!(dom(&large) > 0.99);
    }

    #[test]
    fn json_layout() {
        let m = MixtureModel::<f64>::uniform();
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        assert_eq!(v["alpha"].as_array().unwrap().len(), 6);
        let theta = v["theta"].as_array().unwrap();
        assert_eq!(theta.len(), 6);
        assert_eq!(theta[0].as_array().unwrap().len(), 7);
        assert_eq!(theta[0][0].as_array().unwrap().len(), 2);
        let back: MixtureModel<f64> = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn report_layout() {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &MixtureModel::<f64>::uniform(), Some("prior=1")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 3 + 7);
        assert_eq!(lines[0], "# prior=1");
        assert!(lines[1].starts_with("y,fwd,fwd,fwd_r,fwd_r,"));
        assert!(lines[2].starts_with("occupancy,empty,occupied,"));
        assert!(lines[3].starts_with("alpha,0.1667"));
        assert_eq!(lines[3].split(',').count(), 13);
        assert!(lines[4].starts_with("stand,0.1429"));
        assert!(lines[10].starts_with("back,"));
    }

    #[test]
    fn f32_estimator() {
        let mut st = EstimatorState::<f32>::init_prior(1.0, 0.95).unwrap();
        for i in 0..200u8 {
            st.update(SectorState::from_bits(i % 64).unwrap(), ActionLabel::ALL[(i % 7) as usize]);
        }
        let m = st.point_estimate();
        assert!((m.alpha.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    }

    fn obs_strategy() -> impl Strategy<Value = Vec<(u8, usize)>> {
        proptest::collection::vec((0u8..64, 0usize..7), 1..200)
    }

    proptest! {
        #[test]
        fn estimates_stay_normalized(seq in obs_strategy(), lambda in 0.5f64..=1.0, prior in 0.1f64..10.0) {
            let mut st = EstimatorState::init_prior(prior, lambda).unwrap();
            for (bits, a) in seq {
                let w = st.update(SectorState::from_bits(bits).unwrap(), ActionLabel::ALL[a]);
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            let m = st.point_estimate();
            assert_valid(&m);
            for s in SectorState::all() {
                let p = m.predict(s);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn responsibilities_are_scale_free(seq in obs_strategy(), scale in 1e-6f64..1e6, bits in 0u8..64, a in 0usize..7) {
            let mut st = EstimatorState::init_prior(1.0, 0.97).unwrap();
            for (b, act) in seq {
                st.update(SectorState::from_bits(b).unwrap(), ActionLabel::ALL[act]);
            }
            let s = SectorState::from_bits(bits).unwrap();
            let raw = st.raw_responsibilities(s, ActionLabel::ALL[a]);
            let mut x = st.clone();
            let mut y = st.clone();
            x.apply(s, ActionLabel::ALL[a], raw);
            y.apply(s, ActionLabel::ALL[a], raw.map(|r| r * scale));
            for (cx, cy) in x.counts().iter().flatten().flatten().zip(y.counts().iter().flatten().flatten()) {
                prop_assert!((cx - cy).abs() <= 1e-12 * cx.abs().max(1.0));
            }
        }

        #[test]
        fn single_component_matches_direct_counts(seq in obs_strategy(), prior in 0.5f64..4.0) {
            let mut active = [false; 6];
            active[Sector::Left.index()] = true;
            let mut st = EstimatorState::init_prior_masked(prior, 1.0, active).unwrap();
            let mut counts = [[0usize; 2]; 7];
            for &(bits, a) in &seq {
                let s = SectorState::from_bits(bits).unwrap();
                st.update(s, ActionLabel::ALL[a]);
                counts[a][s.value(Sector::Left)] += 1;
            }
            let m = st.point_estimate();
            for v in 0..2 {
                let n: usize = counts.iter().map(|r| r[v]).sum();
                for (a, row) in counts.iter().enumerate() {
                    let expected = (prior / 7.0 + row[v] as f64) / (prior + n as f64);
                    prop_assert!((m.theta[Sector::Left.index()][a][v] - expected).abs() < 1e-12);
                }
            }
        }
    }
}
