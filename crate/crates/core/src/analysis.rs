//! Plot data for the motion statistics: angle × length frequency table and a
//! wrapped Gaussian kernel density of the direction angle.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::trajectory::MotionStep;

/// Frequency of motion length per direction-angle bin.
///
/// Angle bins partition `(-π, π]` into equal right-closed intervals. Length
/// bins cover `[0, max_length]`; lengths are meters per discretization step.
/// Zero-length steps have no direction and are counted at angle 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct MotionHistogram<T> {
    pub angle_edges: Vec<T>,
    pub length_edges: Vec<T>,
    /// `counts[angle_bin][length_bin]`
    pub counts: Vec<Vec<u64>>,
}

impl<T: Scalar> MotionHistogram<T> {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn angle_bin(&self, angle: T) -> usize {
        let n = self.counts.len();
        let width = T::TAU() / T::from_usize_lossy(n);
        let k = ((angle + T::PI()) / width).ceil().to_isize().unwrap_or(0) - 1;
        k.clamp(0, n as isize - 1) as usize
    }

    fn length_bin(&self, length: T) -> usize {
        let n = self.length_edges.len() - 1;
        let max = self.length_edges[n];
        if max <= T::zero() {
            return 0;
        }
        let k = (length / (max / T::from_usize_lossy(n))).floor().to_usize().unwrap_or(0);
        k.min(n - 1)
    }

    /// Counts summed over length, one per angle bin.
    pub fn angle_marginal(&self) -> Vec<u64> {
        self.counts.iter().map(|row| row.iter().sum()).collect()
    }
}

/// Build the angle × length table. `max_length` defaults to the longest step.
pub fn motion_histogram<T: Scalar>(
    steps: &[MotionStep<T>],
    angle_bins: usize,
    length_bins: usize,
    max_length: Option<T>,
) -> Result<MotionHistogram<T>> {
    if angle_bins == 0 || length_bins == 0 {
        return Err(Error::InvalidParameter("bin counts must be positive".into()));
    }
    let max_length = max_length.unwrap_or_else(|| {
        steps
            .iter()
            .map(MotionStep::length)
            .fold(T::zero(), T::max)
    });
    let edges = |lo: T, hi: T, n: usize| -> Vec<T> {
        (0..=n)
            .map(|k| lo + (hi - lo) * T::from_usize_lossy(k) / T::from_usize_lossy(n))
            .collect()
    };
    let mut hist = MotionHistogram {
        angle_edges: edges(-T::PI(), T::PI(), angle_bins),
        length_edges: edges(T::zero(), max_length, length_bins),
        counts: vec![vec![0; length_bins]; angle_bins],
    };
    for step in steps {
        let a = hist.angle_bin(step.angle.unwrap_or_else(T::zero));
        let l = hist.length_bin(step.length());
        hist.counts[a][l] += 1;
    }
    Ok(hist)
}

/// Direction density sampled on an equally spaced grid over `(-π, π]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct DirectionKde<T> {
    pub bandwidth: T,
    pub angles: Vec<T>,
    pub density: Vec<T>,
}

impl<T: Scalar> DirectionKde<T> {
    /// Periodic rectangle rule over the grid.
    pub fn integral(&self) -> T {
        let step = T::TAU() / T::from_usize_lossy(self.angles.len());
        self.density.iter().copied().sum::<T>() * step
    }

    /// Angles of strict local maxima on the circular grid.
    pub fn modes(&self) -> Vec<T> {
        let n = self.density.len();
        (0..n)
            .filter(|&i| {
                let d = self.density[i];
                d > self.density[(i + n - 1) % n] && d >= self.density[(i + 1) % n]
            })
            .map(|i| self.angles[i])
            .collect()
    }
}

/// Silverman's rule of thumb on the raw angle sample.
pub fn silverman_bandwidth<T: Scalar>(angles: &[T]) -> T {
    let n = T::from_usize_lossy(angles.len());
    let mean = angles.iter().copied().sum::<T>() / n;
    let var = angles.iter().map(|&a| (a - mean) * (a - mean)).sum::<T>() / n;
    let sd = var.sqrt();
    let mut sorted = angles.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite angles"));
    let quantile = |q: f64| {
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let w = T::lit(pos - lo as f64);
        sorted[lo] + (sorted[hi] - sorted[lo]) * w
    };
    let iqr = (quantile(0.75) - quantile(0.25)) / T::lit(1.34);
    let spread = if iqr > T::zero() { sd.min(iqr) } else { sd };
    T::lit(0.9) * spread * n.powf(T::lit(-0.2))
}

fn wrapped_normal<T: Scalar>(x: T, h: T) -> T {
    let tau = T::TAU();
    let wraps = (T::lit(8.0) * h / tau).ceil().to_i64().unwrap_or(1) + 1;
    let norm = T::one() / (h * tau.sqrt());
    (-wraps..=wraps)
        .map(|k| {
            let u = (x + tau * T::lit(k as f64)) / h;
            (T::lit(-0.5) * u * u).exp()
        })
        .sum::<T>()
        * norm
}

/// Wrapped Gaussian KDE of the direction angle over steps that have one.
/// Without an explicit bandwidth Silverman's rule is used, falling back to two
/// grid spacings when the sample has no spread.
pub fn direction_kde<T: Scalar>(
    steps: &[MotionStep<T>],
    bandwidth: Option<T>,
    points: usize,
) -> Result<DirectionKde<T>> {
    let angles: Vec<T> = steps.iter().filter_map(|s| s.angle).collect();
    if angles.is_empty() {
        return Err(Error::EmptyInput("no directed motion steps for the density estimate"));
    }
    if points < 2 {
        return Err(Error::InvalidParameter("kde needs at least 2 grid points".into()));
    }
    let spacing = T::TAU() / T::from_usize_lossy(points);
    let h = match bandwidth {
        Some(h) if h > T::zero() => h,
        Some(h) => return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}"))),
        None => {
            let h = silverman_bandwidth(&angles);
            if h.is_finite() && h > T::zero() {
                h
            } else {
                spacing * T::lit(2.0)
            }
        }
    };
    let grid: Vec<T> = (1..=points)
        .map(|k| -T::PI() + spacing * T::from_usize_lossy(k))
        .collect();
    let n = T::from_usize_lossy(angles.len());
    let density = grid
        .iter()
        .map(|&g| angles.iter().map(|&a| wrapped_normal(g - a, h)).sum::<T>() / n)
        .collect();
    Ok(DirectionKde {
        bandwidth: h,
        angles: grid,
        density,
    })
}
