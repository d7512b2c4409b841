use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative margin added to the top cut so the largest observation lands
/// strictly inside the last data-bearing interval.
const TOP_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GridScheme {
    #[default]
    Equidistant,
    Quantile,
}

/// Cut points `0 = c_0 < c_1 < ... < c_m`; interval `k` (zero-based) is
/// `(c_k, c_{k+1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    cuts: Vec<f64>,
}

impl Grid {
    pub fn from_cuts(cuts: Vec<f64>) -> Result<Self> {
        if cuts.len() < 2 {
            return Err(Error::InvalidGrid("need at least one interval".into()));
        }
        if cuts[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("first cut must be 0, got {}", cuts[0])));
        }
        for w in cuts.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "cuts must be strictly increasing and finite ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { cuts })
    }

    /// Build an `m`-interval grid over the observed times.
    ///
    /// With `tail_interval` the data occupy the first `m - 1` intervals and
    /// the last one lies entirely beyond every observation, so each
    /// censored subject has a nonempty survival tail (needed by N-MTLR).
    pub fn build(times: &[f64], m: usize, scheme: GridScheme, tail_interval: bool) -> Result<Self> {
        if m < 1 || (tail_interval && m < 2) {
            return Err(Error::InvalidGrid(format!(
                "m={m} too small (tail interval requested: {tail_interval})"
            )));
        }
        let max = times.iter().copied().fold(0.0f64, f64::max);
        let top = max * (1.0 + TOP_MARGIN);
        if !(top > 0.0) {
            return Err(Error::InvalidGrid("all observed times are zero".into()));
        }
        let k = if tail_interval { m - 1 } else { m };
        let mut cuts = match scheme {
            GridScheme::Equidistant => (0..=k).map(|j| top * j as f64 / k as f64).collect::<Vec<_>>(),
            GridScheme::Quantile => {
                let mut sorted = times.to_vec();
                sorted.sort_by(f64::total_cmp);
                let mut cuts = vec![0.0];
                for j in 1..k {
                    cuts.push(quantile_sorted(&sorted, j as f64 / k as f64));
                }
                cuts.push(top);
                cuts
            }
        };
        if tail_interval {
            let last_width = cuts[k] - cuts[k - 1];
            cuts.push(cuts[k] + last_width);
        }
        Self::from_cuts(cuts)
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn m(&self) -> usize {
        self.cuts.len() - 1
    }

    pub fn top(&self) -> f64 {
        *self.cuts.last().expect("grid has cuts")
    }

    /// Zero-based interval holding `t` and the exposure fraction within it.
    /// Intervals are right-closed; `t = 0` maps to the first interval with
    /// zero exposure.
    pub fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if !(t >= 0.0) || t > self.top() {
            return None;
        }
        let upper = &self.cuts[1..];
        let k = upper.partition_point(|&c| c < t);
        let lo = self.cuts[k];
        let hi = self.cuts[k + 1];
        Some((k, ((t - lo) / (hi - lo)).clamp(0.0, 1.0)))
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Subjects mapped onto an interval grid.
///
/// Interval indices are zero-based: `interval_of[i]` is `j(i) - 1`. Subject
/// `i` is at risk in intervals `0..=interval_of[i]`, with event indicator 1
/// only in its own interval and only if it had the event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedDataset {
    pub grid: Grid,
    pub interval_of: Vec<usize>,
    /// Exposure fraction within the subject's last interval.
    pub rho_of: Vec<f64>,
    pub event: Vec<bool>,
    /// `at_risk[k] = #{i : interval_of[i] >= k}`.
    pub at_risk: Vec<usize>,
}

impl DiscretizedDataset {
    pub fn assign(grid: &Grid, time: &[f64], event: &[bool]) -> Result<Self> {
        if time.len() != event.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times vs {} event flags",
                time.len(),
                event.len()
            )));
        }
        let mut interval_of = Vec::with_capacity(time.len());
        let mut rho_of = Vec::with_capacity(time.len());
        for (index, &t) in time.iter().enumerate() {
            let (k, rho) = grid.locate(t).ok_or(Error::Assignment {
                index,
                time: t,
                top: grid.top(),
            })?;
            interval_of.push(k);
            rho_of.push(rho);
        }
        Ok(Self::from_parts(grid.clone(), interval_of, rho_of, event.to_vec()))
    }

    /// Assemble from explicit assignments (used for hand-built instances).
    pub fn from_parts(grid: Grid, interval_of: Vec<usize>, rho_of: Vec<f64>, event: Vec<bool>) -> Self {
        let m = grid.m();
        let mut at_risk = vec![0usize; m];
        for &k in &interval_of {
            assert!(k < m, "interval index {k} outside grid of {m} intervals");
            at_risk[k] += 1;
        }
        for k in (0..m.saturating_sub(1)).rev() {
            at_risk[k] += at_risk[k + 1];
        }
        Self {
            grid,
            interval_of,
            rho_of,
            event,
            at_risk,
        }
    }

    pub fn n(&self) -> usize {
        self.interval_of.len()
    }

    pub fn m(&self) -> usize {
        self.grid.m()
    }

    pub fn is_at_risk(&self, i: usize, k: usize) -> bool {
        k <= self.interval_of[i]
    }

    /// Event indicator `y_ik`.
    pub fn y(&self, i: usize, k: usize) -> bool {
        self.event[i] && k == self.interval_of[i]
    }

    /// Total number of at-risk cells, `sum_k at_risk[k]`.
    pub fn n_cells(&self) -> usize {
        self.at_risk.iter().sum()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self::from_parts(
            self.grid.clone(),
            idx.iter().map(|&i| self.interval_of[i]).collect(),
            idx.iter().map(|&i| self.rho_of[i]).collect(),
            idx.iter().map(|&i| self.event[i]).collect(),
        )
    }
}

/// Build a grid from the observed times and assign every subject to it.
pub fn discretize(time: &[f64], event: &[bool], m: usize, scheme: GridScheme) -> Result<DiscretizedDataset> {
    let grid = Grid::build(time, m, scheme, false)?;
    DiscretizedDataset::assign(&grid, time, event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(cuts: &[f64]) -> Grid {
        Grid::from_cuts(cuts.to_vec()).unwrap()
    }

    #[test]
    fn exposure_fraction_example() {
        let d = DiscretizedDataset::assign(&grid(&[0.0, 0.2, 0.4]), &[0.25], &[true]).unwrap();
        assert_eq!(d.interval_of, vec![1]);
        assert_abs_diff_eq!(d.rho_of[0], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn right_closed_boundary() {
        let d = DiscretizedDataset::assign(&grid(&[0.0, 0.2, 0.4]), &[0.2, 0.4], &[false, true]).unwrap();
        assert_eq!(d.interval_of, vec![0, 1]);
        assert_eq!(d.rho_of, vec![1.0, 1.0]);
    }

    #[test]
    fn at_risk_counts() {
        let d = DiscretizedDataset::assign(&grid(&[0.0, 0.2, 0.4]), &[0.1, 0.3, 0.3], &[true, false, true]).unwrap();
        assert_eq!(d.at_risk, vec![3, 2]);
        assert_eq!(d.n_cells(), 5);
        let cells = (0..3)
            .map(|i| (0..2).filter(|&k| d.is_at_risk(i, k)).count())
            .sum::<usize>();
        assert_eq!(cells, 5);
        // indicators sum to the event flag
        for i in 0..3 {
            let s = (0..2).filter(|&k| d.y(i, k)).count();
            assert_eq!(s, d.event[i] as usize);
        }
    }

    #[test]
    fn time_beyond_grid_is_an_error() {
        let err = DiscretizedDataset::assign(&grid(&[0.0, 0.2, 0.4]), &[0.5], &[true]).unwrap_err();
        assert!(matches!(err, Error::Assignment { index: 0, .. }));
    }

    #[test]
    fn zero_width_interval_rejected() {
        assert!(matches!(
            Grid::from_cuts(vec![0.0, 0.2, 0.2]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            discretize(&[0.1, 0.1, 0.1, 0.1], &[true; 4], 3, GridScheme::Quantile),
            Err(Error::InvalidGrid(_))
        ));
        assert!(Grid::build(&[0.0, 0.0], 2, GridScheme::Equidistant, false).is_err());
    }

    #[test]
    fn equidistant_grid_covers_maximum() {
        let times = [0.05, 0.6, 0.3, 0.6];
        let d = discretize(&times, &[true, false, true, false], 4, GridScheme::Equidistant).unwrap();
        assert_eq!(d.m(), 4);
        assert_eq!(d.interval_of[1], 3);
        assert!(d.grid.top() > 0.6);
    }

    #[test]
    fn tail_interval_is_empty() {
        let times = [0.05, 0.6, 0.3];
        let g = Grid::build(&times, 5, GridScheme::Equidistant, true).unwrap();
        let d = DiscretizedDataset::assign(&g, &times, &[true, false, false]).unwrap();
        assert_eq!(d.m(), 5);
        assert!(d.interval_of.iter().all(|&k| k < 4));
        assert_eq!(d.at_risk[4], 0);
        assert!(g.cuts()[4] > 0.6);
    }

    #[test]
    fn quantile_grid_is_increasing() {
        let times: Vec<f64> = (1..=100).map(|i| (i as f64 / 100.0).powi(2)).collect();
        let d = discretize(&times, &[true; 100], 4, GridScheme::Quantile).unwrap();
        let counts: Vec<usize> = (0..4)
            .map(|k| d.interval_of.iter().filter(|&&j| j == k).count())
            .collect();
        assert!(counts.iter().all(|&c| (24..=26).contains(&c)), "{counts:?}");
    }

    proptest::proptest! {
        #[test]
        fn masks_and_counts_agree(times in proptest::collection::vec(0.001f64..1.0, 1..40), m in 1usize..8) {
            let events: Vec<bool> = times.iter().map(|t| t * 1000.0 % 2.0 < 1.0).collect();
            let d = discretize(&times, &events, m, GridScheme::Equidistant).unwrap();
            for k in 0..m {
                let direct = (0..d.n()).filter(|&i| d.is_at_risk(i, k)).count();
                proptest::prop_assert_eq!(direct, d.at_risk[k]);
            }
            #[allow(clippy::needless_range_loop)]
            for i in 0..d.n() {
                proptest::prop_assert!(d.rho_of[i] > 0.0 && d.rho_of[i] <= 1.0);
                let k = d.interval_of[i];
                let c = d.grid.cuts();
                let rho = (times[i] - c[k]) / (c[k + 1] - c[k]);
                proptest::prop_assert!((rho - d.rho_of[i]).abs() < 1e-12);
            }
        }
    }
}
