//! Volume-constrained thresholding: the maximizer of `int q f` over controls with
//! `0 <= f <= 1` and a prescribed volume is the indicator of a superlevel set of `q`.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{l1_distance, ControlField, Grid, ScalarField};

/// Largest grid accepted by [`bathtub_oracle`].
pub const ORACLE_MAX_CELLS: usize = 20;

/// Fraction of cells at the threshold level above which a flat switch field is reported.
const TIE_WARNING_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `K = round(V0 N)` cells set to one, ties broken by ascending index.
    #[default]
    StrictBinary,
    /// Cells above the level set to one, cells at the level share the remaining volume.
    Fractional,
}

#[derive(Debug, Clone)]
pub struct ThresholdResult {
    /// The level `c`: value of the last selected cell (strict) or of the cell where the
    /// cumulative volume crosses `V0 N` (fractional).
    pub level: f64,
    /// Largest value among cells left at zero, if any.
    pub runner_up: Option<f64>,
    pub indicator: ControlField,
    /// Cells whose value equals `level`.
    pub tie_cells: Vec<usize>,
    pub achieved_fraction: f64,
    pub mode: ThresholdMode,
}

impl ThresholdResult {
    /// Level halfway between the last selected value and the first rejected one; the
    /// discrete interface `{q = mu}` then separates the two sets.
    pub fn interface_level(&self) -> f64 {
        match self.runner_up {
            Some(r) => 0.5 * (self.level + r),
            None => self.level,
        }
    }

    pub fn selected(&self) -> Vec<usize> {
        self.indicator.values().iter().enumerate().filter(|(_, &v)| v == 1.0).map(|(k, _)| k).collect()
    }
}

/// Descending by value, ascending by index on ties.
fn rank_order(q: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b))
}

/// Number of selected cells in strict mode.
pub fn selection_size(v0: f64, n: usize) -> usize {
    ((v0 * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Indices of the `k` largest values under the deterministic order.
fn top_k(q: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..q.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k, rank_order(q));
        idx.truncate(k);
    }
    idx.sort_by(rank_order(q));
    idx
}

/// Thresholds `q` at volume fraction `v0`.
pub fn find_threshold(q: &ScalarField, v0: f64, mode: ThresholdMode) -> Result<ThresholdResult> {
    if !(v0 > 0.0 && v0 < 1.0) {
        return Err(Error::InvalidParameter(format!("volume fraction {v0} not in (0,1)")));
    }
    let grid = q.grid().clone();
    let values = q.values();
    let n = values.len();
    let (level, runner_up, indicator) = match mode {
        ThresholdMode::StrictBinary => {
            let k = selection_size(v0, n);
            let sel = top_k(values, k);
            let mut ind = vec![0.0; n];
            sel.iter().for_each(|&c| ind[c] = 1.0);
            let level = values[*sel.last().unwrap()];
            let runner_up = (0..n).filter(|&c| ind[c] == 0.0).map(|c| values[c]).reduce(f64::max);
            (level, runner_up, ind)
        }
        ThresholdMode::Fractional => {
            let volume = v0 * n as f64;
            let k = (volume.ceil() as usize).clamp(1, n);
            let sel = top_k(values, k);
            let level = values[*sel.last().unwrap()];
            let above = values.iter().filter(|&&v| v > level).count();
            let ties = values.iter().filter(|&&v| v == level).count();
            let share = (volume - above as f64) / ties as f64;
            let ind: Vec<f64> = values
                .iter()
                .map(|&v| match v.total_cmp(&level) {
                    Ordering::Greater => 1.0,
                    Ordering::Equal => share,
                    Ordering::Less => 0.0,
                })
                .collect();
            let runner_up = values.iter().copied().filter(|&v| v < level).reduce(f64::max);
            (level, runner_up, ind)
        }
    };
    let tie_cells: Vec<usize> = (0..n).filter(|&c| values[c] == level).collect();
    if tie_cells.len() as f64 > TIE_WARNING_FRACTION * n as f64 && tie_cells.len() > 1 {
        log::warn!(
            "{} of {} cells lie exactly at the threshold level {level:e}; the switch field is flat there",
            tie_cells.len(),
            n
        );
    }
    let achieved_fraction = indicator.iter().sum::<f64>() / n as f64;
    let indicator = ControlField::new_unchecked_volume(grid, indicator, v0);
    Ok(ThresholdResult { level, runner_up, indicator, tie_cells, achieved_fraction, mode })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptimum {
    /// Best `int q f` over indicators with exactly `K = round(V0 N)` cells.
    pub binary: f64,
    /// Best `int q f` over `0 <= f <= 1` with mean exactly `V0` (greedy fill).
    pub fractional: f64,
}

/// Exhaustive maximization of `int q f` for grids of at most [`ORACLE_MAX_CELLS`] cells.
pub fn bathtub_oracle(q: &ScalarField, v0: f64) -> Result<OracleOptimum> {
    oracle_on_values(q.values(), q.grid().cell_measure(), v0)
}

pub(crate) fn oracle_on_values(values: &[f64], cell: f64, v0: f64) -> Result<OracleOptimum> {
    let n = values.len();
    if n > ORACLE_MAX_CELLS {
        return Err(Error::OracleScale { max: ORACLE_MAX_CELLS, got: n });
    }
    let k = selection_size(v0, n) as u32;
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() != k {
            continue;
        }
        let s: f64 = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| values[b]).sum();
        best = best.max(s);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut remaining = v0 * n as f64;
    let mut frac = 0.0;
    for v in sorted {
        let take = remaining.min(1.0);
        if take <= 0.0 {
            break;
        }
        frac += take * v;
        remaining -= take;
    }
    Ok(OracleOptimum { binary: best * cell, fractional: frac * cell })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantitativeGap {
    /// `int q best - int q f`
    pub gap: f64,
    /// `||f - best||_{L^1}`
    pub l1: f64,
}

impl QuantitativeGap {
    /// Empirical `gap / l1^2`, undefined when `l1 = 0`.
    pub fn ratio(&self) -> Option<f64> {
        (self.l1 > 0.0).then(|| self.gap / (self.l1 * self.l1))
    }
}

pub fn quantitative_gap(q: &ScalarField, f: &ControlField, best: &ThresholdResult) -> Result<QuantitativeGap> {
    let grid: &Arc<Grid> = q.grid();
    if !grid.same_as(f.grid()) || !grid.same_as(best.indicator.grid()) {
        return Err(Error::GridMismatch);
    }
    let dot = |w: &[f64]| q.values().iter().zip(w).map(|(a, b)| a * b).sum::<f64>() * grid.cell_measure();
    let gap = dot(best.indicator.values()) - dot(f.values());
    let l1 = l1_distance(f, &best.indicator)?;
    let result = QuantitativeGap { gap, l1 };
    if let Some(r) = result.ratio() {
        log::debug!("quantitative bathtub ratio gap/l1^2 = {r:e}");
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, DomainSpec};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn field(values: Vec<f64>) -> ScalarField {
        let n = values.len();
        let g = build_grid(DomainSpec::interval(0.0, n as f64, n)).unwrap();
        ScalarField::new(g, values).unwrap()
    }

    #[test]
    fn three_cell_oracle_example() {
        // h = 1 here; the two largest of (3,1,2) are cells 0 and 2
        let opt = oracle_on_values(&[3.0, 1.0, 2.0], 1.0, 2.0 / 3.0).unwrap();
        assert_eq!(opt.binary, 5.0);
        let opt = oracle_on_values(&[3.0, 1.0, 2.0], 0.25, 2.0 / 3.0).unwrap();
        assert_eq!(opt.binary, 1.25);
    }

    #[test]
    fn three_largest_of_eight() {
        let q = field(vec![3.0, 1.0, 2.0, 0.5, 0.1, 2.5, 0.2, 0.3]);
        let r = find_threshold(&q, 3.0 / 8.0, ThresholdMode::StrictBinary).unwrap();
        assert_eq!(r.selected(), vec![0, 2, 5]);
        assert_eq!(r.level, 2.0);
        assert_eq!(r.runner_up, Some(1.0));
        assert_relative_eq!(r.interface_level(), 1.5);
    }

    #[test]
    fn constant_field_strict_uses_index_order() {
        let q = field(vec![1.0; 9]);
        let r = find_threshold(&q, 0.5, ThresholdMode::StrictBinary).unwrap();
        assert_eq!(r.selected(), vec![0, 1, 2, 3, 4]);
        assert!((r.achieved_fraction - 0.5).abs() <= 1.0 / 9.0);
        assert_eq!(r.tie_cells.len(), 9);
    }

    #[test]
    fn constant_field_fractional_is_uniform() {
        let q = field(vec![2.0; 10]);
        let r = find_threshold(&q, 0.5, ThresholdMode::Fractional).unwrap();
        assert!(r.indicator.values().iter().all(|&v| v == 0.5));
        assert_eq!(r.achieved_fraction, 0.5);
    }

    #[test]
    fn oracle_constant_and_single_cell() {
        let opt = oracle_on_values(&[1.0; 8], 0.5, 0.5).unwrap();
        assert_relative_eq!(opt.binary, 0.5 * 8.0 * 0.5);
        assert_relative_eq!(opt.fractional, 0.5 * 8.0 * 0.5);
        let q = [0.1, 0.7, 3.0, 0.2, 0.5, 0.4, 0.9, 0.3];
        let opt = oracle_on_values(&q, 0.25, 1.0 / 8.0).unwrap();
        assert_relative_eq!(opt.binary, 3.0 * 0.25);
    }

    #[test]
    fn oracle_rejects_large_grids() {
        assert!(matches!(oracle_on_values(&[0.0; 21], 1.0, 0.5), Err(Error::OracleScale { .. })));
    }

    #[test]
    fn gap_examples() {
        let q = field(vec![4.0, 3.0, 2.0, 1.0, 0.5, 0.4, 0.3, 0.2]);
        let best = find_threshold(&q, 0.5, ThresholdMode::StrictBinary).unwrap();
        let same = quantitative_gap(&q, &best.indicator, &best).unwrap();
        assert_eq!(same.gap, 0.0);
        assert_eq!(same.l1, 0.0);
        assert_eq!(same.ratio(), None);
        let complement = ControlField::indicator(q.grid().clone(), &[4, 5, 6, 7], 0.5).unwrap();
        let g = quantitative_gap(&q, &complement, &best).unwrap();
        assert!(g.gap > 0.0);
        assert_relative_eq!(g.l1, q.grid().total_measure());
        assert_relative_eq!(g.gap, 10.0 - 1.4);
    }

    #[test]
    fn level_separates_cells() {
        let q = field(vec![0.3, 0.9, 0.3, 0.3, 0.1, 0.8, 0.3, 0.2, 0.3, 0.5]);
        for mode in [ThresholdMode::StrictBinary, ThresholdMode::Fractional] {
            let r = find_threshold(&q, 0.45, mode).unwrap();
            for (v, f) in q.values().iter().zip(r.indicator.values()) {
                if *v > r.level {
                    assert_eq!(*f, 1.0);
                }
                if *v < r.level {
                    assert_eq!(*f, 0.0);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn strict_matches_oracle(values in prop::collection::vec(-5.0f64..5.0, 8..=12), pick in 0usize..3) {
            let v0 = [0.25, 0.5, 0.75][pick];
            let q = field(values);
            let r = find_threshold(&q, v0, ThresholdMode::StrictBinary).unwrap();
            let opt = bathtub_oracle(&q, v0).unwrap();
            let got: f64 = q.values().iter().zip(r.indicator.values()).map(|(a, b)| a * b).sum::<f64>()
                * q.grid().cell_measure();
            prop_assert!((got - opt.binary).abs() <= 1e-12 * (1.0 + opt.binary.abs()));
            prop_assert!(r.indicator.is_bang_bang());
            prop_assert!((r.achieved_fraction - v0).abs() <= 1.0 / q.values().len() as f64);
        }

        #[test]
        fn fractional_volume_is_exact(values in prop::collection::vec(0.0f64..1.0, 8..200), v0 in 0.01f64..0.99) {
            let rounded: Vec<f64> = values.iter().map(|v| (v * 8.0).round() / 8.0).collect();
            let q = field(rounded);
            let r = find_threshold(&q, v0, ThresholdMode::Fractional).unwrap();
            prop_assert!((r.achieved_fraction - v0).abs() <= 1e-14);
            prop_assert!(r.indicator.values().iter().all(|v| (0.0..=1.0).contains(v)));
            for (k, v) in r.indicator.values().iter().enumerate() {
                if *v != 0.0 && *v != 1.0 {
                    prop_assert!(r.tie_cells.contains(&k));
                }
            }
        }

        #[test]
        fn monotone_maps_preserve_selection(values in prop::collection::vec(-3.0f64..3.0, 8..100), v0 in 0.05f64..0.95) {
            let q = field(values.clone());
            let base = find_threshold(&q, v0, ThresholdMode::StrictBinary).unwrap().selected();
            for g in [|x: f64| x.exp(), |x: f64| 3.0 * x + 1.0] {
                let mapped = ScalarField::new(q.grid().clone(), values.iter().map(|&x| g(x)).collect()).unwrap();
                let sel = find_threshold(&mapped, v0, ThresholdMode::StrictBinary).unwrap().selected();
                prop_assert_eq!(&sel, &base);
            }
        }

        #[test]
        fn gap_is_nonnegative(values in prop::collection::vec(-1.0f64..1.0, 10), seed in any::<u64>()) {
            let q = field(values);
            let best = find_threshold(&q, 0.5, ThresholdMode::StrictBinary).unwrap();
            // random admissible control with 5 selected cells
            let mut idx: Vec<usize> = (0..10).collect();
            let mut s = seed;
            for i in (1..10).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                idx.swap(i, (s >> 33) as usize % (i + 1));
            }
            let f = ControlField::indicator(q.grid().clone(), &idx[..5], 0.5).unwrap();
            let g = quantitative_gap(&q, &f, &best).unwrap();
            prop_assert!(g.gap >= -1e-12);
            // no ties almost surely: zero gap only when the sets coincide
            if g.l1 > 0.0 {
                prop_assert!(g.gap > 0.0);
            }
        }
    }
}
