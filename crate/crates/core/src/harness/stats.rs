use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Box-plot summary. Quartiles use linear interpolation between order
/// statistics: position `p * (n - 1)` in the sorted values.
///
/// Naming follows the plots these feed: `upper_quartile` is drawn as Q1 and
/// `lower_quartile` as Q3, so `Q3 <= Q2 <= Q1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub upper_quartile: f64,
    pub lower_quartile: f64,
    pub iqr: f64,
    /// Largest value not above `upper_quartile + 1.5 * iqr`.
    pub upper_whisker: f64,
    /// Smallest value not below `lower_quartile - 1.5 * iqr`.
    pub lower_whisker: f64,
    /// Values beyond the whisker fences, ascending.
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of ascending `sorted` at `p` in `[0, 1]`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn aggregate_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::Argument("cannot summarize an empty list".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("summary values must be finite".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lower, median, upper) = (quantile(&sorted, 0.25), quantile(&sorted, 0.5), quantile(&sorted, 0.75));
    let iqr = upper - lower;
    let (lo_fence, hi_fence) = (lower - 1.5 * iqr, upper + 1.5 * iqr);
    let inside = sorted.iter().copied().filter(|v| (lo_fence..=hi_fence).contains(v));
    // The quartiles lie inside the fences, so at least one value does too.
    let lower_whisker = inside.clone().fold(f64::INFINITY, f64::min);
    let upper_whisker = inside.fold(f64::NEG_INFINITY, f64::max);
    Ok(SummaryStats {
        count: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median,
        upper_quartile: upper,
        lower_quartile: lower,
        iqr,
        upper_whisker,
        lower_whisker,
        outliers: sorted.iter().copied().filter(|v| *v < lo_fence || *v > hi_fence).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_and_even_medians() {
        assert_eq!(aggregate_stats(&[5.0, 1.0, 3.0, 2.0, 4.0]).unwrap().median, 3.0);
        let tenths: Vec<f64> = (1..=10).map(|i| f64::from(i) / 10.0).collect();
        assert!((aggregate_stats(&tenths).unwrap().median - 0.55).abs() < 1e-15);
    }

    #[test]
    fn constant_list() {
        let s = aggregate_stats(&[0.7; 6]).unwrap();
        assert_eq!(s.iqr, 0.0);
        assert!(s.outliers.is_empty());
        assert_eq!((s.lower_whisker, s.upper_whisker), (0.7, 0.7));
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(aggregate_stats(&[]), Err(Error::Argument(_))));
    }
}
