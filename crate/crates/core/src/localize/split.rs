use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Rows,
    Columns,
}

/// Projection scores of every row or every column.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector {
    pub values: Vec<f64>,
    pub axis: Axis,
}

impl ScoreVector {
    pub fn new(values: Vec<f64>, axis: Axis) -> Self {
        ScoreVector { values, axis }
    }
}

/// Two-cluster partition of a score vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    /// Sorted indices of the signal side.
    pub inside: Vec<usize>,
    /// Sorted indices of the remaining side.
    pub outside: Vec<usize>,
    /// Width of the cut (difference of the two scores adjacent to it).
    pub gap: f64,
    pub degenerate: bool,
}

/// Largest gaps at or below this fraction of the largest |score| count as ties
/// of identical values.
const FLAT_TOL: f64 = 1e-12;

/// Splits scores at the largest gap between consecutive sorted values.
///
/// The side with the larger mean absolute score is `inside`. Ties (equal
/// gaps, equal means) resolve toward the smaller inside set, then toward the
/// lower cut. When every score is equal the split is degenerate: everything
/// is `outside` and `gap = 0`.
pub fn split_1d(scores: &ScoreVector) -> Result<Split> {
    split_values(&scores.values)
}

pub(crate) fn split_values(values: &[f64]) -> Result<Split> {
    let p = values.len();
    if p < 2 {
        return Err(Error::domain(format!("need at least two scores, got {p}")));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::validation(format!("non-finite score {v}")));
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let gaps: Vec<f64> = order
        .windows(2)
        .map(|w| values[w[1]] - values[w[0]])
        .collect();
    let max_gap = gaps.iter().copied().fold(0.0f64, f64::max);
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if max_gap <= FLAT_TOL * scale || max_gap == 0.0 {
        let mut outside = order;
        outside.sort_unstable();
        return Ok(Split {
            inside: Vec::new(),
            outside,
            gap: 0.0,
            degenerate: true,
        });
    }

    // prefix[t] = sum of |v| over the t smallest scores.
    let mut prefix = vec![0.0; p + 1];
    for (t, &i) in order.iter().enumerate() {
        prefix[t + 1] = prefix[t] + values[i].abs();
    }
    let mut best: Option<(usize, bool, usize)> = None; // (inside size, upper is inside, cut)
    for (t, &g) in gaps.iter().enumerate() {
        if g != max_gap {
            continue;
        }
        let lower_n = t + 1;
        let upper_n = p - lower_n;
        let lower_mean = prefix[lower_n] / lower_n as f64;
        let upper_mean = (prefix[p] - prefix[lower_n]) / upper_n as f64;
        let upper_inside = if upper_mean != lower_mean {
            upper_mean > lower_mean
        } else {
            upper_n <= lower_n
        };
        let size = if upper_inside { upper_n } else { lower_n };
        if best.is_none_or(|(s, _, _)| size < s) {
            best = Some((size, upper_inside, t));
        }
    }
    let (_, upper_inside, t) = best.expect("at least one maximal gap");
    let (lower, upper) = order.split_at(t + 1);
    let (mut inside, mut outside) = if upper_inside {
        (upper.to_vec(), lower.to_vec())
    } else {
        (lower.to_vec(), upper.to_vec())
    };
    inside.sort_unstable();
    outside.sort_unstable();
    Ok(Split {
        inside,
        outside,
        gap: max_gap,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_clear_clusters() {
        let s = split_1d(&ScoreVector::new(vec![0.0, 0.1, 5.0, 5.2], Axis::Columns)).unwrap();
        assert_eq!(s.inside, vec![2, 3]);
        assert_eq!(s.outside, vec![0, 1]);
        assert!((s.gap - 4.9).abs() < 1e-12);
        assert!(!s.degenerate);
    }

    #[test]
    fn all_equal_is_degenerate() {
        let s = split_values(&[1.0; 5]).unwrap();
        assert!(s.degenerate);
        assert!(s.inside.is_empty());
        assert_eq!(s.gap, 0.0);
        assert!(split_values(&[1.0]).is_err());
    }

    #[test]
    fn negative_signal_side() {
        // Sign of singular vectors is arbitrary; the large-magnitude side wins.
        let s = split_values(&[-6.0, 0.2, -5.5, 0.0, 0.1]).unwrap();
        assert_eq!(s.inside, vec![0, 2]);
    }

    #[test]
    fn ties_prefer_smaller_inside() {
        // Gaps 1 and 1; means tie on both cuts, so the singleton wins.
        let s = split_values(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.inside.len(), 1);
        assert_eq!(s.inside, vec![0]);
        let s = split_values(&[1.0, -1.0]).unwrap();
        assert_eq!(s.inside, vec![0]);
    }

    proptest! {
        #[test]
        fn split_partitions_and_gap_is_cross_minimum(
            values in prop::collection::vec(-100.0f64..100.0, 2..40)
        ) {
            let s = split_values(&values).unwrap();
            let mut all: Vec<usize> = s.inside.iter().chain(&s.outside).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..values.len()).collect::<Vec<_>>());
            if !s.degenerate {
                let cross = s.inside.iter()
                    .flat_map(|&i| s.outside.iter().map(move |&o| (i, o)))
                    .map(|(i, o)| (values[i] - values[o]).abs())
                    .fold(f64::INFINITY, f64::min);
                prop_assert!((cross - s.gap).abs() <= 1e-12 * (1.0 + s.gap));
                // Every inside score lies on one side of every outside score.
                let inside_hi = s.inside.iter().map(|&i| values[i]).fold(f64::NEG_INFINITY, f64::max);
                let inside_lo = s.inside.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min);
                prop_assert!(s.outside.iter().all(|&o| values[o] < inside_lo || values[o] > inside_hi));
            }
        }

        #[test]
        fn split_is_scale_invariant(
            values in prop::collection::vec(-100.0f64..100.0, 2..40), c in 0.01f64..100.0
        ) {
            let a = split_values(&values).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * c).collect();
            let b = split_values(&scaled).unwrap();
            // Scaling can only reorder exactly tied gaps; compare when the max gap is unique.
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let mut gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
            gaps.sort_by(f64::total_cmp);
            let n = gaps.len();
            if n < 2 || gaps[n - 1] > gaps[n - 2] * (1.0 + 1e-9) + 1e-9 {
                prop_assert_eq!(a.inside, b.inside);
            }
        }
    }
}
