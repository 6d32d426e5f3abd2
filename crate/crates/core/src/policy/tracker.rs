//! Incremental empirical-risk state for one arm.
//!
//! The policy re-estimates an arm's risk every time that arm is pulled. For
//! the common cases the estimate is maintained in sublinear time per
//! observation; anything else falls back to the batch estimator.

use crate::arm_models::LossFunction;
use crate::empirical_stats::{quantile_rank, SampleBuffer};
use crate::error::Result;
use crate::risk_measures::{empirical_risk, RiskKind, RiskSpec};
use crate::scalar::Scalar;

const BLOCK: usize = 128;

/// Multiset kept as ascending blocks with per-block sums, so inserts,
/// order statistics and tail sums cost `O(sqrt n)`-ish instead of `O(n)`.
#[derive(Debug, Clone, Default)]
pub(crate) struct OrderedSums<T> {
    blocks: Vec<Vec<T>>,
    sums: Vec<T>,
    len: usize,
}

impl<T: Scalar> OrderedSums<T> {
    pub(crate) fn new() -> Self {
        Self {
            blocks: Vec::new(),
            sums: Vec::new(),
            len: 0,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn insert(&mut self, x: T) {
        self.len += 1;
        if self.blocks.is_empty() {
            self.blocks.push(vec![x]);
            self.sums.push(x);
            return;
        }
        let last = self.blocks.len() - 1;
        let b = self
            .blocks
            .partition_point(|blk| *blk.last().expect("blocks are non-empty") < x)
            .min(last);
        let block = &mut self.blocks[b];
        let pos = block.partition_point(|v| *v < x);
        block.insert(pos, x);
        self.sums[b] = self.sums[b] + x;
        if block.len() >= 2 * BLOCK {
            let tail = block.split_off(BLOCK);
            self.sums[b] = sum(block);
            self.sums.insert(b + 1, sum(&tail));
            self.blocks.insert(b + 1, tail);
        }
    }

    /// `rank`-th smallest element, 1-based.
    pub(crate) fn kth(&self, rank: usize) -> T {
        debug_assert!(1 <= rank && rank <= self.len);
        let mut skip = rank - 1;
        for block in &self.blocks {
            if skip < block.len() {
                return block[skip];
            }
            skip -= block.len();
        }
        unreachable!("rank within length")
    }

    /// Sum of the `count` largest elements.
    pub(crate) fn top_sum(&self, mut count: usize) -> T {
        let mut acc = T::zero();
        for (block, &s) in self.blocks.iter().zip(&self.sums).rev() {
            if count == 0 {
                break;
            }
            if count >= block.len() {
                acc = acc + s;
                count -= block.len();
            } else {
                acc = acc + sum(&block[block.len() - count..]);
                count = 0;
            }
        }
        acc
    }

    /// Count and sum of the elements strictly above `threshold`.
    pub(crate) fn above(&self, threshold: T) -> (usize, T) {
        let (mut count, mut acc) = (0, T::zero());
        for (block, &s) in self.blocks.iter().zip(&self.sums).rev() {
            if block[0] > threshold {
                count += block.len();
                acc = acc + s;
            } else {
                let from = block.partition_point(|v| *v <= threshold);
                count += block.len() - from;
                acc = acc + sum(&block[from..]);
                break;
            }
        }
        (count, acc)
    }
}

fn sum<T: Scalar>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, &x| acc + x)
}

#[derive(Debug, Clone)]
pub(crate) enum RiskTracker<T> {
    /// Running sum; also covers CVaR at level 0, MD with zero weight and the
    /// identity shortfall, which all reduce to the mean.
    Mean {
        sum: T,
    },
    /// Running `sum e^x` for the exponential shortfall `ln(mean e^x)`.
    ExpShortfall {
        sum_exp: T,
    },
    Cvar {
        alpha: T,
        ordered: OrderedSums<T>,
    },
    /// Mean deviation with `p = 1`.
    AbsDeviation {
        gamma: T,
        sum: T,
        ordered: OrderedSums<T>,
    },
    /// Mean deviation with `p = 2` (Welford).
    StdDeviation {
        gamma: T,
        count: usize,
        mean: T,
        m2: T,
    },
    Batch,
}

impl<T: Scalar> RiskTracker<T> {
    pub(crate) fn for_spec(spec: &RiskSpec<T>) -> Self {
        match &spec.kind {
            RiskKind::Mean => Self::Mean { sum: T::zero() },
            RiskKind::Cvar { alpha } if *alpha == T::zero() => Self::Mean { sum: T::zero() },
            RiskKind::Cvar { alpha } => Self::Cvar {
                alpha: *alpha,
                ordered: OrderedSums::new(),
            },
            RiskKind::MeanDeviation { gamma, .. } if *gamma == T::zero() => {
                Self::Mean { sum: T::zero() }
            }
            RiskKind::MeanDeviation { gamma, p, .. } if *p == T::one() => Self::AbsDeviation {
                gamma: *gamma,
                sum: T::zero(),
                ordered: OrderedSums::new(),
            },
            RiskKind::MeanDeviation { gamma, p, .. } if *p == T::lit(2.0) => Self::StdDeviation {
                gamma: *gamma,
                count: 0,
                mean: T::zero(),
                m2: T::zero(),
            },
            RiskKind::Shortfall {
                loss: LossFunction::Identity,
            } => Self::Mean { sum: T::zero() },
            RiskKind::Shortfall {
                loss: LossFunction::ExpMinusOne,
            } => Self::ExpShortfall { sum_exp: T::zero() },
            _ => Self::Batch,
        }
    }

    pub(crate) fn push(&mut self, x: T) {
        match self {
            Self::Mean { sum } => *sum = *sum + x,
            Self::ExpShortfall { sum_exp } => *sum_exp = *sum_exp + x.exp(),
            Self::Cvar { ordered, .. } => ordered.insert(x),
            Self::AbsDeviation { sum, ordered, .. } => {
                *sum = *sum + x;
                ordered.insert(x);
            }
            Self::StdDeviation {
                count, mean, m2, ..
            } => {
                *count += 1;
                let d = x - *mean;
                *mean = *mean + d / T::count(*count);
                *m2 = *m2 + d * (x - *mean);
            }
            Self::Batch => {}
        }
    }

    /// Current estimate; `samples` must hold every value pushed so far.
    pub(crate) fn estimate(&self, samples: &SampleBuffer<T>, spec: &RiskSpec<T>) -> Result<T> {
        let n = samples.len();
        let nf = T::count(n);
        Ok(match self {
            Self::Mean { sum } => *sum / nf,
            Self::ExpShortfall { sum_exp } => (*sum_exp / nf).ln(),
            Self::Cvar { alpha, ordered } => {
                debug_assert_eq!(ordered.len(), n);
                let rank = quantile_rank(n, *alpha);
                let eta = ordered.kth(rank);
                let above = n - rank;
                let excess = ordered.top_sum(above) - T::count(above) * eta;
                eta + excess / (nf * (T::one() - *alpha))
            }
            Self::AbsDeviation {
                gamma,
                sum,
                ordered,
            } => {
                let mean = *sum / nf;
                let (count, upper) = ordered.above(mean);
                let lower = *sum - upper;
                let dev = (upper - T::count(count) * mean) + (T::count(n - count) * mean - lower);
                mean + *gamma * (dev / nf).max(T::zero())
            }
            Self::StdDeviation {
                gamma, mean, m2, ..
            } => *mean + *gamma * (*m2 / nf).max(T::zero()).sqrt(),
            Self::Batch => empirical_risk(samples, spec)?,
        })
    }
}
