//! Splitting criteria: SSE and MSE for regression, and the Tsallis-entropy
//! family (Shannon, Gini, gain ratio, general q) for classification.

use serde::{Deserialize, Serialize};

use crate::error::{DdtError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    Sse,
    Mse,
    Shannon,
    Gini,
    GainRatio,
    Tsallis { q: f64 },
}

impl SplitCriterion {
    pub fn is_regression(&self) -> bool {
        matches!(self, SplitCriterion::Sse | SplitCriterion::Mse)
    }

    /// Lower values are better for regression losses; classification criteria
    /// are gains, where higher is better.
    pub fn lower_is_better(&self) -> bool {
        self.is_regression()
    }

    /// Parse a config key: `sse`, `mse`, `shannon`, `gini`, `gain_ratio`, or
    /// `tsallis[:<q>]` (bare `tsallis` defaults to q = 2).
    pub fn parse_key(key: &str) -> Result<Self> {
        match key {
            "sse" => Ok(SplitCriterion::Sse),
            "mse" => Ok(SplitCriterion::Mse),
            "shannon" => Ok(SplitCriterion::Shannon),
            "gini" => Ok(SplitCriterion::Gini),
            "gain_ratio" => Ok(SplitCriterion::GainRatio),
            "tsallis" => Ok(SplitCriterion::Tsallis { q: 2.0 }),
            _ => {
                if let Some(q) = key.strip_prefix("tsallis:") {
                    let q: f64 = q
                        .parse()
                        .map_err(|_| DdtError::Criterion(format!("bad tsallis parameter `{q}`")))?;
                    if q == 1.0 || q <= 0.0 || !q.is_finite() {
                        return Err(DdtError::Criterion(
                            "tsallis q must be finite, positive, and not 1 (use `shannon` for q=1)".into(),
                        ));
                    }
                    Ok(SplitCriterion::Tsallis { q })
                } else {
                    Err(DdtError::Criterion(format!("unknown criterion `{key}`")))
                }
            }
        }
    }

    pub fn key(&self) -> String {
        match self {
            SplitCriterion::Sse => "sse".into(),
            SplitCriterion::Mse => "mse".into(),
            SplitCriterion::Shannon => "shannon".into(),
            SplitCriterion::Gini => "gini".into(),
            SplitCriterion::GainRatio => "gain_ratio".into(),
            SplitCriterion::Tsallis { q } => format!("tsallis:{q}"),
        }
    }

    /// Node entropy used by this criterion (classification kinds only).
    pub fn node_entropy(&self, dist: &ClassDistribution) -> Result<f64> {
        match self {
            SplitCriterion::Shannon | SplitCriterion::GainRatio => shannon_entropy(dist),
            SplitCriterion::Gini => gini_index(dist),
            SplitCriterion::Tsallis { q } => tsallis_entropy(dist, *q),
            _ => Err(DdtError::Criterion(format!(
                "{} is a regression criterion, it has no entropy",
                self.key()
            ))),
        }
    }
}

/// Per-class counts of a categorical response sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl ClassDistribution {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    /// Count class-index labels into `n_classes` buckets.
    pub fn from_labels(labels: &[f64], n_classes: usize) -> Self {
        let mut counts = vec![0u64; n_classes];
        for y in labels {
            counts[*y as usize] += 1;
        }
        Self::new(counts)
    }

    fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        let total = self.total as f64;
        self.counts.iter().filter(|c| **c > 0).map(move |c| *c as f64 / total)
    }
}

fn check_non_empty(dist: &ClassDistribution) -> Result<()> {
    if dist.total == 0 {
        return Err(DdtError::Criterion("empty class distribution".into()));
    }
    Ok(())
}

// p^q with an exact power for integral q so tsallis(.,2) matches gini bit for bit
fn pow_q(p: f64, q: f64) -> f64 {
    if q.fract() == 0.0 && q.abs() <= 16.0 {
        p.powi(q as i32)
    } else {
        p.powf(q)
    }
}

/// Tsallis entropy (1/(1-q)) (sum p_i^q - 1); zero-count classes contribute 0.
pub fn tsallis_entropy(dist: &ClassDistribution, q: f64) -> Result<f64> {
    check_non_empty(dist)?;
    if q == 1.0 {
        return Err(DdtError::Criterion("q = 1 is the Shannon case, call shannon_entropy".into()));
    }
    let sum: f64 = dist.probabilities().map(|p| pow_q(p, q)).sum();
    Ok((sum - 1.0) * (1.0 / (1.0 - q)))
}

/// Shannon entropy -sum p_i ln p_i (natural log, 0 ln 0 = 0).
pub fn shannon_entropy(dist: &ClassDistribution) -> Result<f64> {
    check_non_empty(dist)?;
    Ok(-dist.probabilities().map(|p| p * p.ln()).sum::<f64>())
}

/// Gini index 1 - sum p_i^2; equals `tsallis_entropy(dist, 2)` exactly.
pub fn gini_index(dist: &ClassDistribution) -> Result<f64> {
    check_non_empty(dist)?;
    Ok(1.0 - dist.probabilities().map(|p| p * p).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionLoss {
    Sse,
    Mse,
}

fn sum_sq_dev(ys: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - mean) * (y - mean)).sum()
}

/// Post-split loss of a regression stump: SSE sums the two sides' squared
/// deviations, MSE averages each side before summing.
pub fn regression_split_loss(left_y: &[f64], right_y: &[f64], kind: RegressionLoss) -> Result<f64> {
    if left_y.is_empty() || right_y.is_empty() {
        return Err(DdtError::Criterion("regression split with an empty side".into()));
    }
    let (l, r) = (sum_sq_dev(left_y), sum_sq_dev(right_y));
    Ok(match kind {
        RegressionLoss::Sse => l + r,
        RegressionLoss::Mse => l / left_y.len() as f64 + r / right_y.len() as f64,
    })
}

/// Impurity reduction of a classification split.
///
/// For Shannon/Gini/Tsallis this is E - (E_l + E_r) with child entropies
/// weighted by n_t/n when `weighted_children` is set (the CART convention;
/// disabling it gives the literal unweighted sum). The gain ratio has its
/// weights built into its definition and ignores the flag; a split that sends
/// everything to one side makes its denominator zero and is uninformative.
pub fn impurity_gain(
    parent: &ClassDistribution,
    left: &ClassDistribution,
    right: &ClassDistribution,
    criterion: SplitCriterion,
    weighted_children: bool,
) -> Result<f64> {
    check_non_empty(parent)?;
    if left.total + right.total != parent.total {
        return Err(DdtError::Criterion(format!(
            "child totals {} + {} do not sum to parent total {}",
            left.total, right.total, parent.total
        )));
    }
    let n = parent.total as f64;
    let (wl, wr) = (left.total as f64 / n, right.total as f64 / n);
    match criterion {
        SplitCriterion::GainRatio => {
            if left.total == 0 || right.total == 0 {
                return Err(DdtError::Uninformative);
            }
            let info_gain = shannon_entropy(parent)?
                - wl * shannon_entropy(left)?
                - wr * shannon_entropy(right)?;
            let split_info = -(wl * wl.ln() + wr * wr.ln());
            Ok(info_gain / split_info)
        }
        SplitCriterion::Shannon | SplitCriterion::Gini | SplitCriterion::Tsallis { .. } => {
            let e = criterion.node_entropy(parent)?;
            let el = if left.total == 0 { 0.0 } else { criterion.node_entropy(left)? };
            let er = if right.total == 0 { 0.0 } else { criterion.node_entropy(right)? };
            if weighted_children {
                Ok(e - (wl * el + wr * er))
            } else {
                Ok(e - (el + er))
            }
        }
        _ => Err(DdtError::Criterion(format!(
            "{} is a regression criterion, use regression_split_loss",
            criterion.key()
        ))),
    }
}

/// Node impurity of a response sample: variance for regression, the
/// criterion's entropy for classification. Used by the explanation indices.
pub fn node_impurity(
    responses: &[f64],
    n_classes: usize,
    criterion: SplitCriterion,
) -> Result<f64> {
    if responses.is_empty() {
        return Err(DdtError::Criterion("impurity of an empty node".into()));
    }
    if criterion.is_regression() || n_classes == 0 {
        Ok(sum_sq_dev(responses) / responses.len() as f64)
    } else {
        let dist = ClassDistribution::from_labels(responses, n_classes);
        match criterion {
            SplitCriterion::GainRatio => shannon_entropy(&dist),
            c => c.node_entropy(&dist),
        }
    }
}
