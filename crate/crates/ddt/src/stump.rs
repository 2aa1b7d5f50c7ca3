//! Greedy single-split search over a pseudo dataset: the primitive the
//! induction algorithm repeats at every node.
//!
//! The scan keeps single-pass prefix statistics (sums and squares for
//! regression, class counts for classification) so one fit is
//! O(p n log n); the naive recomputation kept in the test suite is the
//! oracle this implementation is checked against.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::criteria::{
    impurity_gain, ClassDistribution, SplitCriterion,
};
use crate::dataset::Dataset;
use crate::error::{DdtError, Result};
use crate::schema::{Region, Restriction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCut {
    Continuous { threshold: f64 },
    Categorical { level: u32 },
}

/// Fitted statistics of one side of a stump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStat {
    Mean { mean: f64, count: usize },
    Classes(ClassDistribution),
}

impl NodeStat {
    /// Predicted value: the mean, or the majority class index (ties to the
    /// smallest index).
    pub fn value(&self) -> f64 {
        match self {
            NodeStat::Mean { mean, .. } => *mean,
            NodeStat::Classes(dist) => {
                let mut best = 0usize;
                for (i, c) in dist.counts.iter().enumerate() {
                    if *c > dist.counts[best] {
                        best = i;
                    }
                }
                best as f64
            }
        }
    }

    pub fn count(&self) -> usize {
        match self {
            NodeStat::Mean { count, .. } => *count,
            NodeStat::Classes(dist) => dist.total as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub covariate_index: usize,
    pub cut: SplitCut,
    /// Loss for SSE/MSE, gain for the entropy criteria.
    pub criterion_value: f64,
    pub left_stat: NodeStat,
    pub right_stat: NodeStat,
}

#[derive(Debug, Clone)]
pub struct StumpOptions {
    pub min_leaf: usize,
    /// Covariates the search may use; `None` searches all of them.
    pub feature_subset: Option<Vec<usize>>,
    /// Weight child entropies by n_t/n (see the criteria module).
    pub weighted_children: bool,
}

impl Default for StumpOptions {
    fn default() -> Self {
        Self { min_leaf: 1, feature_subset: None, weighted_children: true }
    }
}

/// Every (covariate, cut) pair the greedy search scans: midpoints between
/// consecutive distinct values for continuous covariates, one-vs-rest on each
/// level of the region subset for categorical ones. Deterministic and sorted,
/// so oracle tests can brute-force the identical candidate set.
pub fn enumerate_candidates(data: &Dataset, region: &Region) -> Result<Vec<(usize, SplitCut)>> {
    if data.is_empty() {
        return Err(DdtError::Split("empty dataset".into()));
    }
    let mut out = Vec::new();
    for (cov, bound) in region.bounds.iter().enumerate() {
        match bound {
            Restriction::Interval { .. } => {
                let mut values: Vec<f64> = data.rows.iter().map(|r| r[cov]).collect();
                values.sort_by(f64::total_cmp);
                values.dedup();
                for w in values.windows(2) {
                    out.push((cov, SplitCut::Continuous { threshold: 0.5 * (w[0] + w[1]) }));
                }
            }
            Restriction::Levels(set) => {
                for level in set {
                    out.push((cov, SplitCut::Categorical { level: *level }));
                }
            }
        }
    }
    Ok(out)
}

struct Scan<'a> {
    ys: &'a [f64],
    criterion: SplitCriterion,
    weighted: bool,
    parent: Option<ClassDistribution>,
}

impl<'a> Scan<'a> {
    fn new(data: &'a Dataset, criterion: SplitCriterion, n_classes: usize, weighted: bool) -> Self {
        let parent = (!criterion.is_regression())
            .then(|| ClassDistribution::from_labels(&data.responses, n_classes));
        Self { ys: &data.responses, criterion, weighted, parent }
    }

    /// Criterion value of a partition given aggregate side statistics.
    /// Regression sides carry (count, sum, sum of squares); classification
    /// sides carry class counts. Returns None for inadmissible splits.
    fn regression_value(&self, nl: f64, sl: f64, ql: f64, nr: f64, sr: f64, qr: f64) -> f64 {
        let ssl = (ql - sl * sl / nl).max(0.0);
        let ssr = (qr - sr * sr / nr).max(0.0);
        match self.criterion {
            SplitCriterion::Sse => ssl + ssr,
            SplitCriterion::Mse => ssl / nl + ssr / nr,
            _ => unreachable!("classification handled separately"),
        }
    }

    fn classification_value(&self, left: &ClassDistribution, right: &ClassDistribution) -> Option<f64> {
        let parent = self.parent.as_ref().expect("classification scan has a parent");
        match impurity_gain(parent, left, right, self.criterion, self.weighted) {
            Ok(g) => Some(g),
            Err(DdtError::Uninformative) => None,
            Err(_) => None,
        }
    }
}

/// Fit the loss-minimizing (or gain-maximizing) stump on `data` within
/// `region`. Exact criterion ties are broken uniformly at random via `rng`.
pub fn fit_stump(
    data: &Dataset,
    region: &Region,
    criterion: SplitCriterion,
    rng: &mut impl Rng,
) -> Result<SplitCandidate> {
    fit_stump_with(data, region, criterion, &StumpOptions::default(), rng)
}

pub fn fit_stump_with(
    data: &Dataset,
    region: &Region,
    criterion: SplitCriterion,
    opts: &StumpOptions,
    rng: &mut impl Rng,
) -> Result<SplitCandidate> {
    if data.is_empty() {
        return Err(DdtError::Split("empty dataset".into()));
    }
    if region.bounds.len() != data.rows[0].len() {
        return Err(DdtError::Split("region and data dimensions differ".into()));
    }
    let n_classes = if criterion.is_regression() {
        0
    } else {
        let max = data.responses.iter().cloned().fold(0.0f64, f64::max);
        max as usize + 1
    };
    let first = data.responses[0];
    if data.responses.iter().all(|y| *y == first) {
        return Err(DdtError::Uninformative);
    }

    let scan = Scan::new(data, criterion, n_classes, opts.weighted_children);
    let lower_better = criterion.lower_is_better();
    let mut best_value = if lower_better { f64::INFINITY } else { f64::NEG_INFINITY };
    let mut ties: Vec<(usize, SplitCut)> = Vec::new();

    let consider = |value: f64, cov: usize, cut: SplitCut, ties: &mut Vec<(usize, SplitCut)>, best: &mut f64| {
        let improves = if lower_better { value < *best } else { value > *best };
        if improves {
            *best = value;
            ties.clear();
            ties.push((cov, cut));
        } else if value == *best {
            ties.push((cov, cut));
        }
    };

    let covariates: Vec<usize> = match &opts.feature_subset {
        Some(fs) => fs.clone(),
        None => (0..region.bounds.len()).collect(),
    };

    for &cov in &covariates {
        match &region.bounds[cov] {
            Restriction::Interval { .. } => {
                // canonical (x, y) order makes float accumulation independent
                // of the input row order
                let mut idx: Vec<usize> = (0..data.len()).collect();
                idx.sort_by(|&a, &b| {
                    data.rows[a][cov]
                        .total_cmp(&data.rows[b][cov])
                        .then(data.responses[a].total_cmp(&data.responses[b]))
                });
                if criterion.is_regression() {
                    let total_n = data.len() as f64;
                    let total_s: f64 = idx.iter().map(|&i| scan.ys[i]).sum();
                    let total_q: f64 = idx.iter().map(|&i| scan.ys[i] * scan.ys[i]).sum();
                    let mut nl = 0.0f64;
                    let mut sl = 0.0f64;
                    let mut ql = 0.0f64;
                    for (pos, &i) in idx.iter().enumerate() {
                        nl += 1.0;
                        sl += scan.ys[i];
                        ql += scan.ys[i] * scan.ys[i];
                        if pos + 1 == idx.len() {
                            break;
                        }
                        let x = data.rows[i][cov];
                        let x_next = data.rows[idx[pos + 1]][cov];
                        if x == x_next {
                            continue;
                        }
                        let k = pos + 1;
                        if k < opts.min_leaf || idx.len() - k < opts.min_leaf {
                            continue;
                        }
                        let value = scan.regression_value(
                            nl,
                            sl,
                            ql,
                            total_n - nl,
                            total_s - sl,
                            total_q - ql,
                        );
                        let cut = SplitCut::Continuous { threshold: 0.5 * (x + x_next) };
                        consider(value, cov, cut, &mut ties, &mut best_value);
                    }
                } else {
                    let mut left = ClassDistribution::new(vec![0; n_classes]);
                    let parent = scan.parent.clone().expect("classification parent");
                    for (pos, &i) in idx.iter().enumerate() {
                        let class = scan.ys[i] as usize;
                        left.counts[class] += 1;
                        left.total += 1;
                        if pos + 1 == idx.len() {
                            break;
                        }
                        let x = data.rows[i][cov];
                        let x_next = data.rows[idx[pos + 1]][cov];
                        if x == x_next {
                            continue;
                        }
                        let k = pos + 1;
                        if k < opts.min_leaf || idx.len() - k < opts.min_leaf {
                            continue;
                        }
                        let right = ClassDistribution::new(
                            parent
                                .counts
                                .iter()
                                .zip(&left.counts)
                                .map(|(p, l)| p - l)
                                .collect(),
                        );
                        if let Some(value) = scan.classification_value(&left, &right) {
                            let cut = SplitCut::Continuous { threshold: 0.5 * (x + x_next) };
                            consider(value, cov, cut, &mut ties, &mut best_value);
                        }
                    }
                }
            }
            Restriction::Levels(set) => {
                // canonical y order within each level, then level-wise aggregates
                let mut idx: Vec<usize> = (0..data.len()).collect();
                idx.sort_by(|&a, &b| {
                    data.rows[a][cov]
                        .total_cmp(&data.rows[b][cov])
                        .then(data.responses[a].total_cmp(&data.responses[b]))
                });
                let max_level = set.iter().max().copied().unwrap_or(0) as usize;
                if criterion.is_regression() {
                    let mut n = vec![0.0f64; max_level + 1];
                    let mut s = vec![0.0f64; max_level + 1];
                    let mut q = vec![0.0f64; max_level + 1];
                    for &i in &idx {
                        let l = data.rows[i][cov] as usize;
                        n[l] += 1.0;
                        s[l] += scan.ys[i];
                        q[l] += scan.ys[i] * scan.ys[i];
                    }
                    let (tn, ts, tq) = (
                        n.iter().sum::<f64>(),
                        s.iter().sum::<f64>(),
                        q.iter().sum::<f64>(),
                    );
                    for level in set {
                        let l = *level as usize;
                        if (n[l] as usize) < opts.min_leaf
                            || ((tn - n[l]) as usize) < opts.min_leaf
                            || n[l] == 0.0
                            || tn - n[l] == 0.0
                        {
                            continue;
                        }
                        let value =
                            scan.regression_value(n[l], s[l], q[l], tn - n[l], ts - s[l], tq - q[l]);
                        consider(
                            value,
                            cov,
                            SplitCut::Categorical { level: *level },
                            &mut ties,
                            &mut best_value,
                        );
                    }
                } else {
                    let mut per_level: Vec<ClassDistribution> =
                        vec![ClassDistribution::new(vec![0; n_classes]); max_level + 1];
                    for &i in &idx {
                        let l = data.rows[i][cov] as usize;
                        let class = scan.ys[i] as usize;
                        per_level[l].counts[class] += 1;
                        per_level[l].total += 1;
                    }
                    let parent = scan.parent.clone().expect("classification parent");
                    for level in set {
                        let l = *level as usize;
                        if (per_level[l].total as usize) < opts.min_leaf
                            || ((parent.total - per_level[l].total) as usize) < opts.min_leaf
                            || per_level[l].total == 0
                            || parent.total == per_level[l].total
                        {
                            continue;
                        }
                        let right = ClassDistribution::new(
                            parent
                                .counts
                                .iter()
                                .zip(&per_level[l].counts)
                                .map(|(p, c)| p - c)
                                .collect(),
                        );
                        if let Some(value) = scan.classification_value(&per_level[l], &right) {
                            consider(
                                value,
                                cov,
                                SplitCut::Categorical { level: *level },
                                &mut ties,
                                &mut best_value,
                            );
                        }
                    }
                }
            }
        }
    }

    if ties.is_empty() {
        return Err(DdtError::Uninformative);
    }
    // a best split that reduces nothing carries no information
    if criterion.is_regression() {
        let total_ss: f64 = {
            let mean = data.responses.iter().sum::<f64>() / data.len() as f64;
            data.responses.iter().map(|y| (y - mean) * (y - mean)).sum()
        };
        if matches!(criterion, SplitCriterion::Sse)
            && best_value >= total_ss - 1e-12 * total_ss.max(1.0)
        {
            return Err(DdtError::Uninformative);
        }
    } else if best_value <= 1e-12 {
        return Err(DdtError::Uninformative);
    }

    let pick = if ties.len() == 1 { 0 } else { rng.random_range(0..ties.len()) };
    let (covariate_index, cut) = ties[pick].clone();
    let (left_stat, right_stat) = partition_stats(data, covariate_index, &cut, n_classes);
    Ok(SplitCandidate { covariate_index, cut, criterion_value: best_value, left_stat, right_stat })
}

/// Apply a split to its region: (left, right) child regions.
pub fn split_region(region: &Region, split: &SplitCandidate) -> Result<(Region, Region)> {
    match &split.cut {
        SplitCut::Continuous { threshold } => {
            region.split_interval(split.covariate_index, *threshold)
        }
        SplitCut::Categorical { level } => region.split_levels(split.covariate_index, *level),
    }
}

/// True iff `row` routes to the left child of `cut`.
pub fn goes_left(row: &[f64], covariate_index: usize, cut: &SplitCut) -> bool {
    match cut {
        SplitCut::Continuous { threshold } => row[covariate_index] < *threshold,
        SplitCut::Categorical { level } => row[covariate_index] as u32 == *level,
    }
}

/// Direct statistics of the two sides a cut induces (the refit-consistency
/// surface: independent of the scan's incremental accumulators).
pub fn partition_stats(
    data: &Dataset,
    covariate_index: usize,
    cut: &SplitCut,
    n_classes: usize,
) -> (NodeStat, NodeStat) {
    let (mut left_y, mut right_y) = (Vec::new(), Vec::new());
    for (row, y) in data.rows.iter().zip(&data.responses) {
        if goes_left(row, covariate_index, cut) {
            left_y.push(*y);
        } else {
            right_y.push(*y);
        }
    }
    let stat = |ys: &[f64]| {
        if n_classes == 0 {
            let mean =
                if ys.is_empty() { f64::NAN } else { ys.iter().sum::<f64>() / ys.len() as f64 };
            NodeStat::Mean { mean, count: ys.len() }
        } else {
            NodeStat::Classes(ClassDistribution::from_labels(ys, n_classes))
        }
    };
    (stat(&left_y), stat(&right_y))
}
