//! Monte-Carlo two-level split stability, oscillation detection, confidence
//! intervals, and sample-size planning.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{impurity_gain, ClassDistribution, RegressionLoss, SplitCriterion};
use crate::dataset::{sample_region, Dataset, Provenance};
use crate::error::{DdtError, Result};
use crate::kde::GaussianKde;
use crate::schema::{CovariateSchema, Region, Restriction};
use crate::stump::{fit_stump_with, goes_left, partition_stats, SplitCandidate, SplitCut, StumpOptions};

/// Rng stream tags keep every random decision of a run independent of
/// scheduling: each consumer derives its stream from (seed, node id, tag,
/// index).
pub mod rng_streams {
    pub const STABILITY_REPEAT: u64 = 0;
    pub const SELECTION: u64 = 1;
    pub const ODT_SUBTREE: u64 = 2;
    pub const EVAL_SAMPLE: u64 = 3;
    pub const ESCALATED_REPEAT: u64 = 4;
}

/// Deterministic per-purpose rng: independent of worker count and schedule.
pub fn derive_rng(seed: u64, node_id: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ node_id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream((tag << 56) | (index & 0x00FF_FFFF_FFFF_FFFF));
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationConfig {
    /// Single-linkage gap threshold as a fraction of the region width.
    pub cluster_gap_frac: f64,
    /// Relative tolerance for cluster criterion medians to count as tied.
    pub criterion_rel_tol: f64,
    /// KS-distance bound of the trimmed interior against uniform.
    pub uniformity_ks: f64,
    /// Fraction trimmed per side before the KS screen.
    pub interior_trim_frac: f64,
    /// Fraction trimmed per side for the reported interval bounds.
    pub bounds_trim_frac: f64,
    /// A single cluster is "wide" when it spans at least this fraction of the
    /// region width and at least `wide_span_ci_factor` CI half-widths.
    pub wide_span_frac: f64,
    pub wide_span_ci_factor: f64,
    /// Clusters below this mass fraction are treated as strays.
    pub min_cluster_frac: f64,
    /// Verdicts need at least this many repeats.
    pub min_repeats: usize,
}

impl Default for OscillationConfig {
    fn default() -> Self {
        Self {
            cluster_gap_frac: 0.05,
            criterion_rel_tol: 0.05,
            uniformity_ks: 0.30,
            interior_trim_frac: 0.10,
            bounds_trim_frac: 0.02,
            wide_span_frac: 0.10,
            wide_span_ci_factor: 15.0,
            min_cluster_frac: 0.05,
            min_repeats: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Oscillation {
    None { note: Option<String> },
    FinitePoints { atoms: Vec<(f64, f64)> },
    Interval { lo: f64, hi: f64 },
}

/// Second-level stability of one covariate: the empirical distribution of its
/// chosen cut, conditional on that covariate winning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SecondLevel {
    Categorical {
        /// (level, n^j_k / n_k) pairs, exact empirical masses.
        masses: Vec<(u32, f64)>,
    },
    Continuous {
        values: Vec<f64>,
        histogram: Vec<(f64, f64, f64)>,
        bandwidth: f64,
        mode: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Empirical pmf over covariates: (index, n_k / n).
    pub first_level: Vec<(usize, f64)>,
    /// Per-covariate conditional cut distributions, keyed by covariate index.
    pub second_level: Vec<(usize, SecondLevel)>,
    pub chosen: SplitCandidate,
    /// [x - 3(b-a)/(2n), x + 3(b-a)/(2n)] clipped to the region; approximate
    /// outside the unary case.
    pub ci: Option<(f64, f64)>,
    pub oscillation: Oscillation,
    pub repeats: usize,
    pub pseudo_sample_size: usize,
    pub escalated: bool,
    pub first_level_tie_broken: bool,
    pub uninformative_repeats: usize,
}

#[derive(Debug, Clone)]
pub struct StabilityParams {
    /// N_i repeated stump fits.
    pub repeats: usize,
    /// n_i pseudo rows per fit; None picks the default from
    /// [`required_sample_size`] with d = 0.5% of the region width.
    pub sample_size: Option<usize>,
    pub min_leaf: usize,
    pub weighted_children: bool,
    /// Double n_i once and re-measure when the winner's second-level IQR
    /// exceeds twice the CI half-width.
    pub adaptive_sample_size: bool,
    pub oscillation: OscillationConfig,
    pub seed: u64,
    pub node_id: u64,
}

impl StabilityReport {
    pub fn second_level_of(&self, covariate: usize) -> Option<&SecondLevel> {
        self.second_level.iter().find(|(k, _)| *k == covariate).map(|(_, s)| s)
    }
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            repeats: 100,
            sample_size: None,
            min_leaf: 1,
            weighted_children: true,
            adaptive_sample_size: true,
            oscillation: OscillationConfig::default(),
            seed: 0,
            node_id: 1,
        }
    }
}

pub const MAX_PSEUDO_SAMPLE: usize = 60_000;

/// ceil(3 w / (2 d)): pseudo rows needed so the CI half-width is `d`.
pub fn required_sample_size(region_width: f64, half_width_d: f64) -> Result<usize> {
    if half_width_d <= 0.0 || half_width_d > region_width / 2.0 || !half_width_d.is_finite() {
        return Err(DdtError::Stability(format!(
            "half-width d must satisfy 0 < d <= w/2, got d={half_width_d} w={region_width}"
        )));
    }
    Ok((3.0 * region_width / (2.0 * half_width_d)).ceil() as usize)
}

/// The ~95% interval [x - 3w/(2n), x + 3w/(2n)], clipped to the region interval.
pub fn split_confidence_interval(
    split_value: f64,
    region_lo: f64,
    region_hi: f64,
    sample_size: usize,
) -> (f64, f64) {
    let hw = 3.0 * (region_hi - region_lo) / (2.0 * sample_size as f64);
    ((split_value - hw).max(region_lo), (split_value + hw).min(region_hi))
}

fn default_sample_size(width: f64) -> usize {
    required_sample_size(width, 0.005 * width)
        .expect("0.5% of width is a valid half-width")
        .min(MAX_PSEUDO_SAMPLE)
}

/// Representative region width for auto sample sizing: the widest continuous
/// interval, or 1.0 for all-categorical schemas (the formula is scale-free).
fn auto_sample_size(region: &Region) -> usize {
    let width = region
        .bounds
        .iter()
        .filter_map(|b| match b {
            Restriction::Interval { lo, hi, .. } => Some(hi - lo),
            Restriction::Levels(_) => None,
        })
        .fold(f64::NAN, f64::max);
    if width.is_nan() {
        default_sample_size(1.0)
    } else {
        default_sample_size(width)
    }
}

struct Draws {
    candidates: Vec<Option<SplitCandidate>>,
    uninformative: usize,
}

fn run_repeats(
    teacher: &dyn crate::teacher::Teacher,
    schema: &CovariateSchema,
    region: &Region,
    criterion: SplitCriterion,
    params: &StabilityParams,
    n_i: usize,
    stream_tag: u64,
) -> Result<Draws> {
    let opts = StumpOptions {
        min_leaf: params.min_leaf,
        feature_subset: None,
        weighted_children: params.weighted_children,
    };
    let results: Vec<Result<Option<SplitCandidate>>> = (0..params.repeats)
        .into_par_iter()
        .map(|rep| {
            let mut rng = derive_rng(params.seed, params.node_id, stream_tag, rep as u64);
            let rows = sample_region(schema, region, n_i, &mut rng);
            let ys = teacher.predict_batch(&rows)?;
            let data = Dataset::new(schema, rows, ys, Provenance::Pseudo)?;
            match fit_stump_with(&data, region, criterion, &opts, &mut rng) {
                Ok(c) => Ok(Some(c)),
                Err(DdtError::Uninformative) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut candidates = Vec::with_capacity(params.repeats);
    let mut uninformative = 0;
    for r in results {
        let c = r?;
        if c.is_none() {
            uninformative += 1;
        }
        candidates.push(c);
    }
    Ok(Draws { candidates, uninformative })
}

fn first_level_pmf(draws: &Draws, dim: usize) -> Vec<(usize, f64)> {
    let mut counts = vec![0usize; dim];
    let mut n = 0usize;
    for c in draws.candidates.iter().flatten() {
        counts[c.covariate_index] += 1;
        n += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(k, c)| (k, c as f64 / n as f64))
        .collect()
}

fn second_level(draws: &Draws, covariate: usize) -> Option<SecondLevel> {
    let mut thresholds = Vec::new();
    let mut levels: Vec<u32> = Vec::new();
    for c in draws.candidates.iter().flatten() {
        if c.covariate_index != covariate {
            continue;
        }
        match &c.cut {
            SplitCut::Continuous { threshold } => thresholds.push(*threshold),
            SplitCut::Categorical { level } => levels.push(*level),
        }
    }
    if !thresholds.is_empty() {
        let kde = GaussianKde::new(thresholds.clone());
        let mode = kde.mode();
        Some(SecondLevel::Continuous {
            histogram: histogram(&thresholds, 20),
            bandwidth: kde.bandwidth,
            values: thresholds,
            mode,
        })
    } else if !levels.is_empty() {
        let n_k = levels.len() as f64;
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for l in &levels {
            *counts.entry(*l).or_default() += 1;
        }
        Some(SecondLevel::Categorical {
            masses: counts.into_iter().map(|(l, c)| (l, c as f64 / n_k)).collect(),
        })
    } else {
        None
    }
}

fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, f64)> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return vec![(lo, hi, 1.0)];
    }
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = (((v - lo) / w) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| (lo + b as f64 * w, lo + (b + 1) as f64 * w, c as f64 / values.len() as f64))
        .collect()
}

/// Pick the winning covariate (first-level mode) and cut (second-level mode)
/// and refit the candidate's node statistics on one fresh pseudo sample.
/// Returns the candidate and whether a first-level tie had to be broken.
#[allow(clippy::too_many_arguments)]
pub fn select_best_split(
    teacher: &dyn crate::teacher::Teacher,
    schema: &CovariateSchema,
    region: &Region,
    criterion: SplitCriterion,
    first_level: &[(usize, f64)],
    second_level: &[(usize, SecondLevel)],
    n_i: usize,
    params: &StabilityParams,
) -> Result<(SplitCandidate, bool)> {
    if first_level.is_empty() {
        return Err(DdtError::Stability("no informative repeats to select from".into()));
    }
    let best_mass = first_level.iter().map(|(_, m)| *m).fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> =
        first_level.iter().filter(|(_, m)| *m == best_mass).map(|(k, _)| *k).collect();
    let mut rng = derive_rng(params.seed, params.node_id, rng_streams::SELECTION, 0);
    let tie_broken = tied.len() > 1;
    let winner = tied[if tie_broken { rng.random_range(0..tied.len()) } else { 0 }];

    let winner_level = second_level.iter().find(|(k, _)| *k == winner).map(|(_, s)| s);
    let cut = match winner_level {
        Some(SecondLevel::Continuous { mode, .. }) => SplitCut::Continuous { threshold: *mode },
        Some(SecondLevel::Categorical { masses }) => {
            let best = masses.iter().map(|(_, m)| *m).fold(f64::NEG_INFINITY, f64::max);
            let tied_levels: Vec<u32> =
                masses.iter().filter(|(_, m)| *m == best).map(|(l, _)| *l).collect();
            let level = tied_levels[if tied_levels.len() > 1 {
                rng.random_range(0..tied_levels.len())
            } else {
                0
            }];
            SplitCut::Categorical { level }
        }
        None => return Err(DdtError::Stability("winner covariate has no second level".into())),
    };

    // refit node statistics on a fresh sample at the chosen split
    let rows = sample_region(schema, region, n_i, &mut rng);
    let ys = teacher.predict_batch(&rows)?;
    let data = Dataset::new(schema, rows, ys, Provenance::Pseudo)?;
    let n_classes = schema.response.class_count();
    let (left_stat, right_stat) = partition_stats(&data, winner, &cut, n_classes);
    if left_stat.count() == 0 || right_stat.count() == 0 {
        return Err(DdtError::Stability(
            "refit sample left a split side empty; region may be degenerate at the chosen cut".into(),
        ));
    }
    let criterion_value = refit_criterion_value(&data, winner, &cut, criterion, params.weighted_children)?;
    Ok((
        SplitCandidate { covariate_index: winner, cut, criterion_value, left_stat, right_stat },
        tie_broken,
    ))
}

fn refit_criterion_value(
    data: &Dataset,
    covariate: usize,
    cut: &SplitCut,
    criterion: SplitCriterion,
    weighted: bool,
) -> Result<f64> {
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (row, y) in data.rows.iter().zip(&data.responses) {
        if goes_left(row, covariate, cut) {
            left.push(*y);
        } else {
            right.push(*y);
        }
    }
    match criterion {
        SplitCriterion::Sse => {
            crate::criteria::regression_split_loss(&left, &right, RegressionLoss::Sse)
        }
        SplitCriterion::Mse => {
            crate::criteria::regression_split_loss(&left, &right, RegressionLoss::Mse)
        }
        _ => {
            let n_classes = 1 + data.responses.iter().cloned().fold(0.0f64, f64::max) as usize;
            let parent = ClassDistribution::from_labels(&data.responses, n_classes);
            let l = ClassDistribution::from_labels(&left, n_classes);
            let r = ClassDistribution::from_labels(&right, n_classes);
            impurity_gain(&parent, &l, &r, criterion, weighted)
        }
    }
}

/// Measure two-level split stability of `region` under `teacher`: N_i
/// independent pseudo samples of n_i rows, one stump fit each, aggregated
/// into first/second-level distributions, a chosen split, its confidence
/// interval, and an oscillation verdict.
pub fn measure_split_stability(
    teacher: &dyn crate::teacher::Teacher,
    schema: &CovariateSchema,
    region: &Region,
    criterion: SplitCriterion,
    params: &StabilityParams,
) -> Result<StabilityReport> {
    if params.repeats < 1 {
        return Err(DdtError::Stability("repeats must be at least 1".into()));
    }
    let base_n = params.sample_size.unwrap_or_else(|| auto_sample_size(region));
    if base_n < 2 {
        return Err(DdtError::Stability("sample size must be at least 2".into()));
    }

    let mut n_i = base_n;
    let mut escalated = false;
    let mut stream = rng_streams::STABILITY_REPEAT;
    loop {
        let draws = run_repeats(teacher, schema, region, criterion, params, n_i, stream)?;
        if draws.uninformative == params.repeats {
            return Err(DdtError::Uninformative);
        }
        let first_level = first_level_pmf(&draws, region.bounds.len());
        let mut second: Vec<(usize, SecondLevel)> = Vec::new();
        for (k, _) in &first_level {
            if let Some(s) = second_level(&draws, *k) {
                second.push((*k, s));
            }
        }
        let (chosen, tie_broken) = select_best_split(
            teacher,
            schema,
            region,
            criterion,
            &first_level,
            &second,
            n_i,
            params,
        )?;

        let winner = chosen.covariate_index;
        let (ci, half_width) = match (&chosen.cut, &region.bounds[winner]) {
            (SplitCut::Continuous { threshold }, Restriction::Interval { lo, hi, .. }) => {
                let ci = split_confidence_interval(*threshold, *lo, *hi, n_i);
                (Some(ci), 3.0 * (hi - lo) / (2.0 * n_i as f64))
            }
            _ => (None, 0.0),
        };

        // ad-hoc escalation: a wide second level relative to the CI means the
        // sample size underresolves the split; double n_i once and re-measure
        let winner_second = second.iter().find(|(k, _)| *k == winner).map(|(_, s)| s);
        if params.adaptive_sample_size && !escalated && n_i < MAX_PSEUDO_SAMPLE {
            if let Some(SecondLevel::Continuous { values, .. }) = winner_second {
                if values.len() >= 4 && iqr(values) > 2.0 * half_width {
                    escalated = true;
                    n_i = (n_i * 2).min(MAX_PSEUDO_SAMPLE);
                    stream = rng_streams::ESCALATED_REPEAT;
                    continue;
                }
            }
        }

        let oscillation = if params.repeats == 1 {
            Oscillation::None { note: Some("insufficient repeats".into()) }
        } else {
            match (winner_second, &region.bounds[winner]) {
                (Some(SecondLevel::Continuous { values, .. }), Restriction::Interval { lo, hi, .. }) => {
                    let crits: Vec<f64> = draws
                        .candidates
                        .iter()
                        .flatten()
                        .filter(|c| c.covariate_index == winner)
                        .map(|c| c.criterion_value)
                        .collect();
                    detect_oscillation(
                        values,
                        &crits,
                        criterion.lower_is_better(),
                        hi - lo,
                        half_width,
                        &params.oscillation,
                    )
                }
                _ => Oscillation::None { note: Some("categorical winner: see the second-level pmf".into()) },
            }
        };

        return Ok(StabilityReport {
            first_level,
            second_level: second,
            chosen,
            ci,
            oscillation,
            repeats: params.repeats,
            pseudo_sample_size: n_i,
            escalated,
            first_level_tie_broken: tie_broken,
            uninformative_repeats: draws.uninformative,
        });
    }
}

fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

fn ks_distance_uniform(sorted: &[f64], lo: f64, hi: f64) -> f64 {
    if sorted.is_empty() || hi <= lo {
        return 1.0;
    }
    let n = sorted.len() as f64;
    let mut ks = 0.0f64;
    for (i, v) in sorted.iter().enumerate() {
        let u = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        ks = ks.max(((i + 1) as f64 / n - u).abs()).max((i as f64 / n - u).abs());
    }
    ks
}

/// Classify the split-value sample of the winning covariate.
///
/// Values are clustered by 1-D single linkage; multiple criterion-tied
/// clusters are finite-point oscillation, one wide cluster spread across an
/// interval is interval oscillation, anything else is no verdict.
pub fn detect_oscillation(
    values: &[f64],
    criterion_values: &[f64],
    lower_is_better: bool,
    region_width: f64,
    ci_half_width: f64,
    config: &OscillationConfig,
) -> Oscillation {
    if values.len() < config.min_repeats {
        return Oscillation::None { note: Some("insufficient repeats".into()) };
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let gap = config.cluster_gap_frac * region_width;

    // single-linkage clusters over the sorted values
    let mut clusters: Vec<Vec<usize>> = vec![vec![order[0]]];
    for w in order.windows(2) {
        if values[w[1]] - values[w[0]] > gap {
            clusters.push(Vec::new());
        }
        clusters.last_mut().unwrap().push(w[1]);
    }
    let n = values.len() as f64;
    let big: Vec<&Vec<usize>> = clusters
        .iter()
        .filter(|c| c.len() as f64 / n >= config.min_cluster_frac)
        .collect();

    if big.len() >= 2 {
        let medians: Vec<f64> = big
            .iter()
            .map(|c| {
                let mut crits: Vec<f64> = c.iter().map(|&i| criterion_values[i]).collect();
                crits.sort_by(f64::total_cmp);
                quantile_sorted(&crits, 0.5)
            })
            .collect();
        let best = if lower_is_better {
            medians.iter().cloned().fold(f64::INFINITY, f64::min)
        } else {
            medians.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        };
        let scale = best.abs().max(1e-12);
        let tied = medians.iter().all(|m| (m - best).abs() / scale <= config.criterion_rel_tol);
        if tied {
            let total: usize = big.iter().map(|c| c.len()).sum();
            let atoms = big
                .iter()
                .map(|c| {
                    let mut vs: Vec<f64> = c.iter().map(|&i| values[i]).collect();
                    vs.sort_by(f64::total_cmp);
                    (quantile_sorted(&vs, 0.5), c.len() as f64 / total as f64)
                })
                .collect();
            return Oscillation::FinitePoints { atoms };
        }
        return Oscillation::None { note: Some("multiple clusters with unequal criterion values".into()) };
    }

    if big.len() == 1 {
        let mut vs: Vec<f64> = big[0].iter().map(|&i| values[i]).collect();
        vs.sort_by(f64::total_cmp);
        let span = vs[vs.len() - 1] - vs[0];
        let wide =
            span >= config.wide_span_frac * region_width && span >= config.wide_span_ci_factor * ci_half_width;
        if wide {
            let t = ((config.interior_trim_frac * vs.len() as f64) as usize).max(1);
            if vs.len() > 2 * t + config.min_repeats / 2 {
                let interior = &vs[t..vs.len() - t];
                let ks = ks_distance_uniform(interior, interior[0], interior[interior.len() - 1]);
                if ks < config.uniformity_ks {
                    let bt = ((config.bounds_trim_frac * vs.len() as f64) as usize).max(1);
                    return Oscillation::Interval { lo: vs[bt], hi: vs[vs.len() - 1 - bt] };
                }
            }
        }
    }
    Oscillation::None { note: None }
}
