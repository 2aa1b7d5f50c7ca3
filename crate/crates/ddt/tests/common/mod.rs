#![allow(dead_code)] // each test binary uses a different subset

//! Shared test helpers: the naive brute-force split oracle and random
//! dataset generation. The oracle recomputes every candidate's criterion
//! from scratch (two-pass means, fresh class counts), independent of the
//! incremental scan it checks.

use ddt::criteria::SplitCriterion;
use ddt::dataset::{Dataset, Provenance};
use ddt::schema::{Covariate, CovariateKind, CovariateSchema, Region, ResponseKind};
use ddt::stump::SplitCut;
use rand::Rng;

pub fn naive_goes_left(row: &[f64], covariate: usize, cut: &SplitCut) -> bool {
    match cut {
        SplitCut::Continuous { threshold } => row[covariate] < *threshold,
        SplitCut::Categorical { level } => row[covariate] as u32 == *level,
    }
}

fn naive_sse(ys: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - mean) * (y - mean)).sum()
}

fn naive_shannon(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    -counts
        .iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / total as f64;
            p * p.ln()
        })
        .sum::<f64>()
}

fn naive_tsallis(counts: &[usize], q: f64) -> f64 {
    let total: usize = counts.iter().sum();
    let s: f64 = counts
        .iter()
        .filter(|c| **c > 0)
        .map(|c| (*c as f64 / total as f64).powf(q))
        .sum();
    (s - 1.0) / (1.0 - q)
}

fn naive_gini(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    1.0 - counts
        .iter()
        .map(|c| {
            let p = *c as f64 / total as f64;
            p * p
        })
        .sum::<f64>()
}

fn class_counts(ys: &[f64], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_classes];
    for y in ys {
        counts[*y as usize] += 1;
    }
    counts
}

/// Criterion value of one candidate split, recomputed naively. None when a
/// side is empty or below `min_leaf`, or the gain ratio is degenerate.
pub fn naive_candidate_value(
    data: &Dataset,
    covariate: usize,
    cut: &SplitCut,
    criterion: SplitCriterion,
    min_leaf: usize,
    weighted_children: bool,
) -> Option<f64> {
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (row, y) in data.rows.iter().zip(&data.responses) {
        if naive_goes_left(row, covariate, cut) {
            left.push(*y);
        } else {
            right.push(*y);
        }
    }
    if left.len() < min_leaf.max(1) || right.len() < min_leaf.max(1) {
        return None;
    }
    match criterion {
        SplitCriterion::Sse => Some(naive_sse(&left) + naive_sse(&right)),
        SplitCriterion::Mse => {
            Some(naive_sse(&left) / left.len() as f64 + naive_sse(&right) / right.len() as f64)
        }
        _ => {
            let n_classes =
                1 + data.responses.iter().cloned().fold(0.0f64, f64::max) as usize;
            let (pc, lc, rc) = (
                class_counts(&data.responses, n_classes),
                class_counts(&left, n_classes),
                class_counts(&right, n_classes),
            );
            let n = data.len() as f64;
            let (wl, wr) = (left.len() as f64 / n, right.len() as f64 / n);
            match criterion {
                SplitCriterion::Shannon => {
                    let (e, el, er) = (naive_shannon(&pc), naive_shannon(&lc), naive_shannon(&rc));
                    Some(if weighted_children { e - wl * el - wr * er } else { e - el - er })
                }
                SplitCriterion::Gini => {
                    let (e, el, er) = (naive_gini(&pc), naive_gini(&lc), naive_gini(&rc));
                    Some(if weighted_children { e - wl * el - wr * er } else { e - el - er })
                }
                SplitCriterion::Tsallis { q } => {
                    let (e, el, er) =
                        (naive_tsallis(&pc, q), naive_tsallis(&lc, q), naive_tsallis(&rc, q));
                    Some(if weighted_children { e - wl * el - wr * er } else { e - el - er })
                }
                SplitCriterion::GainRatio => {
                    let info =
                        naive_shannon(&pc) - wl * naive_shannon(&lc) - wr * naive_shannon(&rc);
                    let split_info = -(wl * wl.ln() + wr * wr.ln());
                    if split_info <= 0.0 {
                        None
                    } else {
                        Some(info / split_info)
                    }
                }
                _ => unreachable!(),
            }
        }
    }
}

/// Best criterion value over the full candidate set, by exhaustive naive
/// evaluation.
pub fn naive_best_value(
    data: &Dataset,
    region: &Region,
    criterion: SplitCriterion,
    min_leaf: usize,
    weighted_children: bool,
) -> Option<f64> {
    let candidates = ddt::stump::enumerate_candidates(data, region).ok()?;
    let mut best: Option<f64> = None;
    for (cov, cut) in &candidates {
        if let Some(v) =
            naive_candidate_value(data, *cov, cut, criterion, min_leaf, weighted_children)
        {
            best = Some(match best {
                None => v,
                Some(b) => {
                    if criterion.lower_is_better() {
                        b.min(v)
                    } else {
                        b.max(v)
                    }
                }
            });
        }
    }
    best
}

/// Random mixed-kind dataset for oracle comparisons: up to 4 covariates of
/// either kind, either response kind, at most `max_rows` rows.
pub fn random_dataset(
    rng: &mut impl Rng,
    max_rows: usize,
) -> (CovariateSchema, Dataset, SplitCriterion) {
    let p = rng.random_range(1..=4);
    let covariates: Vec<Covariate> = (0..p)
        .map(|i| {
            if rng.random_bool(0.6) {
                Covariate {
                    name: format!("x{i}"),
                    kind: CovariateKind::Continuous { lo: -5.0, hi: 5.0 },
                }
            } else {
                let n_levels = rng.random_range(2..=4);
                Covariate {
                    name: format!("c{i}"),
                    kind: CovariateKind::Categorical {
                        levels: (0..n_levels).map(|l| format!("L{l}")).collect(),
                    },
                }
            }
        })
        .collect();
    let classification = rng.random_bool(0.5);
    let n_classes = rng.random_range(2..=4);
    let response = if classification {
        ResponseKind::Categorical {
            classes: (0..n_classes).map(|c| format!("k{c}")).collect(),
        }
    } else {
        ResponseKind::Continuous
    };
    let schema = CovariateSchema::new(covariates, response).unwrap();
    let n = rng.random_range(2..=max_rows);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            schema
                .covariates
                .iter()
                .map(|c| match &c.kind {
                    CovariateKind::Continuous { lo, hi } => rng.random_range(*lo..*hi),
                    CovariateKind::Categorical { levels } => {
                        rng.random_range(0..levels.len()) as f64
                    }
                })
                .collect()
        })
        .collect();
    let responses: Vec<f64> = (0..n)
        .map(|_| {
            if classification {
                rng.random_range(0..n_classes) as f64
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
        .collect();
    let criterion = if classification {
        match rng.random_range(0..4) {
            0 => SplitCriterion::Shannon,
            1 => SplitCriterion::Gini,
            2 => SplitCriterion::GainRatio,
            _ => SplitCriterion::Tsallis { q: 1.7 },
        }
    } else if rng.random_bool(0.5) {
        SplitCriterion::Sse
    } else {
        SplitCriterion::Mse
    };
    let data = Dataset::new(&schema, rows, responses, Provenance::Pseudo).unwrap();
    (schema, data, criterion)
}
