//! Experiment harness: split-convergence rates, confidence-interval coverage,
//! and the ordinary-vs-distilled interpretation comparison, with the
//! piecewise reference teachers they run on.

use rayon::prelude::*;
use serde::Serialize;

use crate::criteria::SplitCriterion;
use crate::dataset::{sample_region, sim2d_grid, Dataset, Provenance};
use crate::error::{DdtError, Result};
use crate::induction::{induce_ddt, induce_odt, InductionConfig, OdtConfig, StoppingConfig};
use crate::schema::{Covariate, CovariateKind, CovariateSchema, ResponseKind};
use crate::stability::{derive_rng, split_confidence_interval};
use crate::stump::{fit_stump, SplitCut};
use crate::teacher::forest::{fit_forest_teacher, ForestConfig};
use crate::teacher::{FnTeacher, Teacher};

const CONVERGENCE_STREAM: u64 = 10;
const COVERAGE_STREAM: u64 = 11;
const INTERPRETATION_STREAM: u64 = 12;

/// Schema of the unary reference teachers: one continuous covariate on [0, 2].
pub fn unary_schema() -> CovariateSchema {
    CovariateSchema::new(
        vec![Covariate { name: "x".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 2.0 } }],
        ResponseKind::Continuous,
    )
    .expect("static schema")
}

/// The coverage-experiment staircase on [0, 2]: 0 below 1.0, then 10, then
/// -0.8 from 1.5 on. Its unique optimal SSE split is 1.0, but the second step
/// competes at small sample sizes, which is what makes coverage pre-asymptotic
/// there.
pub fn coverage_staircase_teacher() -> impl Teacher {
    FnTeacher::new("coverage staircase", ResponseKind::Continuous, |row: &[f64]| {
        let x = row[0];
        if x < 1.0 {
            0.0
        } else if x < 1.5 {
            10.0
        } else {
            -0.8
        }
    })
}

/// Symmetric two-cut teacher on [0, 2]: 10 outside [0.5, 1.5), 0 inside. The
/// SSE-optimal splits at 0.5 and 1.5 tie exactly, so the greedy split
/// oscillates between them.
pub fn two_cut_teacher() -> impl Teacher {
    FnTeacher::new("symmetric two-cut", ResponseKind::Continuous, |row: &[f64]| {
        if row[0] >= 0.5 && row[0] < 1.5 {
            0.0
        } else {
            10.0
        }
    })
}

/// Teacher constant `mid` on [c, d) with flanking levels 0 and 10. Under SSE
/// its optimal splits are the two plateau edges, which oscillate as finite
/// points when `mid` is the midpoint of the flanks.
pub fn constant_plateau_teacher(c: f64, d: f64, mid: f64) -> impl Teacher {
    FnTeacher::new("constant plateau", ResponseKind::Continuous, move |row: &[f64]| {
        let x = row[0];
        if x < c {
            0.0
        } else if x < d {
            mid
        } else {
            10.0
        }
    })
}

/// Teacher on [0, 2] whose SSE profile is exactly flat on [c, d]: every cut
/// inside the plateau is an optimal split, the realizable form of interval
/// oscillation. Solving mu_l(t) + mu_r(t) = 2 f(t) with constant flanks 0 and
/// 10 gives f(t) = S/2 + C (1 - t) / sqrt(t (2 - t)) between c and d.
pub fn interval_oscillation_teacher(c: f64, d: f64) -> impl Teacher {
    let r = 10.0;
    let k = (c / (2.0 - c)).sqrt() * (d * (2.0 - d)).sqrt();
    let s = 2.0 * r * (2.0 - d) / (k + 2.0 - d);
    let cc = -s * c / (2.0 * (c * (2.0 - c)).sqrt());
    FnTeacher::new("flat-criterion plateau", ResponseKind::Continuous, move |row: &[f64]| {
        let x = row[0];
        if x < c {
            0.0
        } else if x >= d {
            r
        } else {
            s / 2.0 + cc * (1.0 - x) / (x * (2.0 - x)).sqrt()
        }
    })
}

/// One stump threshold fitted on `n` fresh pseudo rows from the unary domain.
fn one_stump_threshold(
    teacher: &dyn Teacher,
    n: usize,
    seed: u64,
    stream: u64,
    rep: u64,
) -> Result<f64> {
    let schema = unary_schema();
    let region = schema.full_region();
    let mut rng = derive_rng(seed, rep, stream, n as u64);
    let rows = sample_region(&schema, &region, n, &mut rng);
    let ys = teacher.predict_batch(&rows)?;
    let data = Dataset::new(&schema, rows, ys, Provenance::Pseudo)?;
    let cand = fit_stump(&data, &region, SplitCriterion::Sse, &mut rng)?;
    match cand.cut {
        SplitCut::Continuous { threshold } => Ok(threshold),
        _ => Err(DdtError::Stability("unary stump returned a categorical cut".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub median_abs_error: f64,
}

/// Median |x_s^n - 1| of the single-step teacher per sample size.
pub fn convergence_suite(ns: &[usize], repeats: usize, seed: u64) -> Result<Vec<ConvergenceRow>> {
    let teacher = crate::teacher::make_step_teacher(0.0, 2.0, 1.0, 0.0, 10.0)?;
    ns.iter()
        .map(|&n| {
            let mut errors: Vec<f64> = (0..repeats)
                .into_par_iter()
                .map(|rep| {
                    one_stump_threshold(&teacher, n, seed, CONVERGENCE_STREAM, rep as u64)
                        .map(|t| (t - 1.0).abs())
                })
                .collect::<Result<Vec<_>>>()?;
            errors.sort_by(f64::total_cmp);
            let median = if errors.len() % 2 == 1 {
                errors[errors.len() / 2]
            } else {
                0.5 * (errors[errors.len() / 2 - 1] + errors[errors.len() / 2])
            };
            Ok(ConvergenceRow { n, median_abs_error: median })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageRow {
    pub n: usize,
    /// One empirical coverage rate per outer repetition.
    pub rates: Vec<f64>,
}

impl CoverageRow {
    pub fn mean(&self) -> f64 {
        self.rates.iter().sum::<f64>() / self.rates.len() as f64
    }
}

/// Empirical coverage of the confidence interval on the staircase teacher:
/// `outer` repetitions of `inner` stump fits per sample size.
pub fn coverage_suite(
    ns: &[usize],
    inner: usize,
    outer: usize,
    seed: u64,
) -> Result<Vec<CoverageRow>> {
    let teacher = coverage_staircase_teacher();
    ns.iter()
        .map(|&n| {
            let rates = (0..outer)
                .map(|o| {
                    let hits = (0..inner)
                        .into_par_iter()
                        .map(|rep| {
                            let t = one_stump_threshold(
                                &teacher,
                                n,
                                seed.wrapping_add(o as u64),
                                COVERAGE_STREAM,
                                rep as u64,
                            )?;
                            let (lo, hi) = split_confidence_interval(t, 0.0, 2.0, n);
                            Ok(usize::from(lo <= 1.0 && 1.0 <= hi))
                        })
                        .collect::<Result<Vec<usize>>>()?
                        .iter()
                        .sum::<usize>();
                    Ok(hits as f64 / inner as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(CoverageRow { n, rates })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct InterpretationRun {
    pub odt_mse: f64,
    pub ddt_mse: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InterpretationResult {
    pub runs: Vec<InterpretationRun>,
    pub ddt_wins: usize,
}

/// Induction settings of the interpretation comparison (depth-matched against
/// a depth-4 CART baseline).
pub fn interpretation_ddt_config(seed: u64) -> InductionConfig {
    let mut config = InductionConfig::new(SplitCriterion::Sse, seed);
    config.repeats = 50;
    config.sample_size = Some(400);
    config.eval_sample_size = 3000;
    config.stopping = StoppingConfig {
        max_interpretable_depth: 4,
        max_interpretable_nodes: 15,
        pxi_threshold: 0.02,
        min_region_observed: 0,
    };
    config.odt = OdtConfig { max_depth: 5, min_leaf: 5, pseudo_sample_size: 2000, feature_fraction: 1.0 };
    config
}

/// One interpretation-quality comparison: 50 fresh samples of the reference
/// grid, a depth-4 CART on them versus a distilled partition over a forest
/// teacher, both scored by MSE against the full grid.
fn interpretation_run(run: u64, seed: u64) -> Result<InterpretationRun> {
    let (schema, grid) = sim2d_grid();
    let mut rng = derive_rng(seed, run, INTERPRETATION_STREAM, 0);

    // 50 distinct grid points
    let mut indices: Vec<usize> = (0..grid.len()).collect();
    for i in 0..50 {
        let j = rand::Rng::random_range(&mut rng, i..indices.len());
        indices.swap(i, j);
    }
    let sample = Dataset {
        rows: indices[..50].iter().map(|&i| grid.rows[i].clone()).collect(),
        responses: indices[..50].iter().map(|&i| grid.responses[i]).collect(),
        provenance: Provenance::Observed,
    };

    let region = schema.full_region();
    let odt_cfg = OdtConfig { max_depth: 4, min_leaf: 5, pseudo_sample_size: 0, feature_fraction: 1.0 };
    let odt = induce_odt(&sample, &region, SplitCriterion::Sse, &odt_cfg, &mut rng)?;

    let forest = fit_forest_teacher(
        &schema,
        &sample,
        &ForestConfig { trees: 200, seed: seed ^ run, ..Default::default() },
    )?;
    let ddt = induce_ddt(&forest, &schema, &sample, &interpretation_ddt_config(seed ^ run))?;

    // partition values: teacher means of a probe routed to each frontier node
    let mut probe_rng = derive_rng(seed, run, INTERPRETATION_STREAM, 1);
    let probe_rows = sample_region(&schema, &region, 4000, &mut probe_rng);
    let probe_ys = forest.predict_batch(&probe_rows)?;
    let mut sums: std::collections::BTreeMap<u64, (f64, usize)> = Default::default();
    for (row, y) in probe_rows.iter().zip(&probe_ys) {
        let id = ddt.route_to_frontier(row)?;
        let e = sums.entry(id).or_insert((0.0, 0));
        e.0 += y;
        e.1 += 1;
    }

    let (mut odt_se, mut ddt_se) = (0.0, 0.0);
    for (row, truth) in grid.rows.iter().zip(&grid.responses) {
        let o = odt.predict(row);
        odt_se += (o - truth) * (o - truth);
        let id = ddt.route_to_frontier(row)?;
        let d = match sums.get(&id) {
            Some((s, c)) if *c > 0 => s / *c as f64,
            _ => ddt.predict(row)?,
        };
        ddt_se += (d - truth) * (d - truth);
    }
    let n = grid.len() as f64;
    Ok(InterpretationRun { odt_mse: odt_se / n, ddt_mse: ddt_se / n })
}

/// Repeat the interpretation comparison and count distilled-tree wins.
pub fn interpretation_suite(runs: usize, seed: u64) -> Result<InterpretationResult> {
    let results: Vec<InterpretationRun> = (0..runs)
        .into_par_iter()
        .map(|r| interpretation_run(r as u64, seed))
        .collect::<Result<Vec<_>>>()?;
    let ddt_wins = results.iter().filter(|r| r.ddt_mse < r.odt_mse).count();
    Ok(InterpretationResult { runs: results, ddt_wins })
}
