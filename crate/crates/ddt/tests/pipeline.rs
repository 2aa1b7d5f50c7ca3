//! Integration tests of the induction pipeline: routing, scheduling,
//! determinism, stopping behavior, and the reference-experiment properties.

mod common;

use ddt::criteria::SplitCriterion;
use ddt::dataset::{load_dataset, sample_region, sim2d_grid, Dataset, Provenance};
use ddt::induction::{
    induce_ddt, induce_odt, schedule, Direction, InductionConfig, NodeKind, OdtConfig,
    StoppingConfig, Strategy,
};
use ddt::schema::{Covariate, CovariateKind, CovariateSchema, ResponseKind, SamplingPath};
use ddt::stability::{
    measure_split_stability, select_best_split, Oscillation, SecondLevel, StabilityParams,
};
use ddt::stump::{fit_stump, split_region, SplitCut};
use ddt::teacher::forest::{fit_forest_teacher, ForestConfig};
use ddt::teacher::{make_step_teacher, ConstantTeacher, Teacher};
use ddt::validate::constant_plateau_teacher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data_path(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn no_observed() -> Dataset {
    Dataset { rows: vec![], responses: vec![], provenance: Provenance::Observed }
}

fn sim2d_forest() -> (CovariateSchema, Dataset, ddt::teacher::forest::ForestTeacher) {
    let (schema, sample) = load_dataset(data_path("sim2d_sample50.csv"), None).unwrap();
    let forest = fit_forest_teacher(
        &schema,
        &sample,
        &ForestConfig { trees: 60, seed: 42, ..Default::default() },
    )
    .unwrap();
    (schema, sample, forest)
}

fn small_config(seed: u64) -> InductionConfig {
    let mut config = InductionConfig::new(SplitCriterion::Sse, seed);
    config.repeats = 25;
    config.sample_size = Some(300);
    config.eval_sample_size = 2000;
    config.stopping = StoppingConfig {
        max_interpretable_depth: 3,
        max_interpretable_nodes: 7,
        pxi_threshold: 0.05,
        min_region_observed: 0,
    };
    config.odt = OdtConfig { max_depth: 4, min_leaf: 5, pseudo_sample_size: 1000, feature_fraction: 1.0 };
    config
}

#[test]
fn observed_rows_partition_across_the_frontier() {
    let (schema, sample, forest) = sim2d_forest();
    let tree = induce_ddt(&forest, &schema, &sample, &small_config(3)).unwrap();
    let frontier_total: usize =
        tree.frontier_ids().iter().map(|id| tree.nodes[id].observed_count).sum();
    assert_eq!(frontier_total, sample.len());
    for row in &sample.rows {
        let id = tree.route_to_frontier(row).unwrap();
        assert!(tree.nodes.contains_key(&id));
    }
    // child regions partition the parent and counts are consistent
    for id in tree.interpretable_ids() {
        let node = &tree.nodes[&id];
        assert_eq!(
            node.observed_count,
            tree.nodes[&(2 * id)].observed_count + tree.nodes[&(2 * id + 1)].observed_count
        );
    }
}

#[test]
fn breadth_first_and_parallel_build_identical_trees() {
    let (schema, sample, forest) = sim2d_forest();
    let mut bf = small_config(9);
    bf.strategy = Strategy::BreadthFirst;
    let mut par = small_config(9);
    par.strategy = Strategy::Parallel { workers: 4 };
    let tree_bf = induce_ddt(&forest, &schema, &sample, &bf).unwrap();
    let tree_par = induce_ddt(&forest, &schema, &sample, &par).unwrap();
    let json_bf = serde_json::to_string(&tree_bf).unwrap();
    let json_par = serde_json::to_string(&tree_par).unwrap();
    assert_eq!(json_bf, json_par);
}

#[test]
fn tree_json_round_trip_is_byte_identical() {
    let (schema, sample, forest) = sim2d_forest();
    let tree = induce_ddt(&forest, &schema, &sample, &small_config(5)).unwrap();
    let json = serde_json::to_string_pretty(&tree).unwrap();
    let back: ddt::induction::DdtTree = serde_json::from_str(&json).unwrap();
    let json2 = serde_json::to_string_pretty(&back).unwrap();
    assert_eq!(json, json2);
}

#[test]
fn deeper_predictive_subtrees_approximate_the_teacher_no_worse() {
    let (schema, sample, forest) = sim2d_forest();
    let region = schema.full_region();
    let mut probe_rng = ChaCha8Rng::seed_from_u64(777);
    let probe = sample_region(&schema, &region, 10_000, &mut probe_rng);
    let truth = forest.predict_batch(&probe).unwrap();

    let mut mses = Vec::new();
    for depth in [2, 4, 8] {
        let mut config = small_config(13);
        config.odt.max_depth = depth;
        let tree = induce_ddt(&forest, &schema, &sample, &config).unwrap();
        let mse = probe
            .iter()
            .zip(&truth)
            .map(|(row, y)| {
                let p = tree.predict(row).unwrap();
                (p - y) * (p - y)
            })
            .sum::<f64>()
            / probe.len() as f64;
        mses.push(mse);
    }
    assert!(
        mses[0] >= mses[1] && mses[1] >= mses[2],
        "teacher approximation must not degrade with subtree depth: {mses:?}"
    );
}

#[test]
fn pxi_threshold_one_makes_the_root_predictive() {
    let (schema, sample, forest) = sim2d_forest();
    let mut config = small_config(21);
    config.stopping.pxi_threshold = 1.0;
    let tree = induce_ddt(&forest, &schema, &sample, &config).unwrap();
    assert_eq!(tree.nodes.len(), 1);
    assert!(matches!(tree.nodes[&1].kind, NodeKind::Predictive { .. }));
}

#[test]
fn constant_teacher_gives_a_single_leaf() {
    let schema = CovariateSchema::new(
        vec![Covariate { name: "x".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 1.0 } }],
        ResponseKind::Continuous,
    )
    .unwrap();
    let teacher = ConstantTeacher { value: 4.5, kind: ResponseKind::Continuous };
    let tree = induce_ddt(&teacher, &schema, &no_observed(), &small_config(1)).unwrap();
    assert_eq!(tree.nodes.len(), 1);
    match &tree.nodes[&1].kind {
        NodeKind::Leaf { value } => assert_eq!(*value, 4.5),
        other => panic!("expected a single leaf, got {other:?}"),
    }
    assert_eq!(tree.predict(&[0.3]).unwrap(), 4.5);
}

#[test]
fn predict_routes_thresholds_right_and_rejects_out_of_domain() {
    let teacher = make_step_teacher(0.0, 2.0, 1.0, 0.0, 10.0).unwrap();
    let schema = CovariateSchema::new(
        vec![Covariate { name: "x".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 2.0 } }],
        ResponseKind::Continuous,
    )
    .unwrap();
    let mut config = small_config(2);
    config.stopping.max_interpretable_depth = 1;
    config.sample_size = Some(2000);
    let tree = induce_ddt(&teacher, &schema, &no_observed(), &config).unwrap();
    let threshold = match &tree.nodes[&1].kind {
        NodeKind::Interpretable { split, .. } => match split.cut {
            SplitCut::Continuous { threshold } => threshold,
            _ => panic!("continuous schema"),
        },
        other => panic!("expected interpretable root, got {other:?}"),
    };
    assert_eq!(tree.predict(&[0.5]).unwrap(), 0.0);
    // a row exactly on the threshold routes to the right child
    assert_eq!(tree.predict(&[threshold]).unwrap(), 10.0);
    assert!(tree.predict(&[2.5]).is_err());
    assert!(tree.predict(&[0.5, 0.5]).is_err());
}

// schedule contracts on the seven-node example tree {1,2,3,4,6,8,13}
#[test]
fn schedule_orders_match_the_strategy_contracts() {
    let ids = [1u64, 2, 3, 4, 6, 8, 13];
    let bf = schedule(&Strategy::BreadthFirst, &ids).unwrap();
    assert_eq!(bf, vec![vec![1], vec![2, 3], vec![4, 6], vec![8, 13]]);
    let flat: Vec<u64> = bf.into_iter().flatten().collect();
    assert_eq!(flat, vec![1, 2, 3, 4, 6, 8, 13]);

    // path to node 13 = directions right, left, right
    let path = schedule(
        &Strategy::PathBased { target: vec![Direction::R, Direction::L, Direction::R] },
        &ids,
    )
    .unwrap();
    assert_eq!(path, vec![vec![1], vec![3], vec![6], vec![13]]);

    let par = schedule(&Strategy::Parallel { workers: 2 }, &[2, 3]).unwrap();
    assert_eq!(par, vec![vec![2, 3]]);
    let par = schedule(&Strategy::Parallel { workers: 2 }, &ids).unwrap();
    assert_eq!(par[0], vec![1]);
    assert_eq!(par[1], vec![2, 3]);
}

#[test]
fn path_based_growth_expands_a_single_branch() {
    let (schema, sample, forest) = sim2d_forest();
    let mut config = small_config(31);
    config.strategy = Strategy::PathBased { target: vec![Direction::R, Direction::R] };
    let tree = induce_ddt(&forest, &schema, &sample, &config).unwrap();
    // interpretable nodes may only lie on the path 1 -> 3 -> 7
    for id in tree.interpretable_ids() {
        assert!([1u64, 3, 7].contains(&id), "unexpected interpretable node {id}");
    }
}

#[test]
fn sampling_paths_of_disjoint_branches_do_not_intersect() {
    let (schema, _, forest) = sim2d_forest();
    let root = schema.full_region();
    let mut config = small_config(8);
    config.stopping.max_interpretable_depth = 2;
    let tree = induce_ddt(&forest, &schema, &no_observed(), &config).unwrap();
    let region = |id: u64| tree.nodes[&id].region.clone();
    // nested chains down the two branches
    let left = SamplingPath::new(vec![region(2), region(4)]).unwrap();
    let right = SamplingPath::new(vec![region(3), region(6)]).unwrap();
    assert!(!left.intersects(&right));
    let whole = SamplingPath::new(vec![root, region(2), region(4)]).unwrap();
    assert!(whole.intersects(&left));
}

#[test]
fn min_region_observed_suppresses_thin_splits() {
    let (schema, sample, forest) = sim2d_forest();
    let mut config = small_config(17);
    config.stopping.min_region_observed = 26; // no split can give both children > half the data
    let tree = induce_ddt(&forest, &schema, &sample, &config).unwrap();
    assert!(tree.interpretable_ids().is_empty());
}

#[test]
fn stability_escalates_sample_size_on_wide_second_level() {
    let teacher = ddt::validate::two_cut_teacher();
    let schema = CovariateSchema::new(
        vec![Covariate { name: "x".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 2.0 } }],
        ResponseKind::Continuous,
    )
    .unwrap();
    let params = StabilityParams {
        repeats: 60,
        sample_size: Some(400),
        adaptive_sample_size: true,
        seed: 3,
        node_id: 1,
        ..Default::default()
    };
    let report =
        measure_split_stability(&teacher, &schema, &schema.full_region(), SplitCriterion::Sse, &params)
            .unwrap();
    assert!(report.escalated);
    assert_eq!(report.pseudo_sample_size, 800);
}

#[test]
fn single_repeat_yields_single_atom_and_no_verdict() {
    let teacher = make_step_teacher(0.0, 2.0, 1.0, 0.0, 10.0).unwrap();
    let schema = CovariateSchema::new(
        vec![Covariate { name: "x".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 2.0 } }],
        ResponseKind::Continuous,
    )
    .unwrap();
    let params = StabilityParams {
        repeats: 1,
        sample_size: Some(500),
        seed: 5,
        node_id: 1,
        ..Default::default()
    };
    let report =
        measure_split_stability(&teacher, &schema, &schema.full_region(), SplitCriterion::Sse, &params)
            .unwrap();
    assert_eq!(report.first_level, vec![(0, 1.0)]);
    match report.second_level_of(0).unwrap() {
        SecondLevel::Continuous { values, .. } => assert_eq!(values.len(), 1),
        other => panic!("expected continuous second level, got {other:?}"),
    }
    assert!(matches!(report.oscillation, Oscillation::None { note: Some(_) }));
}

// grid teacher at the root region: one covariate dominates the first level
#[test]
fn grid_teacher_first_level_mass_is_high() {
    let (schema, grid) = sim2d_grid();
    let teacher = ddt::teacher::make_grid_teacher(&schema, &grid).unwrap();
    let params = StabilityParams {
        repeats: 60,
        sample_size: Some(500),
        seed: 5,
        node_id: 1,
        ..Default::default()
    };
    let report =
        measure_split_stability(&teacher, &schema, &schema.full_region(), SplitCriterion::Sse, &params)
            .unwrap();
    let max_mass = report.first_level.iter().map(|(_, m)| *m).fold(0.0, f64::max);
    assert!(max_mass >= 0.97, "first-level mass {max_mass}");
}

// a teacher constant on a plateau flanked by two levels truly oscillates
// between the two plateau edges (finite points, not an interval)
#[test]
fn constant_plateau_oscillates_between_its_edges() {
    let teacher = constant_plateau_teacher(0.7, 1.3, 5.0);
    let schema = CovariateSchema::new(
        vec![Covariate { name: "x".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 2.0 } }],
        ResponseKind::Continuous,
    )
    .unwrap();
    let params = StabilityParams {
        repeats: 400,
        sample_size: Some(500),
        adaptive_sample_size: false,
        seed: 11,
        node_id: 1,
        ..Default::default()
    };
    let report =
        measure_split_stability(&teacher, &schema, &schema.full_region(), SplitCriterion::Sse, &params)
            .unwrap();
    match &report.oscillation {
        Oscillation::FinitePoints { atoms } => {
            assert_eq!(atoms.len(), 2);
            assert!((atoms[0].0 - 0.7).abs() < 0.05, "atoms {atoms:?}");
            assert!((atoms[1].0 - 1.3).abs() < 0.05, "atoms {atoms:?}");
        }
        other => panic!("expected edge oscillation, got {other:?}"),
    }
}

// step-teacher split lands within the CI half-width of the true cut in at
// least 93% of seeded runs (the ~95% rate less 3 sigma of binomial noise)
#[test]
fn step_split_within_tolerance_in_most_runs() {
    let teacher = make_step_teacher(0.0, 2.0, 1.0, 0.0, 10.0).unwrap();
    let schema = CovariateSchema::new(
        vec![Covariate { name: "x".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 2.0 } }],
        ResponseKind::Continuous,
    )
    .unwrap();
    let region = schema.full_region();
    let mut hits = 0;
    let runs = 1000;
    for rep in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(rep);
        let rows = sample_region(&schema, &region, 1000, &mut rng);
        let ys = teacher.predict_batch(&rows).unwrap();
        let data = Dataset::new(&schema, rows, ys, Provenance::Pseudo).unwrap();
        let cand = fit_stump(&data, &region, SplitCriterion::Sse, &mut rng).unwrap();
        if let SplitCut::Continuous { threshold } = cand.cut {
            if (threshold - 1.0).abs() <= 0.003 {
                hits += 1;
            }
        }
    }
    assert!(hits >= 930, "only {hits} of {runs} runs within 0.003 of the cut");
}

// the bagged teacher fits the 50 observed samples more tightly than a single
// depth-4 tree, the premise of the interpretation experiment
#[test]
fn forest_training_error_beats_single_tree() {
    let (schema, sample) = load_dataset(data_path("sim2d_sample50.csv"), None).unwrap();
    let forest = fit_forest_teacher(
        &schema,
        &sample,
        &ForestConfig { trees: 200, seed: 42, ..Default::default() },
    )
    .unwrap();
    let odt_cfg = OdtConfig { max_depth: 4, min_leaf: 5, pseudo_sample_size: 0, feature_fraction: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let odt =
        induce_odt(&sample, &schema.full_region(), SplitCriterion::Sse, &odt_cfg, &mut rng).unwrap();
    let forest_pred = forest.predict_batch(&sample.rows).unwrap();
    let mse = |pred: &[f64]| {
        pred.iter()
            .zip(&sample.responses)
            .map(|(p, y)| (p - y) * (p - y))
            .sum::<f64>()
            / sample.len() as f64
    };
    let odt_pred: Vec<f64> = sample.rows.iter().map(|r| odt.predict(r)).collect();
    let (f_mse, o_mse) = (mse(&forest_pred), mse(&odt_pred));
    assert!(
        f_mse < o_mse,
        "forest training MSE {f_mse:.3} should be below the single tree's {o_mse:.3}"
    );
}

// distillation importance agrees with the teacher's own importance on the
// top variable, and both covariates matter in the 2D experiment
#[test]
fn variable_importance_agrees_with_the_teacher() {
    let (schema, sample, forest) = sim2d_forest();
    let tree = induce_ddt(&forest, &schema, &sample, &small_config(19)).unwrap();
    let summary = tree.explanation.as_ref().unwrap();
    for (name, v) in &summary.variable_importance {
        assert!(*v > 0.0, "covariate {name} has zero importance");
    }
    let top_ddt = summary
        .variable_importance
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
        .clone();
    let top_teacher = forest
        .variable_importance()
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
        .clone();
    assert_eq!(top_ddt, top_teacher);
}

#[test]
fn split_region_rejects_incompatible_cuts() {
    let (schema, _) = sim2d_grid();
    let region = schema.full_region();
    let cand = ddt::stump::SplitCandidate {
        covariate_index: 0,
        cut: SplitCut::Continuous { threshold: 42.0 },
        criterion_value: 0.0,
        left_stat: ddt::stump::NodeStat::Mean { mean: 0.0, count: 0 },
        right_stat: ddt::stump::NodeStat::Mean { mean: 0.0, count: 0 },
    };
    assert!(split_region(&region, &cand).is_err());
}

// step teacher at the default budget: the covariate always wins and the
// second-level mode lands within the CI half-width of the true cut
#[test]
fn step_teacher_stability_report_is_tight() {
    let teacher = make_step_teacher(0.0, 2.0, 1.0, 0.0, 10.0).unwrap();
    let schema = CovariateSchema::new(
        vec![Covariate { name: "x".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 2.0 } }],
        ResponseKind::Continuous,
    )
    .unwrap();
    let params = StabilityParams {
        repeats: 100,
        sample_size: Some(1000),
        adaptive_sample_size: false,
        seed: 12,
        node_id: 1,
        ..Default::default()
    };
    let report =
        measure_split_stability(&teacher, &schema, &schema.full_region(), SplitCriterion::Sse, &params)
            .unwrap();
    assert_eq!(report.first_level, vec![(0, 1.0)]);
    match report.second_level_of(0).unwrap() {
        SecondLevel::Continuous { mode, .. } => {
            assert!((mode - 1.0).abs() <= 0.003, "mode {mode}");
        }
        other => panic!("unexpected second level {other:?}"),
    }
    let (lo, hi) = report.ci.unwrap();
    assert!(lo <= 1.0 && 1.0 <= hi, "ci [{lo}, {hi}] misses the true cut");
}

// an exact 50/50 first level forces a seeded random choice and gets flagged
#[test]
fn exact_first_level_tie_is_broken_and_flagged() {
    let teacher = ddt::teacher::FnTeacher::new(
        "additive two-way",
        ResponseKind::Continuous,
        |row: &[f64]| 10.0 * f64::from(row[0] >= 1.0) + 10.0 * f64::from(row[1] >= 1.0),
    );
    let schema = CovariateSchema::new(
        vec![
            Covariate { name: "a".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 2.0 } },
            Covariate { name: "b".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 2.0 } },
        ],
        ResponseKind::Continuous,
    )
    .unwrap();
    let first_level = vec![(0usize, 0.5), (1usize, 0.5)];
    let second_level = vec![
        (0usize, SecondLevel::Continuous { values: vec![1.0; 8], histogram: vec![], bandwidth: 0.0, mode: 1.0 }),
        (1usize, SecondLevel::Continuous { values: vec![1.0; 8], histogram: vec![], bandwidth: 0.0, mode: 1.0 }),
    ];
    let params = StabilityParams { seed: 6, node_id: 1, ..Default::default() };
    let (cand, tie_broken) = select_best_split(
        &teacher,
        &schema,
        &schema.full_region(),
        SplitCriterion::Sse,
        &first_level,
        &second_level,
        500,
        &params,
    )
    .unwrap();
    assert!(tie_broken);
    assert!(cand.covariate_index == 0 || cand.covariate_index == 1);
}

#[test]
fn odt_pure_response_and_depth_zero_are_leaves() {
    let schema = CovariateSchema::new(
        vec![Covariate { name: "x".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 1.0 } }],
        ResponseKind::Continuous,
    )
    .unwrap();
    let pure = Dataset::new(
        &schema,
        vec![vec![0.1], vec![0.5], vec![0.9]],
        vec![7.0, 7.0, 7.0],
        Provenance::Pseudo,
    )
    .unwrap();
    let cfg = OdtConfig { max_depth: 5, min_leaf: 1, pseudo_sample_size: 0, feature_fraction: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tree = induce_odt(&pure, &schema.full_region(), SplitCriterion::Sse, &cfg, &mut rng).unwrap();
    assert!(tree.is_single_leaf());
    assert_eq!(tree.predict(&[0.3]), 7.0);

    let mixed = Dataset::new(
        &schema,
        vec![vec![0.1], vec![0.9]],
        vec![0.0, 10.0],
        Provenance::Pseudo,
    )
    .unwrap();
    let cfg = OdtConfig { max_depth: 0, min_leaf: 1, pseudo_sample_size: 0, feature_fraction: 1.0 };
    let tree = induce_odt(&mixed, &schema.full_region(), SplitCriterion::Sse, &cfg, &mut rng).unwrap();
    assert!(tree.is_single_leaf());
    assert_eq!(tree.predict(&[0.3]), 5.0);
}

// the bundled reference grid parses to the documented shape
#[test]
fn bundled_grid_csv_loads() {
    let (schema, data) = load_dataset(data_path("sim2d.csv"), None).unwrap();
    assert_eq!(data.len(), 2601);
    assert_eq!(schema.dim(), 2);
    assert!(schema.covariates.iter().all(|c| c.kind.is_continuous()));
    assert!(schema.response.is_continuous());
}

// categorical winner: exact second-level masses and a modal one-vs-rest cut
#[test]
fn categorical_winner_reports_exact_masses() {
    let schema = CovariateSchema::new(
        vec![
            Covariate {
                name: "c".into(),
                kind: CovariateKind::Categorical {
                    levels: vec!["A".into(), "B".into(), "C".into()],
                },
            },
            Covariate { name: "noise".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 1.0 } },
        ],
        ResponseKind::Continuous,
    )
    .unwrap();
    let teacher = ddt::teacher::FnTeacher::new(
        "level A stands out",
        ResponseKind::Continuous,
        |row: &[f64]| if row[0] == 0.0 { 0.0 } else { 10.0 },
    );
    let params = StabilityParams {
        repeats: 50,
        sample_size: Some(300),
        seed: 2,
        node_id: 1,
        ..Default::default()
    };
    let report =
        measure_split_stability(&teacher, &schema, &schema.full_region(), SplitCriterion::Sse, &params)
            .unwrap();
    assert_eq!(report.first_level, vec![(0, 1.0)]);
    match report.second_level_of(0).unwrap() {
        SecondLevel::Categorical { masses } => {
            assert_eq!(masses, &vec![(0u32, 1.0)]);
        }
        other => panic!("expected categorical second level, got {other:?}"),
    }
    assert_eq!(report.chosen.cut, SplitCut::Categorical { level: 0 });
    assert!(report.ci.is_none());
    assert!(matches!(&report.oscillation, Oscillation::None { note: Some(_) }));
}
