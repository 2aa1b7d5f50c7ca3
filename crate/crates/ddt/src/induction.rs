//! Tree construction: stability-driven induction of interpretable nodes,
//! ordinary recursive CART for predictive subtrees, hybrid assembly, and
//! sampling-strategy scheduling.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{node_impurity, SplitCriterion};
use crate::dataset::{sample_region, Dataset, Provenance};
use crate::error::{DdtError, Result};
use crate::explanation::{compute_indices, DataSourceKind, ExplanationSummary};
use crate::schema::{CovariateSchema, Region};
use crate::stability::{
    derive_rng, measure_split_stability, rng_streams, OscillationConfig, StabilityParams,
    StabilityReport,
};
use crate::stump::{
    fit_stump_with, goes_left, split_region, SplitCandidate, SplitCut, StumpOptions,
};
use crate::teacher::Teacher;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdtConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Rows drawn in a predictive node's region to fit its subtree.
    pub pseudo_sample_size: usize,
    /// Covariate fraction each split may search (1.0 = all; the forest
    /// teacher uses a smaller value).
    pub feature_fraction: f64,
}

impl Default for OdtConfig {
    fn default() -> Self {
        Self { max_depth: 6, min_leaf: 5, pseudo_sample_size: 5000, feature_fraction: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OdtNode {
    Split {
        covariate_index: usize,
        cut: SplitCut,
        samples: usize,
        impurity_reduction: f64,
        left: Box<OdtNode>,
        right: Box<OdtNode>,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

impl OdtNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            OdtNode::Leaf { value, .. } => *value,
            OdtNode::Split { covariate_index, cut, left, right, .. } => {
                if goes_left(row, *covariate_index, cut) {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }

    pub fn split_count(&self) -> usize {
        match self {
            OdtNode::Leaf { .. } => 0,
            OdtNode::Split { left, right, .. } => 1 + left.split_count() + right.split_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            OdtNode::Leaf { .. } => 0,
            OdtNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// A classical greedy CART tree: single stump fit per node, no repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdtSubtree {
    pub root: OdtNode,
}

impl OdtSubtree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.root.predict(row)
    }

    pub fn is_single_leaf(&self) -> bool {
        matches!(self.root, OdtNode::Leaf { .. })
    }
}

fn leaf_value(responses: &[f64], n_classes: usize) -> f64 {
    if n_classes == 0 {
        responses.iter().sum::<f64>() / responses.len() as f64
    } else {
        let mut counts = vec![0usize; n_classes];
        for y in responses {
            counts[*y as usize] += 1;
        }
        let mut best = 0usize;
        for (i, c) in counts.iter().enumerate() {
            if *c > counts[best] {
                best = i;
            }
        }
        best as f64
    }
}

/// Recursive greedy CART on a dataset: the baseline inducer and the builder
/// of predictive subtrees and forest base learners.
pub fn induce_odt(
    data: &Dataset,
    region: &Region,
    criterion: SplitCriterion,
    config: &OdtConfig,
    rng: &mut impl Rng,
) -> Result<OdtSubtree> {
    if data.is_empty() {
        return Err(DdtError::Induction("empty dataset".into()));
    }
    let n_classes = if criterion.is_regression() {
        0
    } else {
        1 + data.responses.iter().cloned().fold(0.0f64, f64::max) as usize
    };
    let root = grow_odt(data, region, criterion, config, n_classes, 0, rng)?;
    Ok(OdtSubtree { root })
}

fn grow_odt(
    data: &Dataset,
    region: &Region,
    criterion: SplitCriterion,
    config: &OdtConfig,
    n_classes: usize,
    depth: usize,
    rng: &mut impl Rng,
) -> Result<OdtNode> {
    let n = data.len();
    let make_leaf = |data: &Dataset| OdtNode::Leaf {
        value: leaf_value(&data.responses, n_classes),
        samples: data.len(),
    };
    if depth >= config.max_depth || n < 2 * config.min_leaf.max(1) {
        return Ok(make_leaf(data));
    }
    let p = region.bounds.len();
    let feature_subset = if config.feature_fraction < 1.0 {
        let k = ((config.feature_fraction * p as f64).ceil() as usize).clamp(1, p);
        let mut all: Vec<usize> = (0..p).collect();
        for i in 0..k {
            let j = rng.random_range(i..p);
            all.swap(i, j);
        }
        let mut subset = all[..k].to_vec();
        subset.sort_unstable();
        Some(subset)
    } else {
        None
    };
    let opts = StumpOptions {
        min_leaf: config.min_leaf.max(1),
        feature_subset,
        weighted_children: true,
    };
    let cand = match fit_stump_with(data, region, criterion, &opts, rng) {
        Ok(c) => c,
        Err(DdtError::Uninformative) => return Ok(make_leaf(data)),
        Err(e) => return Err(e),
    };
    let (left_region, right_region) = split_region(region, &cand)?;

    let (mut lrows, mut lys, mut rrows, mut rys) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, y) in data.rows.iter().zip(&data.responses) {
        if goes_left(row, cand.covariate_index, &cand.cut) {
            lrows.push(row.clone());
            lys.push(*y);
        } else {
            rrows.push(row.clone());
            rys.push(*y);
        }
    }
    if lys.is_empty() || rys.is_empty() {
        return Ok(make_leaf(data));
    }
    let parent_imp = node_impurity(&data.responses, n_classes, criterion)?;
    let (nl, nr) = (lys.len() as f64, rys.len() as f64);
    let reduction = parent_imp
        - (nl / n as f64) * node_impurity(&lys, n_classes, criterion)?
        - (nr / n as f64) * node_impurity(&rys, n_classes, criterion)?;

    let left_data = Dataset { rows: lrows, responses: lys, provenance: data.provenance };
    let right_data = Dataset { rows: rrows, responses: rys, provenance: data.provenance };
    let left = grow_odt(&left_data, &left_region, criterion, config, n_classes, depth + 1, rng)?;
    let right = grow_odt(&right_data, &right_region, criterion, config, n_classes, depth + 1, rng)?;
    Ok(OdtNode::Split {
        covariate_index: cand.covariate_index,
        cut: cand.cut,
        samples: n,
        impurity_reduction: reduction.max(0.0),
        left: Box::new(left),
        right: Box::new(right),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    L,
    R,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    BreadthFirst,
    PathBased { target: Vec<Direction> },
    Parallel { workers: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    pub max_interpretable_depth: u32,
    pub max_interpretable_nodes: usize,
    /// A frontier node stops when its provisional PXI falls below this;
    /// 1.0 disables interpretable splitting entirely.
    pub pxi_threshold: f64,
    /// Suppress splits whose children would hold fewer observed rows (0 = off).
    pub min_region_observed: usize,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        Self {
            max_interpretable_depth: 4,
            max_interpretable_nodes: 32,
            pxi_threshold: 0.10,
            min_region_observed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InductionConfig {
    pub criterion: SplitCriterion,
    /// N_i stability repeats per interpretable node.
    pub repeats: usize,
    /// n_i pseudo rows per repeat (None = auto sizing).
    pub sample_size: Option<usize>,
    pub stopping: StoppingConfig,
    pub odt: OdtConfig,
    pub strategy: Strategy,
    pub seed: u64,
    /// Rows of the fixed pseudo evaluation sample used for stopping and
    /// explanation impurities.
    pub eval_sample_size: usize,
    pub min_leaf: usize,
    pub weighted_children: bool,
    pub adaptive_sample_size: bool,
    pub oscillation: OscillationConfig,
}

impl InductionConfig {
    pub fn new(criterion: SplitCriterion, seed: u64) -> Self {
        Self {
            criterion,
            repeats: 100,
            sample_size: None,
            stopping: StoppingConfig::default(),
            odt: OdtConfig::default(),
            strategy: Strategy::default(),
            seed,
            eval_sample_size: 10_000,
            min_leaf: 1,
            weighted_children: true,
            adaptive_sample_size: true,
            oscillation: OscillationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Interpretable { split: SplitCandidate, stability: Box<StabilityReport> },
    Predictive { subtree: OdtSubtree },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdtNode {
    pub id: u64,
    pub kind: NodeKind,
    pub region: Region,
    pub observed_count: usize,
    pub pseudo_eval_count: usize,
    /// Impurity of the evaluation rows in this node (0 when none land here).
    pub pseudo_impurity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdtTree {
    pub format_version: u32,
    pub schema: CovariateSchema,
    pub criterion: SplitCriterion,
    pub seed: u64,
    pub nodes: BTreeMap<u64, DdtNode>,
    pub observed_total: usize,
    pub eval_sample_size: usize,
    pub explanation: Option<ExplanationSummary>,
}

pub fn node_depth(id: u64) -> u32 {
    63 - id.leading_zeros()
}

impl DdtTree {
    pub fn root(&self) -> &DdtNode {
        &self.nodes[&1]
    }

    pub fn interpretable_ids(&self) -> Vec<u64> {
        self.nodes
            .values()
            .filter(|n| matches!(n.kind, NodeKind::Interpretable { .. }))
            .map(|n| n.id)
            .collect()
    }

    pub fn frontier_ids(&self) -> Vec<u64> {
        self.nodes
            .values()
            .filter(|n| !matches!(n.kind, NodeKind::Interpretable { .. }))
            .map(|n| n.id)
            .collect()
    }

    /// Route a row to its response. The row must lie inside the schema domain.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        self.schema.check_row(row)?;
        let mut id = 1u64;
        loop {
            let node = self
                .nodes
                .get(&id)
                .ok_or_else(|| DdtError::Induction(format!("missing node {id}")))?;
            match &node.kind {
                NodeKind::Leaf { value } => return Ok(*value),
                NodeKind::Predictive { subtree } => return Ok(subtree.predict(row)),
                NodeKind::Interpretable { split, .. } => {
                    id = if goes_left(row, split.covariate_index, &split.cut) {
                        2 * id
                    } else {
                        2 * id + 1
                    };
                }
            }
        }
    }

    /// Leaf id a row lands in (interpretable routing only).
    pub fn route_to_frontier(&self, row: &[f64]) -> Result<u64> {
        self.schema.check_row(row)?;
        let mut id = 1u64;
        loop {
            match &self.nodes[&id].kind {
                NodeKind::Interpretable { split, .. } => {
                    id = if goes_left(row, split.covariate_index, &split.cut) {
                        2 * id
                    } else {
                        2 * id + 1
                    };
                }
                _ => return Ok(id),
            }
        }
    }
}

/// Order node ids into processing batches per the sampling strategy.
///
/// Breadth-first emits whole depth levels; path-based emits only the nodes on
/// the root-to-target path; parallel groups ids with no ancestor-descendant
/// relation into concurrent batches.
pub fn schedule(strategy: &Strategy, ids: &[u64]) -> Result<Vec<Vec<u64>>> {
    if ids.is_empty() {
        return Ok(Vec::new());
    }
    let mut sorted: Vec<u64> = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    match strategy {
        Strategy::BreadthFirst => {
            let mut batches: Vec<Vec<u64>> = Vec::new();
            let mut by_depth: Vec<u64> = sorted.clone();
            by_depth.sort_by_key(|id| (node_depth(*id), *id));
            for id in by_depth {
                match batches.last_mut() {
                    Some(batch) if node_depth(batch[0]) == node_depth(id) => batch.push(id),
                    _ => batches.push(vec![id]),
                }
            }
            Ok(batches)
        }
        Strategy::PathBased { target } => {
            let mut target_id = 1u64;
            for d in target {
                target_id = match d {
                    Direction::L => 2 * target_id,
                    Direction::R => 2 * target_id + 1,
                };
            }
            let mut path = Vec::new();
            let mut id = target_id;
            loop {
                path.push(id);
                if id == 1 {
                    break;
                }
                id /= 2;
            }
            path.reverse();
            let batches: Vec<Vec<u64>> =
                path.into_iter().filter(|id| sorted.contains(id)).map(|id| vec![id]).collect();
            if batches.is_empty() {
                return Err(DdtError::Induction(format!(
                    "no node of the set lies on the path to {target_id}"
                )));
            }
            Ok(batches)
        }
        Strategy::Parallel { .. } => {
            let mut remaining = sorted;
            let mut batches = Vec::new();
            while !remaining.is_empty() {
                let is_ancestor = |a: u64, b: u64| {
                    let (da, db) = (node_depth(a), node_depth(b));
                    da < db && (b >> (db - da)) == a
                };
                let batch: Vec<u64> = remaining
                    .iter()
                    .copied()
                    .filter(|&id| remaining.iter().all(|&other| !is_ancestor(other, id)))
                    .collect();
                remaining.retain(|id| !batch.contains(id));
                batches.push(batch);
            }
            Ok(batches)
        }
    }
}

struct FrontierNode {
    id: u64,
    region: Region,
    observed: Vec<usize>,
    eval: Vec<usize>,
}

struct Pilot {
    subtree: OdtSubtree,
    /// w_j * Delta_T_j over the shared evaluation sample.
    weighted_reduction: f64,
}

fn eval_impurity(ys: &[f64], n_classes: usize, criterion: SplitCriterion) -> f64 {
    if ys.is_empty() {
        0.0
    } else {
        node_impurity(ys, n_classes, criterion).unwrap_or(0.0)
    }
}

fn pilot_for(
    node: &FrontierNode,
    teacher: &dyn Teacher,
    schema: &CovariateSchema,
    criterion: SplitCriterion,
    config: &InductionConfig,
    eval: &Dataset,
    n_classes: usize,
) -> Result<Pilot> {
    let mut rng = derive_rng(config.seed, node.id, rng_streams::ODT_SUBTREE, 0);
    let rows = sample_region(schema, &node.region, config.odt.pseudo_sample_size.max(2), &mut rng);
    let ys = teacher.predict_batch(&rows)?;
    let data = Dataset::new(schema, rows, ys, Provenance::Pseudo)?;
    let odt_cfg = OdtConfig { feature_fraction: 1.0, ..config.odt.clone() };
    let subtree = induce_odt(&data, &node.region, criterion, &odt_cfg, &mut rng)?;

    // reduction of the subtree over the eval rows routed through it
    let eval_ys: Vec<f64> = node.eval.iter().map(|&i| eval.responses[i]).collect();
    let impurity = eval_impurity(&eval_ys, n_classes, criterion);
    let weighted_reduction = if node.eval.is_empty() {
        0.0
    } else {
        let mut leaf_groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for &i in &node.eval {
            let leaf = route_odt_leaf(&subtree.root, &eval.rows[i]);
            leaf_groups.entry(leaf).or_default().push(eval.responses[i]);
        }
        let n_node = eval_ys.len() as f64;
        let within: f64 = leaf_groups
            .values()
            .map(|ys| (ys.len() as f64 / n_node) * eval_impurity(ys, n_classes, criterion))
            .sum();
        let w = n_node / eval.len() as f64;
        (w * (impurity - within)).max(0.0)
    };
    Ok(Pilot { subtree, weighted_reduction })
}

/// Stable index of the leaf a row reaches (preorder position).
fn route_odt_leaf(node: &OdtNode, row: &[f64]) -> usize {
    fn walk(node: &OdtNode, row: &[f64], next: &mut usize) -> Option<usize> {
        match node {
            OdtNode::Leaf { .. } => {
                let id = *next;
                *next += 1;
                Some(id)
            }
            OdtNode::Split { covariate_index, cut, left, right, .. } => {
                if goes_left(row, *covariate_index, cut) {
                    walk(left, row, next)
                } else {
                    let mut skip = 0usize;
                    count_leaves(left, &mut skip);
                    *next += skip;
                    walk(right, row, next)
                }
            }
        }
    }
    fn count_leaves(node: &OdtNode, acc: &mut usize) {
        match node {
            OdtNode::Leaf { .. } => *acc += 1,
            OdtNode::Split { left, right, .. } => {
                count_leaves(left, acc);
                count_leaves(right, acc);
            }
        }
    }
    let mut next = 0usize;
    walk(node, row, &mut next).expect("routing always reaches a leaf")
}

enum Decision {
    Stop,
    Split { split: SplitCandidate, stability: Box<StabilityReport> },
}

/// Grow a hybrid distillation tree: interpretable nodes from Monte-Carlo
/// stabilized splits, predictive frontier nodes from CART subtrees fit on
/// fresh pseudo data.
pub fn induce_ddt(
    teacher: &dyn Teacher,
    schema: &CovariateSchema,
    observed: &Dataset,
    config: &InductionConfig,
) -> Result<DdtTree> {
    let criterion = config.criterion;
    if criterion.is_regression() != schema.response.is_continuous() {
        return Err(DdtError::Induction(format!(
            "criterion {} does not match the response kind",
            criterion.key()
        )));
    }
    let n_classes = schema.response.class_count();
    let full = schema.full_region();

    // fixed pseudo evaluation sample shared by stopping and explanation
    let mut eval_rng = derive_rng(config.seed, 0, rng_streams::EVAL_SAMPLE, 0);
    let eval_rows = sample_region(schema, &full, config.eval_sample_size.max(10), &mut eval_rng);
    let eval_ys = teacher.predict_batch(&eval_rows)?;
    let eval = Dataset::new(schema, eval_rows, eval_ys, Provenance::Pseudo)?;

    for row in &observed.rows {
        schema.check_row(row)?;
    }

    let mut nodes: BTreeMap<u64, DdtNode> = BTreeMap::new();
    let mut frontier: Vec<FrontierNode> = vec![FrontierNode {
        id: 1,
        region: full,
        observed: (0..observed.len()).collect(),
        eval: (0..eval.len()).collect(),
    }];
    let mut interpretable_reduction_sum = 0.0f64; // settled sum of w_i * Delta_S_i
    let mut settled_pilot_sum = 0.0f64; // settled predictive nodes' w_j * Delta_T_j
    let mut interpretable_count = 0usize;

    while !frontier.is_empty() {
        frontier.sort_by_key(|n| n.id);
        let pilots: Vec<Pilot> = frontier
            .par_iter()
            .map(|node| pilot_for(node, teacher, schema, criterion, config, &eval, n_classes))
            .collect::<Result<Vec<_>>>()?;

        let frontier_pilot_sum: f64 = pilots.iter().map(|p| p.weighted_reduction).sum();
        let denominator = interpretable_reduction_sum + settled_pilot_sum + frontier_pilot_sum;

        let ids: Vec<u64> = frontier.iter().map(|n| n.id).collect();
        // a frontier entirely past the configured path means everything stops
        let batches = match schedule(&config.strategy, &ids) {
            Ok(b) => b,
            Err(_) if matches!(config.strategy, Strategy::PathBased { .. }) => Vec::new(),
            Err(e) => return Err(e),
        };
        let scheduled: Vec<u64> = batches.iter().flatten().copied().collect();

        // decide in parallel, apply in id order
        let decisions: Vec<Decision> = frontier
            .par_iter()
            .zip(&pilots)
            .map(|(node, pilot)| {
                decide(
                    node,
                    pilot,
                    teacher,
                    schema,
                    observed,
                    criterion,
                    config,
                    denominator,
                    &scheduled,
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let mut next_frontier = Vec::new();
        for ((node, pilot), decision) in
            frontier.into_iter().zip(pilots).zip(decisions)
        {
            let eval_ys: Vec<f64> = node.eval.iter().map(|&i| eval.responses[i]).collect();
            let split_allowed = interpretable_count < config.stopping.max_interpretable_nodes;
            match decision {
                Decision::Split { split, stability } if split_allowed => {
                    interpretable_count += 1;
                    let (left_region, right_region) = split_region(&node.region, &split)?;
                    let (mut lob, mut rob) = (Vec::new(), Vec::new());
                    for &i in &node.observed {
                        if goes_left(&observed.rows[i], split.covariate_index, &split.cut) {
                            lob.push(i);
                        } else {
                            rob.push(i);
                        }
                    }
                    let (mut lev, mut rev) = (Vec::new(), Vec::new());
                    for &i in &node.eval {
                        if goes_left(&eval.rows[i], split.covariate_index, &split.cut) {
                            lev.push(i);
                        } else {
                            rev.push(i);
                        }
                    }
                    // settle this node's contribution as an interpretable split
                    let w = node.eval.len() as f64 / eval.len() as f64;
                    let imp = eval_impurity(&eval_ys, n_classes, criterion);
                    let (li, ri) = (
                        eval_impurity(
                            &lev.iter().map(|&i| eval.responses[i]).collect::<Vec<_>>(),
                            n_classes,
                            criterion,
                        ),
                        eval_impurity(
                            &rev.iter().map(|&i| eval.responses[i]).collect::<Vec<_>>(),
                            n_classes,
                            criterion,
                        ),
                    );
                    if !node.eval.is_empty() {
                        let n_node = node.eval.len() as f64;
                        let within = (lev.len() as f64 / n_node) * li + (rev.len() as f64 / n_node) * ri;
                        interpretable_reduction_sum += (w * (imp - within)).max(0.0);
                    }
                    nodes.insert(
                        node.id,
                        DdtNode {
                            id: node.id,
                            kind: NodeKind::Interpretable { split: split.clone(), stability },
                            region: node.region.clone(),
                            observed_count: node.observed.len(),
                            pseudo_eval_count: node.eval.len(),
                            pseudo_impurity: imp,
                        },
                    );
                    next_frontier.push(FrontierNode {
                        id: 2 * node.id,
                        region: left_region,
                        observed: lob,
                        eval: lev,
                    });
                    next_frontier.push(FrontierNode {
                        id: 2 * node.id + 1,
                        region: right_region,
                        observed: rob,
                        eval: rev,
                    });
                }
                _ => {
                    settled_pilot_sum += pilot.weighted_reduction;
                    let kind = if pilot.subtree.is_single_leaf() {
                        match pilot.subtree.root {
                            OdtNode::Leaf { value, .. } => NodeKind::Leaf { value },
                            _ => unreachable!(),
                        }
                    } else {
                        NodeKind::Predictive { subtree: pilot.subtree }
                    };
                    nodes.insert(
                        node.id,
                        DdtNode {
                            id: node.id,
                            kind,
                            region: node.region.clone(),
                            observed_count: node.observed.len(),
                            pseudo_eval_count: node.eval.len(),
                            pseudo_impurity: eval_impurity(&eval_ys, n_classes, criterion),
                        },
                    );
                }
            }
        }
        frontier = next_frontier;
    }

    let mut tree = DdtTree {
        format_version: 1,
        schema: schema.clone(),
        criterion,
        seed: config.seed,
        nodes,
        observed_total: observed.len(),
        eval_sample_size: eval.len(),
        explanation: None,
    };
    let weight_source = if observed.is_empty() {
        DataSourceKind::Pseudo
    } else {
        DataSourceKind::Observed
    };
    let summary = compute_indices(
        &tree,
        Some(observed),
        Some(&eval),
        weight_source,
        DataSourceKind::Pseudo,
    )?;
    tree.explanation = Some(summary);
    Ok(tree)
}

#[allow(clippy::too_many_arguments)]
fn decide(
    node: &FrontierNode,
    pilot: &Pilot,
    teacher: &dyn Teacher,
    schema: &CovariateSchema,
    observed: &Dataset,
    criterion: SplitCriterion,
    config: &InductionConfig,
    denominator: f64,
    scheduled: &[u64],
) -> Result<Decision> {
    if !scheduled.contains(&node.id) {
        return Ok(Decision::Stop); // off the configured sampling path
    }
    if node_depth(node.id) >= config.stopping.max_interpretable_depth {
        return Ok(Decision::Stop);
    }
    if config.stopping.pxi_threshold >= 1.0 {
        return Ok(Decision::Stop);
    }
    let pxi = if denominator > 0.0 { pilot.weighted_reduction / denominator } else { 0.0 };
    if pxi < config.stopping.pxi_threshold {
        return Ok(Decision::Stop);
    }

    let params = StabilityParams {
        repeats: config.repeats,
        sample_size: config.sample_size,
        min_leaf: config.min_leaf,
        weighted_children: config.weighted_children,
        adaptive_sample_size: config.adaptive_sample_size,
        oscillation: config.oscillation.clone(),
        seed: config.seed,
        node_id: node.id,
    };
    let report = match measure_split_stability(teacher, schema, &node.region, criterion, &params) {
        Ok(r) => r,
        Err(DdtError::Uninformative) => return Ok(Decision::Stop),
        Err(e) => return Err(e),
    };
    let split = report.chosen.clone();
    let stability = Box::new(report);

    if config.stopping.min_region_observed > 0 {
        let (mut lcount, mut rcount) = (0usize, 0usize);
        for &i in &node.observed {
            if goes_left(&observed.rows[i], split.covariate_index, &split.cut) {
                lcount += 1;
            } else {
                rcount += 1;
            }
        }
        if lcount < config.stopping.min_region_observed
            || rcount < config.stopping.min_region_observed
        {
            return Ok(Decision::Stop);
        }
    }
    Ok(Decision::Split { split, stability })
}
