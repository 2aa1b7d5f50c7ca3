//! Explanation indices: per-node XI and PXI, path XI, variable importance,
//! and observed-data support annotations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::criteria::node_impurity;
use crate::dataset::Dataset;
use crate::error::{DdtError, Result};
use crate::induction::{node_depth, DdtTree, NodeKind, OdtNode};
use crate::stump::goes_left;

/// Nodes with less than this share of the observed data are flagged as
/// weakly supported.
pub const WEAK_SUPPORT_THRESHOLD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSourceKind {
    Observed,
    Pseudo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSummary {
    pub weight_source: DataSourceKind,
    pub impurity_source: DataSourceKind,
    /// XI per interpretable node.
    pub xi: BTreeMap<u64, f64>,
    /// PXI per predictive or leaf node.
    pub pxi: BTreeMap<u64, f64>,
    /// XI_{1,j}: path XI from the root to each frontier node.
    pub root_path_xi: BTreeMap<u64, f64>,
    /// (interpreted, predictive) share pair per frontier node.
    pub interpretation_degree: BTreeMap<u64, (f64, f64)>,
    /// Per-covariate impurity-decrease weights, normalized to sum 1.
    pub variable_importance: Vec<(String, f64)>,
    /// Fraction of the observed dataset in each node.
    pub observed_percent: BTreeMap<u64, f64>,
    /// Nodes whose observed share falls below the weak-support threshold.
    pub weak_support: Vec<u64>,
    /// True when the tree carries no impurity reduction (single leaf).
    pub degenerate: bool,
}

fn impurity(ys: &[f64], n_classes: usize, criterion: crate::criteria::SplitCriterion) -> f64 {
    if ys.is_empty() {
        0.0
    } else {
        node_impurity(ys, n_classes, criterion).unwrap_or(0.0)
    }
}

/// Compute XI_i = (n_i/n) Delta_S_i / Delta_DDT for interpretable splits and
/// PXI_j = (n_j/n) Delta_T_j / Delta_DDT for predictive subtrees.
///
/// `weight_source` picks where the n_i/n weights come from (stored observed
/// counts or the pseudo evaluation routing); `impurity_source` picks the rows
/// the impurity reductions are computed on. An interpretable node left empty
/// by observed impurities is an error instructing the pseudo source.
pub fn compute_indices(
    tree: &DdtTree,
    observed: Option<&Dataset>,
    pseudo_eval: Option<&Dataset>,
    weight_source: DataSourceKind,
    impurity_source: DataSourceKind,
) -> Result<ExplanationSummary> {
    let imp_data = match impurity_source {
        DataSourceKind::Observed => observed.ok_or_else(|| {
            DdtError::Explanation("observed impurity source requested but no observed data given".into())
        })?,
        DataSourceKind::Pseudo => pseudo_eval.ok_or_else(|| {
            DdtError::Explanation("pseudo impurity source requested but no evaluation sample given".into())
        })?,
    };
    let n_classes = tree.schema.response.class_count();
    let criterion = tree.criterion;

    // route the impurity rows: indices per tree node
    let mut per_node: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, row) in imp_data.rows.iter().enumerate() {
        let mut id = 1u64;
        loop {
            per_node.entry(id).or_default().push(i);
            match &tree.nodes[&id].kind {
                NodeKind::Interpretable { split, .. } => {
                    id = if goes_left(row, split.covariate_index, &split.cut) {
                        2 * id
                    } else {
                        2 * id + 1
                    };
                }
                _ => break,
            }
        }
    }
    let ys_of = |ids: &[usize]| -> Vec<f64> { ids.iter().map(|&i| imp_data.responses[i]).collect() };
    let empty: Vec<usize> = Vec::new();

    let total_weight_rows = match weight_source {
        DataSourceKind::Observed => tree.observed_total,
        DataSourceKind::Pseudo => tree.eval_sample_size,
    };
    let weight_of = |id: u64| -> f64 {
        if total_weight_rows == 0 {
            return 0.0;
        }
        let node = &tree.nodes[&id];
        let count = match weight_source {
            DataSourceKind::Observed => node.observed_count,
            DataSourceKind::Pseudo => node.pseudo_eval_count,
        };
        count as f64 / total_weight_rows as f64
    };

    let mut raw: BTreeMap<u64, f64> = BTreeMap::new(); // id -> w * Delta
    let mut importance_acc: Vec<f64> = vec![0.0; tree.schema.dim()];
    let n_total = imp_data.len() as f64;

    for node in tree.nodes.values() {
        let rows = per_node.get(&node.id).unwrap_or(&empty);
        match &node.kind {
            NodeKind::Interpretable { split, .. } => {
                if rows.is_empty() && impurity_source == DataSourceKind::Observed {
                    return Err(DdtError::Explanation(format!(
                        "interpretable node {} holds no observed rows; switch impurity_source to pseudo",
                        node.id
                    )));
                }
                let (left, right) = (
                    per_node.get(&(2 * node.id)).unwrap_or(&empty),
                    per_node.get(&(2 * node.id + 1)).unwrap_or(&empty),
                );
                let delta = if rows.is_empty() {
                    0.0
                } else {
                    let n = rows.len() as f64;
                    (impurity(&ys_of(rows), n_classes, criterion)
                        - (left.len() as f64 / n) * impurity(&ys_of(left), n_classes, criterion)
                        - (right.len() as f64 / n) * impurity(&ys_of(right), n_classes, criterion))
                    .max(0.0)
                };
                raw.insert(node.id, weight_of(node.id) * delta);
                importance_acc[split.covariate_index] += (rows.len() as f64 / n_total) * delta;
            }
            NodeKind::Leaf { .. } => {
                raw.insert(node.id, 0.0);
            }
            NodeKind::Predictive { subtree } => {
                let delta = subtree_reduction(
                    &subtree.root,
                    rows,
                    imp_data,
                    n_classes,
                    criterion,
                    &mut importance_acc,
                    n_total,
                );
                raw.insert(node.id, weight_of(node.id) * delta);
            }
        }
    }

    let interpretable: Vec<u64> = tree.interpretable_ids();
    let frontier: Vec<u64> = tree.frontier_ids();
    let delta_ddt: f64 = raw.values().sum();
    let degenerate = delta_ddt <= 0.0;

    let mut xi = BTreeMap::new();
    let mut pxi = BTreeMap::new();
    for id in &interpretable {
        xi.insert(*id, if degenerate { 0.0 } else { raw[id] / delta_ddt });
    }
    for id in &frontier {
        pxi.insert(*id, if degenerate { 0.0 } else { raw[id] / delta_ddt });
    }

    let mut root_path_xi = BTreeMap::new();
    let mut interpretation_degree = BTreeMap::new();
    for id in &frontier {
        let mut sum = 0.0;
        let mut cur = *id;
        while cur > 1 {
            cur /= 2;
            sum += xi.get(&cur).copied().unwrap_or(0.0);
        }
        root_path_xi.insert(*id, sum);
        let denom = sum + pxi[id];
        if denom > 0.0 {
            interpretation_degree.insert(*id, (sum / denom, pxi[id] / denom));
        }
    }

    let imp_total: f64 = importance_acc.iter().sum();
    let variable_importance = tree
        .schema
        .covariates
        .iter()
        .zip(&importance_acc)
        .map(|(c, v)| (c.name.clone(), if imp_total > 0.0 { v / imp_total } else { 0.0 }))
        .collect();

    let mut observed_percent = BTreeMap::new();
    let mut weak_support = Vec::new();
    for node in tree.nodes.values() {
        let pct = if tree.observed_total == 0 {
            0.0
        } else {
            node.observed_count as f64 / tree.observed_total as f64
        };
        observed_percent.insert(node.id, pct);
        if pct < WEAK_SUPPORT_THRESHOLD {
            weak_support.push(node.id);
        }
    }

    Ok(ExplanationSummary {
        weight_source,
        impurity_source,
        xi,
        pxi,
        root_path_xi,
        interpretation_degree,
        variable_importance,
        observed_percent,
        weak_support,
        degenerate,
    })
}

/// Weighted impurity reduction of a fitted subtree over the routed rows,
/// accumulating per-covariate importance for its internal splits.
fn subtree_reduction(
    node: &OdtNode,
    rows: &[usize],
    data: &Dataset,
    n_classes: usize,
    criterion: crate::criteria::SplitCriterion,
    importance_acc: &mut [f64],
    n_total: f64,
) -> f64 {
    match node {
        OdtNode::Leaf { .. } => 0.0,
        OdtNode::Split { covariate_index, cut, left, right, .. } => {
            if rows.is_empty() {
                return 0.0;
            }
            let (mut lrows, mut rrows) = (Vec::new(), Vec::new());
            for &i in rows {
                if goes_left(&data.rows[i], *covariate_index, cut) {
                    lrows.push(i);
                } else {
                    rrows.push(i);
                }
            }
            let ys: Vec<f64> = rows.iter().map(|&i| data.responses[i]).collect();
            let lys: Vec<f64> = lrows.iter().map(|&i| data.responses[i]).collect();
            let rys: Vec<f64> = rrows.iter().map(|&i| data.responses[i]).collect();
            let n = rows.len() as f64;
            let local = (impurity(&ys, n_classes, criterion)
                - (lys.len() as f64 / n) * impurity(&lys, n_classes, criterion)
                - (rys.len() as f64 / n) * impurity(&rys, n_classes, criterion))
            .max(0.0);
            importance_acc[*covariate_index] += (n / n_total) * local;
            let deeper = (lrows.len() as f64 / n)
                * subtree_reduction(left, &lrows, data, n_classes, criterion, importance_acc, n_total)
                + (rrows.len() as f64 / n)
                    * subtree_reduction(right, &rrows, data, n_classes, criterion, importance_acc, n_total);
            local + deeper
        }
    }
}

/// Path explanation index: the XI sum over the nodes from `from_node` down to
/// the parent of `to_node`. Every node on that stretch must be interpretable.
pub fn path_xi(summary: &ExplanationSummary, from_node: u64, to_node: u64) -> Result<f64> {
    if from_node == to_node {
        return Err(DdtError::Explanation("path needs distinct endpoints".into()));
    }
    let (df, dt) = (node_depth(from_node), node_depth(to_node));
    if dt <= df || (to_node >> (dt - df)) != from_node {
        return Err(DdtError::Explanation(format!(
            "{to_node} is not a descendant of {from_node}"
        )));
    }
    let mut sum = 0.0;
    let mut cur = to_node;
    while cur != from_node {
        cur /= 2;
        match summary.xi.get(&cur) {
            Some(v) => sum += v,
            None => {
                return Err(DdtError::Explanation(format!(
                    "node {cur} on the path is not interpretable"
                )))
            }
        }
    }
    Ok(sum)
}

/// Per-covariate impurity-decrease weights over every split in the tree
/// (interpretable and inside predictive subtrees), computed on `data` and
/// normalized to sum 1. A single-leaf tree yields all zeros.
pub fn variable_importance(tree: &DdtTree, data: &Dataset) -> Result<Vec<(String, f64)>> {
    let summary = compute_indices(
        tree,
        Some(data),
        Some(data),
        DataSourceKind::Pseudo,
        match data.provenance {
            crate::dataset::Provenance::Observed => DataSourceKind::Observed,
            crate::dataset::Provenance::Pseudo => DataSourceKind::Pseudo,
        },
    )?;
    Ok(summary.variable_importance)
}
