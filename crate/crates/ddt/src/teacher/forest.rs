//! Built-in bagged-tree ensemble teacher, so desk-scale distillation runs
//! need no external ML stack.

use serde::{Deserialize, Serialize};

use crate::criteria::SplitCriterion;
use crate::dataset::{Dataset, Provenance};
use crate::error::{DdtError, Result};
use crate::induction::{induce_odt, OdtConfig, OdtSubtree};
use crate::schema::{CovariateSchema, ResponseKind};
use crate::stability::derive_rng;
use crate::teacher::Teacher;

const FOREST_STREAM: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Covariate fraction each split may search.
    pub feature_fraction: f64,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { trees: 200, max_depth: 25, min_leaf: 1, feature_fraction: 1.0, seed: 0 }
    }
}

/// Deterministic-under-seed random forest: regression averages tree outputs,
/// classification takes the majority vote (ties to the smallest class index).
pub struct ForestTeacher {
    trees: Vec<OdtSubtree>,
    response: ResponseKind,
    importance: Vec<(String, f64)>,
    constant: Option<f64>,
    config: ForestConfig,
}

impl ForestTeacher {
    /// Impurity-decrease variable importance aggregated over the ensemble's
    /// own training fits, normalized to sum 1.
    pub fn variable_importance(&self) -> &[(String, f64)] {
        &self.importance
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }
}

pub fn fit_forest_teacher(
    schema: &CovariateSchema,
    data: &Dataset,
    config: &ForestConfig,
) -> Result<ForestTeacher> {
    if data.is_empty() {
        return Err(DdtError::Teacher("cannot fit a forest on empty data".into()));
    }
    if config.trees == 0 {
        return Err(DdtError::Teacher("forest needs at least one tree".into()));
    }
    let criterion = if schema.response.is_continuous() {
        SplitCriterion::Sse
    } else {
        SplitCriterion::Gini
    };

    if let ResponseKind::Categorical { .. } = &schema.response {
        let first = data.responses[0];
        if data.responses.iter().all(|y| *y == first) {
            // single-class data: constant teacher, noted in the descriptor
            return Ok(ForestTeacher {
                trees: Vec::new(),
                response: schema.response.clone(),
                importance: schema.covariates.iter().map(|c| (c.name.clone(), 0.0)).collect(),
                constant: Some(first),
                config: config.clone(),
            });
        }
    }

    let region = schema.full_region();
    let odt_cfg = OdtConfig {
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
        pseudo_sample_size: 0,
        feature_fraction: config.feature_fraction,
    };
    let n = data.len();
    let mut trees = Vec::with_capacity(config.trees);
    let mut acc = vec![0.0f64; schema.dim()];
    for t in 0..config.trees {
        let mut rng = derive_rng(config.seed, t as u64, FOREST_STREAM, 0);
        let mut rows = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let i = rand::Rng::random_range(&mut rng, 0..n);
            rows.push(data.rows[i].clone());
            ys.push(data.responses[i]);
        }
        let boot = Dataset { rows, responses: ys, provenance: Provenance::Observed };
        let tree = induce_odt(&boot, &region, criterion, &odt_cfg, &mut rng)?;
        accumulate_importance(&tree.root, n as f64, &mut acc);
        trees.push(tree);
    }
    let total: f64 = acc.iter().sum();
    let importance = schema
        .covariates
        .iter()
        .zip(&acc)
        .map(|(c, v)| (c.name.clone(), if total > 0.0 { v / total } else { 0.0 }))
        .collect();
    Ok(ForestTeacher {
        trees,
        response: schema.response.clone(),
        importance,
        constant: None,
        config: config.clone(),
    })
}

fn accumulate_importance(node: &crate::induction::OdtNode, n_root: f64, acc: &mut [f64]) {
    if let crate::induction::OdtNode::Split {
        covariate_index,
        samples,
        impurity_reduction,
        left,
        right,
        ..
    } = node
    {
        acc[*covariate_index] += (*samples as f64 / n_root) * impurity_reduction;
        accumulate_importance(left, n_root, acc);
        accumulate_importance(right, n_root, acc);
    }
}

impl Teacher for ForestTeacher {
    fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        if let Some(c) = self.constant {
            return Ok(vec![c; rows.len()]);
        }
        let n_classes = self.response.class_count();
        Ok(rows
            .iter()
            .map(|row| {
                if n_classes == 0 {
                    let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
                    sum / self.trees.len() as f64
                } else {
                    let mut votes = vec![0usize; n_classes];
                    for t in &self.trees {
                        votes[t.predict(row) as usize] += 1;
                    }
                    let mut best = 0usize;
                    for (i, v) in votes.iter().enumerate() {
                        if *v > votes[best] {
                            best = i;
                        }
                    }
                    best as f64
                }
            })
            .collect())
    }

    fn response_kind(&self) -> ResponseKind {
        self.response.clone()
    }

    fn descriptor(&self) -> String {
        match self.constant {
            Some(c) => format!("forest degenerated to constant {c} (single-class training data)"),
            None => format!(
                "forest: {} trees, depth<={}, min_leaf={}, features={}, seed={}",
                self.config.trees,
                self.config.max_depth,
                self.config.min_leaf,
                self.config.feature_fraction,
                self.config.seed
            ),
        }
    }
}
