//! Graphviz DOT rendition of a tree: one graph node per tree node, labeled
//! with the split rule, XI/PXI percentage, observed share, and leaf value.

use std::fmt::Write as _;

use crate::induction::{DdtTree, NodeKind};
use crate::schema::CovariateKind;
use crate::stump::SplitCut;

fn split_rule(tree: &DdtTree, covariate_index: usize, cut: &SplitCut) -> String {
    let cov = &tree.schema.covariates[covariate_index];
    match cut {
        SplitCut::Continuous { threshold } => format!("{} < {:.4}", cov.name, threshold),
        SplitCut::Categorical { level } => match &cov.kind {
            CovariateKind::Categorical { levels } => {
                format!("{} = {}", cov.name, levels[*level as usize])
            }
            _ => format!("{} = level {}", cov.name, level),
        },
    }
}

/// Deterministic DOT text: nodes and edges ordered by id, so identical trees
/// serialize to identical bytes.
pub fn export_dot(tree: &DdtTree) -> String {
    let mut out = String::from("digraph ddt {\n  node [shape=box, fontname=\"Helvetica\"];\n");
    let summary = tree.explanation.as_ref();
    for node in tree.nodes.values() {
        let mut label = String::new();
        match &node.kind {
            NodeKind::Interpretable { split, .. } => {
                let _ = write!(label, "#{} {}", node.id, split_rule(tree, split.covariate_index, &split.cut));
                if let Some(s) = summary {
                    if let Some(xi) = s.xi.get(&node.id) {
                        let _ = write!(label, "\\nXI {:.1}%", xi * 100.0);
                    }
                }
            }
            NodeKind::Predictive { subtree } => {
                let _ = write!(label, "#{} predictive ({} splits)", node.id, subtree.root.split_count());
                if let Some(s) = summary {
                    if let Some(pxi) = s.pxi.get(&node.id) {
                        let _ = write!(label, "\\nPXI {:.1}%", pxi * 100.0);
                    }
                }
            }
            NodeKind::Leaf { value } => {
                let _ = write!(label, "#{} leaf = {:.4}", node.id, value);
                if let Some(s) = summary {
                    if let Some(pxi) = s.pxi.get(&node.id) {
                        let _ = write!(label, "\\nPXI {:.1}%", pxi * 100.0);
                    }
                }
            }
        }
        if let Some(s) = summary {
            if let Some(pct) = s.observed_percent.get(&node.id) {
                let _ = write!(label, "\\nobs {:.1}%", pct * 100.0);
            }
            if s.weak_support.contains(&node.id) {
                label.push_str("\\nweak support (<2%)");
            }
        }
        let _ = writeln!(out, "  n{} [label=\"{}\"];", node.id, label);
    }
    for node in tree.nodes.values() {
        if matches!(node.kind, NodeKind::Interpretable { .. }) {
            let _ = writeln!(out, "  n{} -> n{} [label=\"yes\"];", node.id, 2 * node.id);
            let _ = writeln!(out, "  n{} -> n{} [label=\"no\"];", node.id, 2 * node.id + 1);
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::SplitCriterion;
    use crate::induction::DdtNode;
    use crate::schema::{Covariate, CovariateKind, CovariateSchema, ResponseKind};

    #[test]
    fn single_leaf_tree_renders_one_node() {
        let schema = CovariateSchema::new(
            vec![Covariate { name: "x".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 1.0 } }],
            ResponseKind::Continuous,
        )
        .unwrap();
        let region = schema.full_region();
        let tree = DdtTree {
            format_version: 1,
            schema,
            criterion: SplitCriterion::Sse,
            seed: 0,
            nodes: [(
                1u64,
                DdtNode {
                    id: 1,
                    kind: NodeKind::Leaf { value: 3.5 },
                    region,
                    observed_count: 0,
                    pseudo_eval_count: 0,
                    pseudo_impurity: 0.0,
                },
            )]
            .into_iter()
            .collect(),
            observed_total: 0,
            eval_sample_size: 0,
            explanation: None,
        };
        let dot = export_dot(&tree);
        assert_eq!(dot.matches("label=").count(), 1);
        assert!(dot.contains("leaf = 3.5"));
        assert!(!dot.contains("->"));
    }
}
