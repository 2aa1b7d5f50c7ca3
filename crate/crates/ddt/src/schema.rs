//! Covariate schemas, sampling regions, and sampling paths.
//!
//! A row is a `Vec<f64>` with one entry per covariate; categorical values are
//! stored as the index of their level in the schema (as an exact small float).
//! Categorical responses are likewise class indices.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{DdtError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateKind {
    Continuous { lo: f64, hi: f64 },
    Categorical { levels: Vec<String> },
}

impl CovariateKind {
    pub fn is_continuous(&self) -> bool {
        matches!(self, CovariateKind::Continuous { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariate {
    pub name: String,
    pub kind: CovariateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Continuous,
    Categorical { classes: Vec<String> },
}

impl ResponseKind {
    pub fn is_continuous(&self) -> bool {
        matches!(self, ResponseKind::Continuous)
    }

    pub fn class_count(&self) -> usize {
        match self {
            ResponseKind::Continuous => 0,
            ResponseKind::Categorical { classes } => classes.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSchema {
    pub covariates: Vec<Covariate>,
    pub response: ResponseKind,
}

impl CovariateSchema {
    pub fn new(covariates: Vec<Covariate>, response: ResponseKind) -> Result<Self> {
        if covariates.is_empty() {
            return Err(DdtError::Schema("schema has no covariates".into()));
        }
        let mut names = BTreeSet::new();
        for c in &covariates {
            if !names.insert(c.name.clone()) {
                return Err(DdtError::Schema(format!("duplicate covariate name `{}`", c.name)));
            }
            match &c.kind {
                CovariateKind::Continuous { lo, hi } => {
                    if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                        return Err(DdtError::Schema(format!(
                            "covariate `{}` needs finite lo < hi, got [{lo}, {hi}]",
                            c.name
                        )));
                    }
                }
                CovariateKind::Categorical { levels } => {
                    if levels.len() < 2 {
                        return Err(DdtError::Schema(format!(
                            "categorical covariate `{}` needs at least 2 levels",
                            c.name
                        )));
                    }
                    let distinct: BTreeSet<_> = levels.iter().collect();
                    if distinct.len() != levels.len() {
                        return Err(DdtError::Schema(format!(
                            "categorical covariate `{}` has duplicate levels",
                            c.name
                        )));
                    }
                }
            }
        }
        if let ResponseKind::Categorical { classes } = &response {
            if classes.len() < 2 {
                return Err(DdtError::Schema("categorical response needs at least 2 classes".into()));
            }
        }
        Ok(Self { covariates, response })
    }

    pub fn dim(&self) -> usize {
        self.covariates.len()
    }

    /// Region covering the whole schema domain (topmost continuous bounds are closed).
    pub fn full_region(&self) -> Region {
        let bounds = self
            .covariates
            .iter()
            .map(|c| match &c.kind {
                CovariateKind::Continuous { lo, hi } => Restriction::Interval {
                    lo: *lo,
                    hi: *hi,
                    hi_closed: true,
                },
                CovariateKind::Categorical { levels } => {
                    Restriction::Levels((0..levels.len() as u32).collect())
                }
            })
            .collect();
        Region { bounds }
    }

    pub fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim() {
            return Err(DdtError::Schema(format!(
                "row has {} values, schema has {} covariates",
                row.len(),
                self.dim()
            )));
        }
        for (v, c) in row.iter().zip(&self.covariates) {
            match &c.kind {
                CovariateKind::Continuous { lo, hi } => {
                    if !(v.is_finite() && *v >= *lo && *v <= *hi) {
                        return Err(DdtError::Schema(format!(
                            "value {v} outside domain [{lo}, {hi}] of `{}`",
                            c.name
                        )));
                    }
                }
                CovariateKind::Categorical { levels } => {
                    if v.fract() != 0.0 || *v < 0.0 || *v >= levels.len() as f64 {
                        return Err(DdtError::Schema(format!(
                            "value {v} is not a level index of `{}`",
                            c.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-covariate restriction inside a [`Region`].
///
/// Continuous membership is `lo <= v < hi`, except the topmost bound of the
/// schema domain which stays closed so the full domain is covered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    Interval { lo: f64, hi: f64, hi_closed: bool },
    Levels(BTreeSet<u32>),
}

impl Restriction {
    pub fn contains(&self, v: f64) -> bool {
        match self {
            Restriction::Interval { lo, hi, hi_closed } => {
                v >= *lo && (v < *hi || (*hi_closed && v == *hi))
            }
            Restriction::Levels(set) => {
                v.fract() == 0.0 && v >= 0.0 && set.contains(&(v as u32))
            }
        }
    }

    fn contains_restriction(&self, other: &Restriction) -> bool {
        match (self, other) {
            (
                Restriction::Interval { lo: a, hi: b, hi_closed: bc },
                Restriction::Interval { lo: c, hi: d, hi_closed: dc },
            ) => a <= c && (d < b || (d == b && (*bc || !*dc))),
            (Restriction::Levels(a), Restriction::Levels(b)) => b.is_subset(a),
            _ => false,
        }
    }
}

/// The sampling region of a node: the covariate subdomain its ancestor splits induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub bounds: Vec<Restriction>,
}

impl Region {
    /// True iff every coordinate satisfies the region's restriction.
    pub fn contains(&self, row: &[f64]) -> Result<bool> {
        if row.len() != self.bounds.len() {
            return Err(DdtError::Region(format!(
                "row has {} values, region has {} bounds",
                row.len(),
                self.bounds.len()
            )));
        }
        Ok(row.iter().zip(&self.bounds).all(|(v, b)| b.contains(*v)))
    }

    /// True iff `other` is contained in `self` on every covariate.
    pub fn contains_region(&self, other: &Region) -> bool {
        self.bounds.len() == other.bounds.len()
            && self
                .bounds
                .iter()
                .zip(&other.bounds)
                .all(|(a, b)| a.contains_restriction(b))
    }

    /// Width `hi - lo` of a continuous covariate's interval in this region.
    pub fn interval_width(&self, covariate: usize) -> Result<f64> {
        match &self.bounds[covariate] {
            Restriction::Interval { lo, hi, .. } => Ok(hi - lo),
            Restriction::Levels(_) => Err(DdtError::Region(format!(
                "covariate {covariate} is categorical, it has no interval width"
            ))),
        }
    }

    /// Split a continuous covariate at `cut`: ([lo, cut), [cut, hi)). The
    /// right child inherits the parent's closedness of `hi`.
    pub fn split_interval(&self, covariate: usize, cut: f64) -> Result<(Region, Region)> {
        match &self.bounds[covariate] {
            Restriction::Interval { lo, hi, hi_closed } => {
                if !(cut > *lo && cut < *hi) {
                    return Err(DdtError::Region(format!(
                        "cut {cut} is not strictly inside [{lo}, {hi}]"
                    )));
                }
                let mut left = self.clone();
                let mut right = self.clone();
                left.bounds[covariate] = Restriction::Interval { lo: *lo, hi: cut, hi_closed: false };
                right.bounds[covariate] =
                    Restriction::Interval { lo: cut, hi: *hi, hi_closed: *hi_closed };
                Ok((left, right))
            }
            Restriction::Levels(_) => Err(DdtError::Region(format!(
                "covariate {covariate} is categorical, cannot apply a continuous cut"
            ))),
        }
    }

    /// One-vs-rest split of a categorical covariate: ({level}, subset \ {level}).
    pub fn split_levels(&self, covariate: usize, level: u32) -> Result<(Region, Region)> {
        match &self.bounds[covariate] {
            Restriction::Levels(set) => {
                if !set.contains(&level) {
                    return Err(DdtError::Region(format!(
                        "level {level} is not in the region subset"
                    )));
                }
                if set.len() < 2 {
                    return Err(DdtError::Region(
                        "cannot split a single-level subset".into(),
                    ));
                }
                let mut left = self.clone();
                let mut right = self.clone();
                left.bounds[covariate] = Restriction::Levels([level].into_iter().collect());
                right.bounds[covariate] =
                    Restriction::Levels(set.iter().copied().filter(|l| *l != level).collect());
                Ok((left, right))
            }
            Restriction::Interval { .. } => Err(DdtError::Region(format!(
                "covariate {covariate} is continuous, cannot apply a level split"
            ))),
        }
    }
}

/// A series of strictly nested sampling regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPath {
    regions: Vec<Region>,
}

impl SamplingPath {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        if regions.is_empty() {
            return Err(DdtError::Region("a sampling path needs at least one region".into()));
        }
        for w in regions.windows(2) {
            if !(w[0].contains_region(&w[1]) && w[0] != w[1]) {
                return Err(DdtError::Region("sampling path regions are not strictly nested".into()));
            }
        }
        Ok(Self { regions })
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// Two paths intersect if a region of one contains any region of the other.
    pub fn intersects(&self, other: &SamplingPath) -> bool {
        self.regions.iter().any(|a| {
            other
                .regions
                .iter()
                .any(|b| a.contains_region(b) || b.contains_region(a))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_2d() -> CovariateSchema {
        CovariateSchema::new(
            vec![
                Covariate {
                    name: "x1".into(),
                    kind: CovariateKind::Continuous { lo: 0.0, hi: 2.0 },
                },
                Covariate {
                    name: "color".into(),
                    kind: CovariateKind::Categorical {
                        levels: vec!["A".into(), "B".into(), "C".into()],
                    },
                },
            ],
            ResponseKind::Continuous,
        )
        .unwrap()
    }

    #[test]
    fn full_region_contains_domain_rows() {
        let schema = schema_2d();
        let region = schema.full_region();
        assert!(region.contains(&[0.0, 0.0]).unwrap());
        assert!(region.contains(&[2.0, 2.0]).unwrap()); // topmost hi is inclusive
        assert!(!region.contains(&[2.1, 0.0]).unwrap());
    }

    #[test]
    fn interval_membership_is_half_open() {
        let region = Region {
            bounds: vec![
                Restriction::Interval { lo: 0.0, hi: 1.0, hi_closed: false },
                Restriction::Levels([0u32].into_iter().collect()),
            ],
        };
        assert!(region.contains(&[0.0, 0.0]).unwrap());
        assert!(!region.contains(&[1.0, 0.0]).unwrap());
        // level B (index 1) not in subset {A}
        assert!(!region.contains(&[0.5, 1.0]).unwrap());
    }

    #[test]
    fn dimension_mismatch_errors() {
        let schema = schema_2d();
        assert!(schema.full_region().contains(&[0.5]).is_err());
    }

    #[test]
    fn schema_invariants_enforced() {
        assert!(CovariateSchema::new(
            vec![Covariate {
                name: "x".into(),
                kind: CovariateKind::Continuous { lo: 1.0, hi: 1.0 },
            }],
            ResponseKind::Continuous,
        )
        .is_err());
        assert!(CovariateSchema::new(
            vec![Covariate {
                name: "c".into(),
                kind: CovariateKind::Categorical { levels: vec!["A".into()] },
            }],
            ResponseKind::Continuous,
        )
        .is_err());
        assert!(CovariateSchema::new(
            vec![
                Covariate {
                    name: "x".into(),
                    kind: CovariateKind::Continuous { lo: 0.0, hi: 1.0 },
                },
                Covariate {
                    name: "x".into(),
                    kind: CovariateKind::Continuous { lo: 0.0, hi: 1.0 },
                },
            ],
            ResponseKind::Continuous,
        )
        .is_err());
    }

    #[test]
    fn split_cases_from_the_contract() {
        let schema = schema_2d();
        let region = schema.full_region();
        let (l, r) = region.split_interval(0, 1.0).unwrap();
        assert!(l.contains(&[0.999, 0.0]).unwrap() && !l.contains(&[1.0, 0.0]).unwrap());
        assert!(r.contains(&[1.0, 0.0]).unwrap() && r.contains(&[2.0, 0.0]).unwrap());
        assert!(region.split_interval(0, 3.0).is_err());
        assert!(region.split_interval(0, 0.0).is_err());

        let (l, r) = region.split_levels(1, 0).unwrap();
        assert!(l.contains(&[0.5, 0.0]).unwrap() && !l.contains(&[0.5, 1.0]).unwrap());
        assert!(r.contains(&[0.5, 1.0]).unwrap() && r.contains(&[0.5, 2.0]).unwrap());
        assert!(region.split_levels(1, 9).is_err());
    }

    // partition property: children are disjoint and cover the parent
    #[test]
    fn split_partitions_the_parent() {
        use rand::Rng;
        use rand::SeedableRng;
        let schema = schema_2d();
        let parent = schema.full_region();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let row = vec![rng.random_range(0.0..=2.0), rng.random_range(0..3) as f64];
            for (l, r) in [
                parent.split_interval(0, 0.8).unwrap(),
                parent.split_levels(1, 1).unwrap(),
            ] {
                let in_l = l.contains(&row).unwrap();
                let in_r = r.contains(&row).unwrap();
                assert!(in_l ^ in_r, "row {row:?} must be in exactly one child");
                assert!(parent.contains(&row).unwrap());
            }
        }
    }

    #[test]
    fn nested_path_accepts_and_rejects() {
        let schema = schema_2d();
        let outer = schema.full_region();
        let mut inner = outer.clone();
        inner.bounds[0] = Restriction::Interval { lo: 0.0, hi: 1.0, hi_closed: false };
        assert!(SamplingPath::new(vec![outer.clone(), inner.clone()]).is_ok());
        assert!(SamplingPath::new(vec![inner.clone(), outer.clone()]).is_err());
        assert!(SamplingPath::new(vec![outer.clone(), outer]).is_err());
    }
}
