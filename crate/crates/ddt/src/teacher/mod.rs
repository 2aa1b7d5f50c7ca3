//! The black-box model being distilled, behind one batch-prediction
//! interface, plus the built-in reference teachers.
//!
//! Teachers must be deterministic within a session so that repeated
//! Monte-Carlo fits measure sampling variance only.

pub mod external;
pub mod forest;

use crate::error::{DdtError, Result};
use crate::schema::{CovariateSchema, ResponseKind};

pub trait Teacher: Send + Sync {
    /// One response per row, order preserving. Categorical responses are
    /// class indices.
    fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>>;

    fn response_kind(&self) -> ResponseKind;

    /// Text identity used in reports.
    fn descriptor(&self) -> String;
}

/// Unary step teacher on [a, b]: `left` below the cut, `right` at and above
/// it. Its unique SSE-optimal split is the cut (when left != right).
#[derive(Debug, Clone)]
pub struct StepTeacher {
    pub a: f64,
    pub b: f64,
    pub cut: f64,
    pub left: f64,
    pub right: f64,
}

pub fn make_step_teacher(a: f64, b: f64, cut: f64, left: f64, right: f64) -> Result<StepTeacher> {
    if !(a < cut && cut < b) {
        return Err(DdtError::Teacher(format!("cut {cut} is outside ({a}, {b})")));
    }
    Ok(StepTeacher { a, b, cut, left, right })
}

impl Teacher for StepTeacher {
    fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter()
            .map(|r| {
                let x = *r.first().ok_or_else(|| DdtError::Teacher("empty row".into()))?;
                Ok(if x < self.cut { self.left } else { self.right })
            })
            .collect()
    }

    fn response_kind(&self) -> ResponseKind {
        ResponseKind::Continuous
    }

    fn descriptor(&self) -> String {
        format!("step[{},{}] cut={} values=({},{})", self.a, self.b, self.cut, self.left, self.right)
    }
}

/// Nearest-grid-point lookup teacher over a labeled dataset: Euclidean
/// distance on min-max-normalized continuous coordinates, exact match on
/// categorical ones. Distance ties resolve to the first grid row in storage
/// order.
pub struct GridTeacher {
    schema: CovariateSchema,
    rows: Vec<Vec<f64>>,
    responses: Vec<f64>,
    scales: Vec<Option<(f64, f64)>>, // (lo, 1/(hi-lo)) for continuous covariates
}

pub fn make_grid_teacher(schema: &CovariateSchema, grid: &crate::dataset::Dataset) -> Result<GridTeacher> {
    if grid.is_empty() {
        return Err(DdtError::Teacher("empty grid".into()));
    }
    let scales = schema
        .covariates
        .iter()
        .map(|c| match &c.kind {
            crate::schema::CovariateKind::Continuous { lo, hi } => Some((*lo, 1.0 / (hi - lo))),
            crate::schema::CovariateKind::Categorical { .. } => None,
        })
        .collect();
    Ok(GridTeacher {
        schema: schema.clone(),
        rows: grid.rows.clone(),
        responses: grid.responses.clone(),
        scales,
    })
}

impl Teacher for GridTeacher {
    fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter()
            .map(|query| {
                let mut best: Option<(f64, usize)> = None;
                'grid: for (i, row) in self.rows.iter().enumerate() {
                    let mut d = 0.0;
                    for (k, scale) in self.scales.iter().enumerate() {
                        match scale {
                            Some((lo, inv)) => {
                                let z = (query[k] - lo) * inv - (row[k] - lo) * inv;
                                d += z * z;
                            }
                            None => {
                                if query[k] != row[k] {
                                    continue 'grid;
                                }
                            }
                        }
                    }
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, i));
                    }
                }
                let (_, i) = best.ok_or_else(|| {
                    DdtError::Teacher("no grid row matches the categorical coordinates".into())
                })?;
                Ok(self.responses[i])
            })
            .collect()
    }

    fn response_kind(&self) -> ResponseKind {
        self.schema.response.clone()
    }

    fn descriptor(&self) -> String {
        format!("grid lookup over {} points", self.rows.len())
    }
}

/// Teacher that always answers the same value.
#[derive(Debug, Clone)]
pub struct ConstantTeacher {
    pub value: f64,
    pub kind: ResponseKind,
}

impl Teacher for ConstantTeacher {
    fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(vec![self.value; rows.len()])
    }

    fn response_kind(&self) -> ResponseKind {
        self.kind.clone()
    }

    fn descriptor(&self) -> String {
        format!("constant {}", self.value)
    }
}

/// Wrap any deterministic function of a row as a teacher.
pub struct FnTeacher<F: Fn(&[f64]) -> f64 + Send + Sync> {
    pub f: F,
    pub kind: ResponseKind,
    pub name: String,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnTeacher<F> {
    pub fn new(name: impl Into<String>, kind: ResponseKind, f: F) -> Self {
        Self { f, kind, name: name.into() }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Teacher for FnTeacher<F> {
    fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(rows.iter().map(|r| (self.f)(r)).collect())
    }

    fn response_kind(&self) -> ResponseKind {
        self.kind.clone()
    }

    fn descriptor(&self) -> String {
        self.name.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::sim2d_grid;

    #[test]
    fn step_teacher_routes_boundary_right() {
        let t = make_step_teacher(0.0, 2.0, 1.0, 0.0, 10.0).unwrap();
        assert_eq!(
            t.predict_batch(&[vec![0.5], vec![1.5], vec![1.0]]).unwrap(),
            vec![0.0, 10.0, 10.0]
        );
        assert_eq!(t.predict_batch(&[]).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn step_teacher_rejects_cut_outside_domain() {
        assert!(make_step_teacher(0.0, 2.0, 3.0, 0.0, 10.0).is_err());
        assert!(make_step_teacher(0.0, 2.0, 0.0, 0.0, 10.0).is_err());
    }

    #[test]
    fn constant_step_teacher_is_allowed() {
        let t = make_step_teacher(0.0, 2.0, 1.0, 5.0, 5.0).unwrap();
        assert_eq!(t.predict_batch(&[vec![0.1], vec![1.9]]).unwrap(), vec![5.0, 5.0]);
    }

    #[test]
    fn grid_teacher_exact_and_midpoint_queries() {
        let (schema, grid) = sim2d_grid();
        let t = make_grid_teacher(&schema, &grid).unwrap();
        // exact grid row
        let y = t.predict_batch(&[grid.rows[77].clone()]).unwrap()[0];
        assert_eq!(y, grid.responses[77]);
        // midpoint between rows (0.0,0.0) and (0.0,0.2): tie resolves to the
        // first row in grid order
        let y = t.predict_batch(&[vec![0.0, 0.1]]).unwrap()[0];
        assert_eq!(y, grid.responses[0]);
        // anywhere in the domain gives a finite response
        let y = t.predict_batch(&[vec![3.17, 9.7]]).unwrap()[0];
        assert!(y.is_finite());
    }
}
