//! Datasets, CSV ingestion with schema inference, and uniform region sampling.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DdtError, Result};
use crate::schema::{Covariate, CovariateKind, CovariateSchema, Region, ResponseKind, Restriction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    Pseudo,
}

/// Covariate rows plus responses. Pseudo datasets are the distilled knowledge
/// sampled in a region and labeled by a teacher; observed datasets come from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(
        schema: &CovariateSchema,
        rows: Vec<Vec<f64>>,
        responses: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if rows.len() != responses.len() {
            return Err(DdtError::Data(format!(
                "{} rows but {} responses",
                rows.len(),
                responses.len()
            )));
        }
        for row in &rows {
            schema.check_row(row)?;
        }
        if let ResponseKind::Categorical { classes } = &schema.response {
            for y in &responses {
                if y.fract() != 0.0 || *y < 0.0 || *y >= classes.len() as f64 {
                    return Err(DdtError::Data(format!("response {y} is not a class index")));
                }
            }
        } else if let Some(y) = responses.iter().find(|y| !y.is_finite()) {
            return Err(DdtError::Data(format!("non-finite response {y}")));
        }
        Ok(Self { rows, responses, provenance })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Fraction by which continuous domains inferred from data are widened on
    /// each side (0 keeps the observed hull).
    pub domain_margin: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { domain_margin: 0.0 }
    }
}

/// Load a delimited text file (comma, UTF-8, header row). The last column is
/// the response. Columns where every value parses as a number are continuous;
/// the rest are categorical with levels in order of first appearance.
pub fn load_dataset(
    path: impl AsRef<Path>,
    schema_hint: Option<&CovariateSchema>,
) -> Result<(CovariateSchema, Dataset)> {
    load_dataset_with(path, schema_hint, &LoadOptions::default())
}

pub fn load_dataset_with(
    path: impl AsRef<Path>,
    schema_hint: Option<&CovariateSchema>,
    opts: &LoadOptions,
) -> Result<(CovariateSchema, Dataset)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| DdtError::Data(format!("cannot open {}: {e}", path.as_ref().display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DdtError::Data(format!("bad header row: {e}")))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if headers.len() < 2 {
        return Err(DdtError::Data("need at least one covariate column and a response column".into()));
    }
    let mut cells: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DdtError::Data(format!("malformed row {}: {e}", i + 2)))?;
        if record.len() != headers.len() {
            return Err(DdtError::Data(format!(
                "malformed row {}: {} fields, expected {}",
                i + 2,
                record.len(),
                headers.len()
            )));
        }
        cells.push(record.iter().map(|s| s.to_string()).collect());
    }
    if cells.is_empty() {
        return Err(DdtError::Data("file has a header but no data rows".into()));
    }

    match schema_hint {
        Some(schema) => {
            let dataset = parse_with_schema(&headers, &cells, schema)?;
            Ok((schema.clone(), dataset))
        }
        None => infer_schema(&headers, &cells, opts),
    }
}

fn column_is_numeric(cells: &[Vec<String>], col: usize) -> bool {
    cells.iter().all(|row| row[col].parse::<f64>().is_ok())
}

fn infer_schema(
    headers: &[String],
    cells: &[Vec<String>],
    opts: &LoadOptions,
) -> Result<(CovariateSchema, Dataset)> {
    let p = headers.len() - 1;
    let mut covariates = Vec::with_capacity(p);
    let mut level_maps: Vec<Option<BTreeMap<String, u32>>> = Vec::with_capacity(p);
    for col in 0..p {
        if column_is_numeric(cells, col) {
            let values: Vec<f64> = cells.iter().map(|r| r[col].parse().unwrap()).collect();
            let (mut lo, mut hi) = values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
            let margin = opts.domain_margin * (hi - lo);
            lo -= margin;
            hi += margin;
            if lo == hi {
                // constant column still needs a non-empty interval
                lo -= 0.5;
                hi += 0.5;
            }
            covariates.push(Covariate {
                name: headers[col].clone(),
                kind: CovariateKind::Continuous { lo, hi },
            });
            level_maps.push(None);
        } else {
            let mut levels = Vec::new();
            let mut map = BTreeMap::new();
            for row in cells {
                if !map.contains_key(&row[col]) {
                    map.insert(row[col].clone(), levels.len() as u32);
                    levels.push(row[col].clone());
                }
            }
            if levels.len() < 2 {
                return Err(DdtError::Data(format!(
                    "categorical column `{}` has a single level",
                    headers[col]
                )));
            }
            covariates.push(Covariate {
                name: headers[col].clone(),
                kind: CovariateKind::Categorical { levels },
            });
            level_maps.push(Some(map));
        }
    }

    let response = if column_is_numeric(cells, p) {
        ResponseKind::Continuous
    } else {
        let mut classes = Vec::new();
        for row in cells {
            if !classes.contains(&row[p]) {
                classes.push(row[p].clone());
            }
        }
        ResponseKind::Categorical { classes }
    };

    let schema = CovariateSchema::new(covariates, response)?;
    let dataset = parse_with_schema(headers, cells, &schema)?;
    Ok((schema, dataset))
}

fn parse_with_schema(
    headers: &[String],
    cells: &[Vec<String>],
    schema: &CovariateSchema,
) -> Result<Dataset> {
    if headers.len() != schema.dim() + 1 {
        return Err(DdtError::Data(format!(
            "file has {} columns, schema expects {} covariates plus a response",
            headers.len(),
            schema.dim()
        )));
    }
    let mut rows = Vec::with_capacity(cells.len());
    let mut responses = Vec::with_capacity(cells.len());
    for (i, record) in cells.iter().enumerate() {
        let mut row = Vec::with_capacity(schema.dim());
        for (col, cov) in schema.covariates.iter().enumerate() {
            let cell = &record[col];
            let v = match &cov.kind {
                CovariateKind::Continuous { .. } => cell.parse::<f64>().map_err(|_| {
                    DdtError::Data(format!("row {}: `{cell}` is not numeric for `{}`", i + 2, cov.name))
                })?,
                CovariateKind::Categorical { levels } => {
                    levels.iter().position(|l| l == cell).ok_or_else(|| {
                        DdtError::Data(format!(
                            "row {}: unknown level `{cell}` for `{}`",
                            i + 2,
                            cov.name
                        ))
                    })? as f64
                }
            };
            row.push(v);
        }
        let resp_cell = &record[schema.dim()];
        let y = match &schema.response {
            ResponseKind::Continuous => resp_cell.parse::<f64>().map_err(|_| {
                DdtError::Data(format!("row {}: response `{resp_cell}` is not numeric", i + 2))
            })?,
            ResponseKind::Categorical { classes } => {
                classes.iter().position(|c| c == resp_cell).ok_or_else(|| {
                    DdtError::Data(format!("row {}: unknown level `{resp_cell}` in response", i + 2))
                })? as f64
            }
        };
        rows.push(row);
        responses.push(y);
    }
    Dataset::new(schema, rows, responses, Provenance::Observed)
}

/// Draw `n` rows uniformly inside `region`: continuous coordinates uniform on
/// their interval, categorical coordinates uniform over the level subset.
pub fn sample_region(
    schema: &CovariateSchema,
    region: &Region,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let row = region
            .bounds
            .iter()
            .zip(&schema.covariates)
            .map(|(b, _)| match b {
                Restriction::Interval { lo, hi, .. } => rng.random_range(*lo..*hi),
                Restriction::Levels(set) => {
                    let idx = rng.random_range(0..set.len());
                    *set.iter().nth(idx).expect("non-empty level subset") as f64
                }
            })
            .collect();
        rows.push(row);
    }
    rows
}

/// The bundled highly non-linear two-dimensional reference function on [0,10]^2.
///
/// Its structure is a 10-box hierarchical partition (nine axis-aligned splits)
/// with a mild smooth interaction term on top.
pub fn sim2d_value(x1: f64, x2: f64) -> f64 {
    let base = if x1 < 4.0 {
        if x2 < 5.0 {
            if x1 < 2.0 {
                2.0
            } else {
                5.0
            }
        } else if x2 < 8.0 {
            9.0
        } else {
            12.2
        }
    } else if x2 < 3.0 {
        if x1 < 7.0 {
            16.0
        } else {
            19.0
        }
    } else if x1 < 6.5 {
        if x2 < 7.0 {
            5.5
        } else {
            8.9
        }
    } else if x2 < 6.2 {
        12.0
    } else {
        1.0
    };
    base + 0.3 * (1.1 * x1).sin() * (0.7 * x2).cos()
}

/// The 51x51 = 2601-point grid of [`sim2d_value`] with its schema.
pub fn sim2d_grid() -> (CovariateSchema, Dataset) {
    let schema = CovariateSchema::new(
        vec![
            Covariate { name: "x1".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 10.0 } },
            Covariate { name: "x2".into(), kind: CovariateKind::Continuous { lo: 0.0, hi: 10.0 } },
        ],
        ResponseKind::Continuous,
    )
    .expect("static schema");
    let mut rows = Vec::with_capacity(51 * 51);
    let mut responses = Vec::with_capacity(51 * 51);
    for i in 0..51 {
        for j in 0..51 {
            let x1 = i as f64 * 0.2;
            let x2 = j as f64 * 0.2;
            rows.push(vec![x1, x2]);
            responses.push(sim2d_value(x1, x2));
        }
    }
    let dataset = Dataset::new(&schema, rows, responses, Provenance::Observed).expect("grid rows in domain");
    (schema, dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_numeric_csv_and_infers_schema() {
        let mut body = String::from("a,b,y\n");
        for i in 0..50 {
            body.push_str(&format!("{},{},{}\n", i as f64 * 0.1, 5.0 - i as f64 * 0.05, i));
        }
        let f = write_temp(&body);
        let (schema, data) = load_dataset(f.path(), None).unwrap();
        assert_eq!(schema.dim(), 2);
        assert!(schema.covariates.iter().all(|c| c.kind.is_continuous()));
        assert!(schema.response.is_continuous());
        assert_eq!(data.len(), 50);
    }

    #[test]
    fn unknown_level_under_hint_errors() {
        let schema = CovariateSchema::new(
            vec![Covariate {
                name: "c".into(),
                kind: CovariateKind::Categorical { levels: vec!["A".into(), "B".into()] },
            }],
            ResponseKind::Continuous,
        )
        .unwrap();
        let f = write_temp("c,y\nA,1.0\nZ,2.0\n");
        let err = load_dataset(f.path(), Some(&schema)).unwrap_err();
        assert!(err.to_string().contains("unknown level"), "{err}");
    }

    #[test]
    fn empty_file_errors() {
        let f = write_temp("a,y\n");
        assert!(load_dataset(f.path(), None).is_err());
    }

    #[test]
    fn categorical_levels_in_first_appearance_order() {
        let f = write_temp("c,y\nB,1\nA,2\nB,3\n");
        let (schema, data) = load_dataset(f.path(), None).unwrap();
        match &schema.covariates[0].kind {
            CovariateKind::Categorical { levels } => {
                assert_eq!(levels, &vec!["B".to_string(), "A".to_string()]);
            }
            _ => panic!("expected categorical"),
        }
        assert_eq!(data.rows[0][0], 0.0);
        assert_eq!(data.rows[1][0], 1.0);
    }

    #[test]
    fn sim2d_grid_has_2601_points() {
        let (schema, data) = sim2d_grid();
        assert_eq!(data.len(), 2601);
        assert_eq!(schema.dim(), 2);
        assert!(schema.response.is_continuous());
    }

    #[test]
    fn sampled_rows_stay_inside_region() {
        let (schema, _) = sim2d_grid();
        let region = schema.full_region();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for row in sample_region(&schema, &region, 500, &mut rng) {
            assert!(region.contains(&row).unwrap());
        }
    }
}
