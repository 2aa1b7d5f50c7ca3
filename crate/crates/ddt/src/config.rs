//! Run configuration: the JSON document the CLI consumes, teacher
//! construction, and assembly of the induction settings.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::criteria::SplitCriterion;
use crate::dataset::{load_dataset_with, Dataset, LoadOptions, Provenance};
use crate::error::{DdtError, Result};
use crate::induction::{InductionConfig, OdtConfig, StoppingConfig, Strategy};
use crate::schema::CovariateSchema;
use crate::stability::OscillationConfig;
use crate::teacher::external::connect_external_teacher;
use crate::teacher::forest::{fit_forest_teacher, ForestConfig};
use crate::teacher::{make_grid_teacher, make_step_teacher, Teacher};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherSpec {
    Builtin(BuiltinTeacher),
    External { command: String, #[serde(default)] timeout_secs: Option<u64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuiltinTeacher {
    Step { a: f64, b: f64, cut: f64, left: f64, right: f64 },
    Grid { path: PathBuf },
    Forest {
        #[serde(default = "default_trees")]
        trees: usize,
        #[serde(default = "default_forest_depth")]
        max_depth: usize,
        #[serde(default = "default_forest_min_leaf")]
        min_leaf: usize,
        #[serde(default = "default_feature_fraction")]
        feature_fraction: f64,
        /// Training data; defaults to the run's observed dataset.
        #[serde(default)]
        data: Option<PathBuf>,
    },
}

fn default_trees() -> usize {
    200
}
fn default_forest_depth() -> usize {
    25
}
fn default_forest_min_leaf() -> usize {
    1
}
fn default_feature_fraction() -> f64 {
    1.0
}

/// The run configuration document. The seed is mandatory: runs must be
/// reproducible, there is no wall-clock default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub teacher: TeacherSpec,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<CovariateSchema>,
    #[serde(default)]
    pub criterion: Option<String>,
    #[serde(default)]
    pub repeats: Option<usize>,
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub stopping: Option<StoppingConfig>,
    #[serde(default)]
    pub odt: Option<OdtConfig>,
    #[serde(default)]
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub eval_sample_size: Option<usize>,
    #[serde(default)]
    pub min_leaf: Option<usize>,
    #[serde(default)]
    pub weighted_children: Option<bool>,
    #[serde(default)]
    pub adaptive_sample_size: Option<bool>,
    #[serde(default)]
    pub oscillation: Option<OscillationConfig>,
    /// Fraction by which inferred continuous domains are widened per side.
    #[serde(default)]
    pub domain_margin: Option<f64>,
}

impl RunConfig {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| DdtError::Config(format!("cannot read {}: {e}", path.as_ref().display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| DdtError::Config(format!("invalid config: {e}")))?;
        Ok(config)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| {
            DdtError::Config("seed is mandatory: set \"seed\" in the config".into())
        })
    }
}

/// Everything a run needs: the teacher, the schema it serves, the observed
/// dataset (possibly empty), and the induction settings.
pub struct Prepared {
    pub teacher: Box<dyn Teacher>,
    pub schema: CovariateSchema,
    pub observed: Dataset,
    pub induction: InductionConfig,
}

/// Resolve `path` relative to the config file's directory when not absolute.
fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

pub fn prepare(config: &RunConfig, config_dir: &Path) -> Result<Prepared> {
    let seed = config.seed()?;
    let load_opts = LoadOptions { domain_margin: config.domain_margin.unwrap_or(0.0) };

    // observed dataset and schema
    let mut schema = config.schema.clone();
    let observed = match &config.dataset {
        Some(path) => {
            let (inferred, data) =
                load_dataset_with(resolve(config_dir, path), schema.as_ref(), &load_opts)?;
            if schema.is_none() {
                schema = Some(inferred);
            }
            Some(data)
        }
        None => None,
    };

    let (teacher, schema): (Box<dyn Teacher>, CovariateSchema) = match &config.teacher {
        TeacherSpec::Builtin(BuiltinTeacher::Step { a, b, cut, left, right }) => {
            let t = make_step_teacher(*a, *b, *cut, *left, *right)?;
            let schema = schema.unwrap_or(CovariateSchema::new(
                vec![crate::schema::Covariate {
                    name: "x".into(),
                    kind: crate::schema::CovariateKind::Continuous { lo: *a, hi: *b },
                }],
                crate::schema::ResponseKind::Continuous,
            )?);
            (Box::new(t), schema)
        }
        TeacherSpec::Builtin(BuiltinTeacher::Grid { path }) => {
            let (grid_schema, grid) =
                load_dataset_with(resolve(config_dir, path), None, &load_opts)?;
            let schema = schema.unwrap_or(grid_schema.clone());
            let t = make_grid_teacher(&grid_schema, &grid)?;
            (Box::new(t), schema)
        }
        TeacherSpec::Builtin(BuiltinTeacher::Forest {
            trees,
            max_depth,
            min_leaf,
            feature_fraction,
            data,
        }) => {
            let (train_schema, train) = match data {
                Some(path) => load_dataset_with(resolve(config_dir, path), None, &load_opts)?,
                None => {
                    let schema = schema.clone().ok_or_else(|| {
                        DdtError::Config("forest teacher needs `dataset` or its own `data`".into())
                    })?;
                    (
                        schema,
                        observed.clone().ok_or_else(|| {
                            DdtError::Config("forest teacher needs `dataset` or its own `data`".into())
                        })?,
                    )
                }
            };
            let t = fit_forest_teacher(
                &train_schema,
                &train,
                &ForestConfig {
                    trees: *trees,
                    max_depth: *max_depth,
                    min_leaf: *min_leaf,
                    feature_fraction: *feature_fraction,
                    seed,
                },
            )?;
            (Box::new(t), schema.unwrap_or(train_schema))
        }
        TeacherSpec::External { command, timeout_secs } => {
            let schema = schema.ok_or_else(|| {
                DdtError::Config("external teacher needs `dataset` or `schema` to define covariates".into())
            })?;
            let t = connect_external_teacher(
                command,
                &schema,
                timeout_secs.map(Duration::from_secs),
            )?;
            (Box::new(t), schema)
        }
    };

    let criterion = match &config.criterion {
        Some(key) => SplitCriterion::parse_key(key)?,
        None => {
            if schema.response.is_continuous() {
                SplitCriterion::Sse
            } else {
                SplitCriterion::Gini
            }
        }
    };
    if criterion.is_regression() != schema.response.is_continuous() {
        return Err(DdtError::Config(format!(
            "criterion `{}` does not fit the response kind",
            criterion.key()
        )));
    }

    let mut induction = InductionConfig::new(criterion, seed);
    if let Some(v) = config.repeats {
        induction.repeats = v;
    }
    induction.sample_size = config.sample_size;
    if let Some(v) = &config.stopping {
        induction.stopping = v.clone();
    }
    if let Some(v) = &config.odt {
        induction.odt = v.clone();
    }
    if let Some(v) = &config.strategy {
        induction.strategy = v.clone();
    }
    if let Some(v) = config.eval_sample_size {
        induction.eval_sample_size = v;
    }
    if let Some(v) = config.min_leaf {
        induction.min_leaf = v;
    }
    if let Some(v) = config.weighted_children {
        induction.weighted_children = v;
    }
    if let Some(v) = config.adaptive_sample_size {
        induction.adaptive_sample_size = v;
    }
    if let Some(v) = &config.oscillation {
        induction.oscillation = v.clone();
    }

    let observed = observed.unwrap_or(Dataset {
        rows: Vec::new(),
        responses: Vec::new(),
        provenance: Provenance::Observed,
    });
    Ok(Prepared { teacher, schema, observed, induction })
}
