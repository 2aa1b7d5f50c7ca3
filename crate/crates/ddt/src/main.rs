//! Command-line surface: distill, stability, validate, export-dot, predict,
//! and the demo external teacher.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ddt::config::{prepare, RunConfig};
use ddt::dot::export_dot;
use ddt::error::DdtError;
use ddt::induction::{induce_ddt, DdtTree, NodeKind, Strategy};
use ddt::schema::{CovariateKind, ResponseKind};
use ddt::stability::{measure_split_stability, SecondLevel, StabilityParams};
use ddt::validate;

const EXIT_CONFIG: u8 = 2;
const EXIT_TEACHER: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(name = "ddt", version, about = "Distill black-box models into stable decision trees")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a distillation tree and write tree.json, explanation.csv,
    /// tree.dot, and per-node stability reports.
    Distill {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
    },
    /// Measure two-level split stability of one region and write the report.
    Stability {
        #[arg(short, long)]
        config: PathBuf,
        /// Node id inside --tree whose region is measured (default: root).
        #[arg(long)]
        node: Option<u64>,
        /// Existing tree.json that defines the node regions.
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
    },
    /// Run a validation suite and write its table as CSV.
    Validate {
        #[arg(long)]
        suite: String,
        /// Scale the suite down for a quick check.
        #[arg(long)]
        fast: bool,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value_t = 20260809)]
        seed: u64,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
    },
    /// Print a Graphviz rendition of a tree.json.
    ExportDot {
        tree: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Predict responses for CSV rows with a saved tree.
    Predict { tree: PathBuf, rows: PathBuf },
    /// Reference implementation of the external-teacher line protocol.
    DemoTeacher {
        /// echo | sum | step | count-batches
        #[arg(long, default_value = "echo")]
        mode: String,
        /// Exit mid-batch after replying this many rows (failure testing).
        #[arg(long)]
        die_after_rows: Option<usize>,
        /// Print a wrong handshake line (failure testing).
        #[arg(long)]
        bad_handshake: bool,
        /// Reply to at most this many rows per batch (failure testing).
        #[arg(long)]
        short_reply: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                DdtError::Config(_) | DdtError::Data(_) | DdtError::Schema(_) => EXIT_CONFIG,
                DdtError::Teacher(_) => EXIT_TEACHER,
                _ => EXIT_INTERNAL,
            })
        }
    }
}

fn init_workers(strategy: &Strategy) {
    let workers = std::env::var("DDT_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .or(match strategy {
            Strategy::Parallel { workers } => Some(*workers),
            _ => None,
        });
    if let Some(n) = workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn run(cli: Cli) -> ddt::Result<()> {
    match cli.command {
        Cmd::Distill { config, output } => cmd_distill(&config, &output),
        Cmd::Stability { config, node, tree, output } => {
            cmd_stability(&config, node, tree.as_deref(), &output)
        }
        Cmd::Validate { suite, fast, runs, seed, output } => {
            cmd_validate(&suite, fast, runs, seed, &output)
        }
        Cmd::ExportDot { tree, output } => cmd_export_dot(&tree, output.as_deref()),
        Cmd::Predict { tree, rows } => cmd_predict(&tree, &rows),
        Cmd::DemoTeacher { mode, die_after_rows, bad_handshake, short_reply } => {
            demo_teacher(&mode, die_after_rows, bad_handshake, short_reply)
        }
    }
}

fn load_config(path: &Path) -> ddt::Result<(RunConfig, PathBuf)> {
    let config = RunConfig::from_path(path)?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok((config, dir))
}

fn cmd_distill(config_path: &Path, output: &Path) -> ddt::Result<()> {
    let (config, dir) = load_config(config_path)?;
    let prepared = prepare(&config, &dir)?;
    init_workers(&prepared.induction.strategy);
    let tree = induce_ddt(
        prepared.teacher.as_ref(),
        &prepared.schema,
        &prepared.observed,
        &prepared.induction,
    )?;

    std::fs::create_dir_all(output.join("stability"))?;
    let json = serde_json::to_string_pretty(&tree)?;
    std::fs::write(output.join("tree.json"), &json)?;
    std::fs::write(output.join("tree.dot"), export_dot(&tree))?;
    write_explanation_csv(&tree, &output.join("explanation.csv"))?;
    for node in tree.nodes.values() {
        if let NodeKind::Interpretable { stability, .. } = &node.kind {
            std::fs::write(
                output.join("stability").join(format!("{}.json", node.id)),
                serde_json::to_string_pretty(stability)?,
            )?;
        }
    }
    println!(
        "distilled {} nodes ({} interpretable) into {}",
        tree.nodes.len(),
        tree.interpretable_ids().len(),
        output.display()
    );
    Ok(())
}

fn write_explanation_csv(tree: &DdtTree, path: &Path) -> ddt::Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DdtError::Data(e.to_string()))?;
    w.write_record(["node_id", "kind", "xi", "pxi", "root_path_xi", "observed_percent", "weak_support"])
        .map_err(|e| DdtError::Data(e.to_string()))?;
    let summary = tree.explanation.as_ref();
    for node in tree.nodes.values() {
        let kind = match &node.kind {
            NodeKind::Interpretable { .. } => "interpretable",
            NodeKind::Predictive { .. } => "predictive",
            NodeKind::Leaf { .. } => "leaf",
        };
        let get = |map: Option<&f64>| map.map(|v| format!("{v:.6}")).unwrap_or_default();
        let (xi, pxi, pathxi, obs, weak) = match summary {
            Some(s) => (
                get(s.xi.get(&node.id)),
                get(s.pxi.get(&node.id)),
                get(s.root_path_xi.get(&node.id)),
                format!("{:.6}", s.observed_percent.get(&node.id).copied().unwrap_or(0.0)),
                s.weak_support.contains(&node.id).to_string(),
            ),
            None => Default::default(),
        };
        w.write_record([node.id.to_string(), kind.into(), xi, pxi, pathxi, obs, weak])
            .map_err(|e| DdtError::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_stability(
    config_path: &Path,
    node: Option<u64>,
    tree_path: Option<&Path>,
    output: &Path,
) -> ddt::Result<()> {
    let (config, dir) = load_config(config_path)?;
    let prepared = prepare(&config, &dir)?;
    init_workers(&prepared.induction.strategy);

    let node_id = node.unwrap_or(1);
    let region = match (node_id, tree_path) {
        (1, None) => prepared.schema.full_region(),
        (_, Some(path)) => {
            let tree: DdtTree = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            tree.nodes
                .get(&node_id)
                .ok_or_else(|| DdtError::Config(format!("tree has no node {node_id}")))?
                .region
                .clone()
        }
        (_, None) => {
            return Err(DdtError::Config("--node other than 1 needs --tree".into()));
        }
    };

    let params = StabilityParams {
        repeats: prepared.induction.repeats,
        sample_size: prepared.induction.sample_size,
        min_leaf: prepared.induction.min_leaf,
        weighted_children: prepared.induction.weighted_children,
        adaptive_sample_size: prepared.induction.adaptive_sample_size,
        oscillation: prepared.induction.oscillation.clone(),
        seed: prepared.induction.seed,
        node_id,
    };
    let started = std::time::Instant::now();
    let report = measure_split_stability(
        prepared.teacher.as_ref(),
        &prepared.schema,
        &region,
        prepared.induction.criterion,
        &params,
    )?;
    let elapsed = started.elapsed();

    std::fs::create_dir_all(output)?;
    std::fs::write(
        output.join(format!("stability_{node_id}.json")),
        serde_json::to_string_pretty(&report)?,
    )?;
    let mut w = csv::Writer::from_path(output.join(format!("stability_{node_id}_draws.csv")))
        .map_err(|e| DdtError::Data(e.to_string()))?;
    w.write_record(["covariate", "kind", "value"]).map_err(|e| DdtError::Data(e.to_string()))?;
    for (cov, second) in &report.second_level {
        let name = &prepared.schema.covariates[*cov].name;
        match second {
            SecondLevel::Continuous { values, .. } => {
                for v in values {
                    w.write_record([name.clone(), "threshold".into(), v.to_string()])
                        .map_err(|e| DdtError::Data(e.to_string()))?;
                }
            }
            SecondLevel::Categorical { masses } => {
                for (level, mass) in masses {
                    let label = match &prepared.schema.covariates[*cov].kind {
                        CovariateKind::Categorical { levels } => levels[*level as usize].clone(),
                        _ => level.to_string(),
                    };
                    w.write_record([name.clone(), format!("level {label}"), mass.to_string()])
                        .map_err(|e| DdtError::Data(e.to_string()))?;
                }
            }
        }
    }
    w.flush()?;
    println!(
        "stability of node {node_id}: chosen covariate {}, runtime {:.2}s, report in {}",
        report.chosen.covariate_index,
        elapsed.as_secs_f64(),
        output.display()
    );
    Ok(())
}

fn cmd_validate(
    suite: &str,
    fast: bool,
    runs: Option<usize>,
    seed: u64,
    output: &Path,
) -> ddt::Result<()> {
    std::fs::create_dir_all(output)?;
    match suite {
        "convergence" => {
            let repeats = if fast { 50 } else { 200 };
            let rows =
                validate::convergence_suite(&[250, 500, 1000, 2000, 4000], repeats, seed)?;
            let mut w = csv::Writer::from_path(output.join("convergence.csv"))
                .map_err(|e| DdtError::Data(e.to_string()))?;
            w.write_record(["n", "median_abs_error"]).map_err(|e| DdtError::Data(e.to_string()))?;
            for r in &rows {
                w.write_record([r.n.to_string(), r.median_abs_error.to_string()])
                    .map_err(|e| DdtError::Data(e.to_string()))?;
            }
            w.flush()?;
            for pair in rows.windows(2) {
                println!(
                    "n {} -> {}: median error {:.5} -> {:.5} (ratio {:.2})",
                    pair[0].n,
                    pair[1].n,
                    pair[0].median_abs_error,
                    pair[1].median_abs_error,
                    pair[0].median_abs_error / pair[1].median_abs_error
                );
            }
        }
        "coverage" => {
            let (inner, outer) = if fast { (300, 3) } else { (1000, runs.unwrap_or(1)) };
            let rows = validate::coverage_suite(&[100, 500, 1000], inner, outer, seed)?;
            let mut w = csv::Writer::from_path(output.join("coverage.csv"))
                .map_err(|e| DdtError::Data(e.to_string()))?;
            w.write_record(["n", "outer_rep", "coverage"]).map_err(|e| DdtError::Data(e.to_string()))?;
            for r in &rows {
                for (i, rate) in r.rates.iter().enumerate() {
                    w.write_record([r.n.to_string(), i.to_string(), rate.to_string()])
                        .map_err(|e| DdtError::Data(e.to_string()))?;
                }
                println!("n={}: mean coverage {:.4}", r.n, r.mean());
            }
            w.flush()?;
        }
        "interpretation" => {
            let n_runs = runs.unwrap_or(if fast { 20 } else { 100 });
            let result = validate::interpretation_suite(n_runs, seed)?;
            let mut w = csv::Writer::from_path(output.join("interpretation.csv"))
                .map_err(|e| DdtError::Data(e.to_string()))?;
            w.write_record(["run", "odt_mse", "ddt_mse"]).map_err(|e| DdtError::Data(e.to_string()))?;
            for (i, r) in result.runs.iter().enumerate() {
                w.write_record([i.to_string(), r.odt_mse.to_string(), r.ddt_mse.to_string()])
                    .map_err(|e| DdtError::Data(e.to_string()))?;
            }
            w.flush()?;
            println!("distilled tree wins {} of {} runs", result.ddt_wins, n_runs);
        }
        other => {
            return Err(DdtError::Config(format!(
                "unknown suite `{other}` (expected convergence, coverage, or interpretation)"
            )))
        }
    }
    Ok(())
}

fn cmd_export_dot(tree_path: &Path, output: Option<&Path>) -> ddt::Result<()> {
    let tree: DdtTree = serde_json::from_str(&std::fs::read_to_string(tree_path)?)?;
    let dot = export_dot(&tree);
    match output {
        Some(path) => std::fs::write(path, dot)?,
        None => print!("{dot}"),
    }
    Ok(())
}

fn cmd_predict(tree_path: &Path, rows_path: &Path) -> ddt::Result<()> {
    let tree: DdtTree = serde_json::from_str(&std::fs::read_to_string(tree_path)?)?;
    let rows = read_covariate_rows(&tree, rows_path)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "prediction")?;
    for row in &rows {
        let y = tree.predict(row)?;
        match &tree.schema.response {
            ResponseKind::Continuous => writeln!(out, "{y}")?,
            ResponseKind::Categorical { classes } => writeln!(out, "{}", classes[y as usize])?,
        }
    }
    Ok(())
}

fn read_covariate_rows(tree: &DdtTree, path: &Path) -> ddt::Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DdtError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DdtError::Data(format!("row {}: {e}", i + 2)))?;
        if record.len() < tree.schema.dim() {
            return Err(DdtError::Data(format!(
                "row {}: {} fields, schema needs {}",
                i + 2,
                record.len(),
                tree.schema.dim()
            )));
        }
        let mut row = Vec::with_capacity(tree.schema.dim());
        for (cell, cov) in record.iter().zip(&tree.schema.covariates) {
            let v = match &cov.kind {
                CovariateKind::Continuous { .. } => cell.parse::<f64>().map_err(|_| {
                    DdtError::Data(format!("row {}: `{cell}` is not numeric", i + 2))
                })?,
                CovariateKind::Categorical { levels } => {
                    levels.iter().position(|l| l == cell).ok_or_else(|| {
                        DdtError::Data(format!("row {}: unknown level `{cell}`", i + 2))
                    })? as f64
                }
            };
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Speak the teacher protocol on stdin/stdout. Modes: `echo` answers the
/// first covariate, `sum` the row sum, `step` the 0/10 step at 1.0, and
/// `count-batches` the number of PREDICT requests seen so far.
fn demo_teacher(
    mode: &str,
    die_after_rows: Option<usize>,
    bad_handshake: bool,
    short_reply: Option<usize>,
) -> ddt::Result<()> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if bad_handshake {
        writeln!(out, "HELLO 9")?;
    } else {
        writeln!(out, "DDT-TEACHER 1")?;
    }
    out.flush()?;

    let mut batches = 0usize;
    let mut replied = 0usize;
    let mut lines = stdin.lock().lines();
    while let Some(header) = lines.next() {
        let header = header?;
        let mut parts = header.split_whitespace();
        match (parts.next(), parts.next()) {
            (Some("PREDICT"), Some(n)) => {
                let n: usize = n
                    .parse()
                    .map_err(|_| DdtError::Teacher(format!("bad header `{header}`")))?;
                batches += 1;
                for row_idx in 0..n {
                    let row = lines
                        .next()
                        .ok_or_else(|| DdtError::Teacher("input closed mid-batch".into()))??;
                    let values: Vec<f64> =
                        row.split(',').filter_map(|c| c.trim().parse::<f64>().ok()).collect();
                    let y = match mode {
                        "echo" => values.first().copied().unwrap_or(0.0),
                        "sum" => values.iter().sum(),
                        "step" => {
                            if values.first().copied().unwrap_or(0.0) < 1.0 {
                                0.0
                            } else {
                                10.0
                            }
                        }
                        "count-batches" => batches as f64,
                        other => {
                            return Err(DdtError::Teacher(format!("unknown mode `{other}`")))
                        }
                    };
                    if short_reply.is_none_or(|k| row_idx < k) {
                        writeln!(out, "{y}")?;
                        out.flush()?;
                    }
                    replied += 1;
                    if let Some(limit) = die_after_rows {
                        if replied >= limit {
                            eprintln!("demo teacher dying after {replied} rows");
                            std::process::exit(1);
                        }
                    }
                }
            }
            _ => return Err(DdtError::Teacher(format!("unexpected request `{header}`"))),
        }
    }
    Ok(())
}
