//! End-to-end run driver behind the command-line interface.
//!
//! A run reads a JSON config, loads the input matrix, dispatches to one of
//! the five solvers, and writes the factors (`H.csv` or `G.csv`, `W.csv`),
//! the learned weights (`weights.json`, when the method has any), and
//! `report.json` carrying the objective trace and a full echo of the parsed
//! configuration. Failures are classified by stage: configuration errors exit
//! with 2, data errors with 3, and solver or output errors with 4.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{MethodConfig, RunConfig};
use crate::error::Error;
use crate::feature_select::solve_feature_select;
use crate::graph::{build_knn_graph, GraphSpec};
use crate::io::{load_matrix, save_matrix, MatrixFormat};
use crate::kernel::KernelSpec;
use crate::matrix::{NonNegMatrix, SolveReport};
use crate::multi_graph::solve_multi_graph;
use crate::multi_kernel::solve_multi_kernel;
use crate::nmf::{solve_gnmf, solve_nmf};
use crate::simplex::SimplexWeights;

/// A failure annotated with the stage it occurred in.
#[derive(Debug)]
pub enum RunError {
    Config(String),
    Data(Error),
    Solve(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Data(_) => 3,
            RunError::Solve(_) => 4,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(msg) => write!(f, "config error: {msg}"),
            RunError::Data(e) => write!(f, "data error: {e}"),
            RunError::Solve(e) => write!(f, "solver error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Paths written by a successful run.
#[derive(Debug)]
pub struct RunSummary {
    pub basis_path: PathBuf,
    pub coefficient_path: PathBuf,
    pub weights_path: Option<PathBuf>,
    pub report_path: PathBuf,
    pub final_objective: f64,
}

#[derive(Serialize)]
struct WeightsFile<'a> {
    kind: &'a str,
    labels: Vec<String>,
    values: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    graph_specs: Option<&'a [GraphSpec]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel_specs: Option<&'a [KernelSpec]>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    #[serde(flatten)]
    report: &'a SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    phases: Option<&'a [Vec<f64>]>,
    config: &'a RunConfig,
}

/// Loads the config at `path` and executes it.
pub fn execute(config_path: &Path) -> Result<RunSummary, RunError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| RunError::Config(format!("{}: {e}", config_path.display())))?;
    let config = RunConfig::from_json(&text).map_err(|e| RunError::Config(e.to_string()))?;
    run(&config)
}

/// Executes an already-validated configuration.
pub fn run(config: &RunConfig) -> Result<RunSummary, RunError> {
    let x = load_matrix(&config.input.path, config.input.format).map_err(RunError::Data)?;
    fs::create_dir_all(&config.output_dir)
        .map_err(|e| RunError::Solve(Error::Io(e)))?;

    let out = |name: &str| config.output_dir.join(name);
    let mut weights_path = None;

    let output = match &config.method {
        MethodConfig::Nmf { nmf } => {
            let f = solve_nmf(&x, nmf).map_err(RunError::Solve)?;
            SolveOutput::factors(f.h, f.w, f.report)
        }
        MethodConfig::Gnmf { nmf, graph } => {
            let g = build_knn_graph(&x, graph).map_err(RunError::Solve)?;
            let f = solve_gnmf(&x, &g, nmf).map_err(RunError::Solve)?;
            SolveOutput::factors(f.h, f.w, f.report)
        }
        MethodConfig::MultiGraph { multi_graph } => {
            let result = solve_multi_graph(&x, multi_graph).map_err(RunError::Solve)?;
            let weights = LearnedWeights {
                kind: "graph_weights",
                values: result.mu,
                labels: multi_graph.graphs.iter().map(|g| g.label()).collect(),
                graph_specs: Some(multi_graph.graphs.clone()),
                kernel_specs: None,
            };
            let mut output = SolveOutput::factors(
                result.factorization.h,
                result.factorization.w,
                result.factorization.report,
            );
            output.weights = Some(weights);
            output
        }
        MethodConfig::FeatureSelect { feature_select } => {
            let result = solve_feature_select(&x, feature_select).map_err(RunError::Solve)?;
            let weights = LearnedWeights {
                kind: "feature_weights",
                labels: (0..result.u.len()).map(|c| format!("feature_{c}")).collect(),
                values: result.u,
                graph_specs: None,
                kernel_specs: None,
            };
            let mut output = SolveOutput::factors(
                result.factorization.h,
                result.factorization.w,
                result.factorization.report,
            );
            output.weights = Some(weights);
            output.phases = Some(result.phases);
            output
        }
        MethodConfig::MultiKernel { multi_kernel } => {
            let result = solve_multi_kernel(&x, multi_kernel).map_err(RunError::Solve)?;
            if let Some(h) = &result.linear_h {
                save_matrix(h, &out("H.csv"), MatrixFormat::Csv).map_err(RunError::Solve)?;
            }
            let weights = LearnedWeights {
                kind: "kernel_weights",
                values: result.mu,
                labels: multi_kernel.kernels.iter().map(|k| k.label()).collect(),
                graph_specs: None,
                kernel_specs: Some(multi_kernel.kernels.clone()),
            };
            let mut output = SolveOutput::factors(result.g, result.w, result.report);
            output.basis_name = "G.csv";
            output.weights = Some(weights);
            output
        }
    };

    let basis_path = out(output.basis_name);
    save_matrix(&output.basis, &basis_path, MatrixFormat::Csv).map_err(RunError::Solve)?;
    let coefficient_path = out("W.csv");
    save_matrix(&output.coeff, &coefficient_path, MatrixFormat::Csv).map_err(RunError::Solve)?;

    if let Some(weights) = &output.weights {
        let path = out("weights.json");
        let file = WeightsFile {
            kind: weights.kind,
            labels: weights.labels.clone(),
            values: weights.values.values(),
            graph_specs: weights.graph_specs.as_deref(),
            kernel_specs: weights.kernel_specs.as_deref(),
        };
        write_json(&path, &file)?;
        weights_path = Some(path);
    }

    let report_path = out("report.json");
    write_json(
        &report_path,
        &ReportFile {
            report: &output.report,
            phases: output.phases.as_deref(),
            config,
        },
    )?;

    Ok(RunSummary {
        basis_path,
        coefficient_path,
        weights_path,
        report_path,
        final_objective: output.report.final_objective(),
    })
}

struct SolveOutput {
    basis: NonNegMatrix,
    basis_name: &'static str,
    coeff: NonNegMatrix,
    report: SolveReport,
    phases: Option<Vec<Vec<f64>>>,
    weights: Option<LearnedWeights>,
}

impl SolveOutput {
    fn factors(basis: NonNegMatrix, coeff: NonNegMatrix, report: SolveReport) -> Self {
        SolveOutput {
            basis,
            basis_name: "H.csv",
            coeff,
            report,
            phases: None,
            weights: None,
        }
    }
}

struct LearnedWeights {
    kind: &'static str,
    values: SimplexWeights,
    labels: Vec<String>,
    graph_specs: Option<Vec<GraphSpec>>,
    kernel_specs: Option<Vec<KernelSpec>>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| RunError::Solve(Error::domain(e.to_string())))?;
    fs::write(path, text).map_err(|e| RunError::Solve(Error::Io(e)))?;
    Ok(())
}
