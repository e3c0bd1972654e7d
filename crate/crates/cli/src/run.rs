//! Workflows behind the subcommands.

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::ingest::{self, Ingested, Table};
use crrr::bootstrap::{run_bootstrap, BootstrapReport, Statistic};
use crrr::estimators::{subgroup_crrr, EstimatorInputs};
use crrr::pipeline::Pipeline;
use crrr::transition::{transition_matrix, TransitionMatrix};
use crrr::{Dataset, Design, Method, RankKind, RankVector, SlopeEstimate, Variable};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Rank columns written by `ranks` and read back by the estimator-only mode.
pub const RANK_COLUMNS: [&str; 4] = ["u_marg", "v_marg", "u_cond", "v_cond"];

#[derive(Debug, Clone, Serialize)]
pub struct BetweenGroup {
    pub group: String,
    pub rrr: f64,
    pub crrr: f64,
    /// `rrr − crrr`.
    pub between: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubgroupTable {
    pub column: String,
    pub estimates: Vec<SlopeEstimate>,
    pub between_group: Vec<BetweenGroup>,
}

/// One JSON document per run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<C> {
    pub config: C,
    pub n: usize,
    pub dx: usize,
    pub warnings: Vec<String>,
    pub estimates: Vec<SlopeEstimate>,
    pub bootstrap: Vec<BootstrapReport>,
    pub subgroups: Option<SubgroupTable>,
    pub transitions: Vec<TransitionMatrix>,
}

struct Analysis {
    estimates: Vec<SlopeEstimate>,
    subgroups: Option<SubgroupTable>,
    transitions: Vec<TransitionMatrix>,
}

fn analyze(
    inputs: &EstimatorInputs,
    methods: &[Method],
    groups: Option<(&str, &[String])>,
    bins: Option<usize>,
) -> Result<Analysis> {
    let n = inputs.len();
    let estimates = methods
        .iter()
        .map(|&method| {
            Ok(SlopeEstimate {
                method,
                value: method.evaluate(inputs, None)?,
                n,
                group: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let subgroups = match groups {
        Some((column, labels)) => {
            let mut rows = Vec::new();
            for &method in methods.iter().filter(|m| m.supports_subgroups()) {
                let (u, v) = if method.is_conditional() {
                    inputs.conditional()?
                } else {
                    (&inputs.u_marg, &inputs.v_marg)
                };
                rows.extend(subgroup_crrr(u, v, labels, method)?);
            }
            let pick = |method: Method, label: &str| {
                rows.iter()
                    .find(|e| e.method == method && e.group.as_deref() == Some(label))
                    .map(|e| e.value)
            };
            let between_group = rows
                .iter()
                .filter(|e| e.method == Method::Rrr)
                .filter_map(|e| {
                    let group = e.group.clone()?;
                    let crrr = pick(Method::CrrrCorr, &group)?;
                    Some(BetweenGroup {
                        group,
                        rrr: e.value,
                        crrr,
                        between: e.value - crrr,
                    })
                })
                .collect();
            Some(SubgroupTable {
                column: column.to_string(),
                estimates: rows,
                between_group,
            })
        }
        None => None,
    };

    let mut transitions = Vec::new();
    if let Some(k) = bins {
        transitions.push(transition_matrix(&inputs.u_marg, &inputs.v_marg, k)?);
        if let Ok((u, v)) = inputs.conditional() {
            transitions.push(transition_matrix(u, v, k)?);
        }
    }
    Ok(Analysis {
        estimates,
        subgroups,
        transitions,
    })
}

fn data_warnings(config: &RunConfig, data: &Dataset) -> Vec<String> {
    let mut warnings = Vec::new();
    for (variable, name) in [(Variable::Y, &config.columns.y), (Variable::W, &config.columns.w)] {
        if data.has_ties(variable) {
            warnings.push(format!(
                "column {name:?} has tied values; marginal ranks count observations ≤ each value (ties share the largest rank) and the estimators assume continuous outcomes"
            ));
        }
    }
    if let Some(group) = &config.columns.group {
        if !config.columns.covariates.contains(group) {
            warnings.push(format!(
                "group column {group:?} is not a covariate, so conditional ranks do not condition on it"
            ));
        }
    }
    warnings
}

/// Fits the pipeline and computes everything `config` asks for.
pub fn run_estimate(config: &RunConfig) -> Result<RunReport<RunConfig>> {
    config.validate()?;
    let ingested = ingest::ingest_csv(&config.input, &config.columns)?;
    run_on(config, ingested)
}

/// As [`run_estimate`] on already ingested data.
pub fn run_on(config: &RunConfig, ingested: Ingested) -> Result<RunReport<RunConfig>> {
    config.validate()?;
    let data = &ingested.dataset;
    let mut warnings = ingested.warnings;
    warnings.extend(data_warnings(config, data));

    let (pipeline, point) = Pipeline::fit(data, &config.pipeline(), config.conditional())?;
    warnings.extend(point.warnings.iter().cloned());

    let groups = match (&config.columns.group, data.groups()) {
        (Some(column), Some(labels)) if config.subgroups => Some((column.as_str(), labels)),
        _ => None,
    };
    let analysis = analyze(&point.inputs, &config.methods, groups, config.transition_bins)?;

    let bootstrap = match &config.bootstrap {
        Some(options) => {
            let boot = options.resolve()?;
            let mut statistics = Vec::new();
            let mut estimates = Vec::new();
            for e in &analysis.estimates {
                statistics.push(Statistic::Pooled { method: e.method });
                estimates.push(e.value);
            }
            for e in analysis.subgroups.iter().flat_map(|t| &t.estimates) {
                statistics.push(Statistic::Subgroup {
                    method: e.method,
                    label: e.group.clone().unwrap_or_default(),
                });
                estimates.push(e.value);
            }
            let mut reports = run_bootstrap(&pipeline, &statistics, &estimates, data.groups(), &boot)?;
            for r in &mut reports {
                r.draws.clear();
            }
            reports
        }
        None => Vec::new(),
    };

    Ok(RunReport {
        config: config.clone(),
        n: data.len(),
        dx: data.dx(),
        warnings,
        estimates: analysis.estimates,
        bootstrap,
        subgroups: analysis.subgroups,
        transitions: analysis.transitions,
    })
}

/// Settings of the estimator-only mode, which reads precomputed ranks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RanksConfig {
    pub ranks_from: PathBuf,
    pub covariates: Vec<String>,
    pub group: Option<String>,
    pub methods: Vec<Method>,
    pub subgroups: bool,
    pub transition_bins: Option<usize>,
}

/// Evaluates the estimators on rank columns exported by [`export_ranks`];
/// no distribution regression is run.
pub fn run_from_ranks(config: &RanksConfig) -> Result<RunReport<RanksConfig>> {
    if config.subgroups && config.group.is_none() {
        return Err(CliError::Config("subgroup estimates need a group column".into()));
    }
    let table = Table::read(&config.ranks_from)?;
    let conditional = table.index(RANK_COLUMNS[2]).is_ok() && table.index(RANK_COLUMNS[3]).is_ok();
    let rank_names = if conditional { &RANK_COLUMNS[..] } else { &RANK_COLUMNS[..2] };
    let mut names: Vec<String> = rank_names.iter().map(|s| s.to_string()).collect();
    names.extend(config.covariates.iter().cloned());
    let parsed = ingest::numeric_columns(&table, &names, config.group.as_deref())?;
    let mut warnings = Vec::new();
    if !parsed.dropped_lines.is_empty() {
        warnings.push(format!("dropped {} row(s) with missing values", parsed.dropped_lines.len()));
    }
    let n = parsed.kept.len();
    let mut columns = parsed.columns.into_iter();
    let mut rank = |kind, source, covariates: &[String]| {
        RankVector::new(columns.next().unwrap(), kind, source, covariates.to_vec())
    };
    let u_marg = rank(RankKind::Marginal, Variable::Y, &[]);
    let v_marg = rank(RankKind::Marginal, Variable::W, &[]);
    let (u_cond, v_cond) = if conditional {
        (
            Some(rank(RankKind::Conditional, Variable::Y, &config.covariates)),
            Some(rank(RankKind::Conditional, Variable::W, &config.covariates)),
        )
    } else {
        (None, None)
    };
    let covariate_columns: Vec<Vec<f64>> = columns.collect();
    let design = Design::with_intercept(n, &covariate_columns)?;
    let dx = design.ncols();
    let inputs = EstimatorInputs {
        u_marg,
        v_marg,
        u_cond,
        v_cond,
        covariates: design.select_columns(&(1..dx).collect::<Vec<_>>()),
    };
    let groups = match (&config.group, &parsed.labels) {
        (Some(column), Some(labels)) if config.subgroups => Some((column.as_str(), labels.as_slice())),
        _ => None,
    };
    let analysis = analyze(&inputs, &config.methods, groups, config.transition_bins)?;
    Ok(RunReport {
        config: config.clone(),
        n,
        dx,
        warnings,
        estimates: analysis.estimates,
        bootstrap: Vec::new(),
        subgroups: analysis.subgroups,
        transitions: analysis.transitions,
    })
}

/// The input rows that survived ingestion, with marginal and conditional
/// ranks appended, as CSV text.
pub fn export_ranks(config: &RunConfig) -> Result<(String, Vec<String>)> {
    config.validate()?;
    let ingested = ingest::ingest_csv(&config.input, &config.columns)?;
    if let Some(clash) = RANK_COLUMNS.iter().find(|c| ingested.table.index(c).is_ok()) {
        return Err(CliError::Config(format!("input already has a column named {clash:?}")));
    }
    let data = &ingested.dataset;
    let mut warnings = ingested.warnings.clone();
    warnings.extend(data_warnings(config, data));
    let (_, point) = Pipeline::fit(data, &config.pipeline(), true)?;
    warnings.extend(point.warnings.iter().cloned());
    let inputs = &point.inputs;
    let (u_cond, v_cond) = inputs.conditional()?;
    let rank_columns = [&inputs.u_marg, &inputs.v_marg, u_cond, v_cond];

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = ingested.table.headers.clone();
    header.extend(RANK_COLUMNS.iter().map(|s| s.to_string()));
    writer.write_record(&header)?;
    for (i, &row) in ingested.kept.iter().enumerate() {
        let mut record = ingested.table.rows[row].clone();
        record.resize(ingested.table.headers.len(), String::new());
        record.extend(rank_columns.iter().map(|r| format_float(r.values[i])));
        writer.write_record(&record)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::io("writing ranks", e.into_error()))?;
    Ok((String::from_utf8(bytes).expect("CSV output is UTF-8"), warnings))
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Flat CSV of pooled and subgroup estimates, with bootstrap columns when
/// available.
pub fn estimates_csv<C>(report: &RunReport<C>) -> String {
    let mut out = String::from("method,group,n,value,se,ci_lo,ci_hi\n");
    let subgroup_rows = report.subgroups.iter().flat_map(|t| &t.estimates);
    for e in report.estimates.iter().chain(subgroup_rows) {
        let boot = report
            .bootstrap
            .iter()
            .find(|b| b.method == e.method && b.group == e.group);
        let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.method,
            e.group.as_deref().unwrap_or(""),
            e.n,
            format_float(e.value),
            opt(boot.map(|b| b.se)),
            opt(boot.map(|b| b.ci[0])),
            opt(boot.map(|b| b.ci[1])),
        ));
    }
    out
}

/// Writes the CSV tables of `report` into `dir`.
pub fn write_tables<C>(report: &RunReport<C>, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let mut files = vec![(dir.join("estimates.csv"), estimates_csv(report))];
    for t in &report.transitions {
        let kind = match t.kind {
            RankKind::Marginal => "marginal",
            RankKind::Conditional => "conditional",
        };
        files.push((dir.join(format!("transition_{kind}.csv")), t.deviations_csv()));
    }
    for (path, text) in &files {
        write_file(path, text)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}
