//! Batch front end for `slm-bounds`: reads a JSON experiment configuration,
//! runs one command and emits deterministic CSV plus a short text summary.
//!
//! Every float in CSV output is written as `{:.16e}` (17 significant digits),
//! which round-trips `f64` exactly.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use slm_bounds::bounds::{bound_l_k, bound_l_star, ssnm_unbiased_bound, theorem_bound};
use slm_bounds::linalg::spark_exceeds;
use slm_bounds::model::xi_and_j;
use slm_bounds::rng::NoiseBank;
use slm_bounds::sweep::{fig1_sweep, SweepConfig};
use slm_bounds::{
    finite_point_bound, grid_points, simulate, BoundConfig, Estimator, MeanFunction, QuadratureConfig,
    SimulationSpec, SparseLinearModel, SparseVector, SupportSearch, SupportSet,
};

pub use config::ExperimentConfig;
use config::{EstimatorSpec, MeanSpec, SearchSpec};

/// Environment variable that redirects output files into a directory.
pub const OUT_DIR_ENV: &str = "SLM_BOUNDS_OUT_DIR";

/// Largest oracle grid accepted; the Gram matrix is dense in the point count.
const MAX_ORACLE_POINTS: usize = 20_000;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] slm_bounds::Error),
}

impl CliError {
    /// 2 configuration, 3 numerical diagnostics, 4 budget exceeded, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        use slm_bounds::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(E::Budget { .. }) => 4,
            CliError::Core(E::IllConditioned { .. } | E::Singular { .. } | E::NonFinite(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "slm-bounds", version, about = "Variance bounds for the sparse linear model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CommandKind {
    Bound,
    Simulate,
    Fig1,
    Oracle,
    Spark,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-component L* with its maximizing support, the summed bound and, for the SSNM, the closed form.
    Bound(CommonArgs),
    /// Monte Carlo variance, MSE and bias of each configured estimator.
    Simulate(CommonArgs),
    /// Variance and bound curves of ML and HT over an SNR grid (N-dimensional SSNM, S = 1).
    Fig1(CommonArgs),
    /// Finite-test-point Barankin bound on grids around x0, compared with L^K.
    Oracle(CommonArgs),
    /// Whether every S columns of H are linearly independent.
    Spark(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON experiment configuration; fig1 falls back to its defaults without one.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path; without it the CSV goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Command {
    fn parts(&self) -> (CommandKind, &CommonArgs) {
        match self {
            Command::Bound(a) => (CommandKind::Bound, a),
            Command::Simulate(a) => (CommandKind::Simulate, a),
            Command::Fig1(a) => (CommandKind::Fig1, a),
            Command::Oracle(a) => (CommandKind::Oracle, a),
            Command::Spark(a) => (CommandKind::Spark, a),
        }
    }
}

/// What a command produced. `failure` carries a diagnostics error raised
/// after partial results were already assembled.
#[derive(Debug)]
pub struct CommandOutput {
    pub csv: String,
    pub summary: String,
    pub failure: Option<CliError>,
}

impl CommandOutput {
    fn ok(csv: String, summary: String) -> Self {
        Self {
            csv,
            summary,
            failure: None,
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join_one_based(k: &SupportSet) -> String {
    k.one_based().iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn write_csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    // writing to a Vec cannot fail
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn require_x0(cfg: &ExperimentConfig) -> Result<Vec<SparseVector>, CliError> {
    let xs = cfg.x0_vectors()?;
    if xs.is_empty() {
        return Err(CliError::Config("this command needs at least one x0".into()));
    }
    Ok(xs)
}

fn bound_config(cfg: &ExperimentConfig) -> BoundConfig {
    BoundConfig {
        quadrature: QuadratureConfig::default(),
        search: match cfg.bound.search {
            SearchSpec::Exhaustive => SupportSearch::Exhaustive {
                budget: cfg.bound.budget,
            },
            SearchSpec::Greedy => SupportSearch::Greedy,
        },
    }
}

/// One mean function per component for the configured mean kind.
pub fn mean_functions(model: &SparseLinearModel, spec: &MeanSpec) -> Result<Vec<MeanFunction>, CliError> {
    let n = model.n();
    let sigma = model.sigma();
    let need_ssnm = |what: &str| {
        if model.is_ssnm() {
            Ok(())
        } else {
            Err(CliError::Config(format!("the {what} mean is only available for H = I")))
        }
    };
    match *spec {
        MeanSpec::Unbiased => Ok((0..n).map(MeanFunction::unbiased).collect()),
        MeanSpec::Ht { threshold } => {
            need_ssnm("HT")?;
            Ok((0..n)
                .map(|k| MeanFunction::ht_induced(k, threshold, sigma))
                .collect::<Result<_, _>>()?)
        }
        MeanSpec::Ml { bank_trials, bank_seed } => {
            need_ssnm("ML")?;
            let s = model.sparsity();
            if s == 1 {
                Ok((0..n)
                    .map(|k| MeanFunction::ml_induced(k, 1, sigma, QuadratureConfig::default()))
                    .collect::<Result<_, _>>()?)
            } else {
                let bank = Arc::new(NoiseBank::new(n, bank_trials, bank_seed));
                Ok((0..n)
                    .map(|k| MeanFunction::ml_induced_monte_carlo(k, s, sigma, bank.clone()))
                    .collect::<Result<_, _>>()?)
            }
        }
    }
}

pub fn cmd_bound(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let model = cfg.model()?;
    let xs = require_x0(cfg)?;
    let gammas = mean_functions(&model, &cfg.bound.mean)?;
    let bcfg = bound_config(cfg);
    let mut rows = Vec::new();
    let mut summary = String::new();
    for (xi_idx, x0) in xs.iter().enumerate() {
        let id = (xi_idx + 1).to_string();
        let tb = theorem_bound(&model, &gammas, x0, &bcfg)?;
        let _ = writeln!(summary, "x0 #{id} = {:?}", x0.entries());
        for (k, c) in tb.components.iter().enumerate() {
            let support = join_one_based(&c.ingredients.support);
            let _ = writeln!(summary, "  L*_{:<3} = {:.10}   argmax K = {{{support}}}", k + 1, c.value);
            if let Some(w) = &c.ingredients.warning {
                let _ = writeln!(summary, "    warning: {w}");
            }
            rows.push(vec![id.clone(), (k + 1).to_string(), fmt_f64(c.value), support]);
        }
        let _ = writeln!(summary, "  theorem bound = {:.10}", tb.total);
        rows.push(vec![id.clone(), "total".into(), fmt_f64(tb.total), String::new()]);
        if model.is_ssnm() {
            let (xi, _) = xi_and_j(x0, model.sparsity());
            let c = ssnm_unbiased_bound(model.n(), model.sparsity(), xi, model.sigma2())?;
            let _ = writeln!(summary, "  closed form (unbiased) = {c:.10}");
            rows.push(vec![id.clone(), "closed_form".into(), fmt_f64(c), String::new()]);
        }
    }
    Ok(CommandOutput::ok(
        write_csv(&header(&["x0", "component", "value", "support"]), &rows),
        summary,
    ))
}

fn build_estimator(
    spec: &EstimatorSpec,
    model: &SparseLinearModel,
    x0: &SparseVector,
    budget: u64,
) -> Result<Estimator, CliError> {
    Ok(match spec {
        EstimatorSpec::Identity => Estimator::Identity,
        EstimatorSpec::MlSsnm => Estimator::ml_ssnm(model.sparsity())?,
        EstimatorSpec::MlSlm => Estimator::ml_slm(model, budget)?,
        EstimatorSpec::Ht { threshold } => Estimator::ht(*threshold)?,
        EstimatorSpec::Lmvu => {
            if !model.is_ssnm() || model.sparsity() != 1 {
                return Err(CliError::Config("the LMVU estimator needs H = I and S = 1".into()));
            }
            Estimator::lmvu_s1(x0, model.sigma2())?
        }
    })
}

/// The mean an estimator induces, when a bound for it is available.
fn induced_mean(spec: &EstimatorSpec, model: &SparseLinearModel) -> Option<MeanSpec> {
    if !model.is_ssnm() {
        return None;
    }
    match spec {
        EstimatorSpec::Identity | EstimatorSpec::Lmvu => Some(MeanSpec::Unbiased),
        EstimatorSpec::Ht { threshold } => Some(MeanSpec::Ht { threshold: *threshold }),
        EstimatorSpec::MlSsnm | EstimatorSpec::MlSlm if model.sparsity() == 1 => Some(MeanSpec::Ml {
            bank_trials: 0,
            bank_seed: 0,
        }),
        _ => None,
    }
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let model = cfg.model()?;
    let xs = require_x0(cfg)?;
    if cfg.estimators.is_empty() {
        return Err(CliError::Config("simulate needs at least one estimator".into()));
    }
    let bcfg = bound_config(cfg);
    let sim = &cfg.simulation;
    let mut rows = Vec::new();
    let mut summary = String::new();
    for (xi_idx, x0) in xs.iter().enumerate() {
        for spec in &cfg.estimators {
            let est = build_estimator(spec, &model, x0, cfg.bound.budget)?;
            let mut sspec = SimulationSpec::new(model.clone(), x0.entries().to_vec().into(), est, sim.trials, sim.seed);
            if let Some(c) = sim.chunk_size {
                sspec.chunk_size = c;
            }
            let st = simulate(&sspec)?;
            let bound = match induced_mean(spec, &model) {
                Some(m) => Some(theorem_bound(&model, &mean_functions(&model, &m)?, x0, &bcfg)?.total),
                None => None,
            };
            let _ = writeln!(
                summary,
                "x0 #{} {:<10} variance {:.6} +- {:.6}  mse {:.6}  |bias| {:.3e}  bound {}",
                xi_idx + 1,
                spec.label(),
                st.total_variance,
                st.se_total_variance,
                st.mse,
                st.bias_norm(),
                bound.map_or("-".into(), |b| format!("{b:.6}"))
            );
            rows.push(vec![
                spec.label(),
                (xi_idx + 1).to_string(),
                st.n_trials.to_string(),
                st.seed.to_string(),
                fmt_f64(st.total_variance),
                fmt_f64(st.se_total_variance),
                fmt_f64(st.mse),
                fmt_f64(st.se_mse),
                fmt_f64(st.bias_norm()),
                bound.map_or(String::new(), fmt_f64),
            ]);
        }
    }
    let h = header(&[
        "estimator",
        "x0",
        "n_trials",
        "seed",
        "total_variance",
        "se_variance",
        "mse",
        "se_mse",
        "bias_norm",
        "bound",
    ]);
    Ok(CommandOutput::ok(write_csv(&h, &rows), summary))
}

pub fn cmd_fig1(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let model = cfg.model()?;
    if !model.is_ssnm() || model.sparsity() != 1 {
        return Err(CliError::Config("fig1 needs H = I and S = 1".into()));
    }
    let sw = &cfg.sweep;
    let scfg = SweepConfig {
        n: model.n(),
        sigma: model.sigma(),
        snr_db: sw.snr_db.points()?,
        thresholds: sw.thresholds.clone(),
        trials: cfg.simulation.trials,
        seed: cfg.simulation.seed,
        quadrature: QuadratureConfig::default(),
    };
    let rows = fig1_sweep(&scfg)?;

    let tags: Vec<String> = sw.thresholds.iter().map(|t| format!("T{t}")).collect();
    let mut h = header(&["snr_db", "v_ml", "b_ml"]);
    for t in &tags {
        h.push(format!("v_ht_{t}"));
        h.push(format!("b_ht_{t}"));
    }
    if sw.standard_errors {
        h.push("se_ml".into());
        h.extend(tags.iter().map(|t| format!("se_ht_{t}")));
    }
    if sw.unbiased_reference {
        h.push("unbiased".into());
    }

    let mut summary = format!("{:>7} {:>12} {:>12} {:>8}\n", "snr_db", "v_ml", "b_ml", "ratio");
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let _ = writeln!(
                summary,
                "{:>7.2} {:>12.6} {:>12.6} {:>8.4}",
                r.snr_db,
                r.ml.variance,
                r.ml.bound,
                r.ml.variance / r.ml.bound
            );
            let mut row = vec![fmt_f64(r.snr_db), fmt_f64(r.ml.variance), fmt_f64(r.ml.bound)];
            for c in &r.ht {
                row.push(fmt_f64(c.variance));
                row.push(fmt_f64(c.bound));
            }
            if sw.standard_errors {
                row.push(fmt_f64(r.ml.se_variance));
                row.extend(r.ht.iter().map(|c| fmt_f64(c.se_variance)));
            }
            if sw.unbiased_reference {
                row.push(fmt_f64(r.unbiased));
            }
            row
        })
        .collect();
    Ok(CommandOutput::ok(write_csv(&h, &body), summary))
}

pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let model = cfg.model()?;
    let xs = require_x0(cfg)?;
    let opts = &cfg.oracle;
    let n = model.n();
    let s = model.sparsity();
    for &p in &opts.per_axis {
        if p.checked_pow(s as u32).is_none_or(|c| c > MAX_ORACLE_POINTS) {
            return Err(CliError::Config(format!(
                "oracle grid of {p}^{s} points exceeds the limit of {MAX_ORACLE_POINTS}"
            )));
        }
    }
    let gamma = mean_functions(&model, &cfg.bound.mean)?.swap_remove(opts.component - 1);
    let bcfg = bound_config(cfg);
    let half_width = opts.half_width * model.sigma();

    let mut rows = Vec::new();
    let mut failure = None;
    let mut summary = String::new();
    for (xi_idx, x0) in xs.iter().enumerate() {
        let l_k = match &opts.support {
            Some(idx) => {
                let k = SupportSet::from_one_based(idx, n)?;
                bound_l_k(&model, &gamma, &k, x0, &bcfg)?
            }
            None => bound_l_star(&model, &gamma, x0, &bcfg)?,
        };
        let k = &l_k.ingredients.support;
        let _ = writeln!(
            summary,
            "x0 #{} component {} K = {{{}}}  L^K = {:.10}",
            xi_idx + 1,
            opts.component,
            join_one_based(k),
            l_k.value
        );
        for &p in &opts.per_axis {
            let pts = grid_points(k, x0, half_width, p)?;
            let res = finite_point_bound(&model, &gamma, x0, &pts)?;
            let _ = writeln!(
                summary,
                "  grid {p:>4}/axis: {:>6} points, {:>6} usable, cond {:.2e}, oracle {:.10}, oracle - L^K {:+.3e}",
                res.total,
                res.usable,
                res.condition,
                res.value,
                res.value - l_k.value
            );
            rows.push(vec![
                (xi_idx + 1).to_string(),
                opts.component.to_string(),
                join_one_based(k),
                p.to_string(),
                res.total.to_string(),
                res.usable.to_string(),
                fmt_f64(res.condition),
                fmt_f64(res.value),
                fmt_f64(l_k.value),
                fmt_f64(res.value - l_k.value),
            ]);
            if opts.strict && failure.is_none() {
                if let Err(e) = res.require_well_conditioned() {
                    failure = Some(CliError::Core(e));
                }
            }
        }
    }
    let h = header(&[
        "x0",
        "component",
        "support",
        "per_axis",
        "points",
        "usable",
        "condition",
        "oracle",
        "l_k",
        "gap",
    ]);
    Ok(CommandOutput {
        csv: write_csv(&h, &rows),
        summary,
        failure,
    })
}

pub fn cmd_spark(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let h = cfg.matrix()?;
    let holds = spark_exceeds(&h, cfg.sparsity)?;
    let summary = format!(
        "H is {}x{}; spark(H) > S = {}: {}\n",
        h.rows(),
        h.cols(),
        cfg.sparsity,
        if holds { "yes" } else { "no" }
    );
    let rows = vec![vec![
        h.rows().to_string(),
        h.cols().to_string(),
        cfg.sparsity.to_string(),
        holds.to_string(),
    ]];
    Ok(CommandOutput::ok(
        write_csv(&header(&["rows", "cols", "sparsity", "spark_exceeds"]), &rows),
        summary,
    ))
}

const DEFAULT_CONFIG: &str = r#"{"model": "identity 5", "sparsity": 1}"#;

/// Loads the configuration and applies `--seed` and `--trials`.
pub fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::from_json(DEFAULT_CONFIG)?,
    };
    if let Some(seed) = args.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.simulation.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// `--out`, else the config's `output`; the environment override keeps the
/// file name and replaces the directory.
pub fn output_path(args_out: Option<&Path>, cfg: &ExperimentConfig, default_name: &str) -> Option<PathBuf> {
    let chosen = args_out.map(Path::to_path_buf).or_else(|| cfg.output.clone());
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => {
            let name = chosen
                .as_deref()
                .and_then(Path::file_name)
                .map(|n| n.to_os_string())
                .unwrap_or_else(|| default_name.into());
            Some(PathBuf::from(dir).join(name))
        }
        _ => chosen,
    }
}

/// Runs one command. CSV goes to the output file (or stdout); partial
/// results are written before a diagnostics failure is returned.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let (kind, args) = cli.command.parts();
    let cfg = load_config(args)?;
    if kind != CommandKind::Fig1 && args.config.is_none() {
        return Err(CliError::Config("--config is required for this command".into()));
    }
    let execute = || match kind {
        CommandKind::Bound => cmd_bound(&cfg),
        CommandKind::Simulate => cmd_simulate(&cfg),
        CommandKind::Fig1 => cmd_fig1(&cfg),
        CommandKind::Oracle => cmd_oracle(&cfg),
        CommandKind::Spark => cmd_spark(&cfg),
    };
    let out = match args.threads {
        Some(0) => return Err(CliError::Config("--threads must be positive".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
            .install(execute)?,
        None => execute()?,
    };
    let default_name = match kind {
        CommandKind::Bound => "bound.csv",
        CommandKind::Simulate => "simulate.csv",
        CommandKind::Fig1 => "fig1.csv",
        CommandKind::Oracle => "oracle.csv",
        CommandKind::Spark => "spark.csv",
    };
    match output_path(args.out.as_deref(), &cfg, default_name) {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            std::fs::write(&path, &out.csv).map_err(|e| CliError::Io {
                path: path.clone(),
                source: e,
            })?;
            print!("{}", out.summary);
            println!("wrote {}", path.display());
        }
        None => {
            eprint!("{}", out.summary);
            print!("{}", out.csv);
        }
    }
    out.failure.map_or(Ok(()), Err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(text).unwrap()
    }

    fn parse(csv_text: &str) -> Vec<csv::StringRecord> {
        csv::Reader::from_reader(csv_text.as_bytes())
            .records()
            .collect::<Result<_, _>>()
            .unwrap()
    }

    #[test]
    fn floats_round_trip() {
        for x in [1.0733, -0.1, 1e-300, 12345.678901234567, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(5.0), "5.0000000000000000e0");
    }

    #[test]
    fn bound_reports_closed_form() {
        let c = cfg(r#"{"model": "identity 5", "sparsity": 1, "x0": {"values": [2.0], "indices": [3]}}"#);
        let out = cmd_bound(&c).unwrap();
        let recs = parse(&out.csv);
        let total: f64 = recs.iter().find(|r| &r[1] == "total").unwrap()[2].parse().unwrap();
        let cor: f64 = recs.iter().find(|r| &r[1] == "closed_form").unwrap()[2].parse().unwrap();
        assert!((total - 1.073263).abs() < 5e-7, "{total}");
        assert!((total - cor).abs() <= 1e-12);
        // the on-support component maximizes at its own index
        assert_eq!(&recs[2][3], "3");
    }

    #[test]
    fn bound_at_zero_is_n_sigma2() {
        let c = cfg(r#"{"model": "identity 4", "sparsity": 2, "sigma2": 0.5, "x0": {"values": [0,0,0,0]}}"#);
        let recs = parse(&cmd_bound(&c).unwrap().csv);
        let total: f64 = recs.iter().find(|r| &r[1] == "total").unwrap()[2].parse().unwrap();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(
            CliError::Core(slm_bounds::Error::Budget {
                required: 10,
                budget: 1
            })
            .exit_code(),
            4
        );
        assert_eq!(
            CliError::Core(slm_bounds::Error::IllConditioned {
                usable: 1,
                total: 2,
                condition: 1e12
            })
            .exit_code(),
            3
        );
    }

    #[test]
    fn budget_is_enforced() {
        let c = cfg(
            r#"{"model": "identity 10", "sparsity": 3, "x0": {"values": [1.0], "indices": [1]},
                "bound": {"budget": 5}}"#,
        );
        assert_eq!(cmd_bound(&c).unwrap_err().exit_code(), 4);
    }

    #[test]
    fn identity_row_is_near_n_sigma2() {
        let c = cfg(
            r#"{"model": "identity 3", "sparsity": 1, "sigma2": 2.0, "x0": {"values": [1.0], "indices": [2]},
                "estimators": [{"kind": "identity"}], "simulation": {"trials": 20000, "seed": 4}}"#,
        );
        let recs = parse(&cmd_simulate(&c).unwrap().csv);
        let v: f64 = recs[0][4].parse().unwrap();
        let se: f64 = recs[0][5].parse().unwrap();
        assert!((v - 6.0).abs() < 4.0 * se);
        assert_eq!(&recs[0][2], "20000");
    }

    #[test]
    fn ssnm_only_options_rejected_for_general_h() {
        let c = cfg(
            r#"{"model": "gaussian 3x5 seed 2", "sparsity": 1, "x0": {"values": [1.0], "indices": [2]},
                "estimators": [{"kind": "lmvu"}], "simulation": {"trials": 1000}}"#,
        );
        assert_eq!(cmd_simulate(&c).unwrap_err().exit_code(), 2);
        let c = cfg(r#"{"model": "gaussian 3x5 seed 2", "sparsity": 1, "x0": {"values": [1.0], "indices": [2]},
                        "bound": {"mean": {"kind": "ht", "threshold": 3}}}"#);
        assert_eq!(cmd_bound(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn fig1_header_and_extras() {
        let c = cfg(
            r#"{"model": "identity 5", "sparsity": 1, "simulation": {"trials": 500},
                "sweep": {"snr_db": [-30, 20]}}"#,
        );
        let out = cmd_fig1(&c).unwrap();
        assert_eq!(
            out.csv.lines().next().unwrap(),
            "snr_db,v_ml,b_ml,v_ht_T3,b_ht_T3,v_ht_T4,b_ht_T4,v_ht_T5,b_ht_T5"
        );
        assert_eq!(out.csv.lines().count(), 3);
        let c = cfg(
            r#"{"model": "identity 5", "sparsity": 1, "simulation": {"trials": 500},
                "sweep": {"snr_db": [-30], "thresholds": [4], "unbiased_reference": true, "standard_errors": true}}"#,
        );
        let out = cmd_fig1(&c).unwrap();
        assert_eq!(
            out.csv.lines().next().unwrap(),
            "snr_db,v_ml,b_ml,v_ht_T4,b_ht_T4,se_ml,se_ht_T4,unbiased"
        );
        let recs = parse(&out.csv);
        let unbiased: f64 = recs[0][7].parse().unwrap();
        assert!((unbiased - 5.0).abs() < 5e-3);
    }

    #[test]
    fn oracle_single_point_grid_is_zero() {
        let c = cfg(
            r#"{"model": "identity 3", "sparsity": 1, "x0": {"values": [1.5], "indices": [1]},
                "oracle": {"per_axis": [1], "support": [1]}}"#,
        );
        let out = cmd_oracle(&c).unwrap();
        let recs = parse(&out.csv);
        let v: f64 = recs[0][7].parse().unwrap();
        // x0 alone: only the jitter separates the value from 0
        assert!(v <= 0.0 && v > -1e-9, "{v}");
        assert!(out.failure.is_none());
    }

    #[test]
    fn strict_oracle_reports_partial_results() {
        let c = cfg(
            r#"{"model": "identity 3", "sparsity": 1, "x0": {"values": [1.0], "indices": [1]},
                "oracle": {"per_axis": [5, 201], "strict": true}}"#,
        );
        let out = cmd_oracle(&c).unwrap();
        assert_eq!(parse(&out.csv).len(), 2);
        assert_eq!(out.failure.unwrap().exit_code(), 3);
    }

    #[test]
    fn spark_command() {
        let c = cfg(r#"{"model": {"rows": 2, "cols": 3, "data": [1,0,1, 0,1,1]}, "sparsity": 1}"#);
        assert!(cmd_spark(&c).unwrap().csv.ends_with("2,3,1,true\n"));
    }
}
