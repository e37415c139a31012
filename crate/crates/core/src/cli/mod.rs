//! Command implementations behind the `longsurr` binary.
//!
//! Every command writes `report.json` (keys `config`, `trajectories`, `metrics`,
//! `validation`, `timings`, `provenance`) plus command-specific CSV files into
//! the output directory. Reports contain no wall-clock values, so a fixed seed
//! and config give byte-identical reports at any thread count; stage durations
//! go to `timings.json` instead.

pub mod config;

use crate::error::{Error, Result};
use crate::estimators::{
    compute_metrics, estimate_linear_additive, AdditiveEstimate, EffectTrajectory, EstimatorSpec, Provenance,
    TrajectoryPoint,
};
use crate::inference::{
    permutation_test_at, randomization_bootstrap, subsample_bootstrap, BandMethod, CiBand, PermutationResult,
};
use crate::numerics::RandomStream;
use crate::panel::{pretreatment_balance, srm_test, BalanceReport};
use crate::panel::{load_panel, save_panel, ColumnSpec};
use crate::panel::{ExperimentWindow, PanelDataset};
use crate::synthgen::{generate, write_sidecar, SynthSpec};
use crate::validation::{
    comparability_test, parallel_trends_test, sensitivity_omitted_surrogate, sensitivity_surrogate_subsets,
    MatchOptions, ValidationReport,
};
use clap::{Args, Parser, Subcommand};
use config::{InferenceMethod, RunConfig};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "longsurr", version, about = "Long-term treatment effects from short-term panel experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic panel plus truth sidecar.
    Simulate(Common),
    /// Run the configured estimators (and inference) on a panel.
    Estimate(Common),
    /// Randomization checks, comparability / parallel-trends tests, sensitivity curves.
    Validate(Common),
    /// Bias / MSE over seeds and experimental windows on a synthetic design.
    Bench(Common),
    /// Merge existing report.json files.
    Report {
        #[command(flatten)]
        common: Common,
        /// Reports to merge.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Include raw replicate statistics in the report.
    #[arg(long)]
    pub dump_replicates: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProvenanceEntry {
    pub item: String,
    pub module: &'static str,
    pub operation: &'static str,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PermutationSummary {
    pub period: usize,
    pub observed_statistic: f64,
    pub p_value: f64,
    pub m: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicate_statistics: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryEntry {
    pub estimator: String,
    pub t_experimental: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<EffectTrajectory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<CiBand>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation: Option<PermutationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive: Option<AdditiveEstimate>,
    /// Seeds averaged by `bench`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub estimator: String,
    pub t_experimental: usize,
    pub bias: f64,
    pub signed_error: f64,
    pub mse: f64,
    pub replicas: usize,
    pub seeds: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSection {
    pub randomization: BalanceReport,
    #[serde(flatten)]
    pub report: ValidationReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub fingerprint: String,
    pub command: String,
    pub effective: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingsEcho {
    pub file: &'static str,
    pub stages: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: ConfigEcho,
    pub trajectories: Vec<TrajectoryEntry>,
    pub metrics: Vec<MetricsRow>,
    pub validation: Option<ValidationSection>,
    pub timings: TimingsEcho,
    pub provenance: Vec<ProvenanceEntry>,
}

#[derive(Default)]
struct Stopwatch {
    stages: Vec<(String, f64)>,
}

impl Stopwatch {
    fn time<T>(&mut self, stage: impl Into<String>, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.stages.push((stage.into(), start.elapsed().as_secs_f64() * 1e3));
        Ok(out)
    }
}

/// Parses the process arguments and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Simulate(c) | Command::Estimate(c) | Command::Validate(c) | Command::Bench(c) => c,
        Command::Report { common, .. } => common,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Report { common, inputs } => cmd_report(common, inputs),
        Command::Simulate(c) => with_config(c, "simulate", cmd_simulate),
        Command::Estimate(c) => with_config(c, "estimate", cmd_estimate),
        Command::Validate(c) => with_config(c, "validate", cmd_validate),
        Command::Bench(c) => with_config(c, "bench", cmd_bench),
    })
}

struct Ctx<'a> {
    cfg: RunConfig,
    common: &'a Common,
    command: &'static str,
    out: PathBuf,
    watch: Stopwatch,
    provenance: Vec<ProvenanceEntry>,
}

type CommandFn = fn(&mut Ctx<'_>) -> Result<(Vec<TrajectoryEntry>, Vec<MetricsRow>, Option<ValidationSection>)>;

fn with_config(common: &Common, command: &'static str, f: CommandFn) -> Result<()> {
    let path = common.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate(&base)?;
    let out = match &cfg.out {
        Some(o) if o.is_relative() && common.out.is_none() => base.join(o),
        Some(o) => o.clone(),
        None => PathBuf::from("out"),
    };
    std::fs::create_dir_all(&out)?;
    let mut ctx = Ctx { cfg, common, command, out, watch: Stopwatch::default(), provenance: Vec::new() };
    let (trajectories, metrics, validation) = f(&mut ctx)?;
    finish(ctx, trajectories, metrics, validation)
}

fn config_echo(cfg: &RunConfig, command: &str) -> Result<ConfigEcho> {
    let mut effective = serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    // file locations do not change results
    if let Some(obj) = effective.as_object_mut() {
        obj.remove("out");
    }
    let canonical = serde_json::to_string(&effective).map_err(|e| Error::Config(e.to_string()))?;
    let digest = Sha256::digest(canonical.as_bytes());
    let fingerprint = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    Ok(ConfigEcho { fingerprint, command: command.into(), effective })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn finish(
    ctx: Ctx<'_>,
    trajectories: Vec<TrajectoryEntry>,
    metrics: Vec<MetricsRow>,
    validation: Option<ValidationSection>,
) -> Result<()> {
    let report = RunReport {
        config: config_echo(&ctx.cfg, ctx.command)?,
        timings: TimingsEcho { file: "timings.json", stages: ctx.watch.stages.iter().map(|s| s.0.clone()).collect() },
        trajectories,
        metrics,
        validation,
        provenance: ctx.provenance,
    };
    write_json(&ctx.out.join("report.json"), &report)?;
    write_trajectories_csv(&ctx.out.join("trajectories.csv"), &report.trajectories)?;
    write_metrics_csv(&ctx.out.join("metrics.csv"), &report.metrics)?;
    let timings: Vec<Value> = ctx
        .watch
        .stages
        .iter()
        .map(|(s, ms)| serde_json::json!({ "stage": s, "elapsed_ms": ms }))
        .collect();
    write_json(&ctx.out.join("timings.json"), &timings)?;
    log::info!("cli: wrote {}", ctx.out.join("report.json").display());
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

fn write_trajectories_csv(path: &Path, entries: &[TrajectoryEntry]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["estimator", "t_experimental", "period", "estimate", "provenance", "lower", "upper"])
        .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in entries {
        if let Some(tr) = &e.trajectory {
            for p in &tr.points {
                w.write_record([
                    e.estimator.clone(),
                    e.t_experimental.to_string(),
                    p.period.to_string(),
                    p.estimate.to_string(),
                    p.provenance.as_str().to_string(),
                    opt(p.lower),
                    opt(p.upper),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["estimator", "t_experimental", "seeds", "bias", "mse", "signed_error", "replicas"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.estimator.clone(),
            r.t_experimental.to_string(),
            r.seeds.to_string(),
            r.bias.to_string(),
            r.mse.to_string(),
            r.signed_error.to_string(),
            r.replicas.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Seed for a named sub-task, derived from the run seed.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    RandomStream::new(seed).substream(tag).next_u64()
}

struct Loaded {
    ds: PanelDataset,
    truth: Option<Vec<f64>>,
}

fn synth_spec(ctx: &Ctx<'_>) -> Option<SynthSpec> {
    ctx.cfg.data.synth.clone().map(|mut s| {
        s.seed = ctx.cfg.seed();
        s
    })
}

fn read_sidecar(path: &Path) -> Result<(Vec<f64>, usize)> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::Data(format!("sidecar {}: {e}", path.display())))?;
    let truth = v
        .get("truth")
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
        .ok_or_else(|| Error::Data(format!("sidecar {} has no numeric `truth` array", path.display())))?;
    let pre = v.pointer("/spec/observational_periods").and_then(Value::as_u64).unwrap_or(0) as usize;
    Ok((truth, pre))
}

fn load(ctx: &mut Ctx<'_>) -> Result<Loaded> {
    if let Some(spec) = synth_spec(ctx) {
        let (ds, oracle) = ctx.watch.time("generate", || generate(&spec))?;
        ctx.provenance.push(ProvenanceEntry {
            item: "panel".into(),
            module: "synthgen",
            operation: "generate",
            seed: Some(spec.seed),
        });
        return Ok(Loaded { ds, truth: Some(oracle.tau) });
    }
    let path = ctx.cfg.data.path.clone().expect("validated config has a data source");
    let w = ctx.cfg.window.expect("validated config has a window");
    let window = ExperimentWindow::new(w.t_experimental, w.t_total)?;
    let (truth, sidecar_pre) = match &ctx.cfg.data.sidecar {
        Some(p) => {
            let (t, pre) = read_sidecar(p)?;
            if t.len() != w.t_total {
                return Err(Error::Data(format!("sidecar truth has {} periods, window T is {}", t.len(), w.t_total)));
            }
            (Some(t), pre)
        }
        None => (None, 0),
    };
    let spec = ColumnSpec { pre_periods: ctx.cfg.data.pre_periods.unwrap_or(sidecar_pre), ..ColumnSpec::infer(window) };
    let ds = ctx.watch.time("load", || load_panel(&path, &spec))?;
    ctx.provenance.push(ProvenanceEntry { item: "panel".into(), module: "panel", operation: "load_panel", seed: None });
    Ok(Loaded { ds, truth })
}

fn cmd_simulate(ctx: &mut Ctx<'_>) -> Result<(Vec<TrajectoryEntry>, Vec<MetricsRow>, Option<ValidationSection>)> {
    let spec = synth_spec(ctx).ok_or_else(|| Error::Config("simulate needs [data.synth]".into()))?;
    let (ds, oracle) = ctx.watch.time("generate", || generate(&spec))?;
    let out = ctx.out.clone();
    ctx.watch.time("write", || {
        save_panel(&ds, &out.join("panel.csv"))?;
        write_sidecar(&out.join("panel.json"), &spec, &oracle)
    })?;
    ctx.provenance.push(ProvenanceEntry {
        item: "panel.csv".into(),
        module: "synthgen",
        operation: "generate",
        seed: Some(spec.seed),
    });
    let obs: Vec<TrajectoryPoint> = oracle
        .tau
        .iter()
        .enumerate()
        .map(|(k, &v)| TrajectoryPoint::new(k + 1, v, Provenance::Observed))
        .collect();
    let truth = EffectTrajectory {
        estimator: "truth".into(),
        options_fingerprint: format!("{:?}", oracle.method),
        t_experimental: spec.t_experimental,
        points: obs,
    };
    let entry = TrajectoryEntry {
        estimator: "truth".into(),
        t_experimental: spec.t_experimental,
        trajectory: Some(truth),
        band: None,
        permutation: None,
        additive: None,
        seeds: None,
    };
    Ok((vec![entry], vec![], None))
}

fn cmd_estimate(ctx: &mut Ctx<'_>) -> Result<(Vec<TrajectoryEntry>, Vec<MetricsRow>, Option<ValidationSection>)> {
    let Loaded { ds, truth } = load(ctx)?;
    let seed = ctx.cfg.seed();
    let te = ds.window().t_experimental();
    let inf = ctx.cfg.inference;
    let dump = ctx.common.dump_replicates;
    let mut entries = Vec::new();
    let mut metrics = Vec::new();
    for (k, spec) in ctx.cfg.estimators.clone().iter().enumerate() {
        let name = spec.name();
        let tr = ctx.watch.time(format!("estimate:{name}"), || spec.run(&ds, seed))?;
        ctx.provenance.push(ProvenanceEntry {
            item: format!("trajectory:{name}#{k}"),
            module: "estimators",
            operation: estimator_operation(spec),
            seed: Some(seed),
        });
        let est = |d: &PanelDataset| spec.run(d, seed);
        let inf_seed = derive_seed(seed, 0x696e_6600 + k as u64);
        let mut band = None;
        let mut permutation = None;
        let stage = format!("inference:{name}");
        match inf.method {
            InferenceMethod::None => {}
            InferenceMethod::Permutation => {
                let period = inf.period.unwrap_or(ds.window().t_total());
                let r = ctx.watch.time(stage, || permutation_test_at(&ds, &est, inf.replicas, inf_seed, period))?;
                permutation = Some(summarize_permutation(r, dump));
            }
            InferenceMethod::RandomizationBootstrap => {
                band = Some(ctx.watch.time(stage, || randomization_bootstrap(&ds, &est, inf.replicas, inf_seed, inf.level))?);
            }
            InferenceMethod::SubsampleBootstrap => {
                band = Some(ctx.watch.time(stage, || {
                    subsample_bootstrap(&ds, &est, inf.replicas, inf.fraction, inf_seed, inf.level)
                })?);
            }
        }
        if inf.method != InferenceMethod::None {
            ctx.provenance.push(ProvenanceEntry {
                item: format!("inference:{name}#{k}"),
                module: "inference",
                operation: inference_operation(inf.method),
                seed: Some(inf_seed),
            });
        }
        if let Some(truth) = &truth {
            let reps = band.as_ref().and_then(|b: &CiBand| {
                (b.method == BandMethod::SubsampleBootstrap).then_some(b.replicate_trajectories.as_deref()).flatten()
            });
            let m = compute_metrics(&tr, truth, reps)?;
            metrics.push(MetricsRow {
                estimator: name.into(),
                t_experimental: te,
                bias: m.bias,
                signed_error: m.signed_error,
                mse: m.mse,
                replicas: m.replicas,
                seeds: 1,
            });
        }
        let tr = match &band {
            Some(b) => b.apply(tr)?,
            None => tr,
        };
        if let Some(b) = &mut band {
            if !dump {
                b.replicate_trajectories = None;
            }
        }
        entries.push(TrajectoryEntry {
            estimator: name.into(),
            t_experimental: te,
            trajectory: Some(tr),
            band,
            permutation,
            additive: None,
            seeds: None,
        });
    }
    if let Some(opts) = ctx.cfg.additive {
        let est = ctx.watch.time("estimate:additive", || estimate_linear_additive(&ds, &opts))?;
        ctx.provenance.push(ProvenanceEntry {
            item: "additive".into(),
            module: "estimators",
            operation: "estimate_linear_additive",
            seed: None,
        });
        entries.push(TrajectoryEntry {
            estimator: "additive".into(),
            t_experimental: te,
            trajectory: None,
            band: None,
            permutation: None,
            additive: Some(est),
            seeds: None,
        });
    }
    Ok((entries, metrics, None))
}

fn summarize_permutation(r: PermutationResult, dump: bool) -> PermutationSummary {
    PermutationSummary {
        period: r.period,
        observed_statistic: r.observed_statistic,
        p_value: r.p_value,
        m: r.m,
        failures: r.failures,
        replicate_statistics: dump.then_some(r.replicate_statistics),
    }
}

fn estimator_operation(spec: &EstimatorSpec) -> &'static str {
    match spec {
        EstimatorSpec::Ceb => "estimate_ceb",
        EstimatorSpec::Var => "estimate_var",
        EstimatorSpec::Lsm(_) => "estimate_lsm",
        EstimatorSpec::Knn { .. } => "estimate_knn",
        EstimatorSpec::Discrete(_) => "estimate_longitudinal_discrete",
    }
}

fn inference_operation(m: InferenceMethod) -> &'static str {
    match m {
        InferenceMethod::None => "none",
        InferenceMethod::Permutation => "permutation_test",
        InferenceMethod::RandomizationBootstrap => "randomization_bootstrap",
        InferenceMethod::SubsampleBootstrap => "subsample_bootstrap",
    }
}

fn cmd_validate(ctx: &mut Ctx<'_>) -> Result<(Vec<TrajectoryEntry>, Vec<MetricsRow>, Option<ValidationSection>)> {
    let Loaded { ds, truth } = load(ctx)?;
    let seed = ctx.cfg.seed();
    let v = ctx.cfg.validation.clone();
    let opts = MatchOptions { n_bins: v.n_bins, use_covariates: v.use_covariates };
    let mut randomization = ctx.watch.time("srm", || srm_test(&ds, v.treated_fraction))?;
    randomization.variables = ctx.watch.time("balance", || pretreatment_balance(&ds))?.variables;
    ctx.provenance.push(ProvenanceEntry { item: "randomization".into(), module: "panel", operation: "srm_test", seed: None });
    let mut report = ValidationReport::default();
    for p in &v.comparability {
        let r = ctx.watch.time("comparability", || comparability_test(&ds, p.t, p.t_prime, p.delta, &opts))?;
        ctx.provenance.push(ProvenanceEntry {
            item: format!("comparability:{}-{}-{}", p.t, p.t_prime, p.delta),
            module: "validation",
            operation: "comparability_test",
            seed: None,
        });
        report.comparability.extend(r);
    }
    for (k, p) in v.parallel_trends.iter().enumerate() {
        let s = derive_seed(seed, 0x7074_0000 + k as u64);
        let r = ctx.watch.time("parallel_trends", || parallel_trends_test(&ds, p.t, p.t_prime, p.delta, &opts, s, v.level))?;
        ctx.provenance.push(ProvenanceEntry {
            item: format!("parallel_trends:{}-{}-{}", p.t, p.t_prime, p.delta),
            module: "validation",
            operation: "parallel_trends_test",
            seed: Some(s),
        });
        report.parallel_trends.push(r);
    }
    if !v.theta_grid.is_empty() || !v.subsets.is_empty() {
        let spec = ctx.cfg.estimators[0].clone();
        let est = |d: &PanelDataset| spec.run(d, seed);
        // without a known truth the unperturbed estimate is the reference
        let reference = match &truth {
            Some(t) => t.clone(),
            None => spec.run(&ds, seed)?.estimates(),
        };
        if !v.theta_grid.is_empty() {
            let s = derive_seed(seed, 0x7a65_7461);
            let c = ctx.watch.time("sensitivity:omitted", || sensitivity_omitted_surrogate(&ds, &est, &v.theta_grid, &reference, s))?;
            ctx.provenance.push(ProvenanceEntry {
                item: "sensitivity:omitted_surrogate".into(),
                module: "validation",
                operation: "sensitivity_omitted_surrogate",
                seed: Some(s),
            });
            report.sensitivity.push(c);
        }
        if !v.subsets.is_empty() {
            let c = ctx.watch.time("sensitivity:subsets", || sensitivity_surrogate_subsets(&ds, &est, &v.subsets, &reference))?;
            ctx.provenance.push(ProvenanceEntry {
                item: "sensitivity:surrogate_subsets".into(),
                module: "validation",
                operation: "sensitivity_surrogate_subsets",
                seed: Some(seed),
            });
            report.sensitivity.push(c);
        }
    }
    report.write_comparability_csv(std::fs::File::create(ctx.out.join("comparability.csv"))?)?;
    report.write_parallel_trends_csv(std::fs::File::create(ctx.out.join("parallel_trends.csv"))?)?;
    Ok((vec![], vec![], Some(ValidationSection { randomization, report })))
}

fn cmd_bench(ctx: &mut Ctx<'_>) -> Result<(Vec<TrajectoryEntry>, Vec<MetricsRow>, Option<ValidationSection>)> {
    let base = synth_spec(ctx).ok_or_else(|| Error::Config("bench needs [data.synth]".into()))?;
    let bench = ctx.cfg.bench.clone();
    if bench.seeds == 0 || bench.t_experimental.is_empty() {
        return Err(Error::Config("bench needs at least one seed and one T_E".into()));
    }
    let windows = bench
        .t_experimental
        .iter()
        .map(|&te| ExperimentWindow::new(te, base.t_total))
        .collect::<Result<Vec<_>>>()?;
    let specs = ctx.cfg.estimators.clone();
    let t_total = base.t_total;
    // [window][estimator] → (sum of estimates per period, bias, signed, mse)
    let mut acc = vec![vec![(vec![0.0; t_total], 0.0, 0.0, 0.0); specs.len()]; windows.len()];
    for k in 0..bench.seeds {
        let spec = SynthSpec { seed: base.seed.wrapping_add(k as u64), ..base.clone() };
        let (full, oracle) = ctx.watch.time(format!("generate:{}", spec.seed), || generate(&spec))?;
        for (wi, w) in windows.iter().enumerate() {
            let ds = full.with_window(*w)?;
            for (ei, est) in specs.iter().enumerate() {
                let tr = ctx.watch.time(format!("estimate:{}:te{}:seed{}", est.name(), w.t_experimental(), spec.seed), || {
                    est.run(&ds, spec.seed)
                })?;
                let m = compute_metrics(&tr, &oracle.tau, None)?;
                let a = &mut acc[wi][ei];
                a.0.iter_mut().zip(tr.estimates()).for_each(|(s, v)| *s += v);
                a.1 += m.bias;
                a.2 += m.signed_error;
                a.3 += m.mse;
            }
        }
    }
    ctx.provenance.push(ProvenanceEntry {
        item: format!("bench:{}..{}", base.seed, base.seed.wrapping_add(bench.seeds as u64 - 1)),
        module: "synthgen",
        operation: "generate",
        seed: Some(base.seed),
    });
    let n = bench.seeds as f64;
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    for (wi, w) in windows.iter().enumerate() {
        let te = w.t_experimental();
        for (ei, est) in specs.iter().enumerate() {
            let (sums, bias, signed, mse) = &acc[wi][ei];
            let mean: Vec<f64> = sums.iter().map(|s| s / n).collect();
            let observed =
                (0..te).map(|p| TrajectoryPoint::new(p + 1, mean[p], Provenance::Observed)).collect::<Vec<_>>();
            let tr = EffectTrajectory::from_parts(est.name(), format!("mean over {} seeds", bench.seeds), observed, &mean[te..]);
            entries.push(TrajectoryEntry {
                estimator: est.name().into(),
                t_experimental: te,
                trajectory: Some(tr),
                band: None,
                permutation: None,
                additive: None,
                seeds: Some(bench.seeds),
            });
            rows.push(MetricsRow {
                estimator: est.name().into(),
                t_experimental: te,
                bias: bias / n,
                signed_error: signed / n,
                mse: mse / n,
                replicas: 0,
                seeds: bench.seeds,
            });
            ctx.provenance.push(ProvenanceEntry {
                item: format!("metrics:{}:te{te}", est.name()),
                module: "estimators",
                operation: estimator_operation(est),
                seed: Some(base.seed),
            });
        }
    }
    write_metrics_csv(&ctx.out.join("bench.csv"), &rows)?;
    Ok((entries, rows, None))
}

fn cmd_report(common: &Common, inputs: &[PathBuf]) -> Result<()> {
    let keys = ["config", "trajectories", "metrics", "validation", "timings", "provenance"];
    let mut merged: serde_json::Map<String, Value> = keys.iter().map(|k| (k.to_string(), Value::Array(vec![]))).collect();
    for path in inputs {
        let text = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let obj = v.as_object().ok_or_else(|| Error::Data(format!("{}: not a report object", path.display())))?;
        for k in keys {
            let item = obj.get(k).ok_or_else(|| Error::Schema(format!("{k} in {}", path.display())))?;
            let slot = merged.get_mut(k).and_then(Value::as_array_mut).expect("initialised above");
            match item {
                Value::Array(a) => slot.extend(a.iter().cloned()),
                Value::Null => {}
                other => slot.push(other.clone()),
            }
        }
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)?;
    write_json(&out.join("report.json"), &Value::Object(merged))
}
