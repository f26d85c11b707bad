//! Command-line front end. Each subcommand writes its tables and a
//! `manifest.json` into the output directory.
//!
//! Settings are layered: flags override the `--config` TOML file, which
//! overrides per-subcommand defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use crate::bma::REGRESSION_FLAGS;
use crate::error::{Error, Result};
use crate::experiments::{
    self, empirical, fit_truncated, point_prediction, AnovaTable, BmaExperimentConfig, BoundCheckConfig,
    CpExperimentConfig, EmpiricalConfig, KappaChoice, McmcSettings, PointPredictor, SyntheticSpec, WaicSweepConfig,
};
use crate::io::{self, Cell, ColumnMapping, Dataset, OutputDir, RunConfig, Scale, Table};
use crate::rng;
use crate::sampler::{default_decay_levels, ModelSpec};
use crate::stats;

#[derive(Debug, Parser)]
#[command(
    name = "trunc-cpe",
    version,
    about = "Truncated CPE models: experiments, fitting and WAIC sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Subset selection frequencies of Mallows' Cp across noise levels.
    CpExperiment,
    /// Squared-error differences between uniform and restricted BMA priors.
    BmaExperiment,
    /// Full SNR x percentile factorial with responses and ANOVA.
    Simulate,
    /// Untruncated and truncated chains on one dataset.
    Fit,
    /// WAIC over a grid of CPE percentiles.
    WaicSweep,
    /// Two-way ANOVA of a responses table (columns snr, d, response).
    Anova,
    /// Monte Carlo check that truncating at the comparator error plus n sigma2 lowers squared error.
    #[command(name = "theorem2-check")]
    BoundCheck,
}

#[derive(Debug, Args)]
struct Flags {
    /// TOML file with default settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Desk-scale sizes (default).
    #[arg(long, global = true, conflicts_with = "paper_scale")]
    desk_scale: bool,
    /// Sizes used in the original study.
    #[arg(long, global = true)]
    paper_scale: bool,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Noise standard deviation(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    /// Signal-to-noise ratio(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    snr: Option<Vec<f64>>,
    /// CPE percentile level(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    d: Option<Vec<f64>>,
    #[arg(long, global = true, conflicts_with = "kappa_abs")]
    kappa_percentile: Option<f64>,
    #[arg(long, global = true)]
    kappa_abs: Option<f64>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    burn_in: Option<usize>,
    #[arg(long, global = true)]
    max_rejections: Option<usize>,
    /// Size of the synthetic dataset used when --data is absent.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Delimited dataset: x, y, response, then covariates.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Column mapping, e.g. `x=E,y=N,response=thick,covariates=a|b`.
    #[arg(long, global = true)]
    columns: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Flags {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            scale: if self.paper_scale {
                Some(Scale::Paper)
            } else if self.desk_scale {
                Some(Scale::Desk)
            } else {
                None
            },
            replicates: self.replicates,
            sigma: self.sigma.clone(),
            snr: self.snr.clone(),
            d: self.d.clone(),
            kappa_percentile: self.kappa_percentile,
            kappa_abs: self.kappa_abs,
            iterations: self.iterations,
            burn_in: self.burn_in,
            max_rejections: self.max_rejections,
            n: self.n,
            data: self.data.clone(),
            columns: self.columns.clone(),
            out: self.out.clone(),
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(out) => {
            println!("wrote {}", out.display());
            0
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            if matches!(e.category(), "config" | "invalid-input") {
                2
            } else {
                1
            }
        }
    }
}

fn run(cli: &Cli) -> Result<PathBuf> {
    let file = match &cli.flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cfg = file.overridden_by(cli.flags.to_config());
    match cli.command {
        Command::CpExperiment => cp_experiment(&cfg),
        Command::BmaExperiment => bma_experiment(&cfg),
        Command::Simulate => simulate(&cfg),
        Command::Fit => fit(&cfg),
        Command::WaicSweep => waic_sweep(&cfg),
        Command::Anova => anova(&cfg),
        Command::BoundCheck => bound_check(&cfg),
    }
}

fn out_dir(cfg: &RunConfig, name: &str) -> Result<OutputDir> {
    let root = cfg.out.clone().unwrap_or_else(|| Path::new("results").join(name));
    OutputDir::create(&root)
}

fn mcmc_settings(cfg: &RunConfig) -> McmcSettings {
    let base = match cfg.scale_or_desk() {
        Scale::Desk => McmcSettings::desk(),
        Scale::Paper => McmcSettings::paper(),
    };
    McmcSettings {
        total_iterations: cfg.iterations.unwrap_or(base.total_iterations),
        burn_in: cfg.burn_in.unwrap_or(base.burn_in),
        max_rejections: cfg.max_rejections.unwrap_or(base.max_rejections),
    }
}

/// The supplied dataset, or the synthetic stand-in with a warning.
fn dataset(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data {
        Some(path) => {
            let mapping = match &cfg.columns {
                Some(spec) => ColumnMapping::parse(spec)?,
                None => ColumnMapping::default(),
            };
            io::load_dataset_with(path, &mapping)
        }
        None => {
            let n = cfg.n.unwrap_or(match cfg.scale_or_desk() {
                Scale::Desk => 40,
                Scale::Paper => 112,
            });
            eprintln!("warning: no --data given; using a synthetic dataset with n = {n}");
            experiments::synthetic_dataset(
                &SyntheticSpec {
                    n,
                    ..Default::default()
                },
                cfg.seed.unwrap_or(0),
            )
        }
    }
}

fn num_cells(values: &[f64]) -> Vec<Cell> {
    values.iter().map(|&v| Cell::Num(v)).collect()
}

fn cp_experiment(cfg: &RunConfig) -> Result<PathBuf> {
    let mut out = out_dir(cfg, "cp-experiment")?;
    let defaults = CpExperimentConfig::default();
    let config = CpExperimentConfig {
        replicates: cfg.replicates.unwrap_or(defaults.replicates),
        sigmas: cfg.sigma.clone().unwrap_or(defaults.sigmas),
        seed: cfg.seed.unwrap_or(0),
        ..defaults
    };
    let rows = experiments::run_cp_experiment(&config)?;
    let mut table = Table::new(["sigma", "model", "delta1", "delta2", "delta3", "count", "frequency"]);
    for row in &rows {
        for (k, flags) in REGRESSION_FLAGS.iter().enumerate() {
            let mut cells = vec![Cell::Num(row.sigma), (k + 1).into()];
            cells.extend(flags.iter().map(|&f| Cell::from(usize::from(f))));
            cells.extend([row.counts[k].into(), Cell::Num(row.frequency(k + 1))]);
            table.push(cells)?;
        }
    }
    out.write_table("selection_frequencies.csv", &table)?;
    out.finish("cp-experiment", config.seed, &config)
}

#[derive(Serialize)]
struct DifferenceSummary {
    replicates: usize,
    positive_fraction: f64,
    median: f64,
    mean: f64,
}

fn bma_experiment(cfg: &RunConfig) -> Result<PathBuf> {
    let mut out = out_dir(cfg, "bma-experiment")?;
    let defaults = BmaExperimentConfig::default();
    let config = BmaExperimentConfig {
        replicates: cfg.replicates.unwrap_or(defaults.replicates),
        sigma: cfg
            .sigma
            .as_ref()
            .and_then(|s| s.first().copied())
            .unwrap_or(defaults.sigma),
        seed: cfg.seed.unwrap_or(0),
        ..defaults
    };
    let diffs = experiments::run_bma_experiment(&config)?;
    let mut table = Table::new(["replicate", "difference"]);
    for (rep, d) in diffs.iter().enumerate() {
        table.push(vec![rep.into(), Cell::Num(*d)])?;
    }
    let summary = DifferenceSummary {
        replicates: diffs.len(),
        positive_fraction: diffs.iter().filter(|&&d| d > 0.0).count() as f64 / diffs.len() as f64,
        median: stats::percentile(&diffs, 0.5)?,
        mean: stats::mean(&diffs),
    };
    out.write_table("squared_error_differences.csv", &table)?;
    out.write_json("summary.json", &summary)?;
    out.finish("bma-experiment", config.seed, &config)
}

fn anova_table(t: &AnovaTable) -> Result<Table> {
    let mut table = Table::new(["effect", "DF", "SumSq", "MeanSq", "F", "p"]);
    for r in &t.rows {
        table.push(vec![
            r.name.clone().into(),
            r.df.into(),
            Cell::Num(r.sum_sq),
            Cell::Num(r.mean_sq),
            Cell::Num(r.f),
            Cell::Num(r.p),
        ])?;
    }
    Ok(table)
}

fn simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let mut out = out_dir(cfg, "simulate")?;
    let seed = cfg.seed.unwrap_or(0);
    let mut config = match cfg.scale_or_desk() {
        Scale::Desk => EmpiricalConfig::desk(seed),
        Scale::Paper => EmpiricalConfig::paper(seed),
    };
    if let Some(r) = cfg.replicates {
        config.design.replicates = r;
    }
    if let Some(s) = &cfg.snr {
        config.design.snr_levels = s.clone();
    }
    if let Some(d) = &cfg.d {
        config.design.d_levels = d.clone();
    }
    config.mcmc = mcmc_settings(cfg);
    let data = dataset(cfg)?;
    let rows = experiments::run_empirical_simulation(&config, &data)?;

    let mut responses = Table::new([
        "snr",
        "d",
        "replicate",
        "sigma2",
        "kappa",
        "sse_truncated",
        "sse_untruncated",
        "response",
        "stalls",
        "warm_start",
    ]);
    for r in &rows {
        let mut cells = num_cells(&[r.snr, r.d]);
        cells.push(r.replicate.into());
        cells.extend(num_cells(&[
            r.sigma2,
            r.kappa,
            r.sse_truncated,
            r.sse_untruncated,
            r.response,
        ]));
        cells.push(Cell::Int(r.stalls as i64));
        cells.push(usize::from(r.warm_start).into());
        responses.push(cells)?;
    }
    let mut means = Table::new(["snr", "d", "count", "mean_response", "se"]);
    for c in empirical::cell_summaries(&rows) {
        let mut cells = num_cells(&[c.snr, c.d]);
        cells.push(c.count.into());
        cells.extend(num_cells(&[c.mean_response, c.se]));
        means.push(cells)?;
    }

    io::write_dataset(&out.root().join("signal.csv"), &data)?;
    out.write_table("responses.csv", &responses)?;
    out.write_table("cell_means.csv", &means)?;
    if config.design.snr_levels.len() >= 2 && config.design.d_levels.len() >= 2 && config.design.replicates >= 2 {
        out.write_table("anova.csv", &anova_table(&empirical::response_anova(&rows)?)?)?;
    }
    out.finish("simulate", seed, &config)
}

/// Observed data and noise variance for `fit` and `waic-sweep`.
fn observed(cfg: &RunConfig, data: &Dataset) -> Result<(DVector<f64>, f64)> {
    let snr = cfg.snr.as_ref().and_then(|s| s.first().copied()).unwrap_or(3.0);
    if cfg.data.is_none() {
        // Synthetic signal: simulate one noisy realisation of it.
        let sim =
            experiments::simulate_dataset(&data.response, snr, &mut rng::stream(cfg.seed.unwrap_or(0), &[0x4f42]))?;
        let sigma2 = cfg.sigma.as_ref().and_then(|s| s.first()).map_or(sim.sigma2, |s| s * s);
        return Ok((sim.z, sigma2));
    }
    let sigma2 = match cfg.sigma.as_ref().and_then(|s| s.first()) {
        Some(s) => s * s,
        None => stats::snr_to_sigma2(data.response.as_slice(), snr)?,
    };
    Ok((data.response.clone(), sigma2))
}

#[derive(Serialize)]
struct FitEcho<'a> {
    kappa_choice: KappaChoice,
    mcmc: McmcSettings,
    sigma2: f64,
    n: usize,
    data: Option<&'a Path>,
}

#[derive(Serialize)]
struct FitSummary {
    kappa: f64,
    warm_start: bool,
    untruncated_acceptance: [f64; 3],
    truncated_acceptance: [f64; 3],
    truncated_stalls: u64,
}

fn fit(cfg: &RunConfig) -> Result<PathBuf> {
    let mut out = out_dir(cfg, "fit")?;
    let seed = cfg.seed.unwrap_or(0);
    let choice = match (cfg.kappa_abs, cfg.kappa_percentile) {
        (Some(k), _) => KappaChoice::Absolute(k),
        (None, Some(d)) => KappaChoice::Percentile(d),
        (None, None) => KappaChoice::Percentile(0.5),
    };
    let mcmc = mcmc_settings(cfg);
    let data = dataset(cfg)?;
    let (z, sigma2) = observed(cfg, &data)?;
    let spec = ModelSpec::new(data.design(), data.locations.clone(), sigma2, default_decay_levels())?;
    let model = spec.bind(&z)?;
    let fit = fit_truncated(
        &model,
        choice,
        &mcmc,
        &mut rng::stream(seed, &[0x0046_4954, 0]),
        &mut rng::stream(seed, &[0x0046_4954, 1]),
    )?;
    let m = point_prediction(&fit.untruncated, &model, PointPredictor::Latent)?;
    let tc = point_prediction(&fit.truncated, &model, PointPredictor::Latent)?;
    let mut predictions = Table::new(["x", "y", "z", "median_untruncated", "median_truncated"]);
    for i in 0..z.len() {
        let p = data.locations.point(i);
        predictions.push(num_cells(&[p[0], p[1], z[i], m[i], tc[i]]))?;
    }
    let rates = |c: &crate::sampler::Chain| {
        [
            c.acceptance.beta.acceptance_rate(),
            c.acceptance.tau2.acceptance_rate(),
            c.acceptance.b.acceptance_rate(),
        ]
    };
    let summary = FitSummary {
        kappa: fit.kappa,
        warm_start: fit.warm_start,
        untruncated_acceptance: rates(&fit.untruncated),
        truncated_acceptance: rates(&fit.truncated),
        truncated_stalls: fit.truncated.stall_count,
    };
    out.write_chain("chain_untruncated.csv", &fit.untruncated)?;
    out.write_chain("chain_truncated.csv", &fit.truncated)?;
    out.write_table("predictions.csv", &predictions)?;
    out.write_json("summary.json", &summary)?;
    let echo = FitEcho {
        kappa_choice: choice,
        mcmc,
        sigma2,
        n: z.len(),
        data: cfg.data.as_deref(),
    };
    out.finish("fit", seed, &echo)
}

#[derive(Serialize)]
struct WaicSummary {
    untruncated_waic: f64,
    untruncated_se: f64,
    argmin_d: Option<f64>,
}

fn waic_sweep(cfg: &RunConfig) -> Result<PathBuf> {
    let mut out = out_dir(cfg, "waic-sweep")?;
    let seed = cfg.seed.unwrap_or(0);
    let data = dataset(cfg)?;
    let (z, sigma2) = observed(cfg, &data)?;
    let spec = ModelSpec::new(data.design(), data.locations.clone(), sigma2, default_decay_levels())?;
    let config = WaicSweepConfig {
        d_grid: cfg.d.clone().unwrap_or_else(|| WaicSweepConfig::even_grid(20)),
        mcmc: mcmc_settings(cfg),
        seed,
        ..Default::default()
    };
    let sweep = experiments::run_waic_sweep(&spec, &z, &config)?;
    let mut table = Table::new(["d", "kappa", "waic", "se", "warm_start", "status"]);
    for p in &sweep.points {
        table.push(vec![
            Cell::Num(p.d),
            Cell::Num(p.kappa),
            Cell::Num(p.waic.unwrap_or(f64::NAN)),
            Cell::Num(p.se.unwrap_or(f64::NAN)),
            usize::from(p.warm_start).into(),
            p.error.clone().unwrap_or_else(|| "ok".into()).into(),
        ])?;
    }
    out.write_table("waic_sweep.csv", &table)?;
    out.write_json(
        "summary.json",
        &WaicSummary {
            untruncated_waic: sweep.untruncated_waic,
            untruncated_se: sweep.untruncated_se,
            argmin_d: sweep.argmin_d,
        },
    )?;
    out.finish("waic-sweep", seed, &config)
}

fn anova(cfg: &RunConfig) -> Result<PathBuf> {
    let mut out = out_dir(cfg, "anova")?;
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Error::Config("anova needs --data pointing at a responses table".into()))?;
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let headers = reader.headers().map_err(|e| io_error(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    };
    let (si, di, ri) = (col("snr")?, col("d")?, col("response")?);
    let (mut snr, mut d, mut resp) = (Vec::new(), Vec::new(), Vec::new());
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io_error(path, e))?;
        let num = |j: usize| {
            record[j].parse::<f64>().map_err(|e| Error::Parse {
                row: k + 1,
                column: headers[j].to_string(),
                message: e.to_string(),
            })
        };
        snr.push(num(si)?);
        d.push(num(di)?);
        resp.push(num(ri)?);
    }
    if resp.is_empty() {
        return Err(Error::EmptyFile(path.clone()));
    }
    let table = experiments::two_way_anova(&resp, &snr, &d)?.with_names("SNR", "d");
    out.write_table("anova.csv", &anova_table(&table)?)?;
    out.finish("anova", cfg.seed.unwrap_or(0), &serde_json::json!({ "data": path }))
}

fn io_error(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn bound_check(cfg: &RunConfig) -> Result<PathBuf> {
    let mut out = out_dir(cfg, "theorem2-check")?;
    let defaults = BoundCheckConfig::default();
    let config = BoundCheckConfig {
        replicates: cfg.replicates.unwrap_or(defaults.replicates),
        snr: cfg
            .snr
            .as_ref()
            .and_then(|s| s.first().copied())
            .unwrap_or(defaults.snr),
        mcmc: mcmc_settings(cfg),
        seed: cfg.seed.unwrap_or(0),
        ..defaults
    };
    let data = dataset(cfg)?;
    let report = experiments::bound_check(&config, &data)?;
    let mut arms = Table::new([
        "arm",
        "kappa",
        "mean_sse",
        "difference",
        "difference_se",
        "stalls",
        "warm_starts",
    ]);
    for (name, arm) in [("bound", &report.bound_arm), ("control", &report.control_arm)] {
        let mut cells = vec![Cell::from(name)];
        cells.extend(num_cells(&[arm.kappa, arm.mean_sse, arm.difference, arm.difference_se]));
        cells.extend([Cell::Int(arm.stalls as i64), arm.warm_starts.into()]);
        arms.push(cells)?;
    }
    out.write_table("arms.csv", &arms)?;
    out.write_json("report.json", &report)?;
    out.finish("theorem2-check", config.seed, &config)
}
