//! Command-line experiment runner.
//!
//! Every run writes its artifacts (CSV) plus a `manifest.toml` with the
//! fully resolved configuration and seed into `--out`. Exit codes: 1 config
//! or I/O error, 2 infeasible micro model (without `--force`), 3 numerical
//! failure, 4 a validation check failed.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::micro::{
    default_model, feasibility_check, micro_trajectory_with, run_micro_ensemble, ElementaryModel, MicroEnsembleOptions,
    MicroOptions,
};
use crate::readout::{
    generate_readout, run_ensemble_with, smooth_readout, EnsembleOptions, EnsembleStats, Histogram2d, ReadoutCurve,
};
use crate::rpi::{integrate_rpi, probability_density};
use crate::system::{derive_scales, AmplitudePair, SystemConfig};
use crate::validate::{
    compare_series_evolution, equivalence_sweep, run_validation_suite, write_validation_csv, EquivalenceReport,
};
use config::{parse_ratio, ExperimentFile, ModelFile, PriorSection};

/// Default fuzziness sweep of `figure3`.
pub const DEFAULT_SWEEP: [f64; 6] = [2.0 / 3.0, 1.0, 4.0 / 3.0, 2.0, 8.0 / 3.0, 10.0 / 3.0];

#[derive(Debug, Parser)]
#[command(name = "contmeas", version, about = "Continuous fuzzy energy measurement of a driven two-level system")]
pub struct Cli {
    /// Experiment config (TOML). Defaults to the reference geometry at
    /// fuzziness 4/3.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed; required by every stochastic command.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// Flat readout prior weighted by `‖ψ_T‖²`.
    Rpi,
    /// Ancestral sampling of weak observations.
    Micro,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one readout (from `--readout` or drawn from the prior).
    RpiRun {
        /// CSV with columns `t,E`: segment start times (uniform, from 0)
        /// and values.
        #[arg(long)]
        readout: Option<PathBuf>,
    },
    /// Weighted ensemble statistics per fuzziness value.
    Ensemble {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Comma-separated fuzziness ratios (e.g. `2/3,10/3`); defaults to
        /// the config's measurement strength.
        #[arg(long, value_delimiter = ',', value_parser = parse_ratio)]
        fuzziness: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = Sampler::Rpi)]
        sampler: Sampler,
    },
    /// One microphysical run, observation by observation.
    MicroRun {
        /// Model file; defaults to the zero-phase model matched to the
        /// config's measurement strength.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        series_n: usize,
        /// Run even if the feasibility check fails.
        #[arg(long)]
        force: bool,
    },
    /// Exact series operators against the effective evolution.
    Compare {
        /// Model file; without it the built-in `vτ` sweep is run.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        series_n: usize,
        /// Positive counts, one per series (e.g. `3,7`); needed with `--model`.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
    /// Run the oracle suite and write `validation.csv`.
    Validate {
        /// Ensemble size of the cross-sampler check (0 skips it).
        #[arg(long, default_value_t = 4000)]
        cross_n: usize,
    },
    /// Readout and occupation densities at fuzziness 10/3 and 2/3.
    Figure1 {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Sampler::Rpi)]
        sampler: Sampler,
    },
    /// Densities at fuzziness 4/3: all, transition and no-transition.
    Figure2 {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Sampler::Rpi)]
        sampler: Sampler,
    },
    /// Class probabilities across a fuzziness sweep.
    Figure3 {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, value_delimiter = ',', value_parser = parse_ratio)]
        fuzziness: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value_t = Sampler::Rpi)]
        sampler: Sampler,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RpiRun { .. } => "rpi-run",
            Command::Ensemble { .. } => "ensemble",
            Command::MicroRun { .. } => "micro-run",
            Command::Compare { .. } => "compare",
            Command::Validate { .. } => "validate",
            Command::Figure1 { .. } => "figure1",
            Command::Figure2 { .. } => "figure2",
            Command::Figure3 { .. } => "figure3",
        }
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Config(_) | Error::Io(_) | Error::Csv(_) => 1,
        Error::Infeasible(_) => 2,
        Error::Numerical(_) => 3,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not configure {n} threads: {e}");
        }
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest {
    run: RunSection,
    system: config::SystemSection,
    measurement: ResolvedMeasurement,
    #[serde(skip_serializing_if = "Option::is_none")]
    prior: Option<PriorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<ModelSection>,
}

#[derive(Debug, Serialize)]
struct RunSection {
    command: String,
    version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampler: Option<Sampler>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fuzziness_ratios: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct ResolvedMeasurement {
    kappa: f64,
    fuzziness_ratio: f64,
    t_lr: f64,
    t_rabi: f64,
    smoothing_window: f64,
}

#[derive(Debug, Serialize)]
struct ModelSection {
    p1: f64,
    p2: f64,
    chi: f64,
    chi_prime: f64,
    tau: f64,
    series_n: usize,
}

impl ModelSection {
    fn new(m: &ElementaryModel, series_n: usize) -> Self {
        ModelSection { p1: m.p1, p2: m.p2, chi: m.chi, chi_prime: m.chi_prime, tau: m.tau, series_n }
    }
}

struct Context<'a> {
    cli: &'a Cli,
    file: ExperimentFile,
}

impl Context<'_> {
    fn seed(&self) -> Result<u64> {
        self.cli
            .seed
            .ok_or_else(|| Error::Config(format!("`{}` is stochastic: --seed is required", self.cli.command.name())))
    }

    fn out(&self) -> Result<&Path> {
        fs::create_dir_all(&self.cli.out)?;
        Ok(&self.cli.out)
    }

    fn window(&self, config: &SystemConfig) -> f64 {
        self.file.measurement.smoothing_window.unwrap_or(config.t2 - config.t1)
    }

    fn manifest(&self, file: &ExperimentFile, run: RunSection, model: Option<ModelSection>) -> Result<()> {
        let config = file.system_config()?;
        let scales = derive_scales(&config)?;
        let prior = file.prior(&config)?;
        let m = Manifest {
            run,
            system: file.system.clone(),
            measurement: ResolvedMeasurement {
                kappa: config.kappa,
                fuzziness_ratio: scales.fuzziness_ratio,
                t_lr: scales.t_lr,
                t_rabi: scales.t_rabi,
                smoothing_window: self.window(&config),
            },
            prior: Some(PriorSection { dt: prior.dt, e_lo: prior.e_lo, e_hi: prior.e_hi }),
            model,
        };
        let text = toml::to_string(&m).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(self.out()?.join("manifest.toml"), text)?;
        Ok(())
    }

    fn run_section(&self, seed: Option<u64>, n: Option<usize>, sampler: Option<Sampler>, ratios: &[f64]) -> RunSection {
        RunSection {
            command: self.cli.command.name().into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            n,
            sampler,
            fuzziness_ratios: ratios.to_vec(),
        }
    }

    fn ensemble(&self, file: &ExperimentFile, sampler: Sampler, n: usize, seed: u64) -> Result<EnsembleStats> {
        let config = file.system_config()?;
        let window = Some(self.window(&config));
        match sampler {
            Sampler::Rpi => {
                let prior = file.prior(&config)?;
                let opts = EnsembleOptions { smoothing_window: window, ..Default::default() };
                run_ensemble_with(&config, &prior, n, seed, &opts)
            }
            Sampler::Micro => {
                let (model, series_n) = default_model(&config)?;
                let opts = MicroEnsembleOptions { smoothing_window: window, ..Default::default() };
                run_micro_ensemble(&config, &model, series_n, n, seed, &opts)
            }
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn write_stats(dir: &Path, rows: &[(f64, EnsembleStats)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, "stats.csv")?);
    w.write_record([
        "ratio",
        "p_transition_state",
        "p_valid_pos",
        "p_valid_neg",
        "noise",
        "se_transition_state",
        "se_noise",
        "false_positive",
        "false_negative",
        "ess",
        "n",
    ])?;
    for (r, s) in rows {
        w.write_record(&[
            fmt(*r),
            fmt(s.p_transition_state.value),
            fmt(s.p_transition_readout.value),
            fmt(s.p_stay_readout.value),
            fmt(s.noise.value),
            fmt(s.p_transition_state.se),
            fmt(s.noise.se),
            fmt(s.false_positive.value),
            fmt(s.false_negative.value),
            fmt(s.ess),
            s.n_samples.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Density CSV `<key>,t,value,weight` with one block per labelled histogram.
fn write_densities(dir: &Path, name: &str, key: &str, blocks: &[(String, &Histogram2d)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, name)?);
    w.write_record([key, "t", "value", "weight"])?;
    for (label, h) in blocks {
        let nb = h.value_bins();
        for j in 0..h.time_bins() {
            let t = 0.5 * (h.t_edges[j] + h.t_edges[j + 1]);
            for (b, m) in h.column(j).iter().enumerate() {
                let v = 0.5 * (h.value_edges[b] + h.value_edges[b + 1]);
                w.write_record(&[label.clone(), fmt(t), fmt(v), fmt(*m)])?;
            }
            debug_assert_eq!(h.column(j).len(), nb);
        }
    }
    w.flush()?;
    Ok(())
}

fn read_readout(path: &Path, t_total: f64) -> Result<ReadoutCurve> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column `{name}`", path.display())))
    };
    let (ti, ei) = (col("t")?, col("E")?);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad number in row {:?}", path.display(), rec)))
        };
        times.push(parse(ti)?);
        values.push(parse(ei)?);
    }
    if values.is_empty() {
        return Err(Error::Config(format!("{}: no readout rows", path.display())));
    }
    let dt = if times.len() > 1 { times[1] - times[0] } else { t_total };
    for (k, t) in times.iter().enumerate() {
        if (t - k as f64 * dt).abs() > 1e-9 * t_total {
            return Err(Error::Config(format!("{}: times must be uniform and start at 0", path.display())));
        }
    }
    ReadoutCurve::new(dt, t_total, values)
}

fn write_readout(dir: &Path, curve: &ReadoutCurve, smoothed: &ReadoutCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, "readout.csv")?);
    w.write_record(["t", "E", "E_smoothed"])?;
    for k in 0..curve.len() {
        w.write_record(&[fmt(curve.segment_bounds(k).0), fmt(curve.samples()[k]), fmt(smoothed.samples()[k])])?;
    }
    w.flush()?;
    Ok(())
}

fn write_equivalence(dir: &Path, rows: &[(f64, EquivalenceReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(dir, "equivalence.csv")?);
    w.write_record(["v_tau", "operator_error", "predicted_bound", "distribution_distance", "gaussian_floor"])?;
    for (vt, r) in rows {
        w.write_record(&[
            fmt(*vt),
            fmt(r.operator_error),
            fmt(r.predicted_bound),
            fmt(r.distribution_distance),
            fmt(r.gaussian_floor),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the parsed command; returns the exit code on success.
pub fn run(cli: &Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(p) => ExperimentFile::load(p)?,
        None => ExperimentFile::reference(4.0 / 3.0),
    };
    let ctx = Context { cli, file };
    match &cli.command {
        Command::RpiRun { readout } => rpi_run(&ctx, readout.as_deref()),
        Command::Ensemble { n, fuzziness, sampler } => {
            let seed = ctx.seed()?;
            let ratios = fuzziness.clone().unwrap_or_default();
            let files: Vec<(f64, ExperimentFile)> = if ratios.is_empty() {
                let scales = derive_scales(&ctx.file.system_config()?)?;
                vec![(scales.fuzziness_ratio, ctx.file.clone())]
            } else {
                ratios.iter().map(|&r| (r, ctx.file.with_fuzziness(r))).collect()
            };
            let mut rows = Vec::new();
            for (r, f) in &files {
                rows.push((*r, ctx.ensemble(f, *sampler, *n, seed)?));
            }
            let dir = ctx.out()?;
            write_stats(dir, &rows)?;
            let label = |r: f64| fmt(r);
            let e: Vec<_> = rows.iter().map(|(r, s)| (label(*r), s.density_e())).collect();
            let p: Vec<_> = rows.iter().map(|(r, s)| (label(*r), s.density_p2())).collect();
            write_densities(dir, "density_e.csv", "ratio", &e)?;
            write_densities(dir, "density_p2.csv", "ratio", &p)?;
            ctx.manifest(&ctx.file, ctx.run_section(Some(seed), Some(*n), Some(*sampler), &ratios), None)?;
            for (r, s) in &rows {
                println!(
                    "ratio {r:.4}: p_transition_state {:.4} ± {:.4}, noise {:.4} ± {:.4}",
                    s.p_transition_state.value, s.p_transition_state.se, s.noise.value, s.noise.se
                );
            }
            Ok(0)
        }
        Command::MicroRun { model, series_n, force } => micro_run(&ctx, model.as_deref(), *series_n, *force),
        Command::Compare { model, series_n, counts } => {
            let rows = match model {
                None => {
                    let sweep = equivalence_sweep()?;
                    [0.028, 0.014, 0.007, 0.0035].into_iter().zip(sweep).collect::<Vec<_>>()
                }
                Some(path) => {
                    let m = ModelFile::load(path)?.model()?;
                    let counts =
                        counts.as_ref().ok_or_else(|| Error::Config("--counts is required with --model".into()))?;
                    let config = ctx.file.system_config()?;
                    let report = compare_series_evolution(&config, &m, *series_n, counts)?;
                    vec![(config.v_amplitude * m.tau, report)]
                }
            };
            write_equivalence(ctx.out()?, &rows)?;
            ctx.manifest(&ctx.file, ctx.run_section(None, None, None, &[]), None)?;
            for (vt, r) in &rows {
                println!(
                    "v_tau {vt}: operator_error {:.4e} (bound {:.4e}, floor {:.4e})",
                    r.operator_error, r.predicted_bound, r.gaussian_floor
                );
            }
            Ok(0)
        }
        Command::Validate { cross_n } => {
            let seed = cli.seed.unwrap_or(1);
            let rows = run_validation_suite(seed, *cross_n)?;
            write_validation_csv(&rows, create(ctx.out()?, "validation.csv")?)?;
            ctx.manifest(&ctx.file, ctx.run_section(Some(seed), Some(*cross_n), None, &[]), None)?;
            let mut ok = true;
            for r in &rows {
                println!(
                    "{:<40} {:>12.4e} {:>10.1e}  {}",
                    r.name,
                    r.value,
                    r.threshold,
                    if r.passed { "PASS" } else { "FAIL" }
                );
                ok &= r.passed;
            }
            Ok(if ok { 0 } else { 4 })
        }
        Command::Figure1 { n, sampler } => {
            let seed = ctx.seed()?;
            let ratios = [10.0 / 3.0, 2.0 / 3.0];
            let mut rows = Vec::new();
            for r in ratios {
                rows.push((r, ctx.ensemble(&ctx.file.with_fuzziness(r), *sampler, *n, seed)?));
            }
            let dir = ctx.out()?;
            write_stats(dir, &rows)?;
            let e: Vec<_> = rows.iter().map(|(r, s)| (fmt(*r), s.density_e())).collect();
            let p: Vec<_> = rows.iter().map(|(r, s)| (fmt(*r), s.density_p2())).collect();
            write_densities(dir, "figure1_density_e.csv", "ratio", &e)?;
            write_densities(dir, "figure1_density_p2.csv", "ratio", &p)?;
            ctx.manifest(&ctx.file, ctx.run_section(Some(seed), Some(*n), Some(*sampler), &ratios), None)?;
            Ok(0)
        }
        Command::Figure2 { n, sampler } => {
            let seed = ctx.seed()?;
            let ratio = 4.0 / 3.0;
            let s = ctx.ensemble(&ctx.file.with_fuzziness(ratio), *sampler, *n, seed)?;
            let dir = ctx.out()?;
            write_stats(dir, &[(ratio, s.clone())])?;
            let sel = |name: &str| name.to_string();
            let e = [(sel("all"), &s.all.e), (sel("transition"), &s.transition.e), (sel("no_transition"), &s.stay.e)];
            let p =
                [(sel("all"), &s.all.p2), (sel("transition"), &s.transition.p2), (sel("no_transition"), &s.stay.p2)];
            write_densities(dir, "figure2_density_e.csv", "selection", &e)?;
            write_densities(dir, "figure2_density_p2.csv", "selection", &p)?;
            ctx.manifest(&ctx.file, ctx.run_section(Some(seed), Some(*n), Some(*sampler), &[ratio]), None)?;
            Ok(0)
        }
        Command::Figure3 { n, fuzziness, sampler } => {
            let seed = ctx.seed()?;
            let ratios = fuzziness.clone().unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
            let mut rows = Vec::new();
            for &r in &ratios {
                rows.push((r, ctx.ensemble(&ctx.file.with_fuzziness(r), *sampler, *n, seed)?));
            }
            write_stats(ctx.out()?, &rows)?;
            ctx.manifest(&ctx.file, ctx.run_section(Some(seed), Some(*n), Some(*sampler), &ratios), None)?;
            for (r, s) in &rows {
                println!(
                    "ratio {r:.4}: p_transition_state {:.4}, valid+ {:.4}, valid- {:.4}, noise {:.4}",
                    s.p_transition_state.value, s.p_transition_readout.value, s.p_stay_readout.value, s.noise.value
                );
            }
            Ok(0)
        }
    }
}

fn rpi_run(ctx: &Context, readout: Option<&Path>) -> Result<i32> {
    let config = ctx.file.system_config()?;
    let scales = derive_scales(&config)?;
    let (curve, seed) = match readout {
        Some(p) => (read_readout(p, config.t_total)?, None),
        None => {
            let seed = ctx.seed()?;
            (generate_readout(&config, &ctx.file.prior(&config)?, seed)?, Some(seed))
        }
    };
    let traj = integrate_rpi(&config, &curve, AmplitudePair::ground())?;
    let smoothed = smooth_readout(&curve, ctx.window(&config));
    let label = crate::readout::classify(&traj, &smoothed, &scales);
    let dir = ctx.out()?;
    traj.write_csv(create(dir, "trajectory.csv")?)?;
    write_readout(dir, &curve, &smoothed)?;
    let mut w = csv::Writer::from_writer(create(dir, "summary.csv")?);
    w.write_record(["norm_sq", "p2_final", "e_smoothed_final", "state_up", "readout_up"])?;
    w.write_record(&[
        fmt(probability_density(&traj)),
        fmt(traj.final_p2()),
        fmt(smoothed.final_value()),
        label.state_up.to_string(),
        label.readout_up.to_string(),
    ])?;
    w.flush()?;
    ctx.manifest(&ctx.file, ctx.run_section(seed, None, None, &[]), None)?;
    println!("P[E] = {:.6e}, P2(T) = {:.6}", probability_density(&traj), traj.final_p2());
    Ok(0)
}

fn micro_run(ctx: &Context, model: Option<&Path>, series_n: usize, force: bool) -> Result<i32> {
    let seed = ctx.seed()?;
    let config = ctx.file.system_config()?;
    let scales = derive_scales(&config)?;
    let m = match model {
        Some(p) => ModelFile::load(p)?.model()?,
        None => default_model(&config)?.0,
    };
    let dir = ctx.out()?;
    let report = feasibility_check(&m, &scales, series_n, m.chi.abs().max(m.chi_prime.abs()), config.t_total);
    fs::write(dir.join("feasibility.txt"), format!("{report}\n"))?;
    ctx.manifest(&ctx.file, ctx.run_section(Some(seed), None, None, &[]), Some(ModelSection::new(&m, series_n)))?;
    if !report.passed() {
        if force {
            eprintln!("warning: feasibility check failed; continuing because of --force");
        } else {
            return Err(Error::Infeasible(format!(
                "{} (see feasibility.txt; --force overrides)",
                report.to_string().replace('\n', "; ")
            )));
        }
    }
    let run = micro_trajectory_with(
        &config,
        &m,
        series_n,
        seed,
        &MicroOptions { force: true, initial: AmplitudePair::ground() },
    )?;
    let mut w = csv::Writer::from_writer(create(dir, "readout.csv")?);
    w.write_record(["t", "n", "E"])?;
    for s in &run.series {
        w.write_record(&[fmt(s.t_start), fmt(s.n_ratio), fmt(s.energy)])?;
    }
    w.flush()?;
    run.trajectory.write_csv(create(dir, "trajectory.csv")?)?;
    let mut f = create(dir, "series.csv")?;
    writeln!(f, "t_start,n_total,n_plus")?;
    for s in &run.series {
        writeln!(f, "{},{},{}", fmt(s.t_start), s.n_total, s.n_plus)?;
    }
    f.flush()?;
    println!("{} series, P2(T) = {:.6}", run.series.len(), run.trajectory.final_p2());
    Ok(0)
}
