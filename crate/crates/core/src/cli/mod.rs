//! `thz-sm` command-line front end.
//!
//! Values are resolved as flag, then run-configuration file, then default.
//! Every CSV starts with `#` lines recording the resolved inputs.

mod config;

use std::ffi::OsString;
use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::*;

use crate::analysis::{total_ser, AnalysisOptions, AntennaErrorModel, Tolerance};
use crate::channel::{build_channel, condition_sweep, GainModel, SmLevel, SystemConfig};
use crate::detection::{MlDetector, MrrcDetector, DEFAULT_ML_BUDGET};
use crate::error::{Error, Result};
use crate::geometry::{optimal_sa_spacing, quantized_sa_spacing, ArrayGeometry};
use crate::linkbudget::{
    active_sa_mask, array_gain_db, path_loss_db, pl_threshold_db, required_q, AbsorptionTable, LinkBudget,
    DEFAULT_MAX_Q,
};
use crate::modulation::{mode_select, Constellation, SmMapper, ThresholdTable};
use crate::sim::{
    adaptive_mode_sweep, run_sweep, write_csv, Detector, Scheme, SmxPower, SnrAxis, SpacingPolicy, SweepSpec,
};
use crate::wavelength;

#[derive(Debug, Parser)]
#[command(name = "thz-sm", version, about = "Spatial modulation over terahertz antenna arrays")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// RNG seed for Monte Carlo runs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal and quantized SA spacing for z = 1..zmax.
    Spacing(SpacingArgs),
    /// Condition number over a (Δ, D) grid.
    ConditionSweep(ConditionArgs),
    /// Monte Carlo BER/SER sweep.
    BerSweep(BerArgs),
    /// Analytical SER breakdown over an SNR grid.
    SerAnalytical(SerArgs),
    /// Path-loss threshold and SA sizing.
    LinkBudget(LinkArgs),
    /// Exhaustive noiseless encode/detect/decode check.
    Roundtrip(RoundtripArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct SystemArgs {
    #[arg(long)]
    pub freq_hz: Option<f64>,
    #[arg(long)]
    pub range_m: Option<f64>,
    /// SAs per axis.
    #[arg(long = "m")]
    pub m: Option<usize>,
    /// AEs per SA axis.
    #[arg(long = "q")]
    pub q: Option<usize>,
    /// AE pitch (default λ/2).
    #[arg(long)]
    pub ae_pitch_m: Option<f64>,
    /// SA pitch (default Δ_opt with z = 1).
    #[arg(long)]
    pub sa_pitch_m: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gain_tx_dbi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gain_rx_dbi: Option<f64>,
    #[arg(long)]
    pub absorption_per_m: Option<f64>,
    /// `freq_hz,kappa_per_m` table interpolated at the carrier.
    #[arg(long)]
    pub absorption_csv: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub level: Option<LevelArg>,
    #[arg(long, value_enum)]
    pub gain_model: Option<GainModelArg>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SnrArgs {
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snr_db: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub snr_start_db: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub snr_stop_db: Option<f64>,
    #[arg(long)]
    pub snr_step_db: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PolicyArgs {
    #[arg(long, value_enum)]
    pub spacing: Option<SpacingArg>,
    /// Orthogonality locus index for the optimized spacing.
    #[arg(long)]
    pub z: Option<f64>,
    /// Snap the optimized spacing to the AE pitch grid.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub quantized: Option<bool>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AnalysisArgs {
    #[arg(long, value_enum)]
    pub antenna_model: Option<AntennaModelArg>,
    /// Evaluate the exact pair-error probability.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub joint: Option<bool>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SpacingArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub zmax: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct ConditionArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub pitch_min_m: Option<f64>,
    #[arg(long)]
    pub pitch_max_m: Option<f64>,
    #[arg(long)]
    pub pitch_points: Option<usize>,
    #[arg(long)]
    pub range_min_m: Option<f64>,
    #[arg(long)]
    pub range_max_m: Option<f64>,
    #[arg(long)]
    pub range_points: Option<usize>,
    #[arg(long, value_enum)]
    pub grid: Option<GridArg>,
}

#[derive(Debug, Clone, Args)]
pub struct BerArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub snr: SnrArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, value_enum)]
    pub detector: Option<DetectorArg>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    #[arg(long, value_enum)]
    pub snr_axis: Option<SnrAxisArg>,
    #[arg(long, value_enum)]
    pub smx_power: Option<SmxPowerArg>,
    /// Append the analytical SER breakdown to every row.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub analytical: Option<bool>,
}

#[derive(Debug, Clone, Args)]
pub struct SerArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub snr: SnrArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[command(flatten)]
    pub analysis: AnalysisArgs,
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct LinkArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub p_tx_dbm: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_th_db: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub noise_dbm: Option<f64>,
    #[arg(long)]
    pub max_q: Option<usize>,
    /// Sheet side length for the active-SA mask.
    #[arg(long)]
    pub extent_m: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RoundtripArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long)]
    pub order: Option<usize>,
    /// Expected bits per channel use; rejected when it disagrees with the mapper.
    #[arg(long)]
    pub bits: Option<u32>,
    #[arg(long, value_enum)]
    pub detector: Option<DetectorArg>,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out_path = cli.out.clone().or_else(|| file.output.path.clone());
    let mut buf = Vec::new();
    match &cli.command {
        Command::Spacing(a) => cmd_spacing(a, &file, &mut buf)?,
        Command::ConditionSweep(a) => cmd_condition_sweep(a, &file, &mut buf)?,
        Command::BerSweep(a) => cmd_ber_sweep(a, cli.seed, &file, &mut buf)?,
        Command::SerAnalytical(a) => cmd_ser_analytical(a, &file, &mut buf)?,
        Command::LinkBudget(a) => cmd_link_budget(a, &file, &mut buf)?,
        Command::Roundtrip(a) => {
            // the counts are reported even when some words fail
            let r = cmd_roundtrip(a, &file, &mut buf);
            emit(&out_path, &buf)?;
            return r;
        }
    }
    emit(&out_path, &buf)
}

fn emit(path: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            w.write_all(bytes)?;
            w.flush()?;
        }
        None => {
            let mut w = io::stdout().lock();
            w.write_all(bytes)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn pick<T: Copy>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Ordered `key = value` pairs for the CSV header.
#[derive(Default)]
struct Header(Vec<(String, String)>);

impl Header {
    fn f(&mut self, key: &str, v: f64) {
        self.0.push((key.to_string(), num(v)));
    }

    fn s(&mut self, key: &str, v: impl Display) {
        self.0.push((key.to_string(), v.to_string()));
    }

    fn write(&self, out: &mut Vec<u8>) -> Result<()> {
        writeln!(out, "# thz-sm {}", env!("CARGO_PKG_VERSION"))?;
        for (k, v) in &self.0 {
            writeln!(out, "# {k} = {v}")?;
        }
        Ok(())
    }
}

fn level_name(l: LevelArg) -> &'static str {
    match l {
        LevelArg::Sa => "sa",
        LevelArg::Ae => "ae",
        LevelArg::Auto => "auto",
    }
}

struct Resolved {
    config: SystemConfig,
    level: LevelArg,
    /// Whether the SA pitch came from a flag or the file.
    explicit_sa_pitch: bool,
}

fn resolve_system(a: &SystemArgs, file: &RunConfig, header: &mut Header) -> Result<Resolved> {
    let s = &file.system;
    let freq = pick(a.freq_hz, s.freq_hz, 1e12);
    let range = pick(a.range_m, s.range_m, 1.0);
    let m = pick(a.m, s.sa_per_axis, 4);
    let q = pick(a.q, s.ae_per_axis, 1);
    if !(freq.is_finite() && freq > 0.0) {
        return Err(Error::invalid(format!("frequency must be positive, got {freq}")));
    }
    let ae_pitch = pick(a.ae_pitch_m, s.ae_pitch_m, wavelength(freq) / 2.0);
    let explicit = a.sa_pitch_m.or(s.sa_pitch_m);
    let sa_pitch = match explicit {
        Some(p) => p,
        None => optimal_sa_spacing(range, freq, m.max(1), 1.0)?,
    };
    let geometry = ArrayGeometry::new(m, q, ae_pitch, sa_pitch, range)?;
    let mut config = SystemConfig::new(geometry, freq);
    let gt = pick(a.gain_tx_dbi, s.gain_tx_dbi, 0.0);
    let gr = pick(a.gain_rx_dbi, s.gain_rx_dbi, 0.0);
    config.gain_tx = 10f64.powf(gt / 10.0);
    config.gain_rx = 10f64.powf(gr / 10.0);

    let csv = a.absorption_csv.clone().or_else(|| s.absorption_csv.clone());
    let kappa_flag = a.absorption_per_m.or(s.absorption_per_m);
    config.absorption = match (&csv, kappa_flag) {
        (Some(_), Some(_)) => {
            return Err(Error::invalid("give either an absorption coefficient or an absorption table, not both"))
        }
        (Some(p), None) => AbsorptionTable::from_path(p)?.kappa(freq),
        (None, k) => k.unwrap_or(0.0),
    };
    let level = pick(a.level, s.level, LevelArg::Sa);
    config.level = match level {
        LevelArg::Ae => SmLevel::Element,
        _ => SmLevel::Subarray,
    };
    config.gain_model = match pick(a.gain_model, s.gain_model, GainModelArg::Exact) {
        GainModelArg::Exact => GainModel::Exact,
        GainModelArg::Approx => GainModel::Approx,
    };
    config.validate()?;

    header.f("system.freq_hz", freq);
    header.f("system.range_m", range);
    header.s("system.sa_per_axis", m);
    header.s("system.ae_per_axis", q);
    header.f("system.ae_pitch_m", ae_pitch);
    header.f("system.sa_pitch_m", sa_pitch);
    header.f("system.gain_tx_dbi", gt);
    header.f("system.gain_rx_dbi", gr);
    header.f("system.absorption_per_m", config.absorption);
    if let Some(p) = &csv {
        header.s("system.absorption_csv", p.display());
    }
    header.s("system.level", level_name(level));
    header.s(
        "system.gain_model",
        match config.gain_model {
            GainModel::Exact => "exact",
            GainModel::Approx => "approx",
        },
    );
    Ok(Resolved {
        config,
        level,
        explicit_sa_pitch: explicit.is_some(),
    })
}

fn resolve_snr(a: &SnrArgs, file: &RunConfig, header: &mut Header) -> Result<Vec<f64>> {
    let s = &file.sweep;
    let grid = if let Some(list) = a.snr_db.clone().or_else(|| s.snr_db.clone()) {
        list
    } else {
        let start = pick(a.snr_start_db, s.snr_start_db, 0.0);
        let stop = pick(a.snr_stop_db, s.snr_stop_db, 20.0);
        let step = pick(a.snr_step_db, s.snr_step_db, 2.0);
        if !(step > 0.0 && step.is_finite()) || !(start.is_finite() && stop.is_finite()) || stop < start {
            return Err(Error::invalid(format!(
                "SNR grid needs start ≤ stop and a positive step, got {start}:{step}:{stop}"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| start + i as f64 * step).collect()
    };
    if grid.is_empty() {
        return Err(Error::invalid("SNR grid must not be empty"));
    }
    header.s("sweep.snr_db", grid.iter().map(|&v| num(v)).collect::<Vec<_>>().join(" "));
    Ok(grid)
}

fn resolve_policy(a: &PolicyArgs, file: &RunConfig, r: &Resolved, header: &mut Header) -> Result<SpacingPolicy> {
    let s = &file.sweep;
    let kind = pick(a.spacing, s.spacing, SpacingArg::Region2Optimized);
    let z = pick(a.z, s.z, 1.0);
    let quantized = pick(a.quantized, s.quantized, false);
    Ok(match kind {
        SpacingArg::Region1 => {
            header.s("sweep.spacing", "region1");
            SpacingPolicy::Region1
        }
        SpacingArg::Region2Optimized => {
            header.s("sweep.spacing", "region2_optimized");
            header.f("sweep.z", z);
            header.s("sweep.quantized", quantized);
            SpacingPolicy::Region2Optimized { z, quantized }
        }
        SpacingArg::Region2Raw => {
            if !r.explicit_sa_pitch {
                return Err(Error::invalid("region2_raw spacing needs an explicit SA pitch"));
            }
            header.s("sweep.spacing", "region2_raw");
            SpacingPolicy::Region2Raw {
                sa_pitch: r.config.geometry.sa_pitch,
            }
        }
    })
}

fn resolve_analysis(a: &AnalysisArgs, file: &RunConfig, header: &mut Header) -> Result<AnalysisOptions> {
    let s = &file.analysis;
    let model = pick(a.antenna_model, s.antenna_model, AntennaModelArg::OrderStatistic);
    let joint = pick(a.joint, s.joint, true);
    let d = Tolerance::default();
    let tolerance = Tolerance {
        abs: pick(a.abs_tol, s.abs_tol, d.abs),
        rel: pick(a.rel_tol, s.rel_tol, d.rel),
    };
    if !(tolerance.abs > 0.0 && tolerance.rel > 0.0) {
        return Err(Error::invalid("quadrature tolerances must be positive"));
    }
    header.s(
        "analysis.antenna_model",
        match model {
            AntennaModelArg::OrderStatistic => "order_statistic",
            AntennaModelArg::PaperIntersection => "paper_intersection",
        },
    );
    header.s("analysis.joint", joint);
    header.f("analysis.abs_tol", tolerance.abs);
    header.f("analysis.rel_tol", tolerance.rel);
    Ok(AnalysisOptions {
        antenna_model: match model {
            AntennaModelArg::OrderStatistic => AntennaErrorModel::OrderStatistic,
            AntennaModelArg::PaperIntersection => AntennaErrorModel::PaperIntersection,
        },
        joint,
        tolerance,
    })
}

fn threshold_table(file: &RunConfig) -> Result<ThresholdTable> {
    match &file.mode.thresholds {
        Some(rows) => ThresholdTable::new(rows.clone()),
        None => Ok(ThresholdTable::default()),
    }
}

fn cmd_spacing(a: &SpacingArgs, file: &RunConfig, out: &mut Vec<u8>) -> Result<()> {
    let s = &file.system;
    let freq = pick(a.system.freq_hz, s.freq_hz, 1e12);
    let range = pick(a.system.range_m, s.range_m, 1.0);
    let m = pick(a.system.m, s.sa_per_axis, 4);
    let zmax = pick(a.zmax, file.spacing.zmax, 3);
    if zmax == 0 {
        return Err(Error::invalid("zmax must be at least 1"));
    }
    if m == 0 {
        return Err(Error::invalid("M must be at least 1"));
    }
    // validate before deriving the default AE pitch from the frequency
    optimal_sa_spacing(range, freq, m, 1.0)?;
    let ae_pitch = pick(a.system.ae_pitch_m, s.ae_pitch_m, wavelength(freq) / 2.0);
    let mut header = Header::default();
    header.f("system.freq_hz", freq);
    header.f("system.range_m", range);
    header.s("system.sa_per_axis", m);
    header.f("system.ae_pitch_m", ae_pitch);
    header.s("spacing.zmax", zmax);
    let mut rows = Vec::new();
    for z in 1..=zmax {
        let z = z as f64;
        rows.push((z, optimal_sa_spacing(range, freq, m, z)?, quantized_sa_spacing(range, freq, m, z, ae_pitch)?));
    }
    header.write(out)?;
    writeln!(out, "z,delta_opt_m,delta_bar_m")?;
    for (z, opt, bar) in rows {
        writeln!(out, "{z},{},{}", num(opt), num(bar))?;
    }
    Ok(())
}

fn axis(min: f64, max: f64, n: usize, grid: GridArg, what: &str) -> Result<Vec<f64>> {
    if !(min > 0.0 && min.is_finite() && max.is_finite() && max >= min) || n == 0 {
        return Err(Error::invalid(format!(
            "{what} grid needs 0 < min ≤ max and at least one point, got [{min}, {max}] with {n}"
        )));
    }
    if n == 1 {
        return Ok(vec![min]);
    }
    let t = |i: usize| i as f64 / (n - 1) as f64;
    Ok((0..n)
        .map(|i| match grid {
            GridArg::Linear => min + (max - min) * t(i),
            GridArg::Log => (min.ln() + (max.ln() - min.ln()) * t(i)).exp(),
        })
        .map(|v| v.clamp(min, max))
        .collect())
}

fn cmd_condition_sweep(a: &ConditionArgs, file: &RunConfig, out: &mut Vec<u8>) -> Result<()> {
    let c = &file.condition;
    let mut header = Header::default();
    let r = resolve_system(&a.system, file, &mut header)?;
    let grid = pick(a.grid, c.grid, GridArg::Log);
    let pitches = axis(
        pick(a.pitch_min_m, c.pitch_min_m, 1e-4),
        pick(a.pitch_max_m, c.pitch_max_m, 1e-1),
        pick(a.pitch_points, c.pitch_points, 41),
        grid,
        "SA pitch",
    )?;
    let ranges = axis(
        pick(a.range_min_m, c.range_min_m, 0.1),
        pick(a.range_max_m, c.range_max_m, 10.0),
        pick(a.range_points, c.range_points, 41),
        grid,
        "range",
    )?;
    let cells = condition_sweep(&r.config, &pitches, &ranges)?;
    header.s(
        "condition.grid",
        match grid {
            GridArg::Linear => "linear",
            GridArg::Log => "log",
        },
    );
    header.s("condition.pitch_points", pitches.len());
    header.s("condition.range_points", ranges.len());
    header.write(out)?;
    writeln!(out, "Delta_m,D_m,cond_dB")?;
    for (pitch, row) in pitches.iter().zip(&cells) {
        for (range, cond) in ranges.iter().zip(row) {
            writeln!(out, "{},{},{}", num(*pitch), num(*range), num(*cond))?;
        }
    }
    Ok(())
}

fn cmd_ber_sweep(a: &BerArgs, seed: Option<u64>, file: &RunConfig, out: &mut Vec<u8>) -> Result<()> {
    let s = &file.sweep;
    let mut header = Header::default();
    let r = resolve_system(&a.system, file, &mut header)?;
    let snr = resolve_snr(&a.snr, file, &mut header)?;
    let policy = resolve_policy(&a.policy, file, &r, &mut header)?;
    let order = pick(a.order, s.order, 16);
    let trials = pick(a.trials, s.trials, 100_000);
    let seed = pick(seed, s.seed, 1);
    let mut spec = SweepSpec::new(r.config, order, snr, trials, seed);
    spec.spacing = policy;
    spec.detector = match pick(a.detector, s.detector, DetectorArg::Mrrc) {
        DetectorArg::Mrrc => Detector::Mrrc,
        DetectorArg::Ml => Detector::Ml,
    };
    spec.scheme = match pick(a.scheme, s.scheme, SchemeArg::Sm) {
        SchemeArg::Sm => Scheme::Sm,
        SchemeArg::Smx => Scheme::Smx,
    };
    spec.snr_axis = match pick(a.snr_axis, s.snr_axis, SnrAxisArg::PerStream) {
        SnrAxisArg::PerStream => SnrAxis::PerStream,
        SnrAxisArg::Transmit => SnrAxis::Transmit,
    };
    spec.smx_power = match pick(a.smx_power, s.smx_power, SmxPowerArg::UnitPerStream) {
        SmxPowerArg::UnitPerStream => SmxPower::UnitPerStream,
        SmxPowerArg::TotalUnit => SmxPower::TotalUnit,
    };
    let analytical = pick(a.analytical, s.analytical, false);
    let options = if analytical {
        Some(resolve_analysis(&a.analysis, file, &mut header)?)
    } else {
        None
    };
    header.s("sweep.order", order);
    header.s("sweep.trials", trials);
    header.s("sweep.seed", seed);
    header.s("sweep.detector", format!("{:?}", spec.detector).to_lowercase());
    header.s("sweep.scheme", format!("{:?}", spec.scheme).to_lowercase());
    header.s(
        "sweep.snr_axis",
        match spec.snr_axis {
            SnrAxis::PerStream => "per_stream (gamma = GtGr Q^2 |alpha(D)|^2 / sigma^2)",
            SnrAxis::Transmit => "transmit (rho = 1 / sigma^2)",
        },
    );
    if spec.scheme == Scheme::Smx {
        header.s(
            "sweep.smx_power",
            match spec.smx_power {
                SmxPower::UnitPerStream => "unit_per_stream",
                SmxPower::TotalUnit => "total_unit",
            },
        );
    }

    let result = if r.level == LevelArg::Auto {
        if spec.scheme == Scheme::Smx {
            return Err(Error::invalid("automatic level selection applies to SM only"));
        }
        adaptive_mode_sweep(&spec, &threshold_table(file)?)?
    } else {
        run_sweep(&spec)?
    };

    let mut extra = Vec::new();
    if let Some(options) = options {
        if spec.scheme == Scheme::Smx {
            return Err(Error::invalid("the analytical SER is defined for SM only"));
        }
        let h = build_channel(&result.config)?;
        let c = Constellation::new(order)?;
        let mut cols = vec![Vec::new(); 4];
        for p in &result.points {
            let b = total_ser(&h, &c, h.snr_for_noise(p.sigma2)?, &options)?;
            cols[0].push(b.p_e);
            cols[1].push(b.p_e_joint.unwrap_or(f64::NAN));
            cols[2].push(b.p_a);
            cols[3].push(b.p_s);
        }
        for (name, col) in ["analytical_p_e", "analytical_p_e_joint", "analytical_p_a", "analytical_p_s"]
            .iter()
            .zip(cols)
        {
            extra.push((name.to_string(), col));
        }
    }
    write_csv(&result, &header.0, &extra, out)
}

fn cmd_ser_analytical(a: &SerArgs, file: &RunConfig, out: &mut Vec<u8>) -> Result<()> {
    let mut header = Header::default();
    let r = resolve_system(&a.system, file, &mut header)?;
    let snr = resolve_snr(&a.snr, file, &mut header)?;
    let policy = resolve_policy(&a.policy, file, &r, &mut header)?;
    let options = resolve_analysis(&a.analysis, file, &mut header)?;
    let order = pick(a.order, file.sweep.order, 16);
    header.s("sweep.order", order);
    let mut spec = SweepSpec::new(r.config, order, snr.clone(), 1, 0);
    spec.spacing = policy;
    if r.level == LevelArg::Auto {
        let g = &spec.config.geometry;
        spec.config.level = mode_select(g.range, g.ae_pitch, spec.config.freq_hz, &threshold_table(file)?)?;
    }
    let cfg = spec.resolved_config()?;
    header.f("resolved.sa_pitch_m", cfg.geometry.sa_pitch);
    header.s(
        "resolved.level",
        match cfg.level {
            SmLevel::Subarray => "sa",
            SmLevel::Element => "ae",
        },
    );
    let h = build_channel(&cfg)?;
    let c = Constellation::new(order)?;
    let mut rows = Vec::with_capacity(snr.len());
    for &db in &snr {
        rows.push((db, total_ser(&h, &c, 10f64.powf(db / 10.0), &options)?));
    }
    header.write(out)?;
    writeln!(out, "snr_db,gamma,sigma2,p_s,p_a,p_tilde_a,p_e,p_e_joint,orthogonality_residual,clamped")?;
    for (db, b) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            num(db),
            num(b.gamma),
            num(b.sigma2),
            num(b.p_s),
            num(b.p_a),
            num(b.p_tilde_a),
            num(b.p_e),
            num(b.p_e_joint.unwrap_or(f64::NAN)),
            num(b.orthogonality_residual),
            b.clamped
        )?;
    }
    Ok(())
}

fn cmd_link_budget(a: &LinkArgs, file: &RunConfig, out: &mut Vec<u8>) -> Result<()> {
    let l = &file.link_budget;
    let mut header = Header::default();
    let r = resolve_system(&a.system, file, &mut header)?;
    let cfg = &r.config;
    let table = match a.system.absorption_csv.as_ref().or(file.system.absorption_csv.as_ref()) {
        Some(p) => Some(AbsorptionTable::from_path(p)?),
        None => None,
    };
    let budget = LinkBudget {
        p_tx_dbm: pick(a.p_tx_dbm, l.p_tx_dbm, 10.0),
        gamma_th_db: pick(a.gamma_th_db, l.gamma_th_db, 10.0),
        noise_dbm: pick(a.noise_dbm, l.noise_dbm, -80.0),
        g_t_dbi: 10.0 * cfg.gain_tx.log10(),
        g_r_dbi: 10.0 * cfg.gain_rx.log10(),
        array_gain_db: 0.0,
    };
    budget.validate()?;
    let max_q = pick(a.max_q, l.max_q, DEFAULT_MAX_Q);
    let freq = cfg.freq_hz;
    let range = cfg.geometry.range;
    let kappa_table;
    let table = match (&table, cfg.absorption) {
        (Some(t), _) => Some(t),
        (None, k) if k > 0.0 => {
            kappa_table = AbsorptionTable::new(vec![(freq, k)])?;
            Some(&kappa_table)
        }
        _ => None,
    };
    let pl = path_loss_db(freq, range, table)?;
    let pl_th = pl_threshold_db(&budget, 0.0);
    let (q, gain) = required_q(freq, range, &budget, table, max_q)?;
    header.f("link_budget.p_tx_dbm", budget.p_tx_dbm);
    header.f("link_budget.gamma_th_db", budget.gamma_th_db);
    header.f("link_budget.noise_dbm", budget.noise_dbm);
    header.s("link_budget.max_q", max_q);
    header.write(out)?;
    writeln!(out, "path_loss_db = {}", num(pl))?;
    writeln!(out, "pl_threshold_db = {}", num(pl_th))?;
    writeln!(out, "required_gain_db = {}", num(pl - pl_th))?;
    writeln!(out, "required_q = {q}")?;
    writeln!(out, "array_gain_db = {}", num(gain))?;
    writeln!(out, "margin_db = {}", num(pl_th + array_gain_db(q) - pl))?;
    if let Some(extent) = a.extent_m.or(l.extent_m) {
        let g = &cfg.geometry;
        let mask = active_sa_mask(extent, g.sa_per_axis, g.sa_pitch, g.ae_pitch, q)?;
        writeln!(out, "sheet_aes_per_axis = {}", mask.sheet_aes_per_axis)?;
        writeln!(out, "active_sas = {}", g.num_sas())?;
        writeln!(out, "active_aes = {}", mask.active_count())?;
    }
    Ok(())
}

fn cmd_roundtrip(a: &RoundtripArgs, file: &RunConfig, out: &mut Vec<u8>) -> Result<()> {
    let mut header = Header::default();
    let mut sys = a.system.clone();
    sys.m = sys.m.or(file.system.sa_per_axis).or(Some(2));
    let r = resolve_system(&sys, file, &mut header)?;
    let mut cfg = r.config;
    if r.level == LevelArg::Auto {
        let g = &cfg.geometry;
        cfg.level = mode_select(g.range, g.ae_pitch, cfg.freq_hz, &threshold_table(file)?)?;
    }
    let order = pick(a.order, file.sweep.order, 16);
    let c = Constellation::new(order)?;
    let mapper = SmMapper::new(cfg.geometry.sa_per_axis, cfg.geometry.ae_per_axis, cfg.level, c.clone())?;
    if let Some(bits) = a.bits {
        if bits != mapper.num_bits() {
            return Err(Error::invalid(format!(
                "bit width {bits} does not match the {} bits per channel use of this configuration",
                mapper.num_bits()
            )));
        }
    }
    if mapper.num_bits() > 24 {
        return Err(Error::invalid(format!(
            "{} bits per channel use is too many for an exhaustive check (limit 24)",
            mapper.num_bits()
        )));
    }
    let h = build_channel(&cfg)?;
    let detector = pick(a.detector, file.sweep.detector, DetectorArg::Ml);
    let mut mrrc = MrrcDetector::new(&h, c.clone());
    let mut ml = MlDetector::new(&h, c, DEFAULT_ML_BUDGET)?;
    let n = h.dim();
    let mut y = vec![crate::Complex::new(0.0, 0.0); n];
    let words = 1u64 << mapper.num_bits();
    let mut passed = 0u64;
    for word in 0..words {
        let frame = mapper.encode_word(word)?;
        y.iter_mut().for_each(|v| *v = crate::Complex::new(0.0, 0.0));
        for (k, x) in frame.tx_vector.iter().enumerate() {
            if x.norm_sqr() > 0.0 {
                for (v, hv) in y.iter_mut().zip(h.entries().column(k).iter()) {
                    *v += hv * x;
                }
            }
        }
        let d = match detector {
            DetectorArg::Mrrc => mrrc.detect(&y)?,
            DetectorArg::Ml => ml.detect(&y)?,
        };
        if mapper.decode_bits(d.antenna_index, d.symbol_label)? == frame.bits {
            passed += 1;
        }
    }
    header.s("roundtrip.order", order);
    header.s("roundtrip.detector", format!("{detector:?}").to_lowercase());
    header.write(out)?;
    writeln!(out, "bits_per_use = {}", mapper.num_bits())?;
    writeln!(out, "words = {words}")?;
    writeln!(out, "passed = {passed}")?;
    writeln!(out, "failed = {}", words - passed)?;
    if passed == words {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{} of {words} words failed the round trip", words - passed)))
    }
}
