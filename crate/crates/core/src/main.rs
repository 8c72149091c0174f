//! Command-line front end: loads one TOML configuration, dispatches the
//! requested experiment, and writes plot-ready CSV curves, a JSON summary of
//! fitted quantities, and a run log into the output directory. Identical
//! configuration and seed give byte-identical CSV output.

use clap::{Args, Parser, Subcommand};
use jba_readout::config::{SimConfig, SweepSpec};
use jba_readout::dispersive::{dressed_shifts, STARK_MODEL_UNCERTAINTY};
use jba_readout::error::{Error, Result};
use jba_readout::experiments::backaction::run_backaction;
use jba_readout::experiments::coherence::{extract_tphi, run_ramsey, run_t1};
use jba_readout::experiments::rabi::run_rabi;
use jba_readout::experiments::scurve::{best_contrast, switching_curve, SwitchingCurve};
use jba_readout::experiments::stark::run_stark;
use jba_readout::experiments::tradeoff::{run_tradeoff, width_above_ghz};
use jba_readout::experiments::{default_power_grid, prep_sequence};
use jba_readout::output::{append_run_log, write_text, CsvTable, Quantity, Summary};
use jba_readout::pulse::Sequence;
use jba_readout::readout::{
    run_shot_trace, OperatingPoint, ReadoutContext, ShotRecord, DEFAULT_FLUX_NOISE_AMP_UPHI0,
    DEFAULT_T1_OTHER_NS,
};
use jba_readout::seeding::{
    ensemble_seed, PURPOSE_BACKACTION, PURPOSE_RABI, PURPOSE_RAMSEY, PURPOSE_SCURVE,
    PURPOSE_STARK, PURPOSE_T1, PURPOSE_TRACE,
};
use jba_readout::transmon::{coherence_budget, diagonalize, FluxPoint};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "jba-readout",
    version,
    about = "Simulates single-shot transmon readout with a cavity bifurcation amplifier"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Configuration file (TOML); omit for the built-in defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Shots per sweep point override.
    #[arg(long, value_name = "N")]
    shots: Option<usize>,
    /// Worker-thread cap (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Output directory override.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Qubit-resonator detuning fC - f01 override, GHz.
    #[arg(long = "delta-ghz", value_name = "GHZ")]
    delta_ghz: Option<f64>,
    /// Sampling-plateau drive power override, dB.
    #[arg(long = "power-db", value_name = "DB", allow_negative_numbers = true)]
    power_db: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct PowerSweepArgs {
    /// Power sweep start, dB.
    #[arg(long = "power-start", value_name = "DB", allow_negative_numbers = true)]
    power_start: Option<f64>,
    /// Power sweep stop, dB.
    #[arg(long = "power-stop", value_name = "DB", allow_negative_numbers = true)]
    power_stop: Option<f64>,
    /// Power sweep point count.
    #[arg(long = "power-points", value_name = "N")]
    power_points: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct DelaySweepArgs {
    /// Delay sweep start, ns.
    #[arg(long = "delay-start", value_name = "NS")]
    delay_start: Option<f64>,
    /// Delay sweep stop, ns.
    #[arg(long = "delay-stop", value_name = "NS")]
    delay_stop: Option<f64>,
    /// Delay sweep point count.
    #[arg(long = "delay-points", value_name = "N")]
    delay_points: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transmon spectrum versus flux and the coherence budget.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Flux grid points spanning [0, 0.45] flux quanta.
        #[arg(long, value_name = "N", default_value_t = 91)]
        points: usize,
    },
    /// Dressed cavity shifts and the photon-number pull tables.
    Shifts {
        #[command(flatten)]
        common: Common,
    },
    /// Switching probability versus drive power for prepared states.
    Scurve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        power: PowerSweepArgs,
        /// Comma-separated prepared states (0-2).
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        states: Vec<u8>,
        /// Extra drive-frequency offset, MHz.
        #[arg(long = "df-mhz", value_name = "MHZ", default_value_t = 0.0, allow_negative_numbers = true)]
        df_mhz: f64,
        /// Also dump the first shot's field/homodyne trace.
        #[arg(long = "trace-dump")]
        trace_dump: bool,
    },
    /// Driven Rabi oscillations read out at the plateau power.
    Rabi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        delay: DelaySweepArgs,
        /// Shelve the excited state to level 2 before the readout.
        #[arg(long)]
        composite: bool,
        /// Also dump the first shot's field/homodyne trace.
        #[arg(long = "trace-dump")]
        trace_dump: bool,
    },
    /// Relaxation decay of the prepared excited state.
    T1 {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        delay: DelaySweepArgs,
        /// Also dump the first shot's field/homodyne trace.
        #[arg(long = "trace-dump")]
        trace_dump: bool,
    },
    /// Detuned free-evolution fringes and the T2 estimate.
    Ramsey {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        delay: DelaySweepArgs,
        /// Programmed fringe detuning override, MHz.
        #[arg(long = "detuning-mhz", value_name = "MHZ")]
        detuning_mhz: Option<f64>,
        /// Also dump the first shot's field/homodyne trace.
        #[arg(long = "trace-dump")]
        trace_dump: bool,
    },
    /// Two consecutive readouts after a coherent drive (back-action).
    Backaction {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        delay: DelaySweepArgs,
        /// Readout-to-readout gap override, ns.
        #[arg(long = "gap-ns", value_name = "NS")]
        gap_ns: Option<f64>,
        /// Also dump the first shot's field/homodyne trace.
        #[arg(long = "trace-dump")]
        trace_dump: bool,
    },
    /// Photon-number calibration across the bifurcation.
    Stark {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        power: PowerSweepArgs,
        /// Also dump the first shot's field/homodyne trace.
        #[arg(long = "trace-dump")]
        trace_dump: bool,
    },
    /// Contrast and coherence versus qubit-resonator detuning.
    Tradeoff {
        #[command(flatten)]
        common: Common,
        /// Detuning sweep start, GHz.
        #[arg(long = "delta-start", value_name = "GHZ")]
        delta_start: Option<f64>,
        /// Detuning sweep stop, GHz.
        #[arg(long = "delta-stop", value_name = "GHZ")]
        delta_stop: Option<f64>,
        /// Detuning sweep point count.
        #[arg(long = "delta-points", value_name = "N")]
        delta_points: Option<usize>,
        /// Also measure the excited-state curve shift per detuning (slow).
        #[arg(long = "with-shift")]
        with_shift: bool,
    },
    /// Single-shot field, jump, and homodyne traces.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Comma-separated prepared states (0-2), one file set per state.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        states: Vec<u8>,
        /// Extra drive-frequency offset, MHz.
        #[arg(long = "df-mhz", value_name = "MHZ", default_value_t = 0.0, allow_negative_numbers = true)]
        df_mhz: f64,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Spectrum { common, .. }
            | Command::Shifts { common }
            | Command::Scurve { common, .. }
            | Command::Rabi { common, .. }
            | Command::T1 { common, .. }
            | Command::Ramsey { common, .. }
            | Command::Backaction { common, .. }
            | Command::Stark { common, .. }
            | Command::Tradeoff { common, .. }
            | Command::Trace { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Shifts { .. } => "shifts",
            Command::Scurve { .. } => "scurve",
            Command::Rabi { .. } => "rabi",
            Command::T1 { .. } => "t1",
            Command::Ramsey { .. } => "ramsey",
            Command::Backaction { .. } => "backaction",
            Command::Stark { .. } => "stark",
            Command::Tradeoff { .. } => "tradeoff",
            Command::Trace { .. } => "trace",
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error[{}]: {e}", e.category());
        std::process::exit(e.exit_code());
    }
}

fn run(cli: &Cli) -> Result<()> {
    let started = Instant::now();
    let common = cli.command.common();
    let mut cfg = match &common.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    apply_overrides(&mut cfg, &cli.command)?;
    cfg.validate()?;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let out = PathBuf::from(&cfg.run.out_dir);
    let hash = cfg.hash_hex()?;
    write_text(&out.join("resolved_config.cfg"), &cfg.canonical_toml()?)?;

    let mut warnings = Vec::new();
    dispatch(&cli.command, &cfg, &hash, &out, &mut warnings)?;

    for w in &warnings {
        append_run_log(&out, &format!("warning: {w}"))?;
    }
    append_run_log(
        &out,
        &format!(
            "{} config_hash={hash} seed={} shots={} elapsed_s={:.1} status=ok",
            cli.command.name(),
            cfg.run.seed,
            cfg.run.shots,
            started.elapsed().as_secs_f64()
        ),
    )?;
    println!(
        "{}: wrote {} ({} warnings)",
        cli.command.name(),
        out.display(),
        warnings.len()
    );
    Ok(())
}

/// Folds command-line overrides into the configuration before it is hashed
/// and echoed, so re-running from the echo reproduces the run exactly.
fn apply_overrides(cfg: &mut SimConfig, cmd: &Command) -> Result<()> {
    let common = cmd.common();
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    if let Some(n) = common.shots {
        cfg.run.shots = n;
    }
    if let Some(dir) = &common.out {
        cfg.run.out_dir = dir.to_string_lossy().into_owned();
    }
    if let Some(d) = common.delta_ghz {
        cfg.operating_point.delta_ghz = d;
    }
    if let Some(p) = common.power_db {
        cfg.operating_point.powers.sample_db = p;
    }
    match cmd {
        Command::Scurve { power, .. } | Command::Stark { power, .. } => {
            cfg.run.power_sweep = merge_sweep(
                cfg.run.power_sweep,
                power.power_start,
                power.power_stop,
                power.power_points,
                "power",
            )?;
        }
        Command::Rabi { delay, .. }
        | Command::T1 { delay, .. }
        | Command::Backaction { delay, .. } => {
            cfg.run.delay_sweep = merge_sweep(
                cfg.run.delay_sweep,
                delay.delay_start,
                delay.delay_stop,
                delay.delay_points,
                "delay",
            )?;
        }
        Command::Ramsey {
            delay, detuning_mhz, ..
        } => {
            cfg.run.delay_sweep = merge_sweep(
                cfg.run.delay_sweep,
                delay.delay_start,
                delay.delay_stop,
                delay.delay_points,
                "delay",
            )?;
            if let Some(d) = detuning_mhz {
                cfg.run.ramsey_detuning_mhz = *d;
            }
        }
        Command::Tradeoff {
            delta_start,
            delta_stop,
            delta_points,
            ..
        } => {
            cfg.run.detuning_sweep = merge_sweep(
                cfg.run.detuning_sweep,
                *delta_start,
                *delta_stop,
                *delta_points,
                "delta",
            )?;
        }
        _ => {}
    }
    if let Command::Backaction {
        gap_ns: Some(g), ..
    } = cmd
    {
        cfg.operating_point.timings.gap_ns = *g;
    }
    Ok(())
}

fn merge_sweep(
    base: Option<SweepSpec>,
    start: Option<f64>,
    stop: Option<f64>,
    points: Option<usize>,
    what: &str,
) -> Result<Option<SweepSpec>> {
    if start.is_none() && stop.is_none() && points.is_none() {
        return Ok(base);
    }
    let missing = || {
        Error::Config(format!(
            "partial {what} sweep override: give --{what}-start, --{what}-stop and --{what}-points, or set the sweep in the config"
        ))
    };
    Ok(Some(SweepSpec {
        start: start.or(base.map(|b| b.start)).ok_or_else(missing)?,
        stop: stop.or(base.map(|b| b.stop)).ok_or_else(missing)?,
        points: points.or(base.map(|b| b.points)).ok_or_else(missing)?,
    }))
}

fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| start + (stop - start) * i as f64 / (points - 1).max(1) as f64)
        .collect()
}

fn resolve_powers(cfg: &SimConfig, op: &OperatingPoint) -> Result<Vec<f64>> {
    match &cfg.run.power_sweep {
        Some(s) => s.grid(),
        None => default_power_grid(op),
    }
}

fn resolve_delays(cfg: &SimConfig, start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    match &cfg.run.delay_sweep {
        Some(s) => s.grid(),
        None => Ok(linspace(start, stop, points)),
    }
}

fn base_meta(t: &mut CsvTable, cmd: &str, cfg: &SimConfig, hash: &str, op: Option<&OperatingPoint>) {
    t.meta("program", concat!("jba-readout ", env!("CARGO_PKG_VERSION")));
    t.meta("command", cmd);
    t.meta("config_hash", hash);
    t.meta("seed", cfg.run.seed);
    t.meta("shots", cfg.run.shots);
    if let Some(op) = op {
        t.meta("delta_GHz", format!("{:.6}", op.delta_ghz));
        t.meta(
            "readout_detuning_MHz",
            format!("{:.3}", op.readout_detuning_ghz * 1e3),
        );
        t.meta("f_drive_GHz", format!("{:.6}", op.f_drive_ghz));
        t.meta(
            "sample_power_db",
            format!("{:.2}", cfg.operating_point.powers.sample_db),
        );
    }
}

fn base_summary(s: &mut Summary, cmd: &str, hash: &str) {
    s.meta("program", concat!("jba-readout ", env!("CARGO_PKG_VERSION")));
    s.meta("command", cmd);
    s.meta("config_hash", hash);
}

/// Writes one full shot trace (filtered quadratures, photon number, qubit
/// level) and returns the shot record. The seed arguments replicate the
/// experiment's own first shot when called with the matching purpose.
#[allow(clippy::too_many_arguments)]
fn write_trace_csv(
    op: &OperatingPoint,
    ctx: &ReadoutContext,
    ens_seed: u64,
    shot: u64,
    path: &Path,
    cmd: &str,
    cfg: &SimConfig,
    hash: &str,
    extra_meta: &[(&str, String)],
) -> Result<ShotRecord> {
    let (traj, jumps, record, rec) = run_shot_trace(op, ctx, ens_seed, shot)?;
    let mut t = CsvTable::new(&["t_ns", "i", "q", "n", "level"]);
    base_meta(&mut t, cmd, cfg, hash, Some(op));
    for (k, v) in extra_meta {
        t.meta(k, v);
    }
    t.meta("ensemble_seed", ens_seed);
    t.meta("shot", shot);
    t.meta("power_db", format!("{:.2}", ctx.power_db));
    t.meta(
        "units",
        "i,q filtered homodyne quadratures (amplified); n intracavity photons",
    );
    for (wi, w) in ctx.windows.iter().enumerate() {
        t.meta(
            &format!("window{wi}_i_threshold"),
            format!("{:.6}", w.i_threshold),
        );
    }
    t.meta(
        "outcomes",
        rec.outcomes
            .iter()
            .map(|&b| if b { "B" } else { "Bbar" })
            .collect::<Vec<_>>()
            .join(","),
    );
    t.int_column(4);
    let n = traj.times_ns.len().min(record.i_filt.len());
    for k in 0..n {
        let tt = traj.times_ns[k];
        t.row(&[
            tt,
            record.i_filt[k],
            record.q_filt[k],
            traj.alpha[k].norm_sqr(),
            jumps.level_at(tt) as f64,
        ])?;
    }
    t.write(path)?;
    Ok(rec)
}

fn dispatch(
    cmd: &Command,
    cfg: &SimConfig,
    hash: &str,
    out: &Path,
    warnings: &mut Vec<String>,
) -> Result<()> {
    match cmd {
        Command::Spectrum { points, .. } => cmd_spectrum(cfg, hash, out, *points),
        Command::Shifts { .. } => cmd_shifts(cfg, hash, out, warnings),
        Command::Scurve {
            states,
            df_mhz,
            trace_dump,
            ..
        } => cmd_scurve(cfg, hash, out, states, *df_mhz, *trace_dump, warnings),
        Command::Rabi {
            composite,
            trace_dump,
            ..
        } => cmd_rabi(cfg, hash, out, *composite, *trace_dump, warnings),
        Command::T1 { trace_dump, .. } => cmd_t1(cfg, hash, out, *trace_dump, warnings),
        Command::Ramsey { trace_dump, .. } => cmd_ramsey(cfg, hash, out, *trace_dump, warnings),
        Command::Backaction { trace_dump, .. } => {
            cmd_backaction(cfg, hash, out, *trace_dump, warnings)
        }
        Command::Stark { trace_dump, .. } => cmd_stark(cfg, hash, out, *trace_dump, warnings),
        Command::Tradeoff { with_shift, .. } => {
            cmd_tradeoff(cfg, hash, out, *with_shift, warnings)
        }
        Command::Trace {
            common,
            states,
            df_mhz,
        } => cmd_trace(cfg, hash, out, states, *df_mhz, common.shots.is_some(), warnings),
    }
}

fn cmd_spectrum(cfg: &SimConfig, hash: &str, out: &Path, points: usize) -> Result<()> {
    let op = cfg.operating_point()?;
    let tp = cfg.device.transmon();
    let n = points.max(2);
    let mut t = CsvTable::new(&["flux_phi0", "f01_ghz", "f12_ghz", "anharmonicity_ghz"]);
    base_meta(&mut t, "spectrum", cfg, hash, Some(&op));
    for i in 0..n {
        let phi = 0.45 * i as f64 / (n - 1) as f64;
        let s = diagonalize(&tp, FluxPoint::new(phi)?)?;
        t.row(&[phi, s.f01_ghz, s.f12_ghz, s.anharmonicity_ghz])?;
    }
    t.write(&out.join("spectrum.csv"))?;

    let s0 = diagonalize(&tp, FluxPoint::new(0.0)?)?;
    let budget = coherence_budget(
        &tp,
        op.flux,
        cfg.device.g,
        cfg.device.fc_ghz,
        cfg.device.q0,
        DEFAULT_T1_OTHER_NS * 1e-3,
        DEFAULT_FLUX_NOISE_AMP_UPHI0,
    )?;
    let mut sm = Summary::new();
    base_summary(&mut sm, "spectrum", hash);
    sm.push("f01_max_ghz", Quantity::exact(s0.f01_ghz));
    sm.push(
        "anharmonicity_max_ghz",
        Quantity::exact(s0.anharmonicity_ghz),
    );
    sm.push("operating_flux_phi0", Quantity::exact(op.flux.phi));
    sm.push(
        "operating_f01_ghz",
        Quantity::exact(op.jba.fc_ghz - op.delta_ghz),
    );
    sm.push("t1_purcell_us", Quantity::exact(budget.t1_purcell_us));
    sm.push("t1_total_us", Quantity::exact(budget.t1_total_us));
    sm.push("tphi_flux_us", Quantity::exact(budget.tphi_flux_us));
    sm.write(&out.join("spectrum_summary.json"))
}

fn cmd_shifts(cfg: &SimConfig, hash: &str, out: &Path, warnings: &mut Vec<String>) -> Result<()> {
    let op = cfg.operating_point()?;
    let shifts = dressed_shifts(&cfg.device.transmon(), op.flux, &cfg.device.coupling())?;
    warnings.extend(shifts.warnings.iter().cloned());

    let mut t = CsvTable::new(&["n_photons", "pull0_mhz", "pull1_mhz", "pull2_mhz"]);
    base_meta(&mut t, "shifts", cfg, hash, Some(&op));
    t.int_column(0);
    for n in 0..op.joint.ntab {
        let nf = n as f64;
        t.row(&[
            nf,
            op.joint.pull_ghz(0, nf) * 1e3,
            op.joint.pull_ghz(1, nf) * 1e3,
            op.joint.pull_ghz(2, nf) * 1e3,
        ])?;
    }
    t.write(&out.join("shifts.csv"))?;

    let two_chi_joint = (op.joint.pull_ghz(0, 0.0) - op.joint.pull_ghz(1, 0.0)) * 1e3;
    let mut sm = Summary::new();
    base_summary(&mut sm, "shifts", hash);
    for (i, fc) in shifts.fc_by_state_ghz.iter().enumerate() {
        sm.push(&format!("fc_state{i}_ghz"), Quantity::exact(*fc));
    }
    sm.push(
        "cavity_pull_2chi_mhz",
        Quantity::exact(shifts.cavity_pull_ghz * 1e3),
    );
    sm.push("two_chi_joint_mhz", Quantity::exact(two_chi_joint));
    sm.push("shift2_mhz", Quantity::exact(shifts.shift2_ghz * 1e3));
    sm.push(
        "shift2_over_pull",
        Quantity::exact(shifts.shift2_ghz / shifts.cavity_pull_ghz),
    );
    sm.write(&out.join("shifts_summary.json"))
}

fn curve_csv(
    cfg: &SimConfig,
    hash: &str,
    op: &OperatingPoint,
    cmd: &str,
    c: &SwitchingCurve,
) -> Result<CsvTable> {
    let mut t = CsvTable::new(&["power_db", "p_b", "p_b_err"]);
    base_meta(&mut t, cmd, cfg, hash, Some(op));
    t.meta("state", c.state);
    t.meta("df_MHz", format!("{:.3}", c.df_mhz));
    for i in 0..c.powers_db.len() {
        t.row(&[c.powers_db[i], c.p_b[i], c.p_b_err[i]])?;
    }
    Ok(t)
}

fn cmd_scurve(
    cfg: &SimConfig,
    hash: &str,
    out: &Path,
    states: &[u8],
    df_mhz: f64,
    trace_dump: bool,
    warnings: &mut Vec<String>,
) -> Result<()> {
    if states.is_empty() {
        return Err(Error::InvalidParameter("--states must list a state".into()));
    }
    let op = cfg.operating_point()?;
    let settings = cfg.settings();
    let powers = resolve_powers(cfg, &op)?;
    let mut curves: Vec<SwitchingCurve> = Vec::new();
    for &st in states {
        let c = switching_curve(&op, &settings, st, &powers, df_mhz, cfg.run.shots, cfg.run.seed)?;
        warnings.extend(c.warnings.iter().map(|w| format!("state {st}: {w}")));
        curve_csv(cfg, hash, &op, "scurve", &c)?
            .write(&out.join(format!("scurve_s{st}.csv")))?;
        curves.push(c);
    }
    let mut sm = Summary::new();
    base_summary(&mut sm, "scurve", hash);
    if let Some(g) = curves.iter().find(|c| c.state == 0) {
        for c in curves.iter().filter(|c| c.state != 0) {
            let ct = best_contrast(g, c)?;
            let err = (g.p_b_err[ct.index].powi(2) + c.p_b_err[ct.index].powi(2)).sqrt();
            sm.push(
                &format!("contrast_0{}", c.state),
                Quantity::symmetric(ct.contrast, err),
            );
            sm.push(
                &format!("best_power_db_0{}", c.state),
                Quantity::exact(ct.power_db),
            );
        }
    }
    sm.write(&out.join("scurve_summary.json"))?;

    if trace_dump {
        let seq = prep_sequence(states[0], settings.envelope()?)?;
        let ctx = ReadoutContext::build(&op, &seq, powers[0], df_mhz)?;
        write_trace_csv(
            &op,
            &ctx,
            ensemble_seed(cfg.run.seed, 0, PURPOSE_SCURVE),
            0,
            &out.join("scurve_trace.csv"),
            "scurve",
            cfg,
            hash,
            &[("state", states[0].to_string())],
        )?;
    }
    Ok(())
}

fn oscillation_summary(sm: &mut Summary, prefix: &str, fit: &jba_readout::experiments::fit::OscillationFit) {
    sm.push(
        &format!("{prefix}freq_mhz"),
        Quantity::symmetric(fit.f_ghz * 1e3, fit.f_err_ghz * 1e3),
    );
    sm.push(
        &format!("{prefix}tau_ns"),
        Quantity::symmetric(fit.tau_ns, fit.tau_err_ns),
    );
    sm.push(
        &format!("{prefix}offset"),
        Quantity::exact(fit.offset),
    );
}

fn cmd_rabi(
    cfg: &SimConfig,
    hash: &str,
    out: &Path,
    composite: bool,
    trace_dump: bool,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let op = cfg.operating_point()?;
    let settings = cfg.settings();
    let delays = resolve_delays(cfg, 0.0, 120.0, 31)?;
    let omega = cfg.run.rabi_mhz * 1e-3;
    let scan = run_rabi(
        &op,
        &settings,
        &delays,
        omega,
        composite,
        cfg.run.shots,
        cfg.run.seed,
    )?;
    warnings.extend(scan.warnings.iter().cloned());

    let mut t = CsvTable::new(&["delay_ns", "p_b", "p_b_err"]);
    base_meta(&mut t, "rabi", cfg, hash, Some(&op));
    t.meta("composite", composite);
    t.meta("rabi_MHz", format!("{:.3}", cfg.run.rabi_mhz));
    for i in 0..delays.len() {
        t.row(&[delays[i], scan.p_b[i], scan.p_b_err[i]])?;
    }
    t.write(&out.join("rabi.csv"))?;

    let mut sm = Summary::new();
    base_summary(&mut sm, "rabi", hash);
    sm.push(
        "visibility",
        Quantity::symmetric(scan.visibility, scan.fit.peak_to_peak_err),
    );
    oscillation_summary(&mut sm, "rabi_", &scan.fit);
    sm.write(&out.join("rabi_summary.json"))?;

    if trace_dump {
        let env = settings.envelope()?;
        let seq = if composite {
            Sequence::new()
                .control(
                    "shelve12",
                    -jba_readout::pulse::PI_PULSE_DURATION_NS,
                    jba_readout::pulse::pi_pulse(jba_readout::pulse::Transition::Q12),
                )
                .readout("readout", 0.0, env)
        } else {
            prep_sequence(0, env)?
        };
        let ctx = ReadoutContext::build(&op, &seq, settings.power_db, 0.0)?;
        write_trace_csv(
            &op,
            &ctx,
            ensemble_seed(cfg.run.seed, 0, PURPOSE_RABI),
            0,
            &out.join("rabi_trace.csv"),
            "rabi",
            cfg,
            hash,
            &[],
        )?;
    }
    Ok(())
}

fn cmd_t1(
    cfg: &SimConfig,
    hash: &str,
    out: &Path,
    trace_dump: bool,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let op = cfg.operating_point()?;
    let settings = cfg.settings();
    let delays = resolve_delays(cfg, 0.0, (3.2 * op.rates.t1_10_ns).ceil(), 15)?;
    let scan = run_t1(&op, &settings, &delays, cfg.run.shots, cfg.run.seed)?;
    warnings.extend(scan.warnings.iter().cloned());

    let mut t = CsvTable::new(&["delay_ns", "p_b", "p_b_err"]);
    base_meta(&mut t, "t1", cfg, hash, Some(&op));
    for i in 0..delays.len() {
        t.row(&[delays[i], scan.p_b[i], scan.p_b_err[i]])?;
    }
    t.write(&out.join("t1.csv"))?;

    let mut sm = Summary::new();
    base_summary(&mut sm, "t1", hash);
    sm.push(
        "t1_ns",
        Quantity::symmetric(scan.fit.tau_ns, scan.fit.tau_err_ns),
    );
    sm.push(
        "amplitude",
        Quantity::symmetric(scan.fit.amplitude, scan.fit.amplitude_err),
    );
    sm.push(
        "offset",
        Quantity::symmetric(scan.fit.offset, scan.fit.offset_err),
    );
    sm.push("t1_model_ns", Quantity::exact(op.rates.t1_10_ns));
    sm.write(&out.join("t1_summary.json"))?;

    if trace_dump {
        let env = settings.envelope()?;
        let seq = Sequence::new()
            .control(
                "pi01",
                -(delays[0] + jba_readout::pulse::PI_PULSE_DURATION_NS),
                jba_readout::pulse::pi_pulse(jba_readout::pulse::Transition::Q01),
            )
            .readout("readout", 0.0, env);
        let ctx = ReadoutContext::build(&op, &seq, settings.power_db, 0.0)?;
        write_trace_csv(
            &op,
            &ctx,
            ensemble_seed(cfg.run.seed, 0, PURPOSE_T1),
            0,
            &out.join("t1_trace.csv"),
            "t1",
            cfg,
            hash,
            &[],
        )?;
    }
    Ok(())
}

fn cmd_ramsey(
    cfg: &SimConfig,
    hash: &str,
    out: &Path,
    trace_dump: bool,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let op = cfg.operating_point()?;
    let settings = cfg.settings();
    let delays = resolve_delays(cfg, 0.0, 600.0, 25)?;
    let detuning_ghz = cfg.run.ramsey_detuning_mhz * 1e-3;
    let scan = run_ramsey(
        &op,
        &settings,
        &delays,
        detuning_ghz,
        cfg.run.shots,
        cfg.run.seed,
    )?;
    warnings.extend(scan.warnings.iter().cloned());

    let mut t = CsvTable::new(&["delay_ns", "p_b", "p_b_err"]);
    base_meta(&mut t, "ramsey", cfg, hash, Some(&op));
    t.meta(
        "programmed_detuning_MHz",
        format!("{:.3}", cfg.run.ramsey_detuning_mhz),
    );
    for i in 0..delays.len() {
        t.row(&[delays[i], scan.p_b[i], scan.p_b_err[i]])?;
    }
    t.write(&out.join("ramsey.csv"))?;

    let mut sm = Summary::new();
    base_summary(&mut sm, "ramsey", hash);
    sm.push(
        "fringe_freq_mhz",
        Quantity::symmetric(scan.fit.f_ghz * 1e3, scan.fit.f_err_ghz * 1e3),
    );
    sm.push(
        "t2_ns",
        Quantity::symmetric(scan.fit.tau_ns, scan.fit.tau_err_ns),
    );
    sm.push("t2_model_ns", Quantity::exact(scan.t2_model_ns));
    sm.push(
        "fringe_visibility",
        Quantity::symmetric(scan.fit.peak_to_peak, scan.fit.peak_to_peak_err),
    );
    let t2e = if scan.fit.tau_err_ns.is_finite() && scan.fit.tau_err_ns < scan.fit.tau_ns {
        scan.fit.tau_err_ns
    } else {
        0.2 * scan.fit.tau_ns
    };
    match extract_tphi(scan.fit.tau_ns, t2e, op.rates.t1_10_ns, 0.0) {
        Ok((tphi, (lo, hi))) => {
            sm.push(
                "tphi_ns",
                Quantity {
                    value: tphi,
                    err_lo: tphi - lo,
                    err_hi: hi - tphi,
                },
            );
        }
        Err(e) => warnings.push(format!("dephasing extraction: {e}")),
    }
    sm.write(&out.join("ramsey_summary.json"))?;

    if trace_dump {
        let seq = Sequence::new().readout("readout", 0.0, settings.envelope()?);
        let ctx = ReadoutContext::build(&op, &seq, settings.power_db, 0.0)?;
        write_trace_csv(
            &op,
            &ctx,
            ensemble_seed(cfg.run.seed, 0, PURPOSE_RAMSEY),
            0,
            &out.join("ramsey_trace.csv"),
            "ramsey",
            cfg,
            hash,
            &[],
        )?;
    }
    Ok(())
}

fn cmd_backaction(
    cfg: &SimConfig,
    hash: &str,
    out: &Path,
    trace_dump: bool,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let op = cfg.operating_point()?;
    let settings = cfg.settings();
    let delays = resolve_delays(cfg, 0.0, 120.0, 31)?;
    let gap = cfg.operating_point.timings.gap_ns;
    let omega = cfg.run.rabi_mhz * 1e-3;
    let scan = run_backaction(
        &op,
        &settings,
        gap,
        omega,
        &delays,
        cfg.run.shots,
        cfg.run.seed,
    )?;
    warnings.extend(scan.warnings.iter().cloned());

    let mut t = CsvTable::new(&[
        "delay_ns",
        "p_first",
        "p_first_err",
        "p_second",
        "p_second_err",
        "p_second_dark",
        "p_second_dark_err",
    ]);
    base_meta(&mut t, "backaction", cfg, hash, Some(&op));
    t.meta("gap_ns", format!("{:.1}", gap));
    t.meta("rabi_MHz", format!("{:.3}", cfg.run.rabi_mhz));
    for i in 0..delays.len() {
        t.row(&[
            delays[i],
            scan.first[i],
            scan.first_err[i],
            scan.second[i],
            scan.second_err[i],
            scan.second_dark[i],
            scan.second_dark_err[i],
        ])?;
    }
    t.write(&out.join("backaction.csv"))?;

    let r1 = scan.fit_first.peak_to_peak;
    let r2 = scan.fit_second.peak_to_peak;
    let r3 = scan.fit_second_dark.peak_to_peak;
    let (e1, e2, e3) = (
        scan.fit_first.peak_to_peak_err,
        scan.fit_second.peak_to_peak_err,
        scan.fit_second_dark.peak_to_peak_err,
    );
    let mut sm = Summary::new();
    base_summary(&mut sm, "backaction", hash);
    sm.push("r1", Quantity::symmetric(r1, e1));
    sm.push("r2", Quantity::symmetric(r2, e2));
    sm.push("r3_dark", Quantity::symmetric(r3, e3));
    let ratio = scan.amplitude_ratio();
    let ratio_err = if r1 > 0.0 && r2 > 0.0 {
        ratio * ((e1 / r1).powi(2) + (e2 / r2).powi(2)).sqrt()
    } else {
        f64::INFINITY
    };
    sm.push("r2_over_r1", Quantity::symmetric(ratio, ratio_err));
    sm.push(
        "dark_consistency_sigma",
        Quantity::exact(scan.dark_consistency_sigma()),
    );
    sm.push(
        "rabi_freq_mhz",
        Quantity::symmetric(scan.fit_first.f_ghz * 1e3, scan.fit_first.f_err_ghz * 1e3),
    );
    sm.write(&out.join("backaction_summary.json"))?;

    if trace_dump {
        let env = settings.envelope()?;
        let seq = Sequence::new()
            .readout("readout1", 0.0, env)
            .readout("readout2", env.duration_ns() + gap, env);
        let ctx = ReadoutContext::build(&op, &seq, settings.power_db, 0.0)?;
        write_trace_csv(
            &op,
            &ctx,
            ensemble_seed(cfg.run.seed, 0, PURPOSE_BACKACTION),
            0,
            &out.join("backaction_trace.csv"),
            "backaction",
            cfg,
            hash,
            &[],
        )?;
    }
    Ok(())
}

fn cmd_stark(
    cfg: &SimConfig,
    hash: &str,
    out: &Path,
    trace_dump: bool,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let op = cfg.operating_point()?;
    let settings = cfg.settings();
    let powers = resolve_powers(cfg, &op)?;
    let scan = run_stark(&op, &settings, &powers, cfg.run.shots, cfg.run.seed)?;
    warnings.extend(scan.warnings.iter().cloned());

    let mut t = CsvTable::new(&[
        "power_db",
        "p_b",
        "p_b_err",
        "n_low",
        "n_high",
        "f01_shift_mhz",
        "t1_model_ns",
    ]);
    base_meta(&mut t, "stark", cfg, hash, Some(&op));
    for p in &scan.points {
        t.row(&[
            p.power_db,
            p.p_b,
            p.p_b_err,
            p.n_low.unwrap_or(f64::NAN),
            p.n_high.unwrap_or(f64::NAN),
            p.f01_shift_mhz,
            p.t1_model_ns,
        ])?;
    }
    t.write(&out.join("stark.csv"))?;

    let mut sm = Summary::new();
    base_summary(&mut sm, "stark", hash);
    if let Some(n) = scan.n_dim {
        sm.push(
            "n_dim",
            Quantity::symmetric(n, STARK_MODEL_UNCERTAINTY * n),
        );
    }
    if let Some(n) = scan.n_bright {
        sm.push(
            "n_bright",
            Quantity::symmetric(n, STARK_MODEL_UNCERTAINTY * n),
        );
    }
    if let Some(j) = scan.jump_index {
        sm.push("jump_power_db", Quantity::exact(scan.points[j].power_db));
    }
    sm.write(&out.join("stark_summary.json"))?;

    if trace_dump {
        let seq = prep_sequence(0, settings.envelope()?)?;
        let ctx = ReadoutContext::build(&op, &seq, powers[0], 0.0)?;
        write_trace_csv(
            &op,
            &ctx,
            ensemble_seed(cfg.run.seed, 0, PURPOSE_STARK),
            0,
            &out.join("stark_trace.csv"),
            "stark",
            cfg,
            hash,
            &[],
        )?;
    }
    Ok(())
}

fn cmd_tradeoff(
    cfg: &SimConfig,
    hash: &str,
    out: &Path,
    with_shift: bool,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let deltas = match &cfg.run.detuning_sweep {
        Some(s) => s.grid()?,
        None => linspace(0.2, 0.7, 6),
    };
    let settings = cfg.settings();
    let res = run_tradeoff(
        &cfg.device.transmon(),
        &cfg.device.coupling(),
        &cfg.device.jba(),
        &cfg.chain,
        &deltas,
        cfg.operating_point.readout_detuning_mhz,
        &settings,
        cfg.run.shots,
        cfg.run.seed,
        with_shift,
    )?;
    for p in &res.points {
        warnings.extend(
            p.warnings
                .iter()
                .map(|w| format!("delta {:.3}: {w}", p.delta_ghz)),
        );
    }

    let mut cols = vec![
        "delta_ghz",
        "contrast",
        "best_power_db",
        "t1_ns",
        "tphi_ns",
        "tau_r_ns",
        "two_chi_mhz",
    ];
    if with_shift {
        cols.push("shift1_mhz");
    }
    let mut t = CsvTable::new(&cols);
    base_meta(&mut t, "tradeoff", cfg, hash, None);
    t.meta(
        "readout_detuning_MHz",
        format!("{:.3}", res.detuning_mhz),
    );
    for p in &res.points {
        let mut row = vec![
            p.delta_ghz,
            p.contrast,
            p.best_power_db,
            p.t1_ns,
            p.tphi_ns,
            p.tau_r_ns,
            p.two_chi_mhz,
        ];
        if with_shift {
            row.push(p.shift_mhz.unwrap_or(f64::NAN));
        }
        t.row(&row)?;
    }
    t.write(&out.join("tradeoff.csv"))?;

    let contrasts: Vec<f64> = res.points.iter().map(|p| p.contrast).collect();
    let best = res
        .points
        .iter()
        .max_by(|a, b| a.contrast.total_cmp(&b.contrast))
        .expect("non-empty sweep");
    let mut sm = Summary::new();
    base_summary(&mut sm, "tradeoff", hash);
    sm.push("contrast_max", Quantity::exact(best.contrast));
    sm.push("delta_at_max_ghz", Quantity::exact(best.delta_ghz));
    sm.push(
        "width_above_85_ghz",
        Quantity::exact(width_above_ghz(&deltas, &contrasts, 0.85)?),
    );
    sm.write(&out.join("tradeoff_summary.json"))
}

fn cmd_trace(
    cfg: &SimConfig,
    hash: &str,
    out: &Path,
    states: &[u8],
    df_mhz: f64,
    shots_given: bool,
    warnings: &mut Vec<String>,
) -> Result<()> {
    if states.is_empty() {
        return Err(Error::InvalidParameter("--states must list a state".into()));
    }
    let op = cfg.operating_point()?;
    let settings = cfg.settings();
    // Without an explicit --shots, dump a single shot per state.
    let n_traces = if shots_given { cfg.run.shots } else { 1 };
    if n_traces > 200 {
        return Err(Error::InvalidParameter(format!(
            "{n_traces} trace files requested; cap is 200"
        )));
    }
    let mut sm = Summary::new();
    base_summary(&mut sm, "trace", hash);
    for (si, &st) in states.iter().enumerate() {
        let seq = prep_sequence(st, settings.envelope()?)?;
        let ctx = ReadoutContext::build(&op, &seq, settings.power_db, df_mhz)?;
        let ens = ensemble_seed(cfg.run.seed, st as u64, PURPOSE_TRACE);
        for k in 0..n_traces {
            let rec = write_trace_csv(
                &op,
                &ctx,
                ens,
                k as u64,
                &out.join(format!("trace_s{st}_shot{k}.csv")),
                "trace",
                cfg,
                hash,
                &[("state", st.to_string())],
            )?;
            if si == 0 && k == 0 {
                sm.push(
                    "first_outcome_b",
                    Quantity::exact(rec.outcomes.first().map_or(0.0, |&b| b as u8 as f64)),
                );
                sm.push(
                    "first_t_bifurcation_ns",
                    Quantity::exact(rec.t_bifurcation_ns.unwrap_or(f64::NAN)),
                );
                sm.push("final_level", Quantity::exact(rec.final_level as f64));
            }
        }
    }
    let _ = warnings;
    sm.write(&out.join("trace_summary.json"))
}
