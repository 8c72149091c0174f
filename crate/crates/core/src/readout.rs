//! Operating-point assembly and single-shot readout: qubit-state-dependent
//! cavity pull feeding the driven-Kerr field, homodyne filtering, and
//! latched-branch discrimination.
//!
//! The discriminator projects the output field on an auto-calibrated
//! local-oscillator axis and compares the filtered window mean against the
//! midpoint of the noiseless branch responses. Shot outcomes use an exact
//! equivalent of per-sample homodyne noise: the filter and window average are
//! linear, so the accumulated noise is one Gaussian whose variance follows
//! from the filter weights.

use crate::chain::{
    sample_trace, window_noise_weight_sq, ChainParams, DecayRates, HomodyneRecord,
    QubitJumpTrace,
};
use crate::dispersive::{CouplingParams, JointModel};
use crate::error::{Error, Result};
use crate::jba::{steady_alpha, DriveConfig, FieldTrajectory, JbaParams};
use crate::pulse::{compile, CompiledSequence, ControlPulse, Sequence};
use crate::seeding::{shot_rng, STREAM_FIELD, STREAM_HOMODYNE, STREAM_JUMPS, STREAM_PREP};
use crate::transmon::{
    combine_t1_us, flux_for_f01, purcell_t1_us, tphi_flux_noise_us, FluxPoint,
    TransmonParams,
};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Fraction of the hold plateau skipped before integrating, letting the
/// filter and the field settle after the amplitude drop.
pub const SETTLE_FRACTION: f64 = 0.15;
/// Default Langevin integration step, ns.
pub const DEFAULT_SDE_DT_NS: f64 = 0.85;
/// Non-Purcell relaxation of the first excited level, ns.
pub const DEFAULT_T1_OTHER_NS: f64 = 700.0;
/// Default 1/f flux-noise amplitude, micro flux quanta.
pub const DEFAULT_FLUX_NOISE_AMP_UPHI0: f64 = 20.0;

/// Fully resolved operating point: flux bias, dressed pull tables, decay
/// rates, and readout drive frequency.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub transmon: TransmonParams,
    pub coupling: CouplingParams,
    pub jba: JbaParams,
    pub chain: ChainParams,
    pub flux: FluxPoint,
    /// Qubit-resonator detuning fC - f01, GHz (qubit below the resonator).
    pub delta_ghz: f64,
    /// Drive detuning fC_bare - f_drive, GHz.
    pub readout_detuning_ghz: f64,
    pub f_drive_ghz: f64,
    pub joint: JointModel,
    pub rates: DecayRates,
    pub tphi_ns: f64,
    /// Decay rate of driven-Rabi oscillations, 1/ns.
    pub gamma_r_per_ns: f64,
    pub sde_dt_ns: f64,
}

impl OperatingPoint {
    pub fn build(
        transmon: &TransmonParams,
        coupling: &CouplingParams,
        jba: &JbaParams,
        chain: &ChainParams,
        delta_ghz: f64,
        readout_detuning_mhz: f64,
        sde_dt_ns: f64,
    ) -> Result<Self> {
        transmon.validate()?;
        coupling.validate()?;
        jba.validate()?;
        chain.validate()?;
        if (coupling.fc_ghz - jba.fc_ghz).abs() > 1e-9 {
            return Err(Error::InvalidParameter(
                "coupling and resonator fC disagree".into(),
            ));
        }
        if !(delta_ghz > 0.0) {
            return Err(Error::InvalidParameter(
                "delta (fC - f01) must be > 0: the qubit sits below the resonator".into(),
            ));
        }
        if !(readout_detuning_mhz > 0.0) {
            return Err(Error::InvalidParameter(
                "readout detuning (fC - f_drive) must be > 0".into(),
            ));
        }
        let flux = flux_for_f01(transmon, jba.fc_ghz - delta_ghz)?;
        let joint = JointModel::build(transmon, flux, coupling)?;
        let g = coupling.g_ghz;
        let ec = transmon.ec_std_ghz();
        let t1_10_ns = 1e3
            * combine_t1_us(
                purcell_t1_us(g, delta_ghz, jba.kappa_ghz)?,
                DEFAULT_T1_OTHER_NS * 1e-3,
            );
        let t1_21_ns = 1e3
            * combine_t1_us(
                purcell_t1_us(2f64.sqrt() * g, delta_ghz + ec, jba.kappa_ghz)?,
                DEFAULT_T1_OTHER_NS / 2.0 * 1e-3,
            );
        let tphi_ns =
            1e3 * tphi_flux_noise_us(transmon, flux, DEFAULT_FLUX_NOISE_AMP_UPHI0)?;
        let gamma_r = 3.0 / (4.0 * t1_10_ns) + 1.0 / (2.0 * tphi_ns);
        Ok(OperatingPoint {
            transmon: *transmon,
            coupling: *coupling,
            jba: *jba,
            chain: *chain,
            flux,
            delta_ghz,
            readout_detuning_ghz: readout_detuning_mhz * 1e-3,
            f_drive_ghz: jba.fc_ghz - readout_detuning_mhz * 1e-3,
            joint,
            rates: DecayRates { t1_10_ns, t1_21_ns },
            tphi_ns,
            gamma_r_per_ns: gamma_r,
            sde_dt_ns,
        })
    }

    /// Drive amplitude at the switching plateau for a fridge power, with an
    /// optional drive-frequency offset in MHz.
    pub fn eps_peak(&self, power_db: f64, df_mhz: f64) -> Result<f64> {
        let d = DriveConfig::new(&self.jba, self.f_drive_ghz + df_mhz * 1e-3, power_db)?;
        Ok(d.epsilon)
    }
}

/// Threshold geometry of one readout window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WindowCalibration {
    /// Photon-number threshold between the branches.
    pub n_threshold: f64,
    /// Local-oscillator phase, radians.
    pub lo_phase: f64,
    /// Discrimination threshold on the filtered in-phase mean.
    pub i_threshold: f64,
    /// Steady branch photon numbers (low, high) when bistable.
    pub branches: Option<(f64, f64)>,
    /// First integrated step (after the settle margin) and one-past-last.
    pub disc_start: usize,
    pub disc_end: usize,
    /// Equivalent std dev of the window-averaged homodyne noise.
    pub noise_sigma: f64,
    /// Hold-plateau drive amplitude.
    pub eps_hold: f64,
}

/// Everything shot-independent for an ensemble at one sequence and power.
#[derive(Debug, Clone)]
pub struct ReadoutContext {
    pub compiled: CompiledSequence,
    /// Drive amplitude per step, 1/ns.
    pub eps_steps: Vec<f64>,
    /// Rotations as (absolute ns, pulse), sorted.
    pub rotations_ns: Vec<(f64, ControlPulse)>,
    pub windows: Vec<WindowCalibration>,
    /// Base detuning fC_bare - f_drive_effective, rad/ns.
    pub delta_base_a: f64,
    pub eps_peak: f64,
    pub power_db: f64,
    pub df_mhz: f64,
}

impl ReadoutContext {
    /// Compiles a sequence at the operating point's integration step and
    /// calibrates every readout window (threshold, LO phase, noise).
    pub fn build(op: &OperatingPoint, seq: &Sequence, power_db: f64, df_mhz: f64) -> Result<Self> {
        Self::build_with_dark(op, seq, power_db, df_mhz, &[])
    }

    /// Like `build`, but the listed readout windows (by index) get zero drive
    /// and always read B-bar. The time grid and random-number consumption stay
    /// identical to the fully driven sequence, so ensembles run with the same
    /// seed differ only through the darkened drive.
    pub fn build_with_dark(
        op: &OperatingPoint,
        seq: &Sequence,
        power_db: f64,
        df_mhz: f64,
        dark_windows: &[usize],
    ) -> Result<Self> {
        let compiled = compile(seq, op.sde_dt_ns)?;
        let eps_peak = op.eps_peak(power_db, df_mhz)?;
        let delta_base_a =
            2.0 * std::f64::consts::PI * (op.readout_detuning_ghz - df_mhz * 1e-3);
        let mut eps_steps: Vec<f64> =
            compiled.readout_rel.iter().map(|r| r * eps_peak).collect();
        for &di in dark_windows {
            let w = compiled.windows.get(di).ok_or_else(|| {
                Error::InvalidParameter(format!("dark window index {di} out of range"))
            })?;
            for e in &mut eps_steps[w.start..w.end] {
                *e = 0.0;
            }
        }
        let dt = compiled.dt_ns;
        let rotations_ns: Vec<(f64, ControlPulse)> = compiled
            .rotations
            .iter()
            .map(|r| (compiled.t0_ns + r.step as f64 * dt, r.pulse))
            .collect();

        let a = op.chain.filter_coeff(dt);
        let var_sample = op.chain.noise_var_per_sample(op.f_drive_ghz, dt);
        let mut windows = Vec::new();
        for (wi, w) in compiled.windows.iter().enumerate() {
            let hold_rel = if w.hold_start < w.end {
                compiled.readout_rel[(w.hold_start + 1).min(w.end - 1)]
            } else {
                1.0
            };
            let eps_hold = eps_peak * hold_rel;
            let settle = ((w.end - w.hold_start) as f64 * SETTLE_FRACTION).round() as usize;
            let disc_start = (w.hold_start + settle).min(w.end.saturating_sub(1));
            let cal = if dark_windows.contains(&wi) {
                let noise_sigma =
                    (var_sample * window_noise_weight_sq(a, disc_start, w.end)).sqrt();
                WindowCalibration {
                    n_threshold: f64::INFINITY,
                    lo_phase: 0.0,
                    i_threshold: f64::INFINITY,
                    branches: None,
                    disc_start,
                    disc_end: w.end,
                    noise_sigma,
                    eps_hold: 0.0,
                }
            } else {
                calibrate_window(op, delta_base_a, eps_hold, disc_start, w.end, a, var_sample)?
            };
            windows.push(cal);
        }
        Ok(ReadoutContext {
            compiled,
            eps_steps,
            rotations_ns,
            windows,
            delta_base_a,
            eps_peak,
            power_db,
            df_mhz,
        })
    }

    pub fn t_end_ns(&self) -> f64 {
        self.compiled.t0_ns + self.compiled.n_steps() as f64 * self.compiled.dt_ns
    }
}

/// Steady output field for a branch photon number at the hold drive,
/// input-referred units (alpha_out = alpha_in - sqrt(kappa) alpha).
fn branch_output(op: &OperatingPoint, delta_base_a: f64, eps_hold: f64, n: f64) -> Complex64 {
    let kappa_a = op.jba.kappa_a();
    let delta_eff =
        delta_base_a + 2.0 * std::f64::consts::PI * op.joint.pull_ghz(0, n) + op.jba.kerr_a() * n;
    let alpha_in = Complex64::new(eps_hold / kappa_a.sqrt(), 0.0);
    alpha_in - kappa_a.sqrt() * steady_alpha(n, delta_eff, kappa_a, op.jba.kerr_a(), eps_hold)
}

/// Threshold and LO calibration from the noiseless dressed branch responses
/// of a ground-state qubit at the hold amplitude.
fn calibrate_window(
    op: &OperatingPoint,
    delta_base_a: f64,
    eps_hold: f64,
    disc_start: usize,
    disc_end: usize,
    filter_a: f64,
    var_sample: f64,
) -> Result<WindowCalibration> {
    let kappa_a = op.jba.kappa_a();
    let kerr_a = op.jba.kerr_a();
    let pull0 = |n: f64| op.joint.pull_ghz(0, n);
    let n_max = (op.joint.ntab - 1) as f64;
    let roots = crate::jba::pulled_roots(
        delta_base_a,
        kappa_a,
        kerr_a,
        eps_hold * eps_hold,
        &pull0,
        n_max,
    );

    // Photon threshold and the two reference outputs used for the LO axis.
    let (n_thr, m_lo, m_hi, branches) = match roots.len() {
        n if n >= 3 => {
            let (lo, hi) = (roots[0], roots[n - 1]);
            (
                0.5 * (lo + hi),
                branch_output(op, delta_base_a, eps_hold, lo),
                branch_output(op, delta_base_a, eps_hold, hi),
                Some((lo, hi)),
            )
        }
        1 => {
            let r = roots[0];
            let n_res = delta_base_a / kerr_a.abs();
            if r > 0.5 * n_res {
                // Only the high branch exists; the "low" reference is the
                // undisturbed input (empty cavity).
                (
                    0.5 * r,
                    Complex64::new(eps_hold / kappa_a.sqrt(), 0.0),
                    branch_output(op, delta_base_a, eps_hold, r),
                    None,
                )
            } else {
                // Only the low branch exists at the hold amplitude: a latch
                // cannot survive the hold, so every shot reads B-bar.
                let n_star = 2.0 * r + 3.0;
                let noise_sigma =
                    (var_sample * window_noise_weight_sq(filter_a, disc_start, disc_end)).sqrt();
                return Ok(WindowCalibration {
                    n_threshold: n_star,
                    lo_phase: 0.0,
                    i_threshold: f64::INFINITY,
                    branches: None,
                    disc_start,
                    disc_end,
                    noise_sigma,
                    eps_hold,
                });
            }
        }
        _ => {
            return Err(Error::EmptyWindow(
                "no steady cavity response at the hold amplitude".into(),
            ))
        }
    };
    let lo_phase = (m_hi - m_lo).arg();
    let rot = Complex64::from_polar(1.0, -lo_phase);
    let i_threshold = 0.5 * ((rot * m_lo).re + (rot * m_hi).re);
    let noise_sigma = (var_sample * window_noise_weight_sq(filter_a, disc_start, disc_end)).sqrt();
    Ok(WindowCalibration {
        n_threshold: n_thr,
        lo_phase,
        i_threshold,
        branches,
        disc_start,
        disc_end,
        noise_sigma,
    eps_hold,
    })
}

/// Result of one simulated shot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShotRecord {
    /// Latched (true = B) per readout window.
    pub outcomes: Vec<bool>,
    /// Filtered in-phase window means, input-referred, noise included.
    pub i_means: Vec<f64>,
    /// Mean intracavity photon number over each discrimination window.
    pub nbar_hold: Vec<f64>,
    /// First time the photon number crossed the window threshold, if any.
    pub t_bifurcation_ns: Option<f64>,
    pub final_level: u8,
    /// Residual photons at the start of each window after the first.
    pub gap_residual_n: Vec<f64>,
}

struct ShotAccumulator<'a> {
    ctx: &'a ReadoutContext,
    filt_i: f64,
    filter_a: f64,
    acc_i: Vec<f64>,
    acc_n: Vec<f64>,
    counts: Vec<usize>,
    t_bif: Option<f64>,
    gap_res: Vec<f64>,
    rot: Vec<Complex64>,
    kappa_sqrt: f64,
}

impl<'a> ShotAccumulator<'a> {
    fn new(ctx: &'a ReadoutContext, filter_a: f64, kappa_a: f64) -> Self {
        let nw = ctx.windows.len();
        ShotAccumulator {
            ctx,
            filt_i: 0.0,
            filter_a,
            acc_i: vec![0.0; nw],
            acc_n: vec![0.0; nw],
            counts: vec![0; nw],
            t_bif: None,
            gap_res: Vec::new(),
            rot: ctx
                .windows
                .iter()
                .map(|w| Complex64::from_polar(1.0, -w.lo_phase))
                .collect(),
            kappa_sqrt: kappa_a.sqrt(),
        }
    }

    #[inline]
    fn observe(&mut self, k: usize, alpha: Complex64) {
        // Ring-down check: photon number entering each window after the first.
        for w in self.ctx.compiled.windows.iter().skip(1) {
            if k == w.start {
                self.gap_res.push(alpha.norm_sqr());
            }
        }
        let alpha_in = self.ctx.eps_steps[k] / self.kappa_sqrt;
        let out = Complex64::new(alpha_in, 0.0) - self.kappa_sqrt * alpha;
        // One LO axis per window; between windows use the first window's axis
        // (the filter state carries over but is re-settled by the margin).
        let wi = self
            .ctx
            .windows
            .iter()
            .position(|w| k < w.disc_end)
            .unwrap_or(self.ctx.windows.len().saturating_sub(1));
        let i_now = (self.rot[wi] * out).re;
        self.filt_i += self.filter_a * (i_now - self.filt_i);
        let w = &self.ctx.windows[wi];
        if k >= w.disc_start && k < w.disc_end {
            let n = alpha.norm_sqr();
            self.acc_i[wi] += self.filt_i;
            self.acc_n[wi] += n;
            self.counts[wi] += 1;
            if self.t_bif.is_none() && n > w.n_threshold {
                self.t_bif =
                    Some(self.ctx.compiled.t0_ns + k as f64 * self.ctx.compiled.dt_ns);
            }
        }
    }
}

/// Runs one shot. Distinct random-number streams cover preparation and pulse
/// errors, relaxation jumps, intracavity field noise, and homodyne noise;
/// shot i of an ensemble derives them from `ensemble_seed ^ i`.
pub fn run_shot(
    op: &OperatingPoint,
    ctx: &ReadoutContext,
    ensemble_seed: u64,
    shot_index: u64,
) -> Result<ShotRecord> {
    let mut rng_prep = shot_rng(ensemble_seed, shot_index, STREAM_PREP);
    let mut rng_jumps = shot_rng(ensemble_seed, shot_index, STREAM_JUMPS);
    let mut rng_field = shot_rng(ensemble_seed, shot_index, STREAM_FIELD);
    let mut rng_hom = shot_rng(ensemble_seed, shot_index, STREAM_HOMODYNE);

    let trace = sample_trace(
        &op.chain,
        &op.rates,
        &ctx.rotations_ns,
        ctx.compiled.t0_ns,
        ctx.t_end_ns(),
        &mut rng_prep,
        &mut rng_jumps,
    );
    let filter_a = op.chain.filter_coeff(ctx.compiled.dt_ns);
    let mut acc = ShotAccumulator::new(ctx, filter_a, op.jba.kappa_a());
    integrate_levels(op, ctx, &trace, Some(&mut rng_field), |k, alpha| {
        acc.observe(k, alpha)
    })?;

    let mut outcomes = Vec::new();
    let mut i_means = Vec::new();
    let mut nbar = Vec::new();
    for (wi, w) in ctx.windows.iter().enumerate() {
        let cnt = acc.counts[wi].max(1) as f64;
        let noise: f64 = StandardNormal.sample(&mut rng_hom);
        let i_mean = acc.acc_i[wi] / cnt + w.noise_sigma * noise;
        outcomes.push(i_mean > w.i_threshold);
        i_means.push(i_mean);
        nbar.push(acc.acc_n[wi] / cnt);
    }
    Ok(ShotRecord {
        outcomes,
        i_means,
        nbar_hold: nbar,
        t_bifurcation_ns: acc.t_bif,
        final_level: trace.final_level(),
        gap_residual_n: acc.gap_res.clone(),
    })
}

/// Exponential Euler-Maruyama integration with the qubit-level-dependent
/// pull from the jump trace. Calls `observe(step, alpha)` after each step.
fn integrate_levels<F: FnMut(usize, Complex64)>(
    op: &OperatingPoint,
    ctx: &ReadoutContext,
    trace: &QubitJumpTrace,
    mut rng: Option<&mut ChaCha8Rng>,
    mut observe: F,
) -> Result<()> {
    let kappa_a = op.jba.kappa_a();
    let kerr_a = op.jba.kerr_a();
    let dt = ctx.compiled.dt_ns;
    if dt > 0.1 / kappa_a {
        return Err(Error::StepTooLarge(format!(
            "dt = {dt} ns exceeds 0.1/kappa = {:.3} ns",
            0.1 / kappa_a
        )));
    }
    let sigma = op.jba.noise_sigma(dt);
    let n_max = (op.joint.ntab - 1) as f64 - 0.01;
    let t0 = ctx.compiled.t0_ns;
    let mut alpha = Complex64::new(0.0, 0.0);

    // Jump-trace segments flattened to per-step levels once per shot.
    let n_steps = ctx.compiled.n_steps();
    for k in 0..n_steps {
        let level = trace.level_at(t0 + k as f64 * dt) as usize;
        let n = alpha.norm_sqr();
        let pull = op.joint.pull_ghz(level, n.min(n_max));
        let delta_eff = ctx.delta_base_a + 2.0 * std::f64::consts::PI * pull + kerr_a * n;
        let lambda = Complex64::new(-kappa_a / 2.0, delta_eff);
        let e = (lambda * dt).exp();
        let drive = (e - Complex64::new(1.0, 0.0)) / lambda
            * Complex64::new(0.0, ctx.eps_steps[k]);
        let noise = match rng.as_deref_mut() {
            Some(r) => {
                let x: f64 = StandardNormal.sample(r);
                let y: f64 = StandardNormal.sample(r);
                Complex64::new(sigma * x, sigma * y)
            }
            None => Complex64::new(0.0, 0.0),
        };
        alpha = alpha * e + drive + noise;
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::Divergence {
                step: k,
                msg: "field amplitude is not finite".into(),
            });
        }
        observe(k, alpha);
    }
    Ok(())
}

/// Ensemble statistics for one context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub n_shots: usize,
    /// Latching probability per window, with binomial error.
    pub p_b: Vec<f64>,
    pub p_b_err: Vec<f64>,
    /// Joint counts per window pair pattern for multi-readout sequences.
    pub records: Vec<ShotRecord>,
    pub warnings: Vec<String>,
}

/// Runs an ensemble of shots in parallel; aggregation is indexed by shot, so
/// the result is independent of thread count.
pub fn run_ensemble(
    op: &OperatingPoint,
    ctx: &ReadoutContext,
    n_shots: usize,
    ensemble_seed: u64,
) -> Result<EnsembleResult> {
    if n_shots == 0 {
        return Err(Error::InvalidParameter("n_shots must be > 0".into()));
    }
    let records: Vec<ShotRecord> = (0..n_shots)
        .into_par_iter()
        .map(|i| run_shot(op, ctx, ensemble_seed, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let nw = ctx.windows.len();
    let mut p_b = vec![0.0; nw];
    for r in &records {
        for (wi, &o) in r.outcomes.iter().enumerate() {
            if o {
                p_b[wi] += 1.0;
            }
        }
    }
    let mut warnings = Vec::new();
    for wi in 1..nw {
        let res: f64 = records
            .iter()
            .filter_map(|r| r.gap_residual_n.get(wi - 1))
            .sum::<f64>()
            / n_shots as f64;
        if res >= 0.5 {
            warnings.push(format!(
                "residual cavity population {res:.2} photons at the start of readout {wi}"
            ));
        }
    }
    let p_b: Vec<f64> = p_b.iter().map(|c| c / n_shots as f64).collect();
    let p_b_err = p_b
        .iter()
        .map(|p| (p * (1.0 - p) / n_shots as f64).sqrt())
        .collect();
    Ok(EnsembleResult {
        n_shots,
        p_b,
        p_b_err,
        records,
        warnings,
    })
}

/// Full-trace variant of run_shot for inspection: returns the field
/// trajectory, the jump trace, and a homodyne record synthesized with
/// per-sample noise.
pub fn run_shot_trace(
    op: &OperatingPoint,
    ctx: &ReadoutContext,
    ensemble_seed: u64,
    shot_index: u64,
) -> Result<(FieldTrajectory, QubitJumpTrace, HomodyneRecord, ShotRecord)> {
    let mut rng_prep = shot_rng(ensemble_seed, shot_index, STREAM_PREP);
    let mut rng_jumps = shot_rng(ensemble_seed, shot_index, STREAM_JUMPS);
    let mut rng_field = shot_rng(ensemble_seed, shot_index, STREAM_FIELD);
    let mut rng_hom = shot_rng(ensemble_seed, shot_index, STREAM_HOMODYNE);

    let trace = sample_trace(
        &op.chain,
        &op.rates,
        &ctx.rotations_ns,
        ctx.compiled.t0_ns,
        ctx.t_end_ns(),
        &mut rng_prep,
        &mut rng_jumps,
    );
    let dt = ctx.compiled.dt_ns;
    let mut alphas = Vec::with_capacity(ctx.compiled.n_steps());
    integrate_levels(op, ctx, &trace, Some(&mut rng_field), |_, a| alphas.push(a))?;

    let kappa_sqrt = op.jba.kappa_a().sqrt();
    let lo = ctx.windows.first().map(|w| w.lo_phase).unwrap_or(0.0);
    let rot = Complex64::from_polar(1.0, -lo);
    let iq: Vec<(f64, f64)> = alphas
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let out = Complex64::new(ctx.eps_steps[k] / kappa_sqrt, 0.0) - kappa_sqrt * a;
            let r = rot * out;
            (r.re, r.im)
        })
        .collect();
    let record = synthesize(op, ctx, &iq, &mut rng_hom)?;

    // Outcomes from the synthesized record: filtered means per window against
    // the calibrated thresholds (gain divides out).
    let gain = op.chain.amplitude_gain();
    let mut outcomes = Vec::new();
    let mut i_means = Vec::new();
    for w in &ctx.windows {
        let m: f64 = record.i_filt[w.disc_start..w.disc_end]
            .iter()
            .sum::<f64>()
            / (w.disc_end - w.disc_start) as f64
            / gain;
        outcomes.push(m > w.i_threshold);
        i_means.push(m);
    }

    let mut traj = FieldTrajectory {
        dt_ns: dt,
        times_ns: (0..alphas.len())
            .map(|k| ctx.compiled.t0_ns + k as f64 * dt)
            .collect(),
        alpha: alphas,
        bifurcated: outcomes.iter().any(|&b| b),
        t_bifurcation_ns: None,
    };
    let nbar: Vec<f64> = ctx
        .windows
        .iter()
        .map(|w| {
            traj.alpha[w.disc_start..w.disc_end]
                .iter()
                .map(|a| a.norm_sqr())
                .sum::<f64>()
                / (w.disc_end - w.disc_start) as f64
        })
        .collect();
    for (wi, w) in ctx.windows.iter().enumerate() {
        if outcomes[wi] {
            if let Some(k) = (w.disc_start..w.disc_end)
                .find(|&k| traj.alpha[k].norm_sqr() > w.n_threshold)
            {
                traj.t_bifurcation_ns = Some(traj.times_ns[k]);
                break;
            }
        }
    }
    let shot = ShotRecord {
        outcomes,
        i_means,
        nbar_hold: nbar,
        t_bifurcation_ns: traj.t_bifurcation_ns,
        final_level: trace.final_level(),
        gap_residual_n: Vec::new(),
    };
    Ok((traj, trace, record, shot))
}

fn synthesize(
    op: &OperatingPoint,
    ctx: &ReadoutContext,
    iq: &[(f64, f64)],
    rng: &mut ChaCha8Rng,
) -> Result<HomodyneRecord> {
    crate::chain::synthesize_homodyne(
        &op.chain,
        op.f_drive_ghz,
        ctx.compiled.dt_ns,
        ctx.compiled.t0_ns,
        iq,
        rng,
    )
}
