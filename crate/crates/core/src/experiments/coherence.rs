//! Relaxation and dephasing scans: excite-wait-measure decay, detuned
//! free-evolution fringes, and extraction of the pure-dephasing time from
//! measured T2 and T1.

use super::fit::{fit_detuned_fringe, fit_exponential, ExponentialFit, OscillationFit};
use super::ReadoutSettings;
use crate::error::{Error, Result};
use crate::pulse::{pi_pulse, Sequence, Transition, PI_PULSE_DURATION_NS};
use crate::readout::{run_ensemble, OperatingPoint, ReadoutContext};
use crate::seeding::{ensemble_seed, PURPOSE_RAMSEY, PURPOSE_T1};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayScan {
    pub delays_ns: Vec<f64>,
    pub p_b: Vec<f64>,
    pub p_b_err: Vec<f64>,
    pub fit: ExponentialFit,
    pub warnings: Vec<String>,
}

/// Excite, wait, measure: switching probability versus delay decays with the
/// relaxation time.
pub fn run_t1(
    op: &OperatingPoint,
    settings: &ReadoutSettings,
    delays_ns: &[f64],
    shots: usize,
    master_seed: u64,
) -> Result<DecayScan> {
    if delays_ns.len() < 4 {
        return Err(Error::InvalidParameter(
            "need at least four delays for a decay fit".into(),
        ));
    }
    if delays_ns.iter().any(|&d| d < 0.0) {
        return Err(Error::InvalidParameter("delays must be >= 0".into()));
    }
    let env = settings.envelope()?;
    let mut p_b = Vec::with_capacity(delays_ns.len());
    let mut p_b_err = Vec::with_capacity(delays_ns.len());
    let mut warnings = Vec::new();
    let span = delays_ns.iter().cloned().fold(0.0f64, f64::max);
    if span < 3.0 * op.rates.t1_10_ns {
        warnings.push(format!(
            "delay span {span:.0} ns is under three expected decay times ({:.0} ns); tau is poorly constrained",
            op.rates.t1_10_ns
        ));
    }
    for (di, &delay) in delays_ns.iter().enumerate() {
        let seq = Sequence::new()
            .control(
                "pi01",
                -(delay + PI_PULSE_DURATION_NS),
                pi_pulse(Transition::Q01),
            )
            .readout("readout", 0.0, env);
        let ctx = ReadoutContext::build(op, &seq, settings.power_db, 0.0)?;
        let res = run_ensemble(
            op,
            &ctx,
            shots,
            ensemble_seed(master_seed, di as u64, PURPOSE_T1),
        )?;
        p_b.push(res.p_b[0]);
        p_b_err.push(res.p_b_err[0]);
        for w in res.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    let fit = fit_exponential(delays_ns, &p_b)?;
    Ok(DecayScan {
        delays_ns: delays_ns.to_vec(),
        p_b,
        p_b_err,
        fit,
        warnings,
    })
}

/// Excited-state probability after a pi/2 - wait - pi/2 sequence detuned by
/// `detuning_ghz`, from the two-level density matrix with relaxation and
/// dephasing: the fringe contrast decays with T2 and each transfer pulse
/// loses `pulse_error` of contrast.
pub fn ramsey_excited_probability(
    detuning_ghz: f64,
    t2_ns: f64,
    pulse_error: f64,
    t_ns: f64,
) -> f64 {
    let contrast = (1.0 - pulse_error).powi(2);
    0.5 * (1.0
        + contrast
            * (-t_ns / t2_ns).exp()
            * (2.0 * std::f64::consts::PI * detuning_ghz * t_ns).cos())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RamseyScan {
    pub delays_ns: Vec<f64>,
    pub p_b: Vec<f64>,
    pub p_b_err: Vec<f64>,
    pub fit: OscillationFit,
    /// Model T2 used to generate the fringes, 1 / (1/(2 T1) + 1/Tphi).
    pub t2_model_ns: f64,
    pub warnings: Vec<String>,
}

/// Runs detuned free-evolution fringes: the prepared excited probability at
/// each delay follows the analytic two-level evolution, and the readout maps
/// it to switching probability. The fitted fringe decay estimates T2.
pub fn run_ramsey(
    op: &OperatingPoint,
    settings: &ReadoutSettings,
    delays_ns: &[f64],
    detuning_ghz: f64,
    shots: usize,
    master_seed: u64,
) -> Result<RamseyScan> {
    if delays_ns.len() < 7 {
        return Err(Error::InvalidParameter(
            "need at least seven delays for a fringe fit".into(),
        ));
    }
    if !(detuning_ghz > 0.0) {
        return Err(Error::InvalidParameter(
            "fringe detuning must be > 0".into(),
        ));
    }
    let t2 = 1.0 / (0.5 / op.rates.t1_10_ns + 1.0 / op.tphi_ns);
    let env = settings.envelope()?;
    let seq = Sequence::new().readout("readout", 0.0, env);
    let ctx = ReadoutContext::build(op, &seq, settings.power_db, 0.0)?;
    let mut p_b = Vec::with_capacity(delays_ns.len());
    let mut p_b_err = Vec::with_capacity(delays_ns.len());
    let mut warnings = Vec::new();
    for (di, &dt) in delays_ns.iter().enumerate() {
        let mut op_d = op.clone();
        op_d.chain.prep_error_p1 =
            ramsey_excited_probability(detuning_ghz, t2, op.chain.pulse_error, dt);
        let res = run_ensemble(
            &op_d,
            &ctx,
            shots,
            ensemble_seed(master_seed, di as u64, PURPOSE_RAMSEY),
        )?;
        p_b.push(res.p_b[0]);
        p_b_err.push(res.p_b_err[0]);
        for w in res.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    let fit = fit_detuned_fringe(delays_ns, &p_b, detuning_ghz)?;
    Ok(RamseyScan {
        delays_ns: delays_ns.to_vec(),
        p_b,
        p_b_err,
        fit,
        t2_model_ns: t2,
        warnings,
    })
}

/// Pure-dephasing time from measured T2 and T1 through
/// 1/Tphi = 1/T2 - 1/(2 T1), with a (lo, hi) interval from the four error
/// corners. `hi` (and the central value, once T2 reaches the 2 T1 limit) is
/// infinite when the inputs allow no dephasing at all; T2 above the limit
/// beyond the stated errors is an inconsistency error.
pub fn extract_tphi(
    t2_ns: f64,
    t2_err_ns: f64,
    t1_ns: f64,
    t1_err_ns: f64,
) -> Result<(f64, (f64, f64))> {
    if !(t2_ns > 0.0) || !(t1_ns > 0.0) || t2_err_ns < 0.0 || t1_err_ns < 0.0 {
        return Err(Error::InvalidParameter(
            "times must be > 0 and errors >= 0".into(),
        ));
    }
    if t2_err_ns >= t2_ns || t1_err_ns >= t1_ns {
        return Err(Error::Inconsistent(
            "uncertainty exceeds the measured time".into(),
        ));
    }
    let rate = 1.0 / t2_ns - 0.5 / t1_ns;
    let mut lo_rate = f64::INFINITY;
    let mut hi_rate = f64::NEG_INFINITY;
    for s2 in [-1.0, 1.0] {
        for s1 in [-1.0, 1.0] {
            let r = 1.0 / (t2_ns + s2 * t2_err_ns) - 0.5 / (t1_ns + s1 * t1_err_ns);
            lo_rate = lo_rate.min(r);
            hi_rate = hi_rate.max(r);
        }
    }
    if hi_rate <= 0.0 {
        // Even the most favorable error corner puts T2 above 2 T1.
        return Err(Error::Inconsistent(format!(
            "T2 = {t2_ns:.0} ns exceeds the relaxation limit 2 T1 = {:.0} ns beyond uncertainty",
            2.0 * t1_ns
        )));
    }
    let hi = if lo_rate <= 0.0 { f64::INFINITY } else { 1.0 / lo_rate };
    let lo = 1.0 / hi_rate;
    // At or past the limit within errors: no resolvable dephasing.
    let center = if rate > 0.0 { 1.0 / rate } else { f64::INFINITY };
    Ok((center, (lo, hi)))
}
