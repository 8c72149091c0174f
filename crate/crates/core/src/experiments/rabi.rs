//! Rabi scans: for each drive duration the qubit is prepared in the excited
//! state with the analytic driven-evolution probability (decaying Rabi
//! oscillation), then read out. The readout maps the oscillation onto
//! switching probability; a damped-cosine fit extracts the visibility.

use super::fit::{fit_damped_cosine, OscillationFit};
use super::{prep_sequence, ReadoutSettings};
use crate::error::{Error, Result};
use crate::pulse::{pi_pulse, Sequence, Transition, PI_PULSE_DURATION_NS};
use crate::readout::{run_ensemble, OperatingPoint, ReadoutContext};
use crate::seeding::{ensemble_seed, PURPOSE_RABI};
use serde::{Deserialize, Serialize};

/// Excited-state probability after resonant driving for `t_ns` at Rabi
/// frequency `omega_ghz`, with the driven coherence decaying at
/// `gamma_r_per_ns`: p1 = (1 - cos(2 pi Omega t) exp(-Gamma_R t)) / 2.
pub fn driven_excited_probability(omega_ghz: f64, gamma_r_per_ns: f64, t_ns: f64) -> f64 {
    0.5 * (1.0
        - (2.0 * std::f64::consts::PI * omega_ghz * t_ns).cos() * (-gamma_r_per_ns * t_ns).exp())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RabiScan {
    pub delays_ns: Vec<f64>,
    pub p_b: Vec<f64>,
    pub p_b_err: Vec<f64>,
    pub fit: OscillationFit,
    /// Peak-to-peak switching-probability oscillation at zero delay.
    pub visibility: f64,
    pub warnings: Vec<String>,
}

/// Runs a Rabi scan at the given readout settings. With `composite` the
/// excited population is shelved to the second excited level by a transfer
/// pulse right before the readout ramp.
pub fn run_rabi(
    op: &OperatingPoint,
    settings: &ReadoutSettings,
    delays_ns: &[f64],
    omega_ghz: f64,
    composite: bool,
    shots: usize,
    master_seed: u64,
) -> Result<RabiScan> {
    if !(omega_ghz > 0.0) {
        return Err(Error::InvalidParameter("Rabi frequency must be > 0".into()));
    }
    if delays_ns.len() < 6 {
        return Err(Error::InvalidParameter(
            "need at least six drive durations for a Rabi fit".into(),
        ));
    }
    let env = settings.envelope()?;
    let seq = if composite {
        Sequence::new()
            .control("shelve12", -PI_PULSE_DURATION_NS, pi_pulse(Transition::Q12))
            .readout("readout", 0.0, env)
    } else {
        prep_sequence(0, env)?
    };
    let ctx = ReadoutContext::build(op, &seq, settings.power_db, 0.0)?;
    let mut p_b = Vec::with_capacity(delays_ns.len());
    let mut p_b_err = Vec::with_capacity(delays_ns.len());
    let mut warnings = Vec::new();
    for (di, &dt) in delays_ns.iter().enumerate() {
        let mut op_d = op.clone();
        op_d.chain.prep_error_p1 = driven_excited_probability(omega_ghz, op.gamma_r_per_ns, dt);
        let res = run_ensemble(
            &op_d,
            &ctx,
            shots,
            ensemble_seed(master_seed, di as u64, PURPOSE_RABI),
        )?;
        p_b.push(res.p_b[0]);
        p_b_err.push(res.p_b_err[0]);
        for w in res.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    let fit = fit_damped_cosine(delays_ns, &p_b, omega_ghz)?;
    Ok(RabiScan {
        delays_ns: delays_ns.to_vec(),
        p_b,
        p_b_err,
        visibility: fit.peak_to_peak,
        fit,
        warnings,
    })
}
