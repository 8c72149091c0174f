//! Coherence-versus-readout trade-off: sweep the qubit-resonator detuning,
//! and at each point measure the best shelved readout contrast together with
//! the relaxation, dephasing, and driven-decay times. Larger detunings
//! protect the qubit but shrink the state-dependent cavity pull the readout
//! relies on.

use super::scurve::{best_contrast, match_shift, switching_curve};
use super::{default_power_grid, ReadoutSettings};
use crate::chain::ChainParams;
use crate::dispersive::{dressed_shifts, CouplingParams};
use crate::error::{Error, Result};
use crate::jba::JbaParams;
use crate::readout::OperatingPoint;
use crate::seeding::{ensemble_seed, PURPOSE_TRADEOFF};
use crate::transmon::TransmonParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub delta_ghz: f64,
    /// Best shelved contrast max(p_B(2) - p_B(0)) over the power grid.
    pub contrast: f64,
    pub best_power_db: f64,
    pub t1_ns: f64,
    pub tphi_ns: f64,
    /// Driven-oscillation decay time 1/Gamma_R, ns.
    pub tau_r_ns: f64,
    /// Zero-photon cavity pull difference between qubit states 0 and 1 from
    /// the ladder model, MHz.
    pub two_chi_mhz: f64,
    /// Matched curve shift of the first excited state, MHz (optional, costly).
    pub shift_mhz: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TradeoffResult {
    pub detuning_mhz: f64,
    pub points: Vec<TradeoffPoint>,
}

/// Runs the detuning sweep. Each detuning gets its own power grid anchored to
/// its ground-state switching edge and a decorrelated seed; `with_shift` adds
/// the measured excited-state curve shift (about nine reference curves per
/// detuning, so roughly ten times the cost).
#[allow(clippy::too_many_arguments)]
pub fn run_tradeoff(
    transmon: &TransmonParams,
    coupling: &CouplingParams,
    jba: &JbaParams,
    chain: &ChainParams,
    deltas_ghz: &[f64],
    detuning_mhz: f64,
    settings: &ReadoutSettings,
    shots: usize,
    master_seed: u64,
    with_shift: bool,
) -> Result<TradeoffResult> {
    if deltas_ghz.is_empty() {
        return Err(Error::InvalidParameter("empty detuning list".into()));
    }
    let mut points = Vec::with_capacity(deltas_ghz.len());
    for (k, &delta) in deltas_ghz.iter().enumerate() {
        let op = OperatingPoint::build(
            transmon,
            coupling,
            jba,
            chain,
            delta,
            detuning_mhz,
            crate::readout::DEFAULT_SDE_DT_NS,
        )?;
        let powers = default_power_grid(&op)?;
        let seed_k = ensemble_seed(master_seed, k as u64, PURPOSE_TRADEOFF);
        let s0 = switching_curve(&op, settings, 0, &powers, 0.0, shots, seed_k)?;
        let s2 = switching_curve(&op, settings, 2, &powers, 0.0, shots, seed_k)?;
        let c = best_contrast(&s0, &s2)?;
        let two_chi_mhz = dressed_shifts(transmon, op.flux, coupling)?.cavity_pull_ghz * 1e3;
        let mut warnings: Vec<String> = s0
            .warnings
            .iter()
            .chain(&s2.warnings)
            .cloned()
            .collect();
        warnings.dedup();
        let shift_mhz = if with_shift {
            let s1 = switching_curve(&op, settings, 1, &powers, 0.0, shots, seed_k)?;
            let family: Vec<_> = (0..9)
                .map(|i| {
                    let df = two_chi_mhz * (0.6 + 0.1 * i as f64);
                    switching_curve(&op, settings, 0, &powers, df, shots, seed_k)
                })
                .collect::<Result<_>>()?;
            Some(match_shift(&family, &s1)?)
        } else {
            None
        };
        points.push(TradeoffPoint {
            delta_ghz: delta,
            contrast: c.contrast,
            best_power_db: c.power_db,
            t1_ns: op.rates.t1_10_ns,
            tphi_ns: op.tphi_ns,
            tau_r_ns: 1.0 / op.gamma_r_per_ns,
            two_chi_mhz,
            shift_mhz,
            warnings,
        });
    }
    Ok(TradeoffResult {
        detuning_mhz,
        points,
    })
}

/// Width in detuning over which the contrast stays at or above `level`,
/// linearly interpolating the crossings and clamping at the grid ends.
pub fn width_above_ghz(deltas_ghz: &[f64], contrasts: &[f64], level: f64) -> Result<f64> {
    if deltas_ghz.len() != contrasts.len() || deltas_ghz.len() < 2 {
        return Err(Error::InvalidParameter(
            "need matching delta and contrast lists with at least two points".into(),
        ));
    }
    if deltas_ghz.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "detunings must be strictly increasing".into(),
        ));
    }
    let above: Vec<bool> = contrasts.iter().map(|&c| c >= level).collect();
    if !above.iter().any(|&a| a) {
        return Ok(0.0);
    }
    let first = above.iter().position(|&a| a).unwrap();
    let last = above.iter().rposition(|&a| a).unwrap();
    let left = if first == 0 {
        deltas_ghz[0]
    } else {
        let (x0, x1) = (deltas_ghz[first - 1], deltas_ghz[first]);
        let (y0, y1) = (contrasts[first - 1], contrasts[first]);
        x0 + (x1 - x0) * (level - y0) / (y1 - y0)
    };
    let right = if last == deltas_ghz.len() - 1 {
        deltas_ghz[last]
    } else {
        let (x0, x1) = (deltas_ghz[last], deltas_ghz[last + 1]);
        let (y0, y1) = (contrasts[last], contrasts[last + 1]);
        x0 + (x1 - x0) * (level - y0) / (y1 - y0)
    };
    Ok(right - left)
}
