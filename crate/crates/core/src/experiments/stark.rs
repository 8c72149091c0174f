//! Drive-power calibration: intracavity photon number versus drive power from
//! the steady cavity response, the qubit frequency shift it produces, the
//! relaxation-time model that follows, and the Kerr-constant calibration that
//! pins the excited-state switching edge to a target power.

use super::{prep_sequence, ReadoutSettings};
use crate::error::{Error, Result};
use crate::jba::{epsilon_to_power_db, pulled_roots, pulled_window_eps2};
use crate::readout::{run_ensemble, OperatingPoint, ReadoutContext, DEFAULT_T1_OTHER_NS};
use crate::seeding::{ensemble_seed, PURPOSE_STARK};
use crate::transmon::{combine_t1_us, purcell_t1_us};
use serde::{Deserialize, Serialize};

/// Cavity response and qubit back-shift at one drive power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StarkPoint {
    pub power_db: f64,
    /// Ground-state switching probability.
    pub p_b: f64,
    pub p_b_err: f64,
    /// Steady photon number on the dim branch, if it exists at this power.
    pub n_low: Option<f64>,
    /// Steady photon number on the bright branch, if it exists.
    pub n_high: Option<f64>,
    /// Qubit frequency shift produced by the occupied branch, MHz (negative).
    pub f01_shift_mhz: f64,
    /// Relaxation time with the radiative channel evaluated at the shifted
    /// qubit frequency, ns.
    pub t1_model_ns: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StarkScan {
    pub points: Vec<StarkPoint>,
    /// First grid index whose switching probability exceeds one half.
    pub jump_index: Option<usize>,
    /// Dim-branch photons at the last power before the jump.
    pub n_dim: Option<f64>,
    /// Bright-branch photons at the first power past the jump.
    pub n_bright: Option<f64>,
    pub warnings: Vec<String>,
}

/// Sweeps drive power with the qubit left in the ground state, recording the
/// switching probability and the steady-state photon numbers at the ramp
/// plateau; the occupied branch sets the Stark shift and the T1 model.
pub fn run_stark(
    op: &OperatingPoint,
    settings: &ReadoutSettings,
    powers_db: &[f64],
    shots: usize,
    master_seed: u64,
) -> Result<StarkScan> {
    if powers_db.is_empty() {
        return Err(Error::InvalidParameter("empty power grid".into()));
    }
    let env = settings.envelope()?;
    let seq = prep_sequence(0, env)?;
    let kappa_a = op.jba.kappa_a();
    let kerr_a = op.jba.kerr_a();
    let delta_base_a = 2.0 * std::f64::consts::PI * op.readout_detuning_ghz;
    let pull0 = |n: f64| op.joint.pull_ghz(0, n);
    let n_res = delta_base_a / kerr_a.abs();
    let f01_0 = op.joint.ac_stark_f01(0.0)?;

    let mut stats = Vec::with_capacity(powers_db.len());
    let mut branches = Vec::with_capacity(powers_db.len());
    let mut warnings = Vec::new();
    for (pi, &p) in powers_db.iter().enumerate() {
        let ctx = ReadoutContext::build(op, &seq, p, 0.0)?;
        let res = run_ensemble(op, &ctx, shots, ensemble_seed(master_seed, pi as u64, PURPOSE_STARK))?;
        for w in res.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        stats.push((res.p_b[0], res.p_b_err[0]));
        let eps = op.eps_peak(p, 0.0)?;
        let roots = pulled_roots(
            delta_base_a,
            kappa_a,
            kerr_a,
            eps * eps,
            &pull0,
            (op.joint.ntab - 1) as f64,
        );
        branches.push(match roots.len() {
            n if n >= 3 => (Some(roots[0]), Some(roots[n - 1])),
            1 if roots[0] > 0.5 * n_res => (None, Some(roots[0])),
            1 => (Some(roots[0]), None),
            _ => (None, None),
        });
    }
    let jump_index = stats.iter().position(|&(p_b, _)| p_b > 0.5);
    // The occupied branch follows the ramp classification: dim below the
    // jump power, bright from the jump on. This keeps the Stark shift and
    // the T1 model monotone through counting noise near the edge.
    let mut points = Vec::with_capacity(powers_db.len());
    for (i, &p) in powers_db.iter().enumerate() {
        let (n_low, n_high) = branches[i];
        let bright = jump_index.is_some_and(|j| i >= j);
        let occupied = if bright {
            n_high.or(n_low)
        } else {
            n_low.or(n_high)
        }
        .ok_or_else(|| Error::EmptyWindow(format!("no steady response at {p:.2} dB")))?;
        let f01_n = op.joint.ac_stark_f01(occupied)?;
        let t1_model_ns = 1e3
            * combine_t1_us(
                purcell_t1_us(op.coupling.g_ghz, op.coupling.fc_ghz - f01_n, op.jba.kappa_ghz)?,
                DEFAULT_T1_OTHER_NS * 1e-3,
            );
        points.push(StarkPoint {
            power_db: p,
            p_b: stats[i].0,
            p_b_err: stats[i].1,
            n_low,
            n_high,
            f01_shift_mhz: (f01_n - f01_0) * 1e3,
            t1_model_ns,
        });
    }
    let n_dim = jump_index
        .and_then(|j| j.checked_sub(1))
        .and_then(|j| points[j].n_low);
    let n_bright = jump_index.and_then(|j| points[j].n_high);
    Ok(StarkScan {
        points,
        jump_index,
        n_dim,
        n_bright,
        warnings,
    })
}

/// Upper switching-edge power for a qubit level's dressed cavity response at
/// a trial Kerr constant.
fn edge_db(op: &OperatingPoint, level: usize, kerr_ghz: f64) -> Result<f64> {
    let kappa_a = op.jba.kappa_a();
    let delta_base_a = 2.0 * std::f64::consts::PI * op.readout_detuning_ghz;
    let pull = |n: f64| op.joint.pull_ghz(level, n);
    let (_, hi_eps2) = pulled_window_eps2(
        delta_base_a,
        kappa_a,
        2.0 * std::f64::consts::PI * kerr_ghz,
        &pull,
        (op.joint.ntab - 1) as f64,
    )?;
    Ok(epsilon_to_power_db(
        &op.jba,
        op.f_drive_ghz,
        hi_eps2.sqrt(),
        -77.0,
    ))
}

/// Calibrates the Kerr constant so the deterministic switching edge of the
/// given qubit level lands on `target_edge_db`, by bisection on the Kerr
/// magnitude. Returns the (negative) Kerr constant in GHz per photon. The
/// search covers 0.15 to 5 MHz per photon; weaker Kerr would push the
/// bistable branch beyond the tabulated photon range.
pub fn calibrate_kerr(op: &OperatingPoint, level: usize, target_edge_db: f64) -> Result<f64> {
    let (mut k_lo, mut k_hi) = (1.5e-4f64, 5e-3f64);
    // Edge power falls as the Kerr magnitude grows (fewer photons needed).
    let f_lo = edge_db(op, level, -k_lo)? - target_edge_db;
    let f_hi = edge_db(op, level, -k_hi)? - target_edge_db;
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::OutOfRange(format!(
            "target edge {target_edge_db} dB outside the reachable range [{:.2}, {:.2}] dB",
            target_edge_db + f_hi,
            target_edge_db + f_lo
        )));
    }
    for _ in 0..60 {
        let mid = (k_lo * k_hi).sqrt();
        if edge_db(op, level, -mid)? - target_edge_db > 0.0 {
            k_lo = mid;
        } else {
            k_hi = mid;
        }
    }
    Ok(-(k_lo * k_hi).sqrt())
}
