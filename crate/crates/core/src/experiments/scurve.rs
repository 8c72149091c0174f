//! Switching-probability curves versus drive power for prepared qubit states,
//! and the analysis built on them: matching excited-state curves to
//! frequency-shifted ground-state references, decomposing them into a
//! survived/decayed mixture, and locating the best readout contrast.

use super::{prep_sequence, ReadoutSettings};
use crate::error::{Error, Result};
use crate::readout::{run_ensemble, OperatingPoint, ReadoutContext};
use crate::seeding::{ensemble_seed, PURPOSE_SCURVE};
use serde::{Deserialize, Serialize};

/// Latching probability versus drive power for one prepared state at one
/// drive-frequency offset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwitchingCurve {
    pub state: u8,
    pub df_mhz: f64,
    pub powers_db: Vec<f64>,
    pub p_b: Vec<f64>,
    pub p_b_err: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Measures one switching curve. The drive level comes from `powers_db`
/// (`settings.power_db` is ignored); `df_mhz` offsets the drive frequency.
/// Ensembles at the same power index share random numbers across states and
/// offsets, so curve differences are low-noise.
pub fn switching_curve(
    op: &OperatingPoint,
    settings: &ReadoutSettings,
    state: u8,
    powers_db: &[f64],
    df_mhz: f64,
    shots: usize,
    master_seed: u64,
) -> Result<SwitchingCurve> {
    if powers_db.is_empty() {
        return Err(Error::InvalidParameter("empty power grid".into()));
    }
    let env = settings.envelope()?;
    let seq = prep_sequence(state, env)?;
    let mut p_b = Vec::with_capacity(powers_db.len());
    let mut p_b_err = Vec::with_capacity(powers_db.len());
    let mut warnings = Vec::new();
    for (pi, &p) in powers_db.iter().enumerate() {
        let ctx = ReadoutContext::build(op, &seq, p, df_mhz)?;
        let res = run_ensemble(op, &ctx, shots, ensemble_seed(master_seed, pi as u64, PURPOSE_SCURVE))?;
        p_b.push(res.p_b[0]);
        p_b_err.push(res.p_b_err[0]);
        for w in res.warnings {
            let w = format!("{p:.2} dB: {w}");
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    Ok(SwitchingCurve {
        state,
        df_mhz,
        powers_db: powers_db.to_vec(),
        p_b,
        p_b_err,
        warnings,
    })
}

/// Best separation between two curves on a shared power grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Contrast {
    pub index: usize,
    pub power_db: f64,
    /// max over powers of p_B(excited) - p_B(ground).
    pub contrast: f64,
}

fn check_same_grid(a: &SwitchingCurve, b: &SwitchingCurve) -> Result<()> {
    if a.powers_db.len() != b.powers_db.len()
        || a.powers_db
            .iter()
            .zip(&b.powers_db)
            .any(|(x, y)| (x - y).abs() > 1e-9)
    {
        return Err(Error::InvalidParameter(
            "switching curves use different power grids".into(),
        ));
    }
    Ok(())
}

pub fn best_contrast(ground: &SwitchingCurve, excited: &SwitchingCurve) -> Result<Contrast> {
    check_same_grid(ground, excited)?;
    let (mut best, mut idx) = (f64::NEG_INFINITY, 0);
    for (i, (e, g)) in excited.p_b.iter().zip(&ground.p_b).enumerate() {
        if e - g > best {
            best = e - g;
            idx = i;
        }
    }
    Ok(Contrast {
        index: idx,
        power_db: ground.powers_db[idx],
        contrast: best,
    })
}

/// Finds the drive-frequency offset whose ground-state reference curve best
/// matches `target` over its rising edge (least squares on points with
/// p_B in [0.02, 0.30], widened to [0.01, 0.40] if fewer than three qualify),
/// refined parabolically between grid offsets.
pub fn match_shift(family: &[SwitchingCurve], target: &SwitchingCurve) -> Result<f64> {
    if family.len() < 3 {
        return Err(Error::InvalidParameter(
            "need at least three reference curves to match a shift".into(),
        ));
    }
    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by(|&a, &b| family[a].df_mhz.total_cmp(&family[b].df_mhz));
    for &i in &order {
        check_same_grid(&family[i], target)?;
    }
    let mut mask = Vec::new();
    for (lo, hi) in [(0.02, 0.30), (0.01, 0.40), (0.005, 0.60)] {
        mask = (0..target.p_b.len())
            .filter(|&i| target.p_b[i] >= lo && target.p_b[i] <= hi)
            .collect();
        if mask.len() >= 3 {
            break;
        }
    }
    if mask.len() < 3 {
        return Err(Error::Fit(
            "fewer than three points on the rising edge of the target curve".into(),
        ));
    }
    let ds: Vec<f64> = order
        .iter()
        .map(|&j| {
            mask.iter()
                .map(|&i| (family[j].p_b[i] - target.p_b[i]).powi(2))
                .sum()
        })
        .collect();
    let imin = ds
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    let df_at = |k: usize| family[order[k]].df_mhz;
    let mut out = df_at(imin);
    if imin > 0 && imin + 1 < ds.len() {
        let (a, b, c) = (ds[imin - 1], ds[imin], ds[imin + 1]);
        let curv = a - 2.0 * b + c;
        if curv > 0.0 {
            let h = 0.5 * (df_at(imin + 1) - df_at(imin - 1));
            let off = (0.5 * (a - c) / curv).clamp(-1.0, 1.0);
            out += off * h;
        }
    }
    Ok(out)
}

/// Weight w minimizing || target - (w * shifted + (1 - w) * ground) ||^2,
/// clamped to [0, 1]: the fraction of shots that keep the excited-state
/// response until they latch. Only the powers between the two switching
/// edges enter the fit - shifted reference nearly saturated, ground
/// reference still dark. Below that window both curves are mid-edge and the
/// mixture is shape-degenerate; above it a relaxed shot latches anyway and
/// carries no survival information.
pub fn decompose_survival(
    ground: &SwitchingCurve,
    shifted: &SwitchingCurve,
    target: &SwitchingCurve,
) -> Result<f64> {
    check_same_grid(ground, shifted)?;
    check_same_grid(ground, target)?;
    let mask: Vec<usize> = (0..ground.p_b.len())
        .filter(|&i| ground.p_b[i] <= 0.1 && shifted.p_b[i] >= 0.85)
        .collect();
    if mask.len() < 2 {
        return Err(Error::Conditioning(
            "no power window between the excited and ground switching edges".into(),
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in &mask {
        let d = shifted.p_b[i] - ground.p_b[i];
        num += (target.p_b[i] - ground.p_b[i]) * d;
        den += d * d;
    }
    if den < 1e-9 {
        return Err(Error::Conditioning(
            "reference curves are too close to separate survival weight".into(),
        ));
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Converts a survival weight into an effective mapping time through the
/// relaxation rate: t = -T1 ln(w).
pub fn mapping_time_ns(w_survival: f64, t1_ns: f64) -> f64 {
    -t1_ns * w_survival.max(1e-9).ln()
}
