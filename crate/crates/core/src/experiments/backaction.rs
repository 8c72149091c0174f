//! Measurement back-action: two successive readouts after a variable-length
//! coherent drive. The first-readout oscillation amplitude gives the mapping
//! fidelity; the second readout's reduced amplitude measures how much
//! population the first measurement destroys; a control run with the first
//! drive dark separates drive-induced back-action from plain relaxation.

use super::fit::{fit_damped_cosine_fixed_tau, OscillationFit};
use super::rabi::driven_excited_probability;
use super::ReadoutSettings;
use crate::error::{Error, Result};
use crate::pulse::Sequence;
use crate::readout::{run_ensemble, OperatingPoint, ReadoutContext};
use crate::seeding::{ensemble_seed, PURPOSE_BACKACTION};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackactionScan {
    pub delays_ns: Vec<f64>,
    /// Switching probability of the first readout.
    pub first: Vec<f64>,
    /// Switching probability of the second readout, first drive on.
    pub second: Vec<f64>,
    /// Second readout with the first drive dark (same random numbers).
    pub second_dark: Vec<f64>,
    pub first_err: Vec<f64>,
    pub second_err: Vec<f64>,
    pub second_dark_err: Vec<f64>,
    pub fit_first: OscillationFit,
    pub fit_second: OscillationFit,
    pub fit_second_dark: OscillationFit,
    pub warnings: Vec<String>,
}

impl BackactionScan {
    /// Second-to-first oscillation amplitude ratio.
    pub fn amplitude_ratio(&self) -> f64 {
        self.fit_second.peak_to_peak / self.fit_first.peak_to_peak
    }

    /// Distance between the driven and dark second-readout amplitudes in
    /// units of the dark fit uncertainty.
    pub fn dark_consistency_sigma(&self) -> f64 {
        (self.fit_second.peak_to_peak - self.fit_second_dark.peak_to_peak)
            / self.fit_second_dark.peak_to_peak_err.max(1e-9)
    }
}

/// Runs the back-action protocol: coherent drive of duration `delay`
/// (applied as the analytic excited-state probability), then two readouts
/// separated by `gap_ns` of free ring-down.
pub fn run_backaction(
    op: &OperatingPoint,
    settings: &ReadoutSettings,
    gap_ns: f64,
    omega_ghz: f64,
    delays_ns: &[f64],
    shots: usize,
    master_seed: u64,
) -> Result<BackactionScan> {
    if delays_ns.len() < 5 {
        return Err(Error::InvalidParameter(
            "need at least five drive durations".into(),
        ));
    }
    if !(gap_ns >= 0.0) {
        return Err(Error::InvalidParameter("gap must be >= 0".into()));
    }
    let env = settings.envelope()?;
    let t_second = env.duration_ns() + gap_ns;
    let seq = Sequence::new()
        .readout("readout1", 0.0, env)
        .readout("readout2", t_second, env);
    let ctx = ReadoutContext::build(op, &seq, settings.power_db, 0.0)?;
    let ctx_dark = ReadoutContext::build_with_dark(op, &seq, settings.power_db, 0.0, &[0])?;

    let n = delays_ns.len();
    let (mut first, mut second, mut second_dark) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut first_err, mut second_err, mut second_dark_err) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut warnings = Vec::new();
    for (di, &dt) in delays_ns.iter().enumerate() {
        let mut op_d = op.clone();
        op_d.chain.prep_error_p1 = driven_excited_probability(omega_ghz, op.gamma_r_per_ns, dt);
        let seed = ensemble_seed(master_seed, di as u64, PURPOSE_BACKACTION);
        let res = run_ensemble(&op_d, &ctx, shots, seed)?;
        let res_dark = run_ensemble(&op_d, &ctx_dark, shots, seed)?;
        first.push(res.p_b[0]);
        second.push(res.p_b[1]);
        second_dark.push(res_dark.p_b[1]);
        first_err.push(res.p_b_err[0]);
        second_err.push(res.p_b_err[1]);
        second_dark_err.push(res_dark.p_b_err[1]);
        for w in res.warnings.into_iter().chain(res_dark.warnings) {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
    }
    let tau = 1.0 / op.gamma_r_per_ns;
    let fit_first = fit_damped_cosine_fixed_tau(delays_ns, &first, omega_ghz, tau)?;
    let fit_second = fit_damped_cosine_fixed_tau(delays_ns, &second, omega_ghz, tau)?;
    let fit_second_dark = fit_damped_cosine_fixed_tau(delays_ns, &second_dark, omega_ghz, tau)?;
    Ok(BackactionScan {
        delays_ns: delays_ns.to_vec(),
        first,
        second,
        second_dark,
        first_err,
        second_err,
        second_dark_err,
        fit_first,
        fit_second,
        fit_second_dark,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ChainParams;
    use crate::dispersive::CouplingParams;
    use crate::jba::JbaParams;
    use crate::readout::DEFAULT_SDE_DT_NS;
    use crate::transmon::TransmonParams;

    #[test]
    fn second_readout_oscillates_weaker_and_dark_run_agrees() {
        let op = OperatingPoint::build(
            &TransmonParams::default(),
            &CouplingParams::default(),
            &JbaParams::default(),
            &ChainParams::default(),
            0.25,
            25.0,
            DEFAULT_SDE_DT_NS,
        )
        .unwrap();
        let delays: Vec<f64> = (0..11).map(|i| 12.0 * i as f64).collect();
        let scan = run_backaction(
            &op,
            &ReadoutSettings::fast_repeat(-30.5),
            120.0,
            0.029,
            &delays,
            80,
            5,
        )
        .unwrap();
        let r1 = scan.fit_first.peak_to_peak;
        let r2 = scan.fit_second.peak_to_peak;
        assert!(r1 > 0.6 && r1 <= 1.05, "R1 = {r1}");
        let ratio = scan.amplitude_ratio();
        assert!(ratio > 0.25 && ratio < 0.8, "R2/R1 = {ratio}");
        // Dark-drive control differs from the driven second readout by at
        // most the classification noise at this shot count.
        assert!(
            (r2 - scan.fit_second_dark.peak_to_peak).abs() < 0.15,
            "R2 = {r2}, dark = {}",
            scan.fit_second_dark.peak_to_peak
        );
    }
}
