//! Measurement experiments built on single-shot readout: switching curves,
//! Rabi and coherence scans, measurement back-action, photon calibration,
//! and the coherence-versus-contrast trade-off.

pub mod backaction;
pub mod coherence;
pub mod fit;
pub mod rabi;
pub mod scurve;
pub mod stark;
pub mod tradeoff;

use crate::error::{Error, Result};
use crate::pulse::{pi_pulse, readout_pulse, Envelope, Sequence, Transition};
use crate::pulse::PI_PULSE_DURATION_NS;
use crate::readout::OperatingPoint;
use serde::{Deserialize, Serialize};

/// Readout envelope timings and drive level for an experiment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReadoutSettings {
    pub t_rise_ns: f64,
    pub t_switch_ns: f64,
    pub t_hold_ns: f64,
    pub hold_fraction: f64,
    pub power_db: f64,
}

impl ReadoutSettings {
    pub fn envelope(&self) -> Result<Envelope> {
        readout_pulse(
            self.t_rise_ns,
            self.t_switch_ns,
            self.t_hold_ns,
            self.hold_fraction,
        )
    }

    /// Long-hold settings used for the switching-curve figures.
    pub fn long_hold(power_db: f64) -> Self {
        ReadoutSettings {
            t_rise_ns: 15.0,
            t_switch_ns: 250.0,
            t_hold_ns: 700.0,
            hold_fraction: 0.8,
            power_db,
        }
    }

    /// Short repeated-readout settings used for back-action measurements.
    pub fn fast_repeat(power_db: f64) -> Self {
        ReadoutSettings {
            t_rise_ns: 10.0,
            t_switch_ns: 40.0,
            t_hold_ns: 50.0,
            hold_fraction: 0.8,
            power_db,
        }
    }
}

/// Sequence preparing level 0, 1, or 2 and reading out at t = 0.
/// Pi pulses end back to back: for level 2 the 0-1 pulse ends one pulse
/// length before the shelving pulse, which ends at the readout start.
pub fn prep_sequence(state: u8, env: Envelope) -> Result<Sequence> {
    let w = PI_PULSE_DURATION_NS;
    let seq = match state {
        0 => Sequence::new(),
        1 => Sequence::new().control("pi01", -w, pi_pulse(Transition::Q01)),
        2 => Sequence::new()
            .control("pi01", -2.0 * w, pi_pulse(Transition::Q01))
            .control("pi12", -w, pi_pulse(Transition::Q12)),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "prepared state {state} not in 0..=2"
            )))
        }
    };
    Ok(seq.readout("readout", 0.0, env))
}

/// Wilson score interval for a binomial proportion (95%).
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Default power grid bracketing the ground-state upper bistable edge:
/// 5.3 dB below to 0.7 dB above, 0.25 dB steps.
pub fn default_power_grid(op: &OperatingPoint) -> Result<Vec<f64>> {
    let kappa_a = op.jba.kappa_a();
    let kerr_a = op.jba.kerr_a();
    let delta_base_a = 2.0 * std::f64::consts::PI * op.readout_detuning_ghz;
    let pull0 = |n: f64| op.joint.pull_ghz(0, n);
    let (_, hi_eps2) = crate::jba::pulled_window_eps2(
        delta_base_a,
        kappa_a,
        kerr_a,
        &pull0,
        (op.joint.ntab - 1) as f64,
    )?;
    let p_hi = crate::jba::epsilon_to_power_db(&op.jba, op.f_drive_ghz, hi_eps2.sqrt(), -77.0);
    let mut grid = Vec::new();
    let mut p = p_hi - 5.3;
    while p <= p_hi + 0.7 + 1e-9 {
        grid.push(p);
        p += 0.25;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_the_point_estimate() {
        let (lo, hi) = wilson_interval(850, 1000);
        assert!(lo < 0.85 && 0.85 < hi);
        assert!(hi - lo < 0.05);
        let (lo0, hi0) = wilson_interval(0, 500);
        assert!(lo0.abs() < 1e-12);
        assert!(hi0 > 0.0 && hi0 < 0.02);
    }

    #[test]
    fn prep_sequences_time_out_back_to_back() {
        let env = ReadoutSettings::long_hold(-35.0).envelope().unwrap();
        let s2 = prep_sequence(2, env).unwrap();
        assert_eq!(s2.events.len(), 3);
        assert_eq!(s2.events[0].t_end_ns(), -20.0);
        assert_eq!(s2.events[1].t_end_ns(), 0.0);
        assert!(prep_sequence(3, env).is_err());
    }
}
