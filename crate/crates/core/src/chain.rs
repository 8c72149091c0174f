//! Qubit state preparation, control-pulse errors, downward relaxation jumps,
//! and the amplifier/homodyne detection chain.
//!
//! Relaxation is a cascade of downward jumps (2 -> 1 -> 0) with fixed rates;
//! exactly two exponential waiting times are drawn per free-evolution segment
//! regardless of the occupied level, so trajectories with different prepared
//! states share random numbers shot for shot.

use crate::error::{Error, Result};
use crate::pulse::{ControlPulse, Transition};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainParams {
    /// Cryogenic amplifier gain, dB.
    pub cryo_gain_db: f64,
    /// Room-temperature amplification, dB.
    pub room_gain_db: f64,
    /// System noise temperature referred to the sample output, K.
    pub noise_temp_k: f64,
    /// Low-pass cutoff of the demodulated quadratures, MHz.
    pub filter_cutoff_mhz: f64,
    /// Probability of finding the qubit excited before any pulse.
    pub prep_error_p1: f64,
    /// Probability that a shelving pulse on 1-2 excites 0 -> 1 off-resonantly.
    pub shelving_leak_p1: f64,
    /// Infidelity of a calibrated pi rotation.
    pub pulse_error: f64,
}

impl Default for ChainParams {
    fn default() -> Self {
        ChainParams {
            cryo_gain_db: 38.0,
            room_gain_db: 56.0 + 20.0,
            noise_temp_k: 3.0,
            filter_cutoff_mhz: 10.0,
            prep_error_p1: 0.01,
            shelving_leak_p1: 0.01,
            pulse_error: 0.01,
        }
    }
}

impl ChainParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("prep_error_p1", self.prep_error_p1),
            ("shelving_leak_p1", self.shelving_leak_p1),
            ("pulse_error", self.pulse_error),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {p} outside [0, 1]"
                )));
            }
        }
        if !(self.noise_temp_k > 0.0) || !(self.filter_cutoff_mhz > 0.0) {
            return Err(Error::InvalidParameter(
                "noise_temp and filter_cutoff must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Total amplitude gain (linear) from sample to digitizer.
    pub fn amplitude_gain(&self) -> f64 {
        10f64.powf((self.cryo_gain_db + self.room_gain_db) / 20.0)
    }

    /// Added noise occupancy referred to the sample output, photons/(s Hz).
    pub fn noise_occupancy(&self, f_ghz: f64) -> f64 {
        self.noise_temp_k / (crate::jba::KELVIN_PER_GHZ * f_ghz)
    }

    /// One-pole low-pass coefficient for a grid step dt.
    pub fn filter_coeff(&self, dt_ns: f64) -> f64 {
        1.0 - (-2.0 * std::f64::consts::PI * self.filter_cutoff_mhz * 1e-3 * dt_ns).exp()
    }

    /// Input-referred noise variance per quadrature per sample.
    pub fn noise_var_per_sample(&self, f_ghz: f64, dt_ns: f64) -> f64 {
        self.noise_occupancy(f_ghz) / (2.0 * dt_ns)
    }
}

/// Downward relaxation rates at an operating point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayRates {
    pub t1_10_ns: f64,
    pub t1_21_ns: f64,
}

/// Thermal-equilibrium level before any pulses. Draws one uniform always.
pub fn sample_initial_level(p: &ChainParams, rng: &mut ChaCha8Rng) -> u8 {
    let u: f64 = rng.random();
    if u < p.prep_error_p1 {
        1
    } else {
        0
    }
}

/// Applies a control pulse to a definite level, with pulse infidelity and
/// off-resonant shelving leakage. Draws exactly two uniforms always.
pub fn apply_rotation(
    level: u8,
    pulse: &ControlPulse,
    p: &ChainParams,
    rng: &mut ChaCha8Rng,
) -> u8 {
    let u_swap: f64 = rng.random();
    let u_leak: f64 = rng.random();
    let p_swap = (pulse.angle_rad / 2.0).sin().powi(2) * (1.0 - p.pulse_error);
    match (pulse.transition, level) {
        (Transition::Q01, 0) if u_swap < p_swap => 1,
        (Transition::Q01, 1) if u_swap < p_swap => 0,
        (Transition::Q12, 1) if u_swap < p_swap => 2,
        (Transition::Q12, 2) if u_swap < p_swap => 1,
        (Transition::Q12, 0) if u_leak < p.shelving_leak_p1 => 1,
        _ => level,
    }
}

/// Piecewise-constant qubit level versus absolute time, with downward jumps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QubitJumpTrace {
    /// (start time ns, level) segments, sorted by time.
    pub segments: Vec<(f64, u8)>,
}

impl QubitJumpTrace {
    pub fn level_at(&self, t_ns: f64) -> u8 {
        match self
            .segments
            .partition_point(|&(t0, _)| t0 <= t_ns)
        {
            0 => self.segments.first().map(|s| s.1).unwrap_or(0),
            k => self.segments[k - 1].1,
        }
    }

    /// Downward jumps as (time, from, to).
    pub fn jumps(&self) -> Vec<(f64, u8, u8)> {
        self.segments
            .windows(2)
            .filter(|w| w[1].1 < w[0].1)
            .map(|w| (w[1].0, w[0].1, w[1].1))
            .collect()
    }

    pub fn final_level(&self) -> u8 {
        self.segments.last().map(|s| s.1).unwrap_or(0)
    }
}

/// Samples the full level timeline of one shot: initial thermal level, then
/// alternating free-decay segments and instantaneous rotations at the given
/// absolute times. `rotations` must be sorted by time within [t_start, t_end].
pub fn sample_trace(
    p: &ChainParams,
    rates: &DecayRates,
    rotations: &[(f64, ControlPulse)],
    t_start_ns: f64,
    t_end_ns: f64,
    rng_prep: &mut ChaCha8Rng,
    rng_jumps: &mut ChaCha8Rng,
) -> QubitJumpTrace {
    let mut segments = Vec::new();
    let mut level = sample_initial_level(p, rng_prep);
    let mut t = t_start_ns;
    segments.push((t, level));

    let mut decay_until = |seg: &mut Vec<(f64, u8)>, lvl: u8, a: f64, b: f64| -> u8 {
        let u21: f64 = rng_jumps.random();
        let u10: f64 = rng_jumps.random();
        let mut lvl = lvl;
        let mut t_now = a;
        if lvl == 2 {
            let dt21 = -u21.ln() * rates.t1_21_ns;
            if t_now + dt21 < b {
                t_now += dt21;
                lvl = 1;
                seg.push((t_now, lvl));
            } else {
                return lvl;
            }
        }
        if lvl == 1 {
            let dt10 = -u10.ln() * rates.t1_10_ns;
            if t_now + dt10 < b {
                lvl = 0;
                seg.push((t_now + dt10, lvl));
            }
        }
        lvl
    };

    for (t_rot, pulse) in rotations {
        level = decay_until(&mut segments, level, t, *t_rot);
        let new_level = apply_rotation(level, pulse, p, rng_prep);
        if new_level != level {
            segments.push((*t_rot, new_level));
            level = new_level;
        }
        t = *t_rot;
    }
    level = decay_until(&mut segments, level, t, t_end_ns);
    let _ = level;
    QubitJumpTrace { segments }
}

/// Demodulated homodyne quadratures at the digitizer, mV-scale arbitrary
/// units proportional to the gained output field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomodyneRecord {
    pub dt_ns: f64,
    pub times_ns: Vec<f64>,
    /// Filtered in-phase quadrature along the discrimination axis.
    pub i_filt: Vec<f64>,
    /// Filtered orthogonal quadrature.
    pub q_filt: Vec<f64>,
}

/// Synthesizes the full noisy filtered record from the output-field samples
/// (i, q) along the locked local-oscillator axis, input-referred units.
/// Requires the grid rate to exceed twice the filter cutoff.
pub fn synthesize_homodyne(
    p: &ChainParams,
    f_ghz: f64,
    dt_ns: f64,
    t0_ns: f64,
    iq_in: &[(f64, f64)],
    rng: &mut ChaCha8Rng,
) -> Result<HomodyneRecord> {
    let rate_ghz = 1.0 / dt_ns;
    if rate_ghz <= 2.0 * p.filter_cutoff_mhz * 1e-3 {
        return Err(Error::InvalidParameter(format!(
            "sample rate {rate_ghz} GHz must exceed twice the filter cutoff"
        )));
    }
    let gain = p.amplitude_gain();
    let sigma = p.noise_var_per_sample(f_ghz, dt_ns).sqrt();
    let a = p.filter_coeff(dt_ns);
    let mut yi = 0.0f64;
    let mut yq = 0.0f64;
    let mut rec = HomodyneRecord {
        dt_ns,
        times_ns: Vec::with_capacity(iq_in.len()),
        i_filt: Vec::with_capacity(iq_in.len()),
        q_filt: Vec::with_capacity(iq_in.len()),
    };
    for (k, &(i_in, q_in)) in iq_in.iter().enumerate() {
        let ni: f64 = StandardNormal.sample(rng);
        let nq: f64 = StandardNormal.sample(rng);
        let xi = gain * (i_in + sigma * ni);
        let xq = gain * (q_in + sigma * nq);
        yi += a * (xi - yi);
        yq += a * (xq - yq);
        rec.times_ns.push(t0_ns + k as f64 * dt_ns);
        rec.i_filt.push(yi);
        rec.q_filt.push(yq);
    }
    Ok(rec)
}

/// Variance multiplier mapping per-sample noise variance to the variance of
/// the filtered signal averaged over window [start, end): sum of squared
/// linear weights of every input sample (including pre-window samples that
/// propagate through the filter state).
pub fn window_noise_weight_sq(a: f64, window_start: usize, window_end: usize) -> f64 {
    let w = (window_end - window_start) as f64;
    let r = 1.0 - a;
    let mut sum = 0.0;
    // Weight of input sample j on the window mean:
    //   w_j = ((1-a)^max(start-j,0) - (1-a)^(end-j)) / |W|  (for j < end).
    // Pre-window contributions decay geometrically; truncate at 60 time
    // constants below 1e-12 relative weight.
    let tail = (1e-12f64.ln() / r.ln()).ceil() as usize;
    let j_min = window_start.saturating_sub(tail);
    for j in j_min..window_end {
        let lead = window_start.saturating_sub(j) as f64;
        let wj = (r.powf(lead) - r.powf((window_end - j) as f64)) / w;
        sum += wj * wj;
    }
    sum
}

/// Mean of the one-pole-filtered signal over [start, end), running the filter
/// from zero state at sample 0.
pub fn filtered_window_mean(a: f64, x: &[f64], window_start: usize, window_end: usize) -> f64 {
    let mut y = 0.0f64;
    let mut acc = 0.0f64;
    for (k, &v) in x.iter().enumerate().take(window_end) {
        y += a * (v - y);
        if k >= window_start {
            acc += y;
        }
    }
    acc / (window_end - window_start) as f64
}
