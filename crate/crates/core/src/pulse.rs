//! Pulse envelopes, qubit control pulses, and sequence compilation onto a
//! uniform time grid.
//!
//! A readout envelope rises over t_rise to the switching amplitude, holds it
//! for t_switch, drops instantaneously to hold_fraction of the amplitude, and
//! holds that for t_hold. Control pulses are booked by rotation angle
//! (area = integral of the Rabi rate) and applied as instantaneous rotations
//! at their end time when a shot is simulated.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default duration of a calibrated pi pulse, ns.
pub const PI_PULSE_DURATION_NS: f64 = 20.0;
/// Rabi rate of the calibrated pi pulses, MHz (pi over 20 ns).
pub const PI_PULSE_RABI_MHZ: f64 = 25.0;
/// Default continuous-drive Rabi rate for coherence experiments, MHz.
pub const DEFAULT_RABI_MHZ: f64 = 29.0;
/// Default compilation step, ns.
pub const DEFAULT_COMPILE_DT_NS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    /// Ground to first excited level.
    Q01,
    /// First to second excited level (shelving).
    Q12,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Square,
    Gaussian,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ControlPulse {
    pub transition: Transition,
    /// Rotation angle in (0, 2 pi], radians.
    pub angle_rad: f64,
    pub duration_ns: f64,
    pub shape: Shape,
    /// Carrier frequency, GHz; None means resonant with the transition.
    pub frequency_ghz: Option<f64>,
}

impl ControlPulse {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_rad > 0.0 && self.angle_rad <= 2.0 * std::f64::consts::PI) {
            return Err(Error::InvalidParameter(format!(
                "rotation angle {} rad outside (0, 2 pi]",
                self.angle_rad
            )));
        }
        if !(self.duration_ns > 0.0) {
            return Err(Error::InvalidParameter("pulse duration must be > 0".into()));
        }
        Ok(())
    }

    /// Peak Rabi rate in GHz that realizes the angle over the duration
    /// (angle = 2 pi * integral of Omega(t) dt).
    pub fn peak_rabi_ghz(&self) -> f64 {
        let area_factor = match self.shape {
            Shape::Square => 1.0,
            // Truncated Gaussian, sigma = duration/4: effective area fraction
            // of a square pulse with the same peak.
            Shape::Gaussian => {
                let s = 0.25f64;
                (2.0 * std::f64::consts::PI).sqrt() * s * erf_approx(0.5 / (s * 2f64.sqrt()))
            }
        };
        self.angle_rad / (2.0 * std::f64::consts::PI * self.duration_ns * area_factor)
    }
}

fn erf_approx(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26, |error| < 1.5e-7.
    let t = 1.0 / (1.0 + 0.3275911 * x.abs());
    let y = 1.0
        - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t
            + 0.254829592)
            * t
            * (-x * x).exp();
    y.copysign(x)
}

/// Pi pulse on a transition: 20 ns at a 25 MHz Rabi rate.
pub fn pi_pulse(transition: Transition) -> ControlPulse {
    ControlPulse {
        transition,
        angle_rad: std::f64::consts::PI,
        duration_ns: PI_PULSE_DURATION_NS,
        shape: Shape::Square,
        frequency_ghz: None,
    }
}

/// Continuous Rabi drive of a given duration at `omega_mhz`; the rotation
/// angle wraps into (0, 2 pi]. Zero duration produces no pulse.
pub fn rabi_pulse(duration_ns: f64, omega_mhz: f64) -> Option<ControlPulse> {
    if duration_ns <= 0.0 {
        return None;
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut angle = (two_pi * omega_mhz * 1e-3 * duration_ns) % two_pi;
    if angle <= 0.0 {
        angle = two_pi;
    }
    Some(ControlPulse {
        transition: Transition::Q01,
        angle_rad: angle,
        duration_ns,
        shape: Shape::Square,
        frequency_ghz: None,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Envelope {
    pub t_rise_ns: f64,
    pub t_switch_ns: f64,
    pub t_hold_ns: f64,
    /// Amplitude ratio of the hold plateau to the switching plateau, in (0, 1].
    pub hold_fraction: f64,
}

impl Envelope {
    pub fn validate(&self) -> Result<()> {
        if self.t_rise_ns < 0.0 || self.t_switch_ns <= 0.0 || self.t_hold_ns < 0.0 {
            return Err(Error::InvalidParameter(
                "envelope durations must be nonnegative with t_switch > 0".into(),
            ));
        }
        if !(self.hold_fraction > 0.0 && self.hold_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "hold_fraction {} outside (0, 1]",
                self.hold_fraction
            )));
        }
        Ok(())
    }

    pub fn duration_ns(&self) -> f64 {
        self.t_rise_ns + self.t_switch_ns + self.t_hold_ns
    }

    /// Piecewise segments (duration, start amplitude, end amplitude),
    /// relative to the switching plateau.
    pub fn segments(&self) -> Vec<(f64, f64, f64)> {
        let mut segs = Vec::new();
        if self.t_rise_ns > 0.0 {
            segs.push((self.t_rise_ns, 0.0, 1.0));
        }
        segs.push((self.t_switch_ns, 1.0, 1.0));
        if self.t_hold_ns > 0.0 {
            segs.push((self.t_hold_ns, self.hold_fraction, self.hold_fraction));
        }
        segs
    }

    /// Relative amplitude at time t from the envelope start.
    pub fn amplitude_rel(&self, t_ns: f64) -> f64 {
        if t_ns < 0.0 || t_ns >= self.duration_ns() {
            return 0.0;
        }
        if t_ns < self.t_rise_ns {
            return t_ns / self.t_rise_ns;
        }
        if t_ns < self.t_rise_ns + self.t_switch_ns {
            return 1.0;
        }
        self.hold_fraction
    }

    /// Shortest nonzero feature, for grid-resolution checks.
    fn shortest_feature_ns(&self) -> f64 {
        let mut s = self.t_switch_ns;
        if self.t_rise_ns > 0.0 {
            s = s.min(self.t_rise_ns);
        }
        if self.t_hold_ns > 0.0 {
            s = s.min(self.t_hold_ns);
        }
        s
    }
}

/// Standard readout envelope: linear rise, switching plateau, instantaneous
/// drop to the hold plateau.
pub fn readout_pulse(
    t_rise_ns: f64,
    t_switch_ns: f64,
    t_hold_ns: f64,
    hold_fraction: f64,
) -> Result<Envelope> {
    let e = Envelope {
        t_rise_ns,
        t_switch_ns,
        t_hold_ns,
        hold_fraction,
    };
    e.validate()?;
    Ok(e)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum EventKind {
    Control(ControlPulse),
    Readout(Envelope),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Event {
    pub label: String,
    pub t_start_ns: f64,
    pub kind: EventKind,
}

impl Event {
    pub fn duration_ns(&self) -> f64 {
        match &self.kind {
            EventKind::Control(c) => c.duration_ns,
            EventKind::Readout(e) => e.duration_ns(),
        }
    }

    pub fn t_end_ns(&self) -> f64 {
        self.t_start_ns + self.duration_ns()
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Sequence {
    pub events: Vec<Event>,
}

impl Sequence {
    pub fn new() -> Self {
        Sequence { events: Vec::new() }
    }

    pub fn control(mut self, label: &str, t_start_ns: f64, pulse: ControlPulse) -> Self {
        self.events.push(Event {
            label: label.into(),
            t_start_ns,
            kind: EventKind::Control(pulse),
        });
        self
    }

    pub fn readout(mut self, label: &str, t_start_ns: f64, envelope: Envelope) -> Self {
        self.events.push(Event {
            label: label.into(),
            t_start_ns,
            kind: EventKind::Readout(envelope),
        });
        self
    }

    pub fn t_start_ns(&self) -> f64 {
        self.events
            .iter()
            .map(|e| e.t_start_ns)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_duration_ns(&self) -> f64 {
        if self.events.is_empty() {
            return 0.0;
        }
        let end = self.events.iter().map(Event::t_end_ns).fold(f64::MIN, f64::max);
        end - self.t_start_ns()
    }
}

/// One readout window on the compiled grid (step indices).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReadoutWindow {
    pub start: usize,
    /// First step of the hold plateau.
    pub hold_start: usize,
    /// One past the last step of the envelope.
    pub end: usize,
}

/// A rotation to apply instantaneously at a grid step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CompiledRotation {
    pub step: usize,
    pub pulse: ControlPulse,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompiledSequence {
    pub dt_ns: f64,
    /// Absolute time of grid step 0.
    pub t0_ns: f64,
    /// Readout drive amplitude per step, relative to the switching plateau.
    pub readout_rel: Vec<f64>,
    pub rotations: Vec<CompiledRotation>,
    pub windows: Vec<ReadoutWindow>,
    pub warnings: Vec<String>,
}

impl CompiledSequence {
    pub fn n_steps(&self) -> usize {
        self.readout_rel.len()
    }
}

/// Compiles a sequence onto a uniform grid of step dt. Fails if any two
/// events overlap in time or if dt cannot resolve the shortest pulse feature
/// (dt must be at most a quarter of it). An empty sequence compiles to a
/// zero-length grid.
pub fn compile(seq: &Sequence, dt_ns: f64) -> Result<CompiledSequence> {
    if !(dt_ns > 0.0) {
        return Err(Error::InvalidParameter("dt must be > 0".into()));
    }
    if seq.events.is_empty() {
        return Ok(CompiledSequence {
            dt_ns,
            t0_ns: 0.0,
            readout_rel: Vec::new(),
            rotations: Vec::new(),
            windows: Vec::new(),
            warnings: Vec::new(),
        });
    }
    for e in &seq.events {
        match &e.kind {
            EventKind::Control(c) => c.validate()?,
            EventKind::Readout(env) => env.validate()?,
        }
    }

    // Overlap check over all pairs, naming both offenders.
    let mut sorted: Vec<&Event> = seq.events.iter().collect();
    sorted.sort_by(|a, b| a.t_start_ns.partial_cmp(&b.t_start_ns).unwrap());
    for w in sorted.windows(2) {
        let eps = 1e-9;
        if w[1].t_start_ns < w[0].t_end_ns() - eps {
            return Err(Error::Overlap(format!(
                "events '{}' and '{}' overlap ({:.3}..{:.3} vs {:.3}..{:.3} ns)",
                w[0].label,
                w[1].label,
                w[0].t_start_ns,
                w[0].t_end_ns(),
                w[1].t_start_ns,
                w[1].t_end_ns(),
            )));
        }
    }

    // Grid resolution: dt at most a quarter of the shortest feature.
    let mut shortest = f64::INFINITY;
    for e in &seq.events {
        shortest = shortest.min(match &e.kind {
            EventKind::Control(c) => c.duration_ns,
            EventKind::Readout(env) => env.shortest_feature_ns(),
        });
    }
    if dt_ns > shortest / 4.0 {
        return Err(Error::Resolution(format!(
            "dt = {dt_ns} ns cannot resolve the shortest feature ({shortest} ns); need dt <= {}",
            shortest / 4.0
        )));
    }

    let t0 = seq.t_start_ns();
    let t_end = sorted.last().unwrap().t_end_ns();
    let n_steps = ((t_end - t0) / dt_ns).round().max(0.0) as usize;
    let step_of = |t: f64| (((t - t0) / dt_ns).round() as i64).clamp(0, n_steps as i64) as usize;

    let mut readout_rel = vec![0.0f64; n_steps];
    let mut rotations = Vec::new();
    let mut windows = Vec::new();
    let warnings = Vec::new();

    for e in &sorted {
        match &e.kind {
            EventKind::Control(c) => rotations.push(CompiledRotation {
                step: step_of(e.t_end_ns()),
                pulse: *c,
            }),
            EventKind::Readout(env) => {
                let start = step_of(e.t_start_ns);
                let hold_start = step_of(e.t_start_ns + env.t_rise_ns + env.t_switch_ns);
                let end = step_of(e.t_end_ns());
                for k in start..end {
                    let t_local = (k as f64 + 0.5) * dt_ns + t0 - e.t_start_ns;
                    readout_rel[k] = env.amplitude_rel(t_local);
                }
                windows.push(ReadoutWindow {
                    start,
                    hold_start,
                    end,
                });
            }
        }
    }
    rotations.sort_by_key(|r| r.step);

    Ok(CompiledSequence {
        dt_ns,
        t0_ns: t0,
        readout_rel,
        rotations,
        windows,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig_envelope() -> Envelope {
        readout_pulse(15.0, 250.0, 700.0, 0.8).unwrap()
    }

    #[test]
    fn pi_pulse_area_is_pi() {
        let p = pi_pulse(Transition::Q01);
        // Square: area = 2 pi * Omega * t = angle.
        let area = 2.0 * std::f64::consts::PI * p.peak_rabi_ghz() * p.duration_ns;
        assert!((area - std::f64::consts::PI).abs() < 1e-12);
        assert!((p.peak_rabi_ghz() - 0.025).abs() < 1e-12);
        // Gaussian keeps the same area with a higher peak.
        let g = ControlPulse {
            shape: Shape::Gaussian,
            ..p
        };
        assert!(g.peak_rabi_ghz() > p.peak_rabi_ghz());
    }

    #[test]
    fn rabi_pulse_angle_wraps() {
        assert!(rabi_pulse(0.0, 29.0).is_none());
        let p = rabi_pulse(10.0, 29.0).unwrap();
        assert!((p.angle_rad - 2.0 * std::f64::consts::PI * 0.029 * 10.0).abs() < 1e-12);
        // A full period has angle 2 pi (or epsilon past it), never 0.
        let period = 1e3 / 29.0;
        let q = rabi_pulse(period, 29.0).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        assert!(q.angle_rad.min(two_pi - q.angle_rad) < 1e-6);
        assert!(q.validate().is_ok());
    }

    #[test]
    fn envelope_shape_and_segments() {
        let e = fig_envelope();
        assert_eq!(e.duration_ns(), 965.0);
        assert!((e.amplitude_rel(7.5) - 0.5).abs() < 1e-12);
        assert_eq!(e.amplitude_rel(100.0), 1.0);
        assert_eq!(e.amplitude_rel(264.9999), 1.0);
        assert_eq!(e.amplitude_rel(265.0001), 0.8);
        assert_eq!(e.amplitude_rel(964.9), 0.8);
        assert_eq!(e.amplitude_rel(965.1), 0.0);
        let segs = e.segments();
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[0], (15.0, 0.0, 1.0));
        assert_eq!(segs[2], (700.0, 0.8, 0.8));
        assert!(readout_pulse(15.0, 250.0, 700.0, 0.0).is_err());
        assert!(readout_pulse(15.0, 0.0, 700.0, 0.8).is_err());
    }

    #[test]
    fn empty_sequence_compiles_to_zero_length() {
        let c = compile(&Sequence::new(), 0.5).unwrap();
        assert_eq!(c.n_steps(), 0);
        assert_eq!(c.windows.len(), 0);
    }

    #[test]
    fn overlap_error_names_both_events() {
        let seq = Sequence::new()
            .control("pi01", -10.0, pi_pulse(Transition::Q01))
            .readout("readout", -5.0, fig_envelope());
        let err = compile(&seq, 0.5).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pi01") && msg.contains("readout"), "{msg}");
    }

    #[test]
    fn resolution_guard() {
        let seq = Sequence::new().control("pi01", 0.0, pi_pulse(Transition::Q01));
        assert!(compile(&seq, 6.0).is_err());
        assert!(compile(&seq, 5.0).is_ok());
    }

    #[test]
    fn compiled_grid_matches_envelope_and_rotation_lands_at_end() {
        let seq = Sequence::new()
            .control("pi01", -20.0, pi_pulse(Transition::Q01))
            .readout("readout", 0.0, fig_envelope());
        let c = compile(&seq, 0.5).unwrap();
        assert_eq!(c.t0_ns, -20.0);
        assert_eq!(c.n_steps(), ((20.0 + 965.0) / 0.5) as usize);
        assert_eq!(c.rotations.len(), 1);
        assert_eq!(c.rotations[0].step, 40);
        let w = c.windows[0];
        assert_eq!(w.start, 40);
        assert_eq!(w.hold_start, 40 + ((15.0 + 250.0) / 0.5) as usize);
        assert_eq!(w.end, c.n_steps());
        // Grid amplitudes: zero before the readout, 1 on the switch plateau,
        // hold fraction on the hold plateau.
        assert_eq!(c.readout_rel[0], 0.0);
        assert_eq!(c.readout_rel[w.start + 60], 1.0);
        assert_eq!(c.readout_rel[w.hold_start + 10], 0.8);
    }

    #[test]
    fn two_readouts_keep_exact_gap() {
        let e = readout_pulse(10.0, 40.0, 50.0, 0.8).unwrap();
        let gap = 120.0;
        let seq = Sequence::new()
            .readout("first", 0.0, e)
            .readout("second", e.duration_ns() + gap, e);
        let c = compile(&seq, 0.5).unwrap();
        assert_eq!(c.windows.len(), 2);
        let inter = c.windows[1].start - c.windows[0].end;
        assert_eq!(inter, (gap / 0.5) as usize);
        // Drive is zero in the gap.
        for k in c.windows[0].end..c.windows[1].start {
            assert_eq!(c.readout_rel[k], 0.0);
        }
    }
}
