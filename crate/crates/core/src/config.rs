//! Run configuration: one hierarchical TOML file with strict unknown-key
//! rejection. An empty file resolves to the default long-hold operating
//! point (delta = 0.38 GHz, drive 17 MHz below the bare resonator).

use crate::chain::ChainParams;
use crate::dispersive::CouplingParams;
use crate::error::{Error, Result};
use crate::experiments::ReadoutSettings;
use crate::jba::JbaParams;
use crate::readout::{OperatingPoint, DEFAULT_SDE_DT_NS};
use crate::transmon::TransmonParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Sample and junction parameters. Energies and frequencies in GHz, critical
/// current in uA, Kerr constant in GHz per photon, temperature in K.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceConfig {
    #[serde(rename = "EJ")]
    pub ej_ghz: f64,
    #[serde(rename = "EC_cp")]
    pub ec_cp_ghz: f64,
    pub g: f64,
    #[serde(rename = "fC")]
    pub fc_ghz: f64,
    #[serde(rename = "Q0")]
    pub q0: f64,
    #[serde(rename = "Ic")]
    pub ic_ua: f64,
    pub kerr: f64,
    pub noise_temp: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let tp = TransmonParams::default();
        let cp = CouplingParams::default();
        let jba = JbaParams::default();
        DeviceConfig {
            ej_ghz: tp.ej_max_ghz,
            ec_cp_ghz: tp.ec_cp_ghz,
            g: cp.g_ghz,
            fc_ghz: cp.fc_ghz,
            q0: jba.q0,
            ic_ua: jba.ic_ua,
            kerr: jba.kerr_ghz_per_photon,
            noise_temp: jba.noise_temp_k,
        }
    }
}

impl DeviceConfig {
    pub fn transmon(&self) -> TransmonParams {
        TransmonParams {
            ej_max_ghz: self.ej_ghz,
            ec_cp_ghz: self.ec_cp_ghz,
            ..TransmonParams::default()
        }
    }

    pub fn coupling(&self) -> CouplingParams {
        CouplingParams {
            g_ghz: self.g,
            fc_ghz: self.fc_ghz,
            ..CouplingParams::default()
        }
    }

    pub fn jba(&self) -> JbaParams {
        JbaParams::new(self.fc_ghz, self.q0, self.ic_ua, self.kerr, self.noise_temp)
    }
}

/// Readout envelope timings, ns; `gap_ns` separates repeated readouts.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingsConfig {
    pub t_rise_ns: f64,
    pub t_switch_ns: f64,
    pub t_hold_ns: f64,
    pub hold_fraction: f64,
    pub gap_ns: f64,
}

impl Default for TimingsConfig {
    fn default() -> Self {
        TimingsConfig {
            t_rise_ns: 15.0,
            t_switch_ns: 250.0,
            t_hold_ns: 700.0,
            hold_fraction: 0.8,
            gap_ns: 120.0,
        }
    }
}

/// Drive powers at the fridge input, dB.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowersConfig {
    /// Switching-plateau power used when no sweep is requested.
    pub sample_db: f64,
}

impl Default for PowersConfig {
    fn default() -> Self {
        PowersConfig { sample_db: -35.3 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatingPointConfig {
    #[serde(rename = "delta_GHz")]
    pub delta_ghz: f64,
    #[serde(rename = "readout_detuning_MHz")]
    pub readout_detuning_mhz: f64,
    pub timings: TimingsConfig,
    pub powers: PowersConfig,
    /// Integration step of the intracavity field, ns.
    pub sde_dt_ns: f64,
}

impl Default for OperatingPointConfig {
    fn default() -> Self {
        OperatingPointConfig {
            delta_ghz: 0.38,
            readout_detuning_mhz: 17.0,
            timings: TimingsConfig::default(),
            powers: PowersConfig::default(),
            sde_dt_ns: DEFAULT_SDE_DT_NS,
        }
    }
}

/// An inclusive linear sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepSpec {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.points < 2 {
            return Err(Error::Config("sweep needs at least two points".into()));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) || self.stop <= self.start {
            return Err(Error::Config(format!(
                "sweep bounds [{}, {}] must be finite and increasing",
                self.start, self.stop
            )));
        }
        let n = self.points;
        Ok((0..n)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64)
            .collect())
    }
}

/// Shot counts, seeding, sweep requests, and output location. Sweeps left
/// unset fall back to per-experiment automatic grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub shots: usize,
    pub seed: u64,
    pub out_dir: String,
    /// Coherent-drive Rabi frequency for rabi/backaction protocols, MHz.
    #[serde(rename = "rabi_MHz")]
    pub rabi_mhz: f64,
    /// Programmed fringe detuning for the Ramsey protocol, MHz.
    #[serde(rename = "ramsey_detuning_MHz")]
    pub ramsey_detuning_mhz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power_sweep: Option<SweepSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_sweep: Option<SweepSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning_sweep: Option<SweepSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            shots: 2000,
            seed: 20260814,
            out_dir: "out".into(),
            rabi_mhz: 29.0,
            ramsey_detuning_mhz: 5.0,
            power_sweep: None,
            delay_sweep: None,
            detuning_sweep: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub device: DeviceConfig,
    pub chain: ChainParams,
    pub operating_point: OperatingPointConfig,
    pub run: RunConfig,
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.device.transmon().validate()?;
        self.device.coupling().validate()?;
        self.device.jba().validate()?;
        self.chain.validate()?;
        let op = &self.operating_point;
        for (name, v) in [
            ("delta_GHz", op.delta_ghz),
            ("readout_detuning_MHz", op.readout_detuning_mhz),
            ("timings.t_rise_ns", op.timings.t_rise_ns),
            ("timings.t_switch_ns", op.timings.t_switch_ns),
            ("timings.t_hold_ns", op.timings.t_hold_ns),
            ("sde_dt_ns", op.sde_dt_ns),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} = {v} must be > 0")));
            }
        }
        if !(op.timings.gap_ns >= 0.0) {
            return Err(Error::Config("timings.gap_ns must be >= 0".into()));
        }
        if !(op.timings.hold_fraction > 0.0 && op.timings.hold_fraction <= 1.0) {
            return Err(Error::Config("timings.hold_fraction outside (0, 1]".into()));
        }
        if self.run.shots == 0 {
            return Err(Error::Config("run.shots must be >= 1".into()));
        }
        for (name, v) in [
            ("rabi_MHz", self.run.rabi_mhz),
            ("ramsey_detuning_MHz", self.run.ramsey_detuning_mhz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("run.{name} = {v} must be > 0")));
            }
        }
        for (name, sweep) in [
            ("power_sweep", &self.run.power_sweep),
            ("delay_sweep", &self.run.delay_sweep),
            ("detuning_sweep", &self.run.detuning_sweep),
        ] {
            if let Some(s) = sweep {
                s.grid()
                    .map_err(|e| Error::Config(format!("run.{name}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Builds the fully resolved operating point (flux bias, pull tables,
    /// decay rates) for this configuration.
    pub fn operating_point(&self) -> Result<OperatingPoint> {
        OperatingPoint::build(
            &self.device.transmon(),
            &self.device.coupling(),
            &self.device.jba(),
            &self.chain,
            self.operating_point.delta_ghz,
            self.operating_point.readout_detuning_mhz,
            self.operating_point.sde_dt_ns,
        )
    }

    pub fn settings(&self) -> ReadoutSettings {
        let t = &self.operating_point.timings;
        ReadoutSettings {
            t_rise_ns: t.t_rise_ns,
            t_switch_ns: t.t_switch_ns,
            t_hold_ns: t.t_hold_ns,
            hold_fraction: t.hold_fraction,
            power_db: self.operating_point.powers.sample_db,
        }
    }

    /// Canonical TOML echo with every default made explicit; hashing this
    /// string identifies the resolved configuration.
    pub fn canonical_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// First 16 hex digits of the SHA-256 of the canonical echo; the output
    /// directory is normalized first, so relocating a run keeps its identity.
    pub fn hash_hex(&self) -> Result<String> {
        let mut c = self.clone();
        c.run.out_dir = RunConfig::default().out_dir;
        let digest = Sha256::digest(c.canonical_toml()?.as_bytes());
        Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_resolves_to_defaults() {
        let cfg = SimConfig::parse("").unwrap();
        assert_eq!(cfg.device.ej_ghz, 21.0);
        assert_eq!(cfg.operating_point.delta_ghz, 0.38);
        assert_eq!(cfg.operating_point.readout_detuning_mhz, 17.0);
        assert_eq!(cfg.run.shots, 2000);
        assert!(cfg.run.power_sweep.is_none());
    }

    #[test]
    fn canonical_echo_round_trips_and_hashes_stably() {
        let cfg = SimConfig::parse("[operating_point]\ndelta_GHz = 0.25\n").unwrap();
        let echo = cfg.canonical_toml().unwrap();
        let back = SimConfig::parse(&echo).unwrap();
        assert_eq!(back.operating_point.delta_ghz, 0.25);
        assert_eq!(cfg.hash_hex().unwrap(), back.hash_hex().unwrap());
        assert_eq!(cfg.hash_hex().unwrap().len(), 16);
        // Different content, different hash.
        assert_ne!(
            cfg.hash_hex().unwrap(),
            SimConfig::default().hash_hex().unwrap()
        );
        // The output directory does not change the run identity.
        let mut moved = cfg.clone();
        moved.run.out_dir = "elsewhere".into();
        assert_eq!(cfg.hash_hex().unwrap(), moved.hash_hex().unwrap());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(matches!(
            SimConfig::parse("[device]\nEJ_typo = 21.0\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            SimConfig::parse("[resonator]\nQ = 1\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            SimConfig::parse("[run]\nshots = 0\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            SimConfig::parse("[operating_point]\ndelta_GHz = -0.1\n"),
            Err(Error::Config(_))
        ));
        let sweep = SimConfig::parse(
            "[run.power_sweep]\nstart = -31.0\nstop = -39.0\npoints = 25\n",
        );
        assert!(matches!(sweep, Err(Error::Config(_))));
    }

    #[test]
    fn sweep_grid_is_inclusive_and_linear() {
        let s = SweepSpec {
            start: -39.0,
            stop: -31.0,
            points: 25,
        };
        let g = s.grid().unwrap();
        assert_eq!(g.len(), 25);
        assert!((g[0] + 39.0).abs() < 1e-12 && (g[24] + 31.0).abs() < 1e-12);
        assert!((g[1] - g[0] - 8.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn device_section_feeds_the_parameter_structs() {
        let cfg = SimConfig::parse(
            "[device]\nEJ = 22.0\nEC_cp = 1.3\ng = 0.05\nfC = 6.5\nQ0 = 700.0\nIc = 0.8\nkerr = -6e-4\nnoise_temp = 0.07\n",
        )
        .unwrap();
        assert_eq!(cfg.device.transmon().ej_max_ghz, 22.0);
        assert_eq!(cfg.device.coupling().g_ghz, 0.05);
        let jba = cfg.device.jba();
        assert_eq!(jba.q0, 700.0);
        assert!((jba.kappa_ghz - 6.5 / 700.0).abs() < 1e-15);
    }
}
