//! Flux-tunable transmon spectrum from exact charge-basis diagonalization,
//! plus Purcell-limited relaxation and 1/f flux-noise dephasing estimates.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Charge-basis truncation change used by the convergence check.
const CUTOFF_PROBE: usize = 5;
/// Levels shift less than this (GHz) under a cutoff increase, or we refuse.
const CONVERGENCE_TOL_GHZ: f64 = 1e-6;

/// Infrared cutoff of the 1/f flux-noise integral, Hz.
pub const FLUX_NOISE_F_IR_HZ: f64 = 1.0;
/// Free-evolution reference time of the 1/f dephasing formula, µs.
pub const FLUX_NOISE_T_REF_US: f64 = 1.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransmonParams {
    /// Maximum Josephson energy of the SQUID, GHz.
    pub ej_max_ghz: f64,
    /// Cooper-pair charging energy (4x the single-electron convention), GHz.
    pub ec_cp_ghz: f64,
    pub squid_symmetric: bool,
    /// Charge basis spans n in [-cutoff, cutoff].
    pub charge_cutoff: usize,
}

impl Default for TransmonParams {
    fn default() -> Self {
        TransmonParams {
            ej_max_ghz: 21.0,
            ec_cp_ghz: 1.2,
            squid_symmetric: true,
            charge_cutoff: 15,
        }
    }
}

impl TransmonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ej_max_ghz > 0.0) {
            return Err(Error::InvalidParameter("ej_max_ghz must be > 0".into()));
        }
        if !(self.ec_cp_ghz > 0.0) {
            return Err(Error::InvalidParameter("ec_cp_ghz must be > 0".into()));
        }
        if self.charge_cutoff < 10 {
            return Err(Error::InvalidParameter(
                "charge_cutoff must be >= 10".into(),
            ));
        }
        if self.ej_max_ghz / (self.ec_cp_ghz / 4.0) < 20.0 {
            return Err(Error::InvalidParameter(
                "ej_max/(ec_cp/4) must be >= 20 (transmon regime)".into(),
            ));
        }
        Ok(())
    }

    /// Standard single-electron-convention charging energy, GHz.
    pub fn ec_std_ghz(&self) -> f64 {
        self.ec_cp_ghz / 4.0
    }

    /// Josephson energy at a reduced flux, GHz (symmetric SQUID).
    pub fn ej_at(&self, flux: FluxPoint) -> f64 {
        self.ej_max_ghz * (std::f64::consts::PI * flux.phi).cos().abs()
    }
}

/// Reduced magnetic flux through the SQUID, in units of the flux quantum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    pub phi: f64,
}

impl FluxPoint {
    /// Builds a flux point, folding the periodic flux into [-0.5, 0.5].
    pub fn new(phi: f64) -> Result<Self> {
        if !phi.is_finite() {
            return Err(Error::InvalidParameter("flux must be finite".into()));
        }
        Ok(FluxPoint {
            phi: phi - phi.round(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransmonSpectrum {
    /// Eigenfrequencies referenced to the ground state, GHz.
    pub levels: Vec<f64>,
    pub f01_ghz: f64,
    pub f12_ghz: f64,
    pub anharmonicity_ghz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherenceBudget {
    pub t1_purcell_us: f64,
    pub t1_other_us: f64,
    pub t1_total_us: f64,
    pub tphi_flux_us: f64,
    pub flux_noise_amp_uphi0: f64,
}

/// Eigenvalues of the charge-basis Hamiltonian H/h = EC_cp (n - ng)^2 - EJ cos(phase),
/// ng = 0, at a given cutoff. Returned sorted ascending, absolute (not referenced).
fn charge_basis_eigenvalues(ej_ghz: f64, ec_cp_ghz: f64, cutoff: usize) -> Vec<f64> {
    let dim = 2 * cutoff + 1;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        let n = i as f64 - cutoff as f64;
        h[(i, i)] = ec_cp_ghz * n * n;
        if i + 1 < dim {
            h[(i, i + 1)] = -ej_ghz / 2.0;
            h[(i + 1, i)] = -ej_ghz / 2.0;
        }
    }
    let mut ev: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Exact transmon spectrum at a flux point, with a built-in cutoff convergence check.
pub fn diagonalize(params: &TransmonParams, flux: FluxPoint) -> Result<TransmonSpectrum> {
    params.validate()?;
    let ej = params.ej_at(flux);
    let n_levels = 6;

    let ev = charge_basis_eigenvalues(ej, params.ec_cp_ghz, params.charge_cutoff);
    let ev_probe =
        charge_basis_eigenvalues(ej, params.ec_cp_ghz, params.charge_cutoff + CUTOFF_PROBE);
    for k in 0..=3 {
        let a = ev[k] - ev[0];
        let b = ev_probe[k] - ev_probe[0];
        if (a - b).abs() > CONVERGENCE_TOL_GHZ {
            return Err(Error::Convergence(format!(
                "level {k} shifts by {:.3e} GHz when charge_cutoff grows from {} to {}",
                (a - b).abs(),
                params.charge_cutoff,
                params.charge_cutoff + CUTOFF_PROBE
            )));
        }
    }

    let levels: Vec<f64> = ev.iter().take(n_levels).map(|e| e - ev[0]).collect();
    let f01 = levels[1];
    let f12 = levels[2] - levels[1];
    Ok(TransmonSpectrum {
        f01_ghz: f01,
        f12_ghz: f12,
        anharmonicity_ghz: f12 - f01,
        levels,
    })
}

/// Inverse of f01(phi) on the monotone branch phi in [0, 0.5), by bisection.
pub fn flux_for_f01(params: &TransmonParams, target_f01_ghz: f64) -> Result<FluxPoint> {
    params.validate()?;
    let f_max = diagonalize(params, FluxPoint { phi: 0.0 })?.f01_ghz;
    if !(target_f01_ghz > 0.0) || target_f01_ghz > f_max {
        return Err(Error::OutOfRange(format!(
            "target f01 {target_f01_ghz} GHz outside (0, {f_max:.4}]"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, 0.5 - 1e-9);
    // f01 decreases with phi on this branch; bisect until within 10 kHz.
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f = diagonalize(params, FluxPoint { phi: mid })?.f01_ghz;
        if f > target_f01_ghz {
            lo = mid;
        } else {
            hi = mid;
        }
        if (f - target_f01_ghz).abs() < 1e-5 {
            return Ok(FluxPoint { phi: mid });
        }
    }
    Err(Error::Convergence(format!(
        "flux bisection did not reach 10 kHz for target {target_f01_ghz} GHz"
    )))
}

/// d f01 / d phi by central finite difference (step 1e-4), GHz per flux quantum.
pub fn flux_sensitivity(params: &TransmonParams, flux: FluxPoint) -> Result<f64> {
    let h = 1e-4;
    let fp = diagonalize(params, FluxPoint::new(flux.phi + h)?)?.f01_ghz;
    let fm = diagonalize(params, FluxPoint::new(flux.phi - h)?)?.f01_ghz;
    Ok((fp - fm) / (2.0 * h))
}

/// Relaxation time through the resonator, µs: T1 = 1 / (2 pi kappa (g/Delta)^2),
/// kappa in GHz. Returns infinity for a decoupled qubit (g = 0).
pub fn purcell_t1_us(g_ghz: f64, delta_ghz: f64, kappa_ghz: f64) -> Result<f64> {
    if g_ghz == 0.0 {
        return Ok(f64::INFINITY);
    }
    if delta_ghz.abs() <= g_ghz {
        return Err(Error::Dispersive(format!(
            "|Delta|={} GHz must exceed g={} GHz",
            delta_ghz.abs(),
            g_ghz
        )));
    }
    let rate_per_ns =
        2.0 * std::f64::consts::PI * kappa_ghz * (g_ghz / delta_ghz) * (g_ghz / delta_ghz);
    Ok(1.0 / rate_per_ns / 1e3)
}

/// Two relaxation channels in parallel, µs.
pub fn combine_t1_us(t1_a_us: f64, t1_b_us: f64) -> f64 {
    1.0 / (1.0 / t1_a_us + 1.0 / t1_b_us)
}

/// First-order 1/f flux-noise dephasing estimate, µs. `a_uphi0` is the noise
/// amplitude at 1 Hz in µPhi0/sqrt(Hz). Returns infinity at zero-slope points.
/// Qualitative by construction; infrared cutoff and reference time are the
/// module constants `FLUX_NOISE_F_IR_HZ` / `FLUX_NOISE_T_REF_US`.
pub fn tphi_flux_noise_us(
    params: &TransmonParams,
    flux: FluxPoint,
    a_uphi0: f64,
) -> Result<f64> {
    if !(a_uphi0 > 0.0) {
        return Err(Error::InvalidParameter(
            "flux noise amplitude must be > 0".into(),
        ));
    }
    let slope = flux_sensitivity(params, flux)?.abs();
    if slope < 1e-9 {
        return Ok(f64::INFINITY);
    }
    let log_factor = (1.0
        / (2.0 * std::f64::consts::PI * FLUX_NOISE_F_IR_HZ * FLUX_NOISE_T_REF_US * 1e-6))
        .ln();
    let gamma_per_ns = a_uphi0 * 1e-6 * slope * (2.0 * log_factor).sqrt();
    Ok(1.0 / gamma_per_ns / 1e3)
}

/// Full relaxation/dephasing budget at a flux point.
pub fn coherence_budget(
    params: &TransmonParams,
    flux: FluxPoint,
    g_ghz: f64,
    fc_ghz: f64,
    q0: f64,
    t1_other_us: f64,
    flux_noise_amp_uphi0: f64,
) -> Result<CoherenceBudget> {
    let spec = diagonalize(params, flux)?;
    let delta = fc_ghz - spec.f01_ghz;
    let t1_purcell = purcell_t1_us(g_ghz, delta, fc_ghz / q0)?;
    Ok(CoherenceBudget {
        t1_purcell_us: t1_purcell,
        t1_other_us,
        t1_total_us: combine_t1_us(t1_purcell, t1_other_us),
        tphi_flux_us: tphi_flux_noise_us(params, flux, flux_noise_amp_uphi0)?,
        flux_noise_amp_uphi0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> TransmonParams {
        TransmonParams::default()
    }

    #[test]
    fn f01_matches_asymptotic_formula() {
        let s = diagonalize(&p(), FluxPoint { phi: 0.0 }).unwrap();
        let ec = p().ec_std_ghz();
        let asym = (8.0 * p().ej_max_ghz * ec).sqrt() - ec;
        assert!(
            (s.f01_ghz - asym).abs() / s.f01_ghz < 0.02,
            "f01={} asym={}",
            s.f01_ghz,
            asym
        );
        assert!(s.levels.windows(2).all(|w| w[1] > w[0]));
        assert!(s.levels.len() >= 4);
    }

    #[test]
    fn anharmonicity_is_minus_ec() {
        let s = diagonalize(&p(), FluxPoint { phi: 0.0 }).unwrap();
        let ec = p().ec_std_ghz();
        assert!(s.anharmonicity_ghz < 0.0);
        assert!((s.anharmonicity_ghz + ec).abs() / ec < 0.15);
    }

    #[test]
    fn half_quantum_gives_pure_charging_spectrum() {
        // EJ(0.5) = 0: charging levels EC_cp * n^2, doubly degenerate for n != 0.
        let s = diagonalize(&p(), FluxPoint { phi: 0.5 }).unwrap();
        let ec = p().ec_cp_ghz;
        assert!(s.levels[0].abs() < 1e-9);
        assert!((s.levels[1] - ec).abs() < 1e-6);
        assert!((s.levels[2] - ec).abs() < 1e-6);
        assert!((s.levels[3] - 4.0 * ec).abs() < 1e-6);
    }

    #[test]
    fn spectrum_is_flux_symmetric() {
        let a = diagonalize(&p(), FluxPoint { phi: 0.31 }).unwrap();
        let b = diagonalize(&p(), FluxPoint { phi: -0.31 }).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cutoff_convergence_guard() {
        // Paper parameters converge at the default cutoff.
        assert!(diagonalize(&p(), FluxPoint { phi: 0.2 }).is_ok());
        // A deliberately tiny basis relative to EJ/EC fails the probe.
        let bad = TransmonParams {
            ej_max_ghz: 2000.0,
            ec_cp_ghz: 1.2,
            charge_cutoff: 10,
            ..p()
        };
        assert!(matches!(
            diagonalize(&bad, FluxPoint { phi: 0.0 }),
            Err(Error::Convergence(_))
        ));
    }

    #[test]
    fn flux_for_f01_round_trips() {
        let f0 = diagonalize(&p(), FluxPoint { phi: 0.0 }).unwrap().f01_ghz;
        assert!(flux_for_f01(&p(), f0).unwrap().phi.abs() < 1e-3);
        let f25 = diagonalize(&p(), FluxPoint { phi: 0.25 }).unwrap().f01_ghz;
        let back = flux_for_f01(&p(), f25).unwrap();
        assert!((back.phi - 0.25).abs() < 1e-4);
        assert!(flux_for_f01(&p(), f0 + 1.0).is_err());
    }

    #[test]
    fn flux_for_paper_detuning() {
        // Delta = 0.38 GHz below the 6.4535 GHz resonator.
        let target = 6.4535 - 0.38;
        let fp = flux_for_f01(&p(), target).unwrap();
        let f = diagonalize(&p(), fp).unwrap().f01_ghz;
        assert!((f - target).abs() < 1e-5);
        assert!(fp.phi > 0.19 && fp.phi < 0.21, "phi={}", fp.phi);
    }

    #[test]
    fn sensitivity_zero_at_sweet_spot_and_matches_half_step() {
        assert!(flux_sensitivity(&p(), FluxPoint { phi: 0.0 })
            .unwrap()
            .abs()
            < 1e-6);
        let s = flux_sensitivity(&p(), FluxPoint { phi: 0.25 }).unwrap();
        assert!(s < 0.0);
        // Independent oracle: finite difference at half the step.
        let h = 5e-5;
        let fp = diagonalize(&p(), FluxPoint { phi: 0.25 + h }).unwrap().f01_ghz;
        let fm = diagonalize(&p(), FluxPoint { phi: 0.25 - h }).unwrap().f01_ghz;
        let oracle = (fp - fm) / (2.0 * h);
        assert!((s - oracle).abs() / oracle.abs() < 1e-3);
        // Slope sign is opposite to the flux sign on the branch.
        let sm = flux_sensitivity(&p(), FluxPoint { phi: -0.25 }).unwrap();
        assert!(sm > 0.0);
    }

    #[test]
    fn purcell_value_and_combination() {
        let kappa = 6.4535 / 685.0;
        let t1p = purcell_t1_us(0.044, 0.38, kappa).unwrap();
        assert!((t1p - 1.26).abs() < 0.02, "t1p={t1p}");
        let total = combine_t1_us(t1p, 0.7);
        assert!((total - 0.45).abs() < 0.01, "total={total}");
        assert_eq!(purcell_t1_us(0.0, 0.38, kappa).unwrap(), f64::INFINITY);
        assert!(purcell_t1_us(0.044, 0.02, kappa).is_err());
    }

    #[test]
    fn purcell_scales_as_delta_squared() {
        let kappa = 6.4535 / 685.0;
        let a = purcell_t1_us(0.044, 0.2, kappa).unwrap();
        let b = purcell_t1_us(0.044, 0.4, kappa).unwrap();
        assert!((b / a - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tphi_diverges_at_sweet_spot_and_decreases_with_slope() {
        assert_eq!(
            tphi_flux_noise_us(&p(), FluxPoint { phi: 0.0 }, 20.0).unwrap(),
            f64::INFINITY
        );
        let t_small = tphi_flux_noise_us(&p(), FluxPoint { phi: 0.15 }, 20.0).unwrap();
        let t_large = tphi_flux_noise_us(&p(), FluxPoint { phi: 0.3 }, 20.0).unwrap();
        assert!(t_small > t_large);
    }

    #[test]
    fn tphi_band_brackets_reported_values() {
        // Over f01 in [fC - 0.65, fC - 0.25] the estimate stays within [0.3, 3] µs.
        for delta in [0.25, 0.38, 0.5, 0.65] {
            let fp = flux_for_f01(&p(), 6.4535 - delta).unwrap();
            let t = tphi_flux_noise_us(&p(), fp, 20.0).unwrap();
            assert!(t > 0.3 && t < 3.0, "delta={delta} tphi={t}");
        }
    }
}
