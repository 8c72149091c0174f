//! State-dependent cavity frequencies (cavity pull), AC-Stark-shifted qubit
//! frequencies vs photon number, and the inverse photon-number calibration.
//!
//! The qubit-cavity system is reduced to a weakly anharmonic ladder: levels
//! E_j = j f01 - EC j(j-1)/2 with couplings g sqrt(j+1), RWA. The analytic
//! second-order expression is the fast path; joint diagonalization in
//! total-excitation blocks supplies exact n-dependent pulls and Stark shifts.

use crate::error::{Error, Result};
use crate::transmon::{diagonalize, FluxPoint, TransmonParams};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Relative model uncertainty of photon-number estimates (dominated by g).
pub const STARK_MODEL_UNCERTAINTY: f64 = 0.30;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CouplingParams {
    /// Vacuum coupling, GHz.
    pub g_ghz: f64,
    /// Bare resonator frequency, GHz.
    pub fc_ghz: f64,
    /// Photon truncation of the joint diagonalization (also the pull-table span).
    pub n_photon_cutoff: usize,
}

impl Default for CouplingParams {
    fn default() -> Self {
        CouplingParams {
            g_ghz: 0.044,
            fc_ghz: 6.4535,
            n_photon_cutoff: 320,
        }
    }
}

impl CouplingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.g_ghz > 0.0) {
            return Err(Error::InvalidParameter("g_ghz must be > 0".into()));
        }
        if !(self.fc_ghz > 0.0) {
            return Err(Error::InvalidParameter("fc_ghz must be > 0".into()));
        }
        if self.n_photon_cutoff < 150 {
            return Err(Error::InvalidParameter(
                "n_photon_cutoff must be >= 150".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersiveShifts {
    /// Dressed cavity frequency (zero-photon limit) for qubit levels 0..2, GHz.
    pub fc_by_state_ghz: [f64; 3],
    /// 2 chi = f_C0 - f_C1, GHz.
    pub cavity_pull_ghz: f64,
    /// f_C0 - f_C2, GHz.
    pub shift2_ghz: f64,
    pub warnings: Vec<String>,
}

/// Anharmonic-ladder transition frequency j -> j+1, GHz.
fn ladder_f_transition(f01: f64, ec: f64, j: usize) -> f64 {
    f01 - ec * j as f64
}

/// Second-order pull of the cavity for qubit level i (zero-photon limit), GHz.
fn pull_perturbative(f01: f64, ec: f64, g: f64, fc: f64, i: usize) -> f64 {
    let up = g * g * (i as f64 + 1.0) / (fc - ladder_f_transition(f01, ec, i));
    let down = if i == 0 {
        0.0
    } else {
        g * g * i as f64 / (fc - ladder_f_transition(f01, ec, i - 1))
    };
    up - down
}

/// Dressed cavity frequencies per qubit state from multilevel perturbation
/// theory on the ladder model (EC fixed to the charging energy, f01 exact).
pub fn dressed_shifts(
    tp: &TransmonParams,
    flux: FluxPoint,
    cp: &CouplingParams,
) -> Result<DispersiveShifts> {
    cp.validate()?;
    let spec = diagonalize(tp, flux)?;
    let delta = cp.fc_ghz - spec.f01_ghz;
    if delta.abs() <= cp.g_ghz {
        return Err(Error::Dispersive(format!(
            "|fC - f01| = {:.4} GHz must exceed g = {} GHz",
            delta.abs(),
            cp.g_ghz
        )));
    }
    let ec = tp.ec_std_ghz();
    let mut warnings = Vec::new();
    for i in 0..3 {
        let det = (ladder_f_transition(spec.f01_ghz, ec, i) - cp.fc_ghz).abs();
        if det < 3.0 * cp.g_ghz {
            warnings.push(format!(
                "transition {}->{} within 3g of the resonator (straddling)",
                i,
                i + 1
            ));
        }
    }
    let mut fc_by_state = [0.0; 3];
    for (i, f) in fc_by_state.iter_mut().enumerate() {
        *f = cp.fc_ghz + pull_perturbative(spec.f01_ghz, ec, cp.g_ghz, cp.fc_ghz, i);
    }
    Ok(DispersiveShifts {
        cavity_pull_ghz: fc_by_state[0] - fc_by_state[1],
        shift2_ghz: fc_by_state[0] - fc_by_state[2],
        fc_by_state_ghz: fc_by_state,
        warnings,
    })
}

/// Joint qubit-cavity eigenstructure: per-level photon-dependent cavity pulls
/// and the AC-Stark-shifted qubit frequency f01(n).
#[derive(Debug, Clone)]
pub struct JointModel {
    pub f01_ghz: f64,
    pub ec_ghz: f64,
    pub g_ghz: f64,
    pub fc_ghz: f64,
    pub nlev: usize,
    pub ntab: usize,
    /// tables[i][n] = f_Ci(n) - fC in GHz, n in 0..ntab.
    tables: Vec<Vec<f64>>,
    /// f01(n) = E(1,n) - E(0,n) in GHz, n in 0..=ntab.
    f01_of_n: Vec<f64>,
}

impl JointModel {
    /// Diagonalizes the RWA ladder-oscillator model in total-excitation blocks.
    pub fn build(tp: &TransmonParams, flux: FluxPoint, cp: &CouplingParams) -> Result<Self> {
        cp.validate()?;
        let spec = diagonalize(tp, flux)?;
        let f01 = spec.f01_ghz;
        if (cp.fc_ghz - f01).abs() <= cp.g_ghz {
            return Err(Error::Dispersive(
                "joint model requires |fC - f01| > g".into(),
            ));
        }
        let ec = tp.ec_std_ghz();
        let (g, fc) = (cp.g_ghz, cp.fc_ghz);
        let nlev = 6usize;
        let ntab = cp.n_photon_cutoff;

        // Bare ladder energies.
        let e_bare: Vec<f64> = (0..nlev)
            .map(|j| j as f64 * f01 - ec * (j * (j.saturating_sub(1))) as f64 / 2.0)
            .collect();

        // Dressed energies e[i][n]. Within each total-excitation block the
        // eigenvalues are matched to bare states by energy rank, which stays
        // single-valued through the level-1/level-2 straddle where overlap
        // assignment becomes ambiguous.
        let mut e = vec![vec![0.0f64; ntab + 1]; nlev];
        for nn in 0..=(nlev - 1 + ntab) {
            let k = nlev.min(nn + 1);
            let bare: Vec<f64> = (0..k)
                .map(|i| e_bare[i] + (nn - i) as f64 * fc)
                .collect();
            let mut h = DMatrix::<f64>::zeros(k, k);
            for i in 0..k {
                h[(i, i)] = bare[i];
                if i + 1 < k {
                    let v = g * ((i + 1) as f64).sqrt() * ((nn - i) as f64).sqrt();
                    h[(i, i + 1)] = v;
                    h[(i + 1, i)] = v;
                }
            }
            let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut by_rank: Vec<usize> = (0..k).collect();
            by_rank.sort_by(|&a, &b| bare[a].partial_cmp(&bare[b]).unwrap());
            for (rank, &i) in by_rank.iter().enumerate() {
                let n = nn - i;
                if n <= ntab {
                    e[i][n] = ev[rank];
                }
            }
        }

        let tables: Vec<Vec<f64>> = (0..nlev)
            .map(|i| (0..ntab).map(|n| e[i][n + 1] - e[i][n] - fc).collect())
            .collect();
        let f01_of_n: Vec<f64> = (0..=ntab).map(|n| e[1][n] - e[0][n]).collect();

        Ok(JointModel {
            f01_ghz: f01,
            ec_ghz: ec,
            g_ghz: g,
            fc_ghz: fc,
            nlev,
            ntab,
            tables,
            f01_of_n,
        })
    }

    /// Cavity pull f_Ci(n) - fC for qubit level i at (real-valued) photon
    /// number n, GHz. Linear interpolation, clamped at the table ends.
    pub fn pull_ghz(&self, level: usize, n: f64) -> f64 {
        let tab = &self.tables[level.min(self.nlev - 1)];
        let x = n.clamp(0.0, (tab.len() - 1) as f64);
        let i = (x as usize).min(tab.len() - 2);
        let frac = x - i as f64;
        tab[i] * (1.0 - frac) + tab[i + 1] * frac
    }

    pub fn pull_table(&self, level: usize) -> &[f64] {
        &self.tables[level.min(self.nlev - 1)]
    }

    /// AC-Stark-shifted qubit frequency f01(n), GHz. Requires n at least 50
    /// photons below the truncation.
    pub fn ac_stark_f01(&self, n: f64) -> Result<f64> {
        if !(n >= 0.0) {
            return Err(Error::InvalidParameter("photon number must be >= 0".into()));
        }
        let max_n = (self.ntab - 50) as f64;
        if n > max_n {
            return Err(Error::OutOfRange(format!(
                "n = {n} exceeds truncation margin (max {max_n})"
            )));
        }
        let i = (n as usize).min(self.ntab - 1);
        let frac = n - i as f64;
        Ok(self.f01_of_n[i] * (1.0 - frac) + self.f01_of_n[i + 1] * frac)
    }

    /// Inverse of the Stark shift f01(n) - f01(0), by bisection on the
    /// monotone tabulated curve. Model uncertainty is STARK_MODEL_UNCERTAINTY.
    pub fn photons_from_shift(&self, observed_shift_ghz: f64) -> Result<f64> {
        let f0 = self.f01_of_n[0];
        let max_n = (self.ntab - 50) as f64;
        let shift_at = |n: f64| self.ac_stark_f01(n).unwrap() - f0;
        let (lo_s, hi_s) = (shift_at(max_n), shift_at(0.0));
        if observed_shift_ghz > hi_s || observed_shift_ghz < lo_s {
            return Err(Error::OutOfRange(format!(
                "shift {observed_shift_ghz} GHz outside invertible range [{lo_s:.5}, {hi_s:.5}]"
            )));
        }
        let (mut lo, mut hi) = (0.0f64, max_n);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if shift_at(mid) > observed_shift_ghz {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}
