//! Driven Kerr (Duffing) resonator: steady states, bistability window,
//! stochastic field trajectories with noise-activated escape, and the
//! fridge-power to drive-amplitude calibration.
//!
//! Internal dynamics use angular rates in rad/ns: kappa_a = 2 pi fC/Q0,
//! delta_a = 2 pi (fC - f_drive), K_a = 2 pi K. The stored drive amplitude is
//! eps = sqrt(kappa_a * flux) with flux in photons/ns, so the steady-state
//! equation reads n [(delta_a + K_a n)^2 + kappa_a^2/4] = eps^2.

use crate::error::{Error, Result};
use crate::seeding::{shot_rng, STREAM_FIELD};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Planck constant, J s.
pub const PLANCK_JS: f64 = 6.62607015e-34;
/// h * 1 GHz / k_B, kelvin per GHz.
pub const KELVIN_PER_GHZ: f64 = 6.62607015e-34 * 1e9 / 1.380649e-23;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct JbaParams {
    /// Bare resonator frequency, GHz.
    pub fc_ghz: f64,
    pub q0: f64,
    /// fC / Q0, GHz (ordinary frequency).
    pub kappa_ghz: f64,
    /// Junction critical current, µA (recorded device parameter).
    pub ic_ua: f64,
    /// Kerr constant, GHz per photon (negative).
    pub kerr_ghz_per_photon: f64,
    /// Effective escape-activation temperature, K (includes the quantum floor).
    pub noise_temp_k: f64,
}

impl Default for JbaParams {
    fn default() -> Self {
        JbaParams::new(6.4535, 685.0, 0.72, -0.5e-3, 0.06)
    }
}

impl JbaParams {
    pub fn new(fc_ghz: f64, q0: f64, ic_ua: f64, kerr: f64, noise_temp_k: f64) -> Self {
        JbaParams {
            fc_ghz,
            q0,
            kappa_ghz: fc_ghz / q0,
            ic_ua,
            kerr_ghz_per_photon: kerr,
            noise_temp_k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q0 > 0.0) {
            return Err(Error::InvalidParameter("q0 must be > 0".into()));
        }
        let expect = self.fc_ghz / self.q0;
        if (self.kappa_ghz - expect).abs() > 1e-9 * expect {
            return Err(Error::InvalidParameter(format!(
                "kappa_ghz = {} inconsistent with fC/Q0 = {expect}",
                self.kappa_ghz
            )));
        }
        if !(self.kerr_ghz_per_photon < 0.0) {
            return Err(Error::InvalidParameter("kerr must be negative".into()));
        }
        if !(self.noise_temp_k > 0.0) {
            return Err(Error::InvalidParameter("noise_temp must be > 0".into()));
        }
        Ok(())
    }

    /// Energy decay rate, rad/ns.
    pub fn kappa_a(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.kappa_ghz
    }

    /// Kerr constant, rad/ns per photon.
    pub fn kerr_a(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.kerr_ghz_per_photon
    }

    /// Bose occupation of the resonator at the effective noise temperature.
    pub fn n_thermal(&self) -> f64 {
        let x = KELVIN_PER_GHZ * self.fc_ghz / self.noise_temp_k;
        1.0 / (x.exp() - 1.0)
    }

    /// Complex noise amplitude per quadrature for a step dt (diffusion
    /// D = kappa_a (n_th + 1/2), sigma = sqrt(D dt / 2)).
    pub fn noise_sigma(&self, dt_ns: f64) -> f64 {
        (self.kappa_a() * (self.n_thermal() + 0.5) * dt_ns / 2.0).sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriveConfig {
    /// Drive frequency, GHz (below the bare resonance for this readout).
    pub f_drive_ghz: f64,
    /// Power referenced to 1 mW at the fridge input, dB.
    pub power_db_fridge: f64,
    /// Line attenuation down to the sample, dB (negative).
    pub attenuation_db: f64,
    /// Drive amplitude sqrt(kappa_a * photon flux), 1/ns.
    pub epsilon: f64,
}

impl DriveConfig {
    pub fn new(p: &JbaParams, f_drive_ghz: f64, power_db_fridge: f64) -> Result<Self> {
        Self::with_attenuation(p, f_drive_ghz, power_db_fridge, -77.0)
    }

    pub fn with_attenuation(
        p: &JbaParams,
        f_drive_ghz: f64,
        power_db_fridge: f64,
        attenuation_db: f64,
    ) -> Result<Self> {
        if attenuation_db > 0.0 {
            return Err(Error::InvalidParameter(
                "attenuation_db must be <= 0".into(),
            ));
        }
        if f_drive_ghz >= p.fc_ghz {
            return Err(Error::InvalidParameter(
                "f_drive must be below the bare resonator frequency".into(),
            ));
        }
        let mut d = DriveConfig {
            f_drive_ghz,
            power_db_fridge,
            attenuation_db,
            epsilon: 0.0,
        };
        d.epsilon = power_to_epsilon(p, &d);
        Ok(d)
    }
}

/// Drive amplitude at the sample from the fridge-referenced power:
/// photon flux = P_sample / (h f), eps = sqrt(kappa_a * flux) in 1/ns.
pub fn power_to_epsilon(p: &JbaParams, d: &DriveConfig) -> f64 {
    let p_sample_w = 1e-3 * 10f64.powf((d.power_db_fridge + d.attenuation_db) / 10.0);
    let flux_per_ns = p_sample_w / (PLANCK_JS * d.f_drive_ghz * 1e9) * 1e-9;
    (p.kappa_a() * flux_per_ns).sqrt()
}

/// Inverse of power_to_epsilon, dB at the fridge input.
pub fn epsilon_to_power_db(p: &JbaParams, f_drive_ghz: f64, eps: f64, attenuation_db: f64) -> f64 {
    let flux_per_ns = eps * eps / p.kappa_a();
    let p_sample_w = flux_per_ns * 1e9 * PLANCK_JS * f_drive_ghz * 1e9;
    10.0 * (p_sample_w / 1e-3).log10() - attenuation_db
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    /// Degenerate double root at a bistability edge.
    Edge,
}

/// Real nonnegative photon-number roots of the driven-Kerr steady state at a
/// fixed detuning shift (GHz) added to the bare resonator frequency. Returns
/// 1 or 3 roots, sorted ascending, tagged stable/unstable.
pub fn steady_states(
    p: &JbaParams,
    d: &DriveConfig,
    detuning_shift_ghz: f64,
) -> Vec<(f64, Stability)> {
    let delta_a =
        2.0 * std::f64::consts::PI * (p.fc_ghz + detuning_shift_ghz - d.f_drive_ghz);
    kerr_roots(delta_a, p.kappa_a(), p.kerr_a(), d.epsilon * d.epsilon)
}

/// Roots of n [(delta_a + K_a n)^2 + kappa_a^2/4] = eps2, angular units.
pub fn kerr_roots(delta_a: f64, kappa_a: f64, kerr_a: f64, eps2: f64) -> Vec<(f64, Stability)> {
    if eps2 <= 0.0 {
        return vec![(0.0, Stability::Stable)];
    }
    // Monic cubic n^3 + a n^2 + b n + c.
    let k2 = kerr_a * kerr_a;
    let a = 2.0 * delta_a / kerr_a;
    let b = (delta_a * delta_a + kappa_a * kappa_a / 4.0) / k2;
    let c = -eps2 / k2;

    let mut roots = solve_cubic_real(a, b, c);
    roots.retain(|&r| r >= -1e-12);
    for r in roots.iter_mut() {
        // Newton polish against the original cubic.
        for _ in 0..3 {
            let f = ((*r + a) * *r + b) * *r + c;
            let df = (3.0 * *r + 2.0 * a) * *r + b;
            if df.abs() > 0.0 {
                *r -= f / df;
            }
        }
        if *r < 0.0 {
            *r = 0.0;
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-9 * (1.0 + y.abs()));

    let scale = roots.last().copied().unwrap_or(0.0).max(1.0);
    match roots.len() {
        3 => {
            let near_edge = roots[1] - roots[0] < 1e-6 * scale || roots[2] - roots[1] < 1e-6 * scale;
            if near_edge {
                roots.iter().map(|&r| (r, Stability::Edge)).collect()
            } else {
                vec![
                    (roots[0], Stability::Stable),
                    (roots[1], Stability::Unstable),
                    (roots[2], Stability::Stable),
                ]
            }
        }
        _ => roots.iter().map(|&r| (r, Stability::Stable)).collect(),
    }
}

/// Real roots of x^3 + a x^2 + b x + c (trigonometric/Cardano).
fn solve_cubic_real(a: f64, b: f64, c: f64) -> Vec<f64> {
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    if disc > 0.0 {
        let s = (-q / 2.0 + disc.sqrt()).cbrt();
        let t = (-q / 2.0 - disc.sqrt()).cbrt();
        vec![shift + s + t]
    } else {
        let r = (-p * p * p / 27.0).sqrt();
        let phi = (-q / 2.0 / r).clamp(-1.0, 1.0).acos();
        let m = 2.0 * (-p / 3.0).sqrt();
        (0..3)
            .map(|k| shift + m * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos())
            .collect()
    }
}

/// Detuning above which the driven-Kerr system can be bistable, rad/ns.
pub fn bistability_threshold_a(kappa_a: f64) -> f64 {
    3f64.sqrt() / 2.0 * kappa_a
}

/// Drive-amplitude window (eps_low, eps_high) with three steady states, for a
/// scalar detuning in GHz. Closed form from the turning points of eps^2(n).
pub fn bistable_window(p: &JbaParams, detuning_ghz: f64) -> Result<(f64, f64)> {
    let delta_a = 2.0 * std::f64::consts::PI * detuning_ghz;
    let kappa_a = p.kappa_a();
    let kerr_a = p.kerr_a();
    let disc = 4.0 * delta_a * delta_a - 3.0 * kappa_a * kappa_a;
    if delta_a <= 0.0 || disc <= 0.0 {
        return Err(Error::NoBistability(format!(
            "detuning {detuning_ghz} GHz at or below threshold {:.5} GHz",
            bistability_threshold_a(kappa_a) / (2.0 * std::f64::consts::PI)
        )));
    }
    let eps2_at = |n: f64| n * ((delta_a + kerr_a * n).powi(2) + kappa_a * kappa_a / 4.0);
    let n_minus = (4.0 * delta_a - disc.sqrt()) / (6.0 * kerr_a.abs());
    let n_plus = (4.0 * delta_a + disc.sqrt()) / (6.0 * kerr_a.abs());
    Ok((eps2_at(n_plus).sqrt(), eps2_at(n_minus).sqrt()))
}

/// Steady photon-number roots when the detuning itself depends on n through a
/// cavity-pull table: n [(delta_base_a + 2 pi pull(n) + K_a n)^2 + kappa^2/4] = eps2.
/// Sign-scan over [0, n_max] plus bisection; sorted ascending.
pub fn pulled_roots(
    delta_base_a: f64,
    kappa_a: f64,
    kerr_a: f64,
    eps2: f64,
    pull_ghz: &dyn Fn(f64) -> f64,
    n_max: f64,
) -> Vec<f64> {
    let f = |n: f64| {
        let d = delta_base_a + 2.0 * std::f64::consts::PI * pull_ghz(n) + kerr_a * n;
        n * (d * d + kappa_a * kappa_a / 4.0) - eps2
    };
    let steps = 3000;
    let mut roots = Vec::new();
    let mut prev = f(0.0);
    for i in 1..=steps {
        let x = n_max * i as f64 / steps as f64;
        let cur = f(x);
        if prev == 0.0 {
            roots.push(n_max * (i - 1) as f64 / steps as f64);
        } else if prev * cur < 0.0 {
            let (mut lo, mut hi) = (n_max * (i - 1) as f64 / steps as f64, x);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(lo) * f(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    roots
}

/// Drive-amplitude-squared window over which the pulled system is bistable.
/// Seed scan plus two-sided bisection on the root count.
pub fn pulled_window_eps2(
    delta_base_a: f64,
    kappa_a: f64,
    kerr_a: f64,
    pull_ghz: &dyn Fn(f64) -> f64,
    n_max: f64,
) -> Result<(f64, f64)> {
    let count = |eps2: f64| pulled_roots(delta_base_a, kappa_a, kerr_a, eps2, pull_ghz, n_max).len();
    // Geometric seed scan for any bistable drive.
    let mut seed = None;
    let (lo0, hi0) = (1e-4f64, 3.0f64);
    let m = 200;
    for i in 0..=m {
        let e2 = lo0 * (hi0 / lo0).powf(i as f64 / m as f64);
        if count(e2) >= 3 {
            seed = Some(e2);
            break;
        }
    }
    let seed = seed.ok_or_else(|| {
        Error::NoBistability("no drive amplitude yields three pulled steady states".into())
    })?;
    let bisect = |mut inside: f64, mut outside: f64| {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if count(mid) >= 3 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };
    Ok((bisect(seed, lo0 * 1e-3), bisect(seed, hi0 * 10.0)))
}

#[derive(Debug, Clone)]
pub struct FieldTrajectory {
    pub dt_ns: f64,
    pub times_ns: Vec<f64>,
    /// Intracavity amplitude per step, rotating frame at the drive.
    pub alpha: Vec<Complex64>,
    pub bifurcated: bool,
    pub t_bifurcation_ns: Option<f64>,
}

impl FieldTrajectory {
    pub fn photon_numbers(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// One exponential Euler-Maruyama step. `delta_eff_a` is the full detuning
/// including pulls, rad/ns; `eps` the drive amplitude; `noise` pre-scaled.
#[inline(always)]
pub fn field_step(
    alpha: Complex64,
    delta_eff_a: f64,
    kappa_a: f64,
    kerr_a: f64,
    eps: f64,
    dt: f64,
    noise: Complex64,
) -> Complex64 {
    let lambda = Complex64::new(-kappa_a / 2.0, delta_eff_a + kerr_a * alpha.norm_sqr());
    let e = (lambda * dt).exp();
    let drive = Complex64::new(0.0, eps);
    alpha * e + (e - Complex64::new(1.0, 0.0)) / lambda * drive + noise
}

/// Integrates the driven-Kerr Langevin equation over a sampled envelope and a
/// step-function detuning timeline (GHz). Detects bifurcation as a crossing of
/// the midpoint between the instantaneous stable branches that persists for
/// 5/kappa.
pub fn integrate_trajectory(
    p: &JbaParams,
    envelope_eps: &[f64],
    detuning_of_t_ghz: &[f64],
    dt_ns: f64,
    seed: u64,
) -> Result<FieldTrajectory> {
    let mut rng = shot_rng(seed, 0, STREAM_FIELD);
    integrate_with_rng(p, envelope_eps, detuning_of_t_ghz, dt_ns, Some(&mut rng))
}

/// Same as integrate_trajectory but without stochastic noise.
pub fn integrate_noiseless(
    p: &JbaParams,
    envelope_eps: &[f64],
    detuning_of_t_ghz: &[f64],
    dt_ns: f64,
) -> Result<FieldTrajectory> {
    integrate_with_rng(p, envelope_eps, detuning_of_t_ghz, dt_ns, None)
}

fn integrate_with_rng(
    p: &JbaParams,
    envelope_eps: &[f64],
    detuning_of_t_ghz: &[f64],
    dt_ns: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<FieldTrajectory> {
    p.validate()?;
    let kappa_a = p.kappa_a();
    let kerr_a = p.kerr_a();
    if dt_ns > 0.1 / kappa_a {
        return Err(Error::StepTooLarge(format!(
            "dt = {dt_ns} ns exceeds 0.1/kappa = {:.3} ns",
            0.1 / kappa_a
        )));
    }
    if envelope_eps.len() != detuning_of_t_ghz.len() {
        return Err(Error::InvalidParameter(
            "envelope and detuning timelines must share the grid".into(),
        ));
    }
    let sigma = p.noise_sigma(dt_ns);
    let persist_steps = (5.0 / kappa_a / dt_ns).ceil() as usize;

    let n = envelope_eps.len();
    let mut alpha = Complex64::new(0.0, 0.0);
    let mut traj = FieldTrajectory {
        dt_ns,
        times_ns: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
        bifurcated: false,
        t_bifurcation_ns: None,
    };

    // Branch-midpoint cache keyed on the (eps, delta) pair of the current step.
    let mut cache_key = (f64::NAN, f64::NAN);
    let mut midpoint: Option<f64> = None;
    let mut run_len = 0usize;

    for k in 0..n {
        let eps = envelope_eps[k];
        let delta_a = 2.0 * std::f64::consts::PI * detuning_of_t_ghz[k];
        let noise = match rng.as_deref_mut() {
            Some(r) => {
                let x: f64 = StandardNormal.sample(r);
                let y: f64 = StandardNormal.sample(r);
                Complex64::new(sigma * x, sigma * y)
            }
            None => Complex64::new(0.0, 0.0),
        };
        alpha = field_step(alpha, delta_a, kappa_a, kerr_a, eps, dt_ns, noise);
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::Divergence {
                step: k,
                msg: "field amplitude is not finite".into(),
            });
        }
        traj.times_ns.push(k as f64 * dt_ns);
        traj.alpha.push(alpha);

        if (eps, delta_a) != cache_key {
            cache_key = (eps, delta_a);
            let roots = kerr_roots(delta_a, kappa_a, kerr_a, eps * eps);
            midpoint = branch_midpoint(&roots, delta_a, kerr_a);
        }
        if !traj.bifurcated {
            match midpoint {
                Some(mid) if alpha.norm_sqr() > mid => {
                    run_len += 1;
                    if run_len >= persist_steps {
                        traj.bifurcated = true;
                        traj.t_bifurcation_ns = Some((k + 1 - run_len) as f64 * dt_ns);
                    }
                }
                _ => run_len = 0,
            }
        }
    }
    Ok(traj)
}

/// Midpoint between the stable branches, or half the high branch when only it
/// exists. None when escape is impossible (single low root).
pub fn branch_midpoint(roots: &[(f64, Stability)], delta_a: f64, kerr_a: f64) -> Option<f64> {
    match roots.len() {
        3 => Some(0.5 * (roots[0].0 + roots[2].0)),
        1 => {
            let n_res = delta_a / kerr_a.abs();
            if roots[0].0 > 0.5 * n_res {
                Some(0.5 * roots[0].0)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Steady-state complex amplitude on a branch with photon number n:
/// alpha = i eps / (kappa_a/2 - i (delta_eff_a + K_a n)).
pub fn steady_alpha(n: f64, delta_eff_a: f64, kappa_a: f64, kerr_a: f64, eps: f64) -> Complex64 {
    let denom = Complex64::new(kappa_a / 2.0, -(delta_eff_a + kerr_a * n));
    Complex64::new(0.0, eps) / denom
}

/// Fraction of trajectories that bifurcate, with a binomial error bar.
/// Per-shot seeds derive from `seed ^ shot_index`; shots are independent and
/// the aggregation is order-independent under parallel execution.
pub fn escape_probability(
    p: &JbaParams,
    envelope_eps: &[f64],
    detuning_of_t_ghz: &[f64],
    dt_ns: f64,
    n_shots: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_shots < 100 {
        return Err(Error::InvalidParameter("n_shots must be >= 100".into()));
    }
    let hits = (0..n_shots)
        .into_par_iter()
        .map(|i| {
            let mut rng = shot_rng(seed, i as u64, STREAM_FIELD);
            integrate_with_rng(p, envelope_eps, detuning_of_t_ghz, dt_ns, Some(&mut rng))
                .map(|t| t.bifurcated as u64)
        })
        .try_reduce(|| 0u64, |a, b| Ok(a + b))?;
    let pb = hits as f64 / n_shots as f64;
    Ok((pb, (pb * (1.0 - pb) / n_shots as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> JbaParams {
        JbaParams::default()
    }

    fn drive_at(power_db: f64, detuning_mhz: f64) -> DriveConfig {
        DriveConfig::new(&p(), 6.4535 - detuning_mhz * 1e-3, power_db).unwrap()
    }

    #[test]
    fn kappa_consistency_enforced() {
        let mut bad = p();
        bad.kappa_ghz *= 1.001;
        assert!(bad.validate().is_err());
        assert!(p().validate().is_ok());
    }

    #[test]
    fn power_chain_reproduces_reference_flux() {
        let d = drive_at(-30.5, 25.0);
        let flux_per_s = d.epsilon * d.epsilon / p().kappa_a() * 1e9;
        assert!(
            (flux_per_s / 4.2e9 - 1.0).abs() < 0.02,
            "flux = {flux_per_s:.3e} /s"
        );
        // eps scales as sqrt(P).
        let d10 = drive_at(-20.5, 25.0);
        assert!((d10.epsilon / d.epsilon - 10f64.sqrt()).abs() < 1e-12);
        let dz = drive_at(f64::NEG_INFINITY, 25.0);
        assert_eq!(dz.epsilon, 0.0);
        // dB round trip.
        let back = epsilon_to_power_db(&p(), d.f_drive_ghz, d.epsilon, d.attenuation_db);
        assert!((back + 30.5).abs() < 1e-9);
    }

    #[test]
    fn thermal_occupation_quantum_floor() {
        let n = p().n_thermal();
        assert!((n - 0.00576).abs() < 1e-4, "n_th = {n}");
    }

    #[test]
    fn zero_drive_single_root() {
        let d = drive_at(f64::NEG_INFINITY, 17.0);
        let r = steady_states(&p(), &d, 0.0);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0], (0.0, Stability::Stable));
    }

    #[test]
    fn cubic_residual_small() {
        let d = drive_at(-35.0, 17.0);
        let delta_a = 2.0 * std::f64::consts::PI * 17e-3;
        for (n, _) in steady_states(&p(), &d, 0.0) {
            let lhs = n * ((delta_a + p().kerr_a() * n).powi(2) + p().kappa_a().powi(2) / 4.0);
            let rhs = d.epsilon * d.epsilon;
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-30), "n={n}");
        }
    }

    #[test]
    fn below_threshold_never_three_roots() {
        let det = 0.9 * bistability_threshold_a(p().kappa_a()) / (2.0 * std::f64::consts::PI);
        for db in -60..-20 {
            let d = drive_at(db as f64, det * 1e3);
            assert!(steady_states(&p(), &d, 0.0).len() == 1);
        }
        assert!(bistable_window(&p(), det).is_err());
    }

    #[test]
    fn window_exists_at_paper_detuning_and_widens() {
        let (lo, hi) = bistable_window(&p(), 17e-3).unwrap();
        assert!(lo < hi);
        // Three roots strictly inside the window.
        let eps_mid = 0.5 * (lo + hi);
        let roots = kerr_roots(
            2.0 * std::f64::consts::PI * 17e-3,
            p().kappa_a(),
            p().kerr_a(),
            eps_mid * eps_mid,
        );
        assert_eq!(roots.len(), 3);
        assert_eq!(roots[1].1, Stability::Unstable);
        // Window widens with detuning (in dB terms).
        let (lo2, hi2) = bistable_window(&p(), 25e-3).unwrap();
        assert!(hi2 / lo2 > hi / lo);
        // Kappa-scaled threshold detunings: 2 kappa is already bistable.
        assert!(bistable_window(&p(), 2.0 * p().kappa_ghz).is_ok());
    }

    #[test]
    fn pulled_roots_match_bare_when_pull_is_zero() {
        let delta_a = 2.0 * std::f64::consts::PI * 17e-3;
        let d = drive_at(-35.0, 17.0);
        let bare = kerr_roots(delta_a, p().kappa_a(), p().kerr_a(), d.epsilon * d.epsilon);
        let pulled = pulled_roots(
            delta_a,
            p().kappa_a(),
            p().kerr_a(),
            d.epsilon * d.epsilon,
            &|_| 0.0,
            300.0,
        );
        assert_eq!(bare.len(), pulled.len());
        for (b, q) in bare.iter().zip(&pulled) {
            assert!((b.0 - q).abs() < 1e-5 * (1.0 + b.0));
        }
    }

    #[test]
    fn noiseless_low_branch_convergence() {
        let (lo, _) = bistable_window(&p(), 17e-3).unwrap();
        let eps = 0.8 * lo;
        let dt = 0.85;
        let t_total = 12.0 / p().kappa_a();
        let n = (t_total / dt).ceil() as usize;
        let traj =
            integrate_noiseless(&p(), &vec![eps; n], &vec![17e-3; n], dt).unwrap();
        assert!(!traj.bifurcated);
        let roots = kerr_roots(
            2.0 * std::f64::consts::PI * 17e-3,
            p().kappa_a(),
            p().kerr_a(),
            eps * eps,
        );
        let n_final = traj.alpha.last().unwrap().norm_sqr();
        assert!(
            (n_final - roots[0].0).abs() / roots[0].0 < 0.05,
            "n_final={n_final} root={}",
            roots[0].0
        );
    }

    #[test]
    fn above_window_always_bifurcates_quickly() {
        let (_, hi) = bistable_window(&p(), 17e-3).unwrap();
        let eps = 1.3 * hi;
        let dt = 0.85;
        let n = (20.0 / p().kappa_a() / dt).ceil() as usize;
        for seed in 0..5 {
            let traj =
                integrate_trajectory(&p(), &vec![eps; n], &vec![17e-3; n], dt, seed).unwrap();
            assert!(traj.bifurcated);
            assert!(traj.t_bifurcation_ns.unwrap() < 10.0 / p().kappa_a());
        }
    }

    #[test]
    fn both_branches_stable_at_hold_for_a_microsecond() {
        let (lo, hi) = bistable_window(&p(), 17e-3).unwrap();
        let eps = lo * (hi / lo).powf(0.5);
        let delta_a = 2.0 * std::f64::consts::PI * 17e-3;
        let roots = kerr_roots(delta_a, p().kappa_a(), p().kerr_a(), eps * eps);
        assert_eq!(roots.len(), 3);
        let dt = 0.85;
        let n = (1000.0 / dt) as usize;
        for &(start, _) in [&roots[0], &roots[2]] {
            let mut alpha = steady_alpha(start, delta_a, p().kappa_a(), p().kerr_a(), eps);
            for _ in 0..n {
                alpha = field_step(
                    alpha,
                    delta_a,
                    p().kappa_a(),
                    p().kerr_a(),
                    eps,
                    dt,
                    Complex64::new(0.0, 0.0),
                );
            }
            assert!(
                (alpha.norm_sqr() - start).abs() / start < 0.05,
                "branch n={start} drifted to {}",
                alpha.norm_sqr()
            );
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let d = drive_at(-34.0, 17.0);
        let n = 500;
        let a = integrate_trajectory(&p(), &vec![d.epsilon; n], &vec![17e-3; n], 0.85, 7).unwrap();
        let b = integrate_trajectory(&p(), &vec![d.epsilon; n], &vec![17e-3; n], 0.85, 7).unwrap();
        assert_eq!(a.alpha, b.alpha);
        assert_eq!(a.t_bifurcation_ns, b.t_bifurcation_ns);
    }

    #[test]
    fn step_guard_and_grid_mismatch() {
        assert!(matches!(
            integrate_noiseless(&p(), &[0.0; 4], &[0.0; 4], 2.0),
            Err(Error::StepTooLarge(_))
        ));
        assert!(integrate_noiseless(&p(), &[0.0; 4], &[0.0; 3], 0.85).is_err());
    }

    #[test]
    fn escape_probability_limits() {
        let n = 300;
        let (pb0, _) =
            escape_probability(&p(), &vec![0.0; n], &vec![17e-3; n], 0.85, 200, 1).unwrap();
        assert_eq!(pb0, 0.0);
        let (_, hi) = bistable_window(&p(), 17e-3).unwrap();
        let (pb1, _) =
            escape_probability(&p(), &vec![1.4 * hi; n], &vec![17e-3; n], 0.85, 200, 1).unwrap();
        assert_eq!(pb1, 1.0);
        assert!(escape_probability(&p(), &vec![0.0; n], &vec![17e-3; n], 0.85, 50, 1).is_err());
    }
}
