//! Least-squares fits used by the experiments: damped cosine (free or fixed
//! decay), damped cosine with quadrature (detuned fringes), and exponential
//! decay. Nonlinear parameters are scanned on a grid and refined by
//! golden-section search; linear parameters solve in closed form.

use crate::error::{Error, Result};
use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OscillationFit {
    pub f_ghz: f64,
    pub tau_ns: f64,
    pub offset: f64,
    /// Cosine amplitude; for y = c - b exp(-t/tau) cos(2 pi f t) this is b.
    pub amp_cos: f64,
    pub amp_sin: f64,
    /// Peak-to-peak oscillation amplitude at t = 0 (2 sqrt(A^2 + B^2)).
    pub peak_to_peak: f64,
    pub residual: f64,
    /// Residual-based one-sigma estimate of peak_to_peak.
    pub peak_to_peak_err: f64,
    /// Profile-curvature one-sigma estimates (infinite when the residual is
    /// flat along the parameter).
    pub f_err_ghz: f64,
    pub tau_err_ns: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub tau_ns: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub residual: f64,
    pub tau_err_ns: f64,
    pub offset_err: f64,
    pub amplitude_err: f64,
}

fn check_grid(ts: &[f64], ys: &[f64], min_len: usize) -> Result<()> {
    if ts.len() != ys.len() || ts.len() < min_len {
        return Err(Error::Fit(format!(
            "need at least {min_len} samples with matching time grid"
        )));
    }
    Ok(())
}

/// Residual and linear coefficients (c, b) of y = c + b * basis(t).
fn lin2(ts: &[f64], ys: &[f64], basis: impl Fn(f64) -> f64) -> (f64, f64, f64) {
    let n = ts.len() as f64;
    let (mut sb, mut sbb, mut sy, mut sby) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in ts.iter().zip(ys) {
        let v = basis(t);
        sb += v;
        sbb += v * v;
        sy += y;
        sby += v * y;
    }
    let m = Matrix2::new(n, sb, sb, sbb);
    let rhs = Vector2::new(sy, sby);
    let sol = m.lu().solve(&rhs).unwrap_or_else(|| Vector2::new(sy / n, 0.0));
    let (c, b) = (sol[0], sol[1]);
    let mut r = 0.0;
    for (&t, &y) in ts.iter().zip(ys) {
        let e = c + b * basis(t) - y;
        r += e * e;
    }
    (c, b, r)
}

/// Residual and coefficients (c, a, b) of y = c + a u(t) + b v(t).
fn lin3(
    ts: &[f64],
    ys: &[f64],
    u: impl Fn(f64) -> f64,
    v: impl Fn(f64) -> f64,
) -> (f64, f64, f64, f64) {
    let n = ts.len() as f64;
    let (mut su, mut sv, mut suu, mut svv, mut suv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut suy, mut svy) = (0.0, 0.0, 0.0);
    for (&t, &y) in ts.iter().zip(ys) {
        let (a, b) = (u(t), v(t));
        su += a;
        sv += b;
        suu += a * a;
        svv += b * b;
        suv += a * b;
        sy += y;
        suy += a * y;
        svy += b * y;
    }
    let m = Matrix3::new(n, su, sv, su, suu, suv, sv, suv, svv);
    let rhs = Vector3::new(sy, suy, svy);
    let sol = m
        .lu()
        .solve(&rhs)
        .unwrap_or_else(|| Vector3::new(sy / n, 0.0, 0.0));
    let (c, a, b) = (sol[0], sol[1], sol[2]);
    let mut r = 0.0;
    for (&t, &y) in ts.iter().zip(ys) {
        let e = c + a * u(t) + b * v(t) - y;
        r += e * e;
    }
    (c, a, b, r)
}

/// Golden-section minimization of a 1-d function on [lo, hi].
fn golden_min(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

fn ptp_err(residual: f64, n: usize) -> f64 {
    (residual.max(1e-12) / (n.saturating_sub(3).max(1)) as f64).sqrt() * 2.0
        / (n as f64 / 2.0).sqrt()
}

/// Residual variance estimate for `n` samples and `p` fitted parameters.
fn s2(residual: f64, n: usize, p: usize) -> f64 {
    residual.max(1e-14) / n.saturating_sub(p).max(1) as f64
}

/// One-sigma error of a nonlinear parameter from the curvature of the
/// profiled sum of squares: var = 2 s^2 / (d^2 SSE / dx^2).
fn profile_err(s2: f64, x0: f64, sse: impl Fn(f64) -> f64) -> f64 {
    let h = 0.02 * x0.abs().max(1e-12);
    let d2 = (sse(x0 + h) - 2.0 * sse(x0) + sse(x0 - h)) / (h * h);
    if d2 > 0.0 {
        (2.0 * s2 / d2).sqrt()
    } else {
        f64::INFINITY
    }
}

/// Unit covariance diagonal (multiply by s^2) of (c, b) in y = c + b basis(t).
fn lin2_unit_var(ts: &[f64], basis: impl Fn(f64) -> f64) -> (f64, f64) {
    let n = ts.len() as f64;
    let (mut sb, mut sbb) = (0.0, 0.0);
    for &t in ts {
        let v = basis(t);
        sb += v;
        sbb += v * v;
    }
    let det = (n * sbb - sb * sb).max(1e-300);
    (sbb / det, n / det)
}

/// Fits y = c - b exp(-t/tau) cos(2 pi f t) with free decay time.
/// `f_guess_ghz` seeds the frequency scan (+-30%).
pub fn fit_damped_cosine(ts: &[f64], ys: &[f64], f_guess_ghz: f64) -> Result<OscillationFit> {
    check_grid(ts, ys, 6)?;
    if !(f_guess_ghz > 0.0) {
        return Err(Error::Fit("frequency guess must be > 0".into()));
    }
    let span = ts.last().unwrap() - ts[0];
    if span * f_guess_ghz < 1.5 {
        return Err(Error::Fit(format!(
            "time span {span} ns covers fewer than 1.5 periods at the guess frequency"
        )));
    }
    let resid = |f: f64, tau: f64| {
        lin2(ts, ys, |t| -((-t / tau).exp() * (2.0 * std::f64::consts::PI * f * t).cos())).2
    };
    let (tau_lo, tau_hi) = (span / 10.0, span * 30.0);
    let mut best = (f64::INFINITY, f_guess_ghz, span);
    for i in 0..=60 {
        let f = f_guess_ghz * (0.7 + 0.6 * i as f64 / 60.0);
        for j in 0..=24 {
            let tau = tau_lo * (tau_hi / tau_lo).powf(j as f64 / 24.0);
            let r = resid(f, tau);
            if r < best.0 {
                best = (r, f, tau);
            }
        }
    }
    let (_, mut f, mut tau) = best;
    for _ in 0..3 {
        f = golden_min(f * 0.97, f * 1.03, 40, |x| resid(x, tau));
        tau = golden_min(tau * 0.6, tau * 1.6, 50, |x| resid(f, x));
    }
    let (c, b, r) = lin2(ts, ys, |t| {
        -((-t / tau).exp() * (2.0 * std::f64::consts::PI * f * t).cos())
    });
    let v = s2(r, ts.len(), 4);
    Ok(OscillationFit {
        f_ghz: f,
        tau_ns: tau,
        offset: c,
        amp_cos: b,
        amp_sin: 0.0,
        peak_to_peak: 2.0 * b,
        residual: r,
        peak_to_peak_err: ptp_err(r, ts.len()),
        f_err_ghz: profile_err(v, f, |x| resid(x, tau)),
        tau_err_ns: profile_err(v, tau, |x| resid(f, x)),
    })
}

/// Fits y = c - b exp(-t/tau_fixed) cos(2 pi f t) with the decay time held
/// fixed; only the frequency is scanned (+-15%).
pub fn fit_damped_cosine_fixed_tau(
    ts: &[f64],
    ys: &[f64],
    f_guess_ghz: f64,
    tau_ns: f64,
) -> Result<OscillationFit> {
    check_grid(ts, ys, 5)?;
    let resid = |f: f64| {
        lin2(ts, ys, |t| {
            -((-t / tau_ns).exp() * (2.0 * std::f64::consts::PI * f * t).cos())
        })
        .2
    };
    let mut best = (f64::INFINITY, f_guess_ghz);
    for i in 0..=30 {
        let f = f_guess_ghz * (0.85 + 0.3 * i as f64 / 30.0);
        let r = resid(f);
        if r < best.0 {
            best = (r, f);
        }
    }
    let f = golden_min(best.1 * 0.98, best.1 * 1.02, 40, resid);
    let (c, b, r) = lin2(ts, ys, |t| {
        -((-t / tau_ns).exp() * (2.0 * std::f64::consts::PI * f * t).cos())
    });
    let v = s2(r, ts.len(), 3);
    Ok(OscillationFit {
        f_ghz: f,
        tau_ns,
        offset: c,
        amp_cos: b,
        amp_sin: 0.0,
        peak_to_peak: 2.0 * b,
        residual: r,
        peak_to_peak_err: ptp_err(r, ts.len()),
        f_err_ghz: profile_err(v, f, resid),
        // Held fixed, not estimated.
        tau_err_ns: 0.0,
    })
}

/// Fits y = c + exp(-t/tau) (A cos 2 pi f t + B sin 2 pi f t), for detuned
/// fringes whose phase at t = 0 is not locked.
pub fn fit_detuned_fringe(ts: &[f64], ys: &[f64], f_guess_ghz: f64) -> Result<OscillationFit> {
    check_grid(ts, ys, 7)?;
    let span = ts.last().unwrap() - ts[0];
    if span * f_guess_ghz < 1.5 {
        return Err(Error::Fit(
            "time span covers fewer than 1.5 fringe periods".into(),
        ));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let resid = |f: f64, tau: f64| {
        lin3(
            ts,
            ys,
            |t| (-t / tau).exp() * (two_pi * f * t).cos(),
            |t| (-t / tau).exp() * (two_pi * f * t).sin(),
        )
        .3
    };
    let (tau_lo, tau_hi) = (span / 10.0, span * 30.0);
    let mut best = (f64::INFINITY, f_guess_ghz, span);
    for i in 0..=60 {
        let f = f_guess_ghz * (0.7 + 0.6 * i as f64 / 60.0);
        for j in 0..=24 {
            let tau = tau_lo * (tau_hi / tau_lo).powf(j as f64 / 24.0);
            let r = resid(f, tau);
            if r < best.0 {
                best = (r, f, tau);
            }
        }
    }
    let (_, mut f, mut tau) = best;
    for _ in 0..3 {
        f = golden_min(f * 0.97, f * 1.03, 40, |x| resid(x, tau));
        tau = golden_min(tau * 0.6, tau * 1.6, 50, |x| resid(f, x));
    }
    let (c, a, b, r) = lin3(
        ts,
        ys,
        |t| (-t / tau).exp() * (two_pi * f * t).cos(),
        |t| (-t / tau).exp() * (two_pi * f * t).sin(),
    );
    let v = s2(r, ts.len(), 5);
    Ok(OscillationFit {
        f_ghz: f,
        tau_ns: tau,
        offset: c,
        amp_cos: a,
        amp_sin: b,
        peak_to_peak: 2.0 * (a * a + b * b).sqrt(),
        residual: r,
        peak_to_peak_err: ptp_err(r, ts.len()),
        f_err_ghz: profile_err(v, f, |x| resid(x, tau)),
        tau_err_ns: profile_err(v, tau, |x| resid(f, x)),
    })
}

/// Fits y = c + b exp(-t/tau).
pub fn fit_exponential(ts: &[f64], ys: &[f64]) -> Result<ExponentialFit> {
    check_grid(ts, ys, 4)?;
    let span = (ts.last().unwrap() - ts[0]).max(1e-9);
    let resid = |tau: f64| lin2(ts, ys, |t| (-t / tau).exp()).2;
    let (tau_lo, tau_hi) = (span / 50.0, span * 50.0);
    let mut best = (f64::INFINITY, span);
    for j in 0..=80 {
        let tau = tau_lo * (tau_hi / tau_lo).powf(j as f64 / 80.0);
        let r = resid(tau);
        if r < best.0 {
            best = (r, tau);
        }
    }
    let mut tau = best.1;
    for _ in 0..3 {
        tau = golden_min(tau * 0.6, tau * 1.6, 60, resid);
    }
    let (c, b, r) = lin2(ts, ys, |t| (-t / tau).exp());
    let v = s2(r, ts.len(), 3);
    let (uc, ub) = lin2_unit_var(ts, |t| (-t / tau).exp());
    Ok(ExponentialFit {
        tau_ns: tau,
        offset: c,
        amplitude: b,
        residual: r,
        tau_err_ns: profile_err(v, tau, resid),
        offset_err: (v * uc).sqrt(),
        amplitude_err: (v * ub).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, step: f64) -> Vec<f64> {
        (0..n).map(|k| k as f64 * step).collect()
    }

    #[test]
    fn damped_cosine_round_trip_to_a_tenth_percent() {
        let ts = grid(101, 4.0);
        let (f0, tau0, c0, b0) = (0.029, 426.0, 0.515, 0.468);
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| c0 - b0 * (-t / tau0).exp() * (2.0 * std::f64::consts::PI * f0 * t).cos())
            .collect();
        let fit = fit_damped_cosine(&ts, &ys, 0.030).unwrap();
        assert!((fit.f_ghz / f0 - 1.0).abs() < 1e-3, "f = {}", fit.f_ghz);
        assert!((fit.tau_ns / tau0 - 1.0).abs() < 1e-3, "tau = {}", fit.tau_ns);
        assert!(
            (fit.peak_to_peak / (2.0 * b0) - 1.0).abs() < 1e-3,
            "ptp = {}",
            fit.peak_to_peak
        );
        assert!((fit.offset / c0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn fixed_tau_amplitude_round_trip() {
        let ts = grid(31, 4.0);
        let (f0, tau0, v) = (0.029, 361.0, 0.874);
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| {
                0.5 * (1.0 - v * (-t / tau0).exp() * (2.0 * std::f64::consts::PI * f0 * t).cos())
            })
            .collect();
        let fit = fit_damped_cosine_fixed_tau(&ts, &ys, 0.029, tau0).unwrap();
        assert!((fit.peak_to_peak / v - 1.0).abs() < 1e-3, "{}", fit.peak_to_peak);
        assert!((fit.f_ghz / f0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn detuned_fringe_recovers_phase_split_amplitude() {
        let ts = grid(81, 8.0);
        let (f0, tau0) = (5e-3, 800.0);
        let (a0, b0) = (0.3, 0.25);
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let w = 2.0 * std::f64::consts::PI * f0 * t;
                0.5 + (-t / tau0).exp() * (a0 * w.cos() + b0 * w.sin())
            })
            .collect();
        let fit = fit_detuned_fringe(&ts, &ys, 5.5e-3).unwrap();
        let ptp0 = 2.0 * a0.hypot(b0);
        assert!((fit.peak_to_peak / ptp0 - 1.0).abs() < 1e-3);
        assert!((fit.f_ghz / f0 - 1.0).abs() < 1e-3);
        assert!((fit.tau_ns / tau0 - 1.0).abs() < 2e-3);
    }

    #[test]
    fn exponential_round_trip_and_guards() {
        let ts = grid(41, 25.0);
        let (tau0, c0, b0) = (450.0, 0.07, 0.85);
        let ys: Vec<f64> = ts.iter().map(|&t| c0 + b0 * (-t / tau0).exp()).collect();
        let fit = fit_exponential(&ts, &ys).unwrap();
        assert!((fit.tau_ns / tau0 - 1.0).abs() < 1e-3);
        assert!((fit.amplitude / b0 - 1.0).abs() < 1e-3);
        assert!((fit.offset - c0).abs() < 1e-4);
        assert!(fit_exponential(&ts[..2], &ys[..2]).is_err());
        // Too few periods for an oscillation fit.
        assert!(fit_damped_cosine(&ts[..6], &ys[..6], 1e-5).is_err());
    }
}
