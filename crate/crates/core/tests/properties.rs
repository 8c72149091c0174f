//! Cross-module invariants: spectrum symmetry and convergence, bifurcation
//! thresholds checked against brute-force oracles, ensemble determinism,
//! monotone switching curves, and fit/interval round-trips.

use jba_readout::config::SimConfig;
use jba_readout::dispersive::CouplingParams;
use jba_readout::experiments::coherence::extract_tphi;
use jba_readout::experiments::fit::{fit_damped_cosine, fit_detuned_fringe, fit_exponential};
use jba_readout::experiments::scurve::{best_contrast, switching_curve};
use jba_readout::experiments::{wilson_interval, ReadoutSettings};
use jba_readout::jba::{
    bistability_threshold_a, bistable_window, epsilon_to_power_db, pulled_roots,
    pulled_window_eps2, JbaParams,
};
use jba_readout::pulse::{
    compile, pi_pulse, readout_pulse, Sequence, Transition, PI_PULSE_DURATION_NS,
};
use jba_readout::readout::{run_ensemble, OperatingPoint, ReadoutContext};
use jba_readout::transmon::{diagonalize, purcell_t1_us, FluxPoint, TransmonParams};
use jba_readout::Error;
use proptest::prelude::*;

fn fig2_op() -> OperatingPoint {
    SimConfig::default().operating_point().expect("default operating point")
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

// ---------------------------------------------------------------- spectrum

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The SQUID spectrum is even in flux and periodic with period one.
    #[test]
    fn spectrum_is_symmetric_and_periodic_in_flux(
        phi in -0.45f64..0.45,
        ej in 15.0f64..30.0,
        ec in 0.9f64..1.6,
    ) {
        let p = TransmonParams { ej_max_ghz: ej, ec_cp_ghz: ec, ..TransmonParams::default() };
        let f = |x: f64| diagonalize(&p, FluxPoint::new(x).unwrap()).unwrap().f01_ghz;
        prop_assert!((f(phi) - f(-phi)).abs() < 1e-9);
        prop_assert!((f(phi) - f(phi + 1.0)).abs() < 1e-9);
    }

    /// Doubling the charge cutoff moves the transition frequencies by less
    /// than a part in 1e8: the default basis is converged.
    #[test]
    fn spectrum_converges_in_charge_cutoff(
        phi in 0.0f64..0.3,
        ej in 15.0f64..30.0,
    ) {
        let small = TransmonParams { ej_max_ghz: ej, charge_cutoff: 15, ..TransmonParams::default() };
        let large = TransmonParams { charge_cutoff: 30, ..small };
        let flux = FluxPoint::new(phi).unwrap();
        let a = diagonalize(&small, flux).unwrap();
        let b = diagonalize(&large, flux).unwrap();
        prop_assert!((a.f01_ghz - b.f01_ghz).abs() / b.f01_ghz < 1e-8);
        prop_assert!((a.f12_ghz - b.f12_ghz).abs() / b.f12_ghz < 1e-8);
    }

    /// The radiative lifetime scales as 1/g^2 and delta^2.
    #[test]
    fn purcell_lifetime_scales_with_coupling_and_detuning(
        g in 0.02f64..0.08,
        delta in 0.2f64..0.8,
        kappa in 0.005f64..0.02,
    ) {
        let base = purcell_t1_us(g, delta, kappa).unwrap();
        let half_g = purcell_t1_us(2.0 * g, delta, kappa).unwrap();
        let four_d = purcell_t1_us(g, 2.0 * delta, kappa).unwrap();
        prop_assert!((half_g * 4.0 - base).abs() / base < 1e-9);
        prop_assert!((four_d / 4.0 - base).abs() / base < 1e-9);
    }
}

// ------------------------------------------------------------- bifurcation

/// Brute-force bistability oracle: the steady-state drive power
/// eps^2(n) = n ((delta + K n)^2 + kappa^2/4) is non-monotone in n exactly
/// when three roots exist. Scans values only, no discriminant.
fn non_monotone_eps2(delta_a: f64, kappa_a: f64, kerr_a: f64) -> bool {
    let n_star = 2.0 * delta_a / (3.0 * kerr_a.abs());
    let eps2 = |n: f64| n * ((delta_a + kerr_a * n).powi(2) + kappa_a * kappa_a / 4.0);
    let m = 8000;
    let (lo, hi) = (0.7 * n_star, 1.3 * n_star);
    let mut prev = eps2(lo);
    for i in 1..=m {
        let cur = eps2(lo + (hi - lo) * i as f64 / m as f64);
        if cur <= prev {
            return true;
        }
        prev = cur;
    }
    false
}

/// The detuning threshold for bistability sits at (sqrt(3)/2) kappa: bisect
/// the value-scan oracle and compare to the closed form at 1e-6 relative.
#[test]
fn bistability_threshold_matches_value_scan() {
    let p = JbaParams::default();
    let (kappa_a, kerr_a) = (p.kappa_a(), p.kerr_a());
    let analytic = bistability_threshold_a(kappa_a);
    let mut lo = 0.5 * analytic;
    let mut hi = 2.0 * analytic;
    assert!(!non_monotone_eps2(lo, kappa_a, kerr_a));
    assert!(non_monotone_eps2(hi, kappa_a, kerr_a));
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if non_monotone_eps2(mid, kappa_a, kerr_a) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let scanned = 0.5 * (lo + hi);
    assert!(
        (scanned - analytic).abs() / analytic < 1e-6,
        "scanned {scanned:.9} vs analytic {analytic:.9} rad/ns"
    );

    // The closed-form window agrees on both sides of the threshold.
    let thr_ghz = analytic / (2.0 * std::f64::consts::PI);
    assert!(bistable_window(&p, thr_ghz * 0.999).is_err());
    let (e_lo, e_hi) = bistable_window(&p, thr_ghz * 1.2).unwrap();
    assert!(0.0 < e_lo && e_lo < e_hi);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The driven-Kerr steady state has one or three solutions, and each
    /// returned root satisfies the steady-state equation.
    #[test]
    fn steady_state_roots_count_and_residual(
        detuning in 0.02f64..0.2,
        kerr in -2e-3f64..-2e-4,
        eps2 in 0.01f64..2.0,
    ) {
        let p = JbaParams::new(6.4535, 685.0, 0.72, kerr, 0.06);
        let delta_a = 2.0 * std::f64::consts::PI * detuning;
        let (kappa_a, kerr_a) = (p.kappa_a(), p.kerr_a());
        let n_max = 3.0 * delta_a / kerr_a.abs();
        let roots = pulled_roots(delta_a, kappa_a, kerr_a, eps2, &|_| 0.0, n_max);
        prop_assert!(roots.len() == 1 || roots.len() == 3, "{} roots", roots.len());
        for n in roots {
            let d = delta_a + kerr_a * n;
            let res = n * (d * d + kappa_a * kappa_a / 4.0) - eps2;
            prop_assert!(res.abs() < 1e-10 * eps2.max(1.0), "residual {res:.3e}");
        }
    }
}

/// With the state-0 pull table the drive window with three steady states is
/// non-empty at the operating detuning, and its edges map to distinct powers:
/// sweeping up and down traverses a hysteresis loop.
#[test]
fn pulled_bistable_window_gives_hysteresis_loop() {
    let op = fig2_op();
    let delta_base_a = 2.0 * std::f64::consts::PI * op.readout_detuning_ghz;
    let (kappa_a, kerr_a) = (op.jba.kappa_a(), op.jba.kerr_a());
    let pull = |n: f64| op.joint.pull_ghz(0, n);
    let n_max = 2.0 * delta_base_a / kerr_a.abs();
    let (e2_lo, e2_hi) = pulled_window_eps2(delta_base_a, kappa_a, kerr_a, &pull, n_max)
        .expect("bistable window at the operating point");
    assert!(0.0 < e2_lo && e2_lo < e2_hi);

    let att = 77.0;
    let p_lo = epsilon_to_power_db(&op.jba, op.f_drive_ghz, e2_lo.sqrt(), att);
    let p_hi = epsilon_to_power_db(&op.jba, op.f_drive_ghz, e2_hi.sqrt(), att);
    assert!(p_hi - p_lo > 0.1, "loop width {:.3} dB", p_hi - p_lo);

    // One root below the window, three inside.
    let count = |e2: f64| pulled_roots(delta_base_a, kappa_a, kerr_a, e2, &pull, n_max).len();
    assert_eq!(count(e2_lo * 0.8), 1);
    assert_eq!(count(0.5 * (e2_lo + e2_hi)), 3);
    assert_eq!(count(e2_hi * 1.2), 1);
}

// ---------------------------------------------------------------- ensembles

/// Same seed, same bits; a different seed moves the sampled outcomes.
#[test]
fn ensembles_are_seed_deterministic() {
    let op = fig2_op();
    let settings = ReadoutSettings::long_hold(-34.8);
    let env = settings.envelope().unwrap();
    let seq = Sequence::new().readout("readout", 0.0, env);
    let ctx = ReadoutContext::build(&op, &seq, settings.power_db, 0.0).unwrap();
    let a = run_ensemble(&op, &ctx, 300, 7101).unwrap();
    let b = run_ensemble(&op, &ctx, 300, 7101).unwrap();
    assert_eq!(a.p_b, b.p_b);
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.outcomes, rb.outcomes);
        assert_eq!(ra.i_means, rb.i_means);
        assert_eq!(ra.nbar_hold, rb.nbar_hold);
    }
    let c = run_ensemble(&op, &ctx, 300, 7102).unwrap();
    assert_ne!(
        a.records[0].i_means, c.records[0].i_means,
        "independent seeds should draw different noise"
    );
}

/// Switching probability is monotone in drive power within statistics, and
/// spans the full range across the default grid.
#[test]
fn switching_curve_rises_monotonically() {
    let op = fig2_op();
    let settings = ReadoutSettings::long_hold(-34.8);
    let powers = linspace(-36.5, -33.0, 10);
    let s = switching_curve(&op, &settings, 0, &powers, 0.0, 300, 4242).unwrap();
    for i in 1..s.p_b.len() {
        let slack = 3.0 * (s.p_b_err[i].powi(2) + s.p_b_err[i - 1].powi(2)).sqrt();
        assert!(
            s.p_b[i] >= s.p_b[i - 1] - slack,
            "p_B fell from {:.3} to {:.3} at {:.2} dB",
            s.p_b[i - 1],
            s.p_b[i],
            s.powers_db[i]
        );
    }
    assert!(s.p_b.last().unwrap() - s.p_b[0] > 0.9);
}

/// Replacing the shared random numbers (new master seed) moves every point of
/// a curve by less than a few standard errors: pairing cancels noise but does
/// not bias the means.
#[test]
fn seed_choice_does_not_bias_curves() {
    let op = fig2_op();
    let settings = ReadoutSettings::long_hold(-34.8);
    let powers = linspace(-37.5, -34.0, 8);
    let a = switching_curve(&op, &settings, 1, &powers, 0.0, 400, 11).unwrap();
    let b = switching_curve(&op, &settings, 1, &powers, 0.0, 400, 987654321).unwrap();
    for i in 0..powers.len() {
        let sigma = (a.p_b_err[i].powi(2) + b.p_b_err[i].powi(2)).sqrt().max(1e-3);
        assert!(
            (a.p_b[i] - b.p_b[i]).abs() < 4.0 * sigma,
            "seeds disagree by {:.3} at {:.2} dB (sigma {:.3})",
            (a.p_b[i] - b.p_b[i]).abs(),
            powers[i],
            sigma
        );
    }
}

/// Shelving the excited state to level 2 never reads out worse than the
/// direct map at the same operating point (within two standard errors).
#[test]
fn shelved_contrast_at_least_direct() {
    let op = fig2_op();
    let settings = ReadoutSettings::long_hold(-34.8);
    let powers = linspace(-38.55, -33.3, 22);
    let s0 = switching_curve(&op, &settings, 0, &powers, 0.0, 400, 20260814).unwrap();
    let s1 = switching_curve(&op, &settings, 1, &powers, 0.0, 400, 20260814).unwrap();
    let s2 = switching_curve(&op, &settings, 2, &powers, 0.0, 400, 20260814).unwrap();
    let direct = best_contrast(&s0, &s1).unwrap();
    let shelved = best_contrast(&s0, &s2).unwrap();
    let sigma = 1.0 / (400f64).sqrt();
    assert!(
        shelved.contrast >= direct.contrast - 2.0 * sigma,
        "shelved {:.3} vs direct {:.3}",
        shelved.contrast,
        direct.contrast
    );
}

// --------------------------------------------------------------- sequences

/// A transfer pulse carries unit area regardless of transition.
#[test]
fn pi_pulse_area_is_pi() {
    for tr in [Transition::Q01, Transition::Q12] {
        let p = pi_pulse(tr);
        let area = 2.0 * std::f64::consts::PI * p.peak_rabi_ghz() * p.duration_ns;
        assert!((area - std::f64::consts::PI).abs() < 1e-12);
    }
}

/// Overlapping events are rejected by name; disjoint ones compile.
#[test]
fn overlapping_events_are_rejected() {
    let env = readout_pulse(15.0, 250.0, 700.0, 0.8).unwrap();
    let dur = env.duration_ns();
    let bad = Sequence::new()
        .readout("first", 0.0, env)
        .readout("second", dur - 5.0, env);
    match compile(&bad, 0.85) {
        Err(Error::Overlap(msg)) => {
            assert!(msg.contains("first") && msg.contains("second"));
        }
        other => panic!("expected overlap rejection, got {other:?}"),
    }

    let ok = Sequence::new()
        .control("pi01", -PI_PULSE_DURATION_NS, pi_pulse(Transition::Q01))
        .readout("readout", 0.0, env);
    assert!(compile(&ok, 0.85).is_ok());
}

// --------------------------------------------------------------------- fits

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Noiseless damped cosines round-trip through the fitter to 0.1%.
    #[test]
    fn damped_cosine_fit_round_trips(
        f in 0.015f64..0.045,
        tau in 250.0f64..1000.0,
        offset in 0.35f64..0.55,
        amp in 0.15f64..0.4,
    ) {
        let ts: Vec<f64> = (0..41).map(|i| 4.0 * i as f64).collect();
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| offset - amp * (-t / tau).exp() * (2.0 * std::f64::consts::PI * f * t).cos())
            .collect();
        let fit = fit_damped_cosine(&ts, &ys, f * 1.13).unwrap();
        prop_assert!((fit.f_ghz - f).abs() / f < 1e-3);
        prop_assert!((fit.tau_ns - tau).abs() / tau < 1e-3);
        prop_assert!((fit.peak_to_peak - 2.0 * amp).abs() / (2.0 * amp) < 1e-3);
    }

    /// Noiseless detuned fringes round-trip, including the frequency offset.
    #[test]
    fn fringe_fit_round_trips(
        f in 3e-3f64..8e-3,
        tau in 300.0f64..900.0,
        amp in 0.2f64..0.45,
    ) {
        let ts: Vec<f64> = (0..31).map(|i| 20.0 * i as f64).collect();
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| 0.5 + amp * (-t / tau).exp() * (2.0 * std::f64::consts::PI * f * t).cos())
            .collect();
        let fit = fit_detuned_fringe(&ts, &ys, f * 0.9).unwrap();
        prop_assert!((fit.f_ghz - f).abs() / f < 1e-3);
        prop_assert!((fit.tau_ns - tau).abs() / tau < 1e-3);
    }

    /// Noiseless exponentials round-trip through the decay fitter to 0.1%.
    #[test]
    fn exponential_fit_round_trips(
        tau in 150.0f64..800.0,
        offset in 0.02f64..0.2,
        amp in 0.4f64..0.8,
    ) {
        let ts: Vec<f64> = (0..25).map(|i| 100.0 * i as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|&t| offset + amp * (-t / tau).exp()).collect();
        let fit = fit_exponential(&ts, &ys).unwrap();
        prop_assert!((fit.tau_ns - tau).abs() / tau < 1e-3);
        prop_assert!((fit.offset - offset).abs() < 1e-3);
        prop_assert!((fit.amplitude - amp).abs() / amp < 1e-3);
    }

    /// The dephasing-time interval brackets its center and all four corner
    /// evaluations of 1/Tphi = 1/T2 - 1/(2 T1).
    #[test]
    fn tphi_interval_covers_corners(
        t1 in 300.0f64..800.0,
        r in 0.7f64..1.5,
        e1_frac in 0.0f64..0.12,
        e2_frac in 0.0f64..0.12,
    ) {
        let t2 = r * t1;
        let (e1, e2) = (e1_frac * t1, e2_frac * t2);
        prop_assume!(1.0 / (t2 + e2) - 0.5 / (t1 - e1) > 1e-9);
        let (center, (lo, hi)) = extract_tphi(t2, e2, t1, e1).unwrap();
        prop_assert!(lo > 0.0 && lo <= center && center <= hi);
        for (tt2, tt1) in [
            (t2 - e2, t1 - e1),
            (t2 - e2, t1 + e1),
            (t2 + e2, t1 - e1),
            (t2 + e2, t1 + e1),
        ] {
            let corner = 1.0 / (1.0 / tt2 - 0.5 / tt1);
            prop_assert!(corner >= lo - 1e-9 && corner <= hi + 1e-9);
        }
    }

    /// Binomial intervals contain the point estimate, stay inside [0, 1],
    /// and tighten with more shots.
    #[test]
    fn wilson_interval_is_sane(n in 20usize..5000, num in 0u32..1000) {
        let k = (num as usize * n) / 1000;
        let (lo, hi) = wilson_interval(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
        let (lo4, hi4) = wilson_interval(4 * k, 4 * n);
        prop_assert!(hi4 - lo4 <= hi - lo + 1e-12);
    }
}

// ------------------------------------------------------------------- config

/// The canonical echo of a configuration parses back to the same hash, and
/// any real change moves the hash.
#[test]
fn config_echo_round_trips_hash() {
    let cfg = SimConfig::default();
    let echo = cfg.canonical_toml().unwrap();
    let back = SimConfig::parse(&echo).unwrap();
    assert_eq!(cfg.hash_hex().unwrap(), back.hash_hex().unwrap());

    let mut changed = cfg.clone();
    changed.run.shots += 1;
    assert_ne!(cfg.hash_hex().unwrap(), changed.hash_hex().unwrap());
}

/// Misspelled keys are parse errors, not silent defaults.
#[test]
fn unknown_config_keys_are_rejected() {
    let err = SimConfig::parse("[device]\nej_ghz = 21.0\nbogus_key = 1.0\n").unwrap_err();
    match err {
        Error::Config(msg) => assert!(msg.contains("bogus_key")),
        other => panic!("expected config error, got {other:?}"),
    }
}
