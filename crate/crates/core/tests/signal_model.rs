use std::f64::consts::PI;

use pmn_core::signal::{array_response, make_ssb_schedule, transmit_receive, PathParams, ReceiveOptions};
use pmn_core::{Complex64, Error, SystemConfig};
use proptest::prelude::*;

fn small_cfg() -> SystemConfig {
    SystemConfig {
        occupied_subcarriers: 24,
        first_subcarrier: 3,
        ..SystemConfig::default()
    }
}

/// Direct evaluation of y = Σ b e^{-j2πnτΔf} e^{j2πt f T_s} a aᵀ w s.
fn oracle_sample(
    paths: &[PathParams],
    cfg: &SystemConfig,
    beam: &[Complex64],
    pilot: Complex64,
    n_abs: usize,
    t: usize,
    m: usize,
) -> Complex64 {
    let df = cfg.bandwidth_hz / cfg.num_subcarriers as f64;
    let ts = cfg.num_subcarriers as f64 / cfg.bandwidth_hz + cfg.cp_duration_s;
    let mut y = Complex64::new(0.0, 0.0);
    for p in paths {
        let s = p.angle_rad.sin();
        let a = |i: usize| Complex64::from_polar(1.0, PI * i as f64 * s);
        let atw: Complex64 = (0..beam.len()).map(|i| a(i) * beam[i]).sum();
        let phase = -2.0 * PI * n_abs as f64 * p.delay_s * df + 2.0 * PI * t as f64 * p.doppler_hz * ts;
        y += p.amplitude * Complex64::from_polar(1.0, phase) * a(m) * atw * pilot;
    }
    y
}

fn arb_path() -> impl Strategy<Value = PathParams> {
    (0.0..1.5e-6f64, -2000.0..2000.0f64, -1.5..1.5f64, 0.1..2.0f64, 0.0..6.28f64)
        .prop_map(|(d, f, th, amp, ph)| PathParams::target(d, f, th, Complex64::from_polar(amp, ph)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn noiseless_cube_matches_direct_evaluation(paths in prop::collection::vec(arb_path(), 1..5), seed in 0u64..1000) {
        let cfg = small_cfg();
        let sched = make_ssb_schedule(&cfg, seed);
        let cube = transmit_receive(&paths, &sched, &cfg, &ReceiveOptions::noiseless(2)).unwrap();
        for b in 0..2 {
            for g in 1..=cfg.num_ssb {
                for k in 1..=3 {
                    let slot = (g - 1) * 3 + (k - 1);
                    let t = b * cfg.burst_spacing + 4 * g + k;
                    for n in [0, 7, 23] {
                        for m in 0..cfg.num_antennas {
                            let want = oracle_sample(&paths, &cfg, sched.beam(g), sched.pilot(slot, n), cfg.first_subcarrier + n, t, m);
                            let got = cube.get(b, slot, n, m);
                            prop_assert!((got - want).norm() <= 1e-12 * (1.0 + want.norm()), "{got} vs {want}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn reception_is_linear_in_the_path_set(a in prop::collection::vec(arb_path(), 1..4), b in prop::collection::vec(arb_path(), 1..4)) {
        let cfg = small_cfg();
        let sched = make_ssb_schedule(&cfg, 5);
        let opts = ReceiveOptions::noiseless(1);
        let ya = transmit_receive(&a, &sched, &cfg, &opts).unwrap();
        let yb = transmit_receive(&b, &sched, &cfg, &opts).unwrap();
        let all: Vec<PathParams> = a.iter().chain(&b).copied().collect();
        let yab = transmit_receive(&all, &sched, &cfg, &opts).unwrap();
        for ((x, y), z) in ya.samples.iter().zip(&yb.samples).zip(&yab.samples) {
            prop_assert!((x + y - z).norm() < 1e-12);
        }
    }

    #[test]
    fn burst_to_burst_phase_follows_doppler(path in arb_path()) {
        let cfg = small_cfg();
        let sched = make_ssb_schedule(&cfg, 1);
        let cube = transmit_receive(&[path], &sched, &cfg, &ReceiveOptions::noiseless(2)).unwrap();
        let step = Complex64::from_polar(1.0, 2.0 * PI * path.doppler_hz * cfg.burst_spacing as f64 * cfg.symbol_period());
        for (y0, y1) in cube.burst(0).iter().zip(cube.burst(1)) {
            prop_assert!((y0 * step - y1).norm() < 1e-12 * (1.0 + y1.norm()));
        }
    }
}

#[test]
fn empirical_noise_variance_matches_request() {
    let cfg = SystemConfig::default();
    let sched = make_ssb_schedule(&cfg, 0);
    let sigma2 = 3.7e-3;
    let opts = ReceiveOptions {
        num_bursts: 3,
        first_burst: 0,
        noise_variance: sigma2,
        seed: 99,
    };
    let cube = transmit_receive(&[], &sched, &cfg, &opts).unwrap();
    let est = cube.energy() / cube.samples.len() as f64;
    assert!((est / sigma2 - 1.0).abs() < 0.05, "{est}");
    let mean: Complex64 = cube.samples.iter().sum::<Complex64>() / cube.samples.len() as f64;
    assert!(mean.norm() < 0.05 * sigma2.sqrt());
}

#[test]
fn same_seed_same_noise() {
    let cfg = SystemConfig::default();
    let sched = make_ssb_schedule(&cfg, 0);
    let opts = ReceiveOptions::for_canceller(&cfg, 11);
    let a = transmit_receive(&[], &sched, &cfg, &opts).unwrap();
    let b = transmit_receive(&[], &sched, &cfg, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn long_streams_trip_the_coherence_guard() {
    let cfg = SystemConfig::default();
    let sched = make_ssb_schedule(&cfg, 0);
    let opts = ReceiveOptions::noiseless(200);
    assert!(matches!(
        transmit_receive(&[], &sched, &cfg, &opts),
        Err(Error::CoherenceGuard { .. })
    ));
}

#[test]
fn beams_are_unit_norm_and_pilots_unit_modulus() {
    let cfg = SystemConfig::default();
    let sched = make_ssb_schedule(&cfg, 4);
    for g in 1..=cfg.num_ssb {
        let n: f64 = sched.beam(g).iter().map(|w| w.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
    assert!(sched.pilots.iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
    assert_eq!(sched.pilots.len(), 3 * cfg.num_ssb * cfg.occupied_subcarriers);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn symbol_to_symbol_phase_follows_doppler(path in arb_path()) {
        let cfg = small_cfg();
        let sched = make_ssb_schedule(&cfg, 1).with_unit_pilots();
        let cube = transmit_receive(&[path], &sched, &cfg, &ReceiveOptions::noiseless(1)).unwrap();
        let want = 2.0 * PI * path.doppler_hz * cfg.symbol_period();
        for g in 0..cfg.num_ssb {
            for k in 0..2 {
                let (a, b) = (g * 3 + k, g * 3 + k + 1);
                for n in [0, 11] {
                    let y0 = cube.get(0, a, n, 2);
                    let y1 = cube.get(0, b, n, 2);
                    if y0.norm() > 1e-9 {
                        let d = (y1 / y0).arg() - want;
                        let wrapped = (d + PI).rem_euclid(2.0 * PI) - PI;
                        prop_assert!(wrapped.abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn per_element_power_is_beam_gain_bounded(path in arb_path()) {
        let cfg = small_cfg();
        let sched = make_ssb_schedule(&cfg, 2);
        let cube = transmit_receive(&[path], &sched, &cfg, &ReceiveOptions::noiseless(1)).unwrap();
        let bound = path.power() * cfg.num_antennas as f64;
        prop_assert!(cube.samples.iter().all(|y| y.norm_sqr() <= bound * (1.0 + 1e-12)));
    }

    #[test]
    fn negating_the_angle_conjugates_the_signature(theta in -1.5..1.5f64) {
        let a = array_response(6, theta);
        let b = array_response(6, -theta);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.conj() - y).norm() < 1e-15);
        }
    }
}
