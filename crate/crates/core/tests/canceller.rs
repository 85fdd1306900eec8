use std::f64::consts::PI;

use pmn_core::canceller::{
    assemble, binomial, cancel, canceller_gain, canceller_weights, demodulate, noise_gain, CancelledCube, MeasurementMatrix,
};
use pmn_core::signal::{make_ssb_schedule, transmit_receive, PathParams, ReceiveOptions, ReceivedCube};
use pmn_core::{Complex64, SystemConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_cfg(order: usize) -> SystemConfig {
    SystemConfig {
        occupied_subcarriers: 16,
        canceller_order: order,
        ..SystemConfig::default()
    }
}

fn binomial_sum(f: f64, order: usize, spacing: usize, ts: f64) -> Complex64 {
    (0..=order)
        .map(|p| {
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let c = (1..=p).fold(1.0, |acc, i| acc * (order + 1 - i) as f64 / i as f64);
            Complex64::from_polar(sign * c, -2.0 * PI * f * (p * spacing) as f64 * ts)
        })
        .sum()
}

fn static_path() -> impl Strategy<Value = PathParams> {
    (0.0..1.6e-6f64, -1.5..1.5f64, 0.1..3.0f64, 0.0..6.28f64)
        .prop_map(|(d, th, a, ph)| PathParams::clutter(d, th, Complex64::from_polar(a, ph)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closed_form_gain_equals_binomial_sum(f in -5000.0..5000.0f64, order in 1usize..=3) {
        let ts = 5.48e-6;
        let got = canceller_gain(f, order, 128, ts);
        let want = binomial_sum(f, order, 128, ts);
        prop_assert!((got - want).norm() <= 1e-12 * (1.0 + want.norm()));
    }

    #[test]
    fn static_scene_is_nulled(paths in prop::collection::vec(static_path(), 1..12), order in 1usize..=3) {
        let cfg = small_cfg(order);
        let sched = make_ssb_schedule(&cfg, 2);
        let cube = transmit_receive(&paths, &sched, &cfg, &ReceiveOptions::noiseless(order + 1)).unwrap();
        let out = cancel(&cube, order).unwrap();
        prop_assert!(out.energy() <= 1e-20 * cube.burst(order).iter().map(|z| z.norm_sqr()).sum::<f64>());
    }

    #[test]
    fn single_path_output_is_gain_times_newest_burst(
        d in 0.0..1.6e-6f64, f in -1500.0..1500.0f64, th in -1.5..1.5f64, order in 1usize..=3,
    ) {
        let cfg = small_cfg(order);
        let sched = make_ssb_schedule(&cfg, 9);
        let path = PathParams::target(d, f, th, Complex64::new(0.7, -0.2));
        let cube = transmit_receive(&[path], &sched, &cfg, &ReceiveOptions::noiseless(order + 1)).unwrap();
        let out = cancel(&cube, order).unwrap();
        let a = binomial_sum(f, order, cfg.burst_spacing, cfg.symbol_period());
        for (o, y) in out.samples.iter().zip(cube.burst(order)) {
            prop_assert!((o - a * y).norm() <= 1e-9 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn cancel_is_linear(seed in 0u64..1000, order in 1usize..=3, alpha in -2.0..2.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = ReceivedCube::zeros(2, 3, 3, order + 1, 0, 0.0);
        let mut y = x.clone();
        for (a, b) in x.samples.iter_mut().zip(y.samples.iter_mut()) {
            *a = Complex64::new(rng.random(), rng.random());
            *b = Complex64::new(rng.random(), rng.random());
        }
        let mut z = x.clone();
        for (c, b) in z.samples.iter_mut().zip(&y.samples) {
            *c = *c * alpha + b;
        }
        let (cx, cy, cz) = (cancel(&x, order).unwrap(), cancel(&y, order).unwrap(), cancel(&z, order).unwrap());
        for ((a, b), c) in cx.samples.iter().zip(&cy.samples).zip(&cz.samples) {
            prop_assert!((a * alpha + b - c).norm() < 1e-12);
        }
    }
}

#[test]
fn noise_power_gain_is_central_binomial() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for order in 1..=3usize {
        let samples = 100_000 / 4;
        let mut cube = ReceivedCube::zeros(1, samples, 1, order + 1, 0, 1.0);
        for z in cube.samples.iter_mut() {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            *z = Complex64::new(re, im) * 0.5f64.sqrt();
        }
        let out = cancel(&cube, order).unwrap();
        let gain = out.energy() / out.samples.len() as f64;
        let want = binomial(2 * order, order);
        assert_eq!(noise_gain(order), want);
        assert!((gain / want - 1.0).abs() < 0.05, "P={order}: {gain} vs {want}");
        assert!((out.effective_noise_var - want).abs() < 1e-12);
    }
}

#[test]
fn demodulation_strips_pilots() {
    let cfg = small_cfg(2);
    let sched = make_ssb_schedule(&cfg, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut frame = CancelledCube {
        samples: vec![Complex64::new(0.0, 0.0); cfg.num_antennas * cfg.occupied_subcarriers * cfg.symbols_per_burst()],
        num_antennas: cfg.num_antennas,
        num_subcarriers: cfg.occupied_subcarriers,
        num_slots: cfg.symbols_per_burst(),
        reference_burst: 2,
        effective_noise_var: 0.0,
    };
    for z in frame.samples.iter_mut() {
        *z = Complex64::new(rng.random(), rng.random());
    }
    let r = demodulate(&frame, &sched).unwrap();
    for slot in 0..frame.num_slots {
        for n in 0..frame.num_subcarriers {
            for m in 0..frame.num_antennas {
                let want = sched.pilots[slot * cfg.occupied_subcarriers + n].conj() * frame.vector(slot, n)[m];
                assert!((r.vector(slot, n)[m] - want).norm() < 1e-15);
            }
        }
    }
}

#[test]
fn single_path_measurement_is_rank_one() {
    let cfg = SystemConfig::default();
    let sched = make_ssb_schedule(&cfg, 0);
    let path = PathParams::target(0.73e-6, 412.0, 0.4, Complex64::new(1.0, 0.5));
    let cube = transmit_receive(&[path], &sched, &cfg, &ReceiveOptions::noiseless(3)).unwrap();
    let r = assemble(&demodulate(&cancel(&cube, 2).unwrap(), &sched).unwrap(), &cfg).unwrap();
    assert_eq!((r.rows(), r.cols()), (240, 48));
    let sv = r.matrix.singular_values();
    assert!(sv[1] < 1e-10 * sv[0]);
    // Column order: antenna fastest, then symbol, then SSB.
    let col = MeasurementMatrix::column_index(4, 3, 2, 1);
    let frame = demodulate(&cancel(&cube, 2).unwrap(), &sched).unwrap();
    assert_eq!(r.matrix[(17, col)], frame.vector(7, 17)[1]);
}

#[test]
fn first_order_gain_at_half_the_burst_rate_is_two() {
    let (ns, ts) = (128, 5.48e-6);
    let f = 1.0 / (2.0 * ns as f64 * ts);
    let g = canceller_gain(f, 1, ns, ts);
    assert!((g - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    assert_eq!(canceller_weights(2), vec![1.0, -2.0, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn each_order_deepens_the_notch(f in -3000.0..3000.0f64, order in 1usize..=3) {
        let (ns, ts) = (128, 5.48e-6);
        let lo = canceller_gain(f, order, ns, ts);
        let hi = canceller_gain(f, order + 1, ns, ts);
        let want = 2.0 * (PI * f * ns as f64 * ts).sin().abs();
        prop_assert!((hi.norm() - want * lo.norm()).abs() < 1e-12);
    }

    #[test]
    fn blind_speeds_are_nulled(k in -5i32..=5, order in 1usize..=3) {
        let (ns, ts) = (128, 5.48e-6);
        let f = k as f64 / (ns as f64 * ts);
        prop_assert!(canceller_gain(f, order, ns, ts).norm() < 1e-12);
    }

    #[test]
    fn assembly_preserves_energy(seed in 0u64..100) {
        let cfg = small_cfg(2);
        let sched = make_ssb_schedule(&cfg, seed);
        let opts = ReceiveOptions { num_bursts: 1, first_burst: 0, noise_variance: 1.0, seed };
        let cube = transmit_receive(&[], &sched, &cfg, &opts).unwrap();
        let frame = CancelledCube::from_burst(&cube, 0);
        let r = assemble(&frame, &cfg).unwrap();
        prop_assert!((r.matrix.norm_squared() - frame.energy()).abs() < 1e-9 * frame.energy());
    }
}
