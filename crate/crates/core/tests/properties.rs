use csishield::csi::{
    amplitude, assemble_csi, cfr_from_symbols, denormalize, normalize_minmax, AmplitudeMatrix, CfrVector,
};
use csishield::eval::{featurize, normalized_mse, svm_train, ConfusionMatrix, SvmConfig};
use csishield::ingest::{
    acquisition_from_frames, pair_acquisitions, parse_csi_line, parse_csi_lines, write_csi_lines, Acquisition,
    Condition, CsiFrameRecord, IqOrder, ManifestEntry, Material, PACKETS_PER_ACQUISITION,
};
use csishield::nn::{adamw_step, dropout, sigmoid, AdamWConfig, AdamWState, LayerNorm, Mode, Param, SeededRng};
use csishield::ragan::{loss_d_relativistic, loss_g_adversarial, Generator, GeneratorConfig, OutputHead};
use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn complex() -> impl Strategy<Value = Complex64> {
    (-1e3..1e3f64, -1e3..1e3f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn nonzero_complex() -> impl Strategy<Value = Complex64> {
    (0.1..1e3f64, -3.2..3.2f64).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(0.0..10.0f64, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

proptest! {
    #[test]
    fn amplitude_is_non_negative(v in prop::collection::vec(complex(), 1..64)) {
        prop_assert!(amplitude(&CfrVector(v)).iter().all(|&a| a >= 0.0 && a.is_finite()));
    }

    #[test]
    fn common_phase_rotation_cancels(
        pairs in prop::collection::vec((nonzero_complex(), nonzero_complex()), 1..64),
        theta in -3.2..3.2f64,
    ) {
        let rot = Complex64::from_polar(1.0, theta);
        let (y, x): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let a = amplitude(&cfr_from_symbols(&CfrVector(y.clone()), &CfrVector(x.clone())).unwrap());
        let yr: Vec<_> = y.iter().map(|v| v * rot).collect();
        let xr: Vec<_> = x.iter().map(|v| v * rot).collect();
        let b = amplitude(&cfr_from_symbols(&CfrVector(yr), &CfrVector(xr)).unwrap());
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-9 * p.abs().max(1.0));
        }
    }

    #[test]
    fn normalize_range_and_inverse(m in matrix(6, 5)) {
        let amp = AmplitudeMatrix::new(m);
        if let Ok((n, scale)) = normalize_minmax(&amp) {
            prop_assert!(n.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let back = denormalize(&n, scale);
            for (a, b) in back.values().iter().zip(amp.values()) {
                prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-12) + 1e-12);
            }
        }
    }

    #[test]
    fn assembly_is_lossless(rows in prop::collection::vec(prop::collection::vec(complex(), 7), 1..12)) {
        let frames: Vec<CfrVector> = rows.into_iter().map(CfrVector).collect();
        let m = assemble_csi(&frames).unwrap();
        prop_assert_eq!(m.rows().collect::<Vec<_>>(), frames);
    }

    #[test]
    fn csi_line_roundtrip(ts in 0u64..1u64 << 50, rssi in -100i32..0, iq in prop::collection::vec(-32768i32..32768, 128)) {
        let rec = CsiFrameRecord { timestamp_us: ts, rssi, iq };
        let line = rec.to_line();
        let once = parse_csi_line(&line, 2, IqOrder::RealFirst).unwrap();
        let twice = parse_csi_line(&once.to_line(), 2, IqOrder::RealFirst).unwrap();
        prop_assert_eq!(&once, &rec);
        prop_assert_eq!(twice, once);
    }

    #[test]
    fn acquisitions_are_1000_by_64(n in 990usize..=1010) {
        let frames: Vec<CsiFrameRecord> = (0..n)
            .map(|i| CsiFrameRecord { timestamp_us: i as u64 * 10_000, rssi: -40, iq: vec![(i % 7) as i32 + 1; 128] })
            .collect();
        let parsed = parse_csi_lines(&write_csi_lines(&frames), IqOrder::RealFirst).unwrap();
        let entry = ManifestEntry { path: "x.csv".into(), material: Material::Pine, condition: Condition::Shielded, day: 1 };
        let acq = acquisition_from_frames(&parsed, &entry).unwrap();
        prop_assert_eq!(acq.csi.packets(), PACKETS_PER_ACQUISITION);
        prop_assert_eq!(acq.csi.subcarriers(), 64);
    }

    #[test]
    fn pairing_stays_within_material_and_day(
        shielded in prop::collection::vec((0usize..5, 1u8..4), 1..20),
        unshielded in prop::collection::vec((0usize..5, 1u8..4), 1..20),
    ) {
        let make = |side: &[(usize, u8)], c: Condition| -> Vec<Acquisition> {
            side.iter().enumerate().map(|(i, &(m, day))| {
                let mut data = Array2::from_elem((3, 64), Complex64::new(1.0, 0.0));
                data[[0, 4]] = Complex64::new(2.0 + i as f64, 0.0);
                Acquisition {
                    id: format!("{}{i:03}", c.name()),
                    material: Material::ALL[m],
                    condition: c,
                    day,
                    csi: csishield::csi::CsiMatrix::from_array(data),
                }
            }).collect()
        };
        let s = make(&shielded, Condition::Shielded);
        let u = make(&unshielded, Condition::Unshielded);
        let r = pair_acquisitions(&s, &u).unwrap();
        let mut expected = 0;
        for m in Material::ALL {
            for day in 1..4u8 {
                let ns = s.iter().filter(|a| a.material == m && a.day == day).count();
                let nu = u.iter().filter(|a| a.material == m && a.day == day).count();
                expected += ns.min(nu);
            }
        }
        prop_assert_eq!(r.pairs.len(), expected);
        for p in &r.pairs {
            let c = s.iter().find(|a| a.id == p.clean_id).unwrap();
            let n = u.iter().find(|a| a.id == p.noisy_id).unwrap();
            prop_assert_eq!((c.material, c.day), (n.material, n.day));
            prop_assert_eq!((p.material, p.day), (c.material, c.day));
        }
        prop_assert_eq!(r.pairs.len() * 2 + r.leftovers.len(), s.len() + u.len());
    }

    #[test]
    fn sigmoid_is_open_unit_interval(v in prop::collection::vec(-30.0..30.0f64, 1..50)) {
        let y = sigmoid(&Array1::from(v));
        prop_assert!(y.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn layer_norm_rows_are_standardized(m in prop::collection::vec(-5.0..5.0f64, 24), scale in 0.5..50.0f64) {
        let x = Array2::from_shape_vec((4, 6), m).unwrap() * scale;
        prop_assume!(x.rows().into_iter().all(|r| r.var(0.0) >= 1.0));
        let (_, cache) = LayerNorm::new(6).forward(&x).unwrap();
        for row in cache.normalized().rows() {
            prop_assert!(row.mean().unwrap().abs() < 1e-6);
            prop_assert!((row.var(0.0) - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn dropout_eval_is_identity(v in prop::collection::vec(-5.0..5.0f64, 1..40), p in 0.0..0.9f64, seed: u64) {
        let x = Array1::from(v);
        let (y, mask) = dropout(&x, p, Mode::Eval, &mut SeededRng::new(seed));
        prop_assert_eq!(y, x);
        prop_assert!(mask.is_none());
    }

    #[test]
    fn adamw_zero_lr_is_identity(v in prop::collection::vec(-5.0..5.0f64, 6), g in prop::collection::vec(-5.0..5.0f64, 6)) {
        let mut p = Param::new(Array2::from_shape_vec((2, 3), v).unwrap());
        p.grad = Array2::from_shape_vec((2, 3), g).unwrap();
        let before = p.value.clone();
        let mut state = AdamWState::new([&p]);
        adamw_step(&mut [&mut p], &mut state, &AdamWConfig::default().with_lr(0.0)).unwrap();
        prop_assert_eq!(p.value, before);
    }

    #[test]
    fn generator_output_in_unit_interval(v in prop::collection::vec(-20.0..20.0f64, 2 * 3 * 4), seed: u64, sig: bool) {
        let head = if sig { OutputHead::Sigmoid } else { OutputHead::DropoutLeakySigmoid };
        let cfg = GeneratorConfig { features: 4, hidden: 3, output_head: head, ..Default::default() };
        let g = Generator::new(cfg, &mut SeededRng::new(seed));
        let y = g.predict(&Array3::from_shape_vec((2, 3, 4), v).unwrap()).unwrap();
        prop_assert!(y.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn relativistic_losses_are_shift_invariant(
        real in prop::collection::vec(-10.0..10.0f64, 1..8),
        fake in prop::collection::vec(-10.0..10.0f64, 1..8),
        c in -100.0..100.0f64,
    ) {
        let (r, f) = (Array1::from(real), Array1::from(fake));
        let (rs, fs) = (&r + c, &f + c);
        for loss in [loss_d_relativistic, loss_g_adversarial] {
            let a = loss(&r, &f).unwrap().value;
            let b = loss(&rs, &fs).unwrap().value;
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn identical_score_multisets_give_two_ln_two(scores in prop::collection::vec(-10.0..10.0f64, 1..8), seed: u64) {
        let mut shuffled = scores.clone();
        shuffled.shuffle(&mut SeededRng::new(seed));
        let (r, f) = (Array1::from(scores), Array1::from(shuffled));
        for loss in [loss_d_relativistic, loss_g_adversarial] {
            let v = loss(&r, &f).unwrap().value;
            if r.iter().all(|&x| (x - r[0]).abs() < 1e-15) {
                prop_assert!((v - 2.0 * std::f64::consts::LN_2).abs() < 1e-9);
            } else {
                prop_assert!(v >= 2.0 * std::f64::consts::LN_2 - 1e-9);
            }
        }
    }

    #[test]
    fn confusion_trace_over_total_is_accuracy(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..60)) {
        let (truth, pred): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let cm = ConfusionMatrix::from_predictions(5, &truth, &pred).unwrap();
        let hits = pairs.iter().filter(|(t, p)| t == p).count();
        prop_assert_eq!(cm.accuracy(), hits as f64 / pairs.len() as f64);
        prop_assert_eq!(cm.accuracy(), cm.trace() as f64 / cm.total() as f64);
        for c in 0..5 {
            prop_assert_eq!(cm.support(c) as usize, truth.iter().filter(|&&t| t == c).count());
        }
    }

    #[test]
    fn normalized_mse_is_a_semimetric(a in matrix(4, 3), b in matrix(4, 3)) {
        let (a, b) = (AmplitudeMatrix::new(a), AmplitudeMatrix::new(b));
        let ab = normalized_mse(&a, &b).unwrap();
        prop_assert_eq!(ab, normalized_mse(&b, &a).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(normalized_mse(&a, &a).unwrap(), 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
    }

    #[test]
    fn featurize_ignores_packet_order(m in matrix(8, 52), seed: u64) {
        let mut order: Vec<usize> = (0..8).collect();
        order.shuffle(&mut SeededRng::new(seed));
        let permuted = m.select(ndarray::Axis(0), &order);
        let a = featurize(&AmplitudeMatrix::new(m)).unwrap();
        let b = featurize(&AmplitudeMatrix::new(permuted)).unwrap();
        prop_assert_eq!(a.len(), 104);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn svm_predictions_ignore_training_order(seed: u64) {
        let mut rng = SeededRng::new(seed);
        let centers = [[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]];
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..8 {
                use rand::Rng;
                xs.push(vec![center[0] + rng.random_range(-0.8..0.8), center[1] + rng.random_range(-0.8..0.8)]);
                ys.push(c);
            }
        }
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.shuffle(&mut rng);
        let xs2: Vec<_> = order.iter().map(|&i| xs[i].clone()).collect();
        let ys2: Vec<_> = order.iter().map(|&i| ys[i]).collect();
        let cfg = SvmConfig::new(0.5, 10.0);
        let a = svm_train(&xs, &ys, 3, &cfg).unwrap();
        let b = svm_train(&xs2, &ys2, 3, &cfg).unwrap();
        let probe: Vec<Vec<f64>> = centers
            .iter()
            .flat_map(|c| [[0.0, 0.0], [0.3, 0.0], [0.0, -0.3]].map(|d| vec![c[0] + d[0], c[1] + d[1]]))
            .collect();
        prop_assert_eq!(a.predict_all(&probe), b.predict_all(&probe));
    }
}
