use std::collections::BTreeSet;
use std::f64::consts::TAU;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qek::circuit::{
    echo_template, erase_redundant, AngleSource, AnsatzSpec, Architecture, Circuit,
};
use qek::datasets::{normalize_minmax, split_indices, Dataset};
use qek::kernel::{target_alignment, Embedding, KernelMatrix};
use qek::linalg::Matrix;
use qek::statesim::{Gate, State};
use qek::svm::{self, solve_dual, SvmParams};
use qek::train::{batch_alignment, fd_gradient, init_params, Samples};

fn arch() -> impl Strategy<Value = Architecture> {
    prop_oneof![
        Just(Architecture::DataFirst),
        Just(Architecture::DataLast),
        Just(Architecture::DataWeaved),
    ]
}

fn gate(n: usize) -> impl Strategy<Value = Gate> {
    let angle = -10.0..10.0f64;
    prop_oneof![
        (0..n).prop_map(|target| Gate::H { target }),
        (0..n, angle.clone()).prop_map(|(target, angle)| Gate::Rz { target, angle }),
        (0..n, angle.clone()).prop_map(|(target, angle)| Gate::Ry { target, angle }),
        (0..n, 0..n, angle)
            .prop_filter("control differs from target", |(c, t, _)| c != t)
            .prop_map(|(control, target, angle)| Gate::Crz {
                control,
                target,
                angle
            }),
    ]
}

fn sequence() -> impl Strategy<Value = (usize, Vec<Gate>)> {
    (2..=6usize).prop_flat_map(|n| (Just(n), prop::collection::vec(gate(n), 0..=50)))
}

fn random_state(n: usize, seed: u64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    State::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gates_preserve_norm((n, gates) in sequence()) {
        let mut s = State::zero(n).unwrap();
        s.apply_all(&gates).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn gate_then_adjoint_is_identity(g in gate(4), seed in any::<u64>()) {
        let start = random_state(4, seed);
        let mut s = start.clone();
        s.apply(&g).unwrap();
        s.apply(&g.adjoint()).unwrap();
        for (a, b) in s.amplitudes().iter().zip(start.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_gates_keep_basis_probabilities(
        basis in 0usize..16,
        gates in prop::collection::vec(gate(4), 1..20),
    ) {
        let mut amps = vec![Complex64::new(0.0, 0.0); 16];
        amps[basis] = Complex64::new(1.0, 0.0);
        let mut s = State::from_amplitudes(amps).unwrap();
        let before = s.zero_probability();
        for g in gates.iter().filter(|g| matches!(g, Gate::Rz { .. } | Gate::Crz { .. })) {
            s.apply(g).unwrap();
        }
        prop_assert!((s.zero_probability() - before).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic(seed in any::<u64>(), shots in 1u64..100_000) {
        let mut s = State::zero(2).unwrap();
        s.apply(&Gate::Ry { target: 0, angle: 1.1 }).unwrap();
        let a = s.sample_zero_probability(shots, seed).unwrap();
        let b = s.sample_zero_probability(shots, seed).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn dump_round_trips(a in arch(), n in 1..=6usize, layers in 0..=5usize) {
        let spec = AnsatzSpec::new(a, n, layers).unwrap();
        let c = spec.build();
        prop_assert_eq!(Circuit::parse_dump(&c.dump()).unwrap(), c.clone());
        let echo = echo_template(&spec);
        prop_assert_eq!(Circuit::parse_dump(&echo.dump()).unwrap(), echo);
    }

    #[test]
    fn param_count_matches_referenced_slots(a in arch(), n in 2..=6usize, layers in 0..=5usize) {
        let spec = AnsatzSpec::new(a, n, layers).unwrap();
        let used: BTreeSet<usize> = spec
            .build()
            .gates()
            .iter()
            .filter_map(|g| g.angle.and_then(AngleSource::param_index))
            .collect();
        prop_assert_eq!(used.len(), spec.param_count());
        prop_assert_eq!(used.iter().next_back().map_or(0, |m| m + 1), spec.param_count());
    }

    #[test]
    fn data_first_matches_shallower_weaved(n in 1..=4usize, layers in 1..=4usize, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let df = AnsatzSpec::new(Architecture::DataFirst, n, layers).unwrap();
        let dw = AnsatzSpec::new(Architecture::DataWeaved, n, layers - 1).unwrap();
        let theta: Vec<f64> = (0..df.param_count()).map(|_| rng.random_range(0.0..TAU)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let xp: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let a = Embedding::new(&df, &theta, 1.0).unwrap().value(&x, &xp).unwrap();
        let b = Embedding::new(&dw, &theta[..dw.param_count()], 1.0).unwrap().value(&x, &xp).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn kernel_symmetric_and_in_range(a in arch(), n in 1..=4usize, layers in 0..=3usize, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = AnsatzSpec::new(a, n, layers).unwrap();
        let theta = init_params(&spec, seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let xp: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let emb = Embedding::new(&spec, &theta, 2.0).unwrap();
        let k1 = emb.value(&x, &xp).unwrap();
        let k2 = emb.value(&xp, &x).unwrap();
        prop_assert!((k1 - k2).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-10).contains(&k1));
    }

    #[test]
    fn alignment_bounded_and_permutation_invariant(seed in any::<u64>(), m in 2..=8usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = AnsatzSpec::new(Architecture::DataWeaved, 2, 1).unwrap();
        let theta = init_params(&spec, seed);
        let pts: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random(), rng.random()]).collect();
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..3)).collect();
        let emb = Embedding::new(&spec, &theta, 1.0).unwrap();
        let a = target_alignment(&emb.matrix(&pts).unwrap(), &labels).unwrap();
        prop_assert!(a.abs() <= 1.0 + 1e-10);
        let order: Vec<usize> = (0..m).rev().collect();
        let pts2: Vec<Vec<f64>> = order.iter().map(|&i| pts[i].clone()).collect();
        let labels2: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let b = target_alignment(&emb.matrix(&pts2).unwrap(), &labels2).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn split_is_a_partition(counts in prop::collection::vec(2..12usize, 2..4), fraction in 0.05..0.95f64, seed in any::<u64>()) {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (c, &k) in counts.iter().enumerate() {
            for i in 0..k {
                features.push(vec![i as f64]);
                labels.push(c);
            }
        }
        let names = (0..counts.len()).map(|c| c.to_string()).collect();
        let ds = Dataset::new("p", features, labels, names).unwrap();
        let (tr, te) = split_indices(&ds, fraction, seed).unwrap();
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.n_samples()).collect::<Vec<_>>());
        for c in 0..counts.len() {
            prop_assert!(tr.iter().any(|&i| ds.labels[i] == c));
            prop_assert!(te.iter().any(|&i| ds.labels[i] == c));
        }
    }

    #[test]
    fn normalized_columns_span_unit_interval(rows in prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 3), 2..20)) {
        let labels = vec![0; rows.len()];
        let ds = Dataset::new("p", rows, labels, vec!["a".into()]).unwrap();
        if let Ok(n) = normalize_minmax(&ds) {
            for j in 0..n.n_features() {
                let col: Vec<f64> = n.features.iter().map(|r| r[j]).collect();
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn erasure_preserves_echo_value(a in arch(), n in 1..=4usize, layers in 0..=3usize, seed in any::<u64>()) {
        let spec = AnsatzSpec::new(a, n, layers).unwrap();
        let echo = echo_template(&spec);
        let (reduced, _) = erase_redundant(&echo).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let theta: Vec<f64> = (0..spec.param_count()).map(|_| rng.random_range(0.0..TAU)).collect();
            let p = |c: &Circuit| {
                let mut s = State::zero(n).unwrap();
                s.apply_all(&c.bind(&x, &theta, 1.0).unwrap().to_gates().unwrap()).unwrap();
                s.zero_probability()
            };
            prop_assert!((p(&echo) - p(&reduced)).abs() < 1e-12);
        }
    }
}

fn rbf(points: &[Vec<f64>], gamma: f64) -> KernelMatrix {
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|a| {
            points
                .iter()
                .map(|b| {
                    (-gamma * a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>()).exp()
                })
                .collect()
        })
        .collect();
    KernelMatrix::from_matrix(Matrix::from_rows(&rows).unwrap()).unwrap()
}

fn svm_instance(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=10);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
    let mut y: Vec<f64> = (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    y[0] = 1.0;
    y[1] = -1.0;
    (pts, y, rng.random_range(0.1..5.0))
}

#[test]
fn svm_dual_feasibility() {
    for seed in 0..100 {
        let (pts, y, c) = svm_instance(seed);
        let m = solve_dual(&rbf(&pts, 3.0), &y, &SvmParams::with_c(c)).unwrap();
        assert!(m.alphas.iter().all(|&a| (-1e-12..=c + 1e-12).contains(&a)));
        let eq: f64 = m.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(eq.abs() < 1e-10, "sum alpha y = {eq}");
    }
}

#[test]
fn svm_permutation_invariance() {
    let tight = |c| SvmParams {
        c,
        tol: 1e-12,
        max_passes: 100_000,
    };
    for seed in 0..20 {
        let (pts, y, c) = svm_instance(seed);
        let n = y.len();
        let k = rbf(&pts, 3.0);
        let a = solve_dual(&k, &y, &tight(c)).unwrap();
        let perm: Vec<usize> = (0..n).rev().map(|i| (i + 3) % n).collect();
        let pts2: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
        let y2: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let k2 = rbf(&pts2, 3.0);
        let b = solve_dual(&k2, &y2, &tight(c)).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert!((a.alphas[i] - b.alphas[j]).abs() < 1e-8, "seed {seed}");
        }
        for i in 0..n {
            let row_a: Vec<f64> = (0..n).map(|j| k.get(i, j)).collect();
            let pos = perm.iter().position(|&p| p == i).unwrap();
            let row_b: Vec<f64> = (0..n).map(|j| k2.get(pos, j)).collect();
            let da = a.decision_value(&row_a).unwrap();
            let db = b.decision_value(&row_b).unwrap();
            assert!((da - db).abs() < 1e-8, "seed {seed}: {da} vs {db}");
        }
    }
}

#[test]
fn svm_kernel_scaling_keeps_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut pts: Vec<Vec<f64>> = (0..8)
        .map(|_| vec![rng.random_range(0.0..0.3), rng.random_range(0.0..0.3)])
        .collect();
    pts.extend((0..8).map(|_| vec![rng.random_range(0.7..1.0), rng.random_range(0.7..1.0)]));
    let labels: Vec<usize> = (0..16).map(|i| i / 8).collect();
    let k = rbf(&pts, 4.0);
    let base = svm::fit_ovr(&k, &labels, &SvmParams::with_c(1.0)).unwrap();
    let expected = base.predict(k.matrix()).unwrap();
    assert_eq!(expected, labels);
    for lambda in [0.25, 3.0, 10.0] {
        let scaled = KernelMatrix::from_matrix_unchecked(k.matrix().scaled(lambda)).unwrap();
        let m = svm::fit_ovr(&scaled, &labels, &SvmParams::with_c(1.0 / lambda)).unwrap();
        assert_eq!(
            m.predict(scaled.matrix()).unwrap(),
            expected,
            "lambda {lambda}"
        );
    }
}

#[test]
fn loschmidt_mean_is_unbiased() {
    let spec = AnsatzSpec::new(Architecture::DataLast, 3, 2).unwrap();
    let theta = init_params(&spec, 8);
    let emb = Embedding::new(&spec, &theta, 1.0).unwrap();
    let (x, xp) = ([0.2, 0.7, 0.4], [0.9, 0.1, 0.5]);
    let p = emb.value(&x, &xp).unwrap();
    let shots = 10_000;
    let mean = (0..100)
        .map(|s| emb.loschmidt_estimate(&x, &xp, shots, s).unwrap())
        .sum::<f64>()
        / 100.0;
    let se = (p * (1.0 - p) / (shots as f64 * 100.0)).sqrt();
    assert!((mean - p).abs() < 5.0 * se, "mean {mean}, p {p}, se {se}");
}

#[test]
fn full_batch_step_does_not_decrease_alignment() {
    let spec = AnsatzSpec::new(Architecture::DataWeaved, 3, 1).unwrap();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..3).map(|_| rng.random()).collect())
            .collect();
        let labels = [0usize, 1, 0, 1, 2, 2];
        let batch = Samples::new(&pts, &labels).unwrap();
        let theta = init_params(&spec, seed);
        let before = batch_alignment(&spec, &theta, batch, 1.0).unwrap();
        let g = fd_gradient(&spec, &theta, batch, 1e-3, 1.0).unwrap();
        let stepped: Vec<f64> = theta.iter().zip(&g).map(|(t, g)| t + 1e-2 * g).collect();
        let after = batch_alignment(&spec, &stepped, batch, 1.0).unwrap();
        assert!(after >= before - 1e-6, "seed {seed}: {before} -> {after}");
    }
}
