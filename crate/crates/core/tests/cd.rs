use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symcd::cd::*;
use symcd::instances::{make_worst_case, QuadraticProblem};
use symcd::matcore::{DenseMatrix, Vector};
use symcd::spectral::update_matrix;
use symcd::Error;

fn identity_problem(n: usize) -> QuadraticProblem {
    QuadraticProblem::new(DenseMatrix::identity(n), Vector::zeros(n)).unwrap()
}

fn random_problem(seed: u64, n: usize) -> (QuadraticProblem, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let gm = DenseMatrix::from_fn(n, n, |i, j| g[i * n + j]);
    let q = gm.transpose().matmul(&gm).unwrap().add(&DenseMatrix::identity(n).scale(0.1)).unwrap().symmetrize().unwrap();
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    (QuadraticProblem::new(q, Vector::from(b)).unwrap(), x)
}

fn affine(m: &DenseMatrix, p: &QuadraticProblem, x: &[f64]) -> Vec<f64> {
    let d: Vec<f64> = x.iter().zip(p.x_star.iter()).map(|(a, b)| a - b).collect();
    let md = m.matvec(&d).unwrap();
    md.iter().zip(p.x_star.iter()).map(|(a, b)| a + b).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn stop(eps: f64) -> StoppingRule {
    StoppingRule::new(eps, 10_000_000).unwrap()
}

#[test]
fn coordinate_step_examples() {
    let p = identity_problem(2);
    assert_eq!(coordinate_step(&p, &[5.0, 7.0], 0).unwrap().to_vec(), vec![0.0, 7.0]);
    let q = make_worst_case(2, 0.5).unwrap();
    let y = coordinate_step(&q, &[1.0, 1.0], 0).unwrap();
    assert!(max_diff(&y, &[-0.5, 1.0]) < 1e-15);
    assert_eq!(coordinate_step(&q, &y, 0).unwrap().to_vec(), y.to_vec());
    let zero = QuadraticProblem {
        q: DenseMatrix::from_rows(&[[0.0, 0.0], [0.0, 1.0]]).unwrap(),
        ..identity_problem(2)
    };
    assert!(matches!(coordinate_step(&zero, &[1.0, 1.0], 0), Err(Error::SingularCoordinate { index: 0 })));
}

#[test]
fn epoch_examples_at_n2() {
    let q = make_worst_case(2, 0.5).unwrap();
    assert!(max_diff(&ccd_epoch(&q, &[1.0, 0.0]).unwrap(), &[0.0, 0.0]) < 1e-15);
    assert!(max_diff(&ccd_epoch(&q, &[0.0, 1.0]).unwrap(), &[-0.5, 0.25]) < 1e-15);
    assert!(max_diff(&sgs_epoch(&q, &[0.0, 1.0]).unwrap(), &[-0.125, 0.25]) < 1e-15);
    assert_eq!(gbs_correction_matrix(&q).unwrap(), DenseMatrix::identity(2));
    for x in [[1.0, 0.0], [0.0, 1.0], [0.3, -2.0]] {
        assert_eq!(gbs_epoch(&q, &x).unwrap(), ccd_epoch(&q, &x).unwrap());
    }
    assert_eq!(OrderRule::Sgs.passes_per_epoch(), 2);
    assert_eq!(OrderRule::Gbs.passes_per_epoch(), 2);
    assert_eq!(OrderRule::Cyclic.passes_per_epoch(), 1);
}

#[test]
fn identity_converges_in_one_epoch() {
    let p = identity_problem(4);
    let x = [1.0, -2.0, 3.0, 0.5];
    for y in [ccd_epoch(&p, &x), sgs_epoch(&p, &x), gbs_epoch(&p, &x), gd_epoch(&p, &x, 1.0)] {
        assert!(y.unwrap().iter().all(|&v| v == 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(rpcd_epoch(&p, &x, &mut rng).unwrap().iter().all(|&v| v == 0.0));
    for rule in OrderRule::ALL {
        let r = run_to_tolerance(&p, rule, stop(1e-8), 3, &Init::Uniform, RunOptions::default()).unwrap();
        if rule == OrderRule::Randomized {
            assert!(r.converged());
        } else {
            assert_eq!(r.epochs, 1, "{rule}");
        }
    }
}

#[test]
fn correction_matrix_examples() {
    let d = QuadraticProblem::new(DenseMatrix::from_diag(&[2.0, 3.0, 5.0]), Vector::zeros(3)).unwrap();
    assert_eq!(gbs_correction_matrix(&d).unwrap(), DenseMatrix::identity(3));

    // literal build of blockdiag(1, Γ^{-T}_{2:n}) · blockdiag(1, D_{2:n})
    let p = make_worst_case(3, 0.5).unwrap();
    let sub = DenseMatrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
    let sub_inv = nalgebra::DMatrix::from_row_slice(2, 2, sub.as_slice()).try_inverse().unwrap();
    let mut want = DenseMatrix::identity(3);
    for i in 0..2 {
        for j in 0..2 {
            want[(i + 1, j + 1)] = sub_inv[(i, j)];
        }
    }
    let b = gbs_correction_matrix(&p).unwrap();
    assert!(b.sub(&want).unwrap().max_abs() < 1e-15);
    for i in 0..3 {
        for j in 0..i {
            assert_eq!(b[(i, j)], 0.0);
        }
    }
}

#[test]
fn gbs_correction_by_substitution_matches_explicit_product() {
    let (p, x) = random_problem(17, 9);
    let xt = ccd_epoch(&p, &x).unwrap();
    let b = gbs_correction_matrix(&p).unwrap();
    let d: Vec<f64> = x.iter().zip(xt.iter()).map(|(a, c)| a - c).collect();
    let bd = b.matvec(&d).unwrap();
    let explicit: Vec<f64> = x.iter().zip(bd.iter()).map(|(a, c)| a - c).collect();
    assert!(max_diff(&gbs_epoch(&p, &x).unwrap(), &explicit) < 1e-12);
}

#[test]
fn gd_examples() {
    let p = make_worst_case(20, 0.99).unwrap();
    let s = p.spectrum().unwrap();
    assert!((s.lambda_min / s.lambda_max - 5.05e-4).abs() < 1e-6);
    let p = make_worst_case(100, 0.8).unwrap();
    let s = p.spectrum().unwrap();
    assert!((s.lambda_min / s.lambda_max - 0.2 / 80.2).abs() < 1e-15);
    assert!(matches!(gd_epoch(&p, &[0.0; 100], 0.0), Err(Error::Degenerate(_))));
    let step = GdStep::TwoOverSum.step(1.0, 3.0).unwrap();
    assert_eq!(step, 0.5);
}

#[test]
fn randomized_epochs_are_reproducible() {
    let (p, x) = random_problem(4, 7);
    for f in [rcd_epoch, rpcd_epoch] {
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let (mut a, mut b) = (x.clone(), x.clone());
        for _ in 0..5 {
            a = f(&p, &a, &mut r1).unwrap().into_inner();
            b = f(&p, &b, &mut r2).unwrap().into_inner();
        }
        assert_eq!(a, b);
    }
    for rule in [OrderRule::Randomized, OrderRule::RandomPermuted] {
        let a = run_to_tolerance(&p, rule, stop(1e-6), 5, &Init::Uniform, RunOptions::default()).unwrap();
        let b = run_to_tolerance(&p, rule, stop(1e-6), 5, &Init::Uniform, RunOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn advance_repeats_epochs() {
    let (p, x) = random_problem(8, 6);
    let opts = RunOptions::default();
    type Epoch = fn(&QuadraticProblem, &[f64]) -> symcd::Result<Vector>;
    let epochs: [(OrderRule, Epoch); 3] =
        [(OrderRule::Cyclic, ccd_epoch), (OrderRule::Sgs, sgs_epoch), (OrderRule::Gbs, gbs_epoch)];
    for (rule, f) in epochs {
        let mut y = x.clone();
        for _ in 0..4 {
            y = f(&p, &y).unwrap().into_inner();
        }
        let z = advance(&p, rule, &x, 4, 0, opts).unwrap();
        assert!(max_diff(&y, &z) < 1e-12, "{rule:?}");
    }
    assert_eq!(advance(&p, OrderRule::Gbs, &x, 0, 0, opts).unwrap().into_inner(), x);
    let a = advance(&p, OrderRule::RandomPermuted, &x, 3, 11, opts).unwrap();
    assert_eq!(a, advance(&p, OrderRule::RandomPermuted, &x, 3, 11, opts).unwrap());
    assert!(advance(&p, OrderRule::Cyclic, &x[..3], 1, 0, opts).is_err());
}

#[test]
fn rpcd_at_n1_is_cyclic() {
    let p = QuadraticProblem::new(DenseMatrix::from_diag(&[2.0]), Vector::from(vec![4.0])).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(rpcd_epoch(&p, &[7.0], &mut rng).unwrap(), ccd_epoch(&p, &[7.0]).unwrap());
}

#[test]
fn rcd_identity_leaves_unvisited_coordinates() {
    let n = 50;
    let p = identity_problem(n);
    let x = vec![1.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let trials = 2000;
    let mut untouched = 0usize;
    for _ in 0..trials {
        let y = rcd_epoch(&p, &x, &mut rng).unwrap();
        assert!(y.iter().all(|&v| v == 0.0 || v == 1.0));
        untouched += y.iter().filter(|&&v| v == 1.0).count();
    }
    let frac = untouched as f64 / (trials * n) as f64;
    let expected = (1.0 - 1.0 / n as f64).powi(n as i32);
    assert!((frac - expected).abs() < 0.01, "{frac} vs {expected}");
}

#[test]
fn rcd_mean_contraction_at_n2() {
    // (1,-1) spans the λ = 0.5 eigenspace of Q(0.5,2); the expected epoch map
    // (I − Q/2)² scales it by 0.75² = 0.5625.
    let p = make_worst_case(2, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let x0 = [1.0, -1.0];
    let samples = 100_000;
    let mut acc = 0.0;
    for _ in 0..samples {
        let y = rcd_epoch(&p, &x0, &mut rng).unwrap();
        acc += (y[0] - y[1]) / 2.0;
    }
    let mean = acc / samples as f64;
    assert!((mean / 0.5625 - 1.0).abs() < 0.02, "mean contraction {mean}");
}

#[test]
fn rpcd_distribution_is_permutation_invariant() {
    // On Q(c,n) relabelling coordinates and relabelling back leaves the law of
    // the iterates unchanged; compare first moments of one epoch.
    let n = 5;
    let p = make_worst_case(n, 0.7).unwrap();
    let perm = [3usize, 0, 4, 1, 2];
    let pp = p.permuted(&perm).unwrap();
    let x0 = [0.9, -0.4, 0.1, 0.6, -0.8];
    let mut px0 = [0.0; 5];
    for i in 0..n {
        px0[perm[i]] = x0[i];
    }
    let samples = 40_000;
    let (mut m1, mut m2) = (vec![0.0; n], vec![0.0; n]);
    let mut r1 = ChaCha8Rng::seed_from_u64(1);
    let mut r2 = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..samples {
        let a = rpcd_epoch(&p, &x0, &mut r1).unwrap();
        let b = rpcd_epoch(&pp, &px0, &mut r2).unwrap();
        for i in 0..n {
            m1[i] += a[i] / samples as f64;
            m2[i] += b[perm[i]] / samples as f64;
        }
    }
    assert!(max_diff(&m1, &m2) < 0.01, "{m1:?} vs {m2:?}");
}

#[test]
fn worst_case_gbs_epochs_and_ratio() {
    let p = make_worst_case(100, 0.8).unwrap();
    let opts = RunOptions::default();
    for seed in 0..2 {
        let g = run_to_tolerance(&p, OrderRule::Gbs, stop(1e-8), seed, &Init::Uniform, opts).unwrap();
        let c = run_to_tolerance(&p, OrderRule::Cyclic, stop(1e-8), seed, &Init::Uniform, opts).unwrap();
        assert!(g.converged() && c.converged());
        assert!((40_000..=65_000).contains(&g.epochs), "GBS epochs {}", g.epochs);
        let ratio = g.epochs as f64 / c.epochs as f64;
        assert!((1.9..=2.1).contains(&ratio), "GBS/C-CD {ratio}");
        assert!(*g.error_trace.last().unwrap() <= 1e-8);
        assert_eq!(g.passes(), 2 * g.epochs);
    }
}

#[test]
fn trace_csv_layout() {
    let p = make_worst_case(4, 0.5).unwrap();
    let r = run_to_tolerance(&p, OrderRule::Sgs, stop(1e-6), 0, &Init::Uniform, RunOptions::default()).unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("epoch,relative_error,cumulative_passes"));
    assert_eq!(lines.clone().count(), r.epochs + 1);
    let last: Vec<&str> = lines.last().unwrap().split(',').collect();
    assert_eq!(last[2].parse::<usize>().unwrap(), 2 * r.epochs);
}

#[test]
fn stopping_rule_validation() {
    assert!(StoppingRule::new(0.0, 10).is_err());
    assert!(StoppingRule::new(1e-3, 0).is_err());
    assert!(StoppingRule::new(f64::NAN, 10).is_err());
    let p = make_worst_case(30, 0.9).unwrap();
    let r = run_to_tolerance(&p, OrderRule::Cyclic, StoppingRule::new(1e-12, 3).unwrap(), 0, &Init::Uniform, RunOptions::default())
        .unwrap();
    assert_eq!(r.outcome, Outcome::MaxEpochs);
    assert_eq!(r.epochs, 3);
}

#[test]
fn objective_metric_trace_is_monotone_for_exact_rules() {
    let (p, x) = random_problem(12, 8);
    let opts = RunOptions { metric: ErrorMetric::Objective, ..RunOptions::default() };
    for rule in [OrderRule::Cyclic, OrderRule::Sgs, OrderRule::Gbs, OrderRule::Gradient] {
        let r = run_to_tolerance(&p, rule, stop(1e-10), 0, &Init::Given(Vector::from(x.clone())), opts).unwrap();
        assert!(r.converged());
        assert!(r.error_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{rule}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn epochs_match_update_matrices(seed in any::<u64>(), n in 1usize..=12) {
        let (p, x) = random_problem(seed, n);
        let lmax = p.spectrum().unwrap().lambda_max;
        let cases = [
            (OrderRule::Cyclic, ccd_epoch(&p, &x).unwrap()),
            (OrderRule::Sgs, sgs_epoch(&p, &x).unwrap()),
            (OrderRule::Gbs, gbs_epoch(&p, &x).unwrap()),
            (OrderRule::Gradient, gd_epoch(&p, &x, lmax).unwrap()),
        ];
        for (rule, y) in cases {
            let m = update_matrix(rule, &p).unwrap();
            let want = affine(&m, &p, &x);
            let scale = x.iter().chain(p.x_star.iter()).fold(1.0f64, |a, v| a.max(v.abs()));
            prop_assert!(max_diff(&y, &want) <= 1e-10 * scale, "{} n={}", rule, n);
        }
    }

    #[test]
    fn coordinate_steps_never_increase_objective(seed in any::<u64>(), n in 1usize..=12, i in 0usize..12) {
        let (p, x) = random_problem(seed, n);
        let i = i % n;
        let y = coordinate_step(&p, &x, i).unwrap();
        let f0 = p.objective(&x);
        let f1 = p.objective(&y);
        prop_assert!(f1 <= f0 + 1e-12 * f0.abs().max(1.0));
        let grad = p.q.matvec(&y).unwrap();
        prop_assert!((grad[i] - p.b[i]).abs() <= 1e-12 * p.q.max_abs().max(1.0) * 10.0);
    }

    #[test]
    fn gbs_equals_ccd_when_n_is_two(seed in any::<u64>()) {
        let (p, x) = random_problem(seed, 2);
        let g = gbs_epoch(&p, &x).unwrap();
        let c = ccd_epoch(&p, &x).unwrap();
        prop_assert!(max_diff(&g, &c) <= 1e-14 * x.iter().fold(1.0f64, |a, v| a.max(v.abs())));
    }
}
