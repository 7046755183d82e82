use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symcd::matcore::*;
use symcd::Error;

fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn q(n: usize, c: f64) -> DenseMatrix {
    DenseMatrix::symmetric_from_fn(n, |i, j| if i == j { 1.0 } else { c })
}

fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let vals: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseMatrix::symmetric_from_fn(n, |i, j| vals[i * n + j])
}

fn random_square(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DenseMatrix {
    let vals: Vec<f64> = (0..r * c).map(|_| rng.gen_range(-scale..scale)).collect();
    DenseMatrix::from_fn(r, c, |i, j| vals[i * c + j])
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let g = random_square(rng, n, n, 1.0);
    g.transpose().matmul(&g).unwrap().add(&DenseMatrix::identity(n).scale(0.5)).unwrap().symmetrize().unwrap()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

#[test]
fn triangular_examples() {
    let g = lower_triangular(&q(3, 0.5)).unwrap();
    let want = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.5, 1.0, 0.0], [0.5, 0.5, 1.0]]).unwrap();
    assert_eq!(g, want);
    assert_eq!(lower_triangular(&DenseMatrix::identity(3)).unwrap(), DenseMatrix::identity(3));

    let g2 = DenseMatrix::from_rows(&[[1.0, 0.0], [0.5, 1.0]]).unwrap();
    assert_eq!(solve_lower(&g2, &[1.0, 1.0]).unwrap().to_vec(), vec![1.0, 0.5]);
    assert_eq!(solve_lower(&DenseMatrix::identity(2), &[3.0, -1.0]).unwrap().to_vec(), vec![3.0, -1.0]);
    let singular = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 0.0]]).unwrap();
    assert!(matches!(solve_lower(&singular, &[1.0, 1.0]), Err(Error::SingularTriangular { .. })));

    let u = DenseMatrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
    assert_eq!(solve_upper(&u, &[1.0, 1.0]).unwrap().to_vec(), vec![0.5, 1.0]);
    assert_eq!(solve_upper(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap().to_vec(), vec![1.0, 2.0, 3.0]);
    let u0 = DenseMatrix::from_rows(&[[1.0, 0.5], [0.0, 0.0]]).unwrap();
    assert!(matches!(solve_upper(&u0, &[1.0, 1.0]), Err(Error::SingularTriangular { .. })));
}

#[test]
fn cholesky_examples() {
    assert_eq!(cholesky(&DenseMatrix::identity(3)).unwrap(), DenseMatrix::identity(3));
    let d = DenseMatrix::from_diag(&[4.0, 9.0]);
    assert_eq!(cholesky(&d).unwrap(), DenseMatrix::from_diag(&[2.0, 3.0]));
    let c = cholesky(&q(2, 0.5)).unwrap();
    let want = DenseMatrix::from_rows(&[[1.0, 0.0], [0.5, 0.75f64.sqrt()]]).unwrap();
    assert!(c.sub(&want).unwrap().max_abs() < 1e-15);
}

#[test]
fn eigen_examples() {
    assert_eq!(sym_eigen(&DenseMatrix::from_diag(&[5.0, 2.0])).unwrap().values, vec![2.0, 5.0]);
    let v = sym_eigenvalues(&q(2, 0.5)).unwrap();
    assert!((v[0] - 0.5).abs() < 1e-14 && (v[1] - 1.5).abs() < 1e-14);
    let e = sym_eigen(&q(20, 0.99)).unwrap();
    assert!((e.min() - 0.01).abs() < 1e-12);
    assert!((e.max() - 19.81).abs() < 1e-12);
    assert!((spectral_radius_sym(&DenseMatrix::from_diag(&[-0.3, 0.2])).unwrap() - 0.3).abs() < 1e-15);
    assert!((spectral_radius_sym(&q(3, 0.8)).unwrap() - 2.6).abs() < 1e-12);
}

#[test]
fn spectral_norm_examples() {
    assert_eq!(spectral_norm(&DenseMatrix::zeros(3, 3)), 0.0);
    assert!((spectral_norm(&DenseMatrix::from_diag(&[3.0, -7.0])) - 7.0).abs() < 1e-10);
    assert!((spectral_norm(&q(2, 0.5)) - 1.5).abs() < 1e-10);
}

#[test]
fn eigen_agrees_with_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [1usize, 2, 5, 12, 40] {
        let s = random_symmetric(&mut rng, n);
        let oracle = sorted(to_na(&s).symmetric_eigen().eigenvalues.iter().copied().collect());
        let ql = sym_eigenvalues(&s).unwrap();
        let jac = sym_eigen(&s).unwrap().values;
        for k in 0..n {
            assert!((ql[k] - oracle[k]).abs() < 1e-10, "QL n={n}");
            assert!((jac[k] - oracle[k]).abs() < 1e-10, "Jacobi n={n}");
        }
    }
}

#[test]
fn general_eigenvalues_agree_with_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2usize, 3, 6, 15] {
        let m = random_square(&mut rng, n, n, 1.0);
        let mut ours: Vec<(f64, f64)> = general_eigenvalues(&m).unwrap().iter().map(|z| (z.re, z.im)).collect();
        let mut oracle: Vec<(f64, f64)> =
            to_na(&m).complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
        let key = |a: &(f64, f64), b: &(f64, f64)| a.partial_cmp(b).unwrap();
        ours.sort_by(key);
        oracle.sort_by(key);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1.abs() - b.1.abs()).abs() < 1e-9, "{a:?} vs {b:?}");
        }
        let rho_oracle = oracle.iter().map(|z| z.0.hypot(z.1)).fold(0.0, f64::max);
        assert!((spectral_radius(&m).unwrap() - rho_oracle).abs() < 1e-9);
    }
}

#[test]
fn spectral_norm_agrees_with_svd() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (r, c) in [(4usize, 4usize), (7, 3), (3, 9), (30, 30)] {
        let m = random_square(&mut rng, r, c, 2.0);
        let oracle = to_na(&m).singular_values().max();
        assert!((spectral_norm(&m) - oracle).abs() <= 1e-8 * oracle);
    }
}

#[test]
fn norm_dominates_radius_on_small_asymmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 1..=6 {
        let m = random_square(&mut rng, n, n, 1.0);
        assert!(spectral_norm(&m) >= spectral_radius(&m).unwrap() - 1e-10);
    }
}

#[test]
fn structured_operator_matches_dense_sweep() {
    let n = 9;
    let eq = Operator::equicorrelated(n, 1.0, 0.7);
    let dense = Operator::dense(q(n, 0.7)).unwrap();
    let x0: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
    let rhs = vec![0.25; n];
    let (mut a, mut b) = (x0.clone(), x0.clone());
    eq.sweep(&mut a, &rhs, (0..n).rev()).unwrap();
    dense.sweep(&mut b, &rhs, (0..n).rev()).unwrap();
    assert!(a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-13));
    let sq = eq.square().unwrap().to_dense();
    let want = q(n, 0.7).matmul(&q(n, 0.7)).unwrap();
    assert!(sq.sub(&want).unwrap().max_abs() < 1e-12);
    let sol = eq.solve(&rhs).unwrap();
    let back = dense.matvec(&sol);
    assert!(back.iter().all(|v| (v - 0.25).abs() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn eigen_reconstruction_and_permutation(seed in any::<u64>(), n in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_symmetric(&mut rng, n);
        let e = sym_eigen(&s).unwrap();
        let fro = s.frobenius().max(1e-300);
        prop_assert!(e.reconstruct().sub(&s).unwrap().frobenius() <= 1e-9 * fro);
        let gram = e.vectors.transpose().matmul(&e.vectors).unwrap();
        prop_assert!(gram.sub(&DenseMatrix::identity(n)).unwrap().max_abs() <= 1e-10);
        for k in 0..n {
            let v = e.vectors.column(k);
            let sv = s.matvec(&v).unwrap();
            let res: f64 = sv.iter().zip(&v).map(|(a, b)| (a - e.values[k] * b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-9 * fro);
        }
        let mut perm: Vec<usize> = (0..n).collect();
        symcd::rng::shuffle(&mut rng, &mut perm);
        let p = sym_eigenvalues(&s.permute_symmetric(&perm).unwrap()).unwrap();
        for (a, b) in p.iter().zip(&e.values) {
            prop_assert!((a - b).abs() <= 1e-10 * fro.max(1.0));
        }
    }

    #[test]
    fn lower_solve_inverts(seed in any::<u64>(), n in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_spd(&mut rng, n);
        let g = lower_triangular(&s).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gx = g.matvec(&x).unwrap();
        let back = solve_lower(&g, &gx).unwrap();
        prop_assert!(back.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-10));
    }

    #[test]
    fn cholesky_reconstructs(seed in any::<u64>(), n in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_spd(&mut rng, n);
        let c = cholesky(&s).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                prop_assert_eq!(c[(i, j)], 0.0);
            }
        }
        let back = c.matmul(&c.transpose()).unwrap();
        prop_assert!(back.sub(&s).unwrap().max_abs() <= 1e-12 * s.max_abs().max(1.0));
    }

    #[test]
    fn symmetric_builder_mirrors_exactly(seed in any::<u64>(), n in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_symmetric(&mut rng, n);
        prop_assert_eq!(s.max_asymmetry(), 0.0);
        prop_assert_eq!(s.as_slice().len(), n * n);
    }
}
