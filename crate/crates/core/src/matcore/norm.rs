use super::{dot, norm2, DenseMatrix};
use crate::tol;

/// Spectral norm `√λ_max(MᵀM)` by power iteration on `MᵀM`.
///
/// Starts from the normalised all-ones vector. Once the Rayleigh quotient
/// settles, the iterate is nudged by a fixed pattern and iterated for another
/// window; if the quotient moves, iteration resumes. This catches start
/// vectors that are orthogonal to the dominant singular vector without
/// introducing randomness.
pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    let (rows, cols) = (m.rows(), m.cols());
    if rows == 0 || cols == 0 || m.max_abs() == 0.0 {
        return 0.0;
    }
    let cap = (10 * rows * cols).max(1000);
    let apply = |v: &[f64]| -> Vec<f64> {
        let mv: Vec<f64> = (0..rows).map(|i| dot(m.row(i), v)).collect();
        let mut out = vec![0.0; cols];
        for (i, &mvi) in mv.iter().enumerate() {
            for (o, &mij) in out.iter_mut().zip(m.row(i)) {
                *o += mij * mvi;
            }
        }
        out
    };

    let mut v = vec![1.0 / (cols as f64).sqrt(); cols];
    let mut lambda = 0.0;
    let mut best = 0.0f64;
    let mut perturbed_at: Option<usize> = None;
    for it in 0..cap {
        let w = apply(&v);
        let next = dot(&v, &w);
        let w_norm = norm2(&w);
        best = best.max(next);
        if w_norm == 0.0 {
            // v lies in the null space; restart from the perturbed pattern.
            v = perturbation(cols);
            lambda = 0.0;
            perturbed_at = Some(it);
            continue;
        }
        let settled = (next - lambda).abs() <= tol::POWER_ITERATION * next.abs();
        lambda = next;
        v = w.into_iter().map(|x| x / w_norm).collect();
        if settled {
            match perturbed_at {
                Some(p) if it >= p + tol::POWER_STAGNATION_WINDOW => break,
                Some(_) => {}
                None => {
                    let pert = perturbation(cols);
                    for (vi, pi) in v.iter_mut().zip(&pert) {
                        *vi += 1e-3 * pi;
                    }
                    let nv = norm2(&v);
                    v.iter_mut().for_each(|x| *x /= nv);
                    perturbed_at = Some(it);
                }
            }
        }
    }
    best.max(lambda).max(0.0).sqrt()
}

fn perturbation(len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|i| ((i + 1) as f64 * 0.7548776662466927).fract() - 0.5).collect();
    let nrm = norm2(&raw);
    raw.into_iter().map(|x| x / nrm).collect()
}
