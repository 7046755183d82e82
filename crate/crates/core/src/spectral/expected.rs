use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instances::QuadraticProblem;
use crate::matcore::{DenseMatrix, Operator, Structure};
use crate::rng::{permutation, stream_rng, Stream};

/// Largest `n` for which all `n!` orders are enumerated.
pub const ENUMERATION_LIMIT: usize = 8;

const MC_CHUNK: usize = 64;

/// How the permutation-averaged update matrix is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedMode {
    /// Average over all `n!` orders (`n ≤ 8`).
    Enumerate,
    /// Permutation-invariant closed form for equicorrelated `Q`.
    ClosedForm,
    /// Seeded sample average.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Expected one-epoch update matrix of RP-CD, `E_σ[I − Γ_σ⁻¹Q]`, where `Γ_σ`
/// keeps the entries of `Q` that are updated no later than their row
/// coordinate in order `σ`.
pub fn expected_rpcd_matrix(problem: &QuadraticProblem, mode: ExpectedMode) -> Result<DenseMatrix> {
    let n = problem.n();
    match mode {
        ExpectedMode::Enumerate => {
            if n > ENUMERATION_LIMIT {
                return Err(Error::TooLarge { n, limit: ENUMERATION_LIMIT });
            }
            let op = problem.operator();
            let mut sum = DenseMatrix::zeros(n, n);
            let mut order: Vec<usize> = (0..n).collect();
            let mut count = 0usize;
            loop {
                accumulate(&op, &order, &mut sum)?;
                count += 1;
                if !next_permutation(&mut order) {
                    break;
                }
            }
            Ok(sum.scale(1.0 / count as f64))
        }
        ExpectedMode::ClosedForm => match problem.structure {
            Structure::Equicorrelated { diag, off } => {
                let (d, o) = closed_form_entries(n, diag, off);
                Ok(DenseMatrix::symmetric_from_fn(n, |i, j| if i == j { d } else { o }))
            }
            Structure::General => Err(Error::Parameter(
                "closed-form expectation needs a permutation-invariant (equicorrelated) Q".into(),
            )),
        },
        ExpectedMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::Parameter("Monte Carlo needs at least one sample".into()));
            }
            let op = problem.operator();
            let chunks = samples.div_ceil(MC_CHUNK);
            let partial: Vec<Result<DenseMatrix>> = (0..chunks)
                .into_par_iter()
                .map(|chunk| {
                    let mut rng: ChaCha8Rng = stream_rng(Stream::MonteCarlo, n, seed);
                    rng.set_stream(chunk as u64);
                    let mut sum = DenseMatrix::zeros(n, n);
                    let count = MC_CHUNK.min(samples - chunk * MC_CHUNK);
                    for _ in 0..count {
                        accumulate(&op, &permutation(&mut rng, n), &mut sum)?;
                    }
                    Ok(sum)
                })
                .collect();
            let mut total = DenseMatrix::zeros(n, n);
            for p in partial {
                total = total.add(&p?)?;
            }
            Ok(total.scale(1.0 / samples as f64))
        }
    }
}

/// Adds the update matrix of one sweep in `order` to `sum`, column by column.
fn accumulate(op: &Operator<'_>, order: &[usize], sum: &mut DenseMatrix) -> Result<()> {
    let n = op.n();
    let zero = vec![0.0; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        op.sweep(&mut e, &zero, order.iter().copied())?;
        for (i, v) in e.iter().enumerate() {
            sum[(i, j)] += v;
        }
    }
    Ok(())
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Diagonal and off-diagonal entries of the expected update matrix for
/// `Q = (d−o)I + o·eeᵀ`. Averaging `Γ⁻¹` over conjugation by all
/// permutations gives `αI + β(eeᵀ − I)` with `α` the mean diagonal and `β`
/// the mean off-diagonal entry of `Γ⁻¹`, which is lower-triangular Toeplitz.
fn closed_form_entries(n: usize, d: f64, o: f64) -> (f64, f64) {
    if n == 1 {
        return (0.0, 0.0);
    }
    // First column of Γ⁻¹: g_0 = 1/d, g_k = −(o/d)·Σ_{j<k} g_j.
    let mut partial = 0.0;
    let mut off_sum = 0.0;
    let mut alpha = 0.0;
    for k in 0..n {
        let g = if k == 0 { 1.0 / d } else { -(o / d) * partial };
        if k == 0 {
            alpha = g;
        } else {
            off_sum += (n - k) as f64 * g;
        }
        partial += g;
    }
    let nf = n as f64;
    let beta = off_sum / (nf * (nf - 1.0));
    let s = d - o;
    let k = (alpha - beta) * o + beta * s + beta * o * nf;
    (1.0 - (alpha - beta) * s - k, -k)
}

/// Spectral radius of the closed-form expected matrix (an equicorrelated
/// matrix with eigenvalues `diag − off` and `diag + (n−1)off`).
pub(crate) fn closed_form_radius(n: usize, d: f64, o: f64) -> f64 {
    let (dd, oo) = closed_form_entries(n, d, o);
    (dd - oo).abs().max((dd + (n as f64 - 1.0) * oo).abs())
}
