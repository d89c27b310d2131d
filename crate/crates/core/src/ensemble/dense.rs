use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tridiag::TridiagonalSym;

/// Largest size accepted by the dense oracle.
pub const DENSE_ORACLE_MAX_N: usize = 64;

/// GOE (`β = 1`) or GUE (`β = 2`) sample, scaled so that its eigenvalues have
/// density `∝ exp(-βn Σ λ²/4) Π|λ_i - λ_j|^β`, reduced to a Jacobi matrix by
/// Householder reflections.
pub fn dense_gaussian_oracle<R: Rng + ?Sized>(n: usize, beta: u32, rng: &mut R) -> Result<TridiagonalSym> {
    if n < 2 || n > DENSE_ORACLE_MAX_N {
        return Err(Error::validation(format!(
            "dense oracle supports 2 <= n <= {DENSE_ORACLE_MAX_N}, got {n}"
        )));
    }
    let nf = n as f64;
    let mut g = || -> f64 { StandardNormal.sample(rng) };
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    match beta {
        1 => {
            for i in 0..n {
                m[i * n + i] = Complex64::new(g() * (2.0 / nf).sqrt(), 0.0);
                for j in i + 1..n {
                    let x = Complex64::new(g() / nf.sqrt(), 0.0);
                    m[i * n + j] = x;
                    m[j * n + i] = x;
                }
            }
        }
        2 => {
            for i in 0..n {
                m[i * n + i] = Complex64::new(g() / nf.sqrt(), 0.0);
                for j in i + 1..n {
                    let s = 1.0 / (2.0 * nf).sqrt();
                    let x = Complex64::new(g() * s, g() * s);
                    m[i * n + j] = x;
                    m[j * n + i] = x.conj();
                }
            }
        }
        _ => return Err(Error::validation(format!("dense oracle supports beta 1 or 2, got {beta}"))),
    }
    Ok(householder_tridiagonalize(m, n))
}

/// Unitary reduction of a Hermitian matrix (row-major) to a real Jacobi
/// matrix; the complex sub-diagonal is made positive by a diagonal unitary
/// similarity, so only its moduli are kept.
pub(crate) fn householder_tridiagonalize(mut a: Vec<Complex64>, n: usize) -> TridiagonalSym {
    let idx = |i: usize, j: usize| i * n + j;
    for k in 0..n.saturating_sub(2) {
        let norm = (k + 1..n).map(|i| a[idx(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[idx(k + 1, k)];
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let alpha = -phase * norm;
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| a[idx(i, k)]).collect();
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= vnorm);
        // A <- H A H with H = I - 2 v v*, acting on rows/cols k+1..n
        // p = A v, w = p - (v* p) v, A <- A - 2 v w* - 2 w v*
        let off = k + 1;
        let p: Vec<Complex64> = (0..n)
            .map(|i| (0..v.len()).map(|j| a[idx(i, off + j)] * v[j]).sum())
            .collect();
        let vp: Complex64 = (0..v.len()).map(|j| v[j].conj() * p[off + j]).sum();
        let mut w = p;
        for j in 0..v.len() {
            w[off + j] -= vp * v[j];
        }
        for i in 0..n {
            for j in 0..n {
                let vi = if i >= off { v[i - off] } else { Complex64::new(0.0, 0.0) };
                let vj = if j >= off { v[j - off] } else { Complex64::new(0.0, 0.0) };
                a[idx(i, j)] -= 2.0 * (vi * w[j].conj() + w[i] * vj.conj());
            }
        }
    }
    let diag = (0..n).map(|i| a[idx(i, i)].re).collect();
    let offdiag = (0..n - 1).map(|i| a[idx(i + 1, i)].norm()).collect();
    TridiagonalSym::new(diag, offdiag).expect("finite entries")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_dirichlet_weights, sample_hermite_de};
    use crate::stats::{ks_critical_value, ks_two_sample};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense_eigs(m: &[Complex64], n: usize) -> Vec<f64> {
        // embed Hermitian M = X + iY as the real symmetric [[X, -Y], [Y, X]];
        // every eigenvalue appears twice
        let big = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
            let z = m[(i % n) * n + (j % n)];
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let mut ev: Vec<f64> = big.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev.into_iter().step_by(2).collect()
    }

    #[test]
    fn tridiagonalization_preserves_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 12;
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            m[i * n + i] = Complex64::new(StandardNormal.sample(&mut rng), 0.0);
            for j in i + 1..n {
                let z = Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                m[i * n + j] = z;
                m[j * n + i] = z.conj();
            }
        }
        let want = dense_eigs(&m, n);
        let t = householder_tridiagonalize(m, n);
        assert!(t.is_jacobi());
        for (a, b) in t.eigenvalues().iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_unsupported() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(dense_gaussian_oracle(4, 4, &mut rng).is_err());
        assert!(dense_gaussian_oracle(65, 1, &mut rng).is_err());
    }

    #[test]
    fn goe_n2_offdiagonal_law_matches_de() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000;
        let x: Vec<f64> = (0..draws)
            .map(|_| dense_gaussian_oracle(2, 1, &mut rng).unwrap().offdiag()[0])
            .collect();
        let y: Vec<f64> = (0..draws)
            .map(|_| sample_hermite_de(2, 1.0, &mut rng).unwrap().offdiag()[0])
            .collect();
        let r = ks_two_sample(&x, &y);
        assert!(r.statistic < ks_critical_value(0.01, draws, draws), "{r:?}");
    }

    #[test]
    fn gue_entries_match_de() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, draws) = (6, 20_000);
        for (idx, diag) in [(0, true), (1, false), (3, false), (2, true)] {
            let pick = |t: TridiagonalSym| if diag { t.diag()[idx] } else { t.offdiag()[idx] };
            let x: Vec<f64> = (0..draws).map(|_| pick(dense_gaussian_oracle(n, 2, &mut rng).unwrap())).collect();
            let y: Vec<f64> = (0..draws).map(|_| pick(sample_hermite_de(n, 2.0, &mut rng).unwrap())).collect();
            let r = ks_two_sample(&x, &y);
            assert!(r.statistic < ks_critical_value(0.001, draws, draws), "{idx} {diag}: {r:?}");
        }
    }

    #[test]
    fn spectral_weights_are_dirichlet() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, draws) = (4, 10_000);
        for beta in [1u32, 2] {
            let x: Vec<f64> = (0..draws)
                .map(|_| {
                    let t = dense_gaussian_oracle(n, beta, &mut rng).unwrap();
                    // weight of the largest eigenvalue
                    *t.spectral_measure().unwrap().weights().last().unwrap()
                })
                .collect();
            let y: Vec<f64> = (0..draws)
                .map(|_| sample_dirichlet_weights(n, beta as f64, &mut rng).unwrap()[0])
                .collect();
            let r = ks_two_sample(&x, &y);
            assert!(r.statistic < ks_critical_value(0.001, draws, draws), "beta {beta}: {r:?}");
        }
    }
}
