//! Exact algebraic identities of Jacobi matrices, checked numerically.

use crate::error::{Error, Result};

use super::TridiagonalSym;

/// `|log Π b_k^{2(n-k)} - log(Π q_i^2 Π_{i<j} (λ_i - λ_j)^2)|`, evaluated in the
/// log domain so it stays finite for large `n`.
pub fn spectral_map_residual(t: &TridiagonalSym) -> Result<f64> {
    t.require_jacobi()?;
    let n = t.n();
    let lhs: f64 = t
        .offdiag()
        .iter()
        .enumerate()
        .map(|(k, b)| 2.0 * (n - (k + 1)) as f64 * b.ln())
        .sum();
    let mu = t.spectral_measure()?;
    let lam = mu.lambdas();
    let mut rhs: f64 = mu.weights().iter().map(|w| w.ln()).sum();
    for i in 0..n {
        for j in i + 1..n {
            rhs += 2.0 * (lam[j] - lam[i]).abs().ln();
        }
    }
    Ok((lhs - rhs).abs())
}

/// Result of the split identity for the top eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitIdentity {
    /// `λ_max(T)`.
    pub full: f64,
    /// `λ_max(T[1,m] + q r e_mm)`.
    pub left: f64,
    /// `λ_max(T[m+1,n] + (q/r) e_11)`.
    pub right: f64,
    /// `r = φ_{m+1} / φ_m` from the top eigenvector.
    pub ratio: f64,
}

impl SplitIdentity {
    pub fn max_discrepancy(&self) -> f64 {
        (self.full - self.left).abs().max((self.full - self.right).abs())
    }
}

/// `(λ_max(T[1,m] + q r e_mm), λ_max(T[m+1,n] + (q/r) e_11))` for a given
/// ratio `r > 0`; `m` is one-based, `q = T_{m,m+1}`.
pub fn split_values_at(t: &TridiagonalSym, m: usize, r: f64) -> Result<(f64, f64)> {
    let n = t.n();
    if m == 0 || m >= n {
        return Err(Error::validation(format!("split index {m} not in 1..={}", n - 1)));
    }
    if r <= 0.0 || !r.is_finite() {
        return Err(Error::validation("split ratio must be positive"));
    }
    let q = t.offdiag()[m - 1];
    let left = t.minor(0..m)?.with_diagonal_added(m - 1, q * r).eigen_max();
    let right = t.minor(m..n)?.with_diagonal_added(0, q / r).eigen_max();
    Ok((left, right))
}

/// Evaluate both sides of the split identity
/// `λ_max(T) = max_r min(λ_max(T[1,m] + q r e_mm), λ_max(T[m+1,n] + (q/r) e_11))`
/// at the optimal ratio read off the Perron eigenvector.
pub fn split_maxeig_identity(t: &TridiagonalSym, m: usize) -> Result<SplitIdentity> {
    t.require_jacobi()?;
    let n = t.n();
    if m == 0 || m >= n {
        return Err(Error::validation(format!("split index {m} not in 1..={}", n - 1)));
    }
    let top = t.eigen_largest(1)?.remove(0);
    let (phi_m, phi_next) = (top.vector[m - 1], top.vector[m]);
    if phi_m <= 0.0 || phi_next <= 0.0 {
        return Err(Error::Degenerate(format!(
            "top eigenvector not positive at the split ({phi_m}, {phi_next})"
        )));
    }
    let ratio = phi_next / phi_m;
    let (left, right) = split_values_at(t, m, ratio)?;
    Ok(SplitIdentity {
        full: top.value,
        left,
        right,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::super::test_support::random_jacobi;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two_spectral_map() {
        let t = TridiagonalSym::jacobi(vec![0.0, 0.0], vec![0.8]).unwrap();
        assert!(spectral_map_residual(&t).unwrap() < 1e-14);
    }

    #[test]
    fn random_spectral_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let t = random_jacobi(8, &mut rng);
            assert!(spectral_map_residual(&t).unwrap() < 1e-8);
        }
    }

    #[test]
    fn spectral_map_under_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_jacobi(10, &mut rng);
        let r0 = spectral_map_residual(&t).unwrap();
        let r1 = spectral_map_residual(&t.scaled(3.7)).unwrap();
        assert!(r0 < 1e-8 && r1 < 1e-8);
        assert!((r0 - r1).abs() < 1e-8);
    }

    #[test]
    fn split_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let t = random_jacobi(10, &mut rng);
            let s = split_maxeig_identity(&t, 4).unwrap();
            assert!(s.max_discrepancy() < 1e-9, "{s:?}");
        }
    }

    #[test]
    fn palindromic_split_ratio_is_one() {
        let d = vec![0.1, -0.4, 0.3, 0.3, -0.4, 0.1];
        let e = vec![0.5, 1.1, 0.7, 1.1, 0.5];
        let t = TridiagonalSym::jacobi(d, e).unwrap();
        let s = split_maxeig_identity(&t, 3).unwrap();
        assert!((s.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn other_ratios_do_not_exceed_lambda_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = random_jacobi(10, &mut rng);
        let s = split_maxeig_identity(&t, 4).unwrap();
        for _ in 0..50 {
            let r = s.ratio * (rng.random_range(-3.0f64..3.0)).exp();
            let (l, rgt) = split_values_at(&t, 4, r).unwrap();
            assert!(l.min(rgt) <= s.full + 1e-12);
        }
    }

    #[test]
    fn split_index_checked() {
        let t = TridiagonalSym::jacobi(vec![0.0; 3], vec![1.0; 2]).unwrap();
        assert!(split_maxeig_identity(&t, 0).is_err());
        assert!(split_maxeig_identity(&t, 3).is_err());
    }
}
