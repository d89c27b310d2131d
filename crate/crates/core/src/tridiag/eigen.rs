//! Sturm-sequence bisection for eigenvalues and twisted factorizations for
//! eigenvectors.
//!
//! Eigenvectors are read off a twisted `N_k Δ N_k^T` factorization of
//! `T - λI`, which keeps small components (the tails of localized vectors)
//! accurate to high relative precision. Tight clusters fall back to inverse
//! iteration with explicit orthogonalization.

use crate::error::{Error, Result};

use super::TridiagonalSym;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit-norm eigenvector; its first nonzero coordinate is positive.
    pub vector: Vec<f64>,
}

impl TridiagonalSym {
    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let (d, e) = (self.diag(), self.offdiag());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
            lo = lo.min(d[i] - r);
            hi = hi.max(d[i] + r);
        }
        (lo, hi)
    }

    fn pivot_guard(&self) -> f64 {
        let emax = self.offdiag().iter().fold(0.0_f64, |m, b| m.max(b.abs()));
        f64::MIN_POSITIVE.max(f64::MIN_POSITIVE * 1e10 * emax * emax)
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via LDL^T pivots).
    pub fn sturm_count(&self, x: f64) -> usize {
        let (d, e) = (self.diag(), self.offdiag());
        let guard = self.pivot_guard();
        let mut q = 1.0;
        let mut count = 0;
        for i in 0..d.len() {
            q = (d[i] - x) - if i > 0 { e[i - 1] * e[i - 1] / q } else { 0.0 };
            if q.abs() < guard {
                q = -guard;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (zero-based) by bisection.
    pub fn kth_eigenvalue(&self, k: usize) -> f64 {
        let (lo, hi) = self.gershgorin();
        self.bisect(k, lo, hi)
    }

    fn bisect(&self, k: usize, lo: f64, hi: f64) -> f64 {
        if self.n() == 1 {
            return self.diag()[0];
        }
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let pad = 2.0 * f64::EPSILON * scale + self.pivot_guard();
        let (mut lo, mut hi) = (lo - pad, hi + pad);
        let tol = 2.0 * f64::EPSILON * scale;
        for _ in 0..256 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= tol || mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let (lo, hi) = self.gershgorin();
        (0..self.n()).map(|k| self.bisect(k, lo, hi)).collect()
    }

    /// Largest eigenvalue.
    pub fn eigen_max(&self) -> f64 {
        self.kth_eigenvalue(self.n() - 1)
    }

    /// Smallest eigenvalue.
    pub fn eigen_min(&self) -> f64 {
        self.kth_eigenvalue(0)
    }

    /// The `k` smallest eigenpairs, ascending.
    pub fn eigen_smallest(&self, k: usize) -> Result<Vec<EigenPair>> {
        if k == 0 || k > self.n() {
            return Err(Error::validation(format!(
                "requested {k} eigenpairs of a {}x{} matrix",
                self.n(),
                self.n()
            )));
        }
        Ok(self.eigenpairs((0..k).collect()))
    }

    /// The `k` largest eigenpairs, descending.
    pub fn eigen_largest(&self, k: usize) -> Result<Vec<EigenPair>> {
        if k == 0 || k > self.n() {
            return Err(Error::validation(format!(
                "requested {k} eigenpairs of a {}x{} matrix",
                self.n(),
                self.n()
            )));
        }
        let n = self.n();
        Ok(self.eigenpairs((0..k).map(|j| n - 1 - j).collect()))
    }

    /// Eigenpairs for the given zero-based ascending-order indices.
    pub fn eigenpairs(&self, indices: Vec<usize>) -> Vec<EigenPair> {
        let (lo, hi) = self.gershgorin();
        let values: Vec<f64> = indices.iter().map(|&k| self.bisect(k, lo, hi)).collect();
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let cluster_tol = 1e-9 * scale;

        let mut pairs: Vec<EigenPair> = Vec::with_capacity(values.len());
        for (j, &lambda) in values.iter().enumerate() {
            let neighbours: Vec<usize> = (0..j)
                .filter(|&i| (values[i] - lambda).abs() <= cluster_tol)
                .collect();
            let vector = if neighbours.is_empty() {
                twisted_vector(self, lambda)
            } else {
                let basis: Vec<&[f64]> = neighbours.iter().map(|&i| pairs[i].vector.as_slice()).collect();
                let mut v = twisted_vector(self, lambda);
                if !orthonormalize(&mut v, &basis) {
                    v = clustered_vector(self, lambda, &basis, j);
                }
                v
            };
            pairs.push(EigenPair {
                value: lambda,
                vector: fix_sign(vector),
            });
        }
        pairs
    }
}

/// Eigenvector for an accurate eigenvalue `lambda` from the twisted
/// factorization with the smallest |γ_k|.
fn twisted_vector(t: &TridiagonalSym, lambda: f64) -> Vec<f64> {
    let (d, e) = (t.diag(), t.offdiag());
    let n = d.len();
    if n == 1 {
        return vec![1.0];
    }
    let guard = t.pivot_guard().sqrt().max(f64::MIN_POSITIVE);
    let safe = |q: f64| if q.abs() < guard { if q < 0.0 { -guard } else { guard } } else { q };

    let mut dp = vec![0.0; n];
    dp[0] = safe(d[0] - lambda);
    for i in 1..n {
        dp[i] = safe(d[i] - lambda - e[i - 1] * e[i - 1] / dp[i - 1]);
    }
    let mut dm = vec![0.0; n];
    dm[n - 1] = safe(d[n - 1] - lambda);
    for i in (0..n - 1).rev() {
        dm[i] = safe(d[i] - lambda - e[i] * e[i] / dm[i + 1]);
    }
    let twist = (0..n)
        .min_by(|&i, &j| {
            let gi = (dp[i] + dm[i] - (d[i] - lambda)).abs();
            let gj = (dp[j] + dm[j] - (d[j] - lambda)).abs();
            gi.total_cmp(&gj)
        })
        .unwrap_or(0);

    let mut z = vec![0.0; n];
    z[twist] = 1.0;
    for i in (0..twist).rev() {
        z[i] = -(e[i] / dp[i]) * z[i + 1];
    }
    for i in twist + 1..n {
        z[i] = -(e[i - 1] / dm[i]) * z[i - 1];
    }
    normalize(&mut z);
    z
}

/// Inverse iteration against an existing cluster basis.
fn clustered_vector(t: &TridiagonalSym, lambda: f64, basis: &[&[f64]], seed: usize) -> Vec<f64> {
    let n = t.n();
    let scale = t.spectral_radius_bound().max(f64::MIN_POSITIVE);
    let shift = lambda + 4.0 * f64::EPSILON * scale;
    // deterministic pseudo-random start
    let mut state = 0x9E37_79B9_7F4A_7C15_u64 ^ (seed as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect();
    orthonormalize(&mut v, basis);
    for _ in 0..4 {
        v = solve_shifted(t, shift, &v);
        if !orthonormalize(&mut v, basis) {
            break;
        }
    }
    v
}

/// Solve `(T - shift I) x = rhs` with partial pivoting.
fn solve_shifted(t: &TridiagonalSym, shift: f64, rhs: &[f64]) -> Vec<f64> {
    let n = t.n();
    let (d, e) = (t.diag(), t.offdiag());
    // rows stored as (sub, diag, sup, sup2) after elimination
    let mut dl: Vec<f64> = e.to_vec();
    let mut dd: Vec<f64> = d.iter().map(|a| a - shift).collect();
    let mut du: Vec<f64> = e.to_vec();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut b = rhs.to_vec();
    let tiny = f64::EPSILON * t.spectral_radius_bound().max(1e-300);
    for i in 0..n.saturating_sub(1) {
        if dd[i].abs() >= dl[i].abs() {
            if dd[i].abs() < tiny {
                dd[i] = tiny;
            }
            let f = dl[i] / dd[i];
            dd[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        } else {
            let f = dd[i] / dl[i];
            dd[i] = dl[i];
            let tmp = dd[i + 1];
            dd[i + 1] = du[i] - f * tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            du[i] = tmp;
            b.swap(i, i + 1);
            b[i + 1] -= f * b[i];
        }
    }
    if dd[n - 1].abs() < tiny {
        dd[n - 1] = tiny;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= du2[i] * x[i + 2];
        }
        x[i] = s / dd[i];
    }
    x
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Modified Gram-Schmidt (twice) against `basis`; false if `v` collapses.
fn orthonormalize(v: &mut [f64], basis: &[&[f64]]) -> bool {
    let before = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..2 {
        for u in basis {
            let p: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u.iter()).for_each(|(a, b)| *a -= p * b);
        }
    }
    let after = normalize(v);
    after > 1e-8 * before
}

fn fix_sign(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(&first) = v.iter().find(|x| **x != 0.0) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}
