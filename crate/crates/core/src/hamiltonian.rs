//! The Hamiltonian `H(a, b) = tr V(T) - Σ α_k log b_k` of the tridiagonal
//! model, with its gradient and banded Hessian.
//!
//! The Hessian is assembled in the interleaved coordinate order
//! `(a_1, b_1, a_2, b_2, ..., a_n)`, in which it is banded with half-width
//! `2 deg V - 1`.

use crate::band::{BandMatrix, SymBandMatrix};
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::tridiag::TridiagonalSym;

/// Log coefficients `α_k = 1 - k/n - 1/(nβ)`, `k = 1..n-1`; `β = ∞` drops the
/// last term. Negative for `k > n - 1/β` when `β < 1`.
pub fn beta_alphas(n: usize, beta: f64) -> Vec<f64> {
    let inv = if beta.is_infinite() { 0.0 } else { 1.0 / (n as f64 * beta) };
    (1..n)
        .map(|k| {
            let a = 1.0 - k as f64 / n as f64 - inv;
            // cancellation at beta = 1, k = n - 1 must give an exact zero
            if a.abs() < 1e-12 {
                0.0
            } else {
                a
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    v: Potential,
    alphas: Vec<f64>,
}

impl Hamiltonian {
    /// `alphas` has length `n - 1`, entries in `[0, 1]`.
    pub fn new(v: Potential, alphas: Vec<f64>) -> Result<Hamiltonian> {
        if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::validation(format!("log coefficient {a} outside [0, 1]")));
        }
        Ok(Hamiltonian { v, alphas })
    }

    /// Hamiltonian of the `β`-model at size `n` (`β = ∞` allowed).
    pub fn beta_model(v: Potential, n: usize, beta: f64) -> Result<Hamiltonian> {
        if n < 2 {
            return Err(Error::validation("model size must be at least 2"));
        }
        if !(beta > 0.0) {
            return Err(Error::validation("beta must be positive"));
        }
        Hamiltonian::new(v, beta_alphas(n, beta))
    }

    pub fn potential(&self) -> &Potential {
        &self.v
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn n(&self) -> usize {
        self.alphas.len() + 1
    }

    fn check_size(&self, t: &TridiagonalSym) {
        assert_eq!(t.n(), self.n(), "matrix size does not match the Hamiltonian");
    }

    /// `tr V(T)`; defined for any symmetric tridiagonal `T`.
    pub fn trace_v(&self, t: &TridiagonalSym) -> f64 {
        BandMatrix::polynomial(self.v.coeffs(), t).trace()
    }

    /// `H(a, b)`, `+∞` when some `b_k <= 0` carries a positive `α_k`.
    pub fn value(&self, t: &TridiagonalSym) -> f64 {
        self.check_size(t);
        let mut logs = 0.0;
        for (b, a) in t.offdiag().iter().zip(&self.alphas) {
            if *a > 0.0 {
                if *b <= 0.0 {
                    return f64::INFINITY;
                }
                logs += a * b.ln();
            }
        }
        self.trace_v(t) - logs
    }

    /// `(∂H/∂a, ∂H/∂b)` from `d tr V(T) = tr(V'(T) dT)`.
    pub fn gradient(&self, t: &TridiagonalSym) -> (Vec<f64>, Vec<f64>) {
        self.check_size(t);
        let vp = BandMatrix::polynomial(&self.v.derivative_coeffs(), t);
        let n = t.n();
        let ga = (0..n).map(|i| vp.get(i, i)).collect();
        let gb = (0..n - 1)
            .map(|i| {
                let b = t.offdiag()[i];
                let log_term = if self.alphas[i] > 0.0 { self.alphas[i] / b } else { 0.0 };
                2.0 * vp.get(i, i + 1) - log_term
            })
            .collect();
        (ga, gb)
    }

    /// Half-width of the Hessian band in interleaved coordinates.
    pub fn hessian_width(&self) -> usize {
        2 * self.v.degree() - 1
    }

    /// Hessian in interleaved coordinates, from
    /// `∂²tr V(T) = Σ_m m c_m Σ_{p+q=m-2} tr(T^p E_α T^q E_β)`.
    pub fn hessian(&self, t: &TridiagonalSym) -> SymBandMatrix {
        self.check_size(t);
        let n = t.n();
        let dim = 2 * n - 1;
        let deg = self.v.degree();
        let c = self.v.coeffs();
        let powers = BandMatrix::powers(t, deg - 2);
        let w: Vec<f64> = (0..=deg).map(|m| m as f64 * c[m]).collect();
        let mut h = SymBandMatrix::zeros(dim, self.hessian_width());

        // unit perturbations: a_i -> {(i,i)}, b_i -> {(i,i+1), (i+1,i)}
        let entries = |coord: usize| -> ([(usize, usize); 2], usize) {
            let i = coord / 2;
            if coord % 2 == 0 {
                ([(i, i), (i, i)], 1)
            } else {
                ([(i, i + 1), (i + 1, i)], 2)
            }
        };
        for c1 in 0..dim {
            let (e1, n1) = entries(c1);
            for c2 in c1..(c1 + h.width() + 1).min(dim) {
                let (e2, n2) = entries(c2);
                let mut s = 0.0;
                for p in 0..=deg - 2 {
                    for q in 0..=deg - 2 - p {
                        let wm = w[p + q + 2];
                        if wm == 0.0 {
                            continue;
                        }
                        let (tp, tq) = (&powers[p], &powers[q]);
                        let mut g = 0.0;
                        for &(i, j) in &e1[..n1] {
                            for &(k, l) in &e2[..n2] {
                                g += tp.get(l, i) * tq.get(j, k);
                            }
                        }
                        s += wm * g;
                    }
                }
                if c1 == c2 && c1 % 2 == 1 {
                    let (k, b) = (c1 / 2, t.offdiag()[c1 / 2]);
                    if self.alphas[k] > 0.0 {
                        s += self.alphas[k] / (b * b);
                    }
                }
                if s != 0.0 {
                    h.add(c2, c1, s);
                }
            }
        }
        h
    }
}

/// Interleave `(a, b)` into `(a_1, b_1, ..., a_n)`.
pub fn interleave(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(a.len() + b.len());
    for i in 0..a.len() {
        x.push(a[i]);
        if i < b.len() {
            x.push(b[i]);
        }
    }
    x
}

/// Inverse of [`interleave`].
pub fn deinterleave(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let a = x.iter().step_by(2).copied().collect();
    let b = x.iter().skip(1).step_by(2).copied().collect();
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_t(n: usize, rng: &mut ChaCha8Rng) -> TridiagonalSym {
        let d = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = (0..n - 1).map(|_| rng.random_range(0.3..1.2)).collect();
        TridiagonalSym::jacobi(d, e).unwrap()
    }

    fn perturb(t: &TridiagonalSym, coord: usize, h: f64) -> TridiagonalSym {
        let (a, b) = (t.diag().to_vec(), t.offdiag().to_vec());
        let mut x = interleave(&a, &b);
        x[coord] += h;
        let (a, b) = deinterleave(&x);
        TridiagonalSym::new(a, b).unwrap()
    }

    #[test]
    fn hermite_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_t(7, &mut rng);
        let h = Hamiltonian::new(Potential::hermite(), vec![0.0; 6]).unwrap();
        let want = (t.diag().iter().map(|a| a * a).sum::<f64>()
            + 2.0 * t.offdiag().iter().map(|b| b * b).sum::<f64>())
            / 4.0;
        assert!((h.trace_v(&t) - want).abs() < 1e-13);
        let (ga, gb) = h.gradient(&t);
        for (g, a) in ga.iter().zip(t.diag()) {
            assert!((g - a / 2.0).abs() < 1e-14);
        }
        for (g, b) in gb.iter().zip(t.offdiag()) {
            assert!((g - b).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = Potential::new(vec![0.1, -0.3, 0.5, 0.2, 0.25, 0.0, 0.05]).unwrap();
        let n = 9;
        let t = random_t(n, &mut rng);
        let ham = Hamiltonian::beta_model(v, n, 2.0).unwrap();
        let (ga, gb) = ham.gradient(&t);
        let g = interleave(&ga, &gb);
        let hess = ham.hessian(&t);
        let eps = 1e-5;
        for c in 0..2 * n - 1 {
            let fd = (ham.value(&perturb(&t, c, eps)) - ham.value(&perturb(&t, c, -eps))) / (2.0 * eps);
            assert!((fd - g[c]).abs() <= 1e-7 * (1.0 + g[c].abs()), "coord {c}: {fd} vs {}", g[c]);
            let (pa, pb) = ham.gradient(&perturb(&t, c, eps));
            let (ma, mb) = ham.gradient(&perturb(&t, c, -eps));
            let gp = interleave(&pa, &pb);
            let gm = interleave(&ma, &mb);
            for r in 0..2 * n - 1 {
                let fd = (gp[r] - gm[r]) / (2.0 * eps);
                let got = hess.get(r, c);
                assert!((fd - got).abs() <= 1e-6 * (1.0 + got.abs()), "({r},{c}): {fd} vs {got}");
            }
        }
    }

    #[test]
    fn value_flags_nonpositive_b() {
        let t = TridiagonalSym::new(vec![0.0, 0.0], vec![-0.1]).unwrap();
        let h = Hamiltonian::beta_model(Potential::hermite(), 2, 2.0).unwrap();
        assert_eq!(h.value(&t), f64::INFINITY);
        let h0 = Hamiltonian::new(Potential::hermite(), vec![0.0]).unwrap();
        assert!(h0.value(&t).is_finite());
    }

    #[test]
    fn alpha_range_checked() {
        assert!(Hamiltonian::new(Potential::hermite(), vec![1.2]).is_err());
        let a = beta_alphas(4, f64::INFINITY);
        assert_eq!(a, vec![0.75, 0.5, 0.25]);
        let a = beta_alphas(4, 1.0);
        assert!((a[2] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn interleave_roundtrip() {
        let x = interleave(&[1.0, 2.0, 3.0], &[4.0, 5.0]);
        assert_eq!(x, vec![1.0, 4.0, 2.0, 5.0, 3.0]);
        assert_eq!(deinterleave(&x), (vec![1.0, 2.0, 3.0], vec![4.0, 5.0]));
    }
}
