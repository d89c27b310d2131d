//! Polynomial potentials `V(s) = Σ c_m s^m` and the circulant-trace function
//! `W(a, b) = [1] V(a + b(z + 1/z))`.
//!
//! `W(a, b)` is the per-site trace `tr V(C) / dim C` of a symmetric circulant
//! matrix with constant diagonal `a` and constant first off-diagonal `b`
//! (valid once `dim C > deg V`). Expanding the Laurent constant term gives a
//! finite double-binomial sum, which is what is evaluated here, together with
//! its exact partial derivatives.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported polynomial degree. Binomial weights are tabulated exactly
/// up to this degree.
pub const MAX_DEGREE: usize = 40;

/// Evaluate `Σ coeffs[m] x^m` by Horner's rule.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Coefficients of the derivative polynomial.
pub fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(m, &c)| c * m as f64)
        .collect()
}

/// Real roots of a polynomial (ascending coefficients), ascending.
///
/// Recursive on the degree: the real roots of `p` are separated by those of
/// `p'`, so each monotone piece between consecutive critical points (and the
/// Cauchy bound) holds at most one root, found by bisection. A critical point
/// where `p` vanishes to rounding is a multiple root.
pub fn real_roots(coeffs: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    if deg == 1 {
        return vec![-c[0] / c[1]];
    }
    let lead = c[deg];
    let bound = 1.0 + c[..deg].iter().fold(0.0_f64, |m, v| m.max((v / lead).abs()));
    let abs_coeffs: Vec<f64> = c.iter().map(|v| v.abs()).collect();
    // rounding scale of Horner evaluation at x
    let noise = |x: f64| 64.0 * f64::EPSILON * poly_eval(&abs_coeffs, x.abs());

    let mut knots = vec![-bound];
    knots.extend(real_roots(&poly_derivative(&c)).into_iter().filter(|x| x.abs() < bound));
    knots.push(bound);

    let mut roots = Vec::new();
    for w in knots.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (poly_eval(&c, lo), poly_eval(&c, hi));
        if flo.abs() <= noise(lo) {
            roots.push(lo);
            continue;
        }
        if fhi.abs() <= noise(hi) || flo * fhi > 0.0 {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if poly_eval(&c, mid) * flo > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if let Some(&last) = knots.last() {
        if poly_eval(&c, last).abs() <= noise(last) {
            roots.push(last);
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * (1.0 + b.abs()));
    roots
}

/// `C(m, j) * C(j, j/2)` for even `j`, i.e. the number of closed walks of
/// length `j` on the cycle times the ways to place them among `m` factors.
fn w_weight_table() -> Vec<Vec<f64>> {
    let mut binom = vec![vec![0u128; MAX_DEGREE + 1]; MAX_DEGREE + 1];
    for m in 0..=MAX_DEGREE {
        binom[m][0] = 1;
        for j in 1..=m {
            binom[m][j] = binom[m - 1][j - 1] + if j < m { binom[m - 1][j] } else { 0 };
        }
    }
    (0..=MAX_DEGREE)
        .map(|m| {
            (0..=m)
                .map(|j| {
                    if j % 2 == 0 {
                        (binom[m][j] * binom[j][j / 2]) as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct WTerm {
    a_pow: i32,
    b_pow: i32,
    coef: f64,
}

/// Values and first/second partial derivatives of `W` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WDerivatives {
    pub w: f64,
    pub w1: f64,
    pub w2: f64,
    pub w11: f64,
    pub w12: f64,
    pub w22: f64,
}

impl WDerivatives {
    /// Residual of the identity `4 b W11 = b W22 + W2`.
    pub fn laurent_identity_residual(&self, b: f64) -> f64 {
        4.0 * b * self.w11 - b * self.w22 - self.w2
    }
}

/// A polynomial potential of even degree with positive leading coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    coeffs: Vec<f64>,
    convexity: f64,
    w_terms: Vec<WTerm>,
}

impl Potential {
    /// Build from ascending coefficients (`coeffs[m]` multiplies `s^m`).
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::validation("potential has no coefficients"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::validation("potential coefficients must be finite"));
        }
        let degree = coeffs.len() - 1;
        if degree < 2 || degree % 2 != 0 {
            return Err(Error::validation(format!(
                "potential degree must be even and at least 2, got {degree}"
            )));
        }
        if degree > MAX_DEGREE {
            return Err(Error::validation(format!(
                "potential degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        if coeffs[degree] <= 0.0 {
            return Err(Error::validation(
                "leading coefficient of the potential must be positive",
            ));
        }

        let table = w_weight_table();
        let mut w_terms = Vec::new();
        for (m, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for j in (0..=m).step_by(2) {
                w_terms.push(WTerm {
                    a_pow: (m - j) as i32,
                    b_pow: j as i32,
                    coef: c * table[m][j],
                });
            }
        }
        let mut v = Potential {
            coeffs,
            convexity: 0.0,
            w_terms,
        };
        v.convexity = v.compute_convexity();
        Ok(v)
    }

    /// The Gaussian potential `s^2 / 4`.
    pub fn hermite() -> Self {
        Potential::new(vec![0.0, 0.0, 0.25]).expect("valid")
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `min_s V''(s)`, stored at construction.
    pub fn convexity_constant(&self) -> f64 {
        self.convexity
    }

    pub fn is_uniformly_convex(&self) -> bool {
        self.convexity > 0.0
    }

    pub(crate) fn require_convex(&self) -> Result<()> {
        if self.is_uniformly_convex() {
            Ok(())
        } else {
            Err(Error::NotConvex {
                convexity: self.convexity,
            })
        }
    }

    /// Quadratic coefficients `(c0, c1, c2)` when `deg V = 2`.
    pub fn as_quadratic(&self) -> Option<(f64, f64, f64)> {
        (self.degree() == 2).then(|| (self.coeffs[0], self.coeffs[1], self.coeffs[2]))
    }

    pub fn eval(&self, s: f64) -> f64 {
        poly_eval(&self.coeffs, s)
    }

    pub fn derivative_coeffs(&self) -> Vec<f64> {
        poly_derivative(&self.coeffs)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        // Horner on the fly: Σ m c_m s^{m-1}
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (m, &c)| acc * s + c * m as f64)
    }

    pub fn second_derivative(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (m, &c)| acc * s + c * (m * (m - 1)) as f64)
    }

    /// Global minimizer of `V` over the real line.
    pub fn argmin(&self) -> f64 {
        let crit = real_roots(&self.derivative_coeffs());
        crit.into_iter()
            .min_by(|x, y| self.eval(*x).total_cmp(&self.eval(*y)))
            .unwrap_or(0.0)
    }

    /// The translated potential `s ↦ V(s - shift)`.
    pub fn shifted(&self, shift: f64) -> Potential {
        let d = self.degree();
        let mut out = vec![0.0; d + 1];
        // (s - c)^m = Σ_k C(m,k) s^k (-c)^{m-k}
        for (m, &c) in self.coeffs.iter().enumerate() {
            let mut binom = 1.0;
            for k in 0..=m {
                out[k] += c * binom * (-shift).powi((m - k) as i32);
                binom = binom * (m - k) as f64 / (k + 1) as f64;
            }
        }
        Potential::new(out).expect("translation preserves degree and leading coefficient")
    }

    fn compute_convexity(&self) -> f64 {
        let second = poly_derivative(&poly_derivative(&self.coeffs));
        if second.len() == 1 {
            return second[0];
        }
        let third = poly_derivative(&second);
        real_roots(&third)
            .into_iter()
            .map(|s| poly_eval(&second, s))
            .fold(f64::INFINITY, f64::min)
    }

    /// `W(a, b)`, even in `b`.
    pub fn w_value(&self, a: f64, b: f64) -> f64 {
        self.w_terms
            .iter()
            .map(|t| t.coef * a.powi(t.a_pow) * b.powi(t.b_pow))
            .sum()
    }

    /// All partials of `W` up to second order.
    pub fn w_partials(&self, a: f64, b: f64) -> WDerivatives {
        let mut d = WDerivatives {
            w: 0.0,
            w1: 0.0,
            w2: 0.0,
            w11: 0.0,
            w12: 0.0,
            w22: 0.0,
        };
        for t in &self.w_terms {
            let (p, q) = (t.a_pow, t.b_pow);
            let a0 = mono(a, p, 0);
            let a1 = mono(a, p, 1);
            let a2 = mono(a, p, 2);
            let b0 = mono(b, q, 0);
            let b1 = mono(b, q, 1);
            let b2 = mono(b, q, 2);
            d.w += t.coef * a0 * b0;
            d.w1 += t.coef * a1 * b0;
            d.w2 += t.coef * a0 * b1;
            d.w11 += t.coef * a2 * b0;
            d.w12 += t.coef * a1 * b1;
            d.w22 += t.coef * a0 * b2;
        }
        d
    }
}

/// `d^order/dx^order x^p`.
fn mono(x: f64, p: i32, order: i32) -> f64 {
    if order > p {
        return 0.0;
    }
    let falling: f64 = (0..order).map(|i| (p - i) as f64).product();
    falling * x.powi(p - order)
}

impl FromStr for Potential {
    type Err = Error;

    /// Parse whitespace-separated ascending coefficients, e.g. `"0 0 0.25"`.
    fn from_str(s: &str) -> Result<Self> {
        let coeffs = s
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::validation(format!("bad potential coefficient `{tok}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Potential::new(coeffs)
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| format!("{c}")).collect();
        write!(f, "{}", parts.join(" "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quartic() -> Potential {
        Potential::new(vec![0.0, 0.0, 0.5, 0.0, 0.25]).unwrap()
    }

    #[test]
    fn convexity_constants() {
        assert_eq!(Potential::hermite().convexity_constant(), 0.5);
        assert_relative_eq!(quartic().convexity_constant(), 1.0, epsilon = 1e-12);
        let s4 = Potential::new(vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(s4.convexity_constant().abs() < 1e-12);
        assert!(!s4.is_uniformly_convex());
        // V = s^4 - s^2: V'' = 12 s^2 - 2, minimum -2 at 0
        let dw = Potential::new(vec![0.0, 0.0, -1.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(dw.convexity_constant(), -2.0, epsilon = 1e-12);
        // shifted quartic keeps its convexity constant
        assert_relative_eq!(quartic().shifted(0.7).convexity_constant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_malformed() {
        assert!(Potential::new(vec![]).is_err());
        assert!(Potential::new(vec![1.0]).is_err());
        assert!(Potential::new(vec![0.0, 0.0, 0.0, 1.0]).is_err());
        assert!(Potential::new(vec![0.0, 0.0, -1.0]).is_err());
        assert!(Potential::new(vec![0.0, 0.0, 0.0]).is_err());
        assert!(Potential::new(vec![0.0; 43].into_iter().chain([1.0]).collect()).is_err());
        assert!("0 0 x".parse::<Potential>().is_err());
    }

    #[test]
    fn parse_and_display() {
        let v: Potential = "0 0 0.25".parse().unwrap();
        assert_eq!(v, Potential::hermite());
        assert_eq!(v.to_string().parse::<Potential>().unwrap(), v);
    }

    #[test]
    fn w_closed_forms() {
        let s2 = Potential::new(vec![0.0, 0.0, 1.0]).unwrap();
        for &(a, b) in &[(0.3, 0.7), (-1.2, 2.0), (0.0, 0.0)] {
            assert_relative_eq!(s2.w_value(a, b), a * a + 2.0 * b * b, epsilon = 1e-14);
            let d = s2.w_partials(a, b);
            assert_relative_eq!(d.w1, 2.0 * a, epsilon = 1e-14);
            assert_relative_eq!(d.w2, 4.0 * b, epsilon = 1e-14);
            assert_eq!((d.w11, d.w12, d.w22), (2.0, 0.0, 4.0));
        }
        let s4 = Potential::new(vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s4.w_value(0.0, 1.0), 6.0);
        assert_eq!(s4.w_partials(0.0, 1.0).w2, 24.0);
        let q = quartic();
        assert_relative_eq!(q.w_value(0.8, 0.0), q.eval(0.8), epsilon = 1e-14);
    }

    #[test]
    fn partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let deg = 2 * rng.random_range(1..=4);
            let mut c: Vec<f64> = (0..=deg).map(|_| rng.random_range(-1.0..1.0)).collect();
            c[deg] = rng.random_range(0.1..1.0);
            let v = Potential::new(c).unwrap();
            let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(0.2..1.5));
            let h = 1e-5;
            let d = v.w_partials(a, b);
            let fd1 = (v.w_value(a + h, b) - v.w_value(a - h, b)) / (2.0 * h);
            let fd2 = (v.w_value(a, b + h) - v.w_value(a, b - h)) / (2.0 * h);
            let p = |a, b| v.w_partials(a, b);
            let fd11 = (p(a + h, b).w1 - p(a - h, b).w1) / (2.0 * h);
            let fd12 = (p(a, b + h).w1 - p(a, b - h).w1) / (2.0 * h);
            let fd22 = (p(a, b + h).w2 - p(a, b - h).w2) / (2.0 * h);
            let scale = 1.0 + d.w.abs();
            for (x, y) in [(d.w1, fd1), (d.w2, fd2), (d.w11, fd11), (d.w12, fd12), (d.w22, fd22)] {
                assert!((x - y).abs() <= 1e-6 * scale.max(x.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn argmin_of_shifted_quadratic() {
        let v = Potential::hermite().shifted(1.5);
        assert_relative_eq!(v.argmin(), 1.5, epsilon = 1e-12);
        assert_relative_eq!(v.eval(1.5), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn real_roots_with_multiplicity() {
        assert_eq!(real_roots(&[0.0, 0.0, 0.0, 6.0]), vec![0.0]);
        // (x-1)^2 (x+2) = x^3 - 3x + 2
        let r = real_roots(&[2.0, -3.0, 0.0, 1.0]);
        assert_eq!(r.len(), 2);
        assert_relative_eq!(r[0], -2.0, epsilon = 1e-12);
        assert_relative_eq!(r[1], 1.0, epsilon = 1e-7);
        assert!(real_roots(&[1.0, 0.0, 1.0]).is_empty());
    }

    #[test]
    fn real_roots_of_cubic() {
        // (x-1)(x+2)(x-3) = x^3 - 2x^2 - 5x + 6
        let r = real_roots(&[6.0, -5.0, -2.0, 1.0]);
        assert_eq!(r.len(), 3);
        for (x, y) in r.iter().zip([-2.0, 1.0, 3.0]) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn w_is_even_in_b(c in proptest::collection::vec(-2.0f64..2.0, 5), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let mut c = c;
            c[4] = c[4].abs() + 0.1;
            let v = Potential::new(c).unwrap();
            prop_assert_eq!(v.w_value(a, b), v.w_value(a, -b));
        }
    }
}
