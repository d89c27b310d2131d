//! Banded matrices: polynomials of a tridiagonal matrix and a banded
//! Cholesky factorization for Newton systems.

use crate::error::{Error, Result};
use crate::tridiag::TridiagonalSym;

/// Square matrix with nonzeros only on `|i - j| <= width`, stored row-wise
/// with `2 width + 1` slots per row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, width: usize) -> BandMatrix {
        let width = width.min(n.saturating_sub(1));
        BandMatrix {
            n,
            width,
            data: vec![0.0; n * (2 * width + 1)],
        }
    }

    pub fn identity(n: usize) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, 0);
        m.data.iter_mut().for_each(|x| *x = 1.0);
        m
    }

    pub fn from_tridiagonal(t: &TridiagonalSym) -> BandMatrix {
        let n = t.n();
        let mut m = BandMatrix::zeros(n, 1);
        for i in 0..n {
            m.set(i, i, t.diag()[i]);
            if i + 1 < n {
                m.set(i, i + 1, t.offdiag()[i]);
                m.set(i + 1, i, t.offdiag()[i]);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let w = self.width;
        if i.abs_diff(j) > w {
            None
        } else {
            Some(i * (2 * w + 1) + j + w - i)
        }
    }

    /// Entry `(i, j)`, zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.data[s] = value;
    }

    /// Column range of row `i` inside the band.
    #[inline]
    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.width)..(i + self.width + 1).min(self.n)
    }

    pub fn mul(&self, other: &BandMatrix) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let mut out = BandMatrix::zeros(self.n, self.width + other.width);
        let (sw, ow, w) = (self.width, other.width, out.width);
        let (srow, orow, row) = (2 * sw + 1, 2 * ow + 1, 2 * w + 1);
        for i in 0..self.n {
            for k in self.cols(i) {
                let aik = self.data[i * srow + k + sw - i];
                if aik == 0.0 {
                    continue;
                }
                for j in other.cols(k) {
                    // |i - j| <= sw + ow always holds here
                    out.data[i * row + j + w - i] += aik * other.data[k * orow + j + ow - k];
                }
            }
        }
        out
    }

    pub fn add_identity(&mut self, c: f64) {
        for i in 0..self.n {
            let s = self.slot(i, i).expect("diagonal");
            self.data[s] += c;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `p(T)` for `p(s) = Σ coeffs[m] s^m`, by Horner's rule; the band widens
    /// by one per degree.
    pub fn polynomial(coeffs: &[f64], t: &TridiagonalSym) -> BandMatrix {
        let n = t.n();
        let tb = BandMatrix::from_tridiagonal(t);
        let Some((&lead, rest)) = coeffs.split_last() else {
            return BandMatrix::zeros(n, 0);
        };
        let mut p = BandMatrix::identity(n);
        p.data.iter_mut().for_each(|x| *x *= lead);
        for &c in rest.iter().rev() {
            p = p.mul(&tb);
            p.add_identity(c);
        }
        p
    }

    /// Powers `T^0, ..., T^max`.
    pub fn powers(t: &TridiagonalSym, max: usize) -> Vec<BandMatrix> {
        let tb = BandMatrix::from_tridiagonal(t);
        let mut out = vec![BandMatrix::identity(t.n())];
        for p in 1..=max {
            let next = out[p - 1].mul(&tb);
            out.push(next);
        }
        out
    }
}

/// Symmetric positive definite banded matrix, lower band stored row-wise
/// (`width + 1` slots per row, slot `i - j` for `j <= i`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymBandMatrix {
    n: usize,
    width: usize,
    lower: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, width: usize) -> SymBandMatrix {
        let width = width.min(n.saturating_sub(1));
        SymBandMatrix {
            n,
            width,
            lower: vec![0.0; n * (width + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        (i - j <= self.width).then(|| i * (self.width + 1) + (i - j))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.lower[s])
    }

    /// Adds `value` at `(i, j)` (and implicitly `(j, i)`); panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.lower[s] += value;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for j in i.saturating_sub(self.width)..=i {
                let v = self.lower[i * (self.width + 1) + (i - j)];
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    /// Cholesky factor `L` (same band) with `A = L L^T`.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, w) = (self.n, self.width);
        let mut l = self.lower.clone();
        let at = |i: usize, j: usize| i * (w + 1) + (i - j);
        for j in 0..n {
            let mut d = l[at(j, j)];
            for k in j.saturating_sub(w)..j {
                d -= l[at(j, k)] * l[at(j, k)];
            }
            if !(d > 0.0) {
                return Err(Error::numerical(format!(
                    "banded Cholesky: matrix not positive definite at pivot {j}"
                )));
            }
            let d = d.sqrt();
            l[at(j, j)] = d;
            for i in j + 1..(j + w + 1).min(n) {
                let mut s = l[at(i, j)];
                for k in i.saturating_sub(w)..j {
                    s -= l[at(i, k)] * l[at(j, k)];
                }
                l[at(i, j)] = s / d;
            }
        }
        Ok(BandCholesky { n, width: w, lower: l })
    }

    /// Smallest eigenvalue lower bound via Gershgorin.
    pub fn gershgorin_min(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.width);
                let hi = (i + self.width + 1).min(self.n);
                let off: f64 = (lo..hi).filter(|&j| j != i).map(|j| self.get(i, j).abs()).sum();
                self.get(i, i) - off
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    width: usize,
    lower: Vec<f64>,
}

impl BandCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, w) = (self.n, self.width);
        let at = |i: usize, j: usize| i * (w + 1) + (i - j);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(w)..i {
                s -= self.lower[at(i, k)] * y[k];
            }
            y[i] = s / self.lower[at(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + w + 1).min(n) {
                s -= self.lower[at(k, i)] * y[k];
            }
            y[i] = s / self.lower[at(i, i)];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(b: &BandMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(b.n(), b.n(), |i, j| b.get(i, j))
    }

    fn random_tridiagonal(n: usize, rng: &mut ChaCha8Rng) -> TridiagonalSym {
        let d = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = (0..n - 1).map(|_| rng.random_range(0.2..1.2)).collect();
        TridiagonalSym::new(d, e).unwrap()
    }

    #[test]
    fn polynomial_matches_dense_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tridiagonal(9, &mut rng);
        let c = [0.3, -1.0, 0.5, 0.2, 0.25];
        let p = BandMatrix::polynomial(&c, &t);
        assert_eq!(p.width(), 4);
        let m = t.to_dense();
        let mut want = DMatrix::zeros(9, 9);
        let mut pow = DMatrix::identity(9, 9);
        for ck in c {
            want += &pow * ck;
            pow = &pow * &m;
        }
        assert!((dense(&p) - want).amax() < 1e-12);
    }

    #[test]
    fn band_is_clipped_for_small_n() {
        let t = TridiagonalSym::new(vec![1.0, 2.0], vec![0.5]).unwrap();
        let p = BandMatrix::polynomial(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0], &t);
        assert_eq!(p.width(), 1);
        let m = t.to_dense().pow(6);
        assert!((dense(&p) - m).amax() < 1e-12);
    }

    #[test]
    fn trace_of_diagonal_matrix() {
        let t = TridiagonalSym::new(vec![1.0, -2.0, 0.5], vec![0.0, 0.0]).unwrap();
        let c = [0.1, 0.0, 0.25, 0.0, 0.5];
        let want: f64 = t.diag().iter().map(|&a| crate::potential::poly_eval(&c, a)).sum();
        assert!((BandMatrix::polynomial(&c, &t).trace() - want).abs() < 1e-14);
    }

    #[test]
    fn banded_cholesky_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, w) = (40, 3);
        let mut a = SymBandMatrix::zeros(n, w);
        for i in 0..n {
            a.add(i, i, 4.0 * w as f64);
            for j in i.saturating_sub(w)..i {
                a.add(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = a.matvec(&x);
        let got = a.cholesky().unwrap().solve(&b);
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-12);
        }
        let dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let y = &dense * DMatrix::from_column_slice(n, 1, &x);
        for i in 0..n {
            assert!((y[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = SymBandMatrix::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(a.cholesky().is_err());
    }
}
