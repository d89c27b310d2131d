//! Symmetric tridiagonal matrices, their spectra and spectral measures.

mod eigen;
mod identities;
mod measure;

use std::io::{BufRead, Write};
use std::ops::Range;

pub use eigen::EigenPair;
pub use identities::{split_maxeig_identity, split_values_at, spectral_map_residual, SplitIdentity};
pub use measure::SpectralMeasure;

use crate::error::{Error, Result};

/// A real symmetric tridiagonal matrix with diagonal `diag` (length `n`) and
/// first off-diagonal `offdiag` (length `n - 1`).
///
/// Jacobi matrices (strictly positive off-diagonal) are built with
/// [`TridiagonalSym::jacobi`]; [`TridiagonalSym::new`] is the relaxed variant
/// that admits zero or negative off-diagonals, used for truncated, padded or
/// discretized operators.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSym {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl TridiagonalSym {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::validation("tridiagonal matrix must have n >= 1"));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::validation(format!(
                "off-diagonal length {} does not match n - 1 = {}",
                offdiag.len(),
                diag.len() - 1
            )));
        }
        if diag.iter().chain(&offdiag).any(|x| !x.is_finite()) {
            return Err(Error::validation("tridiagonal entries must be finite"));
        }
        Ok(TridiagonalSym { diag, offdiag })
    }

    /// Jacobi matrix: all off-diagonal entries strictly positive.
    pub fn jacobi(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        let t = TridiagonalSym::new(diag, offdiag)?;
        if !t.is_jacobi() {
            return Err(Error::validation(
                "Jacobi matrix requires strictly positive off-diagonal entries",
            ));
        }
        Ok(t)
    }

    pub fn is_jacobi(&self) -> bool {
        self.offdiag.iter().all(|&b| b > 0.0)
    }

    pub(crate) fn require_jacobi(&self) -> Result<()> {
        if self.is_jacobi() {
            Ok(())
        } else {
            Err(Error::validation("operation requires a Jacobi matrix"))
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.diag, self.offdiag)
    }

    /// Principal minor on the zero-based index range `rows`.
    pub fn minor(&self, rows: Range<usize>) -> Result<TridiagonalSym> {
        if rows.start >= rows.end || rows.end > self.n() {
            return Err(Error::validation(format!(
                "minor {rows:?} out of range for n = {}",
                self.n()
            )));
        }
        Ok(TridiagonalSym {
            diag: self.diag[rows.clone()].to_vec(),
            offdiag: self.offdiag[rows.start..rows.end - 1].to_vec(),
        })
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> TridiagonalSym {
        TridiagonalSym {
            diag: self.diag.iter().map(|a| a + shift).collect(),
            offdiag: self.offdiag.clone(),
        }
    }

    /// `factor * self`.
    pub fn scaled(&self, factor: f64) -> TridiagonalSym {
        TridiagonalSym {
            diag: self.diag.iter().map(|a| a * factor).collect(),
            offdiag: self.offdiag.iter().map(|b| b * factor).collect(),
        }
    }

    /// `self + delta * e_ii` (zero-based `i`).
    pub fn with_diagonal_added(&self, i: usize, delta: f64) -> TridiagonalSym {
        let mut t = self.clone();
        t.diag[i] += delta;
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.offdiag[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// `x^T T x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut s: f64 = self.diag.iter().zip(x).map(|(a, v)| a * v * v).sum();
        for (i, b) in self.offdiag.iter().enumerate() {
            s += 2.0 * b * x[i] * x[i + 1];
        }
        s
    }

    /// Largest Gershgorin radius bound on `|λ|`.
    pub fn spectral_radius_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Write two CSV columns `diag,offdiag`; the last off-diagonal cell is empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "diag,offdiag")?;
        for i in 0..self.n() {
            match self.offdiag.get(i) {
                Some(b) => writeln!(out, "{:e},{:e}", self.diag[i], b)?,
                None => writeln!(out, "{:e},", self.diag[i])?,
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<TridiagonalSym> {
        let mut diag = Vec::new();
        let mut offdiag = Vec::new();
        let mut lines = input.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim) != Some("diag,offdiag") {
            return Err(Error::validation("missing `diag,offdiag` header"));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("bad number `{s}`")))
        };
        let mut ended = false;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if ended {
                return Err(Error::validation("rows after the terminal empty off-diagonal"));
            }
            let (d, o) = line
                .split_once(',')
                .ok_or_else(|| Error::validation(format!("expected two columns in `{line}`")))?;
            diag.push(parse(d)?);
            if o.trim().is_empty() {
                ended = true;
            } else {
                offdiag.push(parse(o)?);
            }
        }
        if !ended {
            return Err(Error::validation("last row must have an empty off-diagonal cell"));
        }
        TridiagonalSym::new(diag, offdiag)
    }

    #[cfg(test)]
    pub(crate) fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.offdiag[i];
                m[(i + 1, i)] = self.offdiag[i];
            }
        }
        m
    }
}
