use crate::error::{Error, Result};

use super::TridiagonalSym;

/// A finitely supported probability measure `Σ w_j δ_{λ_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    lambdas: Vec<f64>,
    weights: Vec<f64>,
}

impl SpectralMeasure {
    /// Atoms are sorted ascending; weights are renormalized to sum to one.
    pub fn new(lambdas: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() || lambdas.len() != weights.len() {
            return Err(Error::validation("measure needs matching, nonempty atoms and weights"));
        }
        if lambdas.iter().chain(&weights).any(|x| !x.is_finite()) {
            return Err(Error::validation("measure entries must be finite"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::validation("measure weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::validation("measure has zero total mass"));
        }
        let mut pairs: Vec<(f64, f64)> = lambdas.into_iter().zip(weights.into_iter().map(|w| w / total)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (lambdas, weights) = pairs.into_iter().unzip();
        Ok(SpectralMeasure { lambdas, weights })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// `Σ w_j λ_j^m`.
    pub fn moment(&self, m: u32) -> f64 {
        self.lambdas
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * l.powi(m as i32))
            .sum()
    }
}

impl TridiagonalSym {
    /// Spectral measure at `e_1`: eigenvalues with squared first components of
    /// the normalized eigenvectors.
    pub fn spectral_measure(&self) -> Result<SpectralMeasure> {
        self.require_jacobi()?;
        let pairs = self.eigenpairs((0..self.n()).collect());
        let (lambdas, weights): (Vec<f64>, Vec<f64>) =
            pairs.into_iter().map(|p| (p.value, p.vector[0] * p.vector[0])).unzip();
        SpectralMeasure::new(lambdas, weights)
    }

    /// The unique Jacobi matrix whose spectral measure at `e_1` is `mu`
    /// (Lanczos on `diag(λ)` started from `sqrt(w)`, with full
    /// reorthogonalization).
    pub fn jacobi_from_measure(mu: &SpectralMeasure) -> Result<TridiagonalSym> {
        let n = mu.len();
        let (lam, w) = (mu.lambdas(), mu.weights());
        let scale = lam.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        if lam.windows(2).any(|p| p[1] - p[0] <= 1e-14 * scale) {
            return Err(Error::Degenerate("spectral measure has repeated atoms".into()));
        }
        if w.iter().any(|&x| x <= 0.0) {
            return Err(Error::Degenerate("spectral measure has a zero weight".into()));
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut q: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
        let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.iter_mut().for_each(|x| *x /= norm);
        let mut diag = Vec::with_capacity(n);
        let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
        for k in 0..n {
            let mut r: Vec<f64> = q.iter().zip(lam).map(|(x, l)| x * l).collect();
            let alpha: f64 = r.iter().zip(&q).map(|(a, b)| a * b).sum();
            diag.push(alpha);
            basis.push(q.clone());
            if k + 1 == n {
                break;
            }
            for _ in 0..2 {
                for u in &basis {
                    let p: f64 = r.iter().zip(u).map(|(a, b)| a * b).sum();
                    r.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
                }
            }
            let beta = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if beta <= 1e-13 * scale {
                return Err(Error::Degenerate(format!(
                    "Krylov space exhausted at step {k} of {n}"
                )));
            }
            offdiag.push(beta);
            q = r.into_iter().map(|x| x / beta).collect();
        }
        TridiagonalSym::jacobi(diag, offdiag)
    }
}
