//! Random tridiagonal models: the Dumitriu-Edelman sampler for quadratic
//! potentials, the density of the general-V model with its gradient, a
//! Metropolis-adjusted Langevin sampler, Dirichlet spectral weights and a
//! small dense GOE/GUE oracle.

mod de;
mod dense;
mod mala;

pub use de::{sample_de_prefix, sample_dirichlet_weights, sample_hermite_de, sample_quadratic_de, DePrefix};
pub use dense::{dense_gaussian_oracle, DENSE_ORACLE_MAX_N};
pub use mala::{write_checkpoint, ChainState, MalaChain, McmcConfig, Parametrization};

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::hamiltonian::beta_alphas;
use crate::potential::Potential;
use crate::tridiag::TridiagonalSym;

/// The tridiagonal model with potential `V`, inverse temperature `β` and size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub v: Potential,
    pub beta: f64,
    pub n: usize,
}

/// Unnormalized log-density; `value = -∞` with `in_support = false` when some
/// off-diagonal is not positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDensity {
    pub value: f64,
    pub in_support: bool,
}

impl ModelSpec {
    pub fn new(v: Potential, beta: f64, n: usize) -> Result<ModelSpec> {
        if !(beta > 0.0) || beta.is_infinite() {
            return Err(Error::validation("model beta must be positive and finite"));
        }
        if n < 2 {
            return Err(Error::validation("model size must be at least 2"));
        }
        Ok(ModelSpec { v, beta, n })
    }

    pub fn hermite(beta: f64, n: usize) -> Result<ModelSpec> {
        ModelSpec::new(Potential::hermite(), beta, n)
    }

    /// `α_k = 1 - k/n - 1/(nβ)`.
    pub fn alphas(&self) -> Vec<f64> {
        beta_alphas(self.n, self.beta)
    }

    fn check(&self, t: &TridiagonalSym) -> Result<()> {
        if t.n() != self.n {
            return Err(Error::validation(format!(
                "matrix has size {}, model has n = {}",
                t.n(),
                self.n
            )));
        }
        Ok(())
    }

    /// `-nβ [tr V(T) - Σ α_k log b_k]`.
    pub fn log_density(&self, t: &TridiagonalSym) -> Result<LogDensity> {
        self.check(t)?;
        if t.offdiag().iter().any(|b| *b <= 0.0) {
            return Ok(LogDensity {
                value: f64::NEG_INFINITY,
                in_support: false,
            });
        }
        let logs: f64 = t.offdiag().iter().zip(self.alphas()).map(|(b, a)| a * b.ln()).sum();
        let trace = BandMatrix::polynomial(self.v.coeffs(), t).trace();
        let nb = self.n as f64 * self.beta;
        Ok(LogDensity {
            value: -nb * (trace - logs),
            in_support: true,
        })
    }

    /// `(∂/∂a, ∂/∂b)` of [`ModelSpec::log_density`].
    pub fn grad_log_density(&self, t: &TridiagonalSym) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(t)?;
        if t.offdiag().iter().any(|b| *b <= 0.0) {
            return Err(Error::validation("gradient needs positive off-diagonals"));
        }
        let nb = self.n as f64 * self.beta;
        let vp = BandMatrix::polynomial(&self.v.derivative_coeffs(), t);
        let ga = (0..self.n).map(|i| -nb * vp.get(i, i)).collect();
        let gb = self
            .alphas()
            .iter()
            .enumerate()
            .map(|(i, a)| -nb * (2.0 * vp.get(i, i + 1) - a / t.offdiag()[i]))
            .collect();
        Ok((ga, gb))
    }
    /// Log-density and gradient from one set of matrix powers; needs
    /// positive off-diagonals.
    pub fn value_and_gradient(&self, t: &TridiagonalSym) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        self.check(t)?;
        if t.offdiag().iter().any(|b| *b <= 0.0) {
            return Err(Error::validation("gradient needs positive off-diagonals"));
        }
        let c = self.v.coeffs();
        let powers = BandMatrix::powers(t, c.len().saturating_sub(1));
        let n = self.n;
        let nb = n as f64 * self.beta;
        let alphas = self.alphas();
        let mut trace = 0.0;
        let mut vp_diag = vec![0.0; n];
        let mut vp_off = vec![0.0; n - 1];
        for (k, ck) in c.iter().enumerate() {
            trace += ck * powers[k].trace();
            if k > 0 && *ck != 0.0 {
                let w = k as f64 * ck;
                let p = &powers[k - 1];
                for i in 0..n {
                    vp_diag[i] += w * p.get(i, i);
                    if i + 1 < n {
                        vp_off[i] += w * p.get(i, i + 1);
                    }
                }
            }
        }
        let logs: f64 = t.offdiag().iter().zip(&alphas).map(|(b, a)| a * b.ln()).sum();
        let ga = vp_diag.iter().map(|d| -nb * d).collect();
        let gb = (0..n - 1)
            .map(|i| -nb * (2.0 * vp_off[i] - alphas[i] / t.offdiag()[i]))
            .collect();
        Ok((-nb * (trace - logs), ga, gb))
    }
}
