//! Global and conditional minimizers of `H(a, b)` by banded Newton descent,
//! and numerical checks built on them: boundary decay, the limiting operator
//! `J`, the Bessel-zero eigenvalue bound and the Fekete characterization.

use std::ops::Range;

use crate::band::SymBandMatrix;
use crate::error::{Error, Result};
use crate::hamiltonian::{beta_alphas, deinterleave, interleave, Hamiltonian};
use crate::local_equilibrium::{solve_local_minimizer, ScalingConstants};
use crate::potential::Potential;
use crate::tridiag::TridiagonalSym;

/// First zero of the Bessel function `J_0`.
pub const J00: f64 = 2.404_825_557_695_773;

const MAX_ITERATIONS: usize = 200;

/// Minimize `tr V(T) - Σ α_k log b_k` over the free coordinates, all others
/// held at the values in `start`.
///
/// Coordinates are interleaved `(a_1, b_1, ..., a_n)`; `free[c]` marks the
/// free ones. Free `b` coordinates must start positive and stay positive.
#[derive(Debug, Clone)]
pub struct MinimizerProblem {
    hamiltonian: Hamiltonian,
    start: TridiagonalSym,
    free: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct MinimizerSolution {
    pub t: TridiagonalSym,
    /// Euclidean norm of the gradient restricted to the free coordinates.
    pub gradient_norm: f64,
    pub iterations: usize,
}

impl MinimizerProblem {
    pub fn new(v: Potential, alphas: Vec<f64>, start: TridiagonalSym, free: Vec<bool>) -> Result<Self> {
        v.require_convex()?;
        if alphas.len() + 1 != start.n() {
            return Err(Error::validation("need one log coefficient per off-diagonal entry"));
        }
        if free.len() != 2 * start.n() - 1 {
            return Err(Error::validation("free mask must cover all 2n - 1 coordinates"));
        }
        for (k, b) in start.offdiag().iter().enumerate() {
            if free[2 * k + 1] && *b <= 0.0 {
                return Err(Error::validation(format!("free off-diagonal {k} must start positive")));
            }
        }
        Ok(MinimizerProblem {
            hamiltonian: Hamiltonian::new(v, alphas)?,
            start,
            free,
        })
    }

    /// The full problem of the `β`-model at size `n` (`β = ∞` allowed),
    /// started on the local-minimizer profile `(a†(k/n), b†(k/n))`.
    /// Off-diagonals with `α_k = 0` are fixed at `0`.
    pub fn global(v: Potential, n: usize, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::validation("model size must be at least 2"));
        }
        if !(beta >= 1.0) {
            return Err(Error::validation(format!(
                "beta = {beta}: the Hamiltonian is only convex for beta >= 1"
            )));
        }
        let alphas = beta_alphas(n, beta);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n - 1);
        for k in 0..n {
            let m = solve_local_minimizer(&v, k as f64 / n as f64)?;
            a.push(m.a);
            if k + 1 < n {
                b.push(if alphas[k] > 0.0 { m.b } else { 0.0 });
            }
        }
        let free = (0..2 * n - 1)
            .map(|c| c % 2 == 0 || alphas[c / 2] > 0.0)
            .collect();
        MinimizerProblem::new(v, alphas, TridiagonalSym::new(a, b)?, free)
    }

    /// Conditional problem: `a_i` and `b_i` free for matrix indices `i` in
    /// `interval` (zero-based; `b_i` couples `i` and `i + 1`), everything else
    /// fixed at `boundary`.
    pub fn conditional(
        v: Potential,
        alphas: Vec<f64>,
        boundary: TridiagonalSym,
        interval: Range<usize>,
    ) -> Result<Self> {
        let n = boundary.n();
        if interval.end > n {
            return Err(Error::validation("free interval exceeds the matrix"));
        }
        let free = (0..2 * n - 1).map(|c| interval.contains(&(c / 2))).collect();
        MinimizerProblem::new(v, alphas, boundary, free)
    }

    pub fn n(&self) -> usize {
        self.start.n()
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    pub fn free_count(&self) -> usize {
        self.free.iter().filter(|f| **f).count()
    }

    fn restricted_gradient(&self, t: &TridiagonalSym, idx: &[usize]) -> Vec<f64> {
        let (ga, gb) = self.hamiltonian.gradient(t);
        let g = interleave(&ga, &gb);
        idx.iter().map(|&c| g[c]).collect()
    }

    fn restricted_hessian(&self, t: &TridiagonalSym, idx: &[usize]) -> SymBandMatrix {
        let full = self.hamiltonian.hessian(t);
        let w = full.width();
        let mut h = SymBandMatrix::zeros(idx.len(), w);
        // compacting can only shrink distances, so the band still holds
        for (r, &cr) in idx.iter().enumerate() {
            for s in r.saturating_sub(w)..=r {
                let v = full.get(cr, idx[s]);
                if v != 0.0 {
                    h.add(r, s, v);
                }
            }
        }
        h
    }

    /// Damped Newton with a banded Cholesky solve and backtracking that keeps
    /// free `b` positive.
    pub fn solve(&self) -> Result<MinimizerSolution> {
        let idx: Vec<usize> = (0..self.free.len()).filter(|&c| self.free[c]).collect();
        let n = self.n();
        let (a0, b0) = (self.start.diag().to_vec(), self.start.offdiag().to_vec());
        let mut x = interleave(&a0, &b0);
        let build = |x: &[f64]| {
            let (a, b) = deinterleave(x);
            TridiagonalSym::new(a, b)
        };
        let tol = 1e-10 * n as f64;
        let mut t = build(&x)?;
        if idx.is_empty() {
            return Ok(MinimizerSolution {
                t,
                gradient_norm: 0.0,
                iterations: 0,
            });
        }
        let mut f = self.hamiltonian.value(&t);
        for it in 0..MAX_ITERATIONS {
            let g = self.restricted_gradient(&t, &idx);
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm <= tol {
                return Ok(MinimizerSolution {
                    t,
                    gradient_norm: gnorm,
                    iterations: it,
                });
            }
            let h = self.restricted_hessian(&t, &idx);
            let step = solve_shifted_newton(&h, &g)?;
            let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let mut trial = x.clone();
                for (k, &c) in idx.iter().enumerate() {
                    trial[c] += alpha * step[k];
                }
                let positive = idx.iter().all(|&c| c % 2 == 0 || trial[c] > 0.0);
                if positive {
                    let tt = build(&trial)?;
                    let ft = self.hamiltonian.value(&tt);
                    if ft.is_finite() && ft <= f + 1e-4 * alpha * slope + 1e-14 * f.abs().max(1.0) {
                        x = trial;
                        t = tt;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                return Err(Error::numerical(format!(
                    "Newton line search stalled at iteration {it} (gradient norm {gnorm:e})"
                )));
            }
        }
        let g = self.restricted_gradient(&t, &idx);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm <= tol {
            Ok(MinimizerSolution {
                t,
                gradient_norm: gnorm,
                iterations: MAX_ITERATIONS,
            })
        } else {
            Err(Error::numerical(format!(
                "Newton did not converge in {MAX_ITERATIONS} iterations (gradient norm {gnorm:e})"
            )))
        }
    }
}

/// Solve `H d = -g`, shifting `H` by a multiple of the identity if the
/// Cholesky factorization fails (only possible through rounding, since `H` is
/// convex on the feasible set).
fn solve_shifted_newton(h: &SymBandMatrix, g: &[f64]) -> Result<Vec<f64>> {
    let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
    if let Ok(c) = h.cholesky() {
        return Ok(c.solve(&rhs));
    }
    let scale = (0..h.n()).map(|i| h.get(i, i).abs()).fold(1e-12, f64::max);
    let mut shift = 1e-10 * scale;
    for _ in 0..30 {
        let mut hs = h.clone();
        for i in 0..h.n() {
            hs.add(i, i, shift);
        }
        if let Ok(c) = hs.cholesky() {
            return Ok(c.solve(&rhs));
        }
        shift *= 10.0;
    }
    Err(Error::numerical("Newton system could not be regularized"))
}

/// Global minimizer of the `β`-model (`β = ∞` allowed).
pub fn minimize_h(v: &Potential, n: usize, beta: f64) -> Result<MinimizerSolution> {
    MinimizerProblem::global(v.clone(), n, beta)?.solve()
}

/// Conditional minimizer on a free interval with fixed boundary values.
pub fn conditional_minimize(
    v: &Potential,
    alphas: Vec<f64>,
    boundary: TridiagonalSym,
    interval: Range<usize>,
) -> Result<MinimizerSolution> {
    MinimizerProblem::conditional(v.clone(), alphas, boundary, interval)?.solve()
}

/// Fit of `log |Δ_k|` against the distance to the perturbed boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Fitted slope; `-∞` when saturated.
    pub slope: f64,
    pub intercept: f64,
    /// The boundary response vanished to rounding everywhere: no finite rate
    /// can be fitted because the decay is faster than measurable.
    pub saturated: bool,
    /// `max(|Δa_k|, |Δb_k|)` at distance `k + 1` from the boundary.
    pub differences: Vec<f64>,
}

const DECAY_FLOOR: f64 = 1e-13;

/// Perturb the left boundary of a conditional problem on a window of length
/// `ell` and measure how the response decays into the window.
///
/// The window sits at bulk position `x0 = 1/2` with constant log coefficients
/// `α = 1/2`, so the unperturbed conditional minimizer is the constant profile
/// `(a†(x0), b†(x0))`. The `deg V` fixed sites to the left of the window are
/// shifted by `+δ` (both `a` and `b`), the ones to the right are left alone.
pub fn boundary_decay_rate(v: &Potential, ell: usize, delta: f64) -> Result<DecayFit> {
    if ell < 40 {
        return Err(Error::validation("boundary decay needs a window of length >= 40"));
    }
    let x0 = 0.5;
    let m = solve_local_minimizer(v, x0)?;
    let margin = v.degree();
    let n = ell + 2 * margin;
    let alphas = vec![1.0 - x0; n - 1];
    let base = TridiagonalSym::new(vec![m.a; n], vec![m.b; n - 1])?;
    let window = margin..margin + ell;
    let ref_sol = conditional_minimize(v, alphas.clone(), base.clone(), window.clone())?;

    let (mut a, mut b) = base.into_parts();
    for i in 0..margin {
        a[i] += delta;
        b[i] += delta;
    }
    let pert = conditional_minimize(v, alphas, TridiagonalSym::new(a, b)?, window.clone())?;

    let differences: Vec<f64> = window
        .clone()
        .map(|i| {
            let da = (pert.t.diag()[i] - ref_sol.t.diag()[i]).abs();
            let db = (pert.t.offdiag()[i] - ref_sol.t.offdiag()[i]).abs();
            da.max(db)
        })
        .collect();
    // distances up to the middle of the window, away from the fixed right end
    let pts: Vec<(f64, f64)> = differences
        .iter()
        .take(ell / 2)
        .enumerate()
        .filter(|(_, d)| **d > DECAY_FLOOR)
        .map(|(k, d)| ((k + 1) as f64, d.ln()))
        .collect();
    if pts.len() < 3 {
        return Ok(DecayFit {
            slope: f64::NEG_INFINITY,
            intercept: f64::NAN,
            saturated: true,
            differences,
        });
    }
    let (slope, intercept) = crate::stats::least_squares_line(&pts);
    Ok(DecayFit {
        slope,
        intercept,
        saturated: false,
        differences,
    })
}

/// Top `m x m` minor of the minimizer of `H` with `α ≡ 1` on `n_embed` sites,
/// a free left end and the right end clamped to `(a†(0), b†(0))`.
pub fn approx_j(v: &Potential, m: usize, n_embed: usize) -> Result<TridiagonalSym> {
    if m < 8 {
        return Err(Error::validation("approx_j needs m >= 8"));
    }
    if n_embed < 4 * m {
        return Err(Error::validation("approx_j needs n_embed >= 4 m"));
    }
    let eq = solve_local_minimizer(v, 0.0)?;
    let margin = v.degree();
    let n = n_embed + margin;
    let boundary = TridiagonalSym::new(vec![eq.a; n], vec![eq.b; n - 1])?;
    let sol = conditional_minimize(v, vec![1.0; n - 1], boundary, 0..n_embed)?;
    sol.t.minor(0..m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureCheck {
    pub m: usize,
    /// `λ_max(J[1, m])`.
    pub lambda_max: f64,
    /// `a†(0) + b†(0) (2 - (j00/m)^2)`.
    pub bound: f64,
    /// `λ_max(J[1, m] + b†(0) e_mm)`: the top minor with a reflecting end,
    /// whose gap to the edge scales like `(π/2)^2 / m^2`.
    pub lambda_max_reflecting: f64,
    /// `(ℰ - λ_max) m^2 / b†(0)`.
    pub scaled_gap: f64,
}

impl QuadratureCheck {
    /// `m^3 (λ_max - bound)`: the slack needed at this `m`.
    pub fn required_slack(&self) -> f64 {
        (self.lambda_max - self.bound) * (self.m as f64).powi(3)
    }
}

pub fn quadrature_bound_check(v: &Potential, m: usize) -> Result<QuadratureCheck> {
    if m < 16 {
        return Err(Error::validation("quadrature bound check needs m >= 16"));
    }
    let eq = solve_local_minimizer(v, 0.0)?;
    let j = approx_j(v, m, 4 * m)?;
    let lambda_max = j.eigen_max();
    let reflecting = j.with_diagonal_added(m - 1, eq.b).eigen_max();
    let mf = m as f64;
    Ok(QuadratureCheck {
        m,
        lambda_max,
        bound: eq.a + eq.b * (2.0 - (J00 / mf).powi(2)),
        lambda_max_reflecting: reflecting,
        scaled_gap: (eq.edge() - lambda_max) * mf * mf / eq.b,
    })
}

/// Smallest slack `s >= 0` with `λ_max <= bound + s/m^3` at every check.
pub fn fit_quadrature_slack(checks: &[QuadratureCheck]) -> f64 {
    checks.iter().map(|c| c.required_slack()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeketeCheck {
    /// `max_i |n V'(λ_i) - Σ_{j≠i} 1/(λ_i - λ_j)| / n`.
    pub max_residual: f64,
    /// `max_i |q_i^2 - 1/n|`.
    pub max_weight_deviation: f64,
    pub min_gap: f64,
    /// Set when two eigenvalues are closer than `1e-12`; the residual is then
    /// ill-conditioned.
    pub clustered: bool,
}

/// Fekete stationarity and equal-weight checks for a `β = ∞` minimizer.
pub fn fekete_stationarity(v: &Potential, t: &TridiagonalSym) -> Result<FeketeCheck> {
    let mu = t.spectral_measure()?;
    let lam = mu.lambdas();
    let n = lam.len();
    let nf = n as f64;
    let mut max_residual: f64 = 0.0;
    for i in 0..n {
        let repulsion: f64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (lam[i] - lam[j])).sum();
        max_residual = max_residual.max((nf * v.derivative(lam[i]) - repulsion).abs() / nf);
    }
    let max_weight_deviation = mu.weights().iter().map(|w| (w - 1.0 / nf).abs()).fold(0.0, f64::max);
    let min_gap = lam.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    Ok(FeketeCheck {
        max_residual,
        max_weight_deviation,
        min_gap,
        clustered: min_gap < 1e-12,
    })
}

/// Smallest eigenvalue of `M - T` with
/// `M = (b†(0) - κ/m^2) e_mm + T|[m,n] + (ℰ - κ/m^2) I|[1,m-1]`
/// (one-based `m`); nonnegative when `M` dominates `T`.
pub fn truncation_bound_margin(t: &TridiagonalSym, consts: &ScalingConstants, m: usize, kappa: f64) -> Result<f64> {
    if m < 2 || m > t.n() {
        return Err(Error::validation(format!("truncation index {m} out of range")));
    }
    let shift = kappa / (m * m) as f64;
    let mut d: Vec<f64> = t.diag()[..m - 1].iter().map(|a| consts.edge - shift - a).collect();
    d.push(consts.b0 - shift);
    let e: Vec<f64> = t.offdiag()[..m - 1].iter().map(|b| -b).collect();
    Ok(TridiagonalSym::new(d, e)?.eigen_min())
}
