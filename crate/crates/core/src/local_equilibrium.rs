//! Local equilibria `(a†(x), b†(x))`: the minimizers of
//! `W(a, b) - (1 - x) log b` for `x < 1`, their `x`-derivatives, the local
//! covariance `Σ(x)`, the edge curve `ℰ(x) = a† + 2b†`, and the scaling
//! constants of the soft-edge limit.

use std::io::Write;

use crate::error::{Error, Result};
use crate::potential::{Potential, WDerivatives};

const MAX_NEWTON_STEPS: usize = 200;

/// The local minimizer at bulk position `x` with its derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMinimizer {
    pub x: f64,
    pub a: f64,
    pub b: f64,
    pub a_prime: f64,
    pub b_prime: f64,
}

impl LocalMinimizer {
    /// Right support endpoint `R_x = a + 2b`.
    pub fn edge(&self) -> f64 {
        self.a + 2.0 * self.b
    }

    /// Left support endpoint `L_x = a - 2b`.
    pub fn left_edge(&self) -> f64 {
        self.a - 2.0 * self.b
    }

    pub fn edge_prime(&self) -> f64 {
        self.a_prime + 2.0 * self.b_prime
    }

    /// Closed-form covariance `-b [[4b', a'], [a', b']]`.
    pub fn sigma(&self) -> SigmaMatrix {
        SigmaMatrix {
            s11: -self.b * 4.0 * self.b_prime,
            s12: -self.b * self.a_prime,
            s22: -self.b * self.b_prime,
        }
    }

    /// Residuals `(W1, b W2 - (1 - x))` of the stationarity equations.
    pub fn residual(&self, v: &Potential) -> (f64, f64) {
        let d = v.w_partials(self.a, self.b);
        (d.w1, self.b * d.w2 - (1.0 - self.x))
    }
}

/// Symmetric 2x2 matrix, the inverse Hessian of `W - (1-x) log b` at the
/// local minimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaMatrix {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl SigmaMatrix {
    pub fn is_positive_definite(&self) -> bool {
        self.s11 > 0.0 && self.s11 * self.s22 - self.s12 * self.s12 > 0.0
    }

    /// `Σ · H` for a symmetric 2x2 `H`, row-major.
    pub fn times(&self, h: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let s = [[self.s11, self.s12], [self.s12, self.s22]];
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = s[i][0] * h[0][j] + s[i][1] * h[1][j];
            }
        }
        out
    }
}

/// Hessian of `W(a, b) - (1 - x) log b` in `(a, b)`.
pub fn local_hessian(v: &Potential, x: f64, a: f64, b: f64) -> [[f64; 2]; 2] {
    let d = v.w_partials(a, b);
    [[d.w11, d.w12], [d.w12, d.w22 + (1.0 - x) / (b * b)]]
}

fn objective(v: &Potential, x: f64, a: f64, b: f64) -> f64 {
    v.w_value(a, b) - (1.0 - x) * b.ln()
}

/// Derivatives from `a'W11 + b'W12 = 0`, `(a'W12 + b'W22) b + b'W2 = -1`.
fn curve_derivatives(d: &WDerivatives, b: f64) -> Result<(f64, f64)> {
    let (m11, m12, m21, m22) = (d.w11, d.w12, b * d.w12, b * d.w22 + d.w2);
    let det = m11 * m22 - m12 * m21;
    if det == 0.0 || !det.is_finite() {
        return Err(Error::numerical("singular system for the local-minimizer derivatives"));
    }
    Ok((m12 / det, -m11 / det))
}

/// Damped Newton on the gradient of `W - (1-x) log b`; `b` is kept positive.
/// With `require_pd`, an indefinite Hessian along the way is reported as an
/// error instead of being bridged by a gradient step.
fn newton(v: &Potential, x: f64, mut a: f64, mut b: f64, require_pd: bool) -> Result<(f64, f64)> {
    let c = 1.0 - x;
    let tol = 1e-11 * c.max(1.0);
    for _ in 0..MAX_NEWTON_STEPS {
        let d = v.w_partials(a, b);
        let g = [d.w1, d.w2 - c / b];
        if d.w1.abs() <= 1e-2 * tol && (b * d.w2 - c).abs() <= 1e-2 * tol {
            return Ok((a, b));
        }
        let h = [[d.w11, d.w12], [d.w12, d.w22 + c / (b * b)]];
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let (da, db) = if det > 0.0 && h[0][0] > 0.0 {
            (
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            )
        } else if require_pd {
            return Err(Error::numerical(format!(
                "local Hessian lost positive definiteness at x = {x}"
            )));
        } else {
            // indefinite: fall back to a scaled gradient step
            let s = 1.0 / (h[0][0].abs() + h[1][1].abs() + 1.0);
            (-s * g[0], -s * g[1])
        };
        let f0 = objective(v, x, a, b);
        let slope = g[0] * da + g[1] * db;
        let mut t = 1.0;
        while b + t * db <= 0.0 {
            t *= 0.5;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let (na, nb) = (a + t * da, b + t * db);
            let f1 = objective(v, x, na, nb);
            if f1.is_finite() && f1 <= f0 + 1e-4 * t * slope + 1e-13 * f0.abs().max(1.0) {
                a = na;
                b = nb;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        if (t * da).abs() <= 1e-16 * (1.0 + a.abs()) && (t * db).abs() <= 1e-16 * b {
            break;
        }
    }
    let d = v.w_partials(a, b);
    if d.w1.abs() <= tol && (b * d.w2 - c).abs() <= tol {
        Ok((a, b))
    } else {
        Err(Error::numerical(format!(
            "local-minimizer Newton did not converge at x = {x} (residuals {:e}, {:e})",
            d.w1,
            b * d.w2 - c
        )))
    }
}

fn finish(v: &Potential, x: f64, a: f64, b: f64) -> Result<LocalMinimizer> {
    let d = v.w_partials(a, b);
    let (a_prime, b_prime) = curve_derivatives(&d, b)?;
    Ok(LocalMinimizer {
        x,
        a,
        b,
        a_prime,
        b_prime,
    })
}

/// Solve for `(a†(x), b†(x))` and their derivatives for a uniformly convex `V`.
pub fn solve_local_minimizer(v: &Potential, x: f64) -> Result<LocalMinimizer> {
    if !(x < 1.0) || !x.is_finite() {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "(-inf, 1)",
        });
    }
    v.require_convex()?;
    let (a, b) = newton(v, x, v.argmin(), 1.0 - x, false)?;
    finish(v, x, a, b)
}

/// Track local stationary points along a decreasing sequence of `xs` starting
/// near the hard edge, for potentials that need not be convex. Each solve is
/// warm-started from the previous one; the walk stops with an error as soon as
/// the 2x2 Hessian loses positive definiteness.
pub fn continue_local_minimizers(v: &Potential, xs: &[f64]) -> Result<Vec<LocalMinimizer>> {
    if xs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::validation("continuation grid must be strictly decreasing"));
    }
    let mut out = Vec::with_capacity(xs.len());
    let mut guess = None;
    for &x in xs {
        if !(x < 1.0) {
            return Err(Error::Domain {
                what: "x",
                value: x,
                domain: "(-inf, 1)",
            });
        }
        let (a0, b0) = guess.unwrap_or_else(|| (v.argmin(), (1.0 - x).sqrt()));
        let (a, b) = newton(v, x, a0, b0, guess.is_some())?;
        let h = local_hessian(v, x, a, b);
        if !(h[0][0] > 0.0 && h[0][0] * h[1][1] - h[0][1] * h[1][0] > 0.0) {
            return Err(Error::numerical(format!(
                "local Hessian lost positive definiteness at x = {x}"
            )));
        }
        let m = finish(v, x, a, b)?;
        guess = Some((a, b));
        out.push(m);
    }
    Ok(out)
}

/// `Σ(x)` for `x ∈ [0, 1)`.
pub fn sigma_matrix(v: &Potential, x: f64) -> Result<SigmaMatrix> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "[0, 1)",
        });
    }
    Ok(solve_local_minimizer(v, x)?.sigma())
}

/// Constants of the edge scaling `γ n^{2/3} (ℰ - T_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConstants {
    pub a0: f64,
    pub b0: f64,
    pub a0_prime: f64,
    pub b0_prime: f64,
    /// `ℰ = a†(0) + 2 b†(0)`.
    pub edge: f64,
    /// `τ = -(a†'(0) + 2 b†'(0))`.
    pub tau: f64,
    /// `γ = b†(0)^{-1/3} τ^{-2/3}`.
    pub gamma: f64,
    /// `ϑ = b†(0) / τ`.
    pub vartheta: f64,
}

impl ScalingConstants {
    /// Brownian variance `σ² = (4/β) b†(0) τ` of the limiting field.
    pub fn sigma2(&self, beta: f64) -> f64 {
        4.0 / beta * self.b0 * self.tau
    }

    /// Inverse lattice spacing `m_n = (b†(0) n / τ)^{1/3}`.
    pub fn m_n(&self, n: usize) -> f64 {
        (self.b0 * n as f64 / self.tau).cbrt()
    }

    /// `γ n^{2/3} (ℰ - λ)`, the scaled distance of `λ` below the edge.
    pub fn scale_eigenvalue(&self, n: usize, lambda: f64) -> f64 {
        self.gamma * (n as f64).powf(2.0 / 3.0) * (self.edge - lambda)
    }
}

pub fn scaling_constants(v: &Potential) -> Result<ScalingConstants> {
    let m = solve_local_minimizer(v, 0.0)?;
    let tau = -m.edge_prime();
    if !(tau > 0.0) {
        return Err(Error::numerical(format!(
            "edge derivative has the wrong sign (tau = {tau}); solver inconsistency"
        )));
    }
    Ok(ScalingConstants {
        a0: m.a,
        b0: m.b,
        a0_prime: m.a_prime,
        b0_prime: m.b_prime,
        edge: m.edge(),
        tau,
        gamma: m.b.powf(-1.0 / 3.0) * tau.powf(-2.0 / 3.0),
        vartheta: m.b / tau,
    })
}

/// Chebyshev-weighted average `(1/π) ∫_L^R f(s) ds / sqrt((s-L)(R-s))` with
/// `order` Gauss-Chebyshev nodes.
fn chebyshev_average(left: f64, right: f64, order: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (c, r) = (0.5 * (left + right), 0.5 * (right - left));
    let sum: f64 = (1..=order)
        .map(|i| {
            let theta = (2 * i - 1) as f64 * std::f64::consts::PI / (2 * order) as f64;
            f(c + r * theta.cos())
        })
        .sum();
    sum / order as f64
}

/// Residuals of the moment conditions for the equilibrium measure of
/// `V_x = V / (1 - x)` supported on `[left, right]`:
///
/// * first: `(1/π) ∫ (s - c) V_x'(s) ds / sqrt((s-L)(R-s)) - 1`,
/// * second: `(1/π) ∫ V_x'(s) ds / sqrt((s-L)(R-s))`,
///
/// with `c = (L + R)/2`. These vanish exactly at `(L, R) = (a† - 2b†, a† + 2b†)`.
pub fn moment_conditions_residual(v: &Potential, x: f64, left: f64, right: f64) -> Result<(f64, f64)> {
    if !(left < right) {
        return Err(Error::validation("moment conditions need left < right"));
    }
    if !(x < 1.0) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "(-inf, 1)",
        });
    }
    let scale = 1.0 / (1.0 - x);
    let c = 0.5 * (left + right);
    let eval = |order: usize| -> Result<(f64, f64)> {
        let first = chebyshev_average(left, right, order, |s| (s - c) * v.derivative(s) * scale);
        let second = chebyshev_average(left, right, order, |s| v.derivative(s) * scale);
        if !first.is_finite() || !second.is_finite() {
            return Err(Error::numerical("non-finite moment-condition integrand"));
        }
        Ok((first - 1.0, second))
    };
    let mut order = 200;
    let mut prev = eval(order)?;
    loop {
        order *= 2;
        let next = eval(order)?;
        if (next.0 - prev.0).abs() <= 1e-9 && (next.1 - prev.1).abs() <= 1e-9 {
            return Ok(next);
        }
        if order > 200 * 64 {
            return Err(Error::numerical("moment-condition quadrature did not settle"));
        }
        prev = next;
    }
}

/// `ℰ(x)` sampled on `xs`.
pub fn edge_curve(v: &Potential, xs: &[f64]) -> Result<Vec<f64>> {
    xs.iter().map(|&x| solve_local_minimizer(v, x).map(|m| m.edge())).collect()
}

/// Log-log fit of `ℰ(0) - ℰ(ε) ~ c ε^p` near the top of the spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeExponentFit {
    /// Fitted `p`; `1/(2k+1)` for a density vanishing like `(ℰ - t)^{(4k+1)/2}`.
    pub exponent: f64,
    /// Fitted prefactor `c`.
    pub prefactor: f64,
    /// `ℰ'(0)` from the derivative formula (finite only when the curve is smooth at 0).
    pub edge_slope: f64,
}

impl EdgeExponentFit {
    /// Nearest admissible `k` with exponent `1/(2k+1)`.
    pub fn nonregular_index(&self) -> usize {
        let k = (1.0 / self.exponent - 1.0) / 2.0;
        k.round().max(0.0) as usize
    }

    /// Scale `γ = c^{-2/3} (ℰ/2)^{-1/3}` from the nonregular-edge conjecture.
    /// Conjectural: it is only meaningful when the fitted exponent is `1/(2k+1)`.
    pub fn conjectural_gamma(&self, edge: f64) -> f64 {
        self.prefactor.powf(-2.0 / 3.0) * (edge / 2.0).powf(-1.0 / 3.0)
    }
}

/// Probe the exponent of the edge curve at `x = 0` on `ε ∈ [1e-4, 1e-2]`.
/// Convex potentials use the direct solver; others are tracked by
/// continuation from `x = 0.99` downward.
pub fn edge_exponent_probe(v: &Potential) -> Result<EdgeExponentFit> {
    let points = 25;
    let eps: Vec<f64> = (0..points)
        .map(|i| 10f64.powf(-4.0 + 2.0 * i as f64 / (points - 1) as f64))
        .collect();
    let (e0, slope, edges) = if v.is_uniformly_convex() {
        let m0 = solve_local_minimizer(v, 0.0)?;
        (m0.edge(), m0.edge_prime(), edge_curve(v, &eps)?)
    } else {
        let mut grid: Vec<f64> = (0..=98).map(|i| 0.99 - 0.01 * i as f64).filter(|x| *x > 0.0102).collect();
        grid.extend(eps.iter().rev());
        grid.push(0.0);
        let curve = continue_local_minimizers(v, &grid)?;
        let m0 = curve.last().copied().expect("nonempty");
        let tail: Vec<f64> = curve[curve.len() - 1 - points..curve.len() - 1]
            .iter()
            .rev()
            .map(|m| m.edge())
            .collect();
        (m0.edge(), m0.edge_prime(), tail)
    };
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(&edges)
        .map(|(e, r)| (e.ln(), (e0 - r).ln()))
        .collect();
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(Error::numerical("edge curve not decreasing near x = 0"));
    }
    let (slope_fit, intercept) = crate::stats::least_squares_line(&pts);
    Ok(EdgeExponentFit {
        exponent: slope_fit,
        prefactor: intercept.exp(),
        edge_slope: slope,
    })
}

/// One row of the equilibrium table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumRow {
    pub minimizer: LocalMinimizer,
    pub sigma: SigmaMatrix,
}

pub fn equilibrium_table(v: &Potential, xs: &[f64]) -> Result<Vec<EquilibriumRow>> {
    xs.iter()
        .map(|&x| {
            let m = solve_local_minimizer(v, x)?;
            Ok(EquilibriumRow {
                minimizer: m,
                sigma: m.sigma(),
            })
        })
        .collect()
}

/// CSV with columns `x,a,b,a_prime,b_prime,edge,left,right,s11,s12,s22`.
pub fn write_equilibrium_csv<W: Write>(rows: &[EquilibriumRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,a,b,a_prime,b_prime,edge,left,right,s11,s12,s22")?;
    for r in rows {
        let m = &r.minimizer;
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            m.x,
            m.a,
            m.b,
            m.a_prime,
            m.b_prime,
            m.edge(),
            m.left_edge(),
            m.edge(),
            r.sigma.s11,
            r.sigma.s12,
            r.sigma.s22
        )?;
    }
    Ok(())
}
