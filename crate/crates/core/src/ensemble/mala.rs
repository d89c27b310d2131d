use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{deinterleave, interleave, Hamiltonian};
use crate::minimizer::minimize_h;
use crate::rng::stream_rng;
use crate::tridiag::TridiagonalSym;

use super::ModelSpec;

const TUNE_WINDOW: usize = 100;
const TARGET_LOW: f64 = 0.5;
const TARGET_HIGH: f64 = 0.6;
const MIN_ACCEPTANCE: f64 = 0.05;

/// Coordinates in which the chain moves the off-diagonal entries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    /// `b` itself; proposals are reflected at `0` and the proposal density of
    /// a reflected coordinate is `φ(y) + φ(-y)`, so detailed balance holds on
    /// `b > 0`.
    #[default]
    Reflected,
    /// `log b`, with target `π(a, b) Π b_k`; no barrier at `b = 0`.
    LogOffdiagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    /// Initial global step scale; defaults to `(2n - 1)^{-1/6}`.
    pub initial_step: Option<f64>,
    pub burn_in: usize,
    /// Steps between yielded states.
    pub thinning: usize,
    pub seed: u64,
    /// Stream index (replica number) within the seed.
    pub stream: u64,
    pub parametrization: Parametrization,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            initial_step: None,
            burn_in: 5_000,
            thinning: 10,
            seed: 0,
            stream: 0,
            parametrization: Parametrization::Reflected,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub iteration: usize,
    pub t: TridiagonalSym,
    pub log_density: f64,
    /// Acceptance rate since the end of burn-in.
    pub acceptance_rate: f64,
    pub step_size: f64,
}

/// Metropolis-adjusted Langevin chain on `(a, b)` or `(a, log b)` (see
/// [`Parametrization`]) with a diagonal preconditioner from the Hessian at the
/// global minimizer.
#[derive(Debug, Clone)]
pub struct MalaChain {
    spec: ModelSpec,
    param: Parametrization,
    /// Interleaved `(a_1, b_1, a_2, ...)`, with `log b` in the log
    /// parametrization.
    x: Vec<f64>,
    /// Log target in `x`, Jacobian included.
    log_p: f64,
    grad: Vec<f64>,
    /// Per-coordinate proposal variance (before the global step scale).
    precond: Vec<f64>,
    step: f64,
    rng: ChaCha8Rng,
    accepted: usize,
    proposed: usize,
    iteration: usize,
    thinning: usize,
}

impl MalaChain {
    /// Start at the global minimizer, then burn in while tuning the step scale
    /// toward an acceptance rate in `[0.5, 0.6]`.
    pub fn new(spec: ModelSpec, config: &McmcConfig) -> Result<MalaChain> {
        if spec.beta < 1.0 {
            return Err(Error::config(
                "model.beta",
                "general-V sampling needs beta >= 1 (the Hamiltonian is not convex below)",
            ));
        }
        if config.thinning == 0 {
            return Err(Error::config("mcmc.thinning", "must be at least 1"));
        }
        let n = spec.n;
        let sol = minimize_h(&spec.v, n, spec.beta)?;
        let ham = Hamiltonian::beta_model(spec.v.clone(), n, spec.beta)?;
        let hess = ham.hessian(&sol.t);
        let nb = n as f64 * spec.beta;
        let param = config.parametrization;
        let mut x = interleave(sol.t.diag(), sol.t.offdiag());
        let mut precond: Vec<f64> = (0..2 * n - 1).map(|c| 1.0 / (nb * hess.get(c, c))).collect();
        for c in (1..x.len()).step_by(2) {
            let b = if x[c] > 0.0 { x[c] } else { precond[c].sqrt() };
            x[c] = b;
            if param == Parametrization::LogOffdiagonal {
                // curvature in log b at a critical point is b² ∂²/∂b²
                precond[c] /= b * b;
                x[c] = b.ln();
            }
        }
        let step = config
            .initial_step
            .unwrap_or_else(|| ((2 * n - 1) as f64).powf(-1.0 / 6.0));
        if !(step > 0.0) {
            return Err(Error::config("mcmc.initial_step", "must be positive"));
        }
        let (log_p, grad) = eval(&spec, param, &x)?;
        let mut chain = MalaChain {
            spec,
            param,
            x,
            log_p,
            grad,
            precond,
            step,
            rng: stream_rng(config.seed, config.stream),
            accepted: 0,
            proposed: 0,
            iteration: 0,
            thinning: config.thinning,
        };
        chain.burn_in(config.burn_in)?;
        Ok(chain)
    }

    fn burn_in(&mut self, steps: usize) -> Result<()> {
        // acceptance over the second half of burn-in; a single window can
        // stall while the chain sits next to the b = 0 barrier
        let (mut late_acc, mut late_steps) = (0, 0);
        let (mut done, mut windows) = (0, 0);
        while done < steps {
            let window = TUNE_WINDOW.min(steps - done);
            let mut acc = 0;
            for _ in 0..window {
                acc += usize::from(self.advance()?);
            }
            done += window;
            if 2 * done > steps {
                late_acc += acc;
                late_steps += window;
            }
            windows += 1;
            let rate = acc as f64 / window as f64;
            if !(TARGET_LOW..=TARGET_HIGH).contains(&rate) {
                // decaying gain, so the last noisy windows cannot undo the tuning
                let mid = 0.5 * (TARGET_LOW + TARGET_HIGH);
                self.step *= (3.0 * (rate - mid) / (windows as f64).sqrt()).exp();
            }
        }
        if late_steps > 0 {
            let rate = late_acc as f64 / late_steps as f64;
            if rate < MIN_ACCEPTANCE {
                return Err(Error::config(
                    "mcmc.initial_step",
                    format!("acceptance {rate:.3} after tuning is below {MIN_ACCEPTANCE}"),
                ));
            }
        }
        self.accepted = 0;
        self.proposed = 0;
        Ok(())
    }

    /// Proposal mean `x + (ε²/2) S ∇log π(x)`.
    fn drift(&self, x: &[f64], grad: &[f64]) -> Vec<f64> {
        let h = 0.5 * self.step * self.step;
        x.iter()
            .zip(grad)
            .zip(&self.precond)
            .map(|((x, g), s)| x + h * s * g)
            .collect()
    }

    /// `log q(from -> to)` of the proposal, without `2π` factors.
    fn log_q(&self, mean: &[f64], to: &[f64]) -> f64 {
        let reflected = self.param == Parametrization::Reflected;
        let mut s = 0.0;
        for c in 0..to.len() {
            let sd = self.step * self.precond[c].sqrt();
            let z = (to[c] - mean[c]) / sd;
            let base = -0.5 * z * z - sd.ln();
            if c % 2 == 0 || !reflected {
                s += base;
            } else {
                let zr = (-to[c] - mean[c]) / sd;
                let other = -0.5 * zr * zr - sd.ln();
                let m = base.max(other);
                s += m + ((base - m).exp() + (other - m).exp()).ln();
            }
        }
        s
    }

    /// Log target in the chain coordinates: `log π(T)`, plus `Σ log b_k` in
    /// the log parametrization.
    pub fn log_target(&self, t: &TridiagonalSym) -> Result<f64> {
        Ok(eval(&self.spec, self.param, &to_chain(t, self.param))?.0)
    }

    /// Log proposal density between two states in the chain coordinates,
    /// exposed for detailed-balance checks.
    pub fn log_proposal_density(&self, from: &TridiagonalSym, to: &TridiagonalSym) -> Result<f64> {
        let x = to_chain(from, self.param);
        let (_, g) = eval(&self.spec, self.param, &x)?;
        Ok(self.log_q(&self.drift(&x, &g), &to_chain(to, self.param)))
    }

    /// Log Metropolis-Hastings acceptance probability for `from -> to`.
    pub fn log_acceptance(&self, from: &TridiagonalSym, to: &TridiagonalSym) -> Result<f64> {
        let r = self.log_target(to)? - self.log_target(from)? + self.log_proposal_density(to, from)?
            - self.log_proposal_density(from, to)?;
        Ok(r.min(0.0))
    }

    /// One Metropolis-Hastings step; returns whether the proposal was accepted.
    pub fn advance(&mut self) -> Result<bool> {
        self.iteration += 1;
        self.proposed += 1;
        let mean = self.drift(&self.x, &self.grad);
        let mut y: Vec<f64> = Vec::with_capacity(self.x.len());
        let reflected = self.param == Parametrization::Reflected;
        for c in 0..self.x.len() {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let v = mean[c] + self.step * self.precond[c].sqrt() * z;
            y.push(if reflected && c % 2 == 1 { v.abs() } else { v });
        }
        let Ok((log_p_y, grad_y)) = eval(&self.spec, self.param, &y) else {
            // b hit 0, or exp(log b) left the representable range
            return Ok(false);
        };
        let back_mean = self.drift(&y, &grad_y);
        let log_ratio = log_p_y - self.log_p + self.log_q(&back_mean, &self.x) - self.log_q(&mean, &y);
        let u: f64 = self.rng.random();
        if log_ratio >= 0.0 || u.ln() < log_ratio {
            self.x = y;
            self.log_p = log_p_y;
            self.grad = grad_y;
            self.accepted += 1;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn state(&self) -> ChainState {
        let t = from_chain(&self.x, self.param);
        let jacobian = log_jacobian(&self.x, self.param);
        ChainState {
            iteration: self.iteration,
            t: TridiagonalSym::jacobi(t.diag().to_vec(), t.offdiag().to_vec()).expect("chain keeps b positive"),
            log_density: self.log_p - jacobian,
            acceptance_rate: if self.proposed == 0 {
                f64::NAN
            } else {
                self.accepted as f64 / self.proposed as f64
            },
            step_size: self.step,
        }
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    pub fn preconditioner(&self) -> &[f64] {
        &self.precond
    }
}

impl Iterator for MalaChain {
    type Item = ChainState;

    fn next(&mut self) -> Option<ChainState> {
        for _ in 0..self.thinning {
            // evaluation only fails off-support, which reflection excludes
            self.advance().ok()?;
        }
        Some(self.state())
    }
}

fn to_chain(t: &TridiagonalSym, param: Parametrization) -> Vec<f64> {
    match param {
        Parametrization::Reflected => interleave(t.diag(), t.offdiag()),
        Parametrization::LogOffdiagonal => {
            let logs: Vec<f64> = t.offdiag().iter().map(|b| b.ln()).collect();
            interleave(t.diag(), &logs)
        }
    }
}

fn from_chain(x: &[f64], param: Parametrization) -> TridiagonalSym {
    let (a, mut b) = deinterleave(x);
    if param == Parametrization::LogOffdiagonal {
        b.iter_mut().for_each(|u| *u = u.exp());
    }
    TridiagonalSym::new(a, b).expect("interleaved lengths match")
}

fn log_jacobian(x: &[f64], param: Parametrization) -> f64 {
    match param {
        Parametrization::Reflected => 0.0,
        Parametrization::LogOffdiagonal => x.iter().skip(1).step_by(2).sum(),
    }
}

/// Log target and its gradient in the chain coordinates.
fn eval(spec: &ModelSpec, param: Parametrization, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let t = from_chain(x, param);
    if t.offdiag().iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::numerical("off-diagonal left the support"));
    }
    let (lp, ga, gb) = spec.value_and_gradient(&t)?;
    let gb = match param {
        Parametrization::Reflected => gb,
        Parametrization::LogOffdiagonal => gb.iter().zip(t.offdiag()).map(|(g, b)| g * b + 1.0).collect(),
    };
    Ok((lp + log_jacobian(x, param), interleave(&ga, &gb)))
}

/// CSV checkpoint: `iteration,a1..an,b1..b{n-1},log_density`.
pub fn write_checkpoint<W: Write>(states: &[ChainState], mut out: W) -> std::io::Result<()> {
    let Some(first) = states.first() else {
        return Ok(());
    };
    let n = first.t.n();
    let mut header = vec!["iteration".to_string()];
    header.extend((1..=n).map(|i| format!("a{i}")));
    header.extend((1..n).map(|i| format!("b{i}")));
    header.push("log_density".into());
    writeln!(out, "{}", header.join(","))?;
    for s in states {
        let mut row = vec![s.iteration.to_string()];
        row.extend(s.t.diag().iter().map(|v| format!("{v:e}")));
        row.extend(s.t.offdiag().iter().map(|v| format!("{v:e}")));
        row.push(format!("{:e}", s.log_density));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
