//! Finite-difference discretization of the stochastic Airy operator
//! `-d²/dx² + x + (2/√β) W'(x)` on `[0, L]` with Dirichlet walls, and of the
//! nonregular family `-d²/dx² + x^{1/(2k+1)} + (2/√β) x^{-k/(2k+1)} W'(x)`
//! (conjectural for `k >= 1`).
//!
//! White noise is averaged over each grid cell: the diagonal noise term of
//! cell `j` is `(2/√β) ΔW_j / h` modulated by the cell average of the
//! weight, so it has variance `4 w_j / (β h)`.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::tridiag::{EigenPair, TridiagonalSym};

#[derive(Debug, Clone, PartialEq)]
pub struct SaoConfig {
    /// `f64::INFINITY` switches the noise off.
    pub beta: f64,
    /// Nonregular index; `0` is the Airy operator.
    pub k: u32,
    pub h: f64,
    pub length: f64,
    pub seed: u64,
    pub num_eigs: usize,
}

impl SaoConfig {
    /// Airy operator (`k = 0`) with `L = 12`.
    pub fn airy(beta: f64, h: f64, seed: u64) -> SaoConfig {
        SaoConfig {
            beta,
            k: 0,
            h,
            length: 12.0,
            seed,
            num_eigs: 1,
        }
    }

    /// Default domain length: 12 for `k = 0`, 20 otherwise.
    pub fn default_length(k: u32) -> f64 {
        if k == 0 {
            12.0
        } else {
            20.0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::config("sao.beta", "must be positive (inf for no noise)"));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::config("sao.h", "grid step must be positive"));
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::config("sao.length", "domain length must be positive"));
        }
        let ratio = self.length / self.h;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::config("sao.length", format!("L/h = {ratio} is not an integer")));
        }
        if ratio.round() < 10.0 {
            return Err(Error::config("sao.length", format!("L/h = {ratio} is below 10 grid points")));
        }
        if self.num_eigs == 0 || self.num_eigs > self.grid_size() {
            return Err(Error::config("sao.num_eigs", "must be between 1 and the grid size"));
        }
        Ok(())
    }

    pub fn grid_size(&self) -> usize {
        (self.length / self.h).round() as usize
    }

    /// Cell-averaged noise weights `w_j`.
    pub fn noise_weights(&self) -> Vec<f64> {
        let m = self.grid_size();
        if self.k == 0 {
            return vec![1.0; m];
        }
        let p = 1.0 / (2 * self.k + 1) as f64;
        let q = (2 * self.k + 1) as f64;
        (1..=m)
            .map(|j| {
                let (x1, x0) = (j as f64 * self.h, (j - 1) as f64 * self.h);
                q * (x1.powf(p) - x0.powf(p)) / self.h
            })
            .collect()
    }
}

/// One realization of the discretized operator. The off-diagonal is the
/// actual `-1/h²`, so eigenvectors are grid samples of the eigenfunctions.
pub fn discretize_sao<R: Rng + ?Sized>(config: &SaoConfig, rng: &mut R) -> Result<TridiagonalSym> {
    config.validate()?;
    let m = config.grid_size();
    let h = config.h;
    let p = 1.0 / (2 * config.k + 1) as f64;
    let noise_var = if config.beta.is_infinite() { 0.0 } else { 4.0 / (config.beta * h) };
    let weights = config.noise_weights();
    let mut diag = Vec::with_capacity(m);
    for (j, w) in (1..=m).zip(&weights) {
        let x = j as f64 * h;
        let mut d = 2.0 / (h * h) + x.powf(p);
        if noise_var > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            d += (noise_var * w).sqrt() * z;
        }
        diag.push(d);
    }
    TridiagonalSym::new(diag, vec![-1.0 / (h * h); m - 1])
}

/// `|<f, T f> - Λ ‖f‖²|`.
pub fn rayleigh_residual(t: &TridiagonalSym, pair: &EigenPair) -> f64 {
    let norm2: f64 = pair.vector.iter().map(|x| x * x).sum();
    (t.quadratic_form(&pair.vector) - pair.value * norm2).abs()
}

/// Value at `h = 0` of the polynomial in `h²` through `(h_i, Λ(h_i))`
/// (Neville's scheme).
pub fn richardson_extrapolate(hs: &[f64], values: &[f64]) -> Result<f64> {
    if hs.is_empty() || hs.len() != values.len() {
        return Err(Error::validation("need matching, nonempty step and value lists"));
    }
    let x: Vec<f64> = hs.iter().map(|h| h * h).collect();
    let mut p = values.to_vec();
    for level in 1..p.len() {
        for i in 0..p.len() - level {
            p[i] = (x[i + level] * p[i] - x[i] * p[i + 1]) / (x[i + level] - x[i]);
        }
    }
    Ok(p[0])
}

/// Ground eigenvalue of the noiseless operator, extrapolated over `hs`.
pub fn deterministic_ground_state(k: u32, length: f64, hs: &[f64]) -> Result<f64> {
    let mut vals = Vec::with_capacity(hs.len());
    for &h in hs {
        let cfg = SaoConfig {
            beta: f64::INFINITY,
            k,
            h,
            length,
            seed: 0,
            num_eigs: 1,
        };
        let t = discretize_sao(&cfg, &mut stream_rng(0, 0))?;
        vals.push(t.eigen_min());
    }
    richardson_extrapolate(hs, &vals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchMetadata {
    pub model: String,
    /// Matrix size, for matrix-edge batches.
    pub n: Option<usize>,
    /// Grid step, for operator batches.
    pub h: Option<f64>,
    pub beta: f64,
    pub seed: u64,
}

/// Edge samples: `-Λ_0` per realization (Tracy-Widom scale), or scaled
/// matrix edges `γ n^{2/3} (λ_max - ℰ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSampleBatch {
    pub values: Vec<f64>,
    /// `higher[j][i] = -Λ_{j+1}` of realization `i`, when requested.
    pub higher: Vec<Vec<f64>>,
    /// Smallest gap between computed eigenvalues over the batch.
    pub min_gap: Option<f64>,
    pub metadata: BatchMetadata,
}

impl EdgeSampleBatch {
    pub fn new(values: Vec<f64>, metadata: BatchMetadata) -> Result<EdgeSampleBatch> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("edge sample is not finite"));
        }
        Ok(EdgeSampleBatch {
            values,
            higher: Vec::new(),
            min_gap: None,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `# key=value` header lines, then one row per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let m = &self.metadata;
        writeln!(out, "# model={}", m.model)?;
        if let Some(n) = m.n {
            writeln!(out, "# n={n}")?;
        }
        if let Some(h) = m.h {
            writeln!(out, "# h={h}")?;
        }
        writeln!(out, "# beta={}", m.beta)?;
        writeln!(out, "# seed={}", m.seed)?;
        let mut header = vec!["value".to_string()];
        header.extend((1..=self.higher.len()).map(|j| format!("value{j}")));
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.values.len() {
            let mut row = vec![format!("{:e}", self.values[i])];
            row.extend(self.higher.iter().map(|c| format!("{:e}", c[i])));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Inverse of [`EdgeSampleBatch::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<EdgeSampleBatch> {
        let mut meta = BatchMetadata {
            model: String::new(),
            n: None,
            h: None,
            beta: f64::NAN,
            seed: 0,
        };
        let (mut seen_model, mut seen_beta, mut seen_seed) = (false, false, false);
        let mut columns: Option<usize> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let bad = |what: &str| Error::validation(format!("malformed batch file: {what}"));
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(kv) = line.strip_prefix('#') {
                let (k, v) = kv.trim().split_once('=').ok_or_else(|| bad(line))?;
                match k {
                    "model" => {
                        meta.model = v.to_string();
                        seen_model = true;
                    }
                    "n" => meta.n = Some(v.parse().map_err(|_| bad(line))?),
                    "h" => meta.h = Some(v.parse().map_err(|_| bad(line))?),
                    "beta" => {
                        meta.beta = v.parse().map_err(|_| bad(line))?;
                        seen_beta = true;
                    }
                    "seed" => {
                        meta.seed = v.parse().map_err(|_| bad(line))?;
                        seen_seed = true;
                    }
                    _ => return Err(bad(line)),
                }
                continue;
            }
            match columns {
                None => columns = Some(line.split(',').count()),
                Some(c) => {
                    let row: Vec<f64> = line
                        .split(',')
                        .map(|f| f.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad(line))?;
                    if row.len() != c {
                        return Err(bad("ragged row"));
                    }
                    rows.push(row);
                }
            }
        }
        if !(seen_model && seen_beta && seen_seed) {
            return Err(bad("incomplete metadata"));
        }
        let c = columns.ok_or_else(|| bad("missing column header"))?;
        let values = rows.iter().map(|r| r[0]).collect();
        let mut batch = EdgeSampleBatch::new(values, meta)?;
        batch.higher = (1..c).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Ok(batch)
    }
}

/// `count` independent realizations, realization `i` drawing from stream `i`
/// of `config.seed`.
pub fn sample_tw_beta(config: &SaoConfig, count: usize) -> Result<EdgeSampleBatch> {
    config.validate()?;
    if config.beta.is_infinite() {
        return Err(Error::config("sao.beta", "sampling needs a finite beta"));
    }
    if count == 0 {
        return Err(Error::config("samples", "must be at least 1"));
    }
    let k = config.num_eigs;
    let per: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, i as u64);
            let t = discretize_sao(config, &mut rng)?;
            Ok((0..k).map(|j| t.kth_eigenvalue(j)).collect())
        })
        .collect::<Result<_>>()?;
    let min_gap = per
        .iter()
        .flat_map(|ev| ev.windows(2).map(|w| w[1] - w[0]))
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.min(g))));
    let meta = BatchMetadata {
        model: if config.k == 0 {
            "sao".into()
        } else {
            format!("sao_k{} (conjectural)", config.k)
        },
        n: None,
        h: Some(config.h),
        beta: config.beta,
        seed: config.seed,
    };
    let mut batch = EdgeSampleBatch::new(per.iter().map(|ev| -ev[0]).collect(), meta)?;
    batch.higher = (1..k).map(|j| per.iter().map(|ev| -ev[j]).collect()).collect();
    batch.min_gap = min_gap;
    Ok(batch)
}
