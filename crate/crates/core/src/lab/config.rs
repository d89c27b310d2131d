//! Declarative experiment files (TOML).
//!
//! ```toml
//! kind = "tw_reference"
//! seed = 7
//!
//! [sao]
//! beta = 2.0
//! h = 0.05
//!
//! [samples]
//! sao = 2000
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::ensemble::{ModelSpec, Parametrization};
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::sao::SaoConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EdgeUniversality,
    FieldClt,
    TwReference,
    BoundChecks,
    EquilibriumTables,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::EdgeUniversality => "edge_universality",
            ExperimentKind::FieldClt => "field_clt",
            ExperimentKind::TwReference => "tw_reference",
            ExperimentKind::BoundChecks => "bound_checks",
            ExperimentKind::EquilibriumTables => "equilibrium_tables",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Ascending coefficients as text, e.g. `"0 0 0.5 0 0.25"`.
    pub potential: Option<String>,
    pub beta: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaoSection {
    /// Defaults to `model.beta`; `inf` is accepted.
    pub beta: Option<f64>,
    pub k: Option<u32>,
    pub h: Option<f64>,
    pub length: Option<f64>,
    pub num_eigs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    /// Matrix samples (exact sampler) or chain replicas (MCMC).
    pub matrices: Option<usize>,
    /// Operator realizations.
    pub sao: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeReference {
    /// Stochastic Airy operator batch.
    #[default]
    Sao,
    /// Hermite model at the same `n` and `β`, scaled with its own constants.
    HermiteDe,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSection {
    pub reference: Option<EdgeReference>,
    /// Zero-based index counted from the top: `0` is `λ_max`.
    pub eigenvalue: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    pub burn_in: Option<usize>,
    /// Post-burn-in steps per replica.
    pub production: Option<usize>,
    pub thinning: Option<usize>,
    pub initial_step: Option<f64>,
    /// Per-replica effective sample size of the `λ_max` trace.
    pub min_ess: Option<f64>,
    /// `reflected` (default) or `log_offdiagonal`.
    pub parametrization: Option<Parametrization>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    pub x_max: Option<f64>,
    pub points: Option<usize>,
    /// Sums start at `max(1, ⌊c log n⌋)`.
    pub cutoff_c: Option<f64>,
    pub normalization: Option<FieldNormalization>,
}

/// Scaling of the summed-entry field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldNormalization {
    /// `m_n Σ [(a†(0) - A_k) + 2(b†(0) - B_k)] / b†(0)` with `m_n = (b†(0) n/τ)^{1/3}`;
    /// limit `x²/2 + (2/√β) W_x` for every `V`.
    #[default]
    Scaled,
    /// `n^{1/3} Σ [(a†(0) - A_k) + 2(b†(0) - B_k)]`; limit `τx²/2 + σ W_x`.
    Simple,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSection {
    pub x: Option<Vec<f64>>,
    /// Size of the `β = ∞` minimizer whose spectrum is histogrammed.
    pub histogram_n: Option<usize>,
    pub histogram_bins: Option<usize>,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub quadrature_m: Option<Vec<usize>>,
    pub fekete_n: Option<usize>,
    pub decay_ell: Option<usize>,
    pub decay_delta: Option<f64>,
    /// `n`, `m` and `κ` for the truncation-domination margin.
    pub truncation_n: Option<usize>,
    pub truncation_m: Option<usize>,
    pub truncation_kappa: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub ks: Option<f64>,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    /// Relative error of the field mean coefficient and variance slope.
    pub field_relative: Option<f64>,
    pub outside_mass: Option<f64>,
    pub quadrature_gap: Option<f64>,
    pub fekete_residual: Option<f64>,
    pub fekete_weights: Option<f64>,
    pub decay_slope: Option<f64>,
    /// Fraction of sampled matrices on which the truncation margin is
    /// `>= -1e-8`.
    pub truncation_frequency: Option<f64>,
}

/// Raw experiment file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub sao: SaoSection,
    #[serde(default)]
    pub samples: SampleSection,
    #[serde(default)]
    pub edge: EdgeSection,
    #[serde(default)]
    pub mcmc: McmcSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub equilibrium: EquilibriumSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!(" (bytes {}..{})", s.start, s.end)).unwrap_or_default();
            Error::config("<file>", format!("{}{span}", e.message()))
        })
    }

    pub fn validate(&self) -> Result<Experiment> {
        Experiment::from_config(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcSettings {
    pub burn_in: usize,
    pub production: usize,
    pub thinning: usize,
    pub initial_step: Option<f64>,
    pub min_ess: f64,
    pub parametrization: Parametrization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSettings {
    pub x_max: f64,
    pub points: usize,
    pub cutoff_c: f64,
    pub normalization: FieldNormalization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSettings {
    pub x: Vec<f64>,
    pub histogram_n: usize,
    pub histogram_bins: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSettings {
    pub quadrature_m: Vec<usize>,
    pub fekete_n: usize,
    pub decay_ell: usize,
    pub decay_delta: f64,
    pub truncation_n: usize,
    pub truncation_m: usize,
    pub truncation_kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub ks: f64,
    pub mean: f64,
    pub variance: Option<f64>,
    pub field_relative: f64,
    pub outside_mass: f64,
    pub quadrature_gap: f64,
    pub fekete_residual: f64,
    pub fekete_weights: f64,
    pub decay_slope: f64,
    pub truncation_frequency: f64,
}

/// A validated experiment; only the sections the kind uses are filled.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub potential: Potential,
    pub beta: f64,
    pub n: usize,
    pub sao: Option<SaoConfig>,
    pub matrices: usize,
    pub sao_samples: usize,
    pub reference: EdgeReference,
    pub eigenvalue: usize,
    pub mcmc: McmcSettings,
    pub field: FieldSettings,
    pub equilibrium: EquilibriumSettings,
    pub bounds: BoundSettings,
    pub tolerances: Tolerances,
}

impl Experiment {
    pub fn model(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.potential.clone(), self.beta, self.n)
    }
}

/// Collects missing fields and bad values so that one run reports them all.
struct Problems(Vec<(String, String)>);

impl Problems {
    fn need<T: Clone>(&mut self, value: &Option<T>, field: &str) -> Option<T> {
        if value.is_none() {
            self.0.push((field.into(), "missing".into()));
        }
        value.clone()
    }

    fn check(&mut self, ok: bool, field: &str, message: &str) {
        if !ok {
            self.0.push((field.into(), message.into()));
        }
    }

    fn into_result(self) -> Result<()> {
        if self.0.is_empty() {
            return Ok(());
        }
        let fields: Vec<&str> = self.0.iter().map(|(f, _)| f.as_str()).collect();
        let detail: Vec<String> = self.0.iter().map(|(f, m)| format!("{f}: {m}")).collect();
        Err(Error::config(fields.join(", "), detail.join("; ")))
    }
}

impl Experiment {
    fn from_config(c: &ExperimentConfig) -> Result<Experiment> {
        let mut p = Problems(Vec::new());
        let kind = p.need(&c.kind, "kind");
        let seed = p.need(&c.seed, "seed");
        let Some(kind) = kind else {
            p.into_result()?;
            unreachable!("missing kind is reported above");
        };
        use ExperimentKind::*;

        let needs_model = kind != TwReference;
        let needs_n = matches!(kind, EdgeUniversality | FieldClt);
        let needs_sao = kind == TwReference
            || (kind == EdgeUniversality && c.edge.reference.unwrap_or_default() == EdgeReference::Sao);

        let potential = match (&c.model.potential, needs_model) {
            (Some(text), _) => match text.parse::<Potential>() {
                Ok(v) => Some(v),
                Err(e) => {
                    p.check(false, "model.potential", &e.to_string());
                    None
                }
            },
            (None, true) => {
                p.need(&c.model.potential, "model.potential");
                None
            }
            (None, false) => Some(Potential::hermite()),
        };
        if let Some(v) = &potential {
            if needs_model {
                p.check(v.is_uniformly_convex(), "model.potential", "must be uniformly convex");
            }
        }

        let beta = if matches!(kind, EdgeUniversality | FieldClt) {
            p.need(&c.model.beta, "model.beta")
        } else {
            c.model.beta.or(c.sao.beta)
        }
        .unwrap_or(2.0);
        p.check(beta > 0.0, "model.beta", "must be positive");
        if kind == EdgeUniversality {
            p.check(beta.is_finite(), "model.beta", "edge sampling needs a finite beta");
        }

        let n = if needs_n { p.need(&c.model.n, "model.n") } else { c.model.n }.unwrap_or(2);
        p.check(n >= 2, "model.n", "must be at least 2");

        let sao = if needs_sao {
            let sao_beta = c.sao.beta.or(c.model.beta);
            let sao_beta = if kind == TwReference {
                sao_beta.unwrap_or(2.0)
            } else {
                p.need(&sao_beta, "sao.beta").unwrap_or(2.0)
            };
            let k = c.sao.k.unwrap_or(0);
            let cfg = SaoConfig {
                beta: sao_beta,
                k,
                h: p.need(&c.sao.h, "sao.h").unwrap_or(0.05),
                length: c.sao.length.unwrap_or(SaoConfig::default_length(k)),
                seed: seed.unwrap_or(0),
                num_eigs: c.sao.num_eigs.unwrap_or(1).max(c.edge.eigenvalue.unwrap_or(0) + 1),
            };
            if let Err(Error::Config { field, message }) = cfg.validate() {
                p.check(false, &field, &message);
            }
            p.check(cfg.beta.is_finite(), "sao.beta", "sampling needs a finite beta");
            Some(cfg)
        } else {
            None
        };

        // the frozen (β = ∞) field is a single deterministic path
        let frozen_field = kind == FieldClt && beta.is_infinite();
        let matrices = if kind == EdgeUniversality || (kind == FieldClt && !frozen_field) {
            p.need(&c.samples.matrices, "samples.matrices").unwrap_or(1)
        } else if frozen_field {
            c.samples.matrices.unwrap_or(1)
        } else {
            c.samples.matrices.unwrap_or(if kind == BoundChecks { 200 } else { 0 })
        };
        let sao_samples = if needs_sao {
            p.need(&c.samples.sao, "samples.sao").unwrap_or(1)
        } else {
            c.samples.sao.unwrap_or(0)
        };
        if needs_n && !frozen_field {
            p.check(matrices >= 2, "samples.matrices", "must be at least 2");
        }
        if needs_sao {
            p.check(sao_samples >= 2, "samples.sao", "must be at least 2");
        }

        let mcmc = McmcSettings {
            burn_in: c.mcmc.burn_in.unwrap_or(5_000),
            production: c.mcmc.production.unwrap_or(20_000),
            thinning: c.mcmc.thinning.unwrap_or(10),
            initial_step: c.mcmc.initial_step,
            min_ess: c.mcmc.min_ess.unwrap_or(50.0),
            parametrization: c.mcmc.parametrization.unwrap_or_default(),
        };
        p.check(mcmc.thinning >= 1, "mcmc.thinning", "must be at least 1");
        p.check(mcmc.production >= 2 * mcmc.thinning, "mcmc.production", "too short for the thinning");
        p.check(mcmc.initial_step.is_none_or(|s| s > 0.0), "mcmc.initial_step", "must be positive");

        let field = FieldSettings {
            x_max: c.field.x_max.unwrap_or(1.0),
            points: c.field.points.unwrap_or(20),
            cutoff_c: c.field.cutoff_c.unwrap_or(10.0),
            normalization: c.field.normalization.unwrap_or_default(),
        };
        p.check(field.x_max > 0.0, "field.x_max", "must be positive");
        p.check(field.points >= 2, "field.points", "must be at least 2");
        p.check(field.cutoff_c >= 0.0, "field.cutoff_c", "must be nonnegative");

        let equilibrium = EquilibriumSettings {
            x: c
                .equilibrium
                .x
                .clone()
                .unwrap_or_else(|| (0..10).map(|i| i as f64 / 10.0).collect()),
            histogram_n: c.equilibrium.histogram_n.unwrap_or(4000),
            histogram_bins: c.equilibrium.histogram_bins.unwrap_or(80),
            margin: c.equilibrium.margin.unwrap_or(0.05),
        };
        p.check(
            equilibrium.x.iter().all(|x| (0.0..1.0).contains(x)),
            "equilibrium.x",
            "grid values must lie in [0, 1)",
        );
        p.check(equilibrium.histogram_n >= 2, "equilibrium.histogram_n", "must be at least 2");
        p.check(equilibrium.histogram_bins >= 1, "equilibrium.histogram_bins", "must be positive");

        let bounds = BoundSettings {
            quadrature_m: c.bounds.quadrature_m.clone().unwrap_or_else(|| vec![32, 64, 128]),
            fekete_n: c.bounds.fekete_n.unwrap_or(60),
            decay_ell: c.bounds.decay_ell.unwrap_or(80),
            decay_delta: c.bounds.decay_delta.unwrap_or(0.1),
            truncation_n: c.bounds.truncation_n.unwrap_or(2000),
            truncation_m: c.bounds.truncation_m.unwrap_or(60),
            truncation_kappa: c.bounds.truncation_kappa.unwrap_or(0.5),
        };
        p.check(bounds.quadrature_m.iter().all(|m| *m >= 16), "bounds.quadrature_m", "entries must be >= 16");
        p.check(bounds.fekete_n >= 2, "bounds.fekete_n", "must be at least 2");
        p.check(bounds.decay_ell >= 40, "bounds.decay_ell", "must be at least 40");
        p.check(
            (2..=bounds.truncation_n).contains(&bounds.truncation_m),
            "bounds.truncation_m",
            "must lie in [2, truncation_n]",
        );

        let t = &c.tolerances;
        let tolerances = Tolerances {
            ks: t.ks.unwrap_or(0.06),
            mean: t.mean.unwrap_or(0.05),
            variance: t.variance,
            field_relative: t.field_relative.unwrap_or(0.05),
            outside_mass: t.outside_mass.unwrap_or(0.01),
            quadrature_gap: t.quadrature_gap.unwrap_or(5.0),
            fekete_residual: t.fekete_residual.unwrap_or(1e-6),
            fekete_weights: t.fekete_weights.unwrap_or(1e-8),
            decay_slope: t.decay_slope.unwrap_or(-0.05),
            truncation_frequency: t.truncation_frequency.unwrap_or(0.99),
        };

        p.into_result()?;
        Ok(Experiment {
            kind,
            seed: seed.expect("checked"),
            output: c.output.clone(),
            potential: potential.expect("checked"),
            beta,
            n,
            sao,
            matrices,
            sao_samples,
            reference: c.edge.reference.unwrap_or_default(),
            eigenvalue: c.edge.eigenvalue.unwrap_or(0),
            mcmc,
            field,
            equilibrium,
            bounds,
            tolerances,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_lists_missing_fields() {
        let err = ExperimentConfig::parse("").unwrap().validate().unwrap_err();
        let text = err.to_string();
        assert!(text.contains("kind") && text.contains("seed"), "{text}");
    }

    #[test]
    fn missing_sections_are_listed_together() {
        let c = ExperimentConfig::parse("kind = \"edge_universality\"\nseed = 1\n").unwrap();
        let Err(Error::Config { field, .. }) = c.validate() else {
            panic!("expected a config error");
        };
        for f in ["model.potential", "model.beta", "model.n", "samples.matrices", "sao.h", "samples.sao"] {
            assert!(field.contains(f), "{field}");
        }
    }

    #[test]
    fn unknown_kind_and_field_rejected() {
        assert!(ExperimentConfig::parse("kind = \"nope\"\nseed = 1").is_err());
        assert!(ExperimentConfig::parse("kind = \"tw_reference\"\nseed = 1\nbogus = 3").is_err());
        assert!(ExperimentConfig::parse("kind = \"tw_reference\"\nseed = 1\n[sao]\nwidth = 3").is_err());
    }

    #[test]
    fn tw_reference_defaults() {
        let c = ExperimentConfig::parse("kind = \"tw_reference\"\nseed = 3\n[sao]\nh = 0.1\n[samples]\nsao = 100\n")
            .unwrap()
            .validate()
            .unwrap();
        let sao = c.sao.unwrap();
        assert_eq!((sao.beta, sao.length, sao.seed), (2.0, 12.0, 3));
    }

    #[test]
    fn bad_values_point_at_fields() {
        let text = "kind = \"field_clt\"\nseed = 1\n[model]\npotential = \"0 0 0 0 1\"\nbeta = 2.0\nn = 1\n[samples]\nmatrices = 10\n";
        let Err(Error::Config { field, .. }) = ExperimentConfig::parse(text).unwrap().validate() else {
            panic!("expected a config error");
        };
        assert!(field.contains("model.potential") && field.contains("model.n"), "{field}");
    }

    #[test]
    fn infinite_sao_beta_parses() {
        let c = ExperimentConfig::parse("kind = \"tw_reference\"\nseed = 3\n[sao]\nbeta = inf\nh = 0.1\n[samples]\nsao = 10\n")
            .unwrap();
        // a noiseless batch is not a sample
        assert!(c.validate().is_err());
    }
}
