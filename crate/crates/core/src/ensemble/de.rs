use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::tridiag::TridiagonalSym;

/// `χ_ν` variate.
fn chi<R: Rng + ?Sized>(nu: f64, rng: &mut R) -> f64 {
    ChiSquared::new(nu).expect("positive degrees of freedom").sample(rng).sqrt()
}

fn check(n: usize, beta: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::validation("model size must be at least 2"));
    }
    if !(beta > 0.0) || beta.is_infinite() {
        return Err(Error::validation("beta must be positive and finite"));
    }
    Ok(())
}

/// Dumitriu-Edelman model for `V = s^2/4`: `a_k = g_k / sqrt(nβ)` with
/// `Var g_k = 2`, `b_k = χ_{(n-k)β} / sqrt(nβ)`.
pub fn sample_hermite_de<R: Rng + ?Sized>(n: usize, beta: f64, rng: &mut R) -> Result<TridiagonalSym> {
    sample_quadratic_de(&Potential::hermite(), n, beta, rng)
}

/// Location and scale of the affine map taking the Hermite model to the
/// quadratic potential `c0 + c1 s + c2 s^2`: `T = μ I + T_H / (2 sqrt(c2))`.
fn affine(v: &Potential) -> Result<(f64, f64)> {
    let (_, c1, c2) = v
        .as_quadratic()
        .ok_or_else(|| Error::validation("the exact tridiagonal sampler needs a quadratic potential"))?;
    Ok((-c1 / (2.0 * c2), 1.0 / (2.0 * c2.sqrt())))
}

/// Exact sampler for any quadratic `V`.
pub fn sample_quadratic_de<R: Rng + ?Sized>(v: &Potential, n: usize, beta: f64, rng: &mut R) -> Result<TridiagonalSym> {
    check(n, beta)?;
    let p = sample_de_prefix(v, n, beta, n, rng)?;
    TridiagonalSym::jacobi(p.a, p.b)
}

/// The first `k` diagonal and off-diagonal entries of the model of size `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DePrefix {
    pub a: Vec<f64>,
    /// `min(k, n - 1)` entries.
    pub b: Vec<f64>,
}

/// Entries `1..=k` of the exact model without materializing the rest; the
/// entries are independent, so this has the law of the corresponding prefix
/// of [`sample_quadratic_de`].
pub fn sample_de_prefix<R: Rng + ?Sized>(v: &Potential, n: usize, beta: f64, k: usize, rng: &mut R) -> Result<DePrefix> {
    check(n, beta)?;
    if k > n {
        return Err(Error::validation("prefix longer than the matrix"));
    }
    let (mu, scale) = affine(v)?;
    let nb = n as f64 * beta;
    let sd_a = (2.0 / nb).sqrt() * scale;
    let mut a = Vec::with_capacity(k);
    let mut b = Vec::with_capacity(k.min(n - 1));
    for i in 1..=k {
        let g: f64 = StandardNormal.sample(rng);
        a.push(mu + sd_a * g);
        if i < n {
            b.push(chi(beta * (n - i) as f64, rng) / nb.sqrt() * scale);
        }
    }
    Ok(DePrefix { a, b })
}

/// Dirichlet(β/2, ..., β/2) weights as normalized Gamma(β/2, 1) draws.
pub fn sample_dirichlet_weights<R: Rng + ?Sized>(n: usize, beta: f64, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 || !(beta > 0.0) || beta.is_infinite() {
        return Err(Error::validation("Dirichlet weights need n >= 1 and finite beta > 0"));
    }
    let gamma = Gamma::new(beta / 2.0, 1.0).expect("valid gamma parameters");
    let g: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = g.iter().sum();
    Ok(g.into_iter().map(|x| x / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::ModelSpec;
    use crate::stats::{mean, variance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moments_of_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (n, beta, reps) = (10, 2.0, 40_000);
        let mut a3 = Vec::with_capacity(reps);
        let mut b3sq = Vec::with_capacity(reps);
        for _ in 0..reps {
            let t = sample_hermite_de(n, beta, &mut rng).unwrap();
            a3.push(t.diag()[2]);
            b3sq.push(t.offdiag()[2].powi(2));
        }
        let var_a = 2.0 / (n as f64 * beta);
        assert!(mean(&a3).abs() < 4.0 * (var_a / reps as f64).sqrt());
        assert!((variance(&a3) - var_a).abs() < 0.03 * var_a);
        // E b_k^2 = (n - k)/n; Var χ²_ν = 2ν
        let want = (n - 3) as f64 / n as f64;
        let se = (2.0 * beta * (n - 3) as f64).sqrt() / (n as f64 * beta) / (reps as f64).sqrt();
        assert!((mean(&b3sq) - want).abs() < 4.0 * se);
    }

    #[test]
    fn semicircle_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = sample_hermite_de(2000, 2.0, &mut rng).unwrap();
        let ev = t.eigenvalues();
        let inside = ev.iter().filter(|l| l.abs() <= 2.0).count();
        assert!(inside as f64 / 2000.0 > 0.99);
    }

    #[test]
    fn spectral_weights_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = sample_hermite_de(50, 1.0, &mut rng).unwrap();
        assert!(t.spectral_measure().unwrap().weights().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn density_ratio_matches_sampling_density() {
        // log p_DE = Σ -nβ a²/4 + Σ [(β(n-k) - 1) log b_k - nβ b_k²/2]
        let (n, beta) = (7, 2.5);
        let nb = n as f64 * beta;
        let log_p = |t: &TridiagonalSym| {
            let sa: f64 = t.diag().iter().map(|a| -nb * a * a / 4.0).sum();
            let sb: f64 = t
                .offdiag()
                .iter()
                .enumerate()
                .map(|(i, b)| (beta * (n - i - 1) as f64 - 1.0) * b.ln() - nb * b * b / 2.0)
                .sum();
            sa + sb
        };
        let spec = ModelSpec::hermite(beta, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let t = sample_hermite_de(n, beta, &mut rng).unwrap();
            let u = sample_hermite_de(n, beta, &mut rng).unwrap();
            let lhs = spec.log_density(&t).unwrap().value - spec.log_density(&u).unwrap().value;
            let rhs = log_p(&t) - log_p(&u);
            assert!((lhs - rhs).abs() < 1e-8);
        }
    }

    #[test]
    fn quadratic_affine_map() {
        let v = Potential::new(vec![1.0, 0.6, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut a = Vec::new();
        for _ in 0..20_000 {
            a.push(sample_quadratic_de(&v, 5, 2.0, &mut rng).unwrap().diag()[0]);
        }
        // V = (s + 0.3)^2 + const: a ~ N(-0.3, 1/(2 n β c2))
        assert!((mean(&a) + 0.3).abs() < 0.005);
        assert!((variance(&a) - 0.05).abs() < 0.002);
        assert!(sample_quadratic_de(&Potential::new(vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap(), 5, 2.0, &mut rng).is_err());
    }

    #[test]
    fn prefix_has_the_right_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = sample_de_prefix(&Potential::hermite(), 1_000_000, 2.0, 100, &mut rng).unwrap();
        assert_eq!((p.a.len(), p.b.len()), (100, 100));
        assert!(p.b.iter().all(|b| (b - 1.0).abs() < 0.01));
        let full = sample_de_prefix(&Potential::hermite(), 5, 2.0, 5, &mut rng).unwrap();
        assert_eq!(full.b.len(), 4);
    }

    #[test]
    fn dirichlet_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, beta) = (5, 2.0);
        let w = sample_dirichlet_weights(n, beta, &mut rng).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let draws = 1_000_000;
        let mut first = Vec::with_capacity(draws);
        for _ in 0..draws {
            first.push(sample_dirichlet_weights(n, beta, &mut rng).unwrap()[0]);
        }
        let alpha = beta / 2.0;
        let a0 = n as f64 * alpha;
        let var = alpha * (a0 - alpha) / (a0 * a0 * (a0 + 1.0));
        let m = mean(&first);
        assert!((m - 0.2).abs() < 3.0 * (var / draws as f64).sqrt());
        // Var of the sample variance for a bounded variable: use 4th moment bound
        let v = variance(&first);
        let m4 = first.iter().map(|x| (x - m).powi(4)).sum::<f64>() / draws as f64;
        let se = ((m4 - v * v) / draws as f64).sqrt();
        assert!((v - var).abs() < 3.0 * se, "{v} vs {var} (se {se})");
    }
}
