//! Stable random variates via the Chambers-Mallows-Stuck construction.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Standard symmetric alpha-stable variate with characteristic function
/// `exp(-|xi|^alpha)`, for `alpha` in (0, 2).
///
/// Chambers-Mallows-Stuck: with `U ~ Uniform(-pi/2, pi/2)` and `E ~ Exp(1)`,
///
/// ```text
/// X = sin(alpha U) / cos(U)^{1/alpha} * ( cos((1-alpha) U) / E )^{(1-alpha)/alpha}
/// ```
///
/// reduces to `tan(U)` (Cauchy) at `alpha = 1`.
pub fn standard_symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 2.0);
    let u = std::f64::consts::FRAC_PI_2 * (2.0 * rng.random::<f64>() - 1.0);
    if (alpha - 1.0).abs() < 1e-12 {
        return u.tan();
    }
    let e: f64 = Exp1.sample(rng);
    let s = (alpha * u).sin() / u.cos().powf(1.0 / alpha);
    let t = (((1.0 - alpha) * u).cos() / e).powf((1.0 - alpha) / alpha);
    s * t
}

/// Standard one-sided (positive) beta-stable variate with Laplace transform
/// `exp(-u^beta)`, for `beta` in (0, 1). Kanter's form of the CMS sampler:
/// with `V ~ Uniform(0, pi)` and `E ~ Exp(1)`,
///
/// ```text
/// S = ( a(V) / E )^{(1-beta)/beta},
/// a(V) = sin((1-beta) V) (sin(beta V))^{beta/(1-beta)} / (sin V)^{1/(1-beta)}
/// ```
pub fn standard_one_sided_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    debug_assert!(beta > 0.0 && beta < 1.0);
    let v = std::f64::consts::PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    let a = ((1.0 - beta) * v).sin() * (beta * v).sin().powf(beta / (1.0 - beta))
        / v.sin().powf(1.0 / (1.0 - beta));
    (a / e).powf((1.0 - beta) / beta)
}

/// Isotropic stable increment in `dim` dimensions with characteristic
/// function `exp(-scale |xi|^alpha)`, written into `out`.
///
/// One dimension uses the symmetric CMS variate directly; higher dimensions
/// use subordination: `sqrt(2 S) Z` with `S` one-sided `(alpha/2)`-stable.
pub fn isotropic_stable_increment<R: Rng + ?Sized>(
    alpha: f64,
    scale: f64,
    rng: &mut R,
    out: &mut [f64],
) {
    use rand_distr::StandardNormal;
    if out.len() == 1 {
        out[0] = scale.powf(1.0 / alpha) * standard_symmetric_stable(alpha, rng);
        return;
    }
    let s = scale.powf(2.0 / alpha) * standard_one_sided_stable(alpha / 2.0, rng);
    let factor = (2.0 * s).sqrt();
    for o in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *o = factor * z;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_variates_match_characteristic_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        for alpha in [0.7, 1.0, 1.5, 1.9] {
            let samples: Vec<f64> = (0..n)
                .map(|_| standard_symmetric_stable(alpha, &mut rng))
                .collect();
            for xi in [0.5_f64, 1.0, 2.0] {
                let empirical: f64 =
                    samples.iter().map(|&s| (xi * s).cos()).sum::<f64>() / n as f64;
                let expect = (-xi.abs().powf(alpha)).exp();
                // cos is bounded by 1, so the Monte Carlo error is < 4/sqrt(n).
                assert!(
                    (empirical - expect).abs() < 4.0 / (n as f64).sqrt() + 1e-3,
                    "alpha={alpha} xi={xi}: {empirical} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn one_sided_variates_match_laplace_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        for beta in [0.4, 0.75, 0.95] {
            let samples: Vec<f64> = (0..n)
                .map(|_| standard_one_sided_stable(beta, &mut rng))
                .collect();
            assert!(samples.iter().all(|&s| s > 0.0));
            for u in [0.5_f64, 1.0, 2.0] {
                let empirical: f64 =
                    samples.iter().map(|&s| (-u * s).exp()).sum::<f64>() / n as f64;
                let expect = (-u.powf(beta)).exp();
                assert!(
                    (empirical - expect).abs() < 4.0 / (n as f64).sqrt() + 1e-3,
                    "beta={beta} u={u}: {empirical} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn isotropic_increment_matches_characteristic_function_in_2d() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 200_000;
        let alpha = 1.5;
        let scale = 0.8;
        let mut acc = 0.0;
        let mut out = [0.0, 0.0];
        let xi = [0.9, -0.4];
        for _ in 0..n {
            isotropic_stable_increment(alpha, scale, &mut rng, &mut out);
            acc += (xi[0] * out[0] + xi[1] * out[1]).cos();
        }
        let empirical = acc / n as f64;
        let norm = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        let expect = (-scale * norm.powf(alpha)).exp();
        assert!(
            (empirical - expect).abs() < 4.0 / (n as f64).sqrt() + 1e-3,
            "{empirical} vs {expect}"
        );
    }
}
