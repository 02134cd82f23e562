//! Noise laws with closed-form moments, and Gauss-Legendre quadrature.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsosError};
use crate::poly::{MultiIndex, Polynomial};

/// Product distribution over the noise block.
///
/// Gaussian noise has unbounded support; the hierarchy still applies
/// formally but the compact-domain convergence guarantees do not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum NoiseDistribution {
    /// Independent `Uniform(-1, 1)` coordinates.
    Uniform { dim: usize },
    /// Independent centered normals with per-coordinate standard deviation.
    /// A zero deviation is a point mass at the origin.
    Gaussian { sigmas: Vec<f64> },
}

impl NoiseDistribution {
    pub fn uniform(dim: usize) -> Self {
        NoiseDistribution::Uniform { dim }
    }

    pub fn gaussian(dim: usize, sigma: f64) -> Self {
        NoiseDistribution::Gaussian {
            sigmas: vec![sigma; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseDistribution::Uniform { dim } => *dim,
            NoiseDistribution::Gaussian { sigmas } => sigmas.len(),
        }
    }

    /// Same law, different dimension.
    pub fn with_dim(&self, dim: usize) -> Self {
        match self {
            NoiseDistribution::Uniform { .. } => NoiseDistribution::Uniform { dim },
            NoiseDistribution::Gaussian { sigmas } => {
                let s = sigmas.first().copied().unwrap_or(1.0);
                NoiseDistribution::Gaussian {
                    sigmas: vec![s; dim],
                }
            }
        }
    }

    fn univariate_moment(&self, coord: usize, k: u32) -> f64 {
        if k % 2 == 1 {
            return 0.0;
        }
        match self {
            NoiseDistribution::Uniform { .. } => 1.0 / (k as f64 + 1.0),
            NoiseDistribution::Gaussian { sigmas } => {
                sigmas[coord].powi(k as i32) * double_factorial(k.saturating_sub(1))
            }
        }
    }

    /// `E[w^alpha]` for an exponent vector over the noise block.
    pub fn moment(&self, alpha: &[u32]) -> Result<f64> {
        if alpha.len() != self.dim() {
            return Err(SsosError::Dimension(format!(
                "moment multi-index has length {}, distribution has dimension {}",
                alpha.len(),
                self.dim()
            )));
        }
        Ok(alpha
            .iter()
            .enumerate()
            .map(|(c, &k)| self.univariate_moment(c, k))
            .product())
    }

    /// Draws one noise vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            NoiseDistribution::Uniform { dim } => {
                let u = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
                (0..*dim).map(|_| u.sample(rng)).collect()
            }
            NoiseDistribution::Gaussian { sigmas } => sigmas
                .iter()
                .map(|&s| {
                    if s == 0.0 {
                        0.0
                    } else {
                        Normal::new(0.0, s).expect("finite sigma").sample(rng)
                    }
                })
                .collect(),
        }
    }
}

impl fmt::Display for NoiseDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseDistribution::Uniform { .. } => write!(f, "uniform"),
            NoiseDistribution::Gaussian { sigmas } => {
                write!(f, "gaussian:{}", sigmas.first().copied().unwrap_or(1.0))
            }
        }
    }
}

/// Parses `uniform` or `gaussian:SIGMA`; the dimension is fixed to 1 and
/// adjusted later with [`NoiseDistribution::with_dim`].
impl FromStr for NoiseDistribution {
    type Err = SsosError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(NoiseDistribution::uniform(1));
        }
        if let Some(rest) = s.strip_prefix("gaussian:") {
            let sigma: f64 = rest
                .parse()
                .map_err(|_| SsosError::Parameter(format!("bad gaussian sigma `{rest}`")))?;
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(SsosError::Parameter(format!(
                    "sigma must be >= 0, got {sigma}"
                )));
            }
            return Ok(NoiseDistribution::gaussian(1, sigma));
        }
        Err(SsosError::Parameter(format!(
            "unknown noise `{s}` (expected `uniform` or `gaussian:SIGMA`)"
        )))
    }
}

fn double_factorial(n: u32) -> f64 {
    let mut acc = 1.0;
    let mut k = n;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// `E[c(w)]` computed exactly from the moments of `dist`.
pub fn expected_value(c: &Polynomial, dist: &NoiseDistribution) -> Result<f64> {
    if c.n_w() != dist.dim() {
        return Err(SsosError::Dimension(format!(
            "polynomial has {} noise variables, distribution has {}",
            c.n_w(),
            dist.dim()
        )));
    }
    let mut total = 0.0;
    for (alpha, coeff) in c.terms() {
        if !alpha.is_pure_tail(c.n_x()) {
            return Err(SsosError::Dimension(format!(
                "term {alpha} depends on the decision variables"
            )));
        }
        total += coeff * dist.moment(alpha.tail(c.n_x()))?;
    }
    Ok(total)
}

/// Moment of the noise part of a joint multi-index.
pub fn joint_moment(alpha: &MultiIndex, n_x: usize, dist: &NoiseDistribution) -> Result<f64> {
    dist.moment(alpha.tail(n_x))
}

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Sum of `weights[i] * g(nodes[i])`, the integral over `[-1, 1]`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * g(x))
            .sum()
    }

    /// Expectation under `Uniform(-1, 1)`.
    pub fn uniform_mean(&self, g: impl Fn(f64) -> f64) -> f64 {
        0.5 * self.integrate(g)
    }
}

/// `(P_k(x), P_k'(x))` by the three-term recurrence.
fn legendre(k: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if k == 0 {
        return (1.0, 0.0);
    }
    for n in 2..=k {
        let n = n as f64;
        let p2 = ((2.0 * n - 1.0) * x * p1 - (n - 1.0) * p0) / n;
        p0 = p1;
        p1 = p2;
    }
    let dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// k-point Gauss-Legendre rule, exact for polynomials of degree `2k - 1`.
/// Nodes come from Newton iteration on `P_k` started at Chebyshev guesses.
pub fn gauss_legendre(k: usize) -> Result<Quadrature> {
    if k == 0 {
        return Err(SsosError::Parameter("quadrature needs k >= 1".into()));
    }
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let half = k.div_ceil(2);
    for i in 0..half {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(k, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(k, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    if k % 2 == 1 {
        nodes[k / 2] = 0.0;
    }
    Ok(Quadrature { nodes, weights })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_moments() {
        let u = NoiseDistribution::uniform(1);
        assert_eq!(u.moment(&[0]).unwrap(), 1.0);
        assert_eq!(u.moment(&[1]).unwrap(), 0.0);
        assert!((u.moment(&[2]).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!((u.moment(&[4]).unwrap() - 0.2).abs() < 1e-16);
        assert!(u.moment(&[2, 2]).is_err());
    }

    #[test]
    fn gaussian_fourth_moment_matches_quadrature() {
        // numerically integrate w^4 phi(w; 0.5) on [-8 sigma, 8 sigma]
        let sigma = 0.5;
        let q = gauss_legendre(80).unwrap();
        let half_width = 8.0 * sigma;
        let density = |w: f64| {
            (-(w * w) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let integral = half_width
            * q.integrate(|t| {
                let w = half_width * t;
                w.powi(4) * density(w)
            });
        let g = NoiseDistribution::gaussian(1, sigma);
        assert!((integral - 0.1875).abs() < 1e-10);
        assert!((g.moment(&[4]).unwrap() - integral).abs() < 1e-10);
    }

    #[test]
    fn point_mass_moments() {
        let g = NoiseDistribution::gaussian(2, 0.0);
        assert_eq!(g.moment(&[0, 0]).unwrap(), 1.0);
        assert_eq!(g.moment(&[2, 0]).unwrap(), 0.0);
    }

    #[test]
    fn moments_multiply_across_coordinates() {
        let d = NoiseDistribution::Gaussian {
            sigmas: vec![0.3, 2.0],
        };
        let joint = d.moment(&[2, 4]).unwrap();
        assert!((joint - 0.09 * 3.0 * 16.0).abs() < 1e-12);
        let u = NoiseDistribution::uniform(3);
        assert!((u.moment(&[2, 2, 4]).unwrap() - 1.0 / 45.0).abs() < 1e-16);
    }

    #[test]
    fn one_point_rule_is_midpoint() {
        let q = gauss_legendre(1).unwrap();
        assert_eq!(q.nodes, vec![0.0]);
        assert!((q.weights[0] - 2.0).abs() < 1e-15);
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn exactness_up_to_degree_2k_minus_1() {
        for k in 1..=10 {
            let q = gauss_legendre(k).unwrap();
            assert!((q.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for (a, b) in q.nodes.iter().zip(q.nodes.iter().rev()) {
                assert!((a + b).abs() < 1e-15);
            }
            for j in 0..(2 * k) as i32 {
                let exact = if j % 2 == 1 {
                    0.0
                } else {
                    2.0 / (j as f64 + 1.0)
                };
                let approx = q.integrate(|x| x.powi(j));
                assert!((approx - exact).abs() < 1e-12, "k={k} j={j}");
            }
        }
    }

    #[test]
    fn five_point_rule_on_tightest_bound() {
        let q = gauss_legendre(5).unwrap();
        assert!((q.integrate(|w| w.powi(8)) - 2.0 / 9.0).abs() < 1e-12);
        let approx = q.integrate(|w| w.powi(4) / (2.0 * (1.0 + w * w)));
        let exact = std::f64::consts::FRAC_PI_4 - 2.0 / 3.0;
        assert!((approx - exact).abs() < 1e-3);
    }

    #[test]
    fn expected_values() {
        let u = NoiseDistribution::uniform(1);
        let w2 = Polynomial::from_terms(0, 1, [(1.0, vec![2])]).unwrap();
        assert!((expected_value(&w2, &u).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        let five = Polynomial::constant(0, 1, 5.0);
        assert_eq!(expected_value(&five, &u).unwrap(), 5.0);
        let x = Polynomial::var(1, 1, 0);
        assert!(expected_value(&x, &u).is_err());
    }

    #[test]
    fn gaussian_expectation_against_monte_carlo() {
        use rand::SeedableRng;
        let g = NoiseDistribution::gaussian(1, 1.0);
        let c = Polynomial::from_terms(0, 1, [(1.0, vec![4]), (-1.0, vec![2])]).unwrap();
        let exact = expected_value(&c, &g).unwrap();
        assert!((exact - 2.0).abs() < 1e-14);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 10_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let w = g.sample(&mut rng)[0];
            acc += w.powi(4) - w * w;
        }
        assert!((acc / n as f64 - exact).abs() < 1e-2);
    }

    #[test]
    fn expectation_agrees_with_quadrature() {
        let u = NoiseDistribution::uniform(1);
        let c = Polynomial::from_terms(
            0,
            1,
            [
                (0.5, vec![6]),
                (-2.0, vec![3]),
                (1.5, vec![2]),
                (0.25, vec![0]),
            ],
        )
        .unwrap();
        let q = gauss_legendre(4).unwrap();
        let via_q = q.uniform_mean(|w| c.evaluate(&[w]).unwrap());
        assert!((via_q - expected_value(&c, &u).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn parse_noise() {
        assert_eq!(
            "uniform".parse::<NoiseDistribution>().unwrap(),
            NoiseDistribution::uniform(1)
        );
        assert_eq!(
            "gaussian:0.25".parse::<NoiseDistribution>().unwrap(),
            NoiseDistribution::gaussian(1, 0.25)
        );
        assert!("gaussian:-1".parse::<NoiseDistribution>().is_err());
        assert!("cauchy".parse::<NoiseDistribution>().is_err());
    }
}
