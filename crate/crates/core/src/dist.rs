//! Probability distributions over `Z_q`: the discrete Gaussian, the
//! distribution of `e(gamma)` induced by coefficient-wise errors, and seeded
//! inverse-CDF sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::RingParams;

/// Absolute tolerance on the total mass of a [`ProbDist`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Generator used by every simulation in the crate. ChaCha8 seeded from a
/// `u64` gives a reproducible stream per seed on every platform.
pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Child seed for sub-stream `(a, b)` of `seed`:
/// `splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b)`.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b)
}

/// A probability vector `p_0, ..., p_{q-1}` over `Z_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbDist {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for ProbDist {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        ProbDist::new(probs)
    }
}

impl From<ProbDist> for Vec<f64> {
    fn from(d: ProbDist) -> Self {
        d.probs
    }
}

impl ProbDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty support".to_string()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {bad} is not a non-negative finite number"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "total mass {total} differs from 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}"
            )));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(q: usize) -> Self {
        assert!(q > 0, "uniform distribution needs q >= 1");
        Self {
            probs: vec![1.0 / q as f64; q],
        }
    }

    pub fn point_mass(q: usize, at: usize) -> Self {
        assert!(at < q, "point mass index out of range");
        let mut probs = vec![0.0; q];
        probs[at] = 1.0;
        Self { probs }
    }

    /// Relative frequencies of `residues` over `Z_q`.
    pub fn empirical(residues: &[u64], q: usize) -> Result<Self> {
        let mut counts = vec![0.0; q];
        for &r in residues {
            let r = r as usize;
            if r >= q {
                return Err(Error::Domain(format!("residue {r} not below {q}")));
            }
            counts[r] += 1.0;
        }
        Self::from_weights(counts)
    }

    pub fn q(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_uniform(&self, tol: f64) -> bool {
        let u = 1.0 / self.q() as f64;
        self.probs.iter().all(|p| (p - u).abs() <= tol)
    }

    pub fn total_variation(&self, other: &ProbDist) -> Result<f64> {
        same_q(self, other)?;
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    pub fn sampler(&self) -> CdfSampler {
        CdfSampler::new(self)
    }

    fn renormalized(mut probs: Vec<f64>) -> Self {
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        Self { probs }
    }
}

fn same_q(a: &ProbDist, b: &ProbDist) -> Result<()> {
    if a.q() != b.q() {
        return Err(Error::Dimension {
            expected: a.q(),
            got: b.q(),
        });
    }
    Ok(())
}

/// Width of the discrete Gaussian. The kernel throughout the crate is
/// `rho(x) = exp(-pi x^2 / (2 sigma^2))`; a relative width `beta` resolves to
/// `sigma = beta * q / sqrt(2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian", into = "RawGaussian")]
pub enum GaussianParams {
    Sigma(f64),
    Beta(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawGaussian {
    Sigma(f64),
    Beta(f64),
}

impl TryFrom<RawGaussian> for GaussianParams {
    type Error = Error;

    fn try_from(raw: RawGaussian) -> Result<Self> {
        match raw {
            RawGaussian::Sigma(s) => GaussianParams::sigma(s),
            RawGaussian::Beta(b) => GaussianParams::beta(b),
        }
    }
}

impl From<GaussianParams> for RawGaussian {
    fn from(g: GaussianParams) -> Self {
        match g {
            GaussianParams::Sigma(s) => RawGaussian::Sigma(s),
            GaussianParams::Beta(b) => RawGaussian::Beta(b),
        }
    }
}

impl GaussianParams {
    pub fn sigma(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self::Sigma(sigma))
    }

    pub fn beta(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Self::Beta(beta))
    }

    /// The resolved `sigma` for modulus `q`.
    pub fn sigma_for(&self, q: usize) -> f64 {
        match *self {
            Self::Sigma(s) => s,
            Self::Beta(b) => b / (2.0 * std::f64::consts::PI).sqrt() * q as f64,
        }
    }
}

/// Discrete Gaussian on the centered representatives `(-q/2, q/2]`, no wrapping of
/// further integer lifts.
pub fn discrete_gaussian_zq(q: usize, params: &GaussianParams) -> Result<ProbDist> {
    if q < 1 {
        return Err(Error::Domain("q must be at least 1".to_string()));
    }
    let sigma = params.sigma_for(q);
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let scale = std::f64::consts::PI / (2.0 * sigma * sigma);
    let weights = (0..q)
        .map(|j| {
            let lift = crate::ring::centered_lift(j as u64, q as u64) as f64;
            (-scale * lift * lift).exp()
        })
        .collect();
    ProbDist::from_weights(weights)
}

/// Coefficients of `c(x^a) mod x^q - 1`: the distribution of `a * X` for `X ~ c`.
pub fn pow_substitute(c: &ProbDist, a: u64) -> ProbDist {
    let q = c.q();
    let a = (a % q as u64) as usize;
    let mut out = vec![0.0; q];
    for (i, &p) in c.probs.iter().enumerate() {
        out[(a * i) % q] += p;
    }
    ProbDist { probs: out }
}

/// Product of `c(x) d(x) mod x^q - 1`, renormalized.
pub fn cyclic_convolve(c: &ProbDist, d: &ProbDist) -> Result<ProbDist> {
    same_q(c, d)?;
    let q = c.q();
    let mut out = vec![0.0; q];
    for (i, &ci) in c.probs.iter().enumerate() {
        if ci == 0.0 {
            continue;
        }
        for (k, &dk) in d.probs.iter().enumerate() {
            let j = if i + k >= q { i + k - q } else { i + k };
            out[j] += ci * dk;
        }
    }
    Ok(ProbDist::renormalized(out))
}

/// Distribution of `e(gamma) = e_0 + e_1 gamma + ... + e_{n-1} gamma^{n-1}`
/// when each `e_i` is drawn independently from `c`.
pub fn mapped_error_dist(c: &ProbDist, params: &RingParams) -> Result<ProbDist> {
    if c.q() as u64 != params.q() {
        return Err(Error::Dimension {
            expected: params.q() as usize,
            got: c.q(),
        });
    }
    let powers = params.gamma_powers();
    let mut acc = c.clone();
    for &g in &powers[1..] {
        acc = cyclic_convolve(&acc, &pow_substitute(c, g))?;
    }
    Ok(acc)
}

/// Inverse-CDF sampler over a precomputed cumulative table.
#[derive(Debug, Clone)]
pub struct CdfSampler {
    cdf: Vec<f64>,
    last_positive: usize,
}

impl CdfSampler {
    pub fn new(dist: &ProbDist) -> Self {
        let mut acc = 0.0;
        let cdf = dist
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let last_positive = dist.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Self { cdf, last_positive }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.last_positive) as u64
    }
}

/// `count` independent draws from `dist`, reproducible per `seed`.
pub fn sample(dist: &ProbDist, count: usize, seed: u64) -> Vec<u64> {
    let sampler = dist.sampler();
    let mut rng = seeded_rng(seed);
    (0..count).map(|_| sampler.draw(&mut rng)).collect()
}
