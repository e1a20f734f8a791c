//! PLWE and uniform sample generation, the smearing decision, the smearing
//! attack on Decision-PLWE and the `gamma = 1` baseline distinguisher.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{
    derive_seed, discrete_gaussian_zq, seeded_rng, CdfSampler, GaussianParams, ProbDist,
};
use crate::error::{Error, Result};
use crate::ring::{
    centered_lift, eval_poly, mul_mod, ring_add, ring_mul, smear_map, PolyModF, RingParams,
};
use crate::smear::CoverageTracker;

/// A PLWE instance: ring frame, fixed secret and error width.
#[derive(Debug, Clone)]
pub struct PlweInstance {
    params: RingParams,
    secret: PolyModF,
    gaussian: GaussianParams,
    error_dist: ProbDist,
    error_sampler: CdfSampler,
}

impl PlweInstance {
    pub fn new(params: RingParams, secret: PolyModF, gaussian: GaussianParams) -> Result<Self> {
        if secret.len() != params.n() {
            return Err(Error::Dimension {
                expected: params.n(),
                got: secret.len(),
            });
        }
        let error_dist = discrete_gaussian_zq(params.q() as usize, &gaussian)?;
        let error_sampler = error_dist.sampler();
        Ok(Self {
            params,
            secret,
            gaussian,
            error_dist,
            error_sampler,
        })
    }

    /// Draws the secret uniformly from `P_q` using `seed`.
    pub fn with_random_secret(
        params: RingParams,
        gaussian: GaussianParams,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = seeded_rng(seed);
        let secret = uniform_poly(&params, &mut rng);
        Self::new(params, secret, gaussian)
    }

    pub fn params(&self) -> &RingParams {
        &self.params
    }

    pub fn secret(&self) -> &PolyModF {
        &self.secret
    }

    pub fn gaussian(&self) -> GaussianParams {
        self.gaussian
    }

    /// Per-coefficient error distribution over `Z_q`.
    pub fn error_dist(&self) -> &ProbDist {
        &self.error_dist
    }

    /// `s(gamma)`, the value the smearing attack recovers.
    pub fn secret_at_root(&self) -> u64 {
        smear_map(&self.secret, &self.params).expect("secret length checked at construction")
    }
}

/// One pair `(a, b)` from `P_q x P_q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub a: PolyModF,
    pub b: PolyModF,
}

fn uniform_poly<R: Rng + ?Sized>(params: &RingParams, rng: &mut R) -> PolyModF {
    let q = params.q();
    PolyModF::from_reduced((0..params.n()).map(|_| rng.gen_range(0..q)).collect())
}

/// `count` pairs `(a, a s + e)` with uniform `a` and Gaussian coefficients in `e`.
pub fn gen_plwe_samples(instance: &PlweInstance, count: usize, seed: u64) -> Vec<Sample> {
    let params = &instance.params;
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let a = uniform_poly(params, &mut rng);
            let e = PolyModF::from_reduced(
                (0..params.n())
                    .map(|_| instance.error_sampler.draw(&mut rng))
                    .collect(),
            );
            let b = ring_add(&ring_mul(&a, &instance.secret, params).unwrap(), &e, params).unwrap();
            Sample { a, b }
        })
        .collect()
}

/// `count` pairs drawn uniformly from `P_q x P_q`.
pub fn gen_uniform_samples(params: &RingParams, count: usize, seed: u64) -> Vec<Sample> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let a = uniform_poly(params, &mut rng);
            let b = uniform_poly(params, &mut rng);
            Sample { a, b }
        })
        .collect()
}

/// `b(gamma) - g a(gamma) mod q` for each sample, in order.
pub fn residuals(samples: &[Sample], params: &RingParams, g: u64) -> Result<Vec<u64>> {
    let q = params.q();
    let g = g % q;
    samples
        .iter()
        .map(|s| {
            let a = smear_map(&s.a, params)?;
            let b = smear_map(&s.b, params)?;
            Ok((b + q - mul_mod(a, g, q)) % q)
        })
        .collect()
}

/// Parameters of one smearing decision: `n_trials` batches of `m` residues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionParams {
    pub m: usize,
    pub n_trials: usize,
    pub alpha_err: f64,
    pub beta_err: f64,
}

impl DecisionParams {
    pub fn new(m: usize, n_trials: usize, alpha_err: f64, beta_err: f64) -> Result<Self> {
        if n_trials.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "number of trials must be odd, got {n_trials}"
            )));
        }
        for (name, e) in [("alpha", alpha_err), ("beta", beta_err)] {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::Domain(format!("{name} must lie in [0, 1), got {e}")));
            }
        }
        Ok(Self {
            m,
            n_trials,
            alpha_err,
            beta_err,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Uniform,
    NonUniform,
}

/// Number of the `n_trials` consecutive batches of `m` residues that cover `Z_q`.
pub fn count_smearing_trials(residues: &[u64], q: usize, dp: &DecisionParams) -> Result<usize> {
    let needed = dp.m * dp.n_trials;
    if residues.len() < needed {
        return Err(Error::InputExhausted {
            needed,
            available: residues.len(),
        });
    }
    if let Some(&r) = residues[..needed].iter().find(|&&r| r as usize >= q) {
        return Err(Error::Domain(format!("residue {r} not below {q}")));
    }
    let mut tracker = CoverageTracker::new(q);
    Ok((0..dp.n_trials)
        .filter(|t| tracker.covers(residues[t * dp.m..(t + 1) * dp.m].iter().copied()))
        .count())
}

/// Majority vote: `Uniform` iff strictly more than half the trials smear.
pub fn smearing_decision(residues: &[u64], q: usize, dp: &DecisionParams) -> Result<Decision> {
    let smeared = count_smearing_trials(residues, q, dp)?;
    Ok(majority(smeared, dp.n_trials))
}

fn majority(smeared: usize, n_trials: usize) -> Decision {
    if 2 * smeared > n_trials {
        Decision::Uniform
    } else {
        Decision::NonUniform
    }
}

/// Identifies the batch of samples used for one trial of one guess.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamId {
    pub seed: u64,
    pub guess: u64,
    pub trial: usize,
    pub n_trials: usize,
}

impl StreamId {
    /// Seed of this batch's generator, `derive_seed(seed, guess, trial)`.
    /// Batches never share a generator, so serial and parallel runs agree.
    pub fn derived_seed(&self) -> u64 {
        derive_seed(self.seed, self.guess, self.trial as u64)
    }

    /// Position of this batch when batches are laid out guess-major.
    pub fn ordinal(&self) -> usize {
        self.guess as usize * self.n_trials + self.trial
    }
}

/// Supplies fresh samples for every `(guess, trial)` pair of the attack.
pub trait SampleSource: Sync {
    fn batch(&self, stream: StreamId, m: usize) -> Result<Vec<Sample>>;
}

/// PLWE samples, one independently seeded generator per batch.
#[derive(Debug, Clone)]
pub struct PlweSource<'a> {
    pub instance: &'a PlweInstance,
}

impl SampleSource for PlweSource<'_> {
    fn batch(&self, stream: StreamId, m: usize) -> Result<Vec<Sample>> {
        Ok(gen_plwe_samples(self.instance, m, stream.derived_seed()))
    }
}

/// Uniform samples, one independently seeded generator per batch.
#[derive(Debug, Clone)]
pub struct UniformSource<'a> {
    pub params: &'a RingParams,
}

impl SampleSource for UniformSource<'_> {
    fn batch(&self, stream: StreamId, m: usize) -> Result<Vec<Sample>> {
        Ok(gen_uniform_samples(self.params, m, stream.derived_seed()))
    }
}

/// A fixed list, consumed in guess-major order: batch `(g, t)` takes samples
/// `[(g N + t) m, (g N + t + 1) m)`.
#[derive(Debug, Clone)]
pub struct SampleList {
    pub samples: Vec<Sample>,
}

impl SampleSource for SampleList {
    fn batch(&self, stream: StreamId, m: usize) -> Result<Vec<Sample>> {
        let start = stream.ordinal() * m;
        let end = start + m;
        self.samples
            .get(start..end)
            .map(<[Sample]>::to_vec)
            .ok_or(Error::InputExhausted {
                needed: end,
                available: self.samples.len(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Uniform,
    Plwe,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub verdict: Verdict,
    /// For each guess `g`, how many of the `N` trials smeared.
    pub per_guess_smear_counts: Vec<usize>,
    pub recovered_s_gamma: Option<u64>,
    pub params_used: DecisionParams,
    pub seed: u64,
}

impl AttackReport {
    /// Guesses whose smearing decision came out non-uniform.
    pub fn non_uniform_guesses(&self) -> Vec<u64> {
        let n = self.params_used.n_trials;
        self.per_guess_smear_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| majority(c, n) == Decision::NonUniform)
            .map(|(g, _)| g as u64)
            .collect()
    }

    /// Checks the exactly-one / none / several trichotomy against the counts.
    pub fn is_consistent(&self) -> bool {
        let flagged = self.non_uniform_guesses();
        match self.verdict {
            Verdict::Uniform => flagged.is_empty() && self.recovered_s_gamma.is_none(),
            Verdict::Plwe => flagged.len() == 1 && self.recovered_s_gamma == Some(flagged[0]),
            Verdict::Inconclusive => flagged.len() >= 2 && self.recovered_s_gamma.is_none(),
        }
    }
}

/// Runs one smearing decision per guess `g` of `s(gamma)` on the residuals
/// `b(gamma) - g a(gamma)`, each trial on a fresh batch, then applies the
/// verdict rule: no non-uniform guess means uniform samples, exactly one means
/// PLWE with that guess as `s(gamma)`, more than one is inconclusive.
pub fn smearing_attack(
    source: &dyn SampleSource,
    params: &RingParams,
    dp: &DecisionParams,
    seed: u64,
) -> Result<AttackReport> {
    let q = params.q();
    let counts = (0..q)
        .into_par_iter()
        .map(|guess| {
            let mut tracker = CoverageTracker::new(q as usize);
            let mut smeared = 0;
            for trial in 0..dp.n_trials {
                let stream = StreamId {
                    seed,
                    guess,
                    trial,
                    n_trials: dp.n_trials,
                };
                let batch = source.batch(stream, dp.m)?;
                if tracker.covers(residuals(&batch, params, guess)?) {
                    smeared += 1;
                }
            }
            Ok(smeared)
        })
        .collect::<Result<Vec<usize>>>()?;

    let flagged: Vec<u64> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| majority(c, dp.n_trials) == Decision::NonUniform)
        .map(|(g, _)| g as u64)
        .collect();
    let (verdict, recovered_s_gamma) = match flagged.as_slice() {
        [] => (Verdict::Uniform, None),
        [g] => (Verdict::Plwe, Some(*g)),
        _ => (Verdict::Inconclusive, None),
    };
    Ok(AttackReport {
        verdict,
        per_guess_smear_counts: counts,
        recovered_s_gamma,
        params_used: *dp,
        seed,
    })
}

/// Default half-width of the acceptance window, in units of `sqrt(n) sigma`.
pub const GAMMA1_DEFAULT_MULTIPLIER: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gamma1Outcome {
    pub verdict: Verdict,
    /// Guesses for `s(1)` whose residuals all fell inside the window.
    pub passing_guesses: Vec<u64>,
}

/// Baseline distinguisher for `f(1) = 0 mod q`: a guess `g` passes when every
/// centered `b(1) - g a(1)` lies within `threshold_multiplier sqrt(n) sigma`.
pub fn gamma1_attack(
    samples: &[Sample],
    params: &RingParams,
    sigma: f64,
    threshold_multiplier: f64,
) -> Result<Gamma1Outcome> {
    let q = params.q();
    if eval_poly(params.f_coeffs(), 1, q) != 0 {
        return Err(Error::Precondition(format!("1 is not a root of f mod {q}")));
    }
    let window = threshold_multiplier * (params.n() as f64).sqrt() * sigma;
    let at_one: Vec<(u64, u64)> = samples
        .iter()
        .map(|s| {
            if s.a.len() != params.n() || s.b.len() != params.n() {
                return Err(Error::Dimension {
                    expected: params.n(),
                    got: s.a.len().max(s.b.len()),
                });
            }
            Ok((eval_poly(s.a.coeffs(), 1, q), eval_poly(s.b.coeffs(), 1, q)))
        })
        .collect::<Result<_>>()?;
    let passing_guesses: Vec<u64> = (0..q)
        .filter(|&g| {
            at_one.iter().all(|&(a, b)| {
                let r = (b + q - mul_mod(a, g, q)) % q;
                (centered_lift(r, q) as f64).abs() <= window
            })
        })
        .collect();
    let verdict = match passing_guesses.len() {
        0 => Verdict::Uniform,
        1 => Verdict::Plwe,
        _ => Verdict::Inconclusive,
    };
    Ok(Gamma1Outcome {
        verdict,
        passing_guesses,
    })
}

/// Predicted probabilities that the attack answers correctly on uniform
/// samples and on PLWE samples, given per-decision error rates `alpha` and
/// `beta` and independent decisions across the `q` guesses.
pub fn success_probs(alpha_err: f64, beta_err: f64, q: u64) -> (f64, f64) {
    let (a, b, q) = (alpha_err, beta_err, q as f64);
    let uniform = (1.0 - a) / (1.0 + (q - 1.0) * a);
    let plwe = (1.0 - a - b + q * a * b) / (1.0 - a + (q - 1.0) * a * b);
    (uniform, plwe)
}
