//! Smearing probabilities: the chance that `m` independent draws from a
//! distribution on `Z_q` cover every residue (the coupon collector CDF).
//!
//! Three exact engines are provided:
//!
//! * [`p_uniform`]: recursion in `m` specialised to the uniform distribution,
//!   `P(m,q) = P(m-1,q) + P(m-1,q-1) ((q-1)/q)^(m-1)`, cost `O(q (m-q))`.
//! * [`p_nonuniform`]: recursion in `q`, conditioning on how often the last
//!   residue is hit, cost `O(q (m-q)^2)`.
//! * [`p_nonuniform_small`]: recursion in `m` over every subset of the
//!   support, cost `O(2^q (m-q))`. Kept as an independent cross-check.
//!
//! [`SmearTable`] keeps whole curves since each recursion produces every
//! `P(i, q)` for `i <= m` on the way.

use serde::{Deserialize, Serialize};

use crate::dist::{seeded_rng, ProbDist};
use crate::error::{Error, Result};

/// Largest support accepted by the subset engine.
pub const SUBSET_ENGINE_MAX_Q: usize = 20;

/// Smearing curves for a distribution and all of its leading restrictions.
///
/// `row(j)[i]` is the probability that `i` draws cover the first `j`
/// residues of the distribution restricted (and renormalized) to them. For the
/// uniform table this is plain `P(i, j)`. Row 0 is identically 1: the empty
/// support is covered vacuously, which makes `P(0,0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmearTable {
    q: usize,
    m_max: usize,
    rows: Vec<Vec<f64>>,
}

impl SmearTable {
    /// Uniform smearing curves `P(i, j)` for `j <= q`, `i <= m_max`.
    pub fn uniform(q: usize, m_max: usize) -> Self {
        let mut rows = Vec::with_capacity(q + 1);
        rows.push(vec![1.0; m_max + 1]);
        for j in 1..=q {
            let prev = &rows[j - 1];
            let mut row = vec![0.0; m_max + 1];
            if j == 1 {
                row.iter_mut().skip(1).for_each(|v| *v = 1.0);
            } else if j <= m_max {
                // P(j, j) = j! / j^j
                row[j] = (1..=j).map(|k| k as f64 / j as f64).product();
                let stay = (j - 1) as f64 / j as f64;
                for i in j + 1..=m_max {
                    row[i] = row[i - 1] + prev[i - 1] * stay.powi((i - 1) as i32);
                }
            }
            rows.push(row);
        }
        Self { q, m_max, rows }
    }

    /// Smearing curves for `chi` by recursion in `q`, eliminating residues
    /// from the highest index down. A zero-probability residue makes smearing
    /// impossible, so the top row is then identically 0.
    pub fn nonuniform(chi: &ProbDist, m_max: usize) -> Self {
        let p = chi.probs();
        let q = p.len();
        let mut rows = Vec::with_capacity(q + 1);
        rows.push(vec![1.0; m_max + 1]);
        if p.contains(&0.0) {
            rows.extend((1..=q).map(|_| vec![0.0; m_max + 1]));
            return Self { q, m_max, rows };
        }

        // ln(k) for the binomial ratio updates.
        let ln_int: Vec<f64> = (0..=m_max.max(1)).map(|k| (k as f64).ln()).collect();
        let mut prefix = 0.0;
        for j in 1..=q {
            prefix += p[j - 1];
            let prev = &rows[j - 1];
            let mut row = vec![0.0; m_max + 1];
            if j == 1 {
                row.iter_mut().skip(1).for_each(|v| *v = 1.0);
            } else if j <= m_max {
                // P(j, j) = j! prod p'_k with p' the restriction to the first j.
                row[j] = (1..=j).map(|k| k as f64 * p[k - 1] / prefix).product();
                let hit = p[j - 1] / prefix;
                let ln_hit = hit.ln();
                let ln_miss = (-hit).ln_1p();
                let ln_odds = ln_hit - ln_miss;
                for i in j + 1..=m_max {
                    // Binomial(i, hit) pmf by ratio updates in log space:
                    // pmf(k) = pmf(k-1) * (i-k+1)/k * hit/(1-hit).
                    let mut ln_pmf = i as f64 * ln_miss;
                    let mut total = 0.0;
                    for k in 1..=i + 1 - j {
                        ln_pmf += ln_int[i - k + 1] - ln_int[k] + ln_odds;
                        total += ln_pmf.exp() * prev[i - k];
                    }
                    row[i] = total.min(1.0);
                }
            }
            rows.push(row);
        }
        Self { q, m_max, rows }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// The full-support curve `P(i, q)` for `i = 0..=m_max`.
    pub fn values(&self) -> &[f64] {
        &self.rows[self.q]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j]
    }

    /// `P(m, q)`; panics if `m > m_max`.
    pub fn get(&self, m: usize) -> f64 {
        self.values()[m]
    }
}

/// Exact probability that `m` uniform draws cover all of `Z_q`.
pub fn p_uniform(m: usize, q: usize) -> f64 {
    if m < q {
        return 0.0;
    }
    SmearTable::uniform(q, m).get(m)
}

/// Exact probability that `m` draws from `chi` cover its whole support.
/// Returns exactly 0 when some residue has probability 0.
pub fn p_nonuniform(m: usize, chi: &ProbDist) -> f64 {
    if m < chi.q() {
        return 0.0;
    }
    SmearTable::nonuniform(chi, m).get(m)
}

/// Same value as [`p_nonuniform`] computed by the recursion in `m` over all
/// subsets of the support. Limited to `q <= 20`.
pub fn p_nonuniform_small(m: usize, chi: &ProbDist) -> Result<f64> {
    let q = chi.q();
    if q > SUBSET_ENGINE_MAX_Q {
        return Err(Error::Capacity {
            q,
            limit: SUBSET_ENGINE_MAX_Q,
        });
    }
    if m < q {
        return Ok(0.0);
    }
    let p = chi.probs();
    if p.contains(&0.0) {
        return Ok(0.0);
    }

    // For a subset S of size s only P_S(i) with s <= i <= s + slack is needed.
    let slack = m - q;
    let width = slack + 1;
    let subsets = 1usize << q;
    let mut mass = vec![0.0; subsets];
    for s in 1..subsets {
        let low = s.trailing_zeros() as usize;
        mass[s] = mass[s & (s - 1)] + p[low];
    }

    let mut table = vec![0.0; subsets * width];
    table[..width].iter_mut().for_each(|v| *v = 1.0);
    for s in 1..subsets {
        let size = s.count_ones() as usize;
        for off in 0..width {
            let i = size + off;
            let mut value = if off == 0 {
                0.0
            } else {
                table[s * width + off - 1]
            };
            let mut rest = s;
            while rest != 0 {
                let k = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let pk = p[k] / mass[s];
                let without = s & !(1 << k);
                // P_{S\k}(i-1): subset of size `size-1`, same offset.
                value += pk * (1.0 - pk).powi((i - 1) as i32) * table[without * width + off];
            }
            table[s * width + off] = value;
        }
    }
    Ok(table[(subsets - 1) * width + slack].min(1.0))
}

/// Asymptotic approximation `exp(-q exp(-m/q))`, natural logarithms.
pub fn er_approx(m: usize, q: usize) -> f64 {
    let q = q as f64;
    (-q * (-(m as f64) / q).exp()).exp()
}

/// Expected number of uniform draws to cover `Z_q`: `q H_q`.
pub fn expected_coupons(q: usize) -> f64 {
    let harmonic: f64 = (1..=q).map(|i| 1.0 / i as f64).sum();
    q as f64 * harmonic
}

/// Reusable "did this batch hit every residue" check. Uses generation stamps
/// so a new batch costs nothing to reset.
#[derive(Debug, Clone)]
pub struct CoverageTracker {
    stamps: Vec<u32>,
    generation: u32,
}

impl CoverageTracker {
    pub fn new(q: usize) -> Self {
        Self {
            stamps: vec![0; q],
            generation: 0,
        }
    }

    /// True iff `residues` contains every element of `Z_q`. Residues must be
    /// below `q`.
    pub fn covers<I: IntoIterator<Item = u64>>(&mut self, residues: I) -> bool {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamps.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
        let q = self.stamps.len();
        let mut seen = 0;
        for r in residues {
            let slot = &mut self.stamps[r as usize];
            if *slot != self.generation {
                *slot = self.generation;
                seen += 1;
                if seen == q {
                    return true;
                }
            }
        }
        seen == q
    }
}

/// Fraction of `trials` batches of `m` draws from `chi` that smear.
pub fn mc_smear_estimate(chi: &ProbDist, m: usize, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::Domain("trials must be at least 1".to_string()));
    }
    if m < chi.q() {
        return Ok(0.0);
    }
    let sampler = chi.sampler();
    let mut rng = seeded_rng(seed);
    let mut tracker = CoverageTracker::new(chi.q());
    let mut batch = vec![0u64; m];
    let mut hits = 0usize;
    for _ in 0..trials {
        batch.iter_mut().for_each(|r| *r = sampler.draw(&mut rng));
        if tracker.covers(batch.iter().copied()) {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials as f64)
}

/// A batch size `m` together with the smearing probabilities at that size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MChoice {
    pub m: usize,
    pub p_uniform: f64,
    pub p_chi: f64,
}

fn check_support(q: usize, chi: &ProbDist) -> Result<()> {
    if chi.q() != q {
        return Err(Error::Dimension {
            expected: q,
            got: chi.q(),
        });
    }
    Ok(())
}

fn separating(p_u: f64, p_chi: f64) -> bool {
    p_u > 0.5 && p_chi < 0.5
}

/// Smallest `m <= m_cap` with `P_U(m,q) > 1/2` and `P_chi(m,q) < 1/2`.
pub fn choose_m(q: usize, chi: &ProbDist, m_cap: usize) -> Result<MChoice> {
    check_support(q, chi)?;
    let uni = SmearTable::uniform(q, m_cap);
    let non = SmearTable::nonuniform(chi, m_cap);
    (q..=m_cap)
        .map(|m| MChoice {
            m,
            p_uniform: uni.get(m),
            p_chi: non.get(m),
        })
        .find(|c| separating(c.p_uniform, c.p_chi))
        .ok_or(Error::NotFound { m_cap })
}

/// Chebyshev bound on the error of an `n`-trial majority vote whose trials
/// succeed with probability `p`, `p (1-p) / (n (p - 1/2)^2)`.
pub fn chebyshev_bound(p: f64, n: usize) -> f64 {
    let gap = p - 0.5;
    p * (1.0 - p) / (n as f64 * gap * gap)
}

fn trials_for(p: f64, err: f64) -> usize {
    if p * (1.0 - p) == 0.0 {
        return 1;
    }
    let estimate = (p * (1.0 - p) / (err * (p - 0.5).powi(2))).ceil();
    let mut n = if estimate.is_finite() && estimate >= 1.0 {
        estimate as usize
    } else {
        1
    };
    while n > 1 && chebyshev_bound(p, n - 1) <= err {
        n -= 1;
    }
    while chebyshev_bound(p, n) > err {
        n += 1;
    }
    n
}

/// Smallest odd `N` whose Chebyshev bounds fall below `alpha_err` (uniform
/// side) and `beta_err` (non-uniform side).
pub fn choose_trials(p_u: f64, p_chi: f64, alpha_err: f64, beta_err: f64) -> Result<usize> {
    if !separating(p_u, p_chi) || p_u > 1.0 || p_chi < 0.0 {
        return Err(Error::Domain(format!(
            "need P_chi < 1/2 < P_U, got P_U = {p_u}, P_chi = {p_chi}"
        )));
    }
    for (name, e) in [("alpha", alpha_err), ("beta", beta_err)] {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::Domain(format!("{name} must lie in (0, 1), got {e}")));
        }
    }
    let n = trials_for(p_u, alpha_err).max(trials_for(p_chi, beta_err));
    Ok(if n.is_multiple_of(2) { n + 1 } else { n })
}

/// Result of [`choose_decision_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamChoice {
    /// Batch size minimising `m * N` over the separating window.
    pub m: usize,
    pub n_trials: usize,
    pub p_uniform: f64,
    pub p_chi: f64,
    /// The smallest separating `m`, as returned by [`choose_m`].
    pub first_m: usize,
}

/// Picks `(m, N)` with the fewest samples per decision, `m * N`, among all
/// separating `m <= m_cap`, each with its smallest admissible odd `N`.
pub fn choose_decision_params(
    chi: &ProbDist,
    m_cap: usize,
    alpha_err: f64,
    beta_err: f64,
) -> Result<ParamChoice> {
    let q = chi.q();
    let uni = SmearTable::uniform(q, m_cap);
    let non = SmearTable::nonuniform(chi, m_cap);
    let mut first_m = None;
    let mut best: Option<ParamChoice> = None;
    for m in q..=m_cap {
        let (p_u, p_chi) = (uni.get(m), non.get(m));
        if !separating(p_u, p_chi) {
            continue;
        }
        first_m.get_or_insert(m);
        let n = choose_trials(p_u, p_chi, alpha_err, beta_err)?;
        if best.is_none_or(|b| m * n < b.m * b.n_trials) {
            best = Some(ParamChoice {
                m,
                n_trials: n,
                p_uniform: p_u,
                p_chi,
                first_m: first_m.unwrap(),
            });
        }
        // With N = 1 the cost only grows with m from here on.
        if n == 1 {
            break;
        }
    }
    best.ok_or(Error::NotFound { m_cap })
}
