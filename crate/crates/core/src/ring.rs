//! Arithmetic in `Z_q` and in the quotient ring `P_q = Z_q[x]/(f(x))`.
//!
//! Residues are always stored in canonical form `[0, q)`. Polynomials are
//! coefficient vectors in the power basis `1, x, ..., x^{n-1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Moduli are capped so that a product of two residues fits in a `u64`.
pub const MAX_MODULUS: u64 = 1 << 32;

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    (a * b) % q
}

pub fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Reduces a signed integer into `[0, q)`.
pub fn reduce_signed(v: i64, q: u64) -> u64 {
    v.rem_euclid(q as i64) as u64
}

/// Centered representative of `r` in `(-q/2, q/2]`.
pub fn centered_lift(r: u64, q: u64) -> i64 {
    let r = r % q;
    if 2 * r <= q {
        r as i64
    } else {
        r as i64 - q as i64
    }
}

pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Horner evaluation of an ascending coefficient slice at `x`, mod `q`.
pub fn eval_poly(coeffs: &[u64], x: u64, q: u64) -> u64 {
    let x = x % q;
    coeffs
        .iter()
        .rev()
        .fold(0, |acc, &c| (mul_mod(acc, x, q) + c % q) % q)
}

/// Coefficients of `x^n + 1` over `Z_q`.
pub fn x_n_plus_one(n: usize, q: u64) -> Vec<u64> {
    let mut f = vec![0; n + 1];
    f[0] = 1 % q;
    f[n] = 1;
    f
}

/// Coefficients of `x^n - gamma^n` over `Z_q`, a monic polynomial with root `gamma`.
pub fn binomial_with_root(n: usize, gamma: u64, q: u64) -> Vec<u64> {
    let mut f = vec![0; n + 1];
    f[0] = (q - pow_mod(gamma, n as u64, q)) % q;
    f[n] = 1;
    f
}

/// The frame of a PLWE instance: modulus, defining polynomial and a root of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRingParams")]
pub struct RingParams {
    q: u64,
    n: usize,
    f_coeffs: Vec<u64>,
    gamma: u64,
}

#[derive(Deserialize)]
struct RawRingParams {
    q: u64,
    f_coeffs: Vec<u64>,
    gamma: u64,
}

impl TryFrom<RawRingParams> for RingParams {
    type Error = Error;

    fn try_from(raw: RawRingParams) -> Result<Self> {
        RingParams::new(raw.q, raw.f_coeffs, raw.gamma)
    }
}

impl RingParams {
    /// Builds the frame from ascending coefficients of `f`. Coefficients are
    /// reduced mod `q`; `f` must be monic, `q` prime, and `f(gamma) = 0 mod q`.
    pub fn new(q: u64, f_coeffs: Vec<u64>, gamma: u64) -> Result<Self> {
        if !(2..MAX_MODULUS).contains(&q) {
            return Err(Error::InvalidRing(format!("modulus {q} outside [2, 2^32)")));
        }
        if !is_prime(q) {
            return Err(Error::InvalidRing(format!("modulus {q} is not prime")));
        }
        if f_coeffs.len() < 2 {
            return Err(Error::InvalidRing(
                "f must have degree at least 1".to_string(),
            ));
        }
        let f_coeffs: Vec<u64> = f_coeffs.into_iter().map(|c| c % q).collect();
        if *f_coeffs.last().unwrap() != 1 {
            return Err(Error::InvalidRing("f must be monic".to_string()));
        }
        if gamma >= q {
            return Err(Error::InvalidRing(format!(
                "gamma = {gamma} is not reduced mod {q}"
            )));
        }
        if eval_poly(&f_coeffs, gamma, q) != 0 {
            return Err(Error::InvalidRing(format!(
                "gamma = {gamma} is not a root of f mod {q}"
            )));
        }
        Ok(Self {
            q,
            n: f_coeffs.len() - 1,
            f_coeffs,
            gamma,
        })
    }

    /// Same as [`RingParams::new`] but takes signed coefficients.
    pub fn from_signed(q: u64, f_coeffs: &[i64], gamma: u64) -> Result<Self> {
        if !(2..MAX_MODULUS).contains(&q) {
            return Err(Error::InvalidRing(format!("modulus {q} outside [2, 2^32)")));
        }
        let f = f_coeffs.iter().map(|&c| reduce_signed(c, q)).collect();
        Self::new(q, f, gamma)
    }

    /// Uses the smallest root of `f` mod `q`.
    pub fn with_smallest_root(q: u64, f_coeffs: Vec<u64>) -> Result<Self> {
        let roots = find_roots(&f_coeffs, q);
        match roots.first() {
            Some(&gamma) => Self::new(q, f_coeffs, gamma),
            None => Err(Error::Precondition(format!("f has no roots mod {q}"))),
        }
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f_coeffs(&self) -> &[u64] {
        &self.f_coeffs
    }

    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    /// `gamma^i mod q` for `i = 0..n`.
    pub fn gamma_powers(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.n);
        let mut acc = 1 % self.q;
        for _ in 0..self.n {
            out.push(acc);
            acc = mul_mod(acc, self.gamma, self.q);
        }
        out
    }
}

/// An element of `P_q`, stored as `n` reduced power-basis coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolyModF {
    coeffs: Vec<u64>,
}

impl PolyModF {
    /// Reduces `coeffs` mod `q` and checks the length against `n`.
    pub fn new(coeffs: Vec<u64>, params: &RingParams) -> Result<Self> {
        check_len(coeffs.len(), params)?;
        let q = params.q();
        Ok(Self {
            coeffs: coeffs.into_iter().map(|c| c % q).collect(),
        })
    }

    pub fn from_signed(coeffs: &[i64], params: &RingParams) -> Result<Self> {
        check_len(coeffs.len(), params)?;
        let q = params.q();
        Ok(Self {
            coeffs: coeffs.iter().map(|&c| reduce_signed(c, q)).collect(),
        })
    }

    /// Wraps coefficients that the caller guarantees are already reduced.
    pub(crate) fn from_reduced(coeffs: Vec<u64>) -> Self {
        Self { coeffs }
    }

    pub fn zero(params: &RingParams) -> Self {
        Self {
            coeffs: vec![0; params.n()],
        }
    }

    pub fn one(params: &RingParams) -> Self {
        let mut coeffs = vec![0; params.n()];
        coeffs[0] = 1;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

fn check_len(len: usize, params: &RingParams) -> Result<()> {
    if len != params.n() {
        return Err(Error::Dimension {
            expected: params.n(),
            got: len,
        });
    }
    Ok(())
}

pub fn ring_add(a: &PolyModF, b: &PolyModF, params: &RingParams) -> Result<PolyModF> {
    check_len(a.len(), params)?;
    check_len(b.len(), params)?;
    let q = params.q();
    let coeffs = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(&x, &y)| (x + y) % q)
        .collect();
    Ok(PolyModF { coeffs })
}

pub fn ring_sub(a: &PolyModF, b: &PolyModF, params: &RingParams) -> Result<PolyModF> {
    check_len(a.len(), params)?;
    check_len(b.len(), params)?;
    let q = params.q();
    let coeffs = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(&x, &y)| (x + q - y) % q)
        .collect();
    Ok(PolyModF { coeffs })
}

/// Schoolbook product followed by reduction modulo the monic `f`.
pub fn ring_mul(a: &PolyModF, b: &PolyModF, params: &RingParams) -> Result<PolyModF> {
    check_len(a.len(), params)?;
    check_len(b.len(), params)?;
    let q = params.q();
    let n = params.n();
    let mut prod = vec![0u64; 2 * n - 1];
    for (i, &x) in a.coeffs.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.coeffs.iter().enumerate() {
            prod[i + j] = (prod[i + j] + mul_mod(x, y, q)) % q;
        }
    }
    // x^n = -(f_0 + ... + f_{n-1} x^{n-1}); fold the top coefficient down.
    let f = params.f_coeffs();
    for top in (n..prod.len()).rev() {
        let lead = prod[top];
        if lead == 0 {
            continue;
        }
        prod[top] = 0;
        let base = top - n;
        for (k, &fk) in f[..n].iter().enumerate() {
            let sub = mul_mod(lead, fk, q);
            prod[base + k] = (prod[base + k] + q - sub) % q;
        }
    }
    prod.truncate(n);
    Ok(PolyModF { coeffs: prod })
}

/// The evaluation map `g(x) -> g(gamma)` from `P_q` to `Z_q`.
pub fn smear_map(g: &PolyModF, params: &RingParams) -> Result<u64> {
    check_len(g.len(), params)?;
    Ok(eval_poly(&g.coeffs, params.gamma(), params.q()))
}

/// All roots of `f` in `Z_q`, ascending, by exhaustive scan.
pub fn find_roots(f_coeffs: &[u64], q: u64) -> Vec<u64> {
    (0..q).filter(|&x| eval_poly(f_coeffs, x, q) == 0).collect()
}

/// Multiplicative order of `gamma` mod prime `q`.
pub fn mult_order(gamma: u64, q: u64) -> Result<u64> {
    if q < 2 {
        return Err(Error::Domain(format!("modulus {q} must be at least 2")));
    }
    let g = gamma % q;
    if g == 0 {
        return Err(Error::Domain("0 has no multiplicative order".to_string()));
    }
    let mut acc = g;
    let mut r = 1;
    while acc != 1 {
        acc = mul_mod(acc, g, q);
        r += 1;
        if r > q {
            return Err(Error::Domain(format!("{gamma} is not a unit mod {q}")));
        }
    }
    Ok(r)
}
