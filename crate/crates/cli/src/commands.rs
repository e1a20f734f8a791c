//! Command implementations. Each `*_artifact` function resolves its arguments
//! in place and returns a serializable artifact; [`run_config`] renders it as
//! CSV or JSON and writes it out.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use smearing_core::attack::{
    gen_plwe_samples, smearing_attack, success_probs, AttackReport, DecisionParams, PlweInstance,
    PlweSource, Sample, SampleList, SampleSource, UniformSource, Verdict,
};
use smearing_core::dist::{
    derive_seed, discrete_gaussian_zq, mapped_error_dist, seeded_rng, ProbDist,
};
use smearing_core::ring::{eval_poly, PolyModF, RingParams};
use smearing_core::smear::{
    chebyshev_bound, choose_decision_params, choose_trials, er_approx, mc_smear_estimate,
    ParamChoice, SmearTable,
};
use smearing_core::Error;

use crate::config::{
    parse_int_list, AttackArgs, AttackMode, MapdistArgs, OutputArgs, ParamsArgs, ProbArgs,
    RunConfig, CONFIG_PREFIX,
};
use crate::error::CliError;
use crate::Outcome;

/// Largest modulus for which full distributions over `Z_q` are materialized.
pub const MAX_TABLE_Q: u64 = 1 << 22;

/// Largest `q * (m_max + 1)` table `prob` will build.
pub const MAX_PROB_CELLS: u128 = 1 << 28;

/// Overall Type-1 error the attack aims for by default, split over the `q`
/// per-guess decisions.
pub const DEFAULT_ATTACK_ALPHA: f64 = 0.05;

/// Stream index reserved for drawing the secret, outside the range of guesses.
const SECRET_STREAM: u64 = u64::MAX;

pub fn run_config(config: RunConfig) -> Result<Outcome, CliError> {
    match config {
        RunConfig::Prob(mut a) => {
            let art = prob_artifact(&mut a)?;
            let text = if a.output.json {
                to_json(&art)?
            } else {
                art.to_csv()
            };
            emit(&a.output, &text)?;
            Ok(Outcome::Done)
        }
        RunConfig::Mapdist(mut a) => {
            let art = mapdist_artifact(&mut a)?;
            if a.output.json {
                emit(&a.output, &to_json(&art.mapped)?)?;
                emit_sidecar(&a.output, &art.config)?;
            } else {
                emit(&a.output, &art.to_csv())?;
            }
            Ok(Outcome::Done)
        }
        RunConfig::Attack(mut a) => {
            let art = attack_artifact(&mut a)?;
            let text = if a.output.json {
                to_json(&art)?
            } else {
                art.to_csv()
            };
            emit(&a.output, &text)?;
            Ok(match art.report.verdict {
                Verdict::Inconclusive => Outcome::Inconclusive,
                _ => Outcome::Done,
            })
        }
        RunConfig::Params(mut a) => {
            let art = params_artifact(&mut a)?;
            let text = if a.output.json {
                to_json(&art)?
            } else {
                art.to_csv()
            };
            emit(&a.output, &text)?;
            Ok(Outcome::Done)
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(output: &OutputArgs, text: &str) -> Result<(), CliError> {
    match &output.out {
        Some(path) => write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// The bare JSON array written by `mapdist --json` has no room for the
/// config, so it goes next to the output file, or to stderr.
fn emit_sidecar(output: &OutputArgs, config: &RunConfig) -> Result<(), CliError> {
    match &output.out {
        Some(path) => write_text(&sidecar_path(path), &to_json(config)?),
        None => {
            eprintln!("{CONFIG_PREFIX}{}", serde_json::to_string(config)?);
            Ok(())
        }
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".config.json");
    PathBuf::from(name)
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn config_line(config: &RunConfig) -> String {
    let json = serde_json::to_string(config).expect("configs always serialize");
    format!("{CONFIG_PREFIX}{json}\n")
}

fn read_dist(path: &Path) -> Result<ProbDist, CliError> {
    let probs: Vec<f64> = serde_json::from_str(&read_text(path)?)?;
    Ok(ProbDist::new(probs)?)
}

fn table_q(q: u64) -> Result<usize, CliError> {
    if q > MAX_TABLE_Q {
        return Err(CliError::usage(format!(
            "q = {q} is too large for a full distribution table (limit {MAX_TABLE_Q})"
        )));
    }
    Ok(q as usize)
}

fn default_m_cap(q: usize) -> usize {
    let q = q as f64;
    (q * (q.ln() + 15.0)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbRow {
    pub m: usize,
    pub q: usize,
    pub p_exact: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_approx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_mc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbArtifact {
    pub config: RunConfig,
    pub rows: Vec<ProbRow>,
}

impl ProbArtifact {
    pub fn to_csv(&self) -> String {
        let mut out = config_line(&self.config);
        let RunConfig::Prob(a) = &self.config else {
            unreachable!("prob artifact holds a prob config")
        };
        out.push_str("m,q,p_exact");
        if a.approx {
            out.push_str(",p_approx");
        }
        if a.mc_trials.is_some() {
            out.push_str(",p_mc");
        }
        out.push('\n');
        for r in &self.rows {
            write!(out, "{},{},{}", r.m, r.q, r.p_exact).unwrap();
            if let Some(p) = r.p_approx {
                write!(out, ",{p}").unwrap();
            }
            if let Some(p) = r.p_mc {
                write!(out, ",{p}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// `P(m, q)` for `m_min <= m <= m_max` and `q_min <= q' <= q`, uniform or for
/// the distribution in `--chi`.
pub fn prob_artifact(a: &mut ProbArgs) -> Result<ProbArtifact, CliError> {
    let q_min = a.q_min.unwrap_or(a.q);
    if a.q == 0 || q_min == 0 {
        return Err(CliError::usage("q must be at least 1"));
    }
    if q_min > a.q {
        return Err(CliError::usage(format!(
            "--q-min {q_min} exceeds --q {}",
            a.q
        )));
    }
    if a.m_min > a.m_max {
        return Err(CliError::usage(format!(
            "--m-min {} exceeds --m-max {}",
            a.m_min, a.m_max
        )));
    }
    table_q(a.q as u64)?;
    if (a.q as u128) * (a.m_max as u128 + 1) > MAX_PROB_CELLS {
        return Err(CliError::usage(format!(
            "a {} x {} table exceeds {MAX_PROB_CELLS} cells",
            a.q, a.m_max
        )));
    }
    let chi = match &a.chi {
        Some(path) => {
            let chi = read_dist(path)?;
            if chi.q() != a.q || q_min != a.q {
                return Err(CliError::usage(format!(
                    "--chi has {} entries; it needs exactly --q entries and no --q-min range",
                    chi.q()
                )));
            }
            Some(chi)
        }
        None => None,
    };
    a.q_min = Some(q_min);

    let mut rows = Vec::new();
    match &chi {
        Some(chi) => {
            let table = SmearTable::nonuniform(chi, a.m_max);
            for m in a.m_min..=a.m_max {
                let p_mc = a
                    .mc_trials
                    .map(|t| {
                        mc_smear_estimate(chi, m, t, derive_seed(a.seed, a.q as u64, m as u64))
                    })
                    .transpose()?;
                rows.push(ProbRow {
                    m,
                    q: a.q,
                    p_exact: table.get(m),
                    p_approx: a.approx.then(|| er_approx(m, a.q)),
                    p_mc,
                });
            }
        }
        None => {
            // One table holds every column q' <= q.
            let table = SmearTable::uniform(a.q, a.m_max);
            for q in q_min..=a.q {
                let uniform = ProbDist::uniform(q);
                for m in a.m_min..=a.m_max {
                    let p_mc = a
                        .mc_trials
                        .map(|t| {
                            mc_smear_estimate(
                                &uniform,
                                m,
                                t,
                                derive_seed(a.seed, q as u64, m as u64),
                            )
                        })
                        .transpose()?;
                    rows.push(ProbRow {
                        m,
                        q,
                        p_exact: table.row(q)[m],
                        p_approx: a.approx.then(|| er_approx(m, q)),
                        p_mc,
                    });
                }
            }
        }
    }
    Ok(ProbArtifact {
        config: RunConfig::Prob(a.clone()),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapdistArtifact {
    pub config: RunConfig,
    pub base: Vec<f64>,
    pub mapped: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<Vec<f64>>,
}

impl MapdistArtifact {
    pub fn to_csv(&self) -> String {
        let mut out = config_line(&self.config);
        out.push_str("residue,base,mapped");
        if self.mc.is_some() {
            out.push_str(",mc");
        }
        out.push('\n');
        for (r, (b, m)) in self.base.iter().zip(&self.mapped).enumerate() {
            write!(out, "{r},{b},{m}").unwrap();
            if let Some(mc) = &self.mc {
                write!(out, ",{}", mc[r]).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// The coefficient distribution and its image under `e -> e(gamma)`.
pub fn mapdist_artifact(a: &mut MapdistArgs) -> Result<MapdistArtifact, CliError> {
    let params = a.ring.resolve()?;
    let q = table_q(params.q())?;
    let base = if a.uniform_base {
        ProbDist::uniform(q)
    } else {
        discrete_gaussian_zq(q, &a.gaussian.require()?)?
    };
    let mapped = mapped_error_dist(&base, &params)?;
    let mc = a
        .mc_samples
        .map(|count| simulate_mapped(&base, &params, count, a.seed))
        .transpose()?;
    Ok(MapdistArtifact {
        config: RunConfig::Mapdist(a.clone()),
        base: base.probs().to_vec(),
        mapped: mapped.probs().to_vec(),
        mc: mc.map(|d| d.probs().to_vec()),
    })
}

/// Histogram of `e(gamma)` over `count` errors with coefficients drawn from
/// `base`.
pub fn simulate_mapped(
    base: &ProbDist,
    params: &RingParams,
    count: usize,
    seed: u64,
) -> Result<ProbDist, CliError> {
    if count == 0 {
        return Err(CliError::usage("--mc-samples must be positive"));
    }
    let sampler = base.sampler();
    let mut rng = seeded_rng(seed);
    let mut coeffs = vec![0u64; params.n()];
    let values: Vec<u64> = (0..count)
        .map(|_| {
            for c in coeffs.iter_mut() {
                *c = sampler.draw(&mut rng);
            }
            eval_poly(&coeffs, params.gamma(), params.q())
        })
        .collect();
    Ok(ProbDist::empirical(&values, params.q() as usize)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackArtifact {
    pub config: RunConfig,
    #[serde(flatten)]
    pub report: AttackReport,
    /// `s(gamma)` of the generated instance, in plwe mode.
    pub true_s_gamma: Option<u64>,
    /// The chooser's output, with `--auto-params`.
    pub auto_params: Option<ParamChoice>,
}

impl AttackArtifact {
    pub fn to_csv(&self) -> String {
        let r = &self.report;
        let mut out = config_line(&self.config);
        let verdict = serde_json::to_value(r.verdict).expect("verdicts serialize");
        writeln!(out, "# verdict: {}", verdict.as_str().unwrap_or_default()).unwrap();
        writeln!(out, "# recovered_s_gamma: {}", opt(r.recovered_s_gamma)).unwrap();
        writeln!(out, "# true_s_gamma: {}", opt(self.true_s_gamma)).unwrap();
        writeln!(
            out,
            "# params_used: m={} n_trials={} alpha_err={} beta_err={}",
            r.params_used.m,
            r.params_used.n_trials,
            r.params_used.alpha_err,
            r.params_used.beta_err
        )
        .unwrap();
        out.push_str("guess,smear_count,non_uniform\n");
        let flagged = r.non_uniform_guesses();
        for (g, c) in r.per_guess_smear_counts.iter().enumerate() {
            let nu = flagged.binary_search(&(g as u64)).is_ok();
            writeln!(out, "{g},{c},{}", nu as u8).unwrap();
        }
        out
    }
}

fn opt(v: Option<u64>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

/// Builds the instance or sample list, picks `(m, N)` and runs the attack.
pub fn attack_artifact(a: &mut AttackArgs) -> Result<AttackArtifact, CliError> {
    let params = a.ring.resolve()?;
    let q = table_q(params.q())?;
    let gaussian = a.gaussian.resolve()?;
    let alpha = *a.alpha.get_or_insert(DEFAULT_ATTACK_ALPHA / q as f64);

    let auto_params = if a.auto_params {
        if a.m.is_some() || a.trials.is_some() {
            return Err(CliError::usage("--auto-params replaces --m and --trials"));
        }
        let g = gaussian.ok_or_else(|| {
            CliError::usage("--auto-params needs the error width (--sigma or --beta)")
        })?;
        let chi = mapped_error_dist(&discrete_gaussian_zq(q, &g)?, &params)?;
        let m_cap = *a.m_cap.get_or_insert_with(|| default_m_cap(q));
        Some(
            choose_decision_params(&chi, m_cap, alpha, a.beta_err)
                .map_err(|e| sandwich(e, m_cap))?,
        )
    } else {
        None
    };
    let (m, n_trials) = match auto_params {
        Some(p) => (p.m, p.n_trials),
        None => match (a.m, a.trials) {
            (Some(m), Some(n)) => (m, n),
            _ => return Err(CliError::usage("give --m and --trials, or --auto-params")),
        },
    };
    let dp = DecisionParams::new(m, n_trials, alpha, a.beta_err)?;

    let instance;
    let list;
    let uniform;
    let mut true_s_gamma = None;
    let source: &dyn SampleSource = match a.mode {
        AttackMode::Plwe => {
            let g =
                gaussian.ok_or_else(|| CliError::usage("--mode plwe needs --sigma or --beta"))?;
            instance = match &a.secret {
                Some(text) => {
                    let coeffs = parse_int_list(text)
                        .map_err(|e| CliError::usage(format!("--secret: {e}")))?;
                    PlweInstance::new(params.clone(), PolyModF::from_signed(&coeffs, &params)?, g)?
                }
                None => PlweInstance::with_random_secret(
                    params.clone(),
                    g,
                    derive_seed(a.seed, SECRET_STREAM, 0),
                )?,
            };
            true_s_gamma = Some(instance.secret_at_root());
            &PlweSource {
                instance: &instance,
            }
        }
        AttackMode::Uniform => {
            uniform = UniformSource { params: &params };
            &uniform
        }
        AttackMode::File => {
            let path = a
                .samples
                .as_deref()
                .ok_or_else(|| CliError::usage("--mode file needs --samples"))?;
            list = SampleList {
                samples: read_samples(path, &params)?,
            };
            &list
        }
    };
    let report = smearing_attack(source, &params, &dp, a.seed)?;
    Ok(AttackArtifact {
        config: RunConfig::Attack(a.clone()),
        report,
        true_s_gamma,
        auto_params,
    })
}

/// Reads one sample per line: the `n` coefficients of `a` followed by the `n`
/// coefficients of `b`, comma separated. Blank lines and `#` comments are
/// skipped.
pub fn read_samples(path: &Path, params: &RingParams) -> Result<Vec<Sample>, CliError> {
    let text = read_text(path)?;
    let n = params.n();
    let parse_err = |line: usize, msg: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = parse_int_list(line).map_err(|e| parse_err(i + 1, e))?;
        if values.len() != 2 * n {
            return Err(parse_err(
                i + 1,
                format!("expected {} integers, found {}", 2 * n, values.len()),
            ));
        }
        let a = PolyModF::from_signed(&values[..n], params)?;
        let b = PolyModF::from_signed(&values[n..], params)?;
        samples.push(Sample { a, b });
    }
    Ok(samples)
}

/// Writes samples in the format accepted by [`read_samples`].
pub fn format_samples(samples: &[Sample]) -> String {
    let mut out = String::new();
    for s in samples {
        let fields: Vec<String> =
            s.a.coeffs()
                .iter()
                .chain(s.b.coeffs())
                .map(u64::to_string)
                .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Generates `count` PLWE samples for a file-mode round trip.
pub fn plwe_sample_file(instance: &PlweInstance, count: usize, seed: u64) -> String {
    format_samples(&gen_plwe_samples(instance, count, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsArtifact {
    pub config: RunConfig,
    /// Recommended samples per trial; absent when only `(P_U, P_chi)` was given.
    pub m: Option<usize>,
    /// Smallest separating `m`.
    pub first_m: Option<usize>,
    pub n_trials: usize,
    pub p_uniform: f64,
    pub p_chi: f64,
    pub alpha: f64,
    pub beta_err: f64,
    /// Chebyshev bounds on the two decision error rates at `n_trials`.
    pub bound_uniform: f64,
    pub bound_chi: f64,
    pub p_success_uniform: Option<f64>,
    pub p_success_plwe: Option<f64>,
}

impl ParamsArtifact {
    pub fn to_csv(&self) -> String {
        let mut out = config_line(&self.config);
        out.push_str("key,value\n");
        let num = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        let cnt = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        let rows = [
            ("m", cnt(self.m)),
            ("first_m", cnt(self.first_m)),
            ("n_trials", self.n_trials.to_string()),
            ("p_uniform", self.p_uniform.to_string()),
            ("p_chi", self.p_chi.to_string()),
            ("alpha", self.alpha.to_string()),
            ("beta_err", self.beta_err.to_string()),
            ("bound_uniform", self.bound_uniform.to_string()),
            ("bound_chi", self.bound_chi.to_string()),
            ("p_success_uniform", num(self.p_success_uniform)),
            ("p_success_plwe", num(self.p_success_plwe)),
        ];
        for (k, v) in rows {
            writeln!(out, "{k},{v}").unwrap();
        }
        out
    }
}

fn sandwich(err: Error, m_cap: usize) -> CliError {
    match err {
        Error::NotFound { .. } => CliError::usage(format!(
            "no m <= {m_cap} has P_chi(m) < 1/2 < P_U(m): chi is too close to uniform \
             to be separated by smearing (try a larger --m-cap)"
        )),
        other => other.into(),
    }
}

/// Recommends `(m, N)` for a distribution, or `N` alone for given
/// `(P_U, P_chi)`.
pub fn params_artifact(a: &mut ParamsArgs) -> Result<ParamsArtifact, CliError> {
    let (m, first_m, p_u, p_chi, n, q) = match (a.p_u, a.p_chi) {
        (Some(p_u), Some(p_chi)) => {
            let n = choose_trials(p_u, p_chi, a.alpha, a.beta_err)?;
            (None, None, p_u, p_chi, n, a.ring.q)
        }
        _ => {
            let chi = if let Some(path) = &a.chi {
                read_dist(path)?
            } else if a.uniform_chi {
                let q = a
                    .ring
                    .q
                    .ok_or_else(|| CliError::usage("--uniform-chi needs --q"))?;
                ProbDist::uniform(table_q(q)?)
            } else {
                let params = a.ring.resolve()?;
                let q = table_q(params.q())?;
                let g = a.gaussian.require()?;
                mapped_error_dist(&discrete_gaussian_zq(q, &g)?, &params)?
            };
            let m_cap = *a.m_cap.get_or_insert_with(|| default_m_cap(chi.q()));
            let c = choose_decision_params(&chi, m_cap, a.alpha, a.beta_err)
                .map_err(|e| sandwich(e, m_cap))?;
            (
                Some(c.m),
                Some(c.first_m),
                c.p_uniform,
                c.p_chi,
                c.n_trials,
                Some(chi.q() as u64),
            )
        }
    };
    let (p_success_uniform, p_success_plwe) = match q {
        Some(q) => {
            let (u, p) = success_probs(a.alpha, a.beta_err, q);
            (Some(u), Some(p))
        }
        None => (None, None),
    };
    Ok(ParamsArtifact {
        config: RunConfig::Params(a.clone()),
        m,
        first_m,
        n_trials: n,
        p_uniform: p_u,
        p_chi,
        alpha: a.alpha,
        beta_err: a.beta_err,
        bound_uniform: chebyshev_bound(p_u, n),
        bound_chi: chebyshev_bound(p_chi, n),
        p_success_uniform,
        p_success_plwe,
    })
}
