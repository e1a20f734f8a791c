//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p smearing-cli --test acceptance`.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use smearing_cli::commands::{attack_artifact, params_artifact, simulate_mapped};
use smearing_cli::config::{AttackArgs, AttackMode, GaussArgs, OutputArgs, ParamsArgs, RingArgs};
use smearing_core::attack::{
    gen_plwe_samples, gen_uniform_samples, residuals, smearing_decision, Decision, DecisionParams,
    PlweInstance, Verdict,
};
use smearing_core::dist::{
    derive_seed, discrete_gaussian_zq, mapped_error_dist, seeded_rng, GaussianParams, ProbDist,
};
use smearing_core::ring::{binomial_with_root, pow_mod, RingParams};
use smearing_core::smear::{
    choose_trials, er_approx, expected_coupons, p_nonuniform, p_nonuniform_small, p_uniform,
    SmearTable,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence of the exact engines", criterion_1),
        ("q-recursion agrees with the subset engine", criterion_2),
        ("P(m, q) grid for m <= 400, q <= 53", criterion_3),
        ("asymptotic approximation", criterion_4),
        (
            "uniform dominates every non-uniform distribution",
            criterion_5,
        ),
        ("mapped error distribution", criterion_6),
        ("expected number of coupons", criterion_7),
        ("parameter chooser and decision error rates", criterion_8),
        ("end-to-end attack", criterion_9),
        ("deterministic artifacts", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || {
        format!("{what} took {took:?}, limit {limit:?}")
    })
}

/// Uniform in `[0, 1)`, keyed by `(seed, a, b)`.
fn unit(seed: u64, a: u64, b: u64) -> f64 {
    (derive_seed(seed, a, b) >> 11) as f64 / (1u64 << 53) as f64
}

/// A random strictly positive distribution on `q` points.
fn random_dist(q: usize, seed: u64, index: u64) -> ProbDist {
    let weights = (0..q as u64).map(|k| 0.02 + unit(seed, index, k)).collect();
    ProbDist::from_weights(weights).unwrap()
}

/// Probability that `m` draws from `probs` cover every point, by walking all
/// `q^m` sequences. Once a prefix covers, the rest of its subtree has total
/// mass equal to the prefix mass.
fn enumerate(m: usize, probs: &[f64]) -> f64 {
    fn walk(left: usize, mass: f64, covered: u32, full: u32, probs: &[f64]) -> f64 {
        if covered == full {
            return mass;
        }
        if left == 0 {
            return 0.0;
        }
        probs
            .iter()
            .enumerate()
            .map(|(k, &p)| walk(left - 1, mass * p, covered | (1 << k), full, probs))
            .sum()
    }
    walk(m, 1.0, 0, (1u32 << probs.len()) - 1, probs)
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for q in 1..=5 {
        let mut dists: Vec<ProbDist> = (0..50).map(|i| random_dist(q, 101, i)).collect();
        dists.push(ProbDist::uniform(q));
        for m in 0..=10 {
            let exact_u = enumerate(m, ProbDist::uniform(q).probs());
            worst = worst.max((p_uniform(m, q) - exact_u).abs());
            for chi in &dists {
                let exact = enumerate(m, chi.probs());
                worst = worst.max((p_nonuniform(m, chi) - exact).abs());
                cases += 1;
            }
        }
    }
    ensure(worst <= 1e-12, || {
        format!("max deviation {worst:e} > 1e-12")
    })?;
    within(start, Duration::from_secs(60), "enumeration")?;
    Ok(format!("{cases} cases, max deviation {worst:e}"))
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for q in 1..=6 {
        for i in 0..50 {
            let chi = random_dist(q, 202, i);
            for m in 0..=12 {
                let small = p_nonuniform_small(m, &chi).map_err(|e| e.to_string())?;
                worst = worst.max((p_nonuniform(m, &chi) - small).abs());
            }
        }
    }
    ensure(worst <= 1e-12, || {
        format!("max deviation {worst:e} > 1e-12")
    })?;
    within(start, Duration::from_secs(60), "comparison")?;
    Ok(format!("max deviation {worst:e}"))
}

fn criterion_3() -> Check {
    let start = Instant::now();
    let table = SmearTable::uniform(53, 400);
    let took = start.elapsed();
    ensure(took < Duration::from_secs(5), || {
        format!("grid took {took:?}")
    })?;
    for q in 1..=53 {
        let col = table.row(q);
        for m in 1..=400 {
            ensure(col[m] >= col[m - 1], || {
                format!("P({m},{q}) < P({},{q})", m - 1)
            })?;
            if m < q {
                ensure(col[m] == 0.0, || {
                    format!("P({m},{q}) = {} for m < q", col[m])
                })?;
            }
        }
    }
    for q in [3usize, 5, 10] {
        let direct = (1..=q).map(|k| k as f64).product::<f64>() / (q as f64).powi(q as i32);
        let got = table.row(q)[q];
        ensure((got - direct).abs() <= 1e-12, || {
            format!("P({q},{q}) = {got}, q!/q^q = {direct}")
        })?;
    }
    Ok(format!(
        "grid in {took:?}, columns monotone, P(q,q) = q!/q^q"
    ))
}

fn criterion_4() -> Check {
    let worst = (1..=600)
        .map(|m| (er_approx(m, 53) - p_uniform(m, 53)).abs())
        .fold(0.0, f64::max);
    ensure(worst < 0.05, || {
        format!("max |approx - exact| = {worst} at q = 53")
    })?;
    let mut at_log = Vec::new();
    for q in [53usize, 101] {
        let m = (q as f64 * (q as f64).ln()).ceil() as usize;
        let p = p_uniform(m, q);
        ensure((p - (-1.0f64).exp()).abs() < 0.05, || {
            format!("P({m},{q}) = {p}, not within 0.05 of 1/e")
        })?;
        at_log.push(format!("P({m},{q}) = {p:.5}"));
    }
    Ok(format!("max gap {worst:.5}; {}", at_log.join(", ")))
}

fn criterion_5() -> Check {
    let mut checked = 0;
    for i in 0..100u64 {
        let q = 3 + (i % 6) as usize;
        let chi = random_dist(q, 505, i);
        let probs = chi.probs();
        ensure(!chi.is_uniform(1e-9), || {
            format!("distribution {i} is uniform")
        })?;
        // Average two unequal entries.
        let (a, b) = (0, 1 + (i as usize % (q - 1)));
        let mut avg = probs.to_vec();
        let mean = (avg[a] + avg[b]) / 2.0;
        avg[a] = mean;
        avg[b] = mean;
        let avg = ProbDist::new(avg).map_err(|e| e.to_string())?;
        for m in q..=q + 12 {
            let (pn, pu) = (p_nonuniform(m, &chi), p_uniform(m, q));
            ensure(pn < pu, || {
                format!("P_chi({m},{q}) = {pn} >= P_U = {pu} for chi #{i}")
            })?;
            let pa = p_nonuniform(m, &avg);
            ensure(pa >= pn - 1e-15, || {
                format!("averaging lowered P({m},{q}) from {pn} to {pa} for chi #{i}")
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} (chi, m) pairs"))
}

/// `|p - orbit average of p|` in total variation, orbits of `r -> gamma r`.
fn orbit_tv(p: &[f64], gamma: u64) -> f64 {
    let q = p.len() as u64;
    let mut seen = vec![false; p.len()];
    let mut tv = 0.0;
    for start in 0..q {
        if seen[start as usize] {
            continue;
        }
        let mut orbit = vec![start];
        let mut r = start * gamma % q;
        while r != start {
            orbit.push(r);
            r = r * gamma % q;
        }
        let mean = orbit.iter().map(|&r| p[r as usize]).sum::<f64>() / orbit.len() as f64;
        for &r in &orbit {
            seen[r as usize] = true;
            tv += (p[r as usize] - mean).abs();
        }
    }
    tv / 2.0
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let params = RingParams::from_signed(53, &[-57, 0, 1], 2).map_err(|e| e.to_string())?;
    let base = discrete_gaussian_zq(53, &GaussianParams::sigma(6.0).unwrap()).unwrap();
    let mapped = mapped_error_dist(&base, &params).map_err(|e| e.to_string())?;
    let mc = simulate_mapped(&base, &params, 1_000_000, 6).map_err(|e| e.to_string())?;
    let tv = mapped.total_variation(&mc).unwrap();
    ensure(tv < 0.01, || format!("TV to 10^6-sample histogram = {tv}"))?;

    let gamma = 396;
    ensure(pow_mod(gamma, 3, 607) == 1, || {
        "396 should have order 3 mod 607".into()
    })?;
    let f = binomial_with_root(3, gamma, 607);
    let params = RingParams::new(607, f, gamma).map_err(|e| e.to_string())?;
    let base = discrete_gaussian_zq(607, &GaussianParams::beta(0.01).unwrap()).unwrap();
    let mapped = mapped_error_dist(&base, &params).map_err(|e| e.to_string())?;
    let otv = orbit_tv(mapped.probs(), gamma);
    ensure(otv < 0.01, || format!("orbit TV at q = 607 = {otv}"))?;
    let base_otv = orbit_tv(base.probs(), gamma);
    within(start, Duration::from_secs(120), "mapped distributions")?;
    Ok(format!(
        "TV vs Monte Carlo {tv:.5}; orbit TV {otv:e} (coefficient Gaussian itself {base_otv:.3})"
    ))
}

fn criterion_7() -> Check {
    let q = 53;
    let runs = 100_000;
    let sampler = ProbDist::uniform(q).sampler();
    let mut rng = seeded_rng(7);
    let mut seen = vec![0u32; q];
    let mut total = 0u64;
    for run in 1..=runs {
        let (mut distinct, mut draws) = (0, 0u64);
        while distinct < q {
            let r = sampler.draw(&mut rng) as usize;
            draws += 1;
            if seen[r] != run {
                seen[r] = run;
                distinct += 1;
            }
        }
        total += draws;
    }
    let mean = total as f64 / runs as f64;
    let expected = expected_coupons(q);
    let rel = (mean - expected).abs() / expected;
    ensure(rel < 0.02, || format!("mean {mean} vs q H_q = {expected}"))?;
    Ok(format!(
        "mean {mean:.3} vs q H_q = {expected:.3} ({:.2}%)",
        100.0 * rel
    ))
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let n = choose_trials(0.75, 0.25, 0.05, 0.05).map_err(|e| e.to_string())?;
    ensure(n == 61, || {
        format!("choose_trials(0.75, 0.25, 0.05, 0.05) = {n}")
    })?;

    let (alpha, beta_err) = (0.05, 0.05);
    let mut args = ParamsArgs {
        p_u: None,
        p_chi: None,
        ring: RingArgs {
            q: Some(11),
            f: Some("-3,0,1".into()),
            gamma: Some(5),
            ..RingArgs::default()
        },
        gaussian: GaussArgs {
            sigma: Some(1.5),
            beta: None,
        },
        chi: None,
        uniform_chi: false,
        alpha,
        beta_err,
        m_cap: None,
        output: OutputArgs::default(),
    };
    let rec = params_artifact(&mut args).map_err(|e| e.to_string())?;
    let m = rec.m.ok_or("no m recommended")?;
    let dp = DecisionParams::new(m, rec.n_trials, alpha, beta_err).map_err(|e| e.to_string())?;
    let params = RingParams::from_signed(11, &[-3, 0, 1], 5).map_err(|e| e.to_string())?;
    let gaussian = GaussianParams::sigma(1.5).unwrap();
    let total = m * rec.n_trials;

    let runs = 200u64;
    let (mut type1, mut type2) = (0, 0);
    for run in 0..runs {
        let uniform = gen_uniform_samples(&params, total, derive_seed(8, 0, run));
        let res = residuals(&uniform, &params, 0).map_err(|e| e.to_string())?;
        if smearing_decision(&res, 11, &dp).map_err(|e| e.to_string())? != Decision::Uniform {
            type1 += 1;
        }
        let inst =
            PlweInstance::with_random_secret(params.clone(), gaussian, derive_seed(8, 1, run))
                .map_err(|e| e.to_string())?;
        let plwe = gen_plwe_samples(&inst, total, derive_seed(8, 2, run));
        let res = residuals(&plwe, &params, inst.secret_at_root()).map_err(|e| e.to_string())?;
        if smearing_decision(&res, 11, &dp).map_err(|e| e.to_string())? != Decision::NonUniform {
            type2 += 1;
        }
    }
    let (r1, r2) = (type1 as f64 / runs as f64, type2 as f64 / runs as f64);
    ensure(r1 <= alpha, || {
        format!(
            "Type-1 rate {r1} > {alpha} at m = {m}, N = {}",
            rec.n_trials
        )
    })?;
    ensure(r2 <= beta_err, || {
        format!(
            "Type-2 rate {r2} > {beta_err} at m = {m}, N = {}",
            rec.n_trials
        )
    })?;
    within(start, Duration::from_secs(300), "decision runs")?;
    Ok(format!(
        "N = 61; q = 11: m = {m}, N = {}, Type-1 {r1}, Type-2 {r2} over {runs} runs",
        rec.n_trials
    ))
}

fn attack_args(mode: AttackMode, seed: u64) -> AttackArgs {
    AttackArgs {
        mode,
        ring: RingArgs {
            q: Some(53),
            n: Some(2),
            gamma: Some(2),
            ..RingArgs::default()
        },
        gaussian: GaussArgs {
            sigma: Some(6.0),
            beta: None,
        },
        m: None,
        trials: None,
        auto_params: true,
        alpha: None,
        beta_err: 0.05,
        m_cap: None,
        secret: None,
        samples: None,
        seed,
        output: OutputArgs::default(),
    }
}

fn criterion_9() -> Check {
    let start = Instant::now();
    let runs = 50u64;
    let (mut plwe_ok, mut uniform_ok) = (0, 0);
    let mut used = None;
    for seed in 1..=runs {
        let art =
            attack_artifact(&mut attack_args(AttackMode::Plwe, seed)).map_err(|e| e.to_string())?;
        used = Some(art.report.params_used);
        if art.report.verdict == Verdict::Plwe && art.report.recovered_s_gamma == art.true_s_gamma {
            plwe_ok += 1;
        }
        let art = attack_artifact(&mut attack_args(AttackMode::Uniform, seed))
            .map_err(|e| e.to_string())?;
        if art.report.verdict == Verdict::Uniform {
            uniform_ok += 1;
        }
    }
    let dp = used.unwrap();
    let (pr, ur) = (
        plwe_ok as f64 / runs as f64,
        uniform_ok as f64 / runs as f64,
    );
    ensure(pr >= 0.9, || {
        format!("PLWE recovered in {plwe_ok}/{runs} runs")
    })?;
    ensure(ur >= 0.7, || {
        format!("uniform recognized in {uniform_ok}/{runs} runs")
    })?;
    within(start, Duration::from_secs(600), "attack runs")?;
    Ok(format!(
        "m = {}, N = {}: PLWE {plwe_ok}/{runs}, uniform {uniform_ok}/{runs}",
        dp.m, dp.n_trials
    ))
}

fn smearing(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_smearing"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    match out.status.code() {
        Some(0) | Some(2) => Ok(()),
        _ => Err(format!(
            "smearing {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn criterion_10() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| -> PathBuf { dir.path().join(name) };
    let runs: [(&str, Vec<&str>); 7] = [
        (
            "prob.csv",
            vec![
                "prob",
                "--q",
                "7",
                "--m-max",
                "40",
                "--approx",
                "--mc-trials",
                "500",
                "--seed",
                "3",
            ],
        ),
        (
            "prob.json",
            vec![
                "prob", "--q", "5", "--q-min", "1", "--m-max", "12", "--json",
            ],
        ),
        (
            "map.csv",
            vec![
                "mapdist",
                "--q",
                "53",
                "--f",
                "-57,0,1",
                "--gamma",
                "2",
                "--sigma",
                "6",
                "--mc-samples",
                "20000",
                "--seed",
                "4",
            ],
        ),
        (
            "map.json",
            vec![
                "mapdist", "--q", "607", "--n", "3", "--gamma", "396", "--beta", "0.01", "--json",
            ],
        ),
        (
            "plwe.json",
            vec![
                "attack",
                "--mode",
                "plwe",
                "--q",
                "53",
                "--n",
                "2",
                "--sigma",
                "6",
                "--gamma",
                "2",
                "--auto-params",
                "--seed",
                "9",
                "--json",
            ],
        ),
        (
            "uniform.csv",
            vec![
                "attack", "--mode", "uniform", "--q", "53", "--n", "2", "--gamma", "2", "--m",
                "300", "--trials", "3", "--seed", "9",
            ],
        ),
        (
            "params.json",
            vec![
                "params", "--q", "53", "--n", "2", "--sigma", "6", "--gamma", "2", "--json",
            ],
        ),
    ];
    for (name, args) in &runs {
        let first = path(&format!("a-{name}"));
        let second = path(&format!("b-{name}"));
        let replay = path(&format!("c-{name}"));
        for out in [&first, &second] {
            let mut full = args.clone();
            full.extend(["--out", out.to_str().unwrap()]);
            smearing(&full)?;
        }
        ensure(read(&first)? == read(&second)?, || {
            format!("{name}: two runs differ")
        })?;
        // The JSON array from mapdist keeps its config in a sidecar file.
        let config = if *name == "map.json" {
            smearing_cli::commands::sidecar_path(&first)
        } else {
            first.clone()
        };
        smearing(&[
            "rerun",
            config.to_str().unwrap(),
            "--out",
            replay.to_str().unwrap(),
        ])?;
        ensure(read(&first)? == read(&replay)?, || {
            format!("{name}: rerun from the echoed config differs")
        })?;
    }
    Ok(format!(
        "{} artifacts identical across runs and reruns",
        runs.len()
    ))
}
