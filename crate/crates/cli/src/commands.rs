use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use kamtori_core::divisors::{surviving_set_sweep, StepBudget};
use kamtori_core::engine::{run_iteration, StepConfig, StopReason, TransformChain};
use kamtori_core::linalg::numerical_rank;
use kamtori_core::model::RANK_TOL;
use kamtori_core::scenarios::{builtin, check_conditions, Scenario};
use kamtori_core::verifier::{verify_torus, VerifyConfig};
use kamtori_core::FtSeries;
use serde::Serialize;

use crate::{Args, Mode};

/// Largest verified deviation from the torus accepted by `verify`.
const DEVIATION_BUDGET: f64 = 1e-5;
/// Largest gap between a locked rotation component and its target.
const LOCK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Failure = 1,
    Resonance = 2,
    Input = 3,
}

pub fn run(args: &Args) -> Result<Status> {
    if let Some(w) = args.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global().context("configuring worker pool")?;
    }
    let sc = load_scenario(args)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    match args.mode {
        Mode::Check => check(args, &sc),
        Mode::Sweep => sweep(args, &sc),
        Mode::Iterate => iterate(args, &sc),
        Mode::Verify => verify(args, &sc),
    }
}

fn load_scenario(args: &Args) -> Result<Scenario> {
    let path = Path::new(&args.scenario);
    let mut sc = if path.is_file() {
        let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Scenario::from_toml(&src).with_context(|| format!("in {}", path.display()))?
    } else {
        builtin(&args.scenario)?
    };
    if let Some(t) = args.tau {
        sc.kam.tau = t;
    }
    if let Some(g) = args.gamma.as_ref().and_then(|g| g.first()) {
        if !(*g > 0.0 && *g < 1.0) {
            bail!("--gamma values must lie in (0, 1), got {g}");
        }
        sc.kam.gamma0 = *g;
    }
    if let Some(e) = args.eps0 {
        if !(0.0..1.0).contains(&e) {
            bail!("--eps0 must lie in [0, 1), got {e}");
        }
        if e > 0.0 {
            sc.kam.eps0 = e;
        }
    }
    if let Some(s) = args.seed {
        sc.perturbation.seed = s;
    }
    Ok(sc)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(sep)
}

fn check(args: &Args, sc: &Scenario) -> Result<Status> {
    let sample = args.grid.clone().unwrap_or_else(|| vec![5; sc.chart.n0]);
    if sample.len() != sc.chart.n0 {
        bail!("--grid needs {} entries", sc.chart.n0);
    }
    let rep = check_conditions(sc, &sample)?;
    for c in &rep.conditions {
        let tag = if c.pass { "pass" } else { "FAIL" };
        let req = if c.required { "" } else { " (diagnostic)" };
        println!("{:<5} {tag}{req}: {}", c.name, c.detail);
    }
    if let Some(m) = rep.matches(sc.expect.as_ref()) {
        println!("stated expectations {}", if m { "match" } else { "do not match" });
    }
    write_json(&args.out.join("summary.json"), &rep)?;
    Ok(if rep.all_required_pass() { Status::Ok } else { Status::Failure })
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    scenario: &'a str,
    gammas: &'a [f64],
    tau: f64,
    k_max: u32,
    grid: &'a [usize],
    excluded_fraction: &'a [f64],
    log_log_slope: Option<f64>,
}

fn sweep(args: &Args, sc: &Scenario) -> Result<Status> {
    let grid = args.grid.clone().unwrap_or_else(|| sc.chart.grid.clone());
    if grid.len() != sc.chart.n0 || grid.contains(&0) {
        bail!("--grid needs {} positive entries", sc.chart.n0);
    }
    let gammas = args.gamma.clone().unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4, 1e-5]);
    let res = surviving_set_sweep(&sc.n_full, &sc.chart, &gammas, sc.kam.tau, args.k_max, &grid)?;
    let head: Vec<String> = (1..=sc.chart.n0).map(|i| format!("lambda{i}")).collect();
    for (gi, &g) in gammas.iter().enumerate() {
        let path = args.out.join(format!("sweep_gamma_{gi}.csv"));
        let mut f = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        writeln!(f, "{},pass,worst_margin,worst_k,worst_l", head.join(","))?;
        for (i, p) in res.points.iter().enumerate() {
            let c = &p.critical;
            writeln!(
                f,
                "{},{},{},{},{}",
                join(&p.lambda, ","),
                res.passes(i, g) as u8,
                c.worst_margin,
                join(&c.worst_k, " "),
                join(&c.worst_l, " ")
            )?;
        }
        f.flush()?;
        println!("gamma {g:e}: excluded fraction {}", res.excluded_fraction[gi]);
    }
    let slope = res.log_log_slope();
    if let Some(s) = slope {
        println!("log-log slope {s:.4}");
    }
    let summary = SweepSummary {
        scenario: &sc.name,
        gammas: &gammas,
        tau: sc.kam.tau,
        k_max: args.k_max,
        grid: &grid,
        excluded_fraction: &res.excluded_fraction,
        log_log_slope: slope,
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    Ok(Status::Ok)
}

fn lambda(args: &Args, sc: &Scenario) -> Result<Vec<f64>> {
    let Some(l) = args.lambda.clone() else { bail!("--lambda is required in this mode") };
    if l.len() != sc.chart.n0 {
        bail!("--lambda needs {} entries, got {}", sc.chart.n0, l.len());
    }
    if !sc.chart.contains(&l) {
        bail!("--lambda {l:?} lies outside the chart domain {:?}", sc.chart.domain);
    }
    Ok(l)
}

fn perturbation(args: &Args, sc: &Scenario) -> FtSeries {
    if args.eps0 == Some(0.0) {
        FtSeries::zero(sc.dims)
    } else {
        sc.local_perturbation()
    }
}

/// `tau > n(n-1) - 1` with a singular twist, `tau > n - 1` otherwise.
fn check_tau(sc: &Scenario, rank_a: usize) -> Result<()> {
    let n = sc.dims.n as f64;
    let singular = rank_a < sc.dims.n;
    let floor = if singular { n * (n - 1.0) - 1.0 } else { n - 1.0 };
    if !(sc.kam.tau > floor) {
        bail!("tau = {} must exceed {floor} for this twist (rank deficient: {singular})", sc.kam.tau);
    }
    Ok(())
}

#[derive(Serialize)]
struct IterateSummary<'a> {
    scenario: &'a str,
    lambda: &'a [f64],
    steps_requested: usize,
    steps_completed: usize,
    stop: &'a StopReason,
    hypotheses_pass: bool,
    contraction_pass: Vec<bool>,
    eps_hat: Vec<f64>,
    omega: &'a [f64],
    locked: &'a [usize],
}

fn iterate(args: &Args, sc: &Scenario) -> Result<Status> {
    let lam = lambda(args, sc)?;
    let p = perturbation(args, sc);
    let model = sc.model_at(&lam, &p)?;
    check_tau(sc, numerical_rank(&model.nf.a, RANK_TOL))?;
    let w = sc.initial_weights();
    let budget = StepBudget::initial(sc.dims, w.r, w.s, sc.kam.gamma0, sc.kam.eps0, sc.kam.tau)?;
    let mut cfg = StepConfig::default();
    if let Some(d) = args.dy {
        cfg.d_y = d;
    }
    if let Some(t) = args.lie_tol {
        cfg.lie_tol = t;
    }
    if let Some(c) = args.slack {
        cfg.c_slack = c;
    }
    let it = run_iteration(model, budget, args.steps, 0.0, &cfg);

    let mut f = BufWriter::new(File::create(args.out.join("steps.jsonl"))?);
    for r in &it.reports {
        serde_json::to_writer(&mut f, r)?;
        writeln!(f)?;
    }
    f.flush()?;
    fs::write(args.out.join("chain.txt"), it.chain.to_text())?;
    let mut f = BufWriter::new(File::create(args.out.join("divisor_log.csv"))?);
    writeln!(f, "step,k,class,divisor,threshold,condition,neumann_ratio")?;
    for (i, log) in it.divisor_logs.iter().enumerate() {
        for e in log {
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                i + 1,
                join(&e.k, " "),
                e.class.name(),
                e.divisor,
                e.threshold,
                e.condition,
                e.neumann_ratio
            )?;
        }
    }
    f.flush()?;

    for r in &it.reports {
        println!(
            "step {}: eps_hat {:.3e} -> {:.3e}, hypotheses {}, contraction {}, freq lock {:.1e}",
            r.step,
            r.norms.eps_hat,
            r.norms.eps_hat_plus,
            if r.hypothesis.all_pass() { "pass" } else { "FAIL" },
            if r.contraction.pass { "pass" } else { "FAIL" },
            r.freq_lock
        );
    }
    let hyp = it.reports.iter().all(|r| r.hypothesis.all_pass());
    let summary = IterateSummary {
        scenario: &sc.name,
        lambda: &lam,
        steps_requested: args.steps,
        steps_completed: it.reports.len(),
        stop: &it.stop,
        hypotheses_pass: hyp,
        contraction_pass: it.reports.iter().map(|r| r.contraction.pass).collect(),
        eps_hat: it.reports.iter().map(|r| r.norms.eps_hat).collect(),
        omega: &it.model.nf.omega,
        locked: &it.model.nf.minor_indices,
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    Ok(match &it.stop {
        StopReason::Resonance { step, k, l, .. } => {
            println!("resonance before step {step} at k = {k:?}, l = {l:?}");
            Status::Resonance
        }
        StopReason::Failure { step, message } => {
            println!("step {step} failed: {message}");
            Status::Failure
        }
        _ if !hyp => Status::Failure,
        _ => Status::Ok,
    })
}

#[derive(Serialize)]
struct LockCheck {
    index: usize,
    omega: f64,
    rotation: f64,
    gap: f64,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    scenario: &'a str,
    lambda: &'a [f64],
    links: usize,
    config: &'a VerifyConfig,
    deviation_budget: f64,
    lock_tol: f64,
    lock: Vec<LockCheck>,
    pass: bool,
    verification: &'a kamtori_core::verifier::TorusVerification,
}

fn verify(args: &Args, sc: &Scenario) -> Result<Status> {
    let lam = lambda(args, sc)?;
    let chain_path = args.chain.clone().unwrap_or_else(|| args.out.join("chain.txt"));
    let src = fs::read_to_string(&chain_path).with_context(|| format!("reading chain file {}", chain_path.display()))?;
    let chain = TransformChain::from_text(&src).with_context(|| format!("parsing {}", chain_path.display()))?;
    if chain.dims != sc.dims {
        bail!("chain in {} has dimensions {:?}, scenario has {:?}", chain_path.display(), chain.dims, sc.dims);
    }
    let p = perturbation(args, sc);
    let model = sc.model_at(&lam, &p)?;
    let h0 = sc.local_hamiltonian(&lam, &p)?;
    let cfg = VerifyConfig {
        samples: args.samples,
        t_end: args.time,
        dt: args.dt,
        seed: args.seed.unwrap_or(VerifyConfig::default().seed),
        ..VerifyConfig::default()
    };
    let v = verify_torus(&chain, &h0, &cfg)?;
    let lock: Vec<LockCheck> = model
        .nf
        .minor_indices
        .iter()
        .map(|&i| {
            let rotation = v.rotation_estimate[i];
            let omega = model.nf.omega[i];
            LockCheck { index: i + 1, omega, rotation, gap: (rotation - omega).abs() }
        })
        .collect();
    let truncated = v.seeds.iter().any(|s| s.truncated_at.is_some());
    let pass = !truncated && v.max_deviation <= DEVIATION_BUDGET && lock.iter().all(|l| l.gap <= LOCK_TOL);
    for (i, tr) in v.trajectories.iter().enumerate() {
        let path = args.out.join(format!("trajectory_{i}.csv"));
        tr.write_csv(sc.dims, BufWriter::new(File::create(&path)?))?;
    }
    println!("max deviation {:.3e} over {} seeds, energy drift {:.1e}", v.max_deviation, v.seeds.len(), v.max_energy_drift);
    for l in &lock {
        println!("omega_{} = {} locked, rotation {} (gap {:.1e})", l.index, l.omega, l.rotation, l.gap);
    }
    let rep = VerifyReport {
        scenario: &sc.name,
        lambda: &lam,
        links: chain.len(),
        config: &cfg,
        deviation_budget: DEVIATION_BUDGET,
        lock_tol: LOCK_TOL,
        lock,
        pass,
        verification: &v,
    };
    write_json(&args.out.join("verify.json"), &rep)?;
    Ok(if pass { Status::Ok } else { Status::Failure })
}
