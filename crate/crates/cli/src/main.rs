mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::Parser;
use nalgebra::DMatrix;
use polystab::basis::{parse_w, BasisSpec};
use polystab::experiment::{self, ExperimentConfig, GroundTruth, InputSignal, NoiseBound, NoiseModel, BUILTIN_SYSTEMS};
use polystab::ode::boundary_ring;
use polystab::par::Execution;
use polystab::pipeline::{synthesize, SynthesisOutcome};
use polystab::sdpsolve::SolveOptions;
use polystab::soscompile::{Method, Objective, SynthesisOptions};
use polystab::verify::{lyapunov_audit, report, simulate_closed_loop, Certificate, ReportRow};

use args::{parse_degree_range, Cli, Command, ConfigFile, SimulateArgs, SynthesizeArgs, VerifyArgs};

/// Stage ran but did not succeed (infeasible, audit failure, divergence).
const EXIT_STAGE_FAILED: u8 = 1;
/// Bad flags, config or input files.
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POLY_STAB_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = ConfigFile::load(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::Simulate(a) => cmd_simulate(a.merge(file.simulate)),
        Command::Synthesize(a) => cmd_synthesize(a.merge(file.synthesize)),
        Command::Verify(a) => cmd_verify(a.merge(file.verify)),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_STAGE_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn system(name: &str) -> Result<GroundTruth> {
    experiment::builtin(name)
        .ok_or_else(|| anyhow!("unknown system '{name}', built-ins are {}", BUILTIN_SYSTEMS.join(", ")))
}

fn basis_spec(n: usize, m: usize, basis: Option<&str>, zhat: Option<&str>, w: Option<&str>) -> Result<BasisSpec> {
    let (zmin, zmax) = parse_degree_range(basis.unwrap_or("deg:1-3"))?;
    let (hmin, hmax) = parse_degree_range(zhat.unwrap_or("deg:1"))?;
    if hmin != 1 {
        bail!("Zhat must start at degree 1 so that it contains x");
    }
    let w = w.map(|s| parse_w(s, n, m)).transpose()?;
    Ok(BasisSpec::new(n, m, zmin, zmax, hmax, w)?)
}

/// State and input dimensions from the `x<i>` and `u<i>` columns of a data file header.
fn data_dims(path: &Path) -> Result<(usize, usize)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header = text.lines().next().unwrap_or_default();
    let count = |prefix: char| {
        header
            .split(',')
            .map(str::trim)
            .filter(|h| {
                h.strip_prefix(prefix)
                    .is_some_and(|r| !r.is_empty() && r.chars().all(|c| c.is_ascii_digit()))
            })
            .count()
    };
    let (n, m) = (count('x'), count('u'));
    if n == 0 || m == 0 {
        bail!("{}: header needs x1.. and u1.. columns", path.display());
    }
    Ok((n, m))
}

fn cmd_simulate(a: SimulateArgs) -> Result<bool> {
    let name = a.system.as_deref().context("--system is required")?;
    let gt = system(name)?;
    let seed = a.seed.unwrap_or(0);
    let x0 = experiment::parse_vec(a.x0.as_deref().context("--x0 is required")?)?;
    if x0.len() != gt.n() {
        bail!("--x0 has {} entries, {name} has {} states", x0.len(), gt.n());
    }
    let cfg = ExperimentConfig {
        x0,
        input: InputSignal::parse(a.input.as_deref().unwrap_or("sin"))?,
        t0: a.t0.unwrap_or(0.0),
        tau: a.tau.unwrap_or(0.5),
        samples: a.samples.unwrap_or(12),
        noise: NoiseModel::parse(a.noise.as_deref().unwrap_or("none"), seed)?,
    };
    let output = a.output.context("-o is required")?;
    let spec = basis_spec(gt.n(), gt.m(), a.basis.as_deref(), a.zhat.as_deref(), a.w.as_deref())?;
    let mut ds = experiment::simulate_experiment(&gt, &spec, &cfg)?;
    if let Some(b) = &a.bound {
        experiment::make_noise_bound(&mut ds, &NoiseBound::parse(b, gt.n())?)?;
    }
    if let Some(v) = experiment::noise_bound_violation(&ds) {
        if v > 1e-12 {
            println!("warning: the injected noise exceeds the stated bound (lambda_max = {v:.3e})");
        }
    }
    for line in experiment::validate_richness(&ds, &spec, seed).messages() {
        println!("{line}");
    }
    let side = experiment::export_csv(&ds, &output)?;
    println!("wrote {}", output.display());
    println!("wrote {}", side.display());
    Ok(true)
}

fn parse_methods(s: &str, spec: &BasisSpec, has_rb: bool) -> Result<Vec<Method>> {
    if s == "all" {
        let mut out = Vec::new();
        for m in Method::ALL {
            match m {
                Method::Thm1 if !has_rb => log::warn!("all: skipping thm1, it needs --rb"),
                Method::Remark1 if !spec.w_is_identity() => log::warn!("all: skipping remark1, it needs W = I"),
                _ => out.push(m),
            }
        }
        return Ok(out);
    }
    let mut out: Vec<Method> = Vec::new();
    for part in s.split(',') {
        let m: Method = part.trim().parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn certificate_path(dir: &Path, method: Method) -> PathBuf {
    dir.join(format!("certificate_{method}.json"))
}

fn cmd_synthesize(a: SynthesizeArgs) -> Result<bool> {
    let data = a.data.as_deref().context("a data file is required")?;
    let (n, m) = data_dims(data)?;
    let spec = basis_spec(n, m, a.basis.as_deref(), a.zhat.as_deref(), a.w.as_deref())?;
    let mut ds = experiment::ingest(data, &spec)?;
    if let Some(r) = a.rb {
        ds.rb = Some(DMatrix::identity(n, n) * r);
    }
    let methods = parse_methods(a.method.as_deref().unwrap_or("all"), &spec, ds.rb.is_some())?;
    let defaults = SynthesisOptions::default();
    let options = SynthesisOptions {
        deg_yk: a.deg_y.unwrap_or(defaults.deg_yk),
        deg_eps1: a.deg_eps1.unwrap_or(defaults.deg_eps1),
        deg_eps2: a.deg_eps2.unwrap_or(defaults.deg_eps2),
        delta: a.delta.unwrap_or(defaults.delta),
        rho: a.rho.unwrap_or(defaults.rho),
        objective: match a.objective.as_deref().unwrap_or("feasibility") {
            "feasibility" => Objective::Feasibility,
            "min-trace" => Objective::MinTrace,
            o => bail!("unknown objective '{o}', expected feasibility or min-trace"),
        },
    };
    let sdefaults = SolveOptions::default();
    let solve_opts = SolveOptions {
        tol_feas: a.tol.unwrap_or(sdefaults.tol_feas),
        max_iter: a.max_iter.unwrap_or(sdefaults.max_iter),
        seed: a.seed.unwrap_or(sdefaults.seed),
    };
    for line in experiment::validate_richness(&ds, &spec, solve_opts.seed).messages() {
        println!("{line}");
    }
    let out_dir = a.out_dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;

    let exec = if a.parallel {
        Execution::Parallel
    } else {
        Execution::Sequential
    };
    let outcomes: Vec<SynthesisOutcome> = exec
        .map(methods.len(), |k| {
            synthesize(methods[k], &spec, &ds, &options, &solve_opts)
        })
        .into_iter()
        .collect::<polystab::Result<_>>()?;

    let mut ok = true;
    let mut rows = Vec::new();
    for out in &outcomes {
        rows.push(ReportRow {
            method: out.method,
            status: out.report.status,
            decision_vars: out.instance.nvars,
            iterations: out.report.iterations,
            wall_time: out.wall_time,
            max_vdot: None,
            converged: None,
        });
        match &out.certificate {
            Some(cert) => {
                let path = certificate_path(&out_dir, out.method);
                cert.save(&path)?;
                println!("wrote {}", path.display());
            }
            None => {
                ok = false;
                eprintln!(
                    "{}: {} after {} iterations",
                    out.method, out.report.status, out.report.iterations
                );
                if !out.report.message.is_empty() {
                    eprintln!("  {}", out.report.message);
                }
                for line in &out.report.trace {
                    eprintln!("  {line}");
                }
                if let Some(e) = &out.extract_error {
                    eprintln!("  no certificate: {e}");
                }
            }
        }
    }
    let rep = report(rows);
    print!("{rep}");
    let txt = out_dir.join("report.txt");
    std::fs::write(&txt, rep.to_string())?;
    println!("wrote {}", txt.display());
    let json = out_dir.join("report.json");
    std::fs::write(&json, serde_json::to_string_pretty(&rep)? + "\n")?;
    println!("wrote {}", json.display());
    Ok(ok)
}

fn cmd_verify(a: VerifyArgs) -> Result<bool> {
    let path = a.certificate.as_deref().context("a certificate file is required")?;
    let cert = Certificate::load(path).with_context(|| format!("cannot load {}", path.display()))?;
    let gt = system(a.system.as_deref().context("--system is required")?)?;
    if gt.n() != cert.n || gt.m() != cert.m {
        bail!(
            "certificate is for n = {}, m = {} but the system has n = {}, m = {}",
            cert.n,
            cert.m,
            gt.n(),
            gt.m()
        );
    }
    let half = a.half_width.unwrap_or(3.0);
    let samples = a.samples.unwrap_or(10_000);
    let rings = a.rings.unwrap_or(10);
    let t_end = a.t_end.unwrap_or(20.0);
    let dt = a.dt.unwrap_or(0.01);
    let converge_tol = a.converge_tol.unwrap_or(1e-3);
    let out_dir = a.out_dir.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;

    let audit = lyapunov_audit(&cert, &gt, half, samples, Execution::Parallel)?;
    println!(
        "audit on [-{half}, {half}]^{}: {} of {} samples violate decrease, max Vdot/|Zhat|^2 = {:.3e}, min V/|Zhat|^2 = {:.3e}",
        cert.n, audit.violations, audit.evaluated, audit.max_vdot_ratio, audit.min_v_ratio
    );
    if let Some(w) = &audit.worst_point {
        if !audit.passed() {
            println!("worst sample at {w:?}");
        }
    }
    let audit_path = out_dir.join("audit.json");
    std::fs::write(&audit_path, serde_json::to_string_pretty(&audit)? + "\n")?;
    println!("wrote {}", audit_path.display());

    let starts = boundary_ring(cert.n, half, rings);
    let runs = Execution::Parallel.map(starts.len(), |k| {
        simulate_closed_loop(&cert, &gt, &starts[k], t_end, dt)
    });
    let mut converged = 0;
    for (k, (x0, run)) in starts.iter().zip(runs).enumerate() {
        match run {
            Ok(tr) => {
                let path = out_dir.join(format!("trajectory_{k:02}.csv"));
                tr.write_csv(&path)?;
                let fin = tr.final_norm();
                let good = fin <= converge_tol && tr.v_nonincreasing(polystab::verify::INTEGRATOR_TOL);
                converged += usize::from(good);
                println!(
                    "x0 = {x0:?}: |x({t_end})| = {fin:.3e}, V monotone {} -> {}",
                    tr.v_nonincreasing(polystab::verify::INTEGRATOR_TOL),
                    if good { "converged" } else { "NOT converged" }
                );
                println!("wrote {}", path.display());
            }
            Err(e) => println!("x0 = {x0:?}: {e}"),
        }
    }
    println!("{converged} of {} trajectories converged", starts.len());
    let passed = audit.passed() && converged == starts.len();
    println!("verify: {}", if passed { "pass" } else { "FAIL" });
    Ok(passed)
}
