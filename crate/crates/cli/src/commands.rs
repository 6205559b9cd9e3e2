use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use frontlab::analytic;
use frontlab::brw::{self, BrwConfig};
use frontlab::config_io::{self, ConfigError, RunManifest};
use frontlab::dispersion::{self, Classification};
use frontlab::evolve::{self, auto_dt, fit_bramson, GridSpec, Stencil};
use frontlab::experiments;
use frontlab::kernel::KernelMeasure;
use frontlab::problem::Problem;
use frontlab::reaction::{OffspringLaw, ProbabilisticStatus, Reaction};
use frontlab::walks::{self, DriftWalkSpec};

use crate::{BrwArgs, Cli, Command, CriticalCheck, Global, ProblemArgs};

pub enum Status {
    Passed,
    Failed,
}

struct Check {
    name: &'static str,
    passed: bool,
    value: Value,
    limit: Value,
}

impl Check {
    fn new(name: &'static str, passed: bool, value: impl Into<Value>, limit: impl Into<Value>) -> Self {
        Check {
            name,
            passed,
            value: value.into(),
            limit: limit.into(),
        }
    }
}

/// Common tail of every command: records outputs, then prints either the
/// report or a failure document.
struct Run<'a> {
    global: &'a Global,
    command: &'static str,
    started: Instant,
    manifest: RunManifest,
}

impl<'a> Run<'a> {
    fn new(global: &'a Global, command: &'static str, seed: Option<u64>) -> Self {
        Run {
            global,
            command,
            started: Instant::now(),
            manifest: RunManifest::new(command, None, seed),
        }
    }

    fn set_hash(&mut self, hash: String) {
        self.manifest.spec_sha256 = Some(hash);
    }

    fn write_text(&mut self, path: &Path, text: &str) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.record_output(path)?;
        Ok(())
    }

    fn write_json(&mut self, path: &Path, value: &Value) -> Result<()> {
        config_io::write_json(path, value)?;
        self.manifest.record_output(path)?;
        Ok(())
    }

    fn finish(mut self, checks: Vec<Check>, report: Value, text: String) -> Result<Status> {
        if let Some(out) = &self.global.out {
            self.manifest.wall_time_seconds = self.started.elapsed().as_secs_f64();
            let mut name = out.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            config_io::write_json(&out.with_file_name(name), &self.manifest)?;
        }
        let failed: Vec<Value> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| json!({"check": c.name, "value": c.value, "limit": c.limit}))
            .collect();
        if failed.is_empty() {
            if self.global.json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{text}");
            }
            Ok(Status::Passed)
        } else {
            let doc = json!({
                "status": "failed",
                "command": self.command,
                "failures": failed,
                "report": report,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(Status::Failed)
        }
    }
}

pub fn run(cli: &Cli) -> Result<Status> {
    config_io::configure_threads(cli.global.threads)?;
    let g = &cli.global;
    match &cli.command {
        Command::Dispersion(p) => dispersion_cmd(g, p),
        Command::Classify(p) => classify_cmd(g, p),
        Command::Simulate {
            problem,
            dx,
            dt,
            horizon,
            thetas,
            window_width,
            anchor,
            no_recenter,
        } => simulate_cmd(
            g,
            problem,
            SimOverrides {
                dx: *dx,
                dt: dt.clone(),
                horizon: *horizon,
                thetas: thetas.clone(),
                window_width: *window_width,
                anchor: *anchor,
                no_recenter: *no_recenter,
            },
        ),
        Command::Fit {
            trace,
            theta,
            window,
            c_star,
        } => fit_cmd(g, trace, *theta, window, *c_star),
        Command::Brw { brw, x_step } => brw_cmd(g, brw, *x_step),
        Command::Duality { brw, dx, dt, z_limit } => duality_cmd(g, brw, *dx, *dt, *z_limit),
        Command::Ballot {
            kernel,
            reaction,
            mu,
            kernel_tilted,
            nu,
            c,
            d,
            t,
            x,
            l,
            trials,
            max_band,
        } => {
            let walk = if let Some(k) = kernel_tilted {
                WalkSource::Tilted {
                    path: k.clone(),
                    nu: nu.expect("required by clap"),
                    c: c.expect("required by clap"),
                }
            } else if let Some(k) = kernel {
                WalkSource::Base {
                    kernel: k.clone(),
                    reaction: reaction.clone(),
                    mu: *mu,
                }
            } else {
                bail!("ballot needs --kernel or --kernel-tilted");
            };
            ballot_cmd(g, walk, d, t, x, *l, *trials, *max_band)
        }
        Command::Critical {
            p,
            horizon,
            check,
            dx,
            dt,
        } => critical_cmd(g, *p, *horizon, *check, *dx, *dt),
        Command::TrappingFront {
            problem,
            depth,
            dx,
            horizon,
        } => trapping_cmd(g, problem, *depth, *dx, *horizon),
        Command::Validate { spec, kernel, reaction } => validate_cmd(g, spec.as_deref(), kernel.as_deref(), reaction.as_deref()),
    }
}

struct Loaded {
    problem: Problem,
    numerics: Option<config_io::Numerics>,
    hash: String,
    seed: Option<u64>,
}

fn load_problem(args: &ProblemArgs, default_reaction: Option<Reaction>, task: &str) -> Result<Loaded> {
    if let Some(spec) = &args.spec {
        let s = config_io::load(spec)?;
        return Ok(Loaded {
            seed: s.seed(task),
            problem: s.problem,
            numerics: s.numerics,
            hash: s.sha256,
        });
    }
    let kernel_path = args.kernel.as_ref().context("--kernel or --spec is required")?;
    let kernel = config_io::load_kernel(kernel_path)?;
    let reaction = match (&args.reaction, default_reaction) {
        (Some(path), _) => config_io::load_reaction(path)?,
        (None, Some(f)) => f,
        (None, None) => bail!("--reaction or --spec is required"),
    };
    let problem = Problem::new(kernel, args.mu.unwrap_or(1.0), reaction)?;
    let hash = config_io::sha256_hex(&serde_json::to_vec(&problem)?);
    Ok(Loaded {
        problem,
        numerics: None,
        hash,
        seed: None,
    })
}

fn dispersion_cmd(g: &Global, args: &ProblemArgs) -> Result<Status> {
    let loaded = load_problem(args, None, "dispersion")?;
    let p = &loaded.problem;
    let mut run = Run::new(g, "dispersion", None);
    run.set_hash(loaded.hash);
    let report = serde_json::to_value(dispersion::report(&p.kernel, p.mu, p.fprime0())?)?;
    if let Some(out) = &g.out {
        run.write_json(out, &report)?;
    }
    let text = serde_json::to_string_pretty(&report)?;
    run.finish(vec![], report, text)
}

fn classify_cmd(g: &Global, args: &ProblemArgs) -> Result<Status> {
    let loaded = load_problem(args, None, "classify")?;
    let p = &loaded.problem;
    let mut run = Run::new(g, "classify", None);
    run.set_hash(loaded.hash);
    let rep = dispersion::report(&p.kernel, p.mu, p.fprime0())?;
    let report = json!({
        "classification": rep.classification,
        "negative_speed": rep.negative_speed,
        "Xi": rep.xi,
    });
    if let Some(out) = &g.out {
        run.write_json(out, &report)?;
    }
    let text = format!("{:?}", rep.classification);
    run.finish(vec![], report, text)
}

struct SimOverrides {
    dx: Option<f64>,
    dt: Option<String>,
    horizon: Option<f64>,
    thetas: Option<Vec<f64>>,
    window_width: Option<f64>,
    anchor: Option<f64>,
    no_recenter: bool,
}

fn simulate_cmd(g: &Global, args: &ProblemArgs, o: SimOverrides) -> Result<Status> {
    let loaded = load_problem(args, None, "simulate")?;
    let p = &loaded.problem;
    let fp0 = p.fprime0();
    let base = loaded.numerics.as_ref();
    let dx = o.dx.or(base.map(|n| n.grid.dx)).context("--dx is required")?;
    let horizon = o.horizon.or(base.map(|n| n.horizon)).context("--horizon is required")?;
    let dt = match o.dt.as_deref() {
        None => base.map_or(auto_dt(p.mu, fp0), |n| n.dt),
        Some("auto") => auto_dt(p.mu, fp0),
        Some(s) => s.parse::<f64>().with_context(|| format!("--dt {s}: expected a number or auto"))?,
    };
    let thetas = o
        .thetas
        .or(base.map(|n| n.thetas.clone()))
        .unwrap_or_else(|| vec![0.1, 0.5, 0.9]);
    let (width, spec_anchor) = base.map_or((100.0, 0.5), |n| {
        let w = n.grid.x_max - n.grid.x_min;
        (w, -n.grid.x_min / w)
    });
    let width = o.window_width.unwrap_or(width);
    let anchor = o.anchor.unwrap_or(spec_anchor);
    let recenter = !o.no_recenter && base.is_none_or(|n| n.grid.recenter);
    let grid = GridSpec {
        dx,
        x_min: -anchor * width,
        x_max: (1.0 - anchor) * width,
        recenter,
    };
    let mut run = Run::new(g, "simulate", g.seed.or(loaded.seed));
    run.set_hash(loaded.hash);
    let trace = evolve::run(p, &grid, dt, horizon, &thetas)?;

    let classification = dispersion::classify(&p.kernel, p.mu, fp0);
    let mut meta = vec![
        ("classification".to_string(), format!("{classification:?}")),
        ("mu".to_string(), config_io::fmt_float(p.mu)),
        ("dx".to_string(), config_io::fmt_float(dx)),
        ("dt".to_string(), config_io::fmt_float(dt)),
    ];
    let mut speeds = json!(null);
    if classification == Classification::Regular {
        let (lambda, c) = dispersion::minimize_gamma(&p.kernel, p.mu, fp0)?;
        let grid_kernel = Stencil::from_kernel(&p.kernel, dx)?.to_measure()?;
        let (_, c_grid) = dispersion::minimize_gamma(&grid_kernel, p.mu, fp0)?;
        meta.push(("c_star".into(), config_io::fmt_float(c_grid)));
        meta.push(("c_star_continuum".into(), config_io::fmt_float(c)));
        meta.push(("lambda_star".into(), config_io::fmt_float(lambda)));
        speeds = json!({"c_star_grid": c_grid, "c_star": c, "lambda_star": lambda});
    }
    let csv = config_io::render_trace_csv(&trace, &meta);
    let flagged = trace.samples.iter().filter(|s| s.flagged).count();
    let last = trace.samples.last();
    let report = json!({
        "classification": classification,
        "samples": trace.samples.len(),
        "flagged": flagged,
        "final": last.map(|s| json!({"t": s.t, "sigma": s.sigma})),
        "speeds": speeds,
        "dt": dt,
    });
    let text = match &g.out {
        Some(out) => {
            run.write_text(out, &csv)?;
            format!(
                "{} samples written to {} ({flagged} flagged)",
                trace.samples.len(),
                out.display()
            )
        }
        None => csv.trim_end().to_string(),
    };
    let checks = vec![Check::new("no flagged samples", flagged == 0, flagged, 0)];
    run.finish(checks, report, text)
}

fn fit_cmd(g: &Global, path: &Path, theta: f64, window: &[f64], c_star: Option<f64>) -> Result<Status> {
    let (trace, meta) = config_io::read_trace_csv(path)?;
    let c = match c_star {
        Some(c) => c,
        None => meta
            .iter()
            .find(|(k, _)| k == "c_star")
            .context("trace has no c_star metadata; pass --c-star")?
            .1
            .parse::<f64>()?,
    };
    let mut run = Run::new(g, "fit", None);
    run.set_hash(config_io::sha256_file(path)?);
    let &[t_min, t_max] = window else {
        bail!("--window takes two values t_min,t_max");
    };
    let fit = fit_bramson(&trace, theta, c, (t_min, t_max))?;
    let report = serde_json::to_value(&fit)?;
    if let Some(out) = &g.out {
        run.write_json(out, &report)?;
    }
    let text = serde_json::to_string_pretty(&report)?;
    run.finish(vec![], report, text)
}

fn parse_kappa(s: &str) -> Result<OffspringLaw> {
    let mut probs = Vec::new();
    for pair in s.split(',') {
        let (k, p) = pair
            .split_once(':')
            .with_context(|| format!("offspring pair {pair:?} must be k:p"))?;
        probs.push((k.trim().parse::<u32>()?, p.trim().parse::<f64>()?));
    }
    Ok(OffspringLaw::new(probs)?)
}

fn brw_config(g: &Global, a: &BrwArgs) -> Result<BrwConfig> {
    let kernel = config_io::load_kernel(&a.kernel)?;
    let kappa = parse_kappa(&a.kappa)?;
    let mut cfg = BrwConfig::new(a.mu, kernel, a.r, kappa, a.t, a.trials, g.seed.unwrap_or(0));
    if let Some(cap) = a.cap {
        cfg.population_cap = cap;
    }
    if a.x_range.len() != 2 || a.x_range[0] >= a.x_range[1] {
        bail!("--x-range takes two increasing values lo,hi");
    }
    Ok(cfg)
}

fn brw_hash(cfg: &BrwConfig) -> Result<String> {
    Ok(config_io::sha256_hex(&serde_json::to_vec(cfg)?))
}

fn brw_cmd(g: &Global, a: &BrwArgs, x_step: f64) -> Result<Status> {
    let cfg = brw_config(g, a)?;
    if x_step.is_nan() || x_step <= 0.0 {
        bail!("--x-step must be positive");
    }
    let mut run = Run::new(g, "brw", Some(cfg.seed));
    run.set_hash(brw_hash(&cfg)?);
    let stats = brw::simulate(&cfg)?;
    let n = ((a.x_range[1] - a.x_range[0]) / x_step + 1e-9).floor() as usize;
    let rows: Vec<Vec<f64>> = (0..=n)
        .map(|i| {
            let x = a.x_range[0] + i as f64 * x_step;
            let (p, se) = stats.p_max_gt(x);
            vec![x, p, se]
        })
        .collect();
    let expected = cfg.expected_population(cfg.horizon);
    let z = (stats.mean_population - expected) / stats.population_stderr;
    let report = json!({
        "t": cfg.horizon,
        "trials": cfg.trials,
        "completed": stats.completed(),
        "aborted": stats.aborted,
        "mean_population": stats.mean_population,
        "population_stderr": stats.population_stderr,
        "expected_population": expected,
        "growth_z": z,
    });
    let meta = vec![("t".to_string(), config_io::fmt_float(cfg.horizon)), ("seed".to_string(), cfg.seed.to_string())];
    let csv = config_io::render_csv(&meta, &["x", "p_max_gt_x", "stderr"], &rows);
    let text = match &g.out {
        Some(out) => {
            run.write_text(out, &csv)?;
            format!(
                "E Z_t = {:.6} +- {:.6} (exact {expected:.6}); {} aborted; table in {}",
                stats.mean_population,
                stats.population_stderr,
                stats.aborted,
                out.display()
            )
        }
        None => csv.trim_end().to_string(),
    };
    let checks = vec![
        Check::new("growth within 3 stderr", z.abs() <= 3.0 || z.is_nan(), z, 3.0),
        Check::new("no aborted trials", stats.aborted == 0, stats.aborted, 0),
    ];
    run.finish(checks, report, text)
}

fn duality_cmd(g: &Global, a: &BrwArgs, dx: f64, dt: f64, z_limit: f64) -> Result<Status> {
    let cfg = brw_config(g, a)?;
    let mut run = Run::new(g, "duality", Some(cfg.seed));
    run.set_hash(brw_hash(&cfg)?);
    let rep = experiments::duality_experiment(&cfg, dx, dt, (a.x_range[0], a.x_range[1]))?;
    let rows: Vec<Vec<f64>> = rep.points.iter().map(|p| vec![p.x, p.pde, p.mc, p.stderr, p.z]).collect();
    let csv = config_io::render_csv(&[], &["x", "pde", "mc", "stderr", "z"], &rows);
    if let Some(out) = &g.out {
        run.write_text(out, &csv)?;
    }
    let text = format!(
        "max |z| = {:.4} over {} points ({} trials, {} aborted)",
        rep.max_abs_z,
        rep.points.len(),
        rep.trials,
        rep.aborted
    );
    let checks = vec![
        Check::new("max |z|", rep.passed(z_limit), rep.max_abs_z, z_limit),
        Check::new("no aborted trials", rep.aborted == 0, rep.aborted, 0),
    ];
    let report = serde_json::to_value(&rep)?;
    run.finish(checks, report, text)
}

enum WalkSource {
    Base {
        kernel: PathBuf,
        reaction: Option<PathBuf>,
        mu: f64,
    },
    Tilted {
        path: PathBuf,
        nu: f64,
        c: f64,
    },
}

#[allow(clippy::too_many_arguments)]
fn ballot_cmd(
    g: &Global,
    walk: WalkSource,
    d: &str,
    t_list: &[f64],
    x_list: &[f64],
    l: f64,
    trials: u64,
    max_band: f64,
) -> Result<Status> {
    let t0 = t_list.first().copied().context("--t needs at least one value")?;
    let (spec, hash, presets) = match walk {
        WalkSource::Base { kernel, reaction, mu } => {
            let j = config_io::load_kernel(&kernel)?;
            let f = match reaction {
                Some(path) => config_io::load_reaction(&path)?,
                None => Reaction::logistic(1.0)?,
            };
            let problem = Problem::new(j, mu, f)?;
            let fp0 = problem.fprime0();
            let (lambda, c) = dispersion::minimize_gamma(&problem.kernel, mu, fp0)?;
            let tilt = problem.kernel.tilt(mu, lambda, Some(c))?;
            let gamma = problem.reaction.validate().holder_gamma;
            let d_value = resolve_d(d, Some(lambda), gamma)?;
            let hash = config_io::sha256_hex(&serde_json::to_vec(&problem)?);
            let presets = json!({
                "lambda_star": lambda,
                "bramson": -1.5 / lambda,
                "holder": gamma.map(|g| holder_d(g, lambda)),
            });
            (DriftWalkSpec::from_tilt(&tilt, c, d_value, t0, l)?, hash, presets)
        }
        WalkSource::Tilted { path, nu, c } => {
            let k: KernelMeasure = config_io::load_kernel(&path)?;
            let d_value = resolve_d(d, None, None)?;
            let hash = config_io::sha256_file(&path)?;
            (DriftWalkSpec::new(nu, k.reverse(), c, d_value, t0, l)?, hash, json!(null))
        }
    };
    let seed = g.seed.unwrap_or(0);
    let mut run = Run::new(g, "ballot", Some(seed));
    run.set_hash(hash);
    let rep = walks::ballot_band_check(&spec, t_list, x_list, trials, seed)?;
    let rows: Vec<Vec<f64>> = rep
        .points
        .iter()
        .map(|p| {
            vec![
                p.t,
                p.x,
                p.estimate.value,
                p.estimate.stderr,
                p.ratio,
                p.inconclusive as u8 as f64,
            ]
        })
        .collect();
    let meta = vec![
        ("D".to_string(), config_io::fmt_float(spec.d)),
        ("L".to_string(), config_io::fmt_float(l)),
        ("nu".to_string(), config_io::fmt_float(spec.nu)),
        ("c".to_string(), config_io::fmt_float(spec.drift_c)),
        ("trials".to_string(), trials.to_string()),
    ];
    let csv = config_io::render_csv(&meta, &["t", "x", "z", "stderr", "ratio", "inconclusive"], &rows);
    if let Some(out) = &g.out {
        run.write_text(out, &csv)?;
    }
    let inconclusive = rep.points.iter().filter(|p| p.inconclusive).count();
    let text = format!(
        "D = {:.6}: ratio band [{:.4}, {:.4}], max/min = {:.3}; {inconclusive} inconclusive points",
        rep.d, rep.band_min, rep.band_max, rep.band_ratio
    );
    let checks = vec![
        Check::new("band ratio", rep.band_ratio <= max_band, rep.band_ratio, max_band),
        Check::new("inconclusive points", inconclusive == 0, inconclusive, 0),
    ];
    let report = json!({"ballot": rep, "presets": presets});
    run.finish(checks, report, text)
}

/// `D_γ = max{(1/γ − 3/2)/λ*, 0} + 0.1`.
fn holder_d(gamma: f64, lambda: f64) -> f64 {
    ((1.0 / gamma - 1.5) / lambda).max(0.0) + 0.1
}

fn resolve_d(d: &str, lambda: Option<f64>, gamma: Option<f64>) -> Result<f64> {
    match d {
        "bramson" => Ok(-1.5 / lambda.context("the bramson preset needs --kernel")?),
        "holder" => {
            let lambda = lambda.context("the holder preset needs --kernel")?;
            let gamma = gamma.context("the reaction has no Holder exponent in (0, 1)")?;
            Ok(holder_d(gamma, lambda))
        }
        s => s
            .parse::<f64>()
            .with_context(|| format!("--D {s}: expected a number, bramson or holder")),
    }
}

fn critical_cmd(g: &Global, p: f64, horizon: f64, check: CriticalCheck, dx: f64, dt: Option<f64>) -> Result<Status> {
    let mut run = Run::new(g, "critical", None);
    run.set_hash(config_io::sha256_hex(
        format!("critical p={p} horizon={horizon} dx={dx} dt={dt:?}").as_bytes(),
    ));
    let mut checks = Vec::new();
    let mut report = serde_json::Map::new();
    let mut lines = Vec::new();
    if matches!(check, CriticalCheck::Riccati | CriticalCheck::All) {
        let mut times = Vec::new();
        let mut t = 1.0;
        while t <= horizon * (1.0 + 1e-12) {
            times.push(t);
            t *= 10.0;
        }
        let pts = experiments::riccati_errors(p, &times, dx, dt.unwrap_or(1e-3))?;
        let worst = pts.iter().map(|q| q.sup_error).fold(0.0, f64::max);
        checks.push(Check::new("riccati sup error", worst <= 1e-6, worst, 1e-6));
        lines.push(format!("Riccati: sup error {worst:.3e} at t in {times:?}"));
        report.insert("riccati".into(), serde_json::to_value(pts)?);
    }
    if matches!(check, CriticalCheck::Sandwich | CriticalCheck::All) {
        let r = experiments::critical_sandwich(p, 10.0, horizon, dx, dt.unwrap_or(0.01))?;
        let c = r.c_by_decade.last().map(|d| d.1);
        checks.push(Check::new("band violations", r.violations == 0, r.violations, 0));
        checks.push(Check::new(
            "subsolution excess",
            r.worst_sub_excess <= 1e-5,
            r.worst_sub_excess,
            1e-5,
        ));
        checks.push(Check::new(
            "supersolution excess",
            r.worst_super_excess <= 1e-5,
            r.worst_super_excess,
            1e-5,
        ));
        if r.c_by_decade.len() >= 2 {
            let stable = (r.c_last_decade_ratio - 1.0).abs() < 0.2;
            checks.push(Check::new("C over last decade", stable, r.c_last_decade_ratio, json!([0.8, 1.2])));
        }
        lines.push(format!(
            "sandwich: {} violations over {} samples, C = {}, C ratio over last decade {:.3}",
            r.violations,
            r.points.len(),
            c.map_or("n/a".to_string(), |c| format!("{c:.4}")),
            r.c_last_decade_ratio
        ));
        report.insert("sandwich".into(), serde_json::to_value(&r)?);
    }
    let report = Value::Object(report);
    if let Some(out) = &g.out {
        run.write_json(out, &report)?;
    }
    run.finish(checks, report, lines.join("\n"))
}

fn trapping_cmd(g: &Global, args: &ProblemArgs, depth: usize, dx: f64, horizon: Option<f64>) -> Result<Status> {
    let loaded = if args.spec.is_none() && args.kernel.is_none() {
        let problem = Problem::new(KernelMeasure::dirac(-1.0)?, 1.0, Reaction::logistic(2.0)?)?;
        let hash = config_io::sha256_hex(&serde_json::to_vec(&problem)?);
        Loaded {
            problem,
            numerics: None,
            hash,
            seed: None,
        }
    } else {
        load_problem(args, None, "trapping-front")?
    };
    let p = &loaded.problem;
    let mut run = Run::new(g, "trapping-front", None);
    run.set_hash(loaded.hash.clone());
    let front = analytic::trapping_front(p, depth, dx)?;
    let residual = analytic::stationary_residual(p, &front);
    let rows: Vec<Vec<f64>> = (0..front.values.len()).map(|i| vec![front.x(i), front.values[i]]).collect();
    let theta0 = analytic::forbidden_band(p).ok();
    let mut meta = vec![("depth".to_string(), depth.to_string()), ("dx".to_string(), config_io::fmt_float(dx))];
    if let Some(t0) = theta0 {
        meta.push(("theta0".to_string(), config_io::fmt_float(t0)));
    }
    let csv = config_io::render_csv(&meta, &["x", "U"], &rows);
    if let Some(out) = &g.out {
        run.write_text(out, &csv)?;
    }
    let mut report = json!({
        "points": rows.len(),
        "theta0": theta0,
        "stationary_residual": residual,
        "U_at_minus_depth": front.values[0],
    });
    let mut text = format!(
        "front on [-{depth}, 0] with {} points; U(-{depth}) = {:.6}; stationary residual {residual:.3e}",
        rows.len(),
        front.values[0]
    );
    let mut checks = Vec::new();
    if let Some(h) = horizon {
        let thetas = [0.1, 0.5, 0.9];
        let r = experiments::trapping_check(p, &thetas, h, dx, auto_dt(p.mu, p.fprime0()), depth)?;
        checks.push(Check::new("level-set width", r.width <= 5.0, r.width, 5.0));
        checks.push(Check::new(
            "u above front",
            r.worst_front_excess <= 1e-9,
            r.worst_front_excess,
            1e-9,
        ));
        text.push_str(&format!(
            "\nlevel sets in [{:.4}, {:.4}] up to t = {h}; max(U - u) = {:.3e}",
            r.sigma_min, r.sigma_max, r.worst_front_excess
        ));
        report["pde"] = serde_json::to_value(&r)?;
    }
    run.finish(checks, report, text)
}

fn validate_cmd(g: &Global, spec: Option<&Path>, kernel: Option<&Path>, reaction: Option<&Path>) -> Result<Status> {
    if spec.is_none() && kernel.is_none() && reaction.is_none() {
        bail!("validate needs --spec, --kernel or --reaction");
    }
    let mut run = Run::new(g, "validate", None);
    let mut checks = Vec::new();
    let mut report = serde_json::Map::new();
    let mut lines = Vec::new();
    let collect = |what: &'static str, res: std::result::Result<(), ConfigError>, checks: &mut Vec<Check>| -> Result<()> {
        match res {
            Ok(()) => Ok(()),
            Err(ConfigError::Invalid(issues)) => {
                checks.push(Check::new(what, false, serde_json::to_value(&issues)?, "no issues"));
                Ok(())
            }
            Err(e @ ConfigError::Parse { .. }) => {
                checks.push(Check::new(what, false, e.to_string(), "valid JSON"));
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    };
    let mut reactions = Vec::new();
    if let Some(path) = spec {
        run.set_hash(config_io::sha256_file(path)?);
        match config_io::load(path) {
            Ok(s) => {
                let p = &s.problem;
                let class = dispersion::classify(&p.kernel, p.mu, p.fprime0());
                lines.push(format!("spec {}: valid, {class:?}", path.display()));
                report.insert("classification".into(), serde_json::to_value(class)?);
                reactions.push(s.problem.reaction.clone());
            }
            Err(e) => collect("spec", Err(e), &mut checks)?,
        }
    }
    if let Some(path) = kernel {
        match config_io::load_kernel(path) {
            Ok(k) => {
                let (a, b) = k.support();
                lines.push(format!(
                    "kernel {}: valid, support [{a}, {b}], mean {:.6}, mass on (0, inf) {:.6}",
                    path.display(),
                    k.mean(),
                    k.positive_mass()
                ));
                report.insert("kernel".into(), json!({"mean": k.mean(), "variance": k.variance(), "positive_mass": k.positive_mass()}));
            }
            Err(e) => collect("kernel", Err(e), &mut checks)?,
        }
    }
    if let Some(path) = reaction {
        match config_io::load_reaction(path) {
            Ok(f) => reactions.push(f),
            Err(e) => collect("reaction", Err(e), &mut checks)?,
        }
    }
    for f in reactions {
        let v = f.validate();
        for c in &v.checks {
            lines.push(format!("{}: {}", c.name, if c.passed { "pass" } else { "FAIL" }));
        }
        if let Some(gamma) = v.holder_gamma {
            lines.push(format!("holder gamma {gamma}, C_F {:.6}", v.holder_cf.unwrap_or(f64::NAN)));
        }
        let note = match &v.probabilistic {
            ProbabilisticStatus::Probabilistic { r, g } => format!("probabilistic: r = {r}, g = {g:?}"),
            ProbabilisticStatus::NotProbabilistic { reason } => format!("not probabilistic: {reason}"),
            ProbabilisticStatus::Undetermined => "probabilistic status undetermined (not a polynomial)".to_string(),
        };
        lines.push(note.clone());
        for c in v.checks.iter().filter(|c| !c.passed) {
            checks.push(Check::new(c.name, false, json!(c.worst), "hypothesis holds"));
        }
        report.insert("reaction".into(), serde_json::to_value(&v)?);
        report.insert("note".into(), note.into());
    }
    run.finish(checks, Value::Object(report), lines.join("\n"))
}
