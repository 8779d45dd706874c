mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use axiflow::algebra;
use axiflow::monitors;
use axiflow::ovaloid::{self, BlowdownRow, NormalizedRun};
use axiflow::record::{RecordError, RunRecord};
use axiflow::speeds;
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{Config, ConfigError};

/// Environment variable overriding the output directory of the config file.
const OUT_ENV: &str = "AXIFLOW_OUT";

#[derive(Parser)]
#[command(name = "axiflow", version, about = "Curvature flows of axially symmetric convex hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Exit with status 4 when an audit, check or family fails.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads for parallel family builds.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (overrides the config file and $AXIFLOW_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run one flow and store its record.
    Simulate,
    /// Audit a stored record, or simulate and audit.
    Audit,
    /// Build the normalized approximant family.
    Ovaloid,
    /// Blow down one normalized approximant.
    Blowdown,
    /// Randomized check of the curvature identities.
    VerifyAlgebra,
    /// Check the structural assumptions on the configured speed.
    Speeds,
}

enum Failure {
    Config(String),
    Compute(String),
    Strict(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Compute(_) => 3,
            Failure::Strict(_) => 4,
            Failure::Io(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Compute(m) | Failure::Strict(m) | Failure::Io(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<RecordError> for Failure {
    fn from(e: RecordError) -> Self {
        match e {
            RecordError::Io(_) | RecordError::Json(_) => Failure::Io(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

fn compute<E: Into<axiflow::Error>>(e: E) -> Failure {
    match e.into() {
        axiflow::Error::Record(r) => r.into(),
        other => Failure::Compute(other.to_string()),
    }
}

struct Ctx {
    cfg: Config,
    out: PathBuf,
    strict: bool,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn strict_check(ctx: &Ctx, pass: bool, what: &str) -> Result<(), Failure> {
    if ctx.strict && !pass {
        return Err(Failure::Strict(format!("{what} failed")));
    }
    Ok(())
}

fn simulate(ctx: &Ctx) -> Result<RunRecord, Failure> {
    let speed = ctx.cfg.speed()?;
    let record = axiflow::run(&ctx.cfg.initial_curve()?, &speed, &ctx.cfg.run_options()).map_err(compute)?;
    let dir = ctx.out.join("run");
    record.write_dir(&dir)?;
    let last = record.last().expect("runs record at least one checkpoint");
    println!(
        "{}: {:?} after {} steps, t = {}, a/b = {:.6}, record in {}",
        speed.id(),
        record.meta.terminal,
        record.meta.steps,
        last.t,
        last.ratio,
        dir.display()
    );
    Ok(record)
}

fn audit(ctx: &Ctx) -> Result<(), Failure> {
    let speed = ctx.cfg.speed()?;
    let record = match &ctx.cfg.audit.record {
        Some(dir) => RunRecord::read_dir(dir)?,
        None => simulate(ctx)?,
    };
    let report = monitors::audit(&record, &speed, &ctx.cfg.tolerances).map_err(compute)?;
    write_json(&ctx.out.join("audit.json"), &report)?;
    for c in &report.checks {
        println!("{:<20} {} margin {:+.3e} at t = {}", c.name, if c.pass { "pass" } else { "FAIL" }, c.worst_margin, c.worst_time);
    }
    strict_check(ctx, report.pass, "audit")
}

fn write_blowdown_csv(path: &Path, rows: &[BlowdownRow]) -> Result<(), Failure> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "S,t_sample,mid_radius,lambda_mid,cylinder_radius_ref,mismatch")?;
    for r in rows {
        writeln!(w, "{:e},{:e},{:e},{:e},{:e},{:e}", r.s, r.t_sample, r.mid_radius, r.lambda_mid, r.cylinder_radius_ref, r.mismatch)?;
    }
    Ok(())
}

fn write_family_csvs(dir: &Path, runs: &[NormalizedRun]) -> Result<(), Failure> {
    let mut w = BufWriter::new(fs::File::create(dir.join("ratio.csv"))?);
    writeln!(w, "l,t,ratio")?;
    for r in runs {
        for c in &r.record.checkpoints {
            writeln!(w, "{:e},{:e},{:e}", r.l, c.t, c.ratio)?;
        }
    }
    let mut w = BufWriter::new(fs::File::create(dir.join("profiles.csv"))?);
    writeln!(w, "l,x,u")?;
    for r in runs {
        let curve = ovaloid::profile_at(r, -1.0).map_err(compute)?;
        for (x, u) in curve.x().iter().zip(curve.u()) {
            writeln!(w, "{:e},{:e},{:e}", r.l, x, u)?;
        }
    }
    Ok(())
}

fn family(ctx: &Ctx) -> Result<(), Failure> {
    let speed = ctx.cfg.speed()?;
    let fam = ovaloid::build_family(&ctx.cfg.ovaloid.lengths, &speed, &ctx.cfg.family_options()).map_err(compute)?;
    let b = &ctx.cfg.blowdown;
    let rows = match fam.runs.last() {
        Some(r) => ovaloid::blowdown(r, &speed, &b.scales, b.t_probe).unwrap_or_else(|e| {
            eprintln!("blowdown skipped: {e}");
            Vec::new()
        }),
        None => Vec::new(),
    };
    let report = fam.report(&rows);
    write_json(&ctx.out.join("family.json"), &report)?;
    write_family_csvs(&ctx.out, &fam.runs)?;
    write_blowdown_csv(&ctx.out.join("blowdown.csv"), &rows)?;
    for m in &report.members {
        println!("l = {:<6} T_l = {:.6e} Lambda = {:.6e} audit {}", m.l, m.t_l, m.lambda, if m.audit_pass { "pass" } else { "FAIL" });
    }
    for (l, e) in &fam.failures {
        println!("l = {l:<6} failed: {e}");
    }
    strict_check(ctx, !report.degraded, "family")
}

fn blowdown(ctx: &Ctx) -> Result<(), Failure> {
    let speed = ctx.cfg.speed()?;
    let b = &ctx.cfg.blowdown;
    let (run, _) = ovaloid::build_member(b.length, &speed, &ctx.cfg.family_options()).map_err(compute)?;
    let rows = ovaloid::blowdown(&run, &speed, &b.scales, b.t_probe).map_err(compute)?;
    write_blowdown_csv(&ctx.out.join("blowdown.csv"), &rows)?;
    for r in &rows {
        println!("S = {:<6} mid radius {:.6} (cylinder {:.6}), lambda_mid {:.3e}", r.s, r.mid_radius, r.cylinder_radius_ref, r.lambda_mid);
    }
    Ok(())
}

fn verify_algebra(ctx: &Ctx) -> Result<(), Failure> {
    let report = algebra::verify_suite(ctx.cfg.seed, ctx.cfg.algebra);
    write_json(&ctx.out.join("algebra.json"), &report)?;
    for c in &report.checks {
        println!("{:<28} {} worst {:.3e} (tol {:.0e}, {} samples)", c.name, if c.pass { "pass" } else { "FAIL" }, c.worst, c.tolerance, c.samples);
    }
    println!("violations: {}", report.violations);
    strict_check(ctx, report.pass, "algebra verification")
}

#[derive(Serialize)]
struct SpeedsReport {
    assumptions: speeds::AssumptionReport,
    tso_constant: f64,
    comparability: (f64, f64),
}

fn speeds_cmd(ctx: &Ctx) -> Result<(), Failure> {
    let speed = ctx.cfg.speed()?;
    let report = SpeedsReport {
        assumptions: speeds::verify_assumptions(&speed, ctx.cfg.speed_samples),
        tso_constant: speeds::tso_constant(&speed, 1001).map_err(compute)?,
        comparability: speeds::comparability_bounds(&speed, 1001),
    };
    write_json(&ctx.out.join("speeds.json"), &report)?;
    let a = &report.assumptions;
    println!("{}: {}", a.speed, if a.pass { "all assumptions hold" } else { "assumptions violated" });
    for f in &a.failures {
        println!("  {f}");
    }
    strict_check(ctx, a.pass, "speed assumptions")
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.validate()?;
    if let Some(k) = cli.jobs {
        if k == 0 {
            return Err(Failure::Config("--jobs must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| Failure::Config(e.to_string()))?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| cfg.output.dir.clone());
    fs::create_dir_all(&out)?;
    let ctx = Ctx { cfg, out, strict: cli.strict };
    match cli.command {
        Command::Simulate => simulate(&ctx).map(|_| ()),
        Command::Audit => audit(&ctx),
        Command::Ovaloid => family(&ctx),
        Command::Blowdown => blowdown(&ctx),
        Command::VerifyAlgebra => verify_algebra(&ctx),
        Command::Speeds => speeds_cmd(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
