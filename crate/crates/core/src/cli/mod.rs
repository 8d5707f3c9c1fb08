//! Command-line orchestration: argument parsing, output files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::functional::approx_morse_index;
use crate::linalg::Vector;
use crate::minmax::pipeline;
use crate::pair::{HilbertPair, SpherePoint};
use crate::problems::config::RunConfig;
use crate::problems::nls::NlsProblem;
use crate::verify::{self, geometry, Check, SuiteOptions, VerifyReport};

#[derive(Debug, Parser)]
#[command(name = "mpsphere", version, about = "Constrained mountain-pass runs on mass spheres")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the rayon default.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Geometry invariant residuals on random pairs, or on a stored pair.
    GeometryCheck {
        /// Pair file with `dim`, `gramE`, `gramH`.
        #[arg(long)]
        pair: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [3usize, 50, 400])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        samples: usize,
    },
    /// Approximate Morse index of a stored iterate.
    Morse {
        /// JSON-lines file written by `solve`.
        #[arg(long)]
        iterate: PathBuf,
        /// Zero-based line; defaults to the last line.
        #[arg(long)]
        line: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Count on all of `E` instead of the tangent space.
        #[arg(long)]
        free: bool,
    },
    /// ρ-sweep of the min-max levels as CSV.
    MpCurve,
    /// Full pipeline: PS records and the refined critical point.
    Solve {
        /// Also run the acceptance checks on the result.
        #[arg(long)]
        check: bool,
    },
    /// Randomized suite over geometry, second-order forms, descent and covers.
    VerifyLemmas {
        /// Reduced sample sizes.
        #[arg(long)]
        quick: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GeometryCheck { .. } => "geometry-check",
            Command::Morse { .. } => "morse",
            Command::MpCurve => "mp-curve",
            Command::Solve { .. } => "solve",
            Command::VerifyLemmas { .. } => "verify-lemmas",
        }
    }
}

/// A point written by `solve`, readable by `morse`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoredIterate {
    pub label: String,
    pub rho: f64,
    pub mu: f64,
    pub u: Vec<f64>,
}

impl StoredIterate {
    fn new(label: String, rho: f64, p: &SpherePoint) -> Self {
        StoredIterate { label, rho, mu: p.mu, u: p.u.iter().copied().collect() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Artifact {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Written next to the outputs as `manifest.json`; the only file carrying timings.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: Option<RunConfig>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub timings: Vec<StageTiming>,
    pub artifacts: Vec<Artifact>,
    pub exit_code: i32,
}

struct Run {
    out: PathBuf,
    artifacts: Vec<Artifact>,
    timings: Vec<StageTiming>,
}

impl Run {
    fn emit(&mut self, name: &str, content: &str) -> Result<()> {
        fs::write(self.out.join(name), content)?;
        self.artifacts.push(Artifact { file: name.to_string(), bytes: content.len(), sha256: hex::encode(Sha256::digest(content.as_bytes())) });
        Ok(())
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let r = f();
        self.timings.push(StageTiming { stage: stage.to_string(), seconds: t.elapsed().as_secs_f64() });
        r
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<String> {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(&it)?);
        s.push('\n');
    }
    Ok(s)
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    let p = path.as_ref().ok_or_else(|| Error::Config("this subcommand needs --config".into()))?;
    RunConfig::load(p)
}

fn read_iterate(path: &Path, line: Option<usize>) -> Result<StoredIterate> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let i = line.unwrap_or(lines.len().saturating_sub(1));
    let l = lines.get(i).ok_or_else(|| Error::Config(format!("{} has no line {i}", path.display())))?;
    serde_json::from_str(l).map_err(|e| Error::Config(format!("bad iterate line {i}: {e}")))
}

fn failed(checks: &[Check]) -> Option<String> {
    let bad: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if bad.is_empty() {
        None
    } else {
        Some(bad.join(", "))
    }
}

/// Runs one subcommand; every emitted file is hashed into the manifest.
fn execute(cli: &Cli, run: &mut Run, config: &mut Option<RunConfig>, seed: &mut u64) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::GeometryCheck { pair, dims, samples } => {
            *seed = g.seed.unwrap_or(0);
            let checks = match pair {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                    let pair = HilbertPair::from_json(&text)?;
                    run.timed("geometry", || geometry::geometry_suite_on(*seed, &pair, *samples))
                }
                None => run.timed("geometry", || geometry::geometry_suite(*seed, dims, *samples)),
            };
            let rep = VerifyReport::new(*seed, checks);
            run.emit("geometry_check.json", &json(&rep)?)?;
            if let Some(bad) = failed(&rep.checks) {
                return Err(Error::GeometryFailure(format!("failed checks: {bad}")));
            }
        }
        Command::Morse { iterate, line, theta, free } => {
            let cfg = load_config(&g.config)?;
            *seed = g.seed.unwrap_or(cfg.problem.seed);
            let problem = NlsProblem::new(&cfg.problem)?;
            *config = Some(cfg);
            let it = read_iterate(iterate, *line)?;
            let p = SpherePoint::new(problem.pair(), Vector::from_vec(it.u), it.mu)?;
            let phi = problem.phi(it.rho);
            let rep = run.timed("morse", || approx_morse_index(&phi, problem.pair(), &p, *theta, *free))?;
            run.emit("morse.json", &json(&rep)?)?;
        }
        Command::MpCurve => {
            let cfg = load_config(&g.config)?;
            *seed = g.seed.unwrap_or(cfg.problem.seed);
            let problem = NlsProblem::new(&cfg.problem)?;
            let (_, sw) = run.timed("sweep", || pipeline::sweep(&problem, &cfg))?;
            *config = Some(cfg);
            run.emit("mp_curve.csv", &sw.to_csv())?;
            run.emit("mp_sweep.json", &json(&sw)?)?;
        }
        Command::Solve { check } => {
            let cfg = load_config(&g.config)?;
            *seed = g.seed.unwrap_or(cfg.problem.seed);
            let problem = NlsProblem::new(&cfg.problem)?;
            let mut trace = Vec::new();
            let out = run.timed("solve", || pipeline::solve(&problem, &cfg, &mut trace));
            run.emit("deformation_trace.jsonl", &jsonl(&trace)?)?;
            let out = out?;
            run.emit("ps_records.jsonl", &jsonl(&out.records)?)?;
            run.emit("critical_point.json", &json(&out.critical)?)?;
            let mut points: Vec<StoredIterate> =
                out.records.iter().map(|r| StoredIterate::new(format!("ps-{}", r.n), r.rho_n, &r.u)).collect();
            points.push(StoredIterate::new("critical".into(), out.rho, &out.critical.point));
            run.emit("iterates.jsonl", &jsonl(&points)?)?;
            run.emit("mp_curve.csv", &out.sweep.to_csv())?;
            let k = out.selection.k_bound;
            let invalid: Vec<usize> = out.records.iter().filter(|r| r.accepted && !r.valid(k)).map(|r| r.n).collect();
            let mut problem_msg = None;
            if !invalid.is_empty() {
                problem_msg = Some(format!("records {invalid:?} fail their certificates"));
            }
            if *check {
                let checks = run.timed("checks", || verify::solve::solve_checks(&problem, &cfg, &out, *seed));
                let rep = VerifyReport::new(*seed, checks);
                run.emit("solve_checks.json", &json(&rep)?)?;
                if let Some(bad) = failed(&rep.checks) {
                    problem_msg = Some(format!("failed checks: {bad}"));
                }
            }
            *config = Some(cfg);
            if let Some(m) = problem_msg {
                return Err(Error::Certification(m));
            }
        }
        Command::VerifyLemmas { quick } => {
            *seed = g.seed.unwrap_or(0);
            let opts = if *quick {
                SuiteOptions { geometry_dims: vec![3, 20], geometry_seeds: 40, second_order_probes: 40, descent_instances: 40, cover_boxes: 20 }
            } else {
                SuiteOptions::default()
            };
            let rep = run.timed("verify", || verify::verify_lemmas(*seed, &opts));
            run.emit("verify_lemmas.json", &json(&rep)?)?;
            if let Some(bad) = failed(&rep.checks) {
                return Err(Error::Certification(format!("failed checks: {bad}")));
            }
        }
    }
    Ok(())
}

/// Runs `cli` and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let g = &cli.global;
    if let Some(n) = g.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already initialised: {e}");
        }
    }
    if let Err(e) = fs::create_dir_all(&g.out) {
        eprintln!("error: cannot create {}: {e}", g.out.display());
        return 1;
    }
    let mut run = Run { out: g.out.clone(), artifacts: Vec::new(), timings: Vec::new() };
    let mut config = None;
    let mut seed = 0;
    let code = match execute(cli, &mut run, &mut config, &mut seed) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    for a in &run.artifacts {
        println!("{}  {}", a.sha256, g.out.join(&a.file).display());
    }
    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        seed,
        threads: g.threads,
        timings: run.timings,
        artifacts: run.artifacts,
        exit_code: code,
    };
    match json(&manifest).map_err(Error::from).and_then(|s| fs::write(g.out.join("manifest.json"), s).map_err(Error::from)) {
        Ok(()) => code,
        Err(e) => {
            eprintln!("error: cannot write manifest: {e}");
            if code == 0 {
                1
            } else {
                code
            }
        }
    }
}
