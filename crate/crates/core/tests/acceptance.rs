//! End-to-end acceptance run through the binary; one PASS/FAIL line per criterion.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use mpsphere::cli::StoredIterate;
use mpsphere::linalg::Vector;
use mpsphere::pair::SpherePoint;
use mpsphere::problems::config::RunConfig;
use mpsphere::problems::nls::NlsProblem;
use mpsphere::verify::solve::mesh_convergence;
use serde_json::Value;

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/nls_interval.toml")
}

/// Exit code and wall time of one binary run.
fn run(args: &[&str], config: Option<&Path>, out: &Path) -> (Option<i32>, f64) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mpsphere"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    let t = Instant::now();
    let st = cmd.status().expect("binary runs");
    (st.code(), t.elapsed().as_secs_f64())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

/// `worst` per check name; `null` (a NaN) becomes infinity.
fn worst_by_name(report: &Value) -> BTreeMap<String, f64> {
    report["checks"]
        .as_array()
        .expect("checks array")
        .iter()
        .map(|c| (c["name"].as_str().unwrap().to_string(), c["worst"].as_f64().unwrap_or(f64::INFINITY)))
        .collect()
}

struct Criterion {
    failures: Vec<String>,
    details: Vec<String>,
}

impl Criterion {
    fn new() -> Self {
        Criterion { failures: Vec::new(), details: Vec::new() }
    }

    /// `worst ≤ tol` for a named check.
    fn at_most(&mut self, w: &BTreeMap<String, f64>, name: &str, tol: f64) {
        match w.get(name) {
            Some(&v) if v <= tol => self.details.push(format!("{name} {v:.3e}")),
            Some(&v) => self.failures.push(format!("{name} {v:.3e} > {tol:e}")),
            None => self.failures.push(format!("{name} missing")),
        }
    }

    fn require(&mut self, ok: bool, what: String) {
        if ok {
            self.details.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn finish(self, id: usize, title: &str, all: &mut Vec<(usize, bool)>) {
        let passed = self.failures.is_empty();
        let body = if passed { self.details.join("; ") } else { self.failures.join("; ") };
        let line = format!("{} criterion {id} ({title}): {body}\n", if passed { "PASS" } else { "FAIL" });
        // bypasses the harness capture so the lines show in plain `cargo test` output
        std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
        all.push((id, passed));
    }
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Vec<String> {
    names
        .iter()
        .filter(|n| fs::read(a.join(n)).ok().is_none_or(|x| Some(x) != fs::read(b.join(n)).ok()))
        .map(|n| n.to_string())
        .collect()
}

#[test]
fn acceptance() {
    let root = tempfile::tempdir().unwrap();
    let dir = |n: &str| {
        let p = root.path().join(n);
        fs::create_dir_all(&p).unwrap();
        p
    };
    let mut all = Vec::new();

    // the randomized suite, twice
    let (v1, v2) = (dir("verify1"), dir("verify2"));
    let (code_v1, _) = run(&["verify-lemmas", "--seed", "7"], None, &v1);
    let (code_v2, _) = run(&["verify-lemmas", "--seed", "7"], None, &v2);
    let lemmas = read_json(&v1.join("verify_lemmas.json"));
    let lw = worst_by_name(&lemmas);
    let verify_seconds = read_json(&v1.join("manifest.json"))["timings"][0]["seconds"].as_f64().unwrap_or(f64::INFINITY);

    // the bundled solve, twice
    let (s1, s2) = (dir("solve1"), dir("solve2"));
    let cfg_path = bundled();
    let (code_s1, _) = run(&["solve", "--check", "--seed", "7"], Some(&cfg_path), &s1);
    let (code_s2, _) = run(&["solve", "--check", "--seed", "7"], Some(&cfg_path), &s2);
    let sw = if s1.join("solve_checks.json").exists() { worst_by_name(&read_json(&s1.join("solve_checks.json"))) } else { BTreeMap::new() };

    let mut c = Criterion::new();
    c.at_most(&lw, "geometry.sphere_preservation", 1e-10);
    c.at_most(&lw, "geometry.speed_conservation", 1e-10);
    c.at_most(&lw, "geometry.exp_log_round_trip", 1e-9);
    c.at_most(&lw, "geometry.transport_isometry", 1e-6);
    c.at_most(&lw, "geometry.transport_tangency", 1e-6);
    c.at_most(&lw, "geometry.transport_difference_bound", 1.0);
    c.at_most(&lw, "geometry.tmax_containment", 1.0);
    c.require(verify_seconds <= 120.0, format!("suite time {verify_seconds:.1}s"));
    c.finish(1, "geometry suite, d in {3,50,400}, 500 seeds", &mut all);

    let mut c = Criterion::new();
    c.at_most(&lw, "second_order.geodesic_identity", 1e-4);
    c.at_most(&sw, "second_order.hessian_at_critical_point", 1e-6);
    c.finish(2, "second-order identity", &mut all);

    let mut c = Criterion::new();
    for name in ["descent.beta_over_12", "descent.beta_over_24", "descent_nls.beta_over_12", "descent_nls.beta_over_24"] {
        c.at_most(if name.starts_with("descent_nls") { &sw } else { &lw }, name, 1e-12);
    }
    c.finish(3, "descent certificates", &mut all);

    let mut c = Criterion::new();
    c.at_most(&lw, "cover.coverage", 0.0);
    c.at_most(&lw, "cover.multiplicity_lemma_bound", 1.0);
    c.finish(4, "covering", &mut all);

    // ρ ∈ [1, 3], 21 points, d = 200
    let mut c = Criterion::new();
    let mut sweep_cfg = fs::read_to_string(&cfg_path).unwrap();
    for (from, to) in [("d = 800", "d = 200"), ("rho = 1.5\n", ""), ("rho_min = 1.4", "rho_min = 1.0"), ("rho_max = 1.6", "rho_max = 3.0")] {
        sweep_cfg = sweep_cfg.replace(from, to);
    }
    let sweep_dir = dir("sweep");
    let sweep_path = sweep_dir.join("sweep.toml");
    fs::write(&sweep_path, &sweep_cfg).unwrap();
    let parsed = RunConfig::from_toml(&sweep_cfg).unwrap();
    c.require(parsed.problem.d == 200 && parsed.rho_grid().len() == 21, format!("d {} grid {}", parsed.problem.d, parsed.rho_grid().len()));
    let (code, seconds) = run(&["mp-curve"], Some(&sweep_path), &sweep_dir);
    c.require(code == Some(0), format!("exit {code:?}"));
    let column: Vec<f64> = fs::read_to_string(sweep_dir.join("mp_curve.csv"))
        .unwrap_or_default()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).and_then(|x| x.parse().ok()).unwrap_or(f64::NAN))
        .collect();
    let rise = column.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    c.require(column.len() == 21 && rise <= 1e-9, format!("{} rows, max increase {rise:.3e}", column.len()));
    c.require(seconds <= 600.0, format!("{seconds:.1}s"));
    c.finish(5, "rho sweep", &mut all);

    let mut c = Criterion::new();
    c.require(code_s1 == Some(0), format!("exit {code_s1:?}"));
    c.at_most(&sw, "ps.accepted", 0.0);
    c.at_most(&sw, "ps.dual_norm", 1.0);
    c.at_most(&sw, "ps.norm_bound", 1.0);
    c.at_most(&sw, "ps.approximate_morse", 1.0);
    c.at_most(&sw, "ps.zeta_decreasing", 0.0);
    c.at_most(&sw, "critical.euler_lagrange", 1e-8);
    c.at_most(&sw, "critical.morse", 1.0);
    c.at_most(&sw, "critical.free_morse", 2.0);
    c.at_most(&sw, "critical.nonnegative_nodes", 0.0);
    c.at_most(&sw, "oracle.shooting", 1e-3);
    c.at_most(&sw, "oracle.constant_lambda", 1e-10);
    let records = fs::read_to_string(s1.join("ps_records.jsonl")).unwrap_or_default().lines().count();
    c.require(records > 0, format!("{records} PS records"));
    c.finish(6, "end-to-end solve", &mut all);

    // d = 100 → 200 → 400 from the refined point
    let mut c = Criterion::new();
    let cfg = RunConfig::load(&cfg_path).unwrap();
    let critical = fs::read_to_string(s1.join("iterates.jsonl"))
        .ok()
        .and_then(|t| t.lines().last().map(|l| serde_json::from_str::<StoredIterate>(l).unwrap()));
    match critical {
        Some(it) => {
            let problem = NlsProblem::new(&cfg.problem).unwrap();
            let point = SpherePoint::new(problem.pair(), Vector::from_vec(it.u), it.mu).unwrap();
            match mesh_convergence(&cfg, it.rho, 100, &problem, &point) {
                Ok(m) => {
                    let values: Vec<String> = m.levels.iter().map(|l| format!("d={} {:.9}", l.d, l.value)).collect();
                    c.require(m.order >= 1.8, format!("order {:.4} ({})", m.order, values.join(", ")));
                }
                Err(e) => c.require(false, format!("mesh study failed: {e}")),
            }
        }
        None => c.require(false, "no refined point".into()),
    }
    c.finish(7, "mesh convergence", &mut all);

    let mut c = Criterion::new();
    c.require(code_v1 == code_v2 && code_s1 == code_s2, format!("exit codes {code_v1:?}/{code_v2:?}, {code_s1:?}/{code_s2:?}"));
    let diff_v = same_files(&v1, &v2, &["verify_lemmas.json"]);
    let diff_s = same_files(&s1, &s2, &["ps_records.jsonl", "critical_point.json", "iterates.jsonl", "mp_curve.csv", "solve_checks.json"]);
    c.require(diff_v.is_empty() && diff_s.is_empty(), format!("differing files {diff_v:?} {diff_s:?}"));
    c.finish(8, "determinism", &mut all);

    let failed: Vec<usize> = all.iter().filter(|(_, p)| !p).map(|(i, _)| *i).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
