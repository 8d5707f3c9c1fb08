//! Run configuration: problem description, tolerances and solver knobs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Interval,
    StarGraph,
}

/// Outer-end condition; the star-graph vertex is always Kirchhoff.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    /// `V = −depth` on `[a, b]` (edge coordinate on graphs), zero elsewhere.
    Well { depth: f64, a: f64, b: f64 },
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig::Zero
    }
}

fn default_p() -> f64 {
    8.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(rename = "type")]
    pub kind: ProblemKind,
    #[serde(default)]
    pub length: Option<f64>,
    #[serde(default)]
    pub edges: Option<Vec<f64>>,
    pub d: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    pub mu: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_steps: usize,
    pub bc: Bc,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub seed: u64,
    /// Parameter for `solve`; defaults to the best differentiability proxy of the sweep.
    #[serde(default)]
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub euler_lagrange: f64,
    pub monotone: f64,
    pub slope_agreement: f64,
    pub oracle_value: f64,
    pub sphere: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { euler_lagrange: 1e-8, monotone: 1e-9, slope_agreement: 0.1, oracle_value: 1e-3, sphere: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub path_nodes: usize,
    pub relax_max_iter: usize,
    pub relax_tol: f64,
    pub records: usize,
    pub alpha1: Option<f64>,
    pub positivize: bool,
    pub spike_margin: f64,
    pub newton_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            path_nodes: 33,
            relax_max_iter: 400,
            relax_tol: 1e-6,
            records: 8,
            alpha1: None,
            positivize: true,
            spike_margin: 0.05,
            newton_max_iter: 50,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `.json` as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => RunConfig::from_json(&text),
            _ => RunConfig::from_toml(&text),
        }
    }

    pub fn rho_grid(&self) -> Vec<f64> {
        let p = &self.problem;
        if p.rho_steps <= 1 {
            return vec![p.rho_min];
        }
        let n = p.rho_steps - 1;
        (0..=n).map(|i| p.rho_min + (p.rho_max - p.rho_min) * i as f64 / n as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        let bad = |m: String| Err(Error::Config(m));
        // mass-supercritical in one dimension: p > 2 + 4/N
        if !(p.p > 6.0) {
            return bad(format!("exponent p = {} must exceed 6", p.p));
        }
        if !(p.mu > 0.0) {
            return bad(format!("mass mu = {} must be positive", p.mu));
        }
        if !(p.rho_min > 0.0 && p.rho_min <= p.rho_max) {
            return bad(format!("rho interval [{}, {}] is invalid", p.rho_min, p.rho_max));
        }
        if p.rho_steps == 0 {
            return bad("rho_steps must be at least 1".into());
        }
        if let Some(r) = p.rho {
            if !(r > 0.0) {
                return bad(format!("rho = {r} must be positive"));
            }
        }
        match p.kind {
            ProblemKind::Interval => {
                if !p.length.is_some_and(|l| l > 0.0) {
                    return bad("interval needs a positive length".into());
                }
                if p.d < 3 {
                    return bad("interval needs d >= 3".into());
                }
            }
            ProblemKind::StarGraph => {
                let ok = p.edges.as_ref().is_some_and(|e| e.len() == 3 && e.iter().all(|&l| l > 0.0));
                if !ok {
                    return bad("star graph needs three positive edge lengths".into());
                }
                if p.d < 7 {
                    return bad("star graph needs d >= 7".into());
                }
            }
        }
        if let PotentialConfig::Well { depth, a, b } = p.potential {
            if !(depth.is_finite() && a < b) {
                return bad("well potential needs finite depth and a < b".into());
            }
        }
        let s = &self.solver;
        if s.path_nodes < 5 {
            return bad("solver.path_nodes must be at least 5".into());
        }
        if s.records == 0 {
            return bad("solver.records must be positive".into());
        }
        if let Some(a1) = s.alpha1 {
            // alpha = 1 for the p-power problems
            if !(a1 > 0.0 && a1 <= 1.0 / 6.0) {
                return bad(format!("alpha1 = {a1} must lie in (0, 1/6]"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[problem]
type = "interval"
length = 1.0
d = 50
mu = 1.0
rho_min = 1.0
rho_max = 3.0
rho_steps = 21
bc = "dirichlet"
"#;

    #[test]
    fn parses_minimal_toml_with_defaults() {
        let c = RunConfig::from_toml(BASIC).unwrap();
        assert_eq!(c.problem.p, 8.0);
        assert_eq!(c.problem.potential, PotentialConfig::Zero);
        assert_eq!(c.solver.path_nodes, 33);
        let g = c.rho_grid();
        assert_eq!(g.len(), 21);
        assert!((g[1] - 1.1).abs() < 1e-12 && g[20] == 3.0);
    }

    #[test]
    fn rejects_subcritical_exponent_and_unknown_keys() {
        let sub = BASIC.replace("mu = 1.0", "mu = 1.0\np = 6.0");
        assert!(matches!(RunConfig::from_toml(&sub), Err(Error::Config(_))));
        let extra = format!("{BASIC}\nbogus = 1\n");
        assert!(RunConfig::from_toml(&extra).is_err());
    }

    #[test]
    fn parses_well_potential_and_json() {
        let t = format!("{BASIC}\n[problem.potential]\nkind = \"well\"\ndepth = 4.0\na = 0.2\nb = 0.5\n");
        let c = RunConfig::from_toml(&t).unwrap();
        assert_eq!(c.problem.potential, PotentialConfig::Well { depth: 4.0, a: 0.2, b: 0.5 });
        let j = serde_json::to_string(&c).unwrap();
        let back = RunConfig::from_json(&j).unwrap();
        assert_eq!(back.problem.potential, c.problem.potential);
    }
}
