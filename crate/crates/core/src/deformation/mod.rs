//! Second-order descent deformations of maps `D → S_μ` and the min-max certification loop.

pub mod certify;
pub mod cover;
pub mod descent;
pub mod first_order;
pub mod homotopy;
pub mod iterate;

use serde::Serialize;

use crate::functional::ConstrainedFunctional;
use crate::geometry::{log_map, Geodesic};
use crate::error::Result;
use crate::pair::{HilbertPair, SpherePoint};

/// Floating-point slack allowed on measured decreases.
pub const DECREASE_SLACK: f64 = 1e-12;

/// A map `D → S_μ` sampled at parameter points; `fixed` marks `D₀`.
#[derive(Clone, Debug)]
pub struct DiscreteMap {
    pub params: Vec<Vec<f64>>,
    pub nodes: Vec<SpherePoint>,
    pub fixed: Vec<bool>,
}

impl DiscreteMap {
    /// A path on `[0, 1]` through `nodes`, pinned at both ends.
    pub fn path(nodes: Vec<SpherePoint>) -> Self {
        let n = nodes.len();
        let params = (0..n).map(|i| vec![i as f64 / (n - 1).max(1) as f64]).collect();
        let mut fixed = vec![false; n];
        fixed[0] = true;
        fixed[n - 1] = true;
        DiscreteMap { params, nodes, fixed }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn param_dim(&self) -> usize {
        self.params.first().map_or(0, |p| p.len())
    }

    pub fn values<F: ConstrainedFunctional + ?Sized>(&self, f: &F) -> Vec<f64> {
        self.nodes.iter().map(|p| f.value(&p.u)).collect()
    }

    pub fn max_value<F: ConstrainedFunctional + ?Sized>(&self, f: &F) -> (usize, f64) {
        self.values(f)
            .into_iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc })
    }

    /// Largest E-distance between consecutive nodes (paths only).
    pub fn mesh_size(&self, pair: &HilbertPair) -> f64 {
        self.nodes.windows(2).map(|w| pair.norm_e(&(&w[1].u - &w[0].u))).fold(0.0, f64::max)
    }

    /// Inserts geodesic midpoints between consecutive nodes whenever the E-distance exceeds
    /// `h` and `near(i)` holds for one of the two ends. Paths only.
    pub fn refine_path(&mut self, pair: &HilbertPair, h: f64, near: impl Fn(&SpherePoint) -> bool, cap: usize) -> Result<usize> {
        let mut inserted = 0;
        loop {
            let mut nodes = Vec::with_capacity(self.nodes.len() * 2);
            let mut changed = false;
            for i in 0..self.nodes.len() {
                nodes.push(self.nodes[i].clone());
                if i + 1 == self.nodes.len() {
                    break;
                }
                let (a, b) = (&self.nodes[i], &self.nodes[i + 1]);
                if pair.norm_e(&(&b.u - &a.u)) > h && (near(a) || near(b)) {
                    let v = log_map(pair, a, b)?;
                    nodes.push(Geodesic::new(pair, a, &v).eval(0.5).0);
                    changed = true;
                    inserted += 1;
                }
            }
            if nodes.len() > cap {
                return Err(crate::error::Error::BudgetExceeded(format!(
                    "path refinement to mesh {h:.3e} needs more than {cap} nodes"
                )));
            }
            let fixed_ends = (self.fixed[0], *self.fixed.last().expect("nonempty"));
            *self = DiscreteMap::path(nodes);
            self.fixed[0] = fixed_ends.0;
            let last = self.fixed.len() - 1;
            self.fixed[last] = fixed_ends.1;
            if !changed {
                return Ok(inserted);
            }
        }
    }
}

/// One audited node update.
#[derive(Clone, Debug, Serialize)]
pub struct TraceRow {
    pub stage: String,
    pub node: usize,
    pub before: f64,
    pub after: f64,
    pub displacement: f64,
}
