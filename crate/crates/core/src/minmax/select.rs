//! Paths with bounded tops along `ρ_n ↑ ρ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::ConstrainedFunctional;
use crate::pair::HilbertPair;

use super::family::{Phi, RhoFamily};
use super::path::{relax, DiscretePath, RelaxOptions};
use super::positivize;

/// `ρ_n = ρ(1 − 2^{−n−2})` for the first `count` indices `n` with `ρ_n ≥ ρ_min`.
pub fn rho_schedule(rho: f64, rho_min: f64, count: usize) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(count);
    let mut n = 0usize;
    while out.len() < count && n < 60 {
        let r = rho * (1.0 - 0.5f64.powi(n as i32 + 2));
        if r >= rho_min {
            out.push((n, r));
        }
        n += 1;
    }
    out
}

/// `ε_n = (2 − c′)(ρ − ρ_n)`.
pub fn eps_n(slope: f64, rho: f64, rho_n: f64) -> f64 {
    (2.0 - slope) * (rho - rho_n)
}

#[derive(Clone, Debug, Serialize)]
pub struct Selection {
    pub n: usize,
    pub rho_n: f64,
    pub eps_n: f64,
    /// `max Φ_ρ(γ_n)` against `c_ρ + ε_n`.
    pub max_value: f64,
    /// Largest E-norm over the nodes with `Φ_ρ ≥ c_ρ − ε_n`.
    pub top_norm: f64,
    pub relax_top_dual: f64,
    #[serde(skip)]
    pub path: DiscretePath,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectionReport {
    pub rho: f64,
    pub c_rho: f64,
    pub slope: f64,
    /// `K` with every high node of every `γ_n` inside `B(0, K)`.
    pub k_bound: f64,
    pub selections: Vec<Selection>,
}

/// For each `ρ_n`, relaxes the best pool path under `Φ_{ρ_n}` and checks
/// `max Φ_ρ(γ_n) ≤ c_ρ + ε_n`; nodes are replaced by their modulus when `positive`.
#[allow(clippy::too_many_arguments)]
pub fn bounded_tops_select<F: RhoFamily + ?Sized>(
    family: &F,
    pair: &HilbertPair,
    rho: f64,
    c_rho: f64,
    slope: f64,
    rho_seq: &[(usize, f64)],
    pool: &[DiscretePath],
    opts: &RelaxOptions,
    positive: bool,
) -> Result<SelectionReport> {
    if !(2.0 - slope > 0.0) {
        return Err(Error::SelectionFailure(format!("slope {slope} leaves no admissible window")));
    }
    if pool.is_empty() {
        return Err(Error::SelectionFailure("empty path pool".into()));
    }
    let phi = Phi::new(family, rho);
    let mut candidates: Vec<DiscretePath> = pool.to_vec();
    let mut selections = Vec::with_capacity(rho_seq.len());
    let mut k_bound: f64 = 0.0;
    for &(n, rho_n) in rho_seq {
        if !(rho_n < rho) {
            return Err(Error::SelectionFailure(format!("rho_n = {rho_n} is not below rho = {rho}")));
        }
        let eps = eps_n(slope, rho, rho_n);
        let phi_n = Phi::new(family, rho_n);
        let best = candidates
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.top(&phi_n).1.total_cmp(&b.1.top(&phi_n).1))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (mut path, rep) = relax(&phi_n, pair, &candidates[best], opts)?;
        log::debug!(
            "n = {n}: start path {best} with top {:.10e}, relaxed top {:.10e} at node {}",
            candidates[best].top(&phi_n).1,
            rep.top_value,
            rep.top_index
        );
        if positive {
            let last = path.len() - 1;
            for (i, p) in path.nodes.iter_mut().enumerate() {
                if i != 0 && i != last {
                    *p = positivize(family, pair, p)?;
                }
            }
        }
        let (_, max_value) = path.top(&phi);
        if max_value > c_rho + eps {
            return Err(Error::SelectionFailure(format!(
                "n = {n}: max Phi_rho = {max_value:.10e} exceeds c_rho + eps_n = {:.10e} (relaxed top dual {:.3e})",
                c_rho + eps,
                rep.top_dual_norm
            )));
        }
        let top_norm = path
            .nodes
            .iter()
            .filter(|p| phi.value(&p.u) >= c_rho - eps)
            .map(|p| pair.norm_e(&p.u))
            .fold(0.0, f64::max);
        k_bound = k_bound.max(top_norm);
        candidates.push(path.clone());
        selections.push(Selection { n, rho_n, eps_n: eps, max_value, top_norm, relax_top_dual: rep.top_dual_norm, path });
    }
    Ok(SelectionReport { rho, c_rho, slope, k_bound, selections })
}
