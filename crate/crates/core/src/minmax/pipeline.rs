//! The full NLS pipeline: endpoints, ρ-sweep, selection at a proxy point, PS extraction
//! and refinement.

use serde::Serialize;

use crate::deformation::certify::alpha1_max;
use crate::deformation::TraceRow;
use crate::error::{Error, Result};
use crate::functional::ConstrainedFunctional;
use crate::problems::config::{RunConfig, SolverConfig};
use crate::problems::nls::{Endpoints, NlsProblem};

use super::family::RhoFamily;
use super::level::{rho_sweep, SweepReport};
use super::path::{DiscretePath, RelaxOptions};
use super::ps::{extract_ps, PsRecord};
use super::refine::{refine_limit, CriticalPointReport};
use super::select::{bounded_tops_select, rho_schedule, SelectionReport};

pub fn relax_options(s: &SolverConfig) -> RelaxOptions {
    RelaxOptions { max_iter: s.relax_max_iter, tol: s.relax_tol, climbing: true, polish: s.newton_max_iter }
}

/// Endpoints and the one-path starting pool (the geodesic `w1 → w2`).
pub fn initial_pool(problem: &NlsProblem, solver: &SolverConfig) -> Result<(Endpoints, Vec<DiscretePath>)> {
    let ep = problem.endpoints(solver.spike_margin)?;
    let path = DiscretePath::geodesic(problem.pair(), &ep.w1, &ep.w2, solver.path_nodes)?;
    Ok((ep, vec![path]))
}

pub fn sweep(problem: &NlsProblem, cfg: &RunConfig) -> Result<(Endpoints, SweepReport)> {
    let (ep, pool) = initial_pool(problem, &cfg.solver)?;
    let rep = rho_sweep(problem, problem.pair(), &cfg.rho_grid(), pool, &relax_options(&cfg.solver), cfg.tolerances.slope_agreement)?;
    Ok((ep, rep))
}

/// Row of the configured `ρ` (which must be a grid point), else the best proxy.
pub fn choose_rho(cfg: &RunConfig, sweep: &SweepReport) -> Result<usize> {
    let i = match cfg.problem.rho {
        Some(r) => sweep
            .rows
            .iter()
            .position(|row| (row.rho - r).abs() <= 1e-9 * r.abs().max(1.0))
            .ok_or_else(|| Error::Config(format!("rho = {r} is not a point of the rho grid")))?,
        None => sweep
            .best_proxy()
            .ok_or_else(|| Error::GeometryFailure("no grid point qualifies as a differentiability proxy".into()))?,
    };
    let row = &sweep.rows[i];
    if !row.geometry_ok {
        return Err(Error::GeometryFailure(format!("rho = {}: {}", row.rho, row.message.clone().unwrap_or_default())));
    }
    if !row.proxy {
        return Err(Error::HypothesisViolated(format!(
            "rho = {} is not a differentiability proxy (slopes {:?}, {:?})",
            row.rho, row.slope_left, row.slope_right
        )));
    }
    Ok(i)
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveOutput {
    pub rho: f64,
    pub c_rho: f64,
    pub slope: f64,
    pub alpha1: f64,
    pub spike_width: f64,
    pub endpoint_values: [f64; 2],
    pub sweep: SweepReport,
    pub selection: SelectionReport,
    pub records: Vec<PsRecord>,
    pub critical: CriticalPointReport,
}

pub fn solve(problem: &NlsProblem, cfg: &RunConfig, trace: &mut Vec<TraceRow>) -> Result<SolveOutput> {
    let (ep, sw) = sweep(problem, cfg)?;
    let i = choose_rho(cfg, &sw)?;
    let row = &sw.rows[i];
    let (rho, c_rho) = (row.rho, row.c_rho);
    let slope = row.slope().expect("proxy rows have both slopes");
    let alpha1 = cfg.solver.alpha1.unwrap_or_else(|| alpha1_max(problem.alpha()));
    let positive = cfg.solver.positivize && problem.modulus_invariant();
    let seq = rho_schedule(rho, cfg.problem.rho_min, cfg.solver.records);
    let selection = bounded_tops_select(problem, problem.pair(), rho, c_rho, slope, &seq, &sw.pool, &relax_options(&cfg.solver), positive)?;
    let records = extract_ps(problem, problem.pair(), &selection, alpha1, trace)?;
    let last = records.last().ok_or_else(|| Error::Certification("no PS records".into()))?;
    let critical = refine_limit(problem, problem.pair(), rho, &last.u, cfg.solver.newton_max_iter, cfg.tolerances.euler_lagrange)?;
    let phi = problem.phi(rho);
    Ok(SolveOutput {
        rho,
        c_rho,
        slope,
        alpha1,
        spike_width: ep.spike_width,
        endpoint_values: [phi.value(&ep.w1.u), phi.value(&ep.w2.u)],
        sweep: sw,
        selection,
        records,
        critical,
    })
}
