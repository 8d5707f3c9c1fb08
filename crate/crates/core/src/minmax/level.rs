//! Mountain-pass level estimates over a path pool and the ρ-sweep.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::ConstrainedFunctional;
use crate::pair::HilbertPair;

use super::family::{Phi, RhoFamily};
use super::path::{relax, DiscretePath, RelaxOptions, RelaxReport};

/// Relative gap below which the top is taken to sit at the endpoint level.
pub const GEOMETRY_GAP: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct LevelEstimate {
    pub rho: f64,
    pub value: f64,
    /// Pool index of the minimizing path.
    pub path: usize,
    pub top_index: usize,
    pub endpoint_max: f64,
}

/// `min` over the pool of `max` over the nodes of `Φ_ρ`; all pool paths share `w1`, `w2`.
pub fn estimate_level<F: RhoFamily + ?Sized>(family: &F, rho: f64, pool: &[DiscretePath]) -> Result<LevelEstimate> {
    let phi = Phi::new(family, rho);
    let first = pool.first().ok_or_else(|| Error::GeometryFailure("empty path pool".into()))?;
    let w1 = &first.nodes[0];
    let w2 = first.nodes.last().expect("nonempty path");
    let endpoint_max = phi.value(&w1.u).max(phi.value(&w2.u));
    let (path, (top_index, value)) = pool
        .iter()
        .map(|p| p.top(&phi))
        .enumerate()
        .fold((0, (0, f64::INFINITY)), |best, (i, t)| if t.1 < best.1 .1 { (i, t) } else { best });
    let n = pool[path].len();
    if !(value - endpoint_max > GEOMETRY_GAP * (1.0 + value.abs())) || top_index == 0 || top_index + 1 == n {
        return Err(Error::GeometryFailure(format!(
            "level {value:.10e} at rho = {rho} is not above the endpoint values (max {endpoint_max:.10e}, top node {top_index})"
        )));
    }
    Ok(LevelEstimate { rho, value, path, top_index, endpoint_max })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub rho: f64,
    /// `min_pool max Φ_ρ`, reported even where the geometry check fails.
    pub c_rho: f64,
    pub slope_left: Option<f64>,
    pub slope_right: Option<f64>,
    pub geometry_ok: bool,
    /// Left and right slopes agree within the tolerance and all three neighbours pass geometry.
    pub proxy: bool,
    pub relax: RelaxReport,
    pub message: Option<String>,
}

impl SweepRow {
    /// Symmetric difference quotient.
    pub fn slope(&self) -> Option<f64> {
        Some(0.5 * (self.slope_left? + self.slope_right?))
    }

    fn disagreement(&self) -> f64 {
        match (self.slope_left, self.slope_right) {
            (Some(l), Some(r)) => {
                let s = l.abs().max(r.abs());
                if s == 0.0 {
                    0.0
                } else {
                    (l - r).abs() / s
                }
            }
            _ => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub slope_agreement: f64,
    /// Largest `c_{ρ_{i+1}} − c_{ρ_i}`.
    pub max_increase: f64,
    #[serde(skip)]
    pub pool: Vec<DiscretePath>,
}

impl SweepReport {
    /// The proxy row with the best slope agreement.
    pub fn best_proxy(&self) -> Option<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.proxy)
            .min_by(|a, b| a.1.disagreement().total_cmp(&b.1.disagreement()))
            .map(|(i, _)| i)
    }

    /// CSV with header `rho,c_rho,slope_left,slope_right`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho,c_rho,slope_left,slope_right\n");
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
        for r in &self.rows {
            s.push_str(&format!("{},{:.12e},{},{}\n", r.rho, r.c_rho, opt(r.slope_left), opt(r.slope_right)));
        }
        s
    }
}

/// Relaxes the pool's best path at each `ρ` in ascending order and adds it to the pool.
pub fn rho_sweep<F: RhoFamily + ?Sized>(
    family: &F,
    pair: &HilbertPair,
    grid: &[f64],
    pool: Vec<DiscretePath>,
    opts: &RelaxOptions,
    slope_agreement: f64,
) -> Result<SweepReport> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("rho grid must be strictly ascending".into()));
    }
    if pool.is_empty() {
        return Err(Error::GeometryFailure("empty path pool".into()));
    }
    let mut pool = pool;
    let mut rows: Vec<SweepRow> = Vec::with_capacity(grid.len());
    for &rho in grid {
        let phi = Phi::new(family, rho);
        let best = pool
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.top(&phi).1.total_cmp(&b.1.top(&phi).1))
            .map(|(i, _)| i)
            .expect("nonempty");
        let (relaxed, relax_rep) = relax(&phi, pair, &pool[best], opts)?;
        pool.push(relaxed);
        let (c_rho, geometry_ok, message) = match estimate_level(family, rho, &pool) {
            Ok(e) => (e.value, true, None),
            Err(e) => {
                let v = pool.iter().map(|p| p.top(&phi).1).fold(f64::INFINITY, f64::min);
                (v, false, Some(e.to_string()))
            }
        };
        log::info!("rho = {rho:.6}: c = {c_rho:.10e}, geometry {geometry_ok}, top dual {:.3e}", relax_rep.top_dual_norm);
        rows.push(SweepRow { rho, c_rho, slope_left: None, slope_right: None, geometry_ok, proxy: false, relax: relax_rep, message });
    }
    let n = rows.len();
    for i in 0..n {
        if i > 0 {
            rows[i].slope_left = Some((rows[i].c_rho - rows[i - 1].c_rho) / (rows[i].rho - rows[i - 1].rho));
        }
        if i + 1 < n {
            rows[i].slope_right = Some((rows[i + 1].c_rho - rows[i].c_rho) / (rows[i + 1].rho - rows[i].rho));
        }
    }
    for i in 1..n.saturating_sub(1) {
        let geo = rows[i - 1].geometry_ok && rows[i].geometry_ok && rows[i + 1].geometry_ok;
        rows[i].proxy = geo && rows[i].disagreement() <= slope_agreement;
    }
    let max_increase = rows.windows(2).map(|w| w[1].c_rho - w[0].c_rho).fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepReport { rows, slope_agreement, max_increase, pool })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Vector};
    use crate::problems::toy::QuadraticFamily;

    /// `A = ½(−x² + y² + 2z²)`, `B = ½y²`: on the unit sphere the pass between `±e_x` is `e_y`
    /// with `c_ρ = (1 − ρ)/2` for `ρ < 2`.
    fn family(qb_y: f64) -> (HilbertPair, QuadraticFamily) {
        let pair = HilbertPair::identity(3);
        let qa = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0, 2.0]));
        let qb = Matrix::from_diagonal(&Vector::from_vec(vec![0.0, qb_y, 0.0]));
        let f = QuadraticFamily::new(&pair, qa, qb, 1.0).unwrap();
        (pair, f)
    }

    fn bent_pool(pair: &HilbertPair) -> Vec<DiscretePath> {
        let w1 = pair.normalize(&Vector::from_vec(vec![1.0, 0.0, 0.0]), 1.0).unwrap();
        let w2 = pair.normalize(&Vector::from_vec(vec![-1.0, 0.0, 0.0]), 1.0).unwrap();
        let mid = pair.normalize(&Vector::from_vec(vec![0.0, 0.6, 0.8]), 1.0).unwrap();
        let a = DiscretePath::geodesic(pair, &w1, &mid, 9).unwrap();
        let b = DiscretePath::geodesic(pair, &mid, &w2, 9).unwrap();
        let mut nodes = a.nodes;
        nodes.extend(b.nodes.into_iter().skip(1));
        vec![DiscretePath { nodes }]
    }

    fn opts() -> RelaxOptions {
        RelaxOptions { max_iter: 3000, tol: 1e-10, climbing: true, polish: 0 }
    }

    #[test]
    fn saddle_level_and_worse_paths() {
        let (pair, f) = family(1.0);
        let pool = bent_pool(&pair);
        let phi = Phi::new(&f, 0.0);
        let (relaxed, _) = relax(&phi, &pair, &pool[0], &opts()).unwrap();
        let est = estimate_level(&f, 0.0, &[relaxed.clone()]).unwrap();
        assert!((est.value - 0.5).abs() < 1e-4);
        assert!(est.value > est.endpoint_max);
        let with_worse = estimate_level(&f, 0.0, &[relaxed, pool[0].clone()]).unwrap();
        assert!(with_worse.value <= est.value);
    }

    #[test]
    fn constant_family_has_zero_slope() {
        let (pair, f) = family(0.0);
        let grid: Vec<f64> = (0..5).map(|i| 0.2 * i as f64 + 0.1).collect();
        let rep = rho_sweep(&f, &pair, &grid, bent_pool(&pair), &opts(), 0.1).unwrap();
        for r in &rep.rows {
            assert!((r.c_rho - 0.5).abs() < 1e-9 && r.geometry_ok);
            if let Some(s) = r.slope_left {
                assert!(s.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn linear_level_slope() {
        let (pair, f) = family(1.0);
        let grid: Vec<f64> = (0..7).map(|i| 0.2 * i as f64).collect();
        let rep = rho_sweep(&f, &pair, &grid, bent_pool(&pair), &opts(), 0.1).unwrap();
        assert!(rep.max_increase <= 1e-9);
        for r in &rep.rows {
            assert!((r.c_rho - 0.5 * (1.0 - r.rho)).abs() < 1e-6, "{r:?}");
        }
        let i = rep.best_proxy().unwrap();
        let s = rep.rows[i].slope().unwrap();
        assert!((s + 0.5).abs() < 0.025, "{s}");
        assert!(rep.to_csv().starts_with("rho,c_rho,slope_left,slope_right\n"));
    }

    #[test]
    fn lost_geometry_is_flagged() {
        // for ρ > 2 the pass drops below the endpoints
        let (pair, f) = family(1.0);
        let rep = rho_sweep(&f, &pair, &[1.0, 2.5], bent_pool(&pair), &opts(), 0.1).unwrap();
        assert!(rep.rows[0].geometry_ok);
        assert!(!rep.rows[1].geometry_ok && rep.rows[1].message.is_some());
    }
}
