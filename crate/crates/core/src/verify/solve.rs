//! Checks on a finished NLS solve: PS records, the refined limit, the Hessian identity,
//! descent at NLS points, the shooting and constant oracles and mesh convergence.

use rand::Rng;
use serde::Serialize;

use crate::functional::{constrained_dual_norm, d2phi, ConstrainedFunctional};
use crate::linalg::Vector;
use crate::minmax::pipeline::SolveOutput;
use crate::minmax::refine::{refine_limit, CriticalPointReport};
use crate::pair::{HilbertPair, SpherePoint};
use crate::problems::config::{Bc, PotentialConfig, ProblemKind, RunConfig};
use crate::problems::nls::NlsProblem;
use crate::problems::shooting::shooting_oracle;
use crate::sampling::{random_unit_tangent, random_vector};

use super::descent::descent_at_points;
use super::second_order::second_difference;
use super::{sample_rng, Check};

/// Relative error of `D²φ(u)[a,a]` against the second derivative of `φ` along the
/// non-geodesic curve `√μ (u + ta + t²b)/|u + ta + t²b|`; at a critical point the two agree.
pub fn hessian_identity_error<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, p: &SpherePoint, a: &Vector, b: &Vector, h: f64) -> f64 {
    let curve = |t: f64| {
        let x = &p.u + a * t + b * (t * t);
        let s = (p.mu / pair.inner_h(&x, &x)).sqrt();
        x * s - &p.u
    };
    let fd = second_difference(|t| f.value_increment(&p.u, &curve(t)), h);
    let exact = d2phi(f, pair, p, a, a);
    let lam = f.grad_dual(&p.u).dot(&p.u) / p.mu;
    let scale = exact.abs().max(a.dot(&f.hess_action(&p.u, a)).abs() + (lam * pair.inner_h(a, a)).abs());
    (fd - exact).abs() / scale.max(f64::MIN_POSITIVE)
}

pub fn hessian_identity_check<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, p: &SpherePoint, probes: usize, seed: u64) -> Check {
    let dual = constrained_dual_norm(f, pair, p);
    let mut rng = sample_rng(seed, 6u64 << 40);
    let errs: Vec<f64> = (0..probes)
        .map(|_| {
            let a = random_unit_tangent(&mut rng, pair, p);
            let b = random_vector(&mut rng, pair.dim()) * rng.random_range(0.0..1.0);
            hessian_identity_error(f, pair, p, &a, &b, 1e-3)
        })
        .collect();
    let c = Check::from_values("second_order.hessian_at_critical_point", &errs, 1e-6);
    if dual > 1e-8 {
        let mut c = c.with_note(format!("point is not numerically critical: dual norm {dual:.3e}"));
        c.passed = false;
        c
    } else {
        c.with_note(format!("dual norm {dual:.3e}"))
    }
}

/// Piecewise-linear interpolation of nodal values between two interval meshes.
pub fn interpolate(from_x: &[f64], from_u: &Vector, to_x: &[f64], length: f64, bc: Bc) -> Vector {
    let (mut xs, mut us) = (from_x.to_vec(), from_u.iter().copied().collect::<Vec<f64>>());
    if bc == Bc::Dirichlet {
        xs.insert(0, 0.0);
        us.insert(0, 0.0);
        xs.push(length);
        us.push(0.0);
    }
    Vector::from_iterator(
        to_x.len(),
        to_x.iter().map(|&x| {
            let j = xs.partition_point(|&y| y <= x).clamp(1, xs.len() - 1);
            let (x0, x1) = (xs[j - 1], xs[j]);
            let s = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
            us[j - 1] * (1.0 - s) + us[j] * s
        }),
    )
}

/// Order `q` with `(c₁ − c₂)/(c₂ − c₃) = (h₁^q − h₂^q)/(h₂^q − h₃^q)`, by bisection on `[0.05, 12]`.
pub fn observed_order(h: [f64; 3], c: [f64; 3]) -> f64 {
    let target = (c[0] - c[1]) / (c[1] - c[2]);
    if !target.is_finite() || target <= 0.0 {
        return f64::NAN;
    }
    let g = |q: f64| (h[0].powf(q) - h[1].powf(q)) / (h[1].powf(q) - h[2].powf(q)) - target;
    let (mut lo, mut hi) = (0.05, 12.0);
    if g(lo) * g(hi) > 0.0 {
        return f64::NAN;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(lo) * g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshLevel {
    pub d: usize,
    pub h: f64,
    pub value: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshStudy {
    pub levels: Vec<MeshLevel>,
    pub order: f64,
}

fn mesh_width(problem: &NlsProblem) -> f64 {
    let x = problem.positions();
    x[1] - x[0]
}

/// Newton-refines the critical point on meshes `coarse_d`, `2 coarse_d`, `4 coarse_d` from
/// interpolated starts.
pub fn mesh_convergence(cfg: &RunConfig, rho: f64, coarse_d: usize, base: &NlsProblem, point: &SpherePoint) -> crate::error::Result<MeshStudy> {
    let length = base.total_length();
    let mut levels = Vec::new();
    for d in [coarse_d, 2 * coarse_d, 4 * coarse_d] {
        let mut pc = cfg.problem.clone();
        pc.d = d;
        let problem = NlsProblem::new(&pc)?;
        let start = interpolate(base.positions(), &point.u, problem.positions(), length, pc.bc);
        let start = problem.pair().normalize(&start, pc.mu)?;
        let rep = refine_limit(&problem, problem.pair(), rho, &start, cfg.solver.newton_max_iter, cfg.tolerances.euler_lagrange)?;
        levels.push(MeshLevel { d, h: mesh_width(&problem), value: rep.value, residual: rep.residual });
    }
    let order = observed_order([levels[0].h, levels[1].h, levels[2].h], [levels[0].value, levels[1].value, levels[2].value]);
    Ok(MeshStudy { levels, order })
}

/// Shooting value for a Dirichlet interval with zero potential, started from the refined peak.
pub fn shooting_gap(cfg: &RunConfig, critical: &CriticalPointReport) -> crate::error::Result<f64> {
    let pc = &cfg.problem;
    if pc.kind != ProblemKind::Interval || pc.bc != Bc::Dirichlet || pc.potential != PotentialConfig::Zero {
        return Err(crate::error::Error::Config("shooting oracle needs a Dirichlet interval with zero potential".into()));
    }
    let peak = critical.point.u.amax();
    let s = shooting_oracle(pc.length.unwrap_or(1.0), pc.mu, critical.rho, pc.p, peak, critical.pde_lambda)?;
    Ok((critical.value - s.value).abs())
}

/// `|λ − ρ(μ/L)^{(p−2)/2}|/λ` for the constant Neumann state at `rho`.
pub fn constant_oracle_gap(cfg: &RunConfig, rho: f64) -> crate::error::Result<f64> {
    let mut pc = cfg.problem.clone();
    pc.kind = ProblemKind::Interval;
    pc.bc = Bc::Neumann;
    pc.potential = PotentialConfig::Zero;
    pc.edges = None;
    let problem = NlsProblem::new(&pc)?;
    let o = problem.constant_oracle(rho)?;
    let exact = rho * (pc.mu / problem.total_length()).powf(0.5 * (pc.p - 2.0));
    Ok((o.pde_lambda - exact).abs() / exact)
}

/// All post-solve checks.
pub fn solve_checks(problem: &NlsProblem, cfg: &RunConfig, out: &SolveOutput, seed: u64) -> Vec<Check> {
    let pair = problem.pair();
    let phi = problem.phi(out.rho);
    let tol = &cfg.tolerances;
    let recs = &out.records;
    let k = out.selection.k_bound;
    let mut checks = vec![
        Check::from_values("sweep.monotone", &[out.sweep.max_increase], tol.monotone),
        Check::from_values("ps.dual_norm", &recs.iter().map(|r| r.dual_norm / (3.0 * r.zeta)).collect::<Vec<_>>(), 1.0)
            .with_note("ratio to 3 eps_n^alpha1"),
        Check::from_values("ps.norm_bound", &recs.iter().map(|r| r.norm / k).collect::<Vec<_>>(), 1.0).with_note(format!("K = {k:.6}")),
        Check::from_values("ps.approximate_morse", &recs.iter().map(|r| r.morse_count as f64).collect::<Vec<_>>(), 1.0),
        Check::from_values(
            "ps.zeta_decreasing",
            &recs.windows(2).map(|w| if w[1].zeta < w[0].zeta { 0.0 } else { 1.0 }).collect::<Vec<_>>(),
            0.0,
        ),
        Check::from_values("ps.accepted", &recs.iter().map(|r| if r.accepted { 0.0 } else { 1.0 }).collect::<Vec<_>>(), 0.0),
        Check::from_values("critical.euler_lagrange", &[out.critical.residual], tol.euler_lagrange),
        Check::from_values("critical.morse", &[out.critical.morse as f64], 1.0),
        Check::from_values("critical.free_morse", &[out.critical.free_morse as f64], 2.0),
        Check::from_values("critical.nonnegative_nodes", &[-out.critical.min_nodal], 0.0),
        hessian_identity_check(&phi, pair, &out.critical.point, 50, seed),
    ];
    log::info!("checks: hessian identity done");
    let mut points = vec![out.critical.point.clone()];
    points.extend(recs.iter().map(|r| r.u.clone()));
    checks.extend(descent_at_points(&phi, pair, &points, 10, seed));
    log::info!("checks: descent done");
    checks.push(match shooting_gap(cfg, &out.critical) {
        Ok(gap) => Check::from_values("oracle.shooting", &[gap], tol.oracle_value),
        Err(e) => Check::failed("oracle.shooting", e.to_string()),
    });
    log::info!("checks: shooting done");
    checks.push(match constant_oracle_gap(cfg, out.rho) {
        Ok(gap) => Check::from_values("oracle.constant_lambda", &[gap], 1e-10),
        Err(e) => Check::failed("oracle.constant_lambda", e.to_string()),
    });
    log::info!("checks: constant oracle done");
    let coarse = (cfg.problem.d / 2).max(3);
    checks.push(match mesh_convergence(cfg, out.rho, coarse, problem, &out.critical.point) {
        Ok(m) => {
            let levels: Vec<String> = m.levels.iter().map(|l| format!("d={} c={:.12e}", l.d, l.value)).collect();
            let mut c = Check::from_values("mesh.observed_order", &[-m.order], -1.8).with_note(format!("order {:.4}; {}", m.order, levels.join(", ")));
            c.worst = m.order;
            c
        }
        Err(e) => Check::failed("mesh.observed_order", e.to_string()),
    });
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reproduces_linear_data() {
        let from: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let u = Vector::from_iterator(9, from.iter().map(|x| x * (1.0 - x)));
        let to: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
        let v = interpolate(&from, &u, &to, 1.0, Bc::Dirichlet);
        // nodes shared by both meshes are reproduced exactly
        assert!((v[1] - u[0]).abs() < 1e-15 && (v[17] - u[8]).abs() < 1e-15);
        // midpoints are chord values
        assert!((v[0] - 0.5 * u[0]).abs() < 1e-15);
    }

    #[test]
    fn order_of_exact_power_law() {
        let h = [0.1, 0.05, 0.025];
        let c = h.map(|x| 3.0 + 2.0 * x * x);
        assert!((observed_order(h, c) - 2.0).abs() < 1e-9);
        let h: [f64; 3] = [1.0 / 101.0, 1.0 / 201.0, 1.0 / 401.0];
        let c = h.map(|x| 1.0 - 0.7 * x.powf(1.5));
        assert!((observed_order(h, c) - 1.5).abs() < 1e-9);
        assert!(observed_order(h, [1.0, 1.0, 1.0]).is_nan());
    }
}
