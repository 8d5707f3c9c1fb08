//! Newton refinement of a PS iterate to a constrained critical point, with Morse data.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{approx_morse_index, euler_lagrange_residual, lagrange_estimate, ConstrainedFunctional};
use crate::linalg::{Matrix, Vector};
use crate::pair::{HilbertPair, SpherePoint};

use super::family::{Phi, RhoFamily};

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPointReport {
    pub rho: f64,
    pub value: f64,
    /// `(Φ′_ρ(u)·u)/μ`.
    pub lagrange: f64,
    /// `λ` in `−u″ + V u + λu = ρ|u|^{p−2}u`.
    pub pde_lambda: f64,
    /// `‖Φ′_ρ(u) − λ⟨Gu, ·⟩‖_{E′}`.
    pub residual: f64,
    pub morse: usize,
    pub free_morse: usize,
    /// Lowest constrained eigenvalues of `D²Φ_ρ(u)` relative to `E`.
    pub low_spectrum: Vec<f64>,
    pub newton_iterations: usize,
    pub mass_residual: f64,
    pub min_nodal: f64,
    pub norm: f64,
    #[serde(skip)]
    pub point: SpherePoint,
}

/// Newton on the KKT system of `Φ_ρ` on `S_μ` with step halving on the residual; iterates
/// towards `tol/100` and succeeds when the residual ends at or below `tol`.
pub fn newton_kkt<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    start: &SpherePoint,
    max_iter: usize,
    tol: f64,
) -> Result<(SpherePoint, usize)> {
    let d = pair.dim();
    let mu = start.mu;
    let mut p = start.clone();
    let mut res = euler_lagrange_residual(f, pair, &p);
    let mut it = 0;
    while res > 1e-2 * tol && it < max_iter {
        it += 1;
        let lam = lagrange_estimate(f, &p);
        let hu = pair.apply_h(&p.u);
        let mut k = Matrix::zeros(d + 1, d + 1);
        let q = f.hess_matrix(&p.u) - pair.gram_h() * lam;
        k.view_mut((0, 0), (d, d)).copy_from(&q);
        for i in 0..d {
            k[(i, d)] = -hu[i];
            k[(d, i)] = -hu[i];
        }
        let g = f.grad_dual(&p.u) - &hu * lam;
        let mut rhs = Vector::zeros(d + 1);
        rhs.rows_mut(0, d).copy_from(&(-g));
        rhs[d] = 0.5 * (p.u.dot(&hu) - mu);
        let sol = k.lu().solve(&rhs).ok_or_else(|| Error::NoConvergence("singular KKT matrix".into()))?;
        let delta = sol.rows(0, d).into_owned();
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = pair.normalize(&(&p.u + &delta * s), mu)?;
            let r = euler_lagrange_residual(f, pair, &cand);
            if r < res {
                p = cand;
                res = r;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if !(res <= tol) {
        return Err(Error::NoConvergence(format!("Euler-Lagrange residual {res:.3e} above {tol:.1e} after {it} Newton steps")));
    }
    Ok((p, it))
}

/// Refines `start` (the last PS iterate) and reports multipliers and Morse indices.
pub fn refine_limit<F: RhoFamily + ?Sized>(
    family: &F,
    pair: &HilbertPair,
    rho: f64,
    start: &SpherePoint,
    max_iter: usize,
    tol: f64,
) -> Result<CriticalPointReport> {
    let phi = Phi::new(family, rho);
    let (point, newton_iterations) = newton_kkt(&phi, pair, start, max_iter, tol)?;
    critical_point_report(family, pair, rho, point, newton_iterations)
}

/// Report for a point taken as critical.
pub fn critical_point_report<F: RhoFamily + ?Sized>(
    family: &F,
    pair: &HilbertPair,
    rho: f64,
    point: SpherePoint,
    newton_iterations: usize,
) -> Result<CriticalPointReport> {
    let phi = Phi::new(family, rho);
    let lagrange = lagrange_estimate(&phi, &point);
    let constrained = approx_morse_index(&phi, pair, &point, 0.0, false)?;
    let free = approx_morse_index(&phi, pair, &point, 0.0, true)?;
    Ok(CriticalPointReport {
        rho,
        value: phi.value(&point.u),
        lagrange,
        pde_lambda: -lagrange,
        residual: euler_lagrange_residual(&phi, pair, &point),
        morse: constrained.count,
        free_morse: free.count,
        low_spectrum: constrained.eigenvalues.iter().take(4).copied().collect(),
        newton_iterations,
        mass_residual: point.sphere_residual(pair),
        min_nodal: point.u.min(),
        norm: pair.norm_e(&point.u),
        point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::toy::QuadraticFamily;

    #[test]
    fn newton_lands_on_the_saddle() {
        let pair = HilbertPair::identity(3);
        let qa = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0, 2.0]));
        let f = QuadraticFamily::new(&pair, qa, Matrix::zeros(3, 3), 1.0).unwrap();
        let start = pair.normalize(&Vector::from_vec(vec![0.05, 1.0, -0.03]), 1.0).unwrap();
        let rep = refine_limit(&f, &pair, 0.0, &start, 20, 1e-13).unwrap();
        assert!((rep.point.u[1].abs() - 1.0).abs() < 1e-12);
        assert!((rep.value - 0.5).abs() < 1e-12 && (rep.lagrange - 1.0).abs() < 1e-12);
        assert_eq!((rep.morse, rep.free_morse), (1, 1));
        assert!(rep.morse <= rep.free_morse && rep.free_morse <= rep.morse + 1);
    }

    #[test]
    fn stalled_newton_is_reported() {
        let pair = HilbertPair::identity(3);
        let qa = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0, 2.0]));
        let f = QuadraticFamily::new(&pair, qa, Matrix::zeros(3, 3), 1.0).unwrap();
        let start = pair.normalize(&Vector::from_vec(vec![0.5, 1.0, -0.3]), 1.0).unwrap();
        assert!(matches!(refine_limit(&f, &pair, 0.0, &start, 0, 1e-13), Err(Error::NoConvergence(_))));
    }
}
