//! Constrained functionals on `S_μ` and their second-order objects.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::GeometryConstants;
use crate::linalg::{sym_eigen, Matrix, Vector};
use crate::pair::{HilbertPair, SpherePoint};

/// Absolute tolerance on eigenvalues when counting negative directions.
pub const EIGEN_TOL: f64 = 1e-10;

/// A `C²` functional on the coordinate space, with analytic bounds on bounded sets.
///
/// Derivatives are returned as coordinates of linear forms: `φ'(u)·x = grad_dual(u)·x`
/// and `φ''(u)[w, x] = hess_action(u, w)·x`.
pub trait ConstrainedFunctional: Sync {
    fn dim(&self) -> usize;
    fn value(&self, u: &Vector) -> f64;
    fn grad_dual(&self, u: &Vector) -> Vector;
    fn hess_action(&self, u: &Vector, w: &Vector) -> Vector;

    fn hess_matrix(&self, u: &Vector) -> Matrix {
        let d = self.dim();
        let mut m = Matrix::zeros(d, d);
        for j in 0..d {
            let mut e = Vector::zeros(d);
            e[j] = 1.0;
            m.set_column(j, &self.hess_action(u, &e));
        }
        (&m + m.transpose()) * 0.5
    }

    /// Hölder constant `M` of `φ'` and `φ''` on `B(0, R)`.
    fn holder_m(&self, r: f64) -> f64;
    /// `K(R) ≥ 1` bounding `‖D²φ‖` and `‖φ'‖` on `B(0, R) ∩ S_μ`.
    fn bound_k(&self, r: f64) -> f64;
    fn alpha(&self) -> f64 {
        1.0
    }
    /// Whether `φ(|u|) = φ(u)` for the nodal modulus.
    fn modulus_invariant(&self) -> bool {
        false
    }
    /// `φ(u + δ) − φ(u)`; implementations may avoid cancellation for small `δ`.
    fn value_increment(&self, u: &Vector, delta: &Vector) -> f64 {
        self.value(&(u + delta)) - self.value(u)
    }
}

/// `(φ'(u)·u)/|u|²`.
pub fn multiplier<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, u: &Vector) -> f64 {
    f.grad_dual(u).dot(u) / pair.inner_h(u, u)
}

/// `D²φ(u)[a,b] = φ''(u)[a,b] − (φ'(u)·u/|u|²)(a,b)`.
pub fn d2phi<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, p: &SpherePoint, a: &Vector, b: &Vector) -> f64 {
    let lam = multiplier(f, pair, &p.u);
    a.dot(&f.hess_action(&p.u, b)) - lam * pair.inner_h(a, b)
}

/// Matrix of `D²φ(u)` on the whole coordinate space.
pub fn d2phi_matrix<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, p: &SpherePoint) -> Matrix {
    let lam = multiplier(f, pair, &p.u);
    f.hess_matrix(&p.u) - pair.gram_h() * lam
}

/// Riemannian gradient: the E-projection of `E^{-1}φ'(u)` onto `T_u S_μ = (Gu)^⊥`.
pub fn sphere_gradient<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, p: &SpherePoint) -> Vector {
    let g = f.grad_dual(&p.u);
    let ge = pair.riesz(&g);
    let hu = pair.apply_h(&p.u);
    let gu = pair.riesz(&hu);
    let c = g.dot(&gu) / hu.dot(&gu);
    ge - gu * c
}

/// `sup_{x ∈ T_u S_μ, ‖x‖=1} φ'(u)·x`.
pub fn constrained_dual_norm<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, p: &SpherePoint) -> f64 {
    pair.norm_e(&sphere_gradient(f, pair, p))
}

/// `λ = (1/μ) φ'(u)·u`.
pub fn lagrange_estimate<F: ConstrainedFunctional + ?Sized>(f: &F, p: &SpherePoint) -> f64 {
    f.grad_dual(&p.u).dot(&p.u) / p.mu
}

/// Free-gradient form `φ'(u) − λ (u, ·)` with `λ = φ'(u)·u / μ`.
pub fn free_gradient_form<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, p: &SpherePoint) -> Vector {
    let lam = lagrange_estimate(f, p);
    f.grad_dual(&p.u) - pair.apply_h(&p.u) * lam
}

/// `‖φ'(u) − λ⟨Gu, ·⟩‖_{E'}`.
pub fn euler_lagrange_residual<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, p: &SpherePoint) -> f64 {
    pair.dual_norm(&free_gradient_form(f, pair, p))
}

#[derive(Clone, Debug, Serialize)]
pub struct MorseReport {
    pub theta: f64,
    pub count: usize,
    /// Ascending spectrum of `D²φ(u)` relative to the E-product.
    pub eigenvalues: Vec<f64>,
    /// E-orthonormal directions for the counted eigenvalues, most negative first.
    #[serde(skip)]
    pub basis: Vec<Vector>,
    pub free: bool,
}

/// E-orthonormal basis of `T_u S_μ`: H-projected coordinate vectors, the
/// smallest candidate dropped, then modified Gram–Schmidt in `E` (two passes).
pub fn tangent_basis(pair: &HilbertPair, p: &SpherePoint) -> Result<Vec<Vector>> {
    let d = pair.dim();
    let hu = pair.apply_h(&p.u);
    let mut candidates: Vec<Vector> = (0..d)
        .map(|i| {
            let mut x = &p.u * (-hu[i] / p.mu);
            x[i] += 1.0;
            x
        })
        .collect();
    let drop = (0..d)
        .min_by(|&i, &j| pair.norm_e(&candidates[i]).total_cmp(&pair.norm_e(&candidates[j])))
        .expect("d > 0");
    candidates.remove(drop);

    let mut basis: Vec<Vector> = Vec::with_capacity(d - 1);
    let mut images: Vec<Vector> = Vec::with_capacity(d - 1);
    for mut x in candidates {
        for _ in 0..2 {
            for (q, eq) in basis.iter().zip(&images) {
                let c = x.dot(eq);
                x.axpy(-c, q, 1.0);
            }
        }
        let ex = pair.apply_e(&x);
        let n = x.dot(&ex).max(0.0).sqrt();
        if !(n > 1e-12) {
            return Err(Error::Eigen("degenerate tangent candidate during orthonormalization".into()));
        }
        basis.push(x / n);
        images.push(ex / n);
    }
    Ok(basis)
}

fn count_below(values: &[f64], theta: f64) -> usize {
    values.iter().filter(|&&v| v < -theta - EIGEN_TOL).count()
}

/// `m̃_θ(u)` on `T_u S_μ` (or, with `free`, the analogous count on all of `E`).
pub fn approx_morse_index<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    p: &SpherePoint,
    theta: f64,
    free: bool,
) -> Result<MorseReport> {
    if !(theta >= 0.0) {
        return Err(Error::HypothesisViolated(format!("Morse threshold must be nonnegative, got {theta}")));
    }
    let q = d2phi_matrix(f, pair, p);
    let (eigenvalues, basis) = if free {
        let c = pair.factor_e().congruence(&q);
        let (vals, vecs) = sym_eigen(&c)?;
        let count = count_below(&vals, theta);
        let dirs = (0..count).map(|k| pair.factor_e().solve_upper(&vecs.column(k).into_owned())).collect();
        (vals, dirs)
    } else {
        let b = tangent_basis(pair, p)?;
        let bm = Matrix::from_columns(&b);
        let t = bm.transpose() * &q * &bm;
        let (vals, vecs) = sym_eigen(&((&t + t.transpose()) * 0.5))?;
        let count = count_below(&vals, theta);
        let dirs = (0..count).map(|k| &bm * vecs.column(k)).collect();
        (vals, dirs)
    };
    let count = count_below(&eigenvalues, theta);
    Ok(MorseReport { theta, count, eigenvalues, basis, free })
}

/// Largest eigenvalue of `D²φ(u)` restricted to the span of an E-orthonormal family.
pub fn max_eigen_on_frame<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    p: &SpherePoint,
    frame: &[Vector],
) -> Result<f64> {
    let k = frame.len();
    let lam = multiplier(f, pair, &p.u);
    let actions: Vec<Vector> = frame.iter().map(|w| f.hess_action(&p.u, w) - pair.apply_h(w) * lam).collect();
    let m = Matrix::from_fn(k, k, |i, j| 0.5 * (frame[i].dot(&actions[j]) + frame[j].dot(&actions[i])));
    let (vals, _) = sym_eigen(&m)?;
    Ok(vals.last().copied().unwrap_or(f64::NEG_INFINITY))
}

/// `δ₁` for the negative subspace `W` at `u`, bound radius `R`.
pub fn stability_radius<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    p: &SpherePoint,
    frame: &[Vector],
    beta: f64,
    r: f64,
) -> Result<f64> {
    let top = max_eigen_on_frame(f, pair, p, frame)?;
    if !(top < -beta) {
        return Err(Error::HypothesisViolated(format!(
            "D2phi is not below -beta = {} on W (largest eigenvalue {top})",
            -beta
        )));
    }
    let consts = GeometryConstants::new(r, p.mu, f.bound_k(r).max(1.0), f.holder_m(r), f.alpha(), frame.len().saturating_sub(1))?;
    Ok(consts.delta1(beta))
}
