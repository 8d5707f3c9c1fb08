use crate::functional::ConstrainedFunctional;
use crate::linalg::{Matrix, Vector};

/// A one-parameter family `Φ_ρ = A − ρ B` with `B ≥ 0`.
pub trait RhoFamily: Sync {
    fn dim(&self) -> usize;
    fn a_value(&self, u: &Vector) -> f64;
    fn a_grad(&self, u: &Vector) -> Vector;
    fn a_hess_action(&self, u: &Vector, w: &Vector) -> Vector;
    fn b_value(&self, u: &Vector) -> f64;
    fn b_grad(&self, u: &Vector) -> Vector;
    fn b_hess_action(&self, u: &Vector, w: &Vector) -> Vector;

    fn a_hess_matrix(&self, u: &Vector) -> Matrix {
        columns(self.dim(), |w| self.a_hess_action(u, w))
    }
    fn b_hess_matrix(&self, u: &Vector) -> Matrix {
        columns(self.dim(), |w| self.b_hess_action(u, w))
    }
    fn holder_m(&self, r: f64, rho: f64) -> f64;
    fn bound_k(&self, r: f64, rho: f64) -> f64;
    fn alpha(&self) -> f64 {
        1.0
    }
    fn modulus_invariant(&self) -> bool {
        false
    }
    fn a_increment(&self, u: &Vector, delta: &Vector) -> f64 {
        self.a_value(&(u + delta)) - self.a_value(u)
    }
    fn b_increment(&self, u: &Vector, delta: &Vector) -> f64 {
        self.b_value(&(u + delta)) - self.b_value(u)
    }
}

fn columns(d: usize, act: impl Fn(&Vector) -> Vector) -> Matrix {
    let mut m = Matrix::zeros(d, d);
    for j in 0..d {
        let mut e = Vector::zeros(d);
        e[j] = 1.0;
        m.set_column(j, &act(&e));
    }
    (&m + m.transpose()) * 0.5
}

/// `Φ_ρ` as a constrained functional.
pub struct Phi<'a, F: RhoFamily + ?Sized> {
    pub family: &'a F,
    pub rho: f64,
}

impl<'a, F: RhoFamily + ?Sized> Phi<'a, F> {
    pub fn new(family: &'a F, rho: f64) -> Self {
        Phi { family, rho }
    }
}

impl<F: RhoFamily + ?Sized> ConstrainedFunctional for Phi<'_, F> {
    fn dim(&self) -> usize {
        self.family.dim()
    }
    fn value(&self, u: &Vector) -> f64 {
        self.family.a_value(u) - self.rho * self.family.b_value(u)
    }
    fn grad_dual(&self, u: &Vector) -> Vector {
        self.family.a_grad(u) - self.family.b_grad(u) * self.rho
    }
    fn hess_action(&self, u: &Vector, w: &Vector) -> Vector {
        self.family.a_hess_action(u, w) - self.family.b_hess_action(u, w) * self.rho
    }
    fn hess_matrix(&self, u: &Vector) -> Matrix {
        self.family.a_hess_matrix(u) - self.family.b_hess_matrix(u) * self.rho
    }
    fn holder_m(&self, r: f64) -> f64 {
        self.family.holder_m(r, self.rho)
    }
    fn bound_k(&self, r: f64) -> f64 {
        self.family.bound_k(r, self.rho)
    }
    fn alpha(&self) -> f64 {
        self.family.alpha()
    }
    fn modulus_invariant(&self) -> bool {
        self.family.modulus_invariant()
    }
    fn value_increment(&self, u: &Vector, delta: &Vector) -> f64 {
        self.family.a_increment(u, delta) - self.rho * self.family.b_increment(u, delta)
    }
}
