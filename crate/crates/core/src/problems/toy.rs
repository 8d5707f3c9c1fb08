//! Closed-form model functionals used by validators and tests.

use crate::error::Result;
use crate::functional::ConstrainedFunctional;
use crate::linalg::{sym_eigen, Matrix, Vector};
use crate::minmax::family::RhoFamily;
use crate::pair::HilbertPair;

/// Operator norm of the bilinear form `Q` relative to the E-product.
pub fn form_norm(pair: &HilbertPair, q: &Matrix) -> Result<f64> {
    let (vals, _) = sym_eigen(&pair.factor_e().congruence(q))?;
    Ok(vals.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// `φ(u) = ½ u^T Q u + ℓ·u`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub q: Matrix,
    pub l: Vector,
    pub mu: f64,
    q_norm: f64,
    l_norm: f64,
}

impl Quadratic {
    pub fn new(pair: &HilbertPair, q: Matrix, l: Vector, mu: f64) -> Result<Self> {
        let q = (&q + q.transpose()) * 0.5;
        let q_norm = form_norm(pair, &q)?;
        let l_norm = pair.dual_norm(&l);
        Ok(Quadratic { q, l, mu, q_norm, l_norm })
    }

    pub fn q_norm(&self) -> f64 {
        self.q_norm
    }
}

impl ConstrainedFunctional for Quadratic {
    fn dim(&self) -> usize {
        self.l.len()
    }
    fn value(&self, u: &Vector) -> f64 {
        0.5 * u.dot(&(&self.q * u)) + self.l.dot(u)
    }
    fn grad_dual(&self, u: &Vector) -> Vector {
        &self.q * u + &self.l
    }
    fn hess_action(&self, _u: &Vector, w: &Vector) -> Vector {
        &self.q * w
    }
    fn hess_matrix(&self, _u: &Vector) -> Matrix {
        self.q.clone()
    }
    fn holder_m(&self, _r: f64) -> f64 {
        self.q_norm.max(1.0)
    }
    fn bound_k(&self, r: f64) -> f64 {
        let g = self.q_norm * r + self.l_norm;
        1f64.max(g).max(self.q_norm + g * r / self.mu)
    }
    fn value_increment(&self, u: &Vector, delta: &Vector) -> f64 {
        let qd = &self.q * delta;
        delta.dot(&(&self.q * u + &self.l)) + 0.5 * delta.dot(&qd)
    }
}

/// `φ(u) = ½ u^T Q u + ℓ·u + (c/4) Σ u_i⁴`.
#[derive(Clone, Debug)]
pub struct Quartic {
    pub quad: Quadratic,
    pub c: f64,
    /// `max_i sqrt((E^{-1})_ii)`: coordinates obey `|u_i| ≤ cinf ‖u‖`.
    cinf: f64,
    /// `λ_max(E^{-1})`: Euclidean norms obey `|u|₂² ≤ e2 ‖u‖²`.
    e2: f64,
}

impl Quartic {
    pub fn new(pair: &HilbertPair, quad: Quadratic, c: f64) -> Result<Self> {
        let cinf = coordinate_embedding(pair);
        let e2 = form_norm(pair, &Matrix::identity(pair.dim(), pair.dim()))?;
        Ok(Quartic { quad, c, cinf, e2 })
    }
}

/// `max_i sqrt(e_i^T E^{-1} e_i)`, the sharp constant in `|u_i| ≤ C ‖u‖`.
pub fn coordinate_embedding(pair: &HilbertPair) -> f64 {
    let d = pair.dim();
    (0..d)
        .map(|i| {
            let mut e = Vector::zeros(d);
            e[i] = 1.0;
            pair.dual_norm(&e)
        })
        .fold(0.0, f64::max)
}

impl ConstrainedFunctional for Quartic {
    fn dim(&self) -> usize {
        self.quad.dim()
    }
    fn value(&self, u: &Vector) -> f64 {
        self.quad.value(u) + 0.25 * self.c * u.iter().map(|x| x.powi(4)).sum::<f64>()
    }
    fn grad_dual(&self, u: &Vector) -> Vector {
        self.quad.grad_dual(u) + u.map(|x| self.c * x * x * x)
    }
    fn hess_action(&self, u: &Vector, w: &Vector) -> Vector {
        self.quad.hess_action(u, w) + u.zip_map(w, |x, y| 3.0 * self.c * x * x * y)
    }
    fn holder_m(&self, r: f64) -> f64 {
        // coordinates bounded by s = cinf r on B(0, R)
        let s = self.cinf * r;
        let c = self.c.abs() * self.e2;
        (self.quad.q_norm + 3.0 * c * s * s).max(6.0 * c * s * self.cinf).max(1.0)
    }
    fn bound_k(&self, r: f64) -> f64 {
        let s = self.cinf * r;
        let c = self.c.abs() * self.e2;
        let g = self.quad.q_norm * r + self.quad.l_norm + c * s * s * r;
        let h = self.quad.q_norm + 3.0 * c * s * s;
        1f64.max(g).max(h + g * r / self.quad.mu)
    }
    fn value_increment(&self, u: &Vector, delta: &Vector) -> f64 {
        let quartic: f64 = u
            .iter()
            .zip(delta.iter())
            .map(|(&x, &d)| d * (4.0 * x * x * x + d * (6.0 * x * x + d * (4.0 * x + d))))
            .sum();
        self.quad.value_increment(u, delta) + 0.25 * self.c * quartic
    }
}

/// `A = ½ u^T Q_A u`, `B = ½ u^T Q_B u` with `Q_B` positive semidefinite.
#[derive(Clone, Debug)]
pub struct QuadraticFamily {
    pub qa: Matrix,
    pub qb: Matrix,
    pub mu: f64,
    na: f64,
    nb: f64,
}

impl QuadraticFamily {
    pub fn new(pair: &HilbertPair, qa: Matrix, qb: Matrix, mu: f64) -> Result<Self> {
        let na = form_norm(pair, &qa)?;
        let nb = form_norm(pair, &qb)?;
        Ok(QuadraticFamily { qa, qb, mu, na, nb })
    }
}

impl RhoFamily for QuadraticFamily {
    fn dim(&self) -> usize {
        self.qa.nrows()
    }
    fn a_value(&self, u: &Vector) -> f64 {
        0.5 * u.dot(&(&self.qa * u))
    }
    fn a_grad(&self, u: &Vector) -> Vector {
        &self.qa * u
    }
    fn a_hess_action(&self, _u: &Vector, w: &Vector) -> Vector {
        &self.qa * w
    }
    fn b_value(&self, u: &Vector) -> f64 {
        0.5 * u.dot(&(&self.qb * u))
    }
    fn b_grad(&self, u: &Vector) -> Vector {
        &self.qb * u
    }
    fn b_hess_action(&self, _u: &Vector, w: &Vector) -> Vector {
        &self.qb * w
    }
    fn a_hess_matrix(&self, _u: &Vector) -> Matrix {
        self.qa.clone()
    }
    fn b_hess_matrix(&self, _u: &Vector) -> Matrix {
        self.qb.clone()
    }
    fn holder_m(&self, _r: f64, rho: f64) -> f64 {
        (self.na + rho.abs() * self.nb).max(1.0)
    }
    fn bound_k(&self, r: f64, rho: f64) -> f64 {
        let q = self.na + rho.abs() * self.nb;
        1f64.max(q * r).max(q + q * r * r / self.mu)
    }
    fn a_increment(&self, u: &Vector, delta: &Vector) -> f64 {
        delta.dot(&(&self.qa * (u + delta * 0.5)))
    }
    fn b_increment(&self, u: &Vector, delta: &Vector) -> f64 {
        delta.dot(&(&self.qb * (u + delta * 0.5)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_pair, random_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn increments_match_plain_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pair = random_pair(&mut rng, 5, 4);
        let q = Matrix::from_fn(5, 5, |i, j| ((i * j) as f64).cos());
        let quad = Quadratic::new(&pair, q, random_vector(&mut rng, 5), 1.0).unwrap();
        let f = Quartic::new(&pair, quad, 0.7).unwrap();
        let u = random_vector(&mut rng, 5);
        let d = random_vector(&mut rng, 5) * 0.3;
        let plain = f.value(&(&u + &d)) - f.value(&u);
        assert!((f.value_increment(&u, &d) - plain).abs() < 1e-12);
    }

    #[test]
    fn coordinate_embedding_of_identity_is_one() {
        assert!((coordinate_embedding(&HilbertPair::identity(4)) - 1.0).abs() < 1e-15);
    }
}
