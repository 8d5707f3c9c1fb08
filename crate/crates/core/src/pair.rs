//! Finite-dimensional Hilbert pair `E ↪ H`, the mass sphere and its tangent spaces.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, sym_eigen, BandCholesky, Matrix, SymBand, Vector};

/// Relative symmetry tolerance for Gram matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Allowed excess of the injection norm over 1.
pub const INJECTION_TOL: f64 = 1e-10;
/// Relative tolerance for sphere membership.
pub const SPHERE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct HilbertPair {
    gram_e: SymBand,
    gram_h: SymBand,
    factor_e: BandCholesky,
    rescaled_by: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct PairFile {
    dim: usize,
    #[serde(rename = "gramE")]
    gram_e: Vec<f64>,
    #[serde(rename = "gramH")]
    gram_h: Vec<f64>,
}

impl HilbertPair {
    pub fn new(gram_e: Matrix, gram_h: Matrix) -> Result<Self> {
        let d = gram_e.nrows();
        for (m, name) in [(&gram_e, "gramE"), (&gram_h, "gramH")] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: m.ncols() });
            }
            if d == 0 {
                return Err(Error::Config("dimension must be positive".into()));
            }
            if asymmetry(m) > SYMMETRY_TOL {
                return Err(Error::NotSymmetric(name));
            }
        }
        let mut gram_e = SymBand::new(gram_e);
        let gram_h = SymBand::new(gram_h);
        BandCholesky::factor(gram_h.dense(), gram_h.band())
            .ok_or(Error::NotPositiveDefinite("gramH"))?;
        let mut factor_e = BandCholesky::factor(gram_e.dense(), gram_e.band())
            .ok_or(Error::NotPositiveDefinite("gramE"))?;

        let mut rescaled_by = None;
        let band = gram_e.band().max(gram_h.band());
        let slack = gram_e.dense() * (1.0 + INJECTION_TOL) - gram_h.dense();
        if BandCholesky::factor(&slack, band).is_none() {
            let top = largest_generalized_eigenvalue(gram_h.dense(), &factor_e)?;
            if top > 1.0 + INJECTION_TOL {
                warn!("injection norm squared {top:.6e} exceeds 1; rescaling gramE by it");
                gram_e = SymBand::new(gram_e.dense() * top);
                factor_e = BandCholesky::factor(gram_e.dense(), gram_e.band())
                    .ok_or(Error::NotPositiveDefinite("gramE"))?;
                rescaled_by = Some(top);
            }
        }
        Ok(HilbertPair { gram_e, gram_h, factor_e, rescaled_by })
    }

    /// `E = H = I`: the round sphere.
    pub fn identity(d: usize) -> Self {
        let i = Matrix::identity(d, d);
        HilbertPair::new(i.clone(), i).expect("identity pair is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: PairFile = serde_json::from_str(text)?;
        let d = f.dim;
        if f.gram_e.len() != d * d || f.gram_h.len() != d * d {
            return Err(Error::Config(format!("pair file: expected {} entries per matrix", d * d)));
        }
        HilbertPair::new(Matrix::from_row_slice(d, d, &f.gram_e), Matrix::from_row_slice(d, d, &f.gram_h))
    }

    pub fn to_json(&self) -> String {
        let row_major = |m: &Matrix| m.transpose().as_slice().to_vec();
        let f = PairFile {
            dim: self.dim(),
            gram_e: row_major(self.gram_e.dense()),
            gram_h: row_major(self.gram_h.dense()),
        };
        serde_json::to_string(&f).expect("serializable")
    }

    pub fn dim(&self) -> usize {
        self.gram_e.dim()
    }

    pub fn gram_e(&self) -> &Matrix {
        self.gram_e.dense()
    }

    pub fn gram_h(&self) -> &Matrix {
        self.gram_h.dense()
    }

    pub fn factor_e(&self) -> &BandCholesky {
        &self.factor_e
    }

    /// Factor applied to gramE at construction, if the injection check failed.
    pub fn rescaled_by(&self) -> Option<f64> {
        self.rescaled_by
    }

    fn check(&self, v: &Vector) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    pub fn apply_e(&self, x: &Vector) -> Vector {
        self.gram_e.mul(x)
    }

    pub fn apply_h(&self, x: &Vector) -> Vector {
        self.gram_h.mul(x)
    }

    pub fn inner_e(&self, a: &Vector, b: &Vector) -> f64 {
        self.gram_e.form(a, b)
    }

    pub fn inner_h(&self, a: &Vector, b: &Vector) -> f64 {
        self.gram_h.form(a, b)
    }

    pub fn try_inner_e(&self, a: &Vector, b: &Vector) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.inner_e(a, b))
    }

    pub fn try_inner_h(&self, a: &Vector, b: &Vector) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.inner_h(a, b))
    }

    pub fn norm_e(&self, a: &Vector) -> f64 {
        self.inner_e(a, a).max(0.0).sqrt()
    }

    pub fn norm_h(&self, a: &Vector) -> f64 {
        self.inner_h(a, a).max(0.0).sqrt()
    }

    /// E-Riesz representative `E^{-1} ℓ` of a linear form given by coordinates.
    pub fn riesz(&self, form: &Vector) -> Vector {
        self.factor_e.solve(form)
    }

    /// Dual norm `sup_{‖x‖=1} ℓ·x = sqrt(ℓ^T E^{-1} ℓ)`.
    pub fn dual_norm(&self, form: &Vector) -> f64 {
        self.factor_e.solve_lower(form).norm()
    }

    /// `Gu`, defined by `⟨Gu, h⟩ = (u, h)` for all `h`.
    pub fn apply_g(&self, u: &Vector) -> Vector {
        self.riesz(&self.apply_h(u))
    }

    /// `x − ((u,x)/μ) u`.
    pub fn project_tangent_h(&self, p: &SpherePoint, x: &Vector) -> Vector {
        let c = self.inner_h(&p.u, x) / p.mu;
        x - &p.u * c
    }

    /// E-orthogonal projection onto `T_u S_μ = (Gu)^⊥`.
    pub fn project_tangent_e(&self, p: &SpherePoint, x: &Vector) -> Vector {
        let gu = self.apply_g(&p.u);
        self.project_tangent_e_with(p, x, &gu)
    }

    pub fn project_tangent_e_with(&self, p: &SpherePoint, x: &Vector, gu: &Vector) -> Vector {
        // ⟨x, Gu⟩ = (x, u) and ‖Gu‖² = (u, Gu)
        let hu = self.apply_h(&p.u);
        let c = x.dot(&hu) / gu.dot(&hu);
        x - gu * c
    }

    /// Rescales `x` (nonzero) onto `S_μ`.
    pub fn normalize(&self, x: &Vector, mu: f64) -> Result<SpherePoint> {
        self.check(x)?;
        let n = self.norm_h(x);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::HypothesisViolated("cannot normalize a zero vector".into()));
        }
        Ok(SpherePoint { u: x * (mu.sqrt() / n), mu })
    }

    pub fn is_tangent(&self, p: &SpherePoint, v: &Vector) -> bool {
        self.inner_h(&p.u, v).abs() <= SPHERE_TOL * p.mu.sqrt() * self.norm_h(v).max(f64::MIN_POSITIVE)
    }

    /// Largest generalized eigenvalue of the pencil `(H, E)`.
    pub fn injection_norm_squared(&self) -> Result<f64> {
        largest_generalized_eigenvalue(self.gram_h.dense(), &self.factor_e)
    }
}

fn largest_generalized_eigenvalue(q: &Matrix, factor: &BandCholesky) -> Result<f64> {
    let (vals, _) = sym_eigen(&factor.congruence(q))?;
    Ok(*vals.last().expect("nonempty"))
}

/// A vector on the mass sphere `S_μ = {(u,u) = μ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpherePoint {
    pub u: Vector,
    pub mu: f64,
}

impl SpherePoint {
    /// Checked constructor: `|(u,u) − μ| ≤ 1e-9 μ`.
    pub fn new(pair: &HilbertPair, u: Vector, mu: f64) -> Result<Self> {
        pair.check(&u)?;
        if !(mu > 0.0) {
            return Err(Error::Config(format!("mass must be positive, got {mu}")));
        }
        let m = pair.inner_h(&u, &u);
        if (m - mu).abs() > SPHERE_TOL * mu {
            return Err(Error::HypothesisViolated(format!("(u,u) = {m} is not on S_mu, mu = {mu}")));
        }
        Ok(SpherePoint { u, mu })
    }

    pub fn sphere_residual(&self, pair: &HilbertPair) -> f64 {
        (pair.inner_h(&self.u, &self.u) - self.mu).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_pair, random_sphere_point, random_vector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_pair_basics() {
        let pair = HilbertPair::identity(4);
        let a = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let b = Vector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(pair.inner_e(&a, &b), 0.0);
        let x = Vector::from_vec(vec![0.3, -1.0, 2.0, 0.5]);
        assert!((pair.apply_g(&x) - &x).amax() < 1e-15);
    }

    #[test]
    fn coordinate_tangent_projection() {
        let pair = HilbertPair::identity(3);
        let p = SpherePoint::new(&pair, Vector::from_vec(vec![1.0, 0.0, 0.0]), 1.0).unwrap();
        let x = Vector::from_vec(vec![1.0, 1.0, 0.0]);
        let y = pair.project_tangent_h(&p, &x);
        assert!((y - Vector::from_vec(vec![0.0, 1.0, 0.0])).amax() < 1e-15);
        assert!(pair.project_tangent_h(&p, &p.u).amax() < 1e-15);
    }

    #[test]
    fn g_is_riesz_of_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pair = random_pair(&mut rng, 12, 11);
        let p = random_sphere_point(&mut rng, &pair, 0.7);
        let gu = pair.apply_g(&p.u);
        for _ in 0..100 {
            let h = random_vector(&mut rng, 12);
            assert!((pair.inner_e(&gu, &h) - pair.inner_h(&p.u, &h)).abs() < 1e-10);
        }
        let ngu = pair.norm_e(&gu);
        assert!(ngu <= pair.norm_h(&p.u) + 1e-12);
        assert!(ngu * pair.norm_e(&p.u) >= p.mu - 1e-10);
        let x = random_vector(&mut rng, 12);
        let t = pair.project_tangent_e(&p, &x);
        assert!(pair.inner_h(&p.u, &t).abs() < 1e-10);
        assert!(pair.project_tangent_e(&p, &gu).amax() < 1e-12);
    }

    #[test]
    fn injection_violation_is_rescaled() {
        let e = Matrix::identity(3, 3);
        let h = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 4.0, 2.0]));
        let pair = HilbertPair::new(e, h).unwrap();
        assert!((pair.rescaled_by().unwrap() - 4.0).abs() < 1e-12);
        assert!(pair.injection_norm_squared().unwrap() <= 1.0 + INJECTION_TOL);
    }

    #[test]
    fn equal_forms_are_accepted_unscaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_pair(&mut rng, 6, 5);
        let pair = HilbertPair::new(q.gram_h().clone(), q.gram_h().clone()).unwrap();
        assert!(pair.rescaled_by().is_none());
    }

    #[test]
    fn rejects_bad_input() {
        let mut a = Matrix::identity(3, 3);
        a[(0, 1)] = 0.5;
        assert!(matches!(HilbertPair::new(a, Matrix::identity(3, 3)), Err(Error::NotSymmetric(_))));
        let mut b = Matrix::identity(3, 3);
        b[(2, 2)] = -1.0;
        assert!(matches!(
            HilbertPair::new(Matrix::identity(3, 3), b),
            Err(Error::NotPositiveDefinite(_))
        ));
        let pair = HilbertPair::identity(3);
        assert!(pair.try_inner_e(&Vector::zeros(3), &Vector::zeros(2)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pair = random_pair(&mut rng, 5, 2);
        let back = HilbertPair::from_json(&pair.to_json()).unwrap();
        assert_eq!(back.gram_e(), pair.gram_e());
        assert_eq!(back.gram_h(), pair.gram_h());
    }
}
