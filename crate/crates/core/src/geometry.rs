//! Explicit geodesics on `S_μ`, exp/log maps, radial parallel transport and the
//! quantitative radii used by the descent lemmas.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::pair::{HilbertPair, SpherePoint};

/// Below this angle the `θ/sin θ` factor of the log map uses its series.
pub const SINC_SERIES_BELOW: f64 = 1e-4;
/// `logMap` refuses points with `(u,u0)/μ` below `-1 + ANTIPODAL_GUARD`.
pub const ANTIPODAL_GUARD: f64 = 1e-6;
/// Transport step length relative to `√μ`.
pub const TRANSPORT_STEP: f64 = 1e-3;
pub const TRANSPORT_MIN_STEPS: usize = 50;

/// `σ(t) = cos(ωt) u + sin(ωt)/ω v`, `ω = |v|/√μ`.
#[derive(Clone, Debug)]
pub struct Geodesic {
    pub base: SpherePoint,
    pub velocity: Vector,
    pub omega: f64,
}

impl Geodesic {
    pub fn new(pair: &HilbertPair, base: &SpherePoint, velocity: &Vector) -> Self {
        let omega = pair.norm_h(velocity) / base.mu.sqrt();
        Geodesic { base: base.clone(), velocity: velocity.clone(), omega }
    }

    /// `(cos(ωt) − 1, sin(ωt)/ω)` without cancellation.
    fn coefficients(&self, t: f64) -> (f64, f64) {
        if self.omega == 0.0 {
            return (0.0, t);
        }
        let h = (0.5 * self.omega * t).sin();
        (-2.0 * h * h, (self.omega * t).sin() / self.omega)
    }

    /// `σ(t) − u`.
    pub fn displacement(&self, t: f64) -> Vector {
        let (cm1, s) = self.coefficients(t);
        &self.base.u * cm1 + &self.velocity * s
    }

    pub fn point(&self, t: f64) -> Vector {
        let (cm1, s) = self.coefficients(t);
        &self.base.u * (1.0 + cm1) + &self.velocity * s
    }

    pub fn derivative(&self, t: f64) -> Vector {
        let wt = self.omega * t;
        &self.base.u * (-self.omega * wt.sin()) + &self.velocity * wt.cos()
    }

    pub fn second_derivative(&self, t: f64) -> Vector {
        self.point(t) * (-self.omega * self.omega)
    }

    pub fn eval(&self, t: f64) -> (SpherePoint, Vector) {
        (SpherePoint { u: self.point(t), mu: self.base.mu }, self.derivative(t))
    }
}

pub fn exp_map(pair: &HilbertPair, p: &SpherePoint, v: &Vector) -> SpherePoint {
    Geodesic::new(pair, p, v).eval(1.0).0
}

/// Inverse of `exp_{u0}` on the complement of the antipode.
pub fn log_map(pair: &HilbertPair, origin: &SpherePoint, u: &SpherePoint) -> Result<Vector> {
    let mu = origin.mu;
    let c = (pair.inner_h(&u.u, &origin.u) / mu).clamp(-1.0, 1.0);
    if c < -1.0 + ANTIPODAL_GUARD {
        return Err(Error::AntipodalPoint(c));
    }
    let x = &u.u - &origin.u * c;
    let s = pair.norm_h(&x) / mu.sqrt();
    let theta = s.atan2(c);
    let factor = if theta < SINC_SERIES_BELOW { 1.0 + theta * theta / 6.0 } else { theta / s };
    Ok(x * factor)
}

/// Geodesic distance-like quantity `√μ·arccos((u,u0)/μ)`.
pub fn sphere_angle_length(pair: &HilbertPair, origin: &SpherePoint, u: &SpherePoint) -> f64 {
    let c = (pair.inner_h(&u.u, &origin.u) / origin.mu).clamp(-1.0, 1.0);
    origin.mu.sqrt() * c.acos()
}

pub fn transport_steps(speed: f64, mu: f64) -> usize {
    let h = TRANSPORT_STEP * mu.sqrt();
    TRANSPORT_MIN_STEPS.max((speed / h).ceil() as usize)
}

/// Transports `vectors` (tangent at `base`) along `t ↦ σ(t, base, velocity)`, `t ∈ [0,1]`,
/// by RK4 on `φ' = −(φ, σ') Gσ / ‖Gσ‖²`.
pub fn transport_along(pair: &HilbertPair, base: &SpherePoint, velocity: &Vector, vectors: &[Vector]) -> Vec<Vector> {
    let speed = pair.norm_h(velocity);
    if speed == 0.0 {
        return vectors.to_vec();
    }
    let mu = base.mu;
    let omega = speed / mu.sqrt();
    let hu = pair.apply_h(&base.u);
    let hv = pair.apply_h(velocity);
    let gu = pair.riesz(&hu);
    let gv = pair.riesz(&hv);
    let a_uu = hu.dot(&gu);
    let a_uv = hu.dot(&gv);
    let a_vv = hv.dot(&gv);

    // Gσ and Hσ' are combinations of precomputed vectors; keep the coefficients.
    let coeffs = |t: f64| {
        let (s, c) = (omega * t).sin_cos();
        let sw = s / omega;
        let g2 = c * c * a_uu + 2.0 * c * sw * a_uv + sw * sw * a_vv;
        (c / g2, sw / g2, -omega * s, c)
    };
    let rhs = |t: f64, phi: &Vector| -> Vector {
        let (gc, gs, dc, ds) = coeffs(t);
        let k = -(phi.dot(&hu) * dc + phi.dot(&hv) * ds);
        &gu * (k * gc) + &gv * (k * gs)
    };

    let steps = transport_steps(speed, mu);
    let dt = 1.0 / steps as f64;
    vectors
        .iter()
        .map(|w0| {
            let mut phi = w0.clone();
            for i in 0..steps {
                let t = i as f64 * dt;
                let k1 = rhs(t, &phi);
                let k2 = rhs(t + 0.5 * dt, &(&phi + &k1 * (0.5 * dt)));
                let k3 = rhs(t + 0.5 * dt, &(&phi + &k2 * (0.5 * dt)));
                let k4 = rhs(t + dt, &(&phi + &k3 * dt));
                phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            }
            phi
        })
        .collect()
}

/// Parallel transport along the radial geodesic from `origin` to `target`.
#[derive(Clone, Debug)]
pub struct RadialTransport {
    pub origin: SpherePoint,
    pub target: SpherePoint,
    pub log_vector: Vector,
    pub steps: usize,
}

impl RadialTransport {
    pub fn new(pair: &HilbertPair, origin: &SpherePoint, target: &SpherePoint) -> Result<Self> {
        let log_vector = log_map(pair, origin, target)?;
        let steps = transport_steps(pair.norm_h(&log_vector), origin.mu);
        Ok(RadialTransport { origin: origin.clone(), target: target.clone(), log_vector, steps })
    }

    pub fn apply(&self, pair: &HilbertPair, vectors: &[Vector]) -> Vec<Vector> {
        transport_along(pair, &self.origin, &self.log_vector, vectors)
    }

    /// Transport back along the reversed curve: the geodesic from the target with velocity `−σ'(1)`.
    pub fn apply_inverse(&self, pair: &HilbertPair, vectors: &[Vector]) -> Vec<Vector> {
        let g = Geodesic::new(pair, &self.origin, &self.log_vector);
        let back = -g.derivative(1.0);
        let start = SpherePoint { u: g.point(1.0), mu: self.origin.mu };
        transport_along(pair, &start, &back, vectors)
    }
}

/// `W(u) = T_u W` for an E-orthonormal basis of `W ⊂ T_{u0} S_μ`.
pub fn transport_frame(pair: &HilbertPair, origin: &SpherePoint, basis: &[Vector], u: &SpherePoint) -> Result<Vec<Vector>> {
    Ok(RadialTransport::new(pair, origin, u)?.apply(pair, basis))
}

/// Projection of `x` onto the span of an E-orthonormal family.
pub fn project_onto_frame(pair: &HilbertPair, frame: &[Vector], x: &Vector) -> Vector {
    let ex = pair.apply_e(x);
    frame.iter().fold(Vector::zeros(x.len()), |acc, f| acc + f * f.dot(&ex))
}

/// Max over the sample directions (unit elements of `W(u)`) of `‖P w1 − w1‖`, where
/// `w1 = σ'(τ, u, w)` and `P` projects onto `W(σ(τ, u, w))`.
pub fn holonomy_defect(
    pair: &HilbertPair,
    origin: &SpherePoint,
    basis: &[Vector],
    u: &SpherePoint,
    tau: f64,
) -> Result<f64> {
    let frame = transport_frame(pair, origin, basis, u)?;
    let mut directions: Vec<Vector> = frame.clone();
    for i in 0..frame.len() {
        for j in (i + 1)..frame.len() {
            directions.push(&frame[i] + &frame[j]);
            directions.push(&frame[i] - &frame[j]);
        }
    }
    let mut worst: f64 = 0.0;
    for w in directions {
        let w = &w / pair.norm_e(&w);
        let g = Geodesic::new(pair, u, &w);
        let (u1, w1) = g.eval(tau);
        let frame1 = transport_frame(pair, origin, basis, &u1)?;
        let p = project_onto_frame(pair, &frame1, &w1);
        worst = worst.max(pair.norm_e(&(p - &w1)));
    }
    Ok(worst)
}

/// Radii and bounds gating the second-order descent lemmas.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryConstants {
    /// Bound radius `R > 1`.
    pub r: f64,
    pub mu: f64,
    /// `K(R) ≥ 1` bounding `‖D²φ‖` and `‖φ'‖` on `B(0,R) ∩ S_μ`.
    pub k: f64,
    /// Hölder constant `M` of `φ'`, `φ''` on `B(0,R)`.
    pub m: f64,
    pub alpha: f64,
    /// `dim W = n + 1`.
    pub n: usize,
}

impl GeometryConstants {
    pub fn new(r: f64, mu: f64, k: f64, m: f64, alpha: f64, n: usize) -> Result<Self> {
        if !(r > 1.0) || !(mu > 0.0) || !(k >= 1.0) || !(m > 0.0) || !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::HypothesisViolated(format!(
                "geometry constants out of range: R={r}, mu={mu}, K={k}, M={m}, alpha={alpha}"
            )));
        }
        Ok(GeometryConstants { r, mu, k, m, alpha, n })
    }

    /// `C(R,μ) = (R + (R−1)/√μ)/μ`.
    pub fn c_transport(&self) -> f64 {
        (self.r + (self.r - 1.0) / self.mu.sqrt()) / self.mu
    }

    pub fn delta0(&self) -> f64 {
        self.mu.sqrt().min(1.0)
    }

    /// `M(1 + (R + R^α)/μ)`.
    pub fn c_holder(&self) -> f64 {
        self.m * (1.0 + (self.r + self.r.powf(self.alpha)) / self.mu)
    }

    pub fn delta1(&self, beta: f64) -> f64 {
        (beta / (4.0 * self.c_holder())).powf(1.0 / self.alpha).min(1.0)
    }

    pub fn delta2(&self, beta: f64) -> f64 {
        let x = beta / (8.0 * self.mu.sqrt() * self.k * self.c_transport());
        let rest = self.delta1(beta).min(self.delta0());
        if x < std::f64::consts::PI {
            (self.mu.sqrt() * (2.0 * (0.5 * x).sin().powi(2))).min(rest)
        } else {
            rest
        }
    }

    /// `Ĉ = 96 √μ K (3 + √(n+1)) C(R,μ)`.
    pub fn c_hat(&self) -> f64 {
        96.0 * self.mu.sqrt() * self.k * (3.0 + ((self.n + 1) as f64).sqrt()) * self.c_transport()
    }

    pub fn delta3(&self, beta: f64) -> f64 {
        let y = beta / self.c_hat();
        let lin = beta * self.mu / (12.0 * self.k * self.r * (1.0 + ((self.n + 1) as f64).sqrt()));
        let rest = lin.min(self.delta2(beta));
        if y < std::f64::consts::PI {
            (self.mu.sqrt() * (2.0 * (0.5 * y).sin().powi(2))).min(rest)
        } else {
            rest
        }
    }

    pub fn tmax(&self, delta: f64) -> f64 {
        (2.0 * self.mu / self.r).min(delta / 4.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_pair, random_sphere_point, random_unit_tangent};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn round(d: usize) -> HilbertPair {
        HilbertPair::identity(d)
    }

    fn point(pair: &HilbertPair, x: &[f64], mu: f64) -> SpherePoint {
        pair.normalize(&Vector::from_column_slice(x), mu).unwrap()
    }

    #[test]
    fn geodesic_initial_data_and_quarter_period() {
        let pair = round(3);
        let mu = 2.0;
        let p = point(&pair, &[1.0, 0.0, 0.0], mu);
        let v = Vector::from_vec(vec![0.0, mu.sqrt() * PI / 2.0, 0.0]);
        let g = Geodesic::new(&pair, &p, &v);
        let (u0, v0) = g.eval(0.0);
        assert_eq!(u0.u, p.u);
        assert_eq!(v0, v);
        assert!((g.point(1.0) - &v / g.omega).amax() < 1e-14);
    }

    #[test]
    fn exp_of_half_circumference_is_antipode() {
        let pair = round(3);
        let p = point(&pair, &[0.0, 0.0, 1.0], 1.0);
        let v = Vector::from_vec(vec![PI, 0.0, 0.0]);
        assert!((exp_map(&pair, &p, &v).u + &p.u).amax() < 1e-15);
        assert_eq!(exp_map(&pair, &p, &Vector::zeros(3)).u, p.u);
    }

    #[test]
    fn log_on_round_sphere_is_angle_times_direction() {
        let pair = round(3);
        let o = point(&pair, &[1.0, 0.0, 0.0], 1.0);
        for &theta in &[1e-7f64, 1e-3, 0.4, 1.5, 3.0] {
            let u = point(&pair, &[theta.cos(), theta.sin(), 0.0], 1.0);
            let l = log_map(&pair, &o, &u).unwrap();
            assert!((l - Vector::from_vec(vec![0.0, theta, 0.0])).amax() < 1e-12, "theta {theta}");
        }
        assert!(log_map(&pair, &o, &o).unwrap().amax() == 0.0);
        let ortho = point(&pair, &[0.0, 0.0, 1.0], 1.0);
        assert!((log_map(&pair, &o, &ortho).unwrap().norm() - PI / 2.0).abs() < 1e-14);
        let anti = point(&pair, &[-1.0, 1e-9, 0.0], 1.0);
        assert!(matches!(log_map(&pair, &o, &anti), Err(Error::AntipodalPoint(_))));
    }

    #[test]
    fn homogeneity_of_geodesics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pair = random_pair(&mut rng, 6, 5);
        let p = random_sphere_point(&mut rng, &pair, 1.3);
        let v = random_unit_tangent(&mut rng, &pair, &p) * 0.8;
        for _ in 0..20 {
            let a: f64 = rng.random_range(-3.0..3.0);
            let t: f64 = rng.random_range(-2.0..2.0);
            let lhs = Geodesic::new(&pair, &p, &v).point(a * t);
            let rhs = Geodesic::new(&pair, &p, &(&v * a)).point(t);
            assert!((lhs - rhs).amax() < 1e-12);
        }
    }

    #[test]
    fn geodesic_equation_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pair = random_pair(&mut rng, 5, 4);
        let p = random_sphere_point(&mut rng, &pair, 0.6);
        let v = random_unit_tangent(&mut rng, &pair, &p) * 1.7;
        let g = Geodesic::new(&pair, &p, &v);
        let speed2 = pair.inner_h(&v, &v);
        for k in 0..10 {
            let t = k as f64 * 0.13;
            let r = g.second_derivative(t) + g.point(t) * (speed2 / p.mu);
            assert!(r.amax() < 1e-12);
        }
    }

    #[test]
    fn transport_of_own_velocity_on_round_sphere() {
        let pair = round(4);
        let p = point(&pair, &[1.0, 0.2, -0.3, 0.1], 1.5);
        let v = pair.project_tangent_h(&p, &Vector::from_vec(vec![0.1, 0.9, 0.4, -0.2]));
        let g = Geodesic::new(&pair, &p, &v);
        let out = transport_along(&pair, &p, &v, &[v.clone()]);
        assert!((&out[0] - g.derivative(1.0)).amax() < 1e-10);
    }

    #[test]
    fn transport_identity_at_origin_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pair = random_pair(&mut rng, 7, 6);
        let o = random_sphere_point(&mut rng, &pair, 1.0);
        let w = random_unit_tangent(&mut rng, &pair, &o);
        let same = RadialTransport::new(&pair, &o, &o).unwrap();
        assert_eq!(same.apply(&pair, &[w.clone()])[0], w);
        let v = random_unit_tangent(&mut rng, &pair, &o) * 0.9;
        let target = exp_map(&pair, &o, &v);
        let rt = RadialTransport::new(&pair, &o, &target).unwrap();
        let tw = rt.apply(&pair, &[w.clone()]).remove(0);
        assert!((pair.norm_e(&tw) - 1.0).abs() < 1e-6);
        assert!(pair.inner_h(&target.u, &tw).abs() < 1e-6);
        let back = rt.apply_inverse(&pair, &[tw]).remove(0);
        assert!(pair.norm_e(&(back - w)) < 1e-6);
    }

    /// Gauss–Bonnet on the unit sphere: transport of a tangent vector around the
    /// octant triangle `e1 → e2 → e3 → e1` rotates it by the enclosed area `π/2`.
    #[test]
    fn octant_holonomy_is_spherical_excess() {
        let pair = round(3);
        let e = |i: usize| point(&pair, &[(i == 0) as u8 as f64, (i == 1) as u8 as f64, (i == 2) as u8 as f64], 1.0);
        let start = e(0);
        let w0 = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        let mut w = w0.clone();
        let mut at = start.clone();
        for next in [e(1), e(2), e(0)] {
            let rt = RadialTransport::new(&pair, &at, &next).unwrap();
            w = rt.apply(&pair, &[w]).remove(0);
            at = next;
        }
        let angle = w0.dot(&w).clamp(-1.0, 1.0).acos();
        assert!((angle - PI / 2.0).abs() < 1e-8, "angle {angle}");
    }

    #[test]
    fn delta_hierarchy() {
        let g = GeometryConstants::new(3.0, 1.0, 5.0, 7.0, 1.0, 1).unwrap();
        for &beta in &[0.01, 0.3, 0.9] {
            let d1 = g.delta1(beta);
            let d2 = g.delta2(beta);
            let d3 = g.delta3(beta);
            assert!(d1 <= 1.0 && d3 > 0.0);
            assert!(d3 <= d2 && d2 <= d1.min(g.delta0()));
        }
        let g = GeometryConstants::new(3.0, 1.0, 5.0, 1e-3, 0.5, 1).unwrap();
        let ratio = g.delta1(0.02) / g.delta1(0.01);
        assert!((ratio - 4.0).abs() < 1e-12 || g.delta1(0.02) == 1.0);
        assert!((g.tmax(0.4) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn flat_holonomy_along_one_great_circle_vanishes() {
        let pair = round(3);
        let o = point(&pair, &[1.0, 0.0, 0.0], 1.0);
        let basis = vec![Vector::from_vec(vec![0.0, 1.0, 0.0])];
        let u = point(&pair, &[0.3f64.cos(), 0.3f64.sin(), 0.0], 1.0);
        let d = holonomy_defect(&pair, &o, &basis, &u, 0.2).unwrap();
        assert!(d < 1e-8, "defect {d}");
        assert_eq!(holonomy_defect(&pair, &o, &basis, &o, 0.0).unwrap(), 0.0);
    }
}
