//! Second-order descent along a negative subspace `W(u)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::ConstrainedFunctional;
use crate::geometry::{Geodesic, GeometryConstants};
use crate::linalg::{sym_eigen, Matrix, Vector};
use crate::pair::{HilbertPair, SpherePoint};

use super::DECREASE_SLACK;

/// `‖P_u∇φ(u)‖` at or below this is treated as zero.
pub const ZERO_DIRECTION: f64 = 1e-12;

#[derive(Clone, Debug)]
pub enum Direction {
    /// `ŵ(u) = −P_u∇φ(u)/‖P_u∇φ(u)‖` and its coefficients in the frame.
    Unit { w: Vector, coefficients: Vec<f64> },
    Zero,
}

/// Frame coordinates of `P_u∇φ(u)`: `⟨∇φ, e_i⟩ = φ′(u)·e_i` for tangent `e_i`.
pub fn projected_gradient_coefficients<F: ConstrainedFunctional + ?Sized>(f: &F, u: &SpherePoint, frame: &[Vector]) -> Vec<f64> {
    let g = f.grad_dual(&u.u);
    frame.iter().map(|e| g.dot(e)).collect()
}

pub fn combine(frame: &[Vector], coefficients: &[f64]) -> Vector {
    let mut w = Vector::zeros(frame[0].len());
    for (e, c) in frame.iter().zip(coefficients) {
        w.axpy(*c, e, 1.0);
    }
    w
}

pub fn descent_direction<F: ConstrainedFunctional + ?Sized>(f: &F, u: &SpherePoint, frame: &[Vector]) -> (Direction, f64) {
    let c = projected_gradient_coefficients(f, u, frame);
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= ZERO_DIRECTION {
        return (Direction::Zero, norm);
    }
    let coefficients: Vec<f64> = c.iter().map(|x| -x / norm).collect();
    (Direction::Unit { w: combine(frame, &coefficients), coefficients }, norm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentCase {
    /// Along `ŵ(u)`.
    Gradient,
    /// `P_u∇φ(u) = 0`, along a unit vector of `W(u)`.
    Frame,
    /// At a nearby point along the transported direction.
    Neighborhood,
}

#[derive(Clone, Debug, Serialize)]
pub struct DescentCertificate {
    pub case: DescentCase,
    pub beta: f64,
    pub t: f64,
    pub decrease: f64,
    pub bound: f64,
    pub valid: bool,
    #[serde(skip)]
    pub direction: Vector,
}

/// `φ(u) − φ(exp_u(t v))` computed from the cancellation-free displacement.
pub fn geodesic_decrease<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, u: &SpherePoint, v: &Vector, t: f64) -> f64 {
    let g = Geodesic::new(pair, u, v);
    -f.value_increment(&u.u, &g.displacement(t))
}

fn check_ball(pair: &HilbertPair, u0: &SpherePoint, u: &SpherePoint, radius: f64) -> Result<()> {
    let distance = pair.norm_e(&(&u.u - &u0.u));
    if !(distance < radius) {
        return Err(Error::PreconditionOutOfBall { distance, radius });
    }
    Ok(())
}

fn check_time(consts: &GeometryConstants, beta: f64, t: f64) -> Result<f64> {
    let tmax = consts.tmax(consts.delta3(beta));
    if !(t > 0.0 && t < tmax) {
        return Err(Error::HypothesisViolated(format!("step t = {t:.3e} outside (0, t_max = {tmax:.3e})")));
    }
    Ok(tmax)
}

/// One step `exp_u(t ŵ(u))` (or along `frame[0]` when `ŵ(u)` vanishes), certified
/// against `β t²/12`.
pub fn descent_step<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    consts: &GeometryConstants,
    u0: &SpherePoint,
    u: &SpherePoint,
    frame: &[Vector],
    beta: f64,
    t: f64,
) -> Result<DescentCertificate> {
    check_ball(pair, u0, u, 0.5 * consts.delta3(beta))?;
    check_time(consts, beta, t)?;
    if frame.is_empty() {
        return Err(Error::FrameDimensionTooSmall { need: 1, got: 0 });
    }
    let (dir, _) = descent_direction(f, u, frame);
    let (case, v) = match dir {
        Direction::Unit { w, .. } => (DescentCase::Gradient, w),
        Direction::Zero => (DescentCase::Frame, frame[0].clone()),
    };
    let decrease = geodesic_decrease(f, pair, u, &v, t);
    let bound = beta * t * t / 12.0;
    Ok(DescentCertificate { case, beta, t, decrease, bound, valid: decrease > bound - DECREASE_SLACK, direction: v })
}

/// Operator norm of `T_u|_W − T_z|_W` from the transported images of one E-orthonormal basis.
pub fn frame_distance(pair: &HilbertPair, a: &[Vector], b: &[Vector]) -> Result<f64> {
    let diffs: Vec<Vector> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let k = diffs.len();
    let e: Vec<Vector> = diffs.iter().map(|x| pair.apply_e(x)).collect();
    let g = Matrix::from_fn(k, k, |i, j| 0.5 * (diffs[i].dot(&e[j]) + diffs[j].dot(&e[i])));
    let (vals, _) = sym_eigen(&g)?;
    Ok(vals.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Descent at `z` along the direction chosen at `u`, carried by the frames: certified
/// against `β t²/24` for `t ∈ [t0, t_max)`.
#[allow(clippy::too_many_arguments)]
pub fn descent_step_near<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    consts: &GeometryConstants,
    u0: &SpherePoint,
    u: &SpherePoint,
    frame_u: &[Vector],
    z: &SpherePoint,
    frame_z: &[Vector],
    beta: f64,
    t: f64,
    t0: f64,
) -> Result<DescentCertificate> {
    check_ball(pair, u0, u, 0.5 * consts.delta3(beta))?;
    check_ball(pair, u0, z, 0.5 * consts.delta3(beta))?;
    check_time(consts, beta, t)?;
    if !(t >= t0 && t0 > 0.0) {
        return Err(Error::HypothesisViolated(format!("need 0 < t0 <= t, got t0 = {t0:.3e}, t = {t:.3e}")));
    }
    if frame_u.is_empty() || frame_u.len() != frame_z.len() {
        return Err(Error::FrameDimensionTooSmall { need: frame_u.len().max(1), got: frame_z.len() });
    }
    let gap = frame_distance(pair, frame_u, frame_z)?;
    let allowed = beta * t0 / (48.0 * consts.k);
    if !(gap < allowed) {
        return Err(Error::HypothesisViolated(format!(
            "transported frames differ by {gap:.3e}, above beta t0/(48K) = {allowed:.3e}"
        )));
    }
    let coefficients = match descent_direction(f, u, frame_u).0 {
        Direction::Unit { coefficients, .. } => coefficients,
        Direction::Zero => {
            let mut c = vec![0.0; frame_u.len()];
            c[0] = 1.0;
            c
        }
    };
    let v = combine(frame_z, &coefficients);
    let decrease = geodesic_decrease(f, pair, z, &v, t);
    let bound = beta * t * t / 24.0;
    Ok(DescentCertificate {
        case: DescentCase::Neighborhood,
        beta,
        t,
        decrease,
        bound,
        valid: decrease > bound - DECREASE_SLACK,
        direction: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::approx_morse_index;
    use crate::problems::toy::Quadratic;

    /// `φ = ½(−x² + y² + 2z²)` on the unit round sphere; `u0 = e_z` is a critical point
    /// with `D²φ` eigenvalues `−3, −1` on its tangent plane.
    fn saddle() -> (HilbertPair, Quadratic, SpherePoint) {
        let pair = HilbertPair::identity(3);
        let q = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0, 2.0]));
        let f = Quadratic::new(&pair, q, Vector::zeros(3), 1.0).unwrap();
        let p = pair.normalize(&Vector::from_vec(vec![0.0, 0.0, 1.0]), 1.0).unwrap();
        (pair, f, p)
    }

    #[test]
    fn direction_cases() {
        let (pair, f, p) = saddle();
        let e = vec![Vector::from_vec(vec![1.0, 0.0, 0.0])];
        assert!(matches!(descent_direction(&f, &p, &e).0, Direction::Zero));
        let u = pair.normalize(&Vector::from_vec(vec![0.1, 0.0, 1.0]), 1.0).unwrap();
        let t = pair.project_tangent_e(&u, &Vector::from_vec(vec![1.0, 0.0, 0.0]));
        let frame = vec![&t / pair.norm_e(&t)];
        match descent_direction(&f, &u, &frame).0 {
            Direction::Unit { w, .. } => assert!((w - &frame[0]).amax() < 1e-14),
            Direction::Zero => panic!("expected a direction"),
        }
    }

    #[test]
    fn quadratic_saddle_certificates() {
        let (pair, f, p) = saddle();
        let morse = approx_morse_index(&f, &pair, &p, 0.5, false).unwrap();
        assert_eq!(morse.count, 2);
        let consts = GeometryConstants::new(2.0, 1.0, f.bound_k(2.0), f.holder_m(2.0), 1.0, 0).unwrap();
        let beta = 0.5;
        let tmax = consts.tmax(consts.delta3(beta));
        let frame = vec![morse.basis[0].clone()];
        for t in [tmax / 8.0, tmax / 4.0] {
            let c = descent_step(&f, &pair, &consts, &p, &p, &frame, beta, t).unwrap();
            assert_eq!(c.case, DescentCase::Frame);
            assert!(c.valid && c.decrease > c.bound, "{c:?}");
        }
        let far = pair.normalize(&Vector::from_vec(vec![1.0, 0.0, 0.0]), 1.0).unwrap();
        assert!(matches!(
            descent_step(&f, &pair, &consts, &p, &far, &frame, beta, tmax / 8.0),
            Err(Error::PreconditionOutOfBall { .. })
        ));
    }

    #[test]
    fn taylor_limit_of_decrease() {
        let (pair, f, p) = saddle();
        let w = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let t: f64 = 1e-4;
        let ratio = geodesic_decrease(&f, &pair, &p, &w, t) / (t * t);
        assert!((ratio - 1.5).abs() < 1e-6, "{ratio}");
    }
}
