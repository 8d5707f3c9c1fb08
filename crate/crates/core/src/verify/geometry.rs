//! Geodesic, exp/log and transport invariants on random banded pairs.

use rand::Rng;
use rayon::prelude::*;

use crate::geometry::{exp_map, log_map, sphere_angle_length, Geodesic, GeometryConstants, RadialTransport};
use crate::linalg::Vector;
use crate::pair::{HilbertPair, SpherePoint};
use crate::sampling::{random_pair, random_sphere_point, random_unit_tangent};

use super::{sample_rng, Check};

/// Measured quantities of one random instance; bounds are reported as ratios to their
/// right-hand sides.
#[derive(Clone, Debug, Default)]
pub struct GeometrySample {
    pub sphere: f64,
    pub speed: f64,
    pub round_trip: f64,
    pub log_norm: f64,
    pub isometry: f64,
    pub tangency: f64,
    pub inverse: f64,
    pub diff_transport: f64,
    pub tmax_containment: f64,
    pub velocity_drift: f64,
}

/// Unit H-speed tangent at `p`.
fn unit_h_tangent<R: Rng>(rng: &mut R, pair: &HilbertPair, p: &SpherePoint) -> Vector {
    let w = random_unit_tangent(rng, pair, p);
    let n = pair.norm_h(&w);
    w / n
}

/// `exp_p(s w)` with `s` halved until the point lies within E-distance `radius` of `p`;
/// `p` itself when no such step is found.
pub(crate) fn point_near<R: Rng>(rng: &mut R, pair: &HilbertPair, p: &SpherePoint, radius: f64) -> SpherePoint {
    let w = random_unit_tangent(rng, pair, p);
    let mut s = radius * rng.random_range(0.05..1.0);
    for _ in 0..200 {
        let q = exp_map(pair, p, &(&w * s));
        if pair.norm_e(&(&q.u - &p.u)) < radius {
            return q;
        }
        s *= 0.5;
    }
    p.clone()
}

pub fn geometry_sample<R: Rng>(rng: &mut R, d: usize) -> GeometrySample {
    let mu: f64 = rng.random_range(0.5..2.0);
    let pair = random_pair(rng, d, 3);
    geometry_sample_on(rng, &pair, mu)
}

/// One instance on a given pair: random base point on `S_μ`, directions and targets.
pub fn geometry_sample_on<R: Rng>(rng: &mut R, pair: &HilbertPair, mu: f64) -> GeometrySample {
    let p = random_sphere_point(rng, pair, mu);
    let mut s = GeometrySample::default();

    let v = unit_h_tangent(rng, pair, &p) * (mu.sqrt() * rng.random_range(0.05..3.0));
    let g = Geodesic::new(pair, &p, &v);
    let hs = pair.norm_h(&v);
    for k in 0..=10 {
        let t = k as f64 / 10.0;
        let x = g.point(t);
        s.sphere = s.sphere.max((pair.inner_h(&x, &x) - mu).abs() / mu);
        s.speed = s.speed.max((pair.norm_h(&g.derivative(t)) - hs).abs());
    }

    // away from the antipode: (u, p) > −0.9μ
    let angle = rng.random_range(0.0..0.9f64.acos());
    let u = exp_map(pair, &p, &(unit_h_tangent(rng, pair, &p) * (mu.sqrt() * angle)));
    match log_map(pair, &p, &u) {
        Ok(l) => {
            let back = exp_map(pair, &p, &l);
            s.round_trip = pair.norm_e(&(&back.u - &u.u)) / pair.norm_e(&u.u).max(1.0);
            s.log_norm = (pair.norm_h(&l) - sphere_angle_length(pair, &p, &u)).abs();
        }
        Err(_) => {
            s.round_trip = f64::INFINITY;
            s.log_norm = f64::INFINITY;
        }
    }

    let target = exp_map(pair, &p, &(unit_h_tangent(rng, pair, &p) * (mu.sqrt() * rng.random_range(0.0..1.5))));
    let w0 = random_unit_tangent(rng, pair, &p);
    match RadialTransport::new(pair, &p, &target) {
        Ok(rt) => {
            let tw = rt.apply(pair, std::slice::from_ref(&w0)).remove(0);
            s.isometry = (pair.norm_e(&tw) - 1.0).abs();
            s.tangency = pair.inner_h(&target.u, &tw).abs();
            let back = rt.apply_inverse(pair, &[tw]).remove(0);
            s.inverse = pair.norm_e(&(back - &w0));
        }
        Err(_) => {
            s.isometry = f64::INFINITY;
            s.tangency = f64::INFINITY;
            s.inverse = f64::INFINITY;
        }
    }

    // ‖T_u w0 − w0‖ ≤ C(R,μ)|v|‖w0‖ with u0 ∈ B(0,R−1), u within δ0
    let r = pair.norm_e(&p.u) + 1.0;
    let consts = GeometryConstants::new(r, mu, 1.0, 1.0, 1.0, 0).expect("valid constants");
    let delta0 = consts.delta0();
    let u = point_near(rng, pair, &p, delta0);
    s.diff_transport = match RadialTransport::new(pair, &p, &u) {
        Ok(rt) => {
            let tw = rt.apply(pair, std::slice::from_ref(&w0)).remove(0);
            let bound = consts.c_transport() * pair.norm_h(&rt.log_vector) * pair.norm_e(&w0);
            if bound > 0.0 {
                pair.norm_e(&(tw - &w0)) / bound
            } else {
                0.0
            }
        }
        Err(_) => f64::INFINITY,
    };

    // σ(t,u,v) ∈ B(u0,δ) for u within δ/2, ‖v‖ ≤ 1, t < t_max; and the velocity drift
    let delta = delta0 * rng.random_range(0.01..1.0);
    let tmax = consts.tmax(delta);
    let u = point_near(rng, pair, &p, 0.5 * delta);
    let v = random_unit_tangent(rng, pair, &u) * rng.random_range(0.05..1.0);
    let g = Geodesic::new(pair, &u, &v);
    let t = tmax * rng.random_range(0.0..1.0);
    s.tmax_containment = pair.norm_e(&(g.point(t) - &p.u)) / delta;
    s.velocity_drift = pair.norm_e(&(g.derivative(t) - &v)) / (r * tmax / mu);
    s
}

/// Per-dimension checks over `seeds` instances each.
pub fn geometry_suite(seed: u64, dims: &[usize], seeds: usize) -> Vec<Check> {
    let mut all: Vec<GeometrySample> = Vec::with_capacity(dims.len() * seeds);
    for &d in dims {
        let batch: Vec<GeometrySample> = (0..seeds)
            .into_par_iter()
            .map(|i| geometry_sample(&mut sample_rng(seed, ((d as u64) << 32) | i as u64), d))
            .collect();
        all.extend(batch);
    }
    geometry_checks(&all, format!("dims {dims:?}, {seeds} instances each"))
}

/// `samples` instances on a fixed pair with masses in `[0.5, 2)`.
pub fn geometry_suite_on(seed: u64, pair: &HilbertPair, samples: usize) -> Vec<Check> {
    let all: Vec<GeometrySample> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, (1u64 << 40) | i as u64);
            let mu = rng.random_range(0.5..2.0);
            geometry_sample_on(&mut rng, pair, mu)
        })
        .collect();
    geometry_checks(&all, format!("given pair of dimension {}, {samples} instances", pair.dim()))
}

fn geometry_checks(all: &[GeometrySample], note: String) -> Vec<Check> {
    let col = |f: fn(&GeometrySample) -> f64| all.iter().map(f).collect::<Vec<f64>>();
    vec![
        Check::from_values("geometry.sphere_preservation", &col(|s| s.sphere), 1e-10).with_note(note),
        Check::from_values("geometry.speed_conservation", &col(|s| s.speed), 1e-10),
        Check::from_values("geometry.exp_log_round_trip", &col(|s| s.round_trip), 1e-9),
        Check::from_values("geometry.log_norm_identity", &col(|s| s.log_norm), 1e-10),
        Check::from_values("geometry.transport_isometry", &col(|s| s.isometry), 1e-6),
        Check::from_values("geometry.transport_tangency", &col(|s| s.tangency), 1e-6),
        Check::from_values("geometry.transport_inverse", &col(|s| s.inverse), 1e-6),
        Check::from_values("geometry.transport_difference_bound", &col(|s| s.diff_transport), 1.0)
            .with_note("ratio to C(R,mu)|v| ||w0||"),
        Check::from_values("geometry.tmax_containment", &col(|s| s.tmax_containment), 1.0).with_note("ratio to delta"),
        Check::from_values("geometry.velocity_drift", &col(|s| s.velocity_drift), 1.0).with_note("ratio to R t_max / mu"),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let checks = geometry_suite(3, &[3, 8], 20);
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn samples_are_reproducible() {
        let a = geometry_sample(&mut sample_rng(5, 9), 6);
        let b = geometry_sample(&mut sample_rng(5, 9), 6);
        assert_eq!(a.round_trip.to_bits(), b.round_trip.to_bits());
        assert_eq!(a.diff_transport.to_bits(), b.diff_transport.to_bits());
    }
}
