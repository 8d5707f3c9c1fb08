//! `D²φ` against finite differences along geodesics, and the functional invariants.

use rand::Rng;
use rayon::prelude::*;

use crate::functional::{approx_morse_index, d2phi, ConstrainedFunctional};
use crate::geometry::Geodesic;
use crate::linalg::{Matrix, Vector};
use crate::pair::{HilbertPair, SpherePoint};
use crate::problems::toy::{form_norm, Quadratic, Quartic};
use crate::sampling::{random_pair, random_sphere_point, random_unit_tangent, random_vector};

use super::{sample_rng, Check};

/// Richardson-extrapolated central second difference of `t ↦ φ(c(t)) − φ(c(0))`,
/// where `incr(t)` returns that increment.
pub fn second_difference(incr: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d = |h: f64| (incr(h) + incr(-h)) / (h * h);
    (4.0 * d(0.5 * h) - d(h)) / 3.0
}

/// Relative error of `D²φ(u)[a,a]` against the second derivative of `φ` along `σ(t,u,a)`,
/// measured against the size of the two terms of `D²φ`.
pub fn geodesic_identity_error<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, p: &SpherePoint, a: &Vector, h: f64) -> f64 {
    let g = Geodesic::new(pair, p, a);
    let fd = second_difference(|t| f.value_increment(&p.u, &g.displacement(t)), h);
    let exact = d2phi(f, pair, p, a, a);
    let lam = f.grad_dual(&p.u).dot(&p.u) / pair.inner_h(&p.u, &p.u);
    let scale = exact.abs().max(a.dot(&f.hess_action(&p.u, a)).abs() + (lam * pair.inner_h(a, a)).abs());
    (fd - exact).abs() / scale.max(f64::MIN_POSITIVE)
}

/// A random quartic on a random pair, a point and a unit tangent.
pub fn random_probe<R: Rng>(rng: &mut R) -> (HilbertPair, Quartic, SpherePoint, Vector) {
    let d = rng.random_range(3..=12);
    let pair = random_pair(rng, d, 2);
    let mu = rng.random_range(0.5..2.0);
    let q = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let quad = Quadratic::new(&pair, q, random_vector(rng, d) * 0.5, mu).expect("finite form");
    let f = Quartic::new(&pair, quad, rng.random_range(0.1..1.0)).expect("finite form");
    let p = random_sphere_point(rng, &pair, mu);
    let a = random_unit_tangent(rng, &pair, &p);
    (pair, f, p, a)
}

#[derive(Clone, Debug, Default)]
struct ProbeResult {
    d2: f64,
    grad: f64,
    symmetry: f64,
    hol2_grad: f64,
    hol2_hess: f64,
    morse_monotone: f64,
    interlacing: f64,
}

fn probe<R: Rng>(rng: &mut R) -> ProbeResult {
    let (pair, f, p, a) = random_probe(rng);
    let d = pair.dim();
    let mut r = ProbeResult { d2: geodesic_identity_error(&f, &pair, &p, &a, 1e-3), ..Default::default() };

    let g = f.grad_dual(&p.u);
    let x = random_vector(rng, d);
    let h = 1e-5;
    let fd = (f.value(&(&p.u + &x * h)) - f.value(&(&p.u - &x * h))) / (2.0 * h);
    r.grad = (fd - g.dot(&x)).abs() / (g.norm() * x.norm()).max(f64::MIN_POSITIVE);

    let b = random_vector(rng, d);
    let hm = f.hess_matrix(&p.u);
    let s = (x.dot(&f.hess_action(&p.u, &b)) - b.dot(&f.hess_action(&p.u, &x))).abs();
    r.symmetry = s / (hm.norm() * x.norm() * b.norm()).max(f64::MIN_POSITIVE);

    // HOL 2 on B(0, R)
    let radius = rng.random_range(1.0..3.0);
    let inside = |rng: &mut R| {
        let v = random_vector(rng, d);
        let n = pair.norm_e(&v);
        v * (radius * rng.random_range(0.0..1.0) / n)
    };
    let (u1, u2) = (inside(rng), inside(rng));
    let m = f.holder_m(radius);
    let gap = pair.norm_e(&(&u1 - &u2)).powf(f.alpha());
    if gap > 0.0 {
        r.hol2_grad = pair.dual_norm(&(f.grad_dual(&u1) - f.grad_dual(&u2))) / (m * gap);
        r.hol2_hess = form_norm(&pair, &(f.hess_matrix(&u1) - f.hess_matrix(&u2))).unwrap_or(f64::INFINITY) / (m * gap);
    }

    match (approx_morse_index(&f, &pair, &p, 0.0, false), approx_morse_index(&f, &pair, &p, 0.0, true)) {
        (Ok(c), Ok(fr)) => {
            let mut prev = c.count;
            for theta in [0.01, 0.1, 0.5, 1.0, 2.0] {
                let k = approx_morse_index(&f, &pair, &p, theta, false).map(|m| m.count).unwrap_or(usize::MAX);
                if k > prev {
                    r.morse_monotone = 1.0;
                }
                prev = k;
            }
            if !(c.count <= fr.count && fr.count <= c.count + 1) {
                r.interlacing = 1.0;
            }
        }
        _ => {
            r.morse_monotone = f64::INFINITY;
            r.interlacing = f64::INFINITY;
        }
    }
    r
}

pub fn second_order_suite(seed: u64, probes: usize) -> Vec<Check> {
    let rs: Vec<ProbeResult> = (0..probes).into_par_iter().map(|i| probe(&mut sample_rng(seed, (2u64 << 40) | i as u64))).collect();
    let col = |f: fn(&ProbeResult) -> f64| rs.iter().map(f).collect::<Vec<f64>>();
    vec![
        Check::from_values("second_order.geodesic_identity", &col(|r| r.d2), 1e-4)
            .with_note("relative to |phi''[a,a]| + |lambda (a,a)|"),
        Check::from_values("functional.gradient_differences", &col(|r| r.grad), 1e-5),
        Check::from_values("functional.hessian_symmetry", &col(|r| r.symmetry), 1e-9),
        Check::from_values("functional.hol2_gradient", &col(|r| r.hol2_grad), 1.0).with_note("ratio to M |u1-u2|^alpha"),
        Check::from_values("functional.hol2_hessian", &col(|r| r.hol2_hess), 1.0).with_note("ratio to M |u1-u2|^alpha"),
        Check::from_values("functional.morse_monotone_in_theta", &col(|r| r.morse_monotone), 0.0),
        Check::from_values("functional.morse_interlacing", &col(|r| r.interlacing), 0.0),
    ]
}
