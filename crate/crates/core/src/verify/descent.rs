//! Descent certificates and the holonomy bound on random quadratic saddles.

use rand::Rng;
use rayon::prelude::*;

use crate::deformation::descent::{descent_step, descent_step_near, DescentCase};
use crate::error::{Error, Result};
use crate::functional::{approx_morse_index, ConstrainedFunctional};
use crate::geometry::{holonomy_defect, transport_frame, GeometryConstants};
use crate::linalg::{bandwidth, sym_eigen, BandCholesky, Matrix, Vector};
use crate::pair::{HilbertPair, SpherePoint};
use crate::problems::toy::Quadratic;
use crate::sampling::random_pair;

use super::geometry::point_near;
use super::{sample_rng, Check};

/// `β = min(|e₀|/2, 0.99)` for the lowest constrained eigenvalue `e₀ < 0`, and the
/// E-orthonormal eigendirections below `−β`.
pub fn negative_frame<F: ConstrainedFunctional + ?Sized>(f: &F, pair: &HilbertPair, u0: &SpherePoint) -> Result<(f64, Vec<Vector>)> {
    let morse = approx_morse_index(f, pair, u0, 0.0, false)?;
    let e0 = morse.eigenvalues.first().copied().unwrap_or(0.0);
    if morse.count == 0 || !(e0 < 0.0) {
        return Err(Error::HypothesisViolated("no negative direction".into()));
    }
    let beta = (0.5 * e0.abs()).min(0.99);
    let basis = morse
        .eigenvalues
        .iter()
        .zip(morse.basis)
        .filter(|(e, _)| **e < -beta * (1.0 + 1e-6))
        .map(|(_, b)| b)
        .collect();
    Ok((beta, basis))
}

#[derive(Clone, Debug)]
pub struct DescentTrial {
    pub case: DescentCase,
    /// `βt²/12 − decrease`; the certificate holds when this is `≤` the slack.
    pub miss12: f64,
    pub ratio12: f64,
    pub miss24: f64,
    pub ratio24: f64,
    /// `‖Pw₁ − w₁‖ / (β/(24K))`.
    pub holonomy: f64,
}

/// One draw of `u` near `u0` (or `u = u0`), a step `t < t_max` and a neighbour `z`.
pub fn descent_trial<F: ConstrainedFunctional + ?Sized, R: Rng>(
    f: &F,
    pair: &HilbertPair,
    u0: &SpherePoint,
    beta: f64,
    basis: &[Vector],
    at_origin: bool,
    rng: &mut R,
) -> Result<DescentTrial> {
    let r = pair.norm_e(&u0.u) + 1.0;
    let consts = GeometryConstants::new(r, u0.mu, f.bound_k(r), f.holder_m(r), f.alpha(), basis.len().saturating_sub(1))?;
    let d3 = consts.delta3(beta);
    let tmax = consts.tmax(d3);
    let u = if at_origin { u0.clone() } else { point_near(rng, pair, u0, 0.5 * d3) };
    let frame_u = transport_frame(pair, u0, basis, &u)?;
    let t = tmax * rng.random_range(0.01..0.99);
    let c12 = descent_step(f, pair, &consts, u0, &u, &frame_u, beta, t)?;

    let t0 = tmax / 8.0;
    let t2 = rng.random_range(t0..tmax);
    let room = 0.5 * d3 - pair.norm_e(&(&u.u - &u0.u));
    let mut reach = 1e-2 * room;
    let mut c24 = None;
    for _ in 0..12 {
        let z = point_near(rng, pair, &u, reach);
        let frame_z = transport_frame(pair, u0, basis, &z)?;
        match descent_step_near(f, pair, &consts, u0, &u, &frame_u, &z, &frame_z, beta, t2, t0) {
            Ok(c) => {
                c24 = Some(c);
                break;
            }
            Err(Error::HypothesisViolated(_)) => reach *= 0.1,
            Err(e) => return Err(e),
        }
    }
    let c24 = c24.ok_or_else(|| Error::HypothesisViolated("no neighbour with close frames".into()))?;
    let tau = tmax * rng.random_range(0.01..0.99);
    let holonomy = holonomy_defect(pair, u0, basis, &u, tau)? / (beta / (24.0 * consts.k));
    Ok(DescentTrial {
        case: c12.case,
        miss12: c12.bound - c12.decrease,
        ratio12: c12.decrease / c12.bound,
        miss24: c24.bound - c24.decrease,
        ratio24: c24.decrease / c24.bound,
        holonomy,
    })
}

/// `φ = ½uᵀQu` on a random pair with `u0` a generalized eigenvector of `(Q, H)` that is not
/// the lowest, so `D²φ(u0)` has negative directions.
pub fn random_saddle<R: Rng>(rng: &mut R) -> (HilbertPair, Quadratic, SpherePoint) {
    let d = rng.random_range(3..=8);
    let pair = random_pair(rng, d, 2);
    let mu = rng.random_range(0.5..2.0);
    let q = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = (&q + q.transpose()) * 0.5;
    let h = pair.gram_h().clone();
    let ch = BandCholesky::factor(&h, bandwidth(&h)).expect("gramH is positive definite");
    let (_, vecs) = sym_eigen(&ch.congruence(&q)).expect("finite matrix");
    let k = rng.random_range(1..d);
    let x = ch.solve_upper(&vecs.column(k).into_owned());
    let u0 = pair.normalize(&x, mu).expect("nonzero eigenvector");
    let f = Quadratic::new(&pair, q, Vector::zeros(d), mu).expect("finite form");
    (pair, f, u0)
}

fn summarize(name: &str, trials: &[Result<DescentTrial>], note: &str) -> Vec<Check> {
    let errors = trials.iter().filter(|t| t.is_err()).count();
    let ok: Vec<&DescentTrial> = trials.iter().filter_map(|t| t.as_ref().ok()).collect();
    let min = |f: fn(&DescentTrial) -> f64| ok.iter().map(|t| f(t)).fold(f64::INFINITY, f64::min);
    let frame_cases = ok.iter().filter(|t| t.case == DescentCase::Frame).count();
    let with_errors = |c: Check| {
        if errors > 0 {
            let mut c = c;
            c.violations += errors;
            c.passed = false;
            c.with_note(format!("{errors} trials failed to run"))
        } else {
            c
        }
    };
    vec![
        with_errors(
            Check::from_values(&format!("{name}.beta_over_12"), &ok.iter().map(|t| t.miss12).collect::<Vec<_>>(), 1e-12)
                .with_note(format!("{note}; min decrease/bound {:.4}; {frame_cases} zero-direction cases", min(|t| t.ratio12))),
        ),
        with_errors(
            Check::from_values(&format!("{name}.beta_over_24"), &ok.iter().map(|t| t.miss24).collect::<Vec<_>>(), 1e-12)
                .with_note(format!("{note}; min decrease/bound {:.4}", min(|t| t.ratio24))),
        ),
        with_errors(
            Check::from_values(&format!("{name}.holonomy"), &ok.iter().map(|t| t.holonomy).collect::<Vec<_>>(), 1.0)
                .with_note("ratio to beta/(24K)"),
        ),
    ]
}

pub fn descent_suite(seed: u64, instances: usize) -> Vec<Check> {
    let trials: Vec<Result<DescentTrial>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, (3u64 << 40) | i as u64);
            let (pair, f, u0) = random_saddle(&mut rng);
            let (beta, basis) = negative_frame(&f, &pair, &u0)?;
            descent_trial(&f, &pair, &u0, beta, &basis, i % 5 == 0, &mut rng)
        })
        .collect();
    summarize("descent", &trials, &format!("{instances} quadratic saddles"))
}

/// The same certificates at given points of a problem functional (e.g. NLS iterates).
pub fn descent_at_points<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    points: &[SpherePoint],
    per_point: usize,
    seed: u64,
) -> Vec<Check> {
    let mut trials = Vec::new();
    let mut used = 0;
    for (j, u0) in points.iter().enumerate() {
        let Ok((beta, basis)) = negative_frame(f, pair, u0) else { continue };
        used += 1;
        let batch: Vec<Result<DescentTrial>> = (0..per_point)
            .into_par_iter()
            .map(|i| descent_trial(f, pair, u0, beta, &basis, i == 0, &mut sample_rng(seed, (4u64 << 40) | ((j as u64) << 20) | i as u64)))
            .collect();
        trials.extend(batch);
    }
    if trials.is_empty() {
        return vec![Check::failed("descent_nls", "no point with a negative direction")];
    }
    summarize("descent_nls", &trials, &format!("{used} points, {per_point} trials each"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saddles_have_negative_frames() {
        for i in 0..10 {
            let (pair, f, u0) = random_saddle(&mut sample_rng(8, i));
            let g = f.grad_dual(&u0.u);
            let lam = g.dot(&u0.u) / u0.mu;
            assert!((g - pair.apply_h(&u0.u) * lam).amax() < 1e-9);
            let (beta, basis) = negative_frame(&f, &pair, &u0).unwrap();
            assert!(beta > 0.0 && beta < 1.0 && !basis.is_empty());
        }
    }

    #[test]
    fn small_suite_passes() {
        for c in descent_suite(6, 20) {
            assert!(c.passed, "{c:?}");
        }
    }
}
