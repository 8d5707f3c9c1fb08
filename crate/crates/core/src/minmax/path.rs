//! Pinned discrete paths on `S_μ` and their relaxation by a climbing-image string method.

use rayon::prelude::*;
use serde::Serialize;

use crate::deformation::DiscreteMap;
use crate::error::Result;
use crate::functional::{sphere_gradient, ConstrainedFunctional};
use crate::geometry::{log_map, Geodesic};
use crate::linalg::Vector;
use crate::pair::{HilbertPair, SpherePoint};

use super::refine::newton_kkt;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePath {
    pub nodes: Vec<SpherePoint>,
}

impl DiscretePath {
    /// Geodesic interpolation from `w1` to `w2` with `k ≥ 2` nodes.
    pub fn geodesic(pair: &HilbertPair, w1: &SpherePoint, w2: &SpherePoint, k: usize) -> Result<Self> {
        let v = log_map(pair, w1, w2)?;
        let g = Geodesic::new(pair, w1, &v);
        let mut nodes: Vec<SpherePoint> = (0..k).map(|i| g.eval(i as f64 / (k - 1) as f64).0).collect();
        nodes[0] = w1.clone();
        nodes[k - 1] = w2.clone();
        Ok(DiscretePath { nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn values<F: ConstrainedFunctional + ?Sized>(&self, f: &F) -> Vec<f64> {
        self.nodes.par_iter().map(|p| f.value(&p.u)).collect()
    }

    /// `(argmax, max)` of `φ` over the nodes.
    pub fn top<F: ConstrainedFunctional + ?Sized>(&self, f: &F) -> (usize, f64) {
        self.values(f)
            .into_iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best })
    }

    /// Largest E-distance between consecutive nodes.
    pub fn mesh(&self, pair: &HilbertPair) -> f64 {
        self.nodes.windows(2).map(|w| pair.norm_e(&(&w[1].u - &w[0].u))).fold(0.0, f64::max)
    }

    pub fn to_map(&self) -> DiscreteMap {
        DiscreteMap::path(self.nodes.clone())
    }

    /// Resamples nodes `lo..=hi` at equal weighted E-chord arclength, both ends kept; segment
    /// `j` has weight `weights[lo + j]`.
    fn reparametrize(&mut self, pair: &HilbertPair, weights: &[f64], lo: usize, hi: usize) -> Result<()> {
        if hi <= lo + 1 {
            return Ok(());
        }
        let seg = &self.nodes[lo..=hi];
        let mut s = vec![0.0];
        for (j, w) in seg.windows(2).enumerate() {
            let last = *s.last().expect("nonempty");
            s.push(last + weights[lo + j] * pair.norm_e(&(&w[1].u - &w[0].u)));
        }
        let total = *s.last().expect("nonempty");
        if !(total > 0.0) {
            return Ok(());
        }
        let m = hi - lo;
        let mut out = Vec::with_capacity(m - 1);
        let mut j = 0;
        for k in 1..m {
            let target = total * k as f64 / m as f64;
            while j + 1 < s.len() - 1 && s[j + 1] < target {
                j += 1;
            }
            let len = s[j + 1] - s[j];
            let frac = if len > 0.0 { ((target - s[j]) / len).clamp(0.0, 1.0) } else { 0.0 };
            let v = log_map(pair, &seg[j], &seg[j + 1])?;
            out.push(Geodesic::new(pair, &seg[j], &v).eval(frac).0);
        }
        for (k, p) in out.into_iter().enumerate() {
            self.nodes[lo + 1 + k] = p;
        }
        Ok(())
    }
}

/// Weight floor of the low-energy segments.
const WEIGHT_FLOOR: f64 = 0.05;

/// `floor + (1 − floor) s²` with `s` the mean segment value rescaled to `[0, 1]`.
fn segment_weights(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .windows(2)
        .map(|w| {
            let s = if hi > lo { (0.5 * (w[0] + w[1]) - lo) / (hi - lo) } else { 1.0 };
            WEIGHT_FLOOR + (1.0 - WEIGHT_FLOOR) * s * s
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct RelaxOptions {
    pub max_iter: usize,
    /// Stop once the climbing image has dual norm below this.
    pub tol: f64,
    pub climbing: bool,
    /// Newton iterations spent polishing the climbing image afterwards (0 disables).
    pub polish: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RelaxReport {
    pub iterations: usize,
    pub top_index: usize,
    pub top_value: f64,
    pub top_dual_norm: f64,
    pub converged: bool,
    pub polished: bool,
}

/// Unit E-tangent of the path at an interior node, projected onto `T_u S_μ`.
fn path_tangent(pair: &HilbertPair, nodes: &[SpherePoint], i: usize) -> Option<Vector> {
    let chord = &nodes[i + 1].u - &nodes[i - 1].u;
    let t = pair.project_tangent_e(&nodes[i], &chord);
    let n = pair.norm_e(&t);
    (n > 0.0).then(|| t / n)
}

/// One Armijo step of `−g` from `p`, starting at `step` and moving at most `cap` in E-norm;
/// returns the new point and the step used.
fn armijo<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    p: &SpherePoint,
    g: &Vector,
    step: f64,
    cap: f64,
) -> (SpherePoint, f64) {
    let gn2 = pair.inner_e(g, g);
    if !(gn2 > 0.0) {
        return (p.clone(), step);
    }
    let dir = -g;
    let geo = Geodesic::new(pair, p, &dir);
    let mut s = step.min(cap / gn2.sqrt());
    for _ in 0..40 {
        let disp = geo.displacement(s);
        if f.value_increment(&p.u, &disp) <= -1e-4 * s * gn2 {
            return (SpherePoint { u: &p.u + disp, mu: p.mu }, s);
        }
        s *= 0.5;
    }
    (p.clone(), s)
}

/// String relaxation: interior nodes descend along `−∇φ` and the path is resampled at equal
/// E-arclength. Once the string has settled (largest node move below 1% of the mean chord, or
/// half the iteration budget spent) the highest node climbs along the path tangent and the two
/// sides are resampled separately.
pub fn relax<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    path: &DiscretePath,
    opts: &RelaxOptions,
) -> Result<(DiscretePath, RelaxReport)> {
    let mut cur = path.clone();
    let k = cur.len();
    let mut steps = vec![1.0f64; k];
    let mut ci_step: f64 = 0.1;
    let mut iterations = 0;
    let (mut top_index, mut top_value) = cur.top(f);
    let mut top_dual = pair.norm_e(&sphere_gradient(f, pair, &cur.nodes[top_index]));
    let mut climbing = false;
    while iterations < opts.max_iter {
        if climbing && top_index > 0 && top_index + 1 < k && top_dual <= opts.tol {
            break;
        }
        iterations += 1;
        let ci = if climbing && top_index > 0 && top_index + 1 < k { Some(top_index) } else { None };
        let snapshot = cur.nodes.clone();
        let chord = snapshot.windows(2).map(|w| pair.norm_e(&(&w[1].u - &w[0].u))).sum::<f64>() / (k - 1) as f64;
        let cap = 0.5 * chord;
        let moved: Vec<(SpherePoint, f64)> = (1..k - 1)
            .into_par_iter()
            .map(|i| {
                let p = &snapshot[i];
                let g = sphere_gradient(f, pair, p);
                if Some(i) == ci {
                    // ascend along the path, descend across it
                    let mut d = g.clone();
                    if let Some(tau) = path_tangent(pair, &snapshot, i) {
                        let c = pair.inner_e(&g, &tau);
                        d.axpy(-2.0 * c, &tau, 1.0);
                    }
                    let v = -d;
                    let s = ci_step.min(cap / pair.norm_e(&v).max(f64::MIN_POSITIVE));
                    (Geodesic::new(pair, p, &v).eval(s).0, s)
                } else {
                    armijo(f, pair, p, &g, (2.0 * steps[i]).min(4.0), cap)
                }
            })
            .collect();
        for (j, (p, s)) in moved.into_iter().enumerate() {
            let i = j + 1;
            if Some(i) != ci {
                steps[i] = s;
            }
            cur.nodes[i] = p;
        }
        if let Some(c) = ci {
            let dual = pair.norm_e(&sphere_gradient(f, pair, &cur.nodes[c]));
            if dual > top_dual {
                // overshoot: undo the climbing move and shorten
                cur.nodes[c] = snapshot[c].clone();
                ci_step *= 0.5;
            } else {
                ci_step = (ci_step * 1.2).min(1.0);
            }
            let weights = segment_weights(&cur.values(f));
            cur.reparametrize(pair, &weights, 0, c)?;
            cur.reparametrize(pair, &weights, c, k - 1)?;
        } else {
            let weights = segment_weights(&cur.values(f));
            cur.reparametrize(pair, &weights, 0, k - 1)?;
            let moved = cur.nodes.iter().zip(&snapshot).map(|(a, b)| pair.norm_e(&(&a.u - &b.u))).fold(0.0, f64::max);
            climbing = opts.climbing && (moved < 1e-2 * chord || 2 * iterations >= opts.max_iter);
        }
        let (ti, tv) = cur.top(f);
        if ti != top_index {
            ci_step = 0.1;
        }
        top_index = ti;
        top_value = tv;
        top_dual = pair.norm_e(&sphere_gradient(f, pair, &cur.nodes[ti]));
    }
    let mut polished = false;
    if opts.polish > 0 && top_index > 0 && top_index + 1 < k {
        let i = top_index;
        let reach = 0.5
            * pair
                .norm_e(&(&cur.nodes[i + 1].u - &cur.nodes[i].u))
                .min(pair.norm_e(&(&cur.nodes[i].u - &cur.nodes[i - 1].u)));
        if let Ok((q, _)) = newton_kkt(f, pair, &cur.nodes[i], opts.polish, 1e-3 * opts.tol) {
            if pair.norm_e(&(&q.u - &cur.nodes[i].u)) <= reach {
                cur.nodes[i] = q;
                polished = true;
                let (ti, tv) = cur.top(f);
                top_index = ti;
                top_value = tv;
                top_dual = pair.norm_e(&sphere_gradient(f, pair, &cur.nodes[ti]));
            }
        }
    }
    let converged = top_index > 0 && top_index + 1 < k && top_dual <= opts.tol;
    Ok((cur, RelaxReport { iterations, top_index, top_value, top_dual_norm: top_dual, converged, polished }))
}
