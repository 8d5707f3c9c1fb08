//! Iterated local deformations over a finite cover of `K₂`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::ConstrainedFunctional;
use crate::geometry::GeometryConstants;
use crate::linalg::Vector;
use crate::pair::HilbertPair;

use super::cover::{build_cover, distance, CoverReport, Domain};
use super::homotopy::homotopy_deform;
use super::{DiscreteMap, TraceRow, DECREASE_SLACK};

#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub stage: usize,
    pub anchor: usize,
    pub k1: Vec<usize>,
    pub t: f64,
    pub t0: f64,
    /// Largest node displacement in this stage.
    pub displacement: f64,
    /// Largest displacement outside the stage neighbourhood (must be 0).
    pub displacement_outside: f64,
    pub homotopy_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterateReport {
    pub eps: f64,
    pub intersection_number: usize,
    pub stages: Vec<StageReport>,
    /// `min_{K₂} (φ(f) − φ(f̂))`.
    pub min_decrease_on_k2: f64,
    /// `β δ² / (864 N²)`.
    pub decrease_bound: f64,
    pub max_displacement: f64,
    pub non_increasing: bool,
    pub decrease_ok: bool,
    pub displacement_ok: bool,
    pub stage_displacement_ok: bool,
    #[serde(skip)]
    pub cover: Option<CoverReport>,
}

/// Largest `‖f(x_i) − f(x_j)‖ / |x_i − x_j|` over consecutive (paths) or all pairs of nodes.
pub fn discrete_lipschitz(pair: &HilbertPair, map: &DiscreteMap) -> f64 {
    let mut l: f64 = 0.0;
    let n = map.len();
    if map.param_dim() == 1 {
        for i in 0..n.saturating_sub(1) {
            let dx = distance(&map.params[i], &map.params[i + 1]);
            if dx > 0.0 {
                l = l.max(pair.norm_e(&(&map.nodes[i + 1].u - &map.nodes[i].u)) / dx);
            }
        }
    } else {
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = distance(&map.params[i], &map.params[j]);
                if dx > 0.0 {
                    l = l.max(pair.norm_e(&(&map.nodes[j].u - &map.nodes[i].u)) / dx);
                }
            }
        }
    }
    l
}

/// `f̂`: one local deformation per cover ball, each of duration `t = δ/(6N)`.
///
/// `frames[k]` is an E-orthonormal negative frame (dimension ≥ `n + 1`) at `f(k2[k])`.
#[allow(clippy::too_many_arguments)]
pub fn iterate_deform<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    consts: &GeometryConstants,
    map: &DiscreteMap,
    k2: &[usize],
    frames: &[Vec<Vector>],
    beta: f64,
    delta: f64,
    trace: &mut Vec<TraceRow>,
) -> Result<(DiscreteMap, IterateReport)> {
    let n = map.param_dim();
    if k2.is_empty() {
        let rep = IterateReport {
            eps: 0.0,
            intersection_number: 0,
            stages: Vec::new(),
            min_decrease_on_k2: f64::INFINITY,
            decrease_bound: 0.0,
            max_displacement: 0.0,
            non_increasing: true,
            decrease_ok: true,
            displacement_ok: true,
            stage_displacement_ok: true,
            cover: None,
        };
        return Ok((map.clone(), rep));
    }
    if frames.len() != k2.len() {
        return Err(Error::HypothesisViolated("one frame per K2 node is required".into()));
    }
    if let Some(fr) = frames.iter().find(|fr| fr.len() < n + 1) {
        return Err(Error::FrameDimensionTooSmall { need: n + 1, got: fr.len() });
    }
    let d3 = consts.delta3(beta);
    // parameter radius whose image stays inside the δ₃/2-balls around the anchors
    let lip = discrete_lipschitz(pair, map).max(f64::MIN_POSITIVE);
    let eps = (d3 / (2.0 * lip)).min(1.0);
    let cover = build_cover(&Domain::Points(k2.iter().map(|&i| map.params[i].clone()).collect()), eps)?;
    let big_n = cover.intersection_number();
    let t = delta / (6.0 * big_n as f64);
    let tmax = consts.tmax(d3);
    if !(t < tmax) {
        return Err(Error::HypothesisViolated(format!("stage time {t:.3e} not below t_max = {tmax:.3e}")));
    }
    let t0 = (tmax / 8.0).min(t);
    let nu = cover.inner_radius;

    let mut current = map.clone();
    let mut stages = Vec::new();
    let mut stage_ok = true;
    for (s, c) in cover.centers.iter().enumerate() {
        let k1: Vec<usize> = k2.iter().copied().filter(|&i| distance(&map.params[i], c) <= cover.inner_radius).collect();
        if k1.is_empty() {
            continue;
        }
        let (pos, &anchor) = k2
            .iter()
            .enumerate()
            .min_by(|a, b| distance(&map.params[*a.1], c).total_cmp(&distance(&map.params[*b.1], c)))
            .expect("nonempty");
        let u0 = &map.nodes[anchor];
        let (field, rep) = homotopy_deform(f, pair, consts, &current, &k1, u0, &frames[pos], beta, nu, t0, &[0.0, t0, t])?;
        let next = field.apply(pair, &current, t);
        let mut disp_in: f64 = 0.0;
        let mut disp_out: f64 = 0.0;
        for (i, (p, q)) in current.nodes.iter().zip(&next).enumerate() {
            let d = pair.norm_e(&(&q.u - &p.u));
            if field.weights[i] > 0.0 {
                disp_in = disp_in.max(d);
                trace.push(TraceRow {
                    stage: format!("iterate:{s}"),
                    node: i,
                    before: f.value(&p.u),
                    after: f.value(&q.u),
                    displacement: d,
                });
            } else {
                disp_out = disp_out.max(d);
            }
        }
        if disp_out > 0.0 || disp_in > delta / (2.0 * big_n as f64) {
            stage_ok = false;
        }
        stages.push(StageReport {
            stage: s,
            anchor,
            k1,
            t,
            t0,
            displacement: disp_in,
            displacement_outside: disp_out,
            homotopy_ok: rep.all_hold(),
        });
        current.nodes = next;
    }

    let bound = beta * delta * delta / (864.0 * (big_n * big_n) as f64);
    let mut min_dec = f64::INFINITY;
    let mut non_increasing = true;
    let mut max_disp: f64 = 0.0;
    for (i, (p, q)) in map.nodes.iter().zip(&current.nodes).enumerate() {
        let drop = -f.value_increment(&p.u, &(&q.u - &p.u));
        if drop < -DECREASE_SLACK {
            non_increasing = false;
        }
        if k2.contains(&i) {
            min_dec = min_dec.min(drop);
        }
        max_disp = max_disp.max(pair.norm_e(&(&q.u - &p.u)));
    }
    let rep = IterateReport {
        eps,
        intersection_number: big_n,
        stages,
        min_decrease_on_k2: min_dec,
        decrease_bound: bound,
        max_displacement: max_disp,
        non_increasing,
        decrease_ok: min_dec > bound - DECREASE_SLACK,
        displacement_ok: max_disp <= 0.5 * delta,
        stage_displacement_ok: stage_ok,
        cover: Some(cover),
    };
    Ok((current, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::approx_morse_index;
    use crate::linalg::Matrix;
    use crate::pair::SpherePoint;
    use crate::problems::toy::Quadratic;

    #[test]
    fn empty_k2_is_identity() {
        let pair = HilbertPair::identity(3);
        let f = Quadratic::new(&pair, Matrix::identity(3, 3), Vector::zeros(3), 1.0).unwrap();
        let nodes: Vec<SpherePoint> = (0..3).map(|k| pair.normalize(&Vector::from_vec(vec![1.0, k as f64, 0.0]), 1.0).unwrap()).collect();
        let map = DiscreteMap::path(nodes);
        let consts = GeometryConstants::new(2.0, 1.0, 10.0, 2.0, 1.0, 1).unwrap();
        let (out, rep) = iterate_deform(&f, &pair, &consts, &map, &[], &[], 0.5, 1e-3, &mut Vec::new()).unwrap();
        assert_eq!(out.nodes, map.nodes);
        assert!(rep.stages.is_empty());
    }

    #[test]
    fn saddle_single_ball_decrease() {
        // φ = ½(−x² − y² + z² + 2w²) on the round S³ near e_w: two negative directions
        let pair = HilbertPair::identity(4);
        let q = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -0.5, 1.0, 2.0]));
        let f = Quadratic::new(&pair, q, Vector::zeros(4), 1.0).unwrap();
        let nodes: Vec<SpherePoint> = (0..11)
            .map(|k| pair.normalize(&Vector::from_vec(vec![0.0, 0.0, (k as f64 - 5.0) * 1e-13, 1.0]), 1.0).unwrap())
            .collect();
        let map = DiscreteMap::path(nodes);
        let beta = 0.5;
        let consts = GeometryConstants::new(2.0, 1.0, f.bound_k(2.0), f.holder_m(2.0), 1.0, 1).unwrap();
        let k2: Vec<usize> = (4..=6).collect();
        let frames: Vec<Vec<Vector>> =
            k2.iter().map(|&i| approx_morse_index(&f, &pair, &map.nodes[i], beta, false).unwrap().basis).collect();
        let delta = consts.delta3(beta);
        let mut trace = Vec::new();
        let (out, rep) = iterate_deform(&f, &pair, &consts, &map, &k2, &frames, beta, delta, &mut trace).unwrap();
        assert_eq!(rep.stages.len(), 1, "{rep:?}");
        assert!(rep.decrease_ok && rep.min_decrease_on_k2 > rep.decrease_bound, "{rep:?}");
        assert!(rep.non_increasing && rep.displacement_ok && rep.stage_displacement_ok);
        assert_eq!(out.nodes[0], map.nodes[0]);
        assert!(!trace.is_empty());
    }
}
