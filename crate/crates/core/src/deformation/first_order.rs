//! Quantitative first-order deformation by normalized sphere-gradient steps.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{constrained_dual_norm, sphere_gradient, ConstrainedFunctional};
use crate::geometry::Geodesic;
use crate::pair::{HilbertPair, SpherePoint};

use super::{DiscreteMap, TraceRow};

/// Armijo constant of the normalized gradient steps.
const ARMIJO: f64 = 0.5;

#[derive(Clone, Debug, Serialize)]
pub struct FirstOrderReport {
    pub c_til: f64,
    pub eps_til: f64,
    pub mu_til: f64,
    pub moved: Vec<usize>,
    /// Largest E-travel used by a node.
    pub max_travel: f64,
    /// Smallest dual norm met along the descents, against `8ε̃/μ̃`.
    pub min_dual_norm: f64,
    pub hypothesis_ok: bool,
    pub max_value_on_k3: f64,
}

struct NodeRun {
    point: SpherePoint,
    travel: f64,
    min_dual: f64,
}

fn descend<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    node: usize,
    start: &SpherePoint,
    target: f64,
    budget: f64,
) -> Result<NodeRun> {
    let mut p = start.clone();
    let mut value = f.value(&p.u);
    let mut travel = 0.0;
    let mut min_dual = f64::INFINITY;
    let mut step = budget;
    while value >= target {
        let g = sphere_gradient(f, pair, &p);
        let gn = pair.norm_e(&g);
        min_dual = min_dual.min(gn);
        if !(gn > 0.0) {
            return Err(Error::SlowDecrease { node, value, target });
        }
        let v = &g * (-1.0 / gn);
        step = (2.0 * step).min(budget - travel);
        loop {
            if step <= 1e-15 * budget.max(1.0) {
                return Err(Error::SlowDecrease { node, value, target });
            }
            let disp = Geodesic::new(pair, &p, &v).displacement(step);
            let inc = f.value_increment(&p.u, &disp);
            if inc <= -ARMIJO * step * gn {
                travel += pair.norm_e(&disp);
                p = SpherePoint { u: &p.u + disp, mu: p.mu };
                value += inc;
                break;
            }
            step *= 0.5;
        }
        if travel >= budget && value >= target {
            return Err(Error::SlowDecrease { node, value, target });
        }
    }
    Ok(NodeRun { point: p, travel, min_dual })
}

/// Pushes every node of `K₃` below `c̃ − ε̃` with E-travel at most `2μ̃`; nodes at or below
/// `c̃ − 2ε̃` and fixed nodes are never moved.
pub fn first_order_deform<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    map: &DiscreteMap,
    k3: &[usize],
    c_til: f64,
    eps_til: f64,
    mu_til: f64,
    trace: &mut Vec<TraceRow>,
) -> Result<(DiscreteMap, FirstOrderReport)> {
    let target = c_til - eps_til;
    let work: Vec<usize> = k3
        .iter()
        .copied()
        .filter(|&i| !map.fixed[i] && f.value(&map.nodes[i].u) >= target)
        .collect();
    let runs: Vec<Result<NodeRun>> =
        work.par_iter().map(|&i| descend(f, pair, i, &map.nodes[i], target, 2.0 * mu_til)).collect();
    let mut out = map.clone();
    let mut max_travel: f64 = 0.0;
    let mut min_dual = f64::INFINITY;
    for (&i, run) in work.iter().zip(runs) {
        let run = run?;
        min_dual = min_dual.min(run.min_dual).min(constrained_dual_norm(f, pair, &map.nodes[i]));
        max_travel = max_travel.max(run.travel);
        trace.push(TraceRow {
            stage: "first_order".into(),
            node: i,
            before: f.value(&map.nodes[i].u),
            after: f.value(&run.point.u),
            displacement: pair.norm_e(&(&run.point.u - &map.nodes[i].u)),
        });
        out.nodes[i] = run.point;
    }
    let max_value_on_k3 = k3.iter().map(|&i| f.value(&out.nodes[i].u)).fold(f64::NEG_INFINITY, f64::max);
    let rep = FirstOrderReport {
        c_til,
        eps_til,
        mu_til,
        moved: work,
        max_travel,
        min_dual_norm: min_dual,
        hypothesis_ok: min_dual >= 8.0 * eps_til / mu_til,
        max_value_on_k3,
    };
    Ok((out, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Matrix, Vector};
    use crate::problems::toy::Quadratic;

    fn valley() -> (HilbertPair, Quadratic) {
        // φ = x on the unit circle: dual norm |y| near (0, 1)
        let pair = HilbertPair::identity(2);
        let f = Quadratic::new(&pair, Matrix::zeros(2, 2), Vector::from_vec(vec![1.0, 0.0]), 1.0).unwrap();
        (pair, f)
    }

    #[test]
    fn empty_k3_and_low_nodes_are_untouched() {
        let (pair, f) = valley();
        let nodes: Vec<SpherePoint> =
            [-0.5, 0.0, 0.1].iter().map(|&x| pair.normalize(&Vector::from_vec(vec![x, 1.0]), 1.0).unwrap()).collect();
        let map = DiscreteMap::path(nodes);
        let (out, _) = first_order_deform(&f, &pair, &map, &[], 0.0, 0.05, 0.5, &mut Vec::new()).unwrap();
        assert_eq!(out.nodes, map.nodes);
        let (out, rep) = first_order_deform(&f, &pair, &map, &[0, 1, 2], 0.0, 0.05, 0.5, &mut Vec::new()).unwrap();
        assert_eq!(out.nodes[0], map.nodes[0]);
        assert_eq!(rep.moved, vec![1]);
    }

    #[test]
    fn valley_reaches_target() {
        let (pair, f) = valley();
        let nodes: Vec<SpherePoint> = [-0.3, 0.02, 0.04, 0.3]
            .iter()
            .map(|&x| pair.normalize(&Vector::from_vec(vec![x, 1.0]), 1.0).unwrap())
            .collect();
        let map = DiscreteMap::path(nodes);
        let (c, e) = (0.03, 0.02);
        // dual norm ≥ 0.99 near the nodes, so μ̃ = 9ε̃ suffices
        let (out, rep) = first_order_deform(&f, &pair, &map, &[1, 2], c, e, 9.0 * e, &mut Vec::new()).unwrap();
        assert!(rep.max_value_on_k3 < c - e);
        assert!(rep.hypothesis_ok && rep.max_travel <= 18.0 * e);
        for (p, q) in map.nodes.iter().zip(&out.nodes) {
            assert!(f.value(&q.u) <= f.value(&p.u));
        }
    }
}
