//! Min-max certification: either a node of the family with small constrained gradient and
//! approximate Morse index at most `n`, or a deformed member lying below `c − ε`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{approx_morse_index, constrained_dual_norm, ConstrainedFunctional};
use crate::geometry::GeometryConstants;
use crate::linalg::Vector;
use crate::pair::{HilbertPair, SpherePoint};

use super::first_order::{first_order_deform, FirstOrderReport};
use super::iterate::{iterate_deform, IterateReport};
use super::{DiscreteMap, TraceRow};

/// Node cap for path refinement before the deformation stage.
pub const REFINE_CAP: usize = 20_000;

/// `α/(2(α+2))`, the largest admissible `α₁`.
pub fn alpha1_max(alpha: f64) -> f64 {
    alpha / (2.0 * (alpha + 2.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct Certified {
    pub index: usize,
    #[serde(skip)]
    pub point: SpherePoint,
    pub value: f64,
    pub dual_norm: f64,
    /// `ζ = ε^{α₁}`.
    pub zeta: f64,
    pub morse: usize,
}

#[derive(Clone, Debug)]
pub enum CertifyOutcome {
    Point(Certified),
    /// A deformed member with `max φ < c − ε`.
    Witness { map: DiscreteMap, max_value: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifyReport {
    pub c: f64,
    pub eps: f64,
    pub alpha1: f64,
    pub beta: f64,
    pub delta: f64,
    pub radius: f64,
    pub k_nodes: usize,
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
    pub refined_nodes: usize,
    pub iterate: Option<IterateReport>,
    pub first_order: Option<FirstOrderReport>,
    pub witness_max: Option<f64>,
}

/// `n = dim D`; `radius` is `R` with the top set inside `B(0, R − 1)`.
#[allow(clippy::too_many_arguments)]
pub fn certify_minimax_point<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    map: &DiscreteMap,
    c: f64,
    eps: f64,
    alpha1: f64,
    radius: f64,
    trace: &mut Vec<TraceRow>,
) -> Result<(CertifyOutcome, CertifyReport)> {
    let n = map.param_dim();
    let alpha = f.alpha();
    if !(alpha1 > 0.0 && alpha1 <= alpha1_max(alpha) + 1e-15) {
        return Err(Error::HypothesisViolated(format!("alpha1 = {alpha1} outside (0, {}]", alpha1_max(alpha))));
    }
    if !(eps > 0.0) {
        return Err(Error::HypothesisViolated(format!("eps = {eps} must be positive")));
    }
    let (_, top) = map.max_value(f);
    if top > c + eps + 1e-12 {
        return Err(Error::HypothesisViolated(format!("max over the family {top} exceeds c + eps = {}", c + eps)));
    }
    let mu = map.nodes[0].mu;
    let beta = eps.powf(alpha1);
    let consts = GeometryConstants::new(radius, mu, f.bound_k(radius).max(1.0), f.holder_m(radius), alpha, n)?;
    let in_top = |p: &SpherePoint| f.value(&p.u) >= c - eps;
    let check_bounded = |m: &DiscreteMap| -> Result<Vec<usize>> {
        let k: Vec<usize> = (0..m.len()).filter(|&i| in_top(&m.nodes[i])).collect();
        for &i in &k {
            let norm = pair.norm_e(&m.nodes[i].u);
            if norm > radius - 1.0 {
                return Err(Error::HypothesisViolated(format!(
                    "top node {i} has norm {norm:.4e} outside B(0, R - 1 = {})",
                    radius - 1.0
                )));
            }
        }
        Ok(k)
    };
    let k = check_bounded(map)?;
    let mut rep = CertifyReport {
        c,
        eps,
        alpha1,
        beta,
        delta: 0.0,
        radius,
        k_nodes: k.len(),
        t1: Vec::new(),
        t2: Vec::new(),
        refined_nodes: 0,
        iterate: None,
        first_order: None,
        witness_max: None,
    };

    // candidates in order of increasing constrained gradient
    let mut duals: Vec<(usize, f64)> = k.par_iter().map(|&i| (i, constrained_dual_norm(f, pair, &map.nodes[i]))).collect();
    duals.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    for &(i, dual) in &duals {
        if dual > 3.0 * beta {
            break;
        }
        let morse = approx_morse_index(f, pair, &map.nodes[i], beta, false)?;
        if morse.count <= n {
            let point = map.nodes[i].clone();
            let value = f.value(&point.u);
            return Ok((CertifyOutcome::Point(Certified { index: i, point, value, dual_norm: dual, zeta: beta, morse: morse.count }), rep));
        }
    }

    // every top node fails: deform and look for a member below c − ε
    let delta = 0.5 * (beta / consts.m).min(consts.delta3(beta));
    rep.delta = delta;
    let mut work = map.clone();
    if n == 1 {
        rep.refined_nodes = work.refine_path(pair, consts.delta3(beta) / 4.0, |p| f.value(&p.u) >= c - 2.0 * eps, REFINE_CAP)?;
    }
    let k = check_bounded(&work)?;
    let dual_of: Vec<f64> = k.par_iter().map(|&i| constrained_dual_norm(f, pair, &work.nodes[i])).collect();
    let (t1, t2): (Vec<usize>, Vec<usize>) = {
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        for (&i, &d) in k.iter().zip(&dual_of) {
            if d > 3.0 * beta {
                t1.push(i);
            } else {
                t2.push(i);
            }
        }
        (t1, t2)
    };
    let frames: Vec<Vec<Vector>> = t2
        .iter()
        .map(|&i| approx_morse_index(f, pair, &work.nodes[i], beta, false).map(|m| m.basis.into_iter().take(n + 1).collect()))
        .collect::<Result<_>>()?;
    let (after_iterate, it_rep) = iterate_deform(f, pair, &consts, &work, &t2, &frames, beta, delta, trace)?;
    rep.iterate = Some(it_rep);
    let mu_til = 8.0 * eps / (3.0 * beta);
    let (deformed, fo_rep) = first_order_deform(f, pair, &after_iterate, &t1, c, eps, mu_til, trace)?;
    rep.first_order = Some(fo_rep);
    rep.t1 = t1;
    rep.t2 = t2;
    let (_, max_value) = deformed.max_value(f);
    if max_value < c - eps {
        rep.witness_max = Some(max_value);
        return Ok((CertifyOutcome::Witness { map: deformed, max_value }, rep));
    }
    Err(Error::Certification(format!(
        "no top node certified and the deformation only reached max {max_value:.6e} >= c - eps = {:.6e}",
        c - eps
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problems::toy::Quadratic;

    fn saddle() -> (HilbertPair, Quadratic) {
        // φ = ½(−x² + y² + 2z²)
        let pair = HilbertPair::identity(3);
        let q = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0, 2.0]));
        (pair.clone(), Quadratic::new(&pair, q, Vector::zeros(3), 1.0).unwrap())
    }

    /// Great-circle path from `e_x` through `e_y` to `−e_x`; its top is the saddle `e_y`.
    fn path(pair: &HilbertPair, k: usize) -> DiscreteMap {
        let nodes = (0..k)
            .map(|i| {
                let s = std::f64::consts::PI * i as f64 / (k - 1) as f64;
                pair.normalize(&Vector::from_vec(vec![s.cos(), s.sin(), 0.0]), 1.0).unwrap()
            })
            .collect();
        DiscreteMap::path(nodes)
    }

    #[test]
    fn returns_the_saddle_node() {
        let (pair, f) = saddle();
        let map = path(&pair, 21);
        let c = 0.5;
        let mut trace = Vec::new();
        let (out, rep) = certify_minimax_point(&f, &pair, &map, c, 1e-3, alpha1_max(1.0), 3.0, &mut trace).unwrap();
        match out {
            CertifyOutcome::Point(p) => {
                assert_eq!(p.index, 10);
                assert!(p.dual_norm <= 3.0 * rep.beta && p.morse <= 1);
                assert_eq!(p.point, map.nodes[10]);
            }
            CertifyOutcome::Witness { .. } => panic!("expected a point"),
        }
    }

    #[test]
    fn inconsistent_level_gives_witness() {
        // φ = z: every top node has a large gradient, and c is set too high
        let pair = HilbertPair::identity(3);
        let f = Quadratic::new(&pair, Matrix::zeros(3, 3), Vector::from_vec(vec![0.0, 0.0, 1.0]), 1.0).unwrap();
        let nodes = [[1.0, 0.0, 0.0], [0.5, 1.0, 0.5], [0.0, 0.0, -1.0]]
            .iter()
            .map(|x| pair.normalize(&Vector::from_vec(x.to_vec()), 1.0).unwrap())
            .collect();
        let map = DiscreteMap::path(nodes);
        let (_, top) = map.max_value(&f);
        let eps = 1e-10;
        let c = top - eps / 2.0;
        let mut trace = Vec::new();
        let (out, rep) = certify_minimax_point(&f, &pair, &map, c, eps, alpha1_max(1.0), 3.0, &mut trace).unwrap();
        match out {
            CertifyOutcome::Witness { map: m, max_value } => {
                assert!(max_value < c - eps);
                assert_eq!(m.nodes[0], map.nodes[0]);
                assert_eq!(m.nodes.last(), map.nodes.last());
            }
            CertifyOutcome::Point(_) => panic!("expected a witness"),
        }
        assert!(rep.t2.is_empty() && !rep.t1.is_empty() && rep.refined_nodes > 0);
        assert!(rep.first_order.as_ref().unwrap().hypothesis_ok);
    }

    #[test]
    fn rejects_large_alpha1() {
        let (pair, f) = saddle();
        let map = path(&pair, 5);
        assert!(certify_minimax_point(&f, &pair, &map, 0.5, 1e-3, 0.2, 3.0, &mut Vec::new()).is_err());
    }
}
