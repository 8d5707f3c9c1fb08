//! The local deformation `η(t, x) = exp_{f(x)}(t g(x) f₃(x))` built from one negative
//! subspace `W ⊂ T_{u0}S_μ` transported radially to every node.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::ConstrainedFunctional;
use crate::geometry::{transport_frame, Geodesic, GeometryConstants};
use crate::linalg::Vector;
use crate::pair::{HilbertPair, SpherePoint};

use super::cover::distance;
use super::descent::{combine, descent_direction, Direction};
use super::{DiscreteMap, DECREASE_SLACK};

/// Unit direction field `f₃` with cut-off weights `g`.
#[derive(Clone, Debug)]
pub struct DirectionField {
    /// `g(x) = max(0, 1 − dist(x, K₁)/ν)`.
    pub weights: Vec<f64>,
    /// `f₃(x)` where `g(x) > 0`.
    pub vectors: Vec<Option<Vector>>,
    /// Nodes where `P∇φ` vanished and the coefficients were extended.
    pub extended: Vec<usize>,
}

/// Spherical interpolation between unit coefficient vectors; falls back to the nearer end
/// when they are antipodal.
fn slerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0);
    let om = dot.acos();
    if om < 1e-12 {
        return a.to_vec();
    }
    if (std::f64::consts::PI - om) < 1e-9 {
        return if s < 0.5 { a.to_vec() } else { b.to_vec() };
    }
    let (ka, kb) = (((1.0 - s) * om).sin() / om.sin(), (s * om).sin() / om.sin());
    let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| ka * x + kb * y).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Fills the coefficient field on the zero set `O`: along a path by interpolation between the
/// nearest determined nodes, otherwise from the nearest determined node; constant `e₁` when
/// nothing is determined.
fn extend_coefficients(map: &DiscreteMap, coeffs: &mut [Option<Vec<f64>>], active: &[usize], dim: usize) {
    let known: Vec<usize> = active.iter().copied().filter(|&i| coeffs[i].is_some()).collect();
    let missing: Vec<usize> = active.iter().copied().filter(|&i| coeffs[i].is_none()).collect();
    if known.is_empty() {
        let mut e1 = vec![0.0; dim];
        e1[0] = 1.0;
        for i in missing {
            coeffs[i] = Some(e1.clone());
        }
        return;
    }
    let one_d = map.param_dim() == 1;
    for i in missing {
        let x = &map.params[i];
        let fill = if one_d {
            let left = known.iter().copied().filter(|&k| map.params[k][0] < x[0]).max_by(|&a, &b| map.params[a][0].total_cmp(&map.params[b][0]));
            let right = known.iter().copied().filter(|&k| map.params[k][0] > x[0]).min_by(|&a, &b| map.params[a][0].total_cmp(&map.params[b][0]));
            match (left, right) {
                (Some(l), Some(r)) => {
                    let s = (x[0] - map.params[l][0]) / (map.params[r][0] - map.params[l][0]);
                    slerp(coeffs[l].as_ref().expect("known"), coeffs[r].as_ref().expect("known"), s)
                }
                (Some(k), None) | (None, Some(k)) => coeffs[k].clone().expect("known"),
                (None, None) => unreachable!("known is nonempty"),
            }
        } else {
            let k = known
                .iter()
                .copied()
                .min_by(|&a, &b| distance(&map.params[a], x).total_cmp(&distance(&map.params[b], x)))
                .expect("nonempty");
            coeffs[k].clone().expect("known")
        };
        coeffs[i] = Some(fill);
    }
}

/// Builds `g` and `f₃` for the compact index set `k1`.
pub fn direction_field<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    map: &DiscreteMap,
    k1: &[usize],
    u0: &SpherePoint,
    basis: &[Vector],
    nu: f64,
) -> Result<DirectionField> {
    let weights: Vec<f64> = map
        .params
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if map.fixed[i] {
                return 0.0;
            }
            let d = k1.iter().map(|&k| distance(&map.params[k], x)).fold(f64::INFINITY, f64::min);
            (1.0 - d / nu).max(0.0)
        })
        .collect();
    let active: Vec<usize> = (0..map.len()).filter(|&i| weights[i] > 0.0).collect();
    let frames: Vec<Result<Vec<Vector>>> = active
        .par_iter()
        .map(|&i| transport_frame(pair, u0, basis, &map.nodes[i]).map_err(|e| Error::FrameTransportFailure(format!("node {i}: {e}"))))
        .collect();
    let mut frame_of = vec![None; map.len()];
    let mut coeffs: Vec<Option<Vec<f64>>> = vec![None; map.len()];
    let mut extended = Vec::new();
    for (&i, fr) in active.iter().zip(frames) {
        let fr = fr?;
        if let (Direction::Unit { coefficients, .. }, _) = descent_direction(f, &map.nodes[i], &fr) {
            coeffs[i] = Some(coefficients);
        } else {
            extended.push(i);
        }
        frame_of[i] = Some(fr);
    }
    extend_coefficients(map, &mut coeffs, &active, basis.len());
    let vectors = (0..map.len())
        .map(|i| frame_of[i].as_ref().map(|fr| combine(fr, coeffs[i].as_ref().expect("filled"))))
        .collect();
    Ok(DirectionField { weights, vectors, extended })
}

impl DirectionField {
    /// Nodes of `η(t, ·)`.
    pub fn apply(&self, pair: &HilbertPair, map: &DiscreteMap, t: f64) -> Vec<SpherePoint> {
        map.nodes
            .par_iter()
            .enumerate()
            .map(|(i, p)| match &self.vectors[i] {
                Some(v) if self.weights[i] > 0.0 && t != 0.0 => Geodesic::new(pair, p, &(v * (t * self.weights[i]))).eval(1.0).0,
                _ => p.clone(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HomotopyReport {
    pub times: Vec<f64>,
    pub t0: f64,
    /// `η(0,·) = f` and nodes outside `N_ν(K₁)` never move.
    pub fixed_outside: bool,
    /// `φ(η(t,x)) ≤ φ(f(x))` on all nodes.
    pub non_increasing: bool,
    /// `φ(η(t,x)) < φ(f(x)) − βt²/24` on `K₁` for `t ≥ t0`.
    pub decrease_on_k1: bool,
    /// `‖η(t,x) − f(x)‖ ≤ 3t`.
    pub displacement: bool,
    pub worst_decrease_margin: f64,
    pub max_displacement_ratio: f64,
    pub extended_nodes: usize,
}

impl HomotopyReport {
    pub fn all_hold(&self) -> bool {
        self.fixed_outside && self.non_increasing && self.decrease_on_k1 && self.displacement
    }
}

/// Deforms `map` near `K₁` and checks the four properties at the sample times.
#[allow(clippy::too_many_arguments)]
pub fn homotopy_deform<F: ConstrainedFunctional + ?Sized>(
    f: &F,
    pair: &HilbertPair,
    consts: &GeometryConstants,
    map: &DiscreteMap,
    k1: &[usize],
    u0: &SpherePoint,
    basis: &[Vector],
    beta: f64,
    nu: f64,
    t0: f64,
    times: &[f64],
) -> Result<(DirectionField, HomotopyReport)> {
    let radius = 0.5 * consts.delta3(beta);
    for &i in k1 {
        let distance = pair.norm_e(&(&map.nodes[i].u - &u0.u));
        if !(distance < radius) {
            return Err(Error::PreconditionOutOfBall { distance, radius });
        }
    }
    let field = direction_field(f, pair, map, k1, u0, basis, nu)?;
    let in_k1: Vec<bool> = (0..map.len()).map(|i| k1.contains(&i)).collect();
    let mut rep = HomotopyReport {
        times: times.to_vec(),
        t0,
        fixed_outside: true,
        non_increasing: true,
        decrease_on_k1: true,
        displacement: true,
        worst_decrease_margin: f64::INFINITY,
        max_displacement_ratio: 0.0,
        extended_nodes: field.extended.len(),
    };
    for &t in times {
        let nodes = field.apply(pair, map, t);
        for (i, (p, q)) in map.nodes.iter().zip(&nodes).enumerate() {
            let disp = pair.norm_e(&(&q.u - &p.u));
            if (field.weights[i] == 0.0 || t == 0.0) && q.u != p.u {
                rep.fixed_outside = false;
            }
            let drop = -f.value_increment(&p.u, &(&q.u - &p.u));
            if drop < -DECREASE_SLACK {
                rep.non_increasing = false;
            }
            if in_k1[i] && t >= t0 {
                let margin = drop - beta * t * t / 24.0;
                rep.worst_decrease_margin = rep.worst_decrease_margin.min(margin);
                if margin <= -DECREASE_SLACK {
                    rep.decrease_on_k1 = false;
                }
            }
            if t > 0.0 {
                rep.max_displacement_ratio = rep.max_displacement_ratio.max(disp / t);
                if disp > 3.0 * t {
                    rep.displacement = false;
                }
            }
        }
    }
    Ok((field, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::approx_morse_index;
    use crate::linalg::Matrix;
    use crate::problems::toy::Quadratic;

    #[test]
    fn slerp_is_unit_and_interpolates() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let m = slerp(&a, &b, 0.5);
        assert!((m[0] - m[1]).abs() < 1e-15 && (m[0].hypot(m[1]) - 1.0).abs() < 1e-15);
        assert_eq!(slerp(&a, &b, 0.0), a.to_vec());
    }

    #[test]
    fn saddle_path_deformation_properties() {
        let pair = HilbertPair::identity(3);
        let q = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, 1.0, 2.0]));
        let f = Quadratic::new(&pair, q, Vector::zeros(3), 1.0).unwrap();
        let u0 = pair.normalize(&Vector::from_vec(vec![0.0, 0.0, 1.0]), 1.0).unwrap();
        // a short path through u0 transversal to the descent direction e_x
        let nodes: Vec<SpherePoint> =
            (0..21).map(|k| pair.normalize(&Vector::from_vec(vec![0.0, (k as f64 - 10.0) * 1e-11, 1.0]), 1.0).unwrap()).collect();
        let map = DiscreteMap::path(nodes);
        let consts = GeometryConstants::new(2.0, 1.0, f.bound_k(2.0), f.holder_m(2.0), 1.0, 0).unwrap();
        let beta = 0.5;
        let morse = approx_morse_index(&f, &pair, &u0, beta, false).unwrap();
        let basis = vec![morse.basis[0].clone()];
        let tmax = consts.tmax(consts.delta3(beta));
        let k1: Vec<usize> = (8..=12).collect();
        let times: Vec<f64> = (0..=8).map(|k| k as f64 * tmax / 9.0).collect();
        let (field, rep) = homotopy_deform(&f, &pair, &consts, &map, &k1, &u0, &basis, beta, 0.1, tmax / 8.0, &times).unwrap();
        assert!(rep.all_hold() && rep.worst_decrease_margin > 0.0, "{rep:?}");
        assert!(field.weights[0] == 0.0 && field.weights[10] == 1.0);
        assert_eq!(field.apply(&pair, &map, 0.0), map.nodes);
    }
}
