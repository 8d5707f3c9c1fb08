//! Finite covers of compact parameter sets by shifted lattices with bounded multiplicity.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};

/// Compact parameter set `D ⊂ R^n`.
#[derive(Clone, Debug)]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Points(Vec<Vec<f64>>),
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Points(p) => p.first().map_or(0, |x| x.len()),
        }
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Points(pts) => {
                let n = self.dim();
                let mut lo = vec![f64::INFINITY; n];
                let mut hi = vec![f64::NEG_INFINITY; n];
                for p in pts {
                    for k in 0..n {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                (lo, hi)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    pub n: usize,
    pub eps: f64,
    pub spacing: f64,
    pub centers: Vec<Vec<f64>>,
    /// `ε/4`: these balls cover `D`.
    pub inner_radius: f64,
    /// `ε/2`: multiplicity is counted for these closed balls.
    pub outer_radius: f64,
    /// Maximal number of closed `ε/2`-balls containing a point of `R^n`.
    pub multiplicity_bound: usize,
}

/// `⌈(2√(n+1) + 2)^n⌉`.
pub fn lemma_multiplicity_bound(n: usize) -> usize {
    (2.0 * ((n + 1) as f64).sqrt() + 2.0).powi(n as i32).ceil() as usize
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Upper bound on the number of lattice points `sZ^n` in a closed ball of radius `r`,
/// over all centre positions.
fn lattice_multiplicity(n: usize, s: f64, r: f64) -> usize {
    let q = r / s;
    match n {
        1 => (2.0 * q).floor() as usize + 1,
        _ => {
            // centre offsets sampled on a grid of step h in the unit cell; every offset is
            // within h/√2 of a sample, so inflating the radius by that keeps the count an upper bound
            let steps = 64;
            let h = 1.0 / steps as f64;
            let reach = q + h * std::f64::consts::FRAC_1_SQRT_2;
            let k = reach.ceil() as i64 + 1;
            let mut best = 0;
            for a in 0..=steps {
                for b in 0..=steps {
                    let (cx, cy) = (a as f64 * h, b as f64 * h);
                    let mut count = 0;
                    for i in -k..=k + 1 {
                        for j in -k..=k + 1 {
                            let (dx, dy) = (i as f64 - cx, j as f64 - cy);
                            if dx * dx + dy * dy <= reach * reach {
                                count += 1;
                            }
                        }
                    }
                    best = best.max(count);
                }
            }
            best
        }
    }
}

/// Lattice of spacing `0.9·ε/(2√n)` anchored at the lower corner of `D`; keeps the
/// points whose cell meets `D` (for point clouds, the nearest lattice point of each point).
pub fn build_cover(domain: &Domain, eps: f64) -> Result<CoverReport> {
    let n = domain.dim();
    if n == 0 || n > 2 {
        return Err(Error::UnsupportedDimension(n));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::CoverFailure(format!("radius must be positive, got {eps}")));
    }
    let s = 0.9 * eps / (2.0 * (n as f64).sqrt());
    let (lo, hi) = domain.bounds();
    let index_sets: BTreeSet<Vec<i64>> = match domain {
        Domain::Box { .. } => {
            if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
                return Err(Error::CoverFailure("box with lo > hi".into()));
            }
            let top: Vec<i64> = lo.iter().zip(&hi).map(|(a, b)| ((b - a) / s + 0.5).floor() as i64).collect();
            let mut out = BTreeSet::new();
            match n {
                1 => (0..=top[0]).for_each(|i| {
                    out.insert(vec![i]);
                }),
                _ => {
                    for i in 0..=top[0] {
                        for j in 0..=top[1] {
                            out.insert(vec![i, j]);
                        }
                    }
                }
            }
            out
        }
        Domain::Points(pts) => {
            if pts.is_empty() {
                return Err(Error::CoverFailure("empty point cloud".into()));
            }
            pts.iter().map(|p| p.iter().zip(&lo).map(|(x, l)| ((x - l) / s).round() as i64).collect()).collect()
        }
    };
    let centers = index_sets
        .into_iter()
        .map(|k| k.iter().zip(&lo).map(|(&i, l)| l + i as f64 * s).collect())
        .collect();
    let multiplicity_bound = lattice_multiplicity(n, s, 0.5 * eps);
    Ok(CoverReport { n, eps, spacing: s, centers, inner_radius: 0.25 * eps, outer_radius: 0.5 * eps, multiplicity_bound })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverAudit {
    pub uncovered: usize,
    pub max_multiplicity: usize,
    pub samples: usize,
}

impl CoverReport {
    /// `N` of the covering lemma: a ball of radius `ε/2` meets at most this many others, itself included.
    pub fn intersection_number(&self) -> usize {
        self.multiplicity_bound + 1
    }

    pub fn multiplicity_at(&self, x: &[f64]) -> usize {
        self.centers.iter().filter(|c| distance(c, x) <= self.outer_radius).count()
    }

    pub fn covered(&self, x: &[f64]) -> bool {
        self.centers.iter().any(|c| distance(c, x) <= self.inner_radius)
    }

    /// Brute-force check: coverage on a grid of `D` and multiplicity on a grid of its
    /// `ε/2`-neighbourhood.
    pub fn audit(&self, domain: &Domain, per_axis: usize) -> CoverAudit {
        let (lo, hi) = domain.bounds();
        let grid = |lo: &[f64], hi: &[f64]| -> Vec<Vec<f64>> {
            let axis = |k: usize| -> Vec<f64> {
                if per_axis <= 1 || hi[k] == lo[k] {
                    vec![lo[k]]
                } else {
                    (0..per_axis).map(|i| lo[k] + (hi[k] - lo[k]) * i as f64 / (per_axis - 1) as f64).collect()
                }
            };
            match lo.len() {
                1 => axis(0).into_iter().map(|x| vec![x]).collect(),
                _ => {
                    let (a, b) = (axis(0), axis(1));
                    a.iter().flat_map(|&x| b.iter().map(move |&y| vec![x, y])).collect()
                }
            }
        };
        let inside: Vec<Vec<f64>> = match domain {
            Domain::Box { .. } => grid(&lo, &hi),
            Domain::Points(p) => p.clone(),
        };
        let uncovered = inside.iter().filter(|x| !self.covered(x)).count();
        let pad = self.outer_radius;
        let wlo: Vec<f64> = lo.iter().map(|v| v - pad).collect();
        let whi: Vec<f64> = hi.iter().map(|v| v + pad).collect();
        let outer = grid(&wlo, &whi);
        let max_multiplicity = outer.iter().chain(&self.centers).map(|x| self.multiplicity_at(x)).max().unwrap_or(0);
        CoverAudit { uncovered, max_multiplicity, samples: inside.len() + outer.len() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_interval_cover() {
        let d = Domain::Box { lo: vec![0.0], hi: vec![1.0] };
        let c = build_cover(&d, 0.5).unwrap();
        assert_eq!(c.centers[0], vec![0.0]);
        assert_eq!(c.multiplicity_bound, 3);
        let a = c.audit(&d, 2001);
        assert_eq!(a.uncovered, 0);
        assert!(a.max_multiplicity <= 3);
        assert!(lemma_multiplicity_bound(1) == 5);
    }

    #[test]
    fn single_point() {
        let d = Domain::Points(vec![vec![0.3, 0.7]]);
        let c = build_cover(&d, 0.1).unwrap();
        assert_eq!(c.centers.len(), 1);
        assert_eq!(c.audit(&d, 10).uncovered, 0);
        assert_eq!(c.multiplicity_at(&[0.3, 0.7]), 1);
    }

    #[test]
    fn planar_bound_is_within_lemma_bound() {
        let d = Domain::Box { lo: vec![-0.2, 0.1], hi: vec![0.5, 0.4] };
        let c = build_cover(&d, 0.2).unwrap();
        assert!(c.multiplicity_bound <= lemma_multiplicity_bound(2));
        let a = c.audit(&d, 121);
        assert_eq!(a.uncovered, 0);
        assert!(a.max_multiplicity <= c.multiplicity_bound);
    }

    #[test]
    fn rejects_three_dimensions() {
        let d = Domain::Box { lo: vec![0.0; 3], hi: vec![1.0; 3] };
        assert!(matches!(build_cover(&d, 0.3), Err(Error::UnsupportedDimension(3))));
    }
}
