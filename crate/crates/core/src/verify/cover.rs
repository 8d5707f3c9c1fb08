//! Brute-force audits of lattice covers of random boxes.

use rand::Rng;
use rayon::prelude::*;

use crate::deformation::cover::{build_cover, lemma_multiplicity_bound, Domain};

use super::{sample_rng, Check};

#[derive(Clone, Debug)]
struct BoxAudit {
    uncovered: f64,
    /// Audited multiplicity over the lemma's bound.
    multiplicity: f64,
    /// Audited multiplicity over the bound the cover claims.
    claimed: f64,
}

fn audit_box(seed: u64, i: usize, n: usize) -> BoxAudit {
    let mut rng = sample_rng(seed, (5u64 << 40) | i as u64);
    let lo: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.0..1.0)).collect();
    let eps = rng.random_range(0.1..0.5);
    let domain = Domain::Box { lo, hi };
    match build_cover(&domain, eps) {
        Ok(c) => {
            let a = c.audit(&domain, if n == 1 { 2001 } else { 101 });
            BoxAudit {
                uncovered: a.uncovered as f64,
                multiplicity: a.max_multiplicity as f64 / lemma_multiplicity_bound(n) as f64,
                claimed: a.max_multiplicity as f64 / c.multiplicity_bound as f64,
            }
        }
        Err(_) => BoxAudit { uncovered: f64::INFINITY, multiplicity: f64::INFINITY, claimed: f64::INFINITY },
    }
}

/// Half the boxes in `R`, half in `R²`.
pub fn cover_suite(seed: u64, boxes: usize) -> Vec<Check> {
    let rs: Vec<BoxAudit> = (0..boxes).into_par_iter().map(|i| audit_box(seed, i, 1 + (i % 2))).collect();
    let col = |f: fn(&BoxAudit) -> f64| rs.iter().map(f).collect::<Vec<f64>>();
    vec![
        Check::from_values("cover.coverage", &col(|r| r.uncovered), 0.0).with_note("uncovered grid points per box"),
        Check::from_values("cover.multiplicity_lemma_bound", &col(|r| r.multiplicity), 1.0),
        Check::from_values("cover.multiplicity_claimed", &col(|r| r.claimed), 1.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        for c in cover_suite(2, 6) {
            assert!(c.passed, "{c:?}");
        }
    }
}
