//! Seeded random instances for validators and diagnostics.

use rand::Rng;

use crate::linalg::{Matrix, Vector};
use crate::pair::{HilbertPair, SpherePoint};

pub fn random_vector<R: Rng>(rng: &mut R, d: usize) -> Vector {
    Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0))
}

/// `B B^T + s I` with `B` lower triangular of half-bandwidth `band`.
fn banded_gram<R: Rng>(rng: &mut R, d: usize, band: usize, shift: f64) -> Matrix {
    let band = band.min(d.saturating_sub(1));
    let scale = 1.0 / ((band + 1) as f64).sqrt();
    let b = Matrix::from_fn(d, d, |i, j| {
        if j <= i && i - j <= band {
            rng.random_range(-1.0..1.0) * scale
        } else {
            0.0
        }
    });
    let mut g = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i.saturating_sub(band)..=i {
            let lo = i.saturating_sub(band);
            let mut s = 0.0;
            for k in lo..=j {
                s += b[(i, k)] * b[(j, k)];
            }
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
        g[(i, i)] += shift;
    }
    g
}

/// Random SPD pair with `gramE = gramH + (SPD)`, so the injection norm is below 1.
pub fn random_pair<R: Rng>(rng: &mut R, d: usize, band: usize) -> HilbertPair {
    let h = banded_gram(rng, d, band, 0.2);
    let extra = banded_gram(rng, d, band, 0.1);
    HilbertPair::new(&h + extra, h).expect("random pair is valid")
}

pub fn random_sphere_point<R: Rng>(rng: &mut R, pair: &HilbertPair, mu: f64) -> SpherePoint {
    loop {
        let x = random_vector(rng, pair.dim());
        if let Ok(p) = pair.normalize(&x, mu) {
            return p;
        }
    }
}

/// Random tangent vector at `p` with unit E-norm.
pub fn random_unit_tangent<R: Rng>(rng: &mut R, pair: &HilbertPair, p: &SpherePoint) -> Vector {
    loop {
        let t = pair.project_tangent_h(p, &random_vector(rng, pair.dim()));
        let n = pair.norm_e(&t);
        if n > 1e-8 {
            return t / n;
        }
    }
}
