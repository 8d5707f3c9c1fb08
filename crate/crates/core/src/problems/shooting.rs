//! Shooting oracle for the positive symmetric solution of
//! `u″ = λu − ρu^{p−1}` on `(0, L)` with `u(0) = u(L) = 0` and `∫u² = μ`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct ShootingSolution {
    pub peak: f64,
    pub lambda: f64,
    /// `½∫u′² − (ρ/p)∫|u|^p`.
    pub value: f64,
    pub mass: f64,
    pub end_value: f64,
    pub iterations: usize,
}

struct Shot {
    end: f64,
    mass: f64,
    value: f64,
}

/// RK4 from the centre (`u = a`, `u′ = 0`) to the right end; mass and energy doubled by symmetry.
fn shoot(a: f64, lambda: f64, rho: f64, p: f64, half: f64, steps: usize) -> Shot {
    let rhs = |y: [f64; 4]| -> [f64; 4] {
        let (u, v) = (y[0], y[1]);
        let up = u.abs().powf(p - 2.0) * u;
        [v, lambda * u - rho * up, u * u, 0.5 * v * v - rho / p * u.abs().powf(p)]
    };
    let h = half / steps as f64;
    let mut y = [a, 0.0, 0.0, 0.0];
    let add = |y: [f64; 4], k: [f64; 4], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2], y[3] + s * k[3]];
    for _ in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs(add(y, k1, 0.5 * h));
        let k3 = rhs(add(y, k2, 0.5 * h));
        let k4 = rhs(add(y, k3, h));
        for i in 0..4 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Shot { end: y[0], mass: 2.0 * y[2], value: 2.0 * y[3] }
}

/// Newton in `(peak, λ)` from an initial guess.
pub fn shooting_oracle(length: f64, mu: f64, rho: f64, p: f64, peak: f64, lambda: f64) -> Result<ShootingSolution> {
    let steps = 40_000;
    let half = 0.5 * length;
    let (mut a, mut lam) = (peak, lambda);
    let resid = |a: f64, lam: f64| {
        let s = shoot(a, lam, rho, p, half, steps);
        ([s.end, s.mass - mu], s)
    };
    for it in 0..60 {
        let (f, s) = resid(a, lam);
        if f[0].abs() < 1e-12 * a.abs().max(1.0) && f[1].abs() < 1e-12 * mu {
            return Ok(ShootingSolution { peak: a, lambda: lam, value: s.value, mass: s.mass, end_value: s.end, iterations: it });
        }
        let ha = 1e-7 * a.abs().max(1e-3);
        let hl = 1e-7 * lam.abs().max(1.0);
        let (fa, _) = resid(a + ha, lam);
        let (fl, _) = resid(a, lam + hl);
        let j = [[(fa[0] - f[0]) / ha, (fl[0] - f[0]) / hl], [(fa[1] - f[1]) / ha, (fl[1] - f[1]) / hl]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if !(det.abs() > 0.0) {
            return Err(Error::NoConvergence("singular shooting Jacobian".into()));
        }
        let da = (f[0] * j[1][1] - f[1] * j[0][1]) / det;
        let dl = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        // keep the peak positive
        let mut s = 1.0;
        while a - s * da <= 0.0 {
            s *= 0.5;
        }
        a -= s * da;
        lam -= s * dl;
    }
    Err(Error::NoConvergence(format!("shooting did not converge from peak {peak}, lambda {lambda}")))
}
