//! Mass-constrained NLS `−u″ + V u = λ u + ρ|u|^{p−2}u` discretized by P1 finite
//! elements on an interval or a three-edge star graph.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::ConstrainedFunctional;
use crate::linalg::{bandwidth, sym_eigen, BandCholesky, Matrix, SymBand, Vector};
use crate::minmax::family::{Phi, RhoFamily};
use crate::pair::{HilbertPair, SpherePoint};
use crate::problems::config::{Bc, PotentialConfig, ProblemConfig, ProblemKind};
use crate::problems::toy::coordinate_embedding;

/// 3-point Gauss rule on `[0, 1]`.
const GAUSS_X: [f64; 3] = [0.5 - 0.387_298_334_620_741_7, 0.5, 0.5 + 0.387_298_334_620_741_7];
const GAUSS_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

#[derive(Clone, Debug)]
struct Element {
    /// Degrees of freedom at the two ends; `None` is a Dirichlet end.
    dofs: [Option<usize>; 2],
    h: f64,
    /// Edge coordinates of the two ends (distance from the left end or the vertex).
    x: [f64; 2],
}

impl Element {
    fn nodal(&self, u: &Vector) -> [f64; 2] {
        [self.dofs[0].map_or(0.0, |i| u[i]), self.dofs[1].map_or(0.0, |i| u[i])]
    }
}

#[derive(Clone, Debug)]
pub struct NlsProblem {
    pub config: ProblemConfig,
    pair: HilbertPair,
    /// `S + M_V`, the matrix of `2A`.
    a_mat: SymBand,
    elements: Vec<Element>,
    /// Edge coordinate of each dof.
    positions: Vec<f64>,
    /// Distance of each dof to the spike centre.
    spike_distance: Vec<f64>,
    cinf: f64,
    vmax: f64,
    total_length: f64,
}

/// Constant Neumann solution and its exact linearized data.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantOracle {
    #[serde(skip)]
    pub point: SpherePoint,
    pub value: f64,
    /// `(Φ′(u)·u)/μ`.
    pub lagrange: f64,
    /// `λ` in `−u″ + λu = ρ|u|^{p−2}u`, the negative of `lagrange`.
    pub pde_lambda: f64,
    pub morse: usize,
    pub free_morse: usize,
    /// Constrained spectrum of `D²Φ` relative to the mass product, ascending.
    pub mode_eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpikeScan {
    pub width: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct Endpoints {
    pub w1: SpherePoint,
    pub w2: SpherePoint,
    pub spike_width: f64,
    pub scan: Vec<SpikeScan>,
}

fn potential_at(p: &PotentialConfig, x: f64) -> f64 {
    match *p {
        PotentialConfig::Zero => 0.0,
        PotentialConfig::Well { depth, a, b } => {
            if x >= a && x <= b {
                -depth
            } else {
                0.0
            }
        }
    }
}

/// Splits `total` dofs over `parts` as evenly as possible.
fn split(total: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|k| total / parts + usize::from(k < total % parts)).collect()
}

impl NlsProblem {
    pub fn new(config: &ProblemConfig) -> Result<Self> {
        let d = config.d;
        let mut elements = Vec::new();
        let mut positions = vec![0.0; d];
        let mut spike_distance = vec![0.0; d];
        let total_length;
        match config.kind {
            ProblemKind::Interval => {
                let l = config.length.ok_or_else(|| Error::Config("interval needs a length".into()))?;
                total_length = l;
                let (n_el, first) = match config.bc {
                    Bc::Dirichlet => (d + 1, 1usize),
                    Bc::Neumann => (d - 1, 0usize),
                };
                let h = l / n_el as f64;
                let dof = |node: usize| -> Option<usize> {
                    match config.bc {
                        Bc::Dirichlet if node == 0 || node == n_el => None,
                        _ => Some(node - first),
                    }
                };
                for e in 0..n_el {
                    elements.push(Element { dofs: [dof(e), dof(e + 1)], h, x: [e as f64 * h, (e + 1) as f64 * h] });
                }
                for i in 0..d {
                    positions[i] = (i + first) as f64 * h;
                    spike_distance[i] = (positions[i] - 0.5 * l).abs();
                }
            }
            ProblemKind::StarGraph => {
                let edges = config.edges.clone().ok_or_else(|| Error::Config("star graph needs edges".into()))?;
                total_length = edges.iter().sum();
                // dof 0 is the vertex; each edge numbers its dofs outward
                let counts = split(d - 1, edges.len());
                // spike centred mid-way along the first edge
                let centre = 0.5 * edges[0];
                spike_distance[0] = centre;
                let mut next = 1;
                for (edge, (&len, &m)) in edges.iter().zip(&counts).enumerate() {
                    let n_el = match config.bc {
                        Bc::Dirichlet => m + 1,
                        Bc::Neumann => m,
                    };
                    let h = len / n_el as f64;
                    let node_dof = |k: usize| -> Option<usize> {
                        if k == 0 {
                            Some(0)
                        } else if k == n_el && config.bc == Bc::Dirichlet {
                            None
                        } else {
                            Some(next + k - 1)
                        }
                    };
                    for e in 0..n_el {
                        elements.push(Element {
                            dofs: [node_dof(e), node_dof(e + 1)],
                            h,
                            x: [e as f64 * h, (e + 1) as f64 * h],
                        });
                    }
                    for k in 1..=m {
                        positions[next + k - 1] = k as f64 * h;
                        let x = k as f64 * h;
                        spike_distance[next + k - 1] = if edge == 0 { (x - centre).abs() } else { x + centre };
                    }
                    next += m;
                }
            }
        }

        let mut stiff = Matrix::zeros(d, d);
        let mut mass = Matrix::zeros(d, d);
        let mut pot = Matrix::zeros(d, d);
        let mut vmax: f64 = 0.0;
        for el in &elements {
            let h = el.h;
            let ks = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
            let ms = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
            let mut vs = [[0.0; 2]; 2];
            for (xq, wq) in GAUSS_X.iter().zip(GAUSS_W) {
                let v = potential_at(&config.potential, el.x[0] + xq * h);
                vmax = vmax.max(v.abs());
                let phi = [1.0 - xq, *xq];
                for a in 0..2 {
                    for b in 0..2 {
                        vs[a][b] += h * wq * v * phi[a] * phi[b];
                    }
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (el.dofs[a], el.dofs[b]) {
                        stiff[(i, j)] += ks[a][b];
                        mass[(i, j)] += ms[a][b];
                        pot[(i, j)] += vs[a][b];
                    }
                }
            }
        }
        let pair = HilbertPair::new(&stiff + &mass, mass)?;
        let cinf = coordinate_embedding(&pair);
        Ok(NlsProblem {
            config: config.clone(),
            pair,
            a_mat: SymBand::new(stiff + pot),
            elements,
            positions,
            spike_distance,
            cinf,
            vmax,
            total_length,
        })
    }

    pub fn pair(&self) -> &HilbertPair {
        &self.pair
    }

    pub fn dim(&self) -> usize {
        self.config.d
    }

    pub fn mu(&self) -> f64 {
        self.config.mu
    }

    pub fn p(&self) -> f64 {
        self.config.p
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// `max_i sqrt((E^{-1})_ii)`.
    pub fn sup_embedding(&self) -> f64 {
        self.cinf
    }

    pub fn phi(&self, rho: f64) -> Phi<'_, Self> {
        Phi::new(self, rho)
    }

    fn power(&self, x: f64) -> f64 {
        x.abs().powf(self.config.p)
    }

    fn for_quadrature(&self, u: &Vector, mut visit: impl FnMut(&Element, [f64; 2], f64, f64)) {
        for el in &self.elements {
            let [ul, ur] = el.nodal(u);
            for (xq, wq) in GAUSS_X.iter().zip(GAUSS_W) {
                let uq = ul * (1.0 - xq) + ur * xq;
                visit(el, [1.0 - xq, *xq], uq, el.h * wq);
            }
        }
    }

    /// Lowest mode of `(S + M_V, M)` and a centred spike, both of mass `μ`; the spike is
    /// the widest of `0.5 L·0.8^k` whose energy at `ρ_min` undercuts `w1` by `margin`.
    pub fn endpoints(&self, margin: f64) -> Result<Endpoints> {
        let mu = self.mu();
        let fm = BandCholesky::factor(self.pair.gram_h(), bandwidth(self.pair.gram_h()))
            .ok_or(Error::NotPositiveDefinite("gramH"))?;
        let (_, vecs) = sym_eigen(&fm.congruence(self.a_mat.dense()))?;
        let mut g = fm.solve_upper(&vecs.column(0).into_owned());
        if g.sum() < 0.0 {
            g = -g;
        }
        let w1 = self.pair.normalize(&g, mu)?;
        let phi = self.phi(self.config.rho_min);
        let target = phi.value(&w1.u) - margin;

        let scale = match self.config.kind {
            ProblemKind::Interval => self.total_length,
            ProblemKind::StarGraph => self.config.edges.as_ref().map_or(1.0, |e| e[0]),
        };
        let hmin = self.elements.iter().map(|e| e.h).fold(f64::INFINITY, f64::min);
        let expo = 2.0 / (self.config.p - 2.0);
        let mut scan = Vec::new();
        let mut width = 0.5 * scale;
        while width >= 2.0 * hmin {
            let x = Vector::from_iterator(
                self.dim(),
                self.spike_distance.iter().map(|&r| (1.0 / (r / width).cosh()).powf(expo)),
            );
            let w2 = self.pair.normalize(&x, mu)?;
            let value = phi.value(&w2.u);
            scan.push(SpikeScan { width, value });
            if value < target {
                return Ok(Endpoints { w1, w2, spike_width: width, scan });
            }
            width *= 0.8;
        }
        let best = scan.iter().min_by(|a, b| a.value.total_cmp(&b.value));
        Err(Error::GeometryFailure(format!(
            "no spike width in [{:.3e}, {:.3e}] drops below Phi(w1) - margin = {target:.6e} at rho_min = {} (best {:?})",
            2.0 * hmin,
            0.5 * scale,
            self.config.rho_min,
            best.map(|s| (s.width, s.value))
        )))
    }

    /// `u ≡ √(μ/L)` for the Neumann interval with `V ≡ 0`, with the exact cosine-mode spectrum.
    pub fn constant_oracle(&self, rho: f64) -> Result<ConstantOracle> {
        let c = &self.config;
        if c.kind != ProblemKind::Interval || c.bc != Bc::Neumann || c.potential != PotentialConfig::Zero {
            return Err(Error::Config("constant oracle needs a Neumann interval with zero potential".into()));
        }
        let l = self.total_length;
        let amp = (c.mu / l).sqrt();
        let point = SpherePoint { u: Vector::from_element(self.dim(), amp), mu: c.mu };
        let phi = self.phi(rho);
        let lagrange = crate::functional::lagrange_estimate(&phi, &point);
        let n_el = self.dim() - 1;
        let h = l / n_el as f64;
        let shift = (c.p - 2.0) * rho * amp.powf(c.p - 2.0);
        // D²Φ = S − (p−2)ρ c^{p−2} M on the modes k ≥ 1 (k = 0 is the normal direction)
        let mut mode_eigenvalues: Vec<f64> = (1..=n_el)
            .map(|k| {
                let th = k as f64 * std::f64::consts::PI / n_el as f64;
                6.0 / (h * h) * (1.0 - th.cos()) / (2.0 + th.cos()) - shift
            })
            .collect();
        mode_eigenvalues.sort_by(f64::total_cmp);
        let morse = mode_eigenvalues.iter().filter(|&&v| v < 0.0).count();
        Ok(ConstantOracle {
            value: phi.value(&point.u),
            point,
            lagrange,
            pde_lambda: -lagrange,
            morse,
            free_morse: morse + 1,
            mode_eigenvalues,
        })
    }
}

impl RhoFamily for NlsProblem {
    fn dim(&self) -> usize {
        self.config.d
    }

    fn a_value(&self, u: &Vector) -> f64 {
        0.5 * self.a_mat.form(u, u)
    }

    fn a_grad(&self, u: &Vector) -> Vector {
        self.a_mat.mul(u)
    }

    fn a_hess_action(&self, _u: &Vector, w: &Vector) -> Vector {
        self.a_mat.mul(w)
    }

    fn a_hess_matrix(&self, _u: &Vector) -> Matrix {
        self.a_mat.dense().clone()
    }

    fn b_value(&self, u: &Vector) -> f64 {
        let mut s = 0.0;
        self.for_quadrature(u, |_, _, uq, w| s += w * self.power(uq));
        s / self.config.p
    }

    fn b_grad(&self, u: &Vector) -> Vector {
        let p = self.config.p;
        let mut g = Vector::zeros(self.dim());
        self.for_quadrature(u, |el, phi, uq, w| {
            let f = w * uq.abs().powf(p - 2.0) * uq;
            for a in 0..2 {
                if let Some(i) = el.dofs[a] {
                    g[i] += f * phi[a];
                }
            }
        });
        g
    }

    fn b_hess_action(&self, u: &Vector, x: &Vector) -> Vector {
        let p = self.config.p;
        let mut g = Vector::zeros(self.dim());
        for el in &self.elements {
            let [ul, ur] = el.nodal(u);
            let [xl, xr] = el.nodal(x);
            for (xq, wq) in GAUSS_X.iter().zip(GAUSS_W) {
                let phi = [1.0 - xq, *xq];
                let uq = ul * phi[0] + ur * phi[1];
                let xv = xl * phi[0] + xr * phi[1];
                let f = el.h * wq * (p - 1.0) * uq.abs().powf(p - 2.0) * xv;
                for a in 0..2 {
                    if let Some(i) = el.dofs[a] {
                        g[i] += f * phi[a];
                    }
                }
            }
        }
        g
    }

    fn b_hess_matrix(&self, u: &Vector) -> Matrix {
        let p = self.config.p;
        let d = self.dim();
        let mut m = Matrix::zeros(d, d);
        self.for_quadrature(u, |el, phi, uq, w| {
            let f = w * (p - 1.0) * uq.abs().powf(p - 2.0);
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (el.dofs[a], el.dofs[b]) {
                        m[(i, j)] += f * phi[a] * phi[b];
                    }
                }
            }
        });
        m
    }

    /// Lipschitz constant of `Φ′_ρ` and `Φ″_ρ` on `B(0, R)` (`α = 1`), using
    /// `|u(x)| ≤ C∞‖u‖` and exactness of the quadrature on products of hat functions.
    fn holder_m(&self, r: f64, rho: f64) -> f64 {
        let p = self.config.p;
        let s = self.cinf * r;
        let lin = 1.0 + self.vmax;
        let first = lin + rho.abs() * (p - 1.0) * s.powf(p - 2.0);
        let second = rho.abs() * (p - 1.0) * (p - 2.0) * s.powf(p - 3.0) * self.cinf;
        first.max(second).max(1.0)
    }

    fn bound_k(&self, r: f64, rho: f64) -> f64 {
        let p = self.config.p;
        let s = self.cinf * r;
        let lin = 1.0 + self.vmax;
        let grad = lin * r + rho.abs() * s.powf(p - 2.0) * r;
        let hess = lin + rho.abs() * (p - 1.0) * s.powf(p - 2.0);
        1f64.max(grad).max(hess + grad * r / self.config.mu)
    }

    fn alpha(&self) -> f64 {
        (self.config.p - 2.0).min(1.0)
    }

    fn modulus_invariant(&self) -> bool {
        true
    }

    fn a_increment(&self, u: &Vector, delta: &Vector) -> f64 {
        delta.dot(&self.a_mat.mul(&(u + delta * 0.5)))
    }

    fn b_increment(&self, u: &Vector, delta: &Vector) -> f64 {
        let p = self.config.p;
        let even = p.fract() == 0.0 && (p as i64) % 2 == 0;
        if !even {
            return self.b_value(&(u + delta)) - self.b_value(u);
        }
        let n = p as i32;
        let mut s = 0.0;
        for el in &self.elements {
            let [ul, ur] = el.nodal(u);
            let [dl, dr] = el.nodal(delta);
            for (xq, wq) in GAUSS_X.iter().zip(GAUSS_W) {
                let y = ul * (1.0 - xq) + ur * xq;
                let dq = dl * (1.0 - xq) + dr * xq;
                let x = y + dq;
                // x^n − y^n = (x − y) Σ x^{n−1−k} y^k
                let sum: f64 = (0..n).map(|k| x.powi(n - 1 - k) * y.powi(k)).sum();
                s += el.h * wq * dq * sum;
            }
        }
        s / p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minmax::positivize;
    use crate::functional::{d2phi_matrix, euler_lagrange_residual, approx_morse_index};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(bc: Bc, d: usize) -> ProblemConfig {
        ProblemConfig {
            kind: ProblemKind::Interval,
            length: Some(1.0),
            edges: None,
            d,
            p: 8.0,
            mu: 1.0,
            rho_min: 1.0,
            rho_max: 3.0,
            rho_steps: 21,
            bc,
            potential: PotentialConfig::Zero,
            seed: 0,
            rho: None,
        }
    }

    #[test]
    fn constant_has_closed_form_energy() {
        let prob = NlsProblem::new(&cfg(Bc::Neumann, 40)).unwrap();
        let c = (1.0f64 / 1.0).sqrt();
        let u = Vector::from_element(40, c);
        assert!(prob.a_value(&u).abs() < 1e-13);
        assert!((prob.b_value(&u) - c.powi(8) / 8.0).abs() < 1e-13);
        assert!((prob.pair().inner_h(&u, &u) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for bc in [Bc::Dirichlet, Bc::Neumann] {
            let prob = NlsProblem::new(&cfg(bc, 12)).unwrap();
            let u = Vector::from_fn(12, |_, _| rng.random_range(-1.5..1.5));
            let x = Vector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
            let h = 1e-5;
            let phi = prob.phi(2.0);
            let fd = (phi.value(&(&u + &x * h)) - phi.value(&(&u - &x * h))) / (2.0 * h);
            let an = phi.grad_dual(&u).dot(&x);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
            let fd2 = (phi.grad_dual(&(&u + &x * h)) - phi.grad_dual(&(&u - &x * h))) / (2.0 * h);
            let an2 = phi.hess_action(&u, &x);
            assert!((fd2 - &an2).amax() <= 1e-6 * an2.amax().max(1.0));
            assert!((phi.hess_matrix(&u) * &x - an2).amax() < 1e-10);
            let d = &x * 1e-3;
            let inc = phi.value_increment(&u, &d);
            let plain = phi.value(&(&u + &d)) - phi.value(&u);
            assert!((inc - plain).abs() < 1e-12);
        }
    }

    #[test]
    fn b_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let prob = NlsProblem::new(&cfg(Bc::Dirichlet, 20)).unwrap();
        for _ in 0..1000 {
            let u = Vector::from_fn(20, |_, _| rng.random_range(-2.0..2.0));
            assert!(prob.b_value(&u) >= 0.0);
        }
    }

    #[test]
    fn constant_oracle_matches_brute_force() {
        let prob = NlsProblem::new(&cfg(Bc::Neumann, 41)).unwrap();
        for rho in [0.5, 3.0, 20.0] {
            let o = prob.constant_oracle(rho).unwrap();
            let phi = prob.phi(rho);
            assert!((o.pde_lambda - rho).abs() < 1e-10);
            assert!(euler_lagrange_residual(&phi, prob.pair(), &o.point) < 1e-10);
            let m = approx_morse_index(&phi, prob.pair(), &o.point, 0.0, false).unwrap();
            let mf = approx_morse_index(&phi, prob.pair(), &o.point, 0.0, true).unwrap();
            assert_eq!(m.count, o.morse, "rho {rho}");
            assert_eq!(mf.count, o.free_morse, "rho {rho}");
            // cross-check the mode formula against the pencil (D²Φ, M)
            let q = d2phi_matrix(&phi, prob.pair(), &o.point);
            let fm = BandCholesky::factor(prob.pair().gram_h(), 1).unwrap();
            let (vals, _) = sym_eigen(&fm.congruence(&q)).unwrap();
            let mut modes = o.mode_eigenvalues.clone();
            modes.push(-(8.0 - 2.0) * rho);
            modes.sort_by(f64::total_cmp);
            for (a, b) in vals.iter().zip(&modes) {
                assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn spike_undercuts_ground_state() {
        let prob = NlsProblem::new(&cfg(Bc::Dirichlet, 200)).unwrap();
        let ep = prob.endpoints(0.05).unwrap();
        let phi = prob.phi(1.0);
        assert!(phi.value(&ep.w2.u) < phi.value(&ep.w1.u) - 0.05);
        assert!(ep.w1.sphere_residual(prob.pair()) < 1e-12);
        assert!(ep.w2.sphere_residual(prob.pair()) < 1e-12);
        assert!(ep.w1.u.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn star_graph_assembles_kirchhoff_vertex() {
        let mut c = cfg(Bc::Dirichlet, 301);
        c.kind = ProblemKind::StarGraph;
        c.length = None;
        c.edges = Some(vec![1.0, 1.0, 1.0]);
        c.rho_min = 4.0;
        let prob = NlsProblem::new(&c).unwrap();
        // vertex couples to the first node of each edge
        let s = prob.pair().gram_e();
        assert_eq!((1..301).filter(|&j| s[(0, j)] != 0.0).count(), 3);
        let ep = prob.endpoints(0.05).unwrap();
        assert!(ep.w2.u[50] > ep.w2.u[0] && ep.w2.u[0] > ep.w2.u[150]);
    }

    #[test]
    fn positivize_preserves_value_of_one_signed_states() {
        let prob = NlsProblem::new(&cfg(Bc::Dirichlet, 120)).unwrap();
        let ep = prob.endpoints(0.05).unwrap();
        let flipped = SpherePoint { u: -&ep.w2.u, mu: 1.0 };
        let pos = positivize(&prob, prob.pair(), &flipped).unwrap();
        let phi = prob.phi(1.5);
        assert!((phi.value(&pos.u) - phi.value(&ep.w2.u)).abs() < 1e-12);
        assert!(pos.u.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn holder_constants_grow_with_radius() {
        let prob = NlsProblem::new(&cfg(Bc::Dirichlet, 30)).unwrap();
        assert!(prob.holder_m(4.0, 2.0) >= prob.holder_m(2.0, 2.0));
        assert!(prob.bound_k(4.0, 2.0) >= prob.bound_k(2.0, 2.0));
    }
}
