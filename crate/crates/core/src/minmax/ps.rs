//! Palais–Smale extraction: one certified point per selected path.

use serde::Serialize;

use crate::deformation::certify::{certify_minimax_point, CertifyOutcome};
use crate::deformation::TraceRow;
use crate::error::{Error, Result};
use crate::functional::lagrange_estimate;
use crate::pair::{HilbertPair, SpherePoint};

use super::family::{Phi, RhoFamily};
use super::select::SelectionReport;

#[derive(Clone, Debug, Serialize)]
pub struct PsRecord {
    pub n: usize,
    pub rho: f64,
    pub rho_n: f64,
    pub eps_n: f64,
    /// `ζ_n = ε_n^{α₁}`.
    pub zeta: f64,
    pub value: f64,
    pub dual_norm: f64,
    pub morse_count: usize,
    pub lagrange: f64,
    pub norm: f64,
    pub min_nodal: f64,
    pub node: usize,
    pub accepted: bool,
    #[serde(skip)]
    pub u: SpherePoint,
}

impl PsRecord {
    /// `dual_norm ≤ 3ζ_n`, `m̃_{ζ_n} ≤ 1` and `‖u‖ ≤ k_bound`.
    pub fn valid(&self, k_bound: f64) -> bool {
        self.accepted && self.dual_norm <= 3.0 * self.zeta && self.morse_count <= 1 && self.norm <= k_bound
    }
}

/// Certifies each `γ_n` at level `c_ρ` with `ε = ε_n`, `R = K + 1`.
pub fn extract_ps<F: RhoFamily + ?Sized>(
    family: &F,
    pair: &HilbertPair,
    selection: &SelectionReport,
    alpha1: f64,
    trace: &mut Vec<TraceRow>,
) -> Result<Vec<PsRecord>> {
    let rho = selection.rho;
    let phi = Phi::new(family, rho);
    let radius = selection.k_bound + 1.0;
    let mut out = Vec::with_capacity(selection.selections.len());
    for s in &selection.selections {
        let map = s.path.to_map();
        let (outcome, rep) = certify_minimax_point(&phi, pair, &map, selection.c_rho, s.eps_n, alpha1, radius, trace)?;
        match outcome {
            CertifyOutcome::Point(c) => {
                let u = c.point;
                let rec = PsRecord {
                    n: s.n,
                    rho,
                    rho_n: s.rho_n,
                    eps_n: s.eps_n,
                    zeta: c.zeta,
                    value: c.value,
                    dual_norm: c.dual_norm,
                    morse_count: c.morse,
                    lagrange: lagrange_estimate(&phi, &u),
                    norm: pair.norm_e(&u.u),
                    min_nodal: u.u.min(),
                    node: c.index,
                    accepted: c.morse <= 1 && c.dual_norm <= 3.0 * c.zeta,
                    u,
                };
                log::info!("record n = {}: value {:.10e}, dual {:.3e}, morse {}", rec.n, rec.value, rec.dual_norm, rec.morse_count);
                out.push(rec);
            }
            CertifyOutcome::Witness { max_value, .. } => {
                return Err(Error::Certification(format!(
                    "n = {}: a deformed path reaches max {max_value:.10e} < c_rho - eps_n = {:.10e}; the level estimate is too high (beta = {:.3e})",
                    s.n,
                    selection.c_rho - s.eps_n,
                    rep.beta
                )));
            }
        }
    }
    Ok(out)
}
