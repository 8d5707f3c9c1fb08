//! Mountain-pass families, the ρ-sweep, bounded-path selection, Palais–Smale
//! extraction and limit refinement.

pub mod family;
pub mod level;
pub mod path;
pub mod pipeline;
pub mod ps;
pub mod refine;
pub mod select;

use crate::error::{Error, Result};
use crate::pair::{HilbertPair, SpherePoint};

use family::RhoFamily;

/// Nodal modulus renormalized onto `S_μ`.
pub fn positivize<F: RhoFamily + ?Sized>(family: &F, pair: &HilbertPair, p: &SpherePoint) -> Result<SpherePoint> {
    if !family.modulus_invariant() {
        return Err(Error::NotModulusInvariant);
    }
    pair.normalize(&p.u.abs(), p.mu)
}
