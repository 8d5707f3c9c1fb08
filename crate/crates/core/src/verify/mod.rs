//! Randomized invariant suites and the checks run on a finished solve.

pub mod cover;
pub mod descent;
pub mod geometry;
pub mod second_order;
pub mod solve;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// One named invariant over a batch of samples.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub samples: usize,
    /// Largest measured quantity; the check holds when every sample is `≤ tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub violations: usize,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn from_values(name: &str, values: &[f64], tolerance: f64) -> Self {
        let violations = values.iter().filter(|v| !(**v <= tolerance)).count();
        let worst = values.iter().copied().fold(f64::NEG_INFINITY, |m, v| if m.is_nan() || v.is_nan() { f64::NAN } else { m.max(v) });
        Check {
            name: name.to_string(),
            samples: values.len(),
            worst,
            tolerance,
            violations,
            passed: violations == 0 && !values.is_empty(),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// A check that could not be evaluated.
    pub fn failed(name: &str, note: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            samples: 0,
            worst: f64::NAN,
            tolerance: f64::NAN,
            violations: 1,
            passed: false,
            note: Some(note.into()),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn new(seed: u64, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        VerifyReport { seed, checks, passed }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Sample sizes of the randomized suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteOptions {
    pub geometry_dims: Vec<usize>,
    pub geometry_seeds: usize,
    pub second_order_probes: usize,
    pub descent_instances: usize,
    pub cover_boxes: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            geometry_dims: vec![3, 50, 400],
            geometry_seeds: 500,
            second_order_probes: 200,
            descent_instances: 500,
            cover_boxes: 100,
        }
    }
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The full randomized suite over geometry, second-order forms, descent and covers.
pub fn verify_lemmas(seed: u64, opts: &SuiteOptions) -> VerifyReport {
    let mut checks = geometry::geometry_suite(seed, &opts.geometry_dims, opts.geometry_seeds);
    checks.extend(second_order::second_order_suite(seed, opts.second_order_probes));
    checks.extend(descent::descent_suite(seed, opts.descent_instances));
    checks.extend(cover::cover_suite(seed, opts.cover_boxes));
    VerifyReport::new(seed, checks)
}
