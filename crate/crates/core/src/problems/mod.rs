//! Concrete problems: the NLS discretizations and closed-form toy functionals.

pub mod config;
pub mod nls;
pub mod shooting;
pub mod toy;
