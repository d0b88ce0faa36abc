//! Deterministic radio-propagation data generation for LOS/NLOS scenario
//! classification.
//!
//! The pipeline runs scene → [`tracer`] (image-source multipath) →
//! [`channel`] (sparse CIR, band-limited reconstruction, augmentation) →
//! [`features`] → [`datagen`] (labeled, spatially split datasets) →
//! [`forest`] (random forest, RFE, evaluation) → [`map`] (LOS/NLOS maps).
//!
//! Work that is parallel over links, replicas or trees goes through
//! [`parallel`], which uses rayon when the `parallel` feature is on and runs
//! sequentially otherwise. Results are bit-identical either way.

pub mod channel;
pub mod datagen;
pub mod error;
pub mod features;
pub mod forest;
pub mod geometry;
pub mod map;
pub mod parallel;
pub mod scene;
pub mod tracer;

pub use error::{Error, Result};
pub use geometry::{Vec3, EPS_GEOM};
pub use parallel::Parallelism;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.8541878128e-12;

/// Ground-truth or predicted link condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Los = 0,
    Nlos = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Los),
            1 => Some(Label::Nlos),
            _ => None,
        }
    }
}

/// Version string written into sidecar and model files.
pub const TOOL_VERSION: &str = concat!("raychannel ", env!("CARGO_PKG_VERSION"));
