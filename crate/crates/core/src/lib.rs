//! Random coverings of flat tori by translates of a convex body.
//!
//! The crate is layered bottom-up:
//!
//! * [`bodies`]: closed-form convex bodies, overlap volumes, isotropic constants.
//! * [`torus`]: rectangular lattices, quotient metric, probe nets, greedy packings.
//! * [`sampling`]: seeded streams, Poisson counts, Poisson point processes.
//! * [`pointset`]: reduced point configurations with a periodic cell index.
//! * [`coverage`]: sound coverage certificates, densities and multiplicities.
//! * [`analytic`]: roots, volumes, tail bounds and intensity formulas.
//! * [`experiments`]: orchestrated, deterministic, parallel pipelines.

pub mod analytic;
pub mod bodies;
pub mod coverage;
mod error;
pub mod experiments;
pub mod pointset;
pub mod quadrature;
pub mod sampling;
pub mod torus;

pub use bodies::{Body, SlabSpec};
pub use coverage::{CoverageVerdict, MultiplicityBounds, VerdictStatus};
pub use error::{Error, Result};
pub use pointset::PointSet;
pub use sampling::SeedSpec;
pub use torus::{Lattice, Norm, ProbeNet, Torus};
