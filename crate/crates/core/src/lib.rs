//! Billiard rays in the exterior of strictly convex obstacles, their
//! travelling-time spectra, and reconstruction of the obstacle boundary from
//! travelling times alone.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: bounding sphere, convex bodies, normals and curvature.
//! * [`flow`]: simply reflecting ray tracing, the cross-section map,
//!   regularity and two-point continuation.
//! * [`spectrum`]: sampling of the travelling-time spectrum, the diagonal
//!   spectrum and the echograph (planar scenes).
//! * [`recovery`]: ray directions from derivatives of travelling times,
//!   single-body reconstruction, vacuous lines and the convex hull.
//! * [`reconstruct`]: the two-body boundary reconstruction from the
//!   echograph by backward ray tracing.
//! * [`validate`]: checks of a reconstruction against the true scene.
//! * [`checks`]: property checks on simulated rays, hulls and seeds.
//! * [`io`] and [`svg`]: file formats and figures.

pub mod checks;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod reconstruct;
pub mod recovery;
pub mod spectrum;
pub mod svg;
pub mod validate;

pub use error::{FlowError, GeometryError, IoError, ReconstructionError, RecoveryError};
pub use geometry::{BoundingSphere, ConvexBody, Scene, Shape, Vector};
