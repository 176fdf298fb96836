//! Polynomial lens distortion models in complex form.
//!
//! A displacement `G` is written `Σ γ_kl z^k z̄^l` over monomials of degree
//! at least two. Under a coordinate rotation each coefficient picks up the
//! phase `e^{iθm}` with winding number `m = k − l − 1`, which drives the
//! isotropy and reflection-symmetry checks in [`symmetry`].
//!
//! [`calib`] fits candidate families to synthetic planar-target
//! observations; [`warp`] applies and inverts distortion maps.

pub mod calib;
pub mod error;
pub mod families;
pub mod io;
pub mod linalg;
pub mod poly;
pub mod svg;
pub mod symmetry;
pub mod warp;

pub use error::{Error, Result};
pub use families::{DistortionFunction, ModelSpace};
pub use poly::{ComplexPoly, MonomialKey, Point2, RealPolyModel};
