//! Numerical toolkit for EXIT/GEXIT analysis of iterative coding over binary
//! memoryless symmetric channels.

pub mod channels;
pub mod codes;
pub mod curve;
pub mod de;
pub mod density;
pub mod bounds;
pub mod ebp;
pub mod error;
pub mod kernels;
pub mod quad;

pub use channels::{h2, h2_inv, ChannelFamily, ChannelKind, ChannelSpec, SignedMeasure};
pub use density::{AbsDensity, DensityFunctionalReport, Grid, LDensity};
pub use curve::{Curve, CurveRole};
pub use de::DegreeDistribution;
pub use error::{Error, Result};
pub use kernels::GexitKernel;
