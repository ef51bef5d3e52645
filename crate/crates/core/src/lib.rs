//! Constructive machinery behind the Hausdorff-measure theory of
//! multiplicatively `psi`-approximable points: dyadic covers of hyperbolic
//! regions, fine-cover cost ledgers, exact series verdicts and desk-scale
//! empirical probes.

pub mod empirical;
pub mod error;
pub mod finecover;
pub mod functions;
pub mod hyperbola_cover;
pub mod numerics;
pub mod series;

pub use error::{Error, Result};
pub use functions::{ApproximatingFunction, DimensionFunction};
