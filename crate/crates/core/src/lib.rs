//! Weighted `L^2` spaces on the line, the shift semigroup acting on them,
//! convolution multipliers, their symbols on strips, and spectral
//! certificates for the unit shift.

pub mod error;
pub mod function_space;
mod linalg;
pub mod multipliers;
pub mod scalar;
pub mod shift_analysis;
pub mod spectrum;
pub mod symbols;
pub mod weights;

pub use error::{Error, Result};
pub use function_space::{Grid, SampledFunction, TestFunction, Translation};
pub use multipliers::{GridOperator, Kernel, MultiplierOp, NormEstimate};
pub use scalar::{Cplx, Real};
pub use symbols::{SymbolLine, SymbolStrip};
pub use shift_analysis::{Annulus, Direction, SpectralRadiusEstimate, Strip, StripAnalysis};
pub use spectrum::{PolarRaster, SpectrumClassification, SpectrumContext, SpectrumMap, Verdict};
pub use weights::{Interval, Weight, WeightFamily};

pub type Weight64 = Weight<f64>;
pub type Weight32 = Weight<f32>;
pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type Function64 = SampledFunction<f64>;
pub type Function32 = SampledFunction<f32>;
