//! Approximation algorithms for CP decompositions with orthonormal trailing
//! factors, together with the tensor and matrix kernels they rely on.

pub mod als;
pub mod approx;
pub mod error;
pub mod exec;
pub mod extract;
pub mod factors;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod synth;
pub mod tensor;

pub use als::{refine, AlsConfig, RefineTrace};
pub use approx::{approximate, rank1approx, ApproxConfig, ApproxResult};
pub use error::{Error, Result};
pub use exec::Exec;
pub use extract::Extractor;
pub use factors::FactorSet;
pub use synth::{GroundTruth, StructuredSpec};
pub use tensor::{build_cp, DenseMatrix, DenseTensor, DenseVector};
