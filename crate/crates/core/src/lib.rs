//! Prediction with incomplete features under shifts of the missingness
//! distribution: synthetic benchmarks, mask generators, decorrelating sample
//! weights, mask-conditioned predictors and closed-form optimal baselines.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod decorrelation;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod masks;
pub mod nn;
pub mod oracle;
pub mod predictor;
pub mod rng;
pub mod synthetic;

pub use decorrelation::{DecorrMode, RffBank, RffBanks, WeightVector};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ResultRow, ResultTable};
pub use masks::{MaskGenerator, MaskPattern, MaskedDataset, MissingLevel};
pub use nn::{AdamState, MlpParams};
pub use predictor::{DiscreteInstance, PredictorModel, QuadraticTheta, ThetaTensor};
pub use synthetic::{CompleteDataset, FeatureKind, FeatureSpec, LabelModel};
