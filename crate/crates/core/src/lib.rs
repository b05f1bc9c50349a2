//! Quantized electromagnetic field smeared with momentum-space test functions,
//! evaluated numerically on discretized light-cone grids.
//!
//! Layers, bottom up:
//! - [`tensor`]: Minkowski vectors, antisymmetric rank-2 tensors, Hodge dual, Lorentz maps.
//! - [`grid`]: on-shell quadrature over the positive light cone with exact parity and rotation maps.
//! - [`testfn`]: analytic families and sampled on-shell test functions with the star, bullet and box maps.
//! - [`pairing`]: the positive Hermitian form and a label registry caching its table.
//! - [`ladder`]: Wick evaluation of vacuum expectations of ladder words and field products.
//! - [`sampler`]: Gaussian sampling of the commuting χ field.
//! - [`presets`]: fixed and random packet choices used by the verification drivers.

pub mod error;
pub mod grid;
pub mod ladder;
pub mod pairing;
pub mod presets;
pub mod sampler;
pub mod tensor;
pub mod testfn;

pub use error::{Error, Result};
pub use grid::{AngularRule, AngularScheme, GridNode, GridSpec, LightconeGrid, OctahedralRotation};
pub use ladder::{
    commutator_scale, commutator_vev, equivalence_check, expand_field, field_vev, relabel_b, relabel_c,
    vacuum_expectation, Derivation, FieldKind, FieldSymbol, LadderOp, OpKind, OperatorWord, WordTemplate,
};
pub use pairing::{inner_product, GramContext, LabelId, PhysicalConstants, PositivityReport};
pub use sampler::{covariance_matrix, draw_samples, moment_report, CovarianceMatrix, MomentReport, SampleBatch};
pub use tensor::{AntisymTensor2, FourVector, Sign};
pub use testfn::{AnalyticTestFunction, OnShellTestFunction};
