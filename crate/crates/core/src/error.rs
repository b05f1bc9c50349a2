use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("tensor is not antisymmetric at index pair ({mu},{nu})")]
    NotAntisymmetric { mu: usize, nu: usize },

    #[error("matrix does not satisfy LᵀηL = η")]
    NotLorentz,

    #[error("unknown angular scheme `{0}`")]
    UnknownAngularScheme(String),

    #[error("radial node count must be positive")]
    EmptyRadial,

    #[error("invalid radial window: need 0 < k_min < k_max, got ({k_min}, {k_max})")]
    InvalidWindow { k_min: f64, k_max: f64 },

    #[error("invalid angular rule: {0}")]
    InvalidAngularRule(String),

    #[error("angular scheme is not closed under rotation #{0}")]
    RotationNotClosed(usize),

    #[error("width must be positive and finite, got {0}")]
    InvalidWidth(f64),

    #[error("test functions live on different grids")]
    GridMismatch,

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("derived label `{0}` has not been registered")]
    UnregisteredDerived(String),

    #[error("operator word of length {len} exceeds the cap {cap}")]
    WordTooLong { len: usize, cap: usize },

    #[error("test function `{label}` is not real (star deviation {deviation:e})")]
    NotReal { label: String, deviation: f64 },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below floor {floor:e}")]
    NotPositiveSemidefinite { eigenvalue: f64, floor: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
