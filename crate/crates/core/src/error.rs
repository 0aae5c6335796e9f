use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid tolerance: {0}")]
    Tolerance(String),
    #[error("matrix is not hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("inconsistent linear system (residual {0:.3e})")]
    Inconsistent(f64),
    #[error("underdetermined linear system (solution space of dimension {0})")]
    Underdetermined(usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("element is not in the commutant (residual {0:.3e})")]
    NotInCommutant(f64),
    #[error("element is not in the required space (residual {0:.3e})")]
    NotInSpace(f64),
    #[error("state is not faithful: {0}")]
    NonFaithful(String),
    #[error("not a conditional expectation: {0}")]
    NotConditionalExpectation(String),
    #[error("modular compatibility fails (residual {0:.3e})")]
    NotCompatible(f64),
    #[error("axiom violated: {0}")]
    Axiom(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("operator tensor case violated: {0}")]
    CaseViolated(String),
    #[error("operators do not commute (residual {0:.3e})")]
    NonCommuting(f64),
    #[error("not a C*-algebra over the base: {0}")]
    NotBAlgebra(String),
    #[error("not a morphism: {0}")]
    NotMorphism(String),
    #[error("not completely positive (Choi eigenvalue {0:.3e})")]
    NotCp(f64),
    #[error("map is not spatially implemented: {0}")]
    NotSpatiallyImplemented(String),
    #[error("empty fiber over base point {0}")]
    EmptyFiber(usize),
    #[error("closure did not stabilize after {0} rounds")]
    NoFixpoint(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
