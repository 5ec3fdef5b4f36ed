use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model parameter violates its invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "quadrature did not converge on [{lo}, {hi}]: estimated error {error:e} \
         exceeds tolerance {tolerance:e} after {panels} panels"
    )]
    Quadrature {
        lo: f64,
        hi: f64,
        error: f64,
        tolerance: f64,
        panels: usize,
    },

    #[error("naive radius undefined: noise power is zero")]
    NaiveRadiusUndefined,

    #[error("max-min policy does not exist: {0}")]
    MaxMinUndefined(String),

    /// The requested performance target cannot be met.
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl Error {
    /// True for errors that signal an unattainable model target rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_) | Error::MaxMinUndefined(_))
    }
}
