//! Random block tridiagonal beta ensembles.
//!
//! The crate samples the block Hermite and block Laguerre families
//! `H_{β,n}(r,s)` and `W_{β,n,m}(r,s)`, checks the determinantal identities
//! behind their eigenvalue densities in exact rational arithmetic, runs the
//! Monte-Carlo and MCMC validations of the densities and moment formulas,
//! and simulates the soft and hard edge limits.
//!
//! Layout:
//! - [`randcore`]: Gaussian, chi, GFE, Haar and square-root Wishart draws.
//! - [`ensembles`]: block matrix models and block Householder reduction.
//! - [`spectra`]: eigen-decomposition, spectral measures, the spectral identity.
//! - [`vdm`]: exact Vandermonde/Cauchy/Pfaffian/Hafnian engine.
//! - [`densities`]: density evaluators, constants, moments, MCMC, energy test.
//! - [`edgelimits`]: edge rescalings, Riccati diffusions, random operators.
//! - [`io`]: JSON fixtures and run headers.

pub mod densities;
pub mod edgelimits;
pub mod ensembles;
pub mod error;
pub mod io;
pub mod linalg;
pub mod randcore;
pub mod scalar;
pub mod spectra;
pub mod vdm;

pub use error::{Error, Result};
pub use scalar::{CMat, Cplx, ExactScalar, Real, Scalar};
