//! Coadjoint-orbit toolkit for the diffeomorphism field.
//!
//! Numerical layer: [`circlefield`], [`valgebra`], [`schwarzian`], [`wilson`],
//! [`dynamics`]. Symbolic layer: [`diffpoly`], [`dirac`], [`transverse`].
//! [`acceptance`] bundles the end-to-end checks that the CLI and the
//! integration tests both run.

pub mod acceptance;
pub mod circlefield;
pub mod diffpoly;
pub mod dirac;
pub mod dynamics;
pub mod ode;
pub mod quad;
pub mod schwarzian;
pub mod taylor;
pub mod testfields;
pub mod transverse;
pub mod valgebra;
pub mod wilson;
