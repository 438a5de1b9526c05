//! Exact computations for Brauer and Picard groups of ring spectra.

pub mod abelian;
pub mod charp;
pub mod cli;
pub mod cyccoh;
pub mod data;
pub mod error;
pub mod kofam;
pub mod numbrauer;
pub mod sheaftab;
pub mod ssengine;
pub mod tmffam;

pub use abelian::{ExtensionWitness, FgAbGroup, GroupHom};
pub use error::{Error, Result};
