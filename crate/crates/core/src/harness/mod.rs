//! Instance generation, experiment drivers and the verification suite.

pub mod gen;
pub mod report;
pub mod scaling;
pub mod verify;
