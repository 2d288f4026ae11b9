pub mod analysis;
pub mod bracket;
pub mod classical;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod gabor;
pub mod group;
pub mod rep;
