pub mod config;
pub mod error;
pub mod exact;
pub mod nonlinearity;
pub mod poly;
pub mod state;
pub mod sum;
pub mod integrator;
pub mod constructors;
pub mod analysis;
pub mod cli;
