pub mod app;
pub mod binary;
pub mod bootstrap;
pub mod error;
pub mod gqr;
pub mod ingest;
pub mod linalg;
pub mod lp;
pub mod qr;
pub mod rng;
pub mod stats;
pub mod svar;
pub mod svg;
pub mod timeseries;

pub use error::{Error, Result};
