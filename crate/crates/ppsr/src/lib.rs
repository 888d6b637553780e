//! Standard-library companion to `ppsr-core`: dataset loaders, file formats,
//! the loopback socket transport, the experiment harness, and the CLI.

pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod model_io;
pub mod transport;
