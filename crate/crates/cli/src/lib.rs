//! Library surface of the harness: config parsing, file loading, the pricing
//! pipeline, and the sweep driver. The `auction` binary is a thin wrapper
//! over these, and the fuzz targets drive the parsers directly.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod sweep;
