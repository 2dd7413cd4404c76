//! Light-field EPI rendering and spectral analysis under parallel and tilted
//! image-plane parameterizations.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod io;
pub mod param;
pub mod render;
pub mod scene;
pub mod spectrum;
