//! HTTP service and command-line front end for `sketchedit-core`.

pub mod api;
pub mod cli;
pub mod clients;
pub mod config;
