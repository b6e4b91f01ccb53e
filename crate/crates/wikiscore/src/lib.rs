//! The wikiscore HTTP service and the model build pipeline behind the
//! `wikiscore` command.

pub mod api;
pub mod pipeline;
