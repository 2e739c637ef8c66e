//! Command-line front end and HTTP/JSON service for prefsynth.

pub mod api;
pub mod cli;
pub mod error;
pub mod jobs;
pub mod request;
pub mod scenario;

pub use api::router;
pub use cli::run;
