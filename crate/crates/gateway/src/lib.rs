//! Local HTTP service and command-line front end for word communication
//! sessions.

pub mod cli;
pub mod error;
pub mod routes;
pub mod store;

pub use error::ApiError;
pub use routes::router;
pub use store::AppState;
