//! Annotation service and command-line front end.
//!
//! [`store::AnnotationStore`] owns a dataset and accepts only writes that keep
//! every annotation and track rule intact; [`server`] exposes it over HTTP
//! through a single writer thread; [`cli`] binds the toolkit's commands.

pub mod cli;
pub mod config;
pub mod error;
pub mod server;
pub mod store;

pub use config::Config;
pub use error::{PutError, ServiceError, ServiceResult};
pub use server::{router, AppState, PutRequest};
pub use store::{AnnotationStore, Snapshot};
