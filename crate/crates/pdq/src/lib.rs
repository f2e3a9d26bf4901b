//! Private database queries over CKKS.

pub mod client;
pub mod column;
pub mod config;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod interp;
pub mod query;
pub mod server;
pub mod session;
pub mod transport;
pub mod wire;

pub use client::{Client, QueryResult};
pub use column::EncryptedColumn;
pub use config::PdqConfig;
pub use engine::Engine;
pub use error::{PdqError, Result};
pub use query::{Aggregator, Answer, CmpOp, Predicate, QuerySpec};
pub use server::{Server, ServerConfig};
pub use session::{run_local, Session};
pub use transport::{connected_pair, Transport, TransportKind};
