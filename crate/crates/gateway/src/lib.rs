//! Service and CLI shell around the huegrip simulation loop.
//!
//! [`server`] runs one live catch loop and exposes it over a WebSocket
//! carrying the JSON messages in [`protocol`]; [`store`] persists sessions
//! as JSON lines; [`cli`] implements the `huegrip` subcommands.

pub mod cli;
pub mod config;
pub mod error;
pub mod protocol;
pub mod server;
pub mod store;

pub use error::{GatewayError, Result};
