//! Live transport for HepRep sessions: newline-delimited JSON frames over
//! TCP, and the same frames as WebSocket text messages.
//!
//! ```text
//! -> {"id": 1, "method": "heprep.getInstances", "params": {"typeNames": ["Track"]}}
//! <- {"id": 1, "result": {"name": "Event", ...}}
//! <- {"id": 2, "error": {"code": 3, "message": "unknown parameter `foo`"}}
//! ```

pub mod builder;
pub mod client;
pub mod json;
pub mod protocol;
pub mod server;

pub use builder::{json_builder, JsonBuilder};
pub use client::{Client, ClientError};
pub use protocol::{Dispatcher, ErrorCode, WireError, PROTOCOL_VERSION};
pub use server::{serve, serve_on, ServerHandle, DEFAULT_PORT, WS_PATH};
