//! Live demonstration recording over WebSocket.
//!
//! A browser client sends arrow-key state; the server steps the world at a
//! fixed tick with the held keys, records every transition as a
//! demonstration and streams the world back as JSON frames.

pub mod protocol;
mod server;
pub mod session;

pub use protocol::{ClientMessage, ControlCmd, StateFrame};
pub use server::{serve_blocking, DemoServer, ServeConfig, ServeError, ServeSummary, DEFAULT_ADDR, DEFAULT_TICK_RATE};
pub use session::Session;
