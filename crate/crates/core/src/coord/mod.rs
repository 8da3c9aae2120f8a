//! The three servers workers communicate through: policy parameters, model
//! parameters, and the trajectory queue.

mod blob;
mod data_server;
mod message;
mod param_server;

pub use blob::ParamBlob;
pub use data_server::DataBufferServer;
pub use message::{Message, MessageKind, HEADER_LEN};
pub use param_server::{ParamServer, Version};
