pub mod boolcirc;
pub mod crypto;
pub mod error;
pub mod fixedpoint;
pub mod gc;
pub mod payload;
pub mod plaintext;
pub mod scanpath;
pub mod server;
pub mod session;
pub mod transport;

pub use error::{Error, Result};
