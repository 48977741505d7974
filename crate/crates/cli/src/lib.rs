//! Library side of the `natcon` command: tensor file I/O, reports and the
//! verification suite.

pub mod commands;
pub mod error;
pub mod tensor_file;
pub mod verify;

pub use error::{exit, CliError, Result};
pub use tensor_file::TensorFile;
