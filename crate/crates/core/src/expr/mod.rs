//! Expression parsing and problem-file loading.

mod parser;
mod problem;

pub use parser::{parse_poly, ParseError};
pub use problem::*;
