pub mod broken;
pub mod consistency;
pub mod error;
pub mod geometry;
pub mod json;
pub mod lattice;
pub mod linalg;
pub mod polyhedral;
pub mod render;
pub mod ring;
pub mod tropical;
pub mod walls;

pub use error::{Error, Result};
