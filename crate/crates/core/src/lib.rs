pub mod basis;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod ode;
pub mod par;
pub mod pipeline;
pub mod polyalg;
pub mod sdpsolve;
pub mod soscompile;
pub mod verify;

pub use error::{Error, Result};
