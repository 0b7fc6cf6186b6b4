pub mod analysis;
pub mod atom;
pub mod detection;
pub mod dynamics;
pub mod error;
pub mod ions;
pub mod ode;
pub mod optimize;
pub mod pulse;
pub mod scan;

pub use error::{StirapError, StirapResult};
