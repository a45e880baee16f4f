//! Single-source shallow adapters.

mod jdot;
mod otda;
mod tca;

pub use jdot::{jdot_cost, jdot_fit, JdotConfig, JdotFit};
pub(crate) use jdot::alternate;
pub use otda::{otda_adapt, otda_adapt_with_plan};
pub use tca::{tca_fit, TcaModel};
