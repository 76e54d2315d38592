pub mod cli;
pub mod coframe;
pub mod congruence;
pub mod error;
pub mod expr;
pub mod frame;
pub mod group;
pub mod jet;
pub mod numeric;
pub mod problem;
pub mod selftest;

pub use error::{Error, Result};
pub use expr::{Expr, Func, VarKind, VarTable};
