//! Marked length spectrum of periodic orbits: the length functional, its
//! critical points, their classification and period-bounded enumeration.

mod enumerate;
mod functional;
mod solve;
mod word;

pub use enumerate::*;
pub use functional::*;
pub use solve::*;
pub use word::*;
