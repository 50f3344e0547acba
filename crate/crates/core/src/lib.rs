pub mod acceptance;
pub mod correspondence;
pub mod deriv;
pub mod error;
pub mod flow;
pub mod gk;
pub mod grid;
pub mod group;
pub mod interp;
pub mod io;
pub mod star;
pub mod wigner;

pub use error::{CalculusError, Result};
pub use grid::{make_grid, BetaSymbol, GeometricGrid, PhaseSymbol, Signal, TimeGrid};
