//! Fixed-point thresholding for elliptic optimal control problems under
//! `0 <= f <= 1`, `mean(f) = V0` constraints, and interior Steklov estimates of the
//! stability of the sets it converges to.

pub mod bathtub;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod objectives;
pub mod pde;
pub mod stability;
pub mod threshold_loop;

pub use error::{Error, Result};
