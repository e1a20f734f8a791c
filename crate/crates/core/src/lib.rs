//! Smearing probabilities and the smearing attack on Decision-PLWE.
//!
//! A set of samples from `P_q = Z_q[x]/(f(x))` *smears* under evaluation at a
//! root `gamma` of `f` when its images cover all of `Z_q`. For uniform samples
//! this is the coupon collector's problem; for PLWE samples at the right guess
//! of `s(gamma)` the images follow the mapped error distribution, which smears
//! strictly less often. The crate computes these probabilities exactly,
//! approximately and by simulation, and runs the resulting distinguisher.
//!
//! Modules:
//! * [`ring`]: `Z_q` and `P_q` arithmetic, the evaluation map, roots and orders.
//! * [`dist`]: distributions over `Z_q`, the discrete Gaussian, the mapped
//!   error distribution and seeded sampling.
//! * [`smear`]: smearing probability engines and parameter selection.
//! * [`attack`]: sample generators, the smearing decision and attack.

pub mod attack;
pub mod dist;
pub mod error;
pub mod ring;
pub mod smear;

pub use error::{Error, Result};
