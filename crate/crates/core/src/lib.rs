//! Pure-exchange economies on the open price simplex.
//!
//! * [`geometry`]: price frames, the chart, tangent vectors
//! * [`cobb_douglas`]: consumers with rescaled Cobb–Douglas excess demand
//! * [`smd`]: decomposing a tangent field over a canonical consumer family
//!   and realizing it as an economy
//! * [`equilibrium`]: multistart Newton solver, regularity, index, multiplicity
//! * [`genericity`]: perturbation experiments
//! * [`revealed_preference`]: SARP on finite datasets
//! * [`io`], [`cli`]: file formats and the `walras` binary

// `!(x > 0.0)` deliberately rejects NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod cobb_douglas;
pub mod equilibrium;
pub mod error;
pub mod field;
pub mod genericity;
pub mod geometry;
pub mod io;
pub mod revealed_preference;
pub mod scale;
pub mod smd;

pub use cobb_douglas::{Consumer, Economy};
pub use equilibrium::{find_equilibria, EquilibriumReport, SolverConfig};
pub use error::{Error, Result};
pub use field::{ChartField, ExcessDemand};
pub use geometry::{ChartPoint, PricePoint, TangentVector};
pub use scale::ScaleFn;
