#![no_std]
#![doc = include_str!("../README.md")]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod decomp;
pub mod error;
pub mod glm;
pub mod imgrecon;
pub mod linalg;
pub mod preproc;
pub mod quality;
pub mod recording;
pub mod rng;
pub mod signal;
pub mod sim;
pub mod stats;
pub mod tensor;
pub mod units;

pub use error::{Error, Result};
pub use recording::{LabeledPoints, PointType, Recording, StimEvent, StimTable};
pub use tensor::{BinOp, CmpOp, Coord, CoordValues, LabeledTensor, Logic, Reduction, Selector};
pub use units::{Quantity, Unit};
