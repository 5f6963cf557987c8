pub mod asymptotics;
pub mod design;
pub mod error;
pub mod numerics;
pub mod scores;
pub mod screening;
pub mod senscore;
pub mod sim;

pub use error::{Error, Result};
pub use scores::{PairDiffs, ScoreSpec, ScoreVector};
