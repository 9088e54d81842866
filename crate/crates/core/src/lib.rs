pub mod cloud;
pub mod compress;
pub mod error;
pub mod evaluate;
pub mod features;
pub mod hag;
pub mod index;
pub mod io;
pub mod learn;
pub mod merge;
pub mod partition;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tin;
pub mod voxel;

pub use cloud::{Bounds2, ClassLabel, LabeledCloud, Point3};
pub use error::{Error, Result};
