//! Layers, optimizer and learning-rate schedule.

mod layers;
mod optim;
mod schedule;

pub use layers::{Ffnn, Linear};
pub use optim::AdamState;
pub use schedule::LinearSchedule;
