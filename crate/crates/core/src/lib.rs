//! Self-stabilizing total-order uniform reliable broadcast, simulated.

pub mod checker;
pub mod consensus;
pub mod detector;
pub mod fifo_urb;
pub mod node;
pub mod sim;
pub mod smr;
pub mod to_urb;
pub mod types;
pub mod report;
pub mod sweep;
