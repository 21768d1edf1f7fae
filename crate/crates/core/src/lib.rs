pub mod numeric;
pub mod rng;
pub mod schedules;
pub mod network;
pub mod problems;
pub mod engine;
pub mod privacy;
pub mod harness;
