pub mod backend;
pub mod bench;
pub mod cli;
pub mod formula;
pub mod generation;
pub mod jsonx;
pub mod metrics;
pub mod planner;
pub mod state_machine;
pub mod verifier;
