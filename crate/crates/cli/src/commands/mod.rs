//! Subcommand implementations.

pub mod candidates;
pub mod optimize;
pub mod staircase;
pub mod verify;
