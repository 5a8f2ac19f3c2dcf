//! Command-line front end: system files, built-in examples and commands.

pub mod commands;
pub mod examples;
pub mod output;
pub mod sysfile;
pub mod verify;
