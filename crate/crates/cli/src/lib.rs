// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end of `flsa-core`: input parsing, JSON documents and
//! the `flsa` subcommands.

#![forbid(unsafe_code)]

pub mod app;
pub mod commands;
pub mod document;
pub mod error;
pub mod input;
