// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite for `flsa-core`. Run it with
//! `cargo test -p flsa-validation --test acceptance`; it prints one verdict
//! per criterion and fails if any criterion fails.

#![forbid(unsafe_code)]
