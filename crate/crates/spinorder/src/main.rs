// Copyright 2026 spinorder Contributors
// SPDX-License-Identifier: Apache-2.0

//! Binary entry point; all logic lives in the library's `cli` module.

fn main() {
    std::process::exit(spinorder::cli::run());
}
