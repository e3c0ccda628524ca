// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

use clap::Parser;
use tcl_dynamics::cli::{main_with, Args};

fn main() {
    let args = Args::parse();
    if let Ok(v) = std::env::var("TCL_NUM_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: cannot size the thread pool: {e}");
                }
            }
            _ => eprintln!("warning: ignoring TCL_NUM_THREADS={v:?}; expected a positive integer"),
        }
    }
    std::process::exit(main_with(args));
}
