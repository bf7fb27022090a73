#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use lattice_reliability::state::Lattice;

/// Runs the `latrel` binary with `args`.
pub fn latrel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latrel"))
        .args(args)
        .output()
        .expect("spawn latrel")
}

pub fn latrel_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    let out = dir.to_str().expect("utf-8 temp path");
    all.extend(["--out", out]);
    latrel(&all)
}

/// Checks that `cells` are pairwise disjoint and cover exactly `2^n` states.
pub fn tiles_space(cells: &[&Lattice], n: usize) -> Result<(), String> {
    let total: u128 = cells.iter().map(|c| c.size()).sum();
    if total != 1u128 << n {
        return Err(format!(
            "cells hold {total} states, space has {}",
            1u128 << n
        ));
    }
    disjoint(cells)
}

/// Checks that `cells` are pairwise disjoint subsets of `whole` covering it.
pub fn tiles(cells: &[&Lattice], whole: &Lattice) -> Result<(), String> {
    for c in cells {
        if !(whole.contains(c.lower()) && whole.contains(c.upper())) {
            return Err(format!("{c} leaves {whole}"));
        }
    }
    let total: u128 = cells.iter().map(|c| c.size()).sum();
    if total != whole.size() {
        return Err(format!(
            "cells hold {total} states, {whole} has {}",
            whole.size()
        ));
    }
    disjoint(cells)
}

fn disjoint(cells: &[&Lattice]) -> Result<(), String> {
    for (i, a) in cells.iter().enumerate() {
        for b in &cells[i + 1..] {
            if a.intersects(b) {
                return Err(format!("{a} and {b} overlap"));
            }
        }
    }
    Ok(())
}
