//! Helpers for driving the `xraycnn` binary.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use xraycnn_core::synthetic;

pub fn xraycnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xraycnn"))
        .args(args)
        .env_remove("XRAYCNN_SEED")
        .output()
        .expect("spawn xraycnn")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Runs and asserts success, returning stdout.
pub fn ok(args: &[&str]) -> String {
    let o = xraycnn(args);
    assert!(o.status.success(), "xraycnn {args:?} failed: {}", stderr(&o));
    stdout(&o)
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Raw `covid/` + `normal/` tree of synthetic edge-density images.
pub fn raw_edge_density(root: &Path, per_class: usize, side: usize, seed: u64) {
    let images = synthetic::labeled_images(per_class, side, seed, synthetic::edge_density_image);
    synthetic::write_image_dir(root, &images).unwrap();
}

/// Tiny-network training flags.
pub const TINY: [&str; 4] = ["--kernels", "8,16", "--dense", "32,16,8"];
