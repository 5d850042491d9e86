#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_memefuse"))
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl From<Output> for Run {
    fn from(o: Output) -> Self {
        Self {
            code: o.status.code().unwrap_or(-1),
            stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
            stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
        }
    }
}

pub fn memefuse(args: &[&str]) -> Run {
    memefuse_env(args, &[])
}

pub fn memefuse_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn memefuse").into()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Writes a run config into `dir/name` and returns its path.
pub fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

/// `key=value` lookup in report output.
pub fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| *k == key)
        .map(|(_, v)| v.to_string())
        .unwrap_or_else(|| panic!("no {key} in report:\n{report}"))
}

pub fn field_f64(report: &str, key: &str) -> f64 {
    field(report, key).parse().unwrap()
}

/// Config for a small synthetic dataset in `data` and outputs in `out`.
/// `extra_train` lines are appended to `[train]`; a `learning_rate` there
/// replaces the default of 1e-3.
pub fn small_config(mode: &str, n: usize, dims: usize, seed: u64, extra_train: &str) -> String {
    let lr = if extra_train.contains("learning_rate") {
        ""
    } else {
        "learning_rate = 1e-3"
    };
    format!(
        r#"[dataset]
dir = "data"

[fusion]
mode = "{mode}"
bilinear_dim = 8

[train]
{lr}
hidden = [16]
max_epochs = 5
patience = 5
{extra_train}

[output]
dir = "out"

[synth]
n = {n}
seed = {seed}
d_m = {dims}
d_h = {dims}
"#
    )
}
