#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn sfmreg() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sfmreg"));
    c.env_remove("SFMREG_SEED");
    c
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    sfmreg().current_dir(dir).args(args).output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[track_caller]
pub fn ok(o: &Output) {
    assert_eq!(code(o), 0, "stderr: {}", stderr(o));
}

/// Every file under `root` with its bytes, sorted by relative path.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out
}

/// A small scene and a dataset built from it: `scene/` and `ds/` in `dir`.
pub fn small_dataset(dir: &Path, mode: &str) {
    ok(&run(dir, &["synth", "scene", "--points", "2000", "--images", "40", "--seed", "3"]));
    ok(&run(
        dir,
        &["gen-dataset", "scene", "ds", "--mode", mode, "--n-low", "10", "--n-high", "20", "--random-partials", "4", "--random-target-images", "12", "--seed", "3"],
    ));
}
