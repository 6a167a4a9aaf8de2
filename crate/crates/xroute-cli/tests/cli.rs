use std::path::Path;
use std::process::{Command, Output};

fn xroute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xroute")).args(args).output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn scratch(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("xroute-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn files(d: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![d.to_path_buf()];
    while let Some(p) = stack.pop() {
        for e in std::fs::read_dir(&p).unwrap() {
            let e = e.unwrap().path();
            if e.is_dir() {
                stack.push(e);
            } else {
                out.push((e.strip_prefix(d).unwrap().display().to_string(), std::fs::read(&e).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn bad_input_exits_with_two() {
    let o = xroute(&["bench", "--profile", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    let o = xroute(&["route", "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("no_such_key"));
    let o = xroute(&["route", "--set", "n"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_prints_an_edge_list() {
    let o = xroute(&["gen", "--set", "n=16", "--seed", "3"]);
    assert!(o.status.success());
    let out = text(&o.stdout);
    assert!(out.lines().count() > 16);
    assert_eq!(out, text(&xroute(&["gen", "--set", "n=16", "--seed", "3"]).stdout));
}

#[test]
fn decompose_validates() {
    let d = scratch("decompose");
    let o = xroute(&["decompose", "--set", "n=48", "--out", d.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    assert!(!text(&o.stderr).contains("violation"));
    assert!(d.join("hierarchy.txt").is_file());
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn route_and_sort_pass() {
    for cmd in ["route", "sort", "equiv"] {
        let o = xroute(&[cmd, "--set", "n=32"]);
        assert!(o.status.success(), "{cmd}: {}", text(&o.stderr));
    }
}

#[test]
fn round_cap_prints_partial_phases() {
    let o = xroute(&["route", "--set", "n=32", "--set", "round_cap=10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stdout).contains("preprocess"), "{}", text(&o.stdout));
}

#[test]
fn smoke_bench_is_reproducible() {
    let (a, b) = (scratch("bench-a"), scratch("bench-b"));
    for d in [&a, &b] {
        let o = xroute(&["bench", "--profile", "smoke", "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", text(&o.stderr));
    }
    let (fa, fb) = (files(&a), files(&b));
    assert!(!fa.is_empty());
    assert_eq!(fa, fb);
    let _ = std::fs::remove_dir_all(&a);
    let _ = std::fs::remove_dir_all(&b);
}
