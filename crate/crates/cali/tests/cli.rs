use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cali(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cali")).args(args).output().expect("spawn cali")
}

fn ok(args: &[&str]) -> String {
    let out = cali(args);
    assert!(
        out.status.success(),
        "cali {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `dir` by relative path. The `out=` line of resolved.cfg
/// names the directory itself and is dropped.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let mut bytes = std::fs::read(&path).unwrap();
            if path.file_name().unwrap() == "resolved.cfg" {
                let text = String::from_utf8(bytes).unwrap();
                bytes = text
                    .lines()
                    .filter(|l| !l.starts_with("out="))
                    .map(|l| format!("{l}\n"))
                    .collect::<String>()
                    .into_bytes();
            }
            files.insert(path.strip_prefix(dir).unwrap().to_path_buf(), bytes);
        }
    }
    files
}

struct Fixture {
    root: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let f = Self { root: tempfile::tempdir().unwrap() };
        ok(&["gen-data", "--out", s(&f.p("src")), "--n", "12", "--hw", "16", "--seed", "1"]);
        ok(&[
            "gen-data", "--out", s(&f.p("tgt")), "--n", "12", "--hw", "16", "--seed", "2", "--domain", "target",
            "--shift", "std:1",
        ]);
        f
    }

    fn p(&self, name: &str) -> PathBuf {
        self.root.path().join(name)
    }

    fn train(&self, out: &str) -> PathBuf {
        let dir = self.p(out);
        ok(&[
            "train", "--src", s(&self.p("src")), "--tgt", s(&self.p("tgt")), "--out", s(&dir), "--m", "30",
            "--interval", "10", "--eval_every", "10", "--holdout", "2", "--seed", "3",
        ]);
        dir
    }
}

/// Runs `args` twice into fresh directories and requires identical outputs.
fn twice(f: &Fixture, tag: &str, args: &[&str]) -> BTreeMap<PathBuf, Vec<u8>> {
    let a = f.p(&format!("{tag}_a"));
    let b = f.p(&format!("{tag}_b"));
    for dir in [&a, &b] {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", s(dir)]);
        ok(&full);
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert!(!sa.is_empty());
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>(), "{tag}: file sets differ");
    for (k, v) in &sa {
        assert!(v == &sb[k], "{tag}: {} differs between runs", k.display());
    }
    sa
}

#[test]
fn every_command_is_byte_reproducible() {
    let f = Fixture::new();
    let before = (snapshot(&f.p("src")), snapshot(&f.p("tgt")));

    let gen = twice(&f, "gen", &["gen-data", "--n", "4", "--hw", "16", "--shift", "hue:0.5,noise:0.05", "--seed", "9"]);
    assert!(gen.contains_key(Path::new("manifest.txt")));

    let trained = twice(
        &f,
        "train",
        &[
            "train", "--src", s(&f.p("src")), "--tgt", s(&f.p("tgt")), "--m", "20", "--interval", "5",
            "--eval_every", "10", "--holdout", "2", "--seed", "4",
        ],
    );
    assert!(trained.contains_key(Path::new("checkpoint.ctp")));
    let curves = String::from_utf8(trained[Path::new("curves.csv")].clone()).unwrap();
    assert_eq!(curves.lines().count(), 21);

    let ckpt = f.train("model");
    let ckpt_file = ckpt.join("checkpoint.ctp");
    twice(&f, "eval", &["eval", "--ckpt", s(&ckpt_file), "--data", s(&f.p("tgt"))]);
    twice(
        &f,
        "div",
        &["divergence", "--src", s(&f.p("src")), "--tgt", s(&f.p("tgt")), "--epochs", "20", "--seed", "1"],
    );
    twice(
        &f,
        "divckpt",
        &[
            "divergence", "--src", s(&f.p("src")), "--tgt", s(&f.p("tgt")), "--epochs", "20", "--ckpt",
            s(&ckpt_file),
        ],
    );
    twice(&f, "divo", &["divergence", "--src", s(&f.p("src")), "--tgt", s(&f.p("tgt")), "--mode", "oracle"]);
    let sample = f.p("src").join("sample_00000.ctp");
    let planned = twice(&f, "plan", &["plan", "--seg", s(&sample)]);
    let plan_csv = String::from_utf8(planned[Path::new("plan.csv")].clone()).unwrap();
    assert_eq!(plan_csv.lines().next().unwrap(), "index,v,omega,collision,target,total,selected");
    assert_eq!(plan_csv.lines().filter(|l| l.ends_with(",1")).count(), 1);
    twice(&f, "nav", &["navigate", "--max_steps", "40"]);
    twice(&f, "navl", &["navigate", "--max_steps", "5", "--mode", "learned", "--ckpt", s(&ckpt_file)]);

    assert_eq!((snapshot(&f.p("src")), snapshot(&f.p("tgt"))), before, "inputs were modified");
}

#[test]
fn resolved_config_reproduces_the_run() {
    let f = Fixture::new();
    let first = f.train("first");
    let second = f.p("second");
    let cfg = first.join("resolved.cfg");
    let text = std::fs::read_to_string(&cfg).unwrap();
    assert!(text.contains("lr_class="), "preset rates are recorded:\n{text}");
    ok(&["train", "--config", s(&cfg), "--out", s(&second)]);
    assert_eq!(snapshot(&first), snapshot(&second));
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let f = Fixture::new();
    let cfg = f.p("gen.cfg");
    std::fs::write(&cfg, "# test\nn = 3\nhw=24\n").unwrap();
    ok(&["gen-data", "--config", s(&cfg), "--n", "2", "--out", s(&f.p("g"))]);
    let manifest = std::fs::read_to_string(f.p("g").join("manifest.txt")).unwrap();
    assert!(manifest.contains("n=2\n"), "{manifest}");
    assert!(manifest.contains("H=24\n"), "{manifest}");
}

#[test]
fn usage_errors_exit_with_1() {
    let f = Fixture::new();
    let cfg = f.p("bad.cfg");
    std::fs::write(&cfg, "bogus=1\n").unwrap();
    for args in [
        vec!["gen-data", "--out", s(&f.p("x")), "--bogus", "1"],
        vec!["gen-data", "--config", s(&cfg), "--out", s(&f.p("x"))],
        vec!["gen-data", "--out", s(&f.p("x")), "--n", "many"],
        vec!["train", "--src", s(&f.p("src")), "--out", s(&f.p("x"))],
        vec!["train", "--src", s(&f.p("src")), "--tgt", s(&f.p("tgt")), "--out", s(&f.p("x")), "--baseline", "XX"],
        vec!["nosuch"],
    ] {
        let out = cali(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn corrupted_checkpoint_exits_with_2() {
    let f = Fixture::new();
    let dir = f.train("model");
    let path = dir.join("checkpoint.ctp");
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    let bad = f.p("bad.ctp");
    std::fs::write(&bad, &bytes).unwrap();
    let out = cali(&["eval", "--ckpt", s(&bad), "--data", s(&f.p("tgt")), "--out", s(&f.p("e"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error:"), "{err}");

    let out = cali(&["eval", "--ckpt", s(&f.p("missing.ctp")), "--data", s(&f.p("tgt")), "--out", s(&f.p("e"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_cleanly() {
    let out = cali(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["gen-data", "train", "eval", "divergence", "plan", "navigate"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}
