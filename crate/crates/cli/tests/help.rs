//! `--help` output for the root command and every subcommand, compared
//! against files in `tests/golden`. Set `ALPHALAW_UPDATE_GOLDEN=1` to
//! rewrite them.

use std::path::PathBuf;
use std::process::Command;

const SUBCOMMANDS: [&str; 13] = [
    "simulate",
    "estimate",
    "per-problem",
    "sweep-evidence",
    "ablate-noise",
    "ablate-k",
    "multistep",
    "identifiability",
    "calibrate",
    "filter",
    "synth",
    "collect",
    "report",
];

fn help(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_alphalaw"))
        .args(args)
        .arg("--help")
        .env("COLUMNS", "100")
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", out.status);
    String::from_utf8(out.stdout).unwrap()
}

fn compare(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.txt"));
    if std::env::var_os("ALPHALAW_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; run with ALPHALAW_UPDATE_GOLDEN=1", path.display()));
    assert_eq!(actual, expected, "help for {name} changed");
}

#[test]
fn root_help() {
    compare("root", &help(&[]));
}

#[test]
fn subcommand_help() {
    for sub in SUBCOMMANDS {
        compare(sub, &help(&[sub]));
    }
}

#[test]
fn every_subcommand_is_listed() {
    let root = help(&[]);
    for sub in SUBCOMMANDS {
        assert!(
            root.contains(&format!("  {sub} ")),
            "{sub} missing from root help"
        );
    }
}
