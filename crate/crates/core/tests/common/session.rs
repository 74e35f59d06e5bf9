//! Replays the golden CLI session against the built binary.

use std::path::Path;
use std::process::Command;

pub const SESSION: &str = include_str!("../golden/session.txt");
pub const GOLDEN_STDOUT: &str = include_str!("../golden/session.stdout");
pub const GOLDEN_SNAPSHOT: &str = include_str!("../golden/session.json");

pub struct SessionRun {
    pub stdout: String,
    pub snapshot: String,
    /// (line, expected, actual) for every mismatched exit code.
    pub exit_mismatches: Vec<(String, i32, i32)>,
    pub commands: usize,
}

pub fn session_lines() -> Vec<(i32, Vec<String>)> {
    SESSION
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut words = l.split_whitespace();
            let code = words.next().unwrap().parse().unwrap();
            (code, words.map(str::to_owned).collect())
        })
        .collect()
}

pub fn run_session(bin: &Path, dir: &Path) -> SessionRun {
    let state = dir.join("state.json");
    let mut stdout = String::new();
    let mut exit_mismatches = Vec::new();
    let lines = session_lines();
    for (expected, args) in &lines {
        let out = Command::new(bin).args(args).arg("--state").arg(&state).output().unwrap();
        stdout.push_str(&String::from_utf8(out.stdout).unwrap());
        let code = out.status.code().unwrap_or(-1);
        if code != *expected {
            exit_mismatches.push((args.join(" "), *expected, code));
        }
    }
    SessionRun { stdout, snapshot: std::fs::read_to_string(&state).unwrap(), exit_mismatches, commands: lines.len() }
}
