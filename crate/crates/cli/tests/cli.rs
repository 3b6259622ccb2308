use std::path::{Path, PathBuf};
use std::process::Command as Process;

use fixdual_cli::report::{format_table, sig6, Report};
use fixdual_cli::{
    cmd_scan, cmd_solve, cmd_verify, read_json, Flags, EXIT_EMPTY, EXIT_ERROR, EXIT_OK,
};

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(name)
}

fn flags(file: PathBuf) -> Flags {
    Flags {
        file,
        ..Flags::default()
    }
}

fn capture(
    cmd: fn(&Flags, &mut dyn std::io::Write, &mut dyn std::io::Write) -> anyhow::Result<i32>,
    f: &Flags,
) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = match cmd(f, &mut out, &mut err) {
        Ok(c) => c,
        Err(e) => {
            err.extend(format!("error: {e:#}\n").bytes());
            EXIT_ERROR
        }
    };
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// Platform-stable summary: residual-level columns are left out.
fn golden_text(r: &Report) -> String {
    let v = |xs: &[f64]| xs.iter().map(|x| sig6(*x)).collect::<Vec<_>>().join(" ");
    r.records
        .iter()
        .map(|rec| {
            format!(
                "sigma [{}] x [{}] pi {} pid {} g {} stability {} source {} triality {}\n",
                v(&rec.sigma),
                v(&rec.x),
                sig6(rec.pi),
                sig6(rec.pid),
                rec.g_class,
                rec.stability,
                rec.source,
                rec.triality
            )
        })
        .collect()
}

fn golden(name: &str) {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("out.json");
    let mut f = flags(problem(&format!("{name}.json")));
    f.json = Some(json.clone());
    let (code, stdout, _) = capture(cmd_solve, &f);
    assert_eq!(code, EXIT_OK);

    let report = read_json(&json).unwrap();
    assert_eq!(
        format_table(&report),
        stdout,
        "table rebuilt from JSON differs"
    );

    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(format!("{name}.txt"));
    let got = golden_text(&report);
    if std::env::var_os("FIXDUAL_BLESS").is_some() {
        std::fs::write(&path, &got).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert_eq!(got, want);
}

#[test]
fn golden_example1() {
    golden("example1");
}

#[test]
fn golden_example2() {
    golden("example2");
}

#[test]
fn golden_example3() {
    golden("example3");
}

#[test]
fn json_keeps_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("r.json");
    let mut f = flags(problem("example2.json"));
    f.json = Some(json.clone());
    capture(cmd_solve, &f);
    let report = read_json(&json).unwrap();
    let lp = fixdual_cli::schema::load_problem(&problem("example2.json")).unwrap();
    let direct = fixdual_core::solve(&lp.problem, &fixdual_core::SolveOptions::default()).unwrap();
    for (row, rec) in report.records.iter().zip(&direct.records) {
        assert_eq!(row.pi, rec.pi_value);
        assert_eq!(row.x, rec.x.as_slice());
    }
}

#[test]
fn empty_box_exits_2() {
    let mut f = flags(problem("example2.json"));
    f.dual_box = Some("1:5".into());
    let (code, stdout, stderr) = capture(cmd_solve, &f);
    assert_eq!(code, EXIT_EMPTY);
    assert_eq!(stdout.lines().count(), 1, "header only");
    assert!(stderr.contains("no stationary point"), "{stderr}");
}

fn write_temp(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("p.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn dimension_mismatch_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(problem("example1.json"))
        .unwrap()
        .replace("\"n\": 2", "\"n\": 3");
    let f = flags(write_temp(&dir, &text));
    let (code, _, stderr) = capture(cmd_solve, &f);
    assert_eq!(code, EXIT_ERROR);
    assert!(stderr.contains("f: expected 3 entries"), "{stderr}");
    assert_eq!(capture(cmd_verify, &f).0, EXIT_ERROR);
}

#[test]
fn malformed_json_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let f = flags(write_temp(&dir, "{\n  \"n\": 2,\n  \"f\": [1, 2\n}"));
    let (code, _, stderr) = capture(cmd_solve, &f);
    assert_eq!(code, EXIT_ERROR);
    assert!(stderr.contains("line 4 column"), "{stderr}");
}

fn csv_rows(csv: &str) -> Vec<(f64, Option<f64>)> {
    csv.lines()
        .skip(1)
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            let pid = (cells[2] == "0").then(|| cells[1].parse().unwrap());
            (cells[0].parse().unwrap(), pid)
        })
        .collect()
}

#[test]
fn scan_extrema_bracket_example2_roots() {
    let mut f = flags(problem("example2.json"));
    f.dual_box = Some("-100:5".into());
    f.grid = Some(2001);
    let (code, csv, _) = capture(cmd_scan, &f);
    assert_eq!(code, EXIT_OK);
    assert_eq!(csv.lines().next(), Some("sigma_1,pid,mask"));
    let rows = csv_rows(&csv);
    assert!(rows.len() >= 2001);
    assert!(rows.iter().any(|r| r.1.is_none()), "pole rows are masked");

    let mut brackets = Vec::new();
    for w in rows.windows(3) {
        if let (Some(a), Some(b), Some(c)) = (w[0].1, w[1].1, w[2].1) {
            if (b - a) * (c - b) < 0.0 {
                brackets.push((w[0].0, w[2].0));
            }
        }
    }
    let roots = [-91.0174, -0.955077, 0.969642];
    assert_eq!(brackets.len(), roots.len(), "{brackets:?}");
    for (r, (lo, hi)) in roots.iter().zip(&brackets) {
        assert!(lo < r && r < hi, "{r} not in [{lo}, {hi}]");
    }
}

#[test]
fn scan_two_axes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan.csv");
    let mut f = flags(problem("example1.json"));
    f.out = Some(out.clone());
    f.grid = Some(11);
    let (code, stdout, _) = capture(cmd_scan, &f);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.is_empty());
    let csv = std::fs::read_to_string(out).unwrap();
    assert_eq!(csv.lines().next(), Some("sigma_1,sigma_2,pid,mask"));
    assert_eq!(csv.lines().count(), 1 + 11 * 11);
}

#[test]
fn scan_rejects_three_terms() {
    let dir = tempfile::tempdir().unwrap();
    let term = r#"{"kind": "quartic", "beta": 1, "lambda": 1, "D": [[1]]}"#;
    let text = format!(r#"{{"n": 1, "f": [1], "terms": [{term}, {term}, {term}]}}"#);
    let (code, _, stderr) = capture(cmd_scan, &flags(write_temp(&dir, &text)));
    assert_eq!(code, EXIT_ERROR);
    assert!(stderr.contains("scan supports m ≤ 2"), "{stderr}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fixdual");
    let ok = Process::new(bin)
        .arg("solve")
        .arg(problem("example2.json"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("GlobalStable"));
    let empty = Process::new(bin)
        .args(["solve", "--box", "1:5"])
        .arg(problem("example2.json"))
        .output()
        .unwrap();
    assert_eq!(empty.status.code(), Some(EXIT_EMPTY));
    let missing = Process::new(bin)
        .args(["verify", "no-such-file.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(EXIT_ERROR));
}
