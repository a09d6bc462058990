use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::Command;

use neurodb::{Database, Error};
use neurodb_cli::{import_csv, repl, run_script, SessionConfig};

fn scripts() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scripts")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neurodb"))
}

fn session(input: &str, config: &SessionConfig) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = repl(config, &mut Cursor::new(input.as_bytes()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const TINY_NET: &str = "Create NEUNET (Name) instance XOR-Net(\"x\");
Add type BPN to XOR-Net;
InitializeNeuralNet(XOR-Net);
LayerSize(XOR-Net, Input, 2);
LayerSize(XOR-Net, Hidden, 1);
LayerSize(XOR-Net, Output, 1);
Create type testdata (x Real, y Real, z Real);
Create testdata (x, y, z) instance (0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0);
Set InputData(XOR-Net) = select x, y from testdata;
";

#[test]
fn repl_prints_output_rows() {
    let input = format!("{TINY_NET}Select OutputData(XOR-Net);\n");
    let (code, out, err) = session(&input, &SessionConfig::default());
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.matches("0.5").count(), 4, "{out}");
}

#[test]
fn repl_survives_errors_and_blank_lines() {
    let (code, out, err) = session("bogus;\n\n\nSelect 1 + 2;\n", &SessionConfig::default());
    assert_eq!(code, 0);
    assert!(err.contains("syntax error at line 1"), "{err}");
    assert!(out.contains("neurodb> 3\n"), "{out}");
    assert_eq!(out.matches("neurodb> ").count(), 5);
}

#[test]
fn repl_joins_lines_until_semicolon() {
    let (code, out, err) = session("Select\n  1 +\n  2\n;\n", &SessionConfig::default());
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.matches("...> ").count(), 3);
    assert!(out.contains("3\n"), "{out}");
}

#[test]
fn repl_reports_runtime_error_line() {
    let (_, _, err) = session("Select 1;\nSet Name(Nobody) = \"x\";\n", &SessionConfig::default());
    assert!(err.contains("line 2") && err.contains("Nobody"), "{err}");
}

#[test]
fn bundled_script_runs() {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_script(&scripts().join("xor.osql"), &SessionConfig::default(), &mut out, &mut err);
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    let out = String::from_utf8(out).unwrap();
    assert!(out.contains("epoch 100 mse "), "{out}");
    assert!(out.contains("final mse 0.2291354051590378"), "{out}");
    assert_eq!(out.lines().last().unwrap().trim(), "0.15755750150387865");
}

#[test]
fn script_error_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.osql");
    let src =
        "-- header\n\nCreate type T (x Real);\n\nCreate T (x) instance a(1);\n\nSet x(a) = \"text\";\nSelect 1;\n";
    std::fs::write(&path, src).unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_script(&path, &SessionConfig { exit_on_error: true, ..Default::default() }, &mut out, &mut err);
    let err = String::from_utf8(err).unwrap();
    assert_eq!(code, 1);
    assert!(err.contains("line 7") && err.contains("type mismatch"), "{err}");
    assert!(!String::from_utf8(out).unwrap().contains('1'));
}

#[test]
fn missing_script_is_an_io_error() {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_script(Path::new("/no/such/script.osql"), &SessionConfig::default(), &mut out, &mut err);
    assert_eq!(code, 1);
    assert!(String::from_utf8(err).unwrap().contains("i/o error"));
}

#[test]
fn csv_import() {
    let mut db = Database::new();
    db.exec("Create type testdata (x Real, y Real, z Real);").unwrap();
    assert_eq!(import_csv(&mut db, &scripts().join("xor.csv"), "testdata").unwrap(), 4);
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "x,y,z\n").unwrap();
    assert_eq!(import_csv(&mut db, &empty, "testdata").unwrap(), 0);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y,z\n1,1,0\n1,0,1\n0,one,1\n").unwrap();
    assert!(matches!(import_csv(&mut db, &bad, "testdata"), Err(Error::CsvParse { row: 3, .. })));
    assert_eq!(db.instances_of("testdata").unwrap().len(), 4);
}

#[test]
fn exit_codes() {
    assert_eq!(bin().arg("--no-such-flag").output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["--mode", "sideways", "--eval", "Select 1;"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    let ok = bin().args(["--eval", "Select 2 * 3;"]).output().unwrap();
    assert_eq!((ok.status.code(), String::from_utf8(ok.stdout).unwrap()), (Some(0), "6\n".to_string()));
    assert_eq!(bin().args(["--eval", "Select Nope;"]).output().unwrap().status.code(), Some(1));
}

#[test]
fn db_file_persists_between_runs() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("xor.ndb");
    let script = scripts().join("xor_short.osql");
    let run =
        bin().arg("--db").arg(&db).arg("--script").arg(&script).args(["--report-interval", "1000"]).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert_eq!(stdout.matches("epoch ").count(), 3, "{stdout}");
    let first = std::fs::read(&db).unwrap();
    let again = bin().arg("--db").arg(&db).args(["--eval", "Select OutputData(XOR-Net);"]).output().unwrap();
    assert_eq!(again.status.code(), Some(0));
    assert!(stdout.ends_with(&String::from_utf8(again.stdout).unwrap()));
    assert_eq!(std::fs::read(&db).unwrap(), first);
}

#[test]
fn script_mode_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let script = scripts().join("xor_short.osql");
    let mut results = Vec::new();
    for i in 0..2 {
        let db = dir.path().join(format!("run{i}.ndb"));
        let run =
            bin().arg("--db").arg(&db).arg("--script").arg(&script).args(["--mode", "textbook"]).output().unwrap();
        assert_eq!(run.status.code(), Some(0));
        results.push((run.stdout, std::fs::read(&db).unwrap()));
    }
    assert_eq!(results[0], results[1]);
}
