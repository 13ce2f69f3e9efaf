use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    root.join(name).display().to_string()
}

fn llabench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_llabench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn table_on_checkins() {
    let data = fixture("checkins_sample.txt");
    let o = llabench(&[
        "table",
        "--dataset",
        &data,
        "--value-col",
        "2",
        "--ts-col",
        "1",
        "--k",
        "8",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("structure,dataset,train,test,amortized_cost"));
    let names: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(names, ["pma", "apma", "learned-pma", "learned-apma"]);
    assert!(lines[1].starts_with("pma,checkins_sample,256,256,"));
}

#[test]
fn single_structure_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = llabench(&[
        "--structure",
        "learned-pma",
        "--out",
        out.to_str().unwrap(),
        "scaling",
        "--dataset",
        &fixture("edges_sample.txt"),
        "--value-col",
        "1",
        "--ts-col",
        "2",
        "--integer",
        "--k-min",
        "4",
        "--k-max",
        "6",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    let tests: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap())
        .collect();
    assert_eq!(tests, ["16", "32", "64"]);
}

#[test]
fn synth_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = llabench(&[
            "synth",
            "--kind",
            "noisy-eta",
            "--n",
            "1024",
            "--eta",
            "16",
            "--seed",
            "3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn perfect_predictions_from_the_command_line() {
    let o = llabench(&[
        "--structure",
        "learned-pma",
        "synth",
        "--kind",
        "noisy-eta",
        "--eta",
        "0",
        "--n",
        "4096",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[4], "0.000000");
    assert_eq!(row[5], "0");
}

#[test]
fn robustness_and_curve_rows() {
    let data = fixture("checkins_sample.txt");
    let o = llabench(&[
        "robustness",
        "--dataset",
        &data,
        "--value-col",
        "2",
        "--ts-col",
        "1",
        "--k",
        "7",
        "--t",
        "0,25",
        "--repeats",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 1 + 2 + 2 * 2);

    let o = llabench(&[
        "curve",
        "--dataset",
        &data,
        "--value-col",
        "2",
        "--test-k",
        "8",
        "--fractions",
        "0,50,100",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 1 + 3 * 4);
}

#[test]
fn config_errors_exit_2() {
    let data = fixture("checkins_sample.txt");
    let too_big = llabench(&["table", "--dataset", &data, "--value-col", "2", "--k", "12"]);
    assert_eq!(too_big.status.code(), Some(2));
    let kind = llabench(&["synth", "--kind", "zigzag", "--n", "64"]);
    assert_eq!(kind.status.code(), Some(2));
    let not_pow2 = llabench(&["synth", "--kind", "random", "--n", "100"]);
    assert_eq!(not_pow2.status.code(), Some(2));
    let usage = llabench(&["table", "--k", "3"]);
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn data_errors_exit_3() {
    let missing = llabench(&[
        "table",
        "--dataset",
        "/no/such/file",
        "--value-col",
        "0",
        "--k",
        "2",
    ]);
    assert_eq!(missing.status.code(), Some(3));

    // column 1 holds timestamps, which are not decimals
    let data = fixture("checkins_sample.txt");
    let bad = llabench(&["table", "--dataset", &data, "--value-col", "1", "--k", "2"]);
    assert_eq!(bad.status.code(), Some(3));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("line 3"), "{err}");
}
