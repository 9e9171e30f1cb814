use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use benford_chain::chains::StochasticMatrix;
use benford_chain::randomchain::sample_path;
use benford_chain::report::{parse_frequency_csv, parse_series_csv, series_csv, AnalyzeOptions};
use benford_chain::sequences::{all_component_series, SeriesKind};
use benford_chain::ResonanceStatus;
use benford_chain::sequences::ClassicSequence;
use benford_chain::SearchBounds;
use benford_chain_cli::{cmd_analyze, cmd_sample, cmd_seqdigits, cmd_simulate, detect_from_text, sample_csv};
use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_benford-chain")).args(args).output().unwrap()
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), v)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_exit_codes() {
    let (code, v) = run_json(&["analyze", path_str(&data("ex12.csv"))]);
    assert_eq!(code, 0);
    assert_eq!(v["schema"], "benford-chain/1");
    let comps = v["components"].as_array().unwrap();
    assert_eq!(comps.len(), 9);
    assert!(comps.iter().all(|c| c["pn_minus_pstar"] == "benford_predicted"));

    let (code, v) = run_json(&["analyze", path_str(&data("ex3i.csv"))]);
    assert_eq!(code, 2);
    assert_eq!(v["resonance"]["certificate"]["kind"], "rational_log");
    assert_eq!(v["resonance"]["certificate"]["p"], -1);
    assert_eq!(v["resonance"]["certificate"]["q"], 1);

    let (code, v) = run_json(&["analyze", path_str(&data("period2.csv")), "--json"]);
    assert_eq!(code, 3);
    assert_eq!(v["error"]["exit_code"], 3);
    assert_eq!(v["error"]["classification"]["period"], 2);

    let out = run(&["analyze", "/nonexistent/matrix.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn json_and_csv_inputs_give_identical_reports() {
    let a = run(&["analyze", path_str(&data("ex12.csv"))]).stdout;
    let b = run(&["analyze", path_str(&data("ex12.json"))]).stdout;
    assert_eq!(a, b);
}

#[test]
fn floats_use_17_significant_digits() {
    let out = String::from_utf8(run(&["analyze", path_str(&data("ex12.csv"))]).stdout).unwrap();
    assert!(out.contains("3.4999999999999998e-1"));
}

#[test]
fn output_is_byte_identical_across_runs() {
    for args in [
        vec!["analyze", "--n", "500"],
        vec!["sample", "--d", "3", "--count", "20", "--n", "300", "--seed", "5"],
        vec!["seqdigits"],
        vec!["contfrac", "--expr", "golden_ratio", "--terms", "20"],
    ] {
        let mut args = args.clone();
        let m = data("ex12.csv");
        if args[0] == "analyze" {
            args.insert(1, path_str(&m));
        }
        let a = run(&args);
        let b = run(&args);
        assert!(a.status.success() || a.status.code() == Some(2), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn simulate_matches_spot_values() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [("ex12.csv", 1000, "(1,1)", 0.300), ("ex12.csv", 10_000, "(1,1)", 0.3008), ("ex13.csv", 10_000, "(1,2)", 0.3167)];
    for (m, n, col, want) in cases {
        let (path, _) = cmd_simulate(&data(m), n, SeriesKind::PnMinusPstar, dir.path(), false).unwrap();
        let parsed = parse_frequency_csv(&std::fs::read_to_string(path).unwrap()).unwrap();
        // Published values; exact counting puts (1,1) at N=1000 one count higher.
        let scale = if n == 1000 { 1e3 } else { 1e4 };
        let got = parsed.column(col).unwrap()[0];
        assert!(((got - want) * scale).round().abs() <= 1.0, "{m} {n}: {got}");
    }
}

fn read_exact(name: &str) -> Vec<Vec<f64>> {
    std::fs::read_to_string(data(name))
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().map(|x| x.parse().unwrap()).collect())
        .collect()
}

// Fixtures hold first-digit frequencies counted in exact rational arithmetic.
#[test]
fn tables_match_exact_rational_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (m, n, fixture) in [
        ("ex12.csv", 1000, "ex12_exact_1000.txt"),
        ("ex13.csv", 1000, "ex13_exact_1000.txt"),
        ("ex12.csv", 10_000, "ex12_exact_10000.txt"),
        ("ex13.csv", 10_000, "ex13_exact_10000.txt"),
    ] {
        let (path, _) = cmd_simulate(&data(m), n, SeriesKind::PnMinusPstar, dir.path(), false).unwrap();
        let parsed = parse_frequency_csv(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(parsed.rows, read_exact(fixture), "{m} N={n}");
    }
}

#[test]
fn simulate_csv_round_trips_at_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    for kind in SeriesKind::BOTH {
        let (path, table) = cmd_simulate(&data("ex13.csv"), 2000, kind, dir.path(), true).unwrap();
        let parsed = parse_frequency_csv(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed.columns, table.columns);
        for (c, label) in table.columns.iter().enumerate() {
            assert_eq!(parsed.column(label).unwrap(), table.frequencies[c]);
        }
    }
}

#[test]
fn series_and_sample_csvs_parse() {
    let p = benford_chain::io::read_matrix(&data("ex13.csv")).unwrap();
    let s = &all_component_series(&p, SeriesKind::PnMinusPstar, 100).unwrap()[3];
    let rows = parse_series_csv(&series_csv(s)).unwrap();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().zip(&s.entries).all(|(r, e)| r.d1 == e.first_digit()));

    let r = cmd_sample(3, 5, 200, 1, SearchBounds::default()).unwrap();
    let text = sample_csv(&r);
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap().len(), 3 + 9);
    assert_eq!(rdr.records().count(), 5);
}

#[test]
fn seqdigits_csv_round_trips() {
    let text = cmd_seqdigits(&ClassicSequence::ALL, 1000, false).unwrap();
    let parsed = parse_frequency_csv(&text).unwrap();
    assert_eq!(parsed.columns, ["pow2", "factorial", "fibonacci"]);
    let full = cmd_seqdigits(&ClassicSequence::ALL, 1000, true).unwrap();
    let parsed_full = parse_frequency_csv(&full).unwrap();
    assert_eq!(parsed_full.column("pow2").unwrap()[0], 0.301);
}

#[test]
fn contfrac_listing() {
    let out = String::from_utf8(run(&["contfrac", "--expr", "log10(0.3)", "--terms", "5"]).stdout).unwrap();
    assert!(out.starts_with("[-1; 2, 10, 2, 2, 1]"), "{out}");
    let out = run(&["contfrac", "--value", "0.75", "--terms", "5"]);
    // f64 input carries relative uncertainty 1e-15, which straddles the final quotient 3.
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("[0; 1]"));
    assert!(text.contains("1 of 5 requested quotients certified"));
    assert_eq!(run(&["contfrac", "--expr", "pi", "--terms", "5"]).status.code(), Some(1));
}

fn ex12() -> StochasticMatrix {
    benford_chain::io::read_matrix(&data("ex12.csv")).unwrap()
}

fn labels(path: &[usize]) -> String {
    path.iter().map(|s| (s + 1).to_string()).collect::<Vec<_>>().join(" ")
}

#[test]
fn detect_recovers_simulated_chain() {
    let p = ex12();
    let text = labels(&sample_path(&p, 100_000, 7));
    let r = detect_from_text(&text, 3, 1000, SearchBounds::default()).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!((r.estimated[i][j] - p.get(i, j)).abs() < 0.02, "({i},{j})");
        }
    }
    assert_eq!(r.analysis.resonance.status, ResonanceStatus::Nonresonant);
    assert!(!r.non_markov_suspect);
    assert!(r.interpretation.contains("not"));
}

#[test]
fn detect_on_iid_symbols_reports_without_crashing() {
    let uniform = StochasticMatrix::new(&vec![vec![1.0 / 3.0; 3]; 3]).unwrap();
    let text = labels(&sample_path(&uniform, 30_000, 3));
    let r = detect_from_text(&text, 3, 500, SearchBounds::default()).unwrap();
    assert!(r.estimated.iter().flatten().all(|&x| (x - 1.0 / 3.0).abs() < 0.03));
    assert!(!r.interpretation.is_empty());
}

#[test]
fn detect_exit_paths() {
    let dir = tempfile::tempdir().unwrap();
    let cycle = dir.path().join("cycle.txt");
    std::fs::write(&cycle, "1 2 3 ".repeat(400)).unwrap();
    let (code, v) = run_json(&["detect", path_str(&cycle), "--states", "3", "--json"]);
    assert_eq!(code, 3);
    assert!(v["error"]["message"].as_str().unwrap().contains("period 3"));

    let short = dir.path().join("short.txt");
    std::fs::write(&short, "1 2 3 1").unwrap();
    let (code, v) = run_json(&["detect", path_str(&short), "--states", "3", "--json"]);
    assert_eq!(code, 1);
    assert!(v["error"]["message"].as_str().unwrap().contains("at least 900"));

    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1 2 4").unwrap();
    let (code, _) = run_json(&["detect", path_str(&bad), "--states", "3", "--json"]);
    assert_eq!(code, 1);
}

#[test]
fn trajectory_feeds_detect() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["trajectory", path_str(&data("ex12.csv")), "--len", "20000", "--seed", "7"]);
    let seq = dir.path().join("seq.txt");
    std::fs::write(&seq, &out.stdout).unwrap();
    let (code, v) = run_json(&["detect", path_str(&seq), "--states", "3", "--n", "300"]);
    assert_eq!(code, 0);
    assert_eq!(v["observations"], 20000);
}

#[test]
fn analyze_report_has_empirical_tables_on_request() {
    let r = cmd_analyze(&data("ex13.csv"), AnalyzeOptions { empirical_n: Some(1000), ..Default::default() }).unwrap();
    assert_eq!(r.empirical.len(), 2);
    assert_eq!(r.empirical[0].frequencies[3][0], 0.326);
}

#[test]
fn thread_cap_does_not_change_results() {
    let a = run(&["sample", "--count", "12", "--n", "300", "--seed", "9"]);
    let b = Command::new(env!("CARGO_BIN_EXE_benford-chain"))
        .args(["sample", "--count", "12", "--n", "300", "--seed", "9"])
        .env("BENFORD_CHAIN_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
}
