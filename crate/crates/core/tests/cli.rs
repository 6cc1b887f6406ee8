use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nash_sdp::cli::{EpsSummary, ExclusionDocument, GameFile, OracleDocument, ResultDocument, WelfareDocument, CSV_HEADER};
use nash_sdp::game::{random_game, StrategyProfile};
use nash_sdp::heuristics::Method;
use nash_sdp::applications::Verdict;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nash-sdp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_game(dir: &TempDir, name: &str, a: &[&[f64]], b: &[&[f64]]) -> PathBuf {
    let file = GameFile {
        a: a.iter().map(|r| r.to_vec()).collect(),
        b: b.iter().map(|r| r.to_vec()).collect(),
    };
    let path = dir.path().join(name);
    std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    path
}

fn pennies(dir: &TempDir) -> PathBuf {
    write_game(dir, "pennies.json", &[&[1.0, 0.0], &[0.0, 1.0]], &[&[0.0, 1.0], &[1.0, 0.0]])
}

fn dilemma(dir: &TempDir) -> PathBuf {
    write_game(dir, "pd.json", &[&[0.6, 0.0], &[1.0, 0.2]], &[&[0.6, 1.0], &[0.0, 0.2]])
}

fn json<T: serde::de::DeserializeOwned>(out: &Output) -> T {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pennies_trace_is_exact() {
    let dir = TempDir::new().unwrap();
    let g = pennies(&dir);
    let doc: ResultDocument = json(&run(&["solve", "--game", p(&g), "--method", "trace"]));
    assert!(doc.eps <= 1e-6, "{}", doc.eps);
    assert_eq!(doc.effective_method, Method::Trace);
    for v in doc.x.iter().chain(&doc.y) {
        assert!((v - 0.5).abs() < 1e-6);
    }
}

#[test]
fn malformed_game_exits_one() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"A\": [[1, 2]], \"B\": ").unwrap();
    let out = run(&["solve", "--game", p(&path)]);
    assert_eq!(out.status.code(), Some(1));
    let ragged = write_game(&dir, "ragged.json", &[&[1.0, 2.0], &[1.0]], &[&[1.0, 2.0], &[1.0, 0.0]]);
    assert_eq!(run(&["oracle", "--game", p(&ragged)]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["welfare", "--game", p(&missing)]).status.code(), Some(1));
}

#[test]
fn one_iteration_square_root_is_the_trace_solve() {
    let dir = TempDir::new().unwrap();
    let g = random_game::<f64>(3, 3, 4).unwrap();
    let path = dir.path().join("g.json");
    std::fs::write(&path, serde_json::to_string(&GameFile::from_game(&g)).unwrap()).unwrap();
    let sqrt: ResultDocument = json(&run(&["solve", "--game", p(&path), "--method", "sqrt", "--iters", "1"]));
    let trace: ResultDocument = json(&run(&["solve", "--game", p(&path), "--method", "trace"]));
    assert_eq!(sqrt.iterations, 1);
    assert!((sqrt.eps - trace.eps).abs() <= 1e-9);
    for (a, b) in sqrt.x.iter().zip(&trace.x).chain(sqrt.y.iter().zip(&trace.y)) {
        assert!((a - b).abs() <= 1e-9);
    }
}

#[test]
fn result_document_round_trips_and_eps_recomputes() {
    let dir = TempDir::new().unwrap();
    let g = random_game::<f64>(4, 3, 11).unwrap();
    let path = dir.path().join("g.json");
    let file = GameFile::from_game(&g);
    std::fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
    let out_path = dir.path().join("result.json");
    let out = run(&["solve", "--game", p(&path), "--method", "diaggap", "--iters", "5", "--out", p(&out_path)]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let doc: ResultDocument = serde_json::from_str(&text).unwrap();
    let again: ResultDocument = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
    assert_eq!(doc, again);
    assert_eq!(doc.game_digest, file.digest());
    assert_eq!(doc.trace.len(), doc.iterations);

    // Reported ε is in normalized units; the raw regrets are in game units.
    let profile = StrategyProfile::new(doc.x.clone(), doc.y.clone()).unwrap();
    let (norm, _) = g.normalize().unwrap();
    let eps = norm.evaluate_epsilon(&profile).unwrap();
    assert!((eps.eps - doc.eps).abs() <= 1e-9);
    let raw = g.evaluate_epsilon(&profile).unwrap();
    assert!((raw.eps_a - doc.raw_eps_a).abs() <= 1e-9);
    assert!((raw.eps_b - doc.raw_eps_b).abs() <= 1e-9);
    assert!(doc.bounds.l1 >= 0.0 && doc.bounds.rank_k >= 0.0 && doc.bounds.diaggap >= 0.0);
}

fn bench(dir: &TempDir, tag: &str, extra: &[&str]) -> (Vec<csv::StringRecord>, EpsSummary) {
    let csv_path = dir.path().join(format!("{tag}.csv"));
    let summary_path = dir.path().join(format!("{tag}.json"));
    let mut args = vec!["bench", "--m", "3", "--n", "3", "--count", "4", "--seed", "5", "--method", "sqrt", "--iters", "3"];
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--csv", p(&csv_path), "--summary", p(&summary_path)]);
    let out = run(&args);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, CSV_HEADER);
    let rows = reader.records().map(|r| r.unwrap()).collect();
    let summary = serde_json::from_str(&std::fs::read_to_string(&summary_path).unwrap()).unwrap();
    (rows, summary)
}

#[test]
fn bench_is_deterministic_apart_from_timing() {
    let dir = TempDir::new().unwrap();
    let (first, s1) = bench(&dir, "a", &[]);
    let (second, s2) = bench(&dir, "b", &["--jobs", "2"]);
    assert_eq!(first.len(), 4);
    let timing = CSV_HEADER.iter().position(|h| *h == "solve_ms").unwrap();
    for (a, b) in first.iter().zip(&second) {
        for k in (0..CSV_HEADER.len()).filter(|&k| k != timing) {
            assert_eq!(a.get(k), b.get(k), "column {}", CSV_HEADER[k]);
        }
    }
    assert_eq!(s1, s2);

    let eps_col = CSV_HEADER.iter().position(|h| *h == "eps").unwrap();
    let eps: Vec<f64> = first.iter().map(|r| r[eps_col].parse().unwrap()).collect();
    let mean = eps.iter().sum::<f64>() / eps.len() as f64;
    let max = eps.iter().cloned().fold(0.0, f64::max);
    assert_eq!(s1.count, 4);
    assert!((s1.mean - mean).abs() <= 1e-12);
    assert!((s1.max - max).abs() <= 1e-12);
}

#[test]
fn dilemma_oracle_and_exclusion() {
    let dir = TempDir::new().unwrap();
    let g = dilemma(&dir);
    let oracle: OracleDocument = json(&run(&["oracle", "--game", p(&g)]));
    assert_eq!(oracle.count, 1);
    assert_eq!(oracle.equilibria[0].x, vec![0.0, 1.0]);
    assert_eq!(oracle.equilibria[0].y, vec![0.0, 1.0]);

    let defect: ExclusionDocument = json(&run(&["exclude", "--game", p(&g), "--rows", "2"]));
    assert_eq!(defect.verdict, Verdict::CertifiedPersistent);
    let cooperate: ExclusionDocument = json(&run(&["exclude", "--game", p(&g), "--rows", "1"]));
    assert_eq!(cooperate.verdict, Verdict::Inconclusive);
    assert_eq!(run(&["exclude", "--game", p(&g)]).status.code(), Some(1));
    assert_eq!(run(&["exclude", "--game", p(&g), "--rows", "3"]).status.code(), Some(1));
}

#[test]
fn constant_sum_welfare_is_the_constant() {
    let dir = TempDir::new().unwrap();
    let g = write_game(&dir, "cs.json", &[&[0.2, 0.9], &[0.7, 0.4]], &[&[0.8, 0.1], &[0.3, 0.6]]);
    let w: WelfareDocument = json(&run(&["welfare", "--game", p(&g)]));
    assert!((w.value - 1.0).abs() <= 1e-6, "{}", w.value);
}
