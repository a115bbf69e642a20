use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bbbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbbc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn iris() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv")
}

const SMALL: [&str; 6] = ["--iters", "12", "--stars", "25", "--dim", "6"];

#[test]
fn bench_writes_tables_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut args = vec![
        "bench",
        "--function",
        "sphere,levy",
        "--runs",
        "2",
        "--out",
        s(&out),
        "--json",
    ];
    args.extend(SMALL);
    let o = bbbc(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 2);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "algorithm,target,best,average,std,n_runs"
    );
    assert_eq!(summary.lines().count(), 5);
    let trace = fs::read_to_string(out.join("levy").join("trace_mebbbc_1.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "iteration,best_so_far,center_of_mass_cost"
    );
    assert_eq!(trace.lines().count(), 13);
    for f in ["plan.json", "timings.csv", "results.json", "summary.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }

    let v = bbbc(&["verify", s(&out)]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
    assert!(String::from_utf8_lossy(&v.stdout).contains("4 summary rows, 8 traces"));
}

#[test]
fn single_run_has_one_row_per_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "bench",
        "--function",
        "zakharov",
        "--runs",
        "1",
        "--out",
        s(dir.path()),
    ];
    args.extend(SMALL);
    assert_eq!(code(&bbbc(&args)), 0);
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 3);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let mut args = vec![
            "bench",
            "--function",
            "rastrigin,step",
            "--runs",
            "3",
            "--seed",
            "17",
            "--jobs",
            jobs,
            "--out",
            s(out),
        ];
        args.extend(SMALL);
        assert_eq!(code(&bbbc(&args)), 0);
    }
    for f in [
        "results.csv",
        "summary.csv",
        "plan.json",
        "step/trace_bbbc_2.csv",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn compare_reports_welch_and_friedman() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let mut args = vec![
        "bench",
        "--function",
        "sphere,rastrigin",
        "--runs",
        "4",
        "--out",
        s(&run),
    ];
    args.extend(SMALL);
    assert_eq!(code(&bbbc(&args)), 0);

    let same = dir.path().join("same");
    let o = bbbc(&[
        "compare",
        s(&run),
        s(&run),
        "--alg-a",
        "mebbbc",
        "--alg-b",
        "mebbbc",
        "--out",
        s(&same),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sig = fs::read_to_string(same.join("significance.csv")).unwrap();
    let mut lines = sig.lines();
    assert_eq!(
        lines.next().unwrap(),
        "test,target,n_a,n_b,statistic,p_value,df,note"
    );
    for line in lines.by_ref().take(2) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], "welch");
        assert_eq!(cells[4].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cells[5].parse::<f64>().unwrap(), 1.0);
    }
    assert!(lines.next().unwrap().starts_with("friedman,*,"));

    let o = bbbc(&["compare", s(&run), s(&run)]);
    assert_eq!(code(&o), 2, "several algorithms need --alg-a/--alg-b");
}

#[test]
fn compare_with_one_target_skips_friedman() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let mut args = vec![
        "bench",
        "--function",
        "sphere",
        "--runs",
        "3",
        "--out",
        s(&run),
    ];
    args.extend(SMALL);
    assert_eq!(code(&bbbc(&args)), 0);
    let o = bbbc(&[
        "compare",
        s(&run.join("results.csv")),
        s(&run),
        "--alg-a",
        "bbbc",
        "--alg-b",
        "mebbbc",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("friedman test skipped"));
    let sig = fs::read_to_string(dir.path().join("significance.csv")).unwrap();
    assert_eq!(sig.lines().count(), 2);
}

#[test]
fn cluster_iris_writes_best_models() {
    let dir = tempfile::tempdir().unwrap();
    let o = bbbc(&[
        "cluster",
        "--dataset",
        s(&iris()),
        "--k",
        "3",
        "--algorithms",
        "kmebb,kmeans",
        "--runs",
        "2",
        "--iters",
        "10",
        "--stars",
        "20",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let model = fs::read_to_string(dir.path().join("iris").join("best_model.csv")).unwrap();
    let mut lines = model.lines();
    assert_eq!(
        lines.next().unwrap(),
        "algorithm,run_index,record,index,cluster,f0,f1,f2,f3"
    );
    assert_eq!(lines.count(), 2 * (3 + 150));
    assert!(!dir.path().join("iris").join("trace_kmeans_0.csv").exists());
    assert_eq!(code(&bbbc(&["verify", s(dir.path())])), 0);
}

#[test]
fn separable_blobs_reach_zero_cost() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.csv");
    let o = bbbc(&[
        "blobs",
        "--centers",
        "0,0;20,0;0,20",
        "--per-blob",
        "30",
        "--spread",
        "1e-7",
        "--out",
        s(&data),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("run");
    let o = bbbc(&[
        "cluster",
        "--dataset",
        s(&data),
        "--k",
        "3",
        "--algorithms",
        "kmebb",
        "--runs",
        "3",
        "--iters",
        "20",
        "--stars",
        "30",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let best: f64 = summary
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(best < 1e-3, "best {best}");
}

#[test]
fn kmebb_without_refinement_equals_mebbbc() {
    let dir = tempfile::tempdir().unwrap();
    let o = bbbc(&[
        "cluster",
        "--dataset",
        s(&iris()),
        "--k",
        "3",
        "--algorithms",
        "mebbbc,kmebb",
        "--refine-steps",
        "0",
        "--runs",
        "3",
        "--iters",
        "8",
        "--stars",
        "15",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(
        rows[0].strip_prefix("mebbbc"),
        rows[1].strip_prefix("kmebb")
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(
        code(&bbbc(&["bench", "--function", "ackley", "--out", out])),
        2
    );
    assert_eq!(
        code(&bbbc(&["bench", "--algorithms", "kmeans", "--out", out])),
        2
    );
    assert_eq!(code(&bbbc(&["bench", "--runs", "0", "--out", out])), 2);
    assert_eq!(code(&bbbc(&["bench", "--no-such-flag"])), 2);
    assert_eq!(
        code(&bbbc(&[
            "cluster",
            "--dataset",
            s(&iris()),
            "--k",
            "3",
            "--metric",
            "manhattan"
        ])),
        2
    );
    assert_eq!(code(&bbbc(&["--help"])), 0);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1.0,2.0,a\n1.0,oops,b\n").unwrap();
    let o = bbbc(&["cluster", "--dataset", s(&bad), "--k", "1", "--out", out]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 1, column 1"));
    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "1.0,2.0,a\n1.0,b\n").unwrap();
    assert_eq!(
        code(&bbbc(&[
            "cluster",
            "--dataset",
            s(&ragged),
            "--k",
            "1",
            "--out",
            out
        ])),
        3
    );

    let missing = dir.path().join("missing.csv");
    assert_eq!(
        code(&bbbc(&[
            "cluster",
            "--dataset",
            s(&missing),
            "--k",
            "2",
            "--out",
            out
        ])),
        4
    );
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let mut args = vec!["bench", "--runs", "1", "--out", s(&blocker)];
    args.extend(SMALL);
    assert_eq!(code(&bbbc(&args)), 4);
    assert_eq!(code(&bbbc(&["verify", s(&missing)])), 4);
}

#[test]
fn verify_rejects_tampered_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "bench",
        "--function",
        "sphere",
        "--runs",
        "1",
        "--algorithms",
        "bbbc",
        "--out",
        s(dir.path()),
    ];
    args.extend(SMALL);
    assert_eq!(code(&bbbc(&args)), 0);
    let trace = dir.path().join("sphere").join("trace_bbbc_0.csv");
    let text = fs::read_to_string(&trace).unwrap();
    let truncated: Vec<&str> = text.lines().take(5).collect();
    fs::write(&trace, truncated.join("\n") + "\n").unwrap();
    let o = bbbc(&["verify", s(dir.path())]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("4 rows, expected 12"));
}
