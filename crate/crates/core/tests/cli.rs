use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rank_anneal::sweep::read_results_csv;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rank-anneal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) {
    let out = run(&[
        "synth",
        "--n",
        "8",
        "--queries",
        "10",
        "--seed",
        "1",
        "--out",
        s(dir),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["sweep", "--help"]), 0);
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    synth(&data);
    let out = tmp.path().join("r.csv");
    let base = ["sweep", "--data", s(&data), "--out", s(&out)];
    assert_eq!(code(&[&base[..], &["--setting", "n9s3"]].concat()), 1);
    assert_eq!(code(&[&base[..], &["--algo", "tabu"]].concat()), 1);
    assert_eq!(code(&[&base[..], &["--repeats", "0"]].concat()), 1);
    assert_eq!(code(&[&base[..], &["--k", "0..3"]].concat()), 1);
    assert_eq!(code(&[&base[..], &["--k", "8"]].concat()), 1);
    assert_eq!(code(&["sweep", "--data", s(&data)]), 1);
    assert_eq!(code(&["frobnicate"]), 1);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"repeats": 2, "colour": "blue"}"#).unwrap();
    assert_eq!(code(&[&base[..], &["--config", s(&bad)]].concat()), 1);
    assert_eq!(
        code(&[&base[..], &["--config", s(&tmp.path().join("none.toml"))]].concat()),
        1
    );
}

#[test]
fn data_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    let out = tmp.path().join("r.csv");
    assert_eq!(code(&["sweep", "--data", s(&missing), "--out", s(&out)]), 2);
    assert_eq!(code(&["eval", "--data", s(&missing), "--subset", "ff"]), 2);

    let broken = tmp.path().join("broken");
    synth(&broken);
    fs::write(broken.join("train.txt"), "1 qid:1 1:0.5 oops\n").unwrap();
    assert_eq!(code(&["eval", "--data", s(&broken), "--subset", "all"]), 2);

    let empty = tmp.path().join("empty");
    assert_eq!(
        code(&["synth", "--n", "8", "--queries", "0", "--out", s(&empty)]),
        0
    );
    assert_eq!(code(&["eval", "--data", s(&empty), "--subset", "all"]), 2);
}

#[test]
fn eval_prints_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    synth(&data);
    let out = run(&["eval", "--data", s(&data), "--subset", "c0"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("c0 (2 of 8 features)"), "{text}");
    assert!(text.contains("test ndcg@10"));
    // hex that does not fit eight features
    assert_eq!(code(&["eval", "--data", s(&data), "--subset", "fff"]), 1);
    let synthetic = run(&[
        "eval",
        "--data",
        s(&data),
        "--subset",
        "all",
        "--ranker",
        "synthetic",
    ]);
    assert!(String::from_utf8(synthetic.stdout)
        .unwrap()
        .contains("ff (8 of 8 features)"));
}

#[test]
fn toml_config_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    synth(&data);
    let out = tmp.path().join("r.csv");
    let config = tmp.path().join("sweep.toml");
    fs::write(
        &config,
        format!(
            "data = {:?}\nalgo = \"sa\"\nsetting = \"n2s1\"\nrepeats = 3\nk = \"2..4\"\nseed = 5\n\n[evaluator]\nranker = \"synthetic\"\n\n[search]\nbudget_factor = 1.5\n",
            s(&data)
        ),
    )
    .unwrap();
    let res = run(&[
        "sweep",
        "--config",
        s(&config),
        "--out",
        s(&out),
        "--repeats",
        "2",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let table = read_results_csv(&out).unwrap();
    assert_eq!(
        table.rows.iter().map(|r| r.k).collect::<Vec<_>>(),
        [2, 3, 4]
    );
    assert!(table.rows.iter().all(|r| r.repeats == 2));
    assert!(table
        .rows
        .iter()
        .all(|r| r.neighborhood == "insertion" && r.scheme == "geometric"));
}

#[test]
fn sweep_and_compare_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    synth(&data);
    let a = tmp.path().join("sa.csv");
    let b = tmp.path().join("lbs.csv");
    for (algo, out) in [("sa", &a), ("lbs", &b)] {
        let res = run(&[
            "sweep",
            "--data",
            s(&data),
            "--algo",
            algo,
            "--setting",
            "n1s3",
            "--repeats",
            "2",
            "--k",
            "2..3",
            "--seed",
            "7",
            "--out",
            s(out),
        ]);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    let grid = tmp.path().join("grid.csv");
    assert_eq!(code(&["compare", s(&a), s(&b), "--out", s(&grid)]), 0);
    let text = fs::read_to_string(&grid).unwrap();
    assert_eq!(text.lines().next().unwrap(), "k,n1s3,lbs-n1");
    assert!(tmp.path().join("grid.long.csv").is_file());
    assert!(tmp.path().join("grid.timing.csv").is_file());

    assert_eq!(code(&["compare", s(&a), "--out", s(&grid)]), 1);
    assert_eq!(
        code(&[
            "compare",
            s(&a),
            s(&tmp.path().join("nope.csv")),
            "--out",
            s(&grid)
        ]),
        2
    );
}
