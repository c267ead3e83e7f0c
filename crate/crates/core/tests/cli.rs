use std::process::Command;

use serde_json::Value;
use sqsum::analysis::identity_checks;
use sqsum::cli::{flatten, render, run_cli, verify_checks, Format, Status};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sqsum"));
    c.env_remove(sqsum::cli::SEED_ENV);
    c
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["sqsum"];
    full.extend_from_slice(args);
    let code = run_cli(full, &mut out, &mut err, None);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = run(args);
    assert!(!out.is_empty(), "no output, stderr: {err}");
    (code, serde_json::from_str(&out).unwrap())
}

#[test]
fn single_run_reports_the_sum() {
    let (code, v) = json(&[
        "run", "--n", "8", "--r", "1", "--d", "1", "--delta", "1", "--x", "10110100", "--y",
        "11010010", "--seed", "7",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["result_bits"], "01100110");
    assert_eq!(v["verdict"]["kind"], "success");
    for key in [
        "config",
        "verdict",
        "result_bits",
        "detection_rate",
        "ci95",
        "analytic_prediction",
        "abort_breakdown",
        "transcript_path",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["config"]["seed"], 7);
    assert_eq!(v["config"]["x"], "10110100");
}

#[test]
fn tp_attack_batch_matches_closed_form() {
    let (code, v) = json(&[
        "run",
        "--adversary",
        "tp-attack-1",
        "--trials",
        "10000",
        "--n",
        "1",
        "--d",
        "16",
    ]);
    assert_eq!(code, 0);
    let rate = v["detection_rate"].as_f64().unwrap();
    let predicted = v["analytic_prediction"].as_f64().unwrap();
    assert!((predicted - (1.0 - (7.0f64 / 8.0).powi(16))).abs() < 1e-15);
    assert!((rate - predicted).abs() < 0.02, "{rate} vs {predicted}");
    let ci = &v["ci95"];
    assert!(ci["lower"].as_f64().unwrap() < rate && rate < ci["upper"].as_f64().unwrap());
}

#[test]
fn dephasing_and_noiseless_batches_agree() {
    let batch = |channel| {
        let (code, mut v) = json(&[
            "run",
            "--trials",
            "1000",
            "--channel",
            channel,
            "--seed",
            "3",
        ]);
        assert_eq!(code, 0);
        let m = v.as_object_mut().unwrap();
        m.remove("wall_time_s");
        m.remove("config");
        v
    };
    let (a, b) = (batch("noiseless"), batch("dephasing"));
    assert_eq!(a["detection_rate"], 0.0);
    assert_eq!(a["correctness_failures"], 0);
    assert_eq!(a, b);
}

#[test]
fn abort_exits_with_two() {
    let mut saw_abort = false;
    for seed in 0..20 {
        let out = bin()
            .args([
                "run",
                "--adversary",
                "tp-attack-2",
                "--n",
                "1",
                "--d",
                "16",
                "--seed",
            ])
            .arg(seed.to_string())
            .output()
            .unwrap();
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        let code = out.status.code().unwrap();
        match v["verdict"]["kind"].as_str().unwrap() {
            "abort" => {
                assert_eq!(code, 2);
                saw_abort = true;
            }
            _ => assert_eq!(code, 0),
        }
    }
    assert!(saw_abort);
}

#[test]
fn usage_errors_exit_with_one_and_name_the_key() {
    let (code, _, err) = run(&["run", "--n", "4", "--x", "101", "--y", "1010"]);
    assert_eq!(code, 1);
    assert!(err.contains("`x`"), "{err}");
    let (code, _, err) = run(&["run", "--channel", "amplitude-damping"]);
    assert_eq!(code, 1);
    assert!(err.contains("`channel`"));
    let (code, _, _) = run(&["frobnicate"]);
    assert_eq!(code, 1);
    let (code, _, err) = run(&["efficiency", "--r", "0"]);
    assert_eq!(code, 1);
    assert!(err.contains("`r`"));
    let status = bin()
        .args(["run", "--trials", "0"])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(1));
}

#[test]
fn precedence_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\nn = 4\nchannel = \"dephasing\"\n").unwrap();
    let seed_of = |extra: &[&str], env: Option<&str>| {
        let mut c = bin();
        c.arg("run").args(extra);
        if let Some(e) = env {
            c.env(sqsum::cli::SEED_ENV, e);
        }
        let out = c.output().unwrap();
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        (
            v["config"]["seed"].as_u64().unwrap(),
            v["config"]["params"]["n"].as_u64().unwrap(),
        )
    };
    let cfg_s = cfg.to_str().unwrap();
    assert_eq!(
        seed_of(&["--config", cfg_s, "--seed", "3"], Some("9")),
        (3, 4)
    );
    assert_eq!(seed_of(&["--config", cfg_s], Some("9")), (5, 4));
    assert_eq!(seed_of(&[], Some("9")), (9, 8));
    assert_eq!(seed_of(&[], None), (0, 8));
}

#[test]
fn report_reproduces_from_its_own_config() {
    let (_, first) = json(&[
        "run",
        "--n",
        "4",
        "--delta",
        "2",
        "--adversary",
        "eve-single-cnot",
        "--target",
        "bob",
        "--seed",
        "44",
    ]);
    let c = &first["config"];
    let p = &c["params"];
    let n = p["n"].to_string();
    let r = p["r"].to_string();
    let d = p["d"].to_string();
    let delta = p["delta"].to_string();
    let seed = c["seed"].to_string();
    let x = c["x"].as_str().unwrap_or("random").to_string();
    let y = c["y"].as_str().unwrap_or("random").to_string();
    let (_, second) = json(&[
        "run",
        "--n",
        &n,
        "--r",
        &r,
        "--d",
        &d,
        "--delta",
        &delta,
        "--seed",
        &seed,
        "--x",
        &x,
        "--y",
        &y,
        "--adversary",
        c["adversary"]["name"].as_str().unwrap(),
        "--target",
        c["adversary"]["target"].as_str().unwrap(),
        "--channel",
        "noiseless",
    ]);
    assert_eq!(first, second);
}

#[test]
fn transcript_has_one_record_per_group() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let (_, v) = json(&[
        "run",
        "--n",
        "4",
        "--seed",
        "2",
        "--transcript",
        path.to_str().unwrap(),
    ]);
    assert_eq!(v["transcript_path"], path.to_str().unwrap());
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4 * 7);
    for (i, rec) in lines.iter().enumerate() {
        assert_eq!(rec["index"], i);
        for f in [
            "alice_op",
            "bob_op",
            "alice_result",
            "bob_result",
            "role",
            "tp_announcement",
        ] {
            assert!(rec.get(f).is_some(), "record {i} lacks {f}");
        }
    }
    let (code, _, err) = run(&[
        "run",
        "--trials",
        "5",
        "--transcript",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("transcript"));
}

#[test]
fn formats_agree_field_for_field() {
    let (_, v) = json(&[
        "run",
        "--trials",
        "50",
        "--adversary",
        "eve-double-cnot",
        "--seed",
        "1",
    ]);
    let flat = flatten(&v);
    let csv = render(&v, Format::Csv).unwrap();
    let mut rd = csv::Reader::from_reader(csv.as_bytes());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    let row: Vec<String> = rd
        .records()
        .next()
        .unwrap()
        .unwrap()
        .iter()
        .map(String::from)
        .collect();
    let from_csv: Vec<(String, String)> = header.into_iter().zip(row).collect();
    assert_eq!(from_csv, flat);
    let human = render(&v, Format::Human).unwrap();
    let from_human: Vec<(String, String)> = human
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(' ').unwrap();
            let v = v.trim_start();
            (
                k.to_string(),
                if v == "-" {
                    String::new()
                } else {
                    v.to_string()
                },
            )
        })
        .collect();
    assert_eq!(from_human, flat);
}

#[test]
fn verify_passes_and_warns_on_the_table_typo() {
    let (code, out, _) = run(&["verify"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.lines().filter(|l| l.starts_with("PASS eq")).count() == 9);
    let table = out.lines().find(|l| l.contains("table1")).unwrap();
    assert!(table.starts_with("WARN"), "{table}");
    assert!(table.contains("c_b"));
    assert!(out.contains("PASS dfs-amplitude") && out.contains("PASS dfs-statistical"));
}

#[test]
fn verify_only_filters() {
    let (code, out, _) = run(&["verify", "--only", "eq5"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 1);
    assert!(out.starts_with("PASS eq5"));
    let (code, _, err) = run(&["verify", "--only", "eq42"]);
    assert_eq!(code, 1);
    assert!(err.contains("`only`"));
}

#[test]
fn corrupted_identity_fails_verification() {
    let mut checks = identity_checks();
    let eq3 = checks.iter_mut().find(|c| c.name == "eq3").unwrap();
    eq3.forms[2].1[6].re += 1e-9;
    let lines = verify_checks(&checks, None, 0).unwrap();
    let failed: Vec<_> = lines.iter().filter(|l| l.status == Status::Fail).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].name, "eq3");
    assert!(failed[0].detail.contains("physical 1234"), "{}", failed[0]);
}

#[test]
fn efficiency_table() {
    let (code, out, _) = run(&[
        "efficiency",
        "--r",
        "1,2",
        "--d",
        "1,2",
        "--delta",
        "1,2",
        "--zip",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains("1/48 = 0.02083") && lines[1].contains("2/321 = 0.00623"));
    assert!(lines[2].contains("1/66") && lines[2].contains("2/348"));
    let (_, out, _) = run(&[
        "efficiency",
        "--format",
        "json",
        "--r",
        "1,3,10",
        "--d",
        "1,5",
        "--delta",
        "0.5,1,4",
    ]);
    let rows: Vec<Value> = serde_json::from_str(&out).unwrap();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r["ratio"].as_f64().unwrap() > 1.0));
}

#[test]
fn selftest_passes() {
    let (code, out, _) = run(&["selftest"]);
    assert_eq!(code, 0, "{out}");
    assert!(!out.contains("FAIL"));
}
