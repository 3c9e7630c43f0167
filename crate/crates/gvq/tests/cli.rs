use std::path::Path;
use std::process::{Command, Output};

fn gvq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gvq")).args(args).env("GVQ_THREADS", "1").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = gvq(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn fixture(dir: &Path) {
    ok(&["gen-train", "--count", "1500", "--dim", "16", "--seed", "2", "--out", &path(dir, "train.gvq")]);
    ok(&[
        "build-vocab", "--train", &path(dir, "train.gvq"), "--clusters", "150", "--graph-k", "20", "--max-iters", "4", "--out",
        &path(dir, "vocab.gvc"),
    ]);
    ok(&[
        "gen-seq", "--frames", "6", "--size", "40", "--overlap", "0.5", "--sigma", "0.2", "--dim", "16", "--vocab",
        &path(dir, "vocab.gvc"), "--seed", "3", "--out", &path(dir, "seq"),
    ]);
}

#[test]
fn quantize_writes_one_record_per_image() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    for method in [
        vec!["--method", "sgnns", "--expansions", "10"],
        vec!["--method", "gnns", "--expansions", "10", "--restarts", "2"],
        vec!["--method", "kd", "--trees", "2", "--checks", "30"],
        vec!["--method", "hkm", "--checks", "30"],
        vec!["--method", "linear"],
    ] {
        let (out, vocab, seq) = (path(dir.path(), "words.jsonl"), path(dir.path(), "vocab.gvc"), path(dir.path(), "seq"));
        let mut args = vec!["quantize", "--vocab", &vocab, "--features", &seq, "--out", &out];
        args.extend(method.iter().copied());
        ok(&args);
        let text = std::fs::read_to_string(&out).unwrap();
        let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(records.len(), 6, "{method:?}");
        for (i, r) in records.iter().enumerate() {
            assert_eq!(r["image_id"], i);
            let per: Vec<u64> = serde_json::from_value(r["evals_per_feature"].clone()).unwrap();
            assert_eq!(per.len(), 40);
            assert_eq!(per.iter().sum::<u64>(), r["evals_total"].as_u64().unwrap());
            let tf: Vec<(u32, f64)> = serde_json::from_value(r["words"].clone()).unwrap();
            assert!((tf.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn sweep_and_report_render() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let config = serde_json::json!({
        "vocab": "vocab.gvc",
        "dataset": "seq",
        "hint_source": "truth",
        "target_accuracy": 0.8,
        "tolerance": 0.2,
        "methods": [
            {"method": "gnns", "expansions": 5},
            {"method": "gnns", "expansions": 15},
            {"method": "sgnns", "expansions": 15},
            {"method": "kd", "trees": 1, "checks": 20}
        ]
    });
    std::fs::write(dir.path().join("sweep.json"), config.to_string()).unwrap();
    let printed = ok(&["sweep", "--config", &path(dir.path(), "sweep.json"), "--out", &path(dir.path(), "s.json")]);
    assert!(printed.contains("GNNS"), "{printed}");
    assert!(printed.contains("at accuracy 0.8") || printed.contains("no frontier point"), "{printed}");
    let rendered = ok(&["report", "--input", &path(dir.path(), "s.json")]);
    assert!(rendered.contains("SGNNS"), "{rendered}");

    ok(&["bench", "--config", &path(dir.path(), "sweep.json"), "--out", &path(dir.path(), "b.json")]);
    let csv = ok(&["report", "--input", &path(dir.path(), "b.json"), "--format", "csv"]);
    // header plus an all and a matched row per method
    assert_eq!(csv.lines().count(), 9, "{csv}");
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let junk = path(dir.path(), "junk.gvc");
    std::fs::write(&junk, b"not a vocabulary").unwrap();
    let out = gvq(&["quantize", "--vocab", &junk, "--features", &junk, "--method", "linear", "--out", &path(dir.path(), "o")]);
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    fixture(dir.path());
    let out = gvq(&[
        "quantize", "--vocab", &path(dir.path(), "vocab.gvc"), "--features", &path(dir.path(), "seq"), "--method", "gnns",
        "--out", &path(dir.path(), "o"),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--expansions"));
    let out = gvq(&[
        "quantize", "--vocab", &path(dir.path(), "vocab.gvc"), "--features", &path(dir.path(), "seq"), "--method", "gnns",
        "--expansions", "21", "--out", &path(dir.path(), "o"),
    ]);
    assert!(!out.status.success(), "E above the graph degree must be rejected");
}
