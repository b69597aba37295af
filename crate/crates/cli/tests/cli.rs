use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gazetok(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazetok")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = gazetok(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: &str) {
    ok(&["synth", "--out", s(dir), "--recordings", n, "--n-fixations", "6", "--seed", "3"]);
}

#[test]
fn binary_round_trip_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3");
    let manifest = data.join("manifest.json");
    let cb = tmp.path().join("binary.json");
    ok(&["fit", "--scheme", "binary", "--data", s(&manifest), "--out", s(&cb)]);
    let input = data.join("synth-0001.csv");
    let stream = tmp.path().join("rec.gztk");
    ok(&["encode", "--codebook", s(&cb), "--data", s(&input), "--out", s(&stream)]);
    let decoded = tmp.path().join("decoded.csv");
    ok(&["decode", "--codebook", s(&cb), "--stream", s(&stream), "--out", s(&decoded)]);
    assert_eq!(fs::read(&decoded).unwrap(), fs::read(&input).unwrap());
}

#[test]
fn velocity_round_trip_with_bpe() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "3");
    let manifest = data.join("manifest.json");
    let cb = tmp.path().join("q.json");
    ok(&["fit", "--scheme", "quantile", "--distribution", "velocity", "--vocab", "64", "--data", s(&manifest), "--out", s(&cb)]);
    let plain = tmp.path().join("plain.gztk");
    ok(&["encode", "--codebook", s(&cb), "--distribution", "velocity", "--data", s(&manifest), "--out", s(&plain)]);
    let merges = tmp.path().join("merges.json");
    ok(&["bpe-train", "--stream", s(&plain), "--bpe-merges", "100", "--out", s(&merges)]);
    let packed = tmp.path().join("packed.gztk");
    ok(&["encode", "--codebook", s(&cb), "--distribution", "velocity", "--data", s(&manifest), "--bpe", s(&merges), "--out", s(&packed)]);
    assert!(fs::metadata(&packed).unwrap().len() < fs::metadata(&plain).unwrap().len());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["decode", "--codebook", s(&cb), "--stream", s(&plain), "--out", s(&a)]);
    ok(&["decode", "--codebook", s(&cb), "--stream", s(&packed), "--bpe", s(&merges), "--out", s(&b)]);
    for i in 0..3 {
        let f = format!("seq_{i:04}.csv");
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap());
    }
    // A BPE stream cannot be decoded without its merges.
    let out = gazetok(&["decode", "--codebook", s(&cb), "--stream", s(&packed), "--out", s(&tmp.path().join("c"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[BpeError]"));
}

#[test]
fn eval_pooled_kmeans_compression() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "5");
    let out = tmp.path().join("report");
    let run = ok(&[
        "eval", "--data", s(&data.join("manifest.json")), "--scheme", "k-means", "--axis-mode", "pooled",
        "--distribution", "position", "--vocab", "64", "--out", s(&out),
    ]);
    let table = String::from_utf8(run.stdout).unwrap();
    let line = table.lines().find(|l| l.starts_with("k_means")).unwrap();
    assert!(line.contains(" 8.00 ") && line.ends_with("87.50%"), "{line}");
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[15], "8");
    assert_eq!(row[16], "0.875");
    let json = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(json.contains("\"config\"") && json.contains("\"seed\": 0"));
}

#[test]
fn eval_is_deterministic_across_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "4");
    let m = data.join("manifest.json");
    let mut reports = Vec::new();
    for threads in ["1", "4", "1"] {
        let out = tmp.path().join(format!("r{}", reports.len()));
        ok(&[
            "--threads", threads, "eval", "--data", s(&m), "--vocab", "32", "--bpe-merges", "40",
            "--seed", "11", "--out", s(&out),
        ]);
        reports.push((fs::read(out.join("report.json")).unwrap(), fs::read(out.join("report.csv")).unwrap()));
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn missing_manifest_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gazetok(&["eval", "--data", s(&tmp.path().join("absent.json")), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[ConfigError]"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn failed_run_keeps_previous_output() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "2");
    let cb = tmp.path().join("cb.json");
    ok(&["fit", "--scheme", "quantile", "--vocab", "16", "--data", s(&data.join("manifest.json")), "--out", s(&cb)]);
    let before = fs::read(&cb).unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, "t,x,y\n0,nan,1\n").unwrap();
    let out = gazetok(&["fit", "--scheme", "quantile", "--data", s(&bad), "--out", s(&cb)]);
    assert_eq!(out.status.code(), Some(5));
    assert_eq!(fs::read(&cb).unwrap(), before);
}

#[test]
fn corrupted_stream_is_format_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "2");
    let cb = tmp.path().join("cb.json");
    ok(&["fit", "--scheme", "binary", "--data", s(&data.join("manifest.json")), "--out", s(&cb)]);
    let stream = tmp.path().join("s.gztk");
    ok(&["encode", "--codebook", s(&cb), "--data", s(&data.join("synth-0000.csv")), "--out", s(&stream)]);
    let mut bytes = fs::read(&stream).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&stream, bytes).unwrap();
    let out = gazetok(&["decode", "--codebook", s(&cb), "--stream", s(&stream), "--out", s(&tmp.path().join("d.csv"))]);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[FormatError]: payload truncated"));
}

#[test]
fn sweeps_write_plot_data() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "4");
    let m = data.join("manifest.json");
    let k = tmp.path().join("k.csv");
    ok(&["sweep", "--kind", "kmeans", "--data", s(&m), "--distribution", "position", "--ks", "2,8,32", "--out", s(&k)]);
    let text = fs::read_to_string(&k).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("k,mse,mae\n2,"));

    let l = tmp.path().join("l.csv");
    ok(&["sweep", "--kind", "length", "--scheme", "quantile", "--vocab", "64", "--data", s(&m), "--lengths", "1,5,20", "--out", s(&l)]);
    assert!(fs::read_to_string(&l).unwrap().starts_with("length,recordings,acc_mse,acc_mae\n1,"));

    let vq = tmp.path().join("vq.csv");
    fs::write(&vq, "codebook_size,mse,mae\n2048,0.01,0.05\n64,0.2,0.3\n").unwrap();
    let c = tmp.path().join("c.csv");
    ok(&["sweep", "--kind", "codebook", "--input", s(&vq), "--out", s(&c)]);
    assert_eq!(fs::read_to_string(&c).unwrap(), "codebook_size,mse,mae\n64,0.2,0.3\n2048,0.01,0.05\n");
    fs::write(&vq, "codebook_size,mse,mae\n1,0.01,0.05\n").unwrap();
    assert_eq!(gazetok(&["sweep", "--kind", "codebook", "--input", s(&vq), "--out", s(&c)]).status.code(), Some(3));
}
