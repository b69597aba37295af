//! Files written by other tools (the VQ-VAE trainer in particular) must load
//! through the same readers and evaluate like native tokenizers.

use std::fs;
use std::path::Path;

use gazetok::dataset::{synth_dataset, SynthConfig};
use gazetok::io::{self, Codebook};
use gazetok::pipeline::{ingest_codebook_sweep, run_eval, DataSource, PipelineConfig, VqVaeRun};
use gazetok::sequence::derive_velocity;
use gazetok::{DistributionKind, Error, GazeSample, GazeSequence};

const CODEBOOK: &str = r#"{"format": "vq_vae_export", "version": 1, "scheme": "vq_vae", "variant": "velocity",
 "embedding_dim": 2, "codes_per_vector": 2, "window_len": 400, "model_hash": "9f2c",
 "vectors": [[0.0, 0.5], [1.0, -1.0], [0.25, 0.25], [-2.0, 3.5]]}"#;

/// Header laid out the way Python's `json.dumps` does by default.
fn python_stream(hash: &str, runs: &[Vec<u32>]) -> Vec<u8> {
    let mut bounds = Vec::new();
    let mut tokens: Vec<u32> = Vec::new();
    for r in runs {
        bounds.push(tokens.len().to_string());
        tokens.extend(r);
    }
    let header = format!(
        r#"{{"magic": "GZTK1", "tokenizer_id": "vq_vae@{hash}", "base_vocab": 4, "vocab_size": 4, "token_count": {}, "tokens_per_sample": 2, "axis_mode": "pooled", "sequence_boundaries": [{}], "sample_rate_hz": 100.0, "distribution_kind": "velocity"}}"#,
        tokens.len(),
        bounds.join(", ")
    );
    let mut out = header.into_bytes();
    out.push(b'\n');
    for t in tokens {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}

fn write_manifest(dir: &Path, name: &str, ids: &[String]) {
    let entries: Vec<String> = ids.iter().map(|id| format!(r#"{{"id": "{id}", "path": "{id}.csv"}}"#)).collect();
    fs::write(
        dir.join("manifest.json"),
        format!(r#"{{"name": "{name}", "sample_rate_hz": 100.0, "recordings": [{}]}}"#, entries.join(", ")),
    )
    .unwrap();
}

#[test]
fn external_codebook_loads() {
    let book = match io::codebook_from_json(CODEBOOK).unwrap() {
        Codebook::VqVae(b) => b,
        other => panic!("wrong scheme {other:?}"),
    };
    assert_eq!(book.vectors.len(), 4);
    assert_eq!(book.stream_id(), "vq_vae@9f2c");
    let bad = CODEBOOK.replace("[1.0, -1.0]", "[1.0]");
    assert!(io::codebook_from_json(&bad).is_err());
}

#[test]
fn external_stream_round_trips() {
    let bytes = python_stream("9f2c", &[vec![0, 1, 2, 3], vec![3, 3]]);
    let ts = io::stream_from_bytes(&bytes).unwrap();
    assert_eq!(ts.sequence_boundaries, vec![0, 4]);
    let book = io::codebook_from_json(CODEBOOK).unwrap();
    let Codebook::VqVae(book) = book else { unreachable!() };
    book.check_stream(&ts).unwrap();
    // Re-serialized with compact separators; the payload is untouched.
    let again = io::stream_to_bytes(&ts).unwrap();
    assert_eq!(io::stream_from_bytes(&again).unwrap(), ts);
    let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
    let nl2 = again.iter().position(|&b| b == b'\n').unwrap();
    assert_eq!(bytes[nl..], again[nl2..]);

    let other = io::stream_from_bytes(&python_stream("0000", &[vec![1, 2]])).unwrap();
    assert!(matches!(book.check_stream(&other), Err(Error::VocabMismatch(_))));
}

#[test]
fn vqvae_reconstructions_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let data_dir = tmp.path().join("data");
    let recon_dir = tmp.path().join("recon");
    fs::create_dir_all(&data_dir).unwrap();
    fs::create_dir_all(&recon_dir).unwrap();

    let recs = synth_dataset(&SynthConfig { n_fixations: 4, fixation_len_range: (20, 30), ..Default::default() }, 3).unwrap();
    let ids: Vec<String> = recs.iter().map(|r| r.id.clone()).collect();
    let mut runs = Vec::new();
    for r in &recs {
        io::write_csv(&data_dir.join(format!("{}.csv", r.id)), &r.seq).unwrap();
        // Reconstruction: every velocity off by 1/1024 degree along x, and
        // trimmed by one sample as a windowed export might be.
        let vel = derive_velocity(&r.seq).unwrap();
        let keep = vel.len() - 1;
        let shifted: Vec<GazeSample> =
            vel.samples()[..keep].iter().map(|v| GazeSample::new(v.x + 1.0 / 1024.0, v.y)).collect();
        io::write_csv(&recon_dir.join(format!("{}.csv", r.id)), &GazeSequence::positions(shifted, 100.0).unwrap()).unwrap();
        runs.push((0..keep * 2).map(|i| (i % 4) as u32).collect::<Vec<_>>());
    }
    write_manifest(&data_dir, "demo", &ids);
    write_manifest(&recon_dir, "demo-recon", &ids);
    fs::write(tmp.path().join("book.json"), CODEBOOK).unwrap();
    fs::write(tmp.path().join("test.gztk"), python_stream("9f2c", &runs)).unwrap();

    let cfg = PipelineConfig {
        schemes: vec![],
        distributions: vec![DistributionKind::Velocity],
        data: DataSource::Manifest { path: data_dir.join("manifest.json") },
        vqvae_runs: vec![VqVaeRun {
            codebook: tmp.path().join("book.json"),
            stream: tmp.path().join("test.gztk"),
            reconstructions: recon_dir.join("manifest.json"),
        }],
        ..Default::default()
    };
    let report = run_eval(cfg.clone(), 2).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(row.tokenizer, "vq_vae@9f2c");
    assert_eq!(row.distribution, DistributionKind::Velocity);
    assert_eq!(row.ratio, 4.0);
    assert_eq!(row.mae, 1.0 / 1024.0);
    assert_eq!(row.mse, 1.0 / (1024.0 * 1024.0));
    // Position i carries i steps of the offset, averaged over 0..=n.
    assert!(row.acc_mae.unwrap() > row.mae);

    fs::write(tmp.path().join("test.gztk"), python_stream("beef", &runs)).unwrap();
    assert!(run_eval(cfg, 1).is_err());
}

#[test]
fn codebook_size_sweep_ingestion() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("sweep.csv");
    fs::write(&p, "codebook_size,mse,mae\n64,0.4,0.5\n256,0.2,0.3\n2048,0.1,0.2\n").unwrap();
    let rows = ingest_codebook_sweep(&p).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.last().unwrap().mae <= rows[0].mae);
    fs::write(&p, "codebook_size,mse,mae\n64,0.4,0.5\n64,0.2,0.3\n").unwrap();
    assert!(ingest_codebook_sweep(&p).is_err());
    fs::write(&p, "size,mse\n64,0.4\n").unwrap();
    assert!(ingest_codebook_sweep(&p).is_err());
}
