use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use idshield_cli::formats::{self, EmbeddingRecord};
use proptest::prelude::*;

fn idshield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idshield"))
        .args(args)
        .env_remove("IDSHIELD_SEED")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, name: &str, seed: &str) -> PathBuf {
    let out = dir.join(name);
    let o = idshield(&[
        "gen", "--identities", "20", "--samples", "3", "--dim", "16", "--within-kappa", "200", "--attributes", "g",
        "--seed", seed, "-o", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn gen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.jsonl", "9");
    let b = gen(dir.path(), "b.jsonl", "9");
    let c = gen(dir.path(), "c.jsonl", "10");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert!(formats::sidecar_path(&a).exists());
}

#[test]
fn rotation_moves_every_record_by_theta() {
    let dir = tempfile::tempdir().unwrap();
    let db = gen(dir.path(), "db.jsonl", "1");
    let out = dir.path().join("out.bin");
    let o = idshield(&["privatize", "-i", s(&db), "--kind", "rotation", "--theta-degrees", "90", "--seed", "2", "-o", s(&out)]);
    assert!(o.status.success());
    let before = formats::read_jsonl(&db).unwrap();
    let after = formats::read_bin(&out).unwrap();
    assert_eq!(before.len(), after.len());
    for (x, y) in before.iter().zip(&after) {
        assert_eq!(x.id, y.id);
        let cos: f64 = x.vec.iter().zip(&y.vec).map(|(a, b)| a * b).sum();
        assert!((cos.clamp(-1.0, 1.0).acos() - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }
}

#[test]
fn check_dp_reports_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dp.json");
    let o = idshield(&["check-dp", "--epsilon", "50", "--dim", "16", "--trials", "100000", "--seed", "1", "-o", s(&out)]);
    assert!(o.status.success());
    let doc: serde_json::Value = formats::read_json(&out).unwrap();
    assert_eq!(doc["result"]["violations"], 0);
    assert!(doc["result"]["max_slack_chord"].as_f64().unwrap() <= 1e-9);
    assert!(out.with_extension("json.txt").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(idshield(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(idshield(&["check-dp", "--dim", "8", "--epsilon=-1", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(idshield(&["gen", "--identities", "5", "--seed", "1", "-o", "x.jsonl"]).status.code(), Some(1));
    assert_eq!(idshield(&["privatize", "-i", "/nonexistent", "--kind", "uniform", "-o", "y"]).status.code(), Some(1));
    assert_eq!(idshield(&["--help"]).status.code(), Some(0));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": 1, \"vec\": [1.0, 0.0]}\n{\"id\": 2, \"vec\": [\"x\"]}\n").unwrap();
    let o = idshield(&["privatize", "-i", s(&bad), "--kind", "uniform", "--seed", "1", "-o", s(&dir.path().join("o.jsonl"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let zero = dir.path().join("zero.jsonl");
    std::fs::write(&zero, "{\"id\": 1, \"vec\": [0.0, 0.0]}\n").unwrap();
    let o = idshield(&["privatize", "-i", s(&zero), "--kind", "uniform", "--seed", "1", "-o", s(&dir.path().join("o.jsonl"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let db = gen(dir.path(), "db.jsonl", "1");
    let run = |name: &str, env: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_idshield"));
        cmd.args(["privatize", "-i", s(&db), "--kind", "ldp", "--epsilon", "5", "-o", s(&out)]);
        match env {
            Some(v) => cmd.env("IDSHIELD_SEED", v),
            None => cmd.env_remove("IDSHIELD_SEED"),
        };
        let o = cmd.output().unwrap();
        assert!(o.status.success());
        (std::fs::read(&out).unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
    };
    let (a, _) = run("a.jsonl", Some("77"));
    let (b, _) = run("b.jsonl", Some("77"));
    let (c, note) = run("c.jsonl", None);
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(note.contains("default seed"));
    let explicit = dir.path().join("d.jsonl");
    assert!(idshield(&["privatize", "-i", s(&db), "--kind", "ldp", "--epsilon", "5", "--seed", "77", "-o", s(&explicit)])
        .status
        .success());
    assert_eq!(a, std::fs::read(&explicit).unwrap());
}

#[test]
fn remapped_privatization() {
    let dir = tempfile::tempdir().unwrap();
    let db = gen(dir.path(), "db.jsonl", "4");
    let remapper = dir.path().join("remap.json");
    let o = idshield(&["fit-remap", "-i", s(&db), "--target-dim", "6", "--j", "4", "--lambda", "16", "-o", s(&remapper)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out.jsonl");
    let o = idshield(&[
        "privatize", "-i", s(&db), "--remapper", s(&remapper), "--kind", "ldp", "--epsilon", "10", "--seed", "3", "-o",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let released = formats::read_jsonl(&out).unwrap();
    assert_eq!(released.len(), 60);
    assert!(released.iter().all(|r| r.vec.len() == 16 && r.vec.iter().all(|v| v.is_finite())));
}

#[test]
fn sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let db = gen(dir.path(), "db.jsonl", "5");
    let out = dir.path().join("sweep.json");
    let o = idshield(&["sweep", "-i", s(&db), "--seed", "1", "--k", "1,5", "-o", s(&out)]);
    assert!(o.status.success());
    let table = String::from_utf8_lossy(&o.stdout);
    for label in ["Rank 1", "Rank 5", "EER", "Identity", "Rand. sampling", "theta=150"] {
        assert!(table.contains(label), "missing {label} in\n{table}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn formats_round_trip(
        ids in prop::collection::vec(any::<u64>(), 1..20),
        dim in 1usize..12,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let records: Vec<EmbeddingRecord> = ids
            .iter()
            .map(|&id| EmbeddingRecord { id, attrs: None, vec: (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect() })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let (j, b) = (dir.path().join("x.jsonl"), dir.path().join("x.bin"));
        formats::write_jsonl(&j, &records).unwrap();
        formats::write_bin(&b, &formats::read_jsonl(&j).unwrap()).unwrap();
        prop_assert_eq!(formats::read_bin(&b).unwrap(), records);
    }
}
