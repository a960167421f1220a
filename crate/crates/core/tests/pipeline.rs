use std::fs;
use std::path::Path;
use std::time::Instant;

use lcm_core::config::LcmConfig;
use lcm_core::oracle::{Oracle, OracleConfig};
use lcm_core::pipeline::{run_pipeline, Output, MODULE_LABELS, TIMING_FILE};
use lcm_core::slice::{load_slice, write_slice, SliceError, SliceStore, MANIFEST_FILE};

fn small_config(id: &str) -> LcmConfig {
    let mut c = LcmConfig::default();
    c.slice.id = id.into();
    c.topics.depth_limit = 2;
    c.topics.max_topics = 100;
    c.oracle = OracleConfig::synthetic(7);
    c
}

fn oracle(cfg: &LcmConfig) -> Oracle {
    Oracle::new(cfg.oracle.clone()).unwrap()
}

fn artifact_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .filter(|(n, _)| n != MANIFEST_FILE && n != TIMING_FILE)
        .collect();
    out.sort();
    out
}

#[test]
fn offline_run_is_valid_and_replays_byte_identically() {
    let cfg = small_config("econ");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let start = Instant::now();
    let run = run_pipeline(&cfg, &oracle(&cfg), Output::Dir(a.path())).unwrap();
    assert!(start.elapsed().as_secs() < 60);
    let s = &run.slice;
    s.topics.check_invariants().unwrap();
    assert!(s.topics.len() <= 100);
    assert!(s.topics.nodes.iter().all(|n| n.depth <= 2));
    assert!(s.graph.node_count() > 30, "{} nodes", s.graph.node_count());
    assert_eq!(s.embeddings.nrows(), s.graph.node_count());
    assert_eq!(s.coords2.nrows(), s.graph.node_count());
    assert!(s.coords2.iter().all(|x| x.is_finite()));
    for e in s.graph.edges() {
        assert_ne!(e.head, e.tail);
        assert!(e.multiplicity >= 1);
    }

    run_pipeline(&cfg, &oracle(&cfg), Output::Dir(b.path())).unwrap();
    let (x, y) = (artifact_bytes(a.path()), artifact_bytes(b.path()));
    assert_eq!(x.len(), 10);
    for ((na, ba), (nb, bb)) in x.iter().zip(&y) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between replays");
    }
}

#[test]
fn timing_profile_covers_every_module() {
    let cfg = small_config("t");
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let run = run_pipeline(&cfg, &oracle(&cfg), Output::Dir(dir.path())).unwrap();
    let wall = start.elapsed().as_secs_f64();
    let t = run.slice.timing.unwrap();
    let labels: Vec<&str> = t.modules.iter().map(|m| m.module.as_str()).collect();
    assert_eq!(labels, MODULE_LABELS);
    assert!((t.module_sum() - wall).abs() <= 0.05 * wall, "sum {} wall {wall}", t.module_sum());
    let text = fs::read_to_string(dir.path().join(TIMING_FILE)).unwrap();
    assert!(text.starts_with("Module\ttime [s]\n1: Topic graph\t"));
    assert!(text.lines().last().unwrap().starts_with("Total\t"));
}

#[test]
fn slice_round_trip_and_integrity() {
    let cfg = small_config("rt");
    let dir = tempfile::tempdir().unwrap();
    let run = run_pipeline(&cfg, &oracle(&cfg), Output::Dir(dir.path())).unwrap();
    let m = run.manifest.unwrap();
    assert_eq!(m.revision, 1);
    let loaded = load_slice(dir.path()).unwrap();
    assert_eq!(loaded, run.slice);

    // Rewriting bumps the revision.
    let mut again = loaded.clone();
    assert_eq!(write_slice(dir.path(), &mut again).unwrap().revision, 2);
    assert_eq!(load_slice(dir.path()).unwrap().revision, 2);

    // Tampering is caught.
    let edges = dir.path().join("edges_rt.tsv");
    let mut text = fs::read_to_string(&edges).unwrap();
    text.push_str("x\tcauses\ty\td\t1\n");
    fs::write(&edges, text).unwrap();
    assert!(matches!(load_slice(dir.path()), Err(SliceError::HashMismatch { file }) if file == "edges_rt.tsv"));

    // A write that never reached the manifest is incomplete.
    fs::remove_file(dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(matches!(load_slice(dir.path()), Err(SliceError::IncompleteSlice { .. })));
}

#[test]
fn store_publishes_revisions() {
    let root = tempfile::tempdir().unwrap();
    let store = SliceStore::open(root.path()).unwrap();
    assert!(store.summaries().unwrap().is_empty());
    let mut cfg = small_config("a");
    cfg.topics.depth_limit = 1;
    let first = run_pipeline(&cfg, &oracle(&cfg), Output::Store(&store)).unwrap();
    assert_eq!(first.manifest.unwrap().revision, 1);
    let mut s = store.load("a").unwrap();
    assert_eq!(s.revision, 1);
    assert_eq!(store.publish(&mut s).unwrap().revision, 2);
    assert_eq!(store.current_revision("a").unwrap(), 2);
    assert!(store.revision_dir("a", 1).join(MANIFEST_FILE).exists());

    cfg.slice.id = "b".into();
    run_pipeline(&cfg, &oracle(&cfg), Output::Store(&store)).unwrap();
    let sums = store.summaries().unwrap();
    assert_eq!(sums.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    assert!(sums.iter().all(|s| !s.corrupt));

    let emb = store.current_dir("b").unwrap().join("embeddings_b.bin");
    let mut bytes = fs::read(&emb).unwrap();
    bytes[20] ^= 0xff;
    fs::write(&emb, bytes).unwrap();
    let sums = store.summaries().unwrap();
    assert!(sums[1].corrupt && !sums[0].corrupt);
    assert!(matches!(store.load("nope"), Err(SliceError::UnknownSlice(_))));
}
