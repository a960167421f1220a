//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use lcm_core::analysis::{
    false_claims, inject_noise, laplacian_spectrum, robustness_report, stability_metrics, triangle_benchmark,
};
use lcm_core::config::LcmConfig;
use lcm_core::explore::{active_loop, frontier_entries, select_batch, ExplorerConfig, SelectionMode, UtilityWeights};
use lcm_core::extract::{extract_corpus, extract_triples, RelationType};
use lcm_core::graph::{RelGraph, TriangleMode};
use lcm_core::manifold::{
    gt_refine, project, Coords, Embeddings, GtConfig, HashedNgramEncoder, ManifoldConfig,
};
use lcm_core::oracle::{BackendKind, Budget, Oracle, OracleConfig};
use lcm_core::pipeline::{build_manifold, run_pipeline, Output, MODULE_LABELS, TIMING_FILE};
use lcm_core::slice::{Slice, MANIFEST_FILE};

/// Paper-expected thresholds for the noise check. They describe an outcome the
/// source work anticipates rather than one it measured.
const NOISE_MAX_DEGREE_PERCENTILE: f64 = 50.0;
const NOISE_MAX_LAMBDA2_CHANGE: f64 = 0.10;
const NOISE_CLAIMS: usize = 5;
const NOISE_EDGE_FRACTION: f64 = 0.01;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let checks: Vec<(&str, fn() -> Check)> = vec![
        ("gold-triple-extraction", gold_triples),
        ("offline-end-to-end", offline_end_to_end),
        ("spectral-oracle", spectral_oracle),
        ("triangle-detection", triangle_detection),
        ("triangle-benchmark", triangle_bench),
        ("refinement-properties", refinement_properties),
        ("projection-determinism-and-clusters", projection),
        ("budget-conservation", budget_conservation),
        ("noise-robustness", noise_robustness),
        ("stability-metrics", stability),
        ("timing-profile", timing_profile),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({secs:.2}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn small_config(id: &str) -> LcmConfig {
    let mut c = LcmConfig::default();
    c.slice.id = id.into();
    c.topics.depth_limit = 2;
    c.topics.max_topics = 100;
    c.oracle = OracleConfig::synthetic(7);
    c
}

fn oracle(cfg: &LcmConfig) -> Oracle {
    Oracle::new(cfg.oracle.clone()).expect("oracle")
}

fn gold_triples() -> Check {
    let start = Instant::now();
    let cases = [
        (
            "Increased demand for gold as a safe-haven asset during economic uncertainty causes its price to rise.",
            "demand for gold as a safe-haven asset",
            RelationType::Causes,
            "price of gold rises",
        ),
        (
            "A decline in the value of the U.S. dollar leads to higher gold prices due to its inverse correlation.",
            "decline in the value of the U.S. dollar",
            RelationType::LeadsTo,
            "higher gold prices",
        ),
        (
            "Geopolitical instability influences investor behavior, resulting in greater gold accumulation and higher prices.",
            "geopolitical instability",
            RelationType::Influences,
            "gold accumulation and prices",
        ),
    ];
    let mut relations = BTreeSet::new();
    for (sentence, head, rel, tail) in cases {
        let got = extract_triples(sentence, "economics");
        ensure!(got.len() == 1, "{} triples from {sentence:?}", got.len());
        let t = &got[0];
        ensure!(t.head == head.to_lowercase(), "head {:?}, expected {head:?}", t.head);
        ensure!(t.tail == tail.to_lowercase(), "tail {:?}, expected {tail:?}", t.tail);
        ensure!(t.relation == rel, "relation {}, expected {rel}", t.relation);
        relations.insert(t.relation.as_str());
    }
    let want: BTreeSet<&str> = ["causes", "leads_to", "influences"].into();
    ensure!(relations == want, "relations {relations:?}");
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 1.0, "took {secs:.3}s");
    Ok("3/3 triples exact".into())
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

/// The manifest minus its wall-clock fields: creation time, the timing table
/// and the timing file's hash.
fn stable_manifest(dir: &Path) -> serde_json::Value {
    let mut m: serde_json::Value = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE)).unwrap()).unwrap();
    let obj = m.as_object_mut().unwrap();
    obj.remove("created");
    obj.remove("timing");
    obj["artifacts"].as_object_mut().unwrap().remove(TIMING_FILE);
    m
}

fn offline_end_to_end() -> Check {
    let cfg = small_config("econ");
    ensure!(cfg.slice.roots.len() == 3, "{} roots", cfg.slice.roots.len());
    ensure!(cfg.oracle.backend == BackendKind::Synthetic, "backend is not synthetic");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let start = Instant::now();
    let run = run_pipeline(&cfg, &oracle(&cfg), Output::Dir(a.path())).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "pipeline took {secs:.1}s");

    let s = &run.slice;
    s.topics.check_invariants().map_err(|e| e.to_string())?;
    ensure!(s.topics.len() <= 100, "{} topics", s.topics.len());
    ensure!(s.topics.nodes.iter().all(|n| n.depth <= 2), "topic deeper than 2");
    let g = &s.graph;
    ensure!(*g == RelGraph::build(&s.triples), "graph differs from a rebuild of its triples");
    let mut keys = BTreeSet::new();
    for e in g.edges() {
        ensure!(e.head != e.tail, "self-loop on {}", g.label(e.head));
        ensure!(e.multiplicity >= 1, "zero multiplicity");
        ensure!(keys.insert((e.head, e.tail, e.relation, e.domain.clone())), "duplicate edge key");
    }
    let total: u64 = g.edges().iter().map(|e| e.multiplicity as u64).sum();
    ensure!(
        total + g.self_loops_dropped() == s.triples.len() as u64,
        "multiplicities {total} + loops {} != triples {}",
        g.self_loops_dropped(),
        s.triples.len()
    );
    ensure!(RelGraph::parse_edge_list(&g.to_edge_list()).ok().as_ref() == Some(g), "edge list round trip differs");
    let n = g.node_count();
    ensure!(s.embeddings.nrows() == n && s.coords2.nrows() == n, "row counts differ from {n} nodes");
    ensure!(s.coords2.iter().all(|x| x.is_finite()), "non-finite coordinates");

    run_pipeline(&cfg, &oracle(&cfg), Output::Dir(b.path())).map_err(|e| e.to_string())?;
    let (x, y) = (artifact_bytes(a.path()), artifact_bytes(b.path()));
    ensure!(x.len() == y.len() && !x.is_empty(), "artifact sets differ");
    for ((na, ba), (nb, bb)) in x.iter().zip(&y) {
        ensure!(na == nb, "artifact names differ: {na} vs {nb}");
        ensure!(ba == bb, "{na} differs between replays");
    }
    ensure!(stable_manifest(a.path()) == stable_manifest(b.path()), "manifests differ between replays");
    Ok(format!(
        "{} topics, {} triples, {n} nodes, {} edges in {secs:.1}s; {} artifacts replay byte-identically",
        s.topics.len(),
        s.triples.len(),
        g.edge_count(),
        x.len()
    ))
}

/// Dense normalized Laplacian built straight from the edge list.
fn dense_eigenvalues(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let mut adj = DMatrix::<f64>::zeros(n, n);
    for &(a, b) in edges {
        adj[(a, b)] = 1.0;
        adj[(b, a)] = 1.0;
    }
    let deg: Vec<f64> = (0..n).map(|i| adj.row(i).sum()).collect();
    let l = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - adj[(i, j)] / (deg[i] * deg[j]).sqrt()
    });
    let mut ev: Vec<f64> = l.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn graph_of(edges: &[(usize, usize)]) -> RelGraph {
    let labels: Vec<String> = (0..=edges.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0)).map(|i| format!("n{i}")).collect();
    RelGraph::from_edges(edges.iter().map(|&(a, b)| (labels[a].as_str(), labels[b].as_str(), RelationType::Causes, "d", 1)))
}

/// Node ids in `graph` follow first appearance, so map them back to the
/// fixture numbering before comparing.
fn spectrum_of(edges: &[(usize, usize)], n: usize) -> Result<Vec<f64>, String> {
    let g = graph_of(edges);
    ensure!(g.node_count() == n, "graph has {} nodes, expected {n}", g.node_count());
    laplacian_spectrum(&g, n).map(|r| r.eigenvalues).map_err(|e| e.to_string())
}

fn spectral_oracle() -> Check {
    let start = Instant::now();
    let close = |a: &[f64], b: &[f64], tol: f64| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol);
    let fixtures: [(&str, Vec<(usize, usize)>, usize, Vec<f64>); 3] = [
        ("K2", vec![(0, 1)], 2, vec![0.0, 2.0]),
        ("P3", vec![(0, 1), (1, 2)], 3, vec![0.0, 1.0, 2.0]),
        ("K3", vec![(0, 1), (1, 2), (2, 0)], 3, vec![0.0, 1.5, 1.5]),
    ];
    for (name, edges, n, want) in fixtures {
        let got = spectrum_of(&edges, n)?;
        ensure!(close(&got, &want, 1e-8), "{name}: {got:?}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let n = rng.random_range(5..=200);
        // Random spanning tree plus extra edges keeps the graph connected.
        let mut edges = BTreeSet::new();
        for v in 1..n {
            let u = rng.random_range(0..v);
            edges.insert((u, v));
        }
        let extra = rng.random_range(0..=2 * n);
        for _ in 0..extra {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let edges: Vec<_> = edges.into_iter().collect();
        let got = spectrum_of(&edges, n)?;
        let want = dense_eigenvalues(n, &edges);
        let err = got.iter().zip(&want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        ensure!(close(&got, &want, 1e-8), "random graph {case} ({n} nodes): max error {err:e}");
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1}s");
    Ok(format!("fixtures exact, 20 random graphs max error {worst:.1e}"))
}

fn triangle_detection() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut total = 0;
    for case in 0..50 {
        let n = rng.random_range(3..=100);
        let p = rng.random_range(0.01..0.15);
        let mut adj = vec![vec![false; n]; n];
        let labels: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let mut g = RelGraph::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && rng.random_bool(p) {
                    adj[a][b] = true;
                    let rel = if rng.random_bool(0.5) { RelationType::Causes } else { RelationType::Affects };
                    g.add(&labels[a], &labels[b], rel, "d", 1);
                }
            }
        }
        let mut brute = BTreeSet::new();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    let cyc = (adj[a][b] && adj[b][c] && adj[c][a]) || (adj[a][c] && adj[c][b] && adj[b][a]);
                    if cyc {
                        brute.insert([labels[a].clone(), labels[b].clone(), labels[c].clone()]);
                    }
                }
            }
        }
        let found = g.detect_triangles(TriangleMode::Cycle);
        let mut got = BTreeSet::new();
        for t in &found {
            let mut names = t.nodes.map(|v| g.label(v).to_string());
            names.sort_by_key(|s| s[1..].parse::<usize>().unwrap());
            ensure!(t.domain == "d", "case {case}: domain {}", t.domain);
            ensure!(got.insert(names), "case {case}: triangle reported twice");
        }
        ensure!(got == brute, "case {case}: {} detected vs {} by enumeration", got.len(), brute.len());
        total += brute.len();
    }
    Ok(format!("50 graphs, {total} directed 3-cycles matched exactly"))
}

fn triangle_bench() -> Check {
    let start = Instant::now();
    let a = triangle_benchmark(200, 0).map_err(|e| e.to_string())?;
    let b = triangle_benchmark(200, 0).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(a == b, "two runs with seed 0 differ: {a:?} vs {b:?}");
    ensure!(a.accuracy_with_triangles >= 0.99, "with triangles {:.3}", a.accuracy_with_triangles);
    ensure!(a.accuracy_edges_only <= 0.75, "edges only {:.3}", a.accuracy_edges_only);
    ensure!(secs < 120.0, "took {secs:.1}s");
    Ok(format!(
        "with triangles {:.3}, edges only {:.3} ({} train / {} test)",
        a.accuracy_with_triangles, a.accuracy_edges_only, a.train, a.test
    ))
}

fn refine(graph: &RelGraph, cfg: &GtConfig) -> Embeddings {
    let enc = HashedNgramEncoder::new(64, 0);
    gt_refine(graph, cfg, &enc).expect("refine").1
}

/// Largest row difference between two embeddings of graphs that share labels.
fn row_discrepancy(ga: &RelGraph, ha: &Embeddings, gb: &RelGraph, hb: &Embeddings) -> f64 {
    let mut worst = 0.0f64;
    for v in 0..ga.node_count() as u32 {
        let w = gb.node_id(ga.label(v)).expect("shared label");
        let d = ha.row(v as usize).iter().zip(hb.row(w as usize).iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
    }
    worst
}

fn refinement_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let labels: Vec<String> = (0..50).map(|i| format!("factor {i}")).collect();
    let rels = [RelationType::Causes, RelationType::Reduces, RelationType::Influences];
    let mut edges = Vec::new();
    for v in 1..50 {
        edges.push((rng.random_range(0..v), v));
    }
    for _ in 0..120 {
        let (a, b) = (rng.random_range(0..50), rng.random_range(0..50));
        if a != b {
            edges.push((a, b));
        }
    }
    let typed: Vec<(usize, usize, RelationType, &str)> = edges
        .iter()
        .map(|&(a, b)| (a, b, rels[rng.random_range(0..3)], if rng.random_bool(0.5) { "econ" } else { "bio" }))
        .collect();
    let build = |order: &[usize]| {
        RelGraph::from_edges(order.iter().map(|&i| {
            let (a, b, r, d) = typed[i];
            (labels[a].as_str(), labels[b].as_str(), r, d, 1)
        }))
    };
    let natural: Vec<usize> = (0..typed.len()).collect();
    let g = build(&natural);
    ensure!(g.node_count() == 50, "{} nodes", g.node_count());

    // Node features come from phrases, so permuting ids means reordering
    // first appearance: shuffle the edge list and match rows by phrase.
    let mut shuffled = natural.clone();
    shuffled.shuffle(&mut rng);
    let cfg = GtConfig { dim: 64, triangle_mode: TriangleMode::ChainSameDomain, ..GtConfig::default() };
    let h = refine(&g, &cfg);
    let g_shuffled = build(&shuffled);
    let hs = refine(&g_shuffled, &cfg);
    let ids_moved = (0..50u32).filter(|&v| g_shuffled.node_id(g.label(v)) != Some(v)).count();
    ensure!(ids_moved > 0, "shuffle left every id in place");
    let equiv = row_discrepancy(&g, &h, &g_shuffled, &hs);
    ensure!(equiv < 1e-6, "permutation discrepancy {equiv:e}");

    let norm_err = h.rows().into_iter().map(|r| (r.dot(&r).sqrt() - 1.0).abs()).fold(0.0, f64::max);
    ensure!(norm_err < 1e-6, "row norm error {norm_err:e}");

    // 3-cycle vs 3-path over the same phrases.
    let tri = RelGraph::from_edges([
        ("a", "b", RelationType::Causes, "d", 1),
        ("b", "c", RelationType::Causes, "d", 1),
        ("c", "a", RelationType::Causes, "d", 1),
    ]);
    let path_ = RelGraph::from_edges([
        ("a", "b", RelationType::Causes, "d", 1),
        ("b", "c", RelationType::Causes, "d", 1),
    ]);
    let eps = 1e-3;
    let cyc = GtConfig { dim: 64, triangle_mode: TriangleMode::Cycle, ..GtConfig::default() };
    let sep = row_discrepancy(&tri, &refine(&tri, &cyc), &path_, &refine(&path_, &cyc));
    ensure!(sep > eps, "triangle vs path separation {sep:e}");
    // Same graph twice: no separation.
    let same = row_discrepancy(&tri, &refine(&tri, &cyc), &tri, &refine(&tri, &cyc));
    ensure!(same == 0.0, "identical graphs differ by {same:e}");
    // With gamma on, the triangle term itself moves the embedding.
    let off = GtConfig { gamma: 0.0, ..cyc.clone() };
    let gamma_effect = row_discrepancy(&tri, &refine(&tri, &cyc), &tri, &refine(&tri, &off));
    ensure!(gamma_effect > eps, "triangle term contributes only {gamma_effect:e}");
    Ok(format!(
        "equivariance {equiv:.1e}, norm error {norm_err:.1e}, triangle/path separation {sep:.3}, triangle term {gamma_effect:.3}"
    ))
}

/// Lloyd's algorithm with k = 2, seeded from the two mutually farthest points.
fn two_means(x: &Coords) -> Vec<usize> {
    let n = x.nrows();
    let dist = |a: usize, b: &[f64]| x.row(a).iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
    let first: Vec<f64> = x.row(0).to_vec();
    let far = (0..n).max_by(|&a, &b| dist(a, &first).total_cmp(&dist(b, &first))).unwrap();
    let far_row: Vec<f64> = x.row(far).to_vec();
    let other = (0..n).max_by(|&a, &b| dist(a, &far_row).total_cmp(&dist(b, &far_row))).unwrap();
    let mut centers = [x.row(far).to_vec(), x.row(other).to_vec()];
    let mut assign = vec![0; n];
    for _ in 0..100 {
        let next: Vec<usize> = (0..n).map(|i| usize::from(dist(i, &centers[1]) < dist(i, &centers[0]))).collect();
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| next[i] == c).collect();
            if members.is_empty() {
                continue;
            }
            for (d, v) in center.iter_mut().enumerate() {
                *v = members.iter().map(|&i| x[(i, d)]).sum::<f64>() / members.len() as f64;
            }
        }
        if next == assign {
            break;
        }
        assign = next;
    }
    assign
}

fn projection() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let dim = 16;
    let mut truth = Vec::new();
    let h = Array2::from_shape_fn((200, dim), |(i, d)| {
        let blob = usize::from(i >= 100);
        if d == 0 {
            truth.push(blob);
        }
        let center = if blob == 0 { 1.0 } else { -1.0 };
        let base = if d % 2 == 0 { center } else { -center };
        base + noise.sample(&mut rng)
    });
    let cfg = ManifoldConfig { n_neighbors: 15, seed: 9, ..ManifoldConfig::default() };
    let a = project(&h, &cfg).map_err(|e| e.to_string())?;
    let b = project(&h, &cfg).map_err(|e| e.to_string())?;
    ensure!(a == b, "two projections with the same seed differ");
    ensure!(a.iter().all(|v| v.is_finite()), "non-finite coordinates");
    let labels = two_means(&a);
    let agree = labels.iter().zip(&truth).filter(|(l, t)| l == t).count() as f64 / 200.0;
    let agreement = agree.max(1.0 - agree);
    ensure!(agreement >= 0.95, "k-means agreement {agreement:.3}");
    Ok(format!("bit-identical replay, k-means agreement {agreement:.3}"))
}

fn fast_config(seed: u64) -> LcmConfig {
    let mut c = LcmConfig::default();
    c.slice.id = "budget".into();
    c.slice.project_3d = false;
    c.topics.depth_limit = 1;
    c.topics.max_topics = 30;
    c.gt.dim = 32;
    c.encoder.dim = 64;
    c.manifold.epochs = Some(30);
    c.manifold.n_neighbors = 10;
    c.oracle = OracleConfig { parallelism: 1, ..OracleConfig::synthetic(seed) };
    c
}

fn budget_conservation() -> Check {
    let cfg = fast_config(5);
    let base = run_pipeline(&cfg, &oracle(&cfg), Output::Discard).map_err(|e| e.to_string())?.slice;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut spent_total = 0;
    for run in 0..100 {
        let mut s = base.clone();
        let initial = rng.random_range(0..40u64);
        let ecfg = ExplorerConfig {
            weights: UtilityWeights {
                w1: rng.random_range(0.0..2.0),
                w2: rng.random_range(0.0..2.0),
                w3: rng.random_range(0.0..2.0),
                w4: rng.random_range(0.0..2.0),
                alpha: rng.random_range(0.0..2.0),
            },
            mode: if rng.random_bool(0.5) { SelectionMode::TopK } else { SelectionMode::Proportional },
            batch_size: rng.random_range(1..6),
            budget_per_wave: rng.random_range(1..15),
            waves: rng.random_range(0..3),
            seed: rng.random(),
            ..ExplorerConfig::default()
        };
        let o = oracle(&cfg);
        let budget = Budget::new(initial);
        active_loop(&mut s, &ecfg, &o, &budget, &[]).map_err(|e| format!("run {run}: {e}"))?;
        ensure!(
            o.calls_made() + budget.remaining() == initial,
            "run {run}: {} calls + {} remaining != {initial}",
            o.calls_made(),
            budget.remaining()
        );
        spent_total += o.calls_made();
    }

    let frontier = frontier_entries(&base.topics, &base.graph, &base.triples, &base.coords2, 5, 10);
    ensure!(!frontier.is_empty(), "empty frontier");
    for _ in 0..100 {
        let w = UtilityWeights {
            w1: rng.random_range(0.0..2.0),
            w2: rng.random_range(0.0..2.0),
            w3: rng.random_range(0.0..2.0),
            w4: rng.random_range(0.0..2.0),
            alpha: rng.random_range(0.0..2.0),
        };
        let c = rng.random_range(0.01..100.0);
        let a = select_batch(&frontier, &w, 1, SelectionMode::TopK, 0);
        let b = select_batch(&frontier, &w.scaled(c), 1, SelectionMode::TopK, 0);
        ensure!(a == b, "argmax changed under scaling by {c}");
    }
    Ok(format!("100 runs conserved exactly ({spent_total} calls spent); argmax stable under 100 scalings"))
}

fn noise_robustness() -> Check {
    let mut cfg = small_config("noise");
    cfg.slice.project_3d = false;
    let clean = run_pipeline(&cfg, &oracle(&cfg), Output::Discard).map_err(|e| e.to_string())?.slice;
    let path = vec![clean.topics.nodes[0].label.clone()];
    let noisy = |count: usize, seed: u64| -> Result<(RelGraph, Coords), String> {
        let claims = false_claims(&clean.graph, count, seed);
        let corpus = inject_noise(&clean.corpus, &claims, &path);
        let (triples, _) = extract_corpus(&corpus, &cfg.slice.domain_label);
        let graph = RelGraph::build(&triples);
        let m = build_manifold(&graph, &cfg).map_err(|e| e.to_string())?;
        Ok((graph, m.coords2))
    };

    let (g5, c5) = noisy(NOISE_CLAIMS, 1)?;
    let r5 = robustness_report(&clean.graph, &g5, &c5);
    ensure!(!r5.injected_nodes.is_empty(), "no injected nodes reached the graph");
    ensure!(
        r5.max_degree_percentile <= NOISE_MAX_DEGREE_PERCENTILE,
        "max degree percentile {:.1}",
        r5.max_degree_percentile
    );

    let count = ((clean.graph.edge_count() as f64 * NOISE_EDGE_FRACTION).ceil() as usize).max(1);
    let (g1, c1) = noisy(count, 2)?;
    let r1 = robustness_report(&clean.graph, &g1, &c1);
    ensure!(
        r1.lambda2_relative_change < NOISE_MAX_LAMBDA2_CHANGE,
        "lambda2 {:.4} -> {:.4}, relative change {:.3}",
        r1.lambda2_clean,
        r1.lambda2_noisy,
        r1.lambda2_relative_change
    );
    Ok(format!(
        "{} injected nodes, max degree percentile {:.1}; {count} injected edges move lambda2 by {:.2}%",
        r5.injected_nodes.len(),
        r5.max_degree_percentile,
        100.0 * r1.lambda2_relative_change
    ))
}

fn stability() -> Check {
    let mut cfg = small_config("stab");
    cfg.topics.depth_limit = 1;
    cfg.slice.project_3d = false;
    let s: Slice = run_pipeline(&cfg, &oracle(&cfg), Output::Discard).map_err(|e| e.to_string())?.slice;
    let g = &s.graph;
    let own = stability_metrics((g, &s.coords2), (g, &s.coords2), 10).map_err(|e| e.to_string())?;
    ensure!(own.distance_correlation == 1.0, "self correlation {}", own.distance_correlation);
    ensure!(own.knn_jaccard == 1.0, "self jaccard {}", own.knn_jaccard);

    let mut swapped = s.coords2.clone();
    for mut row in swapped.rows_mut() {
        let (x, y) = (row[0], row[1]);
        row[0] = 3.5 * y;
        row[1] = 3.5 * x;
    }
    let moved = stability_metrics((g, &s.coords2), (g, &swapped), 10).map_err(|e| e.to_string())?;
    ensure!((moved.distance_correlation - 1.0).abs() < 1e-12, "swap/scale correlation {}", moved.distance_correlation);
    Ok(format!(
        "self 1.0/1.0 on {} nodes; swapped and scaled correlation {:.12}",
        own.shared_nodes, moved.distance_correlation
    ))
}

fn timing_profile() -> Check {
    let cfg = small_config("timing");
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let run = run_pipeline(&cfg, &oracle(&cfg), Output::Dir(dir.path())).map_err(|e| e.to_string())?;
    let wall = start.elapsed().as_secs_f64();
    let t = run.slice.timing.ok_or("no timing profile")?;
    let labels: Vec<&str> = t.modules.iter().map(|m| m.module.as_str()).collect();
    ensure!(labels == MODULE_LABELS, "module labels {labels:?}");
    let text = fs::read_to_string(dir.path().join(TIMING_FILE)).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    ensure!(lines.first() == Some(&"Module\ttime [s]"), "header {:?}", lines.first());
    ensure!(lines.len() == MODULE_LABELS.len() + 2, "{} lines", lines.len());
    for (line, label) in lines[1..].iter().zip(MODULE_LABELS.iter().chain(["Total"].iter())) {
        let (name, secs) = line.split_once('\t').ok_or(format!("bad row {line:?}"))?;
        ensure!(name == *label, "row {name:?}, expected {label:?}");
        secs.parse::<f64>().map_err(|_| format!("bad seconds in {line:?}"))?;
    }
    let sum = t.module_sum();
    let rel = (sum - wall).abs() / wall;
    ensure!(rel <= 0.05, "module sum {sum:.4}s vs wall clock {wall:.4}s");
    Ok(format!("{} modules, sum {sum:.3}s vs wall {wall:.3}s ({:.2}% off)", labels.len(), 100.0 * rel))
}
