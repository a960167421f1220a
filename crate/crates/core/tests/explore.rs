use lcm_core::config::LcmConfig;
use lcm_core::corpus::Corpus;
use std::collections::BTreeSet;

use lcm_core::explore::{active_loop, active_loop_scoped, ExplorerConfig, SelectionMode, UtilityWeights};
use lcm_core::extract::{RelationType, Source, Triple};
use lcm_core::graph::RelGraph;
use lcm_core::manifold::Coords;
use lcm_core::oracle::{Budget, Oracle, OracleConfig};
use lcm_core::pipeline::{run_pipeline, Output};
use lcm_core::slice::Slice;
use lcm_core::topics::TopicGraph;

fn fast_config() -> LcmConfig {
    let mut c = LcmConfig::default();
    c.slice.id = "x".into();
    c.slice.project_3d = false;
    c.topics.depth_limit = 1;
    c.topics.max_topics = 30;
    c.gt.dim = 32;
    c.encoder.dim = 64;
    c.manifold.epochs = Some(40);
    c.manifold.n_neighbors = 10;
    c.oracle = OracleConfig { parallelism: 1, ..OracleConfig::synthetic(5) };
    c
}

fn shallow_slice() -> Slice {
    let cfg = fast_config();
    run_pipeline(&cfg, &Oracle::new(cfg.oracle.clone()).unwrap(), Output::Discard).unwrap().slice
}

#[test]
fn zero_waves_leave_slice_unchanged() {
    let mut s = shallow_slice();
    let before = s.clone();
    let cfg = ExplorerConfig { waves: 0, ..Default::default() };
    let o = Oracle::new(s.config.oracle.clone()).unwrap();
    let logs = active_loop(&mut s, &cfg, &o, &Budget::new(50), &[]).unwrap();
    assert!(logs.is_empty());
    assert_eq!(s, before);
}

#[test]
fn waves_grow_the_slice_within_budget() {
    let mut s = shallow_slice();
    let topics_before = s.topics.len();
    let cfg = ExplorerConfig { waves: 3, budget_per_wave: 9, ..Default::default() };
    let o = Oracle::new(s.config.oracle.clone()).unwrap();
    let budget = Budget::new(40);
    let logs = active_loop(&mut s, &cfg, &o, &budget, &[]).unwrap();
    assert_eq!(logs.len(), 3);
    let used: u64 = logs.iter().map(|l| l.calls_used).sum();
    assert!(used <= 3 * 9);
    assert!(logs.iter().all(|l| l.calls_used <= 9));
    assert_eq!(used + budget.remaining(), 40);
    assert_eq!(o.calls_made(), used);
    assert!(s.topics.len() > topics_before);
    s.topics.check_invariants().unwrap();
    assert_eq!(s.graph, RelGraph::build(&s.triples));
    assert_eq!(s.coords2.nrows(), s.graph.node_count());
    assert!(logs[0].triples_after >= logs[0].triples_before);
}

#[test]
fn loop_stops_when_nothing_is_affordable() {
    let mut s = shallow_slice();
    let cfg = ExplorerConfig { waves: 5, ..Default::default() };
    let o = Oracle::new(s.config.oracle.clone()).unwrap();
    let budget = Budget::new(1);
    let logs = active_loop(&mut s, &cfg, &o, &budget, &[]).unwrap();
    assert_eq!(logs.len(), 1);
    assert_eq!(logs[0].calls_used, 0);
    assert_eq!(budget.remaining(), 1);
}

/// Six "alpha" topics whose variables sit at one point and six "beta" topics
/// at another.
fn two_cluster_slice() -> Slice {
    let mut topics = TopicGraph::new(1, 100);
    let root = topics.insert("markets", None).unwrap();
    topics.nodes[root as usize].expanded = true;
    let mut triples = Vec::new();
    for group in ["alpha", "beta"] {
        for i in 0..6 {
            topics.insert(&format!("{group} sector {i}"), Some(root));
            let head = format!("{group} sector {i}");
            let tail = format!("{group} sector {}", (i + 1) % 6);
            triples.push(Triple {
                surface: format!("{head} causes {tail}."),
                head,
                relation: RelationType::Causes,
                tail,
                domain: "markets".into(),
                source: Source { file: "causal_statements.jsonl".into(), record: 0, line: i, injected: false },
            });
        }
    }
    let graph = RelGraph::build(&triples);
    let n = graph.node_count();
    let coords2 = Coords::from_shape_fn((n, 2), |(v, _)| {
        if graph.label(v as u32).starts_with("alpha") { -10.0 } else { 10.0 }
    });
    let mut config = fast_config();
    config.slice.roots = vec!["markets".into()];
    Slice {
        id: "clusters".into(),
        config,
        topics,
        corpus: Corpus::default(),
        triples,
        graph,
        embeddings_init: Coords::zeros((n, 4)),
        embeddings: Coords::zeros((n, 4)),
        coords2,
        coords3: None,
        timing: None,
        revision: 0,
    }
}

#[test]
fn task_seeds_pull_selection_into_their_region() {
    let mut s = two_cluster_slice();
    let cfg = ExplorerConfig {
        waves: 1,
        batch_size: 4,
        budget_per_wave: 100,
        weights: UtilityWeights { w1: 1.0, w2: 0.0, w3: 0.0, w4: 0.0, alpha: 0.0 },
        mode: SelectionMode::TopK,
        ..Default::default()
    };
    let o = Oracle::new(s.config.oracle.clone()).unwrap();
    let logs = active_loop(&mut s, &cfg, &o, &Budget::new(100), &["beta sector 3".to_string()]).unwrap();
    assert_eq!(logs[0].boosted, 6);
    assert_eq!(logs[0].selected.len(), 4);
    assert!(logs[0].selected.iter().all(|t| t.starts_with("beta")), "{:?}", logs[0].selected);

    // Without seeds the id tie-break picks the alpha topics.
    let mut s = two_cluster_slice();
    let logs = active_loop(&mut s, &cfg, &o, &Budget::new(100), &[]).unwrap();
    assert!(logs[0].selected.iter().all(|t| t.starts_with("alpha")));
}

#[test]
fn scope_restricts_selection() {
    let mut s = two_cluster_slice();
    let cfg = ExplorerConfig {
        waves: 2,
        batch_size: 3,
        budget_per_wave: 100,
        weights: UtilityWeights { w1: 1.0, w2: 0.0, w3: 0.0, w4: 0.0, alpha: 0.0 },
        ..Default::default()
    };
    let scope: BTreeSet<_> = s.topics.nodes.iter().filter(|n| n.label.starts_with("beta")).map(|n| n.id).collect();
    let o = Oracle::new(s.config.oracle.clone()).unwrap();
    let mut seen = 0;
    let logs =
        active_loop_scoped(&mut s, &cfg, &o, &Budget::new(100), &[], Some(&scope), &mut |_| seen += 1).unwrap();
    assert_eq!(seen, logs.len());
    assert!(logs[0].selected.iter().all(|t| t.starts_with("beta")), "{:?}", logs[0].selected);
    // Second-wave picks come from the scope or from topics it spawned.
    let root_children: Vec<_> = s.topics.children(0).filter(|n| n.label.starts_with("alpha")).collect();
    assert!(root_children.iter().all(|n| !n.expanded));
}
