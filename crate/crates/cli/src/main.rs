use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use lcm_core::analysis::{
    false_claims, inject_noise, laplacian_spectrum, robustness_report, stability_metrics, triangle_benchmark,
};
use lcm_core::config::LcmConfig;
use lcm_core::explore::{active_loop, SelectionMode};
use lcm_core::extract::extract_corpus;
use lcm_core::graph::RelGraph;
use lcm_core::oracle::{Budget, Oracle};
use lcm_core::pipeline::{build_manifold, run_pipeline, Output};
use lcm_core::slice::{load_slice, unify_slices, Slice, SliceStore};
use lcm_service::ServiceConfig;

#[derive(Parser)]
#[command(name = "lcm", version, about = "Build, explore and analyze causal-model slices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline for one slice.
    Run(RunArgs),
    /// Print the default configuration as TOML.
    Config,
    /// Spend an oracle budget deepening a stored slice.
    Explore(ExploreArgs),
    /// Structural diagnostics.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Merge stored slices into one graph with per-slice provenance.
    Unify(UnifyArgs),
    /// Serve the HTTP API over a slice store.
    Serve(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Publish into this slice store.
    #[arg(long, conflicts_with = "out")]
    store: Option<PathBuf>,
    /// Write the slice into this directory instead of a store.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    /// Comma-separated root topics.
    #[arg(long, value_delimiter = ',')]
    roots: Option<Vec<String>>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    max_topics: Option<usize>,
    /// Synthetic oracle seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Names one slice: `--store` plus `--slice`, or `--dir`.
#[derive(Args, Clone)]
struct SliceRef {
    #[arg(long, default_value = "slices")]
    store: PathBuf,
    #[arg(long, required_unless_present = "dir")]
    slice: Option<String>,
    /// A slice directory outside any store.
    #[arg(long)]
    dir: Option<PathBuf>,
}

impl SliceRef {
    fn load(&self) -> Result<Slice> {
        match (&self.dir, &self.slice) {
            (Some(d), _) => load_slice(d).with_context(|| format!("loading {}", d.display())),
            (None, Some(id)) => SliceStore::open(&self.store)?.load(id).with_context(|| format!("loading slice {id}")),
            (None, None) => bail!("give --slice or --dir"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    TopK,
    Proportional,
}

#[derive(Args)]
struct ExploreArgs {
    #[command(flatten)]
    slice: SliceRef,
    /// Total oracle calls available.
    #[arg(long)]
    budget: u64,
    #[arg(long)]
    waves: Option<usize>,
    /// Topics whose manifold neighborhood gets a utility boost.
    #[arg(long, value_delimiter = ',')]
    seed_topics: Vec<String>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Cap on calls spent in one wave.
    #[arg(long)]
    per_wave: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Also append wave records to this JSONL file.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Run the waves without publishing a new revision.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Analyze {
    /// Degree profile and low normalized-Laplacian spectrum of the largest component.
    Spectrum {
        #[command(flatten)]
        slice: SliceRef,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the layouts of two slices on their shared phrases.
    Stability {
        #[command(flatten)]
        slice: SliceRef,
        /// Second slice, in the same store unless --other-dir is given.
        #[arg(long, required_unless_present = "other_dir")]
        other: Option<String>,
        #[arg(long)]
        other_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inject polarity-flipped claims and measure where they land.
    Noise {
        #[command(flatten)]
        slice: SliceRef,
        #[arg(long, default_value_t = 5)]
        claims: usize,
        /// Inject this fraction of the edge count instead of --claims.
        #[arg(long)]
        edge_fraction: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Triangle-detection benchmark with and without the triangle channel.
    Triangles {
        #[arg(long, default_value_t = 200)]
        graphs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct UnifyArgs {
    #[arg(long, default_value = "slices")]
    store: PathBuf,
    /// Comma-separated slice ids; all slices when omitted.
    #[arg(long, value_delimiter = ',')]
    slices: Vec<String>,
    /// TSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value = "slices")]
    store_dir: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Config => {
            print!("{}", LcmConfig::default().to_toml());
            Ok(())
        }
        Command::Explore(a) => explore(a),
        Command::Analyze(a) => analyze(a),
        Command::Unify(a) => unify(a),
        Command::Serve(a) => serve(a),
    }
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => LcmConfig::load(p)?,
        None => LcmConfig::default(),
    };
    if let Some(id) = a.id {
        cfg.slice.id = id;
    }
    if let Some(r) = a.roots {
        cfg.slice.roots = r;
    }
    if let Some(d) = a.depth {
        cfg.topics.depth_limit = d;
    }
    if let Some(m) = a.max_topics {
        cfg.topics.max_topics = m;
    }
    if let Some(s) = a.seed {
        cfg.oracle.seed = s;
    }
    cfg.validate()?;
    let oracle = Oracle::new(cfg.oracle.clone())?;
    let store;
    let out = match (&a.store, &a.out) {
        (_, Some(dir)) => Output::Dir(dir),
        (Some(root), None) => {
            store = SliceStore::open(root)?;
            Output::Store(&store)
        }
        (None, None) => {
            store = SliceStore::open(Path::new("slices"))?;
            Output::Store(&store)
        }
    };
    let run = run_pipeline(&cfg, &oracle, out)?;
    let s = &run.slice;
    println!(
        "slice {} revision {}: {} topics, {} questions, {} statements, {} triples, {} nodes, {} edges",
        s.id,
        s.revision,
        s.topics.len(),
        s.corpus.questions.len(),
        s.corpus.statements.len(),
        s.triples.len(),
        s.graph.node_count(),
        s.graph.edge_count()
    );
    println!("oracle calls: {}", oracle.calls_made());
    if let Some(t) = &s.timing {
        print!("{}", t.render());
    }
    Ok(())
}

fn explore(a: ExploreArgs) -> Result<()> {
    let mut slice = a.slice.load()?;
    let mut cfg = slice.config.explorer.clone();
    if let Some(w) = a.waves {
        cfg.waves = w;
    }
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    if let Some(p) = a.per_wave {
        cfg.budget_per_wave = p as u64;
    }
    if let Some(m) = a.mode {
        cfg.mode = match m {
            Mode::TopK => SelectionMode::TopK,
            Mode::Proportional => SelectionMode::Proportional,
        };
    }
    let oracle = Oracle::new(slice.config.oracle.clone())?;
    let budget = Budget::new(a.budget);
    let logs = active_loop(&mut slice, &cfg, &oracle, &budget, &a.seed_topics)?;
    let mut sink = match &a.log {
        Some(p) => Some(fs::OpenOptions::new().create(true).append(true).open(p)?),
        None => None,
    };
    for log in &logs {
        let line = serde_json::to_string(log)?;
        println!("{line}");
        if let Some(f) = &mut sink {
            writeln!(f, "{line}")?;
        }
    }
    eprintln!("calls used {} of {}; {} remaining", oracle.calls_made(), a.budget, budget.remaining());
    if a.dry_run {
        return Ok(());
    }
    match (&a.slice.dir, &a.slice.slice) {
        (Some(dir), _) => {
            let m = lcm_core::slice::write_slice(dir, &mut slice)?;
            eprintln!("wrote revision {} to {}", m.revision, dir.display());
        }
        (None, Some(_)) => {
            let m = SliceStore::open(&a.slice.store)?.publish(&mut slice)?;
            eprintln!("published revision {}", m.revision);
        }
        (None, None) => unreachable!(),
    }
    Ok(())
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn analyze(a: Analyze) -> Result<()> {
    match a {
        Analyze::Spectrum { slice, k, out } => {
            let s = slice.load()?;
            let comps = s.graph.components();
            let lcc = s.graph.largest_component();
            let deg = s.graph.degree_stats();
            let spectrum = if lcc.node_count() >= 1 { Some(laplacian_spectrum(&lcc, k.min(lcc.node_count()))?) } else { None };
            emit(
                &json!({
                    "slice": s.id,
                    "revision": s.revision,
                    "nodes": s.graph.node_count(),
                    "edges": s.graph.edge_count(),
                    "components": comps.count,
                    "largest_component": { "nodes": lcc.node_count(), "edges": lcc.edge_count() },
                    "avg_degree": deg.avg_degree,
                    "max_degree": deg.max_degree,
                    "degree_hist": deg.degree_hist,
                    "spectrum": spectrum,
                    "fiedler": spectrum.as_ref().and_then(|r| r.fiedler()),
                    "hub_edges": s.graph.hub_edges(20, 20),
                }),
                out.as_deref(),
            )
        }
        Analyze::Stability { slice, other, other_dir, k, out } => {
            let a_slice = slice.load()?;
            let b_ref = SliceRef { store: slice.store.clone(), slice: other, dir: other_dir };
            let b_slice = b_ref.load()?;
            let report = stability_metrics((&a_slice.graph, &a_slice.coords2), (&b_slice.graph, &b_slice.coords2), k)?;
            emit(&json!({ "a": a_slice.id, "b": b_slice.id, "report": report }), out.as_deref())
        }
        Analyze::Noise { slice, claims, edge_fraction, seed, out } => {
            let s = slice.load()?;
            let count = match edge_fraction {
                Some(f) if f > 0.0 => ((s.graph.edge_count() as f64 * f).ceil() as usize).max(1),
                Some(_) => bail!("--edge-fraction must be positive"),
                None => claims,
            };
            let injected = false_claims(&s.graph, count, seed);
            let path = vec![s.topics.nodes.first().map(|n| n.label.clone()).unwrap_or_default()];
            let corpus = inject_noise(&s.corpus, &injected, &path);
            let (triples, _) = extract_corpus(&corpus, &s.config.slice.domain_label);
            let noisy = RelGraph::build(&triples);
            let m = build_manifold(&noisy, &s.config)?;
            let report = robustness_report(&s.graph, &noisy, &m.coords2);
            emit(&json!({ "slice": s.id, "claims": injected, "report": report }), out.as_deref())
        }
        Analyze::Triangles { graphs, seed, out } => {
            let r = triangle_benchmark(graphs, seed)?;
            emit(&json!({ "graphs": graphs, "seed": seed, "result": r }), out.as_deref())
        }
    }
}

fn unify(a: UnifyArgs) -> Result<()> {
    let store = SliceStore::open(&a.store)?;
    let ids = if a.slices.is_empty() { store.ids()? } else { a.slices };
    if ids.is_empty() {
        bail!("no slices in {}", a.store.display());
    }
    let slices: Vec<Slice> = ids.iter().map(|id| store.load(id).with_context(|| format!("loading {id}"))).collect::<Result<_>>()?;
    let refs: Vec<&Slice> = slices.iter().collect();
    let u = unify_slices(&refs);
    let mut text = String::from("head\trelation\ttail\tdomain\tmultiplicity\tprovenance\n");
    for (e, p) in u.graph.edges().iter().zip(&u.provenance) {
        let prov: Vec<String> = p.iter().map(|(s, m)| format!("{s}:{m}")).collect();
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            u.graph.label(e.head),
            e.relation,
            u.graph.label(e.tail),
            e.domain,
            e.multiplicity,
            prov.join(",")
        ));
    }
    eprintln!("{} slices, {} nodes, {} edges", slices.len(), u.graph.node_count(), u.graph.edge_count());
    match a.out {
        Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn serve(a: ServeArgs) -> Result<()> {
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("bad --host/--port")?;
    let cfg = ServiceConfig { store_dir: a.store_dir, oracle: None };
    tokio::runtime::Runtime::new()?.block_on(lcm_service::run(addr, cfg)).map_err(anyhow::Error::msg)
}
