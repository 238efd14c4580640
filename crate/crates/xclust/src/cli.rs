//! The `xclust` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use xclust_core::synthgen::Scenario;
use xclust_core::*;

use crate::jsonl::{read_chain, write_chain};
use crate::manifest::{FileDigest, RunManifest, MANIFEST_FILE};
use crate::output::{to_dot, Cell, Format, Outputs};

const DEFAULT_OUT: &str = "xclust-out";

#[derive(Debug, Clone, Parser)]
#[command(
    name = "xclust",
    version,
    about = "Multi-input address clustering and cross-chain linkage analysis for UTXO chains"
)]
pub struct Cli {
    /// Worker threads for per-chain stages [default: all cores]
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    /// Directory for report files and manifest.json [default: xclust-out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Format of tabular reports
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Transactions, outputs, addresses and clusters per chain
    Stats {
        /// Chain files named <chainid>.jsonl
        #[arg(required = true)]
        chains: Vec<PathBuf>,
    },
    /// Addresses counted by the exact set of chains they appear on
    Venn {
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        /// Only regions inside this chain's address set
        #[arg(long)]
        universe: Option<String>,
    },
    /// Cluster each chain and export partitions and size histograms
    Cluster {
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        /// Histogram bin lower edges, starting at 1
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BIN_EDGES)]
        bins: Vec<u64>,
        /// Also export the transaction behind every merge
        #[arg(long)]
        provenance: bool,
    },
    /// Address novelty and address cluster novelty series
    Novelty {
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        /// Down-sample each series to at most this many points
        #[arg(long)]
        max_points: Option<usize>,
        /// Analyse all chains as one combination with this name
        #[arg(long)]
        combine: Option<String>,
    },
    /// Clusters of target chains merged through a source chain's clustering
    Impact {
        #[arg(long)]
        source: String,
        /// Target chain ids (repeat or comma-separate)
        #[arg(long = "target", required = true, value_delimiter = ',')]
        targets: Vec<String>,
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        /// Also write the co-cluster graph as Graphviz text
        #[arg(long)]
        dot: bool,
    },
    /// Cluster a combination of chains and compare it with a sub-combination
    Combine {
        /// Label of the combination of all given chains
        #[arg(long)]
        name: String,
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        /// Chain ids forming the coarser combination to compare against
        #[arg(long, value_delimiter = ',')]
        compare_to: Option<Vec<String>>,
        /// Label of the coarser combination
        #[arg(long, default_value = "baseline")]
        compare_name: String,
        #[arg(long)]
        max_points: Option<usize>,
    },
    /// Write synthetic chains and their ground truth
    Generate {
        /// Scenario JSON; missing fields take default values
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's entity count
        #[arg(long)]
        entities: Option<usize>,
    },
    /// Run the command recorded in a manifest again
    Rerun {
        manifest: PathBuf,
        /// Fail unless every output is byte-identical to the recorded one
        #[arg(long)]
        verify: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Stats { .. } => "stats",
            Command::Venn { .. } => "venn",
            Command::Cluster { .. } => "cluster",
            Command::Novelty { .. } => "novelty",
            Command::Impact { .. } => "impact",
            Command::Combine { .. } => "combine",
            Command::Generate { .. } => "generate",
            Command::Rerun { .. } => "rerun",
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<RunManifest>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&args)?;
    let argv = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    run(cli, argv)
}

pub fn run(cli: Cli, argv: Vec<String>) -> Result<RunManifest> {
    if let Command::Rerun { manifest, verify } = &cli.command {
        return rerun(manifest, *verify, &cli);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        pool = pool.num_threads(n as usize);
    }
    let pool = pool.build()?;
    pool.install(|| execute(&cli, argv))
}

struct Ctx {
    out: Outputs,
    inputs: Vec<PathBuf>,
    warnings: Vec<String>,
}

fn execute(cli: &Cli, argv: Vec<String>) -> Result<RunManifest> {
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut ctx = Ctx {
        out: Outputs::new(&out_dir, cli.format)?,
        inputs: Vec::new(),
        warnings: Vec::new(),
    };
    match &cli.command {
        Command::Stats { chains } => stats(&mut ctx, chains)?,
        Command::Venn { chains, universe } => venn(&mut ctx, chains, universe.as_deref())?,
        Command::Cluster {
            chains,
            bins,
            provenance,
        } => cluster(&mut ctx, chains, bins, *provenance)?,
        Command::Novelty {
            chains,
            max_points,
            combine,
        } => novelty(&mut ctx, chains, *max_points, combine.as_deref())?,
        Command::Impact {
            source,
            targets,
            chains,
            dot,
        } => impact(&mut ctx, source, targets, chains, *dot)?,
        Command::Combine {
            name,
            chains,
            compare_to,
            compare_name,
            max_points,
        } => combine_cmd(&mut ctx, name, chains, compare_to.as_deref(), compare_name, *max_points)?,
        Command::Generate {
            scenario,
            seed,
            entities,
        } => generate_cmd(&mut ctx, scenario.as_deref(), *seed, *entities)?,
        Command::Rerun { .. } => unreachable!("handled before the pool is built"),
    }
    finish(ctx, cli, argv)
}

fn finish(ctx: Ctx, cli: &Cli, argv: Vec<String>) -> Result<RunManifest> {
    let dir = ctx.out.dir().to_path_buf();
    let inputs = ctx
        .inputs
        .iter()
        .map(|p| {
            let abs = std::fs::canonicalize(p).unwrap_or_else(|_| p.clone());
            FileDigest::of(p, abs)
        })
        .collect::<Result<Vec<_>>>()?;
    let outputs = ctx
        .out
        .written()
        .iter()
        .map(|rel| FileDigest::of(&dir.join(rel), rel.clone()))
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        argv,
        out_dir: std::fs::canonicalize(&dir).unwrap_or(dir.clone()),
        inputs,
        parameters: serde_json::json!({
            "format": cli.format,
            "command": cli.command,
        }),
        outputs,
        warnings: ctx.warnings,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(dir.join(MANIFEST_FILE), text)?;
    if !manifest.warnings.is_empty() {
        println!(
            "{} warning(s) recorded in {}",
            manifest.warnings.len(),
            dir.join(MANIFEST_FILE).display()
        );
    }
    Ok(manifest)
}

fn rerun(path: &Path, verify: bool, outer: &Cli) -> Result<RunManifest> {
    let recorded = RunManifest::read(path)?;
    let mut args = vec![OsString::from("xclust")];
    args.extend(recorded.argv.iter().map(OsString::from));
    let mut cli = Cli::try_parse_from(&args).context("manifest argv no longer parses")?;
    if matches!(cli.command, Command::Rerun { .. }) {
        bail!("a manifest cannot rerun another rerun");
    }
    cli.out = Some(outer.out.clone().unwrap_or_else(|| recorded.out_dir.clone()));
    if outer.jobs.is_some() {
        cli.jobs = outer.jobs;
    }
    for input in &recorded.inputs {
        let now = FileDigest::of(&input.path, input.path.clone())
            .with_context(|| format!("recorded input {} is gone", input.path.display()))?;
        if now != *input {
            bail!("input {} changed since the recorded run", input.path.display());
        }
    }
    let fresh = run(cli, recorded.argv.clone())?;
    if verify {
        let bad = recorded.output_mismatches(&fresh);
        if !bad.is_empty() {
            let list: Vec<String> = bad.iter().map(|p| p.display().to_string()).collect();
            bail!("outputs differ from the recorded run: {}", list.join(", "));
        }
        println!("verified {} output(s) against {}", fresh.outputs.len(), path.display());
    }
    Ok(fresh)
}

// ------------------------------------------------------------------ loading

struct Loaded {
    snapshots: Vec<ChainSnapshot>,
}

impl Loaded {
    fn get(&self, id: &str) -> Result<&ChainSnapshot> {
        self.snapshots
            .iter()
            .find(|s| s.chain().as_str() == id)
            .ok_or_else(|| {
                let known: Vec<&str> = self.snapshots.iter().map(|s| s.chain().as_str()).collect();
                anyhow!("unknown chain id {id:?} (loaded: {})", known.join(", "))
            })
    }

    fn refs(&self) -> Vec<&ChainSnapshot> {
        self.snapshots.iter().collect()
    }

    fn partitions(&self) -> BTreeMap<ChainId, Partition> {
        self.snapshots
            .par_iter()
            .map(|s| (s.chain().clone(), cluster_stream(s.txs())))
            .collect()
    }
}

fn load(ctx: &mut Ctx, paths: &[PathBuf]) -> Result<Loaded> {
    let parsed: Vec<_> = paths
        .par_iter()
        .map(|p| read_chain(p).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    let mut seen = BTreeSet::new();
    let mut snapshots = Vec::with_capacity(parsed.len());
    for (path, (snap, warnings)) in paths.iter().zip(parsed) {
        if !seen.insert(snap.chain().clone()) {
            bail!("chain {} is given twice", snap.chain());
        }
        if let Some(first) = warnings.first() {
            ctx.warnings.push(format!(
                "{}: {} input address(es) spent without an earlier output, first {:?}",
                path.display(),
                warnings.len(),
                first
            ));
        }
        ctx.inputs.push(path.clone());
        snapshots.push(snap);
    }
    Ok(Loaded { snapshots })
}

/// File-name friendly version of a label.
fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

// ------------------------------------------------------------------ commands

const STATS_ROWS: [&str; 6] = [
    "Tip",
    "Transactions",
    "Transaction Outputs",
    "Addresses",
    "Address Clusters",
    "Non-Trivial Address Clusters",
];

fn stats(ctx: &mut Ctx, paths: &[PathBuf]) -> Result<()> {
    let loaded = load(ctx, paths)?;
    let columns: Vec<(String, ChainStats, PartitionStats, String)> = loaded
        .snapshots
        .par_iter()
        .map(|s| {
            let p = cluster_stream(s.txs());
            (
                s.chain().to_string(),
                chain_stats(s),
                partition_stats(&p),
                s.tip_note.clone().unwrap_or_default(),
            )
        })
        .collect();
    let mut header = vec!["metric"];
    header.extend(columns.iter().map(|c| c.0.as_str()));
    let cells: Vec<Vec<String>> = STATS_ROWS
        .iter()
        .enumerate()
        .map(|(row, name)| {
            let mut r = vec![name.to_string()];
            for (_, cs, ps, tip) in &columns {
                r.push(match row {
                    0 => tip.clone(),
                    1 => cs.n_txs.to_string(),
                    2 => cs.n_outputs.to_string(),
                    3 => cs.n_addresses.to_string(),
                    4 => ps.n_clusters.to_string(),
                    _ => ps.n_nontrivial.to_string(),
                });
            }
            r
        })
        .collect();

    let mut t = ctx.out.table("stats", &header)?;
    for (i, row) in cells.iter().enumerate() {
        t.row(row.iter().enumerate().map(|(j, v)| {
            if i == 0 || j == 0 {
                Cell::from(v.as_str())
            } else {
                Cell::Int(v.parse().expect("numeric"))
            }
        }))?;
    }
    t.finish()?;

    let widths: Vec<usize> = (0..header.len())
        .map(|j| {
            cells
                .iter()
                .map(|r| r[j].len())
                .chain([header[j].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |r: Vec<&str>| {
        r.iter()
            .enumerate()
            .map(|(j, v)| {
                if j == 0 {
                    format!("{v:<w$}", w = widths[j])
                } else {
                    format!("{v:>w$}", w = widths[j])
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut head = header.clone();
    head[0] = "";
    println!("{}", line(head));
    for r in &cells {
        println!("{}", line(r.iter().map(String::as_str).collect()));
    }
    Ok(())
}

fn venn(ctx: &mut Ctx, paths: &[PathBuf], universe: Option<&str>) -> Result<()> {
    let loaded = load(ctx, paths)?;
    let counts = shared_address_counts(&loaded.refs())?;
    let regions = match universe {
        Some(u) => {
            let id = loaded.get(u)?.chain().clone();
            counts.within(&id).expect("loaded chain")
        }
        None => counts.regions(),
    };
    let mut t = ctx.out.table("venn", &["chains", "addresses"])?;
    for (members, n) in &regions {
        let label: Vec<&str> = members.iter().map(|c| c.as_str()).collect();
        let label = label.join("&");
        println!("{label:<30} {n:>12}");
        t.row([Cell::from(label), Cell::from(*n)])?;
    }
    t.finish()
}

fn write_histogram(ctx: &mut Ctx, stem: &str, h: &SizeHistogram) -> Result<()> {
    let mut t = ctx.out.table(stem, &["bin_lo", "bin_hi", "clusters", "coverage"])?;
    for b in &h.bins {
        t.row([Cell::from(b.lo), Cell::from(b.hi), Cell::from(b.clusters), Cell::from(b.coverage)])?;
    }
    t.finish()
}

fn cluster(ctx: &mut Ctx, paths: &[PathBuf], bins: &[u64], provenance: bool) -> Result<()> {
    let loaded = load(ctx, paths)?;
    let parts = loaded.partitions();
    for (chain, p) in &parts {
        let stem = slug(chain.as_str());
        let mut t = ctx.out.table(&format!("{stem}.partition"), &["address", "cluster_rep"])?;
        for c in p.clusters() {
            for m in c.members() {
                t.row([m.as_str(), c.rep().as_str()])?;
            }
        }
        t.finish()?;
        let h = size_histogram(p, bins)?;
        write_histogram(ctx, &format!("{stem}.histogram"), &h)?;
        if provenance {
            let mut t = ctx
                .out
                .table(&format!("{stem}.merges"), &["cluster_rep", "tx_id", "left", "right"])?;
            for c in p.clusters() {
                for m in p.merges_in(c.index()) {
                    t.row([c.rep().as_str(), &*m.tx_id, m.left.as_str(), m.right.as_str()])?;
                }
            }
            t.finish()?;
        }
        let ps = partition_stats(p);
        println!(
            "{chain}: {} addresses, {} clusters ({} non-trivial), {:.2}% of addresses in clusters above 100",
            p.len(),
            ps.n_clusters,
            ps.n_nontrivial,
            100.0 * h.coverage_above(100)
        );
    }
    Ok(())
}

fn write_series(ctx: &mut Ctx, stem: &str, s: &NoveltySeries, max_points: Option<usize>) -> Result<()> {
    let s = match max_points {
        Some(m) => s.downsample(m),
        None => s.clone(),
    };
    let mut t = ctx.out.table(stem, &["ordinal", "raw", "sma"])?;
    for p in &s.points {
        t.row([Cell::from(p.ordinal), Cell::from(p.raw), Cell::from(p.sma)])?;
    }
    t.finish()
}

fn mean(s: &NoveltySeries) -> f64 {
    if s.is_empty() {
        0.0
    } else {
        s.raw_values().sum::<f64>() / s.len() as f64
    }
}

fn novelty_of(ctx: &mut Ctx, label: &str, txs: &[&TxRecord], max_points: Option<usize>) -> Result<()> {
    let a = address_novelty(txs.iter().copied());
    let c = cluster_novelty(txs.iter().copied());
    let stem = slug(label);
    write_series(ctx, &format!("{stem}.address_novelty"), &a, max_points)?;
    write_series(ctx, &format!("{stem}.cluster_novelty"), &c, max_points)?;
    println!(
        "{label}: mean address novelty {:.4} over {} txs, mean cluster novelty {:.4} over {} txs",
        mean(&a),
        a.len(),
        mean(&c),
        c.len()
    );
    Ok(())
}

fn novelty(ctx: &mut Ctx, paths: &[PathBuf], max_points: Option<usize>, combined: Option<&str>) -> Result<()> {
    let loaded = load(ctx, paths)?;
    match combined {
        Some(name) => {
            let refs = loaded.refs();
            let c = combine(&refs, name);
            novelty_of(ctx, name, &c.iter().collect::<Vec<_>>(), max_points)?;
        }
        None => {
            for s in &loaded.snapshots {
                novelty_of(ctx, s.chain().as_str(), &s.txs().iter().collect::<Vec<_>>(), max_points)?;
            }
        }
    }
    Ok(())
}

fn impact(ctx: &mut Ctx, source: &str, targets: &[String], paths: &[PathBuf], dot: bool) -> Result<()> {
    let loaded = load(ctx, paths)?;
    let source = loaded.get(source)?.chain().clone();
    let targets: Vec<ChainId> = targets
        .iter()
        .map(|t| loaded.get(t).map(|s| s.chain().clone()))
        .collect::<Result<_>>()?;
    let parts = loaded.partitions();
    let report = impact_report(parts.iter(), &source, &targets)?;
    ctx.out.json("impact.json", &report)?;

    let involved: BTreeSet<&ChainId> = targets.iter().chain([&source]).collect();
    let g = build_cocluster_graph(parts.iter().filter(|(c, _)| involved.contains(c)));
    let mut t = ctx.out.table(
        "edges",
        &["src_chain", "src_cluster", "dst_chain", "dst_cluster", "shared_count"],
    )?;
    for e in g.edges() {
        let (mut a, mut b) = (g.vertex(e.a), g.vertex(e.b));
        if b.chain == source {
            std::mem::swap(&mut a, &mut b);
        }
        t.row([
            Cell::from(a.chain.as_str()),
            Cell::from(a.cluster.as_str()),
            Cell::from(b.chain.as_str()),
            Cell::from(b.cluster.as_str()),
            Cell::from(e.shared.len()),
        ])?;
    }
    t.finish()?;
    if dot {
        ctx.out.text("graph.dot", &to_dot(&g))?;
    }

    for section in &report.targets {
        let s = &section.summary;
        println!(
            "{source} -> {}: {} components ({} star, {} non-star), {} of {} clusters impacted ({:.6}%)",
            section.target,
            s.components,
            s.stars,
            s.non_stars,
            s.impacted_clusters,
            s.target_clusters,
            100.0 * s.impacted_fraction
        );
    }
    let non_star = report.multi_hop.iter().filter(|c| !c.star).count();
    println!(
        "across all targets: {} components reached from {source} ({} non-star)",
        report.multi_hop.len(),
        non_star
    );
    Ok(())
}

fn combine_cmd(
    ctx: &mut Ctx,
    name: &str,
    paths: &[PathBuf],
    compare_to: Option<&[String]>,
    compare_name: &str,
    max_points: Option<usize>,
) -> Result<()> {
    let loaded = load(ctx, paths)?;
    let refs = loaded.refs();
    let baseline_refs: Option<Vec<&ChainSnapshot>> = compare_to
        .map(|ids| ids.iter().map(|id| loaded.get(id)).collect::<Result<_>>())
        .transpose()?;
    if compare_name == name {
        bail!("the combination and its comparison need different names");
    }

    let full = combine(&refs, name);
    let baseline: Option<CombinationOrdering> = baseline_refs.as_ref().map(|r| combine(r, compare_name));
    let (full_p, (baseline_p, chain_ps)) = rayon::join(
        || cluster_stream(full.iter()),
        || {
            rayon::join(
                || baseline.as_ref().map(|b| cluster_stream(b.iter())),
                || loaded.partitions(),
            )
        },
    );

    novelty_of(ctx, name, &full.iter().collect::<Vec<_>>(), max_points)?;
    write_histogram(
        ctx,
        &format!("{}.histogram", slug(name)),
        &size_histogram(&full_p, &DEFAULT_BIN_EDGES)?,
    )?;
    for (chain, p) in &chain_ps {
        if !is_improvement(&full_p, p) {
            bail!("analysis error: {name} does not improve the clustering of {chain}");
        }
    }

    let mut labelled: Vec<(&str, &Partition)> = chain_ps.iter().map(|(c, p)| (c.as_str(), p)).collect();
    if let (Some(b), Some(bp)) = (&baseline, &baseline_p) {
        novelty_of(ctx, compare_name, &b.iter().collect::<Vec<_>>(), max_points)?;
        let diff = cluster_diff(&full_p, bp).map_err(|e| match e {
            CombinationError::NotAnImprovement => {
                anyhow!("analysis error: {name} does not improve {compare_name}")
            }
            other => other.into(),
        })?;
        let mut t = ctx
            .out
            .table("diff", &["finer_rep", "n_coarser_clusters", "total_addresses"])?;
        for m in &diff.merged {
            t.row([
                Cell::from(m.finer_rep.as_str()),
                Cell::from(m.coarser_reps.len()),
                Cell::from(m.total_addresses),
            ])?;
        }
        t.finish()?;
        write_histogram(ctx, "diff_histogram", &diff.histogram)?;
        println!(
            "{name} vs {compare_name}: {} clusters unite two or more clusters ({} clusters lost)",
            diff.merged.len(),
            diff.clusters_lost()
        );
        labelled.push((compare_name, bp));
    }
    labelled.push((name, &full_p));
    let hasse = match improvement_hasse(&labelled) {
        Ok(h) => h,
        Err(CombinationError::Cycle { finer: a, coarser: b }) => {
            ctx.warnings.push(format!(
                "{a} and {b} improve each other (their address sets are disjoint); hasse.json covers the combinations only"
            ));
            improvement_hasse(&labelled[chain_ps.len()..]).map_err(|e| anyhow!("analysis error: {e}"))?
        }
        Err(e) => bail!("analysis error: {e}"),
    };
    ctx.out.json("hasse.json", &hasse)?;
    for e in &hasse.edges {
        println!("  {} improves {}", e.finer, e.coarser);
    }
    for (a, b) in &hasse.equal {
        println!("  {a} equals {b}");
    }
    Ok(())
}

fn generate_cmd(ctx: &mut Ctx, scenario: Option<&Path>, seed: Option<u64>, entities: Option<usize>) -> Result<()> {
    let mut s: Scenario = match scenario {
        Some(path) => {
            ctx.inputs.push(path.to_path_buf());
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))?
        }
        None => Scenario::default(),
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(n) = entities {
        s.n_entities = n;
    }
    let (snaps, gt) = generate(&s)?;
    let dir = ctx.out.dir().to_path_buf();
    let written: Vec<PathBuf> = snaps
        .par_iter()
        .map(|snap| write_chain(&dir, snap).map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;
    for (path, snap) in written.iter().zip(&snaps) {
        ctx.out.adopt(path);
        println!("{}: {} transactions", path.display(), snap.len());
    }
    ctx.out.json("ground_truth.json", &gt)?;
    ctx.out.json("scenario.json", &s)?;
    for e in &gt.expected {
        println!(
            "expected {} -> {}: {} components, {} impacted clusters",
            e.source, e.target, e.components, e.impacted_clusters
        );
    }
    Ok(())
}
