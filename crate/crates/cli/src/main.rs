use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use arraytrace::pattern_extract::{group_by_array, GroupConfig};
use arraytrace::pipeline::{
    analyze, load_traces, AnalysisConfig, RawLines, SequenceSummary, RAW_SUFFIXES,
};
use arraytrace::sequencer::{RenderOptions, SequenceRecord, ShapeSet};
use arraytrace::stats::{scope_of, write_csvs, CategoryPrefixes, Scope, UnresolvedPolicy};
use arraytrace::synth::{generate, perturb, CorpusSpec};
use arraytrace::trace_io::{collect_inputs, open_input, parse_class_map, ParseSummary};

/// Array access trace analysis.
#[derive(Parser)]
#[command(name = "arraytrace", version)]
struct Cli {
    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// More log output on standard error (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Grouping {
    /// Directory for spill files.
    #[arg(long, env = "ARRAYTRACE_TMP")]
    tmp: Option<PathBuf>,

    /// Record buffer budget in bytes; accepts K, M and G suffixes.
    #[arg(long, value_parser = parse_size, default_value = "256M")]
    mem_budget: usize,
}

impl Grouping {
    fn config(&self) -> GroupConfig {
        GroupConfig {
            spill_dir: self.tmp.clone(),
            mem_budget: self.mem_budget,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Round {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

impl Round {
    fn shapes(self) -> ShapeSet {
        match self {
            Round::One => ShapeSet::Round1,
            Round::Two => ShapeSet::Round2,
        }
    }

    fn number(self) -> u8 {
        match self {
            Round::One => 1,
            Round::Two => 2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Unresolved {
    Include,
    Exclude,
    Separate,
}

#[derive(Subcommand)]
enum Command {
    /// Group raw traces into one block per array.
    Group {
        /// Raw trace files or directories.
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        grouping: Grouping,
    },
    /// Sequence every distinct access pattern.
    Sequence {
        /// Grouped or raw trace files or directories.
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "2")]
        round: Round,
        /// Print the whole pattern length in every slice.
        #[arg(long)]
        paper_compat_length: bool,
        /// One JSON record per distinct pattern.
        #[arg(short, long)]
        out: PathBuf,
        /// Coverage and shape-share summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        grouping: Grouping,
    },
    /// Compute array usage statistics.
    Stats {
        /// Grouped or raw trace files or directories.
        inputs: Vec<PathBuf>,
        /// Report JSON path.
        #[arg(short, long)]
        out: PathBuf,
        /// Directory for the CSV tables.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
        /// Corpus name used in the CSV tables.
        #[arg(long, default_value = "corpus")]
        corpus: String,
        #[arg(long, value_enum, default_value = "2")]
        round: Round,
        /// Class map used by the scope filter.
        #[arg(long, requires = "scope_prefix")]
        class_map: Option<PathBuf>,
        /// Keep only arrays accessed exclusively from classes with this prefix.
        #[arg(long, requires = "class_map")]
        scope_prefix: Option<String>,
        /// Keep the arrays the scope filter rejects instead.
        #[arg(long, requires = "scope_prefix")]
        scope_complement: bool,
        /// Handling of arrays touched by classes missing from the class map.
        #[arg(long, value_enum, default_value = "exclude")]
        unresolved: Unresolved,
        /// Element class prefixes counted as the Java standard library.
        #[arg(long, value_delimiter = ',')]
        java_prefixes: Option<Vec<String>>,
        /// Element class prefixes counted as the Scala standard library.
        #[arg(long, value_delimiter = ',')]
        scala_prefixes: Option<Vec<String>>,
        #[command(flatten)]
        grouping: Grouping,
    },
    /// Generate a synthetic raw trace and its ground truth.
    Synth {
        /// Corpus spec (JSON).
        spec: PathBuf,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the spec's noise level.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
}

fn parse_size(s: &str) -> Result<usize, String> {
    let (digits, mult) = match s.chars().last() {
        Some('K' | 'k') => (&s[..s.len() - 1], 1usize << 10),
        Some('M' | 'm') => (&s[..s.len() - 1], 1 << 20),
        Some('G' | 'g') => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    digits
        .parse::<usize>()
        .ok()
        .and_then(|n| n.checked_mul(mult))
        .ok_or_else(|| format!("bad size {s:?}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn report_parse(summary: &ParseSummary) {
    if summary.malformed > 0 {
        warn!("skipped {} malformed lines", summary.malformed);
        for d in &summary.diagnostics {
            warn!("line {}: {}", d.line, d.message);
        }
    }
}

fn cmd_group(inputs: &[PathBuf], out: &Path, grouping: &Grouping) -> Result<()> {
    let files = collect_inputs(inputs, &RAW_SUFFIXES)?;
    let mut lines = RawLines::new(files);
    let traces = group_by_array(&mut lines, &grouping.config())?;
    report_parse(lines.summary());
    let stats = traces.stats();
    let mut w = create(out)?;
    let mut blocks = 0u64;
    for trace in traces {
        let block = trace?.to_block();
        block.write_to(&mut w)?;
        blocks += 1;
    }
    w.flush()?;
    info!(
        "grouped {} records into {blocks} arrays ({} spilled runs)",
        stats.records, stats.runs_spilled
    );
    Ok(())
}

fn cmd_sequence(
    inputs: &[PathBuf],
    round: Round,
    paper_compat_length: bool,
    out: &Path,
    summary_path: Option<&Path>,
    grouping: &Grouping,
    shards: usize,
) -> Result<()> {
    let config = AnalysisConfig {
        shapes: round.shapes(),
        shards,
        ..AnalysisConfig::default()
    };
    let mut source = load_traces(inputs, &grouping.config())?;
    let analysis = analyze(&mut source, &config)?;
    report_parse(source.summary());

    let opts = RenderOptions {
        paper_compat_length,
    };
    let mut w = create(out)?;
    for (group, seq) in analysis.groups.iter().zip(&analysis.sequenced) {
        serde_json::to_writer(&mut w, &SequenceRecord::new(group, seq, opts))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let summary = SequenceSummary::new(round.number(), &analysis.report);
    let c = &analysis.report.pattern_coverage;
    info!(
        "{} patterns: {} full, {} partial, {} none",
        c.total(),
        c.full,
        c.partial,
        c.none
    );
    if let Some(path) = summary_path {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &summary)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    Ok(())
}

struct StatsArgs<'a> {
    inputs: &'a [PathBuf],
    out: &'a Path,
    csv_dir: Option<&'a Path>,
    corpus: &'a str,
    round: Round,
    class_map: Option<&'a Path>,
    scope_prefix: Option<&'a str>,
    scope_complement: bool,
    unresolved: Unresolved,
    prefixes: CategoryPrefixes,
    grouping: &'a Grouping,
    shards: usize,
}

fn cmd_stats(a: StatsArgs) -> Result<()> {
    let config = AnalysisConfig {
        shapes: a.round.shapes(),
        prefixes: a.prefixes,
        shards: a.shards,
        ..AnalysisConfig::default()
    };
    let scope = match (a.class_map, a.scope_prefix) {
        (Some(path), Some(prefix)) => {
            let (map, summary) = parse_class_map(open_input(path)?)?;
            report_parse(&summary);
            if !map.collisions.is_empty() {
                warn!("class map has {} hash collisions", map.collisions.len());
            }
            Some((map, prefix.to_owned()))
        }
        _ => None,
    };
    let policy = match a.unresolved {
        Unresolved::Include => UnresolvedPolicy::Include,
        Unresolved::Exclude => UnresolvedPolicy::Exclude,
        Unresolved::Separate => UnresolvedPolicy::Separate,
    };
    let wanted = if a.scope_complement {
        Scope::OutOfScope
    } else {
        Scope::InScope
    };

    let mut source = load_traces(a.inputs, &a.grouping.config())?;
    let (mut dropped, mut separated) = (0u64, 0u64);
    let filtered = source.by_ref().filter(|item| {
        let (Ok(trace), Some((map, prefix))) = (item, &scope) else {
            return true;
        };
        match scope_of(trace, map, prefix, policy) {
            s if s == wanted => true,
            Scope::Unresolved => {
                separated += 1;
                false
            }
            _ => {
                dropped += 1;
                false
            }
        }
    });
    let analysis = analyze(filtered, &config)?;
    report_parse(source.summary());
    if scope.is_some() {
        info!("scope filter removed {dropped} arrays, {separated} unresolved arrays set aside");
    }

    let mut w = create(a.out)?;
    analysis.report.write_json(&mut w)?;
    w.flush()?;
    if let Some(dir) = a.csv_dir {
        write_csvs(&analysis.report, a.corpus, dir)?;
    }
    info!(
        "{} arrays, {} accesses, {} patterns",
        analysis.report.n_arrays,
        analysis.report.n_accesses,
        analysis.report.pattern_table.n_patterns
    );
    Ok(())
}

fn cmd_synth(
    spec: &Path,
    seed: Option<u64>,
    noise: Option<f64>,
    out: &Path,
    truth: &Path,
) -> Result<()> {
    let mut spec = CorpusSpec::load(spec)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(noise) = noise {
        spec = perturb(&spec, noise)?;
    }
    let mut raw = create(out)?;
    let mut truth = create(truth)?;
    let summary = generate(&spec, &mut raw, &mut truth)?;
    info!(
        "generated {} arrays, {} accesses",
        summary.arrays, summary.lines
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .context("cannot start worker pool")?;

    match &cli.command {
        Command::Group {
            inputs,
            out,
            grouping,
        } => cmd_group(inputs, out, grouping),
        Command::Sequence {
            inputs,
            round,
            paper_compat_length,
            out,
            summary,
            grouping,
        } => cmd_sequence(
            inputs,
            *round,
            *paper_compat_length,
            out,
            summary.as_deref(),
            grouping,
            workers,
        ),
        Command::Stats {
            inputs,
            out,
            csv_dir,
            corpus,
            round,
            class_map,
            scope_prefix,
            scope_complement,
            unresolved,
            java_prefixes,
            scala_prefixes,
            grouping,
        } => {
            let mut prefixes = CategoryPrefixes::default();
            if let Some(p) = java_prefixes {
                prefixes.java = p.clone();
            }
            if let Some(p) = scala_prefixes {
                prefixes.scala = p.clone();
            }
            cmd_stats(StatsArgs {
                inputs,
                out,
                csv_dir: csv_dir.as_deref(),
                corpus,
                round: *round,
                class_map: class_map.as_deref(),
                scope_prefix: scope_prefix.as_deref(),
                scope_complement: *scope_complement,
                unresolved: *unresolved,
                prefixes,
                grouping,
                shards: workers,
            })
        }
        Command::Synth {
            spec,
            seed,
            noise,
            out,
            truth,
        } => cmd_synth(spec, *seed, *noise, out, truth),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<arraytrace::Error>() {
            return e.exit_code() as u8;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<serde_json::Error>() {
            return if e.is_io() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.ends_with(&cause) {
                    msg = if msg.is_empty() {
                        cause
                    } else {
                        format!("{msg}: {cause}")
                    };
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
