//! Input loading and the shared analysis pass behind the `sequence` and
//! `stats` commands.

use std::collections::VecDeque;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pattern_extract::{
    group_by_array, normalize_threads, ArrayTrace, ArrayTraces, DedupTable, GroupConfig,
    PatternGroup,
};
use crate::sequencer::{
    sequence_groups, CoverageCounts, Sequenced, SequencerConfig, ShapeSet, ShapeShares,
};
use crate::stats::{percent, ArrayFacts, CategoryPrefixes, StatsReport};
use crate::trace_io::{
    collect_inputs, open_input, parse_grouped, parse_raw, GroupedReader, ParseSummary, RawReader,
    RawTraceLine,
};
use crate::trace_model::Shape;

pub const RAW_SUFFIXES: [&str; 2] = [".atrace", ".atrace.gz"];
pub const GROUPED_SUFFIXES: [&str; 2] = [".agrp", ".agrp.gz"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Raw,
    Grouped,
}

/// Grouped files are recognised by name; everything else is read as raw.
pub fn input_kind(path: &Path) -> InputKind {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy())
        .unwrap_or_default();
    if GROUPED_SUFFIXES.iter().any(|s| name.ends_with(s)) {
        InputKind::Grouped
    } else {
        InputKind::Raw
    }
}

type Reader = Box<dyn BufRead + Send>;

/// Raw lines of several files, read back to back.
pub struct RawLines {
    files: VecDeque<PathBuf>,
    current: Option<RawReader<Reader>>,
    summary: ParseSummary,
}

impl RawLines {
    pub fn new(files: Vec<PathBuf>) -> RawLines {
        RawLines {
            files: files.into(),
            current: None,
            summary: ParseSummary::default(),
        }
    }

    /// Summary of every file finished so far.
    pub fn summary(&self) -> &ParseSummary {
        &self.summary
    }
}

impl Iterator for RawLines {
    type Item = Result<RawTraceLine>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(reader) = &mut self.current {
                if let Some(item) = reader.next() {
                    return Some(item);
                }
                let done = self.current.take().unwrap();
                self.summary.merge(&done.into_summary());
            }
            let path = self.files.pop_front()?;
            match open_input(&path) {
                Ok(r) => self.current = Some(parse_raw(r)),
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Blocks of several grouped files, read back to back.
pub struct GroupedFiles {
    files: VecDeque<PathBuf>,
    current: Option<GroupedReader<Reader>>,
    summary: ParseSummary,
}

impl Iterator for GroupedFiles {
    type Item = Result<ArrayTrace>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(reader) = &mut self.current {
                if let Some(item) = reader.next() {
                    return Some(item.map(ArrayTrace::from_block));
                }
                let done = self.current.take().unwrap();
                self.summary.merge(&done.into_summary());
            }
            let path = self.files.pop_front()?;
            match open_input(&path) {
                Ok(r) => self.current = Some(parse_grouped(r)),
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

/// Per-array traces from raw or grouped inputs.
pub enum TraceSource {
    Raw {
        traces: ArrayTraces,
        summary: ParseSummary,
    },
    Grouped(GroupedFiles),
}

impl TraceSource {
    /// Parse summary. For grouped input it is complete once iteration ends.
    pub fn summary(&self) -> &ParseSummary {
        match self {
            TraceSource::Raw { summary, .. } => summary,
            TraceSource::Grouped(g) => &g.summary,
        }
    }
}

impl Iterator for TraceSource {
    type Item = Result<ArrayTrace>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            TraceSource::Raw { traces, .. } => traces.next(),
            TraceSource::Grouped(g) => g.next(),
        }
    }
}

/// Expands `inputs` and opens them as one trace stream. Raw inputs are
/// grouped first; mixing raw and grouped inputs is rejected.
pub fn load_traces(inputs: &[PathBuf], config: &GroupConfig) -> Result<TraceSource> {
    let suffixes: Vec<&str> = RAW_SUFFIXES
        .iter()
        .chain(&GROUPED_SUFFIXES)
        .copied()
        .collect();
    let files = collect_inputs(inputs, &suffixes)?;
    let grouped = files
        .iter()
        .filter(|p| input_kind(p) == InputKind::Grouped)
        .count();
    if grouped > 0 && grouped < files.len() {
        return Err(Error::validation("cannot mix raw and grouped inputs"));
    }
    if grouped > 0 {
        return Ok(TraceSource::Grouped(GroupedFiles {
            files: files.into(),
            current: None,
            summary: ParseSummary::default(),
        }));
    }
    let mut lines = RawLines::new(files);
    let traces = group_by_array(&mut lines, config)?;
    Ok(TraceSource::Raw {
        traces,
        summary: lines.summary,
    })
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub shapes: ShapeSet,
    pub sequencer: SequencerConfig,
    pub prefixes: CategoryPrefixes,
    /// Number of independent partial reports merged at the end.
    pub shards: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            shapes: ShapeSet::Round2,
            sequencer: SequencerConfig::default(),
            prefixes: CategoryPrefixes::default(),
            shards: 1,
        }
    }
}

pub struct Analysis {
    pub report: StatsReport,
    pub groups: Vec<PatternGroup>,
    pub sequenced: Vec<Sequenced>,
}

const BATCH: usize = 4096;

#[derive(Default)]
struct Shard {
    report: StatsReport,
    dedup: DedupTable,
}

impl Shard {
    fn absorb(&mut self, traces: Vec<ArrayTrace>, prefixes: &CategoryPrefixes) {
        for t in traces {
            self.report.accumulate(&ArrayFacts::of(&t, prefixes));
            let pattern = normalize_threads(&t);
            self.dedup.insert(t.key, pattern);
        }
    }
}

/// Streams traces into per-shard reports and dedup tables, merges them,
/// sequences every distinct pattern and folds the pattern-level facts in.
/// Trace `i` goes to shard `i % shards`.
pub fn analyze<I>(traces: I, config: &AnalysisConfig) -> Result<Analysis>
where
    I: IntoIterator<Item = Result<ArrayTrace>>,
{
    let n = config.shards.max(1);
    let mut shards: Vec<Shard> = (0..n).map(|_| Shard::default()).collect();
    let mut batch: Vec<Vec<ArrayTrace>> = vec![Vec::new(); n];
    let mut filled = 0usize;

    let flush = |shards: &mut Vec<Shard>, batch: &mut Vec<Vec<ArrayTrace>>| {
        shards
            .par_iter_mut()
            .zip(batch.par_iter_mut())
            .for_each(|(shard, items)| shard.absorb(std::mem::take(items), &config.prefixes));
    };

    for (seen, trace) in traces.into_iter().enumerate() {
        batch[seen % n].push(trace?);
        filled += 1;
        if filled == BATCH {
            flush(&mut shards, &mut batch);
            filled = 0;
        }
    }
    flush(&mut shards, &mut batch);

    let mut report = StatsReport::default();
    let mut dedup = DedupTable::default();
    for shard in shards {
        report.merge(&shard.report);
        dedup.merge(shard.dedup);
    }
    let groups = dedup.finish();
    let sequenced = sequence_groups(&groups, config.shapes, &config.sequencer);

    let chunk = groups.len().div_ceil(n).max(1);
    let partials: Vec<StatsReport> = groups
        .par_chunks(chunk)
        .zip(sequenced.par_chunks(chunk))
        .map(|(gs, ss)| {
            let mut part = StatsReport::default();
            for (g, s) in gs.iter().zip(ss) {
                part.add_pattern(g.member_count(), &s.encoding());
            }
            part
        })
        .collect();
    for part in &partials {
        report.merge(part);
    }
    Ok(Analysis {
        report,
        groups,
        sequenced,
    })
}

#[derive(Debug, Serialize)]
pub struct CoverageShare {
    pub patterns: u64,
    pub share: f64,
    pub percent: f64,
}

impl CoverageShare {
    fn of(patterns: u64, total: u64) -> CoverageShare {
        CoverageShare {
            patterns,
            share: if total == 0 {
                0.0
            } else {
                patterns as f64 / total as f64
            },
            percent: percent(patterns, total),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CoverageSummary {
    pub full: CoverageShare,
    pub partial: CoverageShare,
    pub none: CoverageShare,
}

#[derive(Debug, Serialize)]
pub struct ShapeShare {
    pub shape: &'static str,
    pub accesses: u64,
    pub share: f64,
    pub percent: f64,
}

/// Pattern- and access-level results of one sequencing run.
#[derive(Debug, Serialize)]
pub struct SequenceSummary {
    pub round: u8,
    pub n_patterns: u64,
    pub n_arrays: u64,
    pub n_accesses: u64,
    pub coverage: CoverageSummary,
    /// Shapes that received at least one access, in tag order.
    pub shape_shares: Vec<ShapeShare>,
}

impl SequenceSummary {
    pub fn new(round: u8, report: &StatsReport) -> SequenceSummary {
        let c: &CoverageCounts = &report.pattern_coverage;
        let s: &ShapeShares = &report.shape_shares;
        SequenceSummary {
            round,
            n_patterns: report.pattern_table.n_patterns,
            n_arrays: report.n_arrays,
            n_accesses: report.n_accesses,
            coverage: CoverageSummary {
                full: CoverageShare::of(c.full, c.total()),
                partial: CoverageShare::of(c.partial, c.total()),
                none: CoverageShare::of(c.none, c.total()),
            },
            shape_shares: Shape::ALL
                .iter()
                .filter_map(|&shape| {
                    let accesses = *s.accesses.get(&shape)?;
                    Some(ShapeShare {
                        shape: shape.name(),
                        accesses,
                        share: s.fraction(shape),
                        percent: percent(accesses, s.total),
                    })
                })
                .collect(),
        }
    }
}
