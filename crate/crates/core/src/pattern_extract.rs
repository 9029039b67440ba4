//! From raw access streams to per-array traces and deduplicated patterns.
//!
//! [`group_by_array`] is an external merge sort keyed on [`ArrayKey`]: input
//! records are buffered up to a memory budget, each full buffer is stably
//! sorted and spilled as a run, and the runs are k-way merged. Ties between
//! runs are broken by run order, so each array keeps its original record
//! order. Output is ordered by type descriptor, then hash token.

use std::cmp::{Ordering, Reverse};
use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;

use rayon::slice::ParallelSliceMut;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::trace_io::{GroupedArrayBlock, GroupedRecord, RawTraceLine};
use crate::trace_model::{
    AccessPattern, AccessRecord, ArrayKey, Mode, PatternEntry, TypeDescriptor,
};

/// Every record observed for one array key, in stream order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayTrace {
    pub key: ArrayKey,
    pub records: Vec<AccessRecord>,
    pub distinct_classes: BTreeSet<u32>,
    pub distinct_threads: BTreeSet<u64>,
    /// Distinct observed lengths, first-seen order.
    pub lengths_seen: Vec<u64>,
}

impl ArrayTrace {
    pub fn new(key: ArrayKey, records: Vec<AccessRecord>) -> ArrayTrace {
        let mut distinct_classes = BTreeSet::new();
        let mut distinct_threads = BTreeSet::new();
        let mut lengths_seen = Vec::new();
        for r in &records {
            distinct_classes.insert(r.class_hash);
            distinct_threads.insert(r.thread);
            if !lengths_seen.contains(&r.length) {
                lengths_seen.push(r.length);
            }
        }
        ArrayTrace {
            key,
            records,
            distinct_classes,
            distinct_threads,
            lengths_seen,
        }
    }

    /// Rebuilds a trace from a grouped block. Every record gets the header
    /// length since the grouped format does not keep per-access lengths.
    pub fn from_block(block: GroupedArrayBlock) -> ArrayTrace {
        let len = block.header_length;
        let records = block.records.iter().map(|r| r.to_record(len)).collect();
        ArrayTrace::new(block.key, records)
    }

    pub fn to_block(&self) -> GroupedArrayBlock {
        GroupedArrayBlock {
            key: self.key.clone(),
            header_length: self.records.first().map_or(0, |r| r.length),
            records: self.records.iter().map(GroupedRecord::from).collect(),
        }
    }

    pub fn max_length(&self) -> u64 {
        self.lengths_seen.iter().copied().max().unwrap_or(0)
    }
}

/// Settings for [`group_by_array`].
#[derive(Debug, Clone)]
pub struct GroupConfig {
    /// Parent directory for spill runs; the system temp dir when unset.
    pub spill_dir: Option<PathBuf>,
    /// Approximate bytes of record buffer held in memory at once.
    pub mem_budget: usize,
}

impl Default for GroupConfig {
    fn default() -> Self {
        GroupConfig {
            spill_dir: None,
            mem_budget: 256 << 20,
        }
    }
}

/// Budget accounting per buffered record, including sort scratch space.
const BYTES_PER_RECORD: usize = 2 * std::mem::size_of::<Buffered>();
const RUN_READ_BUFFER: usize = 64 << 10;
const MIN_RECORDS_PER_RUN: usize = 1024;
const MAX_FAN_IN: usize = 128;
const SPILLED_RECORD_BYTES: usize = 45;

pub fn min_mem_budget() -> usize {
    MIN_RECORDS_PER_RUN * BYTES_PER_RECORD + 2 * RUN_READ_BUFFER
}

#[derive(Debug, Clone, Copy)]
struct Buffered {
    type_id: u32,
    hash: u32,
    rec: AccessRecord,
}

impl Buffered {
    fn encode(&self, out: &mut impl Write) -> io::Result<()> {
        let mut buf = [0u8; SPILLED_RECORD_BYTES];
        buf[0..4].copy_from_slice(&self.type_id.to_le_bytes());
        buf[4..8].copy_from_slice(&self.hash.to_le_bytes());
        buf[8] = matches!(self.rec.mode, Mode::Write) as u8;
        buf[9..17].copy_from_slice(&self.rec.index.to_le_bytes());
        buf[17..25].copy_from_slice(&self.rec.length.to_le_bytes());
        buf[25..33].copy_from_slice(&self.rec.thread.to_le_bytes());
        buf[33..41].copy_from_slice(&self.rec.line.to_le_bytes());
        buf[41..45].copy_from_slice(&self.rec.class_hash.to_le_bytes());
        out.write_all(&buf)
    }

    fn decode(input: &mut impl Read) -> io::Result<Option<Buffered>> {
        let mut buf = [0u8; SPILLED_RECORD_BYTES];
        match input.read_exact(&mut buf) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e),
        }
        let u32_at = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(buf[i..i + 8].try_into().unwrap());
        Ok(Some(Buffered {
            type_id: u32_at(0),
            hash: u32_at(4),
            rec: AccessRecord {
                mode: if buf[8] == 1 { Mode::Write } else { Mode::Read },
                index: u64_at(9) as i64,
                length: u64_at(17),
                thread: u64_at(25),
                line: u64_at(33) as i64,
                class_hash: u32_at(41),
            },
        }))
    }
}

#[derive(Default)]
struct TypeTable {
    ids: HashMap<String, u32>,
    types: Vec<TypeDescriptor>,
}

impl TypeTable {
    fn intern(&mut self, ty: &TypeDescriptor) -> u32 {
        if let Some(&id) = self.ids.get(ty.raw()) {
            return id;
        }
        let id = self.types.len() as u32;
        self.ids.insert(ty.raw().to_owned(), id);
        self.types.push(ty.clone());
        id
    }

    fn cmp(&self, a: &Buffered, b: &Buffered) -> Ordering {
        if a.type_id == b.type_id {
            return a.hash.cmp(&b.hash);
        }
        self.types[a.type_id as usize]
            .raw()
            .cmp(self.types[b.type_id as usize].raw())
            .then(a.hash.cmp(&b.hash))
    }

    /// Sort rank of each type id by descriptor text.
    fn ranks(&self) -> Vec<u32> {
        let mut order: Vec<u32> = (0..self.types.len() as u32).collect();
        order.sort_by(|&a, &b| {
            self.types[a as usize]
                .raw()
                .cmp(self.types[b as usize].raw())
        });
        let mut rank = vec![0; order.len()];
        for (r, id) in order.into_iter().enumerate() {
            rank[id as usize] = r as u32;
        }
        rank
    }
}

/// Counters from a grouping pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupStats {
    pub records: u64,
    pub runs_spilled: u64,
}

/// Groups a raw stream into one [`ArrayTrace`] per key.
///
/// The input is consumed eagerly; traces are then produced lazily by the
/// returned iterator, which owns any spill files and removes them on drop.
pub fn group_by_array<I>(lines: I, config: &GroupConfig) -> Result<ArrayTraces>
where
    I: IntoIterator<Item = Result<RawTraceLine>>,
{
    if config.mem_budget < min_mem_budget() {
        return Err(Error::resource(format!(
            "memory budget of {} bytes is below the minimum of {} bytes",
            config.mem_budget,
            min_mem_budget()
        )));
    }
    let capacity = (config.mem_budget / BYTES_PER_RECORD).max(MIN_RECORDS_PER_RUN);
    let mut table = TypeTable::default();
    let mut buffer: Vec<Buffered> = Vec::new();
    let mut runs: Vec<PathBuf> = Vec::new();
    let mut spill: Option<tempfile::TempDir> = None;
    let mut stats = GroupStats::default();

    for line in lines {
        let line = line?;
        stats.records += 1;
        let type_id = table.intern(&line.key.ty);
        buffer.push(Buffered {
            type_id,
            hash: line.key.hash_token,
            rec: line.rec,
        });
        if buffer.len() >= capacity {
            let dir = match &spill {
                Some(d) => d,
                None => spill.insert(make_spill_dir(config)?),
            };
            buffer.par_sort_by(|a, b| table.cmp(a, b));
            let path = dir.path().join(format!("run-{:06}", runs.len()));
            write_run(&path, buffer.drain(..))?;
            runs.push(path);
            stats.runs_spilled += 1;
        }
    }
    buffer.par_sort_by(|a, b| table.cmp(a, b));
    let rank = table.ranks();

    let source = if runs.is_empty() {
        Source::Memory(buffer.into_iter())
    } else {
        let dir = spill.as_ref().expect("spill dir exists when runs exist");
        if !buffer.is_empty() {
            let path = dir.path().join(format!("run-{:06}", runs.len()));
            write_run(&path, buffer.drain(..))?;
            runs.push(path);
            stats.runs_spilled += 1;
        }
        drop(buffer);
        let fan_in = ((config.mem_budget / 2) / RUN_READ_BUFFER).clamp(2, MAX_FAN_IN);
        let mut generation = 0;
        while runs.len() > fan_in {
            let mut next = Vec::new();
            for (i, chunk) in runs.chunks(fan_in).enumerate() {
                let path = dir.path().join(format!("merge-{generation}-{i:06}"));
                let mut merger = Merger::open(chunk, &rank)?;
                let mut out = BufWriter::with_capacity(RUN_READ_BUFFER, File::create(&path)?);
                while let Some(item) = merger.pop()? {
                    item.encode(&mut out)?;
                }
                out.flush()?;
                for p in chunk {
                    std::fs::remove_file(p)?;
                }
                next.push(path);
            }
            runs = next;
            generation += 1;
        }
        Source::Merge(Merger::open(&runs, &rank)?)
    };

    Ok(ArrayTraces {
        types: table.types,
        source,
        pending: None,
        stats,
        _spill: spill,
    })
}

fn make_spill_dir(config: &GroupConfig) -> Result<tempfile::TempDir> {
    let builder = {
        let mut b = tempfile::Builder::new();
        b.prefix("arraytrace-spill-");
        b
    };
    Ok(match &config.spill_dir {
        Some(parent) => {
            std::fs::create_dir_all(parent)?;
            builder.tempdir_in(parent)?
        }
        None => builder.tempdir()?,
    })
}

fn write_run(path: &PathBuf, items: impl Iterator<Item = Buffered>) -> Result<()> {
    let mut out = BufWriter::with_capacity(RUN_READ_BUFFER, File::create(path)?);
    for item in items {
        item.encode(&mut out)?;
    }
    out.flush()?;
    Ok(())
}

struct RunReader {
    input: BufReader<File>,
}

struct Merger {
    readers: Vec<RunReader>,
    heads: Vec<Option<Buffered>>,
    heap: BinaryHeap<Reverse<(u64, usize)>>,
    rank: Vec<u32>,
}

impl Merger {
    fn open(paths: &[PathBuf], rank: &[u32]) -> Result<Merger> {
        let mut merger = Merger {
            readers: Vec::with_capacity(paths.len()),
            heads: Vec::with_capacity(paths.len()),
            heap: BinaryHeap::with_capacity(paths.len()),
            rank: rank.to_vec(),
        };
        for (i, p) in paths.iter().enumerate() {
            let mut reader = RunReader {
                input: BufReader::with_capacity(RUN_READ_BUFFER, File::open(p)?),
            };
            let head = Buffered::decode(&mut reader.input)?;
            if let Some(h) = &head {
                merger.heap.push(Reverse((merger.sort_key(h), i)));
            }
            merger.readers.push(reader);
            merger.heads.push(head);
        }
        Ok(merger)
    }

    fn sort_key(&self, b: &Buffered) -> u64 {
        ((self.rank[b.type_id as usize] as u64) << 32) | b.hash as u64
    }

    fn pop(&mut self) -> Result<Option<Buffered>> {
        let Some(Reverse((_, run))) = self.heap.pop() else {
            return Ok(None);
        };
        let item = self.heads[run].take().expect("heap entry has a head");
        let next = Buffered::decode(&mut self.readers[run].input)?;
        if let Some(n) = &next {
            self.heap.push(Reverse((self.sort_key(n), run)));
        }
        self.heads[run] = next;
        Ok(Some(item))
    }
}

enum Source {
    Memory(std::vec::IntoIter<Buffered>),
    Merge(Merger),
}

impl Source {
    fn next(&mut self) -> Result<Option<Buffered>> {
        match self {
            Source::Memory(it) => Ok(it.next()),
            Source::Merge(m) => m.pop(),
        }
    }
}

/// Iterator returned by [`group_by_array`].
pub struct ArrayTraces {
    types: Vec<TypeDescriptor>,
    source: Source,
    pending: Option<Buffered>,
    stats: GroupStats,
    _spill: Option<tempfile::TempDir>,
}

impl ArrayTraces {
    pub fn stats(&self) -> GroupStats {
        self.stats
    }

    fn next_trace(&mut self) -> Result<Option<ArrayTrace>> {
        let first = match self.pending.take() {
            Some(b) => b,
            None => match self.source.next()? {
                Some(b) => b,
                None => return Ok(None),
            },
        };
        let mut records = vec![first.rec];
        loop {
            match self.source.next()? {
                Some(b) if b.type_id == first.type_id && b.hash == first.hash => {
                    records.push(b.rec)
                }
                Some(b) => {
                    self.pending = Some(b);
                    break;
                }
                None => break,
            }
        }
        let key = ArrayKey::new(self.types[first.type_id as usize].clone(), first.hash);
        Ok(Some(ArrayTrace::new(key, records)))
    }
}

impl Iterator for ArrayTraces {
    type Item = Result<ArrayTrace>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_trace().transpose()
    }
}

/// Renumbers raw thread ids 1, 2, ... by first appearance.
pub fn normalize_threads(trace: &ArrayTrace) -> AccessPattern {
    normalize_entries(trace.records.iter().map(|r| (r.index, r.mode, r.thread)))
}

pub fn normalize_entries(items: impl IntoIterator<Item = (i64, Mode, u64)>) -> AccessPattern {
    let mut seen: Vec<u64> = Vec::new();
    let entries = items
        .into_iter()
        .map(|(index, mode, thread)| {
            let norm = match seen.iter().position(|&t| t == thread) {
                Some(p) => p + 1,
                None => {
                    seen.push(thread);
                    seen.len()
                }
            };
            PatternEntry::new(index, mode, norm as u32)
        })
        .collect();
    AccessPattern::from_normalized(entries)
}

/// 128-bit content digest of a normalized pattern.
pub type PatternDigest = [u8; 16];

pub fn pattern_digest(pattern: &AccessPattern) -> PatternDigest {
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 13];
    for e in pattern.entries() {
        buf[0..8].copy_from_slice(&e.index.to_le_bytes());
        buf[8] = matches!(e.mode, Mode::Write) as u8;
        buf[9..13].copy_from_slice(&e.thread.to_le_bytes());
        hasher.update(buf);
    }
    let full = hasher.finalize();
    full[..16].try_into().unwrap()
}

/// All arrays sharing one normalized pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternGroup {
    pub pattern_hash: PatternDigest,
    pub pattern: AccessPattern,
    /// Sorted member keys.
    pub member_keys: Vec<ArrayKey>,
}

impl PatternGroup {
    pub fn member_count(&self) -> u64 {
        self.member_keys.len() as u64
    }

    /// Accesses made through this pattern summed over all members.
    pub fn total_accesses(&self) -> u64 {
        self.pattern.len() as u64 * self.member_count()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.pattern_hash)
    }
}

/// Mergeable dedup table. Patterns with equal digests but different content
/// are kept apart.
#[derive(Debug, Default, Clone)]
pub struct DedupTable {
    groups: HashMap<PatternDigest, Vec<PatternGroup>>,
}

impl DedupTable {
    pub fn insert(&mut self, key: ArrayKey, pattern: AccessPattern) {
        let digest = pattern_digest(&pattern);
        self.insert_with_digest(digest, key, pattern);
    }

    /// Exposed so collision handling can be exercised with forged digests.
    pub fn insert_with_digest(
        &mut self,
        digest: PatternDigest,
        key: ArrayKey,
        pattern: AccessPattern,
    ) {
        let bucket = match self.groups.entry(digest) {
            Entry::Occupied(o) => o.into_mut(),
            Entry::Vacant(v) => v.insert(Vec::new()),
        };
        match bucket.iter_mut().find(|g| g.pattern == pattern) {
            Some(g) => g.member_keys.push(key),
            None => bucket.push(PatternGroup {
                pattern_hash: digest,
                pattern,
                member_keys: vec![key],
            }),
        }
    }

    pub fn merge(&mut self, other: DedupTable) {
        for (digest, groups) in other.groups {
            for group in groups {
                let bucket = self.groups.entry(digest).or_default();
                match bucket.iter_mut().find(|g| g.pattern == group.pattern) {
                    Some(g) => g.member_keys.extend(group.member_keys),
                    None => bucket.push(group),
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Groups in digest order (content order within a shared digest), each
    /// with sorted members.
    pub fn finish(self) -> Vec<PatternGroup> {
        let mut all: Vec<PatternGroup> = self.groups.into_values().flatten().collect();
        for g in &mut all {
            g.member_keys.sort();
        }
        all.sort_by(|a, b| {
            a.pattern_hash
                .cmp(&b.pattern_hash)
                .then_with(|| a.pattern.cmp(&b.pattern))
        });
        all
    }
}

pub fn dedup_patterns(
    items: impl IntoIterator<Item = (ArrayKey, AccessPattern)>,
) -> Vec<PatternGroup> {
    let mut table = DedupTable::default();
    for (key, pattern) in items {
        table.insert(key, pattern);
    }
    table.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LengthDirection {
    GrowOnly,
    ShrinkOnly,
    Mixed,
}

/// Signal that a key most likely merges several runtime arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LengthChangeReport {
    pub key: ArrayKey,
    pub n_lengths: usize,
    pub n_transitions: usize,
    pub direction: LengthDirection,
}

pub fn detect_length_changes(trace: &ArrayTrace) -> Option<LengthChangeReport> {
    if trace.lengths_seen.len() < 2 {
        return None;
    }
    let (mut grows, mut shrinks) = (0usize, 0usize);
    for pair in trace.records.windows(2) {
        match pair[1].length.cmp(&pair[0].length) {
            Ordering::Greater => grows += 1,
            Ordering::Less => shrinks += 1,
            Ordering::Equal => {}
        }
    }
    let direction = match (grows, shrinks) {
        (_, 0) => LengthDirection::GrowOnly,
        (0, _) => LengthDirection::ShrinkOnly,
        _ => LengthDirection::Mixed,
    };
    Some(LengthChangeReport {
        key: trace.key.clone(),
        n_lengths: trace.lengths_seen.len(),
        n_transitions: grows + shrinks,
        direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_io::parse_raw;

    fn line(key: &str, mode: Mode, index: i64, length: u64, thread: u64) -> RawTraceLine {
        RawTraceLine {
            key: ArrayKey::parse(key).unwrap(),
            rec: AccessRecord {
                mode,
                index,
                length,
                thread,
                line: 1,
                class_hash: 7,
            },
        }
    }

    fn trace_with(lengths: &[u64], threads: &[u64]) -> ArrayTrace {
        let records = lengths
            .iter()
            .zip(threads)
            .enumerate()
            .map(|(i, (&length, &thread))| AccessRecord {
                mode: Mode::Read,
                index: i as i64,
                length,
                thread,
                line: -1,
                class_hash: 0,
            })
            .collect();
        ArrayTrace::new(ArrayKey::parse("[I@1").unwrap(), records)
    }

    #[test]
    fn group_preserves_relative_order() {
        let input = vec![
            Ok(line("[I@a", Mode::Write, 0, 4, 1)),
            Ok(line("[I@b", Mode::Write, 9, 10, 1)),
            Ok(line("[I@a", Mode::Read, 1, 4, 1)),
        ];
        let traces: Vec<_> = group_by_array(input, &GroupConfig::default())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(traces.len(), 2);
        assert_eq!(traces[0].key.hash_token, 0xa);
        assert_eq!(traces[0].records.len(), 2);
        assert_eq!(traces[0].records[0].mode, Mode::Write);
        assert_eq!(traces[0].records[1].index, 1);
        assert_eq!(traces[1].records.len(), 1);
    }

    #[test]
    fn four_arrays_group_into_four_traces() {
        let text = "\
[I@232204a1 w 0 4 1 8 1A0C9142
[I@232204a1 w 1 4 1 8 1A0C9142
[I@232204a1 w 2 4 1 8 1A0C9142
[I@232204a1 w 3 4 1 8 1A0C9142
[I@5cad8086 r 0 4 1 13 1A0C9142
[I@5cad8086 r 1 4 1 13 1A0C9142
[I@5cad8086 r 2 4 1 13 1A0C9142
[I@5cad8086 r 3 4 1 13 1A0C9142

[Ljava.lang.Integer;@6e0be858 w 0 4 1 18 1A0C9142
[Ljava.lang.Integer;@6e0be858 w 1 4 1 18 1A0C9142
[Ljava.lang.Integer;@6e0be858 w 2 4 1 18 1A0C9142
[Ljava.lang.Integer;@6e0be858 w 3 4 1 18 1A0C9142
[I@60e53b93 r 0 4 1 24 1A0C9142
[I@60e53b93 r 1 4 1 24 1A0C9142
[I@60e53b93 r 2 4 1 24 1A0C9142
[I@60e53b93 r 3 4 1 24 1A0C9142
";
        let traces: Vec<_> = group_by_array(parse_raw(text.as_bytes()), &GroupConfig::default())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(traces.len(), 4);
        assert!(traces.iter().all(|t| t.records.len() == 4));
        let ids: Vec<String> = traces.iter().map(|t| t.key.to_string()).collect();
        assert_eq!(
            ids,
            vec![
                "[I@232204a1",
                "[I@5cad8086",
                "[I@60e53b93",
                "[Ljava.lang.Integer;@6e0be858"
            ]
        );
    }

    #[test]
    fn tiny_budget_is_a_resource_error() {
        let cfg = GroupConfig {
            spill_dir: None,
            mem_budget: 1024,
        };
        let err = group_by_array(Vec::<Result<RawTraceLine>>::new(), &cfg)
            .err()
            .unwrap();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn spilled_grouping_matches_in_memory() {
        let mut input = Vec::new();
        for i in 0..20_000u32 {
            let key = format!("[I@{:x}", (i * 7919) % 97);
            input.push(line(&key, Mode::Read, i as i64, 1 << 20, (i % 3) as u64));
        }
        let dir = tempfile::tempdir().unwrap();
        let small = GroupConfig {
            spill_dir: Some(dir.path().to_path_buf()),
            mem_budget: min_mem_budget(),
        };
        let spilled = group_by_array(input.iter().cloned().map(Ok), &small).unwrap();
        assert!(spilled.stats().runs_spilled > MAX_FAN_IN as u64 / 16);
        let spilled: Vec<_> = spilled.collect::<Result<_>>().unwrap();
        let memory: Vec<_> = group_by_array(input.into_iter().map(Ok), &GroupConfig::default())
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(spilled, memory);
        // Spill files go away with the iterator.
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn normalization_examples() {
        let p = normalize_threads(&trace_with(&[4, 4, 4, 4], &[7, 3, 7, 9]));
        let threads: Vec<u32> = p.entries().iter().map(|e| e.thread).collect();
        assert_eq!(threads, vec![1, 2, 1, 3]);

        let p = normalize_threads(&trace_with(&[4, 4], &[42, 42]));
        assert!(p.entries().iter().all(|e| e.thread == 1));
    }

    #[test]
    fn dedup_groups_by_content() {
        let pat = |modes: &[Mode]| {
            AccessPattern::new(
                modes
                    .iter()
                    .enumerate()
                    .map(|(i, &m)| PatternEntry::new(i as i64, m, 1))
                    .collect(),
            )
            .unwrap()
        };
        let rr = pat(&[Mode::Read, Mode::Read]);
        let rw = pat(&[Mode::Read, Mode::Write]);
        let key = |h: &str| ArrayKey::parse(&format!("[I@{h}")).unwrap();
        let groups = dedup_patterns(vec![
            (key("3"), rr.clone()),
            (key("1"), rr.clone()),
            (key("4"), rw.clone()),
            (key("2"), rr.clone()),
        ]);
        assert_eq!(groups.len(), 2);
        let mut sizes: Vec<u64> = groups.iter().map(|g| g.member_count()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 3]);
        let big = groups.iter().find(|g| g.member_count() == 3).unwrap();
        assert_eq!(big.pattern.to_tuple_string(), "[[r 0 1][r 1 1]]");
        assert_eq!(big.member_keys, vec![key("1"), key("2"), key("3")]);
        assert_eq!(big.total_accesses(), 6);
    }

    #[test]
    fn forged_digest_collision_never_merges() {
        let a = AccessPattern::new(vec![PatternEntry::new(0, Mode::Read, 1)]).unwrap();
        let b = AccessPattern::new(vec![PatternEntry::new(1, Mode::Read, 1)]).unwrap();
        let mut table = DedupTable::default();
        let k = |h: u32| ArrayKey::new(TypeDescriptor::parse("[I").unwrap(), h);
        table.insert_with_digest([0; 16], k(1), a.clone());
        table.insert_with_digest([0; 16], k(2), b.clone());
        table.insert_with_digest([0; 16], k(3), a.clone());
        let groups = table.finish();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].pattern, a);
        assert_eq!(groups[0].member_count(), 2);
        assert_eq!(groups[1].pattern, b);
    }

    #[test]
    fn length_change_examples() {
        assert_eq!(
            detect_length_changes(&trace_with(&[4, 4, 4], &[1, 1, 1])),
            None
        );

        let r = detect_length_changes(&trace_with(&[4, 4, 8, 8], &[1; 4])).unwrap();
        assert_eq!(
            (r.n_lengths, r.n_transitions, r.direction),
            (2, 1, LengthDirection::GrowOnly)
        );

        let r = detect_length_changes(&trace_with(&[4, 8, 4], &[1; 3])).unwrap();
        assert_eq!(
            (r.n_lengths, r.n_transitions, r.direction),
            (2, 2, LengthDirection::Mixed)
        );

        let r = detect_length_changes(&trace_with(&[8, 4, 2], &[1; 3])).unwrap();
        assert_eq!(r.direction, LengthDirection::ShrinkOnly);
    }
}
