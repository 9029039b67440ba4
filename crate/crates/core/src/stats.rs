//! Array usage statistics.
//!
//! [`StatsReport`] is a commutative monoid: per-array facts are folded in
//! with [`StatsReport::accumulate`], pattern-level facts with
//! [`StatsReport::add_pattern`], and partial reports combine with
//! [`StatsReport::merge`]. All counters are integers, so merge order cannot
//! change the result.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::pattern_extract::{detect_length_changes, ArrayTrace, LengthDirection};
use crate::sequencer::{CoverageCounts, ShapeShares};
use crate::trace_io::ClassMap;
use crate::trace_model::{SequenceEncoding, Shape, SliceMode, TypeDescriptor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TypeCat {
    Primitive,
    JavaStdlib,
    ScalaStdlib,
    OtherObject,
    NestedArray,
}

impl TypeCat {
    pub fn name(self) -> &'static str {
        match self {
            TypeCat::Primitive => "primitive",
            TypeCat::JavaStdlib => "java_stdlib",
            TypeCat::ScalaStdlib => "scala_stdlib",
            TypeCat::OtherObject => "other_object",
            TypeCat::NestedArray => "nested_array",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeCategory {
    pub cat: TypeCat,
    pub depth: u32,
    /// Primitive type name or dotted class name of the innermost element.
    pub innermost: String,
}

/// Package prefixes that decide the stdlib categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryPrefixes {
    pub java: Vec<String>,
    pub scala: Vec<String>,
}

impl Default for CategoryPrefixes {
    fn default() -> Self {
        CategoryPrefixes {
            java: ["java.", "javax.", "jdk.", "sun."]
                .map(String::from)
                .to_vec(),
            scala: vec!["scala.".to_owned()],
        }
    }
}

fn primitive_name(c: char) -> &'static str {
    match c {
        'Z' => "boolean",
        'B' => "byte",
        'C' => "char",
        'D' => "double",
        'F' => "float",
        'I' => "int",
        'J' => "long",
        'S' => "short",
        _ => unreachable!("descriptor grammar admits only primitive letters"),
    }
}

pub fn categorize_type(desc: &TypeDescriptor, prefixes: &CategoryPrefixes) -> TypeCategory {
    let innermost = match desc.primitive() {
        Some(c) => primitive_name(c).to_owned(),
        None => desc.class_name().unwrap_or_default().to_owned(),
    };
    let starts = |list: &[String]| list.iter().any(|p| innermost.starts_with(p.as_str()));
    let cat = if desc.dims() >= 2 {
        TypeCat::NestedArray
    } else if desc.primitive().is_some() {
        TypeCat::Primitive
    } else if starts(&prefixes.java) {
        TypeCat::JavaStdlib
    } else if starts(&prefixes.scala) {
        TypeCat::ScalaStdlib
    } else {
        TypeCat::OtherObject
    };
    TypeCategory {
        cat,
        depth: desc.dims(),
        innermost,
    }
}

pub fn classify_rw(trace: &ArrayTrace) -> SliceMode {
    SliceMode::of_modes(trace.records.iter().map(|r| r.mode)).expect("traces are non-empty")
}

/// Share of an array's elements that were touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexCoverage {
    /// Distinct in-bounds indices accessed.
    pub accessed: u64,
    /// Largest observed length.
    pub length: u64,
    pub oob_count: u64,
}

impl IndexCoverage {
    pub fn fraction(&self) -> f64 {
        if self.length == 0 {
            return 0.0;
        }
        (self.accessed as f64 / self.length as f64).min(1.0)
    }

    pub fn bucket(&self) -> CoverageBucket {
        let (a, n) = (self.accessed, self.length);
        if a >= n {
            CoverageBucket::All
        } else if a * 10 < n {
            CoverageBucket::Below10
        } else if a * 2 < n {
            CoverageBucket::Below50
        } else {
            CoverageBucket::Below100
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoverageBucket {
    Below10,
    Below50,
    Below100,
    All,
}

impl CoverageBucket {
    pub const ALL: [CoverageBucket; 4] = [
        CoverageBucket::Below10,
        CoverageBucket::Below50,
        CoverageBucket::Below100,
        CoverageBucket::All,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CoverageBucket::Below10 => "<10%",
            CoverageBucket::Below50 => "10-<50%",
            CoverageBucket::Below100 => "50-<100%",
            CoverageBucket::All => "100%",
        }
    }
}

pub fn index_coverage(trace: &ArrayTrace) -> IndexCoverage {
    let length = trace.max_length();
    let mut touched = BTreeSet::new();
    let mut oob_count = 0;
    for r in &trace.records {
        if r.is_out_of_bounds() {
            oob_count += 1;
        } else {
            touched.insert(r.index);
        }
    }
    IndexCoverage {
        accessed: (touched.len() as u64).min(length),
        length,
        oob_count,
    }
}

/// Everything the report needs from one array.
#[derive(Debug, Clone)]
pub struct ArrayFacts {
    pub category: TypeCategory,
    pub length: u64,
    pub rw: SliceMode,
    pub coverage: IndexCoverage,
    pub n_accesses: u64,
    pub n_threads: u64,
    pub classes: BTreeSet<u32>,
    pub callsites: BTreeSet<(u32, i64)>,
    pub length_change: Option<LengthDirection>,
}

impl ArrayFacts {
    pub fn of(trace: &ArrayTrace, prefixes: &CategoryPrefixes) -> ArrayFacts {
        ArrayFacts {
            category: categorize_type(&trace.key.ty, prefixes),
            length: trace.max_length(),
            rw: classify_rw(trace),
            coverage: index_coverage(trace),
            n_accesses: trace.records.len() as u64,
            n_threads: trace.distinct_threads.len() as u64,
            classes: trace.distinct_classes.clone(),
            callsites: trace
                .records
                .iter()
                .map(|r| (r.class_hash, r.line))
                .collect(),
            length_change: detect_length_changes(trace).map(|r| r.direction),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RwCounts {
    pub read_only: u64,
    pub write_only: u64,
    pub read_write: u64,
}

impl RwCounts {
    pub fn total(&self) -> u64 {
        self.read_only + self.write_only + self.read_write
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TypeStats {
    pub count: u64,
    pub sum_len: u64,
    pub max_len: u64,
    pub min_len: u64,
}

impl TypeStats {
    fn single(len: u64) -> TypeStats {
        TypeStats {
            count: 1,
            sum_len: len,
            max_len: len,
            min_len: len,
        }
    }

    fn merge(&mut self, o: &TypeStats) {
        self.count += o.count;
        self.sum_len += o.sum_len;
        self.max_len = self.max_len.max(o.max_len);
        self.min_len = self.min_len.min(o.min_len);
    }
}

/// Arrays-per-pattern bucket bounds (inclusive upper bound; last is open).
pub const PATTERN_BUCKETS: [(u64, Option<u64>, &str); 8] = [
    (1, Some(1), "1"),
    (2, Some(2), "2"),
    (3, Some(3), "3"),
    (4, Some(4), "4"),
    (5, Some(100), "5-100"),
    (101, Some(1_000), "101-1000"),
    (1_001, Some(10_000), "1001-10000"),
    (10_001, None, ">10000"),
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PatternTable {
    pub buckets: [u64; 8],
    pub n_patterns: u64,
    pub n_arrays: u64,
}

impl PatternTable {
    pub fn add(&mut self, members: u64) {
        let slot = PATTERN_BUCKETS
            .iter()
            .position(|&(lo, hi, _)| members >= lo && hi.is_none_or(|h| members <= h))
            .expect("buckets cover every positive size");
        self.buckets[slot] += 1;
        self.n_patterns += 1;
        self.n_arrays += members;
    }

    pub fn merge(&mut self, o: &PatternTable) {
        for (a, b) in self.buckets.iter_mut().zip(o.buckets) {
            *a += b;
        }
        self.n_patterns += o.n_patterns;
        self.n_arrays += o.n_arrays;
    }

    /// Average number of arrays per distinct pattern.
    pub fn mean_arrays(&self) -> f64 {
        if self.n_patterns == 0 {
            0.0
        } else {
            self.n_arrays as f64 / self.n_patterns as f64
        }
    }
}

pub fn pattern_distribution(group_sizes: impl IntoIterator<Item = u64>) -> PatternTable {
    let mut table = PatternTable::default();
    for size in group_sizes {
        table.add(size);
    }
    table
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LengthChangeCounts {
    pub grow_only: u64,
    pub shrink_only: u64,
    pub mixed: u64,
}

/// Mergeable statistics over a set of arrays and their patterns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsReport {
    pub length_hist: BTreeMap<u64, u64>,
    pub rw_counts: RwCounts,
    pub coverage_hist: BTreeMap<CoverageBucket, u64>,
    pub oob_arrays: u64,
    pub oob_accesses: u64,
    pub type_table: BTreeMap<TypeCat, TypeStats>,
    pub nested_depths: BTreeMap<u32, u64>,
    pub threads_hist: BTreeMap<u64, u64>,
    pub classes_hist: BTreeMap<u64, u64>,
    pub length_changes: LengthChangeCounts,
    pub pattern_table: PatternTable,
    pub pattern_coverage: CoverageCounts,
    pub shape_shares: ShapeShares,
    pub n_accesses: u64,
    pub n_arrays: u64,
    pub callsites: BTreeSet<(u32, i64)>,
    pub classes: BTreeSet<u32>,
}

impl StatsReport {
    pub fn accumulate(&mut self, f: &ArrayFacts) {
        self.n_arrays += 1;
        self.n_accesses += f.n_accesses;
        *self.length_hist.entry(f.length).or_default() += 1;
        match f.rw {
            SliceMode::ReadOnly => self.rw_counts.read_only += 1,
            SliceMode::WriteOnly => self.rw_counts.write_only += 1,
            SliceMode::ReadWrite => self.rw_counts.read_write += 1,
        }
        *self.coverage_hist.entry(f.coverage.bucket()).or_default() += 1;
        if f.coverage.oob_count > 0 {
            self.oob_arrays += 1;
            self.oob_accesses += f.coverage.oob_count;
        }
        let ts = TypeStats::single(f.length);
        self.type_table
            .entry(f.category.cat)
            .and_modify(|t| t.merge(&ts))
            .or_insert(ts);
        if f.category.cat == TypeCat::NestedArray {
            *self.nested_depths.entry(f.category.depth).or_default() += 1;
        }
        *self.threads_hist.entry(f.n_threads).or_default() += 1;
        *self.classes_hist.entry(f.classes.len() as u64).or_default() += 1;
        match f.length_change {
            Some(LengthDirection::GrowOnly) => self.length_changes.grow_only += 1,
            Some(LengthDirection::ShrinkOnly) => self.length_changes.shrink_only += 1,
            Some(LengthDirection::Mixed) => self.length_changes.mixed += 1,
            None => {}
        }
        self.callsites.extend(f.callsites.iter().copied());
        self.classes.extend(f.classes.iter().copied());
    }

    /// Folds in one distinct pattern shared by `members` arrays.
    pub fn add_pattern(&mut self, members: u64, encoding: &SequenceEncoding) {
        self.pattern_table.add(members);
        self.pattern_coverage.add(encoding.coverage());
        self.shape_shares.add(encoding, members);
    }

    pub fn merge(&mut self, o: &StatsReport) {
        fn add_all<K: Ord + Copy>(a: &mut BTreeMap<K, u64>, b: &BTreeMap<K, u64>) {
            for (k, v) in b {
                *a.entry(*k).or_default() += v;
            }
        }
        add_all(&mut self.length_hist, &o.length_hist);
        self.rw_counts.read_only += o.rw_counts.read_only;
        self.rw_counts.write_only += o.rw_counts.write_only;
        self.rw_counts.read_write += o.rw_counts.read_write;
        add_all(&mut self.coverage_hist, &o.coverage_hist);
        self.oob_arrays += o.oob_arrays;
        self.oob_accesses += o.oob_accesses;
        for (cat, ts) in &o.type_table {
            self.type_table
                .entry(*cat)
                .and_modify(|t| t.merge(ts))
                .or_insert(*ts);
        }
        add_all(&mut self.nested_depths, &o.nested_depths);
        add_all(&mut self.threads_hist, &o.threads_hist);
        add_all(&mut self.classes_hist, &o.classes_hist);
        self.length_changes.grow_only += o.length_changes.grow_only;
        self.length_changes.shrink_only += o.length_changes.shrink_only;
        self.length_changes.mixed += o.length_changes.mixed;
        self.pattern_table.merge(&o.pattern_table);
        self.pattern_coverage.merge(&o.pattern_coverage);
        self.shape_shares.merge(&o.shape_shares);
        self.n_accesses += o.n_accesses;
        self.n_arrays += o.n_arrays;
        self.callsites.extend(o.callsites.iter().copied());
        self.classes.extend(o.classes.iter().copied());
    }

    /// `(length, arrays, cumulative arrays)` rows in length order.
    pub fn length_cdf(&self) -> Vec<(u64, u64, u64)> {
        let mut cum = 0;
        self.length_hist
            .iter()
            .map(|(&len, &n)| {
                cum += n;
                (len, n, cum)
            })
            .collect()
    }

    pub fn to_json(&self) -> ReportJson {
        ReportJson::from(self)
    }

    pub fn write_json<W: Write>(&self, out: &mut W) -> Result<()> {
        serde_json::to_writer_pretty(&mut *out, &self.to_json())?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// Percentage with one decimal, computed from integers.
pub fn percent(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        return 0.0;
    }
    // Round half up on the exact rational part/whole * 1000.
    let tenths = (part as u128 * 2000 + whole as u128) / (2 * whole as u128);
    tenths as f64 / 10.0
}

#[derive(Debug, Serialize)]
pub struct Totals {
    pub n_accesses: u64,
    pub n_arrays: u64,
    pub n_patterns: u64,
    pub n_callsites: u64,
    pub n_classes_touched: u64,
}

#[derive(Debug, Serialize)]
pub struct CountShare {
    pub count: u64,
    pub percent: f64,
}

impl CountShare {
    fn of(count: u64, whole: u64) -> CountShare {
        CountShare {
            count,
            percent: percent(count, whole),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct HistRow {
    pub value: u64,
    pub arrays: u64,
}

fn rows<K: Copy + Into<u64>>(m: &BTreeMap<K, u64>) -> Vec<HistRow> {
    m.iter()
        .map(|(&k, &arrays)| HistRow {
            value: k.into(),
            arrays,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct RwJson {
    pub read_only: CountShare,
    pub write_only: CountShare,
    pub read_write: CountShare,
}

#[derive(Debug, Serialize)]
pub struct CoverageJson {
    #[serde(rename = "<10%")]
    pub below_10: CountShare,
    #[serde(rename = "10-<50%")]
    pub below_50: CountShare,
    #[serde(rename = "50-<100%")]
    pub below_100: CountShare,
    #[serde(rename = "100%")]
    pub all: CountShare,
    pub out_of_bounds_arrays: CountShare,
    pub out_of_bounds_accesses: u64,
}

#[derive(Debug, Serialize)]
pub struct TypeRow {
    pub category: &'static str,
    pub arrays: u64,
    pub percent: f64,
    pub avg_len: f64,
    pub max_len: u64,
    pub min_len: u64,
}

#[derive(Debug, Serialize)]
pub struct BucketRow {
    pub bucket: &'static str,
    pub patterns: u64,
    pub percent: f64,
}

#[derive(Debug, Serialize)]
pub struct PatternCoverageJson {
    pub full: CountShare,
    pub partial: CountShare,
    pub none: CountShare,
}

#[derive(Debug, Serialize)]
pub struct ShapeRow {
    pub shape: &'static str,
    pub accesses: u64,
    pub percent: f64,
}

/// Serialized form of a [`StatsReport`]. Field order is part of the format.
#[derive(Debug, Serialize)]
pub struct ReportJson {
    pub totals: Totals,
    pub length_hist: Vec<HistRow>,
    pub rw_counts: RwJson,
    pub coverage_hist: CoverageJson,
    pub type_table: Vec<TypeRow>,
    pub nested_depths: Vec<HistRow>,
    pub threads_hist: Vec<HistRow>,
    pub classes_hist: Vec<HistRow>,
    pub length_changes: LengthChangeCounts,
    pub pattern_table: Vec<BucketRow>,
    pub arrays_per_pattern: f64,
    pub pattern_coverage: PatternCoverageJson,
    pub shape_shares: Vec<ShapeRow>,
}

impl From<&StatsReport> for ReportJson {
    fn from(r: &StatsReport) -> Self {
        let n = r.n_arrays;
        let rw = &r.rw_counts;
        let pc = &r.pattern_coverage;
        let cov = |b| CountShare::of(r.coverage_hist.get(&b).copied().unwrap_or(0), n);
        let pt = &r.pattern_table;
        ReportJson {
            totals: Totals {
                n_accesses: r.n_accesses,
                n_arrays: r.n_arrays,
                n_patterns: pt.n_patterns,
                n_callsites: r.callsites.len() as u64,
                n_classes_touched: r.classes.len() as u64,
            },
            length_hist: rows(&r.length_hist),
            rw_counts: RwJson {
                read_only: CountShare::of(rw.read_only, n),
                write_only: CountShare::of(rw.write_only, n),
                read_write: CountShare::of(rw.read_write, n),
            },
            coverage_hist: CoverageJson {
                below_10: cov(CoverageBucket::Below10),
                below_50: cov(CoverageBucket::Below50),
                below_100: cov(CoverageBucket::Below100),
                all: cov(CoverageBucket::All),
                out_of_bounds_arrays: CountShare::of(r.oob_arrays, n),
                out_of_bounds_accesses: r.oob_accesses,
            },
            type_table: r
                .type_table
                .iter()
                .map(|(cat, t)| TypeRow {
                    category: cat.name(),
                    arrays: t.count,
                    percent: percent(t.count, n),
                    avg_len: percent(t.sum_len, t.count * 100),
                    max_len: t.max_len,
                    min_len: t.min_len,
                })
                .collect(),
            nested_depths: rows(&r.nested_depths),
            threads_hist: rows(&r.threads_hist),
            classes_hist: rows(&r.classes_hist),
            length_changes: r.length_changes,
            pattern_table: PATTERN_BUCKETS
                .iter()
                .zip(pt.buckets)
                .map(|(&(_, _, label), count)| BucketRow {
                    bucket: label,
                    patterns: count,
                    percent: percent(count, pt.n_patterns),
                })
                .collect(),
            arrays_per_pattern: percent(pt.n_arrays, pt.n_patterns * 100),
            pattern_coverage: PatternCoverageJson {
                full: CountShare::of(pc.full, pc.total()),
                partial: CountShare::of(pc.partial, pc.total()),
                none: CountShare::of(pc.none, pc.total()),
            },
            shape_shares: Shape::ALL
                .iter()
                .map(|&shape| {
                    let accesses = r.shape_shares.accesses.get(&shape).copied().unwrap_or(0);
                    ShapeRow {
                        shape: shape.name(),
                        accesses,
                        percent: percent(accesses, r.shape_shares.total),
                    }
                })
                .collect(),
        }
    }
}

/// Writes the plot-ready CSV tables into `dir`.
pub fn write_csvs(report: &StatsReport, corpus: &str, dir: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let n = report.n_arrays;

    let mut w = csv::Writer::from_path(dir.join("length_cdf.csv"))?;
    w.write_record([
        "length",
        "arrays",
        "cumulative_arrays",
        "cumulative_percent",
    ])?;
    for (len, count, cum) in report.length_cdf() {
        w.write_record([
            len.to_string(),
            count.to_string(),
            cum.to_string(),
            format!("{:.1}", percent(cum, n)),
        ])?;
    }
    w.flush()?;

    let rw = &report.rw_counts;
    let mut w = csv::Writer::from_path(dir.join("rw_by_corpus.csv"))?;
    w.write_record([
        "corpus",
        "read_only",
        "write_only",
        "read_write",
        "read_only_percent",
        "write_only_percent",
        "read_write_percent",
    ])?;
    w.write_record([
        corpus.to_owned(),
        rw.read_only.to_string(),
        rw.write_only.to_string(),
        rw.read_write.to_string(),
        format!("{:.1}", percent(rw.read_only, n)),
        format!("{:.1}", percent(rw.write_only, n)),
        format!("{:.1}", percent(rw.read_write, n)),
    ])?;
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("coverage_hist.csv"))?;
    w.write_record(["bucket", "arrays", "percent"])?;
    for b in CoverageBucket::ALL {
        let c = report.coverage_hist.get(&b).copied().unwrap_or(0);
        w.write_record([
            b.label().to_owned(),
            c.to_string(),
            format!("{:.1}", percent(c, n)),
        ])?;
    }
    w.write_record([
        "out_of_bounds".to_owned(),
        report.oob_arrays.to_string(),
        format!("{:.1}", percent(report.oob_arrays, n)),
    ])?;
    w.flush()?;

    let pt = &report.pattern_table;
    let mut w = csv::Writer::from_path(dir.join("pattern_buckets.csv"))?;
    w.write_record(["arrays_per_pattern", "patterns", "percent"])?;
    for (&(_, _, label), c) in PATTERN_BUCKETS.iter().zip(pt.buckets) {
        w.write_record([
            label.to_owned(),
            c.to_string(),
            format!("{:.1}", percent(c, pt.n_patterns)),
        ])?;
    }
    w.flush()?;

    let shares = &report.shape_shares;
    let mut w = csv::Writer::from_path(dir.join("shape_shares.csv"))?;
    w.write_record(["shape", "accesses", "percent"])?;
    for shape in Shape::ALL {
        let c = shares.accesses.get(&shape).copied().unwrap_or(0);
        w.write_record([
            shape.name().to_owned(),
            c.to_string(),
            format!("{:.1}", percent(c, shares.total)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Where an unresolvable class hash sends its array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnresolvedPolicy {
    Include,
    Exclude,
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    InScope,
    OutOfScope,
    Unresolved,
}

/// Scope of one array: in scope when every access comes from a class whose
/// name starts with `prefix`. A resolved non-matching class always wins over
/// unresolved ones.
pub fn scope_of(
    trace: &ArrayTrace,
    classes: &ClassMap,
    prefix: &str,
    policy: UnresolvedPolicy,
) -> Scope {
    let mut unresolved = false;
    for &hash in &trace.distinct_classes {
        match classes.lookup(hash) {
            Some(name) if name.starts_with(prefix) => {}
            Some(_) => return Scope::OutOfScope,
            None => unresolved = true,
        }
    }
    match (unresolved, policy) {
        (false, _) => Scope::InScope,
        (true, UnresolvedPolicy::Include) => Scope::InScope,
        (true, UnresolvedPolicy::Exclude) => Scope::OutOfScope,
        (true, UnresolvedPolicy::Separate) => Scope::Unresolved,
    }
}

#[derive(Debug, Default)]
pub struct ScopeSplit {
    pub in_scope: Vec<ArrayTrace>,
    pub out_of_scope: Vec<ArrayTrace>,
    pub unresolved: Vec<ArrayTrace>,
    /// Distinct class hashes that had no class-map entry.
    pub unresolved_hashes: BTreeSet<u32>,
}

pub fn class_scope_filter(
    traces: impl IntoIterator<Item = ArrayTrace>,
    classes: &ClassMap,
    prefix: &str,
    policy: UnresolvedPolicy,
) -> ScopeSplit {
    let mut split = ScopeSplit::default();
    for trace in traces {
        split.unresolved_hashes.extend(
            trace
                .distinct_classes
                .iter()
                .filter(|&&h| classes.lookup(h).is_none()),
        );
        match scope_of(&trace, classes, prefix, policy) {
            Scope::InScope => split.in_scope.push(trace),
            Scope::OutOfScope => split.out_of_scope.push(trace),
            Scope::Unresolved => split.unresolved.push(trace),
        }
    }
    split
}
