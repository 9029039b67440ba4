//! Access pattern sequencing.
//!
//! A pattern is first matched as a whole against the shape predicates in a
//! fixed precedence order. When nothing matches it is cut into slices at
//! every access to index 0 (if 0 occurs more than once) or else index 1, and
//! each slice is classified on its own.
//!
//! The second round extends the shape set. It never revisits anything the
//! first round identified: slices the first round classified keep their
//! shape, only unidentified slices are retried with the extended set, and a
//! whole-pattern retry happens only when the first round identified nothing.
//!
//! Encodings render as `<minIndex>: |<TAG> <mode> <threads> <len>|...|`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern_extract::PatternGroup;
use crate::trace_model::{
    mode_of_slice, AccessPattern, Coverage, SequenceEncoding, Shape, ShapeTag, SliceCode, SliceMode,
};

/// Which shapes a sequencing pass may report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeSet {
    Round1,
    Round2,
}

impl ShapeSet {
    pub fn contains(self, shape: Shape) -> bool {
        match self {
            ShapeSet::Round1 => shape.is_first_round(),
            ShapeSet::Round2 => shape != Shape::Unidentified,
        }
    }
}

/// Predicate precedence, most specific first.
pub const PRECEDENCE: [Shape; 12] = [
    Shape::Constant,
    Shape::LinearInc,
    Shape::LinearDec,
    Shape::RepStepInc,
    Shape::RepStepDec,
    Shape::VarStepInc,
    Shape::VarStepDec,
    Shape::LinRepUpDown,
    Shape::Peaks,
    Shape::Saws,
    Shape::Fringes,
    Shape::ParallelTrav,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequencerConfig {
    /// Largest number of distinct indices a fringe pattern may touch.
    pub fringe_max_distinct: usize,
}

impl Default for SequencerConfig {
    fn default() -> Self {
        SequencerConfig {
            fringe_max_distinct: 4,
        }
    }
}

fn diffs(indices: &[i64]) -> impl Iterator<Item = i64> + '_ {
    indices.windows(2).map(|w| w[1] - w[0])
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Inc,
    Dec,
}

impl Dir {
    /// Orients a difference so that "forward" is positive.
    fn orient(self, d: i64) -> i64 {
        match self {
            Dir::Inc => d,
            Dir::Dec => -d,
        }
    }
}

fn is_constant(indices: &[i64]) -> bool {
    !indices.is_empty() && indices.iter().all(|&i| i == indices[0])
}

fn linear_step(indices: &[i64], dir: Dir) -> Option<u64> {
    if indices.len() < 2 {
        return None;
    }
    let first = dir.orient(indices[1] - indices[0]);
    if first < 1 {
        return None;
    }
    diffs(indices)
        .all(|d| dir.orient(d) == first)
        .then_some(first as u64)
}

fn is_rep_step(indices: &[i64], dir: Dir) -> bool {
    if indices.len() < 3 {
        return false;
    }
    let (mut repeat, mut advance) = (false, false);
    for d in diffs(indices).map(|d| dir.orient(d)) {
        match d {
            0 => repeat = true,
            d if d > 0 => advance = true,
            _ => return false,
        }
    }
    repeat && advance
}

fn is_var_step(indices: &[i64], dir: Dir) -> bool {
    if indices.len() < 3 {
        return false;
    }
    let mut first = None;
    let mut varied = false;
    for d in diffs(indices).map(|d| dir.orient(d)) {
        if d < 1 {
            return false;
        }
        match first {
            None => first = Some(d),
            Some(f) if f != d => varied = true,
            _ => {}
        }
    }
    varied
}

fn is_lin_rep_up_down(indices: &[i64]) -> bool {
    let mut last_dir = 0i64;
    let mut changes = 0;
    let (mut up, mut down) = (false, false);
    for d in diffs(indices) {
        if d != 1 && d != -1 {
            return false;
        }
        if d == 1 {
            up = true;
        } else {
            down = true;
        }
        if last_dir != 0 && d != last_dir {
            changes += 1;
        }
        last_dir = d;
    }
    up && down && changes >= 2
}

fn is_peaks(indices: &[i64]) -> bool {
    let (mut rose, mut fell) = (false, false);
    for d in diffs(indices) {
        if d > 0 {
            if fell {
                return false;
            }
            rose = true;
        } else if d < 0 {
            fell = true;
        }
    }
    rose && fell
}

/// Splits at every descent into maximal non-decreasing runs.
fn forward_runs(indices: &[i64]) -> Vec<&[i64]> {
    let mut runs = Vec::new();
    let mut start = 0;
    for k in 1..indices.len() {
        if indices[k] < indices[k - 1] {
            runs.push(&indices[start..k]);
            start = k;
        }
    }
    if !indices.is_empty() {
        runs.push(&indices[start..]);
    }
    runs
}

fn is_forward_traversal(run: &[i64]) -> bool {
    run.len() >= 2 && diffs(run).any(|d| d > 0)
}

fn is_saws(indices: &[i64]) -> bool {
    let runs = forward_runs(indices);
    runs.len() >= 2
        && runs.iter().all(|r| is_forward_traversal(r))
        && runs[1..].iter().all(|r| r[0] > runs[0][0])
}

fn is_fringes(indices: &[i64], max_distinct: usize) -> bool {
    if indices.len() < 4 {
        return false;
    }
    let mut distinct: Vec<i64> = Vec::with_capacity(max_distinct + 1);
    let mut revisit = false;
    for (k, &i) in indices.iter().enumerate() {
        if distinct.contains(&i) {
            if k > 0 && indices[k - 1] != i {
                revisit = true;
            }
        } else {
            distinct.push(i);
            if distinct.len() > max_distinct {
                return false;
            }
        }
    }
    distinct.len() >= 2 && revisit
}

/// Greedy two-colouring into interleaved forward traversals: each access
/// joins the traversal whose last index is the closest one not above it.
fn is_parallel(indices: &[i64]) -> bool {
    // (last index, positions)
    let mut classes: [(i64, Vec<usize>); 2] = [(0, Vec::new()), (0, Vec::new())];
    for (pos, &i) in indices.iter().enumerate() {
        let mut best: Option<usize> = None;
        for c in 0..2 {
            let (last, members) = &classes[c];
            if !members.is_empty() && *last <= i && best.is_none_or(|b| *last > classes[b].0) {
                best = Some(c);
            }
        }
        let chosen = match best {
            Some(c) => c,
            None if classes[1].1.is_empty() && !classes[0].1.is_empty() => 1,
            None if classes[0].1.is_empty() => 0,
            None => return false,
        };
        classes[chosen].0 = i;
        classes[chosen].1.push(pos);
    }
    let [(_, a), (_, b)] = &classes;
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let traversal = |members: &[usize]| {
        let seq: Vec<i64> = members.iter().map(|&p| indices[p]).collect();
        is_forward_traversal(&seq)
    };
    let inside = |p: usize, span: &[usize]| p > span[0] && p < span[span.len() - 1];
    traversal(a)
        && traversal(b)
        && b.iter().any(|&p| inside(p, a))
        && a.iter().any(|&p| inside(p, b))
}

/// Tests one shape's predicate. Linear shapes report their step in the
/// returned tag.
pub fn match_shape(indices: &[i64], shape: Shape, cfg: &SequencerConfig) -> Option<ShapeTag> {
    let plain = |hit: bool| hit.then(|| ShapeTag::plain(shape));
    match shape {
        Shape::Constant => plain(is_constant(indices)),
        Shape::LinearInc => linear_step(indices, Dir::Inc).map(ShapeTag::linear_inc),
        Shape::LinearDec => linear_step(indices, Dir::Dec).map(ShapeTag::linear_dec),
        Shape::RepStepInc => plain(is_rep_step(indices, Dir::Inc)),
        Shape::RepStepDec => plain(is_rep_step(indices, Dir::Dec)),
        Shape::VarStepInc => plain(is_var_step(indices, Dir::Inc)),
        Shape::VarStepDec => plain(is_var_step(indices, Dir::Dec)),
        Shape::LinRepUpDown => plain(is_lin_rep_up_down(indices)),
        Shape::Peaks => plain(is_peaks(indices)),
        Shape::Saws => plain(is_saws(indices)),
        Shape::Fringes => plain(is_fringes(indices, cfg.fringe_max_distinct)),
        Shape::ParallelTrav => plain(is_parallel(indices)),
        Shape::Unidentified => None,
    }
}

fn classify_filtered(
    indices: &[i64],
    cfg: &SequencerConfig,
    allowed: impl Fn(Shape) -> bool,
) -> ShapeTag {
    PRECEDENCE
        .iter()
        .filter(|&&s| allowed(s))
        .find_map(|&s| match_shape(indices, s, cfg))
        .unwrap_or(ShapeTag::UNIDENTIFIED)
}

/// First matching shape of `shapes` in precedence order.
pub fn classify_whole(indices: &[i64], shapes: ShapeSet, cfg: &SequencerConfig) -> ShapeTag {
    classify_filtered(indices, cfg, |s| shapes.contains(s))
}

/// Cuts at every occurrence of index 0 when it occurs twice or more, else
/// index 1, else returns the whole range.
pub fn split_slices(indices: &[i64]) -> Vec<Range<usize>> {
    for split in [0, 1] {
        if indices.iter().filter(|&&i| i == split).count() >= 2 {
            let mut ranges = Vec::new();
            let mut start = 0;
            for (pos, &i) in indices.iter().enumerate() {
                if i == split && pos > start {
                    ranges.push(start..pos);
                    start = pos;
                }
            }
            ranges.push(start..indices.len());
            return ranges;
        }
    }
    if indices.is_empty() {
        Vec::new()
    } else {
        std::iter::once(0..indices.len()).collect()
    }
}

/// The index a pattern would be split on, if any.
pub fn split_index(indices: &[i64]) -> Option<i64> {
    [0, 1]
        .into_iter()
        .find(|&s| indices.iter().filter(|&&i| i == s).count() >= 2)
}

/// A classified, positioned slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slice {
    pub start: usize,
    pub len: usize,
    pub code: SliceCode,
}

impl Slice {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Sequencing result with slice positions kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequenced {
    pub min_index: i64,
    pub slices: Vec<Slice>,
}

impl Sequenced {
    pub fn encoding(&self) -> SequenceEncoding {
        SequenceEncoding {
            min_index: self.min_index,
            slices: self.slices.iter().map(|s| s.code).collect(),
        }
    }

    pub fn coverage(&self) -> Coverage {
        self.encoding().coverage()
    }
}

fn make_slice(pattern: &AccessPattern, range: Range<usize>, shape: ShapeTag) -> Slice {
    let entries = &pattern.entries()[range.clone()];
    let mut threads: Vec<u32> = entries.iter().map(|e| e.thread).collect();
    threads.sort_unstable();
    threads.dedup();
    Slice {
        start: range.start,
        len: range.len(),
        code: SliceCode {
            shape,
            mode: mode_of_slice(entries).expect("slices are non-empty"),
            thread_count: threads.len() as u32,
            len: range.len() as u64,
        },
    }
}

fn sequence_ranges(
    pattern: &AccessPattern,
    indices: &[i64],
    cfg: &SequencerConfig,
    allowed: impl Fn(Shape) -> bool + Copy,
) -> Vec<Slice> {
    let whole = classify_filtered(indices, cfg, allowed);
    if whole.is_identified() {
        return vec![make_slice(pattern, 0..indices.len(), whole)];
    }
    split_slices(indices)
        .into_iter()
        .map(|r| {
            let tag = classify_filtered(&indices[r.clone()], cfg, allowed);
            make_slice(pattern, r, tag)
        })
        .collect()
}

/// Sequences one normalized, non-empty pattern.
pub fn sequence(pattern: &AccessPattern, shapes: ShapeSet, cfg: &SequencerConfig) -> Sequenced {
    assert!(!pattern.is_empty(), "cannot sequence an empty pattern");
    let indices: Vec<i64> = pattern.indices().collect();
    let min_index = *indices.iter().min().unwrap();
    let mut slices = sequence_ranges(pattern, &indices, cfg, Shape::is_first_round);

    if shapes == ShapeSet::Round2 {
        let extended = |s: Shape| !s.is_first_round();
        let any_identified = slices.iter().any(|s| s.code.shape.is_identified());
        if any_identified {
            for slice in slices.iter_mut().filter(|s| !s.code.shape.is_identified()) {
                let tag = classify_filtered(&indices[slice.range()], cfg, extended);
                slice.code.shape = tag;
            }
        } else {
            slices = sequence_ranges(pattern, &indices, cfg, extended);
        }
    }
    Sequenced { min_index, slices }
}

/// Rendering switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Print the total pattern length in every slice instead of the slice's
    /// own length.
    pub paper_compat_length: bool,
}

pub fn render(encoding: &SequenceEncoding, opts: RenderOptions) -> String {
    use fmt::Write;
    let total = encoding.total_len();
    let mut out = format!("{}: |", encoding.min_index);
    for s in &encoding.slices {
        let len = if opts.paper_compat_length {
            total
        } else {
            s.len
        };
        write!(out, "{} {} {} {}|", s.shape, s.mode, s.thread_count, len).unwrap();
    }
    out
}

pub fn parse_encoding(text: &str) -> Result<SequenceEncoding> {
    let bad = |why: &str| Error::validation(format!("bad encoding {text:?}: {why}"));
    let (min, rest) = text.split_once(": ").ok_or_else(|| bad("missing ': '"))?;
    let min_index: i64 = min.parse().map_err(|_| bad("bad minimum index"))?;
    if min != min_index.to_string() {
        return Err(bad("non-canonical minimum index"));
    }
    let body = rest
        .strip_prefix('|')
        .and_then(|r| r.strip_suffix('|'))
        .ok_or_else(|| bad("slices must be enclosed in '|'"))?;
    if body.is_empty() {
        return Err(bad("no slices"));
    }
    let mut slices = Vec::new();
    for field in body.split('|') {
        let parts: Vec<&str> = field.split(' ').collect();
        let [tag, mode, threads, len] = parts[..] else {
            return Err(bad("slice needs 4 space-separated fields"));
        };
        let shape = ShapeTag::from_code(tag).ok_or_else(|| bad("unknown shape tag"))?;
        let mode = SliceMode::from_token(mode).ok_or_else(|| bad("unknown mode"))?;
        let thread_count: u32 = parse_positive(threads).ok_or_else(|| bad("bad thread count"))?;
        let len: u64 = parse_positive(len).ok_or_else(|| bad("bad length"))?;
        slices.push(SliceCode {
            shape,
            mode,
            thread_count,
            len,
        });
    }
    Ok(SequenceEncoding { min_index, slices })
}

fn parse_positive<T: std::str::FromStr + PartialOrd + From<u8> + ToString>(s: &str) -> Option<T> {
    let v: T = s.parse().ok()?;
    (v >= T::from(1) && v.to_string() == s).then_some(v)
}

/// Accesses attributed to each shape, weighted by group membership.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeShares {
    pub accesses: BTreeMap<Shape, u64>,
    pub total: u64,
}

impl ShapeShares {
    pub fn add(&mut self, encoding: &SequenceEncoding, members: u64) {
        for s in &encoding.slices {
            let n = s.len * members;
            *self.accesses.entry(s.shape.shape()).or_default() += n;
            self.total += n;
        }
    }

    pub fn merge(&mut self, other: &ShapeShares) {
        for (shape, n) in &other.accesses {
            *self.accesses.entry(*shape).or_default() += n;
        }
        self.total += other.total;
    }

    pub fn fraction(&self, shape: Shape) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.accesses.get(&shape).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn fractions(&self) -> BTreeMap<Shape, f64> {
        self.accesses
            .keys()
            .map(|&s| (s, self.fraction(s)))
            .collect()
    }

    /// Accesses inside any identified slice.
    pub fn identified(&self) -> u64 {
        self.total
            - self
                .accesses
                .get(&Shape::Unidentified)
                .copied()
                .unwrap_or(0)
    }
}

/// Share of all accesses per shape. `items` pairs each distinct pattern's
/// encoding with the number of arrays sharing it.
pub fn access_shares<'a>(
    items: impl IntoIterator<Item = (&'a SequenceEncoding, u64)>,
) -> ShapeShares {
    let mut shares = ShapeShares::default();
    for (enc, members) in items {
        shares.add(enc, members);
    }
    shares
}

/// Pattern counts by coverage class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageCounts {
    pub full: u64,
    pub partial: u64,
    pub none: u64,
}

impl CoverageCounts {
    pub fn add(&mut self, coverage: Coverage) {
        match coverage {
            Coverage::Full => self.full += 1,
            Coverage::Partial => self.partial += 1,
            Coverage::None => self.none += 1,
        }
    }

    pub fn merge(&mut self, other: &CoverageCounts) {
        self.full += other.full;
        self.partial += other.partial;
        self.none += other.none;
    }

    pub fn total(&self) -> u64 {
        self.full + self.partial + self.none
    }

    pub fn share(&self, coverage: Coverage) -> f64 {
        let n = match coverage {
            Coverage::Full => self.full,
            Coverage::Partial => self.partial,
            Coverage::None => self.none,
        };
        if self.total() == 0 {
            0.0
        } else {
            n as f64 / self.total() as f64
        }
    }
}

/// One line of the sequences output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub pattern_digest: String,
    pub encoding_text: String,
    pub coverage: Coverage,
    pub member_count: u64,
    pub total_accesses: u64,
}

impl SequenceRecord {
    pub fn new(group: &PatternGroup, seq: &Sequenced, opts: RenderOptions) -> SequenceRecord {
        let encoding = seq.encoding();
        SequenceRecord {
            pattern_digest: group.digest_hex(),
            encoding_text: render(&encoding, opts),
            coverage: encoding.coverage(),
            member_count: group.member_count(),
            total_accesses: group.total_accesses(),
        }
    }
}

/// Sequences every group in parallel; output order follows `groups`.
pub fn sequence_groups(
    groups: &[PatternGroup],
    shapes: ShapeSet,
    cfg: &SequencerConfig,
) -> Vec<Sequenced> {
    groups
        .par_iter()
        .map(|g| sequence(&g.pattern, shapes, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::{Mode, PatternEntry};

    fn cfg() -> SequencerConfig {
        SequencerConfig::default()
    }

    fn pattern_of(indices: &[i64], mode: Mode) -> AccessPattern {
        AccessPattern::new(
            indices
                .iter()
                .map(|&i| PatternEntry::new(i, mode, 1))
                .collect(),
        )
        .unwrap()
    }

    fn tag(indices: &[i64], shapes: ShapeSet) -> ShapeTag {
        classify_whole(indices, shapes, &cfg())
    }

    #[test]
    fn predicate_examples() {
        let c = cfg();
        assert!(match_shape(&[5, 5, 5, 5], Shape::Constant, &c).is_some());
        let ramp: Vec<i64> = (0..10).collect();
        assert_eq!(
            match_shape(&ramp, Shape::LinearInc, &c),
            Some(ShapeTag::linear_inc(1))
        );
        assert!(match_shape(&ramp, Shape::RepStepInc, &c).is_none());
        assert!(match_shape(&[0, 0, 2, 2, 4, 4], Shape::RepStepInc, &c).is_some());
        assert!(match_shape(&[0, 1, 3, 4, 8], Shape::VarStepInc, &c).is_some());
        assert!(match_shape(&[0, 1, 2, 3, 2, 1, 0], Shape::Peaks, &c).is_some());
        assert!(match_shape(&[0, 1, 2, 3, 2, 3, 4, 5], Shape::Saws, &c).is_some());
        assert_eq!(
            match_shape(&[9, 6, 3], Shape::LinearDec, &c),
            Some(ShapeTag::linear_dec(3))
        );
    }

    #[test]
    fn second_round_predicates() {
        let c = cfg();
        assert!(match_shape(&[2, 3, 4, 3, 4, 5, 4, 5, 6], Shape::LinRepUpDown, &c).is_some());
        assert!(match_shape(&[2, 3, 4, 3, 2], Shape::LinRepUpDown, &c).is_none());
        assert!(match_shape(&[3, 9, 3, 9, 3], Shape::Fringes, &c).is_some());
        assert!(match_shape(&[3, 3, 9, 9], Shape::Fringes, &c).is_none());
        assert!(match_shape(&[1, 2, 3, 4, 5, 1], Shape::Fringes, &c).is_none());
        assert!(match_shape(&[10, 2, 11, 3, 12, 4], Shape::ParallelTrav, &c).is_some());
        assert!(match_shape(&[10, 11, 12, 2, 3, 4], Shape::ParallelTrav, &c).is_none());
        // A saw whose later run does not restart above the first run's start.
        assert!(match_shape(&[2, 3, 4, 2, 3, 4], Shape::Saws, &c).is_none());
        // Runs must be at least two accesses long.
        assert!(match_shape(&[2, 3, 4, 3], Shape::Saws, &c).is_none());
    }

    #[test]
    fn fringe_threshold_is_configurable() {
        let idx = [0, 3, 6, 9, 12, 0];
        assert!(match_shape(&idx, Shape::Fringes, &cfg()).is_none());
        let wide = SequencerConfig {
            fringe_max_distinct: 5,
        };
        assert!(match_shape(&idx, Shape::Fringes, &wide).is_some());
    }

    #[test]
    fn whole_classification_examples() {
        let node = [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3];
        assert_eq!(
            tag(&node, ShapeSet::Round1),
            ShapeTag::plain(Shape::RepStepInc)
        );
        assert_eq!(
            tag(&[4], ShapeSet::Round1),
            ShapeTag::plain(Shape::Constant)
        );
        assert_eq!(
            tag(&[0, 5, 1, 7, 2], ShapeSet::Round1),
            ShapeTag::UNIDENTIFIED
        );
        assert_eq!(
            tag(&[0, 5, 1, 7, 2], ShapeSet::Round2),
            ShapeTag::plain(Shape::ParallelTrav)
        );
        assert_eq!(
            tag(&[0, 1, 2, 3, 2, 1, 0], ShapeSet::Round2),
            ShapeTag::plain(Shape::Peaks)
        );
    }

    #[test]
    fn split_examples() {
        assert_eq!(
            split_slices(&[0, 1, 2, 0, 1, 2, 0, 1, 2]),
            vec![0..3, 3..6, 6..9]
        );
        assert_eq!(split_slices(&[3, 4, 5, 6]), vec![0..4]);
        assert_eq!(split_slices(&[2, 1, 3, 1, 4]), vec![0..1, 1..3, 3..5]);
        // A single 0 does not trigger a split on 0.
        assert_eq!(split_slices(&[0, 1, 5, 1]), vec![0..1, 1..3, 3..4]);
    }

    #[test]
    fn three_runs_compat_rendering() {
        let mut entries = Vec::new();
        for mode in [Mode::Write, Mode::Read, Mode::Write] {
            entries.extend((0..14).map(|i| PatternEntry::new(i, mode, 1)));
        }
        let p = AccessPattern::new(entries).unwrap();
        let enc = sequence(&p, ShapeSet::Round1, &cfg()).encoding();
        let compat = RenderOptions {
            paper_compat_length: true,
        };
        assert_eq!(
            render(&enc, compat),
            "0: |SLi w 1 42|SLi r 1 42|SLi w 1 42|"
        );
        assert_eq!(
            render(&enc, RenderOptions::default()),
            "0: |SLi w 1 14|SLi r 1 14|SLi w 1 14|"
        );
    }

    #[test]
    fn constant_rendering() {
        let p = pattern_of(&[5; 8], Mode::Write);
        let enc = sequence(&p, ShapeSet::Round1, &cfg()).encoding();
        assert_eq!(render(&enc, RenderOptions::default()), "5: |C w 1 8|");
        assert_eq!(enc.coverage(), Coverage::Full);
    }

    #[test]
    fn unidentified_slices() {
        let p = pattern_of(&[0, 9, 1, 0, 9, 1], Mode::Read);
        let seq = sequence(&p, ShapeSet::Round1, &cfg());
        assert_eq!(seq.slices.len(), 2);
        assert_eq!(seq.coverage(), Coverage::None);
        assert!(seq.slices.iter().all(|s| !s.code.shape.is_identified()));
    }

    #[test]
    fn second_round_keeps_first_round_slices() {
        // Round 1 identifies both halves; the whole would be a Round 2 shape.
        let p = pattern_of(&[0, 1, 0, 1], Mode::Read);
        let r1 = sequence(&p, ShapeSet::Round1, &cfg());
        assert_eq!(r1.coverage(), Coverage::Full);
        assert_eq!(
            tag(&[0, 1, 0, 1], ShapeSet::Round2),
            ShapeTag::plain(Shape::LinRepUpDown)
        );
        assert_eq!(sequence(&p, ShapeSet::Round2, &cfg()), r1);

        // Partial: the unidentified slice is retried with the extended set.
        let p = pattern_of(&[0, 2, 4, 0, 5, 7, 6, 3], Mode::Read);
        let r1 = sequence(&p, ShapeSet::Round1, &cfg());
        assert_eq!(r1.coverage(), Coverage::Partial);
        let r2 = sequence(&p, ShapeSet::Round2, &cfg());
        assert_eq!(r2.slices[0], r1.slices[0]);
        assert_eq!(r2.slices[1].code.shape, ShapeTag::plain(Shape::Peaks));
    }

    #[test]
    fn multi_thread_slices() {
        let entries = vec![
            PatternEntry::new(0, Mode::Read, 1),
            PatternEntry::new(1, Mode::Write, 2),
            PatternEntry::new(2, Mode::Read, 1),
        ];
        let p = AccessPattern::new(entries).unwrap();
        let enc = sequence(&p, ShapeSet::Round1, &cfg()).encoding();
        assert_eq!(render(&enc, RenderOptions::default()), "0: |SLi rw 2 3|");
    }

    #[test]
    fn encoding_grammar() {
        let enc = SequenceEncoding {
            min_index: 0,
            slices: vec![SliceCode {
                shape: ShapeTag::plain(Shape::Constant),
                mode: SliceMode::ReadWrite,
                thread_count: 2,
                len: 10,
            }],
        };
        assert_eq!(render(&enc, RenderOptions::default()), "0: |C rw 2 10|");
        assert_eq!(parse_encoding("0: |C rw 2 10|").unwrap(), enc);

        let three_runs = parse_encoding("0: |SLi w 1 42|SLi r 1 42|SLi w 1 42|").unwrap();
        assert_eq!(three_runs.slices.len(), 3);
        assert!(three_runs
            .slices
            .iter()
            .all(|s| s.shape == ShapeTag::linear_inc(1)));

        for bad in [
            "",
            "0: ",
            "0: ||",
            "0 |C r 1 1|",
            "0: |C r 1 1",
            "0: |C r 1|",
            "0: |X r 1 1|",
            "0: |C x 1 1|",
            "0: |C r 0 1|",
            "0: |C r 1 01|",
            "00: |C r 1 1|",
            "0: |C  r 1 1|",
        ] {
            assert!(parse_encoding(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn share_examples() {
        let p = pattern_of(&[3; 4], Mode::Read);
        let enc = sequence(&p, ShapeSet::Round1, &cfg()).encoding();
        let shares = access_shares([(&enc, 5)]);
        assert_eq!(shares.fraction(Shape::Constant), 1.0);

        let lin = sequence(
            &pattern_of(&[2, 3, 4, 5], Mode::Read),
            ShapeSet::Round1,
            &cfg(),
        )
        .encoding();
        let unk = sequence(
            &pattern_of(&[2, 9, 3, 8], Mode::Read),
            ShapeSet::Round1,
            &cfg(),
        )
        .encoding();
        let shares = access_shares([(&lin, 3), (&unk, 3)]);
        assert_eq!(shares.fraction(Shape::LinearInc), 0.5);
        assert_eq!(shares.fraction(Shape::Unidentified), 0.5);
        assert_eq!(shares.identified(), 12);
    }
}
