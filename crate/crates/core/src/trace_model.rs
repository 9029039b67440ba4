//! Core value types shared by the whole pipeline.
//!
//! Nothing in here performs I/O. Every type is an immutable value and can be
//! moved freely between worker threads.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of a single array access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Read,
    Write,
}

impl Mode {
    pub fn as_char(self) -> char {
        match self {
            Mode::Read => 'r',
            Mode::Write => 'w',
        }
    }

    pub fn from_token(token: &str) -> Option<Mode> {
        match token {
            "r" => Some(Mode::Read),
            "w" => Some(Mode::Write),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Aggregate read/write character of a run of accesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SliceMode {
    ReadOnly,
    WriteOnly,
    ReadWrite,
}

impl SliceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SliceMode::ReadOnly => "r",
            SliceMode::WriteOnly => "w",
            SliceMode::ReadWrite => "rw",
        }
    }

    pub fn from_token(token: &str) -> Option<SliceMode> {
        match token {
            "r" => Some(SliceMode::ReadOnly),
            "w" => Some(SliceMode::WriteOnly),
            "rw" => Some(SliceMode::ReadWrite),
            _ => None,
        }
    }

    /// Folds a sequence of modes. Returns `None` for an empty sequence.
    pub fn of_modes(modes: impl IntoIterator<Item = Mode>) -> Option<SliceMode> {
        let (mut reads, mut writes) = (false, false);
        for mode in modes {
            match mode {
                Mode::Read => reads = true,
                Mode::Write => writes = true,
            }
        }
        match (reads, writes) {
            (false, false) => None,
            (true, false) => Some(SliceMode::ReadOnly),
            (false, true) => Some(SliceMode::WriteOnly),
            (true, true) => Some(SliceMode::ReadWrite),
        }
    }
}

impl fmt::Display for SliceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A JVM array type descriptor such as `[I` or `[Ljava.lang.Integer;`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypeDescriptor {
    raw: String,
    dims: u32,
}

impl TypeDescriptor {
    pub fn parse(raw: &str) -> Result<TypeDescriptor> {
        let dims = raw.bytes().take_while(|&b| b == b'[').count();
        if dims == 0 {
            return Err(Error::validation(format!(
                "type descriptor {raw:?} has no '['"
            )));
        }
        let element = &raw[dims..];
        let well_formed = match element.as_bytes() {
            [b'Z' | b'B' | b'C' | b'D' | b'F' | b'I' | b'J' | b'S'] => true,
            [b'L', rest @ ..] => rest.len() >= 2 && rest.ends_with(b";"),
            _ => false,
        };
        if !well_formed
            || element
                .bytes()
                .any(|b| b.is_ascii_whitespace() || b == b'@')
        {
            return Err(Error::validation(format!(
                "malformed type descriptor {raw:?}"
            )));
        }
        Ok(TypeDescriptor {
            raw: raw.to_owned(),
            dims: dims as u32,
        })
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Number of leading `[`.
    pub fn dims(&self) -> u32 {
        self.dims
    }

    /// The descriptor with all leading `[` removed.
    pub fn element(&self) -> &str {
        &self.raw[self.dims as usize..]
    }

    /// Primitive descriptor letter, if the innermost element is primitive.
    pub fn primitive(&self) -> Option<char> {
        let element = self.element();
        (element.len() == 1).then(|| element.chars().next().unwrap())
    }

    /// Dotted class name of the innermost element, for object element types.
    pub fn class_name(&self) -> Option<&str> {
        let element = self.element();
        element
            .strip_prefix('L')
            .and_then(|rest| rest.strip_suffix(';'))
    }
}

impl fmt::Display for TypeDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for TypeDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TypeDescriptor::parse(s)
    }
}

/// Identity of a traced array: its type plus the runtime's 32-bit identity
/// hash. Distinct runtime arrays may share a key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArrayKey {
    pub ty: TypeDescriptor,
    pub hash_token: u32,
}

impl ArrayKey {
    pub fn new(ty: TypeDescriptor, hash_token: u32) -> Self {
        ArrayKey { ty, hash_token }
    }

    /// Parses `<descriptor>@<hex>`.
    pub fn parse(token: &str) -> Result<ArrayKey> {
        let (ty, hash) = token
            .rsplit_once('@')
            .ok_or_else(|| Error::validation(format!("array id {token:?} lacks '@'")))?;
        let hash_token = parse_hex_u32(hash)
            .ok_or_else(|| Error::validation(format!("array id {token:?} has a bad hash")))?;
        Ok(ArrayKey {
            ty: TypeDescriptor::parse(ty)?,
            hash_token,
        })
    }
}

impl Ord for ArrayKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.ty
            .raw
            .cmp(&other.ty.raw)
            .then(self.hash_token.cmp(&other.hash_token))
    }
}

impl PartialOrd for ArrayKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ArrayKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{:x}", self.ty.raw, self.hash_token)
    }
}

/// Parses 1 to 8 hex digits, either case, no prefix.
pub fn parse_hex_u32(token: &str) -> Option<u32> {
    if token.is_empty() || token.len() > 8 || !token.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    u32::from_str_radix(token, 16).ok()
}

/// One logged load or store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AccessRecord {
    pub mode: Mode,
    /// Signed so that out-of-bounds negative indices survive.
    pub index: i64,
    /// Array length observed at this access.
    pub length: u64,
    /// Raw runtime thread id.
    pub thread: u64,
    /// Source line, `-1` when unknown.
    pub line: i64,
    pub class_hash: u32,
}

impl AccessRecord {
    pub fn is_out_of_bounds(&self) -> bool {
        self.index < 0 || self.index as u64 >= self.length
    }
}

/// One element of an access pattern. `thread` is normalized (starts at 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternEntry {
    pub index: i64,
    pub mode: Mode,
    pub thread: u32,
}

impl PatternEntry {
    pub fn new(index: i64, mode: Mode, thread: u32) -> Self {
        PatternEntry {
            index,
            mode,
            thread,
        }
    }
}

/// The ordered `(index, mode, thread)` tuples observed for one array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AccessPattern {
    entries: Vec<PatternEntry>,
}

impl AccessPattern {
    /// Wraps already-normalized entries, rejecting anything that breaks the
    /// first-appearance numbering of threads.
    pub fn new(entries: Vec<PatternEntry>) -> Result<AccessPattern> {
        let pattern = AccessPattern { entries };
        if !pattern.is_normalized() {
            return Err(Error::validation("pattern threads are not normalized"));
        }
        Ok(pattern)
    }

    pub(crate) fn from_normalized(entries: Vec<PatternEntry>) -> AccessPattern {
        debug_assert!(AccessPattern {
            entries: entries.clone()
        }
        .is_normalized());
        AccessPattern { entries }
    }

    pub fn entries(&self) -> &[PatternEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        self.entries.iter().map(|e| e.index)
    }

    /// Thread ids are exactly `1..=k`, each first appearing after its
    /// predecessor.
    pub fn is_normalized(&self) -> bool {
        let mut highest = 0u32;
        for entry in &self.entries {
            if entry.thread == 0 || entry.thread > highest + 1 {
                return false;
            }
            highest = highest.max(entry.thread);
        }
        true
    }

    pub fn thread_count(&self) -> u32 {
        self.entries.iter().map(|e| e.thread).max().unwrap_or(0)
    }

    /// Renders the bracketed tuple form, e.g. `[[r 0 1][r 1 1]]`.
    pub fn to_tuple_string(&self) -> String {
        let mut out = String::with_capacity(self.entries.len() * 8 + 2);
        out.push('[');
        for e in &self.entries {
            out.push_str(&format!("[{} {} {}]", e.mode, e.index, e.thread));
        }
        out.push(']');
        out
    }
}

/// Shape families recognized by the sequencer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shape {
    Constant,
    LinearInc,
    LinearDec,
    RepStepInc,
    RepStepDec,
    VarStepInc,
    VarStepDec,
    Fringes,
    Peaks,
    Saws,
    ParallelTrav,
    LinRepUpDown,
    Unidentified,
}

impl Shape {
    pub const ALL: [Shape; 13] = [
        Shape::Constant,
        Shape::LinearInc,
        Shape::LinearDec,
        Shape::RepStepInc,
        Shape::RepStepDec,
        Shape::VarStepInc,
        Shape::VarStepDec,
        Shape::Fringes,
        Shape::Peaks,
        Shape::Saws,
        Shape::ParallelTrav,
        Shape::LinRepUpDown,
        Shape::Unidentified,
    ];

    /// Shapes searched for in the first sequencing round.
    pub fn is_first_round(self) -> bool {
        matches!(
            self,
            Shape::Constant
                | Shape::LinearInc
                | Shape::LinearDec
                | Shape::RepStepInc
                | Shape::RepStepDec
                | Shape::VarStepInc
                | Shape::VarStepDec
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Constant => "constant",
            Shape::LinearInc => "linear_increasing",
            Shape::LinearDec => "linear_decreasing",
            Shape::RepStepInc => "repeated_step_increasing",
            Shape::RepStepDec => "repeated_step_decreasing",
            Shape::VarStepInc => "variable_step_increasing",
            Shape::VarStepDec => "variable_step_decreasing",
            Shape::Fringes => "fringes",
            Shape::Peaks => "peaks",
            Shape::Saws => "saws",
            Shape::ParallelTrav => "parallel_traversals",
            Shape::LinRepUpDown => "linear_repeated_up_down",
            Shape::Unidentified => "unidentified",
        }
    }
}

/// A shape together with its constant step (linear shapes only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShapeTag {
    shape: Shape,
    step: Option<u64>,
}

impl ShapeTag {
    /// Tag for any non-linear shape.
    pub fn plain(shape: Shape) -> ShapeTag {
        assert!(
            !matches!(shape, Shape::LinearInc | Shape::LinearDec),
            "linear shapes carry a step"
        );
        ShapeTag { shape, step: None }
    }

    pub fn linear_inc(step: u64) -> ShapeTag {
        assert!(step >= 1);
        ShapeTag {
            shape: Shape::LinearInc,
            step: Some(step),
        }
    }

    pub fn linear_dec(step: u64) -> ShapeTag {
        assert!(step >= 1);
        ShapeTag {
            shape: Shape::LinearDec,
            step: Some(step),
        }
    }

    pub const UNIDENTIFIED: ShapeTag = ShapeTag {
        shape: Shape::Unidentified,
        step: None,
    };

    pub fn shape(self) -> Shape {
        self.shape
    }

    pub fn step(self) -> Option<u64> {
        self.step
    }

    pub fn is_identified(self) -> bool {
        self.shape != Shape::Unidentified
    }

    /// Short code used in encoding strings.
    pub fn code(self) -> String {
        match (self.shape, self.step) {
            (Shape::Constant, _) => "C".into(),
            (Shape::LinearInc, Some(1)) => "SLi".into(),
            (Shape::LinearInc, Some(s)) => format!("Li{s}"),
            (Shape::LinearDec, Some(1)) => "SLd".into(),
            (Shape::LinearDec, Some(s)) => format!("Ld{s}"),
            (Shape::RepStepInc, _) => "RSi".into(),
            (Shape::RepStepDec, _) => "RSd".into(),
            (Shape::VarStepInc, _) => "VSi".into(),
            (Shape::VarStepDec, _) => "VSd".into(),
            (Shape::Fringes, _) => "Fr".into(),
            (Shape::Peaks, _) => "Pk".into(),
            (Shape::Saws, _) => "Sw".into(),
            (Shape::ParallelTrav, _) => "PT".into(),
            (Shape::LinRepUpDown, _) => "LRud".into(),
            (Shape::Unidentified, _) => "U".into(),
            (Shape::LinearInc | Shape::LinearDec, None) => unreachable!(),
        }
    }

    pub fn from_code(code: &str) -> Option<ShapeTag> {
        let plain = match code {
            "C" => Shape::Constant,
            "SLi" => return Some(ShapeTag::linear_inc(1)),
            "SLd" => return Some(ShapeTag::linear_dec(1)),
            "RSi" => Shape::RepStepInc,
            "RSd" => Shape::RepStepDec,
            "VSi" => Shape::VarStepInc,
            "VSd" => Shape::VarStepDec,
            "Fr" => Shape::Fringes,
            "Pk" => Shape::Peaks,
            "Sw" => Shape::Saws,
            "PT" => Shape::ParallelTrav,
            "LRud" => Shape::LinRepUpDown,
            "U" => Shape::Unidentified,
            _ => {
                let (ctor, digits): (fn(u64) -> ShapeTag, &str) =
                    if let Some(d) = code.strip_prefix("Li") {
                        (ShapeTag::linear_inc, d)
                    } else {
                        let d = code.strip_prefix("Ld")?;
                        (ShapeTag::linear_dec, d)
                    };
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                // "Li1" would alias "SLi"; only the canonical spelling parses.
                let step: u64 = digits.parse().ok().filter(|&s| s >= 2)?;
                if digits.starts_with('0') {
                    return None;
                }
                return Some(ctor(step));
            }
        };
        Some(ShapeTag::plain(plain))
    }
}

impl fmt::Display for ShapeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

/// One classified sub-pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SliceCode {
    pub shape: ShapeTag,
    pub mode: SliceMode,
    pub thread_count: u32,
    /// Number of accesses the slice covers.
    pub len: u64,
}

/// How much of a pattern the identified slices cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Coverage {
    Full,
    Partial,
    None,
}

impl Coverage {
    pub fn as_str(self) -> &'static str {
        match self {
            Coverage::Full => "full",
            Coverage::Partial => "partial",
            Coverage::None => "none",
        }
    }
}

/// The sequenced form of one access pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SequenceEncoding {
    /// Lowest index accessed anywhere in the pattern.
    pub min_index: i64,
    pub slices: Vec<SliceCode>,
}

impl SequenceEncoding {
    pub fn coverage(&self) -> Coverage {
        let identified = self
            .slices
            .iter()
            .filter(|s| s.shape.is_identified())
            .count();
        if identified == self.slices.len() {
            Coverage::Full
        } else if identified == 0 {
            Coverage::None
        } else {
            Coverage::Partial
        }
    }

    /// Sum of slice lengths.
    pub fn total_len(&self) -> u64 {
        self.slices.iter().map(|s| s.len).sum()
    }
}

/// Read/write character of a non-empty run of pattern entries.
pub fn mode_of_slice(entries: &[PatternEntry]) -> Result<SliceMode> {
    SliceMode::of_modes(entries.iter().map(|e| e.mode))
        .ok_or_else(|| Error::validation("mode_of_slice called on an empty slice"))
}
