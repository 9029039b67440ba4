//! Readers and writers for the on-disk trace formats.
//!
//! Three text formats are handled, all ASCII with LF line endings and single
//! space separators:
//!
//! * raw per-access lines (`.atrace`):
//!   `<arrayId> <mode> <index> <length> <thread> <line> <classHash>`
//! * grouped per-array blocks (`.agrp`): a header `<arrayId> <length> <nAccesses>`
//!   followed by `nAccesses` lines `<mode> <index> <thread> <line> <classHash>`
//! * class maps (`.cmap`): `<classHash> <class file name>`
//!
//! Array hashes are written as lowercase hex, class hashes as uppercase hex,
//! neither padded. Parsers accept either case. Any input path ending in `.gz`
//! is decompressed transparently.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;

use crate::error::{Error, Result};
use crate::trace_model::{parse_hex_u32, AccessRecord, ArrayKey, Mode};

/// Diagnostics kept verbatim; later ones are only counted.
pub const MAX_KEPT_DIAGNOSTICS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line number in the source stream.
    pub line: u64,
    pub message: String,
}

/// Counters accumulated while parsing a stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseSummary {
    pub lines: u64,
    pub records: u64,
    pub malformed: u64,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseSummary {
    fn report(&mut self, line: u64, message: String) {
        self.malformed += 1;
        log::debug!("line {line}: {message}");
        if self.diagnostics.len() < MAX_KEPT_DIAGNOSTICS {
            self.diagnostics.push(Diagnostic { line, message });
        }
    }

    pub fn merge(&mut self, other: &ParseSummary) {
        self.lines += other.lines;
        self.records += other.records;
        self.malformed += other.malformed;
        for d in &other.diagnostics {
            if self.diagnostics.len() >= MAX_KEPT_DIAGNOSTICS {
                break;
            }
            self.diagnostics.push(d.clone());
        }
    }
}

/// One line of the raw per-access format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTraceLine {
    pub key: ArrayKey,
    pub rec: AccessRecord,
}

impl RawTraceLine {
    pub fn parse(line: &str) -> Result<RawTraceLine> {
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != 7 {
            return Err(Error::validation(format!(
                "expected 7 fields, found {}",
                fields.len()
            )));
        }
        let key = ArrayKey::parse(fields[0])?;
        let mode = parse_mode(fields[1])?;
        let index = parse_num::<i64>(fields[2], "index")?;
        let length = parse_num::<u64>(fields[3], "length")?;
        let thread = parse_num::<u64>(fields[4], "thread")?;
        let line_no = parse_num::<i64>(fields[5], "line")?;
        let class_hash = parse_class_hash(fields[6])?;
        Ok(RawTraceLine {
            key,
            rec: AccessRecord {
                mode,
                index,
                length,
                thread,
                line: line_no,
                class_hash,
            },
        })
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let r = &self.rec;
        writeln!(
            out,
            "{} {} {} {} {} {} {:X}",
            self.key, r.mode, r.index, r.length, r.thread, r.line, r.class_hash
        )
    }
}

fn parse_mode(token: &str) -> Result<Mode> {
    Mode::from_token(token).ok_or_else(|| Error::validation(format!("bad mode {token:?}")))
}

fn parse_num<T: std::str::FromStr>(token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::validation(format!("bad {what} {token:?}")))
}

fn parse_class_hash(token: &str) -> Result<u32> {
    parse_hex_u32(token).ok_or_else(|| Error::validation(format!("bad class hash {token:?}")))
}

/// Streaming reader over raw trace lines. Malformed lines are skipped and
/// recorded in [`RawReader::summary`]; only I/O failures surface as errors.
pub struct RawReader<R> {
    input: R,
    buf: String,
    summary: ParseSummary,
}

pub fn parse_raw<R: BufRead>(input: R) -> RawReader<R> {
    RawReader {
        input,
        buf: String::new(),
        summary: ParseSummary::default(),
    }
}

impl<R: BufRead> RawReader<R> {
    pub fn summary(&self) -> &ParseSummary {
        &self.summary
    }

    pub fn into_summary(self) -> ParseSummary {
        self.summary
    }
}

impl<R: BufRead> Iterator for RawReader<R> {
    type Item = Result<RawTraceLine>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.summary.lines += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }
            match RawTraceLine::parse(line) {
                Ok(parsed) => {
                    self.summary.records += 1;
                    return Some(Ok(parsed));
                }
                Err(e) => {
                    let n = self.summary.lines;
                    self.summary.report(n, e.to_string());
                }
            }
        }
    }
}

pub fn write_raw<'a, W: Write>(
    out: &mut W,
    lines: impl IntoIterator<Item = &'a RawTraceLine>,
) -> Result<()> {
    for line in lines {
        line.write_to(out)?;
    }
    Ok(())
}

/// One access line of the grouped format. The per-access length is not part
/// of this format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupedRecord {
    pub mode: Mode,
    pub index: i64,
    pub thread: u64,
    pub line: i64,
    pub class_hash: u32,
}

impl From<&AccessRecord> for GroupedRecord {
    fn from(r: &AccessRecord) -> Self {
        GroupedRecord {
            mode: r.mode,
            index: r.index,
            thread: r.thread,
            line: r.line,
            class_hash: r.class_hash,
        }
    }
}

impl GroupedRecord {
    fn parse(line: &str) -> Result<GroupedRecord> {
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::validation(format!(
                "expected 5 record fields, found {}",
                fields.len()
            )));
        }
        Ok(GroupedRecord {
            mode: parse_mode(fields[0])?,
            index: parse_num(fields[1], "index")?,
            thread: parse_num(fields[2], "thread")?,
            line: parse_num(fields[3], "line")?,
            class_hash: parse_class_hash(fields[4])?,
        })
    }

    /// Expands back to a full record using the block's header length.
    pub fn to_record(&self, length: u64) -> AccessRecord {
        AccessRecord {
            mode: self.mode,
            index: self.index,
            length,
            thread: self.thread,
            line: self.line,
            class_hash: self.class_hash,
        }
    }
}

/// All accesses to one array, as stored in the grouped format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedArrayBlock {
    pub key: ArrayKey,
    /// Length observed at the first access.
    pub header_length: u64,
    pub records: Vec<GroupedRecord>,
}

impl GroupedArrayBlock {
    pub fn n_accesses(&self) -> usize {
        self.records.len()
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::validation(format!(
                "grouped block for {} has no records",
                self.key
            )));
        }
        writeln!(
            out,
            "{} {} {}",
            self.key,
            self.header_length,
            self.records.len()
        )?;
        for r in &self.records {
            writeln!(
                out,
                "{} {} {} {} {:X}",
                r.mode, r.index, r.thread, r.line, r.class_hash
            )?;
        }
        Ok(())
    }
}

pub fn write_grouped<'a, W: Write>(
    out: &mut W,
    blocks: impl IntoIterator<Item = &'a GroupedArrayBlock>,
) -> Result<()> {
    for block in blocks {
        block.write_to(out)?;
    }
    Ok(())
}

fn parse_header(line: &str) -> Option<Result<(ArrayKey, u64, u64)>> {
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    if fields.len() != 3 || !fields[0].contains('@') {
        return None;
    }
    Some((|| {
        let key = ArrayKey::parse(fields[0])?;
        let length = parse_num::<u64>(fields[1], "array length")?;
        let n = parse_num::<u64>(fields[2], "access count")?;
        Ok((key, length, n))
    })())
}

/// Streaming reader over grouped blocks. Blocks whose record count disagrees
/// with their header are dropped with a diagnostic.
pub struct GroupedReader<R> {
    input: R,
    buf: String,
    line_no: u64,
    pending_header: Option<(u64, String)>,
    summary: ParseSummary,
}

pub fn parse_grouped<R: BufRead>(input: R) -> GroupedReader<R> {
    GroupedReader {
        input,
        buf: String::new(),
        line_no: 0,
        pending_header: None,
        summary: ParseSummary::default(),
    }
}

impl<R: BufRead> GroupedReader<R> {
    pub fn summary(&self) -> &ParseSummary {
        &self.summary
    }

    pub fn into_summary(self) -> ParseSummary {
        self.summary
    }

    fn next_line(&mut self) -> io::Result<Option<(u64, String)>> {
        loop {
            self.buf.clear();
            if self.input.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            self.summary.lines += 1;
            let line = self.buf.trim_end_matches(['\n', '\r']);
            if !line.trim().is_empty() {
                return Ok(Some((self.line_no, line.to_owned())));
            }
        }
    }
}

impl<R: BufRead> Iterator for GroupedReader<R> {
    type Item = Result<GroupedArrayBlock>;

    fn next(&mut self) -> Option<Self::Item> {
        'blocks: loop {
            let (header_no, header) = match self.pending_header.take() {
                Some(h) => h,
                None => match self.next_line() {
                    Ok(Some(h)) => h,
                    Ok(None) => return None,
                    Err(e) => return Some(Err(e.into())),
                },
            };
            let (key, header_length, expected) = match parse_header(&header) {
                Some(Ok(h)) => h,
                Some(Err(e)) => {
                    self.summary.report(header_no, e.to_string());
                    continue;
                }
                None => {
                    self.summary
                        .report(header_no, "record line outside of any block".into());
                    continue;
                }
            };
            let mut records = Vec::with_capacity(expected.min(1 << 16) as usize);
            let mut bad = false;
            while (records.len() as u64) < expected {
                let (no, line) = match self.next_line() {
                    Ok(Some(l)) => l,
                    Ok(None) => {
                        self.summary.report(
                            header_no,
                            format!(
                                "block {key} declares {expected} records, found {}",
                                records.len()
                            ),
                        );
                        return None;
                    }
                    Err(e) => return Some(Err(e.into())),
                };
                if parse_header(&line).is_some() {
                    self.summary.report(
                        header_no,
                        format!(
                            "block {key} declares {expected} records, found {}",
                            records.len()
                        ),
                    );
                    self.pending_header = Some((no, line));
                    continue 'blocks;
                }
                match GroupedRecord::parse(&line) {
                    Ok(r) => records.push(r),
                    Err(e) => {
                        // Keep consuming the block so the next header lines up.
                        self.summary.report(no, e.to_string());
                        bad = true;
                        records.push(GroupedRecord {
                            mode: Mode::Read,
                            index: 0,
                            thread: 0,
                            line: 0,
                            class_hash: 0,
                        });
                    }
                }
            }
            if bad {
                self.summary
                    .report(header_no, format!("block {key} dropped"));
                continue;
            }
            if records.is_empty() {
                self.summary
                    .report(header_no, format!("block {key} declares zero records"));
                continue;
            }
            self.summary.records += records.len() as u64;
            return Some(Ok(GroupedArrayBlock {
                key,
                header_length,
                records,
            }));
        }
    }
}

/// Class hash to class-file name lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassMap {
    entries: BTreeMap<u32, String>,
    /// `(hash, first name, conflicting name)` for every duplicate hash.
    pub collisions: Vec<(u32, String, String)>,
}

impl ClassMap {
    pub fn insert(&mut self, hash: u32, name: impl Into<String>) {
        let name = name.into();
        match self.entries.get(&hash) {
            Some(existing) if *existing != name => {
                self.collisions.push((hash, existing.clone(), name));
            }
            Some(_) => {}
            None => {
                self.entries.insert(hash, name);
            }
        }
    }

    pub fn lookup(&self, hash: u32) -> Option<&str> {
        self.entries.get(&hash).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for (hash, name) in &self.entries {
            writeln!(out, "{hash:X} {name}")?;
        }
        Ok(())
    }
}

pub fn parse_class_map<R: BufRead>(input: R) -> Result<(ClassMap, ParseSummary)> {
    let mut map = ClassMap::default();
    let mut summary = ParseSummary::default();
    for line in input.lines() {
        let line = line?;
        summary.lines += 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some((hash, name)) = trimmed.split_once(' ') else {
            let n = summary.lines;
            summary.report(n, format!("class map line {trimmed:?} has no name"));
            continue;
        };
        match parse_hex_u32(hash) {
            Some(h) if !name.trim().is_empty() => {
                summary.records += 1;
                map.insert(h, name.trim());
            }
            _ => {
                let n = summary.lines;
                summary.report(n, format!("bad class map line {trimmed:?}"));
            }
        }
    }
    Ok((map, summary))
}

fn with_path(err: io::Error, path: &Path) -> io::Error {
    io::Error::new(err.kind(), format!("{}: {err}", path.display()))
}

/// Opens a file for buffered reading, decompressing `.gz` files.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let file = File::open(path).map_err(|e| with_path(e, path))?;
    let is_gz = path.extension().is_some_and(|e| e == "gz");
    Ok(if is_gz {
        Box::new(BufReader::with_capacity(
            1 << 16,
            MultiGzDecoder::new(BufReader::new(file)),
        ))
    } else {
        Box::new(BufReader::with_capacity(1 << 16, file))
    })
}

/// Expands directories (keeping files whose name ends in one of `suffixes`)
/// and returns every input in lexicographic path order.
pub fn collect_inputs(paths: &[PathBuf], suffixes: &[&str]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        let meta = std::fs::metadata(path).map_err(|e| with_path(e, path))?;
        if meta.is_dir() {
            for entry in std::fs::read_dir(path)? {
                let entry = entry?;
                let name = entry.file_name();
                let name = name.to_string_lossy();
                if entry.file_type()?.is_file() && suffixes.iter().any(|s| name.ends_with(s)) {
                    out.push(entry.path());
                }
            }
        } else {
            out.push(path.clone());
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}
