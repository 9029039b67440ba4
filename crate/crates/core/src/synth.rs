//! Synthetic traces with known ground truth.
//!
//! A corpus is described by a JSON spec:
//!
//! ```json
//! {
//!   "seed": 42,
//!   "noise": 0.0,
//!   "interleave": 64,
//!   "templates": [
//!     {
//!       "type": "[I", "length": 8, "count": 1,
//!       "line": 12, "class": "1A0C9142", "thread_base": 1,
//!       "slices": [ { "shape": "C", "start": 5, "len": 8, "mode": "w" } ]
//!     }
//!   ]
//! }
//! ```
//!
//! Every template is instantiated `count` times. Its `slices` are
//! concatenated into one index sequence. Per slice:
//!
//! | field     | meaning                                                   |
//! |-----------|-----------------------------------------------------------|
//! | `shape`   | encoding tag (`C`, `SLi`, `Li3`, `RSd`, `PT`, `U`, ...)    |
//! | `start`   | first index                                               |
//! | `len`     | number of accesses                                        |
//! | `params`  | shape parameters, see below                               |
//! | `mode`    | string of `r`/`w` cycled over the accesses (default `r`)  |
//! | `threads` | accesses are dealt round-robin to this many threads       |
//! | `repeat`  | the slice is emitted this many times in a row             |
//!
//! Shape parameters (defaults in brackets): `RSi`/`RSd` `[hold=2, step=1]`,
//! each index held `hold` times; `VSi`/`VSd` step cycle `[1, 2]`; `LRud`
//! `[width=2]`; `Pk` `[rise=len/2]`; `Sw` `[run=4, shift=1]`; `Fr` offsets
//! from `start` cycled `[0, 8]`; `PT` `[gap=len]`, the upper traversal
//! starting `gap` above the lower one; `U` the literal indices.
//!
//! Templates are checked against the shape predicates before anything is
//! written, and `noise` replaces a fraction of each array's indices with
//! random in-bounds values, re-drawn until every touched slice stops
//! matching its planned shape. A slice that keeps its shape after repeated
//! redraws has one more of its accesses replaced, so a touched slice may
//! end up with more replaced accesses than the noise fraction alone implies.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequencer::{classify_whole, render, RenderOptions, SequencerConfig, ShapeSet};
use crate::trace_io::RawTraceLine;
use crate::trace_model::{
    parse_hex_u32, AccessRecord, ArrayKey, Mode, SequenceEncoding, Shape, ShapeTag, SliceCode,
    SliceMode, TypeDescriptor,
};

fn one() -> u32 {
    1
}

fn one_u64() -> u64 {
    1
}

fn default_mode() -> String {
    "r".to_owned()
}

fn default_line() -> i64 {
    1
}

fn default_interleave() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    pub shape: String,
    #[serde(default)]
    pub start: i64,
    pub len: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<i64>,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "one")]
    pub threads: u32,
    #[serde(default = "one")]
    pub repeat: u32,
}

impl ShapeSpec {
    pub fn new(shape: &str, start: i64, len: usize) -> ShapeSpec {
        ShapeSpec {
            shape: shape.to_owned(),
            start,
            len,
            params: Vec::new(),
            mode: default_mode(),
            threads: 1,
            repeat: 1,
        }
    }

    pub fn params(mut self, params: &[i64]) -> Self {
        self.params = params.to_vec();
        self
    }

    pub fn mode(mut self, mode: &str) -> Self {
        self.mode = mode.to_owned();
        self
    }

    pub fn threads(mut self, threads: u32) -> Self {
        self.threads = threads;
        self
    }

    pub fn repeat(mut self, repeat: u32) -> Self {
        self.repeat = repeat;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    #[serde(rename = "type")]
    pub ty: String,
    pub length: u64,
    pub count: u64,
    #[serde(default = "default_line")]
    pub line: i64,
    /// Class hash as hex; derived from the template position when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default = "one_u64")]
    pub thread_base: u64,
    pub slices: Vec<ShapeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub seed: u64,
    #[serde(default)]
    pub noise: f64,
    /// Number of arrays whose accesses are interleaved at any time.
    #[serde(default = "default_interleave")]
    pub interleave: usize,
    pub templates: Vec<Template>,
}

impl CorpusSpec {
    pub fn from_json(text: &str) -> Result<CorpusSpec> {
        serde_json::from_str(text).map_err(|e| Error::validation(format!("corpus spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<CorpusSpec> {
        CorpusSpec::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn n_arrays(&self) -> u64 {
        self.templates.iter().map(|t| t.count).sum()
    }
}

/// Returns `spec` with the given noise level.
pub fn perturb(spec: &CorpusSpec, noise: f64) -> Result<CorpusSpec> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::validation(format!(
            "noise {noise} is outside [0, 1]"
        )));
    }
    Ok(CorpusSpec {
        noise,
        ..spec.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PlannedSlice {
    start: usize,
    len: usize,
    tag: ShapeTag,
    mode: SliceMode,
    threads: u32,
}

#[derive(Debug, Clone)]
struct Compiled {
    ty: TypeDescriptor,
    length: u64,
    count: u64,
    line: i64,
    class_hash: u32,
    thread_base: u64,
    indices: Vec<i64>,
    modes: Vec<Mode>,
    threads: Vec<u32>,
    slices: Vec<PlannedSlice>,
}

fn param(p: &[i64], k: usize, default: i64) -> i64 {
    p.get(k).copied().unwrap_or(default)
}

/// Indices of one slice, before any structural checks.
fn slice_indices(spec: &ShapeSpec, tag: ShapeTag) -> Result<Vec<i64>> {
    let bad = |msg: String| Err(Error::validation(format!("{} slice: {msg}", spec.shape)));
    let (s, n, p) = (spec.start, spec.len, spec.params.as_slice());
    if n == 0 {
        return bad("len must be at least 1".into());
    }
    let out: Vec<i64> = match tag.shape() {
        Shape::Constant => vec![s; n],
        Shape::LinearInc => {
            let k = tag.step().unwrap() as i64;
            (0..n as i64).map(|i| s + i * k).collect()
        }
        Shape::LinearDec => {
            let k = tag.step().unwrap() as i64;
            (0..n as i64).map(|i| s - i * k).collect()
        }
        Shape::RepStepInc | Shape::RepStepDec => {
            let hold = param(p, 0, 2);
            let step = param(p, 1, 1);
            if hold < 2 {
                return bad("hold must be at least 2".into());
            }
            if step < 1 {
                return bad("step must be at least 1".into());
            }
            let sign = if tag.shape() == Shape::RepStepInc {
                1
            } else {
                -1
            };
            (0..n as i64)
                .map(|i| s + sign * (i / hold) * step)
                .collect()
        }
        Shape::VarStepInc | Shape::VarStepDec => {
            let steps = if p.is_empty() { &[1, 2][..] } else { p };
            if steps.iter().any(|&d| d < 1) {
                return bad("steps must be at least 1".into());
            }
            let sign = if tag.shape() == Shape::VarStepInc {
                1
            } else {
                -1
            };
            let mut cur = s;
            let mut v = Vec::with_capacity(n);
            for i in 0..n {
                v.push(cur);
                cur += sign * steps[i % steps.len()];
            }
            v
        }
        Shape::LinRepUpDown => {
            let w = param(p, 0, 2);
            if w < 1 {
                return bad("width must be at least 1".into());
            }
            (0..n as i64)
                .map(|i| {
                    let phase = i % (2 * w);
                    s + if phase <= w { phase } else { 2 * w - phase }
                })
                .collect()
        }
        Shape::Peaks => {
            let rise = param(p, 0, n as i64 / 2);
            if rise < 1 || rise as usize >= n {
                return bad("rise must be at least 1 and below len".into());
            }
            (0..n as i64)
                .map(|i| s + if i <= rise { i } else { 2 * rise - i })
                .collect()
        }
        Shape::Saws => {
            let run = param(p, 0, 4);
            let shift = param(p, 1, 1);
            if run < 2 {
                return bad("run length must be at least 2".into());
            }
            if shift < 1 || shift >= run - 1 {
                return bad("shift must be at least 1 and below run length - 1".into());
            }
            if n as i64 % run == 1 {
                return bad("the last run would have length 1".into());
            }
            (0..n as i64)
                .map(|i| s + (i / run) * shift + i % run)
                .collect()
        }
        Shape::Fringes => {
            let offsets = if p.is_empty() { &[0, 8][..] } else { p };
            (0..n).map(|i| s + offsets[i % offsets.len()]).collect()
        }
        Shape::ParallelTrav => {
            let gap = param(p, 0, n as i64);
            if gap < 2 {
                return bad("gap must be at least 2".into());
            }
            (0..n as i64)
                .map(|i| {
                    if i % 2 == 0 {
                        s + gap + i / 2
                    } else {
                        s + i / 2
                    }
                })
                .collect()
        }
        Shape::Unidentified => {
            if p.len() != n {
                return bad(format!(
                    "expects {n} literal indices in params, got {}",
                    p.len()
                ));
            }
            p.to_vec()
        }
    };
    Ok(out)
}

fn parse_mode_plan(plan: &str) -> Result<Vec<Mode>> {
    let modes: Option<Vec<Mode>> = plan
        .chars()
        .map(|c| Mode::from_token(c.encode_utf8(&mut [0; 4])))
        .collect();
    match modes {
        Some(m) if !m.is_empty() => Ok(m),
        _ => Err(Error::validation(format!(
            "mode plan {plan:?} must be a non-empty string of r/w"
        ))),
    }
}

/// The index that slices are cut at: 0 if it occurs twice, else 1 if it
/// occurs twice.
fn cut_value(indices: &[i64]) -> Option<i64> {
    [0, 1]
        .into_iter()
        .find(|&v| indices.iter().filter(|&&i| i == v).count() >= 2)
}

fn check_structure(indices: &[i64], slices: &[PlannedSlice], cfg: &SequencerConfig) -> Result<()> {
    let fail = |msg: String| Err(Error::validation(msg));
    let whole = classify_whole(indices, ShapeSet::Round2, cfg);
    if let [only] = slices {
        if whole != only.tag {
            return fail(format!(
                "planned {} but the indices classify as {}",
                only.tag, whole
            ));
        }
        if !only.tag.shape().is_first_round() && cut_value(indices).is_some() {
            return fail(format!(
                "{} pattern repeats index 0 or 1, which would split it in the first round",
                only.tag
            ));
        }
        return Ok(());
    }
    if whole.is_identified() {
        return fail(format!("multi-slice plan classifies as a whole as {whole}"));
    }
    let Some(v) = cut_value(indices) else {
        return fail("multi-slice plan needs index 0 or 1 at two or more slice starts".into());
    };
    for (k, s) in slices.iter().enumerate() {
        let body = &indices[s.start..s.start + s.len];
        if k > 0 && body[0] != v {
            return fail(format!("slice {k} must start at index {v}"));
        }
        if body[1..].contains(&v) {
            return fail(format!("slice {k} contains index {v} after its start"));
        }
        let got = classify_whole(body, ShapeSet::Round2, cfg);
        if got != s.tag {
            return fail(format!(
                "slice {k} planned {} but classifies as {got}",
                s.tag
            ));
        }
    }
    Ok(())
}

fn compile_template(t: &Template, pos: usize, cfg: &SequencerConfig) -> Result<Compiled> {
    let ctx = |e: Error| match e {
        Error::Validation(m) => Error::validation(format!("template {pos}: {m}")),
        other => other,
    };
    (|| {
        let ty = TypeDescriptor::parse(&t.ty)?;
        if t.count == 0 {
            return Err(Error::validation("count must be at least 1"));
        }
        if t.slices.is_empty() {
            return Err(Error::validation("no slices"));
        }
        let class_hash = match &t.class {
            Some(h) => parse_hex_u32(h)
                .ok_or_else(|| Error::validation(format!("bad class hash {h:?}")))?,
            None => 0x1000_0000 + pos as u32,
        };
        let (mut indices, mut modes, mut threads) = (Vec::new(), Vec::new(), Vec::new());
        let mut slices = Vec::new();
        for spec in &t.slices {
            let tag = ShapeTag::from_code(&spec.shape)
                .ok_or_else(|| Error::validation(format!("unknown shape {:?}", spec.shape)))?;
            if spec.threads == 0 || spec.repeat == 0 {
                return Err(Error::validation("threads and repeat must be at least 1"));
            }
            let body = slice_indices(spec, tag)?;
            let plan = parse_mode_plan(&spec.mode)?;
            for _ in 0..spec.repeat {
                let start = indices.len();
                let slice_modes: Vec<Mode> =
                    (0..body.len()).map(|i| plan[i % plan.len()]).collect();
                indices.extend_from_slice(&body);
                threads.extend((0..body.len()).map(|i| i as u32 % spec.threads));
                slices.push(PlannedSlice {
                    start,
                    len: body.len(),
                    tag,
                    mode: SliceMode::of_modes(slice_modes.iter().copied()).unwrap(),
                    threads: spec.threads.min(body.len() as u32),
                });
                modes.extend(slice_modes);
            }
        }
        if let Some(&bad) = indices.iter().find(|&&i| i < 0 || i as u64 >= t.length) {
            return Err(Error::validation(format!(
                "index {bad} is outside an array of length {}",
                t.length
            )));
        }
        check_structure(&indices, &slices, cfg)?;
        Ok(Compiled {
            ty,
            length: t.length,
            count: t.count,
            line: t.line,
            class_hash,
            thread_base: t.thread_base,
            indices,
            modes,
            threads,
            slices,
        })
    })()
    .map_err(ctx)
}

/// Checks a spec without generating anything.
pub fn validate(spec: &CorpusSpec) -> Result<()> {
    compile(spec).map(|_| ())
}

fn compile(spec: &CorpusSpec) -> Result<Vec<Compiled>> {
    perturb(spec, spec.noise)?;
    if spec.interleave == 0 {
        return Err(Error::validation("interleave must be at least 1"));
    }
    if spec.n_arrays() > u32::MAX as u64 {
        return Err(Error::validation("too many arrays for unique hash tokens"));
    }
    let cfg = SequencerConfig::default();
    spec.templates
        .iter()
        .enumerate()
        .map(|(i, t)| compile_template(t, i, &cfg))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthSlice {
    pub start: usize,
    pub len: usize,
    /// Planned shape tag.
    pub tag: String,
    /// Tag the sequencer is expected to report: the planned one, or `U`
    /// when noise touched the slice.
    pub expected: String,
    pub mode: String,
    pub threads: u32,
    pub perturbed: bool,
}

/// Ground truth for one generated array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub key: String,
    pub template: usize,
    pub n_accesses: usize,
    pub min_index: i64,
    /// Expected encoding; exact for arrays without perturbed slices.
    pub expected_encoding: String,
    pub slices: Vec<TruthSlice>,
    /// Accesses per expected shape name.
    pub shape_accesses: BTreeMap<String, u64>,
}

impl TruthRecord {
    pub fn is_perturbed(&self) -> bool {
        self.slices.iter().any(|s| s.perturbed)
    }
}

pub fn read_truth<R: BufRead>(input: R) -> Result<Vec<TruthRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

struct Instance {
    template: usize,
    key: ArrayKey,
    indices: Vec<i64>,
    pos: usize,
}

const REDRAWS_PER_WIDEN: usize = 200;

fn hash_token(array: u64, seed: u64) -> u32 {
    // Odd multiplier: a bijection on u32, so tokens never repeat.
    ((array as u32) ^ (seed as u32)).wrapping_mul(0x9E37_79B1)
}

/// Applies noise to one array. Returns the indices and which slices changed.
fn noisy_indices(
    c: &Compiled,
    noise: f64,
    rng: &mut ChaCha8Rng,
    cfg: &SequencerConfig,
) -> Result<(Vec<i64>, Vec<bool>)> {
    let n = c.indices.len();
    let k = (noise * n as f64).round() as usize;
    let mut touched = vec![false; c.slices.len()];
    if k == 0 {
        return Ok((c.indices.clone(), touched));
    }
    if c.length < 2 {
        return Err(Error::validation("noise needs arrays of length 2 or more"));
    }
    let mut indices = c.indices.clone();
    let mut positions = sample(rng, n, k).into_vec();
    positions.sort_unstable();
    let draw = |rng: &mut ChaCha8Rng, original: i64| loop {
        let v = rng.gen_range(0..c.length) as i64;
        if v != original {
            return v;
        }
    };
    for (si, s) in c.slices.iter().enumerate() {
        let mut mine: Vec<usize> = positions
            .iter()
            .copied()
            .filter(|&p| p >= s.start && p < s.start + s.len)
            .collect();
        if mine.is_empty() {
            continue;
        }
        touched[si] = true;
        let planned = s.tag.shape();
        let mut attempts = 0;
        loop {
            for &p in &mine {
                indices[p] = draw(rng, c.indices[p]);
            }
            let body = &indices[s.start..s.start + s.len];
            if planned == Shape::Unidentified
                || classify_whole(body, ShapeSet::Round2, cfg).shape() != planned
            {
                break;
            }
            attempts += 1;
            if attempts < REDRAWS_PER_WIDEN {
                continue;
            }
            // Some shapes survive sparse jumps (a fringe stays a fringe), so
            // pull in one more access from the slice and retry.
            attempts = 0;
            let spare: Vec<usize> = (s.start..s.start + s.len)
                .filter(|p| !mine.contains(p))
                .collect();
            if spare.is_empty() {
                return Err(Error::validation(format!(
                    "noise cannot break the {} slice at {}",
                    s.tag, s.start
                )));
            }
            mine.push(spare[rng.gen_range(0..spare.len())]);
        }
    }
    Ok((indices, touched))
}

fn truth_for(
    c: &Compiled,
    template: usize,
    key: &ArrayKey,
    indices: &[i64],
    touched: &[bool],
) -> TruthRecord {
    let mut shape_accesses = BTreeMap::new();
    let mut slices = Vec::new();
    let mut codes = Vec::new();
    for (s, &perturbed) in c.slices.iter().zip(touched) {
        let expected = if perturbed {
            ShapeTag::UNIDENTIFIED
        } else {
            s.tag
        };
        *shape_accesses
            .entry(expected.shape().name().to_owned())
            .or_default() += s.len as u64;
        codes.push(SliceCode {
            shape: expected,
            mode: s.mode,
            thread_count: s.threads,
            len: s.len as u64,
        });
        slices.push(TruthSlice {
            start: s.start,
            len: s.len,
            tag: s.tag.code(),
            expected: expected.code(),
            mode: s.mode.as_str().to_owned(),
            threads: s.threads,
            perturbed,
        });
    }
    let min_index = *indices.iter().min().unwrap();
    let encoding = SequenceEncoding {
        min_index,
        slices: codes,
    };
    TruthRecord {
        key: key.to_string(),
        template,
        n_accesses: indices.len(),
        min_index,
        expected_encoding: render(&encoding, RenderOptions::default()),
        slices,
        shape_accesses,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenSummary {
    pub arrays: u64,
    pub lines: u64,
}

/// Writes the raw trace and one truth line per array. Accesses of up to
/// `interleave` arrays are mixed in the raw output; each array's own
/// accesses stay in order.
pub fn generate<W: Write, T: Write>(
    spec: &CorpusSpec,
    raw: &mut W,
    truth: &mut T,
) -> Result<GenSummary> {
    let compiled = compile(spec)?;
    let cfg = SequencerConfig::default();
    let mut schedule = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut queue = compiled
        .iter()
        .enumerate()
        .flat_map(|(t, c)| std::iter::repeat_n(t, c.count as usize));
    let mut active: Vec<Instance> = Vec::with_capacity(spec.interleave);
    let mut next_array = 0u64;
    let mut summary = GenSummary::default();

    let spawn = |template: usize, array: u64, truth: &mut T| -> Result<Instance> {
        let c = &compiled[template];
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(array + 1);
        let (indices, touched) = noisy_indices(c, spec.noise, &mut rng, &cfg)?;
        let key = ArrayKey::new(c.ty.clone(), hash_token(array, spec.seed));
        serde_json::to_writer(
            &mut *truth,
            &truth_for(c, template, &key, &indices, &touched),
        )?;
        truth.write_all(b"\n")?;
        Ok(Instance {
            template,
            key,
            indices,
            pos: 0,
        })
    };

    loop {
        while active.len() < spec.interleave {
            let Some(t) = queue.next() else {
                break;
            };
            active.push(spawn(t, next_array, truth)?);
            next_array += 1;
        }
        if active.is_empty() {
            break;
        }
        let slot = schedule.gen_range(0..active.len());
        let inst = &mut active[slot];
        let c = &compiled[inst.template];
        let p = inst.pos;
        RawTraceLine {
            key: inst.key.clone(),
            rec: AccessRecord {
                mode: c.modes[p],
                index: inst.indices[p],
                length: c.length,
                thread: c.thread_base + c.threads[p] as u64,
                line: c.line,
                class_hash: c.class_hash,
            },
        }
        .write_to(raw)?;
        summary.lines += 1;
        inst.pos += 1;
        if inst.pos == inst.indices.len() {
            active.swap_remove(slot);
        }
    }
    summary.arrays = next_array;
    raw.flush()?;
    truth.flush()?;
    Ok(summary)
}

/// Three step-1 increasing runs over 14 elements, written, read and written
/// again, each run restarting at index 0.
pub fn three_runs_spec(count: u64, seed: u64) -> CorpusSpec {
    let run = |mode: &str| ShapeSpec::new("SLi", 0, 14).mode(mode);
    CorpusSpec {
        seed,
        noise: 0.0,
        interleave: default_interleave(),
        templates: vec![Template {
            ty: "[I".to_owned(),
            length: 14,
            count,
            line: default_line(),
            class: None,
            thread_base: 1,
            slices: vec![run("w"), run("r"), run("w")],
        }],
    }
}

/// Slice plans of the standard corpus: 50 distinct patterns covering every
/// shape tag, single- and multi-slice, with one to three threads.
pub fn standard_templates() -> Vec<Vec<ShapeSpec>> {
    let s = ShapeSpec::new;
    let u = |start: i64, idx: &[i64]| s("U", start, idx.len()).params(idx);
    vec![
        vec![s("C", 5, 8).mode("w")],
        vec![s("C", 0, 3).threads(2)],
        vec![s("SLi", 0, 16)],
        vec![s("SLi", 3, 10).mode("w").threads(2)],
        vec![s("Li2", 0, 8)],
        vec![s("Li3", 1, 6).mode("rw")],
        vec![s("SLd", 15, 16)],
        vec![s("SLd", 9, 5).mode("w").threads(3)],
        vec![s("Ld2", 15, 8)],
        vec![s("Ld4", 12, 4).mode("w")],
        vec![s("RSi", 0, 12).params(&[3, 1]).mode("rrw")],
        vec![s("RSi", 2, 10)],
        vec![s("RSi", 0, 8).params(&[2, 3]).mode("w")],
        vec![s("RSd", 9, 10)],
        vec![s("RSd", 12, 9).params(&[3, 2]).mode("rw")],
        vec![s("VSi", 0, 9)],
        vec![s("VSi", 2, 7).params(&[1, 3, 2]).mode("w")],
        vec![s("VSd", 15, 8)],
        vec![s("VSd", 14, 6).params(&[2, 1, 1]).mode("rw")],
        vec![s("Fr", 2, 6).params(&[0, 13])],
        vec![s("Fr", 3, 9).params(&[0, 5, 10]).mode("w")],
        vec![s("Fr", 2, 8).params(&[0, 9, 4, 9]).mode("rw")],
        vec![s("Pk", 2, 9).params(&[4])],
        vec![s("Pk", 5, 7).params(&[2]).mode("w")],
        vec![s("Sw", 2, 12)],
        vec![s("Sw", 3, 15).params(&[5, 2]).mode("w")],
        vec![s("PT", 2, 10).params(&[8])],
        vec![s("PT", 0, 12).params(&[10]).mode("w")],
        vec![s("LRud", 3, 10)],
        vec![s("LRud", 4, 14).params(&[3]).mode("rw")],
        vec![u(3, &[3, 9, 4, 4, 12, 2])],
        vec![
            s("SLi", 0, 14).mode("w"),
            s("SLi", 0, 14),
            s("SLi", 0, 14).mode("w"),
        ],
        vec![s("SLi", 0, 8), s("Li2", 0, 4)],
        vec![s("RSd", 6, 6), s("Li3", 0, 4).mode("w"), s("SLi", 0, 3)],
        vec![s("Pk", 2, 5).params(&[2]), s("SLi", 0, 4), s("Sw", 0, 8)],
        vec![
            s("PT", 2, 6).params(&[7]),
            s("SLi", 1, 5),
            s("SLd", 1, 2).mode("w"),
        ],
        vec![u(3, &[3, 9, 4, 4, 12, 2]), s("SLi", 0, 5), s("Li2", 0, 3)],
        vec![
            u(0, &[0, 9, 4, 4, 12, 2]),
            u(0, &[0, 7, 3, 3, 11, 1]).mode("w"),
        ],
        vec![
            s("SLi", 0, 6).mode("r").repeat(2),
            s("SLi", 0, 6).mode("w").repeat(2),
        ],
        vec![s("SLi", 0, 10).threads(2), s("Li3", 0, 4).mode("w")],
        vec![s("C", 0, 2).mode("w")],
        vec![s("SLi", 0, 2)],
        vec![s("SLd", 1, 2).mode("w")],
        vec![s("Li5", 0, 4)],
        vec![s("RSi", 0, 8).params(&[4])],
        vec![s("VSi", 0, 5).params(&[2, 1]).mode("rw")],
        vec![s("Fr", 5, 6).params(&[0, 2])],
        vec![s("Pk", 2, 5).params(&[3]).mode("rw")],
        vec![s("Sw", 0, 12).params(&[6, 2])],
        vec![s("PT", 3, 8).params(&[6]).mode("rw")],
    ]
}

const STANDARD_TYPES: [&str; 10] = [
    "[I",
    "[B",
    "[J",
    "[D",
    "[Ljava.lang.Object;",
    "[Ljava.lang.String;",
    "[Lscala.collection.mutable.HashMap$Node;",
    "[[I",
    "[C",
    "[Lorg.example.Item;",
];

/// Builds the standard corpus with `per_template` arrays of each template.
pub fn standard_corpus(per_template: u64, seed: u64, noise: f64) -> CorpusSpec {
    let templates = standard_templates()
        .into_iter()
        .enumerate()
        .map(|(i, slices)| {
            let max = slices
                .iter()
                .filter_map(|sp| {
                    let tag = ShapeTag::from_code(&sp.shape)?;
                    slice_indices(sp, tag).ok()?.into_iter().max()
                })
                .max()
                .unwrap_or(0);
            Template {
                ty: STANDARD_TYPES[i % STANDARD_TYPES.len()].to_owned(),
                length: (max as u64 + 1).max(16),
                count: per_template,
                line: 10 + i as i64,
                class: None,
                thread_base: 1 + (i as u64 % 3),
                slices,
            }
        })
        .collect();
    CorpusSpec {
        seed,
        noise,
        interleave: default_interleave(),
        templates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_io::parse_raw;

    fn single(shape: ShapeSpec, length: u64) -> CorpusSpec {
        CorpusSpec {
            seed: 7,
            noise: 0.0,
            interleave: 4,
            templates: vec![Template {
                ty: "[I".into(),
                length,
                count: 1,
                line: 3,
                class: Some("1A0C9142".into()),
                thread_base: 1,
                slices: vec![shape],
            }],
        }
    }

    fn run(spec: &CorpusSpec) -> (String, Vec<TruthRecord>) {
        let (mut raw, mut truth) = (Vec::new(), Vec::new());
        generate(spec, &mut raw, &mut truth).unwrap();
        (
            String::from_utf8(raw).unwrap(),
            read_truth(&truth[..]).unwrap(),
        )
    }

    #[test]
    fn constant_writes() {
        let (raw, truth) = run(&single(ShapeSpec::new("C", 5, 8).mode("w"), 8));
        let lines: Vec<&str> = raw.lines().collect();
        assert_eq!(lines.len(), 8);
        for l in &lines {
            assert!(l.ends_with(" w 5 8 1 3 1A0C9142"), "{l}");
        }
        assert_eq!(truth.len(), 1);
        assert_eq!(truth[0].slices.len(), 1);
        assert_eq!(truth[0].slices[0].tag, "C");
        assert_eq!(truth[0].expected_encoding, "5: |C w 1 8|");
    }

    #[test]
    fn three_runs_truth() {
        let (_, truth) = run(&three_runs_spec(1, 1));
        assert_eq!(
            truth[0].expected_encoding,
            "0: |SLi w 1 14|SLi r 1 14|SLi w 1 14|"
        );
        assert_eq!(truth[0].shape_accesses.get("linear_increasing"), Some(&42));
    }

    #[test]
    fn standard_corpus_is_valid_and_deterministic() {
        let spec = standard_corpus(3, 42, 0.0);
        assert_eq!(spec.templates.len(), 50);
        validate(&spec).unwrap();
        let a = run(&spec);
        let b = run(&spec);
        assert_eq!(a, b);
        assert_eq!(a.1.len(), 150);
        let lines: Vec<_> = parse_raw(a.0.as_bytes()).map(Result::unwrap).collect();
        let total: usize = a.1.iter().map(|t| t.n_accesses).sum();
        assert_eq!(lines.len(), total);
        let mut keys: Vec<&str> = a.1.iter().map(|t| t.key.as_str()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 150);
    }

    #[test]
    fn every_tag_is_planted() {
        let mut codes: Vec<String> = standard_templates()
            .into_iter()
            .flatten()
            .map(|s| {
                let tag = ShapeTag::from_code(&s.shape).unwrap();
                match tag.shape() {
                    Shape::LinearInc if tag.step() != Some(1) => "Li".into(),
                    Shape::LinearDec if tag.step() != Some(1) => "Ld".into(),
                    _ => tag.code(),
                }
            })
            .collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 15, "{codes:?}");
    }

    #[test]
    fn unsatisfiable_plans_name_the_constraint() {
        let err = validate(&single(ShapeSpec::new("Sw", 0, 8).params(&[1]), 16)).unwrap_err();
        assert!(err.to_string().contains("run length"), "{err}");
        let err = validate(&single(ShapeSpec::new("SLi", 10, 8), 16)).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
        // Fringes touching index 0 twice would be cut apart in the first round.
        let err = validate(&single(ShapeSpec::new("Fr", 0, 6).params(&[0, 9]), 16)).unwrap_err();
        assert!(err.to_string().contains("split"), "{err}");
        let err = validate(&single(
            ShapeSpec::new("Pk", 0, 4).params(&[1, 2, 3]).mode("x"),
            16,
        ))
        .unwrap_err();
        assert!(err.to_string().contains("mode plan"), "{err}");
    }

    #[test]
    fn noise_bounds() {
        let spec = three_runs_spec(1, 1);
        assert!(perturb(&spec, 1.5).is_err());
        assert!(perturb(&spec, -0.1).is_err());
        assert_eq!(perturb(&spec, 0.0).unwrap(), spec);
    }

    #[test]
    fn full_noise_breaks_every_slice() {
        let spec = perturb(&standard_corpus(2, 9, 0.0), 1.0).unwrap();
        let (_, truth) = run(&spec);
        for t in &truth {
            assert!(t.slices.iter().all(|s| s.perturbed && s.expected == "U"));
        }
    }
}
