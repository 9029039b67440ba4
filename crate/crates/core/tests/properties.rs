use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;

use arraytrace::pattern_extract::{
    dedup_patterns, group_by_array, min_mem_budget, normalize_entries, normalize_threads,
    ArrayTrace, GroupConfig,
};
use arraytrace::sequencer::{
    access_shares, classify_whole, parse_encoding, render, sequence, split_index, split_slices,
    RenderOptions, SequencerConfig, ShapeSet,
};
use arraytrace::stats::{
    class_scope_filter, ArrayFacts, CategoryPrefixes, Scope, StatsReport, UnresolvedPolicy,
};
use arraytrace::trace_io::{parse_grouped, parse_raw, write_raw, ClassMap, RawTraceLine};
use arraytrace::trace_model::{
    AccessPattern, AccessRecord, ArrayKey, Mode, PatternEntry, SequenceEncoding, Shape,
    TypeDescriptor,
};
use proptest::prelude::*;

const TYPES: [&str; 6] = [
    "[I",
    "[[D",
    "[Z",
    "[Ljava.lang.String;",
    "[[Lscala.Tuple2;",
    "[Lorg.example.Node;",
];

fn descriptor() -> impl Strategy<Value = TypeDescriptor> {
    let element = prop_oneof![
        prop::sample::select(vec!['Z', 'B', 'C', 'D', 'F', 'I', 'J', 'S']).prop_map(String::from),
        "[a-z]{1,6}(\\.[A-Za-z$0-9]{1,8}){0,3}".prop_map(|n| format!("L{n};")),
    ];
    (1usize..5, element).prop_map(|(dims, el)| {
        TypeDescriptor::parse(&format!("{}{}", "[".repeat(dims), el)).unwrap()
    })
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Read), Just(Mode::Write)]
}

/// Keys drawn from a small pool so that arrays repeat.
fn small_key() -> impl Strategy<Value = ArrayKey> {
    (0usize..TYPES.len(), 0u32..4)
        .prop_map(|(t, h)| ArrayKey::new(TypeDescriptor::parse(TYPES[t]).unwrap(), h))
}

fn record() -> impl Strategy<Value = AccessRecord> {
    (mode(), -2i64..40, 1u64..40, 1u64..5, -1i64..300, 0u32..6).prop_map(
        |(mode, index, length, thread, line, class_hash)| AccessRecord {
            mode,
            index,
            length,
            thread,
            line,
            class_hash: class_hash.wrapping_mul(0x1A0C_9142),
        },
    )
}

fn raw_line() -> impl Strategy<Value = RawTraceLine> {
    (small_key(), record()).prop_map(|(key, rec)| RawTraceLine { key, rec })
}

fn wide_raw_line() -> impl Strategy<Value = RawTraceLine> {
    (
        descriptor(),
        any::<u32>(),
        mode(),
        any::<i64>(),
        any::<u64>(),
        any::<u64>(),
        any::<i64>(),
        any::<u32>(),
    )
        .prop_map(
            |(ty, h, mode, index, length, thread, line, class_hash)| RawTraceLine {
                key: ArrayKey::new(ty, h),
                rec: AccessRecord {
                    mode,
                    index,
                    length,
                    thread,
                    line,
                    class_hash,
                },
            },
        )
}

fn normalized_pattern(max_len: usize) -> impl Strategy<Value = AccessPattern> {
    prop::collection::vec((0i64..12, mode(), 0u64..4), 1..max_len).prop_map(normalize_entries)
}

fn group_all(lines: &[RawTraceLine], budget: usize) -> Vec<ArrayTrace> {
    let config = GroupConfig {
        spill_dir: None,
        mem_budget: budget,
    };
    group_by_array(lines.iter().cloned().map(Ok), &config)
        .unwrap()
        .collect::<Result<Vec<_>, _>>()
        .unwrap()
}

fn report_of(traces: &[ArrayTrace]) -> StatsReport {
    let prefixes = CategoryPrefixes::default();
    let mut report = StatsReport::default();
    for t in traces {
        report.accumulate(&ArrayFacts::of(t, &prefixes));
    }
    let groups = dedup_patterns(traces.iter().map(|t| (t.key.clone(), normalize_threads(t))));
    for g in &groups {
        let seq = sequence(&g.pattern, ShapeSet::Round2, &SequencerConfig::default());
        report.add_pattern(g.member_count(), &seq.encoding());
    }
    report
}

fn traces_from(records: Vec<Vec<AccessRecord>>) -> Vec<ArrayTrace> {
    records
        .into_iter()
        .enumerate()
        .map(|(i, recs)| {
            let ty = TypeDescriptor::parse(TYPES[i % TYPES.len()]).unwrap();
            ArrayTrace::new(ArrayKey::new(ty, i as u32), recs)
        })
        .collect()
}

fn some_traces() -> impl Strategy<Value = Vec<ArrayTrace>> {
    prop::collection::vec(prop::collection::vec(record(), 1..20), 0..12).prop_map(traces_from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn descriptor_round_trips(ty in descriptor()) {
        let text = ty.to_string();
        let back = TypeDescriptor::parse(&text).unwrap();
        prop_assert_eq!(back.dims(), text.bytes().take_while(|&b| b == b'[').count() as u32);
        prop_assert_eq!(&back, &ty);
        let key = ArrayKey::new(ty, 0xBEEF);
        prop_assert_eq!(ArrayKey::parse(&key.to_string()).unwrap(), key);
    }

    #[test]
    fn raw_lines_round_trip(lines in prop::collection::vec(wide_raw_line(), 0..30)) {
        let mut buf = Vec::new();
        write_raw(&mut buf, &lines).unwrap();
        let mut reader = parse_raw(Cursor::new(buf));
        let back: Vec<RawTraceLine> = reader.by_ref().collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(back, lines);
        prop_assert_eq!(reader.summary().malformed, 0);
    }

    #[test]
    fn grouped_blocks_round_trip(lines in prop::collection::vec(raw_line(), 1..80)) {
        let traces = group_all(&lines, 1 << 20);
        let mut buf = Vec::new();
        for t in &traces {
            t.to_block().write_to(&mut buf).unwrap();
        }
        let blocks: Vec<_> = parse_grouped(Cursor::new(buf)).collect::<Result<_, _>>().unwrap();
        prop_assert_eq!(blocks.len(), traces.len());
        for (b, t) in blocks.iter().zip(&traces) {
            prop_assert_eq!(b, &t.to_block());
        }
    }

    #[test]
    fn grouping_conserves_and_keeps_order(lines in prop::collection::vec(raw_line(), 0..200)) {
        let traces = group_all(&lines, 1 << 20);
        let mut expected: BTreeMap<ArrayKey, Vec<AccessRecord>> = BTreeMap::new();
        for l in &lines {
            expected.entry(l.key.clone()).or_default().push(l.rec);
        }
        let got: BTreeMap<ArrayKey, Vec<AccessRecord>> =
            traces.iter().map(|t| (t.key.clone(), t.records.clone())).collect();
        prop_assert_eq!(got.len(), traces.len());
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn spilling_does_not_change_grouping(lines in prop::collection::vec(raw_line(), 0..3000)) {
        let small = group_all(&lines, min_mem_budget());
        let large = group_all(&lines, 1 << 26);
        prop_assert_eq!(small.len(), large.len());
        for (a, b) in small.iter().zip(&large) {
            prop_assert_eq!(&a.key, &b.key);
            prop_assert_eq!(&a.records, &b.records);
        }
    }

    #[test]
    fn normalization_is_idempotent(items in prop::collection::vec((0i64..9, mode(), 0u64..1000), 0..40)) {
        let once = normalize_entries(items.iter().copied());
        prop_assert!(once.is_normalized());
        let twice = normalize_entries(once.entries().iter().map(|e| (e.index, e.mode, e.thread as u64)));
        prop_assert_eq!(&twice, &once);
        let distinct: BTreeSet<u64> = items.iter().map(|i| i.2).collect();
        prop_assert_eq!(once.thread_count() as usize, distinct.len());
    }

    #[test]
    fn dedup_matches_pairwise_comparison(pats in prop::collection::vec(normalized_pattern(5), 1..40)) {
        let items: Vec<(ArrayKey, AccessPattern)> = pats
            .iter()
            .enumerate()
            .map(|(i, p)| (ArrayKey::new(TypeDescriptor::parse("[I").unwrap(), i as u32), p.clone()))
            .collect();
        let groups = dedup_patterns(items.clone());
        let mut brute: BTreeSet<Vec<u32>> = BTreeSet::new();
        for (_, p) in &items {
            brute.insert(
                items.iter().filter(|(_, q)| q == p).map(|(k, _)| k.hash_token).collect(),
            );
        }
        let got: BTreeSet<Vec<u32>> = groups
            .iter()
            .map(|g| g.member_keys.iter().map(|k| k.hash_token).collect())
            .collect();
        prop_assert_eq!(groups.len(), brute.len());
        prop_assert_eq!(got, brute);
        for g in &groups {
            for k in &g.member_keys {
                prop_assert_eq!(&items[k.hash_token as usize].1, &g.pattern);
            }
        }
    }

    #[test]
    fn slices_partition_the_pattern(p in normalized_pattern(40), round2 in any::<bool>()) {
        let shapes = if round2 { ShapeSet::Round2 } else { ShapeSet::Round1 };
        let seq = sequence(&p, shapes, &SequencerConfig::default());
        let mut next = 0;
        for s in &seq.slices {
            prop_assert_eq!(s.start, next);
            prop_assert!(s.len > 0);
            prop_assert!(shapes.contains(s.code.shape.shape()) || !s.code.shape.is_identified());
            next += s.len;
        }
        prop_assert_eq!(next, p.len());
        prop_assert_eq!(seq.min_index, p.indices().min().unwrap());
        let indices: Vec<i64> = p.indices().collect();
        let cuts = split_slices(&indices);
        prop_assert_eq!(cuts.iter().map(|r| r.len()).sum::<usize>(), indices.len());
    }

    #[test]
    fn later_slices_start_at_the_split_index(p in normalized_pattern(40), round2 in any::<bool>()) {
        let shapes = if round2 { ShapeSet::Round2 } else { ShapeSet::Round1 };
        let indices: Vec<i64> = p.indices().collect();
        let seq = sequence(&p, shapes, &SequencerConfig::default());
        if seq.slices.len() > 1 {
            let split = split_index(&indices).unwrap();
            for s in &seq.slices[1..] {
                prop_assert_eq!(indices[s.start], split);
            }
        }
    }

    #[test]
    fn encoding_render_parse_round_trips(p in normalized_pattern(40)) {
        let enc = sequence(&p, ShapeSet::Round2, &SequencerConfig::default()).encoding();
        let text = render(&enc, RenderOptions::default());
        prop_assert_eq!(parse_encoding(&text).unwrap(), enc);
    }

    #[test]
    fn classification_is_a_total_function(indices in prop::collection::vec(-3i64..10, 1..30)) {
        let cfg = SequencerConfig::default();
        let r1 = classify_whole(&indices, ShapeSet::Round1, &cfg);
        let r2 = classify_whole(&indices, ShapeSet::Round2, &cfg);
        prop_assert_eq!(r1, classify_whole(&indices, ShapeSet::Round1, &cfg));
        // The second round only adds shapes after the first-round ones.
        if r1.is_identified() {
            prop_assert_eq!(r1, r2);
        }
    }

    #[test]
    fn report_merge_is_commutative_and_associative(
        a in some_traces(), b in some_traces(), c in some_traces()
    ) {
        let (ra, rb, rc) = (report_of(&a), report_of(&b), report_of(&c));
        let mut ab = ra.clone();
        ab.merge(&rb);
        let mut ba = rb.clone();
        ba.merge(&ra);
        prop_assert_eq!(&ab, &ba);
        let mut ab_c = ab.clone();
        ab_c.merge(&rc);
        let mut bc = rb.clone();
        bc.merge(&rc);
        let mut a_bc = ra.clone();
        a_bc.merge(&bc);
        prop_assert_eq!(&ab_c, &a_bc);
        let mut with_unit = ra.clone();
        with_unit.merge(&StatsReport::default());
        prop_assert_eq!(&with_unit, &ra);
    }

    #[test]
    fn report_totals_are_consistent(traces in some_traces()) {
        let r = report_of(&traces);
        let n = traces.len() as u64;
        prop_assert_eq!(r.n_arrays, n);
        prop_assert_eq!(r.length_hist.values().sum::<u64>(), n);
        prop_assert_eq!(r.rw_counts.total(), n);
        prop_assert_eq!(r.coverage_hist.values().sum::<u64>(), n);
        prop_assert_eq!(r.threads_hist.values().sum::<u64>(), n);
        prop_assert_eq!(r.type_table.values().map(|t| t.count).sum::<u64>(), n);
        prop_assert_eq!(r.pattern_table.n_arrays, n);
        prop_assert_eq!(r.n_accesses, traces.iter().map(|t| t.records.len() as u64).sum::<u64>());
        prop_assert_eq!(r.shape_shares.total, r.n_accesses);
        prop_assert_eq!(r.pattern_coverage.total(), r.pattern_table.n_patterns);
        if r.shape_shares.total > 0 {
            let sum: f64 = Shape::ALL.iter().map(|&s| r.shape_shares.fraction(s)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shape_shares_sum_to_one(pats in prop::collection::vec((normalized_pattern(30), 1u64..50), 1..20)) {
        let encs: Vec<(SequenceEncoding, u64)> = pats
            .iter()
            .map(|(p, m)| (sequence(p, ShapeSet::Round2, &SequencerConfig::default()).encoding(), *m))
            .collect();
        let shares = access_shares(encs.iter().map(|(e, m)| (e, *m)));
        let expected: u64 = pats.iter().map(|(p, m)| p.len() as u64 * m).sum();
        prop_assert_eq!(shares.total, expected);
        let sum: f64 = shares.fractions().values().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn scope_filter_partitions_input(
        traces in some_traces(),
        known in prop::collection::btree_map(0u32..6, any::<bool>(), 0..6),
    ) {
        let mut classes = ClassMap::default();
        for (&h, &inside) in &known {
            let name = if inside { format!("org.app.C{h}") } else { format!("lib.other.C{h}") };
            classes.insert(h.wrapping_mul(0x1A0C_9142), name);
        }
        let n = traces.len();
        let include = class_scope_filter(traces.clone(), &classes, "org.app.", UnresolvedPolicy::Include);
        let exclude = class_scope_filter(traces.clone(), &classes, "org.app.", UnresolvedPolicy::Exclude);
        let separate = class_scope_filter(traces.clone(), &classes, "org.app.", UnresolvedPolicy::Separate);
        for split in [&include, &exclude, &separate] {
            prop_assert_eq!(split.in_scope.len() + split.out_of_scope.len() + split.unresolved.len(), n);
        }
        prop_assert!(include.unresolved.is_empty() && exclude.unresolved.is_empty());
        // Unresolved arrays move as a block between the other two sides.
        prop_assert_eq!(include.in_scope.len(), separate.in_scope.len() + separate.unresolved.len());
        prop_assert_eq!(exclude.out_of_scope.len(), separate.out_of_scope.len() + separate.unresolved.len());
        prop_assert_eq!(exclude.in_scope.len(), separate.in_scope.len());
        for t in &separate.unresolved {
            prop_assert!(t.distinct_classes.iter().any(|h| classes.lookup(*h).is_none()));
            prop_assert!(t.distinct_classes.iter().all(|h| classes
                .lookup(*h)
                .is_none_or(|n| n.starts_with("org.app."))));
        }
        for t in &separate.in_scope {
            prop_assert_eq!(
                arraytrace::stats::scope_of(t, &classes, "org.app.", UnresolvedPolicy::Exclude),
                Scope::InScope
            );
        }
    }
}

#[test]
fn pattern_entries_reject_bad_thread_numbering() {
    let bad = vec![PatternEntry::new(0, Mode::Read, 2)];
    assert!(AccessPattern::new(bad).is_err());
    let good = vec![
        PatternEntry::new(0, Mode::Read, 1),
        PatternEntry::new(1, Mode::Write, 2),
    ];
    assert!(AccessPattern::new(good).is_ok());
}
