use chrono::{TimeZone, Utc};
use mtbench::corpus::{
    annotations_to_jsonl, char_len, char_slice, read_annotations_from, read_triples_from, Annotation, Dimension,
    ErrorCategory, ErrorSpan, LanguagePair, Split, SpanTarget, TranslationTriple, TripleSet,
};
use mtbench::embeddings::{DeterministicProvider, EmbeddingProvider, FileStore};
use mtbench::estimator::{
    combine, read_model, write_model, EstimatorMode, EstimatorModel, SentenceEmbedding,
};
use mtbench::qa::{filter_discrepant, iaa, minmax_scale, znormalize};
use mtbench::stats::{
    average_ranks, kendall, mean_impute, pearson, rank_metrics, spearman, CorrelationKind, PairedScores,
};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Score vectors with enough spread that every correlation is defined.
fn paired(min: usize, max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (min..max)
        .prop_flat_map(|n| {
            (
                proptest::collection::vec(-100.0f64..100.0, n),
                proptest::collection::vec(-100.0f64..100.0, n),
            )
        })
        .prop_filter("non-constant", |(x, y)| {
            x.iter().any(|v| *v != x[0]) && y.iter().any(|v| *v != y[0])
        })
}

fn kendall_pairs(x: &[f64], y: &[f64]) -> f64 {
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let a = (x[i] - x[j]).signum() as i64 * (x[i] != x[j]) as i64;
            let b = (y[i] - y[j]).signum() as i64 * (y[i] != y[j]) as i64;
            match (a, b) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if a == b => c += 1,
                _ => d += 1,
            }
        }
    }
    (c - d) as f64 / (((c + d + tx) as f64) * ((c + d + ty) as f64)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn correlations_invariant_under_positive_affine((x, y) in paired(3, 40), a in 0.01f64..50.0, b in -50.0f64..50.0) {
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        for kind in CorrelationKind::ALL {
            let r = kind.compute(&x, &y).unwrap();
            prop_assert!(close(kind.compute(&ax, &y).unwrap(), r, 1e-9), "{kind}");
        }
        let neg: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
        prop_assert!(close(pearson(&neg, &y).unwrap(), -pearson(&x, &y).unwrap(), 1e-9));
    }

    #[test]
    fn rank_correlations_invariant_under_monotone_maps((x, y) in paired(3, 40)) {
        let cubed: Vec<f64> = x.iter().map(|v| v * v.abs() * v.abs() + v).collect();
        prop_assert_eq!(spearman(&cubed, &y).unwrap(), spearman(&x, &y).unwrap());
        prop_assert!(close(kendall(&cubed, &y).unwrap(), kendall(&x, &y).unwrap(), 1e-12));
    }

    #[test]
    fn spearman_is_pearson_of_ranks((x, y) in paired(3, 60)) {
        let want = pearson(&average_ranks(&x), &average_ranks(&y)).unwrap();
        prop_assert_eq!(spearman(&x, &y).unwrap().to_bits(), want.to_bits());
    }

    #[test]
    fn kendall_matches_pair_enumeration(
        (x, y) in (3usize..80).prop_flat_map(|n| (
            proptest::collection::vec(0u8..6, n),
            proptest::collection::vec(0u8..6, n),
        )).prop_filter("non-constant", |(x, y)| x.iter().any(|v| *v != x[0]) && y.iter().any(|v| *v != y[0]))
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y.into_iter().map(f64::from).collect();
        prop_assert!(close(kendall(&x, &y).unwrap(), kendall_pairs(&x, &y), 1e-12));
    }

    #[test]
    fn mean_impute_keeps_mean(values in proptest::collection::vec(proptest::option::weighted(0.7, -10.0f64..10.0), 1..50)) {
        prop_assume!(values.iter().any(Option::is_some));
        let valid: Vec<f64> = values.iter().flatten().copied().collect();
        let out = mean_impute(&values).unwrap();
        prop_assert_eq!(out.len(), values.len());
        let m_in = valid.iter().sum::<f64>() / valid.len() as f64;
        let m_out = out.iter().sum::<f64>() / out.len() as f64;
        prop_assert!(close(m_in, m_out, 1e-9));
    }

    #[test]
    fn minmax_is_bounded_and_monotone(values in proptest::collection::vec(-1e6f64..1e6, 1..100)) {
        let (scaled, _) = minmax_scale(&values).unwrap();
        for (i, s) in scaled.iter().enumerate() {
            prop_assert!((0.0..=1.0).contains(s));
            for j in 0..values.len() {
                if values[i] <= values[j] {
                    prop_assert!(scaled[i] <= scaled[j]);
                }
            }
        }
    }
}

fn annotation(segment: usize, evaluator: usize, score: u8) -> Annotation {
    Annotation {
        segment_id: format!("seg{segment:03}"),
        evaluator_id: format!("ev{evaluator}"),
        dimension: Dimension::Adequacy,
        spans: vec![],
        da_score: score,
        submitted_at: Utc.timestamp_opt(1_700_000_000 + segment as i64, 0).unwrap(),
    }
}

/// Each segment gets a random subset of evaluators (at least one) with
/// random scores.
fn annotation_set() -> impl Strategy<Value = Vec<Annotation>> {
    proptest::collection::vec((1u8..16, proptest::collection::vec(0u8..=100, 4)), 2..30).prop_map(|segments| {
        let mut out = Vec::new();
        for (s, (mask, scores)) in segments.into_iter().enumerate() {
            for (e, &score) in scores.iter().enumerate() {
                if mask & (1 << e) != 0 {
                    out.push(annotation(s, e, score));
                }
            }
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn znormalize_standardizes_each_evaluator(anns in annotation_set()) {
        let z = znormalize(&anns);
        for e in 0..4 {
            let ev = format!("ev{e}");
            let idx: Vec<usize> = (0..anns.len()).filter(|&i| anns[i].evaluator_id == ev).collect();
            let raw: Vec<u8> = idx.iter().map(|&i| anns[i].da_score).collect();
            let distinct = raw.iter().any(|&r| r != raw[0]);
            let zs: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
            if idx.len() < 2 || !distinct {
                prop_assert!(zs.iter().all(|&v| v == 0.0));
                continue;
            }
            let n = zs.len() as f64;
            let mean = zs.iter().sum::<f64>() / n;
            let sd = (zs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!(close(sd, 1.0, 1e-9));
            for a in 0..raw.len() {
                for b in 0..raw.len() {
                    if raw[a] < raw[b] {
                        prop_assert!(zs[a] < zs[b]);
                    }
                }
            }
        }
    }

    #[test]
    fn discrepancy_filter_is_idempotent(anns in annotation_set(), threshold in 0u8..=100) {
        let once = filter_discrepant(&anns, threshold);
        let kept = once.kept_annotations();
        let twice = filter_discrepant(&kept, threshold);
        prop_assert_eq!(&twice.kept, &once.kept);
        prop_assert!(twice.dropped.is_empty());
        for group in once.kept.values() {
            let hi = group.iter().map(|a| a.da_score).max().unwrap();
            let lo = group.iter().map(|a| a.da_score).min().unwrap();
            prop_assert!(hi - lo <= threshold);
        }
    }

    #[test]
    fn iaa_ignores_input_order(anns in annotation_set(), seed in any::<u64>(), rotate in 0usize..50) {
        let first = iaa(&anns, 20, seed);
        let mut shuffled = anns.clone();
        shuffled.reverse();
        let k = rotate % shuffled.len().max(1);
        shuffled.rotate_left(k);
        let second = iaa(&shuffled, 20, seed);
        match (first, second) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }
}

fn lp() -> LanguagePair {
    LanguagePair::new("eng", "yor").unwrap()
}

/// Multi-byte heavy text: Yorùbá tone marks, combining characters, emoji.
fn text() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![
            Just("ẹ"), Just("ọ̀"), Just("ṣ"), Just("á"), Just("a"), Just(" "), Just("🙂"), Just("b"), Just("ń")
        ],
        1..20,
    )
    .prop_map(|parts| format!("x{}", parts.concat()))
}

fn triple_and_annotations() -> impl Strategy<Value = (TranslationTriple, Vec<Annotation>)> {
    (text(), text(), proptest::collection::vec((any::<bool>(), 0usize..4, 0usize..50, 1usize..50, 0u8..=100), 0..6))
        .prop_map(|(src, mt, raw)| {
            let triple = TranslationTriple {
                segment_id: "s".into(),
                lp: lp(),
                src,
                mt,
                reference: None,
                split: Split::Unsplit,
            };
            let anns = raw
                .into_iter()
                .enumerate()
                .map(|(i, (source_side, cat, start, len, score))| {
                    let target = if source_side { SpanTarget::SourceSide } else { SpanTarget::TranslationSide };
                    let n = char_len(triple.text_for(target));
                    let start = start % n;
                    let end = (start + len).min(n).max(start + 1);
                    Annotation {
                        segment_id: "s".into(),
                        evaluator_id: format!("e{i}"),
                        dimension: Dimension::Adequacy,
                        spans: vec![ErrorSpan {
                            start,
                            end,
                            target,
                            category: Dimension::Adequacy.categories()[cat],
                        }],
                        da_score: score,
                        submitted_at: Utc.timestamp_opt(1_700_000_000 + i as i64, 0).unwrap(),
                    }
                })
                .collect();
            (triple, anns)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn annotation_export_import_is_identity((triple, anns) in triple_and_annotations()) {
        let set = TripleSet::from_triples(vec![triple]).unwrap();
        let text = annotations_to_jsonl(&anns);
        let back = read_annotations_from(text.as_bytes(), Some(&set)).unwrap();
        prop_assert_eq!(back, anns);
    }

    #[test]
    fn span_offsets_recover_the_highlighted_substring(t in text(), a in 0usize..40, b in 0usize..40) {
        let n = char_len(&t);
        let (start, end) = (a.min(b) % n, (a.max(b) % n) + 1);
        prop_assume!(start < end);
        let picked: String = t.chars().skip(start).take(end - start).collect();
        prop_assert_eq!(char_slice(&t, start, end).unwrap(), picked.as_str());
    }

    #[test]
    fn loaded_triples_have_unique_content(rows in proptest::collection::vec((0u8..4, 0u8..4, proptest::option::of(0u8..3)), 1..30)) {
        let mut jsonl = String::new();
        for (i, (s, m, r)) in rows.iter().enumerate() {
            let t = TranslationTriple {
                segment_id: format!("t{i}"),
                lp: lp(),
                src: format!("src {s}"),
                mt: format!("mt {m}"),
                reference: r.map(|r| format!("ref {r}")),
                split: Split::Unsplit,
            };
            jsonl.push_str(&serde_json::to_string(&t).unwrap());
            jsonl.push('\n');
        }
        let set = read_triples_from(jsonl.as_bytes()).unwrap();
        let mut seen = std::collections::HashSet::new();
        for t in set.iter() {
            prop_assert!(seen.insert((t.src.clone(), t.mt.clone(), t.reference.clone())));
        }
        prop_assert_eq!(set.len() + set.dropped_duplicates(), rows.len());
    }
}

fn embedding(dim: usize) -> impl Strategy<Value = SentenceEmbedding> {
    proptest::collection::vec(-1.0f64..1.0, dim).prop_map(SentenceEmbedding)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranks_ignore_metric_order(
        human in proptest::collection::vec(-5.0f64..5.0, 8..20),
        noise in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 20), 3),
        rotate in 0usize..3,
    ) {
        let n = human.len();
        let ids: Vec<String> = (0..n).map(|i| format!("s{i:02}")).collect();
        let mut metrics: Vec<(String, PairedScores)> = noise
            .iter()
            .enumerate()
            .map(|(k, eps)| {
                let m: Vec<f64> = human.iter().zip(eps).map(|(h, e)| h + e * k as f64).collect();
                (format!("m{k}"), PairedScores::new(ids.clone(), m, human.clone()).unwrap())
            })
            .collect();
        prop_assume!(metrics.iter().all(|(_, p)| spearman(&p.metric, &p.human).is_ok()));
        let (_, first) = rank_metrics(&metrics, 0.05, 200, 3, CorrelationKind::Spearman).unwrap();
        metrics.rotate_left(rotate);
        metrics.reverse();
        let (_, second) = rank_metrics(&metrics, 0.05, 200, 3, CorrelationKind::Spearman).unwrap();
        for e in &first.entries {
            prop_assert_eq!(e, second.get(&e.name).unwrap());
        }
    }

    #[test]
    fn combine_is_asymmetric(s in embedding(5), m in embedding(5), r in embedding(5)) {
        prop_assume!(s != m);
        prop_assert_ne!(combine(&s, &m, None).unwrap(), combine(&m, &s, None).unwrap());
        prop_assert_ne!(combine(&s, &m, Some(&r)).unwrap(), combine(&m, &s, Some(&r)).unwrap());
        prop_assert_eq!(combine(&s, &m, Some(&r)).unwrap().values.len(), 35);
    }

    #[test]
    fn qe_scores_ignore_reference(
        s in embedding(4), m in embedding(4), r1 in embedding(4), r2 in embedding(4), seed in 0u64..1000,
    ) {
        let d = DeterministicProvider::new(4, 0).unwrap().descriptor().clone();
        let qe = EstimatorModel::new(EstimatorMode::StlQe, d.clone(), &[6, 3], seed).unwrap();
        let a = qe.score_embeddings(&s, &m, Some(&r1), false).unwrap();
        let b = qe.score_embeddings(&s, &m, Some(&r2), false).unwrap();
        let c = qe.score_embeddings(&s, &m, None, false).unwrap();
        prop_assert_eq!(a.score.to_bits(), b.score.to_bits());
        prop_assert_eq!(a.score.to_bits(), c.score.to_bits());

        let mtl = EstimatorModel::new(EstimatorMode::Mtl, d, &[6, 3], seed).unwrap();
        let a = mtl.score_embeddings(&s, &m, Some(&r1), true).unwrap();
        let b = mtl.score_embeddings(&s, &m, Some(&r2), true).unwrap();
        prop_assert_eq!(a.score.to_bits(), b.score.to_bits());
        let full = mtl.score_embeddings(&s, &m, Some(&r1), false).unwrap();
        let heads = full.heads.unwrap();
        prop_assert!(close(full.score, heads.iter().sum::<f64>() / 3.0, 1e-12));
        prop_assert_eq!(heads[0].to_bits(), a.score.to_bits());
    }

    #[test]
    fn checkpoint_round_trip_scores_identically(
        s in embedding(3), m in embedding(3), r in embedding(3), seed in 0u64..1000, mode in 0u8..3,
    ) {
        let d = DeterministicProvider::new(3, 0).unwrap().descriptor().clone();
        let mode = EstimatorMode::from_code(mode).unwrap();
        let model = EstimatorModel::new(mode, d, &[4], seed).unwrap();
        let back = read_model(&write_model(&model)).unwrap();
        let a = model.score_embeddings(&s, &m, Some(&r), false).unwrap();
        let b = back.score_embeddings(&s, &m, Some(&r), false).unwrap();
        prop_assert_eq!(a.score.to_bits(), b.score.to_bits());
        prop_assert_eq!(model.params(), back.params());
    }

    #[test]
    fn providers_honour_descriptor_dim(t in text(), dim in 1usize..24, seed in any::<u64>()) {
        let p = DeterministicProvider::new(dim, seed).unwrap();
        let a = p.embed(&t).unwrap();
        prop_assert_eq!(a.dim(), p.descriptor().dim);
        prop_assert_eq!(&a, &DeterministicProvider::new(dim, seed).unwrap().embed(&t).unwrap());

        let dir = tempfile::tempdir().unwrap();
        let store = FileStore::open(dir.path(), &p.descriptor().identity, dim).unwrap();
        let stored = a.to_f32_precision();
        store.store(&t, &stored).unwrap();
        prop_assert_eq!(store.embed(&t).unwrap(), stored);
    }
}

#[test]
fn error_categories_match_dimensions() {
    for c in ErrorCategory::ALL {
        assert!(c.dimension().categories().contains(&c));
    }
}
