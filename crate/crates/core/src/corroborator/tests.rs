use super::*;
use crate::kg_store::{eid, DatePrecision};
use crate::testkit::{self, candidate};

fn locales() -> LocaleSet {
    LocaleSet::builtin()
}

fn norm(c: &CandidateFact) -> NormalizedCandidate {
    normalize(c, &testkit::ontology(), &locales()).unwrap()
}

fn height(cm: f64, url: &str) -> CandidateFact {
    candidate("Q8991894", "P2048", Value::quantity(cm, "cm"), url)
}

#[test]
fn normalizes_surface_forms() {
    let text = |s: &str| Value::text(s, "en");
    let c = candidate("Q8991894", "P2048", text("2.13 m"), "a");
    assert_eq!(norm(&c).value, Value::quantity(213.0, "cm"));
    let c = candidate("Q8991894", "P2048", text("211 cm"), "a");
    assert_eq!(norm(&c).value, Value::quantity(211.0, "cm"));
    let c = candidate("Q6279", "P569", text("November 20, 1942"), "a");
    assert_eq!(norm(&c).value, Value::date("1942-11-20", DatePrecision::Day));
    let mut c = candidate("Q6279", "P569", text("20 de noviembre de 1942"), "a");
    c.language = "es".into();
    assert_eq!(norm(&c).value, Value::date("1942-11-20", DatePrecision::Day));
    let c = candidate("Q6279", "P1477", text("  Joseph   Robinette\tBiden "), "a");
    assert_eq!(norm(&c).value, Value::text("Joseph Robinette Biden", "en"));
}

#[test]
fn imperial_height_rounds_to_one_decimal() {
    let c = height(6.0 * 30.48, "a");
    assert_eq!(norm(&c).value, Value::quantity(182.9, "cm"));
}

#[test]
fn unparseable_text_fails() {
    let c = candidate("Q6279", "P569", Value::text("a long time ago", "en"), "a");
    assert!(matches!(
        normalize(&c, &testkit::ontology(), &locales()),
        Err(NormalizeError::Unparseable { .. })
    ));
}

#[test]
fn mention_linking() {
    let kg = testkit::kg();
    let place = [eid(testkit::PLACE)].into();
    let person = [eid(testkit::PERSON)].into();
    assert_eq!(link_mention("brooklyn", &place, &kg), Mention::Linked(eid("Q18419")));
    assert_eq!(link_mention("Brooklyn", &person, &kg), Mention::Unknown);
    assert_eq!(
        link_mention("Michelle Williams", &person, &kg),
        Mention::Ambiguous(vec![eid("Q100"), eid("Q101")])
    );
    assert_eq!(link_mention("Atlantis", &place, &kg), Mention::Unknown);
}

fn three_heights() -> Vec<NormalizedCandidate> {
    vec![
        norm(&height(213.0, "https://a")),
        norm(&height(213.0, "https://b")),
        norm(&height(211.0, "https://c")),
    ]
}

#[test]
fn clustering_thresholds() {
    // 2/213 is below 1%, so the default threshold merges the readings.
    let merged = cluster(three_heights(), 0.01);
    assert_eq!(merged.len(), 1);
    assert_eq!(merged[0].value, Value::quantity(213.0, "cm"));
    assert_eq!(merged[0].support(), 3);

    let split = cluster(three_heights(), 0.005);
    let got: Vec<_> = split.iter().map(|c| (c.value.magnitude().unwrap(), c.support())).collect();
    assert_eq!(got, vec![(211.0, 1), (213.0, 2)]);

    assert!(cluster(vec![], 0.01).is_empty());
    let one = cluster(vec![norm(&height(200.0, "a"))], 0.01);
    assert_eq!((one.len(), one[0].support()), (1, 1));
}

#[test]
fn merge_prefers_smaller_magnitude_on_equal_support() {
    let got = cluster(
        vec![norm(&height(200.0, "a")), norm(&height(201.0, "b"))],
        0.01,
    );
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].value, Value::quantity(200.0, "cm"));
}

/// Score of every cluster straight from the definition, without the
/// grouping and sorting machinery.
fn brute_force_scores(clusters: &[FactCluster], weights: &ExtractorWeights) -> Vec<(String, f64)> {
    let total: usize = clusters.iter().map(|c| c.members.len()).sum();
    clusters
        .iter()
        .map(|c| {
            let mut best = 0.0f64;
            for m in &c.members {
                let w = weights.get(m.candidate.extractor_kind) * m.candidate.extractor_score;
                if w > best {
                    best = w;
                }
            }
            (c.value.canonical_key(), best * c.members.len() as f64 / total as f64)
        })
        .collect()
}

#[test]
fn conflicting_heights_rank_and_route() {
    let kg = testkit::kg();
    let config = ScoringConfig {
        auto_threshold: 0.6,
        curation_floor: 0.3,
        merge_threshold: 0.005,
        ..Default::default()
    };
    let clusters = cluster(three_heights(), config.merge_threshold);
    let oracle = brute_force_scores(&clusters, &config.weights);
    let scorer = HeuristicScorer {
        weights: config.weights.clone(),
    };
    let scored = score_and_rank(clusters, kg.ontology(), &config, &scorer);
    assert_eq!(scored.len(), 2);
    assert_eq!(scored[0].fact.object, Value::quantity(213.0, "cm"));
    assert_eq!(scored[0].rank, 1);
    assert_eq!(scored[0].route, Route::Auto);
    assert_eq!(scored[1].route, Route::Drop);
    for s in &scored {
        let (_, expected) = oracle
            .iter()
            .find(|(k, _)| *k == s.fact.object.canonical_key())
            .unwrap();
        assert!((s.score - expected).abs() < 1e-12);
    }
    assert!((scored[0].score - 0.95 * 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn single_cluster_score_is_weighted_extractor_score() {
    let kg = testkit::kg();
    let config = ScoringConfig::default();
    let clusters = cluster(vec![norm(&height(213.0, "a"))], 0.01);
    let scored = score_and_rank(clusters, kg.ontology(), &config, &HeuristicScorer::default());
    assert_eq!(scored[0].rank, 1);
    assert!((scored[0].score - 0.95).abs() < 1e-12);
    assert_eq!(scored[0].route, Route::Auto);
}

#[test]
fn sensitive_predicates_always_go_to_curation() {
    let kg = testkit::kg();
    let mut c = candidate(
        "Q6279",
        "P2218",
        Value::Money {
            minor_units: 100,
            currency: "USD".into(),
        },
        "a",
    );
    c.extractor_score = 0.99;
    let (scored, _) = corroborate(&[c], &kg, &locales(), &ScoringConfig::default(), &HeuristicScorer::default());
    assert_eq!(scored[0].route, Route::Curation);
}

#[test]
fn ambiguous_mentions_go_to_curation_with_options() {
    let kg = testkit::kg();
    let c = candidate("Q6279", "P26", Value::text("Michelle Williams", "en"), "a");
    let (scored, stats) =
        corroborate(&[c], &kg, &locales(), &ScoringConfig::default(), &HeuristicScorer::default());
    assert_eq!(stats.ambiguous_mentions, 1);
    assert_eq!(scored[0].route, Route::Curation);
    assert_eq!(scored[0].mention_options, vec![eid("Q100"), eid("Q101")]);
}

#[test]
fn mentions_merge_with_hyperlink_candidates() {
    let kg = testkit::kg();
    let a = candidate("Q6279", "P19", Value::text("Scranton", "en"), "a");
    let b = candidate("Q6279", "P19", Value::entity(eid("Q271395")), "b");
    let (scored, _) =
        corroborate(&[a, b], &kg, &locales(), &ScoringConfig::default(), &HeuristicScorer::default());
    assert_eq!(scored.len(), 1);
    assert_eq!(scored[0].support, 2);
    assert_eq!(scored[0].distinct_sources, 2);
}

#[test]
fn type_violations_are_dropped() {
    let kg = testkit::kg();
    // A person is not a geographic location.
    let c = candidate("Q6279", "P19", Value::entity(eid("Q8991894")), "a");
    let (scored, stats) =
        corroborate(&[c], &kg, &locales(), &ScoringConfig::default(), &HeuristicScorer::default());
    assert!(scored.is_empty());
    assert_eq!(stats.type_violations, 1);
}

#[test]
fn multi_valued_values_each_stand_alone() {
    let kg = testkit::kg();
    let a = candidate("Q8991894", "P27", Value::entity(eid("Q41")), "a");
    let b = candidate("Q8991894", "P27", Value::entity(eid("Q30")), "a");
    let (scored, _) =
        corroborate(&[a, b], &kg, &locales(), &ScoringConfig::default(), &HeuristicScorer::default());
    assert_eq!(scored.len(), 2);
    assert!(scored.iter().all(|s| s.route == Route::Auto));
}

#[test]
fn functional_runner_up_follows_leader_into_curation() {
    let kg = testkit::kg();
    let cands = [
        height(213.0, "a"),
        height(213.0, "b"),
        height(200.0, "c"),
        height(190.0, "d"),
    ];
    let (scored, _) =
        corroborate(&cands, &kg, &locales(), &ScoringConfig::default(), &HeuristicScorer::default());
    // 0.95 * 2/4 is between floor and auto threshold.
    assert_eq!(scored[0].route, Route::Curation);
    assert!(scored.iter().all(|s| s.route == Route::Curation));
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_candidates() -> impl Strategy<Value = Vec<CandidateFact>> {
        prop::collection::vec(
            (0usize..2, 150u32..230, 0usize..4, 0u8..3, 50u32..=100),
            1..14,
        )
        .prop_map(|raw| {
            raw.into_iter()
                .map(|(subj, cm, src, kind, score)| {
                    let subject = ["Q8991894", "Q6279"][subj];
                    let mut c = candidate(
                        subject,
                        "P2048",
                        Value::quantity(cm as f64, "cm"),
                        &format!("https://s{src}"),
                    );
                    c.extractor_kind = [
                        crate::extractors::ExtractorKind::Pattern,
                        crate::extractors::ExtractorKind::Link,
                        crate::extractors::ExtractorKind::Model,
                    ][kind as usize];
                    c.extractor_score = score as f64 / 100.0;
                    c
                })
                .collect()
        })
    }

    fn summary(scored: &[ScoredFact]) -> Vec<(String, String, usize, Route, u64)> {
        scored
            .iter()
            .map(|s| {
                (
                    s.fact.subject.to_string(),
                    s.fact.object.canonical_key(),
                    s.rank,
                    s.route,
                    (s.score * 1e9).round() as u64,
                )
            })
            .collect()
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(cm in 0.0f64..1000.0, unit in 0usize..4) {
            let u = ["cm", "m", "in", "ft"][unit];
            let c = candidate("Q8991894", "P2048", Value::quantity(cm, u), "a");
            let once = norm(&c);
            let mut again = c.clone();
            again.value = once.value.clone();
            prop_assert_eq!(norm(&again).value, once.value);
        }

        #[test]
        fn duplicating_evidence_keeps_the_ranking(cands in arb_candidates(), k in 2usize..4) {
            let kg = testkit::kg();
            let config = ScoringConfig::default();
            let (base, _) = corroborate(&cands, &kg, &locales(), &config, &HeuristicScorer::default());
            let copies: Vec<_> = cands.iter().flat_map(|c| std::iter::repeat_n(c.clone(), k)).collect();
            let (dup, _) = corroborate(&copies, &kg, &locales(), &config, &HeuristicScorer::default());
            prop_assert_eq!(summary(&base), summary(&dup));
        }

        #[test]
        fn clustering_preserves_members(cands in arb_candidates(), th in 0.0f64..0.05) {
            let normalized: Vec<_> = cands.iter().map(norm).collect();
            let clusters = cluster(normalized.clone(), th);
            let mut flat: Vec<_> = clusters.iter().flat_map(|c| c.members.iter().cloned()).collect();
            prop_assert_eq!(flat.len(), normalized.len());
            for n in &normalized {
                let pos = flat.iter().position(|m| m == n);
                prop_assert!(pos.is_some());
                flat.remove(pos.unwrap());
            }
        }

        #[test]
        fn ranks_are_permutations_and_scores_bounded(cands in arb_candidates()) {
            let kg = testkit::kg();
            let (scored, _) = corroborate(&cands, &kg, &locales(), &ScoringConfig::default(), &HeuristicScorer::default());
            let mut by_subject: std::collections::BTreeMap<String, Vec<usize>> = Default::default();
            for s in &scored {
                prop_assert!((0.0..=1.0).contains(&s.score));
                by_subject.entry(s.fact.subject.to_string()).or_default().push(s.rank);
            }
            for ranks in by_subject.values() {
                let expected: Vec<usize> = (1..=ranks.len()).collect();
                prop_assert_eq!(ranks, &expected);
            }
        }

        #[test]
        fn raising_the_leader_never_demotes_it(cands in arb_candidates(), bump in 0.0f64..0.5) {
            let kg = testkit::kg();
            let config = ScoringConfig::default();
            let (before, _) = corroborate(&cands, &kg, &locales(), &config, &HeuristicScorer::default());
            let leader = before.iter().find(|s| s.rank == 1).unwrap();
            let key = (leader.fact.subject.clone(), leader.fact.object.canonical_key());
            let mut boosted = cands.clone();
            for c in boosted.iter_mut() {
                let nk = norm(c).value.canonical_key();
                if c.subject == key.0 && nk == key.1 {
                    c.extractor_score = (c.extractor_score + bump).min(1.0);
                }
            }
            let (after, _) = corroborate(&boosted, &kg, &locales(), &config, &HeuristicScorer::default());
            let now = after
                .iter()
                .find(|s| s.fact.subject == key.0 && s.fact.object.canonical_key() == key.1)
                .unwrap();
            if leader.route == Route::Auto {
                prop_assert_eq!(now.route, Route::Auto);
            }
        }
    }
}
