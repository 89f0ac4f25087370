//! Seeded generators for scale tests: a person corpus for throughput runs, a
//! family/geography graph for link inference, and random fact logs for the
//! view oracle.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, InfoboxRow, Passage};
use crate::kg_store::{
    eid, Entity, EntityId, EntityOrigin, Fact, FactKey, FactStatus, Provenance, Span, Value,
    VersionedFactRow,
};

pub const PERSON: &str = "Q5";
pub const CITY: &str = "Q515";
pub const COUNTY: &str = "Q28575";
pub const PLACE: &str = "Q2221906";
pub const GENDER: &str = "Q48264";
pub const MALE: &str = "Q6581097";
pub const FEMALE: &str = "Q6581072";

pub const SPOUSE: &str = "P26";
pub const CHILD: &str = "P40";
pub const FATHER: &str = "P22";
pub const MOTHER: &str = "P25";
pub const SEX: &str = "P21";
pub const CONTAINS: &str = "P150";
pub const LOCATED_IN: &str = "P131";

const MONTHS: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

/// English person pages with `rows_per_doc` infobox rows each. Four rows
/// (`height`, `weight`, `birth_date`, `birth_name`) carry extractable values;
/// the rest are filler keys no rule should match.
pub fn person_corpus(n_docs: usize, rows_per_doc: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_docs)
        .map(|i| {
            let name = format!("Synthetic Person {i}");
            let mut infobox = vec![
                row("height", format!("{:.2} m", rng.gen_range(1.50..2.20))),
                row("weight", format!("{} kg", rng.gen_range(45..130))),
                row(
                    "birth_date",
                    format!(
                        "{} {}, {}",
                        MONTHS[rng.gen_range(0..12)],
                        rng.gen_range(1..=28),
                        rng.gen_range(1920..2010)
                    ),
                ),
                row("birth_name", name.clone()),
            ];
            let mut filler = 0;
            while infobox.len() < rows_per_doc {
                infobox.push(row(&format!("misc_{filler}"), format!("note {}", rng.gen::<u32>())));
                filler += 1;
            }
            infobox.truncate(rows_per_doc.max(1));
            Document {
                url: format!("https://synthetic.example/wiki/Person_{i}"),
                language: "en".into(),
                revision_id: "1".into(),
                revision_time: base_time(),
                subject_hint: Some(eid(&format!("S{i}"))),
                infobox,
                passages: vec![Passage {
                    id: "p0".into(),
                    text: format!("{name} is a synthetic person."),
                }],
                tables: vec![],
            }
        })
        .collect()
}

fn row(key: &str, raw_value: String) -> InfoboxRow {
    InfoboxRow {
        key: key.into(),
        raw_value,
        hyperlinks: vec![],
    }
}

fn entity(id: &str, name: String, types: &[&str]) -> Entity {
    Entity {
        id: eid(id),
        canonical_name: name,
        aliases: vec![],
        types: types.iter().map(|t| eid(t)).collect(),
        created_by: EntityOrigin::Seed,
    }
}

fn synthetic_provenance(n: usize) -> Provenance {
    Provenance {
        source_url: format!("synthetic://graph/{n}"),
        revision_id: "1".into(),
        span: Span::Derived {
            from: "synthetic".into(),
        },
        extractor_id: "synthetic".into(),
        extracted_at: base_time(),
        pipeline_run_id: "synthetic".into(),
    }
}

#[derive(Debug, Clone)]
pub struct FamilyGraph {
    pub entities: Vec<Entity>,
    pub facts: Vec<Fact>,
}

/// Persons (~75%) with genders, spouses and children, plus counties and
/// cities with partial containment edges. Some cities carry a conflicting
/// `located in` of random confidence so correction has work to do.
pub fn family_graph(n_entities: usize, seed: u64) -> FamilyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entities = vec![
        entity(MALE, "male".into(), &[GENDER]),
        entity(FEMALE, "female".into(), &[GENDER]),
    ];
    let rest = n_entities.saturating_sub(2);
    let n_counties = (rest / 20).max(1);
    let n_cities = rest / 5;
    let n_persons = rest.saturating_sub(n_counties + n_cities);
    let persons: Vec<String> = (0..n_persons).map(|i| format!("H{i}")).collect();
    let counties: Vec<String> = (0..n_counties).map(|i| format!("C{i}")).collect();
    let cities: Vec<String> = (0..n_cities).map(|i| format!("T{i}")).collect();
    for p in &persons {
        entities.push(entity(p, format!("Person {p}"), &[PERSON]));
    }
    for c in &counties {
        entities.push(entity(c, format!("County {c}"), &[COUNTY, PLACE]));
    }
    for c in &cities {
        entities.push(entity(c, format!("City {c}"), &[CITY, PLACE]));
    }

    let mut facts = Vec::new();
    let mut push = |rng: &mut ChaCha8Rng, s: &str, p: &str, o: &str, lo: f64| {
        let n = facts.len();
        facts.push(Fact {
            subject: eid(s),
            predicate: p.into(),
            object: Value::entity(eid(o)),
            confidence: (rng.gen_range(lo..=1.0) * 100.0_f64).round() / 100.0,
            provenance: vec![synthetic_provenance(n)],
            language: "en".into(),
            status: FactStatus::AutoIngested,
        });
    };

    for p in &persons {
        match rng.gen_range(0..20) {
            0..=8 => push(&mut rng, p, SEX, MALE, 1.0),
            9..=17 => push(&mut rng, p, SEX, FEMALE, 1.0),
            _ => {}
        }
    }
    let mut order: Vec<usize> = (0..persons.len()).collect();
    order.shuffle(&mut rng);
    for pair in order.chunks(2).take(persons.len() / 6) {
        if let [a, b] = pair {
            push(&mut rng, &persons[*a], SPOUSE, &persons[*b], 0.7);
            if rng.gen_bool(0.4) {
                push(&mut rng, &persons[*b], SPOUSE, &persons[*a], 0.7);
            }
        }
    }
    let mut has_parent: BTreeMap<usize, usize> = BTreeMap::new();
    for i in 0..persons.len() {
        if !rng.gen_bool(0.4) {
            continue;
        }
        for _ in 0..rng.gen_range(1..=3) {
            let c = rng.gen_range(0..persons.len());
            let count = has_parent.entry(c).or_default();
            if c == i || *count >= 2 {
                continue;
            }
            *count += 1;
            push(&mut rng, &persons[i], CHILD, &persons[c], 0.7);
        }
    }

    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (i, city) in cities.iter().enumerate() {
        let home = i % counties.len();
        if rng.gen_bool(0.7) && seen.insert((home, i)) {
            push(&mut rng, &counties[home], CONTAINS, city, 0.8);
        }
        match rng.gen_range(0..10) {
            0..=4 => push(&mut rng, city, LOCATED_IN, &counties[home], 0.7),
            5 | 6 if counties.len() > 1 => {
                let wrong = (home + 1 + rng.gen_range(0..counties.len() - 1)) % counties.len();
                push(&mut rng, city, LOCATED_IN, &counties[wrong], 0.5);
            }
            _ => {}
        }
    }
    FamilyGraph { entities, facts }
}

/// Random log over `n_keys` keys: versions increase per key in append order
/// and statuses include rejections and tombstones.
pub fn random_log(n_rows: usize, n_keys: usize, seed: u64) -> Vec<VersionedFactRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_keys = n_keys.max(1);
    let mut versions = vec![0u64; n_keys];
    let statuses = [
        FactStatus::AutoIngested,
        FactStatus::AutoIngested,
        FactStatus::AutoIngested,
        FactStatus::Inferred,
        FactStatus::CuratedAccepted,
        FactStatus::CuratedRejected,
        FactStatus::Retracted,
    ];
    (0..n_rows)
        .map(|n| {
            let k = rng.gen_range(0..n_keys);
            versions[k] += 1;
            let subject = EntityId::new(format!("R{}", k / 2)).expect("non-empty");
            let (predicate, object) = if k % 2 == 0 {
                ("P2048", Value::quantity(f64::from(rng.gen_range(1500..2200u32)) / 10.0, "cm"))
            } else {
                ("P27", Value::entity(eid(&format!("N{}", k % 7))))
            };
            let fact = Fact {
                subject,
                predicate: predicate.into(),
                object,
                confidence: rng.gen_range(0.0..=1.0),
                provenance: vec![synthetic_provenance(n)],
                language: "en".into(),
                status: statuses[rng.gen_range(0..statuses.len())],
            };
            VersionedFactRow {
                key: FactKey::for_fact(&fact, predicate == "P2048"),
                version: versions[k],
                fact,
                appended_at: base_time() + Duration::seconds(n as i64),
                run_id: format!("r{}", n / 1000),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(person_corpus(5, 40, 1), person_corpus(5, 40, 1));
        assert_eq!(random_log(500, 40, 3), random_log(500, 40, 3));
        let (a, b) = (family_graph(300, 7), family_graph(300, 7));
        assert_eq!(a.entities, b.entities);
        assert_eq!(a.facts, b.facts);
    }

    #[test]
    fn corpus_shape() {
        let docs = person_corpus(3, 40, 1);
        assert!(docs.iter().all(|d| d.infobox.len() == 40 && d.validate().is_ok()));
    }

    #[test]
    fn family_graph_shape() {
        let g = family_graph(1000, 42);
        assert_eq!(g.entities.len(), 1000);
        let ids: BTreeSet<&EntityId> = g.entities.iter().map(|e| &e.id).collect();
        assert!(g
            .facts
            .iter()
            .all(|f| ids.contains(&f.subject) && ids.contains(f.object.as_entity().unwrap())));
        for p in [SPOUSE, CHILD, SEX, CONTAINS, LOCATED_IN] {
            assert!(g.facts.iter().any(|f| f.predicate == p), "{p}");
        }
    }
}
