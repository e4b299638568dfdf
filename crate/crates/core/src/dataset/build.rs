use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Answer, DatasetError, QaItem, Tier};
use crate::corpus::{canonical_fund_name, Corpus};
use crate::ncen_api::parse::{parse_entities, parse_items, parse_number, segment_body, written_precision};
use crate::workflow::round_half_away;

/// Entity relations and the form items that carry them.
pub const ENTITY_RELATIONS: [(&str, &str); 5] = [
    ("custodian", "C.12"),
    ("investment adviser", "C.11"),
    ("collateral manager", "C.6"),
    ("administrator", "C.14"),
    ("pricing service", "D.12"),
];

const VALUE_ITEMS: [(&str, &str); 3] =
    [("gross commission", "C.16"), ("total purchase sale", "C.17"), ("fund net assets", "C.19")];

const NET_ASSETS: &str = "fund net assets";

/// Inverse lookups with more funds than this are not generated.
pub const MAX_INVERSE_ANSWERS: usize = 12;

fn item_code(label: &str) -> &'static str {
    ENTITY_RELATIONS.iter().chain(VALUE_ITEMS.iter()).find(|(l, _)| *l == label).map(|(_, c)| *c).expect("known label")
}

/// One fund as filed in its latest report, read straight from the text with
/// exact labels and no fuzzy matching.
#[derive(Debug, Clone, PartialEq)]
pub struct FundRecord {
    pub name: String,
    pub accession: String,
    /// (role, entity name) in document order.
    pub entities: Vec<(String, String)>,
    /// Lower-cased item label to (value, text as filed).
    pub values: BTreeMap<String, (f64, String)>,
}

impl FundRecord {
    pub fn entities_for(&self, role: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (r, n) in &self.entities {
            if r.eq_ignore_ascii_case(role) && !out.contains(n) {
                out.push(n.clone());
            }
        }
        out
    }

    pub fn value(&self, label: &str) -> Option<(f64, &str)> {
        self.values.get(label).map(|(v, raw)| (*v, raw.as_str()))
    }
}

/// Every fund whose latest filing is in the corpus, sorted by name.
pub fn fund_records(corpus: &Corpus) -> Vec<FundRecord> {
    let index = corpus.index();
    let mut out = Vec::new();
    for report in corpus.reports() {
        for seg in segment_body(&report.body) {
            let latest = index.entries.get(&canonical_fund_name(&seg.fund_name));
            if latest.map(|f| f.accession_number.as_str()) != Some(report.accession_number()) {
                continue;
            }
            let text = &report.body[seg.start..seg.end];
            let entities = parse_entities(text).into_iter().map(|e| (e.label.to_lowercase(), e.name)).collect();
            let mut values = BTreeMap::new();
            for item in parse_items(text) {
                if let Some(v) = parse_number(&item.raw_value) {
                    values.entry(item.label.to_lowercase()).or_insert((v, item.raw_value.trim().to_string()));
                }
            }
            out.push(FundRecord {
                name: seg.fund_name,
                accession: report.accession_number().to_string(),
                entities,
                values,
            });
        }
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

/// Decimal places for a quotient: at least two, and enough to reach the
/// first significant digit of values below one.
pub fn ratio_precision(v: f64) -> u32 {
    let a = v.abs();
    if a == 0.0 || a >= 1.0 {
        return 2;
    }
    ((-a.log10()).ceil() as u32).max(2)
}

fn number(value: f64, precision: u32) -> Answer {
    Answer::Number { value, precision }
}

/// Draft of an item before it gets its id.
struct Draft {
    question: String,
    answer: Answer,
    relations: Vec<String>,
    source_funds: Vec<String>,
    items_cited: Vec<String>,
}

fn finish(tier: Tier, seed: u64, drafts: Vec<Draft>) -> Vec<QaItem> {
    drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| QaItem {
            id: format!("{}-{:03}", tier.id_prefix(), i + 1),
            tier,
            question: d.question,
            answer: d.answer,
            relations: d.relations,
            source_funds: d.source_funds,
            items_cited: d.items_cited,
            seed,
        })
        .collect()
}

/// Takes one draft from each pool in turn until `n` are drawn.
fn round_robin(tier: Tier, mut pools: Vec<Vec<Draft>>, n: usize) -> Result<Vec<Draft>, DatasetError> {
    let available: usize = pools.iter().map(Vec::len).sum();
    if available < n {
        return Err(DatasetError::Shortfall { tier, requested: n, available });
    }
    for p in &mut pools {
        p.reverse();
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        for p in &mut pools {
            if out.len() < n {
                if let Some(d) = p.pop() {
                    out.push(d);
                }
            }
        }
    }
    Ok(out)
}

fn rng(seed: u64, tier: Tier) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (tier as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Single-entity relation questions and filed-value questions, spread evenly
/// over the seven kinds.
pub fn build_easy(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<QaItem>, DatasetError> {
    let records = fund_records(corpus);
    let mut rng = rng(seed, Tier::Easy);
    let mut pools = Vec::new();
    for (relation, code) in ENTITY_RELATIONS {
        let mut pool: Vec<Draft> = records
            .iter()
            .filter_map(|r| {
                let names = r.entities_for(relation);
                (names.len() == 1).then(|| Draft {
                    question: format!("Who is the {relation} for {}?", r.name),
                    answer: Answer::Entities { entities: names },
                    relations: vec![relation.into()],
                    source_funds: vec![r.name.clone()],
                    items_cited: vec![code.into()],
                })
            })
            .collect();
        pool.shuffle(&mut rng);
        pools.push(pool);
    }
    for label in ["gross commission", "total purchase sale"] {
        let mut pool: Vec<Draft> = records
            .iter()
            .filter_map(|r| {
                let (v, raw) = r.value(label)?;
                Some(Draft {
                    question: format!("What was the {label} for {}?", r.name),
                    answer: number(v, written_precision(raw)),
                    relations: vec![label.into()],
                    source_funds: vec![r.name.clone()],
                    items_cited: vec![item_code(label).into()],
                })
            })
            .collect();
        pool.shuffle(&mut rng);
        pools.push(pool);
    }
    Ok(finish(Tier::Easy, seed, round_robin(Tier::Easy, pools, n)?))
}

/// Filed value divided by fund net assets. Funds reporting zero net assets
/// are skipped.
pub fn build_intermediate(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<QaItem>, DatasetError> {
    let records = fund_records(corpus);
    let mut rng = rng(seed, Tier::Intermediate);
    let mut pools = Vec::new();
    for label in ["gross commission", "total purchase sale"] {
        let mut pool: Vec<Draft> = records
            .iter()
            .filter_map(|r| {
                let (num, _) = r.value(label)?;
                let (den, _) = r.value(NET_ASSETS)?;
                if den == 0.0 {
                    log::info!("skipping {}: fund net assets are zero", r.name);
                    return None;
                }
                let ratio = num / den;
                let precision = ratio_precision(ratio);
                Some(Draft {
                    question: format!("What is the ratio of the {label} against fund net assets for {}?", r.name),
                    answer: number(round_half_away(ratio, precision), precision),
                    relations: vec![label.into(), NET_ASSETS.into()],
                    source_funds: vec![r.name.clone()],
                    items_cited: vec![item_code(label).into(), item_code(NET_ASSETS).into()],
                })
            })
            .collect();
        pool.shuffle(&mut rng);
        pools.push(pool);
    }
    Ok(finish(Tier::Intermediate, seed, round_robin(Tier::Intermediate, pools, n)?))
}

pub(crate) fn aggregation_question(label: &str, funds: &[String]) -> String {
    format!("What is the {label} aggregated over funds {}, {}, and {}?", funds[0], funds[1], funds[2])
}

pub(crate) fn inverse_question(relation: &str, company: &str) -> String {
    format!("What funds do the {relation} company {company} manage?")
}

fn inverse_drafts(records: &[FundRecord]) -> Vec<Draft> {
    let mut served: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    for r in records {
        for (relation, _) in ENTITY_RELATIONS {
            for company in r.entities_for(relation) {
                served.entry((relation.to_string(), company)).or_default().insert(r.name.clone());
            }
        }
    }
    served
        .into_iter()
        .filter(|(_, funds)| !funds.is_empty() && funds.len() <= MAX_INVERSE_ANSWERS)
        .map(|((relation, company), funds)| {
            let funds: Vec<String> = funds.into_iter().collect();
            Draft {
                question: inverse_question(&relation, &company),
                answer: Answer::Entities { entities: funds.clone() },
                relations: vec![relation.clone()],
                source_funds: funds,
                items_cited: vec![item_code(&relation).into()],
            }
        })
        .collect()
}

/// Alternates inverse lookups over every report with three-fund sums.
pub fn build_hard(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<QaItem>, DatasetError> {
    let records = fund_records(corpus);
    let mut rng = rng(seed, Tier::Hard);

    let mut inverse = inverse_drafts(&records);
    inverse.shuffle(&mut rng);

    // Every distinct triple per label, then shuffled.
    let mut sums = Vec::new();
    for label in ["gross commission", "total purchase sale"] {
        let holders: Vec<&FundRecord> = records.iter().filter(|r| r.value(label).is_some()).collect();
        for i in 0..holders.len() {
            for j in i + 1..holders.len() {
                for k in j + 1..holders.len() {
                    sums.push((label, [i, j, k].map(|x| holders[x])));
                }
            }
        }
    }
    sums.shuffle(&mut rng);
    let aggregations: Vec<Draft> = sums
        .into_iter()
        .take(n)
        .map(|(label, mut trio)| {
            // Order within the question is itself random.
            trio.swap(0, rng.random_range(0..3));
            let funds: Vec<String> = trio.iter().map(|r| r.name.clone()).collect();
            let precision = trio.iter().map(|r| written_precision(r.value(label).unwrap().1)).max().unwrap();
            let total: f64 = trio.iter().map(|r| r.value(label).unwrap().0).sum();
            Draft {
                question: aggregation_question(label, &funds),
                answer: number(round_half_away(total, precision), precision),
                relations: vec![label.into()],
                source_funds: funds,
                items_cited: vec![item_code(label).into()],
            }
        })
        .collect();
    Ok(finish(Tier::Hard, seed, round_robin(Tier::Hard, vec![inverse, aggregations], n)?))
}

/// `n` items per tier, in tier order.
pub fn build_all(corpus: &Corpus, n: usize, seed: u64) -> Result<Vec<QaItem>, DatasetError> {
    let mut out = build_easy(corpus, n, seed)?;
    out.extend(build_intermediate(corpus, n, seed)?);
    out.extend(build_hard(corpus, n, seed)?);
    Ok(out)
}

/// Every Easy and Intermediate question the corpus supports and every inverse
/// lookup. Three-fund sums are left out; there are too many.
pub fn template_items(corpus: &Corpus, seed: u64) -> Result<Vec<QaItem>, DatasetError> {
    let mut out = Vec::new();
    for build in [build_easy, build_intermediate] {
        match build(corpus, usize::MAX, seed) {
            Err(DatasetError::Shortfall { available, .. }) => out.extend(build(corpus, available, seed)?),
            other => out.extend(other?),
        }
    }
    out.extend(finish(Tier::Hard, seed, inverse_drafts(&fund_records(corpus))));
    for item in &mut out {
        item.id = format!("template-{}", item.id);
    }
    Ok(out)
}
