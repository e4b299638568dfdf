//! Text-level parsing of N-CEN bodies: fund regions, entity records and
//! labeled numeric items.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use super::EntityRecord;

static FUND_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?mi)^Item\s+C\.1\.(?:a\.)?\s*Name of Fund:[ \t]*(.+?)[ \t]*\r?$").unwrap());

// A new form part or the closing document tag ends the per-fund region.
static REGION_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^(?:Part\s+[A-Z]\b|</N-CEN>)").unwrap());

static ENTITY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<ENTITY\b([^>]*)>(.*?)</ENTITY>").unwrap());

static ATTR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"([A-Za-z_]+)\s*=\s*"([^"]*)""#).unwrap());

static LEAF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<([A-Za-z_]+)>([^<]*)</([A-Za-z_]+)>").unwrap());

static ITEM_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^Item\s+[A-Z]\.\d+(?:\.[A-Za-z0-9]+)*\.?[ \t]+([^:\n]+?):[ \t]*(.*?)[ \t]*\r?$").unwrap()
});

/// A fund region inside a body, by byte range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub fund_name: String,
    pub start: usize,
    pub end: usize,
}

/// Splits a body into per-fund regions. Regions are adjacent and ordered;
/// the last one stops at the next form part or the closing tag.
pub fn segment_body(body: &str) -> Vec<Segment> {
    let starts: Vec<(usize, String)> =
        FUND_LINE.captures_iter(body).map(|c| (c.get(0).unwrap().start(), c[1].trim().to_string())).collect();
    let Some(&(last_start, _)) = starts.last() else {
        return Vec::new();
    };
    let region_end = REGION_END.find_at(body, last_start).map_or(body.len(), |m| m.start());

    starts
        .iter()
        .enumerate()
        .map(|(i, (start, name))| Segment {
            fund_name: name.clone(),
            start: *start,
            end: starts.get(i + 1).map_or(region_end, |next| next.0),
        })
        .collect()
}

fn unescape(s: &str) -> String {
    s.replace("&lt;", "<").replace("&gt;", ">").replace("&quot;", "\"").replace("&apos;", "'").replace("&amp;", "&")
}

/// All entity records of a block, in document order. Records without a role
/// or a name are skipped.
pub fn parse_entities(text: &str) -> Vec<EntityRecord> {
    ENTITY
        .captures_iter(text)
        .filter_map(|cap| {
            let mut attributes = BTreeMap::new();
            for a in ATTR.captures_iter(&cap[1]) {
                attributes.insert(a[1].to_lowercase(), unescape(&a[2]));
            }
            let label = attributes.remove("role")?;
            let mut name = None;
            for leaf in LEAF.captures_iter(&cap[2]) {
                if !leaf[1].eq_ignore_ascii_case(&leaf[3]) {
                    continue;
                }
                let key = leaf[1].to_lowercase();
                let value = unescape(leaf[2].trim());
                if key == "name" {
                    name.get_or_insert(value);
                } else {
                    attributes.entry(key).or_insert(value);
                }
            }
            let name = name.filter(|n| !n.is_empty())?;
            if label.trim().is_empty() {
                return None;
            }
            Some(EntityRecord { label, name, attributes })
        })
        .collect()
}

/// A `label: value` item line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemLine {
    pub label: String,
    pub raw_value: String,
    pub offset: usize,
}

pub fn parse_items(text: &str) -> Vec<ItemLine> {
    ITEM_LINE
        .captures_iter(text)
        .map(|c| ItemLine {
            label: c[1].trim().to_string(),
            raw_value: c[2].to_string(),
            offset: c.get(0).unwrap().start(),
        })
        .collect()
}

/// Parses a filed number: thousands separators and a leading `$` are ignored.
pub fn parse_number(raw: &str) -> Option<f64> {
    let cleaned: String = raw.trim().trim_start_matches('$').chars().filter(|c| *c != ',').collect();
    if cleaned.is_empty() {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Decimal places as written, e.g. `"20,338.0"` → 1.
pub fn written_precision(raw: &str) -> u32 {
    raw.trim().split_once('.').map_or(0, |(_, frac)| frac.chars().take_while(char::is_ascii_digit).count() as u32)
}
