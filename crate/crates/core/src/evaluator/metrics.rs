use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dataset::Answer;
use crate::ncen_api::similarity::normalize;
use crate::workflow::round_half_away;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Correct
        } else {
            Self::Incorrect
        }
    }

    pub fn is_correct(self) -> bool {
        self == Self::Correct
    }
}

/// True iff every gold name occurs in the prediction, after case folding and
/// whitespace collapsing on both sides.
pub fn match_entities(predicted: &str, gold: &[String]) -> bool {
    if gold.is_empty() {
        return false;
    }
    let p = normalize(predicted);
    gold.iter().all(|g| {
        let g = normalize(g);
        !g.is_empty() && p.contains(&g)
    })
}

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+").unwrap());

/// Decimal literals in free text, with thousands separators removed.
pub fn numeric_tokens(text: &str) -> Vec<f64> {
    NUMBER
        .find_iter(text)
        .filter_map(|m| m.as_str().replace(',', "").parse::<f64>().ok())
        .filter(|v| v.is_finite())
        .collect()
}

/// True iff some number in the prediction, rounded half away from zero to
/// `precision` places, equals the gold value at that precision.
pub fn match_number(predicted: &str, gold_value: f64, precision: u32) -> bool {
    let scale = 10f64.powi(precision as i32);
    let target = (round_half_away(gold_value, precision) * scale).round();
    numeric_tokens(predicted).into_iter().any(|t| (round_half_away(t, precision) * scale).round() == target)
}

pub fn score(answer: &Answer, predicted: &str) -> Verdict {
    Verdict::from_bool(match answer {
        Answer::Entities { entities } => match_entities(predicted, entities),
        Answer::Number { value, precision } => match_number(predicted, *value, *precision),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn g(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn entity_examples() {
        assert!(match_entities(
            "The custodian is U.S. Bank National Association.",
            &g(&["U.S. BANK NATIONAL ASSOCIATION"])
        ));
        let gold =
            g(&["FEDERATED HERMES MANAGED VOLATILITY FUND II", "FEDERATED HERMES GLOBAL TOTAL RETURN BOND FUND"]);
        assert!(!match_entities("Federated Hermes Managed Volatility Fund II", &gold));
        assert!(match_entities(
            "federated hermes global total return bond fund; Federated  Hermes Managed Volatility Fund II",
            &gold
        ));
        assert!(!match_entities("", &g(&["X"])));
        assert!(!match_entities("anything", &[]));
    }

    #[test]
    fn number_examples() {
        assert!(match_number("The ratio is 7.6142", 7.61, 2));
        assert!(match_number("approximately 0.0001", 0.0001, 4));
        assert!(!match_number("no idea", 7.61, 2));
        assert!(match_number("It was 20,338.0 dollars", 20338.0, 1));
        assert!(match_number("3,280.330", 3280.33, 2));
        assert!(!match_number("7.62", 7.61, 2));
        assert!(match_number("first 12, then -0.5", -0.5, 1));
    }

    #[test]
    fn tokens() {
        assert_eq!(numeric_tokens("a 1,234.5 b -2 c .5"), vec![1234.5, -2.0, 0.5]);
    }

    proptest! {
        #[test]
        fn entities_are_order_insensitive(names in prop::collection::vec("[A-Z]{1,6}( [A-Z]{1,6})?", 1..5), extra in "[A-Z]{1,8}") {
            let text = names.join("; ");
            let mut rev = names.clone();
            rev.reverse();
            prop_assert_eq!(match_entities(&text, &names), match_entities(&text, &rev));
            // Adding a gold name never turns a miss into a hit.
            let mut more = names.clone();
            more.push(extra);
            prop_assert!(!match_entities(&text, &more) || match_entities(&text, &names));
        }

        #[test]
        fn numbers_survive_reformatting(cents in 0i64..10_000_000_000, zeros in 0usize..3, prefix in "[a-z ]{0,12}") {
            let v = cents as f64 / 100.0;
            let plain = format!("{prefix} {:.2}{} units", v, "0".repeat(zeros));
            prop_assert!(match_number(&plain, v, 2));
            let int = cents / 100;
            let frac = cents % 100;
            let grouped = format!("{}.{frac:02}", group(int));
            prop_assert!(match_number(&grouped, v, 2), "{}", grouped);
        }
    }

    fn group(mut n: i64) -> String {
        let mut parts = Vec::new();
        loop {
            if n < 1000 {
                parts.push(n.to_string());
                break;
            }
            parts.push(format!("{:03}", n % 1000));
            n /= 1000;
        }
        parts.reverse();
        parts.join(",")
    }
}
