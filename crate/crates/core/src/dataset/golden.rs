use std::sync::LazyLock;

use regex::Regex;

use super::{Answer, DatasetError, QaItem, Tier};
use crate::workflow::printer::quote;

static INVERSE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^What funds do the (.+?) company (.+) manage\?$").unwrap());

/// The shape of question an item asks, recovered from its fields.
#[derive(Debug, Clone, PartialEq)]
pub enum QuestionFamily {
    Entity { relation: String, fund: String },
    Value { label: String, fund: String },
    Ratio { label: String, fund: String, precision: u32 },
    Aggregate { label: String, funds: Vec<String>, precision: u32 },
    Inverse { relation: String, company: String },
}

impl QuestionFamily {
    pub fn of(item: &QaItem) -> Result<Self, DatasetError> {
        let err = |message: &str| DatasetError::Golden { id: item.id.clone(), message: message.to_string() };
        let relation = item.relations.first().cloned().ok_or_else(|| err("no relation"))?;
        let fund = item.source_funds.first().cloned().ok_or_else(|| err("no source fund"))?;
        Ok(match (item.tier, &item.answer) {
            (Tier::Easy, Answer::Entities { .. }) => Self::Entity { relation, fund },
            (Tier::Easy, Answer::Number { .. }) => Self::Value { label: relation, fund },
            (Tier::Intermediate, Answer::Number { precision, .. }) => {
                Self::Ratio { label: relation, fund, precision: *precision }
            }
            (Tier::Hard, Answer::Number { precision, .. }) => {
                Self::Aggregate { label: relation, funds: item.source_funds.clone(), precision: *precision }
            }
            (Tier::Hard, Answer::Entities { .. }) => {
                let c = INVERSE.captures(&item.question).ok_or_else(|| err("question does not name a company"))?;
                Self::Inverse { relation, company: c[2].to_string() }
            }
            (Tier::Intermediate, Answer::Entities { .. }) => return Err(err("intermediate items are numeric")),
        })
    }
}

/// A plain description of what the golden workflow does.
pub fn golden_summary(item: &QaItem) -> Result<String, DatasetError> {
    Ok(match QuestionFamily::of(item)? {
        QuestionFamily::Entity { relation, fund } => {
            format!("The code fetches the block of {fund} from its report and lists every {relation} named in it.")
        }
        QuestionFamily::Value { label, fund } => {
            format!("The code fetches the block of {fund} from its report and reads the {label} value.")
        }
        QuestionFamily::Ratio { label, fund, precision } => format!(
            "The code fetches the block of {fund}, reads the {label} and the fund net assets, divides the first by \
             the second and rounds to {precision} decimals."
        ),
        QuestionFamily::Aggregate { label, funds, precision } => format!(
            "The code reads the {label} of {} from their blocks, adds them up and rounds to {precision} decimals.",
            funds.join(", ")
        ),
        QuestionFamily::Inverse { relation, company } => format!(
            "The code goes through every fund block of every report and keeps the funds whose {relation} is \
             {company}."
        ),
    })
}

/// Reference workflow for an item, written the way a correct generation
/// would look.
pub fn golden_workflow(item: &QaItem) -> Result<String, DatasetError> {
    Ok(match QuestionFamily::of(item)? {
        QuestionFamily::Entity { relation, fund } => format!(
            "report = get_report({f})\nblock = fetch_block(report, {f})\nanswer = extract_entity(block, {r})\n",
            f = quote(&fund),
            r = quote(&relation)
        ),
        QuestionFamily::Value { label, fund } => format!(
            "report = get_report({f})\nblock = fetch_block(report, {f})\nanswer = extract_value(block, {l})\n",
            f = quote(&fund),
            l = quote(&label)
        ),
        QuestionFamily::Ratio { label, fund, precision } => format!(
            "report = get_report({f})\nblock = fetch_block(report, {f})\n\
             value = extract_value(block, {l})\nassets = extract_value(block, \"fund net assets\")\n\
             answer = round(value / assets, {precision})\n",
            f = quote(&fund),
            l = quote(&label)
        ),
        QuestionFamily::Aggregate { label, funds, precision } => {
            let list: Vec<String> = funds.iter().map(|f| quote(f)).collect();
            format!(
                "funds = [{}]\ntotal = 0\nfor fund in funds {{\n    report = get_report(fund)\n    \
                 block = fetch_block(report, fund)\n    total = total + extract_value(block, {l})\n}}\n\
                 answer = round(total, {precision})\n",
                list.join(", "),
                l = quote(&label)
            )
        }
        QuestionFamily::Inverse { relation, company } => format!(
            "matches = []\nfor report in get_all_reports() {{\n    for block in segment_report(report) {{\n        \
             for name in extract_entity(block, {r}) {{\n            \
             if name == {c} {{\n                matches = append(matches, block[\"name\"])\n            }}\n        \
             }}\n    }}\n}}\nanswer = sort(unique(matches))\n",
            r = quote(&relation),
            c = quote(&company)
        ),
    })
}
