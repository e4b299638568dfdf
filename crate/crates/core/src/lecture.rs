//! Lecture rendering: context, API descriptions, code instruction.
//!
//! The three ablation variants each remove or degrade exactly one of those
//! components and leave the rest of the text untouched.

use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CONTEXT: &str = "You will handle information queries from users about funds in N-CEN reports.";

pub const API_HEADER: &str = "You have access to the following functions:";

/// Replaces the code instruction in the no-code-prompt variant.
pub const NO_CODE_INSTRUCTION: &str = "Wait for user queries, then try to use these functions to respond assuming you have access to these functions. Let me know once you are ready for user queries";

pub const WORKFLOW_LANGUAGE_SUMMARY: &str = r#"Workflow language:
- One statement per line: `name = expression` or a bare expression. `#` starts a comment.
- Loops: `for item in list { ... }`. Conditionals: `if condition { ... } else { ... }`.
- Values: numbers, "strings", [lists] and list[index]. Operators: + - * / == != < > <= >=.
- A fund block's name is block["name"]; a report's accession number is report["accession"].
- Builtins: sum(list), len(list), round(x, digits), min, max, str(x), num(x), append(list, item), unique(list), sort(list).
- Nothing else can be called: no imports, no files, no user-defined functions.
- The result is the value of the variable `answer`, or else the last expression."#;

pub fn default_code_instruction() -> String {
    format!(
        "When you receive a user query, write workflow code that answers it by calling only the functions above. \
Write the code in the workflow language summarized below and return it in a single fenced code block. \
Store the final result in a variable named answer.\n\n{WORKFLOW_LANGUAGE_SUMMARY}"
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiParam {
    pub name: String,
    #[serde(rename = "desc")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiDescriptor {
    pub name: String,
    pub params: Vec<ApiParam>,
    #[serde(rename = "returns")]
    pub returns_description: String,
}

impl ApiDescriptor {
    pub fn new(name: &str, params: &[(&str, &str)], returns: &str) -> Self {
        Self {
            name: name.to_string(),
            params: params.iter().map(|(n, d)| ApiParam { name: n.to_string(), description: d.to_string() }).collect(),
            returns_description: returns.to_string(),
        }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LectureVariant {
    /// Context, meaningful API descriptions and the code instruction.
    Full,
    /// No context sentence.
    Nct,
    /// Opaque single-letter argument names.
    Ba,
    /// No explicit request to write code.
    Ncp,
}

impl LectureVariant {
    pub const ALL: [LectureVariant; 4] = [Self::Full, Self::Nct, Self::Ba, Self::Ncp];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "FULL",
            Self::Nct => "NCT",
            Self::Ba => "BA",
            Self::Ncp => "NCP",
        }
    }
}

impl std::str::FromStr for LectureVariant {
    type Err = LectureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FULL" => Ok(Self::Full),
            "NCT" => Ok(Self::Nct),
            "BA" => Ok(Self::Ba),
            "NCP" => Ok(Self::Ncp),
            other => Err(LectureError::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LectureConfig {
    pub context_text: String,
    pub code_instruction: String,
    pub variant: LectureVariant,
}

impl LectureConfig {
    pub fn new(variant: LectureVariant) -> Self {
        Self { context_text: DEFAULT_CONTEXT.to_string(), code_instruction: default_code_instruction(), variant }
    }
}

impl Default for LectureConfig {
    fn default() -> Self {
        Self::new(LectureVariant::Full)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LecturePrompt {
    pub text: String,
    pub registry_snapshot: Vec<ApiDescriptor>,
    pub variant: LectureVariant,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LectureError {
    #[error("the API registry is empty")]
    EmptyRegistry,
    #[error("duplicate API name {0:?}")]
    DuplicateApi(String),
    #[error("context text is empty")]
    EmptyContext,
    #[error("unknown lecture variant {0:?} (expected FULL, NCT, BA or NCP)")]
    UnknownVariant(String),
    #[error("registry file: {0}")]
    Registry(String),
}

/// x, y, z, w, then x1, x2, ...
pub fn opaque_name(position: usize) -> String {
    const BASE: [&str; 4] = ["x", "y", "z", "w"];
    BASE.get(position).map_or_else(|| format!("x{}", position - BASE.len() + 1), |s| s.to_string())
}

/// One stanza: the signature line, then the indented return description.
pub fn describe_api(d: &ApiDescriptor, variant: LectureVariant) -> String {
    let names: Vec<String> = if variant == LectureVariant::Ba {
        (0..d.params.len()).map(opaque_name).collect()
    } else {
        d.params.iter().map(|p| p.name.clone()).collect()
    };
    let mut returns = d.returns_description.clone();
    if variant == LectureVariant::Ba {
        // Substitute in one pass so a new name never gets rewritten again.
        let alternatives: Vec<String> = d.params.iter().map(|p| regex::escape(&p.name)).collect();
        if !alternatives.is_empty() {
            let re = Regex::new(&format!(r"\b(?:{})\b", alternatives.join("|"))).expect("escaped names");
            returns = re
                .replace_all(&returns, |c: &regex::Captures| {
                    let pos = d.params.iter().position(|p| p.name == c[0]).unwrap();
                    names[pos].clone()
                })
                .into_owned();
        }
    }
    format!("{}({})\n    {}", d.name, names.join(", "), returns)
}

pub fn render_lecture(registry: &[ApiDescriptor], cfg: &LectureConfig) -> Result<LecturePrompt, LectureError> {
    if registry.is_empty() {
        return Err(LectureError::EmptyRegistry);
    }
    let mut seen = HashSet::new();
    for d in registry {
        if !seen.insert(d.name.as_str()) {
            return Err(LectureError::DuplicateApi(d.name.clone()));
        }
    }

    let mut sections = Vec::new();
    if cfg.variant != LectureVariant::Nct {
        if cfg.context_text.trim().is_empty() {
            return Err(LectureError::EmptyContext);
        }
        sections.push(cfg.context_text.trim().to_string());
    }
    let stanzas: Vec<String> = registry.iter().map(|d| describe_api(d, cfg.variant)).collect();
    sections.push(format!("{API_HEADER}\n\n{}", stanzas.join("\n\n")));
    sections.push(match cfg.variant {
        LectureVariant::Ncp => NO_CODE_INSTRUCTION.to_string(),
        _ => cfg.code_instruction.trim().to_string(),
    });

    Ok(LecturePrompt { text: sections.join("\n\n") + "\n", registry_snapshot: registry.to_vec(), variant: cfg.variant })
}

/// The six N-CEN APIs as advertised to the model.
pub fn ncen_registry() -> Vec<ApiDescriptor> {
    vec![
        ApiDescriptor::new(
            "get_report",
            &[("fund_name", "name of a fund")],
            "Returns the N-CEN report that includes the fund fund_name.",
        ),
        ApiDescriptor::new("get_all_reports", &[], "Returns the list of all N-CEN reports."),
        ApiDescriptor::new(
            "fetch_block",
            &[("ncen_report", "an N-CEN report"), ("fund_name", "name of a fund")],
            "Returns the block of text in the N-CEN report ncen_report that describes the fund fund_name.",
        ),
        ApiDescriptor::new(
            "segment_report",
            &[("ncen_report", "an N-CEN report")],
            "Returns the list of all fund blocks in the N-CEN report ncen_report.",
        ),
        ApiDescriptor::new(
            "extract_entity",
            &[("fund_block", "a fund block"), ("entity_label", "role of an entity")],
            "Returns the list of names of the entities in the fund block fund_block whose role is entity_label, \
such as 'custodian', 'investment adviser', 'administrator', 'pricing service' or 'collateral manager'.",
        ),
        ApiDescriptor::new(
            "extract_value",
            &[("fund_block", "a fund block"), ("value_label", "label of a reported number")],
            "Returns the number reported in the fund block fund_block under value_label, \
such as 'gross commission', 'total purchase sale' or 'fund net assets'.",
        ),
    ]
}

pub fn load_registry(path: &Path) -> Result<Vec<ApiDescriptor>, LectureError> {
    let text = std::fs::read_to_string(path).map_err(|e| LectureError::Registry(format!("{}: {e}", path.display())))?;
    parse_registry(&text)
}

pub fn parse_registry(text: &str) -> Result<Vec<ApiDescriptor>, LectureError> {
    let reg: Vec<ApiDescriptor> = serde_json::from_str(text).map_err(|e| LectureError::Registry(e.to_string()))?;
    let mut seen = HashSet::new();
    for d in &reg {
        if !seen.insert(d.name.clone()) {
            return Err(LectureError::DuplicateApi(d.name.clone()));
        }
    }
    Ok(reg)
}

static SIGNATURE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^([A-Za-z_][A-Za-z0-9_]*)\(([^)]*)\)\s*$").unwrap());
static OPAQUE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?:[xyzw]|x\d+)$").unwrap());

/// Which lecture components a prompt text actually carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LectureFeatures {
    pub has_context: bool,
    pub meaningful_args: bool,
    pub asks_for_code: bool,
}

impl LectureFeatures {
    pub fn detect(text: &str) -> Self {
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        let params: Vec<String> = SIGNATURE
            .captures_iter(text)
            .flat_map(|c| c[2].split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect::<Vec<_>>())
            .collect();
        Self {
            has_context: first.trim() != API_HEADER,
            meaningful_args: params.is_empty() || params.iter().any(|p| !OPAQUE.is_match(p)),
            asks_for_code: !text.contains(NO_CODE_INSTRUCTION) && text.contains("workflow code"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn render(v: LectureVariant) -> LecturePrompt {
        render_lecture(&ncen_registry(), &LectureConfig::new(v)).unwrap()
    }

    #[test]
    fn full_has_six_stanzas_in_order() {
        let p = render(LectureVariant::Full);
        let names: Vec<String> = SIGNATURE.captures_iter(&p.text).map(|c| c[1].to_string()).collect();
        assert_eq!(
            names,
            ["get_report", "get_all_reports", "fetch_block", "segment_report", "extract_entity", "extract_value"]
        );
        let ctx = p.text.find(DEFAULT_CONTEXT).unwrap();
        let apis = p.text.find(API_HEADER).unwrap();
        let code = p.text.find("write workflow code").unwrap();
        assert!(ctx < apis && apis < code);
    }

    #[test]
    fn nct_only_drops_the_context_lines() {
        let full = render(LectureVariant::Full).text;
        let nct = render(LectureVariant::Nct).text;
        let expected = full.replacen(&format!("{DEFAULT_CONTEXT}\n\n"), "", 1);
        assert_eq!(nct, expected);
        let full_lines: HashSet<&str> = full.lines().collect();
        let nct_lines: HashSet<&str> = nct.lines().collect();
        assert!(nct_lines.is_subset(&full_lines));
        let removed: Vec<_> = full_lines.difference(&nct_lines).collect();
        assert_eq!(removed, [&DEFAULT_CONTEXT]);
    }

    #[test]
    fn ba_hides_every_parameter_name() {
        let p = render(LectureVariant::Ba);
        for d in ncen_registry() {
            for param in d.params {
                assert!(!p.text.contains(&param.name), "{} leaked", param.name);
            }
        }
        assert!(p.text.contains("get_report(x)\n    Returns the N-CEN report that includes the fund x."));
        assert!(p.text.contains("fetch_block(x, y)"));
    }

    #[test]
    fn ncp_swaps_the_instruction() {
        let p = render(LectureVariant::Ncp);
        assert!(p.text.trim_end().ends_with(NO_CODE_INSTRUCTION));
        assert!(!p.text.contains("workflow code"));
    }

    #[test]
    fn describe_api_signatures() {
        let reg = ncen_registry();
        assert!(describe_api(&reg[0], LectureVariant::Full).starts_with("get_report(fund_name)\n"));
        assert!(describe_api(&reg[0], LectureVariant::Ba).starts_with("get_report(x)\n"));
        assert!(describe_api(&reg[2], LectureVariant::Ba).starts_with("fetch_block(x, y)\n"));
    }

    #[test]
    fn opaque_letters_extend() {
        let names: Vec<String> = (0..7).map(opaque_name).collect();
        assert_eq!(names, ["x", "y", "z", "w", "x1", "x2", "x3"]);
    }

    #[test]
    fn api_names_survive_every_variant() {
        let names: HashSet<String> = ncen_registry().into_iter().map(|d| d.name).collect();
        for v in LectureVariant::ALL {
            let p = render(v);
            let found: HashSet<String> = SIGNATURE.captures_iter(&p.text).map(|c| c[1].to_string()).collect();
            assert_eq!(found, names, "{v:?}");
        }
    }

    #[test]
    fn rendering_is_pure() {
        for v in LectureVariant::ALL {
            assert_eq!(render(v), render(v));
        }
    }

    #[test]
    fn feature_detection_matches_variant() {
        let f = |v| LectureFeatures::detect(&render(v).text);
        assert_eq!(
            f(LectureVariant::Full),
            LectureFeatures { has_context: true, meaningful_args: true, asks_for_code: true }
        );
        assert!(!f(LectureVariant::Nct).has_context);
        assert!(!f(LectureVariant::Ba).meaningful_args);
        assert!(!f(LectureVariant::Ncp).asks_for_code);
    }

    #[test]
    fn errors() {
        assert_eq!(render_lecture(&[], &LectureConfig::default()), Err(LectureError::EmptyRegistry));
        let mut reg = ncen_registry();
        reg.push(reg[0].clone());
        assert!(matches!(render_lecture(&reg, &LectureConfig::default()), Err(LectureError::DuplicateApi(_))));
        assert!("bogus".parse::<LectureVariant>().is_err());
        assert_eq!("ncp".parse::<LectureVariant>().unwrap(), LectureVariant::Ncp);
    }

    #[test]
    fn full_lecture_snapshot() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/lecture_full.txt");
        let text = render(LectureVariant::Full).text;
        if std::env::var_os("UPDATE_SNAPSHOTS").is_some() {
            std::fs::write(&path, &text).unwrap();
        }
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    }

    #[test]
    fn registry_file_matches_builtin() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/registry.json");
        if std::env::var_os("UPDATE_SNAPSHOTS").is_some() {
            std::fs::write(&path, serde_json::to_string_pretty(&ncen_registry()).unwrap() + "\n").unwrap();
        }
        assert_eq!(load_registry(&path).unwrap(), ncen_registry());
    }
}
