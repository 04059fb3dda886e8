use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// Header of the designated answer line.
pub const ACTION_HEADER: &str = "ACTION:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseRules {
    pub admissible_actions: Vec<String>,
    pub format_instruction: String,
    /// Used when the response cannot be read.
    pub default_action: Option<String>,
}

impl ParseRules {
    pub fn new(admissible: &[&str], format_instruction: &str, default_action: Option<&str>) -> Result<Self, ProtocolError> {
        let rules = ParseRules {
            admissible_actions: admissible.iter().map(|s| s.to_string()).collect(),
            format_instruction: format_instruction.to_string(),
            default_action: default_action.map(str::to_string),
        };
        rules.validate()?;
        Ok(rules)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        match &self.default_action {
            Some(d) if !self.admissible_actions.contains(d) => {
                Err(ProtocolError::InvalidRules(format!("default action {d} is not admissible")))
            }
            _ if self.admissible_actions.is_empty() => Err(ProtocolError::InvalidRules("no admissible actions".into())),
            _ => Ok(()),
        }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.admissible_actions.iter().position(|a| a == label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAction {
    pub label: String,
    pub index: usize,
    /// False when the default was substituted.
    pub parse_ok: bool,
}

/// Last line whose header is `ACTION:` (case-insensitive), with its payload.
pub fn answer_line(response: &str) -> Option<(&str, &str)> {
    response.lines().rev().find_map(|line| {
        let l = line.trim();
        let head = l.get(..ACTION_HEADER.len())?;
        head.eq_ignore_ascii_case(ACTION_HEADER).then(|| (l, l[ACTION_HEADER.len()..].trim()))
    })
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Admissible labels mentioned in `text` as whole words.
fn mentioned<'a>(text: &str, rules: &'a ParseRules) -> Vec<&'a str> {
    let ws = words(text);
    rules
        .admissible_actions
        .iter()
        .filter(|label| {
            let lw = words(label);
            !lw.is_empty() && ws.windows(lw.len()).any(|w| w == lw.as_slice())
        })
        .map(String::as_str)
        .collect()
}

/// Extract the action from the designated answer line; when there is no
/// answer line the whole response is scanned. Exactly one admissible label
/// must be named.
pub fn parse_action(response: &str, rules: &ParseRules) -> Result<ParsedAction, ProtocolError> {
    let scope = answer_line(response).map(|(_, payload)| payload).unwrap_or(response);
    let found = mentioned(scope, rules);
    if let [label] = found.as_slice() {
        let index = rules.index_of(label).expect("label comes from rules");
        return Ok(ParsedAction { label: label.to_string(), index, parse_ok: true });
    }
    match &rules.default_action {
        Some(d) => Ok(ParsedAction {
            label: d.clone(),
            index: rules.index_of(d).ok_or_else(|| ProtocolError::InvalidRules(format!("default {d} not admissible")))?,
            parse_ok: false,
        }),
        None => Err(ProtocolError::UnparseableNoDefault { response: truncate(response, 200) }),
    }
}

/// True iff the response carries an answer line of exactly
/// `ACTION: <label>` for an admissible label.
pub fn exact_format(response: &str, rules: &ParseRules) -> bool {
    match answer_line(response) {
        Some((line, payload)) => {
            line.starts_with(ACTION_HEADER)
                && line == format!("{ACTION_HEADER} {payload}")
                && rules.admissible_actions.iter().any(|a| a == payload)
        }
        None => false,
    }
}

pub(crate) fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}
