//! Versioned prompt templates with `{{name}}` placeholders.
//!
//! Each template file starts with two header lines,
//! `# template: <name>` and `# version: <n>`, followed by the body.
//! Defaults are compiled in; a directory of overrides can be loaded at
//! runtime.

use std::collections::BTreeMap;
use std::path::Path;

use super::ProtocolError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub version: u32,
    pub body: String,
}

impl Template {
    pub fn parse(source: &str) -> Result<Template, ProtocolError> {
        let mut lines = source.lines();
        let header = |line: Option<&str>, key: &str| -> Result<String, ProtocolError> {
            line.and_then(|l| l.strip_prefix(&format!("# {key}:")))
                .map(|v| v.trim().to_string())
                .ok_or_else(|| ProtocolError::Template(format!("missing `# {key}:` header")))
        };
        let name = header(lines.next(), "template")?;
        let version = header(lines.next(), "version")?
            .parse()
            .map_err(|_| ProtocolError::Template(format!("bad version in template {name}")))?;
        let body = lines.collect::<Vec<_>>().join("\n").trim_end().to_string();
        Ok(Template { name, version, body })
    }

    pub fn placeholders(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut rest = self.body.as_str();
        while let Some(start) = rest.find("{{") {
            let Some(len) = rest[start + 2..].find("}}") else { break };
            out.push(&rest[start + 2..start + 2 + len]);
            rest = &rest[start + 2 + len + 2..];
        }
        out
    }

    /// Substitute every placeholder; a placeholder without a value is an error.
    pub fn render(&self, vars: &[(&str, &str)]) -> Result<String, ProtocolError> {
        let mut out = String::with_capacity(self.body.len());
        let mut rest = self.body.as_str();
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let end = rest[start + 2..]
                .find("}}")
                .ok_or_else(|| ProtocolError::Template(format!("unterminated placeholder in {}", self.name)))?;
            let key = &rest[start + 2..start + 2 + end];
            let value = vars
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| ProtocolError::Template(format!("template {} needs `{key}`", self.name)))?;
            out.push_str(value);
            rest = &rest[start + 2 + end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

const DEFAULTS: &[&str] = &[
    include_str!("../../templates/player_role.txt"),
    include_str!("../../templates/designer_role.txt"),
    include_str!("../../templates/evaluator_role.txt"),
    include_str!("../../templates/thinking.txt"),
    include_str!("../../templates/comm.txt"),
    include_str!("../../templates/message.txt"),
    include_str!("../../templates/action.txt"),
    include_str!("../../templates/action_retry.txt"),
    include_str!("../../templates/memory_action.txt"),
    include_str!("../../templates/outcome_matrix.txt"),
    include_str!("../../templates/outcome_woa.txt"),
    include_str!("../../templates/reflection.txt"),
    include_str!("../../templates/recall.txt"),
    include_str!("../../templates/evaluator_centralized.txt"),
    include_str!("../../templates/evaluator_team.txt"),
];

#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<String, Template>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let templates = DEFAULTS
            .iter()
            .map(|src| Template::parse(src).expect("bundled templates are well formed"))
            .map(|t| (t.name.clone(), t))
            .collect();
        TemplateSet { templates }
    }
}

impl TemplateSet {
    /// Defaults overridden by every `*.txt` file in `dir`.
    pub fn with_overrides(dir: &Path) -> Result<Self, ProtocolError> {
        let mut set = TemplateSet::default();
        let entries = std::fs::read_dir(dir).map_err(|e| ProtocolError::Template(format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths.into_iter().filter(|p| p.extension().is_some_and(|x| x == "txt")) {
            let src = std::fs::read_to_string(&path)
                .map_err(|e| ProtocolError::Template(format!("{}: {e}", path.display())))?;
            let t = Template::parse(&src)?;
            set.templates.insert(t.name.clone(), t);
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> Result<&Template, ProtocolError> {
        self.templates.get(name).ok_or_else(|| ProtocolError::Template(format!("no template named {name}")))
    }

    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String, ProtocolError> {
        self.get(name)?.render(vars)
    }

    pub fn versions(&self) -> BTreeMap<String, u32> {
        self.templates.iter().map(|(k, t)| (k.clone(), t.version)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_templates_parse() {
        let set = TemplateSet::default();
        assert_eq!(set.versions().len(), DEFAULTS.len());
        assert_eq!(set.get("comm").unwrap().placeholders(), vec!["round", "recipients"]);
    }

    #[test]
    fn render_requires_every_placeholder() {
        let t = Template::parse("# template: x\n# version: 2\nhello {{who}}!").unwrap();
        assert_eq!(t.version, 2);
        assert_eq!(t.render(&[("who", "B")]).unwrap(), "hello B!");
        assert!(t.render(&[]).is_err());
    }

    #[test]
    fn overrides_replace_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("reflection.txt"), "# template: reflection\n# version: 9\nShort.").unwrap();
        let set = TemplateSet::with_overrides(dir.path()).unwrap();
        assert_eq!(set.get("reflection").unwrap().version, 9);
        assert_eq!(set.render("reflection", &[]).unwrap(), "Short.");
    }
}
