//! Cycle-template DSL.
//!
//! A template body is a whitespace-separated sequence of slots and literal
//! words. A slot is written `{[name=]category:role[?][=value|value...]}`:
//!
//! * `name=` names the slot when it differs from its category;
//! * `role` is one of `subject`, `predicate`, `object`, `quantifier`, `adjective`;
//! * a trailing `?` marks the slot optional (filled only by augmentation);
//! * `=values` restricts the slot to the listed surfaces of its category.
//!
//! Template files hold one `id = body` line per template, with `#` comments.

mod augment;
mod expand;
mod validate;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use augment::{
    augment_sentence, enumerate_augmentations, AugmentationRule, AugmentationRuleSet, DEFAULT_AUGMENT_VARIANTS,
};
pub use expand::{expand_template, CyclePolicy, Expansion};
pub use validate::{validate_sentence, SentenceValidator};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemplateError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown role `{0}`")]
    UnknownRole(String),
    #[error("duplicate slot name `{0}`")]
    DuplicateSlot(String),
    #[error("template `{0}` has no slots")]
    NoSlots(String),
    #[error("duplicate template id `{0}`")]
    DuplicateTemplate(String),
    #[error("slot `{slot}` refers to unknown category `{category}`")]
    UnresolvedCategory { slot: String, category: String },
    #[error("slot `{slot}` has no candidate words")]
    EmptyCategory { slot: String },
    #[error("slot `{slot}` restricts to `{value}`, which is not in category `{category}`")]
    UnknownRestriction {
        slot: String,
        category: String,
        value: String,
    },
    #[error("rules line {line}: {message}")]
    Rules { line: usize, message: String },
    #[error("invalid cycle policy `{0}`")]
    Policy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotRole {
    Subject,
    Predicate,
    Object,
    Quantifier,
    Adjective,
}

impl SlotRole {
    pub fn tag(self) -> &'static str {
        match self {
            SlotRole::Subject => "subject",
            SlotRole::Predicate => "predicate",
            SlotRole::Object => "object",
            SlotRole::Quantifier => "quantifier",
            SlotRole::Adjective => "adjective",
        }
    }
}

impl FromStr for SlotRole {
    type Err = TemplateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "subject" => SlotRole::Subject,
            "predicate" => SlotRole::Predicate,
            "object" => SlotRole::Object,
            "quantifier" => SlotRole::Quantifier,
            "adjective" => SlotRole::Adjective,
            other => return Err(TemplateError::UnknownRole(other.to_owned())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Optionality {
    Required,
    Optional,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Slot {
    pub name: String,
    pub category: String,
    pub role: SlotRole,
    pub optionality: Optionality,
    /// When non-empty, only these surfaces of the category may fill the slot.
    pub restriction: Vec<String>,
}

impl Slot {
    pub fn is_required(&self) -> bool {
        self.optionality == Optionality::Required
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        if self.name != self.category {
            write!(f, "{}=", self.name)?;
        }
        write!(f, "{}:{}", self.category, self.role.tag())?;
        if self.optionality == Optionality::Optional {
            f.write_str("?")?;
        }
        if !self.restriction.is_empty() {
            write!(f, "={}", self.restriction.join("|"))?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Element {
    Slot(Slot),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    pub id: String,
    elements: Vec<Element>,
}

impl Template {
    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn slots(&self) -> impl Iterator<Item = &Slot> {
        self.elements.iter().filter_map(|e| match e {
            Element::Slot(s) => Some(s),
            Element::Literal(_) => None,
        })
    }

    pub fn required_slots(&self) -> impl Iterator<Item = &Slot> {
        self.slots().filter(|s| s.is_required())
    }

    pub fn literals(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().filter_map(|e| match e {
            Element::Literal(l) => Some(l.as_str()),
            Element::Slot(_) => None,
        })
    }

    /// Body text without the id; `parse_template` of it rebuilds `self` (with default id).
    pub fn body(&self) -> String {
        self.elements
            .iter()
            .map(|e| match e {
                Element::Slot(s) => s.to_string(),
                Element::Literal(l) => l.clone(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.id, self.body())
    }
}

pub const DEFAULT_TEMPLATE_ID: &str = "template";

/// Parses `id = body` or a bare body (which gets [`DEFAULT_TEMPLATE_ID`]).
pub fn parse_template(source: &str) -> Result<Template, TemplateError> {
    let (id, body, offset) = split_id(source);
    let id = id.unwrap_or(DEFAULT_TEMPLATE_ID).to_owned();
    let elements = parse_body(body, offset)?;
    let template = Template { id, elements };
    if template.slots().next().is_none() {
        return Err(TemplateError::NoSlots(template.id));
    }
    Ok(template)
}

fn split_id(source: &str) -> (Option<&str>, &str, usize) {
    let brace = source.find('{').unwrap_or(source.len());
    match source[..brace].find(" = ") {
        Some(eq) => {
            let id = source[..eq].trim();
            (Some(id).filter(|s| !s.is_empty()), &source[eq + 3..], eq + 3)
        }
        None => (None, source, 0),
    }
}

fn parse_body(body: &str, offset: usize) -> Result<Vec<Element>, TemplateError> {
    let mut elements = Vec::new();
    let mut names = std::collections::HashSet::new();
    let mut rest = body;
    let mut pos = offset;
    loop {
        let trimmed = rest.trim_start();
        pos += rest.len() - trimmed.len();
        rest = trimmed;
        if rest.is_empty() {
            break;
        }
        if let Some(inner_start) = rest.strip_prefix('{') {
            let close = inner_start.find('}').ok_or_else(|| TemplateError::Syntax {
                position: pos,
                message: "unclosed `{`".into(),
            })?;
            let inner = &inner_start[..close];
            if inner.contains('{') {
                return Err(TemplateError::Syntax {
                    position: pos,
                    message: "nested `{`".into(),
                });
            }
            let slot = parse_slot(inner, pos)?;
            if !names.insert(slot.name.clone()) {
                return Err(TemplateError::DuplicateSlot(slot.name));
            }
            elements.push(Element::Slot(slot));
            let used = close + 2;
            rest = &rest[used..];
            pos += used;
        } else {
            let end = rest.find(|c: char| c.is_whitespace() || c == '{').unwrap_or(rest.len());
            let word = &rest[..end];
            if word.contains('}') {
                return Err(TemplateError::Syntax {
                    position: pos,
                    message: "unexpected `}`".into(),
                });
            }
            elements.push(Element::Literal(word.to_owned()));
            rest = &rest[end..];
            pos += end;
        }
    }
    Ok(elements)
}

fn parse_slot(inner: &str, position: usize) -> Result<Slot, TemplateError> {
    let syntax = |message: &str| TemplateError::Syntax {
        position,
        message: message.to_owned(),
    };
    let (head, tail) = inner
        .split_once(':')
        .ok_or_else(|| syntax("slot needs `category:role`"))?;
    let (name, category) = match head.split_once('=') {
        Some((n, c)) => (n.trim(), c.trim()),
        None => (head.trim(), head.trim()),
    };
    if name.is_empty() || category.is_empty() {
        return Err(syntax("empty slot name or category"));
    }
    let (role_part, restriction) = match tail.split_once('=') {
        Some((r, values)) => {
            let values: Vec<String> = values.split('|').map(|v| v.trim().to_owned()).collect();
            if values.iter().any(String::is_empty) {
                return Err(syntax("empty restriction value"));
            }
            (r.trim(), values)
        }
        None => (tail.trim(), Vec::new()),
    };
    let (role_tag, optionality) = match role_part.strip_suffix('?') {
        Some(r) => (r.trim(), Optionality::Optional),
        None => (role_part, Optionality::Required),
    };
    Ok(Slot {
        name: name.to_owned(),
        category: category.to_owned(),
        role: role_tag.parse()?,
        optionality,
        restriction,
    })
}

/// Parses a template file. Lines without an explicit id get `t<line>`.
pub fn parse_template_file(text: &str) -> Result<Vec<Template>, TemplateError> {
    let mut templates: Vec<Template> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut t = parse_template(line)?;
        if split_id(line).0.is_none() {
            t.id = format!("t{}", idx + 1);
        }
        if templates.iter().any(|o| o.id == t.id) {
            return Err(TemplateError::DuplicateTemplate(t.id));
        }
        templates.push(t);
    }
    Ok(templates)
}

pub fn templates_to_file_string(templates: &[Template]) -> String {
    templates.iter().map(|t| format!("{t}\n")).collect()
}

const BUNDLED_TEMPLATES: &str = include_str!("../../data/templates.tpl");
const BUNDLED_RULES: &str = include_str!("../../data/augment.rules");

/// The bundled wear/eat/drink/sleep/go template set.
pub fn bundled_templates() -> Vec<Template> {
    parse_template_file(BUNDLED_TEMPLATES).expect("bundled templates parse")
}

pub fn bundled_templates_source() -> &'static str {
    BUNDLED_TEMPLATES
}

pub fn bundled_rules() -> AugmentationRuleSet {
    AugmentationRuleSet::parse(BUNDLED_RULES).expect("bundled rules parse")
}

pub fn bundled_rules_source() -> &'static str {
    BUNDLED_RULES
}
