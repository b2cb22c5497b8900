//! The transport-level widget tree produced by render functions.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::interp::Value;

pub const MAX_VIEW_DEPTH: usize = 64;
pub const MAX_VIEW_NODES: usize = 10_000;

/// The closed widget vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    Box,
    Row,
    Column,
    Text,
    Button,
    Input,
    Slider,
    Svg,
    SvgCircle,
    SvgLine,
    SvgPath,
    Select,
}

impl Tag {
    pub const ALL: [Tag; 12] = [
        Tag::Box,
        Tag::Row,
        Tag::Column,
        Tag::Text,
        Tag::Button,
        Tag::Input,
        Tag::Slider,
        Tag::Svg,
        Tag::SvgCircle,
        Tag::SvgLine,
        Tag::SvgPath,
        Tag::Select,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Box => "box",
            Tag::Row => "row",
            Tag::Column => "column",
            Tag::Text => "text",
            Tag::Button => "button",
            Tag::Input => "input",
            Tag::Slider => "slider",
            Tag::Svg => "svg",
            Tag::SvgCircle => "svg-circle",
            Tag::SvgLine => "svg-line",
            Tag::SvgPath => "svg-path",
            Tag::Select => "select",
        }
    }

    pub fn parse(s: &str) -> Option<Tag> {
        Tag::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewNode {
    pub tag: Tag,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
    /// Event kind to handler id.
    #[serde(default)]
    pub handlers: BTreeMap<String, String>,
    #[serde(default)]
    pub children: Vec<ViewNode>,
}

impl ViewNode {
    pub fn text(content: impl Into<String>) -> ViewNode {
        ViewNode {
            tag: Tag::Text,
            attrs: BTreeMap::from([("content".to_string(), content.into())]),
            handlers: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(ViewNode::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(ViewNode::depth).max().unwrap_or(0)
    }

    /// Every handler id in the tree, in pre-order.
    pub fn handler_ids(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.walk(&mut |n| out.extend(n.handlers.values().cloned()));
        out
    }

    /// Concatenated `content` attributes of all text nodes.
    pub fn text_content(&self) -> String {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if n.tag == Tag::Text {
                if let Some(c) = n.attrs.get("content") {
                    out.push(c.clone());
                }
            }
        });
        out.join(" ")
    }

    pub fn walk(&self, f: &mut impl FnMut(&ViewNode)) {
        f(self);
        for child in &self.children {
            child.walk(f);
        }
    }
}

/// The read-only fallback: the instance's reference and state verbatim.
pub fn default_view(extension_ref: &str, state_text: &str) -> ViewNode {
    ViewNode::text(format!("{extension_ref} {state_text}"))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ViewError {
    #[error("render must return a view, got {0}")]
    NotAView(&'static str),
    #[error("view is deeper than {MAX_VIEW_DEPTH} levels")]
    TooDeep,
    #[error("view has more than {MAX_VIEW_NODES} nodes")]
    TooManyNodes,
}

/// A converted tree plus the handler closures its ids refer to.
pub struct Rendered {
    pub tree: ViewNode,
    /// Indexed by the numeric part of the handler id (`h0`, `h1`, ...).
    pub handlers: Vec<Value>,
}

/// Converts a render result to a [`ViewNode`], enforcing the size caps and
/// numbering handlers in pre-order.
pub fn to_view_tree(value: &Value) -> Result<Rendered, ViewError> {
    let mut handlers = Vec::new();
    let mut nodes = 0;
    let tree = convert(value, 1, &mut nodes, &mut handlers)?;
    Ok(Rendered { tree, handlers })
}

fn convert(value: &Value, depth: usize, nodes: &mut usize, handlers: &mut Vec<Value>) -> Result<ViewNode, ViewError> {
    if depth > MAX_VIEW_DEPTH {
        return Err(ViewError::TooDeep);
    }
    *nodes += 1;
    if *nodes > MAX_VIEW_NODES {
        return Err(ViewError::TooManyNodes);
    }
    let view = match value {
        Value::View(v) => v,
        other => return Err(ViewError::NotAView(other.type_name())),
    };
    let attrs = view.attrs.iter().map(|(k, v)| (k.clone(), attr_text(v))).collect();
    let mut handler_ids = BTreeMap::new();
    for (event, f) in &view.handlers {
        handler_ids.insert(event.clone(), format!("h{}", handlers.len()));
        handlers.push(f.clone());
    }
    let children = view
        .children
        .iter()
        .map(|c| convert(c, depth + 1, nodes, handlers))
        .collect::<Result<_, _>>()?;
    Ok(ViewNode { tag: view.tag, attrs, handlers: handler_ids, children })
}

fn attr_text(v: &Value) -> String {
    match v {
        Value::Keyword(k) => k.to_string(),
        other => other.display_string(),
    }
}
