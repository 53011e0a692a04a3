//! Hierarchical tag trees and the subsumption order over tag paths.
//!
//! A [`Registry`] holds a set of named [`TagTree`]s. Every qualitative
//! statement made elsewhere in the crate is a [`TagPath`] into one of these
//! trees. An ancestor tag stands for the union of its descendants, so
//! `actor_type:vehicle` covers `actor_type:vehicle/category_m`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Maximum number of segments below the root of a tree.
pub const MAX_DEPTH: usize = 8;

const BUILTIN_DOCUMENT: &str = include_str!("../data/builtin.tags");

/// Which part of a scenario a tree describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    /// Properties of a single road user (dynamic environment).
    Actor,
    /// Properties of the static environment.
    Static,
    /// Weather and lighting conditions.
    Condition,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Actor => "actor",
            Scope::Static => "static",
            Scope::Condition => "condition",
        }
    }

    fn parse(text: &str) -> Option<Scope> {
        match text {
            "actor" => Some(Scope::Actor),
            "static" => Some(Scope::Static),
            "condition" => Some(Scope::Condition),
            _ => None,
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagNode {
    pub label: String,
    pub display_name: String,
    pub annotation: Option<String>,
    pub children: Vec<TagNode>,
}

impl TagNode {
    fn child(&self, label: &str) -> Option<&TagNode> {
        self.children.iter().find(|c| c.label == label)
    }

    fn count(&self) -> usize {
        1 + self.children.iter().map(TagNode::count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagTree {
    pub id: String,
    pub scope: Scope,
    /// The root's label is the tree id.
    pub root: TagNode,
}

impl TagTree {
    pub fn node_count(&self) -> usize {
        self.root.count()
    }

    /// Every path in the tree, root first, in document order.
    pub fn paths(&self) -> Vec<TagPath> {
        fn walk(tree: &str, node: &TagNode, prefix: &mut Vec<String>, out: &mut Vec<TagPath>) {
            for child in &node.children {
                prefix.push(child.label.clone());
                out.push(TagPath::new(tree, prefix));
                walk(tree, child, prefix, out);
                prefix.pop();
            }
        }
        let mut out = vec![TagPath::root(&self.id)];
        walk(&self.id, &self.root, &mut Vec::new(), &mut out);
        out
    }

    fn node<'a, S: AsRef<str>>(&'a self, segments: &[S]) -> Option<&'a TagNode> {
        let mut node = &self.root;
        for seg in segments {
            node = node.child(seg.as_ref())?;
        }
        Some(node)
    }
}

/// A position in a tag tree, kept in its canonical text form
/// `tree_id:seg1/seg2`. `tree_id:` alone is the root.
///
/// Ordering, equality and hashing all follow the canonical text, so sorted
/// collections of paths are sorted by canonical text.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TagPath {
    text: String,
    colon: usize,
}

impl TagPath {
    /// Builds a path without checking it against any registry.
    pub fn new<S: AsRef<str>>(tree: &str, segments: &[S]) -> TagPath {
        let mut text = String::with_capacity(tree.len() + 1 + segments.len() * 8);
        text.push_str(tree);
        text.push(':');
        for (i, seg) in segments.iter().enumerate() {
            if i > 0 {
                text.push('/');
            }
            text.push_str(seg.as_ref());
        }
        TagPath {
            colon: tree.len(),
            text,
        }
    }

    pub fn root(tree: &str) -> TagPath {
        TagPath::new::<&str>(tree, &[])
    }

    pub fn tree(&self) -> &str {
        &self.text[..self.colon]
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn is_root(&self) -> bool {
        self.text.len() == self.colon + 1
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        let rest = &self.text[self.colon + 1..];
        rest.split('/').filter(|s| !s.is_empty())
    }

    pub fn depth(&self) -> usize {
        self.segments().count()
    }

    pub fn parent(&self) -> Option<TagPath> {
        if self.is_root() {
            return None;
        }
        match self.text.rfind('/') {
            Some(i) if i > self.colon => Some(TagPath {
                text: self.text[..i].to_string(),
                colon: self.colon,
            }),
            _ => Some(TagPath::root(self.tree())),
        }
    }

    /// The path itself followed by each ancestor up to the root.
    pub fn ancestors_or_self(&self) -> Vec<TagPath> {
        let mut out = vec![self.clone()];
        let mut cur = self.clone();
        while let Some(p) = cur.parent() {
            out.push(p.clone());
            cur = p;
        }
        out
    }

    /// Ancestor-or-equal test. Paths in different trees are incomparable.
    pub fn subsumes(&self, specific: &TagPath) -> bool {
        if self.tree() != specific.tree() {
            return false;
        }
        if self.is_root() || self.text == specific.text {
            return true;
        }
        specific.text.len() > self.text.len()
            && specific.text.starts_with(&self.text)
            && specific.text.as_bytes()[self.text.len()] == b'/'
    }
}

impl fmt::Display for TagPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl fmt::Debug for TagPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TagPath({})", self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate tree id `{tree}`")]
    DuplicateTree { line: usize, tree: String },
    #[error("line {line}: duplicate sibling label at `{path}`")]
    DuplicateSibling { line: usize, path: TagPath },
    #[error("line {line}: tree `{tree}` has no scope")]
    MissingScope { line: usize, tree: String },
    #[error("line {line}: `{path}` exceeds the maximum depth of {MAX_DEPTH}")]
    DepthExceeded { line: usize, path: TagPath },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("`{text}` is not a tag path (expected `tree:seg/seg`)")]
    Malformed { text: String },
    #[error("unknown tag tree `{tree}`")]
    UnknownTree { tree: String },
    #[error("unknown tag `{segment}` under `{resolved}`")]
    UnknownSegment { resolved: TagPath, segment: String },
}

/// An immutable collection of tag trees keyed by tree id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    trees: Vec<TagTree>,
    by_id: BTreeMap<String, usize>,
}

impl Registry {
    /// The registry shipped with the crate.
    pub fn builtin() -> Registry {
        Registry::parse(BUILTIN_DOCUMENT).expect("built-in registry is valid")
    }

    pub fn builtin_document() -> &'static str {
        BUILTIN_DOCUMENT
    }

    /// Parses a registry document.
    pub fn parse(source: &str) -> Result<Registry, RegistryError> {
        DocumentParser::default().run(source)
    }

    pub fn from_trees(trees: Vec<TagTree>) -> Result<Registry, RegistryError> {
        let mut reg = Registry::default();
        for tree in trees {
            reg.push(tree, 0)?;
        }
        Ok(reg)
    }

    fn push(&mut self, tree: TagTree, line: usize) -> Result<(), RegistryError> {
        if self.by_id.contains_key(&tree.id) {
            return Err(RegistryError::DuplicateTree { line, tree: tree.id });
        }
        validate_node(&tree.id, &tree.root, &mut Vec::new(), line)?;
        self.by_id.insert(tree.id.clone(), self.trees.len());
        self.trees.push(tree);
        Ok(())
    }

    pub fn trees(&self) -> &[TagTree] {
        &self.trees
    }

    pub fn tree(&self, id: &str) -> Option<&TagTree> {
        self.by_id.get(id).map(|&i| &self.trees[i])
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn scope_of(&self, path: &TagPath) -> Option<Scope> {
        self.tree(path.tree()).map(|t| t.scope)
    }

    pub fn node(&self, path: &TagPath) -> Option<&TagNode> {
        let segments: Vec<&str> = path.segments().collect();
        self.tree(path.tree())?.node(&segments)
    }

    pub fn contains(&self, path: &TagPath) -> bool {
        self.node(path).is_some()
    }

    /// Every path of every tree in document order.
    pub fn all_paths(&self) -> Vec<TagPath> {
        self.trees.iter().flat_map(TagTree::paths).collect()
    }

    /// Resolves canonical path text. Labels are case-sensitive.
    pub fn resolve(&self, text: &str) -> Result<TagPath, ResolveError> {
        let (tree_id, rest) = text
            .split_once(':')
            .ok_or_else(|| ResolveError::Malformed { text: text.to_string() })?;
        if tree_id.is_empty() || rest.starts_with('/') || rest.ends_with('/') || rest.contains("//") {
            return Err(ResolveError::Malformed { text: text.to_string() });
        }
        let tree = self.tree(tree_id).ok_or_else(|| ResolveError::UnknownTree {
            tree: tree_id.to_string(),
        })?;
        let mut node = &tree.root;
        let mut resolved: Vec<&str> = Vec::new();
        for seg in rest.split('/').filter(|s| !s.is_empty()) {
            node = match node.child(seg) {
                Some(child) => child,
                None => {
                    return Err(ResolveError::UnknownSegment {
                        resolved: TagPath::new(tree_id, &resolved),
                        segment: seg.to_string(),
                    })
                }
            };
            resolved.push(seg);
        }
        Ok(TagPath::new(tree_id, &resolved))
    }

    /// `general` is `specific` or one of its ancestors.
    pub fn subsumes(&self, general: &TagPath, specific: &TagPath) -> bool {
        general.subsumes(specific)
    }

    /// Renders one tree as a DOT digraph. Node ids are `n0`, `n1`, ... in
    /// document order.
    pub fn export_dot(&self, tree_id: &str) -> Result<String, ResolveError> {
        let tree = self.tree(tree_id).ok_or_else(|| ResolveError::UnknownTree {
            tree: tree_id.to_string(),
        })?;
        let paths = tree.paths();
        let mut out = String::new();
        out.push_str(&format!("digraph {} {{\n", tree.id));
        out.push_str("  node [shape=box];\n");
        for (i, path) in paths.iter().enumerate() {
            let node = self.node(path).expect("path from own tree");
            out.push_str(&format!(
                "  n{} [label=\"{}\", tooltip=\"{}\"];\n",
                i,
                dot_escape(&node.display_name),
                path
            ));
        }
        for (i, path) in paths.iter().enumerate() {
            if let Some(parent) = path.parent() {
                let p = paths.iter().position(|q| *q == parent).expect("parent listed first");
                out.push_str(&format!("  n{p} -> n{i};\n"));
            }
        }
        out.push_str("}\n");
        Ok(out)
    }

    /// Writes the registry back out in document form.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        for (i, tree) in self.trees.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&tree_document(tree));
        }
        out
    }
}

/// Document form of a single tree (no trailing blank line).
pub fn tree_document(tree: &TagTree) -> String {
    fn node_line(out: &mut String, node: &TagNode, depth: usize) {
        out.push_str(&"  ".repeat(depth));
        out.push_str(&node.label);
        out.push_str(&format!(" \"{}\"", node.display_name));
        if let Some(a) = &node.annotation {
            out.push_str(" # ");
            out.push_str(a);
        }
        out.push('\n');
        for c in &node.children {
            node_line(out, c, depth + 1);
        }
    }
    let mut out = format!("tree {} scope={} \"{}\"", tree.id, tree.scope, tree.root.display_name);
    if let Some(a) = &tree.root.annotation {
        out.push_str(" # ");
        out.push_str(a);
    }
    out.push('\n');
    for c in &tree.root.children {
        node_line(&mut out, c, 1);
    }
    out
}

fn dot_escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

pub(crate) fn is_label(text: &str) -> bool {
    let mut chars = text.chars();
    matches!(chars.next(), Some('a'..='z')) && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

fn validate_node(tree: &str, node: &TagNode, prefix: &mut Vec<String>, line: usize) -> Result<(), RegistryError> {
    if !is_label(&node.label) {
        return Err(RegistryError::Syntax {
            line,
            message: format!("invalid label `{}`", node.label),
        });
    }
    if node.display_name.is_empty() {
        return Err(RegistryError::Syntax {
            line,
            message: format!("empty display name for `{}`", node.label),
        });
    }
    if prefix.len() > MAX_DEPTH {
        return Err(RegistryError::DepthExceeded {
            line,
            path: TagPath::new(tree, prefix),
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    for child in &node.children {
        prefix.push(child.label.clone());
        if !seen.insert(child.label.as_str()) {
            return Err(RegistryError::DuplicateSibling {
                line,
                path: TagPath::new(tree, prefix),
            });
        }
        validate_node(tree, child, prefix, line)?;
        prefix.pop();
    }
    Ok(())
}

/// Line-oriented parser for registry documents.
#[derive(Default)]
struct DocumentParser {
    registry: Registry,
    open: Option<OpenTree>,
}

struct OpenTree {
    id: String,
    scope: Scope,
    header_line: usize,
    root: TagNode,
}

impl OpenTree {
    /// Returns the node that currently sits at `depth` (root is depth 0)
    /// along the last-added branch.
    fn last_at(&mut self, depth: usize) -> Option<&mut TagNode> {
        let mut node = &mut self.root;
        for _ in 0..depth {
            node = node.children.last_mut()?;
        }
        Some(node)
    }

    fn path_of_last(&self, depth: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut node = &self.root;
        for _ in 0..depth {
            match node.children.last() {
                Some(c) => {
                    out.push(c.label.clone());
                    node = c;
                }
                None => break,
            }
        }
        out
    }
}

impl DocumentParser {
    fn run(mut self, source: &str) -> Result<Registry, RegistryError> {
        for (idx, raw) in source.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end();
            if line.trim().is_empty() {
                self.close()?;
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if line.starts_with("tree ") || line == "tree" {
                self.close()?;
                self.open = Some(parse_header(line, line_no)?);
                continue;
            }
            let indent = line.len() - line.trim_start_matches(' ').len();
            if line[indent..].starts_with('\t') {
                return Err(syntax(line_no, "tabs are not allowed in indentation"));
            }
            if line[indent..].starts_with('#') {
                continue;
            }
            let open = self
                .open
                .as_mut()
                .ok_or_else(|| syntax(line_no, "node declared outside of a tree"))?;
            if indent == 0 || indent % 2 != 0 {
                return Err(syntax(line_no, "indentation must be a positive multiple of two spaces"));
            }
            let depth = indent / 2;
            let (label, display, annotation) = parse_node_line(&line[indent..], line_no)?;
            let mut segments = open.path_of_last(depth - 1);
            if segments.len() != depth - 1 {
                return Err(syntax(line_no, "node is indented more than one level below its parent"));
            }
            segments.push(label.clone());
            if depth > MAX_DEPTH {
                return Err(RegistryError::DepthExceeded {
                    line: line_no,
                    path: TagPath::new(&open.id, &segments),
                });
            }
            let parent = open.last_at(depth - 1).expect("depth checked above");
            if parent.child(&label).is_some() {
                return Err(RegistryError::DuplicateSibling {
                    line: line_no,
                    path: TagPath::new(&open.id, &segments),
                });
            }
            parent.children.push(TagNode {
                label,
                display_name: display,
                annotation,
                children: Vec::new(),
            });
        }
        self.close()?;
        Ok(self.registry)
    }

    fn close(&mut self) -> Result<(), RegistryError> {
        if let Some(open) = self.open.take() {
            let tree = TagTree {
                id: open.id,
                scope: open.scope,
                root: open.root,
            };
            self.registry.push(tree, open.header_line)?;
        }
        Ok(())
    }
}

fn syntax(line: usize, message: &str) -> RegistryError {
    RegistryError::Syntax {
        line,
        message: message.to_string(),
    }
}

fn parse_header(line: &str, line_no: usize) -> Result<OpenTree, RegistryError> {
    let (body, annotation) = split_annotation(line);
    let rest = body["tree".len()..].trim_start();
    let (id, rest) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    if !is_label(id) {
        return Err(syntax(line_no, "expected a snake_case tree id after `tree`"));
    }
    let rest = rest.trim();
    let (scope_text, rest) = match rest.strip_prefix("scope=") {
        Some(r) => r.split_once(char::is_whitespace).unwrap_or((r, "")),
        None => {
            return Err(RegistryError::MissingScope {
                line: line_no,
                tree: id.to_string(),
            })
        }
    };
    let scope = Scope::parse(scope_text).ok_or_else(|| {
        syntax(
            line_no,
            &format!("unknown scope `{scope_text}` (expected actor, static or condition)"),
        )
    })?;
    let rest = rest.trim();
    let display = if rest.is_empty() {
        id.to_string()
    } else {
        parse_quoted(rest, line_no)?
    };
    Ok(OpenTree {
        id: id.to_string(),
        scope,
        header_line: line_no,
        root: TagNode {
            label: id.to_string(),
            display_name: display,
            annotation,
            children: Vec::new(),
        },
    })
}

fn parse_node_line(text: &str, line_no: usize) -> Result<(String, String, Option<String>), RegistryError> {
    let (body, annotation) = split_annotation(text);
    let (label, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
    if !is_label(label) {
        return Err(syntax(line_no, &format!("invalid label `{label}`")));
    }
    let display = parse_quoted(rest.trim(), line_no)?;
    if display.is_empty() {
        return Err(syntax(line_no, "display name must not be empty"));
    }
    Ok((label.to_string(), display, annotation))
}

/// Splits off a trailing `# annotation` that is not inside quotes.
fn split_annotation(text: &str) -> (&str, Option<String>) {
    let mut in_quotes = false;
    for (i, c) in text.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => {
                let note = text[i + 1..].trim();
                let note = (!note.is_empty()).then(|| note.to_string());
                return (text[..i].trim_end(), note);
            }
            _ => {}
        }
    }
    (text.trim_end(), None)
}

fn parse_quoted(text: &str, line_no: usize) -> Result<String, RegistryError> {
    let inner = text
        .strip_prefix('"')
        .and_then(|t| t.strip_suffix('"'))
        .filter(|t| !t.contains('"'))
        .ok_or_else(|| syntax(line_no, "expected a quoted display name"))?;
    Ok(inner.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> Registry {
        Registry::builtin()
    }

    #[test]
    fn builtin_tree_inventory() {
        let r = reg();
        let ids: Vec<&str> = r.trees().iter().map(|t| t.id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "actor_type",
                "lateral_activity",
                "longitudinal_activity",
                "initial_state",
                "lead_vehicle",
                "road_type",
                "road_layout",
                "static_object",
                "traffic_light",
                "weather",
                "lighting"
            ]
        );
        assert_eq!(r.all_paths().len(), 99);
        assert_eq!(r.tree("road_type").unwrap().root.children.len(), 13);
    }

    #[test]
    fn empty_document_is_valid() {
        assert!(Registry::parse("").unwrap().is_empty());
        assert!(Registry::parse("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn duplicate_tree_id_is_rejected() {
        let doc = "tree weather scope=condition\n  rain \"Rain\"\n\ntree weather scope=condition\n  fog \"Fog\"\n";
        assert_eq!(
            Registry::parse(doc),
            Err(RegistryError::DuplicateTree {
                line: 4,
                tree: "weather".into()
            })
        );
    }

    #[test]
    fn duplicate_sibling_is_rejected() {
        let doc = "tree t scope=actor\n  a \"A\"\n    b \"B\"\n    b \"B again\"\n";
        match Registry::parse(doc) {
            Err(RegistryError::DuplicateSibling { line, path }) => {
                assert_eq!(line, 4);
                assert_eq!(path.as_str(), "t:a/b");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_scope_is_rejected() {
        assert!(matches!(
            Registry::parse("tree t\n  a \"A\"\n"),
            Err(RegistryError::MissingScope { line: 1, .. })
        ));
    }

    #[test]
    fn depth_limit() {
        let mut doc = String::from("tree t scope=actor\n");
        for d in 1..=9 {
            doc.push_str(&format!("{}n{} \"N\"\n", "  ".repeat(d), d));
        }
        match Registry::parse(&doc) {
            Err(RegistryError::DepthExceeded { line, path }) => {
                assert_eq!(line, 10);
                assert_eq!(path.depth(), 9);
            }
            other => panic!("unexpected {other:?}"),
        }
        let eight: String = doc.lines().take(9).map(|l| format!("{l}\n")).collect();
        assert!(Registry::parse(&eight).is_ok());
    }

    #[test]
    fn resolve_examples() {
        let r = reg();
        let p = r.resolve("actor_type:vru/pedestrian").unwrap();
        assert_eq!(r.node(&p).unwrap().display_name, "Pedestrian");
        let root = r.resolve("actor_type:").unwrap();
        assert!(root.is_root());
        assert_eq!(
            r.resolve("lateral_activity:drifting"),
            Err(ResolveError::UnknownSegment {
                resolved: TagPath::root("lateral_activity"),
                segment: "drifting".into()
            })
        );
        assert_eq!(
            r.resolve("actor_type:vru/horse"),
            Err(ResolveError::UnknownSegment {
                resolved: TagPath::new("actor_type", &["vru"]),
                segment: "horse".into()
            })
        );
        assert!(matches!(r.resolve("nope:a"), Err(ResolveError::UnknownTree { .. })));
        assert!(matches!(r.resolve("weather"), Err(ResolveError::Malformed { .. })));
        assert!(r.resolve("Weather:rain").is_err());
        assert!(r.resolve("weather:Rain").is_err());
    }

    #[test]
    fn subsumption_examples() {
        let r = reg();
        let vehicle = r.resolve("actor_type:vehicle").unwrap();
        let m = r.resolve("actor_type:vehicle/category_m").unwrap();
        assert!(r.subsumes(&vehicle, &m));
        assert!(!r.subsumes(&m, &vehicle));
        assert!(!r.subsumes(&r.resolve("weather:").unwrap(), &r.resolve("lighting:day").unwrap()));
        // Label prefixes are not path prefixes.
        let a = TagPath::new("t", &["ab"]);
        let b = TagPath::new("t", &["abc"]);
        assert!(!a.subsumes(&b));
    }

    #[test]
    fn parent_and_ancestors() {
        let p = TagPath::new("weather", &["rain", "heavy"]);
        let names: Vec<String> = p.ancestors_or_self().iter().map(|a| a.to_string()).collect();
        assert_eq!(names, ["weather:rain/heavy", "weather:rain", "weather:"]);
        assert_eq!(TagPath::root("weather").parent(), None);
    }

    #[test]
    fn dot_export_leaves() {
        let r = reg();
        let dot = r.export_dot("lead_vehicle").unwrap();
        assert_eq!(dot.matches(" -> ").count(), 2);
        assert!(dot.contains("label=\"Leader\""));
        assert!(dot.contains("label=\"No leader\""));
        let tl = r.export_dot("traffic_light").unwrap();
        assert_eq!(tl.matches(" -> ").count(), 4);
        assert!(r.export_dot("unknown").is_err());

        let single = Registry::parse("tree solo scope=static \"Solo\"\n").unwrap();
        let dot = single.export_dot("solo").unwrap();
        assert_eq!(dot.matches("[label=").count(), 1);
        assert_eq!(dot.matches(" -> ").count(), 0);
    }

    #[test]
    fn document_round_trip() {
        let r = reg();
        assert_eq!(Registry::parse(&r.to_document()).unwrap(), r);
    }

    #[test]
    fn annotations_are_kept() {
        let r = reg();
        let m = r.resolve("actor_type:vehicle/category_m").unwrap();
        assert!(r.node(&m).unwrap().annotation.as_deref().unwrap().contains("UNECE"));
    }
}
