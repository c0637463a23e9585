//! GSN-lite: a line-oriented text form of goal structures.
//!
//! ```text
//! # comment
//! goal G1: "Plant stays safe"
//! solution E1: "Test report"
//! G1 -> E1
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Goal,
    Strategy,
    Solution,
    Context,
    Assumption,
}

impl NodeKind {
    pub const ALL: [NodeKind; 5] = [
        NodeKind::Goal,
        NodeKind::Strategy,
        NodeKind::Solution,
        NodeKind::Context,
        NodeKind::Assumption,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Goal => "goal",
            NodeKind::Strategy => "strategy",
            NodeKind::Solution => "solution",
            NodeKind::Context => "context",
            NodeKind::Assumption => "assumption",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether an edge `self -> child` is allowed.
    pub fn accepts_child(self, child: NodeKind) -> bool {
        match self {
            NodeKind::Goal => true,
            NodeKind::Strategy => matches!(
                child,
                NodeKind::Goal | NodeKind::Context | NodeKind::Assumption
            ),
            NodeKind::Solution | NodeKind::Context | NodeKind::Assumption => false,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentNode {
    pub id: String,
    pub kind: NodeKind,
    pub text: String,
    pub children: Vec<String>,
}

/// Nodes in declaration order plus the id of the root goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argument {
    pub nodes: Vec<ArgumentNode>,
    pub root: String,
}

impl Argument {
    pub fn node(&self, id: &str) -> Option<&ArgumentNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub(crate) fn index(&self) -> HashMap<&str, &ArgumentNode> {
        self.nodes.iter().map(|n| (n.id.as_str(), n)).collect()
    }

    /// Ids reachable from `start` (inclusive), in depth-first preorder.
    pub fn descendants(&self, start: &str) -> Vec<String> {
        let idx = self.index();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut stack = vec![start];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            out.push(id.to_string());
            if let Some(n) = idx.get(id) {
                stack.extend(n.children.iter().rev().map(String::as_str));
            }
        }
        out
    }

    /// First root-to-`target` path found depth-first, as ids.
    pub fn path_to(&self, target: &str) -> Option<Vec<String>> {
        fn walk<'a>(
            idx: &HashMap<&'a str, &'a ArgumentNode>,
            id: &'a str,
            target: &str,
            path: &mut Vec<&'a str>,
        ) -> bool {
            if path.contains(&id) {
                return false;
            }
            path.push(id);
            if id == target {
                return true;
            }
            if let Some(n) = idx.get(id) {
                for c in &n.children {
                    if walk(idx, c, target, path) {
                        return true;
                    }
                }
            }
            path.pop();
            false
        }
        let idx = self.index();
        let mut path = Vec::new();
        walk(&idx, &self.root, target, &mut path)
            .then(|| path.into_iter().map(String::from).collect())
    }
}

pub(crate) fn is_valid_id(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

enum Statement<'a> {
    Node(NodeKind, &'a str, &'a str),
    Edge(&'a str, &'a str),
}

fn parse_line(line: &str) -> std::result::Result<Option<Statement<'_>>, String> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    if let Some(kind) = NodeKind::parse(head) {
        let rest = rest.trim_start();
        if let Some((id, text)) = rest.split_once(':') {
            let id = id.trim_end();
            if !is_valid_id(id) {
                return Err(format!("invalid id '{id}'"));
            }
            let text = text.trim_start();
            if text.len() < 2 || !text.starts_with('"') || !text.ends_with('"') {
                return Err(format!("text of {id} must be enclosed in double quotes"));
            }
            return Ok(Some(Statement::Node(kind, id, &text[1..text.len() - 1])));
        }
    }
    if let Some((a, b)) = line.split_once("->") {
        let (a, b) = (a.trim(), b.trim());
        for id in [a, b] {
            if !is_valid_id(id) {
                return Err(format!("invalid id '{id}' in edge"));
            }
        }
        return Ok(Some(Statement::Edge(a, b)));
    }
    Err(format!("unrecognized statement '{line}'"))
}

pub fn parse_argument(text: &str) -> Result<Argument> {
    let mut nodes: Vec<ArgumentNode> = Vec::new();
    let mut decl_line: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<(usize, String, String)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        match parse_line(raw).map_err(|m| Error::parse(line, m))? {
            None => {}
            Some(Statement::Node(kind, id, text)) => {
                if let Some(first) = decl_line.get(id) {
                    return Err(Error::parse(
                        line,
                        format!("duplicate id '{id}' (first declared on line {first})"),
                    ));
                }
                decl_line.insert(id.to_string(), line);
                nodes.push(ArgumentNode {
                    id: id.to_string(),
                    kind,
                    text: text.to_string(),
                    children: Vec::new(),
                });
            }
            Some(Statement::Edge(a, b)) => edges.push((line, a.to_string(), b.to_string())),
        }
    }

    let pos: HashMap<String, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.clone(), i))
        .collect();
    let mut referenced = HashSet::new();
    for (line, a, b) in edges {
        let pa = *pos
            .get(&a)
            .ok_or_else(|| Error::parse(line, format!("unknown node '{a}'")))?;
        let pb = *pos
            .get(&b)
            .ok_or_else(|| Error::parse(line, format!("unknown node '{b}'")))?;
        let (ka, kb) = (nodes[pa].kind, nodes[pb].kind);
        if !ka.accepts_child(kb) {
            return Err(Error::parse(
                line,
                format!("{ka} {a} cannot support {kb} {b}"),
            ));
        }
        if nodes[pa].children.contains(&b) {
            return Err(Error::parse(line, format!("duplicate edge {a} -> {b}")));
        }
        nodes[pa].children.push(b.clone());
        referenced.insert(b);
    }

    let roots: Vec<&ArgumentNode> = nodes
        .iter()
        .filter(|n| !referenced.contains(&n.id))
        .collect();
    let root = match roots.as_slice() {
        [] => {
            let line = nodes.first().map_or(1, |n| decl_line[&n.id]);
            return Err(Error::parse(
                line,
                "no root goal: every node is referenced by another",
            ));
        }
        [r] => *r,
        [_, second, ..] => {
            let ids: Vec<&str> = roots.iter().map(|n| n.id.as_str()).collect();
            return Err(Error::parse(
                decl_line[&second.id],
                format!("multiple roots: {}", ids.join(", ")),
            ));
        }
    };
    if root.kind != NodeKind::Goal {
        return Err(Error::parse(
            decl_line[&root.id],
            format!("root {} is a {}, expected a goal", root.id, root.kind),
        ));
    }
    let root = root.id.clone();
    Ok(Argument { nodes, root })
}

/// Canonical text form: declarations in order, then edges grouped by parent.
pub fn serialize_argument(arg: &Argument) -> String {
    let mut out = String::new();
    for n in &arg.nodes {
        out.push_str(&format!("{} {}: \"{}\"\n", n.kind, n.id, n.text));
    }
    let has_edges = arg.nodes.iter().any(|n| !n.children.is_empty());
    if has_edges {
        out.push('\n');
    }
    for n in &arg.nodes {
        for c in &n.children {
            out.push_str(&format!("{} -> {}\n", n.id, c));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    /// `w1` undeveloped goal, `w2` unsupported strategy, `e1` cycle, `e2` unreachable node.
    pub code: String,
    pub node: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}[{}] {}", self.code, self.message)
    }
}

/// Structural checks over an argument. An empty list means structurally sound.
pub fn validate_argument(arg: &Argument) -> Vec<Finding> {
    let idx = arg.index();
    let mut findings = Vec::new();
    let finding = |severity, code: &str, node: &str, message: String| Finding {
        severity,
        code: code.to_string(),
        node: node.to_string(),
        message,
    };

    // e1: colour-marking DFS; each back edge reports the node it returns to.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: HashMap<&str, Mark> = HashMap::new();
    let mut cyclic: Vec<&str> = Vec::new();
    for start in &arg.nodes {
        if marks.contains_key(start.id.as_str()) {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(start.id.as_str(), 0)];
        marks.insert(&start.id, Mark::Open);
        while let Some((id, next)) = stack.last_mut() {
            let children = idx.get(*id).map_or(&[][..], |n| n.children.as_slice());
            if let Some(c) = children.get(*next) {
                *next += 1;
                match marks.get(c.as_str()) {
                    None => {
                        marks.insert(c, Mark::Open);
                        stack.push((c, 0));
                    }
                    Some(Mark::Open) => {
                        if !cyclic.contains(&c.as_str()) {
                            cyclic.push(c);
                        }
                    }
                    Some(Mark::Done) => {}
                }
            } else {
                marks.insert(id, Mark::Done);
                stack.pop();
            }
        }
    }
    for id in &cyclic {
        findings.push(finding(
            Severity::Error,
            "e1",
            id,
            format!("cycle through {id}"),
        ));
    }

    // e2
    let reachable: HashSet<String> = arg.descendants(&arg.root).into_iter().collect();
    for n in &arg.nodes {
        if !reachable.contains(&n.id) {
            findings.push(finding(
                Severity::Warning,
                "e2",
                &n.id,
                format!("unreachable node {} from root {}", n.id, arg.root),
            ));
        }
    }

    for n in &arg.nodes {
        match n.kind {
            NodeKind::Goal => {
                let developed = arg.descendants(&n.id).iter().skip(1).any(|d| {
                    idx.get(d.as_str())
                        .is_some_and(|m| matches!(m.kind, NodeKind::Strategy | NodeKind::Solution))
                });
                if !developed {
                    findings.push(finding(
                        Severity::Warning,
                        "w1",
                        &n.id,
                        format!("undeveloped goal {}", n.id),
                    ));
                }
            }
            NodeKind::Strategy => {
                let has_goal = n.children.iter().any(|c| {
                    idx.get(c.as_str())
                        .is_some_and(|m| m.kind == NodeKind::Goal)
                });
                if !has_goal {
                    findings.push(finding(
                        Severity::Warning,
                        "w2",
                        &n.id,
                        format!("unsupported strategy {}", n.id),
                    ));
                }
            }
            _ => {}
        }
    }
    findings
}
