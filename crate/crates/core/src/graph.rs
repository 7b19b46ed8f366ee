//! Project index, call resolution, and the call graph with its visiting
//! schedule.
//!
//! Only project-internal calls become edges. Cycles are kept finite by
//! marking back edges during a DFS over every node (lexicographic start
//! order); the schedule is the post-order of the graph without them, so
//! every callee is visited before its callers.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::java::{CallSite, Diagnostic, MethodDecl, MethodId, Project};

pub const DEFAULT_DEPTH_CAP: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown method {0}")]
    UnknownMethod(MethodId),
}

#[derive(Debug, Clone, Default)]
pub struct ProjectIndex {
    pub methods: BTreeMap<MethodId, MethodDecl>,
    pub by_name_arity: BTreeMap<(String, usize), BTreeSet<MethodId>>,
    pub by_class: BTreeMap<String, BTreeSet<MethodId>>,
    /// Call sites of indexed methods, in file then source order.
    pub calls: Vec<CallSite>,
    /// Simple class name to fully-qualified names.
    classes_by_simple: BTreeMap<String, BTreeSet<String>>,
    pub diagnostics: Vec<Diagnostic>,
}

impl ProjectIndex {
    pub fn get(&self, id: &MethodId) -> Option<&MethodDecl> {
        self.methods.get(id)
    }

    pub fn len(&self) -> usize {
        self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.methods.is_empty()
    }

    /// Project classes a receiver expression may name: a simple name,
    /// a nested `Outer.Inner` suffix, or a fully-qualified name.
    fn classes_named(&self, hint: &str) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = BTreeSet::new();
        if let Some(fqns) = self.classes_by_simple.get(hint) {
            out.extend(fqns.iter().map(String::as_str));
        }
        if let Some((fqn, _)) = self.by_class.get_key_value(hint) {
            out.insert(fqn.as_str());
        }
        out
    }
}

/// Indexes every parsed method. When the same id is declared twice the later
/// declaration wins and its predecessor's call sites are dropped.
pub fn build_index(project: &Project) -> ProjectIndex {
    let mut index = ProjectIndex::default();
    for parsed in &project.parsed {
        for m in &parsed.methods {
            if let Some(prev) = index.methods.insert(m.id.clone(), m.clone()) {
                index.diagnostics.push(Diagnostic {
                    path: m.file.clone(),
                    line: m.line,
                    message: format!(
                        "duplicate method id {} (also declared at {}:{}); keeping this declaration",
                        m.id, prev.file, prev.line
                    ),
                });
            }
        }
    }
    for parsed in &project.parsed {
        for call in &parsed.calls {
            let Some(owner) = index.methods.get(&call.caller) else { continue };
            let same_file = parsed.methods.iter().any(|m| m.file == owner.file);
            if same_file
                && owner.body_span.start <= call.span.start
                && call.span.end <= owner.body_span.end
            {
                index.calls.push(call.clone());
            }
        }
    }
    for (id, m) in &index.methods {
        index.by_name_arity.entry((m.name.clone(), m.arity)).or_default().insert(id.clone());
        index.by_class.entry(m.class_fqn.clone()).or_default().insert(id.clone());
    }
    for m in index.methods.values() {
        let relative = m
            .class_fqn
            .strip_prefix(m.package.as_str())
            .and_then(|r| r.strip_prefix('.'))
            .unwrap_or(&m.class_fqn);
        // `Outer.Inner` is reachable as both `Inner` and `Outer.Inner`.
        let parts: Vec<&str> = relative.split('.').collect();
        for k in 0..parts.len() {
            index.classes_by_simple.entry(parts[k..].join(".")).or_default().insert(m.class_fqn.clone());
        }
    }
    index
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "target", rename_all = "snake_case")]
pub enum Resolution {
    Internal(MethodId),
    External,
    Ambiguous(Vec<MethodId>),
}

/// Capitalized identifiers with at least one lowercase letter are read as
/// type names (`Collections`, `StringUtils`); all-caps names are constants.
fn looks_like_type(hint: &str) -> bool {
    hint.chars().next().is_some_and(char::is_uppercase) && hint.chars().any(char::is_lowercase)
}

pub fn resolve_call(site: &CallSite, index: &ProjectIndex) -> Resolution {
    let Some(named) = index.by_name_arity.get(&(site.callee_name.clone(), site.callee_arity)) else {
        return Resolution::External;
    };
    let mut candidates: Vec<&MethodId> = named.iter().collect();

    if let Some(hint) = site.receiver_hint.as_deref().filter(|h| *h != "this" && *h != "super") {
        let classes = index.classes_named(hint);
        if !classes.is_empty() {
            candidates.retain(|id| classes.contains(id.class_fqn()));
        } else if looks_like_type(hint) {
            return Resolution::External;
        }
    }

    let caller = index.get(&site.caller);
    let unique = |filter: &dyn Fn(&MethodDecl) -> bool| -> Option<MethodId> {
        let hits: Vec<&&MethodId> =
            candidates.iter().filter(|id| index.get(id).is_some_and(filter)).collect();
        (hits.len() == 1).then(|| (*hits[0]).clone())
    };
    if let Some(caller) = caller {
        if let Some(id) = unique(&|m| m.class_fqn == caller.class_fqn) {
            return Resolution::Internal(id);
        }
        if let Some(id) = unique(&|m| m.package == caller.package) {
            return Resolution::Internal(id);
        }
    }
    match candidates.len() {
        0 => Resolution::External,
        1 => Resolution::Internal(candidates[0].clone()),
        _ => Resolution::Ambiguous(candidates.into_iter().cloned().collect()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallGraph {
    pub nodes: BTreeSet<MethodId>,
    /// Callees per caller, ordered by first call site.
    pub edges: BTreeMap<MethodId, Vec<MethodId>>,
    pub back_edges: BTreeSet<(MethodId, MethodId)>,
}

impl CallGraph {
    /// Graph over explicit edges, in the given order. Repeated edges are
    /// dropped and back edges are computed.
    pub fn from_edges(
        nodes: impl IntoIterator<Item = MethodId>,
        edges: impl IntoIterator<Item = (MethodId, MethodId)>,
    ) -> Self {
        let mut g = CallGraph { nodes: nodes.into_iter().collect(), ..Default::default() };
        for (a, b) in edges {
            g.nodes.insert(a.clone());
            g.nodes.insert(b.clone());
            let list = g.edges.entry(a).or_default();
            if !list.contains(&b) {
                list.push(b);
            }
        }
        g.back_edges = find_back_edges(&g);
        g
    }

    pub fn callees(&self, id: &MethodId) -> &[MethodId] {
        self.edges.get(id).map_or(&[], Vec::as_slice)
    }

    pub fn is_back_edge(&self, caller: &MethodId, callee: &MethodId) -> bool {
        self.back_edges.contains(&(caller.clone(), callee.clone()))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    /// Callees reached through edges that are not back edges.
    pub fn forward_callees<'a>(&'a self, id: &'a MethodId) -> impl Iterator<Item = &'a MethodId> + 'a {
        self.callees(id).iter().filter(move |c| !self.is_back_edge(id, c))
    }
}

/// Builds the graph from resolved call sites. Only `Internal` resolutions
/// produce edges; repeated caller→callee pairs keep their first site.
pub fn build_call_graph<'a>(
    index: &ProjectIndex,
    resolutions: impl IntoIterator<Item = (&'a CallSite, &'a Resolution)>,
) -> CallGraph {
    let mut graph = CallGraph { nodes: index.methods.keys().cloned().collect(), ..Default::default() };
    let mut firsts: BTreeMap<MethodId, Vec<(usize, MethodId)>> = BTreeMap::new();
    for (site, resolution) in resolutions {
        let Resolution::Internal(callee) = resolution else { continue };
        if !graph.nodes.contains(&site.caller) || !graph.nodes.contains(callee) {
            continue;
        }
        let list = firsts.entry(site.caller.clone()).or_default();
        match list.iter_mut().find(|(_, c)| c == callee) {
            Some(entry) => entry.0 = entry.0.min(site.span.start),
            None => list.push((site.span.start, callee.clone())),
        }
    }
    for (caller, mut list) in firsts {
        list.sort();
        graph.edges.insert(caller, list.into_iter().map(|(_, c)| c).collect());
    }
    graph.back_edges = find_back_edges(&graph);
    graph
}

/// Resolves every indexed call site and builds the graph.
pub fn graph_from_index(index: &ProjectIndex) -> (CallGraph, Vec<(CallSite, Resolution)>) {
    let resolved: Vec<(CallSite, Resolution)> =
        index.calls.iter().map(|c| (c.clone(), resolve_call(c, index))).collect();
    let graph = build_call_graph(index, resolved.iter().map(|(c, r)| (c, r)));
    (graph, resolved)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Color {
    White,
    Gray,
    Black,
}

fn find_back_edges(graph: &CallGraph) -> BTreeSet<(MethodId, MethodId)> {
    let mut color: BTreeMap<&MethodId, Color> = graph.nodes.iter().map(|n| (n, Color::White)).collect();
    let mut back = BTreeSet::new();
    for start in &graph.nodes {
        if color[start] != Color::White {
            continue;
        }
        // (node, next child index)
        let mut stack: Vec<(&MethodId, usize)> = vec![(start, 0)];
        color.insert(start, Color::Gray);
        while let Some((node, next)) = stack.last_mut() {
            let node: &MethodId = node;
            let callees = graph.callees(node);
            if *next == callees.len() {
                color.insert(node, Color::Black);
                stack.pop();
                continue;
            }
            let child = &callees[*next];
            *next += 1;
            match color[child] {
                Color::White => {
                    color.insert(child, Color::Gray);
                    stack.push((child, 0));
                }
                Color::Gray => {
                    back.insert((node.clone(), child.clone()));
                }
                Color::Black => {}
            }
        }
    }
    back
}

/// Visiting order for one request: callees strictly before callers, root last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub root: MethodId,
    pub order: Vec<MethodId>,
    /// Minimum depth from the root over forward edges.
    pub depth: BTreeMap<MethodId, usize>,
    /// Callees of scheduled methods left out by the depth cap.
    pub truncated: BTreeSet<MethodId>,
}

impl Schedule {
    pub fn contains(&self, id: &MethodId) -> bool {
        self.depth.contains_key(id)
    }

    /// Scheduled methods other than the root, in visiting order.
    pub fn descendants(&self) -> impl Iterator<Item = &MethodId> {
        self.order.iter().filter(move |id| **id != self.root)
    }
}

/// One direct-callee context reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContextRef {
    /// Summarized callee.
    Summary(MethodId),
    /// Back edge or depth-capped callee: rendered from its signature only.
    Stub(MethodId),
}

impl ContextRef {
    pub fn id(&self) -> &MethodId {
        match self {
            ContextRef::Summary(id) | ContextRef::Stub(id) => id,
        }
    }
}

/// Post-order DFS from `root` over forward edges, children in call-site
/// order. Nodes deeper than `depth_cap` are left out.
pub fn dfs_schedule(graph: &CallGraph, root: &MethodId, depth_cap: usize) -> Result<Schedule, GraphError> {
    if !graph.nodes.contains(root) {
        return Err(GraphError::UnknownMethod(root.clone()));
    }

    let mut depth: BTreeMap<MethodId, usize> = BTreeMap::new();
    let mut truncated = BTreeSet::new();
    let mut queue = VecDeque::from([(root.clone(), 0usize)]);
    depth.insert(root.clone(), 0);
    while let Some((node, d)) = queue.pop_front() {
        for child in graph.forward_callees(&node) {
            if depth.contains_key(child) {
                continue;
            }
            if d + 1 > depth_cap {
                truncated.insert(child.clone());
                continue;
            }
            depth.insert(child.clone(), d + 1);
            queue.push_back((child.clone(), d + 1));
        }
    }
    truncated.retain(|id| !depth.contains_key(id));

    let mut order = Vec::with_capacity(depth.len());
    let mut seen: BTreeSet<&MethodId> = BTreeSet::new();
    let mut stack: Vec<(&MethodId, usize)> = vec![(root, 0)];
    seen.insert(root);
    while let Some((node, next)) = stack.last_mut() {
        let node: &MethodId = node;
        let callees = graph.callees(node);
        if *next == callees.len() {
            order.push(node.clone());
            stack.pop();
            continue;
        }
        let child = &callees[*next];
        *next += 1;
        if graph.is_back_edge(node, child) || !depth.contains_key(child) || !seen.insert(child) {
            continue;
        }
        stack.push((child, 0));
    }

    Ok(Schedule { root: root.clone(), order, depth, truncated })
}

/// Direct internal callees of `id`, each marked as summarized or stubbed for
/// this schedule.
pub fn direct_context(graph: &CallGraph, schedule: &Schedule, id: &MethodId) -> Vec<ContextRef> {
    graph
        .callees(id)
        .iter()
        .map(|callee| {
            if graph.is_back_edge(id, callee) || !schedule.contains(callee) || callee == &schedule.root {
                ContextRef::Stub(callee.clone())
            } else {
                ContextRef::Summary(callee.clone())
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: MethodId,
    pub depth: usize,
}

/// Rooted subgraph document served by `smartdoc graph` and the HTTP API.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootedGraph {
    pub root: MethodId,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(MethodId, MethodId)>,
    pub back_edges: Vec<(MethodId, MethodId)>,
    pub schedule: Vec<MethodId>,
}

pub fn rooted_graph(graph: &CallGraph, root: &MethodId, depth_cap: usize) -> Result<RootedGraph, GraphError> {
    let schedule = dfs_schedule(graph, root, depth_cap)?;
    let nodes = schedule
        .order
        .iter()
        .map(|id| GraphNode { id: id.clone(), depth: schedule.depth[id] })
        .collect();
    let mut edges = Vec::new();
    let mut back_edges = Vec::new();
    for caller in &schedule.order {
        for callee in graph.callees(caller) {
            if !schedule.contains(callee) {
                continue;
            }
            edges.push((caller.clone(), callee.clone()));
            if graph.is_back_edge(caller, callee) {
                back_edges.push((caller.clone(), callee.clone()));
            }
        }
    }
    Ok(RootedGraph { root: root.clone(), nodes, edges, back_edges, schedule: schedule.order })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> MethodId {
        format!("p.C#{s}/0").parse().unwrap()
    }

    fn graph(edges: &[(&str, &str)], nodes: &[&str]) -> CallGraph {
        let mut g = CallGraph::default();
        for n in nodes {
            g.nodes.insert(id(n));
        }
        for (a, b) in edges {
            g.nodes.insert(id(a));
            g.nodes.insert(id(b));
            g.edges.entry(id(a)).or_default().push(id(b));
        }
        g.back_edges = find_back_edges(&g);
        g
    }

    fn names(ids: &[MethodId]) -> Vec<&str> {
        ids.iter().map(|i| i.name()).collect()
    }

    #[test]
    fn tree_has_no_back_edges() {
        let g = graph(&[("A", "B"), ("A", "C"), ("B", "D")], &[]);
        assert_eq!(g.nodes.len(), 4);
        assert_eq!(g.edge_count(), 3);
        assert!(g.back_edges.is_empty());
    }

    #[test]
    fn two_cycle_marks_second_edge() {
        let g = graph(&[("A", "B"), ("B", "A")], &[]);
        assert_eq!(g.back_edges, BTreeSet::from([(id("B"), id("A"))]));
    }

    #[test]
    fn self_recursion_is_a_back_edge() {
        let g = graph(&[("A", "A")], &[]);
        assert_eq!(g.back_edges.len(), 1);
        let s = dfs_schedule(&g, &id("A"), 5).unwrap();
        assert_eq!(names(&s.order), ["A"]);
    }

    #[test]
    fn leaf_schedule() {
        let g = graph(&[], &["A"]);
        assert_eq!(names(&dfs_schedule(&g, &id("A"), 5).unwrap().order), ["A"]);
    }

    #[test]
    fn post_order_schedule() {
        let g = graph(&[("A", "B"), ("A", "C"), ("B", "D")], &[]);
        let s = dfs_schedule(&g, &id("A"), 5).unwrap();
        assert_eq!(names(&s.order), ["D", "B", "C", "A"]);
        assert_eq!(s.depth[&id("D")], 2);
    }

    #[test]
    fn back_edge_truncation() {
        let g = graph(&[("A", "B"), ("B", "A")], &[]);
        let s = dfs_schedule(&g, &id("A"), 5).unwrap();
        assert_eq!(names(&s.order), ["B", "A"]);
        assert_eq!(direct_context(&g, &s, &id("B")), [ContextRef::Stub(id("A"))]);
    }

    #[test]
    fn shared_callee_emitted_once() {
        let g = graph(&[("A", "B"), ("A", "C"), ("B", "S"), ("C", "S")], &[]);
        let s = dfs_schedule(&g, &id("A"), 5).unwrap();
        assert_eq!(names(&s.order), ["S", "B", "C", "A"]);
    }

    #[test]
    fn depth_cap_turns_deep_callees_into_stubs() {
        let g = graph(&[("A", "B"), ("B", "C"), ("C", "D")], &[]);
        let s = dfs_schedule(&g, &id("A"), 2).unwrap();
        assert_eq!(names(&s.order), ["C", "B", "A"]);
        assert_eq!(s.truncated, BTreeSet::from([id("D")]));
        assert_eq!(direct_context(&g, &s, &id("C")), [ContextRef::Stub(id("D"))]);
    }

    #[test]
    fn depth_uses_shortest_path() {
        // D is 3 deep via B→C→D but 1 deep via the direct edge.
        let g = graph(&[("A", "B"), ("A", "D"), ("B", "C"), ("C", "D")], &[]);
        let s = dfs_schedule(&g, &id("A"), 2).unwrap();
        assert_eq!(names(&s.order), ["D", "C", "B", "A"]);
        assert!(s.truncated.is_empty());
    }

    #[test]
    fn unknown_root() {
        let g = graph(&[], &["A"]);
        assert_eq!(dfs_schedule(&g, &id("Z"), 5), Err(GraphError::UnknownMethod(id("Z"))));
    }

    #[test]
    fn rooted_graph_document() {
        let g = graph(&[("A", "B"), ("B", "A"), ("X", "A")], &[]);
        let doc = rooted_graph(&g, &id("A"), 5).unwrap();
        let json = serde_json::to_value(&doc).unwrap();
        assert_eq!(json["root"], "p.C#A/0");
        assert_eq!(json["schedule"], serde_json::json!(["p.C#B/0", "p.C#A/0"]));
        assert_eq!(json["edges"].as_array().unwrap().len(), 2);
        assert_eq!(json["back_edges"], serde_json::json!([["p.C#B/0", "p.C#A/0"]]));
        assert_eq!(json["nodes"][0], serde_json::json!({"id": "p.C#B/0", "depth": 1}));
    }
}
