//! Bottom-up translation planning.
//!
//! Components are ordered on the component graph, classes within each
//! component on the intra-component class edges, and methods within each
//! class on the intra-class call edges. At every level the order is
//! dependency-first: strongly connected components are condensed, ready
//! condensation nodes are taken by ascending dependency degree then name,
//! and members of one SCC are emitted in name order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::{DependencyGraph, Granularity};

/// Number of distinct same-granularity targets each node depends on.
pub fn compute_degrees(graph: &DependencyGraph) -> BTreeMap<String, usize> {
    let mut targets: BTreeMap<&str, BTreeSet<&str>> =
        graph.nodes.iter().map(|n| (n.as_str(), BTreeSet::new())).collect();
    for e in &graph.edges {
        if e.from != e.to {
            targets.entry(&e.from).or_default().insert(&e.to);
        }
    }
    targets.into_iter().map(|(n, t)| (n.to_string(), t.len())).collect()
}

/// Strongly connected components (Tarjan), each sorted by name, listed in
/// reverse topological order of the condensation (sinks first).
pub fn strongly_connected_components(graph: &DependencyGraph) -> Vec<Vec<String>> {
    let names: Vec<&str> = graph.nodes.iter().map(String::as_str).collect();
    let index_of: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); names.len()];
    for e in &graph.edges {
        if let (Some(&a), Some(&b)) = (index_of.get(e.from.as_str()), index_of.get(e.to.as_str())) {
            if !adj[a].contains(&b) {
                adj[a].push(b);
            }
        }
    }

    const UNVISITED: usize = usize::MAX;
    let n = names.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        // (node, next child position)
        let mut work = vec![(root, 0usize)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = work.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                while let Some(w) = stack.pop() {
                    on_stack[w] = false;
                    comp.push(names[w].to_string());
                    if w == v {
                        break;
                    }
                }
                comp.sort();
                out.push(comp);
            }
        }
    }
    out
}

/// Dependency-first total order over the nodes of one graph.
pub fn order_items(graph: &DependencyGraph) -> Vec<String> {
    let sccs = strongly_connected_components(graph);
    let mut scc_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, comp) in sccs.iter().enumerate() {
        for m in comp {
            scc_of.insert(m, i);
        }
    }

    // dependencies of each SCC outside itself, as SCC ids and as nodes
    let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); sccs.len()];
    let mut dep_nodes: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); sccs.len()];
    let mut dependents: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); sccs.len()];
    for e in &graph.edges {
        let (Some(&a), Some(&b)) = (scc_of.get(e.from.as_str()), scc_of.get(e.to.as_str())) else {
            continue;
        };
        if a != b {
            deps[a].insert(b);
            dep_nodes[a].insert(&e.to);
            dependents[b].insert(a);
        }
    }

    let key = |i: usize| Reverse((dep_nodes[i].len(), sccs[i][0].clone(), i));
    let mut pending: Vec<usize> = deps.iter().map(BTreeSet::len).collect();
    let mut ready: BinaryHeap<_> = (0..sccs.len()).filter(|&i| pending[i] == 0).map(key).collect();
    let mut order = Vec::with_capacity(graph.nodes.len());
    while let Some(Reverse((_, _, i))) = ready.pop() {
        order.extend(sccs[i].iter().cloned());
        for &d in &dependents[i] {
            pending[d] -= 1;
            if pending[d] == 0 {
                ready.push(key(d));
            }
        }
    }
    order
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassPlan {
    pub name: String,
    pub methods: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentPlan {
    pub name: String,
    pub classes: Vec<ClassPlan>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationPlan {
    pub components: Vec<ComponentPlan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitLevel {
    Method,
    Class,
    Component,
    Project,
}

impl UnitLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitLevel::Method => "method",
            UnitLevel::Class => "class",
            UnitLevel::Component => "component",
            UnitLevel::Project => "project",
        }
    }
}

/// One work item of the plan in execution order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanUnit {
    pub seq: usize,
    pub level: UnitLevel,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<String>,
}

/// Id of the single project-level unit that closes every plan.
pub const PROJECT_UNIT: &str = "project";

impl TranslationPlan {
    pub fn classes(&self) -> impl Iterator<Item = &ClassPlan> {
        self.components.iter().flat_map(|c| c.classes.iter())
    }

    pub fn methods(&self) -> impl Iterator<Item = &str> {
        self.classes().flat_map(|c| c.methods.iter().map(String::as_str))
    }

    /// Execution order: each class's methods, then the class; each
    /// component after its classes; the project unit last.
    pub fn units(&self) -> Vec<PlanUnit> {
        let mut units = Vec::new();
        let mut push = |level, id: &str, class: Option<&str>, component: Option<&str>| {
            units.push(PlanUnit {
                seq: units.len(),
                level,
                id: id.to_string(),
                class: class.map(str::to_string),
                component: component.map(str::to_string),
            });
        };
        for comp in &self.components {
            for class in &comp.classes {
                for m in &class.methods {
                    push(UnitLevel::Method, m, Some(&class.name), Some(&comp.name));
                }
                push(UnitLevel::Class, &class.name, None, Some(&comp.name));
            }
            push(UnitLevel::Component, &comp.name, None, None);
        }
        push(UnitLevel::Project, PROJECT_UNIT, None, None);
        units
    }

    pub fn to_jsonl(&self) -> String {
        self.units()
            .iter()
            .map(|u| serde_json::to_string(u).expect("plan units serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut plan = TranslationPlan::default();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let unit: PlanUnit =
                serde_json::from_str(line).map_err(|e| Error::json(format!("plan line {}", i + 1), e))?;
            match unit.level {
                UnitLevel::Method => {
                    let class = unit.class.ok_or_else(|| Error::Integrity(format!("plan line {} lacks class", i + 1)))?;
                    let comp = unit.component.unwrap_or_default();
                    let cp = plan.component_mut(&comp);
                    match cp.classes.last_mut() {
                        Some(c) if c.name == class => c.methods.push(unit.id),
                        _ => cp.classes.push(ClassPlan {
                            name: class,
                            methods: vec![unit.id],
                        }),
                    }
                }
                UnitLevel::Class => {
                    let cp = plan.component_mut(&unit.component.unwrap_or_default());
                    if cp.classes.last().map(|c| c.name.as_str()) != Some(unit.id.as_str()) {
                        cp.classes.push(ClassPlan {
                            name: unit.id,
                            methods: Vec::new(),
                        });
                    }
                }
                UnitLevel::Component => {
                    plan.component_mut(&unit.id);
                }
                UnitLevel::Project => {}
            }
        }
        Ok(plan)
    }

    fn component_mut(&mut self, name: &str) -> &mut ComponentPlan {
        if self.components.last().map(|c| c.name.as_str()) != Some(name) {
            self.components.push(ComponentPlan {
                name: name.to_string(),
                classes: Vec::new(),
            });
        }
        self.components.last_mut().expect("just pushed")
    }
}

/// Builds the component -> class -> method plan from the three graphs of one
/// snapshot.
pub fn build_plan(
    method_graph: &DependencyGraph,
    class_graph: &DependencyGraph,
    component_graph: &DependencyGraph,
) -> Result<TranslationPlan> {
    for (g, want) in [
        (method_graph, Granularity::Method),
        (class_graph, Granularity::Class),
        (component_graph, Granularity::Component),
    ] {
        if g.granularity != want {
            return Err(Error::Argument(format!(
                "expected a {want:?} graph, got {:?}",
                g.granularity
            )));
        }
    }

    let mut classes_of: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for class in &class_graph.nodes {
        let comp = class_graph
            .owners
            .get(class)
            .ok_or_else(|| Error::Integrity(format!("class {class} has no component")))?;
        if !component_graph.nodes.contains(comp) {
            return Err(Error::Integrity(format!(
                "class {class} rolls up to unknown component {comp}"
            )));
        }
        classes_of.entry(comp).or_default().insert(class.clone());
    }
    let mut methods_of: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for method in &method_graph.nodes {
        let class = method_graph
            .owners
            .get(method)
            .ok_or_else(|| Error::Integrity(format!("method {method} has no owning class")))?;
        if !class_graph.nodes.contains(class) {
            return Err(Error::Integrity(format!(
                "method {method} rolls up to unknown class {class}"
            )));
        }
        methods_of.entry(class).or_default().insert(method.clone());
    }

    let empty = BTreeSet::new();
    let mut plan = TranslationPlan::default();
    for comp in order_items(component_graph) {
        let members = classes_of.get(comp.as_str()).unwrap_or(&empty);
        let classes = order_items(&class_graph.induced(members))
            .into_iter()
            .map(|class| {
                let methods = methods_of.get(class.as_str()).unwrap_or(&empty);
                ClassPlan {
                    methods: order_items(&method_graph.induced(methods)),
                    name: class,
                }
            })
            .collect();
        plan.components.push(ComponentPlan { name: comp, classes });
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::EdgeKind;
    use proptest::prelude::*;

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> DependencyGraph {
        DependencyGraph::from_edges(
            Granularity::Class,
            nodes.iter().copied(),
            edges.iter().map(|(a, b)| (*a, *b, EdgeKind::Call)),
        )
    }

    #[test]
    fn degrees_count_distinct_targets() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("A", "C")]);
        let d = compute_degrees(&g);
        assert_eq!((d["A"], d["B"], d["C"]), (2, 0, 0));
    }

    #[test]
    fn parallel_edges_of_different_kinds_count_once() {
        let g = DependencyGraph::from_edges(
            Granularity::Class,
            ["A", "B"],
            [("A", "B", EdgeKind::Call), ("A", "B", EdgeKind::FieldType)],
        );
        assert_eq!(g.edges.len(), 2);
        assert_eq!(compute_degrees(&g)["A"], 1);
    }

    #[test]
    fn chain_orders_leaves_first() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")]);
        assert_eq!(order_items(&g), ["C", "B", "A"]);
    }

    #[test]
    fn independent_items_are_lexicographic() {
        let g = graph(&["C", "A", "B"], &[]);
        assert_eq!(order_items(&g), ["A", "B", "C"]);
    }

    #[test]
    fn cycle_is_condensed() {
        // SCC oracle: {A, B} is the only non-trivial component; C is a sink.
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "A"), ("A", "C")]);
        assert_eq!(order_items(&g), ["C", "A", "B"]);
    }

    #[test]
    fn lower_degree_wins_among_ready_items() {
        // Z and Y are both ready after their deps; Y depends on two items.
        let g = graph(&["P", "Q", "Y", "Z"], &[("Y", "P"), ("Y", "Q"), ("Z", "P")]);
        assert_eq!(order_items(&g), ["P", "Q", "Z", "Y"]);
    }

    #[test]
    fn sccs_in_sink_first_order() {
        let g = graph(&["A", "B", "C", "D"], &[("A", "B"), ("B", "A"), ("B", "C"), ("C", "D"), ("D", "C")]);
        let sccs = strongly_connected_components(&g);
        assert_eq!(sccs, vec![vec!["C".to_string(), "D".to_string()], vec!["A".to_string(), "B".to_string()]]);
    }

    fn three_level() -> (DependencyGraph, DependencyGraph, DependencyGraph) {
        let mut methods = DependencyGraph::from_edges(
            Granularity::Method,
            ["a.X#f", "a.X#g", "a.Y#h", "b.Z#k"],
            [("a.X#f", "a.X#g", EdgeKind::Call), ("a.X#g", "a.Y#h", EdgeKind::Call), ("a.Y#h", "b.Z#k", EdgeKind::Call)],
        );
        for (m, c) in [("a.X#f", "a.X"), ("a.X#g", "a.X"), ("a.Y#h", "a.Y"), ("b.Z#k", "b.Z")] {
            methods.owners.insert(m.into(), c.into());
        }
        let mut classes = DependencyGraph::from_edges(
            Granularity::Class,
            ["a.X", "a.Y", "b.Z"],
            [("a.X", "a.Y", EdgeKind::Call), ("a.Y", "b.Z", EdgeKind::Call)],
        );
        for (c, p) in [("a.X", "a"), ("a.Y", "a"), ("b.Z", "b")] {
            classes.owners.insert(c.into(), p.into());
        }
        let comps = DependencyGraph::from_edges(Granularity::Component, ["a", "b"], [("a", "b", EdgeKind::Call)]);
        (methods, classes, comps)
    }

    #[test]
    fn plan_nests_components_classes_methods() {
        let (m, c, p) = three_level();
        let plan = build_plan(&m, &c, &p).unwrap();
        let comps: Vec<_> = plan.components.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(comps, ["b", "a"]);
        let classes: Vec<_> = plan.classes().map(|c| c.name.as_str()).collect();
        assert_eq!(classes, ["b.Z", "a.Y", "a.X"]);
        let methods: Vec<_> = plan.methods().collect();
        assert_eq!(methods, ["b.Z#k", "a.Y#h", "a.X#g", "a.X#f"]);
        assert_eq!(plan.units().len(), 4 + 3 + 2 + 1);
    }

    #[test]
    fn inconsistent_rollup_is_integrity_error() {
        let (mut m, c, p) = three_level();
        m.owners.insert("a.X#f".into(), "a.Missing".into());
        assert!(matches!(build_plan(&m, &c, &p), Err(Error::Integrity(_))));
    }

    #[test]
    fn plan_jsonl_round_trips() {
        let (m, c, p) = three_level();
        let plan = build_plan(&m, &c, &p).unwrap();
        let text = plan.to_jsonl();
        assert!(text.lines().next().unwrap().contains("\"level\":\"method\""));
        assert_eq!(TranslationPlan::from_jsonl(&text).unwrap(), plan);
    }

    /// Independent recount straight from the edge list.
    fn brute_degrees(nodes: &[String], edges: &[(usize, usize)]) -> Vec<usize> {
        (0..nodes.len())
            .map(|i| {
                let mut seen = vec![false; nodes.len()];
                for &(a, b) in edges {
                    if a == i && b != i {
                        seen[b] = true;
                    }
                }
                seen.iter().filter(|s| **s).count()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn degrees_match_recount(edges in proptest::collection::vec((0usize..6, 0usize..6), 0..20)) {
            let nodes: Vec<String> = (0..6).map(|i| format!("N{i}")).collect();
            let g = DependencyGraph::from_edges(
                Granularity::Class,
                nodes.iter().map(String::as_str),
                edges.iter().map(|&(a, b)| (nodes[a].as_str(), nodes[b].as_str(), EdgeKind::Call)),
            );
            let d = compute_degrees(&g);
            let expect = brute_degrees(&nodes, &edges);
            for (i, n) in nodes.iter().enumerate() {
                prop_assert_eq!(d[n], expect[i]);
            }
        }

        #[test]
        fn plan_is_deterministic_and_complete(edges in proptest::collection::vec((0usize..8, 0usize..8), 0..24)) {
            let nodes: Vec<String> = (0..8).map(|i| format!("K{i}")).collect();
            let g = DependencyGraph::from_edges(
                Granularity::Class,
                nodes.iter().map(String::as_str),
                edges.iter().map(|&(a, b)| (nodes[a].as_str(), nodes[b].as_str(), EdgeKind::Call)),
            );
            let first = order_items(&g);
            prop_assert_eq!(&first, &order_items(&g.clone()));
            let mut sorted = first.clone();
            sorted.sort();
            prop_assert_eq!(sorted, nodes);
        }
    }
}
