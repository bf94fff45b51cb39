//! Stacking-order analysis and minimum composition layering.
//!
//! Overlapping element pairs are ordered by DOM ancestry, numeric `z-index`,
//! area (larger below) and finally document order (later above). The ordered
//! pairs form a DAG whose longest-path layering, computed with Kahn's
//! algorithm, uses the fewest layers such that no layer holds two overlapping
//! elements and every upper element sits in a higher layer than the element it
//! covers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{is_xpath_ancestor, ElementBitmap, ElementId, ElementMeta, Scene, SceneElement, ValidationReport};
use crate::raster::Rect;

/// The pixel footprint of an element used for overlap tests.
#[derive(Debug, Clone, Copy)]
pub enum Support<'a> {
    /// Pixels with `A > 0` of a recovered bitmap.
    Bitmap(&'a ElementBitmap),
    /// Whole rectangle, used before bitmaps exist.
    Rect(Rect),
}

impl Support<'_> {
    fn extent(&self) -> Rect {
        match self {
            Support::Bitmap(b) => b.extent(),
            Support::Rect(r) => *r,
        }
    }

    fn covers(&self, x: i64, y: i64) -> bool {
        match self {
            Support::Bitmap(b) => b.alpha_at(x, y) > 0.0,
            Support::Rect(r) => r.contains(x, y),
        }
    }
}

/// True iff the two supports share at least one pixel.
pub fn overlap(a: Support<'_>, b: Support<'_>) -> bool {
    let Some(common) = a.extent().intersect(&b.extent()) else {
        return false;
    };
    if let (Support::Rect(_), Support::Rect(_)) = (a, b) {
        return true;
    }
    (common.y as i64..common.bottom())
        .any(|y| (common.x as i64..common.right()).any(|x| a.covers(x, y) && b.covers(x, y)))
}

pub fn elements_overlap(a: &SceneElement, b: &SceneElement) -> bool {
    overlap(Support::Bitmap(&a.bitmap), Support::Bitmap(&b.bitmap))
}

/// Position of the first element relative to the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StackOrder {
    Below,
    Above,
    Tie,
}

/// Which rule decided an edge. Ordered by how readily the edge is dropped
/// when breaking a cycle (earlier variants go first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeSource {
    DocOrder,
    Area,
    ZIndex,
    DomAncestry,
}

/// Orders two elements and reports which rule decided.
pub fn decide_stack_order(ei: &ElementMeta, ej: &ElementMeta) -> (StackOrder, EdgeSource) {
    use StackOrder::*;
    if is_xpath_ancestor(&ei.xpath, &ej.xpath) {
        return (Below, EdgeSource::DomAncestry);
    }
    if is_xpath_ancestor(&ej.xpath, &ei.xpath) {
        return (Above, EdgeSource::DomAncestry);
    }
    if let (Some(zi), Some(zj)) = (ei.z_index.numeric(), ej.z_index.numeric()) {
        if zi != zj {
            return (if zi < zj { Below } else { Above }, EdgeSource::ZIndex);
        }
    }
    let (ai, aj) = (ei.rect.area(), ej.rect.area());
    if ai != aj {
        return (if ai > aj { Below } else { Above }, EdgeSource::Area);
    }
    let order = match ei.doc_order.cmp(&ej.doc_order) {
        std::cmp::Ordering::Less => Below,
        std::cmp::Ordering::Greater => Above,
        std::cmp::Ordering::Equal => Tie,
    };
    (order, EdgeSource::DocOrder)
}

/// Stacking order of `ei` relative to `ej`.
pub fn compare_stack_order(ei: &ElementMeta, ej: &ElementMeta) -> StackOrder {
    decide_stack_order(ei, ej).0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StackEdge {
    pub below: ElementId,
    pub above: ElementId,
    pub source: EdgeSource,
}

impl fmt::Display for StackEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} ({:?})", self.below, self.above, self.source)
    }
}

/// Directed graph from lower to upper element of every overlapping pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackGraph {
    pub vertices: Vec<ElementId>,
    pub edges: Vec<StackEdge>,
    /// Edges deleted to break cycles, in deletion order.
    #[serde(default)]
    pub removed: Vec<StackEdge>,
}

impl StackGraph {
    /// Graph over `vertices` with the given edges, no cycle repair.
    pub fn from_edges(vertices: Vec<ElementId>, edges: Vec<StackEdge>) -> Self {
        StackGraph { vertices, edges, removed: Vec::new() }
    }

    pub fn successors(&self) -> BTreeMap<ElementId, Vec<ElementId>> {
        let mut adj: BTreeMap<ElementId, Vec<ElementId>> =
            self.vertices.iter().map(|&v| (v, Vec::new())).collect();
        for e in &self.edges {
            adj.entry(e.below).or_default().push(e.above);
        }
        for list in adj.values_mut() {
            list.sort_unstable();
        }
        adj
    }

    pub fn isolated(&self) -> Vec<ElementId> {
        let touched: BTreeSet<ElementId> = self.edges.iter().flat_map(|e| [e.below, e.above]).collect();
        self.vertices.iter().copied().filter(|v| !touched.contains(v)).collect()
    }

    /// Returns the edges of some directed cycle, if any.
    pub fn find_cycle(&self) -> Option<Vec<StackEdge>> {
        let adj = self.successors();
        let edge_of: BTreeMap<(ElementId, ElementId), StackEdge> =
            self.edges.iter().map(|e| ((e.below, e.above), *e)).collect();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: BTreeMap<ElementId, u8> = BTreeMap::new();
        for &root in adj.keys() {
            if state.get(&root).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut path: Vec<ElementId> = vec![root];
            let mut cursor: Vec<usize> = vec![0];
            state.insert(root, 1);
            while let Some(&v) = path.last() {
                let i = *cursor.last().unwrap();
                let succ = &adj[&v];
                if i < succ.len() {
                    *cursor.last_mut().unwrap() += 1;
                    let w = succ[i];
                    match state.get(&w).copied().unwrap_or(0) {
                        0 => {
                            state.insert(w, 1);
                            path.push(w);
                            cursor.push(0);
                        }
                        1 => {
                            let start = path.iter().position(|&p| p == w).unwrap();
                            let mut cycle: Vec<StackEdge> =
                                path[start..].windows(2).map(|p| edge_of[&(p[0], p[1])]).collect();
                            cycle.push(edge_of[&(v, w)]);
                            return Some(cycle);
                        }
                        _ => {}
                    }
                } else {
                    state.insert(v, 2);
                    path.pop();
                    cursor.pop();
                }
            }
        }
        None
    }

    /// Deletes edges until the graph is acyclic. On each cycle the edge with
    /// the weakest source goes first; DOM-ancestry edges are never deleted.
    ///
    /// A deleted pair still overlaps, so it is re-inserted oriented along a
    /// topological order of the repaired graph. That keeps the graph acyclic
    /// while every overlapping pair stays constrained to distinct layers.
    pub fn break_cycles(&mut self) {
        let first_new = self.removed.len();
        while let Some(cycle) = self.find_cycle() {
            let Some(victim) = cycle
                .iter()
                .filter(|e| e.source != EdgeSource::DomAncestry)
                .min_by_key(|e| (e.source, e.below, e.above))
                .copied()
            else {
                log::error!("cycle made only of DOM-ancestry edges: {cycle:?}");
                return;
            };
            log::warn!("breaking stacking cycle by deleting edge {victim}");
            self.edges.retain(|e| *e != victim);
            self.removed.push(victim);
        }
        if self.removed.len() == first_new {
            return;
        }
        let position: BTreeMap<ElementId, usize> = self.topological_order().into_iter().enumerate().map(|(i, v)| (v, i)).collect();
        for e in self.removed[first_new..].iter().copied() {
            let edge = if position[&e.below] < position[&e.above] {
                e
            } else {
                StackEdge { below: e.above, above: e.below, source: e.source }
            };
            log::debug!("re-inserting {edge}");
            self.edges.push(edge);
        }
    }

    /// Kahn order with the smallest ready id first. Vertices on a cycle are omitted.
    pub fn topological_order(&self) -> Vec<ElementId> {
        let adj = self.successors();
        let mut indegree: BTreeMap<ElementId, usize> = adj.keys().map(|&v| (v, 0)).collect();
        for e in &self.edges {
            *indegree.entry(e.above).or_default() += 1;
        }
        let mut ready: BTreeSet<ElementId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&v, _)| v).collect();
        let mut order = Vec::with_capacity(indegree.len());
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for w in adj.get(&v).into_iter().flatten() {
                let d = indegree.get_mut(w).expect("edge endpoints are vertices");
                *d -= 1;
                if *d == 0 {
                    ready.insert(*w);
                }
            }
        }
        order
    }
}

/// Builds the stacking DAG of a scene, using bitmap supports for overlap.
pub fn build_stack_graph(scene: &Scene) -> StackGraph {
    let supports: Vec<(ElementId, &ElementMeta, Support<'_>)> = scene
        .elements
        .iter()
        .map(|e| (e.id(), &e.meta, Support::Bitmap(&e.bitmap)))
        .collect();
    build_stack_graph_from(&supports)
}

/// Builds the stacking DAG from explicit supports (e.g. rectangles).
pub fn build_stack_graph_from(elements: &[(ElementId, &ElementMeta, Support<'_>)]) -> StackGraph {
    let mut graph = StackGraph {
        vertices: elements.iter().map(|e| e.0).collect(),
        ..Default::default()
    };
    for (i, (id_i, meta_i, sup_i)) in elements.iter().enumerate() {
        for (id_j, meta_j, sup_j) in &elements[i + 1..] {
            if !overlap(*sup_i, *sup_j) {
                continue;
            }
            let (order, source) = decide_stack_order(meta_i, meta_j);
            let (below, above) = match order {
                StackOrder::Below => (*id_i, *id_j),
                StackOrder::Above => (*id_j, *id_i),
                StackOrder::Tie => continue,
            };
            graph.edges.push(StackEdge { below, above, source });
        }
    }
    graph.break_cycles();
    graph
}

/// Ordered layers, bottom first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layering {
    layers: Vec<Vec<ElementId>>,
}

impl Layering {
    pub fn new(layers: Vec<Vec<ElementId>>) -> Self {
        Layering { layers }
    }

    pub fn layers(&self) -> &[Vec<ElementId>] {
        &self.layers
    }

    /// Number of layers.
    pub fn k(&self) -> usize {
        self.layers.len()
    }

    pub fn iter_ids(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.layers.iter().flatten().copied()
    }

    /// 1-based layer index of every element.
    pub fn layer_of(&self) -> BTreeMap<ElementId, usize> {
        let mut out = BTreeMap::new();
        for (i, layer) in self.layers.iter().enumerate() {
            for &id in layer {
                out.entry(id).or_insert(i + 1);
            }
        }
        out
    }
}

/// Longest-path layering via Kahn's algorithm: every vertex lands one layer
/// above the highest layer among its predecessors; sources and isolated
/// vertices land in the first layer.
pub fn assign_layers(graph: &StackGraph) -> Result<Layering> {
    let adj = graph.successors();
    let mut indegree: BTreeMap<ElementId, usize> = adj.keys().map(|&v| (v, 0)).collect();
    for e in &graph.edges {
        *indegree.entry(e.above).or_default() += 1;
    }
    let mut level: BTreeMap<ElementId, usize> = indegree.keys().map(|&v| (v, 1)).collect();
    let mut ready: BTreeSet<ElementId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&v, _)| v).collect();
    let mut processed = 0usize;

    while let Some(v) = ready.pop_first() {
        processed += 1;
        let lv = level[&v];
        for &w in adj.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            let lw = level.get_mut(&w).unwrap();
            *lw = (*lw).max(lv + 1);
            let d = indegree.get_mut(&w).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(w);
            }
        }
    }

    if processed < indegree.len() {
        let stuck = indegree.into_iter().filter(|(_, d)| *d > 0).map(|(v, _)| v).collect();
        return Err(Error::CycleDetected(stuck));
    }

    let k = level.values().copied().max().unwrap_or(0);
    let mut layers = vec![Vec::new(); k];
    for (v, l) in level {
        layers[l - 1].push(v);
    }
    Ok(Layering { layers })
}

/// Checks the layering constraints by brute force: partition of the element
/// set, pairwise-disjoint supports within a layer and strictly increasing
/// layers along every graph edge.
pub fn validate_layering(scene: &Scene, graph: &StackGraph, layering: &Layering) -> ValidationReport {
    let mut report = ValidationReport::default();
    let scene_ids: BTreeSet<ElementId> = scene.ids().collect();
    let mut count: BTreeMap<ElementId, usize> = BTreeMap::new();
    for (i, layer) in layering.layers().iter().enumerate() {
        if layer.is_empty() {
            report.push("empty-layer", None, format!("layer {} is empty", i + 1));
        }
        for &id in layer {
            *count.entry(id).or_default() += 1;
        }
    }
    for (&id, &n) in &count {
        if !scene_ids.contains(&id) {
            report.push("partition", Some(id), "layered element is not in the scene");
        } else if n > 1 {
            report.push("partition", Some(id), format!("assigned to {n} layers"));
        }
    }
    for &id in &scene_ids {
        if !count.contains_key(&id) {
            report.push("partition", Some(id), "element missing from layering");
        }
    }

    for (i, layer) in layering.layers().iter().enumerate() {
        let members: Vec<&SceneElement> = layer.iter().filter_map(|&id| scene.element(id)).collect();
        for (a, ea) in members.iter().enumerate() {
            for eb in &members[a + 1..] {
                if elements_overlap(ea, eb) {
                    report.push(
                        "layer-disjoint",
                        Some(ea.id()),
                        format!("overlaps {} within layer {}", eb.id(), i + 1),
                    );
                }
            }
        }
    }

    let level = layering.layer_of();
    for e in &graph.edges {
        match (level.get(&e.below), level.get(&e.above)) {
            (Some(lb), Some(la)) if la > lb => {}
            (Some(lb), Some(la)) => report.push(
                "edge-monotone",
                Some(e.above),
                format!("edge {e} has layer({}) = {la} not above layer({}) = {lb}", e.above, e.below),
            ),
            _ => report.push("edge-monotone", Some(e.above), format!("edge {e} references an unlayered element")),
        }
    }
    report
}
