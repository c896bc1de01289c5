//! Stable graphs: construction, validation, canonical forms, automorphisms,
//! enumeration and common degenerations.
//!
//! A graph stores per-vertex genera and marking legs, plus an edge list of
//! vertex pairs. Edge `e` owns the half-edges `2e` (at `edges[e].0`) and
//! `2e + 1` (at `edges[e].1`). The slot of a half-edge is its rank among the
//! half-edges at its vertex.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, OnceLock};

use parking_lot::RwLock;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StableGraph {
    genera: Vec<u32>,
    legs: Vec<Vec<u32>>,
    edges: Vec<(usize, usize)>,
}

/// An isomorphism between two stable graphs. Legs are fixed pointwise.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphIso {
    pub vertex_map: Vec<usize>,
    pub half_edge_map: Vec<usize>,
}

impl GraphIso {
    pub fn identity(graph: &StableGraph) -> Self {
        GraphIso {
            vertex_map: (0..graph.num_vertices()).collect(),
            half_edge_map: (0..2 * graph.num_edges()).collect(),
        }
    }

    /// `self` after `first`.
    pub fn compose(&self, first: &GraphIso) -> GraphIso {
        GraphIso {
            vertex_map: first.vertex_map.iter().map(|&v| self.vertex_map[v]).collect(),
            half_edge_map: first
                .half_edge_map
                .iter()
                .map(|&h| self.half_edge_map[h])
                .collect(),
        }
    }

    pub fn inverse(&self) -> GraphIso {
        let mut vertex_map = vec![0; self.vertex_map.len()];
        for (v, &w) in self.vertex_map.iter().enumerate() {
            vertex_map[w] = v;
        }
        let mut half_edge_map = vec![0; self.half_edge_map.len()];
        for (h, &k) in self.half_edge_map.iter().enumerate() {
            half_edge_map[k] = h;
        }
        GraphIso {
            vertex_map,
            half_edge_map,
        }
    }
}

/// An edge-contraction map from a graph onto a coarser one.
///
/// `half_edge_map[h]` is `None` when the edge of `h` is contracted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Contraction {
    pub vertex_map: Vec<usize>,
    pub half_edge_map: Vec<Option<usize>>,
}

impl Contraction {
    /// Edges of the source graph that survive the contraction.
    pub fn kept_edges(&self) -> Vec<usize> {
        (0..self.half_edge_map.len() / 2)
            .filter(|&e| self.half_edge_map[2 * e].is_some())
            .collect()
    }

    /// Source half-edge lying over each target half-edge.
    pub fn preimages(&self, target_half_edges: usize) -> Vec<usize> {
        let mut pre = vec![usize::MAX; target_half_edges];
        for (h, t) in self.half_edge_map.iter().enumerate() {
            if let Some(t) = t {
                pre[*t] = h;
            }
        }
        pre
    }
}

impl StableGraph {
    /// Builds and validates a stable graph.
    pub fn new(genera: Vec<u32>, legs: Vec<Vec<u32>>, edges: Vec<(usize, usize)>) -> Result<Self> {
        if genera.is_empty() {
            return Err(Error::InvalidGraph("a graph needs at least one vertex".into()));
        }
        if genera.len() != legs.len() {
            return Err(Error::InvalidGraph(format!(
                "{} genera but {} leg lists",
                genera.len(),
                legs.len()
            )));
        }
        let nv = genera.len();
        if let Some(&(u, w)) = edges.iter().find(|&&(u, w)| u >= nv || w >= nv) {
            return Err(Error::InvalidGraph(format!("edge ({u}, {w}) has a missing endpoint")));
        }
        let mut all: Vec<u32> = legs.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.iter().enumerate().any(|(i, &m)| m != i as u32 + 1) {
            return Err(Error::InvalidGraph(format!(
                "markings must be exactly 1..={} once each, got {all:?}",
                all.len()
            )));
        }
        let legs = legs
            .into_iter()
            .map(|mut l| {
                l.sort_unstable();
                l
            })
            .collect();
        let graph = StableGraph {
            genera,
            legs,
            edges,
        };
        if !graph.is_connected(None) {
            return Err(Error::InvalidGraph("graph is not connected".into()));
        }
        if let Some(v) = (0..nv).find(|&v| !graph.vertex_is_stable(v)) {
            return Err(Error::InvalidGraph(format!(
                "vertex {v} (genus {}, valence {}) is unstable",
                graph.genera[v],
                graph.valence(v)
            )));
        }
        Ok(graph)
    }

    /// The single-vertex graph of M̄_{g,n}.
    pub fn smooth(g: u32, n: u32) -> Result<Self> {
        check_stable(g, n)?;
        Ok(StableGraph {
            genera: vec![g],
            legs: vec![(1..=n).collect()],
            edges: vec![],
        })
    }

    pub fn genera(&self) -> &[u32] {
        &self.genera
    }

    pub fn legs(&self) -> &[Vec<u32>] {
        &self.legs
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.genera.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_half_edges(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn num_markings(&self) -> u32 {
        self.legs.iter().map(|l| l.len() as u32).sum()
    }

    pub fn h1(&self) -> u32 {
        (self.edges.len() + 1 - self.genera.len()) as u32
    }

    pub fn genus(&self) -> u32 {
        self.genera.iter().sum::<u32>() + self.h1()
    }

    pub fn vertex_genus(&self, v: usize) -> u32 {
        self.genera[v]
    }

    pub fn vertex_legs(&self, v: usize) -> &[u32] {
        &self.legs[v]
    }

    /// Vertex carrying the given half-edge.
    pub fn half_edge_vertex(&self, h: usize) -> usize {
        let (u, w) = self.edges[h / 2];
        if h.is_multiple_of(2) {
            u
        } else {
            w
        }
    }

    /// Vertex carrying marking `i`.
    pub fn leg_vertex(&self, marking: u32) -> usize {
        self.legs
            .iter()
            .position(|l| l.contains(&marking))
            .expect("marking present")
    }

    pub fn half_edges_at(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            if a == v {
                out.push(2 * e);
            }
            if b == v {
                out.push(2 * e + 1);
            }
        }
        out
    }

    pub fn slot_of(&self, h: usize) -> usize {
        let v = self.half_edge_vertex(h);
        self.half_edges_at(v).iter().position(|&k| k == h).expect("half-edge at its vertex")
    }

    pub fn half_edge_at_slot(&self, v: usize, slot: usize) -> Option<usize> {
        self.half_edges_at(v).get(slot).copied()
    }

    /// Number of half-edges plus legs at `v`.
    pub fn valence(&self, v: usize) -> u32 {
        let incident: usize = self
            .edges
            .iter()
            .map(|&(a, b)| (a == v) as usize + (b == v) as usize)
            .sum();
        self.legs[v].len() as u32 + incident as u32
    }

    pub fn loops_at(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v && b == v).count()
    }

    /// Dimension of the vertex moduli space M̄_{g(v), n(v)}.
    pub fn vertex_dim(&self, v: usize) -> u32 {
        3 * self.genera[v] + self.valence(v) - 3
    }

    /// Dimension of the ambient moduli space.
    pub fn ambient_dim(&self) -> u32 {
        3 * self.genus() + self.num_markings() - 3
    }

    fn vertex_is_stable(&self, v: usize) -> bool {
        2 * self.genera[v] as i64 - 2 + self.valence(v) as i64 > 0
    }

    fn is_connected(&self, skip_edge: Option<usize>) -> bool {
        let nv = self.num_vertices();
        let mut seen = vec![false; nv];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for (e, &(a, b)) in self.edges.iter().enumerate() {
                if Some(e) == skip_edge {
                    continue;
                }
                let other = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn is_separating_edge(&self, e: usize) -> bool {
        let (a, b) = self.edges[e];
        a != b && !self.is_connected(Some(e))
    }

    pub fn has_separating_edge(&self) -> bool {
        (0..self.num_edges()).any(|e| self.is_separating_edge(e))
    }

    fn multiplicity_matrix(&self) -> Vec<Vec<usize>> {
        let nv = self.num_vertices();
        let mut m = vec![vec![0; nv]; nv];
        for &(a, b) in &self.edges {
            m[a][b] += 1;
            if a != b {
                m[b][a] += 1;
            }
        }
        m
    }

    /// Isomorphism-invariant vertex colouring by iterated neighbourhood refinement.
    fn vertex_colors(&self) -> Vec<usize> {
        let nv = self.num_vertices();
        let mult = self.multiplicity_matrix();
        let initial: Vec<(u32, Vec<u32>, u32, usize)> = (0..nv)
            .map(|v| (self.genera[v], self.legs[v].clone(), self.valence(v), mult[v][v]))
            .collect();
        let mut colors = rank_signatures(&initial);
        loop {
            let sigs: Vec<(usize, Vec<(usize, usize)>)> = (0..nv)
                .map(|v| {
                    let mut nb: Vec<(usize, usize)> = (0..nv)
                        .filter(|&w| w != v && mult[v][w] > 0)
                        .map(|w| (colors[w], mult[v][w]))
                        .collect();
                    nb.sort_unstable();
                    (colors[v], nb)
                })
                .collect();
            let refined = rank_signatures(&sigs);
            let before = colors.iter().collect::<BTreeSet<_>>().len();
            let after = refined.iter().collect::<BTreeSet<_>>().len();
            colors = refined;
            if after == before {
                return colors;
            }
        }
    }

    /// Canonical representative together with the isomorphism `self -> canonical`.
    pub fn canonicalize(&self) -> (StableGraph, GraphIso) {
        let colors = self.vertex_colors();
        let mut order: Vec<usize> = (0..self.num_vertices()).collect();
        order.sort_by_key(|&v| colors[v]);
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for &v in &order {
            match blocks.last_mut() {
                Some(b) if colors[b[0]] == colors[v] => b.push(v),
                _ => blocks.push(vec![v]),
            }
        }

        let mut best: Option<(Vec<(usize, usize)>, Vec<usize>)> = None;
        let mut current = Vec::with_capacity(order.len());
        for_each_block_ordering(&blocks, 0, &mut current, &mut |ordering| {
            let mut position = vec![0; ordering.len()];
            for (p, &v) in ordering.iter().enumerate() {
                position[v] = p;
            }
            let mut key: Vec<(usize, usize)> = self
                .edges
                .iter()
                .map(|&(a, b)| {
                    let (x, y) = (position[a], position[b]);
                    (x.min(y), x.max(y))
                })
                .collect();
            key.sort_unstable();
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, position));
            }
        });
        let (edges, position) = best.expect("at least one ordering");

        let nv = self.num_vertices();
        let mut genera = vec![0; nv];
        let mut legs = vec![Vec::new(); nv];
        for v in 0..nv {
            genera[position[v]] = self.genera[v];
            legs[position[v]] = self.legs[v].clone();
        }

        let mut used = vec![false; edges.len()];
        let mut half_edge_map = vec![0; self.num_half_edges()];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let (x, y) = (position[a], position[b]);
            let target = (x.min(y), x.max(y));
            let p = (0..edges.len())
                .find(|&p| !used[p] && edges[p] == target)
                .expect("edge present in canonical key");
            used[p] = true;
            if x <= y {
                half_edge_map[2 * e] = 2 * p;
                half_edge_map[2 * e + 1] = 2 * p + 1;
            } else {
                half_edge_map[2 * e] = 2 * p + 1;
                half_edge_map[2 * e + 1] = 2 * p;
            }
        }
        (
            StableGraph {
                genera,
                legs,
                edges,
            },
            GraphIso {
                vertex_map: position,
                half_edge_map,
            },
        )
    }

    pub fn canonical_form(&self) -> StableGraph {
        self.canonicalize().0
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical_form() == *self
    }

    /// All vertex bijections `self -> other` compatible with genera, legs and
    /// edge multiplicities.
    fn vertex_isomorphisms(&self, other: &StableGraph) -> Vec<Vec<usize>> {
        let nv = self.num_vertices();
        if nv != other.num_vertices() || self.num_edges() != other.num_edges() {
            return Vec::new();
        }
        let (ca, cb) = (self.vertex_colors(), other.vertex_colors());
        let (ma, mb) = (self.multiplicity_matrix(), other.multiplicity_matrix());
        let sig = |g: &StableGraph, m: &Vec<Vec<usize>>, v: usize| {
            (g.genera[v], g.legs[v].clone(), g.valence(v), m[v][v])
        };
        let sa: Vec<_> = (0..nv).map(|v| sig(self, &ma, v)).collect();
        let sb: Vec<_> = (0..nv).map(|v| sig(other, &mb, v)).collect();

        let mut out = Vec::new();
        let mut map = vec![usize::MAX; nv];
        let mut used = vec![false; nv];
        #[allow(clippy::too_many_arguments)]
        fn rec(
            v: usize,
            nv: usize,
            map: &mut Vec<usize>,
            used: &mut Vec<bool>,
            ok: &dyn Fn(usize, usize, &[usize]) -> bool,
            out: &mut Vec<Vec<usize>>,
        ) {
            if v == nv {
                out.push(map.clone());
                return;
            }
            for w in 0..nv {
                if used[w] || !ok(v, w, map) {
                    continue;
                }
                map[v] = w;
                used[w] = true;
                rec(v + 1, nv, map, used, ok, out);
                used[w] = false;
                map[v] = usize::MAX;
            }
        }
        let ok = |v: usize, w: usize, map: &[usize]| -> bool {
            if sa[v] != sb[w] || ca[v] != cb[w] {
                return false;
            }
            (0..v).all(|u| ma[v][u] == mb[w][map[u]])
        };
        rec(0, nv, &mut map, &mut used, &ok, &mut out);
        out
    }

    /// Edges grouped by unordered endpoint pair.
    fn edge_groups(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut groups: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            groups.entry((a.min(b), a.max(b))).or_default().push(e);
        }
        groups
    }

    fn half_edge_at_vertex(&self, e: usize, v: usize) -> usize {
        if self.edges[e].0 == v {
            2 * e
        } else {
            2 * e + 1
        }
    }

    /// All half-edge bijections realising a given vertex bijection.
    fn half_edge_maps(&self, other: &StableGraph, vmap: &[usize]) -> Vec<Vec<usize>> {
        let theirs = other.edge_groups();
        let mut groups: Vec<((usize, usize), Vec<usize>)> = self.edge_groups().into_iter().collect();
        groups.sort();
        let mut partial: Vec<Vec<usize>> = vec![vec![usize::MAX; self.num_half_edges()]];
        for ((a, b), mine) in groups {
            let (x, y) = (vmap[a], vmap[b]);
            let target = &theirs[&(x.min(y), x.max(y))];
            let perms = permutations(mine.len());
            let is_loop = a == b;
            let flips = if is_loop { 1usize << mine.len() } else { 1 };
            let mut next = Vec::with_capacity(partial.len() * perms.len() * flips);
            for base in &partial {
                for perm in &perms {
                    for flip in 0..flips {
                        let mut m = base.clone();
                        for (i, &e) in mine.iter().enumerate() {
                            let f = target[perm[i]];
                            if is_loop {
                                let (h0, h1) = if flip >> i & 1 == 1 { (2 * f + 1, 2 * f) } else { (2 * f, 2 * f + 1) };
                                m[2 * e] = h0;
                                m[2 * e + 1] = h1;
                            } else {
                                let ha = self.half_edge_at_vertex(e, a);
                                m[ha] = other.half_edge_at_vertex(f, x);
                                m[ha ^ 1] = other.half_edge_at_vertex(f, x) ^ 1;
                            }
                        }
                        next.push(m);
                    }
                }
            }
            partial = next;
        }
        partial
    }

    /// All isomorphisms `self -> other` (legs fixed pointwise).
    pub fn isomorphisms(&self, other: &StableGraph) -> Vec<GraphIso> {
        let mut out = Vec::new();
        for vmap in self.vertex_isomorphisms(other) {
            for hmap in self.half_edge_maps(other, &vmap) {
                out.push(GraphIso {
                    vertex_map: vmap.clone(),
                    half_edge_map: hmap,
                });
            }
        }
        out
    }

    pub fn is_isomorphic(&self, other: &StableGraph) -> bool {
        !self.vertex_isomorphisms(other).is_empty()
    }

    pub fn automorphisms(&self) -> Vec<GraphIso> {
        self.isomorphisms(self)
    }

    /// Order of the automorphism group (vertex and half-edge symmetries fixing legs).
    pub fn automorphism_count(&self) -> u64 {
        let groups = self.edge_groups();
        self.vertex_isomorphisms(self)
            .iter()
            .map(|_| {
                groups
                    .iter()
                    .map(|(&(a, b), es)| {
                        let k = es.len() as u64;
                        let fact: u64 = (1..=k).product();
                        if a == b {
                            fact << k
                        } else {
                            fact
                        }
                    })
                    .product::<u64>()
            })
            .sum()
    }

    /// Contracts the flagged edges.
    pub fn contract(&self, contracted: &[bool]) -> (StableGraph, Contraction) {
        let nv = self.num_vertices();
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            if contracted[e] {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut new_index = vec![usize::MAX; nv];
        let mut count = 0;
        let mut vertex_map = vec![0; nv];
        for v in 0..nv {
            let r = find(&mut parent, v);
            if new_index[r] == usize::MAX {
                new_index[r] = count;
                count += 1;
            }
            vertex_map[v] = new_index[r];
        }
        let mut genera = vec![0u32; count];
        let mut legs = vec![Vec::new(); count];
        let mut members = vec![0i64; count];
        let mut inner = vec![0i64; count];
        for v in 0..nv {
            genera[vertex_map[v]] += self.genera[v];
            legs[vertex_map[v]].extend(self.legs[v].iter().copied());
            members[vertex_map[v]] += 1;
        }
        let mut edges = Vec::new();
        let mut half_edge_map = vec![None; self.num_half_edges()];
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            if contracted[e] {
                inner[vertex_map[a]] += 1;
            } else {
                let p = edges.len();
                edges.push((vertex_map[a], vertex_map[b]));
                half_edge_map[2 * e] = Some(2 * p);
                half_edge_map[2 * e + 1] = Some(2 * p + 1);
            }
        }
        for c in 0..count {
            genera[c] += (inner[c] - members[c] + 1) as u32;
            legs[c].sort_unstable();
        }
        (
            StableGraph {
                genera,
                legs,
                edges,
            },
            Contraction {
                vertex_map,
                half_edge_map,
            },
        )
    }

    /// All graphs obtained by adding one edge (not deduplicated, not canonical).
    pub fn one_edge_degenerations(&self) -> Vec<StableGraph> {
        let mut out = Vec::new();
        for v in 0..self.num_vertices() {
            let gv = self.genera[v];
            if gv >= 1 {
                let mut g = self.clone();
                g.genera[v] -= 1;
                g.edges.push((v, v));
                out.push(g);
            }
            let legs = &self.legs[v];
            let hes = self.half_edges_at(v);
            let items = legs.len() + hes.len();
            let new_v = self.num_vertices();
            for g1 in 0..=gv {
                let g2 = gv - g1;
                for mask in 0u64..(1u64 << items) {
                    let count1 = mask.count_ones() as i64;
                    let count2 = items as i64 - count1;
                    if 2 * g1 as i64 - 2 + count1 < 0 || 2 * g2 as i64 - 2 + count2 < 0 {
                        continue;
                    }
                    let mut g = self.clone();
                    g.genera[v] = g1;
                    g.genera.push(g2);
                    let mut keep = Vec::new();
                    let mut moved = Vec::new();
                    for (i, &l) in legs.iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            keep.push(l);
                        } else {
                            moved.push(l);
                        }
                    }
                    g.legs[v] = keep;
                    g.legs.push(moved);
                    for (j, &h) in hes.iter().enumerate() {
                        if mask >> (legs.len() + j) & 1 == 0 {
                            let e = h / 2;
                            if h % 2 == 0 {
                                g.edges[e].0 = new_v;
                            } else {
                                g.edges[e].1 = new_v;
                            }
                        }
                    }
                    g.edges.push((v, new_v));
                    out.push(g);
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            g: self.genus(),
            n: self.num_markings(),
            vertices: self
                .genera
                .iter()
                .zip(&self.legs)
                .map(|(&genus, legs)| VertexJson {
                    genus,
                    legs: legs.clone(),
                })
                .collect(),
            edges: (0..self.num_edges())
                .map(|e| {
                    let h0 = 2 * e;
                    let h1 = 2 * e + 1;
                    [
                        [self.half_edge_vertex(h0), self.slot_of(h0)],
                        [self.half_edge_vertex(h1), self.slot_of(h1)],
                    ]
                })
                .collect(),
        }
    }

    /// Parses a JSON graph; returns the graph and the map `(vertex, slot) -> half-edge`.
    pub fn from_json(json: &GraphJson) -> Result<(StableGraph, HashMap<(usize, usize), usize>)> {
        let genera: Vec<u32> = json.vertices.iter().map(|v| v.genus).collect();
        let legs: Vec<Vec<u32>> = json.vertices.iter().map(|v| v.legs.clone()).collect();
        let edges: Vec<(usize, usize)> = json.edges.iter().map(|[a, b]| (a[0], b[0])).collect();
        let graph = StableGraph::new(genera, legs, edges)?;
        let mut slots = HashMap::new();
        for (e, [a, b]) in json.edges.iter().enumerate() {
            for (h, end) in [(2 * e, a), (2 * e + 1, b)] {
                if slots.insert((end[0], end[1]), h).is_some() {
                    return Err(Error::InvalidGraph(format!("slot {end:?} used twice")));
                }
            }
        }
        for v in 0..graph.num_vertices() {
            let k = graph.half_edges_at(v).len();
            if (0..k).any(|s| !slots.contains_key(&(v, s))) {
                return Err(Error::InvalidGraph(format!("slots at vertex {v} must be 0..{k}")));
            }
        }
        if graph.genus() != json.g || graph.num_markings() != json.n {
            return Err(Error::InvalidGraph(format!(
                "declared (g, n) = ({}, {}) but graph has ({}, {})",
                json.g,
                json.n,
                graph.genus(),
                graph.num_markings()
            )));
        }
        Ok((graph, slots))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexJson {
    pub genus: u32,
    pub legs: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub g: u32,
    pub n: u32,
    pub vertices: Vec<VertexJson>,
    pub edges: Vec<[[usize; 2]; 2]>,
}

pub fn check_stable(g: u32, n: u32) -> Result<()> {
    if 2 * g as i64 - 2 + n as i64 > 0 {
        Ok(())
    } else {
        Err(Error::Unstable { g, n })
    }
}

fn rank_signatures<T: Ord + Clone>(sigs: &[T]) -> Vec<usize> {
    let distinct: BTreeSet<T> = sigs.iter().cloned().collect();
    let distinct: Vec<T> = distinct.into_iter().collect();
    sigs.iter()
        .map(|s| distinct.binary_search(s).expect("present"))
        .collect()
}

pub(crate) fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, k - 1);
            out.push(q);
        }
    }
    out
}

fn for_each_block_ordering(
    blocks: &[Vec<usize>],
    i: usize,
    current: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    if i == blocks.len() {
        f(current);
        return;
    }
    for perm in permutations(blocks[i].len()) {
        let len = current.len();
        current.extend(perm.iter().map(|&j| blocks[i][j]));
        for_each_block_ordering(blocks, i + 1, current, f);
        current.truncate(len);
    }
}

type GraphLevels = Arc<Vec<Vec<StableGraph>>>;

fn level_cache() -> &'static RwLock<HashMap<(u32, u32), GraphLevels>> {
    static CACHE: OnceLock<RwLock<HashMap<(u32, u32), GraphLevels>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Canonical stable graphs of type (g, n) grouped by edge count, for edge
/// counts `0..=max_edges` (clamped to the ambient dimension).
pub fn stable_graphs_by_edges(g: u32, n: u32, max_edges: usize) -> Result<GraphLevels> {
    check_stable(g, n)?;
    let top = (3 * g + n - 3) as usize;
    let want = max_edges.min(top);
    if let Some(levels) = level_cache().read().get(&(g, n)) {
        if levels.len() > want {
            return Ok(levels.clone());
        }
    }
    let mut levels: Vec<Vec<StableGraph>> = level_cache()
        .read()
        .get(&(g, n))
        .map(|l| l.as_ref().clone())
        .unwrap_or_else(|| vec![vec![StableGraph::smooth(g, n).expect("stable")]]);
    while levels.len() <= want {
        let prev = levels.last().expect("nonempty");
        let next: BTreeSet<StableGraph> = prev
            .par_iter()
            .flat_map_iter(|gr| gr.one_edge_degenerations().into_iter().map(|d| d.canonical_form()))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        levels.push(next.into_iter().collect());
    }
    let levels = Arc::new(levels);
    let mut cache = level_cache().write();
    let entry = cache.entry((g, n)).or_insert_with(|| levels.clone());
    if entry.len() < levels.len() {
        *entry = levels.clone();
    }
    Ok(entry.clone())
}

/// All stable graphs of type (g, n), one per isomorphism class, ordered by
/// edge count and then by canonical representation.
pub fn enumerate_stable_graphs(g: u32, n: u32) -> Result<Vec<StableGraph>> {
    let top = (3 * g as i64 + n as i64 - 3).max(0) as usize;
    let levels = stable_graphs_by_edges(g, n, top)?;
    Ok(levels.iter().flatten().cloned().collect())
}

/// A graph with contraction maps onto two given graphs such that every edge
/// lies over an edge of at least one of them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommonDegeneration {
    pub graph: StableGraph,
    pub to_a: Contraction,
    pub to_b: Contraction,
}

impl CommonDegeneration {
    /// Edges lying over edges of both graphs.
    pub fn shared_edges(&self) -> Vec<usize> {
        (0..self.graph.num_edges())
            .filter(|&e| self.to_a.half_edge_map[2 * e].is_some() && self.to_b.half_edge_map[2 * e].is_some())
            .collect()
    }

    pub fn swapped(&self) -> CommonDegeneration {
        CommonDegeneration {
            graph: self.graph.clone(),
            to_a: self.to_b.clone(),
            to_b: self.to_a.clone(),
        }
    }
}

/// All isomorphism classes of generic (a, b)-structures.
pub fn common_degenerations(a: &StableGraph, b: &StableGraph) -> Result<Vec<CommonDegeneration>> {
    if a.genus() != b.genus() || a.num_markings() != b.num_markings() {
        return Err(Error::AmbientMismatch(a.genus(), a.num_markings(), b.genus(), b.num_markings()));
    }
    let max_extra = b.num_edges();

    // Local degenerations of every vertex of `a`; local legs are the markings
    // at v followed by the half-edges at v.
    struct Local {
        markings: Vec<u32>,
        half_edges: Vec<usize>,
        graphs: Vec<(StableGraph, Vec<GraphIso>)>,
    }
    let mut locals = Vec::new();
    for v in 0..a.num_vertices() {
        let markings = a.legs[v].clone();
        let half_edges = a.half_edges_at(v);
        let nv = (markings.len() + half_edges.len()) as u32;
        let levels = stable_graphs_by_edges(a.genera[v], nv, max_extra)?;
        let graphs = levels
            .iter()
            .take(max_extra + 1)
            .flatten()
            .map(|g| (g.clone(), g.automorphisms()))
            .collect();
        locals.push(Local {
            markings,
            half_edges,
            graphs,
        });
    }

    let mut out = Vec::new();
    let mut choice = vec![0usize; locals.len()];
    loop {
        let extra: usize = choice
            .iter()
            .zip(&locals)
            .map(|(&c, l)| l.graphs[c].0.num_edges())
            .sum();
        if extra <= max_extra {
            let pieces: Vec<&(StableGraph, Vec<GraphIso>)> =
                choice.iter().zip(&locals).map(|(&c, l)| &l.graphs[c]).collect();
            let mut offsets = Vec::new();
            let mut genera = Vec::new();
            let mut legs = Vec::new();
            let mut vertex_map = Vec::new();
            let mut endpoint = vec![0usize; a.num_half_edges()];
            for (v, (local, piece)) in locals.iter().zip(&pieces).enumerate() {
                let off = genera.len();
                offsets.push(off);
                let lg = &piece.0;
                for w in 0..lg.num_vertices() {
                    genera.push(lg.genera[w]);
                    let mut global = Vec::new();
                    for &l in &lg.legs[w] {
                        let l = l as usize - 1;
                        if l < local.markings.len() {
                            global.push(local.markings[l]);
                        } else {
                            endpoint[local.half_edges[l - local.markings.len()]] = off + w;
                        }
                    }
                    global.sort_unstable();
                    legs.push(global);
                    vertex_map.push(v);
                }
            }
            let mut edges: Vec<(usize, usize)> =
                (0..a.num_edges()).map(|e| (endpoint[2 * e], endpoint[2 * e + 1])).collect();
            let mut extra_offsets = Vec::new();
            for (piece, &off) in pieces.iter().zip(&offsets) {
                extra_offsets.push(edges.len());
                edges.extend(piece.0.edges.iter().map(|&(x, y)| (x + off, y + off)));
            }
            let graph = StableGraph {
                genera,
                legs,
                edges,
            };
            let mut a_half = vec![None; graph.num_half_edges()];
            for (h, slot) in a_half.iter_mut().enumerate().take(a.num_half_edges()) {
                *slot = Some(h);
            }
            let to_a = Contraction {
                vertex_map,
                half_edge_map: a_half,
            };

            // Automorphisms of the a-structure: products of local automorphisms.
            let mut autos: Vec<GraphIso> = vec![GraphIso::identity(&graph)];
            for (i, piece) in pieces.iter().enumerate() {
                if piece.1.len() <= 1 {
                    continue;
                }
                let mut next = Vec::with_capacity(autos.len() * piece.1.len());
                for base in &autos {
                    for local in &piece.1 {
                        let mut m = base.clone();
                        for (w, &x) in local.vertex_map.iter().enumerate() {
                            m.vertex_map[offsets[i] + w] = offsets[i] + x;
                        }
                        for (h, &k) in local.half_edge_map.iter().enumerate() {
                            m.half_edge_map[2 * extra_offsets[i] + h] = 2 * extra_offsets[i] + k;
                        }
                        next.push(m);
                    }
                }
                autos = next;
            }

            let kept_a = b.num_edges() - extra;
            let mut seen = BTreeSet::new();
            if kept_a <= a.num_edges() {
                for subset in subsets_of_size(a.num_edges(), kept_a) {
                    let mut contracted = vec![false; graph.num_edges()];
                    for (e, c) in contracted.iter_mut().enumerate().take(a.num_edges()) {
                        *c = !subset.contains(&e);
                    }
                    let (h, c) = graph.contract(&contracted);
                    for iso in h.isomorphisms(b) {
                        let to_b = Contraction {
                            vertex_map: c.vertex_map.iter().map(|&x| iso.vertex_map[x]).collect(),
                            half_edge_map: c
                                .half_edge_map
                                .iter()
                                .map(|x| x.map(|x| iso.half_edge_map[x]))
                                .collect(),
                        };
                        let key = autos
                            .iter()
                            .map(|psi| {
                                (
                                    psi.vertex_map.iter().map(|&x| to_b.vertex_map[x]).collect::<Vec<_>>(),
                                    psi.half_edge_map.iter().map(|&x| to_b.half_edge_map[x]).collect::<Vec<_>>(),
                                )
                            })
                            .min()
                            .expect("identity present");
                        if seen.insert(key) {
                            out.push(CommonDegeneration {
                                graph: graph.clone(),
                                to_a: to_a.clone(),
                                to_b,
                            });
                        }
                    }
                }
            }
        }

        // Advance the mixed-radix counter.
        let mut i = 0;
        loop {
            if i == choice.len() {
                return Ok(out);
            }
            choice[i] += 1;
            if choice[i] < locals[i].graphs.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

type DegenerationCache = HashMap<(StableGraph, StableGraph), Arc<Vec<CommonDegeneration>>>;

fn degeneration_cache() -> &'static RwLock<DegenerationCache> {
    static CACHE: OnceLock<RwLock<DegenerationCache>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Memoized [`common_degenerations`].
pub fn common_degenerations_cached(a: &StableGraph, b: &StableGraph) -> Result<Arc<Vec<CommonDegeneration>>> {
    let key = (a.clone(), b.clone());
    if let Some(hit) = degeneration_cache().read().get(&key) {
        return Ok(hit.clone());
    }
    let value = Arc::new(common_degenerations(a, b)?);
    degeneration_cache().write().insert(key, value.clone());
    Ok(value)
}

pub(crate) fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Named graphs used throughout the tests and the CLI.
pub mod named {
    use super::StableGraph;

    /// Genus g-1 vertex with a self-loop (the Δ_irr graph), markings on the vertex.
    pub fn irreducible(g: u32, n: u32) -> StableGraph {
        StableGraph::new(vec![g - 1], vec![(1..=n).collect()], vec![(0, 0)]).expect("stable")
    }

    /// Two genus-0 vertices joined by three edges.
    pub fn theta() -> StableGraph {
        StableGraph::new(vec![0, 0], vec![vec![], vec![]], vec![(0, 1), (0, 1), (0, 1)]).expect("stable")
    }

    /// Genus-0 vertex with two loops (graph B of M̄₂).
    pub fn double_loop() -> StableGraph {
        StableGraph::new(vec![0], vec![vec![]], vec![(0, 0), (0, 0)]).expect("stable")
    }

    /// Genus-0 vertex with a loop attached to a genus-1 vertex (graph C of M̄₂).
    pub fn loop_and_bridge() -> StableGraph {
        StableGraph::new(vec![0, 1], vec![vec![], vec![]], vec![(0, 0), (0, 1)]).expect("stable")
    }

    /// Separating divisor graph of M̄_{g,n}: genus `h` with markings `s` on one side.
    pub fn separating(g: u32, n: u32, h: u32, s: &[u32]) -> StableGraph {
        let other: Vec<u32> = (1..=n).filter(|i| !s.contains(i)).collect();
        StableGraph::new(vec![h, g - h], vec![s.to_vec(), other], vec![(0, 1)]).expect("stable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_aut(g: &StableGraph) -> u64 {
        // Enumerate every vertex permutation and every half-edge permutation.
        let nv = g.num_vertices();
        let nh = g.num_half_edges();
        let mut count = 0;
        for vp in permutations(nv) {
            if (0..nv).any(|v| g.genera[v] != g.genera[vp[v]] || g.legs[v] != g.legs[vp[v]]) {
                continue;
            }
            for hp in permutations(nh) {
                let ok = (0..nh).all(|h| {
                    hp[h ^ 1] == hp[h] ^ 1 && g.half_edge_vertex(hp[h]) == vp[g.half_edge_vertex(h)]
                });
                if ok {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn counts_small() {
        assert_eq!(enumerate_stable_graphs(0, 3).unwrap().len(), 1);
        assert_eq!(enumerate_stable_graphs(1, 1).unwrap().len(), 2);
        assert_eq!(enumerate_stable_graphs(2, 0).unwrap().len(), 7);
        assert_eq!(enumerate_stable_graphs(0, 4).unwrap().len(), 4);
        assert_eq!(enumerate_stable_graphs(0, 5).unwrap().len(), 26);
        assert_eq!(enumerate_stable_graphs(1, 2).unwrap().len(), 5);
        assert_eq!(enumerate_stable_graphs(3, 0).unwrap().len(), 42);
        assert!(matches!(enumerate_stable_graphs(1, 0), Err(Error::Unstable { .. })));
        assert!(matches!(enumerate_stable_graphs(0, 2), Err(Error::Unstable { .. })));
    }

    #[test]
    fn enumerated_graphs_are_valid_and_canonical() {
        for (g, n) in [(2, 0), (1, 2), (2, 1), (0, 5), (3, 0)] {
            for gr in enumerate_stable_graphs(g, n).unwrap() {
                assert!(gr.is_canonical());
                assert_eq!(gr.genus(), g);
                assert_eq!(gr.num_markings(), n);
                assert!((0..gr.num_vertices()).all(|v| gr.vertex_is_stable(v)));
            }
        }
    }

    #[test]
    fn automorphisms_match_brute_force() {
        for (g, n) in [(2, 0), (1, 2), (2, 1), (0, 5), (3, 0), (1, 3)] {
            for gr in enumerate_stable_graphs(g, n).unwrap() {
                if gr.num_half_edges() <= 8 {
                    assert_eq!(gr.automorphism_count(), brute_force_aut(&gr), "{gr:?}");
                    assert_eq!(gr.automorphisms().len() as u64, gr.automorphism_count());
                }
            }
        }
    }

    #[test]
    fn named_examples() {
        assert_eq!(StableGraph::smooth(2, 0).unwrap().automorphism_count(), 1);
        assert_eq!(named::double_loop().automorphism_count(), 8);
        assert_eq!(named::theta().automorphism_count(), 12);
        assert_eq!(named::theta().h1(), 2);
        assert_eq!(named::double_loop().h1(), 2);
        assert_eq!(named::separating(2, 0, 1, &[]).h1(), 0);
    }

    #[test]
    fn canonical_form_is_relabeling_invariant() {
        let a = StableGraph::new(vec![1, 0], vec![vec![], vec![1, 2]], vec![(0, 1)]).unwrap();
        let b = StableGraph::new(vec![0, 1], vec![vec![2, 1], vec![]], vec![(1, 0)]).unwrap();
        assert_eq!(a.canonical_form(), b.canonical_form());
        let t = named::theta();
        let t2 = StableGraph::new(vec![0, 0], vec![vec![], vec![]], vec![(1, 0), (0, 1), (1, 0)]).unwrap();
        assert_eq!(t.canonical_form(), t2.canonical_form());
        let c = t.canonical_form();
        assert_eq!(c.canonical_form(), c);
    }

    #[test]
    fn canonicalize_returns_an_isomorphism() {
        for gr in enumerate_stable_graphs(2, 1).unwrap() {
            let scrambled = StableGraph {
                genera: gr.genera.iter().rev().copied().collect(),
                legs: gr.legs.iter().rev().cloned().collect(),
                edges: gr
                    .edges
                    .iter()
                    .rev()
                    .map(|&(a, b)| (gr.num_vertices() - 1 - b, gr.num_vertices() - 1 - a))
                    .collect(),
            };
            let (c, iso) = scrambled.canonicalize();
            assert_eq!(c, gr);
            assert!(scrambled.isomorphisms(&c).contains(&iso));
        }
    }

    #[test]
    fn validation_errors() {
        assert!(StableGraph::new(vec![0], vec![vec![1, 2]], vec![]).is_err());
        assert!(StableGraph::new(vec![0, 0], vec![vec![1, 2, 3], vec![]], vec![]).is_err());
        assert!(StableGraph::new(vec![1], vec![vec![2]], vec![]).is_err());
        assert!(StableGraph::new(vec![1], vec![vec![1]], vec![(0, 3)]).is_err());
    }

    #[test]
    fn contraction_genus() {
        let t = named::theta();
        let (c, map) = t.contract(&[true, false, false]);
        assert_eq!(c.num_vertices(), 1);
        assert_eq!(c.genera(), &[0]);
        assert_eq!(c.genus(), 2);
        assert_eq!(map.kept_edges(), vec![1, 2]);
        let (c, _) = t.contract(&[true, true, false]);
        assert_eq!(c.genera(), &[1]);
    }

    #[test]
    fn common_degenerations_examples() {
        let smooth = StableGraph::smooth(2, 0).unwrap();
        let d = common_degenerations(&smooth, &smooth).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].graph, smooth);

        let irr = named::irreducible(2, 0);
        let d = common_degenerations(&irr, &irr).unwrap();
        assert!(d.iter().any(|x| x.graph.num_edges() == 1 && x.shared_edges().len() == 1));
        assert!(d.iter().any(|x| x.graph.num_edges() == 2 && x.shared_edges().is_empty()));

        let sep = named::separating(2, 0, 1, &[]).canonical_form();
        let d = common_degenerations(&irr, &sep).unwrap();
        assert!(!d.is_empty());
        for x in &d {
            assert!(x.graph.num_edges() >= 2);
            assert!(x.shared_edges().is_empty());
        }
    }

    #[test]
    fn common_degenerations_symmetric_counts() {
        let graphs: Vec<StableGraph> = enumerate_stable_graphs(2, 0)
            .unwrap()
            .into_iter()
            .filter(|g| g.num_edges() <= 2)
            .collect();
        for a in &graphs {
            for b in &graphs {
                let ab = common_degenerations(a, b).unwrap();
                let ba = common_degenerations(b, a).unwrap();
                assert_eq!(ab.len(), ba.len(), "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let t = named::loop_and_bridge().canonical_form();
        let (back, _) = StableGraph::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }
}
