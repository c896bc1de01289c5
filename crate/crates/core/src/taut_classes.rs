//! Decorated strata classes and their linear combinations.
//!
//! A term `(Γ, dec)` with coefficient `c` stands for `c · ξ_Γ*(dec)`, where
//! `ξ_Γ` is the gluing map. No automorphism factor is applied.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_traits::{One, Zero};
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::rational::{format_q, parse_q, Q};
use crate::stable_graphs::{check_stable, enumerate_stable_graphs, GraphIso, GraphJson, StableGraph};

/// Monomial in ψ classes at legs and half-edges and κ classes at vertices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Decoration {
    /// Exponent of ψ at marking `i + 1`.
    pub leg_psi: Vec<u32>,
    /// Exponent of ψ at each half-edge.
    pub half_edge_psi: Vec<u32>,
    /// Sorted κ indices at each vertex.
    pub kappa: Vec<Vec<u32>>,
}

impl Decoration {
    pub fn trivial(graph: &StableGraph) -> Self {
        Decoration {
            leg_psi: vec![0; graph.num_markings() as usize],
            half_edge_psi: vec![0; graph.num_half_edges()],
            kappa: vec![Vec::new(); graph.num_vertices()],
        }
    }

    pub fn degree(&self) -> u32 {
        self.leg_psi.iter().sum::<u32>()
            + self.half_edge_psi.iter().sum::<u32>()
            + self.kappa.iter().flatten().sum::<u32>()
    }

    /// Degree of the part of the decoration living on vertex `v`.
    pub fn vertex_degree(&self, graph: &StableGraph, v: usize) -> u32 {
        graph.vertex_legs(v).iter().map(|&i| self.leg_psi[i as usize - 1]).sum::<u32>()
            + graph.half_edges_at(v).iter().map(|&h| self.half_edge_psi[h]).sum::<u32>()
            + self.kappa[v].iter().sum::<u32>()
    }

    /// Whether some vertex carries more degree than its moduli space allows.
    pub fn exceeds_vertex_dimension(&self, graph: &StableGraph) -> bool {
        (0..graph.num_vertices()).any(|v| self.vertex_degree(graph, v) > graph.vertex_dim(v))
    }

    /// Transport along an isomorphism of the underlying graph.
    pub fn transport(&self, iso: &GraphIso) -> Decoration {
        let mut half_edge_psi = vec![0; self.half_edge_psi.len()];
        for (h, &e) in self.half_edge_psi.iter().enumerate() {
            half_edge_psi[iso.half_edge_map[h]] = e;
        }
        let mut kappa = vec![Vec::new(); self.kappa.len()];
        for (v, k) in self.kappa.iter().enumerate() {
            kappa[iso.vertex_map[v]] = k.clone();
        }
        Decoration {
            leg_psi: self.leg_psi.clone(),
            half_edge_psi,
            kappa,
        }
    }

    fn check(&self, graph: &StableGraph) -> Result<()> {
        if self.leg_psi.len() != graph.num_markings() as usize
            || self.half_edge_psi.len() != graph.num_half_edges()
            || self.kappa.len() != graph.num_vertices()
        {
            return Err(Error::DanglingDecoration(format!(
                "decoration sized for {} legs, {} half-edges, {} vertices",
                self.leg_psi.len(),
                self.half_edge_psi.len(),
                self.kappa.len()
            )));
        }
        if self.kappa.iter().flatten().any(|&a| a == 0) {
            return Err(Error::DanglingDecoration("κ_0 is not a decoration".into()));
        }
        Ok(())
    }
}

fn automorphism_cache() -> &'static RwLock<HashMap<StableGraph, Arc<Vec<GraphIso>>>> {
    static CACHE: OnceLock<RwLock<HashMap<StableGraph, Arc<Vec<GraphIso>>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Memoized automorphism list.
pub fn automorphisms_cached(graph: &StableGraph) -> Arc<Vec<GraphIso>> {
    if let Some(hit) = automorphism_cache().read().get(graph) {
        return hit.clone();
    }
    let autos = Arc::new(graph.automorphisms());
    automorphism_cache().write().insert(graph.clone(), autos.clone());
    autos
}

/// A decorated stratum in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term {
    graph: StableGraph,
    decoration: Decoration,
}

impl Term {
    /// Canonicalizes the graph and picks the least decoration in its
    /// automorphism orbit.
    pub fn new(graph: &StableGraph, decoration: &Decoration) -> Result<Term> {
        decoration.check(graph)?;
        let (canonical, iso) = graph.canonicalize();
        let moved = decoration.transport(&iso);
        let autos = automorphisms_cached(&canonical);
        let best = autos
            .iter()
            .map(|a| moved.transport(a))
            .min()
            .expect("identity automorphism");
        Ok(Term {
            graph: canonical,
            decoration: best,
        })
    }

    pub fn undecorated(graph: &StableGraph) -> Term {
        Term::new(graph, &Decoration::trivial(graph)).expect("trivial decoration fits")
    }

    pub fn graph(&self) -> &StableGraph {
        &self.graph
    }

    pub fn decoration(&self) -> &Decoration {
        &self.decoration
    }

    pub fn degree(&self) -> u32 {
        self.graph.num_edges() as u32 + self.decoration.degree()
    }

    pub fn is_zero_by_dimension(&self) -> bool {
        self.decoration.exceeds_vertex_dimension(&self.graph)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.graph;
        let d = &self.decoration;
        write!(f, "[")?;
        for v in 0..g.num_vertices() {
            if v > 0 {
                write!(f, " ")?;
            }
            write!(f, "v{v}:g{}", g.vertex_genus(v))?;
            if !g.vertex_legs(v).is_empty() {
                write!(f, "{:?}", g.vertex_legs(v))?;
            }
        }
        let edges: Vec<String> = g.edges().iter().map(|(a, b)| format!("{a}-{b}")).collect();
        if !edges.is_empty() {
            write!(f, " | {}", edges.join(" "))?;
        }
        write!(f, "]")?;
        for (i, &e) in d.leg_psi.iter().enumerate() {
            if e > 0 {
                write!(f, " psi{}^{e}", i + 1)?;
            }
        }
        for (h, &e) in d.half_edge_psi.iter().enumerate() {
            if e > 0 {
                write!(f, " psi(v{},s{})^{e}", g.half_edge_vertex(h), g.slot_of(h))?;
            }
        }
        for (v, ks) in d.kappa.iter().enumerate() {
            for k in ks {
                write!(f, " kappa{k}(v{v})")?;
            }
        }
        Ok(())
    }
}

/// A tautological class on M̄_{g,n} of pure degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TautClass {
    g: u32,
    n: u32,
    degree: u32,
    terms: BTreeMap<Term, Q>,
}

impl TautClass {
    pub fn zero(g: u32, n: u32, degree: u32) -> Result<Self> {
        check_stable(g, n)?;
        let max = 3 * g + n - 3;
        if degree > max {
            return Err(Error::DegreeOutOfRange { degree, max });
        }
        Ok(TautClass {
            g,
            n,
            degree,
            terms: BTreeMap::new(),
        })
    }

    pub fn one(g: u32, n: u32) -> Result<Self> {
        Self::from_term(Term::undecorated(&StableGraph::smooth(g, n)?), Q::one())
    }

    pub fn from_term(term: Term, coeff: Q) -> Result<Self> {
        let mut c = TautClass::zero(term.graph.genus(), term.graph.num_markings(), term.degree())?;
        c.add_term(term, coeff)?;
        Ok(c)
    }

    /// `ξ_Γ*` of the given decoration.
    pub fn from_graph(graph: &StableGraph, decoration: &Decoration, coeff: Q) -> Result<Self> {
        Self::from_term(Term::new(graph, decoration)?, coeff)
    }

    /// `ξ_Γ*(1)`.
    pub fn of_graph(graph: &StableGraph) -> Result<Self> {
        Self::from_graph(graph, &Decoration::trivial(graph), Q::one())
    }

    pub fn kappa(g: u32, n: u32, a: u32) -> Result<Self> {
        let graph = StableGraph::smooth(g, n)?;
        let mut d = Decoration::trivial(&graph);
        if a == 0 {
            return Err(Error::DanglingDecoration("κ_0 is not a decoration".into()));
        }
        d.kappa[0] = vec![a];
        Self::from_graph(&graph, &d, Q::one())
    }

    pub fn psi(g: u32, n: u32, marking: u32, exponent: u32) -> Result<Self> {
        let graph = StableGraph::smooth(g, n)?;
        if marking == 0 || marking > n {
            return Err(Error::DanglingDecoration(format!("no marking {marking} on M̄_{{{g},{n}}}")));
        }
        let mut d = Decoration::trivial(&graph);
        d.leg_psi[marking as usize - 1] = exponent;
        Self::from_graph(&graph, &d, Q::one())
    }

    pub fn genus(&self) -> u32 {
        self.g
    }

    pub fn markings(&self) -> u32 {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<Term, Q> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, term: Term, coeff: Q) -> Result<()> {
        if term.graph.genus() != self.g || term.graph.num_markings() != self.n {
            return Err(Error::AmbientMismatch(self.g, self.n, term.graph.genus(), term.graph.num_markings()));
        }
        if term.degree() != self.degree {
            return Err(Error::DegreeMismatch(self.degree, term.degree()));
        }
        if coeff.is_zero() || term.is_zero_by_dimension() {
            return Ok(());
        }
        let entry = self.terms.entry(term);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
        Ok(())
    }

    fn check_compatible(&self, other: &TautClass) -> Result<()> {
        if (self.g, self.n) != (other.g, other.n) {
            return Err(Error::AmbientMismatch(self.g, self.n, other.g, other.n));
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch(self.degree, other.degree));
        }
        Ok(())
    }

    pub fn add(&self, other: &TautClass) -> Result<TautClass> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (t, c) in &other.terms {
            out.add_term(t.clone(), c.clone())?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TautClass) -> Result<TautClass> {
        self.add(&other.scale(&-Q::one()))
    }

    pub fn scale(&self, c: &Q) -> TautClass {
        let mut out = TautClass {
            terms: BTreeMap::new(),
            ..self.clone()
        };
        if !c.is_zero() {
            out.terms = self.terms.iter().map(|(t, x)| (t.clone(), x * c)).collect();
        }
        out
    }

    /// Whether the expression is literally empty. A nonempty expression may
    /// still represent the zero class.
    pub fn is_formally_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn to_json(&self) -> ClassJson {
        ClassJson {
            g: self.g,
            n: self.n,
            d: self.degree,
            terms: self
                .terms
                .iter()
                .map(|(t, c)| {
                    let graph = &t.graph;
                    let dec = &t.decoration;
                    let mut psi = Vec::new();
                    for (i, &e) in dec.leg_psi.iter().enumerate() {
                        if e > 0 {
                            psi.push(Value::from(vec![Value::from(i as u32 + 1), Value::from(e)]));
                        }
                    }
                    for (h, &e) in dec.half_edge_psi.iter().enumerate() {
                        if e > 0 {
                            let at = vec![graph.half_edge_vertex(h), graph.slot_of(h)];
                            psi.push(Value::from(vec![Value::from(at), Value::from(e)]));
                        }
                    }
                    TermJson {
                        graph: graph.to_json(),
                        psi,
                        kappa: dec.kappa.clone(),
                        coeff: format_q(c),
                    }
                })
                .collect(),
        }
    }

    pub fn from_json(json: &ClassJson) -> Result<TautClass> {
        let mut class = TautClass::zero(json.g, json.n, json.d)?;
        for t in &json.terms {
            let (graph, slots) = StableGraph::from_json(&t.graph)?;
            let mut dec = Decoration::trivial(&graph);
            for entry in &t.psi {
                let bad = || Error::Parse(format!("bad psi entry {entry}"));
                let pair = entry.as_array().filter(|a| a.len() == 2).ok_or_else(bad)?;
                let exp = pair[1].as_u64().ok_or_else(bad)? as u32;
                match &pair[0] {
                    Value::Number(m) => {
                        let m = m.as_u64().ok_or_else(bad)? as usize;
                        if m == 0 || m > dec.leg_psi.len() {
                            return Err(Error::DanglingDecoration(format!("no marking {m}")));
                        }
                        dec.leg_psi[m - 1] += exp;
                    }
                    Value::Array(at) if at.len() == 2 => {
                        let v = at[0].as_u64().ok_or_else(bad)? as usize;
                        let s = at[1].as_u64().ok_or_else(bad)? as usize;
                        let h = slots
                            .get(&(v, s))
                            .ok_or_else(|| Error::DanglingDecoration(format!("no half-edge at vertex {v}, slot {s}")))?;
                        dec.half_edge_psi[*h] += exp;
                    }
                    _ => return Err(bad()),
                }
            }
            if !t.kappa.is_empty() {
                if t.kappa.len() != graph.num_vertices() {
                    return Err(Error::DanglingDecoration(format!(
                        "{} kappa lists for {} vertices",
                        t.kappa.len(),
                        graph.num_vertices()
                    )));
                }
                for (v, ks) in t.kappa.iter().enumerate() {
                    let mut ks = ks.clone();
                    ks.sort_unstable();
                    dec.kappa[v] = ks;
                }
            }
            let term = Term::new(&graph, &dec)?;
            class.add_term(term, parse_q(&t.coeff)?)?;
        }
        Ok(class)
    }
}

impl fmt::Display for TautClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (t, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{} * {t}", format_q(c))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub graph: GraphJson,
    #[serde(default)]
    pub psi: Vec<Value>,
    #[serde(default)]
    pub kappa: Vec<Vec<u32>>,
    pub coeff: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassJson {
    pub g: u32,
    pub n: u32,
    pub d: u32,
    pub terms: Vec<TermJson>,
}

/// Integer partitions of `n` into parts `>= 1`, each sorted ascending.
pub fn partitions(n: u32) -> Vec<Vec<u32>> {
    fn rec(n: u32, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if n == 0 {
            let mut p = cur.clone();
            p.reverse();
            out.push(p);
            return;
        }
        for part in (1..=max.min(n)).rev() {
            cur.push(part);
            rec(n - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Weak compositions of `total` into `parts` parts.
pub fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Decorations of a graph with total degree `degree` and every vertex within
/// its dimension bound.
pub fn decorations_of_degree(graph: &StableGraph, degree: u32) -> Vec<Decoration> {
    // Per-vertex local monomials grouped by degree.
    let nv = graph.num_vertices();
    let mut local: Vec<Vec<Vec<(Vec<u32>, Vec<u32>)>>> = Vec::with_capacity(nv);
    for v in 0..nv {
        let items = graph.vertex_legs(v).len() + graph.half_edges_at(v).len();
        let cap = graph.vertex_dim(v).min(degree);
        let mut by_degree = Vec::new();
        for dv in 0..=cap {
            let mut monos = Vec::new();
            for kdeg in 0..=dv {
                for kap in partitions(kdeg) {
                    for psi in compositions(dv - kdeg, items) {
                        monos.push((psi, kap.clone()));
                    }
                }
            }
            by_degree.push(monos);
        }
        local.push(by_degree);
    }
    let caps: Vec<u32> = local.iter().map(|l| l.len() as u32 - 1).collect();
    let mut out = Vec::new();
    for split in compositions(degree, nv) {
        if split.iter().zip(&caps).any(|(s, c)| s > c) {
            continue;
        }
        let mut partial = vec![Decoration::trivial(graph)];
        for v in 0..nv {
            let legs = graph.vertex_legs(v);
            let hes = graph.half_edges_at(v);
            let mut next = Vec::new();
            for base in &partial {
                for (psi, kap) in &local[v][split[v] as usize] {
                    let mut d = base.clone();
                    for (i, &m) in legs.iter().enumerate() {
                        d.leg_psi[m as usize - 1] = psi[i];
                    }
                    for (j, &h) in hes.iter().enumerate() {
                        d.half_edge_psi[h] = psi[legs.len() + j];
                    }
                    d.kappa[v] = kap.clone();
                    next.push(d);
                }
            }
            partial = next;
        }
        out.extend(partial);
    }
    out
}

/// Generating decorated strata of R^d(M̄_{g,n}): one per automorphism orbit,
/// ordered by graph enumeration order and then by decoration.
pub fn generators(g: u32, n: u32, d: u32) -> Result<Vec<Term>> {
    check_stable(g, n)?;
    let max = 3 * g + n - 3;
    if d > max {
        return Err(Error::DegreeOutOfRange { degree: d, max });
    }
    let mut out = Vec::new();
    for graph in enumerate_stable_graphs(g, n)? {
        if graph.num_edges() as u32 > d {
            continue;
        }
        let rest = d - graph.num_edges() as u32;
        let terms: BTreeSet<Term> = decorations_of_degree(&graph, rest)
            .iter()
            .map(|dec| Term::new(&graph, dec).expect("decoration fits"))
            .collect();
        out.extend(terms);
    }
    Ok(out)
}
