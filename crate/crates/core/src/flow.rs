//! Information-flow model of a merge conversion.
//!
//! Each initial stripe `i` has a source `s_i` feeding its nodes (capacity
//! `α`). Every initial node sends its download `β(x)` to a coordinator, which
//! feeds each new node (capacity `α`). A sink attaches to `k_F` final nodes
//! (unchanged or new) with capacity `α` each. Unchanged nodes appear once,
//! serving as both initial and final node. Any valid conversion must let
//! every source push `k_I·α` to every such sink.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use itertools::Itertools;

use crate::base_convertible::MergeParams;
use crate::error::{Error, Result};
use crate::trace::{ConversionTrace, NodeId};

/// Node roles of one conversion: per initial stripe, how many of its nodes
/// stay. Within a stripe, nodes `0..unchanged` stay and the rest retire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    k_initial: usize,
    n_initial: usize,
    unchanged: Vec<usize>,
    new_nodes: usize,
    final_k: usize,
}

impl Layout {
    pub fn new(
        k_initial: usize,
        n_initial: usize,
        unchanged: Vec<usize>,
        new_nodes: usize,
        final_k: usize,
    ) -> Result<Layout> {
        if unchanged.is_empty() || k_initial == 0 || n_initial < k_initial {
            return Err(Error::InvalidParams(format!(
                "need at least one stripe and k_initial <= n_initial, got {k_initial} and {n_initial}"
            )));
        }
        if let Some(&u) = unchanged.iter().find(|&&u| u > n_initial) {
            return Err(Error::InvalidParams(format!(
                "{u} unchanged nodes exceed stripe size {n_initial}"
            )));
        }
        let layout = Layout {
            k_initial,
            n_initial,
            unchanged,
            new_nodes,
            final_k,
        };
        if final_k == 0 || layout.final_n() < final_k {
            return Err(Error::InvalidParams(format!(
                "final stripe has {} nodes, fewer than k = {final_k}",
                layout.final_n()
            )));
        }
        Ok(layout)
    }

    /// Every stripe keeps its `kI` data nodes; `rF` new nodes.
    pub fn stable(params: &MergeParams) -> Layout {
        Layout::new(
            params.k_initial,
            params.n_initial(),
            vec![params.k_initial; params.sigma],
            params.r_final,
            params.k_final(),
        )
        .expect("merge parameters give a valid layout")
    }

    /// A single stripe re-encoded from `[kI+rI, kI]` to `[kI+rF, kI]`,
    /// keeping as many nodes as possible.
    pub fn equal_k(k_initial: usize, r_initial: usize, r_final: usize) -> Result<Layout> {
        let (ni, nf) = (k_initial + r_initial, k_initial + r_final);
        let kept = ni.min(nf);
        Layout::new(k_initial, ni, vec![kept], nf - kept, k_initial)
    }

    pub fn k_initial(&self) -> usize {
        self.k_initial
    }

    pub fn n_initial(&self) -> usize {
        self.n_initial
    }

    pub fn stripes(&self) -> usize {
        self.unchanged.len()
    }

    pub fn unchanged(&self, stripe: usize) -> usize {
        self.unchanged[stripe]
    }

    pub fn retired(&self, stripe: usize) -> usize {
        self.n_initial - self.unchanged[stripe]
    }

    pub fn new_nodes(&self) -> usize {
        self.new_nodes
    }

    pub fn final_k(&self) -> usize {
        self.final_k
    }

    pub fn final_n(&self) -> usize {
        self.unchanged.iter().sum::<usize>() + self.new_nodes
    }

    fn check_downloads(&self, alpha: usize, downloads: &[Vec<usize>]) -> Result<()> {
        if downloads.len() != self.stripes() || downloads.iter().any(|d| d.len() != self.n_initial) {
            return Err(Error::DimensionMismatch(format!(
                "downloads must be {} stripes of {} nodes",
                self.stripes(),
                self.n_initial
            )));
        }
        if downloads.iter().flatten().any(|&b| b > alpha) {
            return Err(Error::InvalidParams(format!("a download exceeds alpha = {alpha}")));
        }
        Ok(())
    }
}

/// Per-node downloads from a conversion trace, `[stripe][node]`.
pub fn downloads_from_trace(trace: &ConversionTrace, layout: &Layout) -> Vec<Vec<usize>> {
    let mut downloads = vec![vec![0; layout.n_initial]; layout.stripes()];
    for r in &trace.records {
        if let NodeId::Initial { stripe, node } = r.id {
            if stripe < downloads.len() && node < layout.n_initial {
                downloads[stripe][node] = r.read;
            }
        }
    }
    downloads
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vertex {
    Source(usize),
    Unchanged { stripe: usize, node: usize },
    Retired { stripe: usize, node: usize },
    New(usize),
    Coordinator,
    Sink,
}

impl Vertex {
    fn name(&self) -> String {
        match self {
            Vertex::Source(i) => format!("src{i}"),
            Vertex::Unchanged { stripe, node } | Vertex::Retired { stripe, node } => {
                format!("s{stripe}n{node}")
            }
            Vertex::New(j) => format!("new{j}"),
            Vertex::Coordinator => "coord".into(),
            Vertex::Sink => "sink".into(),
        }
    }

    pub fn is_storage(&self) -> bool {
        matches!(
            self,
            Vertex::Unchanged { .. } | Vertex::Retired { .. } | Vertex::New(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub capacity: u64,
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    edges: Vec<Edge>,
}

impl FlowGraph {
    fn add_vertex(&mut self, v: Vertex) -> usize {
        let id = self.vertices.len();
        self.vertices.push(v);
        self.index.insert(v, id);
        id
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, v: Vertex) -> Option<usize> {
        self.index.get(&v).copied()
    }

    pub fn storage_vertex_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.is_storage()).count()
    }

    /// Total capacity into a vertex.
    pub fn in_capacity(&self, v: Vertex) -> u64 {
        let Some(id) = self.vertex(v) else { return 0 };
        self.edges.iter().filter(|e| e.to == id).map(|e| e.capacity).sum()
    }

    /// One `from to capacity` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            let _ = writeln!(
                out,
                "{} {} {}",
                self.vertices[e.from].name(),
                self.vertices[e.to].name(),
                e.capacity
            );
        }
        out
    }
}

/// Builds the flow graph for one sink. `sink_pick` indexes final nodes:
/// unchanged nodes stripe by stripe, then new nodes.
pub fn build_conversion_graph(
    layout: &Layout,
    alpha: usize,
    downloads: &[Vec<usize>],
    sink_pick: &[usize],
) -> Result<FlowGraph> {
    layout.check_downloads(alpha, downloads)?;
    if sink_pick.len() != layout.final_k {
        return Err(Error::LengthMismatch {
            expected: layout.final_k,
            got: sink_pick.len(),
        });
    }
    let a = alpha as u64;
    let mut g = FlowGraph {
        vertices: Vec::new(),
        index: HashMap::new(),
        edges: Vec::new(),
    };
    let sources: Vec<usize> = (0..layout.stripes()).map(|i| g.add_vertex(Vertex::Source(i))).collect();
    let mut final_nodes = Vec::with_capacity(layout.final_n());
    let mut initial_nodes = Vec::new();
    for stripe in 0..layout.stripes() {
        for node in 0..layout.n_initial {
            let v = if node < layout.unchanged[stripe] {
                Vertex::Unchanged { stripe, node }
            } else {
                Vertex::Retired { stripe, node }
            };
            let id = g.add_vertex(v);
            if matches!(v, Vertex::Unchanged { .. }) {
                final_nodes.push(id);
            }
            initial_nodes.push((stripe, node, id));
        }
    }
    let new_ids: Vec<usize> = (0..layout.new_nodes).map(|j| g.add_vertex(Vertex::New(j))).collect();
    final_nodes.extend(&new_ids);
    let coord = g.add_vertex(Vertex::Coordinator);
    let sink = g.add_vertex(Vertex::Sink);

    for &(stripe, node, id) in &initial_nodes {
        g.edges.push(Edge {
            from: sources[stripe],
            to: id,
            capacity: a,
        });
        g.edges.push(Edge {
            from: id,
            to: coord,
            capacity: downloads[stripe][node] as u64,
        });
    }
    for &id in &new_ids {
        g.edges.push(Edge {
            from: coord,
            to: id,
            capacity: a,
        });
    }
    let mut seen = vec![false; final_nodes.len()];
    for &p in sink_pick {
        if p >= final_nodes.len() {
            return Err(Error::IndexOutOfRange {
                index: p,
                limit: final_nodes.len(),
            });
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::DuplicateIndex(p));
        }
        g.edges.push(Edge {
            from: final_nodes[p],
            to: sink,
            capacity: a,
        });
    }
    Ok(g)
}

/// Maximum flow from `source` to `sink` (Dinic's algorithm).
pub fn max_flow(graph: &FlowGraph, source: usize, sink: usize) -> u64 {
    Dinic::new(graph).run(source, sink)
}

struct Dinic {
    /// Residual arcs: (to, capacity); arc `e ^ 1` is the reverse of `e`.
    arcs: Vec<(usize, u64)>,
    adj: Vec<Vec<usize>>,
    level: Vec<i32>,
    next: Vec<usize>,
}

impl Dinic {
    fn new(graph: &FlowGraph) -> Dinic {
        let n = graph.vertices.len();
        let mut d = Dinic {
            arcs: Vec::with_capacity(graph.edges.len() * 2),
            adj: vec![Vec::new(); n],
            level: vec![-1; n],
            next: vec![0; n],
        };
        for e in &graph.edges {
            d.adj[e.from].push(d.arcs.len());
            d.arcs.push((e.to, e.capacity));
            d.adj[e.to].push(d.arcs.len());
            d.arcs.push((e.from, 0));
        }
        d
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(-1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let (to, cap) = self.arcs[e];
                if cap > 0 && self.level[to] < 0 {
                    self.level[to] = self.level[v] + 1;
                    queue.push_back(to);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, v: usize, t: usize, pushed: u64) -> u64 {
        if v == t {
            return pushed;
        }
        while self.next[v] < self.adj[v].len() {
            let e = self.adj[v][self.next[v]];
            let (to, cap) = self.arcs[e];
            if cap > 0 && self.level[to] == self.level[v] + 1 {
                let got = self.dfs(to, t, pushed.min(cap));
                if got > 0 {
                    self.arcs[e].1 -= got;
                    self.arcs[e ^ 1].1 += got;
                    return got;
                }
            }
            self.next[v] += 1;
        }
        0
    }

    fn run(&mut self, s: usize, t: usize) -> u64 {
        if s == t {
            return 0;
        }
        let mut flow = 0;
        while self.bfs(s, t) {
            self.next.fill(0);
            loop {
                let f = self.dfs(s, t, u64::MAX);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
        flow
    }
}

/// Whether source `stripe` can deliver `kI·α` to every sink.
fn source_feasible(layout: &Layout, alpha: usize, downloads: &[Vec<usize>], stripe: usize) -> Result<bool> {
    let need = (layout.k_initial * alpha) as u64;
    for pick in (0..layout.final_n()).combinations(layout.final_k) {
        let g = build_conversion_graph(layout, alpha, downloads, &pick)?;
        let s = g.vertex(Vertex::Source(stripe)).expect("source exists");
        let t = g.vertex(Vertex::Sink).expect("sink exists");
        if max_flow(&g, s, t) < need {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks the flow condition for every source and every choice of `kF`
/// final nodes.
pub fn verify_feasibility(layout: &Layout, alpha: usize, downloads: &[Vec<usize>]) -> Result<bool> {
    layout.check_downloads(alpha, downloads)?;
    for stripe in 0..layout.stripes() {
        if !source_feasible(layout, alpha, downloads, stripe)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchOutcome {
    /// Smallest feasible total download plus `|N|·α` writes.
    pub gamma: usize,
    pub downloads: Vec<Vec<usize>>,
    pub candidates_checked: usize,
}

/// Exhaustive search for the cheapest download vector passing
/// [`verify_feasibility`], with integral downloads in `0..=α`.
///
/// Nodes of the same role within a stripe are interchangeable, as are
/// stripes with the same layout, so only one representative per orbit is
/// tried. `budget` caps the number of representatives enumerated.
pub fn min_bandwidth_search(layout: &Layout, alpha: usize, budget: usize) -> Result<SearchOutcome> {
    let stripe_candidates: Vec<Vec<Vec<usize>>> = (0..layout.stripes())
        .map(|s| stripe_representatives(layout.unchanged(s), layout.retired(s), alpha))
        .collect();
    let identical = layout.unchanged.iter().all_equal();

    let mut combos: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut choice = vec![0usize; layout.stripes()];
    enumerate_combos(&stripe_candidates, identical, 0, &mut choice, &mut combos, budget)?;
    combos.sort_by_key(|(total, _)| *total);

    // Sources only reach their own stripe's nodes, so each stripe's
    // candidate can be judged on its own and the verdict reused.
    let mut verdicts: HashMap<(usize, usize), bool> = HashMap::new();
    let zero: Vec<Vec<usize>> = (0..layout.stripes()).map(|_| vec![0; layout.n_initial]).collect();
    for (checked, (total, combo)) in combos.iter().enumerate() {
        let mut ok = true;
        for (stripe, &c) in combo.iter().enumerate() {
            let verdict = match verdicts.get(&(stripe, c)) {
                Some(&v) => v,
                None => {
                    let mut downloads = zero.clone();
                    downloads[stripe] = stripe_candidates[stripe][c].clone();
                    let v = source_feasible(layout, alpha, &downloads, stripe)?;
                    verdicts.insert((stripe, c), v);
                    v
                }
            };
            if !verdict {
                ok = false;
                break;
            }
        }
        if ok {
            let downloads: Vec<Vec<usize>> = combo
                .iter()
                .enumerate()
                .map(|(s, &c)| stripe_candidates[s][c].clone())
                .collect();
            return Ok(SearchOutcome {
                gamma: total + layout.new_nodes * alpha,
                downloads,
                candidates_checked: checked + 1,
            });
        }
    }
    Err(Error::Infeasible("no download vector satisfies every sink".into()))
}

/// Download vectors for one stripe, non-increasing within each role.
fn stripe_representatives(unchanged: usize, retired: usize, alpha: usize) -> Vec<Vec<usize>> {
    let sorted = |len: usize| -> Vec<Vec<usize>> {
        if len == 0 {
            return vec![Vec::new()];
        }
        (0..=alpha)
            .combinations_with_replacement(len)
            .map(|mut v| {
                v.reverse();
                v
            })
            .collect()
    };
    let retired_options = sorted(retired);
    sorted(unchanged)
        .into_iter()
        .cartesian_product(retired_options)
        .map(|(u, r)| u.into_iter().chain(r).collect())
        .collect()
}

fn enumerate_combos(
    candidates: &[Vec<Vec<usize>>],
    identical: bool,
    stripe: usize,
    choice: &mut Vec<usize>,
    out: &mut Vec<(usize, Vec<usize>)>,
    budget: usize,
) -> Result<()> {
    if stripe == candidates.len() {
        if out.len() >= budget {
            return Err(Error::BudgetExceeded(budget));
        }
        let total = choice
            .iter()
            .enumerate()
            .map(|(s, &c)| candidates[s][c].iter().sum::<usize>())
            .sum();
        out.push((total, choice.clone()));
        return Ok(());
    }
    let start = if identical && stripe > 0 { choice[stripe - 1] } else { 0 };
    for c in start..candidates[stripe].len() {
        choice[stripe] = c;
        enumerate_combos(candidates, identical, stripe + 1, choice, out, budget)?;
    }
    Ok(())
}
