//! Metric amenability machinery on finite graph windows: r-boundaries,
//! Følner-set search, and the degree-0 bounded-coefficient homology
//! feasibility test.
//!
//! Graphs here are truncations of (usually infinite) uniformly discrete
//! spaces. The `rim` records which vertices sit on the truncation border,
//! so searches can distinguish "small boundary because the set is genuinely
//! Følner" from "small boundary because the window was cut there". Results
//! on a finite window are evidence about the infinite space, never proof;
//! callers tag them accordingly.

use crate::lp::{solve_lp, InstanceMeta, LpError, LpInstance, LpKind, LpStatus, Relation, Row, VarKind};
use crate::cert::Convention;
use crate::group::Group;
use crate::rat::Rat;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Debug, thiserror::Error)]
pub enum AmenError {
    #[error("bad graph input: {0}")]
    BadGraph(String),
    #[error("operation requires an acyclic connected graph")]
    NotATree,
    #[error("coefficient vector has {got} entries for {want} vertices")]
    SizeMismatch { got: usize, want: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Group(#[from] crate::group::GroupError),
}

/// An undirected graph with the integer path metric, plus a record of which
/// vertices lie on the truncation border of the ambient space.
#[derive(Clone, Debug)]
pub struct FiniteGraph {
    adjacency: Vec<Vec<usize>>,
    labels: Vec<String>,
    rim: BTreeSet<usize>,
}

impl FiniteGraph {
    pub fn new(
        adjacency: Vec<Vec<usize>>,
        labels: Vec<String>,
        rim: BTreeSet<usize>,
    ) -> Result<FiniteGraph, AmenError> {
        let n = adjacency.len();
        if labels.len() != n {
            return Err(AmenError::SizeMismatch { got: labels.len(), want: n });
        }
        if let Some(&v) = rim.iter().find(|&&v| v >= n) {
            return Err(AmenError::BadGraph(format!("rim vertex {} out of range", v)));
        }
        let mut adjacency = adjacency;
        for (v, nbrs) in adjacency.iter_mut().enumerate() {
            nbrs.sort_unstable();
            nbrs.dedup();
            if nbrs.iter().any(|&u| u >= n) {
                return Err(AmenError::BadGraph(format!("edge endpoint out of range at {}", v)));
            }
            if nbrs.binary_search(&v).is_ok() {
                return Err(AmenError::BadGraph(format!("self-loop at {}", v)));
            }
        }
        // Symmetrize check.
        for v in 0..n {
            for &u in &adjacency[v] {
                if adjacency[u].binary_search(&v).is_err() {
                    return Err(AmenError::BadGraph(format!(
                        "edge {}-{} is not symmetric",
                        v, u
                    )));
                }
            }
        }
        Ok(FiniteGraph { adjacency, labels, rim })
    }

    /// Path on `n` vertices; the two endpoints form the rim.
    pub fn path(n: usize) -> FiniteGraph {
        assert!(n >= 1);
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n.saturating_sub(1) {
            adjacency[i].push(i + 1);
            adjacency[i + 1].push(i);
        }
        let mut rim = BTreeSet::new();
        rim.insert(0);
        if n > 1 {
            rim.insert(n - 1);
        }
        FiniteGraph {
            adjacency,
            labels: (0..n).map(|i| i.to_string()).collect(),
            rim,
        }
    }

    /// w×h grid with 8-neighbor (king-move) adjacency, so metric balls are
    /// squares. The border cells form the rim.
    pub fn king_grid(w: usize, h: usize) -> FiniteGraph {
        assert!(w >= 1 && h >= 1);
        let idx = |x: usize, y: usize| y * w + x;
        let mut adjacency = vec![Vec::new(); w * h];
        let mut labels = vec![String::new(); w * h];
        let mut rim = BTreeSet::new();
        for y in 0..h {
            for x in 0..w {
                labels[idx(x, y)] = format!("{},{}", x, y);
                if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                    rim.insert(idx(x, y));
                }
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                            adjacency[idx(x, y)].push(idx(nx as usize, ny as usize));
                        }
                    }
                }
            }
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        FiniteGraph { adjacency, labels, rim }
    }

    /// The ball of the group's word metric, edges given by generator
    /// right-multiplication; the sphere of maximal radius is the rim.
    pub fn cayley_ball(group: &Group, radius: usize) -> Result<FiniteGraph, AmenError> {
        let ball = group.ball(radius, None)?;
        let index: BTreeMap<_, _> = ball.iter().cloned().zip(0..).collect();
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); ball.len()];
        for (i, x) in ball.iter().enumerate() {
            for gi in 0..group.generators().len() {
                let s = group.generator(gi);
                for y in [x.mul(&s), x.mul(&s.inv())] {
                    if let Some(&j) = index.get(&y) {
                        if j != i {
                            adjacency[i].push(j);
                        }
                    }
                }
            }
        }
        let rim = ball
            .iter()
            .enumerate()
            .filter(|(_, x)| x.len() == radius)
            .map(|(i, _)| i)
            .collect();
        FiniteGraph::new(
            adjacency,
            ball.iter().map(|x| x.render()).collect(),
            rim,
        )
    }

    /// Parses "u v" pairs, one edge per line; '#' starts a comment. Vertex
    /// ids are dense nonnegative integers. The rim is empty (the graph is
    /// taken as a complete space).
    pub fn from_edge_list(text: &str) -> Result<FiniteGraph, AmenError> {
        let mut edges = Vec::new();
        let mut max = None::<usize>;
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize, AmenError> {
                tok.ok_or_else(|| AmenError::BadGraph(format!("line {}: missing vertex id", ln + 1)))?
                    .parse()
                    .map_err(|_| AmenError::BadGraph(format!("line {}: bad vertex id", ln + 1)))
            };
            let u = parse(it.next())?;
            let v = parse(it.next())?;
            if it.next().is_some() {
                return Err(AmenError::BadGraph(format!("line {}: trailing tokens", ln + 1)));
            }
            if u == v {
                return Err(AmenError::BadGraph(format!("line {}: self-loop", ln + 1)));
            }
            max = Some(max.map_or(u.max(v), |m: usize| m.max(u.max(v))));
            edges.push((u, v));
        }
        let n = max.map_or(0, |m| m + 1);
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        FiniteGraph::new(
            adjacency,
            (0..n).map(|i| i.to_string()).collect(),
            BTreeSet::new(),
        )
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn rim(&self) -> &BTreeSet<usize> {
        &self.rim
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(|a| a.len()).max().unwrap_or(0)
    }

    /// Component id per vertex (ids are the smallest member).
    pub fn components(&self) -> Vec<usize> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let mut q = VecDeque::from([start]);
            comp[start] = start;
            while let Some(v) = q.pop_front() {
                for &u in &self.adjacency[v] {
                    if comp[u] == usize::MAX {
                        comp[u] = start;
                        q.push_back(u);
                    }
                }
            }
        }
        comp
    }

    /// BFS distances from a set; `None` means unreachable (distance +∞).
    pub fn distances_from_set(&self, set: &BTreeSet<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        let mut q = VecDeque::new();
        for &v in set {
            dist[v] = Some(0);
            q.push_back(v);
        }
        while let Some(v) = q.pop_front() {
            let d = dist[v].unwrap();
            for &u in &self.adjacency[v] {
                if dist[u].is_none() {
                    dist[u] = Some(d + 1);
                    q.push_back(u);
                }
            }
        }
        dist
    }

    pub fn distance(&self, u: usize, v: usize) -> Option<usize> {
        let mut set = BTreeSet::new();
        set.insert(u);
        self.distances_from_set(&set)[v]
    }
}

// ---------------------------------------------------------------------------
// r-boundaries and Følner search
// ---------------------------------------------------------------------------

/// The r-boundary: vertices strictly within `r` of the set *and* strictly
/// within `r` of its complement. Distance to an empty set is +∞, so the
/// boundary of the empty set and of the full vertex set is empty. For the
/// integer path metric `r = 1` always gives the empty set, which is why
/// searches default to `r = 2`.
pub fn boundary_set(g: &FiniteGraph, u: &BTreeSet<usize>, r: usize) -> BTreeSet<usize> {
    if u.is_empty() || u.len() == g.len() {
        return BTreeSet::new();
    }
    let complement: BTreeSet<usize> = (0..g.len()).filter(|v| !u.contains(v)).collect();
    let du = g.distances_from_set(u);
    let dc = g.distances_from_set(&complement);
    (0..g.len())
        .filter(|&v| du[v].is_some_and(|d| d < r) && dc[v].is_some_and(|d| d < r))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FolnerStatus {
    Found,
    NotFoundWithinCap,
}

impl Serialize for FolnerStatus {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            FolnerStatus::Found => "found",
            FolnerStatus::NotFoundWithinCap => "not-found-within-cap",
        })
    }
}

#[derive(Clone, Debug)]
pub struct FolnerResult {
    pub subset: BTreeSet<usize>,
    pub r: usize,
    pub ratio: Rat,
    pub status: FolnerStatus,
}

fn ratio_of(g: &FiniteGraph, u: &BTreeSet<usize>, r: usize) -> Rat {
    let b = boundary_set(g, u, r).len() as i64;
    Rat::new(b, u.len() as i64)
}

/// Searches for a subset with `|∂_r U|/|U| < δ`, size at most `cap`:
/// metric-ball seeds around the most central vertices, then
/// boundary-reducing single-vertex moves, plus an exhaustive
/// branch-and-bound over connected subsets when `cap ≤ 20`. Deterministic;
/// ties break toward the lexicographically smaller subset.
pub fn folner_search(g: &FiniteGraph, r: usize, delta: &Rat, cap: usize) -> FolnerResult {
    assert!(g.len() >= 2, "search needs a proper nonempty subset to exist");
    assert!(cap >= 1, "subset size cap must be positive");
    assert!(delta.is_positive(), "delta must be positive");
    let mut best: Option<(Rat, BTreeSet<usize>)> = None;
    fn consider(best: &mut Option<(Rat, BTreeSet<usize>)>, ratio: Rat, set: &BTreeSet<usize>) {
        let better = match best {
            None => true,
            Some((br, bu)) => ratio < *br || (ratio == *br && set.iter().lt(bu.iter())),
        };
        if better {
            *best = Some((ratio, set.clone()));
        }
    }

    // Ball seeds around the vertices deepest inside the window.
    let centers: Vec<usize> = {
        let depth: Vec<Option<usize>> = if g.rim().is_empty() {
            vec![Some(0); g.len()]
        } else {
            g.distances_from_set(g.rim())
        };
        let max_depth = depth.iter().flatten().max().copied().unwrap_or(0);
        (0..g.len())
            .filter(|&v| depth[v] == Some(max_depth))
            .take(3)
            .collect()
    };
    for &c in &centers {
        let mut seed = BTreeSet::new();
        seed.insert(c);
        let dist = g.distances_from_set(&seed);
        let mut by_dist: Vec<(usize, usize)> = (0..g.len())
            .filter_map(|v| dist[v].map(|d| (d, v)))
            .collect();
        by_dist.sort_unstable();
        let mut u = BTreeSet::new();
        let mut i = 0;
        while i < by_dist.len() && u.len() < cap && u.len() + 1 < g.len() {
            // Complete one metric sphere at a time.
            let d = by_dist[i].0;
            while i < by_dist.len() && by_dist[i].0 == d {
                u.insert(by_dist[i].1);
                i += 1;
                if u.len() >= cap || u.len() + 1 >= g.len() {
                    break;
                }
            }
            consider(&mut best, ratio_of(g, &u, r), &u);
        }
    }

    // Local refinement of the best seed: additions and pendant removals
    // that strictly reduce the ratio.
    if let Some((_, seed)) = best.clone() {
        let mut u = seed;
        for _ in 0..500 {
            let current = ratio_of(g, &u, r);
            let mut candidates: Vec<(Rat, bool, usize)> = Vec::new();
            if u.len() < cap && u.len() + 1 < g.len() {
                let mut adds: BTreeSet<usize> = BTreeSet::new();
                for &v in &u {
                    for &w in g.neighbors(v) {
                        if !u.contains(&w) {
                            adds.insert(w);
                        }
                    }
                }
                for w in adds {
                    let mut trial = u.clone();
                    trial.insert(w);
                    candidates.push((ratio_of(g, &trial, r), true, w));
                }
            }
            if u.len() > 1 {
                for &v in &u {
                    let in_deg = g.neighbors(v).iter().filter(|w| u.contains(w)).count();
                    if in_deg == 1 {
                        let mut trial = u.clone();
                        trial.remove(&v);
                        candidates.push((ratio_of(g, &trial, r), false, v));
                    }
                }
            }
            candidates.sort_by(|a, b| a.0.cmp(&b.0).then(a.2.cmp(&b.2)));
            match candidates.into_iter().next() {
                Some((ratio, add, v)) if ratio < current => {
                    if add {
                        u.insert(v);
                    } else {
                        u.remove(&v);
                    }
                    consider(&mut best, ratio, &u);
                }
                _ => break,
            }
        }
    }

    // Exhaustive search over connected subsets for small caps.
    if cap <= 20 {
        exhaustive_connected(g, r, cap, &mut best);
    }

    let (ratio, subset) = best.expect("at least one candidate subset was evaluated");
    let status = if &ratio < delta { FolnerStatus::Found } else { FolnerStatus::NotFoundWithinCap };
    FolnerResult { subset, r, ratio, status }
}

/// Enumerates connected subsets of size ≤ cap (each exactly once), updating
/// `best` in place. Specialized to the default boundary radius 2, where
/// `∂_2 U` is exactly the inner boundary plus the outer boundary and both
/// can be maintained incrementally; other radii fall back to a full
/// recount per subset and are only suitable for small graphs.
fn exhaustive_connected(
    g: &FiniteGraph,
    r: usize,
    cap: usize,
    best: &mut Option<(Rat, BTreeSet<usize>)>,
) {
    let n = g.len();
    if n == 0 {
        return;
    }
    // Rim-proximate roots first: the profitable subsets hug the
    // truncation, and finding them early powers the pruning bound.
    let mut roots: Vec<usize> = (0..n).collect();
    if !g.rim().is_empty() {
        let depth = g.distances_from_set(g.rim());
        roots.sort_by_key(|&v| (depth[v], v));
    }

    struct State<'a> {
        g: &'a FiniteGraph,
        cap: usize,
        fast: bool, // r == 2 incremental boundary
        r: usize,
        in_u: Vec<bool>,
        in_count: Vec<usize>, // neighbors inside U, maintained globally
        u: BTreeSet<usize>,
        outer: BTreeSet<usize>,
        inner_count: usize, // U-vertices with an outside neighbor
        banned: Vec<bool>,
        // Incumbent mirror for integer comparisons (values are ≤ |V|).
        best_b: u128,
        best_s: u128,
    }

    impl State<'_> {
        fn insert(&mut self, v: usize) {
            self.in_u[v] = true;
            self.u.insert(v);
            self.outer.remove(&v);
            if self.in_count[v] < self.g.neighbors(v).len() {
                self.inner_count += 1;
            }
            for &w in self.g.neighbors(v) {
                self.in_count[w] += 1;
                if self.in_u[w] {
                    if self.in_count[w] == self.g.neighbors(w).len() {
                        self.inner_count -= 1;
                    }
                } else {
                    self.outer.insert(w);
                }
            }
        }

        fn remove(&mut self, v: usize) {
            for &w in self.g.neighbors(v) {
                self.in_count[w] -= 1;
                if self.in_u[w] {
                    if self.in_count[w] + 1 == self.g.neighbors(w).len() {
                        self.inner_count += 1;
                    }
                } else if self.in_count[w] == 0 {
                    self.outer.remove(&w);
                }
            }
            self.in_u[v] = false;
            self.u.remove(&v);
            if self.in_count[v] < self.g.neighbors(v).len() {
                self.inner_count -= 1;
            }
            if self.in_count[v] > 0 {
                self.outer.insert(v);
            }
        }

        fn boundary_size(&self) -> u64 {
            if self.fast {
                (self.outer.len() + self.inner_count) as u64
            } else {
                boundary_set(self.g, &self.u, self.r).len() as u64
            }
        }

        fn grow(&mut self, best: &mut Option<(Rat, BTreeSet<usize>)>) {
            if self.u.len() < self.g.len() {
                let b = self.boundary_size() as u128;
                let s = self.u.len() as u128;
                let improves = b * self.best_s < self.best_b * s
                    || (b * self.best_s == self.best_b * s
                        && best
                            .as_ref()
                            .is_some_and(|(_, bu)| self.u.iter().lt(bu.iter())));
                if improves {
                    *best = Some((Rat::new(b as i64, s as i64), self.u.clone()));
                    self.best_b = b;
                    self.best_s = s;
                }
            }
            if self.u.len() >= self.cap {
                return;
            }
            // Each future addition removes at most one current outer
            // vertex, and for r ≥ 2 the boundary contains the outer set.
            if self.r >= 2 {
                let remaining = (self.cap - self.u.len()) as u128;
                let lb = (self.outer.len() as u128).saturating_sub(remaining);
                if lb > 0 && lb * self.best_s >= self.best_b * self.cap as u128 {
                    return;
                }
            }
            let frontier: Vec<usize> = self
                .outer
                .iter()
                .copied()
                .filter(|&v| !self.banned[v])
                .collect();
            let mut newly_banned = Vec::new();
            for v in frontier {
                self.insert(v);
                self.grow(best);
                self.remove(v);
                self.banned[v] = true;
                newly_banned.push(v);
            }
            for v in newly_banned {
                self.banned[v] = false;
            }
        }
    }

    let (best_b, best_s) = match best {
        Some((ratio, _)) => (
            u128::try_from(ratio.numer()).expect("small boundary count"),
            u128::try_from(ratio.denom()).expect("small subset size"),
        ),
        None => (u128::MAX, 1),
    };
    let mut st = State {
        g,
        cap,
        fast: r == 2,
        r,
        in_u: vec![false; n],
        in_count: vec![0; n],
        u: BTreeSet::new(),
        outer: BTreeSet::new(),
        inner_count: 0,
        banned: vec![false; n],
        best_b,
        best_s,
    };
    for &root in &roots {
        st.insert(root);
        st.grow(best);
        st.remove(root);
        st.banned[root] = true;
    }
}

/// Exact minimum of `|∂_r U|/|U|` over connected subsets of size ≤ cap of a
/// **tree**, by dynamic programming; an independent check for the searches.
/// Only `r = 2` boundaries are supported (the search default).
pub fn min_ratio_tree_dp(g: &FiniteGraph, cap: usize) -> Result<Rat, AmenError> {
    let n = g.len();
    let edges: usize = g.adjacency.iter().map(|a| a.len()).sum::<usize>() / 2;
    let comps = g.components();
    if n == 0 || edges != n - 1 || comps.iter().any(|&c| c != comps[0]) {
        return Err(AmenError::NotATree);
    }

    const INF: i64 = i64::MAX / 4;
    // For U contained in subtree(v) with v ∈ U: cost[s][pend] = settled
    // boundary count for |U| = s, where pend records whether v already has
    // a neighbor outside U among its children.
    fn solve(
        g: &FiniteGraph,
        v: usize,
        parent: Option<usize>,
        cap: usize,
        best: &mut Vec<i64>,
    ) -> Vec<[i64; 2]> {
        let mut cost: Vec<[i64; 2]> = vec![[INF; 2]; cap + 1];
        cost[1][0] = 0;
        for &c in g.neighbors(v) {
            if Some(c) == parent {
                continue;
            }
            let child = solve(g, c, Some(v), cap, best);
            let mut next = vec![[INF; 2]; cap + 1];
            for s in 1..=cap {
                for pend in 0..2 {
                    if cost[s][pend] == INF {
                        continue;
                    }
                    // Child excluded: it becomes an outer vertex, v pends.
                    let excl = cost[s][pend] + 1;
                    if excl < next[s][1] {
                        next[s][1] = excl;
                    }
                    // Child included with its subtree budget; the child's
                    // inner status is settled now (its parent v is in U).
                    for sc in 1..=cap.saturating_sub(s) {
                        for pc in 0..2 {
                            if child[sc][pc] == INF {
                                continue;
                            }
                            let val = cost[s][pend] + child[sc][pc] + pc as i64;
                            if val < next[s + sc][pend] {
                                next[s + sc][pend] = val;
                            }
                        }
                    }
                }
            }
            cost = next;
        }
        // v as the top vertex of U: settle v and its parent.
        for s in 1..=cap {
            for pend in 0..2 {
                if cost[s][pend] == INF {
                    continue;
                }
                let total = match parent {
                    // Parent exists: it is outer (+1) and makes v inner (+1).
                    Some(_) => cost[s][pend] + 2,
                    None => cost[s][pend] + pend as i64,
                };
                if total < best[s] {
                    best[s] = total;
                }
            }
        }
        cost
    }

    let mut best = vec![INF; cap + 1];
    solve(g, 0, None, cap, &mut best);
    let mut out: Option<Rat> = None;
    for s in 1..=cap.min(n.saturating_sub(1)) {
        if best[s] < INF {
            let r = Rat::new(best[s], s as i64);
            if out.as_ref().map_or(true, |o| &r < o) {
                out = Some(r);
            }
        }
    }
    out.ok_or(AmenError::NotATree)
}

// ---------------------------------------------------------------------------
// Degree-0 bounded homology feasibility
// ---------------------------------------------------------------------------

/// How the window truncation is treated. Under `Closed` every vertex keeps
/// its full equation and no mass leaves. Under `Open`, cells reaching over
/// the rim may carry mass out, which is modeled by requiring the boundary
/// identity only on the interior `{v : d(v, rim) ≥ R − 1}`. The two
/// policies bracket the untruncated problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryPolicy {
    Open,
    Closed,
}

/// A degree-1 chain: rational coefficients on vertex pairs at distance
/// `1 ≤ d < R`, all bounded by `K` in absolute value.
#[derive(Clone, Debug)]
pub struct UfChain {
    pub cells: Vec<(usize, usize)>,
    pub coeffs: Vec<Rat>,
    pub r: usize,
    pub k: Rat,
}

#[derive(Clone, Debug)]
pub struct UfOutcome {
    pub feasible: bool,
    pub witness: Option<UfChain>,
    /// The vertices where the boundary identity was enforced.
    pub interior: BTreeSet<usize>,
}

/// All unordered pairs with `1 ≤ d(u,v) < R`.
pub fn enumerate_cells(g: &FiniteGraph, r: usize) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    for u in 0..g.len() {
        let mut set = BTreeSet::new();
        set.insert(u);
        let dist = g.distances_from_set(&set);
        for v in (u + 1)..g.len() {
            if dist[v].is_some_and(|d| d >= 1 && d < r) {
                cells.push((u, v));
            }
        }
    }
    cells
}

/// `(∂ψ)(v) = Σ_{cells (x,y)} a·([y] − [x])(v)`, recomputed from scratch.
pub fn boundary_of_chain(g: &FiniteGraph, chain: &UfChain) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); g.len()];
    for ((u, v), a) in chain.cells.iter().zip(&chain.coeffs) {
        out[*v] += a.clone();
        out[*u] -= a.clone();
    }
    out
}

/// The vertex set where the boundary identity is enforced for a policy.
pub fn interior_vertices(g: &FiniteGraph, r: usize, policy: BoundaryPolicy) -> BTreeSet<usize> {
    match policy {
        BoundaryPolicy::Closed => (0..g.len()).collect(),
        BoundaryPolicy::Open => {
            if g.rim().is_empty() {
                return (0..g.len()).collect();
            }
            let d = g.distances_from_set(g.rim());
            (0..g.len())
                .filter(|&v| d[v].map_or(true, |dv| dv + 1 >= r))
                .collect()
        }
    }
}

/// Decides whether some degree-1 chain ψ with propagation < R and
/// coefficients bounded by K satisfies `∂ψ = φ` on the policy's interior;
/// exact rational feasibility via the LP first phase. The witness, when
/// one exists, is returned and can be rechecked with `boundary_of_chain`.
pub fn uf_boundary_solve(
    g: &FiniteGraph,
    phi: &[Rat],
    r: usize,
    k: &Rat,
    policy: BoundaryPolicy,
) -> Result<UfOutcome, AmenError> {
    if phi.len() != g.len() {
        return Err(AmenError::SizeMismatch { got: phi.len(), want: g.len() });
    }
    assert!(k.is_positive(), "coefficient bound must be positive");
    let cells = enumerate_cells(g, r);
    let interior = interior_vertices(g, r, policy);

    // Variable u_i = a_i + K ∈ [0, 2K] per cell; equations are shifted by
    // the constant column sums.
    let two_k = &Rat::from_int(2) * k;
    let mut names = Vec::with_capacity(cells.len());
    let mut kinds = Vec::with_capacity(cells.len());
    for (i, _) in cells.iter().enumerate() {
        names.push(format!("u_{}", i));
        kinds.push(VarKind::Slack);
    }
    let mut rows = Vec::new();
    for i in 0..cells.len() {
        rows.push(Row {
            coeffs: vec![(i, Rat::one())],
            rel: Relation::Le,
            rhs: two_k.clone(),
        });
    }
    // Signed incidence per interior vertex: Σ ±(u_i − K) = φ(v).
    let mut incident: BTreeMap<usize, Vec<(usize, bool)>> = BTreeMap::new();
    for (i, (u, v)) in cells.iter().enumerate() {
        incident.entry(*v).or_default().push((i, true));
        incident.entry(*u).or_default().push((i, false));
    }
    for &v in &interior {
        let inc = incident.get(&v).map(Vec::as_slice).unwrap_or(&[]);
        let mut shift = Rat::zero(); // Σ ± (−K)
        let mut coeffs = Vec::with_capacity(inc.len());
        for &(i, positive) in inc {
            if positive {
                coeffs.push((i, Rat::one()));
                shift -= k.clone();
            } else {
                coeffs.push((i, -Rat::one()));
                shift += k.clone();
            }
        }
        rows.push(Row {
            coeffs,
            rel: Relation::Eq,
            rhs: &phi[v] - &shift,
        });
    }

    let inst = LpInstance {
        names,
        kinds,
        rows,
        objective: Vec::new(),
        meta: InstanceMeta {
            kind: LpKind::Custom,
            window: 0,
            s: 0,
            r: r as u32,
            convention: Convention::ReiterCentered,
        },
        legend: Vec::new(),
    };
    let sol = solve_lp(&inst);
    match sol.status {
        LpStatus::Optimal => {
            let coeffs: Vec<Rat> = (0..cells.len())
                .map(|i| &sol.assignment[i] - k)
                .collect();
            let witness = UfChain { cells, coeffs, r, k: k.clone() };
            debug_assert!(witness.coeffs.iter().all(|c| &c.abs() <= k));
            Ok(UfOutcome { feasible: true, witness: Some(witness), interior })
        }
        LpStatus::Infeasible => Ok(UfOutcome { feasible: false, witness: None, interior }),
        status => Err(AmenError::Lp(LpError::SolveFailed { status })),
    }
}
