//! Moving certificates between spaces.
//!
//! The constructions here connect group actions on trees and graphs to
//! certificates on coset spaces: chain families on ranked trees, induction
//! along an orbit map, pushforward along equivariant projections, the
//! centering flip, lifting through quotients, and the finite-index uniform
//! certificate. Each operation preserves exact arithmetic, and the
//! defining identities are checked entry-by-entry in the tests.

use crate::amenability::{AmenError, FiniteGraph};
use crate::cert::{l1_rat, Convention, Entries, ProbCertificate, Support};
use crate::coset::{BuildOptions, CosetError, CosetSpace, Subgroup};
use crate::group::{Element, Group, GroupError, GroupKind, Letter};
use crate::rat::Rat;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, thiserror::Error)]
pub enum TransferError {
    #[error("vertex {vertex} has {found} nearer neighbors; ranking toward the end is ambiguous")]
    AmbiguousRanking { vertex: usize, found: usize },
    #[error("no length-{need} parent chain exists from vertex {vertex}")]
    MissingChain { vertex: usize, need: usize },
    #[error("the action leaves the enumerated fragment at '{element}'")]
    OutOfFragment { element: String },
    #[error("bad space description: {0}")]
    BadSpace(String),
    #[error("certificate domain is not inverse-closed: '{element}' has no inverse entry")]
    DomainNotInverseClosed { element: String },
    #[error("generator images do not define a homomorphism: {0}")]
    NotHomomorphic(String),
    #[error("quotient certificate has no entry at '{element}'")]
    MissingQuotientEntry { element: String },
    #[error("projection is not equivariant at vertex {vertex} under generator {generator}")]
    NotEquivariant { vertex: usize, generator: String },
    #[error("quotient vertex map is not injective (kernel is larger than the declared subgroup)")]
    VertexCollision,
    #[error("quotient vertex '{key}' has no preimage in the window")]
    MissingPreimage { key: String },
    #[error("coset family is not fully enumerated; the space must be finite and closed under the generators")]
    NotFiniteIndex,
    #[error("builder supports exactly two free or cyclic factors, got '{0}'")]
    UnsupportedFactors(String),
    #[error(transparent)]
    Coset(#[from] CosetError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Cert(#[from] crate::cert::CertError),
    #[error(transparent)]
    Graph(#[from] AmenError),
}

// ---------------------------------------------------------------------------
// Space actions
// ---------------------------------------------------------------------------

/// A finite fragment of a space with a partial action of a group on it:
/// the graph carries the metric, the tables carry the action one letter at
/// a time, and the basepoint anchors orbit maps. Vertices the action would
/// push outside the fragment simply have no table entry.
#[derive(Clone, Debug)]
pub struct SpaceAction {
    graph: FiniteGraph,
    basepoint: usize,
    orbit_reps: Vec<(usize, String)>,
    /// `tables[2i]` is the action of generator `i`, `tables[2i+1]` its inverse.
    tables: Vec<BTreeMap<usize, usize>>,
}

impl SpaceAction {
    pub fn new(
        graph: FiniteGraph,
        basepoint: usize,
        orbit_reps: Vec<(usize, String)>,
        tables: Vec<BTreeMap<usize, usize>>,
    ) -> Result<SpaceAction, TransferError> {
        let n = graph.len();
        if basepoint >= n {
            return Err(TransferError::BadSpace("basepoint out of range".into()));
        }
        if tables.len() % 2 != 0 {
            return Err(TransferError::BadSpace("odd table count".into()));
        }
        for t in &tables {
            for (&a, &b) in t {
                if a >= n || b >= n {
                    return Err(TransferError::BadSpace("action endpoint out of range".into()));
                }
            }
        }
        // Each letter acts injectively and the tables are mutually inverse
        // where both are present.
        for i in (0..tables.len()).step_by(2) {
            for (&a, &b) in &tables[i] {
                if let Some(&back) = tables[i + 1].get(&b) {
                    if back != a {
                        return Err(TransferError::BadSpace(format!(
                            "tables for generator {} are not mutually inverse at {}",
                            i / 2,
                            a
                        )));
                    }
                }
            }
        }
        Ok(SpaceAction { graph, basepoint, orbit_reps, tables })
    }

    /// The orbit graph of a coset space under its own group: one table per
    /// generator letter, edges wherever a letter moves a vertex.
    pub fn from_cosets(cs: &CosetSpace) -> Result<SpaceAction, TransferError> {
        let group = cs.ambient().clone();
        let n_gens = group.generators().len();
        let mut tables = vec![BTreeMap::new(); 2 * n_gens];
        let mut adjacency = vec![BTreeSet::new(); cs.len()];
        for i in 0..n_gens {
            let s = group.generator(i);
            for v in 0..cs.len() {
                if let Ok(w) = cs.act(&s, v) {
                    tables[2 * i].insert(v, w);
                    if w != v {
                        adjacency[v].insert(w);
                        adjacency[w].insert(v);
                    }
                }
                if let Ok(w) = cs.act(&s.inv(), v) {
                    tables[2 * i + 1].insert(v, w);
                    if w != v {
                        adjacency[v].insert(w);
                        adjacency[w].insert(v);
                    }
                }
            }
        }
        let rim = (0..cs.len())
            .filter(|&v| (0..2 * n_gens).any(|t| !tables[t].contains_key(&v)))
            .collect();
        let graph = FiniteGraph::new(
            adjacency.into_iter().map(|s| s.into_iter().collect()).collect(),
            (0..cs.len())
                .map(|v| format!("({},{})", cs.component(v), cs.transporter(v).render()))
                .collect(),
            rim,
        )?;
        let orbit_reps = cs
            .representatives()
            .iter()
            .enumerate()
            .map(|(c, &v)| (v, cs.family()[c].label.clone()))
            .collect();
        SpaceAction::new(graph, cs.representatives()[0], orbit_reps, tables)
    }

    /// Parses the structured-text description: `vertices N`, `basepoint V`,
    /// then `edge U V`, `act <gen> U V`, and optional `orbit V LABEL` /
    /// `rim V` lines. '#' starts a comment.
    pub fn from_text(group: &Group, text: &str) -> Result<SpaceAction, TransferError> {
        let mut n: Option<usize> = None;
        let mut basepoint: Option<usize> = None;
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut acts: Vec<(usize, usize, usize)> = Vec::new();
        let mut orbit_reps = Vec::new();
        let mut rim = BTreeSet::new();
        let gen_index: BTreeMap<&str, usize> = group
            .generators()
            .iter()
            .enumerate()
            .map(|(i, g)| (g.symbol.as_str(), i))
            .collect();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| TransferError::BadSpace(format!("line {}: {}", ln + 1, msg));
            let toks: Vec<&str> = line.split_whitespace().collect();
            let num = |idx: usize, what: &str| -> Result<usize, TransferError> {
                toks.get(idx)
                    .ok_or_else(|| bad(&format!("missing {}", what)))?
                    .parse()
                    .map_err(|_| bad(&format!("bad {}", what)))
            };
            let arity = match toks[0] {
                "vertices" => {
                    n = Some(num(1, "vertex count")?);
                    2
                }
                "basepoint" => {
                    basepoint = Some(num(1, "vertex id")?);
                    2
                }
                "edge" => {
                    edges.push((num(1, "vertex id")?, num(2, "vertex id")?));
                    3
                }
                "act" => {
                    let name = *toks.get(1).ok_or_else(|| bad("missing generator name"))?;
                    let &g = gen_index
                        .get(name)
                        .ok_or_else(|| bad(&format!("unknown generator '{}'", name)))?;
                    acts.push((g, num(2, "vertex id")?, num(3, "vertex id")?));
                    4
                }
                "orbit" => {
                    let v = num(1, "vertex id")?;
                    let label = toks.get(2).ok_or_else(|| bad("missing orbit label"))?;
                    orbit_reps.push((v, label.to_string()));
                    3
                }
                "rim" => {
                    rim.insert(num(1, "vertex id")?);
                    2
                }
                other => return Err(bad(&format!("unknown directive '{}'", other))),
            };
            if toks.len() != arity {
                return Err(bad("trailing tokens"));
            }
        }
        let n = n.ok_or_else(|| TransferError::BadSpace("missing 'vertices' line".into()))?;
        let basepoint =
            basepoint.ok_or_else(|| TransferError::BadSpace("missing 'basepoint' line".into()))?;
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(TransferError::BadSpace("edge endpoint out of range".into()));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let graph = FiniteGraph::new(
            adjacency,
            (0..n).map(|i| i.to_string()).collect(),
            rim,
        )?;
        let mut tables = vec![BTreeMap::new(); 2 * group.generators().len()];
        for (g, u, v) in acts {
            if tables[2 * g].insert(u, v).is_some_and(|old| old != v) {
                return Err(TransferError::BadSpace(format!(
                    "conflicting action of generator {} at vertex {}",
                    g, u
                )));
            }
            if tables[2 * g + 1].insert(v, u).is_some_and(|old| old != u) {
                return Err(TransferError::BadSpace(format!(
                    "generator {} is not injective at vertex {}",
                    g, v
                )));
            }
        }
        SpaceAction::new(graph, basepoint, orbit_reps, tables)
    }

    pub fn graph(&self) -> &FiniteGraph {
        &self.graph
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    pub fn orbit_reps(&self) -> &[(usize, String)] {
        &self.orbit_reps
    }

    fn act_letter(&self, l: Letter, v: usize) -> Option<usize> {
        let idx = 2 * (l.gen as usize) + usize::from(l.inv);
        self.tables.get(idx)?.get(&v).copied()
    }

    /// Applies a group element letter by letter (rightmost letter first);
    /// `None` when any intermediate image leaves the fragment.
    pub fn act(&self, g: &Element, v: usize) -> Option<usize> {
        let mut cur = v;
        for &l in g.word().iter().rev() {
            cur = self.act_letter(l, cur)?;
        }
        Some(cur)
    }

    /// μ ↦ g·μ on measures over the fragment, requiring the action to be
    /// defined on the whole support.
    pub fn push(&self, g: &Element, mu: &Support<Rat>) -> Result<Support<Rat>, TransferError> {
        let mut out: Support<Rat> = BTreeMap::new();
        for (&k, mass) in mu {
            let target = self.act(g, k).ok_or_else(|| TransferError::OutOfFragment {
                element: format!("{}·{}", g.render(), self.graph.label(k)),
            })?;
            *out.entry(target).or_insert_with(Rat::zero) += mass.clone();
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Ranked trees and chain families
// ---------------------------------------------------------------------------

/// Parent pointers toward the end determined by a ray: ray vertices point
/// to their successor, every other vertex to its unique nearer neighbor.
/// Ambiguity (several nearer neighbors, as on cycles) is an error.
pub fn tree_ranking(
    space: &SpaceAction,
    ray: &[usize],
) -> Result<Vec<Option<usize>>, TransferError> {
    let g = space.graph();
    let ray_set: BTreeSet<usize> = ray.iter().copied().collect();
    let dist = g.distances_from_set(&ray_set);
    let mut parent: Vec<Option<usize>> = vec![None; g.len()];
    for (i, &v) in ray.iter().enumerate() {
        parent[v] = ray.get(i + 1).copied();
    }
    for v in 0..g.len() {
        if ray_set.contains(&v) {
            continue;
        }
        let Some(dv) = dist[v] else { continue };
        let nearer: Vec<usize> = g
            .neighbors(v)
            .iter()
            .copied()
            .filter(|&u| dist[u] == Some(dv - 1))
            .collect();
        match nearer.len() {
            1 => parent[v] = Some(nearer[0]),
            found => return Err(TransferError::AmbiguousRanking { vertex: v, found }),
        }
    }
    Ok(parent)
}

/// A family member: each vertex carries a probability measure supported
/// within a bounded radius of itself.
#[derive(Clone, Debug)]
pub struct PropAFamily {
    pub n: u32,
    pub xi: BTreeMap<usize, Support<Rat>>,
}

/// ξ_n(x) = uniform measure on the chain `[x, parent(x), …, parentⁿ⁻¹(x)]`,
/// defined wherever the chain stays inside the fragment.
pub fn tree_family(
    space: &SpaceAction,
    ray: &[usize],
    n: u32,
) -> Result<PropAFamily, TransferError> {
    assert!(n >= 1, "chain length must be positive");
    let parent = tree_ranking(space, ray)?;
    let weight = Rat::new(1, n as i64);
    let mut xi = BTreeMap::new();
    'vertex: for x in 0..space.graph().len() {
        let mut chain = Vec::with_capacity(n as usize);
        let mut cur = x;
        chain.push(cur);
        for _ in 1..n {
            match parent[cur] {
                Some(p) => {
                    cur = p;
                    chain.push(cur);
                }
                None => continue 'vertex,
            }
        }
        let mut mu: Support<Rat> = BTreeMap::new();
        for k in chain {
            *mu.entry(k).or_insert_with(Rat::zero) += weight.clone();
        }
        xi.insert(x, mu);
    }
    Ok(PropAFamily { n, xi })
}

/// The worst ℓ¹ distance `‖ξ(x) − ξ(y)‖₁` over graph edges where both ends
/// carry a measure; `None` when no edge qualifies.
pub fn family_variation(space: &SpaceAction, fam: &PropAFamily) -> Option<Rat> {
    let g = space.graph();
    let mut worst: Option<Rat> = None;
    for x in 0..g.len() {
        let Some(mx) = fam.xi.get(&x) else { continue };
        for &y in g.neighbors(x) {
            if y < x {
                continue;
            }
            let Some(my) = fam.xi.get(&y) else { continue };
            let d = l1_rat(mx, my);
            if worst.as_ref().map_or(true, |w| &d > w) {
                worst = Some(d);
            }
        }
    }
    worst
}

/// Largest graph distance from a vertex to its own support: the measured
/// support radius of the family.
pub fn family_reach(space: &SpaceAction, fam: &PropAFamily) -> usize {
    let g = space.graph();
    let mut reach = 0;
    for (&x, mu) in &fam.xi {
        let mut from = BTreeSet::new();
        from.insert(x);
        let dist = g.distances_from_set(&from);
        for &k in mu.keys() {
            if let Some(d) = dist[k] {
                reach = reach.max(d);
            }
        }
    }
    reach
}

// ---------------------------------------------------------------------------
// Induction along the orbit map
// ---------------------------------------------------------------------------

/// A window certificate produced by induction: identity-centered measures
/// on the fragment, one per group element, together with the measured
/// displacement bound `d(x₀, s·x₀) ≤ C` over the generators.
#[derive(Clone, Debug)]
pub struct InducedCertificate {
    pub entries: BTreeMap<Element, Support<Rat>>,
    pub qi_constant: usize,
}

/// μ(g) = g·ξ(g⁻¹·x₀): the orbit map `g ↦ g·x₀` transports the family to
/// the group window. The output is identity-centered by construction.
pub fn induce_from_space(
    space: &SpaceAction,
    fam: &PropAFamily,
    window: &[Element],
) -> Result<InducedCertificate, TransferError> {
    let x0 = space.basepoint();
    let mut entries = BTreeMap::new();
    for w in window {
        let v = space
            .act(&w.inv(), x0)
            .ok_or_else(|| TransferError::OutOfFragment { element: w.inv().render() })?;
        let xi = fam
            .xi
            .get(&v)
            .ok_or(TransferError::MissingChain { vertex: v, need: fam.n as usize })?;
        entries.insert(w.clone(), space.push(w, xi)?);
    }
    let group = window
        .first()
        .map(|w| w.group().clone())
        .ok_or_else(|| TransferError::BadSpace("empty window".into()))?;
    let mut qi = 0usize;
    for i in 0..group.generators().len() {
        for s in [group.generator(i), group.generator(i).inv()] {
            let img = space
                .act(&s, x0)
                .ok_or_else(|| TransferError::OutOfFragment { element: s.render() })?;
            let d = space
                .graph()
                .distance(x0, img)
                .ok_or_else(|| TransferError::BadSpace("basepoint orbit is disconnected".into()))?;
            qi = qi.max(d);
        }
    }
    Ok(InducedCertificate { entries, qi_constant: qi })
}

/// Checks the exact transport identity
/// `‖g·μ(w) − μ(gw)‖₁ = ‖ξ(w⁻¹x₀) − ξ((gw)⁻¹x₀)‖₁`
/// over every pair with `ℓ(g) ≤ radius`, `g ≠ e`, and both entries present.
/// Returns the number of pairs checked.
pub fn check_induction_identity(
    space: &SpaceAction,
    fam: &PropAFamily,
    induced: &InducedCertificate,
    radius: usize,
) -> Result<usize, TransferError> {
    let group = induced
        .entries
        .keys()
        .next()
        .map(|w| w.group().clone())
        .ok_or_else(|| TransferError::BadSpace("empty certificate".into()))?;
    let x0 = space.basepoint();
    let mut checked = 0usize;
    for g in group.ball(radius, None)? {
        if g.is_identity() {
            continue;
        }
        for (w, mu_w) in &induced.entries {
            let gw = g.mul(w);
            let Some(mu_gw) = induced.entries.get(&gw) else { continue };
            let left = l1_rat(&space.push(&g, mu_w)?, mu_gw);
            let v = space.act(&w.inv(), x0).ok_or_else(|| TransferError::OutOfFragment {
                element: w.inv().render(),
            })?;
            let u = space.act(&gw.inv(), x0).ok_or_else(|| TransferError::OutOfFragment {
                element: gw.inv().render(),
            })?;
            let (xi_v, xi_u) = match (fam.xi.get(&v), fam.xi.get(&u)) {
                (Some(a), Some(b)) => (a, b),
                _ => continue,
            };
            let right = l1_rat(xi_v, xi_u);
            if left != right {
                return Err(TransferError::NotHomomorphic(format!(
                    "transport identity fails at g = {}, w = {}: {} ≠ {}",
                    g.render(),
                    w.render(),
                    left,
                    right
                )));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

// ---------------------------------------------------------------------------
// Pushforward along an equivariant projection
// ---------------------------------------------------------------------------

/// Pushes an induced certificate to a coset space along a vertex map
/// `π: fragment → cosets`. Equivariance `π(s·v) = s·π(v)` is checked on
/// every vertex where both sides are defined; fibers merge by summation,
/// which never increases any pairwise ℓ¹ distance.
pub fn pushforward_to_cosets(
    space: &SpaceAction,
    induced: &InducedCertificate,
    projection: &[Option<usize>],
    cs: &CosetSpace,
) -> Result<ProbCertificate, TransferError> {
    if projection.len() != space.graph().len() {
        return Err(TransferError::BadSpace(format!(
            "projection covers {} of {} vertices",
            projection.len(),
            space.graph().len()
        )));
    }
    let group = cs.ambient();
    for i in 0..group.generators().len() {
        for s in [group.generator(i), group.generator(i).inv()] {
            for v in 0..space.graph().len() {
                let (Some(pv), Some(sv)) = (projection[v], space.act(&s, v)) else { continue };
                let Some(psv) = projection[sv] else { continue };
                match cs.act(&s, pv) {
                    Ok(t) if t == psv => {}
                    Ok(_) => {
                        return Err(TransferError::NotEquivariant {
                            vertex: v,
                            generator: s.render(),
                        })
                    }
                    Err(CosetError::OutOfWindow) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    let mut entries: Entries<Rat> = BTreeMap::new();
    for (w, mu) in &induced.entries {
        let mut out: Support<Rat> = BTreeMap::new();
        for (&k, mass) in mu {
            let y = projection[k].ok_or_else(|| TransferError::BadSpace(format!(
                "projection undefined on support vertex '{}'",
                space.graph().label(k)
            )))?;
            *out.entry(y).or_insert_with(Rat::zero) += mass.clone();
        }
        entries.insert(w.clone(), out);
    }
    Ok(ProbCertificate::new(Convention::IdentityCentered, entries)?)
}

/// The identity projection for fragments whose vertices already are the
/// coset-space vertices.
pub fn identity_projection(cs: &CosetSpace) -> Vec<Option<usize>> {
    (0..cs.len()).map(Some).collect()
}

// ---------------------------------------------------------------------------
// The centering flip
// ---------------------------------------------------------------------------

/// a(g) = g·f(g⁻¹): swaps the two centering conventions. The same formula
/// is its own inverse, so applying it twice restores the input exactly.
/// Requires the entry domain to be inverse-closed and the action to stay
/// within the window.
pub fn flip(cert: &ProbCertificate, cs: &CosetSpace) -> Result<ProbCertificate, TransferError> {
    let flipped_convention = match cert.convention {
        Convention::ReiterCentered => Convention::IdentityCentered,
        Convention::IdentityCentered => Convention::ReiterCentered,
    };
    let mut entries: Entries<Rat> = BTreeMap::new();
    for g in cert.entries().keys() {
        let ginv = g.inv();
        let f = cert
            .entries()
            .get(&ginv)
            .ok_or_else(|| TransferError::DomainNotInverseClosed { element: g.render() })?;
        entries.insert(g.clone(), crate::cert::push_measure(f, g, cs)?);
    }
    Ok(ProbCertificate::new(flipped_convention, entries)?)
}

// ---------------------------------------------------------------------------
// Lifting through a quotient
// ---------------------------------------------------------------------------

/// A homomorphism given by generator images, with the relations of the
/// source group checked against the images.
#[derive(Clone, Debug)]
pub struct QuotientMap {
    source: Group,
    target: Group,
    images: Vec<Element>,
}

impl QuotientMap {
    pub fn new(
        source: &Group,
        target: &Group,
        images: Vec<Element>,
    ) -> Result<QuotientMap, TransferError> {
        if images.len() != source.generators().len() {
            return Err(TransferError::NotHomomorphic(format!(
                "{} images for {} generators",
                images.len(),
                source.generators().len()
            )));
        }
        for img in &images {
            if img.group() != target {
                return Err(TransferError::NotHomomorphic(
                    "image element from the wrong group".into(),
                ));
            }
        }
        match source.kind() {
            GroupKind::Free => {}
            GroupKind::Abelian => {
                for i in 0..images.len() {
                    for j in (i + 1)..images.len() {
                        let ab = images[i].mul(&images[j]);
                        let ba = images[j].mul(&images[i]);
                        if ab != ba {
                            return Err(TransferError::NotHomomorphic(format!(
                                "images of commuting generators {} and {} do not commute",
                                i + 1,
                                j + 1
                            )));
                        }
                    }
                }
            }
            GroupKind::CyclicProduct { orders } => {
                for (i, &order) in orders.iter().enumerate() {
                    if order == 0 {
                        continue;
                    }
                    let mut p = target.identity();
                    for _ in 0..order {
                        p = p.mul(&images[i]);
                    }
                    if !p.is_identity() {
                        return Err(TransferError::NotHomomorphic(format!(
                            "image of order-{} generator {} does not have that order",
                            order,
                            i + 1
                        )));
                    }
                }
            }
            _ => {
                return Err(TransferError::NotHomomorphic(
                    "relation check is only implemented for free, abelian, and cyclic-product sources"
                        .into(),
                ))
            }
        }
        Ok(QuotientMap { source: source.clone(), target: target.clone(), images })
    }

    pub fn apply(&self, g: &Element) -> Element {
        let mut out = self.target.identity();
        for &l in g.word() {
            let img = &self.images[l.gen as usize];
            out = if l.inv { out.mul(&img.inv()) } else { out.mul(img) };
        }
        out
    }

    pub fn source(&self) -> &Group {
        &self.source
    }

    pub fn target(&self) -> &Group {
        &self.target
    }
}

/// Lifts a certificate through `phi`: the subgroup family upstairs must map
/// into the kernel, making the two coset spaces isomorphic as G-sets; the
/// lifted entry at `g` is the pullback of the entry at `phi(g)`, so every
/// pairwise variation upstairs equals the one downstairs exactly.
pub fn lift_from_quotient(
    cs_g: &CosetSpace,
    phi: &QuotientMap,
    cs_q: &CosetSpace,
    cert_q: &ProbCertificate,
    window: u32,
) -> Result<ProbCertificate, TransferError> {
    if cs_g.family().len() != cs_q.family().len() {
        return Err(TransferError::BadSpace(format!(
            "family sizes differ: {} upstairs, {} downstairs",
            cs_g.family().len(),
            cs_q.family().len()
        )));
    }
    for sub in cs_g.family() {
        for h in &sub.generators {
            if !phi.apply(h).is_identity() {
                return Err(TransferError::NotHomomorphic(format!(
                    "subgroup generator '{}' survives the quotient",
                    h.render()
                )));
            }
        }
    }
    // Vertex correspondence: (c, key w) upstairs ↦ phi(w)·root_c downstairs.
    let mut down: Vec<Option<usize>> = vec![None; cs_g.len()];
    let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
    for v in 0..cs_g.len() {
        let c = cs_g.component(v);
        let root = cs_q.representatives()[c];
        match cs_q.act(&phi.apply(cs_g.transporter(v)), root) {
            Ok(t) => {
                if let Some(&prev) = seen.get(&t) {
                    if cs_g.component(prev) == c {
                        return Err(TransferError::VertexCollision);
                    }
                }
                seen.insert(t, v);
                down[v] = Some(t);
            }
            Err(CosetError::OutOfWindow) => {}
            Err(e) => return Err(e.into()),
        }
    }
    // Invert the correspondence per quotient vertex.
    let mut up: BTreeMap<usize, usize> = BTreeMap::new();
    for (v, t) in down.iter().enumerate() {
        if let Some(t) = t {
            up.insert(*t, v);
        }
    }
    let mut entries: Entries<Rat> = BTreeMap::new();
    for g in cs_g.ambient().ball(window as usize, None)? {
        let q = phi.apply(&g);
        let f = cert_q
            .entries()
            .get(&q)
            .ok_or_else(|| TransferError::MissingQuotientEntry { element: q.render() })?;
        let mut lifted: Support<Rat> = BTreeMap::new();
        for (&y, mass) in f {
            let &v = up.get(&y).ok_or_else(|| TransferError::MissingPreimage {
                key: format!("({},{})", cs_q.component(y), cs_q.transporter(y).render()),
            })?;
            lifted.insert(v, mass.clone());
        }
        entries.insert(g, lifted);
    }
    Ok(ProbCertificate::new(cert_q.convention, entries)?)
}

// ---------------------------------------------------------------------------
// Finite-index uniform certificates
// ---------------------------------------------------------------------------

/// The uniform probability measure on a fully enumerated finite coset
/// space, assigned to every window element. Invariance makes every
/// pairwise variation exactly zero.
pub fn finite_index_uniform(
    cs: &CosetSpace,
    window: u32,
) -> Result<ProbCertificate, TransferError> {
    if !cs.is_generator_closed() {
        return Err(TransferError::NotFiniteIndex);
    }
    let mass = Rat::new(1, cs.len() as i64);
    let uniform: Support<Rat> = (0..cs.len()).map(|v| (v, mass.clone())).collect();
    let mut entries: Entries<Rat> = BTreeMap::new();
    for g in cs.ambient().ball(window as usize, None)? {
        entries.insert(g, uniform.clone());
    }
    Ok(ProbCertificate::new(Convention::ReiterCentered, entries)?)
}

// ---------------------------------------------------------------------------
// The built-in two-factor tree
// ---------------------------------------------------------------------------

/// Everything the pipeline needs from the two-factor construction: the
/// coset space of the two factor subgroups, the fragment of the tree whose
/// vertices are those cosets (adjacent when they share a group element),
/// and a ray toward a fixed end for the ranking.
pub struct TwoFactorTree {
    pub cosets: CosetSpace,
    pub space: SpaceAction,
    pub ray: Vec<usize>,
}

/// Builds the tree acted on by a free product of two cyclic or free rank-1
/// factors (`free(a,b)` or `cyclic-product(p,q)`), truncated at the given
/// key depth. The ray starts `[⟨a⟩, ⟨b⟩, b^t⟨a⟩, …]` with the twist `t`
/// chosen to steer it off the basepoint's immediate generator orbit, and
/// alternates single-letter steps afterwards.
pub fn two_factor_tree(group: &Group, depth: usize) -> Result<TwoFactorTree, TransferError> {
    let ok = group.generators().len() == 2
        && matches!(group.kind(), GroupKind::Free | GroupKind::CyclicProduct { .. });
    if !ok {
        return Err(TransferError::UnsupportedFactors(group.text().to_string()));
    }
    let orders: Vec<u64> = match group.kind() {
        GroupKind::CyclicProduct { orders } => orders.clone(),
        _ => vec![0, 0],
    };
    let a = group.generator(0);
    let b = group.generator(1);
    let family = vec![
        Subgroup { label: format!("<{}>", group.generators()[0].symbol), generators: vec![a.clone()] },
        Subgroup { label: format!("<{}>", group.generators()[1].symbol), generators: vec![b.clone()] },
    ];
    let cs = CosetSpace::build(group, family, depth, &BuildOptions::default())?;
    let root0 = cs.representatives()[0];
    let root1 = cs.representatives()[1];

    // Tree edges: the coset u⟨a⟩ meets exactly the cosets u·a^j⟨b⟩.
    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); cs.len()];
    for v in 0..cs.len() {
        if cs.component(v) != 0 {
            continue;
        }
        let u = cs.transporter(v).clone();
        let mut link = |j: i64| -> Result<bool, TransferError> {
            let mut z = u.clone();
            let step = if j >= 0 { a.clone() } else { a.inv() };
            for _ in 0..j.unsigned_abs() {
                z = z.mul(&step);
            }
            match cs.act(&z, root1) {
                Ok(w) => {
                    adjacency[v].insert(w);
                    adjacency[w].insert(v);
                    Ok(true)
                }
                Err(CosetError::OutOfWindow) => Ok(false),
                Err(e) => Err(e.into()),
            }
        };
        match orders[0] {
            0 => {
                let reach = depth.saturating_sub(cs.transporter(v).len()) as i64;
                for j in -reach..=reach {
                    link(j)?;
                }
            }
            n => {
                for j in 0..n as i64 {
                    link(j)?;
                }
            }
        }
    }
    let rim: BTreeSet<usize> =
        (0..cs.len()).filter(|&v| cs.transporter(v).len() >= depth).collect();
    let graph = FiniteGraph::new(
        adjacency.into_iter().map(|s| s.into_iter().collect()).collect(),
        (0..cs.len())
            .map(|v| format!("({},{})", cs.component(v), cs.transporter(v).render()))
            .collect(),
        rim,
    )?;
    let mut tables = vec![BTreeMap::new(); 4];
    for (i, s) in [a.clone(), b.clone()].iter().enumerate() {
        for v in 0..cs.len() {
            if let Ok(w) = cs.act(s, v) {
                tables[2 * i].insert(v, w);
            }
            if let Ok(w) = cs.act(&s.inv(), v) {
                tables[2 * i + 1].insert(v, w);
            }
        }
    }
    let orbit_reps = vec![
        (root0, cs.family()[0].label.clone()),
        (root1, cs.family()[1].label.clone()),
    ];
    let space = SpaceAction::new(graph, root0, orbit_reps, tables)?;

    // The ray: ⟨a⟩, ⟨b⟩, then b^t·⟨a⟩ and alternating single letters. The
    // twist keeps the third vertex away from the b±1-translates of the
    // basepoint, which is what makes the window chains merge immediately.
    let twist = match orders[1] {
        0 => 2,
        n => 2.min(n - 1),
    };
    let mut ray = vec![root0, root1];
    let mut word = group.identity();
    for _ in 0..twist {
        word = word.mul(&b);
    }
    let mut next_gen = 0usize; // component of the next ray vertex
    loop {
        let root = cs.representatives()[next_gen];
        match cs.act(&word, root) {
            Ok(v) => {
                if ray.contains(&v) {
                    break; // finite factors can wrap; stop cleanly
                }
                ray.push(v);
            }
            Err(CosetError::OutOfWindow) => break,
            Err(e) => return Err(e.into()),
        }
        word = word.mul(if next_gen == 0 { &a } else { &b });
        next_gen = 1 - next_gen;
    }
    Ok(TwoFactorTree { cosets: cs, space, ray })
}
