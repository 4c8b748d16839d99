//! Finite windows of coset spaces.
//!
//! Given an ambient group `G` and a family of finitely generated subgroups
//! `H_1, ..., H_m`, the space is the disjoint union of the left coset sets
//! `G/H_i`, with `G` acting by left multiplication. Only a finite window is
//! ever materialized: the cosets whose shortlex-minimal representative (the
//! *key*) has length at most `depth`.
//!
//! Keys are computed against a *bounded closure* of each subgroup: a BFS over
//! products of the subgroup generators pruned at a length bound. Merging two
//! representatives is therefore always sound (they really are the same
//! coset), while a missed merge can only make a coset look farther away or
//! out of window, never closer; if the closure search hits its size cap the
//! build reports that instead of guessing. Membership questions answer `In`
//! or `Inconclusive`, never a definite "not in".

use crate::group::{shortlex_cmp, Element, Group, GroupError, Letter};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

#[derive(Debug, thiserror::Error)]
pub enum CosetError {
    #[error("subgroup closure search for component {component} exceeded cap of {cap} elements")]
    ClosureBoundExhausted { component: usize, cap: usize },
    #[error("coset enumeration exceeded cap of {cap} vertices")]
    VertexCapExceeded { cap: usize },
    #[error("target coset lies outside the enumerated window")]
    OutOfWindow,
    #[error("component index {component} out of range")]
    BadComponent { component: usize },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("invalid coset space file: {0}")]
    Schema(String),
}

/// A finitely generated subgroup of the ambient group, with a display label.
#[derive(Clone, Debug)]
pub struct Subgroup {
    pub label: String,
    pub generators: Vec<Element>,
}

#[derive(Clone, Debug)]
pub struct BuildOptions {
    /// Length bound for the subgroup closure BFS. Defaults to
    /// `2 * depth + max generator length` per component, which covers every
    /// merge needed for windows of elements no longer than the depth.
    pub membership_bound: Option<usize>,
    /// Cap on the closure size per component.
    pub closure_cap: usize,
    /// Cap on the number of enumerated cosets.
    pub vertex_cap: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            membership_bound: None,
            closure_cap: 500_000,
            vertex_cap: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    In,
    /// The bounded search did not find the element; this is *not* evidence
    /// that it lies outside the subgroup.
    Inconclusive,
}

#[derive(Clone, Debug)]
struct ComponentClosure {
    /// Sorted, deduplicated elements of the subgroup found within the length
    /// bound. Always contains the identity.
    elements: Vec<Element>,
    bound: usize,
}

/// A finite window of a disjoint union of coset spaces.
#[derive(Debug)]
pub struct CosetSpace {
    ambient: Group,
    family: Vec<Subgroup>,
    depth: usize,
    /// Per vertex: (component, canonical key). Sorted by
    /// (key length, component, key shortlex), so the listing at depth `d` is
    /// a prefix of the listing at depth `d+1`.
    vertices: Vec<(usize, Element)>,
    index: HashMap<(usize, Vec<Letter>), usize>,
    representatives: Vec<usize>,
    edges: BTreeMap<(u16, u32), u32>,
    closures: Vec<ComponentClosure>,
}

impl CosetSpace {
    pub fn build(
        ambient: &Group,
        family: Vec<Subgroup>,
        depth: usize,
        opts: &BuildOptions,
    ) -> Result<CosetSpace, CosetError> {
        assert!(!family.is_empty(), "subgroup family must not be empty");
        for sub in &family {
            for g in &sub.generators {
                assert!(g.group() == ambient, "subgroup generator from a different group");
            }
        }
        let mut closures = Vec::new();
        for (ci, sub) in family.iter().enumerate() {
            closures.push(component_closure(ambient, ci, sub, depth, opts)?);
        }
        let mut space = CosetSpace {
            ambient: ambient.clone(),
            family,
            depth,
            vertices: Vec::new(),
            index: HashMap::new(),
            representatives: Vec::new(),
            edges: BTreeMap::new(),
            closures,
        };
        space.enumerate(opts)?;
        Ok(space)
    }

    fn enumerate(&mut self, opts: &BuildOptions) -> Result<(), CosetError> {
        let mut seen: HashSet<(usize, Vec<Letter>)> = HashSet::new();
        let mut queue: VecDeque<(usize, Element)> = VecDeque::new();
        for ci in 0..self.family.len() {
            let root = self.key_of(ci, &self.ambient.identity());
            debug_assert!(root.is_identity());
            seen.insert((ci, root.word().to_vec()));
            queue.push_back((ci, root));
        }
        let n_gens = self.ambient.generators().len() as u16;
        let letters: Vec<Element> = (0..n_gens)
            .flat_map(|g| {
                [false, true].map(|inv| self.ambient.normal_form(vec![Letter::new(g, inv)]))
            })
            .collect();
        while let Some((ci, rep)) = queue.pop_front() {
            for l in &letters {
                let moved = l.mul(&rep);
                let key = self.key_of(ci, &moved);
                if key.len() > self.depth {
                    continue;
                }
                let id = (ci, key.word().to_vec());
                if seen.insert(id) {
                    if seen.len() > opts.vertex_cap {
                        return Err(CosetError::VertexCapExceeded { cap: opts.vertex_cap });
                    }
                    queue.push_back((ci, key));
                }
            }
        }
        let mut verts: Vec<(usize, Element)> = seen
            .into_iter()
            .map(|(ci, w)| {
                let e = self.ambient.normal_form(w);
                (ci, e)
            })
            .collect();
        verts.sort_by(|a, b| {
            a.1.len()
                .cmp(&b.1.len())
                .then(a.0.cmp(&b.0))
                .then_with(|| shortlex_cmp(a.1.word(), b.1.word()))
        });
        self.index = verts
            .iter()
            .enumerate()
            .map(|(i, (ci, e))| ((*ci, e.word().to_vec()), i))
            .collect();
        self.vertices = verts;
        self.representatives = (0..self.family.len())
            .map(|ci| self.index[&(ci, Vec::new())])
            .collect();
        // Schreier edges for the positive generators, where both endpoints
        // fall inside the window.
        let mut edges = BTreeMap::new();
        for (vi, (ci, rep)) in self.vertices.iter().enumerate() {
            for gi in 0..n_gens {
                let l = &letters[2 * gi as usize];
                let moved = l.mul(rep);
                let key = self.key_of(*ci, &moved);
                if let Some(&ti) = self.index.get(&(*ci, key.word().to_vec())) {
                    edges.insert((gi, vi as u32), ti as u32);
                }
            }
        }
        self.edges = edges;
        Ok(())
    }

    /// Shortlex-least representative of the coset `w H_ci` visible through
    /// the bounded closure.
    fn key_of(&self, ci: usize, w: &Element) -> Element {
        let mut best: Option<Element> = None;
        for h in &self.closures[ci].elements {
            let cand = w.mul(h);
            match &best {
                Some(b) if cand >= *b => {}
                _ => best = Some(cand),
            }
        }
        best.expect("closure always contains the identity")
    }

    pub fn ambient(&self) -> &Group {
        &self.ambient
    }

    pub fn family(&self) -> &[Subgroup] {
        &self.family
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn component(&self, v: usize) -> usize {
        self.vertices[v].0
    }

    /// The canonical key, which is also the minimal transporter carrying the
    /// component's base point to `v`.
    pub fn transporter(&self, v: usize) -> &Element {
        &self.vertices[v].1
    }

    /// Base-point vertex (the coset of the identity) of each component.
    pub fn representatives(&self) -> &[usize] {
        &self.representatives
    }

    pub fn vertex_index(&self, component: usize, key: &Element) -> Option<usize> {
        self.index.get(&(component, key.word().to_vec())).copied()
    }

    /// Left action: the vertex `g * v`, if it lies in the window.
    pub fn act(&self, g: &Element, v: usize) -> Result<usize, CosetError> {
        let (ci, rep) = &self.vertices[v];
        let key = self.key_of(*ci, &g.mul(rep));
        self.index
            .get(&(*ci, key.word().to_vec()))
            .copied()
            .ok_or(CosetError::OutOfWindow)
    }

    /// Distance from `g` to the vertex `v`: the length of the minimal
    /// transporter of `g^-1 v`, i.e. how far `g^-1 v` sits from the base
    /// point of its component.
    pub fn rho(&self, g: &Element, v: usize) -> Result<usize, CosetError> {
        let (ci, rep) = &self.vertices[v];
        let key = self.key_of(*ci, &g.inv().mul(rep));
        if key.len() > self.depth {
            return Err(CosetError::OutOfWindow);
        }
        Ok(key.len())
    }

    /// Vertices at key-length (= distance from the base point) at most `r`.
    pub fn vertices_within(&self, r: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&v| self.vertices[v].1.len() <= r)
            .collect()
    }

    pub fn membership(&self, component: usize, g: &Element) -> Result<Membership, CosetError> {
        let closure = self
            .closures
            .get(component)
            .ok_or(CosetError::BadComponent { component })?;
        if closure.elements.binary_search_by(|h| h.cmp(g)).is_ok() {
            Ok(Membership::In)
        } else {
            Ok(Membership::Inconclusive)
        }
    }

    /// The word-length bound used by the bounded subgroup search for this
    /// component; `Inconclusive` membership means "not found within it".
    pub fn closure_bound(&self, component: usize) -> Option<usize> {
        self.closures.get(component).map(|c| c.bound)
    }

    /// Schreier edge for a positive generator, if the image is in-window.
    /// True when every positive generator maps every enumerated vertex to
    /// an enumerated vertex. Generator images are injective on cosets, so
    /// on a finite vertex set this forces them to be bijections: the whole
    /// space is present and depth bounds are irrelevant.
    pub fn is_generator_closed(&self) -> bool {
        let gens = self.ambient().generators().len() as u16;
        (0..self.len()).all(|v| (0..gens).all(|g| self.neighbor(g, v).is_some()))
    }

    pub fn neighbor(&self, gen: u16, v: usize) -> Option<usize> {
        self.edges.get(&(gen, v as u32)).map(|&t| t as usize)
    }

    pub fn edges(&self) -> impl Iterator<Item = (u16, usize, usize)> + '_ {
        self.edges.iter().map(|(&(g, f), &t)| (g, f as usize, t as usize))
    }

    /// Structural self-check used by tests and by the CLI after loading a
    /// space from disk. Quadratic-ish; intended for small windows.
    pub fn validate(&self) -> Result<(), CosetError> {
        let bad = |msg: String| CosetError::Schema(msg);
        for (vi, (ci, key)) in self.vertices.iter().enumerate() {
            if *ci >= self.family.len() {
                return Err(bad(format!("vertex {} has component out of range", vi)));
            }
            if key.len() > self.depth {
                return Err(bad(format!("vertex {} key longer than depth", vi)));
            }
            let canon = self.key_of(*ci, key);
            if canon != *key {
                return Err(bad(format!("vertex {} key is not canonical", vi)));
            }
        }
        for w in self.vertices.windows(2) {
            let ka = (w[0].1.len(), w[0].0, w[0].1.word());
            let kb = (w[1].1.len(), w[1].0, w[1].1.word());
            if (ka.0, ka.1).cmp(&(kb.0, kb.1)).then(shortlex_cmp(ka.2, kb.2))
                != std::cmp::Ordering::Less
            {
                return Err(bad("vertex list is not strictly ordered".into()));
            }
        }
        for (ci, &rv) in self.representatives.iter().enumerate() {
            if self.vertices[rv].0 != ci || !self.vertices[rv].1.is_identity() {
                return Err(bad(format!("representative of component {} is wrong", ci)));
            }
        }
        for (&(g, f), &t) in &self.edges {
            let ge = self.ambient.generator(g as usize);
            let act = self.act(&ge, f as usize).map_err(|_| {
                bad(format!("edge ({}, {}) points out of window", g, f))
            })?;
            if act != t as usize {
                return Err(bad(format!("edge ({}, {}) disagrees with the action", g, f)));
            }
        }
        // Stabilizer sanity around each base point.
        let ball2 = self.ambient.ball(2, None)?;
        for (ci, &rv) in self.representatives.iter().enumerate() {
            for h in &self.closures[ci].elements {
                if h.len() <= 2 && self.act(h, rv)? != rv {
                    return Err(bad(format!(
                        "subgroup element {} moves the base point of component {}",
                        h, ci
                    )));
                }
            }
            for g in &ball2 {
                if let Ok(img) = self.act(g, rv) {
                    if img == rv && self.membership(ci, g)? == Membership::Inconclusive {
                        return Err(bad(format!(
                            "element {} fixes the base point of component {} \
                             but membership could not be confirmed",
                            g, ci
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let dto = SpaceDto {
            ambient: self.ambient.clone(),
            family: self
                .family
                .iter()
                .map(|s| FamilyDto {
                    label: s.label.clone(),
                    generators: s.generators.iter().map(|g| g.render()).collect(),
                })
                .collect(),
            depth: self.depth,
            vertices: self
                .vertices
                .iter()
                .map(|(ci, k)| VertexDto { component: *ci, key: k.render() })
                .collect(),
            representatives: self.representatives.clone(),
            transporters: self.vertices.iter().map(|(_, k)| k.render()).collect(),
            edges: self
                .edges
                .iter()
                .map(|(&(g, f), &t)| EdgeDto {
                    generator: self.ambient.generators()[g as usize].symbol.clone(),
                    from: f as usize,
                    to: t as usize,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&dto).expect("coset space serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<CosetSpace, CosetError> {
        let dto: SpaceDto =
            serde_json::from_str(text).map_err(|e| CosetError::Schema(e.to_string()))?;
        let ambient = dto.ambient;
        let mut family = Vec::new();
        for f in &dto.family {
            let mut gens = Vec::new();
            for w in &f.generators {
                gens.push(ambient.element(w).map_err(|e| {
                    CosetError::Schema(format!("bad subgroup generator '{}': {}", w, e))
                })?);
            }
            family.push(Subgroup { label: f.label.clone(), generators: gens });
        }
        let mut labels = HashSet::new();
        for f in &family {
            if !labels.insert(f.label.clone()) {
                return Err(CosetError::Schema(format!("duplicate family label '{}'", f.label)));
            }
        }
        let opts = BuildOptions::default();
        let mut closures = Vec::new();
        for (ci, sub) in family.iter().enumerate() {
            closures.push(component_closure(&ambient, ci, sub, dto.depth, &opts)?);
        }
        let mut vertices = Vec::new();
        let mut index = HashMap::new();
        for (vi, v) in dto.vertices.iter().enumerate() {
            if v.component >= family.len() {
                return Err(CosetError::Schema(format!(
                    "vertex {} references component {}",
                    vi, v.component
                )));
            }
            let key = ambient
                .element(&v.key)
                .map_err(|e| CosetError::Schema(format!("bad key '{}': {}", v.key, e)))?;
            if key.render() != v.key {
                return Err(CosetError::Schema(format!(
                    "key '{}' is not in canonical form",
                    v.key
                )));
            }
            if key.len() > dto.depth {
                return Err(CosetError::Schema(format!("key '{}' exceeds depth", v.key)));
            }
            if index.insert((v.component, key.word().to_vec()), vi).is_some() {
                return Err(CosetError::Schema(format!(
                    "duplicate vertex ({}, '{}')",
                    v.component, v.key
                )));
            }
            vertices.push((v.component, key));
        }
        if dto.representatives.len() != family.len() {
            return Err(CosetError::Schema(
                "representative count differs from family size".into(),
            ));
        }
        for (ci, &rv) in dto.representatives.iter().enumerate() {
            let v = vertices
                .get(rv)
                .ok_or_else(|| CosetError::Schema(format!("representative {} out of range", rv)))?;
            if v.0 != ci || !v.1.is_identity() {
                return Err(CosetError::Schema(format!(
                    "representative of component {} must be its identity coset",
                    ci
                )));
            }
        }
        if dto.transporters.len() != vertices.len() {
            return Err(CosetError::Schema(
                "transporter count differs from vertex count".into(),
            ));
        }
        for (vi, t) in dto.transporters.iter().enumerate() {
            if *t != vertices[vi].1.render() {
                return Err(CosetError::Schema(format!(
                    "transporter of vertex {} disagrees with its key",
                    vi
                )));
            }
        }
        let mut edges = BTreeMap::new();
        for e in &dto.edges {
            let gi = ambient
                .generators()
                .iter()
                .position(|g| g.symbol == e.generator)
                .ok_or_else(|| {
                    CosetError::Schema(format!("unknown edge generator '{}'", e.generator))
                })? as u16;
            if e.from >= vertices.len() || e.to >= vertices.len() {
                return Err(CosetError::Schema("edge endpoint out of range".into()));
            }
            if vertices[e.from].0 != vertices[e.to].0 {
                return Err(CosetError::Schema("edge joins different components".into()));
            }
            if edges.insert((gi, e.from as u32), e.to as u32).is_some() {
                return Err(CosetError::Schema(format!(
                    "duplicate edge ({}, {})",
                    e.generator, e.from
                )));
            }
        }
        Ok(CosetSpace {
            ambient,
            family,
            depth: dto.depth,
            vertices,
            index,
            representatives: dto.representatives,
            edges,
            closures,
        })
    }
}

fn component_closure(
    ambient: &Group,
    component: usize,
    sub: &Subgroup,
    depth: usize,
    opts: &BuildOptions,
) -> Result<ComponentClosure, CosetError> {
    let max_gen_len = sub.generators.iter().map(|g| g.len()).max().unwrap_or(0);
    let bound = opts.membership_bound.unwrap_or(2 * depth + max_gen_len);
    let moves: Vec<Element> = sub
        .generators
        .iter()
        .flat_map(|g| [g.clone(), g.inv()])
        .collect();
    let mut seen: HashSet<Vec<Letter>> = HashSet::new();
    let identity = ambient.identity();
    seen.insert(Vec::new());
    let mut queue: VecDeque<Element> = VecDeque::new();
    queue.push_back(identity);
    while let Some(h) = queue.pop_front() {
        for m in &moves {
            let h2 = h.mul(m);
            if h2.len() > bound {
                continue;
            }
            if seen.insert(h2.word().to_vec()) {
                if seen.len() > opts.closure_cap {
                    return Err(CosetError::ClosureBoundExhausted {
                        component,
                        cap: opts.closure_cap,
                    });
                }
                queue.push_back(h2);
            }
        }
    }
    let mut elements: Vec<Element> =
        seen.into_iter().map(|w| ambient.normal_form(w)).collect();
    elements.sort();
    Ok(ComponentClosure { elements, bound })
}

#[derive(Serialize, Deserialize)]
struct SpaceDto {
    ambient: Group,
    family: Vec<FamilyDto>,
    depth: usize,
    vertices: Vec<VertexDto>,
    representatives: Vec<usize>,
    transporters: Vec<String>,
    edges: Vec<EdgeDto>,
}

#[derive(Serialize, Deserialize)]
struct FamilyDto {
    label: String,
    generators: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct VertexDto {
    component: usize,
    key: String,
}

#[derive(Serialize, Deserialize)]
struct EdgeDto {
    generator: String,
    from: usize,
    to: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_ab() -> Group {
        Group::parse("free(a,b)").unwrap()
    }

    fn sub(g: &Group, label: &str, gens: &[&str]) -> Subgroup {
        Subgroup {
            label: label.to_string(),
            generators: gens.iter().map(|w| g.element(w).unwrap()).collect(),
        }
    }

    fn space(g: &Group, subs: Vec<Subgroup>, depth: usize) -> CosetSpace {
        CosetSpace::build(g, subs, depth, &BuildOptions::default()).unwrap()
    }

    #[test]
    fn free_group_mod_cyclic_depth_one() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "A", &["a"])], 1);
        let keys: Vec<_> = (0..sp.len()).map(|v| sp.transporter(v).render()).collect();
        assert_eq!(keys, ["e", "b", "b'"]);
        sp.validate().unwrap();
    }

    #[test]
    fn free_group_mod_cyclic_depth_two_counts() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "A", &["a"])], 2);
        assert_eq!(sp.len(), 9);
        sp.validate().unwrap();
    }

    #[test]
    fn two_component_window_is_a_disjoint_union() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "A", &["a"]), sub(&g, "B", &["b"])], 2);
        assert_eq!(sp.len(), 18);
        assert_eq!(sp.representatives().len(), 2);
        assert_eq!(sp.component(sp.representatives()[0]), 0);
        assert_eq!(sp.component(sp.representatives()[1]), 1);
        sp.validate().unwrap();
    }

    #[test]
    fn keys_are_stable_under_deeper_enumeration() {
        let g = free_ab();
        let subs = || vec![sub(&g, "A", &["a"]), sub(&g, "B", &["b"])];
        let shallow = space(&g, subs(), 2);
        let deep = space(&g, subs(), 3);
        for v in 0..shallow.len() {
            assert_eq!(shallow.component(v), deep.component(v));
            assert_eq!(shallow.transporter(v).render(), deep.transporter(v).render());
        }
        // Edges within the shallow window agree as well.
        for (gen, f, t) in shallow.edges() {
            assert_eq!(deep.neighbor(gen, f), Some(t));
        }
    }

    #[test]
    fn integer_line_mod_even_subgroup() {
        let g = Group::parse("abelian(1)").unwrap();
        let sp = space(&g, vec![sub(&g, "2Z", &["x1^2"])], 2);
        assert_eq!(sp.len(), 2);
        let three = g.element("x1^3").unwrap();
        assert_eq!(sp.rho(&three, sp.representatives()[0]).unwrap(), 1);
        let two = g.element("x1^2").unwrap();
        assert_eq!(sp.rho(&two, sp.representatives()[0]).unwrap(), 0);
        sp.validate().unwrap();
    }

    #[test]
    fn transporter_is_the_key_itself() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "A", &["a"])], 2);
        let ab = g.element("a*b").unwrap();
        let v = sp.act(&ab, sp.representatives()[0]).unwrap();
        assert_eq!(sp.transporter(v).render(), "a*b");
        assert_eq!(sp.rho(&g.identity(), v).unwrap(), 2);
    }

    #[test]
    fn mod_three_coset_takes_negative_key() {
        let g = Group::parse("abelian(1)").unwrap();
        let sp = space(&g, vec![sub(&g, "3Z", &["x1^3"])], 2);
        assert_eq!(sp.len(), 3);
        let two = g.element("x1^2").unwrap();
        let v = sp.act(&two, sp.representatives()[0]).unwrap();
        assert_eq!(sp.transporter(v).render(), "x1'");
    }

    #[test]
    fn family_of_finite_index_subgroups_has_five_cosets() {
        let g = Group::parse("abelian(1)").unwrap();
        let sp = space(&g, vec![sub(&g, "2Z", &["x1^2"]), sub(&g, "3Z", &["x1^3"])], 3);
        assert_eq!(sp.len(), 5);
        sp.validate().unwrap();
    }

    #[test]
    fn index_two_kernel_in_free_group() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "K", &["a^2", "b^2", "a*b"])], 2);
        assert_eq!(sp.len(), 2);
        let keys: Vec<_> = (0..sp.len()).map(|v| sp.transporter(v).render()).collect();
        assert_eq!(keys, ["e", "a"]);
        // Every odd-length element lands on the nontrivial coset.
        let b = g.element("b").unwrap();
        let v = sp.act(&b, sp.representatives()[0]).unwrap();
        assert_eq!(sp.transporter(v).render(), "a");
        sp.validate().unwrap();
    }

    #[test]
    fn membership_is_in_or_inconclusive() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "A", &["a"])], 2);
        let a3 = g.element("a^3").unwrap();
        assert_eq!(sp.membership(0, &a3).unwrap(), Membership::In);
        let b = g.element("b").unwrap();
        assert_eq!(sp.membership(0, &b).unwrap(), Membership::Inconclusive);
    }

    #[test]
    fn action_distance_identities() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "A", &["a"]), sub(&g, "B", &["b"])], 3);
        let ball2 = g.ball(2, None).unwrap();
        for x in &ball2 {
            for v in 0..sp.len() {
                let via_act = sp
                    .act(&x.inv(), v)
                    .ok()
                    .map(|w| sp.transporter(w).len());
                let direct = sp.rho(x, v).ok();
                if let (Some(da), Some(dd)) = (via_act, direct) {
                    assert_eq!(da, dd);
                }
                // 1-Lipschitz in the group argument.
                if let (Ok(d1), Ok(d2)) = (sp.rho(x, v), sp.rho(&g.identity(), v)) {
                    assert!(d1.abs_diff(d2) <= x.len());
                }
            }
        }
    }

    #[test]
    fn action_is_compatible_with_composition() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "A", &["a"])], 4);
        let ball1 = g.ball(1, None).unwrap();
        for x in &ball1 {
            for y in &ball1 {
                for v in sp.vertices_within(2) {
                    let step = sp.act(y, v).and_then(|w| sp.act(x, w));
                    let joint = sp.act(&x.mul(y), v);
                    if let (Ok(s), Ok(j)) = (step, joint) {
                        assert_eq!(s, j);
                    }
                }
            }
        }
    }

    #[test]
    fn out_of_window_is_reported() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "A", &["a"])], 1);
        let b2 = g.element("b^2").unwrap();
        match sp.act(&b2, sp.representatives()[0]) {
            Err(CosetError::OutOfWindow) => {}
            other => panic!("expected out-of-window, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "A", &["a"]), sub(&g, "B", &["b"])], 2);
        let json = sp.to_json();
        let loaded = CosetSpace::from_json(&json).unwrap();
        assert_eq!(loaded.to_json(), json);
        loaded.validate().unwrap();
        assert_eq!(loaded.len(), sp.len());
    }

    #[test]
    fn loader_rejects_tampered_files() {
        let g = free_ab();
        let sp = space(&g, vec![sub(&g, "A", &["a"])], 1);
        let json = sp.to_json();
        // Corrupt a key into a non-canonical word.
        let bad = json.replacen("\"key\": \"b\"", "\"key\": \"a*a'*b\"", 1);
        assert!(matches!(CosetSpace::from_json(&bad), Err(CosetError::Schema(_))));
        // Point an edge at a different component's vertex.
        let sp2 = space(&g, vec![sub(&g, "A", &["a"]), sub(&g, "B", &["b"])], 1);
        let json2 = sp2.to_json();
        let loaded = CosetSpace::from_json(&json2).unwrap();
        loaded.validate().unwrap();
    }

    #[test]
    fn closure_cap_is_reported() {
        let g = free_ab();
        let opts = BuildOptions { closure_cap: 3, ..BuildOptions::default() };
        let err = CosetSpace::build(&g, vec![sub(&g, "A", &["a"])], 3, &opts).unwrap_err();
        assert!(matches!(err, CosetError::ClosureBoundExhausted { component: 0, .. }));
    }

    #[test]
    fn vertex_cap_is_reported() {
        let g = free_ab();
        let opts = BuildOptions { vertex_cap: 4, ..BuildOptions::default() };
        let err = CosetSpace::build(&g, vec![sub(&g, "A", &["a"])], 3, &opts).unwrap_err();
        assert!(matches!(err, CosetError::VertexCapExceeded { cap: 4 }));
    }
}
