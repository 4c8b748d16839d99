//! Certificates of almost-invariance over a finite window.
//!
//! A certificate assigns to every group element `x` in a ball (the *window*)
//! a finitely supported object on the coset-space vertices, in one of three
//! equivalent forms:
//!
//! - **sets**: a finite nonempty subset `A_x` of Vertex × ℕ whose
//!   multiplicity indices form an initial segment {1..m} per vertex;
//! - **integer**: a nonzero finitely supported count vector `ξ_x`;
//! - **prob**: an exactly normalized rational probability vector `f(x)`.
//!
//! Two support conventions coexist and are recorded on probability
//! certificates. Under `reiter-centered`, supports travel with `x` (the
//! check is `ρ(x,k) < S`) and nearby window elements are compared directly.
//! Under `identity-centered`, supports stay near the base points
//! (`ρ(e,k) < S`) and the comparison is equivariant:
//! `‖g·c(x) − c(gx)‖₁` over short group elements `g`. The set and integer
//! forms always use the reiter-centered reading.
//!
//! Every quantity is exact rational; verification verdicts are strict
//! inequalities and never touch floating point.

use crate::coset::{CosetError, CosetSpace};
use crate::group::{Element, GroupError};
use crate::rat::Rat;
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum CertError {
    #[error("certificate has no entry for window element '{0}'")]
    MissingEntry(String),
    #[error("support of '{0}' is empty")]
    EmptySupport(String),
    #[error("masses for '{x}' sum to {total}, expected exactly 1")]
    BadMass { x: String, total: Rat },
    #[error("multiplicity indices for '{x}' are not an initial segment {{1..m}}")]
    NotInitialSegment { x: String },
    #[error("certificate declares convention {found}, expected {expected}")]
    ConventionMismatch { expected: Convention, found: Convention },
    #[error("invalid certificate file: {0}")]
    Schema(String),
    #[error("certificate parameters are invalid: {0}")]
    BadParams(String),
    #[error(transparent)]
    Coset(#[from] CosetError),
    #[error(transparent)]
    Group(#[from] GroupError),
}

/// Where certificate supports live and how almost-invariance is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// Supports follow the group element: `ρ(x,k) < S`; variation compares
    /// `c(x)` with `c(y)` for nearby `x, y`.
    ReiterCentered,
    /// Supports stay near the base points: `ρ(e,k) < S`; variation compares
    /// `g·c(x)` with `c(gx)` for short `g`.
    IdentityCentered,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::ReiterCentered => "reiter-centered",
            Convention::IdentityCentered => "identity-centered",
        })
    }
}

impl std::str::FromStr for Convention {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reiter-centered" => Ok(Convention::ReiterCentered),
            "identity-centered" => Ok(Convention::IdentityCentered),
            other => Err(format!(
                "unknown convention '{}' (expected 'reiter-centered' or 'identity-centered')",
                other
            )),
        }
    }
}

impl Serialize for Convention {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Convention {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The `(R, ε, S, window)` tuple a verification runs against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertParams {
    #[serde(rename = "R")]
    pub r: u32,
    pub epsilon: Rat,
    #[serde(rename = "S")]
    pub s: u32,
    pub window: u32,
}

impl CertParams {
    pub fn new(r: u32, epsilon: Rat, s: u32, window: u32) -> Result<Self, CertError> {
        let p = CertParams { r, epsilon, s, window };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), CertError> {
        if self.epsilon.is_negative() {
            return Err(CertError::BadParams("epsilon must be nonnegative".into()));
        }
        if self.window < self.r {
            return Err(CertError::BadParams(
                "window must be at least the pair-distance bound R".into(),
            ));
        }
        Ok(())
    }
}

/// Finitely supported nonnegative function on window vertices.
pub type Support<V> = BTreeMap<usize, V>;

/// Per-window-element supports, keyed by canonical element.
pub type Entries<V> = BTreeMap<Element, Support<V>>;

/// Form (a): finite subsets of Vertex × ℕ in normalized (initial segment)
/// shape, stored as per-vertex multiplicities.
#[derive(Clone, Debug, PartialEq)]
pub struct SetFamilyCertificate {
    entries: Entries<u64>,
}

/// Form (b): integer count vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegerCertificate {
    entries: Entries<u64>,
}

/// Form (c): exact rational probability vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbCertificate {
    pub convention: Convention,
    entries: Entries<Rat>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    Sets(SetFamilyCertificate),
    Integer(IntegerCertificate),
    Prob(ProbCertificate),
}

impl Certificate {
    pub fn form(&self) -> &'static str {
        match self {
            Certificate::Sets(_) => "sets",
            Certificate::Integer(_) => "integer",
            Certificate::Prob(_) => "prob",
        }
    }

    pub fn convention(&self) -> Convention {
        match self {
            Certificate::Prob(p) => p.convention,
            _ => Convention::ReiterCentered,
        }
    }

    pub fn domain(&self) -> Box<dyn Iterator<Item = &Element> + '_> {
        match self {
            Certificate::Sets(c) => Box::new(c.entries.keys()),
            Certificate::Integer(c) => Box::new(c.entries.keys()),
            Certificate::Prob(c) => Box::new(c.entries.keys()),
        }
    }
}

fn render_of(x: &Element) -> String {
    x.render()
}

impl SetFamilyCertificate {
    /// Builds from per-vertex multiplicities; every support must be nonempty
    /// and all counts positive.
    pub fn from_multiplicities(entries: Entries<u64>) -> Result<Self, CertError> {
        validate_counts(&entries)?;
        Ok(SetFamilyCertificate { entries })
    }

    /// Builds one window entry from explicit (vertex, index) pairs, checking
    /// the initial-segment normalization {1..m} per vertex.
    pub fn pairs_to_support(
        x: &Element,
        pairs: &[(usize, u64)],
    ) -> Result<Support<u64>, CertError> {
        let mut mult: Support<u64> = BTreeMap::new();
        let mut seen: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
        for &(v, j) in pairs {
            seen.entry(v).or_default().push(j);
        }
        for (v, mut js) in seen {
            js.sort_unstable();
            let m = js.len() as u64;
            if js.iter().copied().ne(1..=m) {
                return Err(CertError::NotInitialSegment { x: render_of(x) });
            }
            mult.insert(v, m);
        }
        if mult.is_empty() {
            return Err(CertError::EmptySupport(render_of(x)));
        }
        Ok(mult)
    }

    pub fn entries(&self) -> &Entries<u64> {
        &self.entries
    }

    /// The explicit (vertex, index) pairs of `A_x`.
    pub fn pairs(&self, x: &Element) -> Option<Vec<(usize, u64)>> {
        self.entries.get(x).map(|m| {
            m.iter()
                .flat_map(|(&v, &c)| (1..=c).map(move |j| (v, j)))
                .collect()
        })
    }

    /// Counting map: `ξ_x(k) = |A_x ∩ ({k} × ℕ)|`.
    pub fn to_integer(&self) -> IntegerCertificate {
        IntegerCertificate { entries: self.entries.clone() }
    }
}

impl IntegerCertificate {
    pub fn new(entries: Entries<u64>) -> Result<Self, CertError> {
        let entries = strip_zeros_u64(entries);
        validate_counts(&entries)?;
        Ok(IntegerCertificate { entries })
    }

    pub fn entries(&self) -> &Entries<u64> {
        &self.entries
    }

    pub fn support(&self, x: &Element) -> Option<&Support<u64>> {
        self.entries.get(x)
    }

    pub fn mass(&self, x: &Element) -> Option<u64> {
        self.entries.get(x).map(|m| m.values().sum())
    }

    /// Stacking map: `A_x = {(k,j) | 1 ≤ j ≤ ξ_x(k)}`.
    pub fn to_sets(&self) -> SetFamilyCertificate {
        SetFamilyCertificate { entries: self.entries.clone() }
    }

    /// Exact normalization `f(x) = ξ_x / ‖ξ_x‖₁`.
    pub fn to_prob(&self) -> ProbCertificate {
        let entries = self
            .entries
            .iter()
            .map(|(x, m)| {
                let total: u64 = m.values().sum();
                let t = Rat::from_big(num_rational::BigRational::from_integer(BigInt::from(
                    total,
                )));
                let sup = m
                    .iter()
                    .map(|(&v, &c)| {
                        let c = Rat::from_big(num_rational::BigRational::from_integer(
                            BigInt::from(c),
                        ));
                        (v, &c / &t)
                    })
                    .collect();
                (x.clone(), sup)
            })
            .collect();
        ProbCertificate { convention: Convention::ReiterCentered, entries }
    }
}

impl ProbCertificate {
    pub fn new(convention: Convention, entries: Entries<Rat>) -> Result<Self, CertError> {
        let entries: Entries<Rat> = entries
            .into_iter()
            .map(|(x, m)| (x, m.into_iter().filter(|(_, v)| !v.is_zero()).collect()))
            .collect();
        for (x, m) in &entries {
            if m.is_empty() {
                return Err(CertError::EmptySupport(render_of(x)));
            }
            let mut total = Rat::zero();
            for v in m.values() {
                if v.is_negative() {
                    return Err(CertError::Schema(format!(
                        "negative mass in entry '{}'",
                        render_of(x)
                    )));
                }
                total += v.clone();
            }
            if total != Rat::one() {
                return Err(CertError::BadMass { x: render_of(x), total });
            }
        }
        Ok(ProbCertificate { convention, entries })
    }

    pub fn entries(&self) -> &Entries<Rat> {
        &self.entries
    }

    pub fn support(&self, x: &Element) -> Option<&Support<Rat>> {
        self.entries.get(x)
    }

    /// Largest-remainder rounding to counts summing to exactly `M`; ties go
    /// to the earlier vertex in the window ordering. Requires the
    /// reiter-centered convention (the integer form has no other reading).
    pub fn to_integer(&self, m: u64) -> Result<IntegerCertificate, CertError> {
        assert!(m >= 1, "rounding denominator must be positive");
        if self.convention != Convention::ReiterCentered {
            return Err(CertError::ConventionMismatch {
                expected: Convention::ReiterCentered,
                found: self.convention,
            });
        }
        let big_m = Rat::from_big(num_rational::BigRational::from_integer(BigInt::from(m)));
        let mut entries: Entries<u64> = BTreeMap::new();
        for (x, sup) in &self.entries {
            let mut counts: Support<u64> = BTreeMap::new();
            let mut remainders: Vec<(Rat, usize)> = Vec::new();
            let mut assigned: u64 = 0;
            for (&v, mass) in sup {
                let scaled = mass * &big_m;
                let floor = scaled.numer() / scaled.denom();
                let floor_u: u64 = floor.to_string().parse().expect("floor fits in u64");
                let rem = &scaled - &Rat::from_big(num_rational::BigRational::from_integer(floor));
                assigned += floor_u;
                counts.insert(v, floor_u);
                remainders.push((rem, v));
            }
            let missing = m - assigned;
            // Highest remainder first; ties resolved toward the earlier
            // vertex.
            remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            for (_, v) in remainders.into_iter().take(missing as usize) {
                *counts.get_mut(&v).unwrap() += 1;
            }
            entries.insert(x.clone(), counts);
        }
        IntegerCertificate::new(entries)
    }
}

fn strip_zeros_u64(entries: Entries<u64>) -> Entries<u64> {
    entries
        .into_iter()
        .map(|(x, m)| (x, m.into_iter().filter(|&(_, c)| c > 0).collect()))
        .collect()
}

fn validate_counts(entries: &Entries<u64>) -> Result<(), CertError> {
    for (x, m) in entries {
        if m.is_empty() {
            return Err(CertError::EmptySupport(render_of(x)));
        }
        if m.values().any(|&c| c == 0) {
            return Err(CertError::Schema(format!(
                "zero count stored in entry '{}'",
                render_of(x)
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Exact distances
// ---------------------------------------------------------------------------

/// `Σ_k |a(k) − b(k)|` for integer count vectors.
pub fn l1_counts(a: &Support<u64>, b: &Support<u64>) -> u64 {
    let mut total: u64 = 0;
    for (&v, &ca) in a {
        let cb = b.get(&v).copied().unwrap_or(0);
        total += ca.abs_diff(cb);
    }
    for (&v, &cb) in b {
        if !a.contains_key(&v) {
            total += cb;
        }
    }
    total
}

/// `Σ_k |a(k) − b(k)|` for rational vectors.
pub fn l1_rat(a: &Support<Rat>, b: &Support<Rat>) -> Rat {
    let mut total = Rat::zero();
    for (&v, ca) in a {
        match b.get(&v) {
            Some(cb) => total += (ca - cb).abs(),
            None => total += ca.abs(),
        }
    }
    for (&v, cb) in b {
        if !a.contains_key(&v) {
            total += cb.abs();
        }
    }
    total
}

fn rat_from_u64(n: u64) -> Rat {
    Rat::from_big(num_rational::BigRational::from_integer(BigInt::from(n)))
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct SupportWitness {
    pub x: String,
    pub component: usize,
    pub key: String,
    pub rho: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairWitness {
    pub x: String,
    pub y: String,
    pub value: Rat,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub params: CertParams,
    pub convention: Convention,
    pub support_ok: bool,
    /// The support point of largest ρ-distance (even when the check passes).
    pub support_worst: Option<SupportWitness>,
    pub variation_ok: bool,
    /// The compared pair achieving the maximum (even when the check passes).
    pub variation_worst: Option<PairWitness>,
    pub achieved_variation: Rat,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.support_ok && self.variation_ok
    }
}

/// Checks both conditions of the finite-window definition against `cs`:
///
/// (a) every support vertex satisfies the strict support-radius bound
///     (`ρ(x,k) < S` reiter-centered, `ρ(e,k) < S` identity-centered);
/// (b) every compared pair at distance at most `R` inside the window has
///     variation strictly below ε — the symmetric-difference ratio
///     `|A_xΔA_y|/|A_x|` for the set form, the ℓ¹ ratio for the integer
///     form, and the plain ℓ¹ distance for probability certificates.
///
/// The certificate's domain may be larger than `ball(window)`; entries
/// outside the window are ignored.
pub fn verify(
    cert: &Certificate,
    cs: &CosetSpace,
    params: &CertParams,
) -> Result<VerificationReport, CertError> {
    params.check()?;
    let group = cs.ambient();
    let window = group.ball(params.window as usize, None)?;

    // Uniform view of supports for the checks below.
    let support_of = |x: &Element| -> Result<Vec<(usize, Rat)>, CertError> {
        let pairs: Vec<(usize, Rat)> = match cert {
            Certificate::Sets(c) => c
                .entries
                .get(x)
                .ok_or_else(|| CertError::MissingEntry(render_of(x)))?
                .iter()
                .map(|(&v, &c)| (v, rat_from_u64(c)))
                .collect(),
            Certificate::Integer(c) => c
                .entries
                .get(x)
                .ok_or_else(|| CertError::MissingEntry(render_of(x)))?
                .iter()
                .map(|(&v, &c)| (v, rat_from_u64(c)))
                .collect(),
            Certificate::Prob(c) => c
                .entries
                .get(x)
                .ok_or_else(|| CertError::MissingEntry(render_of(x)))?
                .iter()
                .map(|(&v, c)| (v, c.clone()))
                .collect(),
        };
        Ok(pairs)
    };

    let convention = cert.convention();

    // (a) Support radius.
    let identity = group.identity();
    let mut support_ok = true;
    let mut support_worst: Option<SupportWitness> = None;
    for x in &window {
        for (v, _) in support_of(x)? {
            let rho = match convention {
                Convention::ReiterCentered => cs.rho(x, v)?,
                Convention::IdentityCentered => cs.rho(&identity, v)?,
            };
            if rho >= params.s as usize {
                support_ok = false;
            }
            if support_worst.as_ref().map_or(true, |w| rho > w.rho) {
                support_worst = Some(SupportWitness {
                    x: render_of(x),
                    component: cs.component(v),
                    key: cs.transporter(v).render(),
                    rho,
                });
            }
        }
    }

    // (b) Variation.
    let mut variation_ok = true;
    let mut worst: Option<PairWitness> = None;
    let mut achieved = Rat::zero();
    let mut record = |x: &Element, y: &Element, value: Rat, ok: &mut bool| {
        if value >= params.epsilon {
            *ok = false;
        }
        if worst.is_none() || value > achieved {
            achieved = value.clone();
            worst = Some(PairWitness { x: render_of(x), y: render_of(y), value });
        }
    };

    match convention {
        Convention::ReiterCentered => {
            for x in &window {
                for y in &window {
                    if x == y || x.distance(y) > params.r as usize {
                        continue;
                    }
                    let value = match cert {
                        Certificate::Sets(c) => {
                            let sx = &c.entries[x];
                            let sy = c
                                .entries
                                .get(y)
                                .ok_or_else(|| CertError::MissingEntry(render_of(y)))?;
                            let diff = l1_counts(sx, sy);
                            let mass: u64 = sx.values().sum();
                            &rat_from_u64(diff) / &rat_from_u64(mass)
                        }
                        Certificate::Integer(c) => {
                            let sx = &c.entries[x];
                            let sy = c
                                .entries
                                .get(y)
                                .ok_or_else(|| CertError::MissingEntry(render_of(y)))?;
                            let diff = l1_counts(sx, sy);
                            let mass: u64 = sx.values().sum();
                            &rat_from_u64(diff) / &rat_from_u64(mass)
                        }
                        Certificate::Prob(c) => {
                            let sx = &c.entries[x];
                            let sy = c
                                .entries
                                .get(y)
                                .ok_or_else(|| CertError::MissingEntry(render_of(y)))?;
                            l1_rat(sx, sy)
                        }
                    };
                    record(x, y, value, &mut variation_ok);
                }
            }
        }
        Convention::IdentityCentered => {
            let prob = match cert {
                Certificate::Prob(p) => p,
                _ => {
                    return Err(CertError::ConventionMismatch {
                        expected: Convention::ReiterCentered,
                        found: Convention::IdentityCentered,
                    })
                }
            };
            let moves = group.ball(params.r as usize, None)?;
            for g in &moves {
                if g.is_identity() {
                    continue;
                }
                for x in &window {
                    let gx = g.mul(x);
                    if gx.len() > params.window as usize {
                        continue;
                    }
                    let cx = prob
                        .entries
                        .get(x)
                        .ok_or_else(|| CertError::MissingEntry(render_of(x)))?;
                    let cgx = prob
                        .entries
                        .get(&gx)
                        .ok_or_else(|| CertError::MissingEntry(render_of(&gx)))?;
                    let moved = push_measure(cx, g, cs)?;
                    let value = l1_rat(&moved, cgx);
                    record(x, &gx, value, &mut variation_ok);
                }
            }
        }
    }

    Ok(VerificationReport {
        params: params.clone(),
        convention,
        support_ok,
        support_worst,
        variation_ok,
        variation_worst: worst,
        achieved_variation: achieved,
    })
}

/// Pushforward of a vertex measure under the action of `g`.
pub fn push_measure(
    sup: &Support<Rat>,
    g: &Element,
    cs: &CosetSpace,
) -> Result<Support<Rat>, CertError> {
    let mut out: Support<Rat> = BTreeMap::new();
    for (&v, mass) in sup {
        let w = cs.act(g, v)?;
        let slot = out.entry(w).or_insert_with(Rat::zero);
        *slot += mass.clone();
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct CertFileDto {
    form: String,
    convention: Convention,
    params: CertParams,
    entries: BTreeMap<String, Vec<(usize, String, serde_json::Value)>>,
}

/// Serializes a certificate (with its parameters) against the coset space
/// that gives its vertex indices meaning. Vertices are stored as
/// (component, key) pairs, which survive re-enumeration at a different
/// depth.
pub fn certificate_to_json(
    cert: &Certificate,
    params: &CertParams,
    cs: &CosetSpace,
) -> String {
    let vertex_ref = |v: usize| (cs.component(v), cs.transporter(v).render());
    let mut entries: BTreeMap<String, Vec<(usize, String, serde_json::Value)>> = BTreeMap::new();
    match cert {
        Certificate::Sets(c) => {
            for (x, m) in &c.entries {
                let mut list = Vec::new();
                for (&v, &count) in m {
                    let (ci, key) = vertex_ref(v);
                    for j in 1..=count {
                        list.push((ci, key.clone(), serde_json::json!(j)));
                    }
                }
                entries.insert(render_of(x), list);
            }
        }
        Certificate::Integer(c) => {
            for (x, m) in &c.entries {
                let list = m
                    .iter()
                    .map(|(&v, &count)| {
                        let (ci, key) = vertex_ref(v);
                        (ci, key, serde_json::json!(count))
                    })
                    .collect();
                entries.insert(render_of(x), list);
            }
        }
        Certificate::Prob(c) => {
            for (x, m) in &c.entries {
                let list = m
                    .iter()
                    .map(|(&v, mass)| {
                        let (ci, key) = vertex_ref(v);
                        (ci, key, serde_json::json!(mass.to_string()))
                    })
                    .collect();
                entries.insert(render_of(x), list);
            }
        }
    }
    let dto = CertFileDto {
        form: cert.form().to_string(),
        convention: cert.convention(),
        params: params.clone(),
        entries,
    };
    serde_json::to_string_pretty(&dto).expect("certificate serialization cannot fail")
}

/// Parses and validates a certificate file against its coset space: every
/// window element must have an entry, every vertex must exist in the space,
/// probability masses must sum to exactly 1, set-form indices must be
/// normalized, and the set/integer forms must be reiter-centered.
pub fn certificate_from_json(
    text: &str,
    cs: &CosetSpace,
) -> Result<(Certificate, CertParams), CertError> {
    let dto: CertFileDto =
        serde_json::from_str(text).map_err(|e| CertError::Schema(e.to_string()))?;
    dto.params.check()?;
    let group = cs.ambient();

    let mut parsed: BTreeMap<Element, Vec<(usize, serde_json::Value)>> = BTreeMap::new();
    for (word, list) in &dto.entries {
        let x = group
            .element(word)
            .map_err(|e| CertError::Schema(format!("bad entry key '{}': {}", word, e)))?;
        if x.render() != *word {
            return Err(CertError::Schema(format!(
                "entry key '{}' is not in canonical form (expected '{}')",
                word,
                x.render()
            )));
        }
        let mut resolved = Vec::new();
        for (ci, key, value) in list {
            let key_el = group
                .element(key)
                .map_err(|e| CertError::Schema(format!("bad vertex key '{}': {}", key, e)))?;
            let v = cs.vertex_index(*ci, &key_el).ok_or_else(|| {
                CertError::Schema(format!(
                    "support vertex ({}, '{}') is not in the enumerated window",
                    ci, key
                ))
            })?;
            resolved.push((v, value.clone()));
        }
        parsed.insert(x, resolved);
    }

    // The window must be fully covered.
    for x in group.ball(dto.params.window as usize, None)? {
        if !parsed.contains_key(&x) {
            return Err(CertError::MissingEntry(render_of(&x)));
        }
    }

    let cert = match dto.form.as_str() {
        "sets" => {
            if dto.convention != Convention::ReiterCentered {
                return Err(CertError::ConventionMismatch {
                    expected: Convention::ReiterCentered,
                    found: dto.convention,
                });
            }
            let mut entries: Entries<u64> = BTreeMap::new();
            for (x, list) in parsed {
                let pairs: Vec<(usize, u64)> = list
                    .into_iter()
                    .map(|(v, val)| {
                        let j = val.as_u64().ok_or_else(|| {
                            CertError::Schema("set indices must be positive integers".into())
                        })?;
                        if j == 0 {
                            return Err(CertError::Schema(
                                "set indices are 1-based".into(),
                            ));
                        }
                        Ok((v, j))
                    })
                    .collect::<Result<_, _>>()?;
                let sup = SetFamilyCertificate::pairs_to_support(&x, &pairs)?;
                entries.insert(x, sup);
            }
            Certificate::Sets(SetFamilyCertificate::from_multiplicities(entries)?)
        }
        "integer" => {
            if dto.convention != Convention::ReiterCentered {
                return Err(CertError::ConventionMismatch {
                    expected: Convention::ReiterCentered,
                    found: dto.convention,
                });
            }
            let mut entries: Entries<u64> = BTreeMap::new();
            for (x, list) in parsed {
                let mut sup: Support<u64> = BTreeMap::new();
                for (v, val) in list {
                    let c = val.as_u64().ok_or_else(|| {
                        CertError::Schema("counts must be nonnegative integers".into())
                    })?;
                    if sup.insert(v, c).is_some() {
                        return Err(CertError::Schema(format!(
                            "duplicate support vertex in entry '{}'",
                            render_of(&x)
                        )));
                    }
                }
                entries.insert(x, sup);
            }
            Certificate::Integer(IntegerCertificate::new(entries)?)
        }
        "prob" => {
            let mut entries: Entries<Rat> = BTreeMap::new();
            for (x, list) in parsed {
                let mut sup: Support<Rat> = BTreeMap::new();
                for (v, val) in list {
                    let s = val.as_str().ok_or_else(|| {
                        CertError::Schema("masses must be rational strings \"p/q\"".into())
                    })?;
                    let mass: Rat = s
                        .parse()
                        .map_err(|e| CertError::Schema(format!("bad mass '{}': {}", s, e)))?;
                    if sup.insert(v, mass).is_some() {
                        return Err(CertError::Schema(format!(
                            "duplicate support vertex in entry '{}'",
                            render_of(&x)
                        )));
                    }
                }
                entries.insert(x, sup);
            }
            Certificate::Prob(ProbCertificate::new(dto.convention, entries)?)
        }
        other => {
            return Err(CertError::Schema(format!(
                "unknown certificate form '{}' (expected sets, integer, or prob)",
                other
            )))
        }
    };
    Ok((cert, dto.params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coset::{BuildOptions, Subgroup};
    use crate::group::Group;
    use proptest::prelude::*;

    fn z_mod_2_space() -> (Group, CosetSpace) {
        let g = Group::parse("abelian(1)").unwrap();
        let sub = Subgroup {
            label: "2Z".to_string(),
            generators: vec![g.element("x1^2").unwrap()],
        };
        let cs = CosetSpace::build(&g, vec![sub], 2, &BuildOptions::default()).unwrap();
        (g, cs)
    }

    /// The integer line acting on itself (trivial subgroup): vertices are the
    /// elements of the enumerated ball.
    fn line_space(depth: usize) -> (Group, CosetSpace) {
        let g = Group::parse("abelian(1)").unwrap();
        let sub = Subgroup { label: "1".to_string(), generators: vec![] };
        let cs = CosetSpace::build(&g, vec![sub], depth, &BuildOptions::default()).unwrap();
        (g, cs)
    }

    fn ratify(entries: Vec<(&Element, Vec<(usize, Rat)>)>) -> Entries<Rat> {
        entries
            .into_iter()
            .map(|(x, sup)| (x.clone(), sup.into_iter().collect()))
            .collect()
    }

    #[test]
    fn counting_map_collapses_multiplicities() {
        let g = Group::parse("free(a)").unwrap();
        let x = g.identity();
        let sup = SetFamilyCertificate::pairs_to_support(&x, &[(0, 1), (0, 2), (1, 1)]).unwrap();
        assert_eq!(sup.get(&0), Some(&2));
        assert_eq!(sup.get(&1), Some(&1));
    }

    #[test]
    fn non_initial_segment_indices_are_rejected() {
        let g = Group::parse("free(a)").unwrap();
        let x = g.identity();
        let err = SetFamilyCertificate::pairs_to_support(&x, &[(0, 1), (0, 3)]).unwrap_err();
        assert!(matches!(err, CertError::NotInitialSegment { .. }));
    }

    #[test]
    fn sets_integer_round_trip_is_identity() {
        let g = Group::parse("free(a)").unwrap();
        let x = g.identity();
        let sup = SetFamilyCertificate::pairs_to_support(&x, &[(0, 1), (0, 2), (2, 1)]).unwrap();
        let mut entries = BTreeMap::new();
        entries.insert(x.clone(), sup);
        let sets = SetFamilyCertificate::from_multiplicities(entries).unwrap();
        let ints = sets.to_integer();
        assert_eq!(ints.to_sets(), sets);
        // Stacking produces exactly the (k, 1..=count) pairs.
        assert_eq!(sets.pairs(&x).unwrap(), vec![(0, 1), (0, 2), (2, 1)]);
    }

    #[test]
    fn normalization_is_exact() {
        let g = Group::parse("free(a)").unwrap();
        let x = g.identity();
        let mut entries = BTreeMap::new();
        entries.insert(x.clone(), [(0usize, 2u64), (1, 1)].into_iter().collect());
        let ints = IntegerCertificate::new(entries).unwrap();
        let prob = ints.to_prob();
        let sup = prob.support(&x).unwrap();
        assert_eq!(sup.get(&0), Some(&Rat::new(2, 3)));
        assert_eq!(sup.get(&1), Some(&Rat::new(1, 3)));
    }

    #[test]
    fn largest_remainder_rounding_examples() {
        let g = Group::parse("free(a)").unwrap();
        let x = g.identity();

        let prob = ProbCertificate::new(
            Convention::ReiterCentered,
            ratify(vec![(&x, vec![(0, Rat::new(17, 50)), (1, Rat::new(33, 50))])]),
        )
        .unwrap();
        let ints = prob.to_integer(10).unwrap();
        let sup = ints.support(&x).unwrap();
        assert_eq!((sup.get(&0), sup.get(&1)), (Some(&3), Some(&7)));

        let thirds = ProbCertificate::new(
            Convention::ReiterCentered,
            ratify(vec![(
                &x,
                vec![(0, Rat::new(1, 3)), (1, Rat::new(1, 3)), (2, Rat::new(1, 3))],
            )]),
        )
        .unwrap();
        let sup = thirds.to_integer(3).unwrap();
        let sup = sup.support(&x).unwrap();
        assert_eq!(sup.values().copied().collect::<Vec<_>>(), vec![1, 1, 1]);

        // Exact tie: the earlier vertex receives the extra unit.
        let halves = ProbCertificate::new(
            Convention::ReiterCentered,
            ratify(vec![(&x, vec![(0, Rat::new(1, 2)), (1, Rat::new(1, 2))])]),
        )
        .unwrap();
        let sup = halves.to_integer(3).unwrap();
        let sup = sup.support(&x).unwrap();
        assert_eq!((sup.get(&0), sup.get(&1)), (Some(&2), Some(&1)));
    }

    proptest! {
        #[test]
        fn round_trip_and_factor_two_bound(
            counts_x in prop::collection::vec(0u64..4, 5),
            counts_y in prop::collection::vec(0u64..4, 5),
        ) {
            prop_assume!(counts_x.iter().sum::<u64>() > 0);
            prop_assume!(counts_y.iter().sum::<u64>() > 0);
            let g = Group::parse("abelian(1)").unwrap();
            let e = g.identity();
            let a = g.element("x1").unwrap();
            let mut entries: Entries<u64> = BTreeMap::new();
            entries.insert(
                e.clone(),
                counts_x.iter().enumerate().filter(|(_, &c)| c > 0).map(|(v, &c)| (v, c)).collect(),
            );
            entries.insert(
                a.clone(),
                counts_y.iter().enumerate().filter(|(_, &c)| c > 0).map(|(v, &c)| (v, c)).collect(),
            );
            let ints = IntegerCertificate::new(entries).unwrap();

            // Round trip through the set form is the identity.
            prop_assert_eq!(ints.to_sets().to_integer(), ints.clone());

            // Set symmetric difference equals the count-vector l1 distance:
            // check against an explicit pair-set oracle.
            let sets = ints.to_sets();
            let px: std::collections::HashSet<_> = sets.pairs(&e).unwrap().into_iter().collect();
            let py: std::collections::HashSet<_> = sets.pairs(&a).unwrap().into_iter().collect();
            let symdiff = px.symmetric_difference(&py).count() as u64;
            let l1 = l1_counts(ints.support(&e).unwrap(), ints.support(&a).unwrap());
            prop_assert_eq!(symdiff, l1);

            // Factor-2 variation bound for the normalized form.
            let prob = ints.to_prob();
            let lhs = l1_rat(prob.support(&e).unwrap(), prob.support(&a).unwrap());
            let mass_x = ints.mass(&e).unwrap();
            let bound = &(&rat_from_u64(2) * &rat_from_u64(l1)) / &rat_from_u64(mass_x);
            prop_assert!(lhs <= bound);

            // Equal masses: the normalized distance is exactly l1 / mass.
            if ints.mass(&e) == ints.mass(&a) {
                prop_assert_eq!(lhs, &rat_from_u64(l1) / &rat_from_u64(mass_x));
            }
        }

        #[test]
        fn rounding_sums_and_error_bound(
            weights in prop::collection::vec(1u64..20, 1..5),
            m in 1u64..30,
        ) {
            let g = Group::parse("free(a)").unwrap();
            let x = g.identity();
            let total: u64 = weights.iter().sum();
            let sup: Support<Rat> = weights
                .iter()
                .enumerate()
                .map(|(v, &w)| (v, &rat_from_u64(w) / &rat_from_u64(total)))
                .collect();
            let prob = ProbCertificate::new(
                Convention::ReiterCentered,
                ratify(vec![(&x, sup.clone().into_iter().collect())]),
            ).unwrap();
            let ints = prob.to_integer(m).unwrap();
            let counts = ints.support(&x).unwrap();
            prop_assert_eq!(counts.values().sum::<u64>(), m);
            // ‖ξ/M − f‖₁ < |supp| / M
            let mut err = Rat::zero();
            for (v, mass) in &sup {
                let c = counts.get(v).copied().unwrap_or(0);
                err += (&(&rat_from_u64(c) / &rat_from_u64(m)) - mass).abs();
            }
            prop_assert!(err < &rat_from_u64(sup.len() as u64) / &rat_from_u64(m));
        }
    }

    #[test]
    fn uniform_measure_on_two_cosets_has_zero_variation() {
        let (g, cs) = z_mod_2_space();
        let window = g.ball(1, None).unwrap();
        let half = Rat::new(1, 2);
        let entries = ratify(
            window
                .iter()
                .map(|x| (x, vec![(0usize, half.clone()), (1, half.clone())]))
                .collect(),
        );
        let prob = ProbCertificate::new(Convention::ReiterCentered, entries).unwrap();
        let params = CertParams::new(1, Rat::new(1, 1_000_000), 2, 1).unwrap();
        let report = verify(&Certificate::Prob(prob), &cs, &params).unwrap();
        assert!(report.support_ok);
        assert!(report.variation_ok);
        assert_eq!(report.achieved_variation, Rat::zero());
        assert!(report.passed());
    }

    #[test]
    fn moving_deltas_on_the_line_fail_at_two() {
        // f(x) = δ_{x-coset} over the integers acting on themselves: each
        // neighboring pair has disjoint supports, so the l1 distance is 2.
        let (g, cs) = line_space(3);
        let window = g.ball(1, None).unwrap();
        let entries = ratify(
            window
                .iter()
                .map(|x| {
                    let v = cs.act(x, cs.representatives()[0]).unwrap();
                    (x, vec![(v, Rat::one())])
                })
                .collect(),
        );
        let prob = ProbCertificate::new(Convention::ReiterCentered, entries).unwrap();
        let params = CertParams::new(1, Rat::one(), 5, 1).unwrap();
        let report = verify(&Certificate::Prob(prob), &cs, &params).unwrap();
        assert!(!report.variation_ok);
        assert_eq!(report.achieved_variation, Rat::from_int(2));
        // The same certificate passes a tolerant threshold.
        let loose = CertParams::new(1, Rat::new(5, 2), 5, 1).unwrap();
        let report = verify(&Certificate::Prob(prob_clone(&cs, &g)), &cs, &loose).unwrap();
        assert!(report.variation_ok);
    }

    fn prob_clone(cs: &CosetSpace, g: &Group) -> ProbCertificate {
        let window = g.ball(1, None).unwrap();
        let entries = ratify(
            window
                .iter()
                .map(|x| {
                    let v = cs.act(x, cs.representatives()[0]).unwrap();
                    (x, vec![(v, Rat::one())])
                })
                .collect(),
        );
        ProbCertificate::new(Convention::ReiterCentered, entries).unwrap()
    }

    #[test]
    fn set_form_ratio_is_asymmetric_in_the_denominator() {
        let (g, cs) = line_space(3);
        let e = g.identity();
        let a = g.element("x1").unwrap();
        let am = g.element("x1'").unwrap();
        let v0 = cs.representatives()[0];
        let v1 = cs.act(&a, v0).unwrap();
        let v2 = cs.act(&am, v0).unwrap();
        // A_e has 2 elements on v0; A_{x1} and A_{x1'} are singletons
        // elsewhere.
        let mut entries: Entries<u64> = BTreeMap::new();
        entries.insert(e.clone(), [(v0, 2u64)].into_iter().collect());
        entries.insert(a.clone(), [(v1, 1u64)].into_iter().collect());
        entries.insert(am.clone(), [(v2, 1u64)].into_iter().collect());
        let sets = SetFamilyCertificate::from_multiplicities(entries).unwrap();
        let params = CertParams::new(1, Rat::from_int(100), 4, 1).unwrap();
        let report = verify(&Certificate::Sets(sets), &cs, &params).unwrap();
        // |A_e Δ A_a| = 3; from e the ratio is 3/2, from a it is 3/1.
        assert_eq!(report.achieved_variation, Rat::from_int(3));
        assert!(report.variation_ok);
    }

    #[test]
    fn support_radius_is_strict() {
        let (g, cs) = line_space(3);
        let window = g.ball(1, None).unwrap();
        let entries = ratify(
            window
                .iter()
                .map(|x| {
                    let v = cs.act(x, cs.representatives()[0]).unwrap();
                    (x, vec![(v, Rat::one())])
                })
                .collect(),
        );
        let prob = ProbCertificate::new(Convention::ReiterCentered, entries).unwrap();
        let cert = Certificate::Prob(prob);
        // Moving deltas sit at ρ(x, x·base) = 0 from their own point.
        let tight = CertParams::new(1, Rat::from_int(3), 1, 1).unwrap();
        assert!(verify(&cert, &cs, &tight).unwrap().support_ok);

        // A delta pinned at distance 1 fails S=1 but passes S=2.
        let shifted = ratify(
            g.ball(0, None)
                .unwrap()
                .iter()
                .map(|x| {
                    let v = cs
                        .act(&g.element("x1").unwrap(), cs.representatives()[0])
                        .unwrap();
                    (x, vec![(v, Rat::one())])
                })
                .collect(),
        );
        let pinned =
            Certificate::Prob(ProbCertificate::new(Convention::ReiterCentered, shifted).unwrap());
        let s1 = CertParams::new(0, Rat::one(), 1, 0).unwrap();
        let s2 = CertParams::new(0, Rat::one(), 2, 0).unwrap();
        assert!(!verify(&pinned, &cs, &s1).unwrap().support_ok);
        assert!(verify(&pinned, &cs, &s2).unwrap().support_ok);
    }

    #[test]
    fn identity_centered_supports_are_measured_from_the_base_point() {
        let (g, cs) = line_space(4);
        let window = g.ball(1, None).unwrap();
        // Constant certificate c(x) = δ_base is exactly invariant.
        let base = cs.representatives()[0];
        let entries = ratify(window.iter().map(|x| (x, vec![(base, Rat::one())])).collect());
        let prob = ProbCertificate::new(Convention::IdentityCentered, entries).unwrap();
        let params = CertParams::new(1, Rat::new(1, 1000), 1, 1).unwrap();
        let report = verify(&Certificate::Prob(prob), &cs, &params).unwrap();
        assert!(report.support_ok);
        // g·δ_base = δ_{g·base} vs c(gx) = δ_base: distance 2 for g ≠ e.
        assert!(!report.variation_ok);
        assert_eq!(report.achieved_variation, Rat::from_int(2));

        // The translated family c(x) = δ_{x·base} is genuinely equivariant:
        // g·c(x) = c(gx), so the variation vanishes — but its supports leave
        // the base point, which the identity-centered support check sees.
        let moving = ratify(
            window
                .iter()
                .map(|x| {
                    let v = cs.act(x, base).unwrap();
                    (x, vec![(v, Rat::one())])
                })
                .collect(),
        );
        let prob = ProbCertificate::new(Convention::IdentityCentered, moving).unwrap();
        let report = verify(&Certificate::Prob(prob), &cs, &params).unwrap();
        assert!(report.variation_ok);
        assert_eq!(report.achieved_variation, Rat::zero());
        assert!(!report.support_ok);
        let worst = report.support_worst.unwrap();
        assert_eq!(worst.rho, 1);
    }

    #[test]
    fn verification_is_monotone_in_the_parameters() {
        let (g, cs) = z_mod_2_space();
        let window = g.ball(2, None).unwrap();
        // A slightly lopsided certificate with nonzero variation.
        let entries = ratify(
            window
                .iter()
                .map(|x| {
                    if x.len() % 2 == 0 {
                        (x, vec![(0usize, Rat::new(2, 3)), (1, Rat::new(1, 3))])
                    } else {
                        (x, vec![(0usize, Rat::new(1, 3)), (1, Rat::new(2, 3))])
                    }
                })
                .collect(),
        );
        let cert =
            Certificate::Prob(ProbCertificate::new(Convention::ReiterCentered, entries).unwrap());
        let base = CertParams::new(2, Rat::new(7, 10), 3, 2).unwrap();
        let report = verify(&cert, &cs, &base).unwrap();
        assert!(report.passed());
        for (r2, eps2, s2) in [(1u32, Rat::new(7, 10), 3u32), (2, Rat::one(), 3), (2, Rat::new(7, 10), 5)] {
            let weaker = CertParams::new(r2, eps2, s2, 2).unwrap();
            let weaker_report = verify(&cert, &cs, &weaker).unwrap();
            assert!(weaker_report.passed(), "weakening {:?} broke the verdict", weaker);
        }
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let (g, cs) = z_mod_2_space();
        let window = g.ball(1, None).unwrap();
        let entries = ratify(
            window
                .iter()
                .map(|x| (x, vec![(0usize, Rat::new(1, 2)), (1, Rat::new(1, 2))]))
                .collect(),
        );
        let prob = ProbCertificate::new(Convention::ReiterCentered, entries).unwrap();
        let params = CertParams::new(1, Rat::new(1, 10), 2, 1).unwrap();
        let cert = Certificate::Prob(prob);
        let json = certificate_to_json(&cert, &params, &cs);
        let (loaded, loaded_params) = certificate_from_json(&json, &cs).unwrap();
        assert_eq!(loaded, cert);
        assert_eq!(loaded_params, params);
        assert_eq!(certificate_to_json(&loaded, &loaded_params, &cs), json);
    }

    #[test]
    fn tampered_masses_are_rejected_at_parse() {
        let (g, cs) = z_mod_2_space();
        let window = g.ball(1, None).unwrap();
        let entries = ratify(
            window
                .iter()
                .map(|x| (x, vec![(0usize, Rat::new(1, 2)), (1, Rat::new(1, 2))]))
                .collect(),
        );
        let prob = ProbCertificate::new(Convention::ReiterCentered, entries).unwrap();
        let params = CertParams::new(1, Rat::new(1, 10), 2, 1).unwrap();
        let json = certificate_to_json(&Certificate::Prob(prob), &params, &cs);
        // Shave one mass from 1/2 to 2/5: the entry now sums to 9/10.
        let bad = json.replacen("\"1/2\"", "\"2/5\"", 1);
        match certificate_from_json(&bad, &cs) {
            Err(CertError::BadMass { .. }) => {}
            other => panic!("expected mass rejection, got {other:?}"),
        }
        // Unknown support vertices are rejected too.
        let bad = json.replace("\"e\"", "\"x1^9\"");
        assert!(certificate_from_json(&bad, &cs).is_err());
        // Dropping an entry leaves the window uncovered.
        let missing = {
            let mut dto: serde_json::Value = serde_json::from_str(&json).unwrap();
            dto["entries"].as_object_mut().unwrap().remove("x1");
            serde_json::to_string_pretty(&dto).unwrap()
        };
        match certificate_from_json(&missing, &cs) {
            Err(CertError::MissingEntry(w)) => assert_eq!(w, "x1"),
            other => panic!("expected missing entry, got {other:?}"),
        }
    }

    #[test]
    fn integer_form_must_be_reiter_centered() {
        let (g, cs) = z_mod_2_space();
        let window = g.ball(1, None).unwrap();
        let mut entries: Entries<u64> = BTreeMap::new();
        for x in &window {
            entries.insert(x.clone(), [(0usize, 1u64)].into_iter().collect());
        }
        let ints = IntegerCertificate::new(entries).unwrap();
        let params = CertParams::new(1, Rat::one(), 2, 1).unwrap();
        let json = certificate_to_json(&Certificate::Integer(ints), &params, &cs);
        let bad = json.replace("reiter-centered", "identity-centered");
        match certificate_from_json(&bad, &cs) {
            Err(CertError::ConventionMismatch { .. }) => {}
            other => panic!("expected convention mismatch, got {other:?}"),
        }
    }
}
