//! Finitely generated groups with solvable word problem.
//!
//! A group is described by a small textual grammar:
//!
//! ```text
//! free(a,b)                          free group on named generators
//! abelian(n)                         Z^n, generators auto-named x1..xn
//! cyclic-product(n1,...,nk)          free product of cyclic groups
//!                                    (0 = infinite), generators g1..gk
//! product(spec; spec)                direct product, concatenated namespace
//! rewriting(a,b | b*a->a*b, ...)     generators plus rewrite rules; append
//!                                    `confluent` after the closing paren to
//!                                    allow equal-length shortlex-reducing
//!                                    rules
//! ```
//!
//! Elements are kept as canonical words over the generators and their formal
//! inverses. For the free, abelian, cyclic-product and product forms the
//! canonical word is a geodesic, so `len()` is the exact word length. For
//! rewriting systems the canonical word is the deterministic leftmost-rewrite
//! normal form; it is geodesic when the system (together with free reduction)
//! is confluent, and an upper bound otherwise. General finite presentations
//! are rejected rather than approximated: a silent word-problem failure would
//! corrupt everything built on top.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum GroupError {
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("elements belong to different groups")]
    GroupMismatch,
    #[error("enumeration exceeded cap of {cap} elements")]
    CapExceeded { cap: usize },
}

fn perr(offset: usize, message: impl Into<String>) -> GroupError {
    GroupError::Parse { offset, message: message.into() }
}

/// One letter of a word: a generator or its formal inverse.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Letter {
    pub gen: u16,
    pub inv: bool,
}

impl Letter {
    pub fn new(gen: u16, inv: bool) -> Self {
        Letter { gen, inv }
    }

    pub fn inverse(self) -> Self {
        Letter { gen: self.gen, inv: !self.inv }
    }

    /// Rank used for lexicographic comparisons: a < a' < b < b' < ...
    pub fn rank(self) -> u32 {
        2 * self.gen as u32 + self.inv as u32
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub symbol: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteRule {
    pub lhs: Vec<Letter>,
    pub rhs: Vec<Letter>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupKind {
    Free,
    Abelian,
    CyclicProduct { orders: Vec<u64> },
    Product { left: Box<GroupSpec>, right: Box<GroupSpec> },
    Rewriting { rules: Vec<RewriteRule>, confluent: bool },
}

/// A parsed group description. Equality is structural and ignores the
/// original source text, so `free(a, b)` and `free(a,b)` describe the same
/// group.
#[derive(Clone, Debug)]
pub struct GroupSpec {
    text: String,
    generators: Vec<Generator>,
    kind: GroupKind,
}

impl PartialEq for GroupSpec {
    fn eq(&self, other: &Self) -> bool {
        self.generators == other.generators && self.kind == other.kind
    }
}

impl Eq for GroupSpec {}

impl GroupSpec {
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Shared handle to a group. Cloning is cheap; equality is structural.
#[derive(Clone)]
pub struct Group {
    spec: Arc<GroupSpec>,
}

impl PartialEq for Group {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.spec, &other.spec) || self.spec == other.spec
    }
}

impl Eq for Group {}

impl fmt::Debug for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Group({})", self.spec.text)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec.text)
    }
}

impl Serialize for Group {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.spec.text)
    }
}

impl<'de> Deserialize<'de> for Group {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Group::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Group {
    pub fn parse(text: &str) -> Result<Group, GroupError> {
        let mut p = Parser { src: text, pos: 0 };
        p.skip_ws();
        let spec = p.parse_spec()?;
        p.skip_ws();
        if !p.eof() {
            return Err(perr(p.pos, "unexpected trailing input"));
        }
        Ok(Group { spec: Arc::new(spec) })
    }

    pub fn generators(&self) -> &[Generator] {
        &self.spec.generators
    }

    pub fn kind(&self) -> &GroupKind {
        &self.spec.kind
    }

    /// The source text the group was parsed from.
    pub fn text(&self) -> &str {
        &self.spec.text
    }

    pub fn identity(&self) -> Element {
        Element { group: self.clone(), word: Vec::new() }
    }

    pub fn generator(&self, idx: usize) -> Element {
        assert!(idx < self.spec.generators.len(), "generator index out of range");
        self.normal_form(vec![Letter::new(idx as u16, false)])
    }

    /// Canonicalizes an arbitrary letter string into an element.
    pub fn normal_form(&self, letters: Vec<Letter>) -> Element {
        let word = normal_form_letters(&self.spec, letters);
        Element { group: self.clone(), word }
    }

    /// Parses a word such as `a^2*b'` (letters, `'` for inverse, `^k` powers,
    /// `*` or whitespace as separators, `e` for the identity) and returns its
    /// canonical element.
    pub fn element(&self, text: &str) -> Result<Element, GroupError> {
        let mut p = Parser { src: text, pos: 0 };
        let letters = p.parse_word(&self.spec.generators)?;
        p.skip_ws();
        if !p.eof() {
            return Err(perr(p.pos, "unexpected trailing input"));
        }
        Ok(self.normal_form(letters))
    }

    /// All elements with `len() <= radius`, sorted by (length, shortlex).
    pub fn ball(&self, radius: usize, cap: Option<usize>) -> Result<Vec<Element>, GroupError> {
        let cap = cap.unwrap_or(usize::MAX);
        let mut seen: HashSet<Vec<Letter>> = HashSet::new();
        seen.insert(Vec::new());
        let mut frontier: Vec<Vec<Letter>> = vec![Vec::new()];
        let n_gens = self.spec.generators.len() as u16;
        for _ in 0..radius {
            let mut next: Vec<Vec<Letter>> = Vec::new();
            for w in &frontier {
                for g in 0..n_gens {
                    for inv in [false, true] {
                        let mut cand = w.clone();
                        cand.push(Letter::new(g, inv));
                        let nf = normal_form_letters(&self.spec, cand);
                        if seen.insert(nf.clone()) {
                            if seen.len() > cap {
                                return Err(GroupError::CapExceeded { cap });
                            }
                            next.push(nf);
                        }
                    }
                }
            }
            frontier = next;
        }
        let mut out: Vec<Element> = seen
            .into_iter()
            .map(|word| Element { group: self.clone(), word })
            .collect();
        out.sort();
        Ok(out)
    }

    pub fn render_letters(&self, letters: &[Letter]) -> String {
        render_word(letters, &self.spec.generators)
    }
}

/// A group element in canonical form.
#[derive(Clone)]
pub struct Element {
    group: Group,
    word: Vec<Letter>,
}

impl Element {
    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn word(&self) -> &[Letter] {
        &self.word
    }

    /// Word length of the canonical form (the exact word-metric length for
    /// every group form except non-confluent rewriting systems, where it is
    /// an upper bound).
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }

    pub fn mul(&self, other: &Element) -> Element {
        assert!(self.group == other.group, "elements belong to different groups");
        let mut letters = self.word.clone();
        letters.extend_from_slice(&other.word);
        self.group.normal_form(letters)
    }

    pub fn inv(&self) -> Element {
        let letters: Vec<Letter> = self.word.iter().rev().map(|l| l.inverse()).collect();
        self.group.normal_form(letters)
    }

    /// Left-invariant word metric: `len(g^-1 h)`.
    pub fn distance(&self, other: &Element) -> usize {
        self.inv().mul(other).len()
    }

    pub fn render(&self) -> String {
        render_word(&self.word, &self.group.spec.generators)
    }
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        self.word == other.word && self.group == other.group
    }
}

impl Eq for Element {}

impl std::hash::Hash for Element {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.word.hash(state);
    }
}

impl PartialOrd for Element {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Element {
    /// Shortlex: first by length, then letter ranks lexicographically.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        debug_assert!(self.group == other.group, "comparing elements of different groups");
        shortlex_cmp(&self.word, &other.word)
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn shortlex_cmp(a: &[Letter], b: &[Letter]) -> std::cmp::Ordering {
    a.len()
        .cmp(&b.len())
        .then_with(|| a.iter().map(|l| l.rank()).cmp(b.iter().map(|l| l.rank())))
}

fn shortlex_lt(a: &[Letter], b: &[Letter]) -> bool {
    shortlex_cmp(a, b) == std::cmp::Ordering::Less
}

// ---------------------------------------------------------------------------
// Normal forms
// ---------------------------------------------------------------------------

fn normal_form_letters(spec: &GroupSpec, letters: Vec<Letter>) -> Vec<Letter> {
    match &spec.kind {
        GroupKind::Free => free_reduce(&letters),
        GroupKind::Abelian => abelian_nf(spec.generators.len(), &letters),
        GroupKind::CyclicProduct { orders } => cyclic_product_nf(orders, &letters),
        GroupKind::Product { left, right } => product_nf(left, right, &letters),
        GroupKind::Rewriting { rules, .. } => rewriting_nf(rules, letters),
    }
}

fn free_reduce(letters: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::with_capacity(letters.len());
    for &l in letters {
        if out.last() == Some(&l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

fn abelian_nf(n_gens: usize, letters: &[Letter]) -> Vec<Letter> {
    let mut exps = vec![0i64; n_gens];
    for l in letters {
        exps[l.gen as usize] += if l.inv { -1 } else { 1 };
    }
    let mut out = Vec::new();
    for (g, &e) in exps.iter().enumerate() {
        let inv = e < 0;
        for _ in 0..e.unsigned_abs() {
            out.push(Letter::new(g as u16, inv));
        }
    }
    out
}

/// Reduces an exponent modulo a cyclic order, picking the representative of
/// smallest absolute value (ties, at n/2 for even n, resolve to the positive
/// one).
fn reduce_exp(e: i64, order: u64) -> i64 {
    if order == 0 {
        return e;
    }
    let n = order as i64;
    let mut r = e.rem_euclid(n);
    if 2 * r > n {
        r -= n;
    }
    r
}

fn cyclic_product_nf(orders: &[u64], letters: &[Letter]) -> Vec<Letter> {
    let mut stack: Vec<(u16, i64)> = Vec::new();
    for l in letters {
        let delta = if l.inv { -1 } else { 1 };
        if let Some(top) = stack.last_mut() {
            if top.0 == l.gen {
                top.1 = reduce_exp(top.1 + delta, orders[l.gen as usize]);
                if top.1 == 0 {
                    stack.pop();
                }
                continue;
            }
        }
        stack.push((l.gen, reduce_exp(delta, orders[l.gen as usize])));
    }
    let mut out = Vec::new();
    for (g, e) in stack {
        let inv = e < 0;
        for _ in 0..e.unsigned_abs() {
            out.push(Letter::new(g, inv));
        }
    }
    out
}

fn product_nf(left: &GroupSpec, right: &GroupSpec, letters: &[Letter]) -> Vec<Letter> {
    let nl = left.generators.len() as u16;
    let mut lw = Vec::new();
    let mut rw = Vec::new();
    for &l in letters {
        if l.gen < nl {
            lw.push(l);
        } else {
            rw.push(Letter::new(l.gen - nl, l.inv));
        }
    }
    let mut out = normal_form_letters(left, lw);
    for l in normal_form_letters(right, rw) {
        out.push(Letter::new(l.gen + nl, l.inv));
    }
    out
}

fn rewriting_nf(rules: &[RewriteRule], letters: Vec<Letter>) -> Vec<Letter> {
    let mut w = free_reduce(&letters);
    'scan: loop {
        for pos in 0..w.len() {
            for rule in rules {
                if w[pos..].starts_with(&rule.lhs) {
                    let mut next = Vec::with_capacity(w.len());
                    next.extend_from_slice(&w[..pos]);
                    next.extend_from_slice(&rule.rhs);
                    next.extend_from_slice(&w[pos + rule.lhs.len()..]);
                    w = free_reduce(&next);
                    continue 'scan;
                }
            }
        }
        return w;
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Canonical text form: runs collapse to powers (`a^2*b'`), the identity is
/// `e`, inverses use a postfix apostrophe.
pub fn render_word(letters: &[Letter], gens: &[Generator]) -> String {
    if letters.is_empty() {
        return "e".to_string();
    }
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < letters.len() {
        let l = letters[i];
        let mut run = 1;
        while i + run < letters.len() && letters[i + run] == l {
            run += 1;
        }
        let mut part = gens[l.gen as usize].symbol.clone();
        if l.inv {
            part.push('\'');
        }
        if run > 1 {
            part.push_str(&format!("^{}", run));
        }
        parts.push(part);
        i += run;
    }
    parts.join("*")
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

const MAX_EXPONENT: i64 = 1_000_000;

impl<'a> Parser<'a> {
    fn eof(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), GroupError> {
        self.skip_ws();
        if self.eat(c) {
            Ok(())
        } else {
            Err(perr(self.pos, format!("expected '{}'", c)))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), GroupError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return Err(perr(self.pos, format!("expected {}", what))),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        Ok((self.src[start..self.pos].to_string(), start))
    }

    /// Head keyword of a group form; allows '-' so `cyclic-product` lexes as
    /// one token.
    fn keyword(&mut self) -> (String, usize) {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            self.bump();
        }
        (self.src[start..self.pos].to_string(), start)
    }

    fn integer(&mut self) -> Result<i64, GroupError> {
        self.skip_ws();
        let start = self.pos;
        let neg = self.eat('-');
        if !matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            return Err(perr(self.pos, "expected integer"));
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        let digits = &self.src[start + neg as usize..self.pos];
        let v: i64 = digits
            .parse()
            .map_err(|_| perr(start, "integer out of range"))?;
        Ok(if neg { -v } else { v })
    }

    fn parse_spec(&mut self) -> Result<GroupSpec, GroupError> {
        self.skip_ws();
        let start = self.pos;
        let (head, head_at) = self.keyword();
        let spec = match head.as_str() {
            "free" => {
                let gens = self.paren_ident_list()?;
                GroupSpec { text: String::new(), generators: gens, kind: GroupKind::Free }
            }
            "abelian" => {
                self.expect('(')?;
                let at = self.pos;
                let n = self.integer()?;
                if n < 1 {
                    return Err(perr(at, "rank must be at least 1"));
                }
                self.expect(')')?;
                let gens = (1..=n).map(|i| Generator { symbol: format!("x{}", i) }).collect();
                GroupSpec { text: String::new(), generators: gens, kind: GroupKind::Abelian }
            }
            "cyclic-product" => {
                self.expect('(')?;
                let mut orders: Vec<u64> = Vec::new();
                loop {
                    self.skip_ws();
                    let at = self.pos;
                    let n = self.integer()?;
                    if n < 0 {
                        return Err(perr(at, "order must be nonnegative (0 means infinite)"));
                    }
                    if n == 1 {
                        return Err(perr(at, "order-1 factor is trivial; remove it"));
                    }
                    orders.push(n as u64);
                    self.skip_ws();
                    if self.eat(',') {
                        continue;
                    }
                    break;
                }
                self.expect(')')?;
                let gens = (1..=orders.len())
                    .map(|i| Generator { symbol: format!("g{}", i) })
                    .collect();
                GroupSpec {
                    text: String::new(),
                    generators: gens,
                    kind: GroupKind::CyclicProduct { orders },
                }
            }
            "product" => {
                self.expect('(')?;
                let left = self.parse_spec()?;
                self.expect(';')?;
                let right_at = {
                    self.skip_ws();
                    self.pos
                };
                let right = self.parse_spec()?;
                self.expect(')')?;
                let mut gens = left.generators.clone();
                gens.extend(right.generators.iter().cloned());
                let mut seen = HashSet::new();
                for g in &gens {
                    if !seen.insert(g.symbol.clone()) {
                        return Err(perr(
                            right_at,
                            format!("duplicate generator symbol '{}' across product factors", g.symbol),
                        ));
                    }
                }
                GroupSpec {
                    text: String::new(),
                    generators: gens,
                    kind: GroupKind::Product { left: Box::new(left), right: Box::new(right) },
                }
            }
            "rewriting" => {
                self.expect('(')?;
                let mut gens: Vec<Generator> = Vec::new();
                loop {
                    let (sym, at) = self.ident("generator name")?;
                    self.check_gen_symbol(&sym, at, &gens)?;
                    gens.push(Generator { symbol: sym });
                    self.skip_ws();
                    if self.eat(',') {
                        continue;
                    }
                    break;
                }
                self.skip_ws();
                if !self.eat('|') {
                    return Err(perr(self.pos, "expected '|' before rewrite rules"));
                }
                let mut raw_rules: Vec<(RewriteRule, usize)> = Vec::new();
                loop {
                    self.skip_ws();
                    let rule_at = self.pos;
                    let lhs = self.parse_word(&gens)?;
                    self.skip_ws();
                    if !(self.eat('-') && self.eat('>')) {
                        return Err(perr(self.pos, "expected '->' in rewrite rule"));
                    }
                    let rhs = self.parse_word(&gens)?;
                    raw_rules.push((RewriteRule { lhs, rhs }, rule_at));
                    self.skip_ws();
                    if self.eat(',') {
                        continue;
                    }
                    break;
                }
                self.expect(')')?;
                // Optional `confluent` marker after the closing paren.
                let save = self.pos;
                self.skip_ws();
                let confluent = if let Ok((word, _)) = self.ident("keyword") {
                    if word == "confluent" {
                        true
                    } else {
                        self.pos = save;
                        false
                    }
                } else {
                    self.pos = save;
                    false
                };
                let mut rules = Vec::new();
                for (rule, at) in raw_rules {
                    validate_rule(&rule, confluent, at)?;
                    rules.push(rule);
                }
                GroupSpec {
                    text: String::new(),
                    generators: gens,
                    kind: GroupKind::Rewriting { rules, confluent },
                }
            }
            "" => return Err(perr(head_at, "expected a group form")),
            other => {
                return Err(perr(head_at, format!("unknown group form '{}'", other)));
            }
        };
        let mut spec = spec;
        spec.text = self.src[start..self.pos].to_string();
        Ok(spec)
    }

    fn paren_ident_list(&mut self) -> Result<Vec<Generator>, GroupError> {
        self.expect('(')?;
        let mut gens: Vec<Generator> = Vec::new();
        loop {
            let (sym, at) = self.ident("generator name")?;
            self.check_gen_symbol(&sym, at, &gens)?;
            gens.push(Generator { symbol: sym });
            self.skip_ws();
            if self.eat(',') {
                continue;
            }
            break;
        }
        self.expect(')')?;
        Ok(gens)
    }

    fn check_gen_symbol(
        &self,
        sym: &str,
        at: usize,
        existing: &[Generator],
    ) -> Result<(), GroupError> {
        if sym == "e" {
            return Err(perr(at, "'e' is reserved for the identity"));
        }
        if existing.iter().any(|g| g.symbol == sym) {
            return Err(perr(at, format!("duplicate generator symbol '{}'", sym)));
        }
        Ok(())
    }

    /// Word grammar: factors are `sym`, `sym'`, `sym^k`, `sym'^k` (k may be
    /// negative) or the bare identity `e`; factors join with `*` or
    /// whitespace.
    fn parse_word(&mut self, gens: &[Generator]) -> Result<Vec<Letter>, GroupError> {
        let mut letters = Vec::new();
        let mut first = true;
        loop {
            self.skip_ws();
            let at = self.pos;
            match self.peek() {
                Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
                _ if first => return Err(perr(at, "expected a word")),
                _ => break,
            }
            let (sym, sym_at) = self.ident("generator name")?;
            if sym == "e" {
                if matches!(self.peek(), Some('\'') | Some('^')) {
                    return Err(perr(self.pos, "the identity takes no exponent"));
                }
            } else {
                let gen = gens
                    .iter()
                    .position(|g| g.symbol == sym)
                    .ok_or_else(|| perr(sym_at, format!("unknown generator '{}'", sym)))?
                    as u16;
                let mut inv = false;
                if self.eat('\'') {
                    inv = true;
                }
                let mut exp: i64 = 1;
                if self.eat('^') {
                    let at = self.pos;
                    exp = self.integer()?;
                    if exp.abs() > MAX_EXPONENT {
                        return Err(perr(at, "exponent too large"));
                    }
                }
                let l = Letter::new(gen, inv != (exp < 0));
                for _ in 0..exp.unsigned_abs() {
                    letters.push(l);
                }
            }
            first = false;
            self.skip_ws();
            if self.eat('*') {
                first = true; // a factor must follow an explicit '*'
                continue;
            }
        }
        Ok(letters)
    }
}

fn validate_rule(rule: &RewriteRule, confluent: bool, at: usize) -> Result<(), GroupError> {
    if rule.lhs.is_empty() {
        return Err(perr(at, "rewrite rule left side must not be empty"));
    }
    if free_reduce(&rule.lhs) != rule.lhs {
        return Err(perr(at, "rewrite rule left side is not freely reduced"));
    }
    if free_reduce(&rule.rhs) != rule.rhs {
        return Err(perr(at, "rewrite rule right side is not freely reduced"));
    }
    if confluent {
        if !shortlex_lt(&rule.rhs, &rule.lhs) {
            return Err(perr(at, "rewrite rule must be shortlex-reducing"));
        }
    } else if rule.rhs.len() >= rule.lhs.len() {
        return Err(perr(
            at,
            "rewrite rule must shorten words (append 'confluent' to allow equal-length shortlex-reducing rules)",
        ));
    }
    Ok(())
}
