//! Linear programs that measure the best achievable certificate variation
//! over a finite window, solved in exact rational arithmetic.
//!
//! Two instance families are built here:
//!
//! - **variation LP**: variables `f[x][k] ≥ 0` for every window element `x`
//!   and admissible vertex `k` (those with `ρ(x,k) < S`), normalized per
//!   `x`; the objective minimizes the worst ℓ¹ distance between `f(x)` and
//!   `f(y)` over window pairs at distance at most `R`.
//! - **invariant-mean LP**: a single measure `μ ≥ 0` on the vertices with
//!   `ρ(e,k) ≤ r`, normalized; the objective minimizes the worst
//!   `‖s·μ − μ‖₁` over a generator set. Mass pushed outside the support set
//!   counts fully toward the ℓ¹ difference, so a finite-window optimum is a
//!   valid lower bound for any measure confined to that support radius.
//!
//! The solver is a dense two-phase simplex over exact rationals. Pivoting
//! starts with Dantzig's rule and permanently switches to Bland's rule after
//! a long degenerate streak, which guarantees termination. A floating-point
//! variant of the same code path exists for exploratory sizing only; its
//! results are never certifying.

use crate::cert::{CertError, Convention, Entries, ProbCertificate, Support};
use crate::coset::{CosetError, CosetSpace};
use crate::group::{Element, GroupError};
use crate::rat::Rat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use serde::Serialize;
use std::collections::BTreeMap;

/// Comparison tolerance for the non-certifying floating-point solver.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

/// Default bound on simplex pivots before giving up.
pub const DEFAULT_PIVOT_CAP: usize = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error("no admissible support vertex for '{x}' (support radius too small)")]
    EmptySupport { x: String },
    #[error("coset space too shallow: depth {depth} enumerated, {needed} required")]
    ShallowSpace { needed: usize, depth: usize },
    #[error("ill-formed instance: {0}")]
    BadInstance(String),
    #[error("search ended without an optimum: {status:?}")]
    SolveFailed { status: LpStatus },
    #[error(transparent)]
    Coset(#[from] CosetError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Cert(#[from] CertError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

/// One constraint row: `Σ coeff·var  rel  rhs`.
#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<(usize, Rat)>,
    pub rel: Relation,
    pub rhs: Rat,
}

/// What a structural variable stands for.
#[derive(Clone, Debug)]
pub enum VarKind {
    /// The minimized bound `t`.
    Objective,
    /// Mass of window element `x` at a vertex.
    Mass { x: Element, vertex: usize },
    /// Mass of the single measure at a vertex.
    MeasureMass { vertex: usize },
    /// An ℓ¹ linearization slack.
    Slack,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpKind {
    Variation,
    InvariantMean,
    Custom,
}

#[derive(Clone, Debug)]
pub struct InstanceMeta {
    pub kind: LpKind,
    pub window: u32,
    pub s: u32,
    pub r: u32,
    pub convention: Convention,
}

/// A minimization instance over nonnegative variables.
#[derive(Clone, Debug)]
pub struct LpInstance {
    pub names: Vec<String>,
    pub kinds: Vec<VarKind>,
    pub rows: Vec<Row>,
    /// Sparse objective, minimized.
    pub objective: Vec<(usize, Rat)>,
    pub meta: InstanceMeta,
    /// Human-readable notes mapping variable names back to their meaning.
    pub legend: Vec<String>,
}

impl LpInstance {
    pub fn num_variables(&self) -> usize {
        self.names.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn shape_note(&self) -> String {
        format!(
            "{} variables, {} constraints",
            self.num_variables(),
            self.num_constraints()
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    CapExceeded,
}

impl Serialize for LpStatus {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
            LpStatus::CapExceeded => "cap-exceeded",
        })
    }
}

/// Exact solver outcome. `optimum` is present only on `Optimal`;
/// `incumbent` carries the objective of the basic solution in progress when
/// the pivot cap was exceeded during the optimization phase.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub optimum: Option<Rat>,
    pub incumbent: Option<Rat>,
    pub assignment: Vec<Rat>,
    pub pivots: usize,
}

/// Floating-point outcome; exploratory only, never certifying.
#[derive(Clone, Debug)]
pub struct FloatLpSolution {
    pub status: LpStatus,
    pub optimum: Option<f64>,
    pub assignment: Vec<f64>,
    pub pivots: usize,
}

impl FloatLpSolution {
    /// Floating-point results can never instantiate a strict-inequality
    /// verdict.
    pub fn certifying(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Scalar abstraction: exact rationals or tolerance-based floats
// ---------------------------------------------------------------------------

pub trait Scalar: Clone + PartialOrd + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn negligible(&self) -> bool;
    fn from_rat(r: &Rat) -> Self;
}

impl Scalar for Rat {
    fn zero() -> Self {
        Rat::zero()
    }
    fn one() -> Self {
        Rat::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn negligible(&self) -> bool {
        self.is_zero()
    }
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn negligible(&self) -> bool {
        self.abs() < FLOAT_TOLERANCE
    }
    fn from_rat(r: &Rat) -> Self {
        r.to_f64_lossy()
    }
}

// ---------------------------------------------------------------------------
// Dense two-phase simplex
// ---------------------------------------------------------------------------

struct Tableau<T> {
    nstruct: usize,
    ncols: usize,
    a: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    /// Columns barred from entering (retired artificials).
    banned: Vec<bool>,
    artificial_flags: Vec<bool>,
    reduced: Vec<T>,
    pivots: usize,
    use_bland: bool,
    streak: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    CapExceeded,
}

impl<T: Scalar> Tableau<T> {
    fn build(inst: &LpInstance) -> Tableau<T> {
        let n = inst.names.len();
        let m = inst.rows.len();

        // Normalize every row to nonnegative rhs.
        let mut rows: Vec<(Vec<(usize, Rat)>, Relation, Rat)> = Vec::with_capacity(m);
        for row in &inst.rows {
            if row.rhs.is_negative() {
                let coeffs = row.coeffs.iter().map(|(j, c)| (*j, -c.clone())).collect();
                let rel = match row.rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                rows.push((coeffs, rel, -row.rhs.clone()));
            } else {
                rows.push((row.coeffs.clone(), row.rel, row.rhs.clone()));
            }
        }

        let extra: usize = rows
            .iter()
            .map(|(_, rel, _)| match rel {
                Relation::Le => 1,
                Relation::Ge => 2, // surplus + artificial
                Relation::Eq => 1, // artificial
            })
            .sum();
        let ncols = n + extra;

        let mut a = vec![vec![T::zero(); ncols]; m];
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let banned = vec![false; ncols];
        let mut artificial = vec![false; ncols];
        let mut next = n;
        for (i, (coeffs, rel, b)) in rows.iter().enumerate() {
            for (j, c) in coeffs {
                a[i][*j] = a[i][*j].add(&T::from_rat(c));
            }
            rhs.push(T::from_rat(b));
            match rel {
                Relation::Le => {
                    a[i][next] = T::one();
                    basis.push(next);
                    next += 1;
                }
                Relation::Ge => {
                    a[i][next] = T::zero().sub(&T::one());
                    next += 1;
                    a[i][next] = T::one();
                    artificial[next] = true;
                    basis.push(next);
                    next += 1;
                }
                Relation::Eq => {
                    a[i][next] = T::one();
                    artificial[next] = true;
                    basis.push(next);
                    next += 1;
                }
            }
        }
        Tableau {
            nstruct: n,
            ncols,
            a,
            rhs,
            basis,
            banned,
            artificial_flags: artificial,
            reduced: vec![T::zero(); ncols],
            pivots: 0,
            use_bland: false,
            streak: 0,
        }
    }

    fn objective_value(&self, costs: &[T]) -> T {
        let mut z = T::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            if !costs[b].negligible() {
                z = z.add(&costs[b].mul(&self.rhs[i]));
            }
        }
        z
    }

    fn set_costs(&mut self, costs: &[T]) {
        for j in 0..self.ncols {
            let mut r = costs[j].clone();
            for (i, &b) in self.basis.iter().enumerate() {
                if !costs[b].negligible() && !self.a[i][j].negligible() {
                    r = r.sub(&costs[b].mul(&self.a[i][j]));
                }
            }
            self.reduced[j] = r;
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a[row][col].clone();
        for v in &mut self.a[row] {
            if !v.negligible() {
                *v = v.div(&piv);
            } else {
                *v = T::zero();
            }
        }
        self.rhs[row] = self.rhs[row].div(&piv);
        let prow = self.a[row].clone();
        let prhs = self.rhs[row].clone();
        for i in 0..self.a.len() {
            if i == row {
                continue;
            }
            let f = self.a[i][col].clone();
            if f.negligible() {
                continue;
            }
            for j in 0..self.ncols {
                if !prow[j].negligible() {
                    self.a[i][j] = self.a[i][j].sub(&f.mul(&prow[j]));
                }
            }
            self.rhs[i] = self.rhs[i].sub(&f.mul(&prhs));
        }
        let f = self.reduced[col].clone();
        if !f.negligible() {
            for j in 0..self.ncols {
                if !prow[j].negligible() {
                    self.reduced[j] = self.reduced[j].sub(&f.mul(&prow[j]));
                }
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    fn run_phase(&mut self, costs: &[T], cap: usize) -> PhaseEnd {
        let m = self.a.len();
        loop {
            // Entering column.
            let mut enter: Option<usize> = None;
            if self.use_bland {
                for j in 0..self.ncols {
                    if self.banned[j] {
                        continue;
                    }
                    let r = &self.reduced[j];
                    if *r < T::zero() && !r.negligible() {
                        enter = Some(j);
                        break;
                    }
                }
            } else {
                let mut best: Option<(usize, T)> = None;
                for j in 0..self.ncols {
                    if self.banned[j] {
                        continue;
                    }
                    let r = &self.reduced[j];
                    if *r < T::zero() && !r.negligible() {
                        if best.as_ref().map_or(true, |(_, b)| *r < *b) {
                            best = Some((j, r.clone()));
                        }
                    }
                }
                enter = best.map(|(j, _)| j);
            }
            let Some(col) = enter else {
                return PhaseEnd::Optimal;
            };

            // Leaving row: minimum ratio; ties toward the smallest basic
            // variable (Bland) or smallest row (Dantzig).
            let mut leave: Option<(usize, T)> = None;
            for i in 0..m {
                let aic = &self.a[i][col];
                if *aic > T::zero() && !aic.negligible() {
                    let ratio = self.rhs[i].div(aic);
                    let better = match &leave {
                        None => true,
                        Some((li, best)) => {
                            if ratio < *best {
                                true
                            } else if ratio > *best {
                                false
                            } else if self.use_bland {
                                self.basis[i] < self.basis[*li]
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return PhaseEnd::Unbounded;
            };

            if self.pivots >= cap {
                return PhaseEnd::CapExceeded;
            }
            let before = self.objective_value(costs);
            self.pivot(row, col);
            let after = self.objective_value(costs);
            if after == before {
                self.streak += 1;
                if self.streak > m {
                    self.use_bland = true;
                }
            } else {
                self.streak = 0;
            }
        }
    }

    fn assignment(&self) -> Vec<T> {
        let mut x = vec![T::zero(); self.nstruct];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.nstruct {
                x[b] = self.rhs[i].clone();
            }
        }
        x
    }
}

struct RawSolution<T> {
    status: LpStatus,
    optimum: Option<T>,
    incumbent: Option<T>,
    assignment: Vec<T>,
    pivots: usize,
}

fn solve_generic<T: Scalar>(inst: &LpInstance, cap: usize) -> RawSolution<T> {
    let mut t: Tableau<T> = Tableau::build(inst);
    let m = t.a.len();

    // Phase 1: drive artificial variables to zero.
    let have_artificials = t.artificial_flags.iter().any(|&b| b);
    if have_artificials {
        let costs: Vec<T> = t
            .artificial_flags
            .iter()
            .map(|&art| if art { T::one() } else { T::zero() })
            .collect();
        t.set_costs(&costs);
        match t.run_phase(&costs, cap) {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => unreachable!("phase-1 objective is bounded below by zero"),
            PhaseEnd::CapExceeded => {
                return RawSolution {
                    status: LpStatus::CapExceeded,
                    optimum: None,
                    incumbent: None,
                    assignment: t.assignment(),
                    pivots: t.pivots,
                }
            }
        }
        if !t.objective_value(&costs).negligible() {
            return RawSolution {
                status: LpStatus::Infeasible,
                optimum: None,
                incumbent: None,
                assignment: t.assignment(),
                pivots: t.pivots,
            };
        }
        // Retire artificials: pivot basic ones out where possible, then bar
        // them all from re-entering.
        for i in 0..m {
            if t.artificial_flags[t.basis[i]] {
                let col = (0..t.ncols)
                    .find(|&j| !t.artificial_flags[j] && !t.a[i][j].negligible());
                if let Some(j) = col {
                    t.pivot(i, j);
                }
            }
        }
        for j in 0..t.ncols {
            if t.artificial_flags[j] {
                t.banned[j] = true;
            }
        }
    }

    // Phase 2: the real objective.
    let mut costs = vec![T::zero(); t.ncols];
    for (j, c) in &inst.objective {
        costs[*j] = costs[*j].add(&T::from_rat(c));
    }
    t.set_costs(&costs);
    match t.run_phase(&costs, cap) {
        PhaseEnd::Optimal => RawSolution {
            status: LpStatus::Optimal,
            optimum: Some(t.objective_value(&costs)),
            incumbent: None,
            assignment: t.assignment(),
            pivots: t.pivots,
        },
        PhaseEnd::Unbounded => RawSolution {
            status: LpStatus::Unbounded,
            optimum: None,
            incumbent: None,
            assignment: t.assignment(),
            pivots: t.pivots,
        },
        PhaseEnd::CapExceeded => RawSolution {
            status: LpStatus::CapExceeded,
            optimum: None,
            incumbent: Some(t.objective_value(&costs)),
            assignment: t.assignment(),
            pivots: t.pivots,
        },
    }
}

/// Solves exactly with the default pivot cap.
pub fn solve_lp(inst: &LpInstance) -> LpSolution {
    solve_lp_with_cap(inst, DEFAULT_PIVOT_CAP)
}

pub fn solve_lp_with_cap(inst: &LpInstance, cap: usize) -> LpSolution {
    let raw = solve_generic::<Rat>(inst, cap);
    LpSolution {
        status: raw.status,
        optimum: raw.optimum,
        incumbent: raw.incumbent,
        assignment: raw.assignment,
        pivots: raw.pivots,
    }
}

/// Non-certifying floating-point solve for exploratory sizing.
pub fn solve_lp_float(inst: &LpInstance) -> FloatLpSolution {
    let raw = solve_generic::<f64>(inst, DEFAULT_PIVOT_CAP);
    FloatLpSolution {
        status: raw.status,
        optimum: raw.optimum,
        assignment: raw.assignment,
        pivots: raw.pivots,
    }
}

// ---------------------------------------------------------------------------
// Instance builders
// ---------------------------------------------------------------------------

/// Builds the variation LP: minimize the worst ℓ¹ distance `‖f(x) − f(y)‖₁`
/// over window pairs with `d(x,y) ≤ R`, subject to per-element normalization
/// and supports confined to `ρ(x,k) < S`.
pub fn build_variation_lp(
    cs: &CosetSpace,
    window: u32,
    s: u32,
    r: u32,
) -> Result<LpInstance, LpError> {
    let group = cs.ambient();
    let win = group.ball(window as usize, None)?;

    let reach = (window + s) as usize;
    if cs.depth() + 1 < reach && !cs.is_generator_closed() {
        return Err(LpError::ShallowSpace {
            needed: reach.saturating_sub(1),
            depth: cs.depth(),
        });
    }

    // Admissible support of each window element. Only vertices within
    // window + S − 1 of the base points can qualify.
    let candidates = cs.vertices_within(reach.saturating_sub(1).min(cs.depth()));
    let mut admissible: Vec<Vec<usize>> = Vec::with_capacity(win.len());
    for x in &win {
        let mut verts = Vec::new();
        for &v in &candidates {
            match cs.rho(x, v) {
                Ok(d) if (d as u64) < s as u64 => verts.push(v),
                Ok(_) => {}
                Err(CosetError::OutOfWindow) => {}
                Err(e) => return Err(e.into()),
            }
        }
        if verts.is_empty() {
            return Err(LpError::EmptySupport { x: x.render() });
        }
        admissible.push(verts);
    }

    let mut names = vec!["t".to_string()];
    let mut kinds = vec![VarKind::Objective];
    let mut legend = Vec::new();
    let mut var_of: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); win.len()];
    for (xi, x) in win.iter().enumerate() {
        for &v in &admissible[xi] {
            let idx = names.len();
            names.push(format!("f_{}_{}", xi, v));
            kinds.push(VarKind::Mass { x: x.clone(), vertex: v });
            legend.push(format!(
                "f_{}_{} = mass of '{}' at vertex ({}, '{}')",
                xi,
                v,
                x.render(),
                cs.component(v),
                cs.transporter(v).render()
            ));
            var_of[xi].insert(v, idx);
        }
    }

    let mut rows = Vec::new();
    for (xi, _) in win.iter().enumerate() {
        let coeffs = var_of[xi].values().map(|&j| (j, Rat::one())).collect();
        rows.push(Row { coeffs, rel: Relation::Eq, rhs: Rat::one() });
    }

    let mut slack = 0usize;
    for xi in 0..win.len() {
        for yi in (xi + 1)..win.len() {
            let d = win[xi].distance(&win[yi]);
            if d == 0 || d > r as usize {
                continue;
            }
            let mut union: Vec<usize> = admissible[xi]
                .iter()
                .chain(admissible[yi].iter())
                .copied()
                .collect();
            union.sort_unstable();
            union.dedup();
            let mut tsum: Vec<(usize, Rat)> = Vec::with_capacity(2 * union.len() + 1);
            for v in union {
                let dp = names.len();
                names.push(format!("dp_{}", slack));
                kinds.push(VarKind::Slack);
                let dm = names.len();
                names.push(format!("dm_{}", slack));
                kinds.push(VarKind::Slack);
                slack += 1;
                let mut coeffs = Vec::with_capacity(4);
                if let Some(&j) = var_of[yi].get(&v) {
                    coeffs.push((j, Rat::one()));
                }
                if let Some(&j) = var_of[xi].get(&v) {
                    coeffs.push((j, -Rat::one()));
                }
                coeffs.push((dp, -Rat::one()));
                coeffs.push((dm, Rat::one()));
                rows.push(Row { coeffs, rel: Relation::Eq, rhs: Rat::zero() });
                tsum.push((dp, Rat::one()));
                tsum.push((dm, Rat::one()));
            }
            tsum.push((0, -Rat::one()));
            rows.push(Row { coeffs: tsum, rel: Relation::Le, rhs: Rat::zero() });
        }
    }

    Ok(LpInstance {
        names,
        kinds,
        rows,
        objective: vec![(0, Rat::one())],
        meta: InstanceMeta {
            kind: LpKind::Variation,
            window,
            s,
            r,
            convention: Convention::ReiterCentered,
        },
        legend,
    })
}

/// Builds the invariant-mean LP on the support set `{k : ρ(e,k) ≤ radius}`:
/// minimize the worst `‖s·μ − μ‖₁` over the given generators.
pub fn build_mean_lp(
    cs: &CosetSpace,
    radius: u32,
    gens: &[Element],
) -> Result<LpInstance, LpError> {
    if gens.is_empty() {
        return Err(LpError::BadInstance("generator set is empty".into()));
    }
    let support = cs.vertices_within(radius as usize);
    if support.is_empty() {
        return Err(LpError::EmptySupport { x: "e".to_string() });
    }
    let in_support: std::collections::BTreeSet<usize> = support.iter().copied().collect();

    let shallow = |e: CosetError| match e {
        CosetError::OutOfWindow => LpError::ShallowSpace {
            needed: radius as usize + 1,
            depth: cs.depth(),
        },
        other => LpError::Coset(other),
    };

    let mut names = vec!["t".to_string()];
    let mut kinds = vec![VarKind::Objective];
    let mut legend = Vec::new();
    let mut var_of: BTreeMap<usize, usize> = BTreeMap::new();
    for &v in &support {
        let idx = names.len();
        names.push(format!("mu_{}", v));
        kinds.push(VarKind::MeasureMass { vertex: v });
        legend.push(format!(
            "mu_{} = mass at vertex ({}, '{}')",
            v,
            cs.component(v),
            cs.transporter(v).render()
        ));
        var_of.insert(v, idx);
    }

    let mut rows = Vec::new();
    rows.push(Row {
        coeffs: var_of.values().map(|&j| (j, Rat::one())).collect(),
        rel: Relation::Eq,
        rhs: Rat::one(),
    });

    let mut slack = 0usize;
    for s in gens {
        let sinv = s.inv();
        let mut targets: std::collections::BTreeSet<usize> = in_support.clone();
        for &v in &support {
            targets.insert(cs.act(s, v).map_err(shallow)?);
        }
        let mut tsum: Vec<(usize, Rat)> = Vec::new();
        for v in targets {
            let pre = cs.act(&sinv, v).map_err(shallow)?;
            let pre_in = in_support.contains(&pre);
            let v_in = in_support.contains(&v);
            if pre_in && pre == v {
                continue; // the difference at this vertex is identically 0
            }
            let dp = names.len();
            names.push(format!("dp_{}", slack));
            kinds.push(VarKind::Slack);
            let dm = names.len();
            names.push(format!("dm_{}", slack));
            kinds.push(VarKind::Slack);
            slack += 1;
            let mut coeffs = Vec::with_capacity(4);
            if pre_in {
                coeffs.push((var_of[&pre], Rat::one()));
            }
            if v_in {
                coeffs.push((var_of[&v], -Rat::one()));
            }
            coeffs.push((dp, -Rat::one()));
            coeffs.push((dm, Rat::one()));
            rows.push(Row { coeffs, rel: Relation::Eq, rhs: Rat::zero() });
            tsum.push((dp, Rat::one()));
            tsum.push((dm, Rat::one()));
        }
        tsum.push((0, -Rat::one()));
        rows.push(Row { coeffs: tsum, rel: Relation::Le, rhs: Rat::zero() });
    }

    Ok(LpInstance {
        names,
        kinds,
        rows,
        objective: vec![(0, Rat::one())],
        meta: InstanceMeta {
            kind: LpKind::InvariantMean,
            window: radius,
            s: radius,
            r: 1,
            convention: Convention::ReiterCentered,
        },
        legend,
    })
}

// ---------------------------------------------------------------------------
// Solution extraction
// ---------------------------------------------------------------------------

/// Reassembles the per-element probability vectors of an optimal variation
/// LP solution into a certificate. Normalization rows guarantee exact unit
/// mass.
pub fn solution_certificate(
    inst: &LpInstance,
    sol: &LpSolution,
) -> Result<ProbCertificate, LpError> {
    if sol.status != LpStatus::Optimal {
        return Err(LpError::SolveFailed { status: sol.status });
    }
    let mut entries: Entries<Rat> = BTreeMap::new();
    for (j, kind) in inst.kinds.iter().enumerate() {
        if let VarKind::Mass { x, vertex } = kind {
            let value = sol.assignment[j].clone();
            entries
                .entry(x.clone())
                .or_default()
                .insert(*vertex, value);
        }
    }
    Ok(ProbCertificate::new(Convention::ReiterCentered, entries)?)
}

/// Extracts the measure of an optimal invariant-mean LP solution.
pub fn solution_measure(inst: &LpInstance, sol: &LpSolution) -> Result<Support<Rat>, LpError> {
    if sol.status != LpStatus::Optimal {
        return Err(LpError::SolveFailed { status: sol.status });
    }
    let mut out: Support<Rat> = BTreeMap::new();
    for (j, kind) in inst.kinds.iter().enumerate() {
        if let VarKind::MeasureMass { vertex } = kind {
            let value = sol.assignment[j].clone();
            if !value.is_zero() {
                out.insert(*vertex, value);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Optimum curves
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub window: u32,
    pub s: u32,
    pub optimum: Rat,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimumCurve {
    pub points: Vec<CurvePoint>,
    pub non_increasing: bool,
}

fn finish_curve(points: Vec<CurvePoint>) -> OptimumCurve {
    let non_increasing = points.windows(2).all(|w| w[0].optimum >= w[1].optimum);
    OptimumCurve { points, non_increasing }
}

/// Solves the variation LP across a list of windows, choosing `S` per
/// window.
pub fn variation_curve(
    cs: &CosetSpace,
    windows: &[u32],
    r: u32,
    s_policy: impl Fn(u32) -> u32,
) -> Result<OptimumCurve, LpError> {
    let mut points = Vec::with_capacity(windows.len());
    for &w in windows {
        let s = s_policy(w);
        let inst = build_variation_lp(cs, w, s, r)?;
        let sol = solve_lp(&inst);
        let optimum = sol
            .optimum
            .ok_or(LpError::SolveFailed { status: sol.status })?;
        points.push(CurvePoint { window: w, s, optimum });
    }
    Ok(finish_curve(points))
}

/// Solves the invariant-mean LP across a list of support radii.
pub fn mean_curve(
    cs: &CosetSpace,
    radii: &[u32],
    gens: &[Element],
) -> Result<OptimumCurve, LpError> {
    let mut points = Vec::with_capacity(radii.len());
    for &rad in radii {
        let inst = build_mean_lp(cs, rad, gens)?;
        let sol = solve_lp(&inst);
        let optimum = sol
            .optimum
            .ok_or(LpError::SolveFailed { status: sol.status })?;
        points.push(CurvePoint { window: rad, s: rad, optimum });
    }
    Ok(finish_curve(points))
}

/// CSV rendering: one row per point, exact numerator and denominator.
pub fn curve_csv(curve: &OptimumCurve) -> String {
    let mut out = String::from("window,S,optimum_num,optimum_den\n");
    for p in &curve.points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.window,
            p.s,
            p.optimum.numer(),
            p.optimum.denom()
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Interchange-format export
// ---------------------------------------------------------------------------

fn scale_of(rats: &[&Rat]) -> BigInt {
    let mut l = BigInt::from(1);
    for r in rats {
        l = l.lcm(r.denom());
    }
    l
}

fn scaled_term(c: &Rat, scale: &BigInt) -> BigInt {
    let v = c.as_big() * BigRational::from_integer(scale.clone());
    debug_assert!(v.is_integer());
    v.to_integer()
}

/// Renders the instance in the plain LP text interchange format understood
/// by mainstream solvers, with every row scaled to integer coefficients.
/// Variables are nonnegative by the format's default bounds.
pub fn lp_text(inst: &LpInstance) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "\\ kind={:?} window={} S={} R={} ({})\n",
        inst.meta.kind,
        inst.meta.window,
        inst.meta.s,
        inst.meta.r,
        inst.shape_note()
    ));
    for line in &inst.legend {
        out.push_str("\\ ");
        out.push_str(line);
        out.push('\n');
    }

    let obj_rats: Vec<&Rat> = inst.objective.iter().map(|(_, c)| c).collect();
    let obj_scale = scale_of(&obj_rats);
    if obj_scale != BigInt::from(1) {
        out.push_str(&format!("\\ objective scaled by {}\n", obj_scale));
    }
    out.push_str("Minimize\n obj:");
    for (first, (j, c)) in inst.objective.iter().enumerate().map(|(i, t)| (i == 0, t)) {
        let k = scaled_term(c, &obj_scale);
        push_term(&mut out, first, &k, &inst.names[*j]);
    }
    out.push_str("\nSubject To\n");
    for (i, row) in inst.rows.iter().enumerate() {
        let mut rats: Vec<&Rat> = row.coeffs.iter().map(|(_, c)| c).collect();
        rats.push(&row.rhs);
        let scale = scale_of(&rats);
        out.push_str(&format!(" r{}:", i));
        for (first, (j, c)) in row.coeffs.iter().enumerate().map(|(i, t)| (i == 0, t)) {
            let k = scaled_term(c, &scale);
            push_term(&mut out, first, &k, &inst.names[*j]);
        }
        let rel = match row.rel {
            Relation::Eq => "=",
            Relation::Le => "<=",
            Relation::Ge => ">=",
        };
        out.push_str(&format!(" {} {}\n", rel, scaled_term(&row.rhs, &scale)));
    }
    out.push_str("End\n");
    out
}

fn push_term(out: &mut String, first: bool, k: &BigInt, name: &str) {
    use num_traits::Signed;
    let mag = k.abs();
    if k.is_negative() {
        out.push_str(" -");
    } else if !first {
        out.push_str(" +");
    }
    out.push_str(&format!(" {} {}", mag, name));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{certificate_to_json, verify, CertParams, Certificate};
    use crate::coset::{BuildOptions, Subgroup};
    use crate::group::Group;

    fn adhoc(names: &[&str], rows: Vec<Row>, objective: Vec<(usize, Rat)>) -> LpInstance {
        LpInstance {
            names: names.iter().map(|s| s.to_string()).collect(),
            kinds: names.iter().map(|_| VarKind::Slack).collect(),
            rows,
            objective,
            meta: InstanceMeta {
                kind: LpKind::Custom,
                window: 0,
                s: 0,
                r: 0,
                convention: Convention::ReiterCentered,
            },
            legend: Vec::new(),
        }
    }

    fn line_space(depth: usize) -> (Group, CosetSpace) {
        let g = Group::parse("abelian(1)").unwrap();
        let sub = Subgroup { label: "1".to_string(), generators: vec![] };
        let cs = CosetSpace::build(&g, vec![sub], depth, &BuildOptions::default()).unwrap();
        (g, cs)
    }

    fn grid_space(depth: usize) -> (Group, CosetSpace) {
        let g = Group::parse("abelian(2)").unwrap();
        let sub = Subgroup { label: "1".to_string(), generators: vec![] };
        let cs = CosetSpace::build(&g, vec![sub], depth, &BuildOptions::default()).unwrap();
        (g, cs)
    }

    fn z_mod_2_space() -> (Group, CosetSpace) {
        let g = Group::parse("abelian(1)").unwrap();
        let sub = Subgroup {
            label: "2Z".to_string(),
            generators: vec![g.element("x1^2").unwrap()],
        };
        let cs = CosetSpace::build(&g, vec![sub], 2, &BuildOptions::default()).unwrap();
        (g, cs)
    }

    #[test]
    fn symmetric_two_piece_minimum() {
        // min t s.t. t >= x, t >= 1-x, x <= 1.
        let inst = adhoc(
            &["t", "x"],
            vec![
                Row {
                    coeffs: vec![(0, Rat::one()), (1, -Rat::one())],
                    rel: Relation::Ge,
                    rhs: Rat::zero(),
                },
                Row {
                    coeffs: vec![(0, Rat::one()), (1, Rat::one())],
                    rel: Relation::Ge,
                    rhs: Rat::one(),
                },
                Row { coeffs: vec![(1, Rat::one())], rel: Relation::Le, rhs: Rat::one() },
            ],
            vec![(0, Rat::one())],
        );
        let sol = solve_lp(&inst);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.optimum.unwrap(), Rat::new(1, 2));
        assert_eq!(sol.assignment[1], Rat::new(1, 2));
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let inst = adhoc(
            &["x"],
            vec![
                Row { coeffs: vec![(0, Rat::one())], rel: Relation::Ge, rhs: Rat::one() },
                Row { coeffs: vec![(0, Rat::one())], rel: Relation::Le, rhs: Rat::zero() },
            ],
            vec![(0, Rat::one())],
        );
        assert_eq!(solve_lp(&inst).status, LpStatus::Infeasible);
    }

    #[test]
    fn missing_upper_bound_is_unbounded() {
        let inst = adhoc(&["x"], vec![], vec![(0, -Rat::one())]);
        assert_eq!(solve_lp(&inst).status, LpStatus::Unbounded);
    }

    fn beale() -> LpInstance {
        // A classic degenerate instance that cycles under naive pivoting.
        adhoc(
            &["x1", "x2", "x3", "x4"],
            vec![
                Row {
                    coeffs: vec![
                        (0, Rat::new(1, 4)),
                        (1, Rat::from_int(-60)),
                        (2, Rat::new(-1, 25)),
                        (3, Rat::from_int(9)),
                    ],
                    rel: Relation::Le,
                    rhs: Rat::zero(),
                },
                Row {
                    coeffs: vec![
                        (0, Rat::new(1, 2)),
                        (1, Rat::from_int(-90)),
                        (2, Rat::new(-1, 50)),
                        (3, Rat::from_int(3)),
                    ],
                    rel: Relation::Le,
                    rhs: Rat::zero(),
                },
                Row { coeffs: vec![(2, Rat::one())], rel: Relation::Le, rhs: Rat::one() },
            ],
            vec![
                (0, Rat::new(-3, 4)),
                (1, Rat::from_int(150)),
                (2, Rat::new(-1, 50)),
                (3, Rat::from_int(6)),
            ],
        )
    }

    #[test]
    fn degenerate_instance_terminates_with_exact_optimum() {
        let sol = solve_lp(&beale());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.optimum.unwrap(), Rat::new(-1, 20));
        assert_eq!(
            sol.assignment,
            vec![Rat::new(1, 25), Rat::zero(), Rat::one(), Rat::zero()]
        );
    }

    #[test]
    fn pivot_cap_reports_cap_exceeded() {
        let sol = solve_lp_with_cap(&beale(), 1);
        assert_eq!(sol.status, LpStatus::CapExceeded);
        assert!(sol.optimum.is_none());
    }

    #[test]
    fn float_variant_is_close_but_never_certifying() {
        let inst = adhoc(
            &["t", "x"],
            vec![
                Row {
                    coeffs: vec![(0, Rat::one()), (1, -Rat::one())],
                    rel: Relation::Ge,
                    rhs: Rat::zero(),
                },
                Row {
                    coeffs: vec![(0, Rat::one()), (1, Rat::one())],
                    rel: Relation::Ge,
                    rhs: Rat::one(),
                },
            ],
            vec![(0, Rat::one())],
        );
        let sol = solve_lp_float(&inst);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.optimum.unwrap() - 0.5).abs() < 1e-9);
        assert!(!sol.certifying());
    }

    #[test]
    fn window_zero_has_no_pairs_and_optimum_zero() {
        let (_, cs) = line_space(2);
        let inst = build_variation_lp(&cs, 0, 1, 0).unwrap();
        let sol = solve_lp(&inst);
        assert_eq!(sol.optimum.unwrap(), Rat::zero());
    }

    #[test]
    fn singleton_supports_force_moving_deltas() {
        // S = 1 admits only the element's own coset as support, so each
        // f(x) is a delta and adjacent pairs differ by exactly 2.
        let (_, cs) = line_space(3);
        let inst = build_variation_lp(&cs, 2, 1, 1).unwrap();
        let sol = solve_lp(&inst);
        assert_eq!(sol.optimum.clone().unwrap(), Rat::from_int(2));

        // Exactness: the extracted certificate passes at optimum + δ and
        // fails at optimum − δ.
        let cert = solution_certificate(&inst, &sol).unwrap();
        let delta = Rat::new(1, 1000);
        let pass = CertParams::new(1, &Rat::from_int(2) + &delta, 1, 2).unwrap();
        let fail = CertParams::new(1, &Rat::from_int(2) - &delta, 1, 2).unwrap();
        let cert = Certificate::Prob(cert);
        assert!(verify(&cert, &cs, &pass).unwrap().passed());
        assert!(!verify(&cert, &cs, &fail).unwrap().variation_ok);
    }

    #[test]
    fn wider_supports_beat_deltas_and_match_feasible_bounds() {
        let (g, cs) = line_space(4);
        let inst = build_variation_lp(&cs, 2, 2, 1).unwrap();
        let sol = solve_lp(&inst);
        let opt = sol.optimum.clone().unwrap();
        assert!(opt.is_positive());

        // The uniform 3-point interval family is feasible with variation
        // 2/3, so the optimum cannot exceed it. This is the warm-start
        // upper-bound property: LP optimum ≤ any verified variation.
        let mut entries: Entries<Rat> = BTreeMap::new();
        let third = Rat::new(1, 3);
        for x in g.ball(2, None).unwrap() {
            let mut sup: Support<Rat> = BTreeMap::new();
            for off in [-1i64, 0, 1] {
                let word = match off {
                    -1 => "x1'",
                    0 => "e",
                    _ => "x1",
                };
                let y = x.mul(&g.element(word).unwrap());
                let v = cs.act(&y, cs.representatives()[0]).unwrap();
                sup.insert(v, third.clone());
            }
            entries.insert(x, sup);
        }
        let interval =
            Certificate::Prob(ProbCertificate::new(Convention::ReiterCentered, entries).unwrap());
        let params = CertParams::new(1, Rat::one(), 2, 2).unwrap();
        let report = verify(&interval, &cs, &params).unwrap();
        assert_eq!(report.achieved_variation, Rat::new(2, 3));
        assert!(opt <= Rat::new(2, 3));

        // Exactness at the optimum.
        let cert = Certificate::Prob(solution_certificate(&inst, &sol).unwrap());
        let delta = Rat::new(1, 1_000_000);
        let pass = CertParams::new(1, &opt + &delta, 2, 2).unwrap();
        assert!(verify(&cert, &cs, &pass).unwrap().passed());
        let fail = CertParams::new(1, &opt - &delta, 2, 2).unwrap();
        assert!(!verify(&cert, &cs, &fail).unwrap().variation_ok);

        // Enlarging S enlarges the feasible set, so the optimum cannot rise.
        let wider = solve_lp(&build_variation_lp(&cs, 2, 3, 1).unwrap());
        assert!(wider.optimum.unwrap() <= opt);
    }

    #[test]
    fn free_group_window_one_optimum_is_within_hand_bounds() {
        let g = Group::parse("free(a,b)").unwrap();
        let subs = vec![
            Subgroup { label: "<a>".into(), generators: vec![g.element("a").unwrap()] },
            Subgroup { label: "<b>".into(), generators: vec![g.element("b").unwrap()] },
        ];
        let cs = CosetSpace::build(&g, subs, 2, &BuildOptions::default()).unwrap();
        let inst = build_variation_lp(&cs, 1, 1, 1).unwrap();
        let sol = solve_lp(&inst);
        let opt = sol.optimum.clone().unwrap();
        assert!(opt >= Rat::new(1, 2) && opt <= Rat::from_int(2), "optimum {opt}");

        let cert = Certificate::Prob(solution_certificate(&inst, &sol).unwrap());
        let delta = Rat::new(1, 1_000_000);
        let pass = CertParams::new(1, &opt + &delta, 1, 1).unwrap();
        assert!(verify(&cert, &cs, &pass).unwrap().passed());
    }

    #[test]
    fn mean_lp_on_intervals_matches_the_closed_form() {
        // Support radius n on the integer line: the optimum is 2/(2n+1),
        // achieved by the uniform interval.
        for (n, depth) in [(1u32, 2usize), (2, 3)] {
            let (g, cs) = line_space(depth);
            let gens = vec![g.generator(0)];
            let inst = build_mean_lp(&cs, n, &gens).unwrap();
            let sol = solve_lp(&inst);
            assert_eq!(
                sol.optimum.unwrap(),
                Rat::new(2, 2 * n as i64 + 1),
                "radius {n}"
            );
        }
    }

    #[test]
    fn finite_coset_space_admits_an_invariant_measure() {
        let (g, cs) = z_mod_2_space();
        let gens = vec![g.generator(0)];
        let inst = build_mean_lp(&cs, 1, &gens).unwrap();
        let sol = solve_lp(&inst);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.optimum.clone().unwrap(), Rat::zero());
        // The unique invariant measure on two swapped cosets is uniform.
        let mu = solution_measure(&inst, &sol).unwrap();
        assert_eq!(mu.len(), 2);
        assert!(mu.values().all(|m| *m == Rat::new(1, 2)));
    }

    #[test]
    fn variation_curve_decreases_strictly_on_the_grid() {
        let (_, cs) = grid_space(4);
        let curve = variation_curve(&cs, &[1, 2], 1, |w| w).unwrap();
        assert!(curve.non_increasing);
        assert_eq!(curve.points[0].optimum, Rat::from_int(2));
        assert!(curve.points[1].optimum < curve.points[0].optimum);
    }

    #[test]
    fn mean_curve_on_a_finite_space_is_constant_zero() {
        let (g, cs) = z_mod_2_space();
        let gens = vec![g.generator(0)];
        let curve = mean_curve(&cs, &[1, 2, 3], &gens).unwrap();
        assert!(curve.non_increasing);
        assert!(curve.points.iter().all(|p| p.optimum == Rat::zero()));
        let csv = curve_csv(&curve);
        assert!(csv.starts_with("window,S,optimum_num,optimum_den\n"));
        assert!(csv.contains("1,1,0,1\n"));
    }

    #[test]
    fn too_small_support_radius_is_an_error() {
        let (_, cs) = line_space(2);
        match build_variation_lp(&cs, 1, 0, 1) {
            Err(LpError::EmptySupport { .. }) => {}
            other => panic!("expected empty support, got {other:?}"),
        }
    }

    #[test]
    fn shallow_spaces_are_rejected() {
        let (_, cs) = line_space(1);
        match build_variation_lp(&cs, 1, 2, 1) {
            Err(LpError::ShallowSpace { needed: 2, depth: 1 }) => {}
            other => panic!("expected shallow-space error, got {other:?}"),
        }
        match build_mean_lp(&cs, 1, &[cs.ambient().generator(0)]) {
            Err(LpError::ShallowSpace { needed: 2, depth: 1 }) => {}
            other => panic!("expected shallow-space error, got {other:?}"),
        }
    }

    #[test]
    fn interchange_text_is_integer_scaled() {
        let inst = adhoc(
            &["t", "x"],
            vec![Row {
                coeffs: vec![(0, Rat::new(1, 2)), (1, Rat::new(-1, 3))],
                rel: Relation::Ge,
                rhs: Rat::new(1, 6),
            }],
            vec![(0, Rat::one())],
        );
        let text = lp_text(&inst);
        assert!(text.contains("Minimize\n obj: 1 t\n"));
        assert!(text.contains(" r0: 3 t - 2 x >= 1\n"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn certificate_export_of_an_lp_solution_round_trips() {
        let (_, cs) = line_space(3);
        let inst = build_variation_lp(&cs, 1, 2, 1).unwrap();
        let sol = solve_lp(&inst);
        let cert = solution_certificate(&inst, &sol).unwrap();
        let params = CertParams::new(1, Rat::one(), 2, 1).unwrap();
        let json = certificate_to_json(&Certificate::Prob(cert.clone()), &params, &cs);
        let (loaded, _) = crate::cert::certificate_from_json(&json, &cs).unwrap();
        assert_eq!(loaded, Certificate::Prob(cert));
    }
}
