//! Task execution: each scenario runs one task to completion and emits a
//! deterministic report plus on-disk witness artifacts. Mathematical
//! verdicts (feasible/infeasible, found/not-found, passed/failed) are
//! report content, never process failures.

use crate::config::{check_cap, parse_policy, parse_rat, require, Scenario, Task};
use crate::CliError;
use relcert_core::amenability::{
    boundary_of_chain, enumerate_cells, folner_search, uf_boundary_solve, FolnerStatus,
};
use relcert_core::cert::{
    certificate_from_json, certificate_to_json, verify, CertParams, Certificate, Convention,
    VerificationReport,
};
use relcert_core::coset::CosetSpace;
use relcert_core::lp::{
    build_mean_lp, build_variation_lp, lp_text, mean_curve, solution_certificate,
    solution_measure, solve_lp, variation_curve, curve_csv, LpStatus,
};
use relcert_core::rat::Rat;
use relcert_core::transfer::{
    check_induction_identity, family_variation, identity_projection, induce_from_space,
    pushforward_to_cosets, tree_family, two_factor_tree, TransferError,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

pub const CERTIFIED: &str = "certified";
pub const EVIDENCE: &str = "evidence";

/// The run artifact: scenario echo, verdict, exact values as rational
/// strings, and witness files by reference. Byte-identical across reruns
/// of the same config except for `timing_ms`.
#[derive(Serialize)]
pub struct Report {
    pub scenario: Scenario,
    pub task: &'static str,
    pub verdict: String,
    /// `certified` only when every reported number is exact and backed by
    /// an on-disk witness that the verifier confirms.
    pub evidence: &'static str,
    pub seed: u64,
    pub values: BTreeMap<String, String>,
    pub witnesses: BTreeMap<String, String>,
    pub timing_ms: u128,
}

struct Outcome {
    verdict: String,
    evidence: &'static str,
    values: BTreeMap<String, String>,
    witnesses: BTreeMap<String, String>,
}

impl Outcome {
    fn new(verdict: impl Into<String>, evidence: &'static str) -> Outcome {
        Outcome {
            verdict: verdict.into(),
            evidence,
            values: BTreeMap::new(),
            witnesses: BTreeMap::new(),
        }
    }
}

fn write_artifact(
    out_dir: &Path,
    name: &str,
    content: &str,
    witnesses: &mut BTreeMap<String, String>,
    key: &str,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| {
        CliError::Config(format!("cannot create out_dir '{}': {}", out_dir.display(), e))
    })?;
    let path = out_dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::Config(format!("cannot write '{}': {}", path.display(), e)))?;
    witnesses.insert(key.to_string(), path.display().to_string());
    Ok(())
}

pub fn run_scenario(config_path: &Path) -> Result<Report, CliError> {
    let scenario = Scenario::load(config_path)?;
    let start = Instant::now();
    let outcome = match scenario.task {
        Task::RelASearch => rel_a_search(&scenario)?,
        Task::RelAmenability => rel_amenability(&scenario)?,
        Task::Folner => folner(&scenario)?,
        Task::UfTest => uf_test(&scenario)?,
        Task::TransferPipeline => transfer_pipeline(&scenario)?,
        Task::VerifyFile => verify_file_task(&scenario)?,
    };
    Ok(Report {
        task: scenario.task.name(),
        seed: scenario.seed,
        scenario,
        verdict: outcome.verdict,
        evidence: outcome.evidence,
        values: outcome.values,
        witnesses: outcome.witnesses,
        timing_ms: start.elapsed().as_millis(),
    })
}

// ---------------------------------------------------------------------------
// rel-a-search: exact optimum of the variation LP, certificate extraction
// ---------------------------------------------------------------------------

fn rel_a_search(sc: &Scenario) -> Result<Outcome, CliError> {
    let cs = sc.build_space()?;
    let window = require(sc.params.window, "params.window")?;
    let s = require(sc.params.s, "params.S")?;
    let r = require(sc.params.r, "params.R")?;
    let inst = build_variation_lp(&cs, window, s, r).map_err(CliError::from_lp)?;
    check_cap(inst.num_variables(), "variation LP")?;
    let sol = solve_lp(&inst);
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::CapExceeded => {
            return Err(CliError::Resource(format!(
                "simplex pivot cap reached after {} pivots",
                sol.pivots
            )))
        }
        LpStatus::Infeasible => {
            let mut out = Outcome::new(
                "infeasible: no family meets the support bound on this window",
                EVIDENCE,
            );
            out.values.insert("status".into(), "infeasible".into());
            return Ok(out);
        }
        LpStatus::Unbounded => {
            return Err(CliError::Invariant(
                "variation objective reported unbounded; it is bounded below by zero".into(),
            ))
        }
    }
    let optimum = sol.optimum.clone().expect("optimal status carries an optimum");
    let eps = match &sc.params.epsilon {
        Some(text) => parse_rat(text, "params.epsilon")?,
        None => &optimum + &Rat::new(1, 1_000_000),
    };
    let cert = Certificate::Prob(
        solution_certificate(&inst, &sol).map_err(CliError::from_lp)?,
    );
    let params = CertParams::new(r, eps.clone(), s, window)
        .map_err(|e| CliError::Config(format!("field `params`: {}", e)))?;
    let report = verify(&cert, &cs, &params)
        .map_err(|e| CliError::Invariant(format!("extracted certificate fails verify: {}", e)))?;
    if !report.support_ok {
        return Err(CliError::Invariant(
            "extracted certificate violates its own support bound".into(),
        ));
    }
    if report.achieved_variation != optimum {
        return Err(CliError::Invariant(format!(
            "re-verified variation {} differs from LP optimum {}",
            report.achieved_variation, optimum
        )));
    }

    let feasible_at_eps = report.passed();
    let mut out = Outcome::new(
        format!(
            "optimum {}; certificate extracted and re-verified ({} at epsilon {})",
            optimum,
            if feasible_at_eps { "passes" } else { "fails" },
            eps
        ),
        CERTIFIED,
    );
    out.values.insert("optimum".into(), optimum.to_string());
    out.values.insert("achieved_variation".into(), report.achieved_variation.to_string());
    out.values.insert("epsilon".into(), eps.to_string());
    out.values.insert("passes_at_epsilon".into(), feasible_at_eps.to_string());
    out.values.insert("pivots".into(), sol.pivots.to_string());
    let dir = sc.out_dir()?;
    write_artifact(dir, "certificate.json", &certificate_to_json(&cert, &params, &cs), &mut out.witnesses, "certificate")?;
    write_artifact(dir, "space.json", &cs.to_json(), &mut out.witnesses, "space")?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// rel-amenability: exact optimum of the invariant-mean LP
// ---------------------------------------------------------------------------

fn rel_amenability(sc: &Scenario) -> Result<Outcome, CliError> {
    let cs = sc.build_space()?;
    let group = cs.ambient().clone();
    let gens: Vec<_> = (0..group.generators().len()).map(|i| group.generator(i)).collect();
    let radius = require(sc.params.radius, "params.radius")?;
    let inst = build_mean_lp(&cs, radius, &gens).map_err(CliError::from_lp)?;
    check_cap(inst.num_variables(), "invariant-mean LP")?;
    let sol = solve_lp(&inst);
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::CapExceeded => {
            return Err(CliError::Resource(format!(
                "simplex pivot cap reached after {} pivots",
                sol.pivots
            )))
        }
        other => {
            return Err(CliError::Invariant(format!(
                "invariant-mean LP is always feasible and bounded, got {:?}",
                other
            )))
        }
    }
    let optimum = sol.optimum.clone().expect("optimal status carries an optimum");
    let measure = solution_measure(&inst, &sol).map_err(CliError::from_lp)?;

    #[derive(Serialize)]
    struct MeasureDto {
        radius: u32,
        optimum: String,
        /// `[component, coset key, mass]` triples in vertex order.
        masses: Vec<(usize, String, String)>,
    }
    let dto = MeasureDto {
        radius,
        optimum: optimum.to_string(),
        masses: measure
            .iter()
            .map(|(&v, m)| (cs.component(v), cs.transporter(v).render(), m.to_string()))
            .collect(),
    };
    let mut out = Outcome::new(
        format!(
            "invariant-mean optimum {} at support radius {}{}",
            optimum,
            radius,
            if optimum.is_zero() { " (an exactly invariant measure exists)" } else { "" }
        ),
        EVIDENCE,
    );
    out.values.insert("optimum".into(), optimum.to_string());
    out.values.insert("support_size".into(), measure.len().to_string());
    out.values.insert("pivots".into(), sol.pivots.to_string());
    let dir = sc.out_dir()?;
    let text = serde_json::to_string_pretty(&dto).expect("measure serialization cannot fail");
    write_artifact(dir, "measure.json", &text, &mut out.witnesses, "measure")?;
    write_artifact(dir, "space.json", &cs.to_json(), &mut out.witnesses, "space")?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// folner: isoperimetric subset search on a finite graph
// ---------------------------------------------------------------------------

fn folner(sc: &Scenario) -> Result<Outcome, CliError> {
    let g = sc.build_graph()?;
    check_cap(g.len(), "graph")?;
    let r = sc.params.boundary_r.unwrap_or(2);
    let delta = parse_rat(
        sc.params
            .delta
            .as_deref()
            .ok_or_else(|| CliError::Config("missing field `params.delta`".into()))?,
        "params.delta",
    )?;
    if !delta.is_positive() {
        return Err(CliError::Config("field `params.delta`: must be positive".into()));
    }
    let cap = require(sc.params.cap, "params.cap")?;
    let result = folner_search(&g, r, &delta, cap);

    #[derive(Serialize)]
    struct FolnerDto {
        r: usize,
        cap: usize,
        delta: String,
        status: FolnerStatus,
        ratio: String,
        subset: Vec<String>,
        boundary: Vec<String>,
    }
    let boundary = relcert_core::amenability::boundary_set(&g, &result.subset, r);
    let dto = FolnerDto {
        r,
        cap,
        delta: delta.to_string(),
        status: result.status,
        ratio: result.ratio.to_string(),
        subset: result.subset.iter().map(|&v| g.label(v).to_string()).collect(),
        boundary: boundary.iter().map(|&v| g.label(v).to_string()).collect(),
    };
    let found = result.status == FolnerStatus::Found;
    let mut out = Outcome::new(
        if found {
            format!(
                "found: subset of size {} with boundary ratio {} < {}",
                result.subset.len(),
                result.ratio,
                delta
            )
        } else {
            format!(
                "not-found-within-cap: best ratio {} at size {}",
                result.ratio,
                result.subset.len()
            )
        },
        EVIDENCE,
    );
    out.values.insert("ratio".into(), result.ratio.to_string());
    out.values.insert("subset_size".into(), result.subset.len().to_string());
    out.values.insert("boundary_size".into(), boundary.len().to_string());
    out.values.insert("status".into(), if found { "found".into() } else { "not-found-within-cap".into() });
    let dir = sc.out_dir()?;
    let text = serde_json::to_string_pretty(&dto).expect("subset serialization cannot fail");
    write_artifact(dir, "folner-set.json", &text, &mut out.witnesses, "subset")?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// uf-test: bounded-chain boundary equations on a window
// ---------------------------------------------------------------------------

fn uf_test(sc: &Scenario) -> Result<Outcome, CliError> {
    let g = sc.build_graph()?;
    let r = require(sc.params.boundary_r, "params.boundary_r")?;
    let k = parse_rat(
        sc.params
            .k
            .as_deref()
            .ok_or_else(|| CliError::Config("missing field `params.K`".into()))?,
        "params.K",
    )?;
    let policy = parse_policy(&sc.params)?;
    let phi: Vec<Rat> = match &sc.params.phi {
        None => vec![Rat::one(); g.len()],
        Some(crate::config::PhiConfig::Named(name)) if name == "fundamental" => {
            vec![Rat::one(); g.len()]
        }
        Some(crate::config::PhiConfig::Named(other)) => {
            return Err(CliError::Config(format!(
                "field `params.phi`: unknown class '{}' (expected 'fundamental' or explicit values)",
                other
            )))
        }
        Some(crate::config::PhiConfig::Explicit(texts)) => {
            if texts.len() != g.len() {
                return Err(CliError::Config(format!(
                    "field `params.phi`: {} values for {} vertices",
                    texts.len(),
                    g.len()
                )));
            }
            texts
                .iter()
                .map(|t| parse_rat(t, "params.phi"))
                .collect::<Result<_, _>>()?
        }
    };
    let cells = enumerate_cells(&g, r);
    check_cap(cells.len(), "cell enumeration")?;
    let outcome = uf_boundary_solve(&g, &phi, r, &k, policy).map_err(CliError::from_amen)?;

    // Witness recheck: recompute the boundary independently and compare on
    // the interior cell-exactly.
    if let Some(chain) = &outcome.witness {
        let b = boundary_of_chain(&g, chain);
        for &v in &outcome.interior {
            if b[v] != phi[v] {
                return Err(CliError::Invariant(format!(
                    "witness chain misses the class at interior vertex {}",
                    g.label(v)
                )));
            }
        }
        let bound = chain.coeffs.iter().map(|c| c.abs()).max();
        if bound.is_some_and(|b| b > k) {
            return Err(CliError::Invariant("witness coefficient exceeds the bound".into()));
        }
    }

    #[derive(Serialize)]
    struct UfDto {
        r: usize,
        k: String,
        policy: &'static str,
        feasible: bool,
        interior: Vec<String>,
        /// `[from, to, coefficient]`; the chain's boundary adds the
        /// coefficient at `to` and subtracts it at `from`.
        cells: Vec<(String, String, String)>,
    }
    let dto = UfDto {
        r,
        k: k.to_string(),
        policy: match policy {
            relcert_core::amenability::BoundaryPolicy::Open => "open",
            relcert_core::amenability::BoundaryPolicy::Closed => "closed",
        },
        feasible: outcome.feasible,
        interior: outcome.interior.iter().map(|&v| g.label(v).to_string()).collect(),
        cells: outcome
            .witness
            .as_ref()
            .map(|c| {
                c.cells
                    .iter()
                    .zip(&c.coeffs)
                    .map(|(&(u, v), a)| {
                        (g.label(u).to_string(), g.label(v).to_string(), a.to_string())
                    })
                    .collect()
            })
            .unwrap_or_default(),
    };
    let mut out = Outcome::new(
        if outcome.feasible {
            format!(
                "feasible: witness chain satisfies the boundary identity on {} interior vertices [EVIDENCE]",
                outcome.interior.len()
            )
        } else {
            "infeasible: no bounded chain solves the boundary identity [EVIDENCE]".to_string()
        },
        EVIDENCE,
    );
    out.values.insert("feasible".into(), outcome.feasible.to_string());
    out.values.insert("cells".into(), cells.len().to_string());
    out.values.insert("interior_size".into(), outcome.interior.len().to_string());
    let dir = sc.out_dir()?;
    let text = serde_json::to_string_pretty(&dto).expect("chain serialization cannot fail");
    write_artifact(dir, "uf-result.json", &text, &mut out.witnesses, "chain")?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// transfer-pipeline: tree family → induction → pushforward → verify
// ---------------------------------------------------------------------------

fn transfer_pipeline(sc: &Scenario) -> Result<Outcome, CliError> {
    let group = sc.require_group()?;
    let n = require(sc.params.n, "params.n")?;
    if n == 0 {
        return Err(CliError::Config("field `params.n`: must be positive".into()));
    }
    let depth = require(sc.params.depth, "params.depth")?;
    let window = sc.params.window.unwrap_or(1);
    let r = sc.params.r.unwrap_or(1);
    let s = sc.params.s.unwrap_or(n + 1);
    let eps = match &sc.params.epsilon {
        Some(text) => parse_rat(text, "params.epsilon")?,
        None => Rat::one(),
    };

    let tree = two_factor_tree(&group, depth).map_err(CliError::from_transfer_setup)?;
    check_cap(tree.cosets.len(), "coset space")?;
    let fam = tree_family(&tree.space, &tree.ray, n).map_err(CliError::from_transfer_setup)?;
    let fam_var = family_variation(&tree.space, &fam)
        .ok_or_else(|| CliError::Config("field `params.depth`: fragment too small to compare any pair".into()))?;
    let win_elems = group
        .ball(window as usize, None)
        .map_err(|e| CliError::Config(format!("field `params.window`: {}", e)))?;
    let induced = induce_from_space(&tree.space, &fam, &win_elems)
        .map_err(CliError::from_transfer_setup)?;
    // The construction's defining identity, checked pair-exactly; any
    // failure is an internal fault, not a data problem.
    let checked = check_induction_identity(&tree.space, &fam, &induced, r as usize)
        .map_err(|e| CliError::Invariant(e.to_string()))?;
    let cert = pushforward_to_cosets(
        &tree.space,
        &induced,
        &identity_projection(&tree.cosets),
        &tree.cosets,
    )
    .map_err(|e| CliError::Invariant(e.to_string()))?;
    let params = CertParams::new(r, eps.clone(), s, window)
        .map_err(|e| CliError::Config(format!("field `params`: {}", e)))?;
    let cert = Certificate::Prob(cert);
    let report = verify(&cert, &tree.cosets, &params)
        .map_err(|e| CliError::Invariant(format!("pipeline certificate fails verify: {}", e)))?;

    let mut out = Outcome::new(
        format!(
            "constructed: chain length {}, achieved variation {}, verification {}",
            n,
            report.achieved_variation,
            if report.passed() { "passed" } else { "failed" }
        ),
        CERTIFIED,
    );
    out.values.insert("achieved_variation".into(), report.achieved_variation.to_string());
    out.values.insert("family_variation".into(), fam_var.to_string());
    out.values.insert("qi_constant".into(), induced.qi_constant.to_string());
    out.values.insert("identity_pairs_checked".into(), checked.to_string());
    out.values.insert("n".into(), n.to_string());
    out.values.insert("passed".into(), report.passed().to_string());
    let dir = sc.out_dir()?;
    write_artifact(dir, "certificate.json", &certificate_to_json(&cert, &params, &tree.cosets), &mut out.witnesses, "certificate")?;
    write_artifact(dir, "space.json", &tree.cosets.to_json(), &mut out.witnesses, "space")?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// verify-file: stored certificate against stored space
// ---------------------------------------------------------------------------

pub fn load_and_verify(
    cert_path: &Path,
    space_path: &Path,
    r: Option<u32>,
    eps: Option<String>,
    s: Option<u32>,
    convention: Option<String>,
    window: Option<u32>,
) -> Result<(VerificationReport, CertParams), CliError> {
    let space_text = std::fs::read_to_string(space_path).map_err(|e| {
        CliError::Config(format!("cannot read '{}': {}", space_path.display(), e))
    })?;
    let cs = CosetSpace::from_json(&space_text)
        .map_err(|e| CliError::Config(format!("space file: {}", e)))?;
    let cert_text = std::fs::read_to_string(cert_path).map_err(|e| {
        CliError::Config(format!("cannot read '{}': {}", cert_path.display(), e))
    })?;
    let (cert, stored) = certificate_from_json(&cert_text, &cs)
        .map_err(|e| CliError::Config(format!("certificate file: {}", e)))?;
    if let Some(expect) = convention.as_deref() {
        let got = match cert.convention() {
            Convention::ReiterCentered => "reiter-centered",
            Convention::IdentityCentered => "identity-centered",
        };
        if expect != got {
            return Err(CliError::Config(format!(
                "convention mismatch: expected '{}', certificate declares '{}'",
                expect, got
            )));
        }
    }
    let eps = match eps {
        Some(text) => parse_rat(&text, "eps")?,
        None => stored.epsilon.clone(),
    };
    let params = CertParams::new(
        r.unwrap_or(stored.r),
        eps,
        s.unwrap_or(stored.s),
        window.unwrap_or(stored.window),
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    let report = verify(&cert, &cs, &params)
        .map_err(|e| CliError::Config(format!("verification aborted: {}", e)))?;
    Ok((report, params))
}

fn verify_file_task(sc: &Scenario) -> Result<Outcome, CliError> {
    let files = sc
        .files
        .as_ref()
        .ok_or_else(|| CliError::Config("missing table `files`".into()))?;
    let (report, params) = load_and_verify(
        &files.certificate,
        &files.space,
        sc.params.r,
        sc.params.epsilon.clone(),
        sc.params.s,
        sc.params.convention.clone(),
        sc.params.window,
    )?;
    let mut out = Outcome::new(
        format!(
            "{}: achieved variation {} against epsilon {}",
            if report.passed() { "passed" } else { "failed" },
            report.achieved_variation,
            params.epsilon
        ),
        CERTIFIED,
    );
    out.values.insert("passed".into(), report.passed().to_string());
    out.values.insert("support_ok".into(), report.support_ok.to_string());
    out.values.insert("variation_ok".into(), report.variation_ok.to_string());
    out.values.insert("achieved_variation".into(), report.achieved_variation.to_string());
    out.witnesses.insert("certificate".into(), files.certificate.display().to_string());
    out.witnesses.insert("space".into(), files.space.display().to_string());
    Ok(out)
}

// ---------------------------------------------------------------------------
// Curves and LP export
// ---------------------------------------------------------------------------

/// Solves the optimum curve described by a config and returns the CSV text.
pub fn run_curve(config_path: &Path) -> Result<(Scenario, String), CliError> {
    let sc = Scenario::load(config_path)?;
    let cs = sc.build_space()?;
    check_cap(cs.len(), "coset space")?;
    let curve = match sc.task {
        Task::RelASearch => {
            let windows = sc
                .params
                .windows
                .clone()
                .ok_or_else(|| CliError::Config("missing field `params.windows`".into()))?;
            let r = require(sc.params.r, "params.R")?;
            let policy: Box<dyn Fn(u32) -> u32> = match (sc.params.s, sc.params.s_offset) {
                (Some(s), None) => Box::new(move |_| s),
                (None, Some(off)) => Box::new(move |w| w + off),
                (None, None) => {
                    return Err(CliError::Config(
                        "missing field `params.S` or `params.s_offset`".into(),
                    ))
                }
                (Some(_), Some(_)) => {
                    return Err(CliError::Config(
                        "fields `params.S` and `params.s_offset` are mutually exclusive".into(),
                    ))
                }
            };
            variation_curve(&cs, &windows, r, policy).map_err(CliError::from_lp)?
        }
        Task::RelAmenability => {
            let radii = sc
                .params
                .radii
                .clone()
                .ok_or_else(|| CliError::Config("missing field `params.radii`".into()))?;
            let group = cs.ambient().clone();
            let gens: Vec<_> =
                (0..group.generators().len()).map(|i| group.generator(i)).collect();
            mean_curve(&cs, &radii, &gens).map_err(CliError::from_lp)?
        }
        other => {
            return Err(CliError::Config(format!(
                "task '{}' does not define an optimum curve",
                other.name()
            )))
        }
    };
    let csv = curve_csv(&curve);
    if let Some(dir) = sc.out_dir.as_deref() {
        let mut sink = BTreeMap::new();
        write_artifact(dir, "curve.csv", &csv, &mut sink, "curve")?;
    }
    Ok((sc, csv))
}

/// Builds the LP instance described by a config and returns its text
/// rendering with integer-scaled rows.
pub fn run_export_lp(config_path: &Path) -> Result<(Scenario, String), CliError> {
    let sc = Scenario::load(config_path)?;
    let cs = sc.build_space()?;
    let inst = match sc.task {
        Task::RelASearch => {
            let window = require(sc.params.window, "params.window")?;
            let s = require(sc.params.s, "params.S")?;
            let r = require(sc.params.r, "params.R")?;
            build_variation_lp(&cs, window, s, r).map_err(CliError::from_lp)?
        }
        Task::RelAmenability => {
            let radius = require(sc.params.radius, "params.radius")?;
            let group = cs.ambient().clone();
            let gens: Vec<_> =
                (0..group.generators().len()).map(|i| group.generator(i)).collect();
            build_mean_lp(&cs, radius, &gens).map_err(CliError::from_lp)?
        }
        other => {
            return Err(CliError::Config(format!(
                "task '{}' does not define an LP instance to export",
                other.name()
            )))
        }
    };
    check_cap(inst.num_variables(), "LP instance")?;
    let text = lp_text(&inst);
    if let Some(dir) = sc.out_dir.as_deref() {
        let mut sink = BTreeMap::new();
        write_artifact(dir, "instance.lp", &text, &mut sink, "instance")?;
    }
    Ok((sc, text))
}

// ---------------------------------------------------------------------------
// Error mapping
// ---------------------------------------------------------------------------

impl CliError {
    pub fn from_coset(e: relcert_core::coset::CosetError) -> CliError {
        use relcert_core::coset::CosetError::*;
        match e {
            ClosureBoundExhausted { .. } | VertexCapExceeded { .. } => {
                CliError::Resource(e.to_string())
            }
            _ => CliError::Config(e.to_string()),
        }
    }

    pub fn from_lp(e: relcert_core::lp::LpError) -> CliError {
        use relcert_core::lp::{LpError, LpStatus};
        match &e {
            LpError::SolveFailed { status: LpStatus::CapExceeded } => {
                CliError::Resource(e.to_string())
            }
            LpError::Coset(inner) => CliError::from_coset(clone_coset_kind(inner)),
            _ => CliError::Config(e.to_string()),
        }
    }

    pub fn from_amen(e: relcert_core::amenability::AmenError) -> CliError {
        use relcert_core::amenability::AmenError;
        match &e {
            AmenError::Lp(inner) => CliError::from_lp_ref(inner, e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }

    fn from_lp_ref(e: &relcert_core::lp::LpError, text: String) -> CliError {
        use relcert_core::lp::{LpError, LpStatus};
        match e {
            LpError::SolveFailed { status: LpStatus::CapExceeded } => CliError::Resource(text),
            _ => CliError::Config(text),
        }
    }

    /// Construction-phase pipeline errors: bad factors, too-shallow depth,
    /// chains falling off the fragment. All user-fixable.
    pub fn from_transfer_setup(e: TransferError) -> CliError {
        match &e {
            TransferError::Coset(inner) => CliError::from_coset(clone_coset_kind(inner)),
            TransferError::OutOfFragment { .. } | TransferError::MissingChain { .. } => {
                CliError::Config(format!("{} (increase `params.depth` or lower `params.n`)", e))
            }
            _ => CliError::Config(e.to_string()),
        }
    }
}

/// `CosetError` is not `Clone`; rebuild the classification-relevant shape.
fn clone_coset_kind(e: &relcert_core::coset::CosetError) -> relcert_core::coset::CosetError {
    use relcert_core::coset::CosetError::*;
    match e {
        ClosureBoundExhausted { component, cap } => {
            ClosureBoundExhausted { component: *component, cap: *cap }
        }
        VertexCapExceeded { cap } => VertexCapExceeded { cap: *cap },
        OutOfWindow => OutOfWindow,
        BadComponent { component } => BadComponent { component: *component },
        other => Schema(other.to_string()),
    }
}
