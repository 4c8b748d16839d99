//! Scenario configuration: the TOML schema, strict parsing, and the
//! task-specific requirement checks. Unknown or missing fields are
//! reported by name so a config typo never turns into a silent default.

use crate::CliError;
use relcert_core::amenability::{BoundaryPolicy, FiniteGraph};
use relcert_core::coset::{BuildOptions, CosetSpace, Subgroup};
use relcert_core::group::Group;
use relcert_core::rat::Rat;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    RelASearch,
    RelAmenability,
    Folner,
    UfTest,
    TransferPipeline,
    VerifyFile,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::RelASearch => "rel-a-search",
            Task::RelAmenability => "rel-amenability",
            Task::Folner => "folner",
            Task::UfTest => "uf-test",
            Task::TransferPipeline => "transfer-pipeline",
            Task::VerifyFile => "verify-file",
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupConfig {
    pub label: String,
    pub generators: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub subgroups: Vec<SubgroupConfig>,
    pub depth: usize,
}

/// Finite graph sources for the amenability tasks.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// One of `king-grid`, `path`, `cayley-ball`, `edge-list`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FilesConfig {
    pub certificate: PathBuf,
    pub space: PathBuf,
}

/// The right-hand side for the boundary-equation task: the all-ones class
/// or explicit per-vertex rational values.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PhiConfig {
    Named(String),
    Explicit(Vec<String>),
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(default, rename = "S", skip_serializing_if = "Option::is_none")]
    pub s: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<u32>,
    /// Windows for the piecewise optimum curve of the variation task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<u32>>,
    /// Fixed support slack for curves: `S = window + s_offset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_offset: Option<u32>,
    /// Strict variation threshold, as a rational string like `"1/10"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<String>,
    /// Chain length for the tree pipeline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    /// Truncation depth for spaces the task builds itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Support radius for the invariant-mean objective.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<u32>,
    /// Support radii for the invariant-mean curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<u32>>,
    /// Metric radius of the boundary operator on finite graphs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_r: Option<usize>,
    /// Strict isoperimetric target, as a rational string.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    /// Subset size cap for the isoperimetric search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    /// Coefficient bound for boundary-equation chains.
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<String>,
    /// Window truncation policy: `open` or `closed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiConfig>,
    /// Expected centering convention for verification tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convention: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    /// Recorded in every report; the searches themselves are deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub files: Option<FilesConfig>,
    #[serde(default)]
    pub params: Params,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read '{}': {}", path.display(), e))
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn require_group(&self) -> Result<Group, CliError> {
        let text = self
            .group
            .as_deref()
            .ok_or_else(|| CliError::Config("missing field `group`".into()))?;
        Group::parse(text).map_err(|e| CliError::Config(format!("field `group`: {}", e)))
    }

    pub fn build_space(&self) -> Result<CosetSpace, CliError> {
        let group = self.require_group()?;
        let space = self
            .space
            .as_ref()
            .ok_or_else(|| CliError::Config("missing table `space`".into()))?;
        if space.subgroups.is_empty() {
            return Err(CliError::Config("field `space.subgroups`: must be nonempty".into()));
        }
        let mut family = Vec::new();
        for (i, sub) in space.subgroups.iter().enumerate() {
            let mut generators = Vec::new();
            for text in &sub.generators {
                let g = group.element(text).map_err(|e| {
                    CliError::Config(format!(
                        "field `space.subgroups[{}].generators`: '{}': {}",
                        i, text, e
                    ))
                })?;
                generators.push(g);
            }
            family.push(Subgroup { label: sub.label.clone(), generators });
        }
        CosetSpace::build(&group, family, space.depth, &BuildOptions::default())
            .map_err(CliError::from_coset)
    }

    pub fn build_graph(&self) -> Result<FiniteGraph, CliError> {
        let cfg = self
            .graph
            .as_ref()
            .ok_or_else(|| CliError::Config("missing table `graph`".into()))?;
        let need = |opt: Option<usize>, field: &str| {
            opt.ok_or_else(|| CliError::Config(format!("missing field `graph.{}`", field)))
        };
        match cfg.kind.as_str() {
            "king-grid" => Ok(FiniteGraph::king_grid(
                need(cfg.width, "width")?,
                need(cfg.height, "height")?,
            )),
            "path" => Ok(FiniteGraph::path(need(cfg.length, "length")?)),
            "cayley-ball" => {
                let group = self.require_group()?;
                FiniteGraph::cayley_ball(&group, need(cfg.radius, "radius")?)
                    .map_err(|e| CliError::Config(format!("table `graph`: {}", e)))
            }
            "edge-list" => {
                let path = cfg
                    .file
                    .as_ref()
                    .ok_or_else(|| CliError::Config("missing field `graph.file`".into()))?;
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read '{}': {}", path.display(), e))
                })?;
                FiniteGraph::from_edge_list(&text)
                    .map_err(|e| CliError::Config(format!("field `graph.file`: {}", e)))
            }
            other => Err(CliError::Config(format!(
                "field `graph.kind`: unknown kind '{}' (expected king-grid, path, cayley-ball, or edge-list)",
                other
            ))),
        }
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out_dir
            .as_deref()
            .ok_or_else(|| CliError::Config("missing field `out_dir`".into()))
    }
}

pub fn parse_rat(text: &str, field: &str) -> Result<Rat, CliError> {
    text.parse::<Rat>()
        .map_err(|e| CliError::Config(format!("field `{}`: '{}': {}", field, text, e)))
}

pub fn require<T: Copy>(opt: Option<T>, field: &str) -> Result<T, CliError> {
    opt.ok_or_else(|| CliError::Config(format!("missing field `{}`", field)))
}

pub fn parse_policy(params: &Params) -> Result<BoundaryPolicy, CliError> {
    match params.policy.as_deref() {
        Some("open") => Ok(BoundaryPolicy::Open),
        Some("closed") => Ok(BoundaryPolicy::Closed),
        Some(other) => Err(CliError::Config(format!(
            "field `params.policy`: unknown policy '{}' (expected 'open' or 'closed')",
            other
        ))),
        None => Err(CliError::Config("missing field `params.policy`".into())),
    }
}

/// The enumeration-size cap, from `RELCERT_MAX_CELLS` when set.
pub fn max_cells() -> Result<Option<usize>, CliError> {
    match std::env::var("RELCERT_MAX_CELLS") {
        Ok(text) => text
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::Config("RELCERT_MAX_CELLS must be a nonnegative integer".into())),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Config(format!("RELCERT_MAX_CELLS: {}", e))),
    }
}

pub fn check_cap(size: usize, what: &str) -> Result<(), CliError> {
    if let Some(cap) = max_cells()? {
        if size > cap {
            return Err(CliError::Resource(format!(
                "{} has {} elements, over the RELCERT_MAX_CELLS cap of {}",
                what, size, cap
            )));
        }
    }
    Ok(())
}
