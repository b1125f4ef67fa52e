//! Experiment configuration files (strict JSON).

use std::path::{Path, PathBuf};

use adlab::commutator::CommutatorNorm;
use adlab::library::FieldSpec;
use adlab::mollifier::Profile;
use adlab::solver::{InitialDatum, SolverConfig};
use adlab::{Exponent, TorusGrid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    Commutator,
    RegimeClassify,
    RegimeMap,
    FieldAudit,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Commutator => "commutator",
            Kind::RegimeClassify => "regime-classify",
            Kind::RegimeMap => "regime-map",
            Kind::FieldAudit => "field-audit",
        }
    }
}

/// Gate thresholds; defaults are the documented acceptance values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// `|½‖u(T)‖² + ∫‖∇u‖² − ½‖u₀‖²|`.
    pub energy: f64,
    /// Growth allowed in `sup_t ‖u‖_q` and in `∫β(u)`.
    pub monotone: f64,
    /// Pointwise error against the heat-kernel solution.
    pub heat: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { energy: 1e-6, monotone: 1e-8, heat: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub simulate: Option<SimulateBlock>,
    #[serde(default)]
    pub commutator: Option<CommutatorBlock>,
    #[serde(default)]
    pub regime: Option<RegimeBlock>,
    #[serde(default)]
    pub field_audit: Option<FieldAuditBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub grid: TorusGrid,
    pub velocity: FieldSpec,
    pub initial: InitialDatum,
    pub solver: SolverConfig,
    /// Write every recorded snapshot as a field file.
    #[serde(default)]
    pub write_snapshots: bool,
}

/// Source of `w` for a commutator study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WConfig {
    /// A fixed field.
    Field(InitialDatum),
    /// The recorded solution of a solve with the study's velocity.
    Solution { initial: InitialDatum, solver: SolverConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutatorBlock {
    pub grid: TorusGrid,
    pub velocity: FieldSpec,
    pub w: WConfig,
    pub delta0: f64,
    pub levels: usize,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    pub norm: CommutatorNorm,
    #[serde(default = "one")]
    pub time_samples: usize,
    #[serde(default = "unit")]
    pub t_final: f64,
    /// Optional gate on the verdict (`exact`, `decay`, `no_decay`).
    #[serde(default)]
    pub expect: Option<adlab::commutator::Verdict>,
}

fn default_profile() -> Profile {
    Profile::GaussianPeriodized
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

/// Exponents in `[1, ∞]`, numbers or `"inf"`. `p` and `q` are ignored by
/// `regime-map`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeBlock {
    pub d: usize,
    pub alpha: Exponent,
    #[serde(default)]
    pub p: Option<Exponent>,
    #[serde(default)]
    pub q: Option<Exponent>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_resolution() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldAuditBlock {
    pub field: FieldSpec,
    #[serde(default = "two")]
    pub dim: usize,
    pub exponents: Vec<Exponent>,
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
}

fn two() -> usize {
    2
}

fn default_resolutions() -> Vec<usize> {
    vec![64, 128, 256, 512]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        let hash = cfg.hash();
        Ok((cfg, hash))
    }

    /// SHA-256 of the canonical (re-serialized) configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let present = [
            ("simulate", self.simulate.is_some()),
            ("commutator", self.commutator.is_some()),
            ("regime", self.regime.is_some()),
            ("field_audit", self.field_audit.is_some()),
        ];
        let wanted = match self.kind {
            Kind::Simulate => "simulate",
            Kind::Commutator => "commutator",
            Kind::RegimeClassify | Kind::RegimeMap => "regime",
            Kind::FieldAudit => "field_audit",
        };
        for (block, is) in present {
            if is != (block == wanted) {
                return Err(CliError::Schema(if is {
                    format!("block \"{block}\" does not belong to kind \"{}\"", self.kind.name())
                } else {
                    format!("kind \"{}\" needs a \"{block}\" block", self.kind.name())
                }));
            }
        }
        let t = &self.tolerances;
        if !(t.energy >= 0.0 && t.monotone >= 0.0 && t.heat >= 0.0) {
            return Err(CliError::Schema("tolerances must be non-negative".into()));
        }
        if let (Kind::RegimeClassify, Some(r)) = (self.kind, &self.regime) {
            if r.p.is_none() || r.q.is_none() {
                return Err(CliError::Schema("regime-classify needs p and q".into()));
            }
        }
        Ok(())
    }
}
