//! Run configuration: problem selection, network and training settings, in a
//! TOML file with section headers.
//!
//! ```toml
//! builtin = "single_well"
//!
//! [net]
//! input_scale = 24.0
//!
//! [train]
//! learning_rate = 0.003
//! rng_seed = 7
//!
//! [train.weights]
//! nu_orth = 1.0
//! ```
//!
//! A full `[problem]` table may be given instead of `builtin`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetConfig;
use crate::problems::{builtin_problem, Builtin, Problem};
use crate::trainer::{SymmetryPolicy, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<Problem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    /// The tuned configuration shipped for a builtin problem.
    pub fn builtin(which: Builtin) -> Self {
        let (net, train) = preset(which);
        RunConfig { builtin: Some(which.name()), problem: None, out_dir: None, net, train }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn resolve_problem(&self) -> Result<Problem> {
        match (&self.builtin, &self.problem) {
            (Some(name), None) => Builtin::parse(name)
                .map(builtin_problem)
                .ok_or_else(|| Error::Config(format!("unknown builtin problem `{name}`"))),
            (None, Some(p)) => Ok(p.clone()),
            (Some(_), Some(_)) => Err(Error::Config("give either `builtin` or `[problem]`, not both".into())),
            (None, None) => Err(Error::Config("missing `builtin` or `[problem]`".into())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.resolve_problem()?.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.net.hidden.is_empty() || self.net.hidden.contains(&0) {
            return Err(Error::Config("net.hidden needs at least one non-empty layer".into()));
        }
        if !(self.net.input_scale.is_finite() && self.net.input_scale > 0.0) {
            return Err(Error::Config("net.input_scale must be positive".into()));
        }
        if !self.net.lambda_start.is_finite() {
            return Err(Error::Config("net.lambda_start must be finite".into()));
        }
        Ok(())
    }
}

/// Network and training presets per builtin problem.
pub fn preset(which: Builtin) -> (NetConfig, TrainConfig) {
    let base = TrainConfig::default();
    match which {
        Builtin::SingleWell | Builtin::DoubleWell => (
            NetConfig { input_scale: 24.0, ..NetConfig::default() },
            TrainConfig {
                learning_rate: 3e-3,
                epochs_max: 60_000,
                patience_window: 3000,
                patience_threshold: 1e-5,
                de_threshold: 1.0,
                target_solution_count: 4,
                symmetry_policy: SymmetryPolicy::Alternate,
                ..base
            },
        ),
        Builtin::InfiniteWell => (
            NetConfig { input_scale: 3.0, ..NetConfig::default() },
            TrainConfig {
                learning_rate: 3e-3,
                epochs_max: 30_000,
                patience_window: 2000,
                patience_threshold: 1e-5,
                de_threshold: 3.0,
                target_solution_count: 2,
                ..base
            },
        ),
        Builtin::Hydrogen { l } => (
            NetConfig { input_scale: 0.3, lambda_start: -1.0, ..NetConfig::default() },
            TrainConfig {
                learning_rate: 8e-3,
                epochs_max: 40_000,
                patience_window: 3000,
                patience_threshold: 2e-7,
                de_threshold: if l >= 3 { 2e-3 } else { 1e-3 },
                target_solution_count: 1,
                ..base
            },
        ),
        Builtin::Harmonic => (
            NetConfig { input_scale: 3.0, ..NetConfig::default() },
            TrainConfig {
                learning_rate: 3e-3,
                epochs_max: 30_000,
                patience_window: 2000,
                patience_threshold: 1e-5,
                de_threshold: 1e-2,
                target_solution_count: 2,
                symmetry_policy: SymmetryPolicy::Alternate,
                ..base
            },
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_round_trip() {
        for b in [Builtin::SingleWell, Builtin::DoubleWell, Builtin::InfiniteWell, Builtin::Hydrogen { l: 2 }] {
            let cfg = RunConfig::builtin(b);
            let text = cfg.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn full_problem_round_trip() {
        let cfg = RunConfig {
            builtin: None,
            problem: Some(builtin_problem(Builtin::Hydrogen { l: 1 })),
            out_dir: Some("runs/h".into()),
            ..RunConfig::builtin(Builtin::Hydrogen { l: 1 })
        };
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("builtin = \"single_well\"\ncolour = 3\n").unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
        let err = RunConfig::from_toml("builtin = \"single_well\"\n[train]\nlearning_rte = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("learning_rte"), "{err}");
    }

    #[test]
    fn errors_carry_the_line() {
        let err = RunConfig::from_toml("builtin = \"single_well\"\n\n[train]\nepochs_max = \"many\"\n").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn problem_selection_is_exclusive() {
        assert!(RunConfig::from_toml("[net]\nlambda_start = 1.0\n").is_err());
        assert!(RunConfig::from_toml("builtin = \"nowhere\"\n").is_err());
        let both = RunConfig {
            problem: Some(builtin_problem(Builtin::SingleWell)),
            ..RunConfig::builtin(Builtin::SingleWell)
        };
        assert!(RunConfig::from_toml(&both.to_toml().unwrap()).is_err());
    }

    #[test]
    fn sparse_files_take_defaults() {
        let cfg = RunConfig::from_toml("builtin = \"hydrogen_l0\"\n[train]\nrng_seed = 5\n").unwrap();
        assert_eq!(cfg.train.rng_seed, 5);
        assert_eq!(cfg.train.learning_rate, TrainConfig::default().learning_rate);
    }
}
