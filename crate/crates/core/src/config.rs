//! Run configuration: TOML parsing with defaults, strict validation, and
//! round-trip serialization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EXPERIMENTS: [&str; 7] = [
    "groundstate",
    "spectrum",
    "decompose",
    "evolve",
    "pc-blowup",
    "gn-sweep",
    "identity-suite",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: String,
    pub dimension: usize,
    /// Cartesian grid points per axis.
    pub grid_n: usize,
    /// Box side length.
    pub grid_box: f64,
    /// ODE residual tolerance for the ground-state solve (relative).
    pub tol_ode: f64,
    /// Orthogonality tolerance for the modulation fit (relative to ‖Q‖).
    pub tol_orth: f64,
    /// Operator-identity residual tolerance.
    pub tol_id: f64,
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    pub seed: u64,
    /// Output directory; falls back to NLSLAB_OUTPUT_DIR, then ".".
    pub output_dir: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: "groundstate".into(),
            dimension: 1,
            grid_n: 512,
            grid_box: 30.0,
            tol_ode: 1e-6,
            tol_orth: 1e-9,
            tol_id: 1e-5,
            dt: 1e-3,
            t_end: 1.0,
            record_every: 50,
            seed: 7,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let field_err = |field: &str, reason: &str| {
            Err(Error::ValidationError {
                field: field.into(),
                reason: reason.into(),
            })
        };
        if !EXPERIMENTS.contains(&self.experiment.as_str()) {
            return field_err(
                "experiment",
                &format!("unknown experiment `{}`", self.experiment),
            );
        }
        if self.dimension == 0 || self.dimension > 15 {
            return field_err("dimension", "must be in 1..=15");
        }
        if self.grid_n < 16 || !self.grid_n.is_power_of_two() {
            return field_err("grid_n", "must be a power of two, at least 16");
        }
        if !(self.grid_box > 0.0) {
            return field_err("grid_box", "must be positive");
        }
        for (name, v) in [
            ("tol_ode", self.tol_ode),
            ("tol_orth", self.tol_orth),
            ("tol_id", self.tol_id),
        ] {
            if !(v > 0.0) {
                return field_err(name, "tolerance must be positive");
            }
        }
        if !(self.dt > 0.0) {
            return field_err("dt", "must be positive");
        }
        if self.record_every == 0 {
            return field_err("record_every", "must be positive");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parse and validate a TOML config; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| Error::ParseError(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("experiment = \"groundstate\"\ndimension = 2\n").unwrap();
        assert_eq!(c.dimension, 2);
        assert_eq!(c.grid_n, 512);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn negative_dt_rejected_by_field() {
        let err = parse_config("experiment = \"evolve\"\ndt = -1.0\n").unwrap_err();
        match err {
            Error::ValidationError { field, .. } => assert_eq!(field, "dt"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            parse_config("experiment = \"evolve\"\nbogus = 1\n"),
            Err(Error::ParseError(_))
        ));
    }

    #[test]
    fn round_trip() {
        let c = parse_config("experiment = \"spectrum\"\ndimension = 3\nseed = 42\n").unwrap();
        let again = parse_config(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }
}
