use serde::{Deserialize, Serialize};

use super::{FusionError, FusionMode, FusionParams};
use crate::study_data::Arm;

/// Search-space and cross-validation settings, read from JSON.
///
/// ```json
/// {"mode_set": ["selective", "always"], "w_min": 0.1, "w_max": 0.8, "w_step": 0.1,
///  "h_set": [0.0, 0.05, 0.1], "n_outer": 5, "n_inner": 3, "seeds": [1, 2, 3, 4, 5]}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub mode_set: Vec<FusionMode>,
    pub w_min: f64,
    pub w_max: f64,
    pub w_step: f64,
    pub h_set: Vec<f64>,
    pub n_outer: usize,
    pub n_inner: usize,
    pub seeds: Vec<u64>,
    /// Arm whose human assessments feed the fusion.
    #[serde(default = "default_source")]
    pub human_source: Arm,
}

fn default_source() -> Arm {
    Arm::Unassisted
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            mode_set: vec![FusionMode::Selective, FusionMode::Always],
            w_min: 0.1,
            w_max: 0.8,
            w_step: 0.1,
            h_set: vec![0.0, 0.05, 0.1],
            n_outer: 5,
            n_inner: 3,
            seeds: vec![1, 2, 3, 4, 5],
            human_source: Arm::Unassisted,
        }
    }
}

fn snap(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

impl FusionConfig {
    pub fn from_json(text: &str) -> Result<Self, FusionError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| FusionError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        let bad = |m: String| Err(FusionError::InvalidConfig(m));
        if !(self.w_step > 0.0 && self.w_step.is_finite()) {
            return bad(format!("w_step must be positive, got {}", self.w_step));
        }
        if self.w_min > self.w_max {
            return bad(format!("w_min {} exceeds w_max {}", self.w_min, self.w_max));
        }
        if self.n_outer < 2 || self.n_inner < 2 {
            return bad(format!("need at least 2 folds, got outer {} inner {}", self.n_outer, self.n_inner));
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let mut seen = self.mode_set.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.mode_set.len() {
            return bad("mode_set has duplicates".into());
        }
        Ok(())
    }

    /// Human weights `w_min, w_min + w_step, …` up to `w_max` inclusive.
    pub fn weights(&self) -> Vec<f64> {
        let steps = ((self.w_max - self.w_min) / self.w_step + 1e-9).floor() as usize;
        (0..=steps).map(|i| snap(self.w_min + i as f64 * self.w_step)).collect()
    }

    /// Enumerate the grid in w-major order; within each w, modes follow
    /// `mode_set` and selective entries follow `h_set`.
    pub fn grid(&self) -> Result<Vec<FusionParams>, FusionError> {
        self.validate()?;
        let mut grid = Vec::new();
        for w in self.weights() {
            for mode in &self.mode_set {
                match mode {
                    FusionMode::Selective => {
                        for &h in &self.h_set {
                            grid.push(FusionParams::selective(w, h)?);
                        }
                    }
                    FusionMode::Always => grid.push(FusionParams::always(w)?),
                }
            }
        }
        if grid.is_empty() {
            return Err(FusionError::EmptyGrid);
        }
        Ok(grid)
    }
}
