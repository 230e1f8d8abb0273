use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::fem::{ScenarioConfig, ScenarioKind};
use crate::reduction::{DChoice, SigmaChoice};
use crate::tolerances;

fn default_tol() -> f64 {
    tolerances::KRYLOV
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

fn three() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: default_tol(), max_iter: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreconditionerSettings {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub d: DChoice,
    #[serde(default)]
    pub sigma: SigmaChoice,
}

impl Default for PreconditionerSettings {
    fn default() -> Self {
        Self { enabled: true, d: DChoice::default(), sigma: SigmaChoice::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizationSettings {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "one")]
    pub gamma: f64,
    /// Fine multiplier cells per coarse cell.
    #[serde(default = "three")]
    pub coarsen: usize,
}

impl Default for StabilizationSettings {
    fn default() -> Self {
        Self { enabled: false, gamma: 1.0, coarsen: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSettings {
    /// Refinement levels as `1/h`.
    pub divisions: Vec<usize>,
    /// Fails the study when the fitted broken-H¹ order falls below this.
    #[serde(default)]
    pub min_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    /// Multiplier-to-mesh size ratios `δ/h`.
    pub ratios: Vec<f64>,
    /// Unstabilized ratio the stabilized errors are compared with.
    #[serde(default = "reference_ratio")]
    pub reference_ratio: f64,
}

fn reference_ratio() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecondSettings {
    /// Subdomain counts per level, `[K]` or `[m, n]`.
    pub subdomains: Vec<Vec<usize>>,
    /// Elements across each subdomain, fixed over the levels.
    pub local_divisions: usize,
}

fn default_probes() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSettings {
    /// Scenarios to check; the study scenario when empty.
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
    /// Random probe vectors per algebraic identity.
    #[serde(default = "default_probes")]
    pub probes: usize,
}

/// One study file. `scenario` is the base configuration; study sections
/// override the fields they sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub preconditioner: PreconditionerSettings,
    #[serde(default)]
    pub stabilization: StabilizationSettings,
    #[serde(default)]
    pub converge: Option<ConvergeSettings>,
    #[serde(default)]
    pub sweep: Option<SweepSettings>,
    #[serde(default)]
    pub precond: Option<PrecondSettings>,
    #[serde(default)]
    pub oracle: Option<OracleSettings>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Converge,
    Sweep,
    Precond,
    Fracture,
    Oracle,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Converge => "converge",
            Study::Sweep => "sweep",
            Study::Precond => "precond",
            Study::Fracture => "fracture",
            Study::Oracle => "oracle",
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config { field: field.to_string(), reason: reason.into() }
}

fn positive(field: &str, v: f64) -> Result<(), HarnessError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| invalid("<file>", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid("<file>", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks every field the study needs, including each derived level
    /// scenario, before anything is assembled.
    pub fn validate(&self, study: Study) -> Result<(), HarnessError> {
        positive("solver.tol", self.solver.tol)?;
        if self.solver.max_iter == Some(0) {
            return Err(invalid("solver.max_iter", "must be positive"));
        }
        if self.stabilization.enabled {
            positive("stabilization.gamma", self.stabilization.gamma)?;
            if self.stabilization.coarsen == 0 {
                return Err(invalid("stabilization.coarsen", "must be positive"));
            }
        }
        match study {
            Study::Converge => {
                let c = self.converge.as_ref().ok_or_else(|| invalid("converge", "section missing"))?;
                if c.divisions.len() < 3 {
                    return Err(invalid("converge.divisions", "at least 3 refinement levels are required"));
                }
                if c.divisions.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("converge.divisions", "levels must refine strictly"));
                }
                if let Some(o) = c.min_order {
                    positive("converge.min_order", o)?;
                }
            }
            Study::Sweep => {
                let s = self.sweep.as_ref().ok_or_else(|| invalid("sweep", "section missing"))?;
                for &r in &s.ratios {
                    positive("sweep.ratios", r)?;
                }
                positive("sweep.reference_ratio", s.reference_ratio)?;
                let lo = s.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = s.ratios.iter().cloned().fold(0.0, f64::max);
                if !(lo <= 1.0 && hi > 1.0) {
                    return Err(invalid("sweep.ratios", "must include ratios at or below 1 and above 1"));
                }
            }
            Study::Precond => {
                let p = self.precond.as_ref().ok_or_else(|| invalid("precond", "section missing"))?;
                if p.subdomains.len() < 3 {
                    return Err(invalid("precond.subdomains", "at least 3 levels are required"));
                }
                if p.local_divisions == 0 {
                    return Err(invalid("precond.local_divisions", "must be positive"));
                }
            }
            Study::Fracture => {
                if self.scenario.kind != ScenarioKind::FractureStar {
                    return Err(invalid("scenario.kind", "the fracture study needs fracture_star"));
                }
            }
            Study::Oracle => {
                if let Some(o) = &self.oracle {
                    if o.probes == 0 {
                        return Err(invalid("oracle.probes", "must be positive"));
                    }
                }
            }
        }
        for (i, sc) in self.level_scenarios(study).iter().enumerate() {
            sc.validate().map_err(|e| match e {
                crate::fem::FemError::ConfigInvalid { field, reason } => {
                    invalid(&format!("scenario.{field}"), format!("level {i}: {reason}"))
                }
                other => invalid("scenario", other.to_string()),
            })?;
        }
        Ok(())
    }

    /// The concrete scenario of every level of `study`.
    pub fn level_scenarios(&self, study: Study) -> Vec<ScenarioConfig> {
        let base = &self.scenario;
        match study {
            Study::Converge => self
                .converge
                .iter()
                .flat_map(|c| &c.divisions)
                .map(|&n| ScenarioConfig { h: 1.0 / n as f64, ..base.clone() })
                .collect(),
            Study::Sweep => self
                .sweep
                .iter()
                .flat_map(|s| &s.ratios)
                .map(|&r| ScenarioConfig { ratio: r, ..base.clone() })
                .collect(),
            Study::Precond => match &self.precond {
                Some(p) => p
                    .subdomains
                    .iter()
                    .map(|d| {
                        let across = d.iter().copied().max().unwrap_or(1).max(1);
                        ScenarioConfig {
                            subdomains: d.clone(),
                            h: 1.0 / (across * p.local_divisions) as f64,
                            ..base.clone()
                        }
                    })
                    .collect(),
                None => Vec::new(),
            },
            Study::Fracture => vec![base.clone()],
            Study::Oracle => match &self.oracle {
                Some(o) if !o.scenarios.is_empty() => o.scenarios.clone(),
                _ => vec![base.clone()],
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONVERGE: &str = r#"
        name = "chain"
        [scenario]
        kind = "chain1d"
        subdomains = [2]
        h = 0.0625
        case = "cubic"
        [converge]
        divisions = [16, 32, 64]
    "#;

    #[test]
    fn parses_with_defaults() {
        let c = StudyConfig::from_toml_str(CONVERGE).unwrap();
        assert_eq!(c.solver.tol, tolerances::KRYLOV);
        assert!(c.preconditioner.enabled && !c.stabilization.enabled);
        assert_eq!(c.scenario.ratio, 3.0);
        c.validate(Study::Converge).unwrap();
        assert_eq!(c.level_scenarios(Study::Converge)[2].h, 1.0 / 64.0);
    }

    #[test]
    fn unknown_keys_and_missing_sections_are_config_errors() {
        let text = CONVERGE.replace("case = \"cubic\"", "case = \"cubic\"\nbogus = 2");
        assert!(matches!(StudyConfig::from_toml_str(&text), Err(HarnessError::Config { .. })));
        let c = StudyConfig::from_toml_str(CONVERGE).unwrap();
        let err = c.validate(Study::Sweep).unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref field, .. } if field == "sweep"));
    }

    #[test]
    fn level_problems_are_caught_before_assembly() {
        let text = CONVERGE.replace("[16, 32, 64]", "[16, 32, 60]").replace("kind = \"chain1d\"", "kind = \"chain1d\"\nbreaks = [0.3]");
        let c = StudyConfig::from_toml_str(&text).unwrap();
        let err = c.validate(Study::Converge).unwrap_err();
        assert!(matches!(err, HarnessError::Config { ref field, .. } if field == "scenario.h"), "{err}");
    }
}
