//! Model and measure files.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thermoformal::{CylinderFunction, CylinderPotential, MarkovMeasure, SubshiftSpec};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alphabet_size: usize,
    pub transitions: Vec<Vec<u8>>,
    pub potential: PotentialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Values are the potential `A = log ρ`.
    #[default]
    Log,
    /// Values are the weights `ρ > 0`.
    Linear,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Constant {
        value: f64,
        #[serde(default)]
        scale: Scale,
    },
    TwoCoordinate {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        scale: Scale,
    },
    /// Values on the admissible words of length `depth`, in lexicographic order.
    Table {
        depth: usize,
        values: Vec<f64>,
        #[serde(default)]
        scale: Scale,
    },
    /// `ρ = H^{−β}`.
    #[serde(rename = "from_H")]
    FromH {
        #[serde(rename = "H")]
        h: HValues,
        #[serde(default = "default_beta")]
        beta: f64,
    },
}

fn default_beta() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HValues {
    Constant(f64),
    Matrix(Vec<Vec<f64>>),
    Table { depth: usize, values: Vec<f64> },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rpf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bowen: Option<f64>,
}

/// A model resolved into library objects.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub potential: CylinderPotential,
    /// `H` and `β` for the KMS and Bowen commands; `H = e^{−A}`, `β = 1` unless given.
    pub h: CylinderFunction,
    pub beta: f64,
}

fn field_error(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {message}"))
}

fn table(spec: &SubshiftSpec, field: &str, depth: usize, values: &[f64]) -> Result<CylinderFunction, CliError> {
    if depth == 0 {
        return Err(field_error(&format!("{field}.depth"), "must be at least 1"));
    }
    let words = spec
        .word_set(depth)
        .map_err(|e| field_error(&format!("{field}.depth"), e))?;
    if words.len() != values.len() {
        return Err(field_error(
            &format!("{field}.values"),
            format!(
                "expected {} entries (admissible words of length {depth}), found {}",
                words.len(),
                values.len()
            ),
        ));
    }
    CylinderFunction::from_values(words, values.to_vec()).map_err(|e| field_error(field, e))
}

fn matrix(spec: &SubshiftSpec, field: &str, m: &[Vec<f64>]) -> Result<CylinderFunction, CliError> {
    CylinderFunction::from_matrix(spec, m).map_err(|e| field_error(field, e))
}

fn potential_from(values: CylinderFunction, scale: Scale, field: &str) -> Result<CylinderPotential, CliError> {
    match scale {
        Scale::Log => CylinderPotential::from_log(values),
        Scale::Linear => CylinderPotential::from_weights(values),
    }
    .map_err(|e| field_error(field, e))
}

impl ModelConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn build(self) -> Result<Model, CliError> {
        if self.transitions.len() != self.alphabet_size {
            return Err(field_error(
                "transitions",
                format!("expected {} rows, found {}", self.alphabet_size, self.transitions.len()),
            ));
        }
        if let Some(i) = self.transitions.iter().position(|r| r.len() != self.alphabet_size) {
            return Err(field_error(
                &format!("transitions[{i}]"),
                format!("expected {} entries", self.alphabet_size),
            ));
        }
        let spec = SubshiftSpec::new(self.transitions.clone()).map_err(|e| field_error("transitions", e))?;
        if let Some(t) = &self.tolerances {
            for (name, v) in [("rpf", t.rpf), ("bowen", t.bowen)] {
                if let Some(v) = v.filter(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(field_error(
                        &format!("tolerances.{name}"),
                        format!("must be a positive number, got {v}"),
                    ));
                }
            }
        }
        let (potential, h, beta) = match &self.potential {
            PotentialConfig::Constant { value, scale } => {
                let f = CylinderFunction::constant(&spec, 1, *value).map_err(|e| field_error("potential", e))?;
                let pot = potential_from(f, *scale, "potential.value")?;
                (pot.clone(), negated_exp(&pot), 1.0)
            }
            PotentialConfig::TwoCoordinate { matrix: m, scale } => {
                let pot = potential_from(matrix(&spec, "potential.matrix", m)?, *scale, "potential.matrix")?;
                (pot.clone(), negated_exp(&pot), 1.0)
            }
            PotentialConfig::Table { depth, values, scale } => {
                let pot = potential_from(table(&spec, "potential", *depth, values)?, *scale, "potential.values")?;
                (pot.clone(), negated_exp(&pot), 1.0)
            }
            PotentialConfig::FromH { h, beta } => {
                let hf = match h {
                    HValues::Constant(c) => {
                        CylinderFunction::constant(&spec, 1, *c).map_err(|e| field_error("potential.H", e))?
                    }
                    HValues::Matrix(m) => matrix(&spec, "potential.H", m)?,
                    HValues::Table { depth, values } => table(&spec, "potential.H", *depth, values)?,
                };
                if !beta.is_finite() {
                    return Err(field_error("potential.beta", "must be finite"));
                }
                let pot = CylinderPotential::from_h(&hf, *beta).map_err(|e| field_error("potential.H", e))?;
                (pot, hf, *beta)
            }
        };
        Ok(Model {
            config: self,
            potential,
            h,
            beta,
        })
    }
}

fn negated_exp(pot: &CylinderPotential) -> CylinderFunction {
    pot.log_weights().map(|a| (-a).exp())
}

/// A Markov chain `(stationary, transition)`, read either from a bare object
/// or from the `outputs` of a saved `gibbs` envelope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureFile {
    pub stationary: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
}

impl MeasureFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("measure: {e}")))?;
        let body = value.get("outputs").cloned().unwrap_or(value);
        let stationary = body
            .get("stationary")
            .ok_or_else(|| field_error("measure", "missing field `stationary`"))?;
        let transition = body
            .get("transition")
            .ok_or_else(|| field_error("measure", "missing field `transition`"))?;
        Ok(MeasureFile {
            stationary: serde_json::from_value(stationary.clone()).map_err(|e| field_error("measure.stationary", e))?,
            transition: serde_json::from_value(transition.clone()).map_err(|e| field_error("measure.transition", e))?,
        })
    }

    pub fn build(&self, spec: &SubshiftSpec) -> Result<MarkovMeasure, CliError> {
        let d = spec.alphabet_size();
        if self.transition.len() != d || self.transition.iter().any(|r| r.len() != d) {
            return Err(field_error("measure.transition", format!("expected a {d}x{d} matrix")));
        }
        let flat: Vec<f64> = self.transition.iter().flatten().copied().collect();
        let p = thermoformal::nalgebra::DMatrix::from_row_slice(d, d, &flat);
        MarkovMeasure::new(spec, self.stationary.clone(), p).map_err(|e| field_error("measure", e))
    }
}
