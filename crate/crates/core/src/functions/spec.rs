//! JSON function specs and named presets.

use serde::Deserialize;

use crate::error::{Error, Result};

use super::{Function, PiecewiseLinear, StepFunction};

/// Default node count for presets that are interpolated.
pub const PRESET_RESOLUTION: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `f = 1`.
    One,
    /// `f(t) = t`.
    Ramp,
    /// `f(t) = 1 - e^{-t}`.
    ExpGamma,
    /// `f(t) = sin(pi t)`.
    SinPi,
    /// `f(t) = t^2`.
    Square,
}

impl Preset {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.trim() {
            "one" => Preset::One,
            "ramp" => Preset::Ramp,
            "exp-gamma" => Preset::ExpGamma,
            "sin-pi" => Preset::SinPi,
            "square" => Preset::Square,
            other => return Err(Error::Spec(format!("unknown preset {other:?}"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::One => "one",
            Preset::Ramp => "ramp",
            Preset::ExpGamma => "exp-gamma",
            Preset::SinPi => "sin-pi",
            Preset::Square => "square",
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Preset::One => 1.0,
            Preset::Ramp => t,
            Preset::ExpGamma => -(-t).exp_m1(),
            Preset::SinPi => (std::f64::consts::PI * t).sin(),
            Preset::Square => t * t,
        }
    }

    /// Exact representation for `one` and `ramp`; the interpolant on a
    /// uniform grid of `resolution` nodes otherwise.
    pub fn build(&self, resolution: Option<usize>) -> Result<Function> {
        Ok(Function::Pwl(match self {
            Preset::One => PiecewiseLinear::constant(1.0),
            Preset::Ramp => PiecewiseLinear::identity(),
            _ => {
                let n = resolution.unwrap_or(PRESET_RESOLUTION);
                if n < 2 {
                    return Err(Error::Spec(format!(
                        "preset resolution must be at least 2, got {n}"
                    )));
                }
                PiecewiseLinear::interpolate(PiecewiseLinear::uniform_grid(n), |t| self.value(t))?
            }
        }))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FunctionSpec {
    Pwl {
        nodes: Vec<f64>,
        values: Vec<f64>,
    },
    Step {
        nodes: Vec<f64>,
        values: Vec<f64>,
    },
    Preset {
        name: String,
        #[serde(default)]
        resolution: Option<usize>,
    },
}

impl FunctionSpec {
    pub fn build(self) -> Result<Function> {
        match self {
            FunctionSpec::Pwl { nodes, values } => Ok(PiecewiseLinear::new(nodes, values)?.into()),
            FunctionSpec::Step { nodes, values } => Ok(StepFunction::new(nodes, values)?.into()),
            FunctionSpec::Preset { name, resolution } => {
                Preset::from_name(&name)?.build(resolution)
            }
        }
    }
}

/// Parses a JSON spec (`{"type": "pwl", "nodes": [...], "values": [...]}`,
/// `{"type": "step", ...}`, `{"type": "preset", "name": "ramp"}`) or the
/// shorthand `preset:NAME`.
pub fn parse_function_spec(text: &str) -> Result<Function> {
    let text = text.trim();
    if let Some(name) = text.strip_prefix("preset:") {
        return Preset::from_name(name)?.build(None);
    }
    let spec: FunctionSpec = serde_json::from_str(text).map_err(|e| {
        Error::Spec(format!(
            "function spec at line {} column {}: {e}",
            e.line(),
            e.column()
        ))
    })?;
    spec.build().map_err(|e| match e {
        Error::Domain(m) => Error::Spec(m),
        other => other,
    })
}
