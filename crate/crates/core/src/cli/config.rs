// Copyright 2026 The tcl-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

//! JSON run configuration.
//!
//! ```json
//! {
//!   "model": { "name": "two_qubit_exchange", "params": { "omega": 1.0, "g": 0.1 } },
//!   "foliation": { "t0": 0.0, "t1": 5.0, "n": 1000 },
//!   "run": { "stride": 10 },
//!   "tolerances": { "trace": 1e-6 }
//! }
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::foliation::{Foliation, Quadrature};
use crate::hs::{pauli, ComplexMatrix, C64};
use crate::models::{self, ModelSpec, Picture};
use crate::perturb::DriveProtocol;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub foliation: FoliationConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: ModelName,
    #[serde(default)]
    pub params: ModelParams,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    QubitBoson,
    Dephasing,
    TwoQubitExchange,
    IsolatedQubit,
}

impl ModelName {
    fn has_oscillator(self) -> bool {
        matches!(self, ModelName::QubitBoson | ModelName::Dephasing)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub omega: Option<f64>,
    pub g: Option<f64>,
    pub n_trunc: Option<usize>,
    /// Bath inverse temperature; omitted means the ground state.
    pub beta: Option<f64>,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub picture: PictureName,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PictureName {
    #[default]
    Interaction,
    Lab,
}

/// A named qubit state or a Bloch vector `{"bloch": [x, y, z]}`.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum InitialState {
    Named(StateName),
    Bloch { bloch: [f64; 3] },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Named(StateName::Plus)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StateName {
    Plus,
    Minus,
    PlusI,
    Excited,
    Ground,
    Mixed,
}

impl InitialState {
    pub fn matrix(&self) -> Result<ComplexMatrix> {
        let bloch = match self {
            InitialState::Named(name) => match name {
                StateName::Plus => [1.0, 0.0, 0.0],
                StateName::Minus => [-1.0, 0.0, 0.0],
                StateName::PlusI => [0.0, 1.0, 0.0],
                StateName::Excited => [0.0, 0.0, 1.0],
                StateName::Ground => [0.0, 0.0, -1.0],
                StateName::Mixed => [0.0, 0.0, 0.0],
            },
            InitialState::Bloch { bloch } => *bloch,
        };
        let r2: f64 = bloch.iter().map(|c| c * c).sum();
        if !(r2 <= 1.0 + 1e-12) {
            return Err(Error::StateValidation(format!("Bloch vector has length {} > 1", r2.sqrt())));
        }
        let [x, y, z] = bloch;
        Ok(ComplexMatrix::from_rows(&[
            vec![C64::new(0.5 * (1.0 + z), 0.0), C64::new(0.5 * x, -0.5 * y)],
            vec![C64::new(0.5 * x, 0.5 * y), C64::new(0.5 * (1.0 - z), 0.0)],
        ]))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationConfig {
    pub t0: f64,
    pub t1: f64,
    pub n: usize,
    #[serde(default)]
    pub quadrature: QuadratureName,
    /// Relabeling of the slice parameters; never changes results.
    #[serde(default)]
    pub relabel: Relabel,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureName {
    #[default]
    Trapezoid,
    Midpoint,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Relabel {
    #[default]
    Identity,
    /// `s ↦ s³ + s`.
    Cubic,
    /// `s ↦ eˢ`.
    Exp,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum OperatorName {
    X,
    Y,
    Z,
}

impl OperatorName {
    pub fn matrix(self) -> ComplexMatrix {
        match self {
            OperatorName::X => pauli::x(),
            OperatorName::Y => pauli::y(),
            OperatorName::Z => pauli::z(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DriveShape {
    #[default]
    Sine,
    Ramped,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub operator: OperatorName,
    #[serde(default)]
    pub shape: DriveShape,
    pub amplitude: f64,
    pub frequency: f64,
    pub ramp: Option<f64>,
    /// Switch-on time; defaults to the foliation's `t0`.
    pub start: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Emit every `stride`-th slice (the last slice is always emitted).
    pub stride: Option<usize>,
    /// Time at which `channel` evaluates the map; defaults to `t1`.
    pub time: Option<f64>,
    pub drive: Option<DriveConfig>,
    pub observable: Option<OperatorName>,
    /// Drive amplitudes for the linear-response scaling study.
    pub amplitudes: Option<Vec<f64>>,
    /// Coupling strengths for the second-order scaling study.
    pub strengths: Option<Vec<f64>>,
    /// Interval counts for `converge`.
    pub refinements: Option<Vec<usize>>,
    /// Oracle substeps per interval for driven reference runs.
    pub substeps: Option<usize>,
    /// Random operators per identity check.
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Rows with `|tr ρ − 1|` above this are flagged.
    pub trace: f64,
    /// Condition estimate beyond which θ⁻¹ or W count as singular.
    pub breakdown_condition: f64,
    /// Top-level bath population that triggers a truncation warning.
    pub leakage: f64,
    /// Rows farther than this trace distance from the oracle are flagged.
    pub oracle: f64,
    pub projector: f64,
    pub propagator: f64,
    pub channel: f64,
    /// Most negative Choi eigenvalue accepted as positive.
    pub choi: f64,
    pub order_band: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            trace: 1e-6,
            breakdown_condition: crate::hs::SINGULAR_CONDITION,
            leakage: 1e-6,
            oracle: 1e-4,
            projector: 1e-12,
            propagator: 1e-10,
            channel: 1e-10,
            choi: -1e-6,
            order_band: 0.3,
        }
    }
}

/// Parses a configuration, reporting the failing field path and position.
pub fn parse(text: &str) -> std::result::Result<Config, String> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: Config = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let at = if path.is_empty() || path == "." { String::new() } else { format!(" at `{path}`") };
        format!("config error{at}: {inner}")
    })?;
    de.end().map_err(|e| format!("config error: {e}"))?;
    Ok(cfg)
}

impl Config {
    pub fn build_model(&self) -> Result<ModelSpec> {
        let p = &self.model.params;
        let name = self.model.name;
        let omega = p.omega.unwrap_or(1.0);
        let need_g = || {
            p.g.ok_or_else(|| Error::Model("`model.params.g` is required for this model".into()))
        };
        if p.n_trunc.is_some() && !name.has_oscillator() {
            return Err(Error::Model("`model.params.n_trunc` only applies to oscillator baths".into()));
        }
        let n = p.n_trunc.unwrap_or(6);
        let model = match name {
            ModelName::QubitBoson => models::qubit_boson(omega, need_g()?, n)?,
            ModelName::Dephasing => models::dephasing(omega, need_g()?, n)?,
            ModelName::TwoQubitExchange => models::two_qubit_exchange(omega, need_g()?)?,
            ModelName::IsolatedQubit => {
                if p.g.is_some() {
                    return Err(Error::Model("`isolated_qubit` has no coupling `g`".into()));
                }
                models::isolated_qubit(omega)?
            }
        };
        let mut model = model.with_initial_state(p.initial_state.matrix()?)?;
        if let Some(beta) = p.beta {
            let rho_b = models::thermal_state(model.h_bath(), beta)?;
            model = model.with_bath_state(rho_b)?;
        }
        Ok(model.with_picture(match p.picture {
            PictureName::Interaction => Picture::Interaction,
            PictureName::Lab => Picture::Lab,
        }))
    }

    pub fn build_foliation(&self) -> Result<Foliation> {
        self.foliation_with(self.foliation.n)
    }

    /// The configured foliation with `n` intervals instead.
    pub fn foliation_with(&self, n: usize) -> Result<Foliation> {
        let fc = &self.foliation;
        let f = Foliation::flat(fc.t0, fc.t1, n)?.with_quadrature(match fc.quadrature {
            QuadratureName::Trapezoid => Quadrature::Trapezoid,
            QuadratureName::Midpoint => Quadrature::Midpoint,
        });
        match fc.relabel {
            Relabel::Identity => Ok(f),
            Relabel::Cubic => f.reparametrize(|s| s * s * s + s),
            Relabel::Exp => f.reparametrize(f64::exp),
        }
    }

    pub fn build_drive(&self) -> Result<Option<DriveProtocol>> {
        let Some(d) = &self.run.drive else { return Ok(None) };
        let start = d.start.unwrap_or(self.foliation.t0);
        let op = d.operator.matrix();
        let drive = match d.shape {
            DriveShape::Sine => {
                if d.ramp.is_some() {
                    return Err(Error::Model("`run.drive.ramp` only applies to the ramped shape".into()));
                }
                DriveProtocol::sine(op, d.amplitude, d.frequency, start)?
            }
            DriveShape::Ramped => {
                let ramp = d.ramp.ok_or_else(|| Error::Model("`run.drive.ramp` is required for the ramped shape".into()))?;
                DriveProtocol::ramped(op, d.amplitude, d.frequency, ramp, start)?
            }
        };
        Ok(Some(drive))
    }

    pub fn stride(&self) -> Result<usize> {
        match self.run.stride {
            Some(0) => Err(Error::Grid("`run.stride` must be at least 1".into())),
            Some(s) => Ok(s),
            None => Ok(1),
        }
    }

    pub fn substeps(&self) -> Result<usize> {
        match self.run.substeps {
            Some(0) => Err(Error::Grid("`run.substeps` must be at least 1".into())),
            Some(s) => Ok(s),
            None => Ok(8),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {"name": "dephasing", "params": {"g": 0.2}},
        "foliation": {"t0": 0.0, "t1": 1.0, "n": 10}
    }"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.model.name, ModelName::Dephasing);
        assert_eq!(cfg.tolerances.trace, 1e-6);
        let m = cfg.build_model().unwrap();
        assert_eq!(m.layout().d_bath(), 6);
        assert_eq!(cfg.build_foliation().unwrap().len(), 11);
    }

    #[test]
    fn unknown_fields_name_their_path() {
        let text = r#"{"model": {"name": "dephasing", "params": {"g": 0.2, "gamma": 1}},
                       "foliation": {"t0": 0, "t1": 1, "n": 4}}"#;
        let err = parse(text).unwrap_err();
        assert!(err.contains("model.params"), "{err}");
        assert!(err.contains("gamma"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn wrong_types_name_their_path() {
        let text = r#"{"model": {"name": "dephasing"}, "foliation": {"t0": 0, "t1": 1, "n": -3}}"#;
        let err = parse(text).unwrap_err();
        assert!(err.contains("foliation.n"), "{err}");
    }

    #[test]
    fn missing_coupling_is_a_model_error() {
        let text = r#"{"model": {"name": "qubit_boson"}, "foliation": {"t0": 0, "t1": 1, "n": 4}}"#;
        assert!(matches!(parse(text).unwrap().build_model(), Err(Error::Model(_))));
    }

    #[test]
    fn bloch_states() {
        let s: InitialState = serde_json::from_str(r#"{"bloch": [0.0, 0.0, 1.0]}"#).unwrap();
        assert!((&s.matrix().unwrap() - &ComplexMatrix::unit(2, 0, 0)).norm_max() < 1e-16);
        let s: InitialState = serde_json::from_str(r#""plus_i""#).unwrap();
        assert!((s.matrix().unwrap()[(1, 0)] - C64::new(0.0, 0.5)).norm() < 1e-16);
        let bad = InitialState::Bloch { bloch: [1.0, 1.0, 0.0] };
        assert!(bad.matrix().is_err());
    }
}
