//! Mixed discrete/continuous search spaces.
//!
//! A [`MixedSpace`] is an ordered list of variables. The position of a
//! variable is also its node index in every molded graph, so the ordering is
//! fixed once the space is built.
//!
//! Discrete variables (nominal or ordinal alike) are one-hot encoded;
//! continuous variables are unit-scaled by their bounds.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariableKind {
    Discrete { cardinality: usize },
    Continuous { bounds: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

impl VariableSpec {
    pub fn discrete(name: impl Into<String>, cardinality: usize) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Discrete { cardinality },
        }
    }

    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Continuous { bounds: [lo, hi] },
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, VariableKind::Discrete { .. })
    }

    /// Width of this variable's raw node feature: `n_i` for discrete, 1 for
    /// continuous.
    pub fn feature_width(&self) -> usize {
        match self.kind {
            VariableKind::Discrete { cardinality } => cardinality,
            VariableKind::Continuous { .. } => 1,
        }
    }

    fn check(&self) -> Result<()> {
        match self.kind {
            VariableKind::Discrete { cardinality } if cardinality < 2 => {
                Err(Error::BadCardinality(self.name.clone()))
            }
            VariableKind::Continuous { bounds: [lo, hi] }
                if !(lo.is_finite() && hi.is_finite() && hi - lo > 0.0) =>
            {
                Err(Error::BadBounds(self.name.clone()))
            }
            _ => Ok(()),
        }
    }
}

/// A single variable value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Discrete(usize),
    Continuous(f64),
}

impl Value {
    /// Numeric view used on the wire: the index for discrete values.
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Discrete(i) => i as f64,
            Value::Continuous(v) => v,
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Value::Discrete(i) => s.serialize_u64(i as u64),
            Value::Continuous(v) => s.serialize_f64(v),
        }
    }
}

/// One point of a [`MixedSpace`], values in variable order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Configuration {
    pub values: Vec<Value>,
}

impl Configuration {
    pub fn new(values: Vec<Value>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn discrete(&self, i: usize) -> usize {
        match self.values[i] {
            Value::Discrete(k) => k,
            Value::Continuous(v) => v as usize,
        }
    }

    pub fn continuous(&self, i: usize) -> f64 {
        self.values[i].as_f64()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

/// Wire form of a configuration before it is checked against a space.
#[derive(Debug, Clone, Deserialize)]
pub struct RawConfiguration {
    pub values: Vec<f64>,
}

/// Raw per-node features: one-hot rows for discrete nodes, a single unit
/// scaled entry for continuous nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceFile", into = "SpaceFile")]
pub struct MixedSpace {
    variables: Vec<VariableSpec>,
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    variables: Vec<VariableSpec>,
}

impl TryFrom<SpaceFile> for MixedSpace {
    type Error = Error;
    fn try_from(f: SpaceFile) -> Result<Self> {
        MixedSpace::new(f.variables)
    }
}

impl From<MixedSpace> for SpaceFile {
    fn from(s: MixedSpace) -> Self {
        SpaceFile {
            variables: s.variables,
        }
    }
}

impl MixedSpace {
    /// Builds and validates a space.
    pub fn new(variables: Vec<VariableSpec>) -> Result<Self> {
        let space = Self { variables };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variables.len() < 2 {
            return Err(Error::EmptySpace);
        }
        let mut seen = HashSet::new();
        for v in &self.variables {
            v.check()?;
            if !seen.insert(v.name.as_str()) {
                return Err(Error::DuplicateName(v.name.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("space serializes")
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    pub fn num_discrete(&self) -> usize {
        self.variables.iter().filter(|v| v.is_discrete()).count()
    }

    pub fn num_continuous(&self) -> usize {
        self.dim() - self.num_discrete()
    }

    /// Start offset of each variable inside the concatenated raw feature
    /// vector, plus the total width.
    pub fn feature_offsets(&self) -> (Vec<usize>, usize) {
        let mut offsets = Vec::with_capacity(self.dim());
        let mut acc = 0;
        for v in &self.variables {
            offsets.push(acc);
            acc += v.feature_width();
        }
        (offsets, acc)
    }

    /// Checks that `cfg` lies inside the space.
    pub fn check_configuration(&self, cfg: &Configuration) -> Result<()> {
        if cfg.len() != self.dim() {
            return Err(Error::InvalidConfiguration(format!(
                "expected {} values, got {}",
                self.dim(),
                cfg.len()
            )));
        }
        for (spec, value) in self.variables.iter().zip(&cfg.values) {
            let ok = match (&spec.kind, value) {
                (VariableKind::Discrete { cardinality }, Value::Discrete(k)) => k < cardinality,
                (VariableKind::Continuous { bounds: [lo, hi] }, Value::Continuous(v)) => {
                    v.is_finite() && v >= lo && v <= hi
                }
                _ => false,
            };
            if !ok {
                return Err(Error::InvalidConfiguration(format!(
                    "value {value:?} is outside the domain of `{}`",
                    spec.name
                )));
            }
        }
        Ok(())
    }

    /// Interprets wire values (`{"values":[...]}`) against this space.
    pub fn configuration_from_raw(&self, raw: &[f64]) -> Result<Configuration> {
        if raw.len() != self.dim() {
            return Err(Error::InvalidConfiguration(format!(
                "expected {} values, got {}",
                self.dim(),
                raw.len()
            )));
        }
        let values = self
            .variables
            .iter()
            .zip(raw)
            .map(|(spec, &x)| match spec.kind {
                VariableKind::Discrete { .. } => {
                    if x >= 0.0 && x.fract() == 0.0 {
                        Ok(Value::Discrete(x as usize))
                    } else {
                        Err(Error::InvalidConfiguration(format!(
                            "`{}` needs an integer index, got {x}",
                            spec.name
                        )))
                    }
                }
                VariableKind::Continuous { .. } => Ok(Value::Continuous(x)),
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = Configuration::new(values);
        self.check_configuration(&cfg)?;
        Ok(cfg)
    }

    pub fn configuration_from_json(&self, text: &str) -> Result<Configuration> {
        let raw: RawConfiguration = serde_json::from_str(text)?;
        self.configuration_from_raw(&raw.values)
    }

    /// Unit-scaled value of variable `i`: `(v - lo) / (hi - lo)` for
    /// continuous, `k / (n - 1)` for discrete.
    pub fn unit_value(&self, cfg: &Configuration, i: usize) -> f64 {
        match (&self.variables[i].kind, cfg.values[i]) {
            (VariableKind::Continuous { bounds: [lo, hi] }, Value::Continuous(v)) => {
                (v - lo) / (hi - lo)
            }
            (VariableKind::Discrete { cardinality }, Value::Discrete(k)) => {
                k as f64 / (*cardinality - 1) as f64
            }
            _ => f64::NAN,
        }
    }

    pub fn encode_features(&self, cfg: &Configuration) -> Result<NodeFeatures> {
        self.check_configuration(cfg)?;
        let rows = self
            .variables
            .iter()
            .zip(&cfg.values)
            .map(|(spec, value)| match (&spec.kind, *value) {
                (VariableKind::Discrete { cardinality }, Value::Discrete(k)) => {
                    let mut row = vec![0.0; *cardinality];
                    row[k] = 1.0;
                    row
                }
                (VariableKind::Continuous { bounds: [lo, hi] }, Value::Continuous(v)) => {
                    vec![(v - lo) / (hi - lo)]
                }
                _ => unreachable!("checked above"),
            })
            .collect();
        Ok(NodeFeatures { rows })
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let values = self
            .variables
            .iter()
            .map(|spec| match spec.kind {
                VariableKind::Discrete { cardinality } => {
                    Value::Discrete(rng.random_range(0..cardinality))
                }
                VariableKind::Continuous { bounds: [lo, hi] } => {
                    Value::Continuous(lo + (hi - lo) * rng.random::<f64>())
                }
            })
            .collect();
        Configuration::new(values)
    }
}
