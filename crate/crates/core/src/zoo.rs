//! The five benchmark architectures and their parameter accounting.
//!
//! | id | backbone                                   | head                                  |
//! |----|--------------------------------------------|---------------------------------------|
//! | M1 | Conv(32,s2)–Conv(64,s2)–Conv(64,s2)        | (d²−1) → 2d → 64 → C, all dense       |
//! | M2 | [Conv(40)–Pool]–[Conv(64)–Pool]–[Conv(80)–Pool] | (d²−1) → 2d → 64 → C, all dense  |
//! | M3 | as M2                                      | 256 → 128 → 64 → C                    |
//! | M4 | as M1                                      | (d²−1) → SU(d) pool → 64 → C          |
//! | M5 | [Conv(40)–Pool]–[Conv(64)–Pool]–Conv(80)   | (d²−1) → SU(d) pool → 64 → C          |
//!
//! ReLU follows every convolution and every dense layer except the logits
//! layer and a dense layer that feeds the SU(d) pooling map.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::nn::{self, LayerSpec, Network, NnError, SampleShape};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl ModelId {
    pub const ALL: [ModelId; 5] = [ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4, ModelId::M5];

    pub fn description(self) -> &'static str {
        match self {
            ModelId::M1 => "Shallow Classical",
            ModelId::M2 => "Deep Classical w/ bottleneck",
            ModelId::M3 => "Deep Classical w/o bottleneck",
            ModelId::M4 => "Shallow Quantum Inspired",
            ModelId::M5 => "Deep Quantum Inspired",
        }
    }

    pub fn uses_su_pool(self) -> bool {
        matches!(self, ModelId::M4 | ModelId::M5)
    }

    /// Trainable-parameter counts reported for the full-size models
    /// (13×64×64 input, d = 3, 10 classes).
    pub fn reference_param_count(self) -> usize {
        match self {
            ModelId::M1 => 134_088,
            ModelId::M2 => 198_492,
            ModelId::M3 => 1_426_762,
            ModelId::M4 => 93_074,
            ModelId::M5 => 238_930,
        }
    }

    /// Whether the layer diagrams reproduce [`ModelId::reference_param_count`].
    /// M1 and M2 do not (93,128 and 116,104 from their diagrams).
    pub fn reference_count_reproducible(self) -> bool {
        !matches!(self, ModelId::M1 | ModelId::M2)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelId::M1 => "M1",
            ModelId::M2 => "M2",
            ModelId::M3 => "M3",
            ModelId::M4 => "M4",
            ModelId::M5 => "M5",
        };
        f.write_str(s)
    }
}

impl FromStr for ModelId {
    type Err = ZooError;

    fn from_str(s: &str) -> Result<Self, ZooError> {
        match s.trim().to_ascii_uppercase().trim_start_matches("MODEL").trim() {
            "M1" | "1" => Ok(ModelId::M1),
            "M2" | "2" => Ok(ModelId::M2),
            "M3" | "3" => Ok(ModelId::M3),
            "M4" | "4" => Ok(ModelId::M4),
            "M5" | "5" => Ok(ModelId::M5),
            _ => Err(ZooError::UnknownModel(s.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ZooError {
    #[error("unknown model id {0:?} (expected M1..M5)")]
    UnknownModel(String),

    #[error("input shape {shape:?} incompatible with {model}: {source}")]
    IncompatibleInput {
        model: ModelId,
        shape: SampleShape,
        source: NnError,
    },

    #[error("invalid model configuration: {0}")]
    Invalid(String),

    #[error(transparent)]
    Nn(#[from] NnError),
}

pub const DEFAULT_INPUT: SampleShape = [13, 64, 64];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: ModelId,
    pub d: usize,
    pub input_shape: SampleShape,
    pub num_classes: usize,
}

impl ModelSpec {
    /// Full-size defaults: 13×64×64 input, d = 3, 10 classes.
    pub fn new(id: ModelId) -> Self {
        Self {
            id,
            d: 3,
            input_shape: DEFAULT_INPUT,
            num_classes: 10,
        }
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = d;
        self
    }

    pub fn with_input(mut self, shape: SampleShape) -> Self {
        self.input_shape = shape;
        self
    }

    pub fn with_classes(mut self, classes: usize) -> Self {
        self.num_classes = classes;
        self
    }

    /// The layer list, validated against `input_shape`.
    pub fn layers(&self) -> Result<Vec<LayerSpec>, ZooError> {
        if self.num_classes < 2 {
            return Err(ZooError::Invalid(format!("need at least 2 classes, got {}", self.num_classes)));
        }
        if !(crate::supool::MIN_DIM..=crate::supool::MAX_DIM).contains(&self.d) {
            return Err(ZooError::Invalid(format!("d = {} outside 2..=16", self.d)));
        }
        let layers = build_layers(self);
        let mut shape = self.input_shape;
        for l in &layers {
            shape = nn::infer_shape(l, shape).map_err(|source| ZooError::IncompatibleInput {
                model: self.id,
                shape: self.input_shape,
                source,
            })?;
        }
        Ok(layers)
    }

    /// Width of the flattened backbone output.
    pub fn flatten_width(&self) -> Result<usize, ZooError> {
        let layers = self.layers()?;
        let mut shape = self.input_shape;
        for l in &layers {
            shape = nn::infer_shape(l, shape)?;
            if *l == LayerSpec::Flatten {
                return Ok(shape[0]);
            }
        }
        unreachable!("every model flattens its backbone")
    }

    /// Parameter count computed from the layer list alone.
    pub fn param_count(&self) -> Result<usize, ZooError> {
        let mut shape = self.input_shape;
        let mut total = 0;
        for l in &self.layers()? {
            total += nn::spec_param_count(l, shape);
            shape = nn::infer_shape(l, shape)?;
        }
        Ok(total)
    }
}

fn conv(out_channels: usize, stride: usize) -> LayerSpec {
    LayerSpec::Conv2d { out_channels, stride }
}

fn dense(out_features: usize) -> LayerSpec {
    LayerSpec::Dense { out_features }
}

fn build_layers(spec: &ModelSpec) -> Vec<LayerSpec> {
    use LayerSpec::{Flatten, MaxPool2, Relu};
    let d = spec.d;
    let algebra = d * d - 1;
    let classes = spec.num_classes;

    let strided = [conv(32, 2), Relu, conv(64, 2), Relu, conv(64, 2), Relu, Flatten];
    let deep = [
        conv(40, 1),
        Relu,
        MaxPool2,
        conv(64, 1),
        Relu,
        MaxPool2,
        conv(80, 1),
        Relu,
        MaxPool2,
        Flatten,
    ];
    let deep_two_pools = [
        conv(40, 1),
        Relu,
        MaxPool2,
        conv(64, 1),
        Relu,
        MaxPool2,
        conv(80, 1),
        Relu,
        Flatten,
    ];
    let bottleneck = [
        dense(algebra),
        Relu,
        dense(2 * d),
        Relu,
        dense(64),
        Relu,
        dense(classes),
    ];
    let wide = [
        dense(256),
        Relu,
        dense(128),
        Relu,
        dense(64),
        Relu,
        dense(classes),
    ];
    let unitary = [
        dense(algebra),
        LayerSpec::SuPool { d },
        dense(64),
        Relu,
        dense(classes),
    ];

    let (backbone, head): (&[LayerSpec], &[LayerSpec]) = match spec.id {
        ModelId::M1 => (&strided, &bottleneck),
        ModelId::M2 => (&deep, &bottleneck),
        ModelId::M3 => (&deep, &wide),
        ModelId::M4 => (&strided, &unitary),
        ModelId::M5 => (&deep_two_pools, &unitary),
    };
    backbone.iter().chain(head).copied().collect()
}

/// Instantiates the model with He-uniform weights drawn from `seed`.
pub fn build_model<T: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Network<T>, ZooError> {
    let layers = spec.layers()?;
    Ok(Network::new(spec.input_shape, &layers, seed)?)
}

/// Sum of all weight and bias array lengths; SU(d) pooling contributes 0.
pub fn count_params<T: Scalar>(network: &Network<T>) -> usize {
    network.param_count()
}

/// Dense layer widths after the flatten, starting with the flatten width.
pub fn head_widths(spec: &ModelSpec) -> Result<Vec<usize>, ZooError> {
    let layers = spec.layers()?;
    let mut shape = spec.input_shape;
    let mut widths = Vec::new();
    let mut past_flatten = false;
    for l in &layers {
        shape = nn::infer_shape(l, shape)?;
        match l {
            LayerSpec::Flatten => {
                past_flatten = true;
                widths.push(shape[0]);
            }
            LayerSpec::Dense { .. } | LayerSpec::SuPool { .. } if past_flatten => widths.push(shape[0]),
            _ => {}
        }
    }
    Ok(widths)
}
