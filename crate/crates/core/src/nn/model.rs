//! Layer and model descriptions, shape chaining, and seeded weight
//! initialisation.

use super::tensor::Tensor;
use super::NnError;
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

/// One layer of a model. Activations are explicit layers so surgery can
/// splice at any point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        kernel_h: usize,
        kernel_w: usize,
        out_channels: usize,
        stride: usize,
        padding: usize,
    },
    MaxPool {
        pool_h: usize,
        pool_w: usize,
        stride: usize,
    },
    Flatten,
    FullyConnected {
        out_dim: usize,
    },
    Relu,
    Sigmoid,
    Softmax,
}

impl LayerSpec {
    pub fn conv2d(kernel: usize, out_channels: usize, stride: usize, padding: usize) -> Self {
        LayerSpec::Conv2d {
            kernel_h: kernel,
            kernel_w: kernel,
            out_channels,
            stride,
            padding,
        }
    }

    pub fn max_pool(size: usize, stride: usize) -> Self {
        LayerSpec::MaxPool {
            pool_h: size,
            pool_w: size,
            stride,
        }
    }

    pub fn fully_connected(out_dim: usize) -> Self {
        LayerSpec::FullyConnected { out_dim }
    }

    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::FullyConnected { .. })
    }

    fn validate(&self, index: usize) -> Result<(), NnError> {
        let bad = |msg: String| Err(NnError::BadSpec { layer: index, msg });
        match *self {
            LayerSpec::Conv2d {
                kernel_h,
                kernel_w,
                out_channels,
                stride,
                ..
            } => {
                if kernel_h == 0 || kernel_w == 0 || out_channels == 0 || stride == 0 {
                    return bad("conv kernel, channels, and stride must be >= 1".into());
                }
            }
            LayerSpec::MaxPool {
                pool_h,
                pool_w,
                stride,
            } => {
                if pool_h == 0 || pool_w == 0 || stride == 0 {
                    return bad("pool size and stride must be >= 1".into());
                }
            }
            LayerSpec::FullyConnected { out_dim } => {
                if out_dim == 0 {
                    return bad("fully connected out_dim must be >= 1".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Activation shape between layers (batch dimension excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Image {
        channels: usize,
        height: usize,
        width: usize,
    },
    Vector {
        dim: usize,
    },
}

impl Shape {
    pub fn element_count(&self) -> usize {
        match *self {
            Shape::Image {
                channels,
                height,
                width,
            } => channels * height * width,
            Shape::Vector { dim } => dim,
        }
    }

    /// Dims with a leading batch dimension.
    pub fn batch_dims(&self, n: usize) -> Vec<usize> {
        match *self {
            Shape::Image {
                channels,
                height,
                width,
            } => vec![n, channels, height, width],
            Shape::Vector { dim } => vec![n, dim],
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Image {
                channels,
                height,
                width,
            } => write!(f, "{channels}x{height}x{width}"),
            Shape::Vector { dim } => write!(f, "vec({dim})"),
        }
    }
}

/// Architecture description: input shape plus the layer sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// Shape before every layer and after the last one (length = layers+1).
    /// Fails with the offending layer index if the chain breaks.
    pub fn shapes(&self) -> Result<Vec<Shape>, NnError> {
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        shapes.push(self.input);
        let mut current = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i)?;
            current = infer_shape(layer, current, i)?;
            shapes.push(current);
        }
        Ok(shapes)
    }

    pub fn output_shape(&self) -> Result<Shape, NnError> {
        Ok(*self.shapes()?.last().unwrap())
    }

    /// True when the model ends in a scalar sigmoid, the contract for
    /// binary cough models.
    pub fn is_binary_head(&self) -> bool {
        matches!(self.layers.last(), Some(LayerSpec::Sigmoid))
            && matches!(self.output_shape(), Ok(Shape::Vector { dim: 1 }))
    }
}

fn infer_shape(layer: &LayerSpec, input: Shape, index: usize) -> Result<Shape, NnError> {
    let mismatch = |expected: &str, found: Shape| NnError::ShapeMismatch {
        layer: index,
        expected: expected.to_string(),
        found: found.to_string(),
    };
    match *layer {
        LayerSpec::Conv2d {
            kernel_h,
            kernel_w,
            out_channels,
            stride,
            padding,
        } => match input {
            Shape::Image { height, width, .. } => {
                let h_eff = height + 2 * padding;
                let w_eff = width + 2 * padding;
                if h_eff < kernel_h || w_eff < kernel_w {
                    return Err(NnError::BadSpec {
                        layer: index,
                        msg: format!(
                            "conv kernel {kernel_h}x{kernel_w} larger than padded input {h_eff}x{w_eff}"
                        ),
                    });
                }
                Ok(Shape::Image {
                    channels: out_channels,
                    height: (h_eff - kernel_h) / stride + 1,
                    width: (w_eff - kernel_w) / stride + 1,
                })
            }
            other => Err(mismatch("image input", other)),
        },
        LayerSpec::MaxPool {
            pool_h,
            pool_w,
            stride,
        } => match input {
            Shape::Image {
                channels,
                height,
                width,
            } => {
                if height < pool_h || width < pool_w {
                    return Err(NnError::BadSpec {
                        layer: index,
                        msg: format!("pool {pool_h}x{pool_w} larger than input {height}x{width}"),
                    });
                }
                Ok(Shape::Image {
                    channels,
                    height: (height - pool_h) / stride + 1,
                    width: (width - pool_w) / stride + 1,
                })
            }
            other => Err(mismatch("image input", other)),
        },
        LayerSpec::Flatten => match input {
            Shape::Image { .. } => Ok(Shape::Vector {
                dim: input.element_count(),
            }),
            other => Err(mismatch("image input", other)),
        },
        LayerSpec::FullyConnected { out_dim } => match input {
            Shape::Vector { .. } => Ok(Shape::Vector { dim: out_dim }),
            other => Err(mismatch("vector input", other)),
        },
        LayerSpec::Relu | LayerSpec::Sigmoid => Ok(input),
        LayerSpec::Softmax => match input {
            Shape::Vector { dim } => Ok(Shape::Vector { dim }),
            other => Err(mismatch("vector input", other)),
        },
    }
}

/// Weight and bias of one parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Per-parameter gradients, aligned with `ModelSpec::layers`. Entries are
/// `None` for parameter-free or frozen layers.
pub type Gradients = Vec<Option<LayerParams>>;

/// Training-history metadata carried through checkpoints.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub notes: Vec<String>,
}

/// A model's architecture plus its weights and freeze flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub spec: ModelSpec,
    pub params: Vec<Option<LayerParams>>,
    pub trainable: Vec<bool>,
    pub provenance: Provenance,
}

impl ModelState {
    /// Fresh model with seeded initialisation: He-uniform before ReLU,
    /// Glorot-uniform otherwise, zero biases.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self, NnError> {
        let shapes = spec.shapes()?;
        let mut rng = SplitMix64::derive(seed, "weight-init");
        let mut params = Vec::with_capacity(spec.layers.len());
        for (i, layer) in spec.layers.iter().enumerate() {
            params.push(init_layer(layer, &shapes[i], next_is_relu(&spec, i), &mut rng));
        }
        let trainable = vec![true; spec.layers.len()];
        Ok(Self {
            spec,
            params,
            trainable,
            provenance: Provenance {
                seed,
                notes: Vec::new(),
            },
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.params
            .iter()
            .flatten()
            .map(|p| p.weight.len() + p.bias.len())
            .sum()
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.provenance.notes.push(text.into());
    }
}

/// Whether the first activation after layer `i` is a ReLU (decides He vs
/// Glorot init).
fn next_is_relu(spec: &ModelSpec, i: usize) -> bool {
    for layer in &spec.layers[i + 1..] {
        match layer {
            LayerSpec::Relu => return true,
            LayerSpec::Sigmoid | LayerSpec::Softmax => return false,
            _ => {}
        }
    }
    false
}

pub(super) fn init_layer(
    layer: &LayerSpec,
    input: &Shape,
    he: bool,
    rng: &mut SplitMix64,
) -> Option<LayerParams> {
    match *layer {
        LayerSpec::Conv2d {
            kernel_h,
            kernel_w,
            out_channels,
            ..
        } => {
            let in_channels = match *input {
                Shape::Image { channels, .. } => channels,
                _ => unreachable!("validated by shapes()"),
            };
            let fan_in = (in_channels * kernel_h * kernel_w) as f64;
            let fan_out = (out_channels * kernel_h * kernel_w) as f64;
            let limit = init_limit(fan_in, fan_out, he);
            let dims = [out_channels, in_channels, kernel_h, kernel_w];
            let data = (0..dims.iter().product::<usize>())
                .map(|_| rng.uniform(-limit, limit))
                .collect();
            Some(LayerParams {
                weight: Tensor::from_vec(&dims, data),
                bias: Tensor::zeros(&[out_channels]),
            })
        }
        LayerSpec::FullyConnected { out_dim } => {
            let in_dim = input.element_count();
            let limit = init_limit(in_dim as f64, out_dim as f64, he);
            let data = (0..out_dim * in_dim)
                .map(|_| rng.uniform(-limit, limit))
                .collect();
            Some(LayerParams {
                weight: Tensor::from_vec(&[out_dim, in_dim], data),
                bias: Tensor::zeros(&[out_dim]),
            })
        }
        _ => None,
    }
}

fn init_limit(fan_in: f64, fan_out: f64, he: bool) -> f64 {
    if he {
        (6.0 / fan_in).sqrt()
    } else {
        (6.0 / (fan_in + fan_out)).sqrt()
    }
}
