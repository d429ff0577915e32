use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, TensorError, Var};

/// Layer sizes and activation of an [`ImNetMlp`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    /// Widths of the four hidden layers.
    pub hidden: [usize; 4],
    /// Negative slope of the LeakyReLU activations.
    pub leaky_slope: f64,
    /// Multiplier on the default uniform init range of the output layer.
    pub output_init_scale: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: [512, 512, 256, 128],
            leaky_slope: 0.02,
            output_init_scale: 1.0,
        }
    }
}

/// Five fully connected layers. Layers 2–4 see their predecessor's output
/// concatenated with the raw network input; the last layer emits a 3-vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ImNetMlp {
    input_dim: usize,
    config: MlpConfig,
    /// `[w1, b1, …, w5, b5]`, weights stored as `in × out`.
    params: Vec<Tensor>,
}

/// An [`ImNetMlp`]'s parameters registered on a tape.
#[derive(Clone, Debug)]
pub struct BoundMlp {
    pub vars: Vec<Var>,
    slope: f64,
}

impl ImNetMlp {
    pub fn layer_dims(input_dim: usize, hidden: &[usize; 4]) -> [(usize, usize); 5] {
        [
            (input_dim, hidden[0]),
            (hidden[0] + input_dim, hidden[1]),
            (hidden[1] + input_dim, hidden[2]),
            (hidden[2] + input_dim, hidden[3]),
            (hidden[3], 3),
        ]
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases.
    pub fn new(input_dim: usize, config: MlpConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = Self::layer_dims(input_dim, &config.hidden);
        let mut params = Vec::with_capacity(10);
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let mut bound = 1.0 / (fan_in as f64).sqrt();
            if l == dims.len() - 1 {
                bound *= config.output_init_scale;
            }
            let w = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
            let b = (0..fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
            params.push(Tensor::matrix(fan_in, fan_out, w).expect("dims"));
            params.push(Tensor::matrix(1, fan_out, b).expect("dims"));
        }
        log::debug!(
            "ImNetMlp input={input_dim} hidden={:?} params={}",
            config.hidden,
            params.iter().map(Tensor::len).sum::<usize>()
        );
        Self {
            input_dim,
            config,
            params,
        }
    }

    /// Rebuilds from stored parameters, checking every shape.
    pub fn from_params(input_dim: usize, config: MlpConfig, params: Vec<Tensor>) -> Result<Self, TensorError> {
        let dims = Self::layer_dims(input_dim, &config.hidden);
        if params.len() != 10 {
            return Err(TensorError::DataLength {
                expected: 10,
                actual: params.len(),
            });
        }
        for (l, &(i, o)) in dims.iter().enumerate() {
            for (p, expect) in [(&params[2 * l], [i, o]), (&params[2 * l + 1], [1, o])] {
                if p.rows() != expect[0] || p.cols() != expect[1] {
                    return Err(TensorError::ShapeMismatch {
                        op: "mlp params",
                        left: p.shape().to_vec(),
                        right: expect.to_vec(),
                    });
                }
            }
        }
        Ok(Self {
            input_dim,
            config,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Registers the parameters as leaves (`trainable`) or constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BoundMlp {
        let vars = self
            .params
            .iter()
            .map(|p| if trainable { tape.leaf(p.clone()) } else { tape.constant(p.clone()) })
            .collect();
        BoundMlp {
            vars,
            slope: self.config.leaky_slope,
        }
    }
}

impl BoundMlp {
    /// Maps `input` (rows × input_dim) to rows × 3.
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Result<Var, TensorError> {
        let v = &self.vars;
        let mut h = tape.matmul(input, v[0])?;
        h = tape.add_row(h, v[1])?;
        h = tape.leaky_relu(h, self.slope)?;
        for l in 1..4 {
            let cat = tape.concat_cols(&[h, input])?;
            h = tape.matmul(cat, v[2 * l])?;
            h = tape.add_row(h, v[2 * l + 1])?;
            h = tape.leaky_relu(h, self.slope)?;
        }
        let out = tape.matmul(h, v[8])?;
        tape.add_row(out, v[9])
    }
}
