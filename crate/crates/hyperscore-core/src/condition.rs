//! Condition features: per-dimension tokenized prompts passed through a
//! frozen text encoder.
//!
//! Each evaluation dimension owns a prompt of `1 + L` tokens: a frozen meta
//! token derived from the dimension name, followed by `L` learnable tokens.
//! A frozen, pluggable encoder maps the sequence to a single `D`-vector
//! (the EOT-analogue output). Gradients flow to the learnable tokens only;
//! meta tokens and encoder parameters are never updated.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::{fnv1a64, CounterRng};
use crate::scalar::Scalar;
use crate::tensor::{dot, mat_vec, mat_vec_t, Tensor};

/// Learnable-token initialization scale.
const TOKEN_INIT_STD: f64 = 0.02;

/// The `K` tokenized prompts: frozen meta tokens plus learnable tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionPromptSet<T> {
    /// `[K, D]`, frozen embeddings of the dimension names.
    pub meta_tokens: Tensor<T>,
    /// `[K, L, D]`, the only trainable values here.
    pub learnable: Tensor<T>,
}

impl<T: Scalar> ConditionPromptSet<T> {
    /// Build the prompt set for the given dimension names. Learnable tokens
    /// are drawn i.i.d. from a zero-mean Gaussian with std 0.02; meta tokens
    /// come from the deterministic toy embedding of each name.
    pub fn init(
        seed: u64,
        dimension_names: &[String],
        prompt_len: usize,
        feat_dim: usize,
    ) -> Result<Self> {
        let k = dimension_names.len();
        if k == 0 || prompt_len == 0 || feat_dim == 0 {
            return Err(Error::Argument("prompt set needs K, L, D all >= 1".into()));
        }
        let mut meta = Tensor::zeros(&[k, feat_dim]);
        for (i, name) in dimension_names.iter().enumerate() {
            let row = embed_name::<T>(name, feat_dim);
            meta.row_mut(i).copy_from_slice(&row);
        }
        let mut learnable = Tensor::zeros(&[k, prompt_len, feat_dim]);
        learnable.fill_gaussian(&CounterRng::new(seed).stream(10), TOKEN_INIT_STD);
        Ok(Self {
            meta_tokens: meta,
            learnable,
        })
    }

    pub fn dim_count(&self) -> usize {
        self.meta_tokens.rows()
    }

    pub fn prompt_len(&self) -> usize {
        self.learnable.shape()[1]
    }

    pub fn feat_dim(&self) -> usize {
        self.meta_tokens.cols()
    }

    /// Token sequence for dimension `i`: `[(1 + L), D]`, meta token first.
    pub fn token_sequence(&self, i: usize) -> Tensor<T> {
        let (l, d) = (self.prompt_len(), self.feat_dim());
        let mut data = Vec::with_capacity((1 + l) * d);
        data.extend_from_slice(self.meta_tokens.row(i));
        let base = i * l * d;
        data.extend_from_slice(&self.learnable.data()[base..base + l * d]);
        Tensor::from_vec(&[1 + l, d], data).expect("sequence shape")
    }
}

/// Deterministic unit-norm embedding of a name; the toy stand-in for a
/// frozen vocabulary lookup.
pub fn embed_name<T: Scalar>(name: &str, feat_dim: usize) -> Vec<T> {
    let rng = CounterRng::new(fnv1a64(name.as_bytes()));
    let mut v: Vec<f64> = (0..feat_dim).map(|c| rng.unit(c as u64)).collect();
    let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if n > 0.0 {
        for x in &mut v {
            *x /= n;
        }
    }
    v.into_iter().map(T::from_f64).collect()
}

/// A frozen text encoder: token sequence `[S, D]` -> one `D`-vector.
///
/// Implementations must be deterministic and differentiable with respect to
/// their input sequence; their own parameters are never updated.
pub trait TextEncoder<T: Scalar> {
    fn feat_dim(&self) -> usize;

    /// Encode a token sequence into the pooled output vector.
    fn encode(&self, tokens: &Tensor<T>) -> Result<Vec<T>>;

    /// Gradient of the loss with respect to the input tokens, given the
    /// gradient on the output vector.
    fn input_grad(&self, tokens: &Tensor<T>, grad_out: &[T]) -> Result<Tensor<T>>;
}

/// Default frozen encoder: position-weighted linear mixing through a seeded
/// low-rank map, squashed by tanh.
///
/// `out = tanh(A (B u))` where `u` is the flattened sequence with token `p`
/// scaled by `1 / (p + 1)`, `A: [D, r]`, `B: [r, S * D]`. Order-sensitive
/// like a real text encoder, cheap, and exactly reproducible from its seed.
/// A real-CLIP adapter can replace it behind the same trait.
#[derive(Clone, Debug)]
pub struct ToyTextEncoder<T> {
    /// `[D, r]` (stored transposed as `[r, D]` rows for mat_vec use).
    map_out: Tensor<T>,
    /// `[r, S * D]`.
    map_in: Tensor<T>,
    pos_scale: Vec<T>,
    feat_dim: usize,
    seq_len: usize,
}

impl<T: Scalar> ToyTextEncoder<T> {
    /// `seq_len` is the full prompt length `1 + L`.
    pub fn new(seed: u64, feat_dim: usize, seq_len: usize, rank: usize) -> Result<Self> {
        if feat_dim == 0 || seq_len == 0 || rank == 0 {
            return Err(Error::Argument("encoder dims must be >= 1".into()));
        }
        let rng = CounterRng::new(seed).stream(20);
        // Scales keep pre-activations O(1) for a unit-norm leading token.
        let mut map_out = Tensor::zeros(&[rank, feat_dim]);
        map_out.fill_gaussian(&rng.stream(1), 1.0 / libm::sqrt(rank as f64));
        let mut map_in = Tensor::zeros(&[rank, seq_len * feat_dim]);
        map_in.fill_gaussian(&rng.stream(2), 1.0);
        let pos_scale = (0..seq_len)
            .map(|p| T::from_f64(1.0 / (p as f64 + 1.0)))
            .collect();
        Ok(Self {
            map_out,
            map_in,
            pos_scale,
            feat_dim,
            seq_len,
        })
    }

    fn scaled_flat(&self, tokens: &Tensor<T>) -> Vec<T> {
        let d = self.feat_dim;
        let mut u = vec![T::zero(); self.seq_len * d];
        for p in 0..self.seq_len {
            let alpha = self.pos_scale[p];
            let row = tokens.row(p);
            for j in 0..d {
                u[p * d + j] = alpha * row[j];
            }
        }
        u
    }

    fn check_tokens(&self, tokens: &Tensor<T>) -> Result<()> {
        if tokens.shape() != [self.seq_len, self.feat_dim] {
            return Err(Error::Dimension {
                context: "encoder token sequence",
                expected: self.seq_len * self.feat_dim,
                got: tokens.len(),
            });
        }
        Ok(())
    }
}

impl<T: Scalar> TextEncoder<T> for ToyTextEncoder<T> {
    fn feat_dim(&self) -> usize {
        self.feat_dim
    }

    fn encode(&self, tokens: &Tensor<T>) -> Result<Vec<T>> {
        self.check_tokens(tokens)?;
        let u = self.scaled_flat(tokens);
        let mut hidden = vec![T::zero(); self.map_in.rows()];
        for (h, row) in hidden.iter_mut().zip(0..self.map_in.rows()) {
            *h = dot(self.map_in.row(row), &u);
        }
        let pre = mat_vec(&self.map_out, &hidden);
        Ok(pre.into_iter().map(|x| x.tanh()).collect())
    }

    fn input_grad(&self, tokens: &Tensor<T>, grad_out: &[T]) -> Result<Tensor<T>> {
        self.check_tokens(tokens)?;
        if grad_out.len() != self.feat_dim {
            return Err(Error::Dimension {
                context: "encoder output gradient",
                expected: self.feat_dim,
                got: grad_out.len(),
            });
        }
        let out = self.encode(tokens)?;
        // d tanh
        let d_pre: Vec<T> = out
            .iter()
            .zip(grad_out)
            .map(|(&o, &g)| (T::one() - o * o) * g)
            .collect();
        let d_hidden = mat_vec_t(&self.map_out, &d_pre);
        let mut d_u = vec![T::zero(); self.seq_len * self.feat_dim];
        for r in 0..self.map_in.rows() {
            let gr = d_hidden[r];
            if gr == T::zero() {
                continue;
            }
            for (du, w) in d_u.iter_mut().zip(self.map_in.row(r)) {
                *du = *du + gr * *w;
            }
        }
        let mut grads = Tensor::zeros(&[self.seq_len, self.feat_dim]);
        for p in 0..self.seq_len {
            let alpha = self.pos_scale[p];
            let row = grads.row_mut(p);
            for j in 0..self.feat_dim {
                row[j] = alpha * d_u[p * self.feat_dim + j];
            }
        }
        Ok(grads)
    }
}

/// Minimal plug-in encoder: the mean of the token rows.
#[derive(Clone, Debug)]
pub struct MeanPoolEncoder {
    pub feat_dim: usize,
}

impl<T: Scalar> TextEncoder<T> for MeanPoolEncoder {
    fn feat_dim(&self) -> usize {
        self.feat_dim
    }

    fn encode(&self, tokens: &Tensor<T>) -> Result<Vec<T>> {
        if tokens.cols() != self.feat_dim {
            return Err(Error::Dimension {
                context: "mean-pool token width",
                expected: self.feat_dim,
                got: tokens.cols(),
            });
        }
        let s = tokens.rows();
        let inv = T::from_usize(s).recip();
        let mut out = vec![T::zero(); self.feat_dim];
        for p in 0..s {
            for (o, &t) in out.iter_mut().zip(tokens.row(p)) {
                *o = *o + inv * t;
            }
        }
        Ok(out)
    }

    fn input_grad(&self, tokens: &Tensor<T>, grad_out: &[T]) -> Result<Tensor<T>> {
        let s = tokens.rows();
        let inv = T::from_usize(s).recip();
        let mut grads = Tensor::zeros(&[s, self.feat_dim]);
        for p in 0..s {
            for (g, &go) in grads.row_mut(p).iter_mut().zip(grad_out) {
                *g = inv * go;
            }
        }
        Ok(grads)
    }
}

/// Encode all `K` prompts: returns the `K` condition features.
pub fn encode_conditions<T: Scalar, E: TextEncoder<T>>(
    prompts: &ConditionPromptSet<T>,
    encoder: &E,
) -> Result<Vec<Vec<T>>> {
    if encoder.feat_dim() != prompts.feat_dim() {
        return Err(Error::Dimension {
            context: "encoder feature width",
            expected: prompts.feat_dim(),
            got: encoder.feat_dim(),
        });
    }
    (0..prompts.dim_count())
        .map(|i| encoder.encode(&prompts.token_sequence(i)))
        .collect()
}

/// Backpropagate per-condition output gradients into the learnable tokens.
/// The meta row of each sequence gradient is dropped (frozen contract).
pub fn condition_token_grads<T: Scalar, E: TextEncoder<T>>(
    prompts: &ConditionPromptSet<T>,
    encoder: &E,
    grad_features: &[Vec<T>],
) -> Result<Tensor<T>> {
    let (k, l, d) = (
        prompts.dim_count(),
        prompts.prompt_len(),
        prompts.feat_dim(),
    );
    if grad_features.len() != k {
        return Err(Error::Dimension {
            context: "condition gradients",
            expected: k,
            got: grad_features.len(),
        });
    }
    let mut grads = Tensor::zeros(&[k, l, d]);
    for i in 0..k {
        let seq = prompts.token_sequence(i);
        let g_seq = encoder.input_grad(&seq, &grad_features[i])?;
        if !g_seq.all_finite() {
            return Err(Error::Numerical {
                tensor: format!("learnable_tokens[{i}]"),
                reason: "non-finite encoder gradient",
            });
        }
        let base = i * l * d;
        // rows 1..=L are the learnable tokens
        grads.data_mut()[base..base + l * d].copy_from_slice(&g_seq.data()[d..]);
    }
    Ok(grads)
}
