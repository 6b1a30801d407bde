//! Hypernetwork and mapping head.
//!
//! A condition feature is mapped, through a shared affine transformation,
//! to a `[C, G, G]` grid. Four hyper modules read that grid and emit the
//! weights and biases of the mapping head's fully connected layers:
//!
//! * weights whose element count is divisible by `G * G` are produced by a
//!   3x3 convolution over the grid (padding 1, stride 1, so the grid size
//!   is preserved and the reshape arithmetic holds),
//! * all biases, and any weight whose element count is not divisible by
//!   `G * G`, are produced by global-average-pooling the grid and applying
//!   an affine map.
//!
//! Every stage is affine, so the generated parameters are an affine
//! function of the condition feature. All reshapes are row-major.
//!
//! The mapping head itself is a chain of fully connected layers (default
//! 224 -> 112 -> 56 -> 28 -> 1) with GELU between layers and no activation
//! on the output.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::scalar::{gelu, gelu_prime, Scalar};
use crate::tensor::{mat_vec, mat_vec_t, outer_add, Tensor};

const KSIZE: usize = 3;

/// Generated parameters of the mapping head: one `[in, out]` weight and one
/// `[out]` bias per layer, forming a chain that ends in a single scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct MappingHeadParams<T> {
    pub weights: Vec<Tensor<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> MappingHeadParams<T> {
    pub fn zeros(head_dims: &[usize]) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in head_dims.windows(2) {
            weights.push(Tensor::zeros(&[w[0], w[1]]));
            biases.push(vec![T::zero(); w[1]]);
        }
        Self { weights, biases }
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].rows()
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.weights.len() != self.biases.len() {
            return Err(Error::Argument("mapping head needs matched layers".into()));
        }
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if w.cols() != b.len() {
                return Err(Error::Dimension {
                    context: "mapping head bias",
                    expected: w.cols(),
                    got: b.len(),
                });
            }
            if l + 1 < self.weights.len() && w.cols() != self.weights[l + 1].rows() {
                return Err(Error::Argument(format!("head chain breaks at layer {l}")));
            }
            if !w.all_finite() || b.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "head layer {l} holds non-finite values"
                )));
            }
        }
        if self.weights.last().map(|w| w.cols()) != Some(1) {
            return Err(Error::Argument("head must end in a scalar".into()));
        }
        Ok(())
    }

    /// Scale every tensor in place (used by gradient reductions).
    pub fn scale(&mut self, s: T) {
        for w in &mut self.weights {
            for v in w.data_mut() {
                *v = *v * s;
            }
        }
        for b in &mut self.biases {
            for v in b {
                *v = *v * s;
            }
        }
    }

    pub fn add(&mut self, other: &Self) {
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            for (a, b) in w.data_mut().iter_mut().zip(o.data()) {
                *a = *a + *b;
            }
        }
        for (b, o) in self.biases.iter_mut().zip(&other.biases) {
            for (a, v) in b.iter_mut().zip(o) {
                *a = *a + *v;
            }
        }
    }
}

/// How one head layer's weight is generated.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightGen<T> {
    /// 3x3 convolution over the `[C, G, G]` grid; the `[out_c, G, G]`
    /// output is reshaped row-major into `[in, out]`.
    Conv {
        /// `[out_c, C, 3, 3]`.
        kernel: Tensor<T>,
        /// `[out_c]`.
        bias: Tensor<T>,
    },
    /// Global-average-pool then affine `[C, in * out]`.
    Pooled { w: Tensor<T>, b: Tensor<T> },
}

/// Generator for one head layer: a weight path plus the bias path
/// (global-average-pool followed by an affine map to `[out]`).
#[derive(Clone, Debug, PartialEq)]
pub struct HyperLayer<T> {
    pub weight_gen: WeightGen<T>,
    /// `[C, out]`.
    pub bias_w: Tensor<T>,
    /// `[out]`.
    pub bias_b: Tensor<T>,
}

/// The full hypernetwork: shared transformation plus per-layer generators.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperNetParams<T> {
    /// `[D, C * G * G]`.
    pub transform_w: Tensor<T>,
    /// `[C * G * G]`.
    pub transform_b: Tensor<T>,
    pub layers: Vec<HyperLayer<T>>,
    pub channels: usize,
    pub grid: usize,
    pub head_dims: Vec<usize>,
}

impl<T: Scalar> HyperNetParams<T> {
    pub fn init(
        seed: u64,
        feat_dim: usize,
        channels: usize,
        grid: usize,
        head_dims: &[usize],
    ) -> Result<Self> {
        validate_head_dims(head_dims)?;
        if feat_dim == 0 || channels == 0 || grid == 0 {
            return Err(Error::Argument("hypernetwork dims must be >= 1".into()));
        }
        let rng = CounterRng::new(seed).stream(40);
        let grid_sq = grid * grid;
        let t_out = channels * grid_sq;

        let mut transform_w = Tensor::zeros(&[feat_dim, t_out]);
        transform_w.fill_gaussian(&rng.stream(1), 1.0 / libm::sqrt(feat_dim as f64));
        let transform_b = Tensor::zeros(&[t_out]);

        let mut layers = Vec::new();
        for (l, pair) in head_dims.windows(2).enumerate() {
            let (d_in, d_out) = (pair[0], pair[1]);
            let lrng = rng.stream(10 + l as u64);
            // The generator bias carries the layer's base initialization;
            // the condition-dependent part is a deviation around it.
            let base_std = 1.0 / libm::sqrt(d_in as f64);
            let weight_gen = if (d_in * d_out) % grid_sq == 0 {
                let out_c = d_in * d_out / grid_sq;
                let mut kernel = Tensor::zeros(&[out_c, channels, KSIZE, KSIZE]);
                kernel.fill_gaussian(
                    &lrng.stream(1),
                    1.0 / libm::sqrt((channels * KSIZE * KSIZE) as f64),
                );
                let mut bias = Tensor::zeros(&[out_c]);
                bias.fill_gaussian(&lrng.stream(2), base_std);
                WeightGen::Conv { kernel, bias }
            } else {
                let mut w = Tensor::zeros(&[channels, d_in * d_out]);
                w.fill_gaussian(&lrng.stream(1), 1.0 / libm::sqrt(channels as f64));
                let mut b = Tensor::zeros(&[d_in * d_out]);
                b.fill_gaussian(&lrng.stream(2), base_std);
                WeightGen::Pooled { w, b }
            };
            let mut bias_w = Tensor::zeros(&[channels, d_out]);
            bias_w.fill_gaussian(&lrng.stream(3), 1.0 / libm::sqrt(channels as f64));
            layers.push(HyperLayer {
                weight_gen,
                bias_w,
                bias_b: Tensor::zeros(&[d_out]),
            });
        }
        Ok(Self {
            transform_w,
            transform_b,
            layers,
            channels,
            grid,
            head_dims: head_dims.to_vec(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| HyperLayer {
                weight_gen: match &l.weight_gen {
                    WeightGen::Conv { kernel, bias } => WeightGen::Conv {
                        kernel: kernel.zeros_like(),
                        bias: bias.zeros_like(),
                    },
                    WeightGen::Pooled { w, b } => WeightGen::Pooled {
                        w: w.zeros_like(),
                        b: b.zeros_like(),
                    },
                },
                bias_w: l.bias_w.zeros_like(),
                bias_b: l.bias_b.zeros_like(),
            })
            .collect();
        Self {
            transform_w: self.transform_w.zeros_like(),
            transform_b: self.transform_b.zeros_like(),
            layers,
            channels: self.channels,
            grid: self.grid,
            head_dims: self.head_dims.clone(),
        }
    }

    pub fn feat_dim(&self) -> usize {
        self.transform_w.rows()
    }

    /// Transformation output size (`C * G * G`; 5488 at full scale).
    pub fn transform_out(&self) -> usize {
        self.channels * self.grid * self.grid
    }

    /// Generate the mapping-head parameters for one condition feature.
    pub fn generate(&self, cond: &[T]) -> Result<MappingHeadParams<T>> {
        Ok(self.generate_cached(cond)?.0)
    }

    /// As [`generate`](Self::generate) but retaining the intermediates the
    /// backward pass needs.
    pub fn generate_cached(&self, cond: &[T]) -> Result<(MappingHeadParams<T>, HyperCache<T>)> {
        if cond.len() != self.feat_dim() {
            return Err(Error::Dimension {
                context: "hypernetwork condition",
                expected: self.feat_dim(),
                got: cond.len(),
            });
        }
        if cond.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(
                "condition feature holds non-finite values".into(),
            ));
        }
        let (c, g) = (self.channels, self.grid);
        let grid_sq = g * g;

        let mut grid_vals = mat_vec(&self.transform_w, cond);
        for (v, &b) in grid_vals.iter_mut().zip(self.transform_b.data()) {
            *v = *v + b;
        }

        let inv = T::from_usize(grid_sq).recip();
        let pooled: Vec<T> = (0..c)
            .map(|ch| {
                let mut acc = T::zero();
                for &v in &grid_vals[ch * grid_sq..(ch + 1) * grid_sq] {
                    acc = acc + v;
                }
                acc * inv
            })
            .collect();

        let mut head = MappingHeadParams {
            weights: Vec::new(),
            biases: Vec::new(),
        };
        for (l, pair) in self.head_dims.windows(2).enumerate() {
            let (d_in, d_out) = (pair[0], pair[1]);
            let layer = &self.layers[l];
            let flat = match &layer.weight_gen {
                WeightGen::Conv { kernel, bias } => conv3x3(kernel, bias, &grid_vals, c, g),
                WeightGen::Pooled { w, b } => {
                    let mut v = mat_vec(w, &pooled);
                    for (x, &bv) in v.iter_mut().zip(b.data()) {
                        *x = *x + bv;
                    }
                    v
                }
            };
            head.weights.push(Tensor::from_vec(&[d_in, d_out], flat)?);
            let mut bias = mat_vec(&layer.bias_w, &pooled);
            for (x, &bv) in bias.iter_mut().zip(layer.bias_b.data()) {
                *x = *x + bv;
            }
            head.biases.push(bias);
        }
        Ok((head, HyperCache { grid_vals, pooled }))
    }

    /// Backward from head-parameter gradients. Accumulates into `grads` and
    /// returns the gradient on the condition feature.
    pub fn backward(
        &self,
        cond: &[T],
        cache: &HyperCache<T>,
        d_head: &MappingHeadParams<T>,
        grads: &mut HyperNetParams<T>,
    ) -> Vec<T> {
        let (c, g) = (self.channels, self.grid);
        let grid_sq = g * g;
        let mut d_grid = vec![T::zero(); c * grid_sq];
        let mut d_pooled = vec![T::zero(); c];

        for (l, layer) in self.layers.iter().enumerate() {
            let d_w_flat = d_head.weights[l].data();
            match (&layer.weight_gen, &mut grads.layers[l].weight_gen) {
                (
                    WeightGen::Conv { kernel, .. },
                    WeightGen::Conv {
                        kernel: gk,
                        bias: gb,
                    },
                ) => {
                    conv3x3_backward(
                        kernel,
                        &cache.grid_vals,
                        d_w_flat,
                        c,
                        g,
                        gk,
                        gb,
                        &mut d_grid,
                    );
                }
                (WeightGen::Pooled { w, .. }, WeightGen::Pooled { w: gw, b: gb }) => {
                    outer_add(gw, &cache.pooled, d_w_flat);
                    for (x, &d) in gb.data_mut().iter_mut().zip(d_w_flat) {
                        *x = *x + d;
                    }
                    let dp = mat_vec_t(w, d_w_flat);
                    for (a, b) in d_pooled.iter_mut().zip(dp) {
                        *a = *a + b;
                    }
                }
                _ => unreachable!("generator variants out of sync"),
            }
            let d_b = &d_head.biases[l];
            outer_add(&mut grads.layers[l].bias_w, &cache.pooled, d_b);
            for (x, &d) in grads.layers[l].bias_b.data_mut().iter_mut().zip(d_b) {
                *x = *x + d;
            }
            let dp = mat_vec_t(&layer.bias_w, d_b);
            for (a, b) in d_pooled.iter_mut().zip(dp) {
                *a = *a + b;
            }
        }

        // pooled -> grid
        let inv = T::from_usize(grid_sq).recip();
        for ch in 0..c {
            let d = d_pooled[ch] * inv;
            for v in &mut d_grid[ch * grid_sq..(ch + 1) * grid_sq] {
                *v = *v + d;
            }
        }

        // grid -> transformation
        outer_add(&mut grads.transform_w, cond, &d_grid);
        for (x, &d) in grads.transform_b.data_mut().iter_mut().zip(&d_grid) {
            *x = *x + d;
        }
        mat_vec_t(&self.transform_w, &d_grid)
    }
}

fn validate_head_dims(head_dims: &[usize]) -> Result<()> {
    if head_dims.len() < 2 {
        return Err(Error::Argument("head needs at least one layer".into()));
    }
    if head_dims.contains(&0) {
        return Err(Error::Argument("head dims must be >= 1".into()));
    }
    if *head_dims.last().unwrap() != 1 {
        return Err(Error::Argument("head must end in a scalar".into()));
    }
    Ok(())
}

/// 3x3 convolution, padding 1, stride 1, over a `[C, G, G]` grid stored
/// flat. Returns the flat `[out_c, G, G]` output.
fn conv3x3<T: Scalar>(
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    grid_vals: &[T],
    c: usize,
    g: usize,
) -> Vec<T> {
    let out_c = kernel.shape()[0];
    let kdata = kernel.data();
    let mut out = vec![T::zero(); out_c * g * g];
    for o in 0..out_c {
        for y in 0..g {
            for x in 0..g {
                let mut acc = bias.data()[o];
                for ch in 0..c {
                    for ky in 0..KSIZE {
                        let iy = (y + ky).wrapping_sub(1);
                        if iy >= g {
                            continue;
                        }
                        for kx in 0..KSIZE {
                            let ix = (x + kx).wrapping_sub(1);
                            if ix >= g {
                                continue;
                            }
                            let k = kdata[((o * c + ch) * KSIZE + ky) * KSIZE + kx];
                            acc = acc + k * grid_vals[ch * g * g + iy * g + ix];
                        }
                    }
                }
                out[(o * g + y) * g + x] = acc;
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv3x3_backward<T: Scalar>(
    kernel: &Tensor<T>,
    grid_vals: &[T],
    d_out: &[T],
    c: usize,
    g: usize,
    grad_kernel: &mut Tensor<T>,
    grad_bias: &mut Tensor<T>,
    d_grid: &mut [T],
) {
    let out_c = kernel.shape()[0];
    let kdata = kernel.data();
    let gkdata = grad_kernel.data_mut();
    for o in 0..out_c {
        for y in 0..g {
            for x in 0..g {
                let d = d_out[(o * g + y) * g + x];
                if d == T::zero() {
                    continue;
                }
                grad_bias.data_mut()[o] = grad_bias.data()[o] + d;
                for ch in 0..c {
                    for ky in 0..KSIZE {
                        let iy = (y + ky).wrapping_sub(1);
                        if iy >= g {
                            continue;
                        }
                        for kx in 0..KSIZE {
                            let ix = (x + kx).wrapping_sub(1);
                            if ix >= g {
                                continue;
                            }
                            let kidx = ((o * c + ch) * KSIZE + ky) * KSIZE + kx;
                            let gidx = ch * g * g + iy * g + ix;
                            gkdata[kidx] = gkdata[kidx] + d * grid_vals[gidx];
                            d_grid[gidx] = d_grid[gidx] + d * kdata[kidx];
                        }
                    }
                }
            }
        }
    }
}

/// Intermediates of one hypernetwork forward pass.
#[derive(Clone, Debug)]
pub struct HyperCache<T> {
    /// Transformation output, `[C * G * G]` flat.
    pub grid_vals: Vec<T>,
    /// Per-channel global average, `[C]`.
    pub pooled: Vec<T>,
}

/// Run the mapping head: affine layers with GELU between them, none on the
/// output. Returns the raw (unclamped) scalar score.
pub fn mapping_forward<T: Scalar>(quality: &[T], head: &MappingHeadParams<T>) -> Result<T> {
    Ok(mapping_forward_cached(quality, head)?.0)
}

/// Per-layer pre-activations retained for the backward pass.
#[derive(Clone, Debug)]
pub struct MapCache<T> {
    /// `pre[l]` is the affine output of layer `l`; `post[l]` its activation
    /// (identity on the last layer).
    pub pre: Vec<Vec<T>>,
    pub post: Vec<Vec<T>>,
}

pub fn mapping_forward_cached<T: Scalar>(
    quality: &[T],
    head: &MappingHeadParams<T>,
) -> Result<(T, MapCache<T>)> {
    if quality.len() != head.in_dim() {
        return Err(Error::Dimension {
            context: "mapping head input",
            expected: head.in_dim(),
            got: quality.len(),
        });
    }
    let last = head.layer_count() - 1;
    let mut pre = Vec::with_capacity(head.layer_count());
    let mut post = Vec::with_capacity(head.layer_count());
    let mut x: Vec<T> = quality.to_vec();
    for (l, (w, b)) in head.weights.iter().zip(&head.biases).enumerate() {
        let mut y = mat_vec(w, &x);
        for (v, &bv) in y.iter_mut().zip(b) {
            *v = *v + bv;
        }
        let act: Vec<T> = if l < last {
            y.iter().map(|&v| gelu(v)).collect()
        } else {
            y.clone()
        };
        pre.push(y);
        x = act.clone();
        post.push(act);
    }
    let score = post[last][0];
    if !score.is_finite() {
        return Err(Error::Numerical {
            tensor: "mapping head output".into(),
            reason: "non-finite score",
        });
    }
    Ok((score, MapCache { pre, post }))
}

/// Backward through the mapping head. Returns the gradients on the
/// generated parameters and on the input quality feature.
pub fn mapping_backward<T: Scalar>(
    quality: &[T],
    head: &MappingHeadParams<T>,
    cache: &MapCache<T>,
    d_score: T,
) -> (MappingHeadParams<T>, Vec<T>) {
    let last = head.layer_count() - 1;
    let mut d_head = MappingHeadParams::zeros(&head_dims_of(head));
    let mut d_post = vec![d_score];
    for l in (0..=last).rev() {
        let d_pre: Vec<T> = if l < last {
            cache.pre[l]
                .iter()
                .zip(&d_post)
                .map(|(&p, &g)| gelu_prime(p) * g)
                .collect()
        } else {
            d_post.clone()
        };
        let input: &[T] = if l == 0 { quality } else { &cache.post[l - 1] };
        outer_add(&mut d_head.weights[l], input, &d_pre);
        for (b, &d) in d_head.biases[l].iter_mut().zip(&d_pre) {
            *b = *b + d;
        }
        d_post = mat_vec_t(&head.weights[l], &d_pre);
    }
    (d_head, d_post)
}

fn head_dims_of<T: Scalar>(head: &MappingHeadParams<T>) -> Vec<usize> {
    let mut dims: Vec<usize> = head.weights.iter().map(|w| w.rows()).collect();
    dims.push(1);
    dims
}
