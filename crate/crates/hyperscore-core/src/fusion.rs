//! Conditional feature fusion.
//!
//! For each evaluation dimension the patch features are reweighted by how
//! relevant each patch is to the dimension's condition feature:
//!
//! 1. visual, text, and condition features are row-normalized,
//! 2. a patch-token correlation matrix and a token-condition correlation
//!    vector are formed from cosine similarities,
//! 3. their product gives per-patch logits; a softmax turns them into
//!    weights that pool the *raw* patch features into one vector,
//! 4. the pooled vector is gated by the raw EOT text token and passed
//!    through a two-layer MLP to produce the quality feature.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::scalar::{gelu, gelu_prime, Scalar};
use crate::tensor::{dot, mat_vec, mat_vec_t, norm2, outer_add, Tensor};

/// Rows with a norm below this are rejected as corrupt upstream data.
const MIN_ROW_NORM: f64 = 1e-12;

/// Per-patch fusion weights for one dimension: nonnegative, summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionWeights<T> {
    pub weights: Vec<T>,
}

/// The quality feature is a plain `D_q`-vector.
pub type QualityFeature<T> = Vec<T>;

/// L2-normalize every row. Near-zero rows signal corrupt data and error out
/// rather than being silently epsilon-padded.
pub fn normalize_rows<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let mut out = x.clone();
    for r in 0..x.rows() {
        let n = norm2(x.row(r));
        if !n.is_finite() || n.to_f64() < MIN_ROW_NORM {
            return Err(Error::Degenerate(alloc::format!(
                "row {r} has norm {n} below {MIN_ROW_NORM}"
            )));
        }
        for v in out.row_mut(r) {
            *v = *v / n;
        }
    }
    Ok(out)
}

/// L2-normalize one vector.
pub fn normalize_vec<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    let n = norm2(v);
    if !n.is_finite() || n.to_f64() < MIN_ROW_NORM {
        return Err(Error::Degenerate(alloc::format!(
            "vector norm {n} below {MIN_ROW_NORM}"
        )));
    }
    Ok(v.iter().map(|&x| x / n).collect())
}

/// Backward through `v_hat = v / |v|`: given `d v_hat`, returns `d v`.
pub fn normalize_vec_backward<T: Scalar>(v: &[T], grad_norm: &[T]) -> Vec<T> {
    let n = norm2(v);
    let inv = n.recip();
    let vhat: Vec<T> = v.iter().map(|&x| x * inv).collect();
    let proj = dot(&vhat, grad_norm);
    vhat.iter()
        .zip(grad_norm)
        .map(|(&vh, &g)| (g - vh * proj) * inv)
        .collect()
}

/// Patch-token correlation: entry `(p, s)` is the cosine between patch `p`
/// and text token `s`. Inputs must be row-normalized.
pub fn patch_token_correlation<T: Scalar>(
    visual_norm: &Tensor<T>,
    text_norm: &Tensor<T>,
) -> Result<Tensor<T>> {
    if visual_norm.cols() != text_norm.cols() {
        return Err(Error::Dimension {
            context: "patch/token feature width",
            expected: visual_norm.cols(),
            got: text_norm.cols(),
        });
    }
    crate::tensor::matmul_nt(visual_norm, text_norm)
}

/// Token-condition correlation: entry `s` is the cosine between text token
/// `s` and the condition feature.
pub fn token_condition_correlation<T: Scalar>(
    text_norm: &Tensor<T>,
    cond_norm: &[T],
) -> Result<Vec<T>> {
    if text_norm.cols() != cond_norm.len() {
        return Err(Error::Dimension {
            context: "token/condition feature width",
            expected: text_norm.cols(),
            got: cond_norm.len(),
        });
    }
    Ok((0..text_norm.rows())
        .map(|s| dot(text_norm.row(s), cond_norm))
        .collect())
}

/// Numerically stable softmax (max subtraction).
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .fold(T::neg_infinity(), |a, &b| if b > a { b } else { a });
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().fold(T::zero(), |a, &b| a + b);
    let inv = sum.recip();
    exps.into_iter().map(|e| e * inv).collect()
}

/// Backward through softmax: `dz_p = w_p (dw_p - sum_q w_q dw_q)`.
pub fn softmax_backward<T: Scalar>(weights: &[T], grad_w: &[T]) -> Vec<T> {
    let inner = dot(weights, grad_w);
    weights
        .iter()
        .zip(grad_w)
        .map(|(&w, &g)| w * (g - inner))
        .collect()
}

/// Fuse the raw patch features under one condition. Returns the softmax
/// weights over all `M * N_v` patches jointly and the pooled `D`-vector.
/// Pooling uses the *un-normalized* visual features.
pub fn fuse_conditional<T: Scalar>(
    corr_vt: &Tensor<T>,
    corr_tc: &[T],
    visual_raw: &Tensor<T>,
) -> Result<(FusionWeights<T>, Vec<T>)> {
    if corr_vt.cols() != corr_tc.len() {
        return Err(Error::Dimension {
            context: "fusion logits inner dimension",
            expected: corr_vt.cols(),
            got: corr_tc.len(),
        });
    }
    if corr_vt.rows() != visual_raw.rows() {
        return Err(Error::Dimension {
            context: "fusion patch count",
            expected: corr_vt.rows(),
            got: visual_raw.rows(),
        });
    }
    let logits: Vec<T> = (0..corr_vt.rows())
        .map(|p| dot(corr_vt.row(p), corr_tc))
        .collect();
    let weights = softmax(&logits);
    let fused = pool(visual_raw, &weights);
    Ok((FusionWeights { weights }, fused))
}

fn pool<T: Scalar>(visual_raw: &Tensor<T>, weights: &[T]) -> Vec<T> {
    let mut fused = vec![T::zero(); visual_raw.cols()];
    for (p, &w) in weights.iter().enumerate() {
        crate::tensor::axpy(&mut fused, w, visual_raw.row(p));
    }
    fused
}

/// The MLP that turns the gated fusion output into the quality feature:
/// two affine layers `D -> H -> D_q` with GELU after the first.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionMlp<T> {
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
}

impl<T: Scalar> FusionMlp<T> {
    pub fn init(seed: u64, feat_dim: usize, hidden: usize, quality_dim: usize) -> Result<Self> {
        if feat_dim == 0 || hidden == 0 || quality_dim == 0 {
            return Err(Error::Argument("MLP dims must be >= 1".into()));
        }
        let rng = CounterRng::new(seed).stream(30);
        let mut w1 = Tensor::zeros(&[feat_dim, hidden]);
        w1.fill_gaussian(&rng.stream(1), 1.0 / libm::sqrt(feat_dim as f64));
        let mut w2 = Tensor::zeros(&[hidden, quality_dim]);
        w2.fill_gaussian(&rng.stream(2), 1.0 / libm::sqrt(hidden as f64));
        Ok(Self {
            w1,
            b1: Tensor::zeros(&[hidden]),
            w2,
            b2: Tensor::zeros(&[quality_dim]),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w1: self.w1.zeros_like(),
            b1: self.b1.zeros_like(),
            w2: self.w2.zeros_like(),
            b2: self.b2.zeros_like(),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.w2.cols()
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.forward_cached(x)?.quality)
    }

    pub fn forward_cached(&self, x: &[T]) -> Result<MlpCache<T>> {
        if x.len() != self.in_dim() {
            return Err(Error::Dimension {
                context: "MLP input",
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        let mut h_pre = mat_vec(&self.w1, x);
        for (h, &b) in h_pre.iter_mut().zip(self.b1.data()) {
            *h = *h + b;
        }
        let h: Vec<T> = h_pre.iter().map(|&v| gelu(v)).collect();
        let mut quality = mat_vec(&self.w2, &h);
        for (q, &b) in quality.iter_mut().zip(self.b2.data()) {
            *q = *q + b;
        }
        Ok(MlpCache { h_pre, h, quality })
    }

    /// Backward: accumulates parameter gradients into `grads` and returns
    /// the gradient on the input.
    pub fn backward(
        &self,
        x: &[T],
        cache: &MlpCache<T>,
        grad_quality: &[T],
        grads: &mut FusionMlp<T>,
    ) -> Vec<T> {
        outer_add(&mut grads.w2, &cache.h, grad_quality);
        for (g, &d) in grads.b2.data_mut().iter_mut().zip(grad_quality) {
            *g = *g + d;
        }
        let d_h = mat_vec_t(&self.w2, grad_quality);
        let d_h_pre: Vec<T> = d_h
            .iter()
            .zip(&cache.h_pre)
            .map(|(&g, &pre)| g * gelu_prime(pre))
            .collect();
        outer_add(&mut grads.w1, x, &d_h_pre);
        for (g, &d) in grads.b1.data_mut().iter_mut().zip(&d_h_pre) {
            *g = *g + d;
        }
        mat_vec_t(&self.w1, &d_h_pre)
    }
}

#[derive(Clone, Debug)]
pub struct MlpCache<T> {
    pub h_pre: Vec<T>,
    pub h: Vec<T>,
    pub quality: Vec<T>,
}

/// Quality feature for one dimension: `MLP(fused * eot)` (element-wise product). Both the fused
/// visual vector and the EOT token are raw (un-normalized).
pub fn quality_feature<T: Scalar>(
    fused_visual: &[T],
    text_eot: &[T],
    mlp: &FusionMlp<T>,
) -> Result<QualityFeature<T>> {
    if fused_visual.len() != text_eot.len() {
        return Err(Error::Dimension {
            context: "fusion gating width",
            expected: fused_visual.len(),
            got: text_eot.len(),
        });
    }
    let gated: Vec<T> = fused_visual
        .iter()
        .zip(text_eot)
        .map(|(&a, &b)| a * b)
        .collect();
    mlp.forward(&gated)
}

/// Everything the backward pass needs from one (sample, dimension) fusion.
#[derive(Clone, Debug)]
pub struct FusionCache<T> {
    pub corr_tc: Vec<T>,
    pub weights: Vec<T>,
    pub fused: Vec<T>,
    pub gated: Vec<T>,
    pub mlp: MlpCache<T>,
}

/// Forward pass retaining intermediates.
pub fn fusion_forward_cached<T: Scalar>(
    corr_vt: &Tensor<T>,
    text_norm: &Tensor<T>,
    cond_norm: &[T],
    visual_raw: &Tensor<T>,
    text_eot: &[T],
    mlp: &FusionMlp<T>,
) -> Result<FusionCache<T>> {
    let corr_tc = token_condition_correlation(text_norm, cond_norm)?;
    let (w, fused) = fuse_conditional(corr_vt, &corr_tc, visual_raw)?;
    let gated: Vec<T> = fused.iter().zip(text_eot).map(|(&a, &b)| a * b).collect();
    let mlp_cache = mlp.forward_cached(&gated)?;
    Ok(FusionCache {
        corr_tc,
        weights: w.weights,
        fused,
        gated,
        mlp: mlp_cache,
    })
}

/// Backward pass for one (sample, dimension) fusion. Accumulates MLP
/// gradients and returns the gradient on the *normalized* condition
/// feature.
#[allow(clippy::too_many_arguments)]
pub fn fusion_backward<T: Scalar>(
    cache: &FusionCache<T>,
    corr_vt: &Tensor<T>,
    text_norm: &Tensor<T>,
    visual_raw: &Tensor<T>,
    text_eot: &[T],
    mlp: &FusionMlp<T>,
    grad_quality: &[T],
    mlp_grads: &mut FusionMlp<T>,
) -> Vec<T> {
    let d_gated = mlp.backward(&cache.gated, &cache.mlp, grad_quality, mlp_grads);
    let d_fused: Vec<T> = d_gated.iter().zip(text_eot).map(|(&g, &e)| g * e).collect();
    // fused = sum_p w_p * visual[p]
    let d_weights: Vec<T> = (0..visual_raw.rows())
        .map(|p| dot(visual_raw.row(p), &d_fused))
        .collect();
    let d_logits = softmax_backward(&cache.weights, &d_weights);
    // logits = corr_vt * corr_tc
    let mut d_corr_tc = vec![T::zero(); cache.corr_tc.len()];
    for (p, &dz) in d_logits.iter().enumerate() {
        if dz == T::zero() {
            continue;
        }
        crate::tensor::axpy(&mut d_corr_tc, dz, corr_vt.row(p));
    }
    // corr_tc = text_norm * cond_norm
    let mut d_cond_norm = vec![T::zero(); text_norm.cols()];
    for (s, &da) in d_corr_tc.iter().enumerate() {
        if da == T::zero() {
            continue;
        }
        crate::tensor::axpy(&mut d_cond_norm, da, text_norm.row(s));
    }
    d_cond_norm
}
