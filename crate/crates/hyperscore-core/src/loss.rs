//! Training losses: mean-squared regression over all (sample, dimension)
//! pairs, and the condition-feature disentangling penalty.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, norm2};

/// Mean squared error over a `B x K` batch of predictions.
pub fn loss_regression<T: Scalar>(preds: &[Vec<T>], targets: &[Vec<T>]) -> Result<T> {
    check_batch(preds, targets)?;
    let mut acc = T::zero();
    let mut n = 0usize;
    for (p, t) in preds.iter().zip(targets) {
        for (&a, &b) in p.iter().zip(t) {
            let e = a - b;
            acc = acc + e * e;
            n += 1;
        }
    }
    Ok(acc / T::from_usize(n))
}

/// `d loss_regression / d preds`.
pub fn regression_grad<T: Scalar>(preds: &[Vec<T>], targets: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    check_batch(preds, targets)?;
    let n = T::from_usize(preds.len() * preds[0].len());
    let two = T::from_f64(2.0);
    Ok(preds
        .iter()
        .zip(targets)
        .map(|(p, t)| p.iter().zip(t).map(|(&a, &b)| two * (a - b) / n).collect())
        .collect())
}

fn check_batch<T>(preds: &[Vec<T>], targets: &[Vec<T>]) -> Result<()> {
    if preds.len() != targets.len() || preds.is_empty() {
        return Err(Error::Dimension {
            context: "prediction batch",
            expected: targets.len(),
            got: preds.len(),
        });
    }
    for (p, t) in preds.iter().zip(targets) {
        if p.len() != t.len() || p.is_empty() {
            return Err(Error::Dimension {
                context: "prediction width",
                expected: t.len(),
                got: p.len(),
            });
        }
    }
    Ok(())
}

/// Disentangling loss value plus bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisentangleLoss<T> {
    pub value: T,
    /// Number of unordered pairs that entered the mean.
    pub pair_count: usize,
    /// Set when fewer than two conditions were given (value is 0).
    pub warned: bool,
}

/// Mean over unordered pairs `i < j` of `max(epsilon, cos(f_i, f_j))`.
/// Scale-free in each feature: cosines ignore positive rescaling.
pub fn loss_disentangle<T: Scalar>(conds: &[Vec<T>], epsilon: T) -> Result<DisentangleLoss<T>> {
    if conds.len() < 2 {
        return Ok(DisentangleLoss {
            value: T::zero(),
            pair_count: 0,
            warned: true,
        });
    }
    let norms = cond_norms(conds)?;
    let k = conds.len();
    let mut acc = T::zero();
    let mut pairs = 0usize;
    for i in 0..k {
        for j in (i + 1)..k {
            let c = dot(&conds[i], &conds[j]) / (norms[i] * norms[j]);
            acc = acc + if c > epsilon { c } else { epsilon };
            pairs += 1;
        }
    }
    Ok(DisentangleLoss {
        value: acc / T::from_usize(pairs),
        pair_count: pairs,
        warned: false,
    })
}

/// `d loss_disentangle / d conds`. Pairs clipped at `epsilon` (cosine not
/// strictly above it) contribute no gradient.
pub fn disentangle_grad<T: Scalar>(conds: &[Vec<T>], epsilon: T) -> Result<Vec<Vec<T>>> {
    let k = conds.len();
    if k < 2 {
        return Ok(conds.iter().map(|c| vec![T::zero(); c.len()]).collect());
    }
    let norms = cond_norms(conds)?;
    let pairs = T::from_usize(k * (k - 1) / 2);
    let mut grads: Vec<Vec<T>> = conds.iter().map(|c| vec![T::zero(); c.len()]).collect();
    for i in 0..k {
        for j in (i + 1)..k {
            let inner = dot(&conds[i], &conds[j]);
            let cos = inner / (norms[i] * norms[j]);
            if cos <= epsilon {
                continue;
            }
            // d cos / d a = b / (|a||b|) - cos * a / |a|^2
            for d in 0..conds[i].len() {
                let da =
                    conds[j][d] / (norms[i] * norms[j]) - cos * conds[i][d] / (norms[i] * norms[i]);
                let db =
                    conds[i][d] / (norms[i] * norms[j]) - cos * conds[j][d] / (norms[j] * norms[j]);
                grads[i][d] = grads[i][d] + da / pairs;
                grads[j][d] = grads[j][d] + db / pairs;
            }
        }
    }
    Ok(grads)
}

fn cond_norms<T: Scalar>(conds: &[Vec<T>]) -> Result<Vec<T>> {
    conds
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let n = norm2(c);
            if !n.is_finite() || n.to_f64() < 1e-12 {
                Err(Error::Degenerate(alloc::format!(
                    "condition feature {i} has near-zero norm"
                )))
            } else {
                Ok(n)
            }
        })
        .collect()
}

/// `L = L_reg + lambda * L_dis`.
pub fn loss_total<T: Scalar>(reg: T, dis: T, lambda: T) -> T {
    reg + lambda * dis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_zero_on_equal() {
        let p = vec![vec![1.0f64, 2.0], vec![3.0, 4.0]];
        assert_eq!(loss_regression(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn regression_mean_of_unit_errors_is_one() {
        let p = vec![vec![1.0f64, 1.0], vec![1.0, 1.0]];
        let t = vec![vec![0.0f64, 0.0], vec![2.0, 2.0]];
        assert_eq!(loss_regression(&p, &t).unwrap(), 1.0);
    }

    #[test]
    fn regression_hand_sum() {
        // B=2, K=2, errors (1, 2, 3, 4) -> (1+4+9+16)/4 = 7.5
        let p = vec![vec![1.0f64, 2.0], vec![3.0, 4.0]];
        let t = vec![vec![0.0f64, 0.0], vec![0.0, 0.0]];
        assert_eq!(loss_regression(&p, &t).unwrap(), 7.5);
    }

    #[test]
    fn regression_shape_mismatch_errors() {
        let p = vec![vec![1.0f64, 2.0]];
        let t = vec![vec![1.0f64]];
        assert!(loss_regression(&p, &t).is_err());
    }

    #[test]
    fn regression_grad_matches_finite_differences() {
        let mut p = vec![vec![1.0f64, -0.5], vec![0.3, 2.0]];
        let t = vec![vec![0.7f64, 0.0], vec![1.0, 2.0]];
        let grads = regression_grad(&p, &t).unwrap();
        let h = 1e-7;
        for b in 0..2 {
            for k in 0..2 {
                let orig = p[b][k];
                p[b][k] = orig + h;
                let plus = loss_regression(&p, &t).unwrap();
                p[b][k] = orig - h;
                let minus = loss_regression(&p, &t).unwrap();
                p[b][k] = orig;
                let fd = (plus - minus) / (2.0 * h);
                assert!((grads[b][k] - fd).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn regression_nonnegative_and_zero_iff_equal() {
        let p = vec![vec![0.25f64, -1.5]];
        let t = vec![vec![0.25f64, -1.5 + 1e-9]];
        let l = loss_regression(&p, &t).unwrap();
        assert!(l > 0.0);
    }

    #[test]
    fn disentangle_orthogonal_is_zero() {
        let conds = vec![vec![1.0f64, 0.0], vec![0.0, 1.0]];
        let l = loss_disentangle(&conds, 0.0).unwrap();
        assert_eq!(l.value, 0.0);
        assert_eq!(l.pair_count, 1);
        assert!(!l.warned);
    }

    #[test]
    fn disentangle_identical_is_one() {
        let conds = vec![vec![0.5f64, 0.5], vec![0.5, 0.5], vec![0.5, 0.5]];
        let l = loss_disentangle(&conds, 0.0).unwrap();
        assert!((l.value - 1.0).abs() < 1e-12);
        assert_eq!(l.pair_count, 3);
    }

    #[test]
    fn disentangle_hand_case() {
        // K=3 with pairwise cosines (0.5, -0.2, 0.1) and eps=0
        // -> (0.5 + 0 + 0.1) / 3 = 0.2
        // Build vectors in 2-D with those cosines: a=(1,0),
        // b=(0.5, sqrt(0.75)) so cos(a,b)=0.5; choose c so cos(a,c)=-0.2:
        // c=(-0.2, sqrt(1-0.04)); then cos(b,c) = 0.5*-0.2 +
        // sqrt(0.75*0.96) = 0.74867... not 0.1, so build in 3-D instead.
        let a = vec![1.0f64, 0.0, 0.0];
        let b = vec![0.5, (1.0f64 - 0.25).sqrt(), 0.0];
        // want cos(a,c) = -0.2 and cos(b,c) = 0.1:
        // c = (x, y, z): x = -0.2; 0.5x + b1*y = 0.1 -> y = 0.2/b1
        let y = 0.2 / b[1];
        let z = (1.0f64 - 0.04 - y * y).sqrt();
        let c = vec![-0.2, y, z];
        let l = loss_disentangle(&[a, b, c], 0.0).unwrap();
        assert!((l.value - 0.2).abs() < 1e-12, "got {}", l.value);
    }

    #[test]
    fn disentangle_single_condition_warns() {
        let l = loss_disentangle(&[vec![1.0f64, 0.0]], 0.0).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.warned);
    }

    #[test]
    fn disentangle_zero_vector_is_degenerate() {
        let conds = vec![vec![0.0f64, 0.0], vec![1.0, 0.0]];
        assert!(matches!(
            loss_disentangle(&conds, 0.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn disentangle_invariant_to_positive_rescaling() {
        let conds = vec![vec![0.3f64, -0.4, 1.0], vec![0.8, 0.1, -0.2]];
        let a = loss_disentangle(&conds, 0.0).unwrap().value;
        let scaled = vec![
            conds[0].iter().map(|v| v * 7.0).collect::<Vec<_>>(),
            conds[1].clone(),
        ];
        let b = loss_disentangle(&scaled, 0.0).unwrap().value;
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn disentangle_grad_matches_finite_differences() {
        let mut conds = vec![
            vec![0.9f64, 0.1, 0.2],
            vec![0.7, 0.5, -0.1],
            vec![-0.3, 0.8, 0.4],
        ];
        let grads = disentangle_grad(&conds, 0.0).unwrap();
        let h = 1e-7;
        for i in 0..3 {
            for d in 0..3 {
                let orig = conds[i][d];
                conds[i][d] = orig + h;
                let plus = loss_disentangle(&conds, 0.0).unwrap().value;
                conds[i][d] = orig - h;
                let minus = loss_disentangle(&conds, 0.0).unwrap().value;
                conds[i][d] = orig;
                let fd = (plus - minus) / (2.0 * h);
                assert!(
                    (grads[i][d] - fd).abs() < 1e-6,
                    "({i},{d}): {} vs {fd}",
                    grads[i][d]
                );
            }
        }
    }

    #[test]
    fn clipped_pair_contributes_no_gradient() {
        // Orthogonal-ish pair with negative cosine under eps=0: clipped.
        let conds = vec![vec![1.0f64, 0.0], vec![-0.5, 0.2]];
        let grads = disentangle_grad(&conds, 0.0).unwrap();
        assert!(grads.iter().flatten().all(|&g| g == 0.0));
    }

    #[test]
    fn total_is_affine_in_dis() {
        assert_eq!(loss_total(1.0, 0.2, 1.0), 1.2);
        assert_eq!(loss_total(3.5, 0.0, 123.0), 3.5);
        assert_eq!(loss_total(2.0, 9.9, 0.0), 2.0);
    }
}
