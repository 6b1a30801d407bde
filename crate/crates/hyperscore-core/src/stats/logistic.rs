//! Five-parameter logistic regression of predictions onto MOS, used for
//! deviation analysis and optional PLCC preprocessing.
//!
//! Model: `f(x) = b1 * (0.5 - 1 / (1 + exp(b2 (x - b3)))) + b4 x + b5`,
//! fitted by damped Gauss-Newton least squares with a 200-iteration cap.
//! Initialization: the affine part comes from an ordinary least-squares
//! line, `b1` from the residual range, `b2` from the input range, and `b3`
//! from the input mean.

// Needed for f64 math in no_std builds; the test harness links std,
// whose inherent methods shadow these.
use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::error::{Error, Result};

const MAX_ITERS: usize = 200;

#[derive(Clone, Debug)]
pub struct LogisticFit {
    pub params: [f64; 5],
    pub mapped: Vec<f64>,
    /// Cleared when the fit hit the iteration cap or the input was
    /// degenerate (constant predictions).
    pub converged: bool,
    pub sse: f64,
}

fn eval(beta: &[f64; 5], x: f64) -> f64 {
    let u = (beta[1] * (x - beta[2])).clamp(-500.0, 500.0);
    let s = 1.0 / (1.0 + u.exp());
    beta[0] * (0.5 - s) + beta[3] * x + beta[4]
}

fn jacobian_row(beta: &[f64; 5], x: f64) -> [f64; 5] {
    let u = (beta[1] * (x - beta[2])).clamp(-500.0, 500.0);
    let e = u.exp();
    let s = 1.0 / (1.0 + e);
    let es2 = e * s * s;
    [
        0.5 - s,
        beta[0] * es2 * (x - beta[2]),
        -beta[0] * es2 * beta[1],
        x,
        1.0,
    ]
}

fn sse_of(beta: &[f64; 5], x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = eval(beta, a) - b;
            r * r
        })
        .sum()
}

/// Solve a 5x5 system by Gaussian elimination with partial pivoting.
fn solve5(a: &mut [[f64; 5]; 5], b: &mut [f64; 5]) -> Option<[f64; 5]> {
    for col in 0..5 {
        let mut pivot = col;
        for row in (col + 1)..5 {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..5 {
            let f = a[row][col] / a[col][col];
            for k in col..5 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 5];
    for col in (0..5).rev() {
        let mut acc = b[col];
        for k in (col + 1)..5 {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Fit the logistic and return the mapped predictions.
pub fn logistic_map(preds: &[f64], mos: &[f64]) -> Result<LogisticFit> {
    if preds.len() != mos.len() {
        return Err(Error::Dimension {
            context: "logistic inputs",
            expected: preds.len(),
            got: mos.len(),
        });
    }
    if preds.len() < 5 {
        return Err(Error::Argument(
            "logistic fit needs at least 5 points".into(),
        ));
    }
    if preds.iter().chain(mos).any(|v| !v.is_finite()) {
        return Err(Error::Data("logistic inputs must be finite".into()));
    }
    let n = preds.len() as f64;
    let mx = preds.iter().sum::<f64>() / n;
    let my = mos.iter().sum::<f64>() / n;
    let sxx: f64 = preds.iter().map(|v| (v - mx) * (v - mx)).sum();
    let x_min = preds.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    if sxx < 1e-12 {
        // Constant predictions: nothing to fit, map to the MOS mean.
        let beta = [0.0, 1.0, mx, 0.0, my];
        return Ok(LogisticFit {
            params: beta,
            mapped: vec![my; preds.len()],
            converged: false,
            sse: sse_of(&beta, preds, mos),
        });
    }

    // OLS line for the affine part, residual range for the logistic part.
    let sxy: f64 = preds
        .iter()
        .zip(mos)
        .map(|(&a, &b)| (a - mx) * (b - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = preds
        .iter()
        .zip(mos)
        .map(|(&a, &b)| b - (slope * a + intercept))
        .collect();
    let r_min = residuals.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut beta = [r_max - r_min, 4.0 / (x_max - x_min), mx, slope, intercept];
    let mut sse = sse_of(&beta, preds, mos);
    let mut damping = 1e-3;
    let mut converged = false;

    for _ in 0..MAX_ITERS {
        if sse < 1e-20 {
            converged = true;
            break;
        }
        // Build J^T J and J^T r.
        let mut jtj = [[0.0f64; 5]; 5];
        let mut jtr = [0.0f64; 5];
        for (&x, &y) in preds.iter().zip(mos) {
            let row = jacobian_row(&beta, x);
            let r = eval(&beta, x) - y;
            for i in 0..5 {
                jtr[i] += row[i] * r;
                for j in 0..5 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..16 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += damping * (1.0 + jtj[i][i]);
            }
            let mut rhs = [0.0; 5];
            for i in 0..5 {
                rhs[i] = -jtr[i];
            }
            let Some(step) = solve5(&mut a, &mut rhs) else {
                damping *= 10.0;
                continue;
            };
            let mut trial = beta;
            for i in 0..5 {
                trial[i] += step[i];
            }
            let trial_sse = sse_of(&trial, preds, mos);
            if trial_sse.is_finite() && trial_sse < sse {
                let improvement = (sse - trial_sse) / sse.max(1e-300);
                beta = trial;
                sse = trial_sse;
                damping = (damping / 3.0).max(1e-12);
                accepted = true;
                if improvement < 1e-12 {
                    converged = true;
                }
                break;
            }
            damping *= 3.0;
        }
        if !accepted {
            // No downhill step found at any damping: treat as converged to
            // a stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }

    let mapped = preds.iter().map(|&x| eval(&beta, x)).collect();
    Ok(LogisticFit {
        params: beta,
        mapped,
        converged,
        sse,
    })
}
