use serde::{Deserialize, Serialize};

use crate::{Answer, Error, Result};

pub const KERNEL_VARIANCE: f64 = 30.0;
pub const COST: f64 = 1000.0;
pub const KKT_TOLERANCE: f64 = 1e-6;
const TAU: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;

/// `exp(-|u - v|^2 / (2 sigma^2))`.
pub fn gaussian_kernel(u: &[f64; 2], v: &[f64; 2], variance: f64) -> f64 {
    let d0 = u[0] - v[0];
    let d1 = u[1] - v[1];
    (-(d0 * d0 + d1 * d1) / (2.0 * variance)).exp()
}

/// Optimal dual variables of the soft-margin problem
/// `min 1/2 a'Qa - e'a  s.t.  y'a = 0, 0 <= a <= C`, `Q_ij = y_i y_j K_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub labels: Vec<f64>,
    /// Decision function offset: `f(x) = sum a_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
}

impl DualSolution {
    pub fn objective(&self, points: &[[f64; 2]], variance: f64) -> f64 {
        let n = points.len();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += self.alpha[i]
                    * self.alpha[j]
                    * self.labels[i]
                    * self.labels[j]
                    * gaussian_kernel(&points[i], &points[j], variance);
            }
        }
        0.5 * quad - self.alpha.iter().sum::<f64>()
    }
}

/// SMO with maximal-violating-pair / second-order working set selection.
pub fn solve_dual(points: &[[f64; 2]], labels: &[Answer], variance: f64, cost: f64) -> Result<DualSolution> {
    let n = points.len();
    if n != labels.len() {
        return Err(Error::DataIntegrity(format!(
            "{n} points but {} labels",
            labels.len()
        )));
    }
    if !labels.contains(&Answer::Yes) || !labels.contains(&Answer::No) {
        return Err(Error::MissingClass);
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DataIntegrity("non-finite feature".into()));
    }
    let y: Vec<f64> = labels.iter().map(|a| a.label()).collect();
    let k: Vec<Vec<f64>> = points
        .iter()
        .map(|u| points.iter().map(|v| gaussian_kernel(u, v, variance)).collect())
        .collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < cost) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < cost);

    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !in_low(alpha[t], y[t]) {
                    continue;
                }
                gmax2 = gmax2.max(y[t] * grad[t]);
                let b = gmax + y[t] * grad[t];
                if b > 0.0 {
                    let mut a = k[i][i] + k[t][t] - 2.0 * k[i][t];
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let obj = -(b * b) / a;
                    if obj < best {
                        best = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            break;
        };
        if gmax + gmax2 < KKT_TOLERANCE {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > cost {
                    alpha[i] = cost;
                    alpha[j] = cost - diff;
                }
            } else if alpha[j] > cost {
                alpha[j] = cost;
                alpha[i] = cost + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > cost {
                if alpha[i] > cost {
                    alpha[i] = cost;
                    alpha[j] = sum - cost;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cost {
                if alpha[j] > cost {
                    alpha[j] = cost;
                    alpha[i] = sum - cost;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    Ok(DualSolution {
        rho: offset(&alpha, &y, &grad, cost),
        alpha,
        labels: y,
        iterations,
    })
}

fn offset(alpha: &[f64], y: &[f64], grad: &[f64], cost: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= cost {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum_free += yg;
            n_free += 1;
        }
    }
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Trained classifier. Decision value `sum c_i K(sv_i, x) + bias`, yes = positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<[f64; 2]>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub kernel_variance: f64,
    pub cost: f64,
    /// `1 / |w|` in kernel feature space.
    pub geometric_margin: f64,
}

impl SvmModel {
    pub fn train(points: &[[f64; 2]], labels: &[Answer]) -> Result<Self> {
        let dual = solve_dual(points, labels, KERNEL_VARIANCE, COST)?;
        Ok(Self::from_dual(points, &dual, KERNEL_VARIANCE, COST))
    }

    pub fn from_dual(points: &[[f64; 2]], dual: &DualSolution, variance: f64, cost: f64) -> Self {
        let mut support_vectors = Vec::new();
        let mut dual_coef = Vec::new();
        for (i, p) in points.iter().enumerate() {
            if dual.alpha[i] > 0.0 {
                support_vectors.push(*p);
                dual_coef.push(dual.alpha[i] * dual.labels[i]);
            }
        }
        let mut w2 = 0.0;
        for (a, u) in dual_coef.iter().zip(&support_vectors) {
            for (b, v) in dual_coef.iter().zip(&support_vectors) {
                w2 += a * b * gaussian_kernel(u, v, variance);
            }
        }
        // Conflicting duplicates can cancel |w| entirely.
        let geometric_margin = 1.0 / w2.max(f64::MIN_POSITIVE).sqrt();
        SvmModel {
            support_vectors,
            dual_coef,
            bias: -dual.rho,
            kernel_variance: variance,
            cost,
            geometric_margin,
        }
    }

    pub fn decision_value(&self, x: &[f64; 2]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * gaussian_kernel(sv, x, self.kernel_variance))
            .sum::<f64>()
            + self.bias
    }

    /// Sign of the decision value; exactly zero counts as no.
    pub fn classify(&self, x: &[f64; 2]) -> (Answer, f64) {
        let value = self.decision_value(x);
        let answer = if value > 0.0 { Answer::Yes } else { Answer::No };
        (answer, value)
    }

    pub fn accuracy(&self, points: &[[f64; 2]], labels: &[Answer]) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        let correct = points
            .iter()
            .zip(labels)
            .filter(|(p, l)| self.classify(p).0 == **l)
            .count();
        correct as f64 / points.len() as f64
    }
}
