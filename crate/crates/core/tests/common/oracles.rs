//! Independent reference computations used by the integration tests.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use wordcomm_core::decision::{gaussian_kernel, KERNEL_VARIANCE};
use wordcomm_core::hemodynamics::SAMPLE_RATE_HZ;
use wordcomm_core::Answer;

pub fn tone(freq: f64, amp: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / SAMPLE_RATE_HZ).sin())
        .collect()
}

/// Cycles over the segment from the mean spacing of linearly interpolated
/// zero crossings, scaled to the segment duration.
pub fn zero_crossing_cycles(seg: &[f64]) -> f64 {
    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
    let x: Vec<f64> = seg.iter().map(|v| v - mean).collect();
    let times: Vec<f64> = x
        .windows(2)
        .enumerate()
        .filter(|(_, w)| (w[0] < 0.0) != (w[1] < 0.0))
        .map(|(k, w)| k as f64 + w[0] / (w[0] - w[1]))
        .collect();
    if times.len() < 2 {
        return times.len() as f64 / 2.0;
    }
    let half_period = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    seg.len() as f64 / (2.0 * half_period)
}

/// `P(theta > 1/2)` for a Beta(s+1, f+1) posterior by composite Simpson.
pub fn beta_tail_by_quadrature(s: u64, f: u64) -> f64 {
    let density = |x: f64| x.powi(s as i32) * (1.0 - x).powi(f as i32);
    let simpson = |a: f64, b: f64| {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let mut acc = density(a) + density(b);
        for i in 1..n {
            acc += density(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    simpson(0.5, 1.0) / simpson(0.0, 1.0)
}

/// Lag in seconds maximising the cross-correlation of mean-removed `a`
/// against `b` (positive when `b` follows `a`).
pub fn xcorr_lag_s(a: &[f64], b: &[f64], max_lag: isize) -> f64 {
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let n = a.len() as isize;
    let mut best = (f64::NEG_INFINITY, 0isize);
    for lag in -max_lag..=max_lag {
        let mut acc = 0.0;
        for i in 0..n {
            let j = i + lag;
            if (0..n).contains(&j) {
                acc += (a[i as usize] - ma) * (b[j as usize] - mb);
            }
        }
        if acc > best.0 {
            best = (acc, lag);
        }
    }
    best.1 as f64 / SAMPLE_RATE_HZ
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            out[idx[k]] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
}

impl QpSolution {
    pub fn decision_value(&self, pts: &[[f64; 2]], labels: &[Answer], x: &[f64; 2]) -> f64 {
        pts.iter()
            .zip(labels)
            .zip(&self.alpha)
            .map(|((p, l), a)| a * l.label() * gaussian_kernel(p, x, KERNEL_VARIANCE))
            .sum::<f64>()
            + self.bias
    }
}

/// Soft-margin dual optimum by enumerating active sets: every alpha sits
/// at 0, at C, or is free, and the free ones solve the KKT system.
pub fn qp_oracle(pts: &[[f64; 2]], labels: &[Answer], c: f64) -> Option<QpSolution> {
    let n = pts.len();
    let y: Vec<f64> = labels.iter().map(|l| l.label()).collect();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * gaussian_kernel(&pts[i], &pts[j], KERNEL_VARIANCE));
    let tol = 1e-7 * c;
    let mut best: Option<(f64, QpSolution)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut rest = code;
        for s in state.iter_mut() {
            *s = (rest % 3) as u8;
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        if free.is_empty() {
            continue;
        }
        let mut alpha = DVector::from_fn(n, |i, _| if state[i] == 1 { c } else { 0.0 });
        let m = free.len();
        let mut a = DMatrix::zeros(m + 1, m + 1);
        let mut rhs = DVector::zeros(m + 1);
        for (r, &i) in free.iter().enumerate() {
            for (s, &j) in free.iter().enumerate() {
                a[(r, s)] = q[(i, j)];
            }
            a[(r, m)] = y[i];
            a[(m, r)] = y[i];
            let bound: f64 = (0..n).filter(|&j| state[j] == 1).map(|j| q[(i, j)] * c).sum();
            rhs[r] = 1.0 - bound;
        }
        rhs[m] = -(0..n).filter(|&j| state[j] == 1).map(|j| y[j] * c).sum::<f64>();
        let Some(sol) = a.lu().solve(&rhs) else { continue };
        if sol.iter().any(|v| !v.is_finite()) {
            continue;
        }
        for (r, &i) in free.iter().enumerate() {
            alpha[i] = sol[r];
        }
        let nu = sol[m];
        if free.iter().any(|&i| alpha[i] < -tol || alpha[i] > c + tol) {
            continue;
        }
        let g = &q * &alpha - DVector::from_element(n, 1.0) + DVector::from_fn(n, |i, _| nu * y[i]);
        let kkt = (0..n).all(|i| match state[i] {
            0 => g[i] >= -1e-6,
            1 => g[i] <= 1e-6,
            _ => true,
        });
        if !kkt {
            continue;
        }
        let obj = 0.5 * alpha.dot(&(&q * &alpha)) - alpha.sum();
        if best.as_ref().map_or(true, |(o, _)| obj < *o - 1e-12) {
            best = Some((
                obj,
                QpSolution {
                    alpha: alpha.iter().copied().collect(),
                    bias: nu,
                },
            ));
        }
    }
    best.map(|(_, s)| s)
}
