//! Derivatives of uniformly sampled sequences.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// How a derivative along a uniform axis is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Derivative {
    /// Fourth-order centered differences, one-sided near the ends.
    #[default]
    Stencil,
    /// Trigonometric differentiation on a zero-padded periodic copy.
    Spectral,
}

const CENTERED: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];

// rows: node 0, node 1 (and mirrored for the last two), offsets 0..4
const ONE_SIDED: [[f64; 5]; 2] = [
    [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -1.0 / 4.0],
    [-1.0 / 4.0, -5.0 / 6.0, 3.0 / 2.0, -1.0 / 2.0, 1.0 / 12.0],
];

/// Row `i` of the fourth-order difference matrix: `(start, coefficients)` in units of `1/h`.
fn stencil_row(i: usize, n: usize) -> (usize, [f64; 5]) {
    if i >= 2 && i + 2 < n {
        (i - 2, CENTERED)
    } else if i < 2 {
        (0, ONE_SIDED[i])
    } else {
        let mirror = n - 1 - i;
        let mut c = ONE_SIDED[mirror];
        c.reverse();
        for x in c.iter_mut() {
            *x = -*x;
        }
        (n - 5, c)
    }
}

/// Derivative of a sequence sampled with spacing `h`.
pub fn differentiate(values: &[Complex64], h: f64, scheme: Derivative) -> Vec<Complex64> {
    match scheme {
        Derivative::Stencil => stencil_derivative(values, h),
        Derivative::Spectral => spectral_derivative(values, h),
    }
}

fn stencil_derivative(values: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = values.len();
    if n < 5 {
        return low_order(values, h);
    }
    (0..n)
        .map(|i| {
            let (s, c) = stencil_row(i, n);
            c.iter().enumerate().map(|(k, w)| values[s + k] * *w).sum::<Complex64>() / h
        })
        .collect()
}

fn low_order(values: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = values.len();
    if n < 2 {
        return vec![Complex64::new(0.0, 0.0); n];
    }
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (values[b] - values[a]) / (h * (b - a) as f64)
        })
        .collect()
}

fn padded_len(n: usize) -> usize {
    (2 * n).next_power_of_two()
}

fn spectral_derivative(values: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = values.len();
    if n < 2 {
        return vec![Complex64::new(0.0, 0.0); n];
    }
    let m = padded_len(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[..n].copy_from_slice(values);
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let kk = if 2 * k < m {
            k as f64
        } else if 2 * k == m {
            0.0
        } else {
            k as f64 - m as f64
        };
        *z *= Complex64::new(0.0, 2.0 * PI * kk / (m as f64 * h)) / m as f64;
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf.truncate(n);
    buf
}

/// Dense `n x n` differentiation matrix with spacing `h`.
///
/// The spectral variant is the compression to the first `n` nodes of the
/// periodic trigonometric derivative on the padded length used by
/// [`differentiate`], so both agree on vectors.
pub fn derivative_matrix(n: usize, h: f64, scheme: Derivative) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    match scheme {
        Derivative::Stencil if n >= 5 => {
            for i in 0..n {
                let (s, c) = stencil_row(i, n);
                for (k, w) in c.iter().enumerate() {
                    d[(i, s + k)] = w / h;
                }
            }
        }
        Derivative::Stencil => {
            for i in 0..n.max(1) - 1 {
                d[(i, i)] -= 1.0 / h;
                d[(i, i + 1)] += 1.0 / h;
            }
            if n >= 2 {
                d[(n - 1, n - 2)] = -1.0 / h;
                d[(n - 1, n - 1)] = 1.0 / h;
            }
        }
        Derivative::Spectral => {
            let m = padded_len(n) as f64;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let k = i as f64 - j as f64;
                        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        d[(i, j)] = 0.5 * sign / (PI * k / m).tan() * (2.0 * PI / m) / h;
                    }
                }
            }
        }
    }
    d
}
