//! Interpolation on uniformly indexed sequences.
//!
//! Every off-grid evaluation in the crate goes through [`stencil`]: a
//! four-point Lagrange (cubic) rule in the index coordinate, which on a
//! geometric frequency grid is cubic interpolation in `log f`. Positions
//! that land within [`SNAP`] of an integer collapse to a single node, so
//! shifts by whole grid steps are exact.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Distance to an integer below which a position is treated as on-node.
pub const SNAP: f64 = 1e-9;

/// Interpolation scheme for dilations of sampled signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Four-point Lagrange in log-frequency, linear fallback at the edges.
    #[default]
    Cubic,
    /// Band-limited (trigonometric) shift on a zero-padded copy.
    BandLimited,
}

/// Up to four nodes and their weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub start: usize,
    pub len: usize,
    pub weights: [f64; 4],
}

impl Stencil {
    fn single(i: usize) -> Self {
        Stencil { start: i, len: 1, weights: [1.0, 0.0, 0.0, 0.0] }
    }

    /// Iterate `(index, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len).map(move |k| (self.start + k, self.weights[k]))
    }

    /// Apply the stencil to a real or complex sequence.
    pub fn apply<T>(&self, values: &[T]) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let mut acc = values[self.start] * self.weights[0];
        for k in 1..self.len {
            acc = acc + values[self.start + k] * self.weights[k];
        }
        acc
    }
}

/// Interpolation stencil at fractional index `pos` for a sequence of length `n`.
///
/// Returns `None` outside `[0, n-1]`.
pub fn stencil(pos: f64, n: usize) -> Option<Stencil> {
    if n == 0 || !pos.is_finite() {
        return None;
    }
    let last = (n - 1) as f64;
    let nearest = pos.round();
    if (pos - nearest).abs() < SNAP && nearest >= 0.0 && nearest <= last {
        return Some(Stencil::single(nearest as usize));
    }
    if pos < 0.0 || pos > last {
        return None;
    }
    let i0 = pos.floor() as usize;
    let d = pos - i0 as f64;
    if i0 >= 1 && i0 + 2 < n {
        // Lagrange basis on nodes -1, 0, 1, 2 relative to i0
        let w = [
            -d * (d - 1.0) * (d - 2.0) / 6.0,
            (d + 1.0) * (d - 1.0) * (d - 2.0) / 2.0,
            -(d + 1.0) * d * (d - 2.0) / 2.0,
            (d + 1.0) * d * (d - 1.0) / 6.0,
        ];
        Some(Stencil { start: i0 - 1, len: 4, weights: w })
    } else if i0 + 1 < n {
        Some(Stencil { start: i0, len: 2, weights: [1.0 - d, d, 0.0, 0.0] })
    } else {
        Some(Stencil::single(i0))
    }
}

/// Evaluate a complex sequence at a fractional index, zero outside.
pub fn sample(values: &[Complex64], pos: f64) -> Complex64 {
    match stencil(pos, values.len()) {
        Some(s) => s.apply(values),
        None => Complex64::new(0.0, 0.0),
    }
}

/// Evaluate a real sequence at a fractional index, zero outside.
pub fn sample_real(values: &[f64], pos: f64) -> f64 {
    match stencil(pos, values.len()) {
        Some(s) => s.apply(values),
        None => 0.0,
    }
}

/// Shift a sequence by `shift` samples: `out[n] = values(n + shift)`.
///
/// The sequence is zero-padded to twice its length before the spectral
/// shift so the circular wrap does not fold mass back in. Output points
/// whose source lies outside the original range are zero.
pub fn bandlimited_shift(values: &[Complex64], shift: f64) -> Vec<Complex64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let nearest = shift.round();
    if (shift - nearest).abs() < SNAP {
        let s = nearest as i64;
        return (0..n as i64)
            .map(|i| {
                let j = i + s;
                if j >= 0 && (j as usize) < n {
                    values[j as usize]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
    }
    let m = (2 * n).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[..n].copy_from_slice(values);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    fwd.process(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        // signed wavenumber; the Nyquist bin gets the real part of the phase
        let kk = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
        let theta = 2.0 * std::f64::consts::PI * kk * shift / m as f64;
        let phase = if 2 * k == m {
            Complex64::new(theta.cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, theta)
        };
        *z *= phase / m as f64;
    }
    inv.process(&mut buf);
    (0..n)
        .map(|i| {
            let src = i as f64 + shift;
            if src < -SNAP || src > (n - 1) as f64 + SNAP {
                Complex64::new(0.0, 0.0)
            } else {
                buf[i]
            }
        })
        .collect()
}
