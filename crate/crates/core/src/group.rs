//! The affine group, its three-parameter extensions, and their action on signals.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::deriv::{self, Derivative};
use crate::error::{domain, Result};
use crate::grid::{dilate_sample_reported, GeometricGrid, Signal, Truncation};
use crate::interp::Interpolation;

/// Affine transformation `t -> e^u t + b`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineElement {
    pub u: f64,
    pub b: f64,
}

impl AffineElement {
    pub fn new(u: f64, b: f64) -> Self {
        AffineElement { u, b }
    }

    pub fn identity() -> Self {
        AffineElement::default()
    }

    pub fn compose(&self, other: &AffineElement) -> AffineElement {
        AffineElement { u: self.u + other.u, b: self.b + self.u.exp() * other.b }
    }

    pub fn inverse(&self) -> AffineElement {
        AffineElement { u: -self.u, b: -(-self.u).exp() * self.b }
    }

    /// The dilation subgroup fixing time `xi`.
    pub fn about(xi: f64, u: f64) -> AffineElement {
        AffineElement { u, b: xi * (1.0 - u.exp()) }
    }
}

/// Element `(u, b, c)` of the three-parameter group with family parameter `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedElement {
    pub u: f64,
    pub b: f64,
    pub c: f64,
    pub k: f64,
}

impl ExtendedElement {
    pub fn new(u: f64, b: f64, c: f64, k: f64) -> Self {
        ExtendedElement { u, b, c, k }
    }

    pub fn compose(&self, other: &ExtendedElement) -> ExtendedElement {
        ExtendedElement {
            u: self.u + other.u,
            b: self.b + self.u.exp() * other.b,
            c: self.c + (self.k * self.u).exp() * other.c,
            k: self.k,
        }
    }

    /// Phase `z` with `U(g) U(g') = z U(g g')`.
    ///
    /// For `k = 0` the factor `f^{-2i pi c}` does not commute with dilations,
    /// so the representation is projective with `z = e^{-2i pi c' u}`; for
    /// `k != 0` it is a true representation.
    pub fn composition_phase(&self, other: &ExtendedElement) -> Complex64 {
        if self.k == 0.0 {
            Complex64::from_polar(1.0, -2.0 * PI * other.c * self.u)
        } else {
            Complex64::new(1.0, 0.0)
        }
    }

    pub fn affine(&self) -> AffineElement {
        AffineElement { u: self.u, b: self.b }
    }
}

/// Labels of a coadjoint orbit: the hyperbola `(t - xi) f - k eta f^k = beta`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OrbitParams {
    pub xi: f64,
    pub beta: f64,
    pub eta: f64,
}

/// `e^{(r+1)u} e^{-2i pi f b} S(e^u f)`.
pub fn apply_u(g: &AffineElement, s: &Signal) -> Signal {
    apply_u_reported(g, s, Interpolation::Cubic).0
}

pub fn apply_u_reported(
    g: &AffineElement,
    s: &Signal,
    scheme: Interpolation,
) -> (Signal, Truncation) {
    let grid = s.grid;
    let (mut out, tr) = dilate_sample_reported(s, g.u, scheme);
    let scale = ((grid.r() + 1.0) * g.u).exp();
    for (i, z) in out.values.iter_mut().enumerate() {
        *z *= Complex64::from_polar(scale, -2.0 * PI * grid.freq(i) * g.b);
    }
    (out, tr)
}

/// Extended representation: `U(u, b) S` further multiplied by `f^{-2i pi c}` (k = 0)
/// or `e^{-2i pi c f^k}` (k != 0).
pub fn apply_u_ext(g: &ExtendedElement, s: &Signal) -> Signal {
    apply_u_ext_reported(g, s, Interpolation::Cubic).0
}

pub fn apply_u_ext_reported(
    g: &ExtendedElement,
    s: &Signal,
    scheme: Interpolation,
) -> (Signal, Truncation) {
    let (mut out, tr) = apply_u_reported(&g.affine(), s, scheme);
    if g.c != 0.0 {
        for (i, z) in out.values.iter_mut().enumerate() {
            let f = s.grid.freq(i);
            let arg = if g.k == 0.0 { g.c * f.ln() } else { g.c * f.powf(g.k) };
            *z *= Complex64::from_polar(1.0, -2.0 * PI * arg);
        }
    }
    (out, tr)
}

/// `-(1/2i pi)(r + 1 + f d/df) S`.
pub fn generator_beta(s: &Signal) -> Signal {
    generator_beta_with(s, Derivative::Stencil)
}

pub fn generator_beta_with(s: &Signal, scheme: Derivative) -> Signal {
    let grid = s.grid;
    let a = grid.r() + 1.0;
    let phi: Vec<Complex64> =
        s.values.iter().enumerate().map(|(i, z)| z * grid.freq(i).powf(a)).collect();
    let d = deriv::differentiate(&phi, grid.log_step(), scheme);
    let c = -1.0 / Complex64::new(0.0, 2.0 * PI);
    let values = d
        .into_iter()
        .enumerate()
        .map(|(i, z)| z * grid.freq(i).powf(-a) * c)
        .collect();
    Signal { grid, values }
}

/// Multiplication by `f`.
pub fn generator_f(s: &Signal) -> Signal {
    let grid = s.grid;
    Signal {
        grid,
        values: s.values.iter().enumerate().map(|(i, z)| z * grid.freq(i)).collect(),
    }
}

/// Matrix of `beta-hat` acting on sample vectors (no quadrature weights).
pub fn beta_matrix(grid: &GeometricGrid, scheme: Derivative) -> DMatrix<Complex64> {
    let n = grid.len();
    let a = grid.r() + 1.0;
    let d = deriv::derivative_matrix(n, grid.log_step(), scheme);
    let c = -1.0 / Complex64::new(0.0, 2.0 * PI);
    let m: Vec<f64> = (0..n).map(|i| grid.freq(i).powf(a)).collect();
    DMatrix::from_fn(n, n, |i, j| c * (d[(i, j)] * m[j] / m[i]))
}

/// Diagonal matrix of `f`.
pub fn f_matrix(grid: &GeometricGrid) -> DMatrix<Complex64> {
    diagonal(grid, |f| f)
}

/// Diagonal matrix of `ln f`.
pub fn log_f_matrix(grid: &GeometricGrid) -> DMatrix<Complex64> {
    diagonal(grid, f64::ln)
}

fn diagonal(grid: &GeometricGrid, g: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
    let d: Vec<Complex64> = grid.freqs().into_iter().map(|f| Complex64::new(g(f), 0.0)).collect();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
}

/// Improper eigenvector `f^{-2i pi beta - r - 1} e^{-2i pi xi f}` (unit constant).
pub fn psi_basis(xi: f64, beta: f64, grid: &GeometricGrid) -> Signal {
    let a = grid.r() + 1.0;
    Signal::from_fn(*grid, |f| {
        Complex64::from_polar(f.powf(-a), -2.0 * PI * (beta * f.ln() + xi * f))
    })
}

/// `f^{-r-1} e^{-2i pi f t0}`.
pub fn localized_signal(t0: f64, grid: &GeometricGrid) -> Signal {
    psi_basis(t0, 0.0, grid)
}

/// `(e^u t + b, e^{-u} f)`.
pub fn coadjoint_action(g: &AffineElement, t: f64, f: f64) -> Result<(f64, f64)> {
    if f.is_nan() || f <= 0.0 {
        return domain(format!("frequency must be positive, got {f}"));
    }
    Ok((g.u.exp() * t + g.b, (-g.u).exp() * f))
}
