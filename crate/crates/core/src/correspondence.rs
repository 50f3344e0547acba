//! Operator kernels and the correspondence between kernels and phase-space symbols.
//!
//! Everything here works with the reduced kernel `R(f1, f2) = A(f1, f2) (f1 f2)^{r+1}`.
//! In the variables `v = ln(f1/f2)` and `f = (f1 - f2)/v` the symbol is the
//! Fourier transform of `R` in `v`:
//!
//! ```text
//! A(t, f) = \int e^{2i pi v f t} R(f lambda(v), f lambda(-v)) dv
//! ```
//!
//! On a geometric grid `v = (i - j) h` is exact, so the integral is a sum over
//! the diagonals of the matrix and each diagonal is interpolated (cubic in
//! `log f`) at the position of `f lambda(-v)`.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{domain, CalculusError, Result};
use crate::grid::{BetaGrid, BetaSymbol, GeometricGrid, PhaseSymbol, Signal, TimeGrid, Truncation};
use crate::interp;

/// Complex kernel on a geometric grid, acting by `[A S]_i = sum_j A_ij S_j w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorKernel {
    pub grid: GeometricGrid,
    pub entries: DMatrix<Complex64>,
}

impl OperatorKernel {
    pub fn new(grid: GeometricGrid, entries: DMatrix<Complex64>) -> Result<Self> {
        let n = grid.len();
        if entries.nrows() != n || entries.ncols() != n {
            return domain(format!(
                "kernel is {}x{} for a grid of {n}",
                entries.nrows(),
                entries.ncols()
            ));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("kernel contains non-finite entries");
        }
        Ok(OperatorKernel { grid, entries })
    }

    pub fn zeros(grid: GeometricGrid) -> Self {
        let n = grid.len();
        OperatorKernel { grid, entries: DMatrix::zeros(n, n) }
    }

    pub fn from_fn(grid: GeometricGrid, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let n = grid.len();
        OperatorKernel { grid, entries: DMatrix::from_fn(n, n, f) }
    }

    /// Discrete identity `delta_ij / w_i`.
    pub fn identity(grid: GeometricGrid) -> Self {
        let w = grid.weights();
        OperatorKernel::from_fn(grid, |i, j| {
            if i == j {
                Complex64::new(1.0 / w[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Kernel of multiplication by `g(f)`.
    pub fn multiplier(grid: GeometricGrid, g: impl Fn(f64) -> Complex64) -> Self {
        let w = grid.weights();
        let fs = grid.freqs();
        OperatorKernel::from_fn(grid, |i, j| {
            if i == j {
                g(fs[i]) / w[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Kernel of the operator whose action on sample vectors is the matrix `m`.
    pub fn from_action(grid: GeometricGrid, m: &DMatrix<Complex64>) -> Self {
        let w = grid.weights();
        OperatorKernel::from_fn(grid, |i, j| m[(i, j)] / w[j])
    }

    /// Matrix acting on sample vectors: `A_ij w_j`.
    pub fn action_matrix(&self) -> DMatrix<Complex64> {
        let w = self.grid.weights();
        DMatrix::from_fn(self.grid.len(), self.grid.len(), |i, j| self.entries[(i, j)] * w[j])
    }

    /// `R_ij = A_ij (f_i f_j)^{r+1}`.
    pub fn reduced(&self) -> DMatrix<Complex64> {
        let m = reduction_factors(&self.grid);
        DMatrix::from_fn(self.grid.len(), self.grid.len(), |i, j| {
            self.entries[(i, j)] * (m[i] * m[j])
        })
    }

    pub fn from_reduced(grid: GeometricGrid, r: &DMatrix<Complex64>) -> Self {
        let m = reduction_factors(&grid);
        OperatorKernel::from_fn(grid, |i, j| r[(i, j)] / (m[i] * m[j]))
    }

    pub fn apply(&self, s: &Signal) -> Result<Signal> {
        self.grid.check_same(&s.grid)?;
        let w = self.grid.weights();
        let v = DVector::from_iterator(s.len(), s.values.iter().zip(&w).map(|(z, w)| z * *w));
        let out = &self.entries * v;
        Ok(Signal { grid: self.grid, values: out.iter().copied().collect() })
    }

    /// Kernel of the product `A B`: `sum_k A_ik B_kj w_k`.
    pub fn compose(&self, other: &OperatorKernel) -> Result<OperatorKernel> {
        self.grid.check_same(&other.grid)?;
        Ok(OperatorKernel { grid: self.grid, entries: self.action_matrix() * &other.entries })
    }

    pub fn adjoint(&self) -> OperatorKernel {
        OperatorKernel { grid: self.grid, entries: self.entries.adjoint() }
    }

    pub fn add(&self, other: &OperatorKernel) -> Result<OperatorKernel> {
        self.grid.check_same(&other.grid)?;
        Ok(OperatorKernel { grid: self.grid, entries: &self.entries + &other.entries })
    }

    pub fn scale(&self, c: Complex64) -> OperatorKernel {
        OperatorKernel { grid: self.grid, entries: self.entries.map(|z| z * c) }
    }

    /// `W A W` for a real window `W` given by its samples.
    pub fn compress(&self, window: &[f64]) -> OperatorKernel {
        OperatorKernel::from_fn(self.grid, |i, j| self.entries[(i, j)] * (window[i] * window[j]))
    }

    /// Largest `|A_ij - conj(A_ji)|` relative to the largest `|A_ij|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let n = self.grid.len();
        let mut scale = 0.0f64;
        let mut d = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                scale = scale.max(self.entries[(i, j)].norm());
                d = d.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        if scale > 0.0 {
            d / scale
        } else {
            d
        }
    }

    /// Hilbert-Schmidt norm `sqrt(Tr(A A^dagger))`.
    pub fn hs_norm(&self) -> f64 {
        trace_product(self, self).map(|z| z.re.sqrt()).unwrap_or(0.0)
    }
}

pub(crate) fn reduction_factors(grid: &GeometricGrid) -> Vec<f64> {
    let a = grid.r() + 1.0;
    grid.freqs().into_iter().map(|f| f.powf(a)).collect()
}

pub fn apply_kernel(a: &OperatorKernel, s: &Signal) -> Result<Signal> {
    a.apply(s)
}

/// `sum_ij A_ij conj(B_ij) w_i w_j`.
pub fn trace_product(a: &OperatorKernel, b: &OperatorKernel) -> Result<Complex64> {
    a.grid.check_same(&b.grid)?;
    let w = a.grid.weights();
    let n = a.grid.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            acc += a.entries[(i, j)] * b.entries[(i, j)].conj() * (w[i] * w[j]);
        }
    }
    Ok(acc)
}

/// `lambda(v) = v e^{v/2} / (2 sinh(v/2))`, with `lambda(0) = 1`.
pub fn lambda(v: f64) -> f64 {
    ln_lambda(v).exp()
}

/// `ln lambda(v)`; note `lambda(-v) = e^{-v} lambda(v)`.
pub fn ln_lambda(v: f64) -> f64 {
    v - ln_expm1_over(v)
}

// ln((e^v - 1)/v), accurate near zero
fn ln_expm1_over(v: f64) -> f64 {
    if v.abs() < 1e-6 {
        v / 2.0 + v * v / 24.0
    } else if v > 30.0 {
        v + (-(-v).exp()).ln_1p() - v.ln()
    } else {
        (v.exp_m1() / v).ln()
    }
}

/// `(f1 - f2) / ln(f1/f2)`, switching to a series about the geometric mean near the diagonal.
pub fn center_frequency(f1: f64, f2: f64) -> f64 {
    let x = (f1 / f2).ln();
    if x.abs() < 1e-4 {
        // geometric mean times (1 + x^2/24 + x^4/1920)
        let g = (f1 * f2).sqrt();
        g * (1.0 + x * x / 24.0 + x.powi(4) / 1920.0)
    } else {
        (f1 - f2) / x
    }
}

/// How the integration variable `u = ln(f1/f2)` maps to frequencies and phases.
///
/// `f1 = f L(u)`, `f2 = f L(-u) = f e^{-u} L(u)`; the phase is
/// `e^{2i pi u beta0} e^{2i pi (X - beta0) Lambda(u)}` with `X = t f` or `beta`.
pub(crate) trait PairingFamily: Sync {
    fn ln_l_minus(&self, u: f64) -> f64;
    fn big_lambda(&self, u: f64) -> f64;
    fn weight(&self, _u: f64) -> f64 {
        1.0
    }
    fn beta0(&self) -> f64 {
        0.0
    }
}

pub(crate) struct Affine;

impl PairingFamily for Affine {
    fn ln_l_minus(&self, u: f64) -> f64 {
        -ln_expm1_over(u)
    }
    fn big_lambda(&self, u: f64) -> f64 {
        u
    }
}

/// Output coordinate of the diagonal transform.
#[derive(Debug, Clone, Copy)]
pub(crate) enum OutAxis {
    Time(TimeGrid),
    Beta(BetaGrid),
}

impl OutAxis {
    fn grid(&self) -> TimeGrid {
        match self {
            OutAxis::Time(g) | OutAxis::Beta(g) => *g,
        }
    }
}

/// Interpolate every diagonal of `reduced` at the frequencies paired with each
/// grid node. Returns `vals[n][k + N - 1]`.
pub(crate) fn diagonal_samples<P: PairingFamily>(
    grid: &GeometricGrid,
    family: &P,
    reduced: &(dyn Fn(usize, usize) -> Complex64 + Sync),
) -> Vec<Vec<Complex64>> {
    let nf = grid.len();
    let h = grid.log_step();
    let shifts: Vec<f64> = (0..2 * nf - 1)
        .map(|kk| family.ln_l_minus((kk as f64 - (nf - 1) as f64) * h) / h)
        .collect();
    (0..nf)
        .into_par_iter()
        .map(|n| {
            (0..2 * nf - 1)
                .map(|kk| {
                    let k = kk as i64 - (nf as i64 - 1);
                    // diagonal k holds R(s + k, s) for s in [s_lo, s_lo + len)
                    let s_lo = (-k).max(0) as usize;
                    let len = nf - k.unsigned_abs() as usize;
                    let pos = n as f64 + shifts[kk] - s_lo as f64;
                    match interp::stencil(pos, len) {
                        Some(st) => st
                            .iter()
                            .map(|(q, w)| {
                                let s = s_lo + q;
                                reduced((s as i64 + k) as usize, s) * w
                            })
                            .sum(),
                        None => Complex64::new(0.0, 0.0),
                    }
                })
                .collect()
        })
        .collect()
}

/// Fourier sum over diagonals: `sum_k h w(u_k) R_k(f) e^{2i pi (u_k beta0 + (X - beta0) Lambda(u_k))}`.
pub(crate) fn diagonal_transform<P: PairingFamily>(
    grid: &GeometricGrid,
    axis: OutAxis,
    family: &P,
    samples: &[Vec<Complex64>],
) -> Array2<Complex64> {
    let nf = grid.len();
    let h = grid.log_step();
    let ag = axis.grid();
    let nx = ag.len();
    let beta0 = family.beta0();
    let us: Vec<f64> = (0..2 * nf - 1).map(|kk| (kk as f64 - (nf - 1) as f64) * h).collect();
    let lam: Vec<f64> = us.iter().map(|u| family.big_lambda(*u)).collect();
    let wts: Vec<f64> = us.iter().map(|u| h * family.weight(*u)).collect();
    let cols: Vec<Vec<Complex64>> = (0..nf)
        .into_par_iter()
        .map(|n| {
            let f = grid.freq(n);
            let (x0, dx) = match axis {
                OutAxis::Time(g) => (f * g.t_min(), f * g.step()),
                OutAxis::Beta(g) => (g.t_min(), g.step()),
            };
            let mut col = vec![Complex64::new(0.0, 0.0); nx];
            for kk in 0..2 * nf - 1 {
                let r = samples[n][kk];
                if r.re == 0.0 && r.im == 0.0 {
                    continue;
                }
                let amp = r * wts[kk];
                let mut z = Complex64::from_polar(
                    1.0,
                    2.0 * PI * (us[kk] * beta0 + (x0 - beta0) * lam[kk]),
                );
                let step = Complex64::from_polar(1.0, 2.0 * PI * dx * lam[kk]);
                for c in col.iter_mut() {
                    *c += amp * z;
                    z *= step;
                }
            }
            col
        })
        .collect();
    Array2::from_shape_fn((nx, nf), |(m, n)| cols[n][m])
}

fn v_truncation(grid: &GeometricGrid, samples: &[Vec<Complex64>], reduced: &DMatrix<Complex64>) -> f64 {
    let c = grid.log_coefficients();
    let h = grid.log_step();
    let n = grid.len();
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            total += reduced[(i, j)].norm_sqr() * c[i] * c[j];
        }
    }
    let kept: f64 = samples
        .iter()
        .zip(&c)
        .map(|(row, cn)| cn * h * row.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    if total > 0.0 {
        (1.0 - kept / total).max(0.0)
    } else {
        0.0
    }
}

/// Symbol of a kernel on the `(t, f)` rectangle.
pub fn wigner_map(a: &OperatorKernel, tgrid: TimeGrid) -> PhaseSymbol {
    wigner_map_reported(a, tgrid).0
}

/// [`wigner_map`] with the fraction of `Tr(A A^dagger)` the `v`-sum could not reach.
pub fn wigner_map_reported(a: &OperatorKernel, tgrid: TimeGrid) -> (PhaseSymbol, Truncation) {
    let r = a.reduced();
    let samples = diagonal_samples(&a.grid, &Affine, &|i, j| r[(i, j)]);
    let values = diagonal_transform(&a.grid, OutAxis::Time(tgrid), &Affine, &samples);
    let tr = Truncation { dropped_points: 0, mass_fraction: v_truncation(&a.grid, &samples, &r) };
    (PhaseSymbol { tgrid, fgrid: a.grid, values }, tr)
}

/// Symbol of a kernel in the `(beta, f)` coordinates; no resampling in `t` is involved.
pub fn wigner_map_beta(a: &OperatorKernel, bgrid: BetaGrid) -> BetaSymbol {
    let r = a.reduced();
    let samples = diagonal_samples(&a.grid, &Affine, &|i, j| r[(i, j)]);
    let values = diagonal_transform(&a.grid, OutAxis::Beta(bgrid), &Affine, &samples);
    BetaSymbol { bgrid, fgrid: a.grid, values }
}

/// Kernel of a symbol given on the `(t, f)` rectangle.
///
/// `R(f1, f2) = m \int e^{-2i pi (f1 - f2) t} A(t, m) dt` with `m = (f1 - f2)/ln(f1/f2)`;
/// the `t` integral is a trapezoid sum and `A(t, m)` is cubic in `log f`.
pub fn weyl_map(sym: &PhaseSymbol) -> OperatorKernel {
    weyl_map_reported(sym).0
}

/// [`weyl_map`] plus the share of the symbol's squared modulus sitting on the first and last time rows,
/// an indicator that the `t` range is too short.
///
/// Entries with `|f1 - f2| dt > 1/2` are set to zero: the sampled symbol carries no
/// information at those rates, and the trapezoid sum would return an alias.
pub fn weyl_map_reported(sym: &PhaseSymbol) -> (OperatorKernel, Truncation) {
    let grid = sym.fgrid;
    let nf = grid.len();
    let h = grid.log_step();
    let tg = sym.tgrid;
    let wt = tg.weights();
    let fs = grid.freqs();
    let rows: Vec<Vec<Complex64>> = (0..nf)
        .into_par_iter()
        .map(|i| {
            (0..nf)
                .map(|j| {
                    let k = i as f64 - j as f64;
                    let m = if i == j { fs[i] } else { (fs[i] - fs[j]) / (k * h) };
                    let omega = fs[i] - fs[j];
                    // beyond the Nyquist rate of the t samples the integral only sees aliases
                    if omega.abs() * tg.step() > 0.5 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let pos = grid.position(m);
                    let Some(st) = interp::stencil(pos, nf) else {
                        return Complex64::new(0.0, 0.0);
                    };
                    let step = Complex64::from_polar(1.0, -2.0 * PI * omega * tg.step());
                    let z0 = Complex64::from_polar(1.0, -2.0 * PI * omega * tg.t_min());
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (node, w) in st.iter() {
                        let mut z = z0;
                        let mut s = Complex64::new(0.0, 0.0);
                        for (mm, wtm) in wt.iter().enumerate() {
                            s += sym.values[[mm, node]] * z * *wtm;
                            z *= step;
                        }
                        acc += s * w;
                    }
                    acc * m
                })
                .collect()
        })
        .collect();
    let red = DMatrix::from_fn(nf, nf, |i, j| rows[i][j]);
    let edge: f64 = (0..nf)
        .map(|n| sym.values[[0, n]].norm_sqr() + sym.values[[tg.len() - 1, n]].norm_sqr())
        .sum();
    let all: f64 = sym.values.iter().map(|z| z.norm_sqr()).sum();
    let frac = if all > 0.0 { edge / all } else { 0.0 };
    (
        OperatorKernel::from_reduced(grid, &red),
        Truncation { dropped_points: 0, mass_fraction: frac },
    )
}

/// Kernel of a `(beta, f)` symbol: `R_k(f) = \int e^{-2i pi k h beta} A(beta, f) dbeta` at the centre frequency.
pub fn weyl_map_beta(sym: &BetaSymbol) -> OperatorKernel {
    let grid = sym.fgrid;
    let nf = grid.len();
    let h = grid.log_step();
    let bg = sym.bgrid;
    let wb = bg.weights();
    // table[n][k + nf - 1]
    let table: Vec<Vec<Complex64>> = (0..nf)
        .into_par_iter()
        .map(|n| {
            (0..2 * nf - 1)
                .map(|kk| {
                    let v = (kk as f64 - (nf - 1) as f64) * h;
                    if v.abs() * bg.step() > 0.5 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let step = Complex64::from_polar(1.0, -2.0 * PI * v * bg.step());
                    let mut z = Complex64::from_polar(1.0, -2.0 * PI * v * bg.t_min());
                    let mut s = Complex64::new(0.0, 0.0);
                    for (p, w) in wb.iter().enumerate() {
                        s += sym.values[[p, n]] * z * *w;
                        z *= step;
                    }
                    s
                })
                .collect()
        })
        .collect();
    let red = DMatrix::from_fn(nf, nf, |i, j| {
        let k = i as i64 - j as i64;
        let kk = (k + nf as i64 - 1) as usize;
        // centre sits at ln f2 - ln lambda(-v)
        let pos = j as f64 - Affine.ln_l_minus(k as f64 * h) / h;
        match interp::stencil(pos, nf) {
            Some(st) => st.iter().map(|(node, w)| table[node][kk] * w).sum(),
            None => Complex64::new(0.0, 0.0),
        }
    });
    OperatorKernel::from_reduced(grid, &red)
}

/// `(psi, A psi)` with `psi` the windowed improper eigenvector of label `(xi, beta)`.
pub fn diag_elements_ih(a: &OperatorKernel, xi: f64, beta: f64, window: &[f64]) -> Result<Complex64> {
    if window.len() != a.grid.len() {
        return Err(CalculusError::GridMismatch("window length".into()));
    }
    let psi = crate::group::psi_basis(xi, beta, &a.grid).window(window);
    let apsi = a.apply(&psi)?;
    crate::grid::inner_product(&apsi, &psi)
}

/// `\int A(xi + beta/f, f) df / f`, with `t` interpolated and zero outside the time grid.
pub fn radon_igamma(sym: &PhaseSymbol, xi: f64, beta: f64) -> Complex64 {
    let c = sym.fgrid.log_coefficients();
    (0..sym.fgrid.len())
        .map(|n| {
            let f = sym.fgrid.freq(n);
            let col = sym.values.column(n);
            let pos = sym.tgrid.position(xi + beta / f);
            match interp::stencil(pos, sym.tgrid.len()) {
                Some(st) => st.iter().map(|(m, w)| col[m] * w).sum::<Complex64>() * c[n],
                None => Complex64::new(0.0, 0.0),
            }
        })
        .sum()
}

/// Parameters of the log-Gaussian test objects used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGaussian {
    pub f0: f64,
    pub sigma_log: f64,
    pub t0: f64,
    pub sigma_t: f64,
}

impl LogGaussian {
    /// `exp(-(t - t0)^2 / (2 sigma_t^2) - ln^2(f/f0) / (2 sigma_log^2))`.
    pub fn symbol(&self, t: f64, f: f64) -> f64 {
        let x = (f / self.f0).ln() / self.sigma_log;
        let y = (t - self.t0) / self.sigma_t;
        (-0.5 * (x * x + y * y)).exp()
    }

    pub fn phase_symbol(&self, tgrid: TimeGrid, fgrid: GeometricGrid) -> PhaseSymbol {
        PhaseSymbol::from_fn(tgrid, fgrid, |t, f| Complex64::new(self.symbol(t, f), 0.0))
    }

    /// Signal `f^{-r-1} exp(-ln^2(f/f0)/(2 sigma_log^2)) e^{-2i pi f t0}`.
    pub fn signal(&self, grid: GeometricGrid) -> Signal {
        let a = grid.r() + 1.0;
        Signal::from_fn(grid, |f| {
            let x = (f / self.f0).ln() / self.sigma_log;
            Complex64::from_polar(f.powf(-a) * (-0.5 * x * x).exp(), -2.0 * PI * f * self.t0)
        })
    }
}
