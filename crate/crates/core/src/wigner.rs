//! The affine Wigner distribution and the operators built around it.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::correspondence::{
    diagonal_samples, diagonal_transform, reduction_factors, Affine, OperatorKernel, OutAxis,
    PairingFamily,
};
use crate::deriv::Derivative;
use crate::error::{domain, CalculusError, Result};
use crate::grid::{BetaSymbol, GeometricGrid, PhaseSymbol, Signal, TimeGrid};
use crate::group;
use crate::interp;

/// Affine Wigner distribution of a signal, with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerDistribution {
    pub symbol: PhaseSymbol,
    pub report: WignerReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerReport {
    /// `||S||^2`.
    pub norm: f64,
    /// `|\int P dt df - ||S||^2| / ||S||^2`.
    pub marginal_error: f64,
    /// `max |Im P| / max |P|`.
    pub max_imag_residual: f64,
    /// Share of `||S||^4 = Tr(Pi Pi)` the `v`-sum could not reach.
    pub truncation_mass: f64,
}

/// `P(t, f) = \int e^{2i pi v f t} phi(f lambda(v)) conj(phi(f lambda(-v))) dv`, `phi = f^{r+1} S`.
pub fn affine_wigner(s: &Signal, tgrid: TimeGrid) -> WignerDistribution {
    let grid = s.grid;
    let m = reduction_factors(&grid);
    let phi: Vec<Complex64> = s.values.iter().zip(&m).map(|(z, m)| z * *m).collect();
    let samples = diagonal_samples(&grid, &Affine, &|i, j| phi[i] * phi[j].conj());
    let values = diagonal_transform(&grid, OutAxis::Time(tgrid), &Affine, &samples);
    let symbol = PhaseSymbol { tgrid, fgrid: grid, values };
    let norm = s.norm_sqr();
    let total = symbol.integral();
    let mx = symbol.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let im = symbol.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    // Tr(Pi Pi) = ||S||^4
    let c = grid.log_coefficients();
    let h = grid.log_step();
    let kept: f64 = samples
        .iter()
        .zip(&c)
        .map(|(row, cn)| cn * h * row.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    let report = WignerReport {
        norm,
        marginal_error: if norm > 0.0 { (total.re - norm).abs() / norm } else { total.norm() },
        max_imag_residual: if mx > 0.0 { im / mx } else { 0.0 },
        truncation_mass: if norm > 0.0 { (1.0 - kept / (norm * norm)).max(0.0) } else { 0.0 },
    };
    WignerDistribution { symbol, report }
}

/// Kernel `S(f1) conj(S(f2))`.
pub fn projector_kernel(s: &Signal) -> Result<OperatorKernel> {
    if s.values.iter().all(|z| z.norm() == 0.0) {
        return Err(CalculusError::ZeroSignal);
    }
    Ok(OperatorKernel::from_fn(s.grid, |i, j| s.values[i] * s.values[j].conj()))
}

/// Operator whose trace against a projector samples the Wigner distribution at `(t0, f0)`.
///
/// On the diagonal `k` of the reduced kernel the Dirac factor in the centre
/// frequency becomes the transposed interpolation stencil at the position of
/// `f0`, divided by the quadrature coefficients, so that
/// `Tr(Pi_S Delta^dagger)` reproduces `affine_wigner(S)` at `(t0, f0)` with the
/// same interpolation.
pub fn delta_operator_kernel(t0: f64, f0: f64, grid: &GeometricGrid) -> Result<OperatorKernel> {
    if !(f0 > grid.f_min() && f0 < grid.f_max()) {
        return domain(format!(
            "f0 = {f0} outside ({}, {})",
            grid.f_min(),
            grid.f_max()
        ));
    }
    let nf = grid.len();
    let h = grid.log_step();
    let c = grid.log_coefficients();
    let p0 = grid.position(f0);
    let mut red = DMatrix::zeros(nf, nf);
    for kk in 0..2 * nf - 1 {
        let k = kk as i64 - (nf as i64 - 1);
        let s_lo = (-k).max(0) as usize;
        let len = nf - k.unsigned_abs() as usize;
        let pos = p0 + Affine.ln_l_minus(k as f64 * h) / h - s_lo as f64;
        let Some(st) = interp::stencil(pos, len) else {
            continue;
        };
        let phase = Complex64::from_polar(1.0, -2.0 * PI * k as f64 * h * f0 * t0);
        for (q, w) in st.iter() {
            let s = s_lo + q;
            let i = (s as i64 + k) as usize;
            red[(i, s)] = phase * (w * h / (c[i] * c[s]));
        }
    }
    Ok(OperatorKernel::from_reduced(*grid, &red))
}

/// Kernel of `U(u0, (v0/u0)(e^{u0} - 1))`, the exponential of `-2i pi (u0 beta-hat + v0 f-hat)`.
///
/// The Dirac factor of the continuum kernel becomes the cubic stencil that
/// evaluates `f^{r+1} S` at `e^{u0} f_i`, so the kernel acts exactly as
/// [`group::apply_u`].
pub fn exp_generator_kernel(u0: f64, v0: f64, grid: &GeometricGrid) -> OperatorKernel {
    let b = exp_generator_shift(u0, v0);
    let nf = grid.len();
    let h = grid.log_step();
    let a = grid.r() + 1.0;
    let w = grid.weights();
    let fs = grid.freqs();
    let mut e = DMatrix::zeros(nf, nf);
    for i in 0..nf {
        let Some(st) = interp::stencil(i as f64 + u0 / h, nf) else {
            continue;
        };
        let phase = Complex64::from_polar(1.0, -2.0 * PI * fs[i] * b);
        for (j, wt) in st.iter() {
            e[(i, j)] = phase * (wt * (fs[j] / fs[i]).powf(a) / w[j]);
        }
    }
    OperatorKernel { grid: *grid, entries: e }
}

/// Translation `b` of the group element equal to `exp(-2i pi (u0 beta + v0 f))`.
pub fn exp_generator_shift(u0: f64, v0: f64) -> f64 {
    if u0.abs() < 1e-8 {
        v0 * (1.0 + u0 / 2.0 + u0 * u0 / 6.0)
    } else {
        v0 * u0.exp_m1() / u0
    }
}

/// `\int P A dt df` (real part; `P` is real and `A` the symbol of a hermitian operator).
pub fn expectation(symbol: &PhaseSymbol, p: &WignerDistribution) -> Result<f64> {
    symbol.check_same(&p.symbol)?;
    let conj = p.symbol.map(|z| z.conj());
    Ok(symbol.pairing(&conj)?.re)
}

/// Kernel of `(1/2)(f^{-1} beta-hat + beta-hat f^{-1})`, made exactly hermitian.
pub fn time_operator_kernel(grid: &GeometricGrid) -> OperatorKernel {
    time_operator_kernel_with(grid, Derivative::Stencil)
}

pub fn time_operator_kernel_with(grid: &GeometricGrid, scheme: Derivative) -> OperatorKernel {
    let b = group::beta_matrix(grid, scheme);
    let fs = grid.freqs();
    let n = grid.len();
    let m = DMatrix::from_fn(n, n, |i, j| (b[(i, j)] / fs[i] + b[(i, j)] / fs[j]) * 0.5);
    // the one-sided end stencils are not antisymmetric; keep the hermitian part
    let k = OperatorKernel::from_action(*grid, &m);
    let entries = (&k.entries + k.entries.adjoint()) * Complex64::new(0.5, 0.0);
    OperatorKernel { grid: *grid, entries }
}

/// Lattice actually used by [`weyl_form_kernel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylFormReport {
    pub v_step: f64,
    pub v_points: usize,
    /// Share of the spectral energy beyond the retained `v` range.
    pub v_tail: f64,
}

/// Kernel assembled as `\int\int hat A(u, v) E_{u,v} du dv`.
///
/// `hat A(u, v) = \int\int A(beta, f) e^{2i pi (u beta + v f)} dbeta df`. The
/// `u` lattice is the grid's log step (the only dilations the kernel can
/// resolve); the `v` lattice is sized from the measured bandwidth, doubling
/// until the last band holds less than `1e-8` of the spectral energy. The frequency dependence is
/// then rebuilt by Fourier synthesis, not interpolation, which makes this an
/// independent route to the same kernel as [`crate::correspondence::weyl_map_beta`].
pub fn weyl_form_kernel(sym: &BetaSymbol) -> (OperatorKernel, WeylFormReport) {
    let grid = sym.fgrid;
    let nf = grid.len();
    let h = grid.log_step();
    let bg = sym.bgrid;
    let wb = bg.weights();
    let fs = grid.freqs();
    let cf = grid.log_coefficients();
    let nk = 2 * nf - 1;
    // check[k][n] = \int A(beta, f_n) e^{-2i pi k h beta} dbeta, u = -k h
    let check: Vec<Vec<Complex64>> = (0..nk)
        .into_par_iter()
        .map(|kk| {
            let v = (kk as f64 - (nf - 1) as f64) * h;
            (0..nf)
                .map(|n| {
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
    // v lattice: period 1/dv must cover twice the frequency span
    let dv = 1.0 / (2.0 * grid.f_max());
    let spectrum = |l: i64, kk: usize| -> Complex64 {
        let v = l as f64 * dv;
        (0..nf)
            .map(|n| check[kk][n] * Complex64::from_polar(cf[n] * fs[n], 2.0 * PI * v * fs[n]))
            .sum()
    };
    let energy_at = |l: i64| -> f64 { (0..nk).step_by(4).map(|kk| spectrum(l, kk).norm_sqr()).sum() };
    // Grow the lattice until a band carries less than 1e-8 of the energy. The
    // quadrature in f stops resolving the phase once v f h > 1/2 and the
    // spectrum then rises again to a noise floor; a band that carries more
    // energy than the previous one marks that floor and is not kept.
    let mut lmax: i64 = 16;
    let mut total: f64 = (-lmax..=lmax).into_par_iter().map(energy_at).sum();
    let mut prev_band = f64::INFINITY;
    let mut tail = 1.0;
    while lmax < 1 << 14 {
        let band: f64 = ((lmax + 1)..=(2 * lmax))
            .into_par_iter()
            .map(|l| energy_at(l) + energy_at(-l))
            .sum();
        if band > prev_band {
            break;
        }
        total += band;
        lmax *= 2;
        prev_band = band;
        tail = if total > 0.0 { band / total } else { 0.0 };
        if tail < 1e-8 {
            break;
        }
    }
    let nv = (2 * lmax + 1) as usize;
    // hat[kk][l]
    let hat: Vec<Vec<Complex64>> = (0..nk)
        .into_par_iter()
        .map(|kk| (-lmax..=lmax).map(|l| spectrum(l, kk) * dv).collect())
        .collect();
    let rows: Vec<Vec<Complex64>> = (0..nf)
        .into_par_iter()
        .map(|i| {
            (0..nf)
                .map(|j| {
                    let kk = i + nf - 1 - j;
                    let k = i as f64 - j as f64;
                    let m = if i == j { fs[i] } else { (fs[i] - fs[j]) / (k * h) };
                    let step = Complex64::from_polar(1.0, -2.0 * PI * dv * m);
                    let mut z = Complex64::from_polar(1.0, 2.0 * PI * lmax as f64 * dv * m);
                    let mut s = Complex64::new(0.0, 0.0);
                    for x in &hat[kk] {
                        s += x * z;
                        z *= step;
                    }
                    s
                })
                .collect()
        })
        .collect();
    let red = DMatrix::from_fn(nf, nf, |i, j| rows[i][j]);
    (
        OperatorKernel::from_reduced(grid, &red),
        WeylFormReport { v_step: dv, v_points: nv, v_tail: tail },
    )
}

/// Sample `P(t, f)` at transported coordinates: `P(e^{-u}(t - b), e^u f)`.
pub fn transport(p: &PhaseSymbol, g: &group::AffineElement) -> PhaseSymbol {
    let ts = p.tgrid.times();
    let fs = p.fgrid.freqs();
    let values = Array2::from_shape_fn(p.values.dim(), |(m, n)| {
        p.interpolate((-g.u).exp() * (ts[m] - g.b), g.u.exp() * fs[n])
    });
    PhaseSymbol { tgrid: p.tgrid, fgrid: p.fgrid, values }
}
