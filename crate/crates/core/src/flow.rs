//! Flows generated by `O_H = mu beta + nu f + sigma ln f`.
//!
//! In Hilbert space the flow is `e^{-2i pi alpha O_H}`, realized by the extended group
//! element `(mu alpha, nu alpha E(mu alpha), sigma alpha)` with `E(x) = (e^x - 1)/x` and the
//! phase `e^{-i pi sigma mu alpha^2}` left over from the projective composition law.
//! In phase space it is transport along the characteristics of
//! `d_alpha P = mu f d_f P - (mu t + nu + sigma/f) d_t P`.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::deriv::Derivative;
use crate::error::{domain, Result};
use crate::grid::{GeometricGrid, PhaseSymbol, Signal, TimeGrid, Truncation};
use crate::group::{apply_u_ext_reported, beta_matrix, ExtendedElement};
use crate::interp::Interpolation;
use crate::wigner::affine_wigner;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowParams {
    pub mu: f64,
    pub nu: f64,
    pub sigma: f64,
    pub alpha: f64,
}

fn e_ratio(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

impl FlowParams {
    pub fn new(mu: f64, nu: f64, sigma: f64, alpha: f64) -> Self {
        FlowParams { mu, nu, sigma, alpha }
    }

    pub fn at(&self, alpha: f64) -> FlowParams {
        FlowParams { alpha, ..*self }
    }

    pub fn is_finite(&self) -> bool {
        [self.mu, self.nu, self.sigma, self.alpha].iter().all(|x| x.is_finite())
    }

    /// `(u, b, c) = (mu alpha, nu (e^{mu alpha} - 1)/mu, sigma alpha)`, continuous at `mu = 0`.
    pub fn element(&self) -> ExtendedElement {
        let a = self.alpha;
        ExtendedElement::new(self.mu * a, self.nu * a * e_ratio(self.mu * a), self.sigma * a, 0.0)
    }

    /// `e^{-i pi sigma mu alpha^2}`.
    pub fn phase(&self) -> Complex64 {
        Complex64::from_polar(1.0, -PI * self.sigma * self.mu * self.alpha * self.alpha)
    }
}

/// `e^{-2i pi alpha O_H} S` through the closed-form group element, band-limited dilation.
pub fn evolve_hilbert(s: &Signal, p: &FlowParams) -> Signal {
    evolve_hilbert_with(s, p, Interpolation::BandLimited).0
}

pub fn evolve_hilbert_with(s: &Signal, p: &FlowParams, scheme: Interpolation) -> (Signal, Truncation) {
    let (out, tr) = apply_u_ext_reported(&p.element(), s, scheme);
    (out.scale(p.phase()), tr)
}

/// Matrix of `mu beta + nu f + sigma ln f` acting on sample vectors.
pub fn generator_matrix(grid: &GeometricGrid, p: &FlowParams, scheme: Derivative) -> DMatrix<Complex64> {
    let mut g = beta_matrix(grid, scheme) * Complex64::new(p.mu, 0.0);
    for i in 0..grid.len() {
        let f = grid.freq(i);
        g[(i, i)] += Complex64::new(p.nu * f + p.sigma * f.ln(), 0.0);
    }
    g
}

/// Dense `exp(-2i pi alpha G)` applied to `S`, with `G` from [`generator_matrix`].
pub fn evolve_expm(s: &Signal, p: &FlowParams, scheme: Derivative) -> Signal {
    let g = generator_matrix(&s.grid, p, scheme);
    let u = (g * Complex64::new(0.0, -2.0 * PI * p.alpha)).exp();
    let v = u * DVector::from_column_slice(&s.values);
    Signal { grid: s.grid, values: v.iter().copied().collect() }
}

/// Pre-image of `(t, f)` under the phase-space flow: the point that lands there after `alpha`.
pub fn characteristic(p: &FlowParams, t: f64, f: f64) -> (f64, f64) {
    let e = (-p.mu * p.alpha).exp();
    let b = p.element().b;
    (e * (t - b - p.sigma * p.alpha / f), f / e)
}

/// `P(t, f; alpha) = P0(e^{-mu alpha}(t - b - sigma alpha / f), f e^{mu alpha})`.
pub fn liouville_transport(p0: &PhaseSymbol, p: &FlowParams) -> PhaseSymbol {
    let ts = p0.tgrid.times();
    let fs = p0.fgrid.freqs();
    let cols: Vec<Vec<Complex64>> = fs
        .par_iter()
        .map(|f| {
            ts.iter()
                .map(|t| {
                    let (t0, f0) = characteristic(p, *t, *f);
                    p0.interpolate(t0, f0)
                })
                .collect()
        })
        .collect();
    let values = Array2::from_shape_fn(p0.values.dim(), |(m, n)| cols[n][m]);
    PhaseSymbol { tgrid: p0.tgrid, fgrid: p0.fgrid, values }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub alpha: f64,
    /// `||W(evolved) - transport(W(S))|| / ||W(S)||`.
    pub distance: f64,
    /// `| ||evolved|| / ||S|| - 1 |`.
    pub norm_drift: f64,
    /// Share of the signal's energy the dilation pushed off the grid.
    pub truncation_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub mu: f64,
    pub nu: f64,
    pub sigma: f64,
    pub samples: Vec<FlowSample>,
}

impl FlowReport {
    pub fn max_distance(&self) -> f64 {
        self.samples.iter().map(|s| s.distance).fold(0.0, f64::max)
    }
}

/// Wigner distribution of the evolved signal against the transported initial distribution.
pub fn compare_flows(s: &Signal, p: &FlowParams, alphas: &[f64], tgrid: TimeGrid) -> Result<FlowReport> {
    if !p.is_finite() || alphas.iter().any(|a| !a.is_finite()) {
        return domain("flow parameters must be finite");
    }
    let w0 = affine_wigner(s, tgrid).symbol;
    let n0 = w0.l2();
    let s0 = s.norm();
    if n0 == 0.0 || s0 == 0.0 {
        return Err(crate::error::CalculusError::ZeroSignal);
    }
    let samples = alphas
        .iter()
        .map(|&alpha| {
            let q = p.at(alpha);
            let (evolved, tr) = evolve_hilbert_with(s, &q, Interpolation::BandLimited);
            let w = affine_wigner(&evolved, tgrid).symbol;
            let moved = liouville_transport(&w0, &q);
            let distance = w.zip_with(&moved, |a, b| a - b)?.l2() / n0;
            Ok(FlowSample {
                alpha,
                distance,
                norm_drift: (evolved.norm() / s0 - 1.0).abs(),
                truncation_mass: tr.mass_fraction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FlowReport { mu: p.mu, nu: p.nu, sigma: p.sigma, samples })
}
