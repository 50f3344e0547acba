//! The `G_k` family of calculi: symbols built on the curves
//! `(t - xi) f - k eta f^k = beta0`, their kernels, dual symbols and
//! generalized passive distributions.
//!
//! The pairing function `lambda_k` satisfies `lambda_k(-u) = e^{-u} lambda_k(u)`,
//! so the frequencies `f lambda_k(u)` and `f lambda_k(-u)` still sit on the
//! diagonals of the geometric grid and the diagonal engine of the main
//! calculus applies unchanged.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correspondence::{
    diagonal_samples, diagonal_transform, reduction_factors, OperatorKernel, OutAxis, PairingFamily,
};
use crate::error::{CalculusError, Result};
use crate::grid::{GeometricGrid, PhaseSymbol, Signal, TimeGrid, Truncation};
use crate::interp;

/// Family parameter `k` and the fixed label `beta0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GkParams {
    pub k: f64,
    pub beta0: f64,
}

impl GkParams {
    pub fn new(k: f64, beta0: f64) -> Result<Self> {
        let p = GkParams { k, beta0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 1.0 {
            return Err(CalculusError::DegenerateK);
        }
        if !self.k.is_finite() || !self.beta0.is_finite() {
            return Err(CalculusError::Domain(format!("k = {}, beta0 = {}", self.k, self.beta0)));
        }
        Ok(())
    }

    /// `k = -1, -1/2, 2`, and `1e-4` as a probe of the `k -> 0` limit.
    pub fn presets() -> [f64; 4] {
        [-1.0, -0.5, 2.0, 1e-4]
    }
}

// ln(sinh(x)/x)
fn ln_shc(x: f64) -> f64 {
    let a = x.abs();
    if a < 1e-4 {
        a * a / 6.0
    } else if a > 20.0 {
        a + (-(-2.0 * a).exp()).ln_1p() - std::f64::consts::LN_2 - a.ln()
    } else {
        (a.sinh() / a).ln()
    }
}

// d/dx ln(sinh(x)/x) = coth x - 1/x
fn d_ln_shc(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        x / 3.0 - x * x2 / 45.0 + 2.0 * x * x2 * x2 / 945.0
    } else {
        1.0 / x.tanh() - 1.0 / x
    }
}

/// `ln lambda_k(u)`, written as `u/2 + (ln shc(u/2) - ln shc(k u/2)) / (k - 1)`
/// with `shc(x) = sinh(x)/x`; both ratios are positive, so no branch choice arises.
pub fn ln_lambda_k(u: f64, k: f64) -> Result<f64> {
    if k == 1.0 {
        return Err(CalculusError::DegenerateK);
    }
    Ok(0.5 * u + (ln_shc(0.5 * u) - ln_shc(0.5 * k * u)) / (k - 1.0))
}

/// `e^{u/2} (k sinh(u/2) / sinh(k u/2))^{1/(k-1)}`, with the `u = 0` and `k = 0` limits.
pub fn lambda_k(u: f64, k: f64) -> Result<f64> {
    ln_lambda_k(u, k).map(f64::exp)
}

/// `lambda_k(u) - lambda_k(-u)`.
pub fn big_lambda_k(u: f64, k: f64) -> Result<f64> {
    Ok(lambda_k(u, k)? - lambda_k(-u, k)?)
}

/// `d/du (lambda_k(u) - lambda_k(-u))`.
pub fn d_big_lambda_k(u: f64, k: f64) -> Result<f64> {
    let dl = |v: f64| 0.5 + 0.5 * (d_ln_shc(0.5 * v) - k * d_ln_shc(0.5 * k * v)) / (k - 1.0);
    Ok(lambda_k(u, k)? * dl(u) + lambda_k(-u, k)? * dl(-u))
}

/// Weight of the dual symbol, `(lambda_k(u) lambda_k(-u))^{r+1} |Lambda_k'(u)|`.
pub fn dual_weight(u: f64, k: f64, r: f64) -> Result<f64> {
    let ll = (ln_lambda_k(u, k)? + ln_lambda_k(-u, k)?) * (r + 1.0);
    Ok(ll.exp() * d_big_lambda_k(u, k)?.abs())
}

/// `f^{-2i pi beta0 - r - 1} e^{-2i pi (xi f + eta f^k)}`.
pub fn psi_k(xi: f64, eta: f64, beta0: f64, k: f64, grid: &GeometricGrid) -> Signal {
    let a = grid.r() + 1.0;
    Signal::from_fn(*grid, |f| {
        Complex64::from_polar(
            f.powf(-a),
            -2.0 * PI * (beta0 * f.ln() + xi * f + eta * f.powf(k)),
        )
    })
}

struct Gk {
    k: f64,
    beta0: f64,
    dual: bool,
}

impl PairingFamily for Gk {
    fn ln_l_minus(&self, u: f64) -> f64 {
        ln_lambda_k(-u, self.k).unwrap_or(f64::NAN)
    }
    fn big_lambda(&self, u: f64) -> f64 {
        big_lambda_k(u, self.k).unwrap_or(f64::NAN)
    }
    fn weight(&self, u: f64) -> f64 {
        if self.dual {
            d_big_lambda_k(u, self.k).unwrap_or(f64::NAN).abs()
        } else {
            1.0
        }
    }
    fn beta0(&self) -> f64 {
        self.beta0
    }
}

fn symbol_with(a: &OperatorKernel, p: GkParams, tgrid: TimeGrid, dual: bool) -> Result<PhaseSymbol> {
    p.validate()?;
    let fam = Gk { k: p.k, beta0: p.beta0, dual };
    let r = a.reduced();
    let samples = diagonal_samples(&a.grid, &fam, &|i, j| r[(i, j)]);
    let values = diagonal_transform(&a.grid, OutAxis::Time(tgrid), &fam, &samples);
    Ok(PhaseSymbol { tgrid, fgrid: a.grid, values })
}

/// Symbol of `A` in the `(k, beta0)` calculus.
///
/// `f^{2r+2} \int e^{2i pi u beta0} e^{2i pi (t f - beta0) Lambda_k(u)}
/// A(f lambda_k(u), f lambda_k(-u)) (lambda_k(u) lambda_k(-u))^{r+1} du`, evaluated on the
/// diagonals of the reduced kernel with the same interpolation as [`crate::correspondence::wigner_map`].
pub fn gk_symbol(a: &OperatorKernel, p: GkParams, tgrid: TimeGrid) -> Result<PhaseSymbol> {
    symbol_with(a, p, tgrid, false)
}

/// Dual symbol: the `u` integrand of [`gk_symbol`] carries the extra factor `|Lambda_k'(u)|`.
pub fn gk_dual_symbol(a: &OperatorKernel, p: GkParams, tgrid: TimeGrid) -> Result<PhaseSymbol> {
    symbol_with(a, p, tgrid, true)
}

/// Dual symbol of the projector on `s`.
pub fn gk_wigner(s: &Signal, p: GkParams, tgrid: TimeGrid) -> Result<PhaseSymbol> {
    p.validate()?;
    let grid = s.grid;
    let m = reduction_factors(&grid);
    let phi: Vec<Complex64> = s.values.iter().zip(&m).map(|(z, m)| z * *m).collect();
    let fam = Gk { k: p.k, beta0: p.beta0, dual: true };
    let samples = diagonal_samples(&grid, &fam, &|i, j| phi[i] * phi[j].conj());
    let values = diagonal_transform(&grid, OutAxis::Time(tgrid), &fam, &samples);
    Ok(PhaseSymbol { tgrid, fgrid: grid, values })
}

/// The frequency `f` with `f1 = f lambda_k(u)`, `f2 = f lambda_k(-u)`, `u = ln(f1/f2)`:
/// `(k (f1 - f2) / (f1^k - f2^k))^{1/(1-k)}`, the root of the constraint
/// `f1 - f2 = f^{1-k} (f1^k - f2^k) / k`.
pub fn center_frequency_k(f1: f64, f2: f64, k: f64) -> Result<f64> {
    let u = (f1 / f2).ln();
    Ok(f1 / lambda_k(u, k)?)
}

/// Kernel of a symbol in the `(k, beta0)` calculus.
pub fn gk_kernel(sym: &PhaseSymbol, p: GkParams) -> Result<OperatorKernel> {
    gk_kernel_reported(sym, p).map(|x| x.0)
}

/// [`gk_kernel`] with the count of entries whose centre frequency leaves the grid.
///
/// Inverting the `u` integral along `t` gives
/// `R(f1, f2) = f |Lambda_k'(u)| (f1/f2)^{-2i pi beta0} e^{2i pi beta0 (f1 - f2)/f}
/// \int e^{-2i pi (f1 - f2) t} A(t, f) dt` at the centre frequency `f`. Entries above the
/// Nyquist rate of the time samples are dropped as in the main calculus.
pub fn gk_kernel_reported(sym: &PhaseSymbol, p: GkParams) -> Result<(OperatorKernel, Truncation)> {
    p.validate()?;
    let grid = sym.fgrid;
    let nf = grid.len();
    let h = grid.log_step();
    let tg = sym.tgrid;
    let wt = tg.weights();
    let fs = grid.freqs();
    let rows: Vec<(Vec<Complex64>, usize)> = (0..nf)
        .into_par_iter()
        .map(|i| {
            let mut dropped = 0;
            let row = (0..nf)
                .map(|j| {
                    let u = (i as f64 - j as f64) * h;
                    let omega = fs[i] - fs[j];
                    if omega.abs() * tg.step() > 0.5 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let f = fs[i] / lambda_k(u, p.k).unwrap_or(f64::NAN);
                    let Some(st) = interp::stencil(grid.position(f), nf) else {
                        dropped += 1;
                        return Complex64::new(0.0, 0.0);
                    };
                    let step = Complex64::from_polar(1.0, -2.0 * PI * omega * tg.step());
                    let z0 = Complex64::from_polar(1.0, -2.0 * PI * omega * tg.t_min());
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (node, w) in st.iter() {
                        let mut z = z0;
                        let mut s = Complex64::new(0.0, 0.0);
                        for (m, wtm) in wt.iter().enumerate() {
                            s += sym.values[[m, node]] * z * *wtm;
                            z *= step;
                        }
                        acc += s * w;
                    }
                    let jac = f * d_big_lambda_k(u, p.k).unwrap_or(f64::NAN).abs();
                    let phase = Complex64::from_polar(1.0, 2.0 * PI * p.beta0 * (omega / f - u));
                    acc * phase * jac
                })
                .collect();
            (row, dropped)
        })
        .collect();
    let dropped = rows.iter().map(|r| r.1).sum();
    let red = DMatrix::from_fn(nf, nf, |i, j| rows[i].0[j]);
    Ok((
        OperatorKernel::from_reduced(grid, &red),
        Truncation { dropped_points: dropped, mass_fraction: dropped as f64 / (nf * nf) as f64 },
    ))
}

/// `(psi_k, A psi_k)` with `psi_k` windowed.
pub fn gk_diag_ih(
    a: &OperatorKernel,
    xi: f64,
    eta: f64,
    p: GkParams,
    window: &[f64],
) -> Result<Complex64> {
    p.validate()?;
    if window.len() != a.grid.len() {
        return Err(CalculusError::GridMismatch("window length".into()));
    }
    let psi = psi_k(xi, eta, p.beta0, p.k, &a.grid).window(window);
    let apsi = a.apply(&psi)?;
    crate::grid::inner_product(&apsi, &psi)
}

/// `\int A(t(f), f) df / f` along `(t - xi) f - k eta f^k = beta0`, zero outside the time grid.
pub fn gk_radon_igamma(sym: &PhaseSymbol, xi: f64, eta: f64, p: GkParams) -> Result<Complex64> {
    p.validate()?;
    let c = sym.fgrid.log_coefficients();
    Ok((0..sym.fgrid.len())
        .map(|n| {
            let f = sym.fgrid.freq(n);
            let t = xi + (p.beta0 + p.k * eta * f.powf(p.k)) / f;
            let col = sym.values.column(n);
            match interp::stencil(sym.tgrid.position(t), sym.tgrid.len()) {
                Some(st) => st.iter().map(|(m, w)| col[m] * w).sum::<Complex64>() * c[n],
                None => Complex64::new(0.0, 0.0),
            }
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::{lambda, trace_product, weyl_map, wigner_map, LogGaussian};
    use crate::grid::{inner_product, interior_window, make_grid, DEFAULT_R};
    use crate::group::{apply_u_ext_reported, ExtendedElement};
    use crate::interp::Interpolation;
    use crate::wigner::{affine_wigner, projector_kernel};

    fn fgrid(n: usize) -> GeometricGrid {
        make_grid(0.05, 5.0, n, DEFAULT_R).unwrap()
    }

    fn rel(a: &PhaseSymbol, b: &PhaseSymbol) -> f64 {
        a.zip_with(b, |x, y| x - y).unwrap().l2() / b.l2()
    }

    #[test]
    fn lambda_k_values() {
        assert_eq!(lambda_k(0.0, -1.0).unwrap(), 1.0);
        assert_eq!(lambda_k(1.0, 1.0), Err(CalculusError::DegenerateK));
        assert!(GkParams::new(1.0, 0.0).is_err());
        for u in [-3.0f64, -1.0, -1e-5, 0.3, 2.0, 3.0, 7.0] {
            let e = (0.5 * u).exp();
            assert!((lambda_k(u, -1.0).unwrap() - e).abs() <= 2.0 * f64::EPSILON * e, "{u}");
            // first order in k: d lambda_k / dk at 0 is -lambda(u) ln(sinh(u/2)/(u/2))
            if u.abs() <= 3.0 && u.abs() > 1e-3 {
                let slope = -lambda(u) * ((0.5 * u).sinh() / (0.5 * u)).ln();
                let k = 1e-4;
                let d = (lambda_k(u, k).unwrap() - lambda(u)) / k;
                assert!((d - slope).abs() < 1e-3 * slope.abs().max(1.0), "{u} {d} {slope}");
            }
            assert!((lambda_k(u, 0.0).unwrap() - lambda(u)).abs() <= 1e-13 * lambda(u));
            for k in GkParams::presets() {
                let a = lambda_k(u, k).unwrap();
                let b = lambda_k(-u, k).unwrap();
                assert!((b - (-u).exp() * a).abs() < 1e-13 * a, "{k} {u}");
                // direct formula away from the limits
                if u.abs() > 1e-3 {
                    let d = (0.5 * u).exp()
                        * (k * (0.5 * u).sinh() / (0.5 * k * u).sinh()).powf(1.0 / (k - 1.0));
                    assert!((a - d).abs() < 1e-12 * d, "{k} {u} {a} {d}");
                }
            }
        }
    }

    #[test]
    fn lambda_derivative() {
        for k in GkParams::presets().into_iter().chain([0.0, 3.5]) {
            for u in [-2.5f64, -0.4, 0.0, 1e-4, 1.0, 4.0] {
                let hh = 1e-3;
                let f = |x: f64| big_lambda_k(x, k).unwrap();
                let cd = (-f(u + 2.0 * hh) + 8.0 * f(u + hh) - 8.0 * f(u - hh) + f(u - 2.0 * hh))
                    / (12.0 * hh);
                let an = d_big_lambda_k(u, k).unwrap();
                assert!((cd - an).abs() < 1e-9 * an.abs().max(1.0), "{k} {u} {cd} {an}");
            }
        }
        assert!((d_big_lambda_k(1.0, -1.0).unwrap() - 0.5f64.cosh()).abs() < 1e-14);
        assert!((d_big_lambda_k(0.7, 0.0).unwrap() - 1.0).abs() < 1e-14);
        let want = ((0.5f64).exp() * (-0.5f64).exp()).powf(DEFAULT_R + 1.0) * 0.5f64.cosh();
        assert!((dual_weight(1.0, -1.0, DEFAULT_R).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn center_frequency_solves_constraint() {
        for k in GkParams::presets() {
            for (f1, f2) in [(1.0, 0.5), (0.2, 3.0), (2.0, 2.0 * (1.0 + 1e-9))] {
                let f = center_frequency_k(f1, f2, k).unwrap();
                let closed = (k * (f1 - f2) / (f1.powf(k) - f2.powf(k))).powf(1.0 / (1.0 - k));
                if (f1 - f2).abs() > 1e-6 {
                    assert!((f - closed).abs() < 1e-12 * f, "{k} {f} {closed}");
                    let g = f1 - f2 - f.powf(1.0 - k) * (f1.powf(k) - f2.powf(k)) / k;
                    assert!(g.abs() < 1e-12, "{g}");
                } else {
                    assert!((f - 2.0).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn kernel_jacobian_matches_constraint_form() {
        // f |Lambda'(u)| (f1 f2)^{-r-1} against the delta-resolved factors of the constraint form
        let r = DEFAULT_R;
        for k in GkParams::presets() {
            for (f1, f2) in [(1.0f64, 0.5f64), (0.3, 2.0)] {
                let u = (f1 / f2).ln();
                let f = center_frequency_k(f1, f2, k).unwrap();
                let ours = f * d_big_lambda_k(u, k).unwrap().abs() * (f1 * f2).powf(-r - 1.0);
                let g_prime = ((1.0 - k) / k * f.powf(-k) * (f1.powf(k) - f2.powf(k))).abs();
                let theirs = (f1 * f2).powf(-r)
                    * f.powf(-k)
                    * (f2.powf(k - 1.0) - f1.powf(k - 1.0)).abs()
                    / g_prime;
                assert!((ours - theirs).abs() < 1e-10 * ours, "{k} {ours} {theirs}");
            }
        }
    }

    #[test]
    fn psi_k_properties() {
        let g = fgrid(64);
        let a = psi_k(0.3, 0.0, 0.5, -1.0, &g);
        let b = crate::group::psi_basis(0.3, 0.5, &g);
        assert!(a.max_rel_diff(&b) < 1e-14);
        let c = psi_k(0.3, 0.7, 0.5, 2.0, &g);
        for (i, z) in c.values.iter().enumerate() {
            assert!((z.norm() * g.freq(i).powf(DEFAULT_R + 1.0) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn psi_k_covariance() {
        let g = make_grid(0.05, 20.0, 512, DEFAULT_R).unwrap();
        let (xi, eta, beta0, k) = (0.4, 0.3, 0.2, -0.5);
        let el = ExtendedElement::new(0.3, 0.5, -0.2, k);
        let (moved, _) =
            apply_u_ext_reported(&el, &psi_k(xi, eta, beta0, k, &g), Interpolation::BandLimited);
        let want = psi_k(el.u.exp() * xi + el.b, (k * el.u).exp() * eta + el.c, beta0, k, &g)
            .scale(Complex64::from_polar(1.0, -2.0 * PI * beta0 * el.u));
        // dilation runs past the top of the grid; compare on the lower half
        let n = 200;
        let err = (0..n)
            .map(|i| (moved.values[i] - want.values[i]).norm() / want.values[i].norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn identity_kernel_has_unit_symbol() {
        let g = fgrid(128);
        let tg = TimeGrid::new(-10.0, 10.0, 32).unwrap();
        for k in GkParams::presets() {
            for beta0 in [0.0, 0.7] {
                let sym = gk_symbol(&OperatorKernel::identity(g), GkParams::new(k, beta0).unwrap(), tg)
                    .unwrap();
                for ((_, n), z) in sym.values.indexed_iter() {
                    if (3..125).contains(&n) {
                        assert!((z - 1.0).norm() < 1e-12, "{k} {n} {z}");
                    }
                }
            }
        }
    }

    #[test]
    fn small_k_matches_main_calculus() {
        let g = fgrid(128);
        let tg = TimeGrid::new(-10.0, 10.0, 128).unwrap();
        let p = GkParams::new(1e-4, 0.0).unwrap();
        let lg = LogGaussian { f0: 0.5, sigma_log: 0.3, t0: 0.5, sigma_t: 1.5 };
        let s = lg.signal(g);
        let a = projector_kernel(&s).unwrap();
        let d = rel(&gk_symbol(&a, p, tg).unwrap(), &wigner_map(&a, tg));
        assert!(d < 1e-4, "{d}");
        let d = rel(&gk_wigner(&s, p, tg).unwrap(), &affine_wigner(&s, tg).symbol);
        assert!(d < 1e-3, "{d}");
        let sym = lg.phase_symbol(tg, g);
        let ka = gk_kernel(&sym, p).unwrap();
        let kb = weyl_map(&sym);
        let d = (ka.entries.clone() - &kb.entries).norm() / kb.entries.norm();
        assert!(d < 1e-3, "{d}");
    }

    #[test]
    fn hermitian_kernel_real_symbol() {
        let g = fgrid(96);
        let tg = TimeGrid::new(-10.0, 10.0, 64).unwrap();
        let s = LogGaussian { f0: 0.5, sigma_log: 0.3, t0: 1.0, sigma_t: 1.0 }.signal(g);
        let s2 = LogGaussian { f0: 1.0, sigma_log: 0.2, t0: -2.0, sigma_t: 1.0 }.signal(g);
        let k = OperatorKernel::from_fn(g, |i, j| {
            s.values[i] * s2.values[j].conj() + s2.values[i] * s.values[j].conj()
        });
        // u -> -u swaps lambda_k(u) and lambda_k(-u) and flips Lambda_k, so beta0 does not spoil realness
        for (kk, beta0) in [(-1.0, 0.0), (-1.0, 0.4), (2.0, -0.7), (-0.5, 0.4)] {
            let p = GkParams::new(kk, beta0).unwrap();
            for sym in [gk_symbol(&k, p, tg).unwrap(), gk_dual_symbol(&k, p, tg).unwrap(), gk_wigner(&s, p, tg).unwrap()] {
                let mx = sym.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let im = sym.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
                assert!(im <= 1e-12 * mx, "k {kk} beta0 {beta0}: {:e}", im / mx);
            }
        }
        // real symbol -> hermitian kernel
        let sym = LogGaussian { f0: 0.5, sigma_log: 0.3, t0: 1.0, sigma_t: 2.0 }.phase_symbol(tg, g);
        for kk in GkParams::presets() {
            for beta0 in [0.0, 0.4] {
                let ker = gk_kernel(&sym, GkParams::new(kk, beta0).unwrap()).unwrap();
                assert!(ker.hermiticity_residual() < 1e-13, "{kk} {beta0}");
            }
        }
    }

    #[test]
    fn round_trip() {
        let g = fgrid(128);
        let tg = TimeGrid::new(-10.0, 10.0, 128).unwrap();
        let lg = LogGaussian { f0: 0.5, sigma_log: 0.3, t0: 0.5, sigma_t: 1.5 };
        let sym = lg.phase_symbol(tg, g);
        for k in GkParams::presets() {
            for beta0 in [0.0, 0.4] {
                let p = GkParams::new(k, beta0).unwrap();
                let (ker, tr) = gk_kernel_reported(&sym, p).unwrap();
                let back = gk_symbol(&ker, p, tg).unwrap();
                let d = rel(&back, &sym);
                assert!(d < 2e-3, "{k} {beta0} {d} {tr:?}");
            }
        }
    }

    #[test]
    fn dual_pairing_is_unitary() {
        // broad in log f, so the pairs reach |u| where cosh(u/2) departs from 1
        let g = make_grid(0.02, 10.0, 160, DEFAULT_R).unwrap();
        let tg = TimeGrid::new(-20.0, 20.0, 256).unwrap();
        let s1 = LogGaussian { f0: 0.5, sigma_log: 0.45, t0: 1.0, sigma_t: 1.0 }.signal(g);
        let s2 = LogGaussian { f0: 0.7, sigma_log: 0.5, t0: -0.5, sigma_t: 1.0 }.signal(g);
        let a = projector_kernel(&s1).unwrap();
        let b = projector_kernel(&s2).unwrap();
        let tr = trace_product(&a, &b).unwrap();
        for k in [-1.0, -0.5, 2.0] {
            let p = GkParams::new(k, 0.0).unwrap();
            let sa = gk_symbol(&a, p, tg).unwrap();
            let dual = sa.pairing(&gk_dual_symbol(&b, p, tg).unwrap()).unwrap();
            let plain = sa.pairing(&gk_symbol(&b, p, tg).unwrap()).unwrap();
            let ed = (dual - tr).norm() / tr.norm();
            let ep = (plain - tr).norm() / tr.norm();
            assert!(ed < 1e-3, "{k} dual {ed}");
            if k == -1.0 {
                assert!(ep > 5e-2, "{k} plain {ep}");
            }
            // Wigner form of the same identity
            let w = sa.pairing(&gk_wigner(&s2, p, tg).unwrap()).unwrap();
            let want = inner_product(&s2, &s1).unwrap().norm_sqr();
            assert!((w - want).norm() < 1e-3 * want, "{k} {w} {want}");
        }
    }

    #[test]
    fn ih_equals_igamma() {
        let g = fgrid(256);
        let tg = TimeGrid::new(-30.0, 30.0, 512).unwrap();
        let w = interior_window(&g, 0.8);
        let s = LogGaussian { f0: 0.5, sigma_log: 0.3, t0: 1.0, sigma_t: 1.0 }.signal(g);
        let k = OperatorKernel::from_fn(g, |i, j| s.values[i] * s.values[j].conj());
        for kk in [-1.0, 2.0] {
            let p = GkParams::new(kk, 0.3).unwrap();
            let sym = gk_symbol(&k.compress(&w), p, tg).unwrap();
            for &(xi, eta) in &[(0.0, 0.0), (0.5, 0.2), (-1.0, -0.1)] {
                let ih = gk_diag_ih(&k, xi, eta, p, &w).unwrap();
                let ig = gk_radon_igamma(&sym, xi, eta, p).unwrap();
                assert!((ih - ig).norm() < 1e-3 * ih.norm(), "{kk} {xi} {eta} {ih} {ig}");
            }
        }
    }
}
