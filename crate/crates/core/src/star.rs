//! Star product of symbols.
//!
//! Two routes: the operator route transports the kernel product through the
//! correspondence and is exact at the discrete level; the series route expands
//! the product in derivatives of the two symbols,
//!
//! ```text
//! A * B = sum_n (1/n!) [ (f/4i pi) (d_f1 d_b2 - d_f2 d_b1) T(u1, u2) ]^n A(b1, f1) B(b2, f2) |_coincide
//! ```
//!
//! with `u_j = i d_bj / (2 pi)`. Powers `f^a d_f^a` are rewritten as falling
//! factorials of `d_x`, `x = ln f`, and the series is cut by total derivative
//! degree, so order `n` keeps everything of degree `<= 2n + 1`.

use std::collections::HashMap;

use ndarray::Array2;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::correspondence::{
    lambda, weyl_map, weyl_map_beta, wigner_map, wigner_map_beta,
};
use crate::deriv::{differentiate, Derivative};
use crate::error::{domain, CalculusError, Result};
use crate::grid::{BetaGrid, BetaSymbol, PhaseSymbol, TimeGrid};
use crate::interp;

/// Largest series order accepted by [`star_product_series`].
pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StarConfig {
    /// Series truncation order `n_max`.
    pub order: usize,
    /// Derivative scheme along `ln f`; `beta` derivatives are always spectral.
    pub f_derivative: Derivative,
    /// Half-width of the `u` lattice used by the delta functionals (default `1/(2 dbeta)`).
    pub u_max: Option<f64>,
    /// Number of `u` nodes (default `4 n_beta + 1`).
    pub u_points: Option<usize>,
}

impl Default for StarConfig {
    fn default() -> Self {
        StarConfig { order: 2, f_derivative: Derivative::Stencil, u_max: None, u_points: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StarMethod {
    Operator,
    Series,
}

fn e_ratio(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

/// `T(u1, u2) = 2 (u1 e^{u1} (e^{u2} - 1) - u2 (e^{u1} - 1)) / (u1 u2 (e^{u1+u2} - 1))`.
pub fn t_generating(u1: f64, u2: f64) -> f64 {
    let s = u1 + u2;
    if u1.abs() < 0.25 && u2.abs() < 0.25 {
        return t_series(u1, u2);
    }
    if s.abs() > 1e-4 {
        return 2.0 * (u1.exp() * e_ratio(u2) - e_ratio(u1)) / (s * e_ratio(s));
    }
    // (e^{u1} E(u2) - E(u1)) / s as a Taylor series in s around u2 = -u1
    let x = -u1;
    let mut ik = e_ratio(x);
    let mut acc = 0.0;
    let mut fact = 1.0;
    for k in 1..=4 {
        // int_0^1 tau^k e^{tau x} dtau
        ik = (x.exp() - k as f64 * ik) / x;
        fact *= k as f64;
        acc += ik * s.powi(k - 1) / fact;
    }
    2.0 * u1.exp() * acc / e_ratio(s)
}

fn t_series(u1: f64, u2: f64) -> f64 {
    thread_local! {
        static COEFFS: Vec<Vec<f64>> = t_coefficients(14)
            .iter()
            .map(|row| row.iter().map(|c| c.to_f64().unwrap_or(0.0)).collect())
            .collect();
    }
    COEFFS.with(|t| {
        let mut acc = 0.0;
        for (a, row) in t.iter().enumerate() {
            for (b, c) in row.iter().enumerate() {
                acc += c * u1.powi(a as i32) * u2.powi(b as i32);
            }
        }
        acc
    })
}

/// The phase of the product formula, `(v1 u2 - v2 u1) T(u1, u2) / 2`.
pub fn h_function(u1: f64, v1: f64, u2: f64, v2: f64) -> f64 {
    0.5 * (v1 * u2 - v2 * u1) * t_generating(u1, u2)
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// Taylor coefficients `t[a][b]` of `T(u1, u2)`, `a + b <= degree`, in exact arithmetic.
pub fn t_coefficients(degree: usize) -> Vec<Vec<BigRational>> {
    let top = degree + 2;
    let mut inv_fact = vec![rat(1, 1)];
    for n in 1..=top {
        let next = &inv_fact[n - 1] / rat(n as i64, 1);
        inv_fact.push(next);
    }
    // M = e^{u1} E(u2) - E(u1), E(x) = sum x^n / (n+1)!
    let m = |a: usize, b: usize| -> BigRational {
        let mut c = &inv_fact[a] * &inv_fact[b + 1];
        if b == 0 {
            c -= &inv_fact[a + 1];
        }
        c
    };
    // Q = M / (u1 + u2), homogeneous part by part
    let mut q = vec![vec![BigRational::zero(); degree + 1]; degree + 1];
    for d in 1..=degree + 1 {
        let mut prev = BigRational::zero();
        for a in 0..d {
            let qa = m(a, d - a) - &prev;
            q[a][d - 1 - a] = qa.clone();
            prev = qa;
        }
        debug_assert_eq!(prev, m(d, 0));
    }
    // 1/E(s) = sum g_n s^n
    let mut g = vec![rat(1, 1)];
    for n in 1..=degree {
        let mut acc = BigRational::zero();
        for j in 1..=n {
            acc -= &inv_fact[j + 1] * &g[n - j];
        }
        g.push(acc);
    }
    let mut binom = vec![vec![rat(1, 1)]];
    for n in 1..=degree {
        let mut row = vec![rat(1, 1); n + 1];
        for k in 1..n {
            row[k] = &binom[n - 1][k - 1] + &binom[n - 1][k];
        }
        binom.push(row);
    }
    let mut t = vec![vec![BigRational::zero(); degree + 1]; degree + 1];
    for a in 0..=degree {
        for b in 0..=degree - a {
            if q[a][b].is_zero() {
                continue;
            }
            for n in 0..=degree - a - b {
                for k in 0..=n {
                    let c = &q[a][b] * &g[n] * &binom[n][k] * rat(2, 1);
                    t[a + k][b + n - k] += c;
                }
            }
        }
    }
    for (a, row) in t.iter_mut().enumerate() {
        row.truncate(degree + 1 - a);
    }
    t
}

// exponents of (d_x1, d_b1, d_x2, d_b2)
type Mono = [u8; 4];

#[derive(Debug, Clone, Default)]
struct Poly(HashMap<Mono, Complex64>);

impl Poly {
    fn constant(c: Complex64) -> Poly {
        Poly(HashMap::from([([0; 4], c)]))
    }

    fn add_scaled(&mut self, other: &Poly, s: Complex64) {
        for (m, c) in &other.0 {
            *self.0.entry(*m).or_default() += c * s;
        }
    }

    fn mul(&self, other: &Poly, max_degree: usize) -> Poly {
        let mut out = Poly::default();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                let m = [ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2], ma[3] + mb[3]];
                if m.iter().map(|e| *e as usize).sum::<usize>() <= max_degree {
                    *out.0.entry(m).or_default() += ca * cb;
                }
            }
        }
        out
    }
}

/// `f^a d_f^a = d_x (d_x - 1) ... (d_x - a + 1)` as coefficients of `d_x^j`.
fn falling(a: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for m in 0..a {
        let mut next = vec![0.0; c.len() + 1];
        for (j, cj) in c.iter().enumerate() {
            next[j + 1] += cj;
            next[j] -= m as f64 * cj;
        }
        c = next;
    }
    c
}

fn series_terms(order: usize) -> Vec<(Mono, Complex64)> {
    let dmax = 2 * order + 1;
    let i = Complex64::new(0.0, 1.0);
    let tc = t_coefficients(dmax);
    let mut tpoly = Poly::default();
    // u_j -> i d_bj / (2 pi)
    let du = i / (2.0 * PI);
    for (a, row) in tc.iter().enumerate() {
        for (b, c) in row.iter().enumerate() {
            let v = c.to_f64().unwrap_or(0.0);
            if v != 0.0 {
                tpoly.0.insert([0, a as u8, 0, b as u8], du.powi((a + b) as i32) * v);
            }
        }
    }
    let mut total = Poly::constant(Complex64::new(1.0, 0.0));
    let mut tpow = Poly::constant(Complex64::new(1.0, 0.0));
    let pref = 1.0 / (4.0 * PI * i);
    let mut scale = Complex64::new(1.0, 0.0);
    for n in 1..dmax {
        tpow = tpow.mul(&tpoly, dmax);
        scale *= pref / n as f64;
        // (F1 B2 - F2 B1)^n with F = f d_f
        let mut kn = Poly::default();
        let mut binom = 1.0;
        for a in 0..=n {
            if a > 0 {
                binom *= (n - a + 1) as f64 / a as f64;
            }
            let sign = if (n - a) % 2 == 0 { 1.0 } else { -1.0 };
            let (f1, f2) = (falling(a), falling(n - a));
            for (j1, c1) in f1.iter().enumerate() {
                for (j2, c2) in f2.iter().enumerate() {
                    if *c1 == 0.0 || *c2 == 0.0 {
                        continue;
                    }
                    let m = [j1 as u8, (n - a) as u8, j2 as u8, a as u8];
                    *kn.0.entry(m).or_default() += Complex64::new(sign * binom * c1 * c2, 0.0);
                }
            }
        }
        total.add_scaled(&kn.mul(&tpow, dmax), scale);
    }
    let mut terms: Vec<(Mono, Complex64)> =
        total.0.into_iter().filter(|(_, c)| c.norm() > 0.0).collect();
    terms.sort_by_key(|(m, _)| *m);
    terms
}

/// Spectral derivative of what is left after removing the chord through the end values,
/// so constants and linear functions come out exact.
fn detrended_derivative(col: &[Complex64], step: f64) -> Vec<Complex64> {
    let n = col.len();
    if n < 2 {
        return vec![Complex64::new(0.0, 0.0); n];
    }
    let (a, b) = (col[0], col[n - 1]);
    let span = (n - 1) as f64;
    let rest: Vec<Complex64> =
        col.iter().enumerate().map(|(i, z)| z - (a + (b - a) * (i as f64 / span))).collect();
    let slope = (b - a) / (span * step);
    differentiate(&rest, step, Derivative::Spectral).into_iter().map(|z| z + slope).collect()
}

fn d_beta(values: &Array2<Complex64>, step: f64) -> Array2<Complex64> {
    let (np, nf) = values.dim();
    let cols: Vec<Vec<Complex64>> = (0..nf)
        .into_par_iter()
        .map(|n| detrended_derivative(&values.column(n).to_vec(), step))
        .collect();
    Array2::from_shape_fn((np, nf), |(p, n)| cols[n][p])
}

fn d_logf(values: &Array2<Complex64>, h: f64, scheme: Derivative) -> Array2<Complex64> {
    let (np, nf) = values.dim();
    let rows: Vec<Vec<Complex64>> = (0..np)
        .into_par_iter()
        .map(|p| differentiate(&values.row(p).to_vec(), h, scheme))
        .collect();
    Array2::from_shape_fn((np, nf), |(p, n)| rows[p][n])
}

/// `table[q][p] = d_x^q d_beta^p A` for `p + q <= max_degree`.
fn derivative_table(sym: &BetaSymbol, max_degree: usize, scheme: Derivative) -> Vec<Vec<Array2<Complex64>>> {
    let h = sym.fgrid.log_step();
    let db = sym.bgrid.step();
    let mut beta_col = vec![sym.values.clone()];
    for p in 1..=max_degree {
        let next = d_beta(&beta_col[p - 1], db);
        beta_col.push(next);
    }
    (0..=max_degree)
        .map(|q| {
            (0..=max_degree - q)
                .map(|p| {
                    let mut v = beta_col[p].clone();
                    for _ in 0..q {
                        v = d_logf(&v, h, scheme);
                    }
                    v
                })
                .collect()
        })
        .collect()
}

/// `wigner_map(weyl_map(A) weyl_map(B))` on the `(t, f)` rectangle of `A`.
pub fn star_product_operator(a: &PhaseSymbol, b: &PhaseSymbol) -> Result<PhaseSymbol> {
    a.check_same(b)?;
    let k = weyl_map(a).compose(&weyl_map(b))?;
    Ok(wigner_map(&k, a.tgrid))
}

/// Operator-route product of `(beta, f)` symbols.
pub fn star_product_operator_beta(a: &BetaSymbol, b: &BetaSymbol) -> Result<BetaSymbol> {
    a.check_same(b)?;
    let k = weyl_map_beta(a).compose(&weyl_map_beta(b))?;
    Ok(wigner_map_beta(&k, a.bgrid))
}

/// Derivative series truncated at order `cfg.order`.
pub fn star_product_series(a: &BetaSymbol, b: &BetaSymbol, cfg: &StarConfig) -> Result<BetaSymbol> {
    a.check_same(b)?;
    if cfg.order > MAX_ORDER {
        return Err(CalculusError::SeriesOrder { requested: cfg.order, max: MAX_ORDER });
    }
    let dmax = 2 * cfg.order + 1;
    let terms = series_terms(cfg.order);
    let ta = derivative_table(a, dmax, cfg.f_derivative);
    let tb = derivative_table(b, dmax, cfg.f_derivative);
    let values = terms
        .par_iter()
        .map(|(m, c)| {
            let (x1, b1, x2, b2) = (m[0] as usize, m[1] as usize, m[2] as usize, m[3] as usize);
            let mut v = &ta[x1][b1] * &tb[x2][b2];
            v.mapv_inplace(|z| z * c);
            v
        })
        .collect::<Vec<_>>()
        // summed in term order, so the result does not depend on the thread count
        .into_iter()
        .fold(Array2::zeros(a.values.dim()), |x, y| x + y);
    Ok(BetaSymbol { bgrid: a.bgrid, fgrid: a.fgrid, values })
}

/// A `beta` grid covering `beta = t f` over the rectangle, with step `dt f_min`.
pub fn beta_grid_for(tgrid: &TimeGrid, fgrid: &crate::grid::GeometricGrid) -> Result<BetaGrid> {
    let corners = [
        tgrid.t_min() * fgrid.f_min(),
        tgrid.t_min() * fgrid.f_max(),
        tgrid.t_max() * fgrid.f_min(),
        tgrid.t_max() * fgrid.f_max(),
    ];
    let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = tgrid.step() * fgrid.f_min();
    let n = (((hi - lo) / step).ceil() as usize + 1).clamp(8, 4096);
    TimeGrid::new(lo, hi, n)
}

/// `-2i pi (A * B - B * A)` for `(t, f)` symbols.
pub fn star_bracket(a: &PhaseSymbol, b: &PhaseSymbol, method: StarMethod, cfg: &StarConfig) -> Result<PhaseSymbol> {
    a.check_same(b)?;
    match method {
        StarMethod::Operator => {
            let ab = star_product_operator(a, b)?;
            let ba = star_product_operator(b, a)?;
            ab.zip_with(&ba, |x, y| (x - y) * Complex64::new(0.0, -2.0 * PI))
        }
        StarMethod::Series => {
            let bg = beta_grid_for(&a.tgrid, &a.fgrid)?;
            let out = star_bracket_beta(
                &BetaSymbol::from_phase(a, bg),
                &BetaSymbol::from_phase(b, bg),
                method,
                cfg,
            )?;
            Ok(out.to_phase(a.tgrid))
        }
    }
}

/// `-2i pi (A * B - B * A)` for `(beta, f)` symbols.
pub fn star_bracket_beta(a: &BetaSymbol, b: &BetaSymbol, method: StarMethod, cfg: &StarConfig) -> Result<BetaSymbol> {
    let (ab, ba) = match method {
        StarMethod::Operator => (star_product_operator_beta(a, b)?, star_product_operator_beta(b, a)?),
        StarMethod::Series => (star_product_series(a, b, cfg)?, star_product_series(b, a, cfg)?),
    };
    ab.zip_with(&ba, |x, y| (x - y) * Complex64::new(0.0, -2.0 * PI))
}

/// `f (A_beta B_f - A_f B_beta)`, written as `A_beta B_x - A_x B_beta` with `x = ln f`.
pub fn poisson_bracket_beta(a: &BetaSymbol, b: &BetaSymbol, scheme: Derivative) -> Result<BetaSymbol> {
    a.check_same(b)?;
    let h = a.fgrid.log_step();
    let db = a.bgrid.step();
    let (ab, ax) = (d_beta(&a.values, db), d_logf(&a.values, h, scheme));
    let (bb, bx) = (d_beta(&b.values, db), d_logf(&b.values, h, scheme));
    let values = &ab * &bx - &ax * &bb;
    Ok(BetaSymbol { bgrid: a.bgrid, fgrid: a.fgrid, values })
}

/// `A_t B_f - A_f B_t`, the same bracket in the `(t, f)` coordinates.
pub fn poisson_bracket(a: &PhaseSymbol, b: &PhaseSymbol) -> Result<PhaseSymbol> {
    a.check_same(b)?;
    let h = a.fgrid.log_step();
    let dt = a.tgrid.step();
    let fs = a.fgrid.freqs();
    let df = |v: &Array2<Complex64>| {
        let mut d = d_logf(v, h, Derivative::Stencil);
        for ((_, n), z) in d.indexed_iter_mut() {
            *z /= fs[n];
        }
        d
    };
    let (at, af) = (d_beta(&a.values, dt), df(&a.values));
    let (bt, bf) = (d_beta(&b.values, dt), df(&b.values));
    let values = &at * &bf - &af * &bt;
    Ok(PhaseSymbol { tgrid: a.tgrid, fgrid: a.fgrid, values })
}

/// `d/du ln lambda(u) = 1/u - 1/(e^u - 1)`.
pub fn d_ln_lambda(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        0.5 - u / 12.0 + u.powi(3) / 720.0
    } else {
        1.0 / u - 1.0 / u.exp_m1()
    }
}

/// Left factor of a product with the point distribution `delta(beta - beta0) delta(f - f0)`.
#[derive(Clone, Copy)]
pub enum DeltaFactor<'a> {
    /// The symbol `beta`.
    Beta,
    /// A symbol `g(f)` of the frequency alone.
    Profile(&'a (dyn Fn(f64) -> Complex64 + Sync)),
}

/// `A * delta_{beta0, f0}` as a linear functional on test symbols.
///
/// The product is a distribution; it is represented by its pairing
/// `\int (A * delta) X dbeta df / f` with smooth `X`.
#[derive(Clone, Copy)]
pub struct StarDelta<'a> {
    pub factor: DeltaFactor<'a>,
    pub beta0: f64,
    pub f0: f64,
}

pub fn star_beta_delta(beta0: f64, f0: f64) -> StarDelta<'static> {
    StarDelta { factor: DeltaFactor::Beta, beta0, f0 }
}

pub fn star_gf_delta(g: &(dyn Fn(f64) -> Complex64 + Sync), beta0: f64, f0: f64) -> StarDelta<'_> {
    StarDelta { factor: DeltaFactor::Profile(g), beta0, f0 }
}

impl StarDelta<'_> {
    /// `\int (A * delta) X dbeta df / f` by quadrature on a uniform `u` lattice.
    pub fn pair(&self, x: &BetaSymbol, cfg: &StarConfig) -> Result<Complex64> {
        let bg = x.bgrid;
        if !(self.beta0 >= bg.t_min() && self.beta0 <= bg.t_max())
            || !(self.f0 >= x.fgrid.f_min() && self.f0 <= x.fgrid.f_max())
        {
            return domain(format!("({}, {}) is outside the symbol grid", self.beta0, self.f0));
        }
        let pos = x.fgrid.position(self.f0);
        let at_f0 = |v: &Array2<Complex64>| -> Vec<Complex64> {
            (0..bg.len()).map(|p| interp::sample(&v.row(p).to_vec(), pos)).collect()
        };
        let u_max = cfg.u_max.unwrap_or(0.5 / bg.step());
        let nu = cfg.u_points.unwrap_or(4 * bg.len() + 1).max(3);
        let du = 2.0 * u_max / (nu - 1) as f64;
        let wb = bg.weights();
        let bs = bg.times();
        // \int e^{-2i pi u beta} col(beta) dbeta
        let fourier = |col: &[Complex64], u: f64| -> Complex64 {
            col.iter()
                .zip(&wb)
                .zip(&bs)
                .map(|((z, w), b)| z * Complex64::from_polar(*w, -2.0 * PI * u * b))
                .sum()
        };
        let trap = |k: usize| if k == 0 || k + 1 == nu { 0.5 * du } else { du };
        let col = at_f0(&x.values);
        match self.factor {
            DeltaFactor::Beta => {
                let dx = d_logf(&x.values, x.fgrid.log_step(), cfg.f_derivative);
                // d_f X = d_x X / f
                let dcol: Vec<Complex64> = at_f0(&dx).iter().map(|z| z / self.f0).collect();
                let local = self.beta0 * interp::sample(&col, bg.position(self.beta0)) / self.f0;
                let spread: Complex64 = (0..nu)
                    .into_par_iter()
                    .map(|k| {
                        let u = -u_max + k as f64 * du;
                        fourier(&dcol, u)
                            * Complex64::from_polar(d_ln_lambda(u) * trap(k), 2.0 * PI * u * self.beta0)
                    })
                    .sum();
                Ok(local + spread / Complex64::new(0.0, 2.0 * PI))
            }
            DeltaFactor::Profile(g) => {
                let s: Complex64 = (0..nu)
                    .into_par_iter()
                    .map(|k| {
                        let u = -u_max + k as f64 * du;
                        g(self.f0 * lambda(-u))
                            * fourier(&col, u)
                            * Complex64::from_polar(trap(k), 2.0 * PI * u * self.beta0)
                    })
                    .sum();
                Ok(s / self.f0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, GeometricGrid, DEFAULT_R};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn t_coefficients_match_closed_form() {
        let t = t_coefficients(6);
        let v = |a: usize, b: usize| t[a][b].to_f64().unwrap();
        assert_eq!(t[0][0], rat(1, 1));
        assert!((v(1, 0) + v(0, 1)).abs() < 1e-15);
        for (u1, u2) in [(0.1f64, 0.05f64), (-0.08, 0.12), (0.2, -0.15)] {
            let direct = 2.0 * (u1 * u1.exp() * u2.exp_m1() - u2 * u1.exp_m1())
                / (u1 * u2 * (u1 + u2).exp_m1());
            let mut s = 0.0;
            for (a, row) in t.iter().enumerate() {
                for (b, cc) in row.iter().enumerate() {
                    s += cc.to_f64().unwrap() * u1.powi(a as i32) * u2.powi(b as i32);
                }
            }
            assert!((s - direct).abs() < 1e-7, "{u1} {u2}: {s} vs {direct}");
        }
    }

    #[test]
    fn t_generating_is_continuous_across_branches() {
        for u1 in [-2.0, -0.7, 0.3, 1.5] {
            for s in [9e-5, -9e-5] {
                let u2 = -u1 + s;
                let taylor = t_generating(u1, u2);
                let direct = 2.0 * (u1.exp() * e_ratio(u2) - e_ratio(u1)) / (s * e_ratio(s));
                assert!((taylor - direct).abs() < 1e-9, "{u1}: {taylor} {direct}");
            }
        }
        let near = t_generating(0.2499, 0.1);
        let far = t_generating(0.2501, 0.1);
        assert!((near - far).abs() < 1e-4);
    }

    #[test]
    fn h_function_limits() {
        assert_eq!(h_function(0.3, 0.6, 0.5, 1.0), 0.0);
        let (v1, v2) = (0.7, -1.3);
        for eps in [1e-2, 1e-3] {
            let (u1, u2) = (0.4 * eps, -0.9 * eps);
            let lead = 0.5 * (v1 * u2 - v2 * u1);
            assert!((h_function(u1, v1, u2, v2) - lead).abs() < 2.0 * eps * eps, "{eps}");
        }
        let (u1, u2) = (0.8, -0.3);
        let swapped = (v2 * u1 - v1 * u2) * (u2 * u2.exp() * u1.exp_m1() - u1 * u2.exp_m1())
            / (u1 * u2 * (u1 + u2).exp_m1());
        assert!((h_function(u2, v2, u1, v1) - swapped).abs() < 1e-12);
    }

    #[test]
    fn falling_factorials() {
        assert_eq!(falling(0), vec![1.0]);
        assert_eq!(falling(3), vec![0.0, 2.0, -3.0, 1.0]);
    }

    fn grids() -> (BetaGrid, GeometricGrid) {
        (TimeGrid::new(-12.0, 12.0, 256).unwrap(), make_grid(0.25, 4.0, 128, DEFAULT_R).unwrap())
    }

    fn bump(b0: f64, wb: f64, f0: f64, s: f64) -> impl Fn(f64, f64) -> Complex64 {
        move |b, f| {
            let x = (f / f0).ln() / s;
            let y = (b - b0) / wb;
            c((-0.5 * (x * x + y * y)).exp())
        }
    }


    fn rel(a: &BetaSymbol, b: &BetaSymbol) -> f64 {
        a.zip_with(b, |x, y| x - y).unwrap().l2() / b.l2()
    }

    #[test]
    fn low_order_t_coefficients() {
        let t = t_coefficients(3);
        assert_eq!(t[1][0], rat(1, 6));
        assert_eq!(t[0][1], rat(-1, 6));
        assert_eq!(t[1][1], rat(-1, 12));
        assert!(t[2][0].is_zero() && t[0][2].is_zero());
        // (u2 - u1)(u1^2 + u2^2 + 5 u1 u2) / 360
        assert_eq!(t[3][0], rat(-1, 360));
        assert_eq!(t[2][1], rat(-4, 360));
        assert_eq!(t[1][2], rat(4, 360));
        assert_eq!(t[0][3], rat(1, 360));
    }

    #[test]
    fn series_identity_and_pointwise_order() {
        let (bg, fg) = grids();
        let one = BetaSymbol::from_fn(bg, fg, |_, _| c(1.0));
        let b = BetaSymbol::from_fn(bg, fg, bump(0.5, 1.0, 1.2, 0.3));
        let a = BetaSymbol::from_fn(bg, fg, bump(-0.5, 1.3, 0.9, 0.25));
        for order in 0..=MAX_ORDER {
            let cfg = StarConfig { order, ..Default::default() };
            assert!(rel(&star_product_series(&one, &b, &cfg).unwrap(), &b) < 1e-12);
        }
        let p0 = star_product_series(&a, &b, &StarConfig { order: 0, ..Default::default() }).unwrap();
        assert_eq!(p0, a.zip_with(&b, |x, y| x * y).unwrap());
        let too_far = StarConfig { order: MAX_ORDER + 1, ..Default::default() };
        assert!(matches!(
            star_product_series(&a, &b, &too_far),
            Err(CalculusError::SeriesOrder { .. })
        ));
    }

    #[test]
    fn series_approaches_operator_route() {
        let (bg, fg) = grids();
        let a = BetaSymbol::from_fn(bg, fg, bump(0.3, 1.2, 1.0, 0.3));
        let b = BetaSymbol::from_fn(bg, fg, bump(-0.4, 1.0, 1.1, 0.25));
        let oracle = star_product_operator_beta(&a, &b).unwrap();
        let errs: Vec<f64> = (0..3)
            .map(|order| {
                let cfg = StarConfig { order, ..Default::default() };
                rel(&star_product_series(&a, &b, &cfg).unwrap(), &oracle)
            })
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 1e-2, "{errs:?}");
    }

    #[test]
    fn operator_route_is_associative_and_not_real() {
        let bg = TimeGrid::new(-8.0, 8.0, 96).unwrap();
        let fg = make_grid(0.3, 3.0, 64, DEFAULT_R).unwrap();
        let a = BetaSymbol::from_fn(bg, fg, bump(0.5, 1.0, 1.0, 0.3));
        let b = BetaSymbol::from_fn(bg, fg, bump(-0.5, 1.2, 0.9, 0.3));
        let d = BetaSymbol::from_fn(bg, fg, bump(0.0, 0.9, 1.2, 0.25));
        let (ka, kb, kd) = (weyl_map_beta(&a), weyl_map_beta(&b), weyl_map_beta(&d));
        let left = ka.compose(&kb).unwrap().compose(&kd).unwrap();
        let right = ka.compose(&kb.compose(&kd).unwrap()).unwrap();
        let diff = (&left.entries - &right.entries).norm() / left.entries.norm();
        assert!(diff < 1e-12, "{diff}");
        let ab = star_product_operator_beta(&a, &b).unwrap();
        let ba = star_product_operator_beta(&b, &a).unwrap();
        let imag = ab.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let sym = ab.zip_with(&ba, |x, y| x + y).unwrap();
        let sym_imag = sym.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let scale = ab.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(imag > 1e-2 * scale, "{imag} {scale}");
        assert!(sym_imag < 1e-6 * scale, "{sym_imag} {scale}");
    }

    fn node_value(s: &BetaSymbol, beta0: f64, f0: f64) -> Complex64 {
        let p = s.bgrid.position(beta0).round() as usize;
        let n = s.fgrid.position(f0).round() as usize;
        s.values[[p, n]]
    }

    #[test]
    fn delta_functionals_match_operator_oracle() {
        let bg = TimeGrid::new(-10.0, 10.0, 201).unwrap();
        let fg = make_grid(0.25, 4.0, 128, DEFAULT_R).unwrap();
        let x = BetaSymbol::from_fn(bg, fg, |b, f| {
            let l = (f / 1.1).ln() / 0.3;
            let y = (b - 0.4) / 1.3;
            Complex64::new((-0.5 * (l * l + y * y)).exp(), 0.2 * (-0.5 * (l * l + y * y)).exp() * y)
        });
        let beta0 = bg.time(110);
        let f0 = fg.freq(66);
        let cfg = StarConfig::default();
        let kx = weyl_map_beta(&x);
        let kb = crate::correspondence::OperatorKernel::from_action(
            fg,
            &crate::group::beta_matrix(&fg, Derivative::Spectral),
        );
        let oracle = node_value(&wigner_map_beta(&kx.compose(&kb).unwrap(), bg), beta0, f0) / f0;
        let got = star_beta_delta(beta0, f0).pair(&x, &cfg).unwrap();
        assert!((got - oracle).norm() < 1e-4 * oracle.norm(), "{got} vs {oracle}");
        let g = |f: f64| c((-(f - 1.0).powi(2)).exp() + 0.3 * f);
        let kg = crate::correspondence::OperatorKernel::multiplier(fg, g);
        let oracle = node_value(&wigner_map_beta(&kx.compose(&kg).unwrap(), bg), beta0, f0) / f0;
        let got = star_gf_delta(&g, beta0, f0).pair(&x, &cfg).unwrap();
        assert!((got - oracle).norm() < 1e-4 * oracle.norm(), "{got} vs {oracle}");
        let one = |_: f64| c(1.0);
        let plain = star_gf_delta(&one, beta0, f0).pair(&x, &cfg).unwrap();
        let direct = node_value(&x, beta0, f0) / f0;
        assert!((plain - direct).norm() < 1e-6, "{plain} vs {direct}");
        assert!((d_ln_lambda(0.0) - 0.5).abs() < 1e-15);
        assert!((d_ln_lambda(1e-3 * 1.01) - d_ln_lambda(1e-3 * 0.99)).abs() < 1e-4);
    }

    #[test]
    fn preferred_observables_have_poisson_brackets() {
        use crate::grid::smooth_plateau;
        let bg = TimeGrid::new(-12.0, 12.0, 192).unwrap();
        let fg = make_grid(0.125, 8.0, 128, DEFAULT_R).unwrap();
        let win = |b: f64, f: f64| smooth_plateau(b, 6.0, 10.5) * smooth_plateau(f.ln(), 1.2, 1.9);
        let y = BetaSymbol::from_fn(bg, fg, bump(0.4, 1.1, 1.1, 0.3));
        let ratio = |x: &dyn Fn(f64, f64) -> f64| {
            let xs = BetaSymbol::from_fn(bg, fg, |b, f| c(x(b, f) * win(b, f)));
            let sb = star_bracket_beta(&xs, &y, StarMethod::Operator, &StarConfig::default()).unwrap();
            rel(&sb, &poisson_bracket_beta(&xs, &y, Derivative::Stencil).unwrap())
        };
        let preferred = [ratio(&|b, _| b), ratio(&|_, f| f), ratio(&|_, f: f64| f.ln())];
        for r in preferred {
            assert!(r < 1e-3, "{preferred:?}");
        }
        let generic = ratio(&|b, _| b * b);
        assert!(generic > 10.0 * preferred.iter().copied().fold(0.0, f64::max), "{generic}");
    }

    #[test]
    fn series_bracket_leads_with_poisson() {
        let (bg, fg) = grids();
        let a = BetaSymbol::from_fn(bg, fg, bump(0.3, 2.0, 1.0, 0.5));
        let b = BetaSymbol::from_fn(bg, fg, bump(-0.4, 1.8, 1.1, 0.45));
        let pb = poisson_bracket_beta(&a, &b, Derivative::Stencil).unwrap();
        let cfg = StarConfig { order: 1, ..Default::default() };
        let sb = star_bracket_beta(&a, &b, StarMethod::Series, &cfg).unwrap();
        assert!(rel(&sb, &pb) < 5e-2, "{}", rel(&sb, &pb));
        let imag = sb.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(imag < 1e-10, "{imag}");
    }

    #[test]
    fn poisson_bracket_properties() {
        let (bg, fg) = grids();
        let beta = BetaSymbol::from_fn(bg, fg, |b, _| c(b));
        let f = BetaSymbol::from_fn(bg, fg, |_, f| c(f));
        let pb = poisson_bracket_beta(&beta, &f, Derivative::Stencil).unwrap();
        assert!(rel(&pb, &f) < 1e-7, "{}", rel(&pb, &f));
        let a = BetaSymbol::from_fn(bg, fg, bump(0.3, 1.2, 1.0, 0.3));
        let b = BetaSymbol::from_fn(bg, fg, bump(-0.4, 1.0, 1.1, 0.25));
        let d = BetaSymbol::from_fn(bg, fg, bump(0.1, 1.5, 0.9, 0.35));
        let ab = poisson_bracket_beta(&a, &b, Derivative::Stencil).unwrap();
        let ba = poisson_bracket_beta(&b, &a, Derivative::Stencil).unwrap();
        assert!(ab.zip_with(&ba, |x, y| x + y).unwrap().values.iter().all(|z| z.norm() == 0.0));
        let pbj = |x: &BetaSymbol, y: &BetaSymbol| poisson_bracket_beta(x, y, Derivative::Stencil).unwrap();
        let j1 = pbj(&a, &pbj(&b, &d));
        let j2 = pbj(&b, &pbj(&d, &a));
        let j3 = pbj(&d, &pbj(&a, &b));
        let sum = j1.zip_with(&j2, |x, y| x + y).unwrap().zip_with(&j3, |x, y| x + y).unwrap();
        let jacobi = sum.l2() / j1.l2();
        assert!(jacobi < 1e-4, "{jacobi}");
    }

    #[test]
    fn poisson_bracket_agrees_between_coordinates() {
        let tg = TimeGrid::new(-6.0, 6.0, 241).unwrap();
        let fg = make_grid(0.25, 4.0, 128, DEFAULT_R).unwrap();
        let a = crate::correspondence::LogGaussian { f0: 1.0, sigma_log: 0.3, t0: 0.4, sigma_t: 1.0 };
        let b = crate::correspondence::LogGaussian { f0: 1.2, sigma_log: 0.25, t0: -0.3, sigma_t: 0.8 };
        let (pa, pbs) = (a.phase_symbol(tg, fg), b.phase_symbol(tg, fg));
        let direct = poisson_bracket(&pa, &pbs).unwrap();
        let bg = TimeGrid::new(-24.0, 24.0, 1201).unwrap();
        let via = poisson_bracket_beta(
            &BetaSymbol::from_phase(&pa, bg),
            &BetaSymbol::from_phase(&pbs, bg),
            Derivative::Stencil,
        )
        .unwrap()
        .to_phase(tg);
        let err = direct.zip_with(&via, |x, y| x - y).unwrap().l2() / direct.l2();
        assert!(err < 1e-3, "{err}");
    }
}
