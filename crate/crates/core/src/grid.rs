//! Discretization of the positive-frequency half-line and of the half-plane.
//!
//! Frequencies are sampled geometrically, `f_n = f_min * rho^n`, so that
//! dilations act as shifts of the index. Integrals over frequency are taken
//! in the variable `x = ln f`, where the measure `f^{2r+1} df` becomes
//! `f^{2r+2} dx`.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, CalculusError, Result};
use crate::interp::{self, Interpolation};

/// Geometric frequency grid with the weight exponent `r` of the measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricGrid {
    f_min: f64,
    f_max: f64,
    n_freq: usize,
    r: f64,
}

/// Default weight exponent: the measure `f^{2r+1} df` reduces to `df`.
pub const DEFAULT_R: f64 = -0.5;

impl GeometricGrid {
    pub fn new(f_min: f64, f_max: f64, n_freq: usize, r: f64) -> Result<Self> {
        if !f_min.is_finite() || f_min <= 0.0 {
            return domain(format!("f_min must be positive, got {f_min}"));
        }
        if !f_max.is_finite() || f_max <= f_min {
            return domain(format!("f_max must exceed f_min, got {f_max} <= {f_min}"));
        }
        if n_freq < 2 {
            return domain(format!("n_freq must be at least 2, got {n_freq}"));
        }
        if !r.is_finite() {
            return domain("r must be finite");
        }
        Ok(GeometricGrid { f_min, f_max, n_freq, r })
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn len(&self) -> usize {
        self.n_freq
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Spacing of `ln f`.
    pub fn log_step(&self) -> f64 {
        (self.f_max / self.f_min).ln() / (self.n_freq - 1) as f64
    }

    /// Common ratio of successive frequencies.
    pub fn ratio(&self) -> f64 {
        self.log_step().exp()
    }

    pub fn freq(&self, i: usize) -> f64 {
        if i + 1 == self.n_freq {
            self.f_max
        } else {
            self.f_min * (i as f64 * self.log_step()).exp()
        }
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n_freq).map(|i| self.freq(i)).collect()
    }

    /// `ln f_i`.
    pub fn log_freq(&self, i: usize) -> f64 {
        self.f_min.ln() + i as f64 * self.log_step()
    }

    /// Fractional index of frequency `f` (may lie outside `[0, n-1]`).
    pub fn position(&self, f: f64) -> f64 {
        (f / self.f_min).ln() / self.log_step()
    }

    /// Fractional index of log-frequency `x`.
    pub fn position_log(&self, x: f64) -> f64 {
        (x - self.f_min.ln()) / self.log_step()
    }

    /// Quadrature coefficients in `x = ln f` (without the measure factor).
    ///
    /// Trapezoid in the interior; for seven or more nodes the three end
    /// coefficients on each side carry the fourth-order correction
    /// `3/8, 7/6, 23/24`.
    pub fn log_coefficients(&self) -> Vec<f64> {
        let h = self.log_step();
        let n = self.n_freq;
        let mut c = vec![h; n];
        if n >= 7 {
            for (k, e) in [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0].iter().enumerate() {
                c[k] = h * e;
                c[n - 1 - k] = h * e;
            }
        } else {
            c[0] = 0.5 * h;
            c[n - 1] = 0.5 * h;
        }
        c
    }

    /// Weights `w_n` of the measure `f^{2r+1} df`.
    pub fn weights(&self) -> Vec<f64> {
        let a = 2.0 * self.r + 2.0;
        self.log_coefficients()
            .into_iter()
            .enumerate()
            .map(|(i, c)| c * self.freq(i).powf(a))
            .collect()
    }

    pub fn same_as(&self, other: &GeometricGrid) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        self.n_freq == other.n_freq
            && close(self.f_min, other.f_min)
            && close(self.f_max, other.f_max)
            && close(self.r, other.r)
    }

    pub(crate) fn check_same(&self, other: &GeometricGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(CalculusError::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Build a geometric grid.
pub fn make_grid(f_min: f64, f_max: f64, n_freq: usize, r: f64) -> Result<GeometricGrid> {
    GeometricGrid::new(f_min, f_max, n_freq, r)
}

/// Uniform time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_min: f64,
    t_max: f64,
    n_time: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, n_time: usize) -> Result<Self> {
        if n_time < 2 {
            return domain(format!("n_time must be at least 2, got {n_time}"));
        }
        if !t_min.is_finite() || !t_max.is_finite() || t_max <= t_min {
            return domain(format!("t_max must exceed t_min, got [{t_min}, {t_max}]"));
        }
        Ok(TimeGrid { t_min, t_max, n_time })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.n_time
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.t_max - self.t_min) / (self.n_time - 1) as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        self.t_min + m as f64 * self.step()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_time).map(|m| self.time(m)).collect()
    }

    pub fn position(&self, t: f64) -> f64 {
        (t - self.t_min) / self.step()
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let dt = self.step();
        let mut w = vec![dt; self.n_time];
        w[0] *= 0.5;
        w[self.n_time - 1] *= 0.5;
        w
    }
}

/// Fraction of squared norm lost when an operation pushed samples off the grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Truncation {
    pub dropped_points: usize,
    pub mass_fraction: f64,
}

impl Truncation {
    pub fn merge(self, other: Truncation) -> Truncation {
        Truncation {
            dropped_points: self.dropped_points + other.dropped_points,
            mass_fraction: self.mass_fraction.max(other.mass_fraction),
        }
    }
}

/// Complex amplitudes over a geometric grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub grid: GeometricGrid,
    pub values: Vec<Complex64>,
}

impl Signal {
    pub fn new(grid: GeometricGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return domain(format!(
                "signal has {} samples for a grid of {}",
                values.len(),
                grid.len()
            ));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("signal contains non-finite samples");
        }
        Ok(Signal { grid, values })
    }

    pub fn zeros(grid: GeometricGrid) -> Self {
        Signal { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Sample a closure of frequency.
    pub fn from_fn(grid: GeometricGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Signal { grid, values: grid.freqs().into_iter().map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, z)| w * z.norm_sqr())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Signal {
        Signal { grid: self.grid, values: self.values.iter().map(|z| z * c).collect() }
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.grid.check_same(&other.grid)?;
        Ok(Signal {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Pointwise product with a real window.
    pub fn window(&self, w: &[f64]) -> Signal {
        Signal {
            grid: self.grid,
            values: self.values.iter().zip(w).map(|(z, w)| z * *w).collect(),
        }
    }

    /// Largest modulus of the difference to `other`, divided by `other`'s largest modulus.
    pub fn max_rel_diff(&self, other: &Signal) -> f64 {
        let scale = other.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let d = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if scale > 0.0 {
            d / scale
        } else {
            d
        }
    }
}

/// Weighted scalar product `sum S(f_n) conj(S2(f_n)) w_n`.
pub fn inner_product(s: &Signal, s2: &Signal) -> Result<Complex64> {
    s.grid.check_same(&s2.grid)?;
    Ok(s
        .grid
        .weights()
        .iter()
        .zip(s.values.iter().zip(&s2.values))
        .map(|(w, (a, b))| a * b.conj() * *w)
        .sum())
}

/// Analytic signal of a real time series, resampled onto `grid`.
///
/// The series is transformed with a DFT; bins of positive frequency are
/// doubled and everything else is dropped, then the resulting positive-band
/// sequence is evaluated at the grid frequencies through its discrete-time
/// Fourier transform (band-limited interpolation). Frequencies above the
/// Nyquist limit are zero.
pub fn analytic_from_real(samples: &[f64], sample_rate: f64, grid: GeometricGrid) -> Result<Signal> {
    let data: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    analytic_from_complex(&data, sample_rate, grid)
}

/// Same as [`analytic_from_real`] for complex samples; negative-frequency bins are discarded.
pub fn analytic_from_complex(
    samples: &[Complex64],
    sample_rate: f64,
    grid: GeometricGrid,
) -> Result<Signal> {
    if samples.is_empty() {
        return Err(CalculusError::Empty("time series"));
    }
    if sample_rate.is_nan() || sample_rate <= 0.0 {
        return domain(format!("sample rate must be positive, got {sample_rate}"));
    }
    let n = samples.len();
    let mut spec = samples.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut spec);
    // keep strictly positive bins below Nyquist
    let top = (n - 1) / 2;
    let mut band = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=top {
        band[k] = spec[k] * 2.0;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut band);
    let dt = 1.0 / sample_rate;
    for z in band.iter_mut() {
        *z /= n as f64;
    }
    let nyquist = 0.5 * sample_rate;
    let values = grid
        .freqs()
        .into_iter()
        .map(|f| {
            if f >= nyquist {
                return Complex64::new(0.0, 0.0);
            }
            let step = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * dt);
            let mut ph = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for z in &band {
                acc += z * ph;
                ph *= step;
            }
            acc * dt
        })
        .collect();
    Signal::new(grid, values)
}

/// Values of `S` at `e^u f_n`.
pub fn dilate_sample(s: &Signal, log_factor: f64) -> Signal {
    dilate_sample_reported(s, log_factor, Interpolation::Cubic).0
}

/// [`dilate_sample`] with a chosen scheme and the truncation report.
///
/// The interpolated quantity is `f^{r+1} S(f)` as a function of `ln f`.
pub fn dilate_sample_reported(
    s: &Signal,
    log_factor: f64,
    scheme: Interpolation,
) -> (Signal, Truncation) {
    let grid = s.grid;
    if log_factor == 0.0 {
        return (s.clone(), Truncation::default());
    }
    let a = grid.r() + 1.0;
    let reduced: Vec<Complex64> = s
        .values
        .iter()
        .enumerate()
        .map(|(i, z)| z * grid.freq(i).powf(a))
        .collect();
    let shift = log_factor / grid.log_step();
    let shifted = match scheme {
        Interpolation::Cubic => (0..grid.len())
            .map(|i| interp::sample(&reduced, i as f64 + shift))
            .collect::<Vec<_>>(),
        Interpolation::BandLimited => interp::bandlimited_shift(&reduced, shift),
    };
    let dropped = (0..grid.len())
        .filter(|&i| {
            let p = i as f64 + shift;
            p < -interp::SNAP || p > (grid.len() - 1) as f64 + interp::SNAP
        })
        .count();
    let values: Vec<Complex64> = shifted
        .into_iter()
        .enumerate()
        .map(|(i, z)| z * (grid.log_freq(i) + log_factor).mul_add(-a, 0.0).exp())
        .collect();
    let out = Signal { grid, values };
    let before = s.norm_sqr();
    let after = out.norm_sqr() * (2.0 * a * log_factor).exp();
    let mass_fraction = if before > 0.0 { (1.0 - after / before).max(0.0) } else { 0.0 };
    (out, Truncation { dropped_points: dropped, mass_fraction })
}

/// Smooth bump equal to one on the middle of the log-frequency range.
///
/// Supported on the central `fraction` of `[ln f_min, ln f_max]`; it rises
/// over the outer tenth of that support on each side with the quintic
/// smoothstep, so it is C^2.
pub fn interior_window(grid: &GeometricGrid, fraction: f64) -> Vec<f64> {
    let n = grid.len();
    let span = (n - 1) as f64;
    let half = 0.5 * fraction * span;
    let mid = 0.5 * span;
    let ramp = 0.2 * half;
    (0..n)
        .map(|i| {
            let d = (i as f64 - mid).abs();
            if d >= half {
                0.0
            } else if d <= half - ramp {
                1.0
            } else {
                let s = (half - d) / ramp;
                s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
            }
        })
        .collect()
}

/// One on `|x| <= inner`, zero beyond `outer`, quintic smoothstep in between.
pub fn smooth_plateau(x: f64, inner: f64, outer: f64) -> f64 {
    let d = x.abs();
    if d <= inner {
        1.0
    } else if d >= outer {
        0.0
    } else {
        let s = (outer - d) / (outer - inner);
        s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

/// Complex values on a uniform-time by geometric-frequency rectangle, indexed `[m, n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSymbol {
    pub tgrid: TimeGrid,
    pub fgrid: GeometricGrid,
    pub values: Array2<Complex64>,
}

impl PhaseSymbol {
    pub fn new(tgrid: TimeGrid, fgrid: GeometricGrid, values: Array2<Complex64>) -> Result<Self> {
        if values.dim() != (tgrid.len(), fgrid.len()) {
            return domain(format!(
                "symbol shape {:?} does not match grids ({}, {})",
                values.dim(),
                tgrid.len(),
                fgrid.len()
            ));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return domain("symbol contains non-finite values");
        }
        Ok(PhaseSymbol { tgrid, fgrid, values })
    }

    pub fn from_fn(tgrid: TimeGrid, fgrid: GeometricGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let ts = tgrid.times();
        let fs = fgrid.freqs();
        let values = Array2::from_shape_fn((ts.len(), fs.len()), |(m, n)| f(ts[m], fs[n]));
        PhaseSymbol { tgrid, fgrid, values }
    }

    pub fn check_same(&self, other: &PhaseSymbol) -> Result<()> {
        self.fgrid.check_same(&other.fgrid)?;
        if self.tgrid != other.tgrid {
            return Err(CalculusError::GridMismatch(format!(
                "{:?} vs {:?}",
                self.tgrid, other.tgrid
            )));
        }
        Ok(())
    }

    /// Quadrature weights of `dt df`, indexed `[m, n]`.
    pub fn area_weights(&self) -> Array2<f64> {
        let wt = self.tgrid.weights();
        let cf = self.fgrid.log_coefficients();
        let fs = self.fgrid.freqs();
        Array2::from_shape_fn(self.values.dim(), |(m, n)| wt[m] * cf[n] * fs[n])
    }

    /// `\int A conj(B) dt df`.
    pub fn pairing(&self, other: &PhaseSymbol) -> Result<Complex64> {
        self.check_same(other)?;
        let w = self.area_weights();
        Ok(ndarray::Zip::from(&self.values)
            .and(&other.values)
            .and(&w)
            .fold(Complex64::new(0.0, 0.0), |acc, a, b, w| acc + a * b.conj() * *w))
    }

    /// `\int A dt df`.
    pub fn integral(&self) -> Complex64 {
        let w = self.area_weights();
        ndarray::Zip::from(&self.values)
            .and(&w)
            .fold(Complex64::new(0.0, 0.0), |acc, a, w| acc + a * *w)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> PhaseSymbol {
        PhaseSymbol { tgrid: self.tgrid, fgrid: self.fgrid, values: self.values.mapv(f) }
    }

    pub fn zip_with(
        &self,
        other: &PhaseSymbol,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<PhaseSymbol> {
        self.check_same(other)?;
        let mut values = self.values.clone();
        ndarray::Zip::from(&mut values).and(&other.values).for_each(|a, b| *a = f(*a, *b));
        Ok(PhaseSymbol { tgrid: self.tgrid, fgrid: self.fgrid, values })
    }

    /// Weighted L2 norm over the rectangle.
    pub fn l2(&self) -> f64 {
        self.pairing(self).map(|z| z.re.sqrt()).unwrap_or(0.0)
    }

    /// Evaluate at an arbitrary point by cubic interpolation in `t` and `ln f`.
    pub fn interpolate(&self, t: f64, f: f64) -> Complex64 {
        if f.is_nan() || f <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let (Some(st), Some(sf)) = (
            interp::stencil(self.tgrid.position(t), self.tgrid.len()),
            interp::stencil(self.fgrid.position(f), self.fgrid.len()),
        ) else {
            return Complex64::new(0.0, 0.0);
        };
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, wm) in st.iter() {
            for (n, wn) in sf.iter() {
                acc += self.values[[m, n]] * (wm * wn);
            }
        }
        acc
    }
}

/// Uniform grid used for the `beta = t f` coordinate.
pub type BetaGrid = TimeGrid;

/// A phase-space function in the coordinates `(beta, f)`, indexed `[p, n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSymbol {
    pub bgrid: BetaGrid,
    pub fgrid: GeometricGrid,
    pub values: Array2<Complex64>,
}

impl BetaSymbol {
    pub fn new(bgrid: BetaGrid, fgrid: GeometricGrid, values: Array2<Complex64>) -> Result<Self> {
        if values.dim() != (bgrid.len(), fgrid.len()) {
            return domain(format!(
                "symbol shape {:?} does not match grids ({}, {})",
                values.dim(),
                bgrid.len(),
                fgrid.len()
            ));
        }
        Ok(BetaSymbol { bgrid, fgrid, values })
    }

    pub fn from_fn(bgrid: BetaGrid, fgrid: GeometricGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let bs = bgrid.times();
        let fs = fgrid.freqs();
        let values = Array2::from_shape_fn((bs.len(), fs.len()), |(p, n)| f(bs[p], fs[n]));
        BetaSymbol { bgrid, fgrid, values }
    }

    /// Resample a `(t, f)` symbol at `t = beta / f`.
    pub fn from_phase(sym: &PhaseSymbol, bgrid: BetaGrid) -> Self {
        let fs = sym.fgrid.freqs();
        let bs = bgrid.times();
        let mut values = Array2::zeros((bs.len(), fs.len()));
        for (n, f) in fs.iter().enumerate() {
            let col: Vec<Complex64> = sym.values.column(n).to_vec();
            for (p, b) in bs.iter().enumerate() {
                values[[p, n]] = interp::sample(&col, sym.tgrid.position(b / f));
            }
        }
        BetaSymbol { bgrid, fgrid: sym.fgrid, values }
    }

    /// Resample onto `(t, f)` at `beta = t f`.
    pub fn to_phase(&self, tgrid: TimeGrid) -> PhaseSymbol {
        let fs = self.fgrid.freqs();
        let ts = tgrid.times();
        let mut values = Array2::zeros((ts.len(), fs.len()));
        for (n, f) in fs.iter().enumerate() {
            let col: Vec<Complex64> = self.values.column(n).to_vec();
            for (m, t) in ts.iter().enumerate() {
                values[[m, n]] = interp::sample(&col, self.bgrid.position(t * f));
            }
        }
        PhaseSymbol { tgrid, fgrid: self.fgrid, values }
    }

    pub fn check_same(&self, other: &BetaSymbol) -> Result<()> {
        self.fgrid.check_same(&other.fgrid)?;
        if self.bgrid != other.bgrid {
            return Err(CalculusError::GridMismatch(format!(
                "{:?} vs {:?}",
                self.bgrid, other.bgrid
            )));
        }
        Ok(())
    }

    pub fn zip_with(
        &self,
        other: &BetaSymbol,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<BetaSymbol> {
        self.check_same(other)?;
        let mut values = self.values.clone();
        ndarray::Zip::from(&mut values).and(&other.values).for_each(|a, b| *a = f(*a, *b));
        Ok(BetaSymbol { bgrid: self.bgrid, fgrid: self.fgrid, values })
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> BetaSymbol {
        BetaSymbol { bgrid: self.bgrid, fgrid: self.fgrid, values: self.values.mapv(f) }
    }

    /// Quadrature weights of `dbeta df / f`, indexed `[p, n]`.
    pub fn area_weights(&self) -> Array2<f64> {
        let wb = self.bgrid.weights();
        let cf = self.fgrid.log_coefficients();
        Array2::from_shape_fn(self.values.dim(), |(p, n)| wb[p] * cf[n])
    }

    /// `\int A conj(B) dbeta df / f`, equal to the `dt df` pairing of the `(t, f)` forms.
    pub fn pairing(&self, other: &BetaSymbol) -> Result<Complex64> {
        self.check_same(other)?;
        let w = self.area_weights();
        Ok(ndarray::Zip::from(&self.values)
            .and(&other.values)
            .and(&w)
            .fold(Complex64::new(0.0, 0.0), |acc, a, b, w| acc + a * b.conj() * *w))
    }

    pub fn l2(&self) -> f64 {
        self.pairing(self).map(|z| z.re.sqrt()).unwrap_or(0.0)
    }

    /// Largest modulus, restricted to frequency indices where `mask` is nonzero.
    pub fn max_abs_masked(&self, mask: &[f64]) -> f64 {
        let mut m = 0.0f64;
        for ((_, n), z) in self.values.indexed_iter() {
            if mask[n] != 0.0 {
                m = m.max(z.norm());
            }
        }
        m
    }
}

/// Indicator of the points where `window` is one and stays one for `margin` neighbours.
pub fn flat_mask(window: &[f64], margin: usize) -> Vec<f64> {
    let n = window.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(margin);
            let hi = (i + margin).min(n - 1);
            if i >= margin && i + margin < n && window[lo..=hi].iter().all(|w| *w == 1.0) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}
