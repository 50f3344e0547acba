//! Shared fixtures for the benchmarks.

use halfplane_core::correspondence::{LogGaussian, OperatorKernel};
use halfplane_core::grid::DEFAULT_R;
use halfplane_core::{make_grid, BetaSymbol, GeometricGrid, PhaseSymbol, Signal, TimeGrid};
use num_complex::Complex64;

pub fn fgrid(n: usize) -> GeometricGrid {
    make_grid(0.05, 5.0, n, DEFAULT_R).unwrap()
}

pub fn tgrid(n: usize) -> TimeGrid {
    TimeGrid::new(-20.0, 20.0, n).unwrap()
}

fn lg() -> LogGaussian {
    LogGaussian { f0: 0.6, sigma_log: 0.3, t0: 0.5, sigma_t: 1.0 }
}

pub fn signal(n: usize) -> Signal {
    lg().signal(fgrid(n))
}

pub fn symbol(n: usize) -> PhaseSymbol {
    lg().phase_symbol(tgrid(n), fgrid(n))
}

pub fn kernel(n: usize) -> OperatorKernel {
    halfplane_core::correspondence::weyl_map(&symbol(n))
}

/// Two Gaussian bumps in `(beta, ln f)` on an `n x n` grid.
pub fn beta_pair(n: usize) -> (BetaSymbol, BetaSymbol) {
    let bg = TimeGrid::new(-20.0, 20.0, n).unwrap();
    let fg = make_grid(1.0 / 64.0, 64.0, n, DEFAULT_R).unwrap();
    let bump = |b0: f64, wb: f64, f0: f64, s: f64| {
        move |b: f64, f: f64| {
            let x = (f / f0).ln() / s;
            let y = (b - b0) / wb;
            Complex64::new((-0.5 * (x * x + y * y)).exp(), 0.0)
        }
    };
    (
        BetaSymbol::from_fn(bg, fg, bump(0.3, 2.0, 1.0, 0.5)),
        BetaSymbol::from_fn(bg, fg, bump(-0.4, 1.6, 1.1, 0.4)),
    )
}
