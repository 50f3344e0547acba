//! The twelve acceptance checks, shared by the integration test and the `selftest` command.
//!
//! Each check returns the measured quantity next to its threshold. `quick` shrinks the
//! grids and sample counts of the slower checks where the smaller sizes still resolve the
//! test objects; the thresholds never change.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::correspondence::{trace_product, weyl_map, wigner_map, LogGaussian, OperatorKernel};
use crate::deriv::Derivative;
use crate::flow::{compare_flows, evolve_expm, evolve_hilbert, FlowParams};
use crate::gk::{gk_dual_symbol, gk_symbol, gk_wigner, lambda_k, GkParams};
use crate::grid::{
    inner_product, make_grid, smooth_plateau, BetaSymbol, GeometricGrid, Signal, TimeGrid, DEFAULT_R,
};
use crate::group::{apply_u_reported, beta_matrix, f_matrix, AffineElement};
use crate::interp::Interpolation;
use crate::star::{
    poisson_bracket_beta, star_bracket_beta, star_product_operator_beta, star_product_series,
    StarConfig, StarMethod,
};
use crate::wigner::{affine_wigner, exp_generator_kernel, projector_kernel};

/// Outcome of one check.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Measured value compared against `tolerance`; its meaning is in `detail`.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

/// Criteria that no finite discretization can meet; see [`commutator`].
pub const UNATTAINABLE: &[u8] = &[12];

pub const NAMES: [&str; 12] = [
    "identity symbol",
    "unitarity",
    "wigner marginals and moyal",
    "exponential correspondence",
    "star-product oracle ladder",
    "preferred observables",
    "flow consistency",
    "closed-form flow vs expm",
    "G_k continuity",
    "G_k dual unitarity",
    "group representation",
    "commutator",
];

type Check = fn(bool) -> (bool, f64, f64, String);

const CHECKS: [Check; 12] = [
    identity_symbol,
    unitarity,
    marginals,
    exponential_rule,
    star_ladder,
    preferred_observables,
    flow_consistency,
    flow_vs_expm,
    gk_continuity,
    gk_dual_unitarity,
    group_representation,
    commutator,
];

pub fn run(id: u8, quick: bool) -> CriterionResult {
    let start = Instant::now();
    let (passed, value, tolerance, detail) = CHECKS[id as usize - 1](quick);
    CriterionResult {
        id,
        name: NAMES[id as usize - 1],
        passed,
        value,
        tolerance,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all(quick: bool) -> Vec<CriterionResult> {
    (1..=12).map(|id| run(id, quick)).collect()
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<28} value {:.3e} tol {:.1e}  {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.value,
            self.tolerance,
            self.detail,
            self.seconds
        )
    }
}

fn n(quick: bool) -> usize {
    if quick {
        128
    } else {
        256
    }
}

fn fgrid(quick: bool) -> GeometricGrid {
    make_grid(0.05, 5.0, n(quick), DEFAULT_R).unwrap()
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn random_lg(rng: &mut ChaCha8Rng) -> LogGaussian {
    LogGaussian {
        f0: rng.gen_range(0.4..0.9),
        sigma_log: rng.gen_range(0.2..0.35),
        t0: rng.gen_range(-2.0..2.0),
        sigma_t: rng.gen_range(1.5..3.0),
    }
}

fn identity_symbol(quick: bool) -> (bool, f64, f64, String) {
    let g = fgrid(quick);
    let nf = g.len();
    let sym = wigner_map(&OperatorKernel::identity(g), TimeGrid::new(-20.0, 20.0, n(quick)).unwrap());
    // the quadrature end corrections touch three nodes at each end
    let dev = sym
        .values
        .indexed_iter()
        .filter(|((_, k), _)| (3..nf - 3).contains(k))
        .map(|(_, z)| (z - 1.0).norm())
        .fold(0.0, f64::max);
    (dev <= 1e-6, dev, 1e-6, "max |symbol - 1| off the three end nodes".into())
}

fn unitarity(quick: bool) -> (bool, f64, f64, String) {
    let g = fgrid(quick);
    let tg = TimeGrid::new(-20.0, 20.0, n(quick)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs = if quick { 8 } else { 20 };
    let worst = (0..pairs)
        .map(|_| {
            let a = random_lg(&mut rng).phase_symbol(tg, g);
            let b = random_lg(&mut rng).phase_symbol(tg, g);
            let lhs = a.pairing(&b).unwrap();
            let rhs = trace_product(&weyl_map(&a), &weyl_map(&b)).unwrap();
            (lhs - rhs).norm() / rhs.norm()
        })
        .fold(0.0, f64::max);
    (worst <= 1e-3, worst, 1e-3, format!("worst relative error over {pairs} pairs"))
}

fn marginals(_quick: bool) -> (bool, f64, f64, String) {
    let g = fgrid(false);
    let tg = TimeGrid::new(-20.0, 20.0, 256).unwrap();
    let lg = |f0, s, t0| LogGaussian { f0, sigma_log: s, t0, sigma_t: 1.0 }.signal(g);
    let two = lg(0.4, 0.2, 1.0).add(&lg(1.0, 0.25, -1.5).scale(c(0.7))).unwrap();
    let signals = [lg(0.5, 0.3, 0.5), lg(0.6, 0.25, -0.5), two];
    let ps: Vec<_> = signals.iter().map(|s| affine_wigner(s, tg)).collect();
    let mut worst = ps.iter().map(|p| p.report.marginal_error).fold(0.0, f64::max);
    for i in 0..ps.len() {
        for j in i..ps.len() {
            let moyal = ps[i].symbol.pairing(&ps[j].symbol).unwrap();
            let want = inner_product(&signals[i], &signals[j]).unwrap().norm_sqr();
            worst = worst.max((moyal - want).norm() / want);
        }
    }
    (worst <= 1e-3, worst, 1e-3, "worst relative error, marginals and all Moyal pairs".into())
}

fn exponential_rule(_quick: bool) -> (bool, f64, f64, String) {
    let g = fgrid(false);
    let tg = TimeGrid::new(-1.0, 1.0, 256).unwrap();
    let mut worst = 0.0f64;
    for (u0, v0) in [(0.3, 0.0), (0.0, 0.5), (0.3, 0.5)] {
        let sym = wigner_map(&exp_generator_kernel(u0, v0, &g), tg);
        for ((m, k), z) in sym.values.indexed_iter() {
            let (t, f) = (tg.time(m), g.freq(k));
            if !(0.1..=2.0).contains(&f) {
                continue;
            }
            let want = Complex64::from_polar(1.0, -2.0 * PI * (u0 * t * f + v0 * f));
            worst = worst.max((z - want).norm());
        }
    }
    (worst <= 1e-3, worst, 1e-3, "max error on |t| <= 1, 0.1 <= f <= 2".into())
}

fn star_ladder(_quick: bool) -> (bool, f64, f64, String) {
    // the width-doubled pair needs the wide grid to stay clear of its edges
    let (nb, nf) = (400, 384);
    let bg = TimeGrid::new(-20.0, 20.0, nb).unwrap();
    let fg = make_grid(1.0 / 64.0, 64.0, nf, DEFAULT_R).unwrap();
    let bump = |b0: f64, wb: f64, f0: f64, s: f64| {
        move |b: f64, f: f64| {
            let x = (f / f0).ln() / s;
            let y = (b - b0) / wb;
            c((-0.5 * (x * x + y * y)).exp())
        }
    };
    let errs = |w: f64| -> Vec<f64> {
        let a = BetaSymbol::from_fn(bg, fg, bump(0.3, 1.2 * w, 1.0, 0.3 * w));
        let b = BetaSymbol::from_fn(bg, fg, bump(-0.4, 1.0 * w, 1.1, 0.25 * w));
        let oracle = star_product_operator_beta(&a, &b).unwrap();
        (0..3)
            .map(|order| {
                let cfg = StarConfig { order, ..Default::default() };
                let s = star_product_series(&a, &b, &cfg).unwrap();
                s.zip_with(&oracle, |x, y| x - y).unwrap().l2() / oracle.l2()
            })
            .collect()
    };
    let (e1, e2) = (errs(1.4), errs(2.8));
    let monotone = e1.windows(2).all(|p| p[1] < p[0]) && e2.windows(2).all(|p| p[1] < p[0]);
    // observed order under width doubling against the expected 2(n + 1)
    let slack: Vec<f64> = (0..3)
        .map(|k| (e1[k] / e2[k]).log2() - 2.0 * (k as f64 + 1.0))
        .collect();
    let worst = slack.iter().copied().fold(f64::INFINITY, f64::min);
    let passed = monotone && worst >= -0.25;
    let orders: Vec<String> =
        (0..3).map(|k| format!("{:.2}", (e1[k] / e2[k]).log2())).collect();
    (
        passed,
        -worst,
        0.25,
        format!(
            "orders [{}] vs 2,4,6; errors w=1.4 {:.1e}/{:.1e}/{:.1e}; monotone {monotone}",
            orders.join(", "),
            e1[0],
            e1[1],
            e1[2]
        ),
    )
}

fn preferred_observables(quick: bool) -> (bool, f64, f64, String) {
    let bg = TimeGrid::new(-12.0, 12.0, if quick { 128 } else { 192 }).unwrap();
    let fg = make_grid(0.125, 8.0, 128, DEFAULT_R).unwrap();
    let win = |b: f64, f: f64| smooth_plateau(b, 6.0, 10.5) * smooth_plateau(f.ln(), 1.2, 1.9);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ys: Vec<BetaSymbol> = (0..if quick { 4 } else { 10 })
        .map(|_| {
            // Y lives where the window is flat; on its slope X * window is no longer preferred
            let (b0, wb) = (rng.gen_range(-1.5..1.5), rng.gen_range(0.8..1.1));
            let (f0, s) = (rng.gen_range(0.8..1.25), rng.gen_range(0.2..0.25));
            BetaSymbol::from_fn(bg, fg, move |b, f| {
                let x = (f / f0).ln() / s;
                let y = (b - b0) / wb;
                c((-0.5 * (x * x + y * y)).exp())
            })
        })
        .collect();
    let ratio = |x: &dyn Fn(f64, f64) -> f64, y: &BetaSymbol| {
        let xs = BetaSymbol::from_fn(bg, fg, |b, f| c(x(b, f) * win(b, f)));
        let sb = star_bracket_beta(&xs, y, StarMethod::Operator, &StarConfig::default()).unwrap();
        let pb = poisson_bracket_beta(&xs, y, Derivative::Stencil).unwrap();
        sb.zip_with(&pb, |a, b| a - b).unwrap().l2() / pb.l2()
    };
    let preferred: [&dyn Fn(f64, f64) -> f64; 3] = [&|b, _| b, &|_, f| f, &|_, f: f64| f.ln()];
    let generic: [&dyn Fn(f64, f64) -> f64; 4] =
        [&|b, _| b * b, &|b, f: f64| b * f.ln(), &|b, f| b * f, &|_, f| f * f];
    let mut worst = 0.0f64;
    let mut least_generic = f64::INFINITY;
    for y in &ys {
        for x in preferred {
            worst = worst.max(ratio(x, y));
        }
        for x in generic {
            least_generic = least_generic.min(ratio(x, y));
        }
    }
    let separated = least_generic > 10.0 * worst;
    (
        worst <= 2e-2 && separated,
        worst,
        2e-2,
        format!("worst preferred ratio; smallest generic ratio {least_generic:.2e} (> 10x: {separated})"),
    )
}

fn flow_consistency(quick: bool) -> (bool, f64, f64, String) {
    let lg = LogGaussian { f0: 0.7, sigma_log: 0.3, t0: 0.0, sigma_t: 1.0 };
    let sizes: &[usize] = if quick { &[64, 128] } else { &[64, 128, 256] };
    let mut worst = 0.0f64;
    let mut halves = true;
    let mut parts = Vec::new();
    for (mu, nu, sigma, alpha) in [(1.0, 0.0, 0.0, 0.2), (0.0, 1.0, 0.0, 0.5), (0.0, 0.0, 1.0, 0.3)] {
        let d: Vec<f64> = sizes
            .iter()
            .map(|&k| {
                let g = make_grid(0.05, 5.0, k, DEFAULT_R).unwrap();
                let tg = TimeGrid::new(-20.0, 20.0, k).unwrap();
                let p = FlowParams::new(mu, nu, sigma, alpha);
                compare_flows(&lg.signal(g), &p, &[alpha], tg).unwrap().max_distance()
            })
            .collect();
        halves &= d.windows(2).all(|p| p[1] <= 0.5 * p[0]);
        worst = worst.max(*d.last().unwrap());
        parts.push(format!("{:.1e}", d.last().unwrap()));
    }
    (
        worst <= 1e-2 && halves,
        worst,
        1e-2,
        format!("finest D per flow [{}]; halves under refinement: {halves}", parts.join(", ")),
    )
}

fn flow_vs_expm(_quick: bool) -> (bool, f64, f64, String) {
    let g = make_grid(0.05, 5.0, 128, DEFAULT_R).unwrap();
    // centred in log f so that dilations by e^{+-1} stay on the grid
    let s = LogGaussian { f0: 0.5, sigma_log: 0.2, t0: 0.3, sigma_t: 1.0 }.signal(g);
    let mut worst = 0.0f64;
    for (mu, nu, sigma) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (0.4, -0.5, 0.6)] {
        for alpha in [-1.0, -0.5, 0.2, 0.7, 1.0] {
            let p = FlowParams::new(mu, nu, sigma, alpha);
            let a = evolve_hilbert(&s, &p);
            let b = evolve_expm(&s, &p, Derivative::Spectral);
            worst = worst.max(a.sub(&b).unwrap().norm() / b.norm());
        }
    }
    (worst <= 1e-6, worst, 1e-6, "worst relative L2 distance, 128 points, |alpha| <= 1".into())
}

fn gk_continuity(quick: bool) -> (bool, f64, f64, String) {
    let g = fgrid(quick);
    let tg = TimeGrid::new(-10.0, 10.0, n(quick)).unwrap();
    let p = GkParams::new(1e-4, 0.0).unwrap();
    let mut worst = 0.0f64;
    for lg in [
        LogGaussian { f0: 0.5, sigma_log: 0.3, t0: 0.5, sigma_t: 1.0 },
        LogGaussian { f0: 0.9, sigma_log: 0.4, t0: -1.0, sigma_t: 1.0 },
    ] {
        let s = lg.signal(g);
        let a = gk_wigner(&s, p, tg).unwrap();
        let b = affine_wigner(&s, tg).symbol;
        worst = worst.max(a.zip_with(&b, |x, y| x - y).unwrap().l2() / b.l2());
    }
    let exact = (-400..=400).all(|i| {
        let u = i as f64 * 0.0125;
        lambda_k(u, -1.0).unwrap() == (0.5 * u).exp()
    });
    (
        worst <= 1e-3 && exact,
        worst,
        1e-3,
        format!("relative L2 distance at k = 1e-4; lambda_(-1) = e^(u/2) bitwise on |u| <= 5: {exact}"),
    )
}

fn gk_dual_unitarity(quick: bool) -> (bool, f64, f64, String) {
    // cheap enough at full size; 128 points under-resolve the cross-term phases
    let g = fgrid(false);
    let tg = TimeGrid::new(-20.0, 20.0, 256).unwrap();
    let p = GkParams::new(-1.0, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    // two components far apart in frequency: the cross terms of the projector sit at
    // |u| ~ 1.5, where cosh(u/2) is well away from 1
    let mut draw = || {
        let lg = |f0: f64, t0: f64, s: f64| LogGaussian { f0, sigma_log: s, t0, sigma_t: 1.0 }.signal(g);
        let a = lg(rng.gen_range(0.2..0.3), rng.gen_range(-1.0..1.0), rng.gen_range(0.2..0.3));
        let b = lg(rng.gen_range(0.9..1.3), rng.gen_range(-1.0..1.0), rng.gen_range(0.2..0.3));
        a.add(&b.scale(c(rng.gen_range(0.5..1.5)))).unwrap()
    };
    let mut dual_worst = 0.0f64;
    let mut plain_worst = 0.0f64;
    let mut plain_least = f64::INFINITY;
    for _ in 0..if quick { 3 } else { 6 } {
        let a = projector_kernel(&draw()).unwrap();
        let b = projector_kernel(&draw()).unwrap();
        let tr = trace_product(&a, &b).unwrap();
        let sa = gk_symbol(&a, p, tg).unwrap();
        let dual = sa.pairing(&gk_dual_symbol(&b, p, tg).unwrap()).unwrap();
        let plain = sa.pairing(&gk_symbol(&b, p, tg).unwrap()).unwrap();
        dual_worst = dual_worst.max((dual - tr).norm() / tr.norm());
        let e = (plain - tr).norm() / tr.norm();
        plain_worst = plain_worst.max(e);
        plain_least = plain_least.min(e);
    }
    (
        dual_worst <= 1e-3 && plain_worst > 5e-2,
        dual_worst,
        1e-3,
        format!(
            "worst dual error at k = -1; worst non-dual error {plain_worst:.2e} (> 5e-2), least {plain_least:.2e}"
        ),
    )
}

fn group_representation(quick: bool) -> (bool, f64, f64, String) {
    let g = fgrid(quick);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = LogGaussian { f0: 0.5, sigma_log: 0.25, t0: 0.7, sigma_t: 1.0 }.signal(g);
    let u = |g: &AffineElement, s: &Signal| apply_u_reported(g, s, Interpolation::BandLimited).0;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let g1 = AffineElement::new(rng.gen_range(-0.5..0.5), rng.gen_range(-2.0..2.0));
        let g2 = AffineElement::new(rng.gen_range(-0.5..0.5), rng.gen_range(-2.0..2.0));
        let a = u(&g1, &u(&g2, &s));
        let b = u(&g1.compose(&g2), &s);
        worst = worst.max(a.sub(&b).unwrap().norm() / b.norm());
    }
    (worst <= 1e-6, worst, 1e-6, "worst relative residual over 50 random pairs".into())
}

/// `||[beta, f] + f/(2i pi)|| / ||f||` for the grid matrices.
///
/// With `f` diagonal the commutator `[B, F]` has zero diagonal whatever `B` is, while the
/// target `-F/(2i pi)` does not, so every matrix norm of the residual is at least
/// `||F|| / (2 pi)`: the relation cannot hold in matrix form on a finite grid. The value
/// reported is the literal Frobenius ratio; the detail adds the same residual applied to a
/// smooth interior vector, where the relation holds to discretization accuracy.
fn commutator(quick: bool) -> (bool, f64, f64, String) {
    let g = fgrid(quick);
    let b = beta_matrix(&g, Derivative::Spectral);
    let f = f_matrix(&g);
    let coef = c(1.0) / Complex64::new(0.0, 2.0 * PI);
    let resid = &b * &f - &f * &b + &f * coef;
    let ratio = resid.norm() / f.norm();
    let s = LogGaussian { f0: 0.5, sigma_log: 0.3, t0: 0.0, sigma_t: 1.0 }.signal(g);
    let v = DVector::from_vec(s.values);
    let on_vector = (&resid * &v).norm() / (&f * &v).norm();
    (
        ratio <= 1e-4,
        ratio,
        1e-4,
        format!("Frobenius ratio (bounded below by 1/(2 pi)); on a smooth interior vector {on_vector:.1e}"),
    )
}
