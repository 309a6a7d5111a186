//! The finite-sum problem abstraction consumed by every solver.
//!
//! A problem is `f(x) = shared(x) + (1/n) Σ_i part_i(x)` where `shared` is an
//! analytically cheap term common to all components (the `λ‖x‖²/2` regularizer
//! of SVM, zero elsewhere) and `part_i` is the data-dependent piece whose
//! gradient *lingers*: `part_gradient(i, ·)` is unchanged (within [`EQ_TOL`])
//! anywhere within distance `lingering_radius(i, x)` of `x`, measured in the
//! problem's [`NormKind`]. Splitting the shared term out keeps the radii
//! meaningful — a moving `λx` term would otherwise force every radius to zero.
//!
//! Gradient-complexity accounting goes through [`GradMeter`] / [`Oracle`]: one
//! unit per fresh `(∇f_i, δ)` evaluation, where a gradient and its radius at
//! the same point cost one unit together.

use crate::vecmath;

/// Practical stand-in for exact gradient equality inside a lingering radius:
/// `‖∇f_i(x) − ∇f_i(y)‖ ≤ EQ_TOL` whenever `dist(x, y) ≤ δ(x, i)`.
pub const EQ_TOL: f64 = 1e-10;

/// Norm used for lingering-radius distance tests and H-set eviction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Euclidean,
    Infinity,
}

impl NormKind {
    pub fn dist(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            NormKind::Euclidean => vecmath::dist2(x, y),
            NormKind::Infinity => vecmath::dist_inf(x, y),
        }
    }

    pub fn norm(self, x: &[f64]) -> f64 {
        match self {
            NormKind::Euclidean => vecmath::norm2(x),
            NormKind::Infinity => vecmath::norm_inf(x),
        }
    }
}

/// Feasible domain of the iterates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Unconstrained,
    NonnegativeOrthant,
}

/// A finite-sum objective with lingering radii.
///
/// Implementations must be deterministic: `part_gradient(i, x)` depends only
/// on `(i, x)`. Instances are immutable after construction and shareable
/// across threads.
pub trait Problem: Send + Sync {
    /// Number of components `n ≥ 1`.
    fn n(&self) -> usize;
    /// Dimension `d ≥ 1`.
    fn dim(&self) -> usize;

    fn norm_kind(&self) -> NormKind {
        NormKind::Euclidean
    }

    fn domain(&self) -> Domain {
        Domain::Unconstrained
    }

    /// Lipschitz smoothness constant of the full objective, when known.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    /// Value of the data-dependent part of component `i`.
    fn part_value(&self, i: usize, x: &[f64]) -> f64;

    /// Gradient of the data-dependent part of component `i`, written to `out`.
    fn part_gradient(&self, i: usize, x: &[f64], out: &mut [f64]);

    /// Lingering radius of `part_gradient(i, ·)` at `x`; `+∞` when the part
    /// gradient can never change.
    fn lingering_radius(&self, i: usize, x: &[f64]) -> f64;

    /// Value of the shared analytic term (zero by default).
    fn shared_value(&self, _x: &[f64]) -> f64 {
        0.0
    }

    /// Adds the gradient of the shared analytic term to `out`.
    fn shared_gradient(&self, _x: &[f64], _out: &mut [f64]) {}
}

/// `f_i(x) = shared(x) + part_i(x)`, the component value as written on paper.
pub fn component_value(p: &dyn Problem, i: usize, x: &[f64]) -> f64 {
    check_dim(p, x);
    p.shared_value(x) + p.part_value(i, x)
}

/// Full component gradient `∇f_i(x)`, shared term included. Unmetered; meant
/// for finite-difference checks and solvers that want the textbook object.
pub fn component_gradient(p: &dyn Problem, i: usize, x: &[f64], out: &mut [f64]) {
    check_dim(p, x);
    p.part_gradient(i, x, out);
    p.shared_gradient(x, out);
}

/// `f(x) = shared(x) + (1/n) Σ_i part_i(x)`. Objective evaluations are for
/// reporting only and never touch the meter.
pub fn full_objective(p: &dyn Problem, x: &[f64]) -> f64 {
    check_dim(p, x);
    let n = p.n();
    let sum: f64 = (0..n).map(|i| p.part_value(i, x)).sum();
    p.shared_value(x) + sum / n as f64
}

/// Brute-force `∇f(x)`; unmetered, used by plain GD and by oracle tests.
pub fn full_gradient(p: &dyn Problem, x: &[f64], out: &mut [f64]) {
    check_dim(p, x);
    let n = p.n();
    vecmath::fill_zero(out);
    let mut tmp = vec![0.0; p.dim()];
    for i in 0..n {
        p.part_gradient(i, x, &mut tmp);
        vecmath::axpy(1.0, &tmp, out);
    }
    vecmath::scale(1.0 / n as f64, out);
    p.shared_gradient(x, out);
}

/// Projects `x` onto the problem's domain, in place.
pub fn project(p: &dyn Problem, x: &mut [f64]) {
    match p.domain() {
        Domain::Unconstrained => {}
        Domain::NonnegativeOrthant => {
            for v in x.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
}

fn check_dim(p: &dyn Problem, x: &[f64]) {
    assert_eq!(
        x.len(),
        p.dim(),
        "dimension mismatch: point has length {}, problem dimension is {}",
        x.len(),
        p.dim()
    );
}

/// Counter of `(∇f_i, δ)` oracle evaluations, normalized by `n` for reporting.
#[derive(Clone, Debug)]
pub struct GradMeter {
    calls: u64,
    n: usize,
}

impl GradMeter {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        GradMeter { calls: 0, n }
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// Gradient complexity: oracle calls divided by `n`.
    pub fn passes(&self) -> f64 {
        self.calls as f64 / self.n as f64
    }

    fn bill(&mut self, units: u64) {
        self.calls += units;
    }
}

/// Billing wrapper around a problem's per-component oracle.
///
/// A gradient and the radius at the same `(i, x)` form one pass over the data,
/// so [`Oracle::grad_and_radius`] bills a single unit; the standalone calls
/// bill one unit each.
pub struct Oracle<'a> {
    problem: &'a dyn Problem,
    meter: &'a mut GradMeter,
}

impl<'a> Oracle<'a> {
    pub fn new(problem: &'a dyn Problem, meter: &'a mut GradMeter) -> Self {
        Oracle { problem, meter }
    }

    pub fn problem(&self) -> &'a dyn Problem {
        self.problem
    }

    pub fn meter(&self) -> &GradMeter {
        self.meter
    }

    fn check_index(&self, i: usize) {
        assert!(
            i < self.problem.n(),
            "component index {} out of range (n = {})",
            i,
            self.problem.n()
        );
    }

    /// Fresh part gradient; one unit.
    pub fn grad(&mut self, i: usize, x: &[f64], out: &mut [f64]) {
        self.check_index(i);
        self.problem.part_gradient(i, x, out);
        self.meter.bill(1);
    }

    /// Fresh lingering radius; one unit when not paired with a gradient.
    pub fn radius(&mut self, i: usize, x: &[f64]) -> f64 {
        self.check_index(i);
        self.meter.bill(1);
        self.problem.lingering_radius(i, x)
    }

    /// Paired evaluation at the same point: one unit total.
    pub fn grad_and_radius(&mut self, i: usize, x: &[f64], out: &mut [f64]) -> f64 {
        self.check_index(i);
        self.problem.part_gradient(i, x, out);
        self.meter.bill(1);
        self.problem.lingering_radius(i, x)
    }
}

/// Exact full gradient billed at one unit per component: a full pass.
pub fn metered_full_gradient(
    problem: &dyn Problem,
    x: &[f64],
    meter: &mut GradMeter,
    out: &mut [f64],
) {
    let n = problem.n();
    vecmath::fill_zero(out);
    let mut tmp = vec![0.0; x.len()];
    let mut oracle = Oracle::new(problem, meter);
    for i in 0..n {
        oracle.grad(i, x, &mut tmp);
        vecmath::axpy(1.0, &tmp, out);
    }
    vecmath::scale(1.0 / n as f64, out);
    problem.shared_gradient(x, out);
}

/// Empirical CDF of the lingering radii at `x`: for each grid radius `r`,
/// the fraction `|B(x, r)|/n = |{i : δ(x,i) < r}|/n` (strict inequality).
/// Evaluating all `n` radii costs one pass.
pub fn profile_b(p: &dyn Problem, x: &[f64], grid: &[f64], meter: &mut GradMeter) -> Vec<(f64, f64)> {
    let n = p.n();
    let mut radii: Vec<f64> = (0..n).map(|i| p.lingering_radius(i, x)).collect();
    meter.bill(n as u64);
    radii.sort_by(|a, b| a.partial_cmp(b).expect("radius must not be NaN"));
    grid.iter()
        .map(|&r| {
            let count = radii.partition_point(|&d| d < r);
            (r, count as f64 / n as f64)
        })
        .collect()
}

/// Least-squares affine fit `y ≈ c1·x + c2` over `(x, y)` points.
/// Returns `(c1, c2)`.
pub fn affine_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    assert!(n >= 2.0, "affine fit needs at least two points");
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let c1 = (n * sxy - sx * sy) / denom;
    let c2 = (sy - c1 * sx) / n;
    (c1, c2)
}

/// Coefficient of determination of the affine fit on the same points.
pub fn fit_r2(points: &[(f64, f64)]) -> f64 {
    let (c1, c2) = affine_fit(points);
    let n = points.len() as f64;
    let mean_y: f64 = points.iter().map(|p| p.1).sum::<f64>() / n;
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let e = p.1 - (c1 * p.0 + c2);
            e * e
        })
        .sum();
    let ss_tot: f64 = points
        .iter()
        .map(|p| {
            let e = p.1 - mean_y;
            e * e
        })
        .sum();
    if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}
