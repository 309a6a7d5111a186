//! Small engineered problems for tests and rate-shape benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::problem::{NormKind, Problem};
use crate::vecmath;

/// `f_i(x) = ½‖x − c_i‖²` with seeded random centers.
///
/// Smooth with `L = 1`, minimizer at the center mean, and honestly zero
/// lingering radii (the gradient moves with every step), so lingering solvers
/// degenerate to their classical counterparts here.
pub struct Quadratic {
    centers: Vec<Vec<f64>>,
    d: usize,
}

impl Quadratic {
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Quadratic { centers, d }
    }

    /// All components share one center (useful for single-component cases).
    pub fn centered(n: usize, center: Vec<f64>) -> Self {
        let d = center.len();
        Quadratic {
            centers: vec![center; n],
            d,
        }
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i]
    }

    /// The unique minimizer: the mean of the centers.
    pub fn minimizer(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for c in &self.centers {
            vecmath::axpy(1.0 / self.centers.len() as f64, c, &mut m);
        }
        m
    }
}

impl Problem for Quadratic {
    fn n(&self) -> usize {
        self.centers.len()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn smoothness(&self) -> Option<f64> {
        Some(1.0)
    }
    fn part_value(&self, i: usize, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.centers[i])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }
    fn part_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        for ((o, xi), ci) in out.iter_mut().zip(x).zip(&self.centers[i]) {
            *o = xi - ci;
        }
    }
    fn lingering_radius(&self, _i: usize, _x: &[f64]) -> f64 {
        0.0
    }
}

/// One-dimensional huberized staircase: `f_i(x) = φ_h(x − t_i)` where `φ_h`
/// is `z²/2h` for `|z| ≤ h` and `|z| − h/2` outside.
///
/// Outside the width-`h` smoothing zone the component gradient is a constant
/// `±1`, so the honest lingering radius is the distance to the zone boundary.
/// With thresholds `t_i` spread over an interval of length `span`, the radius
/// profile is `|B(x, r)|/n ≈ min{1, 2r/span}` — linear growth with a near-zero
/// offset, the regime where lingering buys an exponential rate.
pub struct Staircase {
    thresholds: Vec<f64>,
    h: f64,
    span: f64,
}

impl Staircase {
    /// Random thresholds uniform in `[−span/2, span/2]`.
    pub fn new(n: usize, span: f64, h: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let thresholds = (0..n).map(|_| rng.gen_range(-span / 2.0..span / 2.0)).collect();
        Staircase { thresholds, h, span }
    }

    /// Evenly spaced thresholds, symmetric around zero; the minimizer is 0.
    pub fn grid(n: usize, span: f64, h: f64) -> Self {
        let thresholds = (0..n)
            .map(|i| span * ((i as f64 + 0.5) / n as f64 - 0.5))
            .collect();
        Staircase { thresholds, h, span }
    }

    pub fn span(&self) -> f64 {
        self.span
    }
}

impl Problem for Staircase {
    fn n(&self) -> usize {
        self.thresholds.len()
    }
    fn dim(&self) -> usize {
        1
    }
    fn smoothness(&self) -> Option<f64> {
        Some(1.0 / self.h)
    }
    fn part_value(&self, i: usize, x: &[f64]) -> f64 {
        let z = x[0] - self.thresholds[i];
        if z.abs() <= self.h {
            z * z / (2.0 * self.h)
        } else {
            z.abs() - self.h / 2.0
        }
    }
    fn part_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let z = x[0] - self.thresholds[i];
        out[0] = if z.abs() <= self.h { z / self.h } else { z.signum() };
    }
    fn lingering_radius(&self, i: usize, x: &[f64]) -> f64 {
        let z = (x[0] - self.thresholds[i]).abs();
        if z > self.h {
            z - self.h
        } else {
            0.0
        }
    }
}

/// `f_i(x) = v_i·x` in one dimension: constant gradients, so every lingering
/// radius is honestly infinite.
pub struct Linear {
    slopes: Vec<f64>,
}

impl Linear {
    pub fn new(slopes: Vec<f64>) -> Self {
        Linear { slopes }
    }
}

impl Problem for Linear {
    fn n(&self) -> usize {
        self.slopes.len()
    }
    fn dim(&self) -> usize {
        1
    }
    fn part_value(&self, i: usize, x: &[f64]) -> f64 {
        self.slopes[i] * x[0]
    }
    fn part_gradient(&self, i: usize, _x: &[f64], out: &mut [f64]) {
        out[0] = self.slopes[i];
    }
    fn lingering_radius(&self, _i: usize, _x: &[f64]) -> f64 {
        f64::INFINITY
    }
}

/// Test-support problem with prescribed radii and constant (zero) gradients.
///
/// A constant gradient lingers forever, so any prescribed radius is a sound
/// under-estimate; schedule logic can be exercised against arbitrary radius
/// configurations. The per-iteration table variant reads the iteration number
/// off `x[0]`.
pub struct PrescribedRadius {
    n: usize,
    radii: Radii,
}

enum Radii {
    PerIndex(Vec<f64>),
    PerIteration(Vec<Vec<f64>>),
}

impl PrescribedRadius {
    pub fn constant(n: usize, radii: Vec<f64>) -> Self {
        assert_eq!(radii.len(), n);
        PrescribedRadius {
            n,
            radii: Radii::PerIndex(radii),
        }
    }

    /// `table[k][i]` is `δ(x_k, i)`; drive with `x = [k as f64]`.
    pub fn table(n: usize, table: Vec<Vec<f64>>) -> Self {
        PrescribedRadius {
            n,
            radii: Radii::PerIteration(table),
        }
    }
}

impl Problem for PrescribedRadius {
    fn n(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        1
    }
    fn part_value(&self, _i: usize, _x: &[f64]) -> f64 {
        0.0
    }
    fn part_gradient(&self, _i: usize, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn lingering_radius(&self, i: usize, x: &[f64]) -> f64 {
        match &self.radii {
            Radii::PerIndex(r) => r[i],
            Radii::PerIteration(table) => table[x[0] as usize][i],
        }
    }
}

/// Adapter forcing every lingering radius to zero, turning a lingering solver
/// into its classical counterpart on the wrapped problem.
pub struct ZeroRadius<P>(pub P);

impl<P: Problem> Problem for ZeroRadius<P> {
    fn n(&self) -> usize {
        self.0.n()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn norm_kind(&self) -> NormKind {
        self.0.norm_kind()
    }
    fn domain(&self) -> crate::problem::Domain {
        self.0.domain()
    }
    fn smoothness(&self) -> Option<f64> {
        self.0.smoothness()
    }
    fn part_value(&self, i: usize, x: &[f64]) -> f64 {
        self.0.part_value(i, x)
    }
    fn part_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        self.0.part_gradient(i, x, out)
    }
    fn lingering_radius(&self, _i: usize, _x: &[f64]) -> f64 {
        0.0
    }
    fn shared_value(&self, x: &[f64]) -> f64 {
        self.0.shared_value(x)
    }
    fn shared_gradient(&self, x: &[f64], out: &mut [f64]) {
        self.0.shared_gradient(x, out)
    }
}
