//! Gradient descent with lingering gradients: epochs of truncated GD whose
//! full gradient is maintained by the lowbit index schedule.
//!
//! Two modes:
//!
//! * `Theoretical` — epoch `s` runs `m_s = ⌈(1 + C²/16D²)^s⌉` steps of
//!   `x ← x − min{ξ/‖g‖, 1/L}·g` with `ξ = C/m_s`, which yields the
//!   `f(x^{(S)}) − f* ≤ 4LD²/m_S` guarantee on smooth convex objectives.
//! * `Practical` — a 50-step plain-GD warmup, then epochs of
//!   `m_s = min{1000, ⌈100·1.1^s⌉}` pure-truncation steps of length exactly
//!   `ξ`; `C` acts as the learning rate.
//!
//! Per epoch the total travel is at most `m_s·ξ = C` by construction, which is
//! what makes one epoch's cached gradients reusable across its iterations.

use crate::problem::{GradMeter, Oracle, Problem};
use crate::record::{Observer, SolverError};
use crate::schedule::{IndexSchedule, LingeringCache};
use crate::vecmath;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GdLinMode {
    Theoretical,
    Practical,
}

#[derive(Clone, Debug)]
pub struct GdLinConfig {
    pub mode: GdLinMode,
    /// Epoch count `S`.
    pub epochs: usize,
    /// Travel budget per epoch (theoretical) or learning rate (practical).
    pub travel: f64,
    /// Distance upper bound `D ≥ ‖x⁰ − x*‖`; theoretical mode only.
    pub dist_bound: f64,
    /// Smoothness override; falls back to the problem's own constant.
    pub smoothness: Option<f64>,
    /// Plain-GD steps run before the first practical epoch.
    pub warmup_steps: usize,
    /// Start point override; the origin when absent.
    pub x0: Option<Vec<f64>>,
}

impl GdLinConfig {
    pub fn theoretical(epochs: usize, travel: f64, dist_bound: f64) -> Self {
        GdLinConfig {
            mode: GdLinMode::Theoretical,
            epochs,
            travel,
            dist_bound,
            smoothness: None,
            warmup_steps: 0,
            x0: None,
        }
    }

    pub fn practical(epochs: usize, learning_rate: f64) -> Self {
        GdLinConfig {
            mode: GdLinMode::Practical,
            epochs,
            travel: learning_rate,
            dist_bound: f64::INFINITY,
            smoothness: None,
            warmup_steps: 50,
            x0: None,
        }
    }

    pub fn with_start(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }
}

/// Inner-iteration count of epoch `s` (`s ≥ 1` theoretical, `s ≥ 0` practical).
pub fn m_schedule(cfg: &GdLinConfig, s: usize) -> usize {
    match cfg.mode {
        GdLinMode::Theoretical => {
            let q = 1.0 + cfg.travel * cfg.travel / (16.0 * cfg.dist_bound * cfg.dist_bound);
            q.powi(s as i32).ceil() as usize
        }
        GdLinMode::Practical => (100.0 * 1.1f64.powi(s as i32)).ceil().min(1000.0) as usize,
    }
}

/// One truncated step `x − min{ξ/‖g‖, 1/L}·g`; the displacement never exceeds
/// `ξ`. A zero gradient returns `x` unchanged.
pub fn truncated_gd_step(x: &[f64], g: &[f64], xi: f64, l: f64) -> Vec<f64> {
    let gnorm = vecmath::norm2(g);
    let mut out = x.to_vec();
    if gnorm == 0.0 {
        return out;
    }
    let step = f64::min(xi / gnorm, 1.0 / l);
    vecmath::axpy(-step, g, &mut out);
    out
}

/// Plain truncated gradient descent on the full objective, `m` steps.
/// Unmetered; the building block behind the theoretical mode's analysis and
/// its tests.
pub fn truncated_gd(problem: &dyn Problem, x0: &[f64], xi: f64, l: f64, m: usize) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut g = vec![0.0; problem.dim()];
    for _ in 0..m {
        crate::problem::full_gradient(problem, &x, &mut g);
        x = truncated_gd_step(&x, &g, xi, l);
        crate::problem::project(problem, &mut x);
    }
    x
}

pub fn run_gdlin(
    problem: &dyn Problem,
    cfg: &GdLinConfig,
    meter: &mut GradMeter,
    observer: &mut dyn Observer,
) -> Result<Vec<f64>, SolverError> {
    let n = problem.n();
    let d = problem.dim();
    let smoothness = cfg.smoothness.or_else(|| problem.smoothness());
    if cfg.travel <= 0.0 {
        return Err(SolverError::Config("travel budget C must be positive".into()));
    }
    if cfg.mode == GdLinMode::Theoretical {
        if smoothness.is_none() {
            return Err(SolverError::Config(
                "theoretical mode needs a smoothness constant".into(),
            ));
        }
        if !(cfg.dist_bound > 0.0) || cfg.travel > cfg.dist_bound {
            return Err(SolverError::Config("theoretical mode needs 0 < C ≤ D".into()));
        }
    }

    let mut x = match &cfg.x0 {
        Some(x0) => {
            assert_eq!(x0.len(), d);
            x0.clone()
        }
        None => vec![0.0; d],
    };
    let mut direction = vec![0.0; d];
    let mut stop = false;

    // warmup: plain GD, billed one pass per step
    if cfg.mode == GdLinMode::Practical && cfg.warmup_steps > 0 {
        let warm_rate = smoothness.map(|l| 1.0 / l);
        let m0 = m_schedule(cfg, 0) as f64;
        for step in 0..cfg.warmup_steps {
            metered_full_gradient(problem, &x, meter, &mut direction);
            match warm_rate {
                Some(rate) => vecmath::axpy(-rate, &direction, &mut x),
                // no smoothness known: normalized step of length C/m_0
                None => {
                    let gnorm = vecmath::norm2(&direction);
                    if gnorm > 0.0 {
                        vecmath::axpy(-(cfg.travel / m0) / gnorm, &direction, &mut x);
                    }
                }
            }
            crate::problem::project(problem, &mut x);
            check_finite(&x, meter, &format!("warmup step {step}"))?;
            if !observer.observe(meter, &x, None) {
                return Ok(x);
            }
        }
    }

    let first_epoch = match cfg.mode {
        GdLinMode::Theoretical => 1,
        GdLinMode::Practical => 0,
    };
    for s in first_epoch..first_epoch + cfg.epochs {
        let m = m_schedule(cfg, s);
        let xi = cfg.travel / m as f64;
        let mut schedule = IndexSchedule::new(n, xi);
        let mut cache = LingeringCache::new(n, d);
        let mut traveled = 0.0;
        for k in 0..m {
            {
                let mut oracle = Oracle::new(problem, meter);
                schedule.build_index_set(k, &x, &mut oracle, &mut cache);
            }
            if k == 0 {
                cache.recompute_aggregate();
            }
            direction.copy_from_slice(cache.aggregate());
            problem.shared_gradient(&x, &mut direction);
            let gnorm = vecmath::norm2(&direction);
            if gnorm == 0.0 {
                // converged: the update is undefined at g = 0
                stop = !observer.epoch_end(meter, &x, None);
                break;
            }
            let step = match cfg.mode {
                GdLinMode::Theoretical => f64::min(xi / gnorm, 1.0 / smoothness.unwrap()),
                GdLinMode::Practical => xi / gnorm,
            };
            let prev = x.clone();
            vecmath::axpy(-step, &direction, &mut x);
            crate::problem::project(problem, &mut x);
            traveled += vecmath::dist2(&x, &prev);
            check_finite(&x, meter, &format!("epoch {s}, iteration {k}"))?;
            if !observer.observe(meter, &x, None) {
                return Ok(x);
            }
        }
        debug_assert!(
            traveled <= cfg.travel * (1.0 + 1e-9),
            "epoch travel {traveled} exceeded budget {}",
            cfg.travel
        );
        if stop || !observer.epoch_end(meter, &x, None) {
            return Ok(x);
        }
    }
    Ok(x)
}

use crate::problem::metered_full_gradient;

fn check_finite(x: &[f64], meter: &GradMeter, context: &str) -> Result<(), SolverError> {
    if vecmath::all_finite(x) {
        Ok(())
    } else {
        Err(SolverError::NonFiniteIterate {
            passes: meter.passes(),
            context: context.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{full_objective, GradMeter};
    use crate::record::NullObserver;
    use crate::synthetic::{Linear, Quadratic};
    use crate::vecmath::{dist2, norm2};

    #[test]
    fn truncated_step_branches() {
        let l = 2.0;
        let xi = 0.5;
        let x = vec![1.0, 1.0];
        // ‖g‖ = 2Lξ = 2: the ξ/‖g‖ branch, displacement exactly ξ
        let g = vec![2.0, 0.0];
        let y = truncated_gd_step(&x, &g, xi, l);
        assert!((dist2(&x, &y) - xi).abs() < 1e-15);
        // ‖g‖ = Lξ/2 = 0.5: the 1/L branch, displacement ξ/2
        let g = vec![0.5, 0.0];
        let y = truncated_gd_step(&x, &g, xi, l);
        assert!((dist2(&x, &y) - xi / 2.0).abs() < 1e-15);
        // zero gradient: unchanged
        let y = truncated_gd_step(&x, &[0.0, 0.0], xi, l);
        assert_eq!(y, x);
    }

    #[test]
    fn m_schedule_examples() {
        let th = GdLinConfig::theoretical(5, 1.0, 1.0);
        assert_eq!(m_schedule(&th, 1), 2); // ⌈1.0625⌉
        let pr = GdLinConfig::practical(5, 0.1);
        assert_eq!(m_schedule(&pr, 0), 100);
        assert_eq!(m_schedule(&pr, 25), 1000); // cap binds at ⌈100·1.1²⁵⌉ = 1084
        assert_eq!(m_schedule(&pr, 24), 985);
    }

    #[test]
    fn theorem_bound_on_quadratic() {
        // C = D, L = 1: after S epochs, f − f* ≤ 4LD²/m_S
        let q = Quadratic::new(8, 3, 21);
        let xstar = q.minimizer();
        let fstar = full_objective(&q, &xstar);
        let d0 = norm2(&xstar); // start is the origin
        let cfg = GdLinConfig {
            smoothness: Some(1.0),
            ..GdLinConfig::theoretical(40, d0, d0)
        };
        let mut meter = GradMeter::new(8);
        let x = run_gdlin(&q, &cfg, &mut meter, &mut NullObserver).unwrap();
        let m_last = m_schedule(&cfg, 40) as f64;
        let bound = 4.0 * d0 * d0 / m_last;
        let err = full_objective(&q, &x) - fstar;
        assert!(err >= -1e-12);
        assert!(err <= bound * (1.0 + 1e-9), "error {err} above bound {bound}");
    }

    #[test]
    fn zero_radius_epoch_costs_m_passes() {
        // quadratic radii are honestly zero: the schedule degenerates to full
        // recomputation, m_s passes per epoch. The minimizer is far away so
        // no epoch terminates early at g = 0.
        let q = Quadratic::centered(16, vec![10.0, 10.0]);
        let cfg = GdLinConfig {
            smoothness: Some(1.0),
            ..GdLinConfig::theoretical(3, 0.5, 20.0)
        };
        let mut meter = GradMeter::new(16);
        run_gdlin(&q, &cfg, &mut meter, &mut NullObserver).unwrap();
        let expected: usize = (1..=3).map(|s| m_schedule(&cfg, s)).sum();
        assert_eq!(meter.passes(), expected as f64);
    }

    #[test]
    fn infinite_radius_epoch_costs_one_pass() {
        // constant gradients, δ ≡ +∞: only Λ_0 is ever billed
        let p = Linear::new(vec![1.0, 2.0, -0.5, 3.0]);
        let cfg = GdLinConfig {
            smoothness: Some(1.0),
            ..GdLinConfig::theoretical(4, 0.5, 1.0)
        };
        let mut meter = GradMeter::new(4);
        run_gdlin(&p, &cfg, &mut meter, &mut NullObserver).unwrap();
        assert_eq!(meter.passes(), 4.0); // one pass per epoch
    }

    #[test]
    fn distance_to_minimizer_never_increases() {
        // truncated GD, both step regimes
        let q = Quadratic::new(6, 2, 77);
        let xstar = q.minimizer();
        for xi in [1e-3, 0.1, 10.0] {
            let mut x = vec![1.5, -2.0];
            let mut last = dist2(&x, &xstar);
            for _ in 0..50 {
                x = truncated_gd(&q, &x, xi, 1.0, 1);
                let now = dist2(&x, &xstar);
                assert!(now <= last + 1e-12);
                last = now;
            }
        }
    }
}
