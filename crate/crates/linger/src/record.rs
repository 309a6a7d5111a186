//! Run records, checkpointing, and solver errors.

use std::time::Instant;

use crate::problem::{full_objective, GradMeter, Problem};

/// One convergence-curve checkpoint.
#[derive(Clone, Debug)]
pub struct RunRecord {
    /// Gradient complexity at the checkpoint (`# grad / n`).
    pub pass_count: f64,
    /// Wall time since the run started, milliseconds. Hardware-dependent;
    /// excluded from every tolerance check.
    pub wall_ms: f64,
    /// `f(x) − f_ref`, divided by `max(1, |f_ref|)` so large-scale objectives
    /// report a scale-free error. With the default `f_ref = 0` this is the raw
    /// objective value.
    pub objective_error: f64,
    /// Relative primal infeasibility gap, LP runs only.
    pub primal_error: Option<f64>,
    /// Total frozen components `Σ_s |H_s|`, lingering solvers only.
    pub live_count: Option<u64>,
}

/// Checkpoint sink handed to every solver.
///
/// Solvers call [`Observer::observe`] at natural boundaries (each inner
/// iteration / epoch end); the observer decides whether the moment is worth a
/// record. A `false` return asks the solver to stop after the current step.
pub trait Observer {
    fn observe(&mut self, meter: &GradMeter, x: &[f64], live: Option<u64>) -> bool;

    /// Epoch boundary; defaults to a plain observation. [`Tracker`] records
    /// here unconditionally so every epoch leaves at least one checkpoint.
    fn epoch_end(&mut self, meter: &GradMeter, x: &[f64], live: Option<u64>) -> bool {
        self.observe(meter, x, live)
    }
}

/// Observer that ignores everything and never stops a run.
pub struct NullObserver;

impl Observer for NullObserver {
    fn observe(&mut self, _meter: &GradMeter, _x: &[f64], _live: Option<u64>) -> bool {
        true
    }
}

/// Observer recording one `(passes, objective_error)` point per epoch end;
/// used by the rate-shape fits.
pub struct EpochCurve<'a> {
    problem: &'a dyn Problem,
    f_ref: f64,
    pub points: Vec<(f64, f64)>,
}

impl<'a> EpochCurve<'a> {
    pub fn new(problem: &'a dyn Problem, f_ref: f64) -> Self {
        EpochCurve {
            problem,
            f_ref,
            points: Vec::new(),
        }
    }
}

impl Observer for EpochCurve<'_> {
    fn observe(&mut self, _meter: &GradMeter, _x: &[f64], _live: Option<u64>) -> bool {
        true
    }

    fn epoch_end(&mut self, meter: &GradMeter, x: &[f64], _live: Option<u64>) -> bool {
        let err = full_objective(self.problem, x) - self.f_ref;
        self.points.push((meter.passes(), err));
        true
    }
}

/// Standard observer: records a [`RunRecord`] once per `checkpoint_units`
/// billed oracle units and stops the run when the pass budget is exhausted.
pub struct Tracker<'a> {
    problem: &'a dyn Problem,
    f_ref: f64,
    /// Computes the primal error at a checkpoint, when the problem has one.
    primal: Option<Box<dyn Fn(&[f64]) -> f64 + 'a>>,
    budget_passes: f64,
    checkpoint_units: u64,
    next_at: u64,
    started: Instant,
    pub records: Vec<RunRecord>,
}

impl<'a> Tracker<'a> {
    /// Cadence defaults to one checkpoint per quarter pass.
    pub fn new(problem: &'a dyn Problem, f_ref: f64, budget_passes: f64) -> Self {
        let units = (problem.n() as u64 / 4).max(1);
        Tracker {
            problem,
            f_ref,
            primal: None,
            budget_passes,
            checkpoint_units: units,
            next_at: 0,
            started: Instant::now(),
            records: Vec::new(),
        }
    }

    pub fn with_primal(mut self, primal: Box<dyn Fn(&[f64]) -> f64 + 'a>) -> Self {
        self.primal = Some(primal);
        self
    }

    pub fn with_checkpoint_units(mut self, units: u64) -> Self {
        self.checkpoint_units = units.max(1);
        self
    }

    fn error_at(&self, x: &[f64]) -> f64 {
        let f = full_objective(self.problem, x);
        (f - self.f_ref) / f64::max(1.0, self.f_ref.abs())
    }

    fn push(&mut self, meter: &GradMeter, x: &[f64], live: Option<u64>) {
        let rec = RunRecord {
            pass_count: meter.passes(),
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
            objective_error: self.error_at(x),
            primal_error: self.primal.as_ref().map(|p| p(x)),
            live_count: live,
        };
        self.records.push(rec);
    }

    /// Passes at which the recorded error first drops to `threshold` or
    /// below; `None` if it never does.
    pub fn passes_to(&self, threshold: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.objective_error <= threshold)
            .map(|r| r.pass_count)
    }

    pub fn final_error(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective_error)
    }
}

impl Observer for Tracker<'_> {
    fn observe(&mut self, meter: &GradMeter, x: &[f64], live: Option<u64>) -> bool {
        if meter.calls() < self.next_at {
            return true;
        }
        if meter.passes() > self.budget_passes {
            // over budget: stop without recording so emitted passes stay
            // within the budget
            return false;
        }
        self.next_at = meter.calls() + self.checkpoint_units;
        self.push(meter, x, live);
        true
    }

    fn epoch_end(&mut self, meter: &GradMeter, x: &[f64], live: Option<u64>) -> bool {
        if meter.passes() > self.budget_passes {
            return false;
        }
        self.next_at = meter.calls() + self.checkpoint_units;
        self.push(meter, x, live);
        true
    }
}

/// Fatal run failures.
#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("iterate became non-finite at pass {passes:.3} ({context})")]
    NonFiniteIterate { passes: f64, context: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}
