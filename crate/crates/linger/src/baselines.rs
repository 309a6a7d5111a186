//! Classical reference solvers under the same metering and reporting
//! contracts: GD, SVRG, SAGA, SCSG and PEGASOS.
//!
//! Billing follows the usual pass accounting: GD pays one pass per step; an
//! SVRG epoch pays a snapshot pass plus one unit per inner step (the snapshot
//! gradients are kept in memory), totaling `3n` units; SCSG pays its batch
//! plus two units per inner step (nothing is stored); SAGA and PEGASOS pay one
//! unit per step after SAGA's one-pass table initialization.
//!
//! Index draws are counter-based on the shared [`DrawStream`] layout, so a
//! lingering solver with all radii forced to zero reproduces SVRG's iterate
//! sequence bit for bit under the same seed.

use crate::problem::{metered_full_gradient, GradMeter, Oracle, Problem};
use crate::record::{Observer, SolverError};
use crate::rng::DrawStream;
use crate::svrglin::estimator;
use crate::vecmath;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Gd,
    Svrg,
    Saga,
    Scsg,
    Pegasos,
}

#[derive(Clone, Debug)]
pub struct BaselineConfig {
    pub method: Method,
    /// Learning rate; ignored by PEGASOS (its schedule is `1/(λt)`).
    pub eta: f64,
    /// Run length in the method's natural epochs: one step for GD, a
    /// snapshot plus `2n` steps for SVRG, `n` steps for SAGA and PEGASOS,
    /// a doubling batch plus `2|B|` steps for SCSG.
    pub epochs: usize,
    /// Initial batch of the SCSG schedule.
    pub initial_batch: usize,
    /// PEGASOS regularizer weight.
    pub lambda: f64,
    pub seed: u64,
    /// Start point override; the origin when absent.
    pub x0: Option<Vec<f64>>,
}

impl BaselineConfig {
    pub fn new(method: Method, eta: f64, epochs: usize, seed: u64) -> Self {
        BaselineConfig {
            method,
            eta,
            epochs,
            initial_batch: 100,
            lambda: 1e-4,
            seed,
            x0: None,
        }
    }

    pub fn with_start(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    fn start(&self, d: usize) -> Vec<f64> {
        match &self.x0 {
            Some(x0) => {
                assert_eq!(x0.len(), d);
                x0.clone()
            }
            None => vec![0.0; d],
        }
    }
}

pub fn run_baseline(
    problem: &dyn Problem,
    cfg: &BaselineConfig,
    meter: &mut GradMeter,
    observer: &mut dyn Observer,
) -> Result<Vec<f64>, SolverError> {
    if cfg.method != Method::Pegasos && !(cfg.eta > 0.0) {
        return Err(SolverError::Config("learning rate must be positive".into()));
    }
    match cfg.method {
        Method::Gd => run_gd(problem, cfg, meter, observer),
        Method::Svrg => run_svrg(problem, cfg, meter, observer),
        Method::Saga => run_saga(problem, cfg, meter, observer),
        Method::Scsg => run_scsg(problem, cfg, meter, observer),
        Method::Pegasos => run_pegasos(problem, cfg, meter, observer),
    }
}

fn run_gd(
    problem: &dyn Problem,
    cfg: &BaselineConfig,
    meter: &mut GradMeter,
    observer: &mut dyn Observer,
) -> Result<Vec<f64>, SolverError> {
    let mut x = cfg.start(problem.dim());
    let mut g = vec![0.0; problem.dim()];
    for step in 0..cfg.epochs {
        metered_full_gradient(problem, &x, meter, &mut g);
        vecmath::axpy(-cfg.eta, &g, &mut x);
        crate::problem::project(problem, &mut x);
        check_finite(&x, meter, &format!("gd step {step}"))?;
        if !observer.epoch_end(meter, &x, None) {
            return Ok(x);
        }
    }
    Ok(x)
}

fn run_svrg(
    problem: &dyn Problem,
    cfg: &BaselineConfig,
    meter: &mut GradMeter,
    observer: &mut dyn Observer,
) -> Result<Vec<f64>, SolverError> {
    let n = problem.n();
    let d = problem.dim();
    let mut x = cfg.start(d);
    let mut table: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
    let mut f0 = vec![0.0; d];
    let mut g_now = vec![0.0; d];
    let mut g_part = vec![0.0; d];
    let mut g_step = vec![0.0; d];
    let mut draws = DrawStream::new(cfg.seed, 0);
    let mut t_global: u64 = 0;

    for s in 0..cfg.epochs {
        // snapshot pass: fresh gradients for all components, kept in memory
        let x0 = x.clone();
        vecmath::fill_zero(&mut f0);
        {
            let mut oracle = Oracle::new(problem, meter);
            for (i, row) in table.iter_mut().enumerate() {
                oracle.grad(i, &x0, row);
                vecmath::axpy(1.0, row, &mut f0);
            }
        }
        vecmath::scale(1.0 / n as f64, &mut f0);

        for k in 0..2 * n {
            let i = draws.index_at(t_global, n);
            t_global += 1;
            {
                let mut oracle = Oracle::new(problem, meter);
                oracle.grad(i, &x, &mut g_now);
            }
            estimator(&f0, &g_now, &table[i], 1.0, &mut g_part);
            g_step.copy_from_slice(&g_part);
            problem.shared_gradient(&x, &mut g_step);
            vecmath::axpy(-cfg.eta, &g_step, &mut x);
            crate::problem::project(problem, &mut x);
            check_finite(&x, meter, &format!("svrg epoch {s}, iteration {k}"))?;
            if !observer.observe(meter, &x, None) {
                return Ok(x);
            }
        }
        // next epoch starts from x_m, not the iterate average
        if !observer.epoch_end(meter, &x, None) {
            return Ok(x);
        }
    }
    Ok(x)
}

fn run_saga(
    problem: &dyn Problem,
    cfg: &BaselineConfig,
    meter: &mut GradMeter,
    observer: &mut dyn Observer,
) -> Result<Vec<f64>, SolverError> {
    let n = problem.n();
    let d = problem.dim();
    let mut x = cfg.start(d);
    let mut table: Vec<Vec<f64>> = vec![vec![0.0; d]; n];
    let mut avg = vec![0.0; d];
    let mut g_now = vec![0.0; d];
    let mut g_step = vec![0.0; d];
    let mut draws = DrawStream::new(cfg.seed, 0);

    // one-pass table initialization at the start
    {
        let mut oracle = Oracle::new(problem, meter);
        for (i, row) in table.iter_mut().enumerate() {
            oracle.grad(i, &x, row);
            vecmath::axpy(1.0 / n as f64, row, &mut avg);
        }
    }

    let inv_n = 1.0 / n as f64;
    let mut t_global: u64 = 0;
    for epoch in 0..cfg.epochs {
        for _ in 0..n {
            let i = draws.index_at(t_global, n);
            t_global += 1;
            {
                let mut oracle = Oracle::new(problem, meter);
                oracle.grad(i, &x, &mut g_now);
            }
            for j in 0..d {
                g_step[j] = g_now[j] - table[i][j] + avg[j];
            }
            problem.shared_gradient(&x, &mut g_step);
            vecmath::axpy(-cfg.eta, &g_step, &mut x);
            crate::problem::project(problem, &mut x);
            check_finite(&x, meter, &format!("saga epoch {epoch}"))?;
            // table and running mean updated after the step
            for j in 0..d {
                avg[j] += (g_now[j] - table[i][j]) * inv_n;
                table[i][j] = g_now[j];
            }
            if !observer.observe(meter, &x, None) {
                return Ok(x);
            }
        }
        #[cfg(debug_assertions)]
        {
            let mut mean = vec![0.0; d];
            for row in &table {
                vecmath::axpy(inv_n, row, &mut mean);
            }
            let drift = vecmath::dist2(&mean, &avg);
            debug_assert!(
                drift <= 1e-9 * (1.0 + vecmath::norm2(&mean)),
                "saga aggregate drifted from table mean: {drift}"
            );
        }
        if !observer.epoch_end(meter, &x, None) {
            return Ok(x);
        }
    }
    Ok(x)
}

fn run_scsg(
    problem: &dyn Problem,
    cfg: &BaselineConfig,
    meter: &mut GradMeter,
    observer: &mut dyn Observer,
) -> Result<Vec<f64>, SolverError> {
    let n = problem.n();
    let d = problem.dim();
    let pool: Vec<usize> = (0..n).collect();
    let mut x = cfg.start(d);
    let mut f0 = vec![0.0; d];
    let mut g_now = vec![0.0; d];
    let mut g_snap = vec![0.0; d];
    let mut g_part = vec![0.0; d];
    let mut g_step = vec![0.0; d];
    let mut draws = DrawStream::new(cfg.seed, 0);
    let mut batch_draws = DrawStream::new(cfg.seed, 1);
    let mut t_global: u64 = 0;

    for s in 0..cfg.epochs {
        let b = usize::min(n, cfg.initial_batch << s.min(63));
        let batch = batch_draws.subset_at(s as u64, &pool, b);
        let x0 = x.clone();
        vecmath::fill_zero(&mut f0);
        {
            let mut oracle = Oracle::new(problem, meter);
            for &i in &batch {
                oracle.grad(i, &x0, &mut g_now);
                vecmath::axpy(1.0, &g_now, &mut f0);
            }
        }
        vecmath::scale(1.0 / b as f64, &mut f0);

        for k in 0..2 * b {
            let i = draws.index_at(t_global, n);
            t_global += 1;
            {
                // two fresh stochastic gradients per inner step
                let mut oracle = Oracle::new(problem, meter);
                oracle.grad(i, &x, &mut g_now);
                oracle.grad(i, &x0, &mut g_snap);
            }
            estimator(&f0, &g_now, &g_snap, 1.0, &mut g_part);
            g_step.copy_from_slice(&g_part);
            problem.shared_gradient(&x, &mut g_step);
            vecmath::axpy(-cfg.eta, &g_step, &mut x);
            crate::problem::project(problem, &mut x);
            check_finite(&x, meter, &format!("scsg epoch {s}, iteration {k}"))?;
            if !observer.observe(meter, &x, None) {
                return Ok(x);
            }
        }
        if !observer.epoch_end(meter, &x, None) {
            return Ok(x);
        }
    }
    Ok(x)
}

fn run_pegasos(
    problem: &dyn Problem,
    cfg: &BaselineConfig,
    meter: &mut GradMeter,
    observer: &mut dyn Observer,
) -> Result<Vec<f64>, SolverError> {
    if !(cfg.lambda > 0.0) {
        return Err(SolverError::Config("pegasos needs λ > 0".into()));
    }
    let n = problem.n();
    let d = problem.dim();
    let mut x = cfg.start(d);
    let mut g = vec![0.0; d];
    let mut draws = DrawStream::new(cfg.seed, 0);

    // vanilla variant: step 1/(λt), last iterate, no projection ball
    let mut t: u64 = 0;
    for epoch in 0..cfg.epochs {
        for _ in 0..n {
            let i = draws.index_at(t, n);
            t += 1;
            {
                let mut oracle = Oracle::new(problem, meter);
                oracle.grad(i, &x, &mut g);
            }
            problem.shared_gradient(&x, &mut g);
            let step = 1.0 / (cfg.lambda * t as f64);
            vecmath::axpy(-step, &g, &mut x);
            crate::problem::project(problem, &mut x);
            check_finite(&x, meter, &format!("pegasos epoch {epoch}"))?;
            if !observer.observe(meter, &x, None) {
                return Ok(x);
            }
        }
        if !observer.epoch_end(meter, &x, None) {
            return Ok(x);
        }
    }
    Ok(x)
}

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
