//! Finite-sum convex optimization with lingering gradients.
//!
//! A component gradient `∇f_i(x)` often stays valid in a whole neighborhood of
//! `x`: each problem here exposes a *lingering radius* `δ(x, i)` such that the
//! gradient is unchanged (to tolerance) anywhere within that distance. The
//! solvers in this crate exploit those radii to skip gradient recomputation:
//!
//! * [`gdlin`] — gradient descent whose per-epoch index sets are organized by a
//!   lowbit (binary-carry) schedule, so the maintained aggregate is always the
//!   exact full gradient while only a small subset is recomputed per step.
//! * [`svrglin`] — a variance-reduced method that freezes components whose
//!   snapshot gradients are still in range, samples only from the rest, and
//!   shrinks the estimator's variance accordingly (plus a subsampled variant).
//! * [`baselines`] — GD, SVRG, SAGA, SCSG and PEGASOS under the same metering
//!   and reporting contracts, for benchmark comparisons.
//!
//! Two applications ship as problem plugins: the entropically regularized dual
//! of a packing LP ([`packing_lp`]) and soft-margin SVM training ([`svm`]),
//! both with closed-form lingering radii. [`synthetic`] holds small engineered
//! problems used by the test and benchmark suites.
//!
//! Work is accounted in *passes*: the number of `(gradient, radius)` oracle
//! evaluations divided by `n`. Objective evaluations for reporting are free.

pub mod baselines;
pub mod gdlin;
pub mod lowbit;
pub mod packing_lp;
pub mod problem;
pub mod record;
pub mod rng;
pub mod schedule;
pub mod svm;
pub mod svrglin;
pub mod synthetic;
pub mod vecmath;

pub use problem::{Domain, GradMeter, NormKind, Oracle, Problem, EQ_TOL};
pub use record::{Observer, RunRecord, SolverError, Tracker};
