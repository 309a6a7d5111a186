// exploratory probe: honest reference + criterion-3 feasibility (to be removed)

use linger::packing_lp::LpInstance;
use linger::problem::{full_objective, profile_b, project, GradMeter, Problem};
use linger::problem::full_gradient;
use linger::svrglin::{run_svrglin, SvrgLinConfig};
use linger::vecmath::axpy;
use linger::Tracker;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn armijo(inst: &dyn Problem, x0: &[f64], iters: usize) -> Vec<f64> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut f = full_objective(inst, &x);
    let mut g = vec![0.0; d];
    let mut step = 1e-8;
    for _ in 0..iters {
        full_gradient(inst, &x, &mut g);
        loop {
            let mut cand = x.clone();
            axpy(-step, &g, &mut cand);
            project(inst, &mut cand);
            let fc = full_objective(inst, &cand);
            if fc < f {
                x = cand;
                f = fc;
                step *= 1.4;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return x;
            }
        }
    }
    x
}

/// annealed warm-started reference: stages of svrg_lin with shrinking eta
fn reference(inst: &LpInstance, passes_per_stage: f64) -> (Vec<f64>, f64) {
    let mut x = vec![0.0; inst.dim()];
    let mut best_f = f64::INFINITY;
    let mut best_x = x.clone();
    for (stage, eta) in [1e-6, 1e-7, 1e-8].into_iter().enumerate() {
        let mut cfg = SvrgLinConfig::svrg_lin(eta, 1_000_000, 1).with_start(x.clone());
        cfg.max_inner_iterations = Some(6_000_000);
        cfg.distance_exact_every = Some(1000);
        let mut meter = GradMeter::new(inst.n());
        let mut tr = Tracker::new(inst, 0.0, passes_per_stage);
        x = run_svrglin(inst, &cfg, &mut meter, &mut tr).unwrap();
        let f = full_objective(inst, &x);
        println!("  stage {stage} eta={eta:.0e}: f={f:.12e} passes={:.1}", meter.passes());
        if f < best_f {
            best_f = f;
            best_x = x.clone();
        }
    }
    let polished = armijo(inst, &best_x, 1500);
    let fp = full_objective(inst, &polished);
    println!("  armijo: f={fp:.12e}");
    if fp < best_f {
        (polished, fp)
    } else {
        (best_x, best_f)
    }
}

fn wide_instance(n: usize, d: usize, seed: u64, zlo: f64, pscale: f64) -> LpInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let v: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..1.0)).collect();
    let mut p = vec![0.0; n * d];
    for i in 0..n {
        for j in 0..d {
            p[i * d + j] = pscale * u[i] * v[j] * rng.gen_range(zlo..1.0);
        }
    }
    let mut r = vec![0.0; d];
    let mut b = vec![0.0; d];
    r[0] = 0.05;
    b[0] = 2.0 * n as f64;
    for j in 1..d {
        r[j] = rng.gen_range(0.05..0.95);
        b[j] = 0.01 * n as f64 / d as f64;
    }
    LpInstance::from_parts(n, d, p, r, b, 1e-5, 5.0)
}

fn main() {
    let n = 100_000;
    let d = 50;
    let which = std::env::args().nth(1).unwrap_or_else(|| "s01".into());
    for (label, zlo, pscale) in [("z05", 0.5, 1.0), ("z005", 0.05, 1.0), ("s01", 0.5, 0.1), ("s01w", 0.05, 0.1)] {
        if label != which {
            continue;
        }
        let inst = wide_instance(n, d, 7, zlo, pscale);
        let t0 = std::time::Instant::now();
        println!("[{label}] reference:");
        let cache = std::path::PathBuf::from(format!("/tmp/ref_{label}.bin"));
        let (xstar, fstar) = if cache.exists() {
            let bytes = std::fs::read(&cache).unwrap();
            let xs: Vec<f64> = bytes.chunks(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let f = full_objective(&inst, &xs);
            (xs, f)
        } else {
            let (xs, f) = reference(&inst, 30.0);
            let mut bytes = Vec::new();
            for v in &xs { bytes.extend_from_slice(&v.to_le_bytes()); }
            std::fs::write(&cache, bytes).unwrap();
            (xs, f)
        };
        let opt_rev = inst.truncated_revenue(&xstar);
        println!(
            "[{label}] f*={fstar:.12e} opt_rev={opt_rev:.8e} wall={:.0}s",
            t0.elapsed().as_secs_f64()
        );
        let mut m2 = GradMeter::new(n);
        let grid = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1];
        let prof = profile_b(&inst, &xstar, &grid, &mut m2);
        print!("[{label}] CDF at x*:");
        for (r, frac) in &prof {
            print!("  {r:.0e}:{frac:.3}");
        }
        println!();

        // criterion-3 style run: fixed eta from 0, track passes to thresholds
        for eta in [1e-6, 3e-7, 1e-7] {
            let mut cfg = SvrgLinConfig::svrg_lin(eta, 1_000_000, 1);
            cfg.max_inner_iterations = Some(12_000_000);
            cfg.distance_exact_every = Some(1000);
            let mut meter = GradMeter::new(n);
            let mut tracker = Tracker::new(&inst, fstar, 30.0)
                .with_primal(Box::new(|x: &[f64]| inst.primal_error(x, opt_rev)));
            let x = run_svrglin(&inst, &cfg, &mut meter, &mut tracker).unwrap();
            let p_primal = tracker
                .records
                .iter()
                .find(|r| r.primal_error.unwrap_or(1.0) <= 1e-5)
                .map(|r| r.pass_count);
            let p_dual = tracker.passes_to(1e-10);
            println!(
                "[{label}] svrg_lin eta={eta:.0e}: final relerr={:.2e} primal={:.2e} | passes_to(primal 1e-5)={p_primal:?} passes_to(dual 1e-10)={p_dual:?}",
                (full_objective(&inst, &x) - fstar) / fstar.abs().max(1.0),
                inst.primal_error(&x, opt_rev),
            );
        }
    }
}
