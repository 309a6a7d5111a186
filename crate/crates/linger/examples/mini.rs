// timing probe
use linger::packing_lp::LpInstance;
use linger::problem::{full_objective, GradMeter, Problem};
use linger::svrglin::{run_svrglin, SvrgLinConfig};
use linger::Tracker;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

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
    let inst = wide_instance(n, d, 7, 0.5, 0.1);
    for eta in [1e-7, 3e-8, 1e-8] {
        let t0 = std::time::Instant::now();
        let mut cfg = SvrgLinConfig::svrg_lin(eta, 5_000_000, 1);
        cfg.max_inner_iterations = Some(30_000_000);
        let mut meter = GradMeter::new(n);
        let mut tracker = Tracker::new(&inst, 0.0, 30.0);
        let x = run_svrglin(&inst, &cfg, &mut meter, &mut tracker).unwrap();
        println!(
            "eta={eta:.0e}: f={:.12e} passes={:.2} wall={:.1}s",
            full_objective(&inst, &x),
            meter.passes(),
            t0.elapsed().as_secs_f64(),
        );
        for r in tracker.records.iter().rev().take(2) {
            println!("  pass {:.2} f={:.8e} frozen={:?}", r.pass_count, r.objective_error, r.live_count);
        }
    }
}
