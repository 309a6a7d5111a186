//! Entropically regularized dual of a packing LP, with bid-price recovery.
//!
//! A manager sells `d` resources (capacities `b_j`, unit revenues `r_j`) to
//! `n` customers; customer `i` buys resource `j` with probability `p_{i,j}`
//! when offered it. Entropic regularization of the assignment LP gives the
//! smooth dual
//!
//! ```text
//! f_i(x) = μ·n·p̄_i·log Z_i + ⟨x, b⟩,
//! Z_i = Σ_j exp((r_j − x_j)·p_{i,j} / (p̄_i·μ)),   x ≥ 0,
//! ```
//!
//! whose component gradient is `∇f_i(x)_j = b_j − n·p_{i,j}·w_{i,j}` with `w`
//! the softmax weights of the exponents. Because `μ` is tiny the weights
//! saturate on the best-adjusted-revenue resource `j*`, and the gradient
//! cannot move (beyond `e^{−θ}`-scale terms) until some other resource's
//! exponent comes within `θ` of `j*`'s; the lingering radius below is the
//! closed-form ∞-norm distance to that event.
//!
//! Bid prices `x` recover a primal assignment row by row via the same
//! softmax; the primal error truncates demand at capacity and compares the
//! collected revenue against a reference optimum.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::problem::{Domain, NormKind, Problem};

#[derive(Clone, Debug)]
pub struct LpInstance {
    n: usize,
    d: usize,
    /// Purchase probabilities, row-major `n×d`.
    p: Vec<f64>,
    /// Row maxima `p̄_i = max_j p_{i,j}`.
    p_bar: Vec<f64>,
    /// Unit revenues per resource.
    r: Vec<f64>,
    /// Capacities per resource; index 0 is the uncapacitated overflow
    /// resource (`b_0 > n`).
    b: Vec<f64>,
    mu: f64,
    theta: f64,
    seed: u64,
}

impl LpInstance {
    /// Synthetic instance: `p_{i,j} = u_i·v_j·z_{i,j}` with
    /// `u, v ~ U[0.2, 1]`, `z ~ U[0.5, 1]`; resource 0 gets capacity `2n` and
    /// revenue `0.05`, the rest draw `r ~ U[0.05, 0.95]` with capacity
    /// `0.01·n/d`; `μ = 10⁻⁵`, `θ = 5`.
    pub fn generate(n: usize, d: usize, seed: u64) -> Self {
        assert!(n >= d && d >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(0.2..1.0)).collect();
        let mut p = vec![0.0; n * d];
        let mut p_bar = vec![0.0; n];
        for i in 0..n {
            let mut best: f64 = 0.0;
            for j in 0..d {
                let val = u[i] * v[j] * rng.gen_range(0.5..1.0);
                p[i * d + j] = val;
                best = best.max(val);
            }
            p_bar[i] = best;
        }
        let mut r = vec![0.0; d];
        let mut b = vec![0.0; d];
        r[0] = 0.05;
        b[0] = 2.0 * n as f64;
        for j in 1..d {
            r[j] = rng.gen_range(0.05..0.95);
            b[j] = 0.01 * n as f64 / d as f64;
        }
        LpInstance {
            n,
            d,
            p,
            p_bar,
            r,
            b,
            mu: 1e-5,
            theta: 5.0,
            seed,
        }
    }

    /// Instance from explicit parameters (toy cases and tests).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n: usize,
        d: usize,
        p: Vec<f64>,
        r: Vec<f64>,
        b: Vec<f64>,
        mu: f64,
        theta: f64,
    ) -> Self {
        assert_eq!(p.len(), n * d);
        assert_eq!(r.len(), d);
        assert_eq!(b.len(), d);
        let p_bar = (0..n)
            .map(|i| {
                let m = p[i * d..(i + 1) * d].iter().cloned().fold(0.0, f64::max);
                assert!(m > 0.0, "row {i} of p is all zero");
                m
            })
            .collect();
        LpInstance {
            n,
            d,
            p,
            p_bar,
            r,
            b,
            mu,
            theta,
            seed: 0,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn capacities(&self) -> &[f64] {
        &self.b
    }

    pub fn revenues(&self) -> &[f64] {
        &self.r
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Customer `i`'s purchase-probability row.
    pub fn row_probs(&self, i: usize) -> &[f64] {
        self.row(i)
    }

    /// `p̄_i`, the row maximum.
    pub fn row_max(&self, i: usize) -> f64 {
        self.p_bar[i]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.d..(i + 1) * self.d]
    }

    /// Softmax weights of customer `i`'s exponents at `x`, max-subtracted so
    /// `Z_i` is never materialized unscaled (exponents reach `~1/μ`).
    fn weights(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let row = self.row(i);
        let scale = 1.0 / (self.p_bar[i] * self.mu);
        let mut m = f64::NEG_INFINITY;
        for j in 0..self.d {
            let e = (self.r[j] - x[j]) * row[j] * scale;
            out[j] = e;
            if e > m {
                m = e;
            }
        }
        let mut z = 0.0;
        for w in out.iter_mut() {
            *w = (*w - m).exp();
            z += *w;
        }
        for w in out.iter_mut() {
            *w /= z;
        }
    }

    /// Recovered primal assignment row `y_i`; sums to 1 by construction.
    pub fn primal_recover(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.d];
        self.weights(i, x, &mut y);
        y
    }

    /// Expected demand per resource under the recovered assignment:
    /// `Σ_i p_{i,j}·y_{i,j}`.
    pub fn demand(&self, x: &[f64]) -> Vec<f64> {
        let mut total = vec![0.0; self.d];
        let mut y = vec![0.0; self.d];
        for i in 0..self.n {
            self.weights(i, x, &mut y);
            let row = self.row(i);
            for j in 0..self.d {
                total[j] += row[j] * y[j];
            }
        }
        total
    }

    /// Revenue of the recovered assignment with demand truncated at capacity.
    pub fn truncated_revenue(&self, x: &[f64]) -> f64 {
        self.demand(x)
            .iter()
            .zip(&self.r)
            .zip(&self.b)
            .map(|((dem, r), b)| r * dem.min(*b))
            .sum()
    }

    /// `(OPT − truncated revenue) / OPT`; `opt_value ≤ 0` is a configuration
    /// error.
    pub fn primal_error(&self, x: &[f64], opt_value: f64) -> f64 {
        assert!(opt_value > 0.0, "reference OPT must be positive");
        (opt_value - self.truncated_revenue(x)) / opt_value
    }

    const MAGIC: &'static [u8; 4] = b"LPI1";

    /// Binary save: magic, `n`, `d`, `μ`, `θ`, `seed` header, then `r`, `b`,
    /// and the `p` matrix as little-endian `f64`.
    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(Self::MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.d as u64).to_le_bytes())?;
        w.write_all(&self.mu.to_le_bytes())?;
        w.write_all(&self.theta.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for v in self.r.iter().chain(&self.b).chain(&self.p) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        let mut rdr = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        rdr.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "not an LP instance file"));
        }
        let mut u64buf = [0u8; 8];
        let mut read_u64 = |r: &mut BufReader<File>| -> io::Result<u64> {
            r.read_exact(&mut u64buf)?;
            Ok(u64::from_le_bytes(u64buf))
        };
        let n = read_u64(&mut rdr)? as usize;
        let d = read_u64(&mut rdr)? as usize;
        let mut f64buf = [0u8; 8];
        let mut read_f64 = |r: &mut BufReader<File>| -> io::Result<f64> {
            r.read_exact(&mut f64buf)?;
            Ok(f64::from_le_bytes(f64buf))
        };
        let mu = read_f64(&mut rdr)?;
        let theta = read_f64(&mut rdr)?;
        let mut seedbuf = [0u8; 8];
        rdr.read_exact(&mut seedbuf)?;
        let seed = u64::from_le_bytes(seedbuf);
        let mut read_vec = |r: &mut BufReader<File>, len: usize| -> io::Result<Vec<f64>> {
            let mut v = Vec::with_capacity(len);
            let mut buf = [0u8; 8];
            for _ in 0..len {
                r.read_exact(&mut buf)?;
                v.push(f64::from_le_bytes(buf));
            }
            Ok(v)
        };
        let r = read_vec(&mut rdr, d)?;
        let b = read_vec(&mut rdr, d)?;
        let p = read_vec(&mut rdr, n * d)?;
        let mut inst = LpInstance::from_parts(n, d, p, r, b, mu, theta);
        inst.seed = seed;
        Ok(inst)
    }
}

impl Problem for LpInstance {
    fn n(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn norm_kind(&self) -> NormKind {
        // the radius guarantee is ∞-norm relative: a bigger safe region
        NormKind::Infinity
    }
    fn domain(&self) -> Domain {
        Domain::NonnegativeOrthant
    }

    fn part_value(&self, i: usize, x: &[f64]) -> f64 {
        let row = self.row(i);
        let scale = 1.0 / (self.p_bar[i] * self.mu);
        let mut m = f64::NEG_INFINITY;
        let mut exps = vec![0.0; self.d];
        for j in 0..self.d {
            let e = (self.r[j] - x[j]) * row[j] * scale;
            exps[j] = e;
            if e > m {
                m = e;
            }
        }
        let sum: f64 = exps.iter().map(|e| (e - m).exp()).sum();
        let log_z = m + sum.ln();
        self.mu * self.n as f64 * self.p_bar[i] * log_z
            + x.iter().zip(&self.b).map(|(a, c)| a * c).sum::<f64>()
    }

    fn part_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        self.weights(i, x, out);
        let row = self.row(i);
        for j in 0..self.d {
            out[j] = self.b[j] - self.n as f64 * row[j] * out[j];
        }
    }

    fn lingering_radius(&self, i: usize, x: &[f64]) -> f64 {
        if self.d == 1 {
            return f64::INFINITY;
        }
        let row = self.row(i);
        // adjusted revenue per resource; j* carries (almost) all the softmax
        // weight
        let mut best = 0usize;
        let mut best_a = f64::NEG_INFINITY;
        for j in 0..self.d {
            let a = (self.r[j] - x[j]) * row[j];
            if a > best_a {
                best_a = a;
                best = j;
            }
        }
        let slack = self.theta * self.p_bar[i] * self.mu;
        let mut delta = f64::INFINITY;
        for j in 0..self.d {
            if j == best {
                continue;
            }
            let denom = row[best] + row[j];
            if denom == 0.0 {
                continue;
            }
            let a_j = (self.r[j] - x[j]) * row[j];
            let cand = (best_a - a_j - slack) / denom;
            if cand < delta {
                delta = cand;
            }
        }
        delta.max(0.0)
    }
}
