//! Soft-margin SVM training: LibSVM ingestion, the `λ‖x‖²/2`-regularized
//! hinge and its smoothed variant, closed-form lingering radii, and a
//! Gaussian generator for radius-profile experiments.
//!
//! Components split as `f_i(x) = λ‖x‖²/2 + hinge_i(x)`: the regularizer is
//! analytic and shared, so the lingering contract covers the data-dependent
//! hinge part only. With margin `m = b_i⟨x, a_i⟩` the smoothed hinge is
//!
//! ```text
//! 0                 m ≥ 1
//! (1 − m) − μ/2     m ≤ 1 − μ
//! (1 − m)²/(2μ)     otherwise
//! ```
//!
//! (the quadratic interpolation matching value and slope at both ends; `μ = 0`
//! recovers the plain hinge with subgradient 0 at the kink). Outside the
//! interpolation zone the hinge gradient is constant, so the radius is the
//! Euclidean distance to the zone boundary: `(m − 1)/‖a_i‖` when `m ≥ 1`,
//! `(1 − μ − m)/‖a_i‖` when `m ≤ 1 − μ`, and `+∞` for points inside the zone
//! (they are vanishingly few at small `μ` and zero at `μ = 0`).

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::problem::Problem;
use crate::vecmath;

/// Sparse binary-classification dataset in CSR layout.
#[derive(Clone, Debug)]
pub struct SvmDataset {
    d: usize,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    /// Strictly `±1`.
    labels: Vec<f64>,
    row_norms: Vec<f64>,
    lambda: f64,
    mu_smooth: f64,
}

/// LibSVM parsing failures; every variant names the offending line.
#[derive(Debug, thiserror::Error)]
pub enum SvmParseError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: empty line has no label")]
    MissingLabel { line: usize },
    #[error("line {line}: label {token:?} is not +1/-1")]
    BadLabel { line: usize, token: String },
    #[error("line {line}: feature token {token:?} is not index:value")]
    BadFeature { line: usize, token: String },
    #[error("line {line}: feature index must be ≥ 1")]
    BadIndex { line: usize },
}

impl SvmDataset {
    /// Parses the LibSVM sparse text format: per line
    /// `<label> <idx>:<val> ...` with 1-based indices. The dimension is the
    /// maximum observed index.
    pub fn parse_libsvm(path: &Path) -> Result<Self, SvmParseError> {
        let file = File::open(path).map_err(|source| SvmParseError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_reader(BufReader::new(file), path)
    }

    fn parse_reader<R: BufRead>(reader: R, path: &Path) -> Result<Self, SvmParseError> {
        let mut offsets = vec![0usize];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut d = 0usize;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| SvmParseError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let line_id = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut tokens = trimmed.split_ascii_whitespace();
            let label_tok = tokens.next().ok_or(SvmParseError::MissingLabel { line: line_id })?;
            let label = match label_tok {
                "+1" | "1" => 1.0,
                "-1" => -1.0,
                other => {
                    return Err(SvmParseError::BadLabel {
                        line: line_id,
                        token: other.to_string(),
                    })
                }
            };
            labels.push(label);
            for tok in tokens {
                let (idx_str, val_str) =
                    tok.split_once(':').ok_or_else(|| SvmParseError::BadFeature {
                        line: line_id,
                        token: tok.to_string(),
                    })?;
                let idx: usize = idx_str.parse().map_err(|_| SvmParseError::BadFeature {
                    line: line_id,
                    token: tok.to_string(),
                })?;
                if idx == 0 {
                    return Err(SvmParseError::BadIndex { line: line_id });
                }
                let val: f64 = val_str.parse().map_err(|_| SvmParseError::BadFeature {
                    line: line_id,
                    token: tok.to_string(),
                })?;
                indices.push((idx - 1) as u32);
                values.push(val);
                d = d.max(idx);
            }
            offsets.push(indices.len());
        }
        let n = labels.len();
        let mut ds = SvmDataset {
            d,
            offsets,
            indices,
            values,
            labels,
            row_norms: Vec::new(),
            lambda: if n > 0 { 1.0 / n as f64 } else { 1.0 },
            mu_smooth: 0.0,
        };
        ds.recompute_norms();
        Ok(ds)
    }

    /// Dataset from dense rows (the Gaussian generator's path).
    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Self {
        let n = rows.len();
        assert_eq!(n, labels.len());
        assert!(labels.iter().all(|&b| b == 1.0 || b == -1.0));
        let d = rows.first().map_or(0, |r| r.len());
        let mut offsets = vec![0usize];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            assert_eq!(row.len(), d);
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j as u32);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        let mut ds = SvmDataset {
            d,
            offsets,
            indices,
            values,
            labels,
            row_norms: Vec::new(),
            lambda: 1.0 / n as f64,
            mu_smooth: 0.0,
        };
        ds.recompute_norms();
        ds
    }

    fn recompute_norms(&mut self) {
        self.row_norms = (0..self.n_rows())
            .map(|i| {
                let (_, vals) = self.row(i);
                vals.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect();
    }

    /// Multiplies every row by `n/Σ‖a_i‖` so the average Euclidean norm is 1.
    pub fn rescaled(mut self) -> Self {
        let total: f64 = self.row_norms.iter().sum();
        assert!(total > 0.0, "cannot rescale an all-zero dataset");
        let c = self.n_rows() as f64 / total;
        for v in self.values.iter_mut() {
            *v *= c;
        }
        self.recompute_norms();
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        assert!(lambda >= 0.0);
        self.lambda = lambda;
        self
    }

    /// Smoothing width `μ ≥ 0`; zero keeps the plain hinge.
    pub fn with_smoothing(mut self, mu: f64) -> Self {
        assert!(mu >= 0.0);
        self.mu_smooth = mu;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn smoothing(&self) -> f64 {
        self.mu_smooth
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row_norms[i]
    }

    pub fn mean_row_norm(&self) -> f64 {
        self.row_norms.iter().sum::<f64>() / self.n_rows() as f64
    }

    fn n_rows(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let range = self.offsets[i]..self.offsets[i + 1];
        (&self.indices[range.clone()], &self.values[range])
    }

    pub fn margin(&self, i: usize, x: &[f64]) -> f64 {
        let (idx, vals) = self.row(i);
        let dot: f64 = idx
            .iter()
            .zip(vals)
            .map(|(&j, &v)| x[j as usize] * v)
            .sum();
        self.labels[i] * dot
    }

    /// Hinge-part slope `τ` such that the part gradient is `−τ·b_i·a_i`.
    fn hinge_slope(&self, m: f64) -> f64 {
        let mu = self.mu_smooth;
        if m >= 1.0 {
            0.0
        } else if m <= 1.0 - mu {
            1.0
        } else {
            (1.0 - m) / mu
        }
    }
}

impl Problem for SvmDataset {
    fn n(&self) -> usize {
        self.n_rows()
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn smoothness(&self) -> Option<f64> {
        if self.mu_smooth > 0.0 {
            let max_sq = self
                .row_norms
                .iter()
                .fold(0.0f64, |m, &v| m.max(v * v));
            Some(self.lambda + max_sq / self.mu_smooth)
        } else {
            None
        }
    }

    fn part_value(&self, i: usize, x: &[f64]) -> f64 {
        let m = self.margin(i, x);
        let mu = self.mu_smooth;
        if m >= 1.0 {
            0.0
        } else if m <= 1.0 - mu {
            (1.0 - m) - mu / 2.0
        } else {
            (1.0 - m) * (1.0 - m) / (2.0 * mu)
        }
    }

    fn part_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        vecmath::fill_zero(out);
        let m = self.margin(i, x);
        let tau = self.hinge_slope(m);
        if tau != 0.0 {
            let scale = -tau * self.labels[i];
            let (idx, vals) = self.row(i);
            for (&j, &v) in idx.iter().zip(vals) {
                out[j as usize] = scale * v;
            }
        }
    }

    fn lingering_radius(&self, i: usize, x: &[f64]) -> f64 {
        let norm = self.row_norms[i];
        if norm == 0.0 {
            return f64::INFINITY;
        }
        let m = self.margin(i, x);
        let mu = self.mu_smooth;
        if m >= 1.0 {
            (m - 1.0) / norm
        } else if m <= 1.0 - mu {
            (1.0 - mu - m) / norm
        } else {
            f64::INFINITY
        }
    }

    fn shared_value(&self, x: &[f64]) -> f64 {
        0.5 * self.lambda * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn shared_gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o += self.lambda * xi;
        }
    }
}

/// Parameters of the Gaussian data model: rows `a_i ~ N(μ_i, (σ²/d)·I)` with
/// `‖μ_i‖·√d/σ ≤ κ`, labels uniform `±1`.
#[derive(Clone, Debug)]
pub struct GaussianSpec {
    pub n: usize,
    pub d: usize,
    pub sigma: f64,
    pub kappa: f64,
    pub seed: u64,
}

pub fn generate_gaussian(spec: &GaussianSpec) -> SvmDataset {
    assert!(spec.sigma > 0.0 && spec.kappa >= 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sd = spec.sigma / (spec.d as f64).sqrt();
    let mean_cap = spec.kappa * sd;
    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        // mean: random direction, length uniform within the κ bound
        let mut mu: Vec<f64> = (0..spec.d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let len = vecmath::norm2(&mu);
        let target = rng.gen_range(0.0..mean_cap);
        if len > 0.0 {
            vecmath::scale(target / len, &mut mu);
        }
        let row: Vec<f64> = mu
            .iter()
            .map(|&m| m + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        rows.push(row);
        labels.push(if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
    }
    SvmDataset::from_dense(&rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{component_gradient, component_value, full_objective};
    use std::io::Cursor;

    fn parse_str(text: &str) -> Result<SvmDataset, SvmParseError> {
        SvmDataset::parse_reader(Cursor::new(text.as_bytes()), Path::new("<memory>"))
    }

    #[test]
    fn parses_basic_lines() {
        let ds = parse_str("+1 3:0.5 7:1\n-1 1:2\n").unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.dim(), 7);
        assert_eq!(ds.label(0), 1.0);
        assert_eq!(ds.label(1), -1.0);
        let (idx, vals) = ds.row(0);
        assert_eq!(idx, &[2, 6]);
        assert_eq!(vals, &[0.5, 1.0]);
    }

    #[test]
    fn rejects_zero_label_with_line_number() {
        let err = parse_str("+1 1:1\n0 1:1\n").unwrap_err();
        match err {
            SvmParseError::BadLabel { line, token } => {
                assert_eq!(line, 2);
                assert_eq!(token, "0");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn rejects_malformed_feature_and_bad_index() {
        assert!(matches!(
            parse_str("+1 3x0.5\n").unwrap_err(),
            SvmParseError::BadFeature { line: 1, .. }
        ));
        assert!(matches!(
            parse_str("+1 0:1\n").unwrap_err(),
            SvmParseError::BadIndex { line: 1 }
        ));
    }

    #[test]
    fn rescale_normalizes_mean_norm() {
        let ds = parse_str("+1 1:3\n-1 2:4\n+1 1:1 2:2\n")
            .unwrap()
            .rescaled();
        assert!((ds.mean_row_norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn objective_at_origin_is_one() {
        // every hinge term is max{0, 1} = 1 and the regularizer vanishes
        let ds = parse_str("+1 1:0.5\n-1 2:0.3\n").unwrap();
        assert_eq!(full_objective(&ds, &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn inactive_hinge_gives_regularizer_gradient() {
        // margin 2 > 1: hinge part inactive, ∇f_i = λx
        let ds = parse_str("+1 1:1\n").unwrap().with_lambda(0.25);
        let x = vec![2.0];
        let mut g = vec![0.0];
        component_gradient(&ds, 0, &x, &mut g);
        assert_eq!(g, vec![0.25 * 2.0]);
        assert_eq!(ds.part_value(0, &x), 0.0);
    }

    #[test]
    fn smoothed_branches_meet_continuously() {
        let mu = 0.01;
        let ds = parse_str("+1 1:1\n").unwrap().with_smoothing(mu);
        // margin exactly 1 − μ: middle and linear branches agree in value
        // and slope
        let m = 1.0 - mu;
        let linear_value = (1.0 - m) - mu / 2.0;
        let quad_value = (1.0 - m) * (1.0 - m) / (2.0 * mu);
        assert!((linear_value - quad_value).abs() < 1e-15);
        assert!((ds.hinge_slope(m) - 1.0).abs() < 1e-12);
        // value through the problem interface at x with margin 1 − μ
        assert!((ds.part_value(0, &[m]) - linear_value).abs() < 1e-15);
    }

    #[test]
    fn radius_examples() {
        // margin 1.5 with ‖a‖ = 2 → (1.5 − 1)/2
        let ds = parse_str("+1 1:2\n").unwrap().with_smoothing(0.01);
        assert!((ds.lingering_radius(0, &[0.75]) - 0.25).abs() < 1e-12);
        // margin 0.5, μ = 0.01, ‖a‖ = 1 → 0.49
        let ds = parse_str("+1 1:1\n").unwrap().with_smoothing(0.01);
        assert!((ds.lingering_radius(0, &[0.5]) - 0.49).abs() < 1e-12);
        // margin strictly inside (1 − μ, 1) → +∞
        assert_eq!(ds.lingering_radius(0, &[0.995]), f64::INFINITY);
    }

    #[test]
    fn zero_feature_rows_are_degenerate_but_legal() {
        let ds = parse_str("+1 2:1\n-1 2:0\n").unwrap();
        assert_eq!(ds.row_norm(1), 0.0);
        assert_eq!(ds.lingering_radius(1, &[1.0, 1.0]), f64::INFINITY);
        let mut g = vec![0.0; 2];
        ds.part_gradient(1, &[1.0, 1.0], &mut g);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_finite_differences_smoothed() {
        use rand::Rng;
        use rand::SeedableRng;
        let spec = GaussianSpec {
            n: 30,
            d: 5,
            sigma: 1.0,
            kappa: 2.0,
            seed: 5,
        };
        let ds = generate_gaussian(&spec).with_smoothing(0.01).with_lambda(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = vec![0.0; 5];
        for _ in 0..20 {
            let i = rng.gen_range(0..30);
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            component_gradient(&ds, i, &x, &mut g);
            for j in 0..5 {
                let h = 1e-6;
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd =
                    (component_value(&ds, i, &xp) - component_value(&ds, i, &xm)) / (2.0 * h);
                assert!(
                    (fd - g[j]).abs() / g[j].abs().max(1.0) <= 1e-5,
                    "i={i} j={j}: {fd} vs {}",
                    g[j]
                );
            }
        }
    }

    #[test]
    fn smoothing_converges_to_hinge() {
        let spec = GaussianSpec {
            n: 50,
            d: 4,
            sigma: 1.0,
            kappa: 1.5,
            seed: 9,
        };
        let hinge = generate_gaussian(&spec);
        let x: Vec<f64> = vec![0.3, -0.2, 0.5, 0.1];
        let base = full_objective(&hinge, &x);
        for mu in [0.1, 0.01, 0.001] {
            let smooth = hinge.clone().with_smoothing(mu);
            let gap = (full_objective(&smooth, &x) - base).abs();
            assert!(gap <= mu / 2.0 + 1e-12, "mu={mu}: gap {gap}");
        }
    }

    #[test]
    fn gaussian_row_norms_match_chi_square_expectation() {
        let spec = GaussianSpec {
            n: 10_000,
            d: 20,
            sigma: 2.0,
            kappa: 1.0,
            seed: 12,
        };
        let ds = generate_gaussian(&spec);
        let mean_sq: f64 = (0..ds.n()).map(|i| ds.row_norm(i).powi(2)).sum::<f64>() / 1e4;
        // E‖a‖² = σ² + E‖μ‖² = σ²(1 + κ²/(3d))
        let expected = 4.0 * (1.0 + 1.0 / 60.0);
        assert!(
            (mean_sq - expected).abs() / expected < 0.05,
            "{mean_sq} vs {expected}"
        );
        // determinism
        let again = generate_gaussian(&spec);
        assert_eq!(ds.values, again.values);
        assert_eq!(ds.labels, again.labels);
    }

    #[test]
    fn hinge_branch_cannot_flip_within_radius() {
        use rand::Rng;
        use rand::SeedableRng;
        let spec = GaussianSpec {
            n: 40,
            d: 6,
            sigma: 1.5,
            kappa: 1.2,
            seed: 21,
        };
        let ds = generate_gaussian(&spec); // μ = 0: exact branches everywhere
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut g0 = vec![0.0; 6];
        let mut g1 = vec![0.0; 6];
        for _ in 0..2000 {
            let i = rng.gen_range(0..40);
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let delta = ds.lingering_radius(i, &x);
            if delta == 0.0 {
                continue;
            }
            let mut u: Vec<f64> = (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let len = vecmath::norm2(&u);
            vecmath::scale(1.0 / len, &mut u);
            let t = rng.gen_range(0.0..delta.min(1e3));
            let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + t * b).collect();
            ds.part_gradient(i, &x, &mut g0);
            ds.part_gradient(i, &y, &mut g1);
            assert_eq!(g0, g1, "hinge gradient moved within radius");
        }
    }
}
