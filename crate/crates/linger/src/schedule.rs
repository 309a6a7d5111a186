//! Index sets and the per-component gradient cache for lingering GD epochs.
//!
//! Within an epoch of `m` truncated steps of length at most `ξ`, iteration `k`
//! recomputes gradients only for the index set `Λ_k`:
//!
//! * `Λ_0 = [n]`;
//! * for `k ≥ 1` with lowbit sequence `(k_0, …, k_t)`, `Λ_k` is the disjoint
//!   union over `i < t` of `B_{k_i}(k − k_i) \ B_{k_i}(k_{t−1} − k_i)`, where
//!   `B_ℓ(r) = Λ_ℓ ∩ {j : δ(x_ℓ, j) < r·ξ}`.
//!
//! Every other index is served from the cache: its stored gradient was taken
//! at some `x_ℓ` within lingering range of `x_k`, so the maintained aggregate
//! equals the exact full gradient at every iteration.
//!
//! Buckets keep their members sorted by radius, so each `B_ℓ(r)` is a prefix
//! identified by a single integer; a `(bucket, r) → count` cursor table makes
//! slice extraction proportional to the slice size. A bucket `ℓ` is only
//! referenced while `k < ℓ + lowbit(ℓ)`, which caps simultaneously retained
//! buckets at `⌈log₂ k⌉ + 1`.

use std::collections::HashMap;

use crate::lowbit::{lowbit, lowbit_sequence};
use crate::problem::Oracle;
use crate::vecmath;

/// Per-index stored gradients plus their running mean.
pub struct LingeringCache {
    per_index: Vec<Vec<f64>>,
    aggregate: Vec<f64>,
    n: usize,
}

impl LingeringCache {
    pub fn new(n: usize, d: usize) -> Self {
        LingeringCache {
            per_index: vec![vec![0.0; d]; n],
            aggregate: vec![0.0; d],
            n,
        }
    }

    /// `g ← g + (new − g_i)/n`, then `g_i ← new`.
    pub fn update(&mut self, i: usize, new_grad: &[f64]) {
        assert!(i < self.n);
        let inv_n = 1.0 / self.n as f64;
        let old = &mut self.per_index[i];
        for j in 0..new_grad.len() {
            self.aggregate[j] += (new_grad[j] - old[j]) * inv_n;
            old[j] = new_grad[j];
        }
    }

    /// The maintained mean of the stored gradients.
    pub fn aggregate(&self) -> &[f64] {
        &self.aggregate
    }

    pub fn stored(&self, i: usize) -> &[f64] {
        &self.per_index[i]
    }

    /// Re-derives the aggregate from the stored gradients, discarding float
    /// drift accumulated by the incremental updates. Called at epoch starts.
    pub fn recompute_aggregate(&mut self) {
        vecmath::fill_zero(&mut self.aggregate);
        for g in &self.per_index {
            vecmath::axpy(1.0, g, &mut self.aggregate);
        }
        vecmath::scale(1.0 / self.n as f64, &mut self.aggregate);
    }
}

struct Bucket {
    /// `(δ(x_ℓ, j), j)` sorted ascending; ties broken by index so runs are
    /// reproducible. Infinite radii sort last and are never sliced out.
    members: Vec<(f64, usize)>,
}

/// The lowbit schedule state for one epoch.
pub struct IndexSchedule {
    xi: f64,
    n: usize,
    buckets: HashMap<usize, Bucket>,
    /// `(bucket, r) → |B_bucket(r)|` already resolved.
    cursors: HashMap<(usize, usize), usize>,
}

impl IndexSchedule {
    /// `xi` is the epoch's step radius `ξ = C/m`.
    pub fn new(n: usize, xi: f64) -> Self {
        assert!(xi > 0.0 && xi.is_finite());
        IndexSchedule {
            xi,
            n,
            buckets: HashMap::new(),
            cursors: HashMap::new(),
        }
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Number of index sets currently held.
    pub fn retained_buckets(&self) -> usize {
        self.buckets.len()
    }

    /// Builds `Λ_k` at the epoch's iteration `k` and point `x_k`: members get
    /// fresh `(gradient, radius)` pairs recorded in `cache` (one meter unit
    /// each) and become bucket `k`, sorted by radius. Prerequisite buckets are
    /// the lowbit-sequence entries below `k`; missing ones are a schedule-use
    /// bug and panic.
    pub fn build_index_set(
        &mut self,
        k: usize,
        x_k: &[f64],
        oracle: &mut Oracle,
        cache: &mut LingeringCache,
    ) -> Vec<usize> {
        let lambda_k: Vec<usize> = if k == 0 {
            (0..self.n).collect()
        } else {
            let seq = lowbit_sequence(k);
            let t = seq.len() - 1;
            let k_prev = seq[t - 1];
            let mut out = Vec::new();
            for &k_i in &seq[..t] {
                let (lo, hi) = self.slice(k_i, k_prev - k_i, k - k_i);
                let bucket = &self.buckets[&k_i];
                out.extend(bucket.members[lo..hi].iter().map(|&(_, j)| j));
            }
            out
        };

        let mut members = Vec::with_capacity(lambda_k.len());
        let mut grad = vec![0.0; x_k.len()];
        for &j in &lambda_k {
            let delta = oracle.grad_and_radius(j, x_k, &mut grad);
            assert!(!delta.is_nan() && delta >= 0.0, "invalid lingering radius");
            cache.update(j, &grad);
            members.push((delta, j));
        }
        members.sort_by(|a, b| a.partial_cmp(b).unwrap());
        self.buckets.insert(k, Bucket { members });
        self.drop_stale(k);
        lambda_k
    }

    /// Member range of `B_ℓ(r_hi) \ B_ℓ(r_lo)` in bucket `ℓ`, advancing the
    /// cursor table.
    fn slice(&mut self, bucket: usize, r_lo: usize, r_hi: usize) -> (usize, usize) {
        debug_assert!(r_lo < r_hi);
        let members = &self
            .buckets
            .get(&bucket)
            .unwrap_or_else(|| panic!("schedule misuse: bucket {bucket} was not built or was dropped"))
            .members;
        let lo = if r_lo == 0 {
            0
        } else {
            match self.cursors.get(&(bucket, r_lo)) {
                Some(&l) => l,
                // not previously queried: resolve the prefix directly
                None => members.partition_point(|&(d, _)| d < r_lo as f64 * self.xi),
            }
        };
        let threshold = r_hi as f64 * self.xi;
        let mut hi = lo;
        while hi < members.len() && members[hi].0 < threshold {
            hi += 1;
        }
        self.cursors.insert((bucket, r_hi), hi);
        (lo, hi)
    }

    /// Bucket `ℓ` is last referenced at iteration `ℓ + lowbit(ℓ) − 1`.
    fn drop_stale(&mut self, k: usize) {
        self.buckets
            .retain(|&l, _| l == 0 || k < l + lowbit(l));
        self.cursors.retain(|&(l, _), _| self.buckets.contains_key(&l));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{full_gradient, GradMeter, Oracle, Problem};
    use crate::synthetic::PrescribedRadius;
    use crate::vecmath::dist2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn cache_update_matches_direct_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (n, d) = (2, 5);
        let mut cache = LingeringCache::new(n, d);
        let mut grads = vec![vec![0.0; d]; n];
        for _ in 0..20 {
            let i = rng.gen_range(0..n);
            let g: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            grads[i] = g.clone();
            cache.update(i, &g);
            let mut mean = vec![0.0; d];
            for gi in &grads {
                vecmath::axpy(1.0 / n as f64, gi, &mut mean);
            }
            assert!(dist2(cache.aggregate(), &mean) < 1e-12);
        }
    }

    #[test]
    fn cache_update_same_gradient_is_noop() {
        let mut cache = LingeringCache::new(3, 2);
        cache.update(1, &[2.0, -1.0]);
        let before = cache.aggregate().to_vec();
        cache.update(1, &[2.0, -1.0]);
        assert_eq!(cache.aggregate(), &before[..]);
    }

    #[test]
    fn cache_single_component_replaces_aggregate() {
        let mut cache = LingeringCache::new(1, 2);
        cache.update(0, &[1.0, 2.0]);
        cache.update(0, &[-4.0, 0.5]);
        assert!(dist2(cache.aggregate(), &[-4.0, 0.5]) < 1e-12);
    }

    /// Drives a schedule over `m` iterations of a radius table, with `x_k`
    /// encoding the iteration number (the mock problem reads radii off it).
    fn drive(
        problem: &PrescribedRadius,
        m: usize,
        xi: f64,
    ) -> (IndexSchedule, Vec<Vec<usize>>) {
        let n = problem.n();
        let mut meter = GradMeter::new(n);
        let mut sched = IndexSchedule::new(n, xi);
        let mut cache = LingeringCache::new(n, 1);
        let mut sets = Vec::new();
        for k in 0..m {
            let x = vec![k as f64];
            let mut oracle = Oracle::new(problem, &mut meter);
            let set = sched.build_index_set(k, &x, &mut oracle, &mut cache);
            sets.push(set);
        }
        (sched, sets)
    }

    #[test]
    fn lambda_zero_is_everyone_and_bills_one_pass() {
        let p = PrescribedRadius::constant(4, vec![10.0, 10.0, 10.0, 10.0]);
        let mut meter = GradMeter::new(4);
        let mut sched = IndexSchedule::new(4, 1.0);
        let mut cache = LingeringCache::new(4, 1);
        let mut oracle = Oracle::new(&p, &mut meter);
        let set = sched.build_index_set(0, &[0.0], &mut oracle, &mut cache);
        assert_eq!(set, vec![0, 1, 2, 3]);
        assert_eq!(meter.passes(), 1.0);
    }

    #[test]
    fn all_radii_beyond_epoch_travel_give_empty_sets() {
        // every δ(x_0, ·) > m·ξ: nothing ever needs recomputation
        let m = 16;
        let p = PrescribedRadius::constant(4, vec![100.0; 4]);
        let (_, sets) = drive(&p, m, 1.0);
        for set in &sets[1..] {
            assert!(set.is_empty());
        }
    }

    #[test]
    fn first_bucket_slice_matches_definition() {
        // n = 3, δ(x_0, ·) = (0.5ξ, 1.5ξ, 9ξ): Λ_1 = B_0(1) = {0}
        let p = PrescribedRadius::constant(3, vec![0.5, 1.5, 9.0]);
        let (_, sets) = drive(&p, 2, 1.0);
        assert_eq!(sets[1], vec![0]);
    }

    /// Reference construction of the Λ and Λ⊥ slices straight from the index
    /// set definition, independent of the cursor machinery.
    fn reference_slices(
        radii: &[Vec<f64>],
        sets: &[Vec<usize>],
        k: usize,
        xi: f64,
    ) -> (Vec<BTreeSet<usize>>, Vec<BTreeSet<usize>>) {
        let seq = lowbit_sequence(k);
        let t = seq.len() - 1;
        let b = |l: usize, r: usize| -> BTreeSet<usize> {
            sets[l]
                .iter()
                .copied()
                .filter(|&j| radii[l][j] < r as f64 * xi)
                .collect()
        };
        let mut lam = Vec::new();
        let mut lam_perp = Vec::new();
        for i in 0..t {
            let k_i = seq[i];
            let hi = b(k_i, k - k_i);
            let lo = b(k_i, seq[t - 1] - k_i);
            lam.push(hi.difference(&lo).copied().collect());
            // Λ⊥ slice: survivors of bucket k_i minus every later bucket
            let mut perp: BTreeSet<usize> = sets[k_i]
                .iter()
                .copied()
                .filter(|&j| !hi.contains(&j))
                .collect();
            for &k_j in &seq[i + 1..t] {
                let later: BTreeSet<usize> = sets[k_j].iter().copied().collect();
                perp = perp.difference(&later).copied().collect();
            }
            lam_perp.push(perp);
        }
        (lam, lam_perp)
    }

    #[test]
    fn slices_partition_the_index_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n = rng.gen_range(4..=64);
            let m = rng.gen_range(4..=64);
            let xi = 1.0;
            let radii: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    (0..n)
                        .map(|_| {
                            if rng.gen_bool(0.1) {
                                f64::INFINITY
                            } else {
                                rng.gen_range(0.0..1.5 * m as f64)
                            }
                        })
                        .collect()
                })
                .collect();
            let p = PrescribedRadius::table(n, radii.clone());
            let (_, sets) = drive(&p, m, xi);

            for k in 1..m {
                let (lam, perp) = reference_slices(&radii, &sets, k, xi);
                // the built Λ_k equals the union of the reference slices
                let built: BTreeSet<usize> = sets[k].iter().copied().collect();
                let mut union = BTreeSet::new();
                let mut total = 0;
                for s in lam.iter().chain(perp.iter()) {
                    total += s.len();
                    union.extend(s.iter().copied());
                }
                let lam_union: BTreeSet<usize> =
                    lam.iter().flat_map(|s| s.iter().copied()).collect();
                assert_eq!(built, lam_union, "Λ_{k} mismatch");
                // pairwise disjoint (total size equals union size) and cover [n]
                assert_eq!(total, union.len(), "slices overlap at k={k}");
                assert_eq!(union.len(), n, "slices miss indices at k={k}");
            }
        }
    }

    #[test]
    fn aggregate_tracks_brute_force_full_gradient() {
        // gradients move with x, radii are honest for the staircase problem
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.gen_range(4..=32);
            let m = rng.gen_range(4..=32);
            let p = crate::synthetic::Staircase::new(n, 1.0, 1e-3, rng.gen());
            let xi = 1.0 / m as f64;
            let mut meter = GradMeter::new(n);
            let mut sched = IndexSchedule::new(n, xi);
            let mut cache = LingeringCache::new(n, 1);
            let mut x = vec![0.3];
            let mut exact = vec![0.0];
            for k in 0..m {
                let mut oracle = Oracle::new(&p, &mut meter);
                sched.build_index_set(k, &x, &mut oracle, &mut cache);
                full_gradient(&p, &x, &mut exact);
                let err = dist2(cache.aggregate(), &exact);
                assert!(
                    err <= 1e-9 * exact[0].abs().max(1.0),
                    "aggregate drifted from full gradient at k={k}: {err}"
                );
                // truncated step of length exactly ξ
                let g = cache.aggregate()[0];
                if g != 0.0 {
                    x[0] -= xi * g.signum();
                }
            }
        }
    }

    #[test]
    fn retained_buckets_stay_logarithmic() {
        let p = PrescribedRadius::constant(8, vec![3.0; 8]);
        let n = 8;
        let m = 512;
        let mut meter = GradMeter::new(n);
        let mut sched = IndexSchedule::new(n, 1.0);
        let mut cache = LingeringCache::new(n, 1);
        for k in 0..m {
            let x = vec![k as f64];
            let mut oracle = Oracle::new(&p, &mut meter);
            sched.build_index_set(k, &x, &mut oracle, &mut cache);
            let bound = (k.max(2) as f64).log2().ceil() as usize + 1;
            assert!(
                sched.retained_buckets() <= bound,
                "k={k}: {} buckets retained, bound {bound}",
                sched.retained_buckets()
            );
        }
    }
}
