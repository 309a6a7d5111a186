//! Lowbit arithmetic for the gradient-reuse schedule.
//!
//! `lowbit(k)` is the largest power of two dividing `k`. The lowbit sequence
//! of `k` walks `k → k − lowbit(k) → …` down to zero and is returned in
//! increasing order `(0, …, k)`; it names the past iterations whose cached
//! gradients a schedule may still reuse at iteration `k`.

/// Largest `2^i` dividing `k`. Fatal for `k = 0`.
pub fn lowbit(k: usize) -> usize {
    assert!(k >= 1, "lowbit is undefined at 0");
    k & k.wrapping_neg()
}

/// The lowbit sequence `(k_0 = 0, k_1, …, k_t = k)` with
/// `k_i = k_{i+1} − lowbit(k_{i+1})`.
pub fn lowbit_sequence(k: usize) -> Vec<usize> {
    assert!(k >= 1, "lowbit sequence is undefined at 0");
    let mut seq = Vec::with_capacity(k.count_ones() as usize + 1);
    let mut cur = k;
    while cur > 0 {
        seq.push(cur);
        cur -= lowbit(cur);
    }
    seq.push(0);
    seq.reverse();
    seq
}
