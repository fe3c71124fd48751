#![allow(dead_code)]

use ssd::PositionVector;

const PRIMES: [u32; 40] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

/// Kronecker (additive recurrence) sequence on `[-1, 1]^d`: coordinate `j` of
/// point `idx` is `2 frac(0.5 + idx sqrt(p_j)) - 1`. Deterministic, no RNG.
pub fn kronecker_point(idx: usize, offset: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|j| {
            let alpha = (PRIMES[(offset + j) % PRIMES.len()] as f64).sqrt().fract();
            2.0 * (0.5 + idx as f64 * alpha).fract() - 1.0
        })
        .collect()
}

/// Raw (non-orthonormal) frame number `idx`: dimension 2..=6, 1..=N directions.
pub fn raw_directions(idx: usize) -> Vec<PositionVector> {
    let n = 2 + idx % 5;
    let k = 1 + (idx / 5) % n;
    (0..k)
        .map(|i| PositionVector::from_vec(kronecker_point(idx + 1, i * n, n)))
        .collect()
}

/// A probe vector matching frame `idx`'s dimension.
pub fn probe_vector(idx: usize, n: usize) -> PositionVector {
    PositionVector::from_vec(kronecker_point(idx + 7, 33, n)) * (1.0 + (idx % 13) as f64)
}

/// One pass/fail line per checked item.
pub fn report(id: &str, label: &str, pass: bool, detail: impl AsRef<str>) -> bool {
    println!(
        "[{}] {id} {label}: {}",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    pass
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}
