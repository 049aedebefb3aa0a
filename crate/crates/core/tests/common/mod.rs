#![allow(dead_code)]

use regen_uvn::linalg::{spectral_radius, DenseMatrix};
use regen_uvn::transition::{build_row_normalized, hhat};
use regen_uvn::ChainRng;

/// Expected first-passage cycle weight `E[α^{ij}]`: the sum over all paths
/// `i -> ... -> j` that reach `j` only at their last step of the product of
/// the `A` entries along the path (probability times weight ratio).
///
/// Paths are aggregated by (length, current state) and enumerated up to
/// `max_len` steps; enumeration stops once the surviving mass drops below
/// `prune`.
pub fn first_passage_mean(a: &DenseMatrix, i: usize, j: usize, max_len: usize, prune: f64) -> f64 {
    let d = a.dim();
    let mut mass = vec![0.0; d];
    mass[i] = 1.0;
    let mut total = 0.0;
    for _ in 0..max_len {
        let mut next = vec![0.0; d];
        for (u, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (v, slot) in next.iter_mut().enumerate() {
                *slot += m * a[(u, v)];
            }
        }
        total += next[j];
        next[j] = 0.0;
        if next.iter().map(|v| v.abs()).sum::<f64>() < prune {
            break;
        }
        mass = next;
    }
    total
}

/// Random matrix with every entry nonzero: magnitudes in `[0.2, 1]`, random signs
/// when `signed`.
pub fn random_full_support(d: usize, signed: bool, rng: &mut ChainRng) -> DenseMatrix {
    DenseMatrix::from_fn(d, |_, _| {
        let magnitude = 0.2 + 0.8 * rng.uniform();
        if signed && rng.uniform() < 0.5 {
            -magnitude
        } else {
            magnitude
        }
    })
}

/// Rescales `a` so that `ρ(Ĥ) = rho` under the row-normalized kernel
/// (that kernel is scale invariant and `Ĥ` scales with the square).
pub fn scale_to_hhat_radius(a: &DenseMatrix, rho: f64) -> DenseMatrix {
    let p = build_row_normalized(a).unwrap();
    let current = spectral_radius(&hhat(a, &p), 1e-13, 1_000_000).value;
    a.scale((rho / current).sqrt())
}

pub fn mean_se(values: &[f64]) -> (f64, f64) {
    regen_uvn::metrics::mean_and_se(values)
}
