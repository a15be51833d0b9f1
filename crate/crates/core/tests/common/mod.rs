// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use flsa_core::Signal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random test signal of length `n`, drawn from a handful of families:
/// pure noise, noisy steps, small integers (many ties) and wide-range values.
pub fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Signal {
    let family = rng.random_range(0..4);
    let values: Vec<f64> = match family {
        0 => (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        1 => {
            let jumps = rng.random_range(1..6);
            let mut level = 0.0;
            let mut out = Vec::with_capacity(n);
            for t in 0..n {
                if t > 0 && rng.random_range(0..n.max(1)) < jumps {
                    level += rng.random_range(-3.0..3.0);
                }
                out.push(level + 0.5 * rng.sample::<f64, _>(StandardNormal));
            }
            out
        }
        2 => (0..n).map(|_| rng.random_range(-2i32..3) as f64).collect(),
        _ => (0..n)
            .map(|_| 100.0 * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    };
    Signal::new(values).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
