//! Shared generators for the benchmark suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const AMINO: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

pub fn random_sequences(n: usize, len: (usize, usize), seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let l = rng.gen_range(len.0..=len.1);
            let seq: String = (0..l).map(|_| AMINO[rng.gen_range(0..AMINO.len())] as char).collect();
            (format!("s{i:05}"), seq)
        })
        .collect()
}
