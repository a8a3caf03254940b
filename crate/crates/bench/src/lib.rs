//! Input generators shared by the criterion benchmarks in `benches/`.

use pianoprobe_core::rng::SplitMix64;
use pianoprobe_core::{EmbeddingSequence, Matrix};

pub fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.next_f64()).collect())
        .expect("shape matches data")
}

pub fn random_sequence(rng: &mut SplitMix64, frames: usize, dim: usize) -> EmbeddingSequence {
    let data = (0..frames * dim).map(|_| rng.normal() as f32).collect();
    EmbeddingSequence::new("bench", "r0", vec![9, 10, 11, 12], dim, data).expect("valid sequence")
}
