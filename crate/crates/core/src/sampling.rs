use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Vector;

/// Deterministic generator for a seed. ChaCha is counter based, so a stream
/// index selects an independent sequence for the same seed.
pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform sample from the axis-aligned box of half-width `radius` around `center`.
pub(crate) fn in_box(rng: &mut impl Rng, center: &Vector, radius: f64) -> Vector {
    Vector::from_iterator(
        center.len(),
        center
            .iter()
            .map(|c| c + rng.random_range(-radius..=radius)),
    )
}
