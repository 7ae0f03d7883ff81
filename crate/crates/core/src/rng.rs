//! Seeded generators and independent replicate streams.

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256PlusPlus as Generator;

pub fn generator(seed: u64) -> Generator {
    Generator::seed_from_u64(seed)
}

/// Stream `index` of the master seed: the master generator jumped `index` times.
pub fn stream(seed: u64, index: u64) -> Generator {
    let mut g = generator(seed);
    for _ in 0..index {
        g.jump();
    }
    g
}

/// Uniform draw in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
