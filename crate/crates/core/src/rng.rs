//! Seed derivation. Every randomized routine takes its generator from a
//! [`SeedStream`] so that a single 64-bit run seed fixes all randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// A splittable seed: children are derived by hashing a label into the parent seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// FNV-1a; stable across platforms and releases.
fn label_hash(label: &str) -> u64 {
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn child(&self, label: &str) -> SeedStream {
        SeedStream {
            seed: splitmix64(self.seed ^ splitmix64(label_hash(label))),
        }
    }

    pub fn indexed(&self, index: u64) -> SeedStream {
        SeedStream {
            seed: splitmix64(self.seed.wrapping_add(splitmix64(index ^ 0xA5A5_A5A5_A5A5_A5A5))),
        }
    }

    pub fn rng(&self, label: &str) -> Rng {
        Rng::seed_from_u64(self.child(label).seed)
    }

    /// A generator seeded with this stream's seed as is.
    pub fn to_rng(&self) -> Rng {
        Rng::seed_from_u64(self.seed)
    }
}

/// Standard normal draw (Box–Muller) without pulling in a distribution crate.
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.random();
        if u1 > f64::MIN_POSITIVE {
            let u2: f64 = rng.random();
            return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        }
    }
}
