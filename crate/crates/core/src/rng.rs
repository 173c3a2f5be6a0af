//! Seeded, splittable random streams.
//!
//! Every random entity (one IHR's fading, one UEHR's CSI error, the replay
//! sampler, ...) draws from its own ChaCha8 stream, addressed by a tag and an
//! index. Adding a node therefore never shifts the draws of another node.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use num_complex::Complex64;

/// What a substream is used for. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamTag {
    IhrPlacement = 1,
    UehrPlacement = 2,
    FadingBs = 3,
    FadingIhr = 4,
    FadingUehr = 5,
    FadingDirect = 6,
    CsiError = 7,
    NetworkInit = 8,
    Policy = 9,
    Replay = 10,
    Exploration = 11,
    Misc = 12,
}

/// A root seed from which named substreams and child streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for entity `index` of kind `tag`.
    pub fn substream(&self, tag: StreamTag, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((tag as u64) << 48) ^ index);
        rng
    }

    /// Derived root, e.g. one per episode or per Monte Carlo trial.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(index.wrapping_add(0xA5A5_5A5A))),
        }
    }
}

/// One `CN(0, 1)` sample (real and imaginary parts each with variance 1/2).
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
