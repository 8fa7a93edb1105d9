//! Seeded random states for fixtures and property checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::state::{AmplitudeVector, Complex, HybridState, PathId, QuditAmplitudes};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit_box_complex<R: Rng>(rng: &mut R) -> Complex {
    Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// A normalized qudit state with generic complex amplitudes.
pub fn random_qudit<R: Rng>(rng: &mut R) -> QuditAmplitudes {
    loop {
        let amps = [(); 4].map(|_| unit_box_complex(rng));
        if let Some(q) = QuditAmplitudes::from_ascending(amps).normalized() {
            if q.norm_sq() > 0.0 {
                return q;
            }
        }
    }
}

/// A normalized hybrid state with every amplitude populated.
pub fn random_hybrid<R: Rng>(paths: &[PathId], rng: &mut R) -> HybridState {
    let mut s = HybridState::zeros(paths.iter().copied());
    for a in s.amplitudes_mut() {
        *a = unit_box_complex(rng);
    }
    let n = s.norm_sq().sqrt();
    s.scaled(Complex::new(1.0 / n, 0.0))
}
