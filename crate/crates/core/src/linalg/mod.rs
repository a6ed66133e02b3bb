//! Dense linear-algebra substrate: seeded Gaussian sampling, block
//! assembly, singular values and condition numbers.

mod matrix;
mod rng;
mod spectrum;

pub use matrix::{add_rect_identity, hconcat, sample_gaussian, scale, Matrix};
pub use rng::SeedSpec;
pub use spectrum::{condition_number, singular_values, Conditioning, SingularSpectrum};
