//! Waveform augmentations and the random chain that combines them.

mod chain;
pub(crate) mod fft;
pub mod filter;
mod level;
pub mod noise;
pub mod pitch;
pub mod reverb;

pub use chain::{apply_chain, AppliedChainRecord, SkippedAugmentation, CHAIN_NOISE_EXPONENT, CHAIN_RT60_S};
pub use filter::{highpass, lowpass};
pub use level::{apply_gain, invert_polarity};
pub use noise::add_colored_noise;
pub use pitch::pitch_shift;
pub use reverb::reverberate;
