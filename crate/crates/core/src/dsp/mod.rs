//! Receiver-side primitives: band-split filters, resampling, STFT and Mel analysis.

pub mod elliptic;
pub mod filter;
pub mod mel;
pub mod resample;
pub mod stft;
pub mod window;

pub use filter::{design_elliptic, filter_apply, Biquad, EllipticSpec, FilterCascade, FilterKind};
pub use mel::{mel_spectrogram, MelConfig, MelFeature, MelFilterbank, MEL_BANDS};
pub use resample::{resample_3to1, Resampler};
pub use stft::{bin_hz, stft, ComplexSpectrogram, StftParams};
pub use window::WindowKind;
