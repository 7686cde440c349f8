//! Phonocardiogram screening pipeline.
//!
//! Turns heart-sound recordings (WAV, 4 kHz mono) into a per-patient
//! screening decision: band-pass + z-score preprocessing, an MFCC stack and
//! handcrafted HRV/spectral features, a small parallel-branch 1D CNN with
//! feature fusion, and patient-level aggregation of per-recording
//! probabilities. A synthetic cohort generator provides labeled data for
//! end-to-end exercise of the whole chain.
//!
//! The crate is organized along the pipeline:
//!
//! - [`audio`]: WAV I/O, the recording manifest, patient-wise splits
//! - [`dsp`]: Butterworth band-pass design/filtering, z-scoring, STFT
//! - [`mfcc`]: mel filterbank, DCT-II cepstra, delta stacking
//! - [`features`]: beat detection, HRV metrics, spectral summaries
//! - [`stats`]: Mann-Whitney U feature screening
//! - [`nn`]: the CNN itself — forward, backprop, Adam, checkpoints
//! - [`eval`]: aggregation, confusion metrics, ROC/PR, cross-validation
//! - [`synth`]: synthetic PCG cohort generation
//! - [`cache`]: on-disk feature cache read/write
//! - [`config`]: the single pipeline configuration document
//! - [`pipeline`]: orchestration glue used by the CLI subcommands

pub mod audio;
pub mod cache;
pub mod config;
pub mod dsp;
pub mod eval;
pub mod features;
pub mod mfcc;
pub mod nn;
pub mod pipeline;
pub mod stats;
pub mod synth;
