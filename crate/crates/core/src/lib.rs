//! Symbolic melody toolkit: clip model, MIDI I/O, REMI tokens with region
//! markers, motif variant labeling, emotion-driven motif synthesis, and
//! corpus metrics.

pub mod clip;
pub mod labeler;
pub mod metrics;
pub mod midi;
pub mod quantize;
pub mod remi;
pub mod synth;
pub mod ttmm;

pub use clip::{ChordEvent, ChordQuality, Clip, ClipError, MotifLabel, NoteEvent, VariantLabel, VariantType};
pub use midi::{parse_midi, write_midi, MidiError};
pub use quantize::{quantize_clip, RawClip};
pub use remi::{decode, encode, Token, TokenSeq};
