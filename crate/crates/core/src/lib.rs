//! Style-learning melodic phrase composition.
//!
//! The pipeline parses phrase-annotated monophonic MIDI corpora, trains
//! off-beat-parametric higher-order Markov models over pitch and duration
//! states, extracts clustered low-pass Fourier contours of melody and
//! rhythm, and composes fixed-length phrases that follow a selected contour
//! under exact-length and cadence constraints, backtracking on dead ends.
//!
//! All musical time is exact rational arithmetic in quarter-note units; see
//! [`time::RationalTime`].

pub mod cluster;
pub mod composer;
pub mod contour;
pub mod corpus;
pub mod error;
pub mod markov;
pub mod midi;
pub mod model;
pub mod pipeline;
pub mod score;
pub mod time;

pub use error::{Error, Result};
pub use score::{Melody, Note, Phrase};
pub use time::RationalTime;
