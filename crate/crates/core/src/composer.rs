//! Phrase generation: interleaved duration-then-pitch sampling from the
//! parametric Markov models, masked by ending constraints, filtered toward
//! the learned contours, with backtracking when the training data runs out.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contour::{contour_at, ContourModel};
use crate::error::{Error, Result};
use crate::markov::{offbeat, PitchSymbol, SymbolId, TransitionModel, BLANK};
use crate::score::{Note, Phrase};
use crate::time::RationalTime;

/// Pitch classes of the C major tonic triad (c, e, g in any octave).
pub const TONIC_TRIAD_PITCH_CLASSES: [u8; 3] = [0, 4, 7];

/// All tweakables of one training + composition run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Markov order m.
    pub order: usize,
    /// Phrase length B in 4/4 bars; the composition spans exactly 4*B counts.
    pub bars: u32,
    /// Gaussian variance for the melody contour filter, in semitones².
    pub sigma2_pitch: f64,
    /// Gaussian variance for the rhythm contour filter, in quarter-notes².
    pub sigma2_rhythm: f64,
    /// Weight between cluster size and contour width in cluster selection.
    pub gamma: f64,
    /// Retained FFT coefficients per contour feature.
    pub lowpass_k: usize,
    pub max_clusters: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            order: 4,
            bars: 4,
            sigma2_pitch: 4.0,
            sigma2_rhythm: 0.33,
            gamma: 3.0,
            lowpass_k: 6,
            max_clusters: 17,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn total_counts(&self) -> RationalTime {
        RationalTime::from_int(4 * i64::from(self.bars))
    }

    /// All fields must be positive.
    pub fn validate(&self) -> Result<()> {
        let ok = self.order >= 1
            && self.bars >= 1
            && self.sigma2_pitch > 0.0
            && self.sigma2_rhythm > 0.0
            && self.gamma > 0.0
            && self.lowpass_k >= 1
            && self.max_clusters >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig {
                detail: "order, bars, sigma2s, gamma, lowpass_k and max_clusters must be positive"
                    .into(),
            })
        }
    }
}

/// Ablation switches for a single composition run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComposeOptions {
    /// When false, both Gaussian contour filters are bypassed (all-ones).
    pub use_contour: bool,
    /// When false, every model query is keyed at off-beat 0; pair this with
    /// [`TransitionModel::collapse_offbeats`] for the pure Markov baseline.
    pub use_offbeat: bool,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions { use_contour: true, use_offbeat: true }
    }
}

/// Search-tree accounting of one composition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// (duration, pitch) pairs committed, including ones later undone.
    pub pairs_drawn: usize,
    /// Pairs that failed: dead-end child or deeper exhaustion.
    pub pair_failures: usize,
    /// Re-draws of a duration while holding the failed pitch fixed.
    pub duration_retries: usize,
    /// Times a node moved on to a fresh pitch after exhausting one.
    pub pitch_changes: usize,
    /// Climbs to the parent after a node exhausted every pair.
    pub climbs: usize,
}

/// `mask[i] = 1` iff the duration state fits into the remaining counts, so
/// no drawn duration can overshoot the requested length.
pub fn ending_mask_duration(duration_states: &[RationalTime], remaining: RationalTime) -> Vec<f64> {
    debug_assert!(remaining.is_positive());
    duration_states
        .iter()
        .map(|d| if *d <= remaining { 1.0 } else { 0.0 })
        .collect()
}

/// For the final note only, keep sounding pitches from the tonic triad;
/// rests may not end a phrase. Any other note passes everything.
pub fn ending_mask_pitch(pitch_states: &[PitchSymbol], is_last_note: bool) -> Vec<f64> {
    if !is_last_note {
        return vec![1.0; pitch_states.len()];
    }
    pitch_states
        .iter()
        .map(|s| match s.pitch() {
            Some(p) if TONIC_TRIAD_PITCH_CLASSES.contains(&(p % 12)) => 1.0,
            _ => 0.0,
        })
        .collect()
}

/// The Gaussian density with mean `mu` and variance `sigma2`.
pub fn gaussian(x: f64, mu: f64, sigma2: f64) -> f64 {
    debug_assert!(sigma2 > 0.0);
    let sigma = sigma2.sqrt();
    (-((x - mu) * (x - mu)) / (2.0 * sigma2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Gaussian weights over numeric states.
pub fn gaussian_filter(state_values: &[f64], mu: f64, sigma2: f64) -> Vec<f64> {
    state_values.iter().map(|&v| gaussian(v, mu, sigma2)).collect()
}

/// Gaussian weights over pitch states. The rest symbol has no pitch
/// coordinate, so it bypasses the filter with weight 1.
pub fn pitch_gaussian_filter(states: &[PitchSymbol], mu: f64, sigma2: f64) -> Vec<f64> {
    states
        .iter()
        .map(|s| match s.pitch() {
            Some(p) => gaussian(f64::from(p), mu, sigma2),
            None => 1.0,
        })
        .collect()
}

/// Element-wise `t ⊙ mask ⊙ f`, L1-normalized. An all-zero product returns
/// the zero vector; the caller must treat that as a dead end.
pub fn filtered_transition(t: &[f64], mask: &[f64], filter: &[f64]) -> Vec<f64> {
    assert!(t.len() == mask.len() && t.len() == filter.len());
    let mut out: Vec<f64> = t
        .iter()
        .zip(mask)
        .zip(filter)
        .map(|((&t, &m), &f)| t * m * f)
        .collect();
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        for v in &mut out {
            *v /= sum;
        }
    } else {
        out.iter_mut().for_each(|v| *v = 0.0);
    }
    out
}

/// Inverse-transform sampling: the smallest index with positive probability
/// whose accumulative sum reaches `r`.
///
/// Panics on a zero vector; dead ends must be handled before drawing.
pub fn draw_state(t_prime: &[f64], r: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &p) in t_prime.iter().enumerate() {
        acc += p;
        if p > 0.0 {
            last_positive = Some(i);
            if r <= acc {
                return i;
            }
        }
    }
    // float accumulation can fall a hair short of 1.0
    last_positive.expect("draw_state called with a zero vector")
}

/// Everything a node needs to keep trying (duration, pitch) pairs for the
/// note starting at `onset`.
struct SearchNode {
    onset: RationalTime,
    /// Admissible duration distribution: transition row ⊙ ending mask ⊙
    /// rhythm Gaussian, normalized.
    dur_dist: Vec<f64>,
    /// Pitch distribution with the Gaussian applied but no ending mask;
    /// the mask depends on the drawn duration.
    pitch_dist: Vec<f64>,
    /// Final-note admissibility per pitch state.
    pitch_last_ok: Vec<bool>,
    /// Durations tried per pitch, per the backtracking contract.
    tried: BTreeMap<SymbolId, BTreeSet<SymbolId>>,
    exhausted_pitches: BTreeSet<SymbolId>,
    /// Durations that admit no pitch at all (final-note mask annihilation).
    dead_durations: BTreeSet<SymbolId>,
    current_pitch: Option<SymbolId>,
    /// The pair whose child currently sits above this node on the stack.
    committed: Option<(SymbolId, SymbolId)>,
    is_last: Vec<bool>,
}

enum Draw {
    Pair(SymbolId, SymbolId),
    Exhausted,
}

impl SearchNode {
    fn record_failure(&mut self, duration: SymbolId, pitch: SymbolId) {
        self.current_pitch = Some(pitch);
        self.tried.entry(pitch).or_default().insert(duration);
    }

    fn duration_allowed(&self, id: usize, tried_for_pitch: Option<&BTreeSet<SymbolId>>) -> bool {
        self.dur_dist[id] > 0.0
            && !self.dead_durations.contains(&(id as SymbolId))
            && tried_for_pitch.is_none_or(|t| !t.contains(&(id as SymbolId)))
    }

    fn pitch_allowed_under(&self, id: usize, duration: SymbolId) -> bool {
        self.pitch_dist[id] > 0.0 && (!self.is_last[duration as usize] || self.pitch_last_ok[id])
    }

    fn next_pair(&mut self, rng: &mut impl Rng, stats: &mut SearchStats) -> Draw {
        loop {
            if let Some(pitch) = self.current_pitch {
                // stick to the failed pitch until every duration for it failed
                let tried = self.tried.get(&pitch).cloned().unwrap_or_default();
                let duration = draw_restricted(&self.dur_dist, rng, |i| {
                    self.duration_allowed(i, Some(&tried))
                });
                let Some(duration) = duration else {
                    self.exhausted_pitches.insert(pitch);
                    self.current_pitch = None;
                    continue;
                };
                stats.duration_retries += 1;
                if !self.pitch_allowed_under(pitch as usize, duration) {
                    // this duration makes the note final and the pitch is no
                    // cadence: the pair can never work
                    self.tried.entry(pitch).or_default().insert(duration);
                    continue;
                }
                return Draw::Pair(duration, pitch);
            }

            if self.tried.is_empty() && self.exhausted_pitches.is_empty() {
                // fresh node: duration first, then pitch under its mask
                let duration =
                    draw_restricted(&self.dur_dist, rng, |i| self.duration_allowed(i, None));
                let Some(duration) = duration else { return Draw::Exhausted };
                let pitch = draw_restricted(&self.pitch_dist, rng, |i| {
                    self.pitch_allowed_under(i, duration)
                });
                let Some(pitch) = pitch else {
                    self.dead_durations.insert(duration);
                    continue;
                };
                return Draw::Pair(duration, pitch);
            }

            // a pitch was exhausted: draw a fresh one, then durations for it
            let pitch = draw_restricted(&self.pitch_dist, rng, |i| {
                self.pitch_dist[i] > 0.0 && !self.exhausted_pitches.contains(&(i as SymbolId))
            });
            let Some(pitch) = pitch else { return Draw::Exhausted };
            stats.pitch_changes += 1;
            self.current_pitch = Some(pitch);
            self.tried.entry(pitch).or_default();
        }
    }
}

fn draw_restricted(
    dist: &[f64],
    rng: &mut impl Rng,
    allowed: impl Fn(usize) -> bool,
) -> Option<SymbolId> {
    let masked: Vec<f64> = dist
        .iter()
        .enumerate()
        .map(|(i, &p)| if allowed(i) { p } else { 0.0 })
        .collect();
    let sum: f64 = masked.iter().sum();
    if sum <= 0.0 {
        return None;
    }
    let normalized: Vec<f64> = masked.iter().map(|p| p / sum).collect();
    Some(draw_state(&normalized, rng.gen::<f64>()) as SymbolId)
}

/// Compose one phrase of exactly `4 * config.bars` counts.
pub fn compose_phrase(
    pitch_model: &TransitionModel<PitchSymbol>,
    duration_model: &TransitionModel<RationalTime>,
    pitch_contour: &ContourModel,
    rhythm_contour: &ContourModel,
    config: &GeneratorConfig,
    options: &ComposeOptions,
    rng: &mut impl Rng,
) -> Result<Phrase> {
    compose_phrase_with_stats(
        pitch_model,
        duration_model,
        pitch_contour,
        rhythm_contour,
        config,
        options,
        rng,
    )
    .map(|(phrase, _)| phrase)
}

/// [`compose_phrase`] plus backtracking statistics.
#[allow(clippy::too_many_arguments)]
pub fn compose_phrase_with_stats(
    pitch_model: &TransitionModel<PitchSymbol>,
    duration_model: &TransitionModel<RationalTime>,
    pitch_contour: &ContourModel,
    rhythm_contour: &ContourModel,
    config: &GeneratorConfig,
    options: &ComposeOptions,
    rng: &mut impl Rng,
) -> Result<(Phrase, SearchStats)> {
    config.validate()?;
    let c_total = config.total_counts();
    let c_total_f = c_total.to_f64();
    let order = config.order;
    let duration_states = duration_model.alphabet().states().to_vec();
    let duration_values: Vec<f64> = duration_states.iter().map(|d| d.to_f64()).collect();
    let pitch_states = pitch_model.alphabet().states().to_vec();
    let mut stats = SearchStats::default();

    let query_offbeat = |onset: RationalTime| {
        if options.use_offbeat {
            offbeat(onset)
        } else {
            RationalTime::zero()
        }
    };

    let context_of = |symbols: &[SymbolId]| -> Vec<SymbolId> {
        let mut ctx = vec![BLANK; order];
        let tail = symbols.len().min(order);
        ctx[order - tail..].copy_from_slice(&symbols[symbols.len() - tail..]);
        ctx
    };

    // Build the node choosing the note at `onset` given the committed prefix.
    // `None` means the node is stillborn: one of its base vectors is zero.
    let make_node = |onset: RationalTime,
                     dur_prefix: &[SymbolId],
                     pitch_prefix: &[SymbolId]|
     -> Result<Option<SearchNode>> {
        let key = query_offbeat(onset);
        let remaining = c_total - onset;
        let t_norm = onset.to_f64() / c_total_f;

        let t_d = duration_model.transition_vector(key, &context_of(dur_prefix))?;
        let mask_d = ending_mask_duration(&duration_states, remaining);
        let f_d = if options.use_contour {
            gaussian_filter(
                &duration_values,
                contour_at(rhythm_contour, t_norm),
                config.sigma2_rhythm,
            )
        } else {
            vec![1.0; duration_values.len()]
        };
        let dur_dist = filtered_transition(&t_d, &mask_d, &f_d);
        if dur_dist.iter().all(|&p| p == 0.0) {
            return Ok(None);
        }

        let t_p = pitch_model.transition_vector(key, &context_of(pitch_prefix))?;
        let f_p = if options.use_contour {
            pitch_gaussian_filter(
                &pitch_states,
                contour_at(pitch_contour, t_norm),
                config.sigma2_pitch,
            )
        } else {
            vec![1.0; pitch_states.len()]
        };
        let ones = vec![1.0; pitch_states.len()];
        let pitch_dist = filtered_transition(&t_p, &ones, &f_p);
        if pitch_dist.iter().all(|&p| p == 0.0) {
            return Ok(None);
        }

        let last_mask = ending_mask_pitch(&pitch_states, true);
        let pitch_last_ok = last_mask.iter().map(|&m| m > 0.0).collect();
        let is_last = duration_states.iter().map(|d| *d == remaining).collect();

        Ok(Some(SearchNode {
            onset,
            dur_dist,
            pitch_dist,
            pitch_last_ok,
            tried: BTreeMap::new(),
            exhausted_pitches: BTreeSet::new(),
            dead_durations: BTreeSet::new(),
            current_pitch: None,
            committed: None,
            is_last,
        }))
    };

    let root = make_node(RationalTime::zero(), &[], &[])?.ok_or(Error::SearchExhausted)?;
    let mut stack: Vec<SearchNode> = vec![root];

    loop {
        let node = stack.last_mut().expect("stack never empties inside the loop");
        match node.next_pair(rng, &mut stats) {
            Draw::Pair(duration_id, pitch_id) => {
                stats.pairs_drawn += 1;
                node.committed = Some((duration_id, pitch_id));
                let next_onset = node.onset + duration_states[duration_id as usize];
                if next_onset == c_total {
                    let notes = stack
                        .iter()
                        .map(|n| {
                            let (d, p) = n.committed.expect("every stacked node committed a pair");
                            Note::new(
                                pitch_states[p as usize].pitch(),
                                n.onset,
                                duration_states[d as usize],
                            )
                        })
                        .collect();
                    return Ok((Phrase::new(notes, "composed", 0), stats));
                }

                let dur_prefix: Vec<SymbolId> =
                    stack.iter().map(|n| n.committed.unwrap().0).collect();
                let pitch_prefix: Vec<SymbolId> =
                    stack.iter().map(|n| n.committed.unwrap().1).collect();
                match make_node(next_onset, &dur_prefix, &pitch_prefix)? {
                    Some(child) => stack.push(child),
                    None => {
                        stats.pair_failures += 1;
                        let node = stack.last_mut().unwrap();
                        node.committed = None;
                        node.record_failure(duration_id, pitch_id);
                    }
                }
            }
            Draw::Exhausted => {
                stats.climbs += 1;
                stack.pop();
                let Some(parent) = stack.last_mut() else {
                    return Err(Error::SearchExhausted);
                };
                let (d, p) = parent
                    .committed
                    .take()
                    .expect("a popped node's parent holds the failing pair");
                stats.pair_failures += 1;
                parent.record_failure(d, p);
            }
        }
    }
}

/// Post-hoc check that every transition in `phrase` has strictly positive
/// trained probability at its off-beat, with blank-padded contexts exactly
/// as the composer queried them. Pass `use_offbeat: false` to replay output
/// of a `--no-parametric` run against the collapsed models.
pub fn replay_validate(
    phrase: &Phrase,
    pitch_model: &TransitionModel<PitchSymbol>,
    duration_model: &TransitionModel<RationalTime>,
    order: usize,
    use_offbeat: bool,
) -> Result<std::result::Result<(), String>> {
    let mut dur_ids: Vec<SymbolId> = Vec::new();
    let mut pitch_ids: Vec<SymbolId> = Vec::new();
    for (i, note) in phrase.notes.iter().enumerate() {
        let key = if use_offbeat { offbeat(note.onset) } else { RationalTime::zero() };
        let dur_id = duration_model
            .alphabet()
            .id_of(&note.duration)
            .ok_or_else(|| Error::SymbolOutsideAlphabet {
                detail: format!("duration {} at note {i}", note.duration),
            })?;
        let pitch_id = pitch_model
            .alphabet()
            .id_of(&PitchSymbol::from_note_pitch(note.pitch))
            .ok_or_else(|| Error::SymbolOutsideAlphabet {
                detail: format!("pitch {:?} at note {i}", note.pitch),
            })?;

        let pad = |ids: &[SymbolId]| {
            let mut ctx = vec![BLANK; order];
            let tail = ids.len().min(order);
            ctx[order - tail..].copy_from_slice(&ids[ids.len() - tail..]);
            ctx
        };
        let t_d = duration_model.transition_vector(key, &pad(&dur_ids))?;
        if t_d[dur_id as usize] <= 0.0 {
            return Ok(Err(format!(
                "note {i}: duration {} has zero probability at off-beat {key}",
                note.duration
            )));
        }
        let t_p = pitch_model.transition_vector(key, &pad(&pitch_ids))?;
        if t_p[pitch_id as usize] <= 0.0 {
            return Ok(Err(format!(
                "note {i}: pitch {:?} has zero probability at off-beat {key}",
                note.pitch
            )));
        }
        dur_ids.push(dur_id);
        pitch_ids.push(pitch_id);
    }
    Ok(Ok(()))
}
