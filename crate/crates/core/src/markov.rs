//! Off-beat-parametric Markov models of order 1..m.
//!
//! A conventional transition matrix becomes a rank-3 tensor: transitions are
//! counted separately per off-beat (the successor's onset mod 1), and every
//! context length from 1 to m is materialized so blank-padded phrase starts
//! and short-context queries hit stored rows. Rows keep exact integer counts;
//! probabilities are derived by L1 normalization on demand.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::RationalTime;

/// Index into an alphabet's state list.
pub type SymbolId = u32;

/// The padding symbol prepended before phrase starts. Never part of an
/// alphabet; valid only as a contiguous context prefix.
pub const BLANK: SymbolId = u32::MAX;

/// `count mod 1`: the position relative to the previous beat, exact in `[0, 1)`.
pub fn offbeat(count: RationalTime) -> RationalTime {
    count.mod_one()
}

/// Which note feature a model ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Pitch,
    Duration,
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Pitch => write!(f, "pitch"),
            Feature::Duration => write!(f, "duration"),
        }
    }
}

/// A sounding pitch or the distinguished rest state. Rests participate in
/// pitch contexts like any other symbol; they are only special to the
/// Gaussian contour filter and the final-note mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PitchSymbol {
    Pitch(u8),
    Rest,
}

impl PitchSymbol {
    pub fn from_note_pitch(pitch: Option<u8>) -> Self {
        match pitch {
            Some(p) => PitchSymbol::Pitch(p),
            None => PitchSymbol::Rest,
        }
    }

    pub fn pitch(&self) -> Option<u8> {
        match self {
            PitchSymbol::Pitch(p) => Some(*p),
            PitchSymbol::Rest => None,
        }
    }
}

impl fmt::Display for PitchSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PitchSymbol::Pitch(p) => write!(f, "{p}"),
            PitchSymbol::Rest => write!(f, "rest"),
        }
    }
}

/// Sorted, deduplicated state list for one feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet<S> {
    states: Vec<S>,
}

impl<S: Ord + Clone> Alphabet<S> {
    pub fn from_states(mut states: Vec<S>) -> Self {
        states.sort();
        states.dedup();
        Alphabet { states }
    }

    pub fn from_observed<'a, I>(iter: I) -> Self
    where
        I: IntoIterator<Item = &'a S>,
        S: 'a,
    {
        Alphabet::from_states(iter.into_iter().cloned().collect())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn id_of(&self, state: &S) -> Option<SymbolId> {
        self.states.binary_search(state).ok().map(|i| i as SymbolId)
    }

    pub fn symbol(&self, id: SymbolId) -> &S {
        &self.states[id as usize]
    }
}

/// One training sequence: feature states with the onset count of each.
pub type TrainingSequence<S> = Vec<(S, RationalTime)>;

type ContextKey = Vec<SymbolId>;
type OffbeatTable = BTreeMap<ContextKey, Vec<u64>>;

/// Per-feature transition tensor: off-beat -> context -> successor counts.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel<S> {
    alphabet: Alphabet<S>,
    order: usize,
    table: BTreeMap<RationalTime, OffbeatTable>,
}

impl<S: Ord + Clone> TransitionModel<S> {
    pub fn alphabet(&self) -> &Alphabet<S> {
        &self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn from_parts(
        alphabet: Alphabet<S>,
        order: usize,
        table: BTreeMap<RationalTime, OffbeatTable>,
    ) -> Self {
        TransitionModel { alphabet, order, table }
    }

    pub fn table(&self) -> &BTreeMap<RationalTime, OffbeatTable> {
        &self.table
    }

    /// Total number of stored (off-beat, context) rows.
    pub fn row_count(&self) -> usize {
        self.table.values().map(|t| t.len()).sum()
    }

    /// Raw successor counts for a row; `None` when the row is absent.
    pub fn counts(&self, offbeat: RationalTime, context: &[SymbolId]) -> Option<&[u64]> {
        self.table
            .get(&offbeat)
            .and_then(|t| t.get(context))
            .map(|v| v.as_slice())
    }

    /// The stored probability row for `(offbeat, context)`, or the all-zero
    /// vector when the training data contains no such transition. There is no
    /// implicit backoff: neither across off-beats nor to shorter contexts.
    pub fn transition_vector(
        &self,
        offbeat: RationalTime,
        context: &[SymbolId],
    ) -> Result<Vec<f64>> {
        self.check_context(context)?;
        let zero = vec![0.0; self.alphabet.len()];
        let Some(counts) = self.table.get(&offbeat).and_then(|t| t.get(context)) else {
            return Ok(zero);
        };
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Ok(zero);
        }
        Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    fn check_context(&self, context: &[SymbolId]) -> Result<()> {
        if context.is_empty() || context.len() > self.order {
            return Err(Error::MalformedContext);
        }
        let mut seen_symbol = false;
        for &id in context {
            if id == BLANK {
                if seen_symbol {
                    return Err(Error::MalformedContext);
                }
            } else if (id as usize) < self.alphabet.len() {
                seen_symbol = true;
            } else {
                return Err(Error::SymbolOutsideAlphabet { detail: format!("symbol id {id}") });
            }
        }
        Ok(())
    }

    /// Merge all off-beat bins into a single bin at 0, yielding the plain
    /// higher-order Markov baseline.
    pub fn collapse_offbeats(&self) -> Self {
        let mut merged: OffbeatTable = BTreeMap::new();
        for table in self.table.values() {
            for (context, counts) in table {
                let row = merged
                    .entry(context.clone())
                    .or_insert_with(|| vec![0; self.alphabet.len()]);
                for (acc, c) in row.iter_mut().zip(counts) {
                    *acc += c;
                }
            }
        }
        let mut table = BTreeMap::new();
        table.insert(RationalTime::zero(), merged);
        TransitionModel { alphabet: self.alphabet.clone(), order: self.order, table }
    }
}

/// Count transitions in the sequences. For each successor, every context
/// length 1..=order is keyed under the successor's onset off-beat, with
/// blanks standing in for positions before the sequence start.
pub fn train<S: Ord + Clone>(
    sequences: &[TrainingSequence<S>],
    order: usize,
    alphabet: &Alphabet<S>,
) -> Result<TransitionModel<S>> {
    assert!(order >= 1, "Markov order must be >= 1");
    let mut table: BTreeMap<RationalTime, OffbeatTable> = BTreeMap::new();

    for sequence in sequences {
        let ids: Vec<SymbolId> = sequence
            .iter()
            .map(|(s, _)| {
                alphabet.id_of(s).ok_or_else(|| Error::SymbolOutsideAlphabet {
                    detail: "training state missing from alphabet".into(),
                })
            })
            .collect::<Result<_>>()?;

        for (pos, &successor) in ids.iter().enumerate() {
            let key = offbeat(sequence[pos].1);
            let offbeat_table = table.entry(key).or_default();
            for len in 1..=order {
                let mut context = Vec::with_capacity(len);
                for back in (1..=len).rev() {
                    context.push(if pos >= back { ids[pos - back] } else { BLANK });
                }
                let row = offbeat_table
                    .entry(context)
                    .or_insert_with(|| vec![0; alphabet.len()]);
                row[successor as usize] += 1;
            }
        }
    }

    Ok(TransitionModel { alphabet: alphabet.clone(), order, table })
}

/// Maximum number of distinct non-blank contexts per off-beat for an
/// alphabet of `n` states at order `m`: the sum of n^i for i in 1..=m.
pub fn model_size(alphabet_size: u64, order: u32) -> Result<u64> {
    assert!(alphabet_size >= 1 && order >= 1);
    let mut total: u64 = 0;
    let mut power: u64 = 1;
    for _ in 0..order {
        power = power
            .checked_mul(alphabet_size)
            .ok_or_else(|| Error::Overflow { what: "model size".into() })?;
        total = total
            .checked_add(power)
            .ok_or_else(|| Error::Overflow { what: "model size".into() })?;
    }
    Ok(total)
}
