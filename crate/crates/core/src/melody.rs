//! Token-level monophonic melodies.
//!
//! A melody is 4 bars of 16 sixteenth-note steps. Each step holds a MIDI
//! pitch when a note starts there, [`NOTE_OFF`] during silence, or
//! [`NOTE_HOLD`] while the previous note keeps sounding.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Geometric, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STEPS: usize = 64;
pub const STEPS_PER_BAR: usize = 16;
pub const BARS: usize = STEPS / STEPS_PER_BAR;
pub const NOTE_OFF: u8 = 128;
pub const NOTE_HOLD: u8 = 129;
/// Number of distinct tokens.
pub const VOCAB: usize = 130;
/// Lowest pitch of an 88-key piano (A0).
pub const PITCH_MIN: u8 = 21;
/// Highest pitch of an 88-key piano (C8).
pub const PITCH_MAX: u8 = 108;

/// A note on the sixteenth-note grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: u8,
    pub onset_step: usize,
    pub duration_steps: usize,
}

impl NoteEvent {
    pub fn new(pitch: u8, onset_step: usize, duration_steps: usize) -> Self {
        Self { pitch, onset_step, duration_steps }
    }

    pub fn end_step(&self) -> usize {
        self.onset_step + self.duration_steps
    }

    pub fn in_piano_range(&self) -> bool {
        (PITCH_MIN..=PITCH_MAX).contains(&self.pitch)
    }
}

/// A 64-step token sequence.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenMelody([u8; STEPS]);

impl TokenMelody {
    /// Validates tokens: values in `[0, 129]` and no hold at step 0.
    pub fn new(tokens: [u8; STEPS]) -> Result<Self> {
        if let Some(t) = tokens.iter().position(|&x| x > NOTE_HOLD) {
            return Err(Error::InvalidMelody(format!("token {} at step {t} out of range", tokens[t])));
        }
        if tokens[0] == NOTE_HOLD {
            return Err(Error::InvalidMelody("hold token at step 0".into()));
        }
        Ok(Self(tokens))
    }

    pub fn from_slice(tokens: &[u8]) -> Result<Self> {
        let arr: [u8; STEPS] = tokens.try_into().map_err(|_| {
            Error::InvalidMelody(format!("expected {STEPS} tokens, got {}", tokens.len()))
        })?;
        Self::new(arr)
    }

    /// Builds a melody from arbitrary model output, rewriting every hold that
    /// does not continue a note (step 0, or after a note-off) to a note-off.
    pub fn from_tokens_lossy(tokens: &[u8; STEPS]) -> Self {
        let mut out = *tokens;
        let mut sounding = false;
        for tok in out.iter_mut() {
            match *tok {
                NOTE_OFF => sounding = false,
                NOTE_HOLD if !sounding => *tok = NOTE_OFF,
                NOTE_HOLD => {}
                p if p < NOTE_OFF => sounding = true,
                _ => {
                    *tok = NOTE_OFF;
                    sounding = false;
                }
            }
        }
        Self(out)
    }

    pub fn silence() -> Self {
        Self([NOTE_OFF; STEPS])
    }

    pub fn tokens(&self) -> &[u8; STEPS] {
        &self.0
    }

    /// Onset steps and their pitches, in time order.
    pub fn onsets(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.0.iter().copied().enumerate().filter(|&(_, t)| t < NOTE_OFF)
    }

    pub fn onset_count(&self) -> usize {
        self.onsets().count()
    }

    pub fn distinct_pitches(&self) -> usize {
        let mut seen = [false; 128];
        self.onsets().for_each(|(_, p)| seen[p as usize] = true);
        seen.iter().filter(|&&s| s).count()
    }

    /// Corpus admissibility: every onset on the piano, at least three distinct
    /// pitches and at least one onset per bar on average.
    pub fn is_admissible(&self) -> bool {
        self.onsets().all(|(_, p)| (PITCH_MIN..=PITCH_MAX).contains(&p))
            && self.distinct_pitches() >= 3
            && self.onset_count() >= BARS
    }
}

impl fmt::Debug for TokenMelody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TokenMelody({self})")
    }
}

impl fmt::Display for TokenMelody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Encodes a time-sorted, monophonic note list into 64 tokens.
///
/// A later onset cuts off any note still sounding; notes running past the
/// last step are truncated.
pub fn encode_melody(notes: &[NoteEvent]) -> Result<TokenMelody> {
    let mut tokens = [NOTE_OFF; STEPS];
    let mut prev_onset: Option<usize> = None;
    for n in notes {
        if !n.in_piano_range() {
            return Err(Error::InvalidMelody(format!("pitch {} outside the piano range", n.pitch)));
        }
        if n.onset_step >= STEPS {
            return Err(Error::InvalidMelody(format!("onset {} beyond step {}", n.onset_step, STEPS - 1)));
        }
        if n.duration_steps == 0 {
            return Err(Error::InvalidMelody("zero-length note".into()));
        }
        match prev_onset {
            Some(p) if p == n.onset_step => return Err(Error::OverlappingOnsets { step: p }),
            Some(p) if p > n.onset_step => {
                return Err(Error::InvalidMelody("notes not sorted by onset".into()))
            }
            _ => {}
        }
        prev_onset = Some(n.onset_step);
        tokens[n.onset_step] = n.pitch;
        let end = n.end_step().min(STEPS);
        for tok in &mut tokens[n.onset_step + 1..end] {
            *tok = NOTE_HOLD;
        }
        // anything past the new note's end that an earlier note had held is silence again
        for tok in tokens[end..].iter_mut().take_while(|t| **t == NOTE_HOLD) {
            *tok = NOTE_OFF;
        }
    }
    Ok(TokenMelody(tokens))
}

/// Inverse of [`encode_melody`]. Holds with nothing sounding read as silence.
pub fn decode_tokens(m: &TokenMelody) -> Vec<NoteEvent> {
    let mut notes: Vec<NoteEvent> = Vec::new();
    let mut current: Option<NoteEvent> = None;
    for (step, &tok) in m.0.iter().enumerate() {
        match tok {
            NOTE_HOLD => {
                if let Some(n) = current.as_mut() {
                    n.duration_steps += 1;
                }
            }
            NOTE_OFF => notes.extend(current.take()),
            pitch => {
                notes.extend(current.take());
                current = Some(NoteEvent::new(pitch, step, 1));
            }
        }
    }
    notes.extend(current);
    notes
}

/// Shifts every onset pitch; fails if any pitch would leave the piano range.
pub fn transpose(m: &TokenMelody, semitones: i32) -> Result<TokenMelody> {
    if !(-12..=12).contains(&semitones) {
        return Err(Error::TransposeOutOfRange { semitones });
    }
    let mut out = m.0;
    for tok in out.iter_mut().filter(|t| **t < NOTE_OFF) {
        let p = *tok as i32 + semitones;
        if p < PITCH_MIN as i32 || p > PITCH_MAX as i32 {
            return Err(Error::TransposeOutOfRange { semitones });
        }
        *tok = p as u8;
    }
    Ok(TokenMelody(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    Smf,
}

/// Melodies with their split labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub melodies: Vec<TokenMelody>,
    pub splits: Vec<Split>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl Corpus {
    /// Assigns an 80/10/10 train/valid/test split by a seeded shuffle.
    pub fn with_random_splits(melodies: Vec<TokenMelody>, provenance: Provenance, seed: u64) -> Self {
        let n = melodies.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let n_test = n / 10;
        let n_valid = n / 10;
        let mut splits = vec![Split::Train; n];
        for (rank, &idx) in order.iter().enumerate() {
            if rank < n_test {
                splits[idx] = Split::Test;
            } else if rank < n_test + n_valid {
                splits[idx] = Split::Valid;
            }
        }
        Self { melodies, splits, provenance, seed }
    }

    pub fn len(&self) -> usize {
        self.melodies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.melodies.is_empty()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// One record per line: 64 space-separated tokens followed by the split tag.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.len() * 260);
        for (m, s) in self.melodies.iter().zip(&self.splits) {
            out.push_str(&m.to_string());
            out.push(' ');
            out.push_str(s.as_str());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str, provenance: Provenance, seed: u64) -> Result<Self> {
        let mut melodies = Vec::new();
        let mut splits = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_ascii_whitespace().collect();
            if fields.len() != STEPS + 1 {
                return Err(Error::Format(format!(
                    "line {lineno}: expected {} fields, found {}",
                    STEPS + 1,
                    fields.len()
                )));
            }
            let mut tokens = [0u8; STEPS];
            for (t, f) in tokens.iter_mut().zip(&fields[..STEPS]) {
                *t = f
                    .parse()
                    .map_err(|_| Error::Format(format!("line {lineno}: bad token {f:?}")))?;
            }
            melodies.push(
                TokenMelody::new(tokens).map_err(|e| Error::Format(format!("line {lineno}: {e}")))?,
            );
            splits.push(fields[STEPS].parse()?);
        }
        Ok(Self { melodies, splits, provenance, seed })
    }
}

const SPLIT_SALT: u64 = 0x5EED_5EED_0000_0001;

/// Parameters of the synthetic melody generator.
///
/// Each melody alternates two one-bar rhythm cells drawn from a per-corpus
/// library (cells are built from geometric note durations). Its pitches
/// move by a leap size drawn once per melody from a log-normal, with the
/// direction of successive leaps cycling through a motif from a second
/// per-corpus library. The log-normal leap scale is what makes Contour and
/// Pitch Range right-skewed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub size: usize,
    /// Number of one-bar rhythm cells in the library.
    pub rhythm_cells: usize,
    /// Range of the mean note duration (steps) used when building cells.
    pub mean_duration: (f64, f64),
    /// Relative frequency of sixteenth, eighth and quarter units in cells.
    pub unit_weights: [f64; 3],
    /// Probability that a cell slot is a rest rather than a note.
    pub rest_prob: f64,
    /// Number of leap-direction motifs in the library.
    pub direction_motifs: usize,
    /// Longest direction motif; motifs have between 2 and this many leaps.
    pub max_motif_len: usize,
    /// Log-normal parameters of the per-melody leap scale (semitones). Scales
    /// below one give repeated pitches.
    pub leap_log_mean: f64,
    pub leap_log_sd: f64,
    /// Largest leap scale; larger draws are clamped. Each leap rounds the
    /// real-valued scale up or down at random, so Contour is continuous.
    pub max_leap: u8,
    /// Probability that a single step deviates by one semitone from the leap scale.
    pub jitter_prob: f64,
    /// Range of starting pitches.
    pub start_pitch: (u8, u8),
    /// Pitch walk bounds; the walk reflects off them.
    pub walk_bounds: (u8, u8),
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 2048,
            rhythm_cells: 24,
            mean_duration: (1.3, 3.0),
            unit_weights: [0.5, 0.35, 0.15],
            rest_prob: 0.1,
            direction_motifs: 8,
            max_motif_len: 5,
            leap_log_mean: 2.0f64.ln(),
            leap_log_sd: 0.75,
            max_leap: 12,
            jitter_prob: 0.05,
            start_pitch: (55, 76),
            walk_bounds: (40, 90),
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidConfig("corpus size must be positive".into()));
        }
        if self.rhythm_cells == 0 || self.direction_motifs == 0 {
            return Err(Error::InvalidConfig("need at least one rhythm cell and direction motif".into()));
        }
        if self.max_motif_len < 2 {
            return Err(Error::InvalidConfig("direction motifs need at least two leaps".into()));
        }
        let (lo, hi) = self.mean_duration;
        if !(lo >= 1.0 && hi >= lo) {
            return Err(Error::InvalidConfig("mean duration range must satisfy 1 <= lo <= hi".into()));
        }
        if self.unit_weights.iter().any(|w| !(*w >= 0.0)) || !(self.unit_weights.iter().sum::<f64>() > 0.0) {
            return Err(Error::InvalidConfig("unit weights must be non-negative and not all zero".into()));
        }
        if !(0.0..1.0).contains(&self.rest_prob) || !(0.0..=1.0).contains(&self.jitter_prob) {
            return Err(Error::InvalidConfig("probabilities must lie in [0, 1)".into()));
        }
        if !(self.leap_log_sd > 0.0) || self.max_leap == 0 {
            return Err(Error::InvalidConfig("leap distribution must be non-degenerate".into()));
        }
        let (wl, wh) = self.walk_bounds;
        let (sl, sh) = self.start_pitch;
        if !(PITCH_MIN <= wl && wl + 2 * self.max_leap <= wh && wh <= PITCH_MAX && wl <= sl && sl <= sh && sh <= wh)
        {
            return Err(Error::InvalidConfig("pitch bounds inconsistent".into()));
        }
        Ok(())
    }
}

/// Cell duration units in sixteenth steps.
const METRIC_UNITS: [usize; 3] = [1, 2, 4];

/// A one-bar rhythm: `true` marks onset steps; `rest[k]` marks onsets that are rests.
#[derive(Debug, Clone)]
struct RhythmCell {
    onsets: [bool; STEPS_PER_BAR],
    rests: [bool; STEPS_PER_BAR],
}

fn build_rhythm_library(cfg: &SynthConfig, seed: u64) -> Vec<RhythmCell> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let mut cells = Vec::with_capacity(cfg.rhythm_cells);
    let unit_dist = WeightedIndex::new(cfg.unit_weights).expect("validated");
    while cells.len() < cfg.rhythm_cells {
        // durations are whole multiples of a metrical unit, so most cells
        // stay on the beat grid and syncopation is the exception
        let unit = METRIC_UNITS[unit_dist.sample(&mut rng)];
        let mean = rng.random_range(cfg.mean_duration.0..=cfg.mean_duration.1) / unit as f64;
        let geo = Geometric::new(1.0 / mean.max(1.0)).expect("mean duration >= 1");
        let mut onsets = [false; STEPS_PER_BAR];
        let mut rests = [false; STEPS_PER_BAR];
        let mut t = 0usize;
        while t < STEPS_PER_BAR {
            onsets[t] = true;
            rests[t] = t > 0 && rng.random_bool(cfg.rest_prob);
            t += unit * (1 + geo.sample(&mut rng) as usize);
        }
        if onsets.iter().zip(&rests).filter(|(o, r)| **o && !**r).count() >= 2 {
            cells.push(RhythmCell { onsets, rests });
        }
    }
    cells
}

/// Sign patterns for successive leaps, with as many rises as falls so the
/// walk does not drift.
fn build_motif_library(cfg: &SynthConfig, seed: u64) -> Vec<Vec<i32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - 1);
    let mut motifs = Vec::with_capacity(cfg.direction_motifs);
    while motifs.len() < cfg.direction_motifs {
        let half = rng.random_range(1..=cfg.max_motif_len / 2);
        let mut m: Vec<i32> = (0..2 * half).map(|k| if k < half { 1 } else { -1 }).collect();
        m.shuffle(&mut rng);
        motifs.push(m);
    }
    motifs
}

fn synth_one(cfg: &SynthConfig, library: &[RhythmCell], motifs: &[Vec<i32>], rng: &mut ChaCha8Rng) -> TokenMelody {
    let leap_dist = LogNormal::new(cfg.leap_log_mean, cfg.leap_log_sd).expect("validated");
    loop {
        let a = &library[rng.random_range(0..library.len())];
        let b = &library[rng.random_range(0..library.len())];
        let motif = &motifs[rng.random_range(0..motifs.len())];
        let mut leaps = 0usize;
        let scale = leap_dist.sample(rng).min(cfg.max_leap as f64);
        let (floor, frac) = (scale.floor() as i32, scale.fract());
        let mut pitch = rng.random_range(cfg.start_pitch.0..=cfg.start_pitch.1) as i32;
        let (lo, hi) = (cfg.walk_bounds.0 as i32, cfg.walk_bounds.1 as i32);

        let mut tokens = [NOTE_OFF; STEPS];
        let mut first = true;
        let mut sounding = false;
        for bar in 0..BARS {
            let cell = if bar % 2 == 0 { a } else { b };
            for k in 0..STEPS_PER_BAR {
                let t = bar * STEPS_PER_BAR + k;
                if !cell.onsets[k] {
                    tokens[t] = if sounding { NOTE_HOLD } else { NOTE_OFF };
                    continue;
                }
                if cell.rests[k] {
                    tokens[t] = NOTE_OFF;
                    sounding = false;
                    continue;
                }
                if !first {
                    // rounding each leap up with probability frac keeps the mean at the scale
                    let mut step = floor + rng.random_bool(frac) as i32;
                    if rng.random_bool(cfg.jitter_prob) {
                        step += if rng.random_bool(0.5) { 1 } else { -1 };
                    }
                    let dir = motif[leaps % motif.len()];
                    leaps += 1;
                    let mut next = pitch + dir * step;
                    if next < lo || next > hi {
                        next = pitch - dir * step;
                    }
                    pitch = next.clamp(lo, hi);
                }
                first = false;
                tokens[t] = pitch as u8;
                sounding = true;
            }
        }
        let m = TokenMelody(tokens);
        if m.is_admissible() {
            return m;
        }
    }
}

/// Generates a deterministic synthetic corpus.
///
/// Melody `k` depends only on `(cfg, seed, k)`, so generation can be sharded
/// by index without changing the output.
pub fn generate_synthetic_corpus(cfg: &SynthConfig, seed: u64) -> Result<Corpus> {
    cfg.validate()?;
    let library = build_rhythm_library(cfg, seed);
    let motifs = build_motif_library(cfg, seed);
    let melodies = (0..cfg.size)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            synth_one(cfg, &library, &motifs, &mut rng)
        })
        .collect();
    Ok(Corpus::with_random_splits(melodies, Provenance::Synthetic, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn padded(prefix: &[u8]) -> [u8; STEPS] {
        let mut t = [NOTE_OFF; STEPS];
        t[..prefix.len()].copy_from_slice(prefix);
        t
    }

    #[test]
    fn encode_examples() {
        let m = encode_melody(&[NoteEvent::new(60, 0, 2)]).unwrap();
        assert_eq!(m.tokens(), &padded(&[60, NOTE_HOLD]));
        assert_eq!(encode_melody(&[]).unwrap(), TokenMelody::silence());
        let m = encode_melody(&[NoteEvent::new(60, 0, 1), NoteEvent::new(62, 1, 1)]).unwrap();
        assert_eq!(m.tokens(), &padded(&[60, 62]));
    }

    #[test]
    fn encode_truncates_held_note_on_new_onset() {
        let m = encode_melody(&[NoteEvent::new(60, 0, 8), NoteEvent::new(64, 2, 1)]).unwrap();
        assert_eq!(m.tokens(), &padded(&[60, NOTE_HOLD, 64]));
    }

    #[test]
    fn encode_truncates_at_window_end() {
        let m = encode_melody(&[NoteEvent::new(70, 62, 10)]).unwrap();
        assert_eq!(m.tokens()[62], 70);
        assert_eq!(m.tokens()[63], NOTE_HOLD);
    }

    #[test]
    fn encode_rejects_same_step_onsets() {
        let err = encode_melody(&[NoteEvent::new(60, 3, 1), NoteEvent::new(64, 3, 1)]).unwrap_err();
        assert!(matches!(err, Error::OverlappingOnsets { step: 3 }));
    }

    #[test]
    fn encode_rejects_bad_notes() {
        assert!(encode_melody(&[NoteEvent::new(60, 64, 1)]).is_err());
        assert!(encode_melody(&[NoteEvent::new(10, 0, 1)]).is_err());
        assert!(encode_melody(&[NoteEvent::new(60, 4, 1), NoteEvent::new(62, 2, 1)]).is_err());
    }

    #[test]
    fn decode_examples() {
        let m = TokenMelody::new(padded(&[60, NOTE_HOLD])).unwrap();
        assert_eq!(decode_tokens(&m), vec![NoteEvent::new(60, 0, 2)]);
        assert!(decode_tokens(&TokenMelody::silence()).is_empty());
    }

    #[test]
    fn orphan_holds_read_as_silence() {
        let mut raw = padded(&[NOTE_HOLD, NOTE_HOLD, 60, NOTE_HOLD, NOTE_OFF, NOTE_HOLD, 62]);
        let m = TokenMelody::from_tokens_lossy(&raw);
        assert_eq!(decode_tokens(&m), vec![NoteEvent::new(60, 2, 2), NoteEvent::new(62, 6, 1)]);
        assert_eq!(m.tokens()[0], NOTE_OFF);
        assert_eq!(m.tokens()[5], NOTE_OFF);
        raw[0] = NOTE_HOLD;
        assert!(TokenMelody::new(raw).is_err());
    }

    #[test]
    fn token_validation() {
        let mut raw = padded(&[60]);
        raw[10] = 130;
        assert!(TokenMelody::new(raw).is_err());
        assert!(TokenMelody::from_slice(&[60; 10]).is_err());
    }

    #[test]
    fn transpose_examples() {
        let m = TokenMelody::new(padded(&[60, NOTE_HOLD])).unwrap();
        assert_eq!(transpose(&m, 2).unwrap().tokens(), &padded(&[62, NOTE_HOLD]));
        assert_eq!(transpose(&m, 0).unwrap(), m);
        let top = TokenMelody::new(padded(&[108])).unwrap();
        assert!(matches!(transpose(&top, 1), Err(Error::TransposeOutOfRange { .. })));
        assert!(transpose(&m, 13).is_err());
    }

    #[test]
    fn corpus_text_round_trip() {
        let c = generate_synthetic_corpus(&SynthConfig { size: 20, ..Default::default() }, 3).unwrap();
        let back = Corpus::from_text(&c.to_text(), Provenance::Synthetic, 3).unwrap();
        assert_eq!(back, c);
        assert!(Corpus::from_text("1 2 3 train\n", Provenance::Smf, 0).is_err());
    }

    #[test]
    fn synthetic_corpus_is_deterministic_and_admissible() {
        let cfg = SynthConfig { size: 256, ..Default::default() };
        let a = generate_synthetic_corpus(&cfg, 7).unwrap();
        let b = generate_synthetic_corpus(&cfg, 7).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert!(a.melodies.iter().all(|m| m.is_admissible()));
        let c = generate_synthetic_corpus(&cfg, 8).unwrap();
        assert_ne!(a.to_text(), c.to_text());
    }

    #[test]
    fn direction_motifs_do_not_drift() {
        let cfg = SynthConfig { direction_motifs: 50, max_motif_len: 6, ..Default::default() };
        for m in build_motif_library(&cfg, 4) {
            assert!((2..=6).contains(&m.len()), "{m:?}");
            assert_eq!(m.iter().sum::<i32>(), 0, "{m:?}");
        }
    }

    #[test]
    fn quarter_unit_cells_stay_on_the_beat() {
        let cfg = SynthConfig { rhythm_cells: 30, unit_weights: [0.0, 0.0, 1.0], ..Default::default() };
        for cell in build_rhythm_library(&cfg, 2) {
            for (k, &on) in cell.onsets.iter().enumerate() {
                assert!(!on || k % 4 == 0, "onset at step {k}");
            }
        }
        let bad = SynthConfig { unit_weights: [0.0; 3], ..Default::default() };
        assert!(matches!(generate_synthetic_corpus(&bad, 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn single_melody_corpus() {
        let c = generate_synthetic_corpus(&SynthConfig { size: 1, ..Default::default() }, 0).unwrap();
        assert_eq!(c.len(), 1);
        assert!(c.melodies[0].is_admissible());
    }

    #[test]
    fn zero_size_is_an_error() {
        let err = generate_synthetic_corpus(&SynthConfig { size: 0, ..Default::default() }, 0);
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn splits_are_a_partition() {
        let c = generate_synthetic_corpus(&SynthConfig { size: 100, ..Default::default() }, 1).unwrap();
        let (tr, va, te) = (c.indices(Split::Train), c.indices(Split::Valid), c.indices(Split::Test));
        assert_eq!((tr.len(), va.len(), te.len()), (80, 10, 10));
    }

    /// Random admissible note lists: sorted, non-overlapping, inside the window.
    fn admissible_notes() -> impl Strategy<Value = Vec<NoteEvent>> {
        prop::collection::vec((PITCH_MIN..=PITCH_MAX, 0usize..4, 1usize..6), 0..20).prop_map(|raw| {
            let mut t = 0usize;
            let mut notes = Vec::new();
            for (pitch, gap, dur) in raw {
                let onset = t + gap;
                if onset >= STEPS {
                    break;
                }
                let dur = dur.min(STEPS - onset);
                notes.push(NoteEvent::new(pitch, onset, dur));
                t = onset + dur;
            }
            notes
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn decode_inverts_encode(notes in admissible_notes()) {
            let m = encode_melody(&notes).unwrap();
            prop_assert_eq!(decode_tokens(&m), notes);
        }

        #[test]
        fn transpose_inverts(notes in admissible_notes(), k in -12i32..=12) {
            let m = encode_melody(&notes).unwrap();
            if let Ok(up) = transpose(&m, k) {
                if let Ok(back) = transpose(&up, -k) {
                    prop_assert_eq!(back, m);
                }
            }
        }
    }
}
