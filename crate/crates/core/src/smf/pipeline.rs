use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::melody::{encode_melody, NoteEvent, TokenMelody, PITCH_MAX, PITCH_MIN, STEPS, STEPS_PER_BAR};

use super::parse::{parse_smf, EventKind, MidiDocument};

/// Channel index of General MIDI percussion (channel 10).
pub const PERCUSSION_CHANNEL: u8 = 9;
/// Highest melodic General MIDI program; the rest are effects and ensembles of sounds.
pub const MAX_MELODIC_PROGRAM: u8 = 95;

/// A sounding note in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickNote {
    pub pitch: u8,
    pub start: u64,
    pub end: u64,
}

/// Notes of one instrument: a (track, channel, program) triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Part<N> {
    pub track: usize,
    pub channel: u8,
    pub program: u8,
    pub notes: Vec<N>,
}

/// A maximal 4/4 span of a document, in ticks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub start_tick: u64,
    pub end_tick: u64,
    pub parts: Vec<Part<TickNote>>,
}

/// A note on the sixteenth-note grid of its segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridNote {
    pub pitch: u8,
    pub onset: usize,
    pub duration: usize,
}

/// A quantized 4/4 segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSegment {
    pub length_steps: usize,
    pub parts: Vec<Part<GridNote>>,
}

/// Program in effect on each channel at a tick; General MIDI program 0 until changed.
struct ProgramMap(Vec<Vec<(u64, u8)>>);

impl ProgramMap {
    fn new(doc: &MidiDocument) -> Self {
        let mut changes = vec![Vec::new(); 16];
        for track in &doc.tracks {
            for e in track {
                if let EventKind::ProgramChange { channel, program } = e.kind {
                    changes[channel as usize].push((e.tick, program));
                }
            }
        }
        changes.iter_mut().for_each(|c| c.sort_by_key(|&(t, _)| t));
        Self(changes)
    }

    fn at(&self, channel: u8, tick: u64) -> u8 {
        let c = &self.0[channel as usize];
        let k = c.partition_point(|&(t, _)| t <= tick);
        if k == 0 {
            0
        } else {
            c[k - 1].1
        }
    }
}

/// Pairs note-ons with note-offs per track. A repeated note-on on a held key
/// ends the held note; notes still held at the end of a track end at its last event.
fn collect_parts(doc: &MidiDocument) -> Vec<Part<TickNote>> {
    let programs = ProgramMap::new(doc);
    let mut parts: BTreeMap<(usize, u8, u8), Vec<TickNote>> = BTreeMap::new();
    for (ti, track) in doc.tracks.iter().enumerate() {
        let mut held: BTreeMap<(u8, u8), u64> = BTreeMap::new();
        let mut close = |channel: u8, pitch: u8, start: u64, end: u64| {
            let program = programs.at(channel, start);
            parts.entry((ti, channel, program)).or_default().push(TickNote { pitch, start, end });
        };
        for e in track {
            match e.kind {
                EventKind::NoteOn { channel, pitch, .. } => {
                    if let Some(start) = held.insert((channel, pitch), e.tick) {
                        close(channel, pitch, start, e.tick);
                    }
                }
                EventKind::NoteOff { channel, pitch } => {
                    if let Some(start) = held.remove(&(channel, pitch)) {
                        close(channel, pitch, start, e.tick);
                    }
                }
                _ => {}
            }
        }
        let last = track.last().map(|e| e.tick).unwrap_or(0);
        for ((channel, pitch), start) in held {
            close(channel, pitch, start, last);
        }
    }
    parts
        .into_iter()
        .map(|((track, channel, program), mut notes)| {
            notes.sort_by_key(|n| (n.start, n.pitch));
            Part { track, channel, program, notes }
        })
        .collect()
}

/// Splits a document at time-signature changes and keeps the 4/4 spans.
/// A document without time signatures is 4/4 throughout.
pub fn split_on_time_signature(doc: &MidiDocument) -> Vec<Segment> {
    let mut changes: Vec<(u64, u8, u32)> = doc
        .tracks
        .iter()
        .flat_map(|t| t.iter())
        .filter_map(|e| match e.kind {
            EventKind::TimeSignature { numerator, denominator } => Some((e.tick, numerator, denominator)),
            _ => None,
        })
        .collect();
    changes.sort_by_key(|c| c.0);

    let end = doc.end_tick();
    let mut spans: Vec<(u64, u64, bool)> = Vec::new();
    let (mut start, mut common) = (0u64, true);
    for (tick, num, den) in changes {
        if tick > start {
            spans.push((start, tick, common));
        }
        start = tick;
        common = num == 4 && den == 4;
    }
    spans.push((start, end.max(start), common));

    let mut merged: Vec<(u64, u64)> = Vec::new();
    let mut prev_common = false;
    for (s, e, c) in spans {
        if c {
            match merged.last_mut() {
                Some(last) if prev_common => last.1 = e,
                _ => merged.push((s, e)),
            }
        }
        prev_common = c;
    }

    let parts = collect_parts(doc);
    let last_index = merged.len().saturating_sub(1);
    let doc_final = merged.last().map(|m| m.1 == end).unwrap_or(false);
    merged
        .iter()
        .enumerate()
        .filter(|&(_, &(s, e))| e > s)
        .map(|(k, &(s, e))| {
            // the last span of the document also owns notes starting on its final tick
            let inside = |t: u64| t >= s && (t < e || (k == last_index && doc_final && t == e));
            let parts = parts
                .iter()
                .filter_map(|p| {
                    let notes: Vec<TickNote> = p
                        .notes
                        .iter()
                        .filter(|n| inside(n.start))
                        .map(|n| TickNote { end: n.end.min(e), ..*n })
                        .collect();
                    (!notes.is_empty()).then(|| Part { track: p.track, channel: p.channel, program: p.program, notes })
                })
                .collect();
            Segment { start_tick: s, end_tick: e, parts }
        })
        .collect()
}

/// Nearest sixteenth-note index of `tick` relative to `origin`, halves rounding up.
pub fn grid_index(tick: u64, origin: u64, ticks_per_quarter: u16) -> usize {
    let delta = tick.saturating_sub(origin) as u128;
    let tpq = u128::from(ticks_per_quarter.max(1));
    ((8 * delta + tpq) / (2 * tpq)) as usize
}

/// Snaps note boundaries to the sixteenth grid; every note keeps at least one step.
pub fn quantize_events(segment: &Segment, ticks_per_quarter: u16) -> GridSegment {
    let q = |t: u64| grid_index(t, segment.start_tick, ticks_per_quarter);
    GridSegment {
        length_steps: q(segment.end_tick),
        parts: segment
            .parts
            .iter()
            .map(|p| Part {
                track: p.track,
                channel: p.channel,
                program: p.program,
                notes: p
                    .notes
                    .iter()
                    .map(|n| {
                        let onset = q(n.start);
                        GridNote { pitch: n.pitch, onset, duration: q(n.end).saturating_sub(onset).max(1) }
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn is_melodic(channel: u8, program: u8) -> bool {
    channel != PERCUSSION_CHANNEL && program <= MAX_MELODIC_PROGRAM
}

/// Monophonic melodies of each melodic part.
///
/// Notes outside the piano range are discarded, simultaneous onsets keep the
/// highest pitch, and a later onset cuts a sounding note. A melody ends at
/// 16 or more silent steps; it is kept when it spans at least four bars and
/// three distinct pitches. Onsets are relative to the bar where it starts.
pub fn extract_melodies(grid: &GridSegment) -> Vec<Vec<NoteEvent>> {
    let mut out = Vec::new();
    for part in grid.parts.iter().filter(|p| is_melodic(p.channel, p.program)) {
        let mut top: BTreeMap<usize, GridNote> = BTreeMap::new();
        for n in part.notes.iter().filter(|n| (PITCH_MIN..=PITCH_MAX).contains(&n.pitch)) {
            let slot = top.entry(n.onset).or_insert(*n);
            if n.pitch > slot.pitch || (n.pitch == slot.pitch && n.duration > slot.duration) {
                *slot = *n;
            }
        }
        let notes: Vec<GridNote> = top.into_values().collect();
        let mut mono: Vec<GridNote> = Vec::with_capacity(notes.len());
        for (k, n) in notes.iter().enumerate() {
            let end = match notes.get(k + 1) {
                Some(next) => (n.onset + n.duration).min(next.onset),
                None => n.onset + n.duration,
            };
            mono.push(GridNote { duration: end - n.onset, ..*n });
        }

        let mut current: Vec<GridNote> = Vec::new();
        let mut flush = |current: &mut Vec<GridNote>| {
            if let (Some(first), Some(last)) = (current.first(), current.last()) {
                let base = first.onset / STEPS_PER_BAR * STEPS_PER_BAR;
                let end = last.onset + last.duration;
                let bars = (end - base).div_ceil(STEPS_PER_BAR);
                let mut pitches: Vec<u8> = current.iter().map(|n| n.pitch).collect();
                pitches.sort_unstable();
                pitches.dedup();
                if bars >= 4 && pitches.len() >= 3 {
                    out.push(current.iter().map(|n| NoteEvent::new(n.pitch, n.onset - base, n.duration)).collect());
                }
            }
            current.clear();
        };
        for n in mono {
            if let Some(prev) = current.last() {
                if n.onset - (prev.onset + prev.duration) >= STEPS_PER_BAR {
                    flush(&mut current);
                }
            }
            current.push(n);
        }
        flush(&mut current);
    }
    out
}

/// Four-bar windows at every bar boundary; notes crossing the right edge are cut.
pub fn slice_four_bars(melody: &[NoteEvent]) -> Vec<TokenMelody> {
    let end = melody.iter().map(|n| n.onset_step + n.duration_steps).max().unwrap_or(0);
    let bars = end.div_ceil(STEPS_PER_BAR);
    if bars < 4 {
        return Vec::new();
    }
    (0..=bars - 4)
        .filter_map(|w| {
            let start = w * STEPS_PER_BAR;
            let notes: Vec<NoteEvent> = melody
                .iter()
                .filter(|n| n.onset_step >= start && n.onset_step < start + STEPS)
                .map(|n| {
                    let onset = n.onset_step - start;
                    NoteEvent::new(n.pitch, onset, n.duration_steps.min(STEPS - onset))
                })
                .collect();
            match encode_melody(&notes) {
                Ok(m) => Some(m),
                Err(e) => {
                    log::warn!("skipping window {w}: {e}");
                    None
                }
            }
        })
        .collect()
}

/// Admissible windows from one file, in (track, window) order.
pub fn ingest_smf(bytes: &[u8]) -> Result<Vec<TokenMelody>> {
    let doc = parse_smf(bytes)?;
    let mut out = Vec::new();
    for segment in split_on_time_signature(&doc) {
        let grid = quantize_events(&segment, doc.ticks_per_quarter);
        for melody in extract_melodies(&grid) {
            out.extend(slice_four_bars(&melody).into_iter().filter(|m| m.is_admissible()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub melodies: Vec<TokenMelody>,
    pub files_read: usize,
    /// Files that failed to parse, with the reason.
    pub failures: Vec<(PathBuf, String)>,
}

fn collect_midi_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_midi_files(&path, out)?;
        } else if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
        {
            out.push(path);
        }
    }
    Ok(())
}

/// Ingests every `.mid`/`.midi` file below `dir` in path order. Unparseable
/// files are reported and skipped.
pub fn ingest_directory(dir: &Path) -> Result<IngestSummary> {
    let mut files = Vec::new();
    collect_midi_files(dir, &mut files)?;
    files.sort();
    let mut summary = IngestSummary { melodies: Vec::new(), files_read: 0, failures: Vec::new() };
    for path in files {
        let bytes = std::fs::read(&path)?;
        match ingest_smf(&bytes) {
            Ok(ms) => {
                summary.files_read += 1;
                summary.melodies.extend(ms);
            }
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                summary.failures.push((path, e.to_string()));
            }
        }
    }
    Ok(summary)
}
