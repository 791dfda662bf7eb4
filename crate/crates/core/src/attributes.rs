//! Scalar musical attributes computed from a token melody.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::melody::{Corpus, TokenMelody, STEPS, STEPS_PER_BAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Contour,
    RhythmComplexity,
    PitchRange,
}

impl AttributeKind {
    pub const ALL: [AttributeKind; 3] =
        [AttributeKind::Contour, AttributeKind::RhythmComplexity, AttributeKind::PitchRange];

    pub fn name(&self) -> &'static str {
        match self {
            AttributeKind::Contour => "contour",
            AttributeKind::RhythmComplexity => "rhythm_complexity",
            AttributeKind::PitchRange => "pitch_range",
        }
    }

    pub fn compute(&self, m: &TokenMelody) -> Result<f64> {
        match self {
            AttributeKind::Contour => contour(m),
            AttributeKind::RhythmComplexity => rhythm_complexity(m),
            AttributeKind::PitchRange => pitch_range(m),
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttributeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AttributeKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown attribute {s:?}")))
    }
}

/// Mean absolute interval between consecutive onsets; 0 with a single onset.
pub fn contour(m: &TokenMelody) -> Result<f64> {
    let pitches: Vec<i32> = m.onsets().map(|(_, p)| p as i32).collect();
    match pitches.len() {
        0 => Err(Error::UndefinedAttribute),
        1 => Ok(0.0),
        n => {
            let total: i32 = pitches.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
            Ok(total as f64 / (n - 1) as f64)
        }
    }
}

/// Highest minus lowest onset pitch.
pub fn pitch_range(m: &TokenMelody) -> Result<f64> {
    let (lo, hi) = m
        .onsets()
        .fold(None, |acc: Option<(u8, u8)>, (_, p)| match acc {
            None => Some((p, p)),
            Some((lo, hi)) => Some((lo.min(p), hi.max(p))),
        })
        .ok_or(Error::UndefinedAttribute)?;
    Ok((hi - lo) as f64)
}

/// Metrical weights of one 4/4 bar on the sixteenth grid: downbeat 5, half
/// bar 4, beats 3, eighths 2, sixteenths 1.
pub const METRIC_WEIGHTS: [u32; STEPS_PER_BAR] = [5, 1, 2, 1, 3, 1, 2, 1, 4, 1, 2, 1, 3, 1, 2, 1];

fn tiled_weight(step: usize) -> u32 {
    METRIC_WEIGHTS[step % STEPS_PER_BAR]
}

/// `max_metricity[n]` is the sum of the `n` largest weights of the 64-step grid.
fn max_metricity_table() -> [u32; STEPS + 1] {
    let mut weights: Vec<u32> = (0..STEPS).map(tiled_weight).collect();
    weights.sort_unstable_by(|a, b| b.cmp(a));
    let mut table = [0u32; STEPS + 1];
    for n in 1..=STEPS {
        table[n] = table[n - 1] + weights[n - 1];
    }
    table
}

/// Toussaint metrical complexity of an onset mask over the 64-step grid,
/// normalized to `[0, 1]`.
pub fn metrical_complexity(onsets: &[bool; STEPS]) -> Result<f64> {
    let n = onsets.iter().filter(|&&o| o).count();
    if n == 0 {
        return Err(Error::UndefinedAttribute);
    }
    let metricity: u32 = (0..STEPS).filter(|&t| onsets[t]).map(tiled_weight).sum();
    let best = max_metricity_table()[n];
    Ok((best - metricity) as f64 / best as f64)
}

/// Rhythm Complexity: metrical complexity of the melody's onset positions.
pub fn rhythm_complexity(m: &TokenMelody) -> Result<f64> {
    let mut mask = [false; STEPS];
    m.onsets().for_each(|(t, _)| mask[t] = true);
    metrical_complexity(&mask)
}

/// Attribute values aligned to corpus order. `None` marks melodies for which
/// the attribute is undefined.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttributeTable {
    pub kinds: Vec<AttributeKind>,
    /// `rows[melody][kind_position]`
    pub rows: Vec<Vec<Option<f64>>>,
}

impl AttributeTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn column_index(&self, kind: AttributeKind) -> Result<usize> {
        self.kinds
            .iter()
            .position(|&k| k == kind)
            .ok_or_else(|| Error::InvalidConfig(format!("attribute {kind} not in table")))
    }

    pub fn get(&self, melody: usize, kind: AttributeKind) -> Result<Option<f64>> {
        let c = self.column_index(kind)?;
        Ok(self.rows.get(melody).and_then(|r| r[c]))
    }

    /// Number of melodies for which `kind` is missing.
    pub fn missing(&self, kind: AttributeKind) -> Result<usize> {
        let c = self.column_index(kind)?;
        Ok(self.rows.iter().filter(|r| r[c].is_none()).count())
    }

    /// Values of `kind` for the given melody indices, skipping missing ones.
    /// Returns the kept indices alongside the values.
    pub fn values(&self, kind: AttributeKind, indices: &[usize]) -> Result<(Vec<usize>, Vec<f64>)> {
        let c = self.column_index(kind)?;
        let mut kept = Vec::with_capacity(indices.len());
        let mut vals = Vec::with_capacity(indices.len());
        for &i in indices {
            let v = self
                .rows
                .get(i)
                .ok_or_else(|| Error::Format(format!("melody {i} not in attribute table")))?[c];
            if let Some(v) = v {
                kept.push(i);
                vals.push(v);
            }
        }
        Ok((kept, vals))
    }

    /// Long-format CSV: `melody_index,kind,value`; missing values are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("melody_index,kind,value\n");
        for (i, row) in self.rows.iter().enumerate() {
            for (k, v) in self.kinds.iter().zip(row) {
                match v {
                    Some(v) => out.push_str(&format!("{i},{k},{v}\n")),
                    None => out.push_str(&format!("{i},{k},\n")),
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "melody_index,kind,value" => {}
            _ => return Err(Error::Format("attribute CSV header missing".into())),
        }
        let mut kinds: Vec<AttributeKind> = Vec::new();
        let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::Format(format!("attribute CSV line {}: expected 3 fields", lineno + 2)));
            }
            let idx: usize = f[0]
                .parse()
                .map_err(|_| Error::Format(format!("bad melody index {:?}", f[0])))?;
            let kind: AttributeKind = f[1].parse().map_err(|_| Error::Format(format!("bad kind {:?}", f[1])))?;
            let value = if f[2].is_empty() {
                None
            } else {
                Some(f[2].parse::<f64>().map_err(|_| Error::Format(format!("bad value {:?}", f[2])))?)
            };
            let c = match kinds.iter().position(|&k| k == kind) {
                Some(c) => c,
                None => {
                    kinds.push(kind);
                    rows.iter_mut().for_each(|r| r.push(None));
                    kinds.len() - 1
                }
            };
            while rows.len() <= idx {
                rows.push(vec![None; kinds.len()]);
            }
            rows[idx][c] = value;
        }
        Ok(Self { kinds, rows })
    }
}

/// Computes every requested attribute for every melody.
pub fn compute_attribute_table(corpus: &Corpus, kinds: &[AttributeKind]) -> AttributeTable {
    let rows = corpus
        .melodies
        .iter()
        .map(|m| kinds.iter().map(|k| k.compute(m).ok()).collect())
        .collect();
    AttributeTable { kinds: kinds.to_vec(), rows }
}
