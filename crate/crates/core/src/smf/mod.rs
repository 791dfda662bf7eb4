//! Standard MIDI File reading and the extraction of four-bar monophonic
//! melodies from 4/4 passages.

mod parse;
mod pipeline;
mod write;

pub use parse::{parse_smf, read_varint, EventKind, MidiDocument, MidiEvent};
pub use pipeline::{
    extract_melodies, grid_index, ingest_directory, ingest_smf, quantize_events, slice_four_bars,
    split_on_time_signature, GridNote, GridSegment, IngestSummary, Part, Segment, TickNote, MAX_MELODIC_PROGRAM,
    PERCUSSION_CHANNEL,
};
pub use write::{encode_varint, write_smf};

#[cfg(test)]
mod tests;
