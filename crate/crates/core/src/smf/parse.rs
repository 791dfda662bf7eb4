use crate::error::{Error, Result};

/// Decoded event payloads; everything else is skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    NoteOn { channel: u8, pitch: u8, velocity: u8 },
    NoteOff { channel: u8, pitch: u8 },
    /// `denominator` is the actual note value (4 for quarter), not its log.
    TimeSignature { numerator: u8, denominator: u32 },
    ProgramChange { channel: u8, program: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MidiEvent {
    pub tick: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiDocument {
    pub format: u16,
    pub ticks_per_quarter: u16,
    pub tracks: Vec<Vec<MidiEvent>>,
}

impl MidiDocument {
    /// Latest event tick over all tracks.
    pub fn end_tick(&self) -> u64 {
        self.tracks.iter().flat_map(|t| t.last()).map(|e| e.tick).max().unwrap_or(0)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse { offset: self.pos, message: message.into() }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn varint(&mut self) -> Result<u32> {
        let start = self.pos;
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8("variable-length quantity")?;
            value = (value << 7) | u32::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(Error::Parse { offset: start, message: "variable-length quantity longer than 4 bytes".into() })
    }
}

/// Decodes a variable-length quantity from the front of `bytes`, returning
/// the value and the number of bytes used.
pub fn read_varint(bytes: &[u8]) -> Result<(u32, usize)> {
    let mut r = Reader { bytes, pos: 0 };
    let v = r.varint()?;
    Ok((v, r.pos))
}

/// Parses a format 0 or 1 Standard MIDI File.
pub fn parse_smf(bytes: &[u8]) -> Result<MidiDocument> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "header magic")? != b"MThd" {
        return Err(Error::Parse { offset: 0, message: "missing MThd header".into() });
    }
    let header_len = r.u32("header length")? as usize;
    if header_len < 6 {
        return Err(r.err(format!("header length {header_len} below 6")));
    }
    let header_start = r.pos;
    let format = r.u16("format")?;
    let ntracks = r.u16("track count")?;
    let division = r.u16("division")?;
    if format > 1 {
        return Err(Error::Parse { offset: header_start, message: format!("unsupported SMF format {format}") });
    }
    if division & 0x8000 != 0 {
        return Err(Error::Parse { offset: header_start + 4, message: "SMPTE time division is not supported".into() });
    }
    if division == 0 {
        return Err(Error::Parse { offset: header_start + 4, message: "zero ticks per quarter".into() });
    }
    r.take(header_len - 6, "header padding")?;

    let mut tracks = Vec::with_capacity(ntracks as usize);
    while r.pos < bytes.len() && tracks.len() < ntracks as usize {
        let id = r.take(4, "chunk id")?;
        let len = r.u32("chunk length")? as usize;
        let body_offset = r.pos;
        let body = r.take(len, "chunk body")?;
        if id == b"MTrk" {
            tracks.push(parse_track(body, body_offset)?);
        }
    }
    if tracks.len() < ntracks as usize {
        return Err(r.err(format!("header declares {ntracks} tracks, found {}", tracks.len())));
    }
    Ok(MidiDocument { format, ticks_per_quarter: division, tracks })
}

fn rebase(e: Error, base: usize) -> Error {
    match e {
        Error::Parse { offset, message } => Error::Parse { offset: base + offset, message },
        other => other,
    }
}

fn parse_track(body: &[u8], base: usize) -> Result<Vec<MidiEvent>> {
    let mut r = Reader { bytes: body, pos: 0 };
    let mut events = Vec::new();
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    while r.pos < body.len() {
        let delta = r.varint().map_err(|e| rebase(e, base))?;
        tick += u64::from(delta);
        let first = r.u8("event status").map_err(|e| rebase(e, base))?;
        let (status, data0) = if first & 0x80 != 0 {
            (first, None)
        } else {
            match running {
                Some(s) => (s, Some(first)),
                None => return Err(Error::Parse { offset: base + r.pos - 1, message: "data byte without running status".into() }),
            }
        };
        match status {
            0xff => {
                running = None;
                let kind = r.u8("meta type").map_err(|e| rebase(e, base))?;
                let len = r.varint().map_err(|e| rebase(e, base))? as usize;
                let data = r.take(len, "meta data").map_err(|e| rebase(e, base))?;
                match kind {
                    0x2f => break,
                    0x58 if len >= 2 => {
                        if data[1] > 31 {
                            return Err(Error::Parse { offset: base + r.pos - len, message: "time signature denominator out of range".into() });
                        }
                        let denominator = 1u32 << data[1];
                        events.push(MidiEvent { tick, kind: EventKind::TimeSignature { numerator: data[0], denominator } });
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                running = None;
                let len = r.varint().map_err(|e| rebase(e, base))? as usize;
                r.take(len, "sysex data").map_err(|e| rebase(e, base))?;
            }
            0x80..=0xef => {
                running = Some(status);
                let channel = status & 0x0f;
                let need = if matches!(status & 0xf0, 0xc0 | 0xd0) { 1 } else { 2 };
                let mut data = [0u8; 2];
                let mut k = 0;
                if let Some(d) = data0 {
                    data[0] = d;
                    k = 1;
                }
                while k < need {
                    data[k] = r.u8("channel message data").map_err(|e| rebase(e, base))?;
                    k += 1;
                }
                if data[..need].iter().any(|b| b & 0x80 != 0) {
                    return Err(Error::Parse { offset: base + r.pos - 1, message: "status byte inside channel message".into() });
                }
                let kind = match status & 0xf0 {
                    0x80 => Some(EventKind::NoteOff { channel, pitch: data[0] }),
                    0x90 if data[1] == 0 => Some(EventKind::NoteOff { channel, pitch: data[0] }),
                    0x90 => Some(EventKind::NoteOn { channel, pitch: data[0], velocity: data[1] }),
                    0xc0 => Some(EventKind::ProgramChange { channel, program: data[0] }),
                    _ => None,
                };
                if let Some(kind) = kind {
                    events.push(MidiEvent { tick, kind });
                }
            }
            _ => {
                return Err(Error::Parse { offset: base + r.pos - 1, message: format!("unsupported status byte {status:#04x}") });
            }
        }
    }
    Ok(events)
}
