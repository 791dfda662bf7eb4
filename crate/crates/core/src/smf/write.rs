use super::parse::{EventKind, MidiDocument};

fn push_varint(out: &mut Vec<u8>, mut v: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (v & 0x7f) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for k in (0..n).rev() {
        out.push(if k > 0 { buf[k] | 0x80 } else { buf[k] });
    }
}

/// Encodes `v` as a variable-length quantity.
pub fn encode_varint(v: u32) -> Vec<u8> {
    let mut out = Vec::new();
    push_varint(&mut out, v);
    out
}

/// Serializes `doc` without running status. Events in each track must be in
/// tick order. Note-offs are written as `0x80` messages with velocity 64.
pub fn write_smf(doc: &MidiDocument) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&doc.format.to_be_bytes());
    out.extend_from_slice(&(doc.tracks.len() as u16).to_be_bytes());
    out.extend_from_slice(&doc.ticks_per_quarter.to_be_bytes());
    for track in &doc.tracks {
        let mut body = Vec::new();
        let mut last = 0u64;
        for e in track {
            push_varint(&mut body, (e.tick - last) as u32);
            last = e.tick;
            match e.kind {
                EventKind::NoteOn { channel, pitch, velocity } => body.extend_from_slice(&[0x90 | channel, pitch, velocity]),
                EventKind::NoteOff { channel, pitch } => body.extend_from_slice(&[0x80 | channel, pitch, 64]),
                EventKind::ProgramChange { channel, program } => body.extend_from_slice(&[0xc0 | channel, program]),
                EventKind::TimeSignature { numerator, denominator } => {
                    body.extend_from_slice(&[0xff, 0x58, 4, numerator, denominator.trailing_zeros() as u8, 24, 8])
                }
            }
        }
        body.extend_from_slice(&[0, 0xff, 0x2f, 0]);
        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
    }
    out
}
