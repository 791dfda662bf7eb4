use super::*;
use crate::error::Error;
use crate::melody::{encode_melody, NoteEvent, TokenMelody, NOTE_HOLD, NOTE_OFF, STEPS};

const TPQ: u16 = 480;
const SIXTEENTH: u64 = 120;

/// One C4 quarter note at 480 ticks per quarter, assembled by hand.
const C4_QUARTER: [u8; 35] = [
    b'M', b'T', b'h', b'd', 0, 0, 0, 6, 0, 0, 0, 1, 0x01, 0xe0, //
    b'M', b'T', b'r', b'k', 0, 0, 0, 13, //
    0x00, 0x90, 0x3c, 0x40, // note on C4
    0x83, 0x60, 0x80, 0x3c, 0x40, // 480 ticks later, note off
    0x00, 0xff, 0x2f, 0x00,
];

fn on(tick: u64, channel: u8, pitch: u8) -> MidiEvent {
    MidiEvent { tick, kind: EventKind::NoteOn { channel, pitch, velocity: 90 } }
}

fn off(tick: u64, channel: u8, pitch: u8) -> MidiEvent {
    MidiEvent { tick, kind: EventKind::NoteOff { channel, pitch } }
}

fn time_sig(tick: u64, numerator: u8, denominator: u32) -> MidiEvent {
    MidiEvent { tick, kind: EventKind::TimeSignature { numerator, denominator } }
}

/// Track from `(pitch, onset step, duration steps)` on channel 0.
fn track(notes: &[(u8, u64, u64)], channel: u8) -> Vec<MidiEvent> {
    let mut ev = Vec::new();
    for &(p, s, d) in notes {
        ev.push(on(s * SIXTEENTH, channel, p));
        ev.push(off((s + d) * SIXTEENTH, channel, p));
    }
    // note-offs first at equal ticks
    ev.sort_by_key(|e| (e.tick, matches!(e.kind, EventKind::NoteOn { .. })));
    ev
}

fn doc(tracks: Vec<Vec<MidiEvent>>) -> MidiDocument {
    MidiDocument { format: 1, ticks_per_quarter: TPQ, tracks }
}

/// Scale-like melody over `bars` bars: quarter notes cycling through `pitches`.
fn quarters(bars: u64, pitches: &[u8]) -> Vec<(u8, u64, u64)> {
    (0..bars * 4).map(|k| (pitches[k as usize % pitches.len()], k * 4, 4)).collect()
}

#[test]
fn parses_hand_assembled_quarter_note() {
    let d = parse_smf(&C4_QUARTER).unwrap();
    assert_eq!(d.ticks_per_quarter, 480);
    assert_eq!(d.tracks, vec![vec![on_vel(0, 60, 64), off(480, 0, 60)]]);
}

fn on_vel(tick: u64, pitch: u8, velocity: u8) -> MidiEvent {
    MidiEvent { tick, kind: EventKind::NoteOn { channel: 0, pitch, velocity } }
}

#[test]
fn varint_examples() {
    assert_eq!(read_varint(&[0x81, 0x48]).unwrap(), (200, 2));
    assert_eq!(read_varint(&[0x00]).unwrap(), (0, 1));
    assert_eq!(read_varint(&[0xff, 0xff, 0xff, 0x7f]).unwrap(), (0x0fff_ffff, 4));
    assert!(read_varint(&[0x81, 0x80, 0x80, 0x80, 0x00]).is_err());
    assert!(read_varint(&[0x81]).is_err());
    for v in [0u32, 127, 128, 200, 16_383, 16_384, 0x0fff_ffff] {
        assert_eq!(read_varint(&encode_varint(v)).unwrap().0, v);
    }
}

#[test]
fn malformed_input_reports_offsets() {
    assert!(matches!(parse_smf(&[]), Err(Error::Parse { offset: 0, .. })));
    let mut bad = C4_QUARTER;
    bad[0] = b'X';
    assert!(matches!(parse_smf(&bad), Err(Error::Parse { offset: 0, .. })));
    // truncated track body
    assert!(matches!(parse_smf(&C4_QUARTER[..30]), Err(Error::Parse { offset: 22, .. })));
    let mut fmt2 = C4_QUARTER;
    fmt2[9] = 2;
    match parse_smf(&fmt2) {
        Err(Error::Parse { offset, message }) => {
            assert_eq!(offset, 8);
            assert!(message.contains("format 2"));
        }
        other => panic!("{other:?}"),
    }
    let mut smpte = C4_QUARTER;
    smpte[12] = 0xe7;
    assert!(parse_smf(&smpte).is_err());
}

#[test]
fn running_status_sysex_and_zero_velocity() {
    let body: Vec<u8> = vec![
        0x00, 0xf0, 0x03, 0x7e, 0x7f, 0xf7, // sysex skipped
        0x00, 0xc0, 0x05, // program 5
        0x00, 0x90, 0x3c, 0x40, // note on
        0x10, 0x3e, 0x40, // running status note on
        0x10, 0x3c, 0x00, // running status, velocity 0 means off
        0x00, 0xff, 0x01, 0x02, b'h', b'i', // text meta skipped
        0x00, 0xb0, 0x07, 0x64, // controller ignored
        0x10, 0x80, 0x3e, 0x00, //
        0x00, 0xff, 0x2f, 0x00,
    ];
    let mut bytes = b"MThd\0\0\0\x06\0\0\0\x01\0\x60MTrk".to_vec();
    bytes.extend_from_slice(&(body.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&body);
    let d = parse_smf(&bytes).unwrap();
    assert_eq!(
        d.tracks[0],
        vec![
            MidiEvent { tick: 0, kind: EventKind::ProgramChange { channel: 0, program: 5 } },
            on_vel(0, 60, 64),
            on_vel(16, 62, 64),
            off(32, 0, 60),
            off(48, 0, 62),
        ]
    );
}

#[test]
fn data_byte_without_status_is_an_error() {
    let mut bytes = b"MThd\0\0\0\x06\0\0\0\x01\0\x60MTrk\0\0\0\x03".to_vec();
    bytes.extend_from_slice(&[0x00, 0x3c, 0x40]);
    assert!(matches!(parse_smf(&bytes), Err(Error::Parse { offset: 23, .. })));
}

#[test]
fn written_files_parse_back() {
    let d = doc(vec![vec![time_sig(0, 4, 4)], track(&quarters(2, &[60, 64, 67]), 3)]);
    assert_eq!(parse_smf(&write_smf(&d)).unwrap(), d);
}

#[test]
fn time_signature_spans() {
    let notes = track(&quarters(12, &[60, 62, 64]), 0);
    let bar = 16 * SIXTEENTH;
    assert_eq!(split_on_time_signature(&doc(vec![notes.clone()])).len(), 1);
    assert_eq!(split_on_time_signature(&doc(vec![vec![time_sig(0, 4, 4)], notes.clone()])).len(), 1);

    let changes = vec![time_sig(0, 4, 4), time_sig(4 * bar, 3, 4), time_sig(7 * bar, 4, 4)];
    let segs = split_on_time_signature(&doc(vec![changes, notes.clone()]));
    assert_eq!(segs.len(), 2);
    assert_eq!((segs[0].start_tick, segs[0].end_tick), (0, 4 * bar));
    assert_eq!(segs[1].start_tick, 7 * bar);
    // notes keep to their span
    assert!(segs[0].parts[0].notes.iter().all(|n| n.end <= 4 * bar));
    assert!(segs[1].parts[0].notes.iter().all(|n| n.start >= 7 * bar));

    assert!(split_on_time_signature(&doc(vec![vec![time_sig(0, 3, 4)], notes.clone()])).is_empty());
    // repeated 4/4 markers do not split
    let repeated = vec![time_sig(0, 4, 4), time_sig(2 * bar, 4, 4)];
    assert_eq!(split_on_time_signature(&doc(vec![repeated, notes.clone()])).len(), 1);
    // 6/8 is not 4/4
    assert!(split_on_time_signature(&doc(vec![vec![time_sig(0, 6, 8)], notes])).is_empty());
}

#[test]
fn quantization_examples() {
    assert_eq!(grid_index(119, 0, 480), 1);
    assert_eq!(grid_index(60, 0, 480), 1);
    assert_eq!(grid_index(59, 0, 480), 0);
    assert_eq!(grid_index(180, 0, 480), 2);
    assert_eq!(grid_index(600, 480, 480), 1);
    // 96 ticks per quarter: sixteenth = 24 ticks, half = 12
    assert_eq!(grid_index(12, 0, 96), 1);
    assert_eq!(grid_index(11, 0, 96), 0);

    let seg = Segment {
        start_tick: 0,
        end_tick: 1920,
        parts: vec![Part { track: 0, channel: 0, program: 0, notes: vec![TickNote { pitch: 60, start: 119, end: 130 }] }],
    };
    let g = quantize_events(&seg, 480);
    assert_eq!(g.length_steps, 16);
    // both ends snap to step 1, duration floors at one step
    assert_eq!(g.parts[0].notes, vec![GridNote { pitch: 60, onset: 1, duration: 1 }]);
}

#[test]
fn quantization_is_idempotent() {
    let notes = vec![TickNote { pitch: 60, start: 130, end: 470 }, TickNote { pitch: 64, start: 470, end: 950 }];
    let seg = Segment { start_tick: 0, end_tick: 1920, parts: vec![Part { track: 0, channel: 0, program: 0, notes }] };
    let once = quantize_events(&seg, 480);
    let back = Segment {
        start_tick: 0,
        end_tick: once.length_steps as u64 * SIXTEENTH,
        parts: vec![Part {
            track: 0,
            channel: 0,
            program: 0,
            notes: once.parts[0]
                .notes
                .iter()
                .map(|n| TickNote { pitch: n.pitch, start: n.onset as u64 * SIXTEENTH, end: (n.onset + n.duration) as u64 * SIXTEENTH })
                .collect(),
        }],
    };
    assert_eq!(quantize_events(&back, 480), once);
}

fn grid(notes: &[(u8, usize, usize)], channel: u8, program: u8) -> GridSegment {
    GridSegment {
        length_steps: 256,
        parts: vec![Part {
            track: 0,
            channel,
            program,
            notes: notes.iter().map(|&(pitch, onset, duration)| GridNote { pitch, onset, duration }).collect(),
        }],
    }
}

fn grid_quarters(bars: usize, pitches: &[u8]) -> Vec<(u8, usize, usize)> {
    (0..bars * 4).map(|k| (pitches[k % pitches.len()], k * 4, 4)).collect()
}

#[test]
fn chords_reduce_to_highest_pitch() {
    let mut notes = grid_quarters(4, &[60, 62, 64]);
    notes.push((64, 0, 4));
    notes.push((67, 0, 4));
    let m = extract_melodies(&grid(&notes, 0, 0));
    assert_eq!(m.len(), 1);
    assert_eq!(m[0][0], NoteEvent::new(67, 0, 4));
    assert_eq!(m[0].len(), 16);
}

#[test]
fn extraction_length_and_pitch_rules() {
    assert!(extract_melodies(&grid(&grid_quarters(3, &[60, 62, 64]), 0, 0)).is_empty());
    assert!(extract_melodies(&grid(&grid_quarters(4, &[60, 62]), 0, 0)).is_empty());
    assert_eq!(extract_melodies(&grid(&grid_quarters(4, &[60, 62, 64]), 0, 0)).len(), 1);
    // percussion channel and non-melodic programs are skipped
    assert!(extract_melodies(&grid(&grid_quarters(4, &[60, 62, 64]), PERCUSSION_CHANNEL, 0)).is_empty());
    assert!(extract_melodies(&grid(&grid_quarters(4, &[60, 62, 64]), 0, 96)).is_empty());
    assert_eq!(extract_melodies(&grid(&grid_quarters(4, &[60, 62, 64]), 0, 95)).len(), 1);
    // out-of-range notes are discarded, leaving too few pitches
    assert!(extract_melodies(&grid(&grid_quarters(4, &[60, 62, 120]), 0, 0)).is_empty());
}

#[test]
fn a_bar_of_silence_ends_a_melody() {
    let mut notes = grid_quarters(4, &[60, 62, 64]);
    // restart after exactly 16 silent steps
    notes.extend(grid_quarters(4, &[70, 72, 74]).iter().map(|&(p, s, d)| (p, s + 80, d)));
    let m = extract_melodies(&grid(&notes, 0, 0));
    assert_eq!(m.len(), 2);
    // the second melody starts at its own bar
    assert_eq!(m[1][0], NoteEvent::new(70, 0, 4));

    // 15 silent steps do not split
    let mut close = grid_quarters(4, &[60, 62, 64]);
    close.extend(grid_quarters(4, &[70, 72, 74]).iter().map(|&(p, s, d)| (p, s + 79, d)));
    assert_eq!(extract_melodies(&grid(&close, 0, 0)).len(), 1);
}

#[test]
fn later_onsets_cut_sounding_notes() {
    let mut notes = grid_quarters(4, &[60, 62, 64]);
    notes[0].2 = 10;
    let m = extract_melodies(&grid(&notes, 0, 0));
    assert_eq!(m[0][0], NoteEvent::new(60, 0, 4));
}

#[test]
fn offbeat_start_keeps_metric_position() {
    let notes: Vec<(u8, usize, usize)> = grid_quarters(5, &[60, 62, 64]).iter().map(|&(p, s, d)| (p, s + 18, d)).collect();
    let m = extract_melodies(&grid(&notes, 0, 0));
    assert_eq!(m[0][0].onset_step, 2);
}

#[test]
fn window_counts() {
    let six: Vec<NoteEvent> = grid_quarters(6, &[60, 62, 64]).iter().map(|&(p, s, d)| NoteEvent::new(p, s, d)).collect();
    assert_eq!(slice_four_bars(&six).len(), 3);
    assert_eq!(slice_four_bars(&six[..16]).len(), 1);
    assert!(slice_four_bars(&six[..12]).is_empty());
}

#[test]
fn windows_match_direct_token_layout() {
    // half notes with one long note crossing the first window's right edge
    let mut melody: Vec<NoteEvent> = (0..8).map(|k| NoteEvent::new(60 + k as u8, 8 * k, 8)).collect();
    melody.push(NoteEvent::new(72, 56, 24));
    melody.sort_by_key(|n| n.onset_step);
    melody.retain(|n| !(n.onset_step == 56 && n.pitch != 72));
    let windows = slice_four_bars(&melody);
    assert_eq!(windows.len(), 2);

    // direct layout of the first window
    let mut expected = [NOTE_OFF; STEPS];
    for n in &melody {
        if n.onset_step < STEPS {
            let end = (n.onset_step + n.duration_steps).min(STEPS);
            expected[n.onset_step] = n.pitch;
            for t in n.onset_step + 1..end {
                expected[t] = NOTE_HOLD;
            }
        }
    }
    assert_eq!(windows[0], TokenMelody::new(expected).unwrap());

    // the second window drops notes begun before it and re-encodes the rest
    let clipped: Vec<NoteEvent> = melody
        .iter()
        .filter(|n| n.onset_step >= 16 && n.onset_step < 80)
        .map(|n| NoteEvent::new(n.pitch, n.onset_step - 16, n.duration_steps.min(80 - n.onset_step)))
        .collect();
    assert_eq!(windows[1], encode_melody(&clipped).unwrap());
}

#[test]
fn full_pipeline_on_written_file() {
    let bar = 16 * SIXTEENTH;
    let lead = track(&quarters(6, &[60, 64, 67, 72]), 0);
    let mut chords = track(&quarters(6, &[48, 52]), 1);
    chords.insert(0, MidiEvent { tick: 0, kind: EventKind::ProgramChange { channel: 1, program: 0 } });
    let drums = track(&quarters(6, &[36, 38, 42]), PERCUSSION_CHANNEL);
    let meta = vec![time_sig(0, 4, 4), time_sig(6 * bar, 3, 4)];
    let bytes = write_smf(&doc(vec![meta, lead, chords, drums]));
    let windows = ingest_smf(&bytes).unwrap();
    // lead: 3 windows; two-pitch chords track and drums are rejected
    assert_eq!(windows.len(), 3);
    assert!(windows.iter().all(|w| w.is_admissible()));
    assert_eq!(ingest_smf(&bytes).unwrap(), windows);
}

#[test]
fn directory_ingest_orders_by_path_and_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_smf(&doc(vec![track(&quarters(4, &[60, 62, 64]), 0)]));
    let other = write_smf(&doc(vec![track(&quarters(4, &[70, 72, 74]), 0)]));
    std::fs::write(dir.path().join("b.mid"), &good).unwrap();
    std::fs::write(dir.path().join("a.MID"), &other).unwrap();
    std::fs::write(dir.path().join("c.mid"), b"junk").unwrap();
    std::fs::write(dir.path().join("notes.txt"), b"ignored").unwrap();
    let s = ingest_directory(dir.path()).unwrap();
    assert_eq!(s.files_read, 2);
    assert_eq!(s.failures.len(), 1);
    assert_eq!(s.melodies.len(), 2);
    assert_eq!(s.melodies[0].tokens()[0], 70);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    fn arb_track() -> impl Strategy<Value = Vec<(u8, u64, u64, u8)>> {
        // (pitch, onset tick, duration ticks, channel)
        proptest::collection::vec((30u8..100, 0u64..20_000, 1u64..1500, 0u8..3), 0..120)
    }

    fn build(raw: &[(u8, u64, u64, u8)], sig_change: Option<u64>) -> MidiDocument {
        let mut ev = Vec::new();
        for &(p, s, d, c) in raw {
            ev.push(on(s, c, p));
            ev.push(off(s + d, c, p));
        }
        ev.sort_by_key(|e| (e.tick, matches!(e.kind, EventKind::NoteOn { .. })));
        let mut meta = vec![time_sig(0, 4, 4)];
        if let Some(t) = sig_change {
            meta.push(time_sig(t, 3, 4));
        }
        doc(vec![meta, ev])
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn pipeline_emits_only_admissible_windows(raw in arb_track(), change in proptest::option::of(0u64..20_000)) {
            let d = build(&raw, change);
            let bytes = write_smf(&d);
            prop_assert_eq!(&parse_smf(&bytes).unwrap(), &d);
            let windows = ingest_smf(&bytes).unwrap();
            for w in &windows {
                prop_assert!(w.is_admissible());
                prop_assert!(w.tokens().iter().all(|&t| t <= NOTE_HOLD));
            }
            prop_assert_eq!(ingest_smf(&bytes).unwrap(), windows);
        }

        #[test]
        fn segments_never_include_non_common_time(raw in arb_track(), change in 1u64..20_000) {
            let d = build(&raw, Some(change));
            for s in split_on_time_signature(&d) {
                prop_assert!(s.end_tick <= change);
                for p in &s.parts {
                    prop_assert!(p.notes.iter().all(|n| n.start < change && n.end <= change));
                }
            }
        }
    }
}
