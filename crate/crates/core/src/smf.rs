//! Standard MIDI File (format 0) writer.

use crate::note::{ClipNotes, PPQ};

const NOTE_OFF_VELOCITY: u8 = 0x40;

/// Appends `value` as a MIDI variable-length quantity.
pub fn write_vlq(buf: &mut Vec<u8>, value: u32) {
    assert!(value < 1 << 28, "VLQ value out of range");
    let mut started = false;
    for shift in [21u32, 14, 7] {
        let group = ((value >> shift) & 0x7f) as u8;
        if started || group != 0 {
            buf.push(group | 0x80);
            started = true;
        }
    }
    buf.push((value & 0x7f) as u8);
}

/// Microseconds per quarter note for a tempo, clamped to the 24-bit field.
pub fn tempo_micros(tempo_bpm: f64) -> u32 {
    let bpm = if tempo_bpm.is_finite() && tempo_bpm > 0.0 { tempo_bpm } else { 120.0 };
    ((60_000_000.0 / bpm).round() as u32).clamp(1, 0xff_ffff)
}

/// Renders a clip as a single-track SMF at 480 ticks per quarter note.
///
/// The track holds one tempo event, a note-on/note-off pair per note on
/// channel 1 and an end-of-track event at the clip end. At equal ticks
/// note-offs come before note-ons.
pub fn write_smf(clip: &ClipNotes, tempo_bpm: f64) -> Vec<u8> {
    // (tick, 0 = off / 1 = on, pitch, velocity)
    let mut events: Vec<(u64, u8, u8, u8)> = Vec::with_capacity(clip.len() * 2);
    for n in clip.notes() {
        events.push((n.start().get(), 1, n.pitch(), n.velocity()));
        events.push((n.end().get(), 0, n.pitch(), NOTE_OFF_VELOCITY));
    }
    events.sort();

    let mut track = Vec::new();
    write_vlq(&mut track, 0);
    let us = tempo_micros(tempo_bpm);
    track.extend_from_slice(&[0xff, 0x51, 0x03]);
    track.extend_from_slice(&us.to_be_bytes()[1..]);

    let mut now = 0u64;
    for (tick, on, pitch, vel) in events {
        write_vlq(&mut track, (tick - now) as u32);
        now = tick;
        let status = if on == 1 { 0x90 } else { 0x80 };
        track.extend_from_slice(&[status, pitch, vel]);
    }
    let end = clip.length().get().max(now);
    write_vlq(&mut track, (end - now) as u32);
    track.extend_from_slice(&[0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(22 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(PPQ as u16).to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::note::{normalize_clip, NoteEvent, Tick, TimeSig};

    fn vlq(v: u32) -> Vec<u8> {
        let mut b = Vec::new();
        write_vlq(&mut b, v);
        b
    }

    #[test]
    fn vlq_known_values() {
        assert_eq!(vlq(0), [0x00]);
        assert_eq!(vlq(0x7f), [0x7f]);
        assert_eq!(vlq(0x80), [0x81, 0x00]);
        assert_eq!(vlq(480), [0x83, 0x60]);
        assert_eq!(vlq(0x3fff), [0xff, 0x7f]);
        assert_eq!(vlq(0x4000), [0x81, 0x80, 0x00]);
        assert_eq!(vlq(0x0fff_ffff), [0xff, 0xff, 0xff, 0x7f]);
    }

    #[test]
    fn empty_clip_layout() {
        let smf = write_smf(&ClipNotes::empty(TimeSig::COMMON), 120.0);
        assert_eq!(&smf[..14], b"MThd\0\0\0\x06\0\0\0\x01\x01\xe0");
        assert_eq!(&smf[14..18], b"MTrk");
        // tempo 500000 = 07 A1 20, end of track after one bar (1920 = 8F 00)
        assert_eq!(
            &smf[22..],
            &[0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20, 0x8f, 0x00, 0xff, 0x2f, 0x00]
        );
    }

    #[test]
    fn single_note_bytes() {
        let clip = normalize_clip([NoteEvent::new(60, Tick(0), Tick(480), 96).unwrap()], TimeSig::COMMON);
        let smf = write_smf(&clip, 120.0);
        let track = &smf[22..];
        assert_eq!(&track[7..11], &[0x00, 0x90, 0x3c, 0x60]);
        assert_eq!(&track[11..16], &[0x83, 0x60, 0x80, 0x3c, 0x40]);
    }

    #[test]
    fn note_off_precedes_note_on_at_same_tick() {
        let clip = normalize_clip(
            [
                NoteEvent::new(60, Tick(0), Tick(480), 96).unwrap(),
                NoteEvent::new(60, Tick(480), Tick(480), 96).unwrap(),
            ],
            TimeSig::COMMON,
        );
        let smf = write_smf(&clip, 120.0);
        let track = &smf[22..];
        assert_eq!(&track[11..19], &[0x83, 0x60, 0x80, 0x3c, 0x40, 0x00, 0x90, 0x3c]);
    }

    #[test]
    fn tempo_conversion() {
        assert_eq!(tempo_micros(120.0), 500_000);
        assert_eq!(tempo_micros(90.0), 666_667);
        assert_eq!(tempo_micros(0.0), 500_000);
        assert_eq!(tempo_micros(1.0), 0xff_ffff);
    }
}
