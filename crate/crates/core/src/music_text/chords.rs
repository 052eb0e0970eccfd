//! Chord symbol charts: `| C | Am | F G7 | % |`.

use super::MusicTextError;
use crate::note::{normalize_clip, ClipNotes, NoteEvent, Tick, TimeSig};

pub const CHORD_VELOCITY: i64 = 80;
/// MIDI note of a C root (C3); roots sit in C3..B3.
pub const ROOT_BASE: u8 = 48;
/// MIDI note of a C slash bass (C2).
pub const BASS_BASE: u8 = 36;

/// Chord qualities and their intervals above the root.
pub const QUALITIES: &[(&str, &[u8])] = &[
    ("", &[0, 4, 7]),
    ("m", &[0, 3, 7]),
    ("min", &[0, 3, 7]),
    ("dim", &[0, 3, 6]),
    ("aug", &[0, 4, 8]),
    ("maj7", &[0, 4, 7, 11]),
    ("7", &[0, 4, 7, 10]),
    ("m7", &[0, 3, 7, 10]),
    ("m7b5", &[0, 3, 6, 10]),
    ("dim7", &[0, 3, 6, 9]),
    ("sus2", &[0, 2, 7]),
    ("sus4", &[0, 5, 7]),
    ("6", &[0, 4, 7, 9]),
    ("m6", &[0, 3, 7, 9]),
    ("add9", &[0, 4, 7, 14]),
    ("9", &[0, 4, 7, 10, 14]),
    ("maj9", &[0, 4, 7, 11, 14]),
    ("m9", &[0, 3, 7, 10, 14]),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChordPitches {
    /// Chord tones in ascending order.
    pub pitches: Vec<u8>,
    pub bass: Option<u8>,
}

fn pitch_class(token: &str, name: &str) -> Result<(u8, usize), MusicTextError> {
    let mut chars = name.chars();
    let base: i32 = match chars.next() {
        Some('C') => 0,
        Some('D') => 2,
        Some('E') => 4,
        Some('F') => 5,
        Some('G') => 7,
        Some('A') => 9,
        Some('B') => 11,
        _ => {
            return Err(MusicTextError::BadChord {
                token: token.to_string(),
                reason: "root must be a letter A-G",
            })
        }
    };
    match chars.next() {
        Some('#') => Ok(((base + 1).rem_euclid(12) as u8, 2)),
        Some('b') => Ok(((base - 1).rem_euclid(12) as u8, 2)),
        _ => Ok((base as u8, 1)),
    }
}

/// Resolves a symbol such as `Am7` or `G7/B` to MIDI pitches.
pub fn chord_symbol_to_pitches(symbol: &str) -> Result<ChordPitches, MusicTextError> {
    let symbol = symbol.trim();
    let (main, bass) = match symbol.split_once('/') {
        Some((m, b)) => (m, Some(b)),
        None => (symbol, None),
    };
    let (root, used) = pitch_class(symbol, main)?;
    let quality = &main[used..];
    let intervals = QUALITIES
        .iter()
        .find(|(q, _)| *q == quality)
        .map(|(_, i)| *i)
        .ok_or_else(|| MusicTextError::BadChord {
            token: symbol.to_string(),
            reason: "unknown chord quality",
        })?;
    let bass = match bass {
        Some(b) => {
            let (pc, used) = pitch_class(symbol, b)?;
            if used != b.len() {
                return Err(MusicTextError::BadChord {
                    token: symbol.to_string(),
                    reason: "slash bass must be a single note name",
                });
            }
            Some(BASS_BASE + pc)
        }
        None => None,
    };
    let pitches = intervals.iter().map(|i| ROOT_BASE + root + i).collect();
    Ok(ChordPitches { pitches, bass })
}

#[derive(Debug, Clone)]
enum Slot {
    Chord(Vec<u8>),
    Extend,
    Rest,
}

fn is_no_chord(token: &str) -> bool {
    matches!(token, "NC" | "N.C." | "N.C" | "nc")
}

/// True when `token` is a valid chart token: a chord symbol, `/`, `%` or `NC`.
pub fn is_chart_token(token: &str) -> bool {
    matches!(token, "/" | "%") || is_no_chord(token) || chord_symbol_to_pitches(token).is_ok()
}

/// Splits a chart into bars of tokens.
fn bars(text: &str) -> Vec<Vec<&str>> {
    if !text.contains('|') {
        return text.split_whitespace().map(|t| vec![t]).collect();
    }
    text.lines()
        .flat_map(|line| line.split('|'))
        .map(|seg| {
            seg.split_whitespace()
                .map(|t| t.trim_matches(|c| c == ':' || c == '[' || c == ']'))
                .filter(|t| !t.is_empty())
                .collect::<Vec<_>>()
        })
        .filter(|bar| !bar.is_empty())
        .collect()
}

/// Parses a chord chart into block chords, one bar per `|`-delimited segment.
///
/// Tokens in a bar split it into equal slots. `/` extends the previous chord
/// by one slot, `%` repeats the previous bar and `NC` is a rest.
pub fn parse_chords(text: &str, time_sig: TimeSig) -> Result<ClipNotes, MusicTextError> {
    let bar_ticks = time_sig.bar_ticks().get();
    let mut resolved: Vec<Vec<Slot>> = Vec::new();
    for (i, tokens) in bars(text).into_iter().enumerate() {
        let bar_no = i + 1;
        if tokens.contains(&"%") {
            if tokens.len() != 1 {
                return Err(MusicTextError::RepeatNotAlone { bar: bar_no });
            }
            let prev = resolved
                .last()
                .cloned()
                .ok_or(MusicTextError::RepeatWithoutBar { bar: bar_no })?;
            resolved.push(prev);
            continue;
        }
        let slots = tokens
            .iter()
            .map(|&t| {
                if t == "/" {
                    Ok(Slot::Extend)
                } else if is_no_chord(t) {
                    Ok(Slot::Rest)
                } else {
                    let c = chord_symbol_to_pitches(t)?;
                    Ok(Slot::Chord(c.pitches.into_iter().chain(c.bass).collect()))
                }
            })
            .collect::<Result<Vec<_>, MusicTextError>>()?;
        resolved.push(slots);
    }

    // (pitch, start, duration) of every emitted note; the last chord's notes
    // are `notes[block..]`.
    let mut notes: Vec<(u8, u64, u64)> = Vec::new();
    let mut last_block: Option<usize> = None;
    for (i, slots) in resolved.iter().enumerate() {
        let n = slots.len() as u64;
        if !bar_ticks.is_multiple_of(n) {
            return Err(MusicTextError::UnevenBar {
                bar: i + 1,
                slots: slots.len(),
                bar_ticks,
            });
        }
        let slot = bar_ticks / n;
        for (j, s) in slots.iter().enumerate() {
            let start = i as u64 * bar_ticks + j as u64 * slot;
            match s {
                Slot::Chord(pitches) => {
                    last_block = Some(notes.len());
                    notes.extend(pitches.iter().map(|&p| (p, start, slot)));
                }
                Slot::Rest => last_block = Some(notes.len()),
                Slot::Extend => {
                    let block = last_block.ok_or(MusicTextError::NothingToExtend { bar: i + 1 })?;
                    for note in &mut notes[block..] {
                        note.2 += slot;
                    }
                }
            }
        }
    }
    let events: Vec<NoteEvent> = notes
        .into_iter()
        .map(|(p, s, d)| NoteEvent::clamped(p as i64, Tick(s), Tick(d), CHORD_VELOCITY))
        .collect();
    Ok(normalize_clip(events, time_sig))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(symbol: &str) -> (Vec<u8>, Option<u8>) {
        let c = chord_symbol_to_pitches(symbol).unwrap();
        (c.pitches, c.bass)
    }

    #[test]
    fn symbol_examples() {
        assert_eq!(set("C"), (vec![48, 52, 55], None));
        assert_eq!(set("Am7"), (vec![57, 60, 64, 67], None));
        assert_eq!(set("G7/B"), (vec![55, 59, 62, 65], Some(47)));
        assert!(matches!(
            chord_symbol_to_pitches("Hmaj"),
            Err(MusicTextError::BadChord { token, .. }) if token == "Hmaj"
        ));
    }

    #[test]
    fn accidentals_and_qualities() {
        assert_eq!(set("F#m"), (vec![54, 57, 61], None));
        assert_eq!(set("Bbmaj9"), (vec![58, 62, 65, 69, 72], None));
        assert_eq!(set("Cb"), (vec![59, 63, 66], None));
        assert_eq!(set("B#dim7"), (vec![48, 51, 54, 57], None));
        assert_eq!(set("D/F#"), (vec![50, 54, 57], Some(42)));
        assert!(chord_symbol_to_pitches("Cmaj").is_err());
        assert!(chord_symbol_to_pitches("C/X").is_err());
        assert!(chord_symbol_to_pitches("C/Bbb").is_err());
        assert!(chord_symbol_to_pitches("").is_err());
    }

    #[test]
    fn every_quality_contains_root_and_stays_in_range() {
        for (q, intervals) in QUALITIES {
            assert!(intervals.contains(&0), "{q}");
            for root in ["C", "B", "Bb", "F#"] {
                let c = chord_symbol_to_pitches(&format!("{root}{q}/B")).unwrap();
                assert!(c.pitches.iter().chain(c.bass.iter()).all(|p| (36..=95).contains(p)));
            }
        }
    }

    fn blocks(clip: &ClipNotes) -> Vec<(u64, u64, Vec<u8>)> {
        let mut out: Vec<(u64, u64, Vec<u8>)> = Vec::new();
        for n in clip.notes() {
            match out.last_mut() {
                Some(b) if b.0 == n.start().0 => b.2.push(n.pitch()),
                _ => out.push((n.start().0, n.duration().0, vec![n.pitch()])),
            }
        }
        out
    }

    #[test]
    fn four_bar_progression() {
        let clip = parse_chords("| C | Am | F | G |", TimeSig::COMMON).unwrap();
        assert_eq!(
            blocks(&clip),
            vec![
                (0, 1920, vec![48, 52, 55]),
                (1920, 1920, vec![57, 60, 64]),
                (3840, 1920, vec![53, 57, 60]),
                (5760, 1920, vec![55, 59, 62]),
            ]
        );
        assert_eq!(clip.length(), Tick(7680));
        assert!(clip.notes().iter().all(|n| n.velocity() == 80));
    }

    #[test]
    fn split_bar() {
        let clip = parse_chords("Dm7 G7 | Cmaj7", TimeSig::COMMON).unwrap();
        let b = blocks(&clip);
        assert_eq!((b[0].0, b[0].1), (0, 960));
        assert_eq!((b[1].0, b[1].1), (960, 960));
        assert_eq!((b[2].0, b[2].1), (1920, 1920));
    }

    #[test]
    fn repeat_bar() {
        let clip = parse_chords("| C | % |", TimeSig::COMMON).unwrap();
        assert_eq!(
            blocks(&clip),
            vec![(0, 1920, vec![48, 52, 55]), (1920, 1920, vec![48, 52, 55])]
        );
        assert_eq!(
            parse_chords("| % | C |", TimeSig::COMMON),
            Err(MusicTextError::RepeatWithoutBar { bar: 1 })
        );
        assert_eq!(
            parse_chords("| C | % G |", TimeSig::COMMON),
            Err(MusicTextError::RepeatNotAlone { bar: 2 })
        );
    }

    #[test]
    fn extend_and_rest() {
        let clip = parse_chords("| C / / G | / NC Am / |", TimeSig::COMMON).unwrap();
        assert_eq!(
            blocks(&clip),
            vec![
                (0, 1440, vec![48, 52, 55]),
                (1440, 960, vec![55, 59, 62]),
                (2880, 960, vec![57, 60, 64]),
            ]
        );
        assert_eq!(
            parse_chords("/ C", TimeSig::COMMON),
            Err(MusicTextError::NothingToExtend { bar: 1 })
        );
    }

    #[test]
    fn whitespace_chart_is_one_chord_per_bar() {
        let clip = parse_chords("C G\nAm F", TimeSig::new(3, 4).unwrap()).unwrap();
        let starts: Vec<u64> = blocks(&clip).iter().map(|b| b.0).collect();
        assert_eq!(starts, vec![0, 1440, 2880, 4320]);
    }

    #[test]
    fn uneven_division_is_error() {
        assert_eq!(
            parse_chords("| C D E F G F E D C |", TimeSig::new(1, 32).unwrap()),
            Err(MusicTextError::UnevenBar { bar: 1, slots: 9, bar_ticks: 60 })
        );
        // 7 slots do not divide 1920.
        assert!(parse_chords("| C D E F G A B |", TimeSig::COMMON).is_err());
    }

    #[test]
    fn slash_bass_and_repeat_markers() {
        let clip = parse_chords("|: C/E | G :|", TimeSig::COMMON).unwrap();
        assert_eq!(blocks(&clip)[0].2, vec![40, 48, 52, 55]);
    }

    #[test]
    fn bad_symbol_names_token() {
        let err = parse_chords("| C | Xm |", TimeSig::COMMON).unwrap_err();
        assert!(err.to_string().contains("Xm"));
    }
}
