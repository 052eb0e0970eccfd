//! Drum tablature: one line per instrument, one `|`-delimited segment per bar.

use super::MusicTextError;
use crate::note::{normalize_clip, ClipNotes, NoteEvent, Tick, TimeSig};

/// Instrument labels and their General MIDI percussion notes.
pub const DRUM_LABELS: &[(&str, u8, &str)] = &[
    ("BD", 36, "bass drum"),
    ("K", 36, "kick"),
    ("SD", 38, "snare"),
    ("S", 38, "snare"),
    ("HH", 42, "closed hi-hat"),
    ("CH", 42, "closed hi-hat"),
    ("HP", 44, "pedal hi-hat"),
    ("OH", 46, "open hi-hat"),
    ("RS", 37, "rimshot / side stick"),
    ("CL", 39, "clap"),
    ("LT", 45, "low tom"),
    ("MT", 47, "mid tom"),
    ("HT", 50, "high tom"),
    ("CR", 49, "crash"),
    ("C", 49, "crash"),
    ("RD", 51, "ride"),
    ("R", 51, "ride"),
    ("CB", 56, "cowbell"),
];

pub fn label_pitch(label: &str) -> Option<u8> {
    DRUM_LABELS
        .iter()
        .find(|(l, _, _)| l.eq_ignore_ascii_case(label))
        .map(|&(_, p, _)| p)
}

/// Velocity of a hit character, `None` for rests.
pub fn hit_velocity(c: char) -> Option<Option<u8>> {
    match c {
        '-' | '.' => Some(None),
        'x' => Some(Some(90)),
        'X' => Some(Some(120)),
        'o' => Some(Some(100)),
        'O' => Some(Some(127)),
        'g' => Some(Some(40)),
        _ => None,
    }
}

struct Line<'a> {
    label: &'a str,
    pitch: u8,
    segments: Vec<&'a str>,
}

fn split_line(line: &str) -> Result<Line<'_>, MusicTextError> {
    let (label, rest) = line.split_once('|').ok_or_else(|| MusicTextError::MalformedDrumLine {
        label: line.to_string(),
    })?;
    let label = label.trim().trim_end_matches(':').trim();
    let pitch = label_pitch(label).ok_or_else(|| MusicTextError::UnknownDrumLabel(label.to_string()))?;
    let mut segments: Vec<&str> = rest.split('|').collect();
    if segments.last() == Some(&"") {
        segments.pop();
    }
    if segments.is_empty() || segments.iter().any(|s| s.is_empty()) {
        return Err(MusicTextError::MalformedDrumLine {
            label: label.to_string(),
        });
    }
    Ok(Line { label, pitch, segments })
}

/// True when `line` looks like a tablature line with a known label.
pub fn is_drum_line(line: &str) -> bool {
    match split_line(line.trim()) {
        Ok(l) => l
            .segments
            .iter()
            .all(|s| s.chars().all(|c| hit_velocity(c).is_some())),
        Err(_) => false,
    }
}

/// Parses drum tablature. Segment `i` of every line covers bar `i`; the step
/// length of a segment is the bar divided by its character count.
pub fn parse_drumtab(text: &str, time_sig: TimeSig) -> Result<ClipNotes, MusicTextError> {
    let bar_ticks = time_sig.bar_ticks().get();
    let lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(split_line)
        .collect::<Result<Vec<_>, _>>()?;

    let mut steps: Vec<(usize, &str)> = Vec::new();
    for line in &lines {
        for (i, seg) in line.segments.iter().enumerate() {
            let count = seg.chars().count();
            match steps.get(i) {
                Some(&(expected, _)) if expected != count => {
                    return Err(MusicTextError::SegmentMismatch {
                        segment: i + 1,
                        expected,
                        found: count,
                        label: line.label.to_string(),
                    })
                }
                Some(_) => {}
                None => {
                    if !bar_ticks.is_multiple_of(count as u64) {
                        return Err(MusicTextError::IndivisibleSteps {
                            segment: i + 1,
                            steps: count,
                            bar_ticks,
                        });
                    }
                    steps.push((count, line.label));
                }
            }
        }
    }

    let mut notes = Vec::new();
    for line in &lines {
        for (i, seg) in line.segments.iter().enumerate() {
            let step = bar_ticks / steps[i].0 as u64;
            for (j, c) in seg.chars().enumerate() {
                let vel = hit_velocity(c).ok_or_else(|| MusicTextError::UnknownDrumChar {
                    label: line.label.to_string(),
                    ch: c,
                })?;
                if let Some(v) = vel {
                    let start = i as u64 * bar_ticks + j as u64 * step;
                    notes.push(NoteEvent::clamped(line.pitch as i64, Tick(start), Tick(step), v as i64));
                }
            }
        }
    }
    Ok(normalize_clip(notes, time_sig))
}
