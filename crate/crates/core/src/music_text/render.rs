use std::collections::{BTreeSet, HashMap};

use super::MusicTextError;
use crate::note::{normalize_clip, ClipNotes, NoteEvent, Tick};

/// Finest grid `render_abc` can express: a 1/64 note, a quarter of the
/// `L:1/16` unit it writes.
pub const RENDER_GRID: u64 = 30;

/// Snaps note starts to the nearest grid point and durations to the nearest
/// positive multiple of the grid. Halfway values round up.
///
/// # Panics
///
/// Panics if `grid` is zero.
pub fn quantize(clip: &ClipNotes, grid: Tick) -> ClipNotes {
    let g = grid.get();
    assert!(g > 0, "quantize grid must be positive");
    let snap = |t: u64| (t + g / 2) / g * g;
    let notes = clip.notes().iter().map(|n| {
        let start = snap(n.start().get());
        let duration = snap(n.duration().get()).max(g);
        NoteEvent::clamped(n.pitch() as i64, Tick(start), Tick(duration), n.velocity() as i64)
    });
    normalize_clip(notes.collect::<Vec<_>>(), clip.time_sig()).with_min_length(clip.length())
}

// Sharp spelling for every pitch class: (letter index into CDEFGAB, accidental).
const SPELLING: [(usize, i8); 12] = [
    (0, 0),
    (0, 1),
    (1, 0),
    (1, 1),
    (2, 0),
    (3, 0),
    (3, 1),
    (4, 0),
    (4, 1),
    (5, 0),
    (5, 1),
    (6, 0),
];
const LETTERS: [char; 7] = ['C', 'D', 'E', 'F', 'G', 'A', 'B'];

fn length_suffix(ticks: u64) -> String {
    // ticks is a multiple of 30, so units have denominator 1, 2 or 4.
    let quarters = ticks / RENDER_GRID;
    let (num, den) = match quarters % 4 {
        0 => (quarters / 4, 1),
        2 => (quarters / 2, 2),
        _ => (quarters, 4),
    };
    match (num, den) {
        (1, 1) => String::new(),
        (n, 1) => n.to_string(),
        (1, d) => format!("/{d}"),
        (n, d) => format!("{n}/{d}"),
    }
}

/// Writes notes with explicit accidentals against K:C, tracking accidentals
/// already in force for the current bar. An accidental holds for its letter
/// in every octave until the bar line.
struct BarSpeller {
    in_force: HashMap<usize, i8>,
}

impl BarSpeller {
    fn pitch(&mut self, pitch: u8) -> String {
        let octave = pitch as i32 / 12;
        let (letter, acc) = SPELLING[pitch as usize % 12];
        // Octave relative to the uppercase letters (C = MIDI 60).
        let rel = octave - 5;
        let mut out = String::new();
        let current = self.in_force.get(&letter).copied().unwrap_or(0);
        if current != acc {
            out.push(if acc == 1 { '^' } else { '=' });
            self.in_force.insert(letter, acc);
        }
        if rel >= 1 {
            out.push(LETTERS[letter].to_ascii_lowercase());
            out.extend(std::iter::repeat_n('\'', (rel - 1) as usize));
        } else {
            out.push(LETTERS[letter]);
            out.extend(std::iter::repeat_n(',', (-rel) as usize));
        }
        out
    }
}

/// Renders a clip as ABC with `L:1/16` and `K:C`.
///
/// Every note start and duration must sit on the 30-tick grid; call
/// [`quantize`] first. Notes sounding together over the same span become
/// bracket chords; partially overlapping notes are split at every boundary
/// and joined with ties. Velocity is not written.
pub fn render_abc(clip: &ClipNotes, tempo_bpm: f64) -> Result<String, MusicTextError> {
    if let Some(n) = clip
        .notes()
        .iter()
        .find(|n| n.start().get() % RENDER_GRID != 0 || n.duration().get() % RENDER_GRID != 0)
    {
        return Err(MusicTextError::QuantizationRequired {
            start: n.start().get(),
            duration: n.duration().get(),
        });
    }
    let ts = clip.time_sig();
    let bar = ts.bar_ticks().get();
    let last_end = clip.notes().iter().map(|n| n.end().get()).max().unwrap_or(0);
    let total = clip.length().get().max(last_end.div_ceil(bar) * bar).max(bar);

    let mut cuts: BTreeSet<u64> = (0..=total / bar).map(|i| i * bar).collect();
    for n in clip.notes() {
        cuts.insert(n.start().get());
        cuts.insert(n.end().get());
    }
    let cuts: Vec<u64> = cuts.into_iter().collect();

    let mut bars: Vec<Vec<String>> = vec![Vec::new()];
    let mut speller = BarSpeller { in_force: HashMap::new() };
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a > 0 && a % bar == 0 {
            bars.push(Vec::new());
            speller.in_force.clear();
        }
        let mut sounding: Vec<&NoteEvent> = clip
            .notes()
            .iter()
            .filter(|n| n.start().get() <= a && a < n.end().get())
            .collect();
        sounding.sort_by_key(|n| n.pitch());
        let suffix = length_suffix(b - a);
        let token = match sounding.as_slice() {
            [] => format!("z{suffix}"),
            [n] => {
                let tie = if n.end().get() > b { "-" } else { "" };
                format!("{}{suffix}{tie}", speller.pitch(n.pitch()))
            }
            many => {
                let inner: String = many
                    .iter()
                    .map(|n| {
                        let tie = if n.end().get() > b { "-" } else { "" };
                        format!("{}{tie}", speller.pitch(n.pitch()))
                    })
                    .collect();
                format!("[{inner}]{suffix}")
            }
        };
        bars.last_mut().expect("at least one bar").push(token);
    }

    let mut out = format!(
        "X:1\nM:{}/{}\nL:1/16\nQ:1/4={}\nK:C\n",
        ts.numerator(),
        ts.denominator(),
        tempo_bpm
    );
    for line in bars.chunks(4) {
        let rendered: Vec<String> = line.iter().map(|b| format!("{}|", b.join(" "))).collect();
        out.push_str(&rendered.join(" "));
        out.push('\n');
    }
    Ok(out)
}
