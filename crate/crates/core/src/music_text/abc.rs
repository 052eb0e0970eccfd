//! ABC notation subset parser.
//!
//! The supported subset covers single-voice tunes: notes with accidentals,
//! octave marks and length modifiers, rests, bar lines, bracket chords, ties,
//! broken rhythm and `(3` triplets. Decorations, chord annotations, grace
//! notes and slurs are recognized and skipped. Anything else is an error.

use std::collections::HashMap;

use num_rational::Rational64;

use super::MusicTextError;
use crate::note::{normalize_clip, ClipNotes, NoteEvent, Tick, TimeSig, PPQ};

/// Velocity given to every parsed ABC note.
pub const ABC_VELOCITY: i64 = 96;

const WHOLE_NOTE_TICKS: i64 = 4 * PPQ as i64;

/// Letter order used for key signature accidental maps.
const LETTERS: [char; 7] = ['C', 'D', 'E', 'F', 'G', 'A', 'B'];
const LETTER_SEMITONES: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];
/// Position of each letter on the circle of fifths, relative to C.
const LETTER_FIFTHS: [i32; 7] = [0, 2, 4, -1, 1, 3, 5];
const SHARP_ORDER: [usize; 7] = [3, 0, 4, 1, 5, 2, 6]; // F C G D A E B
const FLAT_ORDER: [usize; 7] = [6, 2, 5, 1, 4, 0, 3]; // B E A D G C F

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Major,
    Minor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeySig {
    tonic: u8,
    mode: Mode,
    fifths: i8,
    accidentals: [i8; 7],
}

impl KeySig {
    pub const C_MAJOR: KeySig = KeySig {
        tonic: 0,
        mode: Mode::Major,
        fifths: 0,
        accidentals: [0; 7],
    };

    /// Parses the value of a `K:` field such as `G`, `F#m`, `Bb major` or `Amin`.
    pub fn parse(value: &str) -> Result<KeySig, MusicTextError> {
        let unsupported = || MusicTextError::UnsupportedKey(value.trim().to_string());
        let mut words = value.split_whitespace().filter(|w| !w.contains('='));
        let Some(first) = words.next() else {
            return Ok(KeySig::C_MAJOR);
        };
        if first.eq_ignore_ascii_case("none") {
            return Ok(KeySig::C_MAJOR);
        }
        let mut chars = first.chars();
        let letter = chars.next().map(|c| c.to_ascii_uppercase()).ok_or_else(unsupported)?;
        let letter_idx = LETTERS.iter().position(|&l| l == letter).ok_or_else(unsupported)?;
        let rest = chars.as_str();
        let (acc, mode_str) = match rest.chars().next() {
            Some('#') => (1, &rest[1..]),
            Some('b') => (-1, &rest[1..]),
            _ => (0, rest),
        };
        let mode_str = if mode_str.is_empty() {
            words.next().unwrap_or("")
        } else {
            mode_str
        };
        let mode_lower = mode_str.to_ascii_lowercase();
        let mode = if mode_lower == "m" || mode_lower.starts_with("min") || mode_lower.starts_with("aeo") {
            Mode::Minor
        } else if mode_lower.is_empty() || mode_lower.starts_with("maj") || mode_lower.starts_with("ion") {
            Mode::Major
        } else {
            return Err(unsupported());
        };
        let mut fifths = LETTER_FIFTHS[letter_idx] + 7 * acc;
        if mode == Mode::Minor {
            fifths -= 3;
        }
        if !(-7..=7).contains(&fifths) {
            return Err(unsupported());
        }
        let tonic = (LETTER_SEMITONES[letter_idx] + acc).rem_euclid(12) as u8;
        Ok(KeySig::from_fifths(tonic, mode, fifths as i8))
    }

    fn from_fifths(tonic: u8, mode: Mode, fifths: i8) -> KeySig {
        let mut accidentals = [0i8; 7];
        if fifths > 0 {
            for &i in &SHARP_ORDER[..fifths as usize] {
                accidentals[i] = 1;
            }
        } else {
            for &i in &FLAT_ORDER[..(-fifths) as usize] {
                accidentals[i] = -1;
            }
        }
        KeySig {
            tonic,
            mode,
            fifths,
            accidentals,
        }
    }

    pub fn tonic(&self) -> u8 {
        self.tonic
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Sharps (positive) or flats (negative) in the signature.
    pub fn fifths(&self) -> i8 {
        self.fifths
    }

    /// Accidental for a pitch letter (`C`..`B`, either case).
    pub fn accidental(&self, letter: char) -> i8 {
        LETTERS
            .iter()
            .position(|&l| l == letter.to_ascii_uppercase())
            .map_or(0, |i| self.accidentals[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbcHeader {
    pub meter: TimeSig,
    /// Default note length as a fraction of a whole note.
    pub unit_len: Rational64,
    pub key: KeySig,
    pub tempo_bpm: Option<f64>,
}

impl Default for AbcHeader {
    fn default() -> Self {
        AbcHeader {
            meter: TimeSig::COMMON,
            unit_len: Rational64::new(1, 8),
            key: KeySig::C_MAJOR,
            tempo_bpm: None,
        }
    }
}

fn bad_header(field: char, value: &str) -> MusicTextError {
    MusicTextError::BadHeader {
        field,
        value: value.trim().to_string(),
    }
}

fn parse_meter(value: &str) -> Result<TimeSig, MusicTextError> {
    match value.trim() {
        "C" => Ok(TimeSig::COMMON),
        "C|" => Ok(TimeSig::new(2, 2)?),
        v if v.is_empty() || v.eq_ignore_ascii_case("none") => Ok(TimeSig::COMMON),
        v => v.parse::<TimeSig>().map_err(|_| bad_header('M', value)),
    }
}

fn parse_unit_len(value: &str) -> Result<Rational64, MusicTextError> {
    let v = value.trim();
    let (n, d) = v.split_once('/').unwrap_or((v, "1"));
    let n: i64 = n.trim().parse().map_err(|_| bad_header('L', value))?;
    let d: i64 = d.trim().parse().map_err(|_| bad_header('L', value))?;
    if n != 1 || ![1, 2, 4, 8, 16, 32].contains(&d) {
        return Err(bad_header('L', value));
    }
    Ok(Rational64::new(1, d))
}

fn parse_fraction(s: &str) -> Option<Rational64> {
    let (n, d) = s.split_once('/')?;
    let n: i64 = n.trim().parse().ok()?;
    let d: i64 = d.trim().parse().ok()?;
    (n > 0 && d > 0).then(|| Rational64::new(n, d))
}

/// Tempo in quarter notes per minute from a `Q:` field.
fn parse_tempo(value: &str, unit_len: Rational64) -> Result<f64, MusicTextError> {
    // Drop quoted text such as "Allegro".
    let mut cleaned = String::new();
    let mut in_quote = false;
    for c in value.chars() {
        if c == '"' {
            in_quote = !in_quote;
        } else if !in_quote {
            cleaned.push(c);
        }
    }
    let cleaned = cleaned.trim();
    let (beat, bpm) = match cleaned.split_once('=') {
        Some((lhs, rhs)) => {
            let beat = lhs
                .split_whitespace()
                .map(parse_fraction)
                .try_fold(Rational64::from_integer(0), |acc, f| f.map(|f| acc + f))
                .filter(|b| *b > Rational64::from_integer(0))
                .ok_or_else(|| bad_header('Q', value))?;
            (beat, rhs.trim())
        }
        None => (unit_len, cleaned),
    };
    let bpm: f64 = bpm.parse().map_err(|_| bad_header('Q', value))?;
    if !(bpm.is_finite() && bpm > 0.0) {
        return Err(bad_header('Q', value));
    }
    let quarters = (*beat.numer() as f64 / *beat.denom() as f64) * 4.0;
    Ok(bpm * quarters)
}

/// Splits `X:value` style field lines. A letter followed by `:|` or `::` is
/// music (a note before a repeat bar), not a field.
fn field_line(line: &str) -> Option<(char, &str)> {
    let mut chars = line.chars();
    let letter = chars.next()?;
    if !letter.is_ascii_alphabetic() || chars.next()? != ':' {
        return None;
    }
    let rest = &line[2..];
    if rest.starts_with('|') || rest.starts_with(':') {
        return None;
    }
    Some((letter, rest))
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// One timed element of the tune: a note, a chord, or a rest when `pitches`
/// is empty. Each pitch carries its outgoing tie flag.
#[derive(Debug)]
struct Event {
    pitches: Vec<(u8, bool)>,
    len: Rational64,
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn digits(&mut self) -> Option<i64> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        self.chars[start..self.pos].iter().collect::<String>().parse().ok()
    }

    /// Skips past the next `close`; errors if the line ends first.
    fn skip_past(&mut self, close: char) -> Result<(), MusicTextError> {
        let start = self.pos;
        while let Some(c) = self.bump() {
            if c == close {
                return Ok(());
            }
        }
        self.pos = start;
        Err(self.error_at(start.saturating_sub(1)))
    }

    fn error_at(&self, pos: usize) -> MusicTextError {
        let token: String = self.chars[pos.min(self.chars.len())..]
            .iter()
            .take(8)
            .collect();
        MusicTextError::UnknownToken {
            line: self.line,
            column: pos + 1,
            token,
        }
    }
}

struct BodyParser {
    unit: Rational64,
    meter: TimeSig,
    key: KeySig,
    /// Accidentals written earlier in the current bar. They apply to the
    /// letter in every octave.
    bar_accidentals: HashMap<usize, i8>,
    events: Vec<Event>,
    pending_broken: Option<Rational64>,
    triplet_left: u8,
}

impl BodyParser {
    fn new(header: &AbcHeader) -> Self {
        BodyParser {
            unit: header.unit_len,
            meter: header.meter,
            key: header.key,
            bar_accidentals: HashMap::new(),
            events: Vec::new(),
            pending_broken: None,
            triplet_left: 0,
        }
    }

    fn push(&mut self, mut event: Event) {
        if let Some(f) = self.pending_broken.take() {
            event.len *= f;
        }
        if self.triplet_left > 0 {
            event.len *= Rational64::new(2, 3);
            self.triplet_left -= 1;
        }
        self.events.push(event);
    }

    fn bar_len(&self) -> Rational64 {
        Rational64::new(
            self.meter.numerator() as i64,
            self.meter.denominator() as i64,
        )
    }

    fn apply_field(&mut self, field: char, value: &str) -> Result<(), MusicTextError> {
        match field {
            'K' => self.key = KeySig::parse(value)?,
            'L' => self.unit = parse_unit_len(value)?,
            'M' => self.meter = parse_meter(value)?,
            'V' => return Err(MusicTextError::Voices),
            _ => {}
        }
        Ok(())
    }

    fn line(&mut self, src: &str, line_no: usize) -> Result<(), MusicTextError> {
        let mut cur = Cursor::new(src, line_no);
        while let Some(c) = cur.peek() {
            let start = cur.pos;
            match c {
                ' ' | '\t' | '`' | '\\' | '$' | 'y' | '~' | '.' | ')' => {
                    cur.bump();
                }
                '%' => break,
                '"' | '!' | '+' => {
                    cur.bump();
                    cur.skip_past(c)?;
                }
                '{' => {
                    cur.bump();
                    cur.skip_past('}')?;
                }
                '(' => {
                    cur.bump();
                    if cur.peek().is_some_and(|d| d.is_ascii_digit()) {
                        let n = cur.digits();
                        if n != Some(3) || cur.peek() == Some(':') {
                            let token: String = cur.chars[start..cur.pos.min(cur.chars.len())]
                                .iter()
                                .chain(cur.peek().iter())
                                .collect();
                            return Err(MusicTextError::UnsupportedTuplet { line: line_no, token });
                        }
                        self.triplet_left = 3;
                    }
                }
                '|' | ':' => self.barline(&mut cur),
                '[' => self.bracket(&mut cur)?,
                '-' => {
                    cur.bump();
                    if let Some(last) = self.events.last_mut() {
                        for p in &mut last.pitches {
                            p.1 = true;
                        }
                    }
                }
                '>' | '<' => {
                    let mut n = 0;
                    while cur.eat(c) {
                        n += 1;
                    }
                    let Some(last) = self.events.last_mut() else {
                        return Err(cur.error_at(start));
                    };
                    if n > 3 {
                        return Err(cur.error_at(start));
                    }
                    let short = Rational64::new(1, 1 << n);
                    let long = Rational64::from_integer(2) - short;
                    let (prev, next) = if c == '>' { (long, short) } else { (short, long) };
                    last.len *= prev;
                    self.pending_broken = Some(next);
                }
                'z' | 'x' => {
                    cur.bump();
                    let len = self.unit * length_modifier(&mut cur, start)?;
                    self.push(Event { pitches: Vec::new(), len });
                }
                'Z' | 'X' => {
                    cur.bump();
                    let bars = cur.digits().unwrap_or(1);
                    let len = self.bar_len() * bars;
                    self.push(Event { pitches: Vec::new(), len });
                }
                '^' | '_' | '=' | 'A'..='G' | 'a'..='g' => {
                    let (pitch, len) = self.note(&mut cur)?;
                    self.push(Event {
                        pitches: vec![(pitch, false)],
                        len,
                    });
                }
                _ => return Err(cur.error_at(start)),
            }
        }
        Ok(())
    }

    fn barline(&mut self, cur: &mut Cursor) {
        let mut saw_pipe = false;
        while let Some(c) = cur.peek() {
            match c {
                '|' => saw_pipe = true,
                ':' => {}
                ']' if saw_pipe => {}
                _ => break,
            }
            cur.bump();
        }
        // Variant endings (`|1`, `:|2`) are played straight through.
        if saw_pipe {
            while cur.peek().is_some_and(|c| c.is_ascii_digit() || c == ',' || c == '-')
                && (cur.peek().is_some_and(|c| c.is_ascii_digit())
                    || cur.peek_at(1).is_some_and(|c| c.is_ascii_digit()))
            {
                cur.bump();
            }
        }
        self.bar_accidentals.clear();
    }

    fn bracket(&mut self, cur: &mut Cursor) -> Result<(), MusicTextError> {
        let start = cur.pos;
        match (cur.peek_at(1), cur.peek_at(2)) {
            (Some('|'), _) => {
                cur.bump();
                self.barline(cur);
                return Ok(());
            }
            (Some(d), _) if d.is_ascii_digit() => {
                cur.bump();
                while cur.peek().is_some_and(|c| c.is_ascii_digit() || c == ',' || c == '-') {
                    cur.bump();
                }
                return Ok(());
            }
            (Some(f), Some(':')) if f.is_ascii_alphabetic() => {
                cur.pos += 3;
                let body_start = cur.pos;
                cur.skip_past(']')?;
                let value: String = cur.chars[body_start..cur.pos - 1].iter().collect();
                return self.apply_field(f, &value);
            }
            _ => {}
        }
        cur.bump();
        let mut notes: Vec<(u8, Rational64, bool)> = Vec::new();
        loop {
            match cur.peek() {
                Some(']') => {
                    cur.bump();
                    break;
                }
                Some('"') | Some('!') | Some('+') => {
                    let c = cur.bump().unwrap_or('"');
                    cur.skip_past(c)?;
                }
                Some('~') | Some('.') | Some(' ') => {
                    cur.bump();
                }
                Some('^' | '_' | '=' | 'A'..='G' | 'a'..='g') => {
                    let (pitch, len) = self.note(cur)?;
                    let tied = cur.eat('-');
                    notes.push((pitch, len, tied));
                }
                _ => return Err(cur.error_at(start)),
            }
        }
        let Some(&(_, first_len, _)) = notes.first() else {
            return Err(cur.error_at(start));
        };
        let len = first_len * length_modifier(cur, start)?;
        let all_tied = cur.eat('-');
        let pitches = notes.into_iter().map(|(p, _, t)| (p, t || all_tied)).collect();
        self.push(Event { pitches, len });
        Ok(())
    }

    fn note(&mut self, cur: &mut Cursor) -> Result<(u8, Rational64), MusicTextError> {
        let start = cur.pos;
        let explicit = match cur.peek() {
            Some('^') => {
                cur.bump();
                Some(if cur.eat('^') { 2 } else { 1 })
            }
            Some('_') => {
                cur.bump();
                Some(if cur.eat('_') { -2 } else { -1 })
            }
            Some('=') => {
                cur.bump();
                Some(0)
            }
            _ => None,
        };
        let letter = match cur.bump() {
            Some(l @ ('A'..='G' | 'a'..='g')) => l,
            _ => return Err(cur.error_at(start)),
        };
        let letter_idx = LETTERS
            .iter()
            .position(|&l| l == letter.to_ascii_uppercase())
            .unwrap_or(0);
        let mut octave: i32 = if letter.is_ascii_lowercase() { 1 } else { 0 };
        loop {
            if cur.eat('\'') {
                octave += 1;
            } else if cur.eat(',') {
                octave -= 1;
            } else {
                break;
            }
        }
        let acc = match explicit {
            Some(a) => {
                self.bar_accidentals.insert(letter_idx, a);
                a
            }
            None => self
                .bar_accidentals
                .get(&letter_idx)
                .copied()
                .unwrap_or_else(|| self.key.accidentals[letter_idx]),
        };
        let pitch = 60 + LETTER_SEMITONES[letter_idx] + 12 * octave + acc as i32;
        if !(0..=127).contains(&pitch) {
            return Err(MusicTextError::PitchRange { line: cur.line });
        }
        let len = self.unit * length_modifier(cur, start)?;
        Ok((pitch as u8, len))
    }
}

/// Parses a length suffix: `2`, `3/2`, `/`, `//`, `/4`, `3/`.
fn length_modifier(cur: &mut Cursor, token_start: usize) -> Result<Rational64, MusicTextError> {
    let num = cur.digits().unwrap_or(1);
    let mut den: i64 = 1;
    while cur.eat('/') {
        den *= cur.digits().unwrap_or(2);
    }
    if num == 0 || den == 0 {
        return Err(cur.error_at(token_start));
    }
    Ok(Rational64::new(num, den))
}

fn to_ticks(pos: Rational64) -> u64 {
    (pos * WHOLE_NOTE_TICKS).round().to_integer().max(0) as u64
}

/// Lays events out in time, merging tied notes of equal pitch.
fn layout(events: &[Event]) -> Vec<NoteEvent> {
    let mut spans: Vec<(u8, u64, u64)> = Vec::new();
    let mut open_ties: Vec<usize> = Vec::new();
    let mut pos = Rational64::from_integer(0);
    for ev in events {
        let start = to_ticks(pos);
        pos += ev.len;
        let end = to_ticks(pos).max(start + 1);
        let mut next_ties = Vec::new();
        for &(pitch, tie_out) in &ev.pitches {
            let continued = open_ties
                .iter()
                .position(|&i| spans[i].0 == pitch && spans[i].2 == start);
            let idx = match continued {
                Some(k) => {
                    let i = open_ties.swap_remove(k);
                    spans[i].2 = end;
                    i
                }
                None => {
                    spans.push((pitch, start, end));
                    spans.len() - 1
                }
            };
            if tie_out {
                next_ties.push(idx);
            }
        }
        open_ties = next_ties;
    }
    spans
        .into_iter()
        .map(|(p, s, e)| NoteEvent::clamped(p as i64, Tick(s), Tick(e - s), ABC_VELOCITY))
        .collect()
}

/// Parses an ABC tune into clip notes (velocity 96) and its header.
///
/// A `K:` field must appear before the first music line. The clip length is
/// derived from the notes; bar contents are not checked against the meter.
pub fn parse_abc(text: &str) -> Result<(ClipNotes, AbcHeader), MusicTextError> {
    let mut header = AbcHeader::default();
    let mut lines = text.lines().enumerate();
    let mut have_key = false;
    for (_, raw) in lines.by_ref() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let Some((field, value)) = field_line(line) else {
            return Err(MusicTextError::MissingKey);
        };
        match field {
            'M' => header.meter = parse_meter(value)?,
            'L' => header.unit_len = parse_unit_len(value)?,
            'Q' => header.tempo_bpm = Some(parse_tempo(value, header.unit_len)?),
            'V' => return Err(MusicTextError::Voices),
            'K' => {
                header.key = KeySig::parse(value)?;
                have_key = true;
                break;
            }
            _ => {}
        }
    }
    if !have_key {
        return Err(MusicTextError::MissingKey);
    }
    let mut body = BodyParser::new(&header);
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if let Some((field, value)) = field_line(line) {
            if field == 'X' {
                break;
            }
            body.apply_field(field, strip_comment(value))?;
            continue;
        }
        body.line(line, idx + 1)?;
    }
    let notes = layout(&body.events);
    Ok((normalize_clip(notes, header.meter), header))
}
