use super::chords::is_chart_token;
use super::drumtab::is_drum_line;
use super::{FormatTag, MusicText, MusicTextError};

struct Fence<'a> {
    tag: &'a str,
    body: String,
}

fn fences(reply: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut open: Option<(&str, Vec<&str>)> = None;
    for line in reply.lines() {
        let trimmed = line.trim();
        match open.take() {
            None => {
                if let Some(tag) = trimmed.strip_prefix("```") {
                    open = Some((tag.trim(), Vec::new()));
                }
            }
            Some((tag, mut lines)) => {
                if trimmed.starts_with("```") {
                    out.push(Fence {
                        tag,
                        body: lines.join("\n"),
                    });
                } else {
                    lines.push(line);
                    open = Some((tag, lines));
                }
            }
        }
    }
    // An unterminated fence runs to the end of the reply.
    if let Some((tag, lines)) = open {
        out.push(Fence {
            tag,
            body: lines.join("\n"),
        });
    }
    out
}

fn fence_format(tag: &str) -> Option<Option<FormatTag>> {
    match tag.to_ascii_lowercase().as_str() {
        "" | "text" | "txt" => Some(None),
        other => other.parse::<FormatTag>().ok().map(Some),
    }
}

fn is_header(line: &str) -> bool {
    let b = line.as_bytes();
    b.len() >= 2 && b[0].is_ascii_alphabetic() && b[1] == b':'
}

/// Cuts an ABC tune out of free text: from the first `X:` line (or the header
/// block holding `K:`) to the first blank line after the music starts.
fn classify_abc(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().collect();
    let key_at = lines
        .iter()
        .position(|l| l.trim_start().starts_with("X:") || l.trim_start().starts_with("K:"))?;
    let mut start = key_at;
    if !lines[key_at].trim_start().starts_with("X:") {
        while start > 0 && is_header(lines[start - 1].trim_start()) {
            start -= 1;
        }
    }
    let k_line = (start..lines.len()).find(|&i| lines[i].trim_start().starts_with("K:"));
    let mut end = lines.len();
    if let Some(k) = k_line {
        let mut seen_music = false;
        for (i, l) in lines.iter().enumerate().skip(k + 1) {
            if l.trim().is_empty() {
                if seen_music {
                    end = i;
                    break;
                }
            } else {
                seen_music = true;
            }
        }
    }
    Some(lines[start..end].join("\n"))
}

fn is_chord_line(line: &str) -> bool {
    let tokens: Vec<&str> = line
        .split(|c: char| c.is_whitespace() || c == '|')
        .map(|t| t.trim_matches(|c| c == ':' || c == '[' || c == ']'))
        .filter(|t| !t.is_empty())
        .collect();
    !tokens.is_empty()
        && tokens.iter().all(|t| is_chart_token(t))
        && tokens.iter().any(|t| !matches!(*t, "/" | "%"))
}

fn matching_lines(text: &str, pred: impl Fn(&str) -> bool) -> Option<String> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| pred(l)).collect();
    (!lines.is_empty()).then(|| lines.join("\n"))
}

fn classify(text: &str) -> Option<MusicText> {
    if let Some(body) = classify_abc(text) {
        return MusicText::new(FormatTag::Abc, body).ok();
    }
    if let Some(body) = matching_lines(text, is_drum_line) {
        return MusicText::new(FormatTag::DrumTab, body).ok();
    }
    matching_lines(text, is_chord_line).and_then(|b| MusicText::new(FormatTag::ChordSymbols, b).ok())
}

/// Finds the music in a model reply.
///
/// A fenced block tagged `abc`, `chords` or `drumtab` wins; an untagged fence
/// is classified by content. Without a usable fence the whole reply is
/// classified: a line starting `X:` or `K:` means ABC, tablature lines mean
/// drum tab, and lines made only of chord tokens and `|` mean chord symbols.
pub fn extract_music_block(reply: &str) -> Result<MusicText, MusicTextError> {
    for fence in fences(reply) {
        match fence_format(fence.tag) {
            Some(Some(format)) => {
                if let Ok(text) = MusicText::new(format, fence.body) {
                    return Ok(text);
                }
            }
            Some(None) => {
                if let Some(text) = classify(&fence.body) {
                    return Ok(text);
                }
            }
            None => {}
        }
    }
    classify(reply).ok_or(MusicTextError::UnparseableReply)
}
