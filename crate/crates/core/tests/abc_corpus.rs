//! Parses every tune in `tests/corpus/abc` and compares the note list with
//! the frozen reference output stored next to it.

use std::fs;
use std::path::PathBuf;

use jammin_core::music_text::parse_abc;

fn corpus() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus/abc");
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "abc"))
        .collect();
    files.sort();
    files
}

#[test]
fn corpus_matches_reference_note_lists() {
    let files = corpus();
    assert_eq!(files.len(), 20);
    let mut failures = Vec::new();
    for path in &files {
        let text = fs::read_to_string(path).unwrap();
        let expected: Vec<(u8, u64, u64)> =
            serde_json::from_str(&fs::read_to_string(path.with_extension("expected.json")).unwrap())
                .unwrap();
        let (clip, _) = parse_abc(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let mut got: Vec<(u8, u64, u64)> = clip
            .notes()
            .iter()
            .map(|n| (n.pitch(), n.start().get(), n.duration().get()))
            .collect();
        got.sort_by_key(|&(p, s, d)| (s, p, d));
        if got != expected {
            failures.push(format!("{}\n  got      {got:?}\n  expected {expected:?}", path.display()));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}
