use std::fs;

use jammin_core::{FormatTag, TimeSig, TrackContext};
use jammin_gen::{
    build_generate_prompt, generate, Backend, BackendError, GenRequest, MockBackend, Prompt, Purpose,
};

fn request(name: &str, format: FormatTag) -> GenRequest {
    GenRequest::generate(name, TrackContext::new("Bass", 120.0, TimeSig::COMMON), format)
}

#[test]
fn fixture_is_found_by_format_and_slug() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("abc")).unwrap();
    let reply = "```abc\nX:1\nL:1/4\nK:C\nC2 G,2|\n```\n";
    fs::write(dir.path().join("abc/4-bar-funky-bassline.txt"), reply).unwrap();
    let mock = MockBackend::new(dir.path());
    let req = request("4 bar funky bassline", FormatTag::Abc);
    let prompt = Prompt {
        messages: build_generate_prompt(&req),
        purpose: Purpose::Generate(FormatTag::Abc),
        clip_name: req.clip_name.clone(),
    };
    assert_eq!(mock.complete(&prompt).unwrap(), reply);
    let out = generate(&req, &mock).unwrap();
    assert_eq!(out.clip.len(), 2);
    assert_eq!(mock.calls(), 2);
}

#[test]
fn prompt_hash_is_the_fallback_key() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("chords")).unwrap();
    let req = request("something unusual", FormatTag::ChordSymbols);
    let prompt = Prompt {
        messages: build_generate_prompt(&req),
        purpose: Purpose::Generate(FormatTag::ChordSymbols),
        clip_name: req.clip_name.clone(),
    };
    let hash = MockBackend::prompt_hash(&prompt);
    assert_eq!(hash.len(), 16);
    assert_eq!(hash, MockBackend::prompt_hash(&prompt.clone()));
    fs::write(dir.path().join(format!("chords/{hash}.txt")), "| Am | F |").unwrap();
    assert_eq!(MockBackend::new(dir.path()).complete(&prompt).unwrap(), "| Am | F |");
}

#[test]
fn missing_fixture_names_both_paths() {
    let dir = tempfile::tempdir().unwrap();
    let mock = MockBackend::new(dir.path());
    let prompt = Prompt { messages: vec![], purpose: Purpose::Choose, clip_name: "x y".into() };
    match mock.complete(&prompt) {
        Err(BackendError::MissingFixture(paths)) => {
            assert!(paths.contains("choose/x-y.txt"), "{paths}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn edits_read_abc_fixtures() {
    let mock = MockBackend::new("/fixtures");
    let prompt = Prompt { messages: vec![], purpose: Purpose::Edit, clip_name: "make it minor".into() };
    assert!(mock.fixture_paths(&prompt)[0].ends_with("abc/make-it-minor.txt"));
}
