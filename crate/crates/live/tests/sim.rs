use jammin_core::{NoteEvent, Tick, TimeSig};
use jammin_live::sim::DEFAULT_CLIP_COLOR;
use jammin_live::{ClipAddress, Control, Mutation, SimError, SimSet, Simulator};
use jammin_osc::{OscMessage, OscValue};
use proptest::prelude::*;

const MINIMAL: &str = r#"{"tempo":120,"time_sig":[4,4],"tracks":[{"name":"Bass","clips":[null]}]}"#;

fn two_by_two() -> SimSet {
    SimSet::from_json(
        r#"{"tempo":120,"time_sig":[4,4],"tracks":[
            {"name":"Bass","clips":[{"name":"lofi chords"},null]},
            {"name":"Drums","clips":[null,null]}]}"#,
    )
    .unwrap()
}

fn msg(addr: &str, args: Vec<OscValue>) -> OscMessage {
    OscMessage::new(addr, args)
}

#[test]
fn minimal_scenario_is_one_empty_slot() {
    let set = SimSet::from_json(MINIMAL).unwrap();
    assert_eq!(set.tracks.len(), 1);
    assert_eq!(set.tracks[0].clips, vec![None]);
    assert_eq!(set.time_sig, TimeSig::COMMON);
}

#[test]
fn scenario_errors_carry_json_pointers() {
    let cases = [
        (r#"{"tempo":120,"time_sig":[4,4],"tracks":[{"name":"B","clips":[{"notes":[[128,0,1,100]]}]}]}"#, "/tracks/0/clips/0/notes/0/0"),
        (r#"{"tempo":120,"time_sig":[4,4],"tracks":[{"name":"B","clips":[{"notes":[[60,0,1,0]]}]}]}"#, "/tracks/0/clips/0/notes/0/3"),
        (r#"{"tempo":120,"time_sig":[4,4],"tracks":[{"name":"B","clips":[{"notes":[[60,-1,1,9]]}]}]}"#, "/tracks/0/clips/0/notes/0/1"),
        (r#"{"tempo":120,"time_sig":[4,4],"tracks":[{"name":"B","clips":[{"notes":[[60,0,0,9]]}]}]}"#, "/tracks/0/clips/0/notes/0/2"),
        (r#"{"tempo":-1,"time_sig":[4,4],"tracks":[]}"#, "/tempo"),
        (r#"{"tempo":120,"time_sig":[4,3],"tracks":[]}"#, "/time_sig"),
        (r#"{"tempo":120,"tracks":[]}"#, "/time_sig"),
        (r#"{"tempo":120,"time_sig":[4,4],"tracks":[{"name":"A","clips":[null]},{"name":"B","clips":[]}]}"#, "/tracks/1/clips"),
        (r#"{"tempo":120,"time_sig":[4,4],"tracks":[{"name":"A","clips":[{"colour":3}]}]}"#, "/tracks/0/clips/0/colour"),
        (r#"{"tempo":120,"time_sig":[4,4],"tracks":[{"name":"A","clips":[{"color":70}]}]}"#, "/tracks/0/clips/0/color"),
        (r#"{"tempo":120,"time_sig":[4,4],"tracks":[{"name":"A","clips":[{"length_beats":3}]}]}"#, "/tracks/0/clips/0/length_beats"),
        ("[1,2]", "/"),
    ];
    for (json, pointer) in cases {
        let err = SimSet::from_json(json).unwrap_err();
        assert_eq!(err.pointer, pointer, "{json}: {err}");
    }
}

#[test]
fn scan_lists_occupied_slots() {
    let mut sim = Simulator::new(two_by_two());
    let replies = sim.handle(&msg("/jammin/scan", vec![]));
    assert_eq!(replies.len(), 2);
    assert_eq!(replies[0].addr, "/jammin/clip/info");
    assert_eq!(replies[0].args[2], OscValue::Str("lofi chords".into()));
    assert_eq!(replies[1], msg("/jammin/scan/done", vec![OscValue::Int(1)]));
}

#[test]
fn added_notes_read_back_identically() {
    let mut sim = Simulator::new(two_by_two());
    let groups = vec![
        OscValue::Int(60), OscValue::Float(0.5), OscValue::Float(0.25), OscValue::Int(90),
        OscValue::Int(64), OscValue::Float(7.75), OscValue::Float(1.0), OscValue::Int(127),
    ];
    let mut add = vec![OscValue::Int(0), OscValue::Int(0), OscValue::Int(0)];
    add.extend(groups.clone());
    assert_eq!(sim.handle(&msg("/jammin/clip/add/notes", add))[0].addr, "/jammin/ok");
    let back = sim.handle(&msg("/jammin/clip/get/notes", vec![OscValue::Int(0), OscValue::Int(0)]));
    assert_eq!(back[0].args[3..], groups[..]);
    // The second note ends in bar 3, so the clip grew.
    assert_eq!(sim.set().tracks[0].clips[0].as_ref().unwrap().notes.length(), Tick(3 * 1920));
}

#[test]
fn out_of_range_requests_are_errors() {
    let mut sim = Simulator::new(two_by_two());
    let r = sim.handle(&msg("/jammin/clip/get/notes", vec![OscValue::Int(99), OscValue::Int(0)]));
    assert_eq!(r[0].addr, "/jammin/error");
    let r = sim.handle(&msg("/jammin/clip/set/color", vec![OscValue::Int(0), OscValue::Int(0), OscValue::Int(70)]));
    assert_eq!(r[0].args[1], OscValue::Str("color out of range".into()));
    let r = sim.handle(&msg("/jammin/clip/set/color", vec![OscValue::Int(0), OscValue::Int(0), OscValue::Int(-1)]));
    assert_eq!(r[0].args[1], OscValue::Str("color out of range".into()));
}

#[test]
fn rename_semantics() {
    let mut sim = Simulator::new(two_by_two());
    sim.inject_rename(ClipAddress::new(1, 1), "basic rock beat").unwrap();
    let shell = sim.set().clip(ClipAddress::new(1, 1)).unwrap();
    assert_eq!((shell.name.as_str(), shell.color, shell.notes.len()), ("basic rock beat", DEFAULT_CLIP_COLOR, 0));

    sim.handle(&msg(
        "/jammin/clip/add/notes",
        vec![0.into(), 0.into(), 0.into(), 60.into(), 0.0f32.into(), 1.0f32.into(), 100.into()],
    ));
    sim.inject_rename(ClipAddress::new(0, 0), "make it minor").unwrap();
    let c = sim.set().clip(ClipAddress::new(0, 0)).unwrap();
    assert_eq!((c.name.as_str(), c.notes.len()), ("make it minor", 1));

    let before = sim.set().clone();
    assert_eq!(sim.inject_rename(ClipAddress::new(5, 0), "x"), Err(SimError::NoSuchTrack));
    assert_eq!(sim.inject_rename(ClipAddress::new(0, 5), "x"), Err(SimError::NoSuchSlot));
    assert_eq!(sim.set(), &before);
}

#[test]
fn control_commands() {
    assert_eq!(
        Control::parse("rename 1 0 4 bar funky bassline"),
        Ok(Control::Rename { addr: ClipAddress::new(1, 0), name: "4 bar funky bassline".into() })
    );
    assert_eq!(
        Control::parse("  rename 0 3 \"lofi chords\" "),
        Ok(Control::Rename { addr: ClipAddress::new(0, 3), name: "lofi chords".into() })
    );
    assert_eq!(Control::parse("show"), Ok(Control::Show));
    assert!(Control::parse("rename x 0 a").is_err());
    assert!(Control::parse("launch 0 0").is_err());
    let mut sim = Simulator::new(two_by_two());
    assert!(sim.control(&Control::parse("rename 9 9 nope").unwrap()).is_err());
    assert!(sim.control(&Control::Show).unwrap().contains("\"lofi chords\""));
}

#[test]
fn log_sequence_is_strictly_increasing() {
    let mut sim = Simulator::new(two_by_two());
    sim.handle(&msg("/jammin/scan", vec![]));
    sim.inject_rename(ClipAddress::new(1, 0), "x").unwrap();
    sim.handle(&msg("/nonsense", vec![]));
    let seqs: Vec<u64> = sim.log().entries().iter().map(|e| e.seq).collect();
    assert_eq!(seqs, [1, 2, 3]);
    assert!(matches!(sim.log().entries()[1].mutation, Some(Mutation::Rename { .. })));
}

fn arb_request() -> impl Strategy<Value = OscMessage> {
    let slot = || (0i32..3, 0i32..3);
    prop_oneof![
        slot().prop_map(|(t, c)| msg("/jammin/clip/clear_notes", vec![t.into(), c.into()])),
        (slot(), 0f32..16.0).prop_map(|((t, c), l)| msg("/jammin/clip/create", vec![t.into(), c.into(), l.into()])),
        (slot(), 0i32..72).prop_map(|((t, c), col)| msg("/jammin/clip/set/color", vec![t.into(), c.into(), col.into()])),
        (slot(), prop::collection::vec((0i32..128, 0u32..64, 1u32..16, 1i32..128), 0..20)).prop_map(|((t, c), ns)| {
            let mut args = vec![t.into(), c.into(), 0.into()];
            for (p, s, d, v) in ns.into_iter().take(16) {
                args.extend([p.into(), (s as f32 / 4.0).into(), (d as f32 / 4.0).into(), v.into()]);
            }
            msg("/jammin/clip/add/notes", args)
        }),
        Just(msg("/jammin/scan", vec![])),
    ]
}

proptest! {
    #[test]
    fn scenario_json_round_trips(reqs in prop::collection::vec(arb_request(), 0..20)) {
        let mut sim = Simulator::new(two_by_two());
        for r in &reqs {
            sim.handle(r);
        }
        let set = sim.set().clone();
        let reloaded = SimSet::from_json(&set.to_json_string()).unwrap();
        prop_assert_eq!(&reloaded, &set);
        prop_assert_eq!(reloaded.to_json_string(), set.to_json_string());
    }

    #[test]
    fn event_log_replays_to_final_state(
        reqs in prop::collection::vec(arb_request(), 0..30),
        renames in prop::collection::vec((0u32..3, 0u32..3, "[a-z ]{0,12}"), 0..5),
    ) {
        let initial = two_by_two();
        let mut sim = Simulator::new(initial.clone());
        for (i, r) in reqs.iter().enumerate() {
            sim.handle(r);
            if let Some((t, c, name)) = renames.get(i) {
                let _ = sim.inject_rename(ClipAddress::new(*t, *c), name);
            }
        }
        prop_assert_eq!(&sim.log().replay(&initial).unwrap(), sim.set());
    }
}

#[test]
fn clear_keeps_clip_length() {
    let mut set = SimSet::empty(120.0, TimeSig::COMMON, &["Bass"], 1);
    let addr = ClipAddress::new(0, 0);
    Mutation::CreateClip { addr, length: Tick(4 * 1920) }.apply(&mut set).unwrap();
    Mutation::AddNotes { addr, notes: vec![NoteEvent::new(60, Tick(0), Tick(480), 90).unwrap()] }.apply(&mut set).unwrap();
    Mutation::ClearNotes { addr }.apply(&mut set).unwrap();
    let clip = set.clip(addr).unwrap();
    assert!(clip.notes.is_empty());
    assert_eq!(clip.notes.length(), Tick(4 * 1920));
}
