use std::path::{Path, PathBuf};

use jammin_osc::{decode, encode, OscMessage, OscValue};
use serde_json::Value;

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn manifest() -> Vec<(String, OscMessage)> {
    let text = std::fs::read_to_string(golden_dir().join("manifest.json")).unwrap();
    let entries: Vec<Value> = serde_json::from_str(&text).unwrap();
    entries
        .iter()
        .map(|e| {
            let args = e["args"]
                .as_array()
                .unwrap()
                .iter()
                .map(|a| {
                    let v = &a[1];
                    match a[0].as_str().unwrap() {
                        "i" => OscValue::Int(v.as_i64().unwrap() as i32),
                        "f" => OscValue::Float(v.as_f64().unwrap() as f32),
                        "s" => OscValue::Str(v.as_str().unwrap().to_string()),
                        "b" => OscValue::Blob(
                            (0..v.as_str().unwrap().len())
                                .step_by(2)
                                .map(|i| u8::from_str_radix(&v.as_str().unwrap()[i..i + 2], 16).unwrap())
                                .collect(),
                        ),
                        t => panic!("unknown tag {t}"),
                    }
                })
                .collect();
            (
                e["name"].as_str().unwrap().to_string(),
                OscMessage::new(e["address"].as_str().unwrap(), args),
            )
        })
        .collect()
}

#[test]
fn twelve_golden_messages_match_byte_for_byte() {
    let cases = manifest();
    assert_eq!(cases.len(), 12);
    for (name, msg) in cases {
        let expected = std::fs::read(golden_dir().join(format!("{name}.bin"))).unwrap();
        assert_eq!(encode(&msg).unwrap(), expected, "encode {name}");
        assert_eq!(decode(&expected).unwrap(), vec![msg], "decode {name}");
    }
}

#[test]
fn golden_bundle_flattens_to_first_two_messages() {
    let bytes = std::fs::read(golden_dir().join("bundle_two.bin")).unwrap();
    let expected: Vec<OscMessage> = manifest().into_iter().take(2).map(|(_, m)| m).collect();
    assert_eq!(decode(&bytes).unwrap(), expected);
}
