use jammin_osc::{decode, encode, OscMessage, OscValue};
use proptest::prelude::*;

fn value() -> impl Strategy<Value = OscValue> {
    prop_oneof![
        any::<i32>().prop_map(OscValue::Int),
        any::<u32>().prop_map(|b| OscValue::Float(f32::from_bits(b))),
        "[^\u{0}]{0,24}".prop_map(OscValue::Str),
        prop::collection::vec(any::<u8>(), 0..40).prop_map(OscValue::Blob),
    ]
}

fn message() -> impl Strategy<Value = OscMessage> {
    ("/[!-~]{0,30}", prop::collection::vec(value(), 0..12)).prop_map(|(a, v)| OscMessage::new(a, v))
}

fn to_rosc(v: &OscValue) -> rosc::OscType {
    match v {
        OscValue::Int(i) => rosc::OscType::Int(*i),
        OscValue::Float(f) => rosc::OscType::Float(*f),
        OscValue::Str(s) => rosc::OscType::String(s.clone()),
        OscValue::Blob(b) => rosc::OscType::Blob(b.clone()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decode_inverts_encode(m in message()) {
        let bytes = encode(&m).unwrap();
        prop_assert_eq!(bytes.len() % 4, 0);
        prop_assert_eq!(decode(&bytes).unwrap(), vec![m]);
    }

    #[test]
    fn matches_an_independent_encoder(m in message()) {
        let theirs = rosc::encoder::encode(&rosc::OscPacket::Message(rosc::OscMessage {
            addr: m.addr.clone(),
            args: m.args.iter().map(to_rosc).collect(),
        }))
        .unwrap();
        prop_assert_eq!(encode(&m).unwrap(), theirs);
    }

    #[test]
    fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode(&bytes);
    }

    #[test]
    fn decode_never_panics_on_plausible_packets(
        m in message(),
        flips in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 1..6),
    ) {
        let mut bytes = encode(&m).unwrap();
        for (i, b) in flips {
            let at = i.index(bytes.len());
            bytes[at] = b;
        }
        let _ = decode(&bytes);
    }
}
