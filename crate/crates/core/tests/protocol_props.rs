use proptest::prelude::*;
use wfcpl_core::protocol::{Control, Frame, Hello, Role, Tag, WindowData};
use wfcpl_core::Error;

fn any_frame() -> impl Strategy<Value = Frame> {
    let tag = prop_oneof![
        Just(Tag::Hello),
        Just(Tag::Config),
        Just(Tag::WindowData),
        Just(Tag::Control),
        Just(Tag::Bye)
    ];
    (tag, prop::collection::vec(any::<u8>(), 0..64)).prop_map(|(t, p)| Frame::new(t, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn window_data_round_trips_bit_patterns(
        bits in prop::collection::vec(any::<u64>(), 1..40),
        m in 1..5usize,
        window in any::<u32>(),
        iteration in any::<u32>(),
    ) {
        let n = bits.len() / m;
        prop_assume!(n > 0);
        let rows: Vec<Vec<f64>> = bits[..n * m].chunks(m)
            .map(|c| c.iter().map(|b| f64::from_bits(*b)).collect())
            .collect();
        let wd = WindowData { window, iteration, rows };
        let bytes = wd.to_frame().unwrap().encode();
        prop_assert_eq!(bytes.len(), 5 + 16 + 8 * n * m);
        let (frame, used) = Frame::decode(&bytes).unwrap().unwrap();
        prop_assert_eq!(used, bytes.len());
        let back = WindowData::from_frame(&frame).unwrap();
        prop_assert_eq!(back.window, window);
        prop_assert_eq!(back.iteration, iteration);
        let sent: Vec<u64> = wd.rows.iter().flatten().map(|v| v.to_bits()).collect();
        let got: Vec<u64> = back.rows.iter().flatten().map(|v| v.to_bits()).collect();
        prop_assert_eq!(sent, got);
    }

    #[test]
    fn concatenated_frames_split_unambiguously(frames in prop::collection::vec(any_frame(), 0..8)) {
        let mut bytes = Vec::new();
        for f in &frames {
            f.encode_into(&mut bytes);
        }
        prop_assert_eq!(Frame::decode_all(&bytes).unwrap(), frames);
    }

    #[test]
    fn fuzzed_streams_parse_or_fail_cleanly(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        match Frame::decode_all(&bytes) {
            Ok(frames) => {
                // Whatever parsed must re-encode to the exact input.
                let mut again = Vec::new();
                for f in &frames {
                    f.encode_into(&mut again);
                }
                prop_assert_eq!(again, bytes);
            }
            Err(e) => prop_assert!(matches!(e, Error::MalformedFrame(_))),
        }
    }

    #[test]
    fn corrupted_window_payloads_never_misparse(
        rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 3), 1..4),
        cut in 1..24usize,
    ) {
        let mut frame = WindowData { window: 1, iteration: 2, rows }.to_frame().unwrap();
        let len = frame.payload.len();
        frame.payload.truncate(len - cut.min(len));
        prop_assert!(matches!(WindowData::from_frame(&frame), Err(Error::MalformedFrame(_))));
    }
}

#[test]
fn nan_payload_keeps_its_bits() {
    let quiet = f64::from_bits(0x7ff8_0000_0000_0001);
    let signalling = f64::from_bits(0x7ff0_0000_0000_00ff);
    let negative = f64::from_bits(0xfff8_dead_beef_0000);
    let wd = WindowData { window: 0, iteration: 0, rows: vec![vec![quiet, signalling, negative]] };
    let back = WindowData::from_frame(&wd.to_frame().unwrap()).unwrap();
    for (a, b) in wd.rows[0].iter().zip(&back.rows[0]) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn typed_payloads_reject_wrong_tags() {
    let ctl = Control::Iterate.to_frame();
    assert!(WindowData::from_frame(&ctl).is_err());
    assert!(Hello::from_frame(&ctl).is_err());
    assert!(Control::from_frame(&Hello::new(Role::Dirichlet).to_frame()).is_err());
}
