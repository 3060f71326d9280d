//! Round trips and rejection paths of every on-disk format.

use evhand_core::annotation::{read_depth, write_depth, DepthMap, DEPTH_HEADER_LEN};
use evhand_core::camera::{read_calibration, reference_rig, write_calibration, Calibration, Distortion};
use evhand_core::event::{
    encode_lnes, parse_events, read_lnes, write_events, write_lnes, Event, EventError, EventFormat, EventStream,
    LnesMode, Polarity, BINARY_HEADER_LEN, BINARY_RECORD_LEN,
};
use evhand_core::heatmap::{read_heatmaps, render_gaussian, write_heatmaps};
use evhand_core::sim::reference_depth_camera;
use evhand_core::Keypoints2D;
use nalgebra::Vector2;
use proptest::prelude::*;

fn stream_strategy() -> impl Strategy<Value = EventStream> {
    (1u16..64, 1u16..64).prop_flat_map(|(w, h)| {
        prop::collection::vec((0u64..1_000_000, 0..w, 0..h, any::<bool>()), 0..200).prop_map(move |raw| {
            let mut events: Vec<Event> = raw
                .into_iter()
                .map(|(t, x, y, p)| Event {
                    t,
                    x,
                    y,
                    polarity: if p { Polarity::Positive } else { Polarity::Negative },
                })
                .collect();
            events.sort_by_key(|e| e.t);
            EventStream::new(w, h, events).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn event_files_round_trip(s in stream_strategy()) {
        let csv = EventFormat::Csv { width: s.width(), height: s.height() };
        for fmt in [EventFormat::BinaryV1, csv] {
            let bytes = write_events(&s, fmt);
            prop_assert_eq!(&parse_events(&bytes, fmt).unwrap(), &s);
        }
        let bin = write_events(&s, EventFormat::BinaryV1);
        prop_assert_eq!(bin.len(), BINARY_HEADER_LEN + BINARY_RECORD_LEN * s.len());
    }

    #[test]
    fn truncated_binary_is_rejected(s in stream_strategy(), cut in 1usize..13) {
        prop_assume!(!s.is_empty());
        let bin = write_events(&s, EventFormat::BinaryV1);
        let err = parse_events(&bin[..bin.len() - cut], EventFormat::BinaryV1).unwrap_err();
        prop_assert!(matches!(err, EventError::TruncatedRecord { .. }), "{:?}", err);
    }

    #[test]
    fn lnes_dump_round_trip(s in stream_strategy(), t_end in 0u64..1_100_000, dt in 1u64..500_000) {
        let w = s.window(t_end, dt).unwrap();
        for mode in [LnesMode::Sum, LnesMode::Latest] {
            let surf = encode_lnes(&w, s.width().into(), s.height().into(), mode).unwrap();
            prop_assert_eq!(read_lnes(&write_lnes(&surf)).unwrap(), surf);
        }
    }
}

#[test]
fn heatmap_dump_round_trip() {
    let mut kp = Keypoints2D::invalid();
    kp.coords[3] = Vector2::new(10.25, 7.5);
    kp.valid[3] = true;
    let stack = render_gaussian(&kp, 2.0, 40, 30);
    let bytes = write_heatmaps(&stack);
    assert_eq!(read_heatmaps(&bytes).unwrap(), stack);
    assert!(read_heatmaps(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn depth_and_calibration_round_trip() {
    let mut dm = DepthMap::empty(8, 4, 17);
    dm.values[5] = 412;
    dm.values[31] = u16::MAX;
    let bytes = write_depth(&dm);
    assert_eq!(bytes.len(), DEPTH_HEADER_LEN + 2 * 32);
    assert_eq!(read_depth(&bytes).unwrap(), dm);
    assert!(read_depth(&bytes[..bytes.len() - 2]).is_err());

    let calib = Calibration {
        rig: reference_rig(Distortion([-0.03, 0.004, 1e-4, -2e-4, 0.0])),
        depth: Some(reference_depth_camera()),
    };
    let text = write_calibration(&calib).unwrap();
    assert_eq!(read_calibration(&text).unwrap(), calib);
    assert!(read_calibration(&text.replace("fx", "focal")).is_err());
}

#[test]
fn csv_event_line_format() {
    let s = EventStream::new(
        4,
        4,
        vec![Event {
            t: 1,
            x: 2,
            y: 3,
            polarity: Polarity::Negative,
        }],
    )
    .unwrap();
    let text = String::from_utf8(write_events(&s, EventFormat::Csv { width: 4, height: 4 })).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), ["t_us,x,y,p", "1,2,3,-1"]);
}
