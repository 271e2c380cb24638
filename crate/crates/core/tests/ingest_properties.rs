use std::io::Cursor;

use proptest::prelude::*;
use voidplace::ingest::{bin_events, read_events, DedupePolicy, SegmentSpec};

fn spec() -> SegmentSpec {
    serde_json::from_str(
        r#"{"lat_min": 36.9, "lat_max": 36.9036, "lon_center": -76.08, "corridor_halfwidth": 0.01,
            "start": "2020-01-01T00:00:00", "end": "2020-02-01T00:00:00"}"#,
    )
    .unwrap()
}

fn row_strategy() -> impl Strategy<Value = String> {
    (1u32..6, 0u32..31, 0.0f64..0.0045, -0.012f64..0.012).prop_map(|(mmsi, day, dlat, dlon)| {
        format!("{mmsi},2020-01-{:02}T12:00:00,{},{}", day + 1, 36.9 + dlat, -76.08 + dlon)
    })
}

fn csv(rows: &[String]) -> String {
    let mut s = String::from("MMSI,BaseDateTime,LAT,LON\n");
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn order_invariant_without_dedupe(rows in prop::collection::vec(row_strategy(), 0..60), rot in 0usize..60) {
        let spec = spec();
        let grid = spec.grid(50.0).unwrap();
        let a = read_events(Cursor::new(csv(&rows)), &spec).unwrap();
        let mut shuffled = rows.clone();
        shuffled.reverse();
        if !shuffled.is_empty() {
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
        }
        let b = read_events(Cursor::new(csv(&shuffled)), &spec).unwrap();
        let ba = bin_events(&a.events, &spec, &grid, DedupePolicy::None).unwrap();
        let bb = bin_events(&b.events, &spec, &grid, DedupePolicy::None).unwrap();
        prop_assert_eq!(&ba.counts.counts, &bb.counts.counts);

        let total = ba.counts.total() as usize;
        prop_assert!(total <= a.events.len());
        if ba.out_of_range == 0 {
            prop_assert_eq!(total, a.events.len());
        }
        let dd = bin_events(&a.events, &spec, &grid, DedupePolicy::PerVesselPerCell).unwrap();
        prop_assert!(dd.counts.total() <= ba.counts.total());
    }
}
