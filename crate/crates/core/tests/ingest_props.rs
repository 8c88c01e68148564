use chrono::{NaiveDate, NaiveDateTime};
use proptest::prelude::*;
use windcast_core::ingest::{
    parse_csv, repair, summarize, ten_minutes, write_csv, Field, FieldFlag, MetRecord, RepairEvent,
};

fn origin() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2020, 3, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
}

fn slot(i: usize) -> NaiveDateTime {
    origin() + ten_minutes() * i as i32
}

// a present slot either has all seven readings or some fields knocked out
fn raw_series() -> impl Strategy<Value = Vec<MetRecord>> {
    let row = (
        any::<bool>(),
        prop::array::uniform7(prop_oneof![4 => Just(true), 1 => Just(false)]),
        prop::array::uniform7(0.0f64..50.0),
    );
    prop::collection::vec(row, 3..80).prop_map(|rows| {
        let mut out = Vec::new();
        for (i, (present, keep, vals)) in rows.into_iter().enumerate() {
            // slot 0 always exists so the grid origin is fixed
            if !present && i != 0 {
                continue;
            }
            let mut r = MetRecord::observed(slot(i), vals);
            for (f, k) in Field::ALL.into_iter().zip(keep) {
                if !k {
                    r.set_missing(f);
                }
            }
            out.push(r);
        }
        out
    })
}

proptest! {
    #[test]
    fn repaired_grid_is_regular(raw in raw_series()) {
        prop_assume!(raw.len() >= 2);
        let ds = repair(raw.clone(), ten_minutes()).unwrap();
        let recs = ds.records();
        prop_assert_eq!(recs[0].timestamp, raw[0].timestamp);
        for w in recs.windows(2) {
            prop_assert_eq!(w[1].timestamp - w[0].timestamp, ten_minutes());
        }
        // a field that was observed anywhere ends up with no gaps
        for f in Field::ALL {
            let ever = raw.iter().any(|r| r.get(f).is_some());
            let gaps = recs.iter().filter(|r| r.flag(f) == FieldFlag::Missing).count();
            if ever {
                prop_assert_eq!(gaps, 0);
            } else {
                prop_assert_eq!(gaps, recs.len());
            }
        }
    }

    #[test]
    fn repair_is_idempotent(raw in raw_series()) {
        prop_assume!(raw.len() >= 2);
        let once = repair(raw, ten_minutes()).unwrap();
        let twice = repair(once.records().to_vec(), ten_minutes()).unwrap();
        // NaN != NaN, so compare the flag and the bits
        for (a, b) in once.records().iter().zip(twice.records()) {
            prop_assert_eq!(a.timestamp, b.timestamp);
            for f in Field::ALL {
                prop_assert_eq!(a.flag(f), b.flag(f));
                prop_assert_eq!(a.value(f).to_bits(), b.value(f).to_bits());
            }
        }
        prop_assert_eq!(once.len(), twice.len());
        let inserted = twice
            .repair_log()
            .iter()
            .any(|e| matches!(e, RepairEvent::RowInserted { .. }));
        prop_assert!(!inserted);
    }

    #[test]
    fn interpolated_values_stay_within_brackets(raw in raw_series()) {
        prop_assume!(raw.len() >= 2);
        let ds = repair(raw, ten_minutes()).unwrap();
        let recs = ds.records();
        for event in ds.repair_log() {
            if let RepairEvent::Interpolated { index, field, value } = *event {
                let before = (0..index).rev().find(|&j| recs[j].flag(field) == FieldFlag::Observed);
                let after = (index + 1..recs.len()).find(|&j| recs[j].flag(field) == FieldFlag::Observed);
                let (a, b) = (recs[before.unwrap()].value(field), recs[after.unwrap()].value(field));
                prop_assert!(value >= a.min(b) - 1e-12 && value <= a.max(b) + 1e-12);
                prop_assert!(after.unwrap() - before.unwrap() - 1 <= 6);
                prop_assert_eq!(recs[index].value(field), value);
            }
        }
    }

    #[test]
    fn summary_matches_a_recount(raw in raw_series()) {
        prop_assume!(raw.len() >= 2);
        let present = raw.len();
        let ds = repair(raw, ten_minutes()).unwrap();
        let s = summarize(&ds);
        prop_assert_eq!(s.rows, ds.len());
        prop_assert_eq!(s.inserted_rows, ds.len() - present);
        let mut total_imputed = 0;
        for fs in &s.fields {
            let mut obs = 0;
            let mut imp = 0;
            let mut mis = 0;
            for r in ds.records() {
                match r.flag(fs.field) {
                    FieldFlag::Observed => obs += 1,
                    FieldFlag::Imputed => imp += 1,
                    FieldFlag::Missing => mis += 1,
                }
            }
            prop_assert_eq!((fs.observed, fs.imputed, fs.missing), (obs, imp, mis));
            prop_assert_eq!(fs.imputed_fraction, imp as f64 / ds.len() as f64);
            total_imputed += imp;
        }
        prop_assert_eq!(s.imputed_values, total_imputed);
        let fills = ds.repair_log().iter().filter(|e| e.is_value_fill()).count();
        prop_assert_eq!(fills, total_imputed);
    }

    #[test]
    fn csv_round_trip_is_exact(raw in raw_series()) {
        prop_assume!(raw.len() >= 2);
        let ds = repair(raw, ten_minutes()).unwrap();
        let mut buf = Vec::new();
        write_csv(ds.records(), &mut buf).unwrap();
        let back = parse_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), ds.len());
        for (a, b) in back.iter().zip(ds.records()) {
            prop_assert_eq!(a.timestamp, b.timestamp);
            for f in Field::ALL {
                prop_assert_eq!(a.flag(f), b.flag(f));
                prop_assert_eq!(a.get(f).map(f64::to_bits), b.get(f).map(f64::to_bits));
            }
        }
    }
}

#[test]
fn single_gap_midpoint() {
    let mk = |i, v| MetRecord::observed(slot(i), [10.0, v, v + 1.0, 1010.0, 20.0, 21.0, 15.0]);
    let ds = repair(vec![mk(0, 4.0), mk(1, 5.0), mk(3, 7.0)], ten_minutes()).unwrap();
    assert_eq!(ds.len(), 4);
    assert_eq!(ds.records()[2].get(Field::Wspd), Some(6.0));
    assert_eq!(ds.records()[2].flag(Field::Wspd), FieldFlag::Imputed);
    assert_eq!(ds.records()[2].get(Field::Pres), Some(1010.0));
}

#[test]
fn seven_slot_gap_is_carried_forward() {
    let mk = |i, v| MetRecord::observed(slot(i), [10.0, v, v + 1.0, 1010.0, 20.0, 21.0, 15.0]);
    let ds = repair(vec![mk(0, 4.0), mk(8, 12.0)], ten_minutes()).unwrap();
    for r in &ds.records()[1..8] {
        assert_eq!(r.get(Field::Wspd), Some(4.0));
    }
}
