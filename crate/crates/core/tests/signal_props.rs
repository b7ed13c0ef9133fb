use proptest::prelude::*;
use pvdtw::signal::trim_dark;
use pvdtw::{
    align_to_grid, broken_glass_profiles, fill_missing, generate_fleet, read_csv, slice_window, write_csv, znormalize,
    DayModel, Fleet, PanelSeries, WindowSpec,
};

fn gappy_series(id: usize) -> impl Strategy<Value = PanelSeries> {
    (
        0i64..8,
        prop_oneof![Just(30i64), Just(60), Just(120)],
        prop::collection::vec(prop::option::weighted(0.8, 0.0f64..10.0), 2..30),
    )
        .prop_filter_map("needs two observations", move |(shift, period, mut samples)| {
            let n = samples.len();
            samples[0].get_or_insert(1.0);
            samples[n - 1].get_or_insert(2.0);
            PanelSeries::with_gaps(format!("p{id}"), shift * 30, period, samples).ok()
        })
}

fn gappy_fleet() -> impl Strategy<Value = Fleet> {
    (1usize..4)
        .prop_flat_map(|n| (0..n).map(gappy_series).collect::<Vec<_>>())
        .prop_map(|series| Fleet::new(series).unwrap())
}

fn aligned_fleet() -> impl Strategy<Value = Fleet> {
    (1usize..4, 5usize..40).prop_flat_map(|(n, len)| {
        prop::collection::vec(prop::collection::vec(0.0f64..10.0, len), n).prop_map(|rows| {
            Fleet::new(
                rows.into_iter()
                    .enumerate()
                    .map(|(i, v)| PanelSeries::new(format!("p{i}"), 600, 60, v).unwrap())
                    .collect(),
            )
            .unwrap()
        })
    })
}

proptest! {
    #[test]
    fn align_is_idempotent(fleet in gappy_fleet()) {
        let Ok(once) = align_to_grid(&fleet, 60) else { return Ok(()) };
        prop_assert!(once.is_grid_aligned());
        let twice = align_to_grid(&once, 60).unwrap();
        for (a, b) in once.series().iter().zip(twice.series()) {
            prop_assert_eq!(a.start_time(), b.start_time());
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn align_keeps_observations_on_the_grid(fleet in gappy_fleet()) {
        let Ok(aligned) = align_to_grid(&fleet, 60) else { return Ok(()) };
        for (input, output) in fleet.series().iter().zip(aligned.series()) {
            for (t, v) in input.observations() {
                let offset = t - output.start_time();
                if offset >= 0 && offset % 60 == 0 && t <= output.end_time() {
                    prop_assert_eq!(output.values()[(offset / 60) as usize].to_bits(), v.to_bits());
                }
            }
        }
    }

    #[test]
    fn fill_never_touches_present_samples(series in gappy_series(0)) {
        let Ok(filled) = fill_missing(&series, 5) else { return Ok(()) };
        prop_assert!(filled.is_complete());
        prop_assert_eq!(filled.len(), series.len());
        for i in 0..series.len() {
            if let Some(v) = series.sample(i) {
                prop_assert_eq!(filled.values()[i].to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn nested_slices_compose(
        fleet in aligned_fleet(),
        a in 0usize..1000, b in 0usize..1000, c in 0usize..1000, d in 0usize..1000,
    ) {
        let len = fleet.series_len().unwrap();
        let l1 = 2 + a % (len - 1);
        let o1 = b % (len - l1 + 1);
        let l2 = 2 + c % (l1 - 1);
        let o2 = d % (l1 - l2 + 1);
        let w1 = WindowSpec::new(o1 as i64 * 60, l1);
        let w2 = WindowSpec::new(o2 as i64 * 60, l2);
        let nested = slice_window(&slice_window(&fleet, w1).unwrap(), w2).unwrap();
        let direct = slice_window(&fleet, w1.compose(w2)).unwrap();
        prop_assert_eq!(nested, direct);
    }

    #[test]
    fn znormalize_is_idempotent(values in prop::collection::vec(-50.0f64..50.0, 2..60)) {
        let series = PanelSeries::new("p", 0, 60, values).unwrap();
        let Ok(once) = znormalize(&series) else { return Ok(()) };
        let twice = znormalize(&once).unwrap();
        for (x, y) in once.values().iter().zip(twice.values()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn trim_dark_is_idempotent(fleet in aligned_fleet(), threshold in 0.0f64..12.0) {
        let Ok(once) = trim_dark(&fleet, threshold) else { return Ok(()) };
        prop_assert_eq!(trim_dark(&once, threshold).unwrap(), once);
    }
}

#[test]
fn synthetic_fleet_survives_csv_round_trip() {
    let (fleet, _) = generate_fleet(6, &broken_glass_profiles(6, 2, 0.75), &DayModel::default(), 3).unwrap();
    let mut bytes = Vec::new();
    write_csv(&fleet, &mut bytes).unwrap();
    let back = read_csv(&bytes[..], "mem.csv").unwrap();
    assert!(back.is_grid_aligned());
    assert_eq!(back, fleet);
}

#[test]
fn uneven_steps_leave_a_gap_to_fill() {
    let csv = "timestamp,panel_id,current_a\n0,A,1.0\n60,A,2.0\n180,A,4.0\n";
    let fleet = read_csv(csv.as_bytes(), "mem.csv").unwrap();
    assert!(!fleet.is_grid_aligned());
    let series = &fleet.series()[0];
    assert_eq!(series.len(), 4);
    assert_eq!(series.sample(2), None);
    let filled = fill_missing(series, 5).unwrap();
    assert_eq!(filled.values(), &[1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn intersection_of_extents() {
    let a = PanelSeries::new("a", 0, 60, (0..11).map(f64::from).collect()).unwrap();
    let b = PanelSeries::new("b", 120, 60, (0..11).map(f64::from).collect()).unwrap();
    let aligned = align_to_grid(&Fleet::new(vec![a, b]).unwrap(), 60).unwrap();
    for s in aligned.series() {
        assert_eq!((s.start_time(), s.end_time()), (120, 600));
    }
}

#[test]
fn ingest_reads_files_and_names_missing_ones() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fleet.csv");
    std::fs::write(
        &path,
        "panel_id,timestamp,current_a\nA,2021-06-21T12:00:00Z,1.5\nB,2021-06-21T12:00:00Z,2.5\n\
         A,2021-06-21T12:01:00Z,-0.05\nB,2021-06-21T12:01:00Z,2.0\n",
    )
    .unwrap();
    let fleet = pvdtw::ingest_csv(&path).unwrap();
    assert!(fleet.is_grid_aligned());
    assert_eq!(fleet.get("A").unwrap().values(), &[1.5, 0.0]);
    assert_eq!(fleet.get("B").unwrap().start_time(), 1_624_276_800);

    let missing = dir.path().join("nope.csv");
    let err = pvdtw::ingest_csv(&missing).unwrap_err().to_string();
    assert!(err.contains("nope.csv"), "{err}");
}
