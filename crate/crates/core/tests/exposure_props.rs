use std::collections::BTreeMap;

use proptest::prelude::*;
use ssom::export::{exposure_from_csv, exposure_to_csv};
use ssom::exposure::*;
use ssom::grid::{CellKey, GridField, Precision};
use ssom::ingest::MobilityTrace;
use ssom::partition::{ClusterId, Partition, PartitionMethod};

fn d() -> Precision {
    Precision::new(3).unwrap()
}

fn k(i: usize) -> CellKey {
    CellKey::new(i as i64 / 8, i as i64 % 8, d())
}

fn field(cells: &[(u64, u64)]) -> GridField {
    GridField::from_counts(
        d(),
        cells
            .iter()
            .enumerate()
            .map(|(i, &(t, p))| (k(i), t, p.min(t))),
    )
    .unwrap()
}

fn part(labels: &[ClusterId], f: &GridField) -> Partition {
    let a = labels.iter().enumerate().map(|(i, c)| (k(i), *c)).collect();
    Partition::new(a, f, PartitionMethod::Loaded).unwrap()
}

fn trace(id: &str, visits: &[(usize, u64)]) -> MobilityTrace {
    let v: BTreeMap<CellKey, u64> = visits.iter().map(|&(i, n)| (k(i), n)).collect();
    MobilityTrace::new(id, v).unwrap()
}

/// Field, two labelings of its cells, and visit lists indexing into it.
type Scenario = (Vec<(u64, u64)>, Vec<u32>, Vec<u32>, Vec<Vec<(usize, u64)>>);

fn scenario() -> impl Strategy<Value = Scenario> {
    (2usize..40).prop_flat_map(|n| {
        (
            proptest::collection::vec((1u64..300, 0u64..300), n),
            proptest::collection::vec(0u32..5, n),
            proptest::collection::vec(0u32..5, n),
            proptest::collection::vec(proptest::collection::vec((0..n, 1u64..50), 1..10), 1..8),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn identical_partitions_give_zero((cells, a, _, traces) in scenario()) {
        let f = field(&cells);
        let p = part(&a, &f);
        for (i, visits) in traces.iter().enumerate() {
            let e = exposure_difference(&trace(&format!("t{i}"), visits), &p, &p, &f).unwrap();
            prop_assert_eq!(e.exposure, 0.0);
        }
    }

    #[test]
    fn scaling_visits_leaves_exposure_unchanged((cells, a, b, traces) in scenario(), m in 2u64..20) {
        let f = field(&cells);
        let (pa, pb) = (part(&a, &f), part(&b, &f));
        for visits in &traces {
            let scaled: Vec<(usize, u64)> = visits.iter().map(|&(i, n)| (i, n * m)).collect();
            let e1 = exposure_difference(&trace("x", visits), &pa, &pb, &f).unwrap();
            let e2 = exposure_difference(&trace("x", &scaled), &pa, &pb, &f).unwrap();
            prop_assert!((e1.exposure - e2.exposure).abs() <= 1e-12 * e1.exposure.max(1.0));
            prop_assert!(e1.exposure >= 0.0);
        }
    }

    #[test]
    fn exported_rows_reproduce_the_cohort_mean((cells, a, b, traces) in scenario()) {
        let f = field(&cells);
        let ts: Vec<MobilityTrace> = traces.iter().enumerate().map(|(i, v)| trace(&format!("p{i}"), v)).collect();
        let r = cohort_exposure(&ts, &part(&a, &f), &part(&b, &f), &f).unwrap();
        let rows = exposure_from_csv(&exposure_to_csv(&r)).unwrap();
        prop_assert_eq!(rows.len(), r.persons.len());
        let mean = rows.iter().map(|p| p.exposure).sum::<f64>() / rows.len() as f64;
        prop_assert!((mean - r.mean).abs() <= 1e-12);
    }
}

#[test]
fn hand_examples() {
    let f = field(&[(100, 2), (100, 0), (100, 4), (100, 2)]);
    let a = part(&[0, 1, 2, 3], &f);
    let b = part(&[0, 0, 2, 2], &f);
    // A = 0.02 vs B = 0.01 at cell 0; 0.04 vs 0.03 at cell 2
    let one = exposure_difference(&trace("a", &[(0, 10)]), &a, &b, &f).unwrap();
    assert!((one.exposure - 0.5).abs() < 1e-12);
    let two = exposure_difference(&trace("b", &[(0, 6), (2, 4)]), &a, &b, &f).unwrap();
    assert!((two.exposure - 0.4).abs() < 1e-12);
}

#[test]
fn cohort_of_two() {
    // cell 0 differs by 0.5 relative, cell 4 not at all
    let f = field(&[(100, 2), (100, 0), (100, 4), (100, 2), (100, 10), (100, 10)]);
    let a = part(&[0, 1, 2, 3, 4, 5], &f);
    let b = part(&[0, 0, 2, 2, 4, 5], &f);
    // cell 4 has no difference; 0.2 = 0.5·2/5, 0.4 = 0.5·4/5
    let t1 = trace("x", &[(0, 2), (4, 3)]);
    let t2 = trace("y", &[(0, 4), (4, 1)]);
    let r = cohort_exposure(&[t1, t2], &a, &b, &f).unwrap();
    assert!((r.persons[0].exposure - 0.2).abs() < 1e-12);
    assert!((r.persons[1].exposure - 0.4).abs() < 1e-12);
    assert!((r.mean - 0.3).abs() < 1e-12);
    assert!((r.sd - 0.1414213562373095).abs() < 1e-12);
    assert_eq!(r.fraction_over_half, 0.0);
}
