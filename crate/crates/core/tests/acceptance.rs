//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{planted_fixture, separable_corpus};
use ssom::classify::*;
use ssom::evaluate::*;
use ssom::exposure::*;
use ssom::grid::{bin_posts, cell_key, CellKey, GridField, Precision};
use ssom::ingest::{BoundaryPolygon, BoundarySet, GeoPost, MobilityTrace};
use ssom::partition::*;
use ssom::Label;

const TAU: u32 = 3;
const T_MAX: u32 = 50;
const SEED: u64 = 42;
const MAX_RUNTIME: Duration = Duration::from_secs(60);
const MIN_RECOVERY_C2: f64 = 0.85;
const MIN_C2_AT_25: f64 = 0.90;
const INVERSION_SLACK: f64 = 0.01;
const VARIANCE_RATIO: f64 = 0.5;
const GRADIENT_TOL: f64 = 1e-4;
const MIN_F1: f64 = 0.95;
const EXPOSURE_TOL: f64 = 1e-12;

type Outcome = (bool, String);

struct Fixture {
    field: GridField,
    truth: Partition,
    params: SsomParams,
    full: Partition,
    elapsed: Duration,
}

fn fixture() -> Fixture {
    let (field, truth) = planted_fixture();
    let params = SsomParams {
        tau: TAU,
        t_max: T_MAX,
        seed: SEED,
        ..Default::default()
    };
    let start = Instant::now();
    let full = run_ssom(&field, &params).expect("fixture partition");
    let elapsed = start.elapsed();
    Fixture {
        field,
        truth,
        params,
        full,
        elapsed,
    }
}

fn validity(fx: &Fixture) -> Outcome {
    let contiguity = check_contiguity(&fx.full, TAU);
    let exhaustive = fx.full.covers_exactly(&fx.field);
    let members = fx.full.members();
    let assigned: usize = members.values().map(Vec::len).sum();
    let exclusive = assigned == fx.full.len() && members.values().all(|m| !m.is_empty());
    let ok = contiguity.ok && exhaustive && exclusive && fx.elapsed < MAX_RUNTIME;
    (
        ok,
        format!(
            "{} clusters, non-contiguous {:?}, exhaustive {exhaustive}, exclusive {exclusive}, {:.2}s",
            fx.full.cluster_count(),
            contiguity.offending,
            fx.elapsed.as_secs_f64()
        ),
    )
}

fn recovery(fx: &Fixture) -> Outcome {
    let c2 = c2_similarity(&fx.full, &fx.truth).unwrap();
    (
        c2 >= MIN_RECOVERY_C2,
        format!("c2 {c2:.4} (need >= {MIN_RECOVERY_C2})"),
    )
}

fn missing_posts(fx: &Fixture) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for f in [0.25, 0.5, 0.75] {
        let sub = subsample_field(&fx.field, f, SubsampleMode::RatioPreserving, SEED).unwrap();
        let p = run_ssom(&sub, &fx.params).unwrap();
        let c2 = c2_similarity(&p, &fx.full).unwrap();
        ok &= c2 == 1.0;
        parts.push(format!("{f}: {c2}"));
    }
    (ok, format!("c2 vs full data {}", parts.join(", ")))
}

fn missing_grids(cells: &HoldoutReport) -> Outcome {
    let means: Vec<f64> = cells
        .c2
        .iter()
        .filter(|r| r.fraction >= 0.25)
        .map(|r| r.mean)
        .collect();
    let rises: Vec<f64> = means
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .collect();
    let monotone = rises.is_empty() || (rises.len() == 1 && rises[0] <= INVERSION_SLACK);
    let ok = means[0] >= MIN_C2_AT_25 && monotone;
    (ok, format!("mean c2 at 25/50/75% {means:.4?}"))
}

fn mspe_trend(fx: &Fixture, cells: &HoldoutReport) -> Outcome {
    let means: Vec<f64> = cells.mspe.iter().map(|r| r.mean).collect();
    let non_decreasing = means.windows(2).all(|w| w[1] >= w[0]);
    let plan = HoldoutPlan::posts(&[0.25, 0.5, 0.75], SubsampleMode::RatioPreserving, 10, SEED);
    let posts = mspe(&fx.field, &fx.params, &plan).unwrap();
    let posts_zero = posts.iter().all(|r| r.mean == 0.0);
    (
        non_decreasing && posts_zero,
        format!(
            "cell MSPE at 10/25/50/75% [{}]; ratio-preserving post MSPE {:?}",
            means
                .iter()
                .map(|m| format!("{m:.3e}"))
                .collect::<Vec<_>>()
                .join(", "),
            posts.iter().map(|r| r.mean).collect::<Vec<_>>()
        ),
    )
}

/// Four rectangles split at row 20 and column 40 instead of the planted 30/30.
fn misaligned_boundary(field: &GridField) -> BoundarySet {
    let rows: Vec<i64> = field.keys().map(|k| k.lat_q).collect();
    let cols: Vec<i64> = field.keys().map(|k| k.lon_q).collect();
    let (r0, r1) = (*rows.iter().min().unwrap(), *rows.iter().max().unwrap());
    let (c0, c1) = (*cols.iter().min().unwrap(), *cols.iter().max().unwrap());
    let step = field.precision().step();
    let edge = |q: f64| q * step;
    let lat = [
        edge(r0 as f64 - 0.5),
        edge(r0 as f64 + 19.5),
        edge(r1 as f64 + 0.5),
    ];
    let lon = [
        edge(c0 as f64 - 0.5),
        edge(c0 as f64 + 39.5),
        edge(c1 as f64 + 0.5),
    ];
    let mut polygons = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            polygons.push(BoundaryPolygon::rectangle(
                format!("zone-{i}{j}"),
                lat[i],
                lon[j],
                lat[i + 1],
                lon[j + 1],
            ));
        }
    }
    BoundarySet::new(polygons)
}

fn variance(fx: &Fixture) -> Outcome {
    let baseline = polygon_partition(&fx.field, &misaligned_boundary(&fx.field)).unwrap();
    let ours = cluster_variance(&fx.full, &fx.field).mean.unwrap_or(0.0);
    let theirs = cluster_variance(&baseline.partition, &fx.field)
        .mean
        .unwrap();
    (
        ours <= VARIANCE_RATIO * theirs,
        format!(
            "SS-SOM mean s² {ours:.3e}, polygon baseline {theirs:.3e} ({} polygons, {} uncovered)",
            baseline.partition.cluster_count(),
            baseline.uncovered
        ),
    )
}

fn c2_oracle() -> Outcome {
    let d = Precision::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = rng.gen_range(2..=200);
        let (ka, kb) = (rng.gen_range(1..=15u32), rng.gen_range(1..=15u32));
        let a: Vec<u32> = (0..n).map(|_| rng.gen_range(0..ka)).collect();
        let b: Vec<u32> = (0..n).map(|_| rng.gen_range(0..kb)).collect();
        let build = |labels: &[u32]| {
            let assignment: BTreeMap<CellKey, ClusterId> = labels
                .iter()
                .enumerate()
                .map(|(i, c)| (CellKey::new(i as i64 / 20, i as i64 % 20, d), *c))
                .collect();
            Partition::from_assignment(d, assignment, PartitionMethod::Loaded)
        };
        let (mut agree, mut pairs) = (0u128, 0u128);
        for i in 0..n {
            for j in i + 1..n {
                pairs += 1;
                agree += u128::from((a[i] == a[j]) == (b[i] == b[j]));
            }
        }
        let c = c2_counts(&build(&a), &build(&b)).unwrap();
        let exact_ratio =
            c2_similarity(&build(&a), &build(&b)).unwrap() == agree as f64 / pairs as f64;
        if (c.agree, c.pairs) != (agree, pairs) || !exact_ratio {
            mismatches += 1;
        }
    }
    (
        mismatches == 0,
        format!("{mismatches} mismatches in 50 pairs"),
    )
}

fn gradient_error() -> f64 {
    let corpus = separable_corpus(12, 5);
    let mut model = train_embedding(
        &corpus,
        &EmbeddingParams {
            dim: 8,
            epochs: 2,
            min_freq: 1,
            ..Default::default()
        },
    )
    .unwrap();
    let docs: Vec<EncodedDoc> = corpus.iter().map(|(t, l)| model.encode(t, *l)).collect();
    let grad = model.gradient(&docs);
    let base = model.params_flat();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        model.set_params_flat(&p);
        let up = model.loss(&docs);
        p[i] = base[i] - h;
        model.set_params_flat(&p);
        let down = model.loss(&docs);
        let numeric = (up - down) / (2.0 * h);
        let denom = numeric.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max((numeric - grad[i]).abs() / denom);
    }
    worst
}

fn f1(model: &dyn Classifier, corpus: &[(String, Label)]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for (t, l) in corpus {
        match (model.classify(t, 0.5).is_positive(), l.is_positive()) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
    }
    2.0 * tp / (2.0 * tp + fp + fn_)
}

fn classifier() -> Outcome {
    let grad = gradient_error();
    let train = separable_corpus(400, 1);
    let test = separable_corpus(400, 2);
    let embedding = train_embedding(&train, &EmbeddingParams::default()).unwrap();
    let linear = train_linear(&train, &LinearParams::default()).unwrap();
    let (fe, fl) = (f1(&embedding, &test), f1(&linear, &test));
    let texts: Vec<&str> = test.iter().map(|(t, _)| t.as_str()).collect();
    let mut counts_ok = true;
    for n in [1, 37, 400] {
        let got = select_edge_cases(&embedding, &texts[..n], 0.05)
            .unwrap()
            .len();
        counts_ok &= got == (0.05 * n as f64).ceil() as usize;
    }
    let ok = grad < GRADIENT_TOL && fe >= MIN_F1 && fl >= MIN_F1 && counts_ok;
    (
        ok,
        format!("gradient rel err {grad:.2e}, held-out F1 embedding {fe:.3} linear {fl:.3}, edge-case counts ok {counts_ok}"),
    )
}

fn exposure() -> Outcome {
    let d = Precision::new(3).unwrap();
    let k = |i: i64| CellKey::new(i, 0, d);
    let field = GridField::from_counts(
        d,
        [(100, 2), (100, 0), (100, 4), (100, 2), (100, 10)]
            .iter()
            .enumerate()
            .map(|(i, &(t, p))| (k(i as i64), t, p)),
    )
    .unwrap();
    let part = |labels: &[ClusterId]| {
        let a = labels
            .iter()
            .enumerate()
            .map(|(i, c)| (k(i as i64), *c))
            .collect();
        Partition::new(a, &field, PartitionMethod::Loaded).unwrap()
    };
    let trace = |id: &str, v: &[(i64, u64)]| {
        MobilityTrace::new(id, v.iter().map(|&(i, n)| (k(i), n)).collect()).unwrap()
    };
    let a = part(&[0, 1, 2, 3, 4]);
    let b = part(&[0, 0, 2, 2, 4]);

    let mut errs = Vec::new();
    errs.push(
        exposure_difference(&trace("a", &[(0, 10)]), &a, &b, &field)
            .unwrap()
            .exposure
            - 0.5,
    );
    errs.push(
        exposure_difference(&trace("b", &[(0, 6), (2, 4)]), &a, &b, &field)
            .unwrap()
            .exposure
            - 0.4,
    );
    let cohort = cohort_exposure(
        &[trace("x", &[(0, 2), (4, 3)]), trace("y", &[(0, 4), (4, 1)])],
        &a,
        &b,
        &field,
    )
    .unwrap();
    errs.push(cohort.mean - 0.3);
    errs.push(cohort.sd - 0.02f64.sqrt());
    let hand_ok = errs.iter().all(|e| e.abs() <= EXPOSURE_TOL);

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let relabeled = part(&[7, 3, 9, 1, 5]);
    let mut nonzero = 0;
    for i in 0..100 {
        let visits: Vec<(i64, u64)> = (0..rng.gen_range(1..6))
            .map(|_| (rng.gen_range(0..5), rng.gen_range(1..40)))
            .collect();
        let e =
            exposure_difference(&trace(&format!("r{i}"), &visits), &a, &relabeled, &field).unwrap();
        if e.exposure != 0.0 {
            nonzero += 1;
        }
    }
    (
        hand_ok && nonzero == 0,
        format!(
            "max hand-example error {:.1e}, nonzero E for identical prevalences {nonzero}/100",
            errs.iter().fold(0.0f64, |m, e| m.max(e.abs()))
        ),
    )
}

fn grid_arithmetic() -> Outcome {
    let (lat0, lat1, lon0, lon1) = (40.496044, 40.915256, -74.255735, -73.700272);
    let n = 200;
    let mut posts = Vec::new();
    for i in 0..=n {
        for j in 0..=n {
            posts.push(GeoPost {
                id: format!("{i}-{j}"),
                user_id: None,
                lat: lat0 + (lat1 - lat0) * i as f64 / n as f64,
                lon: lon0 + (lon1 - lon0) * j as f64 / n as f64,
                timestamp: Default::default(),
                text: String::new(),
                label: Some(Label::Negative),
                score: None,
            });
        }
    }
    let d1 = Precision::new(1).unwrap();
    let cells = bin_posts(&posts, d1, None).unwrap().len();
    let key = cell_key(40.8347008, -73.9228741, d1);
    let (clat, clon) = key.center();
    let bits = clat.to_bits() == 40.8f64.to_bits() && clon.to_bits() == (-73.9f64).to_bits();
    let ok = cells == 35 && (key.lat_q, key.lon_q) == (408, -739) && bits;
    (
        ok,
        format!("{cells} cells at d=1; example -> ({clat}, {clon})"),
    )
}

fn main() -> ExitCode {
    let fx = fixture();
    let plan = HoldoutPlan::cells(&[0.1, 0.25, 0.5, 0.75], 10, SEED);
    let cells = holdout_evaluation(&fx.field, &fx.params, &plan).expect("cell holdout");
    let results = [
        ("partition validity", validity(&fx)),
        ("planted recovery", recovery(&fx)),
        ("missing-post invariance", missing_posts(&fx)),
        ("missing-grid robustness", missing_grids(&cells)),
        ("MSPE trend", mspe_trend(&fx, &cells)),
        ("variance vs polygons", variance(&fx)),
        ("c2 oracle", c2_oracle()),
        ("classifier", classifier()),
        ("exposure exactness", exposure()),
        ("grid arithmetic", grid_arithmetic()),
    ];
    let mut failed = 0;
    for (i, (name, (ok, detail))) in results.iter().enumerate() {
        println!(
            "criterion {:>2} {}: {name}: {detail}",
            i + 1,
            if *ok { "PASS" } else { "FAIL" }
        );
        failed += usize::from(!ok);
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
