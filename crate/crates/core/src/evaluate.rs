//! Partition quality: pairwise agreement (c2), within-cluster variance,
//! and holdout harnesses for missing cells and missing posts.

use std::collections::{BTreeMap, HashMap};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cell_key, CellCounts, CellKey, GridField, Precision};
use crate::ingest::{GeoPost, Label};
use crate::partition::{run_ssom, ClusterId, Partition, SsomParams};

/// Agreeing pairs out of all unordered cell pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub agree: u128,
    pub pairs: u128,
}

impl PairAgreement {
    pub fn ratio(&self) -> f64 {
        if self.pairs == 0 {
            1.0
        } else {
            self.agree as f64 / self.pairs as f64
        }
    }
}

fn choose2(n: u128) -> u128 {
    n * n.saturating_sub(1) / 2
}

/// Exact pair counts from the contingency table of the two labelings:
/// agreements = C(n,2) + 2·Σ C(n_ij,2) − Σ C(a_i,2) − Σ C(b_j,2).
pub fn c2_counts(a: &Partition, b: &Partition) -> Result<PairAgreement> {
    let sa = a.assignment();
    let sb = b.assignment();
    if sa.len() != sb.len() || !sa.keys().all(|k| sb.contains_key(k)) {
        let diff: Vec<CellKey> = sa
            .keys()
            .filter(|k| !sb.contains_key(k))
            .chain(sb.keys().filter(|k| !sa.contains_key(k)))
            .copied()
            .collect();
        return Err(Error::CellMismatch(diff));
    }
    let mut joint: HashMap<(ClusterId, ClusterId), u128> = HashMap::new();
    let mut rows: HashMap<ClusterId, u128> = HashMap::new();
    let mut cols: HashMap<ClusterId, u128> = HashMap::new();
    for (k, ca) in sa {
        let cb = sb[k];
        *joint.entry((*ca, cb)).or_default() += 1;
        *rows.entry(*ca).or_default() += 1;
        *cols.entry(cb).or_default() += 1;
    }
    let n = sa.len() as u128;
    let both: u128 = joint.values().map(|&x| choose2(x)).sum();
    let in_a: u128 = rows.values().map(|&x| choose2(x)).sum();
    let in_b: u128 = cols.values().map(|&x| choose2(x)).sum();
    let pairs = choose2(n);
    Ok(PairAgreement {
        agree: pairs + 2 * both - in_a - in_b,
        pairs,
    })
}

/// Fraction of cell pairs that both partitions treat alike (together or apart).
/// Fewer than two cells gives 1.
pub fn c2_similarity(a: &Partition, b: &Partition) -> Result<f64> {
    c2_counts(a, b).map(|c| c.ratio())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    /// Sample variance of cell proportions around the pooled cluster proportion,
    /// for clusters with at least two cells.
    pub per_cluster: BTreeMap<ClusterId, f64>,
    pub singletons: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

pub fn cluster_variance(partition: &Partition, field: &GridField) -> VarianceReport {
    let mut per_cluster = BTreeMap::new();
    let mut singletons = 0;
    for (cluster, cells) in partition.members() {
        let counts: Vec<&CellCounts> = cells.iter().filter_map(|k| field.get(k)).collect();
        if counts.len() < 2 {
            singletons += 1;
            continue;
        }
        let posts: u64 = counts.iter().map(|c| c.total).sum();
        let pos: u64 = counts.iter().map(|c| c.positive).sum();
        let pooled = pos as f64 / posts as f64;
        let ss: f64 = counts
            .iter()
            .map(|c| (c.positive as f64 / c.total as f64 - pooled).powi(2))
            .sum();
        per_cluster.insert(cluster, ss / (counts.len() - 1) as f64);
    }
    // sorted so the mean does not depend on cluster numbering
    let mut vals: Vec<f64> = per_cluster.values().copied().collect();
    vals.sort_by(f64::total_cmp);
    let mean = (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    VarianceReport {
        mean,
        min: vals.iter().copied().reduce(f64::min),
        max: vals.iter().copied().reduce(f64::max),
        per_cluster,
        singletons,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleMode {
    /// Seeded sample without replacement over all posts.
    Uniform,
    /// Per cell keep round(f·total) posts and round(f·positive) positives.
    #[default]
    RatioPreserving,
}

fn round_count(fraction: f64, n: u64) -> u64 {
    (fraction * n as f64).round() as u64
}

/// Keeps a `fraction` of posts. Ratio-preserving mode groups by cell at `d`
/// and keeps the earliest posts of each class; unlabeled posts count as negative.
pub fn subsample_posts(
    posts: &[GeoPost],
    fraction: f64,
    mode: SubsampleMode,
    d: Precision,
    seed: u64,
) -> Result<Vec<GeoPost>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Invalid(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    if fraction == 1.0 {
        return Ok(posts.to_vec());
    }
    match mode {
        SubsampleMode::Uniform => {
            let keep = round_count(fraction, posts.len() as u64) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = index::sample(&mut rng, posts.len(), keep).into_vec();
            picked.sort_unstable();
            Ok(picked.into_iter().map(|i| posts[i].clone()).collect())
        }
        SubsampleMode::RatioPreserving => {
            let mut cells: BTreeMap<CellKey, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
            for (i, p) in posts.iter().enumerate() {
                let e = cells.entry(cell_key(p.lat, p.lon, d)).or_default();
                if p.label == Some(Label::Positive) {
                    e.0.push(i);
                } else {
                    e.1.push(i);
                }
            }
            let mut keep = vec![false; posts.len()];
            for (pos, neg) in cells.values() {
                let total = (pos.len() + neg.len()) as u64;
                let k = round_count(fraction, total);
                let kp = round_count(fraction, pos.len() as u64).min(k);
                let kn = (k - kp).min(neg.len() as u64);
                for &i in pos
                    .iter()
                    .take(kp as usize)
                    .chain(neg.iter().take(kn as usize))
                {
                    keep[i] = true;
                }
            }
            Ok(posts
                .iter()
                .zip(keep)
                .filter(|&(_, k)| k)
                .map(|(p, _)| p.clone())
                .collect())
        }
    }
}

/// Field-level counterpart of [`subsample_posts`]; cells left without posts are dropped.
pub fn subsample_field(
    field: &GridField,
    fraction: f64,
    mode: SubsampleMode,
    seed: u64,
) -> Result<GridField> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Invalid(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    let d = field.precision();
    let kept: Vec<(CellKey, u64, u64)> = match mode {
        SubsampleMode::RatioPreserving => field
            .iter()
            .map(|(k, c)| {
                let t = round_count(fraction, c.total);
                let p = round_count(fraction, c.positive).min(t);
                let n = (t - p).min(c.total - c.positive);
                (*k, p + n, p)
            })
            .collect(),
        SubsampleMode::Uniform => {
            // one slot per post: (cell index, positive)
            let keys: Vec<CellKey> = field.keys().copied().collect();
            let mut slots = Vec::with_capacity(field.total_posts() as usize);
            for (i, (_, c)) in field.iter().enumerate() {
                slots.extend((0..c.total).map(|j| (i, j < c.positive)));
            }
            let keep = round_count(fraction, slots.len() as u64) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut counts = vec![(0u64, 0u64); keys.len()];
            for s in index::sample(&mut rng, slots.len(), keep) {
                let (i, pos) = slots[s];
                counts[i].0 += 1;
                counts[i].1 += pos as u64;
            }
            keys.into_iter()
                .zip(counts)
                .map(|(k, (t, p))| (k, t, p))
                .collect()
        }
    };
    GridField::from_counts(d, kept.into_iter().filter(|(_, t, _)| *t > 0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "mode")]
pub enum HoldoutKind {
    /// Remove whole cells.
    Cells,
    /// Remove posts within cells.
    Posts(SubsampleMode),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutPlan {
    pub kind: HoldoutKind,
    /// Held-out fractions. Zero is accepted as the no-holdout baseline.
    pub fractions: Vec<f64>,
    pub k: usize,
    pub seed: u64,
}

impl HoldoutPlan {
    pub fn cells(fractions: &[f64], k: usize, seed: u64) -> Self {
        HoldoutPlan {
            kind: HoldoutKind::Cells,
            fractions: fractions.to_vec(),
            k,
            seed,
        }
    }

    pub fn posts(fractions: &[f64], mode: SubsampleMode, k: usize, seed: u64) -> Self {
        HoldoutPlan {
            kind: HoldoutKind::Posts(mode),
            fractions: fractions.to_vec(),
            k,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Invalid(format!("need k >= 2 folds, got {}", self.k)));
        }
        if self.fractions.is_empty() {
            return Err(Error::Invalid("no holdout fractions".into()));
        }
        if let Some(f) = self.fractions.iter().find(|f| !(**f >= 0.0 && **f < 1.0)) {
            return Err(Error::Invalid(format!(
                "holdout fraction {f} outside [0, 1)"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub fraction: f64,
    pub per_fold: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; zero for a single fold.
    pub sd: f64,
}

impl EvalReport {
    pub fn new(metric: &str, fraction: f64, per_fold: Vec<f64>) -> Self {
        let n = per_fold.len() as f64;
        let mean = if per_fold.is_empty() {
            0.0
        } else {
            per_fold.iter().sum::<f64>() / n
        };
        let sd = if per_fold.len() < 2 {
            0.0
        } else {
            (per_fold.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        EvalReport {
            metric: metric.to_string(),
            fraction,
            per_fold,
            mean,
            sd,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub mspe: Vec<EvalReport>,
    pub c2: Vec<EvalReport>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fold_seed(seed: u64, fraction: f64, fold: usize) -> u64 {
    splitmix(seed ^ splitmix(fraction.to_bits() ^ splitmix(fold as u64)))
}

/// Majority cluster among the retained cells nearest to `key` (Chebyshev);
/// equal votes go to the smaller cluster id.
fn nearest_cluster(key: &CellKey, reduced: &Partition) -> ClusterId {
    let mut best_d = u64::MAX;
    let mut votes: BTreeMap<ClusterId, usize> = BTreeMap::new();
    for (k, &c) in reduced.assignment() {
        let d = key.chebyshev(k);
        if d < best_d {
            best_d = d;
            votes.clear();
        }
        if d == best_d {
            *votes.entry(c).or_default() += 1;
        }
    }
    votes
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| c)
        .expect("reduced partition is non-empty")
}

struct FoldOutcome {
    mspe: f64,
    c2: f64,
}

fn run_fold(
    field: &GridField,
    full: &Partition,
    params: &SsomParams,
    kind: HoldoutKind,
    fraction: f64,
    seed: u64,
) -> Result<FoldOutcome> {
    let reduced_field = match kind {
        HoldoutKind::Cells => {
            let mut keys: Vec<CellKey> = field.keys().copied().collect();
            let held = round_count(fraction, keys.len() as u64) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            keys.shuffle(&mut rng);
            field.restrict(&keys[held..])
        }
        HoldoutKind::Posts(mode) => {
            if fraction == 0.0 {
                field.clone()
            } else {
                subsample_field(field, 1.0 - fraction, mode, seed)?
            }
        }
    };
    if reduced_field.len() < 2 {
        return Err(Error::Invalid(format!(
            "holdout fraction {fraction} leaves {} cell(s); need at least 2",
            reduced_field.len()
        )));
    }
    let reduced = run_ssom(&reduced_field, params)?;
    let mut sq = 0.0;
    let mut scored = 0usize;
    for (key, full_cluster) in full.assignment() {
        let evaluated = match kind {
            HoldoutKind::Cells => !reduced_field.contains(key),
            HoldoutKind::Posts(_) => true,
        };
        if !evaluated {
            continue;
        }
        let rc = reduced
            .cluster_of(key)
            .unwrap_or_else(|| nearest_cluster(key, &reduced));
        let g = full.prevalence(*full_cluster).unwrap_or(0.0);
        let g_hat = reduced.prevalence(rc).unwrap_or(0.0);
        sq += (g - g_hat).powi(2);
        scored += 1;
    }
    let mspe = if scored == 0 { 0.0 } else { sq / scored as f64 };
    let c2 = c2_similarity(&full.restrict(reduced_field.keys()), &reduced)?;
    Ok(FoldOutcome { mspe, c2 })
}

#[cfg(feature = "parallel")]
fn map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..n).map(f).collect()
}

/// Runs every (fraction, fold) of `plan` against the full-data partition.
/// Folds run in parallel; results are ordered by fraction then fold index.
pub fn holdout_evaluation(
    field: &GridField,
    params: &SsomParams,
    plan: &HoldoutPlan,
) -> Result<HoldoutReport> {
    plan.validate()?;
    let full = run_ssom(field, params)?;
    holdout_against(field, &full, params, plan)
}

/// As [`holdout_evaluation`] with a precomputed full-data partition.
pub fn holdout_against(
    field: &GridField,
    full: &Partition,
    params: &SsomParams,
    plan: &HoldoutPlan,
) -> Result<HoldoutReport> {
    plan.validate()?;
    let jobs: Vec<(f64, usize)> = plan
        .fractions
        .iter()
        .flat_map(|&f| (0..plan.k).map(move |i| (f, i)))
        .collect();
    let outcomes = map_indexed(jobs.len(), |j| {
        let (fraction, fold) = jobs[j];
        run_fold(
            field,
            full,
            params,
            plan.kind,
            fraction,
            fold_seed(plan.seed, fraction, fold),
        )
    })?;
    let mut mspe = Vec::new();
    let mut c2 = Vec::new();
    for (fi, &fraction) in plan.fractions.iter().enumerate() {
        let chunk = &outcomes[fi * plan.k..(fi + 1) * plan.k];
        mspe.push(EvalReport::new(
            "mspe",
            fraction,
            chunk.iter().map(|o| o.mspe).collect(),
        ));
        c2.push(EvalReport::new(
            "c2",
            fraction,
            chunk.iter().map(|o| o.c2).collect(),
        ));
    }
    Ok(HoldoutReport { mspe, c2 })
}

/// Mean squared prevalence error between the full-data and holdout partitions.
pub fn mspe(field: &GridField, params: &SsomParams, plan: &HoldoutPlan) -> Result<Vec<EvalReport>> {
    holdout_evaluation(field, params, plan).map(|r| r.mspe)
}

/// c2 between the full-data partition (restricted to retained cells) and the holdout partition.
pub fn grid_robustness(
    field: &GridField,
    params: &SsomParams,
    plan: &HoldoutPlan,
) -> Result<Vec<EvalReport>> {
    holdout_evaluation(field, params, plan).map(|r| r.c2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::test_post;
    use crate::partition::PartitionMethod;

    fn d() -> Precision {
        Precision::new(3).unwrap()
    }

    fn part(labels: &[ClusterId]) -> Partition {
        let assignment = labels
            .iter()
            .enumerate()
            .map(|(i, c)| (CellKey::new(i as i64, 0, d()), *c))
            .collect();
        Partition::from_assignment(d(), assignment, PartitionMethod::Loaded)
    }

    #[test]
    fn c2_examples() {
        let y = part(&[0, 0, 1]);
        assert_eq!(c2_similarity(&y, &y).unwrap(), 1.0);
        let c = c2_counts(&y, &part(&[0, 1, 2])).unwrap();
        assert_eq!((c.agree, c.pairs), (2, 3));
        assert_eq!(c2_similarity(&part(&[0, 0]), &part(&[0, 1])).unwrap(), 0.0);
        assert_eq!(c2_similarity(&part(&[4]), &part(&[9])).unwrap(), 1.0);
    }

    #[test]
    fn c2_rejects_different_cell_sets() {
        let a = part(&[0, 0, 1]);
        let b = part(&[0, 0]);
        match c2_similarity(&a, &b) {
            Err(Error::CellMismatch(diff)) => assert_eq!(diff, vec![CellKey::new(2, 0, d())]),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn field_of(cells: &[(u64, u64)]) -> GridField {
        GridField::from_counts(
            d(),
            cells
                .iter()
                .enumerate()
                .map(|(i, &(t, p))| (CellKey::new(i as i64, 0, d()), t, p)),
        )
        .unwrap()
    }

    #[test]
    fn variance_examples() {
        let f = field_of(&[(10, 2), (20, 4), (5, 1)]);
        let r = cluster_variance(&part(&[0, 0, 0]), &f);
        assert_eq!(r.per_cluster[&0], 0.0);

        let f = field_of(&[(100, 10), (100, 20), (100, 30), (7, 7)]);
        let r = cluster_variance(&part(&[0, 0, 0, 1]), &f);
        assert!((r.per_cluster[&0] - 0.01).abs() < 1e-15);
        assert_eq!(r.singletons, 1);
        assert_eq!(r.mean, Some(r.per_cluster[&0]));
    }

    #[test]
    fn variance_ignores_cluster_ids() {
        let f = field_of(&[(10, 1), (10, 5), (10, 9), (10, 2)]);
        let a = cluster_variance(&part(&[0, 0, 1, 1]), &f);
        let b = cluster_variance(&part(&[7, 7, 3, 3]), &f);
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.min, b.min);
    }

    #[test]
    fn ratio_preserving_subsample_rounds_half_up() {
        let posts: Vec<GeoPost> = (0..10)
            .map(|i| test_post(&format!("p{i}"), 1.0, 1.0, i % 3 == 0 && i < 9))
            .collect();
        assert_eq!(
            posts
                .iter()
                .filter(|p| p.label == Some(Label::Positive))
                .count(),
            3
        );
        let s = subsample_posts(&posts, 0.5, SubsampleMode::RatioPreserving, d(), 1).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(
            s.iter()
                .filter(|p| p.label == Some(Label::Positive))
                .count(),
            2
        );
        assert_eq!(
            subsample_posts(&posts, 1.0, SubsampleMode::Uniform, d(), 1).unwrap(),
            posts
        );
    }

    #[test]
    fn uniform_subsample_is_seeded() {
        let posts: Vec<GeoPost> = (0..50)
            .map(|i| test_post(&format!("p{i}"), 1.0, 1.0, i < 10))
            .collect();
        let a = subsample_posts(&posts, 0.3, SubsampleMode::Uniform, d(), 9).unwrap();
        let b = subsample_posts(&posts, 0.3, SubsampleMode::Uniform, d(), 9).unwrap();
        assert_eq!(a.len(), 15);
        assert_eq!(a, b);
        assert!(subsample_posts(&posts, 0.0, SubsampleMode::Uniform, d(), 9).is_err());
    }

    #[test]
    fn field_subsample_matches_post_subsample() {
        let mut posts = Vec::new();
        for cell in 0..6 {
            for i in 0..(7 + cell * 3) {
                posts.push(test_post(
                    &format!("c{cell}-{i}"),
                    cell as f64 * 0.01,
                    0.0,
                    i % (cell + 2) == 0,
                ));
            }
        }
        let full = crate::grid::bin_posts(&posts, d(), None).unwrap();
        for f in [0.25, 0.5, 0.75] {
            let sp = subsample_posts(&posts, f, SubsampleMode::RatioPreserving, d(), 0).unwrap();
            let a = crate::grid::bin_posts(&sp, d(), None).unwrap();
            let b = subsample_field(&full, f, SubsampleMode::RatioPreserving, 0).unwrap();
            assert_eq!(a, b);
        }
        let u = subsample_field(&full, 0.5, SubsampleMode::Uniform, 3).unwrap();
        assert_eq!(
            u.total_posts(),
            (full.total_posts() as f64 * 0.5).round() as u64
        );
    }

    #[test]
    fn report_statistics() {
        let r = EvalReport::new("x", 0.1, vec![0.2, 0.4]);
        assert!((r.mean - 0.3).abs() < 1e-15);
        assert!((r.sd - 0.1414213562373095).abs() < 1e-12);
        assert_eq!(EvalReport::new("x", 0.1, vec![0.5]).sd, 0.0);
    }

    fn blocks(rows: i64, cols: i64) -> GridField {
        GridField::from_counts(
            d(),
            (0..rows).flat_map(|r| {
                (0..cols).map(move |c| {
                    (
                        CellKey::new(r, c, d()),
                        100,
                        if c < cols / 2 { 5 } else { 40 },
                    )
                })
            }),
        )
        .unwrap()
    }

    #[test]
    fn zero_holdout_is_exact_and_small_fields_error() {
        let f = blocks(6, 6);
        let params = SsomParams {
            t_max: 5,
            ..Default::default()
        };
        let r = holdout_evaluation(&f, &params, &HoldoutPlan::cells(&[0.0], 2, 1)).unwrap();
        assert_eq!(r.mspe[0].mean, 0.0);
        assert_eq!(r.c2[0].mean, 1.0);

        let tiny = field_of(&[(5, 1), (5, 2)]);
        assert!(mspe(&tiny, &params, &HoldoutPlan::cells(&[0.5], 2, 1)).is_err());
        assert!(HoldoutPlan::cells(&[0.5], 1, 0).validate().is_err());
        assert!(HoldoutPlan::cells(&[1.0], 2, 0).validate().is_err());
    }

    #[test]
    fn ratio_preserving_post_holdout_has_zero_mspe() {
        let f = blocks(8, 8);
        let params = SsomParams {
            t_max: 8,
            seed: 4,
            ..Default::default()
        };
        let plan = HoldoutPlan::posts(&[0.2, 0.6], SubsampleMode::RatioPreserving, 2, 3);
        let r = holdout_evaluation(&f, &params, &plan).unwrap();
        for rep in &r.mspe {
            assert_eq!(rep.mean, 0.0);
        }
        for rep in &r.c2 {
            assert_eq!(rep.mean, 1.0);
        }
    }

    #[test]
    fn holdout_is_deterministic() {
        let f = blocks(8, 8);
        let params = SsomParams {
            t_max: 6,
            ..Default::default()
        };
        let plan = HoldoutPlan::cells(&[0.25, 0.5], 3, 11);
        assert_eq!(
            holdout_evaluation(&f, &params, &plan).unwrap(),
            holdout_evaluation(&f, &params, &plan).unwrap()
        );
    }
}
