//! Visit-weighted exposure differences between two partitions, and
//! user-level co-prevalence of two labeled processes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellKey, GridField};
use crate::ingest::{GeoPost, Label, MobilityTrace};
use crate::partition::{ClusterId, Partition};

/// Pooled positives / totals per cluster.
pub fn region_prevalence(partition: &Partition, field: &GridField) -> BTreeMap<ClusterId, f64> {
    let mut sums: BTreeMap<ClusterId, (u64, u64)> = BTreeMap::new();
    for (k, c) in partition.assignment() {
        if let Some(counts) = field.get(k) {
            let e = sums.entry(*c).or_default();
            e.0 += counts.positive;
            e.1 += counts.total;
        }
    }
    sums.into_iter()
        .map(|(c, (p, t))| (c, if t == 0 { 0.0 } else { p as f64 / t as f64 }))
        .collect()
}

/// Per-cell prevalence under both partitions, for the cells both cover.
#[derive(Clone, Debug, PartialEq)]
pub struct PrevalenceTable {
    cells: BTreeMap<CellKey, (f64, f64)>,
}

impl PrevalenceTable {
    pub fn new(a: &Partition, b: &Partition, field: &GridField) -> Result<Self> {
        if a.precision() != field.precision() || b.precision() != field.precision() {
            return Err(Error::Invalid(
                "partitions and field differ in precision".into(),
            ));
        }
        let pa = region_prevalence(a, field);
        let pb = region_prevalence(b, field);
        let cells = a
            .assignment()
            .iter()
            .filter_map(|(k, ca)| {
                let cb = b.cluster_of(k)?;
                Some((*k, (*pa.get(ca)?, *pb.get(&cb)?)))
            })
            .collect();
        Ok(PrevalenceTable { cells })
    }

    pub fn get(&self, key: &CellKey) -> Option<(f64, f64)> {
        self.cells.get(key).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersonExposure {
    pub person_id: String,
    /// In-boundary visits (the denominator).
    pub visits: u64,
    pub skipped_visits: u64,
    pub exposure: f64,
    /// Visited cells whose reference prevalence is zero; they contribute nothing.
    pub flagged_cells: usize,
}

/// E = Σ_k |A(k) − B(k)| / A(k) · V_k / V over visited in-boundary cells,
/// where A, B are the prevalences of the clusters containing k.
pub fn score_trace(trace: &MobilityTrace, table: &PrevalenceTable) -> Result<PersonExposure> {
    let mut visits = 0u64;
    let mut skipped = 0u64;
    let mut flagged = 0usize;
    let mut weighted = 0.0;
    for (key, &count) in &trace.visits {
        match table.get(key) {
            None => skipped += count,
            Some((ea, eb)) => {
                visits += count;
                if ea == 0.0 {
                    flagged += 1;
                } else {
                    weighted += (ea - eb).abs() / ea * count as f64;
                }
            }
        }
    }
    if visits == 0 {
        return Err(Error::Invalid(format!(
            "trace `{}` has no visits inside the partitioned area",
            trace.person_id
        )));
    }
    Ok(PersonExposure {
        person_id: trace.person_id.clone(),
        visits,
        skipped_visits: skipped,
        exposure: weighted / visits as f64,
        flagged_cells: flagged,
    })
}

pub fn exposure_difference(
    trace: &MobilityTrace,
    a: &Partition,
    b: &Partition,
    field: &GridField,
) -> Result<PersonExposure> {
    score_trace(trace, &PrevalenceTable::new(a, b, field)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureReport {
    pub persons: Vec<PersonExposure>,
    /// Traces that could not be scored, with the reason.
    pub invalid: Vec<(String, String)>,
    pub mean: f64,
    /// Sample SD; zero when only one person was scored (see `single`).
    pub sd: f64,
    pub single: bool,
    pub fraction_over_half: f64,
    pub skipped_visits: u64,
    pub flagged_cells: usize,
}

pub fn cohort_exposure(
    traces: &[MobilityTrace],
    a: &Partition,
    b: &Partition,
    field: &GridField,
) -> Result<ExposureReport> {
    let table = PrevalenceTable::new(a, b, field)?;
    let mut persons = Vec::new();
    let mut invalid = Vec::new();
    for t in traces {
        match score_trace(t, &table) {
            Ok(p) => persons.push(p),
            Err(e) => invalid.push((t.person_id.clone(), e.to_string())),
        }
    }
    if persons.is_empty() {
        return Err(Error::Invalid(format!(
            "no valid traces ({} rejected)",
            invalid.len()
        )));
    }
    let n = persons.len() as f64;
    let mean = persons.iter().map(|p| p.exposure).sum::<f64>() / n;
    let sd = if persons.len() < 2 {
        0.0
    } else {
        (persons
            .iter()
            .map(|p| (p.exposure - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    };
    let over = persons.iter().filter(|p| p.exposure > 0.5).count() as f64;
    Ok(ExposureReport {
        mean,
        sd,
        single: persons.len() == 1,
        fraction_over_half: over / n,
        skipped_visits: persons.iter().map(|p| p.skipped_visits).sum(),
        flagged_cells: persons.iter().map(|p| p.flagged_cells).sum(),
        persons,
        invalid,
    })
}

/// Conditional shares of users positive for both processes. `None` when the
/// conditioning set is empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coprevalence {
    pub a_given_b: Option<f64>,
    pub b_given_a: Option<f64>,
    pub users_a: usize,
    pub users_b: usize,
    pub users_both: usize,
}

fn positive_users(posts: &[GeoPost]) -> Result<BTreeSet<&str>> {
    let missing: Vec<String> = posts
        .iter()
        .filter(|p| p.user_id.as_deref().is_none_or(str::is_empty))
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingUser(missing));
    }
    Ok(posts
        .iter()
        .filter(|p| p.label == Some(Label::Positive))
        .filter_map(|p| p.user_id.as_deref())
        .collect())
}

pub fn user_coprevalence(posts_a: &[GeoPost], posts_b: &[GeoPost]) -> Result<Coprevalence> {
    let ua = positive_users(posts_a)?;
    let ub = positive_users(posts_b)?;
    let both = ua.intersection(&ub).count();
    let ratio = |den: usize| (den > 0).then(|| both as f64 / den as f64);
    Ok(Coprevalence {
        a_given_b: ratio(ub.len()),
        b_given_a: ratio(ua.len()),
        users_a: ua.len(),
        users_b: ub.len(),
        users_both: both,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Precision;
    use crate::ingest::test_post;
    use crate::partition::PartitionMethod;

    fn d() -> Precision {
        Precision::new(3).unwrap()
    }

    fn k(i: i64) -> CellKey {
        CellKey::new(i, 0, d())
    }

    fn field(cells: &[(u64, u64)]) -> GridField {
        GridField::from_counts(
            d(),
            cells
                .iter()
                .enumerate()
                .map(|(i, &(t, p))| (k(i as i64), t, p)),
        )
        .unwrap()
    }

    fn part(labels: &[ClusterId], f: &GridField) -> Partition {
        let a = labels
            .iter()
            .enumerate()
            .map(|(i, c)| (k(i as i64), *c))
            .collect();
        Partition::new(a, f, PartitionMethod::Loaded).unwrap()
    }

    fn trace(visits: &[(i64, u64)]) -> MobilityTrace {
        MobilityTrace::new("p", visits.iter().map(|&(i, n)| (k(i), n)).collect()).unwrap()
    }

    #[test]
    fn prevalence_examples() {
        let f = field(&[(10, 3)]);
        assert_eq!(region_prevalence(&part(&[0], &f), &f)[&0], 0.3);
        let f = field(&[(10, 3), (30, 3)]);
        assert_eq!(region_prevalence(&part(&[0, 0], &f), &f)[&0], 0.15);
        let f = field(&[(10, 0), (4, 0)]);
        assert_eq!(region_prevalence(&part(&[0, 0], &f), &f)[&0], 0.0);
    }

    #[test]
    fn one_cell_relative_difference() {
        // A: cell 0 alone at 2/100; B: cells 0+1 pooled at 2/200
        let f = field(&[(100, 2), (100, 0)]);
        let a = part(&[0, 1], &f);
        let b = part(&[0, 0], &f);
        let e = exposure_difference(&trace(&[(0, 10)]), &a, &b, &f).unwrap();
        assert!((e.exposure - 0.5).abs() < 1e-12);
        assert_eq!(e.visits, 10);
    }

    #[test]
    fn two_cells_weighted_by_visits() {
        // relative diffs 0.5 (cell 0) and 0.25 (cell 2): 0.02→0.01, 0.04→0.03
        let f = field(&[(100, 2), (100, 0), (100, 4), (100, 2)]);
        let a = part(&[0, 1, 2, 3], &f);
        let b = part(&[0, 0, 2, 2], &f);
        let e = exposure_difference(&trace(&[(0, 6), (2, 4)]), &a, &b, &f).unwrap();
        assert!((e.exposure - 0.4).abs() < 1e-12);
    }

    #[test]
    fn zero_reference_prevalence_is_flagged() {
        let f = field(&[(10, 0), (10, 5)]);
        let a = part(&[0, 1], &f);
        let b = part(&[0, 0], &f);
        let e = exposure_difference(&trace(&[(0, 3), (1, 1)]), &a, &b, &f).unwrap();
        assert_eq!(e.flagged_cells, 1);
        assert_eq!(e.visits, 4);
        assert!((e.exposure - 0.5 * 1.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn outside_visits_are_skipped_and_all_outside_errors() {
        let f = field(&[(10, 1)]);
        let a = part(&[0], &f);
        let e = exposure_difference(&trace(&[(0, 2), (50, 3)]), &a, &a, &f).unwrap();
        assert_eq!((e.visits, e.skipped_visits, e.exposure), (2, 3, 0.0));
        assert!(exposure_difference(&trace(&[(50, 3)]), &a, &a, &f).is_err());
    }

    #[test]
    fn cohort_statistics() {
        let f = field(&[(100, 2), (100, 0), (100, 4), (100, 2)]);
        let a = part(&[0, 1, 2, 3], &f);
        let b = part(&[0, 0, 2, 2], &f);
        // cell 0 -> 0.5, cell 2 -> 0.25
        let t1 = MobilityTrace::new("x", [(k(0), 2), (k(2), 6)].into_iter().collect()).unwrap();
        let t2 = MobilityTrace::new("y", [(k(0), 6), (k(2), 4)].into_iter().collect()).unwrap();
        let r = cohort_exposure(&[t1.clone(), t2], &a, &b, &f).unwrap();
        // t1 = (1 + 1.5)/8 = 0.3125, t2 = 0.4
        assert!((r.mean - (0.3125 + 0.4) / 2.0).abs() < 1e-12);
        let single = cohort_exposure(&[t1], &a, &b, &f).unwrap();
        assert!(single.single);
        assert_eq!(single.sd, 0.0);
        let outside = MobilityTrace::new("z", [(k(40), 1)].into_iter().collect()).unwrap();
        assert!(cohort_exposure(&[outside], &a, &b, &f).is_err());
    }

    fn user_posts(users: &[&str], positive: bool) -> Vec<GeoPost> {
        users
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let mut p = test_post(&format!("{u}-{i}"), 0.0, 0.0, positive);
                p.user_id = Some(u.to_string());
                p
            })
            .collect()
    }

    #[test]
    fn coprevalence_examples() {
        let a = user_posts(&["u1", "u2"], true);
        let c = user_coprevalence(&a, &a).unwrap();
        assert_eq!((c.a_given_b, c.b_given_a), (Some(1.0), Some(1.0)));

        let b = user_posts(&["u3"], true);
        let c = user_coprevalence(&a, &b).unwrap();
        assert_eq!((c.a_given_b, c.b_given_a), (Some(0.0), Some(0.0)));

        let a = user_posts(&["u1", "u2", "u3", "u4"], true);
        let b = user_posts(&["u1"], true);
        let c = user_coprevalence(&a, &b).unwrap();
        assert_eq!((c.a_given_b, c.b_given_a), (Some(1.0), Some(0.25)));

        let none = user_posts(&["u1"], false);
        assert_eq!(user_coprevalence(&a, &none).unwrap().a_given_b, None);
    }
}
