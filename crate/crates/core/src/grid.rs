//! Decimal-precision grid cells and per-cell counts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::ingest::{BoundarySet, GeoPost, Label};

/// Number of decimal places kept when quantizing coordinates (1..=7).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Precision(u8);

impl Precision {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 7;

    pub fn new(d: u8) -> Result<Self> {
        if (Self::MIN..=Self::MAX).contains(&d) {
            Ok(Precision(d))
        } else {
            Err(Error::Invalid(format!(
                "precision must be in {}..={}, got {d}",
                Self::MIN,
                Self::MAX
            )))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// 10^d as an integer.
    pub fn scale(self) -> i64 {
        10i64.pow(self.0 as u32)
    }

    /// Width of one cell in degrees.
    pub fn step(self) -> f64 {
        1.0 / self.scale() as f64
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision(3)
    }
}

impl TryFrom<u8> for Precision {
    type Error = Error;
    fn try_from(d: u8) -> Result<Self> {
        Precision::new(d)
    }
}

impl From<Precision> for u8 {
    fn from(p: Precision) -> u8 {
        p.0
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A grid cell: coordinates scaled by 10^d and rounded to integers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub lat_q: i64,
    pub lon_q: i64,
    pub d: Precision,
}

impl CellKey {
    pub fn new(lat_q: i64, lon_q: i64, d: Precision) -> Self {
        CellKey { lat_q, lon_q, d }
    }

    /// Cell center as (lat, lon) in degrees.
    pub fn center(&self) -> (f64, f64) {
        let s = self.d.scale() as f64;
        (self.lat_q as f64 / s, self.lon_q as f64 / s)
    }

    /// Chebyshev distance between integer keys, in cells.
    pub fn chebyshev(&self, other: &CellKey) -> u64 {
        debug_assert_eq!(self.d, other.d);
        self.lat_q
            .abs_diff(other.lat_q)
            .max(self.lon_q.abs_diff(other.lon_q))
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})@{}", self.lat_q, self.lon_q, self.d)
    }
}

/// Rounds `x·10^d` half away from zero, working on the shortest decimal
/// representation of `x` so that e.g. 0.15 at d = 1 gives 2, not 1.
pub fn round_scaled(x: f64, d: Precision) -> i64 {
    assert!(x.is_finite(), "cannot quantize non-finite coordinate {x}");
    let repr = x.abs().to_string();
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((repr.as_str(), ""));
    let digits: String = format!("{int_part}{frac_part}");
    let mantissa: i128 = digits.parse().expect("decimal digits");
    let exp = frac_part.len() as u32;
    let d = d.get() as u32;
    let magnitude = if exp <= d {
        mantissa * 10i128.pow(d - exp)
    } else {
        let div = 10i128.pow(exp - d);
        let (q, r) = (mantissa / div, mantissa % div);
        if 2 * r >= div {
            q + 1
        } else {
            q
        }
    };
    let magnitude = i64::try_from(magnitude).expect("coordinate out of range");
    if x.is_sign_negative() {
        -magnitude
    } else {
        magnitude
    }
}

pub fn cell_key(lat: f64, lon: f64, d: Precision) -> CellKey {
    CellKey {
        lat_q: round_scaled(lat, d),
        lon_q: round_scaled(lon, d),
        d,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub total: u64,
    pub positive: u64,
    pub users_total: Option<u64>,
    pub users_positive: Option<u64>,
}

impl CellCounts {
    pub fn new(total: u64, positive: u64) -> Self {
        CellCounts {
            total,
            positive,
            users_total: None,
            users_positive: None,
        }
    }
}

/// Which counts a field's proportions are computed from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    #[default]
    Posts,
    Users,
}

/// Occupied cells at one precision with their post counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    d: Precision,
    basis: Basis,
    cells: BTreeMap<CellKey, CellCounts>,
}

impl GridField {
    pub fn new(d: Precision) -> Self {
        GridField {
            d,
            basis: Basis::Posts,
            cells: BTreeMap::new(),
        }
    }

    /// Builds a post-count field, rejecting cells that break the count invariants.
    pub fn from_counts(
        d: Precision,
        counts: impl IntoIterator<Item = (CellKey, u64, u64)>,
    ) -> Result<Self> {
        let mut field = GridField::new(d);
        for (key, total, positive) in counts {
            field.insert(key, CellCounts::new(total, positive))?;
        }
        Ok(field)
    }

    pub fn insert(&mut self, key: CellKey, counts: CellCounts) -> Result<()> {
        if key.d != self.d {
            return Err(Error::Invalid(format!(
                "cell {key} does not match field precision {}",
                self.d
            )));
        }
        if counts.total == 0 {
            return Err(Error::Invariant(format!("cell {key} has no posts")));
        }
        if counts.positive > counts.total {
            return Err(Error::Invariant(format!(
                "cell {key}: positive {} exceeds total {}",
                counts.positive, counts.total
            )));
        }
        if let (Some(ut), Some(up)) = (counts.users_total, counts.users_positive) {
            if up > ut || ut == 0 {
                return Err(Error::Invariant(format!(
                    "cell {key}: user counts {up}/{ut} inconsistent"
                )));
            }
        }
        self.cells.insert(key, counts);
        Ok(())
    }

    pub fn precision(&self) -> Precision {
        self.d
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Number of occupied cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, key: &CellKey) -> Option<&CellCounts> {
        self.cells.get(key)
    }

    pub fn contains(&self, key: &CellKey) -> bool {
        self.cells.contains_key(key)
    }

    pub fn cells(&self) -> &BTreeMap<CellKey, CellCounts> {
        &self.cells
    }

    pub fn keys(&self) -> impl Iterator<Item = &CellKey> {
        self.cells.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CellKey, &CellCounts)> {
        self.cells.iter()
    }

    /// Positive share of a cell under the field's basis.
    pub fn proportion(&self, key: &CellKey) -> Option<f64> {
        self.cells.get(key).map(|c| self.proportion_of(c))
    }

    fn proportion_of(&self, c: &CellCounts) -> f64 {
        match self.basis {
            Basis::Posts => c.positive as f64 / c.total as f64,
            Basis::Users => {
                let ut = c.users_total.unwrap_or(0);
                let up = c.users_positive.unwrap_or(0);
                if ut == 0 {
                    0.0
                } else {
                    up as f64 / ut as f64
                }
            }
        }
    }

    pub fn total_posts(&self) -> u64 {
        self.cells.values().map(|c| c.total).sum()
    }

    pub fn total_positive(&self) -> u64 {
        self.cells.values().map(|c| c.positive).sum()
    }

    /// Field restricted to `keep`.
    pub fn restrict<'a>(&self, keep: impl IntoIterator<Item = &'a CellKey>) -> GridField {
        let cells = keep
            .into_iter()
            .filter_map(|k| self.cells.get(k).map(|c| (*k, *c)))
            .collect();
        GridField {
            d: self.d,
            basis: self.basis,
            cells,
        }
    }

    /// Adds `other`'s counts into `self`. Merging is associative and commutative.
    pub fn merge(&mut self, other: &GridField) -> Result<()> {
        if other.d != self.d {
            return Err(Error::Invalid(
                "cannot merge fields of different precision".into(),
            ));
        }
        for (k, c) in &other.cells {
            let e = self.cells.entry(*k).or_default();
            e.total += c.total;
            e.positive += c.positive;
        }
        Ok(())
    }
}

fn require_labels(posts: &[GeoPost]) -> Result<()> {
    let missing: Vec<String> = posts
        .iter()
        .filter(|p| p.label.is_none())
        .map(|p| p.id.clone())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Unlabeled(missing))
    }
}

/// Counts posts per occupied cell. With a boundary, cells whose center lies
/// outside it are dropped.
pub fn bin_posts(
    posts: &[GeoPost],
    d: Precision,
    boundary: Option<&BoundarySet>,
) -> Result<GridField> {
    require_labels(posts)?;
    let mut counts: BTreeMap<CellKey, CellCounts> = BTreeMap::new();
    for p in posts {
        let key = cell_key(p.lat, p.lon, d);
        let c = counts.entry(key).or_default();
        c.total += 1;
        if p.label == Some(Label::Positive) {
            c.positive += 1;
        }
    }
    if let Some(b) = boundary {
        counts.retain(|k, _| {
            let (lat, lon) = k.center();
            b.contains(lat, lon)
        });
    }
    Ok(GridField {
        d,
        basis: Basis::Posts,
        cells: counts,
    })
}

/// Field whose proportions count distinct users instead of posts.
pub fn user_centric_field(posts: &[GeoPost], d: Precision) -> Result<GridField> {
    require_labels(posts)?;
    let missing: Vec<String> = posts
        .iter()
        .filter(|p| p.user_id.as_deref().is_none_or(str::is_empty))
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingUser(missing));
    }
    let mut counts: BTreeMap<CellKey, CellCounts> = BTreeMap::new();
    let mut users: HashMap<CellKey, (BTreeSet<&str>, BTreeSet<&str>)> = HashMap::new();
    for p in posts {
        let key = cell_key(p.lat, p.lon, d);
        let c = counts.entry(key).or_default();
        c.total += 1;
        let uid = p.user_id.as_deref().unwrap_or_default();
        let (all, pos) = users.entry(key).or_default();
        all.insert(uid);
        if p.label == Some(Label::Positive) {
            c.positive += 1;
            pos.insert(uid);
        }
    }
    for (key, c) in counts.iter_mut() {
        let (all, pos) = &users[key];
        c.users_total = Some(all.len() as u64);
        c.users_positive = Some(pos.len() as u64);
    }
    Ok(GridField {
        d,
        basis: Basis::Users,
        cells: counts,
    })
}

/// Sample Pearson correlation of proportions over the cells both fields occupy.
pub fn pearson(a: &GridField, b: &GridField) -> Result<f64> {
    let pairs: Vec<(f64, f64)> = a
        .cells
        .iter()
        .filter_map(|(k, ca)| {
            b.cells
                .get(k)
                .map(|cb| (a.proportion_of(ca), b.proportion_of(cb)))
        })
        .collect();
    if pairs.len() < 2 {
        return Err(Error::Undefined(format!(
            "pearson needs at least 2 common cells, found {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let constant = |f: fn(&(f64, f64)) -> f64| pairs.iter().all(|p| f(p) == f(&pairs[0]));
    if constant(|p| p.0) || constant(|p| p.1) {
        return Err(Error::Undefined(
            "pearson is undefined for a constant series".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// A UTC calendar month.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Month {
    pub year: i32,
    pub month: u32,
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonthPairTest {
    pub from: Month,
    pub to: Month,
    pub t: f64,
    pub p_value: f64,
    pub df: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonthlyTTest {
    pub pairs: Vec<MonthPairTest>,
    /// Adjacent pairs skipped because a month had fewer than two occupied cells.
    pub skipped: Vec<(Month, Month, String)>,
}

/// Welch's two-sample t-test. Returns (t, df, two-sided p).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Undefined(
            "welch test needs two observations per sample".into(),
        ));
    }
    let moments = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
        (n, m, v)
    };
    let (na, ma, va) = moments(a);
    let (nb, mb, vb) = moments(b);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        // both samples constant
        return Ok(if ma == mb {
            (0.0, f64::INFINITY, 1.0)
        } else {
            let t = if ma > mb {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            };
            (t, f64::INFINITY, 0.0)
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Undefined(format!("t distribution: {e}")))?;
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok((t, df, p))
}

/// Welch t-test between consecutive months' cell-level proportions.
pub fn monthly_ttest(posts: &[GeoPost], d: Precision) -> Result<MonthlyTTest> {
    require_labels(posts)?;
    let mut by_month: BTreeMap<Month, Vec<GeoPost>> = BTreeMap::new();
    for p in posts {
        let m = Month {
            year: p.timestamp.year(),
            month: p.timestamp.month(),
        };
        by_month.entry(m).or_default().push(p.clone());
    }
    let samples: Vec<(Month, Vec<f64>)> = by_month
        .into_iter()
        .map(|(m, ps)| {
            let field = bin_posts(&ps, d, None)?;
            let props = field
                .cells
                .values()
                .map(|c| field.proportion_of(c))
                .collect();
            Ok((m, props))
        })
        .collect::<Result<_>>()?;
    let mut out = MonthlyTTest::default();
    for w in samples.windows(2) {
        let ((ma, xa), (mb, xb)) = (&w[0], &w[1]);
        if xa.len() < 2 || xb.len() < 2 {
            out.skipped.push((
                *ma,
                *mb,
                format!(
                    "occupied cells {} / {} (need >= 2 each)",
                    xa.len(),
                    xb.len()
                ),
            ));
            continue;
        }
        let (t, df, p_value) = welch_t_test(xa, xb)?;
        out.pairs.push(MonthPairTest {
            from: *ma,
            to: *mb,
            t,
            p_value,
            df,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::test_post;

    fn d(n: u8) -> Precision {
        Precision::new(n).unwrap()
    }

    #[test]
    fn rounding_example_at_one_decimal() {
        let k = cell_key(40.8347008, -73.9228741, d(1));
        assert_eq!((k.lat_q, k.lon_q), (408, -739));
        assert_eq!(k.center(), (40.8, -73.9));
    }

    #[test]
    fn rounding_is_half_away_from_zero_on_decimal_repr() {
        assert_eq!(round_scaled(0.15, d(1)), 2);
        assert_eq!(round_scaled(-0.15, d(1)), -2);
        assert_eq!(round_scaled(0.25, d(1)), 3);
        assert_eq!(round_scaled(0.0, d(5)), 0);
        assert_eq!(round_scaled(-0.0, d(5)), 0);
        assert_eq!(round_scaled(1e-7, d(7)), 1);
        assert_eq!(round_scaled(179.99999995, d(7)), 1_800_000_000);
    }

    #[test]
    fn precision_bounds() {
        assert!(Precision::new(0).is_err());
        assert!(Precision::new(8).is_err());
        assert_eq!(Precision::new(7).unwrap().scale(), 10_000_000);
    }

    #[test]
    fn bins_counts_and_proportion() {
        let posts: Vec<GeoPost> = (0..10)
            .map(|i| test_post(&format!("p{i}"), 40.7001, -73.9001, i < 3))
            .collect();
        let f = bin_posts(&posts, d(3), None).unwrap();
        assert_eq!(f.len(), 1);
        let (k, c) = f.iter().next().unwrap();
        assert_eq!((c.total, c.positive), (10, 3));
        assert_eq!(f.proportion(k), Some(0.3));
    }

    #[test]
    fn unlabeled_posts_are_listed() {
        let mut p = test_post("a", 1.0, 1.0, true);
        p.label = None;
        let q = test_post("b", 1.0, 1.0, false);
        match bin_posts(&[p, q], d(2), None) {
            Err(Error::Unlabeled(ids)) => assert_eq!(ids, vec!["a".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn insert_rejects_bad_counts() {
        let mut f = GridField::new(d(2));
        let k = CellKey::new(1, 1, d(2));
        assert!(f.insert(k, CellCounts::new(0, 0)).is_err());
        assert!(f.insert(k, CellCounts::new(2, 3)).is_err());
        assert!(f
            .insert(CellKey::new(1, 1, d(3)), CellCounts::new(2, 1))
            .is_err());
        assert!(f.insert(k, CellCounts::new(3, 3)).is_ok());
    }

    #[test]
    fn user_centric_counts_distinct_users() {
        let mut posts = Vec::new();
        for i in 0..100 {
            let mut p = test_post(&format!("a{i}"), 10.0, 10.0, true);
            p.user_id = Some("u1".into());
            posts.push(p);
        }
        let f = user_centric_field(&posts, d(2)).unwrap();
        let (k, c) = f.iter().next().unwrap();
        assert_eq!((c.users_total, c.users_positive), (Some(1), Some(1)));
        assert_eq!(f.proportion(k), Some(1.0));

        let mut posts = Vec::new();
        for i in 0..50 {
            let mut p = test_post(&format!("a{i}"), 10.0, 10.0, true);
            p.user_id = Some("u1".into());
            posts.push(p);
        }
        for i in 0..3 {
            let mut p = test_post(&format!("b{i}"), 10.0, 10.0, false);
            p.user_id = Some("u2".into());
            posts.push(p);
        }
        let f = user_centric_field(&posts, d(2)).unwrap();
        assert_eq!(f.proportion(f.keys().next().unwrap()), Some(0.5));
    }

    #[test]
    fn user_centric_matches_post_centric_when_users_distinct() {
        let posts: Vec<GeoPost> = (0..40)
            .map(|i| {
                let mut p = test_post(&format!("p{i}"), (i % 4) as f64 * 0.01, 0.0, i % 3 == 0);
                p.user_id = Some(format!("u{i}"));
                p
            })
            .collect();
        let u = user_centric_field(&posts, d(2)).unwrap();
        let t = bin_posts(&posts, d(2), None).unwrap();
        for k in t.keys() {
            assert_eq!(u.proportion(k), t.proportion(k));
        }
    }

    #[test]
    fn user_centric_requires_user_ids() {
        let p = test_post("x", 0.0, 0.0, true);
        assert!(matches!(
            user_centric_field(&[p], d(2)),
            Err(Error::MissingUser(_))
        ));
    }

    fn field_from_props(props: &[f64]) -> GridField {
        let dd = d(2);
        GridField::from_counts(
            dd,
            props.iter().enumerate().map(|(i, p)| {
                (
                    CellKey::new(i as i64, 0, dd),
                    1000,
                    (p * 1000.0).round() as u64,
                )
            }),
        )
        .unwrap()
    }

    #[test]
    fn pearson_examples() {
        let a = field_from_props(&[0.1, 0.4, 0.3, 0.9]);
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = field_from_props(&[0.9, 0.6, 0.7, 0.1]);
        assert!((pearson(&a, &b).unwrap() + 1.0).abs() < 1e-12);
        let x = field_from_props(&[0.1, 0.2, 0.3]);
        let y = field_from_props(&[0.2, 0.4, 0.6]);
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_constant_series_is_undefined() {
        let a = field_from_props(&[0.2, 0.2, 0.2]);
        let b = field_from_props(&[0.1, 0.4, 0.3]);
        assert!(pearson(&a, &b).is_err());
        let one = field_from_props(&[0.5]);
        assert!(pearson(&one, &one).is_err());
    }

    fn month_posts(month: u32, props: &[(f64, u64)]) -> Vec<GeoPost> {
        let mut out = Vec::new();
        for (cell, (p, n)) in props.iter().enumerate() {
            let pos = (p * *n as f64).round() as u64;
            for i in 0..*n {
                let mut post = test_post(
                    &format!("m{month}c{cell}i{i}"),
                    cell as f64 * 0.01,
                    0.0,
                    i < pos,
                );
                post.timestamp =
                    chrono::DateTime::parse_from_rfc3339(&format!("2016-{month:02}-10T12:00:00Z"))
                        .unwrap()
                        .into();
                out.push(post);
            }
        }
        out
    }

    #[test]
    fn identical_months_give_zero_t() {
        let layout = [(0.1, 10), (0.3, 10), (0.6, 10)];
        let mut posts = month_posts(1, &layout);
        posts.extend(month_posts(2, &layout));
        let r = monthly_ttest(&posts, d(2)).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].t, 0.0);
        assert!((r.pairs[0].p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_constant_months_are_significant() {
        let zeros = vec![(0.0, 5); 20];
        let ones = vec![(1.0, 5); 20];
        let mut posts = month_posts(3, &zeros);
        posts.extend(month_posts(4, &ones));
        let r = monthly_ttest(&posts, d(2)).unwrap();
        assert!(r.pairs[0].p_value < 0.01);
    }

    #[test]
    fn welch_matches_closed_form() {
        // Oracle: hand-computed t for a = {1,2,3,4}, b = {2,4,6,8}
        // means 2.5 / 5, variances 5/3 / 20/3, se^2 = (5/3 + 20/3)/4 = 25/12.
        let (t, df, p) = welch_t_test(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]).unwrap();
        let t_expected = -2.5 / (25.0f64 / 12.0).sqrt();
        assert!((t - t_expected).abs() < 1e-12);
        // df = (25/12)^2 / ((5/12)^2/3 + (20/12)^2/3) = 625 / (25/3 + 400/3) * ... = 4.4117647
        assert!((df - 75.0 / 17.0).abs() < 1e-9);
        assert!(p > 0.05 && p < 0.2, "p = {p}");
    }

    #[test]
    fn single_month_has_no_pairs_and_sparse_months_are_skipped() {
        let posts = month_posts(1, &[(0.1, 10), (0.2, 10)]);
        assert!(monthly_ttest(&posts, d(2)).unwrap().pairs.is_empty());
        let mut posts = month_posts(1, &[(0.1, 10), (0.2, 10)]);
        posts.extend(month_posts(2, &[(0.1, 10)]));
        let r = monthly_ttest(&posts, d(2)).unwrap();
        assert!(r.pairs.is_empty());
        assert_eq!(r.skipped.len(), 1);
    }
}
