//! Loading posts, boundaries and traces; seeded synthetic corpora.
//!
//! # Post file grammar (record-per-line)
//!
//! One post per line, UTF-8, seven TAB-separated fields:
//!
//! ```text
//! id \t user_id \t lat \t lon \t timestamp \t label \t text
//! ```
//!
//! * `user_id` and `label` may be empty.
//! * `timestamp` is RFC 3339.
//! * `label` is `positive` or `negative`, optionally followed by `:<score>`
//!   with a probability in `[0, 1]` (e.g. `positive:0.8731`).
//! * `text` is everything after the sixth TAB. Within it `\\`, `\t`, `\n`
//!   and `\r` are escapes for backslash, TAB, LF and CR.
//! * Blank lines and lines starting with `#` are ignored.
//!
//! The delimited format is CSV with a header row naming the columns
//! `id,user_id,lat,lon,timestamp,label,text` (plus an optional `score`).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{cell_key, CellKey, GridField, Precision};
use crate::partition::{ClusterId, Partition, PartitionMethod};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

impl std::str::FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "positive" => Ok(Label::Positive),
            "negative" => Ok(Label::Negative),
            other => Err(format!("expected `positive` or `negative`, got `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPost {
    pub id: String,
    pub user_id: Option<String>,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: DateTime<Utc>,
    pub text: String,
    pub label: Option<Label>,
    pub score: Option<f64>,
}

impl GeoPost {
    /// Checks the coordinate and score ranges, returning the offending field.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(("lat", format!("{} outside [-90, 90]", self.lat)));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(("lon", format!("{} outside [-180, 180]", self.lon)));
        }
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(("score", format!("{s} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostFormat {
    Delimited,
    RecordPerLine,
}

fn read_file(path: &Path) -> Result<String> {
    let mut s = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

pub fn load_posts(path: impl AsRef<Path>, format: PostFormat) -> Result<Vec<GeoPost>> {
    let path = path.as_ref();
    let text = read_file(path)?;
    match format {
        PostFormat::RecordPerLine => parse_posts(&text),
        PostFormat::Delimited => parse_posts_csv(text.as_bytes()),
    }
}

fn parse_coord(line: usize, field: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::record(line, field, format!("`{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::record(line, field, "not finite"));
    }
    Ok(v)
}

fn parse_timestamp(line: usize, raw: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(raw.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::record(line, "timestamp", e.to_string()))
}

fn parse_label(line: usize, raw: &str) -> Result<(Option<Label>, Option<f64>)> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok((None, None));
    }
    let (label, score) = match raw.split_once(':') {
        Some((l, s)) => {
            let score: f64 = s
                .parse()
                .map_err(|_| Error::record(line, "score", format!("`{s}` is not a number")))?;
            (l, Some(score))
        }
        None => (raw, None),
    };
    let label = label
        .parse()
        .map_err(|e: String| Error::record(line, "label", e))?;
    Ok((Some(label), score))
}

fn unescape_text(line: usize, raw: &str) -> Result<String> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => {
                return Err(Error::record(
                    line,
                    "text",
                    format!("unknown escape `\\{other}`"),
                ))
            }
            None => return Err(Error::record(line, "text", "dangling backslash")),
        }
    }
    Ok(out)
}

fn escape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Collects range violations so that all bad rows are counted before failing.
#[derive(Default)]
struct RangeRejects {
    count: usize,
    first: Option<(usize, &'static str)>,
}

impl RangeRejects {
    fn check(&mut self, line: usize, post: &GeoPost) -> bool {
        match post.validate() {
            Ok(()) => true,
            Err((field, _)) => {
                self.count += 1;
                self.first.get_or_insert((line, field));
                false
            }
        }
    }

    fn finish(self, posts: Vec<GeoPost>) -> Result<Vec<GeoPost>> {
        match self.first {
            None => Ok(posts),
            Some((first_line, field)) => Err(Error::OutOfRange {
                rejected: self.count,
                first_line,
                field: field.to_string(),
            }),
        }
    }
}

/// Parses the record-per-line grammar described in the module docs.
pub fn parse_posts(text: &str) -> Result<Vec<GeoPost>> {
    let mut posts = Vec::new();
    let mut rejects = RangeRejects::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.splitn(7, '\t').collect();
        const NAMES: [&str; 7] = ["id", "user_id", "lat", "lon", "timestamp", "label", "text"];
        if fields.len() < 7 {
            return Err(Error::record(line, NAMES[fields.len()], "missing field"));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(Error::record(line, "id", "empty"));
        }
        let user = fields[1].trim();
        let (label, score) = parse_label(line, fields[5])?;
        let post = GeoPost {
            id: id.to_string(),
            user_id: (!user.is_empty()).then(|| user.to_string()),
            lat: parse_coord(line, "lat", fields[2])?,
            lon: parse_coord(line, "lon", fields[3])?,
            timestamp: parse_timestamp(line, fields[4])?,
            text: unescape_text(line, fields[6])?,
            label,
            score,
        };
        if rejects.check(line, &post) {
            posts.push(post);
        }
    }
    rejects.finish(posts)
}

/// Serializes posts in the record-per-line grammar; `parse_posts` inverts it.
pub fn format_posts(posts: &[GeoPost]) -> String {
    let mut out = String::new();
    for p in posts {
        let label = match (p.label, p.score) {
            (Some(l), Some(s)) => format!("{}:{s}", l.as_str()),
            (Some(l), None) => l.as_str().to_string(),
            (None, _) => String::new(),
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.id,
            p.user_id.as_deref().unwrap_or(""),
            p.lat,
            p.lon,
            p.timestamp
                .to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
            label,
            escape_text(&p.text)
        );
    }
    out
}

/// Parses the CSV form. Line numbers in errors count the header as line 1.
pub fn parse_posts_csv(bytes: &[u8]) -> Result<Vec<GeoPost>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(bytes);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = ["id", "lat", "lon", "timestamp", "text"];
    let mut idx = BTreeMap::new();
    for name in required {
        let i = col(name).ok_or_else(|| Error::record(1, name, "missing column"))?;
        idx.insert(name, i);
    }
    let user_col = col("user_id");
    let label_col = col("label");
    let score_col = col("score");
    let mut posts = Vec::new();
    let mut rejects = RangeRejects::default();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let get = |c: usize| rec.get(c).unwrap_or("");
        let id = get(idx["id"]).trim();
        if id.is_empty() {
            return Err(Error::record(line, "id", "empty"));
        }
        let (label, mut score) = match label_col {
            Some(c) => parse_label(line, get(c))?,
            None => (None, None),
        };
        if let Some(c) = score_col {
            let raw = get(c).trim();
            if !raw.is_empty() {
                score = Some(raw.parse().map_err(|_| {
                    Error::record(line, "score", format!("`{raw}` is not a number"))
                })?);
            }
        }
        let user = user_col.map(|c| get(c).trim()).unwrap_or("");
        let post = GeoPost {
            id: id.to_string(),
            user_id: (!user.is_empty()).then(|| user.to_string()),
            lat: parse_coord(line, "lat", get(idx["lat"]))?,
            lon: parse_coord(line, "lon", get(idx["lon"]))?,
            timestamp: parse_timestamp(line, get(idx["timestamp"]))?,
            text: get(idx["text"]).to_string(),
            label,
            score,
        };
        if rejects.check(line, &post) {
            posts.push(post);
        }
    }
    rejects.finish(posts)
}

/// One polygon: an outer ring plus optional holes, each a closed (lon, lat) ring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolygon {
    pub name: String,
    pub rings: Vec<Vec<(f64, f64)>>,
}

impl BoundaryPolygon {
    pub fn new(name: impl Into<String>, rings: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        let name = name.into();
        if rings.is_empty() {
            return Err(Error::Invalid(format!("polygon `{name}` has no rings")));
        }
        for ring in &rings {
            if ring.len() < 4 {
                return Err(Error::Invalid(format!(
                    "polygon `{name}`: ring has {} vertices, need >= 4",
                    ring.len()
                )));
            }
            if ring.first() != ring.last() {
                return Err(Error::Invalid(format!(
                    "polygon `{name}`: ring is not closed"
                )));
            }
        }
        Ok(BoundaryPolygon { name, rings })
    }

    /// Axis-aligned rectangle; convenient for tests and baselines.
    pub fn rectangle(
        name: impl Into<String>,
        lat_min: f64,
        lon_min: f64,
        lat_max: f64,
        lon_max: f64,
    ) -> Self {
        let ring = vec![
            (lon_min, lat_min),
            (lon_max, lat_min),
            (lon_max, lat_max),
            (lon_min, lat_max),
            (lon_min, lat_min),
        ];
        BoundaryPolygon {
            name: name.into(),
            rings: vec![ring],
        }
    }

    /// Even-odd containment over all rings; points on an edge are inside.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        let (x, y) = (lon, lat);
        if self.rings.iter().any(|r| on_ring(r, x, y)) {
            return true;
        }
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let ((x1, y1), (x2, y2)) = (w[0], w[1]);
                if (y1 > y) != (y2 > y) {
                    let xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1);
                    if x < xi {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    /// Area-weighted centroid of the outer ring, as (lat, lon).
    pub fn centroid(&self) -> (f64, f64) {
        let ring = &self.rings[0];
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for w in ring.windows(2) {
            let ((x1, y1), (x2, y2)) = (w[0], w[1]);
            let cross = x1 * y2 - x2 * y1;
            a += cross;
            cx += (x1 + x2) * cross;
            cy += (y1 + y2) * cross;
        }
        if a.abs() < f64::EPSILON {
            let n = (ring.len() - 1) as f64;
            let sx: f64 = ring[..ring.len() - 1].iter().map(|p| p.0).sum();
            let sy: f64 = ring[..ring.len() - 1].iter().map(|p| p.1).sum();
            return (sy / n, sx / n);
        }
        (cy / (3.0 * a), cx / (3.0 * a))
    }
}

fn on_ring(ring: &[(f64, f64)], x: f64, y: f64) -> bool {
    ring.windows(2).any(|w| {
        let ((x1, y1), (x2, y2)) = (w[0], w[1]);
        let cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1);
        let scale = (x2 - x1).abs().max((y2 - y1).abs()).max(1.0);
        cross.abs() <= 1e-12 * scale
            && x >= x1.min(x2)
            && x <= x1.max(x2)
            && y >= y1.min(y2)
            && y <= y1.max(y2)
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundarySet {
    pub polygons: Vec<BoundaryPolygon>,
}

impl BoundarySet {
    pub fn new(polygons: Vec<BoundaryPolygon>) -> Self {
        BoundarySet { polygons }
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        self.polygons.iter().any(|p| p.contains(lat, lon))
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }
}

pub fn point_in_boundary(lat: f64, lon: f64, b: &BoundarySet) -> bool {
    b.contains(lat, lon)
}

fn json_ring(v: &Value) -> Result<Vec<(f64, f64)>> {
    let pts = v
        .as_array()
        .ok_or_else(|| Error::Invalid("ring is not an array".into()))?;
    pts.iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2);
            match xy.map(|a| (a[0].as_f64(), a[1].as_f64())) {
                Some((Some(x), Some(y))) => Ok((x, y)),
                _ => Err(Error::Invalid(format!("bad position {p}"))),
            }
        })
        .collect()
}

/// Parses a GeoJSON FeatureCollection of Polygon / MultiPolygon features.
/// Each MultiPolygon part becomes its own polygon carrying the feature name.
pub fn parse_boundary(text: &str) -> Result<BoundarySet> {
    let root: Value = serde_json::from_str(text)?;
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Invalid("expected a FeatureCollection with `features`".into()))?;
    let mut polygons = Vec::new();
    for (i, f) in features.iter().enumerate() {
        let name = f
            .pointer("/properties/name")
            .map(|n| match n {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .unwrap_or_else(|| format!("feature-{i}"));
        let geom = f
            .get("geometry")
            .ok_or_else(|| Error::Invalid(format!("feature {i} has no geometry")))?;
        let kind = geom.get("type").and_then(Value::as_str).unwrap_or("");
        let coords = geom
            .get("coordinates")
            .ok_or_else(|| Error::Invalid(format!("feature {i} has no coordinates")))?;
        let parts: Vec<&Value> = match kind {
            "Polygon" => vec![coords],
            "MultiPolygon" => coords
                .as_array()
                .ok_or_else(|| Error::Invalid(format!("feature {i}: bad MultiPolygon")))?
                .iter()
                .collect(),
            other => {
                return Err(Error::Invalid(format!(
                    "feature {i}: unsupported geometry `{other}`"
                )))
            }
        };
        for part in parts {
            let rings = part
                .as_array()
                .ok_or_else(|| Error::Invalid(format!("feature {i}: bad polygon")))?
                .iter()
                .map(json_ring)
                .collect::<Result<Vec<_>>>()?;
            polygons.push(BoundaryPolygon::new(name.clone(), rings)?);
        }
    }
    Ok(BoundarySet { polygons })
}

pub fn load_boundary(path: impl AsRef<Path>) -> Result<BoundarySet> {
    parse_boundary(&read_file(path.as_ref())?)
}

/// Visits per cell for one person.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MobilityTrace {
    pub person_id: String,
    pub visits: BTreeMap<CellKey, u64>,
}

impl MobilityTrace {
    pub fn new(person_id: impl Into<String>, visits: BTreeMap<CellKey, u64>) -> Result<Self> {
        let t = MobilityTrace {
            person_id: person_id.into(),
            visits,
        };
        if t.total_visits() == 0 {
            return Err(Error::Invalid(format!(
                "trace `{}` has no visits",
                t.person_id
            )));
        }
        Ok(t)
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub person_id: String,
    pub lat: f64,
    pub lon: f64,
    pub timestamp: DateTime<Utc>,
}

/// Reads CSV rows `person_id,lat,lon,timestamp` (header required).
pub fn parse_trace_points(bytes: &[u8]) -> Result<Vec<TracePoint>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::record(1, name, "missing column"))
    };
    let (ci, clat, clon, cts) = (
        col("person_id")?,
        col("lat")?,
        col("lon")?,
        col("timestamp")?,
    );
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let get = |c: usize| rec.get(c).unwrap_or("");
        let person = get(ci).trim();
        if person.is_empty() {
            return Err(Error::record(line, "person_id", "empty"));
        }
        let lat = parse_coord(line, "lat", get(clat))?;
        let lon = parse_coord(line, "lon", get(clon))?;
        if !(-90.0..=90.0).contains(&lat) {
            return Err(Error::record(
                line,
                "lat",
                format!("{lat} outside [-90, 90]"),
            ));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(Error::record(
                line,
                "lon",
                format!("{lon} outside [-180, 180]"),
            ));
        }
        out.push(TracePoint {
            person_id: person.to_string(),
            lat,
            lon,
            timestamp: parse_timestamp(line, get(cts))?,
        });
    }
    Ok(out)
}

pub fn load_trace_points(path: impl AsRef<Path>) -> Result<Vec<TracePoint>> {
    let path = path.as_ref();
    parse_trace_points(read_file(path)?.as_bytes())
}

/// Bins raw fixes into per-person visit counts, sorted by person id.
pub fn bin_traces(points: &[TracePoint], d: Precision) -> Vec<MobilityTrace> {
    let mut by_person: BTreeMap<&str, BTreeMap<CellKey, u64>> = BTreeMap::new();
    for p in points {
        *by_person
            .entry(&p.person_id)
            .or_default()
            .entry(cell_key(p.lat, p.lon, d))
            .or_default() += 1;
    }
    by_person
        .into_iter()
        .map(|(id, visits)| MobilityTrace {
            person_id: id.to_string(),
            visits,
        })
        .collect()
}

/// A planted region: grid (row, col) cells and their exact positive share.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedRegion {
    pub cells: Vec<(usize, usize)>,
    pub proportion: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    /// Latitude/longitude of the center of cell (0, 0). Rows run north, columns east.
    pub origin: (f64, f64),
    pub precision: Precision,
    pub regions: Vec<PlantedRegion>,
    pub posts_per_cell: u64,
    pub seed: u64,
    /// Timestamps are spread uniformly over this many days from 2016-01-01.
    pub span_days: u32,
}

impl SyntheticSpec {
    /// Splits the extent into a `block_rows × block_cols` arrangement of
    /// rectangular regions, taking proportions in row-major block order.
    pub fn blocks(
        rows: usize,
        cols: usize,
        block_rows: usize,
        block_cols: usize,
        proportions: &[f64],
        posts_per_cell: u64,
        seed: u64,
    ) -> Result<Self> {
        if block_rows == 0 || block_cols == 0 || block_rows > rows || block_cols > cols {
            return Err(Error::Invalid(
                "block layout does not fit the extent".into(),
            ));
        }
        if proportions.len() != block_rows * block_cols {
            return Err(Error::Invalid(format!(
                "{} proportions for {} blocks",
                proportions.len(),
                block_rows * block_cols
            )));
        }
        let mut regions: Vec<PlantedRegion> = proportions
            .iter()
            .map(|&p| PlantedRegion {
                cells: Vec::new(),
                proportion: p,
            })
            .collect();
        for r in 0..rows {
            for c in 0..cols {
                let br = r * block_rows / rows;
                let bc = c * block_cols / cols;
                regions[br * block_cols + bc].cells.push((r, c));
            }
        }
        Ok(SyntheticSpec {
            rows,
            cols,
            origin: (40.6, -74.0),
            precision: Precision::new(3)?,
            regions,
            posts_per_cell,
            seed,
            span_days: 90,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Invalid("empty extent".into()));
        }
        if self.posts_per_cell == 0 {
            return Err(Error::Invalid("posts_per_cell must be positive".into()));
        }
        let mut owner = vec![None; self.rows * self.cols];
        for (ri, region) in self.regions.iter().enumerate() {
            if !(0.0..=1.0).contains(&region.proportion) {
                return Err(Error::Invalid(format!(
                    "region {ri}: proportion {} outside [0, 1]",
                    region.proportion
                )));
            }
            if region.cells.is_empty() {
                return Err(Error::Invalid(format!("region {ri} is empty")));
            }
            for &(r, c) in &region.cells {
                if r >= self.rows || c >= self.cols {
                    return Err(Error::Invalid(format!(
                        "region {ri}: cell ({r}, {c}) outside extent"
                    )));
                }
                if let Some(prev) = owner[r * self.cols + c].replace(ri) {
                    return Err(Error::Invalid(format!(
                        "cell ({r}, {c}) claimed by regions {prev} and {ri}"
                    )));
                }
            }
            if !queen_connected(&region.cells) {
                return Err(Error::Invalid(format!("region {ri} is not connected")));
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(Error::Invalid(format!(
                "cell ({}, {}) not covered by any region",
                i / self.cols,
                i % self.cols
            )));
        }
        Ok(())
    }

    pub fn cell(&self, row: usize, col: usize) -> CellKey {
        let base = cell_key(self.origin.0, self.origin.1, self.precision);
        CellKey::new(
            base.lat_q + row as i64,
            base.lon_q + col as i64,
            self.precision,
        )
    }
}

fn queen_connected(cells: &[(usize, usize)]) -> bool {
    let set: HashSet<(usize, usize)> = cells.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut stack = vec![cells[0]];
    seen.insert(cells[0]);
    while let Some((r, c)) = stack.pop() {
        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 {
                    continue;
                }
                let n = (nr as usize, nc as usize);
                if set.contains(&n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
    }
    seen.len() == set.len()
}

const FILLER: &[&str] = &[
    "the", "a", "on", "train", "coffee", "morning", "city", "street", "today", "just", "saw",
    "people", "my", "new", "park", "night", "block", "game", "weather", "lunch",
];
const POSITIVE_MARKERS: &[&str] = &["zork", "grelb"];
const NEGATIVE_MARKERS: &[&str] = &["blee", "fump"];

fn synthetic_text(rng: &mut ChaCha8Rng, positive: bool) -> String {
    let n = rng.gen_range(3..8);
    let mut words: Vec<&str> = (0..n).map(|_| *FILLER.choose(rng).unwrap()).collect();
    let markers = if positive {
        POSITIVE_MARKERS
    } else {
        NEGATIVE_MARKERS
    };
    let at = rng.gen_range(0..=words.len());
    words.insert(at, markers.choose(rng).unwrap());
    words.join(" ")
}

/// Generates posts with exact per-cell positive counts and the planted partition.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Vec<GeoPost>, Partition)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut region_of = vec![0usize; spec.rows * spec.cols];
    for (ri, region) in spec.regions.iter().enumerate() {
        for &(r, c) in &region.cells {
            region_of[r * spec.cols + c] = ri;
        }
    }
    let n_users = ((spec.rows * spec.cols) as u64 * spec.posts_per_cell / 5).max(1);
    let start = Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap();
    let span_secs = i64::from(spec.span_days.max(1)) * 86_400;
    let step = spec.precision.step();
    let scale = spec.precision.scale() as f64;

    let mut posts = Vec::with_capacity(spec.rows * spec.cols * spec.posts_per_cell as usize);
    let mut assignment = BTreeMap::new();
    let mut field = GridField::new(spec.precision);
    for r in 0..spec.rows {
        for c in 0..spec.cols {
            let ri = region_of[r * spec.cols + c];
            let key = spec.cell(r, c);
            let n_pos = (spec.regions[ri].proportion * spec.posts_per_cell as f64).round() as u64;
            for k in 0..spec.posts_per_cell {
                let positive = k < n_pos;
                let lat = key.lat_q as f64 / scale + rng.gen_range(-0.45..0.45) * step;
                let lon = key.lon_q as f64 / scale + rng.gen_range(-0.45..0.45) * step;
                let user = rng.gen_range(0..n_users);
                let secs = rng.gen_range(0..span_secs);
                let text = synthetic_text(&mut rng, positive);
                posts.push(GeoPost {
                    id: format!("p{}", posts.len()),
                    user_id: Some(format!("u{user:06}")),
                    lat,
                    lon,
                    timestamp: start + Duration::seconds(secs),
                    text,
                    label: Some(if positive {
                        Label::Positive
                    } else {
                        Label::Negative
                    }),
                    score: None,
                });
            }
            field.insert(
                key,
                crate::grid::CellCounts::new(spec.posts_per_cell, n_pos),
            )?;
            assignment.insert(key, ri as ClusterId);
        }
    }
    let truth = Partition::new(assignment, &field, PartitionMethod::Planted)?;
    Ok((posts, truth))
}

/// Distinct ids in `posts`, useful for diagnostics.
pub fn user_ids(posts: &[GeoPost]) -> BTreeSet<&str> {
    posts.iter().filter_map(|p| p.user_id.as_deref()).collect()
}

#[cfg(test)]
pub(crate) fn test_post(id: &str, lat: f64, lon: f64, positive: bool) -> GeoPost {
    GeoPost {
        id: id.to_string(),
        user_id: None,
        lat,
        lon,
        timestamp: Utc.with_ymd_and_hms(2016, 1, 15, 12, 0, 0).unwrap(),
        text: String::new(),
        label: Some(if positive {
            Label::Positive
        } else {
            Label::Negative
        }),
        score: None,
    }
}
