//! Delimited tables, GeoJSON maps and atomic file writes.
//!
//! Every table written here has a matching reader so exports can be fed
//! back into the pipeline.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evaluate::EvalReport;
use crate::exposure::{ExposureReport, PersonExposure};
use crate::grid::{CellCounts, CellKey, GridField, Precision};
use crate::partition::{ClusterId, Partition, PartitionMethod};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn atomic_write(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| {
            f.write_all(bytes)?;
            f.sync_all()
        })
        .and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::io(path, e))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn field_at<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let line = rec.position().map_or(0, |p| p.line() as usize);
    let raw = rec
        .get(i)
        .ok_or_else(|| Error::record(line, name, "missing"))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::record(line, name, format!("cannot parse `{raw}`")))
}

/// `lat_q,lon_q,d,total,positive`, sorted by key.
pub fn field_to_csv(field: &GridField) -> String {
    let mut out = String::from("lat_q,lon_q,d,total,positive\n");
    for (k, c) in field.iter() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            k.lat_q, k.lon_q, k.d, c.total, c.positive
        );
    }
    out
}

pub fn field_from_csv(text: &str) -> Result<GridField> {
    let mut rdr = csv_reader(text);
    let mut field: Option<GridField> = None;
    for rec in rdr.records() {
        let rec = rec?;
        let d = Precision::new(field_at(&rec, 2, "d")?)?;
        let f = field.get_or_insert_with(|| GridField::new(d));
        let key = CellKey::new(field_at(&rec, 0, "lat_q")?, field_at(&rec, 1, "lon_q")?, d);
        f.insert(
            key,
            CellCounts::new(field_at(&rec, 3, "total")?, field_at(&rec, 4, "positive")?),
        )?;
    }
    field.ok_or_else(|| Error::Invalid("field table has no rows".into()))
}

/// `lat_q,lon_q,cluster_id`, sorted by key.
pub fn partition_to_csv(p: &Partition) -> String {
    let mut out = String::from("lat_q,lon_q,cluster_id\n");
    for (k, c) in p.assignment() {
        let _ = writeln!(out, "{},{},{}", k.lat_q, k.lon_q, c);
    }
    out
}

/// Reads a partition table; with a field, counts are attached and coverage is checked.
pub fn partition_from_csv(
    text: &str,
    d: Precision,
    field: Option<&GridField>,
) -> Result<Partition> {
    let mut rdr = csv_reader(text);
    let mut assignment = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let key = CellKey::new(field_at(&rec, 0, "lat_q")?, field_at(&rec, 1, "lon_q")?, d);
        let c: ClusterId = field_at(&rec, 2, "cluster_id")?;
        if assignment.insert(key, c).is_some() {
            return Err(Error::Invariant(format!("cell {key} assigned twice")));
        }
    }
    match field {
        Some(f) => Partition::new(assignment, f, PartitionMethod::Loaded),
        None => Ok(Partition::from_assignment(
            d,
            assignment,
            PartitionMethod::Loaded,
        )),
    }
}

/// `cluster_id,cells,posts,positives,prevalence`, sorted by id.
pub fn clusters_to_csv(p: &Partition) -> String {
    let mut out = String::from("cluster_id,cells,posts,positives,prevalence\n");
    for (id, s) in p.clusters() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            id,
            s.cells,
            s.posts,
            s.positives,
            s.prevalence()
        );
    }
    out
}

/// `metric,fraction,fold,value`; each report ends with `mean` and `sd` rows.
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("metric,fraction,fold,value\n");
    for r in reports {
        for (i, v) in r.per_fold.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", r.metric, r.fraction, i, v);
        }
        let _ = writeln!(out, "{},{},mean,{}", r.metric, r.fraction, r.mean);
        let _ = writeln!(out, "{},{},sd,{}", r.metric, r.fraction, r.sd);
    }
    out
}

pub fn reports_from_csv(text: &str) -> Result<Vec<EvalReport>> {
    let mut rdr = csv_reader(text);
    let mut folds: Vec<((String, u64), Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let metric = rec.get(0).unwrap_or("").to_string();
        let fraction: f64 = field_at(&rec, 1, "fraction")?;
        if rec.get(2).is_some_and(|f| f == "mean" || f == "sd") {
            continue;
        }
        let v: f64 = field_at(&rec, 3, "value")?;
        let id = (metric, fraction.to_bits());
        match folds.last_mut() {
            Some((last, vals)) if *last == id => vals.push(v),
            _ => folds.push((id, vec![v])),
        }
    }
    Ok(folds
        .into_iter()
        .map(|((m, f), v)| EvalReport::new(&m, f64::from_bits(f), v))
        .collect())
}

/// Per-person rows plus a final `*cohort*` row carrying total visits, mean
/// exposure and total flagged cells.
pub fn exposure_to_csv(r: &ExposureReport) -> String {
    let mut out = String::from("person_id,visits,exposure,flagged_cells\n");
    for p in &r.persons {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.person_id, p.visits, p.exposure, p.flagged_cells
        );
    }
    let visits: u64 = r.persons.iter().map(|p| p.visits).sum();
    let _ = writeln!(out, "*cohort*,{},{},{}", visits, r.mean, r.flagged_cells);
    out
}

/// Per-person rows of an exposure table (the cohort row is skipped).
pub fn exposure_from_csv(text: &str) -> Result<Vec<PersonExposure>> {
    let mut rdr = csv_reader(text);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").to_string();
        if id == "*cohort*" {
            continue;
        }
        out.push(PersonExposure {
            person_id: id,
            visits: field_at(&rec, 1, "visits")?,
            skipped_visits: 0,
            exposure: field_at(&rec, 2, "exposure")?,
            flagged_cells: field_at(&rec, 3, "flagged_cells")?,
        });
    }
    Ok(out)
}

type Pt = (i64, i64);

/// Outline rings of the union of unit cells, in doubled lattice coordinates
/// (x = lon, y = lat; cell (r, c) spans [2c−1, 2c+1] × [2r−1, 2r+1]).
/// Outer rings run counter-clockwise, holes clockwise.
fn cell_union_rings(cells: &BTreeSet<Pt>) -> Vec<Vec<Pt>> {
    let mut out_edges: BTreeMap<Pt, Vec<Pt>> = BTreeMap::new();
    for &(r, c) in cells {
        let (x0, y0, x1, y1) = (2 * c - 1, 2 * r - 1, 2 * c + 1, 2 * r + 1);
        let sides = [
            ((r - 1, c), (x0, y0), (x1, y0)),
            ((r, c + 1), (x1, y0), (x1, y1)),
            ((r + 1, c), (x1, y1), (x0, y1)),
            ((r, c - 1), (x0, y1), (x0, y0)),
        ];
        for (nbr, a, b) in sides {
            if !cells.contains(&nbr) {
                out_edges.entry(a).or_default().push(b);
            }
        }
    }
    let mut rings = Vec::new();
    while let Some((&start, _)) = out_edges.iter().find(|(_, v)| !v.is_empty()) {
        let first = out_edges.get_mut(&start).unwrap().remove(0);
        let mut ring = vec![start];
        let (mut prev, mut cur) = (start, first);
        while cur != start {
            ring.push(cur);
            let dir = (cur.0 - prev.0, cur.1 - prev.1);
            let prefs = [(-dir.1, dir.0), dir, (dir.1, -dir.0)];
            let outs = out_edges.get_mut(&cur).expect("closed boundary");
            let pick = prefs
                .iter()
                .find_map(|p| outs.iter().position(|&n| (n.0 - cur.0, n.1 - cur.1) == *p))
                .expect("boundary continues");
            let next = outs.remove(pick);
            prev = cur;
            cur = next;
        }
        rings.push(drop_collinear(ring));
    }
    rings
}

fn drop_collinear(ring: Vec<Pt>) -> Vec<Pt> {
    let n = ring.len();
    (0..n)
        .filter(|&i| {
            let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) != 0
        })
        .map(|i| ring[i])
        .collect()
}

fn signed_area2(ring: &[Pt]) -> i64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum()
}

fn ring_contains(ring: &[Pt], p: Pt) -> bool {
    let n = ring.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if (a.1 > p.1) != (b.1 > p.1) {
            // p is a cell center (even coords) and edges sit on odd lines, so no ties
            let x_cross = a.0 as f64 + (p.1 - a.1) as f64 * (b.0 - a.0) as f64 / (b.1 - a.1) as f64;
            if (p.0 as f64) < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Groups rings into polygons: each hole goes to the smallest outer ring containing it.
fn polygons_from_rings(rings: Vec<Vec<Pt>>) -> Vec<Vec<Vec<Pt>>> {
    let (outers, holes): (Vec<_>, Vec<_>) = rings.into_iter().partition(|r| signed_area2(r) > 0);
    let mut polys: Vec<Vec<Vec<Pt>>> = outers.into_iter().map(|r| vec![r]).collect();
    for hole in holes {
        let (a, b) = (hole[0], hole[1]);
        let (dx, dy) = ((b.0 - a.0).signum(), (b.1 - a.1).signum());
        // center of the empty cell on the right of the first hole edge
        let probe = (a.0 + dx + dy, a.1 + dy - dx);
        let owner = polys
            .iter()
            .enumerate()
            .filter(|(_, p)| ring_contains(&p[0], probe))
            .min_by_key(|(_, p)| signed_area2(&p[0]))
            .map(|(i, _)| i);
        if let Some(i) = owner {
            polys[i].push(hole);
        }
    }
    polys
}

/// One feature per cluster: the union of its cells' squares, sorted by cluster id.
pub fn partition_to_geojson(p: &Partition) -> Value {
    let scale = 2.0 * p.precision().scale() as f64;
    let to_coords = |ring: &[Pt]| -> Value {
        let mut pts: Vec<Value> = ring
            .iter()
            .map(|&(x, y)| json!([x as f64 / scale, y as f64 / scale]))
            .collect();
        pts.push(pts[0].clone());
        Value::Array(pts)
    };
    let features: Vec<Value> = p
        .members()
        .into_iter()
        .map(|(id, keys)| {
            let cells: BTreeSet<Pt> = keys.iter().map(|k| (k.lat_q, k.lon_q)).collect();
            let polys = polygons_from_rings(cell_union_rings(&cells));
            let poly_json: Vec<Value> = polys
                .iter()
                .map(|rings| Value::Array(rings.iter().map(|r| to_coords(r)).collect()))
                .collect();
            let geometry = if poly_json.len() == 1 {
                json!({"type": "Polygon", "coordinates": poly_json[0]})
            } else {
                json!({"type": "MultiPolygon", "coordinates": poly_json})
            };
            let s = p.clusters()[&id];
            json!({
                "type": "Feature",
                "properties": {
                    "name": format!("cluster-{id}"),
                    "cluster_id": id,
                    "cells": s.cells,
                    "posts": s.posts,
                    "positives": s.positives,
                    "prevalence": s.prevalence(),
                },
                "geometry": geometry,
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn export_geojson(p: &Partition, field: &GridField, path: impl AsRef<Path>) -> Result<()> {
    let mut p = p.clone();
    p.attach_counts(field);
    let text = serde_json::to_string_pretty(&partition_to_geojson(&p))?;
    atomic_write(path, format!("{text}\n").as_bytes())
}

/// Cluster ids keyed by polygon names produced by [`partition_to_geojson`].
pub fn cluster_ids_by_name(p: &Partition) -> HashMap<String, ClusterId> {
    p.clusters()
        .keys()
        .map(|&c| (format!("cluster-{c}"), c))
        .collect()
}
