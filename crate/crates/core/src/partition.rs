//! Partitions of occupied cells: the contiguity-constrained SOM, a
//! traditional Kohonen SOM, and administrative-polygon baselines.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellKey, GridField, Precision};
use crate::ingest::BoundarySet;

pub type ClusterId = u32;

/// Weight-distance slack under which winner candidates count as equally close.
/// Cluster weights drift off their inputs near boundaries, so exact ties are rare.
pub const DEFAULT_TIE_TOLERANCE: f64 = 0.04;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMethod {
    Ssom,
    TraditionalSom,
    Polygon,
    Planted,
    Loaded,
}

impl PartitionMethod {
    /// Whether the method guarantees contiguous clusters.
    pub fn enforces_contiguity(self) -> bool {
        matches!(self, PartitionMethod::Ssom | PartitionMethod::Planted)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cells: usize,
    pub posts: u64,
    pub positives: u64,
}

impl ClusterSummary {
    /// Pooled positive share. Zero when the cluster carries no post counts.
    pub fn prevalence(&self) -> f64 {
        if self.posts == 0 {
            0.0
        } else {
            self.positives as f64 / self.posts as f64
        }
    }
}

/// Assignment of every occupied cell to exactly one cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    d: Precision,
    method: PartitionMethod,
    assignment: BTreeMap<CellKey, ClusterId>,
    clusters: BTreeMap<ClusterId, ClusterSummary>,
}

impl Partition {
    /// Builds a partition covering exactly the field's occupied cells.
    pub fn new(
        assignment: BTreeMap<CellKey, ClusterId>,
        field: &GridField,
        method: PartitionMethod,
    ) -> Result<Self> {
        if assignment.len() != field.len() || !assignment.keys().all(|k| field.contains(k)) {
            let missing: Vec<CellKey> = field
                .keys()
                .filter(|k| !assignment.contains_key(k))
                .chain(assignment.keys().filter(|k| !field.contains(k)))
                .copied()
                .collect();
            return Err(Error::CellMismatch(missing));
        }
        let mut p = Partition::from_assignment(field.precision(), assignment, method);
        p.attach_counts(field);
        Ok(p)
    }

    /// Partition without post counts (prevalences read as zero until
    /// [`attach_counts`](Self::attach_counts) is called).
    pub fn from_assignment(
        d: Precision,
        assignment: BTreeMap<CellKey, ClusterId>,
        method: PartitionMethod,
    ) -> Self {
        let mut clusters: BTreeMap<ClusterId, ClusterSummary> = BTreeMap::new();
        for c in assignment.values() {
            clusters
                .entry(*c)
                .or_insert(ClusterSummary {
                    cells: 0,
                    posts: 0,
                    positives: 0,
                })
                .cells += 1;
        }
        Partition {
            d,
            method,
            assignment,
            clusters,
        }
    }

    /// Recomputes per-cluster post totals from `field`; cells absent from the field add nothing.
    pub fn attach_counts(&mut self, field: &GridField) {
        for s in self.clusters.values_mut() {
            s.posts = 0;
            s.positives = 0;
        }
        for (k, c) in &self.assignment {
            if let Some(counts) = field.get(k) {
                let s = self.clusters.get_mut(c).expect("cluster summary");
                s.posts += counts.total;
                s.positives += counts.positive;
            }
        }
    }

    pub fn precision(&self) -> Precision {
        self.d
    }

    pub fn method(&self) -> PartitionMethod {
        self.method
    }

    pub fn assignment(&self) -> &BTreeMap<CellKey, ClusterId> {
        &self.assignment
    }

    pub fn clusters(&self) -> &BTreeMap<ClusterId, ClusterSummary> {
        &self.clusters
    }

    pub fn cluster_of(&self, key: &CellKey) -> Option<ClusterId> {
        self.assignment.get(key).copied()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn prevalence(&self, cluster: ClusterId) -> Option<f64> {
        self.clusters.get(&cluster).map(ClusterSummary::prevalence)
    }

    /// Member cells grouped by cluster.
    pub fn members(&self) -> BTreeMap<ClusterId, Vec<CellKey>> {
        let mut out: BTreeMap<ClusterId, Vec<CellKey>> = BTreeMap::new();
        for (k, c) in &self.assignment {
            out.entry(*c).or_default().push(*k);
        }
        out
    }

    /// The same clustering restricted to `keep` (cells not in the partition are ignored).
    pub fn restrict<'a>(&self, keep: impl IntoIterator<Item = &'a CellKey>) -> Partition {
        let assignment = keep
            .into_iter()
            .filter_map(|k| self.assignment.get(k).map(|c| (*k, *c)))
            .collect();
        Partition::from_assignment(self.d, assignment, self.method)
    }

    /// Renumbers clusters 0..k in order of each cluster's smallest cell.
    pub fn canonicalize(&mut self) {
        let mut remap: HashMap<ClusterId, ClusterId> = HashMap::new();
        for c in self.assignment.values() {
            let next = remap.len() as ClusterId;
            remap.entry(*c).or_insert(next);
        }
        for c in self.assignment.values_mut() {
            *c = remap[c];
        }
        self.clusters = std::mem::take(&mut self.clusters)
            .into_iter()
            .map(|(c, s)| (remap[&c], s))
            .collect();
    }

    /// Checks exhaustiveness against `field`: every occupied cell assigned, nothing else.
    pub fn covers_exactly(&self, field: &GridField) -> bool {
        self.assignment.len() == field.len()
            && field.keys().all(|k| self.assignment.contains_key(k))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContiguityReport {
    pub ok: bool,
    pub offending: Vec<ClusterId>,
}

/// Connected-components check of every cluster under τ-adjacency.
pub fn check_contiguity(partition: &Partition, tau: u32) -> ContiguityReport {
    let tau = i64::from(tau);
    let mut offending = Vec::new();
    for (cluster, cells) in partition.members() {
        if cells.len() <= 1 {
            continue;
        }
        let index: HashMap<(i64, i64), usize> = cells
            .iter()
            .enumerate()
            .map(|(i, k)| ((k.lat_q, k.lon_q), i))
            .collect();
        let mut seen = vec![false; cells.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            let k = cells[i];
            if (2 * tau + 1).pow(2) as usize > cells.len() {
                for (j, other) in cells.iter().enumerate() {
                    if !seen[j] && k.chebyshev(other) <= tau as u64 {
                        seen[j] = true;
                        reached += 1;
                        queue.push_back(j);
                    }
                }
            } else {
                for dl in -tau..=tau {
                    for dn in -tau..=tau {
                        if let Some(&j) = index.get(&(k.lat_q + dl, k.lon_q + dn)) {
                            if !seen[j] {
                                seen[j] = true;
                                reached += 1;
                                queue.push_back(j);
                            }
                        }
                    }
                }
            }
        }
        if reached != cells.len() {
            offending.push(cluster);
        }
    }
    ContiguityReport {
        ok: offending.is_empty(),
        offending,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WinnerRule {
    /// Smallest weight distance; ties go to the candidate whose cluster
    /// surrounds the input cell the most.
    #[default]
    Lexicographic,
    /// Smallest product of weight distance and surrounding-cluster size.
    LiteralEq1,
}

impl std::str::FromStr for WinnerRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lexicographic" => Ok(WinnerRule::Lexicographic),
            "literal_eq1" | "literal-eq1" => Ok(WinnerRule::LiteralEq1),
            other => Err(format!("unknown winner rule `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpace {
    /// (total, positive) counts, each min-max scaled to [0, 1] over occupied cells.
    #[default]
    CountsScaled,
    /// Positive proportion in the first component; the second is held at zero.
    Proportions,
}

impl std::str::FromStr for WeightSpace {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "counts_scaled" | "counts-scaled" => Ok(WeightSpace::CountsScaled),
            "proportions" => Ok(WeightSpace::Proportions),
            other => Err(format!("unknown weight space `{other}`")),
        }
    }
}

/// Which cluster size feeds the winner tie-break and the neighborhood width.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSize {
    /// All cells of the cluster.
    #[default]
    Whole,
    /// Only the cluster's cells within τ of the presented cell.
    Window,
}

impl std::str::FromStr for ClusterSize {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "whole" => Ok(ClusterSize::Whole),
            "window" => Ok(ClusterSize::Window),
            other => Err(format!("unknown cluster size `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsomParams {
    pub tau: u32,
    pub t_max: u32,
    pub eta0: f64,
    pub seed: u64,
    pub winner_rule: WinnerRule,
    pub weight_space: WeightSpace,
    pub cluster_size: ClusterSize,
    /// Score difference under which winner candidates count as equally close.
    pub tie_tolerance: f64,
}

impl Default for SsomParams {
    fn default() -> Self {
        SsomParams {
            tau: 3,
            t_max: 50,
            eta0: 0.1,
            seed: 0,
            winner_rule: WinnerRule::Lexicographic,
            weight_space: WeightSpace::CountsScaled,
            cluster_size: ClusterSize::Whole,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
        }
    }
}

impl SsomParams {
    pub fn validate(&self) -> Result<()> {
        if self.tau < 1 {
            return Err(Error::Invalid("tau must be >= 1".into()));
        }
        if self.t_max < 1 {
            return Err(Error::Invalid("t_max must be >= 1".into()));
        }
        if !(self.eta0 > 0.0 && self.eta0 < 1.0) {
            return Err(Error::Invalid(format!(
                "eta0 must be in (0, 1), got {}",
                self.eta0
            )));
        }
        if !(self.tie_tolerance >= 0.0 && self.tie_tolerance.is_finite()) {
            return Err(Error::Invalid(format!(
                "tie tolerance must be finite and >= 0, got {}",
                self.tie_tolerance
            )));
        }
        Ok(())
    }
}

/// η(t) = η0·exp(−t / t_max).
pub fn learning_rate(t: u32, t_max: u32, eta0: f64) -> f64 {
    eta0 * (-(t as f64) / t_max as f64).exp()
}

/// h(d) = exp(−d / (cluster_size + 1)).
pub fn neighborhood(distance: f64, cluster_size: usize) -> f64 {
    (-distance / (cluster_size as f64 + 1.0)).exp()
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Per-cell input vectors in the chosen weight space, in field key order.
pub fn input_vectors(field: &GridField, space: WeightSpace) -> Vec<[f64; 2]> {
    match space {
        WeightSpace::Proportions => field
            .iter()
            .map(|(_, c)| [c.positive as f64 / c.total as f64, 0.0])
            .collect(),
        WeightSpace::CountsScaled => {
            let raw: Vec<[f64; 2]> = field
                .iter()
                .map(|(_, c)| [c.total as f64, c.positive as f64])
                .collect();
            min_max_scale(&raw)
        }
    }
}

fn min_max_scale<const N: usize>(raw: &[[f64; N]]) -> Vec<[f64; N]> {
    let mut lo = [f64::INFINITY; N];
    let mut hi = [f64::NEG_INFINITY; N];
    for v in raw {
        for i in 0..N {
            lo[i] = lo[i].min(v[i]);
            hi[i] = hi[i].max(v[i]);
        }
    }
    raw.iter()
        .map(|v| {
            let mut out = [0.0; N];
            for i in 0..N {
                let span = hi[i] - lo[i];
                out[i] = if span > 0.0 {
                    (v[i] - lo[i]) / span
                } else {
                    0.0
                };
            }
            out
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub t: u32,
    pub eta: f64,
    /// Mean distance between each cell's input and its cluster's weight.
    pub quantization_error: f64,
    pub clusters: usize,
    /// Cells that changed cluster during the cycle.
    pub moves: usize,
}

/// Organization state: one node per occupied cell, cluster-shared weights.
#[derive(Clone, Debug)]
pub struct SsomState {
    keys: Vec<CellKey>,
    inputs: Vec<[f64; 2]>,
    /// Nodes within τ (Chebyshev) of each node, including itself, ascending.
    candidates: Vec<Vec<usize>>,
    cluster_of: Vec<ClusterId>,
    members: Vec<Vec<usize>>,
    weights: Vec<[f64; 2]>,
    tau: u32,
    mark: Vec<u32>,
    stamp: u32,
}

impl SsomState {
    /// Singleton clusters numbered in key order, each weighted by its own input.
    pub fn new(field: &GridField, params: &SsomParams) -> Result<Self> {
        params.validate()?;
        let keys: Vec<CellKey> = field.keys().copied().collect();
        let inputs = input_vectors(field, params.weight_space);
        let n = keys.len();
        let cluster_of = (0..n as ClusterId).collect();
        let weights = inputs.clone();
        SsomState::from_parts(keys, inputs, cluster_of, weights, params.tau)
    }

    /// Assembles a state from explicit nodes; `weights` is indexed by cluster id.
    pub fn from_parts(
        keys: Vec<CellKey>,
        inputs: Vec<[f64; 2]>,
        cluster_of: Vec<ClusterId>,
        weights: Vec<[f64; 2]>,
        tau: u32,
    ) -> Result<Self> {
        let n = keys.len();
        if inputs.len() != n || cluster_of.len() != n {
            return Err(Error::Invalid("node arrays differ in length".into()));
        }
        let mut members = vec![Vec::new(); weights.len()];
        for (i, &c) in cluster_of.iter().enumerate() {
            members
                .get_mut(c as usize)
                .ok_or_else(|| Error::Invalid(format!("cluster {c} has no weight")))?
                .push(i);
        }
        let index: HashMap<(i64, i64), usize> = keys
            .iter()
            .enumerate()
            .map(|(i, k)| ((k.lat_q, k.lon_q), i))
            .collect();
        if index.len() != n {
            return Err(Error::Invalid("duplicate cell keys".into()));
        }
        let t = i64::from(tau);
        let candidates = keys
            .iter()
            .map(|k| {
                let mut c: Vec<usize> = (-t..=t)
                    .flat_map(|dl| (-t..=t).map(move |dn| (dl, dn)))
                    .filter_map(|(dl, dn)| index.get(&(k.lat_q + dl, k.lon_q + dn)).copied())
                    .collect();
                c.sort_unstable();
                c
            })
            .collect();
        Ok(SsomState {
            keys,
            inputs,
            candidates,
            cluster_of,
            members,
            weights,
            tau,
            mark: vec![0; n],
            stamp: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn tau(&self) -> u32 {
        self.tau
    }

    pub fn key(&self, node: usize) -> CellKey {
        self.keys[node]
    }

    pub fn input(&self, node: usize) -> [f64; 2] {
        self.inputs[node]
    }

    pub fn cluster_of(&self, node: usize) -> ClusterId {
        self.cluster_of[node]
    }

    /// A node's weight, which is its cluster's shared weight.
    pub fn node_weight(&self, node: usize) -> [f64; 2] {
        self.weights[self.cluster_of[node] as usize]
    }

    pub fn cluster_weight(&self, cluster: ClusterId) -> Option<[f64; 2]> {
        self.weights.get(cluster as usize).copied()
    }

    pub fn cluster_size(&self, cluster: ClusterId) -> usize {
        self.members.get(cluster as usize).map_or(0, Vec::len)
    }

    pub fn cluster_count(&self) -> usize {
        self.members.iter().filter(|m| !m.is_empty()).count()
    }

    pub fn candidates(&self, node: usize) -> &[usize] {
        &self.candidates[node]
    }

    /// How many of `node`'s candidates belong to each cluster present among them.
    pub fn surrounding_counts(&self, node: usize) -> Vec<(ClusterId, usize)> {
        let mut counts: Vec<(ClusterId, usize)> = Vec::new();
        for &j in &self.candidates[node] {
            let c = self.cluster_of[j];
            match counts.iter_mut().find(|(id, _)| *id == c) {
                Some(e) => e.1 += 1,
                None => counts.push((c, 1)),
            }
        }
        counts
    }

    fn size_for(&self, c: ClusterId, window: &[(ClusterId, usize)], size: ClusterSize) -> usize {
        match size {
            ClusterSize::Whole => self.members[c as usize].len(),
            ClusterSize::Window => window.iter().find(|e| e.0 == c).map_or(0, |e| e.1),
        }
    }

    pub fn quantization_error(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let total: f64 = (0..self.len())
            .map(|i| euclid(self.node_weight(i), self.inputs[i]))
            .sum();
        total / self.len() as f64
    }

    /// Best-matching node for input cell `v` among the nodes within τ of it.
    /// Candidates scoring within `tie_tolerance` of the best are tied; ties go to
    /// the larger cluster, then the smaller cluster id, then the node nearest `v`.
    pub fn find_winner(
        &self,
        v: usize,
        rule: WinnerRule,
        size: ClusterSize,
        tie_tolerance: f64,
    ) -> usize {
        let counts = self.surrounding_counts(v);
        let target = self.inputs[v];
        let vk = self.keys[v];
        let scored: Vec<(usize, f64, usize)> = self.candidates[v]
            .iter()
            .map(|&j| {
                let c = self.cluster_of[j];
                let cnt = self.size_for(c, &counts, size);
                let dist = euclid(self.weights[c as usize], target);
                let score = match rule {
                    WinnerRule::Lexicographic => dist,
                    WinnerRule::LiteralEq1 => dist * cnt as f64,
                };
                (j, score, cnt)
            })
            .collect();
        let best = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        scored
            .iter()
            .filter(|s| s.1 <= best + tie_tolerance)
            .min_by_key(|&&(j, _, cnt)| {
                (
                    std::cmp::Reverse(cnt),
                    self.cluster_of[j],
                    self.keys[j].chebyshev(&vk),
                    j,
                )
            })
            .expect("candidate set contains the input node")
            .0
    }

    /// Moves every candidate of `v` toward `v`'s input, reconciles each touched
    /// cluster to the mean of its members, then puts `v` in the winner's cluster.
    /// Returns whether `v` changed cluster.
    pub fn update_weights(&mut self, winner: usize, v: usize, t: u32, params: &SsomParams) -> bool {
        let eta = learning_rate(t, params.t_max, params.eta0);
        let counts = self.surrounding_counts(v);
        let presented = self.inputs[v];
        let wk = self.keys[winner];
        let mut deltas: Vec<(ClusterId, [f64; 2])> = Vec::with_capacity(counts.len());
        for &j in &self.candidates[v] {
            let c = self.cluster_of[j];
            let cnt = self.size_for(c, &counts, params.cluster_size);
            let h = neighborhood(wk.chebyshev(&self.keys[j]) as f64, cnt);
            let w = self.weights[c as usize];
            let step = [
                eta * h * (presented[0] - w[0]),
                eta * h * (presented[1] - w[1]),
            ];
            match deltas.iter_mut().find(|e| e.0 == c) {
                Some(e) => {
                    e.1[0] += step[0];
                    e.1[1] += step[1];
                }
                None => deltas.push((c, step)),
            }
        }
        for (c, sum) in deltas {
            let size = self.members[c as usize].len() as f64;
            let w = &mut self.weights[c as usize];
            w[0] += sum[0] / size;
            w[1] += sum[1] / size;
        }
        let to = self.cluster_of[winner];
        let from = self.cluster_of[v];
        if to == from {
            return false;
        }
        let moved = self.weights[from as usize];
        let n_to = self.members[to as usize].len() as f64;
        let w = &mut self.weights[to as usize];
        w[0] += (moved[0] - w[0]) / (n_to + 1.0);
        w[1] += (moved[1] - w[1]) / (n_to + 1.0);
        self.cluster_of[v] = to;
        self.members[to as usize].push(v);
        let m = &mut self.members[from as usize];
        let pos = m.iter().position(|&x| x == v).expect("member");
        m.swap_remove(pos);
        self.split_if_disconnected(from, v);
        true
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 1;
        }
        self.stamp
    }

    /// Breaks `cluster` into τ-connected components after `removed` left it.
    /// The component holding the smallest node keeps the id; others get fresh ids
    /// and inherit the shared weight.
    fn split_if_disconnected(&mut self, cluster: ClusterId, removed: usize) {
        let c = cluster as usize;
        let nbrs: Vec<usize> = self.candidates[removed]
            .iter()
            .copied()
            .filter(|&j| j != removed && self.cluster_of[j] == cluster)
            .collect();
        if nbrs.len() <= 1 {
            return;
        }
        let stamp = self.next_stamp();
        let mut queue = VecDeque::from([nbrs[0]]);
        self.mark[nbrs[0]] = stamp;
        let mut pending = nbrs.len() - 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.candidates[i] {
                if self.cluster_of[j] == cluster && self.mark[j] != stamp {
                    self.mark[j] = stamp;
                    if nbrs.contains(&j) {
                        pending -= 1;
                        if pending == 0 {
                            return;
                        }
                    }
                    queue.push_back(j);
                }
            }
        }
        // disconnected: relabel every component but the one with the smallest node
        let mut nodes = std::mem::take(&mut self.members[c]);
        nodes.sort_unstable();
        let stamp = self.next_stamp();
        let weight = self.weights[c];
        let mut first = true;
        for &start in &nodes {
            if self.mark[start] == stamp {
                continue;
            }
            let id = if first {
                cluster
            } else {
                self.weights.push(weight);
                self.members.push(Vec::new());
                (self.weights.len() - 1) as ClusterId
            };
            first = false;
            let mut comp = vec![start];
            self.mark[start] = stamp;
            let mut q = VecDeque::from([start]);
            while let Some(i) = q.pop_front() {
                for &j in &self.candidates[i] {
                    if self.cluster_of[j] == cluster && self.mark[j] != stamp {
                        self.mark[j] = stamp;
                        comp.push(j);
                        q.push_back(j);
                    }
                }
            }
            for &i in &comp {
                self.cluster_of[i] = id;
            }
            // relabelled nodes no longer match `cluster` in later searches
            self.members[id as usize] = comp;
        }
    }

    /// One organization cycle: every cell presented once in shuffled order.
    pub fn cycle(&mut self, t: u32, params: &SsomParams, rng: &mut ChaCha8Rng) -> CycleStats {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(rng);
        let mut moves = 0;
        for v in order {
            let w = self.find_winner(
                v,
                params.winner_rule,
                params.cluster_size,
                params.tie_tolerance,
            );
            if self.update_weights(w, v, t, params) {
                moves += 1;
            }
        }
        CycleStats {
            t,
            eta: learning_rate(t, params.t_max, params.eta0),
            quantization_error: self.quantization_error(),
            clusters: self.cluster_count(),
            moves,
        }
    }

    pub fn to_partition(&self, field: &GridField) -> Result<Partition> {
        let assignment = self
            .keys
            .iter()
            .zip(&self.cluster_of)
            .map(|(k, c)| (*k, *c))
            .collect();
        let mut p = Partition::new(assignment, field, PartitionMethod::Ssom)?;
        p.canonicalize();
        Ok(p)
    }
}

/// Runs the contiguity-constrained SOM and returns the partition plus per-cycle stats.
pub fn run_ssom_traced(
    field: &GridField,
    params: &SsomParams,
) -> Result<(Partition, Vec<CycleStats>)> {
    if field.is_empty() {
        return Err(Error::Invalid("cannot partition an empty field".into()));
    }
    let mut state = SsomState::new(field, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let stats = (0..params.t_max)
        .map(|t| state.cycle(t, params, &mut rng))
        .collect();
    Ok((state.to_partition(field)?, stats))
}

pub fn run_ssom(field: &GridField, params: &SsomParams) -> Result<Partition> {
    run_ssom_traced(field, params).map(|(p, _)| p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SomParams {
    /// Node lattice size; `None` picks 2·⌈g^¼⌉ per side.
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub t_max: u32,
    pub eta0: f64,
    /// Initial neighborhood radius in lattice units; `None` uses half the larger side.
    pub sigma0: Option<f64>,
    pub seed: u64,
}

impl Default for SomParams {
    fn default() -> Self {
        SomParams {
            rows: None,
            cols: None,
            t_max: 50,
            eta0: 0.1,
            sigma0: None,
            seed: 0,
        }
    }
}

/// Standard Kohonen SOM on (total, positive, lat, lon), each min-max scaled.
/// Cells sharing a best-matching node form a cluster; contiguity is not enforced.
pub fn run_traditional_som(field: &GridField, params: &SomParams) -> Result<Partition> {
    if field.is_empty() {
        return Err(Error::Invalid("cannot partition an empty field".into()));
    }
    if params.t_max < 1 || !(params.eta0 > 0.0 && params.eta0 < 1.0) {
        return Err(Error::Invalid(
            "SOM needs t_max >= 1 and eta0 in (0, 1)".into(),
        ));
    }
    let raw: Vec<[f64; 4]> = field
        .iter()
        .map(|(k, c)| {
            [
                c.total as f64,
                c.positive as f64,
                k.lat_q as f64,
                k.lon_q as f64,
            ]
        })
        .collect();
    let inputs = min_max_scale(&raw);
    let side = 2 * ((field.len() as f64).powf(0.25).ceil() as usize).max(1);
    let rows = params.rows.unwrap_or(side).max(1);
    let cols = params.cols.unwrap_or(side).max(1);
    let sigma0 = params
        .sigma0
        .unwrap_or(rows.max(cols) as f64 / 2.0)
        .max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut nodes: Vec<[f64; 4]> = (0..rows * cols)
        .map(|_| [rng.gen(), rng.gen(), rng.gen(), rng.gen()])
        .collect();
    let bmu = |nodes: &[[f64; 4]], x: &[f64; 4]| {
        let mut best = (0usize, f64::INFINITY);
        for (i, w) in nodes.iter().enumerate() {
            let d: f64 = (0..4).map(|k| (w[k] - x[k]).powi(2)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    };
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    for t in 0..params.t_max {
        let decay = (-(t as f64) / params.t_max as f64).exp();
        let eta = params.eta0 * decay;
        let sigma = sigma0 * decay;
        order.shuffle(&mut rng);
        for &i in &order {
            let x = inputs[i];
            let b = bmu(&nodes, &x);
            let (br, bc) = ((b / cols) as f64, (b % cols) as f64);
            for (n, w) in nodes.iter_mut().enumerate() {
                let (r, c) = ((n / cols) as f64, (n % cols) as f64);
                let d2 = (r - br).powi(2) + (c - bc).powi(2);
                let h = (-d2 / (2.0 * sigma * sigma)).exp();
                if h < 1e-12 {
                    continue;
                }
                for k in 0..4 {
                    w[k] += eta * h * (x[k] - w[k]);
                }
            }
        }
    }
    let assignment = field
        .keys()
        .zip(&inputs)
        .map(|(k, x)| (*k, bmu(&nodes, x) as ClusterId))
        .collect();
    let mut p = Partition::new(assignment, field, PartitionMethod::TraditionalSom)?;
    p.canonicalize();
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonPartition {
    pub partition: Partition,
    /// Cluster id → polygon name.
    pub names: BTreeMap<ClusterId, String>,
    /// Cells whose center no polygon contained; assigned to the nearest centroid.
    pub uncovered: usize,
}

/// One cluster per distinct polygon name, by cell-center containment. Cluster
/// ids follow the order in which names first appear.
pub fn polygon_partition(field: &GridField, boundary: &BoundarySet) -> Result<PolygonPartition> {
    if boundary.is_empty() {
        return Err(Error::Invalid("boundary set has no polygons".into()));
    }
    let mut name_ids: Vec<&str> = Vec::new();
    let cluster_of_polygon: Vec<ClusterId> = boundary
        .polygons
        .iter()
        .map(|p| {
            let pos = name_ids
                .iter()
                .position(|n| *n == p.name)
                .unwrap_or_else(|| {
                    name_ids.push(&p.name);
                    name_ids.len() - 1
                });
            pos as ClusterId
        })
        .collect();
    let centroids: Vec<(f64, f64)> = boundary.polygons.iter().map(|p| p.centroid()).collect();
    let mut uncovered = 0;
    let mut assignment = BTreeMap::new();
    for key in field.keys() {
        let (lat, lon) = key.center();
        let idx = match boundary.polygons.iter().position(|p| p.contains(lat, lon)) {
            Some(i) => i,
            None => {
                uncovered += 1;
                centroids
                    .iter()
                    .enumerate()
                    .map(|(i, (clat, clon))| (i, (clat - lat).powi(2) + (clon - lon).powi(2)))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .map(|(i, _)| i)
                    .expect("non-empty boundary")
            }
        };
        assignment.insert(*key, cluster_of_polygon[idx]);
    }
    let partition = Partition::new(assignment, field, PartitionMethod::Polygon)?;
    let names = partition
        .clusters()
        .keys()
        .map(|&c| (c, name_ids[c as usize].to_string()))
        .collect();
    Ok(PolygonPartition {
        partition,
        names,
        uncovered,
    })
}
