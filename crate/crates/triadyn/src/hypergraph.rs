//! 3-uniform hypergraph over a fixed agent set, with its 2-section graph.
//!
//! The 2-section is cached as a support count per pair (how many active
//! triads contain the pair), so removals know when an edge disappears.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted member triple.
pub type Triad = [usize; 3];

pub type Edge = (usize, usize);

/// Builds a sorted triad, rejecting repeated members.
pub fn triad(a: usize, b: usize, c: usize) -> Result<Triad> {
    let mut t = [a, b, c];
    t.sort_unstable();
    if t[0] == t[1] || t[1] == t[2] {
        return Err(Error::InvalidTriad(vec![a, b, c], "members must be distinct"));
    }
    Ok(t)
}

pub fn edge(i: usize, j: usize) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

pub fn triad_pairs(t: &Triad) -> [Edge; 3] {
    [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])]
}

pub fn overlap(a: &Triad, b: &Triad) -> usize {
    a.iter().filter(|x| b.contains(x)).count()
}

/// Default triad coupling as a function of overlap size: edge-sharing
/// triads couple with weight 1, everything else with 0.
pub fn triad_weight(a: &Triad, b: &Triad) -> f64 {
    if a != b && overlap(a, b) == 2 {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HypergraphRepr", into = "HypergraphRepr")]
pub struct TriadicHypergraph {
    n_agents: usize,
    triads: BTreeSet<Triad>,
    support: BTreeMap<Edge, u32>,
    weights: BTreeMap<Edge, f64>,
    adjacency: Vec<BTreeSet<usize>>,
    incident: Vec<BTreeSet<Triad>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HypergraphRepr {
    n_agents: usize,
    triads: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    edge_weights: BTreeMap<String, f64>,
}

impl TryFrom<HypergraphRepr> for TriadicHypergraph {
    type Error = Error;

    fn try_from(r: HypergraphRepr) -> Result<Self> {
        let mut h = TriadicHypergraph::new(r.n_agents);
        for t in r.triads {
            h.add_triad(t)?;
        }
        for (key, w) in r.edge_weights {
            let (a, b) = key
                .split_once('-')
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
                .ok_or_else(|| Error::Parameter(format!("bad edge key '{key}'")))?;
            h.set_edge_weight(a, b, w)?;
        }
        Ok(h)
    }
}

impl From<TriadicHypergraph> for HypergraphRepr {
    fn from(h: TriadicHypergraph) -> Self {
        HypergraphRepr {
            n_agents: h.n_agents,
            triads: h.triads.iter().copied().collect(),
            edge_weights: h
                .weights
                .iter()
                .map(|(&(a, b), &w)| (format!("{a}-{b}"), w))
                .collect(),
        }
    }
}

/// Population averages of the local measures.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GlobalStats {
    pub mean_density: f64,
    pub mean_clustering: f64,
    /// Mean hop distance over reachable ordered pairs `i != j`; `None` if none.
    pub mean_path_length: Option<f64>,
    pub reachable_pairs: usize,
    pub unreachable_pairs: usize,
}

impl TriadicHypergraph {
    pub fn new(n_agents: usize) -> Self {
        TriadicHypergraph {
            n_agents,
            triads: BTreeSet::new(),
            support: BTreeMap::new(),
            weights: BTreeMap::new(),
            adjacency: vec![BTreeSet::new(); n_agents],
            incident: vec![BTreeSet::new(); n_agents],
        }
    }

    pub fn from_triads(n_agents: usize, triads: &[Triad]) -> Result<Self> {
        let mut h = Self::new(n_agents);
        for &t in triads {
            h.add_triad(t)?;
        }
        Ok(h)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_triads(&self) -> usize {
        self.triads.len()
    }

    pub fn n_edges(&self) -> usize {
        self.support.len()
    }

    pub fn triads(&self) -> impl Iterator<Item = &Triad> + '_ {
        self.triads.iter()
    }

    pub fn triad_list(&self) -> Vec<Triad> {
        self.triads.iter().copied().collect()
    }

    pub fn contains(&self, t: &Triad) -> bool {
        self.triads.contains(t)
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.support.keys().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.support.contains_key(&edge(i, j))
    }

    /// Edge weight, or 0 for pairs outside the 2-section.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let e = edge(i, j);
        if self.support.contains_key(&e) {
            self.weights.get(&e).copied().unwrap_or(1.0)
        } else {
            0.0
        }
    }

    /// Overrides the default weight 1.0 for a pair. The override persists
    /// while the pair leaves and re-enters the 2-section.
    pub fn set_edge_weight(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        self.check_agent(i)?;
        self.check_agent(j)?;
        if i == j || !(w >= 0.0) || !w.is_finite() {
            return Err(Error::Parameter(format!("edge weight ({i},{j}) = {w}")));
        }
        self.weights.insert(edge(i, j), w);
        Ok(())
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().copied()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.neighbors(i).map(|j| self.weight(i, j)).sum()
    }

    pub fn triads_of(&self, i: usize) -> impl Iterator<Item = &Triad> + '_ {
        self.incident[i].iter()
    }

    /// Active triads other than `t` sharing at least one member with it.
    /// `t` itself need not be active.
    pub fn triad_neighbors(&self, t: &Triad) -> Vec<Triad> {
        let mut near = BTreeSet::new();
        for &a in t {
            near.extend(self.incident[a].iter().filter(|u| *u != t).copied());
        }
        near.into_iter().collect()
    }

    /// Active triads other than `t` sharing exactly two members with it.
    pub fn triad_edge_neighbors(&self, t: &Triad) -> Vec<Triad> {
        let mut near = BTreeSet::new();
        for &a in t {
            near.extend(self.incident[a].iter().filter(|u| *u != t && overlap(u, t) == 2).copied());
        }
        near.into_iter().collect()
    }

    fn check_agent(&self, i: usize) -> Result<()> {
        if i >= self.n_agents {
            Err(Error::AgentOutOfRange(i, self.n_agents))
        } else {
            Ok(())
        }
    }

    pub fn add_triad(&mut self, t: Triad) -> Result<()> {
        let t = triad(t[0], t[1], t[2])?;
        for &a in &t {
            self.check_agent(a)?;
        }
        if !self.triads.insert(t) {
            return Err(Error::DuplicateTriad(t));
        }
        for (a, b) in triad_pairs(&t) {
            *self.support.entry((a, b)).or_insert(0) += 1;
            self.adjacency[a].insert(b);
            self.adjacency[b].insert(a);
        }
        for &a in &t {
            self.incident[a].insert(t);
        }
        Ok(())
    }

    pub fn remove_triad(&mut self, t: Triad) -> Result<()> {
        let t = triad(t[0], t[1], t[2])?;
        if !self.triads.remove(&t) {
            return Err(Error::InactiveTriad(t));
        }
        for (a, b) in triad_pairs(&t) {
            let s = self.support.get_mut(&(a, b)).expect("support of active pair");
            *s -= 1;
            if *s == 0 {
                self.support.remove(&(a, b));
                self.adjacency[a].remove(&b);
                self.adjacency[b].remove(&a);
            }
        }
        for &a in &t {
            self.incident[a].remove(&t);
        }
        Ok(())
    }

    /// Compares the cached 2-section, adjacency and incidence against a
    /// recomputation from the triad set. Returns a description of the first
    /// mismatch.
    pub fn check_cache(&self) -> Option<String> {
        let fresh = match Self::from_triads(self.n_agents, &self.triad_list()) {
            Ok(h) => h,
            Err(e) => return Some(e.to_string()),
        };
        if fresh.support != self.support {
            return Some("2-section support differs from recomputation".into());
        }
        if fresh.adjacency != self.adjacency {
            return Some("adjacency differs from recomputation".into());
        }
        if fresh.incident != self.incident {
            return Some("incidence differs from recomputation".into());
        }
        None
    }

    /// `|E_i| / C(N-1, 2)`.
    pub fn local_density(&self, i: usize) -> f64 {
        let n = self.n_agents;
        if n < 3 {
            return 0.0;
        }
        let possible = ((n - 1) * (n - 2) / 2) as f64;
        self.incident[i].len() as f64 / possible
    }

    /// Fraction of pairs of agent-`i` triads that share exactly two nodes.
    pub fn clustering_coefficient(&self, i: usize) -> f64 {
        let ts: Vec<&Triad> = self.incident[i].iter().collect();
        if ts.len() < 2 {
            return 0.0;
        }
        let mut hits = 0usize;
        let mut pairs = 0usize;
        for a in 0..ts.len() {
            for b in a + 1..ts.len() {
                pairs += 1;
                if overlap(ts[a], ts[b]) == 2 {
                    hits += 1;
                }
            }
        }
        hits as f64 / pairs as f64
    }

    /// Hop distances from `src` on the 2-section.
    pub fn distances_from(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_agents];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for v in self.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Shortest hop distance; `None` when disconnected.
    pub fn path_length(&self, i: usize, j: usize) -> Option<usize> {
        self.distances_from(i)[j]
    }

    pub fn global_stats(&self) -> GlobalStats {
        let n = self.n_agents.max(1) as f64;
        let mean_density = (0..self.n_agents).map(|i| self.local_density(i)).sum::<f64>() / n;
        let mean_clustering =
            (0..self.n_agents).map(|i| self.clustering_coefficient(i)).sum::<f64>() / n;
        let mut total = 0usize;
        let mut reachable = 0usize;
        let mut unreachable = 0usize;
        for i in 0..self.n_agents {
            for (j, d) in self.distances_from(i).into_iter().enumerate() {
                if i == j {
                    continue;
                }
                match d {
                    Some(d) => {
                        total += d;
                        reachable += 1;
                    }
                    None => unreachable += 1,
                }
            }
        }
        GlobalStats {
            mean_density,
            mean_clustering,
            mean_path_length: (reachable > 0).then(|| total as f64 / reachable as f64),
            reachable_pairs: reachable,
            unreachable_pairs: unreachable,
        }
    }

    /// Connected component label per agent, labels in order of first node.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n_agents];
        let mut next = 0;
        for s in 0..self.n_agents {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// `|V| - |E2| + |E3|`.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_agents as i64 - self.n_edges() as i64 + self.n_triads() as i64
    }

    /// Component count and cycle rank of the 2-section.
    pub fn betti01(&self) -> (usize, usize) {
        let b0 = self.components().iter().copied().max().map_or(0, |m| m + 1);
        let b1 = self.n_edges() + b0 - self.n_agents;
        (b0, b1)
    }

    /// `(Lf)_i = sum_j w_ij (f_i - f_j)`.
    pub fn laplacian_apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n_agents {
            return Err(Error::Dimension { expected: self.n_agents, got: f.len() });
        }
        let mut out = vec![0.0; self.n_agents];
        for (&(i, j), _) in &self.support {
            let w = self.weights.get(&(i, j)).copied().unwrap_or(1.0);
            let d = w * (f[i] - f[j]);
            out[i] += d;
            out[j] -= d;
        }
        Ok(out)
    }

    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        let n = self.n_agents;
        let mut l = DMatrix::zeros(n, n);
        for &(i, j) in self.support.keys() {
            let w = self.weight(i, j);
            l[(i, j)] -= w;
            l[(j, i)] -= w;
            l[(i, i)] += w;
            l[(j, j)] += w;
        }
        l
    }

    /// Ascending Laplacian eigenvalues.
    pub fn laplacian_spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.laplacian_matrix()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Gershgorin bound on the largest Laplacian eigenvalue.
    pub fn lambda_max_bound(&self) -> f64 {
        (0..self.n_agents).map(|i| 2.0 * self.weighted_degree(i)).fold(0.0, f64::max)
    }

    /// `e^{-ell L} f` via a dense symmetric eigendecomposition.
    pub fn heat_kernel_smooth(&self, f: &[f64], ell: f64) -> Result<Vec<f64>> {
        if f.len() != self.n_agents {
            return Err(Error::Dimension { expected: self.n_agents, got: f.len() });
        }
        if !(ell >= 0.0) {
            return Err(Error::Parameter(format!("heat kernel scale {ell} < 0")));
        }
        if ell == 0.0 {
            return Ok(f.to_vec());
        }
        let eig = SymmetricEigen::new(self.laplacian_matrix());
        let q = &eig.eigenvectors;
        let coeff = q.transpose() * DVector::from_column_slice(f);
        let scaled = DVector::from_iterator(
            coeff.len(),
            coeff.iter().zip(eig.eigenvalues.iter()).map(|(c, &l)| c * (-ell * l.max(0.0)).exp()),
        );
        Ok((q * scaled).iter().copied().collect())
    }
}

/// Triad adjacency: any-overlap neighbours, the edge-sharing subset, and
/// coupling weights `w_{tt'}`.
#[derive(Clone, Debug)]
pub struct TriadNeighborhood {
    pub triads: Vec<Triad>,
    pub index: BTreeMap<Triad, usize>,
    /// Neighbours with nonempty intersection, excluding the triad itself.
    pub neighbors: Vec<Vec<usize>>,
    /// Neighbours sharing exactly two members.
    pub edge_neighbors: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
}

impl TriadNeighborhood {
    pub fn build(h: &TriadicHypergraph) -> Self {
        let triads = h.triad_list();
        let index: BTreeMap<Triad, usize> = triads.iter().enumerate().map(|(k, &t)| (t, k)).collect();
        let mut neighbors = vec![Vec::new(); triads.len()];
        let mut edge_neighbors = vec![Vec::new(); triads.len()];
        let mut weights = vec![Vec::new(); triads.len()];
        for (k, t) in triads.iter().enumerate() {
            let mut near = BTreeSet::new();
            for &a in t {
                for u in h.triads_of(a) {
                    if u != t {
                        near.insert(index[u]);
                    }
                }
            }
            for n in near {
                neighbors[k].push(n);
                weights[k].push(triad_weight(t, &triads[n]));
                if overlap(t, &triads[n]) == 2 {
                    edge_neighbors[k].push(n);
                }
            }
        }
        TriadNeighborhood { triads, index, neighbors, edge_neighbors, weights }
    }

    pub fn len(&self) -> usize {
        self.triads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triads.is_empty()
    }

    /// `(L3 f)_t = sum_t' w_tt' (f_t - f_t')`.
    pub fn laplacian_apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: f.len() });
        }
        Ok((0..self.len())
            .map(|k| {
                self.neighbors[k]
                    .iter()
                    .zip(&self.weights[k])
                    .map(|(&n, &w)| w * (f[k] - f[n]))
                    .sum()
            })
            .collect())
    }

    pub fn laplacian_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut l = DMatrix::zeros(n, n);
        for k in 0..n {
            for (&j, &w) in self.neighbors[k].iter().zip(&self.weights[k]) {
                l[(k, j)] -= w;
                l[(k, k)] += w;
            }
        }
        l
    }

    pub fn laplacian_spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.laplacian_matrix()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Serde adapter for triad-keyed maps (JSON object keys must be strings).
pub mod triad_map {
    use super::Triad;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<V: Serialize, S: Serializer>(m: &BTreeMap<Triad, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, V: Deserialize<'de>, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Triad, V>, D::Error> {
        Ok(Vec::<(Triad, V)>::deserialize(d)?.into_iter().collect())
    }
}
