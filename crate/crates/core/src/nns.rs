//! Exact k-nearest-neighbor search and approximate search over a random
//! binary space partition (RBSP) of the feature points.

use ndarray::ArrayView1;
use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Distance used to rank neighbors in feature space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    #[default]
    Sup,
    L1,
}

impl Norm {
    pub fn distance(self, a: ArrayView1<f64>, b: &[f64]) -> f64 {
        match self {
            Norm::Sup => a.iter().zip(b).fold(0.0, |acc, (x, y)| f64::max(acc, (x - y).abs())),
            Norm::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// k nearest feature points to `query` under the sup-norm.
///
/// Ties at the k-th distance are broken uniformly at random. The result is
/// ordered by (distance, index).
pub fn exact_knn(data: &Dataset, query: &[f64], k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let all: Vec<usize> = (0..data.len()).collect();
    knn_among(data, &all, query, k, Norm::Sup, rng)
}

/// k nearest points among `candidates` (indices into `data`).
pub fn knn_among(
    data: &Dataset,
    candidates: &[usize],
    query: &[f64],
    k: usize,
    norm: Norm,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    if k == 0 || k > candidates.len() {
        return Err(Error::invalid(format!(
            "k = {k} must satisfy 1 <= k <= {} candidates",
            candidates.len()
        )));
    }
    if query.len() != data.dim_x() {
        return Err(Error::invalid(format!(
            "query has dimension {}, data has {}",
            query.len(),
            data.dim_x()
        )));
    }
    let dists: Vec<f64> = candidates.iter().map(|&m| norm.distance(data.x(m), query)).collect();
    let mut scratch = dists.clone();
    let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
    let kth = *kth;

    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut tied: Vec<usize> = Vec::new();
    for (pos, &d) in dists.iter().enumerate() {
        if d < kth {
            chosen.push(pos);
        } else if d == kth {
            tied.push(pos);
        }
    }
    let need = k - chosen.len();
    if need == tied.len() {
        chosen.extend_from_slice(&tied);
    } else {
        chosen.extend(index::sample(rng, tied.len(), need).into_iter().map(|i| tied[i]));
    }
    chosen.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(candidates[a].cmp(&candidates[b])));
    Ok(chosen.into_iter().map(|pos| candidates[pos]).collect())
}

/// Hyperparameters of the random binary space partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbspParams {
    /// Number of slicing rounds; at most `2^depth` parts.
    pub depth: usize,
    pub queries_per_part: usize,
    pub ratio_low: f64,
    pub ratio_high: f64,
    /// Edge ratio above which the longest edge is cut.
    pub r_edge: f64,
    /// Parts are not sliced if a child would drop below this many members.
    pub min_part: usize,
    pub overlap: Overlap,
}

impl Default for RbspParams {
    fn default() -> Self {
        Self {
            depth: 5,
            queries_per_part: 8,
            ratio_low: 0.45,
            ratio_high: 0.55,
            r_edge: 5.0,
            min_part: 64,
            overlap: Overlap::Tight,
        }
    }
}

impl RbspParams {
    /// Defaults with the member floor raised to serve k-NN queries.
    pub fn for_k(k: usize) -> Self {
        Self {
            min_part: k.max(64),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.ratio_low && self.ratio_low <= self.ratio_high && self.ratio_high < 1.0) {
            return Err(Error::invalid(format!(
                "bisecting ratio interval [{}, {}] must lie inside (0, 1)",
                self.ratio_low, self.ratio_high
            )));
        }
        if !(self.r_edge > 1.0) {
            return Err(Error::invalid(format!("r_edge = {} must exceed 1", self.r_edge)));
        }
        if self.min_part == 0 {
            return Err(Error::invalid("min_part must be at least 1"));
        }
        Ok(())
    }
}

/// How child rectangles are formed after a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overlap {
    /// Tight bounding boxes of each child's members.
    #[default]
    Tight,
    /// Children split the parent rectangle at the cut coordinate, so the
    /// parts tile the parent exactly.
    Covering,
}

/// Axis-aligned rectangle given by per-axis bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Rect {
    pub fn unit(dim: usize) -> Self {
        Self {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    fn bounding(data: &Dataset, members: &[usize]) -> Self {
        let dim = data.dim_x();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &m in members {
            for (d, &v) in data.x(m).iter().enumerate() {
                lo[d] = lo[d].min(v);
                hi[d] = hi[d].max(v);
            }
        }
        Self { lo, hi }
    }

    pub fn edges(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.edges().iter().product()
    }

    /// Longest over shortest edge; infinite for a degenerate edge.
    pub fn edge_ratio(&self) -> f64 {
        let edges = self.edges();
        let max = edges.iter().cloned().fold(0.0, f64::max);
        let min = edges.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            1.0
        } else if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Sup-norm distance from `p` to the rectangle.
    pub fn distance(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| (l - v).max(v - h).max(0.0))
            .fold(0.0, f64::max)
    }

    /// A uniform point inside the rectangle.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (l + (h - l) * rng.random::<f64>()).clamp(*l, *h))
            .collect()
    }
}

/// One cell of the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct RbspPart {
    /// Member indices in increasing order.
    pub members: Vec<usize>,
    pub rect: Rect,
}

impl RbspPart {
    /// The root part: every sample, bounded by the unit box.
    pub fn root(data: &Dataset) -> Self {
        Self {
            members: (0..data.len()).collect(),
            rect: Rect::unit(data.dim_x()),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// One random bisection of `part`.
///
/// Picks a uniform axis (the longest one when the edge ratio exceeds
/// `r_edge`), draws `p ~ Uniform([ratio_low, ratio_high])`, and splits the
/// members in axis order at `floor(p n)` clamped to `[1, n - 1]`.
pub fn rbsp_slice(part: &RbspPart, data: &Dataset, params: &RbspParams, rng: &mut Rng) -> Result<(RbspPart, RbspPart)> {
    params.validate()?;
    let n = part.len();
    if n < 2 {
        return Err(Error::invalid(format!("cannot slice a part with {n} member(s)")));
    }
    let dim = data.dim_x();
    let mut axis = rng.random_range(0..dim);
    if part.rect.edge_ratio() > params.r_edge {
        let edges = part.rect.edges();
        axis = (0..dim).fold(0, |best, d| if edges[d] > edges[best] { d } else { best });
    }

    let mut in_part = vec![false; data.len()];
    for &m in &part.members {
        in_part[m] = true;
    }
    let ordered: Vec<usize> = data.sorted_idx(axis).iter().copied().filter(|&m| in_part[m]).collect();

    let p = rng.random_range(params.ratio_low..=params.ratio_high);
    let cut = ((p * n as f64).floor() as usize).clamp(1, n - 1);
    let (left, right) = ordered.split_at(cut);

    let make = |slice: &[usize], rect: Rect| {
        let mut members = slice.to_vec();
        members.sort_unstable();
        RbspPart { members, rect }
    };
    let (left_rect, right_rect) = match params.overlap {
        Overlap::Tight => (Rect::bounding(data, left), Rect::bounding(data, right)),
        Overlap::Covering => {
            let at = 0.5 * (data.x(left[left.len() - 1])[axis] + data.x(right[0])[axis]);
            let mut l = part.rect.clone();
            let mut r = part.rect.clone();
            l.hi[axis] = at;
            r.lo[axis] = at;
            (l, r)
        }
    };
    Ok((make(left, left_rect), make(right, right_rect)))
}

/// Up to `2^depth` parts by repeated slicing, level by level.
///
/// A part stays whole when slicing it would leave a child with fewer than
/// `min_part` members.
pub fn rbsp_partition(data: &Dataset, params: &RbspParams, rng: &mut Rng) -> Result<Vec<RbspPart>> {
    params.validate()?;
    if data.len() < params.min_part {
        return Err(Error::invalid(format!(
            "{} samples cannot fill a part of at least {} members",
            data.len(),
            params.min_part
        )));
    }
    let mut parts = vec![RbspPart::root(data)];
    for _ in 0..params.depth {
        let mut next = Vec::with_capacity(parts.len() * 2);
        for part in parts {
            if part.len() < 2 * params.min_part {
                next.push(part);
                continue;
            }
            let (a, b) = rbsp_slice(&part, data, params, rng)?;
            if a.len() < params.min_part || b.len() < params.min_part {
                next.push(part);
            } else {
                next.push(a);
                next.push(b);
            }
        }
        parts = next;
    }
    Ok(parts)
}

/// Index of the part serving `query`: the smallest-volume rectangle that
/// contains it, else the nearest rectangle; ties go to the lower index.
pub fn route(parts: &[RbspPart], query: &[f64]) -> Result<usize> {
    if parts.is_empty() {
        return Err(Error::invalid("no parts to route to"));
    }
    let containing = parts
        .iter()
        .enumerate()
        .filter(|(_, p)| p.rect.contains(query))
        .fold(None::<(usize, f64)>, |best, (i, p)| {
            let vol = p.rect.volume();
            match best {
                Some((_, v)) if v <= vol => best,
                _ => Some((i, vol)),
            }
        });
    if let Some((i, _)) = containing {
        return Ok(i);
    }
    let mut best = (0, f64::INFINITY);
    for (i, p) in parts.iter().enumerate() {
        let d = p.rect.distance(query);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

/// k-NN restricted to the part that serves `query`.
pub fn anns_knn(
    parts: &[RbspPart],
    data: &Dataset,
    query: &[f64],
    k: usize,
    norm: Norm,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    let part = &parts[route(parts, query)?];
    if part.len() < k {
        return Err(Error::invalid(format!("part with {} members cannot serve k = {k}", part.len())));
    }
    knn_among(data, &part.members, query, k, norm, rng)
}

/// `queries_per_part` uniform query points inside each part's rectangle,
/// part by part.
pub fn part_queries(parts: &[RbspPart], per_part: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    parts
        .iter()
        .flat_map(|p| (0..per_part).map(|_| p.rect.sample(rng)).collect::<Vec<_>>())
        .collect()
}

fn mean_l1(data: &Dataset, idx: &[usize], query: &[f64]) -> f64 {
    idx.iter().map(|&m| Norm::L1.distance(data.x(m), query)).sum::<f64>() / idx.len() as f64
}

/// Excess mean ℓ1 neighbor distance of partition search over exact search,
/// averaged over `queries`. Both searches rank neighbors in ℓ1.
pub fn anns_delta(data: &Dataset, parts: &[RbspPart], queries: &[Vec<f64>], k: usize, rng: &mut Rng) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::invalid("anns_delta needs at least one query"));
    }
    let all: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for q in queries {
        let approx = anns_knn(parts, data, q, k, Norm::L1, rng)?;
        let exact = knn_among(data, &all, q, k, Norm::L1, rng)?;
        total += mean_l1(data, &approx, q) - mean_l1(data, &exact, q);
    }
    Ok(total / queries.len() as f64)
}
