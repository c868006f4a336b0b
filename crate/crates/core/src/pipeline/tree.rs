//! Binary decision trees shared by the forest and the boosting learner.
//!
//! Training uses a histogram grower over per-feature bins. A column with at
//! most [`MAX_BINS`] distinct training values gets one bin per value, so
//! split search is exact there; wider columns are cut at quantiles. Cut
//! points are midpoints between adjacent training values and a row goes left
//! iff `x <= threshold`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::scalar::Scalar;

pub const MAX_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum Node<T> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        value: T,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    pub fn leaf(value: T) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, row: &[T]) -> T {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn map_leaves(&mut self, f: impl Fn(T) -> T) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value = f(*value);
            }
        }
    }
}

/// Column-major bin codes plus the cut points that define them.
pub struct BinnedMatrix<T> {
    codes: Vec<Vec<u8>>,
    cuts: Vec<Vec<T>>,
}

impl<T: Scalar> BinnedMatrix<T> {
    pub fn new(x: &Matrix<T>) -> Self {
        let n = x.n_rows();
        let mut codes = Vec::with_capacity(x.n_cols());
        let mut cuts = Vec::with_capacity(x.n_cols());
        let mut col: Vec<T> = Vec::with_capacity(n);
        for j in 0..x.n_cols() {
            col.clear();
            col.extend((0..n).map(|i| x.get(i, j)));
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
            let c = cut_points(&sorted);
            codes.push(
                col.iter()
                    .map(|v| c.partition_point(|cut| *cut < *v) as u8)
                    .collect(),
            );
            cuts.push(c);
        }
        Self {
            codes,
            cuts,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.cuts.len()
    }

    fn n_bins(&self, j: usize) -> usize {
        self.cuts[j].len() + 1
    }
}

fn cut_points<T: Scalar>(sorted: &[T]) -> Vec<T> {
    let half = T::of(0.5);
    let mut distinct: Vec<T> = sorted.to_vec();
    distinct.dedup();
    if distinct.len() <= MAX_BINS {
        return distinct.windows(2).map(|w| w[0] + (w[1] - w[0]) * half).collect();
    }
    let n = sorted.len();
    let mut cuts = Vec::with_capacity(MAX_BINS - 1);
    for k in 1..MAX_BINS {
        let v = sorted[k * n / MAX_BINS];
        let next = distinct.partition_point(|d| *d <= v);
        if next >= distinct.len() {
            break;
        }
        let cut = v + (distinct[next] - v) * half;
        if cuts.last().is_none_or(|last| *last < cut) {
            cuts.push(cut);
        }
    }
    cuts
}

/// Per-row split statistics `[count, a, b]`, summed over node rows.
pub type Stats<T> = [T; 3];

fn add<T: Scalar>(a: &mut Stats<T>, b: &Stats<T>) {
    for k in 0..3 {
        a[k] = a[k] + b[k];
    }
}

fn sub<T: Scalar>(a: &Stats<T>, b: &Stats<T>) -> Stats<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub trait Criterion<T: Scalar> {
    /// Statistics of one row; `[0]` is its sample weight.
    fn row_stats(&self, row: usize) -> Stats<T>;
    fn gain(&self, parent: &Stats<T>, left: &Stats<T>, right: &Stats<T>) -> T;
    fn leaf_value(&self, stats: &Stats<T>) -> T;
    fn is_pure(&self, stats: &Stats<T>) -> bool;
}

#[derive(Debug, Clone, Copy)]
pub struct GrowParams {
    pub max_depth: Option<usize>,
    /// Minimum total sample weight in each child.
    pub min_leaf: usize,
    /// Features drawn (without replacement) at each split.
    pub features_per_split: usize,
}

/// Nodes with at least this many rows search splits over a full per-node
/// histogram, which children inherit by subtraction, when every feature is
/// a candidate. Smaller nodes bin their rows feature by feature.
const HIST_MIN_ROWS: usize = 256;

/// Grows a tree over `rows` (rows with zero weight should be omitted).
pub fn grow<T: Scalar, C: Criterion<T>, R: Rng>(
    binned: &BinnedMatrix<T>,
    criterion: &C,
    rows: Vec<u32>,
    params: &GrowParams,
    rng: &mut R,
) -> Tree<T> {
    let n_features = binned.n_cols();
    let mut offsets = Vec::with_capacity(n_features + 1);
    offsets.push(0);
    for j in 0..n_features {
        offsets.push(offsets[j] + binned.n_bins(j));
    }
    let mut g = Grower {
        binned,
        criterion,
        params,
        rng,
        nodes: Vec::new(),
        hist: vec![[T::zero(); 3]; MAX_BINS],
        stats: Vec::new(),
        features: (0..n_features).collect(),
        full: params.features_per_split >= n_features,
        offsets,
    };
    let mut rows = rows;
    g.build(&mut rows[..], 0, None);
    Tree { nodes: g.nodes }
}

struct Grower<'a, T: Scalar, C, R> {
    binned: &'a BinnedMatrix<T>,
    criterion: &'a C,
    params: &'a GrowParams,
    rng: &'a mut R,
    nodes: Vec<Node<T>>,
    hist: Vec<Stats<T>>,
    stats: Vec<Stats<T>>,
    features: Vec<usize>,
    /// Every feature is a candidate at every node.
    full: bool,
    /// Start of each feature's bins in a full node histogram.
    offsets: Vec<usize>,
}

impl<T: Scalar, C: Criterion<T>, R: Rng> Grower<'_, T, C, R> {
    fn build(&mut self, rows: &mut [u32], depth: usize, hist: Option<Vec<Stats<T>>>) -> usize {
        let id = self.nodes.len();
        let mut total = [T::zero(); 3];
        for &r in rows.iter() {
            add(&mut total, &self.criterion.row_stats(r as usize));
        }
        self.nodes.push(Node::Leaf {
            value: self.criterion.leaf_value(&total),
        });

        let min_leaf = T::of_usize(self.params.min_leaf.max(1));
        if !self.may_split(&total, depth, min_leaf) {
            return id;
        }
        let (split, hist) = if self.full && rows.len() >= HIST_MIN_ROWS {
            let h = hist.unwrap_or_else(|| self.node_hist(rows));
            (self.best_split_hist(&h, &total, min_leaf), Some(h))
        } else {
            (self.best_split(rows, &total, min_leaf), None)
        };
        let Some((feature, bin)) = split else {
            return id;
        };

        let codes = &self.binned.codes[feature];
        let mut split = 0;
        let mut left_total = [T::zero(); 3];
        for i in 0..rows.len() {
            if codes[rows[i] as usize] as usize <= bin {
                add(&mut left_total, &self.criterion.row_stats(rows[i] as usize));
                rows.swap(i, split);
                split += 1;
            }
        }
        let threshold = self.binned.cuts[feature][bin];
        let (l, r) = rows.split_at_mut(split);
        let (mut left_hist, mut right_hist) = (None, None);
        if let Some(mut parent) = hist {
            let right_total = sub(&total, &left_total);
            let wants = |rows: &[u32], t: &Stats<T>| {
                rows.len() >= HIST_MIN_ROWS && self.may_split(t, depth + 1, min_leaf)
            };
            let (want_l, want_r) = (wants(l, &left_total), wants(r, &right_total));
            if want_l || want_r {
                let left_smaller = l.len() <= r.len();
                let small = self.node_hist(if left_smaller { l } else { r });
                for (p, s) in parent.iter_mut().zip(&small) {
                    *p = sub(p, s);
                }
                let (lh, rh) = if left_smaller { (small, parent) } else { (parent, small) };
                left_hist = want_l.then_some(lh);
                right_hist = want_r.then_some(rh);
            }
        }
        let left = self.build(l, depth + 1, left_hist);
        let right = self.build(r, depth + 1, right_hist);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn may_split(&self, total: &Stats<T>, depth: usize, min_leaf: T) -> bool {
        self.params.max_depth.is_none_or(|d| depth < d)
            && !self.criterion.is_pure(total)
            && total[0] >= min_leaf + min_leaf
    }

    fn node_hist(&mut self, rows: &[u32]) -> Vec<Stats<T>> {
        self.stats.clear();
        self.stats.extend(rows.iter().map(|&r| self.criterion.row_stats(r as usize)));
        let mut h = vec![[T::zero(); 3]; *self.offsets.last().expect("offsets")];
        for (f, codes) in self.binned.codes.iter().enumerate() {
            let bins = &mut h[self.offsets[f]..self.offsets[f + 1]];
            for (&r, s) in rows.iter().zip(&self.stats) {
                add(&mut bins[codes[r as usize] as usize], s);
            }
        }
        h
    }

    fn best_split_hist(&self, h: &[Stats<T>], total: &Stats<T>, min_leaf: T) -> Option<(usize, usize)> {
        let mut best: Option<(T, usize, usize)> = None;
        for f in 0..self.binned.n_cols() {
            let bins = &h[self.offsets[f]..self.offsets[f + 1]];
            scan_bins(self.criterion, bins, 0, bins.len().saturating_sub(1), f, total, min_leaf, &mut best);
        }
        best.map(|(_, f, b)| (f, b))
    }

    fn best_split(&mut self, rows: &[u32], total: &Stats<T>, min_leaf: T) -> Option<(usize, usize)> {
        let n_features = self.features.len();
        let k = self.params.features_per_split.clamp(1, n_features.max(1));
        // Partial Fisher-Yates over the persistent feature list.
        for i in 0..k.min(n_features) {
            let j = self.rng.random_range(i..n_features);
            self.features.swap(i, j);
        }
        let mut candidates: Vec<usize> = self.features[..k.min(n_features)].to_vec();
        candidates.sort_unstable();

        self.stats.clear();
        self.stats.extend(rows.iter().map(|&r| self.criterion.row_stats(r as usize)));
        let mut best: Option<(T, usize, usize)> = None;
        for f in candidates {
            if self.binned.n_bins(f) < 2 {
                continue;
            }
            let codes = &self.binned.codes[f];
            let (mut lo, mut hi) = (u8::MAX, 0u8);
            for (&r, s) in rows.iter().zip(&self.stats) {
                let b = codes[r as usize];
                add(&mut self.hist[b as usize], s);
                lo = lo.min(b);
                hi = hi.max(b);
            }
            scan_bins(self.criterion, &self.hist, lo as usize, hi as usize, f, total, min_leaf, &mut best);
            for h in &mut self.hist[lo as usize..=hi as usize] {
                *h = [T::zero(); 3];
            }
        }
        best.map(|(_, f, b)| (f, b))
    }
}

/// Tries the splits after each non-empty bin in `lo..hi`. A split after an
/// empty bin repeats the previous one, which already won any tie.
#[allow(clippy::too_many_arguments)]
fn scan_bins<T: Scalar, C: Criterion<T>>(
    criterion: &C,
    bins: &[Stats<T>],
    lo: usize,
    hi: usize,
    feature: usize,
    total: &Stats<T>,
    min_leaf: T,
    best: &mut Option<(T, usize, usize)>,
) {
    let mut left = [T::zero(); 3];
    for (b, h) in bins.iter().enumerate().take(hi).skip(lo) {
        if h[0] == T::zero() {
            continue;
        }
        add(&mut left, h);
        if left[0] < min_leaf {
            continue;
        }
        let right = sub(total, &left);
        if right[0] < min_leaf {
            break;
        }
        let gain = criterion.gain(total, &left, &right);
        if best.is_none_or(|(g, _, _)| gain > g) {
            *best = Some((gain, feature, b));
        }
    }
}
