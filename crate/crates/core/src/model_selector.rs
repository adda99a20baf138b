//! CART classification tree mapping explanatory variables to a cluster.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{DayOfWeek, DayRecord};

pub use crate::pipeline::{select_num_clusters, ClusterSelection, CvPoint};

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("empty training set")]
    Empty,
    #[error("labels ({labels}) and feature rows ({rows}) differ in length")]
    Length { labels: usize, rows: usize },
    #[error("feature {index} missing (record has {available} numeric features)")]
    MissingFeature { index: usize, available: usize },
}

/// Explanatory features of one day at one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub day_of_week: DayOfWeek,
    /// Outdoor temperature at t, daily mean outdoor temperature, solar at t, then extras.
    pub numeric: Vec<f64>,
}

pub const NUMERIC_FEATURES: [&str; 3] = ["outdoor_temp", "daily_mean_outdoor_temp", "solar"];

impl FeatureRow {
    pub fn from_day(day: &DayRecord, t: usize) -> Self {
        let e = &day.explanatory[t - 1];
        let mean = day.explanatory.iter().map(|e| e.outdoor_temp).sum::<f64>() / day.explanatory.len() as f64;
        let mut numeric = vec![e.outdoor_temp, mean, e.solar_irradiation];
        numeric.extend_from_slice(&e.extra);
        Self { day_of_week: e.day_of_week, numeric }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 6, min_leaf: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: usize,
        counts: Vec<usize>,
    },
    /// Goes left when `numeric[feature] < threshold`.
    Numeric {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Goes left when the day of week is in `left_days` (bit i = `DayOfWeek::from_index(i)`).
    DayOfWeek {
        left_days: u8,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorTree {
    pub t: usize,
    pub num_classes: usize,
    pub nodes: Vec<Node>,
    pub training_accuracy: f64,
}

fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    // Lowest label wins ties.
    counts.iter().enumerate().fold(0, |best, (i, &c)| if c > counts[best] { i } else { best })
}

struct Split {
    impurity: f64,
    node: Node,
    left: Vec<usize>,
    right: Vec<usize>,
}

struct Builder<'a> {
    rows: &'a [FeatureRow],
    labels: &'a [usize],
    num_classes: usize,
    params: TreeParams,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.num_classes];
        for &i in idx {
            c[self.labels[i]] += 1;
        }
        c
    }

    fn weighted(&self, left: &[usize], right: &[usize]) -> f64 {
        let n = (left.len() + right.len()) as f64;
        (left.len() as f64 * gini(&self.counts(left)) + right.len() as f64 * gini(&self.counts(right))) / n
    }

    fn best_split(&self, idx: &[usize]) -> Option<Split> {
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<Split> = None;
        let consider = |s: Split, best: &mut Option<Split>| {
            if s.left.len() >= min_leaf
                && s.right.len() >= min_leaf
                && best.as_ref().map_or(true, |b| s.impurity < b.impurity - 1e-12)
            {
                *best = Some(s);
            }
        };

        // Day of week: every subset of the days present that contains the first present day.
        let present: Vec<usize> = (0..7).filter(|&d| idx.iter().any(|&i| self.rows[i].day_of_week.index() == d)).collect();
        if present.len() > 1 {
            let m = present.len();
            for mask in 0..(1u32 << (m - 1)) {
                let mut days = 1u8 << present[0];
                for (b, &d) in present[1..].iter().enumerate() {
                    if mask & (1 << b) != 0 {
                        days |= 1 << d;
                    }
                }
                if days.count_ones() as usize == m {
                    continue;
                }
                let (left, right): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| days & (1 << self.rows[i].day_of_week.index()) != 0);
                let impurity = self.weighted(&left, &right);
                consider(Split { impurity, node: Node::DayOfWeek { left_days: days, left: 0, right: 0 }, left, right }, &mut best);
            }
        }

        let nfeat = idx.iter().map(|&i| self.rows[i].numeric.len()).min().unwrap_or(0);
        for f in 0..nfeat {
            let mut vals: Vec<f64> = idx.iter().map(|&i| self.rows[i].numeric[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let threshold = 0.5 * (w[0] + w[1]);
                let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.rows[i].numeric[f] < threshold);
                let impurity = self.weighted(&left, &right);
                consider(Split { impurity, node: Node::Numeric { feature: f, threshold, left: 0, right: 0 }, left, right }, &mut best);
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { label: majority(&counts), counts: counts.clone() });
        let parent = gini(&counts);
        if depth >= self.params.max_depth || parent == 0.0 {
            return id;
        }
        let Some(split) = self.best_split(&idx) else { return id };
        if split.impurity >= parent - 1e-12 {
            return id;
        }
        let l = self.grow(split.left, depth + 1);
        let r = self.grow(split.right, depth + 1);
        self.nodes[id] = match split.node {
            Node::Numeric { feature, threshold, .. } => Node::Numeric { feature, threshold, left: l, right: r },
            Node::DayOfWeek { left_days, .. } => Node::DayOfWeek { left_days, left: l, right: r },
            leaf => leaf,
        };
        id
    }
}

/// Greedy Gini tree; deterministic given the data (earlier candidates win exact ties).
pub fn train_tree(
    t: usize,
    rows: &[FeatureRow],
    labels: &[usize],
    num_classes: usize,
    params: TreeParams,
) -> Result<SelectorTree, SelectorError> {
    if rows.is_empty() {
        return Err(SelectorError::Empty);
    }
    if rows.len() != labels.len() {
        return Err(SelectorError::Length { labels: labels.len(), rows: rows.len() });
    }
    let num_classes = num_classes.max(labels.iter().max().map_or(0, |m| m + 1)).max(1);
    let mut b = Builder { rows, labels, num_classes, params, nodes: Vec::new() };
    b.grow((0..rows.len()).collect(), 0);
    let mut tree = SelectorTree { t, num_classes, nodes: b.nodes, training_accuracy: 0.0 };
    tree.training_accuracy = tree_accuracy(&tree, rows, labels)?;
    Ok(tree)
}

impl SelectorTree {
    pub fn predict_cluster(&self, row: &FeatureRow) -> Result<usize, SelectorError> {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { label, .. } => return Ok(*label),
                Node::Numeric { feature, threshold, left, right } => {
                    let v = *row
                        .numeric
                        .get(*feature)
                        .ok_or(SelectorError::MissingFeature { index: *feature, available: row.numeric.len() })?;
                    i = if v < *threshold { *left } else { *right };
                }
                Node::DayOfWeek { left_days, left, right } => {
                    i = if left_days & (1 << row.day_of_week.index()) != 0 { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn d(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Numeric { left, right, .. } | Node::DayOfWeek { left, right, .. } => {
                    1 + d(nodes, *left).max(d(nodes, *right))
                }
            }
        }
        d(&self.nodes, 0)
    }

    /// Indented if/else listing; clusters are printed 1-based.
    pub fn dump(&self) -> String {
        fn name(f: usize) -> String {
            NUMERIC_FEATURES.get(f).map_or_else(|| format!("extra_{}", f - NUMERIC_FEATURES.len()), |s| s.to_string())
        }
        fn walk(nodes: &[Node], i: usize, indent: usize, out: &mut String) {
            let pad = "  ".repeat(indent);
            match &nodes[i] {
                Node::Leaf { label, .. } => {
                    let _ = writeln!(out, "{pad}cluster {}", label + 1);
                }
                Node::Numeric { feature, threshold, left, right } => {
                    let _ = writeln!(out, "{pad}if {} < {threshold:.3} {{", name(*feature));
                    walk(nodes, *left, indent + 1, out);
                    let _ = writeln!(out, "{pad}}} else {{");
                    walk(nodes, *right, indent + 1, out);
                    let _ = writeln!(out, "{pad}}}");
                }
                Node::DayOfWeek { left_days, left, right } => {
                    let days: Vec<&str> =
                        (0..7).filter(|d| left_days & (1 << d) != 0).map(|d| DayOfWeek::from_index(d).as_str()).collect();
                    let _ = writeln!(out, "{pad}if day_of_week in {{{}}} {{", days.join(","));
                    walk(nodes, *left, indent + 1, out);
                    let _ = writeln!(out, "{pad}}} else {{");
                    walk(nodes, *right, indent + 1, out);
                    let _ = writeln!(out, "{pad}}}");
                }
            }
        }
        let mut s = String::new();
        walk(&self.nodes, 0, 0, &mut s);
        s
    }
}

pub fn tree_accuracy(tree: &SelectorTree, rows: &[FeatureRow], labels: &[usize]) -> Result<f64, SelectorError> {
    if rows.is_empty() {
        return Err(SelectorError::Empty);
    }
    if rows.len() != labels.len() {
        return Err(SelectorError::Length { labels: labels.len(), rows: rows.len() });
    }
    let mut hit = 0;
    for (r, &l) in rows.iter().zip(labels) {
        if tree.predict_cluster(r)? == l {
            hit += 1;
        }
    }
    Ok(hit as f64 / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(dow: DayOfWeek, x: f64) -> FeatureRow {
        FeatureRow { day_of_week: dow, numeric: vec![x, x, 0.0] }
    }

    #[test]
    fn single_class_is_a_leaf() {
        let rows: Vec<_> = (0..10).map(|i| row(DayOfWeek::from_index(i), i as f64)).collect();
        let tree = train_tree(1, &rows, &[2; 10], 3, TreeParams::default()).unwrap();
        assert_eq!(tree.depth(), 0);
        assert_eq!(tree.predict_cluster(&row(DayOfWeek::Sun, 100.0)).unwrap(), 2);
    }

    #[test]
    fn separable_feature_needs_one_split() {
        let rows: Vec<_> = (0..20).map(|i| row(DayOfWeek::Mon, i as f64)).collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 12)).collect();
        let tree = train_tree(1, &rows, &labels, 2, TreeParams::default()).unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.training_accuracy, 1.0);
    }

    #[test]
    fn missing_feature_is_an_error() {
        let rows: Vec<_> = (0..20).map(|i| row(DayOfWeek::Mon, i as f64)).collect();
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 12)).collect();
        let tree = train_tree(1, &rows, &labels, 2, TreeParams::default()).unwrap();
        let bad = FeatureRow { day_of_week: DayOfWeek::Mon, numeric: vec![] };
        assert!(matches!(tree.predict_cluster(&bad), Err(SelectorError::MissingFeature { .. })));
        assert!(train_tree(1, &[], &[], 2, TreeParams::default()).is_err());
    }

    #[test]
    fn accuracy_counts() {
        let rows: Vec<_> = (0..10).map(|i| row(DayOfWeek::Mon, i as f64)).collect();
        let tree = train_tree(1, &rows, &[0; 10], 2, TreeParams::default()).unwrap();
        let labels = [0, 0, 0, 1, 0, 1, 0, 1, 0, 0];
        assert!((tree_accuracy(&tree, &rows, &labels).unwrap() - 0.7).abs() < 1e-15);
    }
}
