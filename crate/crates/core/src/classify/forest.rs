use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax_first, check_xy, ClassifyError};
use crate::codec::{BlobReader, BlobWriter, CodecError};
use crate::numerics::Matrix;
use crate::rng::{Rng, SeedStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub n_trees: usize,
    /// `null` grows until leaves are pure.
    pub max_depth: Option<usize>,
    /// Features tried per split; ⌈√D⌉ when unset.
    pub m_try: Option<usize>,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            max_depth: Some(16),
            m_try: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { histogram: Vec<u64> },
}

/// Nodes in preorder; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    fn leaf_of(&self, row: &[f64]) -> &[u64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { histogram } => return histogram,
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax_first(self.leaf_of(row))
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_trees: usize,
    pub seed: u64,
    pub m_try: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Bootstrap sample of each tree, kept for auditing.
    pub bootstrap: Vec<Vec<usize>>,
}

fn gini(counts: &[u64], total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    m_try: usize,
    max_depth: Option<usize>,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn histogram(&self, rows: &[usize]) -> Vec<u64> {
        let mut h = vec![0u64; self.n_classes];
        for &r in rows {
            h[self.y[r]] += 1;
        }
        h
    }

    /// Best threshold on one feature: (weighted child Gini, threshold), or
    /// `None` if the feature is constant on `rows`.
    fn best_on(&self, rows: &[usize], f: usize, parent: &[u64]) -> Option<(f64, f64)> {
        let mut order: Vec<(f64, usize)> = rows.iter().map(|&r| (self.x[(r, f)], self.y[r])).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let n = order.len() as u64;
        let mut left = vec![0u64; self.n_classes];
        let mut best: Option<(f64, f64)> = None;
        for i in 0..order.len() - 1 {
            left[order[i].1] += 1;
            if order[i].0 == order[i + 1].0 {
                continue;
            }
            let nl = i as u64 + 1;
            let right: Vec<u64> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let score = (nl as f64 * gini(&left, nl) + (n - nl) as f64 * gini(&right, n - nl)) / n as f64;
            let mid = 0.5 * (order[i].0 + order[i + 1].0);
            // Midpoint can round up onto the larger value; keep the split strict.
            let thr = if mid < order[i + 1].0 { mid } else { order[i].0 };
            if best.is_none_or(|b| score < b.0) {
                best = Some((score, thr));
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        let hist = self.histogram(&rows);
        self.nodes.push(Node::Leaf { histogram: hist.clone() });
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || self.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        // Sample features without replacement; keep drawing past m_try until
        // at least one splittable feature has been seen.
        let d = self.x.cols();
        let mut perm: Vec<usize> = (0..d).collect();
        let mut best: Option<(f64, usize, f64)> = None;
        for drawn in 0..d {
            let j = rng.random_range(drawn..d);
            perm.swap(drawn, j);
            let f = perm[drawn];
            if let Some((score, thr)) = self.best_on(&rows, f, &hist) {
                let better = match best {
                    None => true,
                    Some((s, bf, _)) => score < s || (score == s && f < bf),
                };
                if better {
                    best = Some((score, f, thr));
                }
            }
            if drawn + 1 >= self.m_try && best.is_some() {
                break;
            }
        }
        let Some((_, feature, threshold)) = best else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[(i, feature)] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Bagged Gini trees. Tree `t` draws its bootstrap and feature subsets from
/// its own seeded substream, so trees can be grown in parallel.
pub fn rf_train(x: &Matrix, y: &[usize], params: &RfParams, seed: u64) -> Result<ForestModel, ClassifyError> {
    check_xy(x, y)?;
    let n = x.rows();
    if n < 2 {
        return Err(ClassifyError::TooFewSamples { need: 2, got: n });
    }
    let n_classes = y.iter().max().unwrap() + 1;
    if y.iter().all(|&v| v == y[0]) {
        return Err(ClassifyError::SingleClass);
    }
    if params.n_trees == 0 || params.m_try == Some(0) || params.max_depth == Some(0) {
        return Err(ClassifyError::InvalidParameter(format!("{params:?}")));
    }
    let d = x.cols();
    let m_try = params.m_try.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize).clamp(1, d.max(1));
    let stream = SeedStream::new(seed).child("forest");
    let grown: Vec<(DecisionTree, Vec<usize>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.indexed(t as u64).to_rng();
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut b = Builder {
                x,
                y,
                n_classes,
                m_try,
                max_depth: params.max_depth,
                nodes: Vec::new(),
            };
            b.grow(sample.clone(), 0, &mut rng);
            (DecisionTree { nodes: b.nodes }, sample)
        })
        .collect();
    let (trees, bootstrap) = grown.into_iter().unzip();
    Ok(ForestModel {
        trees,
        n_trees: params.n_trees,
        seed,
        m_try,
        n_features: d,
        n_classes,
        bootstrap,
    })
}

impl ForestModel {
    /// Per-class vote counts for one row.
    pub fn votes(&self, row: &[f64]) -> Vec<u64> {
        let mut v = vec![0u64; self.n_classes];
        for t in &self.trees {
            v[t.predict_row(row)] += 1;
        }
        v
    }

    pub(crate) fn encode(&self, w: &mut BlobWriter) {
        w.usize(self.n_trees);
        w.u64(self.seed);
        w.usize(self.m_try);
        w.usize(self.n_features);
        w.usize(self.n_classes);
        for (t, b) in self.trees.iter().zip(&self.bootstrap) {
            w.usizes(b);
            w.usize(t.nodes.len());
            for node in &t.nodes {
                match node {
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        w.u8(0);
                        w.usize(*feature);
                        w.f64(*threshold);
                        w.usize(*left);
                        w.usize(*right);
                    }
                    Node::Leaf { histogram } => {
                        w.u8(1);
                        for &c in histogram {
                            w.u64(c);
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn decode(r: &mut BlobReader) -> Result<Self, CodecError> {
        let n_trees = r.usize()?;
        let seed = r.u64()?;
        let m_try = r.usize()?;
        let n_features = r.usize()?;
        let n_classes = r.usize()?;
        let mut trees = Vec::new();
        let mut bootstrap = Vec::new();
        for _ in 0..n_trees {
            bootstrap.push(r.usizes()?);
            let count = r.usize()?;
            let mut nodes = Vec::new();
            for _ in 0..count {
                nodes.push(match r.u8()? {
                    0 => {
                        let feature = r.usize()?;
                        let threshold = r.f64()?;
                        let left = r.usize()?;
                        let right = r.usize()?;
                        if feature >= n_features || left >= count || right >= count {
                            return Err(CodecError::Invalid("tree node out of range".into()));
                        }
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        }
                    }
                    1 => Node::Leaf {
                        histogram: (0..n_classes).map(|_| r.u64()).collect::<Result<_, _>>()?,
                    },
                    t => return Err(CodecError::Invalid(format!("node tag {t}"))),
                });
            }
            trees.push(DecisionTree { nodes });
        }
        Ok(ForestModel {
            trees,
            n_trees,
            seed,
            m_try,
            n_features,
            n_classes,
            bootstrap,
        })
    }
}

/// Majority vote over trees, ties to the smaller class.
pub fn rf_predict(m: &ForestModel, x: &Matrix) -> Result<Vec<usize>, ClassifyError> {
    if x.cols() != m.n_features {
        return Err(ClassifyError::DimensionMismatch {
            expected: m.n_features,
            got: x.cols(),
        });
    }
    Ok((0..x.rows())
        .into_par_iter()
        .map(|i| argmax_first(&m.votes(x.row(i))))
        .collect())
}
