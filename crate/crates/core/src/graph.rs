//! Weighted interaction graphs and the Laplacian.
//!
//! `a[i][j] > 0` means agent `i` listens to agent `j`, so information flows
//! along `j -> i`. All reachability questions below are asked on that
//! information-flow orientation.

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Nonnegative weighted adjacency structure with no self-loops and at least
/// one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    weights: DMatrix<f64>,
}

/// Degree and Laplacian matrices of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMatrices {
    pub degree: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
}

impl WeightedDigraph {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = weights.shape();
        if rows == 0 {
            return Err(Error::EmptyGraph);
        }
        if rows != cols {
            return Err(Error::DimensionMismatch { n: rows, rows, cols });
        }
        let mut any_edge = false;
        for i in 0..rows {
            for j in 0..cols {
                let w = weights[(i, j)];
                if !w.is_finite() {
                    return Err(Error::NonFiniteWeight { i, j, w });
                }
                if w < 0.0 {
                    return Err(Error::NegativeWeight { i, j, w });
                }
                if i == j && w != 0.0 {
                    return Err(Error::SelfLoop { i, w });
                }
                any_edge |= w > 0.0;
            }
        }
        if !any_edge {
            return Err(Error::NoEdges);
        }
        Ok(Self { weights })
    }

    /// Builds a graph from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { n, rows: n, cols: bad.len() });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    /// Builds a graph of order `n` from `(i, j, a_ij)` triples (0-based).
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = DMatrix::zeros(n, n);
        for &(i, j, a) in edges {
            if i >= n {
                return Err(Error::VertexOutOfRange { index: i, n });
            }
            if j >= n {
                return Err(Error::VertexOutOfRange { index: j, n });
            }
            w[(i, j)] = a;
        }
        Self::new(w)
    }

    /// Undirected graph: every pair `(i, j, w)` sets both `a_ij` and `a_ji`.
    pub fn undirected(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let both: Vec<_> = edges
            .iter()
            .flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)])
            .collect();
        Self::from_edges(n, &both)
    }

    pub fn order(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Neighbor set of agent `i`: the agents it listens to.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.order()).filter(move |&j| self.weights[(i, j)] > 0.0)
    }

    /// Weighted in-degree `d_ii = sum_j a_ij`.
    pub fn degree(&self, i: usize) -> f64 {
        self.weights.row(i).iter().sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.first_asymmetry().is_none()
    }

    fn first_asymmetry(&self) -> Option<(usize, usize)> {
        let n = self.order();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .find(|&(i, j)| self.weights[(i, j)] != self.weights[(j, i)])
    }

    /// Unordered pairs `(i, j)`, `i < j`, with `a_ij > 0`, in lexicographic
    /// order. Meaningful for symmetric graphs.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let n = self.order();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.weights[(i, j)] > 0.0)
            .collect()
    }

    /// Largest single edge weight.
    pub fn max_weight(&self) -> f64 {
        self.weights.max()
    }

    /// Vertices reachable from `root` along information flow.
    pub fn reachable_from(&self, root: usize) -> Vec<bool> {
        let n = self.order();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(u) = queue.pop_front() {
            for i in 0..n {
                if !seen[i] && self.weights[(i, u)] > 0.0 {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        seen
    }

    /// Strongly connected classes that receive no information from outside
    /// themselves. The graph has a spanning tree iff there is exactly one.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let n = self.order();
        let reach: Vec<Vec<bool>> = (0..n).map(|r| self.reachable_from(r)).collect();
        let mut assigned = vec![false; n];
        let mut classes = Vec::new();
        for v in 0..n {
            if assigned[v] {
                continue;
            }
            let class: Vec<usize> = (0..n).filter(|&u| reach[v][u] && reach[u][v]).collect();
            for &u in &class {
                assigned[u] = true;
            }
            let closed = class
                .iter()
                .all(|&i| self.neighbors(i).all(|j| class.contains(&j)));
            if closed {
                classes.push(class);
            }
        }
        classes
    }
}

/// Degree matrix and Laplacian `L = D - A`.
pub fn build_matrices(g: &WeightedDigraph) -> GraphMatrices {
    let n = g.order();
    let degree = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| g.degree(i)));
    let laplacian = &degree - g.weights();
    GraphMatrices { degree, laplacian }
}

/// True iff some vertex reaches every other vertex along information flow.
pub fn has_spanning_tree(g: &WeightedDigraph) -> bool {
    (0..g.order()).any(|r| g.reachable_from(r).iter().all(|&s| s))
}

pub fn is_connected_undirected(g: &WeightedDigraph) -> Result<bool> {
    if let Some((i, j)) = g.first_asymmetry() {
        return Err(Error::AsymmetricGraph {
            i,
            j,
            a_ij: g.weight(i, j),
            a_ji: g.weight(j, i),
        });
    }
    Ok(g.reachable_from(0).iter().all(|&s| s))
}

/// Largest weighted in-degree over `subset`.
pub fn max_degree(g: &WeightedDigraph, subset: &[usize]) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let n = g.order();
    subset.iter().try_fold(f64::NEG_INFINITY, |acc, &i| {
        if i >= n {
            Err(Error::VertexOutOfRange { index: i, n })
        } else {
            Ok(acc.max(g.degree(i)))
        }
    })
}

/// Parses the edge-list text format: a header `n <count>`, then one
/// `i j w` line per edge with 1-based indices meaning `a_ij = w`. `#` starts
/// a comment.
pub fn parse_edge_list(text: &str) -> Result<WeightedDigraph> {
    let mut n: Option<usize> = None;
    let mut weights = DMatrix::zeros(0, 0);
    let mut seen = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| Error::EdgeListParse { line, msg };
        let fields: Vec<&str> = content.split_whitespace().collect();
        let Some(order) = n else {
            match fields.as_slice() {
                ["n", count] => {
                    let c: usize = count
                        .parse()
                        .map_err(|_| err(format!("bad vertex count {count:?}")))?;
                    if c == 0 {
                        return Err(err("vertex count must be positive".into()));
                    }
                    n = Some(c);
                    weights = DMatrix::zeros(c, c);
                    seen = vec![false; c * c];
                    continue;
                }
                _ => return Err(err("expected header `n <count>`".into())),
            }
        };
        let [i, j, w] = fields.as_slice() else {
            return Err(err(format!("expected `i j w`, got {content:?}")));
        };
        let index = |s: &str| -> Result<usize> {
            let v: usize = s.parse().map_err(|_| err(format!("bad vertex index {s:?}")))?;
            if v == 0 || v > order {
                return Err(err(format!("vertex index {v} outside 1..={order}")));
            }
            Ok(v - 1)
        };
        let (i, j) = (index(i)?, index(j)?);
        let w: f64 = w.parse().map_err(|_| err(format!("bad weight {w:?}")))?;
        if seen[i * order + j] {
            return Err(err(format!("duplicate edge {} {}", i + 1, j + 1)));
        }
        seen[i * order + j] = true;
        weights[(i, j)] = w;
    }
    if n.is_none() {
        return Err(Error::EdgeListParse {
            line: 0,
            msg: "missing header `n <count>`".into(),
        });
    }
    WeightedDigraph::new(weights)
}

/// Writes the edge-list format; weights use shortest round-trip formatting so
/// `parse_edge_list(write_edge_list(g)) == g` bit for bit.
pub fn write_edge_list(g: &WeightedDigraph) -> String {
    let n = g.order();
    let mut out = format!("n {n}\n");
    for i in 0..n {
        for j in 0..n {
            let w = g.weight(i, j);
            if w > 0.0 {
                let _ = writeln!(out, "{} {} {:?}", i + 1, j + 1, w);
            }
        }
    }
    out
}
