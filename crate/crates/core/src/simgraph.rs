//! Cosine similarity maps over an environment's citation profiles.

use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::environment::{Environment, NodeGeometry};

pub const DEFAULT_SUPPRESSION: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty vectors")]
    Empty,
    #[error("no geometry for member {0:?}")]
    MissingGeometry(String),
    #[error("similarity matrix is {found}x{found}, environment has {expected} members")]
    Dimension { found: usize, expected: usize },
    #[error("similarity matrix not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
}

/// `u·v / (|u||v|)`, or 0 when either vector is zero.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::LengthMismatch(u.len(), v.len()));
    }
    if u.is_empty() {
        return Err(SimilarityError::Empty);
    }
    Ok(cosine_unchecked(u, v))
}

fn cosine_unchecked(u: &[f64], v: &[f64]) -> f64 {
    let (mut dot, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return 0.0;
    }
    (dot / (uu.sqrt() * vv.sqrt())).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalPolicy {
    #[default]
    IncludeSelfCites,
    ZeroDiagonal,
}

impl FromStr for DiagonalPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "include-self-cites" | "include" => Ok(Self::IncludeSelfCites),
            "zero-diagonal" | "zero" => Ok(Self::ZeroDiagonal),
            other => Err(format!(
                "unknown diagonal policy {other:?} (expected include-self-cites or zero-diagonal)"
            )),
        }
    }
}

/// Dense symmetric cosine matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        Self {
            n,
            values: rows.into_iter().flatten().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Per-member profile vectors as used for similarity.
pub fn profiles(env: &Environment, policy: DiagonalPolicy) -> Vec<Vec<f64>> {
    (0..env.len())
        .map(|k| {
            let mut v: Vec<f64> = env.profile(k).into_iter().map(|c| c as f64).collect();
            if policy == DiagonalPolicy::ZeroDiagonal {
                v[k] = 0.0;
            }
            v
        })
        .collect()
}

/// Pairwise cosines between member profiles. Rows of the upper triangle
/// are computed in parallel and mirrored, so the result is exactly
/// symmetric and independent of scheduling.
pub fn similarity_matrix(env: &Environment, policy: DiagonalPolicy) -> SimilarityMatrix {
    let vectors = profiles(env, policy);
    let n = vectors.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| cosine_unchecked(&vectors[i], &vectors[j])).collect())
        .collect();
    let mut values = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (offset, &c) in row.iter().enumerate() {
            let j = i + offset;
            let c = if i == j && c > 0.0 { 1.0 } else { c };
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }
    SimilarityMatrix { n, values }
}

/// Undirected edge between member indices `source < target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    /// Absent for graphs read back from files.
    pub environment: Option<Environment>,
    pub nodes: Vec<NodeGeometry>,
    pub edges: Vec<Edge>,
    pub suppression_threshold: f64,
}

impl SimilarityGraph {
    pub fn label(&self, k: usize) -> &str {
        &self.nodes[k].journal
    }

    pub fn degree(&self, k: usize) -> usize {
        self.edges.iter().filter(|e| e.source == k || e.target == k).count()
    }
}

pub fn build_graph(
    env: &Environment,
    sim: &SimilarityMatrix,
    geometry: &[NodeGeometry],
    suppression_threshold: f64,
) -> Result<SimilarityGraph, SimilarityError> {
    let n = env.len();
    if sim.dim() != n {
        return Err(SimilarityError::Dimension {
            found: sim.dim(),
            expected: n,
        });
    }
    let nodes = env
        .members
        .iter()
        .map(|m| {
            geometry
                .iter()
                .find(|g| &g.journal == m)
                .cloned()
                .ok_or_else(|| SimilarityError::MissingGeometry(m.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let c = sim.get(i, j);
            if c != sim.get(j, i) {
                return Err(SimilarityError::NotSymmetric(i, j));
            }
            if c > 0.0 && c >= suppression_threshold {
                edges.push(Edge {
                    source: i,
                    target: j,
                    cosine: c,
                });
            }
        }
    }
    Ok(SimilarityGraph {
        environment: Some(env.clone()),
        nodes,
        edges,
        suppression_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_environment, cn_values, Direction};
    use crate::ingest::CitationMatrix;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[1., 2., 3.], &[1., 2., 3.]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1., 0.], &[0., 1.]).unwrap(), 0.0);
        assert!((cosine(&[1., 2.], &[2., 1.]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(cosine(&[0., 0.], &[2., 1.]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.], &[1., 2.]), Err(SimilarityError::LengthMismatch(1, 2)));
    }

    fn square(l: &[&str], rows: Vec<Vec<u64>>) -> CitationMatrix {
        CitationMatrix::new(labels(l), labels(l), rows).unwrap()
    }

    #[test]
    fn proportional_columns_have_unit_cosine() {
        let m = square(
            &["S", "A", "B"],
            vec![vec![1, 2, 4], vec![3, 1, 2], vec![2, 0, 0]],
        );
        let env = build_environment(&m, "S", Direction::Cited, 0.0).unwrap();
        let sim = similarity_matrix(&env, DiagonalPolicy::IncludeSelfCites);
        assert!((sim.get(1, 2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn self_only_journal_is_isolated_under_zero_diagonal() {
        let m = square(&["S", "A", "I"], vec![vec![0, 1, 0], vec![5, 2, 0], vec![1, 0, 9]]);
        let env = build_environment(&m, "S", Direction::Cited, 0.0).unwrap();
        let sim = similarity_matrix(&env, DiagonalPolicy::ZeroDiagonal);
        let k = env.position("I").unwrap();
        for j in 0..env.len() {
            assert_eq!(sim.get(k, j), 0.0);
        }
        let with_self = similarity_matrix(&env, DiagonalPolicy::IncludeSelfCites);
        assert_eq!(with_self.get(k, k), 1.0);
    }

    fn geometry_for(names: &[&str]) -> Vec<NodeGeometry> {
        names
            .iter()
            .map(|n| NodeGeometry {
                journal: n.to_string(),
                share_total: 1.0 / names.len() as f64,
                share_excl_self: 0.0,
                cn_percent: 100.0 / names.len() as f64,
            })
            .collect()
    }

    fn three_member_env() -> Environment {
        let m = square(&["A", "B", "C"], vec![vec![1, 1, 1], vec![1, 1, 1], vec![1, 1, 1]]);
        build_environment(&m, "A", Direction::Citing, 0.0).unwrap()
    }

    #[test]
    fn suppression_boundary_and_hand_built_cosines() {
        let env = three_member_env();
        let sim = SimilarityMatrix::from_rows(vec![
            vec![1.0, 0.9, 0.25],
            vec![0.9, 1.0, 0.1],
            vec![0.25, 0.1, 1.0],
        ]);
        let g = build_graph(&env, &sim, &geometry_for(&["A", "B", "C"]), 0.2).unwrap();
        assert_eq!(g.edges.len(), 2);

        let sim = SimilarityMatrix::from_rows(vec![
            vec![1.0, 0.19, 0.20],
            vec![0.19, 1.0, 0.0],
            vec![0.20, 0.0, 1.0],
        ]);
        let g = build_graph(&env, &sim, &geometry_for(&["A", "B", "C"]), 0.2).unwrap();
        assert_eq!(g.edges, [Edge { source: 0, target: 2, cosine: 0.20 }]);

        // threshold 0 drops only zero-cosine pairs
        let g = build_graph(&env, &sim, &geometry_for(&["A", "B", "C"]), 0.0).unwrap();
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn missing_geometry_is_an_error() {
        let env = three_member_env();
        let sim = similarity_matrix(&env, DiagonalPolicy::IncludeSelfCites);
        let err = build_graph(&env, &sim, &geometry_for(&["A", "B"]), 0.2).unwrap_err();
        assert_eq!(err, SimilarityError::MissingGeometry("C".into()));
    }

    #[test]
    fn isolates_keep_their_node() {
        let m = square(&["S", "A", "I"], vec![vec![0, 1, 0], vec![5, 2, 0], vec![1, 0, 9]]);
        let env = build_environment(&m, "S", Direction::Cited, 0.0).unwrap();
        let sim = similarity_matrix(&env, DiagonalPolicy::ZeroDiagonal);
        let g = build_graph(&env, &sim, &cn_values(&env).unwrap(), 0.2).unwrap();
        assert_eq!(g.nodes.len(), 3);
        let k = env.position("I").unwrap();
        assert_eq!(g.degree(k), 0);
    }
}
