//! Citation environments around a seed journal.
//!
//! The cited environment of a seed is every journal that cites it at or
//! above `threshold_fraction` of the seed's received citations. The citing
//! environment is every journal the seed cites at or above that fraction of
//! its issued citations. Node sizes are shares of all citations flowing
//! inside the environment.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::ingest::{Axis, CitationMatrix, IngestError};

pub const DEFAULT_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum EnvironmentError {
    #[error("seed {seed:?} not found on the {axis} axis")]
    SeedNotFound { seed: String, axis: Axis },
    #[error("empty environment: {seed:?} has no {direction} citations")]
    EmptyEnvironment { seed: String, direction: Direction },
    #[error("threshold fraction {0} outside [0, 1)")]
    Threshold(f64),
    #[error("degenerate environment: no citations among members")]
    Degenerate,
    #[error("journal {journal:?} not found on the {axis} axis")]
    JournalNotFound { journal: String, axis: Axis },
    #[error(transparent)]
    Matrix(#[from] IngestError),
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooShort(usize),
    #[error("zero variance")]
    ZeroVariance,
}

/// Which side of the seed the environment collects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Journals citing the seed.
    Cited,
    /// Journals cited by the seed.
    Citing,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Cited => f.write_str("cited"),
            Direction::Citing => f.write_str("citing"),
        }
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cited" => Ok(Direction::Cited),
            "citing" => Ok(Direction::Citing),
            other => Err(format!("unknown direction {other:?} (expected cited or citing)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub seed: String,
    pub direction: Direction,
    pub members: Vec<String>,
    /// `members` x `members`, same order on both axes.
    pub sub_matrix: CitationMatrix,
    pub threshold_fraction: f64,
}

impl Environment {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn position(&self, journal: &str) -> Option<usize> {
        self.sub_matrix.citing_position(journal)
    }

    /// Citation vector of member `k`: its column (who cites it) in a cited
    /// environment, its row (whom it cites) in a citing one.
    pub fn profile(&self, k: usize) -> Vec<u64> {
        match self.direction {
            Direction::Cited => self.sub_matrix.column(k).collect(),
            Direction::Citing => self.sub_matrix.row(k).to_vec(),
        }
    }

    /// Sum of all in-environment citations.
    pub fn grand_total(&self) -> u64 {
        self.sub_matrix.total()
    }
}

pub fn build_environment(
    m: &CitationMatrix,
    seed: &str,
    direction: Direction,
    threshold_fraction: f64,
) -> Result<Environment, EnvironmentError> {
    if !(0.0..1.0).contains(&threshold_fraction) {
        return Err(EnvironmentError::Threshold(threshold_fraction));
    }
    let seed = crate::ingest::canonicalize(seed);

    // (label, flow) pairs along the candidate axis.
    let flows: Vec<(&String, u64)> = match direction {
        Direction::Cited => {
            let j = m.cited_position(&seed).ok_or_else(|| EnvironmentError::SeedNotFound {
                seed: seed.clone(),
                axis: Axis::Cited,
            })?;
            m.citing_labels().iter().zip(m.column(j)).collect()
        }
        Direction::Citing => {
            let i = m.citing_position(&seed).ok_or_else(|| EnvironmentError::SeedNotFound {
                seed: seed.clone(),
                axis: Axis::Citing,
            })?;
            m.cited_labels().iter().zip(m.row(i).iter().copied()).collect()
        }
    };

    let total: u64 = flows.iter().map(|(_, c)| c).sum();
    if total == 0 {
        return Err(EnvironmentError::EmptyEnvironment { seed, direction });
    }
    let cutoff = threshold_fraction * total as f64;

    let mut members: Vec<String> = flows
        .iter()
        .filter(|(label, count)| **label == seed || (*count > 0 && *count as f64 >= cutoff))
        .map(|(label, _)| (*label).clone())
        .collect();
    if !members.contains(&seed) {
        members.insert(0, seed.clone());
    }

    let sub_matrix = m.restrict(&members)?;
    Ok(Environment {
        seed,
        direction,
        members,
        sub_matrix,
        threshold_fraction,
    })
}

/// Ellipse geometry and C/N share of one environment member.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGeometry {
    pub journal: String,
    /// Vertical axis: share of all in-environment citations.
    pub share_total: f64,
    /// Horizontal axis: the same share with self-citations removed.
    pub share_excl_self: f64,
    /// `share_total` as a percentage.
    pub cn_percent: f64,
}

pub fn cn_values(env: &Environment) -> Result<Vec<NodeGeometry>, EnvironmentError> {
    let m = &env.sub_matrix;
    let raw: Vec<u64> = (0..env.len())
        .map(|k| match env.direction {
            Direction::Cited => m.column(k).sum(),
            Direction::Citing => m.row(k).iter().sum(),
        })
        .collect();
    let grand: u64 = raw.iter().sum();
    if grand == 0 {
        return Err(EnvironmentError::Degenerate);
    }
    let grand = grand as f64;
    Ok(env
        .members
        .iter()
        .zip(&raw)
        .enumerate()
        .map(|(k, (journal, &r))| {
            let share_total = r as f64 / grand;
            NodeGeometry {
                journal: journal.clone(),
                share_total,
                share_excl_self: (r - m.count(k, k)) as f64 / grand,
                cn_percent: 100.0 * share_total,
            }
        })
        .collect())
}

/// Self-citations over citations received.
pub fn self_cite_rate(m: &CitationMatrix, journal: &str) -> Result<f64, EnvironmentError> {
    let i = m.citing_position(journal).ok_or_else(|| EnvironmentError::JournalNotFound {
        journal: journal.to_string(),
        axis: Axis::Citing,
    })?;
    let j = m.cited_position(journal).ok_or_else(|| EnvironmentError::JournalNotFound {
        journal: journal.to_string(),
        axis: Axis::Cited,
    })?;
    let received: u64 = m.column(j).sum();
    if received == 0 {
        return Ok(0.0);
    }
    Ok(m.count(i, j) as f64 / received as f64)
}

/// Pearson product-moment correlation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// S is cited by A 100, B 60 and C once: 161 in total, so C sits below 1%.
    fn four_journals() -> CitationMatrix {
        let l = labels(&["S", "A", "B", "C"]);
        CitationMatrix::new(
            l.clone(),
            l,
            vec![
                vec![0, 5, 5, 0],
                vec![100, 10, 2, 0],
                vec![60, 3, 4, 1],
                vec![1, 0, 0, 7],
            ],
        )
        .unwrap()
    }

    #[test]
    fn threshold_excludes_small_contributors() {
        // cutoff = 0.01 * 161 = 1.61; C contributes 1
        let env = build_environment(&four_journals(), "S", Direction::Cited, 0.01).unwrap();
        assert_eq!(env.members, ["S", "A", "B"]);
        assert_eq!(env.sub_matrix.cited_labels(), env.members.as_slice());
    }

    #[test]
    fn threshold_zero_keeps_every_nonzero_flow() {
        let env = build_environment(&four_journals(), "S", Direction::Cited, 0.0).unwrap();
        assert_eq!(env.members, ["S", "A", "B", "C"]);
    }

    #[test]
    fn exact_threshold_is_retained() {
        // A sends exactly 1% of 100.
        let l = labels(&["S", "A", "B"]);
        let m = CitationMatrix::new(
            l.clone(),
            l,
            vec![vec![0, 0, 0], vec![1, 0, 0], vec![99, 0, 0]],
        )
        .unwrap();
        let env = build_environment(&m, "S", Direction::Cited, 0.01).unwrap();
        assert_eq!(env.members, ["S", "A", "B"]);
    }

    #[test]
    fn seed_errors() {
        let m = CitationMatrix::new(labels(&["A"]), labels(&["S"]), vec![vec![3]]).unwrap();
        let err = build_environment(&m, "S", Direction::Citing, 0.01).unwrap_err();
        assert!(matches!(err, EnvironmentError::SeedNotFound { axis: Axis::Citing, .. }), "{err}");
        assert!(err.to_string().contains("\"S\""));
        let m = CitationMatrix::new(labels(&["S", "A"]), labels(&["S"]), vec![vec![0], vec![0]]).unwrap();
        let err = build_environment(&m, "S", Direction::Cited, 0.01).unwrap_err();
        assert!(err.to_string().starts_with("empty environment"));
        let err = build_environment(&four_journals(), "S", Direction::Cited, 1.0).unwrap_err();
        assert!(matches!(err, EnvironmentError::Threshold(_)));
    }

    #[test]
    fn seed_absent_from_candidate_axis_is_prepended() {
        let m = CitationMatrix::new(labels(&["A", "B"]), labels(&["S"]), vec![vec![3], vec![4]]).unwrap();
        let env = build_environment(&m, "S", Direction::Cited, 0.01).unwrap();
        assert_eq!(env.members, ["S", "A", "B"]);
        assert_eq!(env.sub_matrix.row(0), [0, 0, 0]);
        assert_eq!(env.sub_matrix.column(0).collect::<Vec<_>>(), [0, 3, 4]);
    }

    #[test]
    fn shares_of_two_element_distribution() {
        let l = labels(&["S", "A"]);
        let m = CitationMatrix::new(l.clone(), l, vec![vec![0, 25], vec![75, 0]]).unwrap();
        let env = build_environment(&m, "S", Direction::Cited, 0.0).unwrap();
        let g = cn_values(&env).unwrap();
        assert!((g[0].cn_percent - 75.0).abs() < 1e-12);
        assert!((g[1].cn_percent - 25.0).abs() < 1e-12);
    }

    #[test]
    fn all_self_citations_give_zero_width() {
        let l = labels(&["S", "A"]);
        let m = CitationMatrix::new(l.clone(), l, vec![vec![10, 0], vec![90, 0]]).unwrap();
        let env = build_environment(&m, "S", Direction::Cited, 0.0).unwrap();
        let g = cn_values(&env).unwrap();
        assert_eq!(g[0].journal, "S");
        assert!((g[0].share_total - 1.0).abs() < 1e-12);
        assert!((g[0].share_excl_self - 0.9).abs() < 1e-12);
        // A receives nothing in this environment.
        assert_eq!(g[1].share_total, 0.0);

        let m = CitationMatrix::new(
            labels(&["S", "J"]),
            labels(&["S", "J"]),
            vec![vec![0, 0], vec![90, 10]],
        )
        .unwrap();
        let env = build_environment(&m, "S", Direction::Cited, 0.0).unwrap();
        let g = cn_values(&env).unwrap();
        assert!((g[1].share_total - 0.10).abs() < 1e-12);
        assert_eq!(g[1].share_excl_self, 0.0);
    }

    #[test]
    fn self_cite_rates() {
        let l = labels(&["P", "Q"]);
        let m = CitationMatrix::new(l.clone(), l, vec![vec![99, 3], vec![1, 0]]).unwrap();
        assert!((self_cite_rate(&m, "P").unwrap() - 0.99).abs() < 1e-12);
        assert_eq!(self_cite_rate(&m, "Q").unwrap(), 0.0);
        let z = CitationMatrix::new(labels(&["Z"]), labels(&["Z"]), vec![vec![0]]).unwrap();
        assert_eq!(self_cite_rate(&z, "Z").unwrap(), 0.0);
        assert!(self_cite_rate(&m, "R").is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson_r(&[1., 2., 3.], &[1., 2., 3.]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson_r(&[1., 2., 3.], &[3., 2., 1.]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson_r(&[1., 1., 1.], &[1., 2., 3.]), Err(StatsError::ZeroVariance));
        assert_eq!(pearson_r(&[1., 2.], &[1., 2., 3.]), Err(StatsError::LengthMismatch(2, 3)));
        assert_eq!(pearson_r(&[1.], &[1.]), Err(StatsError::TooShort(1)));
    }

    #[test]
    fn direction_parses() {
        assert_eq!("Cited".parse::<Direction>().unwrap(), Direction::Cited);
        assert!("sideways".parse::<Direction>().is_err());
    }
}
