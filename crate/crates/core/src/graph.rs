//! Communication topologies, Metropolis mixing matrices and the spectral gap.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Row/column sum tolerance for a doubly stochastic matrix.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    Ring,
    Star,
    Complete,
    Custom,
}

impl FromStr for TopologyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Self::Ring),
            "star" => Ok(Self::Star),
            "complete" => Ok(Self::Complete),
            "custom" => Ok(Self::Custom),
            other => Err(Error::Topology(format!("unknown graph kind `{other}`"))),
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ring => "ring",
            Self::Star => "star",
            Self::Complete => "complete",
            Self::Custom => "custom",
        })
    }
}

/// Connected undirected graph over nodes `0..n`. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Topology {
    /// Validates an edge list and checks connectivity.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::Topology("node count must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for &(i, j) in edges {
            if i == j {
                return Err(Error::Topology(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::Topology(format!("edge ({i},{j}) references a node >= {n}")));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let topo = Self { n, edges: set };
        let reached = topo.reachable_from(0);
        if reached < n {
            return Err(Error::Disconnected(format!(
                "only {reached} of {n} nodes reachable from node 0"
            )));
        }
        Ok(topo)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == i || b == i).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    fn reachable_from(&self, start: usize) -> usize {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count
    }
}

/// Parses an edge list of the form `"0-1,1-2,2-0"`.
pub fn parse_edge_list(text: &str) -> Result<Vec<(usize, usize)>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (a, b) = pair
                .split_once('-')
                .ok_or_else(|| Error::Topology(format!("edge `{pair}` is not of the form i-j")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Topology(format!("bad node index in edge `{pair}`")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect()
}

/// Builds one of the named graph families. `custom_edges` is only read for [`TopologyKind::Custom`].
pub fn build_topology(
    kind: TopologyKind,
    n: usize,
    custom_edges: Option<&[(usize, usize)]>,
) -> Result<Topology> {
    if n == 0 {
        return Err(Error::Topology("node count must be at least 1".into()));
    }
    let edges: Vec<(usize, usize)> = match kind {
        TopologyKind::Ring => {
            if n == 1 {
                Vec::new()
            } else {
                (0..n).map(|i| (i, (i + 1) % n)).collect()
            }
        }
        // node 0 is the hub
        TopologyKind::Star => (1..n).map(|i| (0, i)).collect(),
        TopologyKind::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        TopologyKind::Custom => custom_edges
            .ok_or_else(|| Error::Topology("custom graph needs an edge list".into()))?
            .to_vec(),
    };
    Topology::from_edges(n, &edges)
}

/// Diagnostic report from [`validate_doubly_stochastic`].
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticityReport {
    pub max_row_deviation: f64,
    pub max_col_deviation: f64,
    pub min_entry: f64,
    pub passed: bool,
}

/// Checks that every row and column of a square matrix sums to one and no entry is negative.
pub fn validate_doubly_stochastic(rows: &[Vec<f64>]) -> StochasticityReport {
    let n = rows.len();
    let mut max_row_deviation: f64 = 0.0;
    let mut max_col_deviation: f64 = 0.0;
    let mut min_entry = f64::INFINITY;
    let square = rows.iter().all(|r| r.len() == n);
    if square {
        for r in rows {
            max_row_deviation = max_row_deviation.max((r.iter().sum::<f64>() - 1.0).abs());
            min_entry = r.iter().copied().fold(min_entry, f64::min);
        }
        for j in 0..n {
            let col: f64 = rows.iter().map(|r| r[j]).sum();
            max_col_deviation = max_col_deviation.max((col - 1.0).abs());
        }
    }
    if n == 0 {
        min_entry = 0.0;
    }
    let passed = square
        && n > 0
        && max_row_deviation <= STOCHASTIC_TOL
        && max_col_deviation <= STOCHASTIC_TOL
        && min_entry >= 0.0;
    StochasticityReport { max_row_deviation, max_col_deviation, min_entry, passed }
}

/// Doubly stochastic weight matrix with its spectral gap cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    w: Vec<Vec<f64>>,
    sigma: f64,
}

impl MixingMatrix {
    /// Accepts any doubly stochastic matrix, not only Metropolis weights.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let report = validate_doubly_stochastic(&rows);
        if !report.passed {
            return Err(Error::Mixing(format!(
                "not doubly stochastic (row dev {:.3e}, col dev {:.3e}, min entry {:.3e})",
                report.max_row_deviation, report.max_col_deviation, report.min_entry
            )));
        }
        let sigma = spectral_norm_of_disagreement(&rows)?;
        Ok(Self { w: rows, sigma })
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.w
    }

    /// `‖W − (1/n)11ᵀ‖₂`
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn validate(&self) -> StochasticityReport {
        validate_doubly_stochastic(&self.w)
    }

    /// `W x` for a scalar per node.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.w
            .iter()
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }
}

/// Metropolis–Hastings weights: `w_ij = 1/(1+max(deg_i,deg_j))` on edges, remainder on the diagonal.
pub fn metropolis_weights(t: &Topology) -> Result<MixingMatrix> {
    let n = t.n();
    let deg = t.degrees();
    let mut w = vec![vec![0.0; n]; n];
    for (i, j) in t.edges() {
        let wij = 1.0 / (1 + deg[i].max(deg[j])) as f64;
        w[i][j] = wij;
        w[j][i] = wij;
    }
    for (i, row) in w.iter_mut().enumerate() {
        let off: f64 = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).sum();
        row[i] = 1.0 - off;
    }
    MixingMatrix::from_rows(w)
}

/// Spectral gap of a mixing matrix (the largest singular value of `W − (1/n)11ᵀ`).
pub fn spectral_gap(m: &MixingMatrix) -> f64 {
    m.sigma()
}

fn spectral_norm_of_disagreement(rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows.len();
    let inv_n = 1.0 / n as f64;
    let centered = DMatrix::from_fn(n, n, |i, j| rows[i][j] - inv_n);
    let symmetric = (0..n).all(|i| (0..i).all(|j| rows[i][j] == rows[j][i]));
    let sigma = if symmetric {
        let eig = centered
            .clone()
            .try_symmetric_eigen(1e-15, 10_000)
            .ok_or_else(|| Error::Eigen("symmetric eigendecomposition did not converge".into()))?;
        eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    } else {
        let svd = centered
            .try_svd(false, false, 1e-15, 10_000)
            .ok_or_else(|| Error::Eigen("singular value decomposition did not converge".into()))?;
        svd.singular_values.iter().fold(0.0_f64, |acc, v| acc.max(*v))
    };
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge_set(t: &Topology) -> Vec<(usize, usize)> {
        t.edges().collect()
    }

    #[test]
    fn complete_three() {
        let t = build_topology(TopologyKind::Complete, 3, None).unwrap();
        assert_eq!(edge_set(&t), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn ring_four() {
        let t = build_topology(TopologyKind::Ring, 4, None).unwrap();
        assert_eq!(edge_set(&t), vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
    }

    #[test]
    fn star_three_has_hub_zero() {
        let t = build_topology(TopologyKind::Star, 3, None).unwrap();
        assert_eq!(edge_set(&t), vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn rejects_zero_nodes_and_disconnected_custom() {
        assert!(matches!(build_topology(TopologyKind::Ring, 0, None), Err(Error::Topology(_))));
        let edges = [(0, 1), (2, 3)];
        assert!(matches!(
            build_topology(TopologyKind::Custom, 4, Some(&edges)),
            Err(Error::Disconnected(_))
        ));
        assert!(build_topology(TopologyKind::Custom, 2, Some(&[(1, 1)])).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        assert_eq!(parse_edge_list("0-1, 1-2,2-0").unwrap(), vec![(0, 1), (1, 2), (2, 0)]);
        assert!(parse_edge_list("0:1").is_err());
    }

    #[test]
    fn metropolis_complete_is_uniform() {
        let m = metropolis_weights(&build_topology(TopologyKind::Complete, 3, None).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((m.weight(i, j) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert!(m.sigma() < 1e-12);
    }

    #[test]
    fn metropolis_ring_four() {
        let m = metropolis_weights(&build_topology(TopologyKind::Ring, 4, None).unwrap()).unwrap();
        assert!((m.weight(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.weight(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.weight(0, 2), 0.0);
        assert!((m.sigma() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn metropolis_star_three() {
        let m = metropolis_weights(&build_topology(TopologyKind::Star, 3, None).unwrap()).unwrap();
        let third = 1.0 / 3.0;
        let expected = [[third, third, third], [third, 2.0 * third, 0.0], [third, 0.0, 2.0 * third]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m.weight(i, j) - expected[i][j]).abs() < 1e-15);
            }
        }
        assert!((m.sigma() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn validation_reports() {
        let uniform = vec![vec![1.0 / 3.0; 3]; 3];
        assert!(validate_doubly_stochastic(&uniform).passed);
        let bad = vec![vec![0.9, 0.2], vec![0.1, 0.8]];
        let r = validate_doubly_stochastic(&bad);
        assert!(!r.passed);
        assert!((r.max_row_deviation - 0.1).abs() < 1e-12);
        assert!(MixingMatrix::from_rows(bad).is_err());
    }

    #[test]
    fn single_node() {
        let m = metropolis_weights(&build_topology(TopologyKind::Star, 1, None).unwrap()).unwrap();
        assert_eq!(m.rows(), &[vec![1.0]]);
        assert_eq!(m.sigma(), 0.0);
    }

    #[test]
    fn asymmetric_doubly_stochastic_uses_singular_values() {
        // Cyclic shift mixed with identity: doubly stochastic but not symmetric.
        let rows = vec![vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5], vec![0.5, 0.0, 0.5]];
        let m = MixingMatrix::from_rows(rows).unwrap();
        // Nonzero eigenvalues of W − J are (1 + e^{±2πi/3})/2, both of modulus 1/2; W is normal.
        assert!((m.sigma() - 0.5).abs() < 1e-12);
    }
}
