//! Communication graphs and the Laplacian-style mixing matrix `W`.
//!
//! `W` has nonnegative off-diagonal weights on edges, zero row and column
//! sums, and eigenvalues `0 = d1 > d2 >= ... >= dm` bounded below by the
//! selected [`SpectralBand`].

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng::{Purpose, StreamKey};

const EIGEN_TOL: f64 = 1e-9;
const SUM_TOL: f64 = 1e-12;
const MAX_PAIRING_RETRIES: u64 = 1000;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("topology with {0} agents is disconnected")]
    DisconnectedTopology(usize),
    #[error("no simple {k}-regular graph on {m} vertices")]
    InfeasibleDegree { m: usize, k: usize },
    #[error("pairing model failed to produce a simple connected graph after {0} attempts")]
    RetriesExhausted(u64),
    #[error("edge weight {weight} times max degree {degree} must be in (0, 1)")]
    WeightTooLarge { weight: f64, degree: usize },
    #[error("edge weight must be positive and finite, got {0}")]
    NonPositiveWeight(f64),
    #[error("spectral violation: {0}")]
    SpectralViolation(Violation),
    #[error("edge ({0}, {1}) references a vertex outside 0..{2}")]
    VertexOutOfRange(usize, usize, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("malformed edge-list line {line}: `{text}`")]
    Parse { line: usize, text: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Admissible eigenvalue interval for `W` (excluding the zero eigenvalue).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralBand {
    /// `-1 < d_m` and `d_2 < 0`.
    Strict,
    /// `-2 < d_m` and `d_2 < 0`: `I + W` still contracts the disagreement
    /// subspace, which is what the degree-4 / weight-0.2 topology satisfies.
    Contractive,
}

impl SpectralBand {
    pub fn lower(self) -> f64 {
        match self {
            SpectralBand::Strict => -1.0,
            SpectralBand::Contractive => -2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    KRegular { k: usize, seed: u64 },
    Ring,
    Path,
    Complete,
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    m: usize,
    adjacency: Vec<Vec<usize>>,
    generator: Generator,
}

impl Topology {
    /// Builds an undirected graph from an edge list. Duplicate edges are merged.
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self, NetworkError> {
        let mut sets = vec![BTreeSet::new(); m];
        for &(a, b) in edges {
            if a >= m || b >= m {
                return Err(NetworkError::VertexOutOfRange(a, b, m));
            }
            if a == b {
                return Err(NetworkError::SelfLoop(a));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        Ok(Self {
            m,
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            generator: Generator::Explicit,
        })
    }

    fn with_generator(mut self, g: Generator) -> Self {
        self.generator = g;
        self
    }

    pub fn ring(m: usize) -> Self {
        let edges: Vec<_> = match m {
            0 | 1 => vec![],
            2 => vec![(0, 1)],
            _ => (0..m).map(|i| (i, (i + 1) % m)).collect(),
        };
        Self::from_edges(m, &edges).unwrap().with_generator(Generator::Ring)
    }

    pub fn path(m: usize) -> Self {
        let edges: Vec<_> = (1..m).map(|i| (i - 1, i)).collect();
        Self::from_edges(m, &edges).unwrap().with_generator(Generator::Path)
    }

    pub fn complete(m: usize) -> Self {
        let mut edges = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                edges.push((i, j));
            }
        }
        Self::from_edges(m, &edges).unwrap().with_generator(Generator::Complete)
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nb) in self.adjacency.iter().enumerate() {
            for &j in nb {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.m == 0 {
            return true;
        }
        let mut seen = vec![false; self.m];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &self.adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Writes one `i j` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, j) in self.edges() {
            writeln!(out, "{i} {j}")?;
        }
        Ok(())
    }

    /// Reads `i j` lines; blank lines and `#` comments are skipped. The
    /// vertex count is one more than the largest index unless `m` is given.
    pub fn read_edge_list<R: BufRead>(input: R, m: Option<usize>) -> Result<Self, NetworkError> {
        let mut edges = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|source| NetworkError::Io {
                path: "<edge list>".into(),
                source,
            })?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let parse_err = || NetworkError::Parse {
                line: n + 1,
                text: text.to_string(),
            };
            let mut parts = text.split_whitespace();
            let a: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
            let b: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(parse_err)?;
            if parts.next().is_some() {
                return Err(parse_err());
            }
            edges.push((a, b));
        }
        let inferred = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
        Self::from_edges(m.unwrap_or(inferred), &edges)
    }

    pub fn load_edge_list(path: &Path) -> Result<Self, NetworkError> {
        let f = std::fs::File::open(path).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_edge_list(std::io::BufReader::new(f), None)
    }
}

/// Random simple connected `k`-regular graph from the pairing model.
pub fn generate_k_regular(m: usize, k: usize, seed: u64) -> Result<Topology, NetworkError> {
    if k >= m || (m * k) % 2 == 1 {
        return Err(NetworkError::InfeasibleDegree { m, k });
    }
    for attempt in 0..MAX_PAIRING_RETRIES {
        let mut rng = StreamKey::new(seed, Purpose::Topology, attempt).rng();
        let mut stubs: Vec<usize> = (0..m).flat_map(|v| std::iter::repeat_n(v, k)).collect();
        stubs.shuffle(&mut rng);
        let mut seen = BTreeSet::new();
        let mut simple = true;
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !seen.insert((a, b)) {
                simple = false;
                break;
            }
        }
        if !simple {
            continue;
        }
        let edges: Vec<_> = seen.into_iter().collect();
        let topo = Topology::from_edges(m, &edges)?;
        if topo.is_connected() {
            return Ok(topo.with_generator(Generator::KRegular { k, seed }));
        }
    }
    Err(NetworkError::RetriesExhausted(MAX_PAIRING_RETRIES))
}

/// Eigen-structure of a valid `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCertificate {
    /// Real parts, sorted decreasing.
    pub eigenvalues: Vec<f64>,
    pub delta2: f64,
    pub delta_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotSquare { rows: usize, cols: usize },
    RowSum { row: usize, sum: f64 },
    ColumnSum { col: usize, sum: f64 },
    NegativeOffDiagonal { i: usize, j: usize, value: f64 },
    AsymmetricSupport { i: usize, j: usize },
    ComplexEigenvalue { re: f64, im: f64 },
    PositiveEigenvalue { value: f64 },
    BelowBand { value: f64, lower: f64 },
    ZeroNotSimple { delta2: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, not square"),
            Violation::RowSum { row, sum } => write!(f, "W1 = 0 fails: row {row} sums to {sum:e}"),
            Violation::ColumnSum { col, sum } => {
                write!(f, "1^T W = 0^T fails: column {col} sums to {sum:e}")
            }
            Violation::NegativeOffDiagonal { i, j, value } => {
                write!(f, "off-diagonal w[{i},{j}] = {value} is negative")
            }
            Violation::AsymmetricSupport { i, j } => {
                write!(f, "support not symmetric: w[{i},{j}] > 0 but w[{j},{i}] = 0")
            }
            Violation::ComplexEigenvalue { re, im } => {
                write!(f, "eigenvalue {re} + {im}i is not real")
            }
            Violation::PositiveEigenvalue { value } => write!(f, "eigenvalue {value} > 0"),
            Violation::BelowBand { value, lower } => {
                write!(f, "eigenvalue {value} <= {lower}")
            }
            Violation::ZeroNotSimple { delta2 } => {
                write!(f, "zero eigenvalue not simple: second-largest is {delta2:e}")
            }
        }
    }
}

fn eigen_real_parts(w: &DMatrix<f64>) -> Result<Vec<f64>, Violation> {
    let symmetric = (0..w.nrows()).all(|i| (0..i).all(|j| w[(i, j)] == w[(j, i)]));
    let mut vals: Vec<f64> = if symmetric {
        w.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
    } else {
        let complex = w.clone().complex_eigenvalues();
        if let Some(c) = complex.iter().find(|c| c.im.abs() > EIGEN_TOL) {
            return Err(Violation::ComplexEigenvalue { re: c.re, im: c.im });
        }
        complex.iter().map(|c| c.re).collect()
    };
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// Checks zero row/column sums, sign and support structure, and the
/// eigenvalue band. Every failure is collected; the function never panics.
pub fn validate_with_band(
    w: &DMatrix<f64>,
    band: SpectralBand,
) -> Result<SpectralCertificate, Vec<Violation>> {
    let (rows, cols) = w.shape();
    if rows != cols {
        return Err(vec![Violation::NotSquare { rows, cols }]);
    }
    let m = rows;
    let mut violations = Vec::new();
    for i in 0..m {
        let s: f64 = w.row(i).iter().sum();
        if s.abs() > SUM_TOL {
            violations.push(Violation::RowSum { row: i, sum: s });
        }
    }
    for j in 0..m {
        let s: f64 = w.column(j).iter().sum();
        if s.abs() > SUM_TOL {
            violations.push(Violation::ColumnSum { col: j, sum: s });
        }
    }
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let v = w[(i, j)];
            if v < 0.0 {
                violations.push(Violation::NegativeOffDiagonal { i, j, value: v });
            } else if v > 0.0 && w[(j, i)] == 0.0 {
                violations.push(Violation::AsymmetricSupport { i, j });
            }
        }
    }
    let eigenvalues = match eigen_real_parts(w) {
        Ok(v) => v,
        Err(v) => {
            violations.push(v);
            return Err(violations);
        }
    };
    if m == 0 {
        return if violations.is_empty() {
            Ok(SpectralCertificate {
                eigenvalues,
                delta2: f64::NEG_INFINITY,
                delta_min: 0.0,
            })
        } else {
            Err(violations)
        };
    }
    let top = eigenvalues[0];
    if top > EIGEN_TOL {
        violations.push(Violation::PositiveEigenvalue { value: top });
    }
    let delta2 = eigenvalues.get(1).copied().unwrap_or(f64::NEG_INFINITY);
    if m > 1 && delta2 >= -EIGEN_TOL {
        violations.push(Violation::ZeroNotSimple { delta2 });
    }
    let delta_min = *eigenvalues.last().unwrap();
    if delta_min <= band.lower() + EIGEN_TOL {
        violations.push(Violation::BelowBand {
            value: delta_min,
            lower: band.lower(),
        });
    }
    if violations.is_empty() {
        Ok(SpectralCertificate {
            eigenvalues,
            delta2,
            delta_min,
        })
    } else {
        Err(violations)
    }
}

/// Strict check of the mixing-matrix assumption (band `(-1, 0)`).
pub fn validate_assumption2(w: &DMatrix<f64>) -> Result<SpectralCertificate, Vec<Violation>> {
    validate_with_band(w, SpectralBand::Strict)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    matrix: DMatrix<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
    certificate: SpectralCertificate,
    band: SpectralBand,
}

impl WeightMatrix {
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.matrix[(i, i)]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// `(j, w_ij)` for every neighbor `j` of `i`, in increasing `j`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn certificate(&self) -> &SpectralCertificate {
        &self.certificate
    }

    pub fn band(&self) -> SpectralBand {
        self.band
    }

    /// `min_i |w_ii|`.
    pub fn w_hat(&self) -> f64 {
        (0..self.len())
            .map(|i| self.diag(i).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Wraps an arbitrary matrix after validating it against `band`.
    pub fn from_matrix(matrix: DMatrix<f64>, band: SpectralBand) -> Result<Self, NetworkError> {
        let certificate = validate_with_band(&matrix, band)
            .map_err(|mut v| NetworkError::SpectralViolation(v.remove(0)))?;
        let m = matrix.nrows();
        let neighbors = (0..m)
            .map(|i| {
                (0..m)
                    .filter(|&j| j != i && matrix[(i, j)] != 0.0)
                    .map(|j| (j, matrix[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(Self {
            matrix,
            neighbors,
            certificate,
            band,
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for i in 0..self.len() {
            let row: Vec<String> = self.matrix.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Uniform edge weights, `w_ii = -deg(i) * edge_weight`.
pub fn build_weight_matrix(
    topology: &Topology,
    edge_weight: f64,
    band: SpectralBand,
) -> Result<WeightMatrix, NetworkError> {
    if !(edge_weight > 0.0 && edge_weight.is_finite()) {
        return Err(NetworkError::NonPositiveWeight(edge_weight));
    }
    let degree = topology.max_degree();
    if edge_weight * degree as f64 >= 1.0 {
        return Err(NetworkError::WeightTooLarge {
            weight: edge_weight,
            degree,
        });
    }
    if !topology.is_connected() {
        return Err(NetworkError::DisconnectedTopology(topology.len()));
    }
    let m = topology.len();
    let mut w = DMatrix::zeros(m, m);
    for i in 0..m {
        for &j in topology.neighbors(i) {
            w[(i, j)] = edge_weight;
        }
        w[(i, i)] = -(topology.degree(i) as f64) * edge_weight;
    }
    WeightMatrix::from_matrix(w, band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_agent_path() {
        let w = build_weight_matrix(&Topology::path(2), 0.2, SpectralBand::Strict).unwrap();
        assert_eq!(w.get(0, 0), -0.2);
        assert_eq!(w.get(0, 1), 0.2);
        let ev = &w.certificate().eigenvalues;
        assert!(ev[0].abs() < 1e-15);
        assert!((ev[1] + 0.4).abs() < 1e-15);
        let cert = validate_assumption2(w.matrix()).unwrap();
        assert!((cert.delta2 + 0.4).abs() < 1e-15);
    }

    #[test]
    fn four_regular_desk_graph() {
        let topo = generate_k_regular(10, 4, 7).unwrap();
        let w = build_weight_matrix(&topo, 0.2, SpectralBand::Contractive).unwrap();
        for i in 0..10 {
            assert!((w.diag(i) + 0.8).abs() < 1e-15);
        }
        assert!((w.w_hat() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn four_regular_violates_strict_band() {
        // Degree 4 with weight 0.2 puts the smallest eigenvalue below -1.
        let topo = generate_k_regular(20, 4, 1).unwrap();
        let err = build_weight_matrix(&topo, 0.2, SpectralBand::Strict).unwrap_err();
        assert!(matches!(
            err,
            NetworkError::SpectralViolation(Violation::BelowBand { .. })
        ));
    }

    #[test]
    fn complete_three_heavy_weight() {
        // -0.6 (3I - J) has eigenvalues {0, -1.8, -1.8}.
        let m = 3;
        let mut w = DMatrix::from_element(m, m, 0.6);
        for i in 0..m {
            w[(i, i)] = -1.2;
        }
        match WeightMatrix::from_matrix(w, SpectralBand::Strict) {
            Err(NetworkError::SpectralViolation(Violation::BelowBand { value, .. })) => {
                assert!((value + 1.8).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
        // The uniform-weight builder rejects it earlier on 1 + w_ii <= 0.
        assert!(matches!(
            build_weight_matrix(&Topology::complete(3), 0.6, SpectralBand::Strict),
            Err(NetworkError::WeightTooLarge { .. })
        ));
    }

    #[test]
    fn zero_matrix_fails() {
        let v = validate_assumption2(&DMatrix::zeros(2, 2)).unwrap_err();
        assert!(v.iter().any(|x| matches!(x, Violation::ZeroNotSimple { .. })));
    }

    #[test]
    fn asymmetric_column_sums() {
        let w = DMatrix::from_row_slice(3, 3, &[-0.3, 0.2, 0.1, 0.1, -0.1, 0.0, 0.0, 0.2, -0.2]);
        let v = validate_assumption2(&w).unwrap_err();
        assert!(v.iter().any(|x| matches!(x, Violation::ColumnSum { .. })));
    }

    #[test]
    fn infeasible_degree() {
        assert!(matches!(
            generate_k_regular(5, 3, 0),
            Err(NetworkError::InfeasibleDegree { .. })
        ));
        assert!(matches!(
            generate_k_regular(4, 4, 0),
            Err(NetworkError::InfeasibleDegree { .. })
        ));
    }

    #[test]
    fn disconnected_rejected() {
        let t = Topology::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            build_weight_matrix(&t, 0.2, SpectralBand::Strict),
            Err(NetworkError::DisconnectedTopology(4))
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let topo = generate_k_regular(12, 4, 3).unwrap();
        let mut buf = Vec::new();
        topo.write_edge_list(&mut buf).unwrap();
        let back = Topology::read_edge_list(&buf[..], None).unwrap();
        assert_eq!(back.edges(), topo.edges());
        assert!(Topology::read_edge_list(&b"0 x\n"[..], None).is_err());
    }

    #[test]
    fn csv_export_rows() {
        let w = build_weight_matrix(&Topology::ring(4), 0.2, SpectralBand::Strict).unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("-0.4,0.2,0,0.2"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn generated_graphs_are_regular_and_deterministic(half in 3usize..20, k in 2usize..5, seed in any::<u64>()) {
            let m = 2 * half;
            prop_assume!(k < m);
            let a = generate_k_regular(m, k, seed).unwrap();
            let b = generate_k_regular(m, k, seed).unwrap();
            prop_assert_eq!(a.edges(), b.edges());
            prop_assert!(a.is_connected());
            for i in 0..m {
                prop_assert_eq!(a.degree(i), k);
            }
        }

        #[test]
        fn weight_matrix_properties(half in 3usize..15, seed in any::<u64>(), wt in 0.05f64..0.24) {
            let topo = generate_k_regular(2 * half, 4, seed).unwrap();
            let w = build_weight_matrix(&topo, wt, SpectralBand::Contractive).unwrap();
            let m = w.len();
            for i in 0..m {
                let r: f64 = w.matrix().row(i).iter().sum();
                let c: f64 = w.matrix().column(i).iter().sum();
                prop_assert!(r.abs() < 1e-12 && c.abs() < 1e-12);
                // I + W is doubly stochastic with nonnegative entries.
                prop_assert!(1.0 + w.diag(i) >= 0.0);
            }
            prop_assert!(w.certificate().delta2 < 0.0);
        }
    }
}
