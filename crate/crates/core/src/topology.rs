//! Network graphs, Metropolis–Hastings gossip weights and the augmented
//! mixing matrices used by the skipping update.
//!
//! A [`MixingMatrix`] caches its full symmetric eigendecomposition, since
//! both `λ₂` (consensus speed) and the square root `W_b = (I − W)^{1/2}` are
//! derived from it.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance on row sums of a mixing matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Eigenvalues must stay this far inside `(-1, 1)` (besides `λ₁ = 1`).
pub const SPECTRUM_MARGIN: f64 = 1e-12;

/// Undirected, connected, simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    /// Validates and builds a graph. Edges are unordered; `(j, i)` and
    /// `(i, j)` denote the same edge and may not both appear.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("graph needs at least 2 nodes, got {n}")));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i},{j}) out of range for n={n}")));
            }
            if i == j {
                return Err(Error::invalid(format!("self-loop at node {i}")));
            }
            if !set.insert((i.min(j), i.max(j))) {
                return Err(Error::invalid(format!("duplicate edge ({i},{j})")));
            }
        }
        let g = Graph { n, edges: set };
        if !g.is_connected() {
            return Err(Error::invalid("graph is not connected"));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
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
        count == self.n
    }

    /// Relabels node `i` as `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        Graph::new(self.n, self.edges.iter().map(|&(i, j)| (perm[i], perm[j])))
    }

    /// One `"i j"` line per edge, 0-based.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    /// Parses the edge-list format written by [`Graph::to_edge_list`]. The node
    /// count is taken as `max index + 1` unless `n` is given explicitly.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_edge_list(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_idx = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: format!("expected two node indices, got {line:?}"),
                })
            };
            let mut toks = line.split_whitespace();
            let i = parse(toks.next())?;
            let j = parse(toks.next())?;
            if toks.next().is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "trailing tokens after edge".into(),
                });
            }
            max_idx = max_idx.max(i).max(j);
            edges.push((i, j));
        }
        Graph::new(n.unwrap_or(max_idx + 1), edges)
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::invalid("permutation length mismatch"));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::invalid("not a permutation"));
        }
    }
    Ok(())
}

/// Cycle `0 – 1 – … – (n-1) – 0`.
pub fn ring(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::invalid(format!(
            "ring needs n >= 3 (n={n} would duplicate an edge)"
        )));
    }
    Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
}

/// Path `0 – 1 – … – (n-1)`.
pub fn path(n: usize) -> Result<Graph> {
    Graph::new(n, (1..n).map(|i| (i - 1, i)))
}

pub fn complete(n: usize) -> Result<Graph> {
    Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
}

/// Number of edges a connectivity ratio `iota` asks for on `n` nodes.
pub fn edge_budget(n: usize, iota: f64) -> usize {
    (iota * (n * (n - 1)) as f64 / 2.0).round() as usize
}

/// Random connected graph with `round(iota · n(n-1)/2)` edges.
///
/// A uniform spanning tree is drawn with the Aldous–Broder random walk on the
/// complete graph, then uniformly chosen non-edges are added until the budget
/// is met. Deterministic in `seed`.
pub fn random_connected(n: usize, iota: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 nodes, got {n}")));
    }
    if !(iota > 0.0 && iota <= 1.0) {
        return Err(Error::invalid(format!("connectivity ratio must lie in (0,1], got {iota}")));
    }
    let budget = edge_budget(n, iota);
    if budget < n - 1 {
        return Err(Error::invalid(format!(
            "edge budget {budget} is below n-1 = {}; no connected graph exists",
            n - 1
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeSet::new();
    let mut visited = vec![false; n];
    let mut current = rng.random_range(0..n);
    visited[current] = true;
    let mut remaining = n - 1;
    while remaining > 0 {
        // uniform neighbour in K_n
        let mut next = rng.random_range(0..n - 1);
        if next >= current {
            next += 1;
        }
        if !visited[next] {
            visited[next] = true;
            edges.insert((current.min(next), current.max(next)));
            remaining -= 1;
        }
        current = next;
    }

    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|e| !edges.contains(e))
        .collect();
    candidates.shuffle(&mut rng);
    edges.extend(candidates.into_iter().take(budget - (n - 1)));
    Graph::new(n, edges)
}

/// Symmetric doubly stochastic gossip matrix with its cached spectrum.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    w: DMatrix<f64>,
    /// Eigenvalues sorted in descending order.
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, column `k` paired with `eigenvalues[k]`.
    eigenvectors: DMatrix<f64>,
}

impl MixingMatrix {
    /// Wraps an explicit matrix after checking symmetry, double
    /// stochasticity, entry range and primitivity.
    pub fn from_matrix(w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() || w.nrows() == 0 {
            return Err(Error::invalid("mixing matrix must be square and nonempty"));
        }
        let (eigenvalues, eigenvectors) = sorted_eigen(&w);
        let m = MixingMatrix { w, eigenvalues, eigenvectors };
        if let Some(violation) = m.invariant_violation() {
            return Err(Error::invalid(violation));
        }
        Ok(m)
    }

    /// The trivial `1×1` matrix `[1]` of a single isolated node.
    pub fn single() -> Self {
        MixingMatrix {
            w: DMatrix::from_element(1, 1, 1.0),
            eigenvalues: vec![1.0],
            eigenvectors: DMatrix::from_element(1, 1, 1.0),
        }
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Second-largest eigenvalue; `0` for a single node, which has no
    /// consensus error to contract.
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    pub fn lambda_n(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.lambda2()
    }

    /// Returns a description of the first violated invariant, if any.
    pub fn invariant_violation(&self) -> Option<String> {
        let n = self.n();
        let w = &self.w;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let v = w[(i, j)];
                if v != w[(j, i)] {
                    return Some(format!("not symmetric at ({i},{j})"));
                }
                if !(0.0..=1.0).contains(&v) {
                    return Some(format!("entry ({i},{j}) = {v} outside [0,1]"));
                }
                row += v;
            }
            if (row - 1.0).abs() > ROW_SUM_TOL {
                return Some(format!("row {i} sums to {row}"));
            }
        }
        if n > 1 {
            if self.lambda2() >= 1.0 - SPECTRUM_MARGIN {
                return Some(format!("lambda2 = {} is not below 1", self.lambda2()));
            }
            if self.lambda_n() <= -1.0 + SPECTRUM_MARGIN {
                return Some(format!("lambda_n = {} is not above -1", self.lambda_n()));
            }
        }
        None
    }

    /// Relabels node `i` as `perm[i]`: returns `P W Pᵀ`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        check_permutation(perm, n)?;
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                w[(perm[i], perm[j])] = self.w[(i, j)];
            }
        }
        Self::from_matrix(w)
    }

    /// Comma-separated rows, full `f64` round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n() {
            let row: Vec<String> = self.w.row(i).iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn sorted_eigen(w: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(w.clone());
    let mut order: Vec<usize> = (0..w.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(w.nrows(), w.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Metropolis–Hastings weights `W_ij = 1 / (1 + max(deg_i, deg_j))` on edges,
/// with the remaining mass on the diagonal.
pub fn metropolis(g: &Graph) -> MixingMatrix {
    let n = g.n();
    let deg = g.degrees();
    let mut w = DMatrix::zeros(n, n);
    for (i, j) in g.edges() {
        let v = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        w[(i, j)] = v;
        w[(j, i)] = v;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::from_matrix(w).expect("Metropolis weights on a connected graph are a valid mixing matrix")
}

/// `W_a = I − (I − W)/(2χ)` and `W_b = (I − W)^{1/2}`.
#[derive(Debug, Clone)]
pub struct AugmentedMixing {
    chi: f64,
    wa: DMatrix<f64>,
    wb: DMatrix<f64>,
}

/// Residuals of the algebraic relations between `W`, `W_a` and `W_b`.
#[derive(Debug, Clone, Copy)]
pub struct AugmentedResiduals {
    /// max |W_a − (I − (I−W)/(2χ))|
    pub wa_formula: f64,
    /// ‖W_b² − (I − W)‖_F
    pub wb_square: f64,
    /// max |(I − W_a) − W_b²/(2χ)|
    pub wa_wb_identity: f64,
    /// max |W_b − W_bᵀ|
    pub wb_asymmetry: f64,
    /// Smallest eigenvalue of W_a.
    pub wa_min_eigenvalue: f64,
    /// Smallest eigenvalue of W_b.
    pub wb_min_eigenvalue: f64,
    /// max |row sum of W_a − 1|
    pub wa_row_sum: f64,
}

pub fn augment(w: &MixingMatrix, chi: f64) -> Result<AugmentedMixing> {
    if !(chi >= 1.0) || !chi.is_finite() {
        return Err(Error::invalid(format!("chi must be >= 1, got {chi}")));
    }
    let n = w.n();
    let id = DMatrix::<f64>::identity(n, n);
    let wa = &id - (&id - w.matrix()) / (2.0 * chi);
    let p = w.eigenvectors();
    // λ₁ = 1 exactly, with eigenvector 1/√n; pin its root to zero.
    let roots = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        w.eigenvalues()
            .iter()
            .enumerate()
            .map(|(k, &l)| if k == 0 { 0.0 } else { (1.0 - l).max(0.0).sqrt() }),
    ));
    let mut wb = p * roots * p.transpose();
    // Symmetrize away rounding so W_b is exactly symmetric.
    wb = (&wb + wb.transpose()) * 0.5;
    Ok(AugmentedMixing { chi, wa, wb })
}

impl AugmentedMixing {
    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn wa(&self) -> &DMatrix<f64> {
        &self.wa
    }

    pub fn wb(&self) -> &DMatrix<f64> {
        &self.wb
    }

    pub fn residuals(&self, w: &MixingMatrix) -> AugmentedResiduals {
        let n = w.n();
        let id = DMatrix::<f64>::identity(n, n);
        let i_minus_w = &id - w.matrix();
        let expected_wa = &id - &i_minus_w / (2.0 * self.chi);
        let wb2 = &self.wb * &self.wb;
        let max_abs = |m: DMatrix<f64>| m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let min_eig = |m: &DMatrix<f64>| {
            SymmetricEigen::new(m.clone())
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        };
        AugmentedResiduals {
            wa_formula: max_abs(&self.wa - expected_wa),
            wb_square: (&wb2 - &i_minus_w).norm(),
            wa_wb_identity: max_abs((&id - &self.wa) - &wb2 / (2.0 * self.chi)),
            wb_asymmetry: max_abs(&self.wb - self.wb.transpose()),
            wa_min_eigenvalue: min_eig(&self.wa),
            wb_min_eigenvalue: min_eig(&self.wb),
            wa_row_sum: (0..n)
                .map(|i| (self.wa.row(i).sum() - 1.0).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// `γ = sqrt(1 − (1 − λ₂)/(2χ))`, the contraction factor of the consensus
/// part of the error dynamics.
pub fn gamma_bound(w: &MixingMatrix, chi: f64) -> f64 {
    gamma_of(w.lambda2(), chi)
}

fn gamma_of(lambda: f64, chi: f64) -> f64 {
    (1.0 - (1.0 - lambda) / (2.0 * chi)).sqrt()
}

/// One `2×2` block of the consensus error dynamics.
#[derive(Debug, Clone, Copy)]
pub struct GammaBlock {
    pub lambda: f64,
    pub nu: f64,
    /// Spectral radius from a numeric eigensolve of the block.
    pub numeric_radius: f64,
    /// `sqrt(ν)`.
    pub closed_form: f64,
}

/// Builds `H_i = [[ν, −ν], [1 − ν, ν]]` with `ν = 1 − (1 − λ_i)/(2χ)` for every
/// non-unit eigenvalue of `W` and solves each block numerically.
pub fn gamma_blocks(w: &MixingMatrix, chi: f64) -> Vec<GammaBlock> {
    w.eigenvalues()
        .iter()
        .skip(1)
        .map(|&lambda| {
            let nu = 1.0 - (1.0 - lambda) / (2.0 * chi);
            let h = Matrix2::new(nu, -nu, 1.0 - nu, nu);
            let numeric_radius = h
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            GammaBlock { lambda, nu, numeric_radius, closed_form: nu.sqrt() }
        })
        .collect()
}

/// Largest `|numeric − closed form|` over all blocks; the closed-form `γ`
/// is checked against the block with the largest radius.
pub fn gamma_block_deviation(w: &MixingMatrix, chi: f64) -> f64 {
    let blocks = gamma_blocks(w, chi);
    let per_block = blocks
        .iter()
        .map(|b| (b.numeric_radius - b.closed_form).abs())
        .fold(0.0, f64::max);
    let top = blocks.iter().map(|b| b.numeric_radius).fold(0.0, f64::max);
    if blocks.is_empty() {
        per_block
    } else {
        per_block.max((top - gamma_bound(w, chi)).abs())
    }
}

/// Communication probability minimising expected communication rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalP {
    pub p: f64,
    /// `false` when `(1 − λ₂)κ ≤ 1`; communicating every round is then the
    /// returned choice.
    pub well_connected: bool,
}

/// `p = 1/sqrt((1 − λ₂)κ)` in the well-connected regime `(1 − λ₂)κ > 1`.
pub fn optimal_p(lambda2: f64, kappa: f64) -> OptimalP {
    let product = (1.0 - lambda2) * kappa;
    if product > 1.0 {
        OptimalP { p: (1.0 / product.sqrt()).clamp(f64::MIN_POSITIVE, 1.0), well_connected: true }
    } else {
        OptimalP { p: 1.0, well_connected: false }
    }
}

pub fn theory_optimal_p(w: &MixingMatrix, kappa: f64) -> OptimalP {
    optimal_p(w.lambda2(), kappa)
}
