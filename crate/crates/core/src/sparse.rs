//! Sparse storage and the symmetric factorization behind the QP engine.
//!
//! KKT systems of horizon-stacked control problems are banded once the
//! unknowns are put in reverse Cuthill–McKee order, so an envelope (skyline)
//! LDLᵀ keeps all fill inside the profile. No pivoting is done: the matrices
//! factored here are quasi-definite (`[H Aᵀ; A -D]` with `H`, `D` positive
//! definite), which admit an LDLᵀ under any symmetric permutation.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut t: Vec<(usize, usize, f64)> = triplets.to_vec();
        t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_of.push(r);
                last = Some((r, c));
            }
        }
        // drop explicit zeros after summation
        let mut keep_c = Vec::with_capacity(col_idx.len());
        let mut keep_v = Vec::with_capacity(values.len());
        for ((r, c), v) in row_of.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                keep_c.push(c);
                keep_v.push(v);
            }
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx: keep_c,
            values: keep_v,
        }
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let mut t = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        SparseMatrix::from_triplets(m.rows(), m.cols(), &t)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// `y = M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_acc(x, &mut y);
        y
    }

    /// `y += M x`.
    pub fn mul_vec_acc(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += self.row(i).map(|(j, v)| v * x[j]).sum::<f64>();
        }
    }

    /// `y = Mᵀ x`.
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.cols];
        self.mul_transpose_vec_acc(x, &mut y);
        y
    }

    /// `y += Mᵀ x`.
    pub fn mul_transpose_vec_acc(&self, x: &[f64], y: &mut [f64]) {
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, v) in self.row(i) {
                    y[j] += v * xi;
                }
            }
        }
    }

    /// Largest `|M_ij - M_ji|` (square matrices only).
    pub fn max_asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        self.iter()
            .map(|(i, j, v)| libm::fabs(v - self.get(j, i)))
            .fold(0.0, f64::max)
    }

    /// Column-wise infinity norms.
    pub fn col_norms_inf(&self) -> Vec<f64> {
        let mut n = vec![0.0f64; self.cols];
        for (_, j, v) in self.iter() {
            n[j] = n[j].max(libm::fabs(v));
        }
        n
    }

    /// Row-wise infinity norms.
    pub fn row_norms_inf(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).fold(0.0f64, |m, (_, v)| m.max(libm::fabs(v))))
            .collect()
    }

    /// `diag(left) · M · diag(right)`.
    pub fn scaled(&self, left: &[f64], right: &[f64]) -> SparseMatrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.values[p] *= left[i] * right[self.col_idx[p]];
            }
        }
        out
    }

    pub fn scale_values(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }
}

/// Fill-reducing symmetric permutation.
#[derive(Debug, Clone)]
pub struct Ordering {
    /// `perm[new] = old`
    pub perm: Vec<usize>,
    /// `iperm[old] = new`
    pub iperm: Vec<usize>,
}

/// Reverse Cuthill–McKee ordering of the graph given by the off-diagonal
/// entries of a symmetric pattern (each undirected edge listed at least once).
pub fn rcm_ordering(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> Ordering {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in edges {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    for a in &mut adj {
        a.sort_by_key(|&v| (degree[v], v));
    }

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];
    loop {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v));
        let Some(seed) = seed else { break };
        let start = pseudo_peripheral(seed, &adj, &degree, &mut level);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if !visited[w] {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order.reverse();
    let mut iperm = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        iperm[old] = new;
    }
    Ordering { perm: order, iperm }
}

// George–Liu search: repeat BFS from a minimum-degree node of the deepest level
// until the eccentricity stops growing.
fn pseudo_peripheral(
    seed: usize,
    adj: &[Vec<usize>],
    degree: &[usize],
    level: &mut [usize],
) -> usize {
    let mut root = seed;
    let mut ecc = bfs_levels(root, adj, level).0;
    loop {
        let (_, last) = bfs_levels(root, adj, level);
        let candidate = last
            .iter()
            .copied()
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(root);
        let (e, _) = bfs_levels(candidate, adj, level);
        if e > ecc {
            ecc = e;
            root = candidate;
        } else {
            return root;
        }
    }
}

fn bfs_levels(root: usize, adj: &[Vec<usize>], level: &mut [usize]) -> (usize, Vec<usize>) {
    let mut touched = vec![root];
    level[root] = 0;
    let mut frontier = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if level[w] == usize::MAX {
                    level[w] = depth + 1;
                    touched.push(w);
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        depth += 1;
        frontier = next;
    }
    for v in touched {
        level[v] = usize::MAX;
    }
    (depth, frontier)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroPivot(pub usize);

/// Envelope LDLᵀ of a symmetric matrix.
///
/// Entries are passed as lower-triangle triplets `(i, j, v)` with `i >= j` in
/// the caller's numbering; duplicates are summed.
#[derive(Debug, Clone)]
pub struct SkylineLdl {
    n: usize,
    ordering: Ordering,
    first: Vec<usize>,
    start: Vec<usize>,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl SkylineLdl {
    /// Symbolic phase: orders the unknowns and sizes the envelope.
    pub fn analyze(n: usize, lower: &[(usize, usize, f64)]) -> Self {
        let ordering = rcm_ordering(n, lower.iter().map(|&(i, j, _)| (i, j)));
        let mut first: Vec<usize> = (0..n).collect();
        for &(i, j, _) in lower {
            let (a, b) = (ordering.iperm[i], ordering.iperm[j]);
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            first[hi] = first[hi].min(lo);
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        SkylineLdl {
            n,
            ordering,
            first,
            l: vec![0.0; start[n]],
            start,
            d: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn envelope_size(&self) -> usize {
        self.l.len()
    }

    /// Numeric phase. `lower` must have the pattern given to `analyze` (or a
    /// subset of it).
    pub fn factor(&mut self, lower: &[(usize, usize, f64)]) -> Result<(), ZeroPivot> {
        self.l.iter_mut().for_each(|v| *v = 0.0);
        self.d.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, v) in lower {
            let (a, b) = (self.ordering.iperm[i], self.ordering.iperm[j]);
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            if hi == lo {
                self.d[hi] += v;
            } else {
                debug_assert!(lo >= self.first[hi], "entry outside analyzed envelope");
                self.l[self.start[hi] + lo - self.first[hi]] += v;
            }
        }
        for i in 0..self.n {
            let fi = self.first[i];
            let si = self.start[i];
            let (before, rest) = self.l.split_at_mut(si);
            let row_i = &mut rest[..i - fi];
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let sj = self.start[j];
                let row_j = &before[sj + k0 - fj..sj + j - fj];
                let acc: f64 = row_i[k0 - fi..j - fi]
                    .iter()
                    .zip(row_j)
                    .map(|(a, b)| a * b)
                    .sum();
                row_i[j - fi] -= acc;
            }
            let mut di = self.d[i];
            for j in fi..i {
                let u = row_i[j - fi];
                let lij = u / self.d[j];
                di -= u * lij;
                row_i[j - fi] = lij;
            }
            if !(libm::fabs(di) > 1e-300) || !di.is_finite() {
                return Err(ZeroPivot(self.ordering.perm[i]));
            }
            self.d[i] = di;
        }
        Ok(())
    }

    /// Solves `K x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = (0..n).map(|i| b[self.ordering.perm[i]]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.l[self.start[i]..self.start[i + 1]];
            let acc: f64 = row.iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] -= acc;
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            let row = &self.l[self.start[i]..self.start[i + 1]];
            for (k, lik) in row.iter().enumerate() {
                y[fi + k] -= lik * yi;
            }
        }
        for i in 0..n {
            b[self.ordering.perm[i]] = y[i];
        }
    }

    /// Number of negative pivots (the inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }
}
