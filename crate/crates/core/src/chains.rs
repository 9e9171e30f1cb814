//! Row-stochastic matrices, their transition digraph, and limiting behaviour.

use nalgebra::{DMatrix, DVector};
use num_integer::Integer;
use serde::Serialize;
use thiserror::Error;

use crate::extprec::ExtMatrix;

/// Largest supported number of states.
pub const MAX_DIM: usize = 16;
/// Accepted deviation of a raw row sum from 1 before renormalization.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Highest power the extended-precision oracle will compute.
pub const ORACLE_MAX_N: u64 = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("matrix must have at least 2 states, got {0}")]
    DimensionTooSmall(usize),
    #[error("matrix has {0} states, at most {MAX_DIM} supported")]
    DimensionTooLarge(usize),
    #[error("row {row} has {len} entries, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("entry ({row},{col}) is not a finite number")]
    NonFinite { row: usize, col: usize },
    #[error("entry ({row},{col}) = {value} is negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, deviation exceeds {ROW_SUM_TOL}")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("chain is not irreducible: {} closed classes among components {components:?}", closed.len())]
    NotIrreducible {
        components: Vec<Vec<usize>>,
        closed: Vec<usize>,
    },
    #[error("chain is periodic with period {period}")]
    NotAperiodic { period: u64 },
    #[error("stationary solve failed: residual {residual:e}")]
    StationarySolve { residual: f64 },
    #[error("power {0} exceeds the oracle limit {ORACLE_MAX_N}")]
    NOverflow(u64),
    #[error("oracle precision must be at least 128 bits, got {0}")]
    PrecisionTooLow(usize),
}

/// A validated row-stochastic matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticMatrix {
    d: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    /// Validates and renormalizes a raw matrix. See [`validate_stochastic`].
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, ChainError> {
        validate_stochastic(rows)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.d).map(<[f64]>::to_vec).collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.d, &self.entries)
    }

    /// Infinity norm (max row sum of absolute values), which is 1 here.
    pub fn norm_inf(&self) -> f64 {
        self.entries
            .chunks(self.d)
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// The matrix with states relabeled so that new state `k` is old state `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let d = self.d;
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { d, entries }
    }
}

/// Checks shape, sign and row sums, then rescales each row to sum to 1.
pub fn validate_stochastic(rows: &[Vec<f64>]) -> Result<StochasticMatrix, ChainError> {
    let d = rows.len();
    if d < 2 {
        return Err(ChainError::DimensionTooSmall(d));
    }
    if d > MAX_DIM {
        return Err(ChainError::DimensionTooLarge(d));
    }
    let mut entries = Vec::with_capacity(d * d);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(ChainError::NotSquare {
                row: i,
                len: row.len(),
                expected: d,
            });
        }
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(ChainError::NonFinite { row: i, col: j });
            }
            if x < 0.0 {
                return Err(ChainError::NegativeEntry {
                    row: i,
                    col: j,
                    value: x,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(ChainError::RowSumViolation { row: i, sum });
        }
        entries.extend(row.iter().map(|&x| x / sum));
    }
    Ok(StochasticMatrix { d, entries })
}

/// Graph structure of the positive-entry transition digraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainClassification {
    pub irreducible: bool,
    /// gcd of the periods of all components that contain a cycle.
    pub period: u64,
    /// Components sorted by smallest member, members ascending.
    pub strongly_connected_components: Vec<Vec<usize>>,
    /// Period of each component; 0 for a single state without a self-loop.
    pub component_periods: Vec<u64>,
    /// Indices into `strongly_connected_components` of the closed classes.
    pub closed_classes: Vec<usize>,
}

impl ChainClassification {
    /// Ok when `Pⁿ` converges to a rank-one limit: exactly one closed class,
    /// and that class is aperiodic. Transient states are allowed.
    pub fn require_ergodic(&self) -> Result<(), ChainError> {
        if self.closed_classes.len() != 1 {
            return Err(ChainError::NotIrreducible {
                components: self.strongly_connected_components.clone(),
                closed: self.closed_classes.clone(),
            });
        }
        let p = self.component_periods[self.closed_classes[0]];
        if p != 1 {
            return Err(ChainError::NotAperiodic { period: p });
        }
        Ok(())
    }
}

pub fn classify(p: &StochasticMatrix) -> ChainClassification {
    let d = p.dim();
    let edge = |i: usize, j: usize| p.get(i, j) > 0.0;

    // Warshall closure; d ≤ 16 so the cubic cost is negligible.
    let mut reach = vec![vec![false; d]; d];
    for (i, row) in reach.iter_mut().enumerate() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = edge(i, j);
        }
    }
    #[allow(clippy::needless_range_loop)]
    for k in 0..d {
        for i in 0..d {
            if reach[i][k] {
                for j in 0..d {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }

    let mut comp_of = vec![usize::MAX; d];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for i in 0..d {
        if comp_of[i] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..d)
            .filter(|&j| j == i || (reach[i][j] && reach[j][i]))
            .collect();
        for &m in &members {
            comp_of[m] = comps.len();
        }
        comps.push(members);
    }

    let component_periods: Vec<u64> = comps.iter().map(|c| component_period(p, c)).collect();
    let closed_classes: Vec<usize> = comps
        .iter()
        .enumerate()
        .filter(|(k, c)| {
            c.iter()
                .all(|&i| (0..d).all(|j| !edge(i, j) || comp_of[j] == *k))
        })
        .map(|(k, _)| k)
        .collect();
    let period = component_periods
        .iter()
        .filter(|&&q| q > 0)
        .fold(0u64, |g, &q| g.gcd(&q));

    ChainClassification {
        irreducible: comps.len() == 1,
        period: period.max(1),
        strongly_connected_components: comps,
        component_periods,
        closed_classes,
    }
}

// BFS levels from one member; the period is the gcd of level[u] + 1 - level[v]
// over all edges u → v inside the component.
fn component_period(p: &StochasticMatrix, members: &[usize]) -> u64 {
    let d = p.dim();
    let inside: Vec<bool> = (0..d).map(|i| members.contains(&i)).collect();
    let mut level = vec![i64::MIN; d];
    let root = members[0];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for v in 0..d {
            if inside[v] && p.get(u, v) > 0.0 && level[v] == i64::MIN {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0u64;
    for &u in members {
        for &v in members {
            if p.get(u, v) > 0.0 {
                g = g.gcd(&(level[u] + 1 - level[v]).unsigned_abs());
            }
        }
    }
    g
}

/// Probability vector `π` with `πP = π`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub pi: Vec<f64>,
}

/// Solves `π(P − I) = 0`, `Σπ = 1` by LU on the transposed system with the
/// last balance equation replaced by the normalization.
pub fn stationary_distribution(p: &StochasticMatrix) -> Result<StationaryDistribution, ChainError> {
    classify(p).require_ergodic()?;
    let d = p.dim();
    let pm = p.to_dmatrix();
    let mut a = pm.transpose() - DMatrix::<f64>::identity(d, d);
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(d);
    b[d - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(ChainError::StationarySolve {
        residual: f64::INFINITY,
    })?;
    // One step of iterative refinement.
    let r = &b - &a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let mut pi: Vec<f64> = x.iter().map(|&v| if v < 0.0 && v > -1e-14 { 0.0 } else { v }).collect();
    let s: f64 = pi.iter().sum();
    for v in &mut pi {
        *v /= s;
    }
    let residual = (0..d)
        .map(|j| ((0..d).map(|i| pi[i] * p.get(i, j)).sum::<f64>() - pi[j]).abs())
        .fold(0.0, f64::max);
    if residual > 1e-10 || pi.iter().any(|&v| v < 0.0) {
        return Err(ChainError::StationarySolve { residual });
    }
    Ok(StationaryDistribution { pi })
}

/// `P* = lim Pⁿ`; every row equals the stationary distribution.
pub fn limiting_matrix(p: &StochasticMatrix) -> Result<DMatrix<f64>, ChainError> {
    let pi = stationary_distribution(p)?.pi;
    let d = p.dim();
    Ok(DMatrix::from_fn(d, d, |_, j| pi[j]))
}

/// `Pⁿ` by repeated squaring in extended precision.
pub fn matrix_power_oracle(
    p: &StochasticMatrix,
    n: u64,
    precision_bits: usize,
) -> Result<ExtMatrix, ChainError> {
    if n > ORACLE_MAX_N {
        return Err(ChainError::NOverflow(n));
    }
    if precision_bits < 128 {
        return Err(ChainError::PrecisionTooLow(precision_bits));
    }
    Ok(ExtMatrix::from_stochastic(p, precision_bits).pow(n))
}
