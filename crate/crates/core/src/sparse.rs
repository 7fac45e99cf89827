//! Triplet assembly and a sparse LU backend.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Square matrix in coordinate form; duplicate entries are summed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripletMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.n && c < self.n);
        self.entries.push((r, c, v));
    }

    pub fn extend(&mut self, other: TripletMatrix) {
        self.entries.extend(other.entries);
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// Summed value at `(r, c)`.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.0 == r && e.1 == c)
            .map(|e| e.2)
            .sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for &(r, c, v) in &self.entries {
            d[r][c] += v;
        }
        d
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> = self
            .entries
            .iter()
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::try_new_from_triplets(self.n, self.n, &trip)
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))
    }
}

/// Sparse LU solver that reuses the symbolic factorization while the
/// sparsity pattern stays the same.
#[derive(Default)]
pub struct LuSolver {
    cached: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
    pub factorizations: usize,
}

impl LuSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, a: &TripletMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != a.dim() {
            return Err(Error::DimensionMismatch {
                context: "linear solve",
                expected: a.dim(),
                found: b.len(),
            });
        }
        let mat = a.to_faer()?;
        let sym = mat.symbolic();
        let (cp, ri) = (sym.col_ptr(), sym.row_idx());
        let reuse =
            matches!(&self.cached, Some((c, r, _)) if c.as_slice() == cp && r.as_slice() == ri);
        if !reuse {
            let s = SymbolicLu::try_new(sym).map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
            self.cached = Some((cp.to_vec(), ri.to_vec(), s));
        }
        let symbolic = self.cached.as_ref().unwrap().2.clone();
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| Error::LinearSolve(format!("{e:?}")))?;
        self.factorizations += 1;
        let rhs = Col::<f64>::from_fn(b.len(), |i| b[i]);
        let x = lu.solve(&rhs);
        let out: Vec<f64> = (0..b.len()).map(|i| x[i]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve(
                "singular or ill-conditioned tangent".into(),
            ));
        }
        Ok(out)
    }
}

pub fn solve_once(a: &TripletMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LuSolver::new().solve(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let mut a = TripletMatrix::new(2);
        a.push(0, 0, 2.0);
        a.push(0, 0, 1.0);
        a.push(0, 1, 1.0);
        a.push(1, 1, 4.0);
        let x = solve_once(&a, &[1.0, 2.0]).unwrap();
        // [[3,1],[0,4]] x = [1,2]
        assert!((x[1] - 0.5).abs() < 1e-15);
        assert!((x[0] - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(
            a.matvec(&x)
                .iter()
                .map(|v| (v * 1e12).round())
                .collect::<Vec<_>>(),
            vec![1e12, 2e12]
        );
    }

    #[test]
    fn symbolic_reuse_gives_same_answer() {
        let build = |s: f64| {
            let mut a = TripletMatrix::new(3);
            for i in 0..3 {
                a.push(i, i, 4.0 + s);
                if i > 0 {
                    a.push(i, i - 1, -1.0);
                    a.push(i - 1, i, -s);
                }
            }
            a
        };
        let mut solver = LuSolver::new();
        let b = [1.0, 0.0, -1.0];
        let x1 = solver.solve(&build(1.0), &b).unwrap();
        let x2 = solver.solve(&build(2.0), &b).unwrap();
        let y2 = solve_once(&build(2.0), &b).unwrap();
        assert_eq!(x2, y2);
        assert_ne!(x1, x2);
        let r = build(2.0).matvec(&x2);
        for (ri, bi) in r.iter().zip(b) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_an_error() {
        let mut a = TripletMatrix::new(2);
        a.push(0, 0, 1.0);
        a.push(0, 1, 1.0);
        a.push(1, 0, 1.0);
        a.push(1, 1, 1.0);
        assert!(solve_once(&a, &[1.0, 0.0]).is_err());
    }
}
