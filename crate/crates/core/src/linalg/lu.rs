//! Sparse LU with partial pivoting and a COLAMD fill-reducing ordering,
//! backed by faer. Symbolic analysis is kept while the sparsity pattern stays
//! the same.
//!
//! A dense last row and column with a zero corner (a mean-value border) would
//! make the symbolic fill bound of the whole pressure block dense. Such a
//! border is split off: the leading block is factored with one extra gauge
//! entry on the diagonal, and the bordered solution is recovered exactly from
//! a 2x2 correction.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, NumericLu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Borders with fewer entries than this are factored directly.
const BORDER_MIN_ENTRIES: usize = 64;

#[derive(Clone, Debug)]
struct Border {
    /// Gauge position in the leading block and its diagonal shift.
    j: usize,
    alpha: f64,
    /// Last row without the corner.
    d: Vec<f64>,
    /// Leading-block solves against `e_j` and `c`.
    y1: Vec<f64>,
    y2: Vec<f64>,
}

pub struct LuSolver {
    symbolic: Option<SymbolicLu<usize>>,
    numeric: NumericLu<usize, f64>,
    /// The matrix passed to [`LuSolver::factor`].
    matrix: Option<SparseMatrix>,
    /// What faer factored: the matrix itself or its gauged leading block.
    /// Its CSR arrays are the CSC arrays of the transpose.
    factored: Option<SparseMatrix>,
    border: Option<Border>,
    symbolic_count: usize,
}

impl Default for LuSolver {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for LuSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuSolver")
            .field("n", &self.matrix.as_ref().map(|m| m.nrows()))
            .field("bordered", &self.border.is_some())
            .field("symbolic_count", &self.symbolic_count)
            .finish()
    }
}

impl LuSolver {
    pub fn new() -> Self {
        LuSolver {
            symbolic: None,
            numeric: NumericLu::default(),
            matrix: None,
            factored: None,
            border: None,
            symbolic_count: 0,
        }
    }

    /// Number of symbolic analyses performed so far.
    pub fn symbolic_count(&self) -> usize {
        self.symbolic_count
    }

    pub fn factor(&mut self, m: &SparseMatrix) -> Result<()> {
        if m.nrows() != m.ncols() {
            return Err(Error::Solver(format!(
                "cannot factor a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        for i in 0..n {
            if m.row(i).1.iter().all(|&v| v == 0.0) {
                return Err(Error::Singular { row: i });
            }
        }
        if let Some(v) = m.values().iter().position(|v| !v.is_finite()) {
            let row = m.row_ptr().partition_point(|&p| p <= v) - 1;
            return Err(Error::Solver(format!("non-finite matrix entry in row {row}")));
        }
        self.matrix = None;
        self.border = None;
        match split_border(m) {
            Some((lead, c, d, j, alpha)) => {
                self.factor_inner(lead)?;
                let mut e = vec![0.0; n - 1];
                e[j] = 1.0;
                let y1 = self.solve_inner(&e)?;
                let y2 = self.solve_inner(&c)?;
                self.border = Some(Border { j, alpha, d, y1, y2 });
            }
            None => self.factor_inner(m.clone())?,
        }
        self.matrix = Some(m.clone());
        Ok(())
    }

    fn factor_inner(&mut self, m: SparseMatrix) -> Result<()> {
        let n = m.nrows();
        let reuse = matches!(&self.factored, Some(old) if old.same_pattern(&m)) && self.symbolic.is_some();
        self.factored = Some(m);
        let m = self.factored.as_ref().unwrap();
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, m.row_ptr(), None, m.col_idx());
        if !reuse {
            let sym = factorize_symbolic_lu(pattern, Default::default())
                .map_err(|e| Error::Solver(format!("symbolic analysis failed: {e:?}")))?;
            self.symbolic = Some(sym);
            self.symbolic_count += 1;
        }
        let sym = self.symbolic.as_ref().unwrap();
        let mat = SparseColMatRef::new(pattern, m.values());
        let par = Par::Seq;
        let mut mem = MemBuffer::new(sym.factorize_numeric_lu_scratch::<f64>(par, Default::default()));
        let stack = MemStack::new(&mut mem);
        match sym.factorize_numeric_lu(&mut self.numeric, mat, par, stack, Default::default()) {
            Ok(_) => Ok(()),
            Err(LuError::SymbolicSingular { index }) => {
                let perm = sym.col_perm();
                let row = perm.arrays().0.get(index).copied().unwrap_or(index);
                self.factored = None;
                Err(Error::Singular { row })
            }
            Err(e) => {
                self.factored = None;
                Err(Error::Solver(format!("numeric factorization failed: {e:?}")))
            }
        }
    }

    fn solve_inner(&self, b: &[f64]) -> Result<Vec<f64>> {
        let (Some(sym), Some(m)) = (&self.symbolic, &self.factored) else {
            return Err(Error::Solver("solve called before a successful factorization".into()));
        };
        let n = m.nrows();
        let mut x = b.to_vec();
        let par = Par::Seq;
        let mut mem = MemBuffer::new(sym.solve_transpose_in_place_scratch::<f64>(1, par));
        let stack = MemStack::new(&mut mem);
        let lu = LuRef::new_unchecked(sym, &self.numeric);
        debug_assert_eq!(lu.symbolic().nrows(), n);
        lu.solve_transpose_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(&mut x, n, 1), par, stack);
        if let Some(row) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singular { row });
        }
        Ok(x)
    }

    /// Solves with the current factorization.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let Some(m) = &self.matrix else {
            return Err(Error::Solver("solve called before a successful factorization".into()));
        };
        let n = m.nrows();
        if b.len() != n {
            return Err(Error::Solver(format!("rhs length {} for a system of size {n}", b.len())));
        }
        let Some(bd) = &self.border else {
            return self.solve_inner(b);
        };
        // K = K_g - alpha e_j e_j^T; unknowns s = x_j and the border value
        let y0 = self.solve_inner(&b[..n - 1])?;
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
        let (j, alpha) = (bd.j, bd.alpha);
        let (a11, a12, r1) = (1.0 - alpha * bd.y1[j], bd.y2[j], y0[j]);
        let (a21, a22, r2) = (alpha * dot(&bd.d, &bd.y1), -dot(&bd.d, &bd.y2), b[n - 1] - dot(&bd.d, &y0));
        let det = a11 * a22 - a12 * a21;
        let scale = (a11.abs() + a12.abs()) * (a21.abs() + a22.abs());
        if !(det.abs() > 1e-14 * scale) {
            return Err(Error::Singular { row: n - 1 });
        }
        let s = (r1 * a22 - a12 * r2) / det;
        let lambda = (a11 * r2 - a21 * r1) / det;
        let mut x: Vec<f64> = (0..n - 1).map(|i| y0[i] + alpha * s * bd.y1[i] - lambda * bd.y2[i]).collect();
        x.push(lambda);
        if let Some(row) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singular { row });
        }
        Ok(x)
    }

    /// Solve followed by `passes` rounds of iterative refinement against the
    /// factored matrix.
    pub fn solve_refined(&self, b: &[f64], passes: usize) -> Result<Vec<f64>> {
        let mut x = self.solve(b)?;
        let m = self.matrix.as_ref().expect("solve succeeded");
        for _ in 0..passes {
            let mx = m.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&mx).map(|(p, q)| p - q).collect();
            let dx = self.solve(&r)?;
            x.iter_mut().zip(&dx).for_each(|(v, d)| *v += d);
        }
        Ok(x)
    }

    pub fn matrix(&self) -> Option<&SparseMatrix> {
        self.matrix.as_ref()
    }

    pub fn is_bordered(&self) -> bool {
        self.border.is_some()
    }
}

/// Leading block with a gauge entry, border column, border row, gauge
/// position and shift, when `m` ends in a dense border with a zero corner.
fn split_border(m: &SparseMatrix) -> Option<(SparseMatrix, Vec<f64>, Vec<f64>, usize, f64)> {
    let n = m.nrows();
    if n < 2 {
        return None;
    }
    let (lc, lv) = m.row(n - 1);
    let row_nnz = lv.iter().filter(|v| **v != 0.0).count();
    if row_nnz < BORDER_MIN_ENTRIES || m.get(n - 1, n - 1) != 0.0 {
        return None;
    }
    let mut d = vec![0.0; n - 1];
    for (&c, &v) in lc.iter().zip(lv) {
        if c < n - 1 {
            d[c] = v;
        }
    }
    let mut c = vec![0.0; n - 1];
    for (i, ci) in c.iter_mut().enumerate() {
        *ci = m.get(i, n - 1);
    }
    if c.iter().filter(|v| **v != 0.0).count() < BORDER_MIN_ENTRIES {
        return None;
    }
    let j = (0..n - 1).max_by(|&a, &b| (c[a].abs() * d[a].abs()).total_cmp(&(c[b].abs() * d[b].abs())))?;
    if c[j] == 0.0 || d[j] == 0.0 {
        return None;
    }
    let (rc, rv) = m.row(j);
    let alpha = rc.iter().zip(rv).filter(|(c, _)| **c < n - 1).fold(0.0f64, |a, (_, v)| a.max(v.abs()));
    if alpha == 0.0 {
        return None;
    }

    let mut row_ptr = Vec::with_capacity(n);
    let mut col_idx = Vec::with_capacity(m.nnz());
    let mut values = Vec::with_capacity(m.nnz());
    row_ptr.push(0);
    for i in 0..n - 1 {
        let (cols, vals) = m.row(i);
        let mut placed = i != j;
        for (&c, &v) in cols.iter().zip(vals) {
            if c >= n - 1 {
                continue;
            }
            if !placed && c >= j {
                placed = true;
                if c == j {
                    col_idx.push(c);
                    values.push(v + alpha);
                    continue;
                }
                col_idx.push(j);
                values.push(alpha);
            }
            col_idx.push(c);
            values.push(v);
        }
        if !placed {
            col_idx.push(j);
            values.push(alpha);
        }
        row_ptr.push(col_idx.len());
    }
    let lead = SparseMatrix::from_csr(n - 1, n - 1, row_ptr, col_idx, values).ok()?;
    Some((lead, c, d, j, alpha))
}

/// `||Mx - b||_inf / (||M||_inf ||x||_inf + ||b||_inf)`.
pub fn relative_residual(m: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r = m.matvec(x);
    let num = r.iter().zip(b).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |a, p| a.max(p.abs()));
    let den = m.norm_inf() * inf(x) + inf(b);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Factors and solves once, checking the relative residual.
pub fn lu_solve(m: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let mut lu = LuSolver::new();
    lu.factor(m)?;
    let x = lu.solve(b)?;
    let res = relative_residual(m, &x, b);
    if res > RESIDUAL_TOLERANCE {
        return Err(Error::Residual {
            step: 0,
            residual: res,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok(x)
}
