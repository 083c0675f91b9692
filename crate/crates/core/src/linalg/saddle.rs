//! Monolithic saddle-point systems
//!
//! ```text
//! [  A  -B^T  0 ] [u]   [f]
//! [ -B   0    m ] [p] = [g]
//! [  0   m^T  0 ] [l]   [0]
//! ```
//!
//! with an optional mean-value row `m` fixing the pressure constant, and
//! strong Dirichlet constraints on velocity dofs by symmetric elimination.

use std::collections::BTreeMap;

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

pub const CONSTRAINT_TOLERANCE: f64 = 1e-14;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Constraints {
    values: BTreeMap<usize, f64>,
}

impl Constraints {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `dof = value`; a second constraint on the same dof must agree.
    pub fn insert(&mut self, dof: usize, value: f64) -> Result<()> {
        if let Some(&old) = self.values.get(&dof) {
            if (old - value).abs() > CONSTRAINT_TOLERANCE {
                return Err(Error::ConstraintConflict {
                    dof,
                    first: old,
                    second: value,
                });
            }
            return Ok(());
        }
        self.values.insert(dof, value);
        Ok(())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut c = Self::new();
        for (d, v) in pairs {
            c.insert(d, v)?;
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, dof: usize) -> Option<f64> {
        self.values.get(&dof).copied()
    }

    pub fn contains(&self, dof: usize) -> bool {
        self.values.contains_key(&dof)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().map(|(&d, &v)| (d, v))
    }

    pub fn dofs(&self) -> impl Iterator<Item = usize> + '_ {
        self.values.keys().copied()
    }

    /// Same dofs, values replaced by `f(dof)`.
    pub fn with_values(&self, f: impl Fn(usize) -> f64) -> Constraints {
        Constraints {
            values: self.values.keys().map(|&d| (d, f(d))).collect(),
        }
    }

    pub fn dense_mask(&self, n: usize) -> Vec<Option<f64>> {
        let mut m = vec![None; n];
        for (d, v) in self.iter() {
            m[d] = Some(v);
        }
        m
    }
}

/// Symmetric elimination in place: constrained rows and columns are zeroed
/// (entries kept in the pattern), the diagonal set to one, and the
/// right-hand side lifted. The diagonal of every constrained dof must be
/// present in the pattern.
pub fn eliminate(m: &mut SparseMatrix, rhs: &mut [f64], constraints: &Constraints) -> Result<()> {
    if constraints.is_empty() {
        return Ok(());
    }
    let n = m.nrows();
    if let Some(d) = constraints.dofs().find(|&d| d >= n) {
        return Err(Error::Index {
            row: d,
            col: d,
            nrows: n,
            ncols: n,
        });
    }
    let mask = constraints.dense_mask(n);
    let row_ptr = m.row_ptr().to_vec();
    let cols = m.col_idx().to_vec();
    let vals = m.values_mut();
    for i in 0..n {
        let range = row_ptr[i]..row_ptr[i + 1];
        if mask[i].is_some() {
            let mut has_diag = false;
            for k in range {
                if cols[k] == i {
                    vals[k] = 1.0;
                    has_diag = true;
                } else {
                    vals[k] = 0.0;
                }
            }
            if !has_diag {
                return Err(Error::Solver(format!("constrained dof {i} has no diagonal entry")));
            }
            continue;
        }
        for k in range {
            if let Some(g) = mask[cols[k]] {
                rhs[i] -= vals[k] * g;
                vals[k] = 0.0;
            }
        }
    }
    for (d, g) in constraints.iter() {
        rhs[d] = g;
    }
    Ok(())
}

/// Fixed monolithic pattern for a given velocity-block pattern, divergence
/// block and mean row, with scatter positions so that refilling the values
/// each time step avoids re-sorting.
#[derive(Clone, Debug)]
pub struct SaddleLayout {
    nu: usize,
    np: usize,
    has_mean: bool,
    a_pattern: SparseMatrix,
    pattern: SparseMatrix,
    a_pos: Vec<usize>,
    b_pos: Vec<usize>,
    bt_pos: Vec<usize>,
    mean_pos: Vec<(usize, usize)>,
}

impl SaddleLayout {
    pub fn new(a: &SparseMatrix, b: &SparseMatrix, mean: Option<&[f64]>) -> Result<Self> {
        let (nu, np) = (a.nrows(), b.nrows());
        if a.ncols() != nu || b.ncols() != nu {
            return Err(Error::Pairing(format!(
                "velocity block {}x{} vs divergence block {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if let Some(m) = mean {
            if m.len() != np {
                return Err(Error::Pairing("mean row length differs from pressure dofs".into()));
            }
        }
        let n = nu + np + usize::from(mean.is_some());
        let mut t: Vec<(usize, usize, f64)> = Vec::with_capacity(a.nnz() + 2 * b.nnz() + nu + 2 * np);
        t.extend(a.triplets().into_iter().map(|(i, j, _)| (i, j, 0.0)));
        t.extend((0..nu).map(|i| (i, i, 0.0)));
        for (i, j, _) in b.triplets() {
            t.push((nu + i, j, 0.0));
            t.push((j, nu + i, 0.0));
        }
        if mean.is_some() {
            for p in 0..np {
                t.push((nu + p, nu + np, 0.0));
                t.push((nu + np, nu + p, 0.0));
            }
        }
        let pattern = SparseMatrix::from_triplets(n, n, &t)?;
        let pos = |i: usize, j: usize| pattern.find(i, j).expect("entry in pattern");
        let a_pos = a.triplets().into_iter().map(|(i, j, _)| pos(i, j)).collect();
        let bt = b.triplets();
        let b_pos = bt.iter().map(|&(i, j, _)| pos(nu + i, j)).collect();
        let bt_pos = bt.iter().map(|&(i, j, _)| pos(j, nu + i)).collect();
        let mean_pos = if mean.is_some() {
            (0..np).map(|p| (pos(nu + p, nu + np), pos(nu + np, nu + p))).collect()
        } else {
            Vec::new()
        };
        let mut a_pattern = a.clone();
        a_pattern.values_mut().iter_mut().for_each(|v| *v = 0.0);
        Ok(SaddleLayout {
            nu,
            np,
            has_mean: mean.is_some(),
            a_pattern,
            pattern,
            a_pos,
            b_pos,
            bt_pos,
            mean_pos,
        })
    }

    pub fn size(&self) -> usize {
        self.pattern.nrows()
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn np(&self) -> usize {
        self.np
    }

    pub fn has_mean(&self) -> bool {
        self.has_mean
    }

    pub fn accepts(&self, a: &SparseMatrix) -> bool {
        self.a_pattern.same_pattern(a)
    }

    /// Monolithic matrix with the given block values. `a` must have the
    /// pattern the layout was built with.
    pub fn assemble(&self, a: &SparseMatrix, b: &SparseMatrix, mean: Option<&[f64]>) -> Result<SparseMatrix> {
        if !self.accepts(a) {
            return Err(Error::Solver("velocity block pattern changed".into()));
        }
        if b.nnz() != self.b_pos.len() || mean.is_some() != self.has_mean {
            return Err(Error::Solver("divergence block or mean row changed".into()));
        }
        let mut m = self.pattern.clone();
        let vals = m.values_mut();
        for (&p, &v) in self.a_pos.iter().zip(a.values()) {
            vals[p] += v;
        }
        for ((&p, &q), &v) in self.b_pos.iter().zip(&self.bt_pos).zip(b.values()) {
            vals[p] -= v;
            vals[q] -= v;
        }
        if let Some(mv) = mean {
            for (&(p, q), &v) in self.mean_pos.iter().zip(mv) {
                vals[p] = v;
                vals[q] = v;
            }
        }
        Ok(m)
    }

    /// Stacks velocity and pressure right-hand sides.
    pub fn rhs(&self, f: &[f64], g: &[f64]) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.size());
        r.extend_from_slice(f);
        r.extend_from_slice(g);
        if self.has_mean {
            r.push(0.0);
        }
        r
    }
}

#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub mean: Option<Vec<f64>>,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    pub constraints: Constraints,
}

impl SaddleSystem {
    /// Monolithic matrix and right-hand side with constraints eliminated.
    pub fn apply_dirichlet(&self) -> Result<(SparseMatrix, Vec<f64>)> {
        let layout = SaddleLayout::new(&self.a, &self.b, self.mean.as_deref())?;
        self.apply_dirichlet_with(&layout)
    }

    pub fn apply_dirichlet_with(&self, layout: &SaddleLayout) -> Result<(SparseMatrix, Vec<f64>)> {
        if let Some(d) = self.constraints.dofs().find(|&d| d >= layout.nu) {
            return Err(Error::Index {
                row: d,
                col: d,
                nrows: layout.nu,
                ncols: layout.nu,
            });
        }
        let mut m = layout.assemble(&self.a, &self.b, self.mean.as_deref())?;
        let mut rhs = layout.rhs(&self.rhs_u, &self.rhs_p);
        eliminate(&mut m, &mut rhs, &self.constraints)?;
        Ok((m, rhs))
    }
}
