//! Exact rational linear algebra: row reduction, rank, span membership,
//! affine solution sets and Fourier–Motzkin feasibility.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{format_q, Q};

/// Dense matrix of rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMatrix {
    rows: Vec<Vec<Q>>,
    ncols: usize,
}

impl QMatrix {
    pub fn from_rows(rows: Vec<Vec<Q>>, ncols: usize) -> Self {
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged matrix");
        QMatrix { rows, ncols }
    }

    pub fn from_i64(rows: &[Vec<i64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        QMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Q::from_integer(x.into())).collect())
                .collect(),
            ncols,
        )
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        QMatrix {
            rows: vec![vec![Q::zero(); ncols]; nrows],
            ncols,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = QMatrix::zeros(n, n);
        for i in 0..n {
            m.rows[i][i] = Q::one();
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rows(&self) -> &[Vec<Q>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> &Q {
        &self.rows[i][j]
    }

    pub fn push_row(&mut self, row: Vec<Q>) -> Result<()> {
        if row.len() != self.ncols {
            return Err(Error::WidthMismatch(row.len(), self.ncols));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn transpose(&self) -> QMatrix {
        let rows = (0..self.ncols)
            .map(|j| self.rows.iter().map(|r| r[j].clone()).collect())
            .collect();
        QMatrix {
            rows,
            ncols: self.rows.len(),
        }
    }

    /// Reduced row-echelon form, rank and pivot columns.
    pub fn rref(&self) -> (QMatrix, usize, Vec<usize>) {
        let mut m = self.rows.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.ncols {
            if r == m.len() {
                break;
            }
            let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
                continue;
            };
            m.swap(r, p);
            let inv = m[r][c].recip();
            for x in m[r].iter_mut() {
                *x *= &inv;
            }
            let pivot_row = m[r].clone();
            for (i, row) in m.iter_mut().enumerate() {
                if i != r && !row[c].is_zero() {
                    let f = row[c].clone();
                    for (x, y) in row.iter_mut().zip(&pivot_row) {
                        if !y.is_zero() {
                            *x -= &f * y;
                        }
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        (
            QMatrix {
                rows: m,
                ncols: self.ncols,
            },
            r,
            pivots,
        )
    }

    pub fn rank(&self) -> usize {
        let mut space = RowSpace::new(self.ncols);
        for row in &self.rows {
            space.insert(row).expect("width checked at construction");
        }
        space.rank()
    }

    /// Stacks `other` under `self`.
    pub fn vstack(&self, other: &QMatrix) -> Result<QMatrix> {
        if self.ncols != other.ncols {
            return Err(Error::WidthMismatch(self.ncols, other.ncols));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(QMatrix {
            rows,
            ncols: self.ncols,
        })
    }

    pub fn mul_vec(&self, v: &[Q]) -> Result<Vec<Q>> {
        if v.len() != self.ncols {
            return Err(Error::WidthMismatch(v.len(), self.ncols));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| r.iter().zip(v).fold(Q::zero(), |acc, (a, b)| acc + a * b))
            .collect())
    }

    /// Rows as lists of `"p/q"` strings.
    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(format_q).collect())
            .collect()
    }
}

/// Incrementally maintained row space, stored as primitive integer rows in
/// echelon form.
#[derive(Clone, Debug)]
pub struct RowSpace {
    ncols: usize,
    basis: Vec<(usize, Vec<BigInt>)>,
}

fn to_primitive_integers(row: &[Q]) -> Vec<BigInt> {
    let lcm = row
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = row.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    make_primitive(ints)
}

fn make_primitive(mut v: Vec<BigInt>) -> Vec<BigInt> {
    let g = v.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if !g.is_zero() && !g.is_one() {
        for x in v.iter_mut() {
            *x /= &g;
        }
    }
    v
}

impl RowSpace {
    pub fn new(ncols: usize) -> Self {
        RowSpace {
            ncols,
            basis: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    fn reduce(&self, row: &[Q]) -> Result<Vec<BigInt>> {
        if row.len() != self.ncols {
            return Err(Error::WidthMismatch(row.len(), self.ncols));
        }
        let mut v = to_primitive_integers(row);
        for (p, b) in &self.basis {
            if v[*p].is_zero() {
                continue;
            }
            let (bp, vp) = (&b[*p], v[*p].clone());
            v = v.iter().zip(b).map(|(x, y)| x * bp - &vp * y).collect();
            v = make_primitive(v);
        }
        Ok(v)
    }

    /// Whether `row` lies in the span.
    pub fn contains(&self, row: &[Q]) -> Result<bool> {
        Ok(self.reduce(row)?.iter().all(Zero::is_zero))
    }

    /// Adds `row`; returns whether the rank grew.
    pub fn insert(&mut self, row: &[Q]) -> Result<bool> {
        let v = self.reduce(row)?;
        match v.iter().position(|x| !x.is_zero()) {
            None => Ok(false),
            Some(p) => {
                let v = if v[p].is_negative() { v.into_iter().map(|x| -x).collect() } else { v };
                self.basis.push((p, v));
                Ok(true)
            }
        }
    }
}

/// Whether `v` lies in the row space of `rows`.
pub fn in_span(v: &[Q], rows: &QMatrix) -> Result<bool> {
    if v.len() != rows.ncols() {
        return Err(Error::WidthMismatch(v.len(), rows.ncols()));
    }
    let mut space = RowSpace::new(rows.ncols());
    for r in rows.rows() {
        space.insert(r)?;
    }
    space.contains(v)
}

/// One linear equation `Σ coeffs[i] · var_i = rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearEquation {
    pub coeffs: Vec<Q>,
    pub rhs: Q,
}

/// The solutions of a consistent linear system, parametrized by free variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSolutionSet {
    pub vars: Vec<String>,
    pub particular: Vec<Q>,
    /// Basis of the homogeneous solutions, one vector per free variable.
    pub homogeneous: Vec<Vec<Q>>,
    pub free_vars: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VariableSolution {
    pub var: String,
    pub constant: String,
    /// (free variable, coefficient) pairs.
    pub terms: Vec<(String, String)>,
}

/// Inequality `Σ coeffs[i] · var_i ≥ 0` (non-strict).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inequality {
    pub coeffs: Vec<Q>,
    pub constant: Q,
}

impl Inequality {
    /// `var ≥ 0`.
    pub fn nonneg(nvars: usize, var: usize) -> Self {
        let mut coeffs = vec![Q::zero(); nvars];
        coeffs[var] = Q::one();
        Inequality {
            coeffs,
            constant: Q::zero(),
        }
    }

    /// `var ≤ 0`.
    pub fn nonpos(nvars: usize, var: usize) -> Self {
        let mut coeffs = vec![Q::zero(); nvars];
        coeffs[var] = -Q::one();
        Inequality {
            coeffs,
            constant: Q::zero(),
        }
    }
}

/// Solves `A x = b`; `None` when inconsistent.
pub fn solve_affine(system: &[LinearEquation], vars: &[&str]) -> Result<Option<AffineSolutionSet>> {
    let nv = vars.len();
    let mut rows = Vec::with_capacity(system.len());
    for eq in system {
        if eq.coeffs.len() != nv {
            return Err(Error::WidthMismatch(eq.coeffs.len(), nv));
        }
        let mut r = eq.coeffs.clone();
        r.push(eq.rhs.clone());
        rows.push(r);
    }
    let (red, rank, pivots) = QMatrix::from_rows(rows, nv + 1).rref();
    if pivots.last() == Some(&nv) {
        return Ok(None);
    }
    let free_vars: Vec<usize> = (0..nv).filter(|c| !pivots.contains(c)).collect();
    let mut particular = vec![Q::zero(); nv];
    for (i, &p) in pivots.iter().enumerate().take(rank) {
        particular[p] = red.rows[i][nv].clone();
    }
    let homogeneous = free_vars
        .iter()
        .map(|&f| {
            let mut v = vec![Q::zero(); nv];
            v[f] = Q::one();
            for (i, &p) in pivots.iter().enumerate() {
                v[p] = -red.rows[i][f].clone();
            }
            v
        })
        .collect();
    Ok(Some(AffineSolutionSet {
        vars: vars.iter().map(|s| s.to_string()).collect(),
        particular,
        homogeneous,
        free_vars,
    }))
}

impl AffineSolutionSet {
    pub fn dimension(&self) -> usize {
        self.homogeneous.len()
    }

    /// The point with the given free-parameter values.
    pub fn point(&self, params: &[Q]) -> Vec<Q> {
        let mut x = self.particular.clone();
        for (t, h) in params.iter().zip(&self.homogeneous) {
            for (xi, hi) in x.iter_mut().zip(h) {
                *xi += t * hi;
            }
        }
        x
    }

    pub fn contains(&self, x: &[Q]) -> bool {
        if x.len() != self.vars.len() {
            return false;
        }
        let params: Vec<Q> = self.free_vars.iter().map(|&f| x[f].clone()).collect();
        self.point(&params) == x
    }

    /// Each variable as constant plus combination of free variables.
    pub fn describe(&self) -> Vec<VariableSolution> {
        (0..self.vars.len())
            .map(|i| VariableSolution {
                var: self.vars[i].clone(),
                constant: format_q(&self.particular[i]),
                terms: self
                    .free_vars
                    .iter()
                    .zip(&self.homogeneous)
                    .filter(|(_, h)| !h[i].is_zero())
                    .map(|(&f, h)| (self.vars[f].clone(), format_q(&h[i])))
                    .collect(),
            })
            .collect()
    }

    /// Whether some point of the set satisfies all inequalities, decided by
    /// Fourier–Motzkin elimination over the free parameters.
    pub fn feasible_with(&self, inequalities: &[Inequality]) -> bool {
        let k = self.dimension();
        // Each constraint: (coefficients on parameters, constant) meaning a·t + c ≥ 0.
        let mut cons: Vec<(Vec<Q>, Q)> = inequalities
            .iter()
            .map(|ineq| {
                let dot = |v: &Vec<Q>| {
                    v.iter()
                        .zip(&ineq.coeffs)
                        .fold(Q::zero(), |acc, (a, b)| acc + a * b)
                };
                let a: Vec<Q> = self.homogeneous.iter().map(dot).collect();
                (a, dot(&self.particular) + &ineq.constant)
            })
            .collect();
        for j in 0..k {
            let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), Vec::new());
            for c in cons {
                if c.0[j].is_positive() {
                    pos.push(c);
                } else if c.0[j].is_negative() {
                    neg.push(c);
                } else {
                    rest.push(c);
                }
            }
            for (pa, pc) in &pos {
                for (na, nc) in &neg {
                    let (sp, sn) = (-na[j].clone(), pa[j].clone());
                    let a: Vec<Q> = pa.iter().zip(na).map(|(x, y)| x * &sp + y * &sn).collect();
                    rest.push((a, pc * &sp + nc * &sn));
                }
            }
            cons = rest;
        }
        cons.iter().all(|(_, c)| !c.is_negative())
    }
}
