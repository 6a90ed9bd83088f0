use std::fmt;

use serde::{Deserialize, Serialize};

use super::poly::Poly;
use super::rat::Rat;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Dense matrix over a scalar ring, stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize", deserialize = "S: Deserialize<'de> + Scalar"))]
#[serde(try_from = "Vec<Vec<S>>", into = "Vec<Vec<S>>")]
pub struct Mat<S: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> TryFrom<Vec<Vec<S>>> for Mat<S> {
    type Error = Error;
    fn try_from(v: Vec<Vec<S>>) -> Result<Self> {
        Mat::from_rows(v)
    }
}

impl<S: Scalar> From<Mat<S>> for Vec<Vec<S>> {
    fn from(m: Mat<S>) -> Self {
        (0..m.rows).map(|i| m.row(i)).collect()
    }
}

impl<S: Scalar> Mat<S> {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zero(n, n);
        for i in 0..n {
            m.set(i, i, S::one());
        }
        m
    }

    pub fn diag(d: &[S]) -> Self {
        let mut m = Mat::zero(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            m.set(i, i, x.clone());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Parse("ragged matrix rows".into()));
        }
        Ok(Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    /// Matrix whose columns are the given vectors (all of length `n`).
    pub fn from_cols(n: usize, cols: &[Vec<S>]) -> Self {
        let mut m = Mat::zero(n, cols.len());
        for (j, v) in cols.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                m.set(i, j, x.clone());
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: S) {
        self.data[i * self.cols + j] = x;
    }

    pub fn row(&self, i: usize) -> Vec<S> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<S>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Mat<T> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn residue(&self) -> Mat<Rat> {
        self.map(|x| x.residue())
    }

    pub fn mul(&self, o: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, o.rows, "dimension mismatch");
        let mut m: Mat<S> = Mat::zero(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let v = m.get(i, j).clone() + a.clone() * o.get(k, j).clone();
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        (0..self.rows)
            .map(|i| {
                (0..self.cols).fold(S::zero(), |acc, j| acc + self.get(i, j).clone() * v[j].clone())
            })
            .collect()
    }

    pub fn add(&self, o: &Mat<S>) -> Mat<S> {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        let data = self.data.iter().zip(&o.data).map(|(a, b)| a.clone() + b.clone()).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, o: &Mat<S>) -> Mat<S> {
        self.add(&o.scale(&-S::one()))
    }

    pub fn scale(&self, c: &S) -> Mat<S> {
        self.map(|x| x.clone() * c.clone())
    }

    pub fn transpose(&self) -> Mat<S> {
        let mut m = Mat::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(j, i, self.get(i, j).clone());
            }
        }
        m
    }

    pub fn trace(&self) -> S {
        (0..self.rows.min(self.cols)).fold(S::zero(), |a, i| a + self.get(i, i).clone())
    }

    /// Block-diagonal sum of square matrices.
    pub fn block_diag(blocks: &[&Mat<S>]) -> Mat<S> {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let mut m = Mat::zero(n, n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    m.set(off + i, off + j, b.get(i, j).clone());
                }
            }
            off += b.rows;
        }
        m
    }

    pub fn select_rows(&self, idx: &[usize]) -> Mat<S> {
        Mat::from_rows(idx.iter().map(|&i| self.row(i)).collect()).unwrap_or_else(|_| Mat::zero(0, self.cols))
    }

    /// Characteristic polynomial `det(T·I - M)` by Faddeev–LeVerrier.
    ///
    /// Only divides by the integers `1..=n`, so it is valid over dual numbers.
    pub fn charpoly(&self) -> Poly<S> {
        assert!(self.is_square(), "charpoly of a non-square matrix");
        let n = self.rows;
        let mut c = vec![S::zero(); n + 1];
        c[n] = S::one();
        let mut mk = Mat::zero(n, n);
        for k in 1..=n {
            mk = self.mul(&mk).add(&Mat::identity(n).scale(&c[n - k + 1]));
            let tr = self.mul(&mk).trace();
            let inv_k = S::from_rat(Rat::new(1, k as i64));
            c[n - k] = -(tr * inv_k);
        }
        Poly::new(c)
    }

    /// Inverse by Gauss–Jordan, pivoting on unit entries.
    ///
    /// Over a local ring a square matrix is invertible iff its residue is, and
    /// then a unit pivot always exists in each column.
    pub fn inverse(&self) -> Result<Mat<S>> {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for c in 0..n {
            let p = (c..n).find(|&r| a.get(r, c).is_unit()).ok_or(Error::NotInvertible)?;
            a.swap_rows(p, c);
            inv.swap_rows(p, c);
            let pinv = a.get(c, c).inv().unwrap();
            a.scale_row(c, &pinv);
            inv.scale_row(c, &pinv);
            for r in 0..n {
                if r != c && !a.get(r, c).is_zero() {
                    let f = a.get(r, c).clone();
                    a.axpy_row(r, c, &f);
                    inv.axpy_row(r, c, &f);
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    fn scale_row(&mut self, r: usize, c: &S) {
        for j in 0..self.cols {
            let v = self.get(r, j).clone() * c.clone();
            self.set(r, j, v);
        }
    }

    // row[r] -= f · row[src]
    fn axpy_row(&mut self, r: usize, src: usize, f: &S) {
        for j in 0..self.cols {
            let v = self.get(r, j).clone() - f.clone() * self.get(src, j).clone();
            self.set(r, j, v);
        }
    }

    /// Columns of `self` that are pivot columns of the residue matrix.
    ///
    /// For an idempotent over a local ring these columns freely span its image.
    pub fn residue_pivot_columns(&self) -> Vec<usize> {
        self.residue().rref().1
    }

    /// Rows at which the residue of a full-column-rank matrix has an invertible minor.
    pub fn residue_pivot_rows(&self) -> Vec<usize> {
        self.residue().transpose().rref().1
    }

    /// Coordinates `C` with `self · C = target`, for `self` of full column rank
    /// whose column span contains the columns of `target`.
    pub fn solve_in_span(&self, target: &Mat<S>) -> Result<Mat<S>> {
        let rows = self.residue_pivot_rows();
        if rows.len() != self.cols {
            return Err(Error::NotInvertible);
        }
        let minor_inv = self.select_rows(&rows).inverse()?;
        let c = minor_inv.mul(&target.select_rows(&rows));
        if self.mul(&c) != *target {
            return Err(Error::NotInSpan);
        }
        Ok(c)
    }
}

impl Mat<Rat> {
    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (Mat<Rat>, Vec<usize>) {
        let mut a = self.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..a.cols {
            if r == a.rows {
                break;
            }
            let Some(p) = (r..a.rows).find(|&i| !a.get(i, c).is_zero()) else {
                continue;
            };
            a.swap_rows(p, r);
            let inv = a.get(r, c).recip().unwrap();
            a.scale_row(r, &inv);
            for i in 0..a.rows {
                if i != r && !a.get(i, c).is_zero() {
                    let f = a.get(i, c).clone();
                    a.axpy_row(i, r, &f);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (a, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    pub fn det(&self) -> Rat {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.clone();
        let mut det = Rat::one();
        for c in 0..n {
            let Some(p) = (c..n).find(|&i| !a.get(i, c).is_zero()) else {
                return Rat::zero();
            };
            if p != c {
                a.swap_rows(p, c);
                det = -det;
            }
            let piv = a.get(c, c).clone();
            det = det * &piv;
            let inv = piv.recip().unwrap();
            for i in c + 1..n {
                if !a.get(i, c).is_zero() {
                    let f = a.get(i, c).clone() * &inv;
                    a.axpy_row(i, c, &f);
                }
            }
        }
        det
    }

    /// Basis of the right null space; empty iff the columns are independent.
    pub fn kernel_basis(&self) -> Vec<Vec<Rat>> {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![Rat::zero(); self.cols];
                v[f] = Rat::one();
                for (k, &pc) in pivots.iter().enumerate() {
                    v[pc] = -r.get(k, f).clone();
                }
                v
            })
            .collect()
    }
}

impl<S: Scalar + fmt::Display> fmt::Display for Mat<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl<S: Scalar> fmt::Debug for Mat<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<S>> = (0..self.rows).map(|i| self.row(i)).collect();
        write!(f, "Mat{rows:?}")
    }
}

/// Subspace of `Rat^n` in canonical form (nonzero rows of the RREF of a spanning set).
#[derive(Clone, PartialEq, Eq, Debug, Serialize)]
pub struct Subspace {
    pub ambient: usize,
    pub basis: Vec<Vec<Rat>>,
}

impl Subspace {
    pub fn span(ambient: usize, vectors: &[Vec<Rat>]) -> Subspace {
        if vectors.is_empty() {
            return Subspace { ambient, basis: vec![] };
        }
        let m = Mat::from_rows(vectors.to_vec()).expect("vectors of equal length");
        let (r, piv) = m.rref();
        Subspace { ambient, basis: (0..piv.len()).map(|i| r.row(i)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn sum(&self, o: &Subspace) -> Subspace {
        let mut v = self.basis.clone();
        v.extend(o.basis.iter().cloned());
        Subspace::span(self.ambient, &v)
    }

    pub fn intersection_dim(&self, o: &Subspace) -> usize {
        self.dim() + o.dim() - self.sum(o).dim()
    }

    pub fn contains(&self, v: &[Rat]) -> bool {
        let mut b = self.basis.clone();
        b.push(v.to_vec());
        Subspace::span(self.ambient, &b).dim() == self.dim()
    }
}
