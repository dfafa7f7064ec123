//! Exact linear algebra over the rationals and over the rational-function
//! field: rank, kernels, affine solve sets, subspace operations, and
//! deterministic rational point sampling.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::expr::{ChartRef, Expr, Point};
use crate::Result;

pub use num_rational::BigRational as Rational;

/// Zero rational. Avoids the `Scalar`/`num_traits` method ambiguity at
/// concrete call sites.
pub fn q0() -> BigRational {
    <BigRational as Zero>::zero()
}

/// One rational.
pub fn q1() -> BigRational {
    <BigRational as One>::one()
}

/// Rational from a machine integer.
pub fn qi(n: i64) -> BigRational {
    BigRational::from(BigInt::from(n))
}

/// Field operations needed by the elimination routines. `zero`/`one` take a
/// witness because expressions carry their chart.
pub trait Scalar: Clone + PartialEq + std::fmt::Debug + Send + Sync + Sized {
    fn zero(witness: &Self) -> Self;
    fn one(witness: &Self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn is_zero(&self) -> bool;
    /// Optional scalar-specific row reduction (the rational scalar has an
    /// integer-preserving fast path). Must produce the same reduced form.
    fn fast_rref(_m: &Matrix<Self>) -> Option<Rref<Self>> {
        None
    }
    /// Rescale a row by a nonzero scalar before elimination when that makes
    /// arithmetic cheaper; must not change the row's span.
    fn scale_row(row: Vec<Self>) -> Vec<Self> {
        row
    }
}

impl Scalar for BigRational {
    fn zero(_: &Self) -> Self {
        <BigRational as Zero>::zero()
    }
    fn one(_: &Self) -> Self {
        <BigRational as One>::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn fast_rref(m: &Matrix<Self>) -> Option<Rref<Self>> {
        rref_integral(m)
    }
    fn scale_row(row: Vec<Self>) -> Vec<Self> {
        use num_integer::Integer;
        let mut den_lcm = BigInt::from(1);
        let mut num_gcd = BigInt::from(0);
        for c in &row {
            den_lcm = den_lcm.lcm(c.denom());
            num_gcd = num_gcd.gcd(c.numer());
        }
        if Zero::is_zero(&num_gcd) {
            return row;
        }
        let factor = BigRational::new(den_lcm, num_gcd);
        row.into_iter().map(|c| c * &factor).collect()
    }
}

/// Integer-preserving Gauss-Jordan for matrices with integral entries:
/// rows are eliminated by cross-multiplication and kept primitive, and
/// pivots are normalized to 1 only at the end. The reduced row echelon form
/// is unique, so this is observably identical to the generic path while
/// avoiding per-operation rational gcds.
fn rref_integral(m: &Matrix<BigRational>) -> Option<Rref<BigRational>> {
    use num_integer::Integer;
    if !m
        .entries
        .iter()
        .all(|e| num_traits::One::is_one(e.denom()))
    {
        return None;
    }
    let rows = m.rows();
    let cols = m.cols();
    let mut a: Vec<Vec<BigInt>> = (0..rows)
        .map(|i| m.row(i).iter().map(|e| e.numer().clone()).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut witnesses = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !Zero::is_zero(&a[i][c])) else {
            continue;
        };
        a.swap(p, r);
        witnesses.push(BigRational::from(a[r][c].clone()));
        for i in 0..rows {
            if i == r || Zero::is_zero(&a[i][c]) {
                continue;
            }
            let (piv, fac) = (a[r][c].clone(), a[i][c].clone());
            for j in 0..cols {
                let t = &a[i][j] * &piv - &fac * &a[r][j];
                a[i][j] = t;
            }
            // keep the row primitive so entries stay small
            let mut g = BigInt::from(0);
            for j in 0..cols {
                g = g.gcd(&a[i][j]);
                if num_traits::One::is_one(&g) {
                    break;
                }
            }
            if !Zero::is_zero(&g) && !num_traits::One::is_one(&g) {
                for j in 0..cols {
                    a[i][j] = &a[i][j] / &g;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    // final normalization: divide each pivot row by its pivot
    let mut out = Matrix::zeros(q0(), rows, cols);
    for (row, &c) in pivots.iter().enumerate() {
        let piv = a[row][c].clone();
        for j in 0..cols {
            out[(row, j)] = BigRational::new(a[row][j].clone(), piv.clone());
        }
    }
    Some(Rref {
        mat: out,
        pivots,
        witnesses,
    })
}

impl Scalar for Expr {
    fn zero(witness: &Self) -> Self {
        Expr::zero(witness.chart())
    }
    fn one(witness: &Self) -> Self {
        Expr::one(witness.chart())
    }
    fn add(&self, o: &Self) -> Self {
        Expr::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        Expr::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        Expr::mul(self, o)
    }
    fn neg(&self) -> Self {
        Expr::neg(self)
    }
    fn div(&self, o: &Self) -> Self {
        Expr::div(self, o).expect("division by zero scalar")
    }
    fn is_zero(&self) -> bool {
        Expr::is_zero(self)
    }
}

/// Dense matrix. A zero prototype is kept so empty shapes can still mint
/// scalars of the right chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S: Scalar> {
    rows: usize,
    cols: usize,
    entries: Vec<S>,
    proto: S,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(proto: S, rows: usize, cols: usize) -> Self {
        let zero = S::zero(&proto);
        Matrix {
            rows,
            cols,
            entries: vec![zero; rows * cols],
            proto,
        }
    }

    pub fn identity(proto: S, n: usize) -> Self {
        let mut m = Matrix::zeros(proto, n, n);
        for i in 0..n {
            m[(i, i)] = S::one(&m.proto);
        }
        m
    }

    pub fn from_rows(proto: S, rows: Vec<Vec<S>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        for row in &rows {
            assert_eq!(row.len(), c, "ragged rows");
        }
        Matrix {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
            proto,
        }
    }

    pub fn from_cols(proto: S, cols: Vec<Vec<S>>) -> Self {
        Matrix::from_rows(proto, cols).transpose()
    }

    pub fn from_fn(proto: S, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Matrix {
            rows,
            cols,
            entries,
            proto,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn proto(&self) -> &S {
        &self.proto
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> Matrix<S> {
        Matrix::from_fn(self.proto.clone(), self.cols, self.rows, |i, j| {
            self[(j, i)].clone()
        })
    }

    pub fn map<T: Scalar>(&self, proto: T, f: impl Fn(&S) -> T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
            proto,
        }
    }

    pub fn matmul(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, other.rows, "incompatible shapes");
        Matrix::from_fn(self.proto.clone(), self.rows, other.cols, |i, j| {
            let mut acc = S::zero(&self.proto);
            for k in 0..self.cols {
                acc = acc.add(&self[(i, k)].mul(&other[(k, j)]));
            }
            acc
        })
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "incompatible shapes");
        (0..self.rows)
            .map(|i| {
                let mut acc = S::zero(&self.proto);
                for k in 0..self.cols {
                    acc = acc.add(&self[(i, k)].mul(&v[k]));
                }
                acc
            })
            .collect()
    }

    pub fn hstack(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.rows, other.rows, "row count mismatch");
        Matrix::from_fn(
            self.proto.clone(),
            self.rows,
            self.cols + other.cols,
            |i, j| {
                if j < self.cols {
                    self[(i, j)].clone()
                } else {
                    other[(i, j - self.cols)].clone()
                }
            },
        )
    }

    pub fn vstack(&self, other: &Matrix<S>) -> Matrix<S> {
        assert_eq!(self.cols, other.cols, "column count mismatch");
        Matrix::from_fn(
            self.proto.clone(),
            self.rows + other.rows,
            self.cols,
            |i, j| {
                if i < self.rows {
                    self[(i, j)].clone()
                } else {
                    other[(i - self.rows, j)].clone()
                }
            },
        )
    }

    /// Exact rank by one-step fraction-free (Bareiss) elimination. Pivot is
    /// the first nonzero entry in column order, so runs are reproducible.
    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let mut prev = S::one(&self.proto);
        let mut r = 0;
        for c in 0..a.cols {
            if r == a.rows {
                break;
            }
            let pivot = (r..a.rows).find(|&i| !a[(i, c)].is_zero());
            let Some(p) = pivot else { continue };
            if p != r {
                a.swap_rows(p, r);
            }
            for i in r + 1..a.rows {
                for j in c + 1..a.cols {
                    let t = a[(r, c)].mul(&a[(i, j)]).sub(&a[(i, c)].mul(&a[(r, j)]));
                    a[(i, j)] = t.div(&prev);
                }
                a[(i, c)] = S::zero(&self.proto);
            }
            prev = a[(r, c)].clone();
            r += 1;
        }
        r
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for k in 0..self.cols {
            self.entries.swap(i * self.cols + k, j * self.cols + k);
        }
    }

    /// Reduced row echelon form over the field; returns the reduced matrix,
    /// the pivot columns, and the pre-normalization pivot entries (used to
    /// record singular loci of symbolic eliminations).
    pub fn rref(&self) -> Rref<S> {
        if let Some(rr) = S::fast_rref(self) {
            return rr;
        }
        let mut a = self.clone();
        let mut pivots = Vec::new();
        let mut witnesses = Vec::new();
        let mut r = 0;
        for c in 0..a.cols {
            if r == a.rows {
                break;
            }
            let Some(p) = (r..a.rows).find(|&i| !a[(i, c)].is_zero()) else {
                continue;
            };
            a.swap_rows(p, r);
            let piv = a[(r, c)].clone();
            witnesses.push(piv.clone());
            for j in 0..a.cols {
                a[(r, j)] = a[(r, j)].div(&piv);
            }
            for i in 0..a.rows {
                if i == r || a[(i, c)].is_zero() {
                    continue;
                }
                let f = a[(i, c)].clone();
                for j in 0..a.cols {
                    let t = a[(r, j)].mul(&f);
                    a[(i, j)] = a[(i, j)].sub(&t);
                }
            }
            pivots.push(c);
            r += 1;
        }
        Rref {
            mat: a,
            pivots,
            witnesses,
        }
    }
}

impl<S: Scalar> std::ops::Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.entries[i * self.cols + j]
    }
}

impl<S: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.entries[i * self.cols + j]
    }
}

impl Matrix<Expr> {
    /// Evaluate all entries at a rational point.
    pub fn evaluate(&self, p: &Point) -> Result<Matrix<BigRational>> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            entries.push(e.evaluate(p)?);
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            entries,
            proto: q0(),
        })
    }

    /// Denominators of all entries (candidate singular locus).
    pub fn denominators(&self) -> Vec<Expr> {
        self.entries
            .iter()
            .filter(|e| !e.denominator().is_constant())
            .map(|e| e.denominator_expr())
            .collect()
    }
}

pub struct Rref<S: Scalar> {
    pub mat: Matrix<S>,
    pub pivots: Vec<usize>,
    pub witnesses: Vec<S>,
}

/// Basis of the right kernel of `m`; dimension is `cols - rank`.
pub fn kernel_basis<S: Scalar>(m: &Matrix<S>) -> Subspace<S> {
    let rr = m.rref();
    let n = m.cols();
    let mut basis = Vec::new();
    let pivot_set: Vec<Option<usize>> = {
        let mut v = vec![None; n];
        for (row, &c) in rr.pivots.iter().enumerate() {
            v[c] = Some(row);
        }
        v
    };
    for free in 0..n {
        if pivot_set[free].is_some() {
            continue;
        }
        let mut v = vec![S::zero(m.proto()); n];
        v[free] = S::one(m.proto());
        for (col, prow) in pivot_set.iter().enumerate() {
            if let Some(r) = prow {
                v[col] = rr.mat[(*r, free)].neg();
            }
        }
        basis.push(v);
    }
    Subspace::from_vectors(m.proto().clone(), n, basis)
}

/// Solution set of `m x = b` as an affine subspace (EMPTY when inconsistent).
pub fn solve_affine<S: Scalar>(m: &Matrix<S>, b: &[S]) -> AffineSubspace<S> {
    assert_eq!(m.rows(), b.len(), "right-hand side length mismatch");
    let aug = m.hstack(&Matrix::from_cols(m.proto().clone(), vec![b.to_vec()]));
    let rr = aug.rref();
    if rr.pivots.contains(&m.cols()) {
        return AffineSubspace::empty(m.proto().clone(), m.cols());
    }
    let mut particular = vec![S::zero(m.proto()); m.cols()];
    for (row, &c) in rr.pivots.iter().enumerate() {
        particular[c] = rr.mat[(row, m.cols())].clone();
    }
    AffineSubspace {
        particular: Some(particular),
        linear: kernel_basis(m),
    }
}

/// Linear subspace of `Q^n` (or of the function-field column space) in
/// canonical row-reduced form.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace<S: Scalar> {
    ambient_dim: usize,
    basis: Vec<Vec<S>>,
    proto: S,
}

impl<S: Scalar> Subspace<S> {
    pub fn zero(proto: S, ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: Vec::new(),
            proto,
        }
    }

    pub fn full(proto: S, ambient_dim: usize) -> Self {
        let id = Matrix::identity(proto.clone(), ambient_dim);
        Subspace::from_vectors(
            proto,
            ambient_dim,
            (0..ambient_dim).map(|i| id.row(i).to_vec()).collect(),
        )
    }

    /// Canonicalize a spanning set: row-reduce, drop zero rows.
    pub fn from_vectors(proto: S, ambient_dim: usize, vectors: Vec<Vec<S>>) -> Self {
        for v in &vectors {
            assert_eq!(v.len(), ambient_dim, "vector length mismatch");
        }
        if vectors.is_empty() {
            return Subspace::zero(proto, ambient_dim);
        }
        let vectors: Vec<Vec<S>> = vectors.into_iter().map(S::scale_row).collect();
        let m = Matrix::from_rows(proto.clone(), vectors);
        let rr = m.rref();
        let basis = (0..rr.pivots.len())
            .map(|i| rr.mat.row(i).to_vec())
            .collect();
        Subspace {
            ambient_dim,
            basis,
            proto,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<S>] {
        &self.basis
    }

    /// Basis vectors as matrix columns.
    pub fn basis_matrix(&self) -> Matrix<S> {
        Matrix::from_cols(self.proto.clone(), self.basis.clone())
    }

    pub fn contains(&self, v: &[S]) -> bool {
        assert_eq!(v.len(), self.ambient_dim);
        if v.iter().all(|x| x.is_zero()) {
            return true;
        }
        let mut rows: Vec<Vec<S>> = self
            .basis
            .iter()
            .map(|r| S::scale_row(r.clone()))
            .collect();
        rows.push(S::scale_row(v.to_vec()));
        let m = Matrix::from_rows(self.proto.clone(), rows);
        m.rank() == self.dim()
    }

    pub fn is_subspace_of(&self, other: &Subspace<S>) -> bool {
        self.basis.iter().all(|v| other.contains(v))
    }

    pub fn sum(&self, other: &Subspace<S>) -> Subspace<S> {
        assert_eq!(self.ambient_dim, other.ambient_dim);
        let mut vs = self.basis.clone();
        vs.extend(other.basis.clone());
        Subspace::from_vectors(self.proto.clone(), self.ambient_dim, vs)
    }

    pub fn intersection(&self, other: &Subspace<S>) -> Subspace<S> {
        assert_eq!(self.ambient_dim, other.ambient_dim, "ambient mismatch");
        if self.dim() == 0 || other.dim() == 0 {
            return Subspace::zero(self.proto.clone(), self.ambient_dim);
        }
        // v = A a = B b  <=>  (a, b) in ker [A | -B]; intersection vectors A a.
        let a = self.basis_matrix();
        let b = other.basis_matrix();
        let stacked = a.hstack(&b.map(self.proto.clone(), |x| x.neg()));
        let ker = kernel_basis(&stacked);
        let mut vecs = Vec::new();
        for k in ker.basis() {
            let coeffs = &k[..self.dim()];
            vecs.push(a.mul_vec(coeffs));
        }
        Subspace::from_vectors(self.proto.clone(), self.ambient_dim, vecs)
    }
}

/// Affine solution set: `particular + linear`, or EMPTY.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSubspace<S: Scalar> {
    particular: Option<Vec<S>>,
    linear: Subspace<S>,
}

impl<S: Scalar> AffineSubspace<S> {
    pub fn empty(proto: S, ambient_dim: usize) -> Self {
        AffineSubspace {
            particular: None,
            linear: Subspace::zero(proto, ambient_dim),
        }
    }

    pub fn from_parts(particular: Vec<S>, linear: Subspace<S>) -> Self {
        assert_eq!(particular.len(), linear.ambient_dim());
        AffineSubspace {
            particular: Some(particular),
            linear,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.particular.is_none()
    }

    pub fn particular(&self) -> Option<&Vec<S>> {
        self.particular.as_ref()
    }

    pub fn linear_part(&self) -> &Subspace<S> {
        &self.linear
    }

    pub fn dim(&self) -> Option<usize> {
        self.particular.as_ref().map(|_| self.linear.dim())
    }

    pub fn contains(&self, v: &[S]) -> bool {
        match &self.particular {
            None => false,
            Some(p) => {
                let diff: Vec<S> = v.iter().zip(p.iter()).map(|(a, b)| a.sub(b)).collect();
                self.linear.contains(&diff)
            }
        }
    }

    /// Same solution set: mutual membership of particulars plus equal linear parts.
    pub fn same_set(&self, other: &AffineSubspace<S>) -> bool {
        match (&self.particular, &other.particular) {
            (None, None) => true,
            (Some(p), Some(_)) => self.linear == other.linear && other.contains(p),
            _ => false,
        }
    }
}

/// Deterministic rational point sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingPolicy {
    pub seed: u64,
    pub height_bound: u32,
    pub max_retries: u32,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        SamplingPolicy {
            seed: 0,
            height_bound: 10,
            max_retries: 128,
        }
    }
}

impl SamplingPolicy {
    pub fn with_seed(seed: u64) -> Self {
        SamplingPolicy {
            seed,
            ..Default::default()
        }
    }

    /// Per-task policy derived by seed-splitting.
    pub fn split(&self, task: u64) -> Self {
        SamplingPolicy {
            seed: self.seed ^ task.wrapping_mul(0x9e3779b97f4a7c15),
            ..*self
        }
    }
}

fn random_rational(rng: &mut ChaCha8Rng, height: u32) -> BigRational {
    let h = height.max(1) as i64;
    let num = rng.gen_range(-h..=h);
    let den = rng.gen_range(1..=h);
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Deterministic rational point at which no avoid-expression's numerator or
/// denominator vanishes.
pub fn sample_point(chart: &ChartRef, avoid: &[Expr], policy: &SamplingPolicy) -> Result<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let mut rejections = 0;
    loop {
        let values: Vec<BigRational> = (0..chart.dim())
            .map(|_| random_rational(&mut rng, policy.height_bound))
            .collect();
        let point = Point::new(chart.clone(), values)?;
        let ok = avoid.iter().all(|e| {
            let den = e.denominator().eval(point.values());
            let num = e.numerator().eval(point.values());
            !Zero::is_zero(&den) && !Zero::is_zero(&num)
        });
        if ok {
            return Ok(point);
        }
        rejections += 1;
        if rejections >= policy.max_retries {
            return Err(Error::SamplingExhausted(rejections));
        }
    }
}

/// Constant-rank protocol: the generic rank must be realized at `samples`
/// sampled points (resampling points where it drops). Returns the generic
/// rank together with the points that witnessed it.
pub fn constant_rank_on_samples(
    m: &Matrix<Expr>,
    avoid: &[Expr],
    policy: &SamplingPolicy,
    samples: u32,
) -> Result<(usize, Vec<Point>)> {
    let generic = m.rank();
    let mut full_avoid = avoid.to_vec();
    full_avoid.extend(m.denominators());
    let mut points = Vec::new();
    for k in 0..samples {
        let mut found = false;
        for attempt in 0..policy.max_retries {
            let p = sample_point(
                m.proto().chart(),
                &full_avoid,
                &policy.split(k as u64 * 1009 + attempt as u64),
            )?;
            let num = m.evaluate(&p)?;
            debug_assert!(num.rank() <= generic);
            if num.rank() == generic {
                points.push(p);
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::RankInstability(format!(
                "rank drops below generic rank {generic} persistently"
            )));
        }
    }
    Ok((generic, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::parse_expr;
    use crate::expr::Chart;

    use super::{q0, qi as q};

    fn qm(rows: Vec<Vec<i64>>) -> Matrix<BigRational> {
        Matrix::from_rows(
            q0(),
            rows.into_iter()
                .map(|r| r.into_iter().map(q).collect())
                .collect(),
        )
    }

    #[test]
    fn rank_examples() {
        assert_eq!(Matrix::identity(q0(), 3).rank(), 3);
        assert_eq!(Matrix::<BigRational>::zeros(q0(), 2, 4).rank(), 0);
        // symbolic [[x, x^2], [1, x]] has determinant 0, rank 1
        let c = Chart::new("M", &["x"]).unwrap();
        let x = Expr::coord(&c, 0);
        let m = Matrix::from_rows(
            Expr::zero(&c),
            vec![
                vec![x.clone(), x.mul(&x)],
                vec![Expr::one(&c), x.clone()],
            ],
        );
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_basis(&Matrix::identity(q0(), 4)).dim(), 0);
        let z = Matrix::<BigRational>::zeros(q0(), 2, 3);
        assert_eq!(kernel_basis(&z).dim(), 3);
        // [[1,1,0]]: kernel dim 2 containing (1,-1,0) and (0,0,1); oracle is
        // a hand RREF with the alternate pivot choice (last nonzero entry),
        // which yields the same span.
        let m = qm(vec![vec![1, 1, 0]]);
        let k = kernel_basis(&m);
        assert_eq!(k.dim(), 2);
        assert!(k.contains(&[q(1), q(-1), q(0)]));
        assert!(k.contains(&[q(0), q(0), q(1)]));
        for v in k.basis() {
            let mv = m.mul_vec(v);
            assert!(mv.iter().all(Zero::is_zero));
        }
    }

    #[test]
    fn solve_examples() {
        let id = Matrix::identity(q0(), 3);
        let b = vec![q(1), q(2), q(3)];
        let s = solve_affine(&id, &b);
        assert_eq!(s.particular().unwrap(), &b);
        assert_eq!(s.linear_part().dim(), 0);

        let m = qm(vec![vec![1, 0], vec![1, 0]]);
        let s = solve_affine(&m, &[q(0), q(1)]);
        assert!(s.is_empty());

        // [[1,1]] x = 2: particular maps to 2, kernel spanned by (1,-1)
        let m = qm(vec![vec![1, 1]]);
        let s = solve_affine(&m, &[q(2)]);
        let p = s.particular().unwrap();
        assert_eq!(p[0].clone() + p[1].clone(), q(2));
        assert_eq!(s.linear_part().dim(), 1);
        assert!(s.linear_part().contains(&[q(1), q(-1)]));
        // substitution check with kernel shifts
        for v in s.linear_part().basis() {
            let shifted: Vec<BigRational> =
                p.iter().zip(v.iter()).map(|(a, b)| a + b).collect();
            assert_eq!(m.mul_vec(&shifted), vec![q(2)]);
        }
    }

    #[test]
    fn intersection_examples() {
        let a = Subspace::from_vectors(
            q0(),
            3,
            vec![vec![q(1), q(0), q(0)], vec![q(0), q(1), q(0)]],
        );
        let b = Subspace::from_vectors(
            q0(),
            3,
            vec![vec![q(0), q(1), q(0)], vec![q(0), q(0), q(1)]],
        );
        let i = a.intersection(&b);
        assert_eq!(i.dim(), 1);
        assert!(i.contains(&[q(0), q(1), q(0)]));
        // a ∩ a = a
        assert_eq!(a.intersection(&a), a);
        // complementary planes in 4-space
        let c = Subspace::from_vectors(
            q0(),
            4,
            vec![vec![q(1), q(0), q(0), q(0)], vec![q(0), q(1), q(0), q(0)]],
        );
        let d = Subspace::from_vectors(
            q0(),
            4,
            vec![vec![q(0), q(0), q(1), q(0)], vec![q(0), q(0), q(0), q(1)]],
        );
        assert_eq!(c.intersection(&d).dim(), 0);
        // dim(a∩b) = dim a + dim b − dim(a+b)
        assert_eq!(
            i.dim(),
            a.dim() + b.dim() - a.sum(&b).dim()
        );
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = Chart::new("M", &["x"]).unwrap();
        let p1 = sample_point(&c, &[], &SamplingPolicy::with_seed(1)).unwrap();
        let p2 = sample_point(&c, &[], &SamplingPolicy::with_seed(1)).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn sampling_avoids_expressions() {
        let c = Chart::new("M", &["x", "y"]).unwrap();
        let diff = parse_expr("x - y", &c).unwrap();
        for seed in 0..20 {
            let p = sample_point(&c, &[diff.clone()], &SamplingPolicy::with_seed(seed)).unwrap();
            assert_ne!(p.values()[0], p.values()[1]);
        }
        // height_bound 1 with avoid [x]: x must be nonzero or sampling fails
        let c1 = Chart::new("M", &["x"]).unwrap();
        let x = Expr::coord(&c1, 0);
        let policy = SamplingPolicy {
            seed: 3,
            height_bound: 1,
            max_retries: 8,
        };
        match sample_point(&c1, &[x], &policy) {
            Ok(p) => assert!(!Zero::is_zero(&p.values()[0])),
            Err(Error::SamplingExhausted(_)) => {}
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn symbolic_rank_realized_on_samples() {
        let c = Chart::new("M", &["x", "y"]).unwrap();
        let x = Expr::coord(&c, 0);
        let y = Expr::coord(&c, 1);
        let m = Matrix::from_rows(
            Expr::zero(&c),
            vec![vec![x.clone(), y.clone()], vec![y.clone(), x.clone()]],
        );
        let (rank, pts) =
            constant_rank_on_samples(&m, &[], &SamplingPolicy::with_seed(7), 20).unwrap();
        assert_eq!(rank, 2);
        assert_eq!(pts.len(), 20);
        for p in &pts {
            assert_eq!(m.evaluate(p).unwrap().rank(), 2);
        }
    }
}
