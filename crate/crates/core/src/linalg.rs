//! Small dense linear-algebra helpers on top of nalgebra, including the
//! numerical rank policy every stratification decision goes through.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values above `RANK_REL_TOL * sigma_max` count towards the rank.
pub const RANK_REL_TOL: f64 = 1e-8;
/// Relative singular values inside `[AMBIGUITY_LOW, AMBIGUITY_HIGH]` are refused.
pub const AMBIGUITY_LOW: f64 = 1e-10;
pub const AMBIGUITY_HIGH: f64 = 1e-6;

/// SVD factors with singular values sorted in decreasing order.
/// `v` is square (cols x cols) even when the matrix is wide.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let (rows, cols) = m.shape();
    // pad with zero rows so the right factor is complete
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, true);
    let u_full = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut u = DMatrix::zeros(rows, k);
    let mut v = DMatrix::zeros(cols, k);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..rows {
            u[(r, dst)] = u_full[(r, src)];
        }
        for c in 0..cols {
            v[(c, dst)] = v_t[(src, c)];
        }
    }
    SortedSvd { u, sigma, v }
}

/// Numerical rank under the fixed policy. `Err(ratio)` reports the offending
/// relative singular value when one falls in the ambiguity band.
pub fn rank_with_policy(sigma: &[f64]) -> std::result::Result<usize, f64> {
    let smax = sigma.iter().cloned().fold(0.0_f64, f64::max);
    if smax <= f64::MIN_POSITIVE {
        return Ok(0);
    }
    let mut rank = 0;
    for &s in sigma {
        let r = s / smax;
        if (AMBIGUITY_LOW..=AMBIGUITY_HIGH).contains(&r) {
            return Err(r);
        }
        if r > RANK_REL_TOL {
            rank += 1;
        }
    }
    Ok(rank)
}

pub fn rank_at(m: &DMatrix<f64>, point: &[f64]) -> Result<usize> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok(0);
    }
    let svd = sorted_svd(m);
    rank_with_policy(&svd.sigma).map_err(|ratio| Error::RankAmbiguous { point: point.to_vec(), ratio })
}

/// Orthonormal basis (as columns) of the column space.
pub fn range_basis(m: &DMatrix<f64>, point: &[f64]) -> Result<DMatrix<f64>> {
    if m.ncols() == 0 {
        return Ok(DMatrix::zeros(m.nrows(), 0));
    }
    let svd = sorted_svd(m);
    let r = rank_with_policy(&svd.sigma)
        .map_err(|ratio| Error::RankAmbiguous { point: point.to_vec(), ratio })?;
    Ok(svd.u.columns(0, r).into_owned())
}

/// Orthonormal basis (as columns) of the null space.
pub fn null_space(m: &DMatrix<f64>, point: &[f64]) -> Result<DMatrix<f64>> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return Ok(DMatrix::identity(cols, cols));
    }
    if cols == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let svd = sorted_svd(m);
    let mut sigma = svd.sigma.clone();
    sigma.resize(cols, 0.0);
    let r = rank_with_policy(&sigma)
        .map_err(|ratio| Error::RankAmbiguous { point: point.to_vec(), ratio })?;
    Ok(svd.v.columns(r, cols - r).into_owned())
}

/// Stacks matrices vertically (all must share a column count).
pub fn vstack(blocks: &[DMatrix<f64>], cols: usize) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        out.view_mut((r0, 0), (b.nrows(), cols)).copy_from(b);
        r0 += b.nrows();
    }
    out
}

pub fn hstack_vectors(vectors: &[DVector<f64>], rows: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        out.set_column(j, v);
    }
    out
}

pub fn hstack(blocks: &[&DMatrix<f64>], rows: usize) -> DMatrix<f64> {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c0 = 0;
    for b in blocks {
        out.view_mut((0, c0), (rows, b.ncols())).copy_from(*b);
        c0 += b.ncols();
    }
    out
}

/// Canonical orthonormal basis of the subspace with orthogonal projector `p`:
/// Gram-Schmidt over the projected standard basis vectors, in order.
/// Coordinate-aligned subspaces come back as signed standard basis vectors.
pub fn canonical_basis(p: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let n = p.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim);
    for j in 0..n {
        if basis.len() == dim {
            break;
        }
        let mut v = p.column(j).into_owned();
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / norm);
        }
    }
    hstack_vectors(&basis, n)
}

/// Orthonormal completion of `basis` to all of R^n, canonical in the sense above.
pub fn orthogonal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let n = basis.nrows();
    let p = DMatrix::identity(n, n) - basis * basis.transpose();
    canonical_basis(&p, n - basis.ncols())
}

/// `g`-orthonormalizes the columns of `vectors`, dropping dependent ones.
pub fn gram_schmidt_in(g: &DMatrix<f64>, vectors: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = vectors.nrows();
    let mut out: Vec<DVector<f64>> = Vec::new();
    for j in 0..vectors.ncols() {
        let mut v = vectors.column(j).into_owned();
        for _ in 0..2 {
            for b in &out {
                let c = (b.transpose() * g * &v)[0];
                v -= b * c;
            }
        }
        let norm2 = (v.transpose() * g * &v)[0];
        if norm2 > tol * tol {
            out.push(v / norm2.sqrt());
        }
    }
    hstack_vectors(&out, n)
}

/// `g`-orthogonal complement of span(`sub`) inside span(`within`).
pub fn complement_in(g: &DMatrix<f64>, sub: &DMatrix<f64>, within: &DMatrix<f64>) -> DMatrix<f64> {
    let n = within.nrows();
    let sub_on = gram_schmidt_in(g, sub, 1e-12);
    let mut out: Vec<DVector<f64>> = Vec::new();
    for j in 0..within.ncols() {
        let mut v = within.column(j).into_owned();
        for _ in 0..2 {
            for b in sub_on.column_iter().map(|c| c.into_owned()).chain(out.iter().cloned()) {
                let c = (b.transpose() * g * &v)[0];
                v -= &b * c;
            }
        }
        let norm2 = (v.transpose() * g * &v)[0];
        if norm2 > 1e-20 {
            out.push(v / norm2.sqrt());
        }
    }
    hstack_vectors(&out, n)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetrize(m).symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    let lo = min_eigenvalue(m);
    if lo > 0.0 && lo.is_finite() {
        Ok(())
    } else {
        Err(Error::NotSpd { min_eigenvalue: lo })
    }
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match m.clone().cholesky() {
        Some(c) => Ok(symmetrize(&c.inverse())),
        None => Err(Error::NotSpd { min_eigenvalue: min_eigenvalue(m) }),
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).sum::<f64>();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * scale;
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=18 {
        term = &term * &x / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}
