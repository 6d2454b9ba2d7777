//! Sparse symmetric operators, preconditioned conjugate gradients and the two eigen
//! iterations used by the solvers: shifted inverse iteration for the bottom of the
//! spectrum of `A`, and a Krylov-accelerated power iteration on `A^{-1} B` for the top of
//! a pencil.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Relative CG tolerance used by the PDE solves.
pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// Square sparse matrix in compressed row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_offsets: Vec<usize>,
    columns: Vec<usize>,
    coefficients: Vec<f64>,
}

impl SparseOperator {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_offsets = vec![0; dim + 1];
        let mut columns = Vec::with_capacity(triplets.len());
        let mut coefficients: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r},{c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *coefficients.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_offsets[r + 1] += 1;
            columns.push(c);
            coefficients.push(v);
        }
        for r in 0..dim {
            row_offsets[r + 1] += row_offsets[r];
        }
        Self { dim, row_offsets, columns, coefficients }
    }

    pub fn from_diagonal(diagonal: &[f64]) -> Self {
        let triplets = diagonal.iter().enumerate().map(|(i, &d)| (i, i, d)).collect();
        Self::from_triplets(diagonal.len(), triplets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.coefficients.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[r]..self.row_offsets[r + 1];
        self.columns[range.clone()].iter().copied().zip(self.coefficients[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(col, _)| col == c).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x`
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                acc += self.coefficients[k] * x[self.columns[k]];
            }
            *yr = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.apply_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, v)| (self.get(c, r) - v).abs() <= tol))
    }

    /// `A + diag(d)`
    pub fn add_diagonal(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.dim);
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + self.dim);
        for (r, &dr) in d.iter().enumerate() {
            triplets.extend(self.row(r).map(|(c, v)| (r, c, v)));
            triplets.push((r, r, dr));
        }
        Self::from_triplets(self.dim, triplets)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coefficients.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.apply(x))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Five-point (three-point in 1D) Dirichlet Laplacian scaled by `1/h^2`.
///
/// Unknowns sit at cell centers. A face shared with an active neighbor contributes
/// `1/h^2` to the diagonal and `-1/h^2` off the diagonal; a face shared with an exterior
/// or masked cell carries the homogeneous Dirichlet value on the face itself through the
/// mirror ghost `u_ghost = -u_cell`, which contributes `2/h^2` to the diagonal.
pub fn assemble_dirichlet_laplacian(grid: &Grid) -> SparseOperator {
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let mut triplets = Vec::with_capacity(grid.len() * (2 * grid.dim() + 1));
    for (k, &(i, j)) in grid.cells().iter().enumerate() {
        let mut diag = 0.0;
        for &(di, dj) in grid.face_offsets() {
            match grid.index(i as isize + di, j as isize + dj) {
                Some(nb) => {
                    diag += inv_h2;
                    triplets.push((k, nb, -inv_h2));
                }
                None => diag += 2.0 * inv_h2,
            }
        }
        triplets.push((k, k, diag));
    }
    SparseOperator::from_triplets(grid.len(), triplets)
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `||Ax - b|| / ||b||`.
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn cg_solve(a: &SparseOperator, b: &[f64], tol: f64, max_iter: usize) -> Result<CgSolution> {
    cg_solve_from(a, b, None, tol, max_iter)
}

/// Conjugate gradients with an optional initial guess. Stops when
/// `||Ax - b|| <= tol ||b||`.
pub fn cg_solve_from(
    a: &SparseOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("CG tolerance must be positive, got {tol}")));
    }
    let n = a.dim();
    assert_eq!(b.len(), n);
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(CgSolution { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().into_iter().map(|d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r: Vec<f64> = match x0 {
        Some(_) => {
            let ax = a.apply(&x);
            b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
        }
        None => b.to_vec(),
    };
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm(&r) / b_norm;
    if res <= tol {
        return Ok(CgSolution { x, iterations: 0, residual: res });
    }
    for it in 1..=max_iter {
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown { iteration: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / b_norm;
        if res <= tol {
            // recompute the true residual to guard against drift
            let ax = a.apply(&x);
            let true_res = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt() / b_norm;
            if true_res <= tol {
                return Ok(CgSolution { x, iterations: it, residual: true_res });
            }
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged { iterations: max_iter, residual: res })
}

/// Default CG iteration cap for an operator of dimension `n`.
pub(crate) fn cg_cap(n: usize) -> usize {
    (20 * n).max(1000)
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Absolute bound on `||Av - lambda v||` for a unit vector `v`.
    pub tol: f64,
    /// Relative eigenvalue change between sweeps.
    pub value_tol: f64,
    pub max_iter: usize,
    pub cg_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-7, value_tol: 1e-12, max_iter: 2000, cg_tol: 1e-11 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub value: f64,
    /// Unit Euclidean norm, first component nonnegative.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Smallest eigenpair of `A` by inverse iteration on `A - shift I`.
///
/// The iteration starts from the all-ones vector, so repeated calls are bit-identical.
pub fn smallest_eigenpair(a: &SparseOperator, shift: f64, opts: &EigenOptions) -> Result<EigenResult> {
    let n = a.dim();
    let shifted = a.add_diagonal(&vec![-shift; n]);
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = a.quadratic_form(&v);
    let mut residual = f64::INFINITY;
    let mut guess: Vec<f64>;
    for it in 1..=opts.max_iter {
        // (A - s)^{-1} v ~ v / (lambda - s) near convergence
        let denom = lambda - shift;
        guess = if denom.abs() > 0.0 { v.iter().map(|x| x / denom).collect() } else { vec![0.0; n] };
        let sol = cg_solve_from(&shifted, &v, Some(&guess), opts.cg_tol, cg_cap(n))?;
        let y_norm = norm(&sol.x);
        if !(y_norm > 0.0 && y_norm.is_finite()) {
            return Err(Error::Breakdown { iteration: it });
        }
        v = sol.x.into_iter().map(|x| x / y_norm).collect();
        let av = a.apply(&v);
        let new_lambda = dot(&v, &av);
        residual = av.iter().zip(&v).map(|(ai, vi)| (ai - new_lambda * vi).powi(2)).sum::<f64>().sqrt();
        let change = (new_lambda - lambda).abs() / new_lambda.abs().max(1e-300);
        lambda = new_lambda;
        if change < opts.value_tol && residual <= opts.tol {
            if v[0] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            return Ok(EigenResult { value: lambda, vector: v, iterations: it, residual });
        }
    }
    Err(Error::Stagnation { iterations: opts.max_iter, residual })
}

#[derive(Debug, Clone)]
pub struct PencilOptions {
    /// Bound on `||Bv - sigma A v|| / ||A v||`.
    pub tol: f64,
    pub value_tol: f64,
    pub max_iter: usize,
    pub cg_tol: f64,
}

impl Default for PencilOptions {
    fn default() -> Self {
        Self { tol: 1e-6, value_tol: 1e-12, max_iter: 20_000, cg_tol: 1e-11 }
    }
}

#[derive(Debug, Clone)]
pub struct PencilEigen {
    /// Largest eigenvalue of `A^{-1} B`.
    pub sigma: f64,
    /// Normalized so that `v^T B v = 1`.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Largest eigenpair of `A^{-1} B`, equivalently `B v = sigma A v`, with `v^T B v = 1`.
/// `A` must be SPD, `B` symmetric PSD and nonzero.
pub fn pencil_largest(a: &SparseOperator, b: &SparseOperator, opts: &PencilOptions) -> Result<PencilEigen> {
    let mut modes = pencil_leading(a, b, 1, opts)?;
    Ok(modes.remove(0))
}

/// The `m` largest pencil eigenpairs.
///
/// Lanczos acceleration of the power iteration: the Krylov space of `A^{-1} B` is built in
/// the `A` inner product with full reorthogonalization, and Ritz pairs come from the
/// projected pencil, so the returned vectors are exactly `B`-orthogonal. The Krylov basis is
/// restarted from the wanted Ritz vectors when it reaches its memory cap.
pub fn pencil_leading(
    a: &SparseOperator,
    b: &SparseOperator,
    m: usize,
    opts: &PencilOptions,
) -> Result<Vec<PencilEigen>> {
    let n = a.dim();
    assert_eq!(b.dim(), n);
    if m == 0 {
        return Err(Error::InvalidParameter("at least one mode is required".into()));
    }
    if b.coefficients.iter().all(|&c| c == 0.0) {
        return Err(Error::InvalidParameter("B is the zero operator".into()));
    }
    let cap = cg_cap(n);
    let max_basis = n.min((4_000_000 / n.max(1)).clamp(50, 500)).max(m + 2).min(n);
    let solve = |rhs: &[f64]| cg_solve(a, rhs, opts.cg_tol, cap).map(|s| s.x);

    // all-ones pushed into the range of A^{-1}B; perturbed when several modes are wanted so
    // that modes antisymmetric with respect to the grid are present in the start vector
    let start: Vec<f64> = (0..n).map(|i| if m > 1 { 1.0 + (i % 7) as f64 / 7.0 } else { 1.0 }).collect();
    let mut x = solve(&b.apply(&start))?;

    let mut steps = 0usize;
    let mut previous: Vec<f64> = Vec::new();
    loop {
        // A-orthonormal basis with its images under A and B
        let mut q: Vec<Vec<f64>> = Vec::new();
        let mut aq: Vec<Vec<f64>> = Vec::new();
        let mut bq: Vec<Vec<f64>> = Vec::new();
        let mut exhausted = false;
        let mut w = x.clone();
        while q.len() < max_basis {
            let scale = a.quadratic_form(&w).max(0.0).sqrt();
            for _ in 0..2 {
                for (qi, aqi) in q.iter().zip(&aq) {
                    let c = dot(&w, aqi);
                    w.iter_mut().zip(qi).for_each(|(wj, qj)| *wj -= c * qj);
                }
            }
            let beta = a.quadratic_form(&w).max(0.0).sqrt();
            if !(beta > 1e-10 * scale) || beta == 0.0 {
                exhausted = true;
                break;
            }
            w.iter_mut().for_each(|v| *v /= beta);
            let bw = b.apply(&w);
            aq.push(a.apply(&w));
            q.push(w);
            steps += 1;
            w = solve(&bw)?;
            bq.push(bw);
            let k = q.len();
            if k >= m && (k.is_multiple_of(5.max(k / 10)) || k == max_basis || steps >= opts.max_iter) {
                let ritz = ritz_pairs(&q, &aq, &bq, m)?;
                let residual = ritz.iter().map(|r| r.residual).fold(0.0, f64::max);
                let values: Vec<f64> = ritz.iter().map(|r| r.sigma).collect();
                let settled = previous.len() == m
                    && values.iter().zip(&previous).all(|(v, p)| (v - p).abs() <= opts.value_tol * v.abs().max(1e-300));
                previous = values;
                if settled && residual <= opts.tol {
                    return finish(ritz, steps);
                }
                if steps >= opts.max_iter {
                    return Err(Error::Stagnation { iterations: steps, residual });
                }
            }
        }
        if q.len() < m {
            return Err(Error::Degenerate("Krylov space exhausted (pencil has fewer modes than requested)".into()));
        }
        let ritz = ritz_pairs(&q, &aq, &bq, m)?;
        let residual = ritz.iter().map(|r| r.residual).fold(0.0, f64::max);
        if exhausted {
            // invariant subspace: Ritz pairs are exact up to the CG tolerance
            if residual <= opts.tol.max(1e3 * opts.cg_tol) {
                return finish(ritz, steps);
            }
            return Err(Error::Stagnation { iterations: steps, residual });
        }
        if steps >= opts.max_iter {
            return Err(Error::Stagnation { iterations: steps, residual });
        }
        x = vec![0.0; n];
        for r in &ritz {
            x.iter_mut().zip(&r.vector).for_each(|(xi, vi)| *xi += vi);
        }
    }
}

fn finish(ritz: Vec<PencilEigen>, steps: usize) -> Result<Vec<PencilEigen>> {
    if !ritz.iter().all(|r| r.sigma > 0.0) {
        return Err(Error::Degenerate("pencil has fewer positive modes than requested".into()));
    }
    Ok(ritz.into_iter().map(|r| PencilEigen { iterations: steps, ..r }).collect())
}

/// The `m` largest Ritz pairs of `B v = sigma A v` on an `A`-orthonormal basis.
fn ritz_pairs(q: &[Vec<f64>], aq: &[Vec<f64>], bq: &[Vec<f64>], m: usize) -> Result<Vec<PencilEigen>> {
    let k = q.len();
    let n = q[0].len();
    let h = nalgebra::DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&q[i], &bq[j]) + dot(&q[j], &bq[i])));
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let combine = |basis: &[Vec<f64>], col: usize| -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (r, bi) in basis.iter().enumerate() {
            let c = eig.eigenvectors[(r, col)];
            v.iter_mut().zip(bi).for_each(|(vi, x)| *vi += c * x);
        }
        v
    };
    let mut out = Vec::with_capacity(m);
    for &col in order.iter().take(m) {
        let sigma = eig.eigenvalues[col];
        let mut v = combine(q, col);
        let mut av = combine(aq, col);
        let mut bv = combine(bq, col);
        let residual =
            bv.iter().zip(&av).map(|(bi, ai)| (bi - sigma * ai).powi(2)).sum::<f64>().sqrt() / norm(&av).max(1e-300);
        let vbv = dot(&v, &bv);
        if !(vbv > 0.0) {
            return Err(Error::Degenerate(
                "Ritz vector outside the range of B (pencil has fewer modes than requested)".into(),
            ));
        }
        let mut s = 1.0 / vbv.sqrt();
        if v.iter().sum::<f64>() < 0.0 {
            s = -s;
        }
        for t in [&mut v, &mut av, &mut bv] {
            t.iter_mut().for_each(|x| *x *= s);
        }
        out.push(PencilEigen { sigma, vector: v, iterations: 0, residual });
    }
    Ok(out)
}
