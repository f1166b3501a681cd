//! Dense linear-algebra services: pseudo-inverse, numerical rank, kernel and
//! quotient projection, spectral radius and stabilizing gain synthesis.
//!
//! Rank decisions everywhere use the singular-value threshold
//! `max(rows, cols) * sigma_max * 1e-12`.

use nalgebra::{ComplexField, Complex, DMatrix, Dyn, SVD};

use crate::{Error, Matrix, Result};

/// Relative factor of the numerical-rank threshold.
pub const RANK_RTOL: f64 = 1e-12;

/// Spectral-radius slack accepted when verifying a synthesized gain.
pub const GAIN_RTOL: f64 = 1e-9;

pub fn rank_tolerance(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * sigma_max * RANK_RTOL
}

/// Thin SVD whose factors are checked against the input.
///
/// nalgebra's default iteration can return a wrong factorization for some
/// rank-deficient inputs (for instance a rank-one matrix with exactly zero
/// columns). When `U S V*` does not reproduce the input, the decomposition
/// is retried on the adjoint and then with a looser convergence threshold.
pub fn checked_svd<T>(m: &DMatrix<T>) -> SVD<T, Dyn, Dyn>
where
    T: ComplexField<RealField = f64>,
{
    let tol = 1e-12 * (m.nrows().max(m.ncols()) as f64) * m.camax().max(f64::MIN_POSITIVE);
    let error = |svd: &SVD<T, Dyn, Dyn>| {
        let u = svd.u.as_ref().expect("svd computed with u");
        let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
        let sigma = DMatrix::from_diagonal(&svd.singular_values.map(T::from_real));
        (u * sigma * v_t - m).camax()
    };
    let mut best: Option<(f64, SVD<T, Dyn, Dyn>)> = None;
    for eps in [f64::EPSILON, 1e-14, 1e-13] {
        for adjoint in [false, true] {
            let source = if adjoint { m.adjoint() } else { m.clone() };
            let Some(mut svd) = source.try_svd(true, true, eps, 0) else { continue };
            if adjoint {
                let u = svd.v_t.take().map(|v| v.adjoint());
                svd.v_t = svd.u.take().map(|u| u.adjoint());
                svd.u = u;
            }
            let err = error(&svd);
            if err <= tol {
                return svd;
            }
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, svd));
            }
        }
    }
    best.expect("at least one svd attempt converges").1
}

/// Singular values, sorted in decreasing order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = checked_svd(m).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn rank(m: &Matrix) -> usize {
    let sv = singular_values(m);
    let Some(&smax) = sv.first() else { return 0 };
    let tol = rank_tolerance(m.nrows(), m.ncols(), smax);
    sv.iter().filter(|&&s| s > tol).count()
}

pub fn complex_rank(m: &DMatrix<Complex<f64>>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = checked_svd(m).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let tol = rank_tolerance(m.nrows(), m.ncols(), smax);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Moore-Penrose pseudo-inverse via a thin SVD.
pub fn pseudo_inverse(m: &Matrix) -> Matrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Matrix::zeros(cols, rows);
    }
    let svd = checked_svd(m);
    let u = svd.u.as_ref().expect("svd computed with u");
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = rank_tolerance(rows, cols, smax);
    let mut out = Matrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            out += v_t.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

/// Orthogonal splitting of the state space of a node into the kernel of its
/// aggregate outbound interconnection and the complement it reaches.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    /// `(n - g) x n`, orthonormal rows spanning the orthogonal complement of
    /// the kernel (the interacting coordinates).
    pub projection: Matrix,
    /// `n x g`, orthonormal columns spanning the kernel.
    pub kernel: Matrix,
}

impl ProjectionPair {
    pub fn state_dim(&self) -> usize {
        self.projection.ncols()
    }

    /// Dimension of the non-interacting subspace.
    pub fn kernel_dim(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn is_full_rank(&self) -> bool {
        self.kernel_dim() == 0
    }

    /// Orthogonal projector onto the kernel, `I - P^T P`.
    pub fn kernel_projector(&self) -> Matrix {
        &self.kernel * self.kernel.transpose()
    }

    /// Orthogonal projector onto the interacting subspace, `P^T P`.
    pub fn interacting_projector(&self) -> Matrix {
        self.projection.transpose() * &self.projection
    }
}

fn normalize_sign(v: &mut nalgebra::DVector<f64>) {
    let mut pivot: f64 = 0.0;
    for &x in v.iter() {
        if x.abs() > pivot.abs() + 1e-14 {
            pivot = x;
        }
    }
    if pivot < 0.0 {
        v.neg_mut();
    }
}

/// Kernel basis and interacting-coordinate projection of a stacked matrix
/// with `n` columns. A full-rank stack yields `P = I`.
pub fn kernel_and_projection(stack: &Matrix, n: usize) -> Result<ProjectionPair> {
    if stack.ncols() != n {
        return Err(Error::dimension(
            "aggregate interconnection",
            format!("expected {n} columns, got {}", stack.ncols()),
        ));
    }
    let rows = stack.nrows();
    // Pad with zero rows so the SVD returns a square V.
    let padded = if rows < n {
        let mut p = Matrix::zeros(n, n);
        p.view_mut((0, 0), (rows, n)).copy_from(stack);
        p
    } else {
        stack.clone()
    };
    let svd = checked_svd(&padded);
    let v_t = svd.v_t.expect("svd computed with v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let smax = order
        .first()
        .map(|&k| svd.singular_values[k])
        .unwrap_or(0.0);
    let tol = rank_tolerance(rows, n, smax);
    let r = order
        .iter()
        .filter(|&&k| svd.singular_values[k] > tol && smax > 0.0)
        .count();

    if r == n {
        return Ok(ProjectionPair {
            projection: Matrix::identity(n, n),
            kernel: Matrix::zeros(n, 0),
        });
    }
    let mut projection = Matrix::zeros(r, n);
    for (row, &k) in order[..r].iter().enumerate() {
        let mut v = v_t.row(k).transpose();
        normalize_sign(&mut v);
        projection.set_row(row, &v.transpose());
    }
    let mut kernel = Matrix::zeros(n, n - r);
    for (col, &k) in order[r..].iter().enumerate() {
        let mut v = v_t.row(k).transpose();
        normalize_sign(&mut v);
        kernel.set_column(col, &v);
    }
    Ok(ProjectionPair { projection, kernel })
}

pub fn eigenvalues(m: &Matrix) -> Vec<Complex<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_radius(m: &Matrix) -> f64 {
    eigenvalues(m).iter().map(|l| l.norm()).fold(0.0, f64::max)
}

pub fn matrix_power(a: &Matrix, k: usize) -> Matrix {
    let mut out = Matrix::identity(a.nrows(), a.ncols());
    for _ in 0..k {
        out = &out * a;
    }
    out
}

pub fn hstack(blocks: &[&Matrix], rows: usize) -> Matrix {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&Matrix], cols: usize) -> Matrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn to_complex(m: &Matrix) -> DMatrix<Complex<f64>> {
    m.map(|x| Complex::new(x, 0.0))
}

/// PBH test: every eigenvalue of `a` with modulus at least `rho` must satisfy
/// `rank [lambda I - a, b] = n`.
fn check_pbh(a: &Matrix, b: &Matrix, rho: f64, property: &'static str, mode: &'static str) -> Result<()> {
    let n = a.nrows();
    for lambda in eigenvalues(a) {
        if lambda.norm() < rho * (1.0 - GAIN_RTOL) {
            continue;
        }
        let mut pencil = DMatrix::<Complex<f64>>::zeros(n, n + b.ncols());
        let shifted = DMatrix::<Complex<f64>>::identity(n, n) * lambda - to_complex(a);
        pencil.view_mut((0, 0), (n, n)).copy_from(&shifted);
        pencil.view_mut((0, n), (n, b.ncols())).copy_from(&to_complex(b));
        if complex_rank(&pencil) < n {
            return Err(Error::Synthesis {
                property,
                mode,
                re: lambda.re,
                im: lambda.im,
            });
        }
    }
    Ok(())
}

fn check_square(a: &Matrix, other: &Matrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || other.nrows() != a.nrows() {
        return Err(Error::dimension(
            what,
            format!(
                "A is {}x{}, input matrix is {}x{}",
                a.nrows(),
                a.ncols(),
                other.nrows(),
                other.ncols()
            ),
        ));
    }
    Ok(())
}

/// Coefficients of `prod (z - p_k)`, leading coefficient first.
fn poly_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut c = vec![1.0];
    for &r in roots {
        let mut next = vec![0.0; c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k] += ck;
            next[k + 1] -= r * ck;
        }
        c = next;
    }
    c
}

/// Single-input pole placement (Ackermann). Returns the `1 x n` gain `K`
/// such that `a - b K` has the requested spectrum.
pub fn place_poles(a: &Matrix, b: &Matrix, poles: &[f64]) -> Result<Matrix> {
    check_square(a, b, "pole placement")?;
    let n = a.nrows();
    if b.ncols() != 1 {
        return Err(Error::dimension(
            "pole placement",
            format!("single-input placement needs one input column, got {}", b.ncols()),
        ));
    }
    if poles.len() != n {
        return Err(Error::dimension(
            "pole placement",
            format!("{} poles requested for a state of dimension {n}", poles.len()),
        ));
    }
    let mut ctrb = Matrix::zeros(n, n);
    let mut col = b.clone();
    for k in 0..n {
        ctrb.set_column(k, &col.column(0));
        col = a * col;
    }
    if rank(&ctrb) < n {
        check_pbh(a, b, 0.0, "controllable", "controllable")?;
        return Err(Error::Synthesis {
            property: "controllable",
            mode: "controllable",
            re: f64::NAN,
            im: f64::NAN,
        });
    }
    let coeffs = poly_from_roots(poles);
    let mut p_of_a = Matrix::zeros(n, n);
    for (k, &c) in coeffs.iter().enumerate() {
        p_of_a += matrix_power(a, n - k) * c;
    }
    let mut last = nalgebra::DVector::<f64>::zeros(n);
    last[n - 1] = 1.0;
    let row = ctrb
        .transpose()
        .lu()
        .solve(&last)
        .ok_or(Error::Synthesis {
            property: "controllable",
            mode: "controllable",
            re: f64::NAN,
            im: f64::NAN,
        })?;
    Ok(Matrix::from_row_slice(1, n, row.as_slice()) * p_of_a)
}

/// Infinite-horizon discrete LQR gain. The Riccati solution comes from the
/// structure-preserving doubling iteration, which converges quadratically
/// for stabilizable and detectable data.
pub fn lqr_gain(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<Matrix> {
    check_square(a, b, "lqr")?;
    let n = a.nrows();
    let lost = || Error::Regime("Riccati normal matrix lost definiteness".into());
    let r_inv_bt = r.clone().cholesky().ok_or_else(lost)?.solve(&b.transpose());
    let mut ak = a.clone();
    let mut gk = b * r_inv_bt;
    let mut hk = q.clone();
    for _ in 0..100 {
        let w = (Matrix::identity(n, n) + &gk * &hk)
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Regime("doubling iteration became singular".into()))?;
        let wa = &w * &ak;
        let next_h = &hk + ak.transpose() * &hk * &wa;
        let next_g = &gk + &ak * &w * &gk * ak.transpose();
        ak = &ak * wa;
        let delta = (&next_h - &hk).amax();
        hk = (&next_h + next_h.transpose()) * 0.5;
        gk = (&next_g + next_g.transpose()) * 0.5;
        if delta <= 1e-14 * hk.amax().max(1.0) {
            break;
        }
    }
    let b_t = b.transpose();
    let s = r + &b_t * &hk * b;
    Ok(s.cholesky().ok_or_else(lost)?.solve(&(&b_t * &hk * a)))
}

/// Default closed-loop spectrum for a target radius: `rho * (n - k) / n`.
pub fn default_poles(n: usize, rho: f64) -> Vec<f64> {
    (0..n).map(|k| rho * (n - k) as f64 / n as f64).collect()
}

fn verify_radius(closed: &Matrix, rho: f64) -> Result<()> {
    let achieved = spectral_radius(closed);
    if achieved > rho * (1.0 + GAIN_RTOL) + 1e-12 {
        return Err(Error::GainTarget {
            achieved,
            target: rho,
        });
    }
    Ok(())
}

/// State-feedback gain `K` with `rho(a - b K) <= rho`.
///
/// Single-input pairs are placed at [`default_poles`]; multi-input pairs
/// use an LQR on `(a / rho, b / rho)`, which bounds the closed-loop radius
/// strictly below `rho`.
pub fn stabilizing_gain(a: &Matrix, b: &Matrix, rho: f64) -> Result<Matrix> {
    check_square(a, b, "stabilizing gain")?;
    check_pbh(a, b, rho, "stabilizable", "controllable")?;
    let n = a.nrows();
    // Ackermann's formula places the slowest pole exactly at rho and loses
    // accuracy with the conditioning of the controllability matrix, so it
    // is only used for small single-input pairs and checked before use.
    if n <= 2 && b.ncols() == 1 && rank(&controllability(a, b)) == n {
        if let Ok(gain) = place_poles(a, b, &default_poles(n, rho)) {
            if verify_radius(&(a - b * &gain), rho).is_ok() {
                return Ok(gain);
            }
        }
    }
    let scale = 1.0 / rho;
    let gain = lqr_gain(
        &(a * scale),
        &(b * scale),
        &Matrix::identity(n, n),
        &Matrix::identity(b.ncols(), b.ncols()),
    )?;
    verify_radius(&(a - b * &gain), rho)?;
    Ok(gain)
}

/// Same as [`stabilizing_gain`] with explicitly requested poles.
pub fn placed_gain(a: &Matrix, b: &Matrix, poles: &[f64]) -> Result<Matrix> {
    let gain = place_poles(a, b, poles)?;
    let rho = poles.iter().map(|p| p.abs()).fold(0.0, f64::max);
    verify_radius(&(a - b * &gain), rho)?;
    Ok(gain)
}

/// Observer gain `L` with `rho(a - L c) <= rho`, by duality.
pub fn observer_gain(a: &Matrix, c: &Matrix, rho: f64) -> Result<Matrix> {
    if c.ncols() != a.nrows() {
        return Err(Error::dimension(
            "observer gain",
            format!("C has {} columns, A is {}x{}", c.ncols(), a.nrows(), a.ncols()),
        ));
    }
    let a_t = a.transpose();
    let c_t = c.transpose();
    let gain = match stabilizing_gain(&a_t, &c_t, rho) {
        Ok(k) => k.transpose(),
        Err(Error::Synthesis { re, im, .. }) => {
            return Err(Error::Synthesis {
                property: "detectable",
                mode: "observable",
                re,
                im,
            })
        }
        Err(e) => return Err(e),
    };
    verify_radius(&(a - &gain * c), rho)?;
    Ok(gain)
}

pub fn controllability(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        out.view_mut((0, k * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}
