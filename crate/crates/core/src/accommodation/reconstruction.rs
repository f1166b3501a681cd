//! Finite-time reconstruction of the injected input from the stream of
//! attacker-state estimates.
//!
//! The estimate stream follows `x~(k-1)` (full regime) or `P x~(k-1)` (low
//! regime). A window of `r + 1` consecutive samples is explained by the
//! anchor state at its start plus `r` unknown inputs; the least-squares
//! solution of that stacked system returns `eta(k - r0 - 1)`, where `r0` is
//! the largest relative degree of the output map.

use std::collections::VecDeque;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RankRegime;
use crate::numerics::{checked_svd, eigenvalues, matrix_power, pseudo_inverse, rank, singular_values, to_complex, ProjectionPair};
use crate::{Error, Matrix, Result, Vector};

/// Relative tolerance for "this row never sees the input".
const DEGREE_RTOL: f64 = 1e-12;
/// Relative smallest singular value under which the pencil is rank deficient
/// at a computed candidate zero.
const ZERO_RTOL: f64 = 1e-8;
/// Candidates closer than this are the same point.
const ZERO_MATCH: f64 = 1e-6;
const PENCIL_SEED: u64 = 0x5EED_C0DE;

/// Per-row relative degree of `(a, b, m)`: the least `r` with
/// `m_l a^(r-1) b != 0`.
pub fn relative_degree(a: &Matrix, b: &Matrix, m: &Matrix) -> Result<Vec<usize>> {
    let n = a.nrows();
    let mut degrees = Vec::with_capacity(m.nrows());
    for l in 0..m.nrows() {
        let row = m.row(l).clone_owned();
        let scale = row.norm().max(1.0) * b.norm().max(1.0);
        let mut power = Matrix::identity(n, n);
        let mut found = None;
        for r in 1..=n.max(1) {
            let markov = &row * &power * b;
            if markov.amax() > DEGREE_RTOL * scale * power.norm().max(1.0) {
                found = Some(r);
                break;
            }
            power = a * power;
        }
        degrees.push(found.ok_or(Error::NoRelativeDegree { row: l + 1 })?);
    }
    if degrees.is_empty() {
        return Err(Error::NoRelativeDegree { row: 0 });
    }
    let mut leading = Matrix::zeros(m.nrows(), b.ncols());
    for (l, &r) in degrees.iter().enumerate() {
        let markov = m.row(l) * matrix_power(a, r - 1) * b;
        leading.set_row(l, &markov);
    }
    let leading_rank = rank(&leading);
    if leading_rank < b.ncols() {
        return Err(Error::RelativeDegreeRank {
            rank: leading_rank,
            inputs: b.ncols(),
        });
    }
    Ok(degrees)
}

/// Block lower-triangular input-to-output matrix with `blocks` block rows
/// and columns; block `(t, tau)` is `m a^(offset + t - tau) b` for `t >= tau`.
pub fn toeplitz(a: &Matrix, b: &Matrix, m: &Matrix, blocks: usize, offset: usize) -> Matrix {
    let (p, inputs) = (m.nrows(), b.ncols());
    let mut out = Matrix::zeros(blocks * p, blocks * inputs);
    for t in 0..blocks {
        for tau in 0..=t {
            let block = m * matrix_power(a, offset + t - tau) * b;
            out.view_mut((t * p, tau * inputs), (p, inputs)).copy_from(&block);
        }
    }
    out
}

/// Stacked window map from `[x(s); eta(s..s+r-1)]` to `m x(s..s+r)`.
pub fn window_matrix(a: &Matrix, b: &Matrix, m: &Matrix, r: usize) -> Matrix {
    let (p, n, inputs) = (m.nrows(), a.nrows(), b.ncols());
    let mut out = Matrix::zeros((r + 1) * p, n + r * inputs);
    for t in 0..=r {
        out.view_mut((t * p, 0), (p, n)).copy_from(&(m * matrix_power(a, t)));
        for tau in 0..t {
            let block = m * matrix_power(a, t - 1 - tau) * b;
            out.view_mut((t * p, n + tau * inputs), (p, inputs)).copy_from(&block);
        }
    }
    out
}

/// `beta [a, b; m, 0] - alpha [I, 0; 0, 0]`; `z = alpha / beta`.
fn homogeneous_pencil(
    a: &Matrix,
    b: &Matrix,
    m: &Matrix,
    alpha: Complex<f64>,
    beta: Complex<f64>,
) -> DMatrix<Complex<f64>> {
    let (n, p, inputs) = (a.nrows(), m.nrows(), b.ncols());
    let mut out = DMatrix::<Complex<f64>>::zeros(n + p, n + inputs);
    out.view_mut((0, 0), (n, n)).copy_from(&(to_complex(a) * beta));
    for d in 0..n {
        out[(d, d)] -= alpha;
    }
    out.view_mut((0, n), (n, inputs)).copy_from(&(to_complex(b) * beta));
    out.view_mut((n, 0), (p, n)).copy_from(&(to_complex(m) * beta));
    out
}

fn rosenbrock(a: &Matrix, b: &Matrix, m: &Matrix, z: Complex<f64>) -> DMatrix<Complex<f64>> {
    homogeneous_pencil(a, b, m, z, Complex::new(1.0, 0.0))
}

/// Drop in column rank of `[a - z I, b; m, 0]` at `z`, tested on the
/// normalized homogeneous pencil so large `|z|` is not mistaken for a
/// rank drop.
fn is_invariant_zero(a: &Matrix, b: &Matrix, m: &Matrix, z: Complex<f64>) -> bool {
    let radius = (1.0 + z.norm_sqr()).sqrt();
    let beta = Complex::new(1.0 / radius, 0.0);
    let pencil = homogeneous_pencil(a, b, m, z * beta, beta);
    let (n, p, inputs) = (a.nrows(), m.nrows(), b.ncols());
    let mut system = Matrix::zeros(n + p, n + inputs);
    system.view_mut((0, 0), (n, n)).copy_from(a);
    system.view_mut((0, n), (n, inputs)).copy_from(b);
    system.view_mut((n, 0), (p, n)).copy_from(m);
    let scale = system.norm().max(1.0);
    let smin = checked_svd(&pencil).singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    smin < ZERO_RTOL * scale
}

/// PBH test: `z` is an eigenvalue of `a` whose eigenvector `m` does not see.
fn is_unobservable(a: &Matrix, m: &Matrix, z: Complex<f64>) -> bool {
    let empty = Matrix::zeros(a.nrows(), 0);
    is_invariant_zero(a, &empty, m, z)
}

fn push_unique(list: &mut Vec<Complex<f64>>, z: Complex<f64>) {
    if !list.iter().any(|w| (w - z).norm() < ZERO_MATCH) {
        list.push(z);
    }
}

/// Invariant zeros of `(a, b, m)`, assuming the Rosenbrock pencil has full
/// column normal rank.
///
/// The tall pencil is squeezed by two fixed pseudo-random left compressions;
/// every true zero is a generalized eigenvalue of both. Each candidate is
/// then confirmed on the uncompressed pencil.
pub fn invariant_zeros(a: &Matrix, b: &Matrix, m: &Matrix) -> Vec<Complex<f64>> {
    let (n, p, inputs) = (a.nrows(), m.nrows(), b.ncols());
    let cols = n + inputs;
    let mut system = Matrix::zeros(n + p, cols);
    system.view_mut((0, 0), (n, n)).copy_from(a);
    system.view_mut((0, n), (n, inputs)).copy_from(b);
    system.view_mut((n, 0), (p, n)).copy_from(m);
    let mut descriptor = Matrix::zeros(n + p, cols);
    descriptor.view_mut((0, 0), (n, n)).fill_with_identity();

    let mut rng = ChaCha8Rng::seed_from_u64(PENCIL_SEED);
    let mut zeros = Vec::new();
    for _ in 0..2 {
        let u = Matrix::from_fn(cols, n + p, |_, _| rng.random_range(-1.0..1.0));
        let sys = &u * &system;
        let desc = &u * &descriptor;
        // sys - z desc = (sys - sigma desc) - (z - sigma) desc, so
        // z = sigma + 1 / mu for the eigenvalues mu of (sys - sigma desc)^-1 desc.
        let sigma = rng.random_range(0.5..1.5);
        let Some(shifted_inv) = (&sys - &desc * sigma).try_inverse() else {
            continue;
        };
        let pencil = shifted_inv * &desc;
        let scale = pencil.norm().max(1.0);
        for mu in eigenvalues(&pencil) {
            // Infinite eigenvalues of the compressed pencil sit in Jordan
            // chains and perturb to |mu| of order sqrt(eps).
            if mu.norm() <= 1e-6 * scale {
                continue;
            }
            let z = Complex::new(sigma, 0.0) + mu.inv();
            if is_invariant_zero(a, b, m, z) {
                push_unique(&mut zeros, z);
            }
        }
    }
    zeros
}

/// Normal rank of the Rosenbrock pencil, probed at fixed pseudo-random
/// complex points.
pub fn pencil_normal_rank(a: &Matrix, b: &Matrix, m: &Matrix) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(PENCIL_SEED ^ 0xA5A5);
    (0..3)
        .map(|_| {
            let z = Complex::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            crate::numerics::complex_rank(&rosenbrock(a, b, m, z))
        })
        .max()
        .unwrap_or(0)
}

/// Low-regime reconstructibility: the invariant zeros of `(a, b, m)` must be
/// exactly the `(a, m)`-unobservable eigenvalues.
pub fn check_zero_condition(a: &Matrix, b: &Matrix, m: &Matrix) -> Result<()> {
    let n = a.nrows();
    let full = n + b.ncols();
    let normal = pencil_normal_rank(a, b, m);
    if normal < full {
        return Err(Error::NotLeftInvertible {
            regime: "low",
            reason: format!("Rosenbrock pencil has normal rank {normal} < {full}"),
        });
    }
    let mut unobservable = Vec::new();
    for lambda in eigenvalues(a) {
        if is_unobservable(a, m, lambda) {
            push_unique(&mut unobservable, lambda);
        }
    }
    let zeros = invariant_zeros(a, b, m);
    let covered = |set: &[Complex<f64>], z: &Complex<f64>| set.iter().any(|w| (w - z).norm() < ZERO_MATCH);
    if let Some(z) = zeros.iter().find(|z| !covered(&unobservable, z)) {
        return Err(Error::NotLeftInvertible {
            regime: "low",
            reason: format!(
                "invariant zero {:.6}{:+.6}i is not an unobservable eigenvalue",
                z.re, z.im
            ),
        });
    }
    if let Some(z) = unobservable.iter().find(|z| !covered(&zeros, z)) {
        return Err(Error::NotLeftInvertible {
            regime: "low",
            reason: format!(
                "unobservable eigenvalue {:.6}{:+.6}i is not an invariant zero",
                z.re, z.im
            ),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub eta: Vector,
    /// `false` while the window is still filling; `eta` is zero then.
    pub ready: bool,
}

#[derive(Debug, Clone)]
pub struct InputReconstructor {
    pub a: Matrix,
    pub b: Matrix,
    /// Output map of the estimate stream: `I`, or the projection `P`.
    pub output_map: Matrix,
    pub regime: RankRegime,
    /// Window length `r`; the buffer holds `r + 1` samples.
    pub window: usize,
    pub relative_degree: Vec<usize>,
    pub r0: usize,
    /// Input-to-state matrix in the form of the reference display: first
    /// block column `B, AB, ..`, or `P A^(r0-1) B, ..` in the low regime.
    pub psi: Matrix,
    window_map: Matrix,
    window_pinv: Matrix,
    target_block: usize,
    samples: VecDeque<Vector>,
}

impl InputReconstructor {
    /// `window` defaults to the state dimension and may not be shorter.
    pub fn build(a: &Matrix, b: &Matrix, projection: &ProjectionPair, window: Option<usize>) -> Result<Self> {
        let n = a.nrows();
        let r = window.unwrap_or(n);
        if r < n {
            return Err(Error::config(
                "accommodation.window",
                format!("window {r} is shorter than the state dimension {n}"),
            ));
        }
        let (regime, output_map) = if projection.is_full_rank() {
            (RankRegime::Full, Matrix::identity(n, n))
        } else {
            (RankRegime::Low, projection.projection.clone())
        };
        let relative_degree = relative_degree(a, b, &output_map)?;
        let r0 = relative_degree.iter().copied().max().unwrap_or(1);

        let psi = match regime {
            RankRegime::Full => toeplitz(a, b, &output_map, r, 0),
            RankRegime::Low => toeplitz(a, b, &output_map, r, r0 - 1),
        };
        if rank(&psi) < psi.ncols() {
            return Err(Error::NotLeftInvertible {
                regime: regime.as_str(),
                reason: "input-to-state matrix lacks full column rank".into(),
            });
        }
        if regime == RankRegime::Low {
            check_zero_condition(a, b, &output_map)?;
        }

        let window_map = window_matrix(a, b, &output_map, r);
        let window_pinv = pseudo_inverse(&window_map);
        let inputs = b.ncols();
        let target_block = r - r0;
        // The target input must be uniquely pinned down by the window.
        let identified = &window_pinv * &window_map;
        let col = n + target_block * inputs;
        let target_rows = identified.rows(col, inputs);
        let mut expected = Matrix::zeros(inputs, window_map.ncols());
        expected.view_mut((0, col), (inputs, inputs)).fill_with_identity();
        let scale = singular_values(&window_map).first().copied().unwrap_or(1.0).max(1.0);
        if (target_rows - expected).amax() > 1e-9 * scale {
            return Err(Error::NotLeftInvertible {
                regime: regime.as_str(),
                reason: format!("window of {r} steps does not identify the input"),
            });
        }

        Ok(Self {
            a: a.clone(),
            b: b.clone(),
            output_map,
            regime,
            window: r,
            relative_degree,
            r0,
            psi,
            window_map,
            window_pinv,
            target_block,
            samples: VecDeque::with_capacity(r + 1),
        })
    }

    /// Delay between the injected input and its reconstruction.
    pub fn delay(&self) -> usize {
        self.r0 + 1
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn samples(&self) -> usize {
        self.samples.len()
    }

    pub fn reset(&mut self) {
        self.samples.clear();
    }

    /// Buffer a full-state LS estimate; only its image under the output map
    /// is kept.
    pub fn push(&mut self, estimate: &Vector) {
        if self.samples.len() == self.window + 1 {
            self.samples.pop_front();
        }
        self.samples.push_back(&self.output_map * estimate);
    }

    pub fn estimate(&self) -> Reconstruction {
        let inputs = self.input_dim();
        if self.samples.len() < self.window + 1 {
            return Reconstruction {
                eta: Vector::zeros(inputs),
                ready: false,
            };
        }
        let p = self.output_map.nrows();
        let mut stacked = Vector::zeros(self.samples.len() * p);
        for (t, s) in self.samples.iter().enumerate() {
            stacked.rows_mut(t * p, p).copy_from(s);
        }
        let solution = &self.window_pinv * stacked;
        let col = self.a.nrows() + self.target_block * inputs;
        Reconstruction {
            eta: solution.rows(col, inputs).into_owned(),
            ready: true,
        }
    }

    pub fn window_map(&self) -> &Matrix {
        &self.window_map
    }
}
