//! Dense complex linear algebra: factorized solves, Hermitian
//! eigendecomposition, SVD-based pseudo-inverse and subspace angles.
//!
//! Kernels are delegated to `nalgebra`; this module pins the contracts the
//! rest of the crate relies on (condition checks, descending eigenvalue
//! order, eigenvector phase convention, rank reporting).

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;

use crate::error::{EaiError, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Condition number above which a solve is refused.
pub const MAX_CONDITION: f64 = 1e14;

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn ensure_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(EaiError::NonFinite)
    }
}

/// (A + A†)/2.
pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(a: &CMatrix) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        _ => f64::INFINITY,
    }
}

/// LU factorization of a square, well-conditioned matrix.
#[derive(Debug, Clone)]
pub struct Factorization {
    lu: LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
    n: usize,
}

impl Factorization {
    pub fn new(a: &CMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(EaiError::Dimension(format!("expected square matrix, got {}x{}", a.nrows(), a.ncols())));
        }
        ensure_finite(a)?;
        let condition = condition_number(a);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(EaiError::IllConditioned { condition });
        }
        Ok(Self {
            lu: a.clone().lu(),
            condition,
            n: a.nrows(),
        })
    }

    /// Factorizes without recomputing the condition estimate, e.g. for the
    /// adjoint of an already-checked matrix.
    pub(crate) fn with_condition(a: &CMatrix, condition: f64) -> Self {
        Self {
            lu: a.clone().lu(),
            condition,
            n: a.nrows(),
        }
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix> {
        if b.nrows() != self.n {
            return Err(EaiError::Dimension(format!(
                "right-hand side has {} rows, matrix is {}x{}",
                b.nrows(),
                self.n,
                self.n
            )));
        }
        self.lu
            .solve(b)
            .ok_or(EaiError::IllConditioned { condition: f64::INFINITY })
    }

    pub fn solve_vec(&self, b: &CVector) -> Result<CVector> {
        if b.len() != self.n {
            return Err(EaiError::Dimension(format!("vector of length {} for {}x{} system", b.len(), self.n, self.n)));
        }
        self.lu
            .solve(b)
            .ok_or(EaiError::IllConditioned { condition: f64::INFINITY })
    }
}

/// Solves `A X = B`.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    ensure_finite(b)?;
    Factorization::new(a)?.solve(b)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl EigDecomposition {
    pub fn vector(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }

    /// Σ λᵢ vᵢ vᵢ†.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.vectors.nrows();
        let mut out = CMatrix::zeros(n, n);
        for (i, &lambda) in self.values.iter().enumerate() {
            let v = self.vectors.column(i);
            out += (v * v.adjoint()) * Complex64::new(lambda, 0.0);
        }
        out
    }
}

/// Scales `v` so that its largest-magnitude component is real and positive.
/// Ties are broken towards the lowest index.
pub fn fix_phase(v: &mut CVector) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().find(|z| z.norm() >= max * (1.0 - 1e-9)).copied().unwrap();
    let phase = pivot.conj() / pivot.norm();
    *v *= phase;
}

pub fn eig_hermitian(a: &CMatrix, symmetrize: bool) -> Result<EigDecomposition> {
    if !a.is_square() {
        return Err(EaiError::Dimension(format!("expected square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    ensure_finite(a)?;
    let h = if symmetrize {
        hermitian_part(a)
    } else {
        let scale = frobenius(a);
        let asym = frobenius(&(a - a.adjoint()));
        if asym > 1e-8 * scale {
            return Err(EaiError::NotHermitian {
                asymmetry: if scale > 0.0 { asym / scale } else { asym },
            });
        }
        hermitian_part(a)
    };
    let n = h.nrows();
    if n == 0 {
        return Ok(EigDecomposition {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut v: CVector = eig.eigenvectors.column(src).into_owned();
        let nrm = v.norm();
        if nrm > 0.0 {
            v /= Complex64::new(nrm, 0.0);
        }
        fix_phase(&mut v);
        vectors.set_column(dst, &v);
    }
    Ok(EigDecomposition { values, vectors })
}

/// Moore–Penrose pseudo-inverse with its numerical rank.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: CMatrix,
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Pseudo-inverse via SVD, discarding singular values below
/// `rel_tol · σ_max`.
pub fn pinv(a: &CMatrix, rel_tol: f64) -> Result<PseudoInverse> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(crate::error::invalid("rel_tol", format!("must lie in (0, 1), got {rel_tol}")));
    }
    ensure_finite(a)?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(PseudoInverse {
            matrix: CMatrix::zeros(n, m),
            rank: 0,
            singular_values: Vec::new(),
        });
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("U requested");
    let v_t = svd.v_t.as_ref().expect("V^T requested");
    let s = &svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let cutoff = rel_tol * s_max;

    let mut out = CMatrix::zeros(n, m);
    let mut rank = 0;
    for i in 0..s.len() {
        if s_max > 0.0 && s[i] > cutoff {
            rank += 1;
            let ui = u.column(i);
            // v_t rows are v†; column i of V is the adjoint of row i.
            let vi = v_t.row(i).adjoint();
            out += (vi * ui.adjoint()) * Complex64::new(1.0 / s[i], 0.0);
        }
    }
    let mut singular_values: Vec<f64> = s.iter().copied().collect();
    singular_values.sort_by(|x, y| y.total_cmp(x));
    Ok(PseudoInverse {
        matrix: out,
        rank,
        singular_values,
    })
}

/// Largest principal angle (radians) between the column spans of `a` and
/// `b`, both with orthonormal columns. Computed from sines, which stay
/// accurate for nearly coincident subspaces.
pub fn max_principal_angle(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let residual = b - a * (a.adjoint() * b);
    let s = singular_values(&residual);
    s.first().copied().unwrap_or(0.0).clamp(0.0, 1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CMatrix {
        CMatrix::from_fn(m, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        hermitian_part(&random_matrix(rng, n, n))
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_matrix(&mut rng, 4, 3);
        let x = solve(&CMatrix::identity(4, 4), &b).unwrap();
        assert!(frobenius(&(x - &b)) < 1e-15);
    }

    #[test]
    fn random_solve_multiplies_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 6, 6) + CMatrix::identity(6, 6) * c(3.0, 0.0);
        let x_true = random_matrix(&mut rng, 6, 2);
        let b = &a * &x_true;
        let x = solve(&a, &b).unwrap();
        let residual = frobenius(&(&a * &x - &b));
        assert!(residual < 1e-12, "{residual}");
        assert!(residual <= 1e-10 * frobenius(&a) * frobenius(&x));
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let mut a = CMatrix::identity(3, 3);
        a[(1, 1)] = c(0.0, 0.0);
        let b = CMatrix::identity(3, 1);
        assert!(matches!(solve(&a, &b), Err(EaiError::IllConditioned { .. })));
    }

    #[test]
    fn nonconforming_shapes_are_rejected() {
        let a = CMatrix::identity(3, 3);
        assert!(matches!(solve(&a, &CMatrix::zeros(2, 1)), Err(EaiError::Dimension(_))));
        assert!(matches!(solve(&CMatrix::zeros(2, 3), &CMatrix::zeros(2, 1)), Err(EaiError::Dimension(_))));
    }

    #[test]
    fn eig_of_diagonal() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![c(3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]));
        let e = eig_hermitian(&a, false).unwrap();
        assert_eq!(e.values.len(), 3);
        for (got, want) in e.values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        for (col, idx) in [(0, 0), (1, 2), (2, 1)] {
            assert!((e.vectors[(idx, col)] - c(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn eig_of_swap() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let e = eig_hermitian(&a, false).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] + 1.0).abs() < 1e-14);
        assert!((e.vector(0) - CVector::from_vec(vec![c(h, 0.0), c(h, 0.0)])).norm() < 1e-14);
        assert!((e.vector(1) - CVector::from_vec(vec![c(h, 0.0), c(-h, 0.0)])).norm() < 1e-14);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_hermitian(&mut rng, 8);
        let e = eig_hermitian(&a, false).unwrap();
        assert!(frobenius(&(e.reconstruct() - &a)) < 1e-10);

        let gram = e.vectors.adjoint() * &e.vectors - CMatrix::identity(8, 8);
        assert!(frobenius(&gram) < 1e-10 * 8.0);
        let diag = CMatrix::from_diagonal(&CVector::from_iterator(8, e.values.iter().map(|&x| c(x, 0.0))));
        assert!(frobenius(&(&a * &e.vectors - &e.vectors * diag)) < 1e-9 * frobenius(&a));

        let trace: f64 = (0..8).map(|i| a[(i, i)].re).sum();
        let sum: f64 = e.values.iter().sum();
        assert!((trace - sum).abs() < 1e-10 * trace.abs().max(1.0));
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn eig_phase_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_hermitian(&mut rng, 5);
        let e = eig_hermitian(&a, false).unwrap();
        for i in 0..5 {
            let v = e.vector(i);
            let (idx, _) = v.iter().enumerate().fold((0, 0.0), |acc, (j, z)| if z.norm() > acc.1 + 1e-12 { (j, z.norm()) } else { acc });
            assert!(v[idx].im.abs() < 1e-12 && v[idx].re > 0.0);
        }
    }

    #[test]
    fn non_hermitian_requires_symmetrize() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 4, 4);
        assert!(matches!(eig_hermitian(&a, false), Err(EaiError::NotHermitian { .. })));
        let e = eig_hermitian(&a, true).unwrap();
        assert!(frobenius(&(e.reconstruct() - hermitian_part(&a))) < 1e-12);
    }

    #[test]
    fn pinv_of_invertible_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_matrix(&mut rng, 5, 5) + CMatrix::identity(5, 5) * c(2.0, 0.0);
        let p = pinv(&a, DEFAULT_PINV_TOL).unwrap();
        assert_eq!(p.rank, 5);
        assert!(frobenius(&(&p.matrix * &a - CMatrix::identity(5, 5))) < 1e-9);
    }

    #[test]
    fn pinv_of_rank_one_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_matrix(&mut rng, 4, 1);
        let v = random_matrix(&mut rng, 3, 1);
        let a = &u * v.adjoint();
        let p = pinv(&a, DEFAULT_PINV_TOL).unwrap();
        let nu = u.norm_squared();
        let nv = v.norm_squared();
        let expected = (&v * u.adjoint()) / c(nu * nv, 0.0);
        assert_eq!(p.rank, 1);
        assert!(frobenius(&(p.matrix - &expected)) < 1e-12 * frobenius(&expected));
    }

    #[test]
    fn pinv_of_zero_matrix() {
        let p = pinv(&CMatrix::zeros(3, 2), DEFAULT_PINV_TOL).unwrap();
        assert_eq!(p.rank, 0);
        assert_eq!(p.matrix.shape(), (2, 3));
        assert!(p.matrix.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn pinv_penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // Rank-deficient 6x4.
        let a = random_matrix(&mut rng, 6, 2) * random_matrix(&mut rng, 2, 4);
        let p = pinv(&a, DEFAULT_PINV_TOL).unwrap().matrix;
        let na = frobenius(&a);
        let np = frobenius(&p);
        assert!(frobenius(&(&a * &p * &a - &a)) < 1e-9 * na);
        assert!(frobenius(&(&p * &a * &p - &p)) < 1e-9 * np);
        let ap = &a * &p;
        let pa = &p * &a;
        assert!(frobenius(&(ap.adjoint() - &ap)) < 1e-9 * frobenius(&ap));
        assert!(frobenius(&(pa.adjoint() - &pa)) < 1e-9 * frobenius(&pa));
    }

    #[test]
    fn principal_angles() {
        let e1 = CMatrix::from_fn(3, 1, |i, _| if i == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let e2 = CMatrix::from_fn(3, 1, |i, _| if i == 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!((max_principal_angle(&e1, &e2) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let phased = &e1 * c(0.0, 1.0);
        assert!(max_principal_angle(&e1, &phased) < 1e-15);
        let t: f64 = 1e-9;
        let tilted = CMatrix::from_fn(3, 1, |i, _| match i {
            0 => c(t.cos(), 0.0),
            1 => c(t.sin(), 0.0),
            _ => c(0.0, 0.0),
        });
        assert!((max_principal_angle(&e1, &tilted) - t).abs() < 1e-15);
    }
}
