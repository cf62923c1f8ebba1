//! Small complex-matrix helpers shared across modules.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Dense complex matrix, the working type for every channel and beamformer.
pub type CMat = DMatrix<Complex64>;

/// Squared Frobenius norm.
pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Frobenius norm.
pub fn frob(m: &CMat) -> f64 {
    frob_sq(m).sqrt()
}

/// Draw an `nrows x ncols` matrix with i.i.d. circularly symmetric complex
/// Gaussian entries of total variance `var` each (`var/2` per real part).
pub fn complex_gaussian<R: Rng>(rng: &mut R, nrows: usize, ncols: usize, var: f64) -> CMat {
    let n = Normal::new(0.0, (var / 2.0).sqrt()).expect("variance must be finite and positive");
    CMat::from_fn(nrows, ncols, |_, _| {
        Complex64::new(n.sample(rng), n.sample(rng))
    })
}

/// Extend a matrix of orthonormal columns to a full square unitary basis.
///
/// Completion is deterministic: canonical basis vectors are orthogonalized in
/// index order and kept whenever the residual is numerically independent.
pub fn complete_unitary(cols: &CMat) -> CMat {
    let n = cols.nrows();
    let r = cols.ncols();
    assert!(r <= n, "cannot complete {} columns in dimension {}", r, n);
    let mut basis = CMat::zeros(n, n);
    basis.view_mut((0, 0), (n, r)).copy_from(cols);
    let mut have = r;
    let mut candidate = 0usize;
    while have < n && candidate < n {
        let mut v = DMatrix::<Complex64>::zeros(n, 1);
        v[(candidate, 0)] = Complex64::new(1.0, 0.0);
        // two rounds of Gram-Schmidt for numerical orthogonality
        for _ in 0..2 {
            for k in 0..have {
                let bk = basis.column(k);
                let proj: Complex64 = bk.iter().zip(v.iter()).map(|(b, x)| b.conj() * x).sum();
                for i in 0..n {
                    v[(i, 0)] -= proj * basis[(i, k)];
                }
            }
        }
        let norm = frob(&v);
        if norm > 1e-8 {
            for i in 0..n {
                basis[(i, have)] = v[(i, 0)] / norm;
            }
            have += 1;
        }
        candidate += 1;
    }
    assert_eq!(have, n, "failed to complete unitary basis");
    basis
}

/// Rotate a column in place so its first entry of magnitude above `tol` is
/// real and positive; returns the applied phasor (multiply a paired column by
/// the same factor to preserve products).
pub fn canonicalize_column<S>(
    col: &mut nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S>,
    tol: f64,
) -> Complex64
where
    S: nalgebra::storage::StorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>,
{
    let pivot = col.iter().find(|z| z.norm() > tol).copied();
    let phase = match pivot {
        Some(z) => (z / z.norm()).conj(),
        None => Complex64::new(1.0, 0.0),
    };
    for z in col.iter_mut() {
        *z *= phase;
    }
    phase
}

#[cfg(test)]
pub(crate) fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol,
        "{}: {} vs {} (tol {})",
        what,
        a,
        b,
        tol
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream;

    #[test]
    fn gaussian_variance_calibrated() {
        let mut rng = stream(11, "linalg-test", 0);
        let m = complex_gaussian(&mut rng, 200, 200, 2.5);
        let mean_power = frob_sq(&m) / (200.0 * 200.0);
        assert_close(mean_power, 2.5, 0.05, "per-entry power");
    }

    #[test]
    fn completion_is_unitary_and_preserves_input() {
        let mut rng = stream(12, "linalg-test", 1);
        let g = complex_gaussian(&mut rng, 6, 2, 1.0);
        // orthonormalize the two columns by QR
        let qr = g.qr();
        let q = qr.q();
        let full = complete_unitary(&q);
        assert_eq!(full.ncols(), 6);
        for i in 0..6 {
            for j in 0..2 {
                assert!((full[(i, j)] - q[(i, j)]).norm() < 1e-14);
            }
        }
        let gram = full.adjoint() * &full;
        let eye = CMat::identity(6, 6);
        assert!(frob(&(gram - eye)) < 1e-12);
    }

    #[test]
    fn canonicalize_makes_pivot_real_positive() {
        let mut v = nalgebra::DVector::from_vec(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(-0.3, 0.4),
            Complex64::new(1.0, 1.0),
        ]);
        canonicalize_column(&mut v.column_mut(0), 1e-12);
        assert!(v[1].im.abs() < 1e-15 && v[1].re > 0.0);
    }
}
