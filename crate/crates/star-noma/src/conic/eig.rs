//! Dominant eigenpair and rank-one extraction for the semidefinite
//! relaxations: beamformer recovery scales the principal eigenvector by
//! √λ_max; surface-side recovery keeps the eigenvector's phases but
//! restores the per-element amplitudes recorded on the matrix diagonal.

use nalgebra::{Complex, DMatrix, DVector};

use super::builder::ConicError;

type C64 = Complex<f64>;

/// Which structure to recover from a PSD matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankOneKind {
    /// `w w†` relaxation: return `√λ_max · u_max`.
    Beamformer,
    /// `v v†` surface relaxation: return `u_max` with each amplitude reset
    /// to `√diag(V)_m` (phases preserved). ES projection across the two
    /// sides is the caller's job since it couples them.
    StarSide,
}

/// Largest eigenvalue and a unit eigenvector of a Hermitian matrix.
///
/// Inputs with relative asymmetry above 1e−10 are rejected. The eigenvector
/// phase is fixed so its largest-magnitude entry (lowest index on ties) is
/// real nonnegative, making the result deterministic.
pub fn dominant_eigpair(a: &DMatrix<C64>) -> Result<(f64, DVector<C64>), ConicError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let adj = a.adjoint();
    let asym = (a - &adj).norm();
    let scale = a.norm().max(1e-300);
    if asym > 1e-10 * scale.max(1.0) {
        return Err(ConicError::NonHermitian(asym / scale));
    }
    let sym = (a + &adj) * C64::new(0.5, 0.0);

    // real lift [[X, −Y], [Y, X]]: eigenpairs come in duplicated pairs
    // (u_re; u_im), (−u_im; u_re) sharing the complex eigenvalue
    let mut lift = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let e = sym[(i, j)];
            lift[(i, j)] = e.re;
            lift[(i + n, j + n)] = e.re;
            lift[(i, j + n)] = -e.im;
            lift[(i + n, j)] = e.im;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(lift);
    let mut best = 0;
    for k in 1..2 * n {
        if eig.eigenvalues[k] > eig.eigenvalues[best] + 1e-14 * scale {
            best = k;
        }
    }
    let lambda = eig.eigenvalues[best];
    let col = eig.eigenvectors.column(best);
    let mut u = DVector::from_fn(n, |i, _| C64::new(col[i], col[i + n]));
    let norm = u.norm();
    if norm > 0.0 {
        u /= C64::new(norm, 0.0);
    }
    Ok((lambda, phase_fix(u)))
}

/// Rotate a global phase so the largest-magnitude entry (lowest index wins
/// ties within 1e−12) is real nonnegative.
fn phase_fix(mut u: DVector<C64>) -> DVector<C64> {
    let mut pivot = 0;
    for i in 1..u.len() {
        if u[i].norm() > u[pivot].norm() + 1e-12 {
            pivot = i;
        }
    }
    let mag = u[pivot].norm();
    if mag > 0.0 {
        let rot = u[pivot].conj() / C64::new(mag, 0.0);
        u *= rot;
    }
    u
}

/// Recover a vector from a (near-)rank-one PSD matrix.
pub fn extract_rank_one(v: &DMatrix<C64>, kind: RankOneKind) -> Result<DVector<C64>, ConicError> {
    let n = v.nrows();
    let trace: f64 = (0..n).map(|i| v[(i, i)].re).sum();
    if trace <= 1e-300 {
        return Ok(match kind {
            RankOneKind::Beamformer => DVector::zeros(n),
            // zero diagonal means zero amplitudes regardless of phases
            RankOneKind::StarSide => DVector::zeros(n),
        });
    }
    let (lambda, u) = dominant_eigpair(v)?;
    Ok(match kind {
        RankOneKind::Beamformer => u * C64::new(lambda.max(0.0).sqrt(), 0.0),
        RankOneKind::StarSide => DVector::from_fn(n, |m, _| {
            let amp = v[(m, m)].re.max(0.0).sqrt();
            let um = u[m];
            if um.norm() > 1e-300 {
                um / C64::new(um.norm(), 0.0) * C64::new(amp, 0.0)
            } else {
                C64::new(amp, 0.0)
            }
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut impl Rng, n: usize) -> DVector<C64> {
        DVector::from_fn(n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    #[test]
    fn identity_ties_resolve_deterministically() {
        let a = DMatrix::<C64>::identity(3, 3);
        let (lam, u) = dominant_eigpair(&a).unwrap();
        assert_relative_eq!(lam, 1.0, epsilon = 1e-12);
        assert_relative_eq!(u.norm(), 1.0, epsilon = 1e-12);
        let (lam2, u2) = dominant_eigpair(&a).unwrap();
        assert_relative_eq!(lam, lam2);
        assert_relative_eq!((u - u2).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn diagonal_picks_largest() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
            C64::new(5.0, 0.0),
        ]));
        let (lam, u) = dominant_eigpair(&a).unwrap();
        assert_relative_eq!(lam, 5.0, epsilon = 1e-10);
        assert_relative_eq!(u[2].re, 1.0, epsilon = 1e-10);
        assert_relative_eq!(u[0].norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut a = DMatrix::<C64>::identity(2, 2);
        a[(0, 1)] = C64::new(0.5, 0.0);
        assert!(dominant_eigpair(&a).is_err());
    }

    #[test]
    fn matches_power_iteration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in [3usize, 6, 10] {
            let b = DMatrix::from_fn(n, n, |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let a = &b * b.adjoint();
            let (lam, u) = dominant_eigpair(&a).unwrap();
            // independent power iteration
            let mut v = DVector::from_element(n, C64::new(1.0, 0.3));
            v /= C64::new(v.norm(), 0.0);
            let mut est = 0.0;
            for _ in 0..5000 {
                v = &a * v;
                est = v.norm();
                v /= C64::new(est, 0.0);
            }
            assert_relative_eq!(lam, est, epsilon = 1e-8 * est.max(1.0));
            let residual = (&a * &u - &u * C64::new(lam, 0.0)).norm();
            assert!(residual <= 1e-9 * a.norm());
        }
    }

    #[test]
    fn rank_one_beamformer_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let v = random_vec(&mut rng, 5);
            let mat = &v * v.adjoint();
            let w = extract_rank_one(&mat, RankOneKind::Beamformer).unwrap();
            // equal up to a global phase: compare outer products
            let diff = (&w * w.adjoint() - &mat).norm();
            assert!(diff <= 1e-8 * mat.norm().max(1.0));
        }
    }

    #[test]
    fn zero_matrix_gives_zero_vector() {
        let z = DMatrix::<C64>::zeros(4, 4);
        assert_eq!(
            extract_rank_one(&z, RankOneKind::Beamformer).unwrap(),
            DVector::zeros(4)
        );
        assert_eq!(
            extract_rank_one(&z, RankOneKind::StarSide).unwrap(),
            DVector::zeros(4)
        );
    }

    #[test]
    fn star_side_amplitudes_from_diagonal() {
        // flat rank-one matrix with diag 0.5: amplitudes √0.5 each
        let n = 4;
        let v = DVector::from_element(n, C64::new(0.5f64.sqrt(), 0.0));
        let mat = &v * v.adjoint();
        let got = extract_rank_one(&mat, RankOneKind::StarSide).unwrap();
        for m in 0..n {
            assert_relative_eq!(got[m].norm(), 0.5f64.sqrt(), epsilon = 1e-10);
        }
        // phases survive amplitude restoration
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let v = DVector::from_fn(n, |_, _| {
            C64::from_polar(rng.gen_range(0.1..1.0), rng.gen_range(0.0..6.28))
        });
        let mat = &v * v.adjoint();
        let got = extract_rank_one(&mat, RankOneKind::StarSide).unwrap();
        for m in 0..n {
            assert_relative_eq!(got[m].norm(), v[m].norm(), epsilon = 1e-9);
        }
        // relative phases match v's up to one global rotation
        let rot = got[0] / v[0];
        for m in 0..n {
            let e = (v[m] * rot - got[m]).norm();
            assert!(e <= 1e-8);
        }
    }

    #[test]
    fn near_rank_one_extraction_loses_little() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let n = 5;
        let v = random_vec(&mut rng, n);
        let noise = random_vec(&mut rng, n) * C64::new(1e-2, 0.0);
        let mat = &v * v.adjoint() + &noise * noise.adjoint();
        let h_vec = random_vec(&mut rng, n);
        let h = &h_vec * h_vec.adjoint();
        let trace_obj = (&mat * &h).trace().re;
        let w = extract_rank_one(&mat, RankOneKind::Beamformer).unwrap();
        let vec_obj = w.dotc(&(&h * &w)).re;
        assert!(vec_obj >= trace_obj * (1.0 - 5e-3));
    }
}
