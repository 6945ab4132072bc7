//! Dense Hermitian eigensolver: complex Householder reduction to a real
//! symmetric tridiagonal form, followed by the implicit-shift QL iteration
//! (eigenvalues only).

use num_complex::Complex64;

use crate::ensemble::HermitianMatrix;
use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 50;

/// Eigenvalues of a Hermitian matrix, sorted in descending order.
pub fn eigvalsh(a: &HermitianMatrix) -> Result<Vec<f64>> {
    let n = a.dim();
    if n == 1 {
        return Ok(vec![a.get(0, 0).re]);
    }
    let (mut d, mut e) = tridiagonalize(a);
    ql_implicit(&mut d, &mut e).map_err(|iterations| Error::EigenSolver {
        n,
        iterations,
        packed: a.packed().to_vec(),
    })?;
    d.sort_by(|x, y| y.total_cmp(x));
    Ok(d)
}

/// Householder reduction of a Hermitian matrix to real tridiagonal (d, e):
/// unitary similarity transforms zero out each column below the first
/// subdiagonal, with reflectors chosen so the subdiagonal comes out real.
fn tridiagonalize(m: &HermitianMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.dim();
    // Dense lower triangle, row-major; the upper triangle is never read.
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..=i {
            a[i * n + j] = m.get(i, j);
        }
    }
    let mut e = vec![0.0; n];
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut u = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..n.saturating_sub(2) {
        let alpha = a[(k + 1) * n + k];
        let xnorm2: f64 = (k + 2..n).map(|i| a[i * n + k].norm_sqr()).sum();
        if xnorm2 == 0.0 && alpha.im == 0.0 {
            e[k] = alpha.re;
            continue;
        }
        let anorm = (alpha.norm_sqr() + xnorm2).sqrt();
        let beta = if alpha.re > 0.0 { -anorm } else { anorm };
        let tau = (Complex64::new(beta, 0.0) - alpha) / beta;
        let denom = alpha - beta;
        let msub = n - k - 1;
        v[0] = Complex64::new(1.0, 0.0);
        for i in 1..msub {
            v[i] = a[(k + 1 + i) * n + k] / denom;
        }

        // u = S v on the trailing block S = a[k+1.., k+1..].
        for x in u.iter_mut().take(msub) {
            *x = Complex64::new(0.0, 0.0);
        }
        for i in 0..msub {
            let row = (k + 1 + i) * n + k + 1;
            let vi = v[i];
            let mut acc = Complex64::new(a[row + i].re, 0.0) * vi;
            for j in 0..i {
                let s = a[row + j];
                acc += s * v[j];
                u[j] += s.conj() * vi;
            }
            u[i] += acc;
        }

        // w = τ u − (|τ|² μ / 2) v with μ = v* S v (real).
        let mu: f64 = (0..msub)
            .map(|i| (v[i].conj() * u[i]).re)
            .sum();
        let gamma = 0.5 * tau.norm_sqr() * mu;
        for i in 0..msub {
            u[i] = tau * u[i] - gamma * v[i];
        }

        // S ← S − (w v* + v w*), lower triangle only.
        for i in 0..msub {
            let row = (k + 1 + i) * n + k + 1;
            let wi = u[i];
            let vi = v[i];
            for j in 0..=i {
                a[row + j] -= wi * v[j].conj() + vi * u[j].conj();
            }
            // Keep the diagonal exactly real against rounding drift.
            a[row + i].im = 0.0;
        }

        e[k] = beta;
        a[(k + 1) * n + k] = Complex64::new(beta, 0.0);
        for i in k + 2..n {
            a[i * n + k] = Complex64::new(0.0, 0.0);
        }
    }
    if n >= 2 {
        // A final diagonal phase similarity makes the last subdiagonal real;
        // only its modulus matters for the eigenvalues.
        let last = a[(n - 1) * n + (n - 2)];
        e[n - 2] = if last.im == 0.0 { last.re } else { last.norm() };
    }
    let d = (0..n).map(|i| a[i * n + i].re).collect();
    (d, e)
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix
/// (diagonal `d`, subdiagonal `e[i]` coupling i and i+1, `e[n-1]` unused).
/// Returns Err(total sweeps) if any eigenvalue fails to converge.
fn ql_implicit(d: &mut [f64], e: &mut [f64]) -> std::result::Result<(), usize> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_SWEEPS {
                return Err(iter);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                f = (d[i] - g) * s + 2.0 * c * b;
                p = s * f;
                d[i + 1] = g + p;
                g = c * f - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_haar_vector, sample_hermitian_bm_increment};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn from_dense(n: usize, entries: &[Complex64]) -> HermitianMatrix {
        HermitianMatrix::from_dense_upper(n, entries)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_matrix() {
        let m = from_dense(
            3,
            &[
                c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0),
                c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0),
                c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0),
            ],
        );
        assert_eq!(eigvalsh(&m).unwrap(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn rank_one_projection() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let v = sample_haar_vector(6, &mut rng);
        let mut m = HermitianMatrix::zeros(6);
        m.add_rank_one(1.0, &v);
        let eigs = eigvalsh(&m).unwrap();
        assert_abs_diff_eq!(eigs[0], 1.0, epsilon = 1e-12);
        for &x in &eigs[1..] {
            assert!(x.abs() < 1e-12);
        }
    }

    #[test]
    fn known_2x2_complex() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
        let m = from_dense(2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(1.0, 0.0)]);
        let eigs = eigvalsh(&m).unwrap();
        assert_abs_diff_eq!(eigs[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eigs[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn random_matrices_match_bisection_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for trial in 0..6 {
            let n = 8;
            let m = sample_hermitian_bm_increment(n, 1.0 + 0.5 * trial as f64, &mut rng).unwrap();
            let got = eigvalsh(&m).unwrap();
            let mut oracle = oracle::eig_by_bisection(&m, 1e-11);
            oracle.reverse();
            for (a, b) in got.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "eig {a} vs oracle {b}");
            }
        }
    }

    #[test]
    fn trace_identity_and_shift() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let mut m = sample_hermitian_bm_increment(24, 2.0, &mut rng).unwrap();
        let eigs = eigvalsh(&m).unwrap();
        let trace = m.trace();
        let sum: f64 = eigs.iter().sum();
        assert!((sum - trace).abs() <= 1e-9 * m.frobenius_norm().max(1.0));

        // Adding c·I shifts every eigenvalue by exactly c.
        let cshift = 0.73;
        m.add_scaled_identity(cshift);
        let shifted = eigvalsh(&m).unwrap();
        for (a, b) in shifted.iter().zip(&eigs) {
            assert!((a - b - cshift).abs() <= 1e-10);
        }
    }

    /// Residual check via inverse iteration: for sampled eigenvalues λ the
    /// unit vector v from a few shifted solves must satisfy
    /// ‖Av − λv‖ ≤ 1e-10 ‖A‖.
    #[test]
    fn eigenvalue_residuals() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let n = 16;
        let m = sample_hermitian_bm_increment(n, 1.0, &mut rng).unwrap();
        let eigs = eigvalsh(&m).unwrap();
        let norm = m.frobenius_norm();
        for &idx in &[0usize, n / 2, n - 1] {
            let lambda = eigs[idx];
            let v = inverse_iteration(&m, lambda);
            let mut av = vec![c(0.0, 0.0); n];
            m.mul_vec(&v, &mut av);
            let resid: f64 = av
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - lambda * b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid <= 1e-10 * norm, "residual {resid:e} at λ = {lambda}");
        }
    }

    fn inverse_iteration(m: &HermitianMatrix, lambda: f64) -> Vec<Complex64> {
        let n = m.dim();
        // Shift slightly off the eigenvalue so the solve stays regular.
        let shift = lambda + 1e-11 * m.frobenius_norm().max(1.0);
        let mut a = m.to_dense();
        for i in 0..n {
            a[i * n + i] -= c(shift, 0.0);
        }
        let lu = lu_decompose(&mut a, n);
        let mut v = vec![c(1.0, 0.0); n];
        for _ in 0..3 {
            lu_solve(&a, &lu, n, &mut v);
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut v {
                *z /= norm;
            }
        }
        v
    }

    fn lu_decompose(a: &mut [Complex64], n: usize) -> Vec<usize> {
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut best, mut best_v) = (k, a[piv[k] * n + k].norm());
            for i in k + 1..n {
                let v = a[piv[i] * n + k].norm();
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            piv.swap(k, best);
            let pk = piv[k];
            let pivot = if a[pk * n + k].norm() == 0.0 {
                c(1e-300, 0.0)
            } else {
                a[pk * n + k]
            };
            let rows: Vec<usize> = piv[k + 1..n].to_vec();
            for pi in rows {
                let f = a[pi * n + k] / pivot;
                a[pi * n + k] = f;
                for j in k + 1..n {
                    let t = a[pk * n + j];
                    a[pi * n + j] -= f * t;
                }
            }
        }
        piv
    }

    fn lu_solve(a: &[Complex64], piv: &[usize], n: usize, b: &mut Vec<Complex64>) {
        let mut y = vec![c(0.0, 0.0); n];
        for i in 0..n {
            let mut acc = b[piv[i]];
            for j in 0..i {
                acc -= a[piv[i] * n + j] * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for j in i + 1..n {
                acc -= a[piv[i] * n + j] * y[j];
            }
            y[i] = acc / a[piv[i] * n + i];
        }
        *b = y;
    }

    #[test]
    fn conjugation_invariance() {
        // Unitary from QR of a complex Gaussian matrix.
        let mut rng = ChaCha12Rng::seed_from_u64(51);
        let n = 12;
        let m = sample_hermitian_bm_increment(n, 1.0, &mut rng).unwrap();
        let g = sample_hermitian_bm_increment(n, 1.0, &mut rng).unwrap(); // any square complex
        let q = gram_schmidt(&g.to_dense(), n);

        // U m U*
        let md = m.to_dense();
        let mut tmp = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = c(0.0, 0.0);
                for k in 0..n {
                    acc += q[i * n + k] * md[k * n + j];
                }
                tmp[i * n + j] = acc;
            }
        }
        let mut conj = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = c(0.0, 0.0);
                for k in 0..n {
                    acc += tmp[i * n + k] * q[j * n + k].conj();
                }
                conj[i * n + j] = acc;
            }
        }
        let mc = HermitianMatrix::from_dense_upper(n, &conj);
        let a = eigvalsh(&m).unwrap();
        let b = eigvalsh(&mc).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-8);
        }
    }

    fn gram_schmidt(a: &[Complex64], n: usize) -> Vec<Complex64> {
        // Orthonormalise the columns of a; returns row-major Q.
        let mut q = a.to_vec();
        for j in 0..n {
            for k in 0..j {
                let mut dot = c(0.0, 0.0);
                for i in 0..n {
                    dot += q[i * n + k].conj() * q[i * n + j];
                }
                for i in 0..n {
                    let t = q[i * n + k];
                    q[i * n + j] -= dot * t;
                }
            }
            let norm: f64 = (0..n).map(|i| q[i * n + j].norm_sqr()).sum::<f64>().sqrt();
            for i in 0..n {
                q[i * n + j] /= norm;
            }
        }
        q
    }
}
