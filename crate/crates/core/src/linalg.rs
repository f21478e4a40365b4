//! Small dense and matrix-free linear algebra: LU, conjugate gradients, Lanczos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::scalar::Real;

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Row-major dense matrix factored in place with partial pivoting.
pub struct Lu<T> {
    n: usize,
    a: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn factor(n: usize, mut a: Vec<T>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                let v = a[i * n + k].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(LabError::Degenerate(format!("singular matrix (zero pivot in column {k})")));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let d = a[k * n + k];
            let (head, tail) = a.split_at_mut((k + 1) * n);
            let row_k = &head[k * n..];
            for row in tail.chunks_mut(n) {
                let f = row[k] / d;
                if f == T::zero() {
                    continue;
                }
                row[k] = f;
                for j in k + 1..n {
                    row[j] -= f * row_k[j];
                }
            }
        }
        Ok(Lu { n, a, piv })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.a[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.a[i * n + j] * x[j];
            }
            x[i] = s / self.a[i * n + i];
        }
        x
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub relative_residual: T,
    /// Set when a direction with `⟨p, A p⟩ ≤ 0` was met.
    pub negative_curvature: bool,
}

/// Preconditioned CG for a symmetric operator; `precond` applies an approximate inverse.
pub fn conjugate_gradient<T: Real>(
    apply: impl Fn(&[T]) -> Vec<T>,
    precond: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
) -> CgOutcome<T> {
    let len = b.len();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![T::zero(); len]);
    let ax = apply(&x);
    let mut r: Vec<T> = (0..len).map(|i| b[i] - ax[i]).collect();
    let bn = norm(b).max(T::min_positive_value());
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / bn;
    let mut it = 0;
    let mut negative = false;
    while res > tol && it < max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= T::zero() {
            negative = true;
            break;
        }
        let alpha = rz / pap;
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..len {
            p[i] = z[i] + beta * p[i];
        }
        res = norm(&r) / bn;
        it += 1;
    }
    CgOutcome {
        x,
        iterations: it,
        relative_residual: res,
        negative_curvature: negative,
    }
}

/// Eigenvalues and eigenvectors of a symmetric tridiagonal matrix (implicit QL).
///
/// Returns eigenvalues ascending and, for each, its coordinates in the input basis.
pub fn tridiagonal_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[..n.saturating_sub(1)]);
    let mut z = vec![vec![0.0; n]; n];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(LabError::NoConvergence {
                    iterations: iter,
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| d[*a].total_cmp(&d[*b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| z[i][k]).collect())
        .collect();
    Ok((values, vectors))
}

/// Smallest eigenpair of a symmetric operator found by restarted Lanczos with full
/// reorthogonalisation.
#[derive(Clone, Debug)]
pub struct Eigenpair<T> {
    pub value: T,
    pub vector: Vec<T>,
    pub residual: T,
    pub iterations: usize,
}

pub fn lanczos_smallest<T: Real>(
    apply: impl Fn(&[T]) -> Vec<T>,
    len: usize,
    krylov: usize,
    restarts: usize,
    tol: f64,
    seed: u64,
) -> Result<Eigenpair<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let k = krylov.min(len).max(1);
    let mut total = 0;
    let mut best: Option<Eigenpair<T>> = None;
    for _ in 0..=restarts {
        let sn = start.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / sn).collect()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..k {
            let q: Vec<T> = basis[j].iter().map(|v| T::lit(*v)).collect();
            let mut w: Vec<f64> = apply(&q).iter().map(|v| v.f64()).collect();
            total += 1;
            let a: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= c * bi;
                    }
                }
            }
            let bn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if j + 1 == k || bn < 1e-14 {
                break;
            }
            beta.push(bn);
            basis.push(w.iter().map(|v| v / bn).collect());
        }
        let (_, vecs) = tridiagonal_eigen(&alpha, &beta)?;
        let y = &vecs[0];
        let mut v = vec![0.0; len];
        for (c, b) in y.iter().zip(&basis) {
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += c * bi;
            }
        }
        let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= vn);
        let vt: Vec<T> = v.iter().map(|a| T::lit(*a)).collect();
        let av: Vec<f64> = apply(&vt).iter().map(|a| a.f64()).collect();
        total += 1;
        let lambda: f64 = av.iter().zip(&v).map(|(a, b)| a * b).sum();
        let res = av
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        best = Some(Eigenpair {
            value: T::lit(lambda),
            vector: vt,
            residual: T::lit(res),
            iterations: total,
        });
        if res <= tol * lambda.abs().max(1.0) {
            break;
        }
        start = v;
    }
    best.ok_or_else(|| LabError::Degenerate("empty operator".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn spd(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum::<f64>();
            }
            a[i * n + i] += 0.5;
        }
        a
    }

    fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
    }

    #[test]
    fn lu_solves_against_nalgebra() {
        let n = 30;
        let a = spd(n, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut g = a.clone();
        for v in g.iter_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = Lu::factor(n, g.clone()).unwrap().solve(&b);
        let m = DMatrix::from_row_slice(n, n, &g);
        let y = m.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-9);
        }
        assert!(Lu::factor(2, vec![1.0, 2.0, 2.0, 4.0]).is_err());
    }

    #[test]
    fn cg_converges() {
        let n = 40;
        let a = spd(n, 3);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.1).collect();
        let out = conjugate_gradient(|x| matvec(&a, x), |r| r.to_vec(), &b, None, 1e-12, 500);
        let ax = matvec(&a, &out.x);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn tridiagonal_matches_dense_eigen() {
        let d = [2.0, -1.0, 3.5, 0.2, 1.1];
        let e = [0.7, -0.4, 1.3, 0.05];
        let (vals, vecs) = tridiagonal_eigen(&d, &e).unwrap();
        let mut m = DMatrix::zeros(5, 5);
        for i in 0..5 {
            m[(i, i)] = d[i];
            if i < 4 {
                m[(i, i + 1)] = e[i];
                m[(i + 1, i)] = e[i];
            }
        }
        let mut reference: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
        reference.sort_by(f64::total_cmp);
        for (a, b) in vals.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
        let v = nalgebra::DVector::from_vec(vecs[0].clone());
        let r = &m * &v - v.clone() * vals[0];
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn lanczos_finds_smallest() {
        let n = 120;
        let a = spd(n, 5);
        let m = DMatrix::from_row_slice(n, n, &a);
        let lo = m.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let e = lanczos_smallest(|x: &[f64]| matvec(&a, x), n, 60, 20, 1e-10, 9).unwrap();
        assert!((e.value - lo).abs() < 1e-8 * lo.abs().max(1.0), "{} {lo}", e.value);
    }
}
