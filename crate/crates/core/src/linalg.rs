//! Symmetric banded eigensolver: Givens reduction to tridiagonal form,
//! Sturm-sequence bisection for eigenvalues and inverse iteration on the
//! banded matrix for eigenvectors. Also a banded LU used by the time
//! steppers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense symmetric matrix stored row-major, with a known half bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bandwidth,
            data: vec![0.0; n * n],
        }
    }

    /// Builds from a dense symmetric matrix, detecting the bandwidth.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        let mut bandwidth = 0;
        for i in 0..n {
            for j in 0..i {
                if data[i * n + j] != 0.0 || data[j * n + i] != 0.0 {
                    bandwidth = bandwidth.max(i - j);
                }
            }
        }
        Self { n, bandwidth, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let d = i.abs_diff(j);
        assert!(d <= self.bandwidth, "entry ({i}, {j}) outside the band");
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let (n, b) = (self.n, self.bandwidth);
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(n - 1);
                (lo..=hi).map(|j| self.data[i * n + j] * x[j]).sum()
            })
            .collect()
    }

    /// Infinity norm.
    pub fn norm_inf(&self) -> f64 {
        let (n, b) = (self.n, self.bandwidth);
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(n - 1);
                (lo..=hi).map(|j| self.data[i * n + j].abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Symmetric tridiagonal matrix similar to `self`, by Givens rotations
    /// with bulge chasing. Returns `(diagonal, subdiagonal)`.
    pub fn tridiagonalize(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let b = self.bandwidth;
        let mut a = self.data.clone();
        if b > 1 {
            for j in 0..n.saturating_sub(2) {
                for i in ((j + 2)..=(j + b).min(n - 1)).rev() {
                    let mut row = i;
                    let mut col = j;
                    loop {
                        rotate_away(&mut a, n, b, row, col);
                        // The rotation in plane (row-1, row) fills (row+b, row-1).
                        let next = row + b;
                        if next >= n || a[next * n + row - 1] == 0.0 {
                            break;
                        }
                        col = row - 1;
                        row = next;
                    }
                }
            }
        }
        let d = (0..n).map(|i| a[i * n + i]).collect();
        let e = (0..n.saturating_sub(1)).map(|i| a[(i + 1) * n + i]).collect();
        (d, e)
    }
}

/// Zeroes `a[r][c]` by a rotation in the plane `(r-1, r)` applied as a
/// similarity transform. Only the window that can hold nonzeros is touched.
fn rotate_away(a: &mut [f64], n: usize, b: usize, r: usize, c: usize) {
    let p = r - 1;
    let x = a[p * n + c];
    let y = a[r * n + c];
    if y == 0.0 {
        return;
    }
    let rho = x.hypot(y);
    let (cs, sn) = (x / rho, y / rho);
    let lo = p.saturating_sub(b + 1);
    let hi = (r + b + 1).min(n - 1);
    for k in lo..=hi {
        let u = a[p * n + k];
        let v = a[r * n + k];
        a[p * n + k] = cs * u + sn * v;
        a[r * n + k] = -sn * u + cs * v;
    }
    for k in lo..=hi {
        let u = a[k * n + p];
        let v = a[k * n + r];
        a[k * n + p] = cs * u + sn * v;
        a[k * n + r] = -sn * u + cs * v;
    }
    a[r * n + c] = 0.0;
    a[c * n + r] = 0.0;
}

/// Number of eigenvalues of the tridiagonal `(d, e)` strictly below `sigma`.
pub fn sturm_count(d: &[f64], e: &[f64], sigma: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = d[0] - sigma;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        if q.abs() < tiny {
            q = -tiny;
        }
        q = d[i] - sigma - e[i - 1] * e[i - 1] / q;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k` smallest eigenvalues of a symmetric tridiagonal matrix by
/// bisection.
pub fn bisect_smallest(d: &[f64], e: &[f64], k: usize) -> Vec<f64> {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    lo -= 2.0 * f64::EPSILON * scale;
    hi += 2.0 * f64::EPSILON * scale;
    let tol = 2.0 * f64::EPSILON * scale;
    (0..k.min(n))
        .map(|m| {
            // Eigenvalue number m (0-based) is the smallest σ with count > m.
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                if b - a <= tol {
                    break;
                }
                let mid = 0.5 * (a + b);
                if sturm_count(d, e, mid) > m {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// LU factorization with partial pivoting of a general band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    // Row i holds columns i-kl ..= i+kl+ku at offset j + kl - i.
    rows: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

/// Band matrix under assembly; entries outside the band are rejected.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    rows: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            rows: vec![0.0; n * (2 * kl + ku + 1)],
        }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside the band"
        );
        let w = self.width();
        self.rows[i * w + j + self.kl - i] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            return 0.0;
        }
        self.rows[i * self.width() + j + self.kl - i]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Factorizes; exactly zero pivots are replaced by `floor`.
    pub fn factor(&self, floor: f64) -> BandLu {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = self.width();
        let mut rows = self.rows.clone();
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = rows[idx(k, k)].abs();
            for r in k + 1..=last {
                let v = rows[idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            pivots[k] = p;
            let right = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=right {
                    rows.swap(idx(k, j), idx(p, j));
                }
            }
            if rows[idx(k, k)].abs() <= floor.max(f64::MIN_POSITIVE) {
                rows[idx(k, k)] = if rows[idx(k, k)] < 0.0 { -floor } else { floor };
                if floor == 0.0 {
                    rows[idx(k, k)] = f64::MIN_POSITIVE;
                }
            }
            let piv = rows[idx(k, k)];
            for r in k + 1..=last {
                let f = rows[idx(r, k)] / piv;
                lower[k * kl.max(1) + (r - k - 1)] = f;
                rows[idx(r, k)] = 0.0;
                if f != 0.0 {
                    for j in k + 1..=right {
                        rows[idx(r, j)] -= f * rows[idx(k, j)];
                    }
                }
            }
        }
        BandLu {
            n,
            kl,
            ku,
            rows,
            lower,
            pivots,
        }
    }
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = 2 * kl + ku + 1;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let last = (k + kl).min(n - 1);
            for r in k + 1..=last {
                x[r] -= self.lower[k * kl.max(1) + (r - k - 1)] * x[k];
            }
        }
        for i in (0..n).rev() {
            let right = (i + kl + ku).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=right {
                s -= self.rows[i * w + j + kl - i] * x[j];
            }
            x[i] = s / self.rows[i * w + kl];
        }
        x
    }
}

/// Eigenpairs of a symmetric band matrix, ascending.
#[derive(Debug, Clone)]
pub struct BandEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Inverse-iteration steps used per eigenvector.
    pub iterations: Vec<usize>,
    pub norm: f64,
}

/// Eigenvalues closer than this fraction of `‖B‖` are treated as a cluster.
const CLUSTER_GAP: f64 = 1e-6;
const MAX_INVERSE_ITERATIONS: usize = 8;
const RESIDUAL_TOL: f64 = 1e-11;
/// Below this relative residual a vector is accepted after the last sweep.
const RESIDUAL_ACCEPT: f64 = 1e-8;

/// The `k` smallest eigenpairs of `b`.
pub fn smallest_eigenpairs(b: &SymBand, k: usize) -> Result<BandEigen> {
    let n = b.n();
    if k > n {
        return Err(Error::Argument(format!(
            "asked for {k} eigenpairs of a {n}x{n} matrix"
        )));
    }
    let norm = b.norm_inf().max(f64::MIN_POSITIVE);
    if n == 1 {
        return Ok(BandEigen {
            values: vec![b.get(0, 0)],
            vectors: vec![vec![1.0]],
            iterations: vec![0],
            norm,
        });
    }
    let (d, e) = b.tridiagonalize();
    let values = bisect_smallest(&d, &e, k);
    let bw = b.bandwidth();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut iterations = Vec::with_capacity(k);
    let mut cluster_start = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for m in 0..values.len() {
        if m > 0 && values[m] - values[m - 1] > CLUSTER_GAP * norm {
            cluster_start = m;
        }
        // Perturb repeated shifts inside a cluster so the factorizations differ.
        let mut sigma = values[m];
        if m > cluster_start && (values[m] - values[m - 1]).abs() <= 10.0 * f64::EPSILON * norm {
            sigma += 10.0 * (m - cluster_start) as f64 * f64::EPSILON * norm;
        }
        let mut shifted = BandMatrix::zeros(n, bw, bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw).min(n - 1);
            for j in lo..=hi {
                let v = b.get(i, j) - if i == j { sigma } else { 0.0 };
                shifted.add(i, j, v);
            }
        }
        let lu = shifted.factor(f64::EPSILON * norm);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalize(&mut x);
        let mut converged = false;
        let mut steps = 0;
        let mut residual = f64::INFINITY;
        while steps < MAX_INVERSE_ITERATIONS {
            steps += 1;
            x = lu.solve(&x);
            for prev in &vectors[cluster_start..m] {
                orthogonalize(&mut x, prev);
                orthogonalize(&mut x, prev);
            }
            if !normalize(&mut x) {
                return Err(Error::Numerical(format!(
                    "inverse iteration collapsed for eigenvalue {m} (λ = {:e})",
                    values[m]
                )));
            }
            let bx = b.matvec(&x);
            residual = bx
                .iter()
                .zip(&x)
                .map(|(u, v)| (u - values[m] * v).powi(2))
                .sum::<f64>()
                .sqrt()
                / norm;
            if steps >= 2 && residual <= RESIDUAL_TOL {
                converged = true;
                break;
            }
        }
        if !converged && residual > RESIDUAL_ACCEPT {
            return Err(Error::Numerical(format!(
                "inverse iteration did not converge for eigenvalue {m} (λ = {:e}): \
                 relative residual {residual:e} after {steps} iterations",
                values[m]
            )));
        }
        vectors.push(x);
        iterations.push(steps);
    }
    Ok(BandEigen {
        values,
        vectors,
        iterations,
        norm,
    })
}

fn normalize(x: &mut [f64]) -> bool {
    let s = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(s.is_finite() && s > 0.0) {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= s);
    true
}

fn orthogonalize(x: &mut [f64], q: &[f64]) {
    let c: f64 = x.iter().zip(q).map(|(a, b)| a * b).sum();
    x.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_band(n: usize, b: usize, seed: u64) -> SymBand {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = SymBand::zeros(n, b);
        for i in 0..n {
            for j in i.saturating_sub(b)..=i {
                m.set(i, j, rng.random_range(-1.0..1.0));
            }
        }
        m
    }

    #[test]
    fn tridiagonalization_preserves_trace_and_frobenius() {
        for b in [1, 2, 3] {
            let m = random_band(40, b, b as u64);
            let (d, e) = m.tridiagonalize();
            let tr: f64 = (0..40).map(|i| m.get(i, i)).sum();
            assert!((tr - d.iter().sum::<f64>()).abs() < 1e-12);
            let fro: f64 = m.data.iter().map(|v| v * v).sum();
            let fro_t: f64 =
                d.iter().map(|v| v * v).sum::<f64>() + 2.0 * e.iter().map(|v| v * v).sum::<f64>();
            assert!((fro - fro_t).abs() < 1e-10 * fro);
        }
    }

    #[test]
    fn sturm_count_on_diagonal() {
        let d = [3.0, -1.0, 2.0];
        let e = [0.0, 0.0];
        assert_eq!(sturm_count(&d, &e, 0.0), 1);
        assert_eq!(sturm_count(&d, &e, 2.5), 2);
    }

    #[test]
    fn laplacian_spectrum() {
        // Dirichlet second difference: eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 50;
        let mut m = SymBand::zeros(n, 1);
        for i in 0..n {
            m.set(i, i, 2.0);
            if i > 0 {
                m.set(i, i - 1, -1.0);
            }
        }
        let eig = smallest_eigenpairs(&m, 5).unwrap();
        for (k, lam) in eig.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((lam - exact).abs() < 1e-13);
        }
        for (i, u) in eig.vectors.iter().enumerate() {
            for (j, v) in eig.vectors.iter().enumerate() {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn repeated_eigenvalues_get_orthogonal_vectors() {
        // Block diagonal with two identical blocks: every eigenvalue is double.
        let n = 20;
        let mut m = SymBand::zeros(2 * n, 1);
        for blk in 0..2 {
            for i in 0..n {
                let g = blk * n + i;
                m.set(g, g, 2.0);
                if i > 0 {
                    m.set(g, g - 1, -1.0);
                }
            }
        }
        let eig = smallest_eigenpairs(&m, 4).unwrap();
        assert!((eig.values[0] - eig.values[1]).abs() < 1e-13);
        let dot: f64 = eig.vectors[0]
            .iter()
            .zip(&eig.vectors[1])
            .map(|(a, b)| a * b)
            .sum();
        assert!(dot.abs() < 1e-10);
    }

    #[test]
    fn band_lu_solves() {
        let n = 30;
        let mut a = BandMatrix::zeros(n, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..n {
            for j in i.saturating_sub(2)..=(i + 2).min(n - 1) {
                a.add(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a.matvec(&x);
        let y = a.factor(0.0).solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-10);
        }
    }
}
