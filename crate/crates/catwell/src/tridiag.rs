//! Symmetric tridiagonal eigenproblems sized for this crate's needs: the
//! lowest k ≤ 12 eigenpairs of operators with up to ~10⁶ rows, including
//! numerically degenerate tunneling doublets.
//!
//! Eigenvalues come from bisection on Sturm sign counts (robust down to
//! exactly coincident values), eigenvectors from shifted inverse iteration
//! with a partial-pivot LU and modified Gram-Schmidt against every
//! previously accepted vector on every sweep — the cross-talk this removes
//! costs only O(ε‖T‖) in residual, so orthogonality holds even when a
//! doublet splitting is far below machine resolution.

use crate::error::{CatwellError, Result};
use num_complex::Complex64;

/// Scalar abstraction so the pivoted tridiagonal LU serves both the real
/// eigensolver and the complex Cayley propagator.
pub trait Scalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
{
    fn zero() -> Self;
    fn from_f64(x: f64) -> Self;
    fn mag(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn mag(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn mag(self) -> f64 {
        self.norm()
    }
}

/// LU factors of a general tridiagonal matrix with partial pivoting
/// (row interchanges introduce one extra superdiagonal).
pub struct GtLu<T: Scalar> {
    /// Multipliers (subdiagonal of L).
    dl: Vec<T>,
    /// Diagonal of U.
    d: Vec<T>,
    /// First superdiagonal of U.
    du: Vec<T>,
    /// Second superdiagonal of U (fill-in from interchanges).
    du2: Vec<T>,
    /// Whether rows i, i+1 were swapped at step i.
    swapped: Vec<bool>,
}

impl<T: Scalar> GtLu<T> {
    /// Factor the tridiagonal (sub, diag, super). `pivot_floor > 0` replaces
    /// exactly-vanishing pivots, which inverse iteration at a converged shift
    /// is expected to produce.
    pub fn factor(sub: &[T], diag: &[T], sup: &[T], pivot_floor: f64) -> Self {
        let n = diag.len();
        assert!(n >= 1 && sub.len() == n.saturating_sub(1) && sup.len() == n.saturating_sub(1));
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if d[i].mag() >= dl[i].mag() {
                // No interchange.
                if d[i].mag() != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] = d[i + 1] - fact * du[i];
                } else {
                    dl[i] = T::zero();
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = T::zero() - fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if pivot_floor > 0.0 {
            for pivot in d.iter_mut() {
                if pivot.mag() < pivot_floor {
                    *pivot = T::from_f64(pivot_floor);
                }
            }
        }
        GtLu { dl, d, du, du2, swapped }
    }

    /// Solve in place.
    pub fn solve(&self, b: &mut [T]) {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] = b[i + 1] - self.dl[i] * b[i];
            }
        }
        b[n - 1] = b[n - 1] / self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// A real symmetric tridiagonal matrix.
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    /// Length diag.len() − 1.
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(CatwellError::Invalid("empty tridiagonal".into()));
        }
        if off.len() + 1 != diag.len() {
            return Err(CatwellError::Invalid(format!(
                "off-diagonal length {} does not match diagonal length {}",
                off.len(),
                diag.len()
            )));
        }
        Ok(SymTridiag { diag, off })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    /// Interval certain to contain the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut radius = 0.0;
            if i > 0 {
                radius += self.off[i - 1].abs();
            }
            if i + 1 < n {
                radius += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - radius);
            hi = hi.max(self.diag[i] + radius);
        }
        (lo, hi)
    }

    fn pivmin(&self) -> f64 {
        let max_e2 = self.off.iter().fold(0.0f64, |acc, e| acc.max(e * e));
        f64::MIN_POSITIVE * max_e2.max(1.0)
    }

    /// Number of eigenvalues strictly below x (Sturm sign count on the
    /// LDLᵀ pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0usize;
        let mut q = self.diag[0] - x;
        if q.abs() <= pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.n() {
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / q;
            if q.abs() <= pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The k smallest eigenvalues by bisection, each refined to a few ulps.
    pub fn lowest_eigenvalues(&self, k: usize) -> Result<Vec<f64>> {
        if k == 0 || k > self.n() {
            return Err(CatwellError::Invalid(format!(
                "requested {k} eigenvalues of an order-{} matrix",
                self.n()
            )));
        }
        let (glo, ghi) = self.gershgorin();
        let span = (ghi - glo).max(f64::MIN_POSITIVE);
        let mut values = Vec::with_capacity(k);
        for j in 0..k {
            let (mut a, mut b) = (glo, ghi + span * 1e-12);
            // Invariant: count(a) ≤ j < count(b).
            for _ in 0..120 {
                let mid = 0.5 * (a + b);
                if (b - a) <= 2.0 * f64::EPSILON * mid.abs().max(span * 1e-16) {
                    break;
                }
                if self.count_below(mid) > j {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            values.push(0.5 * (a + b));
        }
        Ok(values)
    }

    /// The k smallest eigenpairs; vectors are ℓ²-normalized, mutually
    /// orthogonal to ~n·ε, with residual ‖Ty − Ey‖ ≤
    /// max(0.5e-8·max(1, |E|), 64·ε·‖T‖). Residual *evaluation* rounds at
    /// ≈ 10·ε·‖T‖, so the iteration runs to that plateau and keeps its best
    /// vector; callers needing an absolute residual bound must keep ‖T‖
    /// small enough for their budget.
    pub fn lowest_eigenpairs(&self, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let values = self.lowest_eigenvalues(k)?;
        let n = self.n();
        let (glo, ghi) = self.gershgorin();
        let scale = glo.abs().max(ghi.abs()).max(1.0);
        let pivot_floor = f64::EPSILON * scale;
        let stall_cap = 64.0 * f64::EPSILON * scale;

        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut scratch = vec![0.0; n];

        for (j, &sigma) in values.iter().enumerate() {
            let shifted: Vec<f64> = self.diag.iter().map(|d| d - sigma).collect();
            let lu = GtLu::factor(&self.off, &shifted, &self.off, pivot_floor);
            let hard_accept = 0.5e-8 * sigma.abs().max(1.0);
            let mut y = noise_unit_vector(n, 0x5eed_0000 + j as u64);
            let mut best_resid = f64::INFINITY;
            let mut best: Option<Vec<f64>> = None;
            let mut sweeps_since_best = 0usize;
            for _ in 0..80 {
                lu.solve(&mut y);
                // Project out every accepted vector each sweep so clustered
                // shifts cannot re-grow earlier directions.
                for prev in &vectors {
                    let overlap: f64 = prev.iter().zip(&y).map(|(p, v)| p * v).sum();
                    y.iter_mut().zip(prev).for_each(|(v, p)| *v -= overlap * p);
                }
                let norm = norm2(&y);
                if !(norm > 0.0) || !norm.is_finite() {
                    y = noise_unit_vector(n, 0xdead_0000 + j as u64);
                    continue;
                }
                y.iter_mut().for_each(|v| *v /= norm);
                self.matvec(&y, &mut scratch);
                let resid: f64 = scratch
                    .iter()
                    .zip(&y)
                    .map(|(ty, v)| (ty - sigma * v) * (ty - sigma * v))
                    .sum::<f64>()
                    .sqrt();
                if resid < best_resid {
                    best_resid = resid;
                    best = Some(y.clone());
                    sweeps_since_best = 0;
                } else {
                    sweeps_since_best += 1;
                }
                if resid <= hard_accept {
                    break;
                }
                // Plateaued at the evaluation floor: keep the best and move on.
                if best_resid <= stall_cap && sweeps_since_best >= 2 {
                    break;
                }
            }
            if best_resid > hard_accept.max(stall_cap) {
                return Err(CatwellError::NonConverged(format!(
                    "inverse iteration stalled for eigenvalue {j} at residual {best_resid:.3e} (sigma = {sigma:.6e})"
                )));
            }
            vectors.push(best.expect("a finite residual implies a kept vector"));
        }

        // Final polish: exact Gram-Schmidt sweep, then Rayleigh quotients so
        // each reported value is optimal for its (possibly re-projected)
        // vector.
        let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(k);
        let mut polished: Vec<Vec<f64>> = Vec::with_capacity(k);
        for mut y in vectors {
            for prev in &polished {
                let overlap: f64 = prev.iter().zip(&y).map(|(p, v)| p * v).sum();
                y.iter_mut().zip(prev).for_each(|(v, p)| *v -= overlap * p);
            }
            let norm = norm2(&y);
            y.iter_mut().for_each(|v| *v /= norm);
            self.matvec(&y, &mut scratch);
            let rayleigh: f64 = scratch.iter().zip(&y).map(|(ty, v)| ty * v).sum();
            polished.push(y.clone());
            pairs.push((rayleigh, y));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut energies = Vec::with_capacity(k);
        let mut states = Vec::with_capacity(k);
        for (e, v) in pairs {
            energies.push(e);
            states.push(v);
        }
        Ok((energies, states))
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Deterministic pseudo-noise unit vector (splitmix64), so repeated runs
/// produce bit-identical eigenvectors.
pub fn noise_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    let mut v: Vec<f64> = (0..n)
        .map(|_| (next() >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
        .collect();
    let norm = norm2(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    v
}
