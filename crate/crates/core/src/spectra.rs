//! Dense symmetric eigenvalues and spectral summaries.
//!
//! The solver reduces the matrix to tridiagonal form with Householder
//! reflections and then runs implicit-shift QL iterations. Only
//! eigenvalues are computed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensembles::MatrixSample;
use crate::linalg::Matrix;

/// QL iterations allowed per eigenvalue.
pub const QL_MAX_SWEEPS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("scale must be positive and finite, got {0}")]
    Scale(f64),
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("QL iteration did not converge for eigenvalue {index} after {sweeps} sweeps")]
    NoConvergence { index: usize, sweeps: usize },
    #[error("empty spectrum")]
    Empty,
    #[error("offset {offset} out of range for dimension {n}")]
    Offset { offset: usize, n: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("histogram needs at least one bin and lo < hi")]
    Histogram,
}

/// Reduces a symmetric matrix to tridiagonal form `(diag, off)` where
/// `off[k]` couples `diag[k]` and `diag[k + 1]`; `off[n − 1] = 0`.
///
/// Each Householder step touches the trailing block once: the rank-two
/// update of the previous step is applied to a row and the row is
/// immediately used in the next matrix-vector product.
pub fn tridiagonalize(matrix: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = matrix.dim();
    let mut a = matrix.as_slice().to_vec();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    if n == 0 {
        return (diag, off);
    }
    // pending rank-two update A ← A − v wᵀ − w vᵀ on the block starting at `pending_start`
    let mut pend_v: Vec<f64> = Vec::new();
    let mut pend_w: Vec<f64> = Vec::new();
    let mut pending_start = n;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n {
        let row_k = &mut a[k * n..(k + 1) * n];
        if pending_start <= k {
            let off_k = k - pending_start;
            let (vk, wk) = (pend_v[off_k], pend_w[off_k]);
            for (j, x) in row_k.iter_mut().enumerate().skip(k) {
                let oj = j - pending_start;
                *x -= vk * pend_w[oj] + wk * pend_v[oj];
            }
        }
        diag[k] = row_k[k];
        if k + 1 >= n {
            break;
        }
        let m = n - k - 1;
        v[..m].copy_from_slice(&row_k[k + 1..]);
        let tail_max = v[1..m].iter().fold(0.0_f64, |s, t| s.max(t.abs()));
        if tail_max == 0.0 {
            // column already reduced; flush the pending update into the trailing block
            off[k] = v[0];
            if pending_start <= k {
                for i in k + 1..n {
                    let oi = i - pending_start;
                    let (vi, wi) = (pend_v[oi], pend_w[oi]);
                    let row = &mut a[i * n..(i + 1) * n];
                    for (j, y) in row.iter_mut().enumerate().skip(k + 1) {
                        let oj = j - pending_start;
                        *y -= vi * pend_w[oj] + wi * pend_v[oj];
                    }
                }
            }
            pending_start = n;
            continue;
        }
        // the reflector only depends on the direction of the column, so it is
        // built from a rescaled copy to keep the squares clear of underflow
        let scale = tail_max.max(v[0].abs());
        let vs = &mut v[..m];
        for t in vs.iter_mut() {
            *t /= scale;
        }
        let tail_sq: f64 = vs[1..].iter().map(|t| t * t).sum();
        let x0 = vs[0];
        let norm = (x0 * x0 + tail_sq).sqrt();
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        vs[0] -= alpha;
        let vtv = vs[0] * vs[0] + tail_sq;
        let beta = 2.0 / vtv;
        off[k] = alpha * scale;

        // p = β A₂₂ v, bringing rows of the trailing block up to date on the way
        let ps = &mut p[..m];
        for (oi, i) in (k + 1..n).enumerate() {
            let row = &mut a[i * n + k + 1..(i + 1) * n];
            if pending_start <= k {
                let base = k + 1 - pending_start;
                let pi = i - pending_start;
                let (vi, wi) = (pend_v[pi], pend_w[pi]);
                let pw = &pend_w[base..];
                let pv = &pend_v[base..];
                ps[oi] = beta * update_and_dot(row, vi, wi, pw, pv, vs);
            } else {
                ps[oi] = beta * dot(row, vs);
            }
        }
        let half_k = 0.5 * beta * dot(ps, vs);
        let mut w = Vec::with_capacity(m);
        for (pi, vi) in ps.iter().zip(vs.iter()) {
            w.push(pi - half_k * vi);
        }
        pend_v.clear();
        pend_v.extend_from_slice(vs);
        pend_w = w;
        pending_start = k + 1;
    }
    (diag, off)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `row ← row − vi·pw − wi·pv`, returning `row · v` of the updated row.
#[inline]
fn update_and_dot(row: &mut [f64], vi: f64, wi: f64, pw: &[f64], pv: &[f64], v: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let len = row.len();
    let split = len - len % 4;
    let (rh, rt) = row.split_at_mut(split);
    for (((r, a), b), c) in rh
        .chunks_exact_mut(4)
        .zip(pw.chunks_exact(4))
        .zip(pv.chunks_exact(4))
        .zip(v.chunks_exact(4))
    {
        for t in 0..4 {
            r[t] -= vi * a[t] + wi * b[t];
            acc[t] += r[t] * c[t];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (t, r) in rt.iter_mut().enumerate() {
        let j = split + t;
        *r -= vi * pw[j] + wi * pv[j];
        s += *r * v[j];
    }
    s
}

/// Eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL.
/// `off[k]` couples `diag[k]` and `diag[k + 1]`. Result is unsorted.
pub fn tridiagonal_ql(mut diag: Vec<f64>, mut off: Vec<f64>) -> Result<Vec<f64>, SpectraError> {
    let n = diag.len();
    if n == 0 {
        return Ok(diag);
    }
    off.resize(n, 0.0);
    off[n - 1] = 0.0;
    // couplings below ε‖T‖ are negligible at the accuracy of the reduction
    let norm = (0..n).fold(0.0_f64, |s, i| {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        s.max(diag[i].abs() + off[i].abs() + left)
    });
    let floor = f64::EPSILON * norm;
    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd || off[m].abs() <= floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > QL_MAX_SWEEPS {
                return Err(SpectraError::NoConvergence { index: l, sweeps: QL_MAX_SWEEPS });
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..m).rev() {
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(diag)
}

/// Sorted eigenvalues of the ordered spectrum of `matrix / scale`.
pub fn eigenvalues(matrix: &Matrix, scale: f64) -> Result<SpectralSummary, SpectraError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(SpectraError::Scale(scale));
    }
    if !matrix.all_finite() {
        return Err(SpectraError::NonFinite);
    }
    let scaled;
    let m = if scale == 1.0 {
        matrix
    } else {
        scaled = matrix.scaled(1.0 / scale);
        &scaled
    };
    let (d, e) = tridiagonalize(m);
    let mut values = tridiagonal_ql(d, e)?;
    values.sort_by(f64::total_cmp);
    Ok(SpectralSummary { eigenvalues: values, scale })
}

/// Spectrum of `sample.entries / scale`.
pub fn symmetric_eigenvalues(sample: &MatrixSample, scale: f64) -> Result<SpectralSummary, SpectraError> {
    eigenvalues(&sample.entries, scale)
}

/// Sorted eigenvalues with the divisor that was applied before solving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub eigenvalues: Vec<f64>,
    pub scale: f64,
}

impl SpectralSummary {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, scale: f64) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self { eigenvalues, scale }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `max(|λ₁|, |λ_n|)`.
    pub fn operator_norm(&self) -> Result<f64, SpectraError> {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(a), Some(b)) => Ok(a.abs().max(b.abs())),
            _ => Err(SpectraError::Empty),
        }
    }

    /// `|λ|`, sorted ascending.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.eigenvalues.iter().map(|x| x.abs()).collect();
        s.sort_by(f64::total_cmp);
        s
    }

    /// `s_{n−offset}`: offset 0 is the operator norm, offset 1 the second
    /// largest singular value.
    pub fn kth_largest_singular(&self, offset: usize) -> Result<f64, SpectraError> {
        let n = self.len();
        if offset >= n {
            return Err(SpectraError::Offset { offset, n });
        }
        Ok(self.singular_values()[n - 1 - offset])
    }

    /// `(1/n) Σ λ^k`.
    pub fn esd_moment(&self, k: u32) -> f64 {
        if self.is_empty() {
            return f64::NAN;
        }
        self.eigenvalues.iter().map(|x| x.powi(k as i32)).sum::<f64>() / self.len() as f64
    }

    pub fn esd_cdf(&self) -> EmpiricalCdf {
        EmpiricalCdf { points: self.eigenvalues.clone() }
    }

    pub fn esd_histogram(&self, bins: usize, lo: f64, hi: f64) -> Result<Histogram, SpectraError> {
        let mut h = Histogram::new(bins, lo, hi)?;
        h.add_all(&self.eigenvalues);
        Ok(h)
    }

    /// Checks trace and Frobenius identities against `matrix / scale`
    /// within `1e-8 · n · max|entry|` (squared entry scale for Frobenius).
    pub fn satisfies_trace_identities(&self, matrix: &Matrix) -> bool {
        let n = matrix.dim() as f64;
        let scaled = matrix.scaled(1.0 / self.scale);
        let max = scaled.max_abs().max(f64::MIN_POSITIVE);
        let sum: f64 = self.eigenvalues.iter().sum();
        let sq: f64 = self.eigenvalues.iter().map(|x| x * x).sum();
        (sum - scaled.trace()).abs() <= 1e-8 * n * max
            && (sq - scaled.frobenius_sq()).abs() <= 1e-8 * n * max * max * n.max(1.0)
    }
}

pub fn operator_norm(summary: &SpectralSummary) -> Result<f64, SpectraError> {
    summary.operator_norm()
}

pub fn singular_values(summary: &SpectralSummary) -> Vec<f64> {
    summary.singular_values()
}

pub fn kth_largest_singular(summary: &SpectralSummary, offset: usize) -> Result<f64, SpectraError> {
    summary.kth_largest_singular(offset)
}

pub fn esd_moment(summary: &SpectralSummary, k: u32) -> f64 {
    summary.esd_moment(k)
}

/// Right-continuous empirical distribution function of sorted points.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    points: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn from_points(mut points: Vec<f64>) -> Self {
        points.sort_by(f64::total_cmp);
        Self { points }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `F(x) = #{λ ≤ x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        self.points.partition_point(|&p| p <= x) as f64 / self.points.len() as f64
    }

    /// `F(x−) = #{λ < x} / n`.
    pub fn eval_left(&self, x: f64) -> f64 {
        self.points.partition_point(|&p| p < x) as f64 / self.points.len() as f64
    }
}

/// Fixed-range histogram; bins are `[lo_i, hi_i)` with the last bin closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    /// Every value offered, in range or not.
    pub total: u64,
    pub out_of_range: u64,
}

impl Histogram {
    pub fn new(bins: usize, lo: f64, hi: f64) -> Result<Self, SpectraError> {
        if bins == 0 || !(lo < hi) {
            return Err(SpectraError::Histogram);
        }
        Ok(Self { lo, hi, counts: vec![0; bins], total: 0, out_of_range: 0 })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        let hi = if i + 1 == self.bins() { self.hi } else { self.lo + (i + 1) as f64 * w };
        (self.lo + i as f64 * w, hi)
    }

    pub fn add(&mut self, x: f64) {
        self.total += 1;
        if !(self.lo..=self.hi).contains(&x) {
            self.out_of_range += 1;
            return;
        }
        let i = (((x - self.lo) / self.bin_width()) as usize).min(self.bins() - 1);
        self.counts[i] += 1;
    }

    pub fn add_all(&mut self, xs: &[f64]) {
        for &x in xs {
            self.add(x);
        }
    }

    /// `count / (total · bin_width)`.
    pub fn density(&self, i: usize) -> f64 {
        self.counts[i] as f64 / (self.total as f64 * self.bin_width())
    }

    /// CSV with header `bin_lo,bin_hi,count,density`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,density\n");
        for i in 0..self.bins() {
            let (a, b) = self.bin_edges(i);
            out.push_str(&format!("{a},{b},{},{}\n", self.counts[i], self.density(i)));
        }
        out
    }
}

/// Analytic spectrum of the periodic prototype: `μ₀ = w` and
/// `μ_j = sin(ω_j w)/sin(ω_j)` with `ω_j = jπ/n`.
pub fn periodic_prototype_spectrum(n: usize, half_width: usize) -> Vec<f64> {
    let w = n.min(2 * half_width + 1);
    let mut out = Vec::with_capacity(n);
    out.push(w as f64);
    for j in 1..n {
        if w == n {
            // all-ones matrix
            out.push(0.0);
            continue;
        }
        let omega = j as f64 * std::f64::consts::PI / n as f64;
        out.push((omega * w as f64).sin() / omega.sin());
    }
    out
}

/// Interlacing for a positive semidefinite rank-one perturbation:
/// `λ_j(base) ≤ λ_j(perturbed) ≤ λ_{j+1}(base)`, with slack
/// `1e-9 · max(1, ‖perturbed‖)`.
pub fn interlacing_check(base: &SpectralSummary, perturbed: &SpectralSummary) -> Result<bool, SpectraError> {
    if base.len() != perturbed.len() {
        return Err(SpectraError::Dimension(base.len(), perturbed.len()));
    }
    let n = base.len();
    if n == 0 {
        return Ok(true);
    }
    let slack = 1e-9 * perturbed.operator_norm()?.max(base.operator_norm()?).max(1.0);
    let lo = &base.eigenvalues;
    let hi = &perturbed.eigenvalues;
    Ok((0..n).all(|j| lo[j] <= hi[j] + slack && (j + 1 == n || hi[j] <= lo[j + 1] + slack)))
}
