//! Dense per-layer motion from sparse trajectory displacements.
//!
//! Each velocity component is the mean of a Gaussian MRF on the 4-connected
//! pixel grid: smoothness couplings between neighbors plus a self-potential
//! at every pixel that carries trajectory evidence. The mean solves `A mu = b`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::image::Dims;
use crate::trajectory::Trajectory;

/// Sparse velocity observations of one layer, `(pixel index, (u, v))`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionEvidence {
    pub entries: Vec<(usize, [f64; 2])>,
}

impl MotionEvidence {
    pub fn new(entries: Vec<(usize, [f64; 2])>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Precision matrix and shift vector of one scalar component.
///
/// All off-diagonal entries between grid neighbors share the value `coupling`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGridSystem {
    dims: Dims,
    diag: Vec<f64>,
    coupling: f64,
    b: Vec<f64>,
}

impl GaussianGridSystem {
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> {
        let (w, h) = (self.dims.width, self.dims.height);
        let (x, y) = self.dims.coords(i);
        let left = (x > 0).then(|| i - 1);
        let right = (x + 1 < w).then(|| i + 1);
        let up = (y > 0).then(|| i - w);
        let down = (y + 1 < h).then(|| i + w);
        [left, right, up, down].into_iter().flatten()
    }

    /// Matrix entry `A_ij`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if self.neighbors(i).any(|k| k == j) {
            self.coupling
        } else {
            0.0
        }
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let w = self.dims.width;
        let h = self.dims.height;
        for yy in 0..h {
            for xx in 0..w {
                let i = yy * w + xx;
                let mut s = 0.0;
                if xx > 0 {
                    s += x[i - 1];
                }
                if xx + 1 < w {
                    s += x[i + 1];
                }
                if yy > 0 {
                    s += x[i - w];
                }
                if yy + 1 < h {
                    s += x[i + w];
                }
                out[i] = self.diag[i] * x[i] + self.coupling * s;
            }
        }
    }

    /// `max_i |(A x - b)_i|`.
    pub fn residual_inf(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        ax.iter()
            .zip(&self.b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        self.dims.for_each_edge(|i, j| {
            m[(i, j)] = self.coupling;
            m[(j, i)] = self.coupling;
        });
        m
    }
}

/// Assembles the x and y systems for one layer.
pub fn build_gaussian_mrf(
    dims: Dims,
    evidence: &MotionEvidence,
    sigma_m: f64,
    sigma_p: f64,
) -> Result<[GaussianGridSystem; 2]> {
    if !(sigma_m > 0.0) || !sigma_m.is_finite() {
        return Err(Error::InvalidParameter {
            name: "sigma_m",
            reason: "must be positive",
        });
    }
    if !(sigma_p > 0.0) || !sigma_p.is_finite() {
        return Err(Error::InvalidParameter {
            name: "sigma_p",
            reason: "must be positive",
        });
    }
    if dims.is_empty() || evidence.is_empty() {
        return Err(Error::NoEvidence);
    }
    let n = dims.len();
    let wm = 1.0 / (sigma_m * sigma_m);
    let wp = 1.0 / (sigma_p * sigma_p);
    let mut diag = vec![0.0; n];
    dims.for_each_edge(|i, j| {
        diag[i] += wm;
        diag[j] += wm;
    });
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; n];
    for &(i, m) in &evidence.entries {
        if i >= n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: i,
            });
        }
        diag[i] += wp;
        bx[i] += m[0] * wp;
        by[i] += m[1] * wp;
    }
    let sys = |b| GaussianGridSystem {
        dims,
        diag: diag.clone(),
        coupling: -wm,
        b,
    };
    Ok([sys(bx), sys(by)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    /// Jacobi-preconditioned conjugate gradient.
    #[default]
    ConjugateGradient,
    /// Gaussian belief propagation with in-place alternating sweeps.
    GaussianBp,
    /// Banded LDL^T factorization.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveParams {
    pub solver: Solver,
    /// Target for `max |A mu - b|`.
    pub tol: f64,
    pub max_iterations: usize,
    pub variances: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            solver: Solver::ConjugateGradient,
            tol: 1e-10,
            max_iterations: 50_000,
            variances: false,
        }
    }
}

/// Largest grid (in nodes) for which variances are computed.
pub const MAX_VARIANCE_NODES: usize = 64 * 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub mean: Vec<f64>,
    /// Diagonal of `A^-1`, when requested.
    pub variance: Option<Vec<f64>>,
}

pub fn solve_marginals(sys: &GaussianGridSystem, params: &SolveParams) -> Result<Marginals> {
    if params.variances && sys.len() > MAX_VARIANCE_NODES {
        return Err(Error::VarianceGridTooLarge {
            max: MAX_VARIANCE_NODES,
        });
    }
    let need_factor = params.variances || params.solver == Solver::Direct;
    let factor = need_factor.then(|| BandedLdl::factor(sys));
    let mean = match params.solver {
        Solver::ConjugateGradient => conjugate_gradient(sys, params)?,
        Solver::GaussianBp => gaussian_bp(sys, params)?,
        Solver::Direct => {
            let f = factor.as_ref().expect("factor computed for direct solve");
            let mean = f.solve(&sys.b);
            let r = sys.residual_inf(&mean);
            if r > params.tol {
                // One step of iterative refinement usually recovers rounding loss.
                let mut ax = vec![0.0; mean.len()];
                sys.apply(&mean, &mut ax);
                let res: Vec<f64> = sys.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
                let corr = f.solve(&res);
                let refined: Vec<f64> = mean.iter().zip(&corr).map(|(m, c)| m + c).collect();
                let r = sys.residual_inf(&refined);
                if r > params.tol {
                    return Err(Error::NotConverged {
                        iterations: 1,
                        residual: r,
                    });
                }
                refined
            } else {
                mean
            }
        }
    };
    let variance = if params.variances {
        factor.map(|f| f.selected_inverse_diag())
    } else {
        None
    };
    Ok(Marginals { mean, variance })
}

fn conjugate_gradient(sys: &GaussianGridSystem, params: &SolveParams) -> Result<Vec<f64>> {
    let n = sys.len();
    let mut x = vec![0.0; n];
    let mut r = sys.b.clone();
    let inv_diag: Vec<f64> = sys.diag.iter().map(|d| 1.0 / d).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = dot(&r, &z);
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut residual = inf(&r);
    let mut iterations = 0;
    while iterations < params.max_iterations {
        if residual <= params.tol {
            // The recursive residual drifts; confirm against the true one.
            let true_res = sys.residual_inf(&x);
            if true_res <= params.tol {
                return Ok(x);
            }
            sys.apply(&x, &mut ap);
            for i in 0..n {
                r[i] = sys.b[i] - ap[i];
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        if rz == 0.0 {
            break;
        }
        sys.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        residual = inf(&r);
        iterations += 1;
    }
    let true_res = sys.residual_inf(&x);
    if true_res <= params.tol {
        Ok(x)
    } else {
        Err(Error::NotConverged {
            iterations,
            residual: true_res,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direction slots for messages: left, right, up, down neighbor.
const DIRS: usize = 4;

fn gaussian_bp(sys: &GaussianGridSystem, params: &SolveParams) -> Result<Vec<f64>> {
    let dims = sys.dims;
    let n = sys.len();
    let (w, h) = (dims.width, dims.height);
    let a = sys.coupling;
    // Incoming messages at node i from direction d, in information form.
    let mut jm = vec![0.0; n * DIRS];
    let mut hm = vec![0.0; n * DIRS];
    let neighbor = |i: usize, d: usize| -> Option<usize> {
        let (x, y) = dims.coords(i);
        match d {
            0 => (x > 0).then(|| i - 1),
            1 => (x + 1 < w).then(|| i + 1),
            2 => (y > 0).then(|| i - w),
            _ => (y + 1 < h).then(|| i + w),
        }
    };
    // Slot at the receiver that holds a message sent along direction d.
    let opposite = |d: usize| d ^ 1;
    let marginal_means = |jm: &[f64], hm: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let base = i * DIRS;
                let jt = sys.diag[i] + jm[base..base + DIRS].iter().sum::<f64>();
                let ht = sys.b[i] + hm[base..base + DIRS].iter().sum::<f64>();
                ht / jt
            })
            .collect()
    };
    let mut sweeps = 0;
    let mut residual = f64::INFINITY;
    while sweeps < params.max_iterations {
        let forward = sweeps % 2 == 0;
        for step in 0..n {
            let i = if forward { step } else { n - 1 - step };
            let base = i * DIRS;
            let jt = sys.diag[i] + jm[base..base + DIRS].iter().sum::<f64>();
            let ht = sys.b[i] + hm[base..base + DIRS].iter().sum::<f64>();
            for d in 0..DIRS {
                if let Some(j) = neighbor(i, d) {
                    let jc = jt - jm[base + d];
                    let hc = ht - hm[base + d];
                    let slot = j * DIRS + opposite(d);
                    jm[slot] = -a * a / jc;
                    hm[slot] = -a * hc / jc;
                }
            }
        }
        sweeps += 1;
        if sweeps % 4 == 0 || sweeps == params.max_iterations {
            let mean = marginal_means(&jm, &hm);
            residual = sys.residual_inf(&mean);
            if residual <= params.tol {
                return Ok(mean);
            }
        }
    }
    Err(Error::NotConverged {
        iterations: sweeps,
        residual,
    })
}

/// `A = L D L^T` with unit lower-triangular `L` of bandwidth `bw`.
struct BandedLdl {
    n: usize,
    bw: usize,
    /// `l[i * (bw + 1) + d] = L[i][i - d]` for `1 <= d <= bw`.
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandedLdl {
    fn factor(sys: &GaussianGridSystem) -> Self {
        let n = sys.len();
        let bw = sys.dims.width.min(n.saturating_sub(1));
        let stride = bw + 1;
        let mut l = vec![0.0; n * stride];
        let mut d = vec![0.0; n];
        let at = |l: &[f64], i: usize, j: usize| -> f64 {
            if i == j {
                1.0
            } else if j < i && i - j <= bw {
                l[i * stride + (i - j)]
            } else {
                0.0
            }
        };
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                let mut s = sys.get(i, j);
                for k in lo.max(j.saturating_sub(bw))..j {
                    s -= at(&l, i, k) * at(&l, j, k) * d[k];
                }
                l[i * stride + (i - j)] = s / d[j];
            }
            let mut s = sys.diag[i];
            for k in lo..i {
                let lik = at(&l, i, k);
                s -= lik * lik * d[k];
            }
            d[i] = s;
        }
        Self { n, bw, l, d }
    }

    fn lij(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else if j < i && i - j <= self.bw {
            self.l[i * (self.bw + 1) + (i - j)]
        } else {
            0.0
        }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(self.bw);
            let mut s = y[i];
            for k in lo..i {
                s -= self.lij(i, k) * y[k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let hi = (i + self.bw).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= self.lij(k, i) * y[k];
            }
            y[i] = s;
        }
        y
    }

    /// Diagonal of `A^-1` by the selected-inversion recurrence on the band.
    fn selected_inverse_diag(&self) -> Vec<f64> {
        let n = self.n;
        let bw = self.bw;
        let stride = bw + 1;
        // s[i * stride + d] = Sigma[i][i + d], 0 <= d <= bw.
        let mut s = vec![0.0; n * stride];
        let sigma = |s: &[f64], i: usize, j: usize| -> f64 {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            s[a * stride + (b - a)]
        };
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            for j in (i + 1..=hi).rev() {
                let mut acc = 0.0;
                for k in i + 1..=hi {
                    acc -= self.lij(k, i) * sigma(&s, k, j);
                }
                s[i * stride + (j - i)] = acc;
            }
            let mut acc = 1.0 / self.d[i];
            for k in i + 1..=hi {
                acc -= self.lij(k, i) * sigma(&s, k, i);
            }
            s[i * stride] = acc;
        }
        (0..n).map(|i| s[i * stride]).collect()
    }
}

/// Dense two-component motion field.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionField {
    dims: Dims,
    u: Vec<f64>,
    v: Vec<f64>,
    variance: Option<[Vec<f64>; 2]>,
}

impl MotionField {
    pub fn zero(dims: Dims) -> Self {
        Self::uniform(dims, [0.0, 0.0])
    }

    pub fn uniform(dims: Dims, m: [f64; 2]) -> Self {
        Self {
            dims,
            u: vec![m[0]; dims.len()],
            v: vec![m[1]; dims.len()],
            variance: None,
        }
    }

    pub fn from_components(dims: Dims, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        for c in [&u, &v] {
            if c.len() != dims.len() {
                return Err(Error::SizeMismatch {
                    expected: dims.len(),
                    found: c.len(),
                });
            }
        }
        Ok(Self {
            dims,
            u,
            v,
            variance: None,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn variance(&self) -> Option<&[Vec<f64>; 2]> {
        self.variance.as_ref()
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 2] {
        [self.u[i], self.v[i]]
    }

    /// Motion at `i` rounded to whole pixels.
    #[inline]
    pub fn offset(&self, i: usize) -> (i64, i64) {
        (libm::round(self.u[i]) as i64, libm::round(self.v[i]) as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionParams {
    pub sigma_m: f64,
    pub sigma_p: f64,
    pub solve: SolveParams,
    /// Solve on every `stride`-th pixel and upsample bilinearly. `1` is the full grid.
    pub stride: usize,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            sigma_m: 1.0,
            sigma_p: 0.1,
            solve: SolveParams::default(),
            stride: 1,
        }
    }
}

/// Backward displacements `p(t) - p(t-1)` of trajectories alive at both frames,
/// placed at the pixel containing `p(t)`.
pub fn motion_evidence<'a>(
    trajectories: impl IntoIterator<Item = &'a Trajectory>,
    frame: usize,
    dims: Dims,
) -> MotionEvidence {
    let mut entries = Vec::new();
    if frame == 0 {
        return MotionEvidence { entries };
    }
    for t in trajectories {
        let (Some(now), Some(prev)) = (t.position(frame), t.position(frame - 1)) else {
            continue;
        };
        if let Some(i) = dims.pixel_of(now.x, now.y) {
            let d = now - prev;
            entries.push((i, [d.x, d.y]));
        }
    }
    MotionEvidence { entries }
}

pub fn estimate_motion_field<'a>(
    trajectories: impl IntoIterator<Item = &'a Trajectory>,
    frame: usize,
    dims: Dims,
    params: &MotionParams,
) -> Result<MotionField> {
    let evidence = motion_evidence(trajectories, frame, dims);
    field_from_evidence(dims, &evidence, params)
}

pub fn field_from_evidence(dims: Dims, evidence: &MotionEvidence, params: &MotionParams) -> Result<MotionField> {
    if params.stride == 0 {
        return Err(Error::InvalidParameter {
            name: "stride",
            reason: "must be at least 1",
        });
    }
    if evidence.is_empty() {
        return Err(Error::NoEvidence);
    }
    if params.stride == 1 {
        let [sx, sy] = build_gaussian_mrf(dims, evidence, params.sigma_m, params.sigma_p)?;
        let mx = solve_marginals(&sx, &params.solve)?;
        let my = solve_marginals(&sy, &params.solve)?;
        let variance = match (mx.variance, my.variance) {
            (Some(a), Some(b)) => Some([a, b]),
            _ => None,
        };
        return Ok(MotionField {
            dims,
            u: mx.mean,
            v: my.mean,
            variance,
        });
    }

    let s = params.stride;
    let coarse = Dims::new((dims.width - 1) / s + 1, (dims.height - 1) / s + 1);
    let mapped = MotionEvidence::new(
        evidence
            .entries
            .iter()
            .map(|&(i, m)| {
                let (x, y) = dims.coords(i);
                let cx = ((x + s / 2) / s).min(coarse.width - 1);
                let cy = ((y + s / 2) / s).min(coarse.height - 1);
                (coarse.index(cx, cy), m)
            })
            .collect(),
    );
    let solve = SolveParams {
        variances: false,
        ..params.solve
    };
    let [sx, sy] = build_gaussian_mrf(coarse, &mapped, params.sigma_m, params.sigma_p)?;
    let mx = solve_marginals(&sx, &solve)?;
    let my = solve_marginals(&sy, &solve)?;
    Ok(MotionField {
        dims,
        u: upsample(&mx.mean, coarse, dims, s),
        v: upsample(&my.mean, coarse, dims, s),
        variance: None,
    })
}

fn upsample(values: &[f64], coarse: Dims, fine: Dims, s: usize) -> Vec<f64> {
    let mut out = vec![0.0; fine.len()];
    for y in 0..fine.height {
        let fy = y as f64 / s as f64;
        let y0 = (y / s).min(coarse.height - 1);
        let y1 = (y0 + 1).min(coarse.height - 1);
        let ty = (fy - y0 as f64).clamp(0.0, 1.0);
        for x in 0..fine.width {
            let fx = x as f64 / s as f64;
            let x0 = (x / s).min(coarse.width - 1);
            let x1 = (x0 + 1).min(coarse.width - 1);
            let tx = (fx - x0 as f64).clamp(0.0, 1.0);
            let v00 = values[coarse.index(x0, y0)];
            let v10 = values[coarse.index(x1, y0)];
            let v01 = values[coarse.index(x0, y1)];
            let v11 = values[coarse.index(x1, y1)];
            out[fine.index(x, y)] =
                (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11);
        }
    }
    out
}
