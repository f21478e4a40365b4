//! Weighted harmonic extension to the upper half-space, its energy, the Neumann
//! trace of the equation and the rescaled energy `Φ(R)`.

use std::collections::HashMap;

use rayon::prelude::*;
use rustfft::FftPlanner;
use statrs::function::beta::beta_reg;

use crate::energy::Potential;
use crate::error::{LabError, Result};
use crate::fft::{apply_multiplier, freq_index, Convolver};
use crate::field::{BallRegion, BoundaryModel, ExteriorConstant, Grid, ScalarField};
use crate::kernel::{exterior_split, symbol_constant, KernelSpec, NonlocalOperator};
use crate::quad::gamma;
use crate::scalar::Real;

/// `d_s = 2^{s−1} Γ(s/2) / Γ(1 − s/2)`.
pub fn extension_constant(s: f64) -> f64 {
    2f64.powf(s - 1.0) * gamma(0.5 * s) / gamma(1.0 - 0.5 * s)
}

/// Fourier multiplier of the extension at `t = |ξ| y`:
/// `m(t) = 2^{1−ν} t^ν K_ν(t) / Γ(ν)` with `ν = s/2`, so `m(0) = 1`.
pub fn extension_multiplier(s: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let nu = 0.5 * s;
    if t > 700.0 {
        return 0.0;
    }
    // K_ν(t) = ∫_0^∞ exp(−t cosh u) cosh(νu) du
    let du = 0.05;
    let upper = (2.0 * 745.0 / t).ln().max(1.0) + 1.0;
    let mut acc = 0.5;
    let mut u = du;
    while u < upper {
        acc += (t - t * u.cosh()).exp() * (nu * u).cosh();
        u += du;
    }
    let k_scaled = acc * du; // e^t K_ν(t)
    2f64.powf(1.0 - nu) / gamma(nu) * t.powf(nu) * k_scaled * (-t).exp()
}

/// Fraction of the extension's Poisson kernel mass at height `y` lying within
/// distance `r` of its centre in `ℝ^n`.
fn poisson_ball_mass(n: usize, s: f64, r: f64, y: f64) -> f64 {
    if r.is_infinite() {
        return 1.0;
    }
    let t = r * r / (r * r + y * y);
    beta_reg(0.5 * n as f64, 0.5 * s, t)
}

fn sphere_area(n: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(0.5 * n as f64) / gamma(0.5 * n as f64)
}

/// Default heights: geometric with ratio 1.15 from `h/4` up to `y_max`.
pub fn graded_heights(h: f64, y_max: f64, levels: usize) -> Result<Vec<f64>> {
    let y0 = 0.25 * h;
    if y_max <= y0 {
        return Err(LabError::Config(format!("y_max = {y_max} below the first level {y0}")));
    }
    if levels == 0 {
        let mut ys = vec![y0];
        while *ys.last().unwrap() < y_max {
            let next = ys.last().unwrap() * 1.15;
            ys.push(next.min(y_max));
        }
        return Ok(ys);
    }
    if levels < 3 {
        return Err(LabError::Config("at least three extension levels are needed".into()));
    }
    let ratio = (y_max / y0).powf(1.0 / (levels - 1) as f64);
    Ok((0..levels).map(|k| y0 * ratio.powi(k as i32)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtensionBackend {
    /// Level-by-level convolution with the Poisson kernel.
    Poisson,
    /// Finite-volume solve of `div(y^{1−s}∇U) = 0` per Fourier mode (periodic grids).
    WeightedSolve,
}

/// `U(x, y)` on `base_grid × y_nodes`.
#[derive(Clone, Debug)]
pub struct ExtensionField<T: Real> {
    pub boundary: ScalarField<T>,
    pub y_nodes: Vec<T>,
    /// `values[k]` is `U(·, y_nodes[k])` on the base grid.
    pub values: Vec<Vec<T>>,
    pub s: T,
    pub d_s: T,
}

impl<T: Real> ExtensionField<T> {
    pub fn base_grid(&self) -> &Grid<T> {
        &self.boundary.grid
    }

    pub fn weight_exponent(&self) -> T {
        T::one() - self.s
    }

    pub fn y_max(&self) -> T {
        *self.y_nodes.last().expect("levels")
    }

    /// `‖U(·, 0⁺) − u‖_∞ / max(‖u‖_∞, 1)`, where `U(·, 0⁺)` extrapolates the two lowest
    /// levels along `α + β y^s`.
    pub fn trace_defect(&self) -> T {
        let scale = self.boundary.sup_norm().max(T::one());
        let (y0, y1) = (self.y_nodes[0].powf(self.s), self.y_nodes[1].powf(self.s));
        let mut worst = T::zero();
        for (i, b) in self.boundary.values.iter().enumerate() {
            let (u0, u1) = (self.values[0][i], self.values[1][i]);
            let at_zero = u0 - (u1 - u0) * y0 / (y1 - y0);
            worst = worst.max((at_zero - *b).abs());
        }
        worst / scale
    }

    /// Largest excursion of `U` outside `[min u, max u]` (exterior data included).
    pub fn max_principle_gap(&self) -> T {
        let (mut lo, mut hi) = range(&self.boundary.values);
        if let Some(ext) = self.base_grid().exterior() {
            lo = lo.min(ext.plus).min(ext.minus);
            hi = hi.max(ext.plus).max(ext.minus);
        }
        let mut gap = T::zero();
        for level in &self.values {
            for v in level {
                gap = gap.max(lo - *v).max(*v - hi);
            }
        }
        gap
    }
}

fn range<T: Real>(v: &[T]) -> (T, T) {
    v.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), x| (a.min(*x), b.max(*x)))
}

/// Extension by the Poisson backend on heights graded from `h/4` to `y_max`
/// (`levels = 0` selects ratio 1.15).
pub fn extend<T: Real>(u: &ScalarField<T>, s: T, y_max: T, levels: usize) -> Result<ExtensionField<T>> {
    extend_with(u, s, y_max, levels, ExtensionBackend::Poisson)
}

pub fn extend_with<T: Real>(
    u: &ScalarField<T>,
    s: T,
    y_max: T,
    levels: usize,
    backend: ExtensionBackend,
) -> Result<ExtensionField<T>> {
    let sf = s.f64();
    if !(sf > 0.0 && sf < 1.0) {
        return Err(LabError::Config(format!("extension order s = {sf} outside (0, 1)")));
    }
    if u.values.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Precondition("boundary field must be bounded".into()));
    }
    let g = &u.grid;
    let ys = graded_heights(g.spacing().f64(), y_max.f64(), levels)?;
    let base: Vec<f64> = u.values.iter().map(|v| v.f64()).collect();
    let raw = match (backend, g.boundary()) {
        (_, BoundaryModel::ExteriorField) => return Err(LabError::MissingExterior),
        (ExtensionBackend::Poisson, BoundaryModel::Periodic) => periodic_poisson(g, &base, sf, &ys),
        (ExtensionBackend::Poisson, BoundaryModel::ExteriorConstant(ext)) => exterior_poisson(g, ext, &base, sf, &ys),
        (ExtensionBackend::WeightedSolve, BoundaryModel::Periodic) => periodic_weighted_solve(g, &base, sf, &ys),
        (ExtensionBackend::WeightedSolve, _) => {
            return Err(LabError::NotPeriodic("the weighted solve backend needs a periodic grid".into()))
        }
    };
    let out = ExtensionField {
        boundary: u.clone(),
        y_nodes: ys.iter().map(|v| T::lit(*v)).collect(),
        values: raw.into_iter().map(|l| l.into_iter().map(T::lit).collect()).collect(),
        s,
        d_s: T::lit(extension_constant(sf)),
    };
    let defect = out.trace_defect();
    if defect > T::lit(0.01) {
        return Err(LabError::Precondition(format!(
            "insufficient y resolution: lowest levels differ from u by {defect}"
        )));
    }
    Ok(out)
}

/// Extension of exact half-space data `sign(e·x)` (evaluated in closed form).
pub fn extend_half_space<T: Real>(
    grid: &Grid<T>,
    direction: &[T],
    s: T,
    y_max: T,
    levels: usize,
) -> Result<ExtensionField<T>> {
    let n = grid.dimension();
    if direction.len() != n {
        return Err(LabError::Config("direction dimension mismatch".into()));
    }
    let e: Vec<f64> = direction.iter().map(|v| v.f64()).collect();
    let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(LabError::Config("direction must be a unit vector".into()));
    }
    let sf = s.f64();
    let ys = graded_heights(grid.spacing().f64(), y_max.f64(), levels)?;
    let proj: Vec<f64> = (0..grid.len())
        .map(|i| {
            let p = grid.point(i);
            (0..n).map(|a| p[a].f64() * e[a]).sum()
        })
        .collect();
    let sign = |t: f64| if t >= 0.0 { 1.0 } else { -1.0 };
    // mass of the one-dimensional kernel beyond distance a
    let beyond = |a: f64, y: f64| 0.5 * beta_reg(0.5 * sf, 0.5, y * y / (a * a + y * y));
    let values = ys
        .iter()
        .map(|&y| proj.iter().map(|&t| T::lit(sign(t) * (1.0 - 2.0 * beyond(t.abs(), y)))).collect())
        .collect();
    let boundary = ScalarField::new(grid.clone(), proj.iter().map(|t| T::lit(sign(*t))).collect())?;
    Ok(ExtensionField {
        boundary,
        y_nodes: ys.iter().map(|v| T::lit(*v)).collect(),
        values,
        s,
        d_s: T::lit(extension_constant(sf)),
    })
}

fn wavenumbers(g: &Grid<impl Real>) -> Vec<f64> {
    let n = g.dimension();
    let m = g.per_axis();
    let base = std::f64::consts::PI / g.box_radius().f64();
    (0..g.len())
        .map(|i| {
            let mi = g.multi_index(i);
            let mut k2 = 0.0;
            for a in 0..n {
                let k = freq_index(mi[a], m) as f64 * base;
                k2 += k * k;
            }
            k2.sqrt()
        })
        .collect()
}

fn periodic_poisson(g: &Grid<impl Real>, u: &[f64], s: f64, ys: &[f64]) -> Vec<Vec<f64>> {
    let n = g.dimension();
    let m = g.per_axis();
    let xi = wavenumbers(g);
    ys.par_iter()
        .map(|&y| {
            let mut cache: HashMap<u64, f64> = HashMap::new();
            let mult: Vec<f64> = xi
                .iter()
                .map(|k| *cache.entry(k.to_bits()).or_insert_with(|| extension_multiplier(s, k * y)))
                .collect();
            let mut planner = FftPlanner::new();
            apply_multiplier(u, m, n, &mult, &mut planner)
        })
        .collect()
}

fn exterior_poisson<T: Real>(
    g: &Grid<T>,
    ext: &ExteriorConstant<T>,
    u: &[f64],
    s: f64,
    ys: &[f64],
) -> Vec<Vec<f64>> {
    let n = g.dimension();
    let m = g.per_axis();
    let h = g.spacing().f64();
    let hn = h.powi(n as i32);
    let area = sphere_area(n);
    let c = 1.0 / (area * 0.5 * statrs::function::beta::beta(0.5 * n as f64, 0.5 * s));
    let plus = ext.plus.f64();
    let minus = ext.minus.f64();
    ys.par_iter()
        .map(|&y| {
            let kernel = |d: &[isize]| -> f64 {
                if d.iter().all(|v| *v == 0) {
                    return 0.0;
                }
                let r2: f64 = d.iter().map(|v| (*v as f64 * h).powi(2)).sum();
                c * y.powf(s) * (r2 + y * y).powf(-0.5 * (n as f64 + s)) * hn
            };
            let conv = Convolver::new(n, m, 2 * m, kernel);
            let ones = vec![1.0; u.len()];
            let out = conv.apply_many(&[u, &ones]);
            let masses = exterior_split(g, ext, &|a, b| {
                (poisson_ball_mass(n, s, b, y) - poisson_ball_mass(n, s, a, y)) / area
            });
            (0..u.len())
                .map(|i| {
                    let (mp, mm) = masses[i];
                    let own = 1.0 - out[1][i] - mp - mm;
                    out[0][i] + own * u[i] + mp * plus + mm * minus
                })
                .collect()
        })
        .collect()
}

fn periodic_weighted_solve(g: &Grid<impl Real>, u: &[f64], s: f64, ys: &[f64]) -> Vec<Vec<f64>> {
    let n = g.dimension();
    let m = g.per_axis();
    let h = g.spacing().f64();
    let lambda: Vec<f64> = (0..g.len())
        .map(|i| {
            let mi = g.multi_index(i);
            let mut acc = 0.0;
            for a in 0..n {
                let k = freq_index(mi[a], m) as f64;
                acc += (2.0 - 2.0 * (2.0 * std::f64::consts::PI * k / m as f64).cos()) / (h * h);
            }
            acc
        })
        .collect();
    let mut cache: HashMap<u64, Vec<f64>> = HashMap::new();
    let profiles: Vec<Vec<f64>> = lambda
        .iter()
        .map(|l| cache.entry(l.to_bits()).or_insert_with(|| mode_profile(*l, s, ys)).clone())
        .collect();
    (0..ys.len())
        .into_par_iter()
        .map(|k| {
            let mult: Vec<f64> = profiles.iter().map(|p| p[k]).collect();
            let mut planner = FftPlanner::new();
            apply_multiplier(u, m, n, &mult, &mut planner)
        })
        .collect()
}

/// Finite-volume profile of `−(y^{1−s} m′)′ + λ y^{1−s} m = 0`, `m(0) = 1`, with the
/// decay condition `m′ = (−√λ + (s−1)/(2y)) m` at the top.
fn mode_profile(lambda: f64, s: f64, ys: &[f64]) -> Vec<f64> {
    let k = ys.len();
    if lambda == 0.0 {
        return vec![1.0; k];
    }
    let pw = |y: f64| y.powf(s);
    let w = |a: f64, b: f64| (b.powf(2.0 - s) - a.powf(2.0 - s)) / (2.0 - s);
    // conductance between heights a < b for the y^{1−s} weight
    let cond = |a: f64, b: f64| s / (pw(b) - pw(a));
    let mut lower = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        let below = if i == 0 { 0.0 } else { ys[i - 1] };
        let c_lo = cond(below, ys[i]);
        let lo_face = if i == 0 { 0.0 } else { 0.5 * (ys[i - 1] + ys[i]) };
        let hi_face = if i + 1 < k { 0.5 * (ys[i] + ys[i + 1]) } else { ys[i] };
        diag[i] += c_lo + lambda * w(lo_face, hi_face);
        if i == 0 {
            rhs[i] += c_lo;
        } else {
            lower[i] = -c_lo;
        }
        if i + 1 < k {
            let c_hi = cond(ys[i], ys[i + 1]);
            diag[i] += c_hi;
            upper[i] = -c_hi;
        } else {
            let y = ys[i];
            let slope = -lambda.sqrt() + (s - 1.0) / (2.0 * y);
            diag[i] -= y.powf(1.0 - s) * slope;
        }
    }
    thomas(&lower, &diag, &upper, &rhs)
}

fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let k = b.len();
    let mut cp = vec![0.0; k];
    let mut dp = vec![0.0; k];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..k {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; k];
    x[k - 1] = dp[k - 1];
    for i in (0..k - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// `d_s lim_{y→0} y^{1−s} ∂_y U` per base node, from `s (U − u)/y^s` at the two lowest
/// levels extrapolated in `y^{2−s}`.
pub fn neumann_trace<T: Real>(ext: &ExtensionField<T>) -> Vec<T> {
    let s = ext.s.f64();
    let d_s = ext.d_s.f64();
    let y0 = ext.y_nodes[0].f64();
    let y1 = ext.y_nodes[1].f64();
    let (p0, p1) = (y0.powf(2.0 - s), y1.powf(2.0 - s));
    ext.boundary
        .values
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let u = u.f64();
            let t0 = s * (ext.values[0][i].f64() - u) / y0.powf(s);
            let t1 = s * (ext.values[1][i].f64() - u) / y1.powf(s);
            T::lit(d_s * (t0 + (t0 - t1) * p0 / (p1 - p0)))
        })
        .collect()
}

/// Pointwise `|d_s y^{1−s}∂_y U|_{y=0} − ε^{−s} W′(u) / κ_n(s)|` divided by
/// `max |ε^{−s} W′(u)| / κ_n(s)` (or 1 when that vanishes).
///
/// `κ_n(s)` converts the kernel `(2−s)|z|^{−n−s}` to the unit symbol `|ξ|^s`.
pub fn neumann_trace_check<T: Real>(
    ext: &ExtensionField<T>,
    w: &Potential<T>,
    epsilon: T,
) -> Result<ScalarField<T>> {
    let n = ext.base_grid().dimension();
    let s = ext.s.f64();
    let mu = epsilon.f64().powf(-s) / symbol_constant(n, s);
    let trace = neumann_trace(ext);
    let rhs: Vec<f64> = ext.boundary.values.iter().map(|u| mu * w.dw(*u).f64()).collect();
    let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let values = trace
        .iter()
        .zip(&rhs)
        .map(|(t, r)| T::lit((t.f64() - r).abs() / scale))
        .collect();
    ScalarField::new(ext.base_grid().clone(), values)
}

/// Largest value of `field` on the nodes of `region`.
pub fn sup_on<T: Real>(field: &ScalarField<T>, region: &BallRegion<T>) -> Result<T> {
    let nodes = field.grid.nodes_in(region);
    if nodes.is_empty() {
        return Err(LabError::Degenerate("region holds no grid nodes".into()));
    }
    Ok(nodes.iter().fold(T::zero(), |m, &i| m.max(field.values[i])))
}

/// Weighted Dirichlet part `(d_s/2) ∫_{B̃_R^+} y^{1−s} |∇U|²` and the potential part
/// `μ ∫_{B_R} W(u)` with `μ = ε^{−s}/κ_n(s)`, each with a quadrature error bar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionEnergy {
    pub dirichlet: f64,
    pub potential: f64,
    pub error_bar: f64,
}

impl ExtensionEnergy {
    pub fn total(&self) -> f64 {
        self.dirichlet + self.potential
    }
}

fn check_radius<T: Real>(ext: &ExtensionField<T>, r: f64) -> Result<()> {
    let g = ext.base_grid();
    if !(r > 0.0) {
        return Err(LabError::OutOfDomain(format!("radius {r} must be positive")));
    }
    if r > g.box_radius().f64() + 1e-12 || r > ext.y_max().f64() + 1e-12 {
        return Err(LabError::OutOfDomain(format!("half-ball of radius {r} exceeds the extension box")));
    }
    Ok(())
}

/// Half-ball quadrature on the sub-lattice of stride `stride` and every `stride`-th
/// height. Along `y`, `U` is taken of the form `α + β y^s` between levels.
fn dirichlet_quadrature<T: Real>(ext: &ExtensionField<T>, r: f64, stride: usize) -> f64 {
    let g = ext.base_grid();
    let n = g.dimension();
    let m = g.per_axis();
    let h = g.spacing().f64() * stride as f64;
    let s = ext.s.f64();
    let periodic = g.is_periodic();
    let mut heights = vec![0.0];
    let mut levels: Vec<Vec<f64>> = vec![ext.boundary.values.iter().map(|v| v.f64()).collect()];
    for (k, y) in ext.y_nodes.iter().enumerate() {
        if (k + 1) % stride == 0 || k + 1 == ext.y_nodes.len() {
            heights.push(y.f64());
            levels.push(ext.values[k].iter().map(|v| v.f64()).collect());
        }
    }
    let exterior = g.exterior().map(|e| (e.clone(), g.clone()));
    // value at lattice offset from node `mi` along `axis`
    let neighbour = |level: &[f64], y: f64, mi: &[usize; 3], axis: usize, step: isize| -> Option<f64> {
        let mut q = [0isize; 3];
        for a in 0..n {
            q[a] = mi[a] as isize;
        }
        q[axis] += step * stride as isize;
        if periodic {
            let mut idx = [0usize; 3];
            for a in 0..n {
                idx[a] = q[a].rem_euclid(m as isize) as usize;
            }
            return Some(level[g.linear_index(&idx[..n])]);
        }
        if q[axis] < 0 || q[axis] >= m as isize {
            if y == 0.0 {
                if let Some((e, gg)) = &exterior {
                    let x: Vec<_> = (0..n).map(|a| gg.axis_coord_signed(q[a])).collect();
                    return Some(e.value_at(&x).f64());
                }
            }
            return None;
        }
        let mut idx = [0usize; 3];
        for a in 0..n {
            idx[a] = q[a] as usize;
        }
        Some(level[g.linear_index(&idx[..n])])
    };
    let grad_x = |level: &[f64], y: f64, i: usize| -> f64 {
        let mi = g.multi_index(i);
        let mut acc = 0.0;
        for a in 0..n {
            let f = neighbour(level, y, &mi, a, 1);
            let b = neighbour(level, y, &mi, a, -1);
            let c = level[i];
            let d = match (f, b) {
                (Some(f), Some(b)) => (f - b) / (2.0 * h),
                (Some(f), None) => (f - c) / h,
                (None, Some(b)) => (c - b) / h,
                (None, None) => 0.0,
            };
            acc += d * d;
        }
        acc
    };
    let hn = h.powi(n as i32);
    let nodes: Vec<usize> = (0..g.len())
        .filter(|&i| {
            let mi = g.multi_index(i);
            (0..n).all(|a| mi[a] % stride == stride / 2 % stride.max(1) || stride == 1)
        })
        .collect();
    let parts: Vec<f64> = nodes
        .par_iter()
        .map(|&i| {
            let p = g.point(i);
            let x2: f64 = (0..n).map(|a| p[a].f64().powi(2)).sum();
            if x2 >= r * r {
                return 0.0;
            }
            let top = (r * r - x2).sqrt();
            let mut acc = 0.0;
            let mut gx_lo = grad_x(&levels[0], 0.0, i);
            for k in 0..heights.len() - 1 {
                let (a, b) = (heights[k], heights[k + 1]);
                if a >= top {
                    break;
                }
                let c = b.min(top);
                let gx_hi = grad_x(&levels[k + 1], b, i);
                let du = levels[k + 1][i] - levels[k][i];
                let beta = du / (b.powf(s) - a.powf(s));
                let vertical = s * beta * beta * (c.powf(s) - a.powf(s));
                let weight = (c.powf(2.0 - s) - a.powf(2.0 - s)) / (2.0 - s);
                acc += vertical + 0.5 * (gx_lo + gx_hi) * weight;
                gx_lo = gx_hi;
            }
            acc * hn
        })
        .collect();
    0.5 * ext.d_s.f64() * parts.iter().sum::<f64>()
}

fn potential_quadrature<T: Real>(ext: &ExtensionField<T>, r: f64, w: &Potential<T>, mu: f64, stride: usize) -> f64 {
    let g = ext.base_grid();
    let n = g.dimension();
    let hn = (g.spacing().f64() * stride as f64).powi(n as i32);
    let mut acc = 0.0;
    for i in 0..g.len() {
        let mi = g.multi_index(i);
        if stride > 1 && (0..n).any(|a| mi[a] % stride != stride / 2) {
            continue;
        }
        let p = g.point(i);
        let x2: f64 = (0..n).map(|a| p[a].f64().powi(2)).sum();
        if x2 < r * r {
            acc += w.w(ext.boundary.values[i]).f64();
        }
    }
    mu * acc * hn
}

/// `Ẽ_R(U)` split into its parts, with the bar `|Ẽ_h − Ẽ_{2h}|` from the quadrature on
/// every second node and height.
pub fn extension_energy_parts<T: Real>(
    ext: &ExtensionField<T>,
    r: T,
    w: &Potential<T>,
    epsilon: T,
) -> Result<ExtensionEnergy> {
    let r = r.f64();
    check_radius(ext, r)?;
    let n = ext.base_grid().dimension();
    let s = ext.s.f64();
    let mu = epsilon.f64().powf(-s) / symbol_constant(n, s);
    let dirichlet = dirichlet_quadrature(ext, r, 1);
    let potential = potential_quadrature(ext, r, w, mu, 1);
    let coarse = dirichlet_quadrature(ext, r, 2) + potential_quadrature(ext, r, w, mu, 2);
    Ok(ExtensionEnergy {
        dirichlet,
        potential,
        error_bar: (dirichlet + potential - coarse).abs(),
    })
}

/// `Ẽ_R(U) = (d_s/2) ∫_{B̃_R^+} y^{1−s}|∇U|² + μ ∫_{B_R} W(U(x, 0))`.
pub fn extension_energy<T: Real>(ext: &ExtensionField<T>, r: T, w: &Potential<T>, epsilon: T) -> Result<T> {
    Ok(T::lit(extension_energy_parts(ext, r, w, epsilon)?.total()))
}

/// `Ẽ^Sob_R(U)` over the pair energy of `u` in `B_{2R}` for the kernel `|z|^{−n−s}`.
pub fn extension_sobolev_ratio<T: Real>(ext: &ExtensionField<T>, r: T) -> Result<T> {
    let rf = r.f64();
    check_radius(ext, rf)?;
    let g = ext.base_grid();
    let region = BallRegion::centered(g.dimension(), r + r);
    g.check_region(&region)?;
    let op = NonlocalOperator::new(g, &KernelSpec::perimeter(ext.s))?;
    let pair = op.sobolev_energy(&ext.boundary.values, &g.region_mask(&region)).f64();
    if pair <= 1e-14 {
        return Err(LabError::Degenerate("vanishing pair energy".into()));
    }
    Ok(T::lit(dirichlet_quadrature(ext, rf, 1) / pair))
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct MonotonicityTrace {
    pub radii: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub error_bars: Vec<f64>,
    /// `(k, Φ(R_k) − Φ(R_{k+1}))` for decreases beyond the combined error bars.
    pub violations: Vec<(usize, f64)>,
    /// Set when the boundary field is not a converged solution.
    pub hypothesis_violated: bool,
}

impl MonotonicityTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R,phi,error_bar\n");
        for k in 0..self.radii.len() {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", self.radii[k], self.phi_values[k], self.error_bars[k]));
        }
        out
    }

    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }

    /// `(max Φ − min Φ) / mean Φ`.
    pub fn relative_spread(&self) -> f64 {
        let (lo, hi) = range(&self.phi_values);
        let mean = self.phi_values.iter().sum::<f64>() / self.phi_values.len() as f64;
        (hi - lo) / mean.abs()
    }
}

/// `Φ(R) = R^{s−n} Ẽ_R(U)` over `radii`.
pub fn monotonicity_trace<T: Real>(
    ext: &ExtensionField<T>,
    radii: &[T],
    w: &Potential<T>,
    epsilon: T,
) -> Result<MonotonicityTrace> {
    let radii: Vec<f64> = radii.iter().map(|r| r.f64()).collect();
    if radii.is_empty() || radii.windows(2).any(|p| p[1] <= p[0]) {
        return Err(LabError::Config("radii must be strictly increasing".into()));
    }
    let n = ext.base_grid().dimension() as f64;
    let s = ext.s.f64();
    let mut phi = Vec::with_capacity(radii.len());
    let mut bars = Vec::with_capacity(radii.len());
    for &r in &radii {
        let e = extension_energy_parts(ext, T::lit(r), w, epsilon)?;
        let scale = r.powf(s - n);
        phi.push(e.total() * scale);
        bars.push(e.error_bar * scale);
    }
    let violations = (0..radii.len().saturating_sub(1))
        .filter_map(|k| {
            let drop = phi[k] - phi[k + 1];
            (drop > bars[k] + bars[k + 1]).then_some((k, drop))
        })
        .collect();
    let hypothesis_violated = !solves_equation(&ext.boundary, ext.s, w, epsilon);
    Ok(MonotonicityTrace {
        radii,
        phi_values: phi,
        error_bars: bars,
        violations,
        hypothesis_violated,
    })
}

fn solves_equation<T: Real>(u: &ScalarField<T>, s: T, w: &Potential<T>, epsilon: T) -> bool {
    if w.audit(64).pass && u.values.iter().any(|v| w.w(*v) < T::zero()) {
        return false;
    }
    match crate::energy::EnergyModel::new(&u.grid, &KernelSpec::fractional(s), w, epsilon) {
        Ok(model) => model.residual(&u.values).iter().all(|r| r.abs() <= T::lit(1e-4)),
        Err(_) => false,
    }
}
