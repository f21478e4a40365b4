//! Nonlocal operators `L_K`, the spectral fractional Laplacian and the classical Laplacian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{LabError, Result};
use crate::fft::{apply_multiplier, freq_index, Convolver};
use crate::field::{BoundaryModel, ExteriorConstant, Grid, ScalarField};
use crate::quad::{gamma, graded_rule};
use crate::scalar::Real;

/// Radial factor `a(r)` in `K(z) = (2 − s) a(|z|) |z|^{−n−s}`.
#[derive(Clone, Debug, PartialEq)]
pub enum RadialProfile<T> {
    Constant(T),
    /// `a(r) = (λ+Λ)/2 + (Λ−λ)/2 · cos(log r)`.
    LogOscillation { lambda: T, big_lambda: T },
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelKind<T> {
    Fractional,
    GeneralL2(RadialProfile<T>),
    Classical,
}

/// Interaction kernel with its order and ellipticity constants.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec<T> {
    pub kind: KernelKind<T>,
    pub s: T,
    pub lambda: T,
    pub big_lambda: T,
}

impl<T: Real> KernelSpec<T> {
    /// `K(z) = (2 − s)|z|^{−n−s}`.
    pub fn fractional(s: T) -> Self {
        KernelSpec {
            kind: KernelKind::Fractional,
            s,
            lambda: T::one(),
            big_lambda: T::one(),
        }
    }

    pub fn general_l2(s: T, profile: RadialProfile<T>) -> Self {
        let (lambda, big_lambda) = match &profile {
            RadialProfile::Constant(c) => (*c, *c),
            RadialProfile::LogOscillation { lambda, big_lambda } => (*lambda, *big_lambda),
        };
        KernelSpec {
            kind: KernelKind::GeneralL2(profile),
            s,
            lambda,
            big_lambda,
        }
    }

    /// `|z|^{−n−s}`, the kernel of the fractional perimeter.
    pub fn perimeter(s: T) -> Self {
        Self::general_l2(s, RadialProfile::Constant(T::one() / (T::lit(2.0) - s)))
    }

    /// `−Δ`.
    pub fn classical() -> Self {
        KernelSpec {
            kind: KernelKind::Classical,
            s: T::lit(2.0),
            lambda: T::one(),
            big_lambda: T::one(),
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(self.kind, KernelKind::Classical)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.s.f64();
        if self.is_classical() {
            return Ok(());
        }
        if !(s > 0.0 && s < 2.0) {
            return Err(LabError::Config(format!("kernel order s = {s} outside (0, 2)")));
        }
        if !(self.lambda > T::zero() && self.lambda <= self.big_lambda) {
            return Err(LabError::Config("need 0 < λ ≤ Λ".into()));
        }
        Ok(())
    }

    /// `(α, β)` with `a(r) = α + β cos(log r)`.
    fn profile_ab(&self) -> (f64, f64) {
        match &self.kind {
            KernelKind::GeneralL2(RadialProfile::Constant(c)) => (c.f64(), 0.0),
            KernelKind::GeneralL2(RadialProfile::LogOscillation { lambda, big_lambda }) => {
                let (l, u) = (lambda.f64(), big_lambda.f64());
                (0.5 * (l + u), 0.5 * (u - l))
            }
            _ => (1.0, 0.0),
        }
    }

    /// `K` at distance `r` in dimension `n`.
    pub fn radial(&self, n: usize, r: f64) -> f64 {
        let s = self.s.f64();
        let (a, b) = self.profile_ab();
        let prof = if b == 0.0 { a } else { a + b * r.ln().cos() };
        (2.0 - s) * prof * r.powf(-(n as f64) - s)
    }

    /// `∫_{r1}^{r2} K(r) r^{n−1} dr` (the same for every `n`); `r2` may be infinite.
    pub fn radial_tail(&self, r1: f64, r2: f64) -> f64 {
        let s = self.s.f64();
        let (a, b) = self.profile_ab();
        let prim = |r: f64| -> f64 {
            if r.is_infinite() {
                return 0.0;
            }
            let e = r.powf(-s);
            let mut v = -a * e / s;
            if b != 0.0 {
                let t = r.ln();
                v += b * e * (t.sin() - s * t.cos()) / (1.0 + s * s);
            }
            v
        };
        (2.0 - s) * (prim(r2) - prim(r1))
    }

    /// `∫_0^ρ K(r) r^{n+1} dr`.
    pub fn radial_moment(&self, rho: f64) -> f64 {
        let s = self.s.f64();
        let (a, b) = self.profile_ab();
        let p = 2.0 - s;
        let e = rho.powf(p);
        let mut v = a * e / p;
        if b != 0.0 {
            let t = rho.ln();
            v += b * e * (p * t.cos() + t.sin()) / (p * p + 1.0);
        }
        p * v
    }
}

/// `K(z)`.
pub fn kernel_value<T: Real>(spec: &KernelSpec<T>, z: &[T]) -> Result<T> {
    if spec.is_classical() {
        return Err(LabError::Config("the classical kind has no integral kernel".into()));
    }
    let r = z.iter().map(|v| v.f64() * v.f64()).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(LabError::Singularity);
    }
    Ok(T::lit(spec.radial(z.len(), r)))
}

/// Symbol constant `κ_n(s)`: `L_K e^{iξ·x} = κ_n(s)|ξ|^s e^{iξ·x}` for the fractional kernel.
pub fn symbol_constant(n: usize, s: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let one_d = (2.0 - s) * pi / (gamma(1.0 + s) * (0.5 * pi * s).sin());
    let project = pi.powf(0.5 * (n as f64 - 1.0)) * gamma(0.5 * (1.0 + s)) / gamma(0.5 * (n as f64 + s));
    one_d * project
}

/// Factor turning the `n`-dimensional fractional kernel into its restriction to lines:
/// a profile `φ(e·x)` satisfies `L_K φ(e·x) = (L_{C_n K_1} φ)(e·x)`.
pub fn line_projection_factor(n: usize, s: f64) -> f64 {
    let pi = std::f64::consts::PI;
    pi.powf(0.5 * (n as f64 - 1.0)) * gamma(0.5 * (1.0 + s)) / gamma(0.5 * (n as f64 + s))
}

/// Scale `ε_*` with `ε_*^{−s} = κ_n(s)`, for which transition layers have unit width.
pub fn unit_width_epsilon(n: usize, s: f64) -> f64 {
    symbol_constant(n, s).powf(-1.0 / s)
}

/// Visits directions `ω` from `x` through the faces of `[-L, L]^n`, passing the
/// exit distance `ρ(ω)` and the quadrature weight of `dω`.
fn for_each_direction(
    n: usize,
    x: &[f64],
    l: f64,
    resolution: (usize, f64),
    f: &mut dyn FnMut(f64, &[f64], f64),
) {
    let (q, min_first) = resolution;
    let mut omega = [0.0f64; 3];
    for axis in 0..n {
        for &side in &[-1.0f64, 1.0] {
            let d = l - side * x[axis];
            if d <= 0.0 {
                continue;
            }
            let others: Vec<usize> = (0..n).filter(|&b| b != axis).collect();
            let mut rules: Vec<Vec<(f64, f64)>> = Vec::new();
            for &b in &others {
                let mut r = Vec::new();
                let first = (0.5 * d).max(min_first);
                graded_rule(x[b], l, first, q, &mut r);
                graded_rule(x[b], -l, first, q, &mut r);
                rules.push(r);
            }
            let mut visit = |pts: &[(f64, f64)]| {
                let mut rho2 = d * d;
                let mut w = 1.0;
                omega[axis] = side * d;
                for (k, &b) in others.iter().enumerate() {
                    let off = pts[k].0 - x[b];
                    omega[b] = off;
                    rho2 += off * off;
                    w *= pts[k].1;
                }
                let rho = rho2.sqrt();
                for v in omega.iter_mut().take(n) {
                    *v /= rho;
                }
                f(rho, &omega[..n], w * d / rho.powi(n as i32));
            };
            match others.len() {
                0 => visit(&[]),
                1 => {
                    for p in &rules[0] {
                        visit(&[*p]);
                    }
                }
                _ => {
                    for p in &rules[0] {
                        for r in &rules[1] {
                            visit(&[*p, *r]);
                        }
                    }
                }
            }
        }
    }
}

fn face_resolution(n: usize, h: f64) -> (usize, f64) {
    match n {
        1 => (1, h),
        2 => (5, 0.02 * h),
        _ => (3, 0.25 * h),
    }
}

/// `∫_{cube} |z|² K / n` over `[-w, w]^n`, i.e. `∫ z_1² K`.
fn cube_second_moment<T: Real>(spec: &KernelSpec<T>, n: usize, w: f64) -> f64 {
    let mut acc = 0.0;
    for_each_direction(n, &[0.0; 3][..n], w, (8, 0.05 * w), &mut |rho, _, wt| {
        acc += wt * spec.radial_moment(rho);
    });
    acc / n as f64
}

/// `∫ K` over the complement of `[-w, w]^n`.
fn outside_cube_mass<T: Real>(spec: &KernelSpec<T>, n: usize, w: f64) -> f64 {
    let mut acc = 0.0;
    for_each_direction(n, &[0.0; 3][..n], w, (8, 0.05 * w), &mut |rho, _, wt| {
        acc += wt * spec.radial_tail(rho, f64::INFINITY);
    });
    acc
}

/// Extra weight put on each axis-neighbour pair so that the lattice reproduces the
/// second moment of `K` on a window of `m` cells.
fn moment_correction<T: Real>(spec: &KernelSpec<T>, n: usize, h: f64, m: usize) -> f64 {
    let m = m as isize;
    let mut lattice = 0.0;
    let hn = h.powi(n as i32);
    let side = (2 * m + 1) as usize;
    let count = side.pow(n as u32);
    for idx in 0..count {
        let mut r = idx;
        let mut d2 = 0.0;
        let mut d0 = 0.0;
        for a in 0..n {
            let d = (r % side) as isize - m;
            r /= side;
            d2 += (d * d) as f64;
            if a == 0 {
                d0 = d as f64;
            }
        }
        if d2 == 0.0 {
            continue;
        }
        let rr = d2.sqrt() * h;
        lattice += hn * spec.radial(n, rr) * d0 * d0 * h * h;
    }
    let exact = cube_second_moment(spec, n, (m as f64 + 0.5) * h);
    (exact - lattice) / (2.0 * h * h)
}

fn correction_window(n: usize, per_axis: usize) -> usize {
    let cap = match n {
        1 => 4096,
        2 => 48,
        _ => 12,
    };
    (per_axis.max(2) - 1).min(cap)
}

/// Exterior couplings `(T⁺_i, T⁻_i)`: `∫ K(x_i − y) dy` over exterior points carrying
/// the value `plus` and `minus` respectively.
fn exterior_tails<T: Real>(
    grid: &Grid<T>,
    spec: &KernelSpec<T>,
    ext: &ExteriorConstant<T>,
) -> Vec<(f64, f64)> {
    exterior_split(grid, ext, &|a, b| spec.radial_tail(a, b))
}

/// Splits `∫_{ext} k(x_i − y) dy` by exterior value for a radial kernel given through
/// `radial(a, b) = ∫_a^b k(ρ) ρ^{n−1} dρ`.
pub(crate) fn exterior_split<T: Real>(
    grid: &Grid<T>,
    ext: &ExteriorConstant<T>,
    radial: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> Vec<(f64, f64)> {
    let n = grid.dimension();
    let l = grid.box_radius().f64();
    let h = grid.spacing().f64();
    let planes: Vec<(Vec<f64>, f64)> = ext
        .planes
        .iter()
        .map(|p| (p.normal.iter().map(|v| v.f64()).collect(), p.offset.f64()))
        .collect();
    let res = face_resolution(n, h);
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let p = grid.point(i);
            let x: Vec<f64> = (0..n).map(|a| p[a].f64()).collect();
            let xn: Vec<f64> = planes
                .iter()
                .map(|(nv, o)| nv.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - o)
                .collect();
            let mut plus = 0.0;
            let mut minus = 0.0;
            let mut cuts: Vec<f64> = Vec::with_capacity(planes.len() + 2);
            for_each_direction(n, &x, l, res, &mut |rho, omega, wt| {
                cuts.clear();
                cuts.push(rho);
                let mut dens = [0.0f64; 4];
                for (k, (nv, _)) in planes.iter().enumerate() {
                    let den: f64 = nv.iter().zip(omega).map(|(a, b)| a * b).sum();
                    dens[k.min(3)] = den;
                    if den.abs() > 1e-14 {
                        let t = -xn[k] / den;
                        if t > rho {
                            cuts.push(t);
                        }
                    }
                }
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                cuts.push(f64::INFINITY);
                for w in cuts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if b <= a {
                        continue;
                    }
                    let mid = if b.is_infinite() { 2.0 * a + 1.0 } else { 0.5 * (a + b) };
                    let mut pos = true;
                    for (k, (nv, _)) in planes.iter().enumerate() {
                        let den = if k < 4 {
                            dens[k]
                        } else {
                            nv.iter().zip(omega).map(|(a, b)| a * b).sum()
                        };
                        if xn[k] + mid * den < 0.0 {
                            pos = !pos;
                        }
                    }
                    let v = wt * radial(a, b);
                    if pos {
                        plus += v;
                    } else {
                        minus += v;
                    }
                }
            });
            (plus, minus)
        })
        .collect()
}

struct Coupling<T> {
    plus_w: Vec<T>,
    minus_w: Vec<T>,
    plus: T,
    minus: T,
}

/// Discrete nonlocal operator: the exact gradient (per `h^n`) of the discrete energy
/// `¼ Σ_{i,j} h^n κ_{ij} (u_i − u_j)² + ½ Σ_i h^n [T⁺_i (u_i − v⁺)² + T⁻_i (u_i − v⁻)²]`.
pub struct NonlocalOperator<T: Real> {
    grid: Grid<T>,
    spec: KernelSpec<T>,
    extra: T,
    conv: Convolver<T>,
    free: Option<Convolver<T>>,
    row_sum: Vec<T>,
    coupling: Option<Coupling<T>>,
    diag: Vec<T>,
}

impl<T: Real> NonlocalOperator<T> {
    pub fn new(grid: &Grid<T>, spec: &KernelSpec<T>) -> Result<Self> {
        spec.validate()?;
        if spec.is_classical() {
            return Err(LabError::Config("classical kind has no nonlocal operator".into()));
        }
        let n = grid.dimension();
        let m = grid.per_axis();
        let h = grid.spacing().f64();
        let hn = h.powi(n as i32);
        let extra = moment_correction(spec, n, h, correction_window(n, m));
        let free_weight = move |d: &[isize]| -> T {
            let d2: isize = d.iter().map(|v| v * v).sum();
            if d2 == 0 {
                return T::zero();
            }
            let mut w = hn * spec.radial(n, (d2 as f64).sqrt() * h);
            if d2 == 1 {
                w += extra;
            }
            T::lit(w)
        };
        match grid.boundary() {
            BoundaryModel::ExteriorField => Err(LabError::MissingExterior),
            BoundaryModel::ExteriorConstant(ext) => {
                let conv = Convolver::new(n, m, 2 * m, &free_weight);
                let ones = vec![T::one(); grid.len()];
                let row_sum = conv.apply(&ones);
                let mut tails = exterior_tails(grid, spec, ext);
                for (i, t) in tails.iter_mut().enumerate() {
                    let mi = grid.multi_index(i);
                    for a in 0..n {
                        for (edge, step) in [(0usize, -1isize), (m - 1, 1)] {
                            if mi[a] != edge {
                                continue;
                            }
                            let mut y = [T::zero(); 3];
                            let p = grid.point(i);
                            y[..n].copy_from_slice(&p[..n]);
                            y[a] += T::from_isize(step).unwrap() * grid.spacing();
                            if ext.is_plus(&y[..n]) {
                                t.0 += extra;
                            } else {
                                t.1 += extra;
                            }
                        }
                    }
                }
                let plus_w: Vec<T> = tails.iter().map(|t| T::lit(t.0)).collect();
                let minus_w: Vec<T> = tails.iter().map(|t| T::lit(t.1)).collect();
                let diag = (0..grid.len())
                    .map(|i| row_sum[i] + plus_w[i] + minus_w[i])
                    .collect();
                Ok(NonlocalOperator {
                    grid: grid.clone(),
                    spec: spec.clone(),
                    extra: T::lit(extra),
                    conv,
                    free: None,
                    row_sum,
                    coupling: Some(Coupling {
                        plus_w,
                        minus_w,
                        plus: ext.plus,
                        minus: ext.minus,
                    }),
                    diag,
                })
            }
            BoundaryModel::Periodic => {
                let images: isize = match n {
                    1 => 64,
                    2 => 4,
                    _ => 1,
                };
                let period = 2.0 * grid.box_radius().f64();
                let far = hn / period.powi(n as i32)
                    * outside_cube_mass(spec, n, (images as f64 + 0.5) * period);
                let mi = m as isize;
                let side = (2 * images + 1) as usize;
                let count = side.pow(n as u32);
                let per_weight = move |d: &[isize]| -> T {
                    let mut w = far;
                    for idx in 0..count {
                        let mut r = idx;
                        let mut d2 = 0.0;
                        for a in 0..n {
                            let img = (r % side) as isize - images;
                            r /= side;
                            let v = (d[a] + img * mi) as f64;
                            d2 += v * v;
                        }
                        if d2 > 0.0 {
                            w += hn * spec.radial(n, d2.sqrt() * h);
                        }
                    }
                    let near: isize = d
                        .iter()
                        .map(|v| {
                            let r = v.rem_euclid(mi);
                            r.min(mi - r).pow(2)
                        })
                        .sum();
                    if near == 1 {
                        w += extra;
                    }
                    if d.iter().all(|v| v.rem_euclid(mi) == 0) {
                        return T::zero();
                    }
                    T::lit(w)
                };
                let conv = Convolver::new(n, m, m, per_weight);
                let free = Convolver::new(n, m, 2 * m, &free_weight);
                let ones = vec![T::one(); grid.len()];
                let row_sum = conv.apply(&ones);
                Ok(NonlocalOperator {
                    grid: grid.clone(),
                    spec: spec.clone(),
                    extra: T::lit(extra),
                    conv,
                    free: Some(free),
                    diag: row_sum.clone(),
                    row_sum,
                    coupling: None,
                })
            }
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn spec(&self) -> &KernelSpec<T> {
        &self.spec
    }

    /// Free-space pair weight `κ(d)` for a lattice offset `d` (includes `h^n`).
    pub fn weight(&self, d: &[isize]) -> T {
        let n = self.grid.dimension();
        let h = self.grid.spacing().f64();
        let d2: isize = d.iter().map(|v| v * v).sum();
        if d2 == 0 {
            return T::zero();
        }
        let mut w = T::lit(h.powi(n as i32) * self.spec.radial(n, (d2 as f64).sqrt() * h));
        if d2 == 1 {
            w += self.extra;
        }
        w
    }

    /// Diagonal of the homogeneous operator.
    pub fn diagonal(&self) -> &[T] {
        &self.diag
    }

    /// Exterior couplings `(T⁺, T⁻, v⁺, v⁻)` for exterior-constant grids.
    pub fn exterior_coupling(&self) -> Option<(&[T], &[T], T, T)> {
        self.coupling
            .as_ref()
            .map(|c| (&c.plus_w[..], &c.minus_w[..], c.plus, c.minus))
    }

    /// `κ * v` (circular for periodic grids).
    pub fn convolve(&self, v: &[T]) -> Vec<T> {
        self.conv.apply(v)
    }

    /// `κ^{free} * v`: the linear (non-wrapping) convolution on every grid.
    pub fn convolve_interior(&self, v: &[T]) -> Vec<T> {
        self.free.as_ref().unwrap_or(&self.conv).apply(v)
    }

    /// `L u` including the exterior data.
    pub fn apply_values(&self, u: &[T]) -> Vec<T> {
        let ku = self.conv.apply(u);
        let mut out: Vec<T> = (0..u.len()).map(|i| self.diag[i] * u[i] - ku[i]).collect();
        if let Some(c) = &self.coupling {
            for i in 0..u.len() {
                out[i] -= c.plus_w[i] * c.plus + c.minus_w[i] * c.minus;
            }
        }
        out
    }

    /// `L ξ` for a perturbation that vanishes outside the box.
    pub fn apply_homogeneous(&self, xi: &[T]) -> Vec<T> {
        let k = self.conv.apply(xi);
        (0..xi.len()).map(|i| self.diag[i] * xi[i] - k[i]).collect()
    }

    pub fn apply(&self, u: &ScalarField<T>) -> Result<ScalarField<T>> {
        if !u.grid.same_nodes(&self.grid) {
            return Err(LabError::GridMismatch("operator grid".into()));
        }
        ScalarField::new(u.grid.clone(), self.apply_values(&u.values))
    }

    /// Fourier multipliers of a periodic operator, in FFT order.
    pub fn multipliers(&self) -> Option<Vec<T>> {
        if self.coupling.is_some() {
            return None;
        }
        let khat = self.conv.multipliers();
        let r = self.row_sum[0];
        Some(khat.iter().map(|k| r - *k).collect())
    }

    /// `Σ_{i∈mask} q_i` with `q_i = Σ_j κ_{ij} (u_i − u_j)²`, `j` over all nodes
    /// (periodically continued when periodic).
    fn full_row_energy(&self, u: &[T], mask: &[bool]) -> T {
        let u2: Vec<T> = u.iter().map(|v| *v * *v).collect();
        let c = self.conv.apply_many(&[u, &u2]);
        let mut s = T::zero();
        for i in 0..u.len() {
            if mask[i] {
                s += u2[i] * self.row_sum[i] - T::lit(2.0) * u[i] * c[0][i] + c[1][i];
            }
        }
        s
    }

    /// `Σ_{i,j∈mask} κ^{free}_{ij} (u_i − u_j)²`.
    pub fn interior_pair_sum(&self, u: &[T], mask: &[bool]) -> T {
        let conv = self.free.as_ref().unwrap_or(&self.conv);
        let chi: Vec<T> = mask.iter().map(|b| if *b { T::one() } else { T::zero() }).collect();
        let cu: Vec<T> = u.iter().zip(&chi).map(|(a, b)| *a * *b).collect();
        let cu2: Vec<T> = u.iter().zip(&chi).map(|(a, b)| *a * *a * *b).collect();
        let c = conv.apply_many(&[&chi, &cu, &cu2]);
        let mut s = T::zero();
        for i in 0..u.len() {
            if mask[i] {
                s += u[i] * u[i] * c[0][i] - T::lit(2.0) * u[i] * c[1][i] + c[2][i];
            }
        }
        s
    }

    /// Discrete `E^Sob_Ω`: pairs with at least one node in `mask`, plus exterior tails.
    pub fn sobolev_energy(&self, u_raw: &[T], mask: &[bool]) -> T {
        let all = mask.iter().all(|b| *b);
        // pair terms only see differences; centring limits cancellation
        let mean = u_raw.iter().copied().sum::<T>() / T::of(u_raw.len().max(1));
        let centred: Vec<T> = u_raw.iter().map(|v| *v - mean).collect();
        let u = &centred[..];
        let full = self.full_row_energy(u, mask);
        let inner = if all && self.free.is_none() {
            full
        } else {
            self.interior_pair_sum(u, mask)
        };
        let two = T::lit(2.0);
        let mut e = (two * full - inner) / T::lit(4.0);
        if all && self.free.is_some() {
            // whole periodic cell: energy per period
            e = full / T::lit(4.0);
        }
        if let Some(c) = &self.coupling {
            let mut t = T::zero();
            for i in 0..u.len() {
                if mask[i] {
                    let a = u_raw[i] - c.plus;
                    let b = u_raw[i] - c.minus;
                    t += c.plus_w[i] * a * a + c.minus_w[i] * b * b;
                }
            }
            e += t / two;
        }
        e * self.grid.cell_volume()
    }

    /// `½ h^n Σ_{i,j} κ_{ij}(ξ_i − ξ_j)² + h^n Σ_i (T⁺_i+T⁻_i) ξ_i²` for `ξ = 0` outside the box,
    /// which equals `⟨L ξ, ξ⟩`.
    pub fn quadratic_form(&self, xi: &[T]) -> T {
        let l = self.apply_homogeneous(xi);
        l.iter().zip(xi).map(|(a, b)| *a * *b).sum::<T>() * self.grid.cell_volume()
    }
}

/// Second-order `−Δ` stencil with ghost values from the boundary model.
pub fn apply_laplacian<T: Real>(u: &ScalarField<T>) -> Result<ScalarField<T>> {
    let g = &u.grid;
    if matches!(g.boundary(), BoundaryModel::ExteriorField) {
        return Err(LabError::IncompleteStencil);
    }
    let n = g.dimension();
    let h2 = g.spacing() * g.spacing();
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let mi = g.multi_index(i);
        let mut acc = T::zero();
        for a in 0..n {
            for step in [-1isize, 1] {
                let mut p = [0isize; 3];
                for b in 0..n {
                    p[b] = mi[b] as isize;
                }
                p[a] += step;
                acc += u.values[i] - u.ghost_value(&p[..n])?;
            }
        }
        out.push(acc / h2);
    }
    ScalarField::new(g.clone(), out)
}

/// Either a nonlocal operator or the classical Laplacian, sharing one interface.
pub enum DiscreteOperator<T: Real> {
    Nonlocal(NonlocalOperator<T>),
    Classical(Grid<T>),
}

impl<T: Real> DiscreteOperator<T> {
    pub fn new(grid: &Grid<T>, spec: &KernelSpec<T>) -> Result<Self> {
        if spec.is_classical() {
            if matches!(grid.boundary(), BoundaryModel::ExteriorField) {
                return Err(LabError::IncompleteStencil);
            }
            Ok(DiscreteOperator::Classical(grid.clone()))
        } else {
            Ok(DiscreteOperator::Nonlocal(NonlocalOperator::new(grid, spec)?))
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        match self {
            DiscreteOperator::Nonlocal(op) => op.grid(),
            DiscreteOperator::Classical(g) => g,
        }
    }

    pub fn apply_values(&self, u: &[T]) -> Vec<T> {
        match self {
            DiscreteOperator::Nonlocal(op) => op.apply_values(u),
            DiscreteOperator::Classical(g) => {
                let f = ScalarField::new(g.clone(), u.to_vec()).expect("length");
                apply_laplacian(&f).expect("stencil").values
            }
        }
    }

    pub fn apply_homogeneous(&self, xi: &[T]) -> Vec<T> {
        match self {
            DiscreteOperator::Nonlocal(op) => op.apply_homogeneous(xi),
            DiscreteOperator::Classical(g) => {
                let zero = g
                    .with_boundary(BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(
                        g.dimension(),
                        T::zero(),
                    )))
                    .expect("grid");
                let grid = if g.is_periodic() { g.clone() } else { zero };
                let f = ScalarField::new(grid, xi.to_vec()).expect("length");
                apply_laplacian(&f).expect("stencil").values
            }
        }
    }

    /// Diagonal entries of the homogeneous operator.
    pub fn diagonal(&self) -> Vec<T> {
        match self {
            DiscreteOperator::Nonlocal(op) => op.diagonal().to_vec(),
            DiscreteOperator::Classical(g) => {
                let h2 = g.spacing() * g.spacing();
                vec![T::lit(2.0 * g.dimension() as f64) / h2; g.len()]
            }
        }
    }

    /// Localised Sobolev energy on the nodes flagged by `mask`.
    pub fn sobolev_energy(&self, u: &[T], mask: &[bool]) -> Result<T> {
        match self {
            DiscreteOperator::Nonlocal(op) => Ok(op.sobolev_energy(u, mask)),
            DiscreteOperator::Classical(g) => {
                let f = ScalarField::new(g.clone(), u.to_vec())?;
                let n = g.dimension();
                let m = g.per_axis() as isize;
                let mut s = T::zero();
                for i in 0..g.len() {
                    let mi = g.multi_index(i);
                    for a in 0..n {
                        for step in [-1isize, 1] {
                            let mut p = [0isize; 3];
                            for b in 0..n {
                                p[b] = mi[b] as isize;
                            }
                            p[a] += step;
                            let inside = (0..m).contains(&p[a]);
                            let j_in = if inside || g.is_periodic() {
                                let mut q = [0usize; 3];
                                for b in 0..n {
                                    q[b] = p[b].rem_euclid(m) as usize;
                                }
                                mask[g.linear_index(&q[..n])]
                            } else {
                                false
                            };
                            if mask[i] || j_in {
                                let d = u[i] - f.ghost_value(&p[..n])?;
                                // ordered pair (i, j); exterior partners count twice
                                let mult = if inside || g.is_periodic() { 1.0 } else { 2.0 };
                                s += T::lit(mult) * d * d;
                            }
                        }
                    }
                }
                let h = g.spacing();
                Ok(s / T::lit(4.0) * g.cell_volume() / (h * h))
            }
        }
    }

    pub fn as_nonlocal(&self) -> Option<&NonlocalOperator<T>> {
        match self {
            DiscreteOperator::Nonlocal(op) => Some(op),
            DiscreteOperator::Classical(_) => None,
        }
    }
}

/// Principal-value quadrature of `L_K u` at every node.
pub fn apply_lk_quadrature<T: Real>(u: &ScalarField<T>, spec: &KernelSpec<T>) -> Result<ScalarField<T>> {
    NonlocalOperator::new(&u.grid, spec)?.apply(u)
}

/// Fourier-multiplier route `c(n,s)|ξ|^s` on periodic grids.
pub struct SpectralOperator<T: Real> {
    grid: Grid<T>,
    s: T,
    constant: T,
    multiplier: Vec<T>,
}

impl<T: Real> SpectralOperator<T> {
    pub fn with_constant(grid: &Grid<T>, s: T, constant: T) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(LabError::NotPeriodic("spectral route needs a periodic grid".into()));
        }
        let n = grid.dimension();
        let m = grid.per_axis();
        let period = T::lit(2.0) * grid.box_radius();
        let base = T::lit(2.0) * T::PI() / period;
        let multiplier = (0..grid.len())
            .map(|idx| {
                let mut r = idx;
                let mut k2 = T::zero();
                for _ in 0..n {
                    let k = T::from_isize(freq_index(r % m, m)).unwrap() * base;
                    r /= m;
                    k2 += k * k;
                }
                constant * k2.sqrt().powf(s)
            })
            .collect();
        Ok(SpectralOperator {
            grid: grid.clone(),
            s,
            constant,
            multiplier,
        })
    }

    /// Calibrates `c(n,s)` on the mode `cos(2π x₁ / P)` against the quadrature route.
    pub fn calibrated(grid: &Grid<T>, s: T) -> Result<Self> {
        if !grid.is_periodic() {
            return Err(LabError::NotPeriodic("spectral route needs a periodic grid".into()));
        }
        let op = NonlocalOperator::new(grid, &KernelSpec::fractional(s))?;
        let period = T::lit(2.0) * grid.box_radius();
        let k = T::lit(2.0) * T::PI() / period;
        let e = ScalarField::from_fn(grid, |x| (k * x[0]).cos());
        let le = op.apply(&e)?;
        let eig = le.dot(&e) / e.dot(&e);
        Self::with_constant(grid, s, eig / k.powf(s))
    }

    pub fn constant(&self) -> T {
        self.constant
    }

    pub fn order(&self) -> T {
        self.s
    }

    pub fn multipliers(&self) -> &[T] {
        &self.multiplier
    }

    pub fn apply_values(&self, u: &[T]) -> Vec<T> {
        let mut planner = FftPlanner::new();
        apply_multiplier(u, self.grid.per_axis(), self.grid.dimension(), &self.multiplier, &mut planner)
    }

    pub fn apply(&self, u: &ScalarField<T>) -> Result<ScalarField<T>> {
        if !u.grid.same_nodes(&self.grid) {
            return Err(LabError::GridMismatch("spectral grid".into()));
        }
        ScalarField::new(u.grid.clone(), self.apply_values(&u.values))
    }
}

/// Spectral fractional Laplacian with the calibrated constant.
pub fn apply_fraclap_spectral<T: Real>(u: &ScalarField<T>, s: T) -> Result<ScalarField<T>> {
    SpectralOperator::calibrated(&u.grid, s)?.apply(u)
}

/// Outcome of the spectral/quadrature cross-check.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ConsistencyReport {
    pub s: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Calibrated spectral constant `c(n,s)`.
    pub calibrated_constant: f64,
    /// Closed-form symbol constant of the continuum kernel.
    pub analytic_constant: f64,
}

/// Relative sup-norm discrepancy between the spectral and quadrature routes.
pub fn operator_consistency<T: Real>(u: &ScalarField<T>, s: T, tolerance: T) -> Result<ConsistencyReport> {
    let quad = apply_lk_quadrature(u, &KernelSpec::fractional(s))?;
    let spec_op = SpectralOperator::calibrated(&u.grid, s)?;
    let spec = spec_op.apply(u)?;
    let scale = quad.sup_norm().f64();
    let diff = quad
        .values
        .iter()
        .zip(&spec.values)
        .fold(0.0f64, |m, (a, b)| m.max((a.f64() - b.f64()).abs()));
    let discrepancy = if scale > 1e-300 { diff / scale } else { diff };
    Ok(ConsistencyReport {
        s: s.f64(),
        discrepancy,
        tolerance: tolerance.f64(),
        pass: discrepancy <= tolerance.f64(),
        calibrated_constant: spec_op.constant().f64(),
        analytic_constant: symbol_constant(u.grid.dimension(), s.f64()),
    })
}

/// Result of sampling the kernel bounds.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct KernelAudit {
    pub samples: usize,
    /// Largest violation of `(2−s)λ|z|^{−n−s} ≤ K(z) ≤ (2−s)Λ|z|^{−n−s}`, relative.
    pub ellipticity_violation: f64,
    /// Largest `|K(z) − K(−z)| / K(z)`.
    pub symmetry_violation: f64,
    /// Largest ratio `max(|z||∂_e K|, |z|²|∂_ee K|) / ((2−s)Λ|z|^{−n−s})`.
    pub derivative_ratio: f64,
    /// Constant used for the derivative bound.
    pub derivative_constant: f64,
    pub pass: bool,
}

/// Samples the kernel on log-spaced radii and random directions.
pub fn kernel_audit<T: Real>(spec: &KernelSpec<T>, n: usize, samples: usize, seed: u64) -> Result<KernelAudit> {
    spec.validate()?;
    if spec.is_classical() {
        return Err(LabError::Config("classical kind has no kernel to audit".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = spec.s.f64();
    let (lam, big) = (spec.lambda.f64(), spec.big_lambda.f64());
    let p = n as f64 + s;
    let lambda2 = (p + 1.0) * (p + 2.0) * big;
    let mut ell = 0.0f64;
    let mut sym = 0.0f64;
    let mut der = 0.0f64;
    let k = |z: &[f64]| spec.radial(n, z.iter().map(|v| v * v).sum::<f64>().sqrt());
    for j in 0..samples {
        let r = 10f64.powf(-3.0 + 6.0 * (j as f64 + 0.5) / samples as f64);
        let mut dir = [0.0f64; 3];
        let mut e = [0.0f64; 3];
        loop {
            let mut nn = 0.0;
            for a in 0..n {
                dir[a] = rng.gen_range(-1.0..1.0);
                e[a] = rng.gen_range(-1.0..1.0);
                nn += dir[a] * dir[a];
            }
            if nn > 1e-4 {
                let nn = nn.sqrt();
                for v in dir.iter_mut().take(n) {
                    *v /= nn;
                }
                break;
            }
        }
        let en = e[..n].iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in e.iter_mut().take(n) {
            *v /= en;
        }
        let z: Vec<f64> = dir[..n].iter().map(|v| v * r).collect();
        let mz: Vec<f64> = z.iter().map(|v| -v).collect();
        let kz = k(&z);
        let base = (2.0 - s) * r.powf(-p);
        ell = ell.max((lam * base - kz) / base).max((kz - big * base) / base);
        sym = sym.max((kz - k(&mz)).abs() / kz);
        let step = 1e-4 * r;
        let shift = |t: f64| -> Vec<f64> { z.iter().zip(&e[..n]).map(|(a, b)| a + t * b).collect() };
        let d1 = (k(&shift(step)) - k(&shift(-step))) / (2.0 * step);
        let d2 = (k(&shift(step)) - 2.0 * kz + k(&shift(-step))) / (step * step);
        let bound = (r * d1.abs()).max(r * r * d2.abs()) / (base * big);
        der = der.max(bound);
    }
    let tol = 1e-9;
    Ok(KernelAudit {
        samples,
        ellipticity_violation: ell,
        symmetry_violation: sym,
        derivative_ratio: der,
        derivative_constant: lambda2 / big,
        pass: ell <= tol && sym <= tol && der <= lambda2 / big * (1.0 + 1e-4),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_grid;

    #[test]
    fn kernel_value_examples() {
        let k1 = KernelSpec::<f64>::fractional(1.0);
        assert!((kernel_value(&k1, &[2.0]).unwrap() - 0.25).abs() < 1e-15);
        let k = KernelSpec::<f64>::fractional(0.5);
        assert!((kernel_value(&k, &[1.0]).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(kernel_value(&k, &[0.0, 0.0]), Err(LabError::Singularity));
        let z = [0.3, -1.7];
        let mz = [-0.3, 1.7];
        assert_eq!(kernel_value(&k, &z).unwrap(), kernel_value(&k, &mz).unwrap());
    }

    #[test]
    fn radial_integrals_match_numerics() {
        let spec = KernelSpec::<f64>::general_l2(
            0.6,
            RadialProfile::LogOscillation {
                lambda: 0.5,
                big_lambda: 2.0,
            },
        );
        let (a, b) = (0.3f64, 7.0f64);
        let steps = 200_000;
        let mut num = 0.0;
        let mut mom = 0.0;
        for k in 0..steps {
            let t = a.ln() + (b.ln() - a.ln()) * (k as f64 + 0.5) / steps as f64;
            let r = t.exp();
            let dr = r * (b.ln() - a.ln()) / steps as f64;
            num += spec.radial(1, r) * dr;
            mom += spec.radial(1, r) * r * r * dr;
        }
        assert!((spec.radial_tail(a, b) - num).abs() < 1e-8 * num.abs());
        let m = spec.radial_moment(b) - spec.radial_moment(a);
        assert!((m - mom).abs() < 1e-8 * mom.abs());
    }

    #[test]
    fn one_dimensional_tails_are_closed_form() {
        let s = 0.5;
        let g = make_grid::<f64>(1, 4.0, 0.25, BoundaryModel::signs(vec![1.0])).unwrap();
        let ext = g.exterior().unwrap().clone();
        let t = exterior_tails(&g, &KernelSpec::<f64>::fractional(s), &ext);
        for (i, (p, m)) in t.iter().enumerate() {
            let x = g.point(i)[0];
            assert!((p - (2.0 - s) / s * (4.0 - x).powf(-s)).abs() < 1e-12);
            assert!((m - (2.0 - s) / s * (4.0 + x).powf(-s)).abs() < 1e-12);
        }
    }

    #[test]
    fn two_dimensional_tails_match_polar_oracle() {
        let s = 0.5;
        let spec = KernelSpec::<f64>::fractional(s);
        let g = make_grid::<f64>(2, 2.0, 0.25, BoundaryModel::signs(vec![1.0, 0.0])).unwrap();
        let ext = g.exterior().unwrap().clone();
        let t = exterior_tails(&g, &spec, &ext);
        for &i in &[0usize, 9, 27, 63] {
            let p = g.point(i);
            let (x, y) = (p[0], p[1]);
            let steps = 400_000;
            let mut plus = 0.0;
            let mut minus = 0.0;
            for k in 0..steps {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / steps as f64;
                let (c, sn) = (th.cos(), th.sin());
                let tx = if c > 0.0 { (2.0 - x) / c } else if c < 0.0 { (-2.0 - x) / c } else { f64::INFINITY };
                let ty = if sn > 0.0 { (2.0 - y) / sn } else if sn < 0.0 { (-2.0 - y) / sn } else { f64::INFINITY };
                let rho = tx.min(ty);
                let dth = 2.0 * std::f64::consts::PI / steps as f64;
                if c.abs() > 1e-15 && -x / c > rho {
                    let cross = -x / c;
                    let inner = spec.radial_tail(rho, cross) * dth;
                    let outer = spec.radial_tail(cross, f64::INFINITY) * dth;
                    if x + rho * c >= 0.0 {
                        plus += inner;
                        minus += outer;
                    } else {
                        minus += inner;
                        plus += outer;
                    }
                } else {
                    let v = spec.radial_tail(rho, f64::INFINITY) * dth;
                    if x + (rho + 1.0) * c >= 0.0 {
                        plus += v;
                    } else {
                        minus += v;
                    }
                }
            }
            assert!((t[i].0 - plus).abs() < 2e-4 * (plus + minus), "{i}: {} vs {plus}", t[i].0);
            assert!((t[i].1 - minus).abs() < 2e-4 * (plus + minus), "{i}: {} vs {minus}", t[i].1);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        for n in 1..=2 {
            let g = make_grid::<f64>(n, 2.0, 0.25, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(n, 0.7))).unwrap();
            let u = ScalarField::constant(&g, 0.7);
            let lu = apply_lk_quadrature(&u, &KernelSpec::<f64>::fractional(0.5)).unwrap();
            assert!(lu.sup_norm() < 1e-11, "{}", lu.sup_norm());
            let gp = make_grid::<f64>(n, 2.0, 0.25, BoundaryModel::Periodic).unwrap();
            let up = ScalarField::constant(&gp, 0.7);
            assert!(apply_lk_quadrature(&up, &KernelSpec::<f64>::fractional(0.5)).unwrap().sup_norm() < 1e-11);
        }
    }

    #[test]
    fn odd_field_vanishes_at_origin_pair() {
        let g = make_grid::<f64>(1, 4.0, 0.25, BoundaryModel::signs(vec![1.0])).unwrap();
        let u = ScalarField::from_fn(&g, |x| x[0].tanh());
        let lu = apply_lk_quadrature(&u, &KernelSpec::<f64>::fractional(0.5)).unwrap();
        let m = g.per_axis();
        for i in 0..m / 2 {
            assert!((lu.values[i] + lu.values[m - 1 - i]).abs() < 1e-11);
        }
    }

    #[test]
    fn periodic_symbol_matches_continuum() {
        let pi = std::f64::consts::PI;
        for &s in &[0.3, 0.5, 0.7, 0.9] {
            let g = make_grid::<f64>(1, pi, pi / 128.0, BoundaryModel::Periodic).unwrap();
            let op = NonlocalOperator::new(&g, &KernelSpec::<f64>::fractional(s)).unwrap();
            let kappa = symbol_constant(1, s);
            for k in 1..=6 {
                let e = ScalarField::from_fn(&g, |x| (k as f64 * x[0]).cos());
                let le = op.apply(&e).unwrap();
                let eig = le.dot(&e) / e.dot(&e);
                let want = kappa * (k as f64).powf(s);
                assert!((eig - want).abs() < 2e-3 * want, "s={s} k={k}: {eig} vs {want}");
            }
        }
    }

    #[test]
    fn spectral_matches_quadrature_on_band_limited_fields() {
        let pi = std::f64::consts::PI;
        let g = make_grid::<f64>(1, pi, pi / 128.0, BoundaryModel::Periodic).unwrap();
        let u = ScalarField::from_fn(&g, |x| {
            (x[0]).cos() + 0.5 * (3.0 * x[0] + 0.2).sin() - 0.25 * (5.0 * x[0]).cos()
        });
        for &s in &[0.3, 0.5, 0.7, 0.9] {
            let r = operator_consistency(&u, s, 1e-3).unwrap();
            assert!(r.pass, "s={s}: {}", r.discrepancy);
        }
        let c = ScalarField::constant(&g, 1.0);
        assert_eq!(apply_fraclap_spectral(&c, 0.5).unwrap().sup_norm(), 0.0);
        let ext = make_grid::<f64>(1, pi, pi / 128.0, BoundaryModel::signs(vec![1.0])).unwrap();
        assert!(apply_fraclap_spectral(&ScalarField::constant(&ext, 1.0), 0.5).is_err());
    }

    #[test]
    fn two_dimensional_symbol() {
        let pi = std::f64::consts::PI;
        let s = 0.5;
        let g = make_grid::<f64>(2, pi, pi / 32.0, BoundaryModel::Periodic).unwrap();
        let op = NonlocalOperator::new(&g, &KernelSpec::<f64>::fractional(s)).unwrap();
        let kappa = symbol_constant(2, s);
        for (k1, k2) in [(1.0, 0.0), (1.0, 1.0), (2.0, 1.0)] {
            let e = ScalarField::from_fn(&g, |x| (k1 * x[0] + k2 * x[1]).cos());
            let eig = op.apply(&e).unwrap().dot(&e) / e.dot(&e);
            let want = kappa * (k1 * k1 + k2 * k2).powf(0.5 * s);
            assert!((eig - want).abs() < 3e-3 * want, "{k1},{k2}: {eig} vs {want}");
        }
    }

    #[test]
    fn laplacian_examples() {
        let g = make_grid::<f64>(2, 2.0, 0.25, BoundaryModel::Periodic).unwrap();
        assert_eq!(apply_laplacian(&ScalarField::constant(&g, 3.0)).unwrap().sup_norm(), 0.0);
        let pi = std::f64::consts::PI;
        let gp = make_grid::<f64>(1, pi, pi / 16.0, BoundaryModel::Periodic).unwrap();
        let c = ScalarField::from_fn(&gp, |x| x[0].cos());
        let lc = apply_laplacian(&c).unwrap();
        let h = pi / 16.0;
        for i in 0..gp.len() {
            assert!((lc.values[i] - c.values[i] * (2.0 - 2.0 * h.cos()) / (h * h)).abs() < 1e-12);
        }
        let big = make_grid::<f64>(2, 2.0, 0.25, BoundaryModel::ExteriorField).unwrap();
        let q = ScalarField::from_fn(&big, |x| x[0] * x[0] + x[1] * x[1]);
        assert_eq!(apply_laplacian(&q), Err(LabError::IncompleteStencil));
        let qg = make_grid::<f64>(2, 2.0, 0.25, BoundaryModel::signs(vec![1.0, 0.0])).unwrap();
        let q = ScalarField::from_fn(&qg, |x| x[0] * x[0] + x[1] * x[1]);
        let lq = apply_laplacian(&q).unwrap();
        for i in 0..qg.len() {
            if !qg.is_boundary_node(i) {
                assert!((lq.values[i] + 4.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn missing_exterior_is_rejected() {
        let g = make_grid::<f64>(1, 2.0, 0.25, BoundaryModel::ExteriorField).unwrap();
        let u = ScalarField::constant(&g, 0.0);
        assert!(matches!(
            apply_lk_quadrature(&u, &KernelSpec::<f64>::fractional(0.5)),
            Err(LabError::MissingExterior)
        ));
    }

    #[test]
    fn kernel_audit_passes_for_l2_profiles() {
        let a = kernel_audit(&KernelSpec::<f64>::fractional(0.5), 2, 500, 1).unwrap();
        assert!(a.pass, "{a:?}");
        let b = kernel_audit(
            &KernelSpec::<f64>::general_l2(0.7, RadialProfile::LogOscillation { lambda: 0.5, big_lambda: 2.0 }),
            3,
            500,
            2,
        )
        .unwrap();
        assert!(b.pass, "{b:?}");
        assert!(a.derivative_ratio > 1.0);
    }

    #[test]
    fn moment_correction_is_small_and_positive() {
        let spec = KernelSpec::<f64>::fractional(0.5);
        let c = moment_correction(&spec, 1, 0.05, 800);
        let nearest = 0.05 * spec.radial(1, 0.05);
        assert!(c > 0.0 && c < nearest, "{c} vs {nearest}");
    }
}
