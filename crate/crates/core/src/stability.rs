//! Second variation, Rayleigh minimisation, the gradient-test inequality and
//! perimeter stability of sets under compactly supported flows.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{EnergyModel, Potential};
use crate::error::{LabError, Result};
use crate::field::{check_same, make_grid, squared_distance_transform, BallRegion, BoundaryModel, Grid, IndicatorSet, ScalarField};
use crate::kernel::{KernelSpec, NonlocalOperator};
use crate::linalg::lanczos_smallest;
use crate::scalar::Real;

/// `Q(ξ) = ½ Σ h^{2n} κ |ξ_i − ξ_j|² + ε^{−s} h^n Σ W″(u) ξ²`.
pub fn second_variation<T: Real>(
    u: &ScalarField<T>,
    xi: &ScalarField<T>,
    spec: &KernelSpec<T>,
    w: &Potential<T>,
    epsilon: T,
) -> Result<T> {
    check_same(&u.grid, &xi.grid)?;
    let model = EnergyModel::new(&u.grid, spec, w, epsilon)?;
    Ok(quadratic(&model, &u.values, &xi.values))
}

fn quadratic<T: Real>(model: &EnergyModel<T>, u: &[T], xi: &[T]) -> T {
    let hx = model.hessian_apply(u, xi);
    hx.iter().zip(xi).map(|(a, b)| *a * *b).sum::<T>() * model.grid().cell_volume()
}

#[derive(Clone, Debug)]
pub struct StabilityReport<T: Real> {
    pub min_rayleigh: T,
    /// Minimising test function, unit `L²` norm, zero outside `region`.
    pub witness: ScalarField<T>,
    pub iterations: usize,
    pub region: BallRegion<T>,
    pub converged: bool,
    /// `‖Hξ − λξ‖` of the witness in the restricted problem.
    pub residual: T,
}

impl<T: Real> StabilityReport<T> {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "min_rayleigh": self.min_rayleigh.f64(),
            "iterations": self.iterations,
            "converged": self.converged,
            "residual": self.residual.f64(),
            "region": {
                "center": self.region.center.iter().map(|v| v.f64()).collect::<Vec<_>>(),
                "radius": self.region.radius.f64(),
            },
        })
    }
}

/// Smallest Rayleigh quotient of `ξ ↦ L ξ + ε^{−s} W″(u) ξ` over `ξ` supported on the
/// nodes strictly inside `region`, by restarted Lanczos with at most `iterations`
/// operator applications.
pub fn min_rayleigh<T: Real>(
    u: &ScalarField<T>,
    region: &BallRegion<T>,
    spec: &KernelSpec<T>,
    w: &Potential<T>,
    epsilon: T,
    iterations: usize,
) -> Result<StabilityReport<T>> {
    u.grid.check_region(region)?;
    let model = EnergyModel::new(&u.grid, spec, w, epsilon)?;
    let nodes = u.grid.nodes_in(region);
    if nodes.is_empty() {
        return Err(LabError::Degenerate("region holds no grid nodes".into()));
    }
    let len = u.grid.len();
    let restricted = |x: &[T]| -> Vec<T> {
        let mut full = vec![T::zero(); len];
        for (k, &i) in nodes.iter().enumerate() {
            full[i] = x[k];
        }
        let hx = model.hessian_apply(&u.values, &full);
        nodes.iter().map(|&i| hx[i]).collect()
    };
    let krylov = nodes.len().min(160).min(iterations.max(2));
    let restarts = (iterations / krylov).saturating_sub(1);
    let pair = lanczos_smallest(restricted, nodes.len(), krylov, restarts, 1e-9, 0x5eed)?;
    let mut values = vec![T::zero(); len];
    let scale = T::one() / u.grid.cell_volume().sqrt();
    for (k, &i) in nodes.iter().enumerate() {
        values[i] = pair.vector[k] * scale;
    }
    let witness = ScalarField::new(u.grid.clone(), values)?;
    let q = quadratic(&model, &u.values, &witness.values);
    let norm2 = witness.dot(&witness);
    let converged = pair.residual.f64() <= 1e-6 * pair.value.f64().abs().max(1.0);
    Ok(StabilityReport {
        min_rayleigh: q / norm2,
        witness,
        iterations: pair.iterations,
        region: region.clone(),
        converged,
        residual: pair.residual,
    })
}

/// `|⟨a, b⟩| / (‖a‖ ‖b‖)`.
pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> T {
    let ab: T = a.iter().zip(b).map(|(x, y)| *x * *y).sum();
    let aa: T = a.iter().map(|x| *x * *x).sum();
    let bb: T = b.iter().map(|x| *x * *x).sum();
    if aa == T::zero() || bb == T::zero() {
        return T::zero();
    }
    ab.abs() / (aa.sqrt() * bb.sqrt())
}

/// Gradient by central differences inside the box and one-sided differences on its
/// outermost layer (periodic grids wrap).
pub fn gradient_field<T: Real>(u: &ScalarField<T>) -> Vec<[T; 3]> {
    let g = &u.grid;
    let n = g.dimension();
    let m = g.per_axis();
    let h = g.spacing();
    (0..g.len())
        .map(|i| {
            let mi = g.multi_index(i);
            let mut d = [T::zero(); 3];
            for a in 0..n {
                let at = |k: isize| -> T {
                    let mut q = mi;
                    q[a] = k.rem_euclid(m as isize) as usize;
                    u.values[g.linear_index(&q[..n])]
                };
                let k = mi[a] as isize;
                d[a] = if g.is_periodic() || (k > 0 && k + 1 < m as isize) {
                    (at(k + 1) - at(k - 1)) / (h + h)
                } else if k == 0 {
                    (at(1) - at(0)) / h
                } else {
                    (at(k) - at(k - 1)) / h
                };
            }
            d
        })
        .collect()
}

/// Smooth nonincreasing profile: 1 on `[0, 2]`, 0 on `[3, ∞)`.
pub fn cutoff_profile<T: Real>(r: T) -> T {
    let f = |t: T| if t > T::zero() { (-T::one() / t).exp() } else { T::zero() };
    let a = f(T::lit(3.0) - r);
    let b = f(r - T::lit(2.0));
    if a + b == T::zero() {
        return T::zero();
    }
    a / (a + b)
}

/// `ψ(x) = ξ(|(x₁, x₂)|) ξ(|x₃|) ⋯ ξ(|x_n|)`.
pub fn cutoff_psi<T: Real>(x: &[T]) -> T {
    let r = if x.len() >= 2 {
        (x[0] * x[0] + x[1] * x[1]).sqrt()
    } else {
        x[0].abs()
    };
    let mut v = cutoff_profile(r);
    for c in x.iter().skip(2) {
        v *= cutoff_profile(c.abs());
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientTest<T> {
    pub i2: T,
    pub i3: T,
}

/// Both sides of the gradient-test inequality for a converged solution, with the pair
/// weights of the `|z|^{−n−s}` kernel on the solution's grid.
pub fn gradient_test_inequality<T: Real>(
    u: &ScalarField<T>,
    s: T,
    w: &Potential<T>,
    epsilon: T,
) -> Result<GradientTest<T>> {
    if u.grid.dimension() < 2 {
        return Err(LabError::Precondition("the gradient test needs n >= 2".into()));
    }
    let model = EnergyModel::new(&u.grid, &KernelSpec::fractional(s), w, epsilon)?;
    let res = model
        .residual(&u.values)
        .iter()
        .fold(T::zero(), |m, v| m.max(v.abs()));
    if res > T::lit(1e-4) {
        return Err(LabError::Precondition(format!("field not converged (residual {res})")));
    }
    gradient_test_terms(u, s)
}

/// `I₂` and `I₃` of `u` without a convergence check.
pub fn gradient_test_terms<T: Real>(u: &ScalarField<T>, s: T) -> Result<GradientTest<T>> {
    let g = &u.grid;
    let n = g.dimension();
    if n < 2 {
        return Err(LabError::Precondition("the gradient test needs n >= 2".into()));
    }
    let op = NonlocalOperator::new(g, &KernelSpec::perimeter(s))?;
    let grad = gradient_field(u);
    let mut gnorm = vec![T::zero(); g.len()];
    let mut unit = vec![vec![T::zero(); g.len()]; n];
    for i in 0..g.len() {
        let norm = grad[i][..n].iter().map(|v| *v * *v).sum::<T>().sqrt();
        gnorm[i] = norm;
        if norm > T::zero() {
            for a in 0..n {
                unit[a][i] = grad[i][a] / norm;
            }
        }
    }
    let psi: Vec<T> = (0..g.len()).map(|i| cutoff_psi(&g.point(i)[..n])).collect();
    let kg = op.convolve_interior(&gnorm);
    let psig: Vec<T> = psi.iter().zip(&gnorm).map(|(a, b)| *a * *b).collect();
    let kpsig = op.convolve_interior(&psig);
    let mut knu = Vec::with_capacity(n);
    for comp in unit.iter() {
        let gn: Vec<T> = gnorm.iter().zip(comp).map(|(a, b)| *a * *b).collect();
        knu.push(op.convolve_interior(&gn));
    }
    let hn = g.cell_volume();
    let two = T::lit(2.0);
    let mut i2 = T::zero();
    let mut i3 = T::zero();
    for i in 0..g.len() {
        if gnorm[i] == T::zero() {
            continue;
        }
        let mut aligned = T::zero();
        for a in 0..n {
            aligned += unit[a][i] * knu[a][i];
        }
        i2 += psi[i] * psi[i] * gnorm[i] * (kg[i] - aligned);
        i3 += gnorm[i] * (psi[i] * psi[i] * kg[i] - psi[i] * kpsig[i]);
    }
    Ok(GradientTest {
        i2: two * i2 * hn,
        i3: two * i3 * hn,
    })
}

type FieldFn = Arc<dyn Fn(&[f64], f64) -> Vec<f64> + Send + Sync>;

/// Smooth vector field supported in `{inner_radius ≤ |x| ≤ support_radius}`.
#[derive(Clone)]
pub struct VectorFieldSpec {
    pub dimension: usize,
    pub inner_radius: f64,
    pub support_radius: f64,
    pub time_dependent: bool,
    f: FieldFn,
}

impl std::fmt::Debug for VectorFieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorFieldSpec")
            .field("dimension", &self.dimension)
            .field("inner_radius", &self.inner_radius)
            .field("support_radius", &self.support_radius)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

/// Smooth bump equal to 1 on `[a + δ, b − δ]` and vanishing outside `(a, b)`.
pub fn annular_bump(r: f64, a: f64, b: f64) -> f64 {
    if r <= a || r >= b {
        return 0.0;
    }
    let delta = 0.25 * (b - a);
    let rise = cutoff_profile(3.0 - (r - a) / delta);
    let fall = cutoff_profile(2.0 + (r - (b - delta)) / delta);
    rise * fall
}

impl VectorFieldSpec {
    /// Wraps `f(x, t)`; values outside the support annulus are forced to zero.
    pub fn new(
        dimension: usize,
        inner_radius: f64,
        support_radius: f64,
        time_dependent: bool,
        f: impl Fn(&[f64], f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        VectorFieldSpec {
            dimension,
            inner_radius,
            support_radius,
            time_dependent,
            f: Arc::new(f),
        }
    }

    pub fn zero(dimension: usize) -> Self {
        Self::new(dimension, 0.0, 1.0, false, move |_, _| vec![0.0; dimension])
    }

    /// `b(|x|) v` with the smooth annular bump `b` on `(inner, outer)`.
    pub fn bumped_constant(v: Vec<f64>, inner: f64, outer: f64) -> Self {
        let n = v.len();
        Self::new(n, inner, outer, false, move |x, _| {
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let b = annular_bump(r, inner, outer);
            v.iter().map(|c| c * b).collect()
        })
    }

    /// Radial bump times a random affine function of `x / |x|`, supported in
    /// `B₁ ∖ B_{0.05}` and scaled to `sup ‖DX‖ ≈ 1`.
    pub fn random_admissible(dimension: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rng.gen_range(0.05..0.45);
        let b = rng.gen_range((a + 0.3)..0.98);
        let c: Vec<f64> = (0..dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m: Vec<f64> = (0..dimension * dimension).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let raw = move |x: &[f64], amp: f64| -> Vec<f64> {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let bump = annular_bump(r, a, b);
            if bump == 0.0 {
                return vec![0.0; dimension];
            }
            (0..dimension)
                .map(|i| {
                    let mut v = c[i];
                    for j in 0..dimension {
                        v += m[i * dimension + j] * x[j] / r;
                    }
                    amp * bump * v
                })
                .collect()
        };
        let unit = {
            let raw = raw.clone();
            Self::new(dimension, a, b, false, move |x, _| raw(x, 1.0))
        };
        let amp = 1.0 / unit.lipschitz_bound().max(1e-12);
        Self::new(dimension, a, b, false, move |x, _| raw(x, amp))
    }

    pub fn eval(&self, x: &[f64], t: f64) -> Vec<f64> {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r >= self.support_radius || r <= self.inner_radius {
            return vec![0.0; self.dimension];
        }
        (self.f)(x, if self.time_dependent { t } else { 0.0 })
    }

    /// Sampled `sup ‖DX‖` (operator norm bounded by the Frobenius norm).
    pub fn lipschitz_bound(&self) -> f64 {
        let n = self.dimension;
        let per: usize = match n {
            1 => 400,
            2 => 80,
            _ => 24,
        };
        let step = 2.0 * self.support_radius / per as f64;
        let d = 1e-5;
        let mut worst: f64 = 0.0;
        let total = per.pow(n as u32);
        for idx in 0..total {
            let mut r = idx;
            let mut x = vec![0.0; n];
            for v in x.iter_mut() {
                *v = -self.support_radius + (r % per) as f64 * step + 0.5 * step;
                r /= per;
            }
            let mut fro = 0.0;
            for j in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += d;
                xm[j] -= d;
                let fp = self.eval(&xp, 0.0);
                let fm = self.eval(&xm, 0.0);
                for i in 0..n {
                    let g = (fp[i] - fm[i]) / (2.0 * d);
                    fro += g * g;
                }
            }
            worst = worst.max(fro.sqrt());
        }
        worst
    }

    /// `(φ^t)^{-1}(x)` by RK4 on the reversed flow.
    pub fn preimage(&self, x: &[f64], t: f64, steps: usize) -> Vec<f64> {
        let mut y = x.to_vec();
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if t == 0.0 || r >= self.support_radius + 1e-12 && !self.time_dependent {
            return y;
        }
        let dt = -t / steps as f64;
        let n = self.dimension;
        let mut time = t;
        let add = |a: &[f64], b: &[f64], c: f64| -> Vec<f64> { (0..n).map(|i| a[i] + c * b[i]).collect() };
        for _ in 0..steps {
            let k1 = self.eval(&y, time);
            let k2 = self.eval(&add(&y, &k1, 0.5 * dt), time + 0.5 * dt);
            let k3 = self.eval(&add(&y, &k2, 0.5 * dt), time + 0.5 * dt);
            let k4 = self.eval(&add(&y, &k3, dt), time + dt);
            for i in 0..n {
                y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            time += dt;
        }
        y
    }
}

/// Signed distance to `∂E` (positive in `E`) sampled from the exact transform and
/// continued by the set's exterior model.
pub struct SetLevel {
    field: ScalarField<f64>,
}

impl SetLevel {
    pub fn from_set<T: Real>(e: &IndicatorSet<T>) -> Result<Self> {
        let g = &e.grid;
        let n = g.dimension();
        let h = g.spacing().f64();
        let grid = make_grid::<f64>(
            n,
            g.box_radius().f64(),
            h,
            match g.boundary() {
                BoundaryModel::ExteriorConstant(ext) => BoundaryModel::ExteriorConstant(crate::field::ExteriorConstant {
                    plus: ext.plus.f64(),
                    minus: ext.minus.f64(),
                    planes: ext
                        .planes
                        .iter()
                        .map(|p| crate::field::Plane::new(p.normal.iter().map(|v| v.f64()).collect(), p.offset.f64()))
                        .collect(),
                }),
                BoundaryModel::Periodic => BoundaryModel::Periodic,
                BoundaryModel::ExteriorField => return Err(LabError::MissingExterior),
            },
        )?;
        let inside = squared_distance_transform(g.per_axis(), n, &e.membership);
        let outside_sites: Vec<bool> = e.membership.iter().map(|b| !b).collect();
        let outside = squared_distance_transform(g.per_axis(), n, &outside_sites);
        let big = 4.0 * g.box_radius().f64();
        let values = (0..g.len())
            .map(|i| {
                if e.membership[i] {
                    if outside[i].is_finite() {
                        outside[i].sqrt() * h - 0.5 * h
                    } else {
                        big
                    }
                } else if inside[i].is_finite() {
                    -(inside[i].sqrt() * h - 0.5 * h)
                } else {
                    -big
                }
            })
            .collect();
        Ok(SetLevel {
            field: ScalarField::new(grid, values)?,
        })
    }

    /// Level value; outside the box the exterior sign times the distance to the box.
    pub fn value(&self, x: &[f64]) -> f64 {
        let g = &self.field.grid;
        if let Some(ext) = g.exterior() {
            if !g.in_box(x) {
                let l = g.box_radius();
                let gap = x.iter().map(|v| (v.abs() - l).max(0.0)).fold(0.0, f64::max);
                let sign = if ext.value_at(x) > 0.0 { 1.0 } else { -1.0 };
                let inner: Vec<f64> = x.iter().map(|v| v.max(-l + 1e-12).min(l - 1e-12)).collect();
                let edge = self.field.sample(&inner).unwrap_or(sign);
                return if edge.signum() == sign { edge + sign * gap } else { sign * gap.max(1e-12) };
            }
        }
        self.field.sample(x).unwrap_or(0.0)
    }
}

fn rk_steps(x: &VectorFieldSpec, t: f64) -> usize {
    let lip = x.lipschitz_bound().max(1.0);
    ((t.abs() * lip / 0.02).ceil() as usize).max(8)
}

fn check_jacobian(x: &VectorFieldSpec, t: f64) -> Result<()> {
    let lip = x.lipschitz_bound();
    if t.abs() * lip >= 1.0 {
        return Err(LabError::Flow(format!(
            "|t| sup|DX| = {} >= 1: the flow Jacobian may degenerate",
            t.abs() * lip
        )));
    }
    Ok(())
}

/// `φ^t_X(E)` on the grid of `E`.
pub fn flow_map<T: Real>(e: &IndicatorSet<T>, x: &VectorFieldSpec, t: T) -> Result<IndicatorSet<T>> {
    let t = t.f64();
    if x.dimension != e.grid.dimension() {
        return Err(LabError::GridMismatch("vector field dimension".into()));
    }
    check_jacobian(x, t)?;
    if t == 0.0 {
        return Ok(e.clone());
    }
    let level = SetLevel::from_set(e)?;
    let steps = rk_steps(x, t);
    let g = &e.grid;
    let n = g.dimension();
    let membership = (0..g.len())
        .map(|i| {
            let p: Vec<f64> = g.point(i)[..n].iter().map(|v| v.f64()).collect();
            let r = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r >= x.support_radius && !x.time_dependent {
                return e.membership[i];
            }
            level.value(&x.preimage(&p, t, steps)) > 0.0
        })
        .collect();
    IndicatorSet::new(g.clone(), membership)
}

/// Sign field of `φ^t(E)` on `grid`: a `C¹` sine ramp of half-width `2h` in the
/// first-order distance `ℓ∘φ^{−t} / |∇(ℓ∘φ^{−t})|` to the transported boundary.
fn flowed_sign_field(level: &SetLevel, grid: &Grid<f64>, x: &VectorFieldSpec, t: f64, steps: usize) -> Vec<f64> {
    let n = grid.dimension();
    let h = grid.spacing();
    let pulled = |p: &[f64]| level.value(&x.preimage(p, t, steps));
    (0..grid.len())
        .map(|i| {
            let p = &grid.point(i)[..n];
            let l = pulled(p);
            let w = 2.0 * h;
            if l.abs() >= 1.5 * w {
                return l.signum();
            }
            let d = 1e-4 * h;
            let mut g2 = 0.0;
            let mut q = p.to_vec();
            for k in 0..n {
                q[k] = p[k] + d;
                let a = pulled(&q);
                q[k] = p[k] - d;
                let b = pulled(&q);
                q[k] = p[k];
                g2 += ((a - b) / (2.0 * d)).powi(2);
            }
            let dist = if g2 > 0.0 { l / g2.sqrt() } else { l };
            if dist.abs() >= w {
                dist.signum()
            } else {
                (std::f64::consts::FRAC_PI_2 * dist / w).sin()
            }
        })
        .collect()
}

/// `(t, q(t), error_bar)` of the symmetrised perimeter quotient.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct QuotientPoint {
    pub t: f64,
    pub q: f64,
    pub error_bar: f64,
}

/// `q(t) = [P_s(φ^t E, B₁) + P_s(φ^{−t} E, B₁) − 2P_s(E, B₁)] / t²` for each `|t|` in
/// `t_list`, with error bars from the same quotient on the grid of spacing `2h`.
pub fn cone_perimeter_stability<T: Real>(
    e: &IndicatorSet<T>,
    x: &VectorFieldSpec,
    s: T,
    t_list: &[T],
) -> Result<Vec<QuotientPoint>> {
    let level = SetLevel::from_set(e)?;
    let fine = level.field.grid.clone();
    let per = fine.per_axis();
    if per % 4 != 0 {
        return Err(LabError::Config("cone grid needs a node count divisible by 4".into()));
    }
    let coarse = make_grid::<f64>(fine.dimension(), fine.box_radius(), 2.0 * fine.spacing(), fine.boundary().clone())?;
    let ops = [
        PerimeterProbe::new(&fine, s.f64())?,
        PerimeterProbe::new(&coarse, s.f64())?,
    ];
    perimeter_quotients(&level, &ops, x, t_list)
}

/// Perimeter of sign fields in `B₁` on a fixed grid.
pub struct PerimeterProbe {
    op: NonlocalOperator<f64>,
    mask: Vec<bool>,
}

impl PerimeterProbe {
    pub fn new(grid: &Grid<f64>, s: f64) -> Result<Self> {
        let region = BallRegion::centered(grid.dimension(), 1.0);
        grid.check_region(&region)?;
        Ok(PerimeterProbe {
            op: NonlocalOperator::new(grid, &KernelSpec::perimeter(s))?,
            mask: grid.region_mask(&region),
        })
    }

    /// `P_s = E^Sob_{B₁}(σ) / 2` for a sign field `σ`.
    pub fn perimeter(&self, sign: &[f64]) -> f64 {
        self.op.sobolev_energy(sign, &self.mask) / 2.0
    }

    pub fn grid(&self) -> &Grid<f64> {
        self.op.grid()
    }
}

/// Quotients on two probes (fine first); the bar is `|q_fine − q_coarse|`.
pub fn perimeter_quotients<T: Real>(
    level: &SetLevel,
    probes: &[PerimeterProbe; 2],
    x: &VectorFieldSpec,
    t_list: &[T],
) -> Result<Vec<QuotientPoint>> {
    let mut ts: Vec<f64> = t_list.iter().map(|t| t.f64().abs()).filter(|t| *t > 0.0).collect();
    ts.sort_by(|a, b| b.total_cmp(a));
    ts.dedup();
    for &t in &ts {
        check_jacobian(x, t)?;
    }
    let base: Vec<f64> = probes
        .iter()
        .map(|p| p.perimeter(&flowed_sign_field(level, p.grid(), x, 0.0, 1)))
        .collect();
    let mut out = Vec::with_capacity(ts.len());
    for &t in &ts {
        let steps = rk_steps(x, t);
        let mut q = [0.0; 2];
        for (k, p) in probes.iter().enumerate() {
            let plus = p.perimeter(&flowed_sign_field(level, p.grid(), x, t, steps));
            let minus = p.perimeter(&flowed_sign_field(level, p.grid(), x, -t, steps));
            q[k] = (plus + minus - 2.0 * base[k]) / (t * t);
        }
        let roundoff = 1e-12 * base[0].abs() / (t * t);
        out.push(QuotientPoint {
            t,
            q: q[0],
            error_bar: (q[0] - q[1]).abs() + roundoff,
        });
    }
    Ok(out)
}

/// `|A Δ B|` as `h^n` times the number of differing nodes.
pub fn symmetric_difference_volume<T: Real>(a: &IndicatorSet<T>, b: &IndicatorSet<T>) -> Result<T> {
    check_same(&a.grid, &b.grid)?;
    let count = a.membership.iter().zip(&b.membership).filter(|(x, y)| x != y).count();
    Ok(T::of(count) * a.grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{embed_profile, ExteriorConstant};
    use crate::kernel::unit_width_epsilon;
    use crate::solver::{gradient_flow, solve_layer_1d, SolveConfig};

    fn eps1(s: f64) -> f64 {
        unit_width_epsilon(1, s)
    }

    #[test]
    fn quadratic_form_examples() {
        let g = make_grid::<f64>(2, 2.0, 0.125, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(2, 1.0))).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let disc = ScalarField::from_fn(&g, |x| if x[0] * x[0] + x[1] * x[1] < 1.0 { 1.0 } else { 0.0 });
        let scaled: Vec<f64> = disc.values.iter().map(|v| v * rng.gen_range(0.5..1.5)).collect();
        let xi = ScalarField::new(g.clone(), scaled).unwrap();
        let spec = KernelSpec::fractional(0.5);
        let w = Potential::quartic();
        let q = second_variation(&one, &xi, &spec, &w, 1.0).unwrap();
        assert!(q >= 2.0 * xi.dot(&xi) - 1e-12);
        let zero = ScalarField::constant(&g, 0.0);
        assert_eq!(second_variation(&one, &zero, &spec, &w, 1.0).unwrap(), 0.0);
        let u = ScalarField::from_fn(&g, |x| (x[0] - 0.3 * x[1]).tanh());
        let q1 = second_variation(&u, &xi, &spec, &w, 0.8).unwrap();
        let q2 = second_variation(&u, &xi.map(|v| 2.0 * v), &spec, &w, 0.8).unwrap();
        assert!((q2 - 4.0 * q1).abs() <= 1e-12 * q2.abs().max(1.0));
    }

    #[test]
    fn rayleigh_matches_dense_eigensolve() {
        let g = make_grid::<f64>(1, 8.0, 0.125, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(1, 0.0))).unwrap();
        let u = ScalarField::constant(&g, 0.0);
        let spec = KernelSpec::fractional(0.5);
        let w = Potential::quartic();
        let region = BallRegion::centered(1, 7.0);
        let rep = min_rayleigh(&u, &region, &spec, &w, 1.0, 2000).unwrap();
        let model = EnergyModel::new(&g, &spec, &w, 1.0).unwrap();
        let nodes = g.nodes_in(&region);
        let k = nodes.len();
        let mut dense = nalgebra::DMatrix::zeros(k, k);
        for (b, &j) in nodes.iter().enumerate() {
            let mut e = vec![0.0; g.len()];
            e[j] = 1.0;
            let col = model.hessian_apply(&u.values, &e);
            for (a, &i) in nodes.iter().enumerate() {
                dense[(a, b)] = col[i];
            }
        }
        let lo = dense.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((rep.min_rayleigh - lo).abs() < 1e-8, "{} {lo}", rep.min_rayleigh);
        let layer_eps = eps1(0.5);
        let rep = min_rayleigh(&u, &region, &spec, &w, layer_eps, 2000).unwrap();
        assert!(rep.min_rayleigh <= -0.5, "{}", rep.min_rayleigh);
    }

    #[test]
    fn well_is_stable() {
        let g = make_grid::<f64>(1, 8.0, 0.125, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(1, 1.0))).unwrap();
        let u = ScalarField::constant(&g, 1.0);
        let rep = min_rayleigh(&u, &BallRegion::centered(1, 4.0), &KernelSpec::fractional(0.5), &Potential::quartic(), 1.0, 1000)
            .unwrap();
        assert!(rep.min_rayleigh >= 2.0 - 1e-6);
    }

    #[test]
    fn rayleigh_monotone_in_region() {
        let g = make_grid::<f64>(1, 8.0, 0.125, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(1, 0.0))).unwrap();
        let u = ScalarField::constant(&g, 0.0);
        let mut prev = f64::INFINITY;
        for r in [1.0, 2.0, 4.0, 7.0] {
            let rep = min_rayleigh(&u, &BallRegion::centered(1, r), &KernelSpec::fractional(0.5), &Potential::quartic(), 1.0, 2000)
                .unwrap();
            assert!(rep.min_rayleigh <= prev + 1e-9);
            prev = rep.min_rayleigh;
        }
    }

    #[test]
    fn layer_witness_is_translation_mode() {
        let s = 0.5;
        let l = 40.0;
        let u = solve_layer_1d::<f64>(s, l, 0.1, 1e-10).unwrap();
        let region = BallRegion::centered(1, l / 2.0);
        let rep = min_rayleigh(&u, &region, &KernelSpec::fractional(s), &Potential::quartic(), eps1(s), 3000).unwrap();
        let grad = gradient_field(&u);
        let mask = u.grid.region_mask(&region);
        let d: Vec<f64> = (0..u.grid.len()).map(|i| if mask[i] { grad[i][0] } else { 0.0 }).collect();
        let cos = cosine_similarity(&d, &rep.witness.values);
        assert!(cos >= 0.99, "{cos}");
        assert!(rep.min_rayleigh > 0.0 && rep.min_rayleigh < 1e-2, "{}", rep.min_rayleigh);
    }

    #[test]
    fn embedded_layer_has_zero_i2() {
        let s = 0.5;
        let profile = solve_layer_1d::<f64>(s, 20.0, 0.125, 1e-10).unwrap();
        let g = make_grid::<f64>(2, 5.0, 0.125, BoundaryModel::signs(vec![1.0, 0.0])).unwrap();
        let u = embed_profile(&profile, &[1.0, 0.0], &g).unwrap();
        assert!(matches!(
            gradient_test_inequality(&u, s, &Potential::quartic(), unit_width_epsilon(2, s)),
            Err(LabError::Precondition(_))
        ));
        let t = gradient_test_terms(&u, s).unwrap();
        assert_eq!(t.i2, 0.0);
        assert!(t.i3 > 0.0);
        let c = make_grid::<f64>(2, 4.0, 0.125, BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(2, 1.0))).unwrap();
        let t = gradient_test_inequality(&ScalarField::constant(&c, 1.0), s, &Potential::quartic(), 1.0).unwrap();
        assert_eq!(t.i2, 0.0);
        assert_eq!(t.i3, 0.0);
    }

    #[test]
    fn zero_field_flow_is_identity() {
        let g = make_grid::<f64>(2, 1.5, 1.0 / 32.0, BoundaryModel::signs(vec![0.0, 1.0])).unwrap();
        let e = IndicatorSet::from_fn(&g, |x| x[1] > 0.0);
        let out = flow_map(&e, &VectorFieldSpec::zero(2), 0.3).unwrap();
        assert_eq!(out.membership, e.membership);
    }

    #[test]
    fn constant_field_translates_half_plane() {
        let g = make_grid::<f64>(2, 1.5, 1.0 / 64.0, BoundaryModel::signs(vec![1.0, 0.0])).unwrap();
        let e = IndicatorSet::from_fn(&g, |x| x[0] > 0.0);
        let x = VectorFieldSpec::bumped_constant(vec![1.0, 0.0], 0.0, 1.4);
        let t = 0.1;
        let out = flow_map(&e, &x, t).unwrap();
        for i in g.nodes_in(&BallRegion::centered(2, 0.95)) {
            let p = g.point(i);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if r > 0.45 && (p[0] - t).abs() > 0.02 {
                assert_eq!(out.membership[i], p[0] > t, "{p:?}");
            }
        }
    }

    #[test]
    fn symmetric_difference_grows_linearly() {
        // |φ^t(E) Δ E| ≈ |t| ∫_{∂E} |X·ν| for the half-plane {x₁ > 0}
        let g = make_grid::<f64>(2, 1.25, 1.0 / 256.0, BoundaryModel::signs(vec![1.0, 0.0])).unwrap();
        let e = IndicatorSet::from_fn(&g, |x| x[0] > 0.0);
        let x = VectorFieldSpec::random_admissible(2, 17);
        let mut oracle = 0.0;
        let m = 20_000;
        for k in 0..m {
            let y = -1.0 + (k as f64 + 0.5) * 2.0 / m as f64;
            oracle += x.eval(&[0.0, y], 0.0)[0].abs() * 2.0 / m as f64;
        }
        let t = 0.5;
        let slope_at = |t: f64| symmetric_difference_volume(&e, &flow_map(&e, &x, t).unwrap()).unwrap() / t;
        let slope = 2.0 * slope_at(t / 2.0) - slope_at(t);
        assert!((slope - oracle).abs() < 0.1 * oracle + 2.0 * g.spacing(), "{slope} vs {oracle}");
    }

    #[test]
    fn half_plane_quotients() {
        let g = make_grid::<f64>(2, 1.5, 1.0 / 64.0, BoundaryModel::signs(vec![0.0, 1.0])).unwrap();
        let e = IndicatorSet::from_fn(&g, |x| x[1] > 0.0);
        let ts = [0.8, 0.4];
        let x = VectorFieldSpec::random_admissible(2, 3);
        let trace = cone_perimeter_stability(&e, &x, 0.5, &ts).unwrap();
        for p in &trace {
            assert!(p.q >= -p.error_bar, "{p:?}");
        }
        let tangential = VectorFieldSpec::bumped_constant(vec![1.0, 0.0], 0.1, 0.9);
        let lip = tangential.lipschitz_bound();
        let trace = cone_perimeter_stability(&e, &tangential, 0.5, &[0.8 / lip, 0.4 / lip]).unwrap();
        for p in &trace {
            assert!(p.q.abs() <= p.error_bar + 1e-6, "{p:?}");
        }
        let neg = VectorFieldSpec::new(2, x.inner_radius, x.support_radius, false, {
            let x = x.clone();
            move |p, t| x.eval(p, t).iter().map(|v| -v).collect()
        });
        let a = cone_perimeter_stability(&e, &x, 0.5, &ts).unwrap();
        let b = cone_perimeter_stability(&e, &neg, 0.5, &ts).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p.q - q.q).abs() < 1e-9 * p.q.abs().max(1.0));
        }
    }

    #[test]
    fn relaxed_field_satisfies_gradient_test() {
        let s = 0.5;
        let g = make_grid::<f64>(2, 5.0, 0.125, BoundaryModel::signs(vec![1.0, 0.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let seed = ScalarField::new(
            g.clone(),
            (0..g.len())
                .map(|i| {
                    let p = g.point(i);
                    (0.5 * p[0] + 0.3 * rng.gen_range(-1.0..1.0)).tanh()
                })
                .collect(),
        )
        .unwrap();
        let eps = unit_width_epsilon(2, s);
        let cfg = SolveConfig::new(seed, eps).scheme(crate::solver::Scheme::Newton).residual_tol(1e-6);
        let r = gradient_flow(&cfg, &KernelSpec::fractional(s), &Potential::quartic()).unwrap();
        assert!(r.converged);
        let t = gradient_test_inequality(&r.field, s, &Potential::quartic(), eps).unwrap();
        assert!(t.i2 <= 1.05 * t.i3, "{t:?}");
    }
}
