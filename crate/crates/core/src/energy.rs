//! Localised Sobolev and potential energies, the fractional perimeter, double-well
//! potentials and domain variations.

use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::field::{BallRegion, BoundaryModel, ExteriorConstant, IndicatorSet, ScalarField};
use crate::kernel::{DiscreteOperator, KernelSpec, NonlocalOperator};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum PotentialKind {
    Quartic,
    PeierlsNabarro,
    Custom,
}

type CustomFn = Arc<dyn Fn(f64) -> (f64, f64, f64) + Send + Sync>;

/// Double-well potential `W` with `W′`, `W″` and structural constants.
///
/// The constants satisfy `−W″ ≥ ν₀` on `[0, c₀]`, `W″ ≥ ν₀` on `[1−c₀, 1]` and
/// `−W′ ≥ ν₁` on `[c₀/2, 1−c₀]` (with the mirrored statements for negative `t`).
#[derive(Clone)]
pub struct Potential<T> {
    pub kind: PotentialKind,
    pub c0: T,
    pub nu0: T,
    pub nu1: T,
    pub wells: (T, T),
    custom: Option<CustomFn>,
}

impl<T: Real> std::fmt::Debug for Potential<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Potential")
            .field("kind", &self.kind)
            .field("c0", &self.c0)
            .field("nu0", &self.nu0)
            .field("nu1", &self.nu1)
            .finish()
    }
}

impl<T: Real> Potential<T> {
    /// `W(u) = ¼(1 − u²)²`.
    pub fn quartic() -> Self {
        Potential {
            kind: PotentialKind::Quartic,
            c0: T::one() - T::one() / T::lit(2.0).sqrt(),
            nu0: T::lit(0.5),
            nu1: T::lit(0.14),
            wells: (-T::one(), T::one()),
            custom: None,
        }
    }

    /// `W(u) = (1 + cos πu) / π²`.
    pub fn peierls_nabarro() -> Self {
        Potential {
            kind: PotentialKind::PeierlsNabarro,
            c0: T::lit(0.25),
            nu0: T::lit(0.7),
            nu1: T::lit(0.12),
            wells: (-T::one(), T::one()),
            custom: None,
        }
    }

    /// A user potential returning `(W, W′, W″)`; it must pass [`Potential::audit`].
    pub fn custom(
        f: impl Fn(f64) -> (f64, f64, f64) + Send + Sync + 'static,
        c0: T,
        nu0: T,
        nu1: T,
    ) -> Result<Self> {
        let p = Potential {
            kind: PotentialKind::Custom,
            c0,
            nu0,
            nu1,
            wells: (-T::one(), T::one()),
            custom: Some(Arc::new(f)),
        };
        let audit = p.audit(20_001);
        if !audit.pass {
            return Err(LabError::Config(format!("custom potential rejected: {audit:?}")));
        }
        Ok(p)
    }

    #[inline]
    pub fn w(&self, u: T) -> T {
        match self.kind {
            PotentialKind::Quartic => {
                let a = T::one() - u * u;
                a * a / T::lit(4.0)
            }
            PotentialKind::PeierlsNabarro => (T::one() + (T::PI() * u).cos()) / (T::PI() * T::PI()),
            PotentialKind::Custom => T::lit((self.custom.as_ref().unwrap())(u.f64()).0),
        }
    }

    #[inline]
    pub fn dw(&self, u: T) -> T {
        match self.kind {
            PotentialKind::Quartic => u * u * u - u,
            PotentialKind::PeierlsNabarro => -(T::PI() * u).sin() / T::PI(),
            PotentialKind::Custom => T::lit((self.custom.as_ref().unwrap())(u.f64()).1),
        }
    }

    #[inline]
    pub fn d2w(&self, u: T) -> T {
        match self.kind {
            PotentialKind::Quartic => T::lit(3.0) * u * u - T::one(),
            PotentialKind::PeierlsNabarro => -(T::PI() * u).cos(),
            PotentialKind::Custom => T::lit((self.custom.as_ref().unwrap())(u.f64()).2),
        }
    }

    /// `max |W″|` on `[−1, 1]`.
    pub fn max_curvature(&self) -> T {
        match self.kind {
            PotentialKind::Quartic => T::lit(2.0),
            PotentialKind::PeierlsNabarro => T::one(),
            PotentialKind::Custom => {
                let m = (0..=2000)
                    .map(|k| self.d2w(T::lit(-1.0 + k as f64 / 1000.0)).abs().f64())
                    .fold(0.0, f64::max);
                T::lit(m)
            }
        }
    }

    /// Samples the double-well structure and the stored constants.
    pub fn audit(&self, samples: usize) -> PotentialAudit {
        let ts: Vec<f64> = (0..samples)
            .map(|k| -1.0 + 2.0 * k as f64 / (samples - 1) as f64)
            .collect();
        let w = |t: f64| self.w(T::lit(t)).f64();
        let dw = |t: f64| self.dw(T::lit(t)).f64();
        let d2w = |t: f64| self.d2w(T::lit(t)).f64();
        let wells_zero = w(-1.0).abs() < 1e-12 && w(1.0).abs() < 1e-12;
        let positive_inside = ts.iter().filter(|t| t.abs() < 1.0 - 1e-9).all(|&t| w(t) > 0.0);
        let convex_wells = d2w(-1.0) > 0.0 && d2w(1.0) > 0.0;
        let interior: Vec<f64> = ts.iter().copied().filter(|t| t.abs() < 1.0 - 1e-6).collect();
        let mut sign_changes = Vec::new();
        for pair in interior.windows(2) {
            let (a, b) = (dw(pair[0]), dw(pair[1]));
            if a == 0.0 || a * b < 0.0 {
                sign_changes.push(pair[0]);
            }
        }
        let unique_critical = sign_changes.len() == 1 && d2w(sign_changes[0]) < 0.0;
        let (c0, nu0, nu1) = (self.c0.f64(), self.nu0.f64(), self.nu1.f64());
        let mut structure = c0 > 0.0 && c0 < 2.0 / 3.0 && nu0 > 0.0 && nu1 > 0.0;
        for &t in ts.iter().filter(|t| **t >= 0.0) {
            if t <= c0 {
                structure &= -d2w(t) >= nu0 && -d2w(-t) >= nu0;
            }
            if t >= 1.0 - c0 {
                structure &= d2w(t) >= nu0 && d2w(-t) >= nu0;
            }
            if t >= 0.5 * c0 && t <= 1.0 - c0 {
                structure &= -dw(t) >= nu1 && dw(-t) >= nu1;
            }
        }
        PotentialAudit {
            wells_zero,
            positive_inside,
            convex_wells,
            unique_critical,
            structure_constants: structure,
            pass: wells_zero && positive_inside && convex_wells && unique_critical && structure,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct PotentialAudit {
    pub wells_zero: bool,
    pub positive_inside: bool,
    pub convex_wells: bool,
    pub unique_critical: bool,
    pub structure_constants: bool,
    pub pass: bool,
}

/// Localised energy split into its two parts.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub sobolev: T,
    pub potential: T,
    pub region: BallRegion<T>,
    pub epsilon: T,
    /// Sampling error of the pair sums (zero: all sums are exact).
    pub stderr: T,
}

impl<T: Real> EnergyBreakdown<T> {
    pub fn total(&self) -> T {
        self.sobolev + self.potential
    }

    /// `{region, epsilon, sobolev, potential, stderr}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "region": {
                "center": self.region.center.iter().map(|v| v.f64()).collect::<Vec<_>>(),
                "radius": self.region.radius.f64(),
            },
            "epsilon": self.epsilon.f64(),
            "sobolev": self.sobolev.f64(),
            "potential": self.potential.f64(),
            "stderr": self.stderr.f64(),
        })
    }
}

/// `ε^{−s}` weight of the potential term.
pub fn potential_weight<T: Real>(epsilon: T, s: T) -> T {
    epsilon.powf(-s)
}

/// An operator, a potential and a scale: everything needed to evaluate `E` and its gradient.
pub struct EnergyModel<T: Real> {
    pub op: DiscreteOperator<T>,
    pub potential: Potential<T>,
    pub epsilon: T,
    pub spec: KernelSpec<T>,
    weight: T,
}

impl<T: Real> EnergyModel<T> {
    pub fn new(
        grid: &crate::field::Grid<T>,
        spec: &KernelSpec<T>,
        potential: &Potential<T>,
        epsilon: T,
    ) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(LabError::Config("epsilon must be positive".into()));
        }
        Ok(EnergyModel {
            op: DiscreteOperator::new(grid, spec)?,
            potential: potential.clone(),
            epsilon,
            spec: spec.clone(),
            weight: potential_weight(epsilon, spec.s),
        })
    }

    pub fn grid(&self) -> &crate::field::Grid<T> {
        self.op.grid()
    }

    /// `ε^{−s}`.
    pub fn potential_weight(&self) -> T {
        self.weight
    }

    pub fn sobolev(&self, u: &[T], mask: &[bool]) -> Result<T> {
        self.op.sobolev_energy(u, mask)
    }

    pub fn potential_energy(&self, u: &[T], mask: &[bool]) -> T {
        let mut s = T::zero();
        for (v, m) in u.iter().zip(mask) {
            if *m {
                s += self.potential.w(*v);
            }
        }
        s * self.weight * self.grid().cell_volume()
    }

    /// Energy of the whole box (every node in the region).
    pub fn total(&self, u: &[T]) -> Result<T> {
        let all = vec![true; u.len()];
        Ok(self.sobolev(u, &all)? + self.potential_energy(u, &all))
    }

    /// `L u + ε^{−s} W′(u)`: the gradient of the box energy divided by `h^n`.
    pub fn residual(&self, u: &[T]) -> Vec<T> {
        let mut r = self.op.apply_values(u);
        for (ri, ui) in r.iter_mut().zip(u) {
            *ri += self.weight * self.potential.dw(*ui);
        }
        r
    }

    /// `L ξ + ε^{−s} W″(u) ξ`.
    pub fn hessian_apply(&self, u: &[T], xi: &[T]) -> Vec<T> {
        let mut r = self.op.apply_homogeneous(xi);
        for i in 0..r.len() {
            r[i] += self.weight * self.potential.d2w(u[i]) * xi[i];
        }
        r
    }

    pub fn breakdown(&self, u: &ScalarField<T>, region: &BallRegion<T>) -> Result<EnergyBreakdown<T>> {
        u.grid.check_region(region)?;
        let mask = u.grid.region_mask(region);
        Ok(EnergyBreakdown {
            sobolev: self.sobolev(&u.values, &mask)?,
            potential: self.potential_energy(&u.values, &mask),
            region: region.clone(),
            epsilon: self.epsilon,
            stderr: T::zero(),
        })
    }
}

/// `E^Sob_Ω(u)`.
pub fn energy_sobolev<T: Real>(u: &ScalarField<T>, region: &BallRegion<T>, spec: &KernelSpec<T>) -> Result<T> {
    u.grid.check_region(region)?;
    let op = DiscreteOperator::new(&u.grid, spec)?;
    op.sobolev_energy(&u.values, &u.grid.region_mask(region))
}

/// `ε^{−s} h^n Σ_{Ω} W(u)`.
pub fn energy_potential<T: Real>(
    u: &ScalarField<T>,
    region: &BallRegion<T>,
    w: &Potential<T>,
    epsilon: T,
    s: T,
) -> Result<T> {
    u.grid.check_region(region)?;
    let n = u.grid.dimension();
    let mut acc = T::zero();
    for i in 0..u.grid.len() {
        if region.contains(&u.grid.point(i)[..n]) {
            acc += w.w(u.values[i]);
        }
    }
    Ok(acc * potential_weight(epsilon, s) * u.grid.cell_volume())
}

/// Sign field `χ_E − χ_{E^c}` of a set whose grid carries a `±1` exterior model.
fn set_sign_field<T: Real>(e: &IndicatorSet<T>) -> Result<ScalarField<T>> {
    match e.grid.boundary() {
        BoundaryModel::ExteriorConstant(ext) => {
            let ok = |v: T| v == T::one() || v == -T::one();
            if !ok(ext.plus) || !ok(ext.minus) {
                return Err(LabError::Config("set exterior must take the values ±1".into()));
            }
            Ok(e.sign_field())
        }
        BoundaryModel::Periodic => Ok(e.sign_field()),
        BoundaryModel::ExteriorField => Err(LabError::MissingExterior),
    }
}

/// `P_s(E, Ω)` through the two interaction integrals `L(E∩Ω, E^c) + L(E∖Ω, E^c∩Ω)`.
pub fn fractional_perimeter<T: Real>(e: &IndicatorSet<T>, region: &BallRegion<T>, s: T) -> Result<T> {
    if !(s > T::zero() && s < T::one()) {
        return Err(LabError::Config("perimeter needs s in (0, 1)".into()));
    }
    e.grid.check_region(region)?;
    let signs = set_sign_field(e)?;
    let op = NonlocalOperator::new(&e.grid, &KernelSpec::perimeter(s))?;
    let mask = e.grid.region_mask(region);
    perimeter_by_interactions(&op, &signs.values, &mask)
}

/// `P_s` from a field with values in `[-1, 1]` (`+1` inside `E`), summed as interactions.
pub(crate) fn perimeter_by_interactions<T: Real>(
    op: &NonlocalOperator<T>,
    signs: &[T],
    mask: &[bool],
) -> Result<T> {
    let len = signs.len();
    let half = T::lit(0.5);
    let chi_e: Vec<T> = signs.iter().map(|v| (T::one() + *v) * half).collect();
    let chi_c: Vec<T> = chi_e.iter().map(|v| T::one() - *v).collect();
    let chi_e_in: Vec<T> = (0..len).map(|i| if mask[i] { chi_e[i] } else { T::zero() }).collect();
    let conv_c = op.convolve(&chi_c);
    let conv_e = op.convolve(&chi_e);
    let conv_e_in = op.convolve_interior(&chi_e_in);
    let mut first = T::zero();
    let mut second = T::zero();
    let (tp, tm, vp, vm) = match op.exterior_coupling() {
        Some((a, b, c, d)) => (Some(a), Some(b), c, d),
        None => (None, None, T::one(), -T::one()),
    };
    let ext_c = |i: usize| -> T {
        match (tp, tm) {
            (Some(a), Some(b)) => a[i] * (T::one() - vp) * half + b[i] * (T::one() - vm) * half,
            _ => T::zero(),
        }
    };
    let ext_e = |i: usize| -> T {
        match (tp, tm) {
            (Some(a), Some(b)) => a[i] * (T::one() + vp) * half + b[i] * (T::one() + vm) * half,
            _ => T::zero(),
        }
    };
    for i in 0..len {
        if !mask[i] {
            continue;
        }
        // L(E∩Ω, E^c): grid partners plus exterior partners
        first += chi_e[i] * (conv_c[i] + ext_c(i));
        // L(E∖Ω, E^c∩Ω): partners in E outside Ω
        second += chi_c[i] * (conv_e[i] - conv_e_in[i] + ext_e(i));
    }
    Ok((first + second) * op.grid().cell_volume())
}

/// Relative residual of `P_s(E, Ω) = 2 E^Sob_Ω(χ_E)` with the kernel `|z|^{−n−s}`.
pub fn perimeter_energy_identity<T: Real>(e: &IndicatorSet<T>, region: &BallRegion<T>, s: T) -> Result<T> {
    e.grid.check_region(region)?;
    let signs = set_sign_field(e)?;
    let op = NonlocalOperator::new(&e.grid, &KernelSpec::perimeter(s))?;
    let mask = e.grid.region_mask(region);
    let per = perimeter_by_interactions(&op, &signs.values, &mask)?;
    // χ_E = (σ + 1)/2, so E^Sob(χ_E) = E^Sob(σ)/4
    let two_e = T::lit(2.0) * op.sobolev_energy(&signs.values, &mask) / T::lit(4.0);
    let scale = per.abs().max(two_e.abs());
    if scale == T::zero() {
        return Ok(T::zero());
    }
    Ok((per - two_e).abs() / scale)
}

/// The map `Ψ_t(y) = y + t φ₄(y) v`.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationMap<T> {
    pub direction: Vec<T>,
    pub t: T,
}

impl<T: Real> VariationMap<T> {
    pub fn new(direction: Vec<T>, t: T) -> Result<Self> {
        if t.abs() >= T::one() {
            return Err(LabError::Config("|t| must be below 1".into()));
        }
        let norm = direction.iter().map(|v| *v * *v).sum::<T>().sqrt();
        if (norm - T::one()).abs() > T::lit(1e-9) {
            return Err(LabError::Config("direction must be a unit vector".into()));
        }
        Ok(VariationMap { direction, t })
    }

    /// `φ₄`: 1 on `B₂`, 0 outside `B₄`, linear in `|y|` between.
    #[inline]
    pub fn cutoff(y: &[T]) -> T {
        let r = y.iter().map(|v| *v * *v).sum::<T>().sqrt();
        let two = T::lit(2.0);
        if r <= two {
            T::one()
        } else if r >= T::lit(4.0) {
            T::zero()
        } else {
            (T::lit(4.0) - r) / two
        }
    }

    pub fn forward(&self, y: &[T]) -> Vec<T> {
        let c = Self::cutoff(y) * self.t;
        y.iter().zip(&self.direction).map(|(a, v)| *a + c * *v).collect()
    }

    /// `Ψ_t^{−1}(x)` by fixed-point iteration (a contraction since `|t| Lip φ₄ ≤ 1/2`).
    pub fn inverse(&self, x: &[T]) -> Vec<T> {
        let mut y = x.to_vec();
        for _ in 0..200 {
            let c = Self::cutoff(&y) * self.t;
            let next: Vec<T> = x.iter().zip(&self.direction).map(|(a, v)| *a - c * *v).collect();
            let diff = next
                .iter()
                .zip(&y)
                .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()));
            y = next;
            if diff < T::lit(1e-15) {
                break;
            }
        }
        y
    }

    pub fn with_t(&self, t: T) -> Result<Self> {
        Self::new(self.direction.clone(), t)
    }
}

/// `u_t = u ∘ Ψ_t^{−1}` sampled by multilinear interpolation.
pub fn domain_variation<T: Real>(u: &ScalarField<T>, map: &VariationMap<T>) -> Result<ScalarField<T>> {
    if map.t.abs() >= T::one() {
        return Err(LabError::Config("|t| must be below 1".into()));
    }
    if u.grid.box_radius() < T::lit(4.0) {
        return Err(LabError::OutOfDomain("the box must contain B_4".into()));
    }
    if map.t == T::zero() {
        return Ok(u.clone());
    }
    let n = u.grid.dimension();
    let mut values = Vec::with_capacity(u.grid.len());
    for i in 0..u.grid.len() {
        let x = u.grid.point(i);
        if VariationMap::cutoff(&x[..n]) == T::zero() && x[..n].iter().map(|v| *v * *v).sum::<T>() >= T::lit(16.0) {
            values.push(u.values[i]);
            continue;
        }
        let y = map.inverse(&x[..n]);
        values.push(u.sample(&y)?);
    }
    ScalarField::new(u.grid.clone(), values)
}

/// Second differences of the energy under `Ψ_{±t}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TranslationComparison<T> {
    pub second_difference: T,
    pub sobolev_part: T,
    pub potential_part: T,
    /// `second_difference / (t² E^Sob_{B₄}(u))`; `None` when `E^Sob` vanishes.
    pub bound_ratio: Option<T>,
}

/// `E_{B₄}(u_t) + E_{B₄}(u_{−t}) − 2E_{B₄}(u)` and its ratio to `t² E^Sob_{B₄}(u)`.
pub fn translation_comparison<T: Real>(
    u: &ScalarField<T>,
    map: &VariationMap<T>,
    model: &EnergyModel<T>,
) -> Result<TranslationComparison<T>> {
    let n = u.grid.dimension();
    let region = BallRegion::centered(n, T::lit(4.0));
    u.grid.check_region(&region)?;
    let mask = u.grid.region_mask(&region);
    let up = domain_variation(u, map)?;
    let um = domain_variation(u, &map.with_t(-map.t)?)?;
    let s0 = model.sobolev(&u.values, &mask)?;
    let sp = model.sobolev(&up.values, &mask)?;
    let sm = model.sobolev(&um.values, &mask)?;
    let p0 = model.potential_energy(&u.values, &mask);
    let pp = model.potential_energy(&up.values, &mask);
    let pm = model.potential_energy(&um.values, &mask);
    let two = T::lit(2.0);
    let sob = sp + sm - two * s0;
    let pot = pp + pm - two * p0;
    let bound_ratio = if s0 > T::lit(1e-12) {
        Some((sob + pot) / (map.t * map.t * s0))
    } else {
        None
    };
    Ok(TranslationComparison {
        second_difference: sob + pot,
        sobolev_part: sob,
        potential_part: pot,
        bound_ratio,
    })
}

/// `|LHS − RHS|` of `|M(x)−M(x̄)|² + |m(x)−m(x̄)|² − |u(x)−u(x̄)|² − |u_t(x)−u_t(x̄)|²
/// = −2(u(x)−u_t(x))₊ (u(x̄)−u_t(x̄))₋` with `M = max(u,u_t)`, `m = min(u,u_t)`.
///
/// The right side is taken symmetric in `x ↔ x̄` (the mirrored product is added), so
/// the identity holds for every quadruple.
pub fn maxmin_identity_check<T: Real>(ux: T, utx: T, uy: T, uty: T) -> T {
    let (mx, my) = (ux.max(utx), uy.max(uty));
    let (nx, ny) = (ux.min(utx), uy.min(uty));
    let sq = |a: T| a * a;
    let lhs = sq(mx - my) + sq(nx - ny) - sq(ux - uy) - sq(utx - uty);
    let (a, b) = (ux - utx, uy - uty);
    let z = T::zero();
    let rhs = -T::lit(2.0) * (a.max(z) * (-b).max(z) + (-a).max(z) * b.max(z));
    (lhs - rhs).abs()
}

/// Outcome of the `∫_{B₁}|∇u| ≤ 2n(|B₁^{n−1}| + √η)` check.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBound<T> {
    pub lhs: T,
    pub rhs: T,
    pub eta: T,
    pub pass: bool,
}

/// Measures `η` from directional difference quotients over `t_list` and checks the
/// gradient bound on `B₁`.
pub fn gradient_bound_check<T: Real>(
    u: &ScalarField<T>,
    directions: &[Vec<T>],
    t_list: &[T],
) -> Result<GradientBound<T>> {
    let g = &u.grid;
    let n = g.dimension();
    let b1 = BallRegion::centered(n, T::one());
    let nodes = g.nodes_in(&b1);
    let hn = g.cell_volume();
    let mut eta = T::zero();
    for v in directions {
        // the limsup along t → 0 is read off at the smallest |t|
        let t = t_list
            .iter()
            .copied()
            .fold(T::infinity(), |m, t| if t.abs() < m.abs() { t } else { m });
        let mut pos = T::zero();
        let mut neg = T::zero();
        for &i in &nodes {
            let x = g.point(i);
            let y: Vec<T> = (0..n).map(|a| x[a] - t * v[a]).collect();
            let d = u.values[i] - u.sample(&y)?;
            if d > T::zero() {
                pos += d;
            } else {
                neg -= d;
            }
        }
        eta = eta.max(pos * hn * neg * hn / (t * t));
    }
    let lhs = crate::field::gradient_l1_norm(u, &b1)?;
    let unit_ball = match n {
        1 => T::one(),
        2 => T::lit(2.0),
        _ => T::PI(),
    };
    let rhs = T::lit(2.0 * n as f64) * (unit_ball + eta.sqrt());
    Ok(GradientBound {
        lhs,
        rhs,
        eta,
        pass: lhs <= rhs,
    })
}

/// A grid identical to `grid` but with exterior value `c` everywhere.
pub fn uniform_exterior<T: Real>(grid: &crate::field::Grid<T>, c: T) -> Result<crate::field::Grid<T>> {
    grid.with_boundary(BoundaryModel::ExteriorConstant(ExteriorConstant::uniform(
        grid.dimension(),
        c,
    )))
}
