//! Critical points of the energy: gradient flows, Newton refinement and the 1D layer.

use rustfft::FftPlanner;

use crate::energy::{EnergyModel, Potential};
use crate::error::{LabError, Result};
use crate::fft::apply_multiplier;
use crate::field::{make_grid, BoundaryModel, ScalarField};
use crate::kernel::{unit_width_epsilon, DiscreteOperator, KernelSpec};
use crate::linalg::{conjugate_gradient, Lu};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    SemiImplicitSpectral,
    ExplicitFlow,
    Newton,
}

impl std::str::FromStr for Scheme {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semi_implicit_spectral" => Ok(Scheme::SemiImplicitSpectral),
            "explicit_flow" => Ok(Scheme::ExplicitFlow),
            "newton" => Ok(Scheme::Newton),
            other => Err(LabError::Parse(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveConfig<T: Real> {
    pub epsilon: T,
    pub scheme: Scheme,
    /// Time step; `None` picks `0.4 / (ε^{−s} max|W″|)`.
    pub step: Option<T>,
    pub max_iterations: usize,
    pub residual_tol: T,
    pub seed_field: ScalarField<T>,
}

impl<T: Real> SolveConfig<T> {
    pub fn new(seed_field: ScalarField<T>, epsilon: T) -> Self {
        SolveConfig {
            epsilon,
            scheme: Scheme::SemiImplicitSpectral,
            step: None,
            max_iterations: 20_000,
            residual_tol: T::lit(1e-8),
            seed_field,
        }
    }

    pub fn scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn step(mut self, step: T) -> Self {
        self.step = Some(step);
        self
    }

    pub fn max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn residual_tol(mut self, tol: T) -> Self {
        self.residual_tol = tol;
        self
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult<T: Real> {
    pub field: ScalarField<T>,
    pub residual_sup: T,
    pub iterations: usize,
    pub converged: bool,
    pub energy_trace: Vec<f64>,
}

impl<T: Real> SolveResult<T> {
    /// `{residual_sup, iterations, converged, energy_trace}`.
    pub fn convergence_record(&self) -> serde_json::Value {
        serde_json::json!({
            "residual_sup": self.residual_sup.f64(),
            "iterations": self.iterations,
            "converged": self.converged,
            "energy_trace": self.energy_trace,
        })
    }
}

fn sup<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// `(I + τ L_h)^{-1}` for the homogeneous operator: exact by FFT on periodic grids,
/// Jacobi-preconditioned CG otherwise.
struct ImplicitSolver<'a, T: Real> {
    op: &'a DiscreteOperator<T>,
    multipliers: Option<Vec<T>>,
    diag: Vec<T>,
}

impl<'a, T: Real> ImplicitSolver<'a, T> {
    fn new(op: &'a DiscreteOperator<T>) -> Self {
        let multipliers = match op {
            DiscreteOperator::Nonlocal(nl) => nl.multipliers(),
            DiscreteOperator::Classical(g) if g.is_periodic() => {
                let m = g.per_axis();
                let n = g.dimension();
                let h2 = g.spacing() * g.spacing();
                Some(
                    (0..g.len())
                        .map(|idx| {
                            let mut r = idx;
                            let mut acc = T::zero();
                            for _ in 0..n {
                                let k = T::of(r % m) * T::lit(2.0) * T::PI() / T::of(m);
                                r /= m;
                                acc += (T::lit(2.0) - T::lit(2.0) * k.cos()) / h2;
                            }
                            acc
                        })
                        .collect(),
                )
            }
            _ => None,
        };
        ImplicitSolver {
            op,
            multipliers,
            diag: op.diagonal(),
        }
    }

    fn solve(&self, tau: T, rhs: &[T], warm: Option<&[T]>) -> Vec<T> {
        let g = self.op.grid();
        if let Some(m) = &self.multipliers {
            let inv: Vec<T> = m.iter().map(|v| T::one() / (T::one() + tau * *v)).collect();
            let mut planner = FftPlanner::new();
            return apply_multiplier(rhs, g.per_axis(), g.dimension(), &inv, &mut planner);
        }
        let out = conjugate_gradient(
            |x| {
                let lx = self.op.apply_homogeneous(x);
                x.iter().zip(&lx).map(|(a, b)| *a + tau * *b).collect()
            },
            |r| {
                r.iter()
                    .zip(&self.diag)
                    .map(|(a, d)| *a / (T::one() + tau * *d))
                    .collect()
            },
            rhs,
            warm,
            T::lit(1e-13).max(T::epsilon() * T::lit(10.0)),
            2000,
        );
        out.x
    }
}

/// Relaxes `config.seed_field` towards a critical point of the box energy.
pub fn gradient_flow<T: Real>(
    config: &SolveConfig<T>,
    spec: &KernelSpec<T>,
    w: &Potential<T>,
) -> Result<SolveResult<T>> {
    let seed = &config.seed_field;
    if seed
        .values
        .iter()
        .any(|v| !(*v >= -T::one() && *v <= T::one()))
    {
        return Err(LabError::Precondition("seed values must lie in [-1, 1]".into()));
    }
    if config.max_iterations == 0 {
        return Err(LabError::Config("max_iterations must be positive".into()));
    }
    let model = EnergyModel::new(&seed.grid, spec, w, config.epsilon)?;
    let weight = model.potential_weight();
    let curvature = weight * w.max_curvature();
    let tau0 = config.step.unwrap_or(T::lit(0.4) / curvature);
    if !(tau0 > T::zero()) {
        return Err(LabError::Config("step must be positive".into()));
    }
    if config.scheme == Scheme::ExplicitFlow {
        let dmax = sup(&model.op.diagonal());
        let stiff = tau0 * (T::lit(2.0) * dmax + curvature);
        if stiff > T::one() {
            return Err(LabError::Precondition(format!(
                "explicit step {tau0} violates the stiffness bound (step x bound = {stiff})"
            )));
        }
    }
    let mut u = seed.values.clone();
    let mut energy = model.total(&u)?;
    let mut trace = vec![energy.f64()];
    let mut r = model.residual(&u);
    let mut res = sup(&r);
    let finish = |u: Vec<T>, res: T, it: usize, conv: bool, trace: Vec<f64>| -> Result<SolveResult<T>> {
        Ok(SolveResult {
            field: ScalarField::new(seed.grid.clone(), u)?,
            residual_sup: res,
            iterations: it,
            converged: conv,
            energy_trace: trace,
        })
    };
    if res <= config.residual_tol {
        return finish(u, res, 0, true, trace);
    }
    let implicit = ImplicitSolver::new(&model.op);
    let newton_switch = T::lit(1e-4).max(config.residual_tol);
    let mut tau = tau0;
    let mut increases = 0usize;
    let mut warm: Option<Vec<T>> = None;
    let mut it = 0;
    while it < config.max_iterations {
        it += 1;
        let use_newton = config.scheme == Scheme::Newton && res <= newton_switch;
        if use_newton {
            if let Some((next, e_next, r_next)) = newton_step(&model, &u, &r, energy)? {
                u = next;
                energy = e_next;
                r = r_next;
                res = sup(&r);
                trace.push(energy.f64());
                if res <= config.residual_tol {
                    return finish(u, res, it, true, trace);
                }
                continue;
            }
        }
        let candidate: Vec<T> = match config.scheme {
            Scheme::ExplicitFlow => u.iter().zip(&r).map(|(a, b)| *a - tau * *b).collect(),
            _ => {
                let d = implicit.solve(tau, &r, warm.as_deref());
                let next = u.iter().zip(&d).map(|(a, b)| *a - tau * *b).collect();
                warm = Some(d);
                next
            }
        };
        let e_new = model.total(&candidate)?;
        let slack = T::lit(1e-10) * energy.abs().max(T::one());
        if e_new > energy + slack {
            increases += 1;
            trace.push(e_new.f64());
            if increases >= 10 {
                return Err(LabError::Instability {
                    steps: increases,
                    energy_trace: trace,
                });
            }
            trace.pop();
            tau /= T::lit(2.0);
            warm = None;
            continue;
        }
        increases = 0;
        u = candidate;
        energy = e_new;
        trace.push(energy.f64());
        r = model.residual(&u);
        res = sup(&r);
        if res <= config.residual_tol {
            return finish(u, res, it, true, trace);
        }
        if !res.is_finite() {
            return Err(LabError::Instability {
                steps: it,
                energy_trace: trace,
            });
        }
    }
    finish(u, res, it, false, trace)
}

/// One damped Newton step with a CG inner solve; `None` when the Hessian shows negative
/// curvature or no step length reduces the residual.
fn newton_step<T: Real>(
    model: &EnergyModel<T>,
    u: &[T],
    r: &[T],
    energy: T,
) -> Result<Option<(Vec<T>, T, Vec<T>)>> {
    let weight = model.potential_weight();
    let diag = model.op.diagonal();
    let pre: Vec<T> = (0..u.len())
        .map(|i| {
            let d = diag[i] + weight * model.potential.d2w(u[i]);
            if d > T::zero() {
                T::one() / d
            } else {
                T::one() / diag[i]
            }
        })
        .collect();
    let rhs: Vec<T> = r.iter().map(|v| -*v).collect();
    let out = conjugate_gradient(
        |x| model.hessian_apply(u, x),
        |v| v.iter().zip(&pre).map(|(a, b)| *a * *b).collect(),
        &rhs,
        None,
        T::lit(1e-10),
        2000,
    );
    if out.negative_curvature {
        return Ok(None);
    }
    let res0 = sup(r);
    let mut alpha = T::one();
    for _ in 0..12 {
        let next: Vec<T> = u
            .iter()
            .zip(&out.x)
            .map(|(a, d)| (*a + alpha * *d).max(-T::one()).min(T::one()))
            .collect();
        let rn = model.residual(&next);
        if sup(&rn) < res0 {
            let e = model.total(&next)?;
            let slack = T::lit(1e-10) * energy.abs().max(T::one());
            if e <= energy + slack {
                return Ok(Some((next, e, rn)));
            }
        }
        alpha /= T::lit(2.0);
    }
    Ok(None)
}

/// Converged 1D layer with its diagnostics.
#[derive(Clone, Debug)]
pub struct LayerSolution<T: Real> {
    pub field: ScalarField<T>,
    pub epsilon: T,
    pub residual_sup: T,
    pub newton_steps: usize,
    /// `max |φ(x) + φ(−x)|` after the unconstrained re-solve.
    pub symmetry_defect: T,
}

/// Dense matrix of the homogeneous operator, built column by column.
fn dense_operator<T: Real>(op: &DiscreteOperator<T>) -> Vec<T> {
    let len = op.grid().len();
    let mut a = vec![T::zero(); len * len];
    let mut e = vec![T::zero(); len];
    for k in 0..len {
        e[k] = T::one();
        let col = op.apply_homogeneous(&e);
        for i in 0..len {
            a[i * len + k] = col[i];
        }
        e[k] = T::zero();
    }
    a
}

/// Odd monotone layer of `L u + ε^{−s} W′(u) = 0` on `[−L, L]` with exterior data `±1`.
///
/// Newton runs on the odd-reduced unknowns `x > 0`; the result is then re-solved without
/// the symmetry constraint and the defect is reported.
pub fn solve_layer<T: Real>(
    spec: &KernelSpec<T>,
    w: &Potential<T>,
    epsilon: T,
    box_radius: T,
    h: T,
    tol: T,
) -> Result<LayerSolution<T>> {
    for k in 1..50 {
        let t = T::lit(k as f64 / 50.0);
        if (w.dw(t) + w.dw(-t)).abs() > T::lit(1e-12) {
            return Err(LabError::Precondition("layer solver needs an even potential".into()));
        }
    }
    let grid = make_grid(1, box_radius, h, BoundaryModel::signs(vec![T::one()]))?;
    let model = EnergyModel::new(&grid, spec, w, epsilon)?;
    let weight = model.potential_weight();
    let len = grid.len();
    let half = len / 2;
    let lmat = dense_operator(&model.op);
    // a few implicit flow steps make the Newton start robust
    let width = if spec.is_classical() {
        T::lit(2.0).sqrt() * epsilon
    } else {
        T::one()
    };
    let seed = ScalarField::from_fn(&grid, |x| (x[0] / width).tanh());
    let pre = gradient_flow(
        &SolveConfig::new(seed, epsilon)
            .residual_tol(T::lit(1e-2))
            .max_iterations(400),
        spec,
        w,
    )?;
    let mut u = pre.field.values;
    for i in 0..half {
        let v = (u[len - 1 - i] - u[i]) / T::lit(2.0);
        u[len - 1 - i] = v;
        u[i] = -v;
    }
    let m = len - half;
    let mut steps = 0;
    let mut r = model.residual(&u);
    let mut res = sup(&r);
    while res > tol {
        if steps >= 60 {
            return Err(LabError::NoConvergence {
                iterations: steps,
                residual: res.f64(),
            });
        }
        steps += 1;
        let mut jr = vec![T::zero(); m * m];
        for a in 0..m {
            let i = half + a;
            for b in 0..m {
                let k = half + b;
                let mirror = len - 1 - k;
                jr[a * m + b] = lmat[i * len + k] - lmat[i * len + mirror];
            }
            jr[a * m + a] += weight * w.d2w(u[i]);
        }
        let rhs: Vec<T> = (0..m).map(|a| -r[half + a]).collect();
        let delta = Lu::factor(m, jr)?.solve(&rhs);
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..20 {
            let mut next = u.clone();
            for b in 0..m {
                let v = (u[half + b] + alpha * delta[b]).max(-T::one()).min(T::one());
                next[half + b] = v;
                next[len - 1 - (half + b)] = -v;
            }
            let rn = model.residual(&next);
            let rs = sup(&rn);
            if rs < res {
                u = next;
                r = rn;
                res = rs;
                accepted = true;
                break;
            }
            alpha /= T::lit(2.0);
        }
        if !accepted {
            return Err(LabError::NoConvergence {
                iterations: steps,
                residual: res.f64(),
            });
        }
    }
    // unconstrained verification: the pinned profile is kept, the free one measures the defect
    let mut free = u.clone();
    let mut free_r = r.clone();
    for _ in 0..2 {
        let mut j = lmat.clone();
        for i in 0..len {
            j[i * len + i] += weight * w.d2w(free[i]);
        }
        let rhs: Vec<T> = free_r.iter().map(|v| -*v).collect();
        let delta = Lu::factor(len, j)?.solve(&rhs);
        let next: Vec<T> = free.iter().zip(&delta).map(|(a, d)| *a + *d).collect();
        let rn = model.residual(&next);
        if sup(&rn) <= sup(&free_r).max(tol) {
            free = next;
            free_r = rn;
        }
    }
    let symmetry_defect = (0..half).fold(T::zero(), |m, i| m.max((free[i] + free[len - 1 - i]).abs()));
    Ok(LayerSolution {
        field: ScalarField::new(grid, u)?.with_range_hint(-T::one(), T::one())?,
        epsilon,
        residual_sup: res,
        newton_steps: steps,
        symmetry_defect,
    })
}

/// The fractional layer for the quartic potential at the unit-width scale `ε_*`.
pub fn solve_layer_1d<T: Real>(s: T, box_radius: T, h: T, tol: T) -> Result<ScalarField<T>> {
    if !(s > T::zero() && s < T::one()) {
        return Err(LabError::Config("s must lie in (0, 1)".into()));
    }
    if box_radius < T::lit(20.0) {
        return Err(LabError::Precondition("box_radius must be at least 20".into()));
    }
    let eps = T::lit(unit_width_epsilon(1, s.f64()));
    Ok(solve_layer(&KernelSpec::fractional(s), &Potential::quartic(), eps, box_radius, h, tol)?.field)
}

/// `sup |L φ′ + ε^{−s} W″(φ) φ′|` over `|x| < L/2` for a 1D profile, with `φ′` the central
/// difference (ghosts from the boundary model) and `W″(φ)` the matching secant
/// `(W′(φ_{i+1}) − W′(φ_{i−1})) / (φ_{i+1} − φ_{i−1})`.
pub fn translation_degeneracy<T: Real>(
    u: &ScalarField<T>,
    spec: &KernelSpec<T>,
    w: &Potential<T>,
    epsilon: T,
) -> Result<T> {
    let g = &u.grid;
    if g.dimension() != 1 {
        return Err(LabError::UnsupportedDimension(g.dimension()));
    }
    let model = EnergyModel::new(g, spec, w, epsilon)?;
    let m = g.len() as isize;
    let two_h = T::lit(2.0) * g.spacing();
    let mut d = Vec::with_capacity(g.len());
    let mut sec = Vec::with_capacity(g.len());
    for i in 0..m {
        let a = u.ghost_value(&[i + 1])?;
        let b = u.ghost_value(&[i - 1])?;
        d.push((a - b) / two_h);
        sec.push((w.dw(a) - w.dw(b)) / two_h);
    }
    let ld = model.op.apply_homogeneous(&d);
    let half = g.box_radius() / T::lit(2.0);
    let mut worst = T::zero();
    for i in 0..g.len() {
        if g.point(i)[0].abs() < half {
            worst = worst.max((ld[i] + model.potential_weight() * sec[i]).abs());
        }
    }
    Ok(worst)
}

/// Energy contributions in the Euler–Lagrange check, split by term.
#[derive(Clone, Debug, PartialEq)]
pub struct ElConsistency<T> {
    pub finite_difference: T,
    pub inner_product: T,
    /// `|fd − ip| / max(|fd_Sob| + |fd_Pot|, |ip_Sob| + |ip_Pot|)`.
    pub residual: T,
}

/// Compares `d/dτ E(u + τξ)` (five-point stencil, `τ = 10⁻³`) with `⟨L u + ε^{−s}W′(u), ξ⟩`.
pub fn el_consistency<T: Real>(
    u: &ScalarField<T>,
    xi: &ScalarField<T>,
    spec: &KernelSpec<T>,
    w: &Potential<T>,
    epsilon: T,
) -> Result<ElConsistency<T>> {
    crate::field::check_same(&u.grid, &xi.grid)?;
    let model = EnergyModel::new(&u.grid, spec, w, epsilon)?;
    let tau = T::lit(1e-3);
    let all = vec![true; u.grid.len()];
    let shifted = |k: T| -> Vec<T> {
        u.values
            .iter()
            .zip(&xi.values)
            .map(|(a, b)| *a + k * tau * *b)
            .collect()
    };
    let mut sob = [T::zero(); 4];
    let mut pot = [T::zero(); 4];
    for (j, k) in [-2.0, -1.0, 1.0, 2.0].into_iter().enumerate() {
        let v = shifted(T::lit(k));
        sob[j] = model.sobolev(&v, &all)?;
        pot[j] = model.potential_energy(&v, &all);
    }
    let twelve_tau = T::lit(12.0) * tau;
    let stencil = |e: [T; 4]| (T::lit(8.0) * (e[2] - e[1]) - (e[3] - e[0])) / twelve_tau;
    let (fd_sob, fd_pot) = (stencil(sob), stencil(pot));
    let hn = u.grid.cell_volume();
    let lu = model.op.apply_values(&u.values);
    let ip_sob = lu.iter().zip(&xi.values).map(|(a, b)| *a * *b).sum::<T>() * hn;
    let ip_pot = u
        .values
        .iter()
        .zip(&xi.values)
        .map(|(a, b)| model.potential_weight() * w.dw(*a) * *b)
        .sum::<T>()
        * hn;
    let fd = fd_sob + fd_pot;
    let ip = ip_sob + ip_pot;
    let scale = (fd_sob.abs() + fd_pot.abs()).max(ip_sob.abs() + ip_pot.abs());
    let residual = if scale == T::zero() {
        T::zero()
    } else {
        (fd - ip).abs() / scale
    };
    Ok(ElConsistency {
        finite_difference: fd,
        inner_product: ip,
        residual,
    })
}
