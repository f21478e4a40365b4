//! Grids, scalar fields, indicator sets and the distances between them.

use crate::error::{LabError, Result};
use crate::scalar::Real;

/// Oriented hyperplane `{x : normal·x = offset}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane<T> {
    pub normal: Vec<T>,
    pub offset: T,
}

impl<T: Real> Plane<T> {
    pub fn new(normal: Vec<T>, offset: T) -> Self {
        Plane { normal, offset }
    }

    #[inline]
    pub fn signed(&self, x: &[T]) -> T {
        let mut d = -self.offset;
        for (a, b) in self.normal.iter().zip(x) {
            d += *a * *b;
        }
        d
    }
}

/// Piecewise-constant continuation of a field outside the grid box.
///
/// A point takes the value `plus` when the product of its signed distances to
/// all planes is nonnegative, and `minus` otherwise. One plane gives a pair of
/// half-spaces; two planes give e.g. the cross `{x1 x2 > 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExteriorConstant<T> {
    pub plus: T,
    pub minus: T,
    pub planes: Vec<Plane<T>>,
}

impl<T: Real> ExteriorConstant<T> {
    pub fn half_space(normal: Vec<T>, offset: T, plus: T, minus: T) -> Self {
        ExteriorConstant {
            plus,
            minus,
            planes: vec![Plane::new(normal, offset)],
        }
    }

    /// `+1` on `{direction·x ≥ 0}`, `-1` elsewhere.
    pub fn signs(direction: Vec<T>) -> Self {
        Self::half_space(direction, T::zero(), T::one(), -T::one())
    }

    /// Same value on both sides.
    pub fn uniform(n: usize, value: T) -> Self {
        let mut normal = vec![T::zero(); n];
        normal[0] = T::one();
        Self::half_space(normal, T::zero(), value, value)
    }

    #[inline]
    pub fn is_plus(&self, x: &[T]) -> bool {
        let mut positive = true;
        for p in &self.planes {
            if p.signed(x) < T::zero() {
                positive = !positive;
            }
        }
        positive
    }

    #[inline]
    pub fn value_at(&self, x: &[T]) -> T {
        if self.is_plus(x) {
            self.plus
        } else {
            self.minus
        }
    }
}

/// How a field is continued outside `[-L, L]^n`.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryModel<T> {
    Periodic,
    ExteriorConstant(ExteriorConstant<T>),
    /// Exterior values exist in principle but are not stored.
    ExteriorField,
}

impl<T: Real> BoundaryModel<T> {
    pub fn signs(direction: Vec<T>) -> Self {
        BoundaryModel::ExteriorConstant(ExteriorConstant::signs(direction))
    }
}

/// Uniform cell-centred grid on `[-L, L]^n`.
///
/// Node `i` along an axis sits at `-L + (i + 1/2) h`, so the cells tile the box.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    n: usize,
    h: T,
    box_radius: T,
    per_axis: usize,
    boundary: BoundaryModel<T>,
}

/// Builds a grid, checking that `box_radius / h` is an integer.
pub fn make_grid<T: Real>(
    n: usize,
    box_radius: T,
    h: T,
    boundary: BoundaryModel<T>,
) -> Result<Grid<T>> {
    if !(1..=3).contains(&n) {
        return Err(LabError::UnsupportedDimension(n));
    }
    if !(h > T::zero()) || !(box_radius > T::zero()) {
        return Err(LabError::Config("h and box_radius must be positive".into()));
    }
    let ratio = (box_radius / h).f64();
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
        return Err(LabError::Config(format!(
            "box_radius/h = {ratio} is not an integer"
        )));
    }
    if let BoundaryModel::ExteriorConstant(ext) = &boundary {
        if ext.planes.is_empty() || ext.planes.iter().any(|p| p.normal.len() != n) {
            return Err(LabError::Config(
                "exterior planes must have one normal component per axis".into(),
            ));
        }
    }
    Ok(Grid {
        n,
        h,
        box_radius,
        per_axis: 2 * k as usize,
        boundary,
    })
}

impl<T: Real> Grid<T> {
    #[inline]
    pub fn dimension(&self) -> usize {
        self.n
    }
    #[inline]
    pub fn spacing(&self) -> T {
        self.h
    }
    #[inline]
    pub fn box_radius(&self) -> T {
        self.box_radius
    }
    #[inline]
    pub fn per_axis(&self) -> usize {
        self.per_axis
    }
    #[inline]
    pub fn boundary(&self) -> &BoundaryModel<T> {
        &self.boundary
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.per_axis.pow(self.n as u32)
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    #[inline]
    pub fn is_periodic(&self) -> bool {
        matches!(self.boundary, BoundaryModel::Periodic)
    }
    /// `h^n`.
    #[inline]
    pub fn cell_volume(&self) -> T {
        self.h.powi(self.n as i32)
    }

    pub fn with_boundary(&self, boundary: BoundaryModel<T>) -> Result<Grid<T>> {
        make_grid(self.n, self.box_radius, self.h, boundary)
    }

    pub fn exterior(&self) -> Option<&ExteriorConstant<T>> {
        match &self.boundary {
            BoundaryModel::ExteriorConstant(e) => Some(e),
            _ => None,
        }
    }

    /// Same node layout, boundary model ignored.
    pub fn same_nodes(&self, other: &Grid<T>) -> bool {
        self.n == other.n
            && self.per_axis == other.per_axis
            && self.h == other.h
            && self.box_radius == other.box_radius
    }

    #[inline]
    pub fn axis_coord(&self, i: usize) -> T {
        -self.box_radius + (T::of(i) + T::lit(0.5)) * self.h
    }

    /// Axis coordinate of a possibly out-of-range (ghost) index.
    #[inline]
    pub fn axis_coord_signed(&self, i: isize) -> T {
        let fi = T::from_isize(i).unwrap();
        -self.box_radius + (fi + T::lit(0.5)) * self.h
    }

    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let m = self.per_axis;
        let mut out = [0usize; 3];
        let mut r = idx;
        for a in (0..self.n).rev() {
            out[a] = r % m;
            r /= m;
        }
        out
    }

    #[inline]
    pub fn linear_index(&self, mi: &[usize]) -> usize {
        let mut idx = 0;
        for &i in mi.iter().take(self.n) {
            idx = idx * self.per_axis + i;
        }
        idx
    }

    /// Coordinates of node `idx`; unused trailing entries are zero.
    #[inline]
    pub fn point(&self, idx: usize) -> [T; 3] {
        let mi = self.multi_index(idx);
        let mut p = [T::zero(); 3];
        for a in 0..self.n {
            p[a] = self.axis_coord(mi[a]);
        }
        p
    }

    /// Whether `x` lies in the closed box.
    pub fn in_box(&self, x: &[T]) -> bool {
        x.iter().take(self.n).all(|v| v.abs() <= self.box_radius)
    }

    /// Whether node `idx` touches the box boundary along some axis.
    pub fn is_boundary_node(&self, idx: usize) -> bool {
        let mi = self.multi_index(idx);
        (0..self.n).any(|a| mi[a] == 0 || mi[a] + 1 == self.per_axis)
    }

    pub fn region_mask(&self, region: &BallRegion<T>) -> Vec<bool> {
        (0..self.len())
            .map(|i| region.contains(&self.point(i)[..self.n]))
            .collect()
    }

    pub fn nodes_in(&self, region: &BallRegion<T>) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| region.contains(&self.point(i)[..self.n]))
            .collect()
    }

    /// Checks that the region fits inside the box.
    pub fn check_region(&self, region: &BallRegion<T>) -> Result<()> {
        if region.center.len() != self.n {
            return Err(LabError::Config("region dimension mismatch".into()));
        }
        let c = region.center.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if region.radius + c > self.box_radius * (T::one() + T::lit(1e-12)) {
            return Err(LabError::OutOfDomain(format!(
                "ball of radius {} does not fit in box of radius {}",
                region.radius, self.box_radius
            )));
        }
        Ok(())
    }
}

/// Open ball `B_R(c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BallRegion<T> {
    pub center: Vec<T>,
    pub radius: T,
}

impl<T: Real> BallRegion<T> {
    pub fn new(center: Vec<T>, radius: T) -> Self {
        BallRegion { center, radius }
    }

    pub fn centered(n: usize, radius: T) -> Self {
        BallRegion {
            center: vec![T::zero(); n],
            radius,
        }
    }

    #[inline]
    pub fn contains(&self, x: &[T]) -> bool {
        let mut d2 = T::zero();
        for (a, c) in x.iter().zip(&self.center) {
            d2 += (*a - *c) * (*a - *c);
        }
        d2 < self.radius * self.radius
    }
}

/// Values on the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    pub grid: Grid<T>,
    pub values: Vec<T>,
    pub range_hint: Option<(T, T)>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(LabError::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField {
            grid,
            values,
            range_hint: None,
        })
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(&[T]) -> T) -> Self {
        let n = grid.dimension();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..n])).collect();
        ScalarField {
            grid: grid.clone(),
            values,
            range_hint: None,
        }
    }

    pub fn constant(grid: &Grid<T>, c: T) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.len()],
            range_hint: None,
        }
    }

    /// Attaches a range hint after checking every value against it.
    pub fn with_range_hint(mut self, lo: T, hi: T) -> Result<Self> {
        if let Some(v) = self.values.iter().find(|v| **v < lo || **v > hi) {
            return Err(LabError::Precondition(format!(
                "value {v} outside [{lo}, {hi}]"
            )));
        }
        self.range_hint = Some((lo, hi));
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
            range_hint: None,
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        Ok(ScalarField {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| f(*a, *b))
                .collect(),
            range_hint: None,
        })
    }

    /// `h^n Σ u v`.
    pub fn dot(&self, other: &Self) -> T {
        let s: T = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| *a * *b)
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Value at an integer index that may leave the grid by any amount.
    pub fn ghost_value(&self, mi: &[isize]) -> Result<T> {
        let n = self.grid.dimension();
        let m = self.grid.per_axis() as isize;
        let inside = mi.iter().take(n).all(|&i| (0..m).contains(&i));
        if inside {
            let u: Vec<usize> = mi.iter().take(n).map(|&i| i as usize).collect();
            return Ok(self.values[self.grid.linear_index(&u)]);
        }
        match self.grid.boundary() {
            BoundaryModel::Periodic => {
                let u: Vec<usize> = mi.iter().take(n).map(|&i| i.rem_euclid(m) as usize).collect();
                Ok(self.values[self.grid.linear_index(&u)])
            }
            BoundaryModel::ExteriorConstant(e) => {
                let mut x = [T::zero(); 3];
                for a in 0..n {
                    x[a] = self.grid.axis_coord_signed(mi[a]);
                }
                Ok(e.value_at(&x[..n]))
            }
            BoundaryModel::ExteriorField => {
                Err(LabError::OutOfDomain("no exterior values stored".into()))
            }
        }
    }

    /// Multilinear interpolation, continued by the boundary model.
    pub fn sample(&self, x: &[T]) -> Result<T> {
        let g = &self.grid;
        let n = g.dimension();
        let m = g.per_axis() as isize;
        if let BoundaryModel::ExteriorConstant(e) = g.boundary() {
            if !g.in_box(x) {
                return Ok(e.value_at(&x[..n]));
            }
        }
        let mut base = [0isize; 3];
        let mut w = [T::zero(); 3];
        for a in 0..n {
            let mut f = (x[a] + g.box_radius()) / g.spacing() - T::lit(0.5);
            if g.is_periodic() {
                let p = T::of(g.per_axis());
                f = f - (f / p).floor() * p;
            } else if matches!(g.boundary(), BoundaryModel::ExteriorField) {
                if x[a].abs() > g.box_radius() {
                    return Err(LabError::OutOfDomain(format!(
                        "sample at {} outside the box",
                        x[a]
                    )));
                }
                f = f.max(T::zero()).min(T::of(g.per_axis() - 1));
            }
            let mut i0 = f.floor();
            let mut t = f - i0;
            let snap = T::lit(1e-9);
            if t < snap {
                t = T::zero();
            } else if T::one() - t < snap {
                t = T::zero();
                i0 += T::one();
            }
            base[a] = i0.to_isize().unwrap();
            w[a] = t;
        }
        let mut acc = T::zero();
        for corner in 0..(1usize << n) {
            let mut weight = T::one();
            let mut mi = [0isize; 3];
            for a in 0..n {
                let bit = (corner >> a) & 1;
                weight *= if bit == 1 { w[a] } else { T::one() - w[a] };
                mi[a] = base[a] + bit as isize;
                if g.is_periodic() {
                    mi[a] = mi[a].rem_euclid(m);
                }
            }
            if weight == T::zero() {
                continue;
            }
            acc += weight * self.ghost_value(&mi[..n])?;
        }
        Ok(acc)
    }

    /// Central-difference gradient at node `idx`, using ghost values at the box edge.
    pub fn gradient_at(&self, idx: usize) -> Result<[T; 3]> {
        let g = &self.grid;
        let n = g.dimension();
        let mi = g.multi_index(idx);
        let mut grad = [T::zero(); 3];
        let two_h = g.spacing() + g.spacing();
        for a in 0..n {
            let mut p = [0isize; 3];
            let mut q = [0isize; 3];
            for b in 0..n {
                p[b] = mi[b] as isize;
                q[b] = mi[b] as isize;
            }
            p[a] += 1;
            q[a] -= 1;
            grad[a] = (self.ghost_value(&p[..n])? - self.ghost_value(&q[..n])?) / two_h;
        }
        Ok(grad)
    }
}

pub(crate) fn check_same<T: Real>(a: &Grid<T>, b: &Grid<T>) -> Result<()> {
    if a.same_nodes(b) {
        Ok(())
    } else {
        Err(LabError::GridMismatch("fields live on different grids".into()))
    }
}

/// Boolean membership per node. An exterior-constant continuation carries sign
/// values (`+1` in the set, `-1` outside).
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorSet<T> {
    pub grid: Grid<T>,
    pub membership: Vec<bool>,
}

impl<T: Real> IndicatorSet<T> {
    pub fn new(grid: Grid<T>, membership: Vec<bool>) -> Result<Self> {
        if membership.len() != grid.len() {
            return Err(LabError::GridMismatch("membership length".into()));
        }
        Ok(IndicatorSet { grid, membership })
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(&[T]) -> bool) -> Self {
        let n = grid.dimension();
        IndicatorSet {
            grid: grid.clone(),
            membership: (0..grid.len()).map(|i| f(&grid.point(i)[..n])).collect(),
        }
    }

    /// `χ_E − χ_{E^c}`.
    pub fn sign_field(&self) -> ScalarField<T> {
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .membership
                .iter()
                .map(|&b| if b { T::one() } else { -T::one() })
                .collect(),
            range_hint: Some((-T::one(), T::one())),
        }
    }

    /// `χ_E`.
    pub fn indicator_field(&self) -> ScalarField<T> {
        ScalarField {
            grid: self.grid.clone(),
            values: self
                .membership
                .iter()
                .map(|&b| if b { T::one() } else { T::zero() })
                .collect(),
            range_hint: Some((T::zero(), T::one())),
        }
    }

    /// `E^c`; an exterior-constant continuation has its values negated.
    pub fn complement(&self) -> Self {
        let grid = match self.grid.boundary() {
            BoundaryModel::ExteriorConstant(e) => {
                let mut flipped = e.clone();
                flipped.plus = -e.plus;
                flipped.minus = -e.minus;
                self.grid
                    .with_boundary(BoundaryModel::ExteriorConstant(flipped))
                    .expect("same layout")
            }
            _ => self.grid.clone(),
        };
        IndicatorSet {
            grid,
            membership: self.membership.iter().map(|b| !b).collect(),
        }
    }

    pub fn count(&self) -> usize {
        self.membership.iter().filter(|b| **b).count()
    }
}

/// `v(x) = u(R x)` sampled on `target`.
pub fn rescale_blowdown<T: Real>(
    u: &ScalarField<T>,
    r: T,
    target: &Grid<T>,
) -> Result<ScalarField<T>> {
    if !(r > T::zero()) {
        return Err(LabError::Config("blow-down factor must be positive".into()));
    }
    if target.dimension() != u.grid.dimension() {
        return Err(LabError::GridMismatch("dimension".into()));
    }
    if r == T::one() && target.same_nodes(&u.grid) {
        let mut v = u.clone();
        v.grid = target.clone();
        return Ok(v);
    }
    let n = target.dimension();
    let mut values = Vec::with_capacity(target.len());
    for i in 0..target.len() {
        let p = target.point(i);
        let mut x = [T::zero(); 3];
        for a in 0..n {
            x[a] = p[a] * r;
        }
        values.push(u.sample(&x[..n])?);
    }
    ScalarField::new(target.clone(), values)
}

/// `h^n Σ_{region} |f − g|`.
pub fn l1_distance<T: Real>(
    f: &ScalarField<T>,
    g: &ScalarField<T>,
    region: &BallRegion<T>,
) -> Result<T> {
    check_same(&f.grid, &g.grid)?;
    let n = f.grid.dimension();
    let mut s = T::zero();
    for i in 0..f.grid.len() {
        if region.contains(&f.grid.point(i)[..n]) {
            s += (f.values[i] - g.values[i]).abs();
        }
    }
    Ok(s * f.grid.cell_volume())
}

/// `h^n Σ_{region} |∇u|` with central differences.
pub fn gradient_l1_norm<T: Real>(u: &ScalarField<T>, region: &BallRegion<T>) -> Result<T> {
    let g = &u.grid;
    let n = g.dimension();
    let mut s = T::zero();
    for i in 0..g.len() {
        if !region.contains(&g.point(i)[..n]) {
            continue;
        }
        if !g.is_periodic() && g.is_boundary_node(i) {
            return Err(LabError::OutOfDomain(
                "region reaches the boundary layer of the stencil".into(),
            ));
        }
        let d = u.gradient_at(i)?;
        s += d[..n].iter().map(|v| *v * *v).sum::<T>().sqrt();
    }
    Ok(s * g.cell_volume())
}

/// `{u ≥ c}`.
pub fn level_set<T: Real>(u: &ScalarField<T>, c: T) -> IndicatorSet<T> {
    IndicatorSet {
        grid: u.grid.clone(),
        membership: u.values.iter().map(|v| *v >= c).collect(),
    }
}

/// Squared Euclidean distance (in cells) from every node to the nearest site.
///
/// Separable exact transform; sites absent gives `f64::INFINITY`.
pub fn squared_distance_transform(per_axis: usize, n: usize, sites: &[bool]) -> Vec<f64> {
    let mut d: Vec<f64> = sites
        .iter()
        .map(|&b| if b { 0.0 } else { f64::INFINITY })
        .collect();
    let m = per_axis;
    let mut line = vec![0.0; m];
    let mut out = vec![0.0; m];
    let mut v = vec![0usize; m];
    let mut z = vec![0.0; m + 1];
    for axis in 0..n {
        let stride = m.pow((n - 1 - axis) as u32);
        let lines = d.len() / m;
        for l in 0..lines {
            let low = l % stride;
            let high = l / stride;
            let start = high * stride * m + low;
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = d[start + k * stride];
            }
            dt_1d(&line, &mut out, &mut v, &mut z);
            for (k, val) in out.iter().enumerate() {
                d[start + k * stride] = *val;
            }
        }
    }
    d
}

fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let m = f.len();
    let finite: Vec<usize> = (0..m).filter(|&q| f[q].is_finite()).collect();
    if finite.is_empty() {
        d.iter_mut().for_each(|x| *x = f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    v[0] = finite[0];
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for &q in &finite[1..] {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, slot) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *slot = dq * dq + f[p];
    }
}

/// Hausdorff distance between the node sets `A ∩ region` and `B ∩ region`.
///
/// Returns `+∞` when either set misses the region.
pub fn hausdorff_distance<T: Real>(
    a: &IndicatorSet<T>,
    b: &IndicatorSet<T>,
    region: &BallRegion<T>,
) -> Result<T> {
    check_same(&a.grid, &b.grid)?;
    let g = &a.grid;
    let mask = g.region_mask(region);
    let sa: Vec<bool> = a.membership.iter().zip(&mask).map(|(x, m)| *x && *m).collect();
    let sb: Vec<bool> = b.membership.iter().zip(&mask).map(|(x, m)| *x && *m).collect();
    if !sa.iter().any(|x| *x) || !sb.iter().any(|x| *x) {
        return Ok(T::infinity());
    }
    let n = g.dimension();
    let da = squared_distance_transform(g.per_axis(), n, &sa);
    let db = squared_distance_transform(g.per_axis(), n, &sb);
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        if sa[i] {
            worst = worst.max(db[i]);
        }
        if sb[i] {
            worst = worst.max(da[i]);
        }
    }
    Ok(T::lit(worst.sqrt()) * g.spacing())
}

/// `u(x) = p(direction·x)` on `grid`.
pub fn embed_profile<T: Real>(
    p: &ScalarField<T>,
    direction: &[T],
    grid: &Grid<T>,
) -> Result<ScalarField<T>> {
    if p.grid.dimension() != 1 {
        return Err(LabError::Config("profile must be one-dimensional".into()));
    }
    let n = grid.dimension();
    if direction.len() != n {
        return Err(LabError::Config("direction dimension mismatch".into()));
    }
    let norm = direction.iter().map(|v| *v * *v).sum::<T>().sqrt();
    if (norm - T::one()).abs() > T::lit(1e-6) {
        return Err(LabError::Config("direction must be a unit vector".into()));
    }
    let reach = grid.box_radius() * T::of(n).sqrt();
    let covered = match p.grid.boundary() {
        BoundaryModel::ExteriorConstant(_) => true,
        _ => p.grid.box_radius() >= reach,
    };
    if !covered {
        return Err(LabError::OutOfDomain("insufficient profile coverage".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.point(i);
        let mut t = T::zero();
        for a in 0..n {
            t += direction[a] * x[a];
        }
        values.push(p.sample(&[t])?);
    }
    ScalarField::new(grid.clone(), values)
}
