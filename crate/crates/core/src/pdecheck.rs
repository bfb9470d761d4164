//! Finite-difference residuals of the governing equations applied to the
//! closed-form densities, with convergence-order estimation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::planar::reflecting_series::ReflectingSeries;
use crate::planar::{self, MarginalDensity, MotionSpec, Variant};
use crate::rates::RateFunction;
use crate::telegraph::telegraph_density_const;
use crate::{Error, Result};

/// Fraction of the light cone the grid may occupy.
pub const CONE_FRACTION: f64 = 0.8;
/// Stencil half-width of the widest difference used.
pub const MARGIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PDEKind {
    Standard4th,
    Reflecting4th,
    BoundarySide,
    BoundarySideReflecting,
    MarginalStandard3rd,
    MarginalReflecting3rd,
    Telegraph2nd,
}

impl PDEKind {
    pub const ALL: [PDEKind; 7] = [
        PDEKind::Standard4th,
        PDEKind::Reflecting4th,
        PDEKind::BoundarySide,
        PDEKind::BoundarySideReflecting,
        PDEKind::MarginalStandard3rd,
        PDEKind::MarginalReflecting3rd,
        PDEKind::Telegraph2nd,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PDEKind::Standard4th => "standard4th",
            PDEKind::Reflecting4th => "reflecting4th",
            PDEKind::BoundarySide => "boundary-side",
            PDEKind::BoundarySideReflecting => "boundary-side-reflecting",
            PDEKind::MarginalStandard3rd => "marginal-standard3rd",
            PDEKind::MarginalReflecting3rd => "marginal-reflecting3rd",
            PDEKind::Telegraph2nd => "telegraph2nd",
        }
    }

    /// Number of space axes.
    pub fn space_dims(&self) -> usize {
        match self {
            PDEKind::Standard4th | PDEKind::Reflecting4th => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for PDEKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PDEKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PDEKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown PDE form {s:?}")))
    }
}

/// Partial derivatives at one point. Space slot `x` holds η for the side
/// equations; `y` terms are zero for one space axis.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet {
    pub p: f64,
    pub t: f64,
    pub tt: f64,
    pub ttt: f64,
    pub tttt: f64,
    pub xx: f64,
    pub yy: f64,
    pub txx: f64,
    pub tyy: f64,
    pub ttxx: f64,
    pub ttyy: f64,
    pub xxyy: f64,
}

/// A governing equation with its coefficients. `rate` is the switching rate
/// of the motion (of the telegraph process for `Telegraph2nd`) and `c` its
/// speed.
#[derive(Debug, Clone)]
pub struct PDEForm {
    pub kind: PDEKind,
    pub rate: RateFunction,
    pub c: f64,
}

impl PDEForm {
    pub fn new(kind: PDEKind, rate: RateFunction, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("speed must be positive, got {c}")));
        }
        Ok(Self { kind, rate, c })
    }

    /// Residual of the operator at time t.
    pub fn apply(&self, t: f64, j: &Jet) -> f64 {
        let l = self.rate.eval(t);
        let l1 = self.rate.deriv1(t);
        let l2 = self.rate.deriv2(t);
        let c2 = self.c * self.c;
        match self.kind {
            PDEKind::Standard4th => {
                j.tttt
                    + 4.0 * l * j.ttt
                    + (5.0 * l * l + 4.0 * l1) * j.tt
                    + (2.0 * l * l * l + 5.0 * l * l1 + l2) * j.t
                    + c2 * c2 * j.xxyy
                    - c2 * (j.ttxx
                        + j.ttyy
                        + 2.0 * l * (j.txx + j.tyy)
                        + (l * l + l1) * (j.xx + j.yy))
            }
            PDEKind::Reflecting4th => {
                j.tttt
                    + 4.0 * l * j.ttt
                    + (16.0 / 3.0 * l * l + 4.0 * l1) * j.tt
                    + (64.0 / 27.0 * l * l * l + 16.0 / 3.0 * l * l1 + 4.0 / 3.0 * l2) * j.t
                    + c2 * c2 * j.xxyy
                    - c2 * (j.ttxx
                        + j.ttyy
                        + 2.0 * l * (j.txx + j.tyy)
                        + (8.0 / 9.0 * l * l + 2.0 / 3.0 * l1) * (j.xx + j.yy))
            }
            PDEKind::BoundarySide => {
                j.tt + 2.0 * l * j.t + 0.5 * (1.5 * l * l + l1) * j.p - c2 * j.xx
            }
            PDEKind::BoundarySideReflecting => {
                j.tt + 2.0 * l * j.t + 2.0 / 3.0 * (4.0 / 3.0 * l * l + l1) * j.p - c2 * j.xx
            }
            PDEKind::MarginalStandard3rd => {
                j.ttt + 3.0 * l * j.tt + (2.0 * l * l + l1) * j.t - c2 * j.txx - c2 * l * j.xx
            }
            PDEKind::MarginalReflecting3rd => {
                j.ttt + 8.0 / 3.0 * l * j.tt + 4.0 / 3.0 * (4.0 / 3.0 * l * l + l1) * j.t
                    - c2 * j.txx
                    - 2.0 / 3.0 * c2 * l * j.xx
            }
            PDEKind::Telegraph2nd => j.tt + 2.0 * l * j.t - c2 * j.xx,
        }
    }
}

/// A density as a function of (t, x, y), evaluated one time slice at a time
/// so that per-time set-up is shared across the slice.
pub trait Field: Sync {
    /// Values on xs × ys at time t, x-major. One-axis fields get ys = [0].
    fn slice(&self, t: f64, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>>;
}

/// Field from a pointwise callback.
pub struct PointField<F>(pub F);

impl<F> Field for PointField<F>
where
    F: Fn(f64, f64, f64) -> Result<f64> + Sync,
{
    fn slice(&self, t: f64, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &x in xs {
            for &y in ys {
                out.push((self.0)(t, x, y)?);
            }
        }
        Ok(out)
    }
}

/// Field from a per-time constructor returning a pointwise evaluator.
pub struct SliceField<G>(pub G);

impl<G, E> Field for SliceField<G>
where
    G: Fn(f64) -> Result<E> + Sync,
    E: Fn(f64, f64) -> Result<f64>,
{
    fn slice(&self, t: f64, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
        let eval = (self.0)(t)?;
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        for &x in xs {
            for &y in ys {
                out.push(eval(x, y)?);
            }
        }
        Ok(out)
    }
}

/// Adds eps·x² to a field; a non-solution control.
pub struct Perturbed<F> {
    pub inner: F,
    pub eps: f64,
}

impl<F: Field + ?Sized> Field for Box<F> {
    fn slice(&self, t: f64, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
        (**self).slice(t, xs, ys)
    }
}

impl<F: Field> Field for Perturbed<F> {
    fn slice(&self, t: f64, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.inner.slice(t, xs, ys)?;
        for (i, &x) in xs.iter().enumerate() {
            for k in 0..ys.len() {
                v[i * ys.len() + k] += self.eps * x * x;
            }
        }
        Ok(v)
    }
}

/// Region where the residual is evaluated; the sampled grid extends
/// `MARGIN` nodes beyond it on every side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridBox {
    pub t: (f64, f64),
    pub x: (f64, f64),
    pub y: Option<(f64, f64)>,
}

/// Field values on a uniform (t, x[, y]) grid.
#[derive(Debug, Clone)]
pub struct StencilGrid {
    /// Coordinates of node (0, 0, 0).
    pub origin: [f64; 3],
    pub h: [f64; 3],
    /// Nodes per axis, margins included; 1 on an absent y axis.
    pub n: [usize; 3],
    pub margin: usize,
    pub values: Vec<f64>,
}

impl StencilGrid {
    /// Samples `field` with spacing h on the box plus margins, in parallel
    /// over time rows.
    pub fn sample(field: &dyn Field, bx: &GridBox, h: f64, margin: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("spacing must be positive, got {h}")));
        }
        // nodes lo, lo + h, ... up to hi
        let cells = |(lo, hi): (f64, f64)| -> Result<usize> {
            if !(hi >= lo) {
                return Err(Error::Config(format!("empty range [{lo}, {hi}]")));
            }
            Ok(((hi - lo) / h + 1e-9).floor() as usize)
        };
        let m = margin as f64;
        let nt = cells(bx.t)? + 1 + 2 * margin;
        let nx = cells(bx.x)? + 1 + 2 * margin;
        let (ny, y0) = match bx.y {
            Some(r) => (cells(r)? + 1 + 2 * margin, r.0 - m * h),
            None => (1, 0.0),
        };
        let origin = [bx.t.0 - m * h, bx.x.0 - m * h, y0];
        let xs: Vec<f64> = (0..nx).map(|i| origin[1] + i as f64 * h).collect();
        let ys: Vec<f64> = (0..ny).map(|i| origin[2] + i as f64 * h).collect();
        let rows: Vec<Vec<f64>> = (0..nt)
            .into_par_iter()
            .map(|it| field.slice(origin[0] + it as f64 * h, &xs, &ys))
            .collect::<Result<_>>()?;
        let values = rows.concat();
        Ok(Self {
            origin,
            h: [h, h, if bx.y.is_some() { h } else { 0.0 }],
            n: [nt, nx, ny],
            margin,
            values,
        })
    }

    pub fn space_dims(&self) -> usize {
        if self.n[2] > 1 {
            2
        } else {
            1
        }
    }

    fn coord(&self, axis: usize, i: usize) -> f64 {
        self.origin[axis] + i as f64 * self.h[axis]
    }

    #[inline]
    fn at(&self, it: isize, ix: isize, iy: isize) -> f64 {
        let (nx, ny) = (self.n[1] as isize, self.n[2] as isize);
        self.values[((it * nx + ix) * ny + iy) as usize]
    }

    /// Central-difference jet at an interior node.
    pub fn jet(&self, it: usize, ix: usize, iy: usize) -> Jet {
        let (it, ix, iy) = (it as isize, ix as isize, iy as isize);
        let two_d = self.space_dims() == 2;
        let ht = self.h[0];
        let hx = self.h[1];
        let f = |a: isize, b: isize, c: isize| self.at(it + a, ix + b, iy + c);
        // second difference in x (and y) at time offset a
        let dxx = |a: isize| (f(a, 1, 0) - 2.0 * f(a, 0, 0) + f(a, -1, 0)) / (hx * hx);
        let dyy = |a: isize| {
            if two_d {
                let hy = self.h[2];
                (f(a, 0, 1) - 2.0 * f(a, 0, 0) + f(a, 0, -1)) / (hy * hy)
            } else {
                0.0
            }
        };
        let p = f(0, 0, 0);
        let xxyy = if two_d {
            let hy = self.h[2];
            let dxx_at = |c: isize| (f(0, 1, c) - 2.0 * f(0, 0, c) + f(0, -1, c)) / (hx * hx);
            (dxx_at(1) - 2.0 * dxx_at(0) + dxx_at(-1)) / (hy * hy)
        } else {
            0.0
        };
        Jet {
            p,
            t: (f(1, 0, 0) - f(-1, 0, 0)) / (2.0 * ht),
            tt: (f(1, 0, 0) - 2.0 * p + f(-1, 0, 0)) / (ht * ht),
            ttt: (f(2, 0, 0) - 2.0 * f(1, 0, 0) + 2.0 * f(-1, 0, 0) - f(-2, 0, 0))
                / (2.0 * ht * ht * ht),
            tttt: (f(2, 0, 0) - 4.0 * f(1, 0, 0) + 6.0 * p - 4.0 * f(-1, 0, 0) + f(-2, 0, 0))
                / ht.powi(4),
            xx: dxx(0),
            yy: dyy(0),
            txx: (dxx(1) - dxx(-1)) / (2.0 * ht),
            tyy: (dyy(1) - dyy(-1)) / (2.0 * ht),
            ttxx: (dxx(1) - 2.0 * dxx(0) + dxx(-1)) / (ht * ht),
            ttyy: (dyy(1) - 2.0 * dyy(0) + dyy(-1)) / (ht * ht),
            xxyy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub max_abs: f64,
    pub l2: f64,
    pub points: usize,
}

/// Residual of `form` at every node of the grid's box.
pub fn residual(form: &PDEForm, grid: &StencilGrid) -> Result<Residual> {
    if grid.margin < MARGIN {
        return Err(Error::GridTooCoarse(format!(
            "margin {} < {MARGIN}",
            grid.margin
        )));
    }
    if grid.space_dims() != form.kind.space_dims() {
        return Err(Error::GridTooCoarse(format!(
            "{} needs {} space axes, grid has {}",
            form.kind,
            form.kind.space_dims(),
            grid.space_dims()
        )));
    }
    let m = grid.margin;
    let ym = if grid.space_dims() == 2 { m } else { 0 };
    if grid.n[0] <= 2 * m || grid.n[1] <= 2 * m || grid.n[2] <= 2 * ym {
        return Err(Error::GridTooCoarse(format!(
            "grid {:?} has no interior nodes",
            grid.n
        )));
    }
    // the whole stencil support must sit inside the cone fraction
    for it in [0, grid.n[0] - 1] {
        let t = grid.coord(0, it);
        for ix in [0, grid.n[1] - 1] {
            for iy in [0, grid.n[2] - 1] {
                let (x, y) = (
                    grid.coord(1, ix),
                    if ym > 0 { grid.coord(2, iy) } else { 0.0 },
                );
                if x.abs() + y.abs() > CONE_FRACTION * form.c * t * (1.0 + 1e-12) {
                    return Err(Error::domain(format!(
                        "grid node ({t}, {x}, {y}) is outside {CONE_FRACTION} of the light cone"
                    )));
                }
            }
        }
    }
    // corners alone do not bound |x| + |y| when the box straddles an axis
    let (xmax, ymax) = (
        grid.coord(1, 0)
            .abs()
            .max(grid.coord(1, grid.n[1] - 1).abs()),
        if ym > 0 {
            grid.coord(2, 0)
                .abs()
                .max(grid.coord(2, grid.n[2] - 1).abs())
        } else {
            0.0
        },
    );
    if xmax + ymax > CONE_FRACTION * form.c * grid.coord(0, 0) * (1.0 + 1e-12) {
        return Err(Error::domain(
            "grid leaves the admissible part of the light cone",
        ));
    }

    let rows: Vec<(f64, f64, usize)> = (m..grid.n[0] - m)
        .into_par_iter()
        .map(|it| {
            let t = grid.coord(0, it);
            let (mut mx, mut sq, mut count) = (0.0f64, 0.0, 0usize);
            for ix in m..grid.n[1] - m {
                for iy in ym..grid.n[2] - ym {
                    let r = form.apply(t, &grid.jet(it, ix, iy));
                    mx = mx.max(r.abs());
                    sq += r * r;
                    count += 1;
                }
            }
            (mx, sq, count)
        })
        .collect();
    let (mut max_abs, mut sq, mut points) = (0.0f64, 0.0, 0usize);
    for (mx, s, c) in rows {
        if mx.is_nan() {
            return Err(Error::domain("non-finite residual"));
        }
        max_abs = max_abs.max(mx);
        sq += s;
        points += c;
    }
    Ok(Residual {
        max_abs,
        l2: (sq / points as f64).sqrt(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub form: String,
    pub h_list: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted_order: f64,
}

/// Least-squares slope of log r against log h.
pub fn fitted_slope(h_list: &[f64], residuals: &[f64]) -> f64 {
    let n = h_list.len() as f64;
    let lx: Vec<f64> = h_list.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Maximum residual for each spacing and the fitted order. The spacings
/// must form a geometric sequence of at least three terms.
pub fn convergence_order(
    form: &PDEForm,
    field: &dyn Field,
    bx: &GridBox,
    h_list: &[f64],
) -> Result<ConvergenceReport> {
    if h_list.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 spacings, got {}",
            h_list.len()
        )));
    }
    let ratio = h_list[1] / h_list[0];
    let geometric = h_list.iter().all(|h| *h > 0.0)
        && ratio != 1.0
        && h_list
            .windows(2)
            .all(|w| ((w[1] / w[0]) / ratio - 1.0).abs() < 1e-9);
    if !geometric {
        return Err(Error::Config(format!(
            "spacings {h_list:?} are not a geometric sequence"
        )));
    }
    let mut residuals = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let grid = StencilGrid::sample(field, bx, h, MARGIN)?;
        residuals.push(residual(form, &grid)?.max_abs);
    }
    let fitted_order = fitted_slope(h_list, &residuals);
    // residuals must shrink along with h
    let shrinking = h_list
        .windows(2)
        .zip(residuals.windows(2))
        .all(|(h, r)| (h[1] < h[0]) == (r[1] < r[0]));
    if !shrinking || residuals.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::NonMonotone {
            h_list: h_list.to_vec(),
            residuals,
            fitted_order,
        });
    }
    Ok(ConvergenceReport {
        form: form.kind.name().to_string(),
        h_list: h_list.to_vec(),
        residuals,
        fitted_order,
    })
}

/// Closed-form density solving `kind` at constant rate `lambda` and speed
/// `c`, with a box inside the admissible cone for spacings up to 0.02.
///
/// Second- and third-order forms use t ∈ [0.8, 1.2]. Fourth-order stencils
/// divide rounding errors in the field by h⁴, which at t ≈ 1 swamps the
/// truncation error at h = 0.005; they use an earlier window where the
/// density varies faster and truncation dominates.
pub struct ReferenceCase {
    pub form: PDEForm,
    pub field: Box<dyn Field>,
    pub bx: GridBox,
}

/// Rate used for each kind when none is given. At λ = c = 1 the fourth-order
/// forms sit on the rounding floor of their 16/h⁴ stencils near t = 1, so
/// they are checked on a window at t ≈ 0.5 with a faster rate.
pub fn reference_rate(kind: PDEKind) -> f64 {
    match kind {
        PDEKind::Standard4th => 2.0,
        PDEKind::Reflecting4th => 3.0,
        _ => 1.0,
    }
}

pub fn reference_case(kind: PDEKind, lambda: f64, c: f64) -> Result<ReferenceCase> {
    let rate = RateFunction::constant(lambda);
    let form = PDEForm::new(kind, rate.clone(), c)?;
    let t_range = (0.8, 1.2);
    let line = GridBox {
        t: t_range,
        x: (-0.5 * c, 0.5 * c),
        y: None,
    };
    let (field, bx): (Box<dyn Field>, GridBox) = match kind {
        PDEKind::Telegraph2nd => {
            let f = SliceField(move |t| {
                let d = telegraph_density_const(lambda, c, t)?;
                Ok(move |x: f64, _: f64| d.ac(x))
            });
            (Box::new(f), line)
        }
        PDEKind::Standard4th => {
            let spec = MotionSpec::symmetric(Variant::Standard, c, rate)?;
            let f = SliceField(move |t| {
                let d = planar::JointDensity::new(&spec, t)?;
                Ok(move |x: f64, y: f64| d.eval(x, y))
            });
            (
                Box::new(f),
                GridBox {
                    t: (0.4, 0.6),
                    x: (-0.1 * c, 0.1 * c),
                    y: Some((-0.1 * c, 0.1 * c)),
                },
            )
        }
        PDEKind::Reflecting4th => {
            // one truncation for every slice, fine enough for the latest time
            let window = (0.4, 0.6);
            let mean = 4.0 * lambda / 3.0 * (window.1 + 0.1);
            let n_max = sojourns_for_tail(mean, 1e-18);
            let f = SliceField(move |t| {
                let s = ReflectingSeries::with_sojourns(lambda, t, n_max)?;
                Ok(move |x: f64, y: f64| Ok(s.joint_unit(x / c, y / c)? / (c * c)))
            });
            (
                Box::new(f),
                GridBox {
                    t: window,
                    x: (0.06 * c, 0.1 * c),
                    y: Some((0.06 * c, 0.1 * c)),
                },
            )
        }
        PDEKind::BoundarySide | PDEKind::BoundarySideReflecting => {
            let variant = if kind == PDEKind::BoundarySide {
                Variant::Standard
            } else {
                Variant::Reflecting
            };
            let spec = MotionSpec::symmetric(variant, c, rate)?;
            let f = PointField(move |t, eta, _| planar::boundary_density(&spec, eta, t));
            (Box::new(f), line)
        }
        PDEKind::MarginalStandard3rd => {
            let spec = MotionSpec::symmetric(Variant::Standard, c, rate)?;
            let f = SliceField(move |t| {
                let d = MarginalDensity::new(&spec, t)?;
                Ok(move |x: f64, _: f64| d.eval(x))
            });
            (
                Box::new(f),
                GridBox {
                    t: t_range,
                    x: (0.1 * c, 0.5 * c),
                    y: None,
                },
            )
        }
        PDEKind::MarginalReflecting3rd => {
            let mean = 4.0 * lambda / 3.0 * (t_range.1 + 0.1);
            let n_max = sojourns_for_tail(mean, 1e-18);
            let f = SliceField(move |t| {
                let s = ReflectingSeries::with_sojourns(lambda, t, n_max)?;
                Ok(move |x: f64, _: f64| Ok(s.marginal_unit(x / c)? / c))
            });
            (
                Box::new(f),
                GridBox {
                    t: t_range,
                    x: (0.1 * c, 0.5 * c),
                    y: None,
                },
            )
        }
    };
    Ok(ReferenceCase { form, field, bx })
}

/// Sojourn count N = m + 1 with P(Poisson(mean) > m) < tail. Bounds the
/// tail by pmf(m)·mean/(m + 1 − mean) so that tails below machine epsilon
/// can be asked for.
fn sojourns_for_tail(mean: f64, tail: f64) -> usize {
    let mut pmf = (-mean).exp();
    let mut m = 0usize;
    loop {
        let next = m as f64 + 1.0;
        if next > mean && pmf * mean / (next - mean) < tail {
            return m + 1;
        }
        m += 1;
        pmf *= mean / m as f64;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::CustomRate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense polynomial in (t, x, y) with degree < D per variable.
    #[derive(Clone, Debug)]
    struct Poly {
        c: Vec<f64>,
    }

    const D: usize = 9;

    impl Poly {
        fn zero() -> Self {
            Poly {
                c: vec![0.0; D * D * D],
            }
        }
        fn idx(i: usize, j: usize, k: usize) -> usize {
            (i * D + j) * D + k
        }
        fn random(rng: &mut ChaCha8Rng, deg: usize) -> Self {
            let mut p = Self::zero();
            for i in 0..=deg {
                for j in 0..=deg {
                    for k in 0..=deg {
                        if i + j + k <= deg {
                            p.c[Self::idx(i, j, k)] = rng.random_range(-1.0..1.0);
                        }
                    }
                }
            }
            p
        }
        fn in_t(coeffs: &[f64]) -> Self {
            let mut p = Self::zero();
            for (i, &a) in coeffs.iter().enumerate() {
                p.c[Self::idx(i, 0, 0)] = a;
            }
            p
        }
        fn d(&self, axis: usize) -> Self {
            let mut out = Self::zero();
            for i in 0..D {
                for j in 0..D {
                    for k in 0..D {
                        let e = [i, j, k][axis];
                        if e == 0 {
                            continue;
                        }
                        let mut to = [i, j, k];
                        to[axis] -= 1;
                        out.c[Self::idx(to[0], to[1], to[2])] +=
                            e as f64 * self.c[Self::idx(i, j, k)];
                    }
                }
            }
            out
        }
        fn dn(&self, axis: usize, n: usize) -> Self {
            (0..n).fold(self.clone(), |p, _| p.d(axis))
        }
        fn add(&self, o: &Self, s: f64) -> Self {
            Poly {
                c: self.c.iter().zip(&o.c).map(|(a, b)| a + s * b).collect(),
            }
        }
        fn mul(&self, o: &Self) -> Self {
            let mut out = Self::zero();
            for i in 0..D {
                for j in 0..D {
                    for k in 0..D {
                        let a = self.c[Self::idx(i, j, k)];
                        if a == 0.0 {
                            continue;
                        }
                        for p in 0..D - i {
                            for q in 0..D - j {
                                for r in 0..D - k {
                                    out.c[Self::idx(i + p, j + q, k + r)] +=
                                        a * o.c[Self::idx(p, q, r)];
                                }
                            }
                        }
                    }
                }
            }
            out
        }
        fn eval(&self, t: f64, x: f64, y: f64) -> f64 {
            let mut s = 0.0;
            for i in 0..D {
                for j in 0..D {
                    for k in 0..D {
                        s += self.c[Self::idx(i, j, k)]
                            * t.powi(i as i32)
                            * x.powi(j as i32)
                            * y.powi(k as i32);
                    }
                }
            }
            s
        }
        fn jet(&self, t: f64, x: f64, y: f64) -> Jet {
            let e = |p: Poly| p.eval(t, x, y);
            Jet {
                p: e(self.clone()),
                t: e(self.dn(0, 1)),
                tt: e(self.dn(0, 2)),
                ttt: e(self.dn(0, 3)),
                tttt: e(self.dn(0, 4)),
                xx: e(self.dn(1, 2)),
                yy: e(self.dn(2, 2)),
                txx: e(self.dn(1, 2).d(0)),
                tyy: e(self.dn(2, 2).d(0)),
                ttxx: e(self.dn(1, 2).dn(0, 2)),
                ttyy: e(self.dn(2, 2).dn(0, 2)),
                xxyy: e(self.dn(1, 2).dn(2, 2)),
            }
        }
    }

    #[test]
    fn standard_operator_matches_factored_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let lambda = rng.random_range(0.1..3.0);
            let c = rng.random_range(0.3..2.0);
            let p = Poly::random(&mut rng, 6);
            let form =
                PDEForm::new(PDEKind::Standard4th, RateFunction::constant(lambda), c).unwrap();
            // (∂tt + 2λ∂t + λ²)(∂tt + 2λ∂t − c²Δ)p + c⁴ p_xxyy
            let inner = p
                .dn(0, 2)
                .add(&p.d(0), 2.0 * lambda)
                .add(&p.dn(1, 2).add(&p.dn(2, 2), 1.0), -c * c);
            let outer = inner
                .dn(0, 2)
                .add(&inner.d(0), 2.0 * lambda)
                .add(&inner, lambda * lambda);
            let factored = outer.add(&p.dn(1, 2).dn(2, 2), c.powi(4));
            let (t, x, y) = (
                rng.random_range(0.5..1.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );
            let a = form.apply(t, &p.jet(t, x, y));
            let b = factored.eval(t, x, y);
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn marginal_operator_matches_factored_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..20 {
            let (a0, a1, a2) = (
                rng.random_range(0.2..2.0),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.2..0.2),
            );
            let c = rng.random_range(0.3..2.0);
            let rate = RateFunction::custom(
                CustomRate::new("quadratic", move |t| a0 + a1 * t + a2 * t * t)
                    .with_derivatives(move |t| a1 + 2.0 * a2 * t, move |_| 2.0 * a2),
            );
            let lam = Poly::in_t(&[a0, a1, a2]);
            let dlam = Poly::in_t(&[a1, 2.0 * a2]);
            let p = Poly::random(&mut rng, 5);
            // (∂t + λ)(p_tt + 2λ p_t − c² p_xx) − λ' p_t
            let inner = p
                .dn(0, 2)
                .add(&lam.mul(&p.d(0)), 2.0)
                .add(&p.dn(1, 2), -c * c);
            let factored = inner
                .d(0)
                .add(&lam.mul(&inner), 1.0)
                .add(&dlam.mul(&p.d(0)), -1.0);
            let form = PDEForm::new(PDEKind::MarginalStandard3rd, rate, c).unwrap();
            let (t, x) = (rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5));
            let a = form.apply(t, &p.jet(t, x, 0.0));
            let b = factored.eval(t, x, 0.0);
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn stencil_errors_shrink_quadratically() {
        // e^{at} sin(bx + 0.4) cos(dy)
        let (a, b, d) = (0.7f64, 1.3f64, 0.9f64);
        let field = PointField(move |t: f64, x: f64, y: f64| {
            Ok((a * t).exp() * (b * x + 0.4).sin() * (d * y).cos())
        });
        let (t0, x0, y0) = (1.0, 0.1, 0.1);
        let f = (a * t0).exp() * (b * x0 + 0.4).sin() * (d * y0).cos();
        let exact = [
            a * f,
            a.powi(2) * f,
            a.powi(3) * f,
            a.powi(4) * f,
            -b * b * f,
            -d * d * f,
            -a * a * b * b * f,
            b * b * d * d * f,
        ];
        let pick = |j: &Jet| [j.t, j.tt, j.ttt, j.tttt, j.xx, j.yy, j.ttxx, j.xxyy];
        let err = |h: f64| {
            let bx = GridBox {
                t: (t0, t0),
                x: (x0, x0),
                y: Some((y0, y0)),
            };
            let g = StencilGrid::sample(&field, &bx, h, 2).unwrap();
            let j = g.jet(2, 2, 2);
            let got = pick(&j);
            (0..8)
                .map(|i| (got[i] - exact[i]).abs())
                .collect::<Vec<_>>()
        };
        let (e1, e2) = (err(0.04), err(0.02));
        for i in 0..8 {
            let ratio = e1[i] / e2[i];
            assert!((3.5..4.5).contains(&ratio), "component {i}: {ratio}");
        }
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let field = PointField(|_, _, _| Ok(0.0));
        let bx = GridBox {
            t: (0.8, 1.2),
            x: (-0.15, 0.15),
            y: Some((-0.15, 0.15)),
        };
        let g = StencilGrid::sample(&field, &bx, 0.05, 2).unwrap();
        for kind in [PDEKind::Standard4th, PDEKind::Reflecting4th] {
            let form = PDEForm::new(kind, RateFunction::tanh(1.0), 1.0).unwrap();
            assert_eq!(residual(&form, &g).unwrap().max_abs, 0.0);
        }
    }

    #[test]
    fn grid_preconditions() {
        let field = PointField(|_, _, _| Ok(0.0));
        let bx = GridBox {
            t: (0.8, 1.2),
            x: (-0.2, 0.2),
            y: None,
        };
        let form = PDEForm::new(PDEKind::Telegraph2nd, RateFunction::constant(1.0), 1.0).unwrap();
        let g = StencilGrid::sample(&field, &bx, 0.05, 1).unwrap();
        assert!(matches!(residual(&form, &g), Err(Error::GridTooCoarse(_))));
        let wide = GridBox {
            t: (0.8, 1.2),
            x: (-0.7, 0.7),
            y: None,
        };
        let g = StencilGrid::sample(&field, &wide, 0.05, 2).unwrap();
        assert!(matches!(residual(&form, &g), Err(Error::Domain(_))));
        let planar = PDEForm::new(PDEKind::Standard4th, RateFunction::constant(1.0), 1.0).unwrap();
        let g = StencilGrid::sample(&field, &bx, 0.05, 2).unwrap();
        assert!(matches!(
            residual(&planar, &g),
            Err(Error::GridTooCoarse(_))
        ));
        assert!(matches!(
            convergence_order(&form, &field, &bx, &[0.05]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn telegraph_converges_at_second_order() {
        let case = reference_case(PDEKind::Telegraph2nd, 1.0, 1.0).unwrap();
        let r = convergence_order(
            &case.form,
            case.field.as_ref(),
            &case.bx,
            &[0.02, 0.01, 0.005],
        )
        .unwrap();
        assert!((1.8..=2.2).contains(&r.fitted_order), "{r:?}");
    }

    #[test]
    fn boundary_sides_converge() {
        for kind in [PDEKind::BoundarySide, PDEKind::BoundarySideReflecting] {
            let case = reference_case(kind, 1.0, 1.0).unwrap();
            let r = convergence_order(
                &case.form,
                case.field.as_ref(),
                &case.bx,
                &[0.02, 0.01, 0.005],
            )
            .unwrap();
            assert!(r.fitted_order >= 1.8, "{r:?}");
        }
    }

    #[test]
    fn fourth_and_third_order_forms_converge() {
        for (kind, lambda, lo, hi) in [
            (PDEKind::Standard4th, 2.0, 1.8, 2.2),
            (PDEKind::MarginalStandard3rd, 1.0, 1.5, 2.2),
            (PDEKind::MarginalReflecting3rd, 1.0, 1.5, 2.2),
        ] {
            let case = reference_case(kind, lambda, 1.0).unwrap();
            let r = convergence_order(
                &case.form,
                case.field.as_ref(),
                &case.bx,
                &[0.02, 0.01, 0.005],
            )
            .unwrap();
            assert!((lo..=hi).contains(&r.fitted_order), "{r:?}");
        }
    }

    #[test]
    fn perturbed_field_plateaus() {
        let case = reference_case(PDEKind::Telegraph2nd, 1.0, 1.0).unwrap();
        let field = Perturbed {
            inner: case.field,
            eps: 0.01,
        };
        let order = match convergence_order(&case.form, &field, &case.bx, &[0.02, 0.01, 0.005]) {
            Ok(r) => r.fitted_order,
            Err(Error::NonMonotone { fitted_order, .. }) => fitted_order,
            Err(e) => panic!("{e}"),
        };
        assert!(order.abs() < 0.5, "{order}");
    }

    #[test]
    fn kind_names_round_trip() {
        for k in PDEKind::ALL {
            assert_eq!(k.name().parse::<PDEKind>().unwrap(), k);
        }
        assert!("fifth".parse::<PDEKind>().is_err());
    }
}
