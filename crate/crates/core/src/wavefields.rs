//! Evanescent wave fields `u(x,t) = A e^{-k1 x} cos(ωt - k2 x)`, operator
//! images of them, wave-equation residuals, averaged power and grid export.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::generator::Generator;
use crate::jet::{binomial, AntiderivPolicy, ExtendedJet, JetConfig};
use crate::ops::{generalized_op, RecursionConvention, Sign};
use crate::quadrature::QuadratureSpec;

/// Largest number of grid points sampled in one call.
pub const GRID_CAP: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvanescentParams {
    /// Amplitude `A` (cm).
    pub amplitude: f64,
    /// Attenuation wavenumber `k1` (1/cm); negative values grow with `x`.
    pub k1: f64,
    /// Propagation wavenumber `k2` (1/cm).
    pub k2: f64,
    pub omega: f64,
    pub c: f64,
}

impl EvanescentParams {
    /// Picks `ω = c √(k2² - k1²)`, which zeroes the real part of the
    /// dispersion relation. Needs `|k2| > |k1|`.
    pub fn with_auto_omega(amplitude: f64, k1: f64, k2: f64, c: f64) -> Result<Self> {
        if k2.abs() <= k1.abs() {
            return Err(invalid(format!(
                "automatic ω needs |k2| > |k1| (got k1 = {k1}, k2 = {k2}); supply ω explicitly"
            )));
        }
        let p = EvanescentParams {
            amplitude,
            k1,
            k2,
            omega: c * (k2 * k2 - k1 * k1).sqrt(),
            c,
        };
        p.validate()?;
        Ok(p)
    }

    /// Figure parameters: `A = 10`, `k1 = -50`, `k2 = 100`, `c = 1`, automatic ω.
    pub fn figure() -> Self {
        Self::with_auto_omega(10.0, -50.0, 100.0, 1.0).expect("figure parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("A", self.amplitude),
            ("k1", self.k1),
            ("k2", self.k2),
            ("omega", self.omega),
            ("c", self.c),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} = {v}")));
            }
        }
        if self.c <= 0.0 {
            return Err(invalid(format!("wave speed c must be > 0, got {}", self.c)));
        }
        Ok(())
    }

    fn lambda_x(&self) -> Complex64 {
        Complex64::new(-self.k1, -self.k2)
    }

    fn lambda_t(&self) -> Complex64 {
        Complex64::new(0.0, self.omega)
    }

    /// `A e^{-k1 x} e^{j(ωt - k2 x)}`.
    pub fn carrier(&self, x: f64, t: f64) -> Complex64 {
        self.amplitude * (self.lambda_x() * x + self.lambda_t() * t).exp()
    }

    pub fn u(&self, x: f64, t: f64) -> f64 {
        self.amplitude * (-self.k1 * x).exp() * (self.omega * t - self.k2 * x).cos()
    }

    /// `u(x, ·)` as a one-variable generator.
    pub fn time_slice(&self, x: f64) -> Generator {
        Generator::cos(
            self.amplitude * (-self.k1 * x).exp(),
            self.omega,
            -self.k2 * x,
        )
    }

    /// `u(·, t)` as a one-variable generator.
    pub fn space_slice(&self, t: f64) -> Generator {
        Generator::product(vec![
            Generator::exp(-self.k1),
            Generator::cos(self.amplitude, -self.k2, self.omega * t),
        ])
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    #[default]
    T,
    X,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::T => "t",
            Axis::X => "x",
        })
    }
}

/// `g = ∂_t^i u^n` for `m = 1`; for `m ≥ 2`, `g = ∂_t^i G^n` with `G` the
/// depth-`(m-2)` order-1 plus operator of `u` in the `axis` variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub i: u32,
    pub n: u32,
    pub m: u32,
    pub axis: Axis,
}

impl FieldSpec {
    pub fn new(i: u32, n: u32, m: u32) -> Self {
        FieldSpec {
            i,
            n,
            m,
            axis: Axis::T,
        }
    }

    pub fn with_axis(self, axis: Axis) -> Self {
        FieldSpec { axis, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.m < 1 {
            return Err(invalid(format!(
                "field spec needs n ≥ 1 and m ≥ 1, got n = {}, m = {}",
                self.n, self.m
            )));
        }
        if self.i > 64 || self.m > 8 {
            return Err(invalid("field spec orders too large (i ≤ 64, m ≤ 8)"));
        }
        Ok(())
    }

    /// Power of `e^{-k1 x}` carried by `g`: each order-1 plus level squares
    /// the envelope, so it is `n · 2^{m-1}`.
    pub fn envelope_power(&self) -> f64 {
        self.n as f64 * 2f64.powi(self.m as i32 - 1)
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i={},n={},m={},axis={}", self.i, self.n, self.m, self.axis)
    }
}

/// Mixed partial derivatives `∂_x^a ∂_t^b g(x0, t0)` for `a ≤ ox`, `b ≤ ot`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    ox: usize,
    ot: usize,
    values: Vec<f64>,
}

impl Jet2 {
    pub fn from_fn(ox: usize, ot: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity((ox + 1) * (ot + 1));
        for a in 0..=ox {
            for b in 0..=ot {
                values.push(f(a, b));
            }
        }
        Jet2 { ox, ot, values }
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        assert!(a <= self.ox && b <= self.ot, "Jet2 index ({a},{b}) out of range");
        self.values[a * (self.ot + 1) + b]
    }

    pub fn orders(&self) -> (usize, usize) {
        (self.ox, self.ot)
    }

    fn mul(&self, other: &Jet2) -> Jet2 {
        let (ox, ot) = (self.ox.min(other.ox), self.ot.min(other.ot));
        Jet2::from_fn(ox, ot, |a, b| {
            let mut s = 0.0;
            for i in 0..=a {
                for j in 0..=b {
                    s += binomial(a, i)
                        * binomial(b, j)
                        * self.get(i, j)
                        * other.get(a - i, b - j);
                }
            }
            s
        })
    }

    fn add(&self, other: &Jet2) -> Jet2 {
        let (ox, ot) = (self.ox.min(other.ox), self.ot.min(other.ot));
        Jet2::from_fn(ox, ot, |a, b| self.get(a, b) + other.get(a, b))
    }

    fn shift(&self, axis: Axis, by: usize) -> Result<Jet2> {
        let (ox, ot) = match axis {
            Axis::X => (self.ox.checked_sub(by), Some(self.ot)),
            Axis::T => (Some(self.ox), self.ot.checked_sub(by)),
        };
        let (Some(ox), Some(ot)) = (ox, ot) else {
            return Err(Error::OrderExhausted {
                requested: by as i32,
                low: 0,
                high: match axis {
                    Axis::X => self.ox as i32,
                    Axis::T => self.ot as i32,
                },
            });
        };
        Ok(match axis {
            Axis::X => Jet2::from_fn(ox, ot, |a, b| self.get(a + by, b)),
            Axis::T => Jet2::from_fn(ox, ot, |a, b| self.get(a, b + by)),
        })
    }

    fn pow(&self, n: u32) -> Jet2 {
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// `[G, G]_1^+ = 2 G ∂G` along `axis`.
    fn plus_bracket1(&self, axis: Axis) -> Result<Jet2> {
        let d = self.shift(axis, 1)?;
        Ok(d.mul(self).add(&self.mul(&d)))
    }
}

/// A smooth field of `(x, t)` with mixed partial derivatives on demand.
pub trait Field2D: Sync {
    fn derivatives(&self, x: f64, t: f64, ox: usize, ot: usize) -> Result<Jet2>;

    fn value(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.derivatives(x, t, 0, 0)?.get(0, 0))
    }
}

/// `u` itself, with `∂_x^a ∂_t^b u = Re{λx^a λt^b A e^{λx x + λt t}}`.
fn carrier_jet(params: &EvanescentParams, x: f64, t: f64, ox: usize, ot: usize) -> Jet2 {
    let base = params.carrier(x, t);
    let (lx, lt) = (params.lambda_x(), params.lambda_t());
    Jet2::from_fn(ox, ot, |a, b| (base * lx.powu(a as u32) * lt.powu(b as u32)).re)
}

/// The field `g` of a [`FieldSpec`] over evanescent parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvanescentField {
    pub params: EvanescentParams,
    pub spec: FieldSpec,
}

impl Field2D for EvanescentField {
    fn derivatives(&self, x: f64, t: f64, ox: usize, ot: usize) -> Result<Jet2> {
        self.spec.validate()?;
        let spec = self.spec;
        let levels = spec.m as usize - 1;
        let (ex, et) = match spec.axis {
            Axis::X => (levels, 0),
            Axis::T => (0, levels),
        };
        let mut g = carrier_jet(&self.params, x, t, ox + ex, ot + et + spec.i as usize);
        for _ in 0..levels {
            g = g.plus_bracket1(spec.axis)?;
        }
        g.pow(spec.n).shift(Axis::T, spec.i as usize)
    }
}

/// `F(t - direction · x / c)`; `direction = 1` moves toward `+x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelingWave {
    pub profile: Generator,
    pub c: f64,
    pub direction: f64,
}

impl TravelingWave {
    pub fn new(profile: Generator, c: f64, direction: f64) -> Result<Self> {
        profile.validate()?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(invalid(format!("wave speed must be > 0, got {c}")));
        }
        if direction != 1.0 && direction != -1.0 {
            return Err(invalid("direction must be +1 or -1"));
        }
        Ok(TravelingWave {
            profile,
            c,
            direction,
        })
    }
}

impl Field2D for TravelingWave {
    fn derivatives(&self, x: f64, t: f64, ox: usize, ot: usize) -> Result<Jet2> {
        let d = self.profile.derivatives(t - self.direction * x / self.c, ox + ot);
        let sx = -self.direction / self.c;
        Ok(Jet2::from_fn(ox, ot, |a, b| sx.powi(a as i32) * d[a + b]))
    }
}

/// Sum of traveling waves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Superposition {
    pub parts: Vec<TravelingWave>,
}

impl Field2D for Superposition {
    fn derivatives(&self, x: f64, t: f64, ox: usize, ot: usize) -> Result<Jet2> {
        let mut acc = Jet2::from_fn(ox, ot, |_, _| 0.0);
        for part in &self.parts {
            acc = acc.add(&part.derivatives(x, t, ox, ot)?);
        }
        Ok(acc)
    }
}

/// `g(x, t)` for a [`FieldSpec`]. Along `t` the value is built from the exact
/// time jet of `u(x, ·)`; along `x` from mixed partials of the carrier.
pub fn field_value(params: &EvanescentParams, spec: FieldSpec, x: f64, t: f64) -> Result<f64> {
    params.validate()?;
    spec.validate()?;
    match spec.axis {
        Axis::T => {
            let order = spec.i as usize + spec.m as usize + 1;
            let cfg = JetConfig::new(order, 0, AntiderivPolicy::Zeros);
            let u = ExtendedJet::from_generator(&params.time_slice(x), t, &cfg)?;
            let g = if spec.m == 1 {
                u
            } else {
                generalized_op(
                    &u,
                    spec.m as i32 - 2,
                    1,
                    Sign::Plus,
                    RecursionConvention::OrderOnePlus,
                )?
            };
            g.int_pow(spec.n as i32)?.deriv(spec.i as i32)
        }
        Axis::X => EvanescentField {
            params: *params,
            spec,
        }
        .value(x, t),
    }
}

/// `((k1 + j k2)² - (jω/c)², k1² - k2² + ω²/c²)`.
pub fn dispersion_residual(params: &EvanescentParams) -> (Complex64, f64) {
    let k = Complex64::new(params.k1, params.k2);
    let w = Complex64::new(0.0, params.omega / params.c);
    let real = params.k1 * params.k1 - params.k2 * params.k2
        + (params.omega / params.c) * (params.omega / params.c);
    (k * k - w * w, real)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub x1: f64,
    pub t0: f64,
    pub t1: f64,
    pub nx: usize,
    pub nt: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x0: 0.0,
            x1: 0.1,
            t0: 0.0,
            t1: 0.1,
            nx: 101,
            nt: 101,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.validate_with_cap(GRID_CAP)
    }

    pub fn validate_with_cap(&self, cap: usize) -> Result<()> {
        for v in [self.x0, self.x1, self.t0, self.t1] {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("grid bound {v}")));
            }
        }
        if self.x0 >= self.x1 || self.t0 >= self.t1 {
            return Err(invalid("grid needs x0 < x1 and t0 < t1"));
        }
        if self.nx < 2 || self.nt < 2 {
            return Err(invalid("grid needs at least 2 points per axis"));
        }
        let requested = self.nx.saturating_mul(self.nt);
        if requested > cap {
            return Err(Error::GridTooLarge { requested, cap });
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x0, self.x1, self.nx)
    }

    pub fn ts(&self) -> Vec<f64> {
        linspace(self.t0, self.t1, self.nt)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + i as f64 * (b - a) / (n - 1) as f64)
        .collect()
}

/// Samples on a [`GridSpec`], `values[ix * nt + it]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn at(&self, ix: usize, it: usize) -> f64 {
        self.values[ix * self.ts.len() + it]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Evaluates `f` on every grid point, one parallel task per `x` row.
pub fn map_grid<F>(grid: &GridSpec, f: F) -> Result<Grid>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    grid.validate()?;
    let (xs, ts) = (grid.xs(), grid.ts());
    let rows: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| ts.iter().map(|&t| f(x, t)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(Grid {
        xs,
        ts,
        values: rows.concat(),
    })
}

pub fn sample_grid(params: &EvanescentParams, spec: FieldSpec, grid: &GridSpec) -> Result<Grid> {
    params.validate()?;
    spec.validate()?;
    map_grid(grid, |x, t| field_value(params, spec, x, t))
}

/// Per-point `a1 ∂_x^β g + a2 ∂_t^β g`.
pub fn linear_pde_residual(
    field: &dyn Field2D,
    a1: f64,
    a2: f64,
    beta: usize,
    grid: &GridSpec,
) -> Result<Grid> {
    if beta < 1 {
        return Err(invalid("PDE order β must be ≥ 1"));
    }
    map_grid(grid, |x, t| {
        let d = field.derivatives(x, t, beta, beta)?;
        Ok(a1 * d.get(beta, 0) + a2 * d.get(0, beta))
    })
}

/// `∂_x² g - (1/c²) ∂_t² g` on the grid.
pub fn helmholtz_residual(field: &dyn Field2D, c: f64, grid: &GridSpec) -> Result<Grid> {
    linear_pde_residual(field, 1.0, -1.0 / (c * c), 2, grid)
}

/// Largest `|Ψ_2^{+,x}(g) - (1/c²) Ψ_2^{+,t}(g)|` over the grid.
pub fn psi_wave_identity_residual(field: &dyn Field2D, c: f64, grid: &GridSpec) -> Result<f64> {
    let r = map_grid(grid, |x, t| {
        let d = field.derivatives(x, t, 2, 2)?;
        let g = d.get(0, 0);
        let psi_x = d.get(1, 0) * d.get(1, 0) + g * d.get(2, 0);
        let psi_t = d.get(0, 1) * d.get(0, 1) + g * d.get(0, 2);
        Ok(psi_x - psi_t / (c * c))
    })?;
    Ok(r.max_abs())
}

/// `Ψ_1^{+,t}(g) / Ψ_1^{+,x}(g)` at a point; `-direction · c` for a single
/// traveling wave wherever the denominator is nonzero.
pub fn psi1_axis_ratio(field: &dyn Field2D, x: f64, t: f64) -> Result<f64> {
    let d = field.derivatives(x, t, 1, 1)?;
    let g = d.get(0, 0);
    Ok((2.0 * g * d.get(0, 1)) / (2.0 * g * d.get(1, 0)))
}

/// Envelope ratio between `(x, t)` and the matched-phase point
/// `(x + dx, t + k2 dx / ω)`: `(measured, e^{-n 2^{m-1} k1 dx})`.
pub fn envelope_ratio(
    params: &EvanescentParams,
    spec: FieldSpec,
    x: f64,
    t: f64,
    dx: f64,
) -> Result<(f64, f64)> {
    if params.omega == 0.0 {
        return Err(invalid("phase matching needs ω ≠ 0"));
    }
    let here = field_value(params, spec, x, t)?;
    let there = field_value(params, spec, x + dx, t + params.k2 * dx / params.omega)?;
    if here == 0.0 {
        return Err(invalid(format!("field vanishes at ({x}, {t}); pick another phase")));
    }
    Ok((
        (there / here).abs(),
        (-spec.envelope_power() * params.k1 * dx).exp(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub a: f64,
    pub b: f64,
    /// Section length `L`.
    pub section: f64,
    /// Period `T`.
    pub period: f64,
    /// Time at which the section is integrated.
    pub t0: f64,
}

impl PowerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.a < self.b) {
            return Err(invalid(format!("need a < b, got [{}, {}]", self.a, self.b)));
        }
        if !(self.period > 0.0) {
            return Err(invalid(format!("period T must be > 0, got {}", self.period)));
        }
        if !(self.section > 0.0) {
            return Err(invalid(format!("section L must be > 0, got {}", self.section)));
        }
        Ok(())
    }

    /// Period of the carrier, `2π/ω`.
    pub fn carrier_period(params: &EvanescentParams) -> f64 {
        2.0 * PI / params.omega.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    /// `(L/T) ∫_a^b g(x, t0)² dx` by quadrature.
    pub numeric: f64,
    /// `(1/T) Re{ L (njω)^{2(i+1)} / (2n(-k1 - jk2)) [u_c^{2n}(x, t0)]_a^b }`.
    pub closed_form: f64,
    /// `numeric` over the same quantity for `i = 0, n = 1, m = 1`.
    pub alpha: f64,
    /// `|numeric - closed_form| / |numeric|`.
    pub discrepancy: f64,
}

fn section_power(
    params: &EvanescentParams,
    spec: FieldSpec,
    power: &PowerSpec,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let q = quad.with_interval(power.a, power.b);
    let integral = q.integrate(|x| {
        field_value(params, spec, x, power.t0)
            .map(|v| v * v)
            .unwrap_or(f64::NAN)
    })?;
    Ok(power.section / power.period * integral)
}

/// Averaged power through the section `[a, b]`; `quad` supplies the rule.
pub fn averaged_power(
    params: &EvanescentParams,
    spec: FieldSpec,
    power: &PowerSpec,
    quad: &QuadratureSpec,
) -> Result<PowerReport> {
    params.validate()?;
    spec.validate()?;
    power.validate()?;
    let numeric = section_power(params, spec, power, quad)?;
    let baseline = section_power(params, FieldSpec::new(0, 1, 1), power, quad)?;

    let n = spec.n as f64;
    let nj_omega = Complex64::new(0.0, n * params.omega);
    let prefactor = power.section * nj_omega.powu(2 * (spec.i + 1))
        / (2.0 * n * Complex64::new(-params.k1, -params.k2));
    let span = params.carrier(power.b, power.t0).powu(2 * spec.n)
        - params.carrier(power.a, power.t0).powu(2 * spec.n);
    let closed_form = (prefactor * span).re / power.period;

    Ok(PowerReport {
        numeric,
        closed_form,
        alpha: numeric / baseline,
        discrepancy: (numeric - closed_form).abs() / numeric.abs().max(f64::MIN_POSITIVE),
    })
}

/// C-style `%.12e`: mantissa with 12 decimals, signed exponent of at least
/// two digits.
pub fn format_sci(v: f64) -> String {
    let s = format!("{v:.12e}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let (sign, digits) = match exp.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', exp),
            };
            format!("{mantissa}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

/// Writes `x,t,value` rows in x-major order with LF line endings.
pub fn write_csv<W: Write>(grid: &Grid, mut out: W) -> io::Result<()> {
    out.write_all(b"x,t,value\n")?;
    for (ix, x) in grid.xs.iter().enumerate() {
        for (it, t) in grid.ts.iter().enumerate() {
            writeln!(
                out,
                "{},{},{}",
                format_sci(*x),
                format_sci(*t),
                format_sci(grid.at(ix, it))
            )?;
        }
    }
    out.flush()
}

/// A gnuplot script rendering `csv_path` as a pm3d surface.
pub fn gnuplot_script(csv_path: &str, grid: &GridSpec, title: &str) -> String {
    format!(
        "set datafile separator \",\"\n\
         set title \"{title}\"\n\
         set xlabel \"x (cm)\"\n\
         set ylabel \"t\"\n\
         set zlabel \"value\"\n\
         set dgrid3d {nx},{nt}\n\
         set pm3d\n\
         splot \"{csv_path}\" every ::1 using 1:2:3 with pm3d notitle\n\
         pause -1\n",
        nx = grid.nx,
        nt = grid.nt,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::finite_difference;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> EvanescentParams {
        EvanescentParams::with_auto_omega(1.5, 0.3, 0.5, 1.0).unwrap()
    }

    #[test]
    fn field_value_examples() {
        let p = EvanescentParams::figure();
        let (x, t) = (0.013, 0.021);
        let phase = p.omega * t - p.k2 * x;
        let env = p.amplitude * (-p.k1 * x).exp();
        assert_relative_eq!(field_value(&p, FieldSpec::new(0, 1, 1), x, t).unwrap(), env * phase.cos(), max_relative = 1e-13);
        assert_relative_eq!(
            field_value(&p, FieldSpec::new(1, 1, 1), x, t).unwrap(),
            -env * p.omega * phase.sin(),
            max_relative = 1e-12
        );
        let psi1 = -p.omega * env * env * (2.0 * phase).sin();
        assert_relative_eq!(field_value(&p, FieldSpec::new(0, 2, 2), x, t).unwrap(), psi1 * psi1, max_relative = 1e-12);
    }

    #[test]
    fn axes_agree_with_mixed_partials() {
        let p = params();
        for spec in [FieldSpec::new(2, 3, 1), FieldSpec::new(1, 2, 2), FieldSpec::new(3, 2, 3)] {
            for axis in [Axis::T, Axis::X] {
                let spec = spec.with_axis(axis);
                let direct = field_value(&p, spec, 0.4, -0.3).unwrap();
                let mixed = EvanescentField { params: p, spec }.value(0.4, -0.3).unwrap();
                assert_relative_eq!(direct, mixed, max_relative = 1e-11, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn field_value_matches_finite_differences() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let (x, t) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let i = rng.gen_range(0..=4u32);
            let n = rng.gen_range(1..=8u32);
            let v = field_value(&p, FieldSpec::new(i, n, 1), x, t).unwrap();
            let fd = finite_difference(|s| p.u(x, s).powi(n as i32), i as usize, t, 0.02);
            let scale = (p.amplitude * (-p.k1 * x).exp()).powi(n as i32) * (n as f64 * p.omega).powi(i as i32);
            assert!((v - fd).abs() <= 1e-5 * scale, "i={i} n={n}: {v} vs {fd}");
        }
    }

    #[test]
    fn dispersion_examples() {
        let p = EvanescentParams::with_auto_omega(1.0, 3.0, 5.0, 1.0).unwrap();
        assert_eq!(p.omega, 4.0);
        assert_eq!(dispersion_residual(&p).1, 0.0);
        let plane = EvanescentParams { amplitude: 1.0, k1: 0.0, k2: 2.0, omega: 4.0, c: 2.0 };
        assert_eq!(dispersion_residual(&plane).0.norm(), 0.0);
        let fig = EvanescentParams::figure();
        let (z, re) = dispersion_residual(&fig);
        assert!(re.abs() < 1e-9);
        assert_relative_eq!(z.im, 2.0 * fig.k1 * fig.k2, max_relative = 1e-12);
        assert!(EvanescentParams::with_auto_omega(1.0, 5.0, 3.0, 1.0).is_err());
    }

    fn square_grid() -> GridSpec {
        GridSpec { x0: -1.0, x1: 1.0, t0: -1.0, t1: 1.0, nx: 64, nt: 64 }
    }

    #[test]
    fn traveling_waves_solve_the_wave_equation() {
        let w = TravelingWave::new(Generator::gaussian(0.5, 0.0), 2.0, 1.0).unwrap();
        assert!(helmholtz_residual(&w, 2.0, &square_grid()).unwrap().max_abs() <= 1e-8);
        assert!(psi_wave_identity_residual(&w, 2.0, &square_grid()).unwrap() <= 1e-8);
        assert_relative_eq!(psi1_axis_ratio(&w, 0.2, 0.5).unwrap(), -2.0, max_relative = 1e-12);

        let flat = TravelingWave::new(Generator::poly(vec![0.7]), 2.0, 1.0).unwrap();
        assert_eq!(psi_wave_identity_residual(&flat, 2.0, &square_grid()).unwrap(), 0.0);

        let pair = Superposition {
            parts: vec![w.clone(), TravelingWave::new(Generator::gaussian(0.5, 0.3), 2.0, -1.0).unwrap()],
        };
        assert!(helmholtz_residual(&pair, 2.0, &square_grid()).unwrap().max_abs() <= 1e-8);
        assert!(psi_wave_identity_residual(&pair, 2.0, &square_grid()).unwrap() > 1e-3);
    }

    #[test]
    fn evanescent_field_leaves_a_helmholtz_residual() {
        let p = params();
        let field = EvanescentField { params: p, spec: FieldSpec::new(0, 1, 1) };
        let r = helmholtz_residual(&field, p.c, &square_grid()).unwrap();
        assert!(r.max_abs() > 1e-3);
        // residual = Re{((k1 + jk2)² + ω²/c²) u_c} = Re{2j k1 k2 u_c}
        let (x, t) = (r.xs[5], r.ts[9]);
        let expect = (Complex64::new(0.0, 2.0 * p.k1 * p.k2) * p.carrier(x, t)).re;
        assert_relative_eq!(r.at(5, 9), expect, max_relative = 1e-10);
    }

    #[test]
    fn envelope_law() {
        let p = EvanescentParams::figure();
        for m in [1, 2] {
            for n in [1, 2, 5, 8] {
                let (got, want) = envelope_ratio(&p, FieldSpec::new(3, n, m), 0.02, 0.013, 0.01).unwrap();
                assert_relative_eq!(got, want, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn power_examples() {
        let p = params();
        let power = PowerSpec { a: 0.0, b: 2.0, section: 1.5, period: PowerSpec::carrier_period(&p), t0: 0.2 };
        let q = QuadratureSpec::gauss_panels(0.0, 1.0, 32, 2);
        let base = averaged_power(&p, FieldSpec::new(0, 1, 1), &power, &q).unwrap();
        assert_eq!(base.alpha, 1.0);
        let direct = q.with_interval(0.0, 2.0).integrate(|x| p.u(x, 0.2).powi(2)).unwrap();
        assert_relative_eq!(base.numeric, power.section * direct / power.period, max_relative = 1e-12);
        let refined = averaged_power(&p, FieldSpec::new(0, 1, 1), &power, &q.refined()).unwrap();
        assert_relative_eq!(base.numeric, refined.numeric, max_relative = 1e-8);

        let plane = EvanescentParams { amplitude: 2.0, k1: 0.0, k2: 3.0, omega: 3.0, c: 1.0 };
        let ps = PowerSpec { a: 0.0, b: 2.0 * PI / 3.0, section: 1.0, period: 1.0, t0: 0.0 };
        let r = averaged_power(&plane, FieldSpec::new(0, 1, 1), &ps, &QuadratureSpec::gauss(0.0, 1.0)).unwrap();
        assert_relative_eq!(r.numeric, 4.0 * ps.b / 2.0, max_relative = 1e-12);

        let bad = PowerSpec { a: 1.0, b: 0.0, ..power };
        assert!(averaged_power(&p, FieldSpec::new(0, 1, 1), &bad, &q).is_err());
    }

    #[test]
    fn grid_and_csv() {
        let p = EvanescentParams { amplitude: 0.0, ..EvanescentParams::figure() };
        let g = GridSpec { nx: 3, nt: 2, ..GridSpec::default() };
        let grid = sample_grid(&p, FieldSpec::new(3, 2, 1), &g).unwrap();
        assert!(grid.values.iter().all(|v| *v == 0.0));
        let mut buf = Vec::new();
        write_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,t,value");
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[2], "0.000000000000e+00,1.000000000000e-01,0.000000000000e+00");
        assert!(!text.contains('\r'));
        let big = GridSpec { nx: 3000, nt: 3000, ..GridSpec::default() };
        assert!(matches!(big.validate(), Err(Error::GridTooLarge { .. })));
    }

    #[test]
    fn sci_format_matches_c() {
        assert_eq!(format_sci(123.456789012345), "1.234567890123e+02");
        assert_eq!(format_sci(-0.00012), "-1.200000000000e-04");
        assert_eq!(format_sci(1e100), "1.000000000000e+100");
    }
}
