//! Triviality laboratory for the first Chern-Losik class on the 2-disc.
//!
//! This module implements the transport equation for a primitive function
//! `G` on the `B` chart over the disc, its first integral, the radial
//! reduction for source-type and rotational fields, the `G0` quadrature
//! with a log-grid blow-up probe, rotational averaging over the fiber
//! rotation flow, and the invariant pair `(I1, I2)`.
//!
//! The probe reports *evidence*: a logarithmic divergence of `G0` near the
//! origin is consistent with non-existence of a smooth primitive, while a
//! bounded trace with vanishing variation is consistent with smoothness.
//! Neither outcome is a proof.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{eval, parse, Env, Expr, VectorFieldSpec};
use crate::jets::{Bundle, ChartLayout};
use crate::prolong::{field_jet, BaseField, ProlongedField};
use crate::taylor::TaylorValue;

/// A scalar function on a bundle chart, evaluable over Taylor coordinates.
pub type ChartScalar = Arc<dyn Fn(&[TaylorValue]) -> Result<TaylorValue> + Send + Sync>;

// ---------------------------------------------------------------------------
// radial profiles
// ---------------------------------------------------------------------------

/// A radial profile `f(r)` on `[0, 1)`, authored either in the symbol `r2`
/// (preferred: guarantees a smooth even extension through 0) or in `r`
/// (evaluated only at `r > 0`).
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub source: String,
    expr: Expr,
    /// true when the expression mentions `r` itself (odd-radius authored)
    in_r: bool,
}

impl RadialProfile {
    pub fn parse(source: &str) -> Result<RadialProfile> {
        let expr = parse(source, 0)?;
        let profile = RadialProfile {
            source: source.to_string(),
            in_r: expr.uses_r(),
            expr,
        };
        // spot-check that f does not vanish inside (0, 1)
        let mut prev: Option<f64> = None;
        for i in 1..40 {
            let r = i as f64 / 40.0;
            let v = profile.f(r)?;
            if v == 0.0 || prev.map_or(false, |p| p * v < 0.0) {
                return Err(Error::ProfileDomainError(format!(
                    "profile `{source}` vanishes near r = {r}"
                )));
            }
            prev = Some(v);
        }
        Ok(profile)
    }

    pub fn authored_in_r(&self) -> bool {
        self.in_r
    }

    /// `(f, f', f'')` at a radius `r`. For `r2`-authored profiles the chain
    /// rule `f(r) = g(r^2)` gives `f' = 2 r g'` and `f'' = 2 g' + 4 r^2 g''`,
    /// which is valid down to `r = 0`; `r`-authored profiles require `r > 0`.
    pub fn f_jet(&self, r: f64) -> Result<(f64, f64, f64)> {
        if self.in_r {
            if r <= 0.0 {
                return Err(Error::ProfileDomainError(
                    "r-authored profile evaluated at r <= 0".into(),
                ));
            }
            let rv = TaylorValue::affine(1, 2, r, &[1.0]);
            let env = Env {
                vars: &[],
                r2_override: None,
                r_override: Some(&rv),
            };
            let t = eval(&self.expr, &env)?;
            Ok((t.value(), t.grad(0), t.second(0, 0)))
        } else {
            let s = TaylorValue::affine(1, 2, r * r, &[1.0]);
            let env = Env {
                vars: &[],
                r2_override: Some(&s),
                r_override: None,
            };
            let t = eval(&self.expr, &env)?;
            let (g, g1, g2) = (t.value(), t.grad(0), t.second(0, 0));
            Ok((g, 2.0 * r * g1, 2.0 * g1 + 4.0 * r * r * g2))
        }
    }

    pub fn f(&self, r: f64) -> Result<f64> {
        if !self.in_r {
            // cheap constant-context path, valid at r = 0 too
            let s = TaylorValue::constant(0, 0, r * r);
            let env = Env {
                vars: &[],
                r2_override: Some(&s),
                r_override: None,
            };
            return Ok(eval(&self.expr, &env)?.value());
        }
        Ok(self.f_jet(r)?.0)
    }

    pub fn f_prime(&self, r: f64) -> Result<f64> {
        Ok(self.f_jet(r)?.1)
    }

    pub fn f_second(&self, r: f64) -> Result<f64> {
        Ok(self.f_jet(r)?.2)
    }

    /// `f(0)`; for `r`-authored profiles this is the limit value, which may
    /// not exist smoothly — it is still evaluated literally at `r = 0`.
    pub fn f0(&self) -> Result<f64> {
        if self.in_r {
            let rv = TaylorValue::constant(0, 0, 0.0);
            let env = Env {
                vars: &[],
                r2_override: None,
                r_override: Some(&rv),
            };
            return Ok(eval(&self.expr, &env)?.value());
        }
        self.f(0.0)
    }

    /// `(f, r f')` at a Taylor-valued squared radius, for building smooth
    /// invariant evaluators on the disc.
    pub fn f_and_rfprime(&self, s: &TaylorValue) -> Result<(TaylorValue, TaylorValue)> {
        let (m, ord) = (s.num_vars(), s.order());
        if self.in_r {
            if s.value() <= 0.0 {
                return Err(Error::ProfileDomainError(
                    "r-authored profile evaluated at r <= 0".into(),
                ));
            }
            let r = s.sqrt()?;
            let ru = &r.lift(1, ord + 1) + &TaylorValue::variable(m + 1, ord + 1, m);
            let env = Env {
                vars: &[],
                r2_override: None,
                r_override: Some(&ru),
            };
            let t = eval(&self.expr, &env)?;
            let f = t.extract_aux(1, &[0], ord);
            let fp = t.extract_aux(1, &[1], ord);
            Ok((f, &fp * &r))
        } else {
            let su = &s.lift(1, ord + 1) + &TaylorValue::variable(m + 1, ord + 1, m);
            let env = Env {
                vars: &[],
                r2_override: Some(&su),
                r_override: None,
            };
            let t = eval(&self.expr, &env)?;
            let g = t.extract_aux(1, &[0], ord);
            let gp = t.extract_aux(1, &[1], ord);
            Ok((g, (&gp * s).scale(2.0)))
        }
    }
}

// ---------------------------------------------------------------------------
// example fields
// ---------------------------------------------------------------------------

/// The flat-at-zero 1-dimensional field `V_a(x) = exp(-1/|x|^a)` for
/// `x != 0` and `0` at `x = 0`, where every derivative vanishes.
#[derive(Debug, Clone)]
pub struct ValphaField {
    pub alpha: f64,
}

impl BaseField for ValphaField {
    fn n(&self) -> usize {
        1
    }
    fn components(&self, y: &[TaylorValue]) -> Result<Vec<TaylorValue>> {
        let x = &y[0];
        if x.value() == 0.0 {
            // flat point: the value and all derivatives vanish
            return Ok(vec![TaylorValue::zero(x.num_vars(), x.order())]);
        }
        // |x|^{-a} = (x^2)^{-a/2}, smooth near any x != 0
        let inv = (x * x).powf(-self.alpha / 2.0)?;
        Ok(vec![(-&inv).exp()])
    }
}

/// Named sample fields from the 2-disc examples.
#[derive(Debug, Clone)]
pub enum ExampleKind {
    /// `V = (f(r) y^1, f(r) y^2)`
    RadialSource(RadialProfile),
    /// `V = (f(r) y^2, -f(r) y^1)`
    Rotational(RadialProfile),
    /// The fiber rotation field on the B chart (a field in 4 variables).
    Y,
    /// `V_a` on the line.
    Valpha(f64),
}

/// Construct a named example field.
pub fn example_field(kind: &ExampleKind) -> Result<Arc<dyn BaseField>> {
    match kind {
        ExampleKind::RadialSource(p) => {
            let src = format!("({f})*y1, ({f})*y2", f = p.source);
            Ok(Arc::new(VectorFieldSpec::parse(&src, 2)?))
        }
        ExampleKind::Rotational(p) => {
            let src = format!("({f})*y2, 0 - ({f})*y1", f = p.source);
            Ok(Arc::new(VectorFieldSpec::parse(&src, 2)?))
        }
        ExampleKind::Y => Ok(Arc::new(VectorFieldSpec::parse(
            "y2, 0 - y1, y4, 0 - y3",
            4,
        )?)),
        ExampleKind::Valpha(alpha) => {
            if *alpha <= 0.0 {
                return Err(Error::InvalidInput("valpha needs alpha > 0".into()));
            }
            Ok(Arc::new(ValphaField { alpha: *alpha }))
        }
    }
}

// ---------------------------------------------------------------------------
// the transport equation on B
// ---------------------------------------------------------------------------

/// Right-hand side of the primitive-transport equation on the B chart:
/// `-div V + R` as a function of the base point.
pub fn cl_rhs(v: &VectorFieldSpec) -> impl Fn(&[f64], f64) -> Result<f64> + '_ {
    move |y: &[f64], r_const: f64| {
        let ty: Vec<TaylorValue> = y.iter().map(|&c| TaylorValue::constant(0, 0, c)).collect();
        let jet = field_jet(v, &ty)?;
        let mut div = 0.0;
        for i in 0..v.n {
            div += jet.jac_at(i, i).value();
        }
        Ok(-div + r_const)
    }
}

/// The constant `R = 2 f(0)` forced by smoothness of the radial reduction.
pub fn forced_r(profile: &RadialProfile) -> Result<f64> {
    Ok(2.0 * profile.f0()?)
}

/// The first integral `div V - V^i y_i` of the transport equation, as a
/// function on B-chart points.
pub struct FirstIntegralFn {
    field: Arc<dyn BaseField>,
}

pub fn first_integral(field: Arc<dyn BaseField>) -> FirstIntegralFn {
    FirstIntegralFn { field }
}

impl FirstIntegralFn {
    pub fn eval(&self, b_point: &[f64]) -> Result<f64> {
        let n = self.field.n();
        if b_point.len() != 2 * n {
            return Err(Error::DimensionMismatch(format!(
                "B-chart point needs {} coordinates, got {}",
                2 * n,
                b_point.len()
            )));
        }
        let y: Vec<TaylorValue> = b_point[..n]
            .iter()
            .map(|&c| TaylorValue::constant(0, 0, c))
            .collect();
        let jet = field_jet(self.field.as_ref(), &y)?;
        let mut out = 0.0;
        for i in 0..n {
            out += jet.jac_at(i, i).value();
            out -= jet.alpha[i].value() * b_point[n + i];
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// G0 quadrature and blow-up probe
// ---------------------------------------------------------------------------

fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn rec<F>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

/// Integrate with segments split at decade boundaries, which keeps the
/// adaptive rule efficient on integrands that steepen like `1/rho` toward
/// the origin.
fn log_split_integral<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts = vec![lo];
    let mut d = 10f64.powf(lo.log10().ceil());
    while d < hi {
        if d > lo {
            cuts.push(d);
        }
        d *= 10.0;
    }
    cuts.push(hi);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += adaptive_simpson(f, w[0], w[1], tol)?;
    }
    Ok(sign * total)
}

/// `G0(r) = -int_{r0}^{r} (2 f + rho f' - R) / (f rho) d rho`, the radial
/// solution of the reduced transport equation, by adaptive quadrature.
pub fn g0_eval(profile: &RadialProfile, r: f64, r0: f64, r_const: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0 && r0 > 0.0 && r0 < 1.0) {
        return Err(Error::InvalidInput(
            "g0_eval needs 0 < r, r0 < 1".into(),
        ));
    }
    let integrand = |rho: f64| -> Result<f64> {
        let (f, fp, _) = profile.f_jet(rho)?;
        if f == 0.0 {
            return Err(Error::IntegrandSingular(format!(
                "profile vanishes at rho = {rho}"
            )));
        }
        Ok((2.0 * f + fp * rho - r_const) / (f * rho))
    };
    Ok(-log_split_integral(&integrand, r0, r, 1e-12)?)
}

/// Verdict of the blow-up probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "smooth-evidence")]
    SmoothEvidence,
    #[serde(rename = "divergence-evidence")]
    DivergenceEvidence,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// Report of the blow-up probe: the `G0` trace on a log grid and the
/// log-linear fit over the lowest decade.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CLReport {
    pub profile: String,
    pub r_const: f64,
    pub r0: f64,
    pub r_min: f64,
    /// pairs `[r, G0(r)]`, ascending in `r`
    pub samples: Vec<[f64; 2]>,
    pub fit: FitReport,
    pub verdict: Verdict,
}

impl CLReport {
    pub fn samples_csv(&self) -> String {
        let mut s = String::from("r,g0\n");
        for [r, g] in &self.samples {
            s.push_str(&format!("{r:.12e},{g:.12e}\n"));
        }
        s
    }
}

/// Sample `G0` (with `R = 2 f(0)`) on a log grid down to `r_min`, fit it
/// against `ln r` on the lowest decade, and classify the trace.
pub fn blowup_probe(profile: &RadialProfile, r0: f64, r_min: f64) -> Result<CLReport> {
    blowup_probe_with_r(profile, r0, r_min, forced_r(profile)?)
}

/// As [`blowup_probe`], but with a caller-chosen constant `R` in the
/// transport equation (exploration only; the forced value is the one the
/// theory singles out).
pub fn blowup_probe_with_r(
    profile: &RadialProfile,
    r0: f64,
    r_min: f64,
    r_const: f64,
) -> Result<CLReport> {
    if !(r_min > 0.0 && r_min < r0 && r0 < 1.0) {
        return Err(Error::InvalidInput(
            "blowup_probe needs 0 < r_min < r0 < 1".into(),
        ));
    }
    // log grid, ~12 points per decade, descending from r0
    let per_decade = 12usize;
    let decades = (r0 / r_min).log10();
    let count = (decades * per_decade as f64).ceil() as usize + 1;
    let mut grid: Vec<f64> = (0..=count)
        .map(|i| r0 * (r_min / r0).powf(i as f64 / count as f64))
        .collect();
    grid.dedup();
    // cumulative integration along the descending grid
    let integrand = |rho: f64| -> Result<f64> {
        let (f, fp, _) = profile.f_jet(rho)?;
        if f == 0.0 {
            return Err(Error::IntegrandSingular(format!(
                "profile vanishes at rho = {rho}"
            )));
        }
        Ok((2.0 * f + fp * rho - r_const) / (f * rho))
    };
    let mut samples: Vec<[f64; 2]> = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    samples.push([grid[0], 0.0]);
    for w in grid.windows(2) {
        acc -= log_split_integral(&integrand, w[0], w[1], 1e-12)?;
        samples.push([w[1], acc]);
    }
    samples.reverse();

    // fit G0 = intercept + slope * ln(r) over the lowest decade
    let window: Vec<&[f64; 2]> = samples
        .iter()
        .filter(|[r, _]| *r <= 10.0 * r_min * (1.0 + 1e-9))
        .collect();
    let m = window.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for [r, g] in &window {
        let x = r.ln();
        sx += x;
        sy += g;
        sxx += x * x;
        sxy += x * g;
    }
    let denom = m * sxx - sx * sx;
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    let mut ss = 0.0;
    for [r, g] in &window {
        let e = g - (intercept + slope * r.ln());
        ss += e * e;
    }
    let residual = (ss / m).sqrt();
    let (gmin, gmax) = window.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, [_, g]| {
        (a.0.min(*g), a.1.max(*g))
    });
    let range = gmax - gmin;
    let tv: f64 = window.windows(2).map(|w| (w[1][1] - w[0][1]).abs()).sum();

    let verdict = if slope.abs() >= 0.5 && residual <= 0.01 * range {
        Verdict::DivergenceEvidence
    } else if tv <= 1e-3 {
        Verdict::SmoothEvidence
    } else {
        Verdict::Inconclusive
    };
    Ok(CLReport {
        profile: profile.source.clone(),
        r_const,
        r0,
        r_min,
        samples,
        fit: FitReport {
            slope,
            intercept,
            residual,
        },
        verdict,
    })
}

// ---------------------------------------------------------------------------
// rotational averaging and invariants
// ---------------------------------------------------------------------------

/// Simultaneous rotation of the base pair and the fiber pair of a B-chart
/// point by angle `alpha` (the time-`alpha` flow of the fiber rotation
/// field).
pub fn b_rotation(p: &[TaylorValue], alpha: f64) -> Vec<TaylorValue> {
    let (c, s) = (alpha.cos(), alpha.sin());
    let rot = |a: &TaylorValue, b: &TaylorValue| {
        (&a.scale(c) + &b.scale(s), &b.scale(c) - &a.scale(s))
    };
    let (y1, y2) = rot(&p[0], &p[1]);
    let (w1, w2) = rot(&p[2], &p[3]);
    vec![y1, y2, w1, w2]
}

/// Average a scalar on the B chart over the fiber rotation orbit with a
/// 256-node trapezoidal rule (spectrally accurate for periodic smooth
/// integrands).
pub fn rot_average(g: ChartScalar) -> ChartScalar {
    const NODES: usize = 256;
    Arc::new(move |p: &[TaylorValue]| {
        let (m, ord) = (p[0].num_vars(), p[0].order());
        let mut acc = TaylorValue::zero(m, ord);
        for k in 0..NODES {
            let alpha = 2.0 * std::f64::consts::PI * k as f64 / NODES as f64;
            acc = &acc + &g(&b_rotation(p, alpha))?;
        }
        Ok(acc.scale(1.0 / NODES as f64))
    })
}

/// Apply a prolonged field to a chart scalar: `(V g)(p)`, Taylor-generic.
pub fn field_apply(pf: &ProlongedField, g: ChartScalar) -> ChartScalar {
    let pf = pf.clone();
    Arc::new(move |p: &[TaylorValue]| {
        let dim = p.len();
        let (m, ord) = (p[0].num_vars(), p[0].order());
        let ext: Vec<TaylorValue> = (0..dim)
            .map(|i| {
                &p[i].lift(dim, ord + 1) + &TaylorValue::variable(m + dim, ord + 1, m + i)
            })
            .collect();
        let gv = g(&ext)?;
        let v = pf.eval(p)?;
        let mut acc = TaylorValue::zero(m, ord);
        let zeros = vec![0u8; dim];
        for i in 0..dim {
            let mut e = zeros.clone();
            e[i] = 1;
            acc = &acc + &(&gv.extract_aux(dim, &e, ord) * &v[i]);
        }
        Ok(acc)
    })
}

/// Numeric shortcut for `(V g)(p)` at a plain point.
pub fn field_apply_at(pf: &ProlongedField, g: &ChartScalar, p: &[f64]) -> Result<f64> {
    let tp: Vec<TaylorValue> = p.iter().map(|&v| TaylorValue::constant(0, 0, v)).collect();
    Ok(field_apply(pf, g.clone())(&tp)?.value())
}

/// The invariant pair for the radial source field:
/// `I1 = f(r) (2 - y_1 y^1 - y_2 y^2) + f'(r) r` and `I2 = y_1 y^2 - y_2 y^1`,
/// both first integrals of the prolonged field and of the fiber rotation.
pub fn example1_invariants(profile: &RadialProfile) -> (ChartScalar, ChartScalar) {
    let prof = profile.clone();
    let i1: ChartScalar = Arc::new(move |p: &[TaylorValue]| {
        let (m, ord) = (p[0].num_vars(), p[0].order());
        let s = &(&p[0] * &p[0]) + &(&p[1] * &p[1]);
        let (f, rfp) = prof.f_and_rfprime(&s)?;
        let pair = &(&p[2] * &p[0]) + &(&p[3] * &p[1]);
        let two = TaylorValue::constant(m, ord, 2.0);
        Ok(&(&f * &(&two - &pair)) + &rfp)
    });
    let i2: ChartScalar = Arc::new(|p: &[TaylorValue]| Ok(&(&p[2] * &p[1]) - &(&p[3] * &p[0])));
    (i1, i2)
}

/// Determinant of the fiber Jacobian of `(y_1, y_2) -> (I1, I2)`, which
/// equals `f(r) r^2` and is nonzero wherever `f` is.
pub fn example1_fiber_det(profile: &RadialProfile, p: &[f64]) -> Result<f64> {
    let r2 = p[0] * p[0] + p[1] * p[1];
    let r = r2.sqrt();
    Ok(profile.f(r)? * r2)
}

/// For the rotational field: the explicit primitive `G = y_2 y^1 - y_1 y^2`
/// solves the transport equation with `R = 0`. Returns the maximum of
/// `|V~ G|` over a battery of seeded random B-chart points, and checks that
/// the equation right-hand side is the constant `R` (the field is
/// divergence-free).
pub fn example2_check(profile: &RadialProfile, samples: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    let field = example_field(&ExampleKind::Rotational(profile.clone()))?;
    let pf = ProlongedField::new(Bundle::B, field.clone());
    let g: ChartScalar = Arc::new(|p: &[TaylorValue]| Ok(&(&p[3] * &p[0]) - &(&p[2] * &p[1])));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut max = 0.0f64;
    for _ in 0..samples {
        let p = [
            rng.gen_range(-0.6..0.6),
            rng.gen_range(-0.6..0.6),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        if p[0] * p[0] + p[1] * p[1] < 1e-4 {
            continue;
        }
        max = max.max(field_apply_at(&pf, &g, &p)?.abs());
        // divergence-free: the right-hand side reduces to the constant R
        let ty: Vec<TaylorValue> = p[..2]
            .iter()
            .map(|&c| TaylorValue::constant(0, 0, c))
            .collect();
        let jet = field_jet(field.as_ref(), &ty)?;
        let div = jet.jac_at(0, 0).value() + jet.jac_at(1, 1).value();
        max = max.max(div.abs());
    }
    Ok(max)
}

/// Random B-chart points over the disc, for residual batteries.
pub fn random_b_points(samples: usize, seed: u64) -> Vec<[f64; 4]> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    while out.len() < samples {
        let p = [
            rng.gen_range(-0.6..0.6),
            rng.gen_range(-0.6..0.6),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        if p[0] * p[0] + p[1] * p[1] > 1e-4 {
            out.push(p);
        }
    }
    out
}

/// The B-chart layout used throughout this module (n = 2).
pub fn b_layout() -> ChartLayout {
    ChartLayout::new(Bundle::B, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prolong::rk4_flow;
    use approx::assert_relative_eq;

    fn profile(src: &str) -> RadialProfile {
        RadialProfile::parse(src).unwrap()
    }

    #[test]
    fn profile_evaluators() {
        let p = profile("1 + r2");
        assert_relative_eq!(p.f(0.5).unwrap(), 1.25);
        assert_relative_eq!(p.f_prime(0.5).unwrap(), 1.0);
        assert_relative_eq!(p.f_second(0.5).unwrap(), 2.0);
        assert_relative_eq!(p.f0().unwrap(), 1.0);
        assert_relative_eq!(forced_r(&p).unwrap(), 2.0);

        let q = profile("r");
        assert!(q.authored_in_r());
        assert_relative_eq!(q.f(0.3).unwrap(), 0.3);
        assert_relative_eq!(q.f_prime(0.3).unwrap(), 1.0);
        assert_relative_eq!(q.f_second(0.3).unwrap(), 0.0, epsilon = 1e-12);
        assert!(q.f_jet(0.0).is_err());
    }

    #[test]
    fn profile_must_not_vanish_inside() {
        assert!(matches!(
            RadialProfile::parse("r2 - 0.25"),
            Err(Error::ProfileDomainError(_))
        ));
        // vanishing exactly at 0 is allowed
        assert!(RadialProfile::parse("r2").is_ok());
    }

    #[test]
    fn example_fields() {
        let f1 = profile("1");
        let radial = example_field(&ExampleKind::RadialSource(f1.clone())).unwrap();
        let p: Vec<TaylorValue> = [0.3, 0.4]
            .iter()
            .map(|&v| TaylorValue::constant(0, 0, v))
            .collect();
        let v = radial.components(&p).unwrap();
        assert_relative_eq!(v[0].value(), 0.3);
        assert_relative_eq!(v[1].value(), 0.4);

        let rot = example_field(&ExampleKind::Rotational(f1)).unwrap();
        let v = rot.components(&p).unwrap();
        assert_relative_eq!(v[0].value(), 0.4);
        assert_relative_eq!(v[1].value(), -0.3);
        let jet = field_jet(rot.as_ref(), &p).unwrap();
        assert_relative_eq!(
            jet.jac_at(0, 0).value() + jet.jac_at(1, 1).value(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn valpha_values_and_flat_point() {
        let v = example_field(&ExampleKind::Valpha(1.0)).unwrap();
        let x = vec![TaylorValue::constant(0, 0, 0.5)];
        assert_relative_eq!(
            v.components(&x).unwrap()[0].value(),
            (-2.0f64).exp(),
            epsilon = 1e-15
        );
        // at the flat point the value and every Taylor coefficient vanish
        let x0 = vec![TaylorValue::affine(1, 3, 0.0, &[1.0])];
        let out = v.components(&x0).unwrap();
        assert_eq!(out[0].max_abs_coeff(), 0.0);
        assert!(example_field(&ExampleKind::Valpha(-1.0)).is_err());
    }

    #[test]
    fn cl_rhs_examples() {
        let f1 = profile("1");
        let v = VectorFieldSpec::parse("y1, y2", 2).unwrap();
        let rhs = cl_rhs(&v);
        assert_relative_eq!(rhs(&[0.3, 0.4], forced_r(&f1).unwrap()).unwrap(), 0.0);

        let fr2 = profile("r2");
        assert_relative_eq!(forced_r(&fr2).unwrap(), 0.0);
        let v2 = VectorFieldSpec::parse("r2*y1, r2*y2", 2).unwrap();
        let rhs2 = cl_rhs(&v2);
        // div = 4 r^2, so the right-hand side is -4 r^2 + R
        assert_relative_eq!(rhs2(&[0.3, 0.4], 1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(rhs2(&[0.3, 0.4], 0.0).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn first_integral_examples() {
        // n = 1, V = y: integral = 1 - y y_1, conserved along (y e^t, y_1 e^-t)
        let v: Arc<dyn BaseField> = Arc::new(VectorFieldSpec::parse("y1", 1).unwrap());
        let fi = first_integral(v);
        let at = |t: f64| fi.eval(&[0.5 * t.exp(), 0.8 * (-t).exp()]).unwrap();
        assert_relative_eq!(at(0.0), 1.0 - 0.4);
        assert_relative_eq!(at(0.5), 1.0 - 0.4, epsilon = 1e-12);

        // constant field: integral = -V^i y_i, constant under translation
        let c: Arc<dyn BaseField> = Arc::new(VectorFieldSpec::parse("1, 2", 2).unwrap());
        let fic = first_integral(c);
        assert_relative_eq!(fic.eval(&[0.1, 0.2, 0.7, 0.4]).unwrap(), -1.5);
        assert_relative_eq!(fic.eval(&[5.1, 9.2, 0.7, 0.4]).unwrap(), -1.5);
    }

    #[test]
    fn first_integral_conserved_along_flow() {
        let field =
            example_field(&ExampleKind::RadialSource(profile("1 + r2"))).unwrap();
        let fi = first_integral(field.clone());
        let pf = ProlongedField::new(Bundle::B, field);
        let p0 = [0.3, -0.2, 0.7, 0.4];
        let c0 = fi.eval(&p0).unwrap();
        let y0: Vec<TaylorValue> = p0.iter().map(|&v| TaylorValue::constant(0, 0, v)).collect();
        let out = rk4_flow(&|y: &[TaylorValue]| pf.eval(y), &y0, 0.5, 200).unwrap();
        let pt: Vec<f64> = out.iter().map(|c| c.value()).collect();
        assert!((fi.eval(&pt).unwrap() - c0).abs() <= 1e-8);
    }

    #[test]
    fn g0_closed_forms() {
        let r0 = 0.5;
        let f1 = profile("1");
        for r in [0.01, 0.3, 0.49] {
            assert_relative_eq!(g0_eval(&f1, r, r0, 2.0).unwrap(), 0.0, epsilon = 1e-12);
        }
        let fp = profile("1 + r2");
        for r in [0.01, 0.1, 0.4] {
            let want = 2.0 * (1.0f64 + r0 * r0).ln() - 2.0 * (1.0f64 + r * r).ln();
            assert_relative_eq!(g0_eval(&fp, r, r0, 2.0).unwrap(), want, epsilon = 1e-9);
        }
        let fq = profile("r2");
        for r in [0.001, 0.05, 0.3] {
            let want = -4.0 * (r / r0).ln();
            assert_relative_eq!(g0_eval(&fq, r, r0, 0.0).unwrap(), want, epsilon = 1e-8);
        }
    }

    #[test]
    fn blowup_probe_battery() {
        let cases = [
            ("1", Verdict::SmoothEvidence),
            ("1 + r2", Verdict::SmoothEvidence),
            ("2 - r2", Verdict::SmoothEvidence),
            ("r2", Verdict::DivergenceEvidence),
            ("r2*(1 - r2)", Verdict::DivergenceEvidence),
            ("r2^2", Verdict::DivergenceEvidence),
        ];
        for (src, want) in cases {
            let rep = blowup_probe(&profile(src), 0.5, 1e-6).unwrap();
            assert_eq!(rep.verdict, want, "profile {src}: {:?}", rep.fit);
        }
        // slope oracles for the divergent profiles
        let rep = blowup_probe(&profile("r2"), 0.5, 1e-6).unwrap();
        assert!((rep.fit.slope + 4.0).abs() <= 0.04, "slope {}", rep.fit.slope);
        let rep = blowup_probe(&profile("r2^2"), 0.5, 1e-6).unwrap();
        assert!((rep.fit.slope + 6.0).abs() <= 0.06, "slope {}", rep.fit.slope);
        // bounded trace approaches its closed-form limit
        let rep = blowup_probe(&profile("1 + r2"), 0.5, 1e-6).unwrap();
        let g_at_min = rep.samples.first().unwrap()[1];
        let want = 2.0 * 1.25f64.ln() - 2.0 * (1.0 + 1e-12f64).ln();
        assert!((g_at_min - want).abs() <= 1e-6);
    }

    #[test]
    fn report_serializes() {
        let rep = blowup_probe(&profile("1 + r2"), 0.5, 1e-3).unwrap();
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"verdict\":\"smooth-evidence\""));
        let back: CLReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.verdict, rep.verdict);
        assert!(rep.samples_csv().starts_with("r,g0\n"));
    }

    #[test]
    fn rot_average_examples() {
        let tp = |p: &[f64]| -> Vec<TaylorValue> {
            p.iter().map(|&v| TaylorValue::constant(0, 0, v)).collect()
        };
        let p = tp(&[0.3, -0.2, 0.7, 0.4]);
        // odd coordinate averages to zero
        let g: ChartScalar = Arc::new(|p: &[TaylorValue]| Ok(p[0].clone()));
        assert_relative_eq!(rot_average(g)(&p).unwrap().value(), 0.0, epsilon = 1e-14);
        // rotation-invariant functions are unchanged
        let g: ChartScalar = Arc::new(|p: &[TaylorValue]| Ok(&(&p[0] * &p[0]) + &(&p[1] * &p[1])));
        assert_relative_eq!(
            rot_average(g)(&p).unwrap().value(),
            0.3 * 0.3 + 0.2 * 0.2,
            epsilon = 1e-13
        );
        let (_, i2) = example1_invariants(&profile("1"));
        assert_relative_eq!(
            rot_average(i2.clone())(&p).unwrap().value(),
            i2(&p).unwrap().value(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn averaged_scalars_are_rotation_invariant() {
        // Y Q = 0 for Q = rot_average(G)
        let g: ChartScalar = Arc::new(|p: &[TaylorValue]| Ok(&p[0] * &p[2]));
        let q = rot_average(g);
        let ypf = ProlongedField::new(
            Bundle::Base,
            example_field(&ExampleKind::Y).unwrap(),
        );
        for p in random_b_points(20, 11) {
            let v = field_apply_at(&ypf, &q, &p).unwrap();
            assert!(v.abs() <= 1e-8, "Y Q = {v}");
        }
    }

    #[test]
    fn averaging_commutes_with_the_field() {
        let field =
            example_field(&ExampleKind::RadialSource(profile("1 + r2"))).unwrap();
        let pf = ProlongedField::new(Bundle::B, field);
        let g: ChartScalar = Arc::new(|p: &[TaylorValue]| Ok(&p[0] * &p[2]));
        let vq = field_apply(&pf, rot_average(g.clone()));
        let qv = rot_average(field_apply(&pf, g));
        for p in random_b_points(10, 5) {
            let tp: Vec<TaylorValue> =
                p.iter().map(|&v| TaylorValue::constant(0, 0, v)).collect();
            assert_relative_eq!(
                vq(&tp).unwrap().value(),
                qv(&tp).unwrap().value(),
                epsilon = 1e-7
            );
        }
    }

    #[test]
    fn y_flow_is_the_block_rotation() {
        let ypf = ProlongedField::new(
            Bundle::Base,
            example_field(&ExampleKind::Y).unwrap(),
        );
        let p0 = [0.3, -0.2, 0.7, 0.4];
        let y0: Vec<TaylorValue> = p0.iter().map(|&v| TaylorValue::constant(0, 0, v)).collect();
        for alpha in [std::f64::consts::PI / 7.0, 1.0, std::f64::consts::PI] {
            let out = rk4_flow(&|y: &[TaylorValue]| ypf.eval(y), &y0, alpha, 800).unwrap();
            let want = b_rotation(&y0, alpha);
            for (a, b) in out.iter().zip(want.iter()) {
                assert_relative_eq!(a.value(), b.value(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn y_equals_prolonged_rotation() {
        let y = example_field(&ExampleKind::Y).unwrap();
        let rot = example_field(&ExampleKind::Rotational(profile("1"))).unwrap();
        let pf = ProlongedField::new(Bundle::B, rot);
        for p in random_b_points(10, 3) {
            let tp: Vec<TaylorValue> =
                p.iter().map(|&v| TaylorValue::constant(0, 0, v)).collect();
            let a = y.components(&tp).unwrap();
            let b = pf.eval(&tp).unwrap();
            for (u, v) in a.iter().zip(b.iter()) {
                assert_relative_eq!(u.value(), v.value(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn example1_invariant_values() {
        let (i1, i2) = example1_invariants(&profile("1"));
        let p: Vec<TaylorValue> = [1.0, 0.0, 0.0, 0.0]
            .iter()
            .map(|&v| TaylorValue::constant(0, 0, v))
            .collect();
        assert_relative_eq!(i1(&p).unwrap().value(), 2.0);
        assert_relative_eq!(i2(&p).unwrap().value(), 0.0);
        // fiber Jacobian determinant f r^2
        let fp = profile("1 + r2");
        let det = example1_fiber_det(&fp, &[0.5, 0.0, 0.3, 0.4]).unwrap();
        assert_relative_eq!(det, 0.3125);
    }

    #[test]
    fn example1_invariants_annihilated() {
        let prof = profile("1 + r2");
        let (i1, i2) = example1_invariants(&prof);
        let field = example_field(&ExampleKind::RadialSource(prof)).unwrap();
        let pf = ProlongedField::new(Bundle::B, field);
        let ypf = ProlongedField::new(
            Bundle::Base,
            example_field(&ExampleKind::Y).unwrap(),
        );
        for p in random_b_points(200, 42) {
            for g in [&i1, &i2] {
                let v = field_apply_at(&pf, g, &p).unwrap();
                assert!(v.abs() <= 1e-9, "V I = {v} at {p:?}");
                let w = field_apply_at(&ypf, g, &p).unwrap();
                assert!(w.abs() <= 1e-9, "Y I = {w} at {p:?}");
            }
        }
    }

    #[test]
    fn example2_residuals() {
        assert!(example2_check(&profile("1"), 200, 7).unwrap() <= 1e-12);
        assert!(example2_check(&profile("1 + r2"), 200, 7).unwrap() <= 1e-10);
        assert!(example2_check(&profile("r2"), 200, 7).unwrap() <= 1e-10);
    }
}
