//! Numerical exterior calculus on bundle charts.
//!
//! A [`KForm`] is a degree-`k` alternating form given by an evaluator
//! closure over Taylor-valued points and vectors. Because every evaluator
//! is generic in the Taylor context, the exterior derivative and pullback
//! are computed exactly (to machine precision) by re-evaluating the form in
//! a context extended with auxiliary variables and reading off first-order
//! coefficients; no finite differencing is involved.
//!
//! The module also provides the named canonical forms on the bundle
//! charts: the connection-type forms `theta^i_j`, the 1-forms `Gamma_1`
//! and `Lambda_1`, and the Chern-Losik and Godbillon-Vey-Losik
//! representatives on the reduced bundles.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::DiffeoSpec;
use crate::jets::{taylor_jet, tmat_inv_det, transition_coords, Bundle, ChartLayout};
use crate::taylor::TaylorValue;

/// Evaluator of a degree-`k` form: point coordinates and `k` tangent
/// vectors, all in one Taylor context, to a scalar in the same context.
pub type FormEval =
    dyn Fn(&[TaylorValue], &[Vec<TaylorValue>]) -> Result<TaylorValue> + Send + Sync;

/// Chart vector field: point coordinates to vector components.
pub type ChartField = Arc<dyn Fn(&[TaylorValue]) -> Result<Vec<TaylorValue>> + Send + Sync>;

/// A smooth map between bundle charts, evaluable on Taylor-valued
/// coordinates so that forms can be pulled back through it.
pub trait ChartMap: Send + Sync {
    fn src(&self) -> ChartLayout;
    fn dst(&self) -> ChartLayout;
    fn apply(&self, x: &[TaylorValue]) -> Result<Vec<TaylorValue>>;
}

/// Degree-`k` differential form on a bundle chart.
#[derive(Clone)]
pub struct KForm {
    pub chart: ChartLayout,
    pub degree: usize,
    eval: Arc<FormEval>,
}

fn ctx(p: &[TaylorValue]) -> (usize, usize) {
    (p[0].num_vars(), p[0].order())
}

impl KForm {
    pub fn new<F>(chart: ChartLayout, degree: usize, f: F) -> KForm
    where
        F: Fn(&[TaylorValue], &[Vec<TaylorValue>]) -> Result<TaylorValue> + Send + Sync + 'static,
    {
        KForm {
            chart,
            degree,
            eval: Arc::new(f),
        }
    }

    pub fn zero(chart: ChartLayout, degree: usize) -> KForm {
        KForm::new(chart, degree, |p, _| Ok(TaylorValue::zero(ctx(p).0, ctx(p).1)))
    }

    /// Degree-0 form (a function on the chart).
    pub fn function<F>(chart: ChartLayout, f: F) -> KForm
    where
        F: Fn(&[TaylorValue]) -> Result<TaylorValue> + Send + Sync + 'static,
    {
        KForm::new(chart, 0, move |p, _| f(p))
    }

    /// The coordinate differential `d x^idx`.
    pub fn coord_diff(chart: ChartLayout, idx: usize) -> KForm {
        assert!(idx < chart.dim());
        KForm::new(chart, 1, move |_, vs| Ok(vs[0][idx].clone()))
    }

    pub fn eval(&self, p: &[TaylorValue], vs: &[Vec<TaylorValue>]) -> Result<TaylorValue> {
        if p.len() != self.chart.dim() {
            return Err(Error::DimensionMismatch(format!(
                "form on {} chart expects {} coordinates, got {}",
                self.chart.bundle.name(),
                self.chart.dim(),
                p.len()
            )));
        }
        if vs.len() != self.degree {
            return Err(Error::ArityError(format!(
                "degree-{} form applied to {} vectors",
                self.degree,
                vs.len()
            )));
        }
        for v in vs {
            if v.len() != self.chart.dim() {
                return Err(Error::DimensionMismatch("tangent vector length".into()));
            }
        }
        (self.eval)(p, vs)
    }

    /// Numeric evaluation at a plain point with plain vectors.
    pub fn eval_plain(&self, p: &[f64], vs: &[Vec<f64>]) -> Result<f64> {
        let tp: Vec<TaylorValue> = p.iter().map(|&x| TaylorValue::constant(0, 0, x)).collect();
        let tvs: Vec<Vec<TaylorValue>> = vs
            .iter()
            .map(|v| v.iter().map(|&x| TaylorValue::constant(0, 0, x)).collect())
            .collect();
        Ok(self.eval(&tp, &tvs)?.value())
    }

    pub fn add(&self, other: &KForm) -> Result<KForm> {
        if self.degree != other.degree || self.chart != other.chart {
            return Err(Error::DimensionMismatch(
                "form addition requires equal degree and chart".into(),
            ));
        }
        let (a, b) = (self.clone(), other.clone());
        Ok(KForm::new(self.chart, self.degree, move |p, vs| {
            Ok(&a.eval(p, vs)? + &b.eval(p, vs)?)
        }))
    }

    pub fn scale(&self, s: f64) -> KForm {
        let a = self.clone();
        KForm::new(self.chart, self.degree, move |p, vs| {
            Ok(a.eval(p, vs)?.scale(s))
        })
    }

    /// Wedge product via the shuffle expansion.
    pub fn wedge(&self, other: &KForm) -> Result<KForm> {
        if self.chart != other.chart {
            return Err(Error::DimensionMismatch(
                "wedge requires forms on the same chart".into(),
            ));
        }
        let deg = self.degree + other.degree;
        if deg > self.chart.dim() {
            return Ok(KForm::zero(self.chart, deg));
        }
        let (a, b) = (self.clone(), other.clone());
        let (ka, _kb) = (self.degree, other.degree);
        Ok(KForm::new(self.chart, deg, move |p, vs| {
            let (m, ord) = ctx(p);
            let mut total = TaylorValue::zero(m, ord);
            for sel in combinations(deg, ka) {
                let mut in_sel = vec![false; deg];
                for &i in &sel {
                    in_sel[i] = true;
                }
                let left: Vec<Vec<TaylorValue>> = sel.iter().map(|&i| vs[i].clone()).collect();
                let right: Vec<Vec<TaylorValue>> = (0..deg)
                    .filter(|&i| !in_sel[i])
                    .map(|i| vs[i].clone())
                    .collect();
                // sign of the shuffle permutation
                let mut sgn = 1.0;
                for (rank, &i) in sel.iter().enumerate() {
                    if (i - rank) % 2 == 1 {
                        sgn = -sgn;
                    }
                }
                let term = &a.eval(p, &left)? * &b.eval(p, &right)?;
                total = &total + &term.scale(sgn);
            }
            Ok(total)
        }))
    }

    /// `self ^ self ^ ... ^ self` (`p` factors, `p >= 1`).
    pub fn wedge_pow(&self, p: usize) -> Result<KForm> {
        assert!(p >= 1);
        let mut acc = self.clone();
        for _ in 1..p {
            acc = acc.wedge(self)?;
        }
        Ok(acc)
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Exterior derivative. The vectors are extended as coordinate-constant
/// fields, whose brackets vanish, so `d` reduces to the alternating sum of
/// directional derivatives; each derivative is exact, read off an
/// order-raised Taylor context.
pub fn dform(w: &KForm) -> KForm {
    let inner = w.clone();
    let k = w.degree;
    KForm::new(w.chart, k + 1, move |p, vs| {
        let (m, ord) = ctx(p);
        let mut total = TaylorValue::zero(m, ord);
        let t = TaylorValue::variable(m + 1, ord + 1, m);
        for j in 0..=k {
            let pt: Vec<TaylorValue> = p
                .iter()
                .zip(vs[j].iter())
                .map(|(pi, vi)| &pi.lift(1, ord + 1) + &(&vi.lift(1, ord + 1) * &t))
                .collect();
            let rest: Vec<Vec<TaylorValue>> = (0..=k)
                .filter(|&i| i != j)
                .map(|i| vs[i].iter().map(|c| c.lift(1, ord + 1)).collect())
                .collect();
            let val = inner.eval(&pt, &rest)?;
            let deriv = val.extract_aux(1, &[1], ord);
            total = if j % 2 == 0 {
                &total + &deriv
            } else {
                &total - &deriv
            };
        }
        Ok(total)
    })
}

/// Pullback of `w` through `map`. The image point and pushed-forward
/// vectors are obtained jointly from one evaluation of the map in a
/// context extended by `k` auxiliary line parameters.
pub fn pullback(map: Arc<dyn ChartMap>, w: &KForm) -> Result<KForm> {
    if map.dst() != w.chart {
        return Err(Error::DimensionMismatch(
            "pullback: form does not live on the target chart of the map".into(),
        ));
    }
    let inner = w.clone();
    let k = w.degree;
    let src = map.src();
    Ok(KForm::new(src, k, move |p, vs| {
        if k == 0 {
            return inner.eval(&map.apply(p)?, &[]);
        }
        let (m, ord) = ctx(p);
        let q: Vec<TaylorValue> = (0..p.len())
            .map(|i| {
                let mut acc = p[i].lift(k, ord + 1);
                for (j, v) in vs.iter().enumerate() {
                    let t = TaylorValue::variable(m + k, ord + 1, m + j);
                    acc = &acc + &(&v[i].lift(k, ord + 1) * &t);
                }
                acc
            })
            .collect();
        let img_ext = map.apply(&q)?;
        let zeros = vec![0u8; k];
        let img: Vec<TaylorValue> = img_ext
            .iter()
            .map(|x| x.extract_aux(k, &zeros, ord))
            .collect();
        let pushed: Vec<Vec<TaylorValue>> = (0..k)
            .map(|j| {
                let mut e = zeros.clone();
                e[j] = 1;
                img_ext.iter().map(|x| x.extract_aux(k, &e, ord)).collect()
            })
            .collect();
        inner.eval(&img, &pushed)
    }))
}

/// Interior product `i_X w` for a chart vector field `X`.
pub fn interior(field: ChartField, w: &KForm) -> Result<KForm> {
    if w.degree == 0 {
        return Err(Error::ArityError(
            "interior product of a degree-0 form".into(),
        ));
    }
    let inner = w.clone();
    Ok(KForm::new(w.chart, w.degree - 1, move |p, vs| {
        let x = field(p)?;
        let mut all = Vec::with_capacity(vs.len() + 1);
        all.push(x);
        all.extend_from_slice(vs);
        inner.eval(p, &all)
    }))
}

/// Lie derivative by Cartan's formula `L_X = i_X d + d i_X`.
pub fn lie_derivative(field: ChartField, w: &KForm) -> Result<KForm> {
    let term1 = interior(field.clone(), &dform(w))?;
    if w.degree == 0 {
        return Ok(term1);
    }
    let term2 = dform(&interior(field, w)?);
    term1.add(&term2)
}

// ---------------------------------------------------------------------------
// chart maps
// ---------------------------------------------------------------------------

/// The bundle map induced by a local diffeomorphism of the base chart.
pub struct TransitionMap {
    pub bundle: Bundle,
    pub h: DiffeoSpec,
}

impl TransitionMap {
    pub fn new(bundle: Bundle, h: DiffeoSpec) -> TransitionMap {
        TransitionMap { bundle, h }
    }
}

impl ChartMap for TransitionMap {
    fn src(&self) -> ChartLayout {
        ChartLayout::new(self.bundle, self.h.n)
    }
    fn dst(&self) -> ChartLayout {
        ChartLayout::new(self.bundle, self.h.n)
    }
    fn apply(&self, x: &[TaylorValue]) -> Result<Vec<TaylorValue>> {
        let n = self.h.n;
        let jet = taylor_jet(&self.h, &x[..n])?;
        transition_coords(self.bundle, n, &jet, x)
    }
}

/// Quotient projection out of the full frame bundle chart, evaluable on
/// Taylor coordinates.
pub struct ProjectionMap {
    pub n: usize,
    pub target: Bundle,
}

impl ProjectionMap {
    pub fn new(n: usize, target: Bundle) -> ProjectionMap {
        ProjectionMap { n, target }
    }
}

impl ChartMap for ProjectionMap {
    fn src(&self) -> ChartLayout {
        ChartLayout::new(Bundle::S2, self.n)
    }
    fn dst(&self) -> ChartLayout {
        ChartLayout::new(self.target, self.n)
    }
    fn apply(&self, x: &[TaylorValue]) -> Result<Vec<TaylorValue>> {
        let n = self.n;
        let s2 = ChartLayout::new(Bundle::S2, n);
        let dst = ChartLayout::new(self.target, n);
        let (m, ord) = ctx(x);
        let mut out = vec![TaylorValue::zero(m, ord); dst.dim()];
        out[..n].clone_from_slice(&x[..n]);
        let copy_yjk = |out: &mut Vec<TaylorValue>| {
            for i in 0..n {
                for j in 0..n {
                    for k in j..n {
                        out[dst.yjk(i, j, k)] = x[s2.yjk(i, j, k)].clone();
                    }
                }
            }
        };
        let trace_yi = |out: &mut Vec<TaylorValue>| {
            for i in 0..n {
                let mut s = TaylorValue::zero(m, ord);
                for j in 0..n {
                    s = &s + &x[s2.yjk(j, j, i)];
                }
                out[dst.yi(i)] = s;
            }
        };
        let det = || -> Result<TaylorValue> {
            let yj: Vec<TaylorValue> = (0..n * n)
                .map(|idx| x[s2.yj(idx / n, idx % n)].clone())
                .collect();
            let (_, d) = tmat_inv_det(n, &yj).map_err(|_| Error::SingularJacobian)?;
            Ok(d)
        };
        match self.target {
            Bundle::Base => {}
            Bundle::S2 => out.clone_from_slice(x),
            Bundle::Gl => copy_yjk(&mut out),
            Bundle::O => {
                for i in 0..n {
                    for j in i..n {
                        let mut s = TaylorValue::zero(m, ord);
                        for l in 0..n {
                            s = &s + &(&x[s2.yj(i, l)] * &x[s2.yj(j, l)]);
                        }
                        out[dst.yij(i, j)] = s;
                    }
                }
                copy_yjk(&mut out);
            }
            Bundle::Sl => {
                out[dst.ydet()] = det()?;
                copy_yjk(&mut out);
            }
            Bundle::A => {
                let d = det()?;
                let d0 = d.value();
                if d0 == 0.0 {
                    return Err(Error::ZeroDeterminant);
                }
                let absd = if d0 < 0.0 { -&d } else { d };
                out[dst.x()] = absd.ln()?;
                trace_yi(&mut out);
            }
            Bundle::B => trace_yi(&mut out),
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// named forms
// ---------------------------------------------------------------------------

fn frame_inverse(n: usize, p: &[TaylorValue], lay: ChartLayout) -> Result<Vec<TaylorValue>> {
    let yj: Vec<TaylorValue> = (0..n * n)
        .map(|idx| p[lay.yj(idx / n, idx % n)].clone())
        .collect();
    let (inv, _) = tmat_inv_det(n, &yj).map_err(|_| Error::SingularMatrix)?;
    Ok(inv)
}

/// The canonical connection-type 1-form `theta^i_j = -v^i_k dy^k_j +
/// y^i_{jk} dy^k` on the full frame bundle, where `v` is the inverse of
/// the frame matrix.
pub fn theta_form(n: usize, i: usize, j: usize) -> KForm {
    let lay = ChartLayout::new(Bundle::S2, n);
    KForm::new(lay, 1, move |p, vs| {
        let (m, ord) = ctx(p);
        let v = frame_inverse(n, p, lay)?;
        let u = &vs[0];
        let mut total = TaylorValue::zero(m, ord);
        for k in 0..n {
            total = &total - &(&v[i * n + k] * &u[lay.yj(k, j)]);
            total = &total + &(&p[lay.yjk(i, j, k)] * &u[lay.y(k)]);
        }
        Ok(total)
    })
}

/// `Gamma_1 = theta^i_i` on the full frame bundle.
pub fn gamma1_form(n: usize) -> KForm {
    let lay = ChartLayout::new(Bundle::S2, n);
    KForm::new(lay, 1, move |p, vs| {
        let (m, ord) = ctx(p);
        let v = frame_inverse(n, p, lay)?;
        let u = &vs[0];
        let mut total = TaylorValue::zero(m, ord);
        for i in 0..n {
            for k in 0..n {
                total = &total - &(&v[i * n + k] * &u[lay.yj(k, i)]);
                total = &total + &(&p[lay.yjk(i, i, k)] * &u[lay.y(k)]);
            }
        }
        Ok(total)
    })
}

/// `Lambda_1 = -1/2 y_{ij} dy^{ij} + y^j_{jk} dy^k` on the O(n) quotient,
/// where `y_{ij}` is the inverse of the metric block. In the packed layout
/// each off-diagonal differential carries both symmetric contributions.
pub fn lambda1_form(n: usize) -> KForm {
    let lay = ChartLayout::new(Bundle::O, n);
    KForm::new(lay, 1, move |p, vs| {
        let (m, ord) = ctx(p);
        let full: Vec<TaylorValue> = (0..n * n)
            .map(|idx| p[lay.yij((idx / n).min(idx % n), (idx / n).max(idx % n))].clone())
            .collect();
        let (inv, _) = tmat_inv_det(n, &full).map_err(|_| Error::SingularMatrix)?;
        let u = &vs[0];
        let mut total = TaylorValue::zero(m, ord);
        for i in 0..n {
            for j in i..n {
                let w = if i == j { -0.5 } else { -1.0 };
                total = &total + &(&inv[i * n + j] * &u[lay.yij(i, j)]).scale(w);
            }
        }
        for k in 0..n {
            let mut tr = TaylorValue::zero(m, ord);
            for j in 0..n {
                tr = &tr + &p[lay.yjk(j, j, k)];
            }
            total = &total + &(&tr * &u[lay.y(k)]);
        }
        Ok(total)
    })
}

/// The 2-form `d y^i_{ik} ^ dy^k` on a chart carrying a `y^i_{jk}` block
/// (S2, GL, O, SL).
fn trace_psi_form(bundle: Bundle, n: usize) -> KForm {
    let lay = ChartLayout::new(bundle, n);
    KForm::new(lay, 2, move |p, vs| {
        let (m, ord) = ctx(p);
        let tr = |v: &[TaylorValue], k: usize| {
            let mut s = TaylorValue::zero(m, ord);
            for i in 0..n {
                s = &s + &v[lay.yjk(i, i, k)];
            }
            s
        };
        let (u, v) = (&vs[0], &vs[1]);
        let mut total = TaylorValue::zero(m, ord);
        for k in 0..n {
            total = &total + &(&tr(u, k) * &v[lay.y(k)]);
            total = &total - &(&tr(v, k) * &u[lay.y(k)]);
        }
        Ok(total)
    })
}

/// The symplectic-type 2-form `dy_i ^ dy^i` on the A and B charts.
fn symplectic_form(bundle: Bundle, n: usize) -> KForm {
    let lay = ChartLayout::new(bundle, n);
    KForm::new(lay, 2, move |p, vs| {
        let (m, ord) = ctx(p);
        let (u, v) = (&vs[0], &vs[1]);
        let mut total = TaylorValue::zero(m, ord);
        for i in 0..n {
            total = &total + &(&u[lay.yi(i)] * &v[lay.y(i)]);
            total = &total - &(&v[lay.yi(i)] * &u[lay.y(i)]);
        }
        Ok(total)
    })
}

/// First Chern-Losik representative: `dy^i_{ik} ^ dy^k` on the GL(n)
/// quotient, or `dy_i ^ dy^i` on the B chart.
pub fn cl_form(bundle: Bundle, n: usize) -> Result<KForm> {
    match bundle {
        Bundle::Gl => Ok(trace_psi_form(Bundle::Gl, n)),
        Bundle::B => Ok(symplectic_form(Bundle::B, n)),
        other => Err(Error::InvalidInput(format!(
            "no Chern-Losik chart form on bundle {}",
            other.name()
        ))),
    }
}

/// Godbillon-Vey-Losik representative on the supported charts:
///
/// - S2: `-v^j_i dy^i_j ^ (dy^k_{kl} ^ dy^l)^n`
/// - O:  `-1/2 y_{ij} dy^{ij} ^ (dy^k_{kl} ^ dy^l)^n`
/// - SL: `-(1/ydet) d(ydet) ^ (dy^k_{kl} ^ dy^l)^n`
/// - A:  `-dx ^ (dy_i ^ dy^i)^n`
pub fn gvl_form(bundle: Bundle, n: usize) -> Result<KForm> {
    match bundle {
        Bundle::S2 => {
            let lay = ChartLayout::new(Bundle::S2, n);
            let lead = KForm::new(lay, 1, move |p, vs| {
                let (m, ord) = ctx(p);
                let v = frame_inverse(n, p, lay)?;
                let u = &vs[0];
                let mut total = TaylorValue::zero(m, ord);
                for i in 0..n {
                    for j in 0..n {
                        total = &total - &(&v[j * n + i] * &u[lay.yj(i, j)]);
                    }
                }
                Ok(total)
            });
            lead.wedge(&trace_psi_form(Bundle::S2, n).wedge_pow(n)?)
        }
        Bundle::O => {
            let lay = ChartLayout::new(Bundle::O, n);
            let lead = KForm::new(lay, 1, move |p, vs| {
                let (m, ord) = ctx(p);
                let full: Vec<TaylorValue> = (0..n * n)
                    .map(|idx| {
                        p[lay.yij((idx / n).min(idx % n), (idx / n).max(idx % n))].clone()
                    })
                    .collect();
                let (inv, _) = tmat_inv_det(n, &full).map_err(|_| Error::SingularMatrix)?;
                let u = &vs[0];
                let mut total = TaylorValue::zero(m, ord);
                for i in 0..n {
                    for j in i..n {
                        let w = if i == j { -0.5 } else { -1.0 };
                        total = &total + &(&inv[i * n + j] * &u[lay.yij(i, j)]).scale(w);
                    }
                }
                Ok(total)
            });
            lead.wedge(&trace_psi_form(Bundle::O, n).wedge_pow(n)?)
        }
        Bundle::Sl => {
            let lay = ChartLayout::new(Bundle::Sl, n);
            let lead = KForm::new(lay, 1, move |p, vs| {
                let u = &vs[0];
                let q = u[lay.ydet()].try_div(&p[lay.ydet()])?;
                Ok(q.scale(-1.0))
            });
            lead.wedge(&trace_psi_form(Bundle::Sl, n).wedge_pow(n)?)
        }
        Bundle::A => {
            let lay = ChartLayout::new(Bundle::A, n);
            let lead = KForm::new(lay, 1, move |_, vs| Ok(vs[0][lay.x()].scale(-1.0)));
            lead.wedge(&symplectic_form(Bundle::A, n).wedge_pow(n)?)
        }
        other => Err(Error::InvalidInput(format!(
            "no Godbillon-Vey-Losik chart form on bundle {}",
            other.name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn base_chart(n: usize) -> ChartLayout {
        ChartLayout::new(Bundle::Base, n)
    }

    /// Deterministic sample numbers in (-1, 1).
    fn samples(seed: u64, count: usize) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..count)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    fn s2_sample(seed: u64) -> Vec<f64> {
        let lay = ChartLayout::new(Bundle::S2, 2);
        let mut p = samples(seed, lay.dim());
        for v in p.iter_mut() {
            *v *= 0.4;
        }
        // keep the frame block well-conditioned
        p[lay.yj(0, 0)] += 1.0;
        p[lay.yj(1, 1)] += 1.0;
        p
    }

    fn to_t(p: &[f64]) -> Vec<TaylorValue> {
        p.iter().map(|&x| TaylorValue::constant(0, 0, x)).collect()
    }

    fn vec_samples(seed: u64, dim: usize, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|i| samples(seed + 100 * (i as u64 + 1), dim))
            .collect()
    }

    #[test]
    fn wedge_of_coordinate_differentials() {
        let ch = base_chart(2);
        let dx = KForm::coord_diff(ch, 0);
        let dy = KForm::coord_diff(ch, 1);
        let w = dx.wedge(&dy).unwrap();
        let p = [0.0, 0.0];
        let e1 = vec![1.0, 0.0];
        let e2 = vec![0.0, 1.0];
        assert_relative_eq!(w.eval_plain(&p, &[e1.clone(), e2.clone()]).unwrap(), 1.0);
        assert_relative_eq!(w.eval_plain(&p, &[e2.clone(), e1.clone()]).unwrap(), -1.0);
        assert_relative_eq!(w.eval_plain(&p, &[e1.clone(), e1.clone()]).unwrap(), 0.0);
        // degree above the chart dimension collapses to zero
        let top = w.wedge(&dx).unwrap();
        assert_eq!(top.degree, 3);
        assert_relative_eq!(
            top.eval_plain(&p, &[e1.clone(), e2.clone(), e1]).unwrap(),
            0.0
        );
    }

    #[test]
    fn d_of_function_is_gradient() {
        let ch = base_chart(2);
        // f(y) = y1^2 y2
        let f = KForm::function(ch, |p| Ok(&(&p[0] * &p[0]) * &p[1]));
        let df = dform(&f);
        let p = [2.0, 3.0];
        let v = vec![0.7, -0.4];
        // grad f = (2 y1 y2, y1^2) = (12, 4)
        let want = 12.0 * 0.7 + 4.0 * (-0.4);
        assert_relative_eq!(df.eval_plain(&p, &[v]).unwrap(), want, epsilon = 1e-12);
        // d(df) = 0
        let ddf = dform(&df);
        let vs = vec_samples(7, 2, 2);
        assert_relative_eq!(ddf.eval_plain(&p, &vs).unwrap(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn d_gamma1_is_trace_psi() {
        let n = 2;
        let g = gamma1_form(n);
        let dg = dform(&g);
        let psi = trace_psi_form(Bundle::S2, n);
        let dim = ChartLayout::new(Bundle::S2, n).dim();
        for seed in 1..4u64 {
            let p = s2_sample(seed);
            let vs = vec_samples(seed * 13, dim, 2);
            let a = dg.eval_plain(&p, &vs).unwrap();
            let b = psi.eval_plain(&p, &vs).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        // d(d Gamma_1) = 0
        let ddg = dform(&dg);
        let p = s2_sample(5);
        let vs = vec_samples(19, dim, 3);
        assert_relative_eq!(ddg.eval_plain(&p, &vs).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn theta_on_identity_frame() {
        let n = 2;
        let lay = ChartLayout::new(Bundle::S2, n);
        let mut p = vec![0.0; lay.dim()];
        p[lay.yj(0, 0)] = 1.0;
        p[lay.yj(1, 1)] = 1.0;
        p[lay.yjk(0, 1, 0)] = 0.7;
        let th = theta_form(n, 0, 1);
        // theta^0_1 = -dy^0_1 + y^0_{1k} dy^k at the identity frame
        let mut v = vec![0.0; lay.dim()];
        v[lay.yj(0, 1)] = 1.0;
        assert_relative_eq!(th.eval_plain(&p, &[v]).unwrap(), -1.0);
        let mut v = vec![0.0; lay.dim()];
        v[lay.y(0)] = 1.0;
        assert_relative_eq!(th.eval_plain(&p, &[v]).unwrap(), 0.7);
    }

    #[test]
    fn lambda1_pulls_back_to_gamma1() {
        let n = 2;
        let proj = Arc::new(ProjectionMap::new(n, Bundle::O));
        let pulled = pullback(proj.clone(), &lambda1_form(n)).unwrap();
        let g = gamma1_form(n);
        let dim = ChartLayout::new(Bundle::S2, n).dim();
        for seed in 1..5u64 {
            let p = s2_sample(seed);
            let v = vec_samples(seed * 31, dim, 1);
            assert_relative_eq!(
                pulled.eval_plain(&p, &v).unwrap(),
                g.eval_plain(&p, &v).unwrap(),
                epsilon = 1e-10
            );
        }
        // and the differentials agree as well
        let pulled_d = pullback(proj, &dform(&lambda1_form(n))).unwrap();
        let dg = dform(&g);
        let p = s2_sample(9);
        let vs = vec_samples(77, dim, 2);
        assert_relative_eq!(
            pulled_d.eval_plain(&p, &vs).unwrap(),
            dg.eval_plain(&p, &vs).unwrap(),
            epsilon = 1e-9
        );
    }

    fn sample_diffeo() -> DiffeoSpec {
        DiffeoSpec::parse("y1 + 0.2*y2^2 + 0.1*y1*y2, y2 - 0.15*y1^2 + 0.05*y1", 2).unwrap()
    }

    #[test]
    fn gamma1_is_canonical() {
        let n = 2;
        let g = gamma1_form(n);
        let map = Arc::new(TransitionMap::new(Bundle::S2, sample_diffeo()));
        let pulled = pullback(map, &g).unwrap();
        let dim = ChartLayout::new(Bundle::S2, n).dim();
        for seed in 2..5u64 {
            let p = s2_sample(seed);
            let v = vec_samples(seed * 7, dim, 1);
            assert_relative_eq!(
                pulled.eval_plain(&p, &v).unwrap(),
                g.eval_plain(&p, &v).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn cl_forms_are_canonical() {
        let n = 2;
        for bundle in [Bundle::Gl, Bundle::B] {
            let w = cl_form(bundle, n).unwrap();
            let map = Arc::new(TransitionMap::new(bundle, sample_diffeo()));
            let pulled = pullback(map, &w).unwrap();
            let dim = ChartLayout::new(bundle, n).dim();
            for seed in 1..4u64 {
                let p: Vec<f64> = samples(seed, dim).iter().map(|x| 0.4 * x).collect();
                let vs = vec_samples(seed * 11, dim, 2);
                assert_relative_eq!(
                    pulled.eval_plain(&p, &vs).unwrap(),
                    w.eval_plain(&p, &vs).unwrap(),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn gvl_forms_are_canonical() {
        let n = 2;
        for bundle in [Bundle::Sl, Bundle::A] {
            let w = gvl_form(bundle, n).unwrap();
            let map = Arc::new(TransitionMap::new(bundle, sample_diffeo()));
            let pulled = pullback(map, &w).unwrap();
            let lay = ChartLayout::new(bundle, n);
            for seed in 1..3u64 {
                let mut p: Vec<f64> = samples(seed, lay.dim()).iter().map(|x| 0.4 * x).collect();
                if bundle == Bundle::Sl {
                    p[lay.ydet()] += 1.0;
                }
                let vs = vec_samples(seed * 17, lay.dim(), w.degree);
                assert_relative_eq!(
                    pulled.eval_plain(&p, &vs).unwrap(),
                    w.eval_plain(&p, &vs).unwrap(),
                    epsilon = 1e-8
                );
            }
        }
    }

    #[test]
    fn gvl_a_top_coefficient() {
        let n = 2;
        let lay = ChartLayout::new(Bundle::A, n);
        let w = gvl_form(Bundle::A, n).unwrap();
        let p = vec![0.1, -0.2, 0.3, 0.4, 0.5];
        let basis = |i: usize| {
            let mut v = vec![0.0; lay.dim()];
            v[i] = 1.0;
            v
        };
        // (d x, d y_1, d y^1, d y_2, d y^2) frame
        let vs = vec![
            basis(lay.x()),
            basis(lay.yi(0)),
            basis(lay.y(0)),
            basis(lay.yi(1)),
            basis(lay.y(1)),
        ];
        assert_relative_eq!(w.eval_plain(&p, &vs).unwrap(), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn interior_and_lie_derivative() {
        let ch = base_chart(1);
        // X = y d/dy
        let x: ChartField = Arc::new(|p: &[TaylorValue]| Ok(vec![p[0].clone()]));
        let dy = KForm::coord_diff(ch, 0);
        let ixdy = interior(x.clone(), &dy).unwrap();
        let p = [1.7];
        assert_relative_eq!(ixdy.eval(&to_t(&p), &[]).unwrap().value(), 1.7);
        // L_X dy = dy
        let l = lie_derivative(x.clone(), &dy).unwrap();
        assert_relative_eq!(l.eval_plain(&p, &[vec![1.0]]).unwrap(), 1.0, epsilon = 1e-12);
        // L_X f = X f for the function f = y^2
        let f = KForm::function(ch, |p| Ok(&p[0] * &p[0]));
        let lf = lie_derivative(x, &f).unwrap();
        assert_relative_eq!(lf.eval_plain(&p, &[]).unwrap(), 2.0 * 1.7 * 1.7, epsilon = 1e-12);
    }

    struct ComposeMap {
        first: Arc<dyn ChartMap>,
        second: Arc<dyn ChartMap>,
    }

    impl ChartMap for ComposeMap {
        fn src(&self) -> ChartLayout {
            self.first.src()
        }
        fn dst(&self) -> ChartLayout {
            self.second.dst()
        }
        fn apply(&self, x: &[TaylorValue]) -> Result<Vec<TaylorValue>> {
            self.second.apply(&self.first.apply(x)?)
        }
    }

    #[test]
    fn pullback_functorial() {
        let n = 2;
        let f = Arc::new(TransitionMap::new(
            Bundle::Gl,
            sample_diffeo(),
        ));
        let g = Arc::new(TransitionMap::new(
            Bundle::Gl,
            DiffeoSpec::parse("y1 + 0.1*sin(y2), y2 + 0.2*y1^2", 2).unwrap(),
        ));
        let w = cl_form(Bundle::Gl, n).unwrap();
        let composed = Arc::new(ComposeMap {
            first: f.clone(),
            second: g.clone(),
        });
        let one_step = pullback(composed, &w).unwrap();
        let two_step = pullback(f, &pullback(g, &w).unwrap()).unwrap();
        let dim = ChartLayout::new(Bundle::Gl, n).dim();
        for seed in 1..4u64 {
            let p: Vec<f64> = samples(seed, dim).iter().map(|x| 0.3 * x).collect();
            let vs = vec_samples(seed * 23, dim, 2);
            assert_relative_eq!(
                one_step.eval_plain(&p, &vs).unwrap(),
                two_step.eval_plain(&p, &vs).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn pullback_of_function_is_composition() {
        let n = 2;
        let h = sample_diffeo();
        let map = Arc::new(TransitionMap::new(Bundle::Base, h.clone()));
        let f = KForm::function(base_chart(n), |p| Ok(&p[0] + &p[1]));
        let pf = pullback(map, &f).unwrap();
        let p = [0.3, -0.2];
        let img = h.eval_point(&p).unwrap();
        assert_relative_eq!(
            pf.eval(&to_t(&p), &[]).unwrap().value(),
            img[0] + img[1],
            epsilon = 1e-12
        );
    }
}
