//! Prolongation of base vector fields to the bundle charts, numerical
//! flows, and time-averaged pullbacks of forms.
//!
//! The flow integrator is generic over Taylor-valued states: seeding the
//! initial condition with first-order variables turns the same RK4 loop
//! into an integrator for the variational equations, so the differential
//! of a flow map is obtained for free when forms are pulled back through
//! it.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{eval, Env, VectorFieldSpec};
use crate::forms::{pullback, ChartField, ChartMap, KForm};
use crate::jets::{ChartLayout, Bundle, Jet2, TJet};
use crate::taylor::TaylorValue;

/// Threshold on any state coordinate beyond which a trajectory is
/// declared to blow up.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// A base vector field that can be evaluated on Taylor-valued chart
/// coordinates.
pub trait BaseField: Send + Sync {
    fn n(&self) -> usize;
    fn components(&self, y: &[TaylorValue]) -> Result<Vec<TaylorValue>>;
}

impl BaseField for VectorFieldSpec {
    fn n(&self) -> usize {
        self.n
    }
    fn components(&self, y: &[TaylorValue]) -> Result<Vec<TaylorValue>> {
        let env = Env::vars(y);
        self.components.iter().map(|c| eval(c, &env)).collect()
    }
}

/// Value, Jacobian, and Hessian of a base field at a Taylor-valued point,
/// via auxiliary jet variables (same mechanism as for diffeomorphism jets).
pub fn field_jet(field: &dyn BaseField, y: &[TaylorValue]) -> Result<TJet> {
    let n = field.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch("field_jet base point".into()));
    }
    let (m, k) = (y[0].num_vars(), y[0].order());
    let (me, ke) = (m + n, k + 2);
    let coords: Vec<TaylorValue> = (0..n)
        .map(|i| &y[i].lift(n, ke) + &TaylorValue::variable(me, ke, m + i))
        .collect();
    let vals = field.components(&coords)?;
    let zeros = vec![0u8; n];
    let mut alpha = Vec::with_capacity(n);
    let mut jac = Vec::with_capacity(n * n);
    let mut hess = Vec::with_capacity(n * n * n);
    for w in &vals {
        alpha.push(w.extract_aux(n, &zeros, k));
        for j in 0..n {
            let mut e = zeros.clone();
            e[j] = 1;
            jac.push(w.extract_aux(n, &e, k));
        }
        for j in 0..n {
            for l in 0..n {
                let mut e = zeros.clone();
                e[j] += 1;
                e[l] += 1;
                let c = w.extract_aux(n, &e, k);
                hess.push(if j == l { c.scale(2.0) } else { c });
            }
        }
    }
    Ok(TJet {
        n,
        alpha,
        jac,
        hess,
    })
}

/// A base vector field prolonged to one of the bundle charts.
#[derive(Clone)]
pub struct ProlongedField {
    pub bundle: Bundle,
    pub field: Arc<dyn BaseField>,
}

impl ProlongedField {
    pub fn new(bundle: Bundle, field: Arc<dyn BaseField>) -> ProlongedField {
        ProlongedField { bundle, field }
    }

    pub fn layout(&self) -> ChartLayout {
        ChartLayout::new(self.bundle, self.field.n())
    }

    /// Components of the prolonged field at a chart point.
    pub fn eval(&self, p: &[TaylorValue]) -> Result<Vec<TaylorValue>> {
        let n = self.field.n();
        let lay = self.layout();
        if p.len() != lay.dim() {
            return Err(Error::DimensionMismatch(format!(
                "prolonged field on {} chart expects {} coordinates, got {}",
                self.bundle.name(),
                lay.dim(),
                p.len()
            )));
        }
        let jet = field_jet(self.field.as_ref(), &p[..n])?;
        let (m, ord) = (p[0].num_vars(), p[0].order());
        let mut out = vec![TaylorValue::zero(m, ord); lay.dim()];
        out[..n].clone_from_slice(&jet.alpha);

        // second-order block: V^i_{jk} = H^i_{jk} - J^p_j y^i_{pk}
        //                               - J^p_k y^i_{jp} + J^i_p y^p_{jk}
        let yjk_law = |out: &mut Vec<TaylorValue>| {
            for i in 0..n {
                for j in 0..n {
                    for k in j..n {
                        let mut acc = jet.hess_at(i, j, k).clone();
                        for pp in 0..n {
                            acc = &acc - &(jet.jac_at(pp, j) * &p[lay.yjk(i, pp, k)]);
                            acc = &acc - &(jet.jac_at(pp, k) * &p[lay.yjk(i, j, pp)]);
                            acc = &acc + &(jet.jac_at(i, pp) * &p[lay.yjk(pp, j, k)]);
                        }
                        out[lay.yjk(i, j, k)] = acc;
                    }
                }
            }
        };

        // trace block: V_i = H^j_{ji} - J^j_i y_j
        let yi_law = |out: &mut Vec<TaylorValue>| {
            for i in 0..n {
                let mut acc = TaylorValue::zero(m, ord);
                for j in 0..n {
                    acc = &acc + jet.hess_at(j, j, i);
                    acc = &acc - &(jet.jac_at(j, i) * &p[lay.yi(j)]);
                }
                out[lay.yi(i)] = acc;
            }
        };

        let div = || {
            let mut d = TaylorValue::zero(m, ord);
            for i in 0..n {
                d = &d + jet.jac_at(i, i);
            }
            d
        };

        match self.bundle {
            Bundle::Base => {}
            Bundle::S2 => {
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = TaylorValue::zero(m, ord);
                        for pp in 0..n {
                            acc = &acc + &(jet.jac_at(i, pp) * &p[lay.yj(pp, j)]);
                        }
                        out[lay.yj(i, j)] = acc;
                    }
                }
                yjk_law(&mut out);
            }
            Bundle::Gl => yjk_law(&mut out),
            Bundle::O => {
                for i in 0..n {
                    for j in i..n {
                        let mut acc = TaylorValue::zero(m, ord);
                        for pp in 0..n {
                            acc = &acc
                                + &(jet.jac_at(i, pp) * &p[lay.yij(pp.min(j), pp.max(j))]);
                            acc = &acc
                                + &(jet.jac_at(j, pp) * &p[lay.yij(i.min(pp), i.max(pp))]);
                        }
                        out[lay.yij(i, j)] = acc;
                    }
                }
                yjk_law(&mut out);
            }
            Bundle::Sl => {
                out[lay.ydet()] = &div() * &p[lay.ydet()];
                yjk_law(&mut out);
            }
            Bundle::A => {
                out[lay.x()] = div();
                yi_law(&mut out);
            }
            Bundle::B => yi_law(&mut out),
        }
        Ok(out)
    }

    /// As a boxed chart field for the form operations.
    pub fn chart_field(&self) -> ChartField {
        let f = self.clone();
        Arc::new(move |p: &[TaylorValue]| f.eval(p))
    }
}

// ---------------------------------------------------------------------------
// flows
// ---------------------------------------------------------------------------

/// Fixed-step RK4 over Taylor-valued states.
pub fn rk4_flow<F>(rhs: &F, y0: &[TaylorValue], t: f64, steps: usize) -> Result<Vec<TaylorValue>>
where
    F: Fn(&[TaylorValue]) -> Result<Vec<TaylorValue>> + ?Sized,
{
    if steps == 0 {
        return Err(Error::InvalidInput("flow needs at least one step".into()));
    }
    let h = t / steps as f64;
    let mut y = y0.to_vec();
    let axpy = |y: &[TaylorValue], s: f64, k: &[TaylorValue]| -> Vec<TaylorValue> {
        y.iter().zip(k.iter()).map(|(a, b)| a + &b.scale(s)).collect()
    };
    for _ in 0..steps {
        let k1 = rhs(&y)?;
        let k2 = rhs(&axpy(&y, h / 2.0, &k1))?;
        let k3 = rhs(&axpy(&y, h / 2.0, &k2))?;
        let k4 = rhs(&axpy(&y, h, &k3))?;
        for i in 0..y.len() {
            let incr = &(&k1[i] + &k4[i]) + &(&k2[i] + &k3[i]).scale(2.0);
            y[i] = &y[i] + &incr.scale(h / 6.0);
        }
        for c in &y {
            if !c.value().is_finite() || c.value().abs() > BLOWUP_LIMIT {
                return Err(Error::BlowUp(format!(
                    "state coordinate reached {:e}",
                    c.value()
                )));
            }
        }
    }
    Ok(y)
}

/// A recorded numeric trajectory.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl FlowResult {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// CSV with a `t` column followed by the state coordinates.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 0..self.states[0].len() {
            s.push_str(&format!(",x{i}"));
        }
        s.push('\n');
        for (t, row) in self.times.iter().zip(self.states.iter()) {
            s.push_str(&format!("{t:.12e}"));
            for v in row {
                s.push_str(&format!(",{v:.12e}"));
            }
            s.push('\n');
        }
        s
    }
}

/// Numeric RK4 trajectory with all intermediate states recorded.
pub fn rk4_trajectory<F>(rhs: &F, y0: &[f64], t: f64, steps: usize) -> Result<FlowResult>
where
    F: Fn(&[TaylorValue]) -> Result<Vec<TaylorValue>> + ?Sized,
{
    let mut times = vec![0.0];
    let mut states = vec![y0.to_vec()];
    let mut y: Vec<TaylorValue> = y0.iter().map(|&v| TaylorValue::constant(0, 0, v)).collect();
    let h = t / steps as f64;
    for s in 0..steps {
        y = rk4_flow(rhs, &y, h, 1)?;
        times.push(h * (s + 1) as f64);
        states.push(y.iter().map(|c| c.value()).collect());
    }
    Ok(FlowResult { times, states })
}

/// The time-`t` flow map of a prolonged field, as a chart map (so forms can
/// be pulled back through it; the differential comes from the Taylor
/// context automatically).
pub struct FlowMap {
    pub field: ProlongedField,
    pub t: f64,
    pub steps: usize,
}

impl ChartMap for FlowMap {
    fn src(&self) -> ChartLayout {
        self.field.layout()
    }
    fn dst(&self) -> ChartLayout {
        self.field.layout()
    }
    fn apply(&self, x: &[TaylorValue]) -> Result<Vec<TaylorValue>> {
        let f = &self.field;
        rk4_flow(&|y: &[TaylorValue]| f.eval(y), x, self.t, self.steps)
    }
}

/// 2-jet of the time-`t` base flow map at `y0`, by integrating the
/// variational equations for the Jacobian and the second variation.
pub fn flow_jet(field: &dyn BaseField, y0: &[f64], t: f64, steps: usize) -> Result<Jet2> {
    let n = field.n();
    if y0.len() != n {
        return Err(Error::DimensionMismatch("flow_jet base point".into()));
    }
    // state = (y, Phi, Phi2): dy = V(y), dPhi = J Phi,
    // dPhi2^i_{jk} = H^i_{pq} Phi^p_j Phi^q_k + J^i_p Phi2^p_{jk}
    let dim = n + n * n + n * n * n;
    let mut state: Vec<TaylorValue> = Vec::with_capacity(dim);
    for &v in y0 {
        state.push(TaylorValue::constant(0, 0, v));
    }
    for i in 0..n * n {
        let v = if i / n == i % n { 1.0 } else { 0.0 };
        state.push(TaylorValue::constant(0, 0, v));
    }
    for _ in 0..n * n * n {
        state.push(TaylorValue::constant(0, 0, 0.0));
    }
    let rhs = |s: &[TaylorValue]| -> Result<Vec<TaylorValue>> {
        let jet = field_jet(field, &s[..n])?;
        let (m, ord) = (s[0].num_vars(), s[0].order());
        let mut d = Vec::with_capacity(dim);
        d.extend(jet.alpha.iter().cloned());
        let phi = &s[n..n + n * n];
        let phi2 = &s[n + n * n..];
        for i in 0..n {
            for j in 0..n {
                let mut acc = TaylorValue::zero(m, ord);
                for p in 0..n {
                    acc = &acc + &(jet.jac_at(i, p) * &phi[p * n + j]);
                }
                d.push(acc);
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = TaylorValue::zero(m, ord);
                    for p in 0..n {
                        for q in 0..n {
                            acc = &acc
                                + &(&(jet.hess_at(i, p, q) * &phi[p * n + j])
                                    * &phi[q * n + k]);
                        }
                        acc = &acc + &(jet.jac_at(i, p) * &phi2[p * n * n + j * n + k]);
                    }
                    d.push(acc);
                }
            }
        }
        Ok(d)
    };
    let out = rk4_flow(&rhs, &state, t, steps)?;
    let vals: Vec<f64> = out.iter().map(|c| c.value()).collect();
    Ok(Jet2 {
        n,
        base: y0.to_vec(),
        z: vals[..n].to_vec(),
        zj: vals[n..n + n * n].to_vec(),
        zjk: vals[n + n * n..].to_vec(),
    })
}

/// Maximum discrepancy between flowing a chart point with the prolonged
/// field and pushing it through the jet of the base flow map. Small values
/// certify that the prolongation formulas and the transition laws agree.
pub fn prolonged_flow_consistency(
    bundle: Bundle,
    field: &Arc<dyn BaseField>,
    p: &crate::jets::Point,
    t: f64,
    steps: usize,
) -> Result<f64> {
    let prolonged = ProlongedField::new(bundle, field.clone());
    let coords = p.to_coords();
    let state: Vec<TaylorValue> = coords
        .iter()
        .map(|&v| TaylorValue::constant(0, 0, v))
        .collect();
    let flowed = rk4_flow(&|y: &[TaylorValue]| prolonged.eval(y), &state, t, steps)?;
    let n = field.n();
    let jet = flow_jet(field.as_ref(), &coords[..n], t, steps)?;
    let via_jet = crate::jets::transition_jet(&jet, p)?;
    let mut max = 0.0f64;
    for (a, b) in flowed.iter().zip(via_jet.to_coords().iter()) {
        max = max.max((a.value() - b).abs());
    }
    Ok(max)
}

// ---------------------------------------------------------------------------
// quadrature and time averages
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(q: usize) -> Vec<(f64, f64)> {
    assert!(q >= 1);
    let mut out = Vec::with_capacity(q);
    for i in 0..q {
        // initial guess (Chebyshev-like)
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..100 {
            // evaluate P_q and P_q' by recurrence
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=q {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// The form `int_0^1 phi_t^* w dt` for the flow `phi_t` of a prolonged
/// field, by Gauss-Legendre quadrature in `t`.
pub fn time_average_pullback(
    field: &ProlongedField,
    w: &KForm,
    nodes: usize,
    steps: usize,
) -> Result<KForm> {
    if w.chart != field.layout() {
        return Err(Error::DimensionMismatch(
            "time average: form and field live on different charts".into(),
        ));
    }
    let mut terms: Vec<(f64, KForm)> = Vec::with_capacity(nodes);
    for (x, wt) in gauss_legendre(nodes) {
        let t = 0.5 * (x + 1.0);
        let map = Arc::new(FlowMap {
            field: field.clone(),
            t,
            steps,
        });
        terms.push((0.5 * wt, pullback(map, w)?));
    }
    let chart = w.chart;
    let degree = w.degree;
    Ok(KForm::new(chart, degree, move |p, vs| {
        let (m, ord) = (p[0].num_vars(), p[0].order());
        let mut total = TaylorValue::zero(m, ord);
        for (wt, form) in &terms {
            total = &total + &form.eval(p, vs)?.scale(*wt);
        }
        Ok(total)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::DiffeoSpec;
    use crate::forms::{cl_form, gamma1_form, lie_derivative, KForm};
    use crate::jets::{jet_of, project, Point, S2Point};
    use approx::assert_relative_eq;

    fn vf(n: usize, src: &str) -> Arc<dyn BaseField> {
        Arc::new(VectorFieldSpec::parse(src, n).unwrap())
    }

    #[test]
    fn prolong_linear_field_on_b() {
        // V = y d/dy on the line; on the B chart the extra component is -y_1
        let f = vf(1, "y1");
        let prolonged = ProlongedField::new(Bundle::B, f);
        let p: Vec<TaylorValue> = [1.0, 2.0]
            .iter()
            .map(|&v| TaylorValue::constant(0, 0, v))
            .collect();
        let out = prolonged.eval(&p).unwrap();
        assert_relative_eq!(out[0].value(), 1.0);
        assert_relative_eq!(out[1].value(), -2.0);
    }

    #[test]
    fn flow_linear_field_on_b() {
        let f = vf(1, "y1");
        let prolonged = ProlongedField::new(Bundle::B, f);
        let y0: Vec<TaylorValue> = [1.0, 1.0]
            .iter()
            .map(|&v| TaylorValue::constant(0, 0, v))
            .collect();
        let out = rk4_flow(&|y: &[TaylorValue]| prolonged.eval(y), &y0, 1.0, 200).unwrap();
        assert_relative_eq!(out[0].value(), std::f64::consts::E, epsilon = 1e-9);
        assert_relative_eq!(out[1].value(), 1.0 / std::f64::consts::E, epsilon = 1e-9);
    }

    #[test]
    fn flow_constant_field_is_translation() {
        let f = vf(2, "1, 2");
        let prolonged = ProlongedField::new(Bundle::Base, f);
        let y0: Vec<TaylorValue> = [0.3, -0.1]
            .iter()
            .map(|&v| TaylorValue::constant(0, 0, v))
            .collect();
        let out = rk4_flow(&|y: &[TaylorValue]| prolonged.eval(y), &y0, 1.0, 1).unwrap();
        assert_relative_eq!(out[0].value(), 1.3, epsilon = 1e-14);
        assert_relative_eq!(out[1].value(), 1.9, epsilon = 1e-14);
    }

    #[test]
    fn rk4_is_fourth_order() {
        // dy/dt = y^2, y(0) = 1, exact y(t) = 1/(1-t)
        let f = vf(1, "y1^2");
        let prolonged = ProlongedField::new(Bundle::Base, f);
        let run = |steps: usize| {
            let y0 = vec![TaylorValue::constant(0, 0, 1.0)];
            rk4_flow(&|y: &[TaylorValue]| prolonged.eval(y), &y0, 0.5, steps).unwrap()[0].value()
        };
        let exact = 2.0;
        let e1 = (run(10) - exact).abs();
        let e2 = (run(20) - exact).abs();
        let ratio = e1 / e2;
        assert!(
            (10.0..30.0).contains(&ratio),
            "convergence ratio {ratio} not close to 16"
        );
    }

    #[test]
    fn flow_blowup_detected() {
        let f = vf(1, "y1^2");
        let prolonged = ProlongedField::new(Bundle::Base, f);
        let y0 = vec![TaylorValue::constant(0, 0, 1.0)];
        let err = rk4_flow(&|y: &[TaylorValue]| prolonged.eval(y), &y0, 2.0, 4000);
        assert!(matches!(err, Err(Error::BlowUp(_))));
    }

    #[test]
    fn flow_jet_of_linear_field() {
        let f = vf(1, "y1");
        let jet = flow_jet(f.as_ref(), &[0.7], 1.0, 200).unwrap();
        assert_relative_eq!(jet.z[0], 0.7 * std::f64::consts::E, epsilon = 1e-9);
        assert_relative_eq!(jet.zj[0], std::f64::consts::E, epsilon = 1e-9);
        assert_relative_eq!(jet.zjk[0], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn flow_jet_matches_explicit_map() {
        // dy/dt = y^2 has the explicit time-t flow y -> y/(1 - t y)
        let f = vf(1, "y1^2");
        let jet = flow_jet(f.as_ref(), &[0.5], 0.4, 400).unwrap();
        let explicit = DiffeoSpec::parse("y1 / (1 - 0.4*y1)", 1).unwrap();
        let want = jet_of(&explicit, &[0.5]).unwrap();
        assert_relative_eq!(jet.z[0], want.z[0], epsilon = 1e-10);
        assert_relative_eq!(jet.zj[0], want.zj[0], epsilon = 1e-9);
        assert_relative_eq!(jet.zjk[0], want.zjk[0], epsilon = 1e-8);
    }

    fn sample_s2() -> S2Point {
        let mut s2 = S2Point::identity_frame(2, &[0.3, -0.2]);
        s2.yj = vec![1.2, 0.3, -0.1, 0.9];
        for (i, v) in s2.yjk.iter_mut().enumerate() {
            *v = 0.1 * (i as f64) - 0.3;
        }
        for i in 0..2 {
            let (a, b) = (i * 4 + 1, i * 4 + 2);
            let m = 0.5 * (s2.yjk[a] + s2.yjk[b]);
            s2.yjk[a] = m;
            s2.yjk[b] = m;
        }
        s2
    }

    #[test]
    fn prolonged_flows_match_flow_jets() {
        let f = vf(2, "y1 + 0.3*y2^2, y2 - 0.2*y1*y2");
        let s2 = sample_s2();
        let pts = vec![
            Point::S2(s2.clone()),
            project(Bundle::Gl, &s2).unwrap(),
            project(Bundle::O, &s2).unwrap(),
            project(Bundle::Sl, &s2).unwrap(),
            project(Bundle::A, &s2).unwrap(),
            project(Bundle::B, &s2).unwrap(),
        ];
        for p in pts {
            let r = prolonged_flow_consistency(p.bundle(), &f, &p, 0.3, 150).unwrap();
            assert!(r < 1e-8, "bundle {:?}: residual {r}", p.bundle());
        }
    }

    #[test]
    fn first_integral_on_b_is_conserved() {
        // div V - V^i y_i is constant along the prolonged flow on B
        let f = vf(2, "y1 + 0.3*y2^2, y2 - 0.2*y1*y2");
        let prolonged = ProlongedField::new(Bundle::B, f.clone());
        let integral = |state: &[f64]| {
            let y: Vec<TaylorValue> = state[..2]
                .iter()
                .map(|&v| TaylorValue::constant(0, 0, v))
                .collect();
            let jet = field_jet(f.as_ref(), &y).unwrap();
            let div = jet.jac_at(0, 0).value() + jet.jac_at(1, 1).value();
            div - jet.alpha[0].value() * state[2] - jet.alpha[1].value() * state[3]
        };
        let y0 = [0.3, -0.2, 0.7, 0.4];
        let traj = rk4_trajectory(&|y: &[TaylorValue]| prolonged.eval(y), &y0, 1.0, 100).unwrap();
        let c0 = integral(&traj.states[0]);
        for s in &traj.states {
            assert_relative_eq!(integral(s), c0, epsilon = 1e-7);
        }
    }

    #[test]
    fn canonical_forms_are_flow_invariant() {
        // L_V Gamma_1 = 0 and L_V (dy_i ^ dy^i) = 0 for any prolonged field
        let f = vf(2, "y1 + 0.3*y2^2, y2 - 0.2*y1*y2");
        let s2field = ProlongedField::new(Bundle::S2, f.clone());
        let g = gamma1_form(2);
        let lg = lie_derivative(s2field.chart_field(), &g).unwrap();
        let p = Point::S2(sample_s2()).to_coords();
        let v: Vec<f64> = (0..p.len()).map(|i| 0.1 * (i as f64) - 0.6).collect();
        assert_relative_eq!(lg.eval_plain(&p, &[v]).unwrap(), 0.0, epsilon = 1e-9);

        let bfield = ProlongedField::new(Bundle::B, f);
        let w = cl_form(Bundle::B, 2).unwrap();
        let lw = lie_derivative(bfield.chart_field(), &w).unwrap();
        let pb = [0.3, -0.2, 0.7, 0.4];
        let vs = vec![vec![0.2, -0.5, 0.8, 0.1], vec![-0.3, 0.4, 0.2, 0.9]];
        assert_relative_eq!(lw.eval_plain(&pb, &vs).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn gauss_legendre_rule() {
        let nodes = gauss_legendre(4);
        let wsum: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert_relative_eq!(wsum, 2.0, epsilon = 1e-13);
        // exact for polynomials of degree <= 7
        let integral: f64 = nodes.iter().map(|(x, w)| w * x.powi(6)).sum();
        assert_relative_eq!(integral, 2.0 / 7.0, epsilon = 1e-13);
    }

    #[test]
    fn time_average_of_linear_flow() {
        // phi_t^* dy = e^t dy for V = y d/dy, so the [0,1] average is (e-1) dy
        let f = vf(1, "y1");
        let prolonged = ProlongedField::new(Bundle::Base, f);
        let dy = KForm::coord_diff(prolonged.layout(), 0);
        let avg = time_average_pullback(&prolonged, &dy, 8, 50).unwrap();
        let got = avg.eval_plain(&[0.3], &[vec![1.0]]).unwrap();
        assert_relative_eq!(got, std::f64::consts::E - 1.0, epsilon = 1e-8);
    }
}
