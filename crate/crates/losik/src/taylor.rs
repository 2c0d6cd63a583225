//! Truncated multivariate Taylor arithmetic.
//!
//! A [`TaylorValue`] is a polynomial in `m` variables truncated at total
//! degree `K`, stored densely and indexed by graded-lex rank. Coefficients
//! follow the Taylor convention: the coefficient of the monomial `x^a` is
//! `d^a f / a!` at the expansion point. Expansion points are normalized to
//! zero; callers shift their inputs.
//!
//! The pair `(m, K)` is called the *context*. Arithmetic requires both
//! operands to share a context. A context of `(0, 0)` is a plain `f64` and
//! is how the rest of the crate does ordinary numeric evaluation through
//! the same code paths.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;

use crate::error::{Error, Result};

/// Enumeration of all multi-indices of `num_vars` variables with total
/// degree at most `order`, in graded lexicographic order.
#[derive(Debug)]
pub struct IndexTable {
    pub num_vars: usize,
    pub order: usize,
    pub exps: Vec<Vec<u8>>,
    rank: HashMap<Vec<u8>, usize>,
}

impl IndexTable {
    fn build(num_vars: usize, order: usize) -> IndexTable {
        let mut exps = Vec::new();
        let mut current = vec![0u8; num_vars];
        for deg in 0..=order {
            enumerate_degree(num_vars, deg as u8, 0, &mut current, &mut exps);
        }
        let rank = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        IndexTable {
            num_vars,
            order,
            exps,
            rank,
        }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn rank_of(&self, exp: &[u8]) -> Option<usize> {
        self.rank.get(exp).copied()
    }
}

/// Lexicographic enumeration of multi-indices of exactly degree `deg`.
fn enumerate_degree(
    num_vars: usize,
    deg: u8,
    var: usize,
    current: &mut Vec<u8>,
    out: &mut Vec<Vec<u8>>,
) {
    if num_vars == 0 {
        if deg == 0 {
            out.push(current.clone());
        }
        return;
    }
    if var == num_vars - 1 {
        current[var] = deg;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    for e in (0..=deg).rev() {
        current[var] = e;
        enumerate_degree(num_vars, deg - e, var + 1, current, out);
        current[var] = 0;
    }
}

static TABLES: Lazy<Mutex<HashMap<(usize, usize), Arc<IndexTable>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

pub fn index_table(num_vars: usize, order: usize) -> Arc<IndexTable> {
    let mut cache = TABLES.lock().unwrap();
    cache
        .entry((num_vars, order))
        .or_insert_with(|| Arc::new(IndexTable::build(num_vars, order)))
        .clone()
}

/// Truncated multivariate power series; the AD substrate for all
/// derivatives in the crate.
#[derive(Debug, Clone)]
pub struct TaylorValue {
    table: Arc<IndexTable>,
    coeffs: Vec<f64>,
}

impl PartialEq for TaylorValue {
    fn eq(&self, other: &Self) -> bool {
        self.num_vars() == other.num_vars()
            && self.order() == other.order()
            && self.coeffs == other.coeffs
    }
}

impl TaylorValue {
    pub fn zero(num_vars: usize, order: usize) -> TaylorValue {
        let table = index_table(num_vars, order);
        let n = table.len();
        TaylorValue {
            table,
            coeffs: vec![0.0; n],
        }
    }

    pub fn constant(num_vars: usize, order: usize, c: f64) -> TaylorValue {
        let mut v = TaylorValue::zero(num_vars, order);
        v.coeffs[0] = c;
        v
    }

    /// The seed `x_i`; requires `order >= 1`.
    pub fn variable(num_vars: usize, order: usize, i: usize) -> TaylorValue {
        assert!(i < num_vars, "variable index out of range");
        assert!(order >= 1, "variable seed needs order >= 1");
        let mut v = TaylorValue::zero(num_vars, order);
        let mut exp = vec![0u8; num_vars];
        exp[i] = 1;
        let r = v.table.rank_of(&exp).unwrap();
        v.coeffs[r] = 1.0;
        v
    }

    /// `c + sum_i lin[i] * x_i`.
    pub fn affine(num_vars: usize, order: usize, c: f64, lin: &[f64]) -> TaylorValue {
        assert_eq!(lin.len(), num_vars);
        let mut v = TaylorValue::constant(num_vars, order, c);
        if order >= 1 {
            for (i, &l) in lin.iter().enumerate() {
                let mut exp = vec![0u8; num_vars];
                exp[i] = 1;
                let r = v.table.rank_of(&exp).unwrap();
                v.coeffs[r] = l;
            }
        } else {
            assert!(lin.iter().all(|&l| l == 0.0), "order-0 affine with slope");
        }
        v
    }

    pub fn num_vars(&self) -> usize {
        self.table.num_vars
    }

    pub fn order(&self) -> usize {
        self.table.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Constant term, i.e. the plain value at the expansion point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeff(&self, exp: &[u8]) -> f64 {
        match self.table.rank_of(exp) {
            Some(r) => self.coeffs[r],
            None => 0.0,
        }
    }

    /// First partial derivative with respect to variable `i`.
    pub fn grad(&self, i: usize) -> f64 {
        let mut exp = vec![0u8; self.num_vars()];
        exp[i] = 1;
        self.coeff(&exp)
    }

    /// Second partial derivative `d^2 f / dx_i dx_j` (multiplicity handled).
    pub fn second(&self, i: usize, j: usize) -> f64 {
        let mut exp = vec![0u8; self.num_vars()];
        exp[i] += 1;
        exp[j] += 1;
        let c = self.coeff(&exp);
        if i == j {
            2.0 * c
        } else {
            c
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    fn same_context(&self, other: &TaylorValue) -> bool {
        self.num_vars() == other.num_vars() && self.order() == other.order()
    }

    pub fn scale(&self, s: f64) -> TaylorValue {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= s;
        }
        out
    }

    pub fn try_div(&self, b: &TaylorValue) -> Result<TaylorValue> {
        if !self.same_context(b) {
            return Err(Error::DimensionMismatch(format!(
                "div: ({},{}) vs ({},{})",
                self.num_vars(),
                self.order(),
                b.num_vars(),
                b.order()
            )));
        }
        let b0 = b.value();
        if b0 == 0.0 {
            return Err(Error::DivisionBySingular);
        }
        // 1/b = sum_j (-1)^j d^j / b0^(j+1) with d = b - b0 nilpotent.
        let k = self.order();
        let mut series = Vec::with_capacity(k + 1);
        let mut p = 1.0 / b0;
        for j in 0..=k {
            series.push(if j % 2 == 0 { p } else { -p });
            p /= b0;
        }
        let inv = b.compose_series(&series);
        Ok(self * &inv)
    }

    /// Horner evaluation of a univariate series in `(self - self.value())`.
    /// `series[j]` is the coefficient of the j-th power; callers supply the
    /// Taylor coefficients of the elementary function at the constant term.
    fn compose_series(&self, series: &[f64]) -> TaylorValue {
        let k = self.order();
        let mut d = self.clone();
        d.coeffs[0] = 0.0;
        let mut acc = TaylorValue::constant(self.num_vars(), k, series[k]);
        for j in (0..k).rev() {
            acc = &(&acc * &d) + &TaylorValue::constant(self.num_vars(), k, series[j]);
        }
        acc
    }

    pub fn exp(&self) -> TaylorValue {
        let a0 = self.value();
        let e = a0.exp();
        let mut fact = 1.0;
        let series: Vec<f64> = (0..=self.order())
            .map(|j| {
                if j > 0 {
                    fact *= j as f64;
                }
                e / fact
            })
            .collect();
        self.compose_series(&series)
    }

    pub fn ln(&self) -> Result<TaylorValue> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(Error::DomainError(format!(
                "ln of non-positive constant term {a0}"
            )));
        }
        let mut series = vec![a0.ln()];
        let mut p = 1.0 / a0;
        for j in 1..=self.order() {
            series.push(if j % 2 == 1 { p } else { -p } / j as f64);
            p /= a0;
        }
        Ok(self.compose_series(&series))
    }

    pub fn sin(&self) -> TaylorValue {
        let a0 = self.value();
        let mut fact = 1.0;
        let series: Vec<f64> = (0..=self.order())
            .map(|j| {
                if j > 0 {
                    fact *= j as f64;
                }
                (a0 + j as f64 * std::f64::consts::FRAC_PI_2).sin() / fact
            })
            .collect();
        self.compose_series(&series)
    }

    pub fn cos(&self) -> TaylorValue {
        let a0 = self.value();
        let mut fact = 1.0;
        let series: Vec<f64> = (0..=self.order())
            .map(|j| {
                if j > 0 {
                    fact *= j as f64;
                }
                (a0 + j as f64 * std::f64::consts::FRAC_PI_2).cos() / fact
            })
            .collect();
        self.compose_series(&series)
    }

    /// Real power with positive base; `sqrt` is `powf(0.5)`. A value that
    /// is exactly constant is allowed down to zero (the constant case never
    /// differentiates through the branch point).
    pub fn powf(&self, p: f64) -> Result<TaylorValue> {
        let a0 = self.value();
        if self.is_constant() {
            if a0 < 0.0 || (a0 == 0.0 && p < 0.0) {
                return Err(Error::DomainError(format!(
                    "pow of negative constant {a0}"
                )));
            }
            return Ok(TaylorValue::constant(
                self.num_vars(),
                self.order(),
                a0.powf(p),
            ));
        }
        if a0 <= 0.0 {
            return Err(Error::DomainError(format!(
                "pow_real at non-positive constant term {a0}"
            )));
        }
        // binomial series: c_j = binom(p, j) * a0^(p - j)
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        for j in 0..=self.order() {
            if j > 0 {
                binom *= (p - (j - 1) as f64) / j as f64;
            }
            series.push(binom * a0.powf(p - j as f64));
        }
        Ok(self.compose_series(&series))
    }

    pub fn sqrt(&self) -> Result<TaylorValue> {
        self.powf(0.5)
    }

    pub fn powi(&self, k: i32) -> Result<TaylorValue> {
        if k < 0 {
            let pos = self.powi(-k)?;
            return TaylorValue::constant(self.num_vars(), self.order(), 1.0).try_div(&pos);
        }
        let mut acc = TaylorValue::constant(self.num_vars(), self.order(), 1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        Ok(acc)
    }

    /// Re-embed into a context with `extra` appended variables and order
    /// `new_order`; monomials beyond the new order are dropped.
    pub fn lift(&self, extra: usize, new_order: usize) -> TaylorValue {
        let mut out = TaylorValue::zero(self.num_vars() + extra, new_order);
        for (r, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let exp = &self.table.exps[r];
            let deg: u8 = exp.iter().sum();
            if deg as usize > new_order {
                continue;
            }
            let mut e = exp.clone();
            e.extend(std::iter::repeat(0).take(extra));
            let nr = out.table.rank_of(&e).unwrap();
            out.coeffs[nr] = c;
        }
        out
    }

    /// Collect the coefficients whose trailing `aux_count` exponents equal
    /// `aux_exps`, as a value in the remaining variables at `out_order`.
    pub fn extract_aux(&self, aux_count: usize, aux_exps: &[u8], out_order: usize) -> TaylorValue {
        assert_eq!(aux_exps.len(), aux_count);
        let m = self.num_vars() - aux_count;
        let mut out = TaylorValue::zero(m, out_order);
        for (r, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let exp = &self.table.exps[r];
            if &exp[m..] != aux_exps {
                continue;
            }
            let prefix = &exp[..m];
            let deg: u8 = prefix.iter().sum();
            if deg as usize > out_order {
                continue;
            }
            let nr = out.table.rank_of(prefix).unwrap();
            out.coeffs[nr] = c;
        }
        out
    }

    /// Drop to a lower truncation order.
    pub fn truncated(&self, new_order: usize) -> TaylorValue {
        self.lift(0, new_order)
    }

    /// Evaluate as a polynomial at a numeric point.
    pub fn eval_at(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.num_vars());
        let mut total = 0.0;
        for (r, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mut term = c;
            for (i, &e) in self.table.exps[r].iter().enumerate() {
                for _ in 0..e {
                    term *= x[i];
                }
            }
            total += term;
        }
        total
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, &c| a.max(c.abs()))
    }
}

macro_rules! ctx_check {
    ($a:expr, $b:expr, $what:expr) => {
        assert!(
            $a.same_context($b),
            "taylor context mismatch in {}: ({},{}) vs ({},{})",
            $what,
            $a.num_vars(),
            $a.order(),
            $b.num_vars(),
            $b.order()
        );
    };
}

impl Add for &TaylorValue {
    type Output = TaylorValue;
    fn add(self, rhs: &TaylorValue) -> TaylorValue {
        ctx_check!(self, rhs, "add");
        let mut out = self.clone();
        for (c, &r) in out.coeffs.iter_mut().zip(&rhs.coeffs) {
            *c += r;
        }
        out
    }
}

impl Sub for &TaylorValue {
    type Output = TaylorValue;
    fn sub(self, rhs: &TaylorValue) -> TaylorValue {
        ctx_check!(self, rhs, "sub");
        let mut out = self.clone();
        for (c, &r) in out.coeffs.iter_mut().zip(&rhs.coeffs) {
            *c -= r;
        }
        out
    }
}

impl Neg for &TaylorValue {
    type Output = TaylorValue;
    fn neg(self) -> TaylorValue {
        self.scale(-1.0)
    }
}

impl Mul for &TaylorValue {
    type Output = TaylorValue;
    fn mul(self, rhs: &TaylorValue) -> TaylorValue {
        ctx_check!(self, rhs, "mul");
        let mut out = TaylorValue::zero(self.num_vars(), self.order());
        let k = self.order() as u8;
        let table = &self.table;
        for (ra, &ca) in self.coeffs.iter().enumerate() {
            if ca == 0.0 {
                continue;
            }
            let ea = &table.exps[ra];
            let da: u8 = ea.iter().sum();
            for (rb, &cb) in rhs.coeffs.iter().enumerate() {
                if cb == 0.0 {
                    continue;
                }
                let eb = &table.exps[rb];
                let db: u8 = eb.iter().sum();
                if da + db > k {
                    continue;
                }
                let e: Vec<u8> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                let r = table.rank_of(&e).unwrap();
                out.coeffs[r] += ca * cb;
            }
        }
        out
    }
}

/// Array of values sharing a context; a truncated Taylor expansion of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorMap {
    pub components: Vec<TaylorValue>,
}

impl TaylorMap {
    pub fn new(components: Vec<TaylorValue>) -> Result<TaylorMap> {
        if components.is_empty() {
            return Err(Error::DimensionMismatch("empty map".into()));
        }
        let (m, k) = (components[0].num_vars(), components[0].order());
        if !components
            .iter()
            .all(|c| c.num_vars() == m && c.order() == k)
        {
            return Err(Error::DimensionMismatch(
                "map components in different contexts".into(),
            ));
        }
        Ok(TaylorMap { components })
    }

    pub fn num_vars(&self) -> usize {
        self.components[0].num_vars()
    }

    pub fn order(&self) -> usize {
        self.components[0].order()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn t_arith(op: ArithOp, a: &TaylorValue, b: &TaylorValue) -> Result<TaylorValue> {
    if !a.same_context(b) {
        return Err(Error::DimensionMismatch(format!(
            "t_arith: ({},{}) vs ({},{})",
            a.num_vars(),
            a.order(),
            b.num_vars(),
            b.order()
        )));
    }
    match op {
        ArithOp::Add => Ok(a + b),
        ArithOp::Sub => Ok(a - b),
        ArithOp::Mul => Ok(a * b),
        ArithOp::Div => a.try_div(b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElemFn {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    PowInt(i32),
    PowReal(f64),
}

pub fn t_elem(f: ElemFn, a: &TaylorValue) -> Result<TaylorValue> {
    match f {
        ElemFn::Exp => Ok(a.exp()),
        ElemFn::Ln => a.ln(),
        ElemFn::Sin => Ok(a.sin()),
        ElemFn::Cos => Ok(a.cos()),
        ElemFn::Sqrt => a.sqrt(),
        ElemFn::PowInt(k) => a.powi(k),
        ElemFn::PowReal(p) => a.powf(p),
    }
}

/// Substitute `inner`'s components for `outer`'s variables; plain truncated
/// polynomial composition, exact for composite degree within the order.
pub fn t_compose(outer: &TaylorMap, inner: &TaylorMap) -> Result<TaylorMap> {
    let m_out = outer.num_vars();
    if inner.components.len() != m_out {
        return Err(Error::DimensionMismatch(format!(
            "compose: outer takes {m_out} vars, inner provides {}",
            inner.components.len()
        )));
    }
    let k = outer.order();
    if inner.order() != k {
        return Err(Error::DimensionMismatch(
            "compose: differing truncation orders".into(),
        ));
    }
    let m_in = inner.num_vars();
    // cache powers of each inner component up to the order
    let mut pows: Vec<Vec<TaylorValue>> = Vec::with_capacity(m_out);
    for comp in &inner.components {
        let mut p = vec![TaylorValue::constant(m_in, k, 1.0)];
        for e in 1..=k {
            let next = &p[e - 1] * comp;
            p.push(next);
        }
        pows.push(p);
    }
    let mut components = Vec::with_capacity(outer.components.len());
    for oc in &outer.components {
        let mut acc = TaylorValue::zero(m_in, k);
        for (r, &c) in oc.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let exp = &oc.table.exps[r];
            let mut term = TaylorValue::constant(m_in, k, c);
            for (v, &e) in exp.iter().enumerate() {
                if e > 0 {
                    term = &term * &pows[v][e as usize];
                }
            }
            acc = &acc + &term;
        }
        components.push(acc);
    }
    TaylorMap::new(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn poly1(order: usize, coeffs: &[f64]) -> TaylorValue {
        // univariate helper: coeffs[j] is the coefficient of x^j
        let mut v = TaylorValue::zero(1, order);
        for (j, &c) in coeffs.iter().enumerate() {
            let r = v.table.rank_of(&[j as u8]).unwrap();
            v.coeffs[r] = c;
        }
        v
    }

    #[test]
    fn mul_exact_polynomial_product() {
        // (1+x)(1-x) at K=2 -> 1 - x^2
        let a = poly1(2, &[1.0, 1.0]);
        let b = poly1(2, &[1.0, -1.0]);
        let p = t_arith(ArithOp::Mul, &a, &b).unwrap();
        assert_eq!(p, poly1(2, &[1.0, 0.0, -1.0]));
    }

    #[test]
    fn mul_truncates() {
        // (1+x)^2 at K=1 -> 1 + 2x
        let a = poly1(1, &[1.0, 1.0]);
        let p = t_arith(ArithOp::Mul, &a, &a).unwrap();
        assert_eq!(p, poly1(1, &[1.0, 2.0]));
    }

    #[test]
    fn div_geometric_series() {
        // 1/(1+x) at K=3 -> 1 - x + x^2 - x^3 (geometric-series oracle)
        let one = TaylorValue::constant(1, 3, 1.0);
        let b = poly1(3, &[1.0, 1.0]);
        let q = t_arith(ArithOp::Div, &one, &b).unwrap();
        for (j, want) in [1.0, -1.0, 1.0, -1.0].iter().enumerate() {
            assert_relative_eq!(q.coeff(&[j as u8]), *want, epsilon = 1e-14);
        }
    }

    #[test]
    fn div_by_zero_constant_term() {
        let one = TaylorValue::constant(1, 2, 1.0);
        let x = TaylorValue::variable(1, 2, 0);
        assert_eq!(
            t_arith(ArithOp::Div, &one, &x),
            Err(Error::DivisionBySingular)
        );
    }

    #[test]
    fn dimension_mismatch() {
        let a = TaylorValue::constant(1, 2, 1.0);
        let b = TaylorValue::constant(2, 2, 1.0);
        assert!(matches!(
            t_arith(ArithOp::Add, &a, &b),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn exp_series() {
        let x = TaylorValue::variable(1, 2, 0);
        let e = t_elem(ElemFn::Exp, &x).unwrap();
        assert_eq!(e, poly1(2, &[1.0, 1.0, 0.5]));
    }

    #[test]
    fn ln_series() {
        let a = poly1(3, &[1.0, 1.0]); // 1 + x
        let l = t_elem(ElemFn::Ln, &a).unwrap();
        for (j, want) in [0.0, 1.0, -0.5, 1.0 / 3.0].iter().enumerate() {
            assert_relative_eq!(l.coeff(&[j as u8]), *want, epsilon = 1e-14);
        }
    }

    #[test]
    fn ln_domain_error() {
        let a = TaylorValue::constant(1, 2, -1.0);
        assert!(matches!(t_elem(ElemFn::Ln, &a), Err(Error::DomainError(_))));
    }

    #[test]
    fn sqrt_constant_case() {
        let a = TaylorValue::constant(2, 3, 4.0);
        let s = t_elem(ElemFn::Sqrt, &a).unwrap();
        assert_eq!(s, TaylorValue::constant(2, 3, 2.0));
    }

    #[test]
    fn compose_polynomial() {
        // outer = u^2, inner = 1 + x, K=2 -> 1 + 2x + x^2
        let outer = TaylorMap::new(vec![poly1(2, &[0.0, 0.0, 1.0])]).unwrap();
        let inner = TaylorMap::new(vec![poly1(2, &[1.0, 1.0])]).unwrap();
        let r = t_compose(&outer, &inner).unwrap();
        assert_eq!(r.components[0], poly1(2, &[1.0, 2.0, 1.0]));
    }

    #[test]
    fn compose_exp_oracle() {
        // outer = exp(u) as a series, inner = x + x^2, K=3
        // symbolic expansion oracle: 1 + x + 3/2 x^2 + 7/6 x^3
        let u = TaylorValue::variable(1, 3, 0);
        let outer = TaylorMap::new(vec![u.exp()]).unwrap();
        let inner = TaylorMap::new(vec![poly1(3, &[0.0, 1.0, 1.0])]).unwrap();
        let r = t_compose(&outer, &inner).unwrap();
        for (j, want) in [1.0, 1.0, 1.5, 7.0 / 6.0].iter().enumerate() {
            assert_relative_eq!(r.components[0].coeff(&[j as u8]), *want, epsilon = 1e-14);
        }
    }

    #[test]
    fn compose_identity_outer() {
        let outer = TaylorMap::new(vec![
            TaylorValue::variable(2, 3, 0),
            TaylorValue::variable(2, 3, 1),
        ])
        .unwrap();
        let inner = TaylorMap::new(vec![poly1(3, &[0.0, 1.0, 2.0]), poly1(3, &[0.0, -1.0])])
            .unwrap();
        let r = t_compose(&outer, &inner).unwrap();
        assert_eq!(r, inner);
    }

    #[test]
    fn lift_and_extract_roundtrip() {
        let a = poly1(2, &[3.0, 2.0, 1.0]);
        let lifted = a.lift(2, 4);
        assert_eq!(lifted.num_vars(), 3);
        let back = lifted.extract_aux(2, &[0, 0], 2);
        assert_eq!(back, a);
    }

    #[test]
    fn finite_difference_gradient_matches() {
        // random-ish rational function of two variables
        let m = 2;
        let k = 2;
        let pts = [[0.3, -0.2], [0.1, 0.4], [-0.25, 0.15]];
        let f = |x: &[f64]| (1.0 + x[0] + 0.5 * x[1] * x[1]) / (2.0 + x[0] * x[1]);
        for p in pts {
            let x0 = TaylorValue::affine(m, k, p[0], &[1.0, 0.0]);
            let x1 = TaylorValue::affine(m, k, p[1], &[0.0, 1.0]);
            let num = &(&TaylorValue::constant(m, k, 1.0) + &x0)
                + &(&x1 * &x1).scale(0.5);
            let den = &TaylorValue::constant(m, k, 2.0) + &(&x0 * &x1);
            let v = num.try_div(&den).unwrap();
            let h = 1e-5;
            for i in 0..m {
                let mut pp = p;
                let mut pm = p;
                pp[i] += h;
                pm[i] -= h;
                let fd = (f(&pp) - f(&pm)) / (2.0 * h);
                assert_relative_eq!(v.grad(i), fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn truncation_consistency() {
        // computing at K then dropping to K-1 equals computing at K-1
        let a3 = poly1(3, &[1.0, 0.7, -0.3, 0.2]);
        let b3 = poly1(3, &[2.0, -0.5, 0.1, 0.4]);
        let a2 = a3.truncated(2);
        let b2 = b3.truncated(2);
        for op in [ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div] {
            let hi = t_arith(op, &a3, &b3).unwrap().truncated(2);
            let lo = t_arith(op, &a2, &b2).unwrap();
            assert_eq!(hi, lo);
        }
    }
}
