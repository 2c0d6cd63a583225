//! Second-order jets of local diffeomorphisms, frame-bundle coordinates,
//! group actions, quotient projections, and transition maps.
//!
//! All computations are chart-local. The second-order frame bundle over a
//! chart carries coordinates `(y^i, y^i_j, y^i_{jk})` where the third slot
//! is symmetric in `(j, k)`; the reduced bundles keep the subsets listed in
//! [`Bundle`]. Transition maps are implemented once over [`TaylorValue`]
//! coordinates so that they can be differentiated (for pullbacks of forms)
//! and evaluated numerically through the same code path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{eval, eval_taylor, DiffeoSpec, Env};
use crate::taylor::TaylorValue;

/// The bundle models. `Base` is the chart itself; the rest are the
/// second-order frame bundle and its reductions:
///
/// - `S2`: `(y^i, y^i_j, y^i_{jk})`
/// - `Gl`: `(y^i, y^i_{jk})` (GL(n) quotient)
/// - `O`:  `(y^i, y^{ij}, y^i_{jk})` (O(n) quotient, `y^{ij}` SPD)
/// - `Sl`: `(y^i, det(y^i_j), y^i_{jk})` (SL(n) quotient)
/// - `A`:  `(y^i, x, y_i)` with `x = ln|det|`, `y_i = y^j_{ji}`
/// - `B`:  `(y^i, y_i)`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bundle {
    Base,
    S2,
    Gl,
    O,
    Sl,
    A,
    B,
}

impl Bundle {
    pub fn chart_dim(self, n: usize) -> usize {
        let s = n * (n + 1) / 2;
        match self {
            Bundle::Base => n,
            Bundle::S2 => n + n * n + n * s,
            Bundle::Gl => n + n * s,
            Bundle::O => n + s + n * s,
            Bundle::Sl => n + 1 + n * s,
            Bundle::A => 2 * n + 1,
            Bundle::B => 2 * n,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Bundle::Base => "base",
            Bundle::S2 => "s2",
            Bundle::Gl => "gl",
            Bundle::O => "o",
            Bundle::Sl => "sl",
            Bundle::A => "a",
            Bundle::B => "b",
        }
    }

    pub fn parse(s: &str) -> Result<Bundle> {
        match s.to_ascii_lowercase().as_str() {
            "base" => Ok(Bundle::Base),
            "s2" => Ok(Bundle::S2),
            "gl" => Ok(Bundle::Gl),
            "o" => Ok(Bundle::O),
            "sl" => Ok(Bundle::Sl),
            "a" => Ok(Bundle::A),
            "b" => Ok(Bundle::B),
            other => Err(Error::InvalidInput(format!("unknown bundle `{other}`"))),
        }
    }
}

/// Rank of the pair `(j, k)` with `j <= k` in the packed symmetric layout.
pub fn sym_idx(n: usize, j: usize, k: usize) -> usize {
    let (j, k) = if j <= k { (j, k) } else { (k, j) };
    j * (2 * n - j + 1) / 2 + (k - j)
}

/// Flat coordinate layout of a bundle chart. Symmetric blocks are packed
/// by `sym_idx`; `y^i_{jk}` blocks are grouped by the upper index `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChartLayout {
    pub bundle: Bundle,
    pub n: usize,
}

impl ChartLayout {
    pub fn new(bundle: Bundle, n: usize) -> ChartLayout {
        ChartLayout { bundle, n }
    }

    pub fn dim(&self) -> usize {
        self.bundle.chart_dim(self.n)
    }

    fn sym_count(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn y(&self, i: usize) -> usize {
        i
    }

    /// `y^i_j` (S2 only).
    pub fn yj(&self, i: usize, j: usize) -> usize {
        debug_assert_eq!(self.bundle, Bundle::S2);
        self.n + i * self.n + j
    }

    /// `y^i_{jk}` (S2, GL, O, SL).
    pub fn yjk(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.n;
        let off = match self.bundle {
            Bundle::S2 => n + n * n,
            Bundle::Gl => n,
            Bundle::O => n + self.sym_count(),
            Bundle::Sl => n + 1,
            _ => panic!("no y^i_jk block on {:?}", self.bundle),
        };
        off + i * self.sym_count() + sym_idx(n, j, k)
    }

    /// `y^{ij}` (O only).
    pub fn yij(&self, i: usize, j: usize) -> usize {
        debug_assert_eq!(self.bundle, Bundle::O);
        self.n + sym_idx(self.n, i, j)
    }

    /// `det(y^i_j)` (SL only).
    pub fn ydet(&self) -> usize {
        debug_assert_eq!(self.bundle, Bundle::Sl);
        self.n
    }

    /// log-volume coordinate `x` (A only).
    pub fn x(&self) -> usize {
        debug_assert_eq!(self.bundle, Bundle::A);
        self.n
    }

    /// `y_i` (A and B).
    pub fn yi(&self, i: usize) -> usize {
        match self.bundle {
            Bundle::A => self.n + 1 + i,
            Bundle::B => self.n + i,
            _ => panic!("no y_i block on {:?}", self.bundle),
        }
    }
}

// ---------------------------------------------------------------------------
// small f64 linear algebra
// ---------------------------------------------------------------------------

/// Inverse and determinant of a small dense matrix (row-major).
pub fn mat_inv_det(n: usize, a: &[f64]) -> Result<(Vec<f64>, f64)> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| {
                m[r1 * n + col]
                    .abs()
                    .partial_cmp(&m[r2 * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        if m[pivot * n + col].abs() < 1e-300 {
            return Err(Error::SingularMatrix);
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for k in 0..n {
            m[col * n + k] /= p;
            inv[col * n + k] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..n {
                m[r * n + k] -= f * m[col * n + k];
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    Ok((inv, det))
}

// ---------------------------------------------------------------------------
// Taylor-valued linear algebra
// ---------------------------------------------------------------------------

/// Gauss-Jordan inverse and determinant over Taylor values; pivots on the
/// magnitude of constant terms.
pub fn tmat_inv_det(n: usize, a: &[TaylorValue]) -> Result<(Vec<TaylorValue>, TaylorValue)> {
    let (m_vars, order) = (a[0].num_vars(), a[0].order());
    let mut m = a.to_vec();
    let mut inv: Vec<TaylorValue> = (0..n * n)
        .map(|idx| {
            let (r, c) = (idx / n, idx % n);
            TaylorValue::constant(m_vars, order, if r == c { 1.0 } else { 0.0 })
        })
        .collect();
    let mut det = TaylorValue::constant(m_vars, order, 1.0);
    let mut sign = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| {
                m[r1 * n + col]
                    .value()
                    .abs()
                    .partial_cmp(&m[r2 * n + col].value().abs())
                    .unwrap()
            })
            .unwrap();
        if m[pivot * n + col].value().abs() < 1e-300 {
            return Err(Error::SingularMatrix);
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
                inv.swap(col * n + k, pivot * n + k);
            }
            sign = -sign;
        }
        let p = m[col * n + col].clone();
        det = &det * &p;
        for k in 0..n {
            m[col * n + k] = m[col * n + k].try_div(&p)?;
            inv[col * n + k] = inv[col * n + k].try_div(&p)?;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r * n + col].clone();
            if f.max_abs_coeff() == 0.0 {
                continue;
            }
            for k in 0..n {
                m[r * n + k] = &m[r * n + k] - &(&f * &m[col * n + k]);
                inv[r * n + k] = &inv[r * n + k] - &(&f * &inv[col * n + k]);
            }
        }
    }
    Ok((inv, det.scale(sign)))
}

// ---------------------------------------------------------------------------
// jets (numeric)
// ---------------------------------------------------------------------------

/// 2-jet of a local diffeomorphism at a base point: value, Jacobian, and
/// symmetric second derivatives. The base point is carried so that
/// inversion and composition stay meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub n: usize,
    pub base: Vec<f64>,
    pub z: Vec<f64>,
    /// `z^i_j`, row-major.
    pub zj: Vec<f64>,
    /// `z^i_{jk}`, full `n^3` with symmetry in `(j, k)`; index `i*n*n + j*n + k`.
    pub zjk: Vec<f64>,
}

impl Jet2 {
    pub fn identity(n: usize, base: &[f64]) -> Jet2 {
        let mut zj = vec![0.0; n * n];
        for i in 0..n {
            zj[i * n + i] = 1.0;
        }
        Jet2 {
            n,
            base: base.to_vec(),
            z: base.to_vec(),
            zj,
            zjk: vec![0.0; n * n * n],
        }
    }

    pub fn zj_at(&self, i: usize, j: usize) -> f64 {
        self.zj[i * self.n + j]
    }

    pub fn zjk_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.zjk[i * self.n * self.n + j * self.n + k]
    }
}

/// Read the 2-jet of `h` at `p` off a Taylor expansion of order 2.
pub fn jet_of(h: &DiffeoSpec, p: &[f64]) -> Result<Jet2> {
    let n = h.n;
    if p.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "jet_of: point has {} coordinates, chart has {n}",
            p.len()
        )));
    }
    let mut z = Vec::with_capacity(n);
    let mut zj = vec![0.0; n * n];
    let mut zjk = vec![0.0; n * n * n];
    for (i, c) in h.components.iter().enumerate() {
        let t = eval_taylor(c, p, 2)?;
        z.push(t.value());
        for j in 0..n {
            zj[i * n + j] = t.grad(j);
            for k in 0..n {
                zjk[i * n * n + j * n + k] = t.second(j, k);
            }
        }
    }
    let jet = Jet2 {
        n,
        base: p.to_vec(),
        z,
        zj,
        zjk,
    };
    mat_inv_det(n, &jet.zj).map_err(|_| Error::SingularJacobian)?;
    Ok(jet)
}

/// Jet of `g o f` by the chain rule (second order).
pub fn jet_compose(g: &Jet2, f: &Jet2) -> Result<Jet2> {
    if g.n != f.n {
        return Err(Error::DimensionMismatch("jet_compose".into()));
    }
    let n = g.n;
    let mut zj = vec![0.0; n * n];
    let mut zjk = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..n {
                s += g.zj_at(i, p) * f.zj_at(p, j);
            }
            zj[i * n + j] = s;
        }
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        s += g.zjk_at(i, p, q) * f.zj_at(p, j) * f.zj_at(q, k);
                    }
                    s += g.zj_at(i, p) * f.zjk_at(p, j, k);
                }
                zjk[i * n * n + j * n + k] = s;
            }
        }
    }
    Ok(Jet2 {
        n,
        base: f.base.clone(),
        z: g.z.clone(),
        zj,
        zjk,
    })
}

/// Jet of the local inverse; second order solves the chain-rule identity
/// `g^i_{pq} f^p_j f^q_k + g^i_p f^p_{jk} = 0`.
pub fn jet_invert(f: &Jet2) -> Result<Jet2> {
    let n = f.n;
    let (w, _) = mat_inv_det(n, &f.zj).map_err(|_| Error::SingularJacobian)?;
    let mut zjk = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for sidx in 0..n {
                    for p in 0..n {
                        for q in 0..n {
                            s += w[i * n + sidx]
                                * f.zjk_at(sidx, p, q)
                                * w[p * n + j]
                                * w[q * n + k];
                        }
                    }
                }
                zjk[i * n * n + j * n + k] = -s;
            }
        }
    }
    Ok(Jet2 {
        n,
        base: f.z.clone(),
        z: f.base.clone(),
        zj: w,
        zjk,
    })
}

// ---------------------------------------------------------------------------
// point types
// ---------------------------------------------------------------------------

/// Point of the full second-order frame bundle, coordinates `(y, y^i_j, y^i_{jk})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S2Point {
    pub n: usize,
    pub y: Vec<f64>,
    /// `y^i_j`, row-major, invertible.
    pub yj: Vec<f64>,
    /// `y^i_{jk}`, full `n^3`, symmetric in `(j, k)`.
    pub yjk: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlPoint {
    pub n: usize,
    pub y: Vec<f64>,
    pub yjk: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OPoint {
    pub n: usize,
    pub y: Vec<f64>,
    /// `y^{ij}`, row-major symmetric positive-definite.
    pub yij: Vec<f64>,
    pub yjk: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlPoint {
    pub n: usize,
    pub y: Vec<f64>,
    pub ydet: f64,
    pub yjk: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct APoint {
    pub n: usize,
    pub y: Vec<f64>,
    pub x: f64,
    pub yi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BPoint {
    pub n: usize,
    pub y: Vec<f64>,
    pub yi: Vec<f64>,
}

impl S2Point {
    pub fn yj_at(&self, i: usize, j: usize) -> f64 {
        self.yj[i * self.n + j]
    }
    pub fn yjk_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.yjk[i * self.n * self.n + j * self.n + k]
    }

    pub fn identity_frame(n: usize, y: &[f64]) -> S2Point {
        let mut yj = vec![0.0; n * n];
        for i in 0..n {
            yj[i * n + i] = 1.0;
        }
        S2Point {
            n,
            y: y.to_vec(),
            yj,
            yjk: vec![0.0; n * n * n],
        }
    }
}

/// A point on any bundle model, with flat-coordinate conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bundle", rename_all = "lowercase")]
pub enum Point {
    Base { n: usize, y: Vec<f64> },
    S2(S2Point),
    Gl(GlPoint),
    O(OPoint),
    Sl(SlPoint),
    A(APoint),
    B(BPoint),
}

impl Point {
    pub fn bundle(&self) -> Bundle {
        match self {
            Point::Base { .. } => Bundle::Base,
            Point::S2(_) => Bundle::S2,
            Point::Gl(_) => Bundle::Gl,
            Point::O(_) => Bundle::O,
            Point::Sl(_) => Bundle::Sl,
            Point::A(_) => Bundle::A,
            Point::B(_) => Bundle::B,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Point::Base { n, .. } => *n,
            Point::S2(p) => p.n,
            Point::Gl(p) => p.n,
            Point::O(p) => p.n,
            Point::Sl(p) => p.n,
            Point::A(p) => p.n,
            Point::B(p) => p.n,
        }
    }

    /// Flatten into the packed chart layout.
    pub fn to_coords(&self) -> Vec<f64> {
        let n = self.n();
        let lay = ChartLayout::new(self.bundle(), n);
        let mut c = vec![0.0; lay.dim()];
        match self {
            Point::Base { y, .. } => c.copy_from_slice(y),
            Point::S2(p) => {
                c[..n].copy_from_slice(&p.y);
                for i in 0..n {
                    for j in 0..n {
                        c[lay.yj(i, j)] = p.yj_at(i, j);
                    }
                    for j in 0..n {
                        for k in j..n {
                            c[lay.yjk(i, j, k)] = p.yjk_at(i, j, k);
                        }
                    }
                }
            }
            Point::Gl(p) => {
                c[..n].copy_from_slice(&p.y);
                for i in 0..n {
                    for j in 0..n {
                        for k in j..n {
                            c[lay.yjk(i, j, k)] = p.yjk[i * n * n + j * n + k];
                        }
                    }
                }
            }
            Point::O(p) => {
                c[..n].copy_from_slice(&p.y);
                for i in 0..n {
                    for j in i..n {
                        c[lay.yij(i, j)] = p.yij[i * n + j];
                    }
                }
                for i in 0..n {
                    for j in 0..n {
                        for k in j..n {
                            c[lay.yjk(i, j, k)] = p.yjk[i * n * n + j * n + k];
                        }
                    }
                }
            }
            Point::Sl(p) => {
                c[..n].copy_from_slice(&p.y);
                c[lay.ydet()] = p.ydet;
                for i in 0..n {
                    for j in 0..n {
                        for k in j..n {
                            c[lay.yjk(i, j, k)] = p.yjk[i * n * n + j * n + k];
                        }
                    }
                }
            }
            Point::A(p) => {
                c[..n].copy_from_slice(&p.y);
                c[lay.x()] = p.x;
                for i in 0..n {
                    c[lay.yi(i)] = p.yi[i];
                }
            }
            Point::B(p) => {
                c[..n].copy_from_slice(&p.y);
                for i in 0..n {
                    c[lay.yi(i)] = p.yi[i];
                }
            }
        }
        c
    }

    /// Rebuild a typed point from packed chart coordinates.
    pub fn from_coords(bundle: Bundle, n: usize, c: &[f64]) -> Result<Point> {
        let lay = ChartLayout::new(bundle, n);
        if c.len() != lay.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} chart at n={n} has {} coordinates, got {}",
                bundle.name(),
                lay.dim(),
                c.len()
            )));
        }
        let y = c[..n].to_vec();
        let unpack_yjk = |c: &[f64]| {
            let mut yjk = vec![0.0; n * n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        yjk[i * n * n + j * n + k] = c[lay.yjk(i, j, k)];
                    }
                }
            }
            yjk
        };
        Ok(match bundle {
            Bundle::Base => Point::Base { n, y },
            Bundle::S2 => {
                let mut yj = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        yj[i * n + j] = c[lay.yj(i, j)];
                    }
                }
                Point::S2(S2Point {
                    n,
                    y,
                    yj,
                    yjk: unpack_yjk(c),
                })
            }
            Bundle::Gl => Point::Gl(GlPoint {
                n,
                y,
                yjk: unpack_yjk(c),
            }),
            Bundle::O => {
                let mut yij = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        yij[i * n + j] = c[lay.yij(i, j)];
                    }
                }
                Point::O(OPoint {
                    n,
                    y,
                    yij,
                    yjk: unpack_yjk(c),
                })
            }
            Bundle::Sl => Point::Sl(SlPoint {
                n,
                y,
                ydet: c[lay.ydet()],
                yjk: unpack_yjk(c),
            }),
            Bundle::A => Point::A(APoint {
                n,
                y,
                x: c[lay.x()],
                yi: (0..n).map(|i| c[lay.yi(i)]).collect(),
            }),
            Bundle::B => Point::B(BPoint {
                n,
                y,
                yi: (0..n).map(|i| c[lay.yi(i)]).collect(),
            }),
        })
    }
}

// ---------------------------------------------------------------------------
// GL action and projections
// ---------------------------------------------------------------------------

/// Right action of `GL(n)` on the frame slot: `(y, y^i_j, y^i_{jk}) ->
/// (y, y^i_p A^p_j, y^i_{jk})`.
pub fn gl_action(a: &[f64], p: &S2Point) -> Result<S2Point> {
    let n = p.n;
    if a.len() != n * n {
        return Err(Error::DimensionMismatch("gl_action matrix size".into()));
    }
    mat_inv_det(n, a)?;
    let mut yj = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for q in 0..n {
                s += p.yj_at(i, q) * a[q * n + j];
            }
            yj[i * n + j] = s;
        }
    }
    Ok(S2Point {
        n,
        y: p.y.clone(),
        yj,
        yjk: p.yjk.clone(),
    })
}

/// Quotient projections out of the full frame bundle.
pub fn project(target: Bundle, p: &S2Point) -> Result<Point> {
    let n = p.n;
    let trace_yi = |p: &S2Point| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| p.yjk_at(j, j, i)).sum())
            .collect()
    };
    match target {
        Bundle::Gl => Ok(Point::Gl(GlPoint {
            n,
            y: p.y.clone(),
            yjk: p.yjk.clone(),
        })),
        Bundle::O => {
            let mut yij = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += p.yj_at(i, l) * p.yj_at(k, l);
                    }
                    yij[i * n + k] = s;
                }
            }
            Ok(Point::O(OPoint {
                n,
                y: p.y.clone(),
                yij,
                yjk: p.yjk.clone(),
            }))
        }
        Bundle::Sl => {
            let (_, det) = mat_inv_det(n, &p.yj).map_err(|_| Error::SingularJacobian)?;
            Ok(Point::Sl(SlPoint {
                n,
                y: p.y.clone(),
                ydet: det,
                yjk: p.yjk.clone(),
            }))
        }
        Bundle::A => {
            let (_, det) = mat_inv_det(n, &p.yj).map_err(|_| Error::SingularJacobian)?;
            if det == 0.0 {
                return Err(Error::ZeroDeterminant);
            }
            Ok(Point::A(APoint {
                n,
                y: p.y.clone(),
                x: det.abs().ln(),
                yi: trace_yi(p),
            }))
        }
        Bundle::B => Ok(Point::B(BPoint {
            n,
            y: p.y.clone(),
            yi: trace_yi(p),
        })),
        Bundle::S2 => Ok(Point::S2(p.clone())),
        Bundle::Base => Ok(Point::Base {
            n,
            y: p.y.clone(),
        }),
    }
}

/// SL-to-A conversion `x = ln|y|`; the sign of the SL coordinate is lost.
pub fn sl_to_a(p: &SlPoint) -> Result<APoint> {
    if p.ydet == 0.0 {
        return Err(Error::ZeroDeterminant);
    }
    let n = p.n;
    Ok(APoint {
        n,
        y: p.y.clone(),
        x: p.ydet.abs().ln(),
        yi: (0..n)
            .map(|i| (0..n).map(|j| p.yjk[j * n * n + j * n + i]).sum())
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// transitions (Taylor-generic core)
// ---------------------------------------------------------------------------

/// 2-jet of a map with Taylor-valued entries: the value, Jacobian, and
/// second derivatives as functions of a (possibly Taylor-seeded) base point.
#[derive(Debug, Clone)]
pub struct TJet {
    pub n: usize,
    pub alpha: Vec<TaylorValue>,
    /// row-major `n x n`
    pub jac: Vec<TaylorValue>,
    /// full `n^3`, symmetric in the last two slots
    pub hess: Vec<TaylorValue>,
}

impl TJet {
    pub fn jac_at(&self, i: usize, j: usize) -> &TaylorValue {
        &self.jac[i * self.n + j]
    }
    pub fn hess_at(&self, i: usize, j: usize, k: usize) -> &TaylorValue {
        &self.hess[i * self.n * self.n + j * self.n + k]
    }

    pub fn from_jet2(jet: &Jet2, m_vars: usize, order: usize) -> TJet {
        let c = |v: f64| TaylorValue::constant(m_vars, order, v);
        TJet {
            n: jet.n,
            alpha: jet.z.iter().map(|&v| c(v)).collect(),
            jac: jet.zj.iter().map(|&v| c(v)).collect(),
            hess: jet.zjk.iter().map(|&v| c(v)).collect(),
        }
    }
}

/// 2-jet of `h` at a Taylor-valued base point, by extending the context
/// with `n` auxiliary jet variables and reading off their coefficients.
pub fn taylor_jet(h: &DiffeoSpec, y: &[TaylorValue]) -> Result<TJet> {
    let n = h.n;
    if y.len() != n {
        return Err(Error::DimensionMismatch("taylor_jet base point".into()));
    }
    let (m, k) = (y[0].num_vars(), y[0].order());
    let (me, ke) = (m + n, k + 2);
    let coords: Vec<TaylorValue> = (0..n)
        .map(|i| &y[i].lift(n, ke) + &TaylorValue::variable(me, ke, m + i))
        .collect();
    let env = Env::vars(&coords);
    let mut alpha = Vec::with_capacity(n);
    let mut jac = Vec::with_capacity(n * n);
    let mut hess = Vec::with_capacity(n * n * n);
    let zeros = vec![0u8; n];
    for comp in &h.components {
        let w = eval(comp, &env)?;
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

/// Transition of packed chart coordinates under the 2-jet of a local
/// diffeomorphism taken at the base point of `coords`.
pub fn transition_coords(
    bundle: Bundle,
    n: usize,
    jet: &TJet,
    coords: &[TaylorValue],
) -> Result<Vec<TaylorValue>> {
    let lay = ChartLayout::new(bundle, n);
    if coords.len() != lay.dim() {
        return Err(Error::DimensionMismatch(format!(
            "transition: expected {} chart coordinates, got {}",
            lay.dim(),
            coords.len()
        )));
    }
    if jet.n != n {
        return Err(Error::DimensionMismatch("transition: jet dimension".into()));
    }
    let (w, det) = tmat_inv_det(n, &jet.jac).map_err(|_| Error::SingularJacobian)?;
    let wat = |p: usize, j: usize| &w[p * n + j];

    let mut out = vec![coords[0].clone(); lay.dim()];
    for i in 0..n {
        out[i] = jet.alpha[i].clone();
    }

    // second-order block law shared by S2/GL/O/SL:
    // a^i_{jk} = W^p_j H^i_{pq} W^q_k + J^i_s (W^p_j y^s_{pq} W^q_k)
    let yjk_law = |out: &mut Vec<TaylorValue>| {
        let (m, kk) = (coords[0].num_vars(), coords[0].order());
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let mut acc = TaylorValue::zero(m, kk);
                    for p in 0..n {
                        for q in 0..n {
                            let t1 = &(wat(p, j) * jet.hess_at(i, p, q)) * wat(q, k);
                            acc = &acc + &t1;
                            for s in 0..n {
                                let ys = &coords[lay.yjk(s, p, q)];
                                let t2 = &(&(wat(p, j) * jet.jac_at(i, s)) * wat(q, k)) * ys;
                                acc = &acc + &t2;
                            }
                        }
                    }
                    out[lay.yjk(i, j, k)] = acc;
                }
            }
        }
    };

    // trace law shared by A/B:
    // a_k = W^p_j H^j_{pq} W^q_k + W^j_k y_j
    let yi_law = |out: &mut Vec<TaylorValue>| {
        let (m, kk) = (coords[0].num_vars(), coords[0].order());
        for k in 0..n {
            let mut acc = TaylorValue::zero(m, kk);
            for j in 0..n {
                for p in 0..n {
                    for q in 0..n {
                        acc = &acc + &(&(wat(p, j) * jet.hess_at(j, p, q)) * wat(q, k));
                    }
                }
                acc = &acc + &(wat(j, k) * &coords[lay.yi(j)]);
            }
            out[lay.yi(k)] = acc;
        }
    };

    match bundle {
        Bundle::Base => {}
        Bundle::S2 => {
            for i in 0..n {
                for j in 0..n {
                    let (m, kk) = (coords[0].num_vars(), coords[0].order());
                    let mut acc = TaylorValue::zero(m, kk);
                    for p in 0..n {
                        acc = &acc + &(jet.jac_at(i, p) * &coords[lay.yj(p, j)]);
                    }
                    out[lay.yj(i, j)] = acc;
                }
            }
            yjk_law(&mut out);
        }
        Bundle::Gl => yjk_law(&mut out),
        Bundle::O => {
            let (m, kk) = (coords[0].num_vars(), coords[0].order());
            for i in 0..n {
                for j in i..n {
                    let mut acc = TaylorValue::zero(m, kk);
                    for k in 0..n {
                        for l in 0..n {
                            let ykl = &coords[lay.yij(k.min(l), k.max(l))];
                            acc = &acc + &(&(jet.jac_at(i, k) * ykl) * jet.jac_at(j, l));
                        }
                    }
                    out[lay.yij(i, j)] = acc;
                }
            }
            yjk_law(&mut out);
        }
        Bundle::Sl => {
            out[lay.ydet()] = &det * &coords[lay.ydet()];
            yjk_law(&mut out);
        }
        Bundle::A => {
            let d0 = det.value();
            if d0 == 0.0 {
                return Err(Error::SingularJacobian);
            }
            let absdet = if d0 < 0.0 { -&det } else { det.clone() };
            out[lay.x()] = &coords[lay.x()] + &absdet.ln()?;
            yi_law(&mut out);
        }
        Bundle::B => yi_law(&mut out),
    }
    Ok(out)
}

/// Numeric transition of a typed point under a diffeomorphism.
pub fn transition(h: &DiffeoSpec, p: &Point) -> Result<Point> {
    let n = p.n();
    if h.n != n {
        return Err(Error::DimensionMismatch("transition dimension".into()));
    }
    let coords = p.to_coords();
    let base: Vec<TaylorValue> = coords[..n]
        .iter()
        .map(|&v| TaylorValue::constant(0, 0, v))
        .collect();
    let jet = taylor_jet(h, &base)?;
    let tc: Vec<TaylorValue> = coords
        .iter()
        .map(|&v| TaylorValue::constant(0, 0, v))
        .collect();
    let out = transition_coords(p.bundle(), n, &jet, &tc)?;
    let vals: Vec<f64> = out.iter().map(|t| t.value()).collect();
    Point::from_coords(p.bundle(), n, &vals)
}

/// Numeric transition under an explicitly given 2-jet (e.g. the integrated
/// jet of a flow map). The jet must be taken at the base point of `p`.
pub fn transition_jet(jet: &Jet2, p: &Point) -> Result<Point> {
    let n = p.n();
    if jet.n != n {
        return Err(Error::DimensionMismatch("transition_jet dimension".into()));
    }
    let coords = p.to_coords();
    let tjet = TJet::from_jet2(jet, 0, 0);
    let tc: Vec<TaylorValue> = coords
        .iter()
        .map(|&v| TaylorValue::constant(0, 0, v))
        .collect();
    let out = transition_coords(p.bundle(), n, &tjet, &tc)?;
    let vals: Vec<f64> = out.iter().map(|t| t.value()).collect();
    Point::from_coords(p.bundle(), n, &vals)
}
