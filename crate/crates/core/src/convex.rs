//! Small dense convex solver: primal-dual interior point with Mehrotra
//! predictor-corrector steps.
//!
//! Every inequality is a smooth convex function `f(x) <= 0` of the form
//!
//! ```text
//! 1/2 x'Px + q'x + r + sum_i w_i phi_i(x)
//! ```
//!
//! where each `phi_i` is one of `-ln(a'x + b)`, `-(a'x + b)^p` with
//! `0 < p < 1`, or the quadratic-over-linear `||Ax + b||^2 / (c'x + d)`, all
//! with non-negative weights. Affine equalities `Ex = h` are supported.
//! Second-order cones `||Ax + b|| <= c'x + d` are expressed as
//! `||Ax + b||^2 / (c'x + d) - (c'x + d) <= 0`.
//!
//! A point whose term arguments are all positive is found first (phase 0),
//! then a strictly feasible point by slack minimization (phase 1), then the
//! objective is minimized (phase 2).

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    /// `-w ln(a'x + b)`.
    NegLog { w: f64, a: DVector<f64>, b: f64 },
    /// `-w (a'x + b)^p`, `0 < p < 1`.
    NegPow { w: f64, a: DVector<f64>, b: f64, p: f64 },
    /// `w ||Ax + b||^2 / (c'x + d)`.
    QuadOverLin {
        w: f64,
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DVector<f64>,
        d: f64,
    },
}

impl Term {
    fn domain_arg(&self, x: &DVector<f64>) -> f64 {
        match self {
            Term::NegLog { a, b, .. } | Term::NegPow { a, b, .. } => a.dot(x) + b,
            Term::QuadOverLin { c, d, .. } => c.dot(x) + d,
        }
    }

    fn domain_affine(&self) -> (&DVector<f64>, f64) {
        match self {
            Term::NegLog { a, b, .. } | Term::NegPow { a, b, .. } => (a, *b),
            Term::QuadOverLin { c, d, .. } => (c, *d),
        }
    }

    fn pad(&self, extra: usize) -> Term {
        let pv = |v: &DVector<f64>| v.clone().resize_vertically(v.len() + extra, 0.0);
        match self {
            Term::NegLog { w, a, b } => Term::NegLog { w: *w, a: pv(a), b: *b },
            Term::NegPow { w, a, b, p } => Term::NegPow { w: *w, a: pv(a), b: *b, p: *p },
            Term::QuadOverLin { w, a, b, c, d } => Term::QuadOverLin {
                w: *w,
                a: a.clone().resize_horizontally(a.ncols() + extra, 0.0),
                b: b.clone(),
                c: pv(c),
                d: *d,
            },
        }
    }

    /// Adds the value, gradient and (optionally) Hessian at `x`.
    fn accumulate(&self, x: &DVector<f64>, val: &mut f64, grad: &mut DVector<f64>, hess: Option<&mut DMatrix<f64>>) {
        match self {
            Term::NegLog { w, a, b } => {
                let u = a.dot(x) + b;
                *val -= w * u.ln();
                grad.axpy(-w / u, a, 1.0);
                if let Some(h) = hess {
                    h.ger(w / (u * u), a, a, 1.0);
                }
            }
            Term::NegPow { w, a, b, p } => {
                let u = a.dot(x) + b;
                *val -= w * u.powf(*p);
                grad.axpy(-w * p * u.powf(p - 1.0), a, 1.0);
                if let Some(h) = hess {
                    h.ger(-w * p * (p - 1.0) * u.powf(p - 2.0), a, a, 1.0);
                }
            }
            Term::QuadOverLin { w, a, b, c, d } => {
                let v = a * x + b;
                let u = c.dot(x) + d;
                let vv = v.norm_squared();
                *val += w * vv / u;
                let atv = a.transpose() * &v;
                grad.axpy(2.0 * w / u, &atv, 1.0);
                grad.axpy(-w * vv / (u * u), c, 1.0);
                if let Some(h) = hess {
                    h.gemm(2.0 * w / u, &a.transpose(), a, 1.0);
                    h.ger(-2.0 * w / (u * u), &atv, c, 1.0);
                    h.ger(-2.0 * w / (u * u), c, &atv, 1.0);
                    h.ger(2.0 * w * vv / (u * u * u), c, c, 1.0);
                }
            }
        }
    }
}

/// `1/2 x'Px + q'x + r + sum of terms`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFn {
    pub p: Option<DMatrix<f64>>,
    pub q: DVector<f64>,
    pub r: f64,
    pub terms: Vec<Term>,
}

impl SmoothFn {
    pub fn affine(q: DVector<f64>, r: f64) -> Self {
        Self {
            p: None,
            q,
            r,
            terms: Vec::new(),
        }
    }

    pub fn quadratic(p: DMatrix<f64>, q: DVector<f64>, r: f64) -> Self {
        Self {
            p: Some(p),
            q,
            r,
            terms: Vec::new(),
        }
    }

    /// `||Ax + b|| <= c'x + d` as a smooth convex inequality.
    pub fn soc(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, d: f64) -> Self {
        let n = c.len();
        let mut f = Self::affine(-c.clone(), -d);
        f.terms.push(Term::QuadOverLin { w: 1.0, a, b, c, d });
        debug_assert_eq!(f.q.len(), n);
        f
    }

    pub fn with_term(mut self, t: Term) -> Self {
        self.terms.push(t);
        self
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        let mut g = DVector::zeros(x.len());
        self.eval(x, &mut g, None)
    }

    pub fn in_domain(&self, x: &DVector<f64>) -> bool {
        self.terms.iter().all(|t| t.domain_arg(x) > 0.0)
    }

    /// Value; writes the gradient into `grad` and adds the Hessian to `hess`.
    pub fn eval(&self, x: &DVector<f64>, grad: &mut DVector<f64>, mut hess: Option<&mut DMatrix<f64>>) -> f64 {
        grad.copy_from(&self.q);
        let mut val = self.q.dot(x) + self.r;
        if let Some(p) = &self.p {
            let px = p * x;
            val += 0.5 * x.dot(&px);
            *grad += px;
            if let Some(h) = hess.as_deref_mut() {
                *h += p;
            }
        }
        for t in &self.terms {
            t.accumulate(x, &mut val, grad, hess.as_deref_mut());
        }
        val
    }

    fn pad(&self, extra: usize) -> Self {
        let n = self.dim() + extra;
        Self {
            p: self.p.as_ref().map(|p| p.clone().resize(n, n, 0.0)),
            q: self.q.clone().resize_vertically(n, 0.0),
            r: self.r,
            terms: self.terms.iter().map(|t| t.pad(extra)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub n: usize,
    pub objective: SmoothFn,
    /// Each `f_i(x) <= 0`.
    pub inequalities: Vec<SmoothFn>,
    /// `E x = h`.
    pub equalities: Option<(DMatrix<f64>, DVector<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub nu: DVector<f64>,
    pub objective: f64,
    pub status: Status,
    pub iterations: usize,
}

impl ConvexProgram {
    pub fn new(objective: SmoothFn) -> Self {
        Self {
            n: objective.dim(),
            objective,
            inequalities: Vec::new(),
            equalities: None,
        }
    }

    pub fn add(&mut self, f: SmoothFn) -> &mut Self {
        assert_eq!(f.dim(), self.n, "constraint dimension");
        self.inequalities.push(f);
        self
    }

    /// `a'x + b <= 0`.
    pub fn add_affine(&mut self, a: DVector<f64>, b: f64) -> &mut Self {
        self.add(SmoothFn::affine(a, b))
    }

    /// `lo <= x_i <= hi`; pass infinities to skip a side.
    pub fn add_bounds(&mut self, i: usize, lo: f64, hi: f64) -> &mut Self {
        if lo.is_finite() {
            let mut a = DVector::zeros(self.n);
            a[i] = -1.0;
            self.add_affine(a, lo);
        }
        if hi.is_finite() {
            let mut a = DVector::zeros(self.n);
            a[i] = 1.0;
            self.add_affine(a, -hi);
        }
        self
    }

    pub fn set_equalities(&mut self, e: DMatrix<f64>, h: DVector<f64>) -> &mut Self {
        assert_eq!(e.ncols(), self.n);
        assert_eq!(e.nrows(), h.len());
        self.equalities = Some((e, h));
        self
    }

    fn validate(&self) -> Result<()> {
        let check = |f: &SmoothFn| -> Result<()> {
            if f.dim() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    got: f.dim(),
                });
            }
            for t in &f.terms {
                let (w, ok) = match t {
                    Term::NegLog { w, .. } => (*w, true),
                    Term::NegPow { w, p, .. } => (*w, *p > 0.0 && *p < 1.0),
                    Term::QuadOverLin { w, .. } => (*w, true),
                };
                if !(w >= 0.0) || !ok {
                    return Err(Error::Validation("non-convex term in program".into()));
                }
            }
            Ok(())
        };
        check(&self.objective)?;
        for f in &self.inequalities {
            check(f)?;
        }
        Ok(())
    }

    /// Documented text dump for cross-checking with external tools.
    ///
    /// One record per line: `n <n>`, then `obj`, `ineq <i>` or `eq` headers
    /// followed by `P`, `q`, `r` and one `term` line per term (kind, weight,
    /// then the flattened data in column-major order).
    pub fn dump<W: Write>(&self, w: &mut W) -> Result<()> {
        fn vec_s(v: &[f64]) -> String {
            v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ")
        }
        fn write_fn<W: Write>(w: &mut W, f: &SmoothFn) -> Result<()> {
            if let Some(p) = &f.p {
                writeln!(w, "P {}", vec_s(p.as_slice()))?;
            }
            writeln!(w, "q {}", vec_s(f.q.as_slice()))?;
            writeln!(w, "r {:e}", f.r)?;
            for t in &f.terms {
                match t {
                    Term::NegLog { w: wt, a, b } => writeln!(w, "term neglog {wt:e} {:e} {}", b, vec_s(a.as_slice()))?,
                    Term::NegPow { w: wt, a, b, p } => {
                        writeln!(w, "term negpow {wt:e} {p:e} {:e} {}", b, vec_s(a.as_slice()))?
                    }
                    Term::QuadOverLin { w: wt, a, b, c, d } => writeln!(
                        w,
                        "term qol {wt:e} {} {:e} {} | {} | {}",
                        a.nrows(),
                        d,
                        vec_s(c.as_slice()),
                        vec_s(b.as_slice()),
                        vec_s(a.as_slice())
                    )?,
                }
            }
            Ok(())
        }
        writeln!(w, "n {}", self.n)?;
        writeln!(w, "obj")?;
        write_fn(w, &self.objective)?;
        for (i, f) in self.inequalities.iter().enumerate() {
            writeln!(w, "ineq {i}")?;
            write_fn(w, f)?;
        }
        if let Some((e, h)) = &self.equalities {
            writeln!(w, "eq {}", e.nrows())?;
            writeln!(w, "E {}", vec_s(e.as_slice()))?;
            writeln!(w, "h {}", vec_s(h.as_slice()))?;
        }
        Ok(())
    }
}

struct Eval {
    f: DVector<f64>,
    /// `m x n`, row `i` is the gradient of `f_i`.
    df: DMatrix<f64>,
    g0: DVector<f64>,
    f0: f64,
    hess: DMatrix<f64>,
}

struct Core<'a> {
    obj: &'a SmoothFn,
    cons: &'a [SmoothFn],
    eq: Option<&'a (DMatrix<f64>, DVector<f64>)>,
    n: usize,
}

enum Stop {
    Converged,
    Early,
}

impl<'a> Core<'a> {
    fn m(&self) -> usize {
        self.cons.len()
    }

    fn p(&self) -> usize {
        self.eq.map_or(0, |(e, _)| e.nrows())
    }

    fn strictly_ok(&self, x: &DVector<f64>) -> bool {
        if !self.obj.in_domain(x) {
            return false;
        }
        self.cons.iter().all(|c| c.in_domain(x) && c.value(x) < 0.0)
    }

    fn evaluate(&self, x: &DVector<f64>, lambda: Option<&DVector<f64>>) -> Eval {
        let (n, m) = (self.n, self.m());
        let mut hess = DMatrix::zeros(n, n);
        let mut g0 = DVector::zeros(n);
        let f0 = self.obj.eval(x, &mut g0, Some(&mut hess));
        let mut f = DVector::zeros(m);
        let mut df = DMatrix::zeros(m, n);
        let mut g = DVector::zeros(n);
        for (i, c) in self.cons.iter().enumerate() {
            match lambda {
                Some(l) => {
                    let mut hi = DMatrix::zeros(n, n);
                    f[i] = c.eval(x, &mut g, Some(&mut hi));
                    hess += hi * l[i];
                }
                None => f[i] = c.eval(x, &mut g, None),
            }
            df.set_row(i, &g.transpose());
        }
        Eval { f, df, g0, f0, hess }
    }

    fn residual(&self, x: &DVector<f64>, ev: &Eval, lambda: &DVector<f64>, nu: &DVector<f64>, target: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let mut r_dual = &ev.g0 + ev.df.transpose() * lambda;
        let r_pri = match self.eq {
            Some((e, h)) => {
                r_dual += e.transpose() * nu;
                e * x - h
            }
            None => DVector::zeros(0),
        };
        let r_cent = -lambda.component_mul(&ev.f) - DVector::from_element(self.m(), target);
        (r_dual, r_cent, r_pri)
    }

    /// Newton direction for the given centrality residual.
    fn direction(&self, ev: &Eval, lambda: &DVector<f64>, r_dual: &DVector<f64>, r_cent: &DVector<f64>, r_pri: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let m = self.m();
        let mut hpd = ev.hess.clone();
        let mut rhs_x = -r_dual.clone();
        for i in 0..m {
            let gi = ev.df.row(i).transpose();
            let negf = -ev.f[i];
            hpd.ger(lambda[i] / negf, &gi, &gi, 1.0);
            rhs_x.axpy(r_cent[i] / negf, &gi, 1.0);
        }
        let (dx, dnu) = solve_kkt(&hpd, &rhs_x, self.eq.map(|(e, _)| e), &(-r_pri))?;
        let dfdx = &ev.df * &dx;
        // dlambda = F^{-1}(r_cent - diag(lambda) Df dx) with F = diag(f)
        let dl = DVector::from_fn(m, |i, _| (r_cent[i] - lambda[i] * dfdx[i]) / ev.f[i]);
        Some((dx, dl, dnu))
    }

    fn max_dual_step(lambda: &DVector<f64>, dl: &DVector<f64>) -> f64 {
        let mut s: f64 = 1.0;
        for i in 0..lambda.len() {
            if dl[i] < 0.0 {
                s = s.min(-lambda[i] / dl[i]);
            }
        }
        s
    }

    /// Step length along a direction, or `None` when no acceptable step exists.
    #[allow(clippy::too_many_arguments)]
    fn line_search(
        &self,
        x: &DVector<f64>,
        lambda: &DVector<f64>,
        nu: &DVector<f64>,
        dx: &DVector<f64>,
        dl: &DVector<f64>,
        dnu: &DVector<f64>,
        target: f64,
    ) -> Option<f64> {
        let mut s = if self.m() > 0 { (0.99 * Self::max_dual_step(lambda, dl)).min(1.0) } else { 1.0 };
        while !self.strictly_ok(&(x + dx * s)) {
            s *= 0.5;
            if s < 1e-14 {
                return None;
            }
        }
        let norm_t = |x: &DVector<f64>, l: &DVector<f64>, v: &DVector<f64>| {
            let e = self.evaluate(x, None);
            let (a, b, c) = self.residual(x, &e, l, v, target);
            (a.norm_squared() + b.norm_squared() + c.norm_squared()).sqrt()
        };
        let base = norm_t(x, lambda, nu);
        while s >= 1e-14 {
            if norm_t(&(x + dx * s), &(lambda + dl * s), &(nu + dnu * s)) <= (1.0 - 0.01 * s) * base {
                return Some(s);
            }
            s *= 0.5;
        }
        None
    }

    fn run(
        &self,
        mut x: DVector<f64>,
        opts: &SolverOptions,
        early: &dyn Fn(&DVector<f64>) -> bool,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>, usize, Option<Stop>) {
        let (m, p) = (self.m(), self.p());
        let ev0 = self.evaluate(&x, None);
        let mut lambda = DVector::from_fn(m, |i, _| (1.0 / (-ev0.f[i])).clamp(1e-8, 1e8));
        let mut nu = DVector::zeros(p);
        let tol = opts.tol;
        let mut checkpoint = f64::INFINITY;
        for it in 0..opts.max_iter {
            if early(&x) {
                return (x, lambda, nu, it, Some(Stop::Early));
            }
            let ev = self.evaluate(&x, Some(&lambda));
            let gap = if m > 0 { -ev.f.dot(&lambda) } else { 0.0 };
            let mu = if m > 0 { gap / m as f64 } else { 0.0 };
            let (r_dual, r_cent0, r_pri) = self.residual(&x, &ev, &lambda, &nu, 0.0);
            let dual_scale = 1.0 + ev.g0.amax();
            let obj_scale = 1.0f64.max(ev.f0.abs());
            if r_pri.amax() <= tol && r_dual.amax() <= tol * dual_scale && gap <= tol * obj_scale {
                return (x, lambda, nu, it, Some(Stop::Converged));
            }
            // give up on stagnation; the caller falls back to the barrier path
            let merit = r_dual.norm() + r_pri.norm() + gap;
            if it % 15 == 0 {
                if it > 0 && merit > 0.5 * checkpoint {
                    break;
                }
                checkpoint = merit;
            }
            // predictor
            let Some((dx_a, dl_a, _)) = self.direction(&ev, &lambda, &r_dual, &r_cent0, &r_pri) else {
                break;
            };
            let sigma = if m > 0 {
                let dfdx_a = &ev.df * &dx_a;
                let mut a = Self::max_dual_step(&lambda, &dl_a);
                for i in 0..m {
                    if dfdx_a[i] > 0.0 {
                        a = a.min(-ev.f[i] / dfdx_a[i]);
                    }
                }
                let f_aff = &ev.f + &dfdx_a * a;
                let l_aff = &lambda + &dl_a * a;
                let mu_aff = (-f_aff.dot(&l_aff) / m as f64).max(0.0);
                (mu_aff / mu).powi(3).clamp(0.0, 1.0)
            } else {
                0.0
            };
            // corrector, falling back to a plain barrier step when the
            // combined direction does not reduce the residual
            let dfdx_a = &ev.df * &dx_a;
            let mehrotra = -lambda.component_mul(&ev.f) - DVector::from_element(m, sigma * mu) - dl_a.component_mul(&dfdx_a);
            let plain = -lambda.component_mul(&ev.f) - DVector::from_element(m, mu / 10.0);
            let mut moved = false;
            for (r_cent, target) in [(mehrotra, sigma * mu), (plain, mu / 10.0)] {
                let Some((dx, dl, dnu)) = self.direction(&ev, &lambda, &r_dual, &r_cent, &r_pri) else {
                    continue;
                };
                if let Some(step) = self.line_search(&x, &lambda, &nu, &dx, &dl, &dnu, target) {
                    x += &dx * step;
                    lambda = (&lambda + &dl * step).map(|v| v.max(1e-300));
                    nu += &dnu * step;
                    moved = true;
                    break;
                }
            }
            if !moved {
                break;
            }
        }
        let it = opts.max_iter;
        (x, lambda, nu, it, None)
    }

    /// Barrier value `t f0 - sum ln(-f_i)`, infinite outside the strict interior.
    fn barrier_value(&self, x: &DVector<f64>, t: f64) -> f64 {
        if !self.strictly_ok(x) {
            return f64::INFINITY;
        }
        t * self.obj.value(x) - self.cons.iter().map(|c| (-c.value(x)).ln()).sum::<f64>()
    }

    /// Log-barrier path following from a strictly feasible point.
    fn barrier(&self, mut x: DVector<f64>, opts: &SolverOptions) -> (DVector<f64>, DVector<f64>, DVector<f64>, usize, bool) {
        let (n, m, p) = (self.n, self.m(), self.p());
        let scale = |x: &DVector<f64>| 1.0f64.max(self.obj.value(x).abs());
        let mut t = if m > 0 { m as f64 / scale(&x) } else { 1.0 };
        let mut nu = DVector::zeros(p);
        let budget = 20 * opts.max_iter;
        let mut newton_left = budget;
        let mut converged = false;
        'path: loop {
            let mut centered = false;
            for _ in 0..100 {
                if newton_left == 0 || !(x.amax() < 1e12) {
                    break 'path;
                }
                newton_left -= 1;
                let mut g = DVector::zeros(n);
                let mut h = DMatrix::zeros(n, n);
                self.obj.eval(&x, &mut g, Some(&mut h));
                g *= t;
                h *= t;
                let mut gi = DVector::zeros(n);
                for c in self.cons {
                    let mut hi = DMatrix::zeros(n, n);
                    let fi = c.eval(&x, &mut gi, Some(&mut hi));
                    g.axpy(-1.0 / fi, &gi, 1.0);
                    h += hi * (-1.0 / fi);
                    h.ger(1.0 / (fi * fi), &gi, &gi, 1.0);
                }
                let r_pri = self.primal_residual(&x);
                let Some((dx, dnu)) = solve_kkt(&h, &(-&g), self.eq.map(|(e, _)| e), &(-&r_pri)) else {
                    break 'path;
                };
                nu = dnu / t;
                let decrement = -g.dot(&dx);
                let base = self.barrier_value(&x, t);
                let floor = 1e-10 * base.abs().max(1.0);
                let primal_ok = r_pri.amax() <= opts.tol;
                if primal_ok && decrement / 2.0 <= floor {
                    centered = true;
                    break;
                }
                let r0 = r_pri.norm();
                let mut s = 1.0;
                let mut accepted = false;
                while s >= 1e-14 {
                    let cand = &x + &dx * s;
                    let v = self.barrier_value(&cand, t);
                    let ok = if primal_ok {
                        v <= base - 0.01 * s * decrement
                    } else {
                        v.is_finite() && self.primal_residual(&cand).norm() <= (1.0 - 0.01 * s) * r0
                    };
                    if ok {
                        x = cand;
                        accepted = true;
                        break;
                    }
                    s *= 0.5;
                }
                if !accepted {
                    // no measurable decrease left: centered up to rounding
                    if primal_ok && decrement / 2.0 <= 1e-6 * base.abs().max(1.0) {
                        centered = true;
                        break;
                    }
                    break 'path;
                }
            }
            if !centered {
                break;
            }
            if m == 0 || m as f64 / t <= opts.tol * scale(&x) {
                converged = true;
                break;
            }
            t *= 10.0;
        }
        let lambda = DVector::from_fn(m, |i, _| -1.0 / (t * self.cons[i].value(&x)));
        (x, lambda, nu, budget - newton_left, converged)
    }

    fn primal_residual(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.eq {
            Some((e, h)) => e * x - h,
            None => DVector::zeros(0),
        }
    }
}

/// Solves `[H E'; E 0] [dx; dnu] = [a; b]` with symmetric diagonal scaling of
/// `H` and growing regularization when the factorization fails.
fn solve_kkt(h: &DMatrix<f64>, a: &DVector<f64>, e: Option<&DMatrix<f64>>, b: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let p = e.map_or(0, |e| e.nrows());
    let d = DVector::from_fn(n, |i, _| {
        let v = h[(i, i)];
        if v > 1e-300 && v.is_finite() {
            1.0 / v.sqrt()
        } else {
            1.0
        }
    });
    let mut hs = h.clone();
    for i in 0..n {
        for j in 0..n {
            hs[(i, j)] *= d[i] * d[j];
        }
    }
    let scale = 1.0 + hs.diagonal().amax();
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut kkt = DMatrix::zeros(n + p, n + p);
        kkt.view_mut((0, 0), (n, n)).copy_from(&hs);
        for i in 0..n {
            kkt[(i, i)] += reg;
        }
        let mut rhs = DVector::zeros(n + p);
        rhs.rows_mut(0, n).copy_from(&a.component_mul(&d));
        if let Some(e) = e {
            let es = DMatrix::from_fn(p, n, |r, c| e[(r, c)] * d[c]);
            kkt.view_mut((n, 0), (p, n)).copy_from(&es);
            kkt.view_mut((0, n), (n, p)).copy_from(&es.transpose());
            for i in 0..p {
                kkt[(n + i, n + i)] -= reg;
            }
            rhs.rows_mut(n, p).copy_from(b);
        }
        if let Some(sol) = kkt.lu().solve(&rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                let dx = sol.rows(0, n).component_mul(&d);
                return Some((dx, sol.rows(n, p).clone_owned()));
            }
        }
        reg = if reg == 0.0 { 1e-12 * scale } else { reg * 100.0 };
    }
    None
}

/// Smallest slack of a start point that is used as given.
const CENTER_SLACK: f64 = 1e-3;

/// `min s  s.t.  f_i(x) - s <= 0,  -s - 1 <= 0`, stopping as soon as
/// `s < -depth` at a strictly feasible point.
fn phase_problem(prog: &ConvexProgram, cons: &[SmoothFn], x0: &DVector<f64>, depth: f64) -> Result<DVector<f64>> {
    let n = prog.n;
    let mut obj_q = DVector::zeros(n + 1);
    obj_q[n] = 1.0;
    let obj = SmoothFn::affine(obj_q, 0.0);
    let mut aug: Vec<SmoothFn> = cons
        .iter()
        .map(|c| {
            let mut f = c.pad(1);
            f.q[n] = -1.0;
            f
        })
        .collect();
    let mut lb = DVector::zeros(n + 1);
    lb[n] = -1.0;
    aug.push(SmoothFn::affine(lb, -1.0));
    let smax = cons.iter().map(|c| c.value(x0)).fold(f64::NEG_INFINITY, f64::max);
    let mut start = x0.clone().resize_vertically(n + 1, 0.0);
    start[n] = smax.abs().max(1.0) + smax;
    let eq_pad = prog
        .equalities
        .as_ref()
        .map(|(e, h)| (e.clone().resize_horizontally(n + 1, 0.0), h.clone()));
    let core = Core {
        obj: &obj,
        cons: &aug,
        eq: eq_pad.as_ref(),
        n: n + 1,
    };
    let opts = SolverOptions {
        tol: 1e-10,
        max_iter: 200,
    };
    let early = |z: &DVector<f64>| {
        z[n] < -depth && {
            let x = z.rows(0, n).clone_owned();
            cons.iter().all(|c| c.in_domain(&x) && c.value(&x) < 0.0)
        }
    };
    let (z, _, _, _, stop) = core.run(start, &opts, &early);
    let (z, stop) = match stop {
        Some(s) => (z, Some(s)),
        None => {
            let (zb, _, _, _, ok) = core.barrier(z, &opts);
            (zb, ok.then_some(Stop::Converged))
        }
    };
    let x = z.rows(0, n).clone_owned();
    match stop {
        Some(Stop::Early) => Ok(x),
        _ if early(&z) => Ok(x),
        Some(Stop::Converged) => Err(Error::Infeasible),
        None => Err(Error::MaxIter(opts.max_iter)),
    }
}

/// Like [`solve`] but reports a stalled solve as [`Error::MaxIter`].
pub fn solve_optimal(prog: &ConvexProgram, opts: &SolverOptions, x0: Option<&DVector<f64>>) -> Result<Solution> {
    let sol = solve(prog, opts, x0)?;
    match sol.status {
        Status::Optimal => Ok(sol),
        _ => Err(Error::MaxIter(sol.iterations)),
    }
}

/// Minimize the program from `x0` (or the origin).
pub fn solve(prog: &ConvexProgram, opts: &SolverOptions, x0: Option<&DVector<f64>>) -> Result<Solution> {
    prog.validate()?;
    let n = prog.n;
    let mut x = x0.cloned().unwrap_or_else(|| DVector::zeros(n));
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let all_terms = prog.objective.terms.iter().chain(prog.inequalities.iter().flat_map(|c| c.terms.iter()));
    let domain_ok = |x: &DVector<f64>| {
        prog.objective.in_domain(x) && prog.inequalities.iter().all(|c| c.in_domain(x))
    };
    if !domain_ok(&x) {
        let dom: Vec<SmoothFn> = all_terms
            .map(|t| {
                let (a, b) = t.domain_affine();
                SmoothFn::affine(-a.clone(), -b)
            })
            .collect();
        x = phase_problem(prog, &dom, &x, 0.0)?;
    }
    let worst = prog.inequalities.iter().map(|c| c.value(&x)).fold(f64::NEG_INFINITY, f64::max);
    let mut cons = prog.inequalities.clone();
    // keep objective terms in their domain during phase 1
    for t in &prog.objective.terms {
        let (a, b) = t.domain_affine();
        cons.push(SmoothFn::affine(-a.clone(), -b));
    }
    if !(worst < 0.0) {
        x = phase_problem(prog, &cons, &x, 0.0)?;
    } else if worst > -CENTER_SLACK {
        // starts hugging the boundary make the primal-dual iteration crawl;
        // move to a point with the largest uniform slack first
        if let Ok(c) = phase_problem(prog, &cons, &x, CENTER_SLACK) {
            x = c;
        }
    }
    let core = Core {
        obj: &prog.objective,
        cons: &prog.inequalities,
        eq: prog.equalities.as_ref(),
        n,
    };
    let (xb, lb, nb, used, ok) = core.barrier(x.clone(), opts);
    if ok {
        return Ok(Solution {
            objective: prog.objective.value(&xb),
            x: xb,
            lambda: lb,
            nu: nb,
            status: Status::Optimal,
            iterations: used,
        });
    }
    let (mut x, mut lambda, mut nu, iterations, stop) = core.run(x, opts, &|_| false);
    let status = match stop {
        Some(_) => Status::Optimal,
        None => Status::MaxIter,
    };
    if status == Status::MaxIter && prog.objective.value(&xb) < prog.objective.value(&x) {
        x = xb;
        lambda = lb;
        nu = nb;
    }
    Ok(Solution {
        objective: prog.objective.value(&x),
        x,
        lambda,
        nu,
        status,
        iterations,
    })
}
