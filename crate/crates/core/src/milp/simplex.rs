//! Dense two-phase primal simplex over bounded variables.
//!
//! Every row is brought to `a·x + s = b` with a slack whose bounds encode
//! the relation. Phase 1 starts from a full artificial basis signed by the
//! initial residual. Entering and leaving choices follow Bland's rule, so
//! degenerate cycling cannot occur.

use super::{MilpModel, Relation};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const RATIO_TIE: f64 = 1e-12;
const MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    /// Iteration cap reached or the final point failed re-verification.
    Numerical(String),
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal { .. })
    }
}

/// Solves the LP relaxation with the model's own bounds.
pub fn solve_lp_relaxation(model: &MilpModel) -> LpOutcome {
    let lo: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let hi: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
    solve_lp_with_bounds(model, &lo, &hi)
}

/// Solves the LP relaxation with variable bounds replaced by `lo`/`hi`.
pub fn solve_lp_with_bounds(model: &MilpModel, lo: &[f64], hi: &[f64]) -> LpOutcome {
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return LpOutcome::Infeasible;
    }
    let mut t = Tableau::build(model, lo, hi);
    match t.run() {
        Ok(()) => {}
        Err(Stop::Infeasible) => return LpOutcome::Infeasible,
        Err(Stop::Unbounded) => return LpOutcome::Unbounded,
        Err(Stop::Limit) => return LpOutcome::Numerical("simplex iteration limit".into()),
    }
    let n = model.num_vars();
    let mut x: Vec<f64> = t.x[..n].to_vec();
    for (j, v) in x.iter_mut().enumerate() {
        *v = v.clamp(lo[j], hi[j]);
    }
    for c in model.constraints() {
        let viol = c.violation(&x);
        if viol > 1e-6 * (1.0 + c.rhs.abs()) {
            return LpOutcome::Numerical(format!("row `{}` violated by {viol} after simplex", c.name));
        }
    }
    let objective = model.objective_value(&x);
    LpOutcome::Optimal { x, objective }
}

enum Stop {
    Infeasible,
    Unbounded,
    Limit,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable sitting at zero.
    Free,
}

struct Tableau {
    m: usize,
    /// Structural plus slack columns; artificials follow.
    n_real: usize,
    /// `B⁻¹A`, row-major, `m × (n_real + m)`.
    t: Vec<f64>,
    /// Original rows `[A | I]`, kept for recomputing basic values.
    a: Vec<f64>,
    b: Vec<f64>,
    art_sign: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    cost: Vec<f64>,
    d: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    fn build(model: &MilpModel, lo: &[f64], hi: &[f64]) -> Self {
        let n = model.num_vars();
        let m = model.num_constraints();
        let n_real = n + m;
        let cols = n_real + m;
        let mut a = vec![0.0; m * n_real];
        let mut b = vec![0.0; m];
        let mut vlo = lo.to_vec();
        let mut vhi = hi.to_vec();
        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, coef) in &c.terms {
                a[i * n_real + v.0] += coef;
            }
            a[i * n_real + n + i] = 1.0;
            b[i] = c.rhs;
            let (sl, sh) = match c.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            vlo.push(sl);
            vhi.push(sh);
        }
        let mut x = vec![0.0; cols];
        let mut status = vec![Status::Free; cols];
        for j in 0..n_real {
            (x[j], status[j]) = if vlo[j].is_finite() {
                (vlo[j], Status::AtLower)
            } else if vhi[j].is_finite() {
                (vhi[j], Status::AtUpper)
            } else {
                (0.0, Status::Free)
            };
        }
        let mut art_sign = vec![1.0; m];
        let mut t = vec![0.0; m * cols];
        for i in 0..m {
            let row = &a[i * n_real..(i + 1) * n_real];
            let resid = b[i] - row.iter().zip(&x[..n_real]).map(|(p, q)| p * q).sum::<f64>();
            let sign = if resid < 0.0 { -1.0 } else { 1.0 };
            art_sign[i] = sign;
            for j in 0..n_real {
                t[i * cols + j] = sign * row[j];
            }
            t[i * cols + n_real + i] = 1.0;
            x[n_real + i] = resid.abs();
            status[n_real + i] = Status::Basic;
            vlo.push(0.0);
            vhi.push(f64::INFINITY);
        }
        let mut cost = vec![0.0; cols];
        for &(v, coef) in model.objective() {
            cost[v.0] = coef;
        }
        Tableau {
            m,
            n_real,
            t,
            a,
            b,
            art_sign,
            lo: vlo,
            hi: vhi,
            x,
            basis: (n_real..cols).collect(),
            status,
            cost,
            d: vec![0.0; cols],
            iterations: 0,
        }
    }

    fn cols(&self) -> usize {
        self.n_real + self.m
    }

    fn run(&mut self) -> Result<(), Stop> {
        let cols = self.cols();
        let phase1: Vec<f64> = (0..cols).map(|j| if j >= self.n_real { 1.0 } else { 0.0 }).collect();
        self.price(&phase1);
        self.iterate()?;
        self.refresh_basics();
        let infeas: f64 = (self.n_real..cols).map(|j| self.x[j]).sum();
        let scale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeas > FEAS_TOL * scale {
            return Err(Stop::Infeasible);
        }
        for j in self.n_real..cols {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
            if self.status[j] != Status::Basic {
                self.status[j] = Status::AtLower;
                self.x[j] = 0.0;
            }
        }
        self.drive_out_artificials();
        let cost = self.cost.clone();
        self.price(&cost);
        self.iterate()?;
        self.refresh_basics();
        Ok(())
    }

    /// Reduced costs `d = c − c_B·B⁻¹A`.
    fn price(&mut self, c: &[f64]) {
        let cols = self.cols();
        self.d = c.to_vec();
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * cols..(i + 1) * cols];
                for (dj, tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
    }

    fn iterate(&mut self) -> Result<(), Stop> {
        let cols = self.cols();
        loop {
            self.iterations += 1;
            if self.iterations > MAX_ITER {
                return Err(Stop::Limit);
            }
            let mut entering = None;
            for j in 0..cols {
                if self.lo[j] == self.hi[j] {
                    continue;
                }
                let dir = match self.status[j] {
                    Status::Basic => continue,
                    Status::AtLower if self.d[j] < -COST_TOL => 1.0,
                    Status::AtUpper if self.d[j] > COST_TOL => -1.0,
                    Status::Free if self.d[j] < -COST_TOL => 1.0,
                    Status::Free if self.d[j] > COST_TOL => -1.0,
                    _ => continue,
                };
                entering = Some((j, dir));
                break;
            }
            let Some((j, dir)) = entering else {
                return Ok(());
            };

            let mut step = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.m {
                let tij = self.t[i * cols + j];
                if tij.abs() <= PIVOT_TOL {
                    continue;
                }
                let bv = self.basis[i];
                let rate = -dir * tij;
                let (limit, to_upper) = if rate < 0.0 {
                    if !self.lo[bv].is_finite() {
                        continue;
                    }
                    (((self.x[bv] - self.lo[bv]) / -rate).max(0.0), false)
                } else {
                    if !self.hi[bv].is_finite() {
                        continue;
                    }
                    (((self.hi[bv] - self.x[bv]) / rate).max(0.0), true)
                };
                match leave {
                    Some((r, _)) if limit >= step - RATIO_TIE => {
                        if limit <= step + RATIO_TIE && bv < self.basis[r] {
                            leave = Some((i, to_upper));
                        }
                    }
                    _ => {
                        step = limit;
                        leave = Some((i, to_upper));
                    }
                }
            }
            let span = self.hi[j] - self.lo[j];
            if span.is_finite() && span <= step + RATIO_TIE {
                self.shift(j, dir * span);
                self.status[j] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                continue;
            }
            let Some((r, to_upper)) = leave else {
                return Err(Stop::Unbounded);
            };
            self.shift(j, dir * step);
            let bv = self.basis[r];
            self.x[bv] = if to_upper { self.hi[bv] } else { self.lo[bv] };
            self.status[bv] = if to_upper { Status::AtUpper } else { Status::AtLower };
            self.pivot(r, j);
        }
    }

    /// Moves nonbasic `j` by `delta` and updates basic values.
    fn shift(&mut self, j: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        let cols = self.cols();
        self.x[j] += delta;
        for i in 0..self.m {
            let tij = self.t[i * cols + j];
            if tij != 0.0 {
                self.x[self.basis[i]] -= tij * delta;
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols();
        let p = self.t[r * cols + j];
        for k in 0..cols {
            self.t[r * cols + k] /= p;
        }
        self.t[r * cols + j] = 1.0;
        let pivot_row: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * cols..(i + 1) * cols];
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            row[j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for (v, pr) in self.d.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            self.d[j] = 0.0;
        }
        self.basis[r] = j;
        self.status[j] = Status::Basic;
    }

    /// Replaces zero-valued basic artificials by real columns where a
    /// usable pivot exists. Rows without one are redundant.
    fn drive_out_artificials(&mut self) {
        let cols = self.cols();
        for r in 0..self.m {
            if self.basis[r] < self.n_real {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n_real {
                if self.status[j] == Status::Basic {
                    continue;
                }
                let v = self.t[r * cols + j].abs();
                if v > 1e-7 && best.is_none_or(|(_, b)| v > b * 10.0) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let bv = self.basis[r];
                self.x[bv] = 0.0;
                self.status[bv] = Status::AtLower;
                self.pivot(r, j);
            }
        }
    }

    /// Recomputes `x_B = B⁻¹(b − N·x_N)` from the original rows. The
    /// artificial columns of the tableau hold `B⁻¹` up to their sign.
    fn refresh_basics(&mut self) {
        let cols = self.cols();
        let mut resid = self.b.clone();
        for (i, r) in resid.iter_mut().enumerate() {
            let row = &self.a[i * self.n_real..(i + 1) * self.n_real];
            for j in 0..self.n_real {
                if self.status[j] != Status::Basic {
                    *r -= row[j] * self.x[j];
                }
            }
        }
        // Nonbasic artificials sit at zero and contribute nothing.
        for i in 0..self.m {
            let mut v = 0.0;
            for (k, rk) in resid.iter().enumerate() {
                v += self.t[i * cols + self.n_real + k] * self.art_sign[k] * rk;
            }
            self.x[self.basis[i]] = v;
        }
    }
}
