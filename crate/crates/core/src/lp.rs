//! Small dense linear-programming solver.
//!
//! Solves `min c·x  s.t.  A x = b,  l <= x <= u` with a two-phase
//! bounded-variable primal simplex. Bounds may be infinite. Intended for the
//! few-hundred-variable programs produced by [`crate::dcopf`]; it keeps a
//! full tableau and recomputes basic values from the nonbasic ones each
//! iteration, then re-solves the final basis directly for accuracy.

use thiserror::Error;

const FEAS_TOL: f64 = 1e-8;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("variable {index} has invalid bounds [{lower}, {upper}]")]
    InvalidBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("constraint references variable {index}, but only {vars} exist")]
    UnknownVariable { index: usize, vars: usize },
    #[error("simplex did not converge within {iterations} iterations")]
    NumericalBreakdown { iterations: usize },
}

#[derive(Debug, Clone, Copy)]
struct Var {
    lower: f64,
    upper: f64,
    cost: f64,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
}

/// Equality-form LP under construction.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    vars: Vec<Var>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per equality row: the objective's sensitivity to its rhs.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index. Use infinities for open bounds.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.vars.push(Var { lower, upper, cost });
        self.vars.len() - 1
    }

    /// Adds `Σ coeff·x = rhs` and returns the row index. Repeated indices add up.
    pub fn add_eq(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> usize {
        self.rows.push(Row {
            coeffs: coeffs.to_vec(),
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        for (index, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan()
                || v.upper.is_nan()
                || v.lower > v.upper
                || v.lower == f64::INFINITY
                || v.upper == f64::NEG_INFINITY
            {
                return Err(LpError::InvalidBounds {
                    index,
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if !v.cost.is_finite() {
                return Err(LpError::NonFinite("objective"));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() {
                return Err(LpError::NonFinite("right-hand side"));
            }
            for &(index, a) in &r.coeffs {
                if index >= self.vars.len() {
                    return Err(LpError::UnknownVariable {
                        index,
                        vars: self.vars.len(),
                    });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite("constraint matrix"));
                }
            }
        }
        Ok(())
    }

    /// Largest absolute row violation of `x`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| {
                let lhs: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
                (lhs - r.rhs).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Lagrangian lower bound on the optimum for multipliers `y`.
    ///
    /// Valid for any `y`; equals the optimum for the duals of an optimal
    /// solution. May be `-inf` when `y` leaves an open bound unpriced.
    pub fn dual_bound(&self, y: &[f64]) -> f64 {
        let mut reduced: Vec<f64> = self.vars.iter().map(|v| v.cost).collect();
        let mut bound = 0.0;
        for (r, yi) in self.rows.iter().zip(y) {
            bound += r.rhs * yi;
            for &(j, a) in &r.coeffs {
                reduced[j] -= a * yi;
            }
        }
        for (v, d) in self.vars.iter().zip(reduced) {
            if d.abs() <= OPT_TOL {
                continue;
            }
            bound += if d > 0.0 { d * v.lower } else { d * v.upper };
        }
        bound
    }

    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        self.validate()?;
        Simplex::new(self).run()
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    lp.solve()
}

struct Simplex {
    m: usize,
    /// structural + artificial
    total: usize,
    structural: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    objective: Vec<f64>,
    /// B^{-1} [A | diag(sign)], rows by basis position
    tab: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    x: Vec<f64>,
    iterations: usize,
    cap: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.vars.len();
        let m = lp.rows.len();
        let total = n + m;
        let mut a = vec![vec![0.0; n]; m];
        for (i, r) in lp.rows.iter().enumerate() {
            for &(j, v) in &r.coeffs {
                a[i][j] += v;
            }
        }
        let b: Vec<f64> = lp.rows.iter().map(|r| r.rhs).collect();
        let mut lower = Vec::with_capacity(total);
        let mut upper = Vec::with_capacity(total);
        let mut x = vec![0.0; total];
        for (j, v) in lp.vars.iter().enumerate() {
            lower.push(v.lower);
            upper.push(v.upper);
            x[j] = 0.0f64.clamp(v.lower, v.upper);
        }
        let mut sign = vec![1.0; m];
        for i in 0..m {
            let residual = b[i] - (0..n).map(|j| a[i][j] * x[j]).sum::<f64>();
            if residual < 0.0 {
                sign[i] = -1.0;
            }
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }
        let mut tab = vec![vec![0.0; total]; m];
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            for j in 0..n {
                tab[i][j] = sign[i] * a[i][j];
            }
            tab[i][n + i] = 1.0;
            rhs[i] = sign[i] * b[i];
        }
        let mut is_basic = vec![false; total];
        let basis: Vec<usize> = (n..total).collect();
        for &j in &basis {
            is_basic[j] = true;
        }
        // phase-1 costs
        let mut cost = vec![0.0; total];
        for c in cost.iter_mut().skip(n) {
            *c = 1.0;
        }
        Self {
            m,
            total,
            structural: n,
            a,
            b,
            sign,
            lower,
            upper,
            cost,
            objective: lp.vars.iter().map(|v| v.cost).collect(),
            tab,
            rhs,
            basis,
            is_basic,
            x,
            iterations: 0,
            cap: 50 * total + 1000,
        }
    }

    fn update_basic_values(&mut self) {
        for i in 0..self.m {
            let mut v = self.rhs[i];
            for j in 0..self.total {
                if !self.is_basic[j] && self.x[j] != 0.0 {
                    v -= self.tab[i][j] * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn run(mut self) -> Result<LpOutcome, LpError> {
        self.optimize()?;
        let infeasibility: f64 = (self.structural..self.total).map(|j| self.x[j].abs()).sum();
        let scale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeasibility > FEAS_TOL * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // pin artificials at zero and install the real objective
        for j in self.structural..self.total {
            self.upper[j] = 0.0;
            if !self.is_basic[j] {
                self.x[j] = 0.0;
            }
        }
        self.cost = self.objective.clone();
        self.cost.resize(self.total, 0.0);
        if !self.optimize()? {
            return Ok(LpOutcome::Unbounded);
        }
        self.refine();
        let x: Vec<f64> = self.x[..self.structural].to_vec();
        let objective = x.iter().zip(&self.objective).map(|(a, c)| a * c).sum();
        Ok(LpOutcome::Optimal(LpSolution {
            x,
            objective,
            duals: self.duals(),
            iterations: self.iterations,
        }))
    }

    fn optimize(&mut self) -> Result<bool, LpError> {
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.cap {
                return Err(LpError::NumericalBreakdown {
                    iterations: self.iterations,
                });
            }
            self.update_basic_values();
            let bland = degenerate >= DEGENERATE_STREAK;
            match self.step(bland, &mut degenerate) {
                Step::Optimal => return Ok(true),
                Step::Unbounded => return Ok(false),
                Step::Moved => self.iterations += 1,
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let mut d = self.cost[j];
        for i in 0..self.m {
            let t = self.tab[i][j];
            if t != 0.0 {
                d -= self.cost[self.basis[i]] * t;
            }
        }
        d
    }

    fn step(&mut self, bland: bool, degenerate: &mut usize) -> Step {
        let mut entering: Option<(usize, f64, f64)> = None; // (j, dir, |d|)
        for j in 0..self.total {
            if self.is_basic[j] || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let dir = if d < -OPT_TOL && self.x[j] < self.upper[j] {
                1.0
            } else if d > OPT_TOL && self.x[j] > self.lower[j] {
                -1.0
            } else {
                continue;
            };
            let better = match entering {
                None => true,
                Some((_, _, best)) => !bland && d.abs() > best,
            };
            if better {
                entering = Some((j, dir, d.abs()));
            }
            if bland && entering.is_some() {
                break;
            }
        }
        let Some((j, dir, _)) = entering else {
            return Step::Optimal;
        };

        let mut limit = if dir > 0.0 {
            self.upper[j] - self.x[j]
        } else {
            self.x[j] - self.lower[j]
        };
        let mut leave: Option<(usize, f64)> = None; // (row, bound value hit)
        let mut leave_alpha = 0.0f64;
        for i in 0..self.m {
            let alpha = dir * self.tab[i][j];
            let bj = self.basis[i];
            let xb = self.x[bj];
            let (room, bound) = if alpha > PIVOT_TOL {
                ((xb - self.lower[bj]).max(0.0) / alpha, self.lower[bj])
            } else if alpha < -PIVOT_TOL {
                ((self.upper[bj] - xb).max(0.0) / -alpha, self.upper[bj])
            } else {
                continue;
            };
            if !room.is_finite() {
                continue;
            }
            let take = match leave {
                None => room <= limit,
                Some((r, _)) => {
                    if room < limit - 1e-12 {
                        true
                    } else if room <= limit + 1e-12 {
                        if bland {
                            self.basis[i] < self.basis[r]
                        } else {
                            alpha.abs() > leave_alpha
                        }
                    } else {
                        false
                    }
                }
            };
            if take {
                limit = room.min(limit);
                leave = Some((i, bound));
                leave_alpha = alpha.abs();
            }
        }
        if !limit.is_finite() {
            return Step::Unbounded;
        }
        if limit <= 1e-12 {
            *degenerate += 1;
        } else {
            *degenerate = 0;
        }
        match leave {
            None => {
                // bound flip
                self.x[j] = if dir > 0.0 {
                    self.upper[j]
                } else {
                    self.lower[j]
                };
            }
            Some((r, bound)) => {
                let old = self.basis[r];
                self.x[j] += dir * limit;
                self.pivot(r, j);
                self.x[old] = bound;
            }
        }
        Step::Moved
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.tab[r][j];
        for v in self.tab[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.tab[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i][j];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in self.tab[i].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.tab[i][j] = 0.0;
            self.rhs[i] -= f * pivot_rhs;
        }
        let old = self.basis[r];
        self.is_basic[old] = false;
        self.is_basic[j] = true;
        self.basis[r] = j;
    }

    fn column(&self, j: usize) -> Vec<f64> {
        if j < self.structural {
            (0..self.m).map(|i| self.a[i][j]).collect()
        } else {
            let mut c = vec![0.0; self.m];
            c[j - self.structural] = self.sign[j - self.structural];
            c
        }
    }

    /// Re-solves `B x_B = b - N x_N` from the original data.
    fn refine(&mut self) {
        if self.m == 0 {
            return;
        }
        let mut rhs = self.b.clone();
        for j in 0..self.total {
            if !self.is_basic[j] && self.x[j] != 0.0 {
                for (i, v) in self.column(j).into_iter().enumerate() {
                    rhs[i] -= v * self.x[j];
                }
            }
        }
        let cols: Vec<Vec<f64>> = self.basis.iter().map(|&j| self.column(j)).collect();
        let mut mat: Vec<Vec<f64>> = (0..self.m)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        if let Some(xb) = gauss_solve(&mut mat, &mut rhs) {
            for (k, &j) in self.basis.iter().enumerate() {
                self.x[j] = xb[k];
            }
        }
    }

    fn duals(&self) -> Vec<f64> {
        (0..self.m)
            .map(|k| {
                let col = self.structural + k;
                let mut y = 0.0;
                for i in 0..self.m {
                    y += self.cost[self.basis[i]] * self.tab[i][col];
                }
                y * self.sign[k]
            })
            .collect()
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn gauss_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let (top, bottom) = a.split_at_mut(r);
            for (x, y) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * y;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    fn optimal(lp: &LinearProgram) -> LpSolution {
        lp.solve().unwrap().optimal().expect("optimal")
    }

    #[test]
    fn textbook_program() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, INF, -3.0);
        let y = lp.add_var(0.0, INF, -5.0);
        let s1 = lp.add_var(0.0, INF, 0.0);
        let s2 = lp.add_var(0.0, INF, 0.0);
        let s3 = lp.add_var(0.0, INF, 0.0);
        lp.add_eq(&[(x, 1.0), (s1, 1.0)], 4.0);
        lp.add_eq(&[(y, 2.0), (s2, 1.0)], 12.0);
        lp.add_eq(&[(x, 3.0), (y, 2.0), (s3, 1.0)], 18.0);
        let sol = optimal(&lp);
        assert!((sol.x[x] - 2.0).abs() < 1e-9);
        assert!((sol.x[y] - 6.0).abs() < 1e-9);
        assert!((sol.objective + 36.0).abs() < 1e-9);
        // shadow prices of the binding rows
        assert!((sol.duals[1] + 1.5).abs() < 1e-9);
        assert!((sol.duals[2] + 1.0).abs() < 1e-9);
        assert!(sol.duals[0].abs() < 1e-9);
    }

    #[test]
    fn bounds_without_rows() {
        let mut lp = LinearProgram::new();
        lp.add_var(-2.0, 3.0, 1.0);
        lp.add_var(-2.0, 3.0, -1.0);
        lp.add_var(1.0, 1.0, 5.0);
        let sol = optimal(&lp);
        assert_eq!(sol.x, vec![-2.0, 3.0, 1.0]);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn free_variables_and_negative_rhs() {
        // a - b = -3, a + b = 1 with both free
        let mut lp = LinearProgram::new();
        let a = lp.add_var(-INF, INF, 0.0);
        let b = lp.add_var(-INF, INF, 0.0);
        lp.add_eq(&[(a, 1.0), (b, -1.0)], -3.0);
        lp.add_eq(&[(a, 1.0), (b, 1.0)], 1.0);
        let sol = optimal(&lp);
        assert!((sol.x[a] + 1.0).abs() < 1e-12);
        assert!((sol.x[b] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 1.0, 0.0);
        lp.add_eq(&[(x, 1.0)], 2.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, INF, -1.0);
        let y = lp.add_var(0.0, INF, 0.0);
        lp.add_eq(&[(x, 1.0), (y, -1.0)], 0.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn rejects_bad_input() {
        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 0.0, 0.0);
        assert!(matches!(lp.solve(), Err(LpError::InvalidBounds { .. })));
        let mut lp = LinearProgram::new();
        lp.add_var(0.0, 1.0, 0.0);
        lp.add_eq(&[(3, 1.0)], 0.0);
        assert!(matches!(lp.solve(), Err(LpError::UnknownVariable { .. })));
        let mut lp = LinearProgram::new();
        lp.add_var(0.0, 1.0, f64::NAN);
        assert!(matches!(lp.solve(), Err(LpError::NonFinite(_))));
    }

    #[test]
    fn redundant_rows_are_handled() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0, 10.0, -1.0);
        let y = lp.add_var(0.0, 10.0, -1.0);
        lp.add_eq(&[(x, 1.0), (y, 1.0)], 5.0);
        lp.add_eq(&[(x, 2.0), (y, 2.0)], 10.0);
        let sol = optimal(&lp);
        assert!((sol.objective + 5.0).abs() < 1e-9);
    }

    /// Random feasible programs: check primal feasibility and the KKT sign
    /// conditions on the reduced costs implied by the returned duals.
    type Program = (Vec<Vec<f64>>, Vec<f64>, Vec<(f64, f64)>, Vec<f64>);

    fn arb_program() -> impl Strategy<Value = Program> {
        (2usize..7, 1usize..5).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(-3i32..=3, n), m),
                proptest::collection::vec(-5i32..=5, n),
                proptest::collection::vec((-4i32..=0, 0i32..=4), n),
                proptest::collection::vec(0.0f64..1.0, n),
            )
                .prop_map(|(a, c, bounds, t)| {
                    let a: Vec<Vec<f64>> = a
                        .into_iter()
                        .map(|r| r.into_iter().map(f64::from).collect())
                        .collect();
                    let bounds: Vec<(f64, f64)> = bounds
                        .into_iter()
                        .map(|(l, u)| (f64::from(l), f64::from(u)))
                        .collect();
                    let x0: Vec<f64> = bounds
                        .iter()
                        .zip(&t)
                        .map(|((l, u), t)| l + (u - l) * t)
                        .collect();
                    let c = c.into_iter().map(f64::from).collect();
                    (a, c, bounds, x0)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]
        #[test]
        fn kkt_conditions_hold((a, c, bounds, x0) in arb_program()) {
            let mut lp = LinearProgram::new();
            for (j, (l, u)) in bounds.iter().enumerate() {
                lp.add_var(*l, *u, c[j]);
            }
            let mut b = Vec::new();
            for row in &a {
                let rhs: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
                let coeffs: Vec<_> = row.iter().copied().enumerate().collect();
                lp.add_eq(&coeffs, rhs);
                b.push(rhs);
            }
            let sol = optimal(&lp);
            prop_assert!((lp.dual_bound(&sol.duals) - sol.objective).abs() < 1e-6);
            prop_assert!(lp.residual(&sol.x) < 1e-7);
            let ref_obj: f64 = c.iter().zip(&x0).map(|(c, x)| c * x).sum();
            prop_assert!(sol.objective <= ref_obj + 1e-7);
            for (i, row) in a.iter().enumerate() {
                let lhs: f64 = row.iter().zip(&sol.x).map(|(a, x)| a * x).sum();
                prop_assert!((lhs - b[i]).abs() < 1e-7, "row {} residual {}", i, lhs - b[i]);
            }
            for (j, (l, u)) in bounds.iter().enumerate() {
                let x = sol.x[j];
                prop_assert!(x >= l - 1e-7 && x <= u + 1e-7);
                let d = c[j] - (0..a.len()).map(|i| a[i][j] * sol.duals[i]).sum::<f64>();
                if d > 1e-6 {
                    prop_assert!((x - l).abs() < 1e-7, "var {} d {} x {}", j, d, x);
                }
                if d < -1e-6 {
                    prop_assert!((x - u).abs() < 1e-7, "var {} d {} x {}", j, d, x);
                }
            }
        }
    }
}
