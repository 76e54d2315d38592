//! Dense linear algebra helpers and the least-squares driver used for
//! witness search and group-law checks.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};

/// Numeric rank with a tolerance relative to the largest singular value.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * top).count()
}

/// Smallest singular value divided by the largest.
pub fn condition_ratio(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let bottom = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if top == 0.0 {
        0.0
    } else {
        bottom / top
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Residual and Jacobian callbacks for [`least_squares`].
pub trait Residuals {
    fn residuals(&self, x: &[f64]) -> Option<Vec<f64>>;

    /// Defaults to forward differences.
    fn jacobian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let r0 = self.residuals(x)?;
        let mut j = DMatrix::zeros(r0.len(), x.len());
        let mut xp = x.to_vec();
        for c in 0..x.len() {
            let h = 1e-7 * (1.0 + x[c].abs());
            xp[c] = x[c] + h;
            let r1 = self.residuals(&xp)?;
            xp[c] = x[c];
            for r in 0..r0.len() {
                j[(r, c)] = (r1[r] - r0[r]) / h;
            }
        }
        Some(j)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub residual_inf: f64,
    pub evaluations: usize,
}

struct Adapter<'a, R: Residuals> {
    inner: &'a R,
    x: DVector<f64>,
}

impl<R: Residuals> LeastSquaresProblem<f64, Dyn, Dyn> for Adapter<'_, R> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.inner.residuals(self.x.as_slice()).map(DVector::from_vec)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        self.inner.jacobian(self.x.as_slice())
    }
}

/// Levenberg-Marquardt from `x0`, capped at `max_iter * (n + 1)` residual
/// evaluations.
pub fn least_squares<R: Residuals>(problem: &R, x0: &[f64], max_iter: usize) -> SolveReport {
    let adapter = Adapter {
        inner: problem,
        x: DVector::from_column_slice(x0),
    };
    let solver = LevenbergMarquardt::new()
        .with_patience(max_iter.max(1))
        .with_tol(1e-15);
    let (out, report) = solver.minimize(adapter);
    let x = out.x.as_slice().to_vec();
    let residual_inf = problem
        .residuals(&x)
        .map(|r| inf_norm(&r))
        .unwrap_or(f64::INFINITY);
    SolveReport {
        x,
        residual_inf,
        evaluations: report.number_of_evaluations,
    }
}

/// Runs [`least_squares`] from each start in turn and returns the first
/// report meeting `tol`, or the best one seen.
pub fn multi_start<R: Residuals>(problem: &R, starts: &[Vec<f64>], max_iter: usize, tol: f64) -> Option<SolveReport> {
    let mut best: Option<SolveReport> = None;
    for s in starts {
        let rep = least_squares(problem, s, max_iter);
        if rep.residual_inf <= tol {
            return Some(rep);
        }
        if best.as_ref().map_or(true, |b| rep.residual_inf < b.residual_inf) {
            best = Some(rep);
        }
    }
    best
}
