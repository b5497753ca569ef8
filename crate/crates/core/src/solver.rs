//! Localized solutions of the boundary-law equation `x = Q∗x^d`.
//!
//! For a localization set `A` the unknown splits as `x = x0 ⊔ x1`. The inner
//! map `F_{x1}(x0) = (Q∗(x0^d ⊔ x1^d))|_{A^c}` is a monotone contraction on a
//! small ball and is iterated from `x0 = 0`. The outer map
//! `G(x1) = ψ_d((q∗(ξ0(x1)^d ⊔ x1^d))|_A)`, with `q = Q − 1_0`, is
//! entrywise decreasing, so its orbit from `1_A` alternates between a
//! decreasing upper sequence and an increasing lower sequence. The gap
//! between the two is a computable certificate.

use serde::Serialize;

use crate::check::{first_failure, BoundCheck};
use crate::constants::{psi_d, solve_rq, ModelConstants};
use crate::error::{Error, Result};
use crate::potentials::{DeviationNorm, TransferOperator, DEFAULT_TAIL_TOLERANCE};
use crate::seqspace::{lp_norm, GroupSpace, Partition, SeqFn};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub inner: f64,
    pub outer: f64,
    pub max_iter: usize,
    /// Largest accepted discarded tail of `Q` in the `(d+1)/2`-norm.
    pub tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { inner: 1e-13, outer: 1e-11, max_iter: 100_000, tail: DEFAULT_TAIL_TOLERANCE }
    }
}

#[derive(Clone, Debug)]
pub struct LocalizationProblem {
    d: u32,
    q: TransferOperator,
    partition: Partition,
    tol: Tolerances,
    deviation: DeviationNorm,
    constants: ModelConstants,
    r_q: f64,
}

/// Fixed point of the inner map together with its convergence history.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InnerSolution {
    /// Values on `A^c`, in [`Partition::outside`] order.
    pub x0: Vec<f64>,
    pub iterations: usize,
    /// `‖x0^{k+1} − x0^k‖_{d+1}` for every step.
    pub changes: Vec<f64>,
}

/// Outcome of the alternating outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OuterSolution {
    /// Midpoint of the final bracket, on `A`.
    pub x1: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub bracket_width: f64,
    pub iterations: usize,
    pub inner_iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryLawSolution {
    pub d: u32,
    pub localization: Vec<i64>,
    pub xbar: SeqFn,
    pub epsilon: DeviationNorm,
    pub constants: ModelConstants,
    pub r_q: f64,
    pub residual: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub bracket_width: f64,
    pub certificate: Vec<BoundCheck>,
}

impl LocalizationProblem {
    pub fn new(d: u32, q: TransferOperator, a: &[i64], tol: Tolerances) -> Result<Self> {
        let space = q.space();
        let partition = Partition::new(space, a)?;
        let n = partition.len();
        if n == 0 || n >= space.size() {
            return Err(Error::InvalidInput(format!(
                "localization set must have between 1 and {} elements, got {n}",
                space.size() - 1
            )));
        }
        let constants = ModelConstants::new(d, n as u32)?;
        let deviation = q.deviation_norm_with_tolerance(d, tol.tail)?;
        if deviation.epsilon > constants.eta {
            return Err(Error::ThresholdExceeded {
                measured: deviation.epsilon,
                required: constants.eta,
            });
        }
        let r_q = solve_rq(d, n as u32, deviation.epsilon)?;
        Ok(LocalizationProblem { d, q, partition, tol, deviation, constants, r_q })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn operator(&self) -> &TransferOperator {
        &self.q
    }

    pub fn space(&self) -> GroupSpace {
        self.q.space()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    pub fn epsilon(&self) -> f64 {
        self.deviation.epsilon
    }

    pub fn constants(&self) -> &ModelConstants {
        &self.constants
    }

    pub fn r_q(&self) -> f64 {
        self.r_q
    }

    /// Upper bound `d ‖Q‖_{(d+1)/2} r_q^{d−1}` on the Lipschitz constant of
    /// the inner map.
    pub fn contraction_bound(&self) -> f64 {
        let s = (self.d as f64 + 1.0) / 2.0;
        let q_norm = (1.0 + self.epsilon().powf(s)).powf(1.0 / s);
        self.d as f64 * q_norm * self.r_q.powi(self.d as i32 - 1)
    }

    fn q_conv_pow(&self, x: &SeqFn) -> Result<SeqFn> {
        self.q.table().convolve(&x.pointwise_pow(self.d)?)
    }

    /// `ξ0(x1)`: the fixed point of `F_{x1}` in the ball of radius `r_q`.
    pub fn inner_fixed_point(&self, x1: &[f64]) -> Result<InnerSolution> {
        let p = self.d as f64 + 1.0;
        let outside = self.partition.outside();
        let mut x0 = vec![0.0; outside.len()];
        let mut changes = Vec::new();
        for it in 1..=self.tol.max_iter {
            let x = self.partition.splice(&x0, x1)?;
            let next = self.q_conv_pow(&x)?.restrict(outside);
            let diff: Vec<f64> = next.iter().zip(&x0).map(|(a, b)| a - b).collect();
            let change = lp_norm(&diff, p)?;
            let relative = next
                .iter()
                .zip(&diff)
                .filter(|(v, _)| **v > 0.0)
                .fold(0.0_f64, |m, (v, dv)| m.max(dv.abs() / v));
            changes.push(change);
            x0 = next;
            if change < self.tol.inner && relative < self.tol.inner {
                return Ok(InnerSolution { x0, iterations: it, changes });
            }
        }
        Err(Error::IterationLimit {
            stage: "inner",
            iterations: self.tol.max_iter,
            last_change: changes.last().copied().unwrap_or(f64::NAN),
        })
    }

    /// `q∗(x0^d ⊔ x1^d)` restricted to `A`, i.e. `(Q∗x^d − x^d)|_A`.
    fn outer_argument(&self, x0: &[f64], x1: &[f64]) -> Result<Vec<f64>> {
        let x = self.partition.splice(x0, x1)?;
        let conv = self.q_conv_pow(&x)?;
        Ok(self
            .partition
            .inside()
            .iter()
            .zip(x1)
            .map(|(&i, &v)| conv.values()[i] - v.powi(self.d as i32))
            .collect())
    }

    /// One application of `G`; also returns the inner iteration count.
    pub fn outer_map(&self, x1: &[f64]) -> Result<(Vec<f64>, usize)> {
        let inner = self.inner_fixed_point(x1)?;
        let arg = self.outer_argument(&inner.x0, x1)?;
        let mu = self.constants.mu;
        let mut out = Vec::with_capacity(arg.len());
        for s in arg {
            // Rounding can push an exact zero slightly negative.
            let s = if s < 0.0 && s > -1e-15 { 0.0 } else { s };
            if !(0.0..=mu).contains(&s) {
                return Err(Error::Domain { function: "psi_d", value: s });
            }
            out.push(psi_d(self.d, s)?);
        }
        Ok((out, inner.iterations))
    }

    /// Alternating iteration of `G` from `1_A` until the upper and lower
    /// iterates meet within `tol.outer` or stop approaching each other.
    pub fn outer_iteration(&self) -> Result<OuterSolution> {
        let n = self.partition.len();
        let mut upper = vec![1.0; n];
        let (mut lower, mut inner_total) = self.outer_map(&upper)?;
        let mut width = sup_distance(&upper, &lower);
        let mut stalled = 0;
        let mut iterations = 1;
        while width >= self.tol.outer {
            if iterations >= self.tol.max_iter {
                return Err(Error::IterationLimit {
                    stage: "outer",
                    iterations,
                    last_change: width,
                });
            }
            let (next_upper, k1) = self.outer_map(&lower)?;
            let (next_lower, k2) = self.outer_map(&next_upper)?;
            inner_total += k1 + k2;
            iterations += 2;
            upper = next_upper;
            lower = next_lower;
            let next_width = sup_distance(&upper, &lower);
            if next_width >= width * (1.0 - 1e-9) {
                stalled += 1;
                if stalled >= 3 {
                    width = next_width;
                    break;
                }
            } else {
                stalled = 0;
            }
            width = next_width;
        }
        let x1 = upper.iter().zip(&lower).map(|(u, l)| 0.5 * (u + l)).collect();
        Ok(OuterSolution {
            x1,
            upper,
            lower,
            bracket_width: width,
            iterations,
            inner_iterations: inner_total,
        })
    }

    /// Solves and certifies. Fails with [`Error::BracketOpen`] when the
    /// monotone bracket does not close and with
    /// [`Error::PostconditionViolation`] when a certified bound fails.
    pub fn solve(&self) -> Result<BoundaryLawSolution> {
        let sol = self.solve_uncertified()?;
        if let Some(c) = first_failure(&sol.certificate) {
            return Err(Error::PostconditionViolation(format!(
                "{}: {} {} {}",
                c.name, c.measured, c.relation, c.bound
            )));
        }
        Ok(sol)
    }

    /// As [`solve`](Self::solve) but returns the solution with failing
    /// certificate entries instead of an error.
    pub fn solve_uncertified(&self) -> Result<BoundaryLawSolution> {
        let outer = self.outer_iteration()?;
        if outer.bracket_width >= self.tol.outer {
            return Err(Error::BracketOpen { width: outer.bracket_width });
        }
        let inner = self.inner_fixed_point(&outer.x1)?;
        let xbar = self.partition.splice(&inner.x0, &outer.x1)?;
        let residual = residual(&xbar, &self.q, self.d)?;
        let mut sol = BoundaryLawSolution {
            d: self.d,
            localization: self.partition.elements(),
            xbar,
            epsilon: self.deviation,
            constants: self.constants.clone(),
            r_q: self.r_q,
            residual,
            inner_iterations: outer.inner_iterations + inner.iterations,
            outer_iterations: outer.iterations,
            bracket_width: outer.bracket_width,
            certificate: Vec::new(),
        };
        sol.certificate = self.certify(&sol)?;
        Ok(sol)
    }

    /// Evaluates every postcondition on `sol` with the measured `ε`.
    pub fn certify(&self, sol: &BoundaryLawSolution) -> Result<Vec<BoundCheck>> {
        let d = self.d;
        let p = d as f64 + 1.0;
        let c = &self.constants;
        let eps = self.epsilon();
        let x = &sol.xbar;
        let x0 = self.partition.restrict_outside(x);
        let x1 = self.partition.restrict_inside(x);
        let sup0 = lp_norm(&x0, f64::INFINITY)?;
        let norm0 = lp_norm(&x0, p)?;
        let min1 = x1.iter().cloned().fold(f64::INFINITY, f64::min);
        let max1 = x1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let degenerate = eps == 0.0;

        let mut checks = vec![
            BoundCheck::lt("residual", sol.residual, 10.0 * self.tol.outer),
            BoundCheck::le("outside sup <= outside norm", sup0, norm0),
            if degenerate {
                BoundCheck::le("outside norm < rho", norm0, c.rho)
            } else {
                BoundCheck::lt("outside norm < rho", norm0, c.rho)
            },
            BoundCheck::lt("rho < lambda", c.rho, c.lambda),
            BoundCheck::gt("inside min > lambda", min1, c.lambda),
            if degenerate {
                BoundCheck::le("inside max < 1", max1, 1.0)
            } else {
                BoundCheck::lt("inside max < 1", max1, 1.0)
            },
            BoundCheck::le("outside norm in inner ball", norm0, self.r_q * (1.0 + 1e-12)),
            BoundCheck::le("outside norm <= (rho/eta) eps", norm0, c.rho / c.eta * eps),
            BoundCheck::le("1 - inside <= cap slope * eps", 1.0 - min1, c.cap_slope() * eps),
        ];

        // Pointwise lower bound on A^c by the Q-mass seen from A.
        let space = self.space();
        let factor = 1.0 - c.outside_slope() * eps;
        let mut worst = f64::INFINITY;
        let mut worst_bound = 0.0;
        for (&i, &v) in self.partition.outside().iter().zip(&x0) {
            let mass: f64 = self
                .partition
                .inside()
                .iter()
                .filter_map(|&j| space.diff_index(i, j))
                .map(|k| self.q.table().values()[k])
                .sum();
            let bound = factor * mass;
            if v - bound < worst - worst_bound {
                worst = v;
                worst_bound = bound;
            }
        }
        if worst.is_finite() {
            checks.push(BoundCheck::ge("outside pointwise lower bound", worst, worst_bound));
        }

        let arg = self.outer_argument(&x0, &x1)?;
        let arg_min = arg.iter().cloned().fold(f64::INFINITY, f64::min);
        let arg_max = arg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        checks.push(BoundCheck::ge("q*x^d on A >= 0", arg_min, -1e-15));
        checks.push(BoundCheck::lt("q*x^d on A < mu", arg_max, c.mu));
        Ok(checks)
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `‖x − Q∗x^d‖_{d+1}`.
pub fn residual(x: &SeqFn, q: &TransferOperator, d: u32) -> Result<f64> {
    let conv = q.table().convolve(&x.pointwise_pow(d)?)?;
    let diff: Vec<f64> = x.values().iter().zip(conv.values()).map(|(a, b)| a - b).collect();
    lp_norm(&diff, d as f64 + 1.0)
}

impl BoundaryLawSolution {
    /// The boundary law `u = x̄^d`.
    pub fn boundary_law(&self) -> SeqFn {
        self.xbar.pointwise_pow(self.d).expect("solution is positive")
    }

    pub fn space(&self) -> GroupSpace {
        self.xbar.space()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::lambda_d;

    fn window(l: usize) -> GroupSpace {
        GroupSpace::window(l).unwrap()
    }

    #[test]
    fn identity_operator_gives_indicator() {
        let q = TransferOperator::identity(window(6));
        let pb = LocalizationProblem::new(2, q, &[0, 3], Tolerances::default()).unwrap();
        let inner = pb.inner_fixed_point(&[0.7, 0.9]).unwrap();
        assert!(inner.x0.iter().all(|&v| v == 0.0));
        let sol = pb.solve().unwrap();
        assert_eq!(sol.xbar, SeqFn::indicator(window(6), &[0, 3]).unwrap());
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn rejects_bad_localization_sets() {
        let z3 = GroupSpace::cyclic(3).unwrap();
        let q = TransferOperator::identity(z3);
        assert!(LocalizationProblem::new(2, q.clone(), &[], Tolerances::default()).is_err());
        assert!(LocalizationProblem::new(2, q.clone(), &[0, 1, 2], Tolerances::default()).is_err());
        assert!(LocalizationProblem::new(2, q, &[5], Tolerances::default()).is_ok());
        let q = TransferOperator::identity(window(2));
        assert!(matches!(
            LocalizationProblem::new(2, q, &[3], Tolerances::default()),
            Err(Error::NotASubset(3))
        ));
    }

    #[test]
    fn below_threshold_is_rejected() {
        let q = TransferOperator::sos(1.5, window(40)).unwrap();
        assert!(matches!(
            LocalizationProblem::new(2, q, &[0], Tolerances::default()),
            Err(Error::ThresholdExceeded { .. })
        ));
    }

    #[test]
    fn inner_fixed_point_in_ball() {
        let q = TransferOperator::sos(2.0, window(40)).unwrap();
        let pb = LocalizationProblem::new(2, q, &[0], Tolerances::default()).unwrap();
        let inner = pb.inner_fixed_point(&[1.0]).unwrap();
        assert!(lp_norm(&inner.x0, 3.0).unwrap() <= pb.r_q());
        // Fixed-point residual of F at the returned point.
        let x = pb.partition().splice(&inner.x0, &[1.0]).unwrap();
        let f = pb.q_conv_pow(&x).unwrap().restrict(pb.partition().outside());
        let diff: Vec<f64> = f.iter().zip(&inner.x0).map(|(a, b)| a - b).collect();
        assert!(lp_norm(&diff, 3.0).unwrap() < 1e-11);
        let kappa = pb.contraction_bound();
        assert!(kappa < 1.0);
        for w in inner.changes.windows(2) {
            if w[0] > 1e-14 {
                assert!(w[1] <= kappa * w[0] * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn inner_fixed_point_is_monotone_in_x1() {
        let q = TransferOperator::sos(2.5, window(30)).unwrap();
        let pb = LocalizationProblem::new(2, q, &[0, 4], Tolerances::default()).unwrap();
        let a = pb.inner_fixed_point(&[0.6, 0.8]).unwrap().x0;
        let b = pb.inner_fixed_point(&[0.7, 0.8]).unwrap().x0;
        assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }

    #[test]
    fn two_point_sos_solution() {
        let q = TransferOperator::sos(2.4, window(60)).unwrap();
        let pb = LocalizationProblem::new(2, q, &[0, 5], Tolerances::default()).unwrap();
        let sol = pb.solve().unwrap();
        assert!(sol.residual < 1e-10);
        assert!(sol.xbar.get(0) > lambda_d(2) && sol.xbar.get(5) > lambda_d(2));
        assert!(sol.bracket_width < 1e-11);
        assert!(sol.certificate.iter().all(|c| c.pass));
    }

    #[test]
    fn residual_increases_under_perturbation() {
        let q = TransferOperator::sos(2.4, window(30)).unwrap();
        let pb = LocalizationProblem::new(2, q.clone(), &[0], Tolerances::default()).unwrap();
        let sol = pb.solve().unwrap();
        let mut v = sol.xbar.values().to_vec();
        v[33] += 0.01;
        let bumped = SeqFn::new(sol.xbar.space(), v).unwrap();
        assert!(residual(&bumped, &q, 2).unwrap() > sol.residual);
    }
}
