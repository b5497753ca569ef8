//! Sampled numerical checks of the scalar lemmas and of the solver and
//! measure invariants. Grid checks are evidence, not proofs.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::Serialize;

use crate::check::{all_pass, BoundCheck};
use crate::constants::{f_dn, g_d, lambda_d, r_star, rho_dn, rho_polynomial, ModelConstants};
use crate::error::Result;
use crate::gibbs::{dlr_oracle_check, verify_theorem_bounds, MarkovChainGibbs};
use crate::seqspace::{GroupSpace, SeqFn};
use crate::solver::{BoundaryLawSolution, LocalizationProblem};

/// Tolerance on grid differences in the shape checks.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Worst case of a family of inequalities `measured ≤ bound`, tracked by the
/// largest excess `measured − bound`.
struct Worst {
    name: &'static str,
    excess: f64,
    at: String,
    measured: f64,
    bound: f64,
}

impl Worst {
    fn new(name: &'static str) -> Self {
        Worst { name, excess: f64::NEG_INFINITY, at: String::new(), measured: f64::NAN, bound: f64::NAN }
    }

    fn observe(&mut self, measured: f64, bound: f64, at: impl FnOnce() -> String) {
        let excess = measured - bound;
        if excess > self.excess || excess.is_nan() {
            self.excess = excess;
            self.measured = measured;
            self.bound = bound;
            self.at = at();
        }
    }

    fn le(self) -> BoundCheck {
        BoundCheck::le(format!("{} [worst at {}]", self.name, self.at), self.measured, self.bound)
    }

    fn lt(self) -> BoundCheck {
        BoundCheck::lt(format!("{} [worst at {}]", self.name, self.at), self.measured, self.bound)
    }
}

/// Shape of `f_{d,n}` and `g_d` on a grid of `grid` points: `f` increasing
/// on `[0,ρ]`, decreasing on `[ρ,1]`, concave on `[0,1]`; `g` decreasing on
/// `(0,λ_d]`; `f − g` changes sign once, at `r* ∈ (ρ, λ_d)`.
pub fn lemma_shape_suite(ds: &[u32], ns: &[u32], grid: usize) -> Vec<BoundCheck> {
    let mut inc = Worst::new("f increasing on [0,rho]");
    let mut dec = Worst::new("f decreasing on [rho,1]");
    let mut concave = Worst::new("f concave on [0,1]");
    let mut g_dec = Worst::new("g decreasing on (0,lambda]");
    let mut rs_low = Worst::new("rho < r*");
    let mut rs_high = Worst::new("r* < lambda");
    let mut below = Worst::new("f < g on (0,r*)");
    let mut above = Worst::new("f > g on (r*,lambda)");
    for &d in ds {
        let lambda = lambda_d(d);
        for &n in ns {
            let rho = rho_dn(d, n);
            let at = || format!("d={d} n={n}");
            let f = |r: f64| f_dn(d, n, r);
            let step = |a: f64, b: f64, k: usize| a + (b - a) * k as f64 / grid as f64;
            for k in 0..grid {
                let (a, b) = (step(0.0, rho, k), step(0.0, rho, k + 1));
                inc.observe(f(a) - f(b), GRID_TOLERANCE, at);
                let (a, b) = (step(rho, 1.0, k), step(rho, 1.0, k + 1));
                dec.observe(f(b) - f(a), GRID_TOLERANCE, at);
            }
            for k in 1..grid {
                let (a, m, b) = (step(0.0, 1.0, k - 1), step(0.0, 1.0, k), step(0.0, 1.0, k + 1));
                concave.observe(f(a) + f(b) - 2.0 * f(m), GRID_TOLERANCE, at);
            }
            let rs = r_star(d, n);
            rs_low.observe(rho, rs, at);
            rs_high.observe(rs, lambda, at);
            let g = |r: f64| g_d(d, r).expect("grid inside (0, lambda]");
            for k in 1..grid {
                let (a, b) = (step(0.0, lambda, k), step(0.0, lambda, k + 1));
                g_dec.observe(g(b) - g(a), GRID_TOLERANCE, at);
                // Sign of f − g away from the crossing.
                if (b - rs).abs() > 1e-6 * lambda {
                    if b < rs {
                        below.observe(f(b), g(b), at);
                    } else {
                        above.observe(g(b), f(b), at);
                    }
                }
            }
        }
    }
    vec![inc.le(), dec.le(), concave.le(), g_dec.le(), rs_low.lt(), rs_high.lt(), below.lt(), above.lt()]
}

/// Bounds on `ρ` and `η`: the root residual, `ρ < λ_d`, the sandwich
/// `μ_d (n+1)^{-d/(d+1)} ≤ η ≤ μ_d n^{-d/(d+1)}` and
/// `e d n^d ≤ η^{-(d+1)} ≤ 32 e d n^d`.
pub fn asymptotics_suite(ds: &[u32], ns: &[u32]) -> Result<Vec<BoundCheck>> {
    let mut residual = Worst::new("rho polynomial residual");
    let mut rho_lambda = Worst::new("rho < lambda");
    let mut lower = Worst::new("eta >= mu (n+1)^(-d/(d+1))");
    let mut upper = Worst::new("eta <= mu n^(-d/(d+1))");
    let mut below_one = Worst::new("mu n^(-d/(d+1)) < 1");
    let mut pow_lower = Worst::new("e d n^d <= eta^-(d+1)");
    let mut pow_upper = Worst::new("eta^-(d+1) <= 32 e d n^d");
    let mut theta = Worst::new("theta < 1");
    for &d in ds {
        for &n in ns {
            let c = ModelConstants::new(d, n)?;
            let (df, nf) = (d as f64, n as f64);
            let at = || format!("d={d} n={n}");
            residual.observe(rho_polynomial(d, n, c.rho).abs(), 1e-12, at);
            rho_lambda.observe(c.rho, c.lambda, at);
            let expo = df / (df + 1.0);
            lower.observe(c.mu * (nf + 1.0).powf(-expo), c.eta, at);
            upper.observe(c.eta, c.mu * nf.powf(-expo), at);
            below_one.observe(c.mu * nf.powf(-expo), 1.0, at);
            let inv = c.eta.powf(-(df + 1.0));
            let base = E * df * nf.powf(df);
            // Compare on the log scale; both sides reach 1e30.
            pow_lower.observe(base.ln(), inv.ln(), at);
            pow_upper.observe(inv.ln(), (32.0 * base).ln(), at);
            theta.observe(c.theta, 1.0, at);
        }
    }
    Ok(vec![
        residual.lt(),
        rho_lambda.lt(),
        lower.le(),
        upper.le(),
        below_one.lt(),
        pow_lower.le(),
        pow_upper.le(),
        theta.lt(),
    ])
}

/// Certificate of the solution plus the contraction-rate bound of the inner
/// iteration and translation covariance under a shift of `A`.
pub fn solver_suite(problem: &LocalizationProblem, sol: &BoundaryLawSolution, shift: i64) -> Result<Vec<BoundCheck>> {
    let mut checks = sol.certificate.clone();
    checks.push(BoundCheck::lt("bracket width < outer tolerance", sol.bracket_width, problem.tolerances().outer));
    let kappa = problem.contraction_bound();
    checks.push(BoundCheck::lt("contraction bound < 1", kappa, 1.0));
    let x1 = problem.partition().restrict_inside(&sol.xbar);
    let inner = problem.inner_fixed_point(&x1)?;
    let mut worst_rate = 0.0_f64;
    for w in inner.changes.windows(2) {
        // Ratios of changes near rounding level carry no information.
        if w[0] > 1e-12 {
            worst_rate = worst_rate.max(w[1] / w[0]);
        }
    }
    checks.push(BoundCheck::le("observed inner contraction rate <= bound", worst_rate, kappa));

    if shift != 0 {
        let shifted = problem.partition().translate(shift)?;
        let moved = LocalizationProblem::new(
            problem.d(),
            problem.operator().clone(),
            &shifted.elements(),
            problem.tolerances(),
        )?
        .solve()?;
        checks.push(BoundCheck::le(
            "translation covariance (max abs difference)",
            translation_defect(&sol.xbar, &moved.xbar, shift),
            1e-10,
        ));
    }
    Ok(checks)
}

/// `max_i |y(i + t) − x(i)|` over sites whose shift stays in the space.
/// On a window, sites within `|t|` of the edge are skipped.
pub fn translation_defect(x: &SeqFn, y: &SeqFn, t: i64) -> f64 {
    let space = x.space();
    let margin = match space {
        GroupSpace::IntegerWindow { .. } => t.unsigned_abs() as i64,
        GroupSpace::Cyclic { .. } => 0,
    };
    let limit = match space {
        GroupSpace::IntegerWindow { radius } => radius as i64 - margin,
        GroupSpace::Cyclic { .. } => i64::MAX,
    };
    space
        .elements()
        .filter(|e| e.abs() <= limit)
        .map(|e| (y.get(space.reduce(e + t)) - x.get(e)).abs())
        .fold(0.0, f64::max)
}

/// Measure identities, the theorem report, and the single-vertex DLR oracle.
pub fn gibbs_suite(chain: &MarkovChainGibbs, sol: &BoundaryLawSolution, dlr_configurations: usize) -> Result<Vec<BoundCheck>> {
    let mut checks = vec![
        BoundCheck::le("row sums (max defect)", chain.row_sum_defect(), chain.row_sum_tolerance()),
        BoundCheck::lt("reversibility (max defect)", chain.reversibility_defect(), 1e-12),
        BoundCheck::lt("marginal transition formula (max defect)", chain.marginal_formula_defect(), 1e-10),
        BoundCheck::ge("lazy set", chain.lazy_set_holds() as u8 as f64, 1.0),
    ];
    let report = verify_theorem_bounds(chain, &sol.localization, sol.epsilon.epsilon)?;
    checks.extend(report.checks);
    let dlr = dlr_oracle_check(chain, dlr_configurations, 0)?;
    checks.push(BoundCheck::lt("single-vertex DLR violation", dlr.max_violation, 1e-8));
    Ok(checks)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suites: BTreeMap<String, Vec<BoundCheck>>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn new(suites: BTreeMap<String, Vec<BoundCheck>>) -> Self {
        let pass = suites.values().all(|c| all_pass(c));
        VerifyReport { suites, pass }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lemma_grid_passes() {
        for c in lemma_shape_suite(&[2, 3], &[1, 4], 500) {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn asymptotics_pass_on_small_range() {
        for c in asymptotics_suite(&[2, 5], &[1, 7]).unwrap() {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn translation_defect_of_identical_cyclic_shift() {
        let z = GroupSpace::cyclic(4).unwrap();
        let x = SeqFn::new(z, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = SeqFn::new(z, vec![4.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(translation_defect(&x, &y, 1), 0.0);
        assert!(translation_defect(&x, &y, 2) > 0.0);
    }
}
