//! Tree-indexed Markov-chain Gibbs measures induced by a boundary law.
//!
//! For a solution `x̄` of `x = Q∗x^d` the single-site marginal is
//! `π = x̄^{d+1}/‖x̄‖_{d+1}^{d+1}` and the transition matrix is
//! `P(i,j) = x̄(j)^d Q(i−j)/x̄(i)`.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::check::{all_pass, BoundCheck};
use crate::constants::ModelConstants;
use crate::error::{Error, Result};
use crate::potentials::TransferOperator;
use crate::seqspace::{lp_norm, GroupSpace, Partition, SeqFn};
use crate::solver::BoundaryLawSolution;

/// Largest number of configurations summed by the exhaustive routines.
pub const MAX_CONFIGURATIONS: f64 = 5e7;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarkovChainGibbs {
    d: u32,
    space: GroupSpace,
    localization: Vec<i64>,
    pi: SeqFn,
    /// Row-major `size × size`.
    transition: Vec<f64>,
    delta: SeqFn,
    #[serde(skip)]
    q: TransferOperator,
    #[serde(skip)]
    xbar: SeqFn,
    #[serde(skip)]
    residual: f64,
}

impl MarkovChainGibbs {
    /// Builds `π`, `P` and `Δ` from a boundary-law solution. A row with
    /// `x̄(i) = 0` (only possible when `Q` vanishes somewhere) is replaced
    /// by the normalized row `x̄(j)^d Q(i−j)`, or, if that vanishes too, by the
    /// uniform law on `A`. Such rows carry no `π`-mass.
    pub fn from_boundary_law(sol: &BoundaryLawSolution, q: &TransferOperator) -> Result<Self> {
        let space = sol.space();
        if q.space() != space {
            return Err(Error::MismatchedSpaces {
                left: space.to_string(),
                right: q.space().to_string(),
            });
        }
        let d = sol.d;
        let x = sol.xbar.values();
        let n = space.size();
        let qv = q.table().values();
        let u: Vec<f64> = x.iter().map(|v| v.powi(d as i32)).collect();
        let total: f64 = x.iter().map(|v| v.powi(d as i32 + 1)).sum();
        let pi = SeqFn::new(space, x.iter().map(|v| v.powi(d as i32 + 1) / total).collect())?;
        let mut transition = vec![0.0; n * n];
        for i in 0..n {
            let row = &mut transition[i * n..(i + 1) * n];
            for (j, r) in row.iter_mut().enumerate() {
                if let Some(k) = space.diff_index(i, j) {
                    *r = u[j] * qv[k];
                }
            }
            if x[i] > 0.0 {
                row.iter_mut().for_each(|r| *r /= x[i]);
            } else {
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    row.iter_mut().for_each(|r| *r /= s);
                } else {
                    let share = 1.0 / sol.localization.len() as f64;
                    for &a in &sol.localization {
                        row[space.index_of(a).expect("element of A")] = share;
                    }
                }
            }
        }
        let delta = SeqFn::new(space, (0..n).map(|i| transition[i * n + i]).collect())?;
        Ok(MarkovChainGibbs {
            d,
            space,
            localization: sol.localization.clone(),
            pi,
            transition,
            delta,
            q: q.clone(),
            xbar: sol.xbar.clone(),
            residual: sol.residual,
        })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn space(&self) -> GroupSpace {
        self.space
    }

    pub fn localization(&self) -> &[i64] {
        &self.localization
    }

    pub fn pi(&self) -> &SeqFn {
        &self.pi
    }

    /// `Δ(i) = P(i,i)`.
    pub fn delta(&self) -> &SeqFn {
        &self.delta
    }

    pub fn xbar(&self) -> &SeqFn {
        &self.xbar
    }

    pub fn operator(&self) -> &TransferOperator {
        &self.q
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `P(i,j)` by index.
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.space.size() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.space.size();
        &self.transition[i * n..(i + 1) * n]
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    /// `max_i |Σ_j P(i,j) − 1|`.
    pub fn row_sum_defect(&self) -> f64 {
        (0..self.space.size())
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Admissible row-sum defect `10 · residual / min x̄` over rows with
    /// `x̄ > 0`.
    pub fn row_sum_tolerance(&self) -> f64 {
        let min_x = self.xbar.values().iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
        10.0 * self.residual / min_x
    }

    /// `max_{i,j} |π(i)P(i,j) − π(j)P(j,i)|`.
    pub fn reversibility_defect(&self) -> f64 {
        let n = self.space.size();
        let pi = self.pi.values();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((pi[i] * self.p(i, j) - pi[j] * self.p(j, i)).abs());
            }
        }
        worst
    }

    /// The transition matrix written through the marginal:
    /// `P(i,j) = π(j)^{d/(d+1)} Q(i−j) / (Q∗π^{d/(d+1)})(i)`.
    pub fn transition_from_marginal(&self) -> Vec<f64> {
        let n = self.space.size();
        let df = self.d as f64;
        let w = self.pi.map(|v| v.powf(df / (df + 1.0)));
        let conv = self.q.table().convolve(&w).expect("same space");
        let qv = self.q.table().values();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            let denom = conv.values()[i];
            for j in 0..n {
                if let Some(k) = self.space.diff_index(i, j) {
                    out[i * n + j] = w.values()[j] * qv[k] / denom;
                }
            }
        }
        out
    }

    /// `max |P − P'|` between the two expressions for the transition matrix,
    /// over rows with `x̄ > 0`.
    pub fn marginal_formula_defect(&self) -> f64 {
        let n = self.space.size();
        let alt = self.transition_from_marginal();
        let mut worst = 0.0_f64;
        for i in (0..n).filter(|&i| self.xbar.values()[i] > 0.0) {
            for j in 0..n {
                worst = worst.max((alt[i * n + j] - self.p(i, j)).abs());
            }
        }
        worst
    }

    /// Whether every `i ∈ A` with `Δ(i) > 1/2` is the most likely successor
    /// of itself.
    pub fn lazy_set_holds(&self) -> bool {
        self.localization.iter().all(|&a| {
            let i = self.space.index_of(a).expect("element of A");
            if self.delta.values()[i] <= 0.5 {
                return true;
            }
            let row = self.row(i);
            row.iter().enumerate().all(|(j, &v)| j == i || v < row[i])
        })
    }

    /// JSON export: space, `π`, and `P` flattened row-major.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.d,
            "space": self.space,
            "elements": self.space.elements().collect::<Vec<_>>(),
            "localization": self.localization,
            "pi": self.pi.values(),
            "transition": self.transition,
        })
    }
}

/// Evaluated inequalities of the existence theorem for one measure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremReport {
    pub epsilon: f64,
    pub n: usize,
    pub checks: Vec<BoundCheck>,
    pub pass: bool,
}

/// Evaluates the concentration, laziness and jump bounds of `chain` with
/// respect to the set `a` and deviation norm `epsilon`.
pub fn verify_theorem_bounds(chain: &MarkovChainGibbs, a: &[i64], epsilon: f64) -> Result<TheoremReport> {
    let space = chain.space;
    let part = Partition::new(space, a)?;
    let n = part.len();
    if n == 0 || n >= space.size() {
        return Err(Error::InvalidInput("localization set must be a proper nonempty subset".into()));
    }
    let d = chain.d;
    let df = d as f64;
    let c = ModelConstants::new(d, n as u32)?;
    let pi = chain.pi.values();
    let delta = chain.delta.values();
    let pi_out: f64 = part.outside().iter().map(|&i| pi[i]).sum();
    let pi_in: Vec<f64> = part.inside().iter().map(|&i| pi[i]).collect();
    let min_pi_in = pi_in.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_pi_in = pi_in.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let delta_out = lp_norm(&part.restrict_outside(&chain.delta), (df + 1.0) / (df - 1.0))?;
    let min_delta_in = part.inside().iter().map(|&i| delta[i]).fold(f64::INFINITY, f64::min);
    let nf = n as f64;

    // With ε = 0 the measure sits exactly on A and the strict inequalities
    // hold only with equality.
    let degenerate = epsilon == 0.0;
    let lt = if degenerate { BoundCheck::le } else { BoundCheck::lt };
    let gt = if degenerate { BoundCheck::ge } else { BoundCheck::gt };
    let mut checks = vec![
        lt("outside mass < theta * min inside", pi_out, c.theta * min_pi_in),
        BoundCheck::lt("outside diagonal norm < rho^(d-1)", delta_out, c.rho.powi(d as i32 - 1)),
        BoundCheck::lt("rho^(d-1) < 1/d", c.rho.powi(d as i32 - 1), 1.0 / df),
        BoundCheck::gt("inside diagonal > 1/d", min_delta_in, 1.0 / df),
        BoundCheck::le("(i) outside diagonal norm", delta_out, c.c1 * epsilon.powi(d as i32 - 1)),
        gt("(ii) inside diagonal", min_delta_in, 1.0 - c.c2 * epsilon),
        BoundCheck::le("(iii) outside mass", pi_out, c.c3 * epsilon.powi(d as i32 + 1)),
        BoundCheck::ge("(iv) inside marginal lower", min_pi_in, (1.0 - c.c5 * epsilon) / nf),
    ];
    // For c4 ε ≥ 1 the upper bound in (iv) is vacuous.
    let upper = if c.c4 * epsilon < 1.0 { 1.0 / ((1.0 - c.c4 * epsilon) * nf) } else { f64::INFINITY };
    checks.push(BoundCheck::le("(iv) inside marginal upper", max_pi_in, upper));

    let qv = chain.q.table().values();
    let mass_from_a = |i: usize| -> f64 {
        part.inside().iter().filter_map(|&j| space.diff_index(i, j)).map(|k| qv[k]).sum()
    };
    if !part.outside().is_empty() {
        let factor = (1.0 - c.c6 * epsilon) / nf;
        let (mut worst, mut worst_bound) = (f64::INFINITY, 0.0);
        for &i in part.outside() {
            let bound = factor * mass_from_a(i).powi(d as i32 + 1);
            if pi[i] - bound < worst - worst_bound {
                worst = pi[i];
                worst_bound = bound;
            }
        }
        checks.push(BoundCheck::ge("(v) outside pointwise lower", worst, worst_bound));
    }

    // Jump probability into A^c, Hölder form for every state and the form
    // sharpened by (v) on A^c.
    let q_norm = lp_norm(qv, df + 1.0)?;
    let w = chain.pi.map(|v| v.powf(df / (df + 1.0)));
    let conv = chain.q.table().convolve(&w)?;
    let jump = |i: usize| -> f64 { part.outside().iter().map(|&j| chain.p(i, j)).sum() };
    let (mut ratio, mut at) = (0.0_f64, (0.0, 0.0));
    for i in 0..space.size() {
        let bound = c.c7 * q_norm * epsilon.powi(d as i32) / conv.values()[i];
        let m = jump(i);
        if m > 0.0 && m / bound > ratio {
            ratio = m / bound;
            at = (m, bound);
        }
    }
    checks.push(BoundCheck::le("jump into outside (Holder)", at.0, at.1));
    let lead = 1.0 - c.c6 * epsilon;
    let (mut ratio, mut at) = (0.0_f64, (0.0, if lead > 0.0 { 0.0 } else { f64::INFINITY }));
    if lead > 0.0 {
        for &i in part.outside() {
            let mass = mass_from_a(i);
            let bound = c.c7 * lead.powf(-df / (df + 1.0)) * nf.powf(df / (df + 1.0)) * q_norm
                * mass.powi(-(d as i32))
                * epsilon.powi(d as i32);
            let m = jump(i);
            if m > 0.0 && m / bound > ratio {
                ratio = m / bound;
                at = (m, bound);
            }
        }
    }
    checks.push(BoundCheck::le("jump into outside (distance form)", at.0, at.1));

    let pass = all_pass(&checks);
    Ok(TheoremReport { epsilon, n, checks, pass })
}

/// Total variation between the marginals of two measures and the lower bound
/// `max(|A∖A'| min_A π_A − π_{A'}(A'^c), |A'∖A| min_{A'} π_{A'} − π_A(A^c))`.
pub fn marginal_separation(a: &MarkovChainGibbs, b: &MarkovChainGibbs) -> Result<(f64, f64)> {
    if a.space != b.space {
        return Err(Error::MismatchedSpaces { left: a.space.to_string(), right: b.space.to_string() });
    }
    let pa = a.pi.values();
    let pb = b.pi.values();
    let tv = 0.5 * pa.iter().zip(pb).map(|(x, y)| (x - y).abs()).sum::<f64>();
    let one_side = |x: &MarkovChainGibbs, y: &MarkovChainGibbs| -> Result<f64> {
        let px = Partition::new(x.space, &x.localization)?;
        let py = Partition::new(y.space, &y.localization)?;
        let only_x = px.inside().iter().filter(|&&i| !py.contains_index(i)).count() as f64;
        let min_x = px.inside().iter().map(|&i| x.pi.values()[i]).fold(f64::INFINITY, f64::min);
        let out_y: f64 = py.outside().iter().map(|&i| y.pi.values()[i]).sum();
        Ok(only_x * min_x - out_y)
    };
    Ok((tv, one_side(a, b)?.max(one_side(b, a)?)))
}

/// A finite subtree `Λ` with its outer boundary `∂Λ`. Vertices are numbered
/// `0..vertices`; every boundary vertex has exactly one edge, into `Λ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiniteSubtree {
    pub vertices: usize,
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl FiniteSubtree {
    /// One vertex (0) and its `d+1` neighbours.
    pub fn star(d: u32) -> Self {
        let k = d as usize + 1;
        FiniteSubtree {
            vertices: k + 1,
            interior: vec![0],
            boundary: (1..=k).collect(),
            edges: (1..=k).map(|y| (0, y)).collect(),
        }
    }

    /// Two adjacent vertices (0, 1), each with its `d` further neighbours.
    pub fn edge(d: u32) -> Self {
        let d = d as usize;
        let mut edges = vec![(0, 1)];
        edges.extend((0..d).map(|k| (0, 2 + k)));
        edges.extend((0..d).map(|k| (1, 2 + d + k)));
        FiniteSubtree { vertices: 2 + 2 * d, interior: vec![0, 1], boundary: (2..2 + 2 * d).collect(), edges }
    }

    fn validate(&self, d: u32) -> Result<()> {
        let mut degree = vec![0usize; self.vertices];
        for &(a, b) in &self.edges {
            if a >= self.vertices || b >= self.vertices || a == b {
                return Err(Error::InvalidInput(format!("bad edge ({a},{b})")));
            }
            degree[a] += 1;
            degree[b] += 1;
        }
        if self.edges.len() + 1 != self.vertices {
            return Err(Error::InvalidInput("subtree must be a tree".into()));
        }
        for &v in &self.interior {
            if degree[v] != d as usize + 1 {
                return Err(Error::InvalidInput(format!("interior vertex {v} has degree {}", degree[v])));
            }
        }
        for &v in &self.boundary {
            if degree[v] != 1 {
                return Err(Error::InvalidInput(format!("boundary vertex {v} has degree {}", degree[v])));
            }
        }
        if self.interior.len() + self.boundary.len() != self.vertices {
            return Err(Error::InvalidInput("vertices must be interior or boundary".into()));
        }
        Ok(())
    }
}

/// The finite-volume law `μ(σ_{Λ∪∂Λ} = ω) ∝ Π_{y∈∂Λ} u(ω_y) Π_{edges} Q(ω_y − ω_x)`
/// with `u = x̄^d`, normalized by exhaustive summation.
#[derive(Clone, Debug)]
pub struct FiniteVolume {
    subtree: FiniteSubtree,
    space: GroupSpace,
    u: Vec<f64>,
    q: TransferOperator,
    partition_function: f64,
}

fn configuration_count(size: usize, vertices: usize) -> f64 {
    (size as f64).powi(vertices as i32)
}

/// Visits every configuration in lexicographic order.
fn for_each_configuration(size: usize, vertices: usize, mut f: impl FnMut(&[usize])) {
    let mut config = vec![0usize; vertices];
    loop {
        f(&config);
        let mut k = vertices;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            config[k] += 1;
            if config[k] < size {
                break;
            }
            config[k] = 0;
        }
    }
}

impl FiniteVolume {
    pub fn new(sol: &BoundaryLawSolution, q: &TransferOperator, subtree: FiniteSubtree) -> Result<Self> {
        subtree.validate(sol.d)?;
        let space = sol.space();
        let configurations = configuration_count(space.size(), subtree.vertices);
        if configurations > MAX_CONFIGURATIONS {
            return Err(Error::SubtreeTooLarge { configurations });
        }
        let u = sol.boundary_law().into_values();
        let mut fv = FiniteVolume { subtree, space, u, q: q.clone(), partition_function: 0.0 };
        let mut z = 0.0;
        for_each_configuration(space.size(), fv.subtree.vertices, |c| z += fv.weight(c));
        fv.partition_function = z;
        Ok(fv)
    }

    fn weight(&self, config: &[usize]) -> f64 {
        let qv = self.q.table().values();
        let mut w = 1.0;
        for &y in &self.subtree.boundary {
            w *= self.u[config[y]];
        }
        for &(a, b) in &self.subtree.edges {
            w *= self.space.diff_index(config[a], config[b]).map_or(0.0, |k| qv[k]);
        }
        w
    }

    pub fn subtree(&self) -> &FiniteSubtree {
        &self.subtree
    }

    pub fn partition_function(&self) -> f64 {
        self.partition_function
    }

    /// Probability of a configuration given as group elements.
    pub fn probability(&self, omega: &[i64]) -> Result<f64> {
        if omega.len() != self.subtree.vertices {
            return Err(Error::InvalidInput(format!(
                "configuration has {} entries, subtree has {} vertices",
                omega.len(),
                self.subtree.vertices
            )));
        }
        let idx = omega
            .iter()
            .map(|&e| self.space.index_of(e).ok_or(Error::NotASubset(e)))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.weight(&idx) / self.partition_function)
    }

    /// Law of the state at one vertex, by exhaustive summation.
    pub fn vertex_marginal(&self, vertex: usize) -> SeqFn {
        let mut m = vec![0.0; self.space.size()];
        for_each_configuration(self.space.size(), self.subtree.vertices, |c| {
            m[c[vertex]] += self.weight(c);
        });
        SeqFn::new(self.space, m.iter().map(|v| v / self.partition_function).collect())
            .expect("finite")
    }

    /// Joint law of the states at two vertices, row-major.
    pub fn pair_marginal(&self, a: usize, b: usize) -> Vec<f64> {
        let n = self.space.size();
        let mut m = vec![0.0; n * n];
        for_each_configuration(n, self.subtree.vertices, |c| {
            m[c[a] * n + c[b]] += self.weight(c);
        });
        m.iter().map(|v| v / self.partition_function).collect()
    }
}

/// `μ(σ_{Λ∪∂Λ} = ω)` for a single configuration.
pub fn finite_marginal(
    sol: &BoundaryLawSolution,
    q: &TransferOperator,
    subtree: FiniteSubtree,
    omega: &[i64],
) -> Result<f64> {
    FiniteVolume::new(sol, q, subtree)?.probability(omega)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DlrReport {
    pub max_violation: f64,
    pub configurations: usize,
    pub tail: f64,
}

/// Compares, for a single vertex with `d+1` neighbours in state `ω`, the
/// specification kernel `Π_y Q(i−ω_y)/Z(ω)` with the conditional law of the
/// chain `π(i) Π_y P(i,ω_y) / Σ_k π(k) Π_y P(k,ω_y)`. All boundary
/// configurations are visited when there are at most `max_configurations`,
/// otherwise a seeded random subset of that size.
pub fn dlr_oracle_check(chain: &MarkovChainGibbs, max_configurations: usize, seed: u64) -> Result<DlrReport> {
    let space = chain.space;
    let n = space.size();
    let k = chain.d as usize + 1;
    let qv = chain.q.table().values();
    let pi = chain.pi.values();
    let q_at = |i: usize, j: usize| space.diff_index(i, j).map_or(0.0, |m| qv[m]);
    // Log weights; products of k small factors underflow otherwise.
    let violation = |omega: &[usize]| -> f64 {
        let spec: Vec<f64> = (0..n).map(|i| omega.iter().map(|&y| q_at(i, y).ln()).sum()).collect();
        let chain_w: Vec<f64> =
            (0..n).map(|i| pi[i].ln() + omega.iter().map(|&y| chain.p(i, y).ln()).sum::<f64>()).collect();
        let ms = spec.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mc = chain_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if ms == f64::NEG_INFINITY || mc == f64::NEG_INFINITY {
            return if ms == mc { 0.0 } else { 1.0 };
        }
        let zs: f64 = spec.iter().map(|w| (w - ms).exp()).sum();
        let zc: f64 = chain_w.iter().map(|w| (w - mc).exp()).sum();
        spec.iter()
            .zip(&chain_w)
            .map(|(s, c)| ((s - ms).exp() / zs - (c - mc).exp() / zc).abs())
            .fold(0.0, f64::max)
    };
    let total = configuration_count(n, k);
    let mut worst = 0.0_f64;
    let count;
    if total <= max_configurations as f64 {
        let mut c = 0;
        for_each_configuration(n, k, |omega| {
            worst = worst.max(violation(omega));
            c += 1;
        });
        count = c;
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut omega = vec![0usize; k];
        for _ in 0..max_configurations {
            omega.iter_mut().for_each(|o| *o = rng.random_range(0..n));
            worst = worst.max(violation(&omega));
        }
        count = max_configurations;
    }
    Ok(DlrReport { max_violation: worst, configurations: count, tail: chain.q.tail_norm(chain.d) })
}

/// A configuration on the rooted tree of depth `m` in breadth-first order;
/// the root has `d+1` children and every other internal vertex `d`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeSample {
    pub d: u32,
    pub depth: usize,
    /// State indices into the space.
    pub states: Vec<usize>,
}

/// Number of vertices at distance exactly `k` from the root.
pub fn level_size(d: u32, k: usize) -> usize {
    if k == 0 {
        1
    } else {
        (d as usize + 1) * (d as usize).pow(k as u32 - 1)
    }
}

impl TreeSample {
    pub fn vertex_count(&self) -> usize {
        self.states.len()
    }

    /// `(parent, depth)` of each vertex; the root has no parent.
    pub fn layout(d: u32, depth: usize) -> Vec<(Option<usize>, usize)> {
        let mut out = vec![(None, 0)];
        let mut level_start = 0;
        for k in 1..=depth {
            let prev_len = level_size(d, k - 1);
            let arity = if k == 1 { d as usize + 1 } else { d as usize };
            for p in level_start..level_start + prev_len {
                for _ in 0..arity {
                    out.push((Some(p), k));
                }
            }
            level_start += prev_len;
        }
        out
    }
}

/// Precomputed samplers for `π` and the rows of `P`.
pub struct TreeSampler {
    d: u32,
    space: GroupSpace,
    root: WeightedIndex<f64>,
    rows: Vec<WeightedIndex<f64>>,
}

impl TreeSampler {
    pub fn new(chain: &MarkovChainGibbs) -> Result<Self> {
        let bad = |e: rand::distr::weighted::Error| Error::InvalidInput(format!("sampling weights: {e}"));
        let root = WeightedIndex::new(chain.pi.values()).map_err(bad)?;
        let rows = (0..chain.space.size())
            .map(|i| WeightedIndex::new(chain.row(i)).map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        Ok(TreeSampler { d: chain.d, space: chain.space, root, rows })
    }

    pub fn space(&self) -> GroupSpace {
        self.space
    }

    pub fn sample_root<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.root.sample(rng)
    }

    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        self.rows[from].sample(rng)
    }

    pub fn sample_tree<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> TreeSample {
        let layout = TreeSample::layout(self.d, depth);
        let mut states = Vec::with_capacity(layout.len());
        for (parent, _) in &layout {
            let s = match parent {
                None => self.sample_root(rng),
                Some(p) => self.step(states[*p], rng),
            };
            states.push(s);
        }
        TreeSample { d: self.d, depth, states }
    }

    /// `count` independent trees; tree `t` uses ChaCha8 seeded with `seed`
    /// on stream `t`, so the output does not depend on thread scheduling.
    pub fn sample_trees(&self, depth: usize, count: usize, seed: u64) -> Vec<TreeSample> {
        (0..count)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream_rng(seed, t as u64);
                self.sample_tree(depth, &mut rng)
            })
            .collect()
    }
}

/// ChaCha8 generator for sub-stream `stream` of the master `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent seed number `k` derived from a master seed.
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    stream_rng(seed, k).next_u64()
}

/// A single tree drawn with the given seed.
pub fn sample_tree(chain: &MarkovChainGibbs, depth: usize, seed: u64) -> Result<TreeSample> {
    let sampler = TreeSampler::new(chain)?;
    Ok(sampler.sample_tree(depth, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Pooled single-site frequencies over all vertices of all trees, with
/// standard errors over trees.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalEstimate {
    pub pi_hat: SeqFn,
    /// Sample standard deviation of the per-tree frequencies over `√trees`.
    pub standard_error: Vec<f64>,
    pub trees: usize,
    pub vertices: usize,
}

impl MarginalEstimate {
    /// `√(π(1−π)/trees)`, an upper bound on the standard deviation of the
    /// estimator when the true marginal is `π`, whatever the correlation
    /// between vertices of one tree.
    pub fn null_standard_error(&self, pi: &SeqFn) -> Vec<f64> {
        pi.values().iter().map(|p| (p * (1.0 - p) / self.trees as f64).sqrt()).collect()
    }
}

pub fn empirical_marginal(samples: &[TreeSample], space: GroupSpace) -> Result<MarginalEstimate> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let n = space.size();
    let t = samples.len() as f64;
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut vertices = 0;
    let mut counts = vec![0usize; n];
    for s in samples {
        counts.iter_mut().for_each(|c| *c = 0);
        for &st in &s.states {
            counts[st] += 1;
        }
        let v = s.states.len() as f64;
        vertices += s.states.len();
        for i in 0..n {
            let f = counts[i] as f64 / v;
            sum[i] += f;
            sum_sq[i] += f * f;
        }
    }
    let pi_hat: Vec<f64> = sum.iter().map(|s| s / t).collect();
    let standard_error = (0..n)
        .map(|i| {
            if samples.len() < 2 {
                return 0.0;
            }
            let var = ((sum_sq[i] - t * pi_hat[i] * pi_hat[i]) / (t - 1.0)).max(0.0);
            (var / t).sqrt()
        })
        .collect();
    Ok(MarginalEstimate { pi_hat: SeqFn::new(space, pi_hat)?, standard_error, trees: samples.len(), vertices })
}

/// CSV dump `tree,vertex,depth,state`.
pub fn write_samples_csv<W: Write>(samples: &[TreeSample], space: GroupSpace, mut out: W) -> Result<()> {
    writeln!(out, "tree,vertex,depth,state")?;
    for (t, s) in samples.iter().enumerate() {
        let layout = TreeSample::layout(s.d, s.depth);
        for (v, (&st, (_, depth))) in s.states.iter().zip(&layout).enumerate() {
            writeln!(out, "{t},{v},{depth},{}", space.element(st))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{LocalizationProblem, Tolerances};

    fn solve(q: TransferOperator, a: &[i64]) -> BoundaryLawSolution {
        let tol = Tolerances { tail: 1e-6, ..Tolerances::default() };
        LocalizationProblem::new(2, q, a, tol).unwrap().solve().unwrap()
    }

    #[test]
    fn identity_operator_gives_uniform_on_a() {
        let sp = GroupSpace::window(4).unwrap();
        let q = TransferOperator::identity(sp);
        let sol = solve(q.clone(), &[-1, 2]);
        let chain = MarkovChainGibbs::from_boundary_law(&sol, &q).unwrap();
        assert_eq!(chain.pi().get(-1), 0.5);
        assert_eq!(chain.pi().get(2), 0.5);
        for i in 0..sp.size() {
            let inside = [-1, 2].contains(&sp.element(i));
            assert_eq!(chain.p(i, i), if inside { 1.0 } else { 0.0 });
        }
        let report = verify_theorem_bounds(&chain, &[-1, 2], 0.0).unwrap();
        assert!(report.pass, "{:?}", report.checks);
    }

    #[test]
    fn identities_on_sos_solution() {
        let q = TransferOperator::sos(2.4, GroupSpace::window(30).unwrap()).unwrap();
        let sol = solve(q.clone(), &[0, 5]);
        let chain = MarkovChainGibbs::from_boundary_law(&sol, &q).unwrap();
        assert!((chain.pi().sum() - 1.0).abs() < 1e-14);
        assert!(chain.row_sum_defect() <= chain.row_sum_tolerance());
        assert!(chain.reversibility_defect() < 1e-12);
        assert!(chain.marginal_formula_defect() < 1e-10);
        assert!(chain.lazy_set_holds());
        for (&dv, &xv) in chain.delta().values().iter().zip(sol.xbar.values()) {
            assert!((dv - xv).abs() <= 1e-14 * xv);
        }
        let report = verify_theorem_bounds(&chain, &[0, 5], sol.epsilon.epsilon).unwrap();
        assert!(report.pass, "{:#?}", report.checks);
    }

    #[test]
    fn mismatched_set_fails_laziness() {
        let q = TransferOperator::sos(2.4, GroupSpace::window(30).unwrap()).unwrap();
        let sol = solve(q.clone(), &[0, 5]);
        let chain = MarkovChainGibbs::from_boundary_law(&sol, &q).unwrap();
        let report = verify_theorem_bounds(&chain, &[0, 9], sol.epsilon.epsilon).unwrap();
        assert!(!report.pass);
        assert!(!report.checks.iter().find(|c| c.name == "inside diagonal > 1/d").unwrap().pass);
    }

    #[test]
    fn layout_matches_arity_schedule() {
        let l = TreeSample::layout(2, 3);
        assert_eq!(l.len(), 22);
        assert_eq!(l.iter().filter(|(p, _)| *p == Some(0)).count(), 3);
        assert_eq!(l.iter().filter(|(p, _)| *p == Some(1)).count(), 2);
        assert_eq!(TreeSample::layout(3, 0).len(), 1);
    }

    #[test]
    fn finite_volume_star_reproduces_pi() {
        let q = TransferOperator::sos(2.4, GroupSpace::window(6).unwrap()).unwrap();
        let sol = solve(q.clone(), &[0]);
        let chain = MarkovChainGibbs::from_boundary_law(&sol, &q).unwrap();
        let fv = FiniteVolume::new(&sol, &q, FiniteSubtree::star(2)).unwrap();
        let m = fv.vertex_marginal(0);
        for (a, b) in m.values().iter().zip(chain.pi().values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn too_large_subtree_is_rejected() {
        let q = TransferOperator::sos(2.4, GroupSpace::window(20).unwrap()).unwrap();
        let sol = solve(q.clone(), &[0]);
        assert!(matches!(
            FiniteVolume::new(&sol, &q, FiniteSubtree::edge(2)),
            Err(Error::SubtreeTooLarge { .. })
        ));
    }

    #[test]
    fn csv_has_one_row_per_vertex() {
        let q = TransferOperator::sos(2.4, GroupSpace::window(10).unwrap()).unwrap();
        let sol = solve(q.clone(), &[0]);
        let chain = MarkovChainGibbs::from_boundary_law(&sol, &q).unwrap();
        let s = TreeSampler::new(&chain).unwrap().sample_trees(2, 3, 7);
        let mut buf = Vec::new();
        write_samples_csv(&s, chain.space(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 10);
    }
}
