//! Delocalized gradient measures from a localized chain on `Z_q`.
//!
//! The class-summed operator `Q_q` on `Z_q` yields a localized fuzzy chain.
//! Integer increments are then drawn edge-wise from
//! `ρ(j | ī) = 1_{ī}(j) Q(j) / Q^q(ī)` given the fuzzy difference `ī` along
//! the edge; the total increment `W_n` along a path spreads out as `n` grows.

use std::collections::BTreeMap;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::check::BoundCheck;
use crate::error::{Error, Result};
use crate::gibbs::{stream_rng, MarkovChainGibbs, TreeSampler};
use crate::potentials::{FuzzyOperator, TransferOperator};
use crate::seqspace::GroupSpace;
use crate::solver::{BoundaryLawSolution, LocalizationProblem, Tolerances};

/// `ρ(· | ī)` restricted to the window.
#[derive(Clone, Debug)]
pub struct IncrementKernel {
    pub class: usize,
    pub support: Vec<i64>,
    pub weights: Vec<f64>,
    /// Upper bound on the relative mass of the class lying outside the window.
    pub dropped_tail: f64,
    sampler: Option<WeightedIndex<f64>>,
}

impl IncrementKernel {
    fn new(base: &TransferOperator, q: usize, class: usize, tail_l1: f64) -> Self {
        let space = base.space();
        let support: Vec<i64> = space.elements().filter(|e| e.rem_euclid(q as i64) as usize == class).collect();
        let raw: Vec<f64> = support.iter().map(|&j| base.table().get(j)).collect();
        let mass: f64 = raw.iter().sum();
        let (weights, sampler, dropped_tail) = if mass > 0.0 {
            let w: Vec<f64> = raw.iter().map(|v| v / mass).collect();
            let s = WeightedIndex::new(&w).ok();
            (w, s, tail_l1 / mass)
        } else {
            (raw, None, 0.0)
        };
        IncrementKernel { class, support, weights, dropped_tail, sampler }
    }

    /// Draws an increment. A class without mass in the window falls back to
    /// its representative of smallest absolute value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match &self.sampler {
            Some(s) => self.support[s.sample(rng)],
            None => *self.support.iter().min_by_key(|j| j.unsigned_abs()).expect("nonempty class"),
        }
    }

    pub fn weight(&self, j: i64) -> f64 {
        self.support.iter().position(|&s| s == j).map_or(0.0, |k| self.weights[k])
    }
}

pub struct FuzzyChain {
    q: usize,
    base: TransferOperator,
    fuzzy: FuzzyOperator,
    solution: BoundaryLawSolution,
    chain: MarkovChainGibbs,
    kernels: Vec<IncrementKernel>,
    sampler: TreeSampler,
}

/// Solves the boundary law on `Z_q` for `Q_q` and `A`, builds the chain and
/// the increment kernels.
pub fn build_fuzzy_chain(base: &TransferOperator, q: usize, d: u32, a: &[i64], tol: Tolerances) -> Result<FuzzyChain> {
    let fuzzy = base.fuzzy_operator(q)?;
    let problem = LocalizationProblem::new(d, fuzzy.operator.clone(), a, tol)?;
    let solution = problem.solve()?;
    let chain = MarkovChainGibbs::from_boundary_law(&solution, &fuzzy.operator)?;
    let kernels = (0..q).map(|c| IncrementKernel::new(base, q, c, fuzzy.tail_l1)).collect();
    let sampler = TreeSampler::new(&chain)?;
    Ok(FuzzyChain { q, base: base.clone(), fuzzy, solution, chain, kernels, sampler })
}

impl FuzzyChain {
    pub fn modulus(&self) -> usize {
        self.q
    }

    pub fn base(&self) -> &TransferOperator {
        &self.base
    }

    pub fn fuzzy_operator(&self) -> &FuzzyOperator {
        &self.fuzzy
    }

    pub fn solution(&self) -> &BoundaryLawSolution {
        &self.solution
    }

    pub fn chain(&self) -> &MarkovChainGibbs {
        &self.chain
    }

    pub fn space(&self) -> GroupSpace {
        self.chain.space()
    }

    /// `‖Q_q − 1_0‖_{(d+1)/2} ≤ η(d,|A|)`.
    pub fn hypothesis(&self) -> BoundCheck {
        BoundCheck::le("fuzzy deviation <= eta", self.solution.epsilon.epsilon, self.solution.constants.eta)
    }

    /// Largest relative mass of a class lost to the window.
    pub fn kernel_tail(&self) -> f64 {
        self.kernels.iter().map(|k| k.dropped_tail).fold(0.0, f64::max)
    }

    pub fn sample_branch_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PathSample {
        let q = self.q as i64;
        let mut fuzzy = Vec::with_capacity(n + 1);
        let mut increments = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n + 1);
        let mut state = self.sampler.sample_root(rng);
        fuzzy.push(state as i64);
        w.push(0);
        for _ in 0..n {
            let next = self.sampler.step(state, rng);
            let class = (next as i64 - state as i64).rem_euclid(q) as usize;
            let j = self.kernels[class].sample(rng);
            increments.push(j);
            w.push(w.last().unwrap() + j);
            fuzzy.push(next as i64);
            state = next;
        }
        PathSample { fuzzy_states: fuzzy, increments, w }
    }

    /// `count` independent branches of length `n`; branch `b` uses stream `b`
    /// of `seed`.
    pub fn sample_branches(&self, n: usize, count: usize, seed: u64) -> Vec<PathSample> {
        (0..count)
            .into_par_iter()
            .map(|b| self.sample_branch_with(n, &mut stream_rng(seed, b as u64)))
            .collect()
    }

    /// `π(ā) π(ā+c̄)^{d/(d+1)} Q(c) / (Q^q∗π^{d/(d+1)})(ā)` with the
    /// unnormalized class sums `Q^q`.
    pub fn pair_limit_formula(&self, abar: i64, c: i64) -> f64 {
        let space = self.space();
        let df = self.chain.d() as f64;
        let pi = self.chain.pi();
        let w = pi.map(|v| v.powf(df / (df + 1.0)));
        let a = space.reduce(abar);
        let denom: f64 = space
            .elements()
            .map(|b| self.fuzzy.class_sums.get(space.reduce(a - b)) * w.get(b))
            .sum();
        pi.get(a) * w.get(space.reduce(a + c)) * self.base.table().get(c) / denom
    }

    /// All cells `(ā, c)` of the limiting pair law with `c` in the window.
    pub fn pair_limit_table(&self) -> BTreeMap<(i64, i64), f64> {
        let mut out = BTreeMap::new();
        for a in self.space().elements() {
            for c in self.base.space().elements() {
                out.insert((a, c), self.pair_limit_formula(a, c));
            }
        }
        out
    }

    /// Exact law of the increment on one edge at stationarity,
    /// `Σ_{ā,b̄} π(ā) P(ā,b̄) ρ(c | b̄−ā)`.
    pub fn increment_law(&self) -> BTreeMap<i64, f64> {
        let space = self.space();
        let q = self.q as i64;
        let mut out: BTreeMap<i64, f64> = self.base.space().elements().map(|c| (c, 0.0)).collect();
        for a in 0..space.size() {
            for b in 0..space.size() {
                let mass = self.chain.pi().values()[a] * self.chain.p(a, b);
                let class = (b as i64 - a as i64).rem_euclid(q) as usize;
                let k = &self.kernels[class];
                for (&j, &wj) in k.support.iter().zip(&k.weights) {
                    *out.get_mut(&j).expect("window element") += mass * wj;
                }
            }
        }
        out
    }
}

pub fn increment_kernel(fc: &FuzzyChain, ibar: i64) -> &IncrementKernel {
    &fc.kernels[ibar.rem_euclid(fc.q as i64) as usize]
}

/// Fuzzy states, integer increments and partial sums along one path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSample {
    /// Length `n+1`, elements of `Z_q` in `0..q`.
    pub fuzzy_states: Vec<i64>,
    /// Length `n`.
    pub increments: Vec<i64>,
    /// `w[k] = increments[0] + ... + increments[k-1]`, length `n+1`.
    pub w: Vec<i64>,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn total(&self) -> i64 {
        *self.w.last().expect("w starts at 0")
    }

    /// Every increment is congruent to the fuzzy difference along its edge.
    pub fn congruence_holds(&self, q: usize) -> bool {
        let q = q as i64;
        self.increments
            .iter()
            .enumerate()
            .all(|(k, j)| (j - (self.fuzzy_states[k + 1] - self.fuzzy_states[k])).rem_euclid(q) == 0)
    }

    /// CSV rows `step,fuzzy_state,increment,w`; the increment is empty at
    /// step 0.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,fuzzy_state,increment,w")?;
        for k in 0..=self.len() {
            let inc = if k == 0 { String::new() } else { self.increments[k - 1].to_string() };
            writeln!(out, "{k},{},{inc},{}", self.fuzzy_states[k], self.w[k])?;
        }
        Ok(())
    }
}

pub fn sample_branch(fc: &FuzzyChain, n: usize, seed: u64) -> Result<PathSample> {
    if n < 1 {
        return Err(Error::InvalidInput("branch length must be at least 1".into()));
    }
    Ok(fc.sample_branch_with(n, &mut ChaCha8Rng::seed_from_u64(seed)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DelocalizationPoint {
    pub n: usize,
    pub estimate: f64,
    pub standard_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DelocalizationStat {
    pub k: i64,
    pub samples: usize,
    pub points: Vec<DelocalizationPoint>,
    /// Standard error of `P̂(W_{n'}=k) − P̂(W_n=k)` for consecutive grid
    /// points, from the paired per-sample differences.
    pub difference_errors: Vec<f64>,
    /// Edges whose increment is not congruent to the fuzzy difference.
    pub congruence_violations: usize,
}

impl DelocalizationStat {
    /// No consecutive pair shows an increase larger than `z` standard errors.
    pub fn decreasing_within(&self, z: f64) -> bool {
        self.points
            .windows(2)
            .zip(&self.difference_errors)
            .all(|(p, se)| p[1].estimate - p[0].estimate <= z * se)
    }
}

/// Monte Carlo estimates of `ν(W_n = k)` for each `n` in `n_grid`, one path
/// of length `max(n_grid)` per sample.
pub fn delocalization_stat(fc: &FuzzyChain, n_grid: &[usize], k: i64, samples: usize, seed: u64) -> Result<DelocalizationStat> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] < 1 {
        return Err(Error::InvalidInput("n_grid must be positive and strictly increasing".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidInput("need at least two samples".into()));
    }
    let n_max = *n_grid.last().unwrap();
    let (hits, bad): (Vec<Vec<bool>>, Vec<bool>) = (0..samples)
        .into_par_iter()
        .map(|s| {
            let path = fc.sample_branch_with(n_max, &mut stream_rng(seed, s as u64));
            (n_grid.iter().map(|&n| path.w[n] == k).collect(), !path.congruence_holds(fc.q))
        })
        .unzip();
    let t = samples as f64;
    let mean_sd = |vals: &mut dyn Iterator<Item = f64>| -> (f64, f64) {
        let (mut s, mut s2) = (0.0, 0.0);
        for v in vals {
            s += v;
            s2 += v * v;
        }
        let m = s / t;
        (m, (((s2 - t * m * m) / (t - 1.0)).max(0.0) / t).sqrt())
    };
    let points = (0..n_grid.len())
        .map(|g| {
            let (m, se) = mean_sd(&mut hits.iter().map(|h| h[g] as u8 as f64));
            DelocalizationPoint { n: n_grid[g], estimate: m, standard_error: se }
        })
        .collect();
    let difference_errors = (1..n_grid.len())
        .map(|g| mean_sd(&mut hits.iter().map(|h| h[g] as u8 as f64 - h[g - 1] as u8 as f64)).1)
        .collect();
    let congruence_violations = bad.iter().filter(|b| **b).count();
    Ok(DelocalizationStat { k, samples, points, difference_errors, congruence_violations })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairEstimate {
    pub estimate: f64,
    pub standard_error: f64,
}

/// Branch-averaged frequency of `(fuzzy_states[k], increments[k]) = (ā, c)`.
pub fn pair_empirical(samples: &[PathSample], abar: i64, c: i64) -> Result<PairEstimate> {
    let table = pair_empirical_table(samples)?;
    Ok(table.get(&(abar, c)).copied().unwrap_or(PairEstimate {
        estimate: 0.0,
        standard_error: 0.0,
    }))
}

/// [`pair_empirical`] for every observed cell at once.
pub fn pair_empirical_table(samples: &[PathSample]) -> Result<BTreeMap<(i64, i64), PairEstimate>> {
    if samples.is_empty() || samples.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidInput("need nonempty branches".into()));
    }
    let b = samples.len() as f64;
    let per_branch: Vec<BTreeMap<(i64, i64), f64>> = samples
        .iter()
        .map(|s| {
            let mut m = BTreeMap::new();
            for (k, &j) in s.increments.iter().enumerate() {
                *m.entry((s.fuzzy_states[k], j)).or_insert(0.0) += 1.0;
            }
            let n = s.len() as f64;
            m.values_mut().for_each(|v| *v /= n);
            m
        })
        .collect();
    let mut sums: BTreeMap<(i64, i64), (f64, f64)> = BTreeMap::new();
    for m in &per_branch {
        for (&key, &f) in m {
            let e = sums.entry(key).or_insert((0.0, 0.0));
            e.0 += f;
            e.1 += f * f;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(key, (s, s2))| {
            let m = s / b;
            let se = if samples.len() > 1 { (((s2 - b * m * m) / (b - 1.0)).max(0.0) / b).sqrt() } else { 0.0 };
            (key, PairEstimate { estimate: m, standard_error: se })
        })
        .collect())
}

/// One cell of the comparison between branch averages and the limit law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairRow {
    pub abar: i64,
    pub c: i64,
    pub formula: f64,
    pub estimate: f64,
    /// `max(branch SE, √(p(1−p)/(branches·length)))` with `p` the formula
    /// value; the floor is the error of independent edges and keeps cells
    /// that were never observed from getting a zero error bar.
    pub standard_error: f64,
    pub z: f64,
}

/// The `top` cells of highest limiting mass with their branch estimates.
pub fn compare_pairs(fc: &FuzzyChain, samples: &[PathSample], top: usize) -> Result<Vec<PairRow>> {
    let empirical = pair_empirical_table(samples)?;
    let edges = samples.iter().map(|s| s.len()).sum::<usize>() as f64;
    let mut cells: Vec<((i64, i64), f64)> = fc.pair_limit_table().into_iter().collect();
    cells.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(cells
        .into_iter()
        .take(top)
        .map(|((abar, c), formula)| {
            let e = empirical.get(&(abar, c)).copied().unwrap_or(PairEstimate { estimate: 0.0, standard_error: 0.0 });
            let floor = (formula * (1.0 - formula) / edges).sqrt();
            let se = e.standard_error.max(floor);
            let diff = (e.estimate - formula).abs();
            let z = if diff == 0.0 { 0.0 } else { diff / se };
            PairRow { abar, c, formula, estimate: e.estimate, standard_error: se, z }
        })
        .collect())
}

/// Limiting mass of cells with `ā ∈ A` and `ā + c̄ ∈ A`.
pub fn inside_jump_mass(fc: &FuzzyChain) -> f64 {
    let space = fc.space();
    let a = &fc.solution.localization;
    fc.pair_limit_table()
        .into_iter()
        .filter(|((abar, c), _)| a.contains(abar) && a.contains(&space.reduce(abar + c)))
        .map(|(_, v)| v)
        .sum()
}

/// `(max_ā |Σ_c L(ā,c) − π(ā)|, |Σ L − 1|)` for the limit law `L`.
pub fn marginalization_defects(fc: &FuzzyChain) -> (f64, f64) {
    let table = fc.pair_limit_table();
    let pi = fc.chain.pi();
    let mut row = vec![0.0; fc.q];
    for ((a, _), v) in &table {
        row[*a as usize] += v;
    }
    let worst = row.iter().enumerate().map(|(a, s)| (s - pi.values()[a]).abs()).fold(0.0, f64::max);
    (worst, (row.iter().sum::<f64>() - 1.0).abs())
}
