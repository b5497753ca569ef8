//! Command-line front end.
//!
//! Every command prints its primary artifact to stdout, or writes it to
//! `--out <dir>` together with auxiliary data files. JSON artifacts carry
//! `"schema": 1` and have sorted keys. The exit code is 0 when every
//! asserted bound passes, 1 when a bound fails, and 2 on errors; errors are
//! reported on stderr as JSON with a machine-readable `error` code.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::check::{all_pass, BoundCheck};
use crate::config::{ModelConfig, ThresholdModel};
use crate::error::{Error, Result};
use crate::gibbs::{derive_seed, empirical_marginal, write_samples_csv, MarkovChainGibbs, TreeSampler};
use crate::gradient::{
    build_fuzzy_chain, compare_pairs, delocalization_stat, inside_jump_mass, marginalization_defects, sample_branch,
};
use crate::potentials::{log_threshold, sos_threshold};
use crate::seqspace::Partition;
use crate::verify::{asymptotics_suite, gibbs_suite, lemma_shape_suite, solver_suite, VerifyReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "treegibbs", version, about = "Localized boundary laws and gradient Gibbs measures on regular trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML model configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed; overrides `sampling.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Directory for output files instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Strong-coupling thresholds for the SOS or log potential.
    Thresholds {
        #[arg(long, value_delimiter = ',')]
        d: Option<Vec<u32>>,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u32>>,
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
    /// Solve the boundary-law equation and certify the measure.
    Solve,
    /// Run the lemma, solver and measure invariant suites.
    Verify,
    /// Sample tree configurations and compare single-site frequencies.
    Sample,
    /// Fuzzy chain, delocalization statistics and pair distributions.
    Ggm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Sos,
    Log,
}

/// Files produced by a command; the first one is the primary artifact.
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub pass: bool,
}

fn json_artifact(command: &str, payload: impl Serialize) -> Result<String> {
    let mut value = serde_json::to_value(payload).map_err(|e| Error::Io(e.to_string()))?;
    if let Value::Object(map) = &mut value {
        map.insert("schema".into(), json!(SCHEMA_VERSION));
        map.insert("command".into(), json!(command));
    }
    // Round-trip through Value so object keys come out sorted.
    let mut s = serde_json::to_string_pretty(&value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn checks_csv(rows: impl IntoIterator<Item = (String, BoundCheck)>) -> String {
    let mut s = String::from("suite,name,measured,relation,bound,pass\n");
    for (suite, c) in rows {
        let _ = writeln!(s, "{suite},\"{}\",{:?},{},{:?},{}", c.name, c.measured, c.relation, c.bound, c.pass);
    }
    s
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => ModelConfig::load(p)?,
        None => ModelConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sampling.seed = seed;
    }
    match &cli.command {
        Command::Thresholds { d, n, model } => {
            if let Some(d) = d {
                cfg.thresholds.d = d.clone();
            }
            if let Some(n) = n {
                cfg.thresholds.n = n.clone();
            }
            if let Some(m) = model {
                cfg.thresholds.model = match m {
                    ModelArg::Sos => ThresholdModel::Sos,
                    ModelArg::Log => ThresholdModel::Log,
                };
            }
            cmd_thresholds(&cfg, cli.format.unwrap_or(Format::Csv))
        }
        Command::Solve => cmd_solve(&cfg, cli.format.unwrap_or(Format::Json)),
        Command::Verify => cmd_verify(&cfg, cli.format.unwrap_or(Format::Json)),
        Command::Sample => cmd_sample(&cfg, cli.format.unwrap_or(Format::Csv)),
        Command::Ggm => cmd_ggm(&cfg, cli.format.unwrap_or(Format::Json)),
    }
}

/// Writes the outcome to `out` (all files) or stdout (primary file only).
pub fn emit(outcome: &Outcome, out: Option<&Path>) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for (name, contents) in &outcome.files {
                std::fs::write(dir.join(name), contents)?;
            }
        }
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(outcome.files[0].1.as_bytes())?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ThresholdRow {
    d: u32,
    n: u32,
    threshold: f64,
}

/// Threshold table rows `(d, n, β)`.
pub fn threshold_table(model: ThresholdModel, ds: &[u32], ns: &[u32]) -> Result<Vec<(u32, u32, f64)>> {
    let mut rows = Vec::new();
    for &d in ds {
        for &n in ns {
            if d < 2 || n < 1 {
                return Err(Error::InvalidInput(format!("need d >= 2 and n >= 1, got d={d} n={n}")));
            }
            let b = match model {
                ThresholdModel::Sos => sos_threshold(d, n),
                ThresholdModel::Log => log_threshold(d, n),
            };
            rows.push((d, n, b));
        }
    }
    Ok(rows)
}

/// Aligned text table with one row per `d` and one column per `n`.
pub fn threshold_text(model: ThresholdModel, ds: &[u32], ns: &[u32], rows: &[(u32, u32, f64)]) -> String {
    let mut s = format!("{:<6}", if model == ThresholdModel::Sos { "sos" } else { "log" });
    for n in ns {
        let _ = write!(s, "{:>9}", format!("n={n}"));
    }
    s.push('\n');
    for &d in ds {
        let _ = write!(s, "{:<6}", format!("d={d}"));
        for &n in ns {
            let b = rows.iter().find(|r| r.0 == d && r.1 == n).map(|r| r.2).unwrap_or(f64::NAN);
            let _ = write!(s, "{b:>9.3}");
        }
        s.push('\n');
    }
    s
}

fn cmd_thresholds(cfg: &ModelConfig, format: Format) -> Result<Outcome> {
    let t = &cfg.thresholds;
    let rows = threshold_table(t.model, &t.d, &t.n)?;
    let model = if t.model == ThresholdModel::Sos { "sos" } else { "log" };
    let mut csv = String::from("model,d,n,threshold\n");
    for (d, n, b) in &rows {
        let _ = writeln!(csv, "{model},{d},{n},{b:.3}");
    }
    let json = json_artifact(
        "thresholds",
        json!({
            "model": model,
            "rows": rows.iter().map(|&(d, n, threshold)| ThresholdRow { d, n, threshold }).collect::<Vec<_>>(),
        }),
    )?;
    let text = threshold_text(t.model, &t.d, &t.n, &rows);
    let mut files = match format {
        Format::Csv => vec![("thresholds.csv".into(), csv), ("thresholds.json".into(), json)],
        Format::Json => vec![("thresholds.json".into(), json), ("thresholds.csv".into(), csv)],
    };
    files.push(("thresholds.txt".into(), text));
    Ok(Outcome { files, pass: true })
}

fn solve_artifacts(cfg: &ModelConfig) -> Result<(crate::solver::BoundaryLawSolution, MarkovChainGibbs)> {
    let problem = cfg.problem()?;
    let sol = problem.solve_uncertified()?;
    let chain = MarkovChainGibbs::from_boundary_law(&sol, problem.operator())?;
    Ok((sol, chain))
}

fn cmd_solve(cfg: &ModelConfig, format: Format) -> Result<Outcome> {
    let (sol, chain) = solve_artifacts(cfg)?;
    let report = crate::gibbs::verify_theorem_bounds(&chain, &sol.localization, sol.epsilon.epsilon)?;
    let identities = vec![
        BoundCheck::le("row sums (max defect)", chain.row_sum_defect(), chain.row_sum_tolerance()),
        BoundCheck::lt("reversibility (max defect)", chain.reversibility_defect(), 1e-12),
        BoundCheck::lt("marginal transition formula (max defect)", chain.marginal_formula_defect(), 1e-10),
    ];
    let pass = all_pass(&sol.certificate) && report.pass && all_pass(&identities);
    let space = sol.space();
    let mut csv = String::from("element,xbar,pi,delta\n");
    for (i, e) in space.elements().enumerate() {
        let _ = writeln!(
            csv,
            "{e},{:?},{:?},{:?}",
            sol.xbar.values()[i],
            chain.pi().values()[i],
            chain.delta().values()[i]
        );
    }
    let json = json_artifact(
        "solve",
        json!({
            "config": cfg,
            "solution": {
                "d": sol.d,
                "localization": sol.localization,
                "elements": space.elements().collect::<Vec<_>>(),
                "xbar": sol.xbar.values(),
                "epsilon": sol.epsilon,
                "constants": sol.constants,
                "r_q": sol.r_q,
                "residual": sol.residual,
                "inner_iterations": sol.inner_iterations,
                "outer_iterations": sol.outer_iterations,
                "bracket_width": sol.bracket_width,
                "certificate": sol.certificate,
            },
            "measure": chain.to_json(),
            "identities": identities,
            "theorem": report,
            "pass": pass,
        }),
    )?;
    let files = match format {
        Format::Json => vec![("solve.json".into(), json), ("solve.csv".into(), csv)],
        Format::Csv => vec![("solve.csv".into(), csv), ("solve.json".into(), json)],
    };
    Ok(Outcome { files, pass })
}

/// Runs every suite for `cfg` and collects the results.
pub fn verify_report(cfg: &ModelConfig) -> Result<VerifyReport> {
    let v = &cfg.verify;
    let mut suites = BTreeMap::new();
    suites.insert("constants.shape".to_string(), lemma_shape_suite(&v.d, &v.n, v.grid));
    suites.insert("constants.asymptotics".to_string(), asymptotics_suite(&v.d, &v.n)?);
    let problem = cfg.problem()?;
    let sol = problem.solve_uncertified()?;
    suites.insert("solver".to_string(), solver_suite(&problem, &sol, v.shift)?);
    let chain = MarkovChainGibbs::from_boundary_law(&sol, problem.operator())?;
    suites.insert("gibbs".to_string(), gibbs_suite(&chain, &sol, v.dlr_configurations)?);
    Ok(VerifyReport::new(suites))
}

fn cmd_verify(cfg: &ModelConfig, format: Format) -> Result<Outcome> {
    let report = verify_report(cfg)?;
    let csv = checks_csv(report.suites.iter().flat_map(|(s, cs)| cs.iter().map(move |c| (s.clone(), c.clone()))));
    let json = json_artifact("verify", &report)?;
    let files = match format {
        Format::Json => vec![("verify.json".into(), json), ("verify.csv".into(), csv)],
        Format::Csv => vec![("verify.csv".into(), csv), ("verify.json".into(), json)],
    };
    Ok(Outcome { files, pass: report.pass })
}

/// Checks on sampled marginals: every entry within 3 standard errors of `π`
/// and the concentration inequality for the empirical marginal.
pub fn sample_checks(chain: &MarkovChainGibbs, est: &crate::gibbs::MarginalEstimate) -> Result<Vec<BoundCheck>> {
    let pi = chain.pi().values();
    let se = est.null_standard_error(chain.pi());
    let mut worst_z = 0.0_f64;
    for ((p, h), s) in pi.iter().zip(est.pi_hat.values()).zip(&se) {
        let diff = (p - h).abs();
        let z = if diff == 0.0 { 0.0 } else { diff / s };
        worst_z = worst_z.max(z);
    }
    let part = Partition::new(chain.space(), chain.localization())?;
    let hat = est.pi_hat.values();
    let out: f64 = part.outside().iter().map(|&i| hat[i]).sum();
    let min_in = part.inside().iter().map(|&i| hat[i]).fold(f64::INFINITY, f64::min);
    let theta = crate::constants::ModelConstants::new(chain.d(), part.len() as u32)?.theta;
    Ok(vec![
        BoundCheck::le("max |pi_hat - pi| / SE", worst_z, 3.0),
        BoundCheck::lt("sampled outside mass < theta * min inside", out, theta * min_in),
    ])
}

fn cmd_sample(cfg: &ModelConfig, format: Format) -> Result<Outcome> {
    let (_, chain) = solve_artifacts(cfg)?;
    let s = &cfg.sampling;
    let sampler = TreeSampler::new(&chain)?;
    let trees = sampler.sample_trees(s.depth, s.trees, s.seed);
    let est = empirical_marginal(&trees, chain.space())?;
    let checks = sample_checks(&chain, &est)?;
    let pass = all_pass(&checks);
    let mut csv = Vec::new();
    write_samples_csv(&trees, chain.space(), &mut csv)?;
    let csv = String::from_utf8(csv).expect("ascii");
    let json = json_artifact(
        "sample",
        json!({
            "seed": s.seed,
            "trees": s.trees,
            "depth": s.depth,
            "vertices_per_tree": trees[0].vertex_count(),
            "elements": chain.space().elements().collect::<Vec<_>>(),
            "pi": chain.pi().values(),
            "pi_hat": est.pi_hat.values(),
            "standard_error": est.standard_error,
            "null_standard_error": est.null_standard_error(chain.pi()),
            "checks": checks,
            "pass": pass,
        }),
    )?;
    let files = match format {
        Format::Csv => vec![("samples.csv".into(), csv), ("sample.json".into(), json)],
        Format::Json => vec![("sample.json".into(), json), ("samples.csv".into(), csv)],
    };
    Ok(Outcome { files, pass })
}

fn cmd_ggm(cfg: &ModelConfig, format: Format) -> Result<Outcome> {
    let g = &cfg.ggm;
    let base = cfg.operator()?;
    let fc = build_fuzzy_chain(&base, g.modulus, cfg.d, &g.localization, cfg.tolerances)?;
    let seed = cfg.sampling.seed;
    let deloc = delocalization_stat(&fc, &g.n_grid, g.k, g.samples, derive_seed(seed, 0))?;
    let branches = fc.sample_branches(g.branch_length, g.branches, derive_seed(seed, 1));
    let rows = compare_pairs(&fc, &branches, g.top_cells)?;
    let (row_defect, total_defect) = marginalization_defects(&fc);
    let worst_z = rows.iter().map(|r| r.z).fold(0.0, f64::max);
    let branch_congruence = branches.iter().filter(|b| !b.congruence_holds(g.modulus)).count();
    let checks = vec![
        fc.hypothesis(),
        BoundCheck::le(
            "congruence violations",
            (deloc.congruence_violations + branch_congruence) as f64,
            0.0,
        ),
        BoundCheck::ge("P(W_n = k) has no significant increase", deloc.decreasing_within(3.0) as u8 as f64, 1.0),
        BoundCheck::le("pair cells max |z|", worst_z, 3.0),
        BoundCheck::le("pair law row sums vs pi", row_defect, 1e-8),
        BoundCheck::le("pair law total mass", total_defect, 1e-8),
        BoundCheck::gt("A-to-A pair mass", inside_jump_mass(&fc), 0.5),
    ];
    let pass = all_pass(&checks);
    let mut csv = String::from("abar,c,formula,estimate,standard_error,z\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{:?},{:?},{:?},{:?}", r.abar, r.c, r.formula, r.estimate, r.standard_error, r.z);
    }
    let mut branch_csv = Vec::new();
    sample_branch(&fc, g.n_grid.last().copied().unwrap_or(1), derive_seed(seed, 2))?.write_csv(&mut branch_csv)?;
    let json = json_artifact(
        "ggm",
        json!({
            "seed": seed,
            "modulus": g.modulus,
            "localization": g.localization,
            "fuzzy_operator": fc.fuzzy_operator().operator.table().values(),
            "fuzzy_zero_mass": fc.fuzzy_operator().zero_mass,
            "fuzzy_tail_l1": fc.fuzzy_operator().tail_l1,
            "pi": fc.chain().pi().values(),
            "delocalization": deloc,
            "pairs": rows,
            "checks": checks,
            "pass": pass,
        }),
    )?;
    let branch_csv = String::from_utf8(branch_csv).expect("ascii");
    let files = match format {
        Format::Json => vec![("ggm.json".into(), json), ("ggm_pairs.csv".into(), csv)],
        Format::Csv => vec![("ggm_pairs.csv".into(), csv), ("ggm.json".into(), json)],
    };
    let mut files = files;
    files.push(("ggm_branch.csv".into(), branch_csv));
    Ok(Outcome { files, pass })
}

/// Machine-readable error report for stderr.
pub fn error_json(e: &Error) -> String {
    let v = json!({ "schema": SCHEMA_VERSION, "error": e.code(), "message": e.to_string() });
    format!("{}\n", serde_json::to_string(&v).expect("serializable"))
}
