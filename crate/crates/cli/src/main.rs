//! Command-line front end: analyze a chain, compare a perturbed pair
//! against the closeness bounds, simulate and estimate trajectories, list
//! graph families, and reproduce the built-in three-state benchmark.
//!
//! Exit status: 0 when the run succeeds and every applicable bound holds,
//! 1 when an applicable bound is violated, 2 on input errors.

mod render;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use chainsense::formulas::FwSolver;
use chainsense::graphs;
use chainsense::oracles;
use chainsense::perturb::{self, ClosenessParams, DeviationReport};
use chainsense::subset::StateSet;
use chainsense::{fixtures, Chain64, StateSpace, DEFAULT_ENUMERATION_CAP};

#[derive(Parser)]
#[command(
    name = "chainsense",
    version,
    about = "Sensitivity analysis of finite Markov chains under transition-matrix perturbation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output mode: human tables or a JSON document
    #[arg(long, global = true, value_enum, default_value_t = OutputMode::Table)]
    output: OutputMode,
    /// Cap on the state-space size for graph enumeration
    #[arg(long, global = true, default_value_t = DEFAULT_ENUMERATION_CAP)]
    cap: usize,
    /// Seed for simulation commands
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputMode {
    Table,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary distribution (two routes), minimized cut, and visit
    /// statistics for requested subsets
    Analyze {
        /// Chain file (JSON with `states` and `matrix`)
        chain: PathBuf,
        /// Subset of states, comma-separated labels; repeatable
        #[arg(long = "set", value_name = "LABELS")]
        sets: Vec<String>,
    },
    /// Compare a perturbed chain against a base chain at a closeness level
    Compare {
        /// Base chain file (must be irreducible)
        q: PathBuf,
        /// Perturbed chain file
        qhat: PathBuf,
        /// Closeness epsilon (decimal or fraction like 1/10)
        #[arg(long, value_parser = parse_real)]
        eps: f64,
        /// Closeness beta (decimal or fraction)
        #[arg(long, value_parser = parse_real)]
        beta: f64,
        /// Restrict the relation to this subset (comma-separated labels)
        #[arg(long, value_name = "LABELS")]
        subset: Option<String>,
        /// Mixing level for the subset gate: a number, or `auto` to
        /// compute it from the base chain
        #[arg(long, default_value = "auto")]
        mixing: String,
        /// Extra subsets whose exit laws and visit lengths are compared;
        /// repeatable. Defaults to all proper subsets of a small space
        #[arg(long = "set", value_name = "LABELS")]
        sets: Vec<String>,
    },
    /// Simulate a trajectory and write it in the trajectory file format
    Simulate {
        chain: PathBuf,
        /// Number of states to emit (start state included)
        #[arg(long)]
        steps: usize,
        /// Start state label (defaults to the first state)
        #[arg(long)]
        start: Option<String>,
        /// Output file; without it the trajectory goes to stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the empirical matrix of a trajectory and check its
    /// closeness to the generating chain
    Estimate {
        chain: PathBuf,
        trajectory: PathBuf,
        /// Closeness epsilon; defaults to 90% of the admissible cap
        #[arg(long, value_parser = parse_real)]
        eps: Option<f64>,
        /// Closeness beta; defaults to 90% of its admissible cap
        #[arg(long, value_parser = parse_real)]
        beta: Option<f64>,
    },
    /// List all graphs over a subset with their weights and exit targets
    Graphs {
        chain: PathBuf,
        /// Subset of states, comma-separated labels
        #[arg(long = "set", value_name = "LABELS")]
        set: String,
    },
    /// Reproduce the built-in three-state benchmark comparison: a rare
    /// state is rewired and the closeness bound is set against the
    /// mean-passage and deleted-inverse bounds
    Example {
        /// Probability of entering the rare state, in (0, 1/2)
        #[arg(long, value_parser = parse_real)]
        delta: f64,
        /// Mass the rare state redirects, in (0, 1)
        #[arg(long, value_parser = parse_real)]
        eta: f64,
        /// Closeness epsilon; defaults to 90% of the admissible cap
        #[arg(long, value_parser = parse_real)]
        eps: Option<f64>,
        /// Closeness beta; defaults to 90% of its admissible cap
        #[arg(long, value_parser = parse_real)]
        beta: Option<f64>,
    },
}

/// Accept decimals or simple fractions ("1/10") so exact benchmark inputs
/// stay expressible.
fn parse_real(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let n: f64 = num.trim().parse().map_err(|e| format!("{e}"))?;
            let d: f64 = den.trim().parse().map_err(|e| format!("{e}"))?;
            if d == 0.0 {
                return Err("zero denominator".to_string());
            }
            n / d
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if !value.is_finite() {
        return Err("value must be finite".to_string());
    }
    Ok(value)
}

fn load_chain(path: &PathBuf) -> Result<Chain64> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read chain file {}", path.display()))?;
    Chain64::parse(&text).with_context(|| format!("invalid chain file {}", path.display()))
}

fn parse_set(space: &StateSpace, labels: &str) -> Result<StateSet> {
    let set = space.set_from_labels(labels.split(','))?;
    if set.is_empty() {
        bail!("subset is empty");
    }
    Ok(set)
}

fn emit<T: Serialize>(mode: OutputMode, value: &T, table: String) -> Result<()> {
    match mode {
        OutputMode::Table => print!("{table}"),
        OutputMode::Structured => {
            println!("{}", serde_json::to_string_pretty(value)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Analyze { chain, sets } => cmd_analyze(&cli, chain, sets),
        Command::Compare {
            q,
            qhat,
            eps,
            beta,
            subset,
            mixing,
            sets,
        } => cmd_compare(&cli, q, qhat, *eps, *beta, subset.as_deref(), mixing, sets),
        Command::Simulate {
            chain,
            steps,
            start,
            out,
        } => cmd_simulate(&cli, chain, *steps, start.as_deref(), out.as_ref()),
        Command::Estimate {
            chain,
            trajectory,
            eps,
            beta,
        } => cmd_estimate(&cli, chain, trajectory, *eps, *beta),
        Command::Graphs { chain, set } => cmd_graphs(&cli, chain, set),
        Command::Example {
            delta,
            eta,
            eps,
            beta,
        } => cmd_example(&cli, *delta, *eta, *eps, *beta),
    }
}

#[derive(Serialize)]
struct EntryOut {
    state: String,
    probability: f64,
}

#[derive(Serialize)]
struct ExitLawOut {
    from: String,
    expected_exit_time: f64,
    law: Vec<EntryOut>,
}

#[derive(Serialize)]
struct AnalyzeSubsetOut {
    labels: Vec<String>,
    entry_distribution: Vec<EntryOut>,
    mean_visit_length: f64,
    exits: Vec<ExitLawOut>,
}

#[derive(Serialize)]
struct AnalyzeOut {
    command: &'static str,
    chain: String,
    states: Vec<String>,
    stationary_graph_route: Vec<f64>,
    stationary_linear_route: Vec<f64>,
    zeta: f64,
    zeta_argmin: Vec<String>,
    graph_count_bound: u64,
    subsets: Vec<AnalyzeSubsetOut>,
}

fn cmd_analyze(cli: &Cli, path: &PathBuf, sets: &[String]) -> Result<ExitCode> {
    let chain = load_chain(path)?;
    let solver = FwSolver::with_cap(&chain, cli.cap)?;
    let fw = solver.stationary()?;
    let mu = oracles::stationary_solve(&chain)?;
    let z = perturb::zeta(&chain, &mu)?;
    let l = perturb::l_const(chain.n())?;
    let space = chain.space();

    let mut subsets = Vec::new();
    for labels in sets {
        let domain = parse_set(space, labels)?;
        let stats = solver.visit_stats(domain)?;
        let mut exits = Vec::new();
        for s in domain.iter() {
            let law = solver.exit_distribution(domain, s)?;
            exits.push(ExitLawOut {
                from: space.label(s).to_string(),
                expected_exit_time: solver.exit_time(domain, s)?,
                law: domain
                    .complement(chain.n())
                    .iter()
                    .map(|t| EntryOut {
                        state: space.label(t).to_string(),
                        probability: law.law.get(t),
                    })
                    .collect(),
            });
        }
        subsets.push(AnalyzeSubsetOut {
            labels: domain.iter().map(|s| space.label(s).to_string()).collect(),
            entry_distribution: domain
                .iter()
                .map(|s| EntryOut {
                    state: space.label(s).to_string(),
                    probability: stats.entry.get(s),
                })
                .collect(),
            mean_visit_length: stats.mean_length,
            exits,
        });
    }

    let out = AnalyzeOut {
        command: "analyze",
        chain: path.display().to_string(),
        states: space.labels().to_vec(),
        stationary_graph_route: fw.as_slice().to_vec(),
        stationary_linear_route: mu.as_slice().to_vec(),
        zeta: z.value,
        zeta_argmin: z.argmin.iter().map(|s| space.label(s).to_string()).collect(),
        graph_count_bound: u64::try_from(l).unwrap_or(u64::MAX),
        subsets,
    };

    let mut t = String::new();
    t.push_str(&format!(
        "chain {} with {} states {:?}\n\n",
        path.display(),
        chain.n(),
        space.labels()
    ));
    let mut rows = vec![vec![
        "state".to_string(),
        "stationary (graphs)".to_string(),
        "stationary (solve)".to_string(),
    ]];
    for s in 0..chain.n() {
        rows.push(vec![
            space.label(s).to_string(),
            render::real(fw.get(s)),
            render::real(mu.get(s)),
        ]);
    }
    t.push_str(&render::table(&rows));
    t.push_str(&format!(
        "\nzeta = {} at cut {}\ngraph-count bound L({}) = {}\n",
        render::real(z.value),
        space.fmt_set(z.argmin),
        chain.n(),
        out.graph_count_bound
    ));
    for sub in &out.subsets {
        t.push_str(&format!(
            "\nsubset {{{}}}\n  mean visit length K = {}\n  entry law: {}\n",
            sub.labels.join(", "),
            render::real(sub.mean_visit_length),
            sub.entry_distribution
                .iter()
                .map(|e| format!("{}={}", e.state, render::real(e.probability)))
                .collect::<Vec<_>>()
                .join("  ")
        ));
        for exit in &sub.exits {
            t.push_str(&format!(
                "  from {}: E[exit time] = {}, exit law: {}\n",
                exit.from,
                render::real(exit.expected_exit_time),
                exit.law
                    .iter()
                    .map(|e| format!("{}={}", e.state, render::real(e.probability)))
                    .collect::<Vec<_>>()
                    .join("  ")
            ));
        }
    }
    emit(cli.output, &out, t)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CompareOut {
    command: &'static str,
    base: String,
    perturbed: String,
    report: DeviationReport<f64>,
}

fn compare_table(report: &DeviationReport<f64>) -> String {
    let mut t = String::new();
    t.push_str(&format!(
        "gate:      {} (eps = {}, beta = {}{})\n",
        if report.gate_passed {
            "admissible"
        } else {
            "not admissible"
        },
        render::real(report.epsilon),
        render::real(report.beta),
        match report.mixing {
            Some(a) => format!(", mixing a = {}", render::real(a)),
            None => String::new(),
        }
    ));
    t.push_str(&format!(
        "closeness: {} (zeta = {}, trigger threshold = {})\n",
        if report.closeness.close {
            "close"
        } else {
            "NOT close"
        },
        render::real(report.closeness.zeta_used),
        render::real(report.closeness.threshold)
    ));
    if let Some(coincides) = report.closeness.coincides_outside {
        t.push_str(&format!(
            "outside the subset the matrices coincide: {}\n",
            render::yes_no(coincides)
        ));
    }
    if !report.closeness.violations.is_empty() {
        t.push_str("violating transitions:\n");
        for v in &report.closeness.violations {
            t.push_str(&format!(
                "  {} -> {}: |1 - qhat/q| = {} (triggers {:?})\n",
                v.from,
                v.to,
                render::real(v.deviation),
                v.triggers
            ));
        }
    }
    t.push_str(&format!(
        "perturbed matrix irreducible: {}\n",
        render::yes_no(report.qhat_irreducible)
    ));
    if let Some(one_class) = report.subset_in_one_class {
        t.push_str(&format!(
            "subset inside one recurrent class: {}\n",
            render::yes_no(one_class)
        ));
    }

    t.push_str(&format!(
        "\nstationary deviations (bound 18*beta*L = {}{})\n",
        render::real(report.bounds.stationary),
        if report.bounds.stationary_vacuous {
            ", vacuous"
        } else {
            ""
        }
    ));
    let mut rows = vec![vec![
        "state".to_string(),
        "actual".to_string(),
        "closeness bound".to_string(),
        "cho-meyer".to_string(),
        "kirkland".to_string(),
    ]];
    for s in &report.states {
        rows.push(vec![
            s.label.clone(),
            render::opt_real(s.actual),
            render::real(report.bounds.stationary),
            render::real(s.cho_meyer),
            render::real(s.kirkland),
        ]);
    }
    t.push_str(&render::table(&rows));
    t.push_str(&format!(
        "entrywise ratio measure: {}\n",
        match report.ocinneide {
            Some(r) => render::real(r),
            None => "inf".to_string(),
        }
    ));

    if !report.subsets.is_empty() {
        t.push_str(&format!(
            "\nper-subset deviations (exit bound 12*beta*L = {}, visit-length band factor {})\n",
            render::real(report.bounds.exit),
            render::real(report.bounds.k_factor)
        ));
        for sub in &report.subsets {
            t.push_str(&format!(
                "  {{{}}}{}: K = {}, K_perturbed = {}, ratio = {}\n",
                sub.labels.join(", "),
                if sub.covered {
                    ""
                } else {
                    " (outside theorem scope)"
                },
                render::real(sub.k_base),
                render::opt_real(sub.k_perturbed),
                render::opt_real(sub.k_ratio)
            ));
            for e in &sub.exits {
                t.push_str(&format!(
                    "    exit law from {}: sup deviation = {}, tv = {}\n",
                    e.from,
                    render::real(e.sup),
                    render::real(e.tv)
                ));
            }
            if let Some(note) = &sub.note {
                t.push_str(&format!("    note: {note}\n"));
            }
        }
    }

    if let Some(d) = &report.dichotomy {
        t.push_str(&format!(
            "\nvisit-length dichotomy over the subset: {} (K = {}, K_perturbed = {}, \
             within band: {}, both above threshold {}: {})\n",
            if d.holds { "holds" } else { "FAILS" },
            render::real(d.k_base),
            render::real(d.k_perturbed),
            render::yes_no(d.within_band),
            render::real(d.threshold),
            render::yes_no(d.above_threshold)
        ));
    }

    if report.theorem_violations.is_empty() {
        t.push_str("\ntheorem violations: none\n");
    } else {
        t.push_str("\nTHEOREM VIOLATIONS:\n");
        for v in &report.theorem_violations {
            t.push_str(&format!("  {v}\n"));
        }
    }
    t.push_str(&format!(
        "fundamental-matrix convention: A = {}\n",
        report.fundamental_convention
    ));
    t
}

fn report_exit_code(report: &DeviationReport<f64>) -> ExitCode {
    if report.theorems_apply() && !report.theorem_violations.is_empty() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn default_subsets(n: usize) -> Vec<StateSet> {
    if n <= 5 {
        StateSet::proper_nonempty(n).collect()
    } else {
        (0..n).map(StateSet::singleton).collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    cli: &Cli,
    q_path: &PathBuf,
    qhat_path: &PathBuf,
    eps: f64,
    beta: f64,
    subset: Option<&str>,
    mixing: &str,
    sets: &[String],
) -> Result<ExitCode> {
    let q = load_chain(q_path)?;
    let qhat = load_chain(qhat_path)?;
    let mut params = ClosenessParams::new(eps, beta)?;
    if let Some(labels) = subset {
        params = params.on_subset(parse_set(q.space(), labels)?)?;
        if mixing != "auto" {
            params = params
                .with_mixing(parse_real(mixing).map_err(|e| anyhow!("invalid --mixing: {e}"))?);
        }
    }
    let domains: Vec<StateSet> = if sets.is_empty() {
        default_subsets(q.n())
    } else {
        sets.iter()
            .map(|labels| parse_set(q.space(), labels))
            .collect::<Result<_>>()?
    };
    let report = perturb::deviation_report(&q, &qhat, &params, &domains)?;
    let code = report_exit_code(&report);
    let out = CompareOut {
        command: "compare",
        base: q_path.display().to_string(),
        perturbed: qhat_path.display().to_string(),
        report,
    };
    emit(cli.output, &out, compare_table(&out.report))?;
    Ok(code)
}

#[derive(Serialize)]
struct SimulateOut {
    command: &'static str,
    chain_digest: String,
    seed: u64,
    start: String,
    steps: usize,
    written_to: Option<String>,
}

fn cmd_simulate(
    cli: &Cli,
    path: &PathBuf,
    steps: usize,
    start: Option<&str>,
    out_path: Option<&PathBuf>,
) -> Result<ExitCode> {
    let chain = load_chain(path)?;
    let start_idx = match start {
        Some(label) => chain.space().index_of(label)?,
        None => 0,
    };
    let trajectory = oracles::simulate(&chain, start_idx, steps, cli.seed)?;
    let text = oracles::trajectory_to_string(&trajectory, &chain);
    match out_path {
        Some(p) => {
            fs::write(p, &text).with_context(|| format!("cannot write {}", p.display()))?;
            let out = SimulateOut {
                command: "simulate",
                chain_digest: chain.digest(),
                seed: cli.seed,
                start: chain.space().label(start_idx).to_string(),
                steps,
                written_to: Some(p.display().to_string()),
            };
            emit(
                cli.output,
                &out,
                format!(
                    "wrote {steps} states to {} (seed {}, start {})\n",
                    p.display(),
                    cli.seed,
                    out.start
                ),
            )?;
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct EstimateOut {
    command: &'static str,
    states: Vec<String>,
    observed_states: usize,
    empirical_matrix: Vec<Vec<f64>>,
    occupancy: Vec<f64>,
    loop_closed: bool,
    empirical_irreducible: bool,
    stationary_of_empirical: Option<Vec<f64>>,
    epsilon: f64,
    beta: f64,
    close: bool,
    violations: usize,
}

fn gate_defaults(n: usize) -> Result<(f64, f64)> {
    let l = perturb::l_const(n)? as f64;
    let beta = 0.9 * 0.5f64.powi(n as i32);
    let eps = 0.9 * beta * (1.0 - beta) / (l * (n as f64).powi(4));
    Ok((eps, beta))
}

fn cmd_estimate(
    cli: &Cli,
    chain_path: &PathBuf,
    trajectory_path: &PathBuf,
    eps: Option<f64>,
    beta: Option<f64>,
) -> Result<ExitCode> {
    let chain = load_chain(chain_path)?;
    let text = fs::read_to_string(trajectory_path)
        .with_context(|| format!("cannot read trajectory {}", trajectory_path.display()))?;
    let (trajectory, digest) = oracles::trajectory_from_str(&text, chain.space())?;
    if digest != chain.digest() {
        bail!(
            "trajectory was generated from a different chain (digest {} vs {})",
            &digest[..12.min(digest.len())],
            &chain.digest()[..12]
        );
    }
    let estimate = oracles::empirical_matrix::<f64>(&trajectory)?;
    let qhat = estimate.chain()?;
    let (eps_default, beta_default) = gate_defaults(chain.n())?;
    let (eps, beta) = (eps.unwrap_or(eps_default), beta.unwrap_or(beta_default));
    let params = ClosenessParams::new(eps, beta)?;
    let closeness = perturb::is_close(&chain, &qhat, &params)?;
    let empirical_irreducible = qhat.is_irreducible();
    let muhat = if empirical_irreducible {
        Some(oracles::stationary_solve(&qhat)?)
    } else {
        None
    };

    let out = EstimateOut {
        command: "estimate",
        states: chain.space().labels().to_vec(),
        observed_states: trajectory.states.len(),
        empirical_matrix: (0..chain.n()).map(|s| qhat.row(s).to_vec()).collect(),
        occupancy: estimate.occupancy.clone(),
        loop_closed: estimate.loop_closed,
        empirical_irreducible,
        stationary_of_empirical: muhat.as_ref().map(|m| m.as_slice().to_vec()),
        epsilon: eps,
        beta,
        close: closeness.close,
        violations: closeness.violations.len(),
    };

    let mut t = format!(
        "trajectory of {} states (loop closed: {})\n\nempirical transition matrix\n",
        out.observed_states,
        render::yes_no(out.loop_closed)
    );
    let space = chain.space();
    let mut rows = vec![std::iter::once("from".to_string())
        .chain(space.labels().iter().cloned())
        .collect::<Vec<_>>()];
    for s in 0..chain.n() {
        rows.push(
            std::iter::once(space.label(s).to_string())
                .chain((0..chain.n()).map(|t| render::real(qhat.prob(s, t))))
                .collect(),
        );
    }
    t.push_str(&render::table(&rows));
    t.push_str(&format!(
        "\noccupancy: {}\n",
        occupancy_line(space, &estimate.occupancy)
    ));
    match &muhat {
        Some(m) => t.push_str(&format!(
            "stationary of the empirical matrix: {}\n",
            occupancy_line(space, m.as_slice())
        )),
        None => t.push_str("empirical matrix is reducible; no stationary vector\n"),
    }
    t.push_str(&format!(
        "closeness at (eps = {}, beta = {}): {} ({} violations)\n",
        render::real(eps),
        render::real(beta),
        if out.close { "close" } else { "NOT close" },
        out.violations
    ));
    emit(cli.output, &out, t)?;
    Ok(ExitCode::SUCCESS)
}

fn occupancy_line(space: &StateSpace, values: &[f64]) -> String {
    values
        .iter()
        .enumerate()
        .map(|(s, v)| format!("{}={}", space.label(s), render::real(*v)))
        .collect::<Vec<_>>()
        .join("  ")
}

#[derive(Serialize)]
struct GraphLineOut {
    edges: String,
    weight: f64,
    exits: Vec<ExitTargetOut>,
}

#[derive(Serialize)]
struct ExitTargetOut {
    from: String,
    to: String,
}

#[derive(Serialize)]
struct GraphsOut {
    command: &'static str,
    labels: Vec<String>,
    count: usize,
    lines: Vec<String>,
    graphs: Vec<GraphLineOut>,
}

fn cmd_graphs(cli: &Cli, path: &PathBuf, set: &str) -> Result<ExitCode> {
    let chain = load_chain(path)?;
    if chain.n() > cli.cap {
        bail!(
            "state space has {} states, over the enumeration cap {}",
            chain.n(),
            cli.cap
        );
    }
    let space = chain.space();
    let domain = parse_set(space, set)?;
    let family = graphs::enumerate_graphs(chain.n(), domain)?;
    let mut lines = Vec::new();
    let mut graph_outs = Vec::new();
    let mut t = format!(
        "{} graphs over {{{}}}\n",
        family.len(),
        domain
            .iter()
            .map(|s| space.label(s).to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    for g in family.iter() {
        let edges = g
            .edges()
            .iter()
            .map(|&(s, t)| format!("{}->{}", space.label(s), space.label(t)))
            .collect::<Vec<_>>()
            .join(", ");
        let weight = g.weight(&chain);
        let exits: Vec<ExitTargetOut> = domain
            .iter()
            .map(|s| ExitTargetOut {
                from: space.label(s).to_string(),
                to: space
                    .label(g.leads_to(s).expect("validated graph"))
                    .to_string(),
            })
            .collect();
        let exit_text = exits
            .iter()
            .map(|e| format!("{}=>{}", e.from, e.to))
            .collect::<Vec<_>>()
            .join(" ");
        t.push_str(&format!("{edges} | {} | {exit_text}\n", render::real(weight)));
        lines.push(format!("{edges} | {}", render::real(weight)));
        graph_outs.push(GraphLineOut {
            edges,
            weight,
            exits,
        });
    }
    let out = GraphsOut {
        command: "graphs",
        labels: domain.iter().map(|s| space.label(s).to_string()).collect(),
        count: family.len(),
        lines,
        graphs: graph_outs,
    };
    emit(cli.output, &out, t)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ExampleOut {
    command: &'static str,
    delta: f64,
    eta: f64,
    epsilon: f64,
    beta: f64,
    zeta: f64,
    zeta_expression: &'static str,
    passage_2_to_3: f64,
    passage_2_to_3_expression: &'static str,
    closeness_bound: f64,
    closeness_bound_expression: &'static str,
    cho_meyer: f64,
    cho_meyer_expression: &'static str,
    kirkland: f64,
    kirkland_expression: &'static str,
    ocinneide: Option<f64>,
    rare_state_actual_deviation: Option<f64>,
    report: DeviationReport<f64>,
}

fn cmd_example(
    cli: &Cli,
    delta: f64,
    eta: f64,
    eps: Option<f64>,
    beta: Option<f64>,
) -> Result<ExitCode> {
    if !(delta > 0.0 && delta < 0.5) {
        bail!("--delta must lie in (0, 1/2), got {delta}");
    }
    if !(eta > 0.0 && eta < 1.0) {
        bail!("--eta must lie in (0, 1), got {eta}");
    }
    let (eps_default, beta_default) = gate_defaults(3)?;
    let (eps, beta) = (eps.unwrap_or(eps_default), beta.unwrap_or(beta_default));
    let q: Chain64 = fixtures::rare_state_chain(delta);
    let qhat: Chain64 = fixtures::rare_state_perturbed(delta, eta);
    let params = ClosenessParams::new(eps, beta)?;
    let report = perturb::deviation_report(
        &q,
        &qhat,
        &params,
        &StateSet::proper_nonempty(3).collect::<Vec<_>>(),
    )?;
    let code = report_exit_code(&report);
    let m = oracles::mean_first_passage(&q)?;
    let out = ExampleOut {
        command: "example",
        delta,
        eta,
        epsilon: eps,
        beta,
        zeta: report.closeness.zeta_used,
        zeta_expression: "delta/2",
        passage_2_to_3: m.get(1, 2),
        passage_2_to_3_expression: "2/delta",
        closeness_bound: report.bounds.stationary,
        closeness_bound_expression: "18*L*beta",
        cho_meyer: report.states[2].cho_meyer,
        cho_meyer_expression: "eta/delta",
        kirkland: report.states[2].kirkland,
        kirkland_expression: "eta/(2*delta)",
        ocinneide: report.ocinneide,
        rare_state_actual_deviation: report.states[2].actual,
        report,
    };

    let mut t = format!(
        "three-state benchmark: state 3 is entered with probability delta = {} and its row \
         is rewired by eta = {}\n\n",
        render::real(delta),
        render::real(eta)
    );
    let rows = vec![
        vec![
            "quantity".to_string(),
            "expression".to_string(),
            "value".to_string(),
        ],
        vec![
            "zeta".to_string(),
            out.zeta_expression.to_string(),
            render::real(out.zeta),
        ],
        vec![
            "mean passage 2 -> 3".to_string(),
            out.passage_2_to_3_expression.to_string(),
            render::real(out.passage_2_to_3),
        ],
        vec![
            "closeness bound".to_string(),
            out.closeness_bound_expression.to_string(),
            render::real(out.closeness_bound),
        ],
        vec![
            "cho-meyer bound (state 3)".to_string(),
            out.cho_meyer_expression.to_string(),
            render::real(out.cho_meyer),
        ],
        vec![
            "kirkland bound (state 3)".to_string(),
            out.kirkland_expression.to_string(),
            render::real(out.kirkland),
        ],
        vec![
            "entrywise ratio measure".to_string(),
            "max(q/qhat, qhat/q)".to_string(),
            match out.ocinneide {
                Some(r) => render::real(r),
                None => "inf".to_string(),
            },
        ],
        vec![
            "actual deviation (state 3)".to_string(),
            "|1 - muhat/mu|".to_string(),
            render::opt_real(out.rare_state_actual_deviation),
        ],
    ];
    t.push_str(&render::table(&rows));
    t.push('\n');
    t.push_str(&compare_table(&out.report));
    emit(cli.output, &out, t)?;
    Ok(code)
}
