use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use dtderand::fourier::{a_fourier, is_bounded, l2_distance, SparsePoly};
use dtderand::global_derand::{derandomize_with, Mode};
use dtderand::influence::{
    influence, influence_paper, most_influential, osss_check, Influential, MuTable,
};
use dtderand::instance_opt::{
    find, instance_opt, nisan, verify_exact, ErrorMetric, FindResult, MetricKind,
};
use dtderand::online::online_eval;
use dtderand::oracle::{
    brute_influence, brute_l2, brute_mu, brute_optimal_ddt, effective_flip, gen_random_rdt,
    index_rdt, noisy_rdt, parity_blocks_rdt, GenSpec,
};
use dtderand::prg::{format_poly, IRREDUCIBLE};
use dtderand::rational::{fraction_string, parse_rational};
use dtderand::tree::{parse_assignment, parse_document, Restriction, TreeDoc};
use dtderand::{Error, Rational};

#[derive(Parser)]
#[command(
    name = "dtderand",
    version,
    about = "Derandomize randomized decision trees exactly"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write a JSON report to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Global derandomizer: candidates from a small-bias generator and a
    /// pairwise sampler, best one by exact L2 distance.
    Derandomize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        eps: String,
        /// Run the pipeline at eps itself (error <= 4 eps) instead of eps/4.
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Best tree of bounded depth under an error metric.
    Find {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long, allow_negative_numbers = true)]
        budget: i64,
        /// Restriction such as "x1=0,x3=1".
        #[arg(long)]
        restrict: Option<String>,
    },
    /// Least budget whose best tree meets the error target.
    InstanceOpt {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        eps: String,
    },
    /// Exact deterministic tree for the function a bounded-error tree decides.
    Nisan {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        budget_cap: Option<usize>,
    },
    /// Greedy most-influential-variable evaluation on one input.
    Online {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        delta: String,
        /// Input bits x1 x2 ... as a string such as 0110.
        #[arg(long)]
        x: String,
    },
    /// Influence of one or all variables.
    Influence {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        var: Option<u32>,
        /// Also report the path-counting surrogate.
        #[arg(long)]
        paper: bool,
    },
    /// Check Var <= sum_i delta_i Inf_i and total influence <= q.
    OsssCheck {
        #[arg(long)]
        input: PathBuf,
    },
    /// Fourier expansion of the mean function.
    Fourier {
        #[arg(long)]
        input: PathBuf,
    },
    /// Exact squared L2 distance between two trees' mean functions.
    Distance {
        #[arg(long)]
        r: PathBuf,
        #[arg(long)]
        d: PathBuf,
    },
    /// Generate tree files.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Brute-force reference computations.
    Oracle {
        #[command(subcommand)]
        kind: OracleKind,
    },
    /// Print the embedded irreducible polynomial table.
    PrgTable,
    /// Pseudorandomness utilities.
    Prg {
        #[command(subcommand)]
        kind: PrgKind,
    },
}

#[derive(Subcommand)]
enum PrgKind {
    /// Same as prg-table.
    Table,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long, value_enum)]
    metric: MetricArg,
    /// Tree file, or for the poly metric a polynomial file.
    #[arg(long)]
    source: PathBuf,
    /// Variable universe (default: header or largest index present).
    #[arg(long)]
    n: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    L2,
    Bayes,
    Poly,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::L2 => MetricKind::L2,
            MetricArg::Bayes => MetricKind::BayesError,
            MetricArg::Poly => MetricKind::PolyAbs,
        }
    }
}

#[derive(Subcommand)]
enum GenKind {
    /// Random tree; the seed defaults to $DTDERAND_SEED, then 0.
    Random {
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 3)]
        q: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 8)]
        den: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        max_nodes: usize,
        #[arg(long)]
        allow_repeats: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Uniform index selector, mu(x) = |x|/n.
    Index {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Parity of a uniformly chosen block of q variables.
    Parity {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Flip each leaf of a {0,1} deterministic tree with probability flip.
    Noisy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        flip: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleKind {
    /// mu(x) averaged over every coin string.
    Mu {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
    },
    /// Squared L2 distance by enumeration.
    L2 {
        #[arg(long)]
        r: PathBuf,
        #[arg(long)]
        d: PathBuf,
    },
    /// Influence by enumeration.
    Influence {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        var: u32,
    },
    /// Optimal tree by listing every shape (n <= 4, budget <= 3).
    Optimal {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        budget: usize,
    },
}

/// Failures reported with exit code 1.
#[derive(Debug)]
enum Failure {
    Domain(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Domain(e) => write!(f, "{e}"),
            Failure::Io(e) => f.write_str(e),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Output collected by a subcommand: text lines for stdout, report fields,
/// and digests of the files read.
#[derive(Default)]
struct Run {
    lines: Vec<String>,
    fields: Map<String, Value>,
    inputs: Map<String, Value>,
}

impl Run {
    fn say(&mut self, line: impl Into<String>) {
        self.lines.push(line.into());
    }

    fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.fields.insert(key.to_string(), v.into());
    }

    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let digest = hex::encode(Sha256::digest(&bytes));
        self.inputs
            .insert(path.display().to_string(), Value::String(digest));
        String::from_utf8(bytes).map_err(|_| Failure::Io(format!("{}: not UTF-8", path.display())))
    }

    fn tree(&mut self, path: &Path) -> Result<TreeDoc, Failure> {
        let text = self.read(path)?;
        Ok(parse_document(&text)?)
    }

    fn write(&mut self, path: &Option<PathBuf>, text: &str) -> Outcome {
        match path {
            Some(p) => fs::write(p, format!("{text}\n"))
                .map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
            None => {
                self.say(text);
                Ok(())
            }
        }
    }
}

fn frac(v: &Rational) -> Value {
    Value::String(fraction_string(v))
}

fn rational_arg(name: &'static str, s: &str) -> Result<Rational, Failure> {
    parse_rational(s).map_err(|_| {
        Failure::Domain(Error::ParamRange {
            name,
            value: s.to_string(),
            range: "a rational such as 1/8 or 0.125",
        })
    })
}

fn load_metric(run: &mut Run, args: &MetricArgs) -> Result<ErrorMetric, Failure> {
    let text = run.read(&args.source)?;
    let kind = MetricKind::from(args.metric);
    match parse_document(&text) {
        Ok(doc) => {
            let n = args.n.unwrap_or(doc.num_vars());
            Ok(ErrorMetric::new(kind, &doc.tree, n)?)
        }
        Err(tree_err) if kind == MetricKind::PolyAbs => {
            let poly = SparsePoly::parse(&text).map_err(|_| Failure::Domain(tree_err))?;
            let header = text.lines().find_map(|l| {
                l.trim()
                    .strip_prefix("n=")
                    .and_then(|v| v.trim().parse().ok())
            });
            let n = args.n.or(header).unwrap_or(0).max(poly.num_vars());
            // the metric assumes a [0,1] range; check it while enumeration is cheap
            if n <= 20 && !is_bounded(&poly, n as usize)? {
                return Err(Error::MetricMismatch(
                    "poly metric needs a source with values in [0,1]".into(),
                )
                .into());
            }
            Ok(ErrorMetric::poly_abs(poly, n))
        }
        Err(e) => Err(e.into()),
    }
}

fn report_find(run: &mut Run, res: &FindResult) {
    run.say(format!("error {}", fraction_string(&res.error)));
    run.say(format!("budget {}", res.budget));
    run.say(format!("queries {}", res.query_complexity));
    run.say(res.tree.to_string());
    run.set("tree", res.tree.to_string());
    run.set("error", frac(&res.error));
    run.set("budget", res.budget);
    run.set("query_complexity", res.query_complexity);
    run.set("nodes_explored", res.nodes_explored);
    run.set("memo_hits", res.memo_hits);
}

fn execute(cmd: &Command, run: &mut Run) -> Outcome {
    match cmd {
        Command::Derandomize {
            input,
            eps,
            raw,
            output,
        } => {
            let doc = run.tree(input)?;
            let eps = rational_arg("eps", eps)?;
            let mode = if *raw { Mode::Raw } else { Mode::Adjusted };
            let rep = derandomize_with(&doc.tree, &eps, mode)?;
            let text = TreeDoc {
                universe: doc.universe,
                tree: rep.tree.clone(),
            }
            .to_string();
            run.say(format!("error {}", fraction_string(&rep.error)));
            run.say(format!("guarantee {}", fraction_string(&rep.guarantee)));
            run.say(format!("candidates {}", rep.candidates));
            run.say(format!(
                "queries {} (bound {})",
                rep.query_complexity, rep.query_bound
            ));
            run.write(output, &text)?;
            run.set("tree", rep.tree.to_string());
            run.set("error", frac(&rep.error));
            run.set("eps", frac(&eps));
            run.set("pipeline_eps", frac(&rep.eps));
            run.set("guarantee", frac(&rep.guarantee));
            run.set("mode", if *raw { "raw" } else { "adjusted" });
            run.set("candidates", rep.candidates);
            run.set("members", rep.members);
            run.set("query_complexity", rep.query_complexity);
            run.set("query_bound", rep.query_bound);
            run.set("input_coins", rep.input_coins);
            run.set("reduced_coins", rep.reduced_coins);
            run.set("chosen_seed", rep.chosen_seed);
            run.set(
                "work",
                json!({
                    "candidates_scored": rep.work.candidates_scored,
                    "coin_strings": rep.work.coin_strings,
                    "fourier_terms": rep.work.fourier_terms,
                    "wide_arithmetic": rep.work.wide_arithmetic,
                }),
            );
        }
        Command::Find {
            metric,
            budget,
            restrict,
        } => {
            let m = load_metric(run, metric)?;
            if *budget < 0 {
                return Err(Error::ParamRange {
                    name: "budget",
                    value: budget.to_string(),
                    range: "[0, inf)",
                }
                .into());
            }
            let pi = match restrict {
                Some(s) => Restriction::parse(s)?,
                None => Restriction::new(),
            };
            let res = find(&m, *budget as usize, &pi);
            run.set("metric", m.kind().name());
            run.set("restriction", pi.to_string());
            report_find(run, &res);
        }
        Command::InstanceOpt { metric, eps } => {
            let m = load_metric(run, metric)?;
            let eps = rational_arg("eps", eps)?;
            let res = instance_opt(&m, &eps)?;
            run.set("metric", m.kind().name());
            run.set("eps", frac(&eps));
            report_find(run, &res);
        }
        Command::Nisan { input, budget_cap } => {
            let doc = run.tree(input)?;
            let out = nisan(&doc.tree, doc.num_vars(), *budget_cap)?;
            let exact = verify_exact(&doc.tree, &out.result.tree, doc.num_vars())?;
            run.say(format!("eps_r {}", fraction_string(&out.eps_r)));
            if out.potentially_unsound {
                run.say(format!(
                    "warning: phase 1 budget {} < n; the result may not be exact",
                    out.phase1_budget
                ));
            }
            run.say(format!("exact {exact}"));
            run.set("eps_r", frac(&out.eps_r));
            run.set("phase1_budget", out.phase1_budget);
            run.set("potentially_unsound", out.potentially_unsound);
            run.set("exact", exact);
            report_find(run, &out.result);
        }
        Command::Online {
            input,
            eps,
            delta,
            x,
        } => {
            let doc = run.tree(input)?;
            let eps = rational_arg("eps", eps)?;
            let delta = rational_arg("delta", delta)?;
            let x = parse_assignment(x)?;
            let out = online_eval(&doc.tree, &eps, &delta, &x)?;
            let queried: Vec<String> = out.queried.iter().map(|v| format!("x{v}")).collect();
            run.say(format!("output {}", fraction_string(&out.output)));
            run.say(format!("queried {}", queried.join(" ")));
            run.say(format!("iterations {}", out.iterations));
            run.say(format!("early_exit {}", out.early_exit));
            run.set("output", frac(&out.output));
            run.set("queried", out.queried.clone());
            run.set("iterations", out.iterations);
            run.set("early_exit", out.early_exit);
            run.set("bound", out.bound);
        }
        Command::Influence { input, var, paper } => {
            let doc = run.tree(input)?;
            let t = &doc.tree;
            let vars: Vec<u32> = match var {
                Some(v) => vec![*v],
                None => (1..=doc.num_vars()).collect(),
            };
            let reduced = t.reduce();
            let mut rows = Vec::new();
            for &v in &vars {
                let inf = influence(t, v)?;
                let mut row = json!({ "var": v, "influence": frac(&inf) });
                let mut line = format!("x{v} {}", fraction_string(&inf));
                if *paper {
                    let p = influence_paper(&reduced, v)?;
                    line.push_str(&format!(" paper {}", fraction_string(&p)));
                    row["paper"] = frac(&p);
                }
                run.say(line);
                rows.push(row);
            }
            if var.is_none() {
                let table = MuTable::new(t)?;
                let total: Rational = table.influences().into_iter().map(|(_, v)| v).sum();
                run.say(format!("total {}", fraction_string(&total)));
                run.set("total", frac(&total));
                match most_influential(t, &Restriction::new())? {
                    Influential::Var(v, _) => run.set("most_influential", v),
                    Influential::Constant => run.set("most_influential", "constant"),
                }
            }
            run.set("influences", rows);
        }
        Command::OsssCheck { input } => {
            let doc = run.tree(input)?;
            let rep = osss_check(&doc.tree.reduce())?;
            run.say(format!("variance {}", fraction_string(&rep.variance)));
            run.say(format!("rhs {}", fraction_string(&rep.osss_rhs)));
            run.say(format!("holds {}", rep.holds));
            run.say(format!(
                "total_influence {} (q = {})",
                fraction_string(&rep.total),
                rep.q
            ));
            if let Some((v, inf)) = &rep.witness {
                run.say(format!("witness x{v} {}", fraction_string(inf)));
            }
            let pairs = |xs: &[(u32, Rational)]| -> Vec<Value> {
                xs.iter()
                    .map(|(v, r)| json!({ "var": v, "value": frac(r) }))
                    .collect()
            };
            run.set("influences", pairs(&rep.influences));
            run.set("query_probs", pairs(&rep.query_probs));
            run.set("total", frac(&rep.total));
            run.set("variance", frac(&rep.variance));
            run.set("osss_rhs", frac(&rep.osss_rhs));
            run.set("q", rep.q);
            run.set("holds", rep.holds);
            run.set("total_within_q", rep.total_within_q);
            run.set("witness", rep.witness.as_ref().map(|(v, _)| *v));
            run.set("witness_ok", rep.witness_ok);
        }
        Command::Fourier { input } => {
            let doc = run.tree(input)?;
            let p = a_fourier(&doc.tree);
            let text = p.to_string();
            for line in text.lines() {
                run.say(line);
            }
            run.set("poly", text);
            run.set("expectation", frac(&p.expectation()));
            run.set("norm2", frac(&p.norm2()));
            run.set("variance", frac(&p.variance()));
        }
        Command::Distance { r, d } => {
            let rt = run.tree(r)?;
            let dt = run.tree(d)?;
            let dist = l2_distance(&rt.tree, &dt.tree);
            run.say(fraction_string(&dist));
            run.set("distance", frac(&dist));
        }
        Command::Gen { kind } => gen(kind, run)?,
        Command::Oracle { kind } => oracle(kind, run)?,
        Command::PrgTable
        | Command::Prg {
            kind: PrgKind::Table,
        } => {
            let mut rows = Vec::new();
            for (k, &p) in IRREDUCIBLE.iter().enumerate().skip(1) {
                run.say(format!("{k:2} 0x{p:x} {}", format_poly(p)));
                rows.push(json!({ "k": k, "mask": format!("0x{p:x}"), "poly": format_poly(p) }));
            }
            run.set("table", rows);
        }
    }
    Ok(())
}

fn gen(kind: &GenKind, run: &mut Run) -> Outcome {
    let (tree, output, universe) = match kind {
        GenKind::Random {
            n,
            q,
            m,
            den,
            seed,
            max_nodes,
            allow_repeats,
            output,
        } => {
            let seed = match seed {
                Some(s) => *s,
                None => match std::env::var("DTDERAND_SEED") {
                    Ok(v) => v.trim().parse().map_err(|_| {
                        Failure::Domain(Error::ParamRange {
                            name: "DTDERAND_SEED",
                            value: v.clone(),
                            range: "an unsigned 64-bit integer",
                        })
                    })?,
                    Err(_) => 0,
                },
            };
            let spec = GenSpec {
                n: *n,
                max_q: *q,
                max_m: *m,
                leaf_den: *den,
                seed,
                allow_repeats: *allow_repeats,
                max_nodes: *max_nodes,
            };
            run.set("seed", seed);
            (gen_random_rdt(&spec)?, output, Some(*n))
        }
        GenKind::Index { n, output } => (index_rdt(*n)?, output, Some(*n)),
        GenKind::Parity { n, q, output } => (parity_blocks_rdt(*n, *q)?, output, Some(*n)),
        GenKind::Noisy {
            input,
            flip,
            output,
        } => {
            let doc = run.tree(input)?;
            let flip = rational_arg("flip", flip)?;
            let eff = effective_flip(&flip);
            if eff != flip {
                eprintln!(
                    "note: flip {} is not dyadic; using {}",
                    fraction_string(&flip),
                    fraction_string(&eff)
                );
            }
            run.set("flip", frac(&eff));
            (noisy_rdt(&doc.tree, &flip)?, output, doc.universe)
        }
    };
    let text = TreeDoc {
        universe,
        tree: tree.clone(),
    }
    .to_string();
    run.set("tree", tree.to_string());
    run.write(output, &text)
}

fn oracle(kind: &OracleKind, run: &mut Run) -> Outcome {
    match kind {
        OracleKind::Mu { input, x } => {
            let doc = run.tree(input)?;
            let x = parse_assignment(x)?;
            let v = brute_mu(&doc.tree, &x)?;
            run.say(fraction_string(&v));
            run.set("mu", frac(&v));
        }
        OracleKind::L2 { r, d } => {
            let rt = run.tree(r)?;
            let dt = run.tree(d)?;
            let n = rt.num_vars().max(dt.num_vars());
            let v = brute_l2(&rt.tree, &dt.tree, n)?;
            run.say(fraction_string(&v));
            run.set("distance", frac(&v));
        }
        OracleKind::Influence { input, var } => {
            let doc = run.tree(input)?;
            let v = brute_influence(&doc.tree, *var, doc.num_vars())?;
            run.say(fraction_string(&v));
            run.set("influence", frac(&v));
        }
        OracleKind::Optimal { metric, budget } => {
            let m = load_metric(run, metric)?;
            let (err, tree) = brute_optimal_ddt(&m, *budget)?;
            run.say(format!("error {}", fraction_string(&err)));
            run.say(tree.to_string());
            run.set("error", frac(&err));
            run.set("tree", tree.to_string());
        }
    }
    Ok(())
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Derandomize { .. } => "derandomize",
        Command::Find { .. } => "find",
        Command::InstanceOpt { .. } => "instance-opt",
        Command::Nisan { .. } => "nisan",
        Command::Online { .. } => "online",
        Command::Influence { .. } => "influence",
        Command::OsssCheck { .. } => "osss-check",
        Command::Fourier { .. } => "fourier",
        Command::Distance { .. } => "distance",
        Command::Gen { .. } => "gen",
        Command::Oracle { .. } => "oracle",
        Command::PrgTable | Command::Prg { .. } => "prg-table",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    let mut run = Run::default();
    let result = execute(&cli.command, &mut run);
    let mut out = std::io::stdout().lock();
    for line in &run.lines {
        // a closed pipe (e.g. `| head`) is not an error worth reporting
        if writeln!(out, "{line}").is_err() {
            break;
        }
    }
    drop(out);
    if let Err(e) = result {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if let Some(path) = &cli.report {
        let report = json!({
            "subcommand": subcommand_name(&cli.command),
            "inputs": run.inputs,
            "result": run.fields,
            "wall_time_ms": start.elapsed().as_millis() as u64,
        });
        let text = serde_json::to_string_pretty(&report).expect("report serialises");
        if let Err(e) = fs::write(path, text + "\n") {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    ExitCode::SUCCESS
}
