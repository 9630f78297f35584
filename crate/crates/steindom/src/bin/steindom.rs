//! Command-line surface: dominance tables, risk curves, condition checks,
//! tail-limit verification, Monte Carlo simulation and φ evaluation.
//!
//! Exit codes: 0 success, 2 usage error, 3 table contains indeterminate
//! cells (listed on stderr), 4 numeric failure (diagnostics printed).

use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::{self, Write};
use std::process::ExitCode;

use steindom::asymptotics::{verify_limit, write_limit_csv, AsymptoteSpec};
use steindom::dominance::{
    build_table, compare_to_reference, reference, theorem1_verdict, check_conditions, CMode,
    FamilyParams, Table,
};
use steindom::montecarlo::{mc_gap_js, mc_risk, McConfig, McMode};
use steindom::risk::{risk_curve, standard_lambda_grid};
use steindom::{Error, GeneratorSpec, QuadConfig, ShrinkageKind, ShrinkageSpec};

#[derive(Parser)]
#[command(name = "steindom", version, about = "Risk analysis for generator-induced shrinkage estimators")]
struct Cli {
    /// Worker threads for table/curve sweeps (default: STEIN_DOM_JOBS or all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a star/bullet/minus dominance table over a parameter grid
    Table(TableArgs),
    /// Exact risk over a lambda grid, as CSV
    RiskCurve(RiskCurveArgs),
    /// Check conditions A.1-A.7 and the dominance verdict for one spec
    Check(CheckArgs),
    /// Verify the closed-form tail limit of the scaled SURE gap
    Asymptote(AsymptoteArgs),
    /// Seeded Monte Carlo risk or risk-gap estimate, as JSON
    Simulate(SimulateArgs),
    /// Tabulate phi, phi', and the unbiased risk estimate over w
    PhiEval(PhiEvalArgs),
}

#[derive(Args)]
struct TableArgs {
    /// One of: table1, table1-fixed, table1-inverse, table2, table3
    #[arg(long)]
    paper_preset: Option<String>,
    /// Generator family: phi1 | phi2 | phi3
    #[arg(long)]
    family: Option<String>,
    /// fixed:<C> or inverse-dim
    #[arg(long = "c-mode", alias = "C-mode")]
    c_mode: Option<String>,
    /// Column grid, e.g. "b=1:gamma=0.25" or "b=1,3:gamma=0.5,1" (repeatable)
    #[arg(long)]
    params: Vec<String>,
    /// Dimension range, e.g. 3..10 (inclusive) or a single value
    #[arg(long, default_value = "3..10")]
    p: String,
    /// text | csv | json
    #[arg(long, default_value = "text")]
    format: String,
    /// With a preset: print a discrepancy report against the published grid
    #[arg(long)]
    compare_reference: bool,
}

#[derive(Args)]
struct EstimatorArgs {
    /// James-Stein estimator
    #[arg(long)]
    js: bool,
    /// Positive-part James-Stein estimator
    #[arg(long)]
    js_plus: bool,
    /// The boundary estimator phi_S
    #[arg(long)]
    kubokawa: bool,
    /// phi(w) = b w / (a + w)
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    stein_class: Option<Vec<f64>>,
    /// Generator family for an induced estimator: phi1 | phi2 | phi3 | table
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    /// CSV file with columns w,phi_of_w for a tabulated generator
    #[arg(long)]
    table_csv: Option<String>,
    /// fixed:<C> or inverse-dim (default inverse-dim)
    #[arg(long = "c-mode", alias = "C-mode")]
    c_mode: Option<String>,
}

#[derive(Args)]
struct RiskCurveArgs {
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long)]
    p: usize,
    /// Comma-separated increasing lambda grid (default: standard grid)
    #[arg(long)]
    lambda: Option<String>,
    /// Output path (default stdout)
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long)]
    p: usize,
}

#[derive(Args)]
struct AsymptoteArgs {
    /// Generator family: phi1 | phi2 | phi3
    #[arg(long)]
    family: String,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    p: usize,
    /// fixed:<C> or inverse-dim (default inverse-dim; the limit is C-free)
    #[arg(long = "c-mode", alias = "C-mode")]
    c_mode: Option<String>,
    /// Comma-separated increasing w grid (default: family-appropriate grid)
    #[arg(long)]
    w: Option<String>,
    /// Emit the row table as CSV instead of a summary
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 100_000)]
    n_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// loss | sure
    #[arg(long, default_value = "loss")]
    mode: String,
    /// Estimate the risk gap versus James-Stein instead of the risk
    #[arg(long)]
    gap: bool,
}

#[derive(Args)]
struct PhiEvalArgs {
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long)]
    p: usize,
    /// Comma-separated w grid (default: log grid 0.01..100, 41 points)
    #[arg(long)]
    w: Option<String>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn parse_c_mode(s: Option<&str>) -> Result<CMode, Error> {
    match s {
        None => Ok(CMode::InverseDim),
        Some("inverse-dim") => Ok(CMode::InverseDim),
        Some(other) => {
            if let Some(v) = other.strip_prefix("fixed:") {
                let c: f64 = v
                    .parse()
                    .map_err(|_| usage(format!("invalid C value in --c-mode: {v}")))?;
                Ok(CMode::Fixed(c))
            } else {
                Err(usage(format!(
                    "--c-mode must be fixed:<C> or inverse-dim, got {other}"
                )))
            }
        }
    }
}

fn parse_p_range(s: &str) -> Result<Vec<usize>, Error> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.parse().map_err(|_| usage(format!("invalid p range: {s}")))?;
        let hi: usize = hi.parse().map_err(|_| usage(format!("invalid p range: {s}")))?;
        if lo > hi {
            return Err(usage(format!("empty p range: {s}")));
        }
        Ok((lo..=hi).collect())
    } else {
        let p: usize = s.parse().map_err(|_| usage(format!("invalid p: {s}")))?;
        Ok(vec![p])
    }
}

fn parse_f64_list(s: &str, flag: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| usage(format!("invalid number {v:?} in {flag}")))
        })
        .collect()
}

/// One --params occurrence into table columns: `key=v1,v2:key=v...`, cross
/// product over keys. Accepts `gamma` or the bare Greek letter as a key.
fn parse_param_columns(family: &str, grid: &str) -> Result<Vec<FamilyParams>, Error> {
    let mut bs = Vec::new();
    let mut gammas = Vec::new();
    let mut aas = Vec::new();
    for part in grid.split(':') {
        let (key, vals) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("expected key=value in --params, got {part:?}")))?;
        let vals = parse_f64_list(vals, "--params")?;
        match key.trim() {
            "b" => bs = vals,
            "gamma" | "γ" => gammas = vals,
            "a" => aas = vals,
            other => return Err(usage(format!("unknown parameter {other:?} in --params"))),
        }
    }
    match family {
        "phi1" => {
            if bs.is_empty() {
                return Err(usage("phi1 needs b=... in --params"));
            }
            Ok(bs.into_iter().map(|b| FamilyParams::Phi1 { b }).collect())
        }
        "phi2" => {
            if bs.is_empty() || gammas.is_empty() {
                return Err(usage("phi2 needs b=... and gamma=... in --params"));
            }
            let mut cols = Vec::new();
            for &b in &bs {
                for &gamma in &gammas {
                    cols.push(FamilyParams::Phi2 { b, gamma });
                }
            }
            Ok(cols)
        }
        "phi3" => {
            if aas.is_empty() {
                return Err(usage("phi3 needs a=... in --params"));
            }
            Ok(aas.into_iter().map(|a| FamilyParams::Phi3 { a }).collect())
        }
        other => Err(usage(format!("unknown family {other:?}"))),
    }
}

impl EstimatorArgs {
    fn generator(&self, p: usize) -> Result<GeneratorSpec, Error> {
        let family = self
            .family
            .as_deref()
            .ok_or_else(|| usage("an estimator or --family is required"))?;
        match family {
            "phi1" => GeneratorSpec::phi1(self.b.ok_or_else(|| usage("phi1 needs --b"))?),
            "phi2" => GeneratorSpec::phi2(
                self.b.ok_or_else(|| usage("phi2 needs --b"))?,
                self.gamma.ok_or_else(|| usage("phi2 needs --gamma"))?,
            ),
            "phi3" => GeneratorSpec::phi3(self.a.ok_or_else(|| usage("phi3 needs --a"))?, p),
            "table" => {
                let path = self
                    .table_csv
                    .as_deref()
                    .ok_or_else(|| usage("family table needs --table-csv"))?;
                GeneratorSpec::from_csv(File::open(path)?)
            }
            other => Err(usage(format!("unknown family {other:?}"))),
        }
    }

    fn build(&self, p: usize) -> Result<ShrinkageSpec, Error> {
        let chosen = [self.js, self.js_plus, self.kubokawa, self.stein_class.is_some(), self.family.is_some()]
            .iter()
            .filter(|&&x| x)
            .count();
        if chosen != 1 {
            return Err(usage(
                "choose exactly one of --js, --js-plus, --kubokawa, --stein-class, --family",
            ));
        }
        if self.js {
            return ShrinkageSpec::james_stein(p);
        }
        if self.js_plus {
            return ShrinkageSpec::positive_part(p);
        }
        if self.kubokawa {
            return ShrinkageSpec::kubokawa_stein(p);
        }
        if let Some(ab) = &self.stein_class {
            return ShrinkageSpec::stein_class(ab[0], ab[1], p);
        }
        let gen = self.generator(p)?;
        let c = parse_c_mode(self.c_mode.as_deref())?.value(p);
        ShrinkageSpec::induced(gen, c, p)
    }
}

fn tables_to_csv(tables: &[Table]) -> String {
    let mut out = String::new();
    for t in tables {
        if tables.len() > 1 {
            out.push_str(&format!("# {}\n", t.c_mode));
        }
        out.push_str(&t.render_csv());
    }
    out
}

fn cmd_table(args: &TableArgs, cfg: &QuadConfig) -> Result<ExitCode, Error> {
    type Block = (Vec<FamilyParams>, Vec<usize>, CMode, Option<&'static [&'static str; 8]>);
    let mut blocks: Vec<Block> = Vec::new();
    if let Some(name) = &args.paper_preset {
        let names: Vec<&str> = match name.as_str() {
            "table1" => vec!["table1-fixed", "table1-inverse"],
            other => vec![other],
        };
        for n in names {
            let (cols, ps, cm, r) = reference::preset(n)
                .ok_or_else(|| usage(format!("unknown preset {name:?}")))?;
            blocks.push((cols, ps, cm, Some(r)));
        }
    } else {
        let family = args
            .family
            .as_deref()
            .ok_or_else(|| usage("either --paper-preset or --family is required"))?;
        if args.params.is_empty() {
            return Err(usage("--params is required without a preset"));
        }
        let mut cols = Vec::new();
        for grid in &args.params {
            cols.extend(parse_param_columns(family, grid)?);
        }
        let c_mode = parse_c_mode(args.c_mode.as_deref())?;
        blocks.push((cols, parse_p_range(&args.p)?, c_mode, None));
    }

    let mut tables = Vec::new();
    let mut references = Vec::new();
    for (cols, ps, cm, r) in blocks {
        tables.push(build_table(cols, ps, cm, cfg)?);
        references.push(r);
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    match args.format.as_str() {
        "text" => {
            for t in &tables {
                write!(out, "{}", t.render_text())?;
                writeln!(out)?;
            }
        }
        "csv" => write!(out, "{}", tables_to_csv(&tables))?,
        "json" => writeln!(out, "{}", serde_json::to_string_pretty(&tables).unwrap())?,
        other => return Err(usage(format!("unknown format {other:?}"))),
    }

    if args.compare_reference {
        for (t, r) in tables.iter().zip(&references) {
            if let Some(r) = r {
                let (signs, splits) = compare_to_reference(t, &r[..]);
                eprintln!(
                    "{}: {} sign mismatch(es), {} star/bullet split difference(s)",
                    t.c_mode,
                    signs.len(),
                    splits.len()
                );
                for d in signs.iter().chain(&splits) {
                    eprintln!(
                        "  p={} {:?}: computed '{}', reference '{}'",
                        d.p, d.params, d.computed, d.reference
                    );
                }
            }
        }
    }

    let mut indeterminate = Vec::new();
    for t in &tables {
        for c in t.indeterminate_cells() {
            indeterminate.push(format!(
                "p={} {:?} {}: value {:.3e} within 10x error {:.3e}",
                c.p, c.params, c.c_mode, c.rdiff0_value, c.rdiff0_err
            ));
        }
    }
    if !indeterminate.is_empty() {
        eprintln!("indeterminate cells:");
        for line in &indeterminate {
            eprintln!("  {line}");
        }
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_risk_curve(args: &RiskCurveArgs, cfg: &QuadConfig) -> Result<ExitCode, Error> {
    let spec = args.estimator.build(args.p)?;
    let lambdas = match &args.lambda {
        Some(s) => parse_f64_list(s, "--lambda")?,
        None => standard_lambda_grid(),
    };
    let curve = risk_curve(&spec, &lambdas, cfg)?;
    match &args.output {
        Some(path) => curve.write_csv(File::create(path)?)?,
        None => curve.write_csv(io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: &CheckArgs, cfg: &QuadConfig) -> Result<ExitCode, Error> {
    let spec = args.estimator.build(args.p)?;
    let grid: Vec<f64> = (0..160)
        .map(|i| 10f64.powf(-3.0 + 7.0 * i as f64 / 159.0))
        .collect();
    let report = check_conditions(&spec, &grid, cfg)?;
    print!("{report}");
    if let ShrinkageKind::Induced { gen, c } = &spec.kind {
        let verdict = theorem1_verdict(gen, *c, spec.p, cfg)?;
        println!("verdict: {verdict}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_asymptote(args: &AsymptoteArgs) -> Result<ExitCode, Error> {
    let gen = match args.family.as_str() {
        "phi1" => GeneratorSpec::phi1(args.b.ok_or_else(|| usage("phi1 needs --b"))?)?,
        "phi2" => GeneratorSpec::phi2(
            args.b.ok_or_else(|| usage("phi2 needs --b"))?,
            args.gamma.ok_or_else(|| usage("phi2 needs --gamma"))?,
        )?,
        "phi3" => GeneratorSpec::phi3(args.a.ok_or_else(|| usage("phi3 needs --a"))?, args.p)?,
        other => return Err(usage(format!("unknown family {other:?}"))),
    };
    let c = parse_c_mode(args.c_mode.as_deref())?.value(args.p);
    let spec = AsymptoteSpec::for_generator(gen, c, args.p)?;
    let grid = match &args.w {
        Some(s) => parse_f64_list(s, "--w")?,
        None => spec.default_w_grid(),
    };
    let v = verify_limit(&spec, &grid)?;
    if args.csv {
        write_limit_csv(&v, io::stdout().lock())?;
    } else {
        println!("predicted:     {:.12}", v.predicted);
        println!("extrapolated:  {:.12}", v.extrapolated);
        println!("rel_deviation: {:.3e}", v.rel_deviation);
        println!("monotone_approach: {}", v.monotone_approach);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode, Error> {
    let spec = args.estimator.build(args.p)?;
    let mode = match args.mode.as_str() {
        "loss" => McMode::LossSampling,
        "sure" => McMode::SureAveraging,
        other => return Err(usage(format!("--mode must be loss or sure, got {other:?}"))),
    };
    let cfg = McConfig {
        n_reps: args.n_reps,
        seed: args.seed,
        p: args.p,
        lambda: args.lambda,
        mode,
    };
    let est = if args.gap {
        mc_gap_js(&spec, &cfg)?
    } else {
        mc_risk(&spec, &cfg)?
    };
    println!("{}", serde_json::to_string_pretty(&est).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn cmd_phi_eval(args: &PhiEvalArgs) -> Result<ExitCode, Error> {
    let spec = args.estimator.build(args.p)?;
    let grid = match &args.w {
        Some(s) => parse_f64_list(s, "--w")?,
        None => (0..41).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 40.0)).collect(),
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "w,phi,phi_deriv,sure")?;
    for w in grid {
        writeln!(
            out,
            "{w},{:.12e},{:.12e},{:.12e}",
            spec.phi_value(w)?,
            spec.phi_deriv(w)?,
            spec.sure(w)?
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let cfg = QuadConfig::default();
    match &cli.command {
        Cmd::Table(a) => cmd_table(a, &cfg),
        Cmd::RiskCurve(a) => cmd_risk_curve(a, &cfg),
        Cmd::Check(a) => cmd_check(a, &cfg),
        Cmd::Asymptote(a) => cmd_asymptote(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::PhiEval(a) => cmd_phi_eval(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let jobs = cli.jobs.or_else(|| {
        std::env::var("STEIN_DOM_JOBS").ok().and_then(|v| v.parse().ok())
    });
    #[cfg(feature = "parallel")]
    if let Some(jobs) = jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;

    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Numeric { .. } => 4,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
