use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lipstab::convex::{distance_convex, linearize, lip_bound_convex, ConvexSystem, CutConfig};
use lipstab::demo::{demo_generate, Demo};
use lipstab::document::{parse_system, LoadedSystem};
use lipstab::estimator::{
    empirical_lip_with, partition_compare, EstimateReport, Execution, SamplingConfig, SamplingMode,
};
use lipstab::kernel::{project_polyhedron, Polyhedron};
use lipstab::model::{BlockPartition, LinearSystem, Perturbation};
use lipstab::report::{fmt_float, fmt_vec, Table};
use lipstab::stability::{
    check_ssc, coderivative_norm, distance_formula, eps_active, lip_bound, same_bound, LipReport,
};
use lipstab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "lipstab",
    version,
    about = "Lipschitzian stability of block-perturbed inequality systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// System document; standard input when absent or "-"
    #[arg(long, global = true)]
    system: Option<PathBuf>,
    /// Comma-separated point x1,...,xn
    #[arg(long, global = true, allow_hyphen_values = true)]
    anchor: Option<String>,
    /// CSV report path
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance of the Slater verdicts
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Comma-separated decreasing radii
    #[arg(long = "radius-ladder", global = true, value_delimiter = ',')]
    radius_ladder: Option<Vec<f64>>,
    /// Samples per radius
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true, default_value_t = 0.0)]
    eps: f64,
    /// Truncation length of the paper-example demo
    #[arg(long = "N", global = true)]
    big_n: Option<usize>,
    /// Partition choice: doc, min, max or random:K (comma-separated list for compare-partitions)
    #[arg(long, global = true)]
    partition: Option<String>,
    /// Comma-separated perturbation, one value per block
    #[arg(long, global = true, allow_hyphen_values = true)]
    perturbation: Option<String>,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Joint)]
    mode: ModeArg,
    /// Refinement rounds of the convex bound
    #[arg(long, global = true)]
    rounds: Option<usize>,
    /// Evaluate samples on the calling thread only
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Joint,
    ParameterOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoName {
    PaperExample,
    ConvexSquare,
    ConvexSquareShifted,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Strong Slater condition by the LP and hull routes
    Ssc,
    /// Distance from --anchor to the perturbed feasible set
    Dist,
    /// Exact Lipschitzian bound at --anchor
    Lip,
    /// Coderivative norm at --anchor, cross-checked against the bound
    Codnorm,
    /// Bound over the eps-active rows at --anchor
    EpsActive,
    /// Subgradient cuts of a convex system
    Linearize {
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Monte Carlo estimate of the modulus at --anchor
    Estimate,
    /// Estimates for the minimum, chosen and maximum partitions
    ComparePartitions,
    /// Emit a built-in system document
    Demo {
        #[arg(value_enum)]
        name: DemoName,
        /// Dimension of the random demo
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Row count of the random demo
        #[arg(long, default_value_t = 10)]
        m: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Demo { name, n, m } => demo(c, *name, *n, *m),
        Command::Ssc => ssc(c, &linear(c)?.0),
        Command::Dist => match load(c)? {
            LoadedSystem::Linear { system, partition } => dist_linear(c, &system, &partition),
            LoadedSystem::Convex { system } => dist_convex(c, &system),
        },
        Command::Lip => match load(c)? {
            LoadedSystem::Linear { system, .. } => lip_linear(c, &system),
            LoadedSystem::Convex { system } => lip_convex(c, &system),
        },
        Command::Codnorm => {
            let (system, partition) = linear(c)?;
            codnorm(c, &system, &partition)
        }
        Command::EpsActive => eps(c, &linear(c)?.0),
        Command::Linearize { budget } => match load(c)? {
            LoadedSystem::Convex { system } => linearize_cmd(c, &system, *budget),
            LoadedSystem::Linear { .. } => Err(Error::InvalidArgument(
                "linearize needs a document with a convex list".into(),
            )),
        },
        Command::Estimate => {
            let (system, partition) = linear(c)?;
            estimate(c, &system, &partition)
        }
        Command::ComparePartitions => {
            let (system, partition) = linear(c)?;
            compare(c, &system, &partition)
        }
    }
}

fn load(c: &Common) -> Result<LoadedSystem> {
    let text = match &c.system {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p)?,
        _ => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s)?;
            s
        }
    };
    parse_system(&text)
}

fn linear(c: &Common) -> Result<(LinearSystem, BlockPartition)> {
    match load(c)? {
        LoadedSystem::Linear { system, partition } => Ok((system, partition)),
        LoadedSystem::Convex { .. } => Err(Error::InvalidArgument(
            "this command needs a linear system document".into(),
        )),
    }
}

fn parse_list(what: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("{what}: cannot parse {s:?}")))
        })
        .collect()
}

fn anchor(c: &Common, dim: usize) -> Result<Vec<f64>> {
    let text = c
        .anchor
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--anchor is required".into()))?;
    let x = parse_list("--anchor", text)?;
    if x.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "--anchor has {} entries, system dimension is {dim}",
            x.len()
        )));
    }
    Ok(x)
}

fn perturbation(c: &Common, blocks: usize) -> Result<Vec<f64>> {
    match &c.perturbation {
        None => Ok(vec![0.0; blocks]),
        Some(text) => {
            let p = parse_list("--perturbation", text)?;
            if p.len() != blocks {
                return Err(Error::InvalidArgument(format!(
                    "--perturbation has {} entries for {blocks} blocks",
                    p.len()
                )));
            }
            Ok(p)
        }
    }
}

fn choose_partition(
    spec: &str,
    system: &LinearSystem,
    doc: &BlockPartition,
    seed: u64,
) -> Result<(String, BlockPartition)> {
    let spec = spec.trim();
    let part = match spec {
        "doc" => doc.clone(),
        "min" => BlockPartition::minimum(system),
        "max" => BlockPartition::maximum(system),
        _ => {
            let k = spec
                .strip_prefix("random:")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k > 0)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "--partition: expected doc, min, max or random:K, got {spec:?}"
                    ))
                })?;
            BlockPartition::random_seeded(system, k, seed)
        }
    };
    Ok((spec.to_string(), part))
}

fn execution(c: &Common) -> Execution {
    if c.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn sampling(c: &Common) -> SamplingConfig {
    let mut cfg = SamplingConfig {
        seed: c.seed,
        mode: match c.mode {
            ModeArg::Joint => SamplingMode::Joint,
            ModeArg::ParameterOnly => SamplingMode::ParameterOnly,
        },
        ..SamplingConfig::default()
    };
    if let Some(r) = &c.radius_ladder {
        cfg.radii = r.clone();
    }
    if let Some(s) = c.samples {
        cfg.samples_per_radius = s;
    }
    cfg
}

fn emit(c: &Common, table: &Table) -> Result<()> {
    let widths: Vec<usize> = (0..table.header.len())
        .map(|i| {
            table
                .rows
                .iter()
                .map(|r| r[i].len())
                .chain([table.header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(s, w)| format!("{s:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    println!("{}", line(&table.header));
    for r in &table.rows {
        println!("{}", line(r));
    }
    if let Some(path) = &c.out {
        table.write_path(path)?;
    }
    Ok(())
}

fn demo(c: &Common, name: DemoName, n: usize, m: usize) -> Result<()> {
    let which = match name {
        DemoName::PaperExample => Demo::PaperExample {
            n: c.big_n.unwrap_or(2),
        },
        DemoName::ConvexSquare => Demo::ConvexSquare,
        DemoName::ConvexSquareShifted => Demo::ConvexSquareShifted,
        DemoName::Random => Demo::Random { n, m, seed: c.seed },
    };
    let json = demo_generate(&which)?.to_json();
    match &c.out {
        Some(path) => {
            std::fs::write(path, format!("{json}\n"))?;
            println!("demo={}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn ssc(c: &Common, system: &LinearSystem) -> Result<()> {
    let r = check_ssc(system, c.tol)?;
    let mut t = Table::new(&["route", "holds", "value", "witness"]);
    t.push(vec![
        "lp".into(),
        r.lp_holds.to_string(),
        fmt_float(r.margin),
        r.slater_point.as_deref().map(fmt_vec).unwrap_or_default(),
    ]);
    t.push(vec![
        "hull".into(),
        r.hull_holds.to_string(),
        fmt_float(r.hull_gap),
        String::new(),
    ]);
    emit(c, &t)?;
    if !r.consistent {
        println!("note: the nominal system has no solution");
    }
    println!("ssc={} hull_gap={}", r.holds, fmt_float(r.hull_gap));
    Ok(())
}

fn dist_linear(c: &Common, system: &LinearSystem, doc: &BlockPartition) -> Result<()> {
    let (_, partition) =
        choose_partition(c.partition.as_deref().unwrap_or("doc"), system, doc, c.seed)?;
    let blocks = partition.row_blocks(system)?;
    let x = anchor(c, system.dimension)?;
    let p = Perturbation(perturbation(c, blocks.n_blocks)?);
    let formula = distance_formula(system, &partition, &p, &x)?;
    let poly = Polyhedron::from_system(&system.perturbed(&blocks, &p));
    let oracle = project_polyhedron(&x, &poly, system.norm)?;
    let mut t = Table::new(&["method", "distance", "point"]);
    t.push(vec!["formula".into(), fmt_float(formula), String::new()]);
    t.push(vec![
        "projection".into(),
        fmt_float(oracle.distance),
        fmt_vec(&oracle.point),
    ]);
    emit(c, &t)?;
    println!(
        "dist={} oracle={}",
        fmt_float(formula),
        fmt_float(oracle.distance)
    );
    Ok(())
}

fn dist_convex(c: &Common, system: &ConvexSystem) -> Result<()> {
    let x = anchor(c, system.dimension)?;
    let p = perturbation(c, system.blocks.len())?;
    let d = distance_convex(system, &p, &x)?;
    let mut t = Table::new(&["distance", "point", "cuts", "violation"]);
    t.push(vec![
        fmt_float(d.distance),
        fmt_vec(&d.point),
        d.cuts.to_string(),
        fmt_float(d.violation),
    ]);
    emit(c, &t)?;
    println!("dist={} cuts={}", fmt_float(d.distance), d.cuts);
    Ok(())
}

fn weights_table(labels: &[String], report: &LipReport) -> Table {
    let mut t = Table::new(&["label", "weight"]);
    for (label, w) in labels.iter().zip(&report.slice_weights.0) {
        if *w != 0.0 {
            t.push(vec![label.clone(), fmt_float(*w)]);
        }
    }
    t
}

fn print_notes(notes: &[String]) {
    for n in notes {
        println!("note: {n}");
    }
}

fn lip_linear(c: &Common, system: &LinearSystem) -> Result<()> {
    let x = anchor(c, system.dimension)?;
    let r = lip_bound(system, &x)?;
    let labels: Vec<String> = system.labels().map(String::from).collect();
    emit(c, &weights_table(&labels, &r))?;
    if let Some(u) = &r.minimizer {
        println!("minimizer: {}", fmt_vec(u));
    }
    print_notes(&r.notes);
    println!("lip={} regime={}", fmt_float(r.bound), r.regime.name());
    Ok(())
}

fn cut_config(c: &Common) -> CutConfig {
    let mut cfg = CutConfig {
        seed: c.seed,
        ..CutConfig::default()
    };
    if let Some(r) = c.rounds {
        cfg.max_rounds = r;
    }
    cfg
}

fn lip_convex(c: &Common, system: &ConvexSystem) -> Result<()> {
    let x = anchor(c, system.dimension)?;
    let r = lip_bound_convex(system, &x, &cut_config(c))?;
    let mut t = Table::new(&["round", "bound"]);
    for (i, b) in r.trace.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), fmt_float(*b)]);
    }
    emit(c, &t)?;
    print_notes(&r.report.notes);
    println!(
        "lip={} regime={} converged={}",
        fmt_float(r.report.bound),
        r.report.regime.name(),
        r.converged
    );
    if r.converged {
        Ok(())
    } else {
        Err(Error::NonConvergent {
            what: "convex bound refinement",
            iterations: r.trace.len(),
            gap: r.gap,
        })
    }
}

fn codnorm(c: &Common, system: &LinearSystem, partition: &BlockPartition) -> Result<()> {
    let x = anchor(c, system.dimension)?;
    let cod = coderivative_norm(system, partition, &x)?;
    let lip = lip_bound(system, &x)?;
    let mut t = Table::new(&["label", "weight"]);
    for (row, w) in system.rows.iter().zip(&cod.weights) {
        if *w != 0.0 {
            t.push(vec![row.label.clone(), fmt_float(*w)]);
        }
    }
    emit(c, &t)?;
    println!(
        "codnorm={} lip={} agree={}",
        fmt_float(cod.value),
        fmt_float(lip.bound),
        same_bound(cod.value, lip.bound, 1e-6)
    );
    Ok(())
}

fn eps(c: &Common, system: &LinearSystem) -> Result<()> {
    let x = anchor(c, system.dimension)?;
    let r = eps_active(system, &x, c.eps)?;
    let mut t = Table::new(&["label", "residual", "active"]);
    for (i, row) in system.rows.iter().enumerate() {
        t.push(vec![
            row.label.clone(),
            fmt_float(row.residual(&x)),
            r.indices.contains(&i).to_string(),
        ]);
    }
    emit(c, &t)?;
    print_notes(&r.report.notes);
    println!(
        "active={{{}}} lip={} matches_full={}",
        r.labels.join(";"),
        fmt_float(r.report.bound),
        r.matches_full
    );
    Ok(())
}

fn linearize_cmd(c: &Common, system: &ConvexSystem, budget: Option<usize>) -> Result<()> {
    let x = match &c.anchor {
        Some(_) => anchor(c, system.dimension)?,
        None => vec![0.0; system.dimension],
    };
    let mut cfg = cut_config(c);
    if let Some(b) = budget {
        cfg.budget = b;
    }
    let lin = linearize(system, &cfg, &x)?;
    let mut t = Table::new(&["block", "label", "u", "rhs", "sample"]);
    for (row, s) in lin.system.rows.iter().zip(&lin.samples) {
        t.push(vec![
            system.blocks[s.block].label.clone(),
            row.label.clone(),
            fmt_vec(&row.a),
            fmt_float(row.b),
            s.provenance.as_deref().map(fmt_vec).unwrap_or_default(),
        ]);
    }
    emit(c, &t)?;
    println!("rows={} blocks={}", lin.system.len(), lin.partition.len());
    Ok(())
}

fn estimate_rows(t: &mut Table, name: &str, blocks: usize, r: &EstimateReport) {
    for s in r.per_radius.iter().rev() {
        t.push(vec![
            name.to_string(),
            blocks.to_string(),
            fmt_float(s.radius),
            s.samples.to_string(),
            s.zero_over_zero.to_string(),
            s.skipped.to_string(),
            fmt_float(s.max_quotient),
        ]);
    }
}

const ESTIMATE_HEADER: [&str; 7] = [
    "partition",
    "blocks",
    "radius",
    "samples",
    "zero_over_zero",
    "skipped",
    "max_quotient",
];

fn estimate(c: &Common, system: &LinearSystem, doc: &BlockPartition) -> Result<()> {
    let (name, partition) =
        choose_partition(c.partition.as_deref().unwrap_or("doc"), system, doc, c.seed)?;
    let x = anchor(c, system.dimension)?;
    let r = empirical_lip_with(system, &partition, &x, &sampling(c), execution(c))?;
    let lip = lip_bound(system, &x)?;
    let mut t = Table::new(&ESTIMATE_HEADER);
    estimate_rows(&mut t, &name, partition.len(), &r);
    emit(c, &t)?;
    print_notes(&r.notes);
    println!(
        "estimate={} lip={} mode={}",
        fmt_float(r.estimate),
        fmt_float(lip.bound),
        r.mode.name()
    );
    Ok(())
}

fn compare(c: &Common, system: &LinearSystem, doc: &BlockPartition) -> Result<()> {
    let x = anchor(c, system.dimension)?;
    let specs = c.partition.as_deref().unwrap_or("random:2");
    let middle = specs
        .split(',')
        .map(|s| choose_partition(s, system, doc, c.seed))
        .collect::<Result<Vec<_>>>()?;
    let cmp = partition_compare(system, &middle, &x, &sampling(c), execution(c))?;
    let mut header = ESTIMATE_HEADER.to_vec();
    header.push("within_tolerance");
    let mut t = Table::new(&header);
    for e in &cmp.entries {
        let mut part = Table::new(&ESTIMATE_HEADER);
        estimate_rows(&mut part, &e.name, e.blocks, &e.report);
        for mut row in part.rows {
            row.push(e.within_tolerance.to_string());
            t.push(row);
        }
    }
    emit(c, &t)?;
    let first = &cmp.entries[0];
    let last = &cmp.entries[cmp.entries.len() - 1];
    println!(
        "ordered=true lip={} min={} max={} within={}",
        fmt_float(cmp.lip_bound),
        fmt_float(first.report.estimate),
        fmt_float(last.report.estimate),
        cmp.entries.iter().all(|e| e.within_tolerance)
    );
    Ok(())
}
