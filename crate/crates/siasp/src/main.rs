use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use siasp::anneal::{
    brute_force_min, simulated_anneal, AnnealParams, Sample, SampleSet, BRUTE_FORCE_LIMIT,
};
use siasp::bench::{run_benchmark, BenchmarkConfig, BenchmarkConfigFile, SolverKind};
use siasp::classical::{solve_exact, SolveLimits};
use siasp::instance::{
    instance_stats, parse_instance_with_report, reduce_instance, serialize_instance, validate,
    Instance,
};
use siasp::qubo::{encode, export_graph, export_qubo, term_counts, Encoding};

#[derive(Parser)]
#[command(name = "siasp", version, about = "Satellite image acquisition scheduling via QUBO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print structural statistics and QUBO term counts per instance
    Stats {
        /// Instance files (canonical JSON format)
        #[arg(required = true)]
        instances: Vec<PathBuf>,
    },
    /// Randomly reduce an instance to a target request count
    Reduce {
        instance: PathBuf,
        /// Number of requests to keep
        #[arg(long)]
        target: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output instance file
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile an instance to a QUBO coefficient file
    Encode {
        instance: PathBuf,
        #[arg(long, default_value = "4cam")]
        encoding: Encoding,
        /// Output QUBO file
        #[arg(long)]
        out: PathBuf,
        /// Also write a DOT graph (same path, .dot extension)
        #[arg(long)]
        graph: bool,
    },
    /// Solve one instance with one encoding and solver
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "4cam")]
        encoding: Encoding,
        /// sa, brute or exact
        #[arg(long, default_value = "sa")]
        solver: SolverKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        reads: Option<usize>,
        #[arg(long)]
        sweeps: Option<usize>,
        /// Known optimum (skips the classical exact solve)
        #[arg(long)]
        optimum: Option<i64>,
        /// Write the raw sample set to this file
        #[arg(long)]
        samples_out: Option<PathBuf>,
    },
    /// Run the full benchmark grid and emit CSV + summary
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Instance files; may also come from --config
    instances: Vec<PathBuf>,
    /// Encodings to run (repeatable)
    #[arg(long = "encoding")]
    encodings: Vec<Encoding>,
    /// Solvers to run (repeatable): sa, brute, exact
    #[arg(long = "solver")]
    solvers: Vec<SolverKind>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for results.csv and summary.txt
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reads: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    optimum: Option<i64>,
    /// JSON config mirroring these flags; flags override the file
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let (inst, removed) = parse_instance_with_report(&text)
        .with_context(|| format!("cannot parse {}", path.display()))?;
    if removed > 0 {
        eprintln!("note: {}: removed {removed} duplicate constraints", path.display());
    }
    for v in validate(&inst) {
        eprintln!("note: {}: {v}", path.display());
    }
    Ok(inst)
}

const STATS_HEADER: &str = "id\trequests\tstereo\tconstraints\tternary\tL4cam\tQ4cam\tL3cam\tQ3cam";

fn stats_row(inst: &Instance) -> String {
    let s = instance_stats(inst);
    let (l4, q4) = term_counts(&encode(inst, Encoding::FourCam));
    let (l3, q3) = term_counts(&encode(inst, Encoding::ThreeCam));
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        inst.name, s.n_requests, s.n_stereo, s.n_constraints, s.n_ternary, l4, q4, l3, q3
    )
}

fn schedule_text(sched: &siasp::classical::Schedule) -> String {
    if sched.assignments.is_empty() {
        return "(empty)".to_string();
    }
    sched
        .assignments
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_samples(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut out = String::from("energy count bits\n");
    for s in samples {
        let bits: String = s.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        out.push_str(&format!("{} {} {}\n", s.energy, s.count, bits));
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    path: &Path,
    enc: Encoding,
    solver: SolverKind,
    seed: u64,
    reads: Option<usize>,
    sweeps: Option<usize>,
    optimum: Option<i64>,
    samples_out: Option<&Path>,
) -> Result<()> {
    let inst = load_instance(path)?;

    if solver == SolverKind::Exact {
        let out = solve_exact(&inst, SolveLimits::default())?;
        println!("instance:  {}", inst.name);
        println!("solver:    exact (classical branch and bound)");
        println!("value:     {}", out.value);
        println!("optimal:   {}", out.proven_optimal);
        println!("schedule:  {}", schedule_text(&out.schedule));
        return Ok(());
    }

    let model = encode(&inst, enc);
    let samples: SampleSet = match solver {
        SolverKind::Brute => {
            let (bits, energy) = brute_force_min(&model, BRUTE_FORCE_LIMIT)?;
            SampleSet {
                samples: vec![Sample {
                    bits,
                    energy,
                    count: 1,
                }],
                best_index: 0,
            }
        }
        SolverKind::Sa => {
            let mut params = AnnealParams::for_model(&model, seed);
            if let Some(r) = reads {
                params = params.with_reads(r);
            }
            if let Some(s) = sweeps {
                params = params.with_sweeps(s);
            }
            simulated_anneal(&model, &params)
        }
        SolverKind::Exact => unreachable!(),
    };

    if let Some(p) = samples_out {
        write_samples(p, &samples.samples)?;
    }

    let opt = match optimum {
        Some(v) => v,
        None => solve_exact(&inst, SolveLimits::default())?.value,
    };

    println!("instance:   {}", inst.name);
    println!("encoding:   {enc}");
    println!("solver:     {solver}");
    println!("variables:  {}", model.n());
    println!("penalty:    {}", model.penalty);
    println!("best energy {}", samples.best().energy);
    if opt == 0 {
        // No requests means nothing to schedule; normalized is 1 by convention.
        println!("objective:  0");
        println!("normalized: 1.000000");
        println!("feasible:   true");
        return Ok(());
    }
    let report = siasp::anneal::evaluate_run(&inst, &model.var_map, &samples, opt);
    println!("objective:  {}", report.objective);
    println!("optimum:    {opt}");
    println!(
        "normalized: {:.6}",
        *report.normalized.numer() as f64 / *report.normalized.denom() as f64
    );
    println!("feasible:   {}", report.feasible);
    if report.filtered_infeasible {
        println!("note:       best-energy sample was infeasible; reported best feasible sample");
    }
    match &report.best_schedule {
        Some(s) => println!("schedule:   {}", schedule_text(s)),
        None => println!("schedule:   (no feasible sample)"),
    }
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<()> {
    let file: BenchmarkConfigFile = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("cannot parse config {}", path.display()))?
        }
        None => BenchmarkConfigFile::default(),
    };

    let instances: Vec<PathBuf> = if args.instances.is_empty() {
        file.instances.iter().map(PathBuf::from).collect()
    } else {
        args.instances
    };
    let encodings: Vec<Encoding> = if args.encodings.is_empty() {
        file.encodings
            .iter()
            .map(|s| s.parse().map_err(anyhow::Error::msg))
            .collect::<Result<_>>()?
    } else {
        args.encodings
    };
    let solvers: Vec<SolverKind> = if args.solvers.is_empty() {
        file.solvers
            .iter()
            .map(|s| s.parse().map_err(anyhow::Error::msg))
            .collect::<Result<_>>()?
    } else {
        args.solvers
    };
    let out_dir = args
        .out
        .or(file.out.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let cfg = BenchmarkConfig {
        instances,
        encodings,
        solvers,
        repetitions: args.reps.or(file.repetitions).unwrap_or(5),
        seed: args.seed.or(file.seed).unwrap_or(0),
        reads: args.reads.or(file.reads),
        sweeps: args.sweeps.or(file.sweeps),
        optimum: args.optimum.or(file.optimum),
    };

    let output = run_benchmark(&cfg)?;

    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let csv_path = out_dir.join("results.csv");
    let summary_path = out_dir.join("summary.txt");
    std::fs::write(&csv_path, &output.csv)
        .with_context(|| format!("cannot write {}", csv_path.display()))?;
    std::fs::write(&summary_path, &output.summary)
        .with_context(|| format!("cannot write {}", summary_path.display()))?;

    print!("{}", output.summary);
    println!("csv: {}", csv_path.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Stats { instances } => {
            println!("{STATS_HEADER}");
            for path in instances {
                let inst = load_instance(&path)?;
                println!("{}", stats_row(&inst));
            }
        }
        Command::Reduce {
            instance,
            target,
            seed,
            out,
        } => {
            let inst = load_instance(&instance)?;
            let reduced = reduce_instance(&inst, target, seed)?;
            std::fs::write(&out, serialize_instance(&reduced))
                .with_context(|| format!("cannot write {}", out.display()))?;
            println!("{STATS_HEADER}");
            println!("{}", stats_row(&reduced));
        }
        Command::Encode {
            instance,
            encoding,
            out,
            graph,
        } => {
            let inst = load_instance(&instance)?;
            let model = encode(&inst, encoding);
            std::fs::write(&out, export_qubo(&model))
                .with_context(|| format!("cannot write {}", out.display()))?;
            if graph {
                let dot_path = out.with_extension("dot");
                std::fs::write(&dot_path, export_graph(&model))
                    .with_context(|| format!("cannot write {}", dot_path.display()))?;
            }
            let (l, q) = term_counts(&model);
            println!(
                "{}: {} -> {} variables, {} linear, {} quadratic, penalty {}",
                inst.name,
                encoding,
                model.n(),
                l,
                q,
                model.penalty
            );
        }
        Command::Solve {
            instance,
            encoding,
            solver,
            seed,
            reads,
            sweeps,
            optimum,
            samples_out,
        } => {
            if let Some(v) = optimum {
                if v < 0 {
                    bail!("--optimum must be nonnegative");
                }
            }
            cmd_solve(
                &instance,
                encoding,
                solver,
                seed,
                reads,
                sweeps,
                optimum,
                samples_out.as_deref(),
            )?;
        }
        Command::Benchmark(args) => cmd_benchmark(args)?,
    }
    Ok(())
}
