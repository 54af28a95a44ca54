//! Benchmark protocol: run (instance x encoding x solver) combinations for
//! a number of repetitions, emit one CSV row per repetition and a
//! mean/std summary per combination. Output is a pure function of the
//! configuration, including the seed.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::anneal::{repeat_protocol, AnnealParams, SolverChoice};
use crate::classical::{solve_exact, SolveLimits};
use crate::instance::{parse_instance, Instance};
use crate::qubo::{encode, Encoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Sa,
    Brute,
    Exact,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverKind::Sa => write!(f, "sa"),
            SolverKind::Brute => write!(f, "brute"),
            SolverKind::Exact => write!(f, "exact"),
        }
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sa" => Ok(SolverKind::Sa),
            "brute" => Ok(SolverKind::Brute),
            "exact" => Ok(SolverKind::Exact),
            other => Err(format!("unknown solver '{other}', expected sa, brute or exact")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub instances: Vec<PathBuf>,
    pub encodings: Vec<Encoding>,
    pub solvers: Vec<SolverKind>,
    pub repetitions: usize,
    pub seed: u64,
    /// Override of the annealer's default read count (None = self-tuned
    /// defaults).
    pub reads: Option<usize>,
    pub sweeps: Option<usize>,
    /// Known optimum override; when absent the classical exact solver
    /// provides it (never the best sampled value).
    pub optimum: Option<i64>,
}

/// Optional config document mirroring the benchmark flags; flags override
/// file values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfigFile {
    pub instances: Vec<String>,
    pub encodings: Vec<String>,
    pub solvers: Vec<String>,
    pub repetitions: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub reads: Option<usize>,
    pub sweeps: Option<usize>,
    pub optimum: Option<i64>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("benchmark needs at least one instance, one encoding and one solver")]
    EmptyConfig,
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub const CSV_HEADER: &str =
    "instance,encoding,solver,rep,seed,best_energy,objective,optimum,normalized,feasible,filtered_infeasible";

#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub csv: String,
    pub summary: String,
    /// Combination-level failures (kept out of the CSV).
    pub failures: Vec<String>,
}

struct ComboStats {
    instance: String,
    encoding: Encoding,
    solver: SolverKind,
    n_used: usize,
    mean: f64,
    std: f64,
    had_infeasible: bool,
}

fn run_instance(
    inst: &Instance,
    cfg: &BenchmarkConfig,
    csv: &mut String,
    stats: &mut Vec<ComboStats>,
    failures: &mut Vec<String>,
) {
    let optimum = match cfg.optimum {
        Some(v) => v,
        None => match solve_exact(inst, SolveLimits::default()) {
            Ok(out) => out.value,
            Err(e) => {
                failures.push(format!("{}: exact optimum unavailable: {e}", inst.name));
                return;
            }
        },
    };

    for &enc in &cfg.encodings {
        for &solver in &cfg.solvers {
            // Degenerate optimum: report 1.0 by convention, nothing to solve.
            if optimum == 0 {
                for rep in 0..cfg.repetitions {
                    let seed = cfg.seed.wrapping_add(rep as u64);
                    csv.push_str(&format!(
                        "{},{},{},{},{},0,0,0,1.000000,true,false\n",
                        inst.name, enc, solver, rep, seed
                    ));
                }
                stats.push(ComboStats {
                    instance: inst.name.clone(),
                    encoding: enc,
                    solver,
                    n_used: cfg.repetitions,
                    mean: 1.0,
                    std: 0.0,
                    had_infeasible: false,
                });
                continue;
            }

            if solver == SolverKind::Exact {
                for rep in 0..cfg.repetitions {
                    let seed = cfg.seed.wrapping_add(rep as u64);
                    match solve_exact(inst, SolveLimits::default()) {
                        Ok(out) => {
                            let normalized = out.value as f64 / optimum as f64;
                            csv.push_str(&format!(
                                "{},{},{},{},{},{},{},{},{:.6},true,false\n",
                                inst.name, enc, solver, rep, seed, -out.value, out.value, optimum,
                                normalized
                            ));
                        }
                        Err(e) => failures.push(format!(
                            "{} {} {} rep {rep}: {e}",
                            inst.name, enc, solver
                        )),
                    }
                }
                stats.push(ComboStats {
                    instance: inst.name.clone(),
                    encoding: enc,
                    solver,
                    n_used: cfg.repetitions,
                    mean: 1.0,
                    std: 0.0,
                    had_infeasible: false,
                });
                continue;
            }

            let choice = match solver {
                SolverKind::Sa => {
                    let model = encode(inst, enc);
                    let mut params = AnnealParams::for_model(&model, cfg.seed);
                    if let Some(r) = cfg.reads {
                        params = params.with_reads(r);
                    }
                    if let Some(s) = cfg.sweeps {
                        params = params.with_sweeps(s);
                    }
                    SolverChoice::Sa(params)
                }
                SolverKind::Brute => SolverChoice::BruteForce,
                SolverKind::Exact => unreachable!(),
            };

            match repeat_protocol(inst, enc, &choice, cfg.repetitions, optimum) {
                Ok(summary) => {
                    let mut had_infeasible = false;
                    for (rep, report) in summary.reports.iter().enumerate() {
                        let seed = cfg.seed.wrapping_add(rep as u64);
                        let normalized = *report.normalized.numer() as f64
                            / *report.normalized.denom() as f64;
                        had_infeasible |= report.filtered_infeasible;
                        csv.push_str(&format!(
                            "{},{},{},{},{},{},{},{},{:.6},{},{}\n",
                            inst.name,
                            enc,
                            solver,
                            rep,
                            seed,
                            report.best_energy,
                            report.objective,
                            optimum,
                            normalized,
                            report.feasible,
                            report.filtered_infeasible
                        ));
                    }
                    stats.push(ComboStats {
                        instance: inst.name.clone(),
                        encoding: enc,
                        solver,
                        n_used: summary.n_used,
                        mean: summary.mean,
                        std: summary.std,
                        had_infeasible,
                    });
                }
                Err(e) => failures.push(format!("{} {} {}: {e}", inst.name, enc, solver)),
            }
        }
    }
}

/// Runs the full benchmark grid. Combinations that fail (oversize models,
/// unsolvable optima) are recorded in `failures` and the run continues.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutput, BenchError> {
    if cfg.instances.is_empty() || cfg.encodings.is_empty() || cfg.solvers.is_empty() {
        return Err(BenchError::EmptyConfig);
    }

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut stats = Vec::new();
    let mut failures = Vec::new();

    for path in &cfg.instances {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.display().to_string(),
            source,
        })?;
        match parse_instance(&text) {
            Ok(inst) => run_instance(&inst, cfg, &mut csv, &mut stats, &mut failures),
            Err(e) => failures.push(format!("{}: {e}", path.display())),
        }
    }

    let mut summary = String::new();
    summary.push_str(&format!(
        "{:<12} {:<6} {:<6} {:>5} {:>8} {:>8}  note\n",
        "instance", "enc", "solver", "used", "mean", "std"
    ));
    for s in &stats {
        let note = if s.had_infeasible {
            "infeasible-filtered"
        } else {
            ""
        };
        summary.push_str(&format!(
            "{:<12} {:<6} {:<6} {:>5} {:>8.4} {:>8.4}  {}\n",
            s.instance, s.encoding.to_string(), s.solver.to_string(), s.n_used, s.mean, s.std, note
        ));
    }
    for f in &failures {
        summary.push_str(&format!("FAIL {f}\n"));
    }

    Ok(BenchmarkOutput {
        csv,
        summary,
        failures,
    })
}
