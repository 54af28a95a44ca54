//! Solvers for compiled QUBO models: an exhaustive minimizer for small
//! models and a seeded single-flip Metropolis annealer, plus the
//! evaluation protocol (decode, feasibility filtering, normalization,
//! repetition statistics).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::classical::{check_feasible, objective_value, FeasibilityReport, Schedule};
use crate::instance::Instance;
use crate::qubo::{decode, encode, Encoding, QuboModel, VariableMap};
use crate::{Coeff, Rational};

#[derive(Debug, Error)]
pub enum AnnealError {
    #[error("model has {got} variables, brute-force limit is {limit}")]
    ModelTooLarge { got: usize, limit: usize },
}

/// Adjacency view of a model for O(degree) single-flip energy deltas.
struct FlipTable {
    diag: Vec<Coeff>,
    neighbors: Vec<Vec<(usize, Coeff)>>,
}

impl FlipTable {
    fn new(model: &QuboModel) -> Self {
        let n = model.n();
        let mut diag = vec![0; n];
        for (&i, &c) in model.form.diag() {
            diag[i] = c;
        }
        let mut neighbors = vec![Vec::new(); n];
        for (&(i, j), &c) in model.form.offdiag() {
            neighbors[i].push((j, c));
            neighbors[j].push((i, c));
        }
        FlipTable { diag, neighbors }
    }

    /// Energy change of flipping bit `i` in state `bits`.
    fn delta(&self, bits: &[bool], i: usize) -> Coeff {
        let mut local = self.diag[i];
        for &(j, c) in &self.neighbors[i] {
            if bits[j] {
                local += c;
            }
        }
        if bits[i] {
            -local
        } else {
            local
        }
    }
}

/// Lexicographic order on bitstrings: the first differing position decides,
/// 0 before 1.
fn lex_less(a: &[bool], b: &[bool]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return !*x;
        }
    }
    false
}

pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Exact global minimum over all 2^n bitstrings, visited in Gray-code
/// order with incremental deltas. Ties resolve to the lexicographically
/// smallest bitstring.
pub fn brute_force_min(model: &QuboModel, limit: usize) -> Result<(Vec<bool>, Coeff), AnnealError> {
    let n = model.n();
    if n > limit {
        return Err(AnnealError::ModelTooLarge { got: n, limit });
    }
    let table = FlipTable::new(model);
    let mut bits = vec![false; n];
    let mut energy = model.form.offset();
    let mut best_bits = bits.clone();
    let mut best_energy = energy;

    let total: u64 = 1 << n;
    for step in 1..total {
        let i = step.trailing_zeros() as usize;
        energy += table.delta(&bits, i);
        bits[i] = !bits[i];
        if energy < best_energy || (energy == best_energy && lex_less(&bits, &best_bits)) {
            best_energy = energy;
            best_bits.copy_from_slice(&bits);
        }
    }
    Ok((best_bits, best_energy))
}

/// Annealing schedule and sampling budget. `reads` independent restarts,
/// each running `sweeps` passes of single-flip Metropolis updates under a
/// geometric inverse-temperature ramp from `beta_initial` to `beta_final`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealParams {
    pub reads: usize,
    pub sweeps: usize,
    pub beta_initial: f64,
    pub beta_final: f64,
    pub seed: u64,
}

impl AnnealParams {
    pub const DEFAULT_READS: usize = 2000;
    pub const DEFAULT_SWEEPS: usize = 1000;

    /// Self-tuning defaults: the initial temperature accepts a move of the
    /// median coefficient magnitude with probability ~0.5, the final one
    /// accepts a unit move with probability ~1e-3.
    pub fn for_model(model: &QuboModel, seed: u64) -> Self {
        let mut mags: Vec<Coeff> = model
            .form
            .diag()
            .values()
            .chain(model.form.offdiag().values())
            .map(|c| c.abs())
            .filter(|&c| c > 0)
            .collect();
        mags.sort_unstable();
        let median = if mags.is_empty() {
            1
        } else {
            mags[mags.len() / 2]
        };
        let beta_initial = std::f64::consts::LN_2 / median as f64;
        let beta_final = (1e3f64).ln();
        AnnealParams {
            reads: Self::DEFAULT_READS,
            sweeps: Self::DEFAULT_SWEEPS,
            beta_initial: beta_initial.min(beta_final),
            beta_final,
            seed,
        }
    }

    pub fn with_reads(mut self, reads: usize) -> Self {
        self.reads = reads;
        self
    }

    pub fn with_sweeps(mut self, sweeps: usize) -> Self {
        self.sweeps = sweeps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) {
        assert!(self.reads >= 1, "reads must be >= 1");
        assert!(self.sweeps >= 1, "sweeps must be >= 1");
        assert!(
            self.beta_initial > 0.0 && self.beta_initial <= self.beta_final,
            "need 0 < beta_initial <= beta_final"
        );
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub bits: Vec<bool>,
    pub energy: Coeff,
    pub count: usize,
}

/// Aggregated annealing output, sorted by (energy, bitstring).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub best_index: usize,
}

impl SampleSet {
    pub fn best(&self) -> &Sample {
        &self.samples[self.best_index]
    }
}

fn anneal_one_read(table: &FlipTable, offset: Coeff, params: &AnnealParams, read: usize) -> (Vec<bool>, Coeff) {
    let n = table.diag.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(read as u64));
    let target: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    // Build the random start from the all-zero state so the energy can be
    // accumulated with single-flip deltas.
    let mut bits = vec![false; n];
    let mut energy = offset;
    for (i, &want) in target.iter().enumerate() {
        if want {
            energy += table.delta(&bits, i);
            bits[i] = true;
        }
    }
    let mut best_bits = bits.clone();
    let mut best_energy = energy;

    let ratio = if params.sweeps > 1 {
        (params.beta_final / params.beta_initial).powf(1.0 / (params.sweeps - 1) as f64)
    } else {
        1.0
    };
    let mut beta = params.beta_initial;
    for _ in 0..params.sweeps {
        for i in 0..n {
            let d = table.delta(&bits, i);
            let accept = d <= 0 || rng.gen::<f64>() < (-beta * d as f64).exp();
            if accept {
                bits[i] = !bits[i];
                energy += d;
                if energy < best_energy || (energy == best_energy && lex_less(&bits, &best_bits)) {
                    best_energy = energy;
                    best_bits.copy_from_slice(&bits);
                }
            }
        }
        beta *= ratio;
    }
    (best_bits, best_energy)
}

/// Runs the annealer. Deterministic for fixed (model, params): each read
/// derives its own generator from `seed + read_index`, so the merged
/// result does not depend on scheduling.
pub fn simulated_anneal(model: &QuboModel, params: &AnnealParams) -> SampleSet {
    params.validate();
    let table = FlipTable::new(model);
    let offset = model.form.offset();

    let reads: Vec<(Vec<bool>, Coeff)> = (0..params.reads)
        .into_par_iter()
        .map(|r| anneal_one_read(&table, offset, params, r))
        .collect();

    let mut agg: std::collections::BTreeMap<Vec<bool>, (Coeff, usize)> = Default::default();
    for (bits, energy) in reads {
        debug_assert_eq!(energy, model.energy(&bits));
        let e = agg.entry(bits).or_insert((energy, 0));
        e.1 += 1;
    }
    let mut samples: Vec<Sample> = agg
        .into_iter()
        .map(|(bits, (energy, count))| Sample {
            bits,
            energy,
            count,
        })
        .collect();
    samples.sort_by(|a, b| a.energy.cmp(&b.energy).then(a.bits.cmp(&b.bits)));
    SampleSet {
        samples,
        best_index: 0,
    }
}

/// Outcome of one solve, evaluated against the known classical optimum.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub best_energy: Coeff,
    /// `None` when no sample in the set decodes to a feasible schedule.
    pub best_schedule: Option<Schedule>,
    pub objective: i64,
    /// objective / optimum for the reported (feasible) schedule; 0 when no
    /// feasible sample exists.
    pub normalized: Rational,
    pub feasible: bool,
    /// Feasibility report of the raw best-energy sample.
    pub violations: FeasibilityReport,
    /// True when the best-energy sample was infeasible and a lower-ranked
    /// feasible sample was reported instead.
    pub filtered_infeasible: bool,
}

/// Decodes and scores a sample set. The best-energy sample is checked
/// first; if it is infeasible the best feasible sample in the set (if any)
/// is reported instead and `filtered_infeasible` is set.
pub fn evaluate_run(
    inst: &Instance,
    map: &VariableMap,
    samples: &SampleSet,
    optimum: i64,
) -> RunReport {
    assert!(optimum > 0, "optimum must be positive");
    let best = samples.best();
    let best_report = check_feasible(inst, &decode(map, &best.bits).schedule())
        .expect("decoded members reference instance requests");

    let mut chosen: Option<(Schedule, bool)> = None;
    if best_report.feasible {
        chosen = Some((decode(map, &best.bits).schedule(), false));
    } else {
        for s in &samples.samples {
            let sched = decode(map, &s.bits).schedule();
            if check_feasible(inst, &sched).expect("valid references").feasible {
                chosen = Some((sched, true));
                break;
            }
        }
    }

    match chosen {
        Some((sched, filtered)) => {
            let objective = objective_value(inst, &sched).expect("valid references");
            RunReport {
                best_energy: best.energy,
                objective,
                normalized: Rational::new(objective, optimum),
                feasible: true,
                best_schedule: Some(sched),
                violations: best_report,
                filtered_infeasible: filtered,
            }
        }
        None => RunReport {
            best_energy: best.energy,
            best_schedule: None,
            objective: 0,
            normalized: Rational::new(0, 1),
            feasible: false,
            violations: best_report,
            filtered_infeasible: true,
        },
    }
}

/// Solver choice for the repetition protocol.
#[derive(Debug, Clone)]
pub enum SolverChoice {
    Sa(AnnealParams),
    BruteForce,
}

#[derive(Debug, Clone)]
pub struct ProtocolSummary {
    /// Mean of normalized values over repetitions that produced a feasible
    /// schedule. 0 when none did.
    pub mean: f64,
    /// Population standard deviation (divide by N) over the same set.
    pub std: f64,
    pub n_used: usize,
    pub reports: Vec<RunReport>,
}

/// Runs `repetitions` independent solves (seeds `seed + 0 .. seed + r-1`
/// for SA) and aggregates normalized values, filtering repetitions without
/// any feasible sample.
pub fn repeat_protocol(
    inst: &Instance,
    enc: Encoding,
    solver: &SolverChoice,
    repetitions: usize,
    optimum: i64,
) -> Result<ProtocolSummary, AnnealError> {
    assert!(repetitions >= 1, "repetitions must be >= 1");
    let model = encode(inst, enc);
    let mut reports = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let samples = match solver {
            SolverChoice::Sa(params) => {
                let p = params.with_seed(params.seed.wrapping_add(rep as u64));
                simulated_anneal(&model, &p)
            }
            SolverChoice::BruteForce => {
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
        };
        reports.push(evaluate_run(inst, &model.var_map, &samples, optimum));
    }

    let used: Vec<f64> = reports
        .iter()
        .filter(|r| r.feasible)
        .map(|r| *r.normalized.numer() as f64 / *r.normalized.denom() as f64)
        .collect();
    let n_used = used.len();
    let (mean, std) = if n_used == 0 {
        (0.0, 0.0)
    } else {
        let mean = used.iter().sum::<f64>() / n_used as f64;
        let var = used.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n_used as f64;
        (mean, var.sqrt())
    };
    Ok(ProtocolSummary {
        mean,
        std,
        n_used,
        reports,
    })
}
