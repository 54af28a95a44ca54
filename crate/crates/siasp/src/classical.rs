//! Classical side of the problem: objective value, feasibility checking
//! and a deterministic branch-and-bound exact solver used as oracle.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::instance::{CameraRef, Instance, PairConstraint, TernaryConstraint};

/// A set of camera assignments. Feasible schedules carry at most one
/// assignment per request; the type itself does not enforce that so that
/// decoded QUBO samples can be checked.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    pub assignments: BTreeSet<CameraRef>,
}

impl Schedule {
    pub fn empty() -> Self {
        Schedule::default()
    }

    pub fn from_assignments(assignments: impl IntoIterator<Item = CameraRef>) -> Self {
        Schedule {
            assignments: assignments.into_iter().collect(),
        }
    }

    /// Ids of requests carrying at least one assignment.
    pub fn taken_requests(&self) -> BTreeSet<u32> {
        self.assignments.iter().map(|c| c.request).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintViolation {
    /// A request carries more than one assignment.
    Once(u32),
    Pair(PairConstraint),
    Ternary(TernaryConstraint),
    /// A mono request assigned to the stereo camera.
    MonoAsStereo(CameraRef),
    /// A stereo request assigned to a mono camera.
    StereoAsMono(CameraRef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<ConstraintViolation>,
}

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("schedule references unknown request {0}")]
    DanglingReference(u32),
    #[error("instance has {got} requests, solver limit is {limit}")]
    InstanceTooLarge { got: usize, limit: usize },
}

/// Sum of weights of requests carrying an assignment. Each request counts
/// once even if (infeasibly) assigned twice.
pub fn objective_value(inst: &Instance, sched: &Schedule) -> Result<i64, ClassicalError> {
    let mut total = 0;
    for id in sched.taken_requests() {
        let r = inst
            .request(id)
            .ok_or(ClassicalError::DanglingReference(id))?;
        total += r.weight;
    }
    Ok(total)
}

/// Upper bound on the objective: sum of all weights, constraints ignored.
pub fn max_objective(inst: &Instance) -> i64 {
    inst.requests.iter().map(|r| r.weight).sum()
}

/// Checks a schedule against all constraint classes.
pub fn check_feasible(inst: &Instance, sched: &Schedule) -> Result<FeasibilityReport, ClassicalError> {
    let mut violations = Vec::new();

    let mut per_request: HashMap<u32, usize> = HashMap::new();
    for c in &sched.assignments {
        let r = inst
            .request(c.request)
            .ok_or(ClassicalError::DanglingReference(c.request))?;
        *per_request.entry(c.request).or_insert(0) += 1;
        if !c.is_valid_for(r.kind) {
            match r.kind {
                crate::instance::Kind::Mono => violations.push(ConstraintViolation::MonoAsStereo(*c)),
                crate::instance::Kind::Stereo => violations.push(ConstraintViolation::StereoAsMono(*c)),
            }
        }
    }
    let mut multi: Vec<u32> = per_request
        .iter()
        .filter(|(_, n)| **n > 1)
        .map(|(id, _)| *id)
        .collect();
    multi.sort_unstable();
    violations.extend(multi.into_iter().map(ConstraintViolation::Once));

    for p in &inst.pairs {
        if sched.assignments.contains(&p.a) && sched.assignments.contains(&p.b) {
            violations.push(ConstraintViolation::Pair(*p));
        }
    }
    for t in &inst.ternaries {
        if t.members.iter().all(|m| sched.assignments.contains(m)) {
            violations.push(ConstraintViolation::Ternary(*t));
        }
    }

    Ok(FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SolveLimits {
    pub max_requests: usize,
    pub time_budget: Duration,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits {
            max_requests: 64,
            time_budget: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub schedule: Schedule,
    pub value: i64,
    pub proven_optimal: bool,
}

struct Search<'a> {
    inst: &'a Instance,
    /// Requests in branching order: descending weight, ties by ascending id.
    order: Vec<usize>,
    /// Suffix sums of weights along the branching order.
    remaining: Vec<i64>,
    pair_by_member: HashMap<CameraRef, Vec<usize>>,
    tern_by_member: HashMap<CameraRef, Vec<usize>>,
    assigned: BTreeSet<CameraRef>,
    best_value: i64,
    best: Schedule,
    deadline: Instant,
    timed_out: bool,
    nodes: u64,
}

impl<'a> Search<'a> {
    fn conflicts(&self, c: CameraRef) -> bool {
        if let Some(ps) = self.pair_by_member.get(&c) {
            for &pi in ps {
                let p = &self.inst.pairs[pi];
                let other = if p.a == c { p.b } else { p.a };
                if self.assigned.contains(&other) {
                    return true;
                }
            }
        }
        if let Some(ts) = self.tern_by_member.get(&c) {
            for &ti in ts {
                let t = &self.inst.ternaries[ti];
                if t.members
                    .iter()
                    .filter(|m| **m != c)
                    .all(|m| self.assigned.contains(m))
                {
                    return true;
                }
            }
        }
        false
    }

    fn dfs(&mut self, depth: usize, value: i64) {
        self.nodes += 1;
        if self.nodes.is_multiple_of(4096) && Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        if self.timed_out {
            return;
        }
        if depth == self.order.len() {
            if value > self.best_value {
                self.best_value = value;
                self.best = Schedule {
                    assignments: self.assigned.clone(),
                };
            }
            return;
        }
        // Remaining-weight bound.
        if value + self.remaining[depth] <= self.best_value {
            return;
        }
        let r = self.inst.requests[self.order[depth]];
        let cameras: &[u8] = match r.kind {
            crate::instance::Kind::Mono => &[1, 2, 3],
            crate::instance::Kind::Stereo => &[4],
        };
        for &cam in cameras {
            let c = CameraRef::new(r.id, cam);
            if !self.conflicts(c) {
                self.assigned.insert(c);
                self.dfs(depth + 1, value + r.weight);
                self.assigned.remove(&c);
            }
        }
        // Leaving the request untaken is always allowed.
        self.dfs(depth + 1, value);
    }
}

/// Exact maximization by depth-first branch and bound. Deterministic:
/// requests are branched by descending weight (ties by id), cameras in
/// ascending order, and only strict improvements replace the incumbent.
///
/// Requests owning a valid camera that no constraint mentions are
/// preassigned to the smallest such camera: taking them there can never
/// conflict with anything, so it dominates skipping. Only fully
/// constrained requests enter the search tree.
pub fn solve_exact(inst: &Instance, limits: SolveLimits) -> Result<SolveOutcome, ClassicalError> {
    if inst.requests.len() > limits.max_requests {
        return Err(ClassicalError::InstanceTooLarge {
            got: inst.requests.len(),
            limit: limits.max_requests,
        });
    }

    let mentioned: BTreeSet<CameraRef> = inst
        .pairs
        .iter()
        .flat_map(|p| [p.a, p.b])
        .chain(inst.ternaries.iter().flat_map(|t| t.members))
        .collect();

    let mut preassigned = BTreeSet::new();
    let mut base_value = 0i64;
    let mut hard = Vec::new();
    for (i, r) in inst.requests.iter().enumerate() {
        let cameras: &[u8] = match r.kind {
            crate::instance::Kind::Mono => &[1, 2, 3],
            crate::instance::Kind::Stereo => &[4],
        };
        let free = cameras
            .iter()
            .find(|&&cam| !mentioned.contains(&CameraRef::new(r.id, cam)));
        match free {
            Some(&cam) => {
                preassigned.insert(CameraRef::new(r.id, cam));
                base_value += r.weight;
            }
            None => hard.push(i),
        }
    }

    let mut order = hard;
    order.sort_by_key(|&i| (-inst.requests[i].weight, inst.requests[i].id));
    let mut remaining = vec![0i64; order.len() + 1];
    for d in (0..order.len()).rev() {
        remaining[d] = remaining[d + 1] + inst.requests[order[d]].weight;
    }

    let mut pair_by_member: HashMap<CameraRef, Vec<usize>> = HashMap::new();
    for (i, p) in inst.pairs.iter().enumerate() {
        pair_by_member.entry(p.a).or_default().push(i);
        pair_by_member.entry(p.b).or_default().push(i);
    }
    let mut tern_by_member: HashMap<CameraRef, Vec<usize>> = HashMap::new();
    for (i, t) in inst.ternaries.iter().enumerate() {
        for m in t.members {
            tern_by_member.entry(m).or_default().push(i);
        }
    }

    // Preassigned cameras are never constraint members, so seeding them
    // into the search state cannot trigger a conflict.
    let mut search = Search {
        inst,
        order,
        remaining,
        pair_by_member,
        tern_by_member,
        assigned: preassigned.clone(),
        best_value: base_value,
        best: Schedule {
            assignments: preassigned,
        },
        deadline: Instant::now() + limits.time_budget,
        timed_out: false,
        nodes: 0,
    };
    search.dfs(0, base_value);

    Ok(SolveOutcome {
        schedule: search.best,
        value: search.best_value,
        proven_optimal: !search.timed_out,
    })
}
