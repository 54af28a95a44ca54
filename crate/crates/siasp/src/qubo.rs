//! Compilation of an [`Instance`] into QUBO form under the `4cam` and
//! `3cam` encodings.
//!
//! `4cam` allocates four decision variables per request (one per camera,
//! camera 4 being the stereo mode) and lowers each ternary constraint with
//! two binary-expansion slack bits. `3cam` allocates three variables per
//! mono request and a single variable per stereo request, and lowers each
//! ternary constraint as a cubic monomial quadratized with a shared slack
//! variable (one per distinct replaced pair).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::classical::{max_objective, Schedule};
use crate::instance::{CameraRef, Instance, Kind};
use crate::{Coeff, QuboForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Encoding {
    FourCam,
    ThreeCam,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Encoding::FourCam => write!(f, "4cam"),
            Encoding::ThreeCam => write!(f, "3cam"),
        }
    }
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "4cam" => Ok(Encoding::FourCam),
            "3cam" => Ok(Encoding::ThreeCam),
            other => Err(format!("unknown encoding '{other}', expected 4cam or 3cam")),
        }
    }
}

/// Semantic meaning of one QUBO variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariableMeaning {
    /// x_{request,camera}; under `3cam` only mono cameras 1-3 appear here.
    Decision { request: u32, camera: u8 },
    /// Single `3cam` variable of a stereo request (implies camera 4).
    StereoDecision { request: u32 },
    /// Binary-expansion slack bit (`4cam`), bit 0 weighs 1, bit 1 weighs 2.
    TernarySlackBit { constraint: usize, bit: u8 },
    /// Shared Boros slack (`3cam`) standing for the product of the pair.
    PairSlack { pair: (CameraRef, CameraRef) },
}

impl fmt::Display for VariableMeaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariableMeaning::Decision { request, camera } => write!(f, "x[{request},{camera}]"),
            VariableMeaning::StereoDecision { request } => write!(f, "x[{request}]"),
            VariableMeaning::TernarySlackBit { constraint, bit } => {
                write!(f, "s{}[t{constraint}]", bit + 1)
            }
            VariableMeaning::PairSlack { pair } => write!(f, "s[{}{}]", pair.0, pair.1),
        }
    }
}

/// How one ternary constraint (by index into the canonical list) was
/// lowered to quadratic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TernaryLowering {
    /// `4cam`: (x_p + x_q + x_r - 2 + s1 + 2 s2)^2.
    BinaryExpansion { s1: usize, s2: usize },
    /// `3cam`: P x_kept s + P (x_q x_r - 2 x_q s - 2 x_r s + 3 s) with the
    /// slack shared across every constraint replacing the same pair.
    Boros {
        kept: CameraRef,
        replaced: (CameraRef, CameraRef),
        slack: usize,
    },
    /// Fewer than three live members: the at-most-2 bound cannot bind.
    Dropped,
}

/// Bijection between QUBO variable indices and their meanings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableMap {
    pub encoding: Encoding,
    vars: Vec<VariableMeaning>,
    index: HashMap<VariableMeaning, usize>,
    /// Parallel to the instance's canonical ternary list.
    pub ternary_lowerings: Vec<TernaryLowering>,
    n_decisions: usize,
}

impl VariableMap {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn meanings(&self) -> &[VariableMeaning] {
        &self.vars
    }

    pub fn meaning(&self, i: usize) -> VariableMeaning {
        self.vars[i]
    }

    pub fn index_of(&self, m: &VariableMeaning) -> Option<usize> {
        self.index.get(m).copied()
    }

    /// Number of decision (non-slack) variables.
    pub fn n_decisions(&self) -> usize {
        self.n_decisions
    }

    pub fn n_slacks(&self) -> usize {
        self.vars.len() - self.n_decisions
    }
}

/// True iff the member maps to a `3cam` variable. Members pairing a mono
/// request with camera 4 (or stereo with 1-3) have no variable and are
/// constant 0.
fn threecam_live(inst: &Instance, m: CameraRef) -> bool {
    inst.request(m.request)
        .map(|r| m.is_valid_for(r.kind))
        .unwrap_or(false)
}

/// Maps a constraint member to its variable meaning, or `None` when the
/// member is dead under the encoding.
pub fn meaning_of(inst: &Instance, m: CameraRef, enc: Encoding) -> Option<VariableMeaning> {
    match enc {
        Encoding::FourCam => Some(VariableMeaning::Decision {
            request: m.request,
            camera: m.camera,
        }),
        Encoding::ThreeCam => {
            let r = inst.request(m.request)?;
            match (r.kind, m.camera) {
                (Kind::Mono, 1..=3) => Some(VariableMeaning::Decision {
                    request: m.request,
                    camera: m.camera,
                }),
                (Kind::Stereo, 4) => Some(VariableMeaning::StereoDecision { request: m.request }),
                _ => None,
            }
        }
    }
}

/// Global penalty weight: one plus the unconstrained maximum of the
/// objective, so any single broken constraint outweighs all value.
pub fn penalty_coefficient(inst: &Instance) -> Coeff {
    1 + max_objective(inst)
}

pub fn build_variable_map(inst: &Instance, enc: Encoding) -> VariableMap {
    let mut vars = Vec::new();

    match enc {
        Encoding::FourCam => {
            for r in &inst.requests {
                for camera in 1..=4 {
                    vars.push(VariableMeaning::Decision {
                        request: r.id,
                        camera,
                    });
                }
            }
        }
        Encoding::ThreeCam => {
            for r in &inst.requests {
                match r.kind {
                    Kind::Mono => {
                        for camera in 1..=3 {
                            vars.push(VariableMeaning::Decision {
                                request: r.id,
                                camera,
                            });
                        }
                    }
                    Kind::Stereo => vars.push(VariableMeaning::StereoDecision { request: r.id }),
                }
            }
        }
    }
    let n_decisions = vars.len();

    let mut ternary_lowerings = Vec::with_capacity(inst.ternaries.len());
    match enc {
        Encoding::FourCam => {
            for ci in 0..inst.ternaries.len() {
                let s1 = vars.len();
                vars.push(VariableMeaning::TernarySlackBit {
                    constraint: ci,
                    bit: 0,
                });
                let s2 = vars.len();
                vars.push(VariableMeaning::TernarySlackBit {
                    constraint: ci,
                    bit: 1,
                });
                ternary_lowerings.push(TernaryLowering::BinaryExpansion { s1, s2 });
            }
        }
        Encoding::ThreeCam => {
            ternary_lowerings = plan_boros(inst);
            // One slack per distinct replaced pair, appended in canonical
            // pair order.
            let chosen: BTreeSet<(CameraRef, CameraRef)> = ternary_lowerings
                .iter()
                .filter_map(|l| match l {
                    TernaryLowering::Boros { replaced, .. } => Some(*replaced),
                    _ => None,
                })
                .collect();
            let mut slack_index = BTreeMap::new();
            for pair in chosen {
                slack_index.insert(pair, vars.len());
                vars.push(VariableMeaning::PairSlack { pair });
            }
            for l in &mut ternary_lowerings {
                if let TernaryLowering::Boros { replaced, slack, .. } = l {
                    *slack = slack_index[replaced];
                }
            }
        }
    }

    let index = vars.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    VariableMap {
        encoding: enc,
        vars,
        index,
        ternary_lowerings,
        n_decisions,
    }
}

/// Chooses which member pair each fully-live ternary constraint replaces.
/// Greedy sharing: repeatedly pick the pair occurring in the most not-yet
/// assigned constraints (ties broken by canonical pair order) and assign
/// it to all of them. Slack indices are filled in later.
fn plan_boros(inst: &Instance) -> Vec<TernaryLowering> {
    let mut lowerings = vec![TernaryLowering::Dropped; inst.ternaries.len()];
    let mut unassigned: Vec<usize> = Vec::new();
    for (ci, t) in inst.ternaries.iter().enumerate() {
        if t.members.iter().all(|m| threecam_live(inst, *m)) {
            unassigned.push(ci);
        }
    }

    while !unassigned.is_empty() {
        let mut counts: BTreeMap<(CameraRef, CameraRef), usize> = BTreeMap::new();
        for &ci in &unassigned {
            let m = inst.ternaries[ci].members;
            for pair in [(m[0], m[1]), (m[0], m[2]), (m[1], m[2])] {
                *counts.entry(pair).or_insert(0) += 1;
            }
        }
        // Max count; BTreeMap iteration gives lexicographically smallest on ties.
        let (&best_pair, _) = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .expect("nonempty candidate set");

        unassigned.retain(|&ci| {
            let m = inst.ternaries[ci].members;
            let contains = [(m[0], m[1]), (m[0], m[2]), (m[1], m[2])]
                .into_iter()
                .any(|p| p == best_pair);
            if contains {
                let kept = *m
                    .iter()
                    .find(|x| **x != best_pair.0 && **x != best_pair.1)
                    .expect("third member");
                lowerings[ci] = TernaryLowering::Boros {
                    kept,
                    replaced: best_pair,
                    slack: usize::MAX, // filled by build_variable_map
                };
                false
            } else {
                true
            }
        });
    }
    lowerings
}

/// A compiled QUBO: the quadratic form, its penalty weight and the
/// variable map that gives indices their meaning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuboModel {
    pub form: QuboForm,
    pub penalty: Coeff,
    pub var_map: VariableMap,
}

impl QuboModel {
    pub fn n(&self) -> usize {
        self.form.n()
    }

    pub fn energy(&self, bits: &[bool]) -> Coeff {
        self.form.energy(bits)
    }
}

/// Compiles an instance under the chosen encoding. The resulting energy is
/// -sum of taken weights plus `penalty` times the nonnegative constraint
/// residual, so with the default penalty every global minimizer decodes to
/// an optimal feasible schedule.
pub fn encode(inst: &Instance, enc: Encoding) -> QuboModel {
    let var_map = build_variable_map(inst, enc);
    let p = penalty_coefficient(inst);
    let mut form = QuboForm::new(var_map.len());

    // Objective: -w on every decision variable of the request.
    for (i, m) in var_map.meanings().iter().enumerate().take(var_map.n_decisions()) {
        let request = match m {
            VariableMeaning::Decision { request, .. } => *request,
            VariableMeaning::StereoDecision { request } => *request,
            _ => unreachable!("slacks come after decisions"),
        };
        let w = inst.request(request).expect("request exists").weight;
        form.add_diag(i, -w);
    }

    // Take-at-most-once: P x x' over every pair of a request's decision
    // variables (no slack needed for an at-most-one bound).
    let mut by_request: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, m) in var_map.meanings().iter().enumerate().take(var_map.n_decisions()) {
        let request = match m {
            VariableMeaning::Decision { request, .. } => *request,
            VariableMeaning::StereoDecision { request } => *request,
            _ => unreachable!(),
        };
        by_request.entry(request).or_default().push(i);
    }
    for vars in by_request.values() {
        for (a, &i) in vars.iter().enumerate() {
            for &j in &vars[a + 1..] {
                form.add_offdiag(i, j, p);
            }
        }
    }

    // Forbidden camera modes (4cam only): +P on mono camera 4 and on
    // stereo cameras 1-3. Under 3cam those variables do not exist.
    if enc == Encoding::FourCam {
        for r in &inst.requests {
            let forbidden: &[u8] = match r.kind {
                Kind::Mono => &[4],
                Kind::Stereo => &[1, 2, 3],
            };
            for &camera in forbidden {
                let i = var_map
                    .index_of(&VariableMeaning::Decision {
                        request: r.id,
                        camera,
                    })
                    .expect("4cam decision");
                form.add_diag(i, p);
            }
        }
    }

    // Pair incompatibilities: P x_a x_b when both members are live.
    for pc in &inst.pairs {
        let (a, b) = (
            meaning_of(inst, pc.a, enc).and_then(|m| var_map.index_of(&m)),
            meaning_of(inst, pc.b, enc).and_then(|m| var_map.index_of(&m)),
        );
        if let (Some(a), Some(b)) = (a, b) {
            if a != b {
                form.add_offdiag(a, b, p);
            }
        }
    }

    // Ternary constraints.
    for (ci, t) in inst.ternaries.iter().enumerate() {
        match var_map.ternary_lowerings[ci] {
            TernaryLowering::BinaryExpansion { s1, s2 } => {
                // P (x_p + x_q + x_r - 2 + s1 + 2 s2)^2 with y^2 = y.
                let idx = |m: CameraRef| {
                    meaning_of(inst, m, enc)
                        .and_then(|mm| var_map.index_of(&mm))
                        .expect("4cam member variable")
                };
                let terms: Vec<(usize, Coeff)> = vec![
                    (idx(t.members[0]), 1),
                    (idx(t.members[1]), 1),
                    (idx(t.members[2]), 1),
                    (s1, 1),
                    (s2, 2),
                ];
                let c: Coeff = -2;
                for &(i, a) in &terms {
                    form.add_diag(i, p * a * (a + 2 * c));
                }
                for (k, &(i, a)) in terms.iter().enumerate() {
                    for &(j, b) in &terms[k + 1..] {
                        form.add_offdiag(i, j, 2 * p * a * b);
                    }
                }
                form.add_offset(p * c * c);
            }
            TernaryLowering::Boros {
                kept,
                replaced,
                slack,
            } => {
                let idx = |m: CameraRef| {
                    meaning_of(inst, m, enc)
                        .and_then(|mm| var_map.index_of(&mm))
                        .expect("live 3cam member")
                };
                let (pk, q, r) = (idx(kept), idx(replaced.0), idx(replaced.1));
                form.add_offdiag(pk, slack, p);
                form.add_offdiag(q, r, p);
                form.add_offdiag(q, slack, -2 * p);
                form.add_offdiag(r, slack, -2 * p);
                form.add_diag(slack, 3 * p);
            }
            TernaryLowering::Dropped => {}
        }
    }

    form.prune();
    QuboModel {
        form,
        penalty: p,
        var_map,
    }
}

/// Nonzero (linear, quadratic) term counts of the model; the constant
/// offset is not a term.
pub fn term_counts(model: &QuboModel) -> (usize, usize) {
    model.form.term_counts()
}

/// A decoded sample: the camera assignments implied by the set decision
/// bits (possibly violating feasibility) plus the number of set slacks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub assignments: Vec<CameraRef>,
    pub slack_ones: usize,
}

impl Decoded {
    pub fn schedule(&self) -> Schedule {
        Schedule::from_assignments(self.assignments.iter().copied())
    }
}

pub fn decode(map: &VariableMap, bits: &[bool]) -> Decoded {
    assert_eq!(bits.len(), map.len(), "bitstring length mismatch");
    let mut assignments = Vec::new();
    let mut slack_ones = 0;
    for (i, &set) in bits.iter().enumerate() {
        if !set {
            continue;
        }
        match map.meaning(i) {
            VariableMeaning::Decision { request, camera } => {
                assignments.push(CameraRef::new(request, camera));
            }
            VariableMeaning::StereoDecision { request } => {
                assignments.push(CameraRef::new(request, 4));
            }
            VariableMeaning::TernarySlackBit { .. } | VariableMeaning::PairSlack { .. } => {
                slack_ones += 1;
            }
        }
    }
    Decoded {
        assignments,
        slack_ones,
    }
}

#[derive(Debug, Error)]
pub enum QuboIoError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing problem line")]
    MissingHeader,
}

/// Sparse upper-triangular text export. Deterministic: diagonal lines in
/// ascending index order, then off-diagonal lines in lexicographic order.
pub fn export_qubo(model: &QuboModel) -> String {
    let (n_diag, n_offdiag) = model.form.term_counts();
    let mut out = String::new();
    out.push_str("c siasp-qubo v1\n");
    out.push_str(&format!("c offset {}\n", model.form.offset()));
    out.push_str(&format!(
        "p qubo {} {} {} {}\n",
        model.n(),
        n_diag,
        n_offdiag,
        model.penalty
    ));
    for (&i, &c) in model.form.diag() {
        out.push_str(&format!("{i} {i} {c}\n"));
    }
    for (&(i, j), &c) in model.form.offdiag() {
        out.push_str(&format!("{i} {j} {c}\n"));
    }
    out
}

/// Coefficients read back from the text export. The variable map is not
/// part of the wire format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportedQubo {
    pub form: QuboForm,
    pub penalty: Coeff,
}

pub fn import_qubo(text: &str) -> Result<ImportedQubo, QuboIoError> {
    let mut offset: Coeff = 0;
    let mut header: Option<(usize, usize, usize, Coeff)> = None;
    let mut entries: Vec<(usize, usize, Coeff)> = Vec::new();

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        if let Some(rest) = l.strip_prefix("c ") {
            if let Some(v) = rest.strip_prefix("offset ") {
                offset = v.trim().parse().map_err(|_| QuboIoError::Malformed {
                    line,
                    message: format!("bad offset '{v}'"),
                })?;
            }
            continue;
        }
        if l == "c" {
            continue;
        }
        if let Some(rest) = l.strip_prefix("p qubo ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(QuboIoError::Malformed {
                    line,
                    message: "problem line needs 4 fields".into(),
                });
            }
            let parse =
                |s: &str| -> Result<i64, QuboIoError> {
                    s.parse().map_err(|_| QuboIoError::Malformed {
                        line,
                        message: format!("bad number '{s}'"),
                    })
                };
            header = Some((
                parse(parts[0])? as usize,
                parse(parts[1])? as usize,
                parse(parts[2])? as usize,
                parse(parts[3])?,
            ));
            continue;
        }
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(QuboIoError::Malformed {
                line,
                message: "coefficient line needs 3 fields".into(),
            });
        }
        let i: usize = parts[0].parse().map_err(|_| QuboIoError::Malformed {
            line,
            message: format!("bad index '{}'", parts[0]),
        })?;
        let j: usize = parts[1].parse().map_err(|_| QuboIoError::Malformed {
            line,
            message: format!("bad index '{}'", parts[1]),
        })?;
        let c: Coeff = parts[2].parse().map_err(|_| QuboIoError::Malformed {
            line,
            message: format!("bad coefficient '{}'", parts[2]),
        })?;
        entries.push((i, j, c));
    }

    let (n, n_diag, n_offdiag, penalty) = header.ok_or(QuboIoError::MissingHeader)?;
    let mut form = QuboForm::new(n);
    form.add_offset(offset);
    let mut diag_seen = 0;
    let mut offdiag_seen = 0;
    for (i, j, c) in entries {
        if i == j {
            form.add_diag(i, c);
            diag_seen += 1;
        } else {
            form.add_offdiag(i, j, c);
            offdiag_seen += 1;
        }
    }
    if diag_seen != n_diag || offdiag_seen != n_offdiag {
        return Err(QuboIoError::Malformed {
            line: 0,
            message: format!(
                "header promises {n_diag}+{n_offdiag} terms, found {diag_seen}+{offdiag_seen}"
            ),
        });
    }
    form.prune();
    Ok(ImportedQubo { form, penalty })
}

/// DOT rendering of the coefficient matrix as an undirected graph: one
/// node per variable (labeled with its meaning), one edge per nonzero
/// off-diagonal term. Self-loops (the diagonal) are omitted.
pub fn export_graph(model: &QuboModel) -> String {
    let mut out = String::new();
    out.push_str("graph qubo {\n");
    for (i, m) in model.var_map.meanings().iter().enumerate() {
        out.push_str(&format!("  {i} [label=\"{m}\"];\n"));
    }
    for &(i, j) in model.form.offdiag().keys() {
        out.push_str(&format!("  {i} -- {j};\n"));
    }
    out.push_str("}\n");
    out
}
