//! Problem data model: image requests, incompatibility constraints, the
//! canonical JSON instance format, validation and the instance reductor.

use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Whether a request is a mono photo (cameras 1-3) or a stereo photo
/// (cameras 1 and 3 jointly, modeled as virtual camera 4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Mono,
    Stereo,
}

/// One image acquisition request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRequest {
    pub id: u32,
    /// Value of acquiring the image; always >= 1.
    pub weight: i64,
    pub kind: Kind,
}

/// A (request, camera) pair. Camera 4 denotes the stereo mode.
///
/// Serialized as a two-element array `[request_id, camera]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(u32, u8)", into = "(u32, u8)")]
pub struct CameraRef {
    pub request: u32,
    pub camera: u8,
}

impl CameraRef {
    pub fn new(request: u32, camera: u8) -> Self {
        assert!((1..=4).contains(&camera), "camera must be in 1..=4");
        CameraRef { request, camera }
    }

    /// True iff the camera choice is compatible with the request kind:
    /// mono photos use cameras 1-3, stereo photos use camera 4 only.
    pub fn is_valid_for(&self, kind: Kind) -> bool {
        match kind {
            Kind::Mono => (1..=3).contains(&self.camera),
            Kind::Stereo => self.camera == 4,
        }
    }
}

impl TryFrom<(u32, u8)> for CameraRef {
    type Error = String;

    fn try_from((request, camera): (u32, u8)) -> Result<Self, String> {
        if !(1..=4).contains(&camera) {
            return Err(format!(
                "camera {camera} for request {request} is out of range 1..=4"
            ));
        }
        Ok(CameraRef { request, camera })
    }
}

impl From<CameraRef> for (u32, u8) {
    fn from(c: CameraRef) -> Self {
        (c.request, c.camera)
    }
}

impl fmt::Display for CameraRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.request, self.camera)
    }
}

/// At-most-one-of-two incompatibility. Members are kept in canonical
/// (request, camera) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(CameraRef, CameraRef)", into = "(CameraRef, CameraRef)")]
pub struct PairConstraint {
    pub a: CameraRef,
    pub b: CameraRef,
}

impl PairConstraint {
    pub fn new(x: CameraRef, y: CameraRef) -> Self {
        if x <= y {
            PairConstraint { a: x, b: y }
        } else {
            PairConstraint { a: y, b: x }
        }
    }
}

impl From<(CameraRef, CameraRef)> for PairConstraint {
    fn from((x, y): (CameraRef, CameraRef)) -> Self {
        PairConstraint::new(x, y)
    }
}

impl From<PairConstraint> for (CameraRef, CameraRef) {
    fn from(p: PairConstraint) -> Self {
        (p.a, p.b)
    }
}

impl fmt::Display for PairConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pair[{} {}]", self.a, self.b)
    }
}

/// At-most-two-of-three incompatibility arising from data-flow limits.
/// Members are kept sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(CameraRef, CameraRef, CameraRef)", into = "(CameraRef, CameraRef, CameraRef)")]
pub struct TernaryConstraint {
    pub members: [CameraRef; 3],
}

impl TernaryConstraint {
    pub fn new(x: CameraRef, y: CameraRef, z: CameraRef) -> Self {
        let mut members = [x, y, z];
        members.sort();
        TernaryConstraint { members }
    }
}

impl From<(CameraRef, CameraRef, CameraRef)> for TernaryConstraint {
    fn from((x, y, z): (CameraRef, CameraRef, CameraRef)) -> Self {
        TernaryConstraint::new(x, y, z)
    }
}

impl From<TernaryConstraint> for (CameraRef, CameraRef, CameraRef) {
    fn from(t: TernaryConstraint) -> Self {
        (t.members[0], t.members[1], t.members[2])
    }
}

impl fmt::Display for TernaryConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ternary[{} {} {}]",
            self.members[0], self.members[1], self.members[2]
        )
    }
}

/// A scheduling problem: requests plus pair and ternary incompatibilities.
///
/// The canonical form keeps requests sorted by id and constraints sorted by
/// their (already canonically ordered) member tuples, with duplicates
/// removed. [`Instance::new`] and [`parse_instance`] always canonicalize.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub name: String,
    pub requests: Vec<ImageRequest>,
    pub pairs: Vec<PairConstraint>,
    pub ternaries: Vec<TernaryConstraint>,
}

/// Structural statistics of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceStats {
    pub n_requests: usize,
    pub n_stereo: usize,
    /// Pairs plus ternaries.
    pub n_constraints: usize,
    pub n_ternary: usize,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("syntax error: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("duplicate request id {0}")]
    DuplicateId(u32),
    #[error("request {id} has weight {weight}, expected >= 1")]
    WeightOutOfRange { id: u32, weight: i64 },
    #[error("constraint member {0} references an unknown request")]
    DanglingReference(CameraRef),
    #[error("reduction target {target} out of range 1..={available}")]
    TargetOutOfRange { target: usize, available: usize },
}

/// A consistency problem found by [`validate`]. Violations are data, not
/// errors: an `Instance` value can hold them, downstream code decides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateRequestId(u32),
    NonPositiveWeight { id: u32, weight: i64 },
    DanglingReference(CameraRef),
    /// Pair constraint whose two members are identical.
    DegeneratePair(PairConstraint),
    /// Ternary constraint with fewer than three distinct members.
    DegenerateTernary(TernaryConstraint),
    DuplicatePair(PairConstraint),
    DuplicateTernary(TernaryConstraint),
    /// Advisory: a member that can never be active (mono request referenced
    /// with camera 4, or stereo with cameras 1-3). Encoders treat such
    /// members as constant 0.
    InvalidCameraRef(CameraRef),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateRequestId(id) => write!(f, "duplicate request id {id}"),
            Violation::NonPositiveWeight { id, weight } => {
                write!(f, "request {id} has non-positive weight {weight}")
            }
            Violation::DanglingReference(c) => {
                write!(f, "member {c} references an unknown request")
            }
            Violation::DegeneratePair(p) => write!(f, "{p} has identical members"),
            Violation::DegenerateTernary(t) => write!(f, "{t} has repeated members"),
            Violation::DuplicatePair(p) => write!(f, "duplicate {p}"),
            Violation::DuplicateTernary(t) => write!(f, "duplicate {t}"),
            Violation::InvalidCameraRef(c) => {
                write!(f, "advisory: member {c} can never be active for its request kind")
            }
        }
    }
}

impl Instance {
    /// Builds a canonicalized instance. Returns the instance together with
    /// the number of duplicate constraints removed.
    pub fn new(
        name: impl Into<String>,
        requests: Vec<ImageRequest>,
        pairs: Vec<PairConstraint>,
        ternaries: Vec<TernaryConstraint>,
    ) -> (Self, usize) {
        let mut inst = Instance {
            name: name.into(),
            requests,
            pairs,
            ternaries,
        };
        let removed = inst.canonicalize();
        (inst, removed)
    }

    /// Sorts requests by id and constraints by member tuples, removing
    /// duplicate constraints. Returns the number of duplicates removed.
    pub fn canonicalize(&mut self) -> usize {
        self.requests.sort_by_key(|r| r.id);
        let before = self.pairs.len() + self.ternaries.len();
        self.pairs.sort();
        self.pairs.dedup();
        self.ternaries.sort();
        self.ternaries.dedup();
        before - self.pairs.len() - self.ternaries.len()
    }

    /// Looks up a request by id. Requests are kept sorted by id.
    pub fn request(&self, id: u32) -> Option<&ImageRequest> {
        self.requests
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.requests[i])
    }

    pub fn n_requests(&self) -> usize {
        self.requests.len()
    }

    fn constraint_members(&self) -> impl Iterator<Item = CameraRef> + '_ {
        self.pairs
            .iter()
            .flat_map(|p| [p.a, p.b])
            .chain(self.ternaries.iter().flat_map(|t| t.members))
    }
}

/// Parses the canonical JSON instance format (strict: unknown keys are an
/// error), checks semantic consistency and canonicalizes.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    parse_instance_with_report(text).map(|(inst, _)| inst)
}

/// Like [`parse_instance`] but also reports how many duplicate constraints
/// were dropped during canonicalization.
pub fn parse_instance_with_report(text: &str) -> Result<(Instance, usize), InstanceError> {
    let mut inst: Instance = serde_json::from_str(text)?;
    let removed = inst.canonicalize();

    let mut seen = BTreeSet::new();
    for r in &inst.requests {
        if !seen.insert(r.id) {
            return Err(InstanceError::DuplicateId(r.id));
        }
        if r.weight < 1 {
            return Err(InstanceError::WeightOutOfRange {
                id: r.id,
                weight: r.weight,
            });
        }
    }
    for m in inst.constraint_members() {
        if inst.request(m.request).is_none() {
            return Err(InstanceError::DanglingReference(m));
        }
    }
    Ok((inst, removed))
}

/// Serializes an instance to its canonical document. Output is
/// deterministic: same instance, byte-identical text.
pub fn serialize_instance(inst: &Instance) -> String {
    let mut canon = inst.clone();
    canon.canonicalize();
    let mut out = serde_json::to_string_pretty(&canon).expect("instance serialization");
    out.push('\n');
    out
}

/// Reports every invariant violation in the instance. Empty result means
/// the instance is fully consistent (advisories included).
pub fn validate(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut ids = BTreeSet::new();
    for r in &inst.requests {
        if !ids.insert(r.id) {
            out.push(Violation::DuplicateRequestId(r.id));
        }
        if r.weight < 1 {
            out.push(Violation::NonPositiveWeight {
                id: r.id,
                weight: r.weight,
            });
        }
    }

    for m in inst.constraint_members() {
        match inst.request(m.request) {
            None => out.push(Violation::DanglingReference(m)),
            Some(r) => {
                if !m.is_valid_for(r.kind) {
                    out.push(Violation::InvalidCameraRef(m));
                }
            }
        }
    }

    let mut seen_pairs = BTreeSet::new();
    for p in &inst.pairs {
        if p.a == p.b {
            out.push(Violation::DegeneratePair(*p));
        }
        if !seen_pairs.insert(*p) {
            out.push(Violation::DuplicatePair(*p));
        }
    }
    let mut seen_terns = BTreeSet::new();
    for t in &inst.ternaries {
        let distinct: BTreeSet<_> = t.members.iter().collect();
        if distinct.len() < 3 {
            out.push(Violation::DegenerateTernary(*t));
        }
        if !seen_terns.insert(*t) {
            out.push(Violation::DuplicateTernary(*t));
        }
    }
    out
}

pub fn instance_stats(inst: &Instance) -> InstanceStats {
    let n_stereo = inst
        .requests
        .iter()
        .filter(|r| r.kind == Kind::Stereo)
        .count();
    InstanceStats {
        n_requests: inst.requests.len(),
        n_stereo,
        n_constraints: inst.pairs.len() + inst.ternaries.len(),
        n_ternary: inst.ternaries.len(),
    }
}

/// Produces a smaller instance by sampling `target_requests` requests
/// uniformly at random (without replacement) under `seed`, keeping exactly
/// the constraints whose members all survive.
pub fn reduce_instance(
    inst: &Instance,
    target_requests: usize,
    seed: u64,
) -> Result<Instance, InstanceError> {
    let n = inst.requests.len();
    if target_requests < 1 || target_requests > n {
        return Err(InstanceError::TargetOutOfRange {
            target: target_requests,
            available: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, n, target_requests);
    let keep: BTreeSet<u32> = picked.iter().map(|i| inst.requests[i].id).collect();

    let requests = inst
        .requests
        .iter()
        .filter(|r| keep.contains(&r.id))
        .copied()
        .collect();
    let pairs = inst
        .pairs
        .iter()
        .filter(|p| keep.contains(&p.a.request) && keep.contains(&p.b.request))
        .copied()
        .collect();
    let ternaries = inst
        .ternaries
        .iter()
        .filter(|t| t.members.iter().all(|m| keep.contains(&m.request)))
        .copied()
        .collect();

    let (reduced, _) = Instance::new(
        format!("{}-r{}", inst.name, target_requests),
        requests,
        pairs,
        ternaries,
    );
    Ok(reduced)
}
