//! Regenerates the bundled synthetic instance corpus: one 60-request
//! master instance plus the six reduced instances (15..40 requests) used
//! by the benchmark suite.
//!
//! Usage: cargo run --example gen_corpus [out_dir]   (default: instances/)

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use siasp::instance::{
    reduce_instance, serialize_instance, CameraRef, ImageRequest, Instance, Kind, PairConstraint,
    TernaryConstraint,
};

const MASTER_SEED: u64 = 20230515;
const REDUCTION_SEED: u64 = 7;

fn random_ref(rng: &mut ChaCha8Rng, requests: &[ImageRequest]) -> CameraRef {
    let r = requests[rng.gen_range(0..requests.len())];
    let camera = match r.kind {
        Kind::Mono => rng.gen_range(1..=3),
        Kind::Stereo => 4,
    };
    CameraRef::new(r.id, camera)
}

pub fn master_instance() -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let requests: Vec<ImageRequest> = (0..60)
        .map(|id| ImageRequest {
            id,
            weight: rng.gen_range(1..=10),
            kind: if rng.gen_bool(0.35) {
                Kind::Stereo
            } else {
                Kind::Mono
            },
        })
        .collect();

    let mut pairs = Vec::new();
    while pairs.len() < 120 {
        let a = random_ref(&mut rng, &requests);
        let b = random_ref(&mut rng, &requests);
        if a.request != b.request {
            pairs.push(PairConstraint::new(a, b));
        }
    }
    let mut ternaries = Vec::new();
    while ternaries.len() < 30 {
        let a = random_ref(&mut rng, &requests);
        let b = random_ref(&mut rng, &requests);
        let c = random_ref(&mut rng, &requests);
        let distinct =
            a.request != b.request && b.request != c.request && a.request != c.request;
        if distinct {
            ternaries.push(TernaryConstraint::new(a, b, c));
        }
    }

    Instance::new("master", requests, pairs, ternaries).0
}

fn main() {
    let out_dir = std::env::args().nth(1).unwrap_or_else(|| "instances".into());
    std::fs::create_dir_all(&out_dir).expect("create output directory");

    let master = master_instance();
    let write = |name: &str, inst: &Instance| {
        let path = format!("{out_dir}/{name}.json");
        std::fs::write(&path, serialize_instance(inst)).expect("write instance");
        println!("wrote {path}");
    };
    write("master", &master);

    for target in [15usize, 20, 25, 30, 35, 40] {
        let mut reduced = reduce_instance(&master, target, REDUCTION_SEED).unwrap();
        reduced.name = format!("s{target}");
        write(&format!("s{target}"), &reduced);
    }
}
