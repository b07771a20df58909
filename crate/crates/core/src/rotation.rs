//! Homotopical rotation vectors of orbit segments and empirical rotation sets.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::flow::{random_phase_point, simulate, word_of, FlowError, OrbitRecord};
use crate::freegroup::{EndPrefix, Letter, RotationVector};

pub const DEFAULT_PREFIX_LEN: usize = 64;

/// Where a sample came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Seed(u64),
    Word(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationSample {
    pub vector: RotationVector,
    pub duration: f64,
    pub word_length: usize,
    pub crossings: [u64; 3],
    pub provenance: Provenance,
}

/// Speed |g_T|/T and the first `prefix_len` letters of g_T as direction.
pub fn rotation_vector(record: &OrbitRecord, prefix_len: usize, provenance: Provenance) -> RotationSample {
    let duration = record.duration();
    assert!(duration > 0.0, "rotation vector needs a positive duration");
    let word = word_of(record);
    let speed = word.len() as f64 / duration;
    RotationSample {
        vector: RotationVector::new(speed, EndPrefix { word: word.prefix(prefix_len) }),
        duration,
        word_length: word.len(),
        crossings: record.crossings,
        provenance,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedCheck {
    pub pass: bool,
    /// √3·T + 3 − (n_x + n_y + n_z)
    pub slack: f64,
}

/// Face-crossing envelope n_x + n_y + n_z ≤ √3·T + 3.
pub fn check_speed_bound(record: &OrbitRecord) -> SpeedCheck {
    let slack = 3f64.sqrt() * record.duration() + 3.0 - record.total_crossings() as f64;
    SpeedCheck { pass: slack >= 0.0, slack }
}

/// Speed statistics of all samples whose direction starts with a given prefix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrefixNode {
    pub max_speed: f64,
    pub min_speed: f64,
    pub count: u64,
    pub children: BTreeMap<Letter, PrefixNode>,
}

impl PrefixNode {
    fn observe(&mut self, speed: f64) {
        if self.count == 0 {
            self.max_speed = speed;
            self.min_speed = speed;
        } else {
            self.max_speed = self.max_speed.max(speed);
            self.min_speed = self.min_speed.min(speed);
        }
        self.count += 1;
    }

    pub fn insert(&mut self, direction: &EndPrefix, speed: f64) {
        let mut node = self;
        node.observe(speed);
        for &l in direction.word.letters() {
            node = node.children.entry(l).or_default();
            node.observe(speed);
        }
    }

    pub fn merge(&mut self, other: &PrefixNode) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            self.max_speed = other.max_speed;
            self.min_speed = other.min_speed;
        } else {
            self.max_speed = self.max_speed.max(other.max_speed);
            self.min_speed = self.min_speed.min(other.min_speed);
        }
        self.count += other.count;
        for (l, child) in &other.children {
            self.children.entry(*l).or_default().merge(child);
        }
    }

    /// Node for the given prefix, if any sample reached it.
    pub fn get(&self, prefix: &EndPrefix) -> Option<&PrefixNode> {
        let mut node = self;
        for l in prefix.word.letters() {
            node = node.children.get(l)?;
        }
        Some(node)
    }

    /// Nested `letter → {max_speed, min_speed, count, children}` object.
    pub fn children_json(&self) -> Value {
        let mut map = serde_json::Map::new();
        for (l, c) in &self.children {
            map.insert(
                l.to_string(),
                json!({
                    "max_speed": c.max_speed,
                    "min_speed": c.min_speed,
                    "count": c.count,
                    "children": c.children_json(),
                }),
            );
        }
        Value::Object(map)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RotationSetEstimate {
    pub samples: Vec<RotationSample>,
    pub tree: PrefixNode,
    pub singular: usize,
}

impl RotationSetEstimate {
    pub fn push(&mut self, sample: RotationSample) {
        self.tree.insert(sample.vector.direction(), sample.vector.speed());
        self.samples.push(sample);
    }

    pub fn merge(&mut self, other: &RotationSetEstimate) {
        self.tree.merge(&other.tree);
        self.samples.extend(other.samples.iter().cloned());
        self.singular += other.singular;
    }

    pub fn max_speed(&self) -> f64 {
        self.samples.iter().map(|s| s.vector.speed()).fold(0.0, f64::max)
    }

    pub fn tree_json(&self) -> Value {
        json!({
            "max_speed": self.tree.max_speed,
            "min_speed": self.tree.min_speed,
            "count": self.tree.count,
            "children": self.tree.children_json(),
        })
    }

    pub const CSV_HEADER: &'static str = "seed,T,speed,word_length,n_x,n_y,n_z,prefix";

    pub fn csv_rows(&self) -> impl Iterator<Item = String> + '_ {
        self.samples.iter().map(|s| {
            let seed = match &s.provenance {
                Provenance::Seed(x) => x.to_string(),
                Provenance::Word(w) => w.clone(),
            };
            format!(
                "{},{},{},{},{},{},{},{}",
                seed,
                s.duration,
                s.vector.speed(),
                s.word_length,
                s.crossings[0],
                s.crossings[1],
                s.crossings[2],
                s.vector.direction().word
            )
        })
    }
}

/// Seed of the `i`-th orbit of an ensemble.
pub fn orbit_seed(seed: u64, i: u64) -> u64 {
    seed.wrapping_add(i)
}

/// Uniform random initial conditions, one independent stream per orbit;
/// the result does not depend on the thread count.
pub fn sample_rotation_set(
    n_orbits: usize,
    duration: f64,
    r0: f64,
    seed: u64,
    prefix_len: usize,
) -> Result<RotationSetEstimate, FlowError> {
    let results: Vec<Result<Option<RotationSample>, FlowError>> = (0..n_orbits as u64)
        .into_par_iter()
        .map(|i| {
            let s = orbit_seed(seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let start = random_phase_point(&mut rng, r0);
            let rec = simulate(start, duration, r0)?;
            if rec.is_singular() {
                return Ok(None);
            }
            Ok(Some(rotation_vector(&rec, prefix_len, Provenance::Seed(s))))
        })
        .collect();
    let mut est = RotationSetEstimate::default();
    for r in results {
        match r? {
            Some(s) => est.push(s),
            None => est.singular += 1,
        }
    }
    Ok(est)
}
