//! Itinerary counting against the seven-domain partition and the analytic
//! bounds that bracket the topological entropy.

use std::collections::HashSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::flow::{random_phase_point, simulate, FlowError, OrbitRecord};
use crate::freegroup::count_reduced_words;
use crate::geometry::Vec3;
use crate::rotation::orbit_seed;

/// 2√3·ln 12
pub const UPPER_RATE_LIMIT: f64 = 8.607_969_138_997_158;
/// ln 5 / 3
pub const LOWER_RATE_LIMIT: f64 = 0.536_479_304_144_700_5;

/// `D0` or one of the slabs `D_k^±` near the faces `x_k ∈ ℤ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartitionLabel {
    D0,
    Slab { axis: u8, positive: bool },
}

impl PartitionLabel {
    pub const ALL: [PartitionLabel; 7] = [
        PartitionLabel::D0,
        PartitionLabel::Slab { axis: 0, positive: true },
        PartitionLabel::Slab { axis: 0, positive: false },
        PartitionLabel::Slab { axis: 1, positive: true },
        PartitionLabel::Slab { axis: 1, positive: false },
        PartitionLabel::Slab { axis: 2, positive: true },
        PartitionLabel::Slab { axis: 2, positive: false },
    ];

    /// Index into [`PartitionLabel::ALL`].
    pub fn code(self) -> u8 {
        match self {
            PartitionLabel::D0 => 0,
            PartitionLabel::Slab { axis, positive } => 1 + 2 * axis + u8::from(!positive),
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn is_slab(self) -> bool {
        self != PartitionLabel::D0
    }
}

impl fmt::Display for PartitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionLabel::D0 => write!(f, "D0"),
            PartitionLabel::Slab { axis, positive } => {
                write!(f, "D{}{}", axis + 1, if *positive { '+' } else { '-' })
            }
        }
    }
}

/// Slab membership by fractional coordinates; overlaps go to the smallest
/// axis, `+` before `−`.
pub fn classify(q: Vec3, eps0: f64) -> PartitionLabel {
    for k in 0..3 {
        let frac = q[k] - q[k].floor();
        if frac <= eps0 {
            return PartitionLabel::Slab { axis: k as u8, positive: true };
        }
        if 1.0 - frac <= eps0 {
            return PartitionLabel::Slab { axis: k as u8, positive: false };
        }
    }
    PartitionLabel::D0
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Itinerary {
    /// Label codes at times `n·ε₀`.
    pub codes: Vec<u8>,
    pub eps0_bits: u64,
}

impl Itinerary {
    pub fn eps0(&self) -> f64 {
        f64::from_bits(self.eps0_bits)
    }

    pub fn labels(&self) -> impl Iterator<Item = PartitionLabel> + '_ {
        self.codes.iter().map(|&c| PartitionLabel::from_code(c).expect("valid code"))
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Entries into the union of slabs: maximal runs of slab labels.
    pub fn slab_visits(&self) -> usize {
        let mut visits = 0;
        let mut inside = false;
        for &c in &self.codes {
            let slab = c != 0;
            if slab && !inside {
                visits += 1;
            }
            inside = slab;
        }
        visits
    }
}

/// Number of samples `floor(T/ε₀) + 1`.
pub fn sample_count(duration: f64, eps0: f64) -> usize {
    (duration / eps0 + 1e-9).floor() as usize + 1
}

/// Labels at `t₀ + n·ε₀` for `n = 0..=floor(T/ε₀)`, positions reconstructed
/// linearly between events.
pub fn itinerary_of(record: &OrbitRecord, eps0: f64) -> Itinerary {
    assert!(eps0 > 0.0 && eps0 < 0.5, "eps0 must lie in (0, 1/2)");
    let t0 = record.initial.t;
    let n = sample_count(record.duration(), eps0);
    let mut codes = Vec::with_capacity(n);
    let mut idx = 0;
    let (mut q, mut v, mut te) = (record.initial.q, record.initial.v, t0);
    for i in 0..n {
        let t = t0 + i as f64 * eps0;
        while idx < record.events.len() && record.events[idx].time <= t {
            let e = &record.events[idx];
            q = e.q;
            v = e.v;
            te = e.time;
            idx += 1;
        }
        codes.push(classify(q + v * (t - te), eps0).code());
    }
    Itinerary { codes, eps0_bits: eps0.to_bits() }
}

/// `f(T, ε₀) = 2√3·T/(1−ε₀) + 7`.
pub fn upper_bound_f(duration: f64, eps0: f64) -> f64 {
    2.0 * 3f64.sqrt() * duration / (1.0 - eps0) + 7.0
}

/// `ln(12^f)/T`.
pub fn upper_rate(duration: f64, eps0: f64) -> f64 {
    upper_bound_f(duration, eps0) * 12f64.ln() / duration
}

/// Per-orbit cap on slab entries, `2√3·T/(1−ε₀) + 6`.
pub fn visit_bound(duration: f64, eps0: f64) -> f64 {
    upper_bound_f(duration, eps0) - 1.0
}

/// `ln|{reduced words of length ⌊T/3⌋}| / T`.
pub fn lower_bound_words(duration: f64) -> f64 {
    assert!(duration > 0.0);
    let n = (duration / 3.0).floor() as u64;
    ln_biguint(&count_reduced_words(n)) / duration
}

fn ln_biguint(x: &num_bigint::BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        let f: f64 = x.to_string().parse().expect("decimal");
        return f.ln();
    }
    let shift = bits - 64;
    let top = x >> shift;
    let top: f64 = top.to_string().parse().expect("decimal");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub duration: f64,
    pub n_hat: usize,
    pub log_rate: f64,
    pub f: f64,
    pub upper_rate: f64,
    pub lower_rate: f64,
    /// Largest per-orbit slab-entry count at this T.
    pub max_visits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub eps0: f64,
    pub r0: f64,
    pub n_orbits: usize,
    pub singular: usize,
    pub rows: Vec<EntropyRow>,
    pub upper_limit: f64,
    pub lower_limit: f64,
}

impl EntropyReport {
    pub const CSV_HEADER: &'static str = "T,eps0,r0,n_orbits,N_hat,log_rate,f,upper_rate,lower_rate";

    pub fn csv_rows(&self) -> impl Iterator<Item = String> + '_ {
        self.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.duration, self.eps0, self.r0, self.n_orbits, r.n_hat, r.log_rate, r.f, r.upper_rate, r.lower_rate
            )
        })
    }

    /// Empirical rate below the analytic upper rate for every T.
    pub fn bracket_holds(&self) -> bool {
        self.rows.iter().all(|r| r.log_rate < r.upper_rate)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EntropyError {
    #[error("T grid must be positive and strictly increasing")]
    BadGrid,
    #[error("eps0 must lie in (0, 1/2)")]
    BadEps0,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Distinct itineraries among `n_orbits` random orbits, each simulated once
/// to the largest T and truncated for the smaller ones.
pub fn count_itineraries(
    n_orbits: usize,
    grid: &[f64],
    eps0: f64,
    r0: f64,
    seed: u64,
) -> Result<EntropyReport, EntropyError> {
    if grid.is_empty() || grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EntropyError::BadGrid);
    }
    if !(eps0 > 0.0 && eps0 < 0.5) {
        return Err(EntropyError::BadEps0);
    }
    let t_max = *grid.last().expect("non-empty");
    let results: Vec<Result<Option<Itinerary>, FlowError>> = (0..n_orbits as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(orbit_seed(seed, i));
            let start = random_phase_point(&mut rng, r0);
            let rec = simulate(start, t_max, r0)?;
            if rec.is_singular() {
                return Ok(None);
            }
            Ok(Some(itinerary_of(&rec, eps0)))
        })
        .collect();
    let mut itineraries = Vec::with_capacity(n_orbits);
    let mut singular = 0;
    for r in results {
        match r? {
            Some(it) => itineraries.push(it),
            None => singular += 1,
        }
    }
    let rows = grid
        .par_iter()
        .map(|&t| {
            let n = sample_count(t, eps0);
            let mut seen: HashSet<&[u8]> = HashSet::with_capacity(itineraries.len());
            let mut max_visits = 0;
            for it in &itineraries {
                let prefix = &it.codes[..n.min(it.codes.len())];
                seen.insert(prefix);
                let visits = Itinerary { codes: prefix.to_vec(), eps0_bits: it.eps0_bits }.slab_visits();
                max_visits = max_visits.max(visits);
            }
            let n_hat = seen.len();
            EntropyRow {
                duration: t,
                n_hat,
                log_rate: if n_hat == 0 { 0.0 } else { (n_hat as f64).ln() / t },
                f: upper_bound_f(t, eps0),
                upper_rate: upper_rate(t, eps0),
                lower_rate: lower_bound_words(t),
                max_visits,
            }
        })
        .collect();
    Ok(EntropyReport {
        eps0,
        r0,
        n_orbits,
        singular,
        rows,
        upper_limit: UPPER_RATE_LIMIT,
        lower_limit: LOWER_RATE_LIMIT,
    })
}
