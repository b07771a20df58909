//! The four subcommands. Each writes its main table to `out` unless an
//! output directory is configured.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use torus_billiard::admissible::validate::{POSITION_TOL, REFLECTION_TOL};
use torus_billiard::admissible::{
    close_periodic, insert_idle_runs, minimize_arclength, plan_word, AdmissibleError, AdmissibleOrbit, NodeRole,
    PlanError, PlanOptions, MAX_RADIUS,
};
use torus_billiard::entropy::{count_itineraries, EntropyError, EntropyReport};
use torus_billiard::flow::{random_phase_point, simulate, summary_row, OrbitRecord, SUMMARY_HEADER};
use torus_billiard::rotation::{orbit_seed, rotation_vector, sample_rotation_set, Provenance, RotationSample, RotationSetEstimate};
use torus_billiard::ReducedWord;

use crate::{CliError, RunConfig};

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(|e| CliError::io(path, e))
}

fn write_table<'a>(
    cfg: &RunConfig,
    name: &str,
    header: &str,
    rows: impl Iterator<Item = String> + 'a,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut text = String::new();
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    match &cfg.out_dir {
        Some(dir) => write_file(&dir.join(name), &text),
        None => out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

/// Summary rows for `n_orbits` random orbits, optionally with their event logs.
pub fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let rows: Vec<Result<String, CliError>> = (0..cfg.n_orbits as u64)
        .into_par_iter()
        .map(|i| {
            let seed = orbit_seed(cfg.seed, i);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = random_phase_point(&mut rng, cfg.r0);
            let rec = simulate(start, cfg.duration, cfg.r0)?;
            if cfg.records {
                let dir = cfg.out_dir.as_ref().expect("checked in validate");
                let path = dir.join("records").join(format!("orbit_{seed}.jsonl"));
                let mut f = create(&path)?;
                rec.write_jsonl(&mut f).and_then(|_| f.flush()).map_err(|e| CliError::io(&path, e))?;
            }
            Ok(summary_row(seed, &rec))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    write_table(cfg, "summary.csv", SUMMARY_HEADER, rows.into_iter(), out)
}

/// A constructed, validated orbit and its replay.
#[derive(Debug, Clone)]
pub struct Constructed {
    pub orbit: AdmissibleOrbit,
    pub record: OrbitRecord,
    pub rotation: RotationSample,
    /// Speed before idle runs were inserted.
    pub base_speed: f64,
}

fn construction(e: AdmissibleError) -> CliError {
    match e {
        AdmissibleError::Plan(PlanError::NotReduced(i)) => CliError::Config(format!("word is not reduced at position {i}")),
        AdmissibleError::Plan(PlanError::NotCyclicallyReduced) => CliError::Config("word is not cyclically reduced".into()),
        AdmissibleError::Plan(PlanError::EmptyWord) => CliError::Config("word is empty".into()),
        e => CliError::Construction(e.to_string()),
    }
}

/// Plans, minimizes and validates `word` at the configured radius.
pub fn construct_word(word: &str, cfg: &RunConfig) -> Result<Constructed, CliError> {
    let w: ReducedWord = word.parse().map_err(|e| CliError::Config(format!("word {word:?}: {e}")))?;
    if cfg.r0 > MAX_RADIUS {
        return Err(CliError::Config(format!("construction needs r0 <= {MAX_RADIUS}, got {}", cfg.r0)));
    }
    let opts = PlanOptions { alt_cross_exit: cfg.alt_cross_exit };
    let (mut orbit, base_speed) = if cfg.periodic {
        if cfg.target_speed.is_some() {
            return Err(CliError::Config("--target-speed applies to open orbits only".into()));
        }
        let orbit = close_periodic(&w, cfg.r0, opts).map_err(construction)?;
        let speed = orbit.speed();
        (orbit, speed)
    } else {
        let plan = plan_word(&w, opts).map_err(|e| construction(e.into()))?;
        let orbit = minimize_arclength(&plan, cfg.r0).map_err(|e| construction(e.into()))?;
        let speed = orbit.speed();
        match cfg.target_speed {
            Some(s) => (insert_idle_runs(&orbit, s).map_err(|e| construction(e.into()))?, speed),
            None => (orbit, speed),
        }
    };
    let record = orbit.validate().map_err(|e| construction(e.into()))?;
    let rotation = rotation_vector(&record, cfg.prefix_len, Provenance::Word(w.to_string()));
    Ok(Constructed { orbit, record, rotation, base_speed })
}

impl Constructed {
    pub fn summary_json(&self) -> serde_json::Value {
        let o = &self.orbit;
        let idle = o.plan.nodes.iter().filter(|n| n.role == NodeRole::Idle).count();
        json!({
            "word": o.plan.word.to_string(),
            "r0": o.r0,
            "periodic": o.plan.is_periodic(),
            "length": o.length,
            "speed": o.speed(),
            "base_speed": self.base_speed,
            "contacts": o.plan.nodes.len(),
            "idle_contacts": idle,
            "max_cell_time": o.max_cell_time(),
            "fermat_residual": o.fermat_residual(),
            "validation": {
                "validated": o.validated,
                "collisions": self.record.collisions().count(),
                "position_tol": POSITION_TOL,
                "reflection_tol": REFLECTION_TOL,
                "periods": o.plan.is_periodic().then_some(3),
            },
            "rotation": {
                "speed": self.rotation.vector.speed(),
                "direction": self.rotation.vector.direction().word.to_string(),
                "duration": self.rotation.duration,
            },
            "plan": o.plan_json(),
        })
    }
}

/// Constructs the configured word and reports plan, orbit, validation and
/// rotation vector.
pub fn cmd_construct(cfg: &RunConfig, out: &mut dyn Write) -> Result<Constructed, CliError> {
    let word = cfg.word.as_deref().ok_or_else(|| CliError::Config("construct needs --word".into()))?;
    let c = construct_word(word, cfg)?;
    let summary = serde_json::to_string_pretty(&c.summary_json()).expect("json");
    match &cfg.out_dir {
        Some(dir) => {
            write_file(&dir.join("plan.json"), &(summary + "\n"))?;
            write_file(&dir.join("contacts.csv"), &c.orbit.contact_csv())?;
            let path = dir.join("orbit.jsonl");
            let mut f = create(&path)?;
            c.record.write_jsonl(&mut f).and_then(|_| f.flush()).map_err(|e| CliError::io(&path, e))?;
            let mut est = RotationSetEstimate::default();
            est.push(c.rotation.clone());
            write_file(&dir.join("rotation.csv"), &csv_text(RotationSetEstimate::CSV_HEADER, est.csv_rows()))?;
        }
        None => writeln!(out, "{summary}").map_err(|e| CliError::io("<stdout>", e))?,
    }
    Ok(c)
}

fn csv_text(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

/// Random ensemble plus constructed orbits for the configured words.
pub fn rotation_set(cfg: &RunConfig) -> Result<RotationSetEstimate, CliError> {
    let mut est = sample_rotation_set(cfg.n_orbits, cfg.duration, cfg.r0, cfg.seed, cfg.prefix_len)?;
    let word_cfg = RunConfig { periodic: false, target_speed: None, ..cfg.clone() };
    let built: Vec<Result<Constructed, CliError>> = cfg.words.par_iter().map(|w| construct_word(w, &word_cfg)).collect();
    for c in built {
        est.push(c?.rotation);
    }
    Ok(est)
}

pub fn cmd_rotation_set(cfg: &RunConfig, out: &mut dyn Write) -> Result<RotationSetEstimate, CliError> {
    let est = rotation_set(cfg)?;
    write_table(cfg, "rotation.csv", RotationSetEstimate::CSV_HEADER, est.csv_rows(), out)?;
    if let Some(dir) = &cfg.out_dir {
        let tree = serde_json::to_string_pretty(&est.tree_json()).expect("json");
        write_file(&dir.join("prefix_tree.json"), &(tree + "\n"))?;
    }
    Ok(est)
}

pub fn cmd_entropy(cfg: &RunConfig, out: &mut dyn Write) -> Result<EntropyReport, CliError> {
    let report = count_itineraries(cfg.n_orbits, &cfg.time_grid(), cfg.eps0, cfg.r0, cfg.seed).map_err(|e| match e {
        EntropyError::Flow(f) => CliError::Flow(f),
        e => CliError::Config(e.to_string()),
    })?;
    write_table(cfg, "entropy.csv", EntropyReport::CSV_HEADER, report.csv_rows(), out)?;
    Ok(report)
}
