use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use hypknn::blocks::build_blocks;
use hypknn::experiment::{run_replicates, Outputs, ReplicateRecord};
use hypknn::io::{write_atoms_csv, ATOMS_CSV_HEADER};
use hypknn::limitlaw::Regime;
use serde::{Deserialize, Serialize};

use crate::config::{regime_dir, ExperimentConfig};
use crate::CliError;

/// Replicates per write; progress is durable at chunk boundaries.
const CHUNK: u64 = 50;

pub const COUNTS_HEADER: &str = "replicate,n_interior,n_exterior,n1,n2,n1_swapped,n2_swapped";

/// Atom measure files written per regime.
pub const ATOM_FILES: [&str; 5] = ["xi.csv", "eta.csv", "eta_column.csv", "zeta.csv", "zeta_blocks.csv"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeFile {
    pub config_hash: String,
    pub regime: Regime,
}

/// Progress and timing of one regime directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub replicates_done: u64,
    pub blocks: usize,
    pub elapsed_seconds: f64,
    pub mean_interior_points: f64,
}

pub fn metadata_line(hash: &str, regime: &Regime) -> String {
    format!("# config_hash={hash} regime={}", serde_json::to_string(regime).expect("plain data"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(value).expect("plain data");
    fs::write(&tmp, text + "\n").map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

/// Drops data rows of replicates `>= keep` so a resumed run appends cleanly.
fn truncate_rows(path: &Path, keep: u64) -> Result<(), CliError> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut kept = String::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let rep = line.split(',').next().and_then(|s| s.parse::<u64>().ok());
        if n < 2 || rep.is_some_and(|r| r < keep) {
            kept.push_str(&line);
            kept.push('\n');
        }
    }
    fs::write(path, kept).map_err(|e| CliError::io(path, e))
}

struct Writers {
    files: Vec<(String, BufWriter<File>)>,
}

impl Writers {
    fn open(dir: &Path, fresh: bool, meta: &str) -> Result<Self, CliError> {
        let mut files = Vec::new();
        for name in ATOM_FILES.iter().copied().chain(["counts.csv"]) {
            let path = dir.join(name);
            let f = if fresh {
                let mut f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
                let header = if name == "counts.csv" { COUNTS_HEADER } else { ATOMS_CSV_HEADER };
                writeln!(f, "{meta}\n{header}").map_err(|e| CliError::io(&path, e))?;
                f
            } else {
                OpenOptions::new().append(true).open(&path).map_err(|e| CliError::io(&path, e))?
            };
            files.push((name.to_string(), BufWriter::new(f)));
        }
        Ok(Self { files })
    }

    fn write(&mut self, dir: &Path, recs: &[ReplicateRecord]) -> Result<(), CliError> {
        for (name, w) in &mut self.files {
            let path = dir.join(&*name);
            let err = |e: hypknn::Error| CliError::from_core(&path, e);
            for rec in recs {
                let r = rec.replicate;
                match name.as_str() {
                    "xi.csv" => write_atoms_csv(&mut *w, r, None, &rec.xi).map_err(err)?,
                    "zeta.csv" => write_atoms_csv(&mut *w, r, None, rec.zeta.as_ref().unwrap()).map_err(err)?,
                    "counts.csv" => {
                        let c = rec.counts.unwrap();
                        writeln!(
                            w,
                            "{r},{},{},{},{},{},{}",
                            rec.n_interior, rec.n_exterior, c.n1, c.n2, c.n1_swapped, c.n2_swapped
                        )
                        .map_err(|e| CliError::io(&path, e))?;
                    }
                    _ => {
                        let per_block = match name.as_str() {
                            "eta.csv" => &rec.eta,
                            "eta_column.csv" => &rec.eta_column,
                            _ => &rec.zeta_blocks,
                        };
                        for (m, measure) in per_block.as_ref().unwrap().iter().enumerate() {
                            write_atoms_csv(&mut *w, r, Some(m), measure).map_err(err)?;
                        }
                    }
                }
            }
            w.flush().map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Simulates every grid point of `config`; returns the regime directories.
pub fn simulate(config: &ExperimentConfig, resume: bool, quiet: bool) -> Result<Vec<std::path::PathBuf>, CliError> {
    let regimes = config.validate()?;
    let hash = config.hash();
    let mut dirs = Vec::new();
    for regime in regimes {
        let dir = regime_dir(&config.out, regime.lambda);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        write_json(
            &dir.join("regime.json"),
            &RegimeFile {
                config_hash: hash.clone(),
                regime: regime.clone(),
            },
        )?;
        dirs.push(dir.clone());
        if config.replicates == 0 {
            continue;
        }
        let blocks = build_blocks(&regime).map_err(|e| CliError::Usage(e.to_string()))?;
        let meta_path = dir.join("run.json");
        let mut meta = RunMeta {
            config_hash: hash.clone(),
            config: config.clone(),
            replicates_done: 0,
            blocks: blocks.count,
            elapsed_seconds: 0.0,
            mean_interior_points: 0.0,
        };
        if resume && meta_path.exists() {
            let old: RunMeta = read_json(&meta_path)?;
            if old.config_hash != hash {
                return Err(CliError::Usage(format!(
                    "{}: existing run has config hash {}, current config hashes to {hash}",
                    dir.display(),
                    old.config_hash
                )));
            }
            meta.replicates_done = old.replicates_done.min(config.replicates);
            meta.elapsed_seconds = old.elapsed_seconds;
            meta.mean_interior_points = old.mean_interior_points;
            for name in ATOM_FILES.iter().copied().chain(["counts.csv"]) {
                truncate_rows(&dir.join(name), meta.replicates_done)?;
            }
            write_json(&meta_path, &meta)?;
        }
        let fresh = meta.replicates_done == 0;
        let mut writers = Writers::open(&dir, fresh, &metadata_line(&hash, &regime))?;
        let mut start = meta.replicates_done;
        while start < config.replicates {
            let end = (start + CHUNK).min(config.replicates);
            let t = Instant::now();
            let recs = run_replicates(&regime, &blocks, config.master_seed, start..end, Outputs::ALL)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            writers.write(&dir, &recs)?;
            let pts: f64 = recs.iter().map(|r| r.n_interior as f64).sum();
            meta.mean_interior_points =
                (meta.mean_interior_points * start as f64 + pts) / end as f64;
            meta.elapsed_seconds += t.elapsed().as_secs_f64();
            meta.replicates_done = end;
            write_json(&meta_path, &meta)?;
            start = end;
        }
        if !quiet {
            eprintln!(
                "lambda = {}: {} replicates, {} blocks, {:.0} interior points per replicate, {:.1}s",
                regime.lambda, meta.replicates_done, meta.blocks, meta.mean_interior_points, meta.elapsed_seconds
            );
        }
    }
    Ok(dirs)
}
