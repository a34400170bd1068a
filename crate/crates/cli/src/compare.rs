use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use hypknn::blocks::{internal_volume_ratio, build_blocks, AtomMeasure};
use hypknn::io::read_atoms_csv;
use hypknn::limitlaw::{
    default_entropy_edges, poisson_lower_tail, relative_entropy, scalar_rate, BinnedMeasure, Regime,
};
use hypknn::stats::{empirical_law_tv, mean_se, poisson_fit, BinnedLaw, LawTv, TestRecord};
use hypknn::RngStream;
use serde::Serialize;

use crate::simulate::{metadata_line, read_json, RegimeFile, RunMeta, ATOM_FILES, COUNTS_HEADER};
use crate::CliError;

/// Which reading of the separated process and boundary counts gates the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Neighbours restricted to the block `Q_m`; displayed boundary counts.
    Verbatim,
    /// Neighbours from the column over `S_m`; complementary boundary counts.
    Column,
}

/// Below this many replicates a regime is flagged.
const MIN_REPLICATES: u64 = 100;

#[derive(Debug, Clone, Serialize)]
pub struct RegimeSummary {
    pub lambda: f64,
    pub u: f64,
    pub replicates: u64,
    pub internal_ratio: f64,
    pub tv_block: LawTv,
    pub tv_column: LawTv,
    pub tv_zeta_split: LawTv,
    pub eta_dispersion_block: f64,
    pub eta_dispersion_column: f64,
    pub n1_over_u: f64,
    pub n2_over_u: f64,
    pub n1_swapped_over_u: f64,
    pub n2_swapped_over_u: f64,
    pub entropy_of_mean_xi: f64,
    pub scalar_rate_of_mean_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
struct RegimeReport<'a> {
    config_hash: &'a str,
    regime: &'a Regime,
    summary: &'a RegimeSummary,
    records: &'a [TestRecord],
}

#[derive(Debug, Clone, Serialize)]
struct GridReport<'a> {
    variant: Variant,
    regimes: &'a [RegimeSummary],
    records: &'a [TestRecord],
    pass: bool,
}

struct Loaded {
    regime: Regime,
    meta: RunMeta,
    /// Per file, indexed by replicate (times block count for block files).
    measures: Vec<Vec<AtomMeasure>>,
    counts: Vec<[u64; 6]>,
}

fn info(test: impl Into<String>, statistic: f64, ci: (f64, f64), n: usize) -> TestRecord {
    let mut r = TestRecord::new(test, statistic, ci, n, true);
    r.decision = "info".into();
    r
}

fn check_header(path: &Path, line: &str, expected: &str) -> Result<(), CliError> {
    if line != expected {
        return Err(CliError::Format(format!("{}: metadata does not match regime.json", path.display())));
    }
    Ok(())
}

fn load(dir: &Path) -> Result<Loaded, CliError> {
    let rf: RegimeFile = read_json(&dir.join("regime.json"))?;
    let meta: RunMeta = read_json(&dir.join("run.json"))?;
    if meta.config_hash != rf.config_hash {
        return Err(CliError::Format(format!("{}: run.json and regime.json disagree", dir.display())));
    }
    let expected = metadata_line(&rf.config_hash, &rf.regime);
    let n = meta.replicates_done as usize;
    let empty = AtomMeasure::new(rf.regime.s0, rf.regime.u_cap);
    let mut measures = Vec::new();
    for name in ATOM_FILES {
        let path = dir.join(name);
        let f = File::open(&path).map_err(|e| CliError::io(&path, e))?;
        let mut reader = BufReader::new(f);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| CliError::io(&path, e))?;
        check_header(&path, first.trim_end(), &expected)?;
        let rows = read_atoms_csv(reader).map_err(|e| CliError::from_core(&path, e))?;
        let per_block = !matches!(name, "xi.csv" | "zeta.csv");
        let width = if per_block { meta.blocks } else { 1 };
        let mut out = vec![empty.clone(); n * width];
        for row in rows {
            let slot = row.replicate as usize * width + row.block.unwrap_or(0);
            if row.replicate as usize >= n || row.block.unwrap_or(0) >= width {
                return Err(CliError::Format(format!("{}: row outside the recorded run", path.display())));
            }
            out[slot].atoms.push(row.atom);
        }
        measures.push(out);
    }
    let path = dir.join("counts.csv");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let mut lines = text.lines();
    check_header(&path, lines.next().unwrap_or(""), &expected)?;
    if lines.next() != Some(COUNTS_HEADER) {
        return Err(CliError::Format(format!("{}: bad header", path.display())));
    }
    let mut counts = Vec::with_capacity(n);
    for line in lines {
        let v: Vec<u64> = line
            .split(',')
            .map(|f| f.parse::<u64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
        if v.len() != 7 {
            return Err(CliError::Format(format!("{}: expected 7 columns", path.display())));
        }
        counts.push([v[1], v[2], v[3], v[4], v[5], v[6]]);
    }
    if counts.len() != n {
        return Err(CliError::Format(format!("{}: {} rows for {n} replicates", path.display(), counts.len())));
    }
    Ok(Loaded {
        regime: rf.regime,
        meta,
        measures,
        counts,
    })
}

fn law(edges: &[f64], ms: &[AtomMeasure]) -> BinnedLaw {
    BinnedLaw::from_measures(edges.to_vec(), ms).expect("validated edges")
}

fn analyse(dir: &Path, seed: &RngStream) -> Result<(RegimeSummary, Vec<TestRecord>), CliError> {
    let l = load(dir)?;
    let r = &l.regime;
    let cfg = &l.meta.config;
    let n = l.meta.replicates_done;
    let tag = format!("lambda={}", r.lambda);
    let mut records = Vec::new();
    if n < MIN_REPLICATES {
        let mut rec = TestRecord::new(format!("{tag} insufficient_replicates"), n as f64, (0.0, 0.0), n as usize, true);
        rec.decision = "flag".into();
        records.push(rec);
    }
    if n < 2 {
        return Err(CliError::Usage(format!("{}: need at least 2 replicates", dir.display())));
    }
    let [xi, eta, eta_col, _zeta, zeta_blocks] = [0, 1, 2, 3, 4].map(|i| &l.measures[i]);

    for u in [0.0, 1.0, 2.0] {
        let m: Vec<f64> = xi.iter().map(|x| x.mass_above(r.s0 + u)).collect();
        let (mean, se) = mean_se(&m);
        let expect = r.window_volume * poisson_lower_tail(r.s0 + u + r.v, r.k);
        let lo = mean - 3.0 * se;
        let hi = mean + 3.0 * se;
        records.push(TestRecord::new(
            format!("{tag} mecke_xi(u={u}) expected {expect:.4}"),
            mean,
            (lo, hi),
            n as usize,
            lo <= expect && expect <= hi,
        ));
    }

    let edges = cfg.law_edges();
    let zeta_law = law(&edges, zeta_blocks);
    let tv = |a: &[AtomMeasure], b: &BinnedLaw, child| {
        empirical_law_tv(&law(&edges, a), b, cfg.count_cap, cfg.bootstrap, &seed.child(child))
            .expect("nonempty samples")
    };
    let tv_block = tv(eta, &zeta_law, 0);
    let tv_column = tv(eta_col, &zeta_law, 1);
    let half = zeta_blocks.len() / 2;
    let tv_zeta_split = tv(&zeta_blocks[..half], &law(&edges, &zeta_blocks[half..]), 2);
    for (name, t) in [("tv_eta_block_vs_zeta", &tv_block), ("tv_eta_column_vs_zeta", &tv_column)] {
        records.push(info(format!("{tag} {name}"), t.estimate, (t.ci_low, t.ci_high), t.n_a));
    }
    records.push(TestRecord::new(
        format!("{tag} tv_zeta_split_half"),
        tv_zeta_split.estimate,
        (tv_zeta_split.ci_low, tv_zeta_split.ci_high),
        half,
        tv_zeta_split.estimate < 0.1,
    ));

    let blocks = l.meta.blocks;
    let totals = |ms: &[AtomMeasure]| -> Vec<u64> {
        ms.chunks(blocks).map(|c| c.iter().map(|m| m.len() as u64).sum()).collect()
    };
    // Too few replicates for a fit leaves the dispersion as NaN, already flagged above.
    let mut dispersion = |name: &str, ms: &[AtomMeasure]| match poisson_fit(&totals(ms)) {
        Ok(f) => {
            records.push(info(format!("{tag} dispersion_{name}(E0)"), f.dispersion, (f.dispersion, f.dispersion), f.n));
            f.dispersion
        }
        Err(_) => f64::NAN,
    };
    let disp_block = dispersion("eta_block", eta);
    let disp_column = dispersion("eta_column", eta_col);

    let mean_col = |c: usize| l.counts.iter().map(|row| row[c] as f64).sum::<f64>() / n as f64 / r.u;
    let (n1, n2, n1s, n2s) = (mean_col(2), mean_col(3), mean_col(4), mean_col(5));
    for (name, v) in [("n1/u", n1), ("n2/u", n2), ("n1_swapped/u", n1s), ("n2_swapped/u", n2s)] {
        records.push(info(format!("{tag} {name}"), v, (v, v), n as usize));
    }

    let reference = r.reference();
    let ent_edges = default_entropy_edges(r.s0, r.u_cap);
    let mut mass = vec![0.0; ent_edges.len() - 1];
    for m in xi {
        for (acc, c) in mass.iter_mut().zip(m.bin_counts(&ent_edges, true)) {
            *acc += c as f64;
        }
    }
    mass.iter_mut().for_each(|x| *x /= n as f64 * r.u);
    let total: f64 = mass.iter().sum();
    let entropy = BinnedMeasure::new(ent_edges, mass)
        .and_then(|b| relative_entropy(&b, &reference))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let rate = scalar_rate(total, &reference).map_err(|e| CliError::Usage(e.to_string()))?;
    records.push(info(format!("{tag} entropy_of_mean_xi_over_u"), entropy, (entropy, entropy), n as usize));
    records.push(info(format!("{tag} scalar_rate_of_mean_mass"), rate, (rate, rate), n as usize));

    let bs = build_blocks(r).map_err(|e| CliError::Usage(e.to_string()))?;
    let summary = RegimeSummary {
        lambda: r.lambda,
        u: r.u,
        replicates: n,
        internal_ratio: internal_volume_ratio(r, &bs),
        tv_block,
        tv_column,
        tv_zeta_split,
        eta_dispersion_block: disp_block,
        eta_dispersion_column: disp_column,
        n1_over_u: n1,
        n2_over_u: n2,
        n1_swapped_over_u: n1s,
        n2_swapped_over_u: n2s,
        entropy_of_mean_xi: entropy,
        scalar_rate_of_mean_mass: rate,
    };
    let report = RegimeReport {
        config_hash: &l.meta.config_hash,
        regime: r,
        summary: &summary,
        records: &records,
    };
    write_text(&dir.join("report.json"), &(serde_json::to_string_pretty(&report).expect("plain data") + "\n"))?;
    Ok((summary, records))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Nonincreasing, allowing one upward step whose bootstrap intervals overlap.
pub fn tv_trend_ok(tvs: &[&LawTv]) -> bool {
    let mut inversions = 0;
    for w in tvs.windows(2) {
        if w[1].estimate > w[0].estimate {
            inversions += 1;
            if w[1].ci_low > w[0].ci_high {
                return false;
            }
        }
    }
    inversions <= 1
}

/// Strictly decreasing, except that a run of exact zeros is allowed.
pub fn decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
}

/// Regime directories under `dir`, ordered by lambda.
pub fn regime_dirs(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if dir.join("run.json").exists() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let p = entry.map_err(|e| CliError::io(dir, e))?.path();
        if p.join("run.json").exists() {
            let rf: RegimeFile = read_json(&p.join("regime.json"))?;
            out.push((rf.regime.lambda, p));
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("{}: no completed runs found", dir.display())));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out.into_iter().map(|(_, p)| p).collect())
}

/// Analyses a run directory; returns whether every gating check passed.
pub fn compare(dir: &Path, variant: Variant, quiet: bool) -> Result<bool, CliError> {
    let dirs = regime_dirs(dir)?;
    let seed = RngStream::new(0x5eed);
    let mut summaries = Vec::new();
    let mut records = Vec::new();
    for (i, d) in dirs.iter().enumerate() {
        let (s, r) = analyse(d, &seed.child(i as u64))?;
        summaries.push(s);
        records.extend(r);
    }
    if summaries.len() >= 2 {
        fn pick(s: &RegimeSummary, variant: Variant) -> (&LawTv, f64, f64) {
            match variant {
            Variant::Verbatim => (&s.tv_block, s.n1_over_u, s.n2_over_u),
            Variant::Column => (&s.tv_column, s.n1_swapped_over_u, s.n2_swapped_over_u),
            }
        }
        let tvs: Vec<&LawTv> = summaries.iter().map(|s| pick(s, variant).0).collect();
        let n1: Vec<f64> = summaries.iter().map(|s| pick(s, variant).1).collect();
        let n2: Vec<f64> = summaries.iter().map(|s| pick(s, variant).2).collect();
        let last = tvs.last().unwrap();
        let n = summaries.len();
        records.push(TestRecord::new("trend tv_eta_vs_zeta nonincreasing", last.estimate, (last.ci_low, last.ci_high), n, tv_trend_ok(&tvs)));
        records.push(TestRecord::new("trend n1/u decreasing", n1[n - 1], (n1[0], n1[n - 1]), n, decreasing(&n1)));
        records.push(TestRecord::new("trend n2/u decreasing", n2[n - 1], (n2[0], n2[n - 1]), n, decreasing(&n2)));
    }
    let pass = records.iter().all(|r| r.decision != "fail");

    let mut csv = String::from(
        "lambda,u,replicates,internal_ratio,tv_block,tv_block_lo,tv_block_hi,tv_column,tv_column_lo,tv_column_hi,\
         tv_zeta_split,dispersion_block,dispersion_column,n1_over_u,n2_over_u,n1_swapped_over_u,n2_swapped_over_u,\
         entropy_of_mean_xi,scalar_rate_of_mean_mass\n",
    );
    for s in &summaries {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            s.lambda,
            s.u,
            s.replicates,
            s.internal_ratio,
            s.tv_block.estimate,
            s.tv_block.ci_low,
            s.tv_block.ci_high,
            s.tv_column.estimate,
            s.tv_column.ci_low,
            s.tv_column.ci_high,
            s.tv_zeta_split.estimate,
            s.eta_dispersion_block,
            s.eta_dispersion_column,
            s.n1_over_u,
            s.n2_over_u,
            s.n1_swapped_over_u,
            s.n2_swapped_over_u,
            s.entropy_of_mean_xi,
            s.scalar_rate_of_mean_mass
        ));
    }
    write_text(&dir.join("trend.csv"), &csv)?;
    let grid = GridReport {
        variant,
        regimes: &summaries,
        records: &records,
        pass,
    };
    let json = serde_json::to_string_pretty(&grid).expect("plain data") + "\n";
    if dirs.len() > 1 || dirs[0] != dir {
        write_text(&dir.join("report.json"), &json)?;
    }
    if !quiet {
        let mut out = std::io::stdout().lock();
        for r in &records {
            let _ = writeln!(
                out,
                "{:<5} {:<55} {:>10.5} [{:.5}, {:.5}] n={}",
                r.decision, r.test, r.statistic, r.ci_low, r.ci_high, r.n
            );
        }
        let _ = writeln!(out, "{}", if pass { "compare: pass" } else { "compare: FAIL" });
    }
    Ok(pass)
}
