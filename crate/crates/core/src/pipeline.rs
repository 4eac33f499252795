//! Stage orchestration: per-replicate artifacts, manifests and the report.
//!
//! Artifacts live under the output directory:
//!
//! ```text
//! rep_<r>/teachers/{xapp1,xapp2}.json, *_curve.csv      train-teachers
//! rep_<r>/buffer.bin                                   collect
//! rep_<r>/student.json, distill_loss.csv,
//!         distill_agreement.csv                         distill
//! rep_<r>/eval/distilled_*.csv                          evaluate
//! rep_<r>/eval/individual{,_reversed}_*.csv             baseline-individual
//! rep_<r>/team/{xapp1,xapp2}.json, *_curve.csv,
//!         eval/team_*.csv                               baseline-team
//! rep_<r>/manifest_<stage>.json
//! report_rows.csv, report_summary.csv, manifest_report.json
//! ```
//!
//! Every stage seed is `derive_seed(master_seed, replicate, tag)`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{train_teacher, train_team, EpisodeRecord, TeamOptions, XAppSpec};
use crate::config::RunConfig;
use crate::distill::{
    collect_experience, distill, evaluate_logged, Deployment, DistillReport, EvalRun, ExperienceBuffer, Teacher,
};
use crate::env::CellularEnv;
use crate::error::{Error, Result};
use crate::io::{csv_bytes, read_file, sha256_file, write_atomic};
use crate::metrics::{rate_log_csv, EvalMetrics};
use crate::mitigation::MitigationPolicy;
use crate::nn::{self, QNet};
use crate::parallel::{self, Execution};

pub const SCHEME_INDIVIDUAL: &str = "individual";
pub const SCHEME_INDIVIDUAL_REVERSED: &str = "individual_reversed";
pub const SCHEME_TEAM: &str = "team";
pub const SCHEME_DISTILLED: &str = "distilled";

/// Report column order; other schemes follow alphabetically.
const SCHEME_ORDER: [&str; 4] = [SCHEME_INDIVIDUAL, SCHEME_INDIVIDUAL_REVERSED, SCHEME_TEAM, SCHEME_DISTILLED];

/// Eval seeds are shared by every scheme of a replicate so that all of
/// them face the same user trajectories.
const EVAL_TAG: &str = "eval";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    TrainTeachers,
    Collect,
    Distill,
    Evaluate,
    BaselineIndividual,
    BaselineTeam,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::TrainTeachers,
        Stage::Collect,
        Stage::Distill,
        Stage::Evaluate,
        Stage::BaselineIndividual,
        Stage::BaselineTeam,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::TrainTeachers => "train-teachers",
            Stage::Collect => "collect",
            Stage::Distill => "distill",
            Stage::Evaluate => "evaluate",
            Stage::BaselineIndividual => "baseline-individual",
            Stage::BaselineTeam => "baseline-team",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage {s}")))
    }
}

/// First 8 bytes (little-endian) of SHA-256 over `"<master>/<replicate>/<tag>"`.
pub fn derive_seed(master: u64, replicate: usize, tag: &str) -> u64 {
    let digest = Sha256::digest(format!("{master}/{replicate}/{tag}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Config-hash mismatches between chained stages become errors.
    pub strict: bool,
    pub exec: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRef {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub replicate: Option<usize>,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<ArtifactRef>,
    pub outputs: Vec<ArtifactRef>,
}

impl Manifest {
    pub fn file_name(stage: Stage) -> String {
        format!("manifest_{}.json", stage.name())
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_slice(&read_file(path)?).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Median-across-replicates outage grid: one row per threshold, one column
/// per scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub schemes: Vec<String>,
    pub thresholds_mbps: Vec<f64>,
    /// `medians[t][s]`; NaN when a scheme lacks that threshold.
    pub medians: Vec<Vec<f64>>,
}

impl ReportTable {
    pub fn get(&self, scheme: &str, threshold_mbps: f64) -> Option<f64> {
        let s = self.schemes.iter().position(|x| x == scheme)?;
        let t = self.thresholds_mbps.iter().position(|&x| x == threshold_mbps)?;
        Some(self.medians[t][s])
    }
}

#[derive(Debug, Clone, Default)]
pub struct StageReport {
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub table: Option<ReportTable>,
}

impl StageReport {
    fn absorb(&mut self, other: StageReport) {
        self.outputs.extend(other.outputs);
        self.warnings.extend(other.warnings);
        if other.table.is_some() {
            self.table = other.table;
        }
    }
}

/// One row of `report_rows.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: String,
    pub replicate: usize,
    pub threshold_mbps: f64,
    pub outage_pct: f64,
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Run one stage for every replicate (or the report once).
pub fn run_stage(cfg: &RunConfig, stage: Stage, opts: RunOptions) -> Result<StageReport> {
    cfg.validate()?;
    let ctx = Ctx {
        cfg,
        root: cfg.output_dir.clone(),
        hash: cfg.hash(),
        opts,
    };
    if stage == Stage::Report {
        return ctx.report();
    }
    let reps: Vec<usize> = (0..cfg.eval.seeds).collect();
    let parts = parallel::try_map(opts.exec, &reps, |&r| ctx.run_replicate(stage, r))?;
    let mut out = StageReport::default();
    for p in parts {
        out.absorb(p);
    }
    Ok(out)
}

/// Every stage in order.
pub fn run_pipeline(cfg: &RunConfig, opts: RunOptions) -> Result<StageReport> {
    let mut out = StageReport::default();
    for stage in Stage::ALL {
        out.absorb(run_stage(cfg, stage, opts)?);
    }
    Ok(out)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    root: PathBuf,
    hash: String,
    opts: RunOptions,
}

/// Accumulates one stage's inputs, outputs and seeds for its manifest.
struct Record {
    stage: Stage,
    replicate: Option<usize>,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    warnings: Vec<String>,
}

impl Record {
    fn new(stage: Stage, replicate: Option<usize>) -> Self {
        Self {
            stage,
            replicate,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
        }
    }
}

fn rep_dir_name(r: usize) -> String {
    format!("rep_{r}")
}

fn eval_prefix_files(prefix: &str) -> [String; 3] {
    [
        format!("{prefix}_outage.csv"),
        format!("{prefix}_hist.csv"),
        format!("{prefix}_summary.csv"),
    ]
}

impl Ctx<'_> {
    fn rel(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/")
    }

    fn seed(&self, rec: &mut Record, tag: &str) -> ChaCha8Rng {
        let r = rec.replicate.unwrap_or(0);
        let seed = derive_seed(self.cfg.master_seed, r, tag);
        rec.seeds.insert(tag.to_owned(), seed);
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn env(&self) -> Result<CellularEnv> {
        CellularEnv::new(self.cfg.env.clone())
    }

    /// Require `path` (made by `producer`) and check it against the
    /// producer's manifest.
    fn require(&self, rec: &mut Record, path: PathBuf, producer: Stage) -> Result<PathBuf> {
        if !path.is_file() {
            return Err(Error::MissingPrerequisite {
                path,
                stage: producer.name(),
            });
        }
        let manifest_path = path
            .ancestors()
            .find_map(|dir| {
                let m = dir.join(Manifest::file_name(producer));
                m.is_file().then_some(m)
            })
            .filter(|m| m.starts_with(&self.root));
        match manifest_path {
            None => rec
                .warnings
                .push(format!("{}: no {} manifest found", self.rel(&path), producer)),
            Some(m) => {
                let manifest = Manifest::load(&m)?;
                if manifest.config_hash != self.hash {
                    if self.opts.strict {
                        return Err(Error::ConfigMismatch {
                            artifact: path,
                            expected: self.hash.clone(),
                            found: manifest.config_hash,
                        });
                    }
                    rec.warnings.push(format!(
                        "{} was produced with a different config ({}...)",
                        self.rel(&path),
                        &manifest.config_hash[..12.min(manifest.config_hash.len())]
                    ));
                }
                let rel = self.rel(&path);
                let actual = sha256_file(&path)?;
                match manifest.outputs.iter().find(|o| o.path == rel) {
                    Some(o) if o.sha256 == actual => {}
                    Some(_) => rec
                        .warnings
                        .push(format!("{rel} changed since {} recorded it", producer)),
                    None => rec
                        .warnings
                        .push(format!("{rel} is not listed in the {} manifest", producer)),
                }
            }
        }
        rec.inputs.push(path.clone());
        Ok(path)
    }

    fn write(&self, rec: &mut Record, path: PathBuf, bytes: &[u8]) -> Result<()> {
        write_atomic(&path, bytes)?;
        rec.outputs.push(path);
        Ok(())
    }

    fn finish(&self, rec: Record, dir: &Path) -> Result<StageReport> {
        let refs = |paths: &[PathBuf]| -> Result<Vec<ArtifactRef>> {
            paths
                .iter()
                .map(|p| {
                    Ok(ArtifactRef {
                        path: self.rel(p),
                        sha256: sha256_file(p)?,
                    })
                })
                .collect()
        };
        let manifest = Manifest {
            stage: rec.stage.name().to_owned(),
            replicate: rec.replicate,
            config_hash: self.hash.clone(),
            seeds: rec.seeds.clone(),
            inputs: refs(&rec.inputs)?,
            outputs: refs(&rec.outputs)?,
        };
        let mpath = dir.join(Manifest::file_name(rec.stage));
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&mpath, &bytes)?;
        let mut outputs = rec.outputs;
        outputs.push(mpath);
        Ok(StageReport {
            outputs,
            warnings: rec.warnings,
            table: None,
        })
    }

    fn run_replicate(&self, stage: Stage, r: usize) -> Result<StageReport> {
        let dir = self.root.join(rep_dir_name(r));
        let mut rec = Record::new(stage, Some(r));
        match stage {
            Stage::TrainTeachers => self.train_teachers(&mut rec, &dir)?,
            Stage::Collect => self.collect(&mut rec, &dir)?,
            Stage::Distill => self.distill(&mut rec, &dir)?,
            Stage::Evaluate => self.evaluate_distilled(&mut rec, &dir)?,
            Stage::BaselineIndividual => self.baseline_individual(&mut rec, &dir)?,
            Stage::BaselineTeam => self.baseline_team(&mut rec, &dir)?,
            Stage::Report => unreachable!("report runs once"),
        }
        self.finish(rec, &dir)
    }

    fn specs(&self) -> [XAppSpec; 2] {
        [XAppSpec::xapp1(&self.cfg.env), XAppSpec::xapp2(&self.cfg.env)]
    }

    fn write_curve(&self, rec: &mut Record, path: PathBuf, curve: &[EpisodeRecord]) -> Result<()> {
        let bytes = csv_bytes(curve)?;
        self.write(rec, path, &bytes)
    }

    fn write_net(&self, rec: &mut Record, path: PathBuf, net: &QNet) -> Result<()> {
        let mut bytes = nn::io::to_json(net)?.into_bytes();
        bytes.push(b'\n');
        self.write(rec, path, &bytes)
    }

    fn train_teachers(&self, rec: &mut Record, dir: &Path) -> Result<()> {
        let tdir = dir.join("teachers");
        for spec in self.specs() {
            let mut rng = self.seed(rec, &format!("train-teachers/{}", spec.name));
            let mut env = self.env()?;
            let trained = train_teacher(&mut env, &spec, &self.cfg.training, &mut rng)?;
            self.write_net(rec, tdir.join(format!("{}.json", spec.name)), &trained.net)?;
            self.write_curve(rec, tdir.join(format!("{}_curve.csv", spec.name)), &trained.curve)?;
        }
        Ok(())
    }

    fn load_teachers(&self, rec: &mut Record, dir: &Path) -> Result<Vec<(XAppSpec, QNet)>> {
        self.specs()
            .into_iter()
            .map(|spec| {
                let path = self.require(rec, dir.join("teachers").join(format!("{}.json", spec.name)), Stage::TrainTeachers)?;
                let net = nn::io::load(&path, Some(&spec.layout))?;
                Ok((spec, net))
            })
            .collect()
    }

    fn collect(&self, rec: &mut Record, dir: &Path) -> Result<()> {
        let teachers: Vec<Teacher> = self
            .load_teachers(rec, dir)?
            .into_iter()
            .map(|(spec, net)| Teacher::Network { spec, net })
            .collect();
        let mut rng = self.seed(rec, "collect");
        let mut env = self.env()?;
        let buffer = collect_experience(&teachers, &mut env, self.cfg.distill.buffer_steps, &mut rng)?;
        self.write(rec, dir.join("buffer.bin"), &buffer.to_bytes()?)
    }

    fn distill(&self, rec: &mut Record, dir: &Path) -> Result<()> {
        let path = self.require(rec, dir.join("buffer.bin"), Stage::Collect)?;
        let buffer = ExperienceBuffer::load(&path)?;
        let mut rng = self.seed(rec, "distill");
        let spec = XAppSpec::distilled(&self.cfg.env);
        let layer = crate::nn::LayerSpec {
            input: buffer.obs_width,
            hidden: self.cfg.distill.hidden.clone(),
        };
        let mut student = QNet::init(layer, spec.layout.clone(), &mut rng)?;
        let report = distill(&buffer, &mut student, &self.cfg.distill, self.opts.exec, &mut rng)?;
        self.write_net(rec, dir.join("student.json"), &student)?;
        self.write(rec, dir.join("distill_loss.csv"), &loss_csv(&report)?)?;
        self.write(rec, dir.join("distill_agreement.csv"), &agreement_csv(&report)?)
    }

    fn run_eval(
        &self,
        rec: &mut Record,
        dir: &Path,
        scheme: &str,
        deployment: &Deployment,
        policy: &MitigationPolicy,
        mitigation: bool,
    ) -> Result<()> {
        let mut rng = self.seed(rec, EVAL_TAG);
        let mut env = self.env()?;
        let e = &self.cfg.eval;
        let run: EvalRun = evaluate_logged(deployment, &mut env, e.steps, policy, mitigation, e.write_rate_log, &mut rng)?;
        let r = rec.replicate.unwrap_or(0);
        let metrics = EvalMetrics::from_run(scheme, r, &run, &e.metric_spec()?)?;
        let edir = dir.join("eval");
        let [outage, hist, summary] = eval_prefix_files(scheme);
        self.write(rec, edir.join(outage), &metrics.outage_csv()?)?;
        self.write(rec, edir.join(hist), &metrics.histogram_csv()?)?;
        self.write(rec, edir.join(summary), &metrics.summary_csv()?)?;
        if e.write_rate_log {
            self.write(rec, edir.join(format!("{scheme}_rates.csv")), &rate_log_csv(&run)?)?;
            if let Some(log) = &run.arbitration {
                self.write(rec, edir.join(format!("{scheme}_arbitration.csv")), &csv_bytes(log)?)?;
            }
        }
        Ok(())
    }

    fn evaluate_distilled(&self, rec: &mut Record, dir: &Path) -> Result<()> {
        let spec = XAppSpec::distilled(&self.cfg.env);
        let path = self.require(rec, dir.join("student.json"), Stage::Distill)?;
        let net = nn::io::load(&path, Some(&spec.layout))?;
        let deployment = Deployment::single(spec, net);
        let mitigation = self.cfg.eval.distilled_mitigation;
        self.run_eval(rec, dir, SCHEME_DISTILLED, &deployment, &self.cfg.mitigation, mitigation)
    }

    fn baseline_individual(&self, rec: &mut Record, dir: &Path) -> Result<()> {
        let members = self.load_teachers(rec, dir)?;
        let deployment = Deployment::Individual { members };
        let policy = self.cfg.mitigation.clone();
        self.run_eval(rec, dir, SCHEME_INDIVIDUAL, &deployment, &policy, true)?;
        self.run_eval(rec, dir, SCHEME_INDIVIDUAL_REVERSED, &deployment, &policy.reversed(), true)
    }

    fn baseline_team(&self, rec: &mut Record, dir: &Path) -> Result<()> {
        let [s1, s2] = self.specs();
        let mut rng = self.seed(rec, "baseline-team");
        let mut env = self.env()?;
        let out = train_team(
            &mut env,
            [&s1, &s2],
            &self.cfg.training,
            &self.cfg.mitigation,
            TeamOptions::default(),
            &mut rng,
        )?;
        let tdir = dir.join("team");
        for ((spec, net), curve) in out.specs.iter().zip(&out.nets).zip(&out.curves) {
            self.write_net(rec, tdir.join(format!("{}.json", spec.name)), net)?;
            self.write_curve(rec, tdir.join(format!("{}_curve.csv", spec.name)), curve)?;
        }
        let [n1, n2] = out.nets;
        let deployment = Deployment::Team {
            members: [(s1, n1), (s2, n2)],
        };
        self.run_eval(rec, dir, SCHEME_TEAM, &deployment, &self.cfg.mitigation, true)
    }

    fn report(&self) -> Result<StageReport> {
        let mut rec = Record::new(Stage::Report, None);
        let mut rows: Vec<ReportRow> = Vec::new();
        for r in 0..self.cfg.eval.seeds {
            let edir = self.root.join(rep_dir_name(r)).join("eval");
            let mut files: Vec<(String, PathBuf)> = match std::fs::read_dir(&edir) {
                Ok(entries) => entries
                    .filter_map(|e| e.ok())
                    .filter_map(|e| {
                        let name = e.file_name().to_string_lossy().into_owned();
                        name.strip_suffix("_outage.csv").map(|s| (s.to_owned(), e.path()))
                    })
                    .collect(),
                Err(_) => Vec::new(),
            };
            files.sort();
            for (scheme, path) in files {
                let producer = match scheme.as_str() {
                    SCHEME_DISTILLED => Stage::Evaluate,
                    SCHEME_TEAM => Stage::BaselineTeam,
                    _ => Stage::BaselineIndividual,
                };
                let path = self.require(&mut rec, path, producer)?;
                let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::format(&path, e.to_string()))?;
                for point in reader.deserialize::<crate::metrics::OutagePoint>() {
                    let point = point.map_err(|e| Error::format(&path, e.to_string()))?;
                    rows.push(ReportRow {
                        scheme: scheme.clone(),
                        replicate: r,
                        threshold_mbps: point.threshold_mbps,
                        outage_pct: point.outage_pct,
                    });
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::MissingPrerequisite {
                path: self.root.join(rep_dir_name(0)).join("eval"),
                stage: Stage::Evaluate.name(),
            });
        }
        rows.sort_by(|a, b| {
            scheme_rank(&a.scheme)
                .cmp(&scheme_rank(&b.scheme))
                .then(a.replicate.cmp(&b.replicate))
                .then(a.threshold_mbps.total_cmp(&b.threshold_mbps))
        });
        let table = summarize(&rows);
        self.write(&mut rec, self.root.join("report_rows.csv"), &csv_bytes(&rows)?)?;
        self.write(&mut rec, self.root.join("report_summary.csv"), &table_csv(&table)?)?;
        let mut report = self.finish(rec, &self.root)?;
        report.table = Some(table);
        Ok(report)
    }
}

fn scheme_rank(s: &str) -> (usize, String) {
    let known = SCHEME_ORDER.iter().position(|&x| x == s).unwrap_or(SCHEME_ORDER.len());
    (known, s.to_owned())
}

/// Median outage per (threshold, scheme) across replicates.
pub fn summarize(rows: &[ReportRow]) -> ReportTable {
    let mut schemes: Vec<String> = Vec::new();
    let mut thresholds: Vec<f64> = Vec::new();
    for r in rows {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme.clone());
        }
        if !thresholds.contains(&r.threshold_mbps) {
            thresholds.push(r.threshold_mbps);
        }
    }
    schemes.sort_by_key(|s| scheme_rank(s));
    thresholds.sort_by(f64::total_cmp);
    let medians = thresholds
        .iter()
        .map(|&t| {
            schemes
                .iter()
                .map(|s| {
                    let xs: Vec<f64> = rows
                        .iter()
                        .filter(|r| &r.scheme == s && r.threshold_mbps == t)
                        .map(|r| r.outage_pct)
                        .collect();
                    median(&xs)
                })
                .collect()
        })
        .collect();
    ReportTable {
        schemes,
        thresholds_mbps: thresholds,
        medians,
    }
}

fn table_csv(t: &ReportTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["threshold_mbps".to_owned()];
    header.extend(t.schemes.iter().map(|s| format!("{s}_median_outage_pct")));
    w.write_record(&header)?;
    for (thr, row) in t.thresholds_mbps.iter().zip(&t.medians) {
        let mut rec = vec![fmt_f64(*thr)];
        rec.extend(row.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

/// Same textual form serde/csv uses for floats.
fn fmt_f64(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e16 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}

fn loss_csv(report: &DistillReport) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Row {
        epoch: usize,
        mean_kl: f64,
    }
    csv_bytes(report.epoch_loss.iter().enumerate().map(|(epoch, &mean_kl)| Row { epoch, mean_kl }))
}

fn agreement_csv(report: &DistillReport) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Row<'a> {
        phase: &'a str,
        head: &'a str,
        matches: usize,
        total: usize,
        ratio: f64,
    }
    let rows = [("before", &report.before), ("after", &report.after)]
        .into_iter()
        .flat_map(|(phase, a)| {
            a.heads.iter().map(move |h| Row {
                phase,
                head: &h.head,
                matches: h.matches,
                total: h.total,
                ratio: h.ratio(),
            })
        });
    csv_bytes(rows)
}

/// Read back a scheme's summary row for one replicate.
pub fn read_summary(root: &Path, replicate: usize, scheme: &str) -> Result<crate::metrics::SummaryRow> {
    let path = root
        .join(rep_dir_name(replicate))
        .join("eval")
        .join(format!("{scheme}_summary.csv"));
    if !path.is_file() {
        return Err(Error::MissingPrerequisite {
            path,
            stage: Stage::Evaluate.name(),
        });
    }
    let mut reader = csv::Reader::from_path(&path).map_err(|e| Error::format(&path, e.to_string()))?;
    reader
        .deserialize()
        .next()
        .ok_or_else(|| Error::format(&path, "empty summary"))?
        .map_err(|e| Error::format(&path, e.to_string()))
}
