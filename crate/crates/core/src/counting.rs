//! Photon-counting model, coincidence tables and their CSV form.
//!
//! Per heralding trial the signal photon is emitted with probability `P_S`,
//! the stored idler is retrieved with efficiency `η_r`, and the idler
//! detector fires on background light with probability `P_bg`. True
//! coincidences therefore have mean `N P_S η_r P(a,b)`, accidentals
//! `N P_S P_s(a) P_I P_i(b)` with `P_I = η_r P_S + P_bg`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::OutcomeModel;
use crate::plan::Setting;
use crate::rng::{poisson, stream_rng};

pub const CSV_HEADER: [&str; 7] = [
    "setting",
    "outcome_s",
    "outcome_i",
    "coincidences",
    "singles_s",
    "singles_i",
    "trials",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting: String,
    pub outcome_s: usize,
    pub outcome_i: usize,
    pub coincidences: u64,
    pub singles_s: u64,
    pub singles_i: u64,
    pub trials: u64,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("record {}/{}/{}: {msg}", self.setting, self.outcome_s, self.outcome_i)));
        if self.setting.is_empty() {
            return bad("empty setting name".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.coincidences > self.singles_s.min(self.singles_i) {
            return bad(format!(
                "coincidences {} exceed singles ({}, {})",
                self.coincidences, self.singles_s, self.singles_i
            ));
        }
        if self.singles_s > self.trials || self.singles_i > self.trials {
            return bad("singles exceed trials".into());
        }
        Ok(())
    }

    fn key(&self) -> (String, usize, usize) {
        (self.setting.clone(), self.outcome_s, self.outcome_i)
    }
}

/// Acquisition parameters shared by every setting of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    #[serde(rename = "P_S")]
    pub p_s: f64,
    pub eta_r: f64,
    #[serde(rename = "P_bg_idler")]
    pub p_bg_idler: f64,
}

impl Acquisition {
    pub fn new(p_s: f64, eta_r: f64, p_bg_idler: f64) -> Result<Self> {
        let a = Self { p_s, eta_r, p_bg_idler };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("P_S", self.p_s), ("eta_r", self.eta_r), ("P_bg_idler", self.p_bg_idler)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.p_i() + self.eta_r > 1.0 {
            return Err(Error::InvalidArgument("eta_r + P_I exceeds 1".into()));
        }
        Ok(())
    }

    /// Total idler click probability per trial.
    pub fn p_i(&self) -> f64 {
        self.eta_r * self.p_s + self.p_bg_idler
    }
}

/// Expected counts for one outcome pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedCell {
    pub outcome_s: usize,
    pub outcome_i: usize,
    pub true_coincidences: f64,
    pub accidentals: f64,
    pub singles_s: f64,
    pub singles_i: f64,
    pub trials: f64,
}

impl ExpectedCell {
    pub fn coincidences(&self) -> f64 {
        self.true_coincidences + self.accidentals
    }
}

pub fn expected_setting(model: &dyn OutcomeModel, setting: &Setting, trials: u64, acq: &Acquisition) -> Result<Vec<ExpectedCell>> {
    let n = trials as f64;
    let ps: Vec<f64> = setting.signal.vectors().iter().map(|p| model.signal_marginal(p)).collect::<Result<_>>()?;
    let pi: Vec<f64> = setting.idler.vectors().iter().map(|p| model.idler_marginal(p)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(ps.len() * pi.len());
    for (a, u) in setting.signal.vectors().iter().enumerate() {
        for (b, v) in setting.idler.vectors().iter().enumerate() {
            let p = model.joint_probability(u, v)?;
            out.push(ExpectedCell {
                outcome_s: a,
                outcome_i: b,
                true_coincidences: n * acq.p_s * acq.eta_r * p,
                accidentals: n * acq.p_s * ps[a] * acq.p_i() * pi[b],
                singles_s: n * acq.p_s * ps[a],
                singles_i: n * acq.p_i() * pi[b],
                trials: n,
            });
        }
    }
    Ok(out)
}

/// Poisson realisation of one setting. Singles are built on top of the
/// coincidences that share their outcome, so `C_SI ≤ min(C_S, C_I)` holds
/// by construction.
pub fn simulate_setting(model: &dyn OutcomeModel, setting: &Setting, trials: u64, acq: &Acquisition, seed: u64) -> Result<Vec<CountRecord>> {
    acq.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument(format!("setting {}: trials must be positive", setting.name)));
    }
    let cells = expected_setting(model, setting, trials, acq)?;
    let ns = setting.signal.len();
    let ni = setting.idler.len();
    let ls: Vec<String> = setting.signal.vectors().iter().map(|p| p.label().to_string()).collect();
    let li: Vec<String> = setting.idler.vectors().iter().map(|p| p.label().to_string()).collect();
    let name = setting.name.as_str();
    let coinc: Vec<u64> = cells
        .iter()
        .map(|c| {
            let mut rng = stream_rng(seed, &["coinc", name, &ls[c.outcome_s], &li[c.outcome_i]]);
            poisson(&mut rng, c.coincidences()).min(trials)
        })
        .collect();

    let mut singles_s = vec![0u64; ns];
    for a in 0..ns {
        let row = &cells[a * ni..(a + 1) * ni];
        let shared: u64 = coinc[a * ni..(a + 1) * ni].iter().sum();
        let extra_mean = row[0].singles_s - row.iter().map(ExpectedCell::coincidences).sum::<f64>();
        let mut rng = stream_rng(seed, &["singles_s", name, &ls[a]]);
        singles_s[a] = (shared + poisson(&mut rng, extra_mean.max(0.0))).min(trials);
    }
    let mut singles_i = vec![0u64; ni];
    for b in 0..ni {
        let shared: u64 = (0..ns).map(|a| coinc[a * ni + b]).sum();
        let extra_mean = cells[b].singles_i - (0..ns).map(|a| cells[a * ni + b].coincidences()).sum::<f64>();
        let mut rng = stream_rng(seed, &["singles_i", name, &li[b]]);
        singles_i[b] = (shared + poisson(&mut rng, extra_mean.max(0.0))).min(trials);
    }

    Ok(cells
        .iter()
        .zip(coinc)
        .map(|(c, k)| CountRecord {
            setting: setting.name.clone(),
            outcome_s: c.outcome_s,
            outcome_i: c.outcome_i,
            coincidences: k.min(singles_s[c.outcome_s]).min(singles_i[c.outcome_i]),
            singles_s: singles_s[c.outcome_s],
            singles_i: singles_i[c.outcome_i],
            trials,
        })
        .collect())
}

/// Simulates every setting in parallel; the result is independent of the
/// number of worker threads.
pub fn simulate_plan(model: &dyn OutcomeModel, plan: &[(Setting, u64)], acq: &Acquisition, seed: u64) -> Result<CoincidenceTable> {
    let parts: Vec<Vec<CountRecord>> = plan
        .par_iter()
        .map(|(s, n)| simulate_setting(model, s, *n, acq, seed))
        .collect::<Result<_>>()?;
    CoincidenceTable::from_records(parts.into_iter().flatten().collect())
}

/// Accidental-subtracted coincidences and their standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corrected {
    pub value: f64,
    pub std_error: f64,
}

/// `C' = C_SI − C_S C_I / N`, with
/// `σ² = C_SI + (C_S C_I/N)² (1/C_S + 1/C_I)`. Negative values are kept.
pub fn subtract_accidentals(r: &CountRecord) -> Result<Corrected> {
    if r.trials == 0 {
        return Err(Error::InvalidArgument(format!("setting {}: trials must be positive", r.setting)));
    }
    let (c, s, i, n) = (r.coincidences as f64, r.singles_s as f64, r.singles_i as f64, r.trials as f64);
    let acc = s * i / n;
    // (S I / N)² (1/S + 1/I) written without the divisions
    let var = c + (s * i * i + s * s * i) / (n * n);
    Ok(Corrected { value: c - acc, std_error: var.sqrt() })
}

/// Sidecar metadata stored next to a count file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub seed: u64,
    #[serde(rename = "P_S")]
    pub p_s: f64,
    pub eta_r: f64,
    pub noise_fraction: f64,
    pub repetition_rate_hz: f64,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl TableMetadata {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("P_S", self.p_s), ("eta_r", self.eta_r), ("noise_fraction", self.noise_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("metadata {name} = {v} outside [0, 1]")));
            }
        }
        if !(self.repetition_rate_hz > 0.0) {
            return Err(Error::InvalidArgument("metadata repetition_rate_hz must be positive".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidArgument("metadata D must be positive".into()));
        }
        Ok(())
    }
}

/// Validated collection of count records, unique per
/// `(setting, outcome_s, outcome_i)`, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoincidenceTable {
    records: Vec<CountRecord>,
    index: HashMap<(String, usize, usize), usize>,
    metadata: Option<TableMetadata>,
}

impl CoincidenceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<CountRecord>) -> Result<Self> {
        let mut t = Self::new();
        for r in records {
            t.push(r)?;
        }
        Ok(t)
    }

    pub fn push(&mut self, r: CountRecord) -> Result<()> {
        r.validate()?;
        self.insert(r)
    }

    fn insert(&mut self, r: CountRecord) -> Result<()> {
        let key = r.key();
        if self.index.contains_key(&key) {
            return Err(Error::InvalidArgument(format!(
                "duplicate record for setting {} outcomes ({}, {})",
                key.0, key.1, key.2
            )));
        }
        self.index.insert(key, self.records.len());
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[CountRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn metadata(&self) -> Option<&TableMetadata> {
        self.metadata.as_ref()
    }

    pub fn with_metadata(mut self, meta: TableMetadata) -> Self {
        self.metadata = Some(meta);
        self
    }

    pub fn get(&self, setting: &str, outcome_s: usize, outcome_i: usize) -> Option<&CountRecord> {
        self.index
            .get(&(setting.to_string(), outcome_s, outcome_i))
            .map(|&i| &self.records[i])
    }

    /// Setting names in first-seen order.
    pub fn settings(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.setting.as_str()))
            .map(|r| r.setting.as_str())
            .collect()
    }

    pub fn setting_records(&self, setting: &str) -> Vec<&CountRecord> {
        self.records.iter().filter(|r| r.setting == setting).collect()
    }

    /// Combines two tables. Records present in both (same setting and
    /// outcomes) are accumulated: counts and trials add. Metadata of `self` wins.
    pub fn merge(&self, other: &CoincidenceTable) -> Result<Self> {
        let mut out = self.clone();
        for r in &other.records {
            match out.index.get(&r.key()) {
                Some(&i) => {
                    let m = &mut out.records[i];
                    m.coincidences += r.coincidences;
                    m.singles_s += r.singles_s;
                    m.singles_i += r.singles_i;
                    m.trials += r.trials;
                    m.validate()?;
                }
                None => out.push(r.clone())?,
            }
        }
        if out.metadata.is_none() {
            out.metadata = other.metadata.clone();
        }
        Ok(out)
    }

    /// Parametric bootstrap replica: every count is redrawn from a Poisson
    /// with the observed value as mean. Singles shared between records of
    /// the same setting and outcome are redrawn once.
    pub fn poisson_resample(&self, seed: u64, replica: usize) -> Self {
        let tag = replica.to_string();
        let mut singles: HashMap<(&str, char, usize), u64> = HashMap::new();
        let mut out = Self { metadata: self.metadata.clone(), ..Self::default() };
        for r in &self.records {
            let a = *singles.entry((&r.setting, 's', r.outcome_s)).or_insert_with(|| {
                poisson(&mut stream_rng(seed, &["boot", &tag, &r.setting, "s", &r.outcome_s.to_string()]), r.singles_s as f64)
            });
            let b = *singles.entry((&r.setting, 'i', r.outcome_i)).or_insert_with(|| {
                poisson(&mut stream_rng(seed, &["boot", &tag, &r.setting, "i", &r.outcome_i.to_string()]), r.singles_i as f64)
            });
            let c = poisson(
                &mut stream_rng(seed, &["boot", &tag, &r.setting, "c", &r.outcome_s.to_string(), &r.outcome_i.to_string()]),
                r.coincidences as f64,
            );
            let rec = CountRecord { coincidences: c, singles_s: a, singles_i: b, ..r.clone() };
            out.insert(rec).expect("keys copied from a valid table");
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wr.write_record(CSV_HEADER).map_err(csv_io)?;
        for r in &self.records {
            wr.write_record([
                r.setting.clone(),
                r.outcome_s.to_string(),
                r.outcome_i.to_string(),
                r.coincidences.to_string(),
                r.singles_s.to_string(),
                r.singles_i.to_string(),
                r.trials.to_string(),
            ])
            .map_err(csv_io)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers().map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?.clone();
        let names: Vec<&str> = header.iter().map(str::trim).collect();
        if let Some(unknown) = names.iter().find(|n| !CSV_HEADER.contains(n)) {
            return Err(Error::Parse { line: 1, msg: format!("unknown column {unknown:?}") });
        }
        if let Some(missing) = CSV_HEADER.iter().find(|n| !names.contains(n)) {
            return Err(Error::Parse { line: 1, msg: format!("missing column {missing:?}") });
        }
        if names.len() != CSV_HEADER.len() {
            return Err(Error::Parse { line: 1, msg: "duplicate column".into() });
        }
        let col = |name: &str| names.iter().position(|n| *n == name).expect("checked above");
        let idx: Vec<usize> = CSV_HEADER.iter().map(|n| col(n)).collect();

        let mut table = Self::new();
        for (row, rec) in rd.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            let field = |i: usize| rec.get(idx[i]).unwrap_or("").trim();
            let int = |i: usize| -> Result<u64> {
                field(i).parse::<u64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("column {} is not a non-negative integer: {:?}", CSV_HEADER[i], field(i)),
                })
            };
            let r = CountRecord {
                setting: field(0).to_string(),
                outcome_s: int(1)? as usize,
                outcome_i: int(2)? as usize,
                coincidences: int(3)?,
                singles_s: int(4)?,
                singles_i: int(5)?,
                trials: int(6)?,
            };
            table.push(r).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        }
        Ok(table)
    }

    /// Writes the CSV and, if present, the metadata sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(fs::File::create(path)?)?;
        if let Some(meta) = &self.metadata {
            let text = serde_json::to_string_pretty(meta)?;
            fs::write(metadata_path(path), text + "\n")?;
        }
        Ok(())
    }

    /// Reads a count file and its sidecar when one exists.
    pub fn load(path: &Path) -> Result<Self> {
        let mut table = Self::read_csv(fs::File::open(path)?)?;
        let meta_path = metadata_path(path);
        if meta_path.exists() {
            let meta: TableMetadata = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
            meta.validate()?;
            table.metadata = Some(meta);
        }
        Ok(table)
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// `counts.csv` → `counts.meta.json`.
pub fn metadata_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}
