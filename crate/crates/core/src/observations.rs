//! Per-setting outcome tables fed to the certification routines. Cells hold
//! either exact probabilities, raw coincidence counts or
//! accidental-subtracted counts, each with a variance.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::counting::{expected_setting, subtract_accidentals, Acquisition, CoincidenceTable};
use crate::error::{Error, Result};
use crate::linalg::OutcomeModel;
use crate::plan::Setting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMode {
    Raw,
    Subtracted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationKind {
    Probabilities,
    Raw,
    Subtracted,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cell {
    pub value: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SettingData {
    /// Trials behind the cells (1 for probabilities).
    pub trials: f64,
    pub cells: BTreeMap<(usize, usize), Cell>,
}

impl SettingData {
    pub fn cell(&self, a: usize, b: usize) -> Option<Cell> {
        self.cells.get(&(a, b)).copied()
    }

    pub fn total(&self) -> f64 {
        self.cells.values().map(|c| c.value).sum()
    }

    /// Dense `ns × ni` table of values; every cell must be present.
    pub fn dense(&self, name: &str, ns: usize, ni: usize) -> Result<Vec<Vec<Cell>>> {
        let mut out = vec![vec![Cell::default(); ni]; ns];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, c) in row.iter_mut().enumerate() {
                *c = self
                    .cell(a, b)
                    .ok_or_else(|| Error::MissingData(format!("setting {name} lacks outcome ({a}, {b})")))?;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    kind: ObservationKind,
    settings: HashMap<String, SettingData>,
}

impl Observations {
    pub fn kind(&self) -> ObservationKind {
        self.kind
    }

    pub fn get(&self, name: &str) -> Option<&SettingData> {
        self.settings.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&SettingData> {
        self.get(name).ok_or_else(|| Error::MissingData(format!("no data for setting {name}")))
    }

    /// Fails with one error listing every absent setting.
    pub fn require_all<S: AsRef<str>>(&self, names: impl IntoIterator<Item = S>) -> Result<()> {
        let missing: Vec<String> =
            names.into_iter().filter(|n| !self.contains(n.as_ref())).map(|n| n.as_ref().to_string()).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingData(format!("settings missing: {}", missing.join(", "))))
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.settings.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.settings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.settings.is_empty()
    }

    /// Exact outcome probabilities, zero variance.
    pub fn from_model(model: &dyn OutcomeModel, settings: &[Setting]) -> Result<Self> {
        let mut out = HashMap::new();
        for s in settings {
            let mut data = SettingData { trials: 1.0, cells: BTreeMap::new() };
            for (a, u) in s.signal.vectors().iter().enumerate() {
                for (b, v) in s.idler.vectors().iter().enumerate() {
                    let p = model.joint_probability(u, v)?;
                    data.cells.insert((a, b), Cell { value: p, variance: 0.0 });
                }
            }
            out.insert(s.name.clone(), data);
        }
        Ok(Self { kind: ObservationKind::Probabilities, settings: out })
    }

    /// Expected counts with Poisson variances, i.e. what an infinitely
    /// repeated acquisition would average to.
    pub fn from_expected(model: &dyn OutcomeModel, plan: &[(Setting, u64)], acq: &Acquisition, mode: CountMode) -> Result<Self> {
        let mut out = HashMap::new();
        for (s, n) in plan {
            let mut data = SettingData { trials: *n as f64, cells: BTreeMap::new() };
            for c in expected_setting(model, s, *n, acq)? {
                let cell = match mode {
                    CountMode::Raw => Cell { value: c.coincidences(), variance: c.coincidences() },
                    CountMode::Subtracted => {
                        let (sg, id, nn) = (c.singles_s, c.singles_i, c.trials);
                        Cell {
                            value: c.coincidences() - sg * id / nn,
                            variance: c.coincidences() + (sg * id * id + sg * sg * id) / (nn * nn),
                        }
                    }
                };
                data.cells.insert((c.outcome_s, c.outcome_i), cell);
            }
            out.insert(s.name.clone(), data);
        }
        Ok(Self { kind: mode.into(), settings: out })
    }

    pub fn from_table(table: &CoincidenceTable, mode: CountMode) -> Result<Self> {
        let mut out: HashMap<String, SettingData> = HashMap::new();
        for r in table.records() {
            let cell = match mode {
                CountMode::Raw => Cell { value: r.coincidences as f64, variance: r.coincidences as f64 },
                CountMode::Subtracted => {
                    let c = subtract_accidentals(r)?;
                    Cell { value: c.value, variance: c.std_error * c.std_error }
                }
            };
            let data = out
                .entry(r.setting.clone())
                .or_insert_with(|| SettingData { trials: r.trials as f64, cells: BTreeMap::new() });
            if data.trials != r.trials as f64 {
                return Err(Error::InvalidArgument(format!("setting {} has inconsistent trial counts", r.setting)));
            }
            data.cells.insert((r.outcome_s, r.outcome_i), cell);
        }
        Ok(Self { kind: mode.into(), settings: out })
    }
}

impl From<CountMode> for ObservationKind {
    fn from(m: CountMode) -> Self {
        match m {
            CountMode::Raw => ObservationKind::Raw,
            CountMode::Subtracted => ObservationKind::Subtracted,
        }
    }
}
