//! End-to-end runs: measurement plan, simulated counts, violation curves and
//! parameter sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::ModeSpace;
use crate::certify::{cglmp, eof_bound_from_observations, witness};
use crate::config::RunConfig;
use crate::counting::{simulate_plan, CoincidenceTable, TableMetadata};
use crate::error::{Error, Result};
use crate::observations::{CountMode, Observations};
use crate::plan::{cglmp_setting_name, cglmp_settings, tomo_settings, witness_settings, Setting};
use crate::source::noisy_state;

/// Every setting the configuration asks for, with its trial count.
pub fn full_plan(cfg: &RunConfig) -> Result<Vec<(Setting, u64)>> {
    let d = cfg.source.d();
    let mut plan = Vec::new();
    for &space in &cfg.spaces {
        plan.extend(witness_settings(space, d)?.into_iter().map(|s| (s, cfg.trials.witness)));
    }
    for &b in &cfg.bell_dimensions {
        plan.extend(cglmp_settings(b, d)?.into_iter().map(|s| (s, cfg.trials.bell)));
    }
    for t in &cfg.tomography_pairs {
        let (j, k) = t.modes;
        plan.extend(tomo_settings(t.space, j, k, d)?.into_iter().map(|s| (s, cfg.trials.tomography)));
    }
    Ok(plan)
}

pub fn table_metadata(cfg: &RunConfig) -> TableMetadata {
    let mut extra = BTreeMap::new();
    extra.insert("P_bg_idler".to_string(), cfg.acquisition.p_bg_idler.into());
    TableMetadata {
        seed: cfg.seed,
        p_s: cfg.acquisition.p_s,
        eta_r: cfg.acquisition.eta_r,
        noise_fraction: cfg.source.noise_fraction(),
        repetition_rate_hz: cfg.repetition_rate_hz,
        d: cfg.source.d(),
        extra,
    }
}

/// Samples counts for the full plan. The result depends only on `cfg`.
pub fn simulate(cfg: &RunConfig) -> Result<CoincidenceTable> {
    cfg.validate()?;
    let plan = full_plan(cfg)?;
    let rho = noisy_state(&cfg.source);
    Ok(simulate_plan(&rho, &plan, &cfg.acquisition, cfg.seed)?.with_metadata(table_metadata(cfg)))
}

/// Expected counts of the full plan, or exact probabilities when `mode` is `None`.
pub fn expected_observations(cfg: &RunConfig, mode: Option<CountMode>) -> Result<Observations> {
    let plan = full_plan(cfg)?;
    let rho = noisy_state(&cfg.source);
    match mode {
        Some(m) => Observations::from_expected(&rho, &plan, &cfg.acquisition, m),
        None => {
            let settings: Vec<Setting> = plan.into_iter().map(|(s, _)| s).collect();
            Observations::from_model(&rho, &settings)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub d: usize,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "S_err")]
    pub s_err: f64,
    pub violated: bool,
}

/// CGLMP values for each `d` in `dims`.
pub fn violation_curve(obs: &Observations, dims: &[usize]) -> Result<Vec<CurveEntry>> {
    dims.iter()
        .map(|&d| {
            let r = cglmp(obs, d)?;
            Ok(CurveEntry { d, s: r.s, s_err: r.s_err, violated: r.violated })
        })
        .collect()
}

/// Dimensions whose four CGLMP settings are all present.
pub fn available_bell_dimensions(obs: &Observations, max_d: usize) -> Vec<usize> {
    (2..=max_d)
        .filter(|&d| (0..2).all(|s| (0..2).all(|i| obs.contains(&cglmp_setting_name(d, s, i)))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "noise_fraction")]
    NoiseFraction,
    #[serde(rename = "P_bg_idler")]
    BackgroundIdler,
    #[serde(rename = "eta_r")]
    EtaR,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::NoiseFraction => "noise_fraction",
            SweepParam::BackgroundIdler => "P_bg_idler",
            SweepParam::EtaR => "eta_r",
        }
    }

    fn apply(self, cfg: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut c = cfg.clone();
        match self {
            SweepParam::NoiseFraction => c.source = c.source.with_noise(value)?,
            SweepParam::BackgroundIdler => c.acquisition.p_bg_idler = value,
            SweepParam::EtaR => c.acquisition.eta_r = value,
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise_fraction" => Ok(SweepParam::NoiseFraction),
            "P_bg_idler" => Ok(SweepParam::BackgroundIdler),
            "eta_r" => Ok(SweepParam::EtaR),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep parameter {other:?} (expected noise_fraction, P_bg_idler or eta_r)"
            ))),
        }
    }
}

/// One grid point of a sweep, evaluated on expected counts of the X-space
/// witness plan and the configured CGLMP dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub w_raw: f64,
    pub w_subtracted: f64,
    pub certified_raw: usize,
    pub certified_subtracted: usize,
    pub e_f_subtracted: f64,
    pub s_raw: Vec<f64>,
    pub s_subtracted: Vec<f64>,
}

pub fn sweep(cfg: &RunConfig, param: SweepParam, grid: &[f64]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    let d = cfg.source.d();
    grid.par_iter()
        .map(|&value| {
            let c = param.apply(cfg, value)?;
            let rho = noisy_state(&c.source);
            let mut plan: Vec<(Setting, u64)> =
                witness_settings(ModeSpace::X, d)?.into_iter().map(|s| (s, c.trials.witness)).collect();
            for &b in &c.bell_dimensions {
                plan.extend(cglmp_settings(b, d)?.into_iter().map(|s| (s, c.trials.bell)));
            }
            let raw = Observations::from_expected(&rho, &plan, &c.acquisition, CountMode::Raw)?;
            let sub = Observations::from_expected(&rho, &plan, &c.acquisition, CountMode::Subtracted)?;
            let wr = witness(&raw, ModeSpace::X, d, c.margin)?;
            let ws = witness(&sub, ModeSpace::X, d, c.margin)?;
            let e_f = eof_bound_from_observations(&sub, ModeSpace::X, d, None).map(|r| r.e_f_lower).unwrap_or(f64::NAN);
            let curve = |o: &Observations| -> Result<Vec<f64>> {
                Ok(violation_curve(o, &c.bell_dimensions)?.into_iter().map(|e| e.s).collect())
            };
            Ok(SweepRow {
                value,
                w_raw: wr.w,
                w_subtracted: ws.w,
                certified_raw: wr.certified_dimension,
                certified_subtracted: ws.certified_dimension,
                e_f_subtracted: e_f,
                s_raw: curve(&raw)?,
                s_subtracted: curve(&sub)?,
            })
        })
        .collect()
}

/// Writes sweep rows as CSV with one `S{d}` column per Bell dimension.
pub fn write_sweep_csv<W: std::io::Write>(
    w: W,
    param: SweepParam,
    dims: &[usize],
    rows: &[SweepRow],
) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    let mut header = vec![
        param.as_str().to_string(),
        "W_raw".into(),
        "W_subtracted".into(),
        "certified_raw".into(),
        "certified_subtracted".into(),
        "E_F_subtracted".into(),
    ];
    header.extend(dims.iter().map(|d| format!("S{d}_raw")));
    header.extend(dims.iter().map(|d| format!("S{d}_subtracted")));
    out.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![
            r.value.to_string(),
            r.w_raw.to_string(),
            r.w_subtracted.to_string(),
            r.certified_raw.to_string(),
            r.certified_subtracted.to_string(),
            r.e_f_subtracted.to_string(),
        ];
        rec.extend(r.s_raw.iter().chain(&r.s_subtracted).map(|s| s.to_string()));
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{RAW_WITNESS_TARGET, SUBTRACTED_WITNESS_TARGET};
    use approx::assert_abs_diff_eq;

    fn small() -> RunConfig {
        let mut cfg = RunConfig::default_calibrated();
        cfg.source = crate::source::SourceConfig::uniform(4).unwrap().with_noise(0.05).unwrap();
        cfg.bell_dimensions = vec![2, 3, 4];
        cfg.tomography_pairs.iter_mut().for_each(|t| t.modes = (0, 3));
        cfg.trials.witness = 20_000;
        cfg.trials.bell = 20_000;
        cfg.trials.tomography = 20_000;
        cfg
    }

    #[test]
    fn plan_covers_every_experiment() {
        let cfg = RunConfig::default_calibrated();
        let plan = full_plan(&cfg).unwrap();
        assert_eq!(plan.len(), 2 * 135 + 9 * 4 + 2 * 9);
        let names: std::collections::HashSet<_> = plan.iter().map(|(s, _)| s.name.clone()).collect();
        assert_eq!(names.len(), plan.len());
    }

    #[test]
    fn simulate_is_reproducible_and_carries_metadata() {
        let cfg = small();
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        let m = a.metadata().unwrap();
        assert_eq!(m.seed, cfg.seed);
        assert_eq!(m.d, 4);
        assert_eq!(m.extra["P_bg_idler"], serde_json::json!(cfg.acquisition.p_bg_idler));
        let mut other = cfg.clone();
        other.seed += 1;
        assert_ne!(simulate(&other).unwrap().records(), a.records());
    }

    #[test]
    fn expected_default_reaches_targets() {
        let cfg = RunConfig::default_calibrated();
        let raw = expected_observations(&cfg, Some(CountMode::Raw)).unwrap();
        let sub = expected_observations(&cfg, Some(CountMode::Subtracted)).unwrap();
        assert_abs_diff_eq!(witness(&raw, ModeSpace::X, 10, 1.0).unwrap().w, RAW_WITNESS_TARGET, epsilon = 0.01);
        assert_abs_diff_eq!(witness(&sub, ModeSpace::X, 10, 1.0).unwrap().w, SUBTRACTED_WITNESS_TARGET, epsilon = 0.01);
        assert_eq!(available_bell_dimensions(&raw, 10), (2..=10).collect::<Vec<_>>());
    }

    #[test]
    fn noiseless_exact_curve_violates_everywhere() {
        let mut cfg = RunConfig::default_calibrated();
        cfg.source = cfg.source.with_noise(0.0).unwrap();
        let obs = expected_observations(&cfg, None).unwrap();
        let curve = violation_curve(&obs, &cfg.bell_dimensions).unwrap();
        assert!(curve.iter().all(|e| e.violated && e.s_err == 0.0));
    }

    #[test]
    fn sweep_is_monotone_in_noise() {
        let cfg = small();
        let grid: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let rows = sweep(&cfg, SweepParam::NoiseFraction, &grid).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].w_subtracted < w[0].w_subtracted);
            assert!(w[1].w_raw < w[0].w_raw);
            assert!(w[1].w_raw < w[1].w_subtracted);
        }
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, SweepParam::NoiseFraction, &cfg.bell_dimensions, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("noise_fraction,W_raw,W_subtracted,"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn sweep_param_parsing() {
        for p in [SweepParam::NoiseFraction, SweepParam::BackgroundIdler, SweepParam::EtaR] {
            assert_eq!(p.as_str().parse::<SweepParam>().unwrap(), p);
        }
        assert!("bogus".parse::<SweepParam>().is_err());
        assert!(sweep(&small(), SweepParam::NoiseFraction, &[1.5]).is_err());
    }
}
