//! Subcommand implementations. Each returns the rendered rows and a file stem.

use std::f64::consts::PI;

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Serialize;

use l2dyn::integrate::propagate;
use l2dyn::melnikov::{
    hill_melnikov_derivative_with_tol, hill_tip_orbit_with, melnikov_derivative_with_tol, melnikov_with_tol,
    MelnikovForm, Parity,
};
use l2dyn::models::symmetry_s;
use l2dyn::normalform::twist_for_model;
use l2dyn::orbits::{find_mu_sequence_with, homoclinic_with, lapunov, HomoclinicOrbit, MuK};
use l2dyn::{ModelId, PhaseState};

use crate::config::RunConfig;
use crate::CliError;

/// Reference homoclinic masses for the tabulated wave counts.
pub const TABULATED_MASSES: [(usize, f64); 10] = [
    (2, 0.4253863522e-2),
    (3, 0.6752539971e-3),
    (4, 0.2192936884e-3),
    (10, 0.92907436e-5),
    (11, 0.68212830e-5),
    (12, 0.51549632e-5),
    (50, 0.582146e-7),
    (60, 0.336890e-7),
    (70, 0.212152e-7),
    (200, 0.9096e-9),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RowLabel {
    Index(usize),
    Name(&'static str),
}

/// Shared schema of the twist and slope tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub k: Option<RowLabel>,
    pub mu: Option<f64>,
    pub a22: Option<f64>,
    pub mu23_a22: Option<f64>,
    #[serde(rename = "dMdt0")]
    pub dmdt0: Option<f64>,
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    pub tail_bound: Option<f64>,
}

impl TableRow {
    fn twist(k: Option<RowLabel>, mu: Option<f64>, a22: f64, scaled: f64) -> Self {
        Self { k, mu, a22: Some(a22), mu23_a22: Some(scaled), dmdt0: None, horizon: None, tail_bound: None }
    }
}

fn pool(cfg: &RunConfig) -> anyhow::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().context("starting worker pool")
}

/// Runs `f` on every item with `cfg.workers` threads; results keep the input order.
fn parallel<T: Sync, R: Send>(
    cfg: &RunConfig,
    items: &[T],
    f: impl Fn(&T) -> Result<R, CliError> + Sync + Send,
) -> Result<Vec<Result<R, CliError>>, CliError> {
    let pool = pool(cfg).map_err(CliError::Numerical)?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Splits per-row results, reporting failures on standard error.
fn collect_rows<R>(results: Vec<Result<R, CliError>>, what: &str) -> (Vec<R>, Option<CliError>) {
    let mut rows = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(v) => rows.push(v),
            Err(e) => {
                eprintln!("{what}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    (rows, first_err)
}

pub struct Rendered<T> {
    pub stem: String,
    pub rows: Vec<T>,
    /// Set when some rows could not be computed; the others are still written.
    pub partial_failure: Option<CliError>,
}

pub fn table1(cfg: &RunConfig, ks: &[usize], mus: &[f64]) -> Result<Rendered<TableRow>, CliError> {
    let mut jobs: Vec<(Option<RowLabel>, f64)> = Vec::new();
    for &k in ks {
        let mu = TABULATED_MASSES
            .iter()
            .find(|(kk, _)| *kk == k)
            .map(|&(_, m)| m)
            .ok_or_else(|| CliError::Config(anyhow!("no tabulated mass for k = {k}")))?;
        jobs.push((Some(RowLabel::Index(k)), mu));
    }
    jobs.extend(mus.iter().map(|&m| (None, m)));
    let results = parallel(cfg, &jobs, |&(k, mu)| {
        let t = twist_for_model(&ModelId::circular(mu)?)?;
        Ok(TableRow::twist(k, Some(mu), t.a22, t.mu_scaled.unwrap_or(f64::NAN)))
    })?;
    let (mut rows, partial_failure) = collect_rows(results, "table1 row");
    let hill = twist_for_model(&ModelId::Hill)?.a22;
    rows.push(TableRow::twist(Some(RowLabel::Name("hill")), None, hill, hill));
    Ok(Rendered { stem: "table1".into(), rows, partial_failure })
}

fn sequence(cfg: &RunConfig, k_max: usize) -> Result<Vec<MuK>, CliError> {
    Ok(find_mu_sequence_with(k_max, cfg.residual_tol, &cfg.shoot_settings())?)
}

fn orbit_for(cfg: &RunConfig, k: usize, mu: Option<f64>) -> Result<HomoclinicOrbit, CliError> {
    let mu = match mu {
        Some(m) => m,
        None => sequence(cfg, k)?.last().map(|m| m.mu).ok_or_else(|| anyhow!("no mass found for k = {k}"))?,
    };
    Ok(homoclinic_with(mu, k, &cfg.shoot_settings())?)
}

pub fn table2(cfg: &RunConfig) -> Result<Rendered<TableRow>, CliError> {
    let seq = sequence(cfg, cfg.k_max)?;
    let wanted: Vec<MuK> = seq.into_iter().filter(|m| m.k >= cfg.k_min).collect();
    let results = parallel(cfg, &wanted, |m| {
        let h = homoclinic_with(m.mu, m.k, &cfg.shoot_settings())?;
        let r = melnikov_derivative_with_tol(&h, cfg.quad_tol)?;
        let t = twist_for_model(&h.model())?;
        Ok(TableRow {
            k: Some(RowLabel::Index(m.k)),
            mu: Some(m.mu),
            a22: Some(t.a22),
            mu23_a22: t.mu_scaled,
            dmdt0: Some(r.value),
            horizon: Some(r.horizon),
            tail_bound: Some(r.tail_bound),
        })
    })?;
    let (rows, partial_failure) = collect_rows(results, "table2 row");
    Ok(Rendered { stem: "table2".into(), rows, partial_failure })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HillRow {
    pub parity: Parity,
    pub tip_index: usize,
    pub value: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub tail_bound: f64,
}

pub fn hill_limit(cfg: &RunConfig, parities: &[Parity]) -> Result<Rendered<HillRow>, CliError> {
    let results = parallel(cfg, parities, |&parity| {
        let o = hill_tip_orbit_with(parity, cfg.tip_index, &cfg.hill_settings())?;
        let r = hill_melnikov_derivative_with_tol(&o, cfg.quad_tol)?;
        Ok(HillRow { parity, tip_index: cfg.tip_index, value: r.value, horizon: r.horizon, tail_bound: r.tail_bound })
    })?;
    let (rows, partial_failure) = collect_rows(results, "hill-limit row");
    Ok(Rendered { stem: "hill_limit".into(), rows, partial_failure })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl OrbitRow {
    fn new(t: f64, s: &PhaseState) -> Self {
        Self { t, x: s.x, y: s.y, px: s.px, py: s.py }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomoclinicSummary {
    pub mu: f64,
    pub k: usize,
    pub residual: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub crossing_state: PhaseState,
    pub offset_delta: f64,
}

pub enum OrbitExport<S> {
    Samples(Vec<OrbitRow>),
    Summary(S),
}

/// Samples of the unstable half on [-T, 0], followed by its mirror image when `full` is set.
pub fn homoclinic(
    cfg: &RunConfig,
    k: usize,
    mu: Option<f64>,
    full: bool,
) -> Result<(String, OrbitExport<HomoclinicSummary>), CliError> {
    let h = orbit_for(cfg, k, mu)?;
    let stem = format!("homoclinic_k{k}");
    if cfg.format == crate::config::Format::Json {
        return Ok((
            stem,
            OrbitExport::Summary(HomoclinicSummary {
                mu: h.mu,
                k: h.k,
                residual: h.residual,
                horizon: h.horizon(),
                crossing_state: h.crossing_state,
                offset_delta: h.offset_delta,
            }),
        ));
    }
    let half = &h.unstable_half;
    let mut rows: Vec<OrbitRow> =
        half.times.iter().zip(&half.states).map(|(&t, y)| OrbitRow::new(t, &PhaseState::from_vec(y))).collect();
    if full {
        let mirrored: Vec<OrbitRow> = rows
            .iter()
            .rev()
            .skip(1)
            .map(|r| OrbitRow::new(-r.t, &symmetry_s(&PhaseState::new(r.x, r.y, r.px, r.py))))
            .collect();
        rows.extend(mirrored);
    }
    Ok((stem, OrbitExport::Samples(rows)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelChoice {
    Hill,
    Circular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LapunovSummary {
    pub model: ModelId,
    pub energy_offset: f64,
    pub period: f64,
    pub frequency: f64,
    pub amplitude: f64,
    pub initial_state: PhaseState,
    pub correction_residual: f64,
}

pub fn lapunov_orbit(
    cfg: &RunConfig,
    model: ModelChoice,
    mu: Option<f64>,
    energy_offset: f64,
) -> Result<(String, OrbitExport<LapunovSummary>), CliError> {
    let model = match (model, mu) {
        (ModelChoice::Hill, None) => ModelId::Hill,
        (ModelChoice::Hill, Some(_)) => return Err(CliError::Config(anyhow!("--mu does not apply to the Hill model"))),
        (ModelChoice::Circular, Some(m)) => ModelId::circular(m)?,
        (ModelChoice::Circular, None) => return Err(CliError::Config(anyhow!("the circular model needs --mu"))),
    };
    let o = lapunov(&model, energy_offset, None)?;
    let stem = "lapunov".to_string();
    if cfg.format == crate::config::Format::Json {
        return Ok((
            stem,
            OrbitExport::Summary(LapunovSummary {
                model,
                energy_offset,
                period: o.period,
                frequency: o.frequency(),
                amplitude: o.amplitude,
                initial_state: o.initial_state,
                correction_residual: o.correction_residual,
            }),
        ));
    }
    let tr = propagate(&model, &o.initial_state, 0.0, o.period, cfg.tol)?;
    let rows = tr.rows().map(|r| OrbitRow { t: r[0], x: r[1], y: r[2], px: r[3], py: r[4] }).collect();
    Ok((stem, OrbitExport::Samples(rows)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub t0: f64,
    #[serde(rename = "M")]
    pub value: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
}

pub struct SweepGrid {
    pub t0_min: f64,
    pub t0_max: f64,
    pub points: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { t0_min: -PI, t0_max: PI, points: 65 }
    }
}

pub fn melnikov_sweep(
    cfg: &RunConfig,
    k: usize,
    mu: Option<f64>,
    grid: &SweepGrid,
    form: MelnikovForm,
) -> Result<Rendered<SweepRow>, CliError> {
    if grid.points < 2 || grid.t0_max.partial_cmp(&grid.t0_min) != Some(std::cmp::Ordering::Greater) {
        return Err(CliError::Config(anyhow!("sweep needs at least 2 points on a nonempty interval")));
    }
    if !matches!(form, MelnikovForm::Bracket | MelnikovForm::Potential) {
        return Err(CliError::Config(anyhow!("sweep form must be bracket or potential")));
    }
    let h = orbit_for(cfg, k, mu)?;
    let step = (grid.t0_max - grid.t0_min) / (grid.points - 1) as f64;
    let times: Vec<f64> = (0..grid.points).map(|i| grid.t0_min + step * i as f64).collect();
    let results = parallel(cfg, &times, |&t0| {
        let r = melnikov_with_tol(&h, t0, form, cfg.quad_tol)?;
        Ok(SweepRow { t0, value: r.value, quad_error: r.quad_error, tail_bound: r.tail_bound })
    })?;
    let (rows, partial_failure) = collect_rows(results, "sweep point");
    Ok(Rendered { stem: format!("melnikov_sweep_k{k}"), rows, partial_failure })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuRow {
    pub k: usize,
    pub mu: f64,
    pub residual: f64,
    pub wave_count: usize,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub crossing_x: f64,
    pub crossing_y: f64,
    pub crossing_px: f64,
    pub crossing_py: f64,
}

pub fn mu_k(cfg: &RunConfig, k: Option<usize>) -> Result<Rendered<MuRow>, CliError> {
    let (lo, hi) = match k {
        Some(k) if k < 2 => return Err(CliError::Config(anyhow!("k must be at least 2, got {k}"))),
        Some(k) => (k, k),
        None => (cfg.k_min, cfg.k_max),
    };
    let rows = sequence(cfg, hi)?
        .into_iter()
        .filter(|m| m.k >= lo)
        .map(|m| MuRow {
            k: m.k,
            mu: m.mu,
            residual: m.residual,
            wave_count: m.wave_count,
            horizon: m.flight_time,
            crossing_x: m.crossing.x,
            crossing_y: m.crossing.y,
            crossing_px: m.crossing.px,
            crossing_py: m.crossing.py,
        })
        .collect();
    Ok(Rendered { stem: "mu_k".into(), rows, partial_failure: None })
}
