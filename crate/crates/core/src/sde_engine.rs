//! Seeded Euler–Maruyama simulation of the scalar and bivariate SDEs.
//!
//! Every path owns a ChaCha8 stream selected by `(seed, path_index)`; draws
//! within a path are consumed in step order, so an ensemble depends only on
//! `(seed, n_paths, grid)` and never on how rayon schedules the paths.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Once;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic_dists::std_normal_cdf;
use crate::error::{invalid, Result, SkewError};
use crate::skew_family::DriftSpec;

/// Environment variable capping the rayon worker count.
pub const THREADS_ENV: &str = "SKEWDIFF_THREADS";

/// Builds the global pool from `SKEWDIFF_THREADS` the first time it is called.
pub fn init_thread_pool() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    });
}

/// Uniform grid on `[t_start, t_end − ε]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub terminal_cutoff_epsilon: f64,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_steps: usize, terminal_cutoff_epsilon: f64) -> Result<Self> {
        let g = Self {
            t_start,
            t_end,
            n_steps,
            terminal_cutoff_epsilon,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid on `[0, t_end]` with no terminal cutoff.
    pub fn uniform(t_end: f64, n_steps: usize) -> Result<Self> {
        Self::new(0.0, t_end, n_steps, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start >= 0.0) || !self.t_end.is_finite() {
            return Err(invalid("t_start", "must be finite and non-negative"));
        }
        if self.n_steps == 0 {
            return Err(invalid("n_steps", "must be positive"));
        }
        if !(self.terminal_cutoff_epsilon >= 0.0) {
            return Err(invalid("terminal_cutoff_epsilon", "must be non-negative"));
        }
        if !(self.effective_end() > self.t_start) {
            return Err(invalid("t_end", "t_end − ε must exceed t_start"));
        }
        Ok(())
    }

    pub fn effective_end(&self) -> f64 {
        self.t_end - self.terminal_cutoff_epsilon
    }

    pub fn dt(&self) -> f64 {
        (self.effective_end() - self.t_start) / self.n_steps as f64
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.n_steps {
            self.effective_end()
        } else {
            self.t_start + step as f64 * self.dt()
        }
    }

    /// Index of the grid node closest to `t`.
    pub fn nearest_step(&self, t: f64) -> usize {
        let k = ((t - self.t_start) / self.dt()).round();
        (k.max(0.0) as usize).min(self.n_steps)
    }
}

/// Which grid nodes are kept in the ensemble.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recording {
    #[default]
    All,
    /// Every `k`-th step plus the final one.
    Every(usize),
    /// The listed steps (step 0 is always kept).
    Steps(Vec<usize>),
}

impl Recording {
    /// Keeps the nodes closest to the given times.
    pub fn at_times(grid: &TimeGrid, times: &[f64]) -> Self {
        Recording::Steps(times.iter().map(|&t| grid.nearest_step(t)).collect())
    }

    pub fn steps(&self, grid: &TimeGrid) -> Result<Vec<usize>> {
        let n = grid.n_steps;
        let mut s: Vec<usize> = match self {
            Recording::All => (0..=n).collect(),
            Recording::Every(k) => {
                if *k == 0 {
                    return Err(invalid("recording", "stride must be positive"));
                }
                let mut v: Vec<usize> = (0..=n).step_by(*k).collect();
                v.push(n);
                v
            }
            Recording::Steps(v) => {
                if let Some(&bad) = v.iter().find(|&&k| k > n) {
                    return Err(invalid("recording", format!("step {bad} exceeds n_steps {n}")));
                }
                let mut v = v.clone();
                v.push(0);
                v
            }
        };
        s.sort_unstable();
        s.dedup();
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Largest allowed `|μ·dt|` per step.
    #[serde(default = "default_clamp")]
    pub drift_clamp: f64,
    /// Pair path `2k+1` with the negated noise of path `2k`.
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default)]
    pub recording: Recording,
}

fn default_clamp() -> f64 {
    10.0
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            drift_clamp: default_clamp(),
            antithetic: false,
            recording: Recording::All,
        }
    }

    pub fn with_recording(mut self, recording: Recording) -> Self {
        self.recording = recording;
        self
    }

    pub fn with_clamp(mut self, drift_clamp: f64) -> Self {
        self.drift_clamp = drift_clamp;
        self
    }

    pub fn with_antithetic(mut self, antithetic: bool) -> Self {
        self.antithetic = antithetic;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(invalid("n_paths", "must be at least 1"));
        }
        if !(self.drift_clamp > 0.0) || !self.drift_clamp.is_finite() {
            return Err(invalid("drift_clamp", "must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
}

/// Simulated trajectories stored row-major, one row per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub seed: u64,
    pub scheme: Scheme,
    /// Grid step index of every stored column.
    pub steps: Vec<usize>,
    pub values: Vec<f64>,
    pub n_paths: usize,
    /// `±1` branch labels for mixtures.
    pub labels: Option<Vec<i8>>,
    pub clamp_events: u64,
}

impl PathEnsemble {
    pub fn n_cols(&self) -> usize {
        self.steps.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let c = self.n_cols();
        (0..self.n_paths).map(|i| self.values[i * c + j]).collect()
    }

    /// Times of the stored columns.
    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|&k| self.grid.time(k)).collect()
    }

    /// Column for grid step `step`, if it was recorded.
    pub fn at_step(&self, step: usize) -> Option<Vec<f64>> {
        self.steps.binary_search(&step).ok().map(|j| self.column(j))
    }

    /// Column recorded closest to time `t`.
    pub fn at_time(&self, t: f64) -> Vec<f64> {
        let j = self
            .times()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(j, _)| j)
            .unwrap_or(0);
        self.column(j)
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.column(self.n_cols() - 1)
    }

    /// Fraction of simulated steps whose drift increment was clamped.
    pub fn clamp_fraction(&self) -> f64 {
        self.clamp_events as f64 / (self.n_paths as f64 * self.grid.n_steps as f64)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "# skewdiff path ensemble")?;
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "# scheme=euler_maruyama")?;
        writeln!(
            w,
            "# grid={},{},{},{}",
            self.grid.t_start, self.grid.t_end, self.grid.n_steps, self.grid.terminal_cutoff_epsilon
        )?;
        writeln!(w, "# clamp_events={}", self.clamp_events)?;
        let steps: Vec<String> = self.steps.iter().map(|s| s.to_string()).collect();
        writeln!(w, "# steps={}", steps.join(","))?;
        let times: Vec<String> = self.times().iter().map(|t| format!("t={t}")).collect();
        writeln!(w, "path,label,{}", times.join(","))?;
        for i in 0..self.n_paths {
            let label = self.labels.as_ref().map(|l| l[i].to_string()).unwrap_or_default();
            write!(w, "{i},{label}")?;
            for v in self.path(i) {
                write!(w, ",{v:?}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut seed = None;
        let mut grid = None;
        let mut steps = None;
        let mut clamp_events = 0;
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut n_paths = 0;
        let mut header_seen = false;
        for line in BufReader::new(r).lines() {
            let line = line?;
            if let Some(meta) = line.strip_prefix("# ") {
                if let Some((k, v)) = meta.split_once('=') {
                    match k {
                        "seed" => seed = Some(parse_num::<u64>(v)?),
                        "clamp_events" => clamp_events = parse_num(v)?,
                        "steps" => {
                            steps = Some(v.split(',').map(parse_num::<usize>).collect::<Result<Vec<_>>>()?)
                        }
                        "grid" => {
                            let p: Vec<&str> = v.split(',').collect();
                            if p.len() != 4 {
                                return Err(SkewError::Format("grid line needs 4 fields".into()));
                            }
                            grid = Some(TimeGrid::new(
                                parse_num(p[0])?,
                                parse_num(p[1])?,
                                parse_num(p[2])?,
                                parse_num(p[3])?,
                            )?);
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                continue;
            }
            let mut fields = line.split(',');
            fields.next();
            let label = fields.next().unwrap_or("");
            if !label.is_empty() {
                labels.push(parse_num::<i8>(label)?);
            }
            for f in fields {
                values.push(parse_num::<f64>(f)?);
            }
            n_paths += 1;
        }
        let steps = steps.ok_or_else(|| SkewError::Format("missing steps metadata".into()))?;
        if values.len() != n_paths * steps.len() {
            return Err(SkewError::Format("row lengths do not match the step list".into()));
        }
        if !labels.is_empty() && labels.len() != n_paths {
            return Err(SkewError::Format("labels present on only some rows".into()));
        }
        Ok(Self {
            grid: grid.ok_or_else(|| SkewError::Format("missing grid metadata".into()))?,
            seed: seed.ok_or_else(|| SkewError::Format("missing seed metadata".into()))?,
            scheme: Scheme::EulerMaruyama,
            steps,
            values,
            n_paths,
            labels: (!labels.is_empty()).then_some(labels),
            clamp_events,
        })
    }

    /// Writes the `SKDF` binary layout (little-endian throughout).
    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        w.write_all(SKDF_MAGIC)?;
        w.write_all(&SKDF_VERSION.to_le_bytes())?;
        w.write_all(&(self.n_paths as u64).to_le_bytes())?;
        w.write_all(&(self.n_cols() as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.grid.t_start.to_le_bytes())?;
        w.write_all(&self.grid.t_end.to_le_bytes())?;
        w.write_all(&(self.grid.n_steps as u64).to_le_bytes())?;
        w.write_all(&self.grid.terminal_cutoff_epsilon.to_le_bytes())?;
        w.write_all(&self.clamp_events.to_le_bytes())?;
        w.write_all(&[u8::from(self.labels.is_some())])?;
        for &s in &self.steps {
            w.write_all(&(s as u64).to_le_bytes())?;
        }
        if let Some(l) = &self.labels {
            for &v in l {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SKDF_MAGIC {
            return Err(SkewError::Format("not an SKDF file".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        let version = u16::from_le_bytes(b2);
        if version != SKDF_VERSION {
            return Err(SkewError::Format(format!("unsupported SKDF version {version}")));
        }
        let n_paths = read_u64(&mut r)? as usize;
        let n_cols = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let t_start = read_f64(&mut r)?;
        let t_end = read_f64(&mut r)?;
        let n_steps = read_u64(&mut r)? as usize;
        let eps = read_f64(&mut r)?;
        let clamp_events = read_u64(&mut r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let steps = (0..n_cols)
            .map(|_| read_u64(&mut r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let labels = if flag[0] == 1 {
            let mut l = vec![0u8; n_paths];
            r.read_exact(&mut l)?;
            Some(l.into_iter().map(|b| b as i8).collect())
        } else {
            None
        };
        let values = (0..n_paths * n_cols)
            .map(|_| read_f64(&mut r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: TimeGrid::new(t_start, t_end, n_steps, eps)?,
            seed,
            scheme: Scheme::EulerMaruyama,
            steps,
            values,
            n_paths,
            labels,
            clamp_events,
        })
    }

    pub fn save(&self, path: &Path, binary: bool) -> Result<()> {
        let f = std::fs::File::create(path)?;
        if binary {
            self.write_binary(f)
        } else {
            self.write_csv(f)
        }
    }

    /// Reads either format, recognising `SKDF` by its magic bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(SKDF_MAGIC) {
            Self::read_binary(bytes.as_slice())
        } else {
            Self::read_csv(bytes.as_slice())
        }
    }
}

pub const SKDF_MAGIC: &[u8; 4] = b"SKDF";
pub const SKDF_VERSION: u16 = 1;

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| SkewError::Format(format!("cannot parse `{s}`")))
}

/// Generator for one path: stream `path` of the master seed.
pub fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Normal-draw source for a path; antithetic partners share a stream with flipped sign.
pub(crate) struct PathNoise {
    rng: ChaCha8Rng,
    sign: f64,
}

impl PathNoise {
    pub(crate) fn new(cfg: &SimConfig, path: usize, extra_sign: f64) -> Self {
        let (stream, sign) = if cfg.antithetic {
            (path / 2, if path % 2 == 1 { -1.0 } else { 1.0 })
        } else {
            (path, 1.0)
        };
        Self {
            rng: path_rng(cfg.seed, stream),
            sign: sign * extra_sign,
        }
    }

    #[inline]
    pub(crate) fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.sign * z
    }

    pub(crate) fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// One drift-clamped Euler–Maruyama increment; returns the new state and whether it clamped.
#[inline]
pub(crate) fn em_step(drift: &DriftSpec, x: f64, t: f64, dt: f64, sqrt_dt: f64, z: f64, clamp: f64) -> (f64, bool) {
    let inc = drift.eval(x, t) * dt;
    let (inc, clamped) = if inc.abs() > clamp || inc.is_nan() {
        (clamp.copysign(inc), true)
    } else {
        (inc, false)
    };
    (x + inc + drift.sigma * sqrt_dt * z, clamped)
}

pub(crate) struct PathOut {
    pub rows: Vec<Vec<f64>>,
    pub label: i8,
    pub clamps: u64,
}

/// Runs `f` over all paths in parallel and assembles `n_out` ensembles in path order.
pub(crate) fn run_paths<F>(grid: &TimeGrid, cfg: &SimConfig, n_out: usize, f: F) -> Result<Vec<PathEnsemble>>
where
    F: Fn(usize, &[usize]) -> Result<PathOut> + Sync,
{
    init_thread_pool();
    grid.validate()?;
    cfg.validate()?;
    let steps = cfg.recording.steps(grid)?;
    let outs: Vec<Result<PathOut>> = (0..cfg.n_paths).into_par_iter().map(|p| f(p, &steps)).collect();
    let n_cols = steps.len();
    let mut values: Vec<Vec<f64>> = (0..n_out).map(|_| Vec::with_capacity(cfg.n_paths * n_cols)).collect();
    let mut labels = Vec::with_capacity(cfg.n_paths);
    let mut clamps = 0;
    for out in outs {
        let out = out?;
        for (dst, row) in values.iter_mut().zip(out.rows) {
            dst.extend_from_slice(&row);
        }
        labels.push(out.label);
        clamps += out.clamps;
    }
    let has_labels = labels.iter().any(|&l| l != 0);
    Ok(values
        .into_iter()
        .map(|v| PathEnsemble {
            grid: *grid,
            seed: cfg.seed,
            scheme: Scheme::EulerMaruyama,
            steps: steps.clone(),
            values: v,
            n_paths: cfg.n_paths,
            labels: has_labels.then(|| labels.clone()),
            clamp_events: clamps,
        })
        .collect())
}

fn check_horizon(drift: &DriftSpec, grid: &TimeGrid) -> Result<()> {
    let h = drift.validity_horizon();
    // the drift is evaluated at the left end of each step
    let last = grid.time(grid.n_steps - 1);
    if !(last < h) || !(grid.effective_end() < h) {
        return Err(SkewError::HorizonViolation {
            t: grid.effective_end(),
            horizon: h,
        });
    }
    Ok(())
}

fn em_path(
    drift: &DriftSpec,
    x0: f64,
    grid: &TimeGrid,
    cfg: &SimConfig,
    steps: &[usize],
    path: usize,
    noise: &mut PathNoise,
) -> Result<(Vec<f64>, u64)> {
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut row = Vec::with_capacity(steps.len());
    let mut next = 0;
    let mut x = x0;
    let mut clamps = 0;
    for k in 0..=grid.n_steps {
        if steps.get(next) == Some(&k) {
            row.push(x);
            next += 1;
        }
        if k == grid.n_steps {
            break;
        }
        let (nx, c) = em_step(drift, x, grid.time(k), dt, sqrt_dt, noise.normal(), cfg.drift_clamp);
        if !nx.is_finite() {
            return Err(SkewError::NonFinite { path, step: k + 1 });
        }
        clamps += u64::from(c);
        x = nx;
    }
    Ok((row, clamps))
}

/// Euler–Maruyama paths of `dX = μ(X, t) dt + σ dW` started at `x0`.
pub fn simulate(drift: &DriftSpec, x0: f64, grid: &TimeGrid, cfg: &SimConfig) -> Result<PathEnsemble> {
    simulate_with_noise_sign(drift, x0, grid, cfg, 1.0)
}

/// As [`simulate`] but with every normal draw multiplied by `sign` (`±1`).
pub fn simulate_with_noise_sign(
    drift: &DriftSpec,
    x0: f64,
    grid: &TimeGrid,
    cfg: &SimConfig,
    sign: f64,
) -> Result<PathEnsemble> {
    check_horizon(drift, grid)?;
    let mut out = run_paths(grid, cfg, 1, |p, steps| {
        let mut noise = PathNoise::new(cfg, p, sign);
        let (row, clamps) = em_path(drift, x0, grid, cfg, steps, p, &mut noise)?;
        Ok(PathOut {
            rows: vec![row],
            label: 0,
            clamps,
        })
    })?;
    Ok(out.remove(0))
}

/// Brownian `X` and the partially correlated `Y` with `dY = ρ_t dX + √(1 − ρ_t²) dW₂`.
pub fn simulate_bivariate_censoring<F>(rho: F, grid: &TimeGrid, cfg: &SimConfig) -> Result<(PathEnsemble, PathEnsemble)>
where
    F: Fn(f64) -> f64 + Sync,
{
    for k in 0..grid.n_steps {
        let r = rho(grid.time(k));
        if !(r.abs() <= 1.0) {
            return Err(invalid("rho", format!("|rho({})| = {} exceeds 1", grid.time(k), r.abs())));
        }
    }
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut out = run_paths(grid, cfg, 2, |p, steps| {
        let mut noise = PathNoise::new(cfg, p, 1.0);
        let mut xs = Vec::with_capacity(steps.len());
        let mut ys = Vec::with_capacity(steps.len());
        let (mut x, mut y) = (0.0, 0.0);
        let mut next = 0;
        for k in 0..=grid.n_steps {
            if steps.get(next) == Some(&k) {
                xs.push(x);
                ys.push(y);
                next += 1;
            }
            if k == grid.n_steps {
                break;
            }
            let r = rho(grid.time(k));
            let dx = sqrt_dt * noise.normal();
            let z2 = noise.normal();
            x += dx;
            y += r * dx + (1.0 - r * r).sqrt() * sqrt_dt * z2;
        }
        Ok(PathOut {
            rows: vec![xs, ys],
            label: 0,
            clamps: 0,
        })
    })?;
    let y = out.pop().expect("two ensembles");
    let x = out.pop().expect("two ensembles");
    Ok((x, y))
}

/// Each path draws a label `+1` with probability `p_plus` and then follows the matching drift.
pub fn simulate_mixture(
    plus: &DriftSpec,
    minus: &DriftSpec,
    p_plus: f64,
    x0: f64,
    grid: &TimeGrid,
    cfg: &SimConfig,
) -> Result<PathEnsemble> {
    if !(0.0..=1.0).contains(&p_plus) {
        return Err(invalid("p_plus", format!("must lie in [0, 1], got {p_plus}")));
    }
    check_horizon(plus, grid)?;
    check_horizon(minus, grid)?;
    let mut out = run_paths(grid, cfg, 1, |p, steps| {
        let mut noise = PathNoise::new(cfg, p, 1.0);
        let label: i8 = if noise.uniform() < p_plus { 1 } else { -1 };
        let drift = if label == 1 { plus } else { minus };
        let (row, clamps) = em_path(drift, x0, grid, cfg, steps, p, &mut noise)?;
        Ok(PathOut {
            rows: vec![row],
            label,
            clamps,
        })
    })?;
    Ok(out.remove(0))
}

/// `(p₋, p₊)` with `p₊ = Φ(x0/√T)`, the weights that turn the `±` theorem1 pair into Brownian motion.
pub fn mixture_probability(x0: f64, horizon: f64) -> Result<(f64, f64)> {
    if !(horizon > 0.0) {
        return Err(invalid("T", "must be positive"));
    }
    let y = x0 / horizon.sqrt();
    Ok(complementary_pair(y))
}

/// `(Φ(−y), Φ(y))` computed so that the two entries sum to one.
pub(crate) fn complementary_pair(y: f64) -> (f64, f64) {
    if y >= 0.0 {
        let m = std_normal_cdf(-y);
        (m, 1.0 - m)
    } else {
        let p = std_normal_cdf(y);
        (1.0 - p, p)
    }
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Summary statistics of one recorded column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub negative_fraction: f64,
}

pub fn summarize(ens: &PathEnsemble) -> Vec<ColumnSummary> {
    ens.times()
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let c = ens.column(j);
            let (mean, variance) = mean_var(&c);
            let n = c.len() as f64;
            let m3 = c.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
            let skewness = if variance > 0.0 { m3 / variance.powf(1.5) } else { 0.0 };
            let negative_fraction = c.iter().filter(|&&x| x < 0.0).count() as f64 / n;
            ColumnSummary {
                t,
                mean,
                variance,
                skewness,
                negative_fraction,
            }
        })
        .collect()
}
