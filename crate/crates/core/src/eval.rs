//! Robustness sweep over relative mass × action-perturbation probability.
//!
//! The frozen actor flies `episodes_per_cell` episodes in every cell of the
//! grid. Each episode owns a random stream keyed by the sweep seed and its
//! `(mass, delta, episode)` indices, so cells can run in any order or in
//! parallel and still produce the same numbers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::agent::act;
use crate::env::{env_step, observe, reset, EnvConfig, EpisodeState, PerturbConfig};
use crate::error::{Error, Result};
use crate::nn::MlpParams;
use crate::rng::{self, domain, StreamRng};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PerturbGrid {
    pub mass_ratios: Vec<f64>,
    pub deltas: Vec<f64>,
    pub episodes_per_cell: u32,
}

impl Default for PerturbGrid {
    fn default() -> Self {
        Self {
            mass_ratios: vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
            deltas: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5],
            episodes_per_cell: 10,
        }
    }
}

impl PerturbGrid {
    pub fn validate(&self) -> Result<()> {
        if self.mass_ratios.is_empty()
            || !self.mass_ratios.iter().all(|&m| m.is_finite() && m > 0.0)
        {
            return Err(Error::config(
                "grid.mass_ratios",
                "need at least one ratio, all > 0",
            ));
        }
        if self.deltas.is_empty() || !self.deltas.iter().all(|d| (0.0..=1.0).contains(d)) {
            return Err(Error::config(
                "grid.deltas",
                "need at least one value, all in [0, 1]",
            ));
        }
        if self.episodes_per_cell < 1 {
            return Err(Error::config("grid.episodes_per_cell", "must be >= 1"));
        }
        Ok(())
    }

    /// Row-major cell list (mass ratio outer, delta inner).
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::with_capacity(self.mass_ratios.len() * self.deltas.len());
        for mass_index in 0..self.mass_ratios.len() {
            for delta_index in 0..self.deltas.len() {
                out.push(Cell {
                    mass_index,
                    delta_index,
                });
            }
        }
        out
    }

    pub fn perturbation(&self, cell: Cell) -> PerturbConfig {
        PerturbConfig {
            mass_ratio: self.mass_ratios[cell.mass_index],
            delta: self.deltas[cell.delta_index],
        }
    }

    pub fn same_axes(&self, other: &PerturbGrid) -> bool {
        self.mass_ratios == other.mass_ratios && self.deltas == other.deltas
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub mass_index: usize,
    pub delta_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub returns: Vec<f64>,
}

/// Mean episode return per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub grid: PerturbGrid,
    /// `mass_ratios.len() × deltas.len()`, row-major.
    pub mean_returns: Vec<f64>,
    /// Per-episode returns, same cell order as `mean_returns`.
    pub per_cell_returns: Vec<Vec<f64>>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

impl Heatmap {
    pub fn rows(&self) -> usize {
        self.grid.mass_ratios.len()
    }

    pub fn cols(&self) -> usize {
        self.grid.deltas.len()
    }

    pub fn mean(&self, mass_index: usize, delta_index: usize) -> f64 {
        self.mean_returns[mass_index * self.cols() + delta_index]
    }

    /// Builds a heatmap from cell results delivered in any order.
    pub fn assemble(grid: PerturbGrid, results: Vec<CellResult>) -> Result<Heatmap> {
        let cols = grid.deltas.len();
        let n = grid.mass_ratios.len() * cols;
        let mut per_cell: Vec<Option<Vec<f64>>> = vec![None; n];
        for r in results {
            let Cell {
                mass_index,
                delta_index,
            } = r.cell;
            if mass_index >= grid.mass_ratios.len() || delta_index >= cols {
                return Err(Error::GridMismatch(format!(
                    "cell {mass_index},{delta_index} outside the grid"
                )));
            }
            if r.returns.is_empty() {
                return Err(Error::GridMismatch(format!(
                    "cell {mass_index},{delta_index} has no episodes"
                )));
            }
            per_cell[mass_index * cols + delta_index] = Some(r.returns);
        }
        let per_cell_returns = per_cell
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| {
                    Error::GridMismatch(format!("cell {},{} missing", i / cols, i % cols))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mean_returns = per_cell_returns.iter().map(|r| mean(r)).collect();
        Ok(Heatmap {
            grid,
            mean_returns,
            per_cell_returns,
        })
    }
}

/// Undiscounted return of one noise-free episode from a freshly sampled
/// initial state. Resets and perturbations both draw from `rng`.
pub fn episode_return<R: Rng + ?Sized>(
    policy: &MlpParams,
    perturb: &PerturbConfig,
    env: &EnvConfig,
    rng: &mut R,
) -> Result<f64> {
    let quad = reset(&env.task, rng);
    let mut state = EpisodeState::new(quad, &env.quad);
    let mut obs = observe(&quad, &env.task);
    let mut total = 0.0;
    loop {
        let a = act(policy, &obs)?;
        let out = env_step(&state, &a, perturb, env, rng);
        total += out.reward;
        if out.done {
            return Ok(total);
        }
        state = out.next;
        obs = out.obs;
    }
}

/// Random stream of one sweep episode.
pub fn episode_stream(seed: u64, cell: Cell, episode: u32) -> StreamRng {
    let cell_key = ((cell.mass_index as u64) << 32) | cell.delta_index as u64;
    rng::stream(seed, domain::SWEEP, cell_key, u64::from(episode))
}

pub fn run_cell(
    policy: &MlpParams,
    grid: &PerturbGrid,
    cell: Cell,
    env: &EnvConfig,
    seed: u64,
) -> Result<CellResult> {
    let perturb = grid.perturbation(cell);
    let returns = (0..grid.episodes_per_cell)
        .map(|e| episode_return(policy, &perturb, env, &mut episode_stream(seed, cell, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CellResult { cell, returns })
}

/// Sequential sweep over every cell.
pub fn sweep(
    policy: &MlpParams,
    grid: &PerturbGrid,
    env: &EnvConfig,
    seed: u64,
) -> Result<Heatmap> {
    grid.validate()?;
    let results = grid
        .cells()
        .into_iter()
        .map(|c| run_cell(policy, grid, c, env, seed))
        .collect::<Result<Vec<_>>>()?;
    Heatmap::assemble(grid.clone(), results)
}

/// Values over a mass-ratio × delta grid, row-major (mass ratio outer).
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub mass_ratios: Vec<f64>,
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
}

impl ReturnMatrix {
    pub fn new(mass_ratios: Vec<f64>, deltas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mass_ratios.len() * deltas.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}×{} grid",
                values.len(),
                mass_ratios.len(),
                deltas.len()
            )));
        }
        Ok(Self {
            mass_ratios,
            deltas,
            values,
        })
    }

    pub fn get(&self, mass_index: usize, delta_index: usize) -> f64 {
        self.values[mass_index * self.deltas.len() + delta_index]
    }

    pub fn same_axes(&self, other: &ReturnMatrix) -> bool {
        self.mass_ratios == other.mass_ratios && self.deltas == other.deltas
    }

    fn describe(&self) -> alloc::string::String {
        format!("masses {:?} × deltas {:?}", self.mass_ratios, self.deltas)
    }
}

impl Heatmap {
    pub fn matrix(&self) -> ReturnMatrix {
        ReturnMatrix {
            mass_ratios: self.grid.mass_ratios.clone(),
            deltas: self.grid.deltas.clone(),
            values: self.mean_returns.clone(),
        }
    }
}

/// Cellwise difference `robust − baseline` and the share of cells where the
/// robust policy is strictly better.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub difference: ReturnMatrix,
    pub wins: usize,
    pub win_fraction: f64,
}

pub fn compare(robust: &ReturnMatrix, baseline: &ReturnMatrix) -> Result<Comparison> {
    if !robust.same_axes(baseline) || robust.values.len() != baseline.values.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {}",
            robust.describe(),
            baseline.describe()
        )));
    }
    let pairs = robust.values.iter().zip(&baseline.values);
    let values: Vec<f64> = pairs.clone().map(|(a, b)| a - b).collect();
    let wins = pairs.filter(|(a, b)| a > b).count();
    Ok(Comparison {
        win_fraction: wins as f64 / values.len() as f64,
        difference: ReturnMatrix {
            mass_ratios: robust.mass_ratios.clone(),
            deltas: robust.deltas.clone(),
            values,
        },
        wins,
    })
}
