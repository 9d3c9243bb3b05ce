//! Monte Carlo trajectories.
//!
//! Trial `t` of a run with seed `s` draws from ChaCha8 seeded with `s` on
//! stream `t`, so results do not depend on thread count or scheduling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GbdpError, Result};
use crate::lattice::State;
use crate::model::{TransitionModel, Violation};

/// Cumulative one-step distributions, self move included.
#[derive(Debug, Clone)]
pub struct Sampler {
    table: Vec<Vec<(usize, f64)>>,
    absorbing: bool,
}

impl Sampler {
    /// Requires a structurally valid model whose rows sum to 1, or any
    /// deficit when the sink is enabled.
    pub fn new(model: &TransitionModel) -> Result<Self> {
        for v in model.validate() {
            let fatal = match v {
                Violation::MassDeficit { .. } => !model.absorbing(),
                _ => true,
            };
            if fatal {
                return Err(GbdpError::Domain(format!("model cannot be simulated: {v}")));
            }
        }
        let n = model.grid().len();
        let table = (0..n)
            .map(|u| {
                let mut acc = 0.0;
                let mut row = Vec::new();
                let d = model.self_prob(u);
                if d > 0.0 {
                    acc += d;
                    row.push((u, acc));
                }
                for (v, p) in model.moves(u) {
                    if p > 0.0 {
                        acc += p;
                        row.push((v, acc));
                    }
                }
                row
            })
            .collect();
        Ok(Sampler {
            table,
            absorbing: model.absorbing(),
        })
    }

    /// Next state, or `None` when the draw falls into the sink.
    pub fn step<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> Option<usize> {
        let x: f64 = rng.random();
        let row = &self.table[u];
        if let Some(&(v, _)) = row.iter().find(|(_, c)| x < *c) {
            return Some(v);
        }
        // Rows of a non-absorbing model sum to 1 within the mass tolerance; a draw
        // past the rounded total belongs to the last move.
        if self.absorbing {
            None
        } else {
            row.last().map(|&(v, _)| v)
        }
    }

    /// State after `k` steps, or `None` if absorbed on the way.
    pub fn run<R: Rng + ?Sized>(&self, u0: usize, k: usize, rng: &mut R) -> Option<usize> {
        let mut u = u0;
        for _ in 0..k {
            u = self.step(u, rng)?;
        }
        Some(u)
    }
}

/// One step from `u` with a caller-supplied random source.
pub fn step<R: Rng + ?Sized>(model: &TransitionModel, u: &State, rng: &mut R) -> Result<Option<State>> {
    let grid = model.grid();
    let idx = grid
        .index_of(u)
        .ok_or_else(|| GbdpError::Domain(format!("{u} is not a grid state")))?;
    let sampler = Sampler::new(model)?;
    Ok(sampler.step(idx, rng).map(|v| grid.state(v).clone()))
}

/// Endpoint counts of `trials` independent `k`-step trajectories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KStepCounts {
    /// Per state, grid index order.
    pub counts: Vec<u64>,
    pub absorbed: u64,
    pub trials: u64,
}

impl KStepCounts {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.trials as f64).collect()
    }

    pub fn absorbed_frequency(&self) -> f64 {
        self.absorbed as f64 / self.trials as f64
    }

    /// `½ Σ |f − p|` against an exact row (sink mass taken as `1 − Σ row`).
    pub fn total_variation(&self, exact_row: &[f64]) -> f64 {
        let f = self.frequencies();
        let sink = 1.0 - exact_row.iter().sum::<f64>();
        let body: f64 = f.iter().zip(exact_row).map(|(a, b)| (a - b).abs()).sum();
        0.5 * (body + (self.absorbed_frequency() - sink.max(0.0)).abs())
    }
}

pub fn empirical_kstep(
    model: &TransitionModel,
    u0: &State,
    k: usize,
    trials: u64,
    seed: u64,
) -> Result<KStepCounts> {
    if trials == 0 {
        return Err(GbdpError::Domain("trials must be positive".into()));
    }
    let grid = model.grid();
    let start = grid
        .index_of(u0)
        .ok_or_else(|| GbdpError::Domain(format!("{u0} is not a grid state")))?;
    let sampler = Sampler::new(model)?;
    let n = grid.len();
    let (counts, absorbed) = (0..trials)
        .into_par_iter()
        .fold(
            || (vec![0u64; n], 0u64),
            |(mut counts, mut absorbed), t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(t);
                match sampler.run(start, k, &mut rng) {
                    Some(v) => counts[v] += 1,
                    None => absorbed += 1,
                }
                (counts, absorbed)
            },
        )
        .reduce(
            || (vec![0u64; n], 0u64),
            |(mut a, x), (b, y)| {
                a.iter_mut().zip(b).for_each(|(p, q)| *p += q);
                (a, x + y)
            },
        );
    Ok(KStepCounts { counts, absorbed, trials })
}
