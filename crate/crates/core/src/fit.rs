//! Solver configuration, convergence traces and the shared stopping loop.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Hyperparameters shared by every fit loop. Fields a solver does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Target inner dimension `K`.
    pub rank: usize,
    /// ℓ2 weight on the left factor (`W`, or `C1`/`C2` for Hadamard).
    pub lambda_w: f64,
    /// ℓ2 weight on the right factor (`Z`, or `D1`/`D2` for Hadamard).
    pub lambda_z: f64,
    /// Gradient step size for the Hadamard solvers.
    pub step: f64,
    /// Stopping threshold on the solver's native loss quantity.
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Worker threads for independent per-column/per-row solves; 1 runs inline.
    pub threads: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rank: 2,
            lambda_w: 0.0,
            lambda_z: 0.0,
            step: 1e-2,
            tol: 1e-10,
            max_iters: 500,
            seed: 0,
            threads: 1,
        }
    }
}

impl FitConfig {
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    IterationCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub loss: f64,
    pub elapsed_s: f64,
}

/// Per-iteration loss history. `records[t]` holds the loss after iteration `t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub initial_loss: f64,
    pub records: Vec<TraceRecord>,
    pub stop: StopReason,
}

impl ConvergenceTrace {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.loss)
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Loss sequence including the initial value.
    pub fn losses(&self) -> Vec<f64> {
        std::iter::once(self.initial_loss)
            .chain(self.records.iter().map(|r| r.loss))
            .collect()
    }

    /// `true` when no step raised the loss by more than `slack`.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.losses().windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// Outcome of one iteration: the quantity tested against the tolerance and
/// the value written to the trace (they differ only when a solver traces its
/// full objective).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Progress {
    pub stop: f64,
    pub traced: f64,
}

impl Progress {
    pub fn same(loss: f64) -> Self {
        Self {
            stop: loss,
            traced: loss,
        }
    }
}

/// `while stop > tol && iter < max_iters { iter += 1; step(iter) }`
pub(crate) fn run_loop(
    cfg: &FitConfig,
    initial: Progress,
    mut step: impl FnMut(usize) -> Result<Progress>,
) -> Result<ConvergenceTrace> {
    let start = Instant::now();
    let mut current = initial;
    let mut records = Vec::new();
    let mut iter = 0;
    while current.stop > cfg.tol && iter < cfg.max_iters {
        iter += 1;
        current = step(iter)?;
        records.push(TraceRecord {
            iter,
            loss: current.traced,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
    }
    let stop = if current.stop <= cfg.tol {
        StopReason::Tolerance
    } else {
        StopReason::IterationCap
    };
    Ok(ConvergenceTrace {
        initial_loss: initial.traced,
        records,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loop_stops_on_tolerance_or_cap() {
        let cfg = FitConfig {
            tol: 0.5,
            max_iters: 10,
            ..Default::default()
        };
        let mut loss = 4.0;
        let trace = run_loop(&cfg, Progress::same(loss), |_| {
            loss /= 2.0;
            Ok(Progress::same(loss))
        })
        .unwrap();
        assert_eq!(trace.iterations(), 3);
        assert_eq!(trace.stop, StopReason::Tolerance);
        assert_eq!(trace.records.iter().map(|r| r.iter).collect::<Vec<_>>(), vec![1, 2, 3]);

        let cfg = FitConfig {
            tol: 0.0,
            max_iters: 0,
            ..Default::default()
        };
        let trace = run_loop(&cfg, Progress::same(1.0), |_| unreachable!()).unwrap();
        assert_eq!(trace.stop, StopReason::IterationCap);
        assert!(trace.records.is_empty());
    }
}
