use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rq_core::env::EnvConfig;
use rq_core::eval::{run_cell, Heatmap, PerturbGrid};
use rq_core::nn::MlpParams;

/// [`rq_core::eval::sweep`] spread over `threads` workers. Cells draw from
/// their own random streams, so the result does not depend on scheduling.
pub fn parallel_sweep(
    policy: &MlpParams,
    grid: &PerturbGrid,
    env: &EnvConfig,
    seed: u64,
    threads: usize,
) -> rq_core::Result<Heatmap> {
    grid.validate()?;
    let cells = grid.cells();
    let next = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(cells.len()));
    let failure = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, cells.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&cell) = cells.get(i) else { break };
                match run_cell(policy, grid, cell, env, seed) {
                    Ok(r) => results.lock().unwrap().push(r),
                    Err(e) => {
                        failure.lock().unwrap().get_or_insert(e);
                        next.store(cells.len(), Ordering::Relaxed);
                    }
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Heatmap::assemble(grid.clone(), results.into_inner().unwrap())
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rq_core::agent::NetConfig;
    use rq_core::rng::{self, domain};

    #[test]
    fn thread_count_does_not_change_the_heatmap() {
        let net = NetConfig {
            actor_hidden: vec![8],
            ..Default::default()
        };
        let policy = MlpParams::init(
            net.policy_shape(),
            0.5,
            &mut rng::stream(2, domain::INIT_ACTOR, 0, 0),
        )
        .unwrap();
        let grid = PerturbGrid {
            mass_ratios: vec![0.5, 1.0, 2.0],
            deltas: vec![0.0, 0.5],
            episodes_per_cell: 2,
        };
        let env = EnvConfig::default();
        let serial = rq_core::eval::sweep(&policy, &grid, &env, 8).unwrap();
        for threads in [1, 3, 8] {
            assert_eq!(
                parallel_sweep(&policy, &grid, &env, 8, threads).unwrap(),
                serial
            );
        }
    }
}
