//! A batch-enabled work-stealing thread pool.
//!
//! Tasks are submitted in batches: each submission is split into one
//! sub-batch per worker (batch size = ceil(total / workers)), so a large
//! task set never floods the pool with per-task scheduling overhead.
//! A worker that drains its own deque steals the whole remaining
//! sub-batch of the first non-empty victim, so skewed task durations do
//! not leave workers idle.

use std::collections::VecDeque;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

type Job = Box<dyn FnOnce() + Send + 'static>;

#[derive(Debug, PartialEq, Eq)]
pub enum PoolError {
    /// A pool must have at least one worker.
    ZeroWorkers,
    /// A task panicked. All tasks of the batch were still drained before
    /// this error was returned; `index` is the lowest failing task index.
    TaskPanicked { index: usize, message: String },
}

impl std::fmt::Display for PoolError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PoolError::ZeroWorkers => write!(f, "thread pool needs at least one worker"),
            PoolError::TaskPanicked { index, message } => {
                write!(f, "task {index} panicked: {message}")
            }
        }
    }
}

impl std::error::Error for PoolError {}

struct Shared {
    queues: Vec<Mutex<VecDeque<Job>>>,
    /// Jobs queued but not yet claimed by a worker.
    queued: AtomicUsize,
    sleep_lock: Mutex<()>,
    wakeup: Condvar,
    shutdown: AtomicBool,
    executed: Vec<AtomicU64>,
}

pub struct Pool {
    shared: Arc<Shared>,
    handles: Vec<JoinHandle<()>>,
    workers: usize,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Pool, PoolError> {
        if workers == 0 {
            return Err(PoolError::ZeroWorkers);
        }
        let shared = Arc::new(Shared {
            queues: (0..workers).map(|_| Mutex::new(VecDeque::new())).collect(),
            queued: AtomicUsize::new(0),
            sleep_lock: Mutex::new(()),
            wakeup: Condvar::new(),
            shutdown: AtomicBool::new(false),
            executed: (0..workers).map(|_| AtomicU64::new(0)).collect(),
        });
        let handles = (0..workers)
            .map(|i| {
                let shared = Arc::clone(&shared);
                std::thread::Builder::new()
                    .name(format!("vflow-worker-{i}"))
                    .spawn(move || worker_loop(i, &shared))
                    .expect("spawn pool worker")
            })
            .collect();
        Ok(Pool {
            shared,
            handles,
            workers,
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Lifetime count of tasks executed per worker, in worker order.
    pub fn worker_task_counts(&self) -> Vec<u64> {
        self.shared
            .executed
            .iter()
            .map(|c| c.load(Ordering::Relaxed))
            .collect()
    }

    /// Run a batch of tasks and return their results indexed by
    /// submission order. Blocks until every task has run exactly once.
    pub fn submit_batch<T, F>(&self, tasks: Vec<F>) -> Result<Vec<T>, PoolError>
    where
        T: Send + 'static,
        F: FnOnce() -> T + Send + 'static,
    {
        let total = tasks.len();
        if total == 0 {
            return Ok(Vec::new());
        }
        let (tx, rx) = mpsc::channel::<(usize, Result<T, String>)>();
        let jobs: Vec<Job> = tasks
            .into_iter()
            .enumerate()
            .map(|(index, task)| {
                let tx = tx.clone();
                let job: Job = Box::new(move || {
                    let outcome = panic::catch_unwind(AssertUnwindSafe(task))
                        .map_err(|payload| panic_message(payload.as_ref()));
                    // The receiver outlives every job of this batch.
                    let _ = tx.send((index, outcome));
                });
                job
            })
            .collect();
        drop(tx);

        // One sub-batch per worker; the last one may be short.
        let batch_size = total.div_ceil(self.workers);
        let mut jobs = jobs.into_iter();
        for worker in 0..self.workers {
            let chunk: Vec<Job> = jobs.by_ref().take(batch_size).collect();
            if chunk.is_empty() {
                break;
            }
            let mut queue = self.shared.queues[worker].lock().unwrap();
            queue.extend(chunk);
        }
        self.shared.queued.fetch_add(total, Ordering::SeqCst);
        self.shared.wakeup.notify_all();

        let mut slots: Vec<Option<T>> = (0..total).map(|_| None).collect();
        let mut first_panic: Option<(usize, String)> = None;
        for _ in 0..total {
            let (index, outcome) = rx
                .recv()
                .expect("pool worker dropped a task result channel");
            match outcome {
                Ok(value) => slots[index] = Some(value),
                Err(message) => match &first_panic {
                    Some((i, _)) if *i <= index => {}
                    _ => first_panic = Some((index, message)),
                },
            }
        }
        if let Some((index, message)) = first_panic {
            return Err(PoolError::TaskPanicked { index, message });
        }
        Ok(slots
            .into_iter()
            .map(|slot| slot.expect("every task reported a result"))
            .collect())
    }
}

impl Drop for Pool {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        self.shared.wakeup.notify_all();
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
    }
}

fn worker_loop(me: usize, shared: &Shared) {
    loop {
        if let Some(job) = claim_job(me, shared) {
            shared.queued.fetch_sub(1, Ordering::SeqCst);
            // Counted before the result is sent so counters are settled
            // once submit_batch has drained the batch.
            shared.executed[me].fetch_add(1, Ordering::SeqCst);
            job();
            continue;
        }
        if shared.shutdown.load(Ordering::SeqCst) {
            return;
        }
        let guard = shared.sleep_lock.lock().unwrap();
        if shared.queued.load(Ordering::SeqCst) == 0 && !shared.shutdown.load(Ordering::SeqCst) {
            // Re-checked under the lock; timed wait guards against a
            // missed notify between the check and the wait.
            let _ = shared
                .wakeup
                .wait_timeout(guard, std::time::Duration::from_millis(20));
        }
    }
}

fn claim_job(me: usize, shared: &Shared) -> Option<Job> {
    if let Some(job) = shared.queues[me].lock().unwrap().pop_front() {
        return Some(job);
    }
    let n = shared.queues.len();
    for step in 1..n {
        let victim = (me + step) % n;
        let mut stolen = {
            let mut queue = shared.queues[victim].lock().unwrap();
            if queue.is_empty() {
                continue;
            }
            std::mem::take(&mut *queue)
        };
        // Whole sub-batch steal: run the head, keep the rest locally.
        let job = stolen.pop_front();
        if !stolen.is_empty() {
            let mut own = shared.queues[me].lock().unwrap();
            own.append(&mut stolen);
        }
        if job.is_some() {
            return job;
        }
    }
    None
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "task panicked".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::sync::atomic::AtomicU32;
    use std::time::Duration;

    #[test]
    fn zero_workers_rejected() {
        match Pool::new(0) {
            Err(PoolError::ZeroWorkers) => {}
            _ => panic!("expected ZeroWorkers error"),
        }
    }

    #[test]
    fn hundred_tasks_each_exactly_once() {
        let pool = Pool::new(4).unwrap();
        let hits = Arc::new((0..100).map(|_| AtomicU32::new(0)).collect::<Vec<_>>());
        let tasks: Vec<_> = (0..100)
            .map(|i| {
                let hits = Arc::clone(&hits);
                move || {
                    hits[i].fetch_add(1, Ordering::SeqCst);
                    i
                }
            })
            .collect();
        let results = pool.submit_batch(tasks).unwrap();
        assert_eq!(results, (0..100).collect::<Vec<_>>());
        assert!(hits.iter().all(|h| h.load(Ordering::SeqCst) == 1));
    }

    #[test]
    fn single_worker_matches_sequential_fold() {
        let pool = Pool::new(1).unwrap();
        let tasks: Vec<_> = (0..50).map(|i| move || i * 2).collect();
        let results = pool.submit_batch(tasks).unwrap();
        assert_eq!(results, (0..50).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn empty_batch_is_fine() {
        let pool = Pool::new(2).unwrap();
        let results: Vec<u8> = pool.submit_batch(Vec::<fn() -> u8>::new()).unwrap();
        assert!(results.is_empty());
    }

    #[test]
    fn skewed_durations_still_use_every_worker() {
        let pool = Pool::new(4).unwrap();
        // Front-loaded skew: early tasks are the slow ones.
        let tasks: Vec<_> = (0..200)
            .map(|i| {
                move || {
                    let ms = if i < 50 { 4 } else { 1 };
                    std::thread::sleep(Duration::from_millis(ms));
                    i
                }
            })
            .collect();
        let results = pool.submit_batch(tasks).unwrap();
        assert_eq!(results.len(), 200);
        let counts = pool.worker_task_counts();
        assert!(
            counts.iter().all(|&c| c >= 1),
            "idle worker despite 200 tasks: {counts:?}"
        );
        assert_eq!(counts.iter().sum::<u64>(), 200);
    }

    #[test]
    fn panic_reported_after_draining() {
        let pool = Pool::new(3).unwrap();
        let ran = Arc::new(AtomicU32::new(0));
        let tasks: Vec<Box<dyn FnOnce() -> u32 + Send>> = (0..20)
            .map(|i| {
                let ran = Arc::clone(&ran);
                let task: Box<dyn FnOnce() -> u32 + Send> = Box::new(move || {
                    if i == 3 {
                        panic!("boom {i}");
                    }
                    ran.fetch_add(1, Ordering::SeqCst);
                    i
                });
                task
            })
            .collect();
        match pool.submit_batch(tasks) {
            Err(PoolError::TaskPanicked { index, message }) => {
                assert_eq!(index, 3);
                assert!(message.contains("boom"));
            }
            other => panic!("expected panic error, got {other:?}"),
        }
        // All non-panicking tasks still ran.
        assert_eq!(ran.load(Ordering::SeqCst), 19);
        // The pool stays usable afterwards.
        let results = pool.submit_batch((0..8).map(|i| move || i).collect::<Vec<_>>());
        assert_eq!(results.unwrap(), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn randomized_delays_keep_results_stable() {
        let pool = Pool::new(4).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..5 {
            let delays: Vec<u64> = (0..64).map(|_| rng.gen_range(0..3)).collect();
            let tasks: Vec<_> = delays
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    move || {
                        if d > 0 {
                            std::thread::sleep(Duration::from_millis(d));
                        }
                        i as u64
                    }
                })
                .collect();
            let results = pool.submit_batch(tasks).unwrap();
            assert_eq!(results, (0..64).collect::<Vec<u64>>());
        }
    }
}
