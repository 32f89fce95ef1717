//! One single-writer learner thread per training run. Session handlers read
//! the published policy snapshot and enqueue finished episodes.

use serde::{Deserialize, Serialize};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::JoinHandle;

use ddq::policy::{Experience, QNetwork};
use ddq::trainer::{Trainer, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub run: usize,
    pub variant: Variant,
    pub k: usize,
    pub label: String,
    /// Completed epochs, one per committed human dialogue.
    pub epoch: usize,
    pub sessions_committed: usize,
    pub successes: usize,
    pub real_buffer: usize,
    pub simulated_buffer: usize,
    /// Episodes queued but not yet learned from.
    pub queued: usize,
    /// Hash of the current policy parameters.
    pub policy_fingerprint: String,
    pub last_error: Option<String>,
}

/// A read-only policy published after an epoch.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: usize,
    pub policy: Arc<QNetwork>,
}

enum Job {
    Episode { experiences: Vec<Experience>, success: bool },
    Flush(Sender<()>),
}

#[derive(Debug)]
struct Shared {
    snapshot: RwLock<Snapshot>,
    status: Mutex<RunStatus>,
}

#[derive(Debug)]
pub struct RunHandle {
    shared: Arc<Shared>,
    sender: Mutex<Option<Sender<Job>>>,
    thread: Mutex<Option<JoinHandle<()>>>,
}

impl RunHandle {
    pub fn spawn(run: usize, trainer: Trainer) -> Self {
        let status = RunStatus {
            run,
            variant: trainer.config().variant,
            k: trainer.k(),
            label: trainer.label(),
            epoch: trainer.epoch(),
            sessions_committed: 0,
            successes: 0,
            real_buffer: trainer.real_buffer().len(),
            simulated_buffer: trainer.simulated_buffer().len(),
            queued: 0,
            policy_fingerprint: trainer.qnet().mlp().fingerprint(),
            last_error: None,
        };
        let shared = Arc::new(Shared {
            snapshot: RwLock::new(Snapshot {
                epoch: trainer.epoch(),
                policy: Arc::new(trainer.qnet().clone()),
            }),
            status: Mutex::new(status),
        });
        let (sender, receiver) = mpsc::channel();
        let worker = Arc::clone(&shared);
        let thread = std::thread::Builder::new()
            .name(format!("ddq-learner-{run}"))
            .spawn(move || learn(trainer, receiver, worker))
            .expect("spawn learner thread");
        RunHandle {
            shared,
            sender: Mutex::new(Some(sender)),
            thread: Mutex::new(Some(thread)),
        }
    }

    /// The policy new sessions of this run use.
    pub fn snapshot(&self) -> Snapshot {
        self.shared.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn status(&self) -> RunStatus {
        self.shared.status.lock().expect("status lock").clone()
    }

    /// Queues one finished episode; the learner commits it to the real
    /// buffer and runs one epoch.
    pub fn submit(&self, experiences: Vec<Experience>, success: bool) {
        self.shared.status.lock().expect("status lock").queued += 1;
        self.send(Job::Episode { experiences, success });
    }

    /// Blocks until every episode queued so far has been learned from.
    pub fn flush(&self) {
        let (tx, rx) = mpsc::channel();
        self.send(Job::Flush(tx));
        let _ = rx.recv();
    }

    fn send(&self, job: Job) {
        if let Some(sender) = self.sender.lock().expect("sender lock").as_ref() {
            let _ = sender.send(job);
        }
    }
}

impl Drop for RunHandle {
    fn drop(&mut self) {
        self.sender.lock().expect("sender lock").take();
        if let Some(thread) = self.thread.lock().expect("thread lock").take() {
            let _ = thread.join();
        }
    }
}

fn learn(mut trainer: Trainer, jobs: Receiver<Job>, shared: Arc<Shared>) {
    for job in jobs {
        match job {
            Job::Flush(done) => {
                let _ = done.send(());
            }
            Job::Episode { experiences, success } => {
                let result = (|| {
                    trainer.commit_real_experiences(experiences)?;
                    trainer.direct_updates()?;
                    trainer.learn_and_plan()?;
                    Ok::<_, ddq::Error>(())
                })();
                *shared.snapshot.write().expect("snapshot lock") = Snapshot {
                    epoch: trainer.epoch(),
                    policy: Arc::new(trainer.qnet().clone()),
                };
                let mut status = shared.status.lock().expect("status lock");
                status.queued -= 1;
                status.epoch = trainer.epoch();
                status.k = trainer.k();
                status.real_buffer = trainer.real_buffer().len();
                status.simulated_buffer = trainer.simulated_buffer().len();
                status.policy_fingerprint = trainer.qnet().mlp().fingerprint();
                match result {
                    Ok(()) => {
                        status.sessions_committed += 1;
                        status.successes += usize::from(success);
                    }
                    Err(e) => status.last_error = Some(e.to_string()),
                }
            }
        }
    }
}
