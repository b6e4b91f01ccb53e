use std::any::Any;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{bounded, Receiver, RecvTimeoutError, Sender, TrySendError};
use thiserror::Error;

type Job = Box<dyn FnOnce() + Send + 'static>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("{pool} pool queue is full")]
    Overloaded { pool: String },
    #[error("task did not finish within {0:?}")]
    Timeout(Duration),
    #[error("task panicked")]
    Panicked,
}

/// Fixed-size thread pool with a bounded queue. A panicking task is
/// contained to that task; the worker thread keeps serving the queue.
pub struct WorkerPool {
    name: String,
    size: usize,
    sender: Option<Sender<Job>>,
    workers: Vec<JoinHandle<()>>,
}

/// The eventual result of a submitted task.
pub struct TaskHandle<T> {
    receiver: Receiver<T>,
}

impl<T> TaskHandle<T> {
    pub fn wait(self) -> Result<T, TaskError> {
        self.receiver.recv().map_err(|_| TaskError::Panicked)
    }

    pub fn wait_timeout(self, timeout: Duration) -> Result<T, TaskError> {
        self.receiver.recv_timeout(timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => TaskError::Timeout(timeout),
            RecvTimeoutError::Disconnected => TaskError::Panicked,
        })
    }
}

fn panic_message(payload: &(dyn Any + Send)) -> &str {
    payload
        .downcast_ref::<&str>()
        .copied()
        .or_else(|| payload.downcast_ref::<String>().map(String::as_str))
        .unwrap_or("non-string panic payload")
}

impl WorkerPool {
    /// `size` workers sharing a queue of `queue_capacity` pending tasks.
    pub fn new(name: impl Into<String>, size: usize, queue_capacity: usize) -> Self {
        let name = name.into();
        let size = size.max(1);
        let (sender, receiver) = bounded::<Job>(queue_capacity.max(1));
        let workers = (0..size)
            .map(|i| {
                let receiver = receiver.clone();
                let pool = name.clone();
                std::thread::Builder::new()
                    .name(format!("{name}-{i}"))
                    .spawn(move || {
                        for job in receiver {
                            if let Err(payload) = catch_unwind(AssertUnwindSafe(job)) {
                                log::error!("{pool} task panicked: {}", panic_message(&*payload));
                            }
                        }
                    })
                    .expect("spawn worker thread")
            })
            .collect();
        Self { name, size, sender: Some(sender), workers }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn wrap<T, F>(f: F) -> (Job, TaskHandle<T>)
    where
        T: Send + 'static,
        F: FnOnce() -> T + Send + 'static,
    {
        let (tx, rx) = bounded(1);
        let job: Job = Box::new(move || {
            let _ = tx.send(f());
        });
        (job, TaskHandle { receiver: rx })
    }

    /// Queues a task, failing fast when the queue is full.
    pub fn try_execute<T, F>(&self, f: F) -> Result<TaskHandle<T>, TaskError>
    where
        T: Send + 'static,
        F: FnOnce() -> T + Send + 'static,
    {
        let (job, handle) = Self::wrap(f);
        match self.sender.as_ref().expect("pool is running").try_send(job) {
            Ok(()) => Ok(handle),
            Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => {
                Err(TaskError::Overloaded { pool: self.name.clone() })
            }
        }
    }

    /// Queues a task, waiting for queue space.
    pub fn execute<T, F>(&self, f: F) -> TaskHandle<T>
    where
        T: Send + 'static,
        F: FnOnce() -> T + Send + 'static,
    {
        let (job, handle) = Self::wrap(f);
        // Send only fails once every worker is gone, which drops the job and
        // surfaces as a panicked task on the handle.
        let _ = self.sender.as_ref().expect("pool is running").send(job);
        handle
    }
}

impl Drop for WorkerPool {
    fn drop(&mut self) {
        self.sender.take();
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool").field("name", &self.name).field("size", &self.size).finish()
    }
}
