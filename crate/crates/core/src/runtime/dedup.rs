use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use parking_lot::{Condvar, Mutex};

/// Raised to waiters when the computation they joined panicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeaderPanicked;

struct Call<V, E> {
    result: Mutex<Option<Result<V, E>>>,
    done: Condvar,
}

/// Collapses concurrent computations of the same key into one. The first
/// caller computes; callers arriving while it runs wait and share its
/// result, success or failure.
pub struct Singleflight<V, E> {
    calls: Mutex<HashMap<String, Arc<Call<V, E>>>>,
}

impl<V, E> Default for Singleflight<V, E> {
    fn default() -> Self {
        Self { calls: Mutex::new(HashMap::new()) }
    }
}

/// Removes the registry entry even if the leader unwinds.
struct Cleanup<'a, V, E> {
    flight: &'a Singleflight<V, E>,
    key: &'a str,
}

impl<V, E> Drop for Cleanup<'_, V, E> {
    fn drop(&mut self) {
        self.flight.calls.lock().remove(self.key);
    }
}

impl<V: Clone, E: Clone + From<LeaderPanicked>> Singleflight<V, E> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `compute` unless an identical call is in flight. The flag is
    /// true when this caller joined another caller's computation.
    pub fn run(&self, key: &str, compute: impl FnOnce() -> Result<V, E>) -> (Result<V, E>, bool) {
        let call = {
            let mut calls = self.calls.lock();
            if let Some(call) = calls.get(key) {
                let call = Arc::clone(call);
                drop(calls);
                let mut result = call.result.lock();
                while result.is_none() {
                    call.done.wait(&mut result);
                }
                return (result.clone().expect("result present"), true);
            }
            let call = Arc::new(Call { result: Mutex::new(None), done: Condvar::new() });
            calls.insert(key.to_string(), Arc::clone(&call));
            call
        };

        let outcome = {
            let _cleanup = Cleanup { flight: self, key };
            catch_unwind(AssertUnwindSafe(compute)).unwrap_or_else(|_| Err(E::from(LeaderPanicked)))
        };
        *call.result.lock() = Some(outcome.clone());
        call.done.notify_all();
        (outcome, false)
    }

    pub fn in_flight(&self) -> usize {
        self.calls.lock().len()
    }
}
