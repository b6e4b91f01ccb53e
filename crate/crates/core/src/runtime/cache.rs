use std::num::NonZeroUsize;

use lru::LruCache;
use parking_lot::Mutex;

pub const DEFAULT_CACHE_CAPACITY: usize = 10_000;

/// Thread-safe LRU map from score keys to documents. Capacity 0 disables
/// caching.
#[derive(Debug)]
pub struct ScoreCache<V> {
    inner: Option<Mutex<LruCache<String, V>>>,
}

impl<V: Clone> ScoreCache<V> {
    pub fn new(capacity: usize) -> Self {
        Self { inner: NonZeroUsize::new(capacity).map(|c| Mutex::new(LruCache::new(c))) }
    }

    pub fn is_enabled(&self) -> bool {
        self.inner.is_some()
    }

    pub fn capacity(&self) -> usize {
        self.inner.as_ref().map_or(0, |m| m.lock().cap().get())
    }

    /// Looks up a key, marking it most recently used.
    pub fn get(&self, key: &str) -> Option<V> {
        self.inner.as_ref()?.lock().get(key).cloned()
    }

    /// Looks up a key without touching recency.
    pub fn peek(&self, key: &str) -> Option<V> {
        self.inner.as_ref()?.lock().peek(key).cloned()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.inner.as_ref().is_some_and(|m| m.lock().contains(key))
    }

    pub fn put(&self, key: String, value: V) {
        if let Some(m) = &self.inner {
            m.lock().put(key, value);
        }
    }

    pub fn len(&self) -> usize {
        self.inner.as_ref().map_or(0, |m| m.lock().len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        if let Some(m) = &self.inner {
            m.lock().clear();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evicts_least_recently_used() {
        let cache = ScoreCache::new(2);
        cache.put("A".into(), 1);
        cache.put("B".into(), 2);
        cache.put("C".into(), 3);
        assert_eq!(cache.get("A"), None);
        assert_eq!(cache.get("B"), Some(2));
        cache.put("D".into(), 4);
        assert_eq!(cache.get("C"), None);
        assert_eq!(cache.get("B"), Some(2));
    }

    #[test]
    fn zero_capacity_disables() {
        let cache = ScoreCache::new(0);
        cache.put("A".into(), 1);
        assert_eq!(cache.get("A"), None);
        assert!(!cache.is_enabled());
    }
}
