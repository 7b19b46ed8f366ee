//! Memoizing cache with single-flight semantics.
//!
//! The first caller for a key becomes the leader and runs the computation;
//! concurrent callers for the same key subscribe to a `watch` channel and
//! receive the leader's result. Successes are stored; failures are handed to
//! every waiter of that flight and then forgotten, so the next caller tries
//! again. If the leader is cancelled, waiters re-enter and one of them takes
//! over.

use std::collections::{BTreeMap, HashMap};
use std::future::Future;
use std::hash::Hash;
use std::sync::{Arc, Mutex};

use tokio::sync::watch;

type Flight<V, E> = watch::Receiver<Option<Result<V, E>>>;

enum Slot<V, E> {
    Ready(V),
    InFlight(Flight<V, E>),
}

pub struct SingleFlightCache<K, V, E> {
    slots: Arc<Mutex<HashMap<K, Slot<V, E>>>>,
}

impl<K, V, E> Default for SingleFlightCache<K, V, E> {
    fn default() -> Self {
        Self { slots: Arc::new(Mutex::new(HashMap::new())) }
    }
}

impl<K, V, E> std::fmt::Debug for SingleFlightCache<K, V, E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SingleFlightCache").finish_non_exhaustive()
    }
}

/// Removes the in-flight marker if the leader goes away without finishing.
struct LeaderGuard<K: Hash + Eq, V, E> {
    slots: Arc<Mutex<HashMap<K, Slot<V, E>>>>,
    key: Option<K>,
}

impl<K: Hash + Eq, V, E> Drop for LeaderGuard<K, V, E> {
    fn drop(&mut self) {
        if let Some(key) = self.key.take() {
            let mut slots = self.slots.lock().expect("cache lock poisoned");
            if matches!(slots.get(&key), Some(Slot::InFlight(_))) {
                slots.remove(&key);
            }
        }
    }
}

impl<K, V, E> SingleFlightCache<K, V, E>
where
    K: Hash + Eq + Clone + Ord,
    V: Clone,
    E: Clone,
{
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &K) -> Option<V> {
        match self.slots.lock().expect("cache lock poisoned").get(key) {
            Some(Slot::Ready(v)) => Some(v.clone()),
            _ => None,
        }
    }

    /// Stores a completed value unless one is already present.
    pub fn insert(&self, key: K, value: V) {
        let mut slots = self.slots.lock().expect("cache lock poisoned");
        if !matches!(slots.get(&key), Some(Slot::Ready(_))) {
            slots.insert(key, Slot::Ready(value));
        }
    }

    pub fn len(&self) -> usize {
        let slots = self.slots.lock().expect("cache lock poisoned");
        slots.values().filter(|s| matches!(s, Slot::Ready(_))).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Completed entries, ordered by key.
    pub fn snapshot(&self) -> BTreeMap<K, V> {
        let slots = self.slots.lock().expect("cache lock poisoned");
        slots
            .iter()
            .filter_map(|(k, s)| match s {
                Slot::Ready(v) => Some((k.clone(), v.clone())),
                Slot::InFlight(_) => None,
            })
            .collect()
    }

    pub async fn get_or_generate<F, Fut>(&self, key: &K, make: F) -> Result<V, E>
    where
        F: FnOnce() -> Fut,
        Fut: Future<Output = Result<V, E>>,
    {
        let mut make = Some(make);
        loop {
            let (waiter, sender) = {
                let mut slots = self.slots.lock().expect("cache lock poisoned");
                match slots.get(key) {
                    Some(Slot::Ready(v)) => return Ok(v.clone()),
                    Some(Slot::InFlight(rx)) => (Some(rx.clone()), None),
                    None => {
                        let (tx, rx) = watch::channel(None);
                        slots.insert(key.clone(), Slot::InFlight(rx));
                        (None, Some(tx))
                    }
                }
            };

            if let Some(mut rx) = waiter {
                loop {
                    if let Some(result) = rx.borrow_and_update().clone() {
                        return result;
                    }
                    if rx.changed().await.is_err() {
                        // Leader dropped without publishing.
                        break;
                    }
                }
                continue;
            }

            let tx = sender.expect("leader holds the sender");
            let mut guard = LeaderGuard { slots: Arc::clone(&self.slots), key: Some(key.clone()) };
            let make = make.take().expect("leader runs the computation once");
            let result = make().await;
            {
                let mut slots = self.slots.lock().expect("cache lock poisoned");
                match &result {
                    Ok(v) => {
                        slots.insert(key.clone(), Slot::Ready(v.clone()));
                    }
                    Err(_) => {
                        slots.remove(key);
                    }
                }
                guard.key = None;
            }
            let _ = tx.send(Some(result.clone()));
            return result;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    type Cache = SingleFlightCache<String, String, String>;

    #[tokio::test(flavor = "multi_thread", worker_threads = 4)]
    async fn concurrent_callers_share_one_flight() {
        let cache = Arc::new(Cache::new());
        let calls = Arc::new(AtomicUsize::new(0));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let cache = Arc::clone(&cache);
            let calls = Arc::clone(&calls);
            handles.push(tokio::spawn(async move {
                cache
                    .get_or_generate(&"k".to_string(), || async move {
                        calls.fetch_add(1, Ordering::SeqCst);
                        tokio::time::sleep(Duration::from_millis(5)).await;
                        Ok("v".to_string())
                    })
                    .await
            }));
        }
        for h in handles {
            assert_eq!(h.await.unwrap().unwrap(), "v");
        }
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[tokio::test]
    async fn cached_value_skips_generation() {
        let cache = Cache::new();
        cache.insert("k".into(), "v".into());
        let out = cache.get_or_generate(&"k".to_string(), || async { panic!("must not run") }).await;
        assert_eq!(out.unwrap(), "v");
    }

    #[tokio::test]
    async fn errors_are_not_cached() {
        let cache = Cache::new();
        let key = "k".to_string();
        let first = cache.get_or_generate(&key, || async { Err::<String, _>("boom".to_string()) }).await;
        assert_eq!(first, Err("boom".to_string()));
        assert!(cache.is_empty());
        let second = cache.get_or_generate(&key, || async { Ok("v".to_string()) }).await;
        assert_eq!(second.unwrap(), "v");
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 4)]
    async fn waiters_receive_the_leaders_error() {
        let cache = Arc::new(Cache::new());
        let calls = Arc::new(AtomicUsize::new(0));
        let mut handles = Vec::new();
        for _ in 0..4 {
            let cache = Arc::clone(&cache);
            let calls = Arc::clone(&calls);
            handles.push(tokio::spawn(async move {
                cache
                    .get_or_generate(&"k".to_string(), || async move {
                        calls.fetch_add(1, Ordering::SeqCst);
                        tokio::time::sleep(Duration::from_millis(20)).await;
                        Err::<String, _>("boom".to_string())
                    })
                    .await
            }));
        }
        for h in handles {
            assert_eq!(h.await.unwrap(), Err("boom".to_string()));
        }
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[tokio::test(flavor = "multi_thread", worker_threads = 2)]
    async fn cancelled_leader_hands_over() {
        let cache = Arc::new(Cache::new());
        let leader = {
            let cache = Arc::clone(&cache);
            tokio::spawn(async move {
                cache
                    .get_or_generate(&"k".to_string(), || async {
                        tokio::time::sleep(Duration::from_secs(60)).await;
                        Ok("never".to_string())
                    })
                    .await
            })
        };
        tokio::time::sleep(Duration::from_millis(10)).await;
        let waiter = {
            let cache = Arc::clone(&cache);
            tokio::spawn(async move {
                cache.get_or_generate(&"k".to_string(), || async { Ok("second".to_string()) }).await
            })
        };
        tokio::time::sleep(Duration::from_millis(10)).await;
        leader.abort();
        assert_eq!(waiter.await.unwrap().unwrap(), "second");
    }

    #[tokio::test]
    async fn distinct_keys_are_independent() {
        let cache = Cache::new();
        let calls = AtomicUsize::new(0);
        for k in ["a", "b"] {
            cache
                .get_or_generate(&k.to_string(), || async {
                    calls.fetch_add(1, Ordering::SeqCst);
                    Ok(k.to_uppercase())
                })
                .await
                .unwrap();
        }
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        assert_eq!(cache.snapshot().into_iter().collect::<Vec<_>>(), [("a".into(), "A".into()), ("b".into(), "B".into())]);
    }
}
