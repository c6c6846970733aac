use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

type MeanFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type Cache = HashMap<Vec<u64>, f64>;

/// Prior mean function m(x) with a shared memo table.
///
/// Clones share both the function and the cache, so a prior handed to several
/// response surfaces (one per BO iteration) keeps its evaluations as long as
/// the underlying function is unchanged. The function must be deterministic;
/// concurrent callers may recompute the same input but always store the same
/// value.
#[derive(Clone)]
pub struct PriorMean {
    func: Arc<MeanFn>,
    cache: Option<Arc<Mutex<Cache>>>,
    label: &'static str,
}

impl PriorMean {
    /// Memoized prior, for expensive functions.
    pub fn cached<F>(func: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            func: Arc::new(func),
            cache: Some(Arc::new(Mutex::new(HashMap::new()))),
            label: "cached",
        }
    }

    /// Cheap prior evaluated on every call.
    pub fn uncached<F>(func: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            func: Arc::new(func),
            cache: None,
            label: "function",
        }
    }

    pub fn zero() -> Self {
        Self {
            label: "zero",
            ..Self::uncached(|_| 0.0)
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            label: "constant",
            ..Self::uncached(move |_| c)
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let Some(cache) = &self.cache else {
            return (self.func)(x);
        };
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(v) = cache.lock().unwrap().get(&key) {
            return *v;
        }
        // Evaluate without holding the lock; the function may be slow.
        let v = (self.func)(x);
        cache.lock().unwrap().entry(key).or_insert(v);
        v
    }

    pub fn cache_len(&self) -> usize {
        self.cache.as_ref().map_or(0, |c| c.lock().unwrap().len())
    }

    pub fn is_zero(&self) -> bool {
        self.label == "zero"
    }
}

impl fmt::Debug for PriorMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PriorMean")
            .field("kind", &self.label)
            .field("cached_points", &self.cache_len())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn cache_hits_return_identical_value() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let prior = PriorMean::cached(move |x| {
            c.fetch_add(1, Ordering::SeqCst);
            x[0].sin() * 3.0
        });
        let a = prior.eval(&[0.7]);
        let b = prior.clone().eval(&[0.7]);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(prior.cache_len(), 1);
    }

    #[test]
    fn zero_and_constant() {
        assert_eq!(PriorMean::zero().eval(&[1.0, 2.0]), 0.0);
        assert!(PriorMean::zero().is_zero());
        assert_eq!(PriorMean::constant(4.5).eval(&[9.0]), 4.5);
        assert!(!PriorMean::constant(0.0).is_zero());
    }
}
