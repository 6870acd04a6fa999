//! Order-preserving map over independent jobs.
//!
//! With the `parallel` feature the work is spread over the rayon pool;
//! without it everything runs on the calling thread. Results are identical
//! either way since every job is a pure function of its input.

/// Maps `f` over `items`, in parallel when the feature is enabled.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_parallel(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_sequential(items, f)
    }
}

pub fn map_sequential<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_parallel<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Largest value produced by `f`, ignoring NaN; `0.0` for an empty input.
pub fn max_by<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    map(items, f).into_iter().fold(0.0, f64::max)
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let v: Vec<u64> = (0..1000).collect();
        let out = map(&v, |x| x * x);
        assert_eq!(out, map_sequential(&v, |x| x * x));
        assert_eq!(out[999], 998001);
    }

    #[test]
    fn empty_input() {
        let v: Vec<f64> = vec![];
        assert!(map(&v, |x| *x).is_empty());
        assert_eq!(max_by(&v, |x| *x), 0.0);
    }
}
