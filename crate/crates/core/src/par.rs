//! Data-parallel map helpers.
//!
//! With the `parallel` feature (default) these dispatch to rayon when the
//! caller asks for [`Exec::Parallel`]; without it every call runs sequentially.
//! Results are always returned in input order, so output is independent of
//! the execution strategy.

/// Execution strategy for the λ-sweeps and batteries in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

pub fn is_parallel_available() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(feature = "parallel")]
pub fn map_indexed<U, F>(exec: Exec, count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Exec::Parallel => (0..count).into_par_iter().map(f).collect(),
        Exec::Sequential => (0..count).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(_exec: Exec, count: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..count).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map<T, U, F>(exec: Exec, data: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match exec {
        Exec::Parallel => data.par_iter().map(f).collect(),
        Exec::Sequential => data.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(_exec: Exec, data: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    data.iter().map(f).collect()
}

/// Parallel map that stops at the first error (in index order).
pub fn try_map_indexed<U, E, F>(exec: Exec, count: usize, f: F) -> Result<Vec<U>, E>
where
    U: Send,
    E: Send,
    F: Fn(usize) -> Result<U, E> + Sync + Send,
{
    map_indexed(exec, count, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_indexed(Exec::Sequential, 100, |i| i * i);
        let par = map_indexed(Exec::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
        let data: Vec<i32> = (0..50).collect();
        assert_eq!(map(Exec::Parallel, &data, |x| x + 1), map(Exec::Sequential, &data, |x| x + 1));
    }
}
