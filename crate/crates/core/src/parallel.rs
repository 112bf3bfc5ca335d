//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) the `Parallel` strategy fans work out
//! over the rayon pool. Without it, or with `Sequential`, the same closures run
//! in order on the calling thread. Results are always returned in input order,
//! so the two strategies produce bitwise-identical outputs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// `Parallel` only when the crate was built with the `parallel` feature.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Maps fixed-size chunks; chunk boundaries never depend on the thread count.
pub fn map_chunks<T, R, F>(exec: Execution, items: &[T], chunk: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_chunks(chunk).map(f).collect(),
        _ => items.chunks(chunk).map(f).collect(),
    }
}

/// Maps fixed-size chunks and left-folds the results in chunk order, so the
/// outcome is independent of the strategy. The sequential path folds as it
/// goes and never holds more than one chunk result.
pub fn fold_chunks<T, R, F, G>(exec: Execution, items: &[T], chunk: usize, f: F, mut combine: G) -> Option<R>
where
    T: Sync,
    R: Send,
    F: Fn(&[T]) -> R + Sync + Send,
    G: FnMut(R, R) -> R,
{
    let chunk = chunk.max(1);
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_chunks(chunk).map(f).collect::<Vec<R>>().into_iter().reduce(combine),
        _ => {
            let mut acc: Option<R> = None;
            for c in items.chunks(chunk) {
                let r = f(c);
                acc = Some(match acc {
                    Some(a) => combine(a, r),
                    None => r,
                });
            }
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(Execution::Parallel, &xs, |x| x * x);
        let b = map(Execution::Sequential, &xs, |x| x * x);
        assert_eq!(a, b);
        let ca = map_chunks(Execution::Parallel, &xs, 7, |c| c.iter().sum::<u64>());
        let cb = map_chunks(Execution::Sequential, &xs, 7, |c| c.iter().sum::<u64>());
        assert_eq!(ca, cb);
        assert_eq!(ca.len(), 143);
        let fa = fold_chunks(Execution::Parallel, &xs, 7, |c| vec![c[0]], |mut a, b| {
            a.extend(b);
            a
        });
        let fb = fold_chunks(Execution::Sequential, &xs, 7, |c| vec![c[0]], |mut a, b| {
            a.extend(b);
            a
        });
        assert_eq!(fa, fb);
        assert_eq!(fa.unwrap().len(), 143);
    }
}
