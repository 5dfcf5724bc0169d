//! Wall-clock measurement helpers.

use std::time::{Duration, Instant};

/// Runs per measurement.
pub const RUNS: usize = 5;

/// Mean of the samples after dropping one minimum and one maximum. With
/// fewer than three samples the plain mean is returned.
pub fn trimmed_mean(samples: &[Duration]) -> Duration {
    if samples.is_empty() {
        return Duration::ZERO;
    }
    let mut v = samples.to_vec();
    v.sort_unstable();
    let kept = if v.len() >= 3 { &v[1..v.len() - 1] } else { &v[..] };
    kept.iter().sum::<Duration>() / kept.len() as u32
}

/// Time `f` [`RUNS`] times and return the trimmed mean with the last result.
pub fn measure<T>(mut f: impl FnMut() -> T) -> (Duration, T) {
    measure_runs(RUNS, &mut f)
}

pub fn measure_runs<T>(runs: usize, mut f: impl FnMut() -> T) -> (Duration, T) {
    assert!(runs > 0, "at least one run");
    let mut samples = Vec::with_capacity(runs);
    let mut last = None;
    for _ in 0..runs {
        let start = Instant::now();
        let out = f();
        samples.push(start.elapsed());
        last = Some(out);
    }
    (trimmed_mean(&samples), last.expect("runs > 0"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: &[u64]) -> Vec<Duration> {
        v.iter().map(|&x| Duration::from_millis(x)).collect()
    }

    #[test]
    fn drops_extremes() {
        assert_eq!(trimmed_mean(&ms(&[100, 1, 5, 6, 7])), Duration::from_millis(6));
    }

    #[test]
    fn short_inputs() {
        assert_eq!(trimmed_mean(&[]), Duration::ZERO);
        assert_eq!(trimmed_mean(&ms(&[2, 4])), Duration::from_millis(3));
    }

    #[test]
    fn measure_counts_runs() {
        let mut calls = 0;
        let (_, last) = measure(|| {
            calls += 1;
            calls
        });
        assert_eq!(last, RUNS);
    }
}
