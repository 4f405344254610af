use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Scenario;
use super::ExperimentError;
use crate::seed::TrialSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario: String,
    pub strategy: String,
    pub x1: f64,
    pub x2: Option<f64>,
    pub mean_gain: f64,
    pub std_gain: f64,
    pub trials: usize,
    pub seed: u64,
}

/// A scalar the scenario computes on the side, such as a resolved separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub name: String,
    pub x1: f64,
    pub x2: Option<f64>,
    pub value: f64,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: Scenario,
    pub rows: Vec<SweepRow>,
    pub derived: Vec<Derived>,
}

impl SweepResult {
    pub fn rows_for<'a>(&'a self, strategy: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.strategy == strategy)
    }

    pub fn derived_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Derived> + 'a {
        self.derived.iter().filter(move |d| d.name == name)
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs trials on a bounded worker pool and returns results in input order.
#[derive(Debug)]
pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    /// `jobs == 0` uses every available core.
    pub fn new(jobs: usize) -> Result<Self, ExperimentError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn jobs(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Evaluates `f(point, trial_seed)` for every `(point, trial)` pair.
    ///
    /// Each trial's seed depends only on the master seed, the scenario, the
    /// point's key and the trial index. Results come back grouped by point and
    /// ordered by trial.
    pub fn trials<P, T, F>(
        &self,
        master: u64,
        scenario: Scenario,
        points: &[(String, P)],
        trials: usize,
        f: F,
    ) -> Result<Vec<Vec<T>>, ExperimentError>
    where
        P: Sync,
        T: Send,
        F: Fn(&P, &TrialSeed) -> Result<T, ExperimentError> + Sync,
    {
        let flat: Vec<Result<T, ExperimentError>> = self.pool.install(|| {
            (0..points.len() * trials)
                .into_par_iter()
                .map(|i| {
                    let (key, point) = &points[i / trials];
                    let seed = TrialSeed::derive(master, scenario.name(), key, i % trials);
                    f(point, &seed)
                })
                .collect()
        });
        let mut out = Vec::with_capacity(points.len());
        let mut it = flat.into_iter();
        for _ in 0..points.len() {
            out.push(it.by_ref().take(trials).collect::<Result<Vec<T>, _>>()?);
        }
        Ok(out)
    }

    /// Runs an arbitrary closure inside the pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn results_independent_of_worker_count() {
        let points: Vec<(String, f64)> = (0..5).map(|i| (format!("p={i}"), i as f64)).collect();
        let run = |jobs| {
            Runner::new(jobs)
                .unwrap()
                .trials(3, Scenario::Kfactor, &points, 17, |p, s| {
                    Ok(p + s.stream("x").random::<f64>())
                })
                .unwrap()
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn reordering_points_keeps_draws() {
        let a: Vec<(String, ())> = vec![("a".into(), ()), ("b".into(), ())];
        let b: Vec<(String, ())> = vec![("b".into(), ()), ("a".into(), ())];
        let r = Runner::new(2).unwrap();
        let f = |_: &(), s: &TrialSeed| Ok(s.stream("x").random::<u64>());
        let ra = r.trials(1, Scenario::Kfactor, &a, 4, f).unwrap();
        let rb = r.trials(1, Scenario::Kfactor, &b, 4, f).unwrap();
        assert_eq!(ra[0], rb[1]);
        assert_eq!(ra[1], rb[0]);
    }
}
