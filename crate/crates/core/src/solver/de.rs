use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::simplex::project;
use crate::error::{Error, Result};
use crate::metrics::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeConfig {
    pub population: usize,
    /// Differential weight F.
    pub f: f64,
    /// Crossover rate CR.
    pub cr: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: 20,
            f: 0.8,
            cr: 0.9,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::InvalidConfig("DE population must be at least 4".into()));
        }
        if !(self.f > 0.0 && self.f <= 2.0) || !(0.0..=1.0).contains(&self.cr) {
            return Err(Error::InvalidConfig("DE needs F in (0, 2] and CR in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeResult {
    pub best: WeightVector,
    pub value: f64,
    pub evaluations: usize,
    /// Best value after each evaluation; non-increasing.
    pub trace: Vec<f64>,
}

/// DE/rand/1/bin over the simplex; trial vectors are repaired by projection.
pub fn differential_evolution<R, F>(
    objective: F,
    dim: usize,
    budget: usize,
    config: &DeConfig,
    rng: &mut R,
) -> Result<DeResult>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    run(objective, dim, budget, config, rng, &[], |_, _| false)
}

/// DE with caller-supplied initial members and a stop test checked after each generation.
pub(crate) fn run<R, F, S>(
    mut objective: F,
    dim: usize,
    budget: usize,
    config: &DeConfig,
    rng: &mut R,
    seeds: &[Vec<f64>],
    mut stop: S,
) -> Result<DeResult>
where
    R: Rng + ?Sized,
    F: FnMut(&[f64]) -> f64,
    S: FnMut(&[f64], f64) -> bool,
{
    config.validate()?;
    let np = config.population;
    if budget < np {
        return Err(Error::BudgetTooSmall {
            budget,
            population: np,
        });
    }
    if dim == 0 {
        return Err(Error::InvalidWeights("zero-dimensional search".into()));
    }

    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(np);
    for s in seeds.iter().take(np) {
        pop.push(project(s)?);
    }
    if dim == 1 {
        pop.resize(np, vec![1.0]);
    } else {
        while pop.len() < np {
            pop.push(flat_dirichlet(dim, rng));
        }
    }

    let mut trace = Vec::with_capacity(budget);
    let mut values = Vec::with_capacity(np);
    let mut best = 0;
    for (i, x) in pop.iter().enumerate() {
        let v = sanitize(objective(x));
        values.push(v);
        if v < values[best] {
            best = i;
        }
        trace.push(values[best]);
    }
    let mut evaluations = np;

    while evaluations + np <= budget && !stop(&pop[best], values[best]) {
        for i in 0..np {
            let (r1, r2, r3) = distinct_three(rng, np, i);
            let j_rand = rng.random_range(0..dim);
            let mut trial = pop[i].clone();
            for j in 0..dim {
                if j == j_rand || rng.random::<f64>() < config.cr {
                    trial[j] = pop[r1][j] + config.f * (pop[r2][j] - pop[r3][j]);
                }
            }
            let trial = project(&trial)?;
            let v = sanitize(objective(&trial));
            evaluations += 1;
            if v <= values[i] {
                pop[i] = trial;
                values[i] = v;
                if v < values[best] {
                    best = i;
                }
            }
            trace.push(values[best]);
        }
    }

    Ok(DeResult {
        best: WeightVector::new(pop[best].clone()).expect("population stays on the simplex"),
        value: values[best],
        evaluations,
        trace,
    })
}

/// Uniform draw from the simplex: normalized unit-rate exponentials.
pub(crate) fn flat_dirichlet<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..dim).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let sum: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= sum);
    x
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn distinct_three<R: Rng + ?Sized>(rng: &mut R, np: usize, exclude: usize) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let c = rng.random_range(0..np);
        if c != exclude && !taken.contains(&c) {
            return c;
        }
    };
    let a = pick(&[]);
    let b = pick(&[a]);
    let c = pick(&[a, b]);
    (a, b, c)
}
