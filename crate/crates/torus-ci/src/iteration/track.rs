//! Time series stored as physical samples on the grid times `t_n = n dt`, `n >= 0`.

use crate::field::{Field, Grid, ScalarField};

#[derive(Clone, Debug)]
pub struct Track {
    grid: Grid,
    comps: usize,
    dt: f64,
    data: Vec<Vec<f64>>,
}

impl Track {
    pub fn new(grid: &Grid, comps: usize, dt: f64) -> Self {
        Track { grid: grid.clone(), comps, dt, data: Vec::new() }
    }

    pub fn from_fields<F: Field>(grid: &Grid, dt: f64, fields: &[F]) -> Self {
        let comps = fields.first().map(|f| f.components().len()).unwrap_or(1);
        let mut t = Track::new(grid, comps, dt);
        for f in fields {
            t.push(f);
        }
        t
    }

    pub fn push<F: Field>(&mut self, f: &F) {
        assert_eq!(f.components().len(), self.comps);
        self.data.push(f.physical().concat());
    }

    pub fn push_samples(&mut self, s: Vec<f64>) {
        assert_eq!(s.len(), self.comps * self.grid.len());
        self.data.push(s);
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn samples(&self, n: usize) -> &[f64] {
        &self.data[n]
    }

    pub fn get<F: Field>(&self, n: usize) -> F {
        F::from_components(samples_to_components(&self.grid, &self.data[n], self.comps))
    }

    /// Sup over all times and points of the component magnitudes.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().flat_map(|s| s.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn samples_to_components(grid: &Grid, s: &[f64], comps: usize) -> Vec<ScalarField> {
    let len = grid.len();
    (0..comps).map(|c| ScalarField::from_physical(grid, &s[c * len..(c + 1) * len]).expect("sample length")).collect()
}
