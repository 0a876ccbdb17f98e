//! Discretized probability simplex: all weight vectors whose components are
//! multiples of `1/M`, enumerated as integer compositions of `M`.

use crate::error::{Error, Result};
use crate::metrics::METRIC_COUNT;
use crate::rerank::WeightVector;
use crate::scalar::Scalar;

/// Grid of compositions of `divisions` into `dims` non-negative parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimplexGrid {
    dims: usize,
    divisions: u32,
}

impl SimplexGrid {
    pub fn new(dims: usize, divisions: u32) -> Result<Self> {
        if dims == 0 || divisions == 0 {
            return Err(Error::InvalidGridStep(if divisions == 0 {
                f64::INFINITY
            } else {
                1.0 / divisions as f64
            }));
        }
        Ok(SimplexGrid { dims, divisions })
    }

    /// Grid with spacing `step`, which must be `1/M` for a positive integer `M`.
    pub fn from_step(dims: usize, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0 && step <= 1.0) {
            return Err(Error::InvalidGridStep(step));
        }
        let m = (1.0 / step).round();
        if (m * step - 1.0).abs() > 1e-9 || m > u32::MAX as f64 {
            return Err(Error::InvalidGridStep(step));
        }
        Self::new(dims, m as u32)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn divisions(&self) -> u32 {
        self.divisions
    }

    pub fn step(&self) -> f64 {
        1.0 / self.divisions as f64
    }

    /// Number of grid points, `C(M + dims - 1, dims - 1)`.
    pub fn len(&self) -> u128 {
        let n = self.divisions as u128 + self.dims as u128 - 1;
        let k = (self.dims as u128 - 1).min(self.divisions as u128);
        (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn compositions(&self) -> Compositions {
        Compositions::new(self.dims, self.divisions)
    }
}

/// Lexicographic enumeration of the compositions of `total` into `dims` parts,
/// starting at `(0, .., 0, total)` and ending at `(total, 0, .., 0)`.
#[derive(Clone, Debug)]
pub struct Compositions {
    next: Option<Vec<u32>>,
}

impl Compositions {
    fn new(dims: usize, total: u32) -> Self {
        let mut first = vec![0; dims];
        if let Some(last) = first.last_mut() {
            *last = total;
        }
        Compositions {
            next: (dims > 0).then_some(first),
        }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        let current = self.next.take()?;
        // Increment the part just before the last non-zero part (ignoring
        // position 0) and move the remaining mass to the final position.
        if let Some(last_nz) = (1..current.len()).rev().find(|&i| current[i] > 0) {
            let mut succ = current.clone();
            let pivot = last_nz - 1;
            let tail: u32 = succ[pivot + 1..].iter().sum();
            succ[pivot] += 1;
            for c in &mut succ[pivot + 1..] {
                *c = 0;
            }
            let end = succ.len() - 1;
            succ[end] = tail - 1;
            self.next = Some(succ);
        }
        Some(current)
    }
}

/// Every weight vector on the grid with spacing `step`, in lexicographic
/// order of the underlying integer compositions.
pub fn enumerate_simplex(dims: usize, step: f64) -> Result<Compositions> {
    Ok(SimplexGrid::from_step(dims, step)?.compositions())
}

pub(crate) fn composition_array(c: &[u32]) -> [u32; METRIC_COUNT] {
    std::array::from_fn(|k| c[k])
}

/// Weight vectors of a six-metric grid.
pub fn weight_vectors<T: Scalar>(grid: &SimplexGrid) -> Result<impl Iterator<Item = WeightVector<T>>> {
    if grid.dims() != METRIC_COUNT {
        return Err(Error::InvalidWeights(format!(
            "grid has {} dims, expected {METRIC_COUNT}",
            grid.dims()
        )));
    }
    Ok(grid
        .compositions()
        .map(|c| WeightVector::from_composition(&composition_array(&c)).expect("grid compositions are non-zero")))
}
