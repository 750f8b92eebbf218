use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Vec3};
use crate::projection::Genome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elite {
    pub genome: Genome,
    pub fitness: f64,
    pub behavior: Vec3,
    pub eval_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted,
    Replaced,
    Rejected,
}

/// Uniform grid over a box of behavior space with one elite per cell.
///
/// Cells are half-open on the lower side, `(lo, lo + ε]`, except the first one per axis
/// which also owns the box minimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorGrid {
    bounds: Aabb,
    cell: f64,
    dims: [i64; 3],
    elites: Vec<Elite>,
    #[serde(skip)]
    index: HashMap<[i64; 3], usize>,
}

impl BehaviorGrid {
    pub fn new(bounds: Aabb, cell: f64) -> Self {
        assert!(cell > 0.0, "cell size must be positive");
        let ext = bounds.extent();
        let dims = [0, 1, 2].map(|i| ((ext[i] / cell).ceil() as i64).max(1));
        Self {
            bounds,
            cell,
            dims,
            elites: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn dims(&self) -> [i64; 3] {
        self.dims
    }

    /// Cell containing `b`, or `None` outside the grid.
    pub fn cell_of(&self, b: &Vec3) -> Option<[i64; 3]> {
        if !b.iter().all(|v| v.is_finite()) || !self.bounds.contains(b) {
            return None;
        }
        Some([0, 1, 2].map(|i| {
            let k = ((b[i] - self.bounds.min[i]) / self.cell).ceil() as i64 - 1;
            k.clamp(0, self.dims[i] - 1)
        }))
    }

    pub fn insert(&mut self, genome: &Genome, fitness: f64, behavior: Vec3, eval_index: u64) -> InsertOutcome {
        let Some(cell) = self.cell_of(&behavior) else {
            return InsertOutcome::Rejected;
        };
        let elite = Elite {
            genome: genome.clone(),
            fitness,
            behavior,
            eval_index,
        };
        match self.index.get(&cell) {
            None => {
                self.index.insert(cell, self.elites.len());
                self.elites.push(elite);
                InsertOutcome::Inserted
            }
            Some(&slot) if fitness > self.elites[slot].fitness => {
                self.elites[slot] = elite;
                InsertOutcome::Replaced
            }
            Some(_) => InsertOutcome::Rejected,
        }
    }

    pub fn get(&self, cell: &[i64; 3]) -> Option<&Elite> {
        self.index.get(cell).map(|&i| &self.elites[i])
    }

    /// Elites in order of first cell occupation.
    pub fn elites(&self) -> &[Elite] {
        &self.elites
    }

    pub fn len(&self) -> usize {
        self.elites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elites.is_empty()
    }

    /// Restores the cell index after deserialization.
    pub fn reindex(&mut self) {
        let cells: Vec<_> = self.elites.iter().map(|e| self.cell_of(&e.behavior)).collect();
        self.index = cells
            .into_iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|c| (c, i)))
            .collect();
    }
}

/// Annealed acceptance thresholds per cell.
#[derive(Debug, Clone)]
pub struct ThresholdArchive {
    grid: BehaviorGrid,
    thresholds: HashMap<[i64; 3], f64>,
    f_min: f64,
    alpha: f64,
}

impl ThresholdArchive {
    pub fn new(bounds: Aabb, cell: f64, f_min: f64, alpha: f64) -> Self {
        Self {
            grid: BehaviorGrid::new(bounds, cell),
            thresholds: HashMap::new(),
            f_min,
            alpha,
        }
    }

    pub fn threshold(&self, behavior: &Vec3) -> Option<f64> {
        let c = self.grid.cell_of(behavior)?;
        Some(*self.thresholds.get(&c).unwrap_or(&self.f_min))
    }

    /// Returns the improvement `f - t` and updates `t` when positive.
    pub fn offer(&mut self, fitness: f64, behavior: &Vec3) -> Option<f64> {
        let c = self.grid.cell_of(behavior)?;
        let t = self.thresholds.entry(c).or_insert(self.f_min);
        let gain = fitness - *t;
        if gain > 0.0 {
            *t = (1.0 - self.alpha) * *t + self.alpha * fitness;
        }
        Some(gain)
    }
}
