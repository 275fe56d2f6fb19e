use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Constraint, ConstraintError, CondExpr, Scene};
use crate::domain::{Grid, Point};

/// Slack allowed above 1.0 before a complement is refused.
pub const COMPLEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl SpatialField {
    pub fn constant(grid: Grid, v: f64) -> Self {
        SpatialField { grid, values: vec![v; grid.len()], normalized: false }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for row in 0..grid.rows {
            for col in 0..grid.cols {
                values.push(f(grid.cell_center(col, row)));
            }
        }
        SpatialField { grid, values, normalized: false }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.values[self.grid.index(col, row)]
    }

    pub fn value_at(&self, p: Point) -> Option<f64> {
        self.grid.cell_of(p).map(|(c, r)| self.at(c, r))
    }

    fn zip(&self, other: &SpatialField, f: impl Fn(f64, f64) -> f64) -> Result<SpatialField, ConstraintError> {
        if self.grid != other.grid {
            return Err(ConstraintError::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(SpatialField { grid: self.grid, values, normalized: false })
    }

    pub fn and(&self, other: &SpatialField) -> Result<SpatialField, ConstraintError> {
        self.zip(other, |a, b| a * b)
    }

    /// Raw sum; values may exceed 1.
    pub fn or(&self, other: &SpatialField) -> Result<SpatialField, ConstraintError> {
        self.zip(other, |a, b| a + b)
    }

    pub fn complement(&self) -> Result<SpatialField, ConstraintError> {
        if self.max() > 1.0 + COMPLEMENT_TOL {
            return Err(ConstraintError::ComplementUndefined);
        }
        let values = self.values.iter().map(|v| (1.0 - v).max(0.0)).collect();
        Ok(SpatialField { grid: self.grid, values, normalized: false })
    }

    /// Index of the largest cell, first one on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// One line per cell: `col,row,x,y,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("col,row,x,y,value\n");
        for (i, v) in self.values.iter().enumerate() {
            let (c, r) = self.grid.col_row(i);
            let p = self.grid.cell_center(c, r);
            out.push_str(&format!("{c},{r},{},{},{v}\n", p.x, p.y));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("field serializes")
    }
}

pub fn field_of_leaf(c: &Constraint, scene: &Scene) -> Result<SpatialField, ConstraintError> {
    let f = c.field_fn(scene)?;
    Ok(SpatialField::from_fn(scene.ws.grid(), f))
}

/// Soft field of a condition: product for `and`, raw sum for `or`,
/// `1 - a` for `not`.
pub fn field(expr: &CondExpr, scene: &Scene) -> Result<SpatialField, ConstraintError> {
    let grid = scene.ws.grid();
    match expr {
        CondExpr::Const(b, _) => Ok(SpatialField::constant(grid, if *b { 1.0 } else { 0.0 })),
        CondExpr::Call(c) => field_of_leaf(&Constraint::from_call(c)?, scene),
        CondExpr::Not(inner, _) => field(inner, scene)?.complement(),
        CondExpr::And(xs, _) => {
            let mut acc = SpatialField::constant(grid, 1.0);
            for x in xs {
                acc = acc.and(&field(x, scene)?)?;
            }
            Ok(acc)
        }
        CondExpr::Or(xs, _) => {
            let mut acc = SpatialField::constant(grid, 0.0);
            for x in xs {
                acc = acc.or(&field(x, scene)?)?;
            }
            Ok(acc)
        }
    }
}

pub fn normalize(f: &SpatialField) -> Result<SpatialField, ConstraintError> {
    if f.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(ConstraintError::NonFinite);
    }
    let total = f.sum();
    if !(total > 0.0) {
        return Err(ConstraintError::Unsatisfiable);
    }
    Ok(SpatialField {
        grid: f.grid,
        values: f.values.iter().map(|v| v / total).collect(),
        normalized: true,
    })
}

/// Inverse-CDF sampler over a normalized field with uniform jitter inside
/// the chosen cell.
pub struct Sampler<'a> {
    field: &'a SpatialField,
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl<'a> Sampler<'a> {
    pub fn new(field: &'a SpatialField) -> Result<Self, ConstraintError> {
        if !field.normalized {
            return Err(ConstraintError::NotNormalized);
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = field
            .values
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        let last_positive = field
            .values
            .iter()
            .rposition(|v| *v > 0.0)
            .ok_or(ConstraintError::Unsatisfiable)?;
        Ok(Sampler { field, cumulative, last_positive })
    }

    pub fn cell(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let idx = self.cumulative.partition_point(|c| *c <= u);
        if idx > self.last_positive {
            self.last_positive
        } else {
            idx
        }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Point {
        let idx = self.cell(rng);
        let g = self.field.grid;
        let (c, r) = g.col_row(idx);
        let jx: f64 = rng.gen();
        let jy: f64 = rng.gen();
        Point::new(
            g.x_min + (c as f64 + jx) * g.cell_width(),
            g.y_min + (r as f64 + jy) * g.cell_height(),
        )
    }
}

pub fn sample(f: &SpatialField, seed: u64) -> Result<Point, ConstraintError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Sampler::new(f)?.draw(&mut rng))
}

/// `n` draws from a single seeded stream.
pub fn sample_many(f: &SpatialField, seed: u64, n: usize) -> Result<Vec<Point>, ConstraintError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = Sampler::new(f)?;
    Ok((0..n).map(|_| s.draw(&mut rng)).collect())
}
