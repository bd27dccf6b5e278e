//! Cell-centered rectangular grids, fields, and discrete operators.
//!
//! Fields are stored lexicographically with axis 0 varying fastest. Every
//! operator closes the boundary with mirror ghost cells (ghost value equals
//! the adjacent interior value), so the discrete normal derivative and every
//! boundary face flux vanish exactly.

use std::sync::Arc;

use thiserror::Error;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("extent has {extent} entries but cells has {cells}")]
    AxisCountMismatch { extent: usize, cells: usize },
    #[error("extent along axis {axis} must be finite and > 0, got {value}")]
    BadExtent { axis: usize, value: f64 },
    #[error("cell count along axis {axis} must be >= {min}, got {value}")]
    TooFewCells { axis: usize, value: usize, min: usize },
    #[error("field has {got} values but grid has {expected} cells")]
    LengthMismatch { expected: usize, got: usize },
}

/// Geometry and resolution of a box-shaped domain.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    extent: Vec<f64>,
    cells: Vec<usize>,
    spacing: Vec<f64>,
}

impl GridSpec {
    /// Smallest admissible cell count per axis.
    pub const MIN_CELLS: usize = 2;

    pub fn new(extent: &[f64], cells: &[usize]) -> Result<Self, GridError> {
        if extent.len() != cells.len() {
            return Err(GridError::AxisCountMismatch {
                extent: extent.len(),
                cells: cells.len(),
            });
        }
        let dim = extent.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(GridError::BadDimension(dim));
        }
        for (axis, &value) in extent.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(GridError::BadExtent { axis, value });
            }
        }
        for (axis, &value) in cells.iter().enumerate() {
            if value < Self::MIN_CELLS {
                return Err(GridError::TooFewCells {
                    axis,
                    value,
                    min: Self::MIN_CELLS,
                });
            }
        }
        let spacing = extent
            .iter()
            .zip(cells)
            .map(|(&l, &n)| l / n as f64)
            .collect();
        Ok(Self {
            extent: extent.to_vec(),
            cells: cells.to_vec(),
            spacing,
        })
    }

    /// Cube `[0, length]^dim` with `n` cells per axis.
    pub fn uniform(dim: usize, length: f64, n: usize) -> Result<Self, GridError> {
        Self::new(&vec![length; dim], &vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.extent.len()
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Product of the spacings.
    pub fn volume_element(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// |Ω|, the product of the extents.
    pub fn domain_measure(&self) -> f64 {
        self.extent.iter().product()
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distance in the flat array between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.cells[..axis].iter().product()
    }

    /// Integer coordinates of a flat index.
    pub fn coords(&self, mut index: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        for (axis, &n) in self.cells.iter().enumerate() {
            c[axis] = index % n;
            index /= n;
        }
        c
    }

    /// Physical position of the center of cell `index`. Unused axes are 0.
    pub fn cell_center(&self, index: usize) -> [f64; MAX_DIM] {
        let c = self.coords(index);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim() {
            x[axis] = (c[axis] as f64 + 0.5) * self.spacing[axis];
        }
        x
    }

    /// Calls `visit(left, right)` for every interior face normal to `axis`,
    /// in a fixed order.
    pub(crate) fn for_each_face(&self, axis: usize, mut visit: impl FnMut(usize, usize)) {
        let n = self.cells[axis];
        let inner = self.stride(axis);
        let outer = self.len() / (n * inner);
        for o in 0..outer {
            let base = o * n * inner;
            for k in 0..n - 1 {
                let row = base + k * inner;
                for j in 0..inner {
                    visit(row + j, row + j + inner);
                }
            }
        }
    }
}

/// A scalar quantity sampled at cell centers.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Arc<GridSpec>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &Arc<GridSpec>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<GridSpec>, value: f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<GridSpec>, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: &Arc<GridSpec>, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| f(&grid.cell_center(i)[..dim]))
            .collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_same_grid(self, other);
        Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }
}

fn assert_same_grid(a: &Field, b: &Field) {
    assert!(a.same_grid(b), "fields live on different grids");
}

/// One cell-centered component per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<Field>,
}

impl VectorField {
    pub fn zeros(grid: &Arc<GridSpec>) -> Self {
        Self {
            components: (0..grid.dim()).map(|_| Field::zeros(grid)).collect(),
        }
    }

    pub fn from_components(components: Vec<Field>) -> Self {
        assert!(!components.is_empty() && components.len() <= MAX_DIM);
        for c in &components[1..] {
            assert_same_grid(&components[0], c);
        }
        Self { components }
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Field] {
        &mut self.components
    }

    pub fn component(&self, axis: usize) -> &Field {
        &self.components[axis]
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        self.components[0].grid()
    }

    /// Euclidean norm of the vector at cell `index`.
    pub fn norm_at(&self, index: usize) -> f64 {
        self.components
            .iter()
            .map(|c| c.values[index] * c.values[index])
            .sum::<f64>()
            .sqrt()
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> Field {
        let grid = self.grid();
        Field {
            grid: Arc::clone(grid),
            values: (0..grid.len()).map(|i| self.norm_at(i)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(Field::is_finite)
    }
}

/// Second-order Laplacian with zero-flux closure.
pub fn laplacian(f: &Field) -> Field {
    let grid = f.grid();
    let mut out = vec![0.0; grid.len()];
    for (axis, &h) in grid.spacing().iter().enumerate() {
        let inv_h2 = 1.0 / (h * h);
        grid.for_each_face(axis, |l, r| {
            let flux = (f.values[r] - f.values[l]) * inv_h2;
            out[l] += flux;
            out[r] -= flux;
        });
    }
    Field {
        grid: Arc::clone(grid),
        values: out,
    }
}

/// Central-difference gradient with mirror ghosts.
pub fn gradient(f: &Field) -> VectorField {
    let grid = f.grid();
    let len = grid.len();
    let components = (0..grid.dim())
        .map(|axis| {
            let n = grid.cells()[axis];
            let stride = grid.stride(axis);
            let inv_2h = 0.5 / grid.spacing()[axis];
            let values = (0..len)
                .map(|i| {
                    let k = (i / stride) % n;
                    let lo = if k == 0 { i } else { i - stride };
                    let hi = if k == n - 1 { i } else { i + stride };
                    (f.values[hi] - f.values[lo]) * inv_2h
                })
                .collect();
            Field {
                grid: Arc::clone(grid),
                values,
            }
        })
        .collect();
    VectorField { components }
}

/// Conservative upwind discretization of `∇·(coeff · carrier · ∇potential)`.
///
/// Each interior face carries `q · carrier_upwind` with
/// `q = coeff · (potential_R − potential_L) / h`; the upwind cell is the one
/// the velocity points away from, and a zero velocity averages both sides.
/// Boundary faces carry nothing, so the volume sum of the result telescopes
/// to zero.
pub fn taxis_divergence(carrier: &Field, potential: &Field, coeff: f64) -> Field {
    assert_same_grid(carrier, potential);
    let grid = carrier.grid();
    let mut out = vec![0.0; grid.len()];
    if coeff != 0.0 {
        for (axis, &h) in grid.spacing().iter().enumerate() {
            let inv_h = 1.0 / h;
            grid.for_each_face(axis, |l, r| {
                let q = coeff * (potential.values[r] - potential.values[l]) * inv_h;
                let upwind = if q > 0.0 {
                    carrier.values[l]
                } else if q < 0.0 {
                    carrier.values[r]
                } else {
                    0.5 * (carrier.values[l] + carrier.values[r])
                };
                let flux = q * upwind * inv_h;
                out[l] += flux;
                out[r] -= flux;
            });
        }
    }
    Field {
        grid: Arc::clone(grid),
        values: out,
    }
}

/// Largest face velocity magnitude `|coeff · Δpotential / h|` per axis.
pub fn max_face_speed(potential: &Field, coeff: f64) -> Vec<f64> {
    let grid = potential.grid();
    (0..grid.dim())
        .map(|axis| {
            let inv_h = 1.0 / grid.spacing()[axis];
            let mut m = 0.0_f64;
            grid.for_each_face(axis, |l, r| {
                m = m.max((coeff * (potential.values[r] - potential.values[l]) * inv_h).abs());
            });
            m
        })
        .collect()
}

/// ∫_Ω f, summed sequentially in storage order.
pub fn integrate(f: &Field) -> f64 {
    let mut sum = 0.0;
    for &v in &f.values {
        sum += v;
    }
    f.grid.volume_element() * sum
}

/// (∫|f|^p)^{1/p}.
pub fn lp_norm(f: &Field, p: f64) -> f64 {
    assert!(p >= 1.0, "lp_norm requires p >= 1, got {p}");
    let mut sum = 0.0;
    for &v in &f.values {
        sum += v.abs().powf(p);
    }
    (f.grid.volume_element() * sum).powf(1.0 / p)
}

pub fn sup_norm(f: &Field) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_value(f: &Field) -> f64 {
    f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_value(f: &Field) -> f64 {
    f.values.iter().copied().fold(f64::INFINITY, f64::min)
}
