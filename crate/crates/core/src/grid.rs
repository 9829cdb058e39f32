//! Staggered one-dimensional grid on `(0, L)`.
//!
//! Heights live at the `N` cell centres `x_i = (i + 1/2) dx`, fluxes at the
//! `N + 1` faces `x_f = f dx`. Faces `0` and `N` are the boundary; a flux
//! field carries exact zeros there, so the discrete divergence telescopes and
//! integrates to zero. The gradient uses zero ghost differences at the
//! boundary faces (homogeneous Neumann), which makes it the negative adjoint
//! of the divergence under the cell and face inner products.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    cells: usize,
}

impl Grid {
    pub const MIN_CELLS: usize = 4;

    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(param(
                "L",
                format!("domain length must be positive, got {length}"),
            ));
        }
        if cells < Self::MIN_CELLS {
            return Err(param(
                "N",
                format!("need at least {} cells, got {cells}", Self::MIN_CELLS),
            ));
        }
        Ok(Self { length, cells })
    }

    /// Unit interval with `cells` cells.
    pub fn unit(cells: usize) -> Result<Self> {
        Self::new(1.0, cells)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn faces(&self) -> usize {
        self.cells + 1
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn face_position(&self, f: usize) -> f64 {
        f as f64 * self.dx()
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.cell_center(i)).collect()
    }

    /// Samples `f` at the cell centres.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> CellField {
        CellField((0..self.cells).map(|i| f(self.cell_center(i))).collect())
    }

    pub fn check_cells(&self, u: &CellField) -> Result<()> {
        if u.len() != self.cells {
            return Err(Error::LengthMismatch {
                expected: self.cells,
                got: u.len(),
            });
        }
        Ok(())
    }

    pub fn check_faces(&self, j: &FaceField) -> Result<()> {
        if j.len() != self.faces() {
            return Err(Error::LengthMismatch {
                expected: self.faces(),
                got: j.len(),
            });
        }
        Ok(())
    }
}

/// Values at cell centres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellField(pub Vec<f64>);

/// Values at faces. A flux-typed face field has exact zeros at both ends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceField(pub Vec<f64>);

macro_rules! field_common {
    ($ty:ident) => {
        impl $ty {
            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn iter(&self) -> std::slice::Iter<'_, f64> {
                self.0.iter()
            }

            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }
        }

        impl std::ops::Index<usize> for $ty {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl std::ops::IndexMut<usize> for $ty {
            fn index_mut(&mut self, i: usize) -> &mut f64 {
                &mut self.0[i]
            }
        }

        impl From<Vec<f64>> for $ty {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }
    };
}

field_common!(CellField);
field_common!(FaceField);

impl CellField {
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellField {
        CellField(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl FaceField {
    pub fn is_flux_typed(&self) -> bool {
        self.0.first() == Some(&0.0) && self.0.last() == Some(&0.0)
    }

    /// Flux field from its interior entries (faces `1..N`).
    pub fn from_interior(interior: &[f64]) -> FaceField {
        let mut v = Vec::with_capacity(interior.len() + 2);
        v.push(0.0);
        v.extend_from_slice(interior);
        v.push(0.0);
        FaceField(v)
    }

    pub fn interior(&self) -> &[f64] {
        &self.0[1..self.0.len() - 1]
    }
}

/// `out_i = (j_{i+1} - j_i) / dx`.
pub fn divergence(g: &Grid, j: &FaceField) -> Result<CellField> {
    g.check_faces(j)?;
    if !j.is_flux_typed() {
        return Err(Error::NotFluxTyped {
            left: j[0],
            right: j[g.cells()],
        });
    }
    let mut out = vec![0.0; g.cells()];
    divergence_into(g.dx(), &j.0, &mut out);
    Ok(CellField(out))
}

/// Interior faces get the one-sided difference, boundary faces zero.
pub fn gradient(g: &Grid, u: &CellField) -> Result<FaceField> {
    g.check_cells(u)?;
    let mut out = vec![0.0; g.faces()];
    gradient_into(g.dx(), &u.0, &mut out);
    Ok(FaceField(out))
}

/// `divergence(gradient(u))`.
pub fn laplacian_neumann(g: &Grid, u: &CellField) -> Result<CellField> {
    g.check_cells(u)?;
    let mut out = vec![0.0; g.cells()];
    laplacian_into(g.dx(), &u.0, &mut out);
    Ok(CellField(out))
}

/// Midpoint quadrature `sum_i f_i dx`.
pub fn integrate(g: &Grid, f: &CellField) -> f64 {
    f.0.iter().sum::<f64>() * g.dx()
}

/// Face inner product `sum_f a_f b_f dx` over all faces.
pub fn face_dot(g: &Grid, a: &FaceField, b: &FaceField) -> f64 {
    a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum::<f64>() * g.dx()
}

/// Cell inner product `sum_i a_i b_i dx`.
pub fn cell_dot(g: &Grid, a: &CellField, b: &CellField) -> f64 {
    a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum::<f64>() * g.dx()
}

// Slice kernels used by the solver hot loops.

pub(crate) fn divergence_into(dx: f64, j: &[f64], out: &mut [f64]) {
    debug_assert_eq!(j.len(), out.len() + 1);
    for (i, o) in out.iter_mut().enumerate() {
        *o = (j[i + 1] - j[i]) / dx;
    }
}

pub(crate) fn gradient_into(dx: f64, u: &[f64], out: &mut [f64]) {
    let n = u.len();
    debug_assert_eq!(out.len(), n + 1);
    out[0] = 0.0;
    out[n] = 0.0;
    for f in 1..n {
        out[f] = (u[f] - u[f - 1]) / dx;
    }
}

pub(crate) fn laplacian_into(dx: f64, u: &[f64], out: &mut [f64]) {
    let n = u.len();
    let inv = 1.0 / (dx * dx);
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { u[i - 1] - u[i] };
        let right = if i + 1 == n { 0.0 } else { u[i + 1] - u[i] };
        out[i] = (left + right) * inv;
    }
}
