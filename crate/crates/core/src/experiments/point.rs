use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, CellField, Grid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointWitness {
    pub found: bool,
    pub index: Option<usize>,
    pub x0: Option<f64>,
    pub min_u: f64,
    pub max_u: f64,
    /// `(D - delta)/2`.
    pub grad_bound: f64,
    /// `(D - delta)^2 / (4 log(D/delta))`.
    pub curvature_bound: f64,
    pub tol_fd: f64,
    /// `1/2 |u'|^2 + log u` at the cells, `|u'|^2` averaged from the faces.
    pub hamiltonian: Vec<f64>,
}

/// Searches for a cell where `|u'|` and `u u''` are both large.
pub fn point_lemma_check(u: &CellField, g: &Grid) -> Result<PointWitness> {
    g.check_cells(u)?;
    if u.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Precondition("u must be strictly positive".into()));
    }
    let grad = grid::gradient(g, u)?;
    let lap = grid::laplacian_neumann(g, u)?;
    let hamiltonian: Vec<f64> = (0..g.cells())
        .map(|i| {
            let gsq = 0.5 * (grad.0[i] * grad.0[i] + grad.0[i + 1] * grad.0[i + 1]);
            0.5 * gsq + u.0[i].ln()
        })
        .collect();
    let (delta, d) = (u.min(), u.max());
    if d == delta {
        return Ok(PointWitness {
            found: true,
            index: Some(0),
            x0: Some(g.cell_center(0)),
            min_u: delta,
            max_u: d,
            grad_bound: 0.0,
            curvature_bound: 0.0,
            tol_fd: 0.0,
            hamiltonian,
        });
    }
    let grad_bound = (d - delta) / 2.0;
    let curvature_bound = (d - delta).powi(2) / (4.0 * (d / delta).ln());
    let tol_fd = 5.0 * g.dx() * curvature_bound;
    let index = (0..g.cells()).find(|&i| {
        let slope = grad.0[i].abs().max(grad.0[i + 1].abs());
        slope >= grad_bound && u.0[i] * lap.0[i] >= curvature_bound - tol_fd
    });
    Ok(PointWitness {
        found: index.is_some(),
        index,
        x0: index.map(|i| g.cell_center(i)),
        min_u: delta,
        max_u: d,
        grad_bound,
        curvature_bound,
        tol_fd,
        hamiltonian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::build_w_l;

    #[test]
    fn constant_passes_trivially() {
        let g = Grid::unit(16).unwrap();
        let w = point_lemma_check(&CellField(vec![1.0; 16]), &g).unwrap();
        assert!(w.found);
        assert_eq!(w.curvature_bound, 0.0);
    }

    #[test]
    fn bump_has_witness() {
        let g = Grid::unit(512).unwrap();
        let wp = build_w_l(0.5, &g).unwrap();
        let u = wp.w.map(|w| 0.1 + 0.9 * w / wp.beta);
        let w = point_lemma_check(&u, &g).unwrap();
        assert!(w.found, "{:?}", (w.grad_bound, w.curvature_bound));
    }

    #[test]
    fn rejects_nonpositive() {
        let g = Grid::unit(8).unwrap();
        let mut u = vec![1.0; 8];
        u[3] = 0.0;
        assert!(point_lemma_check(&CellField(u), &g).is_err());
    }
}
