//! Discrete fractional Sobolev quantities.

use super::transforms::Grid;
use crate::error::{Error, Result};

/// Periodic lateral / plain vertical squared distance between two cells.
fn cell_dist_sq(grid: &Grid, a: usize, b: usize) -> f64 {
    let (la, za) = (a / grid.nz, a % grid.nz);
    let (lb, zb) = (b / grid.nz, b % grid.nz);
    let pa = grid.lat_coord(la);
    let pb = grid.lat_coord(lb);
    let mut d2 = 0.0;
    for axis in 0..grid.d_lat {
        let mut dx = (pa[axis] - pb[axis]).abs();
        if dx > 0.5 {
            dx = 1.0 - dx;
        }
        d2 += dx * dx;
    }
    let dz = (za as f64 - zb as f64) * grid.dz();
    d2 + dz * dz
}

/// Discrete Gagliardo double sum
/// `sum_{x != y in region} |u(x) - u(y)|^2 / |x - y|^(d + 2s) * vol^2`
/// (the squared seminorm; the diagonal is excluded).
pub fn gagliardo_seminorm(grid: &Grid, u: &[f64], s: f64, mask: &[bool]) -> Result<f64> {
    if !(0.0 < s && s < 1.0) {
        return Err(Error::Parameter(format!("gagliardo exponent s must be in (0,1), got {s}")));
    }
    assert_eq!(u.len(), grid.n_cells());
    assert_eq!(mask.len(), grid.n_cells());
    let cells: Vec<usize> = (0..grid.n_cells()).filter(|&c| mask[c]).collect();
    if cells.is_empty() {
        return Err(Error::Parameter("gagliardo region is empty".into()));
    }
    let d = grid.d_lat as f64 + 1.0;
    let expo = -(d + 2.0 * s) / 2.0;
    let vol2 = grid.cell_vol() * grid.cell_vol();
    let mut sum = 0.0;
    for (idx, &a) in cells.iter().enumerate() {
        let ua = u[a];
        for &b in cells.iter().skip(idx + 1) {
            let diff = ua - u[b];
            if diff == 0.0 {
                continue;
            }
            sum += diff * diff * cell_dist_sq(grid, a, b).powf(expo);
        }
    }
    Ok(2.0 * sum * vol2)
}

/// Quadrature L2 norm of a grid field, optionally restricted to a mask.
pub fn l2_norm_sq(grid: &Grid, u: &[f64], mask: Option<&[bool]>) -> f64 {
    let vol = grid.cell_vol();
    match mask {
        None => u.iter().map(|v| v * v).sum::<f64>() * vol,
        Some(m) => u
            .iter()
            .zip(m)
            .filter(|(_, &keep)| keep)
            .map(|(v, _)| v * v)
            .sum::<f64>()
            * vol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_has_zero_seminorm() {
        let grid = Grid::new(1, 8, 8, 3.0).unwrap();
        let u = vec![4.2; grid.n_cells()];
        let mask = vec![true; grid.n_cells()];
        assert_eq!(gagliardo_seminorm(&grid, &u, 0.3, &mask).unwrap(), 0.0);
    }

    #[test]
    fn scaling_is_quadratic() {
        let grid = Grid::new(1, 8, 8, 3.0).unwrap();
        let u: Vec<f64> = (0..grid.n_cells()).map(|i| (i % 7) as f64).collect();
        let u2: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        let mask = vec![true; grid.n_cells()];
        let a = gagliardo_seminorm(&grid, &u, 0.4, &mask).unwrap();
        let b = gagliardo_seminorm(&grid, &u2, 0.4, &mask).unwrap();
        approx::assert_relative_eq!(b, 4.0 * a, max_relative = 1e-12);
    }

    #[test]
    fn indicator_seminorm_increases_with_s() {
        let grid = Grid::new(1, 12, 12, 3.0).unwrap();
        // indicator of the lower half box
        let u: Vec<f64> = (0..grid.n_cells())
            .map(|c| if (c % grid.nz) < grid.nz / 2 { 1.0 } else { 0.0 })
            .collect();
        let mask = vec![true; grid.n_cells()];
        let lo = gagliardo_seminorm(&grid, &u, 0.25, &mask).unwrap();
        let hi = gagliardo_seminorm(&grid, &u, 0.45, &mask).unwrap();
        assert!(hi > lo, "seminorm should increase with s: {lo} vs {hi}");
    }

    #[test]
    fn rejects_bad_exponent() {
        let grid = Grid::new(1, 8, 8, 3.0).unwrap();
        let u = vec![0.0; grid.n_cells()];
        let mask = vec![true; grid.n_cells()];
        assert!(gagliardo_seminorm(&grid, &u, 1.2, &mask).is_err());
    }
}
