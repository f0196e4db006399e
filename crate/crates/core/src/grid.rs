//! Polar midpoint grid on a disk.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Cell-centered polar grid. Cell `(i_r, i_theta)` has index `i_r * n_theta + i_theta`,
/// center `r_i e^{i theta_j}` with `r_i = (i + 1/2) dr`, `theta_j = j dtheta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainGrid {
    pub radius: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub dr: f64,
    pub dtheta: f64,
    #[serde(skip)]
    rings: Vec<f64>,
    #[serde(skip)]
    angles: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryNode {
    pub position: Complex64,
    pub normal: Complex64,
    pub weight: f64,
}

pub fn build_disk_domain(radius: f64, n_r: usize, n_theta: usize) -> Result<DomainGrid> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidGrid(format!("radius must be positive, got {radius}")));
    }
    if n_r < 1 {
        return Err(Error::InvalidGrid("n_r must be >= 1".into()));
    }
    if n_theta < 4 {
        return Err(Error::InvalidGrid(format!("n_theta must be >= 4, got {n_theta}")));
    }
    let dr = radius / n_r as f64;
    let dtheta = 2.0 * PI / n_theta as f64;
    let rings = (0..n_r).map(|i| (i as f64 + 0.5) * dr).collect();
    let angles = (0..n_theta)
        .map(|j| Complex64::from_polar(1.0, j as f64 * dtheta))
        .collect();
    Ok(DomainGrid { radius, n_r, n_theta, dr, dtheta, rings, angles })
}

impl DomainGrid {
    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i_r: usize, i_theta: usize) -> usize {
        i_r * self.n_theta + i_theta
    }

    /// Ring radii `r_i`.
    pub fn rings(&self) -> &[f64] {
        &self.rings
    }

    /// Unit vectors `e^{i theta_j}`.
    pub fn angles(&self) -> &[Complex64] {
        &self.angles
    }

    #[inline]
    pub fn ring_weight(&self, i_r: usize) -> f64 {
        self.rings[i_r] * self.dr * self.dtheta
    }

    #[inline]
    pub fn center(&self, cell: usize) -> Complex64 {
        let (i, j) = (cell / self.n_theta, cell % self.n_theta);
        self.angles[j] * self.rings[i]
    }

    #[inline]
    pub fn weight(&self, cell: usize) -> f64 {
        self.ring_weight(cell / self.n_theta)
    }

    pub fn centers(&self) -> Vec<Complex64> {
        (0..self.len()).map(|c| self.center(c)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|c| self.weight(c)).collect()
    }

    pub fn boundary_weight(&self) -> f64 {
        self.radius * self.dtheta
    }

    pub fn boundary_point(&self, j: usize) -> Complex64 {
        self.angles[j] * self.radius
    }

    /// Same layout refined by an integer factor in both directions.
    pub fn refined(&self, factor: usize) -> Result<DomainGrid> {
        build_disk_domain(self.radius, self.n_r * factor, self.n_theta * factor)
    }
}

pub fn boundary_nodes(domain: &DomainGrid) -> Vec<BoundaryNode> {
    let w = domain.boundary_weight();
    domain
        .angles
        .iter()
        .map(|&e| BoundaryNode { position: e * domain.radius, normal: e, weight: w })
        .collect()
}

/// `max |z - z0|` over boundary points z and z0 in the closed disk.
pub fn max_boundary_distance(domain: &DomainGrid) -> f64 {
    2.0 * domain.radius
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_area() {
        let g = build_disk_domain(1.0, 64, 128).unwrap();
        assert_eq!(g.len(), 8192);
        let s: f64 = g.weights().iter().sum();
        assert!((s - PI).abs() < 1e-12);
        let g = build_disk_domain(2.5, 7, 9).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - PI * 6.25).abs() < 1e-12);
    }

    #[test]
    fn single_ring() {
        let g = build_disk_domain(1.0, 1, 4).unwrap();
        for c in 0..4 {
            assert!((g.weight(c) - 0.5 * PI / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_disk_domain(1.0, 0, 4).is_err());
        assert!(build_disk_domain(1.0, 3, 3).is_err());
        assert!(build_disk_domain(-1.0, 3, 8).is_err());
        assert!(build_disk_domain(f64::NAN, 3, 8).is_err());
    }

    #[test]
    fn centers_inside_and_indexed() {
        let g = build_disk_domain(1.0, 5, 12).unwrap();
        for c in 0..g.len() {
            assert!(g.center(c).norm() < 1.0);
        }
        let z = g.center(g.index(2, 3));
        assert!((z.norm() - 2.5 * 0.2).abs() < 1e-15);
        assert!((z.arg() - 3.0 * g.dtheta).abs() < 1e-14);
    }

    #[test]
    fn boundary() {
        let g = build_disk_domain(1.0, 4, 128).unwrap();
        let b = boundary_nodes(&g);
        assert_eq!(b.len(), 128);
        assert_eq!(b[0].normal, Complex64::new(1.0, 0.0));
        let s: f64 = b.iter().map(|n| n.weight).sum();
        assert!((s - 2.0 * PI).abs() < 1e-12);
        assert!(b.iter().all(|n| (n.normal.norm() - 1.0).abs() < 1e-15));
        assert!((b[0].weight - 2.0 * PI / 128.0).abs() < 1e-15);
    }

    #[test]
    fn diameter() {
        assert_eq!(max_boundary_distance(&build_disk_domain(1.0, 2, 4).unwrap()), 2.0);
        assert_eq!(max_boundary_distance(&build_disk_domain(0.5, 2, 4).unwrap()), 1.0);
    }

    #[test]
    fn radial_quadrature_converges() {
        // exact integral of 1 - r^2 over the unit disk is pi/2
        let err = |n: usize| {
            let g = build_disk_domain(1.0, n, 2 * n).unwrap();
            let s: f64 = (0..g.len()).map(|c| g.weight(c) * (1.0 - g.center(c).norm_sqr())).sum();
            (s - PI / 2.0).abs()
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn deterministic() {
        let a = build_disk_domain(1.0, 9, 20).unwrap();
        let b = build_disk_domain(1.0, 9, 20).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.centers(), b.centers());
    }
}
