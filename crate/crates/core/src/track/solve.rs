//! Per-slot least-squares inversion of the forward model.

use crate::error::{Error, Result};
use crate::geometry::{LinkGeometry, Point2, Vec2};
// Float math for no_std builds; inherent methods take over when std is linked.
#[allow(unused_imports)]
use num_traits::Float;

/// Condition number above which the stacked system counts as singular.
pub const MAX_CONDITION: f64 = 1e8;

/// Solves `r_n = a_n · v` over the available links with a Tikhonov term
/// `regularization · |v|²`, then caps the speed at `v_max`.
///
/// `row[n]` is `None` for an unavailable cell.
pub fn solve_velocity(
    row: &[Option<f64>],
    position: Point2,
    links: &[LinkGeometry],
    regularization: f64,
    v_max: f64,
) -> Result<Vec2> {
    debug_assert_eq!(row.len(), links.len());
    let (mut sxx, mut sxy, mut syy, mut bx, mut by) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut used = 0;
    for (cell, link) in row.iter().zip(links) {
        let Some(r) = *cell else { continue };
        let a = link.fresnel_coefficients(position)?;
        sxx += a.x * a.x;
        sxy += a.x * a.y;
        syy += a.y * a.y;
        bx += a.x * r;
        by += a.y * r;
        used += 1;
    }
    if used < 2 {
        return Err(Error::InsufficientLinks(used));
    }
    // Eigenvalues of AᵀA are the squared singular values of A.
    let mean = 0.5 * (sxx + syy);
    let spread = (0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy).sqrt();
    let (hi, lo) = (mean + spread, mean - spread);
    let cond = if lo > 0.0 { (hi / lo).sqrt() } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularSystem(cond));
    }
    let (mxx, myy) = (sxx + regularization, syy + regularization);
    let det = mxx * myy - sxy * sxy;
    let v = Vec2::new((myy * bx - sxy * by) / det, (mxx * by - sxy * bx) / det);
    Ok(v.clamp_norm(v_max))
}

/// Velocity for the slot that ends at an unknown position reached from
/// `from` after one slot, found by fixed-point iteration on the position at
/// which the coefficients are evaluated.
pub fn solve_step(
    row: &[Option<f64>],
    from: Point2,
    links: &[LinkGeometry],
    regularization: f64,
    v_max: f64,
    slot: f64,
) -> Result<Vec2> {
    let mut v = solve_velocity(row, from, links, regularization, v_max)?;
    for _ in 0..20 {
        match solve_velocity(row, from + v * slot, links, regularization, v_max) {
            Ok(next) => {
                let moved = (next - v).norm();
                v = next;
                if moved < 1e-13 {
                    break;
                }
            }
            Err(_) => break,
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{default_layout, KinematicState};
    use alloc::vec::Vec;

    #[test]
    fn exact_round_trip_with_orthogonal_links() {
        let links = [
            LinkGeometry::new(0, Point2::new(-2.0, 0.0), Point2::new(2.0, 0.0)).unwrap(),
            LinkGeometry::new(1, Point2::new(0.0, -2.0), Point2::new(0.0, 2.0)).unwrap(),
        ];
        let p = Point2::new(0.7, 0.9);
        let v = Vec2::new(-0.6, 1.1);
        let row: Vec<Option<f64>> = links
            .iter()
            .map(|l| Some(l.forward_plcr(&KinematicState::new(p, v)).unwrap()))
            .collect();
        let got = solve_velocity(&row, p, &links, 0.0, 2.0).unwrap();
        assert!((got - v).norm() < 1e-9);
    }

    #[test]
    fn zero_rhs_gives_zero_velocity() {
        let links = default_layout(4).unwrap();
        let got = solve_velocity(&[Some(0.0); 4], Point2::new(0.3, -0.2), &links, 1e-3, 2.0).unwrap();
        assert_eq!(got, Vec2::ZERO);
    }

    #[test]
    fn duplicated_geometry_is_singular() {
        let l = LinkGeometry::new(0, Point2::new(2.4, -2.4), Point2::new(2.4, 2.4)).unwrap();
        let links = [l, LinkGeometry { id: 1, ..l }];
        let err = solve_velocity(&[Some(0.3), Some(0.3)], Point2::new(0.0, 0.5), &links, 0.0, 2.0);
        assert!(matches!(err, Err(Error::SingularSystem(_))));
    }

    #[test]
    fn needs_two_links() {
        let links = default_layout(2).unwrap();
        assert_eq!(
            solve_velocity(&[Some(0.3), None], Point2::ZERO, &links, 0.0, 2.0),
            Err(Error::InsufficientLinks(1))
        );
    }

    #[test]
    fn speed_is_capped() {
        let links = default_layout(4).unwrap();
        let p = Point2::new(0.2, 0.4);
        let v = Vec2::new(3.0, 1.0);
        let row: Vec<Option<f64>> = links
            .iter()
            .map(|l| Some(l.forward_plcr(&KinematicState::new(p, v)).unwrap()))
            .collect();
        let got = solve_velocity(&row, p, &links, 0.0, 2.0).unwrap();
        assert!((got.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn implicit_step_recovers_end_of_slot_velocity() {
        let links = default_layout(4).unwrap();
        let from = Point2::new(-0.5, 0.8);
        let v = Vec2::new(1.2, -0.4);
        let to = from + v * 0.1;
        let row: Vec<Option<f64>> = links
            .iter()
            .map(|l| Some(l.forward_plcr(&KinematicState::new(to, v)).unwrap()))
            .collect();
        let got = solve_step(&row, from, &links, 0.0, 2.0, 0.1).unwrap();
        assert!((got - v).norm() < 1e-6);
    }
}
