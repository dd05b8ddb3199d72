//! Membership predicates for the localized regions `Z_tau(x)`.
//!
//! Every local depth in this crate is the probability that a random tuple of
//! sample points lands in a closed region attached to the query point. The
//! predicates below decide that membership for one tuple. They are pure and
//! allocation-free for the pair families, so estimators call them in their
//! inner loops.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance applied to barycentric coordinates in [`simplex_contains`].
pub const BARYCENTRIC_TOL: f64 = 1e-12;

const UNIT_DIRECTION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Lens,
    Spherical,
    BetaSkeleton { beta: f64 },
    Simplicial,
    HalfspaceCube,
    HalfRegionCubes,
}

impl Family {
    pub fn beta(&self) -> Option<f64> {
        match *self {
            Family::BetaSkeleton { beta } => Some(beta),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Lens => "lens",
            Family::Spherical => "spherical",
            Family::BetaSkeleton { .. } => "beta_skeleton",
            Family::Simplicial => "simplicial",
            Family::HalfspaceCube => "halfspace",
            Family::HalfRegionCubes => "halfregion",
        }
    }

    /// Short label used in result tables (`LLD`, `LSD`, ...).
    pub fn label(&self) -> String {
        match *self {
            Family::Lens => "LLD".into(),
            Family::Spherical => "LBD".into(),
            Family::BetaSkeleton { beta } => format!("LK{beta}D"),
            Family::Simplicial => "LSD".into(),
            Family::HalfspaceCube => "LHD".into(),
            Family::HalfRegionCubes => "LRD".into(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::BetaSkeleton { beta } => write!(f, "beta:{beta}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Accepts `lens`, `spherical`, `simplicial`, `halfspace`, `halfregion`
    /// and `beta:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        if let Some(rest) = lower
            .strip_prefix("beta:")
            .or_else(|| lower.strip_prefix("beta_skeleton:"))
        {
            let beta: f64 = rest
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad beta value `{rest}`")))?;
            return Ok(Family::BetaSkeleton { beta });
        }
        match lower.as_str() {
            "lens" | "lld" => Ok(Family::Lens),
            "spherical" | "lbd" => Ok(Family::Spherical),
            "simplicial" | "lsd" => Ok(Family::Simplicial),
            "halfspace" | "lhd" => Ok(Family::HalfspaceCube),
            "halfregion" | "lrd" => Ok(Family::HalfRegionCubes),
            _ => Err(Error::InvalidParameter(format!("unknown depth family `{s}`"))),
        }
    }
}

/// A depth family together with the sample-space dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub family: Family,
    pub dim: usize,
}

impl RegionSpec {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if let Family::BetaSkeleton { beta } = family {
            if !(beta.is_finite() && beta >= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "beta-skeleton needs beta >= 1, got {beta}"
                )));
            }
        }
        Ok(Self { family, dim })
    }

    pub fn lens(dim: usize) -> Self {
        Self { family: Family::Lens, dim }
    }

    /// Number of sample points forming one tuple of the U-statistic.
    pub fn arity(&self) -> usize {
        match self.family {
            Family::Lens | Family::Spherical | Family::BetaSkeleton { .. } => 2,
            Family::Simplicial => self.dim + 1,
            Family::HalfspaceCube | Family::HalfRegionCubes => 1,
        }
    }

    /// `c` such that every member tuple satisfies `||x - x_i|| <= c * tau`.
    pub fn reach(&self) -> f64 {
        match self.family {
            Family::Lens | Family::Spherical | Family::Simplicial => 1.0,
            Family::BetaSkeleton { beta } => ((beta + 1.0) / 2.0).max(1.0),
            Family::HalfspaceCube | Family::HalfRegionCubes => (self.dim as f64).sqrt(),
        }
    }

    /// Whether [`membership`] expects a unit direction.
    pub fn needs_direction(&self) -> bool {
        matches!(self.family, Family::HalfspaceCube)
    }

    /// Membership of an index tuple of distinct sample points. Inputs are
    /// assumed validated; this is the estimator hot path.
    #[inline]
    pub(crate) fn contains_unchecked(&self, x: &[f64], tuple: &[&[f64]], tau: f64) -> bool {
        match self.family {
            Family::Lens => lens_member(x, tuple[0], tuple[1], tau),
            Family::Spherical => spherical_member(x, tuple[0], tuple[1], tau),
            Family::BetaSkeleton { beta } => beta_member(x, tuple[0], tuple[1], beta, tau),
            Family::Simplicial => simplicial_member(x, tuple, tau),
            Family::HalfspaceCube | Family::HalfRegionCubes => {
                unreachable!("cube families are evaluated per point")
            }
        }
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

#[inline]
fn within_tau(d: f64, tau: f64) -> bool {
    tau.is_infinite() || d <= tau
}

#[inline]
pub(crate) fn lens_member(x: &[f64], a: &[f64], b: &[f64], tau: f64) -> bool {
    let d = dist(a, b);
    within_tau(d, tau) && dist(x, a) <= d && dist(x, b) <= d
}

#[inline]
pub(crate) fn spherical_member(x: &[f64], a: &[f64], b: &[f64], tau: f64) -> bool {
    let d = dist(a, b);
    if !within_tau(d, tau) {
        return false;
    }
    let off: f64 = x
        .iter()
        .zip(a.iter().zip(b))
        .map(|(&xi, (&ai, &bi))| {
            let t = (ai + bi) - 2.0 * xi;
            t * t
        })
        .sum();
    off.sqrt() <= d
}

#[inline]
pub(crate) fn beta_member(x: &[f64], a: &[f64], b: &[f64], beta: f64, tau: f64) -> bool {
    let d = dist(a, b);
    if !within_tau(d, tau) {
        return false;
    }
    let c = 2.0 / beta - 1.0;
    let s = 2.0 / beta;
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    for ((&xi, &ai), &bi) in x.iter().zip(a).zip(b) {
        let t1 = (ai + c * bi) - s * xi;
        let t2 = (bi + c * ai) - s * xi;
        n1 += t1 * t1;
        n2 += t2 * t2;
    }
    n1.sqrt() <= d && n2.sqrt() <= d
}

#[inline]
pub(crate) fn simplicial_member(x: &[f64], vertices: &[&[f64]], tau: f64) -> bool {
    if !tau.is_infinite() {
        for i in 1..vertices.len() {
            for j in 0..i {
                if dist(vertices[i], vertices[j]) > tau {
                    return false;
                }
            }
        }
    }
    simplex_contains(vertices, x, BARYCENTRIC_TOL)
}

/// Closed-simplex containment via barycentric coordinates.
///
/// In one dimension the simplex is the closed interval spanned by the two
/// vertices and the test is exact. Otherwise the `(p+1)x(p+1)` affine system
/// is solved with partial pivoting; a numerically singular system returns
/// `false`.
pub fn simplex_contains(vertices: &[&[f64]], x: &[f64], tol: f64) -> bool {
    let p = x.len();
    if vertices.len() != p + 1 {
        return false;
    }
    if p == 1 {
        let (a, b) = (vertices[0][0], vertices[1][0]);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        return lo <= x[0] && x[0] <= hi;
    }
    let m = p + 1;
    // Row-major augmented matrix [V; 1 | x; 1].
    let mut a = vec![0.0; m * (m + 1)];
    let mut scale = 0.0f64;
    for r in 0..m {
        for c in 0..m {
            let v = if r < p { vertices[c][r] } else { 1.0 };
            a[r * (m + 1) + c] = v;
            scale = scale.max(v.abs());
        }
        a[r * (m + 1) + m] = if r < p { x[r] } else { 1.0 };
    }
    let eps = 1e-12 * scale.max(1.0);
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| {
                a[i * (m + 1) + col]
                    .abs()
                    .total_cmp(&a[j * (m + 1) + col].abs())
            })
            .unwrap_or(col);
        if a[pivot * (m + 1) + col].abs() <= eps {
            return false;
        }
        if pivot != col {
            for c in 0..=m {
                a.swap(pivot * (m + 1) + c, col * (m + 1) + c);
            }
        }
        let inv = 1.0 / a[col * (m + 1) + col];
        for r in (col + 1)..m {
            let factor = a[r * (m + 1) + col] * inv;
            if factor != 0.0 {
                for c in col..=m {
                    a[r * (m + 1) + c] -= factor * a[col * (m + 1) + c];
                }
            }
        }
    }
    let mut lambda = vec![0.0; m];
    for r in (0..m).rev() {
        let mut s = a[r * (m + 1) + m];
        for c in (r + 1)..m {
            s -= a[r * (m + 1) + c] * lambda[c];
        }
        lambda[r] = s / a[r * (m + 1) + r];
    }
    lambda.iter().all(|&l| l >= -tol)
}

/// Bounds of the hypercube `Z^H_tau(x, u)` along one axis, relative to `x`.
#[inline]
fn cube_offsets(u: f64, tau: f64) -> (f64, f64) {
    if tau.is_infinite() {
        let lo = if u - 1.0 == 0.0 { 0.0 } else { f64::NEG_INFINITY };
        let hi = if u + 1.0 == 0.0 { 0.0 } else { f64::INFINITY };
        (lo, hi)
    } else {
        (0.5 * tau * (u - 1.0), 0.5 * tau * (u + 1.0))
    }
}

/// `y` lies in the hypercube of side `tau` centred at `x + tau/2 u`.
#[inline]
pub(crate) fn halfspace_cube_member(x: &[f64], y: &[f64], u: &[f64], tau: f64) -> bool {
    x.iter().zip(y).zip(u).all(|((&xi, &yi), &ui)| {
        let (lo, hi) = cube_offsets(ui, tau);
        let d = yi - xi;
        lo <= d && d <= hi
    })
}

/// Membership in the upper and lower half-region cubes `Z^{R+}`, `Z^{R-}`.
#[inline]
pub(crate) fn half_region_member(x: &[f64], y: &[f64], tau: f64) -> (bool, bool) {
    let mut upper = true;
    let mut lower = true;
    for (&xi, &yi) in x.iter().zip(y) {
        let d = yi - xi;
        upper &= d >= 0.0 && within_tau(d, tau);
        lower &= d <= 0.0 && within_tau(-d, tau);
    }
    (upper, lower)
}

fn check_point(p: &[f64], dim: usize, what: &'static str) -> Result<()> {
    if p.len() != dim {
        return Err(Error::Dimension { expected: dim, got: p.len() });
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Whether `tuple` lies in the closed region `Z_tau(x)` of `spec`.
///
/// `tau` may be `f64::INFINITY`. For [`Family::HalfspaceCube`] a unit
/// direction `u` must be supplied; for [`Family::HalfRegionCubes`] the
/// predicate tests the upper cube `Z^{R+}` (the lower cube is its reflection
/// through `x`).
pub fn membership(
    spec: &RegionSpec,
    x: &[f64],
    tuple: &[&[f64]],
    tau: f64,
    direction: Option<&[f64]>,
) -> Result<bool> {
    if tau.is_nan() {
        return Err(Error::NonFinite("tau"));
    }
    if tau < 0.0 {
        return Err(Error::NegativeTau(tau));
    }
    if tuple.len() != spec.arity() {
        return Err(Error::Arity { expected: spec.arity(), got: tuple.len() });
    }
    check_point(x, spec.dim, "query point")?;
    for t in tuple {
        check_point(t, spec.dim, "tuple point")?;
    }
    match (spec.needs_direction(), direction) {
        (true, None) => {
            return Err(Error::InvalidParameter("half-space cube needs a direction".into()))
        }
        (false, Some(_)) => {
            return Err(Error::InvalidParameter(format!(
                "{} takes no direction",
                spec.family.name()
            )))
        }
        (true, Some(u)) => {
            check_point(u, spec.dim, "direction")?;
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > UNIT_DIRECTION_TOL {
                return Err(Error::InvalidParameter(format!(
                    "direction must have unit norm, got {norm}"
                )));
            }
        }
        (false, None) => {}
    }
    Ok(match spec.family {
        Family::HalfspaceCube => halfspace_cube_member(x, tuple[0], direction.unwrap(), tau),
        Family::HalfRegionCubes => half_region_member(x, tuple[0], tau).0,
        _ => spec.contains_unchecked(x, tuple, tau),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lens2() -> RegionSpec {
        RegionSpec::lens(2)
    }

    #[test]
    fn lens_boundary_is_inside() {
        let t: [&[f64]; 2] = [&[1.0, 0.0], &[-1.0, 0.0]];
        assert!(membership(&lens2(), &[0.0, 0.0], &t, 2.0, None).unwrap());
        assert!(!membership(&lens2(), &[0.0, 0.0], &t, 1.9, None).unwrap());
    }

    #[test]
    fn simplicial_diameter_bound() {
        let spec = RegionSpec::new(Family::Simplicial, 2).unwrap();
        let t: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]];
        assert!(membership(&spec, &[0.1, 0.1], &t, 1.5, None).unwrap());
        assert!(!membership(&spec, &[0.1, 0.1], &t, 1.4, None).unwrap());
    }

    #[test]
    fn spherical_as_unit_beta() {
        let spec = RegionSpec::new(Family::BetaSkeleton { beta: 1.0 }, 2).unwrap();
        let t: [&[f64]; 2] = [&[1.0, 0.0], &[-1.0, 0.0]];
        assert!(membership(&spec, &[0.0, 0.0], &t, 2.0, None).unwrap());
    }

    #[test]
    fn simplex_contains_cases() {
        let v: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]];
        assert!(simplex_contains(&v, &[0.25, 0.25], BARYCENTRIC_TOL));
        assert!(!simplex_contains(&v, &[1.0, 1.0], BARYCENTRIC_TOL));
        let degenerate: [&[f64]; 3] = [&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]];
        for x in [[0.5, 0.0], [1.0, 0.0], [3.0, 3.0]] {
            assert!(!simplex_contains(&degenerate, &x, BARYCENTRIC_TOL));
        }
    }

    #[test]
    fn errors() {
        let t: [&[f64]; 1] = [&[1.0, 0.0]];
        assert!(matches!(
            membership(&lens2(), &[0.0, 0.0], &t, 1.0, None),
            Err(Error::Arity { .. })
        ));
        let t: [&[f64]; 2] = [&[1.0, f64::NAN], &[0.0, 0.0]];
        assert!(matches!(
            membership(&lens2(), &[0.0, 0.0], &t, 1.0, None),
            Err(Error::NonFinite(_))
        ));
        let t: [&[f64]; 2] = [&[1.0, 0.0], &[0.0, 0.0]];
        assert!(matches!(
            membership(&lens2(), &[0.0, 0.0], &t, -1.0, None),
            Err(Error::NegativeTau(_))
        ));
        let cube = RegionSpec::new(Family::HalfspaceCube, 2).unwrap();
        let y: [&[f64]; 1] = [&[0.1, 0.1]];
        assert!(membership(&cube, &[0.0, 0.0], &y, 1.0, None).is_err());
        assert!(membership(&cube, &[0.0, 0.0], &y, 1.0, Some(&[1.0, 1.0])).is_err());
        assert!(RegionSpec::new(Family::BetaSkeleton { beta: 0.5 }, 2).is_err());
    }

    #[test]
    fn infinite_tau_short_circuits() {
        let t: [&[f64]; 2] = [&[100.0, 0.0], &[-100.0, 0.0]];
        assert!(membership(&lens2(), &[0.0, 0.0], &t, f64::INFINITY, None).unwrap());
    }

    #[test]
    fn halfspace_cube_contains_corner_region() {
        let cube = RegionSpec::new(Family::HalfspaceCube, 2).unwrap();
        let u = [1.0, 0.0];
        let inside: [&[f64]; 1] = [&[0.5, 0.2]];
        let outside: [&[f64]; 1] = [&[-0.1, 0.0]];
        assert!(membership(&cube, &[0.0, 0.0], &inside, 1.0, Some(&u)).unwrap());
        assert!(!membership(&cube, &[0.0, 0.0], &outside, 1.0, Some(&u)).unwrap());
        // tau = infinity with u = e1 is the half-space {y1 >= x1}
        let far: [&[f64]; 1] = [&[1e9, -1e9]];
        assert!(membership(&cube, &[0.0, 0.0], &far, f64::INFINITY, Some(&u)).unwrap());
    }

    #[test]
    fn half_region_cubes() {
        let (up, low) = half_region_member(&[0.0, 0.0], &[0.5, 0.5], 1.0);
        assert!(up && !low);
        let (up, low) = half_region_member(&[0.0, 0.0], &[-0.5, -1.0], 1.0);
        assert!(!up && low);
        let (up, low) = half_region_member(&[0.0, 0.0], &[0.5, -0.5], 1.0);
        assert!(!up && !low);
    }

    fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, dim)
    }

    fn skeleton_specs(dim: usize) -> Vec<RegionSpec> {
        vec![
            RegionSpec::new(Family::Lens, dim).unwrap(),
            RegionSpec::new(Family::Spherical, dim).unwrap(),
            RegionSpec::new(Family::BetaSkeleton { beta: 1.5 }, dim).unwrap(),
            RegionSpec::new(Family::BetaSkeleton { beta: 3.0 }, dim).unwrap(),
            RegionSpec::new(Family::Simplicial, dim).unwrap(),
        ]
    }

    fn as_refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|p| p.as_slice()).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn lens_and_spherical_are_beta_skeletons(
            x in coords(3), a in coords(3), b in coords(3), tau in 0.0f64..8.0
        ) {
            let t: [&[f64]; 2] = [&a, &b];
            let lens = RegionSpec::lens(3);
            let b2 = RegionSpec::new(Family::BetaSkeleton { beta: 2.0 }, 3).unwrap();
            let sph = RegionSpec::new(Family::Spherical, 3).unwrap();
            let b1 = RegionSpec::new(Family::BetaSkeleton { beta: 1.0 }, 3).unwrap();
            prop_assert_eq!(
                membership(&lens, &x, &t, tau, None).unwrap(),
                membership(&b2, &x, &t, tau, None).unwrap()
            );
            prop_assert_eq!(
                membership(&sph, &x, &t, tau, None).unwrap(),
                membership(&b1, &x, &t, tau, None).unwrap()
            );
        }

        #[test]
        fn translation_and_dilation_invariance(
            x in coords(2),
            pts in prop::collection::vec(coords(2), 3),
            tau in 0.5f64..6.0,
        ) {
            for spec in skeleton_specs(2) {
                let tuple: Vec<Vec<f64>> = pts[..spec.arity()].to_vec();
                let shifted: Vec<Vec<f64>> = tuple
                    .iter()
                    .map(|p| p.iter().zip(&x).map(|(a, b)| a - b).collect())
                    .collect();
                let scaled: Vec<Vec<f64>> = shifted
                    .iter()
                    .map(|p| p.iter().map(|v| v / tau).collect())
                    .collect();
                let zero = [0.0, 0.0];
                let m = membership(&spec, &x, &as_refs(&tuple), tau, None).unwrap();
                let m0 = membership(&spec, &zero, &as_refs(&shifted), tau, None).unwrap();
                let m1 = membership(&spec, &zero, &as_refs(&scaled), 1.0, None).unwrap();
                prop_assert_eq!(m, m0);
                prop_assert_eq!(m0, m1);
            }
        }

        #[test]
        fn reflection_and_permutation_symmetry(
            pts in prop::collection::vec(coords(2), 3),
            tau in 0.5f64..6.0,
        ) {
            let zero = [0.0, 0.0];
            for spec in skeleton_specs(2) {
                let tuple: Vec<Vec<f64>> = pts[..spec.arity()].to_vec();
                let negated: Vec<Vec<f64>> =
                    tuple.iter().map(|p| p.iter().map(|v| -v).collect()).collect();
                let mut reversed = tuple.clone();
                reversed.reverse();
                let m = membership(&spec, &zero, &as_refs(&tuple), tau, None).unwrap();
                prop_assert_eq!(m, membership(&spec, &zero, &as_refs(&negated), tau, None).unwrap());
                prop_assert_eq!(m, membership(&spec, &zero, &as_refs(&reversed), tau, None).unwrap());
            }
        }

        #[test]
        fn families_coincide_on_the_line(
            x in -3.0f64..3.0, a in -3.0f64..3.0, b in -3.0f64..3.0, tau in 0.0f64..8.0,
            beta in 1.0f64..2.0,
        ) {
            let t: [&[f64]; 2] = [&[a], &[b]];
            let reference = membership(&RegionSpec::lens(1), &[x], &t, tau, None).unwrap();
            for fam in [
                Family::Spherical,
                Family::BetaSkeleton { beta },
                Family::Simplicial,
            ] {
                let spec = RegionSpec::new(fam, 1).unwrap();
                prop_assert_eq!(reference, membership(&spec, &[x], &t, tau, None).unwrap());
            }
        }

        #[test]
        fn monotone_in_tau(
            x in coords(2),
            pts in prop::collection::vec(coords(2), 3),
            tau in 0.0f64..6.0,
            extra in 0.0f64..3.0,
        ) {
            for spec in skeleton_specs(2) {
                let tuple = as_refs(&pts[..spec.arity()]);
                if membership(&spec, &x, &tuple, tau, None).unwrap() {
                    prop_assert!(membership(&spec, &x, &tuple, tau + extra, None).unwrap());
                    prop_assert!(membership(&spec, &x, &tuple, f64::INFINITY, None).unwrap());
                }
            }
        }

        #[test]
        fn members_stay_within_reach(
            x in coords(2),
            pts in prop::collection::vec(coords(2), 3),
            tau in 0.1f64..6.0,
        ) {
            for spec in skeleton_specs(2) {
                let tuple = as_refs(&pts[..spec.arity()]);
                if membership(&spec, &x, &tuple, tau, None).unwrap() {
                    for p in &tuple {
                        prop_assert!(dist(&x, p) <= spec.reach() * tau * (1.0 + 1e-12));
                    }
                }
            }
        }
    }
}
