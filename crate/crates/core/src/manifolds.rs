//! Continuation of the one-dimensional stable and unstable manifolds of a
//! saddle, boundedness verdicts, and homoclinic contact candidates.
//!
//! Each branch is grown by parametrised continuation: the branch is kept as
//! a polyline, and the next front point is the image of an interpolated
//! point further along the already computed part. The source parameter step
//! is halved until the new point satisfies the spacing and curvature
//! bounds, and doubled after easy steps.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::{MapError, MapSpec};
use crate::fixed_points::{FixedPointRecord, SaddleKind};
use crate::geom::{point_segment_distance, segment_intersection, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    StablePlus,
    StableMinus,
    UnstablePlus,
    UnstableMinus,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::StablePlus => "STABLE_PLUS",
            Branch::StableMinus => "STABLE_MINUS",
            Branch::UnstablePlus => "UNSTABLE_PLUS",
            Branch::UnstableMinus => "UNSTABLE_MINUS",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Branch::StablePlus | Branch::StableMinus => Family::Stable,
            Branch::UnstablePlus | Branch::UnstableMinus => Family::Unstable,
        }
    }

    fn of(family: Family, plus: bool) -> Branch {
        match (family, plus) {
            (Family::Stable, true) => Branch::StablePlus,
            (Family::Stable, false) => Branch::StableMinus,
            (Family::Unstable, true) => Branch::UnstablePlus,
            (Family::Unstable, false) => Branch::UnstableMinus,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BranchVerdict {
    /// The front left the ball of radius `r_escape`.
    Unbounded,
    /// The front stalled; representative points of its accumulation set.
    Bounded { limit_set: Vec<Point> },
    BudgetExhausted { reason: String },
}

impl BranchVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            BranchVerdict::Unbounded => "UNBOUNDED",
            BranchVerdict::Bounded { .. } => "BOUNDED",
            BranchVerdict::BudgetExhausted { .. } => "BUDGET_EXHAUSTED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPolyline {
    pub branch: Branch,
    pub fixed_point: Point,
    /// Ordered outward from the fixed point.
    pub points: Vec<Point>,
    pub verdict: BranchVerdict,
    pub arclength: f64,
    /// Vertices `0..=covered` have their growth-map image on the polyline.
    pub covered: usize,
    /// `f` maps this branch onto the opposite branch of the same curve.
    pub swapped: bool,
    /// Growth map iterate: 1 for direct saddles, 2 for twisted ones.
    pub power: u8,
    /// Growth continued by the forward-only search once inversion failed.
    pub search_fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldParams {
    /// `delta_seed = delta_seed_rel * (1 + |p|)`.
    pub delta_seed_rel: f64,
    /// Spacing cap near the fixed point; grows like `h_max * (1 + |q - p|)`.
    pub h_max: f64,
    pub h_min: f64,
    pub r_escape: f64,
    pub budget: f64,
    pub max_points: usize,
    pub max_angle: f64,
    /// Bound on spacing times turning angle, relative to `1 + |q - p|`.
    pub chord_tol: f64,
}

impl Default for ManifoldParams {
    fn default() -> Self {
        ManifoldParams {
            delta_seed_rel: 1e-6,
            h_max: 1e-2,
            h_min: 1e-9,
            r_escape: 1e6,
            budget: 1e7,
            max_points: 200_000,
            max_angle: 0.3,
            chord_tol: 1e-3,
        }
    }
}

impl ManifoldParams {
    pub fn delta_seed(&self, p: Point) -> f64 {
        self.delta_seed_rel * (1.0 + p.norm())
    }

    fn h_local(&self, p: Point, q: Point) -> f64 {
        self.h_max * (1.0 + q.dist(p))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ManifoldError {
    #[error("{0} is not a saddle")]
    NotSaddle(Point),
    #[error("cannot seed the fundamental segment: {0}")]
    Seed(MapError),
}

/// Polyline position `s` in vertex units.
fn curve_at(points: &[Point], s: f64) -> Point {
    let n = points.len();
    if s <= 0.0 {
        return points[0];
    }
    let i = s.floor() as usize;
    if i + 1 >= n {
        return points[n - 1];
    }
    points[i].lerp(points[i + 1], s - i as f64)
}

fn angle_between(a: Point, b: Point) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.cross(b).atan2(a.dot(b)).abs()
}

/// Signed distance from `q` to the polyline `p, points...`: the sign is
/// that of the cross product with the nearest segment's direction.
fn signed_distance(p: Point, points: &[Point], q: Point) -> f64 {
    let mut best = (f64::INFINITY, 0.0);
    let mut prev = p;
    for &v in points {
        let (d, s) = point_segment_distance(q, prev, v);
        if d < best.0 {
            let foot = prev.lerp(v, s);
            let side = (v - prev).cross(q - foot);
            best = (d, if side < 0.0 { -d } else { d });
        }
        prev = v;
    }
    best.1
}

/// Unsigned distance from `q` to a polyline.
pub fn distance_to_polyline(points: &[Point], q: Point) -> f64 {
    match points.len() {
        0 => f64::INFINITY,
        1 => q.dist(points[0]),
        _ => points.windows(2).map(|w| point_segment_distance(q, w[0], w[1]).0).fold(f64::INFINITY, f64::min),
    }
}

struct Grower<'a> {
    map: MapSpec,
    family: Family,
    p: Point,
    params: &'a ManifoldParams,
}

impl Grower<'_> {
    /// Growth map: the forward map for unstable branches, its inverse for
    /// stable ones.
    fn image(&self, q: Point, seed: Point) -> Result<Point, MapError> {
        match self.family {
            Family::Unstable => self.map.eval(q),
            Family::Stable => self.map.preimage(q, seed),
        }
    }

    fn grow(&self, dir: Point, plus: bool, swapped: bool, power: u8) -> ManifoldPolyline {
        let prm = self.params;
        let p = self.p;
        let sign = if plus { 1.0 } else { -1.0 };
        let delta = prm.delta_seed(p);
        let q0 = p + dir * (sign * delta);
        let mut out = ManifoldPolyline {
            branch: Branch::of(self.family, plus),
            fixed_point: p,
            points: vec![q0],
            verdict: BranchVerdict::BudgetExhausted { reason: String::new() },
            arclength: 0.0,
            covered: 0,
            swapped,
            power,
            search_fallback: false,
        };
        let q1 = match self.image(q0, q0) {
            Ok(q) => q,
            Err(e) => {
                out.verdict = BranchVerdict::BudgetExhausted { reason: format!("seed image failed: {e}") };
                return out;
            }
        };
        // fundamental segment, subdivided to respect the spacing cap
        let pieces = (q1.dist(q0) / prm.h_local(p, q1)).ceil().max(1.0) as usize;
        for k in 1..=pieces {
            out.points.push(q0.lerp(q1, k as f64 / pieces as f64));
        }
        let mut s_last = 0.0f64;
        let mut ds = 1.0 / pieces as f64;
        let mut evaluations = 0usize;
        let eval_cap = 50 * prm.max_points;
        out.arclength = q1.dist(q0);
        loop {
            let last = *out.points.last().unwrap();
            if last.dist(p) > prm.r_escape {
                out.verdict = BranchVerdict::Unbounded;
                break;
            }
            if out.points.len() >= prm.max_points || out.arclength >= prm.budget || evaluations >= eval_cap {
                out.verdict = BranchVerdict::BudgetExhausted {
                    reason: format!("{} points, arclength {:.6e}", out.points.len(), out.arclength),
                };
                break;
            }
            if out.search_fallback {
                match self.search_step(&out.points) {
                    Some((c, evals)) => {
                        evaluations += evals;
                        out.arclength += c.dist(last);
                        out.points.push(c);
                    }
                    None => {
                        out.verdict = BranchVerdict::BudgetExhausted {
                            reason: "forward search found no continuation".into(),
                        };
                        break;
                    }
                }
                continue;
            }
            let n = out.points.len();
            let prev = out.points[n - 2];
            let s_end = (n - 1) as f64;
            let h_loc = prm.h_local(p, last);
            let mut step = ds.min(s_end - s_last);
            let accepted = loop {
                if step < 1e-12 {
                    break None;
                }
                let s_try = s_last + step;
                evaluations += 1;
                match self.image(curve_at(&out.points, s_try), last) {
                    Ok(c) if c.is_finite() => {
                        let d = c.dist(last);
                        let ang = angle_between(last - prev, c - last);
                        let ok = d <= h_loc
                            && ang <= prm.max_angle
                            && d * ang <= prm.chord_tol * (1.0 + last.dist(p));
                        if ok || d < prm.h_min {
                            let easy = d < 0.5 * h_loc && ang < 0.25 * prm.max_angle;
                            break Some((s_try, c, d, easy));
                        }
                    }
                    _ => {}
                }
                step *= 0.5;
            };
            match accepted {
                None => {
                    if self.family == Family::Stable {
                        out.search_fallback = true;
                        continue;
                    }
                    out.verdict = BranchVerdict::BudgetExhausted { reason: "step size underflow".into() };
                    break;
                }
                Some((s_try, c, d, easy)) => {
                    if d < prm.h_min {
                        if s_try >= s_end {
                            out.verdict = BranchVerdict::Bounded { limit_set: limit_set_estimate(&out.points) };
                            out.covered = s_last.floor() as usize;
                            break;
                        }
                        // too close to keep, but the source still advances
                        s_last = s_try;
                        ds = 2.0 * step;
                        continue;
                    }
                    s_last = s_try;
                    ds = if easy { 2.0 * step } else { step };
                    out.arclength += d;
                    out.points.push(c);
                }
            }
            out.covered = s_last.floor() as usize;
        }
        out.covered = out.covered.min(out.points.len() - 1);
        out
    }

    /// Forward-only continuation for a stable branch whose preimages cannot
    /// be computed: find `c` on a circle around the front whose image lies
    /// on the polyline. Returns the point and the number of evaluations.
    fn search_step(&self, points: &[Point]) -> Option<(Point, usize)> {
        let prm = self.params;
        let p = self.p;
        let n = points.len();
        let last = points[n - 1];
        let tangent = (last - points[n - 2]).normalized();
        let mut h = prm.h_local(p, last);
        let mut evals = 0;
        let g = |theta: f64, h: f64, evals: &mut usize| -> Option<(Point, f64, f64)> {
            *evals += 1;
            let c = last + tangent.rotated(theta) * h;
            let fc = self.map.eval(c).ok()?;
            Some((c, signed_distance(p, points, fc), fc.norm()))
        };
        while h >= prm.h_min {
            let scan: Vec<(f64, Option<(Point, f64, f64)>)> = (0..=8)
                .map(|k| {
                    let th = prm.max_angle * (k as f64 - 4.0) / 4.0;
                    (th, g(th, h, &mut evals))
                })
                .collect();
            // brackets ordered by distance from the straight continuation
            let mut brackets: Vec<(f64, f64, f64, f64)> = Vec::new();
            for w in scan.windows(2) {
                if let ((a, Some((ca, ga, _))), (b, Some((_, gb, _)))) = (&w[0], &w[1]) {
                    if *ga == 0.0 {
                        return Some((*ca, evals));
                    }
                    if ga.signum() != gb.signum() {
                        brackets.push((*a, *ga, *b, *gb));
                    }
                }
            }
            if let (_, Some((c, g8, _))) = scan[8] {
                if g8 == 0.0 {
                    return Some((c, evals));
                }
            }
            brackets.sort_by(|x, y| (x.0 + x.2).abs().total_cmp(&(y.0 + y.2).abs()));
            for (mut a, mut ga, mut b, _) in brackets {
                let mut best = None;
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    if m == a || m == b {
                        break;
                    }
                    let Some((c, gm, nm)) = g(m, h, &mut evals) else { break };
                    best = Some((c, gm, nm));
                    if gm == 0.0 {
                        break;
                    }
                    if gm.signum() == ga.signum() {
                        a = m;
                        ga = gm;
                    } else {
                        b = m;
                    }
                }
                if let Some((c, gm, nm)) = best {
                    if gm.abs() <= 1e-9 * (1.0 + nm) {
                        return Some((c, evals));
                    }
                }
            }
            h *= 0.5;
        }
        None
    }
}

/// Cluster the last 5% of the points with radius `1e-3`; each cluster is
/// represented by its most advanced point.
pub fn limit_set_estimate(points: &[Point]) -> Vec<Point> {
    let n = points.len();
    let k = (n / 20).max(1);
    let tail = &points[n - k..];
    let mut reps: Vec<Point> = Vec::new();
    for &q in tail.iter().rev() {
        if reps.iter().all(|r| r.dist(q) > 1e-3) {
            reps.push(q);
        }
    }
    reps
}

fn family_setup(
    m: &MapSpec,
    rec: &FixedPointRecord,
    family: Family,
) -> Result<(MapSpec, Point, bool, u8), ManifoldError> {
    let (l, mu) = rec.saddle_eigenvalues().ok_or(ManifoldError::NotSaddle(rec.location))?;
    let (dir, ev) = match family {
        Family::Stable => (rec.stable_dir, l),
        Family::Unstable => (rec.unstable_dir, mu),
    };
    let dir = dir.ok_or(ManifoldError::NotSaddle(rec.location))?;
    let twisted = rec.saddle_kind == SaddleKind::Twisted;
    let map = if twisted { m.square() } else { m.clone() };
    Ok((map, dir, ev < 0.0, if twisted { 2 } else { 1 }))
}

fn grow_family(
    m: &MapSpec,
    rec: &FixedPointRecord,
    family: Family,
    params: &ManifoldParams,
) -> Result<[ManifoldPolyline; 2], ManifoldError> {
    let (map, dir, swapped, power) = family_setup(m, rec, family)?;
    let g = Grower { map, family, p: rec.location, params };
    let (a, b) = rayon::join(|| g.grow(dir, true, swapped, power), || g.grow(dir, false, swapped, power));
    Ok([a, b])
}

/// Both branches of `W^u(p)`; twisted saddles are grown with `f²`.
pub fn grow_unstable(
    m: &MapSpec,
    rec: &FixedPointRecord,
    params: &ManifoldParams,
) -> Result<[ManifoldPolyline; 2], ManifoldError> {
    grow_family(m, rec, Family::Unstable, params)
}

/// Both branches of `W^s(p)`, grown with the inverse map.
pub fn grow_stable(
    m: &MapSpec,
    rec: &FixedPointRecord,
    params: &ManifoldParams,
) -> Result<[ManifoldPolyline; 2], ManifoldError> {
    grow_family(m, rec, Family::Stable, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactKind {
    WsCapWu,
    LimitContact,
}

impl ContactKind {
    pub fn label(self) -> &'static str {
        match self {
            ContactKind::WsCapWu => "WS_CAP_WU",
            ContactKind::LimitContact => "LIMIT_CONTACT",
        }
    }
}

/// A candidate homoclinic contact; detection is heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub point: Point,
    pub kind: ContactKind,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactReport {
    pub contacts: Vec<Contact>,
    pub tolerance: f64,
    pub exclusion_radius: f64,
}

pub const CONTACT_TOL: f64 = 1e-4;

/// Candidate homoclinic contacts between the stable and unstable polylines,
/// ignoring everything within `exclusion_radius` of the fixed point.
pub fn find_contacts(
    ws: &[ManifoldPolyline],
    wu: &[ManifoldPolyline],
    fixed: Point,
    exclusion_radius: f64,
    tolerance: f64,
) -> ContactReport {
    let mut contacts = Vec::new();
    let bbox = |pts: &[Point]| {
        pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY), |b, q| {
            (b.0.min(q.x), b.1.max(q.x), b.2.min(q.y), b.3.max(q.y))
        })
    };
    for s in ws {
        for u in wu {
            for a in s.points.windows(2) {
                let ba = bbox(a);
                for b in u.points.windows(2) {
                    let bb = bbox(b);
                    if ba.1 < bb.0 || bb.1 < ba.0 || ba.3 < bb.2 || bb.3 < ba.2 {
                        continue;
                    }
                    if let Some(x) = segment_intersection(a[0], a[1], b[0], b[1]) {
                        if x.dist(fixed) > exclusion_radius {
                            contacts.push(Contact { point: x, kind: ContactKind::WsCapWu, distance: 0.0 });
                        }
                    }
                }
            }
        }
    }
    let limit_checks = ws.iter().map(|b| (b, wu)).chain(wu.iter().map(|b| (b, ws)));
    for (branch, others) in limit_checks {
        if let BranchVerdict::Bounded { limit_set } = &branch.verdict {
            for &l in limit_set {
                if l.dist(fixed) <= exclusion_radius {
                    continue;
                }
                let d = others.iter().map(|o| distance_to_polyline(&o.points, l)).fold(f64::INFINITY, f64::min);
                if d <= tolerance {
                    contacts.push(Contact { point: l, kind: ContactKind::LimitContact, distance: d });
                }
            }
        }
    }
    ContactReport { contacts, tolerance, exclusion_radius }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceReport {
    pub max_distance: f64,
    pub samples: usize,
    /// Stable-branch samples checked with the forward map because no
    /// preimage exists.
    pub forward_fallbacks: usize,
    pub failures: usize,
}

/// Distance from `f(q)` (unstable) or `f^-1(q)` (stable) to the union of
/// the family's branches and the fixed point, for `samples` random vertices
/// from the covered prefixes.
pub fn invariance_residuals(m: &MapSpec, branches: &[ManifoldPolyline], samples: usize, seed: u64) -> InvarianceReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<Point> = branches.iter().flat_map(|b| b.points[..=b.covered].iter().copied()).collect();
    let family = branches[0].branch.family();
    let fixed = branches[0].fixed_point;
    let dist = |q: Point| {
        branches
            .iter()
            .map(|b| distance_to_polyline(&b.points, q))
            .fold(q.dist(fixed), f64::min)
    };
    let mut report = InvarianceReport { max_distance: 0.0, samples: 0, forward_fallbacks: 0, failures: 0 };
    if pool.is_empty() {
        return report;
    }
    for _ in 0..samples {
        let q = pool[rng.gen_range(0..pool.len())];
        let image = match family {
            Family::Unstable => m.eval(q),
            Family::Stable => m.preimage(q, q).or_else(|_| {
                report.forward_fallbacks += 1;
                m.eval(q)
            }),
        };
        match image {
            Ok(r) => report.max_distance = report.max_distance.max(dist(r)),
            Err(_) => report.failures += 1,
        }
        report.samples += 1;
    }
    report
}

/// Largest distance of a polyline from the given axis line through the origin.
pub fn max_off_axis(points: &[Point], along_x: bool) -> f64 {
    points.iter().map(|q| if along_x { q.y.abs() } else { q.x.abs() }).fold(0.0, f64::max)
}

/// Angle between the first segment direction (from the fixed point) and `dir`.
pub fn seed_alignment(poly: &ManifoldPolyline, dir: Point) -> f64 {
    let v = poly.points[0] - poly.fixed_point;
    let a = angle_between(v, dir);
    a.min(PI - a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed_points::classify_local;
    use crate::geom::Rect;

    fn grow_all(m: &MapSpec, params: &ManifoldParams) -> ([ManifoldPolyline; 2], [ManifoldPolyline; 2]) {
        let rec = classify_local(m, Point::ORIGIN).unwrap();
        (grow_stable(m, &rec, params).unwrap(), grow_unstable(m, &rec, params).unwrap())
    }

    #[test]
    fn linear_saddle_branches_are_axes() {
        let m = MapSpec::parse("lin", Rect::square(3.0), "x/2", "2*y");
        let (ws, wu) = grow_all(&m, &ManifoldParams::default());
        for b in ws.iter().chain(&wu) {
            assert_eq!(b.verdict, BranchVerdict::Unbounded, "{:?}", b.branch);
            assert!(b.points.len() > 100);
        }
        assert_eq!(max_off_axis(&ws[0].points, true), 0.0);
        assert_eq!(max_off_axis(&wu[1].points, false), 0.0);
        assert!(wu[0].points.last().unwrap().y > 1e6);
        assert!(wu[1].points.last().unwrap().y < -1e6);
        let c = find_contacts(&ws, &wu, Point::ORIGIN, 1e-5, CONTACT_TOL);
        assert!(c.contacts.is_empty());
    }

    #[test]
    fn spacing_and_seed_invariants() {
        let m = MapSpec::parse("phi", Rect::square(3.0), "x*(1+atan(x)^2)/(4+pi^2)", "2*y");
        let params = ManifoldParams::default();
        let rec = classify_local(&m, Point::ORIGIN).unwrap();
        let ws = grow_stable(&m, &rec, &params).unwrap();
        for b in &ws {
            assert_eq!(b.verdict, BranchVerdict::Unbounded);
            assert!(b.points[0].dist(Point::ORIGIN) <= params.delta_seed(Point::ORIGIN) * (1.0 + 1e-12));
            assert!(seed_alignment(b, rec.stable_dir.unwrap()) < 1e-3);
            for w in b.points.windows(2) {
                let d = w[0].dist(w[1]);
                assert!(d >= params.h_min && d <= params.h_max * (1.0 + w[0].norm()) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn twisted_stable_branches_accumulate_on_period_two_orbit() {
        let m = MapSpec::parse("twisted", Rect::square(3.0), "-0.5*x^3 + (0.5-1)*x", "-2*y");
        let (ws, wu) = grow_all(&m, &ManifoldParams::default());
        for b in &wu {
            assert_eq!(b.verdict, BranchVerdict::Unbounded);
            assert!(b.swapped);
            assert_eq!(max_off_axis(&b.points, false), 0.0);
        }
        let want = [Point::new(1.0, 0.0), Point::new(-1.0, 0.0)];
        for (b, w) in ws.iter().zip(want) {
            match &b.verdict {
                BranchVerdict::Bounded { limit_set } => {
                    assert_eq!(limit_set.len(), 1);
                    assert!(limit_set[0].dist(w) < 1e-6, "{limit_set:?}");
                }
                v => panic!("{v:?}"),
            }
        }
        let c = find_contacts(&ws, &wu, Point::ORIGIN, 1e-5, CONTACT_TOL);
        assert!(c.contacts.is_empty());
    }

    #[test]
    fn quartic_branches_follow_axes_past_the_fold() {
        let m = MapSpec::parse(
            "quartic",
            Rect::square(10.0),
            "2*x*(1+x^2)/(4+x^2*(1+x^2)^2)",
            "8*y*(1+x^2)/(4+x^2*(1+x^2)^2)",
        );
        let (ws, wu) = grow_all(&m, &ManifoldParams::default());
        for b in &ws {
            assert_eq!(b.verdict, BranchVerdict::Unbounded, "{:?}", b.branch);
            assert!(b.search_fallback);
            assert!(max_off_axis(&b.points, true) <= 1e-6);
        }
        for b in &wu {
            assert_eq!(b.verdict, BranchVerdict::Unbounded, "{:?}", b.branch);
            assert!(max_off_axis(&b.points, false) <= 1e-6);
        }
    }

    #[test]
    fn synthetic_crossing_is_reported() {
        let mk = |branch, pts: Vec<Point>| ManifoldPolyline {
            branch,
            fixed_point: Point::ORIGIN,
            points: pts,
            verdict: BranchVerdict::Unbounded,
            arclength: 0.0,
            covered: 0,
            swapped: false,
            power: 1,
            search_fallback: false,
        };
        let s = mk(Branch::StablePlus, vec![Point::new(0.0, 0.0), Point::new(2.0, 2.0)]);
        let u = mk(Branch::UnstablePlus, vec![Point::new(0.0, 2.0), Point::new(2.0, 0.0)]);
        let r = find_contacts(&[s], &[u], Point::ORIGIN, 1e-5, CONTACT_TOL);
        assert_eq!(r.contacts.len(), 1);
        assert_eq!(r.contacts[0].kind, ContactKind::WsCapWu);
        assert!(r.contacts[0].point.dist(Point::new(1.0, 1.0)) < 1e-15);
    }

    #[test]
    fn polyline_invariance_on_linear_saddle() {
        let m = MapSpec::parse("lin", Rect::square(3.0), "x/2", "2*y");
        let params = ManifoldParams::default();
        let (ws, wu) = grow_all(&m, &params);
        for fam in [&ws, &wu] {
            let r = invariance_residuals(&m, fam, 100, 42);
            assert_eq!(r.samples, 100);
            assert!(r.max_distance <= 10.0 * params.h_max);
        }
    }
}
