//! Small fixed-size planar geometry: points, 2×2 matrices, rectangles and
//! low-discrepancy sampling.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self * (1.0 / n)
        }
    }

    pub fn lerp(self, other: Point, s: f64) -> Point {
        self + (other - self) * s
    }

    /// Counterclockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Row-major 2×2 real matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub const fn diag(a: f64, d: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, d)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new(self.a * p.x + self.b * p.y, self.c * p.x + self.d * p.y)
    }

    pub fn matmul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    /// Solve `self * z = rhs`, `None` when (numerically) singular.
    pub fn solve(&self, rhs: Point) -> Option<Point> {
        let scale = self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs());
        let det = self.det();
        if scale == 0.0 || det.abs() <= 1e-14 * scale * scale || !det.is_finite() {
            return None;
        }
        let z = Point::new(
            (self.d * rhs.x - self.b * rhs.y) / det,
            (self.a * rhs.y - self.c * rhs.x) / det,
        );
        z.is_finite().then_some(z)
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Both eigenvalues via the closed-form quadratic formula, largest modulus
    /// first for real pairs. The smaller root of a real pair is obtained as
    /// `det / larger` to avoid cancellation.
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        // triangular: the diagonal is exact, the quadratic formula may round
        if self.b == 0.0 || self.c == 0.0 {
            let (p, q) = if self.a.abs() >= self.d.abs() { (self.a, self.d) } else { (self.d, self.a) };
            return [Complex64::new(p, 0.0), Complex64::new(q, 0.0)];
        }
        let tr = self.trace();
        let det = self.det();
        let disc = 0.25 * tr * tr - det;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let big = if tr >= 0.0 { 0.5 * tr + s } else { 0.5 * tr - s };
            let small = if big != 0.0 { det / big } else { 0.0 };
            [Complex64::new(big, 0.0), Complex64::new(small, 0.0)]
        } else {
            let im = (-disc).sqrt();
            [Complex64::new(0.5 * tr, im), Complex64::new(0.5 * tr, -im)]
        }
    }

    /// Unit eigenvector for a real eigenvalue, sign-normalised so that the
    /// first non-negligible component is positive.
    pub fn eigenvector(&self, lambda: f64) -> Point {
        let cand1 = Point::new(self.b, lambda - self.a);
        let cand2 = Point::new(lambda - self.d, self.c);
        let v = if cand1.norm() >= cand2.norm() { cand1 } else { cand2 };
        let v = if v.norm() == 0.0 { Point::new(1.0, 0.0) } else { v.normalized() };
        if v.x < -1e-300 || (v.x.abs() <= 1e-300 && v.y < 0.0) {
            -v
        } else {
            v
        }
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub const fn square(half: f64) -> Self {
        Rect::new(-half, half, -half, half)
    }

    pub fn is_valid(&self) -> bool {
        [self.x0, self.x1, self.y0, self.y1].iter().all(|v| v.is_finite())
            && self.x1 > self.x0
            && self.y1 > self.y0
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> Point {
        Point::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Grown by `margin` times the size on every side.
    pub fn inflated(&self, margin: f64) -> Rect {
        let dx = margin * self.width();
        let dy = margin * self.height();
        Rect::new(self.x0 - dx, self.x1 + dx, self.y0 - dy, self.y1 + dy)
    }

    /// Map unit-square coordinates to the rectangle.
    pub fn at(&self, u: f64, v: f64) -> Point {
        Point::new(self.x0 + u * self.width(), self.y0 + v * self.height())
    }

    /// Cell-centred uniform grid, row by row.
    pub fn grid(&self, nx: usize, ny: usize) -> Vec<Point> {
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                out.push(self.at((i as f64 + 0.5) / nx as f64, (j as f64 + 0.5) / ny as f64));
            }
        }
        out
    }

    /// First `n` points of the 2D Halton sequence (bases 2, 3) in the rectangle.
    pub fn halton(&self, n: usize) -> Vec<Point> {
        (1..=n).map(|k| self.at(radical_inverse(k, 2), radical_inverse(k, 3))).collect()
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] x [{}, {}]", self.x0, self.x1, self.y0, self.y1)
    }
}

/// Van der Corput radical inverse of `k` in `base`.
pub fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += f * (k % base) as f64;
        k /= base;
        f *= inv;
    }
    r
}

/// Distance from `p` to the segment `[a, b]` and the clamped segment parameter.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let s = if len2 == 0.0 { 0.0 } else { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) };
    (p.dist(a + ab * s), s)
}

/// Proper or touching intersection of segments `[p1, p2]` and `[q1, q2]`.
pub fn segment_intersection(p1: Point, p2: Point, q1: Point, q2: Point) -> Option<Point> {
    let r = p2 - p1;
    let s = q2 - q1;
    let denom = r.cross(s);
    if denom == 0.0 {
        return None;
    }
    let qp = q1 - p1;
    let t = qp.cross(s) / denom;
    let u = qp.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(p1 + r * t)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_diag_is_exact() {
        let m = Mat2::diag(0.5, 2.0);
        let ev = m.eigenvalues();
        assert_eq!(ev[0].re, 2.0);
        assert_eq!(ev[1].re, 0.5);
        assert_eq!(m.eigenvector(2.0), Point::new(0.0, 1.0));
        assert_eq!(m.eigenvector(0.5), Point::new(1.0, 0.0));
    }

    #[test]
    fn small_eigenvalue_has_no_cancellation() {
        // eigenvalues 1e8 and 1e-8
        let m = Mat2::diag(1e8, 1e-8);
        let rot = Mat2::new(0.6, -0.8, 0.8, 0.6);
        let rot_t = Mat2::new(0.6, 0.8, -0.8, 0.6);
        let a = rot.matmul(&m).matmul(&rot_t);
        let ev = a.eigenvalues();
        assert!((ev[0].re - 1e8).abs() / 1e8 < 1e-12);
        assert!((ev[1].re - 1e-8).abs() / 1e-8 < 1e-6);
    }

    #[test]
    fn complex_pair() {
        let ev = Mat2::new(0.0, -1.0, 1.0, 0.0).eigenvalues();
        assert_eq!(ev[0].im, 1.0);
        assert_eq!(ev[1].im, -1.0);
    }

    #[test]
    fn halton_is_in_unit_square_and_distinct() {
        let pts = Rect::new(0.0, 1.0, 0.0, 1.0).halton(500);
        for w in pts.windows(2) {
            assert_ne!(w[0], w[1]);
        }
        assert!(pts.iter().all(|p| (0.0..1.0).contains(&p.x) && (0.0..1.0).contains(&p.y)));
    }

    #[test]
    fn segments() {
        let hit = segment_intersection(
            Point::new(0.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
            Point::new(2.0, 0.0),
        );
        assert_eq!(hit, Some(Point::new(1.0, 1.0)));
        assert!(segment_intersection(
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0)
        )
        .is_none());
    }
}
