//! Exact 2-D polygon primitives for quadrilateral text regions.
//!
//! Coordinates are image pixels with `y` increasing downward. Under that
//! convention a visually clockwise vertex ring has positive shoelace area,
//! which is the orientation every [`Quad`] is normalized to.

use serde::{Deserialize, Serialize};

use crate::{real, Error, Real, Result};

/// Signed-distance tolerance (pixels) for vertex classification against a
/// clip edge; collinear points count as inside.
const CLIP_TOL: f64 = 1e-7;

/// A point in image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    #[inline]
    pub(crate) fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    #[inline]
    pub(crate) fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of `self x o`.
    #[inline]
    pub(crate) fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub(crate) fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    /// Rotates `self` about `center` by `theta` radians.
    pub fn rotated_about(self, center: Self, theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        let d = self.sub(center);
        Self::new(center.x + d.x * c - d.y * s, center.y + d.x * s + d.y * c)
    }
}

/// A convex quadrilateral, canonicalized on construction: vertices in
/// clockwise order (positive shoelace area in y-down coordinates) starting
/// from the top-left-most vertex (minimal `y`, then minimal `x`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad<T> {
    vertices: [Point<T>; 4],
}

impl<T: Real> Quad<T> {
    /// Validates and canonicalizes four vertices into a `Quad`.
    ///
    /// Rejects non-finite coordinates, repeated vertices, zero area, and
    /// non-convex (self-intersecting) rings.
    pub fn new(vertices: [Point<T>; 4]) -> Result<Self> {
        for p in &vertices {
            if !p.is_finite() {
                return Err(Error::InvalidInput("non-finite quad vertex".into()));
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                if vertices[i] == vertices[j] {
                    return Err(Error::InvalidInput("repeated quad vertex".into()));
                }
            }
        }

        let mut v = vertices;
        let signed = shoelace_signed(&v);
        if signed.abs() <= T::zero() || signed.is_nan() {
            return Err(Error::Degenerate("quad has zero area".into()));
        }
        if signed < T::zero() {
            v.reverse();
        }

        // Start from the top-left-most vertex.
        let start = (0..4)
            .min_by(|&a, &b| {
                (v[a].y, v[a].x)
                    .partial_cmp(&(v[b].y, v[b].x))
                    .expect("finite coordinates")
            })
            .unwrap();
        v.rotate_left(start);

        // Convexity: no clockwise ring may turn outward at any vertex.
        let tol = T::epsilon() * real::<T>(16.0);
        for i in 0..4 {
            let e1 = v[(i + 1) % 4].sub(v[i]);
            let e2 = v[(i + 2) % 4].sub(v[(i + 1) % 4]);
            if e1.cross(e2) < -tol * e1.norm() * e2.norm() {
                return Err(Error::InvalidInput("non-convex quad".into()));
            }
        }

        Ok(Self { vertices: v })
    }

    pub fn from_coords(coords: [T; 8]) -> Result<Self> {
        Self::new([
            Point::new(coords[0], coords[1]),
            Point::new(coords[2], coords[3]),
            Point::new(coords[4], coords[5]),
            Point::new(coords[6], coords[7]),
        ])
    }

    /// Axis-aligned rectangle as a quad.
    pub fn from_rect(r: &AARect<T>) -> Result<Self> {
        Self::new([
            Point::new(r.xmin, r.ymin),
            Point::new(r.xmax, r.ymin),
            Point::new(r.xmax, r.ymax),
            Point::new(r.xmin, r.ymax),
        ])
    }

    pub fn vertices(&self) -> &[Point<T>; 4] {
        &self.vertices
    }

    pub fn coords(&self) -> [T; 8] {
        let v = &self.vertices;
        [
            v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y, v[3].x, v[3].y,
        ]
    }

    pub fn area(&self) -> T {
        shoelace_signed(&self.vertices).abs()
    }

    /// Boundary-inclusive point containment; points within [`CLIP_TOL`]
    /// pixels of an edge count as inside.
    pub fn contains(&self, p: Point<T>) -> bool {
        let tol = real::<T>(CLIP_TOL);
        self.edges().all(|(a, b)| {
            let e = b.sub(a);
            e.cross(p.sub(a)) >= -tol * e.norm()
        })
    }

    pub fn translated(&self, dx: T, dy: T) -> Self {
        let mut v = self.vertices;
        for p in &mut v {
            p.x += dx;
            p.y += dy;
        }
        Self::new(v).expect("translation preserves validity")
    }

    pub fn rotated_about(&self, center: Point<T>, theta: T) -> Self {
        let v = self.vertices.map(|p| p.rotated_about(center, theta));
        Self::new(v).expect("rotation preserves validity")
    }

    fn edges(&self) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
        (0..4).map(move |i| (self.vertices[i], self.vertices[(i + 1) % 4]))
    }
}

/// An axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AARect<T> {
    pub xmin: T,
    pub ymin: T,
    pub xmax: T,
    pub ymax: T,
}

impl<T: Real> AARect<T> {
    pub fn new(xmin: T, ymin: T, xmax: T, ymax: T) -> Result<Self> {
        if !(xmin <= xmax && ymin <= ymax) {
            return Err(Error::InvalidInput("AARect with inverted extent".into()));
        }
        Ok(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    pub fn width(&self) -> T {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> T {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }
}

/// A rotated rectangle: center, side lengths, and orientation.
///
/// `theta` is the direction of the `width` side, normalized to
/// `(-pi/2, pi/2]`; `width` is always the longer side as produced by
/// [`fit_rotated_rect`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotRect<T> {
    pub center: Point<T>,
    pub width: T,
    pub height: T,
    pub theta: T,
}

impl<T: Real> RotRect<T> {
    pub fn new(center: Point<T>, width: T, height: T, theta: T) -> Result<Self> {
        if width.is_nan() || height.is_nan() || width <= T::zero() || height <= T::zero() {
            return Err(Error::InvalidInput("RotRect with non-positive side".into()));
        }
        Ok(Self {
            center,
            width,
            height,
            theta,
        })
    }

    /// Corners in local order top-left, top-right, bottom-right, bottom-left
    /// of the unrotated frame, rotated by `theta` about the center.
    pub fn corners(&self) -> [Point<T>; 4] {
        let hw = self.width / real::<T>(2.0);
        let hh = self.height / real::<T>(2.0);
        [
            Point::new(self.center.x - hw, self.center.y - hh),
            Point::new(self.center.x + hw, self.center.y - hh),
            Point::new(self.center.x + hw, self.center.y + hh),
            Point::new(self.center.x - hw, self.center.y + hh),
        ]
        .map(|p| p.rotated_about(self.center, self.theta))
    }

    pub fn to_quad(&self) -> Result<Quad<T>> {
        Quad::new(self.corners())
    }

    pub fn area(&self) -> T {
        self.width * self.height
    }

    /// Edge distances and orientation seen from pixel `(px, py)`: the
    /// inverse of [`rbox_to_quad`]. Distances are signed in the rect frame
    /// and only non-negative for interior pixels.
    pub fn rbox_at(&self, px: T, py: T) -> RBoxPred<T> {
        let local = Point::new(px, py).rotated_about(self.center, -self.theta);
        let hw = self.width / real::<T>(2.0);
        let hh = self.height / real::<T>(2.0);
        RBoxPred {
            d_top: local.y - self.center.y + hh,
            d_bottom: hh - (local.y - self.center.y),
            d_left: local.x - self.center.x + hw,
            d_right: hw - (local.x - self.center.x),
            theta: self.theta,
        }
    }
}

/// Per-pixel rotated-box parametrization: distances to the four box edges
/// plus the box orientation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RBoxPred<T> {
    pub d_top: T,
    pub d_bottom: T,
    pub d_left: T,
    pub d_right: T,
    pub theta: T,
}

impl<T: Real> RBoxPred<T> {
    pub fn new(d_top: T, d_bottom: T, d_left: T, d_right: T, theta: T) -> Self {
        Self {
            d_top,
            d_bottom,
            d_left,
            d_right,
            theta,
        }
    }

    pub fn distances_non_negative(&self) -> bool {
        self.d_top >= T::zero()
            && self.d_bottom >= T::zero()
            && self.d_left >= T::zero()
            && self.d_right >= T::zero()
    }
}

/// Wraps an angle into `(-pi/2, pi/2]` by multiples of pi.
pub fn normalize_half_pi<T: Real>(theta: T) -> T {
    let pi = T::PI();
    let half = pi / real::<T>(2.0);
    let mut t = theta;
    while t > half {
        t -= pi;
    }
    while t <= -half {
        t += pi;
    }
    t
}

fn shoelace_signed<T: Real>(pts: &[Point<T>]) -> T {
    let n = pts.len();
    let mut acc = T::zero();
    for i in 0..n {
        let j = (i + 1) % n;
        acc += pts[i].cross(pts[j]);
    }
    acc / real::<T>(2.0)
}

/// Absolute area of a simple polygon (shoelace formula).
pub fn polygon_area<T: Real>(poly: &[Point<T>]) -> Result<T> {
    if poly.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "polygon needs at least 3 vertices, got {}",
            poly.len()
        )));
    }
    Ok(shoelace_signed(poly).abs())
}

/// Intersection of two convex quads (Sutherland-Hodgman clipping).
///
/// Returns the intersection polygon (possibly empty, at most 8 vertices) in
/// the subject's clockwise winding.
pub fn clip_convex<T: Real>(subject: &Quad<T>, clip: &Quad<T>) -> Vec<Point<T>> {
    let tol = real::<T>(CLIP_TOL);
    let mut output: Vec<Point<T>> = subject.vertices().to_vec();

    for (a, b) in clip.edges() {
        if output.is_empty() {
            break;
        }
        let edge = b.sub(a);
        let edge_norm = edge.norm();
        let inside = |p: Point<T>| edge.cross(p.sub(a)) >= -tol * edge_norm;

        let input = std::mem::take(&mut output);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let cur_in = inside(cur);
            let prev_in = inside(prev);
            if cur_in {
                if !prev_in {
                    if let Some(x) = line_intersection(prev, cur, a, b) {
                        output.push(x);
                    }
                }
                output.push(cur);
            } else if prev_in {
                if let Some(x) = line_intersection(prev, cur, a, b) {
                    output.push(x);
                }
            }
        }
    }
    output
}

/// Intersection of infinite lines `(p1, p2)` and `(p3, p4)`; `None` when
/// parallel.
fn line_intersection<T: Real>(
    p1: Point<T>,
    p2: Point<T>,
    p3: Point<T>,
    p4: Point<T>,
) -> Option<Point<T>> {
    let d1 = p2.sub(p1);
    let d2 = p4.sub(p3);
    let denom = d1.cross(d2);
    if denom == T::zero() {
        return None;
    }
    let t = p3.sub(p1).cross(d2) / denom;
    Some(Point::new(p1.x + t * d1.x, p1.y + t * d1.y))
}

/// Intersection-over-union of two convex quads; 0 when the union area is 0.
pub fn quad_iou<T: Real>(a: &Quad<T>, b: &Quad<T>) -> T {
    let clipped = clip_convex(a, b);
    let inter = if clipped.len() < 3 {
        T::zero()
    } else {
        shoelace_signed(&clipped).abs()
    };
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).clamp(T::zero(), T::one())
}

/// Standard axis-aligned IoU.
pub fn aarect_iou<T: Real>(a: &AARect<T>, b: &AARect<T>) -> T {
    let iw = a.xmax.min(b.xmax) - a.xmin.max(b.xmin);
    let ih = a.ymax.min(b.ymax) - a.ymin.max(b.ymin);
    if iw <= T::zero() || ih <= T::zero() {
        return T::zero();
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= T::zero() {
        return T::zero();
    }
    (inter / union).clamp(T::zero(), T::one())
}

/// Tight axis-aligned bounding rectangle of a quad.
pub fn mbr<T: Real>(q: &Quad<T>) -> AARect<T> {
    let v = q.vertices();
    let mut xmin = v[0].x;
    let mut xmax = v[0].x;
    let mut ymin = v[0].y;
    let mut ymax = v[0].y;
    for p in &v[1..] {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    AARect {
        xmin,
        ymin,
        xmax,
        ymax,
    }
}

/// Shrinks a quad inward by `ratio` of each vertex's shorter adjacent edge,
/// moving vertices along their adjacent edges, longer edge pair first.
pub fn shrink_quad<T: Real>(q: &Quad<T>, ratio: T) -> Result<Quad<T>> {
    if !(T::zero()..real::<T>(0.5)).contains(&ratio) {
        return Err(Error::InvalidInput(format!(
            "shrink ratio {ratio} outside [0, 0.5)"
        )));
    }
    let mut p = *q.vertices();

    // Reference length per vertex: the shorter of its two adjacent edges,
    // measured on the original quad.
    let mut r = [T::zero(); 4];
    for i in 0..4 {
        let next = p[(i + 1) % 4].sub(p[i]).norm();
        let prev = p[(i + 3) % 4].sub(p[i]).norm();
        r[i] = next.min(prev) * ratio;
    }

    let unit = |from: Point<T>, to: Point<T>| {
        let d = to.sub(from);
        let n = d.norm();
        Point::new(d.x / n, d.y / n)
    };
    let step = |p: Point<T>, u: Point<T>, len: T, sign: T| {
        Point::new(p.x + sign * len * u.x, p.y + sign * len * u.y)
    };

    // Pair (p0,p1)/(p3,p2): vertices slide along those two edges.
    let move_pair_a = |p: &mut [Point<T>; 4]| {
        let u = unit(p[0], p[1]);
        p[0] = step(p[0], u, r[0], T::one());
        p[1] = step(p[1], u, r[1], -T::one());
        let u = unit(p[3], p[2]);
        p[3] = step(p[3], u, r[3], T::one());
        p[2] = step(p[2], u, r[2], -T::one());
    };
    // Pair (p0,p3)/(p1,p2).
    let move_pair_b = |p: &mut [Point<T>; 4]| {
        let u = unit(p[0], p[3]);
        p[0] = step(p[0], u, r[0], T::one());
        p[3] = step(p[3], u, r[3], -T::one());
        let u = unit(p[1], p[2]);
        p[1] = step(p[1], u, r[1], T::one());
        p[2] = step(p[2], u, r[2], -T::one());
    };

    let len_a = p[1].sub(p[0]).norm() + p[2].sub(p[3]).norm();
    let len_b = p[2].sub(p[1]).norm() + p[3].sub(p[0]).norm();
    if len_a > len_b {
        move_pair_a(&mut p);
        move_pair_b(&mut p);
    } else {
        move_pair_b(&mut p);
        move_pair_a(&mut p);
    }

    Quad::new(p).map_err(|_| Error::Degenerate("shrink collapsed the quad".into()))
}

/// Minimum-area enclosing rotated rectangle via rotating calipers over the
/// quad's (already convex) vertex ring.
///
/// The returned parametrization puts the longer side in `width` with `theta`
/// its direction in `(-pi/2, pi/2]`; exact squares take the orientation of
/// smaller `|theta|`.
pub fn fit_rotated_rect<T: Real>(q: &Quad<T>) -> RotRect<T> {
    struct Caliper<T> {
        area: T,
        base: Point<T>,
        u: Point<T>,
        v: Point<T>,
        extents: [T; 4],
    }

    let v = q.vertices();
    let mut best: Option<Caliper<T>> = None;

    for i in 0..4 {
        let base = v[i];
        let e = v[(i + 1) % 4].sub(base);
        let len = e.norm();
        if len <= T::zero() || len.is_nan() {
            continue;
        }
        let u = Point::new(e.x / len, e.y / len);
        let w = Point::new(-u.y, u.x);

        let mut umin = T::zero();
        let mut umax = T::zero();
        let mut vmin = T::zero();
        let mut vmax = T::zero();
        for p in v {
            let d = p.sub(base);
            let su = d.dot(u);
            let sv = d.dot(w);
            umin = umin.min(su);
            umax = umax.max(su);
            vmin = vmin.min(sv);
            vmax = vmax.max(sv);
        }
        let area = (umax - umin) * (vmax - vmin);
        if best.as_ref().is_none_or(|b| area < b.area) {
            best = Some(Caliper {
                area,
                base,
                u,
                v: w,
                extents: [umin, umax, vmin, vmax],
            });
        }
    }

    let Caliper {
        base,
        u,
        v: w,
        extents: [umin, umax, vmin, vmax],
        ..
    } = best.expect("quad has a non-degenerate edge");
    let half = real::<T>(0.5);
    let cu = (umin + umax) * half;
    let cv = (vmin + vmax) * half;
    let center = Point::new(base.x + cu * u.x + cv * w.x, base.y + cu * u.y + cv * w.y);
    let eu = umax - umin;
    let ev = vmax - vmin;

    let theta_u = normalize_half_pi(u.y.atan2(u.x));
    let theta_v = normalize_half_pi(w.y.atan2(w.x));
    let square_tol = T::epsilon() * real::<T>(32.0) * (eu + ev);
    let (width, height, theta) = if (eu - ev).abs() <= square_tol {
        if theta_u.abs() <= theta_v.abs() {
            (eu, ev, theta_u)
        } else {
            (ev, eu, theta_v)
        }
    } else if eu > ev {
        (eu, ev, theta_u)
    } else {
        (ev, eu, theta_v)
    };

    RotRect {
        center,
        width,
        height,
        theta,
    }
}

/// Decodes a per-pixel rotated-box prediction at pixel `(px, py)` into a
/// quad: the axis-aligned box spanned by the four distances, rotated by
/// `theta` about the pixel.
pub fn rbox_to_quad<T: Real>(px: T, py: T, r: &RBoxPred<T>) -> Result<Quad<T>> {
    if !r.distances_non_negative() {
        return Err(Error::InvalidInput("negative rbox distance".into()));
    }
    if r.d_left + r.d_right <= T::zero() || r.d_top + r.d_bottom <= T::zero() {
        return Err(Error::Degenerate("rbox with zero width or height".into()));
    }
    let center = Point::new(px, py);
    let corners = [
        Point::new(px - r.d_left, py - r.d_top),
        Point::new(px + r.d_right, py - r.d_top),
        Point::new(px + r.d_right, py + r.d_bottom),
        Point::new(px - r.d_left, py + r.d_bottom),
    ]
    .map(|p| p.rotated_about(center, r.theta));
    Quad::new(corners)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(coords: [f64; 8]) -> Quad<f64> {
        Quad::from_coords(coords).unwrap()
    }

    fn unit_square() -> Quad<f64> {
        q([0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0])
    }

    #[test]
    fn polygon_area_examples() {
        let square = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ];
        assert_eq!(polygon_area(&square).unwrap(), 1.0);

        let collinear = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 2.0),
        ];
        assert_eq!(polygon_area(&collinear).unwrap(), 0.0);

        let big = [
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(10.0, 10.0),
            Point::new(0.0, 10.0),
        ];
        assert_eq!(polygon_area(&big).unwrap(), 100.0);

        assert!(polygon_area(&collinear[..2]).is_err());
    }

    #[test]
    fn quad_canonicalization() {
        // Counter-clockwise input gets reversed; start vertex is min (y, x).
        let a = q([0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        let b = unit_square();
        assert_eq!(a, b);
        assert_eq!(a.vertices()[0], Point::new(0.0, 0.0));
        assert!(shoelace_signed(a.vertices()) > 0.0);

        // Same ring entered at a different vertex canonicalizes identically.
        let c = q([1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(c, b);
    }

    #[test]
    fn quad_rejects_invalid() {
        assert!(Quad::from_coords([0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).is_err());
        assert!(Quad::from_coords([0.0, 0.0, 1.0, 0.0, 2.0, 0.0, 3.0, 0.0]).is_err());
        // Bow-tie (self-intersecting).
        assert!(Quad::from_coords([0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 1.0]).is_err());
        assert!(Quad::from_coords([0.0, 0.0, f64::NAN, 0.0, 1.0, 1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn clip_self_and_disjoint() {
        let a = q([0.0, 0.0, 4.0, 0.0, 4.0, 3.0, 0.0, 3.0]);
        let inter = clip_convex(&a, &a);
        assert!((polygon_area(&inter).unwrap() - a.area()).abs() < 1e-9);

        let far = a.translated(100.0, 100.0);
        assert!(clip_convex(&a, &far).len() < 3);
    }

    #[test]
    fn clip_offset_squares() {
        let a = unit_square();
        let b = a.translated(0.5, 0.0);
        let inter = clip_convex(&a, &b);
        assert!((polygon_area(&inter).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quad_iou_examples() {
        let a = unit_square();
        assert!((quad_iou(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(quad_iou(&a, &a.translated(5.0, 5.0)), 0.0);
        let b = a.translated(0.5, 0.0);
        assert!((quad_iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn aarect_iou_examples() {
        let a = AARect::<f64>::new(0.0, 0.0, 2.0, 2.0).unwrap();
        assert_eq!(aarect_iou(&a, &a), 1.0);
        let touching = AARect::new(2.0, 0.0, 4.0, 2.0).unwrap();
        assert_eq!(aarect_iou(&a, &touching), 0.0);
        let b = AARect::new(1.0, 1.0, 3.0, 3.0).unwrap();
        assert!((aarect_iou(&a, &b) - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn mbr_examples() {
        let a = q([0.0, 0.0, 10.0, 0.0, 10.0, 10.0, 0.0, 10.0]);
        let r = mbr(&a);
        assert_eq!((r.xmin, r.ymin, r.xmax, r.ymax), (0.0, 0.0, 10.0, 10.0));

        let rot = unit_square().rotated_about(Point::new(0.0, 0.0), std::f64::consts::FRAC_PI_4);
        let r = mbr(&rot);
        let h = std::f64::consts::SQRT_2 / 2.0;
        assert!((r.xmin + h).abs() < 1e-12);
        assert!((r.xmax - h).abs() < 1e-12);
        assert!(r.ymin.abs() < 1e-12);
        assert!((r.ymax - 2.0 * h).abs() < 1e-12);
    }

    #[test]
    fn shrink_identity_and_square() {
        let a = q([0.0, 0.0, 10.0, 0.0, 10.0, 10.0, 0.0, 10.0]);
        assert_eq!(shrink_quad(&a, 0.0).unwrap(), a);

        let s = shrink_quad(&a, 0.3).unwrap();
        let expect = q([3.0, 3.0, 7.0, 3.0, 7.0, 7.0, 3.0, 7.0]);
        for (got, want) in s.vertices().iter().zip(expect.vertices()) {
            assert!((got.x - want.x).abs() < 1e-9 && (got.y - want.y).abs() < 1e-9);
        }
    }

    #[test]
    fn shrink_rotated_square_area() {
        let a = q([0.0, 0.0, 10.0, 0.0, 10.0, 10.0, 0.0, 10.0]);
        let rot = a.rotated_about(Point::new(5.0, 5.0), 0.7);
        let s = shrink_quad(&rot, 0.3).unwrap();
        assert!((s.area() - 16.0).abs() < 1e-9);
        // Same construction rotated: shrink commutes with rotation.
        let direct = shrink_quad(&a, 0.3)
            .unwrap()
            .rotated_about(Point::new(5.0, 5.0), 0.7);
        for (got, want) in s.vertices().iter().zip(direct.vertices()) {
            assert!((got.x - want.x).abs() < 1e-9 && (got.y - want.y).abs() < 1e-9);
        }
    }

    #[test]
    fn shrink_rejects_bad_ratio() {
        let a = unit_square();
        assert!(shrink_quad(&a, 0.5).is_err());
        assert!(shrink_quad(&a, -0.1).is_err());
    }

    #[test]
    fn fit_axis_aligned_rect() {
        let a = q([0.0, 0.0, 20.0, 0.0, 20.0, 10.0, 0.0, 10.0]);
        let r = fit_rotated_rect(&a);
        assert!((r.width - 20.0).abs() < 1e-9);
        assert!((r.height - 10.0).abs() < 1e-9);
        assert!(r.theta.abs() < 1e-12);
        assert_eq!(r.center, Point::new(10.0, 5.0));
    }

    #[test]
    fn fit_rotated_rect_recovers_angle() {
        let a = q([0.0, 0.0, 20.0, 0.0, 20.0, 10.0, 0.0, 10.0]);
        let rot = a.rotated_about(Point::new(10.0, 5.0), 0.3);
        let r = fit_rotated_rect(&rot);
        assert!((r.width - 20.0).abs() < 1e-6);
        assert!((r.height - 10.0).abs() < 1e-6);
        assert!((r.theta - 0.3).abs() < 1e-6);
    }

    #[test]
    fn fit_is_minimal_over_caliper_edges() {
        let a = q([0.0, 2.0, 9.0, 0.0, 12.0, 6.0, 2.0, 9.0]);
        let fitted = fit_rotated_rect(&a);
        assert!(fitted.area() >= a.area() - 1e-9);

        // Exhaustive check over all 4 edge orientations.
        let v = a.vertices();
        let mut min_area = f64::INFINITY;
        for i in 0..4 {
            let e = v[(i + 1) % 4].sub(v[i]);
            let len = e.norm();
            let u = Point::new(e.x / len, e.y / len);
            let w = Point::new(-u.y, u.x);
            let us: Vec<f64> = v.iter().map(|p| p.sub(v[i]).dot(u)).collect();
            let vs: Vec<f64> = v.iter().map(|p| p.sub(v[i]).dot(w)).collect();
            let area = (us.iter().cloned().fold(f64::MIN, f64::max)
                - us.iter().cloned().fold(f64::MAX, f64::min))
                * (vs.iter().cloned().fold(f64::MIN, f64::max)
                    - vs.iter().cloned().fold(f64::MAX, f64::min));
            min_area = min_area.min(area);
        }
        assert!((fitted.area() - min_area).abs() < 1e-9);
    }

    #[test]
    fn rbox_decode_axis_aligned() {
        let r = RBoxPred::new(2.0, 2.0, 3.0, 3.0, 0.0);
        let quad = rbox_to_quad(5.0, 5.0, &r).unwrap();
        assert_eq!(quad, q([2.0, 3.0, 8.0, 3.0, 8.0, 7.0, 2.0, 7.0]));
    }

    #[test]
    fn rbox_decode_rotated_quarter_turn() {
        let r0 = RBoxPred::new(2.0, 2.0, 3.0, 3.0, 0.0);
        let r90 = RBoxPred::new(2.0, 2.0, 3.0, 3.0, std::f64::consts::FRAC_PI_2);
        let base = rbox_to_quad(5.0, 5.0, &r0).unwrap();
        let got = rbox_to_quad(5.0, 5.0, &r90).unwrap();
        let want = base.rotated_about(Point::new(5.0, 5.0), std::f64::consts::FRAC_PI_2);
        for (g, w) in got.vertices().iter().zip(want.vertices()) {
            assert!((g.x - w.x).abs() < 1e-9 && (g.y - w.y).abs() < 1e-9);
        }
    }

    #[test]
    fn rbox_roundtrip_through_rotrect() {
        let rect = RotRect::<f64>::new(Point::new(40.0, 30.0), 24.0, 12.0, 0.4).unwrap();
        // An interior pixel away from the center.
        let (px, py) = (43.0, 28.0);
        let rbox = rect.rbox_at(px, py);
        assert!(rbox.distances_non_negative());
        let decoded = rbox_to_quad(px, py, &rbox).unwrap();
        let want = rect.to_quad().unwrap();
        for (g, w) in decoded.vertices().iter().zip(want.vertices()) {
            assert!((g.x - w.x).abs() < 1e-4 && (g.y - w.y).abs() < 1e-4);
        }
    }

    #[test]
    fn rbox_decode_degenerate() {
        assert!(rbox_to_quad(0.0, 0.0, &RBoxPred::new(0.0, 0.0, 1.0, 1.0, 0.0)).is_err());
        assert!(rbox_to_quad(0.0, 0.0, &RBoxPred::new(1.0, -0.5, 1.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn normalize_half_pi_range() {
        use std::f64::consts::PI;
        for t in [-PI, -2.0, -1.0, 0.0, 1.0, 2.0, PI, 4.0] {
            let n = normalize_half_pi(t);
            assert!(n > -PI / 2.0 && n <= PI / 2.0, "{t} -> {n}");
            // Shift is an exact multiple of pi.
            let k = (t - n) / PI;
            assert!((k - k.round()).abs() < 1e-9);
        }
    }

    /// Random convex quad: four angularly ordered points on a random ellipse.
    fn arb_convex_quad() -> impl Strategy<Value = Quad<f64>> {
        (
            (-100.0f64..100.0, -100.0f64..100.0),
            (5.0f64..60.0, 5.0f64..60.0, 0.0f64..std::f64::consts::PI),
            0.0f64..std::f64::consts::TAU,
            (0.3f64..1.8, 0.3f64..1.8, 0.3f64..1.8),
        )
            .prop_map(|((cx, cy), (a, b, phi), start, (g1, g2, g3))| {
                let angles = [start, start + g1, start + g1 + g2, start + g1 + g2 + g3];
                let (sp, cp) = phi.sin_cos();
                let pts = angles.map(|t| {
                    let (s, c) = t.sin_cos();
                    let (ex, ey) = (a * c, b * s);
                    Point::new(cx + ex * cp - ey * sp, cy + ex * sp + ey * cp)
                });
                Quad::new(pts).unwrap()
            })
    }

    proptest! {
        #[test]
        fn quad_iou_properties((a, b) in (arb_convex_quad(), arb_convex_quad())) {
            let ab = quad_iou(&a, &b);
            let ba = quad_iou(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((quad_iou(&a, &a) - 1.0).abs() < 1e-9);

            // Translation and rotation invariance.
            let (dx, dy, rot) = (13.5, -7.25, 0.83);
            let c = Point::new(0.0, 0.0);
            let ta = a.translated(dx, dy).rotated_about(c, rot);
            let tb = b.translated(dx, dy).rotated_about(c, rot);
            prop_assert!((quad_iou(&ta, &tb) - ab).abs() < 1e-6);
        }

        #[test]
        fn mbr_dominates_area(a in arb_convex_quad()) {
            prop_assert!(mbr(&a).area() >= a.area() - 1e-9);
        }

        #[test]
        fn mbr_is_vertex_extremes(a in arb_convex_quad()) {
            let r = mbr(&a);
            for p in a.vertices() {
                prop_assert!(p.x >= r.xmin - 1e-12 && p.x <= r.xmax + 1e-12);
                prop_assert!(p.y >= r.ymin - 1e-12 && p.y <= r.ymax + 1e-12);
            }
            let v = a.vertices();
            prop_assert!(v.iter().any(|p| (p.x - r.xmin).abs() < 1e-12));
            prop_assert!(v.iter().any(|p| (p.x - r.xmax).abs() < 1e-12));
        }

        #[test]
        fn shrink_contains_and_monotone(a in arb_convex_quad(), r1 in 0.05f64..0.2, r2 in 0.2f64..0.45) {
            if let (Ok(s1), Ok(s2)) = (shrink_quad(&a, r1), shrink_quad(&a, r2)) {
                for p in s1.vertices() {
                    prop_assert!(a.contains(*p));
                }
                prop_assert!(s1.area() <= a.area());
                prop_assert!(s2.area() <= s1.area() + 1e-9);
            }
        }

        #[test]
        fn fit_rotation_equivariance(a in arb_convex_quad(), delta in -1.5f64..1.5) {
            let base = fit_rotated_rect(&a);
            // Near-square fits flip orientation under the longer-side rule.
            prop_assume!((base.width - base.height).abs() > 0.05 * base.width);
            // A near-tie between two caliper edges makes the minimizer
            // itself ambiguous; equivariance is only meaningful when the
            // minimum is unique.
            let mut areas: Vec<f64> = (0..4)
                .map(|i| {
                    let v = a.vertices();
                    let e = v[(i + 1) % 4].sub(v[i]);
                    let len = e.norm();
                    let u = Point::new(e.x / len, e.y / len);
                    let w = Point::new(-u.y, u.x);
                    let (mut umin, mut umax, mut vmin, mut vmax) =
                        (0.0f64, 0.0f64, 0.0f64, 0.0f64);
                    for p in v {
                        let d = p.sub(v[i]);
                        umin = umin.min(d.dot(u));
                        umax = umax.max(d.dot(u));
                        vmin = vmin.min(d.dot(w));
                        vmax = vmax.max(d.dot(w));
                    }
                    (umax - umin) * (vmax - vmin)
                })
                .collect();
            areas.sort_by(|x, y| x.partial_cmp(y).unwrap());
            prop_assume!(areas[1] > areas[0] * 1.01);
            let rotated = fit_rotated_rect(&a.rotated_about(Point::new(0.0, 0.0), delta));
            prop_assert!((rotated.width - base.width).abs() < 1e-4);
            prop_assert!((rotated.height - base.height).abs() < 1e-4);
            let diff = rotated.theta - (base.theta + delta);
            let wrapped = (diff / std::f64::consts::PI).round() * std::f64::consts::PI;
            prop_assert!((diff - wrapped).abs() < 1e-6);
        }

        #[test]
        fn rbox_zero_theta_is_exact(t in 0.5f64..20.0, b in 0.5f64..20.0,
                                    l in 0.5f64..20.0, r in 0.5f64..20.0) {
            let (px, py) = (50.0, 40.0);
            let quad = rbox_to_quad(px, py, &RBoxPred::new(t, b, l, r, 0.0)).unwrap();
            let want = Quad::from_rect(&AARect::new(px - l, py - t, px + r, py + b).unwrap()).unwrap();
            prop_assert_eq!(quad, want);
        }
    }
}
