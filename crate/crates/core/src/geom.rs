//! Affine flats, orthonormal frames, half-flats and flags.
//!
//! Every [`Flat`] stores an orthonormal basis and a base point that is the
//! point of the flat closest to the origin, so two flats describing the same
//! set compare equal up to rounding.

use nalgebra::{DMatrix, DVector};

use crate::error::{MassError, Result};

pub type Vector = DVector<f64>;

/// Orthonormality tolerance for frames and flat bases.
pub const TOL_ORTH: f64 = 1e-10;
/// Absolute incidence tolerance on unit-scale data.
pub const TOL_GEO: f64 = 1e-9;
/// Smallest accepted relative residual when orthonormalizing.
pub const TOL_RANK: f64 = 1e-8;

/// The standard basis vector `e_i` of R^d (0-based).
pub fn unit(d: usize, i: usize) -> Vector {
    let mut e = Vector::zeros(d);
    e[i] = 1.0;
    e
}

fn check_orthonormal(vectors: &[Vector], d: usize) -> Result<()> {
    for v in vectors {
        if v.len() != d {
            return Err(MassError::DimensionMismatch { expected: d, found: v.len() });
        }
    }
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let want = if i == j { 1.0 } else { 0.0 };
            if (a.dot(b) - want).abs() > TOL_ORTH {
                return Err(MassError::Invalid(format!(
                    "vectors {i} and {j} are not orthonormal (dot {:e})",
                    a.dot(b)
                )));
            }
        }
    }
    Ok(())
}

/// Orthonormalizes `vectors` in order with two passes of modified Gram-Schmidt.
pub fn orthonormalize(vectors: &[Vector]) -> Result<Frame> {
    let d = vectors.first().map_or(0, |v| v.len());
    let mut out: Vec<Vector> = Vec::with_capacity(vectors.len());
    for v in vectors {
        if v.len() != d {
            return Err(MassError::DimensionMismatch { expected: d, found: v.len() });
        }
        let scale = v.norm();
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&w);
                w.axpy(-c, q, 1.0);
            }
        }
        let n = w.norm();
        if !(scale > 0.0) || !(n > TOL_RANK * scale) {
            let residual = if scale > 0.0 { n / scale } else { 0.0 };
            return Err(MassError::RankDeficient { residual });
        }
        out.push(w / n);
    }
    Ok(Frame { d, vectors: out })
}

/// Orthonormal basis of the orthogonal complement of an orthonormal set.
///
/// Standard basis vectors are added greedily, largest residual first, which
/// makes the result a deterministic function of the input.
pub fn complement_basis(vectors: &[Vector], d: usize) -> Vec<Vector> {
    let mut basis: Vec<Vector> = vectors.to_vec();
    let mut out = Vec::with_capacity(d.saturating_sub(vectors.len()));
    let mut used = vec![false; d];
    while basis.len() < d {
        let mut best: Option<(usize, Vector, f64)> = None;
        for (j, taken) in used.iter().enumerate() {
            if *taken {
                continue;
            }
            let mut w = unit(d, j);
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&w);
                    w.axpy(-c, q, 1.0);
                }
            }
            let n = w.norm();
            if best.as_ref().is_none_or(|b| n > b.2 + 1e-12) {
                best = Some((j, w, n));
            }
        }
        let (j, w, n) = best.expect("complement exhausted before reaching full rank");
        used[j] = true;
        let w = w / n;
        basis.push(w.clone());
        out.push(w);
    }
    out
}

/// An ordered orthonormal m-frame in R^d.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    d: usize,
    vectors: Vec<Vector>,
}

impl Frame {
    pub fn new(vectors: Vec<Vector>) -> Result<Self> {
        let d = vectors.first().map_or(0, |v| v.len());
        if vectors.len() > d {
            return Err(MassError::RankDeficient { residual: 0.0 });
        }
        check_orthonormal(&vectors, d)?;
        Ok(Frame { d, vectors })
    }

    /// Frame of an empty vector list in R^d.
    pub fn empty(d: usize) -> Self {
        Frame { d, vectors: Vec::new() }
    }

    /// The first m standard basis vectors.
    pub fn identity(d: usize, m: usize) -> Self {
        Frame { d, vectors: (0..m).map(|i| unit(d, i)).collect() }
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vector] {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> &Vector {
        &self.vectors[i]
    }

    /// Multiplies vector i by `signs[i]`.
    pub fn with_signs(&self, signs: &[f64]) -> Frame {
        let vectors = self.vectors.iter().zip(signs).map(|(v, s)| v * *s).collect();
        Frame { d: self.d, vectors }
    }

    /// Representative of the sign orbit: first nonzero coordinate of each vector positive.
    pub fn sign_canonical(&self) -> Frame {
        let signs: Vec<f64> = self.vectors.iter().map(leading_sign).collect();
        self.with_signs(&signs)
    }

    /// Orthonormal basis of the complement of the spanned subspace.
    pub fn complement(&self) -> Vec<Vector> {
        complement_basis(&self.vectors, self.d)
    }

    /// The d x m matrix with the frame vectors as columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.vectors)
    }
}

/// Sign of the first coordinate whose magnitude exceeds 1e-12 (+1 for the zero vector).
pub fn leading_sign(v: &Vector) -> f64 {
    for x in v.iter() {
        if x.abs() > 1e-12 {
            return x.signum();
        }
    }
    1.0
}

/// An affine subspace `base + span(basis)` of R^d.
#[derive(Clone, Debug, PartialEq)]
pub struct Flat {
    base: Vector,
    basis: Vec<Vector>,
}

impl Flat {
    /// Builds a flat from a point and an orthonormal basis.
    pub fn new(base: Vector, basis: Vec<Vector>) -> Result<Self> {
        let d = base.len();
        if basis.len() > d {
            return Err(MassError::RankDeficient { residual: 0.0 });
        }
        check_orthonormal(&basis, d)?;
        Ok(Self::canonical(base, basis))
    }

    /// Builds a flat from a point and any spanning list of independent vectors.
    pub fn through(base: Vector, directions: &[Vector]) -> Result<Self> {
        if directions.is_empty() {
            return Ok(Self::point(base));
        }
        let frame = orthonormalize(directions)?;
        if frame.ambient_dim() != base.len() {
            return Err(MassError::DimensionMismatch {
                expected: base.len(),
                found: frame.ambient_dim(),
            });
        }
        Ok(Self::canonical(base, frame.vectors))
    }

    fn canonical(base: Vector, basis: Vec<Vector>) -> Self {
        let mut b = base;
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&b);
                b.axpy(-c, q, 1.0);
            }
        }
        Flat { base: b, basis }
    }

    /// R^d itself.
    pub fn whole(d: usize) -> Self {
        Flat { base: Vector::zeros(d), basis: (0..d).map(|i| unit(d, i)).collect() }
    }

    /// The 0-dimensional flat {p}.
    pub fn point(p: Vector) -> Self {
        Flat { base: p, basis: Vec::new() }
    }

    /// The linear subspace spanned by an orthonormal list.
    pub fn linear(d: usize, basis: Vec<Vector>) -> Result<Self> {
        Self::new(Vector::zeros(d), basis)
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn base(&self) -> &Vector {
        &self.base
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    /// In-flat coordinates of the nearest point to `x`.
    pub fn coords(&self, x: &Vector) -> Vector {
        let rel = x - &self.base;
        Vector::from_iterator(self.basis.len(), self.basis.iter().map(|b| b.dot(&rel)))
    }

    /// Coordinates of the orthogonal projection of a direction onto the flat's span.
    pub fn direction_coords(&self, v: &Vector) -> Vector {
        Vector::from_iterator(self.basis.len(), self.basis.iter().map(|b| b.dot(v)))
    }

    /// Ambient point with the given in-flat coordinates.
    pub fn point_at(&self, c: &Vector) -> Vector {
        let mut x = self.base.clone();
        for (b, ci) in self.basis.iter().zip(c.iter()) {
            x.axpy(*ci, b, 1.0);
        }
        x
    }

    /// Ambient vector with the given in-flat direction coordinates.
    pub fn vector_at(&self, c: &Vector) -> Vector {
        let mut x = Vector::zeros(self.ambient_dim());
        for (b, ci) in self.basis.iter().zip(c.iter()) {
            x.axpy(*ci, b, 1.0);
        }
        x
    }

    /// Nearest point of the flat to `x`.
    pub fn project(&self, x: &Vector) -> Vector {
        self.point_at(&self.coords(x))
    }

    pub fn distance(&self, x: &Vector) -> f64 {
        (x - self.project(x)).norm()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.distance(x) <= tol
    }

    /// Whether `other` lies inside this flat.
    pub fn contains_flat(&self, other: &Flat, tol: f64) -> bool {
        if !self.contains(&other.base, tol) {
            return false;
        }
        other.basis.iter().all(|b| (b - self.vector_at(&self.direction_coords(b))).norm() <= tol)
    }

    /// Same point set up to `tol`.
    pub fn approx_eq(&self, other: &Flat, tol: f64) -> bool {
        self.ambient_dim() == other.ambient_dim()
            && self.dim() == other.dim()
            && (&self.base - &other.base).norm() <= tol
            && self.contains_flat(other, tol)
    }

    /// Orthonormal basis of the directions orthogonal to the flat.
    pub fn normal_space(&self) -> Vec<Vector> {
        complement_basis(&self.basis, self.ambient_dim())
    }
}

/// A closed half of `carrier` bounded by `boundary`, on the side of `outward`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfFlat {
    pub carrier: Flat,
    pub boundary: Flat,
    /// Unit ambient vector in the carrier's span, orthogonal to the boundary.
    pub outward: Vector,
}

impl HalfFlat {
    /// Validates the incidence and orthogonality conditions.
    pub fn new(carrier: Flat, boundary: Flat, outward: Vector) -> Result<Self> {
        if carrier.dim() == 0 || boundary.dim() + 1 != carrier.dim() {
            return Err(MassError::Invalid("boundary must have codimension one".into()));
        }
        if !carrier.contains_flat(&boundary, TOL_GEO) {
            return Err(MassError::Invalid("boundary is not inside the carrier".into()));
        }
        if (outward.norm() - 1.0).abs() > TOL_ORTH
            || boundary.basis().iter().any(|b| b.dot(&outward).abs() > TOL_ORTH)
            || (carrier.vector_at(&carrier.direction_coords(&outward)) - &outward).norm() > TOL_ORTH
        {
            return Err(MassError::Invalid("outward must be a unit normal to the boundary".into()));
        }
        Ok(HalfFlat { carrier, boundary, outward })
    }

    /// Signed distance of `x` from the boundary along `outward`.
    pub fn signed_distance(&self, x: &Vector) -> f64 {
        (x - self.boundary.base()).dot(&self.outward)
    }

    /// Closed membership test.
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.carrier.contains(x, tol) && self.signed_distance(x) >= -tol
    }

    /// The complementary closed half-flat.
    pub fn opposite(&self) -> HalfFlat {
        HalfFlat {
            carrier: self.carrier.clone(),
            boundary: self.boundary.clone(),
            outward: -&self.outward,
        }
    }

    /// Outward direction in carrier coordinates and the boundary's offset along it,
    /// both relative to the carrier's base point.
    pub fn carrier_cut(&self) -> (Vector, f64) {
        let o = self.carrier.direction_coords(&self.outward);
        let c = self.carrier.coords(self.boundary.base()).dot(&o);
        (o, c)
    }
}

/// Cuts `parent` by the hyperplane `{x : <x - base, n> = offset}` with `n` given
/// in parent coordinates. Returns the child flat and the closed halves on the
/// `+n` and `-n` sides.
pub fn sub_flat(parent: &Flat, normal: &Vector, offset: f64) -> Result<(Flat, HalfFlat, HalfFlat)> {
    let k = parent.dim();
    if k == 0 {
        return Err(MassError::Invalid("cannot cut a point".into()));
    }
    if normal.len() != k {
        return Err(MassError::DimensionMismatch { expected: k, found: normal.len() });
    }
    if (normal.norm() - 1.0).abs() > 1e-8 {
        return Err(MassError::Invalid("cut normal must have unit length".into()));
    }
    let n = normal / normal.norm();
    let child_coords = complement_basis(std::slice::from_ref(&n), k);
    let basis: Vec<Vector> = child_coords.iter().map(|c| parent.vector_at(c)).collect();
    let n_amb = parent.vector_at(&n);
    let base = parent.base() + &n_amb * offset;
    let child = Flat::canonical(base, basis);
    let plus = HalfFlat { carrier: parent.clone(), boundary: child.clone(), outward: n_amb.clone() };
    let minus = HalfFlat { carrier: parent.clone(), boundary: child.clone(), outward: -n_amb };
    Ok((child, plus, minus))
}

/// True when the flat contains the directions `e_{d-k+1}, ..., e_d`.
pub fn is_k_vertical(flat: &Flat, k: usize, tol: f64) -> bool {
    let d = flat.ambient_dim();
    if k > flat.dim() {
        return false;
    }
    (d - k..d).all(|j| {
        let e = unit(d, j);
        (&e - flat.vector_at(&flat.direction_coords(&e))).norm() < tol
    })
}

/// Coordinates of the nearest point of `flat` to `x`.
pub fn project_to_flat(flat: &Flat, x: &Vector) -> Vector {
    flat.coords(x)
}

/// One level of a flag: the flat and the unit normal separating it inside its parent.
#[derive(Clone, Debug, PartialEq)]
pub struct FlagLevel {
    pub flat: Flat,
    pub cut_normal: Vector,
}

/// A nested chain of flats, listed from dimension d-1 downwards.
#[derive(Clone, Debug, PartialEq)]
pub struct Flag {
    d: usize,
    levels: Vec<FlagLevel>,
}

impl Flag {
    pub fn new(d: usize, levels: Vec<FlagLevel>) -> Result<Self> {
        let mut parent = Flat::whole(d);
        for (idx, level) in levels.iter().enumerate() {
            if level.flat.ambient_dim() != d || level.flat.dim() + 1 + idx != d {
                return Err(MassError::Invalid(format!("level {idx} has the wrong dimension")));
            }
            if !parent.contains_flat(&level.flat, TOL_GEO) {
                return Err(MassError::Invalid(format!("level {idx} is not nested")));
            }
            if (level.cut_normal.norm() - 1.0).abs() > TOL_ORTH
                || level.flat.basis().iter().any(|b| b.dot(&level.cut_normal).abs() > TOL_ORTH)
                || (parent.vector_at(&parent.direction_coords(&level.cut_normal)) - &level.cut_normal)
                    .norm()
                    > TOL_ORTH
            {
                return Err(MassError::Invalid(format!("level {idx} has an invalid cut normal")));
            }
            parent = level.flat.clone();
        }
        Ok(Flag { d, levels })
    }

    /// Builds a flag from levels produced by [`sub_flat`], skipping validation.
    pub(crate) fn from_parts(d: usize, levels: Vec<FlagLevel>) -> Self {
        Flag { d, levels }
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn levels(&self) -> &[FlagLevel] {
        &self.levels
    }

    /// The flat of the given intrinsic dimension, if present.
    pub fn flat_of_dim(&self, dim: usize) -> Option<&Flat> {
        self.levels.iter().map(|l| &l.flat).find(|f| f.dim() == dim)
    }

    /// The smallest flat.
    pub fn lowest(&self) -> Option<&Flat> {
        self.levels.last().map(|l| &l.flat)
    }

    /// The flat containing level `idx` (R^d for the top level).
    pub fn parent(&self, idx: usize) -> Flat {
        if idx == 0 {
            Flat::whole(self.d)
        } else {
            self.levels[idx - 1].flat.clone()
        }
    }

    /// The closed halves of the parent on the `+cut_normal` and `-cut_normal` sides.
    pub fn halves(&self, idx: usize) -> (HalfFlat, HalfFlat) {
        let parent = self.parent(idx);
        let level = &self.levels[idx];
        let plus = HalfFlat {
            carrier: parent.clone(),
            boundary: level.flat.clone(),
            outward: level.cut_normal.clone(),
        };
        (plus.clone(), plus.opposite())
    }
}
