//! Scalar fields sampled on a uniform cube grid `[−K, K]³` with `N` points per
//! axis, trilinear interpolation with zero extension, and the `WKF1` binary
//! format.

use std::io::{Read, Write};
use std::path::Path;

use crate::dispersion::{DispersionRelation, Vec3};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WKF1";

/// Grid geometry shared by fields that can be combined pointwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub k: f64,
}

impl GridSpec {
    pub fn new(n: usize, k: f64) -> Result<Self> {
        if n < 2 || !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidConfig(format!("grid needs N ≥ 2 and K > 0, got N={n}, K={k}")));
        }
        Ok(Self { n, k })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.k / (self.n - 1) as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Coordinate of index `i` along an axis. Symmetric about zero bit for bit.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - 0.5 * (self.n - 1) as f64) * self.spacing()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx / (n * n), (idx / n) % n, idx % n)
    }

    #[inline]
    pub fn point(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.unindex(idx);
        Vec3::new(self.coord(i), self.coord(j), self.coord(k))
    }

    /// One-dimensional trapezoid weight of index `i`.
    #[inline]
    pub fn trap_weight_1d(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i == self.n - 1 {
            0.5 * h
        } else {
            h
        }
    }

    /// Tensor trapezoid weight of flat index `idx`.
    #[inline]
    pub fn trap_weight(&self, idx: usize) -> f64 {
        let (i, j, k) = self.unindex(idx);
        self.trap_weight_1d(i) * self.trap_weight_1d(j) * self.trap_weight_1d(k)
    }

    /// All trapezoid weights in flat order.
    pub fn trap_weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.trap_weight(i)).collect()
    }

    /// Key identifying the orbit of a grid point under the 48 symmetries of
    /// the cube. Points with equal keys have equal `|ξ|`.
    pub fn orbit_key(&self, idx: usize) -> [usize; 3] {
        let (i, j, k) = self.unindex(idx);
        let fold = |a: usize| (2 * a).abs_diff(self.n - 1);
        let mut key = [fold(i), fold(j), fold(k)];
        key.sort_unstable();
        key
    }

    /// Orbit representatives and, for every grid point, the index of its
    /// representative in the returned list.
    pub fn orbits(&self) -> (Vec<usize>, Vec<usize>) {
        let mut reps = Vec::new();
        let mut key_to_rep = std::collections::HashMap::new();
        let mut owner = Vec::with_capacity(self.len());
        for idx in 0..self.len() {
            let key = self.orbit_key(idx);
            let r = *key_to_rep.entry(key).or_insert_with(|| {
                reps.push(idx);
                reps.len() - 1
            });
            owner.push(r);
        }
        (reps, owner)
    }

    /// Interpolation cell of `x`, or `None` outside the closed box.
    #[inline]
    pub fn stencil(&self, x: &Vec3) -> Option<Stencil> {
        let n = self.n;
        let inv_h = (self.n - 1) as f64 / (2.0 * self.k);
        let top = (n - 1) as f64;
        let px = (x[0] + self.k) * inv_h;
        let py = (x[1] + self.k) * inv_h;
        let pz = (x[2] + self.k) * inv_h;
        if !(px >= 0.0 && px <= top && py >= 0.0 && py <= top && pz >= 0.0 && pz <= top) {
            return None;
        }
        let cell = |p: f64| -> (usize, f64) {
            let i = (p as usize).min(n - 2);
            (i, p - i as f64)
        };
        let (i, fx) = cell(px);
        let (j, fy) = cell(py);
        let (k, fz) = cell(pz);
        Some(Stencil { base: (i * n + j) * n + k, frac: [fx, fy, fz] })
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.n == other.n && self.k == other.k
    }
}

/// Lower corner and fractional offsets of a trilinear interpolation cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil {
    pub base: usize,
    pub frac: [f64; 3],
}

/// Scalar field on a [`GridSpec`]; values are row-major with `x` outer and
/// `z` inner. Evaluation outside the box returns zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, values: vec![0.0; spec.len()] }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::GridMismatch(format!("non-finite field value {v}")));
        }
        Ok(Self { spec, values })
    }

    /// Samples `f` at every grid point.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&Vec3) -> f64) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.point(i))).collect();
        Self { spec, values }
    }

    /// `A·exp(−|ξ|²/(2σ²))`.
    pub fn gaussian(spec: GridSpec, sigma: f64, amplitude: f64) -> Self {
        let c = 0.5 / (sigma * sigma);
        Self::from_fn(spec, |x| amplitude * (-c * x.norm_squared()).exp())
    }

    /// Box-truncated Rayleigh–Jeans spectrum `1/(a + b·ω(ξ))`.
    pub fn rayleigh_jeans(spec: GridSpec, rel: &DispersionRelation, a: f64, b: f64) -> Self {
        Self::from_fn(spec, |x| 1.0 / (a + b * rel.omega(x)))
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    /// Trilinear interpolation, zero outside `[−K, K]³`.
    #[inline]
    pub fn eval(&self, x: &Vec3) -> f64 {
        match self.spec.stencil(x) {
            Some(st) => self.eval_stencil(&st),
            None => 0.0,
        }
    }

    /// Trilinear interpolation from a precomputed [`Stencil`].
    #[inline]
    pub fn eval_stencil(&self, st: &Stencil) -> f64 {
        let n = self.spec.n;
        let v = &self.values[st.base..];
        let [fx, fy, fz] = st.frac;
        let (sx, sy) = (n * n, n);
        let c00 = v[0] + fz * (v[1] - v[0]);
        let c01 = v[sy] + fz * (v[sy + 1] - v[sy]);
        let c10 = v[sx] + fz * (v[sx + 1] - v[sx]);
        let c11 = v[sx + sy] + fz * (v[sx + sy + 1] - v[sx + sy]);
        let c0 = c00 + fy * (c01 - c00);
        let c1 = c10 + fy * (c11 - c10);
        c0 + fx * (c1 - c0)
    }

    /// Trapezoid approximation of `∫ f dξ` over the box.
    pub fn integral(&self) -> f64 {
        self.values.iter().enumerate().map(|(i, v)| v * self.spec.trap_weight(i)).sum()
    }

    /// Trapezoid approximation of `∫ w(ξ) f(ξ) dξ`.
    pub fn weighted_integral(&self, w: impl Fn(&Vec3) -> f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * w(&self.spec.point(i)) * self.spec.trap_weight(i))
            .sum()
    }

    /// `max ⟨ξ⟩^s |f(ξ)|` over grid points.
    pub fn weighted_norm(&self, s: f64) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| bracket(&self.spec.point(i)).powf(s) * v.abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True when every value is `≥ 0` (or every value `≤ 0`).
    pub fn is_sign_definite(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0) || self.values.iter().all(|&v| v <= 0.0)
    }

    fn check_compatible(&self, other: &GridField) -> Result<()> {
        if self.spec.same_as(&other.spec) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{:?} vs {:?}", self.spec, other.spec)))
        }
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &GridField) -> Result<GridField> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(GridField { spec: self.spec, values })
    }

    pub fn scaled(&self, c: f64) -> GridField {
        GridField { spec: self.spec, values: self.values.iter().map(|v| c * v).collect() }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridField) -> Result<GridField> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(GridField { spec: self.spec, values })
    }

    /// `max |self − other|`.
    pub fn max_abs_diff(&self, other: &GridField) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Weighted norm of `self − other`.
    pub fn weighted_diff_norm(&self, other: &GridField, s: f64) -> Result<f64> {
        Ok(self.axpy(-1.0, other)?.weighted_norm(s))
    }

    /// Largest relative spread of values within cube-symmetry orbits.
    pub fn cube_asymmetry(&self) -> f64 {
        let (reps, owner) = self.spec.orbits();
        let mut lo = vec![f64::INFINITY; reps.len()];
        let mut hi = vec![f64::NEG_INFINITY; reps.len()];
        for (i, &o) in owner.iter().enumerate() {
            lo[o] = lo[o].min(self.values[i]);
            hi[o] = hi[o].max(self.values[i]);
        }
        let scale = self.sup_abs().max(f64::MIN_POSITIVE);
        lo.iter().zip(&hi).map(|(l, h)| (h - l) / scale).fold(0.0, f64::max)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let n = u32::try_from(self.spec.n)
            .map_err(|_| Error::BadFieldFile("grid too large for u32 header".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&self.spec.k.to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::BadFieldFile("truncated header".into()))?;
        if &magic != MAGIC {
            return Err(Error::BadFieldFile(format!("bad magic bytes {magic:?}")));
        }
        let mut nb = [0u8; 4];
        let mut kb = [0u8; 8];
        r.read_exact(&mut nb).map_err(|_| Error::BadFieldFile("truncated header".into()))?;
        r.read_exact(&mut kb).map_err(|_| Error::BadFieldFile("truncated header".into()))?;
        let spec = GridSpec::new(u32::from_le_bytes(nb) as usize, f64::from_le_bytes(kb))
            .map_err(|e| Error::BadFieldFile(e.to_string()))?;
        let mut data = vec![0u8; 8 * spec.len()];
        r.read_exact(&mut data).map_err(|_| Error::BadFieldFile("truncated payload".into()))?;
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        GridField::from_values(spec, values).map_err(|e| Error::BadFieldFile(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Japanese bracket `⟨ξ⟩ = (1 + |ξ|²)^{1/2}`.
#[inline]
pub fn bracket(x: &Vec3) -> f64 {
    (1.0 + x.norm_squared()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec::new(9, 2.0).unwrap()
    }

    #[test]
    fn coordinates_are_symmetric() {
        let s = GridSpec::new(33, 6.0).unwrap();
        for i in 0..s.n {
            assert_eq!(s.coord(i), -s.coord(s.n - 1 - i));
        }
        assert_eq!(s.coord(16), 0.0);
        assert_eq!(s.coord(0), -6.0);
    }

    #[test]
    fn interpolation_reproduces_trilinear_functions() {
        let f = GridField::from_fn(spec(), |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2] + x[0] * x[1] * x[2]);
        let p = Vec3::new(0.31, -1.17, 1.9);
        let exact = 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[2] + p[0] * p[1] * p[2];
        assert!((f.eval(&p) - exact).abs() < 1e-12);
        assert_eq!(f.eval(&Vec3::new(2.01, 0.0, 0.0)), 0.0);
        assert!((f.eval(&Vec3::new(2.0, 2.0, 2.0)) - f.at(8, 8, 8)).abs() < 1e-14);
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let f = GridField::from_fn(spec(), |x| 3.0 + x[0]);
        assert!((f.integral() - 3.0 * 64.0).abs() < 1e-10);
    }

    #[test]
    fn weighted_norm_of_inverse_weight_is_one() {
        let s = 3.0;
        let f = GridField::from_fn(spec(), |x| bracket(x).powf(-s));
        assert!((f.weighted_norm(s) - 1.0).abs() < 1e-15);
        assert_eq!(GridField::zeros(spec()).weighted_norm(s), 0.0);
    }

    #[test]
    fn wkf1_round_trip_and_bad_magic() {
        let f = GridField::gaussian(spec(), 1.0, 2.0);
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"WKF1");
        assert_eq!(buf.len(), 4 + 4 + 8 + 8 * 729);
        let g = GridField::read_from(&buf[..]).unwrap();
        assert_eq!(f, g);
        buf[0] = b'X';
        assert!(matches!(GridField::read_from(&buf[..]), Err(Error::BadFieldFile(_))));
    }

    #[test]
    fn orbits_group_equal_radii() {
        let s = GridSpec::new(11, 3.0).unwrap();
        let (reps, owner) = s.orbits();
        assert_eq!(reps.len(), 56); // C(6 + 2, 3)
        for (i, &o) in owner.iter().enumerate() {
            let a = s.point(i).norm_squared();
            let b = s.point(reps[o]).norm_squared();
            assert!((a - b).abs() <= 1e-14 * (1.0 + a));
        }
    }
}
