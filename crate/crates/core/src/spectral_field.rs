//! Zero-mean, Fourier-truncated real fields on the 2-torus.
//!
//! Coefficients follow `c(k) = (2π)^-2 ∫ f(x) e^{-ik·x} dx`, so Parseval reads
//! `∫|f|² dx = (2π)² Σ_k |c(k)|²`. The lattice is the square
//! `0 < max(|k1|,|k2|) <= n`; the zero mode has no slot.

use std::f64::consts::PI;
use std::io::{self, Read, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::fft::Fft2;
use crate::stream::{derive_seed, mode_stream, GaussianStream};

/// `(2π)²`, the Parseval factor of the coefficient convention.
pub const PARSEVAL: f64 = 4.0 * PI * PI;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("lattice level must be at least 1")]
    EmptyLattice,
    #[error("grid of {grid} points per dimension is too small; at least {required} are required")]
    GridTooSmall { grid: usize, required: usize },
    #[error("component mismatch: {left} vs {right}")]
    ComponentMismatch { left: usize, right: usize },
    #[error("lattice mismatch: level {left} vs level {right}")]
    LatticeMismatch { left: usize, right: usize },
    #[error("expected a {expected}-component field, got {got}")]
    WrongComponents { expected: usize, got: usize },
    #[error("snapshot: {0}")]
    Snapshot(String),
}

/// An integer wavevector `(k1, k2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode {
    pub k1: i32,
    pub k2: i32,
}

impl Mode {
    pub const fn new(k1: i32, k2: i32) -> Self {
        Mode { k1, k2 }
    }

    pub fn norm_sq(self) -> f64 {
        let (a, b) = (self.k1 as f64, self.k2 as f64);
        a * a + b * b
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `k⊥ = (-k2, k1)`.
    pub fn perp(self) -> [f64; 2] {
        [-(self.k2 as f64), self.k1 as f64]
    }

    pub fn as_f64(self) -> [f64; 2] {
        [self.k1 as f64, self.k2 as f64]
    }

    pub fn sup_norm(self) -> u32 {
        self.k1.unsigned_abs().max(self.k2.unsigned_abs())
    }
}

impl std::ops::Neg for Mode {
    type Output = Mode;

    fn neg(self) -> Mode {
        Mode::new(-self.k1, -self.k2)
    }
}

/// The retained wavevectors at truncation level `n`, in lexicographic order
/// over `(k1, k2)`. The set is symmetric, with `index(-k) = len - 1 - index(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavenumberLattice {
    n: usize,
}

impl WavenumberLattice {
    pub fn new(n: usize) -> Result<Self, FieldError> {
        if n == 0 {
            return Err(FieldError::EmptyLattice);
        }
        Ok(WavenumberLattice { n })
    }

    pub fn level(&self) -> usize {
        self.n
    }

    fn side(&self) -> usize {
        2 * self.n + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: Mode) -> bool {
        k != Mode::new(0, 0) && (k.sup_norm() as usize) <= self.n
    }

    pub fn index(&self, k: Mode) -> Option<usize> {
        if !self.contains(k) {
            return None;
        }
        let n = self.n as i64;
        let raw = ((k.k1 as i64 + n) * self.side() as i64 + (k.k2 as i64 + n)) as usize;
        let center = self.len() / 2;
        Some(if raw < center { raw } else { raw - 1 })
    }

    pub fn mode(&self, index: usize) -> Mode {
        debug_assert!(index < self.len());
        let center = self.len() / 2;
        let raw = if index < center { index } else { index + 1 };
        let side = self.side();
        let n = self.n as i32;
        Mode::new((raw / side) as i32 - n, (raw % side) as i32 - n)
    }

    pub fn neg_index(&self, index: usize) -> usize {
        self.len() - 1 - index
    }

    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        (0..self.len()).map(move |i| self.mode(i))
    }

    /// Indices of one representative per `±k` pair.
    pub fn half(&self) -> std::ops::Range<usize> {
        0..self.len() / 2
    }

    /// Smallest grid with no aliasing in the retained modes of a product of
    /// fields at levels `a` and `b` truncated to level `out`, and on which
    /// every one of the three lattices is resolved.
    pub fn min_product_grid(a: usize, b: usize, out: usize) -> usize {
        (a + b + out + 1).max(2 * a.max(b).max(out) + 1)
    }
}

/// Smallest power of two that is at least `min`.
pub fn fft_size(min: usize) -> usize {
    min.max(1).next_power_of_two()
}

/// Truncated Fourier coefficients of a real field with `components`
/// components, stored component-major: `coeffs[c * lattice.len() + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    lattice: WavenumberLattice,
    components: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(lattice: WavenumberLattice, components: usize) -> Self {
        SpectralField {
            lattice,
            components,
            coeffs: vec![Complex64::default(); lattice.len() * components],
        }
    }

    /// Builds a field from `f(component, k)`. The caller is responsible for
    /// conjugate symmetry.
    pub fn from_fn(
        lattice: WavenumberLattice,
        components: usize,
        mut f: impl FnMut(usize, Mode) -> Complex64,
    ) -> Self {
        let mut out = Self::zeros(lattice, components);
        let len = lattice.len();
        for c in 0..components {
            for i in 0..len {
                out.coeffs[c * len + i] = f(c, lattice.mode(i));
            }
        }
        out
    }

    pub fn from_coeffs(
        lattice: WavenumberLattice,
        components: usize,
        coeffs: Vec<Complex64>,
    ) -> Result<Self, FieldError> {
        if coeffs.len() != lattice.len() * components {
            return Err(FieldError::ComponentMismatch {
                left: coeffs.len(),
                right: lattice.len() * components,
            });
        }
        Ok(SpectralField {
            lattice,
            components,
            coeffs,
        })
    }

    /// Independent complex Gaussian coefficients with standard deviation
    /// `|k|^-decay`, conjugate symmetric. Draws are keyed by mode, so the
    /// same seed yields the same low modes at every level.
    pub fn random(lattice: WavenumberLattice, components: usize, decay: f64, seed: u64) -> Self {
        let mut out = Self::zeros(lattice, components);
        let mut g = GaussianStream::new(derive_seed(seed, 0x5eed));
        let len = lattice.len();
        for i in lattice.half() {
            let k = lattice.mode(i);
            let sd = k.norm().powf(-decay) / std::f64::consts::SQRT_2;
            for c in 0..components {
                let (a, b) = g.pair(mode_stream(k), c as u64);
                let z = Complex64::new(a * sd, b * sd);
                out.coeffs[c * len + i] = z;
                out.coeffs[c * len + lattice.neg_index(i)] = z.conj();
            }
        }
        out
    }

    pub fn lattice(&self) -> WavenumberLattice {
        self.lattice
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.lattice.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.lattice.len();
        &mut self.coeffs[c * len..(c + 1) * len]
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, c: usize, k: Mode) -> Complex64 {
        self.lattice
            .index(k)
            .map(|i| self.component(c)[i])
            .unwrap_or_default()
    }

    /// Sets `coeff(c, k)` and its mirror `coeff(c, -k)` to the conjugate.
    pub fn set_pair(&mut self, c: usize, k: Mode, value: Complex64) {
        let len = self.lattice.len();
        if let Some(i) = self.lattice.index(k) {
            let j = self.lattice.neg_index(i);
            self.coeffs[c * len + i] = value;
            self.coeffs[c * len + j] = value.conj();
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `max |coeff(-k) - conj(coeff(k))|` over all modes and components.
    pub fn symmetry_defect(&self) -> f64 {
        let len = self.lattice.len();
        let mut worst: f64 = 0.0;
        for c in 0..self.components {
            let col = &self.coeffs[c * len..(c + 1) * len];
            for i in 0..len {
                worst = worst.max((col[self.lattice.neg_index(i)] - col[i].conj()).norm());
            }
        }
        worst
    }

    /// `max |<coeff(k), k>|` for a velocity field.
    pub fn divergence_defect(&self) -> f64 {
        assert_eq!(self.components, 2, "divergence needs a vector field");
        let len = self.lattice.len();
        (0..len)
            .map(|i| {
                let [k1, k2] = self.lattice.mode(i).as_f64();
                (self.coeffs[i] * k1 + self.coeffs[len + i] * k2).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Real `L²(T²)` inner product, summed over components.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        self.check_same(other).expect("inner product of mismatched fields");
        PARSEVAL
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a * b.conj()).re)
                .sum::<f64>()
    }

    /// Inner product weighted by `w(k)` on each mode.
    pub fn weighted_inner(&self, other: &SpectralField, w: impl Fn(Mode) -> f64) -> f64 {
        self.check_same(other).expect("inner product of mismatched fields");
        let len = self.lattice.len();
        let mut acc = 0.0;
        for i in 0..len {
            let wk = w(self.lattice.mode(i));
            for c in 0..self.components {
                let j = c * len + i;
                acc += wk * (self.coeffs[j] * other.coeffs[j].conj()).re;
            }
        }
        PARSEVAL * acc
    }

    pub fn l2_norm(&self) -> f64 {
        (PARSEVAL * self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn check_same(&self, other: &SpectralField) -> Result<(), FieldError> {
        if self.lattice != other.lattice {
            return Err(FieldError::LatticeMismatch {
                left: self.lattice.level(),
                right: other.lattice.level(),
            });
        }
        if self.components != other.components {
            return Err(FieldError::ComponentMismatch {
                left: self.components,
                right: other.components,
            });
        }
        Ok(())
    }

    /// Multiplies every mode by `m(k)` (same multiplier on all components).
    pub fn map_multiplier(&self, m: impl Fn(Mode) -> Complex64) -> SpectralField {
        let mut out = self.clone();
        let len = self.lattice.len();
        for i in 0..len {
            let f = m(self.lattice.mode(i));
            for c in 0..self.components {
                out.coeffs[c * len + i] *= f;
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.coeffs.iter_mut().for_each(|z| *z *= s);
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &SpectralField) {
        self.check_same(other).expect("axpy of mismatched fields");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * s;
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Copies the coefficients onto another lattice: modes outside the
    /// target are dropped, new modes are zero.
    pub fn resample(&self, lattice: WavenumberLattice) -> SpectralField {
        let mut out = SpectralField::zeros(lattice, self.components);
        let len = lattice.len();
        for i in 0..len {
            if let Some(j) = self.lattice.index(lattice.mode(i)) {
                for c in 0..self.components {
                    out.coeffs[c * len + i] = self.component(c)[j];
                }
            }
        }
        out
    }

    /// Extracts a single component as a scalar field.
    pub fn take_component(&self, c: usize) -> SpectralField {
        SpectralField {
            lattice: self.lattice,
            components: 1,
            coeffs: self.component(c).to_vec(),
        }
    }

    /// Stacks scalar fields into a vector field.
    pub fn stack(parts: &[SpectralField]) -> Result<SpectralField, FieldError> {
        let first = parts.first().ok_or(FieldError::ComponentMismatch { left: 0, right: 1 })?;
        let mut coeffs = Vec::with_capacity(first.lattice.len() * parts.len());
        for p in parts {
            if p.lattice != first.lattice {
                return Err(FieldError::LatticeMismatch {
                    left: first.lattice.level(),
                    right: p.lattice.level(),
                });
            }
            coeffs.extend_from_slice(&p.coeffs);
        }
        Ok(SpectralField {
            lattice: first.lattice,
            components: parts.iter().map(|p| p.components).sum(),
            coeffs,
        })
    }

    /// Writes the binary snapshot: `"FSNS"`, version `u16`, `d` as `u16`,
    /// `n` and `components` as `u32`, then `(re, im)` `f64` pairs in lattice
    /// order, component-major; all little-endian.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&2u16.to_le_bytes())?;
        w.write_all(&(self.lattice.level() as u32).to_le_bytes())?;
        w.write_all(&(self.components as u32).to_le_bytes())?;
        for z in &self.coeffs {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<SpectralField, FieldError> {
        let io = |e: io::Error| FieldError::Snapshot(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(FieldError::Snapshot("bad magic".into()));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2).map_err(io)?;
        let version = u16::from_le_bytes(b2);
        if version != SNAPSHOT_VERSION {
            return Err(FieldError::Snapshot(format!("unsupported version {version}")));
        }
        r.read_exact(&mut b2).map_err(io)?;
        let d = u16::from_le_bytes(b2);
        if d != 2 {
            return Err(FieldError::Snapshot(format!("unsupported dimension {d}")));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(io)?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4).map_err(io)?;
        let components = u32::from_le_bytes(b4) as usize;
        let lattice = WavenumberLattice::new(n)?;
        let mut coeffs = Vec::with_capacity(lattice.len() * components);
        let mut b8 = [0u8; 8];
        for _ in 0..lattice.len() * components {
            r.read_exact(&mut b8).map_err(io)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8).map_err(io)?;
            coeffs.push(Complex64::new(re, f64::from_le_bytes(b8)));
        }
        SpectralField::from_coeffs(lattice, components, coeffs)
    }
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"FSNS";
const SNAPSHOT_VERSION: u16 = 1;

/// Real samples at `x_j = 2π j / m`, component-major, each component
/// row-major over `(j1, j2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalGrid {
    m: usize,
    components: usize,
    values: Vec<f64>,
}

impl PhysicalGrid {
    pub fn from_fn(m: usize, components: usize, mut f: impl FnMut(usize, f64, f64) -> f64) -> Self {
        let h = 2.0 * PI / m as f64;
        let mut values = Vec::with_capacity(m * m * components);
        for c in 0..components {
            for j1 in 0..m {
                for j2 in 0..m {
                    values.push(f(c, j1 as f64 * h, j2 as f64 * h));
                }
            }
        }
        PhysicalGrid {
            m,
            components,
            values,
        }
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let s = self.m * self.m;
        &self.values[c * s..(c + 1) * s]
    }

    /// Trapezoidal `∫ |f(x)|^q dx` with `|·|` the Euclidean norm over components.
    pub fn lq_norm(&self, q: f64) -> f64 {
        let s = self.m * self.m;
        let cell = PARSEVAL / s as f64;
        let mut acc = 0.0;
        for p in 0..s {
            let mag2: f64 = (0..self.components)
                .map(|c| self.values[c * s + p].powi(2))
                .sum();
            acc += if q == 2.0 { mag2 } else { mag2.powf(q / 2.0) };
        }
        (acc * cell).powf(1.0 / q)
    }

    pub fn max_abs(&self) -> f64 {
        let s = self.m * self.m;
        (0..s)
            .map(|p| {
                (0..self.components)
                    .map(|c| self.values[c * s + p].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

fn slot(k: Mode, m: usize) -> usize {
    let w = |v: i32| v.rem_euclid(m as i32) as usize;
    w(k.k1) * m + w(k.k2)
}

fn check_resolves(lattice: WavenumberLattice, m: usize) -> Result<(), FieldError> {
    let required = 2 * lattice.level() + 1;
    if m < required {
        return Err(FieldError::GridTooSmall { grid: m, required });
    }
    Ok(())
}

/// Two real fields through one complex inverse FFT: the real part of the
/// result samples `a`, the imaginary part samples `b`.
pub(crate) fn synthesize_pair(
    lattice: WavenumberLattice,
    a: &[Complex64],
    b: &[Complex64],
    m: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut buf = vec![Complex64::default(); m * m];
    let i = Complex64::new(0.0, 1.0);
    for (idx, k) in lattice.modes().enumerate() {
        buf[slot(k, m)] = a[idx] + i * b[idx];
    }
    Fft2::get(m).inverse(&mut buf);
    buf.into_iter().map(|z| (z.re, z.im)).unzip()
}

/// Inverse of [`synthesize_pair`] restricted to `lattice`.
pub(crate) fn analyze_pair(
    ga: &[f64],
    gb: &[f64],
    m: usize,
    lattice: WavenumberLattice,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut buf: Vec<Complex64> = ga
        .iter()
        .zip(gb)
        .map(|(&x, &y)| Complex64::new(x, y))
        .collect();
    Fft2::get(m).forward(&mut buf);
    let norm = 1.0 / (m * m) as f64;
    let half_i = Complex64::new(0.0, -0.5);
    let mut a = Vec::with_capacity(lattice.len());
    let mut b = Vec::with_capacity(lattice.len());
    for k in lattice.modes() {
        let z = buf[slot(k, m)] * norm;
        let zm = buf[slot(-k, m)].conj() * norm;
        a.push((z + zm) * 0.5);
        b.push((z - zm) * half_i);
    }
    (a, b)
}

/// Samples `Σ_k coeff(k) e^{ik·x}` on an `m x m` grid.
pub fn synthesize(field: &SpectralField, grid_size: usize) -> Result<PhysicalGrid, FieldError> {
    let lattice = field.lattice();
    check_resolves(lattice, grid_size)?;
    let s = grid_size * grid_size;
    let mut values = vec![0.0; s * field.components()];
    let mut c = 0;
    while c < field.components() {
        if c + 1 < field.components() {
            let (ga, gb) = synthesize_pair(lattice, field.component(c), field.component(c + 1), grid_size);
            values[c * s..(c + 1) * s].copy_from_slice(&ga);
            values[(c + 1) * s..(c + 2) * s].copy_from_slice(&gb);
            c += 2;
        } else {
            let zero = vec![Complex64::default(); lattice.len()];
            let (ga, _) = synthesize_pair(lattice, field.component(c), &zero, grid_size);
            values[c * s..(c + 1) * s].copy_from_slice(&ga);
            c += 1;
        }
    }
    Ok(PhysicalGrid {
        m: grid_size,
        components: field.components(),
        values,
    })
}

/// Discrete Fourier coefficients of grid samples on `lattice`; the mean is
/// discarded.
pub fn analyze(grid: &PhysicalGrid, lattice: WavenumberLattice) -> Result<SpectralField, FieldError> {
    let m = grid.size();
    check_resolves(lattice, m)?;
    let mut out = SpectralField::zeros(lattice, grid.components());
    let mut c = 0;
    while c < grid.components() {
        let ga = grid.component(c);
        if c + 1 < grid.components() {
            let (a, b) = analyze_pair(ga, grid.component(c + 1), m, lattice);
            out.component_mut(c).copy_from_slice(&a);
            out.component_mut(c + 1).copy_from_slice(&b);
            c += 2;
        } else {
            let zero = vec![0.0; m * m];
            let (a, _) = analyze_pair(ga, &zero, m, lattice);
            out.component_mut(c).copy_from_slice(&a);
            c += 1;
        }
    }
    Ok(out)
}

/// Exact truncated convolution `Σ_{p+q=k} a(p) b(q)` on `out`, via a
/// zero-padded grid of the smallest power-of-two size that avoids aliasing.
///
/// Components multiply pairwise; a scalar factor broadcasts over the other
/// field's components.
pub fn dealiased_pointwise_product(
    a: &SpectralField,
    b: &SpectralField,
    out: WavenumberLattice,
) -> Result<SpectralField, FieldError> {
    let m = fft_size(WavenumberLattice::min_product_grid(
        a.lattice().level(),
        b.lattice().level(),
        out.level(),
    ));
    dealiased_product_on_grid(a, b, out, m)
}

/// As [`dealiased_pointwise_product`] on an explicit grid size; rejects grids
/// that would alias into the retained modes.
pub fn dealiased_product_on_grid(
    a: &SpectralField,
    b: &SpectralField,
    out: WavenumberLattice,
    m: usize,
) -> Result<SpectralField, FieldError> {
    let required = WavenumberLattice::min_product_grid(a.lattice().level(), b.lattice().level(), out.level());
    if m < required {
        return Err(FieldError::GridTooSmall { grid: m, required });
    }
    let (ca, cb) = (a.components(), b.components());
    let comps = if ca == cb || cb == 1 {
        ca
    } else if ca == 1 {
        cb
    } else {
        return Err(FieldError::ComponentMismatch { left: ca, right: cb });
    };
    let ga = synthesize(a, m)?;
    let gb = synthesize(b, m)?;
    let s = m * m;
    let values = (0..comps)
        .flat_map(|c| {
            let xa = ga.component(if ca == 1 { 0 } else { c });
            let xb = gb.component(if cb == 1 { 0 } else { c });
            (0..s).map(move |p| xa[p] * xb[p])
        })
        .collect();
    let prod = PhysicalGrid {
        m,
        components: comps,
        values,
    };
    analyze(&prod, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat(n: usize) -> WavenumberLattice {
        WavenumberLattice::new(n).unwrap()
    }

    #[test]
    fn lattice_indexing_round_trips_and_mirrors() {
        let l = lat(3);
        assert_eq!(l.len(), 48);
        for i in 0..l.len() {
            let k = l.mode(i);
            assert_eq!(l.index(k), Some(i));
            assert_eq!(l.mode(l.neg_index(i)), -k);
        }
        assert_eq!(l.index(Mode::new(0, 0)), None);
        assert_eq!(l.index(Mode::new(4, 0)), None);
        assert_eq!(l.mode(0), Mode::new(-3, -3));
    }

    #[test]
    fn empty_lattice_is_rejected() {
        assert_eq!(WavenumberLattice::new(0), Err(FieldError::EmptyLattice));
    }

    #[test]
    fn cosine_pair_synthesizes_to_cosine() {
        let mut f = SpectralField::zeros(lat(2), 1);
        f.set_pair(0, Mode::new(1, 0), Complex64::new(0.5, 0.0));
        let g = synthesize(&f, 8).unwrap();
        let h = 2.0 * PI / 8.0;
        for j1 in 0..8 {
            for j2 in 0..8 {
                let v = g.component(0)[j1 * 8 + j2];
                assert!((v - (j1 as f64 * h).cos()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_field_synthesizes_to_zero() {
        let g = synthesize(&SpectralField::zeros(lat(3), 2), 8).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn analyze_picks_out_diagonal_cosine() {
        let g = PhysicalGrid::from_fn(16, 1, |_, x1, x2| (x1 + x2).cos());
        let f = analyze(&g, lat(4)).unwrap();
        for (i, k) in f.lattice().modes().enumerate() {
            let expect = if k == Mode::new(1, 1) || k == Mode::new(-1, -1) { 0.5 } else { 0.0 };
            assert!((f.component(0)[i] - Complex64::new(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn constant_grid_has_no_retained_content() {
        let g = PhysicalGrid::from_fn(8, 1, |_, _, _| 3.25);
        assert!(analyze(&g, lat(3)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn small_grid_is_rejected_with_sizes() {
        let f = SpectralField::zeros(lat(4), 1);
        assert_eq!(
            synthesize(&f, 8).unwrap_err(),
            FieldError::GridTooSmall { grid: 8, required: 9 }
        );
    }

    #[test]
    fn cosine_squared_drops_the_mean() {
        let mut a = SpectralField::zeros(lat(2), 1);
        a.set_pair(0, Mode::new(1, 0), Complex64::new(0.5, 0.0));
        let p = dealiased_pointwise_product(&a, &a, lat(2)).unwrap();
        let mut expect = SpectralField::zeros(lat(2), 1);
        expect.set_pair(0, Mode::new(2, 0), Complex64::new(0.25, 0.0));
        assert!(p.sub(&expect).max_abs() < 1e-15);
    }

    #[test]
    fn product_with_zero_is_zero() {
        let a = SpectralField::random(lat(3), 1, 1.0, 3);
        let z = SpectralField::zeros(lat(3), 1);
        assert_eq!(dealiased_pointwise_product(&a, &z, lat(3)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn aliasing_grid_is_rejected() {
        let a = SpectralField::random(lat(4), 1, 1.0, 3);
        let err = dealiased_product_on_grid(&a, &a, lat(4), 12).unwrap_err();
        assert_eq!(err, FieldError::GridTooSmall { grid: 12, required: 13 });
        assert!(dealiased_product_on_grid(&a, &a, lat(4), 13).is_ok());
    }

    #[test]
    fn random_fields_are_symmetric_and_nested_across_levels() {
        let f4 = SpectralField::random(lat(4), 2, 2.5, 11);
        let f8 = SpectralField::random(lat(8), 2, 2.5, 11);
        assert_eq!(f4.symmetry_defect(), 0.0);
        assert_eq!(f8.resample(lat(4)), f4);
    }

    #[test]
    fn snapshot_round_trip() {
        let f = SpectralField::random(lat(3), 2, 1.5, 5);
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"FSNS");
        assert_eq!(buf.len(), 4 + 2 + 2 + 4 + 4 + 16 * f.coeffs().len());
        assert_eq!(SpectralField::read_snapshot(&buf[..]).unwrap(), f);
        buf[0] = b'X';
        assert!(SpectralField::read_snapshot(&buf[..]).is_err());
    }

    #[test]
    fn parseval_matches_grid_quadrature() {
        let f = SpectralField::random(lat(4), 2, 1.0, 8);
        let g = synthesize(&f, 16).unwrap();
        assert!((g.lq_norm(2.0) - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn synthesize_analyze_round_trip() {
        for seed in 0..20 {
            let f = SpectralField::random(lat(4), 2, 0.5, seed);
            let back = analyze(&synthesize(&f, 16).unwrap(), lat(4)).unwrap();
            assert!(back.sub(&f).max_abs() < 1e-14 * f.max_abs());
        }
    }

    /// Truncated convolution `Σ_{a+b=c} â(a) b̂(b)` by direct summation.
    fn convolve(a: &SpectralField, b: &SpectralField, out: WavenumberLattice) -> Vec<Complex64> {
        let (la, lb) = (a.lattice(), b.lattice());
        let mut acc = vec![Complex64::default(); out.len()];
        for i in 0..la.len() {
            let ka = la.mode(i);
            for j in 0..lb.len() {
                let kb = lb.mode(j);
                if let Some(c) = out.index(Mode::new(ka.k1 + kb.k1, ka.k2 + kb.k2)) {
                    acc[c] += a.coeffs()[i] * b.coeffs()[j];
                }
            }
        }
        acc
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(100))]

        #[test]
        fn product_matches_direct_convolution(
            na in 1usize..=6, nb in 1usize..=6, nout in 1usize..=6, seed in 0u64..1 << 40,
        ) {
            let a = SpectralField::random(lat(na), 1, 1.0, seed);
            let b = SpectralField::random(lat(nb), 1, 1.0, seed ^ 0x5a5a);
            let prod = dealiased_pointwise_product(&a, &b, lat(nout)).unwrap();
            let exact = convolve(&a, &b, lat(nout));
            let scale = a.max_abs() * b.max_abs() * lat(na.max(nb)).len() as f64;
            for (x, y) in prod.coeffs().iter().zip(&exact) {
                proptest::prop_assert!((x - y).norm() <= 1e-13 * scale);
            }
        }
    }
}
