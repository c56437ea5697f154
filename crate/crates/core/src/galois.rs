//! Arithmetic in GF(2^w) for w in {4, 8, 16} and dense matrices over it.
//!
//! Field elements are plain `u16` values below `2^w`. Addition is XOR;
//! multiplication goes through log/antilog tables that are built once per
//! [`FieldSpec`] and shared between every [`Field`] handle for it.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A field element. Only the low `w` bits are ever set.
pub type Elem = u16;

/// Width and reduction polynomial of a binary extension field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    width: u8,
    modulus: u32,
}

impl FieldSpec {
    pub const GF16: FieldSpec = FieldSpec {
        width: 4,
        modulus: 0x13,
    };
    pub const GF256: FieldSpec = FieldSpec {
        width: 8,
        modulus: 0x11D,
    };
    pub const GF65536: FieldSpec = FieldSpec {
        width: 16,
        modulus: 0x1100B,
    };

    /// Validates that `modulus` is irreducible of degree `width`.
    pub fn new(width: u8, modulus: u32) -> Result<Self> {
        if !matches!(width, 4 | 8 | 16) {
            return Err(Error::UnsupportedWidth(width));
        }
        if degree(modulus) != Some(width as u32) || !is_irreducible(modulus) {
            return Err(Error::InvalidModulus { width, modulus });
        }
        Ok(FieldSpec { width, modulus })
    }

    /// The standard erasure-coding polynomial for `width`.
    pub fn with_default_modulus(width: u8) -> Result<Self> {
        match width {
            4 => Ok(Self::GF16),
            8 => Ok(Self::GF256),
            16 => Ok(Self::GF65536),
            w => Err(Error::UnsupportedWidth(w)),
        }
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    pub fn modulus(&self) -> u32 {
        self.modulus
    }

    /// Number of field elements, `2^w`.
    pub fn order(&self) -> usize {
        1usize << self.width
    }

    /// Bytes needed to store one element.
    pub fn element_bytes(&self) -> usize {
        if self.width <= 8 {
            1
        } else {
            2
        }
    }
}

fn degree(poly: u32) -> Option<u32> {
    if poly == 0 {
        None
    } else {
        Some(31 - poly.leading_zeros())
    }
}

/// Remainder of `a` modulo `b` as polynomials over GF(2).
fn poly_mod(mut a: u32, b: u32) -> u32 {
    let db = degree(b).expect("nonzero divisor");
    while let Some(da) = degree(a) {
        if da < db {
            break;
        }
        a ^= b << (da - db);
    }
    a
}

fn is_irreducible(poly: u32) -> bool {
    let Some(d) = degree(poly) else {
        return false;
    };
    if d == 0 {
        return false;
    }
    // Trial division by every polynomial of degree 1..=d/2.
    for divisor in 2u32..(1u32 << (d / 2 + 1)) {
        if poly_mod(poly, divisor) == 0 {
            return false;
        }
    }
    true
}

/// Shift-and-add multiplication followed by reduction. Slow but table-free;
/// used to build the tables and as a reference in tests.
pub fn clmul_reduce(spec: FieldSpec, a: Elem, b: Elem) -> Elem {
    let mut product: u32 = 0;
    let (a, mut b) = (a as u32, b as u32);
    let mut shift = 0;
    while b != 0 {
        if b & 1 == 1 {
            product ^= a << shift;
        }
        b >>= 1;
        shift += 1;
    }
    poly_mod(product, spec.modulus) as Elem
}

struct Tables {
    /// `exp[i] = g^i`, stored twice over so `exp[log a + log b]` needs no reduction.
    exp: Vec<Elem>,
    /// `log[a]` for nonzero `a`; `log[0]` is unused.
    log: Vec<u32>,
}

impl Tables {
    fn build(spec: FieldSpec) -> Tables {
        let order = spec.order();
        let group = order - 1;
        let generator = (2..order as u32)
            .map(|g| g as Elem)
            .find(|&g| multiplicative_order(spec, g) == group)
            .expect("irreducible modulus yields a cyclic multiplicative group");
        let mut exp = vec![0 as Elem; 2 * group];
        let mut log = vec![0u32; order];
        let mut x: Elem = 1;
        for i in 0..group {
            exp[i] = x;
            exp[i + group] = x;
            log[x as usize] = i as u32;
            x = clmul_reduce(spec, x, generator);
        }
        Tables { exp, log }
    }
}

fn multiplicative_order(spec: FieldSpec, g: Elem) -> usize {
    let mut x = g;
    let mut n = 1;
    while x != 1 {
        x = clmul_reduce(spec, x, g);
        n += 1;
        if n > spec.order() {
            return 0;
        }
    }
    n
}

fn table_cache() -> &'static Mutex<HashMap<FieldSpec, Arc<Tables>>> {
    static CACHE: OnceLock<Mutex<HashMap<FieldSpec, Arc<Tables>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// A handle to GF(2^w) with precomputed tables. Cheap to clone.
#[derive(Clone)]
pub struct Field {
    spec: FieldSpec,
    tables: Arc<Tables>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^{}; {:#x})", self.spec.width, self.spec.modulus)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl Eq for Field {}

impl Field {
    pub fn new(spec: FieldSpec) -> Field {
        let mut cache = table_cache().lock().expect("table cache poisoned");
        let tables = cache
            .entry(spec)
            .or_insert_with(|| Arc::new(Tables::build(spec)))
            .clone();
        Field { spec, tables }
    }

    pub fn with_width(width: u8) -> Result<Field> {
        Ok(Field::new(FieldSpec::with_default_modulus(width)?))
    }

    pub fn gf256() -> Field {
        Field::new(FieldSpec::GF256)
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn width(&self) -> u8 {
        self.spec.width
    }

    pub fn order(&self) -> usize {
        self.spec.order()
    }

    pub fn contains(&self, a: Elem) -> bool {
        (a as usize) < self.spec.order()
    }

    #[inline]
    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        debug_assert!(self.contains(a) && self.contains(b));
        if a == 0 || b == 0 {
            return 0;
        }
        let t = &self.tables;
        t.exp[(t.log[a as usize] + t.log[b as usize]) as usize]
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(&self, a: Elem) -> Elem {
        assert!(a != 0, "zero has no multiplicative inverse");
        let group = (self.spec.order() - 1) as u32;
        let t = &self.tables;
        t.exp[((group - t.log[a as usize]) % group) as usize]
    }

    pub fn div(&self, a: Elem, b: Elem) -> Elem {
        self.mul(a, self.inv(b))
    }

    pub fn pow(&self, a: Elem, e: u64) -> Elem {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let group = (self.spec.order() - 1) as u64;
        let t = &self.tables;
        let l = (t.log[a as usize] as u64 * (e % group)) % group;
        t.exp[l as usize]
    }

    /// `dst[i] += f * src[i]` over the whole slice.
    #[inline]
    pub fn axpy(&self, dst: &mut [Elem], f: Elem, src: &[Elem]) {
        if f == 0 {
            return;
        }
        let t = &self.tables;
        let lf = t.log[f as usize];
        for (d, &s) in dst.iter_mut().zip(src) {
            if s != 0 {
                *d ^= t.exp[(lf + t.log[s as usize]) as usize];
            }
        }
    }

    /// `v[i] *= f` over the whole slice.
    pub fn scale(&self, v: &mut [Elem], f: Elem) {
        for x in v.iter_mut() {
            *x = self.mul(*x, f);
        }
    }

    /// Inner product of two equally long vectors.
    pub fn dot(&self, a: &[Elem], b: &[Elem]) -> Elem {
        a.iter()
            .zip(b)
            .fold(0, |acc, (&x, &y)| acc ^ self.mul(x, y))
    }
}

/// `a * b` in the field described by `spec`.
pub fn field_mul(spec: FieldSpec, a: Elem, b: Elem) -> Elem {
    Field::new(spec).mul(a, b)
}

/// Multiplicative inverse of a nonzero `a`.
pub fn field_inverse(spec: FieldSpec, a: Elem) -> Elem {
    Field::new(spec).inv(a)
}

/// A dense row-major matrix over a binary extension field.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    field: Field,
    rows: usize,
    cols: usize,
    data: Vec<Elem>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} over {:?}", self.rows, self.cols, self.field)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn zeros(field: &Field, rows: usize, cols: usize) -> Matrix {
        Matrix {
            field: field.clone(),
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: &Field, n: usize) -> Matrix {
        let mut m = Matrix::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_vec(field: &Field, rows: usize, cols: usize, data: Vec<Elem>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(&bad) = data.iter().find(|&&x| !field.contains(x)) {
            return Err(Error::Malformed(format!(
                "element {bad:#x} outside GF(2^{})",
                field.width()
            )));
        }
        Ok(Matrix {
            field: field.clone(),
            rows,
            cols,
            data,
        })
    }

    pub fn from_rows(field: &Field, rows: &[Vec<Elem>]) -> Result<Matrix> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::LengthMismatch {
                expected: cols,
                got: bad.len(),
            });
        }
        Matrix::from_vec(field, rows.len(), cols, rows.concat())
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Elem] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Elem {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Elem) {
        debug_assert!(self.field.contains(v));
        self.data[r * self.cols + c] = v;
    }

    /// Adds `v` to entry `(r, c)`.
    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: Elem) {
        self.data[r * self.cols + c] ^= v;
    }

    pub fn row(&self, r: usize) -> &[Elem] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.field != other.field {
            return Err(Error::FieldMismatch);
        }
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(&self.field, self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for l in 0..self.cols {
                let a = self.data[i * self.cols + l];
                self.field.axpy(dst, a, other.row(l));
            }
        }
        Ok(out)
    }

    /// Row vector times matrix: `v * self`.
    pub fn left_mul(&self, v: &[Elem]) -> Result<Vec<Elem>> {
        if v.len() != self.rows {
            return Err(Error::LengthMismatch {
                expected: self.rows,
                got: v.len(),
            });
        }
        let mut out = vec![0; self.cols];
        for (l, &a) in v.iter().enumerate() {
            self.field.axpy(&mut out, a, self.row(l));
        }
        Ok(out)
    }

    /// Copy of the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(&self.field, self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                out.data[r * cols.len() + j] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn rank(&self) -> usize {
        let mut rows: Vec<Vec<Elem>> = (0..self.rows).map(|r| self.row(r).to_vec()).collect();
        row_reduce_rank(&self.field, &mut rows, self.cols)
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols && self.rank() == self.rows
    }

    /// Gauss-Jordan inverse of a square matrix.
    pub fn inverse(&self) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot invert a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let inv_rows = invert_rows(
            &self.field,
            (0..n).map(|r| self.row(r).to_vec()).collect(),
        )?;
        Matrix::from_vec(&self.field, n, n, inv_rows.concat())
    }
}

/// Rank of the given rows, destroying them in the process.
pub(crate) fn row_reduce_rank(field: &Field, rows: &mut [Vec<Elem>], cols: usize) -> usize {
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][c] != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = field.inv(rows[rank][c]);
        field.scale(&mut rows[rank][c..], inv);
        let (head, tail) = rows.split_at_mut(rank + 1);
        let pivot = &head[rank];
        for row in tail.iter_mut() {
            let f = row[c];
            if f != 0 {
                field.axpy(&mut row[c..], f, &pivot[c..]);
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Inverts a square matrix given as rows. Exploits sparsity: only the
/// nonzero entries of each pivot row are propagated.
pub(crate) fn invert_rows(field: &Field, mut a: Vec<Vec<Elem>>) -> Result<Vec<Vec<Elem>>> {
    let n = a.len();
    let mut b: Vec<Vec<Elem>> = (0..n)
        .map(|i| {
            let mut row = vec![0; n];
            row[i] = 1;
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| a[r][c] != 0).ok_or(Error::Singular)?;
        a.swap(c, p);
        b.swap(c, p);
        let inv = field.inv(a[c][c]);
        field.scale(&mut a[c], inv);
        field.scale(&mut b[c], inv);
        let pa: Vec<(usize, Elem)> = nonzeros(&a[c]);
        let pb: Vec<(usize, Elem)> = nonzeros(&b[c]);
        for r in 0..n {
            if r == c {
                continue;
            }
            let f = a[r][c];
            if f == 0 {
                continue;
            }
            for &(j, v) in &pa {
                a[r][j] ^= field.mul(f, v);
            }
            for &(j, v) in &pb {
                b[r][j] ^= field.mul(f, v);
            }
        }
    }
    Ok(b)
}

fn nonzeros(row: &[Elem]) -> Vec<(usize, Elem)> {
    row.iter()
        .enumerate()
        .filter(|(_, &v)| v != 0)
        .map(|(j, &v)| (j, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(field: &Field, rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(0..field.order()) as Elem)
            .collect();
        Matrix::from_vec(field, rows, cols, data).unwrap()
    }

    #[test]
    fn default_moduli_are_valid() {
        for spec in [FieldSpec::GF16, FieldSpec::GF256, FieldSpec::GF65536] {
            assert_eq!(FieldSpec::new(spec.width(), spec.modulus()).unwrap(), spec);
        }
    }

    #[test]
    fn rejects_reducible_or_misdegreed_moduli() {
        // x^8 + 1 = (x + 1)^8
        assert!(FieldSpec::new(8, 0x101).is_err());
        assert!(FieldSpec::new(8, 0x13).is_err());
        assert!(matches!(
            FieldSpec::new(7, 0x83),
            Err(Error::UnsupportedWidth(7))
        ));
        // AES polynomial is irreducible (but not primitive); still accepted.
        assert!(FieldSpec::new(8, 0x11B).is_ok());
    }

    #[test]
    fn mul_examples() {
        let f = Field::gf256();
        for x in [0u16, 1, 7, 0x80, 0xFF] {
            assert_eq!(f.mul(0, x), 0);
            assert_eq!(f.mul(1, x), x);
        }
        // 2 * x^7 = x^8 = x^4 + x^3 + x^2 + 1 mod 0x11D
        assert_eq!(f.mul(2, 0x80), 0x1D);
        assert_eq!(field_mul(FieldSpec::GF256, 2, 0x80), 0x1D);
    }

    #[test]
    fn tables_agree_with_carryless_reference_exhaustively() {
        for spec in [FieldSpec::GF16, FieldSpec::GF256, FieldSpec::new(8, 0x11B).unwrap()] {
            let f = Field::new(spec);
            for a in 0..spec.order() as Elem {
                for b in 0..spec.order() as Elem {
                    assert_eq!(f.mul(a, b), clmul_reduce(spec, a, b), "{spec:?} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn gf65536_tables_agree_with_reference_on_samples() {
        let spec = FieldSpec::GF65536;
        let f = Field::new(spec);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20_000 {
            let (a, b) = (rng.gen::<u16>(), rng.gen::<u16>());
            assert_eq!(f.mul(a, b), clmul_reduce(spec, a, b));
        }
    }

    #[test]
    fn every_nonzero_element_has_an_inverse() {
        for spec in [FieldSpec::GF16, FieldSpec::GF256] {
            let f = Field::new(spec);
            for a in 1..spec.order() as Elem {
                assert_eq!(f.mul(a, f.inv(a)), 1);
                assert_eq!(f.mul(a, field_inverse(spec, a)), 1);
            }
        }
        let f = Field::new(FieldSpec::GF65536);
        for a in (1..=u16::MAX).step_by(97) {
            assert_eq!(f.mul(a, f.inv(a)), 1);
        }
    }

    #[test]
    fn pow_matches_repeated_multiplication() {
        let f = Field::gf256();
        let mut acc = 1;
        for e in 0..600u64 {
            assert_eq!(f.pow(3, e), acc);
            acc = f.mul(acc, 3);
        }
        assert_eq!(f.pow(0, 0), 1);
        assert_eq!(f.pow(0, 5), 0);
    }

    #[test]
    fn mat_mul_examples() {
        let f = Field::gf256();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_matrix(&f, &mut rng, 3, 5);
        assert_eq!(Matrix::identity(&f, 3).mul(&g).unwrap(), g);
        let zero_row = Matrix::zeros(&f, 1, 3);
        assert_eq!(zero_row.mul(&g).unwrap(), Matrix::zeros(&f, 1, 5));
        let ones = Matrix::from_rows(&f, &[vec![1, 1]]).unwrap();
        let col = Matrix::from_rows(&f, &[vec![0x53], vec![0xCA]]).unwrap();
        assert_eq!(ones.mul(&col).unwrap().data(), &[0x53 ^ 0xCA]);
    }

    #[test]
    fn mat_mul_rejects_mismatches() {
        let f = Field::gf256();
        let a = Matrix::zeros(&f, 2, 3);
        assert!(matches!(a.mul(&a), Err(Error::DimensionMismatch(_))));
        let other = Matrix::zeros(&Field::new(FieldSpec::GF16), 3, 2);
        assert!(matches!(a.mul(&other), Err(Error::FieldMismatch)));
    }

    #[test]
    fn invert_examples() {
        let f = Field::gf256();
        let id = Matrix::identity(&f, 4);
        assert_eq!(id.inverse().unwrap(), id);
        let c = Matrix::from_rows(&f, &[vec![0x37]]).unwrap();
        assert_eq!(c.inverse().unwrap().data(), &[f.inv(0x37)]);
        let singular = Matrix::from_rows(&f, &[vec![1, 2], vec![2, 4]]).unwrap();
        assert!(matches!(singular.inverse(), Err(Error::Singular)));
        assert!(matches!(
            Matrix::zeros(&f, 2, 3).inverse(),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn random_full_rank_inverse_self_check() {
        let f = Field::gf256();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 20 {
            let m = random_matrix(&f, &mut rng, 4, 4);
            if !m.is_invertible() {
                continue;
            }
            let inv = m.inverse().unwrap();
            assert_eq!(m.mul(&inv).unwrap(), Matrix::identity(&f, 4));
            assert_eq!(inv.mul(&m).unwrap(), Matrix::identity(&f, 4));
            checked += 1;
        }
    }

    proptest! {
        #[test]
        fn field_axioms(a in 0u16..256, b in 0u16..256, c in 0u16..256) {
            let f = Field::gf256();
            prop_assert_eq!(f.mul(a, b), f.mul(b, a));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
            prop_assert_eq!(f.mul(a, b ^ c), f.mul(a, b) ^ f.mul(a, c));
        }

        #[test]
        fn mat_mul_is_associative(seed in any::<u64>(), n in 1usize..5, m in 1usize..5, p in 1usize..5, q in 1usize..5) {
            let f = Field::gf256();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&f, &mut rng, n, m);
            let b = random_matrix(&f, &mut rng, m, p);
            let c = random_matrix(&f, &mut rng, p, q);
            prop_assert_eq!(a.mul(&b).unwrap().mul(&c).unwrap(), a.mul(&b.mul(&c).unwrap()).unwrap());
        }

        #[test]
        fn inverse_is_two_sided(seed in any::<u64>(), n in 1usize..7) {
            let f = Field::new(FieldSpec::GF65536);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&f, &mut rng, n, n);
            prop_assume!(a.is_invertible());
            let inv = a.inverse().unwrap();
            prop_assert_eq!(a.mul(&inv).unwrap(), Matrix::identity(&f, n));
            prop_assert_eq!(inv.mul(&a).unwrap(), Matrix::identity(&f, n));
        }
    }
}
