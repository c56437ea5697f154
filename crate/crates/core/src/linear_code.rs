//! Linear vector codes: encoding, erasure decoding, MDS verification and
//! puncturing.
//!
//! An `[n, k, α]` code maps a message of `kα` field elements to `n` symbols of
//! `α` subsymbols each via `m ↦ mG`. Symbol `i` occupies generator columns
//! `α·i .. α·(i+1)`; within a symbol, coordinate `x` is instance `x`.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{invert_rows, row_reduce_rank, Elem, Field, FieldSpec, Matrix};

/// A codeword: `n` symbols of `alpha` subsymbols each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    pub alpha: usize,
    pub symbols: Vec<Vec<Elem>>,
}

impl Codeword {
    pub fn from_flat(flat: &[Elem], alpha: usize) -> Codeword {
        Codeword {
            alpha,
            symbols: flat.chunks(alpha).map(<[Elem]>::to_vec).collect(),
        }
    }

    pub fn flat(&self) -> Vec<Elem> {
        self.symbols.concat()
    }

    pub fn n(&self) -> usize {
        self.symbols.len()
    }
}

/// An `[n, k, α]` linear vector code given by its `kα × nα` generator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorCode {
    n: usize,
    k: usize,
    alpha: usize,
    gen: Matrix,
    systematic: bool,
}

/// Outcome of an exhaustive MDS check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdsReport {
    pub subsets_checked: usize,
    /// The first `k`-subset whose submatrix is singular, if any.
    pub failing_subset: Option<Vec<usize>>,
}

impl MdsReport {
    pub fn is_mds(&self) -> bool {
        self.failing_subset.is_none()
    }
}

impl VectorCode {
    pub fn new(gen: Matrix, n: usize, k: usize, alpha: usize) -> Result<VectorCode> {
        if alpha == 0 || k == 0 || k > n {
            return Err(Error::InvalidParams(format!(
                "need 1 <= k <= n and alpha >= 1, got n={n} k={k} alpha={alpha}"
            )));
        }
        if gen.rows() != k * alpha || gen.cols() != n * alpha {
            return Err(Error::DimensionMismatch(format!(
                "generator is {}x{}, expected {}x{}",
                gen.rows(),
                gen.cols(),
                k * alpha,
                n * alpha
            )));
        }
        if gen.rank() != k * alpha {
            return Err(Error::Malformed("generator does not have full row rank".into()));
        }
        let systematic = has_identity_prefix(&gen);
        Ok(VectorCode {
            n,
            k,
            alpha,
            gen,
            systematic,
        })
    }

    /// Systematic code `[I | parity]` where `parity` is `kα × (n−k)α`.
    pub fn systematic_from_parity(
        parity: &Matrix,
        n: usize,
        k: usize,
        alpha: usize,
    ) -> Result<VectorCode> {
        let field = parity.field();
        let (rows, pcols) = (k * alpha, (n - k.min(n)) * alpha);
        if parity.rows() != rows || parity.cols() != pcols {
            return Err(Error::DimensionMismatch(format!(
                "parity block is {}x{}, expected {rows}x{pcols}",
                parity.rows(),
                parity.cols()
            )));
        }
        let mut gen = Matrix::zeros(field, rows, n * alpha);
        for r in 0..rows {
            gen.set(r, r, 1);
            for c in 0..pcols {
                gen.set(r, rows + c, parity.get(r, c));
            }
        }
        VectorCode::new(gen, n, k, alpha)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn generator(&self) -> &Matrix {
        &self.gen
    }

    pub fn field(&self) -> &Field {
        self.gen.field()
    }

    pub fn is_systematic(&self) -> bool {
        self.systematic
    }

    /// Generator column of coordinate `x` of symbol `i`.
    pub fn column(&self, symbol: usize, coord: usize) -> usize {
        symbol * self.alpha + coord
    }

    /// The encoding vector (generator column) of coordinate `x` of symbol `i`.
    pub fn encoding_vector(&self, symbol: usize, coord: usize) -> Vec<Elem> {
        let c = self.column(symbol, coord);
        (0..self.gen.rows()).map(|r| self.gen.get(r, c)).collect()
    }

    pub fn encode(&self, message: &[Elem]) -> Result<Codeword> {
        Ok(Codeword::from_flat(&self.encode_flat(message)?, self.alpha))
    }

    /// Encodes to a flat `nα` vector, symbol-major.
    pub fn encode_flat(&self, message: &[Elem]) -> Result<Vec<Elem>> {
        if let Some(&bad) = message.iter().find(|&&x| !self.field().contains(x)) {
            return Err(Error::Malformed(format!("message element {bad:#x} outside field")));
        }
        self.gen.left_mul(message)
    }

    /// Whether `word` lies in the row space of the generator.
    pub fn contains(&self, word: &Codeword) -> Result<bool> {
        if word.n() != self.n
            || word.alpha != self.alpha
            || word.symbols.iter().any(|s| s.len() != self.alpha)
        {
            return Ok(false);
        }
        let picks = self.information_set()?;
        let chunks: Vec<&[Elem]> = picks.iter().map(|&i| word.symbols[i].as_slice()).collect();
        let message = self.decoder(&picks)?.decode(&chunks)?;
        Ok(self.encode(&message)? == *word)
    }

    /// Some `k` symbols from which every codeword can be decoded.
    fn information_set(&self) -> Result<Vec<usize>> {
        if self.systematic {
            return Ok((0..self.k).collect());
        }
        (0..self.n)
            .combinations(self.k)
            .find(|picks| self.submatrix_rank(picks) == self.k * self.alpha)
            .ok_or(Error::Singular)
    }

    fn submatrix_rank(&self, picks: &[usize]) -> usize {
        let cols: Vec<usize> = picks
            .iter()
            .flat_map(|&i| i * self.alpha..(i + 1) * self.alpha)
            .collect();
        let mut rows: Vec<Vec<Elem>> = (0..self.gen.rows())
            .map(|r| cols.iter().map(|&c| self.gen.get(r, c)).collect())
            .collect();
        row_reduce_rank(self.field(), &mut rows, cols.len())
    }

    fn check_picks(&self, picks: &[usize]) -> Result<()> {
        if picks.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                got: picks.len(),
            });
        }
        let mut seen = vec![false; self.n];
        for &p in picks {
            if p >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: p,
                    limit: self.n,
                });
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::DuplicateIndex(p));
            }
        }
        Ok(())
    }

    /// Precomputes the linear map recovering the message from the symbols at
    /// `picks`. Reusable across many codewords.
    pub fn decoder(&self, picks: &[usize]) -> Result<Decoder> {
        self.check_picks(picks)?;
        let a = self.alpha;
        let field = self.field().clone();
        if self.systematic {
            let mut known = Vec::new();
            let mut parity_picks = Vec::new();
            for (pos, &p) in picks.iter().enumerate() {
                if p < self.k {
                    known.push((p, pos));
                } else {
                    parity_picks.push((pos, p));
                }
            }
            let mut is_known = vec![false; self.k];
            for &(s, _) in &known {
                is_known[s] = true;
            }
            let missing: Vec<usize> = (0..self.k).filter(|&s| !is_known[s]).collect();
            let cols: Vec<usize> = parity_picks
                .iter()
                .flat_map(|&(_, p)| p * a..(p + 1) * a)
                .collect();
            let cross: Vec<(usize, Vec<Elem>)> = known
                .iter()
                .flat_map(|&(s, _)| s * a..(s + 1) * a)
                .map(|r| (r, cols.iter().map(|&c| self.gen.get(r, c)).collect()))
                .collect();
            let square: Vec<Vec<Elem>> = missing
                .iter()
                .flat_map(|&s| s * a..(s + 1) * a)
                .map(|r| cols.iter().map(|&c| self.gen.get(r, c)).collect())
                .collect();
            let inverse = invert_rows(&field, square)?;
            Ok(Decoder {
                field,
                k: self.k,
                alpha: a,
                kind: DecoderKind::Systematic {
                    known,
                    missing,
                    parity_positions: parity_picks.iter().map(|&(pos, _)| pos).collect(),
                    cross,
                    inverse,
                },
            })
        } else {
            let cols: Vec<usize> = picks.iter().flat_map(|&p| p * a..(p + 1) * a).collect();
            let square: Vec<Vec<Elem>> = (0..self.gen.rows())
                .map(|r| cols.iter().map(|&c| self.gen.get(r, c)).collect())
                .collect();
            // message · G_S = chunks, so message = chunks · G_S^{-1}.
            let inverse = invert_rows(&field, square)?;
            Ok(Decoder {
                field,
                k: self.k,
                alpha: a,
                kind: DecoderKind::General { inverse },
            })
        }
    }

    /// Recovers the message from the `k` symbols at `picks`.
    pub fn decode_from(&self, picks: &[usize], chunks: &[Vec<Elem>]) -> Result<Vec<Elem>> {
        let refs: Vec<&[Elem]> = chunks.iter().map(Vec::as_slice).collect();
        self.decoder(picks)?.decode(&refs)
    }

    /// Exhaustive check that every `k`-subset of symbols determines the message.
    pub fn mds_report(&self) -> MdsReport {
        let mut checked = 0;
        for picks in (0..self.n).combinations(self.k) {
            checked += 1;
            if !self.subset_invertible(&picks) {
                return MdsReport {
                    subsets_checked: checked,
                    failing_subset: Some(picks),
                };
            }
        }
        MdsReport {
            subsets_checked: checked,
            failing_subset: None,
        }
    }

    pub fn is_mds(&self) -> bool {
        self.mds_report().is_mds()
    }

    fn subset_invertible(&self, picks: &[usize]) -> bool {
        if !self.systematic {
            return self.submatrix_rank(picks) == self.k * self.alpha;
        }
        // With G = [I | P], the submatrix for picks is invertible iff P restricted
        // to the rows of unpicked systematic symbols and the columns of picked
        // parity symbols is.
        let a = self.alpha;
        let mut picked = vec![false; self.n];
        for &p in picks {
            picked[p] = true;
        }
        let cols: Vec<usize> = (self.k..self.n)
            .filter(|&p| picked[p])
            .flat_map(|p| p * a..(p + 1) * a)
            .collect();
        if cols.is_empty() {
            return true;
        }
        let mut rows: Vec<Vec<Elem>> = (0..self.k)
            .filter(|&s| !picked[s])
            .flat_map(|s| s * a..(s + 1) * a)
            .map(|r| cols.iter().map(|&c| self.gen.get(r, c)).collect())
            .collect();
        row_reduce_rank(self.field(), &mut rows, cols.len()) == cols.len()
    }

    /// Removes the listed symbols from every codeword.
    pub fn puncture(&self, drop: &[usize]) -> Result<VectorCode> {
        let mut dropped = vec![false; self.n];
        for &d in drop {
            if d >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: d,
                    limit: self.n,
                });
            }
            if std::mem::replace(&mut dropped[d], true) {
                return Err(Error::DuplicateIndex(d));
            }
        }
        if drop.len() > self.n - self.k {
            return Err(Error::TooManyPunctured {
                requested: drop.len(),
                limit: self.n - self.k,
            });
        }
        let a = self.alpha;
        let cols: Vec<usize> = (0..self.n)
            .filter(|&i| !dropped[i])
            .flat_map(|i| i * a..(i + 1) * a)
            .collect();
        VectorCode::new(self.gen.select_columns(&cols), self.n - drop.len(), self.k, a)
    }

    pub fn to_doc(&self) -> CodeDoc {
        let spec = self.field().spec();
        let digits = (spec.width() as usize).div_ceil(4);
        let gen_hex = (0..self.gen.rows())
            .map(|r| {
                self.gen
                    .row(r)
                    .iter()
                    .map(|v| format!("{v:0digits$x}"))
                    .collect::<String>()
            })
            .collect();
        CodeDoc {
            field_width: spec.width(),
            modulus_hex: format!("{:#x}", spec.modulus()),
            n: self.n,
            k: self.k,
            alpha: self.alpha,
            systematic: self.systematic,
            gen_hex,
        }
    }

    pub fn from_doc(doc: &CodeDoc) -> Result<VectorCode> {
        let modulus = u32::from_str_radix(doc.modulus_hex.trim_start_matches("0x"), 16)
            .map_err(|e| Error::Malformed(format!("modulus_hex: {e}")))?;
        let field = Field::new(FieldSpec::new(doc.field_width, modulus)?);
        let digits = (doc.field_width as usize).div_ceil(4);
        let cols = doc.n * doc.alpha;
        let rows = doc
            .gen_hex
            .iter()
            .map(|line| {
                if line.len() != cols * digits || !line.is_ascii() {
                    return Err(Error::Malformed(format!(
                        "generator row has {} hex digits, expected {}",
                        line.len(),
                        cols * digits
                    )));
                }
                (0..cols)
                    .map(|c| {
                        Elem::from_str_radix(&line[c * digits..(c + 1) * digits], 16)
                            .map_err(|e| Error::Malformed(format!("gen_hex: {e}")))
                    })
                    .collect::<Result<Vec<Elem>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.len() != doc.k * doc.alpha {
            return Err(Error::Malformed(format!(
                "generator has {} rows, expected {}",
                rows.len(),
                doc.k * doc.alpha
            )));
        }
        let gen = Matrix::from_vec(&field, rows.len(), cols, rows.concat())?;
        VectorCode::new(gen, doc.n, doc.k, doc.alpha)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<VectorCode> {
        VectorCode::from_doc(&serde_json::from_str(s)?)
    }
}

fn has_identity_prefix(gen: &Matrix) -> bool {
    let rows = gen.rows();
    rows <= gen.cols()
        && (0..rows).all(|r| (0..rows).all(|c| gen.get(r, c) == Elem::from(r == c)))
}

/// Serialized form of a [`VectorCode`]. Each `gen_hex` entry is one generator
/// row with every element written as `w/4` lowercase hex digits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeDoc {
    pub field_width: u8,
    pub modulus_hex: String,
    pub n: usize,
    pub k: usize,
    pub alpha: usize,
    pub systematic: bool,
    pub gen_hex: Vec<String>,
}

/// A precomputed erasure decoder for one choice of `k` surviving symbols.
#[derive(Debug, Clone)]
pub struct Decoder {
    field: Field,
    k: usize,
    alpha: usize,
    kind: DecoderKind,
}

#[derive(Debug, Clone)]
enum DecoderKind {
    Systematic {
        /// (message symbol, position in picks) for systematic picks.
        known: Vec<(usize, usize)>,
        missing: Vec<usize>,
        parity_positions: Vec<usize>,
        /// Generator row restricted to the picked parity columns, per known row.
        cross: Vec<(usize, Vec<Elem>)>,
        inverse: Vec<Vec<Elem>>,
    },
    General {
        inverse: Vec<Vec<Elem>>,
    },
}

impl Decoder {
    /// `chunks[i]` holds the symbol at the `i`-th pick.
    pub fn decode(&self, chunks: &[&[Elem]]) -> Result<Vec<Elem>> {
        let a = self.alpha;
        if chunks.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                got: chunks.len(),
            });
        }
        if let Some(bad) = chunks.iter().find(|c| c.len() != a) {
            return Err(Error::LengthMismatch {
                expected: a,
                got: bad.len(),
            });
        }
        let f = &self.field;
        let mut message = vec![0; self.k * a];
        match &self.kind {
            DecoderKind::Systematic {
                known,
                missing,
                parity_positions,
                cross,
                inverse,
            } => {
                for &(s, pos) in known {
                    message[s * a..(s + 1) * a].copy_from_slice(chunks[pos]);
                }
                if missing.is_empty() {
                    return Ok(message);
                }
                let mut y: Vec<Elem> = parity_positions
                    .iter()
                    .flat_map(|&pos| chunks[pos].iter().copied())
                    .collect();
                for (r, row) in cross {
                    f.axpy(&mut y, message[*r], row);
                }
                let mut solved = vec![0; y.len()];
                for (l, &v) in y.iter().enumerate() {
                    f.axpy(&mut solved, v, &inverse[l]);
                }
                for (i, &s) in missing.iter().enumerate() {
                    message[s * a..(s + 1) * a].copy_from_slice(&solved[i * a..(i + 1) * a]);
                }
            }
            DecoderKind::General { inverse } => {
                for (l, &v) in chunks.iter().flat_map(|c| c.iter()).enumerate() {
                    f.axpy(&mut message, v, &inverse[l]);
                }
            }
        }
        Ok(message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(field: &Field, rng: &mut impl Rng, len: usize) -> Vec<Elem> {
        (0..len).map(|_| rng.gen_range(0..field.order()) as Elem).collect()
    }

    fn random_systematic(field: &Field, seed: u64, n: usize, k: usize, alpha: usize) -> VectorCode {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = k * alpha;
        let cols = (n - k) * alpha;
        let parity = Matrix::from_vec(field, rows, cols, random_vec(field, &mut rng, rows * cols))
            .unwrap();
        VectorCode::systematic_from_parity(&parity, n, k, alpha).unwrap()
    }

    fn random_mds(field: &Field, mut seed: u64, n: usize, k: usize, alpha: usize) -> VectorCode {
        loop {
            let code = random_systematic(field, seed, n, k, alpha);
            if code.is_mds() {
                return code;
            }
            seed += 1000;
        }
    }

    /// Minimum number of nonzero symbols over all nonzero codewords.
    fn brute_force_min_distance(code: &VectorCode) -> usize {
        let q = code.field().order();
        let len = code.k() * code.alpha();
        let mut best = usize::MAX;
        let mut message = vec![0 as Elem; len];
        for idx in 1..q.pow(len as u32) {
            let mut v = idx;
            for m in message.iter_mut() {
                *m = (v % q) as Elem;
                v /= q;
            }
            let word = code.encode(&message).unwrap();
            let weight = word.symbols.iter().filter(|s| s.iter().any(|&x| x != 0)).count();
            best = best.min(weight);
        }
        best
    }

    #[test]
    fn encode_examples() {
        let f = Field::gf256();
        let code = random_mds(&f, 1, 6, 4, 2);
        assert!(code.is_systematic());
        let zero = code.encode(&[0; 8]).unwrap();
        assert!(zero.symbols.iter().all(|s| s == &[0, 0]));
        let message: Vec<Elem> = (1..=8).collect();
        let word = code.encode(&message).unwrap();
        assert_eq!(word.flat()[..8], message[..]);
        assert!(matches!(
            code.encode(&[1, 2, 3]),
            Err(Error::LengthMismatch { expected: 8, got: 3 })
        ));
    }

    #[test]
    fn decode_from_every_subset_of_a_6_3_code() {
        let f = Field::gf256();
        let code = random_mds(&f, 5, 6, 3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let message = random_vec(&f, &mut rng, 3);
        let word = code.encode(&message).unwrap();
        let mut subsets = 0;
        for picks in (0..6).combinations(3) {
            let chunks: Vec<Vec<Elem>> = picks.iter().map(|&i| word.symbols[i].clone()).collect();
            assert_eq!(code.decode_from(&picks, &chunks).unwrap(), message);
            subsets += 1;
        }
        assert_eq!(subsets, 20);
    }

    #[test]
    fn decode_rejects_bad_picks() {
        let f = Field::gf256();
        let code = random_mds(&f, 5, 6, 3, 1);
        assert!(matches!(code.decoder(&[0, 1, 6]), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(code.decoder(&[0, 1, 1]), Err(Error::DuplicateIndex(1))));
        assert!(matches!(code.decoder(&[0, 1]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn non_systematic_decoding_matches() {
        let f = Field::gf256();
        let code = random_mds(&f, 11, 7, 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        // Mix the generator by an invertible matrix to lose systematic form.
        let mixer = loop {
            let m = Matrix::from_vec(&f, 6, 6, random_vec(&f, &mut rng, 36)).unwrap();
            if m.is_invertible() {
                break m;
            }
        };
        let mixed = VectorCode::new(mixer.mul(code.generator()).unwrap(), 7, 3, 2).unwrap();
        assert!(!mixed.is_systematic());
        assert!(mixed.is_mds());
        let message = random_vec(&f, &mut rng, 6);
        let word = mixed.encode(&message).unwrap();
        assert!(mixed.contains(&word).unwrap());
        for picks in (0..7).combinations(3) {
            let chunks: Vec<Vec<Elem>> = picks.iter().map(|&i| word.symbols[i].clone()).collect();
            assert_eq!(mixed.decode_from(&picks, &chunks).unwrap(), message);
        }
    }

    #[test]
    fn is_mds_examples() {
        let f = Field::gf256();
        let identity = VectorCode::new(Matrix::identity(&f, 6), 3, 3, 2).unwrap();
        assert!(identity.is_mds());

        // Two identical parity column blocks.
        let code = random_systematic(&f, 3, 6, 4, 1);
        let mut gen = code.generator().clone();
        for r in 0..4 {
            gen.set(r, 5, gen.get(r, 4));
        }
        let repeated = VectorCode::new(gen, 6, 4, 1).unwrap();
        assert!(!repeated.is_mds());
        assert!(repeated.mds_report().failing_subset.is_some());
    }

    #[test]
    fn puncture_examples() {
        let f = Field::gf256();
        let code = random_mds(&f, 21, 6, 4, 1);
        assert_eq!(code.puncture(&[]).unwrap(), code);
        let shorter = code.puncture(&[5]).unwrap();
        assert_eq!((shorter.n(), shorter.k()), (5, 4));
        assert!(shorter.is_mds());
        assert!(matches!(
            code.puncture(&[3, 4, 5]),
            Err(Error::TooManyPunctured { requested: 3, limit: 2 })
        ));
    }

    #[test]
    fn contains_detects_corruption() {
        let f = Field::gf256();
        let code = random_mds(&f, 31, 6, 4, 2);
        let mut word = code.encode(&[7, 1, 2, 3, 4, 5, 6, 8]).unwrap();
        assert!(code.contains(&word).unwrap());
        word.symbols[5][1] ^= 1;
        assert!(!code.contains(&word).unwrap());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        for width in [4u8, 8, 16] {
            let f = Field::with_width(width).unwrap();
            let code = random_systematic(&f, 41, 5, 3, 2);
            let json = code.to_json().unwrap();
            let back = VectorCode::from_json(&json).unwrap();
            assert_eq!(back, code);
            assert_eq!(back.to_json().unwrap(), json);
        }
        let doc = random_systematic(&Field::gf256(), 1, 3, 2, 1).to_doc();
        assert_eq!(doc.modulus_hex, "0x11d");
        assert_eq!(doc.gen_hex[0].len(), 6);
    }

    #[test]
    fn is_mds_agrees_with_minimum_distance() {
        let f = Field::new(FieldSpec::GF16);
        let mut seen = (0, 0);
        for seed in 0..30u64 {
            let (n, k, alpha) = match seed % 3 {
                0 => (5, 2, 1),
                1 => (4, 2, 2),
                _ => (6, 3, 1),
            };
            let code = random_systematic(&f, seed, n, k, alpha);
            let mds = code.is_mds();
            assert_eq!(mds, brute_force_min_distance(&code) == n - k + 1, "seed {seed}");
            if mds {
                seen.0 += 1;
            } else {
                seen.1 += 1;
            }
        }
        assert!(seen.0 > 0 && seen.1 > 0, "both outcomes exercised: {seen:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn decode_inverts_encode(seed in any::<u64>(), n in 3usize..9, kf in 0.2f64..0.9, alpha in 1usize..3) {
            let k = ((n as f64 * kf) as usize).clamp(1, n - 1);
            let f = Field::gf256();
            let code = random_mds(&f, seed, n, k, alpha);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
            let message = random_vec(&f, &mut rng, k * alpha);
            let word = code.encode(&message).unwrap();
            for picks in (0..n).combinations(k) {
                let chunks: Vec<Vec<Elem>> = picks.iter().map(|&i| word.symbols[i].clone()).collect();
                prop_assert_eq!(code.decode_from(&picks, &chunks).unwrap(), message.clone());
            }
        }

        #[test]
        fn puncturing_keeps_mds(seed in any::<u64>(), drop_count in 0usize..3) {
            let f = Field::gf256();
            let code = random_mds(&f, seed, 7, 4, 1);
            let drop: Vec<usize> = (7 - drop_count..7).collect();
            prop_assert!(code.puncture(&drop).unwrap().is_mds());
        }
    }
}
