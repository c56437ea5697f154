//! Access-optimal scalar convertible codes for merging stripes.
//!
//! The initial code is `[kI + r, kI]` with parity encoding vectors `p_i`. The
//! final code is `[ςkI + r, ςkI]` whose parity `i` restricted to stripe `s`
//! is `c[i][s]·p_i`, so the new parity `i` is a combination of the old
//! parities `i` alone and conversion never touches systematic symbols.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{Elem, Field, Matrix};
use crate::linear_code::{CodeDoc, Codeword, VectorCode};

/// Parameters of a merge conversion: `ς` stripes of `[kI+rI, kI]` merge into
/// one stripe of `[ςkI+rF, ςkI]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MergeParams {
    pub k_initial: usize,
    pub r_initial: usize,
    pub r_final: usize,
    pub sigma: usize,
}

impl MergeParams {
    pub fn new(k_initial: usize, r_initial: usize, r_final: usize, sigma: usize) -> Result<Self> {
        let p = MergeParams {
            k_initial,
            r_initial,
            r_final,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma < 2 {
            return Err(Error::InvalidParams(format!(
                "sigma must be at least 2, got {}",
                self.sigma
            )));
        }
        if self.k_initial == 0 || self.r_initial == 0 || self.r_final == 0 {
            return Err(Error::InvalidParams(
                "k_initial, r_initial and r_final must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn n_initial(&self) -> usize {
        self.k_initial + self.r_initial
    }

    pub fn k_final(&self) -> usize {
        self.sigma * self.k_initial
    }

    pub fn n_final(&self) -> usize {
        self.k_final() + self.r_final
    }

    /// Total data symbols involved in one conversion, `ςkI`.
    pub fn message_symbols(&self) -> usize {
        self.k_final()
    }
}

/// Minimum read (`d1`) and write (`d2`) access, in whole symbols, of any
/// linear MDS conversion with these parameters.
pub fn access_lower_bound(params: &MergeParams) -> (usize, usize) {
    let (ki, kf) = (params.k_initial, params.k_final());
    let (ri, rf) = (params.r_initial, params.r_final);
    // A merge reads ς initial stripes and writes one final stripe.
    let (lambda_i, lambda_f) = (params.sigma, 1);
    let m = params.message_symbols();
    let d1 = if ri >= rf && rf < ki.min(kf) {
        lambda_i * rf + (lambda_i % lambda_f) * (ki - (kf % ki).max(rf))
    } else {
        m
    };
    (d1, lambda_f * rf)
}

/// Read and write access of one conversion, in whole symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCounts {
    pub reads: usize,
    pub writes: usize,
}

/// How many random attempts were made at each field width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidthAttempts {
    pub width: u8,
    pub attempts: usize,
    pub succeeded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionStats {
    pub seed: u64,
    pub widths: Vec<WidthAttempts>,
}

impl ConstructionStats {
    pub fn total_attempts(&self) -> usize {
        self.widths.iter().map(|w| w.attempts).sum()
    }
}

/// Random-search settings for [`construct_access_optimal_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// Field width tried first; wider fields from {4, 8, 16} are tried after.
    pub start_width: u8,
    pub attempts_per_width: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            start_width: 8,
            attempts_per_width: 64,
        }
    }
}

/// An access-optimal pair of scalar codes for merging `ς` stripes with `r`
/// parities on both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessOptimalPair {
    k_initial: usize,
    sigma: usize,
    r: usize,
    initial: VectorCode,
    final_code: VectorCode,
    parity_vectors: Vec<Vec<Elem>>,
    combine: Vec<Vec<Elem>>,
    stats: ConstructionStats,
}

/// Builds a pair with the default search options (GF(2^8) first, then GF(2^16)).
pub fn construct_access_optimal(
    k_initial: usize,
    sigma: usize,
    r: usize,
    seed: u64,
) -> Result<AccessOptimalPair> {
    construct_access_optimal_with(k_initial, sigma, r, seed, SearchOptions::default())
}

pub fn construct_access_optimal_with(
    k_initial: usize,
    sigma: usize,
    r: usize,
    seed: u64,
    options: SearchOptions,
) -> Result<AccessOptimalPair> {
    if k_initial == 0 || r == 0 || sigma < 2 {
        return Err(Error::InvalidParams(format!(
            "need k_initial >= 1, r >= 1, sigma >= 2; got k_initial={k_initial} r={r} sigma={sigma}"
        )));
    }
    if !matches!(options.start_width, 4 | 8 | 16) {
        return Err(Error::UnsupportedWidth(options.start_width));
    }
    let widths: Vec<u8> = [4u8, 8, 16]
        .into_iter()
        .filter(|&w| w >= options.start_width)
        .collect();
    let mut stats = ConstructionStats {
        seed,
        widths: Vec::new(),
    };
    for &width in &widths {
        let field = Field::with_width(width)?;
        for attempt in 0..options.attempts_per_width {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((width as u64) << 32) | attempt as u64);
            let parity_vectors: Vec<Vec<Elem>> = (0..r)
                .map(|_| (0..k_initial).map(|_| nonzero(&field, &mut rng)).collect())
                .collect();
            let combine: Vec<Vec<Elem>> = (0..r)
                .map(|_| (0..sigma).map(|_| nonzero(&field, &mut rng)).collect())
                .collect();
            let candidate = AccessOptimalPair::from_coefficients(
                &field,
                k_initial,
                sigma,
                parity_vectors,
                combine,
                stats.clone(),
            )?;
            if candidate.satisfies_nesting() {
                stats.widths.push(WidthAttempts {
                    width,
                    attempts: attempt + 1,
                    succeeded: true,
                });
                return Ok(AccessOptimalPair { stats, ..candidate });
            }
        }
        stats.widths.push(WidthAttempts {
            width,
            attempts: options.attempts_per_width,
            succeeded: false,
        });
    }
    Err(Error::ConstructionFailed {
        attempts: stats.total_attempts(),
        width: *widths.last().expect("at least one width"),
    })
}

fn nonzero(field: &Field, rng: &mut ChaCha8Rng) -> Elem {
    rng.gen_range(1..field.order()) as Elem
}

impl AccessOptimalPair {
    /// Assembles a pair from explicit coefficients without checking MDS.
    pub fn from_coefficients(
        field: &Field,
        k_initial: usize,
        sigma: usize,
        parity_vectors: Vec<Vec<Elem>>,
        combine: Vec<Vec<Elem>>,
        stats: ConstructionStats,
    ) -> Result<AccessOptimalPair> {
        let r = parity_vectors.len();
        if r == 0 || combine.len() != r {
            return Err(Error::InvalidParams(
                "need one combine row per parity vector".into(),
            ));
        }
        if parity_vectors.iter().any(|p| p.len() != k_initial)
            || combine.iter().any(|c| c.len() != sigma)
        {
            return Err(Error::DimensionMismatch(
                "parity vectors must have k_initial entries, combine rows sigma entries".into(),
            ));
        }
        let mut pair = AccessOptimalPair {
            k_initial,
            sigma,
            r,
            initial: VectorCode::new(Matrix::identity(field, 1), 1, 1, 1)?,
            final_code: VectorCode::new(Matrix::identity(field, 1), 1, 1, 1)?,
            parity_vectors,
            combine,
            stats,
        };
        pair.initial = pair.punctured_initial(r)?;
        pair.final_code = pair.truncated_final(sigma, r)?;
        Ok(pair)
    }

    pub fn k_initial(&self) -> usize {
        self.k_initial
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn field(&self) -> &Field {
        self.initial.field()
    }

    pub fn initial(&self) -> &VectorCode {
        &self.initial
    }

    pub fn final_code(&self) -> &VectorCode {
        &self.final_code
    }

    /// Parity encoding vectors `p_i` of the initial code, each of length `kI`.
    pub fn parity_vectors(&self) -> &[Vec<Elem>] {
        &self.parity_vectors
    }

    /// `combine[i][s]` scales stripe `s`'s parity `i` into final parity `i`.
    pub fn combine(&self) -> &[Vec<Elem>] {
        &self.combine
    }

    pub fn stats(&self) -> &ConstructionStats {
        &self.stats
    }

    /// The initial code keeping only the first `r'` parities.
    pub fn punctured_initial(&self, r_prime: usize) -> Result<VectorCode> {
        self.check_r(r_prime)?;
        let ki = self.k_initial;
        let mut parity = Matrix::zeros(self.field(), ki, r_prime);
        for i in 0..r_prime {
            for row in 0..ki {
                parity.set(row, i, self.parity_vectors[i][row]);
            }
        }
        VectorCode::systematic_from_parity(&parity, ki + r_prime, ki, 1)
    }

    /// The final code for merging only the first `ς'` stripes, with the first
    /// `r'` parities. Equivalent to treating the remaining stripes as zero.
    pub fn truncated_final(&self, sigma_prime: usize, r_prime: usize) -> Result<VectorCode> {
        self.check_r(r_prime)?;
        if sigma_prime == 0 || sigma_prime > self.sigma {
            return Err(Error::UnsupportedTarget(format!(
                "sigma' = {sigma_prime} outside 1..={}",
                self.sigma
            )));
        }
        let field = self.field().clone();
        let ki = self.k_initial;
        let mut parity = Matrix::zeros(&field, sigma_prime * ki, r_prime);
        for i in 0..r_prime {
            for s in 0..sigma_prime {
                for row in 0..ki {
                    let v = field.mul(self.combine[i][s], self.parity_vectors[i][row]);
                    parity.set(s * ki + row, i, v);
                }
            }
        }
        VectorCode::systematic_from_parity(&parity, sigma_prime * ki + r_prime, sigma_prime * ki, 1)
    }

    fn check_r(&self, r_prime: usize) -> Result<()> {
        if r_prime == 0 || r_prime > self.r {
            return Err(Error::UnsupportedTarget(format!(
                "r' = {r_prime} outside 1..={}",
                self.r
            )));
        }
        Ok(())
    }

    /// Every truncation to `ς' ≤ ς` stripes and puncturing to `r' ≤ r`
    /// parities is MDS on both sides.
    pub fn satisfies_nesting(&self) -> bool {
        for r_prime in (1..=self.r).rev() {
            match self.punctured_initial(r_prime) {
                Ok(code) if code.is_mds() => {}
                _ => return false,
            }
            for sigma_prime in (1..=self.sigma).rev() {
                match self.truncated_final(sigma_prime, r_prime) {
                    Ok(code) if code.is_mds() => {}
                    _ => return false,
                }
            }
        }
        true
    }

    /// Final parity `i` from the parities `i` of each stripe:
    /// `Σ_s c[i][s]·parities[s]`. Works elementwise on equally long slices so
    /// the same combination applies to many instances or payload units at once.
    pub fn combine_parity(&self, i: usize, parities: &[&[Elem]]) -> Vec<Elem> {
        let len = parities.first().map_or(0, |p| p.len());
        let mut out = vec![0; len];
        for (s, p) in parities.iter().enumerate() {
            self.field().axpy(&mut out, self.combine[i][s], p);
        }
        out
    }

    pub fn to_doc(&self) -> PairDoc {
        PairDoc {
            k_initial: self.k_initial,
            sigma: self.sigma,
            r: self.r,
            initial: self.initial.to_doc(),
            final_code: self.final_code.to_doc(),
            combine: self.combine.clone(),
            stats: self.stats.clone(),
        }
    }

    /// Rebuilds a pair from its document, reading parity vectors from the
    /// embedded initial generator.
    pub fn from_doc(doc: &PairDoc) -> Result<AccessOptimalPair> {
        let initial = VectorCode::from_doc(&doc.initial)?;
        if initial.n() != doc.k_initial + doc.r || initial.k() != doc.k_initial || initial.alpha() != 1
        {
            return Err(Error::Malformed("initial code shape does not match pair".into()));
        }
        let gen = initial.generator();
        let parity_vectors = (0..doc.r)
            .map(|i| (0..doc.k_initial).map(|row| gen.get(row, doc.k_initial + i)).collect())
            .collect();
        let pair = AccessOptimalPair::from_coefficients(
            initial.field(),
            doc.k_initial,
            doc.sigma,
            parity_vectors,
            doc.combine.clone(),
            doc.stats.clone(),
        )?;
        if pair.initial != initial || pair.final_code != VectorCode::from_doc(&doc.final_code)? {
            return Err(Error::Malformed(
                "embedded codes disagree with the combine coefficients".into(),
            ));
        }
        Ok(pair)
    }
}

/// Serialized [`AccessOptimalPair`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDoc {
    pub k_initial: usize,
    pub sigma: usize,
    pub r: usize,
    pub initial: CodeDoc,
    pub final_code: CodeDoc,
    pub combine: Vec<Vec<Elem>>,
    pub stats: ConstructionStats,
}

/// Merges `ς` initial codewords into one final codeword, reading only the `r`
/// parity symbols of each stripe.
pub fn convert_access_optimal(
    pair: &AccessOptimalPair,
    stripes: &[Codeword],
) -> Result<(Codeword, AccessCounts)> {
    if stripes.len() != pair.sigma {
        return Err(Error::LengthMismatch {
            expected: pair.sigma,
            got: stripes.len(),
        });
    }
    for (s, stripe) in stripes.iter().enumerate() {
        if !pair.initial.contains(stripe)? {
            return Err(Error::InvalidStripe(s));
        }
    }
    let ki = pair.k_initial;
    let mut symbols: Vec<Vec<Elem>> = stripes
        .iter()
        .flat_map(|st| st.symbols[..ki].iter().cloned())
        .collect();
    for i in 0..pair.r {
        let parities: Vec<&[Elem]> = stripes.iter().map(|st| st.symbols[ki + i].as_slice()).collect();
        symbols.push(pair.combine_parity(i, &parities));
    }
    let counts = AccessCounts {
        reads: pair.sigma * pair.r,
        writes: pair.r,
    };
    Ok((Codeword { alpha: 1, symbols }, counts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_messages(field: &Field, seed: u64, count: usize, len: usize) -> Vec<Vec<Elem>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (0..len).map(|_| rng.gen_range(0..field.order()) as Elem).collect())
            .collect()
    }

    #[test]
    fn constructs_4_2_2_pair() {
        let pair = construct_access_optimal(4, 2, 2, 7).unwrap();
        assert_eq!((pair.initial().n(), pair.initial().k()), (6, 4));
        assert_eq!((pair.final_code().n(), pair.final_code().k()), (10, 8));
        assert!(pair.initial().is_mds());
        assert!(pair.final_code().is_mds());
        assert_eq!(pair.field().width(), 8);
    }

    #[test]
    fn replication_like_pair() {
        let pair = construct_access_optimal(1, 2, 1, 0).unwrap();
        assert_eq!(pair.initial().n(), 2);
        assert_eq!(pair.final_code().n(), 3);
        assert!(pair.initial().is_mds() && pair.final_code().is_mds());
        assert_eq!(pair.stats().total_attempts(), 1);
    }

    #[test]
    fn punctured_pair_stays_mds() {
        let pair = construct_access_optimal(4, 2, 2, 7).unwrap();
        assert!(pair.punctured_initial(1).unwrap().is_mds());
        assert!(pair.truncated_final(2, 1).unwrap().is_mds());
        assert!(pair.truncated_final(1, 2).unwrap().is_mds());
        assert!(matches!(pair.punctured_initial(3), Err(Error::UnsupportedTarget(_))));
    }

    #[test]
    fn final_parity_blocks_are_scaled_initial_parities() {
        let pair = construct_access_optimal(3, 3, 2, 11).unwrap();
        let f = pair.field().clone();
        let g = pair.final_code().generator();
        for i in 0..2 {
            for s in 0..3 {
                for row in 0..3 {
                    let want = f.mul(pair.combine()[i][s], pair.parity_vectors()[i][row]);
                    assert_eq!(g.get(s * 3 + row, 9 + i), want);
                }
            }
        }
    }

    #[test]
    fn conversion_matches_direct_encoding() {
        let pair = construct_access_optimal(4, 2, 2, 7).unwrap();
        let f = pair.field().clone();
        for (trial, msgs) in (0..20).map(|t| (t, random_messages(&f, t, 2, 4))) {
            let stripes: Vec<Codeword> = msgs.iter().map(|m| pair.initial().encode(m).unwrap()).collect();
            let (word, counts) = convert_access_optimal(&pair, &stripes).unwrap();
            assert_eq!(word, pair.final_code().encode(&msgs.concat()).unwrap(), "trial {trial}");
            assert_eq!(counts, AccessCounts { reads: 4, writes: 2 });
        }
    }

    #[test]
    fn zero_stripes_give_zero_parities() {
        let pair = construct_access_optimal(4, 2, 2, 7).unwrap();
        let zero = pair.initial().encode(&[0; 4]).unwrap();
        let (word, _) = convert_access_optimal(&pair, &[zero.clone(), zero]).unwrap();
        assert!(word.symbols[8..].iter().all(|s| s == &[0]));
    }

    #[test]
    fn rejects_non_codewords() {
        let pair = construct_access_optimal(4, 2, 2, 7).unwrap();
        let good = pair.initial().encode(&[1, 2, 3, 4]).unwrap();
        let mut bad = good.clone();
        bad.symbols[4][0] ^= 1;
        assert!(matches!(
            convert_access_optimal(&pair, &[good, bad]),
            Err(Error::InvalidStripe(1))
        ));
    }

    #[test]
    fn converted_output_decodes_from_every_subset() {
        use itertools::Itertools;
        let pair = construct_access_optimal(3, 2, 2, 3).unwrap();
        let f = pair.field().clone();
        let msgs = random_messages(&f, 99, 2, 3);
        let stripes: Vec<Codeword> = msgs.iter().map(|m| pair.initial().encode(m).unwrap()).collect();
        let (word, _) = convert_access_optimal(&pair, &stripes).unwrap();
        for picks in (0..8).combinations(6) {
            let chunks: Vec<Vec<Elem>> = picks.iter().map(|&i| word.symbols[i].clone()).collect();
            assert_eq!(pair.final_code().decode_from(&picks, &chunks).unwrap(), msgs.concat());
        }
    }

    #[test]
    fn small_field_escalates() {
        // No [20, 18] MDS code exists over GF(16), so the search has to move on.
        let pair = construct_access_optimal_with(
            9,
            2,
            2,
            1,
            SearchOptions {
                start_width: 4,
                attempts_per_width: 2,
            },
        )
        .unwrap();
        assert!(pair.satisfies_nesting());
        let stats = pair.stats();
        assert_eq!(stats.widths[0].width, 4);
        assert!(!stats.widths[0].succeeded);
        assert!(stats.widths.last().unwrap().succeeded);
        assert!(pair.field().width() > 4);
    }

    #[test]
    fn doc_round_trip() {
        let pair = construct_access_optimal(3, 2, 2, 5).unwrap();
        let json = serde_json::to_string(&pair.to_doc()).unwrap();
        let back = AccessOptimalPair::from_doc(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, pair);
    }

    #[test]
    fn access_bound_examples() {
        let p = |k, ri, rf, s| MergeParams::new(k, ri, rf, s).unwrap();
        assert_eq!(access_lower_bound(&p(4, 2, 2, 2)), (4, 2));
        assert_eq!(access_lower_bound(&p(4, 1, 2, 2)), (8, 2));
        assert_eq!(access_lower_bound(&p(2, 3, 3, 2)), (4, 3));
        assert!(MergeParams::new(4, 1, 2, 1).is_err());
    }
}
