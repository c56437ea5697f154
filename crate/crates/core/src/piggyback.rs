//! Bandwidth-optimal merge conversion through piggybacking.
//!
//! A [`PiggybackCode`] stores `α` instances of an access-optimal base code per
//! stripe. Coordinate `x` of every node belongs to instance `x`. Parity
//! nodes additionally carry piggybacks: functions of lower instances that
//! let a conversion recover the parities it needs without reading whole data
//! nodes.
//!
//! Instances are indexed in mixed radix over `layers` (ascending target
//! parity counts greater than `rI`, innermost layer least significant), so
//! `α = ∏ layers`. With digit `d_ℓ(x)` of layer `ℓ`, parity `t < rI` stores
//!
//! ```text
//! M(x)·p_t + Σ_{ℓ : d_ℓ(x) ≥ rI} M(x with d_ℓ = t)·p_{d_ℓ(x)}
//! ```
//!
//! where `M(x)` is the stripe's data in instance `x` and `p_j` are the base
//! parity vectors. Every piggyback source has a smaller index than its
//! target, so instances decode one after another.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::base_convertible::{
    construct_access_optimal_with, AccessOptimalPair, MergeParams, SearchOptions,
};
use crate::error::{Error, Result};
use crate::galois::{Elem, Matrix};
use crate::linear_code::{Codeword, MdsReport, VectorCode};
use crate::trace::{ConversionTrace, NodeId, NodeRecord, Role};

/// How a merge with given parameters is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `rF ≥ kI`: read all data and encode new parities from scratch.
    Reencode,
    /// `rF ≤ rI`: combine the first `rF` parities of each stripe.
    ParityOnly,
    /// `rI < rF < kI`: piggybacked vector code.
    Piggyback,
}

impl Regime {
    pub fn classify(k_initial: usize, r_initial: usize, r_final: usize) -> Regime {
        if r_final >= k_initial {
            Regime::Reencode
        } else if r_final <= r_initial {
            Regime::ParityOnly
        } else {
            Regime::Piggyback
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Reencode => "reencode",
            Regime::ParityOnly => "parity-only",
            Regime::Piggyback => "piggyback",
        })
    }
}

/// One piggyback: parity `parity` at coordinate `coord` also carries
/// `M(source_coord)·p_vector`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiggybackTerm {
    pub parity: usize,
    pub coord: usize,
    pub source_coord: usize,
    pub vector: usize,
    pub layer: usize,
}

/// The general piggybacked code over an access-optimal base pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiggybackCode {
    k_initial: usize,
    r_initial: usize,
    layers: Vec<usize>,
    alpha: usize,
    base: AccessOptimalPair,
    initial: VectorCode,
    piggybacks: Vec<PiggybackTerm>,
}

impl PiggybackCode {
    /// Builds the piggybacked initial code. `layers` must be strictly
    /// increasing, each above `r_initial` and within the base pair's `r`.
    pub fn new(r_initial: usize, layers: Vec<usize>, base: AccessOptimalPair) -> Result<Self> {
        let k_initial = base.k_initial();
        if r_initial == 0 || r_initial > base.r() {
            return Err(Error::InvalidParams(format!(
                "r_initial = {r_initial} must be in 1..={}",
                base.r()
            )));
        }
        if layers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParams("layers must be strictly increasing".into()));
        }
        if let Some(&bad) = layers.iter().find(|&&r| r <= r_initial || r > base.r()) {
            return Err(Error::InvalidParams(format!(
                "layer {bad} must lie in {}..={}",
                r_initial + 1,
                base.r()
            )));
        }
        let alpha = layers.iter().product();
        let mut code = PiggybackCode {
            k_initial,
            r_initial,
            layers,
            alpha,
            initial: base.initial().clone(),
            base,
            piggybacks: Vec::new(),
        };
        code.piggybacks = code.enumerate_piggybacks();
        code.initial = code.build_initial()?;
        Ok(code)
    }

    fn enumerate_piggybacks(&self) -> Vec<PiggybackTerm> {
        let mut terms = Vec::new();
        for parity in 0..self.r_initial {
            for coord in 0..self.alpha {
                terms.extend(self.terms_on(parity, coord));
            }
        }
        terms
    }

    /// Piggybacks stored on parity `parity` at coordinate `coord`.
    fn terms_on(&self, parity: usize, coord: usize) -> impl Iterator<Item = PiggybackTerm> + '_ {
        (0..self.layers.len()).filter_map(move |layer| {
            let d = self.digit(coord, layer);
            (d >= self.r_initial).then(|| PiggybackTerm {
                parity,
                coord,
                source_coord: self.with_digit(coord, layer, parity),
                vector: d,
                layer,
            })
        })
    }

    fn build_initial(&self) -> Result<VectorCode> {
        let (k, a) = (self.k_initial, self.alpha);
        let p = self.base.parity_vectors();
        let field = self.base.field();
        let mut parity = Matrix::zeros(field, k * a, self.r_initial * a);
        for t in 0..self.r_initial {
            for x in 0..a {
                for i in 0..k {
                    parity.add_at(i * a + x, t * a + x, p[t][i]);
                }
            }
        }
        for term in &self.piggybacks {
            for i in 0..k {
                parity.add_at(
                    i * a + term.source_coord,
                    term.parity * a + term.coord,
                    p[term.vector][i],
                );
            }
        }
        VectorCode::systematic_from_parity(&parity, k + self.r_initial, k, a)
    }

    fn radix_weight(&self, layer: usize) -> usize {
        self.layers[..layer].iter().product()
    }

    /// Digit of coordinate `x` for `layer`.
    pub fn digit(&self, x: usize, layer: usize) -> usize {
        (x / self.radix_weight(layer)) % self.layers[layer]
    }

    /// Coordinate `x` with its `layer` digit replaced by `value`.
    pub fn with_digit(&self, x: usize, layer: usize, value: usize) -> usize {
        let w = self.radix_weight(layer);
        x - self.digit(x, layer) * w + value * w
    }

    pub fn k_initial(&self) -> usize {
        self.k_initial
    }

    pub fn r_initial(&self) -> usize {
        self.r_initial
    }

    pub fn n_initial(&self) -> usize {
        self.k_initial + self.r_initial
    }

    pub fn sigma_max(&self) -> usize {
        self.base.sigma()
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn base(&self) -> &AccessOptimalPair {
        &self.base
    }

    pub fn initial(&self) -> &VectorCode {
        &self.initial
    }

    pub fn piggybacks(&self) -> &[PiggybackTerm] {
        &self.piggybacks
    }

    /// Decides what a conversion to `chosen_r` parities over `chosen_sigma`
    /// stripes downloads.
    pub fn plan(&self, chosen_r: usize, chosen_sigma: usize) -> Result<ConversionPlan> {
        if chosen_sigma < 2 || chosen_sigma > self.sigma_max() {
            return Err(Error::UnsupportedTarget(format!(
                "sigma = {chosen_sigma} outside 2..={}",
                self.sigma_max()
            )));
        }
        if chosen_r == 0 || chosen_r > self.base.r() {
            return Err(Error::UnsupportedTarget(format!(
                "r = {chosen_r} outside 1..={}",
                self.base.r()
            )));
        }
        let mode = if chosen_r >= self.k_initial {
            PlanMode::Reencode
        } else if chosen_r <= self.r_initial {
            PlanMode::ParityOnly
        } else if let Some(level) = self.layers.iter().position(|&r| r == chosen_r) {
            PlanMode::Piggyback { level }
        } else {
            return Err(Error::UnsupportedTarget(format!(
                "r = {chosen_r} is not among the supported targets {:?}",
                self.layers
            )));
        };
        let (k, a) = (self.k_initial, self.alpha);
        let all: Vec<usize> = (0..a).collect();
        let stripe_reads: Vec<Vec<usize>> = (0..self.n_initial())
            .map(|node| match mode {
                PlanMode::Reencode if node < k => all.clone(),
                PlanMode::Reencode => Vec::new(),
                PlanMode::ParityOnly if node >= k && node - k < chosen_r => all.clone(),
                PlanMode::ParityOnly => Vec::new(),
                PlanMode::Piggyback { .. } if node >= k => all.clone(),
                PlanMode::Piggyback { level } => (0..a)
                    .filter(|&x| self.digit(x, level) >= self.r_initial)
                    .collect(),
            })
            .collect();
        Ok(ConversionPlan {
            k_initial: k,
            r_initial: self.r_initial,
            alpha: a,
            r_final: chosen_r,
            sigma: chosen_sigma,
            mode,
            reads: vec![stripe_reads; chosen_sigma],
        })
    }

    /// `M_s(x)·p_j` over all lanes, from downloaded data subsymbols.
    fn data_times_parity(&self, fetched: &Fetched, s: usize, j: usize, x: usize) -> Result<Vec<Elem>> {
        let field = self.base.field();
        let p = &self.base.parity_vectors()[j];
        let mut out = vec![0; fetched.lanes];
        for (i, &coef) in p.iter().enumerate() {
            field.axpy(&mut out, coef, fetched.get(s, i, x)?);
        }
        Ok(out)
    }

    /// Instance-`x` value of parity `j` of stripe `s` as seen by the
    /// conversion: the base parity plus any piggybacks that cannot be removed.
    fn parity_value(
        &self,
        plan: &ConversionPlan,
        fetched: &Fetched,
        s: usize,
        j: usize,
        x: usize,
    ) -> Result<Vec<Elem>> {
        let k = self.k_initial;
        match plan.mode {
            PlanMode::Reencode => self.data_times_parity(fetched, s, j, x),
            PlanMode::ParityOnly => Ok(fetched.get(s, k + j, x)?.to_vec()),
            PlanMode::Piggyback { level } => {
                let t = self.digit(x, level);
                if t >= self.r_initial {
                    return self.data_times_parity(fetched, s, j, x);
                }
                if j < self.r_initial {
                    // Piggybacks here have sources outside the download; they stay.
                    return Ok(fetched.get(s, k + j, x)?.to_vec());
                }
                // Parity t at coordinate y carries M(x)·p_j as a piggyback.
                let y = self.with_digit(x, level, j);
                let field = self.base.field();
                let mut v = fetched.get(s, k + t, y)?.to_vec();
                let own = self.data_times_parity(fetched, s, t, y)?;
                field.axpy(&mut v, 1, &own);
                let mut remaining = Vec::new();
                for term in self.terms_on(t, y) {
                    if self.digit(term.source_coord, level) >= self.r_initial {
                        let known = self.data_times_parity(fetched, s, term.vector, term.source_coord)?;
                        field.axpy(&mut v, 1, &known);
                    } else {
                        remaining.push(term);
                    }
                }
                match remaining.as_slice() {
                    [only] if only.source_coord == x && only.vector == j => Ok(v),
                    _ => Err(Error::Internal(format!(
                        "cannot isolate piggyback for parity {j} at coordinate {x}: {remaining:?}"
                    ))),
                }
            }
        }
    }

    /// Computes the new parities from downloaded subsymbols. Result is indexed
    /// `[parity][coordinate][lane]`.
    pub fn execute(&self, plan: &ConversionPlan, fetched: &Fetched) -> Result<Vec<Vec<Vec<Elem>>>> {
        let field = self.base.field();
        let combine = self.base.combine();
        let mut out = vec![vec![vec![0; fetched.lanes]; self.alpha]; plan.r_final];
        for s in 0..plan.sigma {
            for (j, parity) in out.iter_mut().enumerate() {
                for (x, acc) in parity.iter_mut().enumerate() {
                    let v = self.parity_value(plan, fetched, s, j, x)?;
                    field.axpy(acc, combine[j][s], &v);
                }
            }
        }
        Ok(out)
    }

    /// Merges `chosen_sigma` initial stripes into a final stripe with
    /// `chosen_r` parities.
    pub fn convert(
        &self,
        stripes: &[Codeword],
        chosen_r: usize,
        chosen_sigma: usize,
    ) -> Result<(Codeword, ConversionTrace)> {
        let plan = self.plan(chosen_r, chosen_sigma)?;
        if stripes.len() != chosen_sigma {
            return Err(Error::LengthMismatch {
                expected: chosen_sigma,
                got: stripes.len(),
            });
        }
        for (s, stripe) in stripes.iter().enumerate() {
            if !self.initial.contains(stripe)? {
                return Err(Error::InvalidStripe(s));
            }
        }
        let fetched = Fetched::from_stripes(&plan, stripes)?;
        let parities = self.execute(&plan, &fetched)?;
        let mut symbols: Vec<Vec<Elem>> = stripes
            .iter()
            .flat_map(|st| st.symbols[..self.k_initial].iter().cloned())
            .collect();
        for parity in parities {
            symbols.push(parity.into_iter().map(|lanes| lanes[0]).collect());
        }
        let trace = plan.trace();
        trace.validate(self.k_initial)?;
        Ok((
            Codeword {
                alpha: self.alpha,
                symbols,
            },
            trace,
        ))
    }

    /// The final code produced by [`PiggybackCode::convert`], derived by
    /// running the conversion on every unit message at once.
    pub fn final_code(&self, chosen_r: usize, chosen_sigma: usize) -> Result<VectorCode> {
        let plan = self.plan(chosen_r, chosen_sigma)?;
        let (k, a) = (self.k_initial, self.alpha);
        let block = k * a;
        let lanes = chosen_sigma * block;
        let gen = self.initial.generator();
        let mut fetched = Fetched::new(&plan, lanes);
        for s in 0..chosen_sigma {
            for node in 0..self.n_initial() {
                for &x in &plan.reads[s][node] {
                    let col = self.initial.column(node, x);
                    let mut values = vec![0; lanes];
                    for row in 0..block {
                        values[s * block + row] = gen.get(row, col);
                    }
                    fetched.insert(s, node, x, values)?;
                }
            }
        }
        let parities = self.execute(&plan, &fetched)?;
        let mut parity = Matrix::zeros(self.base.field(), lanes, chosen_r * a);
        for (j, coords) in parities.iter().enumerate() {
            for (x, column) in coords.iter().enumerate() {
                for (row, &v) in column.iter().enumerate() {
                    parity.set(row, j * a + x, v);
                }
            }
        }
        VectorCode::systematic_from_parity(&parity, chosen_sigma * k + chosen_r, chosen_sigma * k, a)
    }

    /// `α` independent instances of the truncated base final code, without
    /// any piggybacks.
    pub fn clean_final_code(&self, chosen_r: usize, chosen_sigma: usize) -> Result<VectorCode> {
        let scalar = self.base.truncated_final(chosen_sigma, chosen_r)?;
        let (k, a) = (chosen_sigma * self.k_initial, self.alpha);
        let g = scalar.generator();
        let mut parity = Matrix::zeros(self.base.field(), k * a, chosen_r * a);
        for row in 0..k {
            for j in 0..chosen_r {
                for x in 0..a {
                    parity.set(row * a + x, j * a + x, g.get(row, k + j));
                }
            }
        }
        VectorCode::systematic_from_parity(&parity, k + chosen_r, k, a)
    }

    /// Whether the final stripe for this target keeps piggybacks from the
    /// initial stripes.
    pub fn has_leftovers(&self, chosen_r: usize, chosen_sigma: usize) -> Result<bool> {
        Ok(self.final_code(chosen_r, chosen_sigma)? != self.clean_final_code(chosen_r, chosen_sigma)?)
    }

    /// Decodes one initial stripe from `k_initial` of its nodes, instance by
    /// instance, removing piggybacks of already decoded instances.
    pub fn decode_piggybacked(&self, picks: &[usize], chunks: &[Vec<Elem>]) -> Result<Vec<Elem>> {
        let (k, a) = (self.k_initial, self.alpha);
        if chunks.len() != picks.len() {
            return Err(Error::LengthMismatch {
                expected: picks.len(),
                got: chunks.len(),
            });
        }
        if let Some(bad) = chunks.iter().find(|c| c.len() != a) {
            return Err(Error::LengthMismatch {
                expected: a,
                got: bad.len(),
            });
        }
        let scalar = self.base.punctured_initial(self.r_initial)?;
        let decoder = scalar.decoder(picks)?;
        let field = self.base.field();
        let p = self.base.parity_vectors();
        // instances[x] = M(x), the kI data values of instance x.
        let mut instances: Vec<Vec<Elem>> = Vec::with_capacity(a);
        for x in 0..a {
            let column: Vec<Elem> = picks
                .iter()
                .zip(chunks)
                .map(|(&node, chunk)| {
                    if node < k {
                        return chunk[x];
                    }
                    let mut v = chunk[x];
                    for term in self.terms_on(node - k, x) {
                        v ^= field.dot(&instances[term.source_coord], &p[term.vector]);
                    }
                    v
                })
                .collect();
            let refs: Vec<&[Elem]> = column.chunks(1).collect();
            instances.push(decoder.decode(&refs)?);
        }
        let mut message = vec![0; k * a];
        for (x, inst) in instances.iter().enumerate() {
            for (i, &v) in inst.iter().enumerate() {
                message[i * a + x] = v;
            }
        }
        Ok(message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    /// Read every data node in full.
    Reencode,
    /// Read the first `r` parity nodes in full.
    ParityOnly,
    /// Read parity nodes in full and part of every data node, recovering the
    /// piggybacks of layer `level`.
    Piggyback { level: usize },
}

/// Which subsymbols a conversion downloads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionPlan {
    pub k_initial: usize,
    pub r_initial: usize,
    pub alpha: usize,
    pub r_final: usize,
    pub sigma: usize,
    pub mode: PlanMode,
    /// `reads[stripe][node]`: coordinates downloaded, ascending.
    pub reads: Vec<Vec<Vec<usize>>>,
}

impl ConversionPlan {
    pub fn n_initial(&self) -> usize {
        self.k_initial + self.r_initial
    }

    pub fn trace(&self) -> ConversionTrace {
        let mut records = Vec::new();
        for (stripe, nodes) in self.reads.iter().enumerate() {
            for (node, coords) in nodes.iter().enumerate() {
                records.push(NodeRecord {
                    id: NodeId::Initial { stripe, node },
                    role: if node < self.k_initial {
                        Role::Unchanged
                    } else {
                        Role::Retired
                    },
                    read: coords.len(),
                    written: 0,
                });
            }
        }
        for index in 0..self.r_final {
            records.push(NodeRecord {
                id: NodeId::New { index },
                role: Role::New,
                read: 0,
                written: self.alpha,
            });
        }
        ConversionTrace {
            alpha: self.alpha,
            records,
        }
    }
}

/// Downloaded subsymbols, each holding one value per lane (lanes are
/// independent codewords sharing the same layout, e.g. payload units).
#[derive(Debug, Clone)]
pub struct Fetched {
    lanes: usize,
    n_initial: usize,
    alpha: usize,
    values: Vec<Option<Vec<Elem>>>,
    planned: Vec<bool>,
}

impl Fetched {
    pub fn new(plan: &ConversionPlan, lanes: usize) -> Fetched {
        let (n, a) = (plan.n_initial(), plan.alpha);
        let size = plan.sigma * n * a;
        let mut planned = vec![false; size];
        for (s, nodes) in plan.reads.iter().enumerate() {
            for (node, coords) in nodes.iter().enumerate() {
                for &x in coords {
                    planned[(s * n + node) * a + x] = true;
                }
            }
        }
        Fetched {
            lanes,
            n_initial: n,
            alpha: a,
            values: vec![None; size],
            planned,
        }
    }

    /// Downloads exactly the planned subsymbols of single codewords.
    pub fn from_stripes(plan: &ConversionPlan, stripes: &[Codeword]) -> Result<Fetched> {
        let mut fetched = Fetched::new(plan, 1);
        for (s, nodes) in plan.reads.iter().enumerate() {
            for (node, coords) in nodes.iter().enumerate() {
                for &x in coords {
                    fetched.insert(s, node, x, vec![stripes[s].symbols[node][x]])?;
                }
            }
        }
        Ok(fetched)
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    fn index(&self, stripe: usize, node: usize, coord: usize) -> Option<usize> {
        let idx = (stripe * self.n_initial + node) * self.alpha + coord;
        (node < self.n_initial && coord < self.alpha && idx < self.values.len()).then_some(idx)
    }

    /// Stores a planned subsymbol.
    pub fn insert(&mut self, stripe: usize, node: usize, coord: usize, values: Vec<Elem>) -> Result<()> {
        let idx = self
            .index(stripe, node, coord)
            .filter(|&i| self.planned[i])
            .ok_or_else(|| {
                Error::Internal(format!(
                    "subsymbol (stripe {stripe}, node {node}, coordinate {coord}) is not in the plan"
                ))
            })?;
        if values.len() != self.lanes {
            return Err(Error::LengthMismatch {
                expected: self.lanes,
                got: values.len(),
            });
        }
        self.values[idx] = Some(values);
        Ok(())
    }

    pub fn get(&self, stripe: usize, node: usize, coord: usize) -> Result<&[Elem]> {
        self.index(stripe, node, coord)
            .and_then(|i| self.values[i].as_deref())
            .ok_or(Error::NotDownloaded {
                stripe,
                node,
                coord,
            })
    }
}

/// A code built for a single merge target `(rF, ς)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandwidthOptimalCode {
    params: MergeParams,
    regime: Regime,
    code: PiggybackCode,
    final_code: VectorCode,
}

/// Piggybacked construction for `rI < rF < kI`; other regimes are rejected.
pub fn construct_bandwidth_optimal(
    k_initial: usize,
    r_initial: usize,
    r_final: usize,
    sigma: usize,
    seed: u64,
) -> Result<BandwidthOptimalCode> {
    let params = MergeParams::new(k_initial, r_initial, r_final, sigma)?;
    let regime = Regime::classify(k_initial, r_initial, r_final);
    if regime != Regime::Piggyback {
        return Err(Error::Regime(format!(
            "piggybacking needs rI < rF < kI, got kI={k_initial} rI={r_initial} rF={r_final} (use the {regime} conversion)"
        )));
    }
    BandwidthOptimalCode::construct(params, seed, SearchOptions::default())
}

impl BandwidthOptimalCode {
    /// Builds the code appropriate to the regime of `params`.
    pub fn construct(params: MergeParams, seed: u64, options: SearchOptions) -> Result<Self> {
        params.validate()?;
        let (k, ri, rf) = (params.k_initial, params.r_initial, params.r_final);
        let regime = Regime::classify(k, ri, rf);
        let base_r = match regime {
            Regime::Reencode => ri.max(rf),
            Regime::ParityOnly => ri,
            Regime::Piggyback => rf,
        };
        let base = construct_access_optimal_with(k, params.sigma, base_r, seed, options)?;
        BandwidthOptimalCode::from_base(params, base)
    }

    /// Rebuilds the code around an existing base pair.
    pub fn from_base(params: MergeParams, base: AccessOptimalPair) -> Result<Self> {
        params.validate()?;
        let (k, ri, rf) = (params.k_initial, params.r_initial, params.r_final);
        let regime = Regime::classify(k, ri, rf);
        if base.k_initial() != k || base.sigma() != params.sigma || base.r() < ri.max(rf) {
            return Err(Error::InvalidParams("base pair does not fit the parameters".into()));
        }
        let layers = if regime == Regime::Piggyback {
            vec![rf]
        } else {
            Vec::new()
        };
        let code = PiggybackCode::new(ri, layers, base)?;
        let final_code = code.final_code(rf, params.sigma)?;
        let built = BandwidthOptimalCode {
            params,
            regime,
            code,
            final_code,
        };
        for (what, report) in [("initial", built.initial().mds_report()), ("final", built.final_code.mds_report())] {
            if !report.is_mds() {
                return Err(Error::Internal(format!(
                    "{what} code is not MDS at subset {:?}",
                    report.failing_subset
                )));
            }
        }
        Ok(built)
    }

    pub fn params(&self) -> &MergeParams {
        &self.params
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn alpha(&self) -> usize {
        self.code.alpha()
    }

    pub fn code(&self) -> &PiggybackCode {
        &self.code
    }

    pub fn base(&self) -> &AccessOptimalPair {
        self.code.base()
    }

    pub fn initial(&self) -> &VectorCode {
        self.code.initial()
    }

    pub fn final_code(&self) -> &VectorCode {
        &self.final_code
    }

    pub fn piggybacks(&self) -> &[PiggybackTerm] {
        self.code.piggybacks()
    }

    pub fn mds_reports(&self) -> (MdsReport, MdsReport) {
        (self.initial().mds_report(), self.final_code.mds_report())
    }

    pub fn plan(&self) -> Result<ConversionPlan> {
        self.code.plan(self.params.r_final, self.params.sigma)
    }

    pub fn convert(&self, stripes: &[Codeword]) -> Result<(Codeword, ConversionTrace)> {
        self.code.convert(stripes, self.params.r_final, self.params.sigma)
    }

    pub fn decode_piggybacked(&self, picks: &[usize], chunks: &[Vec<Elem>]) -> Result<Vec<Elem>> {
        self.code.decode_piggybacked(picks, chunks)
    }
}

/// A code supporting conversion to several parity counts and any number of
/// merged stripes up to `sigma_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiTargetCode {
    supported_r: Vec<usize>,
    code: PiggybackCode,
}

pub fn construct_multi(
    k_initial: usize,
    r_initial: usize,
    sigma_max: usize,
    supported_r: &[usize],
    seed: u64,
) -> Result<MultiTargetCode> {
    MultiTargetCode::construct(
        k_initial,
        r_initial,
        sigma_max,
        supported_r,
        seed,
        SearchOptions::default(),
    )
}

impl MultiTargetCode {
    pub fn construct(
        k_initial: usize,
        r_initial: usize,
        sigma_max: usize,
        supported_r: &[usize],
        seed: u64,
        options: SearchOptions,
    ) -> Result<Self> {
        let supported = Self::check_targets(k_initial, r_initial, sigma_max, supported_r)?;
        let base_r = r_initial.max(*supported.last().expect("nonempty"));
        let base = construct_access_optimal_with(k_initial, sigma_max, base_r, seed, options)?;
        MultiTargetCode::from_base(r_initial, &supported, base)
    }

    fn check_targets(
        k_initial: usize,
        r_initial: usize,
        sigma_max: usize,
        supported_r: &[usize],
    ) -> Result<Vec<usize>> {
        MergeParams::new(k_initial, r_initial, 1, sigma_max)?;
        let mut supported = supported_r.to_vec();
        supported.sort_unstable();
        supported.dedup();
        if supported.is_empty() {
            return Err(Error::InvalidParams("no target parity counts given".into()));
        }
        if let Some(&bad) = supported.iter().find(|&&r| r == 0 || r >= k_initial) {
            return Err(Error::Regime(format!(
                "target r = {bad} must lie in 1..{k_initial}"
            )));
        }
        Ok(supported)
    }

    pub fn from_base(r_initial: usize, supported_r: &[usize], base: AccessOptimalPair) -> Result<Self> {
        let supported = Self::check_targets(base.k_initial(), r_initial, base.sigma(), supported_r)?;
        let layers: Vec<usize> = supported.iter().copied().filter(|&r| r > r_initial).collect();
        let code = PiggybackCode::new(r_initial, layers, base)?;
        let report = code.initial().mds_report();
        if !report.is_mds() {
            return Err(Error::Internal(format!(
                "initial code is not MDS at subset {:?}",
                report.failing_subset
            )));
        }
        Ok(MultiTargetCode {
            supported_r: supported,
            code,
        })
    }

    pub fn supported_r(&self) -> &[usize] {
        &self.supported_r
    }

    pub fn sigma_max(&self) -> usize {
        self.code.sigma_max()
    }

    pub fn alpha(&self) -> usize {
        self.code.alpha()
    }

    pub fn code(&self) -> &PiggybackCode {
        &self.code
    }

    pub fn initial(&self) -> &VectorCode {
        self.code.initial()
    }

    fn check_target(&self, chosen_r: usize) -> Result<()> {
        if chosen_r == 0 || (chosen_r > self.code.r_initial() && !self.supported_r.contains(&chosen_r)) {
            return Err(Error::UnsupportedTarget(format!(
                "r = {chosen_r} is neither at most rI = {} nor in {:?}",
                self.code.r_initial(),
                self.supported_r
            )));
        }
        Ok(())
    }

    pub fn plan(&self, chosen_r: usize, chosen_sigma: usize) -> Result<ConversionPlan> {
        self.check_target(chosen_r)?;
        self.code.plan(chosen_r, chosen_sigma)
    }

    pub fn final_code(&self, chosen_r: usize, chosen_sigma: usize) -> Result<VectorCode> {
        self.check_target(chosen_r)?;
        self.code.final_code(chosen_r, chosen_sigma)
    }

    pub fn convert_multi(
        &self,
        stripes: &[Codeword],
        chosen_r: usize,
        chosen_sigma: usize,
    ) -> Result<(Codeword, ConversionTrace)> {
        self.check_target(chosen_r)?;
        self.code.convert(stripes, chosen_r, chosen_sigma)
    }

    pub fn decode_piggybacked(&self, picks: &[usize], chunks: &[Vec<Elem>]) -> Result<Vec<Elem>> {
        self.code.decode_piggybacked(picks, chunks)
    }
}
