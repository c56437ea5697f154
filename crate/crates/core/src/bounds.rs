//! Lower bounds on conversion bandwidth and the savings they imply.
//!
//! Every bound is computed in exact rationals. Bandwidth is measured in
//! subsymbols: all data read from initial nodes plus all data written to new
//! nodes.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crate::base_convertible::access_lower_bound;

pub type Rational = Ratio<i64>;

fn int(v: usize) -> Rational {
    Rational::from_integer(v as i64)
}

/// Minimum conversion bandwidth for merging `sigma` stripes of a
/// `[kI+rI, kI, α]` MDS code into one `[σkI+rF, σkI, α]` MDS code.
/// Only stable conversions can meet it.
pub fn merge_bandwidth_lower_bound(
    k_initial: usize,
    r_initial: usize,
    r_final: usize,
    sigma: usize,
    alpha: usize,
) -> Rational {
    let (k, ri, rf) = (int(k_initial), int(r_initial), int(r_final));
    let (s, a) = (int(sigma), int(alpha));
    if r_initial >= r_final || k_initial <= r_final {
        s * a * int(k_initial.min(r_final)) + rf * a
    } else {
        s * a * (ri + k * (Rational::from_integer(1) - ri / rf)) + rf * a
    }
}

/// Bandwidth of the default conversion: read every data symbol, write every
/// new parity.
pub fn default_conversion_bandwidth(
    k_initial: usize,
    r_final: usize,
    sigma: usize,
    alpha: usize,
) -> Rational {
    int((sigma * k_initial + r_final) * alpha)
}

/// Minimum bandwidth when the number of data symbols does not change
/// (`[kI+rI, kI]` to `[kI+rF, kI]`). `r_initial` may be zero.
pub fn equal_k_lower_bound(k_initial: usize, r_initial: usize, r_final: usize, alpha: usize) -> Rational {
    if r_initial >= r_final {
        return Rational::zero();
    }
    let (k, ri, rf, a) = (int(k_initial), int(r_initial), int(r_final), int(alpha));
    a * (k + ri) * (Rational::from_integer(1) - ri / rf) + (rf - ri) * a
}

/// Downloads from one initial stripe in an optimal solution of the
/// per-stripe bandwidth program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripeDownload {
    /// Total read from the stripe's retired nodes.
    pub retired: Rational,
    /// Total read from the stripe's unchanged nodes.
    pub unchanged: Rational,
}

impl StripeDownload {
    pub fn total(&self) -> Rational {
        self.retired + self.unchanged
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub stripes: Vec<StripeDownload>,
    pub gamma: Rational,
}

/// Left and right hand sides of the flow constraint tying a stripe's
/// downloads to its layout: `u(kI + S − u)α ≤ S·β(U) + u·β(R)`.
pub fn stripe_constraint(
    k_initial: usize,
    unchanged: usize,
    s_cap: usize,
    alpha: usize,
    download: &StripeDownload,
) -> (Rational, Rational) {
    let (u, s) = (int(unchanged), int(s_cap));
    let need = u * (int(k_initial) + s - u) * int(alpha);
    (need, s * download.unchanged + u * download.retired)
}

/// Solves the bandwidth program for an arbitrary layout in closed form.
///
/// Stripe `i` keeps `unchanged[i]` nodes, retires `retired[i]`, and uses the
/// cut size `s_cap[i] = min(rF, unchanged[i])`. Retired data is preferred
/// because it counts `u/S ≥ 1` times as much towards the constraint.
pub fn solve_merge_lp(
    k_initial: usize,
    unchanged: &[usize],
    retired: &[usize],
    s_cap: &[usize],
    alpha: usize,
    new_count: usize,
) -> Result<LpSolution> {
    if unchanged.len() != retired.len() || unchanged.len() != s_cap.len() {
        return Err(Error::LengthMismatch {
            expected: unchanged.len(),
            got: retired.len().min(s_cap.len()),
        });
    }
    let a = int(alpha);
    let mut stripes = Vec::with_capacity(unchanged.len());
    for (i, ((&u, &r), &s)) in unchanged.iter().zip(retired).zip(s_cap).enumerate() {
        if u > k_initial {
            return Err(Error::Infeasible(format!(
                "stripe {i} keeps {u} unchanged nodes, more than k_initial = {k_initial}"
            )));
        }
        if s > u {
            return Err(Error::InvalidParams(format!(
                "stripe {i}: cut size {s} exceeds unchanged count {u}"
            )));
        }
        if u + r < k_initial {
            return Err(Error::Infeasible(format!(
                "stripe {i} has only {} nodes, fewer than k_initial = {k_initial}",
                u + r
            )));
        }
        let download = if s == 0 {
            StripeDownload {
                retired: int(k_initial.min(r)) * a,
                unchanged: Rational::zero(),
            }
        } else {
            let excess = (k_initial + s).saturating_sub(u + r);
            StripeDownload {
                retired: int((k_initial + s - u).min(r)) * a,
                unchanged: int(excess * u) * a / int(s),
            }
        };
        stripes.push(download);
    }
    let gamma = stripes.iter().map(StripeDownload::total).sum::<Rational>() + int(new_count) * a;
    Ok(LpSolution { stripes, gamma })
}

/// Smallest equal per-node download meeting the flow constraint of a stable
/// stripe, and the resulting per-stripe read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniformBound {
    pub per_node: Rational,
    pub per_stripe: Rational,
}

pub fn uniform_download_bound(
    k_initial: usize,
    r_initial: usize,
    r_final: usize,
    alpha: usize,
) -> UniformBound {
    let s = int(r_final.min(k_initial));
    let per_node = s * int(alpha) / (s + int(r_initial));
    UniformBound {
        per_node,
        per_stripe: per_node * int(k_initial + r_initial),
    }
}

/// Per-stripe read of an optimal stable conversion.
pub fn optimal_stripe_read(k_initial: usize, r_initial: usize, r_final: usize, alpha: usize) -> Rational {
    let solution = solve_merge_lp(
        k_initial,
        &[k_initial],
        &[r_initial],
        &[r_final.min(k_initial)],
        alpha,
        0,
    )
    .expect("stable layout is always feasible");
    solution.gamma
}

/// Which closed form applies to a point of the savings plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SavingsRegion {
    /// `r̃F ≤ r̃I` and `r̃F < 1`: reading parities alone suffices.
    ParityOnly = 1,
    /// `r̃I < r̃F < 1`: parities plus part of every data node.
    Partial = 2,
    /// `r̃F ≥ 1`: nothing beats reading all data.
    NoSavings = 3,
}

pub fn savings_region(r_tilde_i: f64, r_tilde_f: f64) -> SavingsRegion {
    if r_tilde_f >= 1.0 {
        SavingsRegion::NoSavings
    } else if r_tilde_f <= r_tilde_i {
        SavingsRegion::ParityOnly
    } else {
        SavingsRegion::Partial
    }
}

/// Fraction of read bandwidth saved relative to reading all data, for
/// `r̃I = rI/kI` and `r̃F = rF/kI`.
pub fn savings_ratio(r_tilde_i: f64, r_tilde_f: f64) -> f64 {
    match savings_region(r_tilde_i, r_tilde_f) {
        SavingsRegion::ParityOnly => 1.0 - r_tilde_f,
        SavingsRegion::Partial => r_tilde_i * (1.0 / r_tilde_f - 1.0),
        SavingsRegion::NoSavings => 0.0,
    }
}

/// Exact version of [`savings_ratio`].
pub fn savings_ratio_exact(r_tilde_i: Rational, r_tilde_f: Rational) -> Rational {
    let one = Rational::from_integer(1);
    if r_tilde_f >= one {
        Rational::zero()
    } else if r_tilde_f <= r_tilde_i {
        one - r_tilde_f
    } else {
        r_tilde_i * (one / r_tilde_f - one)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavingsPoint {
    pub r_tilde_i: f64,
    pub r_tilde_f: f64,
    pub rho: f64,
    pub region: SavingsRegion,
}

/// Savings at every grid point, sorted by `(r̃I, r̃F)`.
pub fn sweep_savings(r_tilde_i: &[f64], r_tilde_f: &[f64]) -> Vec<SavingsPoint> {
    let mut points: Vec<SavingsPoint> = r_tilde_i
        .iter()
        .flat_map(|&ri| {
            r_tilde_f.iter().map(move |&rf| SavingsPoint {
                r_tilde_i: ri,
                r_tilde_f: rf,
                rho: savings_ratio(ri, rf),
                region: savings_region(ri, rf),
            })
        })
        .collect();
    points.sort_by(|a, b| {
        a.r_tilde_i
            .total_cmp(&b.r_tilde_i)
            .then(a.r_tilde_f.total_cmp(&b.r_tilde_f))
    });
    points
}

/// Writes `r_tilde_I,r_tilde_F,rho,region` rows.
pub fn write_savings_csv<W: std::io::Write>(points: &[SavingsPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r_tilde_I", "r_tilde_F", "rho", "region"])?;
    for p in points {
        w.write_record([
            p.r_tilde_i.to_string(),
            p.r_tilde_f.to_string(),
            p.rho.to_string(),
            (p.region as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A rational as `f64`. Exact for values like `1/5` up to rounding of the
/// final division.
pub fn to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// The integer value of `r` when it has one.
pub fn to_integer(r: Rational) -> Option<i64> {
    r.is_integer().then(|| r.to_integer())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn merge_bound_examples() {
        assert_eq!(merge_bandwidth_lower_bound(4, 1, 2, 2, 2), q(16, 1));
        assert_eq!(merge_bandwidth_lower_bound(4, 2, 2, 2, 1), q(6, 1));
        assert_eq!(merge_bandwidth_lower_bound(2, 1, 3, 2, 1), q(7, 1));
        assert_eq!(merge_bandwidth_lower_bound(5, 1, 3, 2, 3), q(35, 1));
        assert_eq!(merge_bandwidth_lower_bound(4, 1, 3, 2, 6), q(62, 1));
        // Not integral when rF does not divide alpha.
        assert_eq!(merge_bandwidth_lower_bound(4, 1, 3, 2, 1), q(2 * 11, 3) + 3);
    }

    #[test]
    fn equal_k_examples() {
        assert_eq!(equal_k_lower_bound(4, 2, 2, 3), q(0, 1));
        assert_eq!(equal_k_lower_bound(4, 1, 2, 2), q(7, 1));
        assert_eq!(equal_k_lower_bound(4, 0, 1, 1), q(5, 1));
    }

    #[test]
    fn lp_examples() {
        let stable = solve_merge_lp(4, &[4], &[1], &[2], 2, 0).unwrap();
        assert_eq!(stable.stripes[0].retired, q(2, 1));
        assert_eq!(stable.stripes[0].unchanged, q(4, 1));
        assert_eq!(stable.gamma, q(6, 1));

        let parity_only = solve_merge_lp(4, &[4], &[2], &[2], 1, 0).unwrap();
        assert_eq!(parity_only.stripes[0].unchanged, q(0, 1));

        // Keeping only 3 of 4 data nodes costs more than keeping all 4.
        let unstable = solve_merge_lp(4, &[3], &[2], &[3], 1, 0).unwrap();
        let stable = solve_merge_lp(4, &[4], &[1], &[3], 1, 0).unwrap();
        assert!(unstable.gamma > stable.gamma);

        assert!(matches!(
            solve_merge_lp(4, &[2], &[1], &[2], 1, 0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn lp_matches_closed_form_for_full_stripes() {
        for k in 1..=6usize {
            for ri in 1..=4usize {
                for rf in 1..=5usize {
                    for u in 1..=k {
                        let r = k + ri - u;
                        let s = rf.min(u);
                        let got = solve_merge_lp(k, &[u], &[r], &[s], 1, 0).unwrap().gamma;
                        let want = int(k) - int(ri.min(s)) * (q(u as i64, s as i64) - 1);
                        assert_eq!(got, want, "k={k} ri={ri} rf={rf} u={u}");
                    }
                }
            }
        }
    }

    /// Minimizes β(U) + β(R) over a grid by brute force.
    fn brute_force_stripe(k: usize, u: usize, r: usize, s: usize, alpha: usize, steps: i64) -> Rational {
        let a = int(alpha);
        let mut best: Option<Rational> = None;
        for bu in 0..=(u as i64 * steps) {
            for br in 0..=(r as i64 * steps) {
                let d = StripeDownload {
                    unchanged: q(bu, steps) * a,
                    retired: q(br, steps) * a,
                };
                let (need, have) = stripe_constraint(k, u, s, alpha, &d);
                if need <= have && best.is_none_or(|b| d.total() < b) {
                    best = Some(d.total());
                }
            }
        }
        best.expect("full download is feasible")
    }

    #[test]
    fn lp_matches_grid_search() {
        for k in 1..=4usize {
            for ri in 1..=3usize {
                for rf in 1..=4usize {
                    for u in 1..=k {
                        let r = k + ri - u;
                        let s = rf.min(u);
                        let steps = (rf * k) as i64;
                        let closed = solve_merge_lp(k, &[u], &[r], &[s], 2, 0).unwrap().stripes[0].total();
                        let grid = brute_force_stripe(k, u, r, s, 2, steps);
                        let step = q(2, steps);
                        assert!(grid >= closed, "closed form not minimal k={k} u={u} rf={rf}");
                        assert!(grid - closed <= step, "k={k} ri={ri} rf={rf} u={u}");
                    }
                }
            }
        }
    }

    #[test]
    fn merge_bound_equals_stable_lp() {
        for k in 1..=6usize {
            for ri in 1..=3usize {
                for rf in 1..=4usize {
                    for sigma in 2..=3usize {
                        for alpha in [1usize, rf, 12] {
                            let sol = solve_merge_lp(
                                k,
                                &vec![k; sigma],
                                &vec![ri; sigma],
                                &vec![rf.min(k); sigma],
                                alpha,
                                rf,
                            )
                            .unwrap();
                            assert_eq!(
                                sol.gamma,
                                merge_bandwidth_lower_bound(k, ri, rf, sigma, alpha),
                                "k={k} ri={ri} rf={rf} sigma={sigma} alpha={alpha}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_download_gap() {
        let alpha = 3;
        let uniform = uniform_download_bound(4, 1, 2, alpha);
        assert_eq!(uniform.per_node, q(2, 1));
        assert_eq!(uniform.per_stripe, q(10, 1));
        assert_eq!(optimal_stripe_read(4, 1, 2, alpha), q(9, 1));
        for k in 2..=6usize {
            for ri in 1..k {
                for rf in ri + 1..k {
                    assert!(uniform_download_bound(k, ri, rf, 1).per_stripe > optimal_stripe_read(k, ri, rf, 1));
                }
            }
        }
    }

    #[test]
    fn savings_examples() {
        assert_eq!(savings_ratio(0.25, 0.5), 0.25);
        assert_eq!(savings_ratio(1.0, 0.5), 0.5);
        assert_eq!(savings_ratio(1.0, 1.0), 0.0);
        assert_eq!(savings_ratio(0.3, 1.5), 0.0);
        assert!((savings_ratio(0.5, 0.75) - 1.0 / 6.0).abs() < 1e-15);
        assert!(savings_ratio(0.1, 1.0 - 1e-12) < 1e-11);
        assert_eq!(savings_ratio_exact(q(1, 4), q(1, 2)), q(1, 4));
        // End to end with writes: 16 against a default of 20.
        let saved = Rational::from_integer(1)
            - merge_bandwidth_lower_bound(4, 1, 2, 2, 2) / default_conversion_bandwidth(4, 2, 2, 2);
        assert_eq!(to_f64(saved), 0.2);
    }

    #[test]
    fn read_savings_match_bound() {
        for k in 2..=8usize {
            for ri in 1..=8usize {
                for rf in 1..=10usize {
                    let bound = merge_bandwidth_lower_bound(k, ri, rf, 2, 1);
                    let reads = bound - int(rf);
                    let rho = Rational::from_integer(1) - reads / int(2 * k);
                    assert_eq!(
                        rho,
                        savings_ratio_exact(q(ri as i64, k as i64), q(rf as i64, k as i64)),
                        "k={k} ri={ri} rf={rf}"
                    );
                }
            }
        }
    }

    #[test]
    fn sweep_is_sorted_and_regional() {
        let points = sweep_savings(&[1.0, 0.5], &[0.75, 0.5, 1.0]);
        assert_eq!(points.len(), 6);
        assert_eq!((points[0].r_tilde_i, points[0].r_tilde_f), (0.5, 0.5));
        let at = |ri: f64, rf: f64| points.iter().find(|p| p.r_tilde_i == ri && p.r_tilde_f == rf).unwrap();
        assert_eq!(at(1.0, 0.5).rho, 0.5);
        assert_eq!(at(1.0, 1.0).rho, 0.0);
        assert_eq!(at(0.5, 0.75).region, SavingsRegion::Partial);
        let mut buf = Vec::new();
        write_savings_csv(&points, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r_tilde_I,r_tilde_F,rho,region\n0.5,0.5,0.5,1\n"));
    }

    proptest! {
        #[test]
        fn bound_is_monotone(k in 1usize..10, ri in 1usize..6, rf in 1usize..10, sigma in 2usize..5, alpha in 1usize..7) {
            let b = merge_bandwidth_lower_bound(k, ri, rf, sigma, alpha);
            prop_assert!(merge_bandwidth_lower_bound(k, ri, rf + 1, sigma, alpha) >= b);
            prop_assert!(merge_bandwidth_lower_bound(k, ri, rf, sigma + 1, alpha) >= b);
        }

        #[test]
        fn savings_are_bounded_and_continuous(ri in 0.01f64..2.0, rf in 0.01f64..2.0) {
            let rho = savings_ratio(ri, rf);
            prop_assert!((0.0..=1.0).contains(&rho));
            let eps = 1e-9;
            prop_assert!((savings_ratio(ri, rf + eps) - rho).abs() < 1e-6);
            prop_assert!(savings_ratio(ri, rf + eps) <= rho + 1e-15);
        }
    }
}
