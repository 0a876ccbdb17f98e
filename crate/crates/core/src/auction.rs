//! Stage I: second-price pricing over a single auction.
//!
//! Every candidate gets a payment, not just the top bidder, because the
//! re-ranking stage may display any of them. A candidate's payment is the
//! price it would face if every higher bidder were absent: the highest
//! competing bid not above its own, floored at the reserve.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dataset::AuctionRecord;
use crate::error::{Error, Result};
use crate::scalar::{max_ref, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bid<T> {
    pub advertiser_id: String,
    pub amount: T,
}

impl<T> Bid<T> {
    pub fn new(advertiser_id: impl Into<String>, amount: T) -> Self {
        Bid {
            advertiser_id: advertiser_id.into(),
            amount,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateOutcome<T> {
    pub payment: T,
    pub value: T,
    pub utility: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageOneResult<T> {
    pub auction_id: String,
    pub baseline_winner: String,
    pub per_candidate: BTreeMap<String, CandidateOutcome<T>>,
}

/// Orders two bids by amount (higher first), then by id (smaller first).
pub(crate) fn bid_precedes<T: Scalar>(a_amount: &T, a_id: &str, b_amount: &T, b_id: &str) -> bool {
    a_amount > b_amount || (a_amount == b_amount && a_id < b_id)
}

fn validate_bids<T: Scalar>(bids: &[Bid<T>]) -> Result<()> {
    if bids.is_empty() {
        return Err(Error::EmptyAuction);
    }
    let mut seen = HashSet::with_capacity(bids.len());
    for bid in bids {
        if !bid.amount.is_finite_value() || bid.amount < T::zero() {
            return Err(Error::InvalidBid {
                advertiser_id: bid.advertiser_id.clone(),
                reason: format!("amount must be finite and non-negative, got {:?}", bid.amount),
            });
        }
        if !seen.insert(bid.advertiser_id.as_str()) {
            return Err(Error::InvalidBid {
                advertiser_id: bid.advertiser_id.clone(),
                reason: "advertiser appears twice in one auction".into(),
            });
        }
    }
    Ok(())
}

/// The traditional RTB winner: highest bid, ties to the smallest advertiser id.
pub fn baseline_winner<T: Scalar>(bids: &[Bid<T>]) -> Result<&str> {
    validate_bids(bids)?;
    let mut best = &bids[0];
    for bid in &bids[1..] {
        if bid_precedes(&bid.amount, &bid.advertiser_id, &best.amount, &best.advertiser_id) {
            best = bid;
        }
    }
    Ok(&best.advertiser_id)
}

fn payment_for<T: Scalar>(index: usize, bids: &[Bid<T>], reserve: &T) -> T {
    let own = &bids[index].amount;
    if reserve > own {
        return own.clone();
    }
    let mut price = reserve;
    for (j, other) in bids.iter().enumerate() {
        if j != index && &other.amount <= own {
            price = max_ref(price, &other.amount);
        }
    }
    price.clone()
}

/// Second price `candidate_id` would pay if every higher bidder were absent.
pub fn counterfactual_payment<T: Scalar>(candidate_id: &str, bids: &[Bid<T>], reserve: &T) -> Result<T> {
    validate_bids(bids)?;
    let index = bids
        .iter()
        .position(|b| b.advertiser_id == candidate_id)
        .ok_or_else(|| Error::UnknownCandidate(candidate_id.to_string()))?;
    Ok(payment_for(index, bids, reserve))
}

/// Prices every candidate of `auction` and picks the baseline winner.
///
/// Bidding is assumed truthful, so each candidate's value equals its bid.
pub fn run_stage_one<T: Scalar>(auction: &AuctionRecord<T>, reserve: &T) -> Result<StageOneResult<T>> {
    let bids = auction.bids();
    let winner = baseline_winner(&bids)?.to_string();
    let per_candidate = bids
        .iter()
        .enumerate()
        .map(|(i, bid)| {
            let payment = payment_for(i, &bids, reserve);
            let value = bid.amount.clone();
            let utility = value.clone() - payment.clone();
            (bid.advertiser_id.clone(), CandidateOutcome { payment, value, utility })
        })
        .collect();
    Ok(StageOneResult {
        auction_id: auction.auction_id.clone(),
        baseline_winner: winner,
        per_candidate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AuctionRecord, Candidate};
    use crate::metrics::RawMetrics;
    use proptest::prelude::*;

    fn bids(pairs: &[(&str, f64)]) -> Vec<Bid<f64>> {
        pairs.iter().map(|(id, a)| Bid::new(*id, *a)).collect()
    }

    fn record(pairs: &[(&str, f64)]) -> AuctionRecord<f64> {
        AuctionRecord {
            auction_id: "z".into(),
            candidates: pairs
                .iter()
                .map(|(id, a)| Candidate {
                    advertiser_id: id.to_string(),
                    bid: *a,
                    raw: RawMetrics::scored(0.5, 0.1, 0.5, 0.5),
                })
                .collect(),
        }
    }

    /// Brute-force reference: max{reserve, b_j : j != i, b_j <= b_i}, capped at b_i.
    fn reference_payment(i: usize, amounts: &[f64], reserve: f64) -> f64 {
        let mut best = reserve;
        for (j, &b) in amounts.iter().enumerate() {
            if j != i && b <= amounts[i] && b > best {
                best = b;
            }
        }
        best.min(amounts[i])
    }

    #[test]
    fn baseline_winner_examples() {
        assert_eq!(baseline_winner(&bids(&[("A", 5.0), ("B", 3.0), ("C", 2.0)])).unwrap(), "A");
        assert_eq!(baseline_winner(&bids(&[("B", 4.0), ("A", 4.0)])).unwrap(), "A");
        assert_eq!(baseline_winner(&bids(&[("A", 0.0)])).unwrap(), "A");
        assert!(matches!(baseline_winner::<f64>(&[]), Err(Error::EmptyAuction)));
    }

    #[test]
    fn counterfactual_payment_examples() {
        let b = bids(&[("A", 5.0), ("B", 3.0), ("C", 2.0)]);
        assert_eq!(counterfactual_payment("A", &b, &0.0).unwrap(), 3.0);
        assert_eq!(counterfactual_payment("C", &b, &0.0).unwrap(), 0.0);
        let tied = bids(&[("A", 5.0), ("B", 3.0), ("C", 3.0)]);
        assert_eq!(counterfactual_payment("B", &tied, &0.0).unwrap(), 3.0);
        assert!(matches!(counterfactual_payment("Z", &b, &0.0), Err(Error::UnknownCandidate(id)) if id == "Z"));
    }

    #[test]
    fn reserve_above_bid_caps_payment_at_bid() {
        let b = bids(&[("A", 5.0), ("B", 3.0), ("C", 2.0)]);
        assert_eq!(counterfactual_payment("C", &b, &2.5).unwrap(), 2.0);
        assert_eq!(counterfactual_payment("B", &b, &2.5).unwrap(), 2.5);
        assert_eq!(counterfactual_payment("A", &b, &4.0).unwrap(), 4.0);
    }

    #[test]
    fn invalid_bids_are_rejected() {
        assert!(matches!(baseline_winner(&bids(&[("A", -1.0)])), Err(Error::InvalidBid { .. })));
        assert!(matches!(baseline_winner(&bids(&[("A", f64::NAN)])), Err(Error::InvalidBid { .. })));
        assert!(matches!(
            baseline_winner(&bids(&[("A", 1.0), ("A", 2.0)])),
            Err(Error::InvalidBid { .. })
        ));
    }

    #[test]
    fn stage_one_running_example() {
        let out = run_stage_one(&record(&[("A", 5.0), ("B", 3.0), ("C", 2.0)]), &0.0).unwrap();
        assert_eq!(out.baseline_winner, "A");
        let amounts = [5.0, 3.0, 2.0];
        for (i, id) in ["A", "B", "C"].iter().enumerate() {
            let c = &out.per_candidate[*id];
            assert_eq!(c.payment, reference_payment(i, &amounts, 0.0));
            assert_eq!(c.utility, c.value - c.payment);
        }
        let pay: Vec<f64> = out.per_candidate.values().map(|c| c.payment).collect();
        let util: Vec<f64> = out.per_candidate.values().map(|c| c.utility).collect();
        assert_eq!(pay, vec![3.0, 2.0, 0.0]);
        assert_eq!(util, vec![2.0, 1.0, 2.0]);
    }

    #[test]
    fn stage_one_single_and_tied() {
        let out = run_stage_one(&record(&[("A", 4.0)]), &0.0).unwrap();
        assert_eq!(
            out.per_candidate["A"],
            CandidateOutcome {
                payment: 0.0,
                value: 4.0,
                utility: 4.0
            }
        );
        let out = run_stage_one(&record(&[("A", 2.0), ("B", 2.0)]), &0.0).unwrap();
        assert_eq!(out.baseline_winner, "A");
        assert_eq!(out.per_candidate["A"].payment, 2.0);
        assert_eq!(out.per_candidate["B"].payment, 2.0);
        assert_eq!(out.per_candidate["B"].utility, 0.0);
    }

    #[test]
    fn stage_one_serialization_is_deterministic() {
        let r = record(&[("C", 2.0), ("A", 5.0), ("B", 3.0)]);
        let a = serde_json::to_string(&run_stage_one(&r, &0.0).unwrap()).unwrap();
        let b = serde_json::to_string(&run_stage_one(&r, &0.0).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    fn bid_set() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..100.0, 1..10)
    }

    proptest! {
        #[test]
        fn payments_never_exceed_bids(amounts in bid_set(), reserve in 0.0f64..20.0) {
            let pairs: Vec<(String, f64)> = amounts.iter().enumerate().map(|(i, a)| (format!("a{i:02}"), *a)).collect();
            let b: Vec<Bid<f64>> = pairs.iter().map(|(id, a)| Bid::new(id.clone(), *a)).collect();
            for (i, bid) in b.iter().enumerate() {
                let p = counterfactual_payment(&bid.advertiser_id, &b, &reserve).unwrap();
                prop_assert!(p <= bid.amount);
                prop_assert_eq!(p, reference_payment(i, &amounts, reserve));
            }
        }

        #[test]
        fn payment_monotone_in_own_bid(amounts in bid_set(), bump in 0.0f64..50.0) {
            let b: Vec<Bid<f64>> = amounts.iter().enumerate().map(|(i, a)| Bid::new(format!("a{i}"), *a)).collect();
            let before = counterfactual_payment("a0", &b, &0.0).unwrap();
            let mut raised = b.clone();
            raised[0].amount += bump;
            let after = counterfactual_payment("a0", &raised, &0.0).unwrap();
            prop_assert!(after >= before);
        }

        #[test]
        fn winner_invariant_under_rescaling(amounts in bid_set(), scale in 0.01f64..100.0) {
            let b: Vec<Bid<f64>> = amounts.iter().enumerate().map(|(i, a)| Bid::new(format!("a{i}"), *a)).collect();
            let scaled: Vec<Bid<f64>> = b.iter().map(|x| Bid::new(x.advertiser_id.clone(), x.amount * scale)).collect();
            // Rescaling can collapse near-equal floats into ties; compare only when the order is strict.
            let mut sorted = amounts.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            prop_assume!(sorted.len() < 2 || sorted[0] * scale > sorted[1] * scale);
            prop_assert_eq!(baseline_winner(&b).unwrap(), baseline_winner(&scaled).unwrap());
        }
    }
}
