//! Brute-force reference for the weight search.
//!
//! Works from raw auction records with plain `f64` and nested loops, sharing
//! no code with the library beyond the record types.
#![allow(dead_code)]

use rtb_rerank::dataset::{generate_dataset, GeneratorConfig};
use rtb_rerank::metrics::Relevance;
use rtb_rerank::AuctionRecord;

pub struct OracleAuction {
    pub ids: Vec<String>,
    pub bids: Vec<f64>,
    /// x[i][k], normalized
    pub x: Vec<[f64; 6]>,
    pub baseline: usize,
}

fn min_max(col: &[f64]) -> Vec<f64> {
    let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![0.5; col.len()];
    }
    col.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

pub fn oracle_auction(r: &AuctionRecord) -> OracleAuction {
    let n = r.candidates.len();
    let bids: Vec<f64> = r.candidates.iter().map(|c| c.bid).collect();
    let ids: Vec<String> = r.candidates.iter().map(|c| c.advertiser_id.clone()).collect();
    let mut cols: Vec<Vec<f64>> = (0..6).map(|_| Vec::with_capacity(n)).collect();
    for i in 0..n {
        let mut pay = 0.0f64;
        for j in 0..n {
            if j != i && bids[j] <= bids[i] && bids[j] > pay {
                pay = bids[j];
            }
        }
        let raw = &r.candidates[i].raw;
        let rel = match raw.relevance.as_ref().unwrap() {
            Relevance::Score(s) => *s,
            Relevance::Text { .. } => panic!("oracle handles scored relevance only"),
        };
        cols[0].push(pay);
        cols[1].push(bids[i] - pay);
        cols[2].push(raw.memorability.unwrap());
        cols[3].push(raw.ctr.unwrap());
        cols[4].push(rel);
        cols[5].push(raw.saliency.unwrap());
    }
    let norm: Vec<Vec<f64>> = cols.iter().map(|c| min_max(c)).collect();
    let x = (0..n)
        .map(|i| [norm[0][i], norm[1][i], norm[2][i], norm[3][i], norm[4][i], norm[5][i]])
        .collect();
    let mut baseline = 0;
    for i in 1..n {
        if bids[i] > bids[baseline] || (bids[i] == bids[baseline] && ids[i] < ids[baseline]) {
            baseline = i;
        }
    }
    OracleAuction { ids, bids, x, baseline }
}

fn score(w: &[f64; 6], x: &[f64; 6]) -> f64 {
    let mut s = 0.0;
    for k in 0..6 {
        s += w[k] * x[k];
    }
    s
}

/// Winner under `w`: highest score, then highest bid, then smallest id.
pub fn oracle_select(a: &OracleAuction, w: &[f64; 6]) -> (usize, f64) {
    let mut best = 0;
    let mut best_s = score(w, &a.x[0]);
    for i in 1..a.ids.len() {
        let s = score(w, &a.x[i]);
        let better = s > best_s || (s == best_s && (a.bids[i] > a.bids[best] || (a.bids[i] == a.bids[best] && a.ids[i] < a.ids[best])));
        if better {
            best = i;
            best_s = s;
        }
    }
    (best, best_s)
}

pub struct OracleEval {
    pub objective: f64,
    pub xi: Option<[f64; 6]>,
    pub changed: usize,
}

pub fn oracle_eval(auctions: &[OracleAuction], w: &[f64; 6]) -> OracleEval {
    let mut objective = 0.0;
    let mut diff = [0.0; 6];
    let mut base = [0.0; 6];
    let mut changed = 0;
    for a in auctions {
        let (sel, s) = oracle_select(a, w);
        objective += s;
        if a.ids[sel] != a.ids[a.baseline] {
            changed += 1;
        }
        for k in 0..6 {
            diff[k] += a.x[sel][k] - a.x[a.baseline][k];
            base[k] += a.x[a.baseline][k];
        }
    }
    let xi = if base.contains(&0.0) {
        None
    } else {
        Some(std::array::from_fn(|k| diff[k] / base[k]))
    };
    OracleEval { objective, xi, changed }
}

pub fn oracle_admits(theta: &[f64; 6], xi: &[f64; 6]) -> bool {
    xi[0].abs() <= theta[0].abs() && (1..6).all(|k| xi[k] >= theta[k])
}

#[derive(Debug, PartialEq)]
pub enum OracleResult {
    DegenerateBaseline,
    Infeasible,
    Feasible {
        composition: [u32; 6],
        objective: f64,
        xi: [f64; 6],
    },
}

/// Exhaustive search over all compositions of `m` into six parts.
pub fn brute_force(records: &[AuctionRecord], theta: [f64; 6], m: u32) -> OracleResult {
    let auctions: Vec<OracleAuction> = records.iter().map(oracle_auction).collect();
    let mut best: Option<([u32; 6], f64, [f64; 6])> = None;
    for c1 in 0..=m {
        for c2 in 0..=m - c1 {
            for c3 in 0..=m - c1 - c2 {
                for c4 in 0..=m - c1 - c2 - c3 {
                    for c5 in 0..=m - c1 - c2 - c3 - c4 {
                        let c = [c1, c2, c3, c4, c5, m - c1 - c2 - c3 - c4 - c5];
                        let w: [f64; 6] = std::array::from_fn(|k| c[k] as f64 / m as f64);
                        let e = oracle_eval(&auctions, &w);
                        let Some(xi) = e.xi else { return OracleResult::DegenerateBaseline };
                        if e.changed == 0 || !oracle_admits(&theta, &xi) {
                            continue;
                        }
                        if best.as_ref().is_none_or(|b| e.objective > b.1) {
                            best = Some((c, e.objective, xi));
                        }
                    }
                }
            }
        }
    }
    match best {
        Some((composition, objective, xi)) => OracleResult::Feasible {
            composition,
            objective,
            xi,
        },
        None => OracleResult::Infeasible,
    }
}

/// Change ratios of fixed weights, computed from raw records.
pub fn oracle_changes(records: &[AuctionRecord], w: &[f64; 6]) -> Option<[f64; 6]> {
    let auctions: Vec<OracleAuction> = records.iter().map(oracle_auction).collect();
    oracle_eval(&auctions, w).xi
}

/// Small random instance; `coarse` rounds bids and metrics to force ties.
pub fn small_instance(seed: u64, coarse: bool) -> Vec<AuctionRecord> {
    let n = 1 + (seed % 10) as usize;
    let cfg = GeneratorConfig {
        n_auctions: n,
        min_candidates: 1,
        max_candidates: 4,
        seed,
        ..Default::default()
    };
    let mut data = generate_dataset(&cfg).unwrap();
    if coarse {
        for r in &mut data {
            for c in &mut r.candidates {
                c.bid = c.bid.round().clamp(1.0, 4.0);
                let q = |v: f64| (v * 4.0).round() / 4.0;
                c.raw.memorability = c.raw.memorability.map(q);
                c.raw.ctr = c.raw.ctr.map(q);
                c.raw.saliency = c.raw.saliency.map(q);
                if let Some(Relevance::Score(s)) = c.raw.relevance.as_mut() {
                    *s = q(*s);
                }
            }
        }
    }
    data
}
