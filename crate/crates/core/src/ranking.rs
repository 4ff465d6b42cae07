//! Offer ranking: min-max attribute normalisation, the weighted cost
//! function, Borda voting with shared-top tie scores, reliability
//! integration, and the random baseline.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PriorityVector;
use crate::offers::OfferCombination;
use crate::Scalar;

/// Attribute order used everywhere: latency, price, bandwidth, energy.
/// Bandwidth is the only attribute where higher values are preferable.
pub const HIGHER_IS_BETTER: [bool; 4] = [false, false, true, false];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankMethod {
    Cost,
    Borda,
    Random,
}

impl RankMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RankMethod::Cost => "cost",
            RankMethod::Borda => "borda",
            RankMethod::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReliabilityMode {
    None,
    Additive,
    Multiplicative,
}

impl ReliabilityMode {
    pub fn name(&self) -> &'static str {
        match self {
            ReliabilityMode::None => "none",
            ReliabilityMode::Additive => "additive",
            ReliabilityMode::Multiplicative => "multiplicative",
        }
    }
}

/// Offers ordered best-first with their scores.
#[derive(Debug, Clone)]
pub struct RankedOffers {
    pub entries: Vec<(OfferCombination, Scalar)>,
    pub method: RankMethod,
    pub reliability_mode: ReliabilityMode,
}

/// Min-max normalisation to [0, 1]: 0 everywhere when max equals min,
/// otherwise (v - min) / (max - min). With `invert`, each value v becomes
/// 1 - v afterwards (used for attributes where higher raw values are better).
pub fn normalize_attribute<S: Float>(values: &[S], invert: bool) -> Result<Vec<S>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("normalize_attribute"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("attribute values must be finite".into()));
    }
    let min = values.iter().cloned().fold(S::infinity(), S::min);
    let max = values.iter().cloned().fold(S::neg_infinity(), S::max);
    let normalised = values.iter().map(|&v| {
        if max == min {
            S::zero()
        } else {
            (v - min) / (max - min)
        }
    });
    Ok(if invert {
        normalised.map(|v| S::one() - v).collect()
    } else {
        normalised.collect()
    })
}

/// Positional Borda scores for one attribute. With n offers the best position
/// scores n-1 down to 0; tied offers all receive the score of the best
/// position in their tie group.
pub fn borda_positional_scores<S: Float>(values: &[S], higher_is_better: bool) -> Vec<S> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let cmp = values[a].partial_cmp(&values[b]).expect("finite values");
        if higher_is_better {
            cmp.reverse()
        } else {
            cmp
        }
    });
    let mut scores = vec![S::zero(); n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos + 1;
        while end < n && values[order[end]] == values[order[pos]] {
            end += 1;
        }
        let shared = S::from(n - 1 - pos).expect("score fits scalar");
        for &idx in &order[pos..end] {
            scores[idx] = shared;
        }
        pos = end;
    }
    scores
}

/// Weighted total cost per offer: sum over attributes of weight times the
/// normalised (and, where flagged, inverted) value. `attrs[q][i]` is the raw
/// value of attribute q for offer i.
pub fn weighted_cost_scores<S: Float>(
    attrs: &[Vec<S>],
    invert: &[bool],
    weights: &[S],
) -> Result<Vec<S>> {
    let n = attrs.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::EmptyInput("weighted_cost_scores"));
    }
    let mut totals = vec![S::zero(); n];
    for ((values, &inv), &weight) in attrs.iter().zip(invert).zip(weights) {
        let norm = normalize_attribute(values, inv)?;
        for (total, v) in totals.iter_mut().zip(norm) {
            *total = *total + weight * v;
        }
    }
    Ok(totals)
}

/// Weighted Borda totals per offer: sum over attributes of weight times the
/// positional score under that attribute's preference direction.
pub fn weighted_borda_scores<S: Float>(
    attrs: &[Vec<S>],
    higher_is_better: &[bool],
    weights: &[S],
) -> Result<Vec<S>> {
    let n = attrs.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::EmptyInput("weighted_borda_scores"));
    }
    let mut totals = vec![S::zero(); n];
    for ((values, &higher), &weight) in attrs.iter().zip(higher_is_better).zip(weights) {
        let scores = borda_positional_scores(values, higher);
        for (total, s) in totals.iter_mut().zip(scores) {
            *total = *total + weight * s;
        }
    }
    Ok(totals)
}

/// Applies a reliability mode to a cost score (lower is better).
pub fn reliability_adjusted_cost<S: Float>(cost: S, reliability: S, mode: ReliabilityMode) -> S {
    match mode {
        ReliabilityMode::None => cost,
        ReliabilityMode::Additive => cost - reliability,
        ReliabilityMode::Multiplicative => (S::one() - reliability) * cost,
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Stable content hash of a combination used for deterministic tie-breaking.
fn combination_hash(combo: &OfferCombination) -> u64 {
    let mut keys: Vec<String> = combo
        .pairs
        .iter()
        .map(|p| format!("{}#{}@{}", p.component_id, p.instance, p.agent_id))
        .collect();
    keys.sort();
    fnv1a64(keys.join(";").as_bytes())
}

fn attribute_table(offers: &[OfferCombination]) -> Vec<Vec<Scalar>> {
    let mut attrs = vec![Vec::new(); 4];
    for offer in offers {
        for (q, v) in offer.qos.as_array().into_iter().enumerate() {
            attrs[q].push(v);
        }
    }
    attrs
}

fn order_entries(
    offers: &[OfferCombination],
    scores: Vec<Scalar>,
    ascending: bool,
) -> Vec<(OfferCombination, Scalar)> {
    let mut idx: Vec<usize> = (0..offers.len()).collect();
    let hashes: Vec<u64> = offers.iter().map(combination_hash).collect();
    idx.sort_by(|&a, &b| {
        let cmp = scores[a].total_cmp(&scores[b]);
        let cmp = if ascending { cmp } else { cmp.reverse() };
        cmp.then(hashes[a].cmp(&hashes[b])).then(a.cmp(&b))
    });
    idx.into_iter()
        .map(|i| (offers[i].clone(), scores[i]))
        .collect()
}

/// Ranks offers by the weighted cost function, lower cost first. Reliability
/// is subtracted (additive) or scales the cost via its complement
/// (multiplicative). Ties break by content hash then insertion order.
pub fn cost_rank(
    offers: &[OfferCombination],
    priorities: &PriorityVector,
    mode: ReliabilityMode,
) -> Result<RankedOffers> {
    if offers.is_empty() {
        return Err(Error::EmptyInput("cost_rank"));
    }
    let invert = HIGHER_IS_BETTER;
    let totals = weighted_cost_scores(&attribute_table(offers), &invert, &priorities.as_array())?;
    let scores: Vec<Scalar> = totals
        .into_iter()
        .zip(offers)
        .map(|(cost, offer)| reliability_adjusted_cost(cost, offer.reliability, mode))
        .collect();
    Ok(RankedOffers {
        entries: order_entries(offers, scores, true),
        method: RankMethod::Cost,
        reliability_mode: mode,
    })
}

/// Ranks offers by weighted Borda score, higher score first. Additive mode
/// adds the unweighted Borda score of the reliability attribute;
/// multiplicative mode scales the total by the reliability itself.
pub fn borda_rank(
    offers: &[OfferCombination],
    priorities: &PriorityVector,
    mode: ReliabilityMode,
) -> Result<RankedOffers> {
    if offers.is_empty() {
        return Err(Error::EmptyInput("borda_rank"));
    }
    let totals = weighted_borda_scores(
        &attribute_table(offers),
        &HIGHER_IS_BETTER,
        &priorities.as_array(),
    )?;
    let reliabilities: Vec<Scalar> = offers.iter().map(|o| o.reliability).collect();
    let scores: Vec<Scalar> = match mode {
        ReliabilityMode::None => totals,
        ReliabilityMode::Additive => {
            let score_r = borda_positional_scores(&reliabilities, true);
            totals
                .into_iter()
                .zip(score_r)
                .map(|(s, r)| s + r)
                .collect()
        }
        ReliabilityMode::Multiplicative => totals
            .into_iter()
            .zip(&reliabilities)
            .map(|(s, &r)| r * s)
            .collect(),
    };
    Ok(RankedOffers {
        entries: order_entries(offers, scores, false),
        method: RankMethod::Borda,
        reliability_mode: mode,
    })
}

/// Uniformly random permutation of the offers; the score is the drawn
/// position.
pub fn random_rank(offers: &[OfferCombination], rng: &mut impl rand::Rng) -> Result<RankedOffers> {
    use rand::seq::SliceRandom;
    if offers.is_empty() {
        return Err(Error::EmptyInput("random_rank"));
    }
    let mut idx: Vec<usize> = (0..offers.len()).collect();
    idx.shuffle(rng);
    Ok(RankedOffers {
        entries: idx
            .into_iter()
            .enumerate()
            .map(|(pos, i)| (offers[i].clone(), pos as Scalar))
            .collect(),
        method: RankMethod::Random,
        reliability_mode: ReliabilityMode::None,
    })
}
