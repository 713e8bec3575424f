//! Entanglement cost of the universal two-party protocol.
//!
//! Round 1 uses one B→A channel of K pairs and one A→B channel of 2K.
//! Round j ≥ 2 has (N−1)(M−1)^{j−2} clusters, each holding one return and
//! one forward channel of 2K pairs apiece — the pair count grows
//! geometrically with the round number. The cluster count per round equals
//! the number of addressable channel paths of that length, which
//! [`enumerate_cluster_addresses`] cross-checks by explicit enumeration.

use crate::teleport::ChannelAddress;

use super::{AnalysisError, Result};

/// Cap on explicitly enumerated addresses.
const MAX_ENUMERATED: u128 = 1 << 20;

/// Analytic resource budget for a run of a given depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceBudget {
    pub k: u32,
    pub rounds: u32,
    /// Teleportation channels provisioned per round (2 per cluster).
    pub channels_per_round: Vec<u128>,
    /// Entangled pairs consumed per round under the full cost model.
    pub pairs_per_round: Vec<u128>,
    pub epr_pairs_total: u128,
}

/// Pair and channel counts for `rounds` rounds of the two-party protocol.
pub fn resource_count(k: u32, parties: u32, rounds: u32) -> Result<ResourceBudget> {
    if parties != 2 {
        return Err(AnalysisError::BadParameter(format!(
            "the analytic cost model covers two parties, got {parties}"
        )));
    }
    if k < 1 {
        return Err(AnalysisError::BadParameter("K must be at least 1".into()));
    }
    if rounds < 1 {
        return Err(AnalysisError::BadParameter(
            "rounds must be at least 1".into(),
        ));
    }
    let n = 4u128.pow(k);
    let m = 4u128.pow(2 * k);
    let k = k as u128;
    let overflow = || AnalysisError::BadParameter("resource count overflows u128".into());

    let mut channels_per_round = vec![2u128];
    let mut pairs_per_round = vec![3 * k];
    let mut clusters = n - 1;
    for _ in 2..=rounds {
        channels_per_round.push(clusters.checked_mul(2).ok_or_else(overflow)?);
        pairs_per_round.push(clusters.checked_mul(4 * k).ok_or_else(overflow)?);
        clusters = clusters.checked_mul(m - 1).ok_or_else(overflow)?;
    }
    let mut epr_pairs_total = 0u128;
    for &p in &pairs_per_round {
        epr_pairs_total = epr_pairs_total.checked_add(p).ok_or_else(overflow)?;
    }
    Ok(ResourceBudget {
        k: k as u32,
        rounds,
        channels_per_round,
        pairs_per_round,
        epr_pairs_total,
    })
}

/// All cluster addresses usable in a given round: the empty root for
/// round 1, and paths (n, m₁, …, m_{round−2}) with n ∈ 2..=N and
/// mᵢ ∈ 2..=M for later rounds.
pub fn enumerate_cluster_addresses(k: u32, round: u32) -> Result<Vec<ChannelAddress>> {
    if k < 1 || round < 1 {
        return Err(AnalysisError::BadParameter(
            "K and round must be at least 1".into(),
        ));
    }
    if round == 1 {
        return Ok(vec![ChannelAddress::new(vec![])]);
    }
    let n = 4u64.pow(k);
    let m = 4u64.pow(2 * k);
    let count = (n as u128 - 1) * (m as u128 - 1).pow(round - 2);
    if count > MAX_ENUMERATED {
        return Err(AnalysisError::BadParameter(format!(
            "{count} addresses is too many to enumerate"
        )));
    }
    let mut addresses = vec![];
    let mut stack: Vec<Vec<u64>> = (2..=n).map(|c| vec![c]).collect();
    while let Some(path) = stack.pop() {
        if path.len() as u32 == round - 1 {
            addresses.push(ChannelAddress::new(path));
            continue;
        }
        for c in 2..=m {
            let mut next = path.clone();
            next.push(c);
            stack.push(next);
        }
    }
    addresses.sort_by(|a, b| a.components().cmp(b.components()));
    Ok(addresses)
}
