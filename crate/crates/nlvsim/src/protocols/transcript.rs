//! Per-party classical records.
//!
//! Everything a party learns during the instantaneous phase — Bell
//! outcomes, channel choices, final z bits, conditional basis choices — is
//! appended to its transcript, tagged with the party and the round. The
//! transcripts are the *only* input to the later decoding step: combining
//! them at a point inside everyone's future light cone yields the measured
//! eigenvalue.

use crate::qsim::Site;
use crate::teleport::{BellOutcome, ChannelAddress};

/// Which teleportation a Bell-outcome record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeleportLeg {
    /// A party's opening teleport of its own system block to Alice.
    Initial,
    /// Alice's teleport of the composite system towards Bob.
    Forward,
    /// Bob's hand-off of the composite system to Carol (three-party only).
    Relay,
    /// A return teleport back to Alice through a chosen cluster channel.
    Return,
}

/// The basis used for a conditional single-qubit measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureAxis {
    Z,
    X,
}

/// One classical record, tagged with the round it was produced in.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Teleport {
        round: u32,
        leg: TeleportLeg,
        outcomes: Vec<BellOutcome>,
    },
    ChannelChoice {
        round: u32,
        address: ChannelAddress,
    },
    ZMeasurement {
        round: u32,
        bits: Vec<u8>,
    },
    BasisChoice {
        round: u32,
        axis: MeasureAxis,
    },
}

impl Record {
    pub fn round(&self) -> u32 {
        match self {
            Record::Teleport { round, .. }
            | Record::ChannelChoice { round, .. }
            | Record::ZMeasurement { round, .. }
            | Record::BasisChoice { round, .. } => *round,
        }
    }
}

/// Append-only record list for one party.
#[derive(Debug, Clone)]
pub struct Transcript {
    party: Site,
    records: Vec<Record>,
}

impl Transcript {
    pub fn new(party: Site) -> Self {
        Transcript {
            party,
            records: Vec::new(),
        }
    }

    pub fn party(&self) -> Site {
        self.party
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn record_teleport(&mut self, round: u32, leg: TeleportLeg, outcomes: Vec<BellOutcome>) {
        self.push(Record::Teleport {
            round,
            leg,
            outcomes,
        });
    }

    pub fn record_channel_choice(&mut self, round: u32, address: ChannelAddress) {
        self.push(Record::ChannelChoice { round, address });
    }

    pub fn record_z_measurement(&mut self, round: u32, bits: Vec<u8>) {
        self.push(Record::ZMeasurement { round, bits });
    }

    pub fn record_basis_choice(&mut self, round: u32, axis: MeasureAxis) {
        self.push(Record::BasisChoice { round, axis });
    }

    /// The outcomes of this party's round-`round` teleport on `leg`,
    /// if recorded. When a round holds several records of the same leg the
    /// last one wins (there is at most one per leg by construction).
    pub fn teleport_outcomes(&self, round: u32, leg: TeleportLeg) -> Option<&[BellOutcome]> {
        self.records.iter().rev().find_map(|r| match r {
            Record::Teleport {
                round: rr,
                leg: rl,
                outcomes,
            } if *rr == round && *rl == leg => Some(outcomes.as_slice()),
            _ => None,
        })
    }

    pub fn z_measurement(&self) -> Option<(u32, &[u8])> {
        self.records.iter().find_map(|r| match r {
            Record::ZMeasurement { round, bits } => Some((*round, bits.as_slice())),
            _ => None,
        })
    }

    pub fn channel_choices(&self) -> Vec<(u32, &ChannelAddress)> {
        self.records
            .iter()
            .filter_map(|r| match r {
                Record::ChannelChoice { round, address } => Some((*round, address)),
                _ => None,
            })
            .collect()
    }

    /// Largest round tag appearing in the records (0 when empty).
    pub fn last_round(&self) -> u32 {
        self.records.iter().map(Record::round).max().unwrap_or(0)
    }

    /// Every round 1..=last carries at least one record.
    pub fn rounds_contiguous(&self) -> bool {
        let last = self.last_round();
        (1..=last).all(|r| self.records.iter().any(|rec| rec.round() == r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_gap_is_detected() {
        let mut t = Transcript::new(Site::B);
        t.record_teleport(1, TeleportLeg::Initial, vec![BellOutcome::PsiMinus]);
        t.record_teleport(3, TeleportLeg::Return, vec![BellOutcome::PsiPlus]);
        assert!(!t.rounds_contiguous());
        t.record_teleport(2, TeleportLeg::Return, vec![BellOutcome::PhiPlus]);
        assert!(t.rounds_contiguous());
    }

    #[test]
    fn lookups_find_the_right_records() {
        let mut t = Transcript::new(Site::A);
        t.record_teleport(1, TeleportLeg::Forward, vec![BellOutcome::PhiMinus]);
        t.record_teleport(2, TeleportLeg::Forward, vec![BellOutcome::PsiPlus]);
        t.record_z_measurement(2, vec![0, 1]);
        assert_eq!(
            t.teleport_outcomes(2, TeleportLeg::Forward),
            Some(&[BellOutcome::PsiPlus][..])
        );
        assert_eq!(t.z_measurement(), Some((2, &[0u8, 1][..])));
        assert_eq!(t.last_round(), 2);
    }
}
