//! Event-level simulation of the two-party protocol.
//!
//! The register starts at Alice. Each factor of the scheduling composite is
//! executed by the party holding the matching capability, and the register
//! travels to that party first. Travel is noiseless.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::StateVector;
use crate::scheduling::{
    scheduling_circuit, AmplifierConfig, Factor, FactorTag, RunOutcome, Schedule,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PartyRole {
    Alice,
    Bob,
}

impl PartyRole {
    fn other(self) -> PartyRole {
        match self {
            PartyRole::Alice => PartyRole::Bob,
            PartyRole::Bob => PartyRole::Alice,
        }
    }
}

impl fmt::Display for PartyRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartyRole::Alice => "Alice",
            PartyRole::Bob => "Bob",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Party {
    role: PartyRole,
    schedule: Schedule,
    capabilities: BTreeSet<FactorTag>,
}

impl Party {
    /// Alice runs the basis transform, `I_0`, her own oracle and any opaque amplifier.
    pub fn alice(schedule: Schedule) -> Self {
        Party {
            role: PartyRole::Alice,
            schedule,
            capabilities: [
                FactorTag::Basis,
                FactorTag::ZeroPhase,
                FactorTag::AlicePhase,
                FactorTag::Amplifier,
            ]
            .into(),
        }
    }

    /// Bob only runs his oracle `I_B`.
    pub fn bob(schedule: Schedule) -> Self {
        Party {
            role: PartyRole::Bob,
            schedule,
            capabilities: [FactorTag::BobPhase].into(),
        }
    }

    pub fn role(&self) -> PartyRole {
        self.role
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    /// Overall signs carry no information and may be applied by either party.
    pub fn can_apply(&self, tag: FactorTag) -> bool {
        tag == FactorTag::Sign || self.capabilities.contains(&tag)
    }
}

/// The shared quantum register and its current holder.
#[derive(Clone, Debug, PartialEq)]
pub struct Register {
    state: StateVector,
    location: PartyRole,
}

impl Register {
    pub fn new(state: StateVector) -> Self {
        Register {
            state,
            location: PartyRole::Alice,
        }
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn location(&self) -> PartyRole {
        self.location
    }

    pub fn send_to(&mut self, to: PartyRole) {
        self.location = to;
    }

    /// Applies `factor` on behalf of `party`, which must hold both the
    /// register and the capability.
    pub fn apply(&mut self, party: &Party, factor: &Factor) -> Result<()> {
        if party.role != self.location || !party.can_apply(factor.tag()) {
            return Err(Error::CapabilityViolation {
                operator: factor.label(),
                location: party.role.to_string(),
            });
        }
        self.state = factor.apply(&self.state)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ProtocolEvent {
    Apply {
        operator: String,
        tag: FactorTag,
        location: PartyRole,
    },
    Send {
        from: PartyRole,
        to: PartyRole,
    },
}

impl ProtocolEvent {
    fn log_fields(&self) -> (String, PartyRole) {
        match self {
            ProtocolEvent::Apply {
                operator, location, ..
            } => (operator.clone(), *location),
            ProtocolEvent::Send {
                to: PartyRole::Bob, ..
            } => ("send".into(), PartyRole::Bob),
            ProtocolEvent::Send { to, .. } => ("return".into(), *to),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolTranscript {
    pub events: Vec<ProtocolEvent>,
    /// Alice-to-Bob sends.
    pub exchanges: usize,
    pub final_outcome: RunOutcome,
    pub n_qubits: usize,
}

impl ProtocolTranscript {
    pub fn bob_phase_events(&self) -> usize {
        self.events
            .iter()
            .filter(|e| {
                matches!(
                    e,
                    ProtocolEvent::Apply {
                        tag: FactorTag::BobPhase,
                        ..
                    }
                )
            })
            .count()
    }

    /// Qubits carried to Bob over the whole run.
    pub fn qubits_sent(&self) -> usize {
        self.exchanges * self.n_qubits
    }

    /// Replays the event stream and checks locality and send accounting.
    pub fn validate(&self) -> Result<()> {
        let alice = Party::alice(Schedule::new(1 << self.n_qubits, [])?);
        let bob = Party::bob(Schedule::new(1 << self.n_qubits, [])?);
        let mut location = PartyRole::Alice;
        let mut sends = 0;
        for (step, event) in self.events.iter().enumerate() {
            match event {
                ProtocolEvent::Send { from, to } => {
                    if *from != location || *to != location.other() {
                        return Err(Error::InvalidArgument(format!(
                            "step {step}: send {from} -> {to} while register is at {location}"
                        )));
                    }
                    if *to == PartyRole::Bob {
                        sends += 1;
                    }
                    location = *to;
                }
                ProtocolEvent::Apply {
                    operator,
                    tag,
                    location: at,
                } => {
                    let party = if *at == PartyRole::Alice {
                        &alice
                    } else {
                        &bob
                    };
                    if *at != location || !party.can_apply(*tag) {
                        return Err(Error::CapabilityViolation {
                            operator: operator.clone(),
                            location: at.to_string(),
                        });
                    }
                }
            }
        }
        if sends != self.exchanges || sends != self.bob_phase_events() {
            return Err(Error::InvalidArgument(format!(
                "exchange count {} disagrees with {} sends and {} I_B events",
                self.exchanges,
                sends,
                self.bob_phase_events()
            )));
        }
        Ok(())
    }

    /// Line log `<step> <operator> <location>` followed by a summary record.
    pub fn to_log(&self) -> String {
        let mut out = String::new();
        for (step, event) in self.events.iter().enumerate() {
            let (op, loc) = event.log_fields();
            out.push_str(&format!("{} {} {}\n", step + 1, op, loc));
        }
        let o = &self.final_outcome;
        out.push_str(&format!(
            "summary exchanges={} qubits_sent={} events={} top_slot={} top_probability={:.12} success_probability={:.12}\n",
            self.exchanges,
            self.qubits_sent(),
            self.events.len(),
            o.top_slot,
            o.top_probability,
            o.success_probability
        ));
        out
    }
}

/// Executes the scheduling composite as a sequence of party actions.
pub fn simulate_protocol(
    alice: &Party,
    bob: &Party,
    cfg: &AmplifierConfig,
) -> Result<ProtocolTranscript> {
    let circuit = scheduling_circuit(&alice.schedule, &bob.schedule, cfg)?;
    let n = circuit.n_qubits();
    let mut register = Register::new(StateVector::zero(n));
    let mut events = Vec::new();
    let mut exchanges = 0;

    for factor in circuit.factors() {
        let executor = if factor.tag() == FactorTag::Sign {
            if register.location() == PartyRole::Alice {
                alice
            } else {
                bob
            }
        } else if alice.can_apply(factor.tag()) {
            alice
        } else if bob.can_apply(factor.tag()) {
            bob
        } else {
            return Err(Error::CapabilityViolation {
                operator: factor.label(),
                location: register.location().to_string(),
            });
        };
        if executor.role != register.location() {
            events.push(ProtocolEvent::Send {
                from: register.location(),
                to: executor.role,
            });
            if executor.role == PartyRole::Bob {
                exchanges += 1;
            }
            register.send_to(executor.role);
        }
        register.apply(executor, factor)?;
        events.push(ProtocolEvent::Apply {
            operator: factor.label(),
            tag: factor.tag(),
            location: executor.role,
        });
    }
    if register.location() != PartyRole::Alice {
        events.push(ProtocolEvent::Send {
            from: PartyRole::Bob,
            to: PartyRole::Alice,
        });
        register.send_to(PartyRole::Alice);
    }

    let final_outcome = RunOutcome::from_state(
        register.state,
        alice.schedule.intersection(&bob.schedule),
        exchanges,
    );
    Ok(ProtocolTranscript {
        events,
        exchanges,
        final_outcome,
        n_qubits: n,
    })
}

/// Bits exchanged by the classical protocol in which Alice sends her string.
pub fn classical_baseline(alice: &Schedule, bob: &Schedule) -> Result<usize> {
    if alice.n_slots() != bob.n_slots() {
        return Err(Error::DimensionMismatch {
            expected: alice.n_slots(),
            found: bob.n_slots(),
        });
    }
    Ok(alice.n_slots())
}
