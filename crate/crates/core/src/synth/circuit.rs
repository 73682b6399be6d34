//! The two-bus test circuit and its switching actions.

use super::network::{Element, Network, SourceWaveform, State, Terminal};
use super::{fault_topology, CircuitConfig, EventClass, FaultSpec, SynthParams};
use crate::error::Result;

// Node layout: sending bus, fault point and load bus per phase, then the
// floating load neutral and the common fault node.
const fn sending(p: usize) -> usize {
    p
}
const fn fault_point(p: usize) -> usize {
    3 + p
}
const fn load_bus(p: usize) -> usize {
    6 + p
}
const LOAD_NEUTRAL: usize = 9;
const FAULT_COMMON: usize = 10;
const NODES: usize = 11;

/// Fault location used for switching events, where the line is never tapped.
const UNFAULTED_SPLIT: f64 = 0.5;

/// Branch indices of the circuit's elements, per phase where applicable.
#[derive(Debug, Clone)]
pub struct BranchMap {
    pub source: [usize; 3],
    /// Line section between the breaker and the fault point. Opening a
    /// breaker pole opens this branch.
    pub breaker_side: [usize; 3],
    pub load_side: [usize; 3],
    pub shunt: [usize; 3],
    pub load: [usize; 3],
    pub fault: [Option<usize>; 3],
    pub fault_ground: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TwoBusCircuit {
    pub net: Network,
    pub branches: BranchMap,
    pub fault: FaultSpec,
}

impl TwoBusCircuit {
    /// Builds the pre-event topology for `class`: healthy with the breaker
    /// closed, or breaker open for line energizing. Fault branches are
    /// created open.
    pub fn build(config: &CircuitConfig, class: EventClass, params: &SynthParams) -> Result<Self> {
        config.validate()?;
        let fault = fault_topology(class);
        let mut net = Network::new(NODES, config.dt());
        let omega = config.omega();
        let amplitude = config.phase_peak();

        let split = params.fault.as_ref().map_or(UNFAULTED_SPLIT, |f| f.location_fraction);
        let breaker_closed = class != EventClass::LineEnergize;
        let load = &params.load;

        let mut map = BranchMap {
            source: [0; 3],
            breaker_side: [0; 3],
            load_side: [0; 3],
            shunt: [0; 3],
            load: [0; 3],
            fault: [None; 3],
            fault_ground: None,
        };

        for p in 0..3 {
            let emf = net.add_source(SourceWaveform::Cosine {
                amplitude,
                omega,
                phase: -2.0 * std::f64::consts::PI / 3.0 * p as f64,
            });
            let s = Terminal::Node(sending(p));
            let f = Terminal::Node(fault_point(p));
            let l = Terminal::Node(load_bus(p));
            let k = load.perturbation[p];

            map.source[p] = net.add_branch(
                emf,
                s,
                Element::SeriesRl {
                    r: config.source_resistance,
                    l: config.source_inductance,
                },
                true,
            );
            map.breaker_side[p] = net.add_branch(
                s,
                f,
                Element::SeriesRl {
                    r: config.line_resistance * split,
                    l: config.line_inductance * split,
                },
                breaker_closed,
            );
            map.load_side[p] = net.add_branch(
                f,
                l,
                Element::SeriesRl {
                    r: config.line_resistance * (1.0 - split),
                    l: config.line_inductance * (1.0 - split),
                },
                true,
            );
            map.shunt[p] = net.add_branch(l, Terminal::Ground, Element::Capacitor { c: load.capacitance * k }, true);
            map.load[p] = net.add_branch(
                l,
                Terminal::Node(LOAD_NEUTRAL),
                Element::SeriesRl {
                    r: load.resistance * k,
                    l: load.inductance * k,
                },
                true,
            );
        }

        if let Some(fp) = &params.fault {
            for p in 0..3 {
                if fault.phases[p] {
                    map.fault[p] = Some(net.add_branch(
                        Terminal::Node(fault_point(p)),
                        Terminal::Node(FAULT_COMMON),
                        Element::Resistor {
                            r: fp.phase_fault_resistance,
                        },
                        false,
                    ));
                }
            }
            if fault.grounded {
                map.fault_ground = Some(net.add_branch(
                    Terminal::Node(FAULT_COMMON),
                    Terminal::Ground,
                    Element::Resistor {
                        r: fp.ground_resistance,
                    },
                    false,
                ));
            }
        }

        Ok(Self {
            net,
            branches: map,
            fault,
        })
    }

    /// Sending-end phase voltages and the currents through the breaker.
    pub fn measure(&self, state: &State) -> ([f64; 3], [f64; 3]) {
        let v = [0, 1, 2].map(|p| state.node_voltages[sending(p)]);
        let i = [0, 1, 2].map(|p| state.branch_currents[self.branches.breaker_side[p]]);
        (v, i)
    }

    pub fn apply_fault(&mut self, state: &mut State) {
        let ids: Vec<usize> = self.branches.fault.iter().flatten().chain(&self.branches.fault_ground).copied().collect();
        for b in ids {
            self.net.set_closed(b, true, state);
        }
    }

    pub fn close_breaker(&mut self, state: &mut State) {
        for p in 0..3 {
            self.net.set_closed(self.branches.breaker_side[p], true, state);
        }
    }

    pub fn pole_closed(&self, phase: usize) -> bool {
        self.net.is_closed(self.branches.breaker_side[phase])
    }

    pub fn open_pole(&mut self, phase: usize, state: &mut State) {
        self.net.set_closed(self.branches.breaker_side[phase], false, state);
    }
}

/// Pre-event state: the sinusoidal steady state of the pre-event topology at
/// `t = 0`. With the breaker open (line energizing) the line and load carry
/// no current and no charge.
pub fn init_steady_state(circuit: &TwoBusCircuit, config: &CircuitConfig) -> Result<State> {
    let mut state = circuit.net.steady_state(config.omega())?;
    state.time = 0.0;
    Ok(state)
}
