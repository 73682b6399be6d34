//! Labeled three-phase event synthesis.
//!
//! Each record is produced by simulating a two-bus circuit: an ideal
//! three-phase EMF behind a source R-L, a sending-end breaker, a series R-L
//! line split at the fault point, and a load bus carrying a shunt capacitance
//! to ground and a floating-wye R-L load. Voltages and currents are measured
//! at the sending-end bus, on the source side of the breaker.
//!
//! A record is a pure function of `(config, class, master_seed, index)`.

pub mod circuit;
pub mod network;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

pub use circuit::{init_steady_state, TwoBusCircuit};

pub const CHANNELS: usize = 6;
pub const SAMPLES_PER_CHANNEL: usize = 1000;
pub const CHANNEL_NAMES: [&str; CHANNELS] = ["Va", "Vb", "Vc", "Ia", "Ib", "Ic"];

/// The 13 event classes. The discriminant is the stable integer code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum EventClass {
    AG = 0,
    BG,
    CG,
    ABG,
    ACG,
    BCG,
    ABCG,
    AB,
    AC,
    BC,
    ABC,
    #[serde(rename = "LINE_ENERGIZE")]
    LineEnergize,
    #[serde(rename = "LINE_DEENERGIZE")]
    LineDeenergize,
}

impl EventClass {
    pub const COUNT: usize = 13;

    pub const ALL: [EventClass; Self::COUNT] = [
        EventClass::AG,
        EventClass::BG,
        EventClass::CG,
        EventClass::ABG,
        EventClass::ACG,
        EventClass::BCG,
        EventClass::ABCG,
        EventClass::AB,
        EventClass::AC,
        EventClass::BC,
        EventClass::ABC,
        EventClass::LineEnergize,
        EventClass::LineDeenergize,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<Self> {
        Self::ALL
            .get(code)
            .copied()
            .ok_or_else(|| Error::invalid(format!("class code {code} outside 0..13")))
    }

    pub fn name(self) -> &'static str {
        match self {
            EventClass::AG => "AG",
            EventClass::BG => "BG",
            EventClass::CG => "CG",
            EventClass::ABG => "ABG",
            EventClass::ACG => "ACG",
            EventClass::BCG => "BCG",
            EventClass::ABCG => "ABCG",
            EventClass::AB => "AB",
            EventClass::AC => "AC",
            EventClass::BC => "BC",
            EventClass::ABC => "ABC",
            EventClass::LineEnergize => "LINE_ENERGIZE",
            EventClass::LineDeenergize => "LINE_DEENERGIZE",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown event class '{name}'")))
    }

    pub fn is_fault(self) -> bool {
        self.code() <= EventClass::ABC.code()
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Faulted phases and whether the fault has a path to ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultSpec {
    /// Indexed A, B, C.
    pub phases: [bool; 3],
    pub grounded: bool,
}

impl FaultSpec {
    pub fn phase_count(&self) -> usize {
        self.phases.iter().filter(|&&p| p).count()
    }
}

/// Phase letters in the class name select the phases; a trailing `G` adds
/// the ground path. Switching events have no faulted phase.
pub fn fault_topology(class: EventClass) -> FaultSpec {
    if !class.is_fault() {
        return FaultSpec {
            phases: [false; 3],
            grounded: false,
        };
    }
    let name = class.name();
    let (letters, grounded) = match name.strip_suffix('G') {
        Some(rest) => (rest, true),
        None => (name, false),
    };
    FaultSpec {
        phases: [letters.contains('A'), letters.contains('B'), letters.contains('C')],
        grounded,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub nominal_voltage_ll: f64,
    pub frequency: f64,
    pub source_resistance: f64,
    pub source_inductance: f64,
    pub line_resistance: f64,
    pub line_inductance: f64,
    pub sample_rate: f64,
    pub duration: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            nominal_voltage_ll: 380e3,
            frequency: 50.0,
            source_resistance: 1.0,
            source_inductance: 30e-3,
            line_resistance: 3.0,
            line_inductance: 100e-3,
            sample_rate: 4000.0,
            duration: 0.25,
        }
    }
}

impl CircuitConfig {
    pub fn validate(&self) -> Result<()> {
        let samples = self.sample_rate * self.duration;
        if (samples - SAMPLES_PER_CHANNEL as f64).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "sample_rate x duration must be {SAMPLES_PER_CHANNEL}, got {samples}"
            )));
        }
        let positive = [
            ("nominal_voltage_ll", self.nominal_voltage_ll),
            ("frequency", self.frequency),
            ("source_resistance", self.source_resistance),
            ("source_inductance", self.source_inductance),
            ("line_resistance", self.line_resistance),
            ("line_inductance", self.line_inductance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be strictly positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency
    }

    /// Peak phase-to-neutral EMF.
    pub fn phase_peak(&self) -> f64 {
        self.nominal_voltage_ll * (2.0f64 / 3.0).sqrt()
    }
}

/// Sampling ranges for the randomized generation parameters (all uniform).
pub mod ranges {
    pub const EVENT_TIME: (f64, f64) = (0.04, 0.10);
    pub const PHASE_FAULT_RESISTANCE: (f64, f64) = (0.001, 50.0);
    pub const GROUND_RESISTANCE: (f64, f64) = (0.001, 50.0);
    pub const FAULT_LOCATION: (f64, f64) = (0.05, 0.95);
    pub const BREAKER_DELAY: (f64, f64) = (0.05, 0.10);
    pub const LOAD_RESISTANCE: (f64, f64) = (500.0, 2000.0);
    pub const LOAD_INDUCTANCE: (f64, f64) = (0.5, 3.0);
    pub const LOAD_CAPACITANCE: (f64, f64) = (0.5e-6, 5e-6);
    pub const LOAD_PERTURBATION: (f64, f64) = (0.98, 1.02);

    pub(crate) fn contains(range: (f64, f64), v: f64) -> bool {
        v >= range.0 && v <= range.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultParams {
    pub phase_fault_resistance: f64,
    pub ground_resistance: f64,
    pub location_fraction: f64,
    pub breaker_delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadParams {
    pub resistance: f64,
    pub inductance: f64,
    pub capacitance: f64,
    /// Per-phase multipliers applied to the load R, L and C.
    pub perturbation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub event_time: f64,
    /// Present exactly for the eleven fault classes.
    pub fault: Option<FaultParams>,
    pub load: LoadParams,
    pub record_index: u64,
    pub master_seed: u64,
}

impl SynthParams {
    pub fn validate(&self, class: EventClass, config: &CircuitConfig) -> Result<()> {
        use ranges::*;
        let check = |name: &str, range: (f64, f64), v: f64| -> Result<()> {
            if contains(range, v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} outside [{}, {}]", range.0, range.1)))
            }
        };
        check("event_time", EVENT_TIME, self.event_time)?;
        check("load_resistance", LOAD_RESISTANCE, self.load.resistance)?;
        check("load_inductance", LOAD_INDUCTANCE, self.load.inductance)?;
        check("load_capacitance", LOAD_CAPACITANCE, self.load.capacitance)?;
        for &k in &self.load.perturbation {
            check("load_perturbation", LOAD_PERTURBATION, k)?;
        }
        match (&self.fault, class.is_fault()) {
            (Some(f), true) => {
                check("phase_fault_resistance", PHASE_FAULT_RESISTANCE, f.phase_fault_resistance)?;
                check("ground_resistance", GROUND_RESISTANCE, f.ground_resistance)?;
                check("fault_location_fraction", FAULT_LOCATION, f.location_fraction)?;
                check("breaker_delay", BREAKER_DELAY, f.breaker_delay)?;
                if self.event_time + f.breaker_delay >= config.duration {
                    return Err(Error::invalid("event_time + breaker_delay must end inside the record"));
                }
            }
            (None, false) => {}
            (Some(_), false) => {
                return Err(Error::invalid(format!("fault parameters given for switching class {class}")))
            }
            (None, true) => return Err(Error::invalid(format!("fault class {class} requires fault parameters"))),
        }
        Ok(())
    }
}

/// Draws one parameter set. The stream depends only on
/// `(master_seed, class, index)`; the draw order is fixed and the fault
/// parameters are drawn (and discarded) for switching classes as well.
pub fn sample_params(class: EventClass, master_seed: u64, index: u64) -> SynthParams {
    use ranges::*;
    let mut rng = SplitMix64::new(derive_seed(master_seed, &[class.code() as u64, index]));
    let mut draw = |range: (f64, f64)| rng.uniform(range.0, range.1);
    let event_time = draw(EVENT_TIME);
    let load = LoadParams {
        resistance: draw(LOAD_RESISTANCE),
        inductance: draw(LOAD_INDUCTANCE),
        capacitance: draw(LOAD_CAPACITANCE),
        perturbation: [
            draw(LOAD_PERTURBATION),
            draw(LOAD_PERTURBATION),
            draw(LOAD_PERTURBATION),
        ],
    };
    let fault = FaultParams {
        phase_fault_resistance: draw(PHASE_FAULT_RESISTANCE),
        ground_resistance: draw(GROUND_RESISTANCE),
        location_fraction: draw(FAULT_LOCATION),
        breaker_delay: draw(BREAKER_DELAY),
    };
    SynthParams {
        event_time,
        fault: class.is_fault().then_some(fault),
        load,
        record_index: index,
        master_seed,
    }
}

/// One simulated event: 6 channels x 1000 samples, channel-major, in the
/// order Va, Vb, Vc, Ia, Ib, Ic (volts and amperes).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformRecord {
    pub id: u64,
    pub label: EventClass,
    pub params: SynthParams,
    pub samples: Vec<f64>,
}

impl WaveformRecord {
    pub fn new(id: u64, label: EventClass, params: SynthParams, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != CHANNELS * SAMPLES_PER_CHANNEL {
            return Err(Error::invalid(format!(
                "record needs {} samples, got {}",
                CHANNELS * SAMPLES_PER_CHANNEL,
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at flat index {i}")));
        }
        Ok(Self {
            id,
            label,
            params,
            samples,
        })
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.samples[c * SAMPLES_PER_CHANNEL..(c + 1) * SAMPLES_PER_CHANNEL]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(SAMPLES_PER_CHANNEL)
    }
}

/// Runs the event timeline for one record.
///
/// Faults are applied at `event_time`; the breaker trips at
/// `event_time + breaker_delay` and each pole opens at the first sign change
/// of its current after the trip. Energizing closes all three poles at
/// `event_time`; de-energizing opens each pole at its first current zero
/// after `event_time`. There is no reclosing.
pub fn simulate(config: &CircuitConfig, class: EventClass, params: &SynthParams) -> Result<WaveformRecord> {
    config.validate()?;
    params.validate(class, config)?;

    let dt = config.dt();
    let to_sample = |t: f64| (t / dt).round() as usize;
    let event_sample = to_sample(params.event_time);
    let trip_sample = match (&params.fault, class) {
        (Some(f), _) => Some(to_sample(params.event_time + f.breaker_delay)),
        (None, EventClass::LineDeenergize) => Some(event_sample),
        _ => None,
    };

    let mut circuit = TwoBusCircuit::build(config, class, params)?;
    let mut state = init_steady_state(&circuit, config)?;
    let mut samples = vec![0.0; CHANNELS * SAMPLES_PER_CHANNEL];
    let mut prev_current = write_sample(0, &circuit, &state, &mut samples);

    for n in 1..SAMPLES_PER_CHANNEL {
        if n == event_sample {
            match class {
                EventClass::LineEnergize => circuit.close_breaker(&mut state),
                EventClass::LineDeenergize => {}
                _ => circuit.apply_fault(&mut state),
            }
        }
        circuit.net.step(&mut state)?;
        let current = write_sample(n, &circuit, &state, &mut samples);

        if let Some(trip) = trip_sample {
            // Sign change between consecutive samples, both at or after the trip.
            if n > trip {
                for p in 0..3 {
                    let crossed = prev_current[p] == 0.0 || prev_current[p].signum() != current[p].signum();
                    if circuit.pole_closed(p) && crossed {
                        circuit.open_pole(p, &mut state);
                    }
                }
            }
        }
        prev_current = current;
    }

    WaveformRecord::new(params.record_index, class, params.clone(), samples)
}

fn write_sample(n: usize, circuit: &TwoBusCircuit, state: &network::State, out: &mut [f64]) -> [f64; 3] {
    let (v, i) = circuit.measure(state);
    for p in 0..3 {
        out[p * SAMPLES_PER_CHANNEL + n] = v[p];
        out[(3 + p) * SAMPLES_PER_CHANNEL + n] = i[p];
    }
    i
}

/// Generates one record for `(class, index)` under `master_seed`.
pub fn generate_record(config: &CircuitConfig, class: EventClass, master_seed: u64, index: u64) -> Result<WaveformRecord> {
    let params = sample_params(class, master_seed, index);
    simulate(config, class, &params)
}

/// Generates `per_class` records for each class, class-major. Record ids are
/// positions in the returned vector. Runs in parallel; the output does not
/// depend on the number of workers.
pub fn generate_dataset(config: &CircuitConfig, master_seed: u64, per_class: usize) -> Result<Vec<WaveformRecord>> {
    if per_class == 0 {
        return Err(Error::invalid("per_class must be positive"));
    }
    let jobs: Vec<(EventClass, u64)> = EventClass::ALL
        .iter()
        .flat_map(|&c| (0..per_class as u64).map(move |i| (c, i)))
        .collect();
    let mut records = jobs
        .par_iter()
        .map(|&(c, i)| generate_record(config, c, master_seed, i))
        .collect::<Result<Vec<_>>>()?;
    for (id, r) in records.iter_mut().enumerate() {
        r.id = id as u64;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_codes_follow_canonical_order() {
        for (i, c) in EventClass::ALL.iter().enumerate() {
            assert_eq!(c.code(), i);
            assert_eq!(EventClass::from_code(i).unwrap(), *c);
            assert_eq!(EventClass::from_name(c.name()).unwrap(), *c);
            assert_eq!(c.is_fault(), i <= 10);
        }
        assert!(EventClass::from_code(13).is_err());
        assert!(EventClass::from_name("XG").is_err());
    }

    #[test]
    fn fault_topology_naming_rule() {
        let t = fault_topology(EventClass::AG);
        assert_eq!((t.phases, t.grounded), ([true, false, false], true));
        let t = fault_topology(EventClass::BC);
        assert_eq!((t.phases, t.grounded), ([false, true, true], false));
        let t = fault_topology(EventClass::ABCG);
        assert_eq!((t.phases, t.grounded), ([true, true, true], true));
        for c in [EventClass::LineEnergize, EventClass::LineDeenergize] {
            let t = fault_topology(c);
            assert_eq!((t.phases, t.grounded), ([false; 3], false));
        }
        // Bijective over the fault classes.
        let mut seen = std::collections::HashSet::new();
        for c in EventClass::ALL.iter().filter(|c| c.is_fault()) {
            let t = fault_topology(*c);
            assert!(t.phase_count() >= 1);
            assert!(seen.insert((t.phases, t.grounded)));
        }
    }

    #[test]
    fn sample_params_deterministic_and_in_range() {
        let cfg = CircuitConfig::default();
        assert_eq!(sample_params(EventClass::AG, 42, 0), sample_params(EventClass::AG, 42, 0));
        assert_ne!(sample_params(EventClass::AG, 42, 0), sample_params(EventClass::AG, 42, 1));
        for c in EventClass::ALL {
            for i in 0..50 {
                let p = sample_params(c, 7, i);
                p.validate(c, &cfg).unwrap();
                assert_eq!(p.fault.is_some(), c.is_fault());
            }
        }
    }

    #[test]
    fn class_param_mismatch_rejected() {
        let cfg = CircuitConfig::default();
        let mut p = sample_params(EventClass::AG, 1, 0);
        assert!(matches!(
            simulate(&cfg, EventClass::LineEnergize, &p),
            Err(Error::InvalidArgument(_))
        ));
        p.fault = None;
        assert!(matches!(simulate(&cfg, EventClass::AG, &p), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn out_of_range_params_rejected() {
        let cfg = CircuitConfig::default();
        let mut p = sample_params(EventClass::AB, 1, 0);
        p.load.perturbation[1] = 1.5;
        assert!(simulate(&cfg, EventClass::AB, &p).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = CircuitConfig::default();
        cfg.validate().unwrap();
        cfg.duration = 0.2;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = CircuitConfig {
            line_inductance: 0.0,
            ..CircuitConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn record_shape() {
        let cfg = CircuitConfig::default();
        for c in EventClass::ALL {
            let r = generate_record(&cfg, c, 42, 3).unwrap();
            assert_eq!(r.samples.len(), 6000);
            assert_eq!(r.channels().count(), 6);
            assert!(r.samples.iter().all(|v| v.is_finite()));
        }
    }
}
