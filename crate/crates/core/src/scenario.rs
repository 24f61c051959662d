//! Scenario descriptors, the built-in two-spin scenarios and their reports.
//!
//! A descriptor is a TOML or JSON table:
//!
//! ```toml
//! n_slots = 4
//! alice_available = [0, 1]
//! bob_available = [0, 3]
//! phase_degrees = 90          # optional, default 90
//! variant = "generalized"     # or "original"
//! miscalibration_fraction = 0.02  # optional
//! output_path = "q1.json"     # optional
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::gates::{u_operator, walsh_hadamard};
use crate::linalg::{to_density, DensityMatrix, MatrixJson, StateVector};
use crate::nmr::{
    apply_angle_miscalibration, DelayRealization, PulseSequence, RegistryGate, SpinSystem,
};
use crate::protocol::{classical_baseline, simulate_protocol, Party, ProtocolTranscript};
use crate::scheduling::{original_config, AmplifierConfig, Schedule};
use crate::tomography::{error_report, simulated_tomography, standard_settings, Fig1Entry};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Generalized,
    Original,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Generalized => "generalized",
            Variant::Original => "original",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generalized" => Ok(Variant::Generalized),
            "original" => Ok(Variant::Original),
            _ => Err(invalid(
                "variant",
                format!("expected \"generalized\" or \"original\", got {s:?}"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioSpec {
    pub name: Option<String>,
    pub n_slots: usize,
    pub alice_available: Vec<usize>,
    pub bob_available: Vec<usize>,
    pub phase_degrees: f64,
    pub variant: Variant,
    pub miscalibration_fraction: Option<f64>,
    pub output_path: Option<String>,
}

const KEYS: [&str; 8] = [
    "name",
    "n_slots",
    "alice_available",
    "bob_available",
    "phase_degrees",
    "variant",
    "miscalibration_fraction",
    "output_path",
];

pub const DEFAULT_PHASE_DEGREES: f64 = 90.0;

/// A run passes when it puts at least this much probability on a unique common slot.
pub const SUCCESS_THRESHOLD: f64 = 0.99;

fn invalid(key: &str, message: impl Into<String>) -> Error {
    Error::InvalidScenario {
        key: key.to_string(),
        message: message.into(),
    }
}

fn get_uint(obj: &Map<String, Value>, key: &str) -> Result<usize> {
    let v = obj.get(key).ok_or_else(|| invalid(key, "missing"))?;
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| invalid(key, format!("expected a nonnegative integer, got {v}")))
}

fn get_slots(obj: &Map<String, Value>, key: &str) -> Result<Vec<usize>> {
    let v = obj.get(key).ok_or_else(|| invalid(key, "missing"))?;
    let items = v
        .as_array()
        .ok_or_else(|| invalid(key, format!("expected an array of slot indices, got {v}")))?;
    items
        .iter()
        .map(|x| {
            x.as_u64()
                .map(|k| k as usize)
                .ok_or_else(|| invalid(key, format!("expected a nonnegative integer, got {x}")))
        })
        .collect()
}

fn get_f64(obj: &Map<String, Value>, key: &str) -> Result<Option<f64>> {
    obj.get(key)
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| invalid(key, format!("expected a number, got {v}")))
        })
        .transpose()
}

fn get_str(obj: &Map<String, Value>, key: &str) -> Result<Option<String>> {
    obj.get(key)
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| invalid(key, format!("expected a string, got {v}")))
        })
        .transpose()
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ScenarioSpec {
    pub fn new(n_slots: usize, alice: &[usize], bob: &[usize]) -> Self {
        ScenarioSpec {
            name: None,
            n_slots,
            alice_available: alice.to_vec(),
            bob_available: bob.to_vec(),
            phase_degrees: DEFAULT_PHASE_DEGREES,
            variant: Variant::Generalized,
            miscalibration_fraction: None,
            output_path: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        let value = serde_json::to_value(table).map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        Self::from_value(&value)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::from_value(&value)
    }

    /// Reads a descriptor; `.json` files are JSON, anything else TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let is_json = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
        let mut spec = if is_json {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        if spec.name.is_none() {
            spec.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(spec)
    }

    fn from_value(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| invalid("<root>", "expected a table"))?;
        if let Some(key) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(invalid(key, "unknown key"));
        }
        let spec = ScenarioSpec {
            name: get_str(obj, "name")?,
            n_slots: get_uint(obj, "n_slots")?,
            alice_available: get_slots(obj, "alice_available")?,
            bob_available: get_slots(obj, "bob_available")?,
            phase_degrees: get_f64(obj, "phase_degrees")?.unwrap_or(DEFAULT_PHASE_DEGREES),
            variant: get_str(obj, "variant")?
                .map(|s| s.parse())
                .transpose()?
                .unwrap_or_default(),
            miscalibration_fraction: get_f64(obj, "miscalibration_fraction")?,
            output_path: get_str(obj, "output_path")?,
        };
        spec.schedules()?;
        Ok(spec)
    }

    /// Validated Alice and Bob schedules.
    pub fn schedules(&self) -> Result<(Schedule, Schedule)> {
        if self.n_slots < 2 || !self.n_slots.is_power_of_two() {
            return Err(invalid(
                "n_slots",
                format!("must be a power of two >= 2, got {}", self.n_slots),
            ));
        }
        let schedule = |key: &str, slots: &[usize]| {
            if let Some(bad) = slots.iter().find(|&&k| k >= self.n_slots) {
                return Err(invalid(
                    key,
                    format!("slot {bad} out of range for {} slots", self.n_slots),
                ));
            }
            Schedule::new(self.n_slots, slots.iter().copied())
                .map_err(|e| invalid(key, e.to_string()))
        };
        if !self.phase_degrees.is_finite() {
            return Err(invalid("phase_degrees", "must be finite"));
        }
        if let Some(f) = self.miscalibration_fraction {
            if f.is_nan() || f.abs() >= 1.0 {
                return Err(invalid(
                    "miscalibration_fraction",
                    format!("must satisfy |f| < 1, got {f}"),
                ));
            }
        }
        Ok((
            schedule("alice_available", &self.alice_available)?,
            schedule("bob_available", &self.bob_available)?,
        ))
    }

    /// Generalized runs use `U` on two qubits and Walsh-Hadamard otherwise.
    pub fn config(&self) -> Result<AmplifierConfig> {
        let (alice, _) = self.schedules()?;
        match self.variant {
            Variant::Original => original_config(&alice),
            Variant::Generalized => {
                let n = alice.n_qubits();
                let (basis, name) = if n == 2 {
                    (u_operator(), "U")
                } else {
                    (walsh_hadamard(n), "W")
                };
                Ok(AmplifierConfig::generalized(
                    basis,
                    name,
                    self.phase_degrees.to_radians(),
                ))
            }
        }
    }

    /// Pulse program in time order, when every factor has a registry realization.
    pub fn pulse_program(&self) -> Result<Option<PulseSequence>> {
        let (alice, bob) = self.schedules()?;
        if self.variant != Variant::Generalized
            || alice.n_slots() != 4
            || self.phase_degrees != 90.0
        {
            return Ok(None);
        }
        let (g, g_inv) = match alice.available().as_slice() {
            [0, 1] => (
                RegistryGate::G12.template(),
                RegistryGate::G12Inv.template(),
            ),
            [2, 3] => (
                RegistryGate::G34.template(),
                RegistryGate::G34.template().inverse()?,
            ),
            _ => return Ok(None),
        };
        let ib = match bob.available().as_slice() {
            [0, 1] => RegistryGate::IB12,
            [0, 3] => RegistryGate::IB14,
            [1, 2] => RegistryGate::IB23,
            [2, 3] => RegistryGate::IB34,
            _ => return Ok(None),
        };
        Ok(Some(
            g.then(&ib.template())
                .then(&g_inv)
                .then(&RegistryGate::I0.template())
                .then(&g),
        ))
    }

    fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("A{:?}/B{:?}", self.alice_available, self.bob_available))
    }
}

/// Built-in scenarios named after the outer composites.
pub const BUILTIN_NAMES: [&str; 6] = ["Q1", "Q2", "Q12", "Q3", "Q4", "Q34"];

pub fn builtin(name: &str) -> Result<ScenarioSpec> {
    let (alice, bob): (&[usize], &[usize]) = match name {
        "Q1" => (&[0, 1], &[0, 3]),
        "Q2" => (&[0, 1], &[1, 2]),
        "Q12" => (&[0, 1], &[0, 1]),
        "Q3" => (&[2, 3], &[1, 2]),
        "Q4" => (&[2, 3], &[0, 3]),
        "Q34" => (&[2, 3], &[2, 3]),
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    let mut spec = ScenarioSpec::new(4, alice, bob);
    spec.name = Some(name.to_string());
    Ok(spec)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateJson {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&StateVector> for StateJson {
    fn from(psi: &StateVector) -> Self {
        StateJson {
            re: psi.amplitudes().iter().map(|z| z.re).collect(),
            im: psi.amplitudes().iter().map(|z| z.im).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub spec: ScenarioSpec,
    pub common: Vec<usize>,
    pub top_slot: usize,
    pub top_probability: f64,
    pub success_probability: f64,
    pub distribution: Vec<f64>,
    pub final_state: StateJson,
    pub exchanges: usize,
    pub qubits_sent: usize,
    pub classical_bits: usize,
    pub transcript: Vec<String>,
    pub fig1: Fig1Entry,
    pub passed: bool,
}

/// Theory density matrix plus, when a pulse program exists and a
/// miscalibration is given, the simulated reconstruction.
pub fn fig1_entry(
    spec: &ScenarioSpec,
    final_state: &StateVector,
    miscalibration: Option<f64>,
    sys: &SpinSystem,
) -> Result<Fig1Entry> {
    let theory = to_density(final_state);
    let mut entry = Fig1Entry {
        scenario: spec.label(),
        theory: MatrixJson::from(&theory),
        simulated: None,
        error_report: None,
    };
    if let (Some(f), Some(program)) = (miscalibration, spec.pulse_program()?) {
        let simulated = simulate_program(&program, f, sys)?;
        entry.error_report = Some(error_report(&simulated, &theory)?);
        entry.simulated = Some(MatrixJson::from(&simulated));
    }
    Ok(entry)
}

/// Compiles, miscalibrates and reconstructs a pulse program on the pseudo-pure input.
pub fn simulate_program(
    program: &PulseSequence,
    miscalibration: f64,
    sys: &SpinSystem,
) -> Result<DensityMatrix> {
    let compiled = program.expand(sys, DelayRealization::Refocused);
    let pulses = apply_angle_miscalibration(&compiled, miscalibration)?;
    simulated_tomography(&pulses, sys, &standard_settings())
}

pub fn run_protocol(spec: &ScenarioSpec) -> Result<ProtocolTranscript> {
    let (alice, bob) = spec.schedules()?;
    simulate_protocol(&Party::alice(alice), &Party::bob(bob), &spec.config()?)
}

pub fn run_scenario(spec: &ScenarioSpec, sys: &SpinSystem) -> Result<ScenarioReport> {
    let (alice, bob) = spec.schedules()?;
    let transcript = run_protocol(spec)?;
    transcript.validate()?;
    let outcome = &transcript.final_outcome;
    let fig1 = fig1_entry(
        spec,
        &outcome.final_state,
        spec.miscalibration_fraction,
        sys,
    )?;
    let passed = outcome.common.len() != 1 || outcome.success_probability >= SUCCESS_THRESHOLD;
    Ok(ScenarioReport {
        scenario: spec.label(),
        spec: spec.clone(),
        common: outcome.common.clone(),
        top_slot: outcome.top_slot,
        top_probability: outcome.top_probability,
        success_probability: outcome.success_probability,
        distribution: outcome.distribution.clone(),
        final_state: StateJson::from(&outcome.final_state),
        exchanges: transcript.exchanges,
        qubits_sent: transcript.qubits_sent(),
        classical_bits: classical_baseline(&alice, &bob)?,
        transcript: transcript.to_log().lines().map(str::to_string).collect(),
        fig1,
        passed,
    })
}

/// Figure scenarios: `|00>`, `|01>` and `(|00>+|01>)/sqrt 2` outputs.
pub const FIG1_SCENARIOS: [&str; 3] = ["Q1", "Q2", "Q12"];

pub fn export_fig1(miscalibration: Option<f64>, sys: &SpinSystem) -> Result<Vec<Fig1Entry>> {
    FIG1_SCENARIOS
        .iter()
        .map(|name| {
            let spec = builtin(name)?;
            let transcript = run_protocol(&spec)?;
            fig1_entry(
                &spec,
                &transcript.final_outcome.final_state,
                miscalibration,
                sys,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn builtins_match_expected_slots() {
        let sys = SpinSystem::default();
        for (name, top, p) in [
            ("Q1", 0, 1.0),
            ("Q2", 1, 1.0),
            ("Q3", 2, 1.0),
            ("Q4", 3, 1.0),
        ] {
            let r = run_scenario(&builtin(name).unwrap(), &sys).unwrap();
            assert_eq!(r.top_slot, top, "{name}");
            assert!((r.success_probability - p).abs() < 1e-10);
            assert_eq!(r.exchanges, 1);
            assert!(r.passed);
        }
        let r = run_scenario(&builtin("Q34").unwrap(), &sys).unwrap();
        assert!((r.distribution[2] - 0.5).abs() < 1e-10);
        assert!((r.distribution[3] - 0.5).abs() < 1e-10);
        assert!(matches!(builtin("Q9"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn toml_and_json_descriptors() {
        let toml = "n_slots = 4\nalice_available = [0, 1]\nbob_available = [0, 3]\n";
        let spec = ScenarioSpec::from_toml_str(toml).unwrap();
        assert_eq!(spec.phase_degrees, 90.0);
        assert_eq!(spec.variant, Variant::Generalized);
        let json = r#"{"n_slots": 4, "alice_available": [0, 1], "bob_available": [0, 3], "variant": "original"}"#;
        let spec = ScenarioSpec::from_json_str(json).unwrap();
        assert_eq!(spec.variant, Variant::Original);
    }

    #[test]
    fn descriptor_errors_name_the_key() {
        let key_of = |text: &str| match ScenarioSpec::from_toml_str(text) {
            Err(Error::InvalidScenario { key, .. }) => key,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(
            key_of("n_slots = 3\nalice_available = []\nbob_available = []"),
            "n_slots"
        );
        assert_eq!(
            key_of("n_slots = 4\nalice_available = [7]\nbob_available = []"),
            "alice_available"
        );
        assert_eq!(key_of("n_slots = 4\nalice_available = []"), "bob_available");
        assert_eq!(
            key_of("n_slots = 4\nalice_available = []\nbob_available = []\nvariant = \"x\""),
            "variant"
        );
        assert_eq!(
            key_of("n_slots = 4\nalice_available = []\nbob_available = []\nphase = 1"),
            "phase"
        );
        assert!(matches!(
            ScenarioSpec::from_toml_str("n_slots = = 4"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn fig1_theory_matrices() {
        let entries = export_fig1(None, &SpinSystem::default()).unwrap();
        assert_eq!(entries.len(), 3);
        let h = 0.5;
        let expected = [
            [[1.0, 0.0], [0.0, 0.0]],
            [[0.0, 0.0], [0.0, 1.0]],
            [[h, h], [h, h]],
        ];
        for (entry, e) in entries.iter().zip(expected) {
            let m = entry.theory.to_matrix().unwrap();
            for r in 0..4 {
                for c in 0..4 {
                    let want = if r < 2 && c < 2 { e[r][c] } else { 0.0 };
                    assert!((m[(r, c)] - C64::new(want, 0.0)).norm() < 1e-12);
                }
            }
            assert!(entry.simulated.is_none());
        }
    }

    #[test]
    fn pulse_programs_reproduce_theory() {
        let sys = SpinSystem::default();
        for name in BUILTIN_NAMES {
            let spec = builtin(name).unwrap();
            let program = spec.pulse_program().unwrap().unwrap();
            let simulated = simulate_program(&program, 0.0, &sys).unwrap();
            let theory = to_density(&run_protocol(&spec).unwrap().final_outcome.final_state);
            assert!(simulated.max_abs_diff(&theory) < 1e-9, "{name}");
        }
    }

    #[test]
    fn miscalibrated_export_reports_errors() {
        let entries = export_fig1(Some(0.02), &SpinSystem::default()).unwrap();
        for e in &entries {
            let r = e.error_report.unwrap();
            assert!(r.max_relative_error_nonzero > 0.0 && r.max_relative_error_nonzero.is_finite());
            assert!(e.simulated.is_some());
        }
    }
}
