//! Deterministic toy fixture: parameterized multi-channel sinusoids with
//! class-dependent structure, so the whole pipeline can run without the
//! source corpus.
//!
//! Three condition classes share one task (T16) and differ by impairment
//! level. Class structure follows the compensation pattern seen in real
//! reaching data: trunk displacement grows with impairment while joint
//! range of motion (notably forearm pronation-supination) shrinks, and
//! movement frequencies shift slightly. All deterministic content stays
//! below ~1.2 Hz so the 2 Hz post-filter leaves class structure intact.

use crate::data::{
    normalize_units, AngleUnit, Dataset, Impairment, PositionUnit, Provenance, Task, Trial, CHANNELS, SAMPLES,
    SAMPLE_RATE,
};
use crate::numerics::Tensor;
use crate::rng::SeededRng;

/// Per-class synthesis parameters.
struct ClassParams {
    impairment: Impairment,
    /// Trunk (T8) reach displacement in cm; grows with impairment.
    trunk_cm: f64,
    /// Shoulder oscillation amplitude in rad; shrinks with impairment.
    shoulder_rad: f64,
    /// Elbow/pronation range in rad; shrinks with impairment.
    elbow_rad: f64,
    /// Base movement frequency in Hz.
    freq_hz: f64,
}

const CLASSES: [ClassParams; 3] = [
    ClassParams { impairment: Impairment::Control, trunk_cm: 0.8, shoulder_rad: 1.1, elbow_rad: 1.3, freq_hz: 0.50 },
    ClassParams { impairment: Impairment::Mild, trunk_cm: 4.0, shoulder_rad: 0.8, elbow_rad: 0.95, freq_hz: 0.70 },
    ClassParams {
        impairment: Impairment::ModerateSevere,
        trunk_cm: 7.5,
        shoulder_rad: 0.5,
        elbow_rad: 0.6,
        freq_hz: 0.90,
    },
];

/// Smooth reach profile: 0 at onset, 1 after `dur` seconds.
fn reach(t: f64, dur: f64) -> f64 {
    let x = (t / dur).clamp(0.0, 1.0);
    0.5 * (1.0 - (std::f64::consts::PI * x).cos())
}

/// Build the toy dataset: `n_per_class` trials for each of the three
/// impairment classes of task T16. Deterministic in `seed`.
pub fn make_toy_fixture(n_per_class: usize, seed: u64) -> Dataset {
    let master = SeededRng::new(seed);
    let mut trials = Vec::with_capacity(3 * n_per_class);
    for (ci, params) in CLASSES.iter().enumerate() {
        for j in 0..n_per_class {
            let mut rng = master.fork((ci * 1_000_003 + j) as u64);
            let amp = rng.range(0.85, 1.15);
            let phase = rng.range(-0.4, 0.4);
            let dur = rng.range(2.2, 2.9);
            let freq = params.freq_hz * rng.range(0.92, 1.08);
            let w = std::f64::consts::TAU * freq;

            let mut data = vec![0.0; CHANNELS * SAMPLES];
            for i in 0..SAMPLES {
                let t = i as f64 / SAMPLE_RATE;
                let r = reach(t - phase.max(0.0), dur);
                let wobble = (0.6 * w * t + phase).sin();
                // trunk position (cm)
                data[i] = amp * params.trunk_cm * r + 0.12 * wobble;
                data[SAMPLES + i] = 0.45 * amp * params.trunk_cm * reach(t - 0.3, dur) + 0.1 * wobble;
                data[2 * SAMPLES + i] = 0.25 * amp * params.trunk_cm * ((0.4 * w * t + phase).sin());
                // trunk orientation (rad)
                data[3 * SAMPLES + i] = (0.05 + 0.03 * ci as f64) * (0.5 * w * t + phase).sin();
                // shoulder angles (rad)
                data[4 * SAMPLES + i] = amp * params.shoulder_rad * (w * t + phase).sin();
                data[5 * SAMPLES + i] = 0.6 * amp * params.shoulder_rad * (w * t + phase + 0.7).sin();
                data[6 * SAMPLES + i] = 0.4 * amp * params.shoulder_rad * (0.5 * w * t + phase).sin();
                // elbow flexion and pronation-supination (rad)
                data[7 * SAMPLES + i] = 0.5 * amp * params.elbow_rad * (1.0 - ((0.8 * w) * t + phase).cos());
                data[8 * SAMPLES + i] = amp * params.elbow_rad * ((0.8 * w) * t + phase + 0.4).sin();
            }
            for v in data.iter_mut() {
                *v += 0.02 * rng.normal();
            }
            let raw = Tensor::from_vec(&[CHANNELS, SAMPLES], data).expect("fixed shape");
            // Run the standard preprocessing so position channels are
            // displacement-from-first-sample, exactly like ingested data.
            let signal = normalize_units(&raw, PositionUnit::Centimeters, AngleUnit::Radians).expect("valid shape");
            let trial = Trial::new(
                format!("toy_{ci}_{}", j % 4),
                Task::T16,
                params.impairment.representative_fmma(),
                signal,
                Provenance::Real,
            )
            .expect("toy trial is valid by construction");
            trials.push(trial);
        }
    }
    Dataset::new(trials)
}
