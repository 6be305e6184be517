//! Named initial data with recommended resolution and run length.
//!
//! Discontinuous presets are sampled nodally and take the right limit at a
//! jump node.

use std::f64::consts::PI;

use crate::dynamics::EquationForm;
use crate::error::{NlbError, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, Copy)]
pub struct ScenarioPreset {
    pub name: &'static str,
    /// Closed form of the initial data.
    pub formula: &'static str,
    pub n: usize,
    pub t_end: f64,
    pub form: EquationForm,
    profile: fn(f64) -> f64,
}

impl ScenarioPreset {
    /// Evaluates the initial data at `x` in `[-pi, pi)`.
    pub fn eval(&self, x: f64) -> f64 {
        (self.profile)(x)
    }

    pub fn sample(&self, grid: Grid) -> Result<Field> {
        Field::from_fn(grid, self.profile)
    }
}

fn smooth(x: f64) -> f64 {
    2.0 + x.sin() + 0.3 * (5.0 * x).cos()
}

fn step(x: f64) -> f64 {
    if x < 0.0 {
        0.5
    } else {
        1.0 - x / (2.0 * PI)
    }
}

/// Left branch `1 + 0.3 sqrt|x + 1|` on `[-pi, 0)`; kinks at `-1` and, through
/// periodicity, at `+-pi`.
fn chirp_left(x: f64) -> f64 {
    1.0 + 0.3 * (x + 1.0).abs().sqrt()
}

/// Oscillatory part `0.5 sqrt(x) sin(1/x)`, continued by 0 at the origin.
fn chirp_wave(x: f64) -> f64 {
    if x > 0.0 {
        0.5 * x.sqrt() * (1.0 / x).sin()
    } else {
        0.0
    }
}

/// Linear drift making the right branch meet the left one at `+-pi`.
fn chirp_slope() -> f64 {
    (chirp_left(-PI) - 2.0 - chirp_wave(PI)) / PI
}

fn chirp(x: f64) -> f64 {
    if x < 0.0 {
        chirp_left(x)
    } else {
        2.0 + chirp_wave(x) + chirp_slope() * x
    }
}

fn negative(x: f64) -> f64 {
    -smooth(x)
}

fn unsigned_b(x: f64) -> f64 {
    1.0 + x.sin() + 0.1 * (20.0 * x).cos()
}

fn unsigned_c1(x: f64) -> f64 {
    0.5 + x.sin() + 0.1 * (7.0 * x).cos()
}

fn unsigned_c2(x: f64) -> f64 {
    0.2 + 0.5 * (19.0 * x).sin() + 0.5 * (20.0 * x).cos()
}

fn fem_unsigned(x: f64) -> f64 {
    0.3 + x.sin()
}

fn zero_mean(x: f64) -> f64 {
    0.03 * (x.sin() + 0.3 * (3.0 * x).cos())
}

pub const PRESETS: [ScenarioPreset; 9] = [
    ScenarioPreset {
        name: "figA_smooth",
        formula: "2 + sin(x) + 0.3 cos(5x)",
        n: 256,
        t_end: 20.0,
        form: EquationForm::UQuadrature,
        profile: smooth,
    },
    ScenarioPreset {
        name: "figA_step",
        formula: "1/2 on [-pi, 0), 1 - x/(2 pi) on [0, pi)",
        n: 512,
        t_end: 10.0,
        form: EquationForm::UQuadrature,
        profile: step,
    },
    ScenarioPreset {
        name: "figA_chirp",
        formula: "1 + 0.3 sqrt|x+1| on [-pi, 0), 2 + 0.5 sqrt(x) sin(1/x) + c x on [0, pi) with c matching the ends",
        n: 512,
        t_end: 5.0,
        form: EquationForm::UQuadrature,
        profile: chirp,
    },
    ScenarioPreset {
        name: "figD_negative",
        formula: "-2 - sin(x) - 0.3 cos(5x)",
        n: 256,
        t_end: 5.0,
        form: EquationForm::UQuadrature,
        profile: negative,
    },
    ScenarioPreset {
        name: "figB_unsigned",
        formula: "1 + sin(x) + 0.1 cos(20x)",
        n: 256,
        t_end: 10.0,
        form: EquationForm::UQuadrature,
        profile: unsigned_b,
    },
    ScenarioPreset {
        name: "figC1_unsigned",
        formula: "0.5 + sin(x) + 0.1 cos(7x)",
        n: 512,
        t_end: 10.0,
        form: EquationForm::UQuadrature,
        profile: unsigned_c1,
    },
    ScenarioPreset {
        name: "figC2_unsigned",
        formula: "0.2 + 0.5 sin(19x) + 0.5 cos(20x)",
        n: 512,
        t_end: 10.0,
        form: EquationForm::UQuadrature,
        profile: unsigned_c2,
    },
    ScenarioPreset {
        name: "figE_fem",
        formula: "0.3 + sin(x)",
        n: 20,
        t_end: 10.0,
        form: EquationForm::Fem,
        profile: fem_unsigned,
    },
    ScenarioPreset {
        name: "frozen_zero_mean",
        formula: "0.03 (sin(x) + 0.3 cos(3x))",
        n: 128,
        t_end: 5.0,
        form: EquationForm::Frozen,
        profile: zero_mean,
    },
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

/// Looks up a preset by name.
pub fn preset(name: &str) -> Result<ScenarioPreset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .copied()
        .ok_or_else(|| NlbError::UnknownPreset {
            name: name.to_string(),
            available: preset_names().join(", "),
        })
}
