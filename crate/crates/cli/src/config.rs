//! Run configuration: a flat JSON object whose keys mirror [`RunConfig`].

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables, DefaultNumericTypes, Function,
    HashMapContext, Value,
};
use nlburgers_core::integrators::{GuardConfig, DEFAULT_TAU_MAX};
use nlburgers_core::{preset, EquationForm, Field, Grid, KernelMode, KernelSpec, Scheme, StepControl};
use serde::{Deserialize, Serialize};

/// Prefix marking an inline initial-data expression in `x`.
pub const EXPR_PREFIX: &str = "expr:";

const DEFAULT_EXPR_N: usize = 256;
const DEFAULT_EXPR_T_END: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Trajectory,
    Diagnostics,
    Spectra,
}

impl Emit {
    pub const ALL: [Emit; 3] = [Emit::Trajectory, Emit::Diagnostics, Emit::Spectra];

    pub fn file_name(self) -> &'static str {
        match self {
            Emit::Trajectory => "trajectory.csv",
            Emit::Diagnostics => "diagnostics.ndjson",
            Emit::Spectra => "spectra.csv",
        }
    }
}

/// Everything that determines a run. `n`, `t_end` and `form` default to the
/// preset's recommendation; [`RunConfig::resolve`] fills them in so the
/// header of every output file is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Preset name, or `expr:<formula in x>`.
    pub scenario: String,
    pub n: Option<usize>,
    pub scheme: Scheme,
    /// Fixed step; `null` selects the CFL rule.
    pub tau: Option<f64>,
    pub safety: f64,
    pub tau_max: f64,
    pub t_end: Option<f64>,
    pub record_every: usize,
    pub form: Option<EquationForm>,
    pub kernel_mode: KernelMode,
    pub guards: GuardConfig,
    pub out: PathBuf,
    pub emit: BTreeSet<Emit>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ctrl = StepControl::default();
        Self {
            scenario: "figA_smooth".into(),
            n: None,
            scheme: ctrl.scheme,
            tau: None,
            safety: ctrl.safety,
            tau_max: DEFAULT_TAU_MAX,
            t_end: None,
            record_every: ctrl.record_every,
            form: None,
            kernel_mode: KernelMode::default(),
            guards: GuardConfig::default(),
            out: PathBuf::from("out"),
            emit: Emit::ALL.into_iter().collect(),
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// JSON syntax or schema error with its 1-based position.
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            ConfigError::Parse {
                origin,
                line,
                column,
                message,
            } => write!(f, "{origin}:{line}:{column}: {message}"),
            ConfigError::Invalid(msg) => write!(f, "invalid config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    /// Parses JSON text; `origin` names the source in error messages.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: strip_position(&e.to_string()),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// Single-line JSON, as embedded in output headers.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Fills unset fields from the scenario and validates the result.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        let (n, t_end, form) = match self.scenario.strip_prefix(EXPR_PREFIX) {
            Some(_) => (DEFAULT_EXPR_N, DEFAULT_EXPR_T_END, EquationForm::UQuadrature),
            None => {
                let p = preset(&self.scenario).map_err(|e| ConfigError::Invalid(e.to_string()))?;
                (p.n, p.t_end, p.form)
            }
        };
        self.n.get_or_insert(n);
        self.t_end.get_or_insert(t_end);
        self.form.get_or_insert(form);
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n.unwrap_or(DEFAULT_EXPR_N);
        Grid::new(n).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.control()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.emit.is_empty() {
            return Err(ConfigError::Invalid("emit must name at least one output".into()));
        }
        self.initial_data()?;
        Ok(())
    }

    pub fn spec(&self) -> KernelSpec {
        KernelSpec::new(self.kernel_mode)
    }

    pub fn form(&self) -> EquationForm {
        self.form.unwrap_or(EquationForm::UQuadrature)
    }

    pub fn control(&self) -> StepControl {
        StepControl {
            scheme: self.scheme,
            tau: self.tau,
            safety: self.safety,
            tau_max: self.tau_max,
            t_end: self.t_end.unwrap_or(DEFAULT_EXPR_T_END),
            record_every: self.record_every,
            guards: self.guards,
            ..StepControl::default()
        }
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.n.unwrap_or(DEFAULT_EXPR_N)).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Samples the scenario on the configured grid.
    pub fn initial_data(&self) -> Result<Field, ConfigError> {
        let grid = self.grid()?;
        let invalid = |e: nlburgers_core::NlbError| ConfigError::Invalid(e.to_string());
        match self.scenario.strip_prefix(EXPR_PREFIX) {
            Some(expr) => {
                let values = eval_expression(expr, &grid.nodes())?;
                Field::new(grid, values).map_err(invalid)
            }
            None => preset(&self.scenario).and_then(|p| p.sample(grid)).map_err(invalid),
        }
    }
}

/// serde_json appends " at line L column C"; the position is reported
/// separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

type Unary = fn(f64) -> f64;

fn unary(f: Unary) -> Function<DefaultNumericTypes> {
    Function::new(move |arg: &Value<DefaultNumericTypes>| Ok(Value::Float(f(arg.as_number()?))))
}

/// Evaluates `expr` at every node. Besides the `math::` builtins, the short
/// names `sin cos tan exp ln sqrt abs` and the constant `pi` are available.
pub fn eval_expression(expr: &str, nodes: &[f64]) -> Result<Vec<f64>, ConfigError> {
    let fail =
        |e: evalexpr::EvalexprError<DefaultNumericTypes>| ConfigError::Invalid(format!("expression {expr:?}: {e}"));
    let tree = build_operator_tree::<DefaultNumericTypes>(expr).map_err(fail)?;
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    let functions: [(&str, Unary); 7] = [
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("tan", f64::tan),
        ("exp", f64::exp),
        ("ln", f64::ln),
        ("sqrt", f64::sqrt),
        ("abs", f64::abs),
    ];
    for (name, f) in functions {
        ctx.set_function(name.into(), unary(f)).map_err(fail)?;
    }
    ctx.set_value("pi".into(), Value::Float(PI)).map_err(fail)?;
    nodes
        .iter()
        .map(|&x| {
            ctx.set_value("x".into(), Value::Float(x)).map_err(fail)?;
            tree.eval_number_with_context(&ctx).map_err(fail)
        })
        .collect()
}
