//! Experiment files (TOML) and their validation.

use std::fmt;
use std::path::PathBuf;

use qseal::bitseal::MappingRule;
use qseal::gf2::GeneratorMatrix;
use qseal::seal::SealParams;
use qseal::session::{ProtocolParams, RegisterMode, Thresholds};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_TRIALS: u64 = 100;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TRIALS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SealDemo,
    Basic,
    Advanced,
    Attack,
    Sweep,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::SealDemo => "seal-demo",
            Kind::Basic => "basic",
            Kind::Advanced => "advanced",
            Kind::Attack => "attack",
            Kind::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    Honest,
    Flip,
    RandomIndices,
    DeferredChoice,
    CollectiveSearch,
    TranscriptGuesser,
    MeasureAll,
    SubsetParity,
}

impl StrategyName {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyName::Honest => "honest",
            StrategyName::Flip => "flip",
            StrategyName::RandomIndices => "random-indices",
            StrategyName::DeferredChoice => "deferred-choice",
            StrategyName::CollectiveSearch => "collective-search",
            StrategyName::TranscriptGuesser => "transcript-guesser",
            StrategyName::MeasureAll => "measure-all",
            StrategyName::SubsetParity => "subset-parity",
        }
    }

    fn attacks_seals(self) -> bool {
        matches!(self, StrategyName::MeasureAll | StrategyName::SubsetParity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolName {
    Basic,
    Advanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RuleName {
    Parity,
    RotatedPair,
    NoClue,
}

/// Parameter axes. An absent axis takes its default; axes a kind does not
/// use must be absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    /// Seal string length.
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub length: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeSpec {
    /// One string of `0`/`1` per row.
    pub generator: Vec<String>,
}

impl CodeSpec {
    pub fn matrix(&self) -> Result<GeneratorMatrix, qseal::gf2::CodeError> {
        GeneratorMatrix::from_text(&self.generator.join("\n"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSpec {
    pub z: f64,
    pub slack: f64,
    pub min_sample: usize,
    pub code_fraction: usize,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        let t = Thresholds::default();
        ThresholdSpec {
            z: t.z,
            slack: t.slack,
            min_sample: t.min_sample,
            code_fraction: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BitSealSpec {
    pub rule: RuleName,
    #[serde(default = "default_first")]
    pub first: usize,
    /// Last payload position of a parity rule; defaults to `first + 3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last: Option<usize>,
    /// Basis angle of a rotated-pair rule, in degrees.
    #[serde(default = "default_angle")]
    pub angle: u16,
    #[serde(default)]
    pub no_clue_probability: f64,
}

fn default_first() -> usize {
    qseal::bitseal::HEADER_BITS
}

fn default_angle() -> u16 {
    15
}

impl BitSealSpec {
    pub fn rule(&self) -> Result<MappingRule, qseal::bitseal::BitSealError> {
        match self.rule {
            RuleName::Parity => MappingRule::parity(self.first, self.last.unwrap_or(self.first + 3)),
            RuleName::RotatedPair => MappingRule::rotated_pair(self.first, self.angle),
            RuleName::NoClue => Ok(MappingRule::NoClue),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: Kind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyName>,
    /// Which protocol session strategies run under in `attack` and `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolName>,
    /// Committed (or targeted) bit; drawn per trial when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit: Option<u8>,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeSpec>,
    #[serde(default)]
    pub thresholds: ThresholdSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit_seal: Option<BitSealSpec>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_trials() -> u64 {
    DEFAULT_TRIALS
}

fn default_t_max() -> usize {
    qseal::session::DEFAULT_T_MAX
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot parse experiment spec: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid experiment spec:\n{}", .0.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<String>),
}

/// How a cell is run.
#[derive(Debug, Clone)]
pub enum CellSetup {
    /// A sealed string of `params.length()` qubits, optionally carrying a bit
    /// under `rule`.
    Seal {
        params: SealParams,
        rule: Option<MappingRule>,
    },
    Session(ProtocolParams),
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub index: usize,
    pub s: Option<usize>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub length: usize,
    pub theta: f64,
    pub alpha: f64,
    pub setup: CellSetup,
}

/// A validated spec, expanded into its grid cells.
#[derive(Debug, Clone)]
pub struct Plan {
    pub spec: ExperimentSpec,
    pub strategy: StrategyName,
    pub protocol: Option<ProtocolName>,
    pub cells: Vec<Cell>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// A spec of the given kind with every optional field at its default.
    pub fn new(kind: Kind) -> Self {
        ExperimentSpec {
            kind,
            seed: DEFAULT_SEED,
            trials: DEFAULT_TRIALS,
            strategy: None,
            protocol: None,
            bit: None,
            t_max: default_t_max(),
            output: None,
            grid: Grid::default(),
            code: None,
            thresholds: ThresholdSpec::default(),
            bit_seal: None,
        }
    }

    fn strategy_or_default(&self) -> Option<StrategyName> {
        match (self.strategy, self.kind) {
            (Some(s), _) => Some(s),
            (None, Kind::SealDemo | Kind::Basic | Kind::Advanced) => Some(StrategyName::Honest),
            (None, Kind::Sweep) => Some(StrategyName::CollectiveSearch),
            (None, Kind::Attack) => None,
        }
    }

    fn protocol_for(&self, strategy: StrategyName) -> Option<ProtocolName> {
        match self.kind {
            Kind::Basic => Some(ProtocolName::Basic),
            Kind::Advanced => Some(ProtocolName::Advanced),
            Kind::SealDemo => None,
            Kind::Attack | Kind::Sweep => match strategy {
                StrategyName::DeferredChoice => Some(ProtocolName::Basic),
                StrategyName::CollectiveSearch => Some(ProtocolName::Advanced),
                StrategyName::MeasureAll | StrategyName::SubsetParity => None,
                _ => self.protocol,
            },
        }
    }

    /// Checks every invariant and expands the grid. All violations are
    /// reported together.
    pub fn plan(&self) -> Result<Plan, SpecError> {
        let mut errors = Vec::new();
        if self.trials < MIN_TRIALS {
            errors.push(format!("trials must be at least {MIN_TRIALS} (got {})", self.trials));
        }
        if self.bit.is_some_and(|b| b > 1) {
            errors.push("bit must be 0 or 1".to_string());
        }
        if self.t_max == 0 {
            errors.push("t_max must be positive".to_string());
        }
        let Some(strategy) = self.strategy_or_default() else {
            errors.push(format!("kind {} needs a strategy", self.kind));
            return Err(SpecError::Invalid(errors));
        };
        let protocol = self.protocol_for(strategy);
        self.check_strategy(strategy, protocol, &mut errors);

        let seal_family = self.kind == Kind::SealDemo || strategy.attacks_seals();
        let bit_seal_mode = !seal_family && self.bit_seal.is_some();
        let unused = |name: &str, present: bool, errors: &mut Vec<String>| {
            if present {
                errors.push(format!(
                    "grid axis {name} is not used by {} / {}",
                    self.kind,
                    strategy.as_str()
                ));
            }
        };
        let g = &self.grid;
        if seal_family {
            unused("s", g.s.is_some(), &mut errors);
            unused("m", g.m.is_some(), &mut errors);
            unused("n", g.n.is_some(), &mut errors);
            if self.code.is_some() {
                errors.push("a generator matrix is only used by the advanced protocol".to_string());
            }
        } else {
            unused("N", g.length.is_some() && !bit_seal_mode, &mut errors);
            if protocol != Some(ProtocolName::Advanced) {
                unused("n", g.n.is_some(), &mut errors);
                if self.code.is_some() {
                    errors.push("a generator matrix is only used by the advanced protocol".to_string());
                }
            }
        }
        if let Some(b) = self.bit_seal {
            if self.kind == Kind::SealDemo || strategy == StrategyName::MeasureAll {
                errors.push("bit_seal is not used by this kind or strategy".to_string());
            }
            if strategy == StrategyName::SubsetParity && b.rule != RuleName::Parity {
                errors.push("subset-parity needs a parity rule".to_string());
            }
            if strategy == StrategyName::CollectiveSearch {
                errors.push("the collective search needs qubit registers (drop bit_seal)".to_string());
            }
        }
        let rule = match self.bit_seal.map(|b| b.rule()) {
            Some(Ok(r)) => Some(r),
            Some(Err(e)) => {
                errors.push(format!("bit_seal: {e}"));
                None
            }
            None if strategy == StrategyName::SubsetParity => {
                MappingRule::parity(default_first(), default_first() + 3).ok()
            }
            None => None,
        };
        let generator = match &self.code {
            Some(c) => match c.matrix() {
                Ok(m) => Some(m),
                Err(e) => {
                    errors.push(format!("code: {e}"));
                    None
                }
            },
            None => None,
        };

        let axis = |v: &Option<Vec<usize>>, default: &[usize]| v.clone().unwrap_or_else(|| default.to_vec());
        let faxis = |v: &Option<Vec<f64>>, default: f64| v.clone().unwrap_or_else(|| vec![default]);
        let thetas = faxis(&g.theta, std::f64::consts::PI / 8.0);
        let alphas = faxis(&g.alpha, 0.25);
        let default_len: &[usize] = match strategy {
            StrategyName::SubsetParity => &[40],
            StrategyName::MeasureAll => &[8, 16, 32],
            _ if bit_seal_mode => &[40],
            _ => &[16],
        };
        let lengths = axis(&g.length, default_len);
        let ss = axis(&g.s, &[64]);
        let ms = axis(&g.m, &[16]);
        let default_n = generator.as_ref().map_or(8, GeneratorMatrix::n);
        let ns = axis(&g.n, &[default_n]);
        for (name, empty) in [
            ("theta", thetas.is_empty()),
            ("alpha", alphas.is_empty()),
            ("N", lengths.is_empty()),
            ("s", ss.is_empty()),
            ("m", ms.is_empty()),
            ("n", ns.is_empty()),
        ] {
            if empty {
                errors.push(format!("grid axis {name} is empty"));
            }
        }

        let mut cells: Vec<Cell> = Vec::new();
        if seal_family {
            for &length in &lengths {
                for &theta in &thetas {
                    for &alpha in &alphas {
                        let index = cells.len();
                        let cell = SealParams::new(theta, alpha, length)
                            .map_err(|e| format!("cell N={length} theta={theta} alpha={alpha}: {e}"))
                            .and_then(|params| {
                                if let Some(rule) = rule {
                                    qseal::bitseal::BitSealLayout::new(rule, length)
                                        .map_err(|e| format!("cell N={length}: {e}"))?;
                                }
                                Ok(Cell {
                                    index,
                                    s: None,
                                    m: None,
                                    n: None,
                                    k: None,
                                    length,
                                    theta,
                                    alpha,
                                    setup: CellSetup::Seal {
                                        params,
                                        rule: if strategy == StrategyName::SubsetParity {
                                            rule
                                        } else {
                                            None
                                        },
                                    },
                                })
                            });
                        match cell {
                            Ok(c) => cells.push(c),
                            Err(e) => errors.push(e),
                        }
                    }
                }
            }
        } else {
            let advanced = protocol == Some(ProtocolName::Advanced);
            let ns = if advanced { ns } else { vec![0] };
            let lengths = if bit_seal_mode { lengths } else { vec![0] };
            let thresholds = Thresholds {
                z: self.thresholds.z,
                slack: self.thresholds.slack,
                min_sample: self.thresholds.min_sample,
            };
            for &s in &ss {
                for &m in &ms {
                    for &n in &ns {
                        for &len in &lengths {
                            for &theta in &thetas {
                                for &alpha in &alphas {
                                    let index = cells.len();
                                    let length = if bit_seal_mode { len } else { s };
                                    let label =
                                        format!("cell s={s} m={m} n={n} N={length} theta={theta} alpha={alpha}");
                                    let g = if advanced {
                                        match &generator {
                                            Some(g) if g.n() == n => Some(g.clone()),
                                            Some(g) => {
                                                errors
                                                    .push(format!("{label}: generator width {} differs from n", g.n()));
                                                continue;
                                            }
                                            None => match GeneratorMatrix::half_rate(n) {
                                                Ok(g) => Some(g),
                                                Err(e) => {
                                                    errors.push(format!("{label}: {e}"));
                                                    continue;
                                                }
                                            },
                                        }
                                    } else {
                                        None
                                    };
                                    let k = g.as_ref().map(GeneratorMatrix::k);
                                    let mode = match (bit_seal_mode, rule, self.bit_seal) {
                                        (true, Some(rule), Some(b)) => RegisterMode::BitSeal {
                                            rule,
                                            no_clue_probability: b.no_clue_probability,
                                        },
                                        _ => RegisterMode::Qubit,
                                    };
                                    let cell = SealParams::new(theta, alpha, length)
                                        .map_err(|e| format!("{label}: {e}"))
                                        .and_then(|seal| {
                                            ProtocolParams::new(
                                                s,
                                                m,
                                                g,
                                                seal,
                                                thresholds,
                                                self.thresholds.code_fraction,
                                                mode,
                                            )
                                            .map_err(|e| format!("{label}: {e}"))
                                        })
                                        .and_then(|params| {
                                            if let RegisterMode::BitSeal { rule, .. } = params.mode {
                                                qseal::bitseal::BitSealLayout::new(rule, length)
                                                    .map_err(|e| format!("{label}: {e}"))?;
                                            }
                                            Ok(Cell {
                                                index,
                                                s: Some(s),
                                                m: Some(m),
                                                n: advanced.then_some(n),
                                                k,
                                                length,
                                                theta,
                                                alpha,
                                                setup: CellSetup::Session(params),
                                            })
                                        });
                                    match cell {
                                        Ok(c) => cells.push(c),
                                        Err(e) => errors.push(e),
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if errors.is_empty() {
            Ok(Plan {
                spec: self.clone(),
                strategy,
                protocol,
                cells,
            })
        } else {
            Err(SpecError::Invalid(errors))
        }
    }

    fn check_strategy(&self, strategy: StrategyName, protocol: Option<ProtocolName>, errors: &mut Vec<String>) {
        use StrategyName::*;
        let ok = match self.kind {
            Kind::SealDemo => strategy == Honest,
            Kind::Basic => matches!(
                strategy,
                Honest | Flip | RandomIndices | DeferredChoice | TranscriptGuesser
            ),
            Kind::Advanced => matches!(
                strategy,
                Honest | Flip | RandomIndices | CollectiveSearch | TranscriptGuesser
            ),
            Kind::Attack => strategy != Honest,
            Kind::Sweep => true,
        };
        if !ok {
            errors.push(format!(
                "strategy {} does not apply to kind {}",
                strategy.as_str(),
                self.kind
            ));
        }
        if matches!(self.kind, Kind::Attack | Kind::Sweep) && !strategy.attacks_seals() && protocol.is_none() {
            errors.push(format!(
                "strategy {} needs protocol = \"basic\" or \"advanced\"",
                strategy.as_str()
            ));
        }
        match (strategy, protocol) {
            (DeferredChoice, Some(ProtocolName::Advanced)) => {
                errors.push("deferred-choice applies to the basic protocol only".to_string());
            }
            (CollectiveSearch, Some(ProtocolName::Basic)) => {
                errors.push("collective-search applies to the advanced protocol only".to_string());
            }
            _ => {}
        }
        if let Some(p) = self.protocol {
            let fixed = matches!(self.kind, Kind::Basic | Kind::Advanced | Kind::SealDemo) || strategy.attacks_seals();
            if fixed && Some(p) != protocol {
                errors.push("protocol conflicts with the kind or strategy".to_string());
            }
        }
    }
}
