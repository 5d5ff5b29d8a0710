//! Run configuration: JSON, validated completely before any pricing starts.

use dpg_core::dpg::Formulation;
use dpg_core::models::{Barriers, Contract, MarketParams, MonitoringSchedule, OptionRight};
use dpg_core::pricers::{AmericanMode, GridParams, LcpConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Price,
    Converge,
    Greeks,
    Compare,
    Surface,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Price => "price",
            Command::Converge => "converge",
            Command::Greeks => "greeks",
            Command::Compare => "compare",
            Command::Surface => "surface",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Monitoring {
    /// 250 equally spaced dates per year.
    Daily,
    /// 50 equally spaced dates per year.
    Weekly,
    Uniform { count: usize },
    /// Calendar times in `(0, T]`.
    Dates { times: Vec<f64> },
}

impl Monitoring {
    pub fn schedule(&self, maturity: f64) -> MonitoringSchedule {
        match self {
            Monitoring::Daily => MonitoringSchedule::daily(maturity),
            Monitoring::Weekly => MonitoringSchedule::weekly(maturity),
            Monitoring::Uniform { count } => MonitoringSchedule::uniform(maturity, *count),
            Monitoring::Dates { times } => MonitoringSchedule::new(times.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContractConfig {
    European {
        right: OptionRight,
        strike: f64,
    },
    /// Only the put is supported.
    American {
        strike: f64,
        #[serde(default = "lcp_mode")]
        mode: AmericanMode,
        #[serde(default)]
        lcp: LcpConfig,
    },
    /// Fixed-strike arithmetic average call.
    Asian {
        strike: f64,
    },
    DoubleBarrier {
        right: OptionRight,
        strike: f64,
        lower: f64,
        upper: f64,
        monitoring: Monitoring,
    },
}

fn lcp_mode() -> AmericanMode {
    AmericanMode::Lcp
}

impl ContractConfig {
    pub fn strike(&self) -> f64 {
        match self {
            ContractConfig::European { strike, .. }
            | ContractConfig::American { strike, .. }
            | ContractConfig::Asian { strike }
            | ContractConfig::DoubleBarrier { strike, .. } => *strike,
        }
    }

    pub fn with_strike(&self, k: f64) -> Self {
        let mut c = self.clone();
        match &mut c {
            ContractConfig::European { strike, .. }
            | ContractConfig::American { strike, .. }
            | ContractConfig::Asian { strike }
            | ContractConfig::DoubleBarrier { strike, .. } => *strike = k,
        }
        c
    }

    pub fn contract(&self, maturity: f64) -> Contract {
        match self {
            ContractConfig::European { right, strike } => Contract::european(*right, *strike),
            ContractConfig::American { strike, .. } => Contract::american_put(*strike),
            ContractConfig::Asian { strike } => Contract::asian_call(*strike),
            ContractConfig::DoubleBarrier {
                right,
                strike,
                lower,
                upper,
                monitoring,
            } => Contract::double_barrier(
                *right,
                *strike,
                Barriers::new(*lower, *upper),
                monitoring.schedule(maturity),
            ),
        }
    }

    /// Contracts priced in log-price, where Greeks in `S` make sense.
    pub fn has_spot_greeks(&self) -> bool {
        !matches!(self, ContractConfig::Asian { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub rate: f64,
    pub vol: f64,
    pub spot: f64,
    pub maturity: f64,
}

impl MarketConfig {
    pub fn params(&self) -> MarketParams {
        MarketParams::new(self.rate, self.vol, self.spot, self.maturity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Discretization {
    pub formulation: Formulation,
    pub order: usize,
    pub delta_p: usize,
    pub n_elements: usize,
    pub n_steps: usize,
    pub theta: f64,
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            formulation: Formulation::Ultraweak,
            order: 1,
            delta_p: 2,
            n_elements: 100,
            n_steps: 100,
            theta: 1.0,
        }
    }
}

impl Discretization {
    pub fn grid(&self) -> GridParams {
        GridParams {
            formulation: self.formulation,
            n_elements: self.n_elements,
            order: self.order,
            delta_p: self.delta_p,
            n_steps: self.n_steps,
            theta: self.theta,
            norm_weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: Format,
    /// Directory for the report; standard output when absent.
    pub path: Option<PathBuf>,
    /// Significant digits of every number written.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            format: Format::Csv,
            path: None,
            precision: 17,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Greek {
    Delta,
    Gamma,
    Vega,
    Rho,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    Space,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    /// Which resolution doubles from level to level.
    pub axis: Axis,
    pub levels: usize,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            axis: Axis::Space,
            levels: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareCell {
    pub vol: f64,
    pub strike: f64,
    /// Published value to compare against instead of running an oracle.
    #[serde(default)]
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Cells priced in addition to the `vols` x `strikes` grid.
    pub cells: Vec<CompareCell>,
    pub vols: Vec<f64>,
    pub strikes: Vec<f64>,
    /// Absolute tolerance; adds a `within_tolerance` column when set.
    pub tolerance: Option<f64>,
    pub binomial_steps: usize,
    pub mc_paths: usize,
    /// Averaging steps of the Asian simulation.
    pub mc_steps: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            cells: Vec::new(),
            vols: Vec::new(),
            strikes: Vec::new(),
            tolerance: None,
            binomial_steps: 5000,
            mc_paths: 1_000_000,
            mc_steps: 250,
        }
    }
}

impl CompareConfig {
    /// Explicit cells first, then the grid in row-major `(vol, strike)` order.
    pub fn all_cells(&self) -> Vec<CompareCell> {
        let mut out = self.cells.clone();
        for &vol in &self.vols {
            for &strike in &self.strikes {
                out.push(CompareCell {
                    vol,
                    strike,
                    reference: None,
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free text, ignored.
    #[serde(default)]
    pub description: Option<String>,
    /// Must match the subcommand when given.
    #[serde(default)]
    pub command: Option<Command>,
    pub contract: ContractConfig,
    pub market: MarketConfig,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub output: OutputConfig,
    /// Greeks added to `price` and `greeks` reports.
    #[serde(default)]
    pub greeks: Vec<Greek>,
    #[serde(default)]
    pub converge: ConvergeConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(msg()))
    }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    check(v.is_finite() && v > 0.0, || format!("{name} must be positive and finite, got {v}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    /// Range checks for everything `command` will touch.
    pub fn validate(&self, command: Command) -> Result<(), ConfigError> {
        if let Some(c) = self.command {
            check(c == command, || {
                format!("config is for `{}`, not `{}`", c.name(), command.name())
            })?;
        }
        let m = &self.market;
        check(m.rate.is_finite() && m.rate.abs() <= 1.0, || {
            format!("market.rate must lie in [-1, 1], got {}", m.rate)
        })?;
        check(m.vol.is_finite() && m.vol > 0.0 && m.vol <= 5.0, || {
            format!("market.vol must lie in (0, 5], got {}", m.vol)
        })?;
        positive("market.spot", m.spot)?;
        check(m.maturity.is_finite() && m.maturity > 0.0 && m.maturity <= 50.0, || {
            format!("market.maturity must lie in (0, 50], got {}", m.maturity)
        })?;

        self.validate_contract(&self.contract)?;

        let d = &self.discretization;
        check((1..=20_000).contains(&d.n_elements), || {
            format!("discretization.n_elements must lie in [1, 20000], got {}", d.n_elements)
        })?;
        check((1..=100_000).contains(&d.n_steps), || {
            format!("discretization.n_steps must lie in [1, 100000], got {}", d.n_steps)
        })?;
        check((0..=6).contains(&d.order), || {
            format!("discretization.order must lie in [0, 6], got {}", d.order)
        })?;
        check((1..=4).contains(&d.delta_p), || {
            format!("discretization.delta_p must lie in [1, 4], got {}", d.delta_p)
        })?;
        check((0.0..=1.0).contains(&d.theta), || {
            format!("discretization.theta must lie in [0, 1], got {}", d.theta)
        })?;
        check(d.order >= 1 || d.formulation == Formulation::Ultraweak, || {
            "the primal formulation needs order >= 1".into()
        })?;

        let o = &self.output;
        check((1..=17).contains(&o.precision), || {
            format!("output.precision must lie in [1, 17], got {}", o.precision)
        })?;

        if !self.greeks.is_empty() && matches!(command, Command::Price | Command::Greeks) {
            check(self.contract.has_spot_greeks(), || {
                "Greeks are available for log-price contracts only (not asian)".into()
            })?;
            let needs_pde = self.greeks.iter().any(|g| matches!(g, Greek::Vega | Greek::Rho));
            check(!needs_pde || matches!(self.contract, ContractConfig::European { .. }), || {
                "vega and rho come from the sensitivity equation, available for european only"
                    .into()
            })?;
        }
        if command == Command::Greeks {
            check(self.contract.has_spot_greeks(), || {
                "the greeks command needs a log-price contract (not asian)".into()
            })?;
        }

        match command {
            Command::Converge => {
                let c = &self.converge;
                check((2..=10).contains(&c.levels), || {
                    format!("converge.levels must lie in [2, 10], got {}", c.levels)
                })?;
                let base = match c.axis {
                    Axis::Space => d.n_elements,
                    Axis::Time => d.n_steps,
                };
                // the finest level, or the reference one level beyond it
                let top = base << c.levels;
                let limit = match c.axis {
                    Axis::Space => 20_000,
                    Axis::Time => 100_000,
                };
                check(top <= limit, || {
                    format!("converge reaches {top} cells along the refined axis (limit {limit})")
                })?;
            }
            Command::Compare => {
                let c = &self.compare;
                let cells = c.all_cells();
                check(!cells.is_empty(), || "compare needs at least one cell".into())?;
                for cell in &cells {
                    check(cell.vol.is_finite() && cell.vol > 0.0 && cell.vol <= 5.0, || {
                        format!("compare vol must lie in (0, 5], got {}", cell.vol)
                    })?;
                    self.validate_contract(&self.contract.with_strike(cell.strike))?;
                    if let Some(r) = cell.reference {
                        check(r.is_finite(), || "compare reference must be finite".into())?;
                    }
                }
                if let Some(t) = c.tolerance {
                    positive("compare.tolerance", t)?;
                }
                check((1..=1_000_000).contains(&c.binomial_steps), || {
                    format!("compare.binomial_steps must lie in [1, 1000000], got {}", c.binomial_steps)
                })?;
                check((2..=100_000_000).contains(&c.mc_paths), || {
                    format!("compare.mc_paths must lie in [2, 1e8], got {}", c.mc_paths)
                })?;
                check((1..=100_000).contains(&c.mc_steps), || {
                    format!("compare.mc_steps must lie in [1, 100000], got {}", c.mc_steps)
                })?;
            }
            _ => {}
        }
        Ok(())
    }

    fn validate_contract(&self, c: &ContractConfig) -> Result<(), ConfigError> {
        positive("contract.strike", c.strike())?;
        match c {
            ContractConfig::American { mode, lcp, .. } => {
                if *mode == AmericanMode::Lcp {
                    lcp.validate().map_err(|e| ConfigError(format!("contract.lcp: {e}")))?;
                }
            }
            ContractConfig::DoubleBarrier {
                lower,
                upper,
                monitoring,
                ..
            } => {
                positive("contract.lower", *lower)?;
                check(upper > lower, || {
                    format!("contract.upper ({upper}) must exceed contract.lower ({lower})")
                })?;
                if let Monitoring::Uniform { count } = monitoring {
                    check(*count >= 1, || "monitoring.count must be at least 1".into())?;
                }
            }
            _ => {}
        }
        c.contract(self.market.maturity)
            .validate(&self.market.params())
            .map_err(|e| ConfigError(format!("contract: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "contract": {"type": "european", "right": "put", "strike": 100},
        "market": {"rate": 0.05, "vol": 0.3, "spot": 100, "maturity": 1}
    }"#;

    #[test]
    fn defaults_follow_the_reference_grid() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.discretization, Discretization::default());
        assert_eq!(c.discretization.n_elements, 100);
        assert_eq!(c.discretization.delta_p, 2);
        assert_eq!(c.output.precision, 17);
        c.validate(Command::Price).unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("\"strike\": 100", "\"strike\": 100, \"strik\": 1");
        assert!(RunConfig::parse(&text).is_err());
        let text = MINIMAL.replace("\"maturity\": 1", "\"maturity\": 1, \"dividend\": 0");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.market.vol = -0.1;
        assert!(c.validate(Command::Price).is_err());
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.discretization.theta = 1.5;
        assert!(c.validate(Command::Price).is_err());
        let mut c = RunConfig::parse(MINIMAL).unwrap();
        c.command = Some(Command::Surface);
        assert!(c.validate(Command::Price).is_err());
    }

    #[test]
    fn asian_has_no_spot_greeks() {
        let text = r#"{
            "contract": {"type": "asian", "strike": 100},
            "market": {"rate": 0.09, "vol": 0.3, "spot": 100, "maturity": 1},
            "greeks": ["delta"]
        }"#;
        let c = RunConfig::parse(text).unwrap();
        assert!(c.validate(Command::Price).is_err());
        assert!(c.validate(Command::Surface).is_ok());
    }

    #[test]
    fn compare_grid_is_row_major() {
        let mut c = CompareConfig::default();
        c.vols = vec![0.1, 0.2];
        c.strikes = vec![90.0, 100.0];
        let cells: Vec<(f64, f64)> = c.all_cells().iter().map(|c| (c.vol, c.strike)).collect();
        assert_eq!(cells, vec![(0.1, 90.0), (0.1, 100.0), (0.2, 90.0), (0.2, 100.0)]);
    }

    #[test]
    fn shipped_configs_validate() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let cfg = RunConfig::load(&path).unwrap();
            let command = cfg.command.expect("examples name their command");
            cfg.validate(command)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
        assert!(n >= 5);
    }

    #[test]
    fn schema_lists_every_top_level_field() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("config.schema.json");
        let schema: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        let mut in_schema: Vec<String> = schema["properties"]
            .as_object()
            .unwrap()
            .keys()
            .cloned()
            .collect();
        in_schema.sort();
        let full = RunConfig::parse(MINIMAL).unwrap();
        let mut in_type: Vec<String> = serde_json::to_value(&full)
            .unwrap()
            .as_object()
            .unwrap()
            .keys()
            .cloned()
            .collect();
        in_type.sort();
        assert_eq!(in_schema, in_type);
    }
}
