//! Consumption strategies and a name-keyed registry of them.
//!
//! The Monte Carlo engine only understands the flat [`PolicySpec`]; the
//! trait layer exists so new strategy families can be added (and listed,
//! described, and built from CLI arguments) without touching the engine.
//! The registry is deliberately small: the barrier family and its
//! degenerate endpoints are all the verification suite needs.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::{Error, Result};

/// How consumption reacts to the rate path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolicyMode {
    /// Consume all accumulated capital when `r >= barrier`, plus ongoing
    /// income while there; accumulate while below.
    BarrierLumpSum,
    /// Consume at a fixed rate `c` regardless of the rate path.
    ConstantRate(f64),
    /// Never consume.
    NoConsumption,
}

/// Flat strategy description consumed by the simulation engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    /// Threshold for the barrier mode. `-inf` means "always in the
    /// consumption region", `+inf` "never". Ignored by the other modes.
    pub barrier: f64,
    pub mode: PolicyMode,
}

impl PolicySpec {
    pub fn barrier_lump_sum(barrier: f64) -> Self {
        PolicySpec { barrier, mode: PolicyMode::BarrierLumpSum }
    }

    pub fn constant_rate(rate: f64) -> Self {
        PolicySpec { barrier: f64::INFINITY, mode: PolicyMode::ConstantRate(rate) }
    }

    pub fn no_consumption() -> Self {
        PolicySpec { barrier: f64::INFINITY, mode: PolicyMode::NoConsumption }
    }

    /// Admissibility: the wealth process stays non-negative from any
    /// starting capital. For a constant rate that forces `0 <= c <= mu`.
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.barrier.is_nan() {
            return Err(Error::Validation("policy barrier must not be NaN".into()));
        }
        if let PolicyMode::ConstantRate(c) = self.mode {
            if !(c >= 0.0) || c > params.mu || !c.is_finite() {
                return Err(Error::Validation(format!(
                    "constant consumption rate must lie in [0, mu] = [0, {}], got {c}",
                    params.mu
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            PolicyMode::BarrierLumpSum => write!(f, "lump-sum barrier at r = {}", self.barrier),
            PolicyMode::ConstantRate(c) => write!(f, "constant consumption rate {c}"),
            PolicyMode::NoConsumption => write!(f, "no consumption"),
        }
    }
}

/// A named consumption strategy that can be instantiated for a parameter
/// set. `r_star` is the solved optimal barrier, available so strategies can
/// position themselves relative to it.
pub trait ConsumptionPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn describe(&self) -> String;
    fn spec(&self, params: &ModelParams, r_star: f64) -> Result<PolicySpec>;
}

/// Arguments a factory may consume; unused fields are ignored by policies
/// that do not need them.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolicyArgs {
    /// Shift added to the solved barrier (barrier family).
    pub barrier_shift: f64,
    /// Absolute barrier override; takes precedence over the shift.
    pub barrier_abs: Option<f64>,
    /// Consumption rate (constant-rate family).
    pub rate: Option<f64>,
}

type Factory = Box<dyn Fn(&PolicyArgs) -> Box<dyn ConsumptionPolicy> + Send + Sync>;

/// Name-keyed policy factory table.
pub struct PolicyRegistry {
    factories: HashMap<String, Factory>,
}

struct BarrierPolicy {
    shift: f64,
    absolute: Option<f64>,
}

impl ConsumptionPolicy for BarrierPolicy {
    fn name(&self) -> &str {
        "barrier"
    }

    fn describe(&self) -> String {
        match self.absolute {
            Some(b) => format!("lump-sum barrier strategy at fixed r = {b}"),
            None if self.shift == 0.0 => "lump-sum barrier strategy at the solved r*".into(),
            None => format!("lump-sum barrier strategy at r* {:+}", self.shift),
        }
    }

    fn spec(&self, _params: &ModelParams, r_star: f64) -> Result<PolicySpec> {
        let barrier = self.absolute.unwrap_or(r_star + self.shift);
        Ok(PolicySpec::barrier_lump_sum(barrier))
    }
}

struct ConstantRatePolicy {
    rate: Option<f64>,
}

impl ConsumptionPolicy for ConstantRatePolicy {
    fn name(&self) -> &str {
        "constant-rate"
    }

    fn describe(&self) -> String {
        match self.rate {
            Some(c) => format!("consume at constant rate {c}"),
            None => "consume at constant rate (rate argument required)".into(),
        }
    }

    fn spec(&self, params: &ModelParams, _r_star: f64) -> Result<PolicySpec> {
        let c = self
            .rate
            .ok_or_else(|| Error::Validation("constant-rate policy needs a rate".into()))?;
        let spec = PolicySpec::constant_rate(c);
        spec.validate(params)?;
        Ok(spec)
    }
}

struct NoConsumptionPolicy;

impl ConsumptionPolicy for NoConsumptionPolicy {
    fn name(&self) -> &str {
        "no-consumption"
    }

    fn describe(&self) -> String {
        "never consume (value identically zero)".into()
    }

    fn spec(&self, _params: &ModelParams, _r_star: f64) -> Result<PolicySpec> {
        Ok(PolicySpec::no_consumption())
    }
}

struct ConsumeAlwaysPolicy;

impl ConsumptionPolicy for ConsumeAlwaysPolicy {
    fn name(&self) -> &str {
        "consume-always"
    }

    fn describe(&self) -> String {
        "consume capital and income immediately regardless of the rate".into()
    }

    fn spec(&self, _params: &ModelParams, _r_star: f64) -> Result<PolicySpec> {
        Ok(PolicySpec::barrier_lump_sum(f64::NEG_INFINITY))
    }
}

impl PolicyRegistry {
    /// Registry pre-loaded with the built-in strategy families.
    pub fn builtin() -> Self {
        let mut reg = PolicyRegistry { factories: HashMap::new() };
        reg.register("barrier", |args| {
            Box::new(BarrierPolicy { shift: args.barrier_shift, absolute: args.barrier_abs })
        })
        .expect("fresh registry");
        reg.register("constant-rate", |args| Box::new(ConstantRatePolicy { rate: args.rate }))
            .expect("fresh registry");
        reg.register("no-consumption", |_| Box::new(NoConsumptionPolicy))
            .expect("fresh registry");
        reg.register("consume-always", |_| Box::new(ConsumeAlwaysPolicy))
            .expect("fresh registry");
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F) -> Result<()>
    where
        F: Fn(&PolicyArgs) -> Box<dyn ConsumptionPolicy> + Send + Sync + 'static,
    {
        if self.factories.contains_key(name) {
            return Err(Error::Validation(format!("policy '{name}' is already registered")));
        }
        self.factories.insert(name.to_string(), Box::new(factory));
        Ok(())
    }

    pub fn create(&self, name: &str, args: &PolicyArgs) -> Result<Box<dyn ConsumptionPolicy>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            let mut known = self.names();
            known.sort_unstable();
            Error::Validation(format!("unknown policy '{name}'; known: {}", known.join(", ")))
        })?;
        Ok(factory(args))
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }
}
