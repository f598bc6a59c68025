//! Period-by-period run traces, serialized as JSON documents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{parse_market_spec, serialize_market_spec, Instance, MarketSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    Sem,
    SdRtb,
    Omniscient,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Sem => "sem",
            Mechanism::SdRtb => "sd-rtb",
            Mechanism::Omniscient => "omniscient",
        }
    }
}

impl std::str::FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mechanism> {
        match s {
            "sem" => Ok(Mechanism::Sem),
            "sd-rtb" | "sd_rtb" => Ok(Mechanism::SdRtb),
            "omniscient" => Ok(Mechanism::Omniscient),
            _ => Err(Error::invalid("mechanism", format!("unknown mechanism `{s}`"))),
        }
    }
}

/// What happened in one period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: usize,
    /// Remaining integer supply when the period opened.
    pub supply_before: Vec<u64>,
    pub arrivals: Vec<Instance>,
    /// Equilibrium prices; absent for baselines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prices: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clearing_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Lottery offered to each arrival; point masses for deterministic rules.
    pub lotteries: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// True when the arrival count differed from the forecast and the
    /// empirical distribution was rescaled.
    #[serde(default)]
    pub renormalized: bool,
}

impl PeriodRecord {
    pub fn placed(&self, null: usize) -> usize {
        self.assignment.iter().filter(|&&x| x != null).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub mechanism: Mechanism,
    pub seed: u64,
    /// The market document, including any types added during the run.
    pub spec: String,
    pub initial_supply: Vec<u64>,
    pub periods: Vec<PeriodRecord>,
    pub final_supply: Vec<u64>,
}

impl RunTrace {
    pub fn new(mechanism: Mechanism, seed: u64, spec: &MarketSpec) -> RunTrace {
        let supply = spec.objects.supply().to_vec();
        RunTrace {
            mechanism,
            seed,
            spec: serialize_market_spec(spec),
            initial_supply: supply.clone(),
            periods: Vec::new(),
            final_supply: supply,
        }
    }

    pub fn market(&self) -> Result<MarketSpec> {
        parse_market_spec(&self.spec)
    }

    pub fn arrivals(&self) -> usize {
        self.periods.iter().map(|p| p.arrivals.len()).sum()
    }

    /// Fraction of arrivals assigned a non-null object; 1 when nobody arrived.
    pub fn placement_rate(&self) -> Result<f64> {
        let null = self.market()?.objects.null();
        let total = self.arrivals();
        if total == 0 {
            return Ok(1.0);
        }
        let placed: usize = self.periods.iter().map(|p| p.placed(null)).sum();
        Ok(placed as f64 / total as f64)
    }

    /// Worst clearing residual over the periods that solved an equilibrium.
    pub fn max_clearing_error(&self) -> f64 {
        self.periods.iter().filter_map(|p| p.clearing_error).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("traces always serialize")
    }

    pub fn from_json(text: &str) -> Result<RunTrace> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Checks shape and supply accounting.
    pub fn validate(&self) -> Result<()> {
        let spec = self.market()?;
        let m = spec.objects.len();
        let null = spec.objects.null();
        let mut remaining = self.initial_supply.clone();
        if remaining.len() != m || self.final_supply.len() != m {
            return Err(Error::invalid("trace", "supply vectors have the wrong length"));
        }
        for (k, p) in self.periods.iter().enumerate() {
            let path = format!("periods[{k}]");
            if p.supply_before != remaining {
                return Err(Error::invalid(path, "supply_before does not match the running balance"));
            }
            if p.lotteries.len() != p.arrivals.len() || p.assignment.len() != p.arrivals.len() {
                return Err(Error::invalid(path, "one lottery and one assignment per arrival required"));
            }
            for (a, &x) in p.arrivals.iter().zip(&p.assignment) {
                if a.ty >= spec.types.len() || a.period != p.period || x >= m {
                    return Err(Error::invalid(path, "arrival or assignment out of range"));
                }
                if x != null {
                    if remaining[x] == 0 {
                        return Err(Error::invalid(path, format!("object `{}` assigned beyond supply", spec.objects.name(x))));
                    }
                    remaining[x] -= 1;
                }
            }
        }
        if remaining != self.final_supply {
            return Err(Error::invalid("final_supply", "does not equal initial supply minus assignments"));
        }
        Ok(())
    }
}
