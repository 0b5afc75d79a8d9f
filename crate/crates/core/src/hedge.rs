//! Priced hedge positions at one roll date.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::OneFactorModel;
use crate::weights::WeightCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LegType {
    Cash,
    Call,
    Put,
    PutStripNode,
}

impl LegType {
    pub fn as_str(&self) -> &'static str {
        match self {
            LegType::Cash => "cash",
            LegType::Call => "call",
            LegType::Put => "put",
            LegType::PutStripNode => "put_strip_node",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HedgeLeg {
    pub leg_type: LegType,
    /// Zero for cash.
    pub strike: f64,
    pub quantity: f64,
}

/// One-period options (and cash) bought at `T_period` on the fund value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HedgePortfolio {
    pub period: usize,
    pub fund_value: f64,
    pub legs: Vec<HedgeLeg>,
}

impl HedgePortfolio {
    /// Put strip `∫ g_t(k) P_t(k | X_t) dk` of the plain guarantee, one leg per grid node.
    pub fn from_weights(curve: &WeightCurve, fund_value: f64) -> Self {
        let mut legs = Vec::new();
        if let Some(a) = curve.atom() {
            legs.push(HedgeLeg {
                leg_type: LegType::Put,
                strike: a.location,
                quantity: a.mass,
            });
        }
        if let Some(grid) = curve.grid() {
            for ((&k, &wt), &g) in grid.nodes().iter().zip(grid.weights()).zip(curve.density()) {
                if g != 0.0 {
                    legs.push(HedgeLeg {
                        leg_type: LegType::PutStripNode,
                        strike: k,
                        quantity: wt * g,
                    });
                }
            }
        }
        Self {
            period: curve.period(),
            fund_value,
            legs,
        }
    }

    /// Mark-to-model value of all legs.
    pub fn value(&self, model: &dyn OneFactorModel) -> Result<f64> {
        if !(self.fund_value > 0.0) {
            return Err(Error::invalid(
                "fund_value",
                format!("must be positive, got {}", self.fund_value),
            ));
        }
        let (t, x) = (self.period, self.fund_value);
        Ok(self
            .legs
            .iter()
            .map(|l| {
                l.quantity
                    * match l.leg_type {
                        LegType::Cash => 1.0,
                        LegType::Call => model.call(t, l.strike, x),
                        LegType::Put | LegType::PutStripNode => model.put(t, l.strike, x),
                    }
            })
            .sum())
    }

    /// CSV `leg_type,strike,quantity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("leg_type,strike,quantity\n");
        for l in &self.legs {
            let _ = writeln!(
                out,
                "{},{:?},{:?}",
                l.leg_type.as_str(),
                l.strike,
                l.quantity
            );
        }
        out
    }
}
