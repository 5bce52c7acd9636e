//! Annual cost savings and staffing equivalents for auto-protocoled orders.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::evalkit::SweepRow;

pub const DEFAULT_ANNUAL_VOLUME: u64 = 58_000;
pub const DEFAULT_FTE_HOURS: f64 = 2080.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EconomicsError {
    #[error("AP fraction must lie in [0, 1], got {0}")]
    OutOfRangeFraction(f64),
    #[error("{0} must be strictly positive")]
    NonPositive(&'static str),
    #[error("unknown role `{0}` (expected technologist or radiologist)")]
    UnknownRole(String),
    #[error("csv error: {0}")]
    Csv(String),
}

/// Whole US cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cents(pub i64);

impl Cents {
    pub fn from_dollars(d: f64) -> Self {
        Cents((d * 100.0).round() as i64)
    }

    pub fn as_dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

/// Plain `dollars.cents`, e.g. `73466.67`.
impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Technologist,
    Radiologist,
}

impl FromStr for Role {
    type Err = EconomicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "technologist" => Ok(Role::Technologist),
            "radiologist" => Ok(Role::Radiologist),
            _ => Err(EconomicsError::UnknownRole(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomicParams {
    pub hourly_rate: Cents,
    pub minutes_per_exam: f64,
    pub annual_volume: u64,
    pub fte_hours_per_year: f64,
}

impl EconomicParams {
    pub fn preset(role: Role) -> Self {
        let (rate, minutes) = match role {
            Role::Technologist => (3_800, 2.0),
            Role::Radiologist => (20_600, 1.0),
        };
        Self {
            hourly_rate: Cents(rate),
            minutes_per_exam: minutes,
            annual_volume: DEFAULT_ANNUAL_VOLUME,
            fte_hours_per_year: DEFAULT_FTE_HOURS,
        }
    }

    pub fn validate(&self) -> Result<(), EconomicsError> {
        if self.hourly_rate.0 <= 0 {
            return Err(EconomicsError::NonPositive("hourly_rate"));
        }
        if !(self.minutes_per_exam > 0.0 && self.minutes_per_exam.is_finite()) {
            return Err(EconomicsError::NonPositive("minutes_per_exam"));
        }
        if self.annual_volume == 0 {
            return Err(EconomicsError::NonPositive("annual_volume"));
        }
        if !(self.fte_hours_per_year > 0.0 && self.fte_hours_per_year.is_finite()) {
            return Err(EconomicsError::NonPositive("fte_hours_per_year"));
        }
        Ok(())
    }

    /// Practitioner hours spent protocoling the routed share of the volume.
    fn hours_saved(&self, ap_fraction: f64) -> f64 {
        ap_fraction * self.annual_volume as f64 * self.minutes_per_exam / 60.0
    }
}

fn check_fraction(ap_fraction: f64) -> Result<(), EconomicsError> {
    if (0.0..=1.0).contains(&ap_fraction) {
        Ok(())
    } else {
        Err(EconomicsError::OutOfRangeFraction(ap_fraction))
    }
}

/// Routed volume × protocoling time × hourly rate, rounded to the nearest cent.
pub fn annual_savings(ap_fraction: f64, params: &EconomicParams) -> Result<Cents, EconomicsError> {
    check_fraction(ap_fraction)?;
    params.validate()?;
    // multiply everything in cents before the single division by 60
    let cents = ap_fraction
        * params.annual_volume as f64
        * params.minutes_per_exam
        * params.hourly_rate.0 as f64
        / 60.0;
    Ok(Cents(cents.round() as i64))
}

pub fn fte_saved(ap_fraction: f64, params: &EconomicParams) -> Result<f64, EconomicsError> {
    check_fraction(ap_fraction)?;
    params.validate()?;
    Ok(params.hours_saved(ap_fraction) / params.fte_hours_per_year)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsRow {
    pub threshold: f64,
    pub ap_fraction: f64,
    pub savings: Cents,
    pub fte: f64,
}

pub fn savings_curve(
    sweep: &[SweepRow],
    params: &EconomicParams,
) -> Result<Vec<SavingsRow>, EconomicsError> {
    sweep
        .iter()
        .map(|r| {
            Ok(SavingsRow {
                threshold: r.threshold,
                ap_fraction: r.ap_fraction,
                savings: annual_savings(r.ap_fraction, params)?,
                fte: fte_saved(r.ap_fraction, params)?,
            })
        })
        .collect()
}

pub const ECONOMICS_CSV: &str = "economics.csv";

/// Columns: threshold, ap_fraction, savings_usd, fte.
pub fn write_economics_csv(
    rows: &[SavingsRow],
    path: impl AsRef<Path>,
) -> Result<(), EconomicsError> {
    let err = |e: csv::Error| EconomicsError::Csv(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["threshold", "ap_fraction", "savings_usd", "fte"])
        .map_err(err)?;
    for r in rows {
        w.write_record([
            r.threshold.to_string(),
            r.ap_fraction.to_string(),
            r.savings.to_string(),
            r.fte.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| EconomicsError::Csv(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tech() -> EconomicParams {
        EconomicParams::preset(Role::Technologist)
    }

    fn rad() -> EconomicParams {
        EconomicParams::preset(Role::Radiologist)
    }

    #[test]
    fn presets_at_full_routing() {
        assert_eq!(annual_savings(1.0, &tech()).unwrap(), Cents(7_346_667));
        assert_eq!(
            annual_savings(1.0, &tech()).unwrap().to_string(),
            "73466.67"
        );
        assert_eq!(
            annual_savings(1.0, &rad()).unwrap().to_string(),
            "199133.33"
        );
        assert_eq!(
            annual_savings(0.5, &tech()).unwrap().to_string(),
            "36733.33"
        );
        assert_eq!(annual_savings(0.0, &rad()).unwrap(), Cents(0));
    }

    #[test]
    fn fte_examples() {
        let f = fte_saved(1.0, &tech()).unwrap();
        assert!((f - 58000.0 * (2.0 / 60.0) / 2080.0).abs() < 1e-12);
        assert!((f - 0.929).abs() < 5e-4);
        assert_eq!(fte_saved(0.0, &tech()).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            annual_savings(1.01, &tech()),
            Err(EconomicsError::OutOfRangeFraction(1.01))
        );
        assert!(matches!(
            fte_saved(-0.1, &tech()),
            Err(EconomicsError::OutOfRangeFraction(_))
        ));
        assert!(matches!(
            annual_savings(f64::NAN, &tech()),
            Err(EconomicsError::OutOfRangeFraction(_))
        ));
        let p = EconomicParams {
            annual_volume: 0,
            ..tech()
        };
        assert_eq!(
            annual_savings(0.5, &p),
            Err(EconomicsError::NonPositive("annual_volume"))
        );
        assert!("nurse".parse::<Role>().is_err());
    }

    #[test]
    fn cents_display() {
        assert_eq!(Cents(5).to_string(), "0.05");
        assert_eq!(Cents(-1234).to_string(), "-12.34");
        assert_eq!(Cents::from_dollars(73466.67), Cents(7_346_667));
    }

    #[test]
    fn curve_follows_sweep() {
        let sweep: Vec<SweepRow> = [1.0, 0.5, 0.5, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &f)| SweepRow {
                threshold: i as f64 / 4.0,
                ap_fraction: f,
                ap_accuracy: None,
                cds_hit_rate: None,
            })
            .collect();
        let curve = savings_curve(&sweep, &tech()).unwrap();
        assert!(curve.windows(2).all(|w| w[0].savings >= w[1].savings));
        assert_eq!(curve[1].savings.to_string(), "36733.33");
        assert_eq!(curve[3].savings, Cents(0));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(ECONOMICS_CSV);
        write_economics_csv(&curve, &path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with("threshold,ap_fraction,savings_usd,fte\n0,1,73466.67,"));
    }

    fn arb_params() -> impl Strategy<Value = EconomicParams> {
        (
            1i64..100_000,
            0.1f64..30.0,
            1u64..1_000_000,
            100.0f64..4000.0,
        )
            .prop_map(|(r, m, v, h)| EconomicParams {
                hourly_rate: Cents(r),
                minutes_per_exam: m,
                annual_volume: v,
                fte_hours_per_year: h,
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn fte_identity(ap in 0.0f64..=1.0, p in arb_params()) {
            let savings = annual_savings(ap, &p).unwrap().as_dollars();
            let via_fte = fte_saved(ap, &p).unwrap() * p.fte_hours_per_year * p.hourly_rate.as_dollars();
            prop_assert!((savings - via_fte).abs() <= 0.005 + 1e-9 * savings.abs().max(1.0), "{savings} vs {via_fte}");
        }

        #[test]
        fn linear_in_each_input(ap in 0.0f64..=0.5, p in arb_params()) {
            let base = annual_savings(ap, &p).unwrap().0;
            let tol = 1; // one cent of rounding on each side
            let doubled = [
                annual_savings(ap * 2.0, &p).unwrap().0,
                annual_savings(ap, &EconomicParams { annual_volume: p.annual_volume * 2, ..p.clone() }).unwrap().0,
                annual_savings(ap, &EconomicParams { hourly_rate: Cents(p.hourly_rate.0 * 2), ..p.clone() }).unwrap().0,
            ];
            for d in doubled {
                prop_assert!((d - 2 * base).abs() <= tol, "{d} vs 2×{base}");
            }
        }
    }
}
