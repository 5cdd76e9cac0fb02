//! CSV and JSON emitters. Every computed number goes through
//! [`format_number`] (12 significant digits, `%g` style), so output is a
//! pure function of the values.

use mollifem::rates::ErrorPoint;
use mollifem::{RateBound, StudyConfig, StudyTable};
use serde::{Deserialize, Serialize};

pub const SIGNIFICANT_DIGITS: usize = 12;

pub const STUDY_HEADER: &str =
    "lambda,gamma_noreg,gamma_reg,gamma_theory_noreg,gamma_theory_reg,regime,residual_noreg,residual_reg";
pub const CURVES_HEADER: &str = "lambda,gamma_theory_noreg,gamma_theory_reg,lower_bound_only";

/// `%.12g`.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.into();
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Value rounded to the emitted precision, for JSON numbers.
pub fn rounded(v: f64) -> f64 {
    if v.is_finite() {
        format_number(v).parse().expect("formatted float parses")
    } else {
        v
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_number).unwrap_or_default()
}

pub fn study_csv(table: &StudyTable) -> String {
    let mut out = String::from(STUDY_HEADER);
    out.push('\n');
    for r in &table.rows {
        let fields = [
            format_number(r.lambda),
            format_number(r.gamma_noreg()),
            opt(r.gamma_reg()),
            format_number(r.theory_noreg),
            opt(r.theory_reg.map(RateBound::value)),
            r.regime.map(|s| s.label().to_string()).unwrap_or_default(),
            format_number(r.noreg.residual),
            opt(r.reg.as_ref().map(|e| e.residual)),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct JsonErrorPoint {
    pub n: usize,
    pub error: f64,
    pub std_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct JsonStudyRow {
    pub lambda: f64,
    pub gamma_noreg: f64,
    pub gamma_reg: Option<f64>,
    pub gamma_theory_noreg: f64,
    pub gamma_theory_reg: Option<f64>,
    pub lower_bound_only: Option<bool>,
    pub regime: Option<String>,
    pub residual_noreg: f64,
    pub residual_reg: Option<f64>,
    pub errors_noreg: Vec<JsonErrorPoint>,
    pub errors_reg: Vec<JsonErrorPoint>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct JsonStudy {
    pub config: StudyConfig,
    pub notes: Vec<String>,
    pub rows: Vec<JsonStudyRow>,
}

fn json_points(points: &[ErrorPoint], betas: &[f64]) -> Vec<JsonErrorPoint> {
    points
        .iter()
        .enumerate()
        .map(|(k, p)| JsonErrorPoint {
            n: p.n,
            error: rounded(p.error),
            std_error: rounded(p.std_error),
            beta: betas.get(k).copied().map(rounded),
        })
        .collect()
}

pub fn study_json_value(table: &StudyTable) -> JsonStudy {
    let rows = table
        .rows
        .iter()
        .map(|r| JsonStudyRow {
            lambda: r.lambda,
            gamma_noreg: rounded(r.gamma_noreg()),
            gamma_reg: r.gamma_reg().map(rounded),
            gamma_theory_noreg: rounded(r.theory_noreg),
            gamma_theory_reg: r.theory_reg.map(|b| rounded(b.value())),
            lower_bound_only: r.theory_reg.map(RateBound::is_lower_bound_only),
            regime: r.regime.map(|s| s.label().to_string()),
            residual_noreg: rounded(r.noreg.residual),
            residual_reg: r.reg.as_ref().map(|e| rounded(e.residual)),
            errors_noreg: json_points(&r.noreg.errors, &[]),
            errors_reg: r
                .reg
                .as_ref()
                .map(|e| json_points(&e.errors, &r.betas))
                .unwrap_or_default(),
        })
        .collect();
    JsonStudy {
        config: table.config.clone(),
        notes: table.notes.clone(),
        rows,
    }
}

pub fn study_json(table: &StudyTable) -> String {
    let mut s = serde_json::to_string_pretty(&study_json_value(table)).expect("serialisable");
    s.push('\n');
    s
}

/// One row of theoretical rates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct CurveRow {
    pub lambda: f64,
    pub gamma_theory_noreg: f64,
    pub gamma_theory_reg: f64,
    pub lower_bound_only: bool,
}

pub fn curves_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            format_number(r.lambda),
            format_number(r.gamma_theory_noreg),
            format_number(r.gamma_theory_reg),
            r.lower_bound_only
        ));
    }
    out
}

pub fn curves_json(rows: &[CurveRow]) -> String {
    let rounded_rows: Vec<CurveRow> = rows
        .iter()
        .map(|r| CurveRow {
            gamma_theory_noreg: rounded(r.gamma_theory_noreg),
            gamma_theory_reg: rounded(r.gamma_theory_reg),
            ..*r
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&rounded_rows).expect("serialisable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_formatting() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(1.0), "1");
        assert_eq!(format_number(0.25), "0.25");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(2.0 / 3.0), "0.666666666667");
        assert_eq!(format_number(-1234.5), "-1234.5");
        assert_eq!(format_number(1e-5), "1e-05");
        assert_eq!(format_number(1.5e-7), "1.5e-07");
        assert_eq!(format_number(0.0001), "0.0001");
        assert_eq!(format_number(123456789012.0), "123456789012");
        assert_eq!(format_number(1234567890123.0), "1.23456789012e+12");
        assert_eq!(format_number(9.9999999999999), "10");
        assert_eq!(format_number(f64::NAN), "nan");
    }

    #[test]
    fn rounding_matches_format() {
        let v = std::f64::consts::PI;
        assert_eq!(rounded(v).to_string(), "3.14159265359");
    }

    #[test]
    fn curves_rows() {
        let rows = [CurveRow {
            lambda: 1.0,
            gamma_theory_noreg: 1.0,
            gamma_theory_reg: 1.0,
            lower_bound_only: false,
        }];
        assert_eq!(curves_csv(&rows), format!("{CURVES_HEADER}\n1,1,1,false\n"));
    }
}
