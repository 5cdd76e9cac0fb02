use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mollifem::{
    convolve_basis, predicted_gamma, run_study, verify, FeBasis, KernelKind, PiecewisePoly,
    RegimeParams, StudyConfig,
};
use serde::Serialize;

use crate::config::{self, Overrides};
use crate::error::CliError;
use crate::output::{self, CurveRow};

#[derive(Debug, Parser)]
#[command(
    name = "mollifem",
    version,
    about = "Convergence studies for mollified finite-element reconstruction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo rate study and emit fitted and predicted rates
    Study(StudyArgs),
    /// Emit the predicted rate curves over a lambda grid
    Curves(CurvesArgs),
    /// Dump one mollified basis function at breakpoints and interior samples
    Convolve(ConvolveArgs),
    /// Run the invariant suites; exits 4 if any check fails
    Verify,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Write here instead of standard output
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// TOML config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
    /// Approximation order (default: from the family)
    #[arg(long)]
    pub s_a: Option<u32>,
    /// Regularisation order (default: from the kernel)
    #[arg(long)]
    pub s_r: Option<u32>,
    /// Spatial dimension
    #[arg(long, default_value_t = 1)]
    pub d: u32,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ConvolveArgs {
    #[arg(long, default_value = "K")]
    pub kernel: String,
    #[arg(long, default_value = "P1")]
    pub family: String,
    #[arg(long, default_value_t = 11)]
    pub n: usize,
    /// 0-based basis index
    #[arg(long)]
    pub index: usize,
    /// Bandwidth; 0 dumps the plain basis function
    #[arg(long)]
    pub beta: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Study(a) => study(&a),
        Command::Curves(a) => curves(&a),
        Command::Convolve(a) => convolve(&a),
        Command::Verify => verify_all(),
    }
}

fn emit(text: &str, out: &OutputArgs) -> Result<(), CliError> {
    match &out.output {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|()| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

/// Resolved config plus normalisation notes, which are also printed as
/// warnings.
fn load(path: Option<&PathBuf>, ov: &Overrides) -> Result<(StudyConfig, Vec<String>), CliError> {
    let file = path.map(|p| config::load_file(p)).transpose()?;
    let (cfg, notes) = config::resolve(file.as_ref(), ov)?;
    for note in &notes {
        eprintln!("warning: {note}");
    }
    Ok((cfg, notes))
}

pub fn study(a: &StudyArgs) -> Result<(), CliError> {
    let (cfg, notes) = load(a.config.as_ref(), &a.overrides)?;
    let mut table = run_study(&cfg).map_err(|e| CliError::Validation(e.to_string()))?;
    table.notes.splice(0..0, notes);
    let text = match a.out.format {
        Format::Csv => output::study_csv(&table),
        Format::Json => output::study_json(&table),
    };
    emit(&text, &a.out)
}

/// Predicted rates for `(s_a, s_r, d)` over `lambdas`.
pub fn curve_rows(s_a: u32, s_r: u32, d: u32, lambdas: &[f64]) -> Vec<CurveRow> {
    lambdas
        .iter()
        .map(|&lambda| {
            let (noreg, reg) = predicted_gamma(&RegimeParams {
                s_a,
                s_r,
                d,
                lambda,
            });
            CurveRow {
                lambda,
                gamma_theory_noreg: noreg,
                gamma_theory_reg: reg.value(),
                lower_bound_only: reg.is_lower_bound_only(),
            }
        })
        .collect()
}

pub fn curves(a: &CurvesArgs) -> Result<(), CliError> {
    let (cfg, _) = load(a.config.as_ref(), &a.overrides)?;
    if a.d == 0 {
        return Err(CliError::Validation("d must be positive".into()));
    }
    let s_a = a.s_a.unwrap_or_else(|| cfg.family.approximation_order());
    let s_r = match (a.s_r, cfg.kernel) {
        (Some(s), _) => s,
        (None, Some(k)) => k.build::<f64>().order(),
        (None, None) => return Err(CliError::Validation("curves need --s-r or a kernel".into())),
    };
    if s_a == 0 || s_r == 0 {
        return Err(CliError::Validation("orders must be positive".into()));
    }
    let rows = curve_rows(s_a, s_r, a.d, &cfg.lambda_grid);
    let text = match a.out.format {
        Format::Csv => output::curves_csv(&rows),
        Format::Json => output::curves_json(&rows),
    };
    emit(&text, &a.out)
}

#[derive(Debug, Serialize)]
struct ConvolveDump {
    kernel: String,
    family: String,
    n: usize,
    index: usize,
    beta: f64,
    breakpoints: Vec<f64>,
    samples: Vec<(f64, f64)>,
}

/// Breakpoints plus 10 equispaced interior points per piece, in order.
pub fn sample_points(p: &PiecewisePoly<f64>) -> Vec<f64> {
    let b = p.breakpoints();
    let mut xs = Vec::with_capacity(11 * b.len());
    for w in b.windows(2) {
        xs.push(w[0]);
        xs.extend((1..=10).map(|k| w[0] + (w[1] - w[0]) * k as f64 / 11.0));
    }
    xs.extend(b.last().copied());
    xs
}

pub fn convolve(a: &ConvolveArgs) -> Result<(), CliError> {
    let family = config::parse_family(&a.family)?;
    let kind: Option<KernelKind> = config::parse_kernel(&a.kernel)?;
    if !a.beta.is_finite() || a.beta < 0.0 {
        return Err(CliError::Validation(format!(
            "beta must be finite and nonnegative, got {}",
            a.beta
        )));
    }
    let basis =
        FeBasis::<f64>::build(family, a.n).map_err(|e| CliError::Validation(e.to_string()))?;
    let func = match kind {
        Some(k) if a.beta > 0.0 => convolve_basis(&k.build(), a.beta, &basis, a.index)
            .map_err(|e| CliError::Validation(e.to_string()))?,
        _ => basis
            .basis_function(a.index)
            .map_err(|e| CliError::Validation(e.to_string()))?,
    };
    let samples: Vec<(f64, f64)> = sample_points(&func)
        .into_iter()
        .map(|x| (x, func.eval(x)))
        .collect();
    let text = match a.out.format {
        Format::Csv => {
            let mut s = String::from("x,value\n");
            for (x, v) in &samples {
                s.push_str(&format!(
                    "{},{}\n",
                    output::format_number(*x),
                    output::format_number(*v)
                ));
            }
            s
        }
        Format::Json => {
            let dump = ConvolveDump {
                kernel: kind.map(|k| k.to_string()).unwrap_or_else(|| "none".into()),
                family: family.to_string(),
                n: a.n,
                index: a.index,
                beta: a.beta,
                breakpoints: func
                    .breakpoints()
                    .iter()
                    .copied()
                    .map(output::rounded)
                    .collect(),
                samples: samples
                    .iter()
                    .map(|&(x, v)| (output::rounded(x), output::rounded(v)))
                    .collect(),
            };
            let mut s = serde_json::to_string_pretty(&dump).expect("serialisable");
            s.push('\n');
            s
        }
    };
    emit(&text, &a.out)
}

pub fn verify_all() -> Result<(), CliError> {
    let checks = verify::run_all();
    let mut stdout = std::io::stdout().lock();
    for c in &checks {
        writeln!(stdout, "{c}").map_err(|e| CliError::Io(format!("stdout: {e}")))?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    eprintln!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_examples() {
        let r = curve_rows(2, 1, 1, &[1.0])[0];
        assert!((r.gamma_theory_noreg - 1.0).abs() < 1e-12);
        assert!((r.gamma_theory_reg - 1.0).abs() < 1e-12);
        let r = curve_rows(3, 2, 1, &[0.0])[0];
        assert!((r.gamma_theory_reg - 0.4).abs() < 1e-12);
        assert!(!r.lower_bound_only);
        assert!(curve_rows(2, 1, 1, &[3.0])[0].lower_bound_only);
    }

    #[test]
    fn sample_points_per_piece() {
        let p = PiecewisePoly::<f64>::indicator(0.0, 1.0, 1.0).unwrap();
        let xs = sample_points(&p);
        assert_eq!(xs.len(), 12);
        assert_eq!((xs[0], xs[11]), (0.0, 1.0));
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }
}
