//! Batch interface to the sosgap library: one subcommand per process,
//! JSON in, JSON out, deterministic for a fixed seed.
//!
//! Exit codes separate three outcomes so shell pipelines can branch:
//! 0 for success (including positive verdicts: member, separates,
//! sos), 2 for a computed negative verdict (not a member, does not
//! separate, not a sum of squares, inconclusive), and 1 for errors.
//! Floats are emitted in scientific notation with 17 significant
//! digits, which round-trips every f64 exactly.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use sosgap::certify::{
    boundary_form, make_nonsos, sos_check, verify_certificate, SeparationCertificate, SosVerdict,
    SOS_CHECK_MAX_ITERS, SOS_CHECK_TOL,
};
use sosgap::extremal::{
    build_extremal_complex, build_extremal_real, conjecture_scan, functional_from_kernel,
    kernel_of, recover_point_evaluation, DualFunctional, ExtremalVariant, ExtremeRayCertificate,
};
use sosgap::forms::{monomial_basis, Case, ComplexPoint, HomogeneousForm};
use sosgap::tcone::{extreme_square, positive_lift, t_membership, EvalVector};
use sosgap::varieties::{
    cb_relation, complete_intersection, normalize_complex_pair, rescale_unit_modulus,
    CBRelation, ComplexScalar, ConfigRecord, Normalization, PointConfiguration,
};

#[derive(Parser)]
#[command(name = "sosgap", version, about = "Nonnegative forms vs sums of squares: \
    Cayley-Bacharach relations, extreme rays, separation certificates, and the \
    evaluation cone, over the cases (3,6) and (4,4)")]
struct RunConfig {
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every randomized step (default: $SOSGAP_SEED, else 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monomial basis of the forms of one degree.
    Basis {
        /// "3,6" or "4,4".
        #[arg(long)]
        case: String,
        #[arg(long)]
        degree: usize,
    },
    /// Intersect defining forms into a point configuration.
    Intersect {
        #[arg(long)]
        case: String,
        /// JSON array of forms (n - 1 forms of the half degree).
        #[arg(long)]
        forms: PathBuf,
    },
    /// Extract the Cayley-Bacharach relation of a configuration.
    Relation {
        #[arg(long)]
        config: PathBuf,
        /// Optional representative rescaling applied to points and relation.
        #[arg(long, value_enum, default_value_t = NormalizeArg::None)]
        normalize: NormalizeArg,
    },
    /// Build the fully real extreme-ray certificate.
    ExtremalReal {
        #[arg(long)]
        config: PathBuf,
        /// Index of the negative weight.
        #[arg(long)]
        k: usize,
        /// Free weights: one value for all, or comma-separated list.
        #[arg(long)]
        a: String,
    },
    /// Build the one-conjugate-pair extreme-ray certificate.
    ExtremalComplex {
        #[arg(long)]
        config: PathBuf,
        /// Real-point weights: one value for all, or comma-separated list.
        #[arg(long)]
        a: String,
        /// Imaginary part of the pair weight (|t| <= 1/S).
        #[arg(long)]
        t: f64,
    },
    /// Kernel of a functional's moment matrix, as forms.
    Kernel {
        #[arg(long)]
        functional: PathBuf,
    },
    /// Reconstruct the extreme-ray functional annihilating a kernel.
    FunctionalFromKernel {
        #[arg(long)]
        kernel: PathBuf,
    },
    /// Perturb a certificate kernel into a nonnegative non-SOS witness.
    MakeNonsos {
        #[arg(long)]
        certificate: PathBuf,
        /// Fraction of the kernel sphere minimum subtracted, in (0,1).
        #[arg(long, default_value_t = 0.5)]
        margin: f64,
    },
    /// Pair a functional against a form: does it separate from SOS?
    Verify {
        #[arg(long)]
        functional: PathBuf,
        #[arg(long)]
        form: PathBuf,
    },
    /// Alternating-projection SOS feasibility check.
    SosCheck {
        #[arg(long)]
        form: PathBuf,
        #[arg(long, default_value_t = SOS_CHECK_MAX_ITERS)]
        max_iters: usize,
        #[arg(long, default_value_t = SOS_CHECK_TOL)]
        tol: f64,
    },
    /// Strictly positive form on the SOS boundary from a certificate.
    BoundaryForm {
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Membership of a value vector in the evaluation cone T.
    TconeMember {
        /// Inline JSON array, e.g. "[1,0,0,0,0,0,0,0,0]".
        #[arg(long)]
        x: String,
        /// Optional inline JSON array of weights.
        #[arg(long)]
        weights: Option<String>,
    },
    /// Realize a T-boundary vector as squared values of one form.
    ExtremeSquare {
        #[arg(long)]
        x: String,
        /// Configuration with a bundled unit-modulus relation.
        #[arg(long)]
        config: PathBuf,
    },
    /// Lift a strictly positive value vector to a nonnegative form.
    PositiveLift {
        #[arg(long)]
        s: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample subsystems of a kernel and tabulate real-point counts.
    ConjectureScan {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Invert a rank-1 moment functional into its point evaluation.
    RecoverPoint {
        #[arg(long)]
        functional: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NormalizeArg {
    None,
    UnitModulus,
    ComplexPair,
}

// ---------------------------------------------------------------------
// JSON records.  Readers reject unknown fields so a mis-shapen file
// fails loudly instead of being half-understood.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisRecord {
    n: usize,
    degree: usize,
    count: usize,
    monomials: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateRecord {
    case: Case,
    /// Configuration with the relation the certificate was built on.
    config: ConfigRecord,
    /// Full weight vector over the real points (includes a_k).
    a: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    /// Point weights of the moment functional (complex at a pair).
    mu: Vec<ComplexScalar>,
    rank: usize,
    kernel: Vec<HomogeneousForm>,
}

impl CertificateRecord {
    fn from_certificate(cert: &ExtremeRayCertificate) -> CertificateRecord {
        let (a, k, m, t) = match cert.variant() {
            ExtremalVariant::RealWeights { a, k } => (a.clone(), Some(*k), None, None),
            ExtremalVariant::ComplexPair { a, m, t } => (a.clone(), None, Some(*m), Some(*t)),
        };
        CertificateRecord {
            case: cert.case(),
            config: ConfigRecord::from_config(cert.support(), Some(cert.relation())),
            a,
            k,
            m,
            t,
            mu: cert
                .functional()
                .weights()
                .iter()
                .map(|&w| w.into())
                .collect(),
            rank: cert.rank(),
            kernel: cert.kernel().to_vec(),
        }
    }

    /// Rebuilds the certificate from its defining data and checks the
    /// derived fields (weights, mu, rank) against the stored ones.
    fn rebuild(self) -> Result<ExtremeRayCertificate> {
        let (config, rel) = self.config.into_parts()?;
        let rel = rel.context("certificate file has no bundled relation")?;
        let cert = match (self.k, self.m, self.t) {
            (Some(k), None, None) => {
                if k >= self.a.len() {
                    bail!("index k = {k} out of range for {} weights", self.a.len());
                }
                let free: Vec<f64> = self
                    .a
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != k)
                    .map(|(_, &w)| w)
                    .collect();
                let cert = build_extremal_real(&config, &rel, &free, k)?;
                let rebuilt_ak = match cert.variant() {
                    ExtremalVariant::RealWeights { a, .. } => a[k],
                    _ => unreachable!("real build returns real variant"),
                };
                let stored_ak = self.a[k];
                if (rebuilt_ak - stored_ak).abs() > 1e-9 * stored_ak.abs().max(1.0) {
                    bail!("stored a_k = {stored_ak} disagrees with rebuilt {rebuilt_ak}");
                }
                cert
            }
            (None, Some(_), Some(t)) => build_extremal_complex(&config, &rel, &self.a, t)?,
            _ => bail!("certificate must carry either k (real) or m and t (complex pair)"),
        };
        if cert.rank() != self.rank {
            bail!("stored rank {} disagrees with rebuilt {}", self.rank, cert.rank());
        }
        let weights = cert.functional().weights();
        if weights.len() != self.mu.len() {
            bail!("stored mu length {} vs rebuilt {}", self.mu.len(), weights.len());
        }
        let scale = weights.iter().map(|w| w.norm()).fold(1.0, f64::max);
        for (i, (w, s)) in weights.iter().zip(&self.mu).enumerate() {
            if (w.re - s.re).abs() > 1e-9 * scale || (w.im - s.im).abs() > 1e-9 * scale {
                bail!("stored mu[{i}] disagrees with rebuilt weight");
            }
        }
        Ok(cert)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelRecord {
    case: Case,
    forms: Vec<HomogeneousForm>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WitnessRecord {
    form: HomogeneousForm,
    epsilon: f64,
    q_sphere_min: f64,
    f_sphere_min: f64,
    functional: DualFunctional,
    certificate: SeparationCertificate,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GramRecord {
    verdict: SosVerdict,
    iterations: usize,
    gap: f64,
    tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gram: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gram_rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factors: Option<Vec<HomogeneousForm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    constraint_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    functional: Option<DualFunctional>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    separation: Option<SeparationCertificate>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryRecord {
    form: HomogeneousForm,
    sphere_min: f64,
    functional_value: f64,
    gram_rank: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SquareRecord {
    config: ConfigRecord,
    q: HomogeneousForm,
    /// Squared values of q at the points; matches the requested x.
    image: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LiftRecord {
    form: HomogeneousForm,
    lambda: f64,
    barrier_min: f64,
    preimage_min: f64,
    sphere_min: f64,
    /// Values of the lifted form at the points (the requested s).
    values: Vec<f64>,
    /// Whether s already lay in the evaluation cone of squares.
    member: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScanRecord {
    trials: usize,
    real_count_histogram: std::collections::BTreeMap<usize, usize>,
    degenerate_draws: usize,
    fully_real_found: bool,
    first_fully_real_trial: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<HomogeneousForm>>,
    max_pair_count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecoverRecord {
    point: ComplexPoint,
    scale: f64,
}

// ---------------------------------------------------------------------
// Emission: floats as {:.16e} (17 significant digits), one JSON
// document, trailing newline, written once at the end of the run.

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f32,
    ) -> std::io::Result<()> {
        write!(writer, "{value:e}")
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_inline_vec(text: &str, what: &str) -> Result<Vec<f64>> {
    serde_json::from_str(text).with_context(|| format!("parsing inline {what} array"))
}

/// "0.5" broadcasts to `expected` copies; "1,2,3" must list exactly
/// `expected` values.
fn parse_weights(text: &str, expected: usize) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("weight {p:?}")))
        .collect::<Result<_>>()?;
    if parts.len() == 1 && expected > 1 {
        return Ok(vec![parts[0]; expected]);
    }
    if parts.len() != expected {
        bail!("expected {expected} weights, got {}", parts.len());
    }
    Ok(parts)
}

/// Configuration plus the relation to use: the bundled one when the
/// file carries it, freshly extracted otherwise.
fn config_with_relation(path: &Path) -> Result<(PointConfiguration, CBRelation)> {
    let record: ConfigRecord = read_json(path)?;
    let (config, rel) = record.into_parts()?;
    let rel = match rel {
        Some(r) => r,
        None => cb_relation(&config)?,
    };
    Ok((config, rel))
}

// ---------------------------------------------------------------------

fn main() -> ExitCode {
    let run = RunConfig::parse();
    let seed = run.seed.unwrap_or_else(|| {
        std::env::var("SOSGAP_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0)
    });
    match dispatch(run.command, seed) {
        Ok((json, code)) => {
            let write_result = match &run.out {
                Some(path) => fs::write(path, &json)
                    .with_context(|| format!("writing {}", path.display())),
                None => std::io::stdout()
                    .write_all(json.as_bytes())
                    .context("writing stdout"),
            };
            if let Err(e) = write_result {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command, seed: u64) -> Result<(String, u8)> {
    match command {
        Command::Basis { case, degree } => {
            let case = Case::parse(&case)?;
            let monomials = monomial_basis(case.vars(), degree);
            let record = BasisRecord {
                n: case.vars(),
                degree,
                count: monomials.len(),
                monomials,
            };
            Ok((to_json(&record)?, 0))
        }
        Command::Intersect { case, forms } => {
            let case = Case::parse(&case)?;
            let forms: Vec<HomogeneousForm> = read_json(&forms)?;
            let config = complete_intersection(case, &forms, seed)?;
            let record = ConfigRecord::from_config(&config, None);
            Ok((to_json(&record)?, 0))
        }
        Command::Relation { config, normalize } => {
            let (config, rel) = config_with_relation(&config)?;
            let (config, rel) = match normalize {
                NormalizeArg::None => (config, rel),
                NormalizeArg::UnitModulus => rescale_unit_modulus(&config, &rel)?,
                NormalizeArg::ComplexPair => normalize_complex_pair(&config, &rel)?,
            };
            let record = ConfigRecord::from_config(&config, Some(&rel));
            Ok((to_json(&record)?, 0))
        }
        Command::ExtremalReal { config, k, a } => {
            let (config, rel) = config_with_relation(&config)?;
            let free = parse_weights(&a, config.len().saturating_sub(1))?;
            let cert = build_extremal_real(&config, &rel, &free, k)?;
            Ok((to_json(&CertificateRecord::from_certificate(&cert))?, 0))
        }
        Command::ExtremalComplex { config, a, t } => {
            let (config, rel) = config_with_relation(&config)?;
            // The pair weight formula needs the pair coefficient pinned
            // to 1; renormalizing here only rescales the two conjugate
            // representatives, so real-point weights keep their meaning.
            let (config, rel) = if rel.normalization() == Normalization::ComplexPairNormalized {
                (config, rel)
            } else {
                normalize_complex_pair(&config, &rel)?
            };
            let weights = parse_weights(&a, config.real_count())?;
            let cert = build_extremal_complex(&config, &rel, &weights, t)?;
            Ok((to_json(&CertificateRecord::from_certificate(&cert))?, 0))
        }
        Command::Kernel { functional } => {
            let l: DualFunctional = read_json(&functional)?;
            let forms = kernel_of(&l)?;
            let record = KernelRecord {
                case: l.case(),
                forms,
            };
            Ok((to_json(&record)?, 0))
        }
        Command::FunctionalFromKernel { kernel } => {
            let record: KernelRecord = read_json(&kernel)?;
            let functional = functional_from_kernel(&record.forms, seed)?;
            Ok((to_json(functional.dual())?, 0))
        }
        Command::MakeNonsos {
            certificate,
            margin,
        } => {
            let record: CertificateRecord = read_json(&certificate)?;
            let cert = record.rebuild()?;
            let witness = make_nonsos(&cert, margin, seed)?;
            let code = if witness.certificate.separates { 0 } else { 2 };
            let record = WitnessRecord {
                form: witness.form,
                epsilon: witness.epsilon,
                q_sphere_min: witness.q_sphere_min,
                f_sphere_min: witness.f_sphere_min,
                functional: cert.functional().dual().clone(),
                certificate: witness.certificate,
            };
            Ok((to_json(&record)?, code))
        }
        Command::Verify { functional, form } => {
            let l: DualFunctional = read_json(&functional)?;
            let p: HomogeneousForm = read_json(&form)?;
            let cert = verify_certificate(&l, &p)?;
            let code = if cert.separates { 0 } else { 2 };
            Ok((to_json(&cert)?, code))
        }
        Command::SosCheck {
            form,
            max_iters,
            tol,
        } => {
            let p: HomogeneousForm = read_json(&form)?;
            let result = sos_check(&p, max_iters, tol)?;
            let code = match result.verdict {
                SosVerdict::Sos => 0,
                SosVerdict::NotSosNumeric | SosVerdict::Inconclusive => 2,
            };
            let gram = result.gram.map(|g| {
                (0..g.dim())
                    .map(|i| (0..g.dim()).map(|j| g.get(i, j)).collect())
                    .collect()
            });
            let record = GramRecord {
                verdict: result.verdict,
                iterations: result.iterations,
                gap: result.gap,
                tol: result.tol,
                gram,
                gram_rank: result.gram_rank,
                factors: result.factors,
                constraint_residual: result.constraint_residual,
                functional: result.functional,
                separation: result.separation,
            };
            Ok((to_json(&record)?, code))
        }
        Command::BoundaryForm { certificate } => {
            let record: CertificateRecord = read_json(&certificate)?;
            let cert = record.rebuild()?;
            let boundary = boundary_form(&cert)?;
            let record = BoundaryRecord {
                form: boundary.form,
                sphere_min: boundary.sphere_min,
                functional_value: boundary.functional_value,
                gram_rank: boundary.gram_rank,
            };
            Ok((to_json(&record)?, 0))
        }
        Command::TconeMember { x, weights } => {
            let x = EvalVector::new(parse_inline_vec(&x, "x")?)?;
            let weights = match &weights {
                Some(w) => Some(parse_inline_vec(w, "weights")?),
                None => None,
            };
            let report = t_membership(&x, weights.as_deref())?;
            let code = if report.member { 0 } else { 2 };
            Ok((to_json(&report)?, code))
        }
        Command::ExtremeSquare { x, config } => {
            let record: ConfigRecord = read_json(&config)?;
            let (config, rel) = record.into_parts()?;
            let rel = rel.context(
                "extreme-square needs a config with a bundled unit-modulus relation \
                 (run: relation --normalize unit-modulus), because x lists values at \
                 the rescaled representatives",
            )?;
            let x = EvalVector::new(parse_inline_vec(&x, "x")?)?;
            let q = extreme_square(&x, &config, &rel)?;
            let vals = config.evaluate_coords(&q)?;
            let record = SquareRecord {
                config: ConfigRecord::from_config(&config, Some(&rel)),
                q,
                image: vals.iter().map(|v| v * v).collect(),
            };
            Ok((to_json(&record)?, 0))
        }
        Command::PositiveLift { s, config } => {
            let record: ConfigRecord = read_json(&config)?;
            let (config, _) = record.into_parts()?;
            let s = EvalVector::new(parse_inline_vec(&s, "s")?)?;
            let member = t_membership(&s, None).map(|r| r.member).unwrap_or(false);
            let lift = positive_lift(&s, &config, seed)?;
            let values = config.evaluate_coords(&lift.form)?;
            let record = LiftRecord {
                form: lift.form,
                lambda: lift.lambda,
                barrier_min: lift.barrier_min,
                preimage_min: lift.preimage_min,
                sphere_min: lift.sphere_min,
                values,
                member,
            };
            Ok((to_json(&record)?, 0))
        }
        Command::ConjectureScan { kernel, trials } => {
            let record: KernelRecord = read_json(&kernel)?;
            let report = conjecture_scan(&record.forms, trials, seed)?;
            let record = ScanRecord {
                trials: report.trials,
                real_count_histogram: report.real_count_histogram,
                degenerate_draws: report.degenerate_draws,
                fully_real_found: report.fully_real_found,
                first_fully_real_trial: report.first_fully_real_trial,
                witness: report.witness,
                max_pair_count: report.max_pair_count,
            };
            Ok((to_json(&record)?, 0))
        }
        Command::RecoverPoint { functional } => {
            let l: DualFunctional = read_json(&functional)?;
            let recovered = recover_point_evaluation(&l)?;
            let record = RecoverRecord {
                point: recovered.point,
                scale: recovered.scale,
            };
            Ok((to_json(&record)?, 0))
        }
    }
}
