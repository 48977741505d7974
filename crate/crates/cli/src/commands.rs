//! Report-producing commands. Each returns a serializable report; printing
//! and exit codes are left to the binary.

use std::path::PathBuf;

use natcon::chart::{
    builtin_chart, natural_connection_fd_check, phi_fd, structure_tensor_at, FdConfig, FdNaturality,
};
use natcon::classifier::{classify, cyclic_map, lee_form, ClassReport};
use natcon::connections::{
    canonical_torsion, canonical_torsion_with_tolerance, case_b_residual, is_natural,
    phi_from_f_with_tolerance, q_from_torsion, w1_family_torsion, FamilyParams, NaturalityCheck,
};
use natcon::structure_gen::{
    make_constrained_f, make_w1_f, project_to_f_symmetries, random_metric,
    random_product_structure, random_tensor, ClassSpec,
};
use natcon::torsion_space::{case_label, decompose, Case, DEFAULT_CASE_TOL};
use natcon::{Covector, Dim, Metric, ProductStructure, Tolerance, TorsionDecomposition};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::tensor_file::TensorFile;

/// Class tolerance used for finite-difference chart data.
pub const CHART_CLASS_TOL: f64 = 1e-4;

/// Common envelope: command echo, digest of the inputs, and the result.
#[derive(Debug, Serialize)]
pub struct Report<A, R> {
    pub command: &'static str,
    pub args: A,
    pub input_sha256: String,
    pub result: R,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn args_digest<A: Serialize>(args: &A, extra: &[u8]) -> String {
    let mut bytes = serde_json::to_vec(args).expect("arguments serialize");
    bytes.extend_from_slice(extra);
    sha256_hex(&bytes)
}

#[derive(Debug, Clone, Serialize)]
pub struct FileArgs {
    pub file: PathBuf,
    pub tol: f64,
}

pub fn classify_cmd(args: FileArgs) -> Result<Report<FileArgs, ClassReport>> {
    check_tol(args.tol)?;
    let (file, bytes) = TensorFile::read(&args.file)?;
    let (g, p) = file.geometry()?;
    let f = file.structure_tensor(&p)?;
    Ok(Report {
        command: "classify",
        input_sha256: sha256_hex(&bytes),
        result: classify(&f, &g, &p, args.tol),
        args,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionSummary {
    /// `‖p1 T‖ .. ‖p4 T‖` in the metric norm.
    pub norms: [f64; 4],
    pub total_norm: f64,
    pub completeness_residual: f64,
    pub case: Case,
    pub nonzero: [bool; 4],
}

impl DecompositionSummary {
    fn new(dec: &TorsionDecomposition, tol: f64) -> Self {
        let label = case_label(dec, tol);
        Self {
            norms: dec.norms,
            total_norm: dec.total_norm,
            completeness_residual: dec.completeness_residual,
            case: label.case,
            nonzero: label.nonzero,
        }
    }
}

pub fn decompose_cmd(args: FileArgs) -> Result<Report<FileArgs, DecompositionSummary>> {
    check_tol(args.tol)?;
    let (file, bytes) = TensorFile::read(&args.file)?;
    let (g, p) = file.geometry()?;
    let t = file.torsion()?;
    let dec = decompose(&t, &g, &p)?;
    Ok(Report {
        command: "decompose",
        input_sha256: sha256_hex(&bytes),
        result: DecompositionSummary::new(&dec, args.tol.max(DEFAULT_CASE_TOL)),
        args,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyArgs {
    /// Half dimension.
    pub n: usize,
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub g: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct FamilyResult {
    pub lambda: f64,
    pub mu: f64,
    /// `(λ, μ)` of the canonical member.
    pub canonical_params: [f64; 2],
    pub is_canonical: bool,
    pub decomposition: DecompositionSummary,
    pub naturality: NaturalityCheck,
    pub case_b_residual: f64,
    pub tensor_file: TensorFile,
}

/// Geometry from an optional tensor file, else `g = I`, `P = diag(I, −I)`.
fn geometry_or_standard(
    n: Dim,
    path: Option<&PathBuf>,
) -> Result<(Metric, ProductStructure, Vec<u8>)> {
    match path {
        None => Ok((
            Metric::identity(n),
            ProductStructure::standard(n),
            Vec::new(),
        )),
        Some(path) => {
            let (file, bytes) = TensorFile::read(path)?;
            if file.dim != n.total() {
                return Err(CliError::Usage(format!(
                    "{} has dimension {}, expected {}",
                    path.display(),
                    file.dim,
                    n.total()
                )));
            }
            let (g, p) = file.geometry()?;
            Ok((g, p, bytes))
        }
    }
}

pub fn family_cmd(args: FamilyArgs) -> Result<Report<FamilyArgs, FamilyResult>> {
    let n = Dim::new(args.n)?;
    if args.theta.len() != n.total() {
        return Err(CliError::Usage(format!(
            "--theta needs {} entries, got {}",
            n.total(),
            args.theta.len()
        )));
    }
    if !(args.lambda.is_finite() && args.mu.is_finite() && args.theta.iter().all(|v| v.is_finite()))
    {
        return Err(CliError::Usage("parameters must be finite".into()));
    }
    let (g, p, extra) = geometry_or_standard(n, args.g.as_ref())?;
    let theta = Covector::new(args.theta.clone());
    let f = make_w1_f(&g, &p, &theta);
    let params = FamilyParams::new(args.lambda, args.mu, n);
    let t = w1_family_torsion(&g, &p, &theta, &params);
    let dec = decompose(&t, &g, &p)?;
    let canonical = FamilyParams::canonical(n);
    let tensor_file = TensorFile::new(&g, &p)
        .with_f(&f)
        .with_t(&t)
        .with_theta(&theta);
    if let Some(out) = &args.out {
        tensor_file.write(out)?;
    }
    Ok(Report {
        command: "family",
        input_sha256: args_digest(&args, &extra),
        result: FamilyResult {
            lambda: args.lambda,
            mu: args.mu,
            canonical_params: [canonical.lambda, canonical.mu],
            is_canonical: params.is_canonical(0.0),
            decomposition: DecompositionSummary::new(&dec, DEFAULT_CASE_TOL),
            naturality: is_natural(&q_from_torsion(&t), &f, &p, 1e-9),
            case_b_residual: case_b_residual(&t, &f, &p),
            tensor_file,
        },
        args,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartArgs {
    pub chart: String,
    pub point: Vec<f64>,
    pub h: f64,
    pub tol: f64,
}

#[derive(Debug, Serialize)]
pub struct ChartResult {
    pub tensor_file: TensorFile,
    pub class_report: ClassReport,
    /// `‖∇'g‖`, `‖∇'P‖` for the canonical connection, when F is in W1⊕W2.
    pub canonical_fd_check: Option<FdNaturality>,
    /// Largest entry of `Φ_fd − Φ(F)`, when F is in W1⊕W2.
    pub phi_discrepancy: Option<f64>,
    pub notes: Vec<String>,
}

pub fn chart_cmd(args: ChartArgs) -> Result<Report<ChartArgs, ChartResult>> {
    check_tol(args.tol)?;
    let n = Dim::from_total(args.point.len())?;
    let chart = builtin_chart(&args.chart, n)?;
    let cfg = FdConfig::new(args.h)?;
    let (g, p, f) = structure_tensor_at(chart.as_ref(), &args.point, cfg)?;
    let class_report = classify(&f, &g, &p, args.tol);
    let theta = lee_form(f.tensor(), &g);
    let mut tensor_file = TensorFile::new(&g, &p).with_f(&f).with_theta(&theta);
    let mut notes = Vec::new();

    let class_tol = Tolerance::new(0.0, args.tol);
    let cyclic = cyclic_map(f.tensor(), &p).frobenius_norm();
    let (canonical_fd_check, phi_discrepancy) =
        if class_tol.negligible(cyclic, f.tensor().frobenius_norm()) {
            let t = canonical_torsion_with_tolerance(&f, &p, class_tol)?;
            let check = natural_connection_fd_check(chart.as_ref(), &args.point, &t, cfg)?;
            let phi = phi_fd(chart.as_ref(), &args.point, cfg)?;
            let expected = phi_from_f_with_tolerance(&f, &p, class_tol)?;
            let phi_err = Some((phi.tensor() - expected.tensor()).max_abs());
            tensor_file = tensor_file.with_t(&t);
            (Some(check), phi_err)
        } else {
            notes.push("structure tensor is outside W1⊕W2: no canonical connection".into());
            (None, None)
        };
    Ok(Report {
        command: "chart",
        input_sha256: args_digest(&args, &[]),
        result: ChartResult {
            tensor_file,
            class_report,
            canonical_fd_check,
            phi_discrepancy,
            notes,
        },
        args,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    /// W1 structure tensor built from θ.
    W1,
    /// W1 structure tensor plus its canonical torsion.
    Canonical,
    W2,
    W1PlusW2,
    /// Structure tensor failing the cyclic condition.
    Generic,
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureArgs {
    pub kind: FixtureKind,
    pub n: usize,
    pub theta: Option<Vec<f64>>,
    pub seed: u64,
    pub random_geometry: bool,
}

/// Builds a tensor file for one of the standard fixtures.
pub fn fixture_cmd(args: &FixtureArgs) -> Result<TensorFile> {
    let n = Dim::new(args.n)?;
    let (g, p) = if args.random_geometry {
        let g = random_metric(n, args.seed);
        let p = random_product_structure(&g, args.seed)?;
        (g, p)
    } else {
        (Metric::identity(n), ProductStructure::standard(n))
    };
    let theta = match &args.theta {
        Some(t) if t.len() != n.total() => {
            return Err(CliError::Usage(format!(
                "--theta needs {} entries, got {}",
                n.total(),
                t.len()
            )))
        }
        Some(t) => Covector::new(t.clone()),
        None => {
            let mut e1 = vec![0.0; n.total()];
            e1[0] = 1.0;
            Covector::new(e1)
        }
    };
    let file = TensorFile::new(&g, &p);
    Ok(match args.kind {
        FixtureKind::W1 => file.with_f(&make_w1_f(&g, &p, &theta)).with_theta(&theta),
        FixtureKind::Canonical => {
            let f = make_w1_f(&g, &p, &theta);
            let t = canonical_torsion(&f, &p)?;
            file.with_f(&f).with_t(&t).with_theta(&theta)
        }
        FixtureKind::W2 => file.with_f(&make_constrained_f(&g, &p, ClassSpec::W2, args.seed)?),
        FixtureKind::W1PlusW2 => {
            file.with_f(&make_constrained_f(&g, &p, ClassSpec::W1PlusW2, args.seed)?)
        }
        FixtureKind::Generic => file.with_f(&project_to_f_symmetries(
            &random_tensor(g.dim(), args.seed),
            &p,
        )),
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}
