use std::fmt;
use std::io::Write;

use serde_json::{json, Value};

use blockbeta::densities::{
    density_head_on, exact_partition_sum, mc_moment, moment_constants, DensitySpec, McmcConfig, MomentMode,
};
use blockbeta::edgelimits::{
    dos_check, hard_edge_cdf, hard_edge_cross_check, hermite_spectra, soft_edge_cdf, soft_edge_cross_check,
    CrossCheck, CrossCheckSpec, HardEdgeConfig, Interaction, operator_a, SoftEdgeConfig,
};
use blockbeta::ensembles::{sample_hermite, sample_laguerre, EnsembleParams};
use blockbeta::io::{BlockJacobiJson, RunHeader};
use blockbeta::linalg::eigvalsh;
use blockbeta::randcore::{FieldTag, RngStream};
use blockbeta::vdm::{check_identity, conjecture_table, random_input, ConjectureForm, IdentityId};

use crate::{
    Common, ConjectureArg, DensityArgs, DosArgs, EdgeArgs, EdgeMode, FamilyArg, Format, InteractionArg, ModeArg,
    MomentArgs, SampleArgs, VerifyArgs,
};

/// Statistical tolerance for the cross-estimator tables.
const CROSS_TOL: f64 = 0.05;
/// Largest acceptable share of flagged paths.
const FLAG_LIMIT: f64 = 0.01;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    pub fn code(&self) -> u8 {
        self.code
    }

    fn usage(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<blockbeta::Error> for CliError {
    fn from(e: blockbeta::Error) -> Self {
        use blockbeta::Error as E;
        let code = match e {
            E::Domain(_) | E::Dimension(_) | E::Guard { .. } => 2,
            E::KrylovDegenerate { .. } | E::CoincidentPoints { .. } | E::Degenerate(_) => 3,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::usage(format!("csv: {e}"))
    }
}

type Res = Result<u8, CliError>;

fn field(beta: u32) -> Result<FieldTag, CliError> {
    Ok(FieldTag::from_beta(beta)?)
}

fn emit(common: &Common, body: &[u8]) -> Result<(), CliError> {
    match &common.out {
        Some(p) => std::fs::write(p, body)?,
        None => std::io::stdout().write_all(body)?,
    }
    Ok(())
}

fn emit_json(common: &Common, header: &RunHeader, report: Value) -> Result<(), CliError> {
    let v = json!({ "header": header, "report": report });
    let mut s = serde_json::to_string_pretty(&v).expect("json value serializes");
    s.push('\n');
    emit(common, s.as_bytes())
}

/// CSV with a `#`-prefixed JSON header line.
fn emit_csv(common: &Common, header: &RunHeader, columns: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut buf = format!("# {}\n", header.to_line()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(columns)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    emit(common, &buf)
}

fn interaction(a: InteractionArg) -> Interaction {
    match a {
        InteractionArg::Ito => Interaction::Ito,
        InteractionArg::Printed => Interaction::Printed,
    }
}

pub fn sample(a: &SampleArgs) -> Res {
    let tag = field(a.beta)?;
    let p = match a.family {
        FamilyArg::Hermite => EnsembleParams::hermite(tag, a.n, a.r, a.s),
        FamilyArg::Laguerre => {
            let m = a.m.ok_or_else(|| CliError::usage("laguerre needs --m"))?;
            EnsembleParams::laguerre(tag, a.n, a.r, a.s, m)
        }
    };
    match a.family {
        FamilyArg::Hermite => p.validate()?,
        FamilyArg::Laguerre => {
            p.validate_laguerre()?;
        }
    }
    let header = RunHeader::new(
        "sample",
        a.common.seed,
        json!({"family": format!("{:?}", a.family).to_lowercase(), "beta": a.beta, "n": a.n, "r": a.r, "s": a.s, "m": a.m, "count": a.count, "matrices": a.matrices}),
    );
    let stream = RngStream::new(a.common.seed, 0);
    if a.matrices {
        if a.family != FamilyArg::Hermite {
            return Err(CliError::usage("--matrices is available for the hermite family"));
        }
        let mats: Vec<BlockJacobiJson> = (0..a.count as u64)
            .map(|i| sample_hermite(&p, &mut stream.child(i).rng()).map(|t| BlockJacobiJson::from_matrix(&t, tag, a.s)))
            .collect::<Result<_, _>>()?;
        emit_json(&a.common, &header, json!(mats))?;
        return Ok(0);
    }
    let spectra: Vec<Vec<f64>> = match a.family {
        FamilyArg::Hermite => hermite_spectra(&p, a.count, &stream)?,
        FamilyArg::Laguerre => (0..a.count as u64)
            .map(|i| sample_laguerre(&p, &mut stream.child(i).rng()).and_then(|(_, w)| eigvalsh(&w)))
            .collect::<Result<_, _>>()?,
    };
    match a.format {
        Format::Json => emit_json(&a.common, &header, json!(spectra))?,
        Format::Csv => {
            let d = a.n * a.r;
            let mut cols = vec!["draw".to_string()];
            cols.extend((1..=d).map(|j| format!("lambda_{j}")));
            let rows: Vec<Vec<String>> = spectra
                .iter()
                .enumerate()
                .map(|(i, s)| std::iter::once(i.to_string()).chain(s.iter().map(|v| v.to_string())).collect())
                .collect();
            emit_csv(&a.common, &header, &cols, &rows)?;
        }
    }
    Ok(0)
}

pub fn verify(a: &VerifyArgs) -> Res {
    let stream = RngStream::new(a.common.seed, 0);
    if a.id == "conjecture" {
        let form = match a.form {
            ConjectureArg::Printed => ConjectureForm::Printed,
            ConjectureArg::SinglePower => ConjectureForm::SinglePower,
        };
        let lam = random_input(IdentityId::IdPfaff, a.n, 2, &mut stream.rng()).lambda;
        let rep = conjecture_table(a.n, &lam, form)?;
        let header = RunHeader::new("verify", a.common.seed, json!({"id": a.id, "n": a.n, "form": format!("{form:?}")}));
        let pass = rep.pass;
        emit_json(&a.common, &header, serde_json::to_value(&rep).expect("report serializes"))?;
        return Ok(if pass { 0 } else { 1 });
    }
    let id = IdentityId::from_name(&a.id).ok_or_else(|| {
        let names: Vec<&str> = IdentityId::ALL.iter().map(|i| i.name()).collect();
        CliError::usage(format!("unknown identity '{}'; known: {}, conjecture", a.id, names.join(", ")))
    })?;
    let size = if id == IdentityId::CauchyCycle { a.k.unwrap_or(a.n) } else { a.n };
    let mut reports = Vec::with_capacity(a.trials);
    for t in 0..a.trials as u64 {
        let input = random_input(id, size, a.r, &mut stream.child(t).rng());
        reports.push(check_identity(id, &input)?);
    }
    let failures = reports.iter().filter(|r| !r.pass).count();
    let header = RunHeader::new(
        "verify",
        a.common.seed,
        json!({"id": a.id, "size": size, "r": a.r, "trials": a.trials}),
    );
    let report = json!({
        "identity": id.name(),
        "size": size,
        "trials": a.trials,
        "failures": failures,
        "pass": failures == 0,
        "example": reports.first(),
        "failing_points": reports.iter().filter(|r| !r.pass).collect::<Vec<_>>(),
    });
    emit_json(&a.common, &header, report)?;
    Ok(if failures == 0 { 0 } else { 1 })
}

pub fn density_test(a: &DensityArgs) -> Res {
    let tag = field(a.beta)?;
    let spec = match a.family {
        FamilyArg::Hermite => DensitySpec::hermite(tag, a.n, a.r, a.s),
        FamilyArg::Laguerre => {
            let m = a.m.ok_or_else(|| CliError::usage("laguerre needs --m"))?;
            DensitySpec::laguerre(tag, a.n, a.r, a.s, m)
        }
    };
    spec.validate()?;
    let cfg = McmcConfig { n_chains: a.chains, per_chain: a.per_chain, ..McmcConfig::default() };
    let rep = density_head_on(&spec, &cfg, a.perms, a.common.seed)?;
    let header = RunHeader::new(
        "density-test",
        a.common.seed,
        json!({"spec": spec, "chains": a.chains, "per_chain": a.per_chain, "perms": a.perms}),
    );
    let pass = rep.p_value > 0.01;
    emit_json(&a.common, &header, json!({"result": rep, "level": 0.01, "pass": pass}))?;
    Ok(if pass { 0 } else { 1 })
}

pub fn moment(a: &MomentArgs) -> Res {
    let tag = field(a.beta)?;
    let d = a.n * a.r;
    let lam = a.lambda.clone().unwrap_or_else(|| (0..d).map(|i| i as f64).collect());
    if lam.len() != d {
        return Err(CliError::usage(format!("--lambda needs rn = {d} values")));
    }
    let mode = match a.mode {
        ModeArg::Haar => MomentMode::Haar,
        ModeArg::Gaussian => MomentMode::Gaussian,
    };
    let est = mc_moment(&lam, a.r, tag, a.exponent, a.samples, mode, &RngStream::new(a.common.seed, 0))?;
    // prediction c·S (Haar) or c·S/κ (Gaussian), when a closed form exists
    let s = a.exponent / tag.betaf();
    let mut prediction = None;
    if s > 0.0 {
        let (lc, lk) = moment_constants(a.n, tag, a.r, s)?;
        let half = a.exponent / 2.0;
        if let Some(lc) = lc {
            if half.fract() == 0.0 {
                let sum = exact_partition_sum(&lam, a.r, half as u32)?;
                let base = lc.exp() * sum;
                prediction = Some(match mode {
                    MomentMode::Haar => base,
                    MomentMode::Gaussian => base / lk.exp(),
                });
            }
        }
    }
    let pass = prediction.map(|p| (est.estimate - p).abs() <= 3.0 * est.std_error);
    let header = RunHeader::new(
        "moment",
        a.common.seed,
        json!({"n": a.n, "r": a.r, "beta": a.beta, "exp": a.exponent, "N": a.samples, "mode": mode, "lambda": lam}),
    );
    emit_json(&a.common, &header, json!({"estimate": est, "prediction": prediction, "within_3se": pass}))?;
    Ok(match pass {
        Some(false) => 1,
        _ => 0,
    })
}

fn edge_lambdas(a: &EdgeArgs, soft: bool) -> Vec<f64> {
    a.lambdas.clone().unwrap_or_else(|| if soft { vec![-1.0, 0.0, 1.0, 2.0, 3.0] } else { vec![0.25, 0.5, 1.0, 2.0, 4.0] })
}

fn cross_spec(a: &EdgeArgs, soft: bool) -> CrossCheckSpec {
    CrossCheckSpec {
        r: a.r,
        beta: a.beta,
        s: a.s,
        a: a.a,
        lambdas: edge_lambdas(a, soft),
        rn: a.rn,
        n_paths: a.paths,
        n_operator: a.operator_draws,
        n_ensemble: a.ensemble_draws,
        h: a.h.unwrap_or(if soft { 0.02 } else { 0.01 }),
        interaction: interaction(a.interaction),
    }
}

fn emit_cross(a: &EdgeArgs, cmd: &str, cc: &CrossCheck) -> Res {
    let header = RunHeader::new(cmd, a.common.seed, json!({"mode": "cross-check", "spec": cc.spec}));
    let pass = cc.max_difference <= CROSS_TOL;
    match a.format {
        Format::Json => emit_json(
            &a.common,
            &header,
            json!({"rows": cc.rows, "max_difference": cc.max_difference, "tolerance": CROSS_TOL, "flag_rate": cc.flag_rate, "resampled": cc.resampled, "pass": pass}),
        )?,
        Format::Csv => {
            let cols: Vec<String> = ["lambda", "sde", "sde_se", "operator", "ensemble"].iter().map(|s| s.to_string()).collect();
            let rows: Vec<Vec<String>> = cc
                .rows
                .iter()
                .map(|r| vec![r.lambda.to_string(), r.sde.to_string(), r.sde_se.to_string(), r.operator.to_string(), r.ensemble.to_string()])
                .collect();
            emit_csv(&a.common, &header, &cols, &rows)?;
        }
    }
    if cc.flag_rate > FLAG_LIMIT {
        return Ok(3);
    }
    Ok(if pass { 0 } else { 1 })
}

fn emit_cdf(a: &EdgeArgs, cmd: &str, config: Value, rows: &[blockbeta::edgelimits::CdfRow], flags: f64) -> Res {
    let header = RunHeader::new(cmd, a.common.seed, json!({"mode": "cdf", "config": config, "lambdas": edge_lambdas(a, cmd == "soft-edge"), "k": a.k}));
    match a.format {
        Format::Json => emit_json(&a.common, &header, json!({"rows": rows, "flag_rate": flags}))?,
        Format::Csv => {
            let cols: Vec<String> = ["lambda", "k", "estimate", "std_error"].iter().map(|s| s.to_string()).collect();
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r.lambda.to_string(), r.k.to_string(), r.estimate.to_string(), r.std_error.to_string()])
                .collect();
            emit_csv(&a.common, &header, &cols, &body)?;
        }
    }
    Ok(if flags > FLAG_LIMIT { 3 } else { 0 })
}

pub fn soft_edge(a: &EdgeArgs) -> Res {
    let stream = RngStream::new(a.common.seed, 0);
    match a.mode {
        EdgeMode::CrossCheck => {
            let cc = soft_edge_cross_check(&cross_spec(a, true), &stream)?;
            emit_cross(a, "soft-edge", &cc)
        }
        EdgeMode::Cdf => {
            if a.r < 1 {
                return Err(CliError::usage("r must be at least 1"));
            }
            let g = (a.r as f64 + a.s) / a.r as f64;
            let mut cfg = SoftEdgeConfig::new(a.r, a.beta, g, 0.0);
            cfg.n_paths = a.paths;
            cfg.interaction = interaction(a.interaction);
            cfg.noise = !a.noise_off;
            let (rows, flags) = soft_edge_cdf(&cfg, &edge_lambdas(a, true), a.k, &stream)?;
            emit_cdf(a, "soft-edge", json!(cfg), &rows, flags)
        }
    }
}

pub fn hard_edge(a: &EdgeArgs) -> Res {
    let stream = RngStream::new(a.common.seed, 0);
    match a.mode {
        EdgeMode::CrossCheck => {
            let cc = hard_edge_cross_check(&cross_spec(a, false), &stream)?;
            emit_cross(a, "hard-edge", &cc)
        }
        EdgeMode::Cdf => {
            if a.r < 1 {
                return Err(CliError::usage("r must be at least 1"));
            }
            let g = (a.r as f64 + a.s) / a.r as f64;
            let mut cfg = HardEdgeConfig::new(a.r, a.beta, g, operator_a(a.r, a.s, a.a), 0.0);
            cfg.n_paths = a.paths;
            cfg.interaction = interaction(a.interaction);
            cfg.noise = !a.noise_off;
            let (rows, flags) = hard_edge_cdf(&cfg, &edge_lambdas(a, false), a.k, &stream)?;
            emit_cdf(a, "hard-edge", json!(cfg), &rows, flags)
        }
    }
}

pub fn dos(a: &DosArgs) -> Res {
    let tag = field(a.beta)?;
    let p = EnsembleParams::hermite(tag, a.n, a.r, a.s);
    p.validate()?;
    if a.n * a.r < 200 {
        return Err(CliError::usage("dos needs rn >= 200"));
    }
    let spectra = hermite_spectra(&p, a.draws, &RngStream::new(a.common.seed, 0))?;
    let rep = dos_check(&spectra, a.r, a.s)?;
    let pass = rep.sup_distance < CROSS_TOL;
    let header = RunHeader::new("dos", a.common.seed, json!({"r": a.r, "s": a.s, "n": a.n, "beta": a.beta, "draws": a.draws}));
    emit_json(&a.common, &header, json!({"result": rep, "tolerance": CROSS_TOL, "pass": pass}))?;
    Ok(if pass { 0 } else { 1 })
}
