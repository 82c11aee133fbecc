use std::path::{Path, PathBuf};

use ibnc_core::copula::{self, mgib_solve, MgibOptions, MgibReport};
use ibnc_core::gib::{self, Target};
use ibnc_core::identifiability::{self, CcaOptions, CcaResult};
use ibnc_core::nc_metrics::{
    self, IbGap, IbGapOptions, NcOptions, NcReport, ProbeOptions, ProbeResult,
};
use ibnc_core::repr_io::{self, Format};
use ibnc_core::synth::{self, EtfSpec, MixtureSpec};
use ibnc_core::{Error, RepresentationSet};
use serde::Serialize;

use crate::output::{self, check_writable, CliError, CliResult};
use crate::{AgreementArgs, CcaArgs, MgibArgs, NcArgs, ProbeArgs, SplitArgs, SynthArgs};

#[derive(Serialize)]
struct SetSummary {
    name: String,
    rows: usize,
    dim: usize,
    classes: usize,
}

impl SetSummary {
    fn of(set: &RepresentationSet) -> Self {
        Self {
            name: set.name().to_string(),
            rows: set.len(),
            dim: set.dim(),
            classes: set.class_count(),
        }
    }
}

fn paths_ref(paths: &[PathBuf]) -> Vec<&Path> {
    paths.iter().map(PathBuf::as_path).collect()
}

pub fn synth(args: &SynthArgs, force: bool) -> CliResult<()> {
    let out_format = output::resolve_format(&args.output, args.format);
    let mut outputs = output::representation_outputs(&args.output, out_format);
    let pair_format = args.pair_out.as_ref().map(|p| Format::from_path(p));
    if let (Some(p), Some(f)) = (&args.pair_out, pair_format) {
        outputs.extend(output::representation_outputs(p, f));
    }
    check_writable(&paths_ref(&outputs), force)?;

    let spec = MixtureSpec {
        etf: EtfSpec::new(args.classes, args.dim, args.norm),
        within_std: args.sigma,
        samples_per_class: args.per_class,
        seed: args.seed,
    };
    let base = synth::sample_mixture(&spec)?;
    let pair_seed = args.pair_seed.unwrap_or(args.seed.wrapping_add(1));
    let pair = match &args.pair_out {
        Some(_) => Some(synth::linear_pair(&base, pair_seed, args.pair_noise)?),
        None => None,
    };
    let warp = |s: RepresentationSet| match args.warp {
        Some(w) => synth::monotone_warp(&s, w),
        None => Ok(s),
    };
    let base = warp(base)?;
    repr_io::save_representation(&base, &args.output, out_format)?;
    let mut pair_summary = None;
    if let (Some(set), Some(path), Some(f)) = (pair, &args.pair_out, pair_format) {
        let set = warp(set)?;
        repr_io::save_representation(&set, path, f)?;
        pair_summary = Some(SetSummary::of(&set));
    }

    #[derive(Serialize)]
    struct Out {
        spec: MixtureSpec,
        set: SetSummary,
        pair_seed: Option<u64>,
        pair: Option<SetSummary>,
    }
    let result = Out {
        spec,
        set: SetSummary::of(&base),
        pair_seed: pair_summary.as_ref().map(|_| pair_seed),
        pair: pair_summary,
    };
    output::emit(
        None,
        &output::to_json(&output::report("synth", args, result))?,
    )
}

pub fn split(args: &SplitArgs, force: bool) -> CliResult<()> {
    let train_format = Format::from_path(&args.train_out);
    let test_format = Format::from_path(&args.test_out);
    let mut outputs = output::representation_outputs(&args.train_out, train_format);
    outputs.extend(output::representation_outputs(&args.test_out, test_format));
    check_writable(&paths_ref(&outputs), force)?;

    let set = output::load(&args.input, args.format)?;
    let (train, test) = repr_io::split_train_test(&set, args.fraction, args.seed)?;
    repr_io::save_representation(&train, &args.train_out, train_format)?;
    repr_io::save_representation(&test, &args.test_out, test_format)?;

    #[derive(Serialize)]
    struct Out {
        train: SetSummary,
        test: SetSummary,
    }
    let result = Out {
        train: SetSummary::of(&train),
        test: SetSummary::of(&test),
    };
    output::emit(
        None,
        &output::to_json(&output::report("split", args, result))?,
    )
}

pub fn nc(args: &NcArgs, force: bool) -> CliResult<()> {
    let report_path = args.out_dir.join("nc.json");
    let angles_path = args.out_dir.join("angles.csv");
    check_writable(&[&report_path, &angles_path], force)?;

    let set = output::load(&args.input, args.format)?;
    let probe = match &args.probe_predictions {
        Some(p) => {
            let (labels, predictions) = output::read_predictions(p)?;
            if labels != set.labels() {
                return Err(CliError::Lib(Error::Validation(format!(
                    "labels in {} do not match {}",
                    p.display(),
                    args.input.display()
                ))));
            }
            Some(predictions)
        }
        None => None,
    };
    let options = NcOptions {
        nc1_variant: args.nc1_variant,
    };
    let nc = nc_metrics::nc_report(&set, probe.as_deref(), &options)?;
    let ib_gap = match args.seed {
        Some(seed) => Some(nc_metrics::ib_gap(
            &set,
            &IbGapOptions {
                train_fraction: args.train_fraction,
                seed,
            },
        )?),
        None => None,
    };
    let angles = nc_metrics::pairwise_angles(&set);

    #[derive(Serialize)]
    struct Out {
        set: SetSummary,
        nc: NcReport,
        ib_gap: Option<IbGap>,
    }
    let result = Out {
        set: SetSummary::of(&set),
        nc,
        ib_gap,
    };
    let text = output::to_json(&output::report("nc", args, result))?;
    output::ensure_dir(&args.out_dir)?;
    output::write_csv(&angles_path, &angles)?;
    output::emit(Some(&report_path), &text)
}

pub fn cca(args: &CcaArgs, force: bool) -> CliResult<()> {
    if let Some(p) = &args.output {
        check_writable(&[p], force)?;
    }
    let a = output::load(&args.a, args.format)?;
    let b = output::load(&args.b, args.format)?;
    let (fa, fb) = if args.ranked {
        (
            copula::rank_transform(a.features()),
            copula::rank_transform(b.features()),
        )
    } else {
        (a.features().clone(), b.features().clone())
    };
    let top_k = args.top_k.unwrap_or(a.dim().min(b.dim()));
    let result: CcaResult =
        identifiability::cca_features(&fa, &fb, top_k, &CcaOptions { ridge: args.ridge })?;
    output::emit(
        args.output.as_deref(),
        &output::to_json(&output::report("cca", args, result))?,
    )
}

#[derive(Serialize)]
struct CurveRow {
    beta: f64,
    i_tx_nats: f64,
    i_ty_nats: f64,
    active_rank: usize,
}

#[derive(Serialize)]
struct AlphaRow {
    dimension: usize,
    lambda: f64,
    critical_beta: f64,
    alpha: f64,
    alpha_normalized: f64,
}

fn curve_grid(critical: &[f64], points: usize) -> Vec<f64> {
    let finite: Vec<f64> = critical.iter().copied().filter(|b| b.is_finite()).collect();
    let (lo, hi) = match (finite.first(), finite.last()) {
        (Some(&first), Some(&last)) => (0.5 * first, 4.0 * last),
        _ => (1.0, 10.0),
    };
    gib::log_grid(lo, hi, points)
}

pub fn mgib(args: &MgibArgs, force: bool) -> CliResult<()> {
    let target = match (args.rank, args.beta, args.fraction) {
        (Some(k), None, None) => Target::Rank(k),
        (None, Some(b), None) => Target::ExplicitBeta(b),
        (None, None, Some(f)) => Target::RelevanceFraction(f),
        _ => {
            return Err(CliError::Usage(
                "give exactly one of --rank, --beta, --fraction".into(),
            ))
        }
    };
    if args.curve_points < 2 {
        return Err(CliError::Usage("--curve-points must be at least 2".into()));
    }
    let dir = &args.out_dir;
    let report_path = dir.join("mgib.json");
    let compressed_path = dir.join("compressed.ibnc");
    let curve_path = dir.join("info_curve.csv");
    let alpha_path = dir.join("alpha_scaling.csv");
    let encoded_paths: Vec<PathBuf> = args
        .encode
        .iter()
        .map(|p| {
            let stem = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            dir.join(format!("{stem}.compressed.ibnc"))
        })
        .collect();
    let mut outputs = vec![
        report_path.clone(),
        compressed_path.clone(),
        curve_path.clone(),
        alpha_path.clone(),
    ];
    outputs.extend(encoded_paths.iter().cloned());
    check_writable(&paths_ref(&outputs), force)?;

    let source = output::load(&args.source, args.format)?;
    let relevance = output::load(&args.relevance, args.format)?;
    let solution = mgib_solve(
        &source,
        &relevance,
        target,
        &MgibOptions {
            regularization: args.regularization,
        },
    )?;
    let report: MgibReport = solution.report();

    let critical = solution.spectrum.critical_betas();
    let grid = curve_grid(&critical, args.curve_points);
    let curve = gib::information_curve(&solution.spectrum, &solution.joint, &grid)?;
    let curve_rows: Vec<CurveRow> = curve
        .iter()
        .map(|p| CurveRow {
            beta: p.beta,
            i_tx_nats: p.i_tx,
            i_ty_nats: p.i_ty,
            active_rank: critical.iter().filter(|&&c| p.beta > c).count(),
        })
        .collect();
    let normalized = solution.projection.alphas_normalized();
    let alpha_rows: Vec<AlphaRow> = solution
        .projection
        .alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| AlphaRow {
            dimension: i,
            lambda: solution.spectrum.lambdas[i],
            critical_beta: critical[i],
            alpha,
            alpha_normalized: normalized[i],
        })
        .collect();

    let compressed = source.with_features(
        solution.compressed.clone(),
        format!("mgib({}; {target})", source.name()),
    )?;
    let mut encoded = Vec::with_capacity(args.encode.len());
    for p in &args.encode {
        let set = output::load(p, args.format)?;
        let features = copula::apply_projection(&solution, &set, &source)?;
        encoded.push(set.with_features(features, format!("mgib({}; {target})", set.name()))?);
    }

    #[derive(Serialize)]
    struct Out {
        source: SetSummary,
        relevance: SetSummary,
        mgib: MgibReport,
        curve_points: usize,
        encoded: Vec<SetSummary>,
    }
    let result = Out {
        source: SetSummary::of(&source),
        relevance: SetSummary::of(&relevance),
        mgib: report,
        curve_points: curve_rows.len(),
        encoded: encoded.iter().map(SetSummary::of).collect(),
    };
    let text = output::to_json(&output::report("mgib", args, result))?;

    output::ensure_dir(dir)?;
    repr_io::save_representation(&compressed, &compressed_path, Format::IbncBin)?;
    for (set, path) in encoded.iter().zip(&encoded_paths) {
        repr_io::save_representation(set, path, Format::IbncBin)?;
    }
    output::write_csv(&curve_path, &curve_rows)?;
    output::write_csv(&alpha_path, &alpha_rows)?;
    output::emit(Some(&report_path), &text)
}

#[derive(Serialize)]
struct VariantReport {
    variant: &'static str,
    dim: usize,
    linear_accuracy: f64,
    linear_train_accuracy: f64,
    probe_iterations: usize,
    probe_grad_norm: f64,
    ncm_accuracy: f64,
}

struct Variant {
    name: &'static str,
    train: RepresentationSet,
    test: RepresentationSet,
}

fn check_aligned(raw: &RepresentationSet, other: &RepresentationSet, what: &str) -> CliResult<()> {
    if raw.labels() != other.labels() {
        return Err(CliError::Lib(Error::Validation(format!(
            "{what} rows or labels do not line up with the raw set"
        ))));
    }
    Ok(())
}

pub fn probe(args: &ProbeArgs, force: bool) -> CliResult<()> {
    let dir = &args.out_dir;
    let report_path = dir.join("probe.json");
    let mut names = vec!["raw", "ranked"];
    if args.compressed_train.is_some() {
        names.push("compressed");
    }
    let mut outputs = vec![report_path.clone()];
    for n in &names {
        outputs.push(dir.join(format!("{n}.probe.csv")));
        outputs.push(dir.join(format!("{n}.ncm.csv")));
    }
    check_writable(&paths_ref(&outputs), force)?;

    let train = output::load(&args.train, args.format)?;
    let test = output::load(&args.test, args.format)?;
    let ranked_train = train.with_features(
        copula::rank_transform(train.features()),
        format!("ranked({})", train.name()),
    )?;
    let ranked_test = test.with_features(
        copula::reference_ranks(test.features(), train.features())?,
        format!("ranked({})", test.name()),
    )?;
    let mut variants = vec![
        Variant {
            name: "raw",
            train: train.clone(),
            test: test.clone(),
        },
        Variant {
            name: "ranked",
            train: ranked_train,
            test: ranked_test,
        },
    ];
    if let (Some(ct), Some(cs)) = (&args.compressed_train, &args.compressed_test) {
        let ctrain = output::load(ct, args.format)?;
        let ctest = output::load(cs, args.format)?;
        check_aligned(&train, &ctrain, "compressed train")?;
        check_aligned(&test, &ctest, "compressed test")?;
        variants.push(Variant {
            name: "compressed",
            train: ctrain,
            test: ctest,
        });
    }

    let options = ProbeOptions {
        l2: args.l2,
        ..ProbeOptions::default()
    };
    let mut reports = Vec::with_capacity(variants.len());
    let mut predictions = Vec::with_capacity(variants.len());
    for v in &variants {
        let probe: ProbeResult = nc_metrics::linear_probe(&v.train, &v.test, &options)?;
        let ncm = nc_metrics::ncm_classify(&v.train, v.test.features())?;
        let ncm_accuracy = identifiability::accuracy(&ncm, v.test.labels())?;
        reports.push(VariantReport {
            variant: v.name,
            dim: v.train.dim(),
            linear_accuracy: probe.accuracy,
            linear_train_accuracy: probe.train_accuracy,
            probe_iterations: probe.iterations,
            probe_grad_norm: probe.grad_norm,
            ncm_accuracy,
        });
        predictions.push((v.name, probe.predictions, ncm));
    }

    #[derive(Serialize)]
    struct Gap {
        variant: &'static str,
        linear_points: f64,
        ncm_points: f64,
    }
    let gaps: Vec<Gap> = reports[1..]
        .iter()
        .map(|r| Gap {
            variant: r.variant,
            linear_points: 100.0 * (reports[0].linear_accuracy - r.linear_accuracy),
            ncm_points: 100.0 * (reports[0].ncm_accuracy - r.ncm_accuracy),
        })
        .collect();

    #[derive(Serialize)]
    struct Out {
        train: SetSummary,
        test: SetSummary,
        variants: Vec<VariantReport>,
        gap_from_raw: Vec<Gap>,
    }
    let result = Out {
        train: SetSummary::of(&train),
        test: SetSummary::of(&test),
        variants: reports,
        gap_from_raw: gaps,
    };
    let text = output::to_json(&output::report("probe", args, result))?;
    output::ensure_dir(dir)?;
    for (name, linear, ncm) in &predictions {
        output::write_predictions(
            &dir.join(format!("{name}.probe.csv")),
            test.labels(),
            linear,
        )?;
        output::write_predictions(&dir.join(format!("{name}.ncm.csv")), test.labels(), ncm)?;
    }
    output::emit(Some(&report_path), &text)
}

pub fn agreement(args: &AgreementArgs, force: bool) -> CliResult<()> {
    if let Some(p) = &args.output {
        check_writable(&[p], force)?;
    }
    let (truth_a, pred_a) = output::read_predictions(&args.a)?;
    let (truth_b, pred_b) = output::read_predictions(&args.b)?;
    if truth_a != truth_b {
        return Err(CliError::Lib(Error::Validation(format!(
            "{} and {} disagree on the true labels",
            args.a.display(),
            args.b.display()
        ))));
    }

    #[derive(Serialize)]
    struct Out {
        samples: usize,
        accuracy_a: f64,
        accuracy_b: f64,
        both_correct: f64,
    }
    let result = Out {
        samples: truth_a.len(),
        accuracy_a: identifiability::accuracy(&pred_a, &truth_a)?,
        accuracy_b: identifiability::accuracy(&pred_b, &truth_a)?,
        both_correct: identifiability::joint_correct_fraction(&pred_a, &pred_b, &truth_a)?,
    };
    output::emit(
        args.output.as_deref(),
        &output::to_json(&output::report("agreement", args, result))?,
    )
}
