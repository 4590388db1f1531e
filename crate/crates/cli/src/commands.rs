use std::fs;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use robclust_core::kernel::{
    alpha_kappa_heuristic, gram_linear, kernel_gaussian, kernel_graph, kernel_polynomial, spectral_init,
    spectral_init_affinity, KernelMatrix,
};
use robclust_core::path::{self, make_grid, path_fit, PathConfig, PathInput, Spacing};
use robclust_core::synth::{gen_rings, gen_spherical, RingsSpec, SphericalSpec};
use robclust_core::{Algorithm, Centroids, DMatrix, DataSet, FitConfig, FitResult, Init, Reweight};

use crate::args::{AlgoArg, DataKind, EvalArgs, FitArgs, GenArgs, InitArg, KernelArg, SpacingArg};
use crate::error::CliError;
use crate::io::{self, Graph, Truth};
use crate::report::{score, EvalReport, RunReport, SCHEMA};

/// Margin added to the most negative eigenvalue of the normalized adjacency.
const GRAPH_NU_MARGIN: f64 = 1e-3;

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}

pub fn gen(args: &GenArgs) -> Result<(), CliError> {
    let (x, centers) = match args.kind {
        DataKind::Spherical => {
            let mut spec = SphericalSpec::default().with_seed(args.seed);
            if let Some(n) = args.outliers {
                spec = spec.with_outliers(n);
            }
            (gen_spherical(&spec)?, Some(spec.true_centers()))
        }
        DataKind::Rings => {
            let mut spec = RingsSpec::default().with_seed(args.seed);
            if let Some(n) = args.outliers {
                spec.n_outliers = n;
            }
            (gen_rings(&spec)?, None)
        }
    };
    io::write_csv(&args.out, &x)?;
    let truth = Truth {
        labels: x.truth_labels().expect("generators set labels").to_vec(),
        outliers: x.truth_outliers().expect("generators set outliers").to_vec(),
    };
    io::write_truth(&io::sidecar(&args.out, "truth"), &truth)?;
    if let Some(c) = centers {
        io::write_centers(&io::sidecar(&args.out, "centers"), &c)?;
    }
    log::info!("wrote {} points to {}", x.n_points(), args.out.display());
    Ok(())
}

fn algorithm(a: AlgoArg) -> Algorithm {
    match a {
        AlgoArg::Kmeans | AlgoArg::Rkm => Algorithm::Rkm,
        AlgoArg::Wrkm => Algorithm::Wrkm,
        AlgoArg::Rpc => Algorithm::Rpc,
        AlgoArg::Wrpc => Algorithm::Wrpc,
        AlgoArg::Krkm => Algorithm::Krkm,
        AlgoArg::Krpc => Algorithm::Krpc,
    }
}

fn plain(a: Algorithm) -> Algorithm {
    match a {
        Algorithm::Wrkm => Algorithm::Rkm,
        Algorithm::Wrpc => Algorithm::Rpc,
        other => other,
    }
}

/// What a fit runs on, plus anything the report needs from loading.
struct Input {
    data: Option<DataSet>,
    kernel: Option<KernelMatrix>,
    graph: Option<Graph>,
}

impl Input {
    fn path_input(&self) -> PathInput<'_> {
        match (&self.kernel, &self.data) {
            (Some(k), _) => PathInput::Kernel(k),
            (None, Some(x)) => PathInput::Data(x),
            (None, None) => unreachable!("input always holds data or a kernel"),
        }
    }
}

fn load_input(args: &FitArgs) -> Result<Input, CliError> {
    let kernel_algo = algorithm(args.algo).is_kernel();
    match (kernel_algo, args.kernel) {
        (true, None) => {
            return Err(CliError::Usage(
                format!("--algo {:?} needs --kernel", args.algo).to_lowercase(),
            ))
        }
        (false, Some(_)) => return Err(CliError::Usage("--kernel only applies to krkm and krpc".into())),
        _ => {}
    }
    if let Some(KernelArg::Graph) = args.kernel {
        let graph = io::load_edgelist(&args.input)?;
        let k = kernel_graph(&graph.adjacency, GRAPH_NU_MARGIN)?;
        return Ok(Input {
            data: None,
            kernel: Some(k),
            graph: Some(graph),
        });
    }
    let x = io::load_csv(&args.input, args.label_column)?;
    let kernel = match args.kernel {
        None => None,
        Some(KernelArg::Linear) => Some(gram_linear(&x)),
        Some(KernelArg::Gaussian { alpha }) => {
            let a = match alpha {
                Some(a) => a,
                None => alpha_kappa_heuristic(&x)?,
            };
            log::info!("gaussian kernel width {a}");
            Some(kernel_gaussian(&x, a)?)
        }
        Some(KernelArg::Poly { degree }) => Some(kernel_polynomial(&x, degree)?),
        Some(KernelArg::Graph) => unreachable!("handled above"),
    };
    Ok(Input {
        data: Some(x),
        kernel,
        graph: None,
    })
}

fn fit_config(args: &FitArgs) -> Result<FitConfig, CliError> {
    let algo = algorithm(args.algo);
    let mut cfg = FitConfig::default()
        .with_q(args.q)
        .with_seed(args.seed)
        .with_max_iters(args.max_iters);
    if args.algo == AlgoArg::Kmeans {
        if args.lambda.is_some() || args.target_outliers.is_some() {
            return Err(CliError::Usage(
                "kmeans takes neither --lambda nor --target-outliers".into(),
            ));
        }
        cfg.lambda = f64::INFINITY;
    } else if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if algo.is_weighted() {
        cfg.reweight = args.reweight_eps.map_or(Reweight::Auto, Reweight::Epsilon);
    } else if args.reweight_eps.is_some() {
        return Err(CliError::Usage(
            "--reweight-eps only applies to wrkm and wrpc".into(),
        ));
    }
    if args.restarts == 0 {
        return Err(CliError::Usage("--restarts must be at least 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn initializer(args: &FitArgs, input: &Input) -> Result<Init, CliError> {
    match args.init {
        InitArg::Random => Ok(Init::Random),
        InitArg::Spectral => {
            let u = match (&input.graph, &input.kernel) {
                (Some(g), _) => spectral_init(&g.adjacency, args.clusters)?,
                (None, Some(k)) => spectral_init_affinity(k.matrix(), args.clusters)?,
                (None, None) => {
                    return Err(CliError::Usage("--init spectral needs a kernel algorithm".into()));
                }
            };
            Ok(Init::Memberships(u.with_exponent(args.q)?))
        }
    }
}

/// Runs `restarts` seeded fits in parallel and keeps the lowest final cost,
/// ties going to the earliest seed.
fn best_of(
    restarts: usize,
    cfg: &FitConfig,
    run: impl Fn(&FitConfig) -> robclust_core::Result<FitResult> + Sync,
) -> Result<FitResult, CliError> {
    let fits: Vec<robclust_core::Result<FitResult>> = (0..restarts)
        .into_par_iter()
        .map(|r| run(&cfg.clone().with_seed(cfg.seed.wrapping_add(r as u64))))
        .collect();
    let mut best: Option<FitResult> = None;
    for f in fits {
        let f = f?;
        if best.as_ref().is_none_or(|b| f.final_cost() < b.final_cost()) {
            best = Some(f);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Truth labels and outlier flags, whichever are available.
type TruthColumns = (Option<Vec<usize>>, Option<Vec<bool>>);

fn truth_for(args: &FitArgs, input: &Input) -> Result<TruthColumns, CliError> {
    if let Some(p) = &args.truth {
        let t = io::load_truth(p)?;
        return Ok((Some(t.labels), Some(t.outliers)));
    }
    let labels = input
        .data
        .as_ref()
        .and_then(|x| x.truth_labels())
        .map(<[usize]>::to_vec);
    Ok((labels, None))
}

fn finish(mut report: RunReport, args: &FitArgs, input: &Input, fit: &FitResult) -> Result<(), CliError> {
    report.node_names = input.graph.as_ref().map(|g| g.names.clone());
    let (labels, outliers) = truth_for(args, input)?;
    if labels.is_some() || outliers.is_some() {
        for (what, len) in [
            ("truth labels", labels.as_ref().map(Vec::len)),
            ("truth outliers", outliers.as_ref().map(Vec::len)),
        ] {
            if let Some(len) = len {
                if len != report.n_points {
                    return Err(CliError::Data(format!(
                        "{what}: expected {} rows, found {len}",
                        report.n_points
                    )));
                }
            }
        }
        report.metrics = Some(score(
            &report.labels(),
            &report.flagged(),
            None,
            labels.as_deref(),
            outliers.as_deref(),
            None,
        )?);
    }
    emit(&report, args.out.as_deref())?;
    if fit.degenerate {
        return Err(CliError::Degenerate(
            "standard deviation estimate hit its floor; the fit is degenerate".into(),
        ));
    }
    Ok(())
}

pub fn fit(args: &FitArgs, command: &str) -> Result<(), CliError> {
    let cfg = fit_config(args)?;
    let input = load_input(args)?;
    let init = initializer(args, &input)?;
    let algo = algorithm(args.algo);
    let pin = input.path_input();

    let target = match (command, args.target_outliers) {
        ("path", None) => Some(pin.n_points()),
        (_, t) => t,
    };
    let Some(target) = target else {
        if args.lambda.is_none() && args.algo != AlgoArg::Kmeans {
            return Err(CliError::Usage("give --lambda or --target-outliers".into()));
        }
        let fit = best_of(args.restarts, &cfg, |c| {
            path::fit(algo, pin, args.clusters, c, init.clone())
        })?;
        let report = RunReport::new(command, args, &fit)?;
        return finish(report, args, &input, &fit);
    };

    let base_cfg = cfg
        .clone()
        .with_lambda(f64::INFINITY)
        .with_reweight(Reweight::Off);
    let baseline = best_of(args.restarts, &base_cfg, |c| {
        path::fit(plain(algo), pin, args.clusters, c, init.clone())
    })?;
    let lmax = path::lambda_max(algo, pin, &baseline)?;
    let spacing = match args.spacing {
        SpacingArg::Log => Spacing::Log,
        SpacingArg::Linear => Spacing::Linear,
    };
    let grid = make_grid(lmax * (1.0 + 1e-6), args.grid_size, spacing)?;
    let pcfg = PathConfig::new(cfg, target);
    let result = path_fit(algo, pin, &grid, &pcfg, &baseline)?;
    let report = RunReport::new(command, args, &result.fit)?.with_path(&result, lmax, command == "path");
    finish(report, args, &input, &result.fit)
}

fn centroids_from_rows(rows: &[Vec<f64>]) -> Result<Centroids, CliError> {
    let dim = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != dim) {
        return Err(CliError::Data("report centroids have ragged rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Centroids::new(DMatrix::from_column_slice(
        dim,
        rows.len(),
        &flat,
    ))?)
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.report)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.report.display())))?;
    let report: RunReport = serde_json::from_str(&text)?;
    if report.schema != SCHEMA {
        return Err(CliError::Data(format!(
            "unsupported report schema {}",
            report.schema
        )));
    }
    let truth = io::load_truth(&args.truth)?;
    if truth.labels.len() != report.n_points {
        return Err(CliError::Data(format!(
            "truth has {} rows but the report has {} points",
            truth.labels.len(),
            report.n_points
        )));
    }
    let est = report.centroids.as_deref().map(centroids_from_rows).transpose()?;
    let centers = args.centers.as_deref().map(io::load_centers).transpose()?;
    if centers.is_some() && est.is_none() {
        log::warn!("report has no centroid coordinates; skipping the center RMSE");
    }
    let metrics = score(
        &report.labels(),
        &report.flagged(),
        est.as_ref(),
        Some(&truth.labels),
        Some(&truth.outliers),
        centers.as_ref(),
    )?;
    emit(
        &EvalReport {
            schema: SCHEMA,
            n_points: report.n_points,
            metrics,
        },
        args.out.as_deref(),
    )
}
