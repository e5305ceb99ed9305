use anyhow::{bail, Context, Result};
use serde_json::json;

use threephoton_core::analytic::{from_db, optimal_r, snr_of_r, to_db};
use threephoton_core::fidelity::{
    beats_classical, counts_at_snr, fidelity_from_snr, is_secure, mc_uncertainty,
};
use threephoton_core::fitting::{fit_dataset, load_dataset, FitOptions, DATASET_NAMES};
use threephoton_core::protocol::{run_three_step_sampled, run_three_step_with};
use threephoton_core::{
    Acquisition, Complex64, Dataset, Engine, FitResult, IntervalKind, McConfig, SourceParams,
    ThreeStepResult,
};

use crate::args::{Cli, Command, DatasetAction, EngineArg, IntervalArg, SourceArgs, SweepSpec};
use crate::output::{emit, num, opt, Report};
use crate::{NotConverged, Usage};

const DEFAULT_R_SWEEP: &str = "r:0.01:10:50:log";
const DEFAULT_SNR_SWEEP: &str = "snr:0.1:100:50:lin";
const R_MAX: f64 = 100.0;

pub fn run(cli: &Cli) -> Result<()> {
    let s = &cli.source;
    for n in &s.n_terms {
        if !(2..=5).contains(n) {
            return Err(Usage(format!("n-terms {n} outside 2..=5")).into());
        }
    }
    let report = match &cli.command {
        Command::SweepR => sweep_r(s)?,
        Command::ThreeStep { sampled } => three_step(s, *sampled)?,
        Command::Fidelity {
            ccg,
            ratio_r,
            trials,
            interval,
        } => fidelity(s, *ccg, *ratio_r, *trials, *interval)?,
        Command::Fit {
            input,
            free_exponent,
        } => {
            let (report, unconverged) = fit(s, input.as_deref(), *free_exponent)?;
            emit(&report.render(cli.io.format), cli.io.out.as_deref())?;
            if !unconverged.is_empty() {
                return Err(NotConverged(unconverged.join(", ")).into());
            }
            return Ok(());
        }
        Command::Dataset { action } => match action {
            DatasetAction::List => {
                let mut text = DATASET_NAMES.join("\n");
                text.push('\n');
                return emit(&text, cli.io.out.as_deref());
            }
            DatasetAction::Export => {
                let name = s
                    .dataset
                    .as_deref()
                    .ok_or_else(|| Usage("dataset export needs --dataset".into()))?;
                let d = load_dataset(name)?;
                let text = match cli.io.format {
                    crate::args::Format::Csv => d.to_csv()?,
                    crate::args::Format::Json => {
                        let mut t = serde_json::to_string_pretty(&d)?;
                        t.push('\n');
                        t
                    }
                };
                return emit(&text, cli.io.out.as_deref());
            }
        },
    };
    emit(&report.render(cli.io.format), cli.io.out.as_deref())
}

fn sweep(s: &SourceArgs, default: &str, vars: &[&str]) -> Result<SweepSpec> {
    let spec = match &s.sweep {
        Some(spec) => spec.clone(),
        None => default.parse().map_err(Usage)?,
    };
    spec.expect_var(vars)?;
    Ok(spec)
}

fn source_params(s: &SourceArgs, n_terms: u32) -> SourceParams {
    SourceParams::real(s.kappa, s.alpha, s.t1, s.t2)
        .with_n_terms(n_terms)
        .with_cutoff(s.cutoff)
}

fn warn_regime(p: &SourceParams) {
    if !p.is_perturbative() {
        eprintln!(
            "warning: |κ| = {} or |α| = {} outside the perturbative regime",
            p.kappa_abs(),
            p.alpha_abs()
        );
    }
}

fn check_transmissivity(s: &SourceArgs) -> Result<()> {
    for (name, t) in [("t1", s.t1), ("t2", s.t2)] {
        if !(0.0..=1.0).contains(&t) {
            return Err(Usage(format!("{name} = {t} outside [0, 1]")).into());
        }
    }
    Ok(())
}

/// Columns: `x,x_err,y,y_err,n_terms,kind` with x = R, y = SNR in dB and
/// kind `curve` or `optimum`.
fn sweep_r(s: &SourceArgs) -> Result<Report> {
    let spec = sweep(s, DEFAULT_R_SWEEP, &["r"])?;
    if spec.lo <= 0.0 || spec.hi > R_MAX {
        return Err(Usage(format!(
            "R range [{}, {}] not inside (0, {R_MAX}]",
            spec.lo, spec.hi
        ))
        .into());
    }
    check_transmissivity(s)?;
    let kappa = Complex64::new(s.kappa, 0.0);
    let mut report = Report::new(
        "sweep-r",
        vec![
            ("kappa", num(s.kappa)),
            ("t2", num(s.t2)),
            ("n_terms", join(&s.n_terms)),
            ("sweep", spec.to_string()),
        ],
    );
    report.meta = vec![
        ("dataset", "sweep_r".into()),
        ("x", "R".into()),
        ("y", "SNR".into()),
        ("units", "SNR: dB".into()),
    ];
    report.columns = vec!["x", "x_err", "y", "y_err", "n_terms", "kind"];
    let points = spec.points();
    let mut curves = Vec::new();
    for &n in &s.n_terms {
        let snr_db = points
            .iter()
            .map(|&r| snr_of_r(r, kappa, s.t2, n).map(to_db))
            .collect::<threephoton_core::Result<Vec<_>>>()?;
        let (r_opt, snr_max) = optimal_r(kappa, s.t2, n)?;
        for (r, y) in points.iter().zip(&snr_db) {
            report.rows.push(vec![
                num(*r),
                "0".into(),
                num(*y),
                "0".into(),
                n.to_string(),
                "curve".into(),
            ]);
        }
        report.rows.push(vec![
            num(r_opt),
            "0".into(),
            num(to_db(snr_max)),
            "0".into(),
            n.to_string(),
            "optimum".into(),
        ]);
        curves.push(json!({
            "n_terms": n,
            "r": points,
            "snr_db": snr_db,
            "r_opt": r_opt,
            "snr_max_db": to_db(snr_max),
        }));
    }
    report.json = json!({ "curves": curves });
    Ok(report)
}

/// Columns: `engine,cc_a,cc_s,cc_f,cc_g,ratio_r,snr,snr_db,negative_genuine`.
fn three_step(s: &SourceArgs, sampled: bool) -> Result<Report> {
    let [n] = s.n_terms.as_slice() else {
        return Err(Usage("three-step takes a single --n-terms".into()).into());
    };
    check_transmissivity(s)?;
    let p = source_params(s, *n);
    warn_regime(&p);
    let acq = Acquisition {
        rep_rate_hz: s.rep_rate,
        duration_s: s.duration,
    };
    let engines: &[Engine] = match s.engine {
        EngineArg::Analytic => &[Engine::Analytic],
        EngineArg::Oracle => &[Engine::Oracle],
        EngineArg::Both => &[Engine::Analytic, Engine::Oracle],
    };
    let results = engines
        .iter()
        .map(|&e| {
            if sampled {
                run_three_step_sampled(&p, e, acq, s.seed)
            } else {
                run_three_step_with(&p, e, acq)
            }
        })
        .collect::<threephoton_core::Result<Vec<ThreeStepResult>>>()?;

    let mut params = vec![
        ("kappa", num(s.kappa)),
        ("alpha", num(s.alpha)),
        ("t1", num(s.t1)),
        ("t2", num(s.t2)),
        ("n_terms", n.to_string()),
        ("cutoff", s.cutoff.to_string()),
        ("rep_rate", num(s.rep_rate)),
        ("duration", num(s.duration)),
    ];
    if sampled {
        params.push(("seed", s.seed.to_string()));
    }
    let mut report = Report::new("three-step", params);
    let units = if sampled {
        "counts per acquisition"
    } else {
        "probability per pulse"
    };
    report.meta.push(("units", units.into()));
    let snr_ratio = match results.as_slice() {
        [a, o] => a.snr().zip(o.snr()).map(|(a, o)| o / a),
        _ => None,
    };
    if let Some(q) = snr_ratio {
        report.meta.push(("snr oracle/analytic", num(q)));
    }
    report.columns = vec![
        "engine",
        "cc_a",
        "cc_s",
        "cc_f",
        "cc_g",
        "ratio_r",
        "snr",
        "snr_db",
        "negative_genuine",
    ];
    for r in &results {
        report.rows.push(vec![
            r.engine.to_string(),
            num(r.cc_a),
            num(r.cc_s),
            num(r.cc_f),
            num(r.cc_g),
            opt(r.ratio_r()),
            opt(r.snr()),
            opt(r.snr_db()),
            r.negative_genuine.to_string(),
        ]);
    }
    report.json = json!({
        "units": units,
        "results": results.iter().map(|r| {
            let mut v = serde_json::to_value(r.record()).unwrap_or_default();
            v["ratio_r"] = json!(r.ratio_r());
            v["negative_genuine"] = json!(r.negative_genuine);
            v
        }).collect::<Vec<_>>(),
        "snr_oracle_over_analytic": snr_ratio,
    });
    Ok(report)
}

/// Columns: `x,x_err,y,y_err,snr,f_low,f_high,f_mc_mean,above_classical,above_secure`
/// with x = SNR in dB and y = analytic fidelity; `y_err` is the interval
/// half-width (0 without Monte-Carlo).
fn fidelity(
    s: &SourceArgs,
    ccg: Option<f64>,
    ratio_r: f64,
    trials: usize,
    interval: IntervalArg,
) -> Result<Report> {
    let spec = sweep(s, DEFAULT_SNR_SWEEP, &["snr", "snr_db"])?;
    let in_db = spec.var == "snr_db";
    if !in_db && spec.lo <= 0.0 {
        return Err(Usage(format!("SNR range must be positive, got lo = {}", spec.lo)).into());
    }
    if let Some(c) = ccg {
        if !(c > 0.0) {
            return Err(Usage(format!("--ccg {c} must be positive")).into());
        }
    }
    let mut params = vec![("sweep", spec.to_string())];
    if let Some(c) = ccg {
        params.extend([
            ("ccg", num(c)),
            ("ratio_r", num(ratio_r)),
            ("trials", trials.to_string()),
            ("seed", s.seed.to_string()),
            (
                "interval",
                match interval {
                    IntervalArg::Envelope => "envelope".into(),
                    IntervalArg::Central(f) => num(f),
                },
            ),
        ]);
    }
    let mut report = Report::new("fidelity", params);
    report.meta = vec![
        ("dataset", "fidelity_curve".into()),
        ("x", "SNR".into()),
        ("y", "F".into()),
        ("units", "SNR: dB; F: dimensionless".into()),
    ];
    report.columns = vec![
        "x",
        "x_err",
        "y",
        "y_err",
        "snr",
        "f_low",
        "f_high",
        "f_mc_mean",
        "above_classical",
        "above_secure",
    ];
    let mut rows_json = Vec::new();
    for v in spec.points() {
        let snr = if in_db { from_db(v) } else { v };
        let f = fidelity_from_snr(snr);
        let (low, high, mc_mean) = match ccg {
            Some(c) => {
                let counts = counts_at_snr(c, snr, ratio_r)?;
                let cfg = McConfig {
                    n_trials: trials,
                    seed: s.seed,
                    interval: match interval {
                        IntervalArg::Envelope => IntervalKind::Envelope,
                        IntervalArg::Central(frac) => IntervalKind::Central(frac),
                    },
                };
                let est = mc_uncertainty(&counts, cfg)?;
                (
                    est.interval_low.min(f),
                    est.interval_high.max(f),
                    Some(est.mean),
                )
            }
            None => (f, f, None),
        };
        let half = (high - low) / 2.0;
        let snr_db = to_db(snr);
        report.rows.push(vec![
            num(snr_db),
            "0".into(),
            num(f),
            num(half),
            num(snr),
            num(low),
            num(high),
            opt(mc_mean),
            u8::from(beats_classical(f)).to_string(),
            u8::from(is_secure(f)).to_string(),
        ]);
        rows_json.push(json!({
            "snr": snr, "snr_db": snr_db, "f": f, "f_low": low, "f_high": high,
            "f_mc_mean": mc_mean, "above_classical": beats_classical(f), "above_secure": is_secure(f),
        }));
    }
    let (classical, secure) = threephoton_core::fidelity::thresholds();
    report
        .meta
        .push(("thresholds", format!("{} {}", num(classical), num(secure))));
    report.json = json!({ "thresholds": [classical, secure], "points": rows_json });
    Ok(report)
}

/// Columns: `x,x_err,y,y_err,model,residual,pull,dataset,n_terms`; `model`
/// is in data units, `residual` and `pull` in the fit space.
fn fit(
    s: &SourceArgs,
    input: Option<&std::path::Path>,
    free_exponent: bool,
) -> Result<(Report, Vec<String>)> {
    let jobs: Vec<(String, Dataset)> = match (input, s.dataset.as_deref()) {
        (Some(path), kind) => {
            let file =
                std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let stem = path.file_stem().and_then(|x| x.to_str()).unwrap_or("input");
            let data = Dataset::from_csv(file, stem)?;
            let kind = kind
                .map(str::to_string)
                .unwrap_or_else(|| data.name.clone());
            vec![(kind, data)]
        }
        (None, Some("all")) => DATASET_NAMES
            .iter()
            .map(|n| Ok(((*n).to_string(), load_dataset(n)?)))
            .collect::<Result<_>>()?,
        (None, Some(name)) => vec![(name.to_string(), load_dataset(name)?)],
        (None, None) => bail!(Usage(
            "fit needs --dataset <name|all> or --input <csv>".into()
        )),
    };

    let mut fits: Vec<(FitResult, &Dataset)> = Vec::new();
    for (kind, data) in &jobs {
        let orders: Vec<u32> = if kind == "snr_vs_r" {
            s.n_terms.clone()
        } else {
            vec![s.n_terms[0]]
        };
        for n in orders {
            let opts = FitOptions {
                n_terms: n,
                free_exponent,
            };
            fits.push((fit_dataset(data, kind, opts)?, data));
        }
    }

    let mut report = Report::new(
        "fit",
        vec![
            ("dataset", s.dataset.clone().unwrap_or_default()),
            (
                "input",
                input.map(|p| p.display().to_string()).unwrap_or_default(),
            ),
            ("n_terms", join(&s.n_terms)),
            ("free_exponent", free_exponent.to_string()),
        ],
    );
    for (f, _) in &fits {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|(k, v)| format!("{k}={}", num(*v)))
            .collect();
        report.meta.push((
            "fit",
            format!(
                "{}{} chi2={} reduced_chi2={} converged={} {}",
                f.dataset,
                f.n_expansion.map(|n| format!(" N={n}")).unwrap_or_default(),
                num(f.chi2),
                num(f.reduced_chi2),
                f.converged,
                params.join(" ")
            ),
        ));
    }
    report.columns = vec![
        "x", "x_err", "y", "y_err", "model", "residual", "pull", "dataset", "n_terms",
    ];
    for (f, data) in &fits {
        let errs = f.fit_space.errors(data);
        for (((p, m), r), e) in data
            .points
            .iter()
            .zip(&f.model_values)
            .zip(&f.residuals)
            .zip(&errs)
        {
            report.rows.push(vec![
                num(p.x),
                num(p.x_err),
                num(p.y),
                num(p.y_err),
                num(f.fit_space.to_data(*m)),
                num(*r),
                num(r / e),
                f.dataset.clone(),
                f.n_expansion.map(|n| n.to_string()).unwrap_or_default(),
            ]);
        }
    }
    let unconverged: Vec<String> = fits
        .iter()
        .filter(|(f, _)| !f.converged)
        .map(|(f, _)| f.dataset.clone())
        .collect();
    report.json = json!({ "fits": fits.iter().map(|(f, _)| f).collect::<Vec<_>>() });
    Ok((report, unconverged))
}

fn join(ns: &[u32]) -> String {
    ns.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}
