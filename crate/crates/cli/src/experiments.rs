//! One function per experiment kind: run the solvers, tabulate the results.

use hlab_core::bunching::{bracketing_on_grid, predicted_exponent, ExponentCondition, ExponentMode, PointBracket};
use hlab_core::conjugacy::{
    anosov_base_conjugacy, conjugacy_field_center, conjugacy_field_stable, leaf_conjugacy_center,
    leaf_expansivity_probe, leaf_intersection_su, leaf_separation, suspension_holonomy, AmalgamSpec, ConjugacyField,
    TransversalFamily,
};
use hlab_core::estimation::{fit_holder, sample_map, sample_pairs, verdict, HolderFit, HolonomySample, SamplingPlan};
use hlab_core::foliations::{holonomy_map, LeafSide, StrongFoliation};
use hlab_core::gallery::{run_gallery, GalleryName};
use hlab_core::phasespace::{torus_dist, wrap, TorusPoint, Transversal};
use hlab_core::sections::{solve_invariant_section, AffineShearContraction, ConstantSection, FiberContraction};
use hlab_core::{LabError, SuspensionLoop, SystemKind, SystemSpec};

use crate::artifacts::{num, Artifacts};
use crate::config::{ExperimentKind, Resolved};
use crate::failure::Failure;
use crate::plot;

/// Artifacts plus a few human-readable lines for the terminal.
pub struct Outcome {
    pub artifacts: Artifacts,
    pub summary: Vec<String>,
}

pub const HOLONOMY_HEADER: [&str; 3] = ["d_in", "d_out", "bucket"];
pub const CONJUGACY_HEADER: [&str; 8] = ["p1", "p2", "p3", "h1", "h2", "h3", "tail", "resid"];
pub const BUNCHING_HEADER: [&str; 8] = ["x1", "x2", "mu", "nu", "gamma", "gammahat", "nuhat", "muhat"];
pub const SECTION_HEADER: [&str; 2] = ["x", "value"];

pub fn run_experiment(cfg: &Resolved) -> Result<Outcome, Failure> {
    let module = cfg.kind.module();
    let out = match cfg.kind {
        ExperimentKind::Bunching => bunching(cfg),
        ExperimentKind::Section => section(cfg),
        ExperimentKind::Holonomy => holonomy(cfg),
        ExperimentKind::Conjugacy => conjugacy(cfg),
        ExperimentKind::Suspension => suspension(cfg),
        ExperimentKind::Leafexp => leafexp(cfg),
        ExperimentKind::Gallery => gallery(cfg),
    };
    out.map_err(|e| match e {
        Error::Lab(e) => Failure::from_lab(module, e),
        Error::Out(f) => f,
    })
}

/// Solver errors are attributed to the experiment's module, output errors keep their own.
pub enum Error {
    Lab(LabError),
    Out(Failure),
}

impl From<LabError> for Error {
    fn from(e: LabError) -> Self {
        Error::Lab(e)
    }
}

impl From<Failure> for Error {
    fn from(f: Failure) -> Self {
        Error::Out(f)
    }
}

fn table(a: &mut Artifacts, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), Failure> {
    a.table(name, header, rows)
}

fn samples_rows(samples: &[HolonomySample]) -> Vec<Vec<String>> {
    samples.iter().map(|s| vec![num(s.d_in), num(s.d_out), s.bucket.to_string()]).collect()
}

fn bucket_rows(fit: &HolderFit) -> Vec<Vec<String>> {
    fit.buckets
        .iter()
        .map(|b| {
            vec![
                b.bucket.to_string(),
                b.count.to_string(),
                num(b.log_in_at_max),
                num(b.max_log_out),
                b.local_slope.map(num).unwrap_or_default(),
            ]
        })
        .collect()
}

const BUCKET_HEADER: [&str; 5] = ["bucket", "count", "log_in_at_max", "max_log_out", "local_slope"];

fn fit_entries(fit: &HolderFit) -> Vec<(String, String)> {
    vec![
        ("theta_hat".into(), num(fit.theta_hat)),
        ("h_hat".into(), num(fit.h_hat)),
        ("envelope_theta".into(), num(fit.envelope_theta)),
        ("r_squared".into(), num(fit.r_squared)),
        ("scale_min".into(), num(fit.scale_range.0)),
        ("scale_max".into(), num(fit.scale_range.1)),
        ("n_samples".into(), fit.n_samples.to_string()),
        ("finest_local_slope".into(), fit.finest_local_slope().map(num).unwrap_or_default()),
        ("non_holder".into(), fit.non_holder.to_string()),
    ]
}

fn mode_of(cfg: &Resolved) -> ExponentMode {
    cfg.experiment.mode.as_deref().and_then(ExponentMode::parse).unwrap_or_default()
}

fn conditions_of(cfg: &Resolved) -> Vec<ExponentCondition> {
    match &cfg.experiment.conditions {
        Some(c) => c.iter().filter_map(|s| ExponentCondition::parse(s)).collect(),
        None => ExponentCondition::ALL.to_vec(),
    }
}

fn bunching(cfg: &Resolved) -> Result<Outcome, Error> {
    let n = &cfg.numeric;
    let sys = &cfg.system;
    let report = bracketing_on_grid(sys, n.grid.unwrap(), n.splitting_iters.unwrap(), n.margin.unwrap())?;
    let three = sys.dim() == 3;
    let mut header: Vec<&str> = BUNCHING_HEADER.to_vec();
    if three {
        header.insert(2, "x3");
    }
    let row = |p: &TorusPoint, b: &PointBracket| {
        let mut r: Vec<String> = p.coords().iter().map(|&x| num(x)).collect();
        r.extend([b.mu, b.nu, b.gamma, b.gamma_hat, b.nu_hat, b.mu_hat].map(num));
        r
    };
    let rows = report.grid.iter().zip(&report.pointwise).map(|(p, b)| row(p, b)).collect();
    let mut a = Artifacts::default();
    table(&mut a, "bunching.csv", &header, rows)?;
    let mode = mode_of(cfg);
    let mut exps = Vec::new();
    let mut summary = vec![format!("{} grid points bracketed", report.grid.len())];
    for c in conditions_of(cfg) {
        let p = predicted_exponent(&report, c, mode)?;
        summary.push(format!("{c}: theta_max = {}", num(p.theta_max)));
        exps.push(vec![c.name().to_string(), num(p.theta_max), p.warning.unwrap_or_default()]);
    }
    table(&mut a, "exponents.csv", &["condition", "theta_max", "warning"], exps)?;
    let u = report.uniform;
    let uniform: Vec<(String, String)> = [
        ("mu", u.mu),
        ("nu", u.nu),
        ("gamma", u.gamma),
        ("gammahat", u.gamma_hat),
        ("nuhat", u.nu_hat),
        ("muhat", u.mu_hat),
        ("margin", report.margin),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), num(*v)))
    .collect();
    a.key_values("uniform_bracket.csv", &uniform)?;
    Ok(Outcome { artifacts: a, summary })
}

fn section(cfg: &Resolved) -> Result<Outcome, Error> {
    let (e, n) = (&cfg.experiment, &cfg.numeric);
    let domain = e.domain.unwrap();
    let fc = AffineShearContraction::new(
        e.base_scale.unwrap(),
        e.fiber_scale.unwrap(),
        e.shear_amp.unwrap(),
        e.shear_freq.unwrap(),
        (domain[0], domain[1]),
        e.fiber_bound.unwrap(),
    )?;
    let sigma0 = ConstantSection(0.0);
    let sec = solve_invariant_section(&fc, &sigma0, n.cells.unwrap(), n.tol.unwrap(), n.max_iters.unwrap())?;
    let plan = SamplingPlan {
        window: (domain[0], domain[1]),
        n_pairs: n.n_pairs.unwrap(),
        scale_min: n.scale_min.unwrap(),
        scale_max: n.scale_max.unwrap(),
        seed: cfg.seed(),
        anchor: None,
    };
    let samples = sample_map(|x| sec.exact_at(x), |a: &f64, b: &f64| (a - b).abs(), &plan)?;
    let fit = fit_holder(&samples)?;
    let pair = PointBracket::contraction_pair(fc.fiber_lipschitz(), fc.base_rate());
    let report = hlab_core::bunching::BracketingReport::from_constants(pair);
    let predicted = predicted_exponent(&report, ExponentCondition::ThmACu, ExponentMode::Uniform)?;
    let v = verdict(&fit, &predicted, n.verdict_margin.unwrap());

    let sampled = sec.sampled();
    let mut a = Artifacts::default();
    let build = |a: &mut Artifacts| -> Result<(), Failure> {
        let rows = sampled.nodes().zip(&sampled.values).map(|(x, v)| vec![num(x), num(*v)]).collect();
        table(a, "section.csv", &SECTION_HEADER, rows)?;
        let log = sec.log.iter().map(|r| vec![r.iter.to_string(), num(r.sup_change), num(r.ratio)]).collect();
        table(a, "convergence.csv", &["iter", "sup_change", "ratio"], log)?;
        table(a, "holonomy_samples.csv", &HOLONOMY_HEADER, samples_rows(&samples))?;
        table(a, "buckets.csv", &BUCKET_HEADER, bucket_rows(&fit))?;
        let mut kv = fit_entries(&fit);
        kv.extend([
            ("iterations".into(), sec.iterations().to_string()),
            ("residual".into(), num(sec.residual())),
            ("fixed_point_error_bound".into(), num(sec.fixed_point_error_bound())),
            ("predicted_condition".into(), predicted.condition.name().to_string()),
            ("predicted_theta".into(), num(predicted.theta_max)),
            ("verdict".into(), v.name().to_string()),
        ]);
        a.key_values("fit_summary.csv", &kv)?;
        if cfg.plots {
            let stride = (sampled.values.len() / 4000).max(1);
            let pts: Vec<(f64, f64)> =
                sampled.nodes().zip(&sampled.values).step_by(stride).map(|(x, v)| (x, *v)).collect();
            a.text("section.svg", plot::curve("invariant section", "x", "value", &pts));
            a.text(
                "holder.svg",
                plot::holder_scatter("section increments", &samples, Some((fit.theta_hat, fit.h_hat))),
            );
        }
        Ok(())
    };
    let summary = vec![
        format!("{} graph-transform iterations, residual {}", sec.iterations(), num(sec.residual())),
        format!("fitted exponent {} (predicted {}): {}", num(fit.theta_hat), num(predicted.theta_max), v.name()),
    ];
    build(&mut a)?;
    Ok(Outcome { artifacts: a, summary })
}

fn holonomy(cfg: &Resolved) -> Result<Outcome, Error> {
    let (e, n) = (&cfg.experiment, &cfg.numeric);
    let side = LeafSide::parse(e.side.as_deref().unwrap()).expect("checked by resolve");
    let r = n.radius.unwrap();
    let model = StrongFoliation::new(cfg.system, side, r)?;
    let source = Transversal::new(wrap(&e.source_base.unwrap())?, &e.source_direction.unwrap(), r)?;
    let target = Transversal::new(wrap(&e.target_base.unwrap())?, &e.target_direction.unwrap(), 2.0 * r)?;
    let path: Vec<TorusPoint> = e.path.as_ref().unwrap().iter().map(|p| wrap(p)).collect::<Result<_, _>>()?;
    let samples = sample_pairs(
        |x| holonomy_map(&model, &source, &target, &path, x),
        &source,
        n.n_pairs.unwrap(),
        n.scale_min.unwrap(),
        n.scale_max.unwrap(),
        cfg.seed(),
    )?;
    let fit = fit_holder(&samples)?;
    let report = bracketing_on_grid(&cfg.system, n.grid.unwrap(), n.splitting_iters.unwrap(), n.margin.unwrap())?;
    let mode = mode_of(cfg);
    let mut predictions = Vec::new();
    for c in conditions_of(cfg) {
        predictions.push(predicted_exponent(&report, c, mode)?);
    }
    let mut kv = fit_entries(&fit);
    let mut summary = vec![format!(
        "fitted exponent {} (envelope {}) over {} pairs",
        num(fit.theta_hat),
        num(fit.envelope_theta),
        fit.n_samples
    )];
    for p in &predictions {
        let v = verdict(&fit, p, n.verdict_margin.unwrap());
        kv.push((format!("predicted_theta:{}", p.condition), num(p.theta_max)));
        kv.push((format!("verdict:{}", p.condition), v.name().to_string()));
        summary.push(format!("{}: predicted {} -> {}", p.condition, num(p.theta_max), v.name()));
    }
    let mut a = Artifacts::default();
    let build = |a: &mut Artifacts| -> Result<(), Failure> {
        table(a, "holonomy_samples.csv", &HOLONOMY_HEADER, samples_rows(&samples))?;
        table(a, "buckets.csv", &BUCKET_HEADER, bucket_rows(&fit))?;
        a.key_values("fit_summary.csv", &kv)?;
        if cfg.plots {
            a.text(
                "holder.svg",
                plot::holder_scatter("holonomy increments", &samples, Some((fit.theta_hat, fit.h_hat))),
            );
        }
        Ok(())
    };
    build(&mut a)?;
    Ok(Outcome { artifacts: a, summary })
}

fn base_system(sys: &SystemSpec) -> hlab_core::Result<SystemSpec> {
    SystemSpec::new(SystemKind::PerturbedAnosov, sys.matrix(), sys.delta(), 0.0, sys.base_shape(), sys.fiber_shape())
}

fn conjugacy_rows(field: &ConjugacyField) -> Vec<Vec<String>> {
    let pad = |p: &TorusPoint| {
        let mut v: Vec<String> = p.coords().iter().map(|&x| num(x)).collect();
        v.resize(3, String::new());
        v
    };
    field
        .grid
        .iter()
        .zip(&field.values)
        .zip(&field.residuals)
        .map(|((p, h), r)| {
            let mut row = pad(p);
            row.extend(pad(h));
            row.push(num(field.tail_bound));
            row.push(num(*r));
            row
        })
        .collect()
}

/// Cell centers of an `n × n` base grid, each with `m` heights. Cell centers
/// avoid the fixed points at the lattice corners, where every perturbation
/// in the system families vanishes.
fn center_grid(n: usize, m: usize) -> hlab_core::Result<Vec<TorusPoint>> {
    let c = |i: usize, n: usize| (i as f64 + 0.5) / n as f64;
    let mut out = Vec::with_capacity(n * n * m);
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                out.push(TorusPoint::new(&[c(i, n), c(j, n), k as f64 / m as f64])?);
            }
        }
    }
    Ok(out)
}

fn conjugacy(cfg: &Resolved) -> Result<Outcome, Error> {
    let (e, n) = (&cfg.experiment, &cfg.numeric);
    let g = cfg.system;
    let (grid_n, r, tol) = (n.grid.unwrap(), n.radius.unwrap(), n.tol.unwrap());
    let lattice = 2 * grid_n * (64 / grid_n).max(1);
    let base = base_system(&g)?;
    let stable = e.method.as_deref() == Some("stable");
    let (field, oracle_error, sweeps) = if stable {
        let spec = AmalgamSpec::standard(g, r)?;
        let grid = center_grid(grid_n, 1)?.iter().map(|p| wrap(&p.coords()[..2])).collect::<Result<Vec<_>, _>>()?;
        let field = conjugacy_field_stable(&spec, &grid, tol)?;
        let h0 = anosov_base_conjugacy(g.matrix(), &base, lattice, 1e-12)?;
        let mut err: f64 = 0.0;
        for (x, s) in field.grid.iter().zip(&field.values) {
            let oracle = leaf_intersection_su(&g, x, &h0.apply(x)?)?;
            err = err.max(torus_dist(s, &oracle)?);
        }
        (field, err, h0.sweeps)
    } else {
        let f =
            SystemSpec::new(SystemKind::SkewProduct, g.matrix(), 0.0, g.epsilon(), g.base_shape(), g.fiber_shape())?;
        let family = e.tilt.map_or(TransversalFamily::Horizontal, TransversalFamily::Tilted);
        let grid = center_grid(grid_n, n.fiber_grid.unwrap())?;
        let field = conjugacy_field_center(&f, &g, &grid, r, tol, family)?;
        let h0 = anosov_base_conjugacy(g.matrix(), &base, lattice, 1e-12)?;
        let mut err: f64 = 0.0;
        for (p, h) in field.grid.iter().zip(&field.values) {
            let b = h0.apply(&wrap(&p.coords()[..2])?)?;
            // Tilted fibers move along the center leaf, which is vertical over the base.
            err = err.max(torus_dist(&b, &wrap(&h.coords()[..2])?)?);
        }
        (field, err, h0.sweeps)
    };
    let summary = vec![
        format!("{} points, max equivariance residual {}", field.grid.len(), num(field.max_residual())),
        format!("max distance to the structural-stability oracle {}", num(oracle_error)),
    ];
    let kv = vec![
        ("method".to_string(), e.method.clone().unwrap_or_default()),
        ("points".to_string(), field.grid.len().to_string()),
        ("window".to_string(), field.window.to_string()),
        ("tail_bound".to_string(), num(field.tail_bound)),
        ("max_resid".to_string(), num(field.max_residual())),
        ("oracle_lattice".to_string(), lattice.to_string()),
        ("oracle_max_error".to_string(), num(oracle_error)),
        ("oracle_sweeps".to_string(), sweeps.to_string()),
    ];
    let mut a = Artifacts::default();
    let build = |a: &mut Artifacts| -> Result<(), Failure> {
        table(a, "conjugacy.csv", &CONJUGACY_HEADER, conjugacy_rows(&field))?;
        a.key_values("conjugacy_summary.csv", &kv)
    };
    build(&mut a)?;
    Ok(Outcome { artifacts: a, summary })
}

fn suspension(cfg: &Resolved) -> Result<Outcome, Error> {
    let n = &cfg.numeric;
    let g = cfg.system;
    let f = SystemSpec::new(SystemKind::SkewProduct, g.matrix(), 0.0, g.epsilon(), g.base_shape(), g.fiber_shape())?;
    let lp = SuspensionLoop::new(f, g)?;
    let grid = center_grid(n.grid.unwrap(), n.fiber_grid.unwrap())?;
    let (r, steps) = (n.radius.unwrap(), n.t_steps.unwrap());
    let mut rows = Vec::with_capacity(grid.len());
    let (mut worst_diff, mut worst_halving): (f64, f64) = (0.0, 0.0);
    for p in &grid {
        let s = suspension_holonomy(&lp, p, p, steps)?;
        let c = leaf_conjugacy_center(&f, &g, p, r, n.tol.unwrap())?;
        let diff = torus_dist(&s.point, &c.point)?;
        worst_diff = worst_diff.max(diff);
        worst_halving = worst_halving.max(s.halving_change);
        let mut row: Vec<String> = p.coords().iter().chain(s.point.coords()).map(|&x| num(x)).collect();
        row.push(num(s.halving_change));
        row.push(num(diff));
        rows.push(row);
    }
    let summary = vec![
        format!("{} points, {steps} loop steps", grid.len()),
        format!("max distance to the center conjugacy {}, max halving change {}", num(worst_diff), num(worst_halving)),
    ];
    let kv = vec![
        ("points".to_string(), grid.len().to_string()),
        ("t_steps".to_string(), steps.to_string()),
        ("max_center_distance".to_string(), num(worst_diff)),
        ("max_halving_change".to_string(), num(worst_halving)),
    ];
    let mut a = Artifacts::default();
    let build = |a: &mut Artifacts| -> Result<(), Failure> {
        table(a, "suspension.csv", &CONJUGACY_HEADER, rows)?;
        a.key_values("suspension_summary.csv", &kv)
    };
    build(&mut a)?;
    Ok(Outcome { artifacts: a, summary })
}

fn leafexp(cfg: &Resolved) -> Result<Outcome, Error> {
    let (e, n) = (&cfg.experiment, &cfg.numeric);
    let k_max = n.k_max.unwrap();
    let p = wrap(&e.point.unwrap())?;
    let report = leaf_expansivity_probe(&cfg.system, &p, k_max)?;
    let control = leaf_separation(&cfg.system, &p, &wrap(&e.control.unwrap())?, k_max)?;
    let control_max = control.iter().map(|c| c.1).fold(0.0, f64::max);
    let rows = report.distances.iter().zip(&control).map(|(a, b)| vec![a.0.to_string(), num(a.1), num(b.1)]).collect();
    let kv = vec![
        ("p1".to_string(), num(report.p.get(0))),
        ("p2".to_string(), num(report.p.get(1))),
        ("q1".to_string(), num(report.q.get(0))),
        ("q2".to_string(), num(report.q.get(1))),
        ("coefficient_u".to_string(), num(report.coefficients.0)),
        ("coefficient_s".to_string(), num(report.coefficients.1)),
        ("initial_distance".to_string(), num(report.initial_distance)),
        ("max_distance".to_string(), num(report.max_distance)),
        ("control_max_distance".to_string(), num(control_max)),
    ];
    let summary = vec![format!(
        "constructed pair: initial {} max {}; control pair max {}",
        num(report.initial_distance),
        num(report.max_distance),
        num(control_max)
    )];
    let mut a = Artifacts::default();
    let build = |a: &mut Artifacts| -> Result<(), Failure> {
        table(a, "leafexp.csv", &["k", "probe", "control"], rows)?;
        a.key_values("leafexp_summary.csv", &kv)?;
        if cfg.plots {
            let pts: Vec<(f64, f64)> = report.distances.iter().map(|d| (d.0 as f64, d.1)).collect();
            let ctl: Vec<(f64, f64)> = control.iter().map(|d| (d.0 as f64, d.1)).collect();
            a.text("probe.svg", plot::curve("constructed pair", "k", "leaf distance", &pts));
            a.text("control.svg", plot::curve("control pair", "k", "leaf distance", &ctl));
        }
        Ok(())
    };
    build(&mut a)?;
    Ok(Outcome { artifacts: a, summary })
}

fn gallery(cfg: &Resolved) -> Result<Outcome, Error> {
    let name = GalleryName::parse(cfg.experiment.gallery.as_deref().unwrap_or(""))?;
    let run = run_gallery(name, cfg.numeric.n_pairs.unwrap(), cfg.seed())?;
    let mut summary = vec![format!(
        "{}: fitted exponent {}, finest local slope {}",
        name.name(),
        num(run.fit.theta_hat),
        run.fit.finest_local_slope().map(num).unwrap_or_default()
    )];
    for (v, ok) in &run.verdicts {
        summary.push(format!("{v}: {}", if *ok { "pass" } else { "fail" }));
    }
    let mut kv = fit_entries(&run.fit);
    kv.extend(fit_entries(&run.reference_fit).into_iter().map(|(k, v)| (format!("reference:{k}"), v)));
    let mut a = Artifacts::default();
    let build = |a: &mut Artifacts| -> Result<(), Failure> {
        table(a, "holonomy_samples.csv", &HOLONOMY_HEADER, samples_rows(&run.samples))?;
        table(a, "reference_samples.csv", &HOLONOMY_HEADER, samples_rows(&run.reference_samples))?;
        table(a, "buckets.csv", &BUCKET_HEADER, bucket_rows(&run.fit))?;
        table(a, "reference_buckets.csv", &BUCKET_HEADER, bucket_rows(&run.reference_fit))?;
        let verdicts = run.verdicts.iter().map(|(v, ok)| vec![v.clone(), ok.to_string()]).collect();
        table(a, "verdicts.csv", &["verdict", "passed"], verdicts)?;
        a.key_values("fit_summary.csv", &kv)?;
        if cfg.plots {
            a.text("holder.svg", plot::holder_scatter(name.name(), &run.samples, None));
            a.text("reference.svg", plot::holder_scatter("reference map", &run.reference_samples, None));
        }
        Ok(())
    };
    build(&mut a)?;
    Ok(Outcome { artifacts: a, summary })
}
