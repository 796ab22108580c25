use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use polygrpd::folired::{self as fr, ConditionStatus};
use polygrpd::polyspace::{self as ps, PolyForm, Subspace};
use polygrpd::ppsm::{self as pp, GaugeParameter, PathVariation};
use polygrpd::relational as rel;
use polygrpd::structures as st;
use serde_json::json;

use crate::config::{self, Config};
use crate::report::{self, Check, Report, NOT_VERIFIED_GLOBAL};
use crate::CliError;

/// Config values after command-line overrides.
pub struct Settings {
    pub config: Config,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub grid: Option<usize>,
    pub tolerance_scale: f64,
    pub out: PathBuf,
}

impl Settings {
    fn seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Config("`seed` is required for randomized suites".into()))
    }

    fn samples(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }

    fn tol(&self, t: f64) -> f64 {
        t * self.tolerance_scale
    }

    fn order(&self, default: usize) -> usize {
        self.config.order.unwrap_or(default)
    }

    fn scenario(&self, default: &str) -> String {
        self.config.scenario.clone().unwrap_or_else(|| default.to_string())
    }

    fn structure(&self) -> Result<st::PolyPoissonStructure, CliError> {
        let def = self
            .config
            .structure
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [structure] table".into()))?;
        config::build_structure(def)
    }
}

fn runtime(e: polygrpd::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn check_structure(s: &Settings) -> Result<Report, CliError> {
    let seed = s.seed()?;
    let structure = s.structure()?;
    let n = s.samples(100);
    let t = Instant::now();
    let rep = st::check_axioms(&structure, n, seed).map_err(runtime)?;
    let checks = rep
        .checks()
        .iter()
        .map(|c| Check::measured(&c.name, c.worst_residual, s.tol(c.tolerance), c.samples, &t).with_detail(c.detail.clone()))
        .collect();
    let data = json!({
        "structure": structure.name(),
        "dim": structure.dim(),
        "order": structure.order(),
        "frame_size": structure.frame_size(),
    });
    Ok(Report::new("check-structure", &s.scenario(structure.name()), Some(seed), checks, data))
}

pub fn classify(s: &Settings) -> Result<Report, CliError> {
    let def = s
        .config
        .classify
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [classify] table".into()))?;
    let to_matrix = |rows: &Vec<Vec<f64>>| -> Result<DMatrix<f64>, CliError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(CliError::Config("form components must be square".into()));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    };
    let comps = def.form.iter().map(to_matrix).collect::<Result<Vec<_>, _>>()?;
    let omega = PolyForm::new(comps).map_err(|e| CliError::Config(e.to_string()))?;
    let n = omega.dim();
    if def.subspace.iter().any(|v| v.len() != n) {
        return Err(CliError::Config(format!("subspace vectors must have length {n}")));
    }
    let vectors: Vec<DVector<f64>> = def.subspace.iter().map(|v| DVector::from_vec(v.clone())).collect();
    let l = Subspace::from_vectors(n, &vectors);
    let t = Instant::now();
    let c = ps::classify(&omega, &l).map_err(|e| CliError::Config(e.to_string()))?;
    let dims = ps::poly_lagrangian_dimensions(omega.order(), n);
    let mut checks = Vec::new();
    let e = def.expect.clone().unwrap_or_default();
    for (name, want, got) in [
        ("isotropic", e.isotropic, c.isotropic),
        ("coisotropic", e.coisotropic, c.coisotropic),
        ("lagrangian", e.lagrangian, c.lagrangian),
        ("poly_lagrangian", e.poly_lagrangian, c.poly_lagrangian),
    ] {
        if let Some(w) = want {
            checks.push(Check::flag(name, w == got, 1, &t).with_detail(format!("expected {w}, got {got}")));
        }
    }
    checks.push(Check::flag("poly_lagrangian_implies_lagrangian", !c.poly_lagrangian || c.lagrangian, 1, &t));
    let data = json!({
        "dim": n,
        "order": omega.order(),
        "subspace_dim": l.dim(),
        "isotropic": c.isotropic,
        "coisotropic": c.coisotropic,
        "lagrangian": c.lagrangian,
        "poly_lagrangian": c.poly_lagrangian,
        "poly_lagrangian_dimensions": dims,
        "isotropy_defect": ps::isotropy_defect(&omega, &l),
    });
    Ok(Report::new("classify", &s.scenario("classify"), None, checks, data))
}

pub fn foliation(s: &Settings) -> Result<Report, CliError> {
    let seed = s.seed()?;
    let structure = s.structure()?;
    let n = s.samples(50);
    let t = Instant::now();
    let pts = structure.chart().sample_points(n, seed, st::sample_margin(&structure));
    let mut ranks = Vec::with_capacity(n);
    let mut residual = 0.0_f64;
    let mut nondegenerate = true;
    for x in &pts {
        ranks.push(fr::distribution_at(&structure, x).dim());
        let lf = fr::leaf_two_form(&structure, x).map_err(runtime)?;
        residual = residual.max(lf.residual);
        nondegenerate &= lf.is_nondegenerate();
    }
    let (lo, hi) = (ranks.iter().copied().min().unwrap_or(0), ranks.iter().copied().max().unwrap_or(0));
    let checks = vec![
        Check::measured("leaf_form_residual", residual, s.tol(fr::LEAF_TOL), n, &t),
        Check::flag("leaf_form_nondegenerate", nondegenerate, n, &t),
    ];
    let data = json!({
        "structure": structure.name(),
        "frame_size": structure.frame_size(),
        "distribution_rank_min": lo,
        "distribution_rank_max": hi,
    });
    Ok(Report::new("foliation", &s.scenario(structure.name()), Some(seed), checks, data))
}

pub fn reduce(s: &Settings) -> Result<Report, CliError> {
    let seed = s.seed()?;
    let name = s.scenario("covelocity-translation");
    let r = s.order(2);
    let sc = match name.as_str() {
        "covelocity-translation" => fr::covelocity_translation(r),
        "covelocity-rotation" => fr::covelocity_rotation(r),
        "so3-rotation" => fr::so3_rotation(r),
        "violating" => fr::violating_scenario(),
        other => return Err(CliError::Config(format!("unknown reduction scenario `{other}`"))),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    let n = s.samples(30);
    let t = Instant::now();
    let rep = fr::run_reduction(&sc, n, seed).map_err(runtime)?;
    let red = &rep.reducibility;
    let checks = vec![
        Check::flag("reducible", red.reducible(), n, &t).with_detail(format!(
            "rank constant {}, polar in V {}, worst polar defect {:.3e}",
            red.cond_a_rank_constant, red.cond_b_polar_in_v, red.worst_polar_defect
        )),
        Check::flag("mw_condition", rep.mw_all, rep.level_points, &t)
            .with_detail(format!("worst defect {:.3e}", rep.worst_mw_defect)),
        Check::flag("reduced_nondegenerate", rep.reduced_nondegenerate && rep.min_reduced_singular_value > 1e-6, rep.level_points, &t)
            .with_detail(format!("smallest retained singular value {:.6e}", rep.min_reduced_singular_value)),
        Check::measured("moment_defect", rep.moment_defect, s.tol(fr::MORITA_TOL), n, &t),
    ];
    let data = json!({
        "scenario": rep.name,
        "level_points": rep.level_points,
        "reduced_dim": rep.reduced_dim,
        "rank_min": red.min_rank,
        "rank_max": red.max_rank,
    });
    Ok(Report::new("reduce", &name, Some(seed), checks, data))
}

pub fn morita(s: &Settings) -> Result<Report, CliError> {
    let seed = s.seed()?;
    let g = config::algebra(s.config.algebra.as_deref().unwrap_or("so3"))?;
    let r = s.order(2);
    let n = s.samples(50);
    let t = Instant::now();
    let rep = fr::morita_conditions_check(&g, r, n, seed).map_err(runtime)?;
    let tol = s.tol(fr::MORITA_TOL);
    let mut checks = vec![
        Check::flag("rank_left", rep.min_rank_left == rep.expected_rank, n, &t)
            .with_detail(format!("min rank {} of {}", rep.min_rank_left, rep.expected_rank)),
        Check::flag("rank_right", rep.min_rank_right == rep.expected_rank, n, &t)
            .with_detail(format!("min rank {} of {}", rep.min_rank_right, rep.expected_rank)),
        Check::measured("orthogonality", rep.orthogonality_residual, tol, n, &t),
        Check::measured("bracket_vanishing", rep.bracket_residual, tol, n, &t),
    ];
    for c in &rep.conditions {
        let base = Check::measured(&format!("condition_{}", c.index), c.worst_residual, tol, n, &t).with_detail(c.detail.clone());
        checks.push(match c.status {
            ConditionStatus::Verified => base.with_status("pass"),
            ConditionStatus::Failed => base.with_status("fail"),
            ConditionStatus::NotVerifiedGlobal => base.with_status(NOT_VERIFIED_GLOBAL),
        });
    }
    let data = json!({
        "algebra": rep.algebra,
        "order": rep.order,
        "orthogonal_complements_match": rep.orthogonal_complements_match,
        "poisson_map_residual": rep.poisson_map_residual,
    });
    Ok(Report::new("morita", &s.scenario("morita"), Some(seed), checks, data))
}

fn path_scenario(s: &Settings) -> Result<(String, pp::PathScenario), CliError> {
    let name = s.scenario("so3-direct-sum");
    let sc = pp::PathScenario::by_name(&name, s.order(2)).map_err(|e| CliError::Config(e.to_string()))?;
    Ok((name, sc))
}

fn path_csv(p: &pp::CotangentPath) -> String {
    let n = p.structure().dim();
    let k = p.structure().frame_size();
    let mut s = String::from("t");
    for i in 0..n {
        let _ = write!(s, ",x{i}");
    }
    for a in 0..k {
        let _ = write!(s, ",lambda{a}");
    }
    s.push_str(",residual\n");
    let res = p.node_residuals();
    for (j, t) in p.times().iter().enumerate() {
        let _ = write!(s, "{t:e}");
        for v in p.points()[j].iter().chain(p.coefficients()[j].iter()) {
            let _ = write!(s, ",{v:e}");
        }
        let _ = writeln!(s, ",{:e}", res[j]);
    }
    s
}

pub fn integrate_path(s: &Settings) -> Result<Report, CliError> {
    let (name, sc) = path_scenario(s)?;
    let grid = s.grid.unwrap_or(pp::DEFAULT_N);
    let t = Instant::now();
    let p = sc.solve(grid).map_err(runtime)?;
    let checks = vec![Check::measured("path_residual", p.residual(), s.tol(pp::TAU_PATH), grid, &t)];
    let hol = pp::holonomy(&p).ok().map(|h| h.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>());
    let data = json!({
        "nodes": p.nodes(),
        "source": pp::source(&p).as_slice(),
        "target": pp::target(&p).as_slice(),
        "holonomy": hol,
    });
    std::fs::create_dir_all(&s.out).map_err(|e| CliError::Io(e.to_string()))?;
    report::write_file(&s.out.join("path.csv"), &path_csv(&p))?;
    report::write_file(&s.out.join("path.txt"), &pp::write_path(&p))?;
    Ok(Report::new("integrate-path", &name, None, checks, data))
}

pub fn gauge_demo(s: &Settings) -> Result<Report, CliError> {
    let seed = s.seed()?;
    let (name, sc) = path_scenario(s)?;
    let grid = s.grid.unwrap_or(pp::DEFAULT_N);
    let g = s.config.gauge.clone();
    let flow_time = g.as_ref().and_then(|g| g.flow_time).unwrap_or(0.1);
    let steps = g.as_ref().and_then(|g| g.steps).unwrap_or(5);
    let amp = g.as_ref().and_then(|g| g.amplitude).unwrap_or(1.0);
    let probes = g.as_ref().and_then(|g| g.probes).unwrap_or(20);
    let count = s.samples(50);
    let t = Instant::now();
    let p = sc.solve(grid).map_err(runtime)?;
    let betas: Vec<_> = (0..count as u64).map(|i| GaugeParameter::random(&p, seed.wrapping_add(i), amp)).collect();
    let flowed = pp::gauge_flow_ensemble(&p, &betas, flow_time, steps).map_err(runtime)?;
    let h0 = pp::holonomy(&p).ok();
    let mut csv = String::from("index,endpoint_drift,holonomy_drift,residual\n");
    let (mut endpoint, mut hol, mut res) = (0.0_f64, 0.0_f64, 0.0_f64);
    for (i, q) in flowed.iter().enumerate() {
        let e = (pp::source(q) - pp::source(&p)).abs().max().max((pp::target(q) - pp::target(&p)).abs().max());
        let h = match (&h0, pp::holonomy(q)) {
            (Some(a), Ok(b)) => (b - a).abs().max(),
            _ => 0.0,
        };
        let rq = q.residual();
        endpoint = endpoint.max(e);
        hol = hol.max(h);
        res = res.max(rq);
        let _ = writeln!(csv, "{i},{e:e},{h:e},{rq:e}");
    }
    let t_flow = t;
    let mut checks = vec![
        Check::measured("endpoint_drift", endpoint, s.tol(1e-6), count, &t_flow),
        Check::measured("flowed_residual", res, s.tol(1e-6), count, &t_flow),
    ];
    if h0.is_some() {
        checks.push(Check::measured("holonomy_drift", hol, s.tol(1e-4), count, &t_flow));
    }
    let t = Instant::now();
    let pv: Vec<_> = (0..probes as u64).map(|i| PathVariation::random(&p, seed.wrapping_add(10_000 + i), 0.3)).collect();
    let ham_count = count.min(5);
    let mut ham = 0.0_f64;
    for b in betas.iter().take(ham_count) {
        ham = ham.max(pp::hamiltonian_identity_check(&p, b, &pv, 1e-5).map_err(runtime)?);
    }
    checks.push(Check::measured("hamiltonian_identity", ham, s.tol(1e-3), ham_count, &t));
    let moment = betas
        .iter()
        .map(|b| pp::moment_map(&p, b).map(|m| m.abs().max()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(runtime)?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(Check::measured("moment_map_on_shell", moment, s.tol(pp::TAU_PATH), count, &t));
    std::fs::create_dir_all(&s.out).map_err(|e| CliError::Io(e.to_string()))?;
    report::write_file(&s.out.join("gauge.csv"), &csv)?;
    report::write_file(&s.out.join("path.csv"), &path_csv(&p))?;
    let data = json!({
        "nodes": p.nodes(),
        "flow_time": flow_time,
        "steps": steps,
        "parameters": count,
        "reprojected": flowed.iter().filter(|q| q.was_reprojected()).count(),
    });
    Ok(Report::new("gauge-demo", &name, Some(seed), checks, data))
}

pub fn relational(s: &Settings) -> Result<Report, CliError> {
    let name = s.scenario("relational-pair");
    let q = s.config.q.unwrap_or(1);
    let r = s.order(1);
    let cfg = |e: polygrpd::Error| CliError::Config(e.to_string());
    let pair = || -> Result<rel::RelationalGroupoidData, CliError> {
        let m = rel::PolySymplecticSpace::new(st::covelocity_form(q, r)).map_err(cfg)?;
        rel::from_pair_groupoid(&m).map_err(cfg)
    };
    let model = match name.as_str() {
        "relational-pair" => pair()?,
        "relational-bundle" => rel::from_bundle_groupoid(q, r).map_err(cfg)?,
        "relational-corrupted" => rel::corrupted_inversion(&pair()?).map_err(cfg)?,
        other => return Err(CliError::Config(format!("unknown relational model `{other}`"))),
    };
    let t = Instant::now();
    let rep = rel::check_axioms(&model).map_err(runtime)?;
    let mut checks: Vec<Check> = rep
        .axioms
        .iter()
        .map(|a| {
            let mut c = Check::measured(a.name, a.defect_dim as f64, 0.0, 1, &t).with_detail(a.detail.clone());
            c.status = if a.passed { "pass" } else { "fail" }.into();
            c
        })
        .collect();
    checks.push(Check::flag("inversion_antisymplectic", rep.inversion_antisymplectic, 1, &t));
    checks.push(Check::flag("l_lagrangian", rep.l_lagrangian, 1, &t));
    let unit = rel::is_lagrangian_relation(&rel::unit_graph_counterexample());
    let data = json!({
        "model": rep.model,
        "dim": model.space.dim(),
        "order": model.space.order(),
        "unit_graph_counterexample_lagrangian": unit,
    });
    Ok(Report::new("relational", &name, None, checks, data))
}
