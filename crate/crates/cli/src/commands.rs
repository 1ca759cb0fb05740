//! Subcommand implementations. Each returns the verdict; errors map to exit codes.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};
use spikelab::bubble::BubbleParams;
use spikelab::config::{parse_domain, parse_ensemble, BetaSpec};
use spikelab::constants::ConstantsTable;
use spikelab::domain::DomainDescriptor;
use spikelab::geometry::{point, to_array, Box4, Point4};
use spikelab::green_robin::{brouwer_degree, find_robin_critical_points, DegreeSettings, NewtonSettings, RobinEvaluator};
use spikelab::projection::Projector;
use spikelab::quadrature::lemmas::{lemma_a2, lemma_a4, lemma_a5, taylor_stability, TaylorKind};
use spikelab::quadrature::QuadratureSpec;
use spikelab::radial_solver::concentration_study;
use spikelab::reduced_energy::beta::lambda_grid;
use spikelab::reduced_energy::{beta_admissible, solve_reduced_system, SolveMode, SolveSettings};
use spikelab::verify::{verify_all, VerifySettings};

use crate::output::{emit, Envelope};
use crate::{Cli, CliError, Command, Format, Lemma, Mode};

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_domain(path: Option<&PathBuf>) -> Result<DomainDescriptor, CliError> {
    match path {
        Some(p) => Ok(parse_domain(&read(p)?, &p.display().to_string())?),
        None => Ok(DomainDescriptor::unit_ball()),
    }
}

fn path_str(p: Option<&PathBuf>) -> Value {
    p.map_or(Value::Null, |p| json!(p.display().to_string()))
}

fn csv_line(values: &[f64]) -> String {
    let mut s = values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

/// Writes the envelope to `out`, or to stdout.
fn report<T: serde::Serialize>(name: &str, config: Value, pass: bool, result: T, out: Option<&Path>) -> Result<bool, CliError> {
    emit(out, &Envelope::new(name, config, pass, result).to_json()?)?;
    Ok(pass)
}

pub fn run(cli: &Cli) -> Result<bool, CliError> {
    let seed = cli.seed;
    match &cli.command {
        Command::Constants { json, out } => {
            let table = ConstantsTable::new();
            if *json {
                return report("constants", json!({ "seed": seed }), true, table, out.as_deref());
            }
            let mut s = String::new();
            for (k, v) in [
                ("c4", table.c4),
                ("omega3", table.omega3),
                ("alpha4", table.alpha4),
                ("A", table.a),
                ("I_3", table.i3),
                ("I_4", table.i4),
                ("leading_level", table.leading_level),
                ("lambda1_unit_ball", table.lambda1_unit_ball),
            ] {
                s.push_str(&format!("{k} = {v}\n"));
            }
            emit(out.as_deref(), &s)?;
            Ok(true)
        }
        Command::Robin { domain, grid, out, format } => {
            let d = load_domain(Some(domain))?;
            let ev = RobinEvaluator::new(d.clone())?;
            let n = (*grid).max(1);
            let bb = d.bounding_box();
            let o = d.origin;
            let floor = ev.stencil_margin();
            let pts: Vec<Point4> = (0..n * n)
                .map(|k| {
                    let (i, j) = (k / n, k % n);
                    let mut x = o;
                    x[0] = bb.lo[0] + (i as f64 + 0.5) / n as f64 * bb.width(0);
                    x[1] = bb.lo[1] + (j as f64 + 0.5) / n as f64 * bb.width(1);
                    point(x)
                })
                .filter(|x| d.margin(x) > floor)
                .collect();
            let rows: Vec<Vec<f64>> = pts
                .par_iter()
                .map(|x| {
                    let g = ev.robin_grad(x)?;
                    let a = to_array(x);
                    Ok(vec![a[0], a[1], a[2], a[3], ev.robin(x)?, g[0], g[1], g[2], g[3]])
                })
                .collect::<spikelab::Result<_>>()?;
            let config = json!({ "seed": seed, "domain_file": path_str(Some(domain)), "domain": d, "grid": n });
            match format {
                Format::Csv => {
                    let mut s = String::from("x1,x2,x3,x4,tau,g1,g2,g3,g4\n");
                    rows.iter().for_each(|r| s.push_str(&csv_line(r)));
                    emit(out.as_deref(), &s)?;
                    Ok(true)
                }
                Format::Json => report("robin", config, true, rows, out.as_deref()),
            }
        }
        Command::CriticalPoints { domain, bx, starts, certify, out } => {
            let d = load_domain(Some(domain))?;
            let bx = Box4::from_interleaved(bx).ok_or_else(|| CliError::Usage(format!("--box needs 8 numbers, got {}", bx.len())))?;
            let ev = RobinEvaluator::new(d.clone())?;
            let points = find_robin_critical_points(&ev, &[bx], *starts, &NewtonSettings::default())?;
            let cert = if *certify { Some(brouwer_degree(&ev, &bx, &DegreeSettings::default())?) } else { None };
            let config = json!({ "seed": seed, "domain_file": path_str(Some(domain)), "domain": d, "box": bx, "starts": starts, "certify": certify });
            report("critical-points", config, true, json!({ "critical_points": points, "certificate": cert }), out.as_deref())
        }
        Command::ProjectCheck { domain, xi, deltas, out, format } => {
            let d = load_domain(Some(domain))?;
            let xi: [f64; 4] = xi.as_slice().try_into().map_err(|_| CliError::Usage(format!("--xi needs 4 numbers, got {}", xi.len())))?;
            let proj = Projector::new(d.clone())?;
            let reports = deltas
                .iter()
                .map(|&delta| proj.projection_defect(&BubbleParams::unit(delta, point(xi))?))
                .collect::<spikelab::Result<Vec<_>>>()?;
            let mut by_delta: Vec<_> = reports.iter().collect();
            by_delta.sort_by(|a, b| b.delta.total_cmp(&a.delta));
            let pass = by_delta.windows(2).all(|w| w[1].defect_over_delta < w[0].defect_over_delta);
            match format {
                Format::Csv => {
                    let mut s = String::from("delta,defect,defect_over_delta,argmax1,argmax2,argmax3,argmax4,exact_residual\n");
                    for r in &reports {
                        let a = r.argmax;
                        s.push_str(&csv_line(&[r.delta, r.defect, r.defect_over_delta, a[0], a[1], a[2], a[3], r.exact_residual]));
                    }
                    emit(out.as_deref(), &s)?;
                    Ok(pass)
                }
                Format::Json => {
                    let config = json!({ "seed": seed, "domain_file": path_str(Some(domain)), "domain": d, "xi": xi, "deltas": deltas });
                    report("project-check", config, pass, reports, out.as_deref())
                }
            }
        }
        Command::Asymptotics { lemma, domain, j, out } => {
            let d = load_domain(domain.as_ref())?;
            let spec = QuadratureSpec { seed, ..QuadratureSpec::default() };
            let o = point(d.origin);
            let r = d.inradius();
            let x1 = o + point([0.4 * r, 0.0, 0.0, 0.0]);
            let x2 = o - point([0.4 * r, 0.0, 0.0, 0.0]);
            let config = json!({ "seed": seed, "domain_file": path_str(domain.as_ref()), "domain": d, "lemma": lemma, "j": j, "quadrature": spec });
            match lemma {
                Lemma::A3 => {
                    let seeds: Vec<u64> = (0..5).map(|k| seed.wrapping_add(k)).collect();
                    let reps: Vec<_> = TaylorKind::all(3.0).iter().map(|&k| taylor_stability(k, 1_000_000, 10.0, &seeds, 0.05)).collect();
                    let pass = reps.iter().all(|t| t.pass);
                    report("asymptotics", config, pass, reps, out.as_deref())
                }
                _ => {
                    let reps = match lemma {
                        Lemma::A2 => lemma_a2(&d, o, &[1e-2, 1e-3, 1e-4, 1e-5], &spec)?,
                        Lemma::A4 => lemma_a4(&d, x1, x2, &[3e-2, 1e-2, 3e-3], &spec)?,
                        _ => lemma_a5(&Projector::new(d.clone())?, x1, x2, &[3e-2, 1e-2, 3e-3], *j, &spec, (1.7, 2.3))?,
                    };
                    let pass = reps.iter().all(|r| r.pass);
                    report("asymptotics", config, pass, reps, out.as_deref())
                }
            }
        }
        Command::ReducedEnergy { domain, ensemble, mode, starts, out } => {
            let d = load_domain(Some(domain))?;
            let ens = parse_ensemble(&read(ensemble)?, &ensemble.display().to_string())?;
            let ev = RobinEvaluator::new(d.clone())?;
            let st = SolveSettings { starts: *starts, eta: Some(ens.eta), ..SolveSettings::default() };
            let solve_mode = match mode {
                Mode::Min => SolveMode::Minimization,
                Mode::Degree => SolveMode::Degree,
            };
            let rep = solve_reduced_system(&ev, &ens.lambdas, &ens.mus, &ens.boxes, solve_mode, &st)?;
            let beta = match ens.beta {
                BetaSpec::Schedule(s) => {
                    let taus = rep.xi_star.iter().map(|x| ev.robin(&point(*x))).collect::<spikelab::Result<Vec<_>>>()?;
                    Some(beta_admissible(&s, &lambda_grid(1.0, 0.05, 12), &taus, 1e-3)?)
                }
                BetaSpec::Value(_) => None,
            };
            let config = json!({
                "seed": seed,
                "domain_file": path_str(Some(domain)),
                "ensemble_file": path_str(Some(ensemble)),
                "domain": d,
                "ensemble": ens,
                "mode": mode,
                "solve": st,
            });
            report("reduced-energy", config, true, json!({ "critical_point": rep, "beta_admissibility": beta }), out.as_deref())
        }
        Command::RadialStudy { lambdas, mu, tol, out, format, report: report_path } => {
            let study = concentration_study(lambdas, *mu, *tol)?;
            let pass = study.d_positive
                && study.delta_strictly_decreasing
                && study.energy_within_tolerance
                && (study.intercept_within_tolerance || study.hard_property);
            let config = json!({ "seed": seed, "lambdas": lambdas, "mu": mu, "tol": tol });
            if let Some(p) = report_path {
                emit(Some(p), &Envelope::new("radial-study", config.clone(), pass, &study).to_json()?)?;
            }
            match format {
                Format::Csv => emit(out.as_deref(), &study.to_csv())?,
                Format::Json => {
                    report("radial-study", config, pass, &study, out.as_deref())?;
                }
            }
            Ok(pass)
        }
        Command::VerifyAll { domain, out } => {
            let d = load_domain(domain.as_ref())?;
            let st = VerifySettings { seed, ..VerifySettings::default() };
            let rep = verify_all(&d, &st)?;
            let config = json!({ "seed": seed, "domain_file": path_str(domain.as_ref()), "settings": st });
            report("verify-all", config, rep.all_pass, rep.clone(), out.as_deref())
        }
    }
}
