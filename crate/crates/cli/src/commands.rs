use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::Serialize;
use strongnf::analytic_bounds::{check_tail_sum, check_weighted_sum, BoundCheckResult};
use strongnf::normalizer::{convergence_constants, convergence_threshold, theoretical_sequences};
use strongnf::ode_verify::uniform_grid;
use strongnf::{
    build_hamiltonian_from_ode, closed_form_solution, compare, extract_x_map, integrate_ode,
    normalize, Error, ExtendedHamiltonian, MultiIndex, Normalization, NormalizationConfig,
    OdeSystem, PolyXY,
};

use crate::config::{raw_terms, BoundsGrid, Num, Problem, RawTerm};

/// Input that is well-formed but outside the theory's hypotheses.
#[derive(Debug)]
pub struct HypothesisViolation(pub String);

impl fmt::Display for HypothesisViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for HypothesisViolation {}

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_HYPOTHESIS: u8 = 2;
pub const EXIT_VIOLATION: u8 = 3;

/// Exit code for a failed command.
pub fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<HypothesisViolation>().is_some() {
        return EXIT_HYPOTHESIS;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::SmallDivisor { .. }
            | Error::DivergentIntegral { .. }
            | Error::NonResonance { .. }
            | Error::ConvergenceConditionViolated { .. }
            | Error::UnboundedGrowth { .. }
            | Error::NotQxLy(_)
            | Error::NotLy(_),
        ) => EXIT_HYPOTHESIS,
        _ => EXIT_INPUT,
    }
}

fn out_dir(flag: Option<&Path>, problem: Option<&Problem>) -> Result<PathBuf> {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| problem.and_then(|p| p.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn run_normalization(problem: &Problem, h: &ExtendedHamiltonian) -> Result<Normalization> {
    let mut cfg = NormalizationConfig::new(problem.n, problem.n_trunc, problem.r0, problem.regime);
    if let Some(m) = problem.max_iterations {
        cfg.max_iterations = m;
    }
    Ok(normalize(h, &cfg)?)
}

fn iterations_csv(out: &Normalization) -> String {
    let mut s = String::from("j,measured_norm,epsilon_theory,R_j,d_j,min_deg,chi_norm\n");
    for r in &out.records {
        s.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{},{:?}\n",
            r.j, r.measured_norm, r.epsilon_theory, r.r_j, r.d_j, r.min_deg, r.chi_norm
        ));
    }
    s
}

#[derive(Serialize)]
struct ChainFile {
    n_trunc: u32,
    lambda: Vec<[Num; 2]>,
    generator: Vec<GeneratorEntry>,
}

#[derive(Serialize)]
struct GeneratorEntry {
    j: usize,
    term: Vec<RawTerm>,
}

#[derive(Serialize)]
struct NormalizeSummary {
    success: bool,
    iterations: usize,
    final_remainder_terms: usize,
    normal_form_defect: Num,
    eps0: Num,
    eps0_analytic: Num,
    eps_a: Num,
    m_f: Num,
    k: Num,
    sigma: Num,
    theory_in_force: bool,
}

pub fn cmd_normalize(config: &Path, out_flag: Option<&Path>) -> Result<u8> {
    let problem = Problem::load(config)?;
    let h = ExtendedHamiltonian::new(problem.lambda.clone(), problem.perturbation.clone())?;
    let out = run_normalization(&problem, &h)?;
    let dir = out_dir(out_flag, Some(&problem))?;

    write(&dir, "problem.toml", &problem.raw.to_toml()?)?;
    write(&dir, "iterations.csv", &iterations_csv(&out))?;
    let chain = ChainFile {
        n_trunc: out.chain.n_trunc,
        lambda: out
            .chain
            .lambda
            .iter()
            .map(|l| [Num(l.re), Num(l.im)])
            .collect(),
        generator: out
            .chain
            .generators
            .iter()
            .enumerate()
            .map(|(j, g)| GeneratorEntry {
                j,
                term: raw_terms(&g.chi),
            })
            .collect(),
    };
    write(&dir, "chain.toml", &toml::to_string(&chain)?)?;
    let theory = &out.theory;
    let summary = NormalizeSummary {
        success: out.succeeded(),
        iterations: out.iterations(),
        final_remainder_terms: out.final_remainder.len(),
        normal_form_defect: Num(out.chain.normal_form_defect(&h)?),
        eps0: Num(theory.eps0),
        eps0_analytic: Num(theory.eps0_analytic),
        eps_a: Num(theory.eps_a),
        m_f: Num(theory.m_f),
        k: Num(theory.constants.k),
        sigma: Num(theory.constants.sigma),
        theory_in_force: theory.in_force,
    };
    write(&dir, "summary.toml", &toml::to_string(&summary)?)?;
    println!(
        "normalized in {} iteration(s); remainder terms {}; eps0 {:e} vs eps_a {:e}",
        out.iterations(),
        out.final_remainder.len(),
        theory.eps0,
        theory.eps_a
    );
    Ok(if out.succeeded() {
        EXIT_OK
    } else {
        EXIT_VIOLATION
    })
}

/// `g_l` from `f = sum_l y_l g_l(x, t)`.
fn ode_from_problem(problem: &Problem) -> Result<OdeSystem> {
    let n = problem.n;
    let mut per_component: Vec<Vec<(MultiIndex, strongnf::TimeCoeff)>> = vec![Vec::new(); n];
    for (idx, c) in problem.perturbation.iter() {
        let Some(l) = idx.linear_y_slot() else {
            return Err(
                Error::InvalidSystem(format!("term {idx} is not of the form y_l g(x, t)")).into(),
            );
        };
        per_component[l].push((
            MultiIndex::new(idx.alpha().to_vec(), vec![0; n])?,
            c.clone(),
        ));
    }
    let rhs = per_component
        .into_iter()
        .map(|terms| PolyXY::from_terms(n, problem.n_trunc, terms))
        .collect::<strongnf::Result<Vec<_>>>()?;
    Ok(OdeSystem::new(problem.lambda.clone(), rhs)?)
}

/// `re` or `re:im`, comma-separated per component.
pub fn parse_state(text: &str) -> Result<Vec<Complex64>> {
    text.split(',')
        .map(|part| {
            let part = part.trim();
            let (re, im) = part.split_once(':').unwrap_or((part, "0"));
            let re: f64 = re
                .trim()
                .parse()
                .with_context(|| format!("bad number {re:?}"))?;
            let im: f64 = im
                .trim()
                .parse()
                .with_context(|| format!("bad number {im:?}"))?;
            Ok(Complex64::new(re, im))
        })
        .collect()
}

#[derive(Serialize)]
struct VerifySummary {
    passed: bool,
    sup_abs_error: Num,
    sup_rel_error: Num,
    worst_time: Num,
    tolerance: Num,
    richardson_estimate: Num,
    iterations: usize,
}

pub struct VerifyArgs<'a> {
    pub config: &'a Path,
    pub x0: &'a str,
    pub t_end: f64,
    pub steps: usize,
    pub tolerance: f64,
    pub out_dir: Option<&'a Path>,
}

pub fn cmd_verify(args: &VerifyArgs<'_>) -> Result<u8> {
    let problem = Problem::load(args.config)?;
    let sys = ode_from_problem(&problem)?;
    let x0 = parse_state(args.x0)?;
    if x0.len() != problem.n {
        bail!("x0 has {} components, n = {}", x0.len(), problem.n);
    }
    let size = x0.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if size > problem.r0 / 2.0 {
        return Err(HypothesisViolation(format!(
            "|x0| = {size:e} lies outside the polydisk of radius R0/2 = {:e}",
            problem.r0 / 2.0
        ))
        .into());
    }
    let h = build_hamiltonian_from_ode(&sys, problem.n_trunc)?;
    let out = run_normalization(&problem, &h)?;
    let map = extract_x_map(&out.chain)?;
    let numeric = integrate_ode(&sys, &x0, args.t_end, args.steps)?;
    let closed = closed_form_solution(&map, &x0, &uniform_grid(args.t_end, args.steps))?;
    let report = compare(&closed, &numeric)?;

    let dir = out_dir(args.out_dir, Some(&problem))?;
    write(&dir, "trajectory_numeric.csv", &numeric.to_csv())?;
    write(&dir, "trajectory_closed_form.csv", &closed.to_csv())?;
    write(&dir, "error_report.csv", &report.to_csv())?;
    let passed = report.sup_abs <= args.tolerance;
    let summary = VerifySummary {
        passed,
        sup_abs_error: Num(report.sup_abs),
        sup_rel_error: Num(report.sup_rel),
        worst_time: Num(report.worst_time),
        tolerance: Num(args.tolerance),
        richardson_estimate: Num(numeric.richardson_estimate.unwrap_or(f64::NAN)),
        iterations: out.iterations(),
    };
    write(&dir, "verify_summary.toml", &toml::to_string(&summary)?)?;
    println!(
        "sup |x_numeric - x_closed_form| = {:e} (tolerance {:e}) at t = {}",
        report.sup_abs, args.tolerance, report.worst_time
    );
    Ok(if passed { EXIT_OK } else { EXIT_VIOLATION })
}

fn bound_row(
    kind: &str,
    m: u32,
    p1: f64,
    p2: f64,
    res: strongnf::Result<BoundCheckResult>,
) -> (String, RowStatus) {
    match res {
        Ok(r) => (
            format!(
                "{kind},{m},{p1:?},{p2:?},{:?},{:?},{},\n",
                r.bound_value, r.oracle_value, r.satisfied
            ),
            if r.satisfied {
                RowStatus::Ok
            } else {
                RowStatus::Violated
            },
        ),
        Err(e) => (
            format!(
                "{kind},{m},{p1:?},{p2:?},,,false,{}\n",
                csv_field(&e.to_string())
            ),
            RowStatus::Error,
        ),
    }
}

#[derive(PartialEq)]
enum RowStatus {
    Ok,
    Violated,
    Error,
}

fn csv_field(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn cmd_bounds_check(grid: Option<&Path>, out_flag: Option<&Path>) -> Result<u8> {
    let grid = match grid {
        Some(p) => BoundsGrid::load(p)?,
        None => BoundsGrid::default_grid(),
    };
    let mut csv = String::from("kind,m,param1,param2,bound,oracle,satisfied,error\n");
    let mut statuses = Vec::new();
    for row in &grid.tail {
        let (line, st) = bound_row(
            "tail",
            row.m,
            row.n_min as f64,
            row.r.0,
            check_tail_sum(row.m, row.n_min, row.r.0),
        );
        csv.push_str(&line);
        statuses.push(st);
    }
    for row in &grid.weighted {
        let (line, st) = bound_row(
            "weighted",
            row.m,
            row.mu.0,
            row.delta.0,
            check_weighted_sum(row.m, row.mu.0, row.delta.0),
        );
        csv.push_str(&line);
        statuses.push(st);
    }
    let dir = out_dir(out_flag, None)?;
    write(&dir, "bounds.csv", &csv)?;
    let violated = statuses
        .iter()
        .filter(|s| **s == RowStatus::Violated)
        .count();
    let errors = statuses.iter().filter(|s| **s == RowStatus::Error).count();
    println!(
        "{} rows: {violated} violated, {errors} domain errors",
        statuses.len()
    );
    Ok(if violated > 0 {
        EXIT_VIOLATION
    } else if errors > 0 {
        EXIT_INPUT
    } else {
        EXIT_OK
    })
}

pub fn cmd_sequences(config: &Path, out_flag: Option<&Path>) -> Result<u8> {
    let problem = Problem::load(config)?;
    let regime = problem.regime;
    let a = regime.decay_rate();
    let a_eff = if regime.is_decay() { a } else { 1.0 };
    let c = convergence_constants(problem.n, &problem.lambda, &regime, problem.r0 / 2.0);
    let eps_a = convergence_threshold(a_eff, c.sigma, c.k);
    let eps0 = match problem.eps0 {
        Some(v) => v,
        None => problem.perturbation.taylor_norm(problem.r0, a)?,
    };
    let dir = out_dir(out_flag, Some(&problem))?;
    let header = "j,eps,d,R,recursion_rel_err,satisfied,error\n";
    let rows = match theoretical_sequences(eps0, a_eff, c.k, c.sigma, problem.r0, problem.j_max) {
        Ok(rows) => rows,
        Err(e @ Error::ConvergenceConditionViolated { .. }) => {
            write(
                &dir,
                "sequences.csv",
                &format!("{header},,,,,false,{}\n", csv_field(&e.to_string())),
            )?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };
    let mut csv = String::from(header);
    let mut failed = 0;
    for r in &rows {
        let ok = r.recursion_rel_err <= 1e-12 && r.d <= 0.25 && r.r >= problem.r0 / 2.0;
        if !ok {
            failed += 1;
        }
        csv.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{},\n",
            r.j, r.eps, r.d, r.r, r.recursion_rel_err, ok
        ));
    }
    write(&dir, "sequences.csv", &csv)?;
    let d_sum: f64 = rows.iter().map(|r| r.d).sum();
    println!(
        "eps0 {eps0:e}, eps_a {eps_a:e}, sum d_j {d_sum:.6}; {failed}/{} rows unsatisfied",
        rows.len()
    );
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VIOLATION })
}
